//! End-to-end plumbing: loading a hand/object scene and running round-trip
//! trials (ground-truth configuration → distance matrix → recovery).

use std::path::Path;
use std::time::Instant;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cloud::{cloud_fk, link_meshes, load_obj, resolve_mesh_path, sample_link_clouds, sample_object_cloud};
use crate::cloud::{LinkClouds, PointCloud, SamplingConfig};
use crate::dro::compute_dro;
use crate::error::{Error, Result};
use crate::kinematics::{JointConfig, KinematicModel, LoadOptions, WRIST_DOF};
use crate::optimizer::{recover_grasp, SolveParams, StageTimings};
use crate::rng::{self, Op};

/// Half-width of the box random wrist translations are drawn from, meters.
pub const WRIST_TRANSLATION_RANGE: f64 = 0.2;
/// Tile grid used for distance-matrix evaluation.
pub const DEFAULT_BLOCKS: usize = 4;

/// A hand with its canonical link clouds, and an object cloud.
#[derive(Debug, Clone)]
pub struct Scene {
    pub model: KinematicModel,
    pub canonical: LinkClouds,
    pub object: PointCloud,
}

impl Scene {
    /// Loads a URDF, tessellates and samples its links, and samples the object mesh.
    pub fn load(
        model_path: &Path,
        mesh_dir: &Path,
        object_path: &Path,
        sampling: &SamplingConfig,
    ) -> Result<Scene> {
        Self::load_with(model_path, LoadOptions::default(), mesh_dir, object_path, sampling)
    }

    pub fn load_with(
        model_path: &Path,
        options: LoadOptions,
        mesh_dir: &Path,
        object_path: &Path,
        sampling: &SamplingConfig,
    ) -> Result<Scene> {
        let model = load_model_with(model_path, options)?;
        let canonical = sample_canonical(&model, mesh_dir, sampling)?;
        let object = sample_object_cloud(&load_obj(object_path)?, sampling)?;
        Ok(Scene {
            model,
            canonical,
            object,
        })
    }
}

pub fn load_model(path: &Path) -> Result<KinematicModel> {
    load_model_with(path, LoadOptions::default())
}

pub fn load_model_with(path: &Path, options: LoadOptions) -> Result<KinematicModel> {
    let text = std::fs::read_to_string(path).map_err(|e| {
        Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))
    })?;
    KinematicModel::from_urdf(&text, options)
}

/// Canonical link clouds, resolving mesh references inside `mesh_dir`.
pub fn sample_canonical(model: &KinematicModel, mesh_dir: &Path, sampling: &SamplingConfig) -> Result<LinkClouds> {
    let meshes = link_meshes(model, |name| load_obj(&resolve_mesh_path(mesh_dir, name)?))?;
    sample_link_clouds(model, &meshes, sampling)
}

/// A uniformly random in-limits configuration; wrist translation is kept
/// within [`WRIST_TRANSLATION_RANGE`] of the origin.
pub fn random_configuration<R: Rng>(model: &KinematicModel, rng: &mut R) -> JointConfig {
    let values = (0..model.n_dof())
        .map(|d| {
            let (mut lo, mut hi) = (model.lower_limits()[d], model.upper_limits()[d]);
            if d < 3 {
                lo = lo.max(-WRIST_TRANSLATION_RANGE);
                hi = hi.min(WRIST_TRANSLATION_RANGE);
            }
            if lo == hi {
                lo
            } else {
                rng.random_range(lo..=hi)
            }
        })
        .collect();
    JointConfig::new(values)
}

/// Open-hand start: the wrist of `q_star` with every actuated joint at mid-range.
pub fn open_hand_init(model: &KinematicModel, q_star: &[f64]) -> JointConfig {
    let values = (0..model.n_dof())
        .map(|d| {
            if d < WRIST_DOF {
                q_star[d]
            } else {
                0.5 * (model.lower_limits()[d] + model.upper_limits()[d])
            }
        })
        .collect();
    JointConfig::new(values)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialOutcome {
    pub q_star: JointConfig,
    pub q: JointConfig,
    /// Mean over body and tip links of the link-origin distance between FK(q) and FK(q*).
    pub mean_link_error: f64,
    pub max_link_error: f64,
    /// Mean absolute joint difference over all configuration entries.
    pub mean_joint_error: f64,
    pub converged: bool,
    pub iterations: usize,
    pub elapsed: StageTimings,
}

/// Ground-truth matrix at `q_star`, recovery from the open-hand start, and error measurement.
pub fn run_trial(scene: &Scene, q_star: &[f64], params: &SolveParams) -> Result<TrialOutcome> {
    let model = &scene.model;
    let robot = cloud_fk(model, q_star, &scene.canonical)?;
    let dro = compute_dro(&robot, &scene.object, DEFAULT_BLOCKS)?;
    let q_init = open_hand_init(model, q_star);
    let result = recover_grasp(model, &scene.canonical, &dro, &scene.object, &q_init, params)?;
    let truth = model.link_poses(q_star)?;
    let got = model.link_poses(&result.q)?;
    let errors: Vec<f64> = model
        .target_links()
        .map(|l| (truth[l].translation - got[l].translation).norm())
        .collect();
    let mean_joint_error = q_star
        .iter()
        .zip(result.q.iter())
        .map(|(a, b)| (a - b).abs())
        .sum::<f64>()
        / q_star.len() as f64;
    Ok(TrialOutcome {
        q_star: JointConfig::new(q_star.to_vec()),
        q: result.q,
        mean_link_error: errors.iter().sum::<f64>() / errors.len().max(1) as f64,
        max_link_error: errors.iter().copied().fold(0.0, f64::max),
        mean_joint_error,
        converged: result.report.converged,
        iterations: result.report.iterations,
        elapsed: result.elapsed,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundtripSummary {
    pub n_trials: usize,
    pub mean_link_error: f64,
    pub max_link_error: f64,
    pub mean_joint_error: f64,
    pub converged_trials: usize,
    /// Mean per-stage wall time, seconds.
    pub mean_elapsed: StageTimings,
    pub wall_time_s: f64,
    pub trials: Vec<TrialOutcome>,
}

/// `n_trials` independent trials; trial `k` draws its configuration from its own
/// seeded stream, so results do not depend on thread scheduling.
pub fn run_roundtrip(scene: &Scene, n_trials: usize, seed: u64, params: &SolveParams) -> Result<RoundtripSummary> {
    params.validate()?;
    let start = Instant::now();
    let trials = (0..n_trials)
        .into_par_iter()
        .map(|k| {
            let trial = u32::try_from(k).map_err(|_| Error::contract("too many trials"))?;
            let q_star = random_configuration(&scene.model, &mut rng::stream(seed, Op::Trial, trial));
            run_trial(scene, &q_star, params)
        })
        .collect::<Result<Vec<_>>>()?;
    // An empty run reports zeros (an empty f64 sum is -0.0).
    let mean = |f: &dyn Fn(&TrialOutcome) -> f64| {
        if trials.is_empty() {
            0.0
        } else {
            trials.iter().map(f).sum::<f64>() / trials.len() as f64
        }
    };
    Ok(RoundtripSummary {
        n_trials,
        mean_link_error: mean(&|t| t.mean_link_error),
        max_link_error: trials.iter().map(|t| t.max_link_error).fold(0.0, f64::max),
        mean_joint_error: mean(&|t| t.mean_joint_error),
        converged_trials: trials.iter().filter(|t| t.converged).count(),
        mean_elapsed: StageTimings {
            multilateration: mean(&|t| t.elapsed.multilateration),
            registration: mean(&|t| t.elapsed.registration),
            optimization: mean(&|t| t.elapsed.optimization),
        },
        wall_time_s: start.elapsed().as_secs_f64(),
        trials,
    })
}
