//! Shared fixtures for the pipeline benchmarks.

use std::path::PathBuf;

use dro_core::optimizer::{targets_at, LinkTarget};
use dro_core::pipeline::{open_hand_init, random_configuration, Scene, DEFAULT_BLOCKS};
use dro_core::rng::{self, Op};
use dro_core::{cloud_fk, compute_dro, DroMatrix, JointConfig, PointCloud, SamplingConfig};

pub fn assets() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../assets")
}

/// A hand posed at a seeded random grasp, with everything each stage consumes.
pub struct Fixture {
    pub scene: Scene,
    pub q_star: JointConfig,
    pub q_init: JointConfig,
    pub robot: PointCloud,
    pub dro: DroMatrix,
    pub targets: Vec<LinkTarget>,
}

impl Fixture {
    /// `hand` and `object` name bundled assets; `n_object` sets the matrix width.
    pub fn new(hand: &str, object: &str, n_object: usize) -> Fixture {
        let root = assets();
        let sampling = SamplingConfig {
            n_object,
            ..SamplingConfig::default()
        };
        let scene = Scene::load(
            &root.join(format!("robots/{hand}.urdf")),
            &root.join("robots"),
            &root.join(format!("objects/{object}.obj")),
            &sampling,
        )
        .expect("bundled assets load");
        let q_star = random_configuration(&scene.model, &mut rng::stream(0, Op::Trial, 0));
        let q_init = open_hand_init(&scene.model, &q_star);
        let robot = cloud_fk(&scene.model, &q_star, &scene.canonical).expect("in-limits configuration");
        let dro = compute_dro(&robot, &scene.object, DEFAULT_BLOCKS).expect("finite clouds");
        let targets = targets_at(&scene.model, &q_star).expect("in-limits configuration");
        Fixture {
            scene,
            q_star,
            q_init,
            robot,
            dro,
            targets,
        }
    }
}
