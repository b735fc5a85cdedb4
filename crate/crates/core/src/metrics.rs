//! Grasp diversity statistics, controller targets and evaluation bookkeeping.

use std::io::{BufRead, Write};

use nalgebra::{Point3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kinematics::{JointConfig, KinematicModel, WRIST_DOF};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Dataset,
    Recovered,
    Manual,
}

/// One grasp: which robot holds which object in which configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraspRecord {
    pub robot: String,
    pub object: String,
    pub q: JointConfig,
    pub provenance: Provenance,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub success: Option<bool>,
}

impl GraspRecord {
    pub fn validate(&self, model: &KinematicModel) -> Result<()> {
        if self.q.len() != model.n_dof() {
            return Err(Error::contract(format!(
                "grasp for `{}` has {} joint values, model has {}",
                self.robot,
                self.q.len(),
                model.n_dof()
            )));
        }
        Ok(())
    }
}

/// Reads one record per nonblank line.
pub fn read_grasps(reader: impl BufRead) -> Result<Vec<GraspRecord>> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record = serde_json::from_str(&line).map_err(|e| Error::Parse {
            line: i + 1,
            message: e.to_string(),
        })?;
        out.push(record);
    }
    Ok(out)
}

pub fn write_grasps(mut writer: impl Write, grasps: &[GraspRecord]) -> Result<()> {
    for g in grasps {
        serde_json::to_writer(&mut writer, g)?;
        writer.write_all(b"\n")?;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Diversity {
    /// Mean of the per-dimension standard deviations, radians.
    pub mean: f64,
    /// Population standard deviation of each configuration entry.
    pub per_dimension: Vec<f64>,
}

/// Joint-space spread of a set of grasps, wrist entries included.
pub fn diversity(grasps: &[GraspRecord]) -> Result<Diversity> {
    let first = grasps
        .first()
        .ok_or_else(|| Error::contract("diversity needs at least one grasp"))?;
    let dim = first.q.len();
    if grasps.iter().any(|g| g.q.len() != dim) {
        return Err(Error::contract("grasps have differing configuration lengths"));
    }
    let n = grasps.len() as f64;
    let per_dimension: Vec<f64> = (0..dim)
        .map(|d| {
            let mean = grasps.iter().map(|g| g.q[d]).sum::<f64>() / n;
            (grasps.iter().map(|g| (g.q[d] - mean).powi(2)).sum::<f64>() / n).sqrt()
        })
        .collect();
    let mean = if dim == 0 {
        0.0
    } else {
        per_dimension.iter().sum::<f64>() / dim as f64
    };
    Ok(Diversity {
        mean,
        per_dimension,
    })
}

/// Default per-joint offset of the controller targets, radians.
pub const DEFAULT_CONTROLLER_DELTA: f64 = 0.1;

/// Derivatives of the tip distance below this magnitude (m/rad) count as zero.
const GRADIENT_FLOOR: f64 = 1e-12;

/// Open (`q_outer`) and closed (`q_inner`) targets around a predicted grasp.
///
/// Each actuated joint moves by `delta` along the sign of the derivative of the
/// mean distance from its descendant tips to the object centroid: away from the
/// object for `q_outer`, towards it for `q_inner`. Joints with no descendant tip
/// or zero derivative stay put. Wrist entries are never changed.
pub fn controller_targets(
    model: &KinematicModel,
    q_pred: &[f64],
    centroid: &Point3<f64>,
    delta: f64,
) -> Result<(JointConfig, JointConfig)> {
    model.check_dim(q_pred)?;
    if !(delta.is_finite() && delta >= 0.0) {
        return Err(Error::contract("controller delta must be finite and nonnegative"));
    }
    if !model.is_within_limits(q_pred) {
        return Err(Error::contract("predicted configuration is outside the joint limits"));
    }
    let n = model.n_dof();
    let state = model.state(q_pred);
    let mut gradient = vec![0.0; n];
    let mut tip_count = vec![0usize; n];
    for tip in model.tip_links() {
        let x = state.link_poses[tip].translation;
        let offset: Vector3<f64> = x - centroid.coords;
        let dist = offset.norm();
        if dist == 0.0 {
            continue;
        }
        let jac = model.jacobian_from_state(&state, tip);
        let dir = offset / dist;
        for dof in model.chain_dofs(tip) {
            gradient[dof] += dir.dot(&jac.column(dof));
            tip_count[dof] += 1;
        }
    }
    let mut outer = q_pred.to_vec();
    let mut inner = q_pred.to_vec();
    for dof in WRIST_DOF..n {
        if tip_count[dof] == 0 {
            continue;
        }
        // A joint whose axis passes through all its tips has a derivative that
        // is zero up to rounding; treat it as exactly zero.
        let sign = if gradient[dof].abs() <= GRADIENT_FLOOR {
            0.0
        } else {
            gradient[dof].signum()
        };
        outer[dof] += delta * sign;
        inner[dof] -= delta * sign;
    }
    let outer = model.clamp_to_limits(&outer);
    let inner = model.clamp_to_limits(&inner);
    Ok((outer, inner))
}

/// Mean distance from every tip link to `centroid`.
pub fn mean_tip_distance(model: &KinematicModel, q: &[f64], centroid: &Point3<f64>) -> Result<f64> {
    let poses = model.link_poses(q)?;
    let tips: Vec<usize> = model.tip_links().collect();
    if tips.is_empty() {
        return Err(Error::contract("model has no tip links"));
    }
    Ok(tips
        .iter()
        .map(|&t| (poses[t].translation - centroid.coords).norm())
        .sum::<f64>()
        / tips.len() as f64)
}

/// Acceleration used for the disturbance test, m/s².
pub const DISTURBANCE_ACCELERATION: f64 = 0.5;

/// Forces along `+x, −x, +y, −y, +z, −z`, newtons.
pub fn disturbance_forces(object_mass: f64) -> Result<[Vector3<f64>; 6]> {
    if !(object_mass.is_finite() && object_mass > 0.0) {
        return Err(Error::contract(format!(
            "object mass must be positive, got {object_mass}"
        )));
    }
    let m = DISTURBANCE_ACCELERATION * object_mass;
    Ok([
        Vector3::new(m, 0.0, 0.0),
        Vector3::new(-m, 0.0, 0.0),
        Vector3::new(0.0, m, 0.0),
        Vector3::new(0.0, -m, 0.0),
        Vector3::new(0.0, 0.0, m),
        Vector3::new(0.0, 0.0, -m),
    ])
}
