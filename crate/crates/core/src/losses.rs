//! Reference implementations of the grasp-training loss terms over plain
//! arrays, for validating external training code.

use nalgebra::{DMatrix, Point3};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dro::{point_distance, DroMatrix};
use crate::error::{Error, Result};
use crate::mesh::TriangleMesh;
use crate::pose::{rotation_angle_between, Pose};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContrastiveParams {
    /// Temperature.
    pub tau: f64,
    /// Distance sharpness inside the tanh weighting.
    pub lambda: f64,
}

impl Default for ContrastiveParams {
    fn default() -> Self {
        ContrastiveParams {
            tau: 0.1,
            lambda: 10.0,
        }
    }
}

/// Normalizer of the negative-pair weights.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightNormalization {
    /// Divide by the largest off-diagonal `tanh` over the whole matrix.
    #[default]
    Global,
    /// Divide each row by its own largest off-diagonal `tanh`.
    PerRow,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContrastiveWeights {
    pub values: DMatrix<f64>,
    /// True when the normalizer was zero (all points coincide) and every
    /// weight was set to one.
    pub degenerate: bool,
}

/// `ω_ij = tanh(λ‖p_i − p_j‖) / max tanh(λ‖·‖)` off the diagonal, `ω_ii = 1`.
pub fn contrastive_weights(
    points: &[Point3<f64>],
    lambda: f64,
    normalization: WeightNormalization,
) -> Result<ContrastiveWeights> {
    let n = points.len();
    if n == 0 {
        return Err(Error::contract("contrastive weights need at least one point"));
    }
    if !(lambda.is_finite() && lambda > 0.0) {
        return Err(Error::contract("lambda must be positive"));
    }
    let raw = DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            0.0
        } else {
            (lambda * point_distance(&points[i], &points[j])).tanh()
        }
    });
    let mut values = DMatrix::from_element(n, n, 1.0);
    let mut degenerate = false;
    let global = raw.max();
    for i in 0..n {
        let norm = match normalization {
            WeightNormalization::Global => global,
            WeightNormalization::PerRow => raw.row(i).max(),
        };
        if norm <= 0.0 {
            degenerate |= n > 1;
            continue;
        }
        for j in 0..n {
            if i != j {
                values[(i, j)] = raw[(i, j)] / norm;
            }
        }
    }
    Ok(ContrastiveWeights { values, degenerate })
}

fn row_norms(m: &DMatrix<f64>, which: &str) -> Result<Vec<f64>> {
    (0..m.nrows())
        .map(|i| {
            let n = m.row(i).norm();
            if n > 0.0 && n.is_finite() {
                Ok(n)
            } else {
                Err(Error::contract(format!("{which} row {i} has zero or non-finite norm")))
            }
        })
        .collect()
}

/// Point-level weighted InfoNCE over cosine similarities, averaged over points.
pub fn contrastive_loss(
    phi_a: &DMatrix<f64>,
    phi_b: &DMatrix<f64>,
    points_b: &[Point3<f64>],
    params: &ContrastiveParams,
    normalization: WeightNormalization,
) -> Result<f64> {
    let n = phi_a.nrows();
    if phi_b.nrows() != n || phi_a.ncols() != phi_b.ncols() || points_b.len() != n {
        return Err(Error::contract(format!(
            "shape mismatch: φA {}×{}, φB {}×{}, {} points",
            phi_a.nrows(),
            phi_a.ncols(),
            phi_b.nrows(),
            phi_b.ncols(),
            points_b.len()
        )));
    }
    if !(params.tau.is_finite() && params.tau > 0.0) {
        return Err(Error::contract("tau must be positive"));
    }
    let na = row_norms(phi_a, "φA")?;
    let nb = row_norms(phi_b, "φB")?;
    let omega = contrastive_weights(points_b, params.lambda, normalization)?.values;
    let sim = phi_a * phi_b.transpose();
    let mut total = 0.0;
    for i in 0..n {
        let logits: Vec<f64> = (0..n).map(|j| sim[(i, j)] / (na[i] * nb[j]) / params.tau).collect();
        let m = logits
            .iter()
            .zip(omega.row(i).iter())
            .filter(|(_, w)| **w > 0.0)
            .map(|(l, _)| *l)
            .fold(f64::NEG_INFINITY, f64::max);
        let lse = m + logits
            .iter()
            .zip(omega.row(i).iter())
            .map(|(l, w)| w * (l - m).exp())
            .sum::<f64>()
            .ln();
        total += lse - logits[i];
    }
    Ok(total / n as f64)
}

fn check_rotation(pose: &Pose, which: &str) -> Result<()> {
    if pose.orthonormality_error() > 1e-6 || (pose.rotation.determinant() - 1.0).abs() > 1e-6 {
        return Err(Error::contract(format!("{which} rotation is not proper orthonormal")));
    }
    Ok(())
}

/// `‖x − x_gt‖ + arccos((tr(Rᵀ R_gt) − 1) / 2)`.
pub fn pose_loss(pose: &Pose, ground_truth: &Pose) -> Result<f64> {
    check_rotation(pose, "predicted")?;
    check_rotation(ground_truth, "ground-truth")?;
    Ok((pose.translation - ground_truth.translation).norm()
        + rotation_angle_between(&pose.rotation, &ground_truth.rotation))
}

/// `|Σ_i min(sdf(p_i), 0)|` against a closed mesh.
pub fn penetration_loss(robot: &[Point3<f64>], mesh: &TriangleMesh) -> Result<f64> {
    mesh.check_watertight()?;
    let depths: Vec<f64> = robot
        .par_iter()
        .map(|p| mesh.signed_distance(p).min(0.0))
        .collect();
    Ok(depths.iter().sum::<f64>().abs())
}

/// Mean absolute elementwise difference.
pub fn dro_l1_loss(pred: &DroMatrix, gt: &DroMatrix) -> Result<f64> {
    if pred.rows() != gt.rows() || pred.cols() != gt.cols() {
        return Err(Error::contract(format!(
            "shape mismatch: {}×{} vs {}×{}",
            pred.rows(),
            pred.cols(),
            gt.rows(),
            gt.cols()
        )));
    }
    let n = pred.values().len();
    if n == 0 {
        return Ok(0.0);
    }
    Ok(pred
        .values()
        .iter()
        .zip(gt.values())
        .map(|(a, b)| (a - b).abs())
        .sum::<f64>()
        / n as f64)
}
