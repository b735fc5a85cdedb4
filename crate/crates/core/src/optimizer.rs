//! Joint-space recovery from per-link translation targets, and the full
//! distance-matrix → grasp pipeline.

use std::time::Instant;

use nalgebra::{DMatrix, DVector, Vector3};
use serde::{Deserialize, Serialize};

use crate::cloud::{LinkClouds, PointCloud};
use crate::dro::{recover_cloud, DroMatrix};
use crate::error::{Error, Result, Stage};
use crate::kinematics::{JointConfig, KinematicModel, LinkPoseSet};
use crate::registration::{origin_targets, register_all};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolveParams {
    /// Per-iteration bound on `‖δq‖∞` (radians / meters).
    pub step_bound: f64,
    pub max_iters: usize,
    /// Stop once an accepted step has `‖δq‖∞` below this.
    pub tol_step: f64,
    /// Stop once the mean link translation error is below this, meters.
    pub tol_residual: f64,
    /// Tikhonov weight on `‖δq‖²`.
    pub damping: f64,
}

impl Default for SolveParams {
    fn default() -> Self {
        SolveParams {
            step_bound: 0.5,
            max_iters: 100,
            tol_step: 1e-4,
            tol_residual: 1e-5,
            damping: 1e-6,
        }
    }
}

impl SolveParams {
    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64| v.is_finite() && v > 0.0;
        if !positive(self.step_bound) || !positive(self.tol_step) || !positive(self.tol_residual) {
            return Err(Error::contract("step bound and tolerances must be positive"));
        }
        if !(self.damping.is_finite() && self.damping >= 0.0) {
            return Err(Error::contract("damping must be nonnegative"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub iterations: usize,
    /// Mean link translation error at the returned configuration, meters.
    pub final_residual: f64,
    pub converged: bool,
    /// Mean link translation error before the first iteration and after every
    /// accepted step.
    pub residual_trace: Vec<f64>,
    /// `‖δq‖∞` of every accepted step.
    pub step_trace: Vec<f64>,
}

/// Translation target for one link origin.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkTarget {
    pub link: usize,
    pub position: Vector3<f64>,
}

impl LinkTarget {
    pub fn from_pairs(pairs: Vec<(usize, Vector3<f64>)>) -> Vec<LinkTarget> {
        pairs
            .into_iter()
            .map(|(link, position)| LinkTarget { link, position })
            .collect()
    }
}

/// Link origin targets taken from a forward-kinematics solution.
pub fn targets_at(model: &KinematicModel, q: &[f64]) -> Result<Vec<LinkTarget>> {
    let poses = model.link_poses(q)?;
    Ok(model
        .target_links()
        .map(|link| LinkTarget {
            link,
            position: poses[link].translation,
        })
        .collect())
}

/// `Σ_i ‖x_i(q) − x_i*‖`.
fn objective(model: &KinematicModel, q: &[f64], targets: &[LinkTarget]) -> f64 {
    let poses = model.state(q).link_poses;
    targets
        .iter()
        .map(|t| (poses[t.link].translation - t.position).norm())
        .sum()
}

/// `min ½δᵀHδ − gᵀδ` (the normal equations of `‖Jδ − e‖²_W + λ‖δ‖²`) subject to `lo ≤ δ ≤ hi`, by an active-set clamp
/// over the normal equations.
fn box_least_squares(h: &DMatrix<f64>, g: &DVector<f64>, lo: &[f64], hi: &[f64]) -> DVector<f64> {
    let n = g.len();
    // 0 = free, -1 = at lower bound, +1 = at upper bound
    let mut state = vec![0i8; n];
    let mut delta = DVector::zeros(n);
    for _ in 0..(3 * n + 3) {
        let free: Vec<usize> = (0..n).filter(|&k| state[k] == 0).collect();
        for k in 0..n {
            delta[k] = match state[k] {
                -1 => lo[k],
                1 => hi[k],
                _ => 0.0,
            };
        }
        if !free.is_empty() {
            let hf = DMatrix::from_fn(free.len(), free.len(), |a, b| h[(free[a], free[b])]);
            let rhs = DVector::from_fn(free.len(), |a, _| {
                let k = free[a];
                g[k] - (0..n)
                    .filter(|&c| state[c] != 0)
                    .map(|c| h[(k, c)] * delta[c])
                    .sum::<f64>()
            });
            let sol = match hf.clone().cholesky() {
                Some(ch) => ch.solve(&rhs),
                None => hf.lu().solve(&rhs).unwrap_or_else(|| DVector::zeros(free.len())),
            };
            for (a, &k) in free.iter().enumerate() {
                delta[k] = sol[a];
            }
        }
        let mut changed = false;
        for &k in &free {
            if delta[k] < lo[k] {
                state[k] = -1;
                changed = true;
            } else if delta[k] > hi[k] {
                state[k] = 1;
                changed = true;
            }
        }
        if changed {
            continue;
        }
        // Release bound variables whose gradient points back into the box.
        let grad = h * &delta - g;
        for k in 0..n {
            if (state[k] == -1 && grad[k] < 0.0) || (state[k] == 1 && grad[k] > 0.0) {
                state[k] = 0;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    for k in 0..n {
        delta[k] = delta[k].clamp(lo[k], hi[k]);
    }
    delta
}

/// Iteratively moves `q` so link origins reach their targets, keeping every
/// iterate inside the joint limits with `‖δq‖∞ ≤ step_bound`.
pub fn solve_joints(
    model: &KinematicModel,
    targets: &[LinkTarget],
    q_init: &[f64],
    params: &SolveParams,
) -> Result<(JointConfig, SolveReport)> {
    params.validate()?;
    model.check_dim(q_init)?;
    if !model.is_within_limits(q_init) {
        return Err(Error::contract("initial configuration is outside the joint limits"));
    }
    if targets.is_empty() {
        return Err(Error::contract("no link targets"));
    }
    for t in targets {
        if t.link >= model.links().len() {
            return Err(Error::contract(format!("target link index {} out of range", t.link)));
        }
        if !t.position.iter().all(|c| c.is_finite()) {
            return Err(Error::data(format!(
                "target for link `{}` is not finite",
                model.links()[t.link].name
            )));
        }
    }

    let n = model.n_dof();
    let m = targets.len() as f64;
    let (lower, upper) = (model.lower_limits(), model.upper_limits());
    let mut q = q_init.to_vec();
    let mut cost = objective(model, &q, targets);
    let mut report = SolveReport {
        iterations: 0,
        final_residual: cost / m,
        converged: false,
        residual_trace: vec![cost / m],
        step_trace: Vec::new(),
    };

    for iter in 1..=params.max_iters {
        report.iterations = iter;
        if cost / m < params.tol_residual {
            report.converged = true;
            break;
        }
        let state = model.state(&q);
        let mut h = DMatrix::<f64>::identity(n, n) * params.damping;
        let mut g = DVector::<f64>::zeros(n);
        // Each link is weighted by 1/‖e_i‖ so the surrogate's gradient equals the
        // gradient of Σ‖e_i‖; the floor keeps converged links bounded.
        let floor = 0.1 * params.tol_residual;
        for t in targets {
            let jac = model.jacobian_from_state(&state, t.link);
            let err = t.position - state.link_poses[t.link].translation;
            let w = 1.0 / err.norm().max(floor);
            h += jac.transpose() * &jac * w;
            g += jac.transpose() * err * w;
        }
        let lo: Vec<f64> = (0..n).map(|k| (lower[k] - q[k]).max(-params.step_bound)).collect();
        let hi: Vec<f64> = (0..n).map(|k| (upper[k] - q[k]).min(params.step_bound)).collect();
        let delta = box_least_squares(&h, &g, &lo, &hi);
        let step_norm = delta.amax();
        if step_norm < params.tol_step {
            report.converged = true;
            break;
        }

        let mut alpha = 1.0;
        let mut accepted = None;
        while alpha >= 1.0 / 1024.0 {
            let candidate: Vec<f64> = (0..n)
                .map(|k| (q[k] + alpha * delta[k]).clamp(lower[k], upper[k]))
                .collect();
            let c = objective(model, &candidate, targets);
            if c <= cost {
                accepted = Some((candidate, c));
                break;
            }
            alpha *= 0.5;
        }
        let Some((next, next_cost)) = accepted else {
            break;
        };
        q = next;
        cost = next_cost;
        report.residual_trace.push(cost / m);
        report.step_trace.push(alpha * step_norm);
        if alpha * step_norm < params.tol_step || cost / m < params.tol_residual {
            report.converged = true;
            break;
        }
    }
    report.final_residual = cost / m;
    Ok((model.clamp_to_limits(&q), report))
}

/// Wall time spent in each pipeline stage, seconds.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct StageTimings {
    pub multilateration: f64,
    pub registration: f64,
    pub optimization: f64,
}

impl StageTimings {
    pub fn total(&self) -> f64 {
        self.multilateration + self.registration + self.optimization
    }
}

#[derive(Debug, Clone)]
pub struct GraspResult {
    pub q: JointConfig,
    pub link_poses: LinkPoseSet,
    /// Links registered by the translation-only fallback.
    pub fallback_links: Vec<String>,
    pub recovered_cloud: PointCloud,
    pub report: SolveReport,
    pub elapsed: StageTimings,
}

impl GraspResult {
    /// `{q, residual, iterations, converged, elapsed: {multilateration, registration, optimization}}`.
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "q": self.q.as_slice(),
            "residual": self.report.final_residual,
            "iterations": self.report.iterations,
            "converged": self.report.converged,
            "elapsed": self.elapsed,
        })
    }
}

/// Distance matrix → robot cloud → link poses → joint configuration.
pub fn recover_grasp(
    model: &KinematicModel,
    canonical: &LinkClouds,
    dro: &DroMatrix,
    object: &PointCloud,
    q_init: &[f64],
    params: &SolveParams,
) -> Result<GraspResult> {
    if dro.rows() != canonical.total_points() {
        return Err(Error::contract(format!(
            "matrix has {} rows, robot cloud has {} points",
            dro.rows(),
            canonical.total_points()
        )));
    }
    if dro.cols() != object.len() {
        return Err(Error::contract(format!(
            "matrix has {} columns, object cloud has {} points",
            dro.cols(),
            object.len()
        )));
    }
    canonical.check_model(model)?;
    model.check_dim(q_init)?;
    params.validate()?;
    let t0 = Instant::now();
    let recovered = recover_cloud(dro, object, Some(canonical.labels()))
        .map_err(|e| e.in_stage(Stage::Multilateration))?;
    let t1 = Instant::now();
    let registration =
        register_all(model, canonical, &recovered).map_err(|e| e.in_stage(Stage::Registration))?;
    let targets = LinkTarget::from_pairs(origin_targets(model, &registration.poses));
    let t2 = Instant::now();
    let (q, report) =
        solve_joints(model, &targets, q_init, params).map_err(|e| e.in_stage(Stage::Optimization))?;
    let t3 = Instant::now();
    Ok(GraspResult {
        q,
        link_poses: registration.poses,
        fallback_links: registration.fallback_links,
        recovered_cloud: recovered,
        report,
        elapsed: StageTimings {
            multilateration: (t1 - t0).as_secs_f64(),
            registration: (t2 - t1).as_secs_f64(),
            optimization: (t3 - t2).as_secs_f64(),
        },
    })
}
