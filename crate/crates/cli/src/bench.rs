//! Wall-time measurement of the geometric recovery stages.

use std::time::Instant;

use dro_core::pipeline::{open_hand_init, random_configuration, DEFAULT_BLOCKS};
use dro_core::rng::{self, Op};
use dro_core::{cloud_fk, compute_dro, recover_grasp, Scene, SolveParams};
use serde::Serialize;

use crate::error::{Context, CliError, CliResult};

pub const DEFAULT_RUNS: usize = 20;
pub const DEFAULT_WARMUP: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StageStats {
    pub median_s: f64,
    pub p95_s: f64,
}

impl StageStats {
    /// Median (mean of the two middle values for even counts) and nearest-rank p95.
    pub fn from_samples(samples: &[f64]) -> Self {
        assert!(!samples.is_empty(), "no timing samples");
        let mut s = samples.to_vec();
        s.sort_by(f64::total_cmp);
        let n = s.len();
        let median_s = if n % 2 == 1 {
            s[n / 2]
        } else {
            0.5 * (s[n / 2 - 1] + s[n / 2])
        };
        let rank = (0.95 * n as f64).ceil() as usize;
        StageStats {
            median_s,
            p95_s: s[rank.clamp(1, n) - 1],
        }
    }
}

/// Per-stage statistics; serializes to exactly the four stage keys.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BenchReport {
    pub multilateration: StageStats,
    pub registration: StageStats,
    pub optimization: StageStats,
    /// End-to-end `recover_grasp` wall time, including input validation.
    pub total: StageStats,
}

/// Times `recover_grasp` on one seeded ground-truth grasp of `scene`.
pub fn measure(scene: &Scene, seed: u64, runs: usize, warmup: usize, params: &SolveParams) -> CliResult<BenchReport> {
    if runs == 0 {
        return Err(CliError::validation("bench needs at least one run"));
    }
    let model = &scene.model;
    let q_star = random_configuration(model, &mut rng::stream(seed, Op::Trial, 0));
    let robot = cloud_fk(model, &q_star, &scene.canonical).context(|| "bench fixture".into())?;
    let dro = compute_dro(&robot, &scene.object, DEFAULT_BLOCKS).context(|| "bench fixture".into())?;
    let q_init = open_hand_init(model, &q_star);
    let mut samples = [Vec::new(), Vec::new(), Vec::new(), Vec::new()];
    for run in 0..warmup + runs {
        let start = Instant::now();
        let result = recover_grasp(model, &scene.canonical, &dro, &scene.object, &q_init, params)
            .context(|| "bench recovery".into())?;
        let total = start.elapsed().as_secs_f64();
        if run >= warmup {
            samples[0].push(result.elapsed.multilateration);
            samples[1].push(result.elapsed.registration);
            samples[2].push(result.elapsed.optimization);
            samples[3].push(total);
        }
    }
    Ok(BenchReport {
        multilateration: StageStats::from_samples(&samples[0]),
        registration: StageStats::from_samples(&samples[1]),
        optimization: StageStats::from_samples(&samples[2]),
        total: StageStats::from_samples(&samples[3]),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn order_statistics() {
        let s = StageStats::from_samples(&[3.0, 1.0, 2.0]);
        assert_eq!((s.median_s, s.p95_s), (2.0, 3.0));
        let twenty: Vec<f64> = (1..=20).map(f64::from).collect();
        let s = StageStats::from_samples(&twenty);
        assert_eq!((s.median_s, s.p95_s), (10.5, 19.0));
        assert_eq!(StageStats::from_samples(&[4.0]).p95_s, 4.0);
    }
}
