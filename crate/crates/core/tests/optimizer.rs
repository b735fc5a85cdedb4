mod common;

use dro_core::cloud::{cloud_fk, PointCloud};
use dro_core::dro::compute_dro;
use dro_core::optimizer::{recover_grasp, solve_joints, targets_at, SolveParams};
use dro_core::pipeline::{open_hand_init, random_configuration, run_roundtrip};
use dro_core::{Error, Stage};
use nalgebra::Point3;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

fn objective(model: &dro_core::kinematics::KinematicModel, q: &[f64], targets: &[dro_core::optimizer::LinkTarget]) -> f64 {
    let poses = model.link_poses(q).unwrap();
    targets.iter().map(|t| (poses[t.link].translation - t.position).norm()).sum()
}

#[test]
fn iterates_are_feasible_bounded_and_descending() {
    let scene = common::scene("shadow_hand", "sphere");
    let model = &scene.model;
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..3 {
        let q_star = random_configuration(model, &mut rng);
        let targets = targets_at(model, &q_star).unwrap();
        let q0 = open_hand_init(model, &q_star);
        let params = SolveParams::default();
        let (_, full) = solve_joints(model, &targets, &q0, &params).unwrap();
        let mut prev = q0.clone();
        let mut prev_cost = objective(model, &prev, &targets);
        for k in 1..=full.iterations {
            let (q, _) = solve_joints(model, &targets, &q0, &SolveParams { max_iters: k, ..params }).unwrap();
            assert!(model.is_within_limits(&q));
            let step = q.iter().zip(prev.iter()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            assert!(step <= params.step_bound + 1e-15, "iteration {k}: step {step}");
            let cost = objective(model, &q, &targets);
            assert!(cost <= prev_cost, "iteration {k}: {cost} > {prev_cost}");
            prev = q;
            prev_cost = cost;
        }
        assert!(full.residual_trace.windows(2).all(|w| w[1] <= w[0]));
    }
}

#[test]
fn round_trip_recovers_both_hands() {
    for hand in ["three_finger", "shadow_hand"] {
        let scene = common::scene(hand, "sphere");
        let summary = run_roundtrip(&scene, 10, 2, &SolveParams::default()).unwrap();
        assert!(summary.mean_link_error < 1e-3, "{hand}: {}", summary.mean_link_error);
        assert!(summary.max_link_error < 5e-3, "{hand}: {}", summary.max_link_error);
        assert!(summary.mean_joint_error < 1e-2, "{hand}: {}", summary.mean_joint_error);
        assert_eq!(summary.converged_trials, 10);
    }
}

#[test]
fn noisy_matrices_still_recover_within_tolerance() {
    let scene = common::scene("three_finger", "sphere");
    let model = &scene.model;
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let noise = Normal::new(0.0, 1e-3).unwrap();
    let mut total = 0.0;
    for _ in 0..20 {
        let q_star = random_configuration(model, &mut rng);
        let robot = cloud_fk(model, &q_star, &scene.canonical).unwrap();
        let dro = compute_dro(&robot, &scene.object, 4)
            .unwrap()
            .map(|d| d + noise.sample(&mut rng));
        let result = recover_grasp(
            model,
            &scene.canonical,
            &dro,
            &scene.object,
            &open_hand_init(model, &q_star),
            &SolveParams::default(),
        )
        .unwrap();
        let truth = model.link_poses(&q_star).unwrap();
        let got = model.link_poses(&result.q).unwrap();
        let errs: Vec<f64> = model
            .target_links()
            .map(|l| (truth[l].translation - got[l].translation).norm())
            .collect();
        total += errs.iter().sum::<f64>() / errs.len() as f64;
    }
    let mean = total / 20.0;
    assert!(mean < 5e-3, "mean link error {mean:e}");
}

#[test]
fn pipeline_errors_are_checked_early_and_tagged() {
    let scene = common::scene("three_finger", "sphere");
    let model = &scene.model;
    let q = open_hand_init(model, &vec![0.0; model.n_dof()]);
    let robot = cloud_fk(model, &q, &scene.canonical).unwrap();
    let dro = compute_dro(&robot, &scene.object, 4).unwrap();

    let short = PointCloud::unlabeled(scene.object.points[..100].to_vec());
    let err = recover_grasp(model, &scene.canonical, &dro, &short, &q, &SolveParams::default()).unwrap_err();
    assert!(matches!(err, Error::Contract(_)), "{err}");

    let flat = PointCloud::unlabeled(
        (0..scene.object.len())
            .map(|i| Point3::new((i % 23) as f64 * 0.01, (i / 23) as f64 * 0.01, 0.0))
            .collect(),
    );
    let flat_dro = compute_dro(&robot, &flat, 4).unwrap();
    let err = recover_grasp(model, &scene.canonical, &flat_dro, &flat, &q, &SolveParams::default()).unwrap_err();
    assert!(matches!(err, Error::Stage { stage: Stage::Multilateration, .. }), "{err}");
}
