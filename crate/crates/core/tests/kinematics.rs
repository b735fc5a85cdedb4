mod common;

use dro_core::kinematics::{KinematicModel, LoadOptions};
use dro_core::pipeline::{load_model, random_configuration};
use dro_core::pose::{rpy_matrix, Pose};
use dro_core::synthetic::random_tree_urdf;
use nalgebra::{Matrix3xX, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn bundled(name: &str) -> KinematicModel {
    load_model(&common::assets().join(format!("robots/{name}.urdf"))).unwrap()
}

#[test]
fn bundled_hands_have_expected_dofs() {
    assert_eq!(bundled("three_finger").n_dof(), 6 + 9);
    assert_eq!(bundled("shadow_hand").n_dof(), 6 + 22);
}

fn fd_jacobian(model: &KinematicModel, q: &[f64], link: usize, h: f64) -> Matrix3xX<f64> {
    let mut jac = Matrix3xX::zeros(model.n_dof());
    for d in 0..model.n_dof() {
        let mut plus = q.to_vec();
        let mut minus = q.to_vec();
        plus[d] += h;
        minus[d] -= h;
        let a = model.link_poses(&plus).unwrap()[link].translation;
        let b = model.link_poses(&minus).unwrap()[link].translation;
        jac.set_column(d, &((a - b) / (2.0 * h)));
    }
    jac
}

#[test]
fn jacobians_match_central_differences_on_random_models() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst = 0.0f64;
    for k in 0..100 {
        let text = random_tree_urdf(k, rng.random_range(2..10));
        let model = KinematicModel::from_urdf(&text, LoadOptions::default()).unwrap();
        let q = random_configuration(&model, &mut rng);
        for link in 0..model.links().len() {
            let name = &model.links()[link].name;
            let analytic = model.link_origin_jacobian(&q, name).unwrap();
            let fd = fd_jacobian(&model, &q, link, 1e-6);
            let scale = analytic.norm();
            if scale == 0.0 {
                assert!(fd.norm() < 1e-9);
                continue;
            }
            let err = (&analytic - &fd).norm() / scale;
            worst = worst.max(err);
        }
    }
    assert!(worst < 1e-5, "worst relative error {worst:e}");
}

#[test]
fn rotations_stay_orthonormal_and_fk_is_pure() {
    let model = bundled("shadow_hand");
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..50 {
        let q = random_configuration(&model, &mut rng);
        let a = model.link_poses(&q).unwrap();
        let b = model.link_poses(&q).unwrap();
        assert_eq!(a, b);
        for p in &a {
            assert!(p.orthonormality_error() < 1e-9);
        }
    }
}

#[test]
fn wrist_motion_transforms_every_link_rigidly() {
    let model = bundled("three_finger");
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..20 {
        let mut q = random_configuration(&model, &mut rng);
        let base = {
            let mut zero_wrist = q.clone();
            zero_wrist.as_mut_slice()[..6].fill(0.0);
            model.link_poses(&zero_wrist).unwrap()
        };
        let wrist = Pose::new(
            rpy_matrix(q[3], q[4], q[5]),
            Vector3::new(q[0], q[1], q[2]),
        );
        let moved = model.link_poses(&q).unwrap();
        for (m, b) in moved.iter().zip(&base).skip(6) {
            let expected = wrist.compose(b);
            assert!((m.rotation - expected.rotation).amax() < 1e-12);
            assert!((m.translation - expected.translation).amax() < 1e-12);
        }
        q.as_mut_slice()[0] += 0.1;
        let shifted = model.link_poses(&q).unwrap();
        for (s, m) in shifted.iter().zip(&moved).skip(6) {
            assert!((s.translation - m.translation - Vector3::new(0.1, 0.0, 0.0)).amax() < 1e-12);
        }
    }
}

#[test]
fn tips_extend_every_leaf() {
    let model = bundled("shadow_hand");
    let tips: Vec<_> = model.tip_links().map(|t| model.links()[t].name.clone()).collect();
    assert_eq!(
        tips,
        ["ffdistal", "mfdistal", "rfdistal", "lfdistal", "thdistal"].map(|l| format!("{l}_virtual_tip"))
    );
    let q = vec![0.0; model.n_dof()];
    let poses = model.link_poses(&q).unwrap();
    for t in model.tip_links() {
        let parent = model.parent_link(t).unwrap();
        let offset = poses[t].translation - poses[parent].translation;
        assert!((offset.norm() - 0.02).abs() < 1e-15);
    }
}

#[test]
fn every_actuated_joint_moves_some_target() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for hand in ["three_finger", "shadow_hand"] {
        let model = bundled(hand);
        let q = random_configuration(&model, &mut rng);
        let targets: Vec<usize> = model.target_links().collect();
        for dof in 0..model.n_dof() {
            let moved = targets.iter().any(|&l| {
                let name = &model.links()[l].name;
                model.link_origin_jacobian(&q, name).unwrap().column(dof).norm() > 1e-6
            });
            assert!(moved, "{hand}: dof {dof} is invisible to link-origin targets");
        }
    }
}

#[test]
fn tip_axis_option_redirects_the_offset() {
    let text = common::assets().join("robots/three_finger.urdf");
    let text = std::fs::read_to_string(text).unwrap();
    let opts = LoadOptions {
        virtual_tip_extension_length: 0.03,
        virtual_tip_axis: [0.0, 0.0, 2.0],
    };
    let model = KinematicModel::from_urdf(&text, opts).unwrap();
    let tip = model.link_index("finger1_distal_virtual_tip").unwrap();
    let joint = &model.joints()[model.links()[tip].parent_joint.unwrap()];
    assert_eq!(joint.origin.translation, Vector3::new(0.0, 0.0, 0.03));
    assert!(KinematicModel::from_urdf(&text, LoadOptions { virtual_tip_axis: [0.0; 3], ..opts }).is_err());
}
