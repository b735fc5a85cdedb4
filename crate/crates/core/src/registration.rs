//! Per-link rigid registration with known correspondences (Kabsch).

use nalgebra::{Matrix3, Point3, Vector3};

use crate::cloud::{centroid, LinkClouds, PointCloud};
use crate::error::{Error, Result};
use crate::kinematics::{KinematicModel, LinkPoseSet};
use crate::pose::Pose;

/// Ratio of the two largest cross-covariance singular values below which the
/// points are treated as collinear.
const RANK_TOLERANCE: f64 = 1e-9;

/// `(R, x)` minimizing `Σ‖predicted_i − (R·canonical_i + x)‖²` with `det R = +1`.
pub fn register_link(canonical: &[Point3<f64>], predicted: &[Point3<f64>]) -> Result<Pose> {
    if canonical.len() != predicted.len() {
        return Err(Error::contract(format!(
            "{} canonical points but {} predicted points",
            canonical.len(),
            predicted.len()
        )));
    }
    if canonical.len() < 3 {
        return Err(Error::contract(format!(
            "registration needs at least 3 points, got {}",
            canonical.len()
        )));
    }
    let ca = centroid(canonical).expect("nonempty");
    let cb = centroid(predicted).expect("nonempty");
    let mut h = Matrix3::zeros();
    for (a, b) in canonical.iter().zip(predicted) {
        h += (a - ca) * (b - cb).transpose();
    }
    let svd = h.svd(true, true);
    let (u, v_t) = (svd.u.expect("requested"), svd.v_t.expect("requested"));
    let s = svd.singular_values;
    let mut order = [0usize, 1, 2];
    order.sort_by(|&i, &j| s[j].total_cmp(&s[i]));
    if s[order[0]] == 0.0 || s[order[1]] <= RANK_TOLERANCE * s[order[0]] {
        return Err(Error::Degenerate(format!(
            "cross-covariance has rank < 2 (singular values {:.3e}, {:.3e}, {:.3e})",
            s[order[0]], s[order[1]], s[order[2]]
        )));
    }
    let mut v = v_t.transpose();
    let mut rotation = v * u.transpose();
    if rotation.determinant() < 0.0 {
        let last = order[2];
        let flipped = -v.column(last);
        v.set_column(last, &flipped);
        rotation = v * u.transpose();
    }
    let translation = cb.coords - rotation * ca.coords;
    Ok(Pose::new(rotation, translation))
}

/// Root-mean-square correspondence error of `pose` applied to `canonical`.
pub fn registration_rms(pose: &Pose, canonical: &[Point3<f64>], predicted: &[Point3<f64>]) -> f64 {
    let sum: f64 = canonical
        .iter()
        .zip(predicted)
        .map(|(a, b)| (pose.transform_point(a) - b).norm_squared())
        .sum();
    (sum / canonical.len().max(1) as f64).sqrt()
}

/// Per-link poses for every link that owns points.
#[derive(Debug, Clone, PartialEq)]
pub struct Registration {
    pub poses: LinkPoseSet,
    /// Links whose points were degenerate: translation-only estimate with the
    /// rotation of the nearest registered ancestor.
    pub fallback_links: Vec<String>,
}

pub fn register_all(
    model: &KinematicModel,
    canonical: &LinkClouds,
    recovered: &PointCloud,
) -> Result<Registration> {
    let expected = canonical.labels();
    match &recovered.labels {
        Some(l) if *l == expected => {}
        Some(_) => {
            return Err(Error::contract(
                "recovered cloud labels do not match the canonical link clouds",
            ))
        }
        None => return Err(Error::contract("recovered cloud must carry link labels")),
    }
    if canonical.names().len() != model.links().len() {
        return Err(Error::contract("canonical clouds belong to a different model"));
    }

    let mut rotations: Vec<Option<Matrix3<f64>>> = vec![None; model.links().len()];
    let mut out = Registration {
        poses: LinkPoseSet::default(),
        fallback_links: Vec::new(),
    };
    let mut offset = 0;
    // Links are stored parent-before-child, so ancestors are resolved first.
    for (link, canon) in canonical.iter() {
        let predicted = &recovered.points[offset..offset + canon.len()];
        offset += canon.len();
        if canon.is_empty() {
            continue;
        }
        let name = &model.links()[link].name;
        let pose = match register_link(canon, predicted) {
            Ok(p) => p,
            Err(Error::Degenerate(_)) | Err(Error::Contract(_)) => {
                let mut rotation = Matrix3::identity();
                let mut cursor = model.parent_link(link);
                while let Some(p) = cursor {
                    if let Some(r) = rotations[p] {
                        rotation = r;
                        break;
                    }
                    cursor = model.parent_link(p);
                }
                let ca = centroid(canon).expect("nonempty");
                let cb = centroid(predicted).expect("nonempty");
                out.fallback_links.push(name.clone());
                Pose::new(rotation, cb.coords - rotation * ca.coords)
            }
            Err(e) => return Err(e),
        };
        rotations[link] = Some(pose.rotation);
        out.poses.push(name.clone(), pose);
    }
    Ok(out)
}

/// Translation-target helper: the registered origin of each link, plus every
/// tip link placed at its registered parent pose composed with the tip offset.
pub fn origin_targets(model: &KinematicModel, poses: &LinkPoseSet) -> Vec<(usize, Vector3<f64>)> {
    let mut targets = Vec::new();
    for link in model.target_links() {
        let name = &model.links()[link].name;
        if let Some(p) = poses.get(name) {
            targets.push((link, p.translation));
            continue;
        }
        let Some(joint) = model.links()[link].parent_joint else { continue };
        let joint = &model.joints()[joint];
        if joint.kind.is_movable() {
            continue;
        }
        let parent = &model.links()[joint.parent_link].name;
        if let Some(pp) = poses.get(parent) {
            targets.push((link, pp.compose(&joint.origin).translation));
        }
    }
    targets
}
