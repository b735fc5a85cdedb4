//! Robot–object distance matrices and their inversion by multilateration.

use nalgebra::{Cholesky, DMatrix, DVector, Matrix3, Point3, Vector3, Vector4};
use rayon::prelude::*;

use crate::cloud::{Labels, PointCloud};
use crate::error::{Error, Result};

/// Condition number above which a reference set is treated as degenerate.
pub const DEGENERACY_CONDITION: f64 = 1e10;

/// Row-major `N_R × N_O` matrix of robot-point to object-point distances.
#[derive(Debug, Clone, PartialEq)]
pub struct DroMatrix {
    rows: usize,
    cols: usize,
    values: Vec<f64>,
}

impl DroMatrix {
    pub fn new(rows: usize, cols: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != rows * cols {
            return Err(Error::contract(format!(
                "{} values for a {rows}×{cols} matrix",
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::data(format!(
                "entry ({}, {}) = {} is not a finite nonnegative distance",
                i / cols.max(1),
                i % cols.max(1),
                values[i]
            )));
        }
        Ok(DroMatrix { rows, cols, values })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.cols..(i + 1) * self.cols]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.cols + j]
    }

    /// Returns a copy with `f` applied to every entry, clamped at zero.
    pub fn map(&self, mut f: impl FnMut(f64) -> f64) -> DroMatrix {
        DroMatrix {
            rows: self.rows,
            cols: self.cols,
            values: self.values.iter().map(|&v| f(v).max(0.0)).collect(),
        }
    }
}

/// Exact distances between every robot point and every object point.
///
/// The matrix is split into a `blocks × blocks` grid of tiles that are filled
/// independently; every entry is computed by the same expression, so the result
/// is bitwise identical for any block count.
pub fn compute_dro(robot: &PointCloud, object: &PointCloud, blocks: usize) -> Result<DroMatrix> {
    if robot.is_empty() || object.is_empty() {
        return Err(Error::contract("compute_dro needs two nonempty clouds"));
    }
    robot.validate()?;
    object.validate()?;
    let (rows, cols) = (robot.len(), object.len());
    let blocks = blocks.max(1);
    let tile_rows = rows.div_ceil(blocks);
    let tile_cols = cols.div_ceil(blocks);
    let mut values = vec![0.0; rows * cols];
    values
        .par_chunks_mut(tile_rows * cols)
        .enumerate()
        .for_each(|(bi, band)| {
            let r0 = bi * tile_rows;
            for c0 in (0..cols).step_by(tile_cols) {
                let c1 = (c0 + tile_cols).min(cols);
                for (ri, row) in band.chunks_mut(cols).enumerate() {
                    let p = robot.points[r0 + ri];
                    for (j, v) in row[c0..c1].iter_mut().enumerate() {
                        *v = point_distance(&p, &object.points[c0 + j]);
                    }
                }
            }
        });
    DroMatrix::new(rows, cols, values)
}

#[inline]
pub(crate) fn point_distance(a: &Point3<f64>, b: &Point3<f64>) -> f64 {
    let d = a - b;
    (d.x * d.x + d.y * d.y + d.z * d.z).sqrt()
}

/// Multilateration against a fixed set of reference points.
///
/// References are centered and scaled to unit RMS radius. With `s = ‖p‖²` the
/// squared-range equations become linear, `−2·p_jᵀp + s = d_j² − ‖p_j‖²`; the
/// `N × 4` system is factored once by Householder QR and reused for every
/// distance row. Each linear solution is then refined by Gauss–Newton on
/// `Σ_j (‖p − p_j‖² − d_j²)²`.
#[derive(Debug, Clone)]
pub struct Multilaterator {
    center: Vector3<f64>,
    scale: f64,
    refs: Vec<Vector3<f64>>,
    ref_norm2: Vec<f64>,
    /// `R⁻¹Qᵀ`, 4 × N.
    solve: DMatrix<f64>,
    refine_steps: usize,
}

impl Multilaterator {
    pub fn new(references: &[Point3<f64>], refine_steps: usize) -> Result<Self> {
        let n = references.len();
        if n < 4 {
            return Err(Error::Degenerate(format!(
                "multilateration needs at least 4 reference points, got {n}"
            )));
        }
        if references.iter().any(|p| !p.coords.iter().all(|c| c.is_finite())) {
            return Err(Error::data("reference points must be finite"));
        }
        let center = references.iter().fold(Vector3::zeros(), |a, p| a + p.coords) / n as f64;
        let rms = (references
            .iter()
            .map(|p| (p.coords - center).norm_squared())
            .sum::<f64>()
            / n as f64)
            .sqrt();
        if rms == 0.0 {
            return Err(Error::Degenerate("all reference points coincide".into()));
        }
        let refs: Vec<Vector3<f64>> = references.iter().map(|p| (p.coords - center) / rms).collect();
        let ref_norm2 = refs.iter().map(|r| r.norm_squared()).collect();

        let a = DMatrix::from_fn(n, 4, |i, j| if j < 3 { -2.0 * refs[i][j] } else { 1.0 });
        let qr = a.qr();
        let r = qr.r();
        let sv = r.clone().singular_values();
        let (smax, smin) = sv.iter().fold((0.0f64, f64::INFINITY), |(hi, lo), &s| (hi.max(s), lo.min(s)));
        if smin == 0.0 || smax / smin > DEGENERACY_CONDITION {
            return Err(Error::Degenerate(format!(
                "reference points are coplanar (condition number {:.3e})",
                smax / smin
            )));
        }
        let qt = qr.q().transpose();
        let solve = r
            .solve_upper_triangular(&qt)
            .ok_or_else(|| Error::Degenerate("singular multilateration system".into()))?;
        Ok(Multilaterator {
            center,
            scale: rms,
            refs,
            ref_norm2,
            solve,
            refine_steps,
        })
    }

    pub fn reference_count(&self) -> usize {
        self.refs.len()
    }

    /// Position whose distances to the references best match `distances`.
    pub fn locate(&self, distances: &[f64]) -> Result<Point3<f64>> {
        if distances.len() != self.refs.len() {
            return Err(Error::contract(format!(
                "{} distances for {} references",
                distances.len(),
                self.refs.len()
            )));
        }
        if let Some(j) = distances.iter().position(|d| !d.is_finite()) {
            return Err(Error::data(format!("distance {j} is not finite")));
        }
        let inv = 1.0 / self.scale;
        let d2: Vec<f64> = distances.iter().map(|d| (d * inv) * (d * inv)).collect();
        let rhs = DVector::from_iterator(
            d2.len(),
            d2.iter().zip(&self.ref_norm2).map(|(d, n)| d - n),
        );
        let sol: Vector4<f64> = (&self.solve * rhs).fixed_rows::<4>(0).into_owned();
        let mut p = Vector3::new(sol[0], sol[1], sol[2]);

        let mut cost = self.quartic_cost(&p, &d2);
        for _ in 0..self.refine_steps {
            let mut jtj = Matrix3::zeros();
            let mut jtr = Vector3::zeros();
            for (r, d) in self.refs.iter().zip(&d2) {
                let diff = p - r;
                let res = diff.norm_squared() - d;
                let g = 2.0 * diff;
                jtj += g * g.transpose();
                jtr += g * res;
            }
            let Some(chol) = Cholesky::new(jtj) else { break };
            let candidate = p - chol.solve(&jtr);
            let new_cost = self.quartic_cost(&candidate, &d2);
            if new_cost.is_nan() || new_cost > cost {
                break;
            }
            p = candidate;
            cost = new_cost;
        }
        Ok(Point3::from(p * self.scale + self.center))
    }

    fn quartic_cost(&self, p: &Vector3<f64>, d2: &[f64]) -> f64 {
        self.refs
            .iter()
            .zip(d2)
            .map(|(r, d)| {
                let e = (p - r).norm_squared() - d;
                e * e
            })
            .sum()
    }
}

/// Locates a single point from its distances to `object` points.
pub fn multilaterate_point(distances: &[f64], object: &PointCloud, refine_steps: usize) -> Result<Point3<f64>> {
    Multilaterator::new(&object.points, refine_steps)?.locate(distances)
}

/// Default Gauss–Newton refinement steps after the linear solve.
pub const DEFAULT_REFINE_STEPS: usize = 3;

/// Multilaterates every row of `dro`; the output carries `labels`.
pub fn recover_cloud(dro: &DroMatrix, object: &PointCloud, labels: Option<Labels>) -> Result<PointCloud> {
    if dro.cols() != object.len() {
        return Err(Error::contract(format!(
            "matrix has {} columns, object cloud has {} points",
            dro.cols(),
            object.len()
        )));
    }
    if let Some(l) = &labels {
        if l.ids.len() != dro.rows() {
            return Err(Error::contract(format!(
                "{} labels for {} matrix rows",
                l.ids.len(),
                dro.rows()
            )));
        }
    }
    let solver = Multilaterator::new(&object.points, DEFAULT_REFINE_STEPS)?;
    let points = (0..dro.rows())
        .into_par_iter()
        .map(|i| {
            solver.locate(dro.row(i)).map_err(|e| match e {
                Error::Data(m) => Error::Data(format!("row {i}: {m}")),
                other => other,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(PointCloud { points, labels })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::TriangleMesh;
    use crate::pose::{rpy_matrix, Pose};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn sphere_refs(n: usize, seed: u64) -> Vec<Point3<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        TriangleMesh::icosphere(0.05, 3).sample_surface(n, &mut rng).unwrap()
    }

    #[test]
    fn unit_and_zero_distances() {
        let r = PointCloud::unlabeled(vec![Point3::origin()]);
        let o = PointCloud::unlabeled(vec![Point3::new(1.0, 0.0, 0.0)]);
        assert_eq!(compute_dro(&r, &o, 4).unwrap().values(), &[1.0]);
        assert_eq!(compute_dro(&r, &r, 4).unwrap().values(), &[0.0]);
        assert!(compute_dro(&PointCloud::default(), &o, 4).is_err());
    }

    #[test]
    fn block_count_does_not_change_bits() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut cloud = |n: usize| {
            PointCloud::unlabeled(
                (0..n)
                    .map(|_| Point3::new(rng.random(), rng.random(), rng.random()))
                    .collect(),
            )
        };
        let (r, o) = (cloud(37), cloud(53));
        let base = compute_dro(&r, &o, 1).unwrap();
        for b in [2, 3, 4, 7, 64, 1000] {
            assert_eq!(compute_dro(&r, &o, b).unwrap(), base);
        }
    }

    #[test]
    fn exact_recovery() {
        let refs = sphere_refs(512, 1);
        let obj = PointCloud::unlabeled(refs.clone());
        let target = Point3::new(0.03, -0.07, 0.02);
        let d: Vec<f64> = refs.iter().map(|r| (r - target).norm()).collect();
        let p = multilaterate_point(&d, &obj, 3).unwrap();
        assert!((p - target).norm() < 1e-9, "{}", (p - target).norm());
    }

    #[test]
    fn zero_distance_recovers_reference() {
        let refs = sphere_refs(64, 2);
        let obj = PointCloud::unlabeled(refs.clone());
        let target = refs[17];
        let d: Vec<f64> = refs.iter().map(|r| (r - target).norm()).collect();
        assert_eq!(d[17], 0.0);
        let p = multilaterate_point(&d, &obj, 3).unwrap();
        assert!((p - target).norm() < 1e-9);
    }

    #[test]
    fn coplanar_and_tiny_reference_sets_are_degenerate() {
        let flat: Vec<_> = (0..50)
            .map(|i| Point3::new((i % 7) as f64, (i / 7) as f64, 0.0))
            .collect();
        assert!(matches!(Multilaterator::new(&flat, 3), Err(Error::Degenerate(_))));
        let three = vec![Point3::origin(), Point3::new(1.0, 0.0, 0.0), Point3::new(0.0, 1.0, 1.0)];
        assert!(matches!(Multilaterator::new(&three, 3), Err(Error::Degenerate(_))));
    }

    #[test]
    fn recover_cloud_round_trip_and_single_row() {
        let refs = sphere_refs(256, 3);
        let obj = PointCloud::unlabeled(refs);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let robot = PointCloud::unlabeled(
            (0..40)
                .map(|_| Point3::new(rng.random_range(-0.1..0.1), rng.random_range(-0.1..0.1), rng.random_range(-0.1..0.1)))
                .collect(),
        );
        let dro = compute_dro(&robot, &obj, 4).unwrap();
        let back = recover_cloud(&dro, &obj, None).unwrap();
        for (a, b) in robot.points.iter().zip(&back.points) {
            assert!((a - b).norm() < 1e-8);
        }
        let one = DroMatrix::new(1, dro.cols(), dro.row(5).to_vec()).unwrap();
        let single = recover_cloud(&one, &obj, None).unwrap();
        assert_eq!(single.points[0], multilaterate_point(dro.row(5), &obj, 3).unwrap());
    }

    #[test]
    fn recovery_is_equivariant_under_object_motion() {
        let refs = sphere_refs(128, 6);
        let obj = PointCloud::unlabeled(refs);
        let robot = PointCloud::unlabeled(vec![Point3::new(0.02, 0.06, -0.01), Point3::new(-0.08, 0.0, 0.03)]);
        let dro = compute_dro(&robot, &obj, 4).unwrap();
        let base = recover_cloud(&dro, &obj, None).unwrap();
        let t = Pose::new(rpy_matrix(0.3, -1.2, 2.0), Vector3::new(0.5, -0.2, 1.0));
        let moved = PointCloud::unlabeled(obj.points.iter().map(|p| t.transform_point(p)).collect());
        let rec = recover_cloud(&dro, &moved, None).unwrap();
        for (a, b) in base.points.iter().zip(&rec.points) {
            assert!((t.transform_point(a) - b).norm() < 1e-8);
        }
    }

    #[test]
    fn shape_mismatch_is_contract_error() {
        let obj = PointCloud::unlabeled(sphere_refs(16, 1));
        let dro = DroMatrix::new(1, 3, vec![1.0, 2.0, 3.0]).unwrap();
        assert!(matches!(recover_cloud(&dro, &obj, None), Err(Error::Contract(_))));
        assert!(DroMatrix::new(1, 2, vec![1.0, -2.0]).is_err());
        assert!(DroMatrix::new(1, 2, vec![1.0, f64::NAN]).is_err());
    }
}
