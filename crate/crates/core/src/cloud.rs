//! Point clouds: canonical per-link robot clouds, point-cloud forward
//! kinematics, object sampling and partial observations.

use std::path::{Path, PathBuf};

use nalgebra::{Point3, Vector3};
use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kinematics::{KinematicModel, LinkKind, Shape};
use crate::mesh::TriangleMesh;
use crate::rng::{self, Op};

/// Link labels for a robot cloud: `ids[i]` indexes into `names`.
#[derive(Debug, Clone, PartialEq)]
pub struct Labels {
    pub ids: Vec<u32>,
    pub names: Vec<String>,
}

impl Labels {
    pub fn name_of(&self, point: usize) -> &str {
        &self.names[self.ids[point] as usize]
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct PointCloud {
    pub points: Vec<Point3<f64>>,
    pub labels: Option<Labels>,
}

impl PointCloud {
    pub fn unlabeled(points: Vec<Point3<f64>>) -> Self {
        PointCloud {
            points,
            labels: None,
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn centroid(&self) -> Option<Point3<f64>> {
        centroid(&self.points)
    }

    /// Checks finiteness and label consistency.
    pub fn validate(&self) -> Result<()> {
        if let Some(i) = self
            .points
            .iter()
            .position(|p| !p.coords.iter().all(|c| c.is_finite()))
        {
            return Err(Error::data(format!("point {i} is not finite")));
        }
        if let Some(labels) = &self.labels {
            if labels.ids.len() != self.points.len() {
                return Err(Error::contract(format!(
                    "{} labels for {} points",
                    labels.ids.len(),
                    self.points.len()
                )));
            }
            if let Some(&bad) = labels.ids.iter().find(|&&l| l as usize >= labels.names.len()) {
                return Err(Error::data(format!("label index {bad} has no name")));
            }
        }
        Ok(())
    }
}

pub(crate) fn centroid(points: &[Point3<f64>]) -> Option<Point3<f64>> {
    if points.is_empty() {
        return None;
    }
    let sum = points.iter().fold(Vector3::zeros(), |acc, p| acc + p.coords);
    Some(Point3::from(sum / points.len() as f64))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SamplingConfig {
    /// Surface samples drawn per geometric link before FPS.
    pub n_per_link: usize,
    /// Robot cloud size after FPS.
    pub n_total: usize,
    pub n_object: usize,
    /// Per-coordinate Gaussian noise on object points, meters.
    pub object_noise_sigma: f64,
    /// Surface samples in the object pool the object cloud is drawn from.
    pub object_pool: usize,
    /// Points every geometric link keeps after FPS, so registration stays well posed.
    pub min_points_per_link: usize,
    pub seed: u64,
}

impl Default for SamplingConfig {
    fn default() -> Self {
        SamplingConfig {
            n_per_link: 512,
            n_total: 512,
            n_object: 512,
            object_noise_sigma: 0.002,
            object_pool: 65_536,
            min_points_per_link: 4,
            seed: 0,
        }
    }
}

impl SamplingConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_per_link == 0 || self.n_total == 0 || self.n_object == 0 || self.object_pool == 0 {
            return Err(Error::contract("sampling counts must be positive"));
        }
        if !(self.object_noise_sigma.is_finite() && self.object_noise_sigma >= 0.0) {
            return Err(Error::contract("object noise sigma must be finite and nonnegative"));
        }
        Ok(())
    }
}

/// Canonical (zero-configuration, link-frame) points for every model link.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkClouds {
    names: Vec<String>,
    clouds: Vec<Vec<Point3<f64>>>,
}

impl LinkClouds {
    /// `clouds` is indexed like `model.links()`.
    pub fn new(model: &KinematicModel, clouds: Vec<Vec<Point3<f64>>>) -> Result<Self> {
        if clouds.len() != model.links().len() {
            return Err(Error::contract(format!(
                "{} link clouds for {} links",
                clouds.len(),
                model.links().len()
            )));
        }
        Ok(LinkClouds {
            names: model.links().iter().map(|l| l.name.clone()).collect(),
            clouds,
        })
    }

    pub fn link(&self, index: usize) -> &[Point3<f64>] {
        &self.clouds[index]
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, &[Point3<f64>])> {
        self.clouds.iter().enumerate().map(|(i, c)| (i, c.as_slice()))
    }

    pub fn total_points(&self) -> usize {
        self.clouds.iter().map(Vec::len).sum()
    }

    /// Labels of the stacked cloud, in stacking order.
    pub fn labels(&self) -> Labels {
        Labels {
            ids: self
                .clouds
                .iter()
                .enumerate()
                .flat_map(|(i, c)| std::iter::repeat_n(i as u32, c.len()))
                .collect(),
            names: self.names.clone(),
        }
    }

    /// All canonical points concatenated in link order, labeled.
    pub fn to_point_cloud(&self) -> PointCloud {
        PointCloud {
            points: self.clouds.iter().flatten().copied().collect(),
            labels: Some(self.labels()),
        }
    }

    /// Inverse of [`LinkClouds::to_point_cloud`]; labels must name model links in
    /// contiguous, model-ordered segments.
    pub fn from_point_cloud(model: &KinematicModel, cloud: &PointCloud) -> Result<Self> {
        cloud.validate()?;
        let labels = cloud
            .labels
            .as_ref()
            .ok_or_else(|| Error::contract("canonical robot cloud must be labeled"))?;
        let mut clouds = vec![Vec::new(); model.links().len()];
        let mut last = None;
        for (p, &id) in cloud.points.iter().zip(&labels.ids) {
            let name = &labels.names[id as usize];
            let link = model.link_index(name)?;
            if let Some(prev) = last {
                if link < prev {
                    return Err(Error::contract(format!(
                        "label segments are not in model link order at `{name}`"
                    )));
                }
                if link != prev && !clouds[link].is_empty() {
                    return Err(Error::contract(format!("label `{name}` is not contiguous")));
                }
            }
            last = Some(link);
            clouds[link].push(*p);
        }
        LinkClouds::new(model, clouds)
    }

    pub(crate) fn check_model(&self, model: &KinematicModel) -> Result<()> {
        let ok = self.names.len() == model.links().len()
            && self.names.iter().zip(model.links()).all(|(n, l)| *n == l.name);
        if ok {
            Ok(())
        } else {
            Err(Error::contract(format!(
                "link clouds do not cover the links of model `{}`",
                model.name()
            )))
        }
    }
}

/// Resolves a URDF mesh reference (`package://…`, `file://…` or relative) inside `mesh_dir`.
pub fn resolve_mesh_path(mesh_dir: &Path, filename: &str) -> Result<PathBuf> {
    let stripped = filename
        .strip_prefix("package://")
        .or_else(|| filename.strip_prefix("file://"))
        .unwrap_or(filename);
    let rel = Path::new(stripped);
    let mut candidates = vec![mesh_dir.join(rel)];
    // `package://pkg/meshes/x.obj` → try progressively shorter suffixes.
    let parts: Vec<_> = rel.components().collect();
    for skip in 1..parts.len() {
        candidates.push(mesh_dir.join(parts[skip..].iter().collect::<PathBuf>()));
    }
    candidates
        .iter()
        .find(|c| c.is_file())
        .cloned()
        .ok_or_else(|| {
            Error::Io(std::io::Error::new(
                std::io::ErrorKind::NotFound,
                format!("mesh `{filename}` not found under {}", mesh_dir.display()),
            ))
        })
}

/// Loads an OBJ mesh from disk.
pub fn load_obj(path: &Path) -> Result<TriangleMesh> {
    let text = std::fs::read_to_string(path).map_err(|e| {
        Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))
    })?;
    TriangleMesh::from_obj(&text).map_err(|e| match e {
        Error::Parse { line, message } => Error::Parse {
            line,
            message: format!("{}: {message}", path.display()),
        },
        other => other,
    })
}

/// Tessellates every link's geometry in its link frame; `None` for links
/// without geometry. Mesh references go through `load_mesh`.
pub fn link_meshes<F>(model: &KinematicModel, mut load_mesh: F) -> Result<Vec<Option<TriangleMesh>>>
where
    F: FnMut(&str) -> Result<TriangleMesh>,
{
    model
        .links()
        .iter()
        .map(|link| {
            if link.geometry.is_empty() {
                return Ok(None);
            }
            let mut merged = TriangleMesh::default();
            for g in &link.geometry {
                let local = match &g.shape {
                    Shape::Box { size } => TriangleMesh::cuboid(*size),
                    Shape::Cylinder { radius, length } => TriangleMesh::cylinder(*radius, *length, 24),
                    Shape::Sphere { radius } => TriangleMesh::icosphere(*radius, 2),
                    Shape::Mesh { filename, scale } => load_mesh(filename)?.scaled(*scale),
                };
                merged.merge(&local.transformed(&g.origin));
            }
            Ok(Some(merged))
        })
        .collect()
}

/// Greedy farthest point sampling from a random start chosen by `seed`.
pub fn farthest_point_sampling(points: &[Point3<f64>], k: usize, seed: u64) -> Result<Vec<usize>> {
    if k == 0 || k > points.len() {
        return Err(Error::contract(format!(
            "FPS needs 1 ≤ k ≤ {}, got k = {k}",
            points.len()
        )));
    }
    let start = rng::stream(seed, Op::Fps, 0).random_range(0..points.len());
    Ok(fps_extend(points, vec![start], k))
}

/// Farthest point sampling from a given start index.
pub fn farthest_point_sampling_from(points: &[Point3<f64>], start: usize, k: usize) -> Result<Vec<usize>> {
    if k == 0 || k > points.len() || start >= points.len() {
        return Err(Error::contract(format!(
            "FPS needs 1 ≤ k ≤ {} and a valid start, got k = {k}, start = {start}",
            points.len()
        )));
    }
    Ok(fps_extend(points, vec![start], k))
}

/// Continues FPS from an already chosen set until `k` indices are selected.
/// Ties go to the lowest index.
fn fps_extend(points: &[Point3<f64>], mut chosen: Vec<usize>, k: usize) -> Vec<usize> {
    let mut min_d2 = vec![f64::INFINITY; points.len()];
    let mut taken = vec![false; points.len()];
    let relax = |min_d2: &mut [f64], c: usize| {
        let pc = points[c];
        for (d, p) in min_d2.iter_mut().zip(points) {
            let d2 = (p - pc).norm_squared();
            if d2 < *d {
                *d = d2;
            }
        }
    };
    for &c in &chosen {
        taken[c] = true;
        relax(&mut min_d2, c);
    }
    while chosen.len() < k {
        let mut best = usize::MAX;
        let mut best_d = f64::NEG_INFINITY;
        for (i, &d) in min_d2.iter().enumerate() {
            if !taken[i] && d > best_d {
                best = i;
                best_d = d;
            }
        }
        taken[best] = true;
        chosen.push(best);
        relax(&mut min_d2, best);
    }
    chosen
}

/// Area-weighted surface samples per geometric link, reduced by FPS to
/// `cfg.n_total` points overall. Each geometric link first reserves
/// `cfg.min_points_per_link` points by a per-link FPS; the global FPS then
/// continues from that reserved set. Points keep their sampling order within a link.
pub fn sample_link_clouds(
    model: &KinematicModel,
    meshes: &[Option<TriangleMesh>],
    cfg: &SamplingConfig,
) -> Result<LinkClouds> {
    cfg.validate()?;
    if meshes.len() != model.links().len() {
        return Err(Error::contract(format!(
            "{} meshes for {} links",
            meshes.len(),
            model.links().len()
        )));
    }
    let geometric: Vec<usize> = meshes
        .iter()
        .enumerate()
        .filter(|(i, m)| m.is_some() && model.links()[*i].kind == LinkKind::Body)
        .map(|(i, _)| i)
        .collect();
    if geometric.is_empty() {
        return Err(Error::data(format!("model `{}` has no link geometry", model.name())));
    }
    let capacity = cfg.n_per_link * geometric.len();
    if cfg.n_total > capacity {
        return Err(Error::contract(format!(
            "n_total = {} exceeds {} links × {} samples",
            cfg.n_total,
            geometric.len(),
            cfg.n_per_link
        )));
    }
    let reserve = cfg.min_points_per_link.min(cfg.n_per_link);
    if reserve * geometric.len() > cfg.n_total {
        return Err(Error::contract(format!(
            "n_total = {} cannot keep {reserve} points on each of {} links",
            cfg.n_total,
            geometric.len()
        )));
    }

    let mut all = Vec::with_capacity(capacity);
    let mut owner = Vec::with_capacity(capacity);
    let mut chosen = Vec::new();
    for &link in &geometric {
        let mesh = meshes[link].as_ref().expect("geometric");
        if mesh.is_empty() {
            return Err(Error::data(format!(
                "link `{}` has an empty mesh",
                model.links()[link].name
            )));
        }
        let mut r = rng::stream(cfg.seed, Op::LinkSurface, link as u32);
        let pts = mesh.sample_surface(cfg.n_per_link, &mut r)?;
        let offset = all.len();
        if reserve > 0 {
            let start = rng::stream(cfg.seed, Op::LinkReserve, link as u32).random_range(0..pts.len());
            chosen.extend(fps_extend(&pts, vec![start], reserve).into_iter().map(|i| i + offset));
        }
        all.extend(pts);
        owner.extend(std::iter::repeat_n(link, cfg.n_per_link));
    }
    if chosen.is_empty() {
        chosen.push(rng::stream(cfg.seed, Op::RobotFps, 0).random_range(0..all.len()));
    }
    let mut selected = fps_extend(&all, chosen, cfg.n_total);
    selected.sort_unstable();

    let mut clouds = vec![Vec::new(); model.links().len()];
    for i in selected {
        clouds[owner[i]].push(all[i]);
    }
    LinkClouds::new(model, clouds)
}

/// Transforms each link's canonical points by the link's world pose at `q`.
/// Output is labeled and ordered by link, so index `i` always denotes the same
/// material point whatever the configuration.
pub fn cloud_fk(model: &KinematicModel, q: &[f64], canonical: &LinkClouds) -> Result<PointCloud> {
    canonical.check_model(model)?;
    let poses = model.link_poses(q)?;
    let mut points = Vec::with_capacity(canonical.total_points());
    for (link, pts) in canonical.iter() {
        let pose = &poses[link];
        points.extend(pts.iter().map(|p| pose.transform_point(p)));
    }
    Ok(PointCloud {
        points,
        labels: Some(canonical.labels()),
    })
}

/// Noisy object cloud: a pool of surface samples, a subset without
/// replacement, then isotropic Gaussian noise.
pub fn sample_object_cloud(mesh: &TriangleMesh, cfg: &SamplingConfig) -> Result<PointCloud> {
    cfg.validate()?;
    if mesh.is_empty() {
        return Err(Error::data("object mesh is empty"));
    }
    if cfg.n_object > cfg.object_pool {
        return Err(Error::contract(format!(
            "n_object = {} exceeds the pool of {}",
            cfg.n_object, cfg.object_pool
        )));
    }
    let pool = mesh.sample_surface(cfg.object_pool, &mut rng::stream(cfg.seed, Op::ObjectPool, 0))?;
    let mut subset_rng = rng::stream(cfg.seed, Op::ObjectSubset, 0);
    let picks = rand::seq::index::sample(&mut subset_rng, cfg.object_pool, cfg.n_object);
    let mut noise_rng = rng::stream(cfg.seed, Op::ObjectNoise, 0);
    let points = if cfg.object_noise_sigma > 0.0 {
        let normal = Normal::new(0.0, cfg.object_noise_sigma).expect("sigma validated");
        picks
            .iter()
            .map(|i| {
                let n = Vector3::new(
                    normal.sample(&mut noise_rng),
                    normal.sample(&mut noise_rng),
                    normal.sample(&mut noise_rng),
                );
                pool[i] + n
            })
            .collect()
    } else {
        picks.iter().map(|i| pool[i]).collect()
    };
    Ok(PointCloud::unlabeled(points))
}

/// Uniform random point on the unit sphere.
pub fn random_unit_vector<R: Rng>(rng: &mut R) -> Vector3<f64> {
    loop {
        let v = Vector3::new(
            StandardNormal.sample(rng),
            StandardNormal.sample(rng),
            StandardNormal.sample(rng),
        );
        let n: f64 = v.norm();
        if n > 1e-12 {
            return v / n;
        }
    }
}

/// Keeps the half of the cloud facing a random viewing direction.
pub fn partial_cloud(points: &[Point3<f64>], seed: u64) -> Result<Vec<Point3<f64>>> {
    let on_sphere = random_unit_vector(&mut rng::stream(seed, Op::Partial, 0));
    // Direction from the sampled sphere point towards the origin.
    partial_cloud_towards(points, &(-on_sphere))
}

/// Keeps the `N/2` points with the largest `r · d_i`, where `d_i` is the unit
/// direction from the centroid to point `i`. Ties go to the lower index; the
/// result preserves input order.
pub fn partial_cloud_towards(points: &[Point3<f64>], r: &Vector3<f64>) -> Result<Vec<Point3<f64>>> {
    if !points.len().is_multiple_of(2) {
        return Err(Error::contract(format!(
            "partial cloud needs an even point count, got {}",
            points.len()
        )));
    }
    let Some(c) = centroid(points) else {
        return Ok(Vec::new());
    };
    let scores: Vec<f64> = points
        .iter()
        .map(|p| {
            let d = p - c;
            let n = d.norm();
            if n > 0.0 {
                r.dot(&(d / n))
            } else {
                0.0
            }
        })
        .collect();
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    let mut keep = order[..points.len() / 2].to_vec();
    keep.sort_unstable();
    Ok(keep.into_iter().map(|i| points[i]).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kinematics::LoadOptions;

    const TWO_LINKS: &str = r#"<robot name="two">
  <link name="a"><visual><geometry><box size="0.1 0.1 0.1"/></geometry></visual></link>
  <link name="b"><visual><origin xyz="0.05 0 0"/><geometry><box size="0.1 0.1 0.1"/></geometry></visual></link>
  <joint name="j" type="revolute"><parent link="a"/><child link="b"/>
    <origin xyz="0.1 0 0"/><axis xyz="0 0 1"/><limit lower="-1" upper="1"/></joint>
</robot>"#;

    fn model() -> KinematicModel {
        KinematicModel::from_urdf(TWO_LINKS, LoadOptions::default()).unwrap()
    }

    fn cfg() -> SamplingConfig {
        SamplingConfig {
            n_per_link: 128,
            n_total: 64,
            seed: 3,
            ..Default::default()
        }
    }

    #[test]
    fn fps_exhaustive_and_base_cases() {
        let pts: Vec<_> = (0..10).map(|i| Point3::new(i as f64, 0.0, 0.0)).collect();
        let mut all = farthest_point_sampling(&pts, 10, 1).unwrap();
        all.sort_unstable();
        assert_eq!(all, (0..10).collect::<Vec<_>>());
        let one = farthest_point_sampling(&pts, 1, 1).unwrap();
        let start = rng::stream(1, Op::Fps, 0).random_range(0..10);
        assert_eq!(one, vec![start]);
        assert!(farthest_point_sampling(&pts, 0, 1).is_err());
        assert!(farthest_point_sampling(&pts, 11, 1).is_err());
    }

    #[test]
    fn fps_tie_break_lowest_index() {
        // From the center, all four corners tie.
        let pts = vec![
            Point3::new(0.5, 0.5, 0.0),
            Point3::new(0.0, 0.0, 0.0),
            Point3::new(1.0, 0.0, 0.0),
            Point3::new(0.0, 1.0, 0.0),
            Point3::new(1.0, 1.0, 0.0),
        ];
        let sel = farthest_point_sampling_from(&pts, 0, 2).unwrap();
        assert_eq!(sel, vec![0, 1]);
    }

    #[test]
    fn link_sampling_is_deterministic_and_covers_both_links() {
        let m = model();
        let meshes = link_meshes(&m, |_| unreachable!()).unwrap();
        let a = sample_link_clouds(&m, &meshes, &cfg()).unwrap();
        let b = sample_link_clouds(&m, &meshes, &cfg()).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.total_points(), 64);
        let ia = m.link_index("a").unwrap();
        let ib = m.link_index("b").unwrap();
        assert!(a.link(ia).len() >= 4 && a.link(ib).len() >= 4);
        let other = sample_link_clouds(&m, &meshes, &SamplingConfig { seed: 4, ..cfg() }).unwrap();
        assert_ne!(a, other);
    }

    #[test]
    fn sampling_rejects_bad_counts_and_empty_meshes() {
        let m = model();
        let mut meshes = link_meshes(&m, |_| unreachable!()).unwrap();
        let too_many = SamplingConfig { n_total: 300, ..cfg() };
        assert!(matches!(sample_link_clouds(&m, &meshes, &too_many), Err(Error::Contract(_))));
        let ib = m.link_index("b").unwrap();
        meshes[ib] = Some(TriangleMesh::default());
        assert!(matches!(sample_link_clouds(&m, &meshes, &cfg()), Err(Error::Data(_))));
    }

    #[test]
    fn cloud_fk_zero_config_and_translation() {
        let m = model();
        let meshes = link_meshes(&m, |_| unreachable!()).unwrap();
        let canon = sample_link_clouds(&m, &meshes, &cfg()).unwrap();
        let zero = cloud_fk(&m, &vec![0.0; m.n_dof()], &canon).unwrap();
        let ib = m.link_index("b").unwrap();
        let start_b: usize = (0..ib).map(|l| canon.link(l).len()).sum();
        for (k, p) in canon.link(ib).iter().enumerate() {
            assert_eq!(zero.points[start_b + k], Point3::new(p.x + 0.1, p.y, p.z));
        }
        let mut q = vec![0.0; m.n_dof()];
        q[0] = 0.3;
        q[1] = -0.2;
        q[2] = 0.1;
        let moved = cloud_fk(&m, &q, &canon).unwrap();
        for (a, b) in zero.points.iter().zip(&moved.points) {
            assert!(((b - a) - Vector3::new(0.3, -0.2, 0.1)).norm() < 1e-15);
        }
        assert_eq!(moved.labels, zero.labels);
    }

    #[test]
    fn link_clouds_round_trip_through_labeled_cloud() {
        let m = model();
        let meshes = link_meshes(&m, |_| unreachable!()).unwrap();
        let canon = sample_link_clouds(&m, &meshes, &cfg()).unwrap();
        let back = LinkClouds::from_point_cloud(&m, &canon.to_point_cloud()).unwrap();
        assert_eq!(back, canon);
    }

    #[test]
    fn object_sampling_noiseless_points_on_surface() {
        let mesh = TriangleMesh::cuboid([0.1, 0.2, 0.05]);
        let c = SamplingConfig {
            object_noise_sigma: 0.0,
            object_pool: 4096,
            ..Default::default()
        };
        let cloud = sample_object_cloud(&mesh, &c).unwrap();
        assert_eq!(cloud.len(), 512);
        for p in &cloud.points {
            assert!(mesh.closest_point(p).0 < 1e-9);
        }
        assert_eq!(cloud, sample_object_cloud(&mesh, &c).unwrap());
        let bad = SamplingConfig { n_object: 5000, ..c };
        assert!(matches!(sample_object_cloud(&mesh, &bad), Err(Error::Contract(_))));
    }

    #[test]
    fn object_sampling_noise_level() {
        let mesh = TriangleMesh::icosphere(0.05, 3);
        let c = SamplingConfig {
            object_pool: 8192,
            seed: 11,
            ..Default::default()
        };
        let cloud = sample_object_cloud(&mesh, &c).unwrap();
        let mean = cloud.points.iter().map(|p| mesh.closest_point(p).0).sum::<f64>() / cloud.len() as f64;
        assert!((0.001..=0.005).contains(&mean), "mean distance {mean}");
    }

    #[test]
    fn partial_lower_hemisphere() {
        let mesh = TriangleMesh::icosphere(1.0, 2);
        let mut pts: Vec<Point3<f64>> = mesh.vertices().to_vec();
        if pts.len() % 2 == 1 {
            pts.pop();
        }
        let kept = partial_cloud_towards(&pts, &Vector3::new(0.0, 0.0, -1.0)).unwrap();
        assert_eq!(kept.len(), pts.len() / 2);
        let c = centroid(&pts).unwrap();
        let mut scores: Vec<f64> = pts.iter().map(|p| -(p - c).normalize().z).collect();
        scores.sort_by(|a, b| b.total_cmp(a));
        let threshold = scores[pts.len() / 2 - 1];
        for p in &kept {
            assert!(-(p - c).normalize().z >= threshold);
        }
        assert!(partial_cloud_towards(&pts[..3], &Vector3::z()).is_err());
        assert_eq!(partial_cloud(&pts, 9).unwrap(), partial_cloud(&pts, 9).unwrap());
    }

    #[test]
    fn partial_handles_point_at_centroid() {
        let pts = vec![Point3::new(-1.0, 0.0, 0.0), Point3::origin(), Point3::origin(), Point3::new(1.0, 0.0, 0.0)];
        let kept = partial_cloud_towards(&pts, &Vector3::x()).unwrap();
        // scores: -1, 0, 0, 1 → keep index 3 then index 1 (tie by lowest index).
        assert_eq!(kept, vec![Point3::origin(), Point3::new(1.0, 0.0, 0.0)]);
    }
}
