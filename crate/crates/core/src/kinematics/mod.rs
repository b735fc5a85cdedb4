//! Articulated hand model: URDF loading with a floating virtual wrist, forward
//! kinematics, and analytic Jacobians of link origins.
//!
//! The configuration vector always starts with the six virtual wrist joints in
//! the order `(x, y, z, roll, pitch, yaw)`. The wrist transform is
//! `Trans(x, y, z) · Rz(yaw) · Ry(pitch) · Rx(roll)`, i.e. the same extrinsic
//! roll/pitch/yaw convention URDF uses for `<origin rpy>`. Actuated joints
//! follow in depth-first order of the source tree.

mod urdf;

use std::collections::HashMap;
use std::f64::consts::PI;
use std::ops::Deref;

use nalgebra::{Dyn, Matrix3xX, OMatrix, Point3, Vector3, U3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pose::{axis_angle, Pose, PoseJson};

pub use urdf::{Geometry, Shape};

/// Limits applied to the virtual wrist translation joints, meters.
pub const VIRTUAL_TRANSLATION_LIMIT: f64 = 10.0;
/// Limits applied to the virtual wrist rotation joints, radians.
pub const VIRTUAL_ROTATION_LIMIT: f64 = PI;
/// Number of virtual wrist joints prepended to every model.
pub const WRIST_DOF: usize = 6;

pub const WORLD_LINK: &str = "virtual_world";
const WRIST_JOINTS: [(&str, &str); 6] = [
    ("virtual_x_joint", "virtual_x_link"),
    ("virtual_y_joint", "virtual_y_link"),
    ("virtual_z_joint", "virtual_z_link"),
    ("virtual_yaw_joint", "virtual_yaw_link"),
    ("virtual_pitch_joint", "virtual_pitch_link"),
    ("virtual_roll_joint", ""),
];
const TIP_SUFFIX: &str = "_virtual_tip";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LoadOptions {
    /// Offset of the appended tip links from their leaf link origin, meters.
    pub virtual_tip_extension_length: f64,
    /// Direction of that offset in the leaf link frame; normalized on load.
    /// The default is local +x. A tip placed on the leaf joint's axis does not
    /// observe that joint, so models whose fingers extend along another axis
    /// should point this along the finger.
    pub virtual_tip_axis: [f64; 3],
}

impl Default for LoadOptions {
    fn default() -> Self {
        LoadOptions {
            virtual_tip_extension_length: 0.02,
            virtual_tip_axis: [1.0, 0.0, 0.0],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JointKind {
    Revolute,
    Prismatic,
    Fixed,
    VirtualPrismatic,
    VirtualRevolute,
}

impl JointKind {
    pub fn is_movable(self) -> bool {
        !matches!(self, JointKind::Fixed)
    }

    pub fn is_rotational(self) -> bool {
        matches!(self, JointKind::Revolute | JointKind::VirtualRevolute)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LinkKind {
    /// The fixed world frame.
    World,
    /// Intermediate frames of the virtual wrist chain.
    Wrist,
    /// A link from the source URDF.
    Body,
    /// Zero-geometry extension appended past a leaf link.
    Tip,
}

#[derive(Debug, Clone)]
pub struct Link {
    pub name: String,
    pub kind: LinkKind,
    /// Visual geometry, or collision geometry when the link has no visuals.
    pub geometry: Vec<Geometry>,
    pub parent_joint: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct JointSpec {
    pub name: String,
    pub kind: JointKind,
    pub axis: Vector3<f64>,
    /// Transform from the parent link frame to the joint frame.
    pub origin: Pose,
    /// `[q_min, q_max]`; `None` for fixed joints.
    pub limits: Option<[f64; 2]>,
    pub parent_link: usize,
    pub child_link: usize,
    /// Index into the configuration vector for movable joints.
    pub dof: Option<usize>,
}

impl JointSpec {
    fn motion(&self, value: f64) -> Pose {
        match self.kind {
            JointKind::Fixed => Pose::identity(),
            JointKind::Revolute | JointKind::VirtualRevolute => {
                Pose::new(axis_angle(&self.axis, value), Vector3::zeros())
            }
            JointKind::Prismatic | JointKind::VirtualPrismatic => {
                Pose::from_translation(self.axis * value)
            }
        }
    }
}

/// Full configuration vector; the first six entries are the floating wrist.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct JointConfig(Vec<f64>);

impl JointConfig {
    pub fn new(values: Vec<f64>) -> Self {
        JointConfig(values)
    }

    pub fn zeros(n: usize) -> Self {
        JointConfig(vec![0.0; n])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn wrist(&self) -> &[f64] {
        &self.0[..WRIST_DOF.min(self.0.len())]
    }
}

impl Deref for JointConfig {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl From<Vec<f64>> for JointConfig {
    fn from(v: Vec<f64>) -> Self {
        JointConfig(v)
    }
}

/// Named world poses, one per link.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LinkPoseSet {
    pub links: Vec<String>,
    pub poses: Vec<Pose>,
}

impl LinkPoseSet {
    pub fn get(&self, link: &str) -> Option<&Pose> {
        self.links
            .iter()
            .position(|l| l == link)
            .map(|i| &self.poses[i])
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Pose)> {
        self.links.iter().map(String::as_str).zip(self.poses.iter())
    }

    pub fn len(&self) -> usize {
        self.links.len()
    }

    pub fn is_empty(&self) -> bool {
        self.links.is_empty()
    }

    pub fn push(&mut self, link: impl Into<String>, pose: Pose) {
        self.links.push(link.into());
        self.poses.push(pose);
    }

    /// `{link: {"R": [...9 row-major], "x": [...3]}}` in link order.
    pub fn to_json(&self) -> serde_json::Value {
        let mut map = serde_json::Map::new();
        for (name, pose) in self.iter() {
            map.insert(
                name.to_string(),
                serde_json::to_value(PoseJson::from(pose)).expect("pose serializes"),
            );
        }
        serde_json::Value::Object(map)
    }

    pub fn from_json(value: &serde_json::Value) -> Result<Self> {
        let map = value
            .as_object()
            .ok_or_else(|| Error::data("link pose set must be a JSON object"))?;
        let mut out = LinkPoseSet::default();
        for (name, v) in map {
            let p: PoseJson = serde_json::from_value(v.clone())?;
            out.push(name.clone(), Pose::from(&p));
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct JointSummary {
    pub name: String,
    pub kind: JointKind,
    pub limits: Option<[f64; 2]>,
}

/// `{links: [...], joints: [{name, kind, limits}], n_dof}`.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ModelSummary {
    pub links: Vec<String>,
    pub joints: Vec<JointSummary>,
    pub n_dof: usize,
}

/// Joint frame data computed alongside link poses.
pub(crate) struct KinematicState {
    pub link_poses: Vec<Pose>,
    /// Per joint: world position of the joint frame and world joint axis.
    pub joint_anchor: Vec<(Vector3<f64>, Vector3<f64>)>,
}

/// Augmented articulated model. Immutable once built.
#[derive(Debug, Clone)]
pub struct KinematicModel {
    name: String,
    links: Vec<Link>,
    joints: Vec<JointSpec>,
    dof_joint: Vec<usize>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    /// Movable joints on the path root → link, root first.
    link_chain: Vec<Vec<usize>>,
    link_lookup: HashMap<String, usize>,
    tip_length: f64,
}

impl KinematicModel {
    pub fn from_urdf(text: &str, options: LoadOptions) -> Result<Self> {
        let raw = urdf::parse(text)?;
        build(raw, options)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn n_dof(&self) -> usize {
        self.dof_joint.len()
    }

    pub fn links(&self) -> &[Link] {
        &self.links
    }

    pub fn joints(&self) -> &[JointSpec] {
        &self.joints
    }

    pub fn lower_limits(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper_limits(&self) -> &[f64] {
        &self.upper
    }

    pub fn tip_extension_length(&self) -> f64 {
        self.tip_length
    }

    pub fn link_index(&self, name: &str) -> Result<usize> {
        self.link_lookup.get(name).copied().ok_or_else(|| Error::Lookup {
            kind: "link",
            name: name.to_string(),
        })
    }

    /// Joint index driving configuration entry `dof`.
    pub fn dof_joint(&self, dof: usize) -> &JointSpec {
        &self.joints[self.dof_joint[dof]]
    }

    /// Configuration indices of the movable joints between the world and `link`.
    pub fn chain_dofs(&self, link: usize) -> impl Iterator<Item = usize> + '_ {
        self.link_chain[link]
            .iter()
            .map(move |&j| self.joints[j].dof.expect("chain holds movable joints"))
    }

    /// Body links and tip links: every frame a grasp target can refer to.
    pub fn target_links(&self) -> impl Iterator<Item = usize> + '_ {
        self.links
            .iter()
            .enumerate()
            .filter(|(_, l)| matches!(l.kind, LinkKind::Body | LinkKind::Tip))
            .map(|(i, _)| i)
    }

    pub fn tip_links(&self) -> impl Iterator<Item = usize> + '_ {
        self.links
            .iter()
            .enumerate()
            .filter(|(_, l)| l.kind == LinkKind::Tip)
            .map(|(i, _)| i)
    }

    /// Parent link of a link, if any.
    pub fn parent_link(&self, link: usize) -> Option<usize> {
        self.links[link]
            .parent_joint
            .map(|j| self.joints[j].parent_link)
    }

    pub fn summary(&self) -> ModelSummary {
        ModelSummary {
            links: self.links.iter().map(|l| l.name.clone()).collect(),
            joints: self
                .joints
                .iter()
                .map(|j| JointSummary {
                    name: j.name.clone(),
                    kind: j.kind,
                    limits: j.limits,
                })
                .collect(),
            n_dof: self.n_dof(),
        }
    }

    pub fn is_within_limits(&self, q: &[f64]) -> bool {
        q.len() == self.n_dof()
            && q
                .iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(v, (lo, hi))| *lo <= *v && *v <= *hi)
    }

    pub fn check_dim(&self, q: &[f64]) -> Result<()> {
        if q.len() != self.n_dof() {
            return Err(Error::contract(format!(
                "configuration has {} entries, model `{}` has {} degrees of freedom",
                q.len(),
                self.name,
                self.n_dof()
            )));
        }
        Ok(())
    }

    pub(crate) fn state(&self, q: &[f64]) -> KinematicState {
        let mut link_poses = vec![Pose::identity(); self.links.len()];
        let mut joint_anchor = Vec::with_capacity(self.joints.len());
        for joint in &self.joints {
            let frame = link_poses[joint.parent_link].compose(&joint.origin);
            let value = joint.dof.map_or(0.0, |d| q[d]);
            joint_anchor.push((frame.translation, frame.rotation * joint.axis));
            link_poses[joint.child_link] = frame.compose(&joint.motion(value));
        }
        KinematicState {
            link_poses,
            joint_anchor,
        }
    }

    /// World pose of every link, indexed like [`KinematicModel::links`].
    pub fn link_poses(&self, q: &[f64]) -> Result<Vec<Pose>> {
        self.check_dim(q)?;
        Ok(self.state(q).link_poses)
    }

    pub fn forward_kinematics(&self, q: &[f64]) -> Result<LinkPoseSet> {
        let poses = self.link_poses(q)?;
        Ok(LinkPoseSet {
            links: self.links.iter().map(|l| l.name.clone()).collect(),
            poses,
        })
    }

    pub(crate) fn jacobian_from_state(
        &self,
        state: &KinematicState,
        link: usize,
    ) -> OMatrix<f64, U3, Dyn> {
        let mut jac = Matrix3xX::zeros(self.n_dof());
        let p = state.link_poses[link].translation;
        for &j in &self.link_chain[link] {
            let joint = &self.joints[j];
            let (anchor, axis) = state.joint_anchor[j];
            let col = if joint.kind.is_rotational() {
                axis.cross(&(p - anchor))
            } else {
                axis
            };
            jac.set_column(joint.dof.expect("movable"), &col);
        }
        jac
    }

    /// Analytic `∂x_link/∂q` for the link origin, 3 × n_dof.
    pub fn link_origin_jacobian(&self, q: &[f64], link: &str) -> Result<Matrix3xX<f64>> {
        let idx = self.link_index(link)?;
        self.check_dim(q)?;
        Ok(self.jacobian_from_state(&self.state(q), idx))
    }

    pub fn clamp_to_limits(&self, q: &[f64]) -> JointConfig {
        JointConfig(
            q.iter()
                .zip(self.lower.iter().zip(&self.upper))
                .map(|(v, (lo, hi))| v.clamp(*lo, *hi))
                .collect(),
        )
    }

    /// Link origin positions for every link.
    pub fn link_origins(&self, q: &[f64]) -> Result<Vec<Point3<f64>>> {
        Ok(self
            .link_poses(q)?
            .iter()
            .map(|p| Point3::from(p.translation))
            .collect())
    }
}

fn build(raw: urdf::RawRobot, options: LoadOptions) -> Result<KinematicModel> {
    if !(options.virtual_tip_extension_length.is_finite()
        && options.virtual_tip_extension_length >= 0.0)
    {
        return Err(Error::contract("tip extension length must be finite and nonnegative"));
    }
    let tip_axis = Vector3::from(options.virtual_tip_axis);
    if !(tip_axis.iter().all(|c| c.is_finite()) && tip_axis.norm() > 0.0) {
        return Err(Error::contract("tip axis must be a finite nonzero vector"));
    }
    let tip_offset = tip_axis.normalize() * options.virtual_tip_extension_length;
    if raw.links.is_empty() {
        return Err(Error::Structure("URDF declares no links".into()));
    }

    let mut raw_index: HashMap<&str, usize> = HashMap::new();
    for (i, l) in raw.links.iter().enumerate() {
        if raw_index.insert(l.name.as_str(), i).is_some() {
            return Err(Error::Structure(format!("duplicate link `{}`", l.name)));
        }
    }

    let mut parent_of: Vec<Option<usize>> = vec![None; raw.links.len()];
    let mut children: Vec<Vec<usize>> = vec![Vec::new(); raw.links.len()];
    for (ji, j) in raw.joints.iter().enumerate() {
        let lookup = |name: &str| {
            raw_index.get(name).copied().ok_or_else(|| {
                Error::Structure(format!(
                    "joint `{}` (line {}) references unknown link `{name}`",
                    j.name, j.line
                ))
            })
        };
        let p = lookup(&j.parent)?;
        let c = lookup(&j.child)?;
        if parent_of[c].is_some() {
            return Err(Error::Structure(format!(
                "kinematic loop: link `{}` has more than one parent joint",
                j.child
            )));
        }
        parent_of[c] = Some(ji);
        children[p].push(ji);
    }

    let roots: Vec<usize> = (0..raw.links.len()).filter(|&i| parent_of[i].is_none()).collect();
    let root = match roots.as_slice() {
        [r] => *r,
        [] => return Err(Error::Structure("kinematic loop: every link has a parent".into())),
        many => {
            return Err(Error::Structure(format!(
                "expected a single root link, found {}: {}",
                many.len(),
                many.iter()
                    .map(|&i| raw.links[i].name.as_str())
                    .collect::<Vec<_>>()
                    .join(", ")
            )))
        }
    };

    let mut links: Vec<Link> = Vec::new();
    let mut joints: Vec<JointSpec> = Vec::new();
    links.push(Link {
        name: WORLD_LINK.to_string(),
        kind: LinkKind::World,
        geometry: Vec::new(),
        parent_joint: None,
    });

    // Virtual wrist chain: x, y, z translations then yaw, pitch, roll rotations so
    // that the composed rotation is Rz·Ry·Rx. Configuration order is x y z roll pitch yaw.
    let wrist_axes = [
        (Vector3::x(), JointKind::VirtualPrismatic, 0),
        (Vector3::y(), JointKind::VirtualPrismatic, 1),
        (Vector3::z(), JointKind::VirtualPrismatic, 2),
        (Vector3::z(), JointKind::VirtualRevolute, 5),
        (Vector3::y(), JointKind::VirtualRevolute, 4),
        (Vector3::x(), JointKind::VirtualRevolute, 3),
    ];
    let mut parent = 0usize;
    for ((jname, lname), (axis, kind, dof)) in WRIST_JOINTS.iter().zip(wrist_axes) {
        let limit = if kind == JointKind::VirtualPrismatic {
            VIRTUAL_TRANSLATION_LIMIT
        } else {
            VIRTUAL_ROTATION_LIMIT
        };
        let child = links.len();
        let (name, link_kind, geometry) = if lname.is_empty() {
            (
                raw.links[root].name.clone(),
                LinkKind::Body,
                link_geometry(&raw.links[root]),
            )
        } else {
            (lname.to_string(), LinkKind::Wrist, Vec::new())
        };
        links.push(Link {
            name,
            kind: link_kind,
            geometry,
            parent_joint: Some(joints.len()),
        });
        joints.push(JointSpec {
            name: jname.to_string(),
            kind,
            axis,
            origin: Pose::identity(),
            limits: Some([-limit, limit]),
            parent_link: parent,
            child_link: child,
            dof: Some(dof),
        });
        parent = child;
    }

    // Depth-first over the source tree; children in document order.
    let mut next_dof = WRIST_DOF;
    let mut visited = 1usize;
    let mut stack: Vec<(usize, usize)> = children[root]
        .iter()
        .rev()
        .map(|&j| (j, parent))
        .collect();
    if children[root].is_empty() {
        push_tip(&mut links, &mut joints, parent, tip_offset);
    }
    while let Some((ji, parent_link)) = stack.pop() {
        let rj = &raw.joints[ji];
        let child_raw = raw_index[rj.child.as_str()];
        visited += 1;
        let kind = match rj.kind.as_str() {
            "revolute" | "continuous" => JointKind::Revolute,
            "prismatic" => JointKind::Prismatic,
            "fixed" => JointKind::Fixed,
            other => {
                return Err(Error::Structure(format!(
                    "joint `{}` (line {}) has unsupported type `{other}`",
                    rj.name, rj.line
                )))
            }
        };
        let limits = match (kind, rj.limit) {
            (JointKind::Fixed, _) => None,
            (_, Some((lo, hi))) => {
                if !(lo.is_finite() && hi.is_finite()) || lo > hi {
                    return Err(Error::Structure(format!(
                        "joint `{}` (line {}) has invalid limits [{lo}, {hi}]",
                        rj.name, rj.line
                    )));
                }
                Some([lo, hi])
            }
            (_, None) if rj.kind == "continuous" => Some([-PI, PI]),
            (_, None) => {
                return Err(Error::Structure(format!(
                    "movable joint `{}` (line {}) has no <limit lower/upper>",
                    rj.name, rj.line
                )))
            }
        };
        let axis = if kind.is_movable() {
            let n = rj.axis.norm();
            if !(n.is_finite() && n > 1e-12) {
                return Err(Error::Structure(format!(
                    "joint `{}` (line {}) has a zero axis",
                    rj.name, rj.line
                )));
            }
            rj.axis / n
        } else {
            rj.axis
        };
        let dof = kind.is_movable().then(|| {
            next_dof += 1;
            next_dof - 1
        });
        let child = links.len();
        links.push(Link {
            name: raw.links[child_raw].name.clone(),
            kind: LinkKind::Body,
            geometry: link_geometry(&raw.links[child_raw]),
            parent_joint: Some(joints.len()),
        });
        joints.push(JointSpec {
            name: rj.name.clone(),
            kind,
            axis,
            origin: rj.origin,
            limits,
            parent_link,
            child_link: child,
            dof,
        });
        if children[child_raw].is_empty() {
            push_tip(&mut links, &mut joints, child, tip_offset);
        }
        stack.extend(children[child_raw].iter().rev().map(|&j| (j, child)));
    }
    if visited != raw.links.len() {
        return Err(Error::Structure(format!(
            "kinematic loop: {} link(s) are not reachable from root `{}`",
            raw.links.len() - visited,
            raw.links[root].name
        )));
    }

    let mut link_lookup = HashMap::new();
    for (i, l) in links.iter().enumerate() {
        if link_lookup.insert(l.name.clone(), i).is_some() {
            return Err(Error::Structure(format!(
                "link name `{}` collides with a generated virtual link",
                l.name
            )));
        }
    }

    let n_dof = next_dof;
    let mut dof_joint = vec![usize::MAX; n_dof];
    let mut lower = vec![0.0; n_dof];
    let mut upper = vec![0.0; n_dof];
    for (ji, j) in joints.iter().enumerate() {
        if let (Some(d), Some([lo, hi])) = (j.dof, j.limits) {
            dof_joint[d] = ji;
            lower[d] = lo;
            upper[d] = hi;
        }
    }

    let mut link_chain: Vec<Vec<usize>> = vec![Vec::new(); links.len()];
    for (ji, j) in joints.iter().enumerate() {
        let mut chain = link_chain[j.parent_link].clone();
        if j.kind.is_movable() {
            chain.push(ji);
        }
        link_chain[j.child_link] = chain;
    }

    Ok(KinematicModel {
        name: raw.name,
        links,
        joints,
        dof_joint,
        lower,
        upper,
        link_chain,
        link_lookup,
        tip_length: options.virtual_tip_extension_length,
    })
}

fn link_geometry(link: &urdf::RawLink) -> Vec<Geometry> {
    if link.visuals.is_empty() {
        link.collisions.clone()
    } else {
        link.visuals.clone()
    }
}

fn push_tip(links: &mut Vec<Link>, joints: &mut Vec<JointSpec>, leaf: usize, offset: Vector3<f64>) {
    let name = format!("{}{TIP_SUFFIX}", links[leaf].name);
    let child = links.len();
    links.push(Link {
        name: name.clone(),
        kind: LinkKind::Tip,
        geometry: Vec::new(),
        parent_joint: Some(joints.len()),
    });
    joints.push(JointSpec {
        name: format!("{name}_joint"),
        kind: JointKind::Fixed,
        axis: Vector3::x(),
        origin: Pose::from_translation(offset),
        limits: None,
        parent_link: leaf,
        child_link: child,
        dof: None,
    });
}
