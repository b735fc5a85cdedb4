pub mod cloud;
pub mod dro;
pub mod error;
pub mod io;
pub mod kinematics;
pub mod losses;
pub mod mesh;
pub mod metrics;
pub mod optimizer;
pub mod pipeline;
pub mod pose;
pub mod registration;
pub mod rng;
pub mod synthetic;

pub use error::{Error, Result, Stage};

pub use cloud::{cloud_fk, LinkClouds, PointCloud, SamplingConfig};
pub use dro::{compute_dro, recover_cloud, DroMatrix};
pub use io::{Dtype, StoredMatrix};
pub use kinematics::{JointConfig, KinematicModel, LinkPoseSet, LoadOptions};
pub use mesh::TriangleMesh;
pub use optimizer::{recover_grasp, solve_joints, GraspResult, SolveParams, SolveReport, StageTimings};
pub use pipeline::{RoundtripSummary, Scene};
pub use pose::Pose;
