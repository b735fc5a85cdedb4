#![allow(dead_code)]

use std::path::PathBuf;

use dro_core::cloud::SamplingConfig;
use dro_core::pipeline::Scene;

pub fn assets() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../assets")
}

pub fn scene(hand: &str, object: &str) -> Scene {
    scene_with(hand, object, &SamplingConfig::default())
}

pub fn scene_with(hand: &str, object: &str, sampling: &SamplingConfig) -> Scene {
    let root = assets();
    Scene::load(
        &root.join(format!("robots/{hand}.urdf")),
        &root.join("robots"),
        &root.join(format!("objects/{object}.obj")),
        sampling,
    )
    .expect("bundled assets load")
}
