//! Seeded random articulated models, for property tests and benchmarks.

use std::fmt::Write;

use rand::Rng;

use crate::rng::{self, Op};

/// URDF text of a random tree of `n_links` box-shaped links.
///
/// Joints are a mix of revolute, prismatic and fixed with random origins,
/// orientations and (unnormalized) axes, so generated models exercise every
/// joint type and branching structure.
pub fn random_tree_urdf(seed: u64, n_links: usize) -> String {
    let mut r = rng::stream(seed, Op::Synthetic, 0);
    let n_links = n_links.max(1);
    let mut s = String::new();
    writeln!(s, r#"<robot name="random_{seed}">"#).unwrap();
    for i in 0..n_links {
        let (x, y, z) = (r.random_range(0.01..0.05), r.random_range(0.01..0.05), r.random_range(0.01..0.05));
        writeln!(
            s,
            r#"  <link name="l{i}"><visual><origin xyz="{} 0 0"/><geometry><box size="{x} {y} {z}"/></geometry></visual></link>"#,
            x / 2.0
        )
        .unwrap();
    }
    for i in 1..n_links {
        let parent = r.random_range(0..i);
        let kind = match r.random_range(0..10) {
            0..=6 => "revolute",
            7 | 8 => "prismatic",
            _ => "fixed",
        };
        let mut v = || r.random_range(-1.0..1.0);
        let xyz = [0.06 * v(), 0.06 * v(), 0.06 * v()];
        let rpy = [3.0 * v(), 1.5 * v(), 3.0 * v()];
        let mut axis = [v(), v(), v()];
        if axis.iter().map(|a| a * a).sum::<f64>() < 1e-2 {
            axis = [0.0, 0.0, 1.0];
        }
        let limit = if kind == "prismatic" { 0.05 } else { 2.0 };
        writeln!(
            s,
            r#"  <joint name="j{i}" type="{kind}"><parent link="l{parent}"/><child link="l{i}"/><origin xyz="{} {} {}" rpy="{} {} {}"/><axis xyz="{} {} {}"/><limit lower="{}" upper="{limit}"/></joint>"#,
            xyz[0], xyz[1], xyz[2], rpy[0], rpy[1], rpy[2], axis[0], axis[1], axis[2], -limit
        )
        .unwrap();
    }
    s.push_str("</robot>\n");
    s
}
