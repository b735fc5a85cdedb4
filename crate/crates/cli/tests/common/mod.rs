#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

pub fn assets() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../assets")
}

pub fn robot(name: &str) -> PathBuf {
    assets().join(format!("robots/{name}.urdf"))
}

pub fn object(name: &str) -> PathBuf {
    assets().join(format!("objects/{name}.obj"))
}

pub struct Run {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

impl Run {
    pub fn json(&self) -> serde_json::Value {
        serde_json::from_str(&self.stdout).unwrap_or_else(|e| panic!("stdout is not JSON ({e}): {}", self.stdout))
    }
}

fn finish(out: Output) -> Run {
    Run {
        code: out.status.code().expect("exited normally"),
        stdout: String::from_utf8(out.stdout).unwrap(),
        stderr: String::from_utf8(out.stderr).unwrap(),
    }
}

/// Runs the `dro` binary with `--output <out>` prepended.
pub fn dro(out: &Path, args: &[&str]) -> Run {
    dro_env(out, args, &[])
}

pub fn dro_env(out: &Path, args: &[&str], env: &[(&str, &str)]) -> Run {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_dro"));
    cmd.arg("--output").arg(out).args(args).env_remove("DRO_THREADS");
    for (k, v) in env {
        cmd.env(k, v);
    }
    finish(cmd.output().expect("dro binary runs"))
}

pub fn p(path: &Path) -> &str {
    path.to_str().expect("utf-8 path")
}

/// `sample` for a bundled hand and object into `out`.
pub fn sample(out: &Path, hand: &str, obj: &str, seed: u64) -> Run {
    let seed = seed.to_string();
    dro(
        out,
        &["--seed", &seed, "sample", "--model", p(&robot(hand)), "--object", p(&object(obj))],
    )
}

/// Comma-joined configuration for `--q=`.
pub fn csv(q: &[f64]) -> String {
    q.iter().map(|v| format!("{v:?}")).collect::<Vec<_>>().join(",")
}
