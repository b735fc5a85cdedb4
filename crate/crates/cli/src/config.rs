use std::path::{Path, PathBuf};

use dro_core::{LoadOptions, SamplingConfig, SolveParams};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

pub const DEFAULT_OUTPUT_DIR: &str = "dro_out";

/// Everything a run needs besides per-command arguments. Read from the
/// `--config` JSON file; command-line flags override individual fields.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub model_path: Option<PathBuf>,
    /// Directory URDF mesh references resolve in; defaults to the URDF's directory.
    pub mesh_dir: Option<PathBuf>,
    pub object_path: Option<PathBuf>,
    pub sampling: SamplingConfig,
    pub solve: SolveParams,
    /// Run seed. It replaces `sampling.seed` so one number controls every stage.
    pub seed: u64,
    pub output_dir: PathBuf,
    /// URDF loading options (virtual tip length and direction).
    pub load: LoadOptions,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            model_path: None,
            mesh_dir: None,
            object_path: None,
            sampling: SamplingConfig::default(),
            solve: SolveParams::default(),
            seed: 0,
            output_dir: PathBuf::from(DEFAULT_OUTPUT_DIR),
            load: LoadOptions::default(),
        }
    }
}

impl RunConfig {
    pub fn from_file(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::validation(format!("cannot read config {}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| CliError::validation(format!("invalid config {}: {e}", path.display())))
    }

    /// Sampling settings with the run seed applied.
    pub fn sampling(&self) -> SamplingConfig {
        SamplingConfig {
            seed: self.seed,
            ..self.sampling
        }
    }

    pub fn model_path(&self) -> CliResult<&Path> {
        existing_file(self.model_path.as_deref(), "model (--model or config model_path)")
    }

    pub fn object_path(&self) -> CliResult<&Path> {
        existing_file(self.object_path.as_deref(), "object mesh (--object or config object_path)")
    }

    pub fn mesh_dir(&self) -> CliResult<PathBuf> {
        let dir = match &self.mesh_dir {
            Some(d) => d.clone(),
            None => self
                .model_path()?
                .parent()
                .map(Path::to_path_buf)
                .unwrap_or_else(|| PathBuf::from(".")),
        };
        if !dir.is_dir() {
            return Err(CliError::validation(format!("mesh directory {} does not exist", dir.display())));
        }
        Ok(dir)
    }

    /// Checks that the settings are usable before any file is touched.
    pub fn validate(&self) -> CliResult<()> {
        self.sampling
            .validate()
            .and_then(|_| self.solve.validate())
            .map_err(|e| CliError::validation(format!("invalid config: {e}")))
    }
}

pub fn existing_file<'a>(path: Option<&'a Path>, what: &str) -> CliResult<&'a Path> {
    let path = path.ok_or_else(|| CliError::validation(format!("missing {what}")))?;
    if !path.is_file() {
        return Err(CliError::validation(format!("{what}: {} does not exist", path.display())));
    }
    Ok(path)
}
