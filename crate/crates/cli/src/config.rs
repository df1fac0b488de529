use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use roadtrace_core::baseline::BaselineConfig;
use roadtrace_core::eval::EvalConfig;
use roadtrace_core::refine::RefineConfig;
use roadtrace_core::synth::SynthConfig;
use roadtrace_core::traj::CleanConfig;
use roadtrace_core::tracer::TraceConfig;

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServeConfig {
    pub host: String,
    pub port: u16,
    pub data_dir: Option<PathBuf>,
    pub merge_radius: f64,
}

impl Default for ServeConfig {
    fn default() -> Self {
        ServeConfig {
            host: "127.0.0.1".into(),
            port: 8080,
            data_dir: None,
            merge_radius: TraceConfig::default().merge_radius,
        }
    }
}

/// Optional per-command sections of a `--config` file. Command-line flags
/// override whatever the file sets.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub synth: SynthConfig,
    pub clean: CleanConfig,
    pub trace: TraceConfig,
    pub baseline: BaselineConfig,
    pub refine: RefineConfig,
    pub eval: EvalConfig,
    pub serve: ServeConfig,
}

impl PipelineConfig {
    pub fn load(path: Option<&Path>) -> Result<PipelineConfig, CliError> {
        let Some(path) = path else {
            return Ok(PipelineConfig::default());
        };
        let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        serde_json::from_str(&text)
            .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
    }
}
