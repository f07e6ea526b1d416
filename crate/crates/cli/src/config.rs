use std::path::{Path, PathBuf};

use scanclass::{FeatureMode, GridConfig, Hyperparams, TextPipeline};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

pub const DEFAULT_PORT: u16 = 7878;

/// Settings shared by every subcommand. Loaded from one JSON file; missing
/// fields take their defaults and command-line flags override both.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub workspace_dir: PathBuf,
    pub grid: GridConfig,
    pub min_area: u32,
    pub hyperparams: Hyperparams,
    pub space_factor: f64,
    pub feature_mode: FeatureMode,
    pub stopwords_enabled: bool,
    pub serve_port: u16,
    /// Directory of static files served at `/` by `serve`.
    pub ui_dir: Option<PathBuf>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            workspace_dir: PathBuf::from("."),
            grid: GridConfig::default(),
            min_area: scanclass::segmentation::DEFAULT_MIN_AREA,
            hyperparams: Hyperparams::default(),
            space_factor: scanclass::text_diff::DEFAULT_SPACE_FACTOR,
            feature_mode: FeatureMode::default(),
            stopwords_enabled: false,
            serve_port: DEFAULT_PORT,
            ui_dir: None,
        }
    }
}

impl PipelineConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            if e.kind() == std::io::ErrorKind::NotFound {
                CliError::Core(scanclass::Error::FileNotFound(path.to_path_buf()))
            } else {
                CliError::Config(format!("{}: {e}", path.display()))
            }
        })?;
        serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if self.serve_port < 1024 {
            return Err(CliError::Config(format!(
                "serve_port must be in [1024, 65535], got {}",
                self.serve_port
            )));
        }
        if self.min_area == 0 {
            return Err(CliError::Config("min_area must be at least 1".into()));
        }
        if !(self.space_factor.is_finite() && self.space_factor >= 0.0) {
            return Err(CliError::Config(format!(
                "space_factor must be a non-negative number, got {}",
                self.space_factor
            )));
        }
        if self.workspace_dir.exists() && !self.workspace_dir.is_dir() {
            return Err(CliError::Config(format!(
                "workspace_dir {} is not a directory",
                self.workspace_dir.display()
            )));
        }
        self.grid.validate()?;
        self.hyperparams.validate()?;
        Ok(())
    }

    pub fn text_pipeline(&self) -> TextPipeline {
        TextPipeline {
            feature_mode: self.feature_mode,
            remove_stopwords: self.stopwords_enabled,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partial_file_keeps_defaults() {
        let cfg: PipelineConfig =
            serde_json::from_str(r#"{"min_area": 20, "feature_mode": {"significant_k": 5}}"#).unwrap();
        assert_eq!(cfg.min_area, 20);
        assert_eq!(cfg.feature_mode, FeatureMode::SignificantK(5));
        assert_eq!(cfg.serve_port, DEFAULT_PORT);
        assert_eq!(cfg.grid, GridConfig::default());
    }

    #[test]
    fn unknown_field_rejected() {
        assert!(serde_json::from_str::<PipelineConfig>(r#"{"min_aera": 20}"#).is_err());
    }

    #[test]
    fn port_range() {
        let mut cfg = PipelineConfig::default();
        assert!(cfg.validate().is_ok());
        cfg.serve_port = 80;
        assert!(cfg.validate().is_err());
    }
}
