//! Command implementations behind the `onsd` binary.

pub mod error;
pub mod evaluate;
pub mod measure;
pub mod phantom;
pub mod plot;

use std::path::Path;

use onsd_core::pipeline::{parse_rows, PipelineConfig};
use onsd_core::tracking::RoiBox;

use error::{CliError, CliResult};

/// Config file (or defaults) with command-line overrides applied on top.
pub fn load_config(
    path: Option<&Path>,
    seed_box: Option<&str>,
    measure_rows: Option<&str>,
) -> CliResult<PipelineConfig> {
    let mut config = match path {
        None => PipelineConfig::default(),
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?;
            PipelineConfig::parse(&text).map_err(CliError::config)?
        }
    };
    if let Some(b) = seed_box {
        config.seed_box = Some(RoiBox::parse(b).map_err(CliError::config)?);
    }
    if let Some(r) = measure_rows {
        config.measure_rows = Some(parse_rows(r).map_err(CliError::config)?);
    }
    config.validate().map_err(CliError::config)?;
    Ok(config)
}
