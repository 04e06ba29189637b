//! MOT text files and flat `key = value` run configuration.

mod config;
mod mot;

pub use config::RunConfig;
pub use mot::{
    detections_from_records, detections_to_records, format_mot, parse_mot, read_mot,
    trajectories_from_records, trajectories_to_records, write_mot, MotRecord,
};

use std::path::Path;

use crate::error::{Error, Result};

pub(crate) fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path.display().to_string(), e))
}
