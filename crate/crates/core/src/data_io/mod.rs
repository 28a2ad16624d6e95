//! File formats, schooling harmonization, and the region registry.
//!
//! All tables are UTF-8 CSV with RFC-4180 quoting. Writers go through a
//! temporary file in the target directory and rename into place.

mod education;
mod join;
mod microdata;
mod panel;
mod registry;

use std::io::Write;
use std::path::Path;

pub use education::{
    discretize_education, harmonize, is_grid_value, EducationCategory, HarmonizationScheme,
    EDUCATION_GRID,
};
pub use join::{join_external, ExternalTable, JoinedPanel, JoinedRow};
pub use microdata::{
    read_microdata, write_microdata, MicroRecord, Microdata, Sex, MICRODATA_HEADER,
};
pub use panel::{panel_from_csv_reader, panel_to_csv_bytes, read_panel, write_panel, PANEL_HEADER};
pub use registry::{RegionEntry, RegionId, RegionKind, RegionRegistry};

use crate::error::{Error, Result};

/// Write `bytes` to `path` atomically (temp file + rename).
pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(dir, e))?;
    tmp.write_all(bytes).map_err(|e| Error::io(path, e))?;
    tmp.flush().map_err(|e| Error::io(path, e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}
