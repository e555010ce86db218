//! Output files: frames, gauge series, cell statistics, raster plots, and
//! the simulation driver that writes them.

mod frame;
mod render;
mod run;

pub use frame::{read_frame, write_frame, CellRow, Frame, FrameManifest, FramePatch, PatchMeta};
pub use render::{render_frame, ColorTable, PlotVariable, Raster};
pub use run::{frame_count, read_gauge_csv, run, write_gauge_csv, RunSummary, GAUGE_HEADER};

use std::path::Path;

use crate::error::{Result, SurgeError};

pub(crate) fn write_file(path: &Path, contents: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| SurgeError::io(dir, e))?;
    }
    std::fs::write(path, contents).map_err(|e| SurgeError::io(path, e))
}

pub(crate) fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| SurgeError::io(path, e))
}
