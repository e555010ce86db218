//! Frame snapshots: a JSON manifest plus one CSV per patch.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{read_text, write_file};
use crate::amr::Hierarchy;
use crate::error::{Result, SurgeError};

const PATCH_HEADER: &str = "i,j,lon,lat,h,hu,hv,b,eta";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PatchMeta {
    /// 1-based refinement level.
    pub level: usize,
    pub ilo: i64,
    pub jlo: i64,
    pub nx: i64,
    pub ny: i64,
    pub dlon: f64,
    pub dlat: f64,
    pub file: String,
}

impl PatchMeta {
    pub fn lon_min(&self, origin: f64) -> f64 {
        origin + self.ilo as f64 * self.dlon
    }

    pub fn lat_min(&self, origin: f64) -> f64 {
        origin + self.jlo as f64 * self.dlat
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrameManifest {
    pub index: usize,
    pub t: f64,
    pub lon_min: f64,
    pub lat_min: f64,
    pub lon_max: f64,
    pub lat_max: f64,
    pub sea_level: f64,
    pub dry_tolerance: f64,
    pub coarse_steps: u64,
    /// Interior cells per level at this time.
    pub cells_per_level: Vec<u64>,
    /// Interior cell updates per level since the start.
    pub cell_steps_per_level: Vec<u64>,
    /// Cells of a uniform grid at the finest configured resolution.
    pub uniform_finest_cells: u64,
    /// Product of the spatial ratios down to the finest configured level.
    pub refinement_factor: u64,
    pub composite_mass: f64,
    pub patches: Vec<PatchMeta>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CellRow {
    pub i: i64,
    pub j: i64,
    pub lon: f64,
    pub lat: f64,
    pub h: f64,
    pub hu: f64,
    pub hv: f64,
    pub b: f64,
    pub eta: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FramePatch {
    pub meta: PatchMeta,
    /// Row-major, south row first.
    pub cells: Vec<CellRow>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Frame {
    pub manifest: FrameManifest,
    pub patches: Vec<FramePatch>,
}

pub fn frame_dir(out: &Path, index: usize) -> PathBuf {
    out.join("frames").join(format!("frame_{index:04}"))
}

/// Snapshot the hierarchy into `out/frames/frame_NNNN/`. Patches are listed
/// by level, then in patch order; values use shortest round-trip text.
pub fn write_frame(h: &Hierarchy, out: &Path, index: usize, coarse_steps: u64) -> Result<FrameManifest> {
    let dir = frame_dir(out, index);
    let mut metas = Vec::new();
    for (l, level) in h.levels.iter().enumerate() {
        for (n, p) in level.patches.iter().enumerate() {
            let file = format!("patch_{:02}_{n:04}.csv", l + 1);
            let mut text = String::with_capacity(p.nx() * p.ny() * 120);
            text.push_str(PATCH_HEADER);
            text.push('\n');
            for j in 0..p.ny() as isize {
                let lat = p.lat_center(j);
                for i in 0..p.nx() as isize {
                    let k = p.idx(i, j);
                    let _ = writeln!(
                        text,
                        "{},{},{},{},{},{},{},{},{}",
                        p.rect.ilo + i as i64,
                        p.rect.jlo + j as i64,
                        p.lon_center(i),
                        lat,
                        p.h[k],
                        p.hu[k],
                        p.hv[k],
                        p.b[k],
                        p.h[k] + p.b[k]
                    );
                }
            }
            write_file(&dir.join(&file), text.as_bytes())?;
            metas.push(PatchMeta {
                level: l + 1,
                ilo: p.rect.ilo,
                jlo: p.rect.jlo,
                nx: p.rect.nx,
                ny: p.rect.ny,
                dlon: p.dlon,
                dlat: p.dlat,
                file,
            });
        }
    }
    let refinement_factor = h.settings.ratios_x.iter().zip(&h.settings.ratios_y).map(|(&x, &y)| x.max(y) as u64).product();
    let manifest = FrameManifest {
        index,
        t: h.t,
        lon_min: h.domain.lon_min,
        lat_min: h.domain.lat_min,
        lon_max: h.domain.lon_max,
        lat_max: h.domain.lat_max,
        sea_level: h.phys.sea_level,
        dry_tolerance: h.phys.dry_tolerance,
        coarse_steps,
        cells_per_level: h.cells_per_level(),
        cell_steps_per_level: h.diagnostics.cell_steps.clone(),
        uniform_finest_cells: h.uniform_finest_cells(),
        refinement_factor,
        composite_mass: h.composite_mass(),
        patches: metas,
    };
    let json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    write_file(&dir.join("manifest.json"), json.as_bytes())?;
    Ok(manifest)
}

fn parse_patch(path: &Path, meta: PatchMeta) -> Result<FramePatch> {
    let text = read_text(path)?;
    let bad = |msg: String| SurgeError::Format { path: path.to_path_buf(), msg };
    let mut lines = text.lines();
    if lines.next() != Some(PATCH_HEADER) {
        return Err(bad(format!("expected header `{PATCH_HEADER}`")));
    }
    let mut cells = Vec::with_capacity((meta.nx * meta.ny) as usize);
    for (n, line) in lines.enumerate() {
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 9 {
            return Err(bad(format!("line {}: expected 9 fields", n + 2)));
        }
        let num = |s: &str| s.parse::<f64>().map_err(|e| bad(format!("line {}: {e}", n + 2)));
        let int = |s: &str| s.parse::<i64>().map_err(|e| bad(format!("line {}: {e}", n + 2)));
        cells.push(CellRow {
            i: int(f[0])?,
            j: int(f[1])?,
            lon: num(f[2])?,
            lat: num(f[3])?,
            h: num(f[4])?,
            hu: num(f[5])?,
            hv: num(f[6])?,
            b: num(f[7])?,
            eta: num(f[8])?,
        });
    }
    if cells.len() as i64 != meta.nx * meta.ny {
        return Err(bad(format!("expected {} cells, found {}", meta.nx * meta.ny, cells.len())));
    }
    Ok(FramePatch { meta, cells })
}

pub fn read_frame(out: &Path, index: usize) -> Result<Frame> {
    let dir = frame_dir(out, index);
    let path = dir.join("manifest.json");
    let manifest: FrameManifest = serde_json::from_str(&read_text(&path)?)
        .map_err(|e| SurgeError::Format { path: path.clone(), msg: e.to_string() })?;
    let patches = manifest
        .patches
        .iter()
        .map(|m| parse_patch(&dir.join(&m.file), m.clone()))
        .collect::<Result<Vec<_>>>()?;
    Ok(Frame { manifest, patches })
}
