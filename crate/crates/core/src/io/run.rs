//! Simulation driver: steps the hierarchy to the end time, writing frames at
//! the first step at or after each scheduled output time.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::frame::{frame_dir, write_frame};
use super::{read_text, write_file};
use crate::amr::{GaugeRecord, Hierarchy};
use crate::config::RunConfig;
use crate::error::{Result, SurgeError};

pub const GAUGE_HEADER: &str = "t,level,h,hu,hv,eta";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub frames: usize,
    pub coarse_steps: u64,
    pub regrids: u64,
    pub cfl_retries: u64,
    pub cell_steps_per_level: Vec<u64>,
    pub total_cell_steps: u64,
    /// Cell updates of a uniform run at the finest resolution taking
    /// `refinement_factor` steps per coarse step.
    pub uniform_cell_steps: u64,
    pub initial_mass: f64,
    pub final_mass: f64,
    /// Sum of absolute logged mass changes (regrids and gated corrections).
    pub cumulative_mass_change: f64,
}

pub fn write_gauge_csv(records: &[GaugeRecord]) -> String {
    let mut s = String::from(GAUGE_HEADER);
    s.push('\n');
    for r in records {
        let _ = writeln!(s, "{},{},{},{},{},{}", r.t, r.level, r.h, r.hu, r.hv, r.eta);
    }
    s
}

pub fn read_gauge_csv(path: &Path) -> Result<Vec<GaugeRecord>> {
    let text = read_text(path)?;
    let bad = |msg: String| SurgeError::Format { path: path.to_path_buf(), msg };
    let mut lines = text.lines();
    if lines.next() != Some(GAUGE_HEADER) {
        return Err(bad(format!("expected header `{GAUGE_HEADER}`")));
    }
    lines
        .enumerate()
        .map(|(n, line)| {
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 6 {
                return Err(bad(format!("line {}: expected 6 fields", n + 2)));
            }
            let num = |s: &str| s.parse::<f64>().map_err(|e| bad(format!("line {}: {e}", n + 2)));
            Ok(GaugeRecord {
                t: num(f[0])?,
                level: f[1].parse().map_err(|e| bad(format!("line {}: {e}", n + 2)))?,
                h: num(f[2])?,
                hu: num(f[3])?,
                hv: num(f[4])?,
                eta: num(f[5])?,
            })
        })
        .collect()
}

/// Number of frames in an output directory.
pub fn frame_count(out: &Path) -> usize {
    (0..).take_while(|&n| frame_dir(out, n).join("manifest.json").is_file()).count()
}

fn cells_row(s: &mut String, h: &Hierarchy, step: u64, max_levels: usize) {
    let cells = h.cells_per_level();
    let _ = write!(s, "{},{}", h.t, step);
    for l in 0..max_levels {
        let _ = write!(s, ",{}", cells.get(l).copied().unwrap_or(0));
    }
    let _ = writeln!(s, ",{}", h.diagnostics.total_cell_steps());
}

/// Run a loaded configuration, writing everything under its output
/// directory.
pub fn run(cfg: &RunConfig) -> Result<RunSummary> {
    let out = &cfg.output_dir;
    let frames_root = out.join("frames");
    if frames_root.exists() {
        std::fs::remove_dir_all(&frames_root).map_err(|e| SurgeError::io(&frames_root, e))?;
    }
    let metadata = serde_json::json!({
        "program": "surge",
        "version": env!("CARGO_PKG_VERSION"),
        "sea_level": cfg.physics.sea_level,
        "config": cfg,
    });
    write_file(&out.join("metadata.json"), serde_json::to_string_pretty(&metadata).expect("json").as_bytes())?;

    let mut h = cfg.build_hierarchy()?;
    let initial_mass = h.composite_mass();
    let max_levels = cfg.amr.max_levels;
    let mut cells = String::from("t,coarse_step");
    for l in 1..=max_levels {
        let _ = write!(cells, ",cells_level_{l}");
    }
    cells.push_str(",cell_steps_total\n");
    cells_row(&mut cells, &h, 0, max_levels);

    let interval = cfg.time.output_interval;
    let t0 = cfg.time.start;
    write_frame(&h, out, 0, 0)?;
    let mut frames = 1usize;
    let mut next = t0 + interval;
    let mut step = 0u64;
    let tol = 1e-9 * interval;
    h.run_until(cfg.time.end, |h| {
        step += 1;
        cells_row(&mut cells, h, step, max_levels);
        if h.t >= next - tol {
            write_frame(h, out, frames, step)?;
            log::info!("frame {frames} at t = {:.1} s, cells per level {:?}", h.t, h.cells_per_level());
            frames += 1;
            while next <= h.t + tol {
                next += interval;
            }
        }
        Ok(())
    })?;
    write_file(&out.join("cells.csv"), cells.as_bytes())?;
    for (g, records) in h.gauges.iter().zip(&h.gauge_records) {
        write_file(&out.join("gauges").join(format!("gauge_{}.csv", g.id)), write_gauge_csv(records).as_bytes())?;
    }
    let refinement: u64 = cfg.amr.ratios_x.iter().zip(&cfg.amr.ratios_y).map(|(&x, &y)| x.max(y) as u64).product();
    let summary = RunSummary {
        frames,
        coarse_steps: step,
        regrids: h.diagnostics.regrids,
        cfl_retries: h.diagnostics.cfl_retries,
        cell_steps_per_level: h.diagnostics.cell_steps.clone(),
        total_cell_steps: h.diagnostics.total_cell_steps(),
        uniform_cell_steps: h.uniform_finest_cells() * refinement * step,
        initial_mass,
        final_mass: h.composite_mass(),
        cumulative_mass_change: h.diagnostics.cumulative_mass_change(),
    };
    write_file(&out.join("stats.json"), serde_json::to_string_pretty(&summary).expect("json").as_bytes())?;
    Ok(summary)
}
