//! Command-line front end: run, plot, gauges, check.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use surge_core::config::RunConfig;
use surge_core::io::{frame_count, read_frame, read_gauge_csv, render_frame, run, GAUGE_HEADER, PlotVariable};
use surge_core::SurgeError;

#[derive(Parser)]
#[command(name = "surge", version, about = "Adaptive storm surge simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a configuration and write frames, gauges and statistics.
    Run { config: PathBuf },
    /// Render one frame of an output directory as a PPM image.
    Plot {
        outdir: PathBuf,
        #[arg(long)]
        frame: usize,
        /// eta, speed or level.
        #[arg(long, default_value = "eta")]
        var: String,
        /// Lower colour bound (default depends on the variable).
        #[arg(long, allow_hyphen_values = true)]
        min: Option<f64>,
        #[arg(long, allow_hyphen_values = true)]
        max: Option<f64>,
        /// Image path; defaults to `<outdir>/plots/<var>_<frame>.ppm`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Export gauge series.
    Gauges {
        outdir: PathBuf,
        #[arg(long)]
        id: Option<usize>,
        /// Print CSV (`gauge,t,level,h,hu,hv,eta` for several gauges).
        #[arg(long)]
        csv: bool,
    },
    /// Validate a configuration and its inputs without running.
    Check { config: PathBuf },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.to_string().replace('\n', " "));
            ExitCode::FAILURE
        }
    }
}

fn dispatch(cmd: Command) -> surge_core::Result<()> {
    match cmd {
        Command::Run { config } => {
            let cfg = RunConfig::load(&config)?;
            let summary = run(&cfg)?;
            println!("{}", serde_json::to_string(&summary).expect("json"));
            Ok(())
        }
        Command::Plot { outdir, frame, var, min, max, out } => {
            let var: PlotVariable = var.parse()?;
            let n = frame_count(&outdir);
            if frame >= n {
                return Err(SurgeError::FrameIndex { index: frame, max: n.saturating_sub(1) });
            }
            let bounds = match (min, max) {
                (None, None) => None,
                (lo, hi) => {
                    let (dlo, dhi) = var.default_bounds();
                    Some((lo.unwrap_or(dlo), hi.unwrap_or(dhi)))
                }
            };
            let f = read_frame(&outdir, frame)?;
            let raster = render_frame(&f, var, bounds);
            let path = out.unwrap_or_else(|| outdir.join("plots").join(format!("{}_{frame:04}.ppm", var.name())));
            raster.write(&path)?;
            println!("{}", path.display());
            Ok(())
        }
        Command::Gauges { outdir, id, csv } => gauges(&outdir, id, csv),
        Command::Check { config } => {
            let cfg = RunConfig::load(&config)?;
            cfg.check_inputs()?;
            println!("{}", cfg.to_json());
            Ok(())
        }
    }
}

fn gauge_ids(dir: &Path) -> surge_core::Result<Vec<usize>> {
    let entries = std::fs::read_dir(dir).map_err(|e| SurgeError::io(dir, e))?;
    let mut ids: Vec<usize> = entries
        .filter_map(|e| e.ok())
        .filter_map(|e| {
            let name = e.file_name().to_string_lossy().into_owned();
            name.strip_prefix("gauge_")?.strip_suffix(".csv")?.parse().ok()
        })
        .collect();
    ids.sort_unstable();
    Ok(ids)
}

fn gauges(outdir: &Path, id: Option<usize>, csv: bool) -> surge_core::Result<()> {
    let dir = outdir.join("gauges");
    let ids = gauge_ids(&dir)?;
    let selected: Vec<usize> = match id {
        Some(k) if ids.contains(&k) => vec![k],
        Some(k) => {
            return Err(SurgeError::config("--id", format!("no gauge {k} in {} (available: {ids:?})", dir.display())));
        }
        None => ids,
    };
    for &k in &selected {
        let records = read_gauge_csv(&dir.join(format!("gauge_{k}.csv")))?;
        if csv {
            if selected.len() == 1 {
                println!("{GAUGE_HEADER}");
                for r in &records {
                    println!("{},{},{},{},{},{}", r.t, r.level, r.h, r.hu, r.hv, r.eta);
                }
            } else {
                if k == selected[0] {
                    println!("gauge,{GAUGE_HEADER}");
                }
                for r in &records {
                    println!("{k},{},{},{},{},{},{}", r.t, r.level, r.h, r.hu, r.hv, r.eta);
                }
            }
        } else {
            let max_eta = records.iter().map(|r| r.eta).fold(f64::NEG_INFINITY, f64::max);
            let finest = records.iter().map(|r| r.level).max().unwrap_or(0);
            println!("gauge {k}: {} records, max eta {max_eta} m, finest level {finest}", records.len());
        }
    }
    Ok(())
}
