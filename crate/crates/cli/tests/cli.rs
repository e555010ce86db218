use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn surge(args: &[&str], env_out: Option<&Path>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_surge"));
    cmd.args(args).env_remove("SURGE_OUTPUT_DIR");
    if let Some(dir) = env_out {
        cmd.env("SURGE_OUTPUT_DIR", dir);
    }
    cmd.output().expect("spawn surge")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

const SMALL: &str = r#"# small basin with a hump of water
{
  "domain": { "lon_min": 0.0, "lon_max": 1.0, "lat_min": 10.0, "lat_max": 11.0, "n_cells_x": 12, "n_cells_y": 12 },
  "amr": { "max_levels": 2, "ratios_x": [2], "ratios_y": [2], "dt_max": 60.0 },
  "refinement": {
    "regions": [{ "lon_min": 0.3, "lon_max": 0.7, "lat_min": 10.3, "lat_max": 10.7, "min_level": 2 }]
  },
  "bathymetry": [{ "analytic": { "constant": { "value": -20.0 } } }],
  "time": { "start": 0.0, "end": 600.0, "output_interval": 200.0 },
  "gauges": [{ "id": 7, "lon": 0.5, "lat": 10.5 }, { "id": 9, "lon": 0.1, "lat": 10.1 }],
  "boundary": { "west": "wall", "east": "wall", "south": "wall", "north": "wall" },
  "output_dir": "out"
}
"#;

fn small_config(dir: &Path) -> PathBuf {
    let path = dir.join("small.json");
    std::fs::write(&path, SMALL).unwrap();
    path
}

#[test]
fn check_accepts_bundled_configs() {
    for name in ["ike/ike.json", "synthetic_storm/synthetic_storm.json"] {
        let o = surge(&["check", configs().join(name).to_str().unwrap()], None);
        assert!(o.status.success(), "{name}: {}", stderr(&o));
        // the echo is the resolved configuration as JSON
        let echoed: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
        assert!(echoed["bathymetry"].is_array());
    }
}

#[test]
fn unknown_key_is_reported_with_a_suggestion() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    std::fs::write(&path, SMALL.replace("\"output_interval\"", "\"output_intervall\"")).unwrap();
    let o = surge(&["check", path.to_str().unwrap()], None);
    assert!(!o.status.success());
    let err = stderr(&o);
    assert!(err.starts_with("error:"), "{err}");
    assert!(err.contains("output_intervall"), "{err}");
    assert!(err.contains("output_interval`?"), "{err}");
    assert_eq!(err.trim_end().lines().count(), 1, "{err}");
}

#[test]
fn run_plot_and_gauges() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let out = dir.path().join("redirected");
    let o = surge(&["run", cfg.to_str().unwrap()], Some(&out));
    assert!(o.status.success(), "{}", stderr(&o));
    let summary: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(summary["frames"], 4);
    assert!(out.join("frames/frame_0003/manifest.json").exists());
    assert!(out.join("stats.json").exists());
    assert!(!dir.path().join("out").exists(), "SURGE_OUTPUT_DIR overrides output_dir");

    let outs = out.to_str().unwrap();
    let o = surge(&["plot", outs, "--frame", "2", "--var", "level"], None);
    assert!(o.status.success(), "{}", stderr(&o));
    let image = std::fs::read(out.join("plots/level_0002.ppm")).unwrap();
    assert!(image.starts_with(b"P6"));
    assert!(out.join("plots/level_0002.ppm.scale.txt").exists());

    let o = surge(&["plot", outs, "--frame", "4"], None);
    assert!(!o.status.success());
    let err = stderr(&o);
    assert!(err.contains('4') && err.contains('3'), "names the valid range: {err}");

    let o = surge(&["plot", outs, "--frame", "0", "--var", "vorticity"], None);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("vorticity"));

    let o = surge(&["gauges", outs, "--id", "7", "--csv"], None);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("t,level,h,hu,hv,eta"));
    let rows: Vec<Vec<f64>> = lines.map(|l| l.split(',').map(|v| v.parse().unwrap()).collect()).collect();
    assert!(rows.len() > 4);
    // gauge 7 sits inside the forced region, so it reads level 2
    assert!(rows.iter().all(|r| r[1] == 2.0));
    assert!(rows.windows(2).all(|w| w[1][0] > w[0][0]));

    let o = surge(&["gauges", outs, "--csv"], None);
    assert!(stdout(&o).starts_with("gauge,t,level"));

    let o = surge(&["gauges", outs, "--id", "3"], None);
    assert!(!o.status.success());
}

#[test]
fn missing_config_fails_cleanly() {
    let o = surge(&["check", "/nonexistent/surge.json"], None);
    assert!(!o.status.success());
    assert!(stderr(&o).starts_with("error:"));
}
