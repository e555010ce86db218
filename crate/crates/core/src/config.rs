//! Run configuration: strict JSON with `#` comments, defaults for every
//! optional field, and file references resolved against the config file.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::amr::{AmrSettings, Gauge, Hierarchy, HierarchySpec, RefinementCriteria};
use crate::error::{Result, SurgeError};
use crate::grid::{AnalyticBathymetry, BathymetrySource, BoundaryConditions, EsriGrid, GeoDomain, PhysConfig, RasterSource};
use crate::sources::FrictionConfig;
use crate::storm::{StormParams, StormTrack};

/// Environment variable that overrides `output_dir`.
pub const OUTPUT_DIR_ENV: &str = "SURGE_OUTPUT_DIR";

/// One bathymetry input; exactly one of `esri` and `analytic` is set. Where
/// sources overlap the highest priority wins, then the earliest listed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BathymetryEntry {
    #[serde(default)]
    pub priority: i32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub esri: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub analytic: Option<AnalyticBathymetry>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StormConfig {
    /// Track CSV.
    pub track: PathBuf,
    #[serde(default = "default_background")]
    pub background_pressure: f64,
    #[serde(default = "default_ramp")]
    pub ramp_width: f64,
}

fn default_background() -> f64 {
    StormParams::default().background_pressure
}

fn default_ramp() -> f64 {
    StormParams::default().ramp_width
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeConfig {
    pub start: f64,
    pub end: f64,
    /// Frame cadence (s).
    pub output_interval: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub domain: GeoDomain,
    #[serde(default)]
    pub physics: PhysConfig,
    #[serde(default)]
    pub friction: FrictionConfig,
    #[serde(default)]
    pub refinement: RefinementCriteria,
    #[serde(default)]
    pub amr: AmrSettings,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub storm: Option<StormConfig>,
    pub bathymetry: Vec<BathymetryEntry>,
    pub time: TimeConfig,
    #[serde(default)]
    pub gauges: Vec<Gauge>,
    #[serde(default)]
    pub boundary: BoundaryConditions,
    #[serde(default = "default_output")]
    pub output_dir: PathBuf,
}

fn default_output() -> PathBuf {
    PathBuf::from("output")
}

/// Remove `#` comments outside strings.
pub fn strip_comments(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    let (mut in_string, mut escaped, mut in_comment) = (false, false, false);
    for c in text.chars() {
        if in_comment {
            if c == '\n' {
                in_comment = false;
                out.push(c);
            }
            continue;
        }
        if in_string {
            if escaped {
                escaped = false;
            } else if c == '\\' {
                escaped = true;
            } else if c == '"' {
                in_string = false;
            }
        } else if c == '"' {
            in_string = true;
        } else if c == '#' {
            in_comment = true;
            continue;
        }
        out.push(c);
    }
    out
}

/// Turn serde's unknown-field message into one naming the closest key.
fn describe(msg: &str) -> String {
    let Some(rest) = msg.strip_prefix("unknown field `") else {
        return msg.to_string();
    };
    let Some((field, expected)) = rest.split_once('`') else {
        return msg.to_string();
    };
    let candidates: Vec<&str> = expected.split('`').skip(1).step_by(2).collect();
    let norm = |s: &str| s.to_lowercase().replace('_', "");
    let best = candidates
        .iter()
        .map(|c| (strsim::normalized_damerau_levenshtein(&norm(field), &norm(c)), *c))
        .max_by(|a, b| a.0.total_cmp(&b.0));
    match best {
        Some((score, name)) if score >= 0.5 => format!("unknown key `{field}`; did you mean `{name}`?"),
        _ => format!("unknown key `{field}`; valid keys: {}", candidates.join(", ")),
    }
}

impl RunConfig {
    /// Parse a config document; relative paths stay relative.
    pub fn parse(text: &str) -> Result<Self> {
        let stripped = strip_comments(text);
        let de = &mut serde_json::Deserializer::from_str(&stripped);
        serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            SurgeError::config(path, describe(&e.inner().to_string()))
        })
    }

    /// Load, resolve paths against the file's directory, apply the output
    /// override and validate.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| SurgeError::io(path, e))?;
        let mut cfg = Self::parse(&text)?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        cfg.resolve_paths(&base);
        if let Ok(dir) = std::env::var(OUTPUT_DIR_ENV) {
            if !dir.is_empty() {
                cfg.output_dir = absolute(Path::new(&dir), &std::env::current_dir().unwrap_or_default());
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        for b in &mut self.bathymetry {
            if let Some(p) = &b.esri {
                b.esri = Some(absolute(p, base));
            }
        }
        if let Some(s) = &mut self.storm {
            s.track = absolute(&s.track, base);
        }
        self.output_dir = absolute(&self.output_dir, base);
    }

    pub fn validate(&self) -> Result<()> {
        self.domain.validate()?;
        self.physics.validate()?;
        self.friction.validate()?;
        self.refinement.validate()?;
        self.amr.validate()?;
        let t = &self.time;
        if !(t.end > t.start) {
            return Err(SurgeError::config("time.end", "end must be after start"));
        }
        if !(t.output_interval > 0.0) {
            return Err(SurgeError::config("time.output_interval", "must be positive"));
        }
        if self.bathymetry.is_empty() {
            return Err(SurgeError::config("bathymetry", "at least one source is required"));
        }
        for (n, b) in self.bathymetry.iter().enumerate() {
            match (&b.esri, &b.analytic) {
                (Some(p), None) => {
                    if !p.is_file() {
                        return Err(SurgeError::config(format!("bathymetry[{n}].esri"), format!("file {} not found", p.display())));
                    }
                }
                (None, Some(_)) => {}
                _ => {
                    return Err(SurgeError::config(format!("bathymetry[{n}]"), "set exactly one of `esri` or `analytic`"));
                }
            }
        }
        if let Some(s) = &self.storm {
            if !s.track.is_file() {
                return Err(SurgeError::config("storm.track", format!("file {} not found", s.track.display())));
            }
        }
        for (n, g) in self.gauges.iter().enumerate() {
            if !self.domain.contains(g.lon, g.lat) {
                return Err(SurgeError::config(format!("gauges[{n}]"), "gauge lies outside the domain"));
            }
            if self.gauges[..n].iter().any(|o| o.id == g.id) {
                return Err(SurgeError::config(format!("gauges[{n}].id"), format!("duplicate gauge id {}", g.id)));
            }
        }
        Ok(())
    }

    /// Resolved configuration as pretty JSON; loading it back reproduces
    /// this configuration.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn storm_track(&self) -> Result<Option<StormTrack>> {
        self.storm
            .as_ref()
            .map(|s| {
                let params = StormParams { background_pressure: s.background_pressure, ramp_width: s.ramp_width };
                StormTrack::read(&s.track, params)
            })
            .transpose()
    }

    /// Bathymetry sources ordered by priority.
    pub fn bathymetry_sources(&self) -> Result<Vec<Arc<dyn BathymetrySource>>> {
        let mut order: Vec<usize> = (0..self.bathymetry.len()).collect();
        order.sort_by_key(|&n| std::cmp::Reverse(self.bathymetry[n].priority));
        order
            .into_iter()
            .map(|n| {
                let b = &self.bathymetry[n];
                Ok(match (&b.esri, &b.analytic) {
                    (Some(p), _) => Arc::new(RasterSource { grid: EsriGrid::read(p)? }) as Arc<dyn BathymetrySource>,
                    (None, Some(a)) => Arc::new(a.clone()) as Arc<dyn BathymetrySource>,
                    (None, None) => unreachable!("validated"),
                })
            })
            .collect()
    }

    /// Read every input and confirm the bathymetry covers each coarse cell
    /// centre, without building the hierarchy.
    pub fn check_inputs(&self) -> Result<()> {
        let sources = self.bathymetry_sources()?;
        let sampler = crate::grid::BathymetrySampler::single_level(sources, &self.domain, self.physics.earth_radius);
        let (dlon, dlat) = (self.domain.dlon(), self.domain.dlat());
        for j in 0..self.domain.n_cells_y {
            for i in 0..self.domain.n_cells_x {
                let lon = self.domain.lon_min + (i as f64 + 0.5) * dlon;
                let lat = self.domain.lat_min + (j as f64 + 0.5) * dlat;
                sampler.point(lon, lat)?;
            }
        }
        self.storm_track()?;
        Ok(())
    }

    /// Hierarchy at the start time with the sea at rest.
    pub fn build_hierarchy(&self) -> Result<Hierarchy> {
        let sources = self.bathymetry_sources()?;
        let sampler = Hierarchy::sampler_for(sources, &self.domain, &self.amr, self.physics.earth_radius);
        let spec = HierarchySpec {
            domain: self.domain.clone(),
            phys: self.physics.clone(),
            settings: self.amr.clone(),
            criteria: self.refinement.clone(),
            friction: self.friction.clone(),
            bcs: self.boundary,
            storm: self.storm_track()?,
            gauges: self.gauges.clone(),
            t0: self.time.start,
        };
        let mut h = Hierarchy::new(spec, sampler)?;
        let sl = self.physics.sea_level;
        h.initialize_with(|_, _, b| ((sl - b).max(0.0), 0.0, 0.0))?;
        Ok(h)
    }
}

fn absolute(p: &Path, base: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}
