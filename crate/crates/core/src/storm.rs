//! Holland parametric storm: track ingestion and interpolation, radial wind
//! and pressure profiles, cyclonic rotation and the far-field ramp.

use std::path::Path;
use std::sync::atomic::{AtomicBool, Ordering};

use serde::{Deserialize, Serialize};

use crate::error::{Result, SurgeError};
use crate::grid::{cell_size_meters, Patch, PhysConfig};
use crate::sources::{coriolis_parameter, ForcingField};

pub const TRACK_HEADER: [&str; 7] = [
    "t_seconds",
    "eye_lon",
    "eye_lat",
    "max_wind_mps",
    "rmw_m",
    "central_pressure_pa",
    "radius_outer_m",
];

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StormSample {
    pub t: f64,
    pub eye_lon: f64,
    pub eye_lat: f64,
    pub max_wind: f64,
    pub radius_max_wind: f64,
    pub central_pressure: f64,
    pub radius_outer: f64,
}

impl StormSample {
    fn check(&self, background_pressure: f64) -> Result<()> {
        let bad = |what: &str| Err(SurgeError::Track(format!("sample at t={}: {what}", self.t)));
        if !(self.radius_max_wind > 0.0) {
            return bad("radius of maximum wind must be positive");
        }
        if !(self.max_wind > 0.0) {
            return bad("maximum wind must be positive");
        }
        if !(self.radius_outer > self.radius_max_wind) {
            return bad("outer radius must exceed the radius of maximum wind");
        }
        if !(self.central_pressure > 0.0 && self.central_pressure <= background_pressure) {
            return Err(SurgeError::PressureDeficit { central: self.central_pressure, background: background_pressure });
        }
        Ok(())
    }
}

/// Parameters of the storm model that are not part of the track.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StormParams {
    pub background_pressure: f64,
    pub ramp_width: f64,
}

impl Default for StormParams {
    fn default() -> Self {
        Self { background_pressure: 101300.0, ramp_width: 100e3 }
    }
}

/// Instantaneous storm.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StormState {
    pub sample: StormSample,
    /// Eye translation velocity (m/s, east and north).
    pub translation: (f64, f64),
    pub holland_b: f64,
    pub background_pressure: f64,
    pub ramp_width: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StormTrack {
    pub samples: Vec<StormSample>,
    pub params: StormParams,
}

impl StormTrack {
    pub fn new(samples: Vec<StormSample>, params: StormParams) -> Result<Self> {
        if samples.len() < 2 {
            return Err(SurgeError::Track("track needs at least two samples".into()));
        }
        for w in samples.windows(2) {
            if !(w[1].t > w[0].t) {
                return Err(SurgeError::Track(format!("track times must strictly increase ({} then {})", w[0].t, w[1].t)));
            }
        }
        for s in &samples {
            s.check(params.background_pressure)?;
        }
        if !(params.ramp_width > 0.0) {
            return Err(SurgeError::Track("ramp width must be positive".into()));
        }
        Ok(Self { samples, params })
    }

    pub fn parse(text: &str, params: StormParams) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        let headers = reader.headers().map_err(|e| SurgeError::Track(e.to_string()))?.clone();
        let names: Vec<&str> = headers.iter().collect();
        if names != TRACK_HEADER {
            return Err(SurgeError::Track(format!("expected header {}, found {}", TRACK_HEADER.join(","), names.join(","))));
        }
        let mut samples = Vec::new();
        for (line, record) in reader.records().enumerate() {
            let record = record.map_err(|e| SurgeError::Track(e.to_string()))?;
            let mut v = [0.0; 7];
            for (k, slot) in v.iter_mut().enumerate() {
                let field = record.get(k).ok_or_else(|| SurgeError::Track(format!("row {}: missing column {}", line + 1, TRACK_HEADER[k])))?;
                *slot = field
                    .parse()
                    .map_err(|_| SurgeError::Track(format!("row {}: bad number {field:?} in {}", line + 1, TRACK_HEADER[k])))?;
            }
            samples.push(StormSample {
                t: v[0],
                eye_lon: v[1],
                eye_lat: v[2],
                max_wind: v[3],
                radius_max_wind: v[4],
                central_pressure: v[5],
                radius_outer: v[6],
            });
        }
        Self::new(samples, params)
    }

    pub fn read(path: &Path, params: StormParams) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| SurgeError::io(path, e))?;
        Self::parse(&text, params)
    }

    pub fn to_csv(&self) -> String {
        let mut out = TRACK_HEADER.join(",");
        out.push('\n');
        for s in &self.samples {
            out.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                s.t, s.eye_lon, s.eye_lat, s.max_wind, s.radius_max_wind, s.central_pressure, s.radius_outer
            ));
        }
        out
    }

    pub fn state_at(&self, t: f64, phys: &PhysConfig) -> Result<StormState> {
        interpolate_track(&self.samples, t, &self.params, phys)
    }
}

fn lerp(a: f64, b: f64, w: f64) -> f64 {
    a + (b - a) * w
}

pub fn interpolate_track(samples: &[StormSample], t: f64, params: &StormParams, phys: &PhysConfig) -> Result<StormState> {
    if samples.len() < 2 {
        return Err(SurgeError::Track("track needs at least two samples".into()));
    }
    let first = samples[0].t;
    if t < first {
        return Err(SurgeError::BeforeTrack { t, first });
    }
    let k = match samples.iter().position(|s| s.t > t) {
        Some(k) => k,
        None => samples.len() - 1,
    };
    let (a, b) = (&samples[k - 1], &samples[k]);
    let span = b.t - a.t;
    let rate_lon = (b.eye_lon - a.eye_lon) / span;
    let rate_lat = (b.eye_lat - a.eye_lat) / span;
    let sample = if t <= b.t {
        let w = (t - a.t) / span;
        if w == 0.0 {
            *a
        } else if t == b.t {
            *b
        } else {
            StormSample {
                t,
                eye_lon: lerp(a.eye_lon, b.eye_lon, w),
                eye_lat: lerp(a.eye_lat, b.eye_lat, w),
                max_wind: lerp(a.max_wind, b.max_wind, w),
                radius_max_wind: lerp(a.radius_max_wind, b.radius_max_wind, w),
                central_pressure: lerp(a.central_pressure, b.central_pressure, w),
                radius_outer: lerp(a.radius_outer, b.radius_outer, w),
            }
        }
    } else {
        let dt = t - b.t;
        StormSample { t, eye_lon: b.eye_lon + rate_lon * dt, eye_lat: b.eye_lat + rate_lat * dt, ..*b }
    };
    let (mx, my) = cell_size_meters(sample.eye_lat, rate_lon, rate_lat, phys.earth_radius);
    let translation = (mx, my);
    let mut state = StormState {
        sample,
        translation,
        holland_b: 0.0,
        background_pressure: params.background_pressure,
        ramp_width: params.ramp_width,
    };
    state.holland_b = holland_b(&state, phys.rho_air)?;
    Ok(state)
}

static B_WARNED: AtomicBool = AtomicBool::new(false);

pub fn holland_b(state: &StormState, rho_air: f64) -> Result<f64> {
    let s = &state.sample;
    let deficit = state.background_pressure - s.central_pressure;
    if !(deficit > 0.0) {
        return Err(SurgeError::PressureDeficit { central: s.central_pressure, background: state.background_pressure });
    }
    let speed = state.translation.0.hypot(state.translation.1);
    let w = (s.max_wind - speed).max(0.1 * s.max_wind);
    let b = rho_air * w * w * std::f64::consts::E / deficit;
    if !(1.0..=2.5).contains(&b) && !B_WARNED.swap(true, Ordering::Relaxed) {
        log::warn!("Holland B = {b:.3} outside the usual range [1, 2.5] at t = {}", s.t);
    }
    Ok(b)
}

/// Radial wind speed; `f` is the Coriolis parameter at the eye.
pub fn wind_profile(r: f64, state: &StormState, f: f64) -> f64 {
    if r <= 0.0 {
        return 0.0;
    }
    let s = &state.sample;
    let a = (s.radius_max_wind / r).powf(state.holland_b);
    let rf = r * f.abs();
    (a * s.max_wind * s.max_wind * (1.0 - a).exp() + rf * rf / 4.0).sqrt() - rf / 2.0
}

pub fn pressure_profile(r: f64, state: &StormState) -> f64 {
    let s = &state.sample;
    if r <= 0.0 {
        return s.central_pressure;
    }
    let a = (s.radius_max_wind / r).powf(state.holland_b);
    s.central_pressure + (state.background_pressure - s.central_pressure) * (-a).exp()
}

pub fn ramp(r: f64, radius_outer: f64, ramp_width: f64) -> f64 {
    0.5 * (1.0 - ((r - radius_outer) / ramp_width).tanh())
}

/// Metric offset (m east, m north) of a point from the eye.
pub fn eye_offset(lon: f64, lat: f64, state: &StormState, earth_radius: f64) -> (f64, f64) {
    let s = &state.sample;
    let mean_lat = 0.5 * (lat + s.eye_lat);
    cell_size_meters(mean_lat, lon - s.eye_lon, lat - s.eye_lat, earth_radius)
}

/// Ramped wind vector and pressure at a point.
pub fn evaluate_point(lon: f64, lat: f64, state: &StormState, phys: &PhysConfig) -> ((f64, f64), f64) {
    let (x, y) = eye_offset(lon, lat, state, phys.earth_radius);
    let r = x.hypot(y);
    let f = coriolis_parameter(state.sample.eye_lat, phys.omega);
    let w = wind_profile(r, state, f);
    let (sin, cos) = if r > 0.0 { (y / r, x / r) } else { (0.0, 1.0) };
    let sign = if state.sample.eye_lat < 0.0 { -1.0 } else { 1.0 };
    let wx = sign * -w * sin + state.translation.0;
    let wy = sign * w * cos + state.translation.1;
    let rr = ramp(r, state.sample.radius_outer, state.ramp_width);
    let p = pressure_profile(r, state);
    ((wx * rr, wy * rr), state.background_pressure + (p - state.background_pressure) * rr)
}

/// Wind and pressure at every cell of the patch frame (ghosts included).
pub fn evaluate_fields(patch: &Patch, state: &StormState, phys: &PhysConfig) -> ForcingField {
    let mut field = ForcingField::calm(patch, state.background_pressure);
    let g = crate::grid::NGHOST as isize;
    for j in -g..patch.ny() as isize + g {
        let lat = patch.lat_center(j);
        for i in -g..patch.nx() as isize + g {
            let k = patch.idx(i, j);
            let ((wx, wy), p) = evaluate_point(patch.lon_center(i), lat, state, phys);
            field.wind_x[k] = wx;
            field.wind_y[k] = wy;
            field.pressure[k] = p;
        }
    }
    field
}
