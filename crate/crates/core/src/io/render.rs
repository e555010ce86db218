//! Raster plots of a frame: patches composited finest on top onto a uniform
//! pixel grid, written as binary PPM with a text colour-scale sidecar.

use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use super::frame::Frame;
use super::write_file;
use crate::error::{Result, SurgeError};

/// Colour of dry cells in `eta` and `speed` plots.
pub const LAND: [u8; 3] = [205, 170, 125];
/// Pixels not covered by any patch (never happens for complete frames).
const BLANK: [u8; 3] = [0, 0, 0];
/// Longest image side in pixels.
pub const MAX_PIXELS: usize = 2048;

/// Level colours, level 1 first.
const LEVEL_COLORS: [[u8; 3]; 8] = [
    [68, 1, 84],
    [59, 82, 139],
    [33, 145, 140],
    [94, 201, 98],
    [253, 231, 37],
    [241, 130, 36],
    [204, 52, 76],
    [120, 28, 109],
];

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PlotVariable {
    Eta,
    Speed,
    Level,
}

impl FromStr for PlotVariable {
    type Err = SurgeError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "eta" => Ok(Self::Eta),
            "speed" => Ok(Self::Speed),
            "level" => Ok(Self::Level),
            other => Err(SurgeError::UnknownVariable(other.to_string())),
        }
    }
}

impl PlotVariable {
    pub fn name(self) -> &'static str {
        match self {
            Self::Eta => "eta",
            Self::Speed => "speed",
            Self::Level => "level",
        }
    }

    /// Fixed value bounds: surface anomaly in metres, speed in m/s.
    pub fn default_bounds(self) -> (f64, f64) {
        match self {
            Self::Eta => (-1.0, 1.0),
            Self::Speed => (0.0, 2.0),
            Self::Level => (1.0, LEVEL_COLORS.len() as f64),
        }
    }
}

/// Piecewise linear colour ramp over `[0, 1]`.
#[derive(Clone, Debug)]
pub struct ColorTable {
    anchors: Vec<(f64, [u8; 3])>,
}

impl ColorTable {
    /// Blue, white, red.
    pub fn diverging() -> Self {
        Self { anchors: vec![(0.0, [33, 102, 172]), (0.5, [247, 247, 247]), (1.0, [178, 24, 43])] }
    }

    /// White to dark blue.
    pub fn sequential() -> Self {
        Self { anchors: vec![(0.0, [247, 251, 255]), (0.5, [107, 174, 214]), (1.0, [8, 48, 107])] }
    }

    pub fn color(&self, x: f64) -> [u8; 3] {
        let x = if x.is_nan() { 0.0 } else { x.clamp(0.0, 1.0) };
        let w = self.anchors.windows(2).find(|w| x <= w[1].0).unwrap_or(&self.anchors[self.anchors.len() - 2..]);
        let ((x0, c0), (x1, c1)) = (w[0], w[1]);
        let t = (x - x0) / (x1 - x0);
        let mut out = [0u8; 3];
        for c in 0..3 {
            out[c] = (c0[c] as f64 + t * (c1[c] as f64 - c0[c] as f64)).round() as u8;
        }
        out
    }
}

pub struct Raster {
    pub width: usize,
    pub height: usize,
    /// RGB, north row first.
    pub pixels: Vec<[u8; 3]>,
    /// Colour-scale description.
    pub scale: String,
}

impl Raster {
    pub fn to_ppm(&self) -> Vec<u8> {
        let mut out = format!("P6\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.extend(self.pixels.iter().flatten());
        out
    }

    pub fn distinct_colors(&self) -> usize {
        let mut c: Vec<[u8; 3]> = self.pixels.clone();
        c.sort_unstable();
        c.dedup();
        c.len()
    }

    /// Write `<path>` and the colour scale to `<path>.scale.txt`.
    pub fn write(&self, path: &Path) -> Result<()> {
        write_file(path, &self.to_ppm())?;
        let mut side = path.as_os_str().to_owned();
        side.push(".scale.txt");
        write_file(Path::new(&side), self.scale.as_bytes())
    }
}

/// Render `var` with value bounds `bounds` (defaults when `None`).
pub fn render_frame(frame: &Frame, var: PlotVariable, bounds: Option<(f64, f64)>) -> Raster {
    let m = &frame.manifest;
    let (lo, hi) = bounds.unwrap_or_else(|| var.default_bounds());
    let (wdeg, hdeg) = (m.lon_max - m.lon_min, m.lat_max - m.lat_min);
    let dlon = frame.patches.iter().map(|p| p.meta.dlon).fold(f64::INFINITY, f64::min);
    let dlat = frame.patches.iter().map(|p| p.meta.dlat).fold(f64::INFINITY, f64::min);
    let mut width = (wdeg / dlon).round().max(1.0) as usize;
    let mut height = (hdeg / dlat).round().max(1.0) as usize;
    let longest = width.max(height);
    if longest > MAX_PIXELS {
        let s = longest.div_ceil(MAX_PIXELS);
        width = width.div_ceil(s);
        height = height.div_ceil(s);
    }
    let table = match var {
        PlotVariable::Speed => ColorTable::sequential(),
        _ => ColorTable::diverging(),
    };
    let mut pixels = vec![BLANK; width * height];
    let mut order: Vec<usize> = (0..frame.patches.len()).collect();
    order.sort_by_key(|&n| frame.patches[n].meta.level);
    let (pw, ph) = (wdeg / width as f64, hdeg / height as f64);
    for n in order {
        let p = &frame.patches[n];
        let (plon, plat) = (p.meta.lon_min(m.lon_min), p.meta.lat_min(m.lat_min));
        let (plon1, plat1) = (plon + p.meta.nx as f64 * p.meta.dlon, plat + p.meta.ny as f64 * p.meta.dlat);
        let px0 = (((plon - m.lon_min) / pw) - 0.5).ceil().max(0.0) as usize;
        let py0 = (((plat - m.lat_min) / ph) - 0.5).ceil().max(0.0) as usize;
        for py in py0..height {
            let lat = m.lat_min + (py as f64 + 0.5) * ph;
            if lat >= plat1 {
                break;
            }
            if lat < plat {
                continue;
            }
            let cj = (((lat - plat) / p.meta.dlat) as i64).min(p.meta.ny - 1);
            for px in px0..width {
                let lon = m.lon_min + (px as f64 + 0.5) * pw;
                if lon >= plon1 {
                    break;
                }
                if lon < plon {
                    continue;
                }
                let ci = (((lon - plon) / p.meta.dlon) as i64).min(p.meta.nx - 1);
                let c = &p.cells[(cj * p.meta.nx + ci) as usize];
                let color = match var {
                    PlotVariable::Level => LEVEL_COLORS[(p.meta.level - 1).min(LEVEL_COLORS.len() - 1)],
                    _ if c.h < m.dry_tolerance => LAND,
                    PlotVariable::Eta => table.color((c.eta - m.sea_level - lo) / (hi - lo)),
                    PlotVariable::Speed => table.color((c.hu.hypot(c.hv) / c.h - lo) / (hi - lo)),
                };
                pixels[(height - 1 - py) * width + px] = color;
            }
        }
    }
    let mut scale = format!("# variable {}\n# t {}\n", var.name(), m.t);
    if var == PlotVariable::Level {
        scale.push_str("level,r,g,b\n");
        for (l, c) in LEVEL_COLORS.iter().enumerate() {
            let _ = writeln!(scale, "{},{},{},{}", l + 1, c[0], c[1], c[2]);
        }
    } else {
        let _ = writeln!(scale, "# bounds {lo} {hi}");
        if var == PlotVariable::Eta {
            let _ = writeln!(scale, "# values are eta - sea_level (sea_level {})", m.sea_level);
        }
        let _ = writeln!(scale, "# dry {},{},{}", LAND[0], LAND[1], LAND[2]);
        scale.push_str("value,r,g,b\n");
        for s in 0..=10 {
            let x = s as f64 / 10.0;
            let c = table.color(x);
            let _ = writeln!(scale, "{},{},{},{}", lo + x * (hi - lo), c[0], c[1], c[2]);
        }
    }
    Raster { width, height, pixels, scale }
}
