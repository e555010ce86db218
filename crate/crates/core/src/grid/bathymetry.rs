use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Result, SurgeError};

/// Anything that can report bed elevation (m, positive up) at a point.
pub trait BathymetrySource: Send + Sync + std::fmt::Debug {
    fn covers(&self, lon: f64, lat: f64) -> bool;
    fn sample(&self, lon: f64, lat: f64) -> f64;
}

/// ESRI ASCII grid. Values are nodes: value `(row, col)` sits at
/// `(xllcorner + col * cellsize, yllcorner + (nrows - 1 - row) * cellsize)`.
#[derive(Clone, Debug, PartialEq)]
pub struct EsriGrid {
    pub ncols: usize,
    pub nrows: usize,
    pub xll: f64,
    pub yll: f64,
    pub cellsize: f64,
    pub nodata: f64,
    /// Row-major, north row first (file order).
    pub values: Vec<f64>,
}

impl EsriGrid {
    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| SurgeError::io(path, e))?;
        Self::parse(&text).map_err(|msg| SurgeError::Raster { path: path.display().to_string(), msg })
    }

    pub fn parse(text: &str) -> std::result::Result<Self, String> {
        let mut tokens = text.split_whitespace().peekable();
        let mut header = std::collections::HashMap::new();
        while let Some(tok) = tokens.peek() {
            if tok.parse::<f64>().is_ok() {
                break;
            }
            let key = tokens.next().unwrap().to_ascii_lowercase();
            let val = tokens.next().ok_or_else(|| format!("header `{key}` has no value"))?;
            let val: f64 = val.parse().map_err(|_| format!("header `{key}` value `{val}` is not a number"))?;
            header.insert(key, val);
        }
        let get = |k: &str| header.get(k).copied().ok_or_else(|| format!("missing header `{k}`"));
        let ncols = get("ncols")? as usize;
        let nrows = get("nrows")? as usize;
        let xll = header.get("xllcorner").or_else(|| header.get("xllcenter")).copied().ok_or("missing header `xllcorner`")?;
        let yll = header.get("yllcorner").or_else(|| header.get("yllcenter")).copied().ok_or("missing header `yllcorner`")?;
        let cellsize = get("cellsize")?;
        let nodata = header.get("nodata_value").copied().unwrap_or(-9999.0);
        if ncols < 2 || nrows < 2 {
            return Err("raster needs at least 2x2 nodes".into());
        }
        if !(cellsize > 0.0) {
            return Err("cellsize must be positive".into());
        }
        let values: Vec<f64> = tokens
            .map(|t| t.parse::<f64>().map_err(|_| format!("bad value `{t}`")))
            .collect::<std::result::Result<_, _>>()?;
        if values.len() != ncols * nrows {
            return Err(format!("expected {} values, found {}", ncols * nrows, values.len()));
        }
        Ok(Self { ncols, nrows, xll, yll, cellsize, nodata, values })
    }

    pub fn to_ascii(&self) -> String {
        let mut s = format!(
            "ncols {}\nnrows {}\nxllcorner {}\nyllcorner {}\ncellsize {}\nnodata_value {}\n",
            self.ncols, self.nrows, self.xll, self.yll, self.cellsize, self.nodata
        );
        for row in self.values.chunks(self.ncols) {
            let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            s.push_str(&line.join(" "));
            s.push('\n');
        }
        s
    }

    fn node(&self, col: usize, row_from_south: usize) -> f64 {
        self.values[(self.nrows - 1 - row_from_south) * self.ncols + col]
    }

    pub fn x_max(&self) -> f64 {
        self.xll + (self.ncols - 1) as f64 * self.cellsize
    }

    pub fn y_max(&self) -> f64 {
        self.yll + (self.nrows - 1) as f64 * self.cellsize
    }

    /// Bilinear interpolation of node values; `None` outside the grid or
    /// when a contributing node is nodata.
    pub fn bilinear(&self, lon: f64, lat: f64) -> Option<f64> {
        let fx = (lon - self.xll) / self.cellsize;
        let fy = (lat - self.yll) / self.cellsize;
        let eps = 1e-9;
        if fx < -eps || fy < -eps || fx > (self.ncols - 1) as f64 + eps || fy > (self.nrows - 1) as f64 + eps {
            return None;
        }
        let i0 = (fx.floor().max(0.0) as usize).min(self.ncols - 2);
        let j0 = (fy.floor().max(0.0) as usize).min(self.nrows - 2);
        let tx = (fx - i0 as f64).clamp(0.0, 1.0);
        let ty = (fy - j0 as f64).clamp(0.0, 1.0);
        let v00 = self.node(i0, j0);
        let v10 = self.node(i0 + 1, j0);
        let v01 = self.node(i0, j0 + 1);
        let v11 = self.node(i0 + 1, j0 + 1);
        if [v00, v10, v01, v11].iter().any(|&v| v == self.nodata) {
            return None;
        }
        Some((1.0 - ty) * ((1.0 - tx) * v00 + tx * v10) + ty * ((1.0 - tx) * v01 + tx * v11))
    }
}

#[derive(Debug)]
pub struct RasterSource {
    pub grid: EsriGrid,
}

impl BathymetrySource for RasterSource {
    fn covers(&self, lon: f64, lat: f64) -> bool {
        self.grid.bilinear(lon, lat).is_some()
    }

    fn sample(&self, lon: f64, lat: f64) -> f64 {
        self.grid.bilinear(lon, lat).unwrap_or(f64::NAN)
    }
}

/// Gaussian bump added to a base elevation; distances in degrees.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Bump {
    pub lon: f64,
    pub lat: f64,
    pub height: f64,
    pub radius: f64,
}

/// Closed-form bathymetries used by synthetic scenarios.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum AnalyticBathymetry {
    Constant { value: f64 },
    Plane { b0: f64, lon0: f64, lat0: f64, dbdlon: f64, dbdlat: f64 },
    /// Piecewise linear in latitude; `points` are `(lat, b)` sorted by lat,
    /// held constant beyond the ends.
    LatProfile { points: Vec<(f64, f64)> },
    /// Piecewise linear in longitude.
    LonProfile { points: Vec<(f64, f64)> },
    Bumps { base: f64, bumps: Vec<Bump> },
}

fn piecewise(points: &[(f64, f64)], x: f64) -> f64 {
    match points {
        [] => 0.0,
        [(_, v)] => *v,
        _ => {
            if x <= points[0].0 {
                return points[0].1;
            }
            for w in points.windows(2) {
                let ((x0, y0), (x1, y1)) = (w[0], w[1]);
                if x <= x1 {
                    let t = if x1 > x0 { (x - x0) / (x1 - x0) } else { 1.0 };
                    return y0 + t * (y1 - y0);
                }
            }
            points[points.len() - 1].1
        }
    }
}

impl BathymetrySource for AnalyticBathymetry {
    fn covers(&self, _lon: f64, _lat: f64) -> bool {
        true
    }

    fn sample(&self, lon: f64, lat: f64) -> f64 {
        match self {
            AnalyticBathymetry::Constant { value } => *value,
            AnalyticBathymetry::Plane { b0, lon0, lat0, dbdlon, dbdlat } => {
                b0 + dbdlon * (lon - lon0) + dbdlat * (lat - lat0)
            }
            AnalyticBathymetry::LatProfile { points } => piecewise(points, lat),
            AnalyticBathymetry::LonProfile { points } => piecewise(points, lon),
            AnalyticBathymetry::Bumps { base, bumps } => {
                let mut b = *base;
                for bump in bumps {
                    let d2 = (lon - bump.lon).powi(2) + (lat - bump.lat).powi(2);
                    b += bump.height * (-d2 / (bump.radius * bump.radius)).exp();
                }
                b
            }
        }
    }
}

/// Evaluates cell-centred bathymetry on any level of a hierarchy.
///
/// A cell value is the area-weighted mean of point samples taken at the
/// cell centres of a deeper level (the finest level, when the sub-sample
/// count stays within `max_subsamples` per axis). Coarse values are then
/// averages of fine values, so a lake at rest coarsens to a lake at rest.
#[derive(Clone, Debug)]
pub struct BathymetrySampler {
    sources: Vec<Arc<dyn BathymetrySource>>,
    origin_lon: f64,
    origin_lat: f64,
    earth_radius: f64,
    /// `(dlon, dlat)` per level, index 0 is level 1.
    resolutions: Vec<(f64, f64)>,
    /// Spatial ratios between successive levels.
    ratios: Vec<(usize, usize)>,
    pub max_subsamples: usize,
}

impl BathymetrySampler {
    pub fn new(
        sources: Vec<Arc<dyn BathymetrySource>>,
        origin_lon: f64,
        origin_lat: f64,
        earth_radius: f64,
        resolutions: Vec<(f64, f64)>,
        ratios: Vec<(usize, usize)>,
    ) -> Self {
        Self { sources, origin_lon, origin_lat, earth_radius, resolutions, ratios, max_subsamples: 64 }
    }

    /// Sampler without refinement: single-level patches sample at centres.
    pub fn single_level(sources: Vec<Arc<dyn BathymetrySource>>, domain: &super::GeoDomain, earth_radius: f64) -> Self {
        Self::new(sources, domain.lon_min, domain.lat_min, earth_radius, vec![(domain.dlon(), domain.dlat())], vec![])
    }

    /// Point value from the highest-priority covering source.
    pub fn point(&self, lon: f64, lat: f64) -> Result<f64> {
        self.sources
            .iter()
            .find(|s| s.covers(lon, lat))
            .map(|s| s.sample(lon, lat))
            .ok_or(SurgeError::UncoveredCell { lon, lat })
    }

    /// Sub-sampling factors from `level` (1-based) downwards.
    fn subsampling(&self, level: usize) -> (usize, usize) {
        let (mut fx, mut fy) = (1usize, 1usize);
        for &(rx, ry) in self.ratios.iter().skip(level - 1) {
            if fx * rx > self.max_subsamples || fy * ry > self.max_subsamples {
                break;
            }
            fx *= rx;
            fy *= ry;
        }
        (fx, fy)
    }

    pub fn cell_value(&self, level: usize, gi: i64, gj: i64) -> Result<f64> {
        let (dlon, dlat) = self.resolutions[level - 1];
        let (fx, fy) = self.subsampling(level);
        let sdlon = dlon / fx as f64;
        let sdlat = dlat / fy as f64;
        let lon0 = self.origin_lon + gi as f64 * dlon;
        let lat0 = self.origin_lat + gj as f64 * dlat;
        if fx == 1 && fy == 1 {
            return self.point(lon0 + 0.5 * dlon, lat0 + 0.5 * dlat);
        }
        let mut num = 0.0;
        let mut den = 0.0;
        for sj in 0..fy {
            let lat_lo = lat0 + sj as f64 * sdlat;
            let w = super::cell_area(lat_lo, lat_lo + sdlat, sdlon, self.earth_radius);
            let mut row = 0.0;
            for si in 0..fx {
                row += self.point(lon0 + (si as f64 + 0.5) * sdlon, lat_lo + 0.5 * sdlat)?;
            }
            num += w * row;
            den += w * fx as f64;
        }
        Ok(num / den)
    }

    /// Fill `patch.b` over interior and ghost cells. Ghosts outside the
    /// domain mirror the adjacent interior cell.
    pub fn fill_patch(&self, patch: &mut super::Patch, level_extent: (i64, i64)) -> Result<()> {
        let g = super::NGHOST as isize;
        let (nx_level, ny_level) = level_extent;
        for j in -g..patch.ny() as isize + g {
            for i in -g..patch.nx() as isize + g {
                let gi = mirror(patch.rect.ilo + i as i64, nx_level);
                let gj = mirror(patch.rect.jlo + j as i64, ny_level);
                let k = patch.idx(i, j);
                patch.b[k] = self.cell_value(patch.level, gi, gj)?;
            }
        }
        Ok(())
    }
}

/// Reflect an index across the domain edges `[0, n)`.
pub(crate) fn mirror(i: i64, n: i64) -> i64 {
    if i < 0 {
        (-1 - i).min(n - 1)
    } else if i >= n {
        (2 * n - 1 - i).max(0)
    } else {
        i
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{GeoDomain, IndexBox, Patch};

    fn raster(xll: f64, yll: f64, cs: f64, n: usize, f: impl Fn(f64, f64) -> f64) -> EsriGrid {
        let mut values = Vec::new();
        for r in 0..n {
            for c in 0..n {
                let lon = xll + c as f64 * cs;
                let lat = yll + (n - 1 - r) as f64 * cs;
                values.push(f(lon, lat));
            }
        }
        EsriGrid { ncols: n, nrows: n, xll, yll, cellsize: cs, nodata: -9999.0, values }
    }

    #[test]
    fn parse_roundtrip() {
        let g = raster(-95.0, 28.0, 0.5, 5, |x, y| x + 2.0 * y);
        let back = EsriGrid::parse(&g.to_ascii()).unwrap();
        assert_eq!(g, back);
        assert!(EsriGrid::parse("ncols 2\nnrows 2\n1 2 3 4").is_err());
    }

    #[test]
    fn bilinear_exact_on_planes() {
        let g = raster(0.0, 0.0, 1.0, 6, |x, y| 3.0 * x - y + 1.0);
        for &(x, y) in &[(0.3, 0.7), (2.5, 4.1), (5.0, 5.0)] {
            assert!((g.bilinear(x, y).unwrap() - (3.0 * x - y + 1.0)).abs() < 1e-12);
        }
        assert!(g.bilinear(5.5, 1.0).is_none());
    }

    fn domain() -> GeoDomain {
        GeoDomain { lon_min: 0.0, lon_max: 4.0, lat_min: 0.0, lat_max: 4.0, n_cells_x: 4, n_cells_y: 4 }
    }

    #[test]
    fn constant_and_plane_sampling() {
        let d = domain();
        let s = BathymetrySampler::single_level(
            vec![Arc::new(RasterSource { grid: raster(-1.0, -1.0, 1.0, 7, |_, _| -100.0) })],
            &d,
            6.367e6,
        );
        assert_eq!(s.cell_value(1, 2, 3).unwrap(), -100.0);
        let s = BathymetrySampler::single_level(
            vec![Arc::new(RasterSource { grid: raster(-1.0, -1.0, 0.5, 13, |x, _| x) })],
            &d,
            6.367e6,
        );
        for i in 0..4 {
            assert!((s.cell_value(1, i, 1).unwrap() - (i as f64 + 0.5)).abs() < 1e-12);
        }
    }

    #[test]
    fn priority_order_wins_in_overlap() {
        let d = domain();
        let fine = raster(0.0, 0.0, 0.25, 9, |_, _| -5.0); // covers [0,2]^2
        let coarse = raster(-1.0, -1.0, 1.0, 7, |_, _| -50.0);
        let s = BathymetrySampler::single_level(
            vec![Arc::new(RasterSource { grid: fine }), Arc::new(RasterSource { grid: coarse })],
            &d,
            6.367e6,
        );
        // hand-selected: centres (0.5,0.5) and (1.5,1.5) lie in the fine raster
        assert_eq!(s.cell_value(1, 0, 0).unwrap(), -5.0);
        assert_eq!(s.cell_value(1, 1, 1).unwrap(), -5.0);
        assert_eq!(s.cell_value(1, 3, 0).unwrap(), -50.0);
        assert_eq!(s.cell_value(1, 2, 3).unwrap(), -50.0);
    }

    #[test]
    fn uncovered_cell_is_an_error() {
        let d = domain();
        let s = BathymetrySampler::single_level(
            vec![Arc::new(RasterSource { grid: raster(0.0, 0.0, 0.5, 5, |_, _| 0.0) })],
            &d,
            6.367e6,
        );
        match s.cell_value(1, 3, 3) {
            Err(SurgeError::UncoveredCell { lon, lat }) => {
                assert_eq!((lon, lat), (3.5, 3.5));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn coarse_values_average_fine_values() {
        let src: Arc<dyn BathymetrySource> = Arc::new(AnalyticBathymetry::Bumps {
            base: -50.0,
            bumps: vec![Bump { lon: 1.3, lat: 2.2, height: 30.0, radius: 0.7 }],
        });
        let s = BathymetrySampler::new(vec![src], 0.0, 0.0, 6.367e6, vec![(1.0, 1.0), (0.5, 0.5), (0.125, 0.125)], vec![(2, 2), (4, 4)]);
        let coarse = s.cell_value(1, 1, 2).unwrap();
        let mut num = 0.0;
        let mut den = 0.0;
        for cj in 0..2 {
            for ci in 0..2 {
                let lat_lo = 2.0 + 0.5 * cj as f64;
                let a = crate::grid::cell_area(lat_lo, lat_lo + 0.5, 0.5, 6.367e6);
                num += a * s.cell_value(2, 2 + ci, 4 + cj).unwrap();
                den += a;
            }
        }
        assert!((coarse - num / den).abs() < 1e-11);
    }

    #[test]
    fn ghost_bathymetry_mirrors_domain() {
        let d = domain();
        let s = BathymetrySampler::single_level(
            vec![Arc::new(AnalyticBathymetry::Plane { b0: 0.0, lon0: 0.0, lat0: 0.0, dbdlon: 1.0, dbdlat: 0.0 })],
            &d,
            6.367e6,
        );
        let mut p = Patch::new(1, IndexBox::new(0, 0, 4, 4), 1.0, 1.0, 0.0, 0.0, 6.367e6);
        s.fill_patch(&mut p, (4, 4)).unwrap();
        assert_eq!(p.b[p.idx(-1, 0)], p.b[p.idx(0, 0)]);
        assert_eq!(p.b[p.idx(-2, 0)], p.b[p.idx(1, 0)]);
        assert_eq!(p.b[p.idx(4, 2)], p.b[p.idx(3, 2)]);
    }
}
