//! Geographic domain, patch geometry and bathymetry sampling.

mod bathymetry;
mod boundary;
mod patch;

pub use bathymetry::{
    AnalyticBathymetry, BathymetrySampler, BathymetrySource, Bump, EsriGrid, RasterSource,
};
pub use boundary::{fill_physical_ghosts, BoundaryConditions, BoundaryKind};
pub use patch::{initialize_lake_at_rest, surface_elevation, BoundaryRegister, FaceFluxes, Patch, NGHOST};

use serde::{Deserialize, Serialize};

use crate::error::{Result, SurgeError};

/// Sidereal day used for Earth's angular frequency.
pub const SIDEREAL_DAY: f64 = 8.61642e4;

/// Coarse-level domain in longitude/latitude degrees.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeoDomain {
    pub lon_min: f64,
    pub lon_max: f64,
    pub lat_min: f64,
    pub lat_max: f64,
    pub n_cells_x: usize,
    pub n_cells_y: usize,
}

impl GeoDomain {
    pub fn validate(&self) -> Result<()> {
        if !(self.lon_min < self.lon_max) {
            return Err(SurgeError::config("domain.lon_max", "lon_min must be < lon_max"));
        }
        if !(self.lat_min < self.lat_max) {
            return Err(SurgeError::config("domain.lat_max", "lat_min must be < lat_max"));
        }
        if self.lat_min <= -90.0 || self.lat_max >= 90.0 {
            return Err(SurgeError::config("domain.lat_min", "|lat| must stay below 90"));
        }
        if self.n_cells_x == 0 || self.n_cells_y == 0 {
            return Err(SurgeError::config("domain.n_cells_x", "cell counts must be >= 1"));
        }
        Ok(())
    }

    pub fn dlon(&self) -> f64 {
        (self.lon_max - self.lon_min) / self.n_cells_x as f64
    }

    pub fn dlat(&self) -> f64 {
        (self.lat_max - self.lat_min) / self.n_cells_y as f64
    }

    pub fn contains(&self, lon: f64, lat: f64) -> bool {
        lon >= self.lon_min && lon <= self.lon_max && lat >= self.lat_min && lat <= self.lat_max
    }
}

/// How wind stress enters the momentum equations.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WindStress {
    /// `d(hu)/dt = (h/rho) rho_air C_w |W| W_x`, the depth-scaled form.
    #[default]
    DepthScaled,
    /// `d(hu)/dt = rho_air C_w |W| W_x / rho`, a surface stress spread over
    /// the column; the forcing no longer grows with depth.
    Surface,
    /// No wind forcing; the storm acts through pressure alone.
    Off,
}

/// Physical constants.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PhysConfig {
    pub g: f64,
    pub rho: f64,
    pub rho_air: f64,
    pub omega: f64,
    pub earth_radius: f64,
    pub dry_tolerance: f64,
    pub sea_level: f64,
    pub wind_stress: WindStress,
}

impl Default for PhysConfig {
    fn default() -> Self {
        Self {
            g: 9.81,
            rho: 1025.0,
            rho_air: 1.15,
            omega: 2.0 * std::f64::consts::PI / SIDEREAL_DAY,
            earth_radius: 6.367e6,
            dry_tolerance: 1e-3,
            sea_level: 0.0,
            wind_stress: WindStress::DepthScaled,
        }
    }
}

impl PhysConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("physics.g", self.g),
            ("physics.rho", self.rho),
            ("physics.rho_air", self.rho_air),
            ("physics.omega", self.omega),
            ("physics.earth_radius", self.earth_radius),
            ("physics.dry_tolerance", self.dry_tolerance),
        ];
        for (path, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(SurgeError::config(path, format!("must be strictly positive, got {v}")));
            }
        }
        if !self.sea_level.is_finite() {
            return Err(SurgeError::config("physics.sea_level", "must be finite"));
        }
        Ok(())
    }
}

/// Metric size of a cell of `dlon` x `dlat` degrees centred at latitude `lat`.
pub fn cell_size_meters(lat: f64, dlon: f64, dlat: f64, earth_radius: f64) -> (f64, f64) {
    let deg = std::f64::consts::PI / 180.0;
    let dy = earth_radius * dlat * deg;
    let dx = earth_radius * (lat * deg).cos() * dlon * deg;
    (dx, dy)
}

/// Exact area of a longitude-latitude cell on the sphere. Areas of children
/// sum to the parent's area, which keeps refluxing and averaging conservative.
pub fn cell_area(lat_bottom: f64, lat_top: f64, dlon: f64, earth_radius: f64) -> f64 {
    let deg = std::f64::consts::PI / 180.0;
    earth_radius * earth_radius * dlon * deg * ((lat_top * deg).sin() - (lat_bottom * deg).sin())
}

/// Rectangle of cells in one level's global index space.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct IndexBox {
    pub ilo: i64,
    pub jlo: i64,
    pub nx: i64,
    pub ny: i64,
}

impl IndexBox {
    pub fn new(ilo: i64, jlo: i64, nx: i64, ny: i64) -> Self {
        Self { ilo, jlo, nx, ny }
    }

    pub fn ihi(&self) -> i64 {
        self.ilo + self.nx
    }

    pub fn jhi(&self) -> i64 {
        self.jlo + self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.nx <= 0 || self.ny <= 0
    }

    pub fn cells(&self) -> i64 {
        self.nx.max(0) * self.ny.max(0)
    }

    pub fn contains(&self, i: i64, j: i64) -> bool {
        i >= self.ilo && i < self.ihi() && j >= self.jlo && j < self.jhi()
    }

    pub fn contains_box(&self, other: &IndexBox) -> bool {
        other.ilo >= self.ilo && other.ihi() <= self.ihi() && other.jlo >= self.jlo && other.jhi() <= self.jhi()
    }

    pub fn intersect(&self, other: &IndexBox) -> Option<IndexBox> {
        let ilo = self.ilo.max(other.ilo);
        let jlo = self.jlo.max(other.jlo);
        let ihi = self.ihi().min(other.ihi());
        let jhi = self.jhi().min(other.jhi());
        (ihi > ilo && jhi > jlo).then(|| IndexBox::new(ilo, jlo, ihi - ilo, jhi - jlo))
    }

    pub fn refine(&self, rx: i64, ry: i64) -> IndexBox {
        IndexBox::new(self.ilo * rx, self.jlo * ry, self.nx * rx, self.ny * ry)
    }

    /// Smallest coarse box covering this one.
    pub fn coarsen(&self, rx: i64, ry: i64) -> IndexBox {
        let ilo = self.ilo.div_euclid(rx);
        let jlo = self.jlo.div_euclid(ry);
        let ihi = (self.ihi() + rx - 1).div_euclid(rx);
        let jhi = (self.jhi() + ry - 1).div_euclid(ry);
        IndexBox::new(ilo, jlo, ihi - ilo, jhi - jlo)
    }

    pub fn grow(&self, n: i64) -> IndexBox {
        IndexBox::new(self.ilo - n, self.jlo - n, self.nx + 2 * n, self.ny + 2 * n)
    }
}
