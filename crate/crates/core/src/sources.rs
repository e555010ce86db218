//! Momentum source terms applied by operator splitting: hybrid
//! Chezy-Manning friction (backward Euler), Coriolis (truncated matrix
//! exponential), wind stress and pressure gradient (forward Euler), plus the
//! depth-contour Manning coefficient field.

use serde::{Deserialize, Serialize};

use crate::error::{Result, SurgeError};
use crate::grid::{Patch, PhysConfig, WindStress, NGHOST};

/// `n` applies where `b > sea_level - depth`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContourRule {
    pub depth: f64,
    pub n: f64,
}

/// Rectangle with its own ordered contour rules; `deep_n` applies below the
/// last contour so the rules cover any bathymetry.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManningRegion {
    pub lon_min: f64,
    pub lon_max: f64,
    pub lat_min: f64,
    pub lat_max: f64,
    pub rules: Vec<ContourRule>,
    pub deep_n: f64,
}

impl ManningRegion {
    pub fn contains(&self, lon: f64, lat: f64) -> bool {
        lon >= self.lon_min && lon <= self.lon_max && lat >= self.lat_min && lat <= self.lat_max
    }

    /// Louisiana-Texas shelf contours used for the Ike configuration.
    pub fn latex_shelf() -> Self {
        Self {
            lon_min: -98.0,
            lon_max: -90.0,
            lat_min: 25.25,
            lat_max: 30.0,
            rules: vec![ContourRule { depth: 5.0, n: 0.030 }, ContourRule { depth: 200.0, n: 0.012 }],
            deep_n: 0.022,
        }
    }
}

fn apply_rules(rules: &[ContourRule], deep_n: f64, b: f64, sea_level: f64) -> f64 {
    rules
        .iter()
        .find(|r| b > sea_level - r.depth)
        .map(|r| r.n)
        .unwrap_or(deep_n)
}

/// Form of the depth factor in the hybrid friction law.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BracketForm {
    /// `max(0, 1 - (h_break/h)^theta)^(gamma/theta)`: friction vanishes at
    /// and below `h_break`.
    #[default]
    Clamped,
    /// `(1 + (h_break/h)^theta)^(gamma/theta)`: friction grows in shallow
    /// water, which keeps wind-driven thin layers bounded.
    Hybrid,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FrictionConfig {
    pub bracket: BracketForm,
    pub h_break: f64,
    pub theta_f: f64,
    pub gamma_f: f64,
    pub default_rules: Vec<ContourRule>,
    pub default_deep_n: f64,
    pub regions: Vec<ManningRegion>,
}

impl Default for FrictionConfig {
    fn default() -> Self {
        Self {
            bracket: BracketForm::Clamped,
            h_break: 2.0,
            theta_f: 10.0,
            gamma_f: 4.0 / 3.0,
            default_rules: vec![ContourRule { depth: 0.0, n: 0.030 }],
            default_deep_n: 0.022,
            regions: Vec::new(),
        }
    }
}

impl FrictionConfig {
    /// Uniform Manning coefficient everywhere.
    pub fn uniform(n: f64) -> Self {
        Self { default_rules: Vec::new(), default_deep_n: n, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        for (path, v) in [("friction.h_break", self.h_break), ("friction.theta_f", self.theta_f), ("friction.gamma_f", self.gamma_f)] {
            if !(v > 0.0) {
                return Err(SurgeError::config(path, format!("must be positive, got {v}")));
            }
        }
        let all_n = self
            .default_rules
            .iter()
            .map(|r| r.n)
            .chain(std::iter::once(self.default_deep_n))
            .chain(self.regions.iter().flat_map(|r| r.rules.iter().map(|c| c.n).chain(std::iter::once(r.deep_n))));
        for n in all_n {
            if !(n >= 0.0) {
                return Err(SurgeError::config("friction", format!("Manning n must be >= 0, got {n}")));
            }
        }
        Ok(())
    }

    /// Manning coefficient at a point with bed elevation `b`.
    pub fn manning_at(&self, lon: f64, lat: f64, b: f64, sea_level: f64) -> f64 {
        match self.regions.iter().find(|r| r.contains(lon, lat)) {
            Some(region) => apply_rules(&region.rules, region.deep_n, b, sea_level),
            None => apply_rules(&self.default_rules, self.default_deep_n, b, sea_level),
        }
    }
}

/// Assign per-cell Manning coefficients from the patch's own bathymetry.
pub fn manning_field(patch: &mut Patch, cfg: &FrictionConfig, sea_level: f64) {
    let g = NGHOST as isize;
    for j in -g..patch.ny() as isize + g {
        let lat = patch.lat_center(j);
        for i in -g..patch.nx() as isize + g {
            let k = patch.idx(i, j);
            patch.manning[k] = cfg.manning_at(patch.lon_center(i), lat, patch.b[k], sea_level);
        }
    }
}

/// Garratt's wind drag coefficient.
pub fn wind_drag(wind_speed: f64) -> f64 {
    (2e-3f64).min((0.75 + 0.067 * wind_speed) * 1e-3)
}

/// Momentum decay rate `D` (1/s) such that `d(hu)/dt = -D hu`.
pub fn friction_coefficient(h: f64, n: f64, cfg: &FrictionConfig, momentum: f64, g: f64) -> Result<f64> {
    if !(h > 0.0) {
        return Err(SurgeError::NonPositiveDepth { h });
    }
    if n == 0.0 {
        return Ok(0.0);
    }
    let ratio = (cfg.h_break / h).powf(cfg.theta_f);
    let bracket = match cfg.bracket {
        BracketForm::Clamped => (1.0 - ratio).max(0.0),
        BracketForm::Hybrid => 1.0 + ratio,
    };
    if bracket == 0.0 {
        return Ok(0.0);
    }
    Ok(g * n * n * h.powf(-7.0 / 3.0) * momentum * bracket.powf(cfg.gamma_f / cfg.theta_f))
}

fn interior(patch: &Patch) -> impl Iterator<Item = (isize, isize)> {
    let (nx, ny) = (patch.nx() as isize, patch.ny() as isize);
    (0..ny).flat_map(move |j| (0..nx).map(move |i| (i, j)))
}

/// Backward Euler friction with the drag evaluated at the current state.
pub fn apply_friction(patch: &mut Patch, dt: f64, cfg: &FrictionConfig, phys: &PhysConfig) -> Result<()> {
    for (i, j) in interior(patch).collect::<Vec<_>>() {
        let k = patch.idx(i, j);
        let h = patch.h[k];
        if h < phys.dry_tolerance {
            continue;
        }
        let momentum = patch.hu[k].hypot(patch.hv[k]);
        let d = friction_coefficient(h, patch.manning[k], cfg, momentum, phys.g)?;
        let factor = 1.0 / (1.0 + d * dt);
        patch.hu[k] *= factor;
        patch.hv[k] *= factor;
    }
    Ok(())
}

pub fn coriolis_parameter(lat: f64, omega: f64) -> f64 {
    2.0 * omega * lat.to_radians().sin()
}

/// Four-term Taylor expansion of the rotation `exp(dt [[0, f], [-f, 0]])`.
pub fn coriolis_rotation(f_dt: f64) -> (f64, f64) {
    let x = f_dt;
    let x2 = x * x;
    let c = 1.0 - 0.5 * x2 + x2 * x2 / 24.0;
    let s = x - x * x2 / 6.0;
    (c, s)
}

pub fn apply_coriolis(patch: &mut Patch, dt: f64, phys: &PhysConfig) {
    for j in 0..patch.ny() as isize {
        let f = coriolis_parameter(patch.lat_center(j), phys.omega);
        let (c, s) = coriolis_rotation(f * dt);
        for i in 0..patch.nx() as isize {
            let k = patch.idx(i, j);
            if patch.h[k] < phys.dry_tolerance {
                continue;
            }
            let (hu, hv) = (patch.hu[k], patch.hv[k]);
            patch.hu[k] = c * hu + s * hv;
            patch.hv[k] = -s * hu + c * hv;
        }
    }
}

/// Storm wind (m/s) and surface pressure (Pa) at every cell of a patch
/// frame, indexed like the patch arrays.
#[derive(Clone, Debug)]
pub struct ForcingField {
    pub wind_x: Vec<f64>,
    pub wind_y: Vec<f64>,
    pub pressure: Vec<f64>,
}

impl ForcingField {
    pub fn calm(patch: &Patch, pressure: f64) -> Self {
        let n = patch.h.len();
        Self { wind_x: vec![0.0; n], wind_y: vec![0.0; n], pressure: vec![pressure; n] }
    }
}

pub fn apply_wind(patch: &mut Patch, dt: f64, field: &ForcingField, phys: &PhysConfig) {
    if phys.wind_stress == WindStress::Off {
        return;
    }
    for (i, j) in interior(patch).collect::<Vec<_>>() {
        let k = patch.idx(i, j);
        let h = patch.h[k];
        if h < phys.dry_tolerance {
            continue;
        }
        let (wx, wy) = (field.wind_x[k], field.wind_y[k]);
        let speed = wx.hypot(wy);
        let column = match phys.wind_stress {
            WindStress::DepthScaled => h,
            WindStress::Surface | WindStress::Off => 1.0,
        };
        let stress = column / phys.rho * phys.rho_air * wind_drag(speed) * speed;
        patch.hu[k] += dt * stress * wx;
        patch.hv[k] += dt * stress * wy;
    }
}

/// Centred pressure gradient with metric spacing at the row latitude.
pub fn apply_pressure(patch: &mut Patch, dt: f64, field: &ForcingField, phys: &PhysConfig) {
    for j in 0..patch.ny() as isize {
        let (dx, dy) = patch.cell_size(j);
        for i in 0..patch.nx() as isize {
            let k = patch.idx(i, j);
            let h = patch.h[k];
            if h < phys.dry_tolerance {
                continue;
            }
            let p = &field.pressure;
            let dpx = p[patch.idx(i - 1, j)] - p[patch.idx(i + 1, j)];
            let dpy = p[patch.idx(i, j - 1)] - p[patch.idx(i, j + 1)];
            patch.hu[k] += dt * h / phys.rho * dpx / (2.0 * dx);
            patch.hv[k] += dt * h / phys.rho * dpy / (2.0 * dy);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::IndexBox;

    #[test]
    fn wind_drag_values() {
        assert!((wind_drag(0.0) - 7.5e-4).abs() < 1e-18);
        assert!((wind_drag(10.0) - 1.42e-3).abs() < 1e-15);
        assert_eq!(wind_drag(30.0), 2e-3);
        // crossover of the cap
        let w: f64 = (2.0 - 0.75) / 0.067;
        assert!((w - 18.657).abs() < 1e-3);
        assert!(wind_drag(w - 1e-6) < 2e-3);
        assert_eq!(wind_drag(w + 1e-6), 2e-3);
    }

    #[test]
    fn friction_coefficient_examples() {
        let cfg = FrictionConfig::default();
        assert_eq!(friction_coefficient(2.0, 0.022, &cfg, 5.0, 9.81).unwrap(), 0.0);
        assert_eq!(friction_coefficient(1.0, 0.022, &cfg, 5.0, 9.81).unwrap(), 0.0);
        assert_eq!(friction_coefficient(10.0, 0.0, &cfg, 5.0, 9.81).unwrap(), 0.0);
        // 9.81 * 0.022^2 * 10^(-7/3) * 10 * (1 - 0.2^10)^(4/30)
        let d = friction_coefficient(10.0, 0.022, &cfg, 10.0, 9.81).unwrap();
        let expected = 9.81 * 4.84e-4 * 10f64.powf(-7.0 / 3.0) * 10.0 * (1.0 - 0.2f64.powi(10)).powf(4.0 / 30.0);
        assert!((d - expected).abs() < 1e-18);
        assert!((d - 2.20e-4).abs() < 0.01e-4);
        assert!(friction_coefficient(0.0, 0.022, &cfg, 1.0, 9.81).is_err());
    }

    #[test]
    fn hybrid_bracket_grows_in_shallow_water() {
        let cfg = FrictionConfig { bracket: BracketForm::Hybrid, ..FrictionConfig::default() };
        // at the break depth the factor is 2^(gamma/theta)
        let d = friction_coefficient(2.0, 0.022, &cfg, 1.0, 9.81).unwrap();
        let expected = 9.81 * 4.84e-4 * 2f64.powf(-7.0 / 3.0) * 2f64.powf(4.0 / 30.0);
        assert!((d - expected).abs() < 1e-15 * expected);
        // far below it the law tends to n^2 g h_break^(4/3) / h^(11/3) * |hu|
        let shallow = friction_coefficient(0.01, 0.022, &cfg, 1.0, 9.81).unwrap();
        let limit = 9.81 * 4.84e-4 * 2f64.powf(4.0 / 3.0) * 0.01f64.powf(-11.0 / 3.0);
        assert!((shallow / limit - 1.0).abs() < 1e-12);
    }

    fn patch(nx: i64, ny: i64) -> Patch {
        let mut p = Patch::new(1, IndexBox::new(0, 0, nx, ny), 0.1, 0.1, -90.0, 0.0, 6.367e6);
        p.h.iter_mut().for_each(|h| *h = 100.0);
        p.b.iter_mut().for_each(|b| *b = -100.0);
        p
    }

    #[test]
    fn backward_euler_friction_halves_at_unit_rate() {
        let phys = PhysConfig::default();
        let cfg = FrictionConfig::uniform(0.03);
        let mut p = patch(1, 1);
        let k = p.idx(0, 0);
        p.h[k] = 10.0;
        p.hu[k] = 3.0;
        p.hv[k] = 4.0;
        p.manning[k] = 0.03;
        let d = friction_coefficient(10.0, 0.03, &cfg, 5.0, phys.g).unwrap();
        apply_friction(&mut p, 1.0 / d, &cfg, &phys).unwrap();
        assert!((p.hu[k] - 1.5).abs() < 1e-12);
        assert!((p.hv[k] - 2.0).abs() < 1e-12);
        // huge damping: monotone toward zero, no sign flip
        p.hu[k] = 3.0;
        apply_friction(&mut p, 1e12, &cfg, &phys).unwrap();
        assert!(p.hu[k] > 0.0 && p.hu[k] < 1e-6);
    }

    #[test]
    fn coriolis_parameter_values() {
        let om = PhysConfig::default().omega;
        assert_eq!(coriolis_parameter(0.0, om), 0.0);
        assert!((coriolis_parameter(90.0, om) - 1.4584e-4).abs() < 1e-8);
        assert!((coriolis_parameter(30.0, om) - om).abs() < 1e-18);
        assert!((om - 7.2921e-5).abs() < 1e-9);
    }

    #[test]
    fn coriolis_magnitude_factor() {
        for &x in &[0.01f64, 0.1, 0.5] {
            let (c, s) = coriolis_rotation(x);
            let ratio = (c * c + s * s).sqrt();
            // exact expansion of c² + s² for the truncated series
            let exact = (1.0 - x.powi(6) / 72.0 + x.powi(8) / 576.0).sqrt();
            assert!((ratio - exact).abs() < 1e-15, "x={x}");
        }
        let (c, s) = coriolis_rotation(0.5);
        // leading-order estimate sqrt(1 - x^6/72) = 0.999891; x^8 term adds 3.4e-6
        assert!(((c * c + s * s).sqrt() - 0.999891).abs() < 5e-6);
        let (c, s) = coriolis_rotation(0.01);
        assert!(((c * c + s * s).sqrt() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn coriolis_leaves_depth_alone() {
        let phys = PhysConfig::default();
        let mut p = Patch::new(1, IndexBox::new(0, 0, 2, 2), 0.1, 0.1, -90.0, 30.0, 6.367e6);
        p.h.iter_mut().for_each(|h| *h = 5.0);
        p.hu.iter_mut().for_each(|v| *v = 1.0);
        let h0 = p.h.clone();
        apply_coriolis(&mut p, 600.0, &phys);
        assert_eq!(p.h, h0);
        let k = p.idx(0, 0);
        assert!(p.hv[k] < 0.0, "northern hemisphere deflects eastward flow southward");
    }

    #[test]
    fn wind_update_example() {
        let phys = PhysConfig::default();
        let mut p = patch(1, 1);
        let mut field = ForcingField::calm(&p, 101300.0);
        field.wind_x.iter_mut().for_each(|w| *w = 20.0);
        apply_wind(&mut p, 1.0, &field, &phys);
        let k = p.idx(0, 0);
        let expected = 100.0 / 1025.0 * 1.15 * 2.0e-3 * 20.0 * 20.0;
        assert!((p.hu[k] - expected).abs() < 1e-15);
        assert!((p.hu[k] - 0.0898).abs() < 1e-4);
        assert_eq!(p.hv[k], 0.0);
        // dry cells are not forced
        p.h[k] = 0.0;
        p.hu[k] = 0.0;
        apply_wind(&mut p, 1.0, &field, &phys);
        assert_eq!(p.hu[k], 0.0);
    }

    #[test]
    fn surface_wind_stress_is_depth_independent() {
        let phys = PhysConfig { wind_stress: WindStress::Surface, ..PhysConfig::default() };
        let mut p = patch(1, 1);
        let mut field = ForcingField::calm(&p, 101300.0);
        field.wind_x.iter_mut().for_each(|w| *w = 20.0);
        apply_wind(&mut p, 1.0, &field, &phys);
        let k = p.idx(0, 0);
        assert!((p.hu[k] - 1.15 * 2.0e-3 * 400.0 / 1025.0).abs() < 1e-15);
    }

    #[test]
    fn pressure_gradient_example() {
        let phys = PhysConfig::default();
        let mut p = patch(3, 3);
        p.h.iter_mut().for_each(|h| *h = 10.0);
        let mut field = ForcingField::calm(&p, 0.0);
        let g = NGHOST as isize;
        for j in -g..3 + g {
            let (dx, _) = p.cell_size(j);
            for i in -g..3 + g {
                let k = p.idx(i, j);
                // slope +100 Pa per km eastward, measured in metric distance
                field.pressure[k] = 101300.0 + 0.1 * dx * i as f64;
            }
        }
        apply_pressure(&mut p, 1.0, &field, &phys);
        let k = p.idx(1, 1);
        assert!((p.hu[k] - (-10.0 / 1025.0 * 0.1)).abs() < 1e-12);
        assert!((p.hu[k] + 9.76e-4).abs() < 1e-6);
        // only the row-to-row change of dx leaks into the meridional gradient
        assert!(p.hv[k].abs() < 1e-7);
        let mut p2 = patch(3, 3);
        let calm = ForcingField::calm(&p2, 101300.0);
        apply_pressure(&mut p2, 1.0, &calm, &phys);
        assert!(p2.hu.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn manning_contours() {
        let mut cfg = FrictionConfig::default();
        cfg.regions.push(ManningRegion::latex_shelf());
        let sl = 0.28;
        assert_eq!(cfg.manning_at(-94.0, 28.0, -300.0, sl), 0.022);
        assert_eq!(cfg.manning_at(-94.0, 28.0, -50.0, sl), 0.012);
        assert_eq!(cfg.manning_at(-94.0, 28.0, 1.0, sl), 0.030);
        assert_eq!(cfg.manning_at(-80.0, 20.0, 1.0, sl), 0.030);
        assert_eq!(cfg.manning_at(-80.0, 20.0, -50.0, sl), 0.022);
    }

    #[test]
    fn manning_field_is_idempotent() {
        let cfg = FrictionConfig::default();
        let mut p = patch(4, 4);
        for (k, b) in p.b.iter_mut().enumerate() {
            *b = if k % 3 == 0 { 2.0 } else { -20.0 };
        }
        manning_field(&mut p, &cfg, 0.0);
        let first = p.manning.clone();
        manning_field(&mut p, &cfg, 0.0);
        assert_eq!(first, p.manning);
    }
}
