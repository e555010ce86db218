//! Refinement criteria and cell flagging.

use serde::{Deserialize, Serialize};

use crate::error::{Result, SurgeError};
use crate::grid::{Patch, PhysConfig};
use crate::storm::{eye_offset, evaluate_point, StormState};

/// Rectangle that forces or caps refinement, optionally within a time
/// window. Levels are 1-based.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RefinementRegion {
    pub lon_min: f64,
    pub lon_max: f64,
    pub lat_min: f64,
    pub lat_max: f64,
    #[serde(default = "one")]
    pub min_level: usize,
    /// No cap when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_level: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_start: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_end: Option<f64>,
}

fn one() -> usize {
    1
}

impl RefinementRegion {
    /// Region over a rectangle with no level or time constraints.
    pub fn new(lon: (f64, f64), lat: (f64, f64)) -> Self {
        Self {
            lon_min: lon.0,
            lon_max: lon.1,
            lat_min: lat.0,
            lat_max: lat.1,
            min_level: 1,
            max_level: None,
            t_start: None,
            t_end: None,
        }
    }

    pub fn active(&self, lon: f64, lat: f64, t: f64) -> bool {
        self.t_start.is_none_or(|s| t >= s)
            && self.t_end.is_none_or(|e| t <= e)
            && lon >= self.lon_min
            && lon <= self.lon_max
            && lat >= self.lat_min
            && lat <= self.lat_max
    }
}

/// Tolerance lists hold one entry per level transition: entry `k` applies
/// to cells on level `k + 1` (1-based) deciding refinement to level `k + 2`.
/// Missing entries switch the criterion off on that level.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RefinementCriteria {
    #[serde(rename = "T_wave")]
    pub wave_tolerance: Option<f64>,
    #[serde(rename = "T_speed")]
    pub speed_tolerance: Vec<f64>,
    #[serde(rename = "T_r")]
    pub eye_radius: Vec<f64>,
    #[serde(rename = "T_wind")]
    pub wind_tolerance: Vec<f64>,
    pub regions: Vec<RefinementRegion>,
    /// Cells whose initial depth exceeds this are never flagged by physics.
    pub max_depth: Option<f64>,
}

impl Default for RefinementCriteria {
    fn default() -> Self {
        Self {
            wave_tolerance: None,
            speed_tolerance: Vec::new(),
            eye_radius: Vec::new(),
            wind_tolerance: Vec::new(),
            regions: Vec::new(),
            max_depth: None,
        }
    }
}

impl RefinementCriteria {
    /// Ike defaults.
    pub fn ike() -> Self {
        Self {
            wave_tolerance: Some(1.0),
            speed_tolerance: vec![1.0, 2.0, 3.0, 4.0],
            eye_radius: vec![60e3, 40e3, 20e3],
            wind_tolerance: vec![20.0, 40.0, 60.0],
            regions: Vec::new(),
            max_depth: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(t) = self.wave_tolerance {
            if !(t > 0.0) {
                return Err(SurgeError::config("refinement.T_wave", format!("must be positive, got {t}")));
            }
        }
        for (name, list) in [("T_speed", &self.speed_tolerance), ("T_r", &self.eye_radius), ("T_wind", &self.wind_tolerance)] {
            if let Some(v) = list.iter().find(|v| !(**v > 0.0)) {
                return Err(SurgeError::config(format!("refinement.{name}"), format!("tolerances must be positive, got {v}")));
            }
        }
        for (k, r) in self.regions.iter().enumerate() {
            if !(r.lon_min <= r.lon_max && r.lat_min <= r.lat_max) || r.min_level == 0 || r.min_level > r.max_level.unwrap_or(usize::MAX) {
                return Err(SurgeError::config(format!("refinement.regions[{k}]"), "inconsistent rectangle or level bounds"));
            }
        }
        Ok(())
    }

    fn tolerance(list: &[f64], level: usize) -> Option<f64> {
        level.checked_sub(1).and_then(|k| list.get(k)).copied()
    }

    /// Physics flag for one cell on 1-based `level`, before region rules.
    #[allow(clippy::too_many_arguments)]
    pub fn physics_flag(
        &self,
        level: usize,
        eta_anomaly: Option<f64>,
        speed: Option<f64>,
        eye_distance: Option<f64>,
        wind_speed: Option<f64>,
    ) -> bool {
        if let (Some(t), Some(a)) = (self.wave_tolerance, eta_anomaly) {
            if a.abs() > t {
                return true;
            }
        }
        if let (Some(t), Some(s)) = (Self::tolerance(&self.speed_tolerance, level), speed) {
            if s > t {
                return true;
            }
        }
        if let (Some(t), Some(r)) = (Self::tolerance(&self.eye_radius, level), eye_distance) {
            if r < t {
                return true;
            }
        }
        if let (Some(t), Some(w)) = (Self::tolerance(&self.wind_tolerance, level), wind_speed) {
            if w > t {
                return true;
            }
        }
        false
    }

    /// `(min_level, cap)` from the regions active at a point; the cap is
    /// `max_levels` when no region applies.
    pub fn region_bounds(&self, lon: f64, lat: f64, t: f64, max_levels: usize) -> (usize, usize) {
        let mut min_level = 1;
        let mut cap: Option<usize> = None;
        for r in self.regions.iter().filter(|r| r.active(lon, lat, t)) {
            min_level = min_level.max(r.min_level);
            cap = Some(cap.map_or(r.max_level.unwrap_or(usize::MAX), |c| c.max(r.max_level.unwrap_or(usize::MAX))));
        }
        (min_level, cap.unwrap_or(max_levels).min(max_levels))
    }

    fn needs_storm(&self, level: usize) -> bool {
        Self::tolerance(&self.eye_radius, level).is_some() || Self::tolerance(&self.wind_tolerance, level).is_some()
    }
}

/// Flags for the interior cells of `patch` (row-major, `j * nx + i`) on
/// 1-based `level`.
pub fn flag_cells(
    patch: &Patch,
    level: usize,
    criteria: &RefinementCriteria,
    storm: Option<&StormState>,
    phys: &PhysConfig,
    t: f64,
    max_levels: usize,
) -> Vec<bool> {
    let (nx, ny) = (patch.nx(), patch.ny());
    let mut flags = vec![false; nx * ny];
    if level >= max_levels {
        return flags;
    }
    let storm = if criteria.needs_storm(level) { storm } else { None };
    for j in 0..ny as isize {
        let lat = patch.lat_center(j);
        for i in 0..nx as isize {
            let lon = patch.lon_center(i);
            let (min_level, cap) = criteria.region_bounds(lon, lat, t, max_levels);
            let flag = if level < min_level {
                true
            } else if level >= cap {
                false
            } else {
                let k = patch.idx(i, j);
                let b = patch.b[k];
                let too_deep = criteria.max_depth.is_some_and(|d| phys.sea_level - b > d);
                if too_deep {
                    false
                } else {
                    let h = patch.h[k];
                    let wet = h >= phys.dry_tolerance;
                    let anomaly = wet.then(|| h + b - phys.sea_level);
                    let speed = wet.then(|| patch.hu[k].hypot(patch.hv[k]) / h);
                    let (eye, wind) = match storm {
                        Some(s) => {
                            let (x, y) = eye_offset(lon, lat, s, patch.earth_radius);
                            let ((wx, wy), _) = evaluate_point(lon, lat, s, phys);
                            (Some(x.hypot(y)), Some(wx.hypot(wy)))
                        }
                        None => (None, None),
                    };
                    criteria.physics_flag(level, anomaly, speed, eye, wind)
                }
            };
            flags[j as usize * nx + i as usize] = flag;
        }
    }
    flags
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn worked_speed_example() {
        // thresholds for reaching levels 1, 2, 3 are 2, 2.5, 3; the level-1
        // entry is vacuous, leaving per-transition tolerances [2.5, 3]
        let c = RefinementCriteria { speed_tolerance: vec![2.5, 3.0], ..Default::default() };
        assert!(c.physics_flag(1, None, Some(2.6), None, None));
        assert!(!c.physics_flag(2, None, Some(2.6), None, None));
    }

    #[test]
    fn table_tolerances() {
        let c = RefinementCriteria::ike();
        assert_eq!(c.wave_tolerance, Some(1.0));
        assert_eq!(c.speed_tolerance, vec![1.0, 2.0, 3.0, 4.0]);
        assert_eq!(c.eye_radius, vec![60e3, 40e3, 20e3]);
        assert_eq!(c.wind_tolerance, vec![20.0, 40.0, 60.0]);
        for level in 1..=7 {
            assert!(c.physics_flag(level, Some(1.5), None, None, None));
            assert!(!c.physics_flag(level, Some(0.5), None, None, None));
        }
        assert!(c.physics_flag(2, None, None, Some(30e3), None));
        assert!(!c.physics_flag(3, None, None, Some(30e3), None));
        assert!(c.physics_flag(3, None, None, None, Some(61.0)));
        assert!(!c.physics_flag(4, None, None, None, Some(100.0)));
        assert!(c.physics_flag(4, None, Some(4.5), None, None));
        assert!(!c.physics_flag(5, None, Some(40.0), None, None));
    }

    #[test]
    fn regions_take_precedence() {
        let mut c = RefinementCriteria::ike();
        c.regions.push(RefinementRegion {
            lon_min: -95.0,
            lon_max: -94.0,
            lat_min: 29.0,
            lat_max: 30.0,
            min_level: 3,
            max_level: Some(4),
            t_start: Some(0.0),
            t_end: Some(100.0),
        });
        assert_eq!(c.region_bounds(-94.5, 29.5, 50.0, 7), (3, 4));
        assert_eq!(c.region_bounds(-94.5, 29.5, 150.0, 7), (1, 7));
        assert_eq!(c.region_bounds(-90.0, 29.5, 50.0, 7), (1, 7));
    }

    #[test]
    fn flagging_a_patch() {
        use crate::grid::IndexBox;
        let phys = PhysConfig::default();
        let mut p = Patch::new(0, IndexBox::new(0, 0, 4, 1), 0.1, 0.1, -95.0, 29.0, 6.367e6);
        for i in 0..4isize {
            let k = p.idx(i, 0);
            p.b[k] = if i == 3 { 2.0 } else { -10.0 };
            p.h[k] = if i == 3 { 0.0 } else { 10.0 };
        }
        let k = p.idx(1, 0);
        p.h[k] = 11.5;
        let k = p.idx(2, 0);
        p.hu[k] = 26.0;
        let c = RefinementCriteria { wave_tolerance: Some(1.0), speed_tolerance: vec![2.5, 3.0], ..Default::default() };
        let f = flag_cells(&p, 1, &c, None, &phys, 0.0, 3);
        assert_eq!(f, vec![false, true, true, false]);
        let f = flag_cells(&p, 3, &c, None, &phys, 0.0, 3);
        assert_eq!(f, vec![false; 4]);
        let deep = RefinementCriteria { max_depth: Some(5.0), ..c.clone() };
        assert_eq!(flag_cells(&p, 1, &deep, None, &phys, 0.0, 3), vec![false; 4]);
        let mut forced = c;
        forced.regions.push(RefinementRegion {
            lon_min: -95.0,
            lon_max: -94.9,
            lat_min: 29.0,
            lat_max: 29.1,
            min_level: 2,
            max_level: Some(3),
            t_start: None,
            t_end: None,
        });
        assert_eq!(flag_cells(&p, 1, &forced, None, &phys, 0.0, 3)[0], true);
    }
}
