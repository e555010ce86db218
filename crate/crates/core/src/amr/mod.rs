//! Adaptive mesh refinement: patch hierarchy, sub-cycled advance,
//! regridding and conservation fix-up between levels.

mod cluster;
mod criteria;
mod ghost;
mod interp;
mod regrid;
mod sync;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use cluster::{chop, cluster_flags, Mask};
pub use criteria::{flag_cells, RefinementCriteria, RefinementRegion};
pub use interp::{coarsen_cell, prolong_block, prolong_cell, CoarseCell, CoarseView};

use crate::error::{Result, SurgeError};
use crate::grid::{BathymetrySampler, BoundaryConditions, GeoDomain, IndexBox, Patch, PhysConfig};
use crate::solver::{apply_source_split, compute_stable_dt, step_hyperbolic, PhysicalBoundary, COURANT_MAX};
use crate::sources::{manning_field, FrictionConfig};
use crate::storm::{StormState, StormTrack};

/// Which conserved components the coarse-fine flux correction touches.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RefluxMode {
    #[default]
    All,
    MassOnly,
    Off,
}

/// Hierarchy layout and time stepping controls.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AmrSettings {
    pub max_levels: usize,
    /// Spatial ratios between successive levels, `max_levels - 1` entries.
    pub ratios_x: Vec<usize>,
    pub ratios_y: Vec<usize>,
    /// Steps of a level between regrids of the next finer level.
    pub regrid_interval: usize,
    pub buffer: usize,
    pub min_fill: f64,
    pub max_patch_size: usize,
    pub courant_target: f64,
    pub reflux: RefluxMode,
    /// Upper bound on the coarse step (s).
    pub dt_max: Option<f64>,
}

impl Default for AmrSettings {
    fn default() -> Self {
        Self {
            max_levels: 1,
            ratios_x: vec![],
            ratios_y: vec![],
            regrid_interval: 4,
            buffer: 3,
            min_fill: 0.7,
            max_patch_size: 64,
            courant_target: crate::solver::COURANT_TARGET,
            reflux: RefluxMode::All,
            dt_max: None,
        }
    }
}

impl AmrSettings {
    /// Equal ratios in both directions.
    pub fn with_ratios(ratios: &[usize]) -> Self {
        Self {
            max_levels: ratios.len() + 1,
            ratios_x: ratios.to_vec(),
            ratios_y: ratios.to_vec(),
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_levels == 0 {
            return Err(SurgeError::config("amr.max_levels", "must be >= 1"));
        }
        for (name, r) in [("amr.ratios_x", &self.ratios_x), ("amr.ratios_y", &self.ratios_y)] {
            if r.len() != self.max_levels - 1 {
                return Err(SurgeError::config(
                    name,
                    format!("expected {} entries (max_levels - 1), got {}", self.max_levels - 1, r.len()),
                ));
            }
            if let Some(bad) = r.iter().find(|&&v| v < 2) {
                return Err(SurgeError::config(name, format!("ratios must be >= 2, got {bad}")));
            }
        }
        if self.regrid_interval == 0 {
            return Err(SurgeError::config("amr.regrid_interval", "must be >= 1"));
        }
        if !(self.min_fill > 0.0 && self.min_fill <= 1.0) {
            return Err(SurgeError::config("amr.min_fill", "must lie in (0, 1]"));
        }
        if self.max_patch_size < 4 {
            return Err(SurgeError::config("amr.max_patch_size", "must be >= 4"));
        }
        if !(self.courant_target > 0.0 && self.courant_target <= COURANT_MAX) {
            return Err(SurgeError::config("amr.courant_target", "must lie in (0, 1]"));
        }
        if let Some(dt) = self.dt_max {
            if !(dt > 0.0) {
                return Err(SurgeError::config("amr.dt_max", "must be positive"));
            }
        }
        Ok(())
    }

    fn ratio(&self, coarse: usize) -> (i64, i64) {
        (self.ratios_x[coarse] as i64, self.ratios_y[coarse] as i64)
    }
}

/// Smallest number of fine steps that subdivide `dt_coarse` with each step
/// within the fine level's stable step. An unconstrained (dry) fine level
/// takes one step.
pub fn choose_time_ratio(dt_coarse: f64, dt_stable_fine: f64) -> usize {
    if !dt_stable_fine.is_finite() || dt_stable_fine <= 0.0 {
        return 1;
    }
    ((dt_coarse / dt_stable_fine - 1e-9).ceil() as usize).max(1)
}

/// All patches on one refinement level.
#[derive(Clone, Debug)]
pub struct Level {
    pub patches: Vec<Patch>,
    /// Whole domain in this level's index space.
    pub extent: IndexBox,
    pub dlon: f64,
    pub dlat: f64,
    /// Bracketing times of the last step, used to interpolate ghosts of the
    /// next finer level.
    pub t_old: f64,
    pub t_new: f64,
    pub steps: u64,
}

impl Level {
    pub fn cells(&self) -> u64 {
        self.patches.iter().map(|p| p.rect.cells() as u64).sum()
    }

    /// Patch whose interior holds global cell `(i, j)`.
    pub fn find(&self, i: i64, j: i64) -> Option<usize> {
        self.patches.iter().position(|p| p.rect.contains(i, j))
    }
}

/// Point where the finest available state is sampled after every step.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Gauge {
    pub id: usize,
    pub lon: f64,
    pub lat: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GaugeRecord {
    pub t: f64,
    /// 1-based refinement level of the recording patch.
    pub level: usize,
    pub h: f64,
    pub hu: f64,
    pub hv: f64,
    pub eta: f64,
}

/// Run statistics.
#[derive(Clone, Debug, Default)]
pub struct Diagnostics {
    /// Interior cell updates per level.
    pub cell_steps: Vec<u64>,
    /// Mass gained or lost at regrids and at gated corrections, with the
    /// time it happened.
    pub mass_changes: Vec<(f64, f64)>,
    pub regrids: u64,
    pub cfl_retries: u64,
}

impl Diagnostics {
    pub fn total_cell_steps(&self) -> u64 {
        self.cell_steps.iter().sum()
    }

    /// Sum of absolute logged mass changes.
    pub fn cumulative_mass_change(&self) -> f64 {
        self.mass_changes.iter().map(|(_, d)| d.abs()).sum()
    }

    fn log_mass(&mut self, t: f64, delta: f64) {
        if delta != 0.0 {
            self.mass_changes.push((t, delta));
        }
    }
}

/// The whole adaptive grid and everything needed to advance it.
#[derive(Debug)]
pub struct Hierarchy {
    pub domain: GeoDomain,
    pub phys: PhysConfig,
    pub settings: AmrSettings,
    pub criteria: RefinementCriteria,
    pub friction: FrictionConfig,
    pub bcs: BoundaryConditions,
    pub sampler: BathymetrySampler,
    pub storm: Option<StormTrack>,
    pub levels: Vec<Level>,
    pub t: f64,
    pub diagnostics: Diagnostics,
    pub gauges: Vec<Gauge>,
    pub gauge_records: Vec<Vec<GaugeRecord>>,
    /// Disable to freeze the current patch layout.
    pub regrid_enabled: bool,
}

/// Everything except the patches needed to build a hierarchy.
#[derive(Clone, Debug)]
pub struct HierarchySpec {
    pub domain: GeoDomain,
    pub phys: PhysConfig,
    pub settings: AmrSettings,
    pub criteria: RefinementCriteria,
    pub friction: FrictionConfig,
    pub bcs: BoundaryConditions,
    pub storm: Option<StormTrack>,
    pub gauges: Vec<Gauge>,
    pub t0: f64,
}

impl Hierarchy {
    /// Level 1 tiling the domain, bathymetry sampled, lake at rest. Call
    /// [`Hierarchy::initialize_with`] to set another state and build finer
    /// levels.
    pub fn new(spec: HierarchySpec, sampler: BathymetrySampler) -> Result<Self> {
        spec.domain.validate()?;
        spec.phys.validate()?;
        spec.settings.validate()?;
        spec.criteria.validate()?;
        spec.friction.validate()?;
        for g in &spec.gauges {
            if !spec.domain.contains(g.lon, g.lat) {
                return Err(SurgeError::config(
                    format!("gauges[{}]", g.id),
                    format!("gauge at ({}, {}) lies outside the domain", g.lon, g.lat),
                ));
            }
        }
        let extent = IndexBox::new(0, 0, spec.domain.n_cells_x as i64, spec.domain.n_cells_y as i64);
        let (dlon, dlat) = (spec.domain.dlon(), spec.domain.dlat());
        let mut patches = Vec::new();
        for rect in chop(&extent, spec.settings.max_patch_size as i64) {
            let mut p = Patch::new(1, rect, dlon, dlat, spec.domain.lon_min, spec.domain.lat_min, spec.phys.earth_radius);
            sampler.fill_patch(&mut p, (extent.nx, extent.ny))?;
            crate::grid::initialize_lake_at_rest(&mut p, spec.phys.sea_level);
            manning_field(&mut p, &spec.friction, spec.phys.sea_level);
            p.save_old();
            patches.push(p);
        }
        let level = Level { patches, extent, dlon, dlat, t_old: spec.t0, t_new: spec.t0, steps: 0 };
        let n_gauges = spec.gauges.len();
        Ok(Self {
            domain: spec.domain,
            phys: spec.phys,
            diagnostics: Diagnostics { cell_steps: vec![0; spec.settings.max_levels], ..Default::default() },
            settings: spec.settings,
            criteria: spec.criteria,
            friction: spec.friction,
            bcs: spec.bcs,
            sampler,
            storm: spec.storm,
            levels: vec![level],
            t: spec.t0,
            gauges: spec.gauges,
            gauge_records: vec![Vec::new(); n_gauges],
            regrid_enabled: true,
        })
    }

    /// Sampler matching the hierarchy's resolutions for `sources`.
    pub fn sampler_for(
        sources: Vec<std::sync::Arc<dyn crate::grid::BathymetrySource>>,
        domain: &GeoDomain,
        settings: &AmrSettings,
        earth_radius: f64,
    ) -> BathymetrySampler {
        let mut res = vec![(domain.dlon(), domain.dlat())];
        for l in 0..settings.max_levels.saturating_sub(1) {
            let (dlon, dlat) = res[l];
            res.push((dlon / settings.ratios_x[l] as f64, dlat / settings.ratios_y[l] as f64));
        }
        let ratios = settings.ratios_x.iter().zip(&settings.ratios_y).map(|(&x, &y)| (x, y)).collect();
        BathymetrySampler::new(sources, domain.lon_min, domain.lat_min, earth_radius, res, ratios)
    }

    /// Set every cell from `state(lon, lat, b) -> (h, hu, hv)`, build the
    /// finer levels the criteria ask for, and record gauges at the start
    /// time.
    pub fn initialize_with<F>(&mut self, state: F) -> Result<()>
    where
        F: Fn(f64, f64, f64) -> (f64, f64, f64) + Sync,
    {
        self.set_level_state(0, &state);
        for _ in 0..2 {
            if self.regrid_enabled {
                self.regrid(0)?;
            }
            for l in 1..self.levels.len() {
                self.set_level_state(l, &state);
            }
            for l in (1..self.levels.len()).rev() {
                self.average_down(l);
            }
        }
        self.diagnostics.mass_changes.clear();
        for level in &mut self.levels {
            level.patches.iter_mut().for_each(Patch::save_old);
        }
        self.record_gauges_all();
        Ok(())
    }

    fn set_level_state<F>(&mut self, l: usize, state: &F)
    where
        F: Fn(f64, f64, f64) -> (f64, f64, f64) + Sync,
    {
        let dry = self.phys.dry_tolerance;
        self.levels[l].patches.par_iter_mut().for_each(|p| {
            for j in 0..p.ny() as isize {
                let lat = p.lat_center(j);
                for i in 0..p.nx() as isize {
                    let k = p.idx(i, j);
                    let (h, hu, hv) = state(p.lon_center(i), lat, p.b[k]);
                    p.h[k] = h.max(0.0);
                    p.hu[k] = hu;
                    p.hv[k] = hv;
                }
            }
            p.enforce_dry(dry);
            p.save_old();
        });
    }

    pub fn storm_state(&self, t: f64) -> Result<Option<StormState>> {
        self.storm.as_ref().map(|s| s.state_at(t, &self.phys)).transpose()
    }

    /// Stable step of level `l` from its current state.
    pub fn stable_dt(&self, l: usize) -> f64 {
        let c = self.settings.courant_target;
        self.levels[l]
            .patches
            .par_iter()
            .map(|p| compute_stable_dt(p, c, &self.phys))
            .reduce(|| f64::INFINITY, f64::min)
    }

    /// One coarse step of at most `dt_limit`; returns the step taken.
    pub fn step(&mut self, dt_limit: f64) -> Result<f64> {
        let mut dt = self.stable_dt(0);
        if let Some(m) = self.settings.dt_max {
            dt = dt.min(m);
        }
        dt = dt.min(dt_limit);
        if !dt.is_finite() || dt <= 0.0 {
            return Err(SurgeError::config(
                "amr.dt_max",
                "no stable step could be determined (all cells dry and no dt_max)",
            ));
        }
        self.advance_level(0, dt, 0)?;
        self.t = self.levels[0].t_new;
        log::debug!(
            "t = {:.3}, dt = {dt:.4}, cells per level {:?}, cell steps {:?}",
            self.t,
            self.cells_per_level(),
            self.diagnostics.cell_steps
        );
        Ok(dt)
    }

    /// Step until `t_end`, calling `after_step` after every coarse step.
    pub fn run_until<F>(&mut self, t_end: f64, mut after_step: F) -> Result<()>
    where
        F: FnMut(&Hierarchy) -> Result<()>,
    {
        while self.t < t_end - 1e-9 * t_end.abs().max(1.0) {
            let remaining = t_end - self.t;
            self.step(remaining)?;
            if t_end - self.t < 1e-9 * t_end.abs().max(1.0) {
                self.t = t_end;
            }
            after_step(self)?;
        }
        Ok(())
    }

    /// Advance level `l` by `dt`, sub-cycling finer levels. A CFL failure
    /// restores the level and takes two half steps instead.
    fn advance_level(&mut self, l: usize, dt: f64, depth: u32) -> Result<()> {
        let t = self.levels[l].t_new;
        if self.regrid_enabled
            && depth == 0
            && l + 1 < self.settings.max_levels
            && self.levels[l].steps % self.settings.regrid_interval as u64 == 0
        {
            self.regrid(l)?;
        }
        self.fill_ghosts(l, t)?;
        let x_first = self.levels[l].steps % 2 == 0;
        let extent = self.levels[l].extent;
        let bcs = self.bcs.clone();
        let phys = self.phys.clone();
        let results: Vec<Result<_>> = self.levels[l]
            .patches
            .par_iter_mut()
            .map(|p| {
                p.save_old();
                let bc = PhysicalBoundary { domain: &extent, conditions: &bcs };
                step_hyperbolic(p, dt, &phys, x_first, Some(bc))
            })
            .collect();
        if let Some(err) = results.into_iter().find_map(|r| r.err()) {
            if !matches!(err, SurgeError::CflViolation { .. }) || depth > 30 {
                return Err(err);
            }
            self.levels[l].patches.par_iter_mut().for_each(Patch::restore_old);
            self.diagnostics.cfl_retries += 1;
            log::debug!("level {} step {dt:.4} rejected ({err}), retrying with two half steps", l + 1);
            self.advance_level_split(l, dt, depth)?;
            return Ok(());
        }
        self.accumulate_registers(l, dt);
        let storm = self.storm_state(t)?;
        let friction = &self.friction;
        self.levels[l]
            .patches
            .par_iter_mut()
            .map(|p| apply_source_split(p, dt, storm.as_ref(), &phys, friction))
            .collect::<Result<Vec<()>>>()?;
        {
            let level = &mut self.levels[l];
            level.t_old = t;
            level.t_new = t + dt;
            level.steps += 1;
            self.diagnostics.cell_steps[l] += level.cells();
        }
        if l + 1 < self.levels.len() {
            self.levels[l + 1].patches.iter_mut().for_each(|p| p.register.clear());
            let k = if self.level_dry(l + 1) { 1 } else { choose_time_ratio(dt, self.stable_dt(l + 1)) };
            let dt_fine = dt / k as f64;
            for s in 0..k {
                let remaining = t + dt - self.levels[l + 1].t_new;
                let step = if s + 1 == k { remaining } else { dt_fine };
                self.advance_level(l + 1, step, 0)?;
            }
            // exact synchronisation with the coarse clock
            self.levels[l + 1].t_new = t + dt;
            if l + 1 < self.levels.len() {
                self.average_down(l + 1);
                self.reflux(l + 1, dt);
            }
        }
        self.record_gauges(l);
        Ok(())
    }

    fn advance_level_split(&mut self, l: usize, dt: f64, depth: u32) -> Result<()> {
        self.advance_level(l, 0.5 * dt, depth + 1)?;
        self.advance_level(l, 0.5 * dt, depth + 1)
    }

    fn level_dry(&self, l: usize) -> bool {
        let tol = self.phys.dry_tolerance;
        self.levels[l].patches.iter().all(|p| {
            (0..p.ny() as isize).all(|j| (0..p.nx() as isize).all(|i| p.h[p.idx(i, j)] < tol))
        })
    }

    /// Water volume counting each location once, at its finest level.
    pub fn composite_mass(&self) -> f64 {
        let mut total = 0.0;
        for (l, level) in self.levels.iter().enumerate() {
            let finer = self.levels.get(l + 1).map(|f| {
                let (rx, ry) = self.settings.ratio(l);
                f.patches.iter().map(|p| p.rect.coarsen(rx, ry)).collect::<Vec<_>>()
            });
            for p in &level.patches {
                for j in 0..p.ny() as isize {
                    let area = p.cell_area(j);
                    let gj = p.rect.jlo + j as i64;
                    let mut row = 0.0;
                    for i in 0..p.nx() as isize {
                        let gi = p.rect.ilo + i as i64;
                        if finer.as_ref().is_some_and(|f| f.iter().any(|r| r.contains(gi, gj))) {
                            continue;
                        }
                        row += p.h[p.idx(i, j)];
                    }
                    total += row * area;
                }
            }
        }
        total
    }

    /// Interior cells per level.
    pub fn cells_per_level(&self) -> Vec<u64> {
        self.levels.iter().map(Level::cells).collect()
    }

    /// Cells of the finest level's resolution over the whole domain.
    pub fn uniform_finest_cells(&self) -> u64 {
        let (mut nx, mut ny) = (self.domain.n_cells_x as u64, self.domain.n_cells_y as u64);
        for l in 0..self.settings.max_levels - 1 {
            nx *= self.settings.ratios_x[l] as u64;
            ny *= self.settings.ratios_y[l] as u64;
        }
        nx * ny
    }

    /// Finest level and global cell index containing a point.
    pub fn locate(&self, lon: f64, lat: f64) -> (usize, usize, isize, isize) {
        for l in (0..self.levels.len()).rev() {
            let level = &self.levels[l];
            let gi = (((lon - self.domain.lon_min) / level.dlon).floor() as i64).clamp(0, level.extent.nx - 1);
            let gj = (((lat - self.domain.lat_min) / level.dlat).floor() as i64).clamp(0, level.extent.ny - 1);
            if let Some(p) = level.find(gi, gj) {
                let (i, j) = level.patches[p].local(gi, gj);
                return (l, p, i, j);
            }
        }
        unreachable!("level 1 tiles the domain")
    }

    fn record_gauge(&mut self, g: usize, l: usize, p: usize, i: isize, j: isize) {
        let patch = &self.levels[l].patches[p];
        let k = patch.idx(i, j);
        let rec = GaugeRecord {
            t: self.levels[l].t_new,
            level: l + 1,
            h: patch.h[k],
            hu: patch.hu[k],
            hv: patch.hv[k],
            eta: patch.h[k] + patch.b[k],
        };
        let series = &mut self.gauge_records[g];
        if series.last().is_none_or(|last| rec.t > last.t) {
            series.push(rec);
        }
    }

    fn record_gauges(&mut self, l: usize) {
        for g in 0..self.gauges.len() {
            let (lon, lat) = (self.gauges[g].lon, self.gauges[g].lat);
            let (lf, p, i, j) = self.locate(lon, lat);
            if lf == l {
                self.record_gauge(g, l, p, i, j);
            }
        }
    }

    fn record_gauges_all(&mut self) {
        for g in 0..self.gauges.len() {
            let (lf, p, i, j) = self.locate(self.gauges[g].lon, self.gauges[g].lat);
            self.record_gauge(g, lf, p, i, j);
        }
    }
}

#[cfg(test)]
mod tests;
