use std::sync::Arc;

use super::*;
use crate::grid::{AnalyticBathymetry, BathymetrySource, BoundaryKind};
use crate::grid::Bump;

fn bump(lon: f64, lat: f64, height: f64, radius: f64) -> Bump {
    Bump { lon, lat, height, radius }
}

fn spec(nx: usize, ny: usize, ratios: &[usize], criteria: RefinementCriteria) -> HierarchySpec {
    HierarchySpec {
        domain: GeoDomain { lon_min: -1.0, lon_max: 1.0, lat_min: 20.0, lat_max: 22.0, n_cells_x: nx, n_cells_y: ny },
        phys: PhysConfig { omega: 1e-30, ..PhysConfig::default() },
        settings: AmrSettings { max_patch_size: 32, ..AmrSettings::with_ratios(ratios) },
        criteria,
        friction: FrictionConfig::uniform(0.0),
        bcs: BoundaryConditions::all(BoundaryKind::Wall),
        storm: None,
        gauges: vec![],
        t0: 0.0,
    }
}

fn build(s: HierarchySpec, bathy: AnalyticBathymetry) -> Hierarchy {
    let sources: Vec<Arc<dyn BathymetrySource>> = vec![Arc::new(bathy)];
    let sampler = Hierarchy::sampler_for(sources, &s.domain, &s.settings, s.phys.earth_radius);
    Hierarchy::new(s, sampler).unwrap()
}

fn region(lon: (f64, f64), lat: (f64, f64), min_level: usize) -> RefinementRegion {
    RefinementRegion { min_level, ..RefinementRegion::new(lon, lat) }
}

fn forced(min_level: usize) -> RefinementCriteria {
    RefinementCriteria { regions: vec![region((-0.3, 0.3), (20.7, 21.3), min_level)], ..Default::default() }
}

fn max_deviation(h: &Hierarchy) -> (f64, f64) {
    let (mut eta, mut mom) = (0.0f64, 0.0f64);
    for level in &h.levels {
        for p in &level.patches {
            for j in 0..p.ny() as isize {
                for i in 0..p.nx() as isize {
                    let k = p.idx(i, j);
                    if p.h[k] >= h.phys.dry_tolerance {
                        eta = eta.max((p.h[k] + p.b[k] - h.phys.sea_level).abs());
                    }
                    mom = mom.max(p.hu[k].abs()).max(p.hv[k].abs());
                }
            }
        }
    }
    (eta, mom)
}

#[test]
fn time_ratio_examples() {
    // equal speeds, spatial ratio 2
    let (dx, s) = (1000.0, 20.0);
    assert_eq!(choose_time_ratio(0.9 * dx / s, 0.9 * (dx / 2.0) / s), 2);
    // ratio 6 with a fine level three times slower
    assert_eq!(choose_time_ratio(0.9 * dx / s, 0.9 * (dx / 6.0) / (s / 3.0)), 2);
    assert_eq!(choose_time_ratio(10.0, f64::INFINITY), 1);
    assert_eq!(choose_time_ratio(10.0, 20.0), 1);
    assert_eq!(choose_time_ratio(10.0, 3.0), 4);
}

#[test]
fn single_level_matches_solver() {
    let s = spec(16, 16, &[], RefinementCriteria::default());
    let bathy = AnalyticBathymetry::Constant { value: -50.0 };
    let mut h = build(s, bathy);
    h.initialize_with(|lon, _lat, b| (if lon < 0.0 { 2.0 - b } else { -b }, 0.0, 0.0)).unwrap();
    let mut p = h.levels[0].patches[0].clone();
    let dt = h.step(f64::INFINITY).unwrap();
    let extent = h.levels[0].extent;
    crate::grid::fill_physical_ghosts(&mut p, &extent, &h.bcs, &h.phys);
    let bc = PhysicalBoundary { domain: &extent, conditions: &h.bcs };
    step_hyperbolic(&mut p, dt, &h.phys, true, Some(bc)).unwrap();
    apply_source_split(&mut p, dt, None, &h.phys, &h.friction).unwrap();
    assert_eq!(p.h, h.levels[0].patches[0].h);
    assert_eq!(p.hu, h.levels[0].patches[0].hu);
}

#[test]
fn forced_region_is_refined_and_collapses_without_criteria() {
    let mut h = build(spec(20, 20, &[2, 2], forced(3)), AnalyticBathymetry::Constant { value: -100.0 });
    h.initialize_with(|_, _, b| (-b, 0.0, 0.0)).unwrap();
    assert_eq!(h.levels.len(), 3);
    // the finest level covers the region centre
    let (l, ..) = h.locate(0.0, 21.0);
    assert_eq!(l, 2);
    h.criteria = RefinementCriteria::default();
    h.regrid(0).unwrap();
    assert_eq!(h.levels.len(), 1);
}

#[test]
fn proper_nesting_after_regrid() {
    let mut h = build(spec(20, 20, &[2, 4], forced(3)), AnalyticBathymetry::Constant { value: -100.0 });
    h.initialize_with(|_, _, b| (-b, 0.0, 0.0)).unwrap();
    for l in 1..h.levels.len() {
        let (rx, ry) = h.settings.ratio(l - 1);
        for p in &h.levels[l].patches {
            let c = p.rect.coarsen(rx, ry);
            for cj in c.jlo..c.jhi() {
                for ci in c.ilo..c.ihi() {
                    assert!(h.levels[l - 1].find(ci, cj).is_some());
                }
            }
        }
        // disjoint patches
        let ps = &h.levels[l].patches;
        for a in 0..ps.len() {
            for b in a + 1..ps.len() {
                assert!(ps[a].rect.intersect(&ps[b].rect).is_none());
            }
        }
    }
}

#[test]
fn lake_at_rest_hierarchy() {
    let bathy = AnalyticBathymetry::Bumps {
        base: -40.0,
        bumps: vec![bump(0.0, 21.0, 30.0, 0.2), bump(0.4, 20.6, 45.0, 0.1)],
    };
    let crit = RefinementCriteria {
        wave_tolerance: Some(0.01),
        regions: vec![region((-0.5, 0.5), (20.5, 21.5), 2)],
        ..Default::default()
    };
    let mut h = build(spec(24, 24, &[2, 4], crit), bathy);
    h.initialize_with(|_, _, b| ((-b).max(0.0), 0.0, 0.0)).unwrap();
    assert!(h.levels.len() >= 2);
    for _ in 0..12 {
        h.step(f64::INFINITY).unwrap();
    }
    assert!(h.diagnostics.regrids >= 2);
    let (eta, mom) = max_deviation(&h);
    assert!(eta < 1e-10, "eta deviation {eta}");
    assert!(mom < 1e-10, "momentum {mom}");
}

fn dam_break(reflux: RefluxMode, steps: usize) -> f64 {
    let crit = RefinementCriteria { regions: vec![region((-0.4, 0.4), (20.6, 21.4), 2)], ..Default::default() };
    let mut s = spec(24, 24, &[2], crit);
    s.settings.reflux = reflux;
    let mut h = build(s, AnalyticBathymetry::Constant { value: -10.0 });
    h.initialize_with(|lon, lat, b| {
        let r = lon.hypot(lat - 21.0);
        (if r < 0.2 { 3.0 - b } else { 1.0 - b }, 0.0, 0.0)
    })
    .unwrap();
    assert_eq!(h.levels.len(), 2);
    let m0 = h.composite_mass();
    for _ in 0..steps {
        h.step(f64::INFINITY).unwrap();
    }
    ((h.composite_mass() - m0) / m0).abs()
}

#[test]
fn refluxing_conserves_mass() {
    let with = dam_break(RefluxMode::All, 40);
    let without = dam_break(RefluxMode::Off, 40);
    assert!(with < 1e-12, "drift with reflux {with}");
    assert!(without > 1e3 * with.max(1e-16), "drift without reflux {without}");
}

#[test]
fn gauges_record_finest_level() {
    let mut s = spec(20, 20, &[2, 2], forced(3));
    s.gauges = vec![Gauge { id: 0, lon: 0.01, lat: 21.01 }, Gauge { id: 1, lon: -0.9, lat: 20.1 }];
    let mut h = build(s, AnalyticBathymetry::Constant { value: -100.0 });
    h.initialize_with(|_, _, b| (-b, 0.0, 0.0)).unwrap();
    for _ in 0..3 {
        h.step(f64::INFINITY).unwrap();
    }
    let g0 = &h.gauge_records[0];
    let g1 = &h.gauge_records[1];
    assert!(g0.iter().all(|r| r.level == 3));
    assert!(g1.iter().all(|r| r.level == 1));
    assert_eq!(g1.len(), 4);
    assert!(g0.len() > g1.len());
    assert!(g0.windows(2).all(|w| w[1].t > w[0].t));
    assert!(g0.iter().all(|r| r.eta.abs() < 1e-12));
}

#[test]
fn ghost_copy_is_exact() {
    let mut s = spec(20, 20, &[], RefinementCriteria::default());
    s.settings.max_patch_size = 8;
    let mut h = build(s, AnalyticBathymetry::Constant { value: -10.0 });
    h.initialize_with(|lon, lat, b| (-b + lon * lat, lon, lat)).unwrap();
    h.fill_ghosts(0, 0.0).unwrap();
    let level = &h.levels[0];
    assert!(level.patches.len() > 1);
    for p in &level.patches {
        for j in -2..p.ny() as isize + 2 {
            for i in -2..p.nx() as isize + 2 {
                let (gi, gj) = (p.rect.ilo + i as i64, p.rect.jlo + j as i64);
                if p.is_interior(i, j) || !level.extent.contains(gi, gj) {
                    continue;
                }
                let q = &level.patches[level.find(gi, gj).unwrap()];
                let (qi, qj) = q.local(gi, gj);
                assert_eq!(p.h[p.idx(i, j)], q.h[q.idx(qi, qj)]);
                assert_eq!(p.hv[p.idx(i, j)], q.hv[q.idx(qi, qj)]);
            }
        }
    }
}
