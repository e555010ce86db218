//! Sea-surface based prolongation from a coarse level and averaging of fine
//! data back onto it.

use crate::grid::{IndexBox, Patch, PhysConfig};

/// Time-interpolated coarse cell.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CoarseCell {
    pub h: f64,
    pub hu: f64,
    pub hv: f64,
    pub b: f64,
}

impl CoarseCell {
    fn wet(&self, phys: &PhysConfig) -> bool {
        self.h >= phys.dry_tolerance
    }

    fn eta(&self, phys: &PhysConfig) -> f64 {
        if self.wet(phys) {
            self.h + self.b
        } else {
            phys.sea_level
        }
    }

    fn velocity(&self, phys: &PhysConfig) -> (f64, f64) {
        if self.wet(phys) {
            (self.hu / self.h, self.hv / self.h)
        } else {
            (0.0, 0.0)
        }
    }
}

/// Read access to one coarse level blended between its old and new states
/// (`alpha = 1` is the current state).
pub struct CoarseView<'a> {
    patches: Vec<&'a Patch>,
    alpha: f64,
}

impl<'a> CoarseView<'a> {
    /// Patches of `level` that intersect `region` (coarse index space).
    pub fn new(level: &'a [Patch], region: &IndexBox, alpha: f64) -> Self {
        let patches = level.iter().filter(|p| p.rect.intersect(region).is_some()).collect();
        Self { patches, alpha }
    }

    pub fn cell(&self, gi: i64, gj: i64) -> Option<CoarseCell> {
        let p = self.patches.iter().find(|p| p.rect.contains(gi, gj))?;
        let (i, j) = p.local(gi, gj);
        let k = p.idx(i, j);
        let a = self.alpha;
        let blend = |old: f64, new: f64| if a == 1.0 { new } else { (1.0 - a) * old + a * new };
        Some(CoarseCell {
            h: blend(p.old_h[k], p.h[k]),
            hu: blend(p.old_hu[k], p.hu[k]),
            hv: blend(p.old_hv[k], p.hv[k]),
            b: p.b[k],
        })
    }
}

fn minmod(a: f64, b: f64) -> f64 {
    if a * b <= 0.0 {
        0.0
    } else if a.abs() < b.abs() {
        a
    } else {
        b
    }
}

/// Limited slope from the two one-sided differences; a missing neighbour
/// gives a zero slope.
fn slope(lo: Option<f64>, c: f64, hi: Option<f64>) -> f64 {
    match (lo, hi) {
        (Some(l), Some(h)) => minmod(h - c, c - l),
        _ => 0.0,
    }
}

/// Prolongation stencil around coarse cell `(ci, cj)`.
pub struct Stencil {
    pub center: CoarseCell,
    eta: f64,
    u: f64,
    v: f64,
    eta_slope: (f64, f64),
    u_slope: (f64, f64),
    v_slope: (f64, f64),
    pub u_range: (f64, f64),
    pub v_range: (f64, f64),
}

impl Stencil {
    pub fn build(view: &CoarseView<'_>, ci: i64, cj: i64, phys: &PhysConfig) -> Option<Self> {
        let center = view.cell(ci, cj)?;
        let nb = [view.cell(ci - 1, cj), view.cell(ci + 1, cj), view.cell(ci, cj - 1), view.cell(ci, cj + 1)];
        let any_dry = !center.wet(phys) || nb.iter().flatten().any(|c| !c.wet(phys));
        let eta = center.eta(phys);
        let (u, v) = center.velocity(phys);
        let mut u_range = (u, u);
        let mut v_range = (v, v);
        for c in nb.iter().flatten() {
            let (cu, cv) = c.velocity(phys);
            u_range = (u_range.0.min(cu), u_range.1.max(cu));
            v_range = (v_range.0.min(cv), v_range.1.max(cv));
        }
        let mut st = Stencil {
            center,
            eta,
            u,
            v,
            eta_slope: (0.0, 0.0),
            u_slope: (0.0, 0.0),
            v_slope: (0.0, 0.0),
            u_range,
            v_range,
        };
        if !any_dry {
            let e = |c: &Option<CoarseCell>| c.map(|c| c.eta(phys));
            let uu = |c: &Option<CoarseCell>| c.map(|c| c.velocity(phys).0);
            let vv = |c: &Option<CoarseCell>| c.map(|c| c.velocity(phys).1);
            st.eta_slope = (slope(e(&nb[0]), eta, e(&nb[1])), slope(e(&nb[2]), eta, e(&nb[3])));
            st.u_slope = (slope(uu(&nb[0]), u, uu(&nb[1])), slope(uu(&nb[2]), u, uu(&nb[3])));
            st.v_slope = (slope(vv(&nb[0]), v, vv(&nb[1])), slope(vv(&nb[2]), v, vv(&nb[3])));
        }
        Some(st)
    }

    /// Fine state at offset `(xi, zeta)` from the coarse centre, in coarse
    /// cell units, over bathymetry `b`.
    pub fn sample(&self, xi: f64, zeta: f64, b: f64, phys: &PhysConfig) -> (f64, f64, f64) {
        let eta = self.eta + xi * self.eta_slope.0 + zeta * self.eta_slope.1;
        let h = (eta - b).max(0.0);
        if h < phys.dry_tolerance {
            return (h, 0.0, 0.0);
        }
        let u = self.u + xi * self.u_slope.0 + zeta * self.u_slope.1;
        let v = self.v + xi * self.v_slope.0 + zeta * self.v_slope.1;
        (h, h * u, h * v)
    }
}

/// Offset of fine index `g` within its coarse cell, in coarse units.
pub fn offset(g: i64, r: i64) -> f64 {
    (g.rem_euclid(r) as f64 + 0.5) / r as f64 - 0.5
}

/// Fill fine cells `(i, j)` (local, interior or ghost) of `fine` from the
/// coarse view. Returns `false` if a coarse cell is missing.
pub fn prolong_cell(
    fine: &mut Patch,
    view: &CoarseView<'_>,
    i: isize,
    j: isize,
    ratio: (i64, i64),
    phys: &PhysConfig,
) -> bool {
    let gi = fine.rect.ilo + i as i64;
    let gj = fine.rect.jlo + j as i64;
    let Some(st) = Stencil::build(view, gi.div_euclid(ratio.0), gj.div_euclid(ratio.1), phys) else {
        return false;
    };
    let k = fine.idx(i, j);
    let (h, hu, hv) = st.sample(offset(gi, ratio.0), offset(gj, ratio.1), fine.b[k], phys);
    fine.h[k] = h;
    fine.hu[k] = hu;
    fine.hv[k] = hv;
    true
}

/// Prolong every child of coarse cell `(ci, cj)` inside `fine`, then restore
/// the coarse mass (and momentum when it creates no new velocity extrema)
/// where the coarse cell and all children are wet and the bathymetry is
/// refinement-consistent. Returns `false` if the coarse cell is missing.
pub fn prolong_block(
    fine: &mut Patch,
    view: &CoarseView<'_>,
    ci: i64,
    cj: i64,
    ratio: (i64, i64),
    phys: &PhysConfig,
) -> bool {
    let Some(st) = Stencil::build(view, ci, cj, phys) else {
        return false;
    };
    let (rx, ry) = ratio;
    let mut cells = Vec::with_capacity((rx * ry) as usize);
    for fj in cj * ry..(cj + 1) * ry {
        for fi in ci * rx..(ci + 1) * rx {
            let (i, j) = fine.local(fi, fj);
            let k = fine.idx(i, j);
            let (h, hu, hv) = st.sample(offset(fi, rx), offset(fj, ry), fine.b[k], phys);
            fine.h[k] = h;
            fine.hu[k] = hu;
            fine.hv[k] = hv;
            cells.push((k, fine.cell_area(j)));
        }
    }
    let c = st.center;
    if c.h < phys.dry_tolerance || cells.iter().any(|&(k, _)| fine.h[k] < phys.dry_tolerance) {
        return true;
    }
    let area_c: f64 = cells.iter().map(|&(_, a)| a).sum();
    let b_fine: f64 = cells.iter().map(|&(k, a)| fine.b[k] * a).sum::<f64>() / area_c;
    if (b_fine - c.b).abs() > 1e-10 * c.b.abs().max(1.0) {
        return true;
    }
    let total = |v: &[f64]| cells.iter().map(|&(k, a)| v[k] * a).sum::<f64>();
    let dh = c.h - total(&fine.h) / area_c;
    if cells.iter().any(|&(k, _)| fine.h[k] + dh < phys.dry_tolerance) {
        return true;
    }
    for &(k, _) in &cells {
        fine.h[k] += dh;
    }
    let dhu = c.hu - total(&fine.hu) / area_c;
    let dhv = c.hv - total(&fine.hv) / area_c;
    let within = |x: f64, r: (f64, f64)| x >= r.0 - 1e-14 * r.0.abs() && x <= r.1 + 1e-14 * r.1.abs();
    let ok = cells.iter().all(|&(k, _)| {
        let h = fine.h[k];
        within((fine.hu[k] + dhu) / h, st.u_range) && within((fine.hv[k] + dhv) / h, st.v_range)
    });
    if ok {
        for &(k, _) in &cells {
            fine.hu[k] += dhu;
            fine.hv[k] += dhv;
        }
    }
    true
}

/// Average the children of coarse cell `(ci, cj)` in `fine` into the
/// coarse cell at flat index `kc` of `coarse`.
pub fn coarsen_cell(coarse: &mut Patch, kc: usize, fine: &Patch, ci: i64, cj: i64, ratio: (i64, i64), phys: &PhysConfig) {
    let (rx, ry) = ratio;
    let (mut area, mut mass, mut mx, mut my) = (0.0, 0.0, 0.0, 0.0);
    let (mut wet_area, mut wet_eta, mut wet_u, mut wet_v) = (0.0, 0.0, 0.0, 0.0);
    let mut all_wet = true;
    for fj in cj * ry..(cj + 1) * ry {
        let (_, j) = fine.local(0, fj);
        let a = fine.cell_area(j);
        for fi in ci * rx..(ci + 1) * rx {
            let (i, _) = fine.local(fi, fj);
            let k = fine.idx(i, j);
            let h = fine.h[k];
            area += a;
            mass += a * h;
            mx += a * fine.hu[k];
            my += a * fine.hv[k];
            if h >= phys.dry_tolerance {
                wet_area += a;
                wet_eta += a * (h + fine.b[k]);
                wet_u += a * fine.hu[k] / h;
                wet_v += a * fine.hv[k] / h;
            } else {
                all_wet = false;
            }
        }
    }
    if all_wet || wet_area == 0.0 {
        coarse.h[kc] = mass / area;
        coarse.hu[kc] = mx / area;
        coarse.hv[kc] = my / area;
    } else {
        let h = (wet_eta / wet_area - coarse.b[kc]).max(0.0);
        coarse.h[kc] = h;
        coarse.hu[kc] = h * wet_u / wet_area;
        coarse.hv[kc] = h * wet_v / wet_area;
    }
    if coarse.h[kc] < phys.dry_tolerance {
        coarse.hu[kc] = 0.0;
        coarse.hv[kc] = 0.0;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const R: f64 = 6.367e6;

    fn coarse_patch() -> Patch {
        let mut p = Patch::new(0, IndexBox::new(0, 0, 4, 4), 0.2, 0.2, -90.0, 20.0, R);
        p.b.iter_mut().for_each(|b| *b = -10.0);
        p
    }

    #[test]
    fn lake_at_rest_prolongs_exactly() {
        let phys = PhysConfig::default();
        let mut c = coarse_patch();
        for (k, b) in c.b.iter_mut().enumerate() {
            *b = -10.0 + (k % 5) as f64;
        }
        crate::grid::initialize_lake_at_rest(&mut c, 0.0);
        let level = vec![c];
        let view = CoarseView::new(&level, &IndexBox::new(0, 0, 4, 4), 1.0);
        let mut f = Patch::new(1, IndexBox::new(2, 2, 4, 4), 0.1, 0.1, -90.0, 20.0, R);
        for (k, b) in f.b.iter_mut().enumerate() {
            *b = -12.0 + (k % 7) as f64 * 2.0;
        }
        for j in 0..4isize {
            for i in 0..4isize {
                assert!(prolong_cell(&mut f, &view, i, j, (2, 2), &phys));
                let k = f.idx(i, j);
                assert_eq!(f.h[k], (-f.b[k]).max(0.0));
                assert_eq!(f.hu[k], 0.0);
            }
        }
    }

    #[test]
    fn linear_surface_reproduced_with_mass() {
        let phys = PhysConfig::default();
        let mut c = coarse_patch();
        for j in -2..6isize {
            for i in -2..6isize {
                let k = c.idx(i, j);
                c.h[k] = 10.0 + 0.1 * i as f64 + 0.05 * j as f64;
            }
        }
        let level = vec![c.clone()];
        let view = CoarseView::new(&level, &IndexBox::new(0, 0, 4, 4), 1.0);
        let mut f = Patch::new(1, IndexBox::new(2, 2, 4, 4), 0.1, 0.1, -90.0, 20.0, R);
        f.b.iter_mut().for_each(|b| *b = -10.0);
        for cj in 1..3 {
            for ci in 1..3 {
                assert!(prolong_block(&mut f, &view, ci, cj, (2, 2), &phys));
            }
        }
        // plane reproduced (up to the tiny mass correction)
        let k = f.idx(0, 0);
        assert!((f.h[k] - (10.0 + 0.1 * 0.75 + 0.05 * 0.75)).abs() < 1e-5, "{}", f.h[k]);
        let fine_mass = f.mass();
        let coarse_mass: f64 = (1..3).flat_map(|j| (1..3).map(move |i| (i, j))).map(|(i, j)| c.h[c.idx(i, j)] * c.cell_area(j)).sum();
        assert!(((fine_mass - coarse_mass) / coarse_mass).abs() < 1e-14);
    }

    #[test]
    fn dry_child_is_dry() {
        let phys = PhysConfig::default();
        let mut c = coarse_patch();
        crate::grid::initialize_lake_at_rest(&mut c, 0.0);
        let level = vec![c];
        let view = CoarseView::new(&level, &IndexBox::new(0, 0, 4, 4), 1.0);
        let mut f = Patch::new(1, IndexBox::new(2, 2, 2, 2), 0.1, 0.1, -90.0, 20.0, R);
        f.b.iter_mut().for_each(|b| *b = -13.0);
        let k = f.idx(0, 0);
        f.b[k] = 1.0;
        assert!(prolong_block(&mut f, &view, 1, 1, (2, 2), &phys));
        assert_eq!(f.h[k], 0.0);
    }

    #[test]
    fn no_new_extrema() {
        let phys = PhysConfig::default();
        let mut c = coarse_patch();
        let vals = [1.0, 5.0, 2.0, 8.0];
        for j in -2..6isize {
            for i in -2..6isize {
                let k = c.idx(i, j);
                c.h[k] = 10.0 + vals[(i.rem_euclid(4)) as usize] + vals[(j.rem_euclid(4)) as usize];
                c.hu[k] = c.h[k] * vals[((i + j).rem_euclid(4)) as usize];
            }
        }
        let level = vec![c.clone()];
        let view = CoarseView::new(&level, &IndexBox::new(0, 0, 4, 4), 1.0);
        let mut f = Patch::new(1, IndexBox::new(2, 2, 4, 4), 0.1, 0.1, -90.0, 20.0, R);
        f.b.iter_mut().for_each(|b| *b = -10.0);
        for j in 0..4isize {
            for i in 0..4isize {
                prolong_cell(&mut f, &view, i, j, (2, 2), &phys);
                let (ci, cj) = ((2 + i as i64) / 2, (2 + j as i64) / 2);
                let near: Vec<CoarseCell> = [(0, 0), (1, 0), (-1, 0), (0, 1), (0, -1)]
                    .iter()
                    .filter_map(|(a, b)| view.cell(ci + a, cj + b))
                    .collect();
                let etas: Vec<f64> = near.iter().map(|c| c.h + c.b).collect();
                let us: Vec<f64> = near.iter().map(|c| c.hu / c.h).collect();
                let k = f.idx(i, j);
                let (eta, u) = (f.h[k] + f.b[k], f.hu[k] / f.h[k]);
                assert!(eta <= etas.iter().cloned().fold(f64::MIN, f64::max) + 1e-12);
                assert!(eta >= etas.iter().cloned().fold(f64::MAX, f64::min) - 1e-12);
                assert!(u <= us.iter().cloned().fold(f64::MIN, f64::max) + 1e-12);
                assert!(u >= us.iter().cloned().fold(f64::MAX, f64::min) - 1e-12);
            }
        }
    }

    #[test]
    fn coarsening_rules() {
        let phys = PhysConfig::default();
        let mut f = Patch::new(1, IndexBox::new(0, 0, 2, 2), 0.1, 0.1, -90.0, 20.0, R);
        f.b.iter_mut().for_each(|b| *b = -5.0);
        let vals = [3.0, 4.0, 5.5, 6.25];
        for (n, (i, j)) in [(0, 0), (1, 0), (0, 1), (1, 1)].into_iter().enumerate() {
            let k = f.idx(i, j);
            f.h[k] = vals[n];
            f.hu[k] = vals[n] * 0.5;
        }
        let mut c = Patch::new(0, IndexBox::new(0, 0, 1, 1), 0.2, 0.2, -90.0, 20.0, R);
        c.b.iter_mut().for_each(|b| *b = -5.0);
        let kc = c.idx(0, 0);
        coarsen_cell(&mut c, kc, &f, 0, 0, (2, 2), &phys);
        assert!(((c.mass() - f.mass()) / f.mass()).abs() < 1e-15);
        // all dry
        f.h.iter_mut().for_each(|h| *h = 0.0);
        f.hu.iter_mut().for_each(|h| *h = 0.0);
        coarsen_cell(&mut c, kc, &f, 0, 0, (2, 2), &phys);
        assert_eq!(c.h[kc], 0.0);
        // uniform
        f.h.iter_mut().for_each(|h| *h = 2.0);
        f.hu.iter_mut().for_each(|h| *h = 1.0);
        coarsen_cell(&mut c, kc, &f, 0, 0, (2, 2), &phys);
        assert!((c.h[kc] - 2.0).abs() < 1e-15 && (c.hu[kc] - 1.0).abs() < 1e-15);
        // partly dry: wet-area surface
        let k = f.idx(1, 1);
        f.b[k] = 3.0;
        f.h[k] = 0.0;
        f.hu[k] = 0.0;
        coarsen_cell(&mut c, kc, &f, 0, 0, (2, 2), &phys);
        assert!((c.h[kc] - 2.0).abs() < 1e-12);
        assert!((c.hu[kc] - 1.0).abs() < 1e-12);
    }
}
