//! Coarse-fine synchronisation: boundary flux registers, averaging fine data
//! onto covered coarse cells, and refluxing.

use rayon::prelude::*;

use super::interp::coarsen_cell;
use super::{Hierarchy, RefluxMode};
use crate::grid::Patch;

/// Side of a fine patch.
#[derive(Clone, Copy)]
enum Side {
    West,
    East,
    South,
    North,
}

impl Hierarchy {
    /// Add `dt` times this step's boundary face fluxes to the registers of
    /// level `l`.
    pub(crate) fn accumulate_registers(&mut self, l: usize, dt: f64) {
        if l == 0 {
            return;
        }
        self.levels[l].patches.par_iter_mut().for_each(|p| {
            let (nx, ny) = (p.nx(), p.ny());
            let add = |acc: &mut [f64; 3], f: &[f64; 3]| {
                for c in 0..3 {
                    acc[c] += dt * f[c];
                }
            };
            for j in 0..ny {
                add(&mut p.register.west[j], &p.fluxes.x_lo[j * (nx + 1)]);
                add(&mut p.register.east[j], &p.fluxes.x_hi[j * (nx + 1) + nx]);
            }
            for i in 0..nx {
                add(&mut p.register.south[i], &p.fluxes.y_lo[i]);
                add(&mut p.register.north[i], &p.fluxes.y_hi[ny * nx + i]);
            }
        });
    }

    /// Overwrite level `l - 1` cells covered by level `l` with averages of
    /// their children.
    pub(crate) fn average_down(&mut self, l: usize) {
        let ratio = self.settings.ratio(l - 1);
        let (coarse, fine) = self.levels.split_at_mut(l);
        let coarse = &mut coarse[l - 1];
        let fine = &fine[0];
        let phys = &self.phys;
        coarse.patches.par_iter_mut().for_each(|cp| {
            for fp in &fine.patches {
                let Some(bx) = fp.rect.coarsen(ratio.0, ratio.1).intersect(&cp.rect) else {
                    continue;
                };
                for cj in bx.jlo..bx.jhi() {
                    for ci in bx.ilo..bx.ihi() {
                        let (i, j) = cp.local(ci, cj);
                        let kc = cp.idx(i, j);
                        coarsen_cell(cp, kc, fp, ci, cj, ratio, phys);
                    }
                }
            }
        });
    }

    /// Correct level `l - 1` cells next to level `l` so the coarse update
    /// uses the fine fluxes through their shared faces.
    pub(crate) fn reflux(&mut self, l: usize, dt_coarse: f64) {
        let mode = self.settings.reflux;
        if mode == RefluxMode::Off {
            return;
        }
        let ncomp = if mode == RefluxMode::MassOnly { 1 } else { 3 };
        let (rx, ry) = self.settings.ratio(l - 1);
        let dry = self.phys.dry_tolerance;
        let (coarse, fine) = self.levels.split_at_mut(l);
        let coarse = &mut coarse[l - 1];
        let fine = &fine[0];
        let extent = coarse.extent;
        let covered: Vec<_> = fine.patches.iter().map(|p| p.rect.coarsen(rx, ry)).collect();
        let is_covered = |ci: i64, cj: i64| covered.iter().any(|r| r.contains(ci, cj));
        let mut lost_mass = 0.0;
        // corrections in a fixed order: fine patch, side, segment
        let mut corrections: Vec<(usize, usize, [f64; 3], f64)> = Vec::new();
        for fp in &fine.patches {
            let crect = fp.rect.coarsen(rx, ry);
            for side in [Side::West, Side::East, Side::South, Side::North] {
                let (segments, fine_per) = match side {
                    Side::West | Side::East => (crect.ny, ry),
                    Side::South | Side::North => (crect.nx, rx),
                };
                for s in 0..segments {
                    let (ci, cj, sign) = match side {
                        Side::West => (crect.ilo - 1, crect.jlo + s, 1.0),
                        Side::East => (crect.ihi(), crect.jlo + s, -1.0),
                        Side::South => (crect.ilo + s, crect.jlo - 1, 1.0),
                        Side::North => (crect.ilo + s, crect.jhi(), -1.0),
                    };
                    if !extent.contains(ci, cj) || is_covered(ci, cj) {
                        continue;
                    }
                    let Some(pc) = coarse.find(ci, cj) else { continue };
                    let cp = &coarse.patches[pc];
                    let (i, j) = cp.local(ci, cj);
                    let (nx, iu, ju) = (cp.nx(), i as usize, j as usize);
                    // coarse flux through the shared face, seen from the outside cell
                    let fc = match side {
                        Side::West => cp.fluxes.x_lo[ju * (nx + 1) + iu + 1],
                        Side::East => cp.fluxes.x_hi[ju * (nx + 1) + iu],
                        Side::South => cp.fluxes.y_lo[(ju + 1) * nx + iu],
                        Side::North => cp.fluxes.y_hi[ju * nx + iu],
                    };
                    let mut ff = [0.0; 3];
                    for m in 0..fine_per {
                        let f = match side {
                            Side::West => fp.register.west[(s * ry + m) as usize],
                            Side::East => fp.register.east[(s * ry + m) as usize],
                            Side::South => fp.register.south[(s * rx + m) as usize],
                            Side::North => fp.register.north[(s * rx + m) as usize],
                        };
                        for c in 0..3 {
                            ff[c] += f[c];
                        }
                    }
                    let area = cp.cell_area(j);
                    let mut delta = [0.0; 3];
                    for c in 0..ncomp {
                        delta[c] = sign * (dt_coarse * fc[c] - ff[c]) / area;
                    }
                    let k = cp.idx(i, j);
                    if cp.h[k] < dry {
                        lost_mass += delta[0] * area;
                        continue;
                    }
                    corrections.push((pc, k, delta, area));
                }
            }
        }
        for (pc, k, delta, area) in corrections {
            let p: &mut Patch = &mut coarse.patches[pc];
            let h = p.h[k] + delta[0];
            if h < 0.0 {
                lost_mass += h * area;
            }
            p.h[k] = h.max(0.0);
            p.hu[k] += delta[1];
            p.hv[k] += delta[2];
            if p.h[k] < dry {
                p.hu[k] = 0.0;
                p.hv[k] = 0.0;
            }
        }
        let t = coarse.t_new;
        self.diagnostics.log_mass(t, -lost_mass);
    }
}
