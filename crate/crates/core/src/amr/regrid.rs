//! Rebuilding the finer levels from refinement flags.

use rayon::prelude::*;

use super::cluster::{chop, cluster_flags, Mask};
use super::criteria::flag_cells;
use super::interp::{prolong_block, prolong_cell, CoarseView};
use super::{Hierarchy, Level};
use crate::error::Result;
use crate::grid::{IndexBox, Patch};
use crate::sources::manning_field;

/// Bounding box of a set of rectangles.
fn hull(rects: impl Iterator<Item = IndexBox>) -> Option<IndexBox> {
    rects.fold(None, |acc: Option<IndexBox>, r| {
        Some(match acc {
            None => r,
            Some(a) => {
                let (ilo, jlo) = (a.ilo.min(r.ilo), a.jlo.min(r.jlo));
                let (ihi, jhi) = (a.ihi().max(r.ihi()), a.jhi().max(r.jhi()));
                IndexBox::new(ilo, jlo, ihi - ilo, jhi - jlo)
            }
        })
    })
}

/// Split `bx` until every piece lies inside `allowed`; pieces without
/// flagged cells are dropped.
fn fit(bx: IndexBox, flags: &Mask, allowed: &Mask, out: &mut Vec<IndexBox>) {
    if flags.cells_in(&bx) == 0 {
        return;
    }
    if allowed.cells_in(&bx) == bx.cells() as usize {
        out.push(bx);
        return;
    }
    let (a, b) = if bx.nx >= bx.ny {
        let h = bx.nx / 2;
        (IndexBox::new(bx.ilo, bx.jlo, h, bx.ny), IndexBox::new(bx.ilo + h, bx.jlo, bx.nx - h, bx.ny))
    } else {
        let h = bx.ny / 2;
        (IndexBox::new(bx.ilo, bx.jlo, bx.nx, h), IndexBox::new(bx.ilo, bx.jlo + h, bx.nx, bx.ny - h))
    };
    for part in [a, b] {
        // shrink to the flagged cells before splitting again
        if let Some(tight) = flags_bbox(flags, &part) {
            fit(tight, flags, allowed, out);
        }
    }
}

fn flags_bbox(flags: &Mask, bx: &IndexBox) -> Option<IndexBox> {
    let b = bx.intersect(&flags.bx)?;
    let mut sub = Mask::new(b);
    for j in b.jlo..b.jhi() {
        for i in b.ilo..b.ihi() {
            sub.set(i, j, flags.get(i, j));
        }
    }
    sub.bounding_box()
}

impl Hierarchy {
    /// Rebuild levels `base + 1 ..` from flags, coarse to fine. Levels at or
    /// below `base` are untouched; all levels must be at the same time.
    pub fn regrid(&mut self, base: usize) -> Result<()> {
        let t = self.levels[base].t_new;
        let storm = self.storm_state(t)?;
        let mass_before = self.composite_mass();
        let max_levels = self.settings.max_levels;
        let old_levels: Vec<Level> = self.levels.drain(base + 1..).collect();
        for k in base..max_levels - 1 {
            let rects = self.new_rects(k, t, storm.as_ref());
            if rects.is_empty() {
                break;
            }
            let old = old_levels.get(k - base);
            let level = self.build_level(k + 1, rects, old, t)?;
            self.levels.push(level);
        }
        let delta = self.composite_mass() - mass_before;
        self.diagnostics.log_mass(t, delta);
        self.diagnostics.regrids += 1;
        Ok(())
    }

    /// Fine-level rectangles (in level `k + 1` indices) requested by level `k`.
    fn new_rects(&self, k: usize, t: f64, storm: Option<&crate::storm::StormState>) -> Vec<IndexBox> {
        let level = &self.levels[k];
        let extent = level.extent;
        let Some(cover) = hull(level.patches.iter().map(|p| p.rect)) else {
            return Vec::new();
        };
        let flags_per_patch: Vec<Vec<bool>> = level
            .patches
            .par_iter()
            .map(|p| flag_cells(p, k + 1, &self.criteria, storm, &self.phys, t, self.settings.max_levels))
            .collect();
        let mut flags = Mask::new(cover);
        for (p, f) in level.patches.iter().zip(&flags_per_patch) {
            for j in 0..p.rect.ny {
                for i in 0..p.rect.nx {
                    if f[(j * p.rect.nx + i) as usize] {
                        flags.set(p.rect.ilo + i, p.rect.jlo + j, true);
                    }
                }
            }
        }
        if flags.is_empty() {
            return Vec::new();
        }
        let grown = flags.dilate(self.settings.buffer as i64, &extent);
        // properly nested region: covered cells whose neighbours inside the
        // domain are covered too
        let region = grown.bx;
        let covered = |i: i64, j: i64| !extent.contains(i, j) || level.find(i, j).is_some();
        let mut allowed = Mask::new(region);
        let mut buffered = Mask::new(region);
        for j in region.jlo..region.jhi() {
            for i in region.ilo..region.ihi() {
                let ok = level.find(i, j).is_some()
                    && (if k == 0 { true } else { (-1..=1).all(|dj| (-1..=1).all(|di| covered(i + di, j + dj))) });
                allowed.set(i, j, ok);
                buffered.set(i, j, ok && grown.get(i, j));
            }
        }
        let (rx, ry) = self.settings.ratio(k);
        let mut rects = Vec::new();
        for bx in cluster_flags(&buffered, self.settings.min_fill) {
            let mut pieces = Vec::new();
            fit(bx, &buffered, &allowed, &mut pieces);
            // chop in coarse cells so fine patches stay aligned with coarse cells
            let coarse_max = (self.settings.max_patch_size as i64 / rx.max(ry)).max(1);
            for piece in pieces {
                rects.extend(chop(&piece, coarse_max).into_iter().map(|b| b.refine(rx, ry)));
            }
        }
        rects
    }

    /// Create level `l` (0-based) on `rects`, copying from `old` where it
    /// existed and interpolating from level `l - 1` elsewhere.
    fn build_level(&self, l: usize, rects: Vec<IndexBox>, old: Option<&Level>, t: f64) -> Result<Level> {
        let parent = &self.levels[l - 1];
        let (rx, ry) = self.settings.ratio(l - 1);
        let extent = parent.extent.refine(rx, ry);
        let (dlon, dlat) = (parent.dlon / rx as f64, parent.dlat / ry as f64);
        let phys = &self.phys;
        let patches = rects
            .into_par_iter()
            .map(|rect| {
                let mut p = Patch::new(l + 1, rect, dlon, dlat, self.domain.lon_min, self.domain.lat_min, phys.earth_radius);
                self.sampler.fill_patch(&mut p, (extent.nx, extent.ny))?;
                let view = CoarseView::new(&parent.patches, &rect.coarsen(rx, ry).grow(1), 1.0);
                let old_at = |gi: i64, gj: i64| {
                    old.and_then(|o| o.find(gi, gj).map(|q| {
                        let q = &o.patches[q];
                        let (i, j) = q.local(gi, gj);
                        let k = q.idx(i, j);
                        [q.h[k], q.hu[k], q.hv[k]]
                    }))
                };
                let crect = rect.coarsen(rx, ry);
                for cj in crect.jlo..crect.jhi() {
                    for ci in crect.ilo..crect.ihi() {
                        let children: Vec<(i64, i64)> = (cj * ry..(cj + 1) * ry)
                            .flat_map(|fj| (ci * rx..(ci + 1) * rx).map(move |fi| (fi, fj)))
                            .collect();
                        let copied: Vec<Option<[f64; 3]>> = children.iter().map(|&(fi, fj)| old_at(fi, fj)).collect();
                        if copied.iter().all(Option::is_none) {
                            prolong_block(&mut p, &view, ci, cj, (rx, ry), phys);
                            continue;
                        }
                        for (&(fi, fj), c) in children.iter().zip(copied) {
                            let (i, j) = p.local(fi, fj);
                            match c {
                                Some([h, hu, hv]) => {
                                    let k = p.idx(i, j);
                                    p.h[k] = h;
                                    p.hu[k] = hu;
                                    p.hv[k] = hv;
                                }
                                None => {
                                    prolong_cell(&mut p, &view, i, j, (rx, ry), phys);
                                }
                            }
                        }
                    }
                }
                manning_field(&mut p, &self.friction, phys.sea_level);
                p.save_old();
                Ok(p)
            })
            .collect::<Result<Vec<_>>>()?;
        let steps = old.map_or(0, |o| o.steps);
        Ok(Level { patches, extent, dlon, dlat, t_old: t, t_new: t, steps })
    }
}
