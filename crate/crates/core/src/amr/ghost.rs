//! Ghost cells: same-level copy, then space-time interpolation from the
//! parent level, then physical boundary conditions.

use rayon::prelude::*;

use super::interp::{offset, CoarseView, Stencil};
use super::Hierarchy;
use crate::error::{Result, SurgeError};
use crate::grid::{fill_physical_ghosts, Patch, NGHOST};

/// Source of one ghost value.
enum Fill {
    Copy(usize, usize),
    Parent,
    Physical,
}

impl Hierarchy {
    /// Fill the ghost frame of every patch on level `l` at time `t`.
    pub(crate) fn fill_ghosts(&mut self, l: usize, t: f64) -> Result<()> {
        let (before, rest) = self.levels.split_at_mut(l);
        let level = &mut rest[0];
        let extent = level.extent;
        let parent = before.last();
        let alpha = parent.map_or(1.0, |p| {
            if p.t_new == p.t_old {
                1.0
            } else {
                ((t - p.t_old) / (p.t_new - p.t_old)).clamp(0.0, 1.0)
            }
        });
        let ratio = if l > 0 { self.settings.ratio(l - 1) } else { (1, 1) };
        let phys = &self.phys;
        let patches = &level.patches;
        let g = NGHOST as isize;
        // compute every ghost value from the unmodified level, then write
        let updates: Vec<Result<Vec<(usize, [f64; 3])>>> = patches
            .par_iter()
            .enumerate()
            .map(|(pi, p)| {
                let view = parent.map(|par| CoarseView::new(&par.patches, &p.rect.grow(g as i64).coarsen(ratio.0, ratio.1).grow(1), alpha));
                let mut out = Vec::new();
                for j in -g..p.ny() as isize + g {
                    for i in -g..p.nx() as isize + g {
                        if p.is_interior(i, j) {
                            continue;
                        }
                        let gi = p.rect.ilo + i as i64;
                        let gj = p.rect.jlo + j as i64;
                        let fill = if !extent.contains(gi, gj) {
                            Fill::Physical
                        } else if let Some(q) = patches.iter().enumerate().position(|(qi, q)| qi != pi && q.rect.contains(gi, gj)) {
                            let (qi, qj) = patches[q].local(gi, gj);
                            Fill::Copy(q, patches[q].idx(qi, qj))
                        } else if view.is_some() {
                            Fill::Parent
                        } else {
                            return Err(SurgeError::Nesting { level: l + 1, i: gi, j: gj });
                        };
                        let k = p.idx(i, j);
                        match fill {
                            Fill::Physical => {}
                            Fill::Copy(q, kq) => {
                                let q = &patches[q];
                                out.push((k, [q.h[kq], q.hu[kq], q.hv[kq]]));
                            }
                            Fill::Parent => {
                                let view = view.as_ref().expect("parent view");
                                let st = Stencil::build(view, gi.div_euclid(ratio.0), gj.div_euclid(ratio.1), phys)
                                    .ok_or(SurgeError::Nesting { level: l + 1, i: gi, j: gj })?;
                                let (h, hu, hv) = st.sample(offset(gi, ratio.0), offset(gj, ratio.1), p.b[k], phys);
                                out.push((k, [h, hu, hv]));
                            }
                        }
                    }
                }
                Ok(out)
            })
            .collect();
        let bcs = &self.bcs;
        let updates = updates.into_iter().collect::<Result<Vec<_>>>()?;
        level.patches.par_iter_mut().zip(updates).for_each(|(p, upd): (&mut Patch, _)| {
            for (k, [h, hu, hv]) in upd {
                p.h[k] = h;
                p.hu[k] = hu;
                p.hv[k] = hv;
            }
            fill_physical_ghosts(p, &extent, bcs, phys);
        });
        Ok(())
    }
}
