use serde::{Deserialize, Serialize};

use super::{IndexBox, Patch, PhysConfig, NGHOST};


#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryKind {
    /// Zero-order extrapolation of surface elevation and velocity.
    Outflow,
    /// Reflecting wall: mirrored state with normal momentum negated.
    Wall,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundaryConditions {
    pub west: BoundaryKind,
    pub east: BoundaryKind,
    pub south: BoundaryKind,
    pub north: BoundaryKind,
}

impl BoundaryConditions {
    pub fn all(kind: BoundaryKind) -> Self {
        Self { west: kind, east: kind, south: kind, north: kind }
    }
}

impl Default for BoundaryConditions {
    fn default() -> Self {
        Self::all(BoundaryKind::Outflow)
    }
}

fn fill_cell(patch: &mut Patch, ghost: (isize, isize), src: (isize, isize), kind: BoundaryKind, normal_x: bool, phys: &PhysConfig) {
    let kg = patch.idx(ghost.0, ghost.1);
    let ks = patch.idx(src.0, src.1);
    match kind {
        BoundaryKind::Wall => {
            patch.h[kg] = patch.h[ks];
            patch.hu[kg] = patch.hu[ks];
            patch.hv[kg] = patch.hv[ks];
            if normal_x {
                patch.hu[kg] = -patch.hu[kg];
            } else {
                patch.hv[kg] = -patch.hv[kg];
            }
        }
        BoundaryKind::Outflow => {
            let h = patch.h[ks];
            if h < phys.dry_tolerance {
                patch.h[kg] = 0.0;
                patch.hu[kg] = 0.0;
                patch.hv[kg] = 0.0;
            } else {
                let hg = (h + patch.b[ks] - patch.b[kg]).max(0.0);
                patch.h[kg] = hg;
                patch.hu[kg] = hg * patch.hu[ks] / h;
                patch.hv[kg] = hg * patch.hv[ks] / h;
            }
        }
    }
}

/// Source index for a ghost index `g` outside `[lo, hi)`.
fn source_index(g: i64, lo: i64, hi: i64, kind_lo: BoundaryKind, kind_hi: BoundaryKind) -> Option<(i64, BoundaryKind)> {
    if g < lo {
        Some(match kind_lo {
            BoundaryKind::Wall => ((2 * lo - 1 - g).min(hi - 1), kind_lo),
            BoundaryKind::Outflow => (lo, kind_lo),
        })
    } else if g >= hi {
        Some(match kind_hi {
            BoundaryKind::Wall => ((2 * hi - 1 - g).max(lo), kind_hi),
            BoundaryKind::Outflow => (hi - 1, kind_hi),
        })
    } else {
        None
    }
}

/// Fill every frame cell of `patch` that lies outside `domain` (the level's
/// index box) from cells inside it. Cells outside in x are filled first,
/// then cells outside in y, so domain corners are set consistently. Frame
/// cells inside the domain must already hold valid data.
pub fn fill_physical_ghosts(patch: &mut Patch, domain: &IndexBox, bcs: &BoundaryConditions, phys: &PhysConfig) {
    let g = NGHOST as isize;
    let (nx, ny) = (patch.nx() as isize, patch.ny() as isize);
    let r = patch.rect;
    if r.ilo - (g as i64) >= domain.ilo
        && r.ihi() + (g as i64) <= domain.ihi()
        && r.jlo - (g as i64) >= domain.jlo
        && r.jhi() + (g as i64) <= domain.jhi()
    {
        return;
    }
    for j in -g..ny + g {
        let gj = r.jlo + j as i64;
        if gj < domain.jlo || gj >= domain.jhi() {
            continue;
        }
        for i in -g..nx + g {
            let gi = r.ilo + i as i64;
            if let Some((src, kind)) = source_index(gi, domain.ilo, domain.ihi(), bcs.west, bcs.east) {
                fill_cell(patch, (i, j), ((src - r.ilo) as isize, j), kind, true, phys);
            }
        }
    }
    for j in -g..ny + g {
        let gj = r.jlo + j as i64;
        if let Some((src, kind)) = source_index(gj, domain.jlo, domain.jhi(), bcs.south, bcs.north) {
            for i in -g..nx + g {
                fill_cell(patch, (i, j), (i, (src - r.jlo) as isize), kind, false, phys);
            }
        }
    }
}
