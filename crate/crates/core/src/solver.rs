//! Single-patch time integration: dimensional sweeps of the wave-propagation
//! update in capacity form, CFL time-step control and the source splitting
//! driver.
//!
//! The update of cell `c` along a line with face lengths `L` and cell area
//! `A` is
//!
//! ```text
//! Q_c -= dt/A_c [ L_{c-1/2} A⁺ΔQ_{c-1/2} + L_{c+1/2} A⁻ΔQ_{c+1/2}
//!               + L_{c+1/2} F̃_{c+1/2} - L_{c-1/2} F̃_{c-1/2}
//!               + (L_{c+1/2} - L_{c-1/2}) m(Q_c) ]
//! ```
//!
//! where `m` is the advective part of the flux (no hydrostatic pressure).
//! The last term only appears in the meridional sweep, where face lengths
//! shrink with latitude, and makes mass exactly conservative.

use crate::error::{Result, SurgeError};
use crate::grid::{fill_physical_ghosts, BoundaryConditions, IndexBox, Patch, PhysConfig, NGHOST};
use crate::riemann::{limited_waves, second_order_flux, solve_augmented, Direction, RiemannSolution, StateVector, WallSide};
use crate::sources::{apply_coriolis, apply_friction, apply_pressure, apply_wind, FrictionConfig};
use crate::storm::{evaluate_fields, StormState};

/// Courant target used to pick time steps.
pub const COURANT_TARGET: f64 = 0.9;
/// Steps whose Courant number exceeds this are rejected.
pub const COURANT_MAX: f64 = 1.0;

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct StepReport {
    pub dt_used: f64,
    pub max_courant: f64,
    pub max_speed: f64,
    pub mass_before: f64,
    pub mass_after: f64,
}

/// Advective flux `(q_n, q_n u, q_n v)` in physical component order.
fn advective_flux(q: StateVector, dir: Direction, dry_tolerance: f64) -> [f64; 3] {
    if q.h < dry_tolerance {
        return [0.0; 3];
    }
    let qn = match dir {
        Direction::X => q.hu,
        Direction::Y => q.hv,
    };
    [qn, qn * q.hu / q.h, qn * q.hv / q.h]
}

struct LineGeometry {
    /// Cell areas, one per cell of the line.
    area: Vec<f64>,
    /// `len[k]` is the length of the face between cells `k - 1` and `k`.
    len: Vec<f64>,
    /// Metric spacing used for the Courant number at face `k`.
    dx: Vec<f64>,
}

struct LineResult {
    /// Updated interior cells.
    q: Vec<StateVector>,
    /// Length-weighted fluxes for the `n + 1` faces bounding the interior.
    lo: Vec<[f64; 3]>,
    hi: Vec<[f64; 3]>,
    max_courant: f64,
    max_speed: f64,
}

#[allow(clippy::too_many_arguments)]
fn sweep_line(
    q: &[StateVector],
    b: &[f64],
    geo: &LineGeometry,
    dir: Direction,
    dt: f64,
    phys: &PhysConfig,
    check_cfl: bool,
) -> Result<LineResult> {
    let m = q.len();
    let g = NGHOST;
    let n = m - 2 * g;
    let mut sols = vec![RiemannSolution::zero(); m + 1];
    for k in 1..m {
        sols[k] = solve_augmented(q[k - 1], q[k], b[k - 1], b[k], dir, phys.g, phys.dry_tolerance)?;
    }
    let mut max_courant = 0.0f64;
    let mut max_speed = 0.0f64;
    let mut corr = vec![[0.0f64; 3]; m + 1];
    for k in g..=n + g {
        let sol = &sols[k];
        let speed = sol.max_abs_speed();
        max_speed = max_speed.max(speed);
        let nu = dt * speed / geo.dx[k];
        max_courant = max_courant.max(nu);
        if sol.wall != WallSide::None {
            continue;
        }
        let limited = limited_waves(sol, &sols[k - 1], &sols[k + 1]);
        corr[k] = if check_cfl {
            second_order_flux(&sol.speeds, &limited, dt, geo.dx[k])?
        } else {
            let mut f = [0.0; 3];
            for p in [0, 2, 1] {
                let s = sol.speeds[p];
                if s == 0.0 {
                    continue;
                }
                let factor = 0.5 * s.signum() * (1.0 - (dt * s.abs() / geo.dx[k]).min(1.0));
                for c in 0..3 {
                    f[c] += factor * limited[p][c];
                }
            }
            f
        };
    }
    if check_cfl && max_courant > COURANT_MAX + 1e-12 {
        return Err(SurgeError::CflViolation { courant: max_courant });
    }

    let mut out = LineResult {
        q: Vec::with_capacity(n),
        lo: Vec::with_capacity(n + 1),
        hi: Vec::with_capacity(n + 1),
        max_courant,
        max_speed,
    };
    for c in g..n + g {
        let (l_lo, l_hi) = (geo.len[c], geo.len[c + 1]);
        let adv = advective_flux(q[c], dir, phys.dry_tolerance);
        let ap = &sols[c].apdq;
        let am = &sols[c + 1].amdq;
        let mut dq = [0.0; 3];
        for v in 0..3 {
            dq[v] = (l_lo * ap[v] + l_hi * am[v]) + (l_hi * corr[c + 1][v] - l_lo * corr[c][v]);
            if l_hi != l_lo {
                dq[v] += (l_hi - l_lo) * adv[v];
            }
        }
        let s = dt / geo.area[c];
        let mut h = q[c].h - s * dq[0];
        let (mut hu, mut hv) = (q[c].hu - s * dq[1], q[c].hv - s * dq[2]);
        if h < phys.dry_tolerance {
            h = h.max(0.0);
            hu = 0.0;
            hv = 0.0;
        }
        out.q.push(StateVector::new(h, hu, hv));
    }
    for k in g..=n + g {
        let len = geo.len[k];
        let lo = advective_flux(q[k - 1], dir, phys.dry_tolerance);
        let hi = advective_flux(q[k], dir, phys.dry_tolerance);
        let sol = &sols[k];
        let mut fl = [0.0; 3];
        let mut fh = [0.0; 3];
        for v in 0..3 {
            fl[v] = len * (lo[v] + sol.amdq[v] + corr[k][v]);
            fh[v] = len * (hi[v] - sol.apdq[v] + corr[k][v]);
        }
        out.lo.push(fl);
        out.hi.push(fh);
    }
    Ok(out)
}

#[derive(Default)]
struct SweepStats {
    max_courant: f64,
    max_speed: f64,
}

impl SweepStats {
    fn merge(&mut self, r: &LineResult) {
        self.max_courant = self.max_courant.max(r.max_courant);
        self.max_speed = self.max_speed.max(r.max_speed);
    }
}

fn x_sweep(patch: &mut Patch, dt: f64, phys: &PhysConfig, rows: std::ops::Range<isize>, stats: &mut SweepStats) -> Result<()> {
    let g = NGHOST as isize;
    let nx = patch.nx() as isize;
    let ny = patch.ny() as isize;
    let m = (nx + 2 * g) as usize;
    let len_x = patch.x_face_length();
    for j in rows {
        let area = patch.cell_area(j);
        let geo = LineGeometry { area: vec![area; m], len: vec![len_x; m + 1], dx: vec![area / len_x; m + 1] };
        let base = patch.idx(-g, j);
        let q: Vec<StateVector> = (base..base + m).map(|k| StateVector::new(patch.h[k], patch.hu[k], patch.hv[k])).collect();
        let interior = j >= 0 && j < ny;
        let res = sweep_line(&q, &patch.b[base..base + m], &geo, Direction::X, dt, phys, interior)?;
        stats.merge(&res);
        for (c, s) in res.q.iter().enumerate() {
            let k = base + g as usize + c;
            patch.h[k] = s.h;
            patch.hu[k] = s.hu;
            patch.hv[k] = s.hv;
        }
        if interior {
            let row = j as usize * (nx as usize + 1);
            patch.fluxes.x_lo[row..row + nx as usize + 1].copy_from_slice(&res.lo);
            patch.fluxes.x_hi[row..row + nx as usize + 1].copy_from_slice(&res.hi);
        }
    }
    Ok(())
}

fn y_sweep(patch: &mut Patch, dt: f64, phys: &PhysConfig, cols: std::ops::Range<isize>, stats: &mut SweepStats) -> Result<()> {
    let g = NGHOST as isize;
    let nx = patch.nx() as isize;
    let ny = patch.ny() as isize;
    let m = (ny + 2 * g) as usize;
    let area: Vec<f64> = (-g..ny + g).map(|j| patch.cell_area(j)).collect();
    // face k sits on the south side of row k - g
    let len: Vec<f64> = (-g..=ny + g).map(|j| patch.y_face_length(j)).collect();
    let dy = patch.earth_radius * patch.dlat.to_radians();
    let geo = LineGeometry { area, len, dx: vec![dy; m + 1] };
    let mut b = vec![0.0; m];
    let mut q = vec![StateVector::default(); m];
    for i in cols {
        for (c, j) in (-g..ny + g).enumerate() {
            let k = patch.idx(i, j);
            b[c] = patch.b[k];
            q[c] = StateVector::new(patch.h[k], patch.hu[k], patch.hv[k]);
        }
        let interior = i >= 0 && i < nx;
        let res = sweep_line(&q, &b, &geo, Direction::Y, dt, phys, interior)?;
        stats.merge(&res);
        for (c, s) in res.q.iter().enumerate() {
            let k = patch.idx(i, c as isize);
            patch.h[k] = s.h;
            patch.hu[k] = s.hu;
            patch.hv[k] = s.hv;
        }
        if interior {
            for (jf, (lo, hi)) in res.lo.iter().zip(&res.hi).enumerate() {
                let f = jf * nx as usize + i as usize;
                patch.fluxes.y_lo[f] = *lo;
                patch.fluxes.y_hi[f] = *hi;
            }
        }
    }
    Ok(())
}

/// Physical boundary of the level a patch lives on, used to refill wall and
/// outflow ghosts between the two sweeps.
#[derive(Clone, Copy, Debug)]
pub struct PhysicalBoundary<'a> {
    pub domain: &'a IndexBox,
    pub conditions: &'a BoundaryConditions,
}

/// One hyperbolic step of a patch whose ghost frame is filled. The first
/// sweep also updates the ghost lines the second sweep needs; ghosts on the
/// physical boundary are then refilled so walls stay exact mirrors. On error
/// the patch is left partially updated and the caller must restore it.
pub fn step_hyperbolic(
    patch: &mut Patch,
    dt: f64,
    phys: &PhysConfig,
    x_first: bool,
    boundary: Option<PhysicalBoundary<'_>>,
) -> Result<StepReport> {
    let mass_before = patch.mass();
    let g = NGHOST as isize;
    let (nx, ny) = (patch.nx() as isize, patch.ny() as isize);
    let mut stats = SweepStats::default();
    let refill = |patch: &mut Patch| {
        if let Some(bc) = boundary {
            fill_physical_ghosts(patch, bc.domain, bc.conditions, phys);
        }
    };
    if x_first {
        x_sweep(patch, dt, phys, -g..ny + g, &mut stats)?;
        refill(patch);
        y_sweep(patch, dt, phys, 0..nx, &mut stats)?;
    } else {
        y_sweep(patch, dt, phys, -g..nx + g, &mut stats)?;
        refill(patch);
        x_sweep(patch, dt, phys, 0..ny, &mut stats)?;
    }
    Ok(StepReport {
        dt_used: dt,
        max_courant: stats.max_courant,
        max_speed: stats.max_speed,
        mass_before,
        mass_after: patch.mass(),
    })
}

/// Largest stable step over wet interior cells, `+inf` when all are dry.
pub fn compute_stable_dt(patch: &Patch, courant_target: f64, phys: &PhysConfig) -> f64 {
    let mut dt = f64::INFINITY;
    for j in 0..patch.ny() as isize {
        let (dx, dy) = patch.cell_size(j);
        let ds = dx.min(dy);
        for i in 0..patch.nx() as isize {
            let k = patch.idx(i, j);
            let h = patch.h[k];
            if h < phys.dry_tolerance {
                continue;
            }
            let u = (patch.hu[k] / h).abs().max((patch.hv[k] / h).abs());
            dt = dt.min(ds / (u + (phys.g * h).sqrt()));
        }
    }
    courant_target * dt
}

/// Friction, Coriolis, wind and pressure in that order, each over the full
/// step.
pub fn apply_source_split(
    patch: &mut Patch,
    dt: f64,
    storm: Option<&StormState>,
    phys: &PhysConfig,
    friction: &FrictionConfig,
) -> Result<()> {
    patch.enforce_dry(phys.dry_tolerance);
    apply_friction(patch, dt, friction, phys)?;
    if phys.omega != 0.0 {
        apply_coriolis(patch, dt, phys);
    }
    if let Some(state) = storm {
        let field = evaluate_fields(patch, state, phys);
        apply_wind(patch, dt, &field, phys);
        apply_pressure(patch, dt, &field, phys);
    }
    Ok(())
}
