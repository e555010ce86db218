//! Pointwise Riemann machinery for the shallow water equations: Einfeldt
//! speed bounds, a well-balanced augmented f-wave solver with wet/dry
//! treatment, the MC limiter and the limited second-order correction flux.
//!
//! The solver splits the jump `(Δh, Δhu, Δφ)` (φ the normal momentum flux)
//! onto three waves with eigenvectors `(1, s, s²)` for the two Einfeldt
//! speeds and a steady-state wave `(0, 0, 1)` travelling at their mean. The
//! bathymetry source `-g h̄ Δb` is folded into the momentum-flux jump, so a
//! lake at rest produces exactly zero waves.

use crate::error::{Result, SurgeError};

/// Conserved cell state.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct StateVector {
    pub h: f64,
    pub hu: f64,
    pub hv: f64,
}

impl StateVector {
    pub fn new(h: f64, hu: f64, hv: f64) -> Self {
        Self { h, hu, hv }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    X,
    Y,
}

/// Which side of an interface is a dry bank acting as a reflecting wall.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum WallSide {
    None,
    Left,
    Right,
}

/// f-waves, speeds and fluctuations at one interface. Vector components are
/// in physical order `(h, hu, hv)` regardless of the sweep direction.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RiemannSolution {
    pub fwaves: [[f64; 3]; 3],
    pub speeds: [f64; 3],
    pub amdq: [f64; 3],
    pub apdq: [f64; 3],
    /// Discrete bathymetry source folded into the waves:
    /// `sum(fwaves) = f(q_r) - f(q_l) - bathymetry_source`.
    pub bathymetry_source: [f64; 3],
    pub wall: WallSide,
}

impl RiemannSolution {
    pub fn zero() -> Self {
        Self {
            fwaves: [[0.0; 3]; 3],
            speeds: [0.0; 3],
            amdq: [0.0; 3],
            apdq: [0.0; 3],
            bathymetry_source: [0.0; 3],
            wall: WallSide::None,
        }
    }

    pub fn max_abs_speed(&self) -> f64 {
        self.speeds.iter().fold(0.0f64, |m, s| m.max(s.abs()))
    }
}

/// Einfeldt speed bounds. Returns `None` when both sides are dry.
pub fn einfeldt_speeds(h_l: f64, u_l: f64, h_r: f64, u_r: f64, g: f64, dry_tolerance: f64) -> Option<(f64, f64)> {
    let wet_l = h_l >= dry_tolerance;
    let wet_r = h_r >= dry_tolerance;
    match (wet_l, wet_r) {
        (false, false) => None,
        (true, false) => {
            let c = (g * h_l).sqrt();
            Some((u_l - c, u_l + 2.0 * c))
        }
        (false, true) => {
            let c = (g * h_r).sqrt();
            Some((u_r - 2.0 * c, u_r + c))
        }
        (true, true) => {
            let (sl, sr) = (h_l.sqrt(), h_r.sqrt());
            let u_hat = (sl * u_l + sr * u_r) / (sl + sr);
            let c_hat = (g * 0.5 * (h_l + h_r)).sqrt();
            let s1 = (u_l - (g * h_l).sqrt()).min(u_hat - c_hat);
            let s2 = (u_r + (g * h_r).sqrt()).max(u_hat + c_hat);
            Some((s1, s2))
        }
    }
}

/// Depth a wet column reaches against a reflecting wall, two-rarefaction
/// estimate with `u_toward` the velocity toward the wall.
fn reflected_depth(h: f64, u_toward: f64, g: f64) -> f64 {
    let root = (g * h).sqrt() + 0.5 * u_toward;
    if root <= 0.0 {
        0.0
    } else {
        root * root / g
    }
}

/// Side state in the normal frame.
#[derive(Clone, Copy, Debug)]
struct Side {
    h: f64,
    hu: f64,
    u: f64,
    v: f64,
    b: f64,
}

const CONDITION_LIMIT: f64 = 1e12;

/// Augmented Riemann solve between two cells in direction `dir`.
pub fn solve_augmented(
    q_l: StateVector,
    q_r: StateVector,
    b_l: f64,
    b_r: f64,
    dir: Direction,
    g: f64,
    dry_tolerance: f64,
) -> Result<RiemannSolution> {
    if q_l.h < 0.0 {
        return Err(SurgeError::NegativeDepth { h: q_l.h });
    }
    if q_r.h < 0.0 {
        return Err(SurgeError::NegativeDepth { h: q_r.h });
    }
    let wet_l = q_l.h >= dry_tolerance;
    let wet_r = q_r.h >= dry_tolerance;
    if !wet_l && !wet_r {
        return Ok(RiemannSolution::zero());
    }
    let to_side = |q: StateVector, b: f64, wet: bool| {
        let (hn, ht) = match dir {
            Direction::X => (q.hu, q.hv),
            Direction::Y => (q.hv, q.hu),
        };
        if wet {
            Side { h: q.h, hu: hn, u: hn / q.h, v: ht / q.h, b }
        } else {
            Side { h: q.h, hu: 0.0, u: 0.0, v: 0.0, b }
        }
    };
    let mut left = to_side(q_l, b_l, wet_l);
    let mut right = to_side(q_r, b_r, wet_r);
    let mut wall = WallSide::None;
    if !wet_r && reflected_depth(left.h, left.u, g) + left.b < right.b {
        wall = WallSide::Right;
        right = Side { h: left.h, hu: -left.hu, u: -left.u, v: left.v, b: left.b };
    } else if !wet_l && reflected_depth(right.h, -right.u, g) + right.b < left.b {
        wall = WallSide::Left;
        left = Side { h: right.h, hu: -right.hu, u: -right.u, v: right.v, b: right.b };
    } else {
        // a dry side that is overtopped carries no depth into the solve
        if !wet_r {
            right.h = 0.0;
        }
        if !wet_l {
            left.h = 0.0;
        }
    }

    let (s1, s3) = einfeldt_speeds(left.h, left.u, right.h, right.u, g, dry_tolerance)
        .expect("at least one side is wet");
    let h_bar = 0.5 * (left.h + right.h);
    let d_eta = (right.h + right.b) - (left.h + left.b);
    let d_hu = right.hu - left.hu;
    // Δ(hu²/h + g h²/2) + g h̄ Δb, written through Δη so a flat surface at
    // rest cancels exactly
    let d_phi = (right.hu * right.u - left.hu * left.u) + g * h_bar * d_eta;
    let d_huv = right.hu * right.v - left.hu * left.v;
    let source_n = -g * h_bar * (right.b - left.b);

    let denom = s3 - s1;
    let scale = s1.abs().max(s3.abs()).max(f64::MIN_POSITIVE);
    let mut waves_n = [[0.0f64; 3]; 3];
    let mut speeds = [s1, 0.5 * (s1 + s3), s3];
    if denom > 0.0 && scale / denom < CONDITION_LIMIT {
        let beta1 = (s3 * d_eta - d_hu) / denom;
        let beta3 = (d_hu - s1 * d_eta) / denom;
        let beta2 = d_phi - (beta1 * s1 * s1 + beta3 * s3 * s3);
        waves_n[0] = [beta1 * s1, beta1 * s1 * s1, beta1 * s1 * left.v];
        waves_n[2] = [beta3 * s3, beta3 * s3 * s3, beta3 * s3 * right.v];
        waves_n[1] = [0.0, beta2, d_huv - (waves_n[0][2] + waves_n[2][2])];
    } else {
        // degenerate speeds: one f-wave at the mean speed
        waves_n[1] = [d_hu, d_phi, d_huv];
        speeds = [speeds[1]; 3];
    }

    let to_phys = |w: [f64; 3]| match dir {
        Direction::X => w,
        Direction::Y => [w[0], w[2], w[1]],
    };
    let mut sol = RiemannSolution::zero();
    sol.wall = wall;
    sol.speeds = speeds;
    sol.bathymetry_source = to_phys([0.0, source_n, 0.0]);
    for p in 0..3 {
        let z = to_phys(waves_n[p]);
        sol.fwaves[p] = z;
        let s = speeds[p];
        for m in 0..3 {
            if s < 0.0 {
                sol.amdq[m] += z[m];
            } else if s > 0.0 {
                sol.apdq[m] += z[m];
            } else {
                sol.amdq[m] += 0.5 * z[m];
                sol.apdq[m] += 0.5 * z[m];
            }
        }
    }
    match wall {
        WallSide::Right => sol.apdq = [0.0; 3],
        WallSide::Left => sol.amdq = [0.0; 3],
        WallSide::None => {}
    }
    Ok(sol)
}

/// Monotonized-central limiter.
pub fn limiter(theta: f64) -> f64 {
    0.0f64.max(((1.0 + theta) / 2.0).min(2.0).min(2.0 * theta))
}

fn dot(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

/// Limit each wave of `sol` against the same family at the upwind
/// interface (`lower` for positive speeds, `upper` for negative).
pub fn limited_waves(sol: &RiemannSolution, lower: &RiemannSolution, upper: &RiemannSolution) -> [[f64; 3]; 3] {
    let mut out = [[0.0; 3]; 3];
    for p in 0..3 {
        let z = &sol.fwaves[p];
        let norm2 = dot(z, z);
        if norm2 == 0.0 {
            continue;
        }
        let upwind = if sol.speeds[p] > 0.0 { &lower.fwaves[p] } else { &upper.fwaves[p] };
        let phi = limiter(dot(upwind, z) / norm2);
        out[p] = [phi * z[0], phi * z[1], phi * z[2]];
    }
    out
}

/// Second-order correction flux `½ Σ sgn(s)(1 - dt|s|/dx) Z̃` for limited
/// f-waves (equal to `½ Σ |s|(1 - dt|s|/dx) W̃` in wave form).
pub fn second_order_flux(speeds: &[f64; 3], limited: &[[f64; 3]; 3], dt: f64, dx: f64) -> Result<[f64; 3]> {
    let mut f = [0.0; 3];
    // outer waves first so mirrored interfaces round identically
    for p in [0, 2, 1] {
        let nu = dt * speeds[p].abs() / dx;
        if nu > 1.0 + 1e-12 {
            return Err(SurgeError::CflViolation { courant: nu });
        }
        let factor = 0.5 * speeds[p].signum() * (1.0 - nu);
        if speeds[p] == 0.0 {
            continue;
        }
        for m in 0..3 {
            f[m] += factor * limited[p][m];
        }
    }
    Ok(f)
}

/// Physical flux in direction `dir`, dry cells carry no velocity.
pub fn physical_flux(q: StateVector, dir: Direction, g: f64, dry_tolerance: f64) -> [f64; 3] {
    let pressure = 0.5 * g * q.h * q.h;
    if q.h < dry_tolerance {
        return match dir {
            Direction::X => [q.hu, pressure, 0.0],
            Direction::Y => [q.hv, 0.0, pressure],
        };
    }
    let (u, v) = (q.hu / q.h, q.hv / q.h);
    match dir {
        Direction::X => [q.hu, q.hu * u + pressure, q.hu * v],
        Direction::Y => [q.hv, q.hv * u, q.hv * v + pressure],
    }
}
