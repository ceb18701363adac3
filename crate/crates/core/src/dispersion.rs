//! Algebraic systems for decay exponents and spreading speeds.
//!
//! Speeds are obtained from exponential plane waves `e^{-a(x - ct)}` on the
//! road and `γ e^{-a(x - ct) - b y}` in the field. The road and field
//! equations are used in relaxed (supersolution) form
//!
//! ```text
//! (R)  -p a² + c a + q b / (1 + s b) >= 0
//! (F)   c a - r a² - t b²           >= k
//! ```
//!
//! and the spreading speed is the least `c` for which some `a, b >= 0`
//! satisfy both. (F) confines `a` to `[a⁻(b), a⁺(b)]`, (R) to `a <= a_R(b)`,
//! so admissibility reduces to `max_b a_R(b) - a⁻(b) >= 0`. `a_R` is concave
//! and `a⁻` convex in `b`, hence the margin is concave and its maximum is
//! located by a coarse scan followed by golden-section refinement.

use serde::{Deserialize, Serialize};

use crate::bisect::{bisect, bisect_bracket};
use crate::error::DispersionError;
use crate::model::ModelParams;

/// Relative bisection tolerance on speeds.
pub const SPEED_REL_TOL: f64 = 1e-9;
/// Absolute bisection tolerance on exponent roots.
pub const EXPONENT_TOL: f64 = 1e-12;
/// Points of the geometric `b` scan.
const SCAN_POINTS: usize = 512;
const GOLDEN_ITERATIONS: usize = 120;

/// Positive solution `(a, b, γ)` of an exponential-ansatz system.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DispersionTriple {
    /// Decay rate along the road.
    pub a: f64,
    /// Decay rate transverse to the road.
    pub b: f64,
    /// Field/road amplitude ratio at the road.
    pub gamma: f64,
}

/// Candidate wave speed for a given parameter set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpeedQuery {
    pub c: f64,
    pub params: ModelParams,
}

/// Coefficients of the relaxed plane-wave system (see module docs).
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct PlaneWaveSystem {
    pub p: f64,
    pub q: f64,
    pub s: f64,
    pub r: f64,
    pub t: f64,
    pub k: f64,
}

impl PlaneWaveSystem {
    /// Dimensional system linearised around zero.
    pub fn dimensional(params: &ModelParams) -> Self {
        Self {
            p: params.road_d,
            q: params.mu * params.d / params.nu,
            s: params.d / params.nu,
            r: params.d,
            t: params.d,
            k: params.linear_growth(),
        }
    }

    /// Reduced system; `dd = ∞` gives the limiting system.
    pub fn reduced(lambda: f64, rho: f64, dd: f64) -> Self {
        Self { p: 1.0, q: lambda, s: rho, r: 1.0 / dd, t: 1.0, k: 0.25 }
    }

    /// Least speed at which (F) has any solution (`b = 0`, double root).
    pub fn floor(&self) -> f64 {
        (4.0 * self.r * self.k).sqrt()
    }

    fn road_upper(&self, c: f64, b: f64) -> f64 {
        let g = self.q * b / (1.0 + self.s * b);
        (c + (c * c + 4.0 * self.p * g).sqrt()) / (2.0 * self.p)
    }

    fn field_lower(&self, c: f64, b: f64) -> f64 {
        let m = self.k + self.t * b * b;
        let disc = (c * c - 4.0 * self.r * m).max(0.0);
        2.0 * m / (c + disc.sqrt())
    }

    fn margin(&self, c: f64, b: f64) -> f64 {
        self.road_upper(c, b) - self.field_lower(c, b)
    }

    /// Largest `b` for which (F) is solvable at speed `c`; `None` when
    /// (F) does not bound `b` (limiting system).
    fn b_limit(&self, c: f64) -> Option<f64> {
        (self.r > 0.0).then(|| ((c * c / (4.0 * self.r) - self.k).max(0.0) / self.t).sqrt())
    }

    /// `max_b a_R(b) - a⁻(b)` over the admissible `b` range.
    pub fn best_margin(&self, c: f64) -> f64 {
        if c * c < 4.0 * self.r * self.k {
            return f64::NEG_INFINITY;
        }
        let upper = match self.b_limit(c) {
            Some(b) => b,
            None => {
                // Concave margin: once it decreases between B and 2B the
                // maximiser lies below 2B.
                let mut b = 1.0;
                for _ in 0..200 {
                    if self.margin(c, 2.0 * b) < self.margin(c, b) {
                        break;
                    }
                    b *= 2.0;
                }
                2.0 * b
            }
        };
        if !(upper > 0.0) {
            return self.margin(c, 0.0);
        }
        let start = 1e-9 * upper;
        let ratio = (upper / start).powf(1.0 / (SCAN_POINTS - 1) as f64);
        let mut grid = Vec::with_capacity(SCAN_POINTS + 1);
        grid.push(0.0);
        let mut b = start;
        for _ in 0..SCAN_POINTS {
            grid.push(b.min(upper));
            b *= ratio;
        }
        let (best, _) = grid
            .iter()
            .enumerate()
            .map(|(i, &b)| (i, self.margin(c, b)))
            .fold((0, f64::NEG_INFINITY), |acc, (i, m)| if m > acc.1 { (i, m) } else { acc });
        let lo = grid[best.saturating_sub(1)];
        let hi = grid[(best + 1).min(grid.len() - 1)];
        let refined = golden_max(|b| self.margin(c, b), lo, hi);
        refined.max(self.margin(c, grid[best]))
    }

    pub fn admissible(&self, c: f64) -> bool {
        self.best_margin(c) >= 0.0
    }

    /// Infimum of admissible speeds.
    pub fn min_speed(&self) -> Result<f64, DispersionError> {
        let floor = self.floor();
        if floor > 0.0 && self.admissible(floor) {
            return Ok(floor);
        }
        let mut hi = if floor > 0.0 { 2.0 * floor } else { 1.0 };
        let mut doublings = 0;
        while !self.admissible(hi) {
            hi *= 2.0;
            doublings += 1;
            if doublings > 200 || !hi.is_finite() {
                return Err(DispersionError::Convergence("speed upper bracket"));
            }
        }
        let lo = if floor > 0.0 { floor } else { 0.0 };
        let tol = SPEED_REL_TOL * if floor > 0.0 { floor } else { hi };
        let (_, hi) = bisect_bracket(|c| !self.admissible(c), lo, hi, tol)
            .map_err(|_| DispersionError::Convergence("minimal speed"))?;
        Ok(hi)
    }
}

/// Maximum of a unimodal function on `[lo, hi]`.
fn golden_max(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - inv_phi * (hi - lo);
    let mut x2 = lo + inv_phi * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    for _ in 0..GOLDEN_ITERATIONS {
        if hi - lo <= 1e-15 * hi.abs().max(1e-300) {
            break;
        }
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = f(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = f(x1);
        }
    }
    f1.max(f2).max(f(lo)).max(f(hi))
}

fn require_spreading(params: &ModelParams) -> Result<(), DispersionError> {
    params.validate()?;
    let r0 = params.r0();
    if r0 <= 1.0 {
        return Err(crate::error::ModelError::NoSpreading { r0 }.into());
    }
    Ok(())
}

/// Solves `D a² = μ d b(1+ε) / (d b(1+ε) + ν(1-ε))`, `a² + b² = radius²`.
pub(crate) fn road_disk_intersection(
    params: &ModelParams,
    radius2: f64,
    eps: f64,
) -> Result<DispersionTriple, DispersionError> {
    let ModelParams { d, road_d, mu, nu, .. } = *params;
    let denom = |b: f64| d * b * (1.0 + eps) + nu * (1.0 - eps);
    let road = |b: f64| mu * d * b * (1.0 + eps) / denom(b);
    let radius = radius2.sqrt();
    // Left side decreases from D r² to 0, right side increases from 0.
    let b = bisect(|b| road_d * (radius2 - b * b) > road(b), 0.0, radius, EXPONENT_TOL)
        .map_err(|_| DispersionError::Convergence("decay exponents"))?;
    let a = (radius2 - b * b).max(0.0).sqrt();
    Ok(DispersionTriple { a, b, gamma: mu / denom(b) })
}

/// Decay exponents of the steady state towards its far-field limit.
pub fn decay_exponents(params: &ModelParams) -> Result<DispersionTriple, DispersionError> {
    params.validate()?;
    if params.r0() == 1.0 {
        return Ok(DispersionTriple { a: 0.0, b: 0.0, gamma: params.mu / params.nu });
    }
    let radius2 = -params.f_prime(params.plateau()?)? / params.d;
    road_disk_intersection(params, radius2, 0.0)
}

/// Exponents of the strip-supported subsolution family with penalised
/// reaction `-zeta` and reflection weight `eps`.
pub fn decay_exponents_perturbed(
    params: &ModelParams,
    zeta: f64,
    eps: f64,
) -> Result<DispersionTriple, DispersionError> {
    params.validate()?;
    let slope = -params.f_prime(params.plateau()?)?;
    if !(zeta.is_finite() && zeta > slope) {
        return Err(DispersionError::OutOfRange {
            name: "zeta",
            value: zeta,
            reason: "must exceed -f'(v*)",
        });
    }
    if !(eps > 0.0 && eps < 1.0) {
        return Err(DispersionError::OutOfRange { name: "eps", value: eps, reason: "must lie in (0, 1)" });
    }
    road_disk_intersection(params, zeta / params.d, eps)
}

/// Whether some plane wave at speed `c` satisfies the relaxed system.
pub fn speed_admissible(query: &SpeedQuery) -> Result<bool, DispersionError> {
    require_spreading(&query.params)?;
    if !(query.c.is_finite() && query.c > 0.0) {
        return Err(DispersionError::OutOfRange { name: "c", value: query.c, reason: "must be positive" });
    }
    Ok(PlaneWaveSystem::dimensional(&query.params).admissible(query.c))
}

/// Spreading speed along the road.
pub fn c_sirt(params: &ModelParams) -> Result<f64, DispersionError> {
    require_spreading(params)?;
    let c_sir = params.c_sir()?;
    let c = PlaneWaveSystem::dimensional(params).min_speed()?;
    Ok(c.max(c_sir))
}

/// Universal reduced speed curve in the limit of infinite diffusivity ratio.
pub fn omega_reduced(lambda: f64) -> Result<f64, DispersionError> {
    if !(lambda.is_finite() && lambda >= 0.0) {
        return Err(DispersionError::OutOfRange { name: "lambda", value: lambda, reason: "must be >= 0" });
    }
    PlaneWaveSystem::reduced(lambda, 0.0, f64::INFINITY).min_speed()
}

/// Minimal reduced speed at finite diffusivity ratio `dd` and exchange
/// parameter `rho`.
pub fn reduced_speed(lambda: f64, rho: f64, dd: f64) -> Result<f64, DispersionError> {
    for (name, value) in [("lambda", lambda), ("rho", rho)] {
        if !(value.is_finite() && value >= 0.0) {
            return Err(DispersionError::OutOfRange { name, value, reason: "must be >= 0" });
        }
    }
    if !(dd > 0.0) || dd.is_nan() {
        return Err(DispersionError::OutOfRange { name: "dd", value: dd, reason: "must be > 0" });
    }
    PlaneWaveSystem::reduced(lambda, rho, dd).min_speed()
}
