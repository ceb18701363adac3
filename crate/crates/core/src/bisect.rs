//! Bracketed bisection shared by the scalar solvers.

/// Hard cap on halvings; a double-precision bracket is exhausted well before.
pub const MAX_ITERATIONS: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BisectError {
    IterationLimit { lo: f64, hi: f64 },
}

/// Shrinks `[lo, hi]` around the switch point of a monotone predicate.
///
/// `is_low(x)` must be true on the left of the switch point and false on the
/// right. Returns the final bracket once `hi - lo <= tol` or the bracket can
/// no longer be split in floating point.
pub fn bisect_bracket(
    is_low: impl Fn(f64) -> bool,
    mut lo: f64,
    mut hi: f64,
    tol: f64,
) -> Result<(f64, f64), BisectError> {
    for _ in 0..MAX_ITERATIONS {
        if hi - lo <= tol {
            return Ok((lo, hi));
        }
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            return Ok((lo, hi));
        }
        if is_low(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    if hi - lo <= tol {
        Ok((lo, hi))
    } else {
        Err(BisectError::IterationLimit { lo, hi })
    }
}

/// Midpoint of the converged bracket.
pub fn bisect(
    is_low: impl Fn(f64) -> bool,
    lo: f64,
    hi: f64,
    tol: f64,
) -> Result<f64, BisectError> {
    bisect_bracket(is_low, lo, hi, tol).map(|(lo, hi)| 0.5 * (lo + hi))
}
