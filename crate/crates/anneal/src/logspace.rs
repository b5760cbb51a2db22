//! Stable log-space arithmetic for nonnegative masses.
//!
//! Every mass in this crate (partition-function coefficients, partial sums,
//! sampled weights) lives in natural-log space: a value `x` represents the
//! quantity `e^x`, and `NEG_INFINITY` represents an exact zero. Totals like
//! `Z(0) = k^|V|` overflow `f64` long before desk scale, so sums are formed
//! with the log-sum-exp identity and never leave log space.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum LogSpaceError {
    #[error("log-weight must not be NaN")]
    NaN,
    #[error("log-weight must be finite or -inf (got +inf)")]
    PositiveInfinity,
}

/// Adds two quantities given by their natural logs: `ln(e^a + e^b)`.
///
/// The larger argument is factored out so the exponentials stay in `[0, 1]`.
/// `-inf` inputs (exact zeros) are absorbed.
#[inline]
pub fn log_add(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    if a >= b {
        a + (b - a).exp().ln_1p()
    } else {
        b + (a - b).exp().ln_1p()
    }
}

/// `ln(e^a - e^b)` for `a >= b`; returns `-inf` when the difference underflows.
#[inline]
pub fn log_sub(a: f64, b: f64) -> f64 {
    debug_assert!(a >= b, "log_sub requires a >= b (got {a} < {b})");
    if b == f64::NEG_INFINITY {
        return a;
    }
    let d = -((b - a).exp());
    if d <= -1.0 {
        f64::NEG_INFINITY
    } else {
        a + d.ln_1p()
    }
}

/// `ln Σ e^{x_i}` with max extraction; empty input is an empty sum (zero).
pub fn log_sum_exp(values: impl IntoIterator<Item = f64>) -> f64 {
    let vals: Vec<f64> = values.into_iter().collect();
    let max = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    let sum: f64 = vals.iter().map(|v| (v - max).exp()).sum();
    max + sum.ln()
}

/// Natural log of a nonnegative quantity; `-inf` encodes an exact zero.
///
/// Never NaN, never `+inf`. Multiplication of masses is addition of logs,
/// addition of masses goes through [`log_add`].
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LogWeight(f64);

impl LogWeight {
    /// Exact zero mass.
    pub const ZERO: LogWeight = LogWeight(f64::NEG_INFINITY);
    /// Unit mass (`ln 1`).
    pub const ONE: LogWeight = LogWeight(0.0);

    /// Wraps a natural log, rejecting NaN and `+inf`.
    pub fn new(ln_value: f64) -> Result<Self, LogSpaceError> {
        if ln_value.is_nan() {
            Err(LogSpaceError::NaN)
        } else if ln_value == f64::INFINITY {
            Err(LogSpaceError::PositiveInfinity)
        } else {
            Ok(LogWeight(ln_value))
        }
    }

    /// Log of a plain nonnegative value (`0.0` maps to [`LogWeight::ZERO`]).
    pub fn from_value(value: f64) -> Result<Self, LogSpaceError> {
        if value.is_nan() || value < 0.0 {
            return Err(LogSpaceError::NaN);
        }
        LogWeight::new(value.ln())
    }

    /// The stored natural log (`-inf` for zero).
    #[inline]
    pub fn ln(self) -> f64 {
        self.0
    }

    /// Exponentiates back to a plain value; may underflow to `0.0`.
    #[inline]
    pub fn value(self) -> f64 {
        self.0.exp()
    }

    #[inline]
    pub fn is_zero(self) -> bool {
        self.0 == f64::NEG_INFINITY
    }

    /// Mass addition via log-sum-exp.
    #[inline]
    pub fn add(self, other: LogWeight) -> LogWeight {
        LogWeight(log_add(self.0, other.0))
    }

    /// Mass multiplication (log addition); zero absorbs.
    #[inline]
    pub fn mul(self, other: LogWeight) -> LogWeight {
        if self.is_zero() || other.is_zero() {
            LogWeight::ZERO
        } else {
            LogWeight(self.0 + other.0)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn log_add_matches_direct_sum() {
        let r = log_add(0.5f64.ln(), 0.25f64.ln());
        assert!((r - 0.75f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn log_add_handles_zero_mass() {
        assert_eq!(log_add(f64::NEG_INFINITY, 2.0), 2.0);
        assert_eq!(log_add(2.0, f64::NEG_INFINITY), 2.0);
        assert_eq!(
            log_add(f64::NEG_INFINITY, f64::NEG_INFINITY),
            f64::NEG_INFINITY
        );
    }

    #[test]
    fn log_add_survives_huge_magnitudes() {
        // ln(e^1234 + e^1232) = 1232 + ln(e^2 + 1)
        let r = log_add(1234.0, 1232.0);
        assert!((r - (1232.0 + 2.0f64.exp().ln_1p())).abs() < 1e-12);
    }

    #[test]
    fn log_sum_exp_empty_is_zero_mass() {
        assert_eq!(log_sum_exp(std::iter::empty()), f64::NEG_INFINITY);
    }

    #[test]
    fn log_sum_exp_matches_pairwise() {
        let xs = [0.3, -2.0, 5.5, f64::NEG_INFINITY, 1.1];
        let expected = xs.iter().copied().fold(f64::NEG_INFINITY, log_add);
        assert!((log_sum_exp(xs) - expected).abs() < 1e-12);
    }

    #[test]
    fn log_sub_recovers_difference() {
        let r = log_sub(3.0f64.ln(), 1.0f64.ln());
        assert!((r - 2.0f64.ln()).abs() < 1e-14);
        assert_eq!(log_sub(2.0, 2.0), f64::NEG_INFINITY);
    }

    #[test]
    fn weight_constructors_reject_invalid() {
        assert_eq!(LogWeight::new(f64::NAN), Err(LogSpaceError::NaN));
        assert_eq!(
            LogWeight::new(f64::INFINITY),
            Err(LogSpaceError::PositiveInfinity)
        );
        assert_eq!(LogWeight::from_value(0.0), Ok(LogWeight::ZERO));
    }

    #[test]
    fn weight_mul_absorbs_zero() {
        let w = LogWeight::new(3.0).unwrap();
        assert!(w.mul(LogWeight::ZERO).is_zero());
        assert!(LogWeight::ZERO.mul(w).is_zero());
    }
}
