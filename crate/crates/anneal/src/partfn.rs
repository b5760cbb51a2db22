//! Exact arithmetic on explicitly given partition functions.
//!
//! A partition function of degree `n` is `Z(β) = Σ_i a_i e^{-iβ}` with
//! nonnegative coefficients and `a_0 ≥ 1`. This module stores the
//! coefficients as natural logs and evaluates `ln Z(β)`, the log-derivative
//! `f'(β)`, and the Chebyshev step ratio `Z(2β'-β)Z(β)/Z(β')²` without ever
//! materializing a mass. It is the ground-truth oracle that schedules and
//! estimators are verified against.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::logspace::{log_sum_exp, LogSpaceError, LogWeight};
use crate::schedule::CoolingSchedule;

/// Default log-space slack for the `verify_*` reports.
///
/// The underlying inequalities are exact, but the oracle evaluates them in
/// floating point, so comparisons carry a small caller-adjustable slack.
pub const DEFAULT_VERIFY_SLACK: f64 = 1e-9;

#[derive(Debug, Error, PartialEq)]
pub enum PartFnError {
    #[error("partition function needs at least one coefficient")]
    Empty,
    #[error("ground-level coefficient must satisfy a_0 >= 1 (got ln a_0 = {0})")]
    GroundLevelTooSmall(f64),
    #[error(transparent)]
    BadWeight(#[from] LogSpaceError),
    #[error("inverse temperature must be nonnegative and not NaN (got {0})")]
    BadBeta(f64),
}

/// An inverse temperature: a nonnegative real or the distinguished `∞`.
///
/// Infinity is a variant, never a float sentinel; the mirror rule
/// `2·∞ − β = ∞` used by Chebyshev ratios is explicit in [`Beta::mirror`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Beta {
    Finite(f64),
    Infinite,
}

impl Beta {
    pub const ZERO: Beta = Beta::Finite(0.0);

    pub fn new(value: f64) -> Result<Self, PartFnError> {
        if value.is_nan() || value < 0.0 {
            Err(PartFnError::BadBeta(value))
        } else if value == f64::INFINITY {
            Ok(Beta::Infinite)
        } else {
            Ok(Beta::Finite(value))
        }
    }

    #[inline]
    pub fn is_infinite(self) -> bool {
        matches!(self, Beta::Infinite)
    }

    /// Finite value, or `None` for `∞`.
    #[inline]
    pub fn finite(self) -> Option<f64> {
        match self {
            Beta::Finite(v) => Some(v),
            Beta::Infinite => None,
        }
    }

    /// The reflected point `2·other − self` of a Chebyshev step, with
    /// `2·∞ − β = ∞`.
    pub fn mirror(self, other: Beta) -> Beta {
        match (self, other) {
            (_, Beta::Infinite) => Beta::Infinite,
            (Beta::Finite(a), Beta::Finite(b)) => Beta::Finite(2.0 * b - a),
            (Beta::Infinite, Beta::Finite(_)) => {
                unreachable!("mirror is only taken around the later point of a step")
            }
        }
    }
}

impl PartialOrd for Beta {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        use std::cmp::Ordering::*;
        match (self, other) {
            (Beta::Infinite, Beta::Infinite) => Some(Equal),
            (Beta::Infinite, Beta::Finite(_)) => Some(Greater),
            (Beta::Finite(_), Beta::Infinite) => Some(Less),
            (Beta::Finite(a), Beta::Finite(b)) => a.partial_cmp(b),
        }
    }
}

impl std::fmt::Display for Beta {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Beta::Finite(v) => write!(f, "{v}"),
            Beta::Infinite => write!(f, "inf"),
        }
    }
}

// JSON carries "inf" as a string because JSON has no infinity literal.
impl Serialize for Beta {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Beta::Finite(v) => s.serialize_f64(*v),
            Beta::Infinite => s.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for Beta {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Str(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(v) => Beta::new(v).map_err(serde::de::Error::custom),
            Raw::Str(s) if s == "inf" => Ok(Beta::Infinite),
            Raw::Str(s) => Err(serde::de::Error::custom(format!(
                "expected a number or \"inf\", got {s:?}"
            ))),
        }
    }
}

/// Explicit partition function: `log_coeffs[i]` is `ln a_i`, degree `n`.
#[derive(Clone, Debug, PartialEq)]
pub struct PartitionFunction {
    log_coeffs: Vec<LogWeight>,
}

impl PartitionFunction {
    /// Builds from `ln a_0 … ln a_n`; requires `a_0 ≥ 1`.
    pub fn new(log_coeffs: Vec<LogWeight>) -> Result<Self, PartFnError> {
        if log_coeffs.is_empty() {
            return Err(PartFnError::Empty);
        }
        if log_coeffs[0].ln() < 0.0 {
            return Err(PartFnError::GroundLevelTooSmall(log_coeffs[0].ln()));
        }
        Ok(PartitionFunction { log_coeffs })
    }

    /// Convenience constructor from plain coefficient values.
    pub fn from_coeffs(coeffs: &[f64]) -> Result<Self, PartFnError> {
        let log_coeffs = coeffs
            .iter()
            .map(|&a| LogWeight::from_value(a))
            .collect::<Result<Vec<_>, _>>()?;
        PartitionFunction::new(log_coeffs)
    }

    /// Degree `n` (one less than the number of coefficients).
    #[inline]
    pub fn degree(&self) -> usize {
        self.log_coeffs.len() - 1
    }

    #[inline]
    pub fn log_coeffs(&self) -> &[LogWeight] {
        &self.log_coeffs
    }

    /// `ln A = ln Z(0)`.
    pub fn ln_a(&self) -> f64 {
        self.log_z_at(0.0)
    }

    /// Rescales so that `a_0 = 1`; Chebyshev ratios are scaling-invariant so
    /// this only moves the anchor.
    pub fn normalized(&self) -> PartitionFunction {
        let c0 = self.log_coeffs[0].ln();
        PartitionFunction {
            log_coeffs: self
                .log_coeffs
                .iter()
                .map(|w| {
                    if w.is_zero() {
                        LogWeight::ZERO
                    } else {
                        LogWeight::new(w.ln() - c0).expect("shifted log stays valid")
                    }
                })
                .collect(),
        }
    }

    /// `ln Z(β)` at any finite β, negative values included.
    ///
    /// Negative arguments arise when checking the reverse direction of a
    /// schedule, where the reflected point `2β_i − β_{i+1}` can dip below 0.
    pub fn log_z_at(&self, beta: f64) -> f64 {
        log_sum_exp(
            self.log_coeffs
                .iter()
                .enumerate()
                .filter(|(_, w)| !w.is_zero())
                .map(|(i, w)| w.ln() - beta * i as f64),
        )
    }

    /// `ln Z(β)`; `β = ∞` keeps only the ground level, giving `ln a_0`.
    pub fn log_z(&self, beta: Beta) -> f64 {
        match beta {
            Beta::Finite(b) => self.log_z_at(b),
            Beta::Infinite => self.log_coeffs[0].ln(),
        }
    }

    /// `f'(β) = Z'(β)/Z(β) = −E(H(X))` for `X ~ μ_β`; β must be finite.
    ///
    /// Computed as `−exp(ln Σ i·a_i e^{-iβ} − ln Z(β))`; returns `0` when all
    /// mass sits at level 0.
    pub fn f_prime(&self, beta: f64) -> f64 {
        let log_num = log_sum_exp(
            self.log_coeffs
                .iter()
                .enumerate()
                .skip(1)
                .filter(|(_, w)| !w.is_zero())
                .map(|(i, w)| (i as f64).ln() + w.ln() - beta * i as f64),
        );
        -(log_num - self.log_z_at(beta)).exp()
    }

    /// Log-space Chebyshev step quality `ln [Z(2β'−β) Z(β) / Z(β')²]`.
    ///
    /// This is `ln E(W²)/E(W)²` for the step estimator `W = e^{(β−β')H(X)}`,
    /// `X ~ μ_β`. For `β' = ∞` it degenerates to `ln Z(β) − ln Z(∞)`.
    pub fn log_chebyshev_ratio(&self, beta: Beta, beta_next: Beta) -> f64 {
        assert!(
            beta <= beta_next,
            "chebyshev ratio needs β ≤ β' (got {beta} > {beta_next})"
        );
        match (beta, beta_next) {
            (Beta::Infinite, Beta::Infinite) => 0.0,
            (Beta::Finite(b), Beta::Infinite) => self.log_z_at(b) - self.log_z(Beta::Infinite),
            (Beta::Finite(b), Beta::Finite(bn)) => {
                if b == bn {
                    return 0.0;
                }
                self.log_z_at(2.0 * bn - b) + self.log_z_at(b) - 2.0 * self.log_z_at(bn)
            }
            (Beta::Infinite, Beta::Finite(_)) => unreachable!("β ≤ β' was checked"),
        }
    }

    /// Reverse-direction quality `ln [Z(2β−β') Z(β') / Z(β)²]` for a step
    /// `β < β'`; the reflected point may be negative.
    ///
    /// For `β' = ∞` the population quantity is the warm-start variance of
    /// `μ_β` against `μ_∞`, which collapses to `2(ln Z(∞) − ln Z(β)) ≤ 0`.
    pub fn log_reverse_ratio(&self, beta: Beta, beta_next: Beta) -> f64 {
        assert!(beta <= beta_next, "reverse ratio needs β ≤ β'");
        match (beta, beta_next) {
            (Beta::Infinite, Beta::Infinite) => 0.0,
            (Beta::Finite(b), Beta::Infinite) => 2.0 * (self.log_z(Beta::Infinite) - self.log_z_at(b)),
            (Beta::Finite(b), Beta::Finite(bn)) => {
                if b == bn {
                    return 0.0;
                }
                self.log_z_at(2.0 * b - bn) + self.log_z_at(bn) - 2.0 * self.log_z_at(b)
            }
            (Beta::Infinite, Beta::Finite(_)) => unreachable!("β ≤ β' was checked"),
        }
    }

    /// Checks each consecutive pair of `schedule` against the bound `B`.
    pub fn verify_schedule(&self, schedule: &CoolingSchedule, b: f64) -> ScheduleReport {
        self.verify_schedule_with_slack(schedule, b, DEFAULT_VERIFY_SLACK)
    }

    pub fn verify_schedule_with_slack(
        &self,
        schedule: &CoolingSchedule,
        b: f64,
        slack: f64,
    ) -> ScheduleReport {
        let log_b = b.ln();
        let mut pairs = Vec::with_capacity(schedule.num_steps());
        let mut worst = f64::NEG_INFINITY;
        for (lo, hi) in schedule.steps() {
            let log_ratio = self.log_chebyshev_ratio(lo, hi);
            worst = worst.max(log_ratio);
            pairs.push(PairCheck {
                from: lo,
                to: hi,
                log_ratio,
                ok: log_ratio <= log_b + slack,
            });
        }
        ScheduleReport {
            log_bound: log_b,
            slack,
            pass: pairs.iter().all(|p| p.ok),
            worst_log_ratio: worst,
            pairs,
        }
    }

    /// Checks both step directions (forward and reverse bounds) against `B`.
    pub fn verify_reversible(&self, schedule: &CoolingSchedule, b: f64) -> ReversibleReport {
        self.verify_reversible_with_slack(schedule, b, DEFAULT_VERIFY_SLACK)
    }

    pub fn verify_reversible_with_slack(
        &self,
        schedule: &CoolingSchedule,
        b: f64,
        slack: f64,
    ) -> ReversibleReport {
        let forward = self.verify_schedule_with_slack(schedule, b, slack);
        let log_b = b.ln();
        let mut pairs = Vec::with_capacity(schedule.num_steps());
        let mut worst = f64::NEG_INFINITY;
        for (lo, hi) in schedule.steps() {
            let log_ratio = self.log_reverse_ratio(lo, hi);
            worst = worst.max(log_ratio);
            pairs.push(PairCheck {
                from: lo,
                to: hi,
                log_ratio,
                ok: log_ratio <= log_b + slack,
            });
        }
        ReversibleReport {
            pass: forward.pass && pairs.iter().all(|p| p.ok),
            worst_reverse_log_ratio: worst,
            forward,
            reverse_pairs: pairs,
        }
    }
}

/// One consecutive pair of a verified schedule.
#[derive(Clone, Debug, Serialize)]
pub struct PairCheck {
    pub from: Beta,
    pub to: Beta,
    /// `ln` of the step's Chebyshev quantity.
    pub log_ratio: f64,
    pub ok: bool,
}

/// Per-pair verdicts for one direction of a schedule.
#[derive(Clone, Debug, Serialize)]
pub struct ScheduleReport {
    pub log_bound: f64,
    pub slack: f64,
    pub pass: bool,
    pub worst_log_ratio: f64,
    pub pairs: Vec<PairCheck>,
}

/// Both-direction verdicts per Def. of a reversible schedule.
#[derive(Clone, Debug, Serialize)]
pub struct ReversibleReport {
    pub pass: bool,
    pub worst_reverse_log_ratio: f64,
    pub forward: ScheduleReport,
    pub reverse_pairs: Vec<PairCheck>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schedule::{CoolingSchedule, MoveKind};

    fn two_level() -> PartitionFunction {
        PartitionFunction::from_coeffs(&[1.0, 1.0]).unwrap()
    }

    #[test]
    fn log_z_basics() {
        let z = two_level();
        assert!((z.log_z(Beta::ZERO) - 2.0f64.ln()).abs() < 1e-15);
        assert_eq!(z.log_z(Beta::Infinite), 0.0);
        // 1 + e^{-ln 2} = 1.5
        assert!((z.log_z(Beta::Finite(2.0f64.ln())) - 1.5f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_ground_level() {
        assert!(matches!(
            PartitionFunction::from_coeffs(&[0.5, 1.0]),
            Err(PartFnError::GroundLevelTooSmall(_))
        ));
        assert!(matches!(
            PartitionFunction::from_coeffs(&[0.0, 1.0]),
            Err(PartFnError::GroundLevelTooSmall(_))
        ));
    }

    #[test]
    fn f_prime_is_negative_mean_hamiltonian() {
        let z = two_level();
        assert!((z.f_prime(0.0) + 0.5).abs() < 1e-15);
        // all mass at level zero: derivative vanishes
        let flat = PartitionFunction::from_coeffs(&[2.0, 0.0, 0.0]).unwrap();
        assert_eq!(flat.f_prime(0.0), 0.0);
        assert_eq!(flat.f_prime(3.7), 0.0);
    }

    #[test]
    fn f_prime_at_zero_bounded_by_degree() {
        for n in 1..8 {
            let coeffs: Vec<f64> = (0..=n).map(|i| 1.0 + i as f64).collect();
            let z = PartitionFunction::from_coeffs(&coeffs).unwrap();
            let fp = z.f_prime(0.0);
            assert!(fp >= -(n as f64) && fp <= 0.0, "n={n} fp={fp}");
        }
    }

    #[test]
    fn chebyshev_identity_step_is_one() {
        let z = two_level();
        assert_eq!(z.log_chebyshev_ratio(Beta::Finite(0.3), Beta::Finite(0.3)), 0.0);
        assert_eq!(z.log_chebyshev_ratio(Beta::Infinite, Beta::Infinite), 0.0);
    }

    /// Two-atom closed form: with Z(β) = (A/(1+a))(1 + a e^{-βn}) and
    /// z = e^{-β₁ n}, the first-step ratio is 1 + a((1-z)/(1+az))².
    fn two_atom(big_a: f64, a: f64, n: usize) -> PartitionFunction {
        let mut coeffs = vec![0.0; n + 1];
        coeffs[0] = big_a / (1.0 + a);
        coeffs[n] = big_a * a / (1.0 + a);
        PartitionFunction::from_coeffs(&coeffs).unwrap()
    }

    #[test]
    fn chebyshev_matches_two_atom_closed_form() {
        for &(big_a, a, n, z) in &[
            (10.0, 1.0, 1, 0.5f64),
            (100.0, 3.0, 4, 0.25),
            (50.0, 0.5, 3, 0.8),
        ] {
            let pf = two_atom(big_a, a, n);
            let beta1 = -z.ln() / n as f64;
            let got = pf.log_chebyshev_ratio(Beta::ZERO, Beta::Finite(beta1));
            let expected = (1.0 + a * ((1.0 - z) / (1.0 + a * z)).powi(2)).ln();
            assert!(
                (got - expected).abs() < 1e-12,
                "A={big_a} a={a} n={n}: {got} vs {expected}"
            );
        }
        // a = 1, z = 1/2 evaluates to 10/9
        let pf = two_atom(4.0, 1.0, 2);
        let beta1 = 2.0f64.ln() / 2.0;
        let got = pf.log_chebyshev_ratio(Beta::ZERO, Beta::Finite(beta1));
        assert!((got - (10.0f64 / 9.0).ln()).abs() < 1e-12);
    }

    #[test]
    fn verify_schedule_two_point() {
        let z = two_level();
        let s = CoolingSchedule::from_betas(vec![Beta::ZERO, Beta::Infinite], MoveKind::NonAdaptive)
            .unwrap();
        // ratio = Z(0)/Z(∞) = 2 ≤ 3
        let report = z.verify_schedule(&s, 3.0);
        assert!(report.pass);
        assert!((report.worst_log_ratio - 2.0f64.ln()).abs() < 1e-14);
        // constant Z passes at B = 1
        let flat = PartitionFunction::from_coeffs(&[5.0, 0.0, 0.0]).unwrap();
        assert!(flat.verify_schedule(&s, 1.0).pass);
    }

    #[test]
    fn verify_reversible_two_point() {
        let flat = PartitionFunction::from_coeffs(&[5.0, 0.0]).unwrap();
        let s = CoolingSchedule::from_betas(vec![Beta::ZERO, Beta::Infinite], MoveKind::NonAdaptive)
            .unwrap();
        assert!(flat.verify_reversible(&s, 1.0).pass);
        // forward ratio 2 > 1.5 fails even though the reverse direction is fine
        let z = two_level();
        let rep = z.verify_reversible(&s, 1.5);
        assert!(!rep.pass);
        assert!(!rep.forward.pass);
    }

    #[test]
    fn beta_ordering_and_mirror() {
        assert!(Beta::Finite(1.0) < Beta::Infinite);
        assert!(Beta::Finite(1.0) < Beta::Finite(2.0));
        assert_eq!(Beta::Finite(1.0).mirror(Beta::Infinite), Beta::Infinite);
        assert_eq!(
            Beta::Finite(1.0).mirror(Beta::Finite(3.0)),
            Beta::Finite(5.0)
        );
        assert!(Beta::new(-0.1).is_err());
        assert!(Beta::new(f64::NAN).is_err());
        assert_eq!(Beta::new(f64::INFINITY), Ok(Beta::Infinite));
    }

    #[test]
    fn normalization_shifts_anchor_only() {
        let z = PartitionFunction::from_coeffs(&[4.0, 8.0, 2.0]).unwrap();
        let zn = z.normalized();
        assert_eq!(zn.log_coeffs()[0], LogWeight::ONE);
        let b = Beta::Finite(0.7);
        let bn = Beta::Finite(1.9);
        assert!(
            (z.log_chebyshev_ratio(b, bn) - zn.log_chebyshev_ratio(b, bn)).abs() < 1e-12
        );
    }
}
