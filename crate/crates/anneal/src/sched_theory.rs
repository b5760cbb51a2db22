//! Constructive schedule existence machinery.
//!
//! The log-partition curve `f(β) = ln Z(β)` is decreasing and convex, so it
//! admits a piecewise-linear over-approximation with few pieces whose
//! segment midpoints sag at most 1 below the chord. Threading a geometric
//! ladder through each segment yields an `e²`-Chebyshev schedule of length
//! `O((ln ln A)·√((ln A) ln n))`; taking maximal steps directly against the
//! exact oracle yields the length-optimal schedule for any bound `B`.

use serde::Serialize;
use thiserror::Error;

use crate::partfn::{Beta, PartitionFunction};
use crate::schedule::{CoolingSchedule, MoveKind, ScheduleError};

/// Bisection tolerance (absolute, in β) for breakpoints and curve roots;
/// downstream verifications all carry at least 1e-9 of slack.
pub const ROOT_TOL: f64 = 1e-10;

#[derive(Debug, Error, PartialEq)]
pub enum AssumptionError {
    #[error("assumption violated: ln n >= 1 requires n >= 3 (got n = {0})")]
    DegreeTooSmall(usize),
    #[error("assumption violated: ln ln A >= 1 requires ln A >= e (got ln A = {0})")]
    AnchorTooSmall(f64),
    #[error("assumption violated: A >= ln n (got ln A = {ln_a}, n = {n})")]
    AnchorBelowLogDegree { ln_a: f64, n: usize },
}

/// The standing parameter assumptions of the schedule constructions:
/// `ln n ≥ 1`, `ln ln A ≥ 1`, `A ≥ ln n`.
pub fn check_assumptions(n: usize, ln_a: f64) -> Result<(), AssumptionError> {
    if (n as f64).ln() < 1.0 {
        return Err(AssumptionError::DegreeTooSmall(n));
    }
    if ln_a < std::f64::consts::E {
        return Err(AssumptionError::AnchorTooSmall(ln_a));
    }
    if ln_a < (n as f64).ln().ln() {
        // A >= ln n, compared in log space
        return Err(AssumptionError::AnchorBelowLogDegree { ln_a, n });
    }
    Ok(())
}

#[derive(Debug, Error)]
pub enum TheoryError {
    #[error("curve is not decreasing and convex on the domain (slope check failed near x = {0})")]
    NotConvex(f64),
    #[error("breakpoint search stalled at x = {0}; curve may be degenerate")]
    Stalled(f64),
    #[error("need B > 1 (got {0})")]
    BadBound(f64),
    #[error(transparent)]
    Assumption(#[from] AssumptionError),
    #[error("constructed schedule failed its own oracle check (worst log ratio {0})")]
    VerificationFailed(f64),
    #[error(transparent)]
    Schedule(#[from] ScheduleError),
}

/// A decreasing convex curve on `[0, domain_end]`, with its slope.
pub trait ConvexCurve {
    fn value(&self, x: f64) -> f64;
    fn slope(&self, x: f64) -> f64;
}

/// The log-partition curve of an explicit instance, shifted so the curve
/// tends to 0 (i.e. `a_0 = 1`).
pub struct LogPartitionCurve {
    z: PartitionFunction,
}

impl LogPartitionCurve {
    pub fn new(z: &PartitionFunction) -> Self {
        LogPartitionCurve { z: z.normalized() }
    }
}

impl ConvexCurve for LogPartitionCurve {
    fn value(&self, x: f64) -> f64 {
        self.z.log_z_at(x)
    }
    fn slope(&self, x: f64) -> f64 {
        self.z.f_prime(x)
    }
}

/// `f(x) = n ln(1 + e^{-x})`, the curve of `Z(β) = (1 + e^{-β})^n`.
pub struct LogisticCurve {
    pub n: f64,
}

impl ConvexCurve for LogisticCurve {
    fn value(&self, x: f64) -> f64 {
        self.n * (-x).exp().ln_1p()
    }
    fn slope(&self, x: f64) -> f64 {
        -self.n / (1.0 + x.exp())
    }
}

/// Piecewise-linear over-approximation of a convex curve: the chords over
/// `breakpoints` lie above the curve, and each segment's midpoint value is
/// within 1 of the chord midpoint.
#[derive(Clone, Debug, Serialize)]
pub struct PlApprox {
    pub breakpoints: Vec<f64>,
    pub values: Vec<f64>,
}

impl PlApprox {
    pub fn piece_count(&self) -> usize {
        self.breakpoints.len() - 1
    }

    /// The chord interpolant `g(x)`.
    pub fn interpolate(&self, x: f64) -> f64 {
        let i = self
            .breakpoints
            .partition_point(|&b| b <= x)
            .clamp(1, self.breakpoints.len() - 1);
        let (x0, x1) = (self.breakpoints[i - 1], self.breakpoints[i]);
        let (y0, y1) = (self.values[i - 1], self.values[i]);
        y0 + (y1 - y0) * (x - x0) / (x1 - x0)
    }

    /// `(x, f(x), g(x))` rows over a uniform grid, as RFC 4180 CSV.
    pub fn to_csv(&self, curve: &impl ConvexCurve, samples: usize) -> String {
        let mut out = String::from("x,f,g\r\n");
        let end = *self.breakpoints.last().unwrap();
        for i in 0..=samples {
            let x = end * i as f64 / samples as f64;
            out.push_str(&format!("{x},{},{}\r\n", curve.value(x), self.interpolate(x)));
        }
        out
    }
}

/// Greedy piecewise-linear approximation on `[0, gamma]`: each breakpoint
/// is the largest point keeping the midpoint within 1 of the chord, found
/// by bisection on the residual (monotone because the slope increases).
pub fn pl_approx(
    curve: &impl ConvexCurve,
    gamma: f64,
    tol: f64,
) -> Result<PlApprox, TheoryError> {
    check_shape(curve, gamma)?;
    let residual = |lo: f64, y: f64| {
        curve.value((lo + y) / 2.0) - (curve.value(lo) + curve.value(y)) / 2.0 + 1.0
    };
    let mut breakpoints = vec![0.0];
    let mut values = vec![curve.value(0.0)];
    let mut lo = 0.0f64;
    while lo < gamma {
        let next = if residual(lo, gamma) >= 0.0 {
            gamma
        } else {
            let found = bisect_last_true(lo, gamma, tol, |y| residual(lo, y) >= 0.0);
            if found <= lo {
                return Err(TheoryError::Stalled(lo));
            }
            found
        };
        breakpoints.push(next);
        values.push(curve.value(next));
        lo = next;
    }
    Ok(PlApprox { breakpoints, values })
}

/// Rejects curves that fail a coarse decreasing-convex check.
fn check_shape(curve: &impl ConvexCurve, gamma: f64) -> Result<(), TheoryError> {
    let grid = 64;
    let mut prev_slope = f64::NEG_INFINITY;
    for i in 0..=grid {
        let x = gamma * i as f64 / grid as f64;
        let s = curve.slope(x);
        if s > 1e-12 || s < prev_slope - 1e-9 {
            return Err(TheoryError::NotConvex(x));
        }
        prev_slope = s;
    }
    Ok(())
}

/// Largest `x` in `[lo, hi]` with `pred(x)` true, given `pred(lo)` is true
/// and the predicate is monotone (true then false); absolute precision `tol`.
fn bisect_last_true(lo: f64, hi: f64, tol: f64, pred: impl Fn(f64) -> bool) -> f64 {
    let (mut lo, mut hi) = (lo, hi);
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if pred(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

/// Constructs an `e²`-Chebyshev schedule from the piecewise-linear
/// skeleton: through each segment `[γ_i, γ_{i+1}]` it threads the geometric
/// ladder `γ_i + (1 − 2^{-r})(γ_{i+1} − γ_i)`, `r = 1..t`, with
/// `t = ⌈ln ln A⌉`, then jumps to ∞ once the curve has dropped to 1.
///
/// The instance is normalized to `a_0 = 1` first (the Chebyshev condition
/// is scaling-invariant). If the whole curve already sits at or below 1
/// the schedule is just `(0, ∞)`. The output is re-checked against the
/// exact oracle before being returned.
pub fn existence_schedule(z: &PartitionFunction) -> Result<CoolingSchedule, TheoryError> {
    let curve = LogPartitionCurve::new(z);
    let f0 = curve.value(0.0);
    if f0 <= 1.0 {
        // nothing to anneal
        return Ok(CoolingSchedule::from_betas(
            vec![Beta::ZERO, Beta::Infinite],
            MoveKind::Final,
        )?);
    }
    let ln_a = f0;
    check_assumptions(z.degree(), ln_a)?;

    // γ with f(γ) = 1, bracketing by doubling
    let mut hi = 1.0;
    while curve.value(hi) > 1.0 {
        hi *= 2.0;
    }
    let gamma = bisect_last_true(0.0, hi, ROOT_TOL, |x| curve.value(x) >= 1.0);

    let pl = pl_approx(&curve, gamma, ROOT_TOL)?;
    let t = ln_a.ln().ceil().max(1.0) as u32;

    let mut betas: Vec<Beta> = vec![Beta::ZERO];
    let mut moves: Vec<MoveKind> = Vec::new();
    let push = |betas: &mut Vec<Beta>, moves: &mut Vec<MoveKind>, x: f64, kind: MoveKind| {
        if let Some(Beta::Finite(prev)) = betas.last() {
            if x <= *prev {
                return;
            }
        }
        betas.push(Beta::Finite(x));
        moves.push(kind);
    };
    for w in pl.breakpoints.windows(2) {
        let (lo, hi) = (w[0], w[1]);
        let delta = hi - lo;
        for r in 1..=t {
            push(
                &mut betas,
                &mut moves,
                lo + (1.0 - 0.5f64.powi(r as i32)) * delta,
                MoveKind::IntervalMove,
            );
        }
        push(&mut betas, &mut moves, hi, MoveKind::Optimal);
    }
    betas.push(Beta::Infinite);
    moves.push(MoveKind::Final);
    let schedule = CoolingSchedule::new(betas, moves)?;

    let report = z.verify_schedule(&schedule, std::f64::consts::E.powi(2));
    if !report.pass {
        return Err(TheoryError::VerificationFailed(report.worst_log_ratio));
    }
    Ok(schedule)
}

/// The length-optimal `B`-Chebyshev schedule: from each point, take the
/// maximal next temperature keeping the step ratio at most `B` (monotone in
/// the step end, so bisection applies), and jump to ∞ as soon as
/// `Z(β)/Z(∞) ≤ B`.
pub fn greedy_schedule(z: &PartitionFunction, b: f64) -> Result<CoolingSchedule, TheoryError> {
    if !(b > 1.0) {
        return Err(TheoryError::BadBound(b));
    }
    let log_b = b.ln();
    let log_z_inf = z.log_z(Beta::Infinite);
    let mut betas: Vec<Beta> = vec![Beta::ZERO];
    let mut beta = 0.0f64;
    loop {
        if z.log_z_at(beta) - log_z_inf <= log_b {
            break;
        }
        let step_ok =
            |y: f64| z.log_z_at(2.0 * y - beta) + z.log_z_at(beta) - 2.0 * z.log_z_at(y) <= log_b;
        // bracket the flip by doubling
        let mut hi = beta + 1.0 / z.degree().max(1) as f64;
        let mut doublings = 0;
        while step_ok(hi) {
            hi = beta + (hi - beta) * 2.0;
            doublings += 1;
            if doublings > 200 {
                return Err(TheoryError::Stalled(beta));
            }
        }
        let next = bisect_last_true(beta, hi, ROOT_TOL, step_ok);
        if next <= beta {
            return Err(TheoryError::Stalled(beta));
        }
        betas.push(Beta::Finite(next));
        beta = next;
    }
    betas.push(Beta::Infinite);
    Ok(CoolingSchedule::from_betas(betas, MoveKind::Optimal)?)
}

/// Grid report for the curvature floor of the lower-bound instance:
/// `f(β) + f(β+2x) − 2f(β+x) ≥ (n/20) x²` for `f = n ln(1+e^{-β})`.
#[derive(Clone, Debug, Serialize)]
pub struct LbInequalityReport {
    pub n: usize,
    pub grid: usize,
    pub min_slack: f64,
    pub argmin: (f64, f64),
}

/// Sweeps `(β, x) ∈ [0,1]²` on a `grid × grid` lattice and reports the
/// minimum slack of the inequality.
pub fn check_lb_inequality(n: usize, grid: usize) -> LbInequalityReport {
    let f = |x: f64| n as f64 * (-x).exp().ln_1p();
    let mut min_slack = f64::INFINITY;
    let mut argmin = (0.0, 0.0);
    for i in 0..grid {
        for j in 0..grid {
            let beta = i as f64 / (grid - 1) as f64;
            let x = j as f64 / (grid - 1) as f64;
            let slack = f(beta) + f(beta + 2.0 * x) - 2.0 * f(beta + x)
                - n as f64 / 20.0 * x * x;
            if slack < min_slack {
                min_slack = slack;
                argmin = (beta, x);
            }
        }
    }
    LbInequalityReport {
        n,
        grid,
        min_slack,
        argmin,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::zgen;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    struct Linear;
    impl ConvexCurve for Linear {
        fn value(&self, x: f64) -> f64 {
            5.0 - 0.5 * x
        }
        fn slope(&self, _: f64) -> f64 {
            -0.5
        }
    }

    #[test]
    fn linear_curve_needs_one_piece() {
        let pl = pl_approx(&Linear, 8.0, ROOT_TOL).unwrap();
        assert_eq!(pl.piece_count(), 1);
        assert_eq!(pl.breakpoints, vec![0.0, 8.0]);
    }

    #[test]
    fn non_convex_curve_is_diagnosed() {
        struct Wavy;
        impl ConvexCurve for Wavy {
            fn value(&self, x: f64) -> f64 {
                -x + (3.0 * x).sin()
            }
            fn slope(&self, x: f64) -> f64 {
                -1.0 + 3.0 * (3.0 * x).cos()
            }
        }
        assert!(matches!(
            pl_approx(&Wavy, 5.0, ROOT_TOL),
            Err(TheoryError::NotConvex(_))
        ));
    }

    fn gamma_of(curve: &impl ConvexCurve) -> f64 {
        let mut hi = 1.0;
        while curve.value(hi) > 1.0 {
            hi *= 2.0;
        }
        bisect_last_true(0.0, hi, ROOT_TOL, |x| curve.value(x) >= 1.0)
    }

    #[test]
    fn logistic_20_reproduction() {
        // the canonical illustration curve (1 + e^{-x})^20, cut at f(γ) = 1
        let curve = LogisticCurve { n: 20.0 };
        let gamma = gamma_of(&curve);
        let expected_gamma = -((1.0f64 / 20.0).exp() - 1.0).ln();
        assert!((gamma - expected_gamma).abs() < 1e-8, "gamma = {gamma}");
        let pl = pl_approx(&curve, gamma, ROOT_TOL).unwrap();
        let bound = 1.0
            + ((curve.value(0.0) - curve.value(gamma))
                * (curve.slope(0.0) / curve.slope(gamma)).ln())
            .sqrt();
        assert!(
            (pl.piece_count() as f64) <= bound,
            "{} pieces > bound {bound}",
            pl.piece_count()
        );
        // the chord lies above the curve everywhere
        for i in 0..=200 {
            let x = gamma * i as f64 / 200.0;
            assert!(pl.interpolate(x) >= curve.value(x) - 1e-9);
        }
    }

    #[test]
    fn midpoint_slack_invariant() {
        let mut rng = ChaCha12Rng::seed_from_u64(500);
        for _ in 0..30 {
            let z = zgen::random_partition_function(&mut rng, 3..=30, 3.0..=20.0);
            let curve = LogPartitionCurve::new(&z);
            let gamma = gamma_of(&curve);
            let pl = pl_approx(&curve, gamma, ROOT_TOL).unwrap();
            let j = pl.piece_count();
            for (idx, w) in pl.breakpoints.windows(2).enumerate() {
                let sag = curve.value((w[0] + w[1]) / 2.0)
                    - (curve.value(w[0]) + curve.value(w[1])) / 2.0;
                assert!(sag >= -1.0 - 1e-6, "sag {sag}");
                if idx + 1 < j {
                    // interior breakpoints are maximal: the sag is pinned at −1
                    assert!((sag + 1.0).abs() < 1e-6, "interior sag {sag}");
                }
            }
            // piece-count bound from the curve data
            let bound = 1.0
                + ((curve.value(0.0) - curve.value(gamma))
                    * (curve.slope(0.0) / curve.slope(gamma)).ln())
                .sqrt();
            assert!(j as f64 <= bound + 1e-9, "j = {j}, bound = {bound}");
        }
    }

    #[test]
    fn existence_trivial_for_constant_z() {
        let z = PartitionFunction::from_coeffs(&[7.0, 0.0, 0.0]).unwrap();
        let s = existence_schedule(&z).unwrap();
        assert_eq!(s.betas(), &[Beta::ZERO, Beta::Infinite]);
    }

    #[test]
    fn existence_binomial_64_meets_theorem_bound() {
        let z = zgen::binomial_partition_function(64);
        let s = existence_schedule(&z).unwrap();
        let ln_a = 64.0 * 2.0f64.ln();
        let bound = 4.0 * ln_a.ln() * (ln_a * 64.0f64.ln()).sqrt();
        assert!(
            (s.num_steps() as f64) <= bound,
            "{} steps > {bound}",
            s.num_steps()
        );
        assert!(z.verify_schedule(&s, std::f64::consts::E.powi(2)).pass);
    }

    #[test]
    fn existence_consecutive_triples_satisfy_step_condition() {
        let mut rng = ChaCha12Rng::seed_from_u64(600);
        for _ in 0..25 {
            let z = zgen::random_partition_function(&mut rng, 3..=25, 3.0..=15.0);
            let zn = z.normalized();
            let s = existence_schedule(&z).unwrap();
            for (lo, hi) in s.steps() {
                if let (Beta::Finite(a), Beta::Finite(b)) = (lo, hi) {
                    let lhs =
                        (zn.log_z_at(2.0 * b - a) + zn.log_z_at(a)) / 2.0 - zn.log_z_at(b);
                    assert!(lhs <= 1.0 + 1e-9, "step condition {lhs}");
                }
            }
        }
    }

    #[test]
    fn greedy_trivial_cases() {
        let constant = PartitionFunction::from_coeffs(&[2.0, 0.0]).unwrap();
        let s = greedy_schedule(&constant, 2.0).unwrap();
        assert_eq!(s.num_steps(), 1);

        // Z(0)/Z(∞) = 2 ≤ 3: single jump
        let z = PartitionFunction::from_coeffs(&[1.0, 1.0]).unwrap();
        let s = greedy_schedule(&z, 3.0).unwrap();
        assert_eq!(s.betas(), &[Beta::ZERO, Beta::Infinite]);
    }

    #[test]
    fn greedy_lower_bound_instance_length() {
        let b = std::f64::consts::E.powi(2);
        let z = zgen::binomial_partition_function(400);
        let s = greedy_schedule(&z, b).unwrap();
        // √(400/40) = √10, so at least 4 steps
        assert!(s.num_steps() >= 4, "length {}", s.num_steps());
        assert!(z.verify_schedule(&s, b).pass);
    }

    #[test]
    fn greedy_is_no_longer_than_other_valid_schedules() {
        let b = std::f64::consts::E.powi(2);
        let mut rng = ChaCha12Rng::seed_from_u64(700);
        for _ in 0..15 {
            let z = zgen::random_partition_function(&mut rng, 3..=20, 3.0..=12.0);
            let greedy = greedy_schedule(&z, b).unwrap();
            let mut rivals: Vec<CoolingSchedule> = vec![existence_schedule(&z).unwrap()];
            if let Ok(u) = crate::sched_nonadaptive::uniform_schedule(z.degree(), z.ln_a()) {
                rivals.push(u);
            }
            for rival in rivals {
                if z.verify_schedule(&rival, b).pass {
                    assert!(
                        greedy.num_steps() <= rival.num_steps(),
                        "greedy {} > rival {}",
                        greedy.num_steps(),
                        rival.num_steps()
                    );
                }
            }
        }
    }

    #[test]
    fn lb_inequality_grid() {
        // slack is 0 at x = 0 and never negative on the unit square
        let report = check_lb_inequality(1, 101);
        assert!(report.min_slack >= -1e-9, "min slack {}", report.min_slack);
        let f = |x: f64| (-x).exp().ln_1p();
        assert_eq!(f(0.3) + f(0.3) - 2.0 * f(0.3), 0.0);

        // slack scales linearly in n
        let r5 = check_lb_inequality(5, 41);
        let r1 = check_lb_inequality(1, 41);
        assert!((r5.min_slack - 5.0 * r1.min_slack).abs() < 1e-9);
    }

    #[test]
    fn assumption_checks_name_the_violation() {
        assert!(matches!(
            check_assumptions(2, 10.0),
            Err(AssumptionError::DegreeTooSmall(2))
        ));
        assert!(matches!(
            check_assumptions(10, 1.0),
            Err(AssumptionError::AnchorTooSmall(_))
        ));
        assert!(check_assumptions(10, 5.0).is_ok());
    }
}
