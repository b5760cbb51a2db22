//! Non-adaptive cooling schedules: fixed formulas in `n` and `ln A`, the
//! greedy witness for the non-adaptive length lower bound, and the
//! reversibility augmentation used by warm starts.

use serde::Serialize;
use thiserror::Error;

use crate::partfn::Beta;
use crate::schedule::{CoolingSchedule, MoveKind, ScheduleError};

#[derive(Debug, Error)]
pub enum NonAdaptiveError {
    #[error("need n >= {min} (got {got})")]
    DegreeTooSmall { min: usize, got: usize },
    #[error("need ln A >= {min} (got {got})")]
    LnATooSmall { min: f64, got: f64 },
    #[error("lower-bound construction needs A - 1 > 4B (ln(A-1) = {ln_a_minus_1}, ln 4B = {ln_4b})")]
    PreconditionViolated { ln_a_minus_1: f64, ln_4b: f64 },
    #[error(transparent)]
    Schedule(#[from] ScheduleError),
}

/// The dense uniform schedule `0, 1/n, 2/n, …, ⌈n ln A⌉/n, ∞`.
///
/// Steps of `1/n` keep every interior ratio at most `e`; the last finite
/// point is at least `ln A`, which caps the final ratio `Z(·)/Z(∞)` at 2.
/// `⌈n ln A⌉ + 2` points in total.
pub fn uniform_schedule(n: usize, ln_a: f64) -> Result<CoolingSchedule, NonAdaptiveError> {
    if n < 1 {
        return Err(NonAdaptiveError::DegreeTooSmall { min: 1, got: n });
    }
    if ln_a < 0.0 || !ln_a.is_finite() {
        return Err(NonAdaptiveError::LnATooSmall { min: 0.0, got: ln_a });
    }
    let top = (n as f64 * ln_a).ceil() as u64;
    let mut betas: Vec<Beta> = (0..=top)
        .map(|k| Beta::Finite(k as f64 / n as f64))
        .collect();
    betas.push(Beta::Infinite);
    Ok(CoolingSchedule::from_betas(betas, MoveKind::NonAdaptive)?)
}

/// The geometric-tail schedule
/// `0, 1/n, …, k/n, kγ/n, kγ²/n, …, kγᵗ/n, ∞`
/// with `k = ⌈ln A⌉`, `γ = 1 + 1/ln A`, `t = ⌈(1 + ln A) ln n⌉`.
///
/// `k + t + 2` points before deduplication.
pub fn bezakova_schedule(n: usize, ln_a: f64) -> Result<CoolingSchedule, NonAdaptiveError> {
    if n < 2 {
        return Err(NonAdaptiveError::DegreeTooSmall { min: 2, got: n });
    }
    if !(ln_a >= 1.0) {
        return Err(NonAdaptiveError::LnATooSmall { min: 1.0, got: ln_a });
    }
    let k = ln_a.ceil() as u64;
    let gamma = 1.0 + 1.0 / ln_a;
    let t = ((1.0 + ln_a) * (n as f64).ln()).ceil() as u64;
    let nf = n as f64;
    let mut raw: Vec<f64> = (0..=k).map(|i| i as f64 / nf).collect();
    let mut point = k as f64 / nf;
    for _ in 0..t {
        point *= gamma;
        raw.push(point);
    }
    raw.dedup();
    let mut betas: Vec<Beta> = raw.into_iter().map(Beta::Finite).collect();
    betas.push(Beta::Infinite);
    Ok(CoolingSchedule::from_betas(betas, MoveKind::NonAdaptive)?)
}

/// Result of the greedy lower-bound construction.
#[derive(Clone, Debug, Serialize)]
pub struct LowerBoundReport {
    /// Steps taken by the greedy shortest sequence.
    pub greedy_length: usize,
    /// The analytic floor `ln(n/e)·(ln(A−1)/ln(4B) − 1)`.
    pub analytic_bound: f64,
    /// Whether `greedy_length ≥ analytic_bound` (always true; recorded).
    pub bound_holds: bool,
}

/// Greedy shortest sequence certifying the non-adaptive lower bound: from
/// `β_i`, find the largest `k ∈ {1..n}` with `(A−1)e^{-β_i k} > 4B` and
/// step by `ln(4B)/k`; once `(A−1)e^{-β_i} ≤ 4B`, jump to ∞.
///
/// Requires `A − 1 > 4B`. Returns the sequence and the analytic length
/// floor it is guaranteed to respect.
pub fn lower_bound_greedy(
    n: usize,
    ln_a: f64,
    b: f64,
) -> Result<(CoolingSchedule, LowerBoundReport), NonAdaptiveError> {
    if n < 1 {
        return Err(NonAdaptiveError::DegreeTooSmall { min: 1, got: n });
    }
    // ln(A−1) without forming A
    let ln_a_minus_1 = ln_a + (-(-ln_a).exp()).ln_1p();
    let ln_4b = (4.0 * b).ln();
    if ln_a_minus_1 <= ln_4b {
        return Err(NonAdaptiveError::PreconditionViolated { ln_a_minus_1, ln_4b });
    }
    let mut betas = vec![Beta::ZERO];
    let mut beta = 0.0f64;
    loop {
        // condition (A−1)e^{-βk} > 4B  ⇔  βk < ln(A−1) − ln(4B)
        let headroom = ln_a_minus_1 - ln_4b;
        if beta >= headroom {
            break;
        }
        // largest k with βk strictly below the headroom
        let k = if beta == 0.0 {
            n
        } else {
            let q = headroom / beta;
            ((q.ceil() - 1.0).max(1.0) as usize).min(n)
        };
        beta += ln_4b / k as f64;
        betas.push(Beta::Finite(beta));
    }
    betas.push(Beta::Infinite);
    let schedule = CoolingSchedule::from_betas(betas, MoveKind::NonAdaptive)?;
    let greedy_length = schedule.num_steps();
    let analytic_bound = (n as f64 / std::f64::consts::E).ln() * (ln_a_minus_1 / ln_4b - 1.0);
    Ok((
        schedule,
        LowerBoundReport {
            greedy_length,
            analytic_bound,
            bound_holds: greedy_length as f64 >= analytic_bound,
        },
    ))
}

/// Inserts the warm-start prefix `β_i + 1/n, β_i + 2/n, β_i + 4/n, …,
/// β_i + 2ᵗ/n` into every interval except the final one, `t` maximal with
/// `2ᵗ/n ≤ β_{i+1} − β_i`. Intervals shorter than `1/n` are left alone, and
/// points that collide with the interval's endpoint are deduplicated.
pub fn augment_reversible(
    schedule: &CoolingSchedule,
    n: usize,
) -> Result<CoolingSchedule, NonAdaptiveError> {
    if n < 1 {
        return Err(NonAdaptiveError::DegreeTooSmall { min: 1, got: n });
    }
    let betas = schedule.betas();
    let moves = schedule.moves();
    let mut out_betas: Vec<Beta> = vec![betas[0]];
    let mut out_moves: Vec<MoveKind> = Vec::new();
    let nf = n as f64;
    for i in 0..betas.len() - 1 {
        let hi = betas[i + 1];
        // the closing interval [β_{ℓ-1}, ∞) is never augmented
        if let (Beta::Finite(lo), Beta::Finite(hi_v)) = (betas[i], hi) {
            let gap = hi_v - lo;
            let mut offset = 1.0 / nf;
            while offset <= gap {
                let point = lo + offset;
                if point < hi_v {
                    out_betas.push(Beta::Finite(point));
                    out_moves.push(MoveKind::Augmented);
                }
                offset *= 2.0;
            }
        }
        out_betas.push(hi);
        out_moves.push(moves[i]);
    }
    Ok(CoolingSchedule::new(out_betas, out_moves)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::partfn::{Beta, PartitionFunction};
    use crate::zgen;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    fn finite(betas: &[Beta]) -> Vec<f64> {
        betas.iter().filter_map(|b| b.finite()).collect()
    }

    #[test]
    fn uniform_schedule_instantiation() {
        let s = uniform_schedule(2, 2.0).unwrap();
        assert_eq!(finite(s.betas()), vec![0.0, 0.5, 1.0, 1.5, 2.0]);
        assert_eq!(s.num_points(), (2.0f64 * 2.0).ceil() as usize + 2);
        // degenerate anchor collapses to the trivial schedule
        let s = uniform_schedule(1, 0.0).unwrap();
        assert_eq!(s.betas(), &[Beta::ZERO, Beta::Infinite]);
    }

    #[test]
    fn uniform_schedule_ratios_within_e_and_final_2() {
        let mut rng = ChaCha12Rng::seed_from_u64(100);
        for _ in 0..25 {
            let z = zgen::random_partition_function(&mut rng, 2..=12, 1.0..=6.0);
            let s = uniform_schedule(z.degree(), z.ln_a()).unwrap();
            let report = z.verify_schedule(&s, std::f64::consts::E);
            let (finite_pairs, last) = report.pairs.split_at(report.pairs.len() - 1);
            for p in finite_pairs {
                assert!(p.log_ratio <= 1.0 + 1e-9, "interior ratio {}", p.log_ratio);
            }
            assert!(last[0].log_ratio <= 2.0f64.ln() + 1e-9, "final ratio");
        }
    }

    #[test]
    fn bezakova_schedule_instantiation() {
        // n=2, lnA=1: k=1, γ=2, t=⌈2 ln 2⌉=2 gives 0, 0.5, 1, 2, ∞
        let s = bezakova_schedule(2, 1.0).unwrap();
        assert_eq!(finite(s.betas()), vec![0.0, 0.5, 1.0, 2.0]);
        assert_eq!(s.num_points(), 5);
    }

    #[test]
    fn bezakova_length_formula() {
        for (n, ln_a) in [(5usize, 2.0f64), (20, 7.5), (50, 12.0)] {
            let s = bezakova_schedule(n, ln_a).unwrap();
            let k = ln_a.ceil() as usize;
            let t = ((1.0 + ln_a) * (n as f64).ln()).ceil() as usize;
            assert_eq!(s.num_points(), k + t + 2, "n={n} ln_a={ln_a}");
        }
    }

    #[test]
    fn bezakova_is_chebyshev_at_2e_e() {
        // per-step bound from the 1/(2e) contraction plus monotonicity,
        // confirmed against the exact oracle
        let mut rng = ChaCha12Rng::seed_from_u64(200);
        let b = 2.0 * std::f64::consts::E * std::f64::consts::E;
        for _ in 0..100 {
            let z = zgen::random_partition_function(&mut rng, 2..=15, 1.0..=8.0);
            let s = bezakova_schedule(z.degree(), z.ln_a()).unwrap();
            let report = z.verify_schedule(&s, b);
            assert!(report.pass, "worst {}", report.worst_log_ratio);
        }
    }

    #[test]
    fn bezakova_per_step_contraction() {
        // Z(β') ≥ Z(β)/(2e) along consecutive geometric points
        let mut rng = ChaCha12Rng::seed_from_u64(300);
        for _ in 0..100 {
            let z = zgen::random_partition_function(&mut rng, 2..=15, 1.0..=8.0);
            let s = bezakova_schedule(z.degree(), z.ln_a()).unwrap();
            for (lo, hi) in s.steps() {
                if let (Beta::Finite(a), Beta::Finite(b)) = (lo, hi) {
                    let drop = z.log_z_at(a) - z.log_z_at(b);
                    assert!(
                        drop <= (2.0 * std::f64::consts::E).ln() + 1e-9,
                        "contraction {drop}"
                    );
                }
            }
        }
    }

    #[test]
    fn greedy_lower_bound_single_level() {
        // n = 1: every step is ln(4B) until the coefficient is decimated
        let ln_a = 12.0;
        let b = 2.0;
        let (s, report) = lower_bound_greedy(1, ln_a, b).unwrap();
        let ln_4b = (4.0 * b).ln();
        let ln_a_minus_1 = ln_a + (-(-ln_a as f64).exp()).ln_1p();
        let expected_finite = ((ln_a_minus_1 - ln_4b) / ln_4b).ceil() as usize;
        assert_eq!(s.num_steps(), expected_finite + 1);
        assert!(report.bound_holds);
        // at n = e the ln(n/e) factor vanishes
        assert!(report.analytic_bound >= 0.0 || report.greedy_length > 0);
    }

    #[test]
    fn greedy_lower_bound_beats_analytic_floor() {
        for (n, ln_a, b) in [
            (100usize, 20.0, std::f64::consts::E.powi(2)),
            (10, 8.0, 2.0),
            (50, 15.0, 10.0),
            (3, 30.0, std::f64::consts::E),
        ] {
            let (_, report) = lower_bound_greedy(n, ln_a, b).unwrap();
            assert!(
                report.greedy_length as f64 >= report.analytic_bound,
                "n={n} ln_a={ln_a} b={b}: {} < {}",
                report.greedy_length,
                report.analytic_bound
            );
        }
    }

    #[test]
    fn greedy_lower_bound_precondition() {
        assert!(matches!(
            lower_bound_greedy(5, 1.0, 100.0),
            Err(NonAdaptiveError::PreconditionViolated { .. })
        ));
    }

    #[test]
    fn augment_hand_trace() {
        let s = CoolingSchedule::from_betas(
            vec![Beta::ZERO, Beta::Finite(1.0), Beta::Infinite],
            MoveKind::NonAdaptive,
        )
        .unwrap();
        let a = augment_reversible(&s, 4).unwrap();
        // inserts 1/4 and 2/4; 4/4 collides with the endpoint
        assert_eq!(finite(a.betas()), vec![0.0, 0.25, 0.5, 1.0]);
        assert_eq!(
            a.moves(),
            &[
                MoveKind::Augmented,
                MoveKind::Augmented,
                MoveKind::NonAdaptive,
                MoveKind::Final
            ]
        );
    }

    #[test]
    fn augment_short_interval_untouched() {
        let s = CoolingSchedule::from_betas(
            vec![Beta::ZERO, Beta::Finite(0.1), Beta::Finite(0.3), Beta::Infinite],
            MoveKind::NonAdaptive,
        )
        .unwrap();
        let a = augment_reversible(&s, 4).unwrap();
        // both gaps are shorter than 1/n = 0.25
        assert_eq!(finite(a.betas()), vec![0.0, 0.1, 0.3]);
    }

    #[test]
    fn augment_never_touches_final_interval_and_keeps_originals() {
        let s = CoolingSchedule::from_betas(
            vec![Beta::ZERO, Beta::Finite(0.8), Beta::Finite(2.0), Beta::Infinite],
            MoveKind::NonAdaptive,
        )
        .unwrap();
        let a = augment_reversible(&s, 8).unwrap();
        for b in s.betas() {
            assert!(a.betas().contains(b), "original point {b:?} lost");
        }
        // nothing between 2.0 and ∞
        assert_eq!(a.betas().last(), Some(&Beta::Infinite));
        let last_finite = finite(a.betas()).last().copied().unwrap();
        assert_eq!(last_finite, 2.0);
    }

    #[test]
    fn augment_preserves_forward_and_gains_reverse() {
        let mut rng = ChaCha12Rng::seed_from_u64(400);
        let b = 3.0e6;
        for _ in 0..25 {
            let z = zgen::random_partition_function(&mut rng, 3..=12, 1.5..=6.0);
            let s = uniform_schedule(z.degree(), z.ln_a()).unwrap();
            let a = augment_reversible(&s, z.degree()).unwrap();
            assert!(z.verify_schedule(&a, std::f64::consts::E).pass);
            assert!(z.verify_reversible(&a, b).pass);
        }
    }

    #[test]
    fn verify_reversible_on_explicit_example() {
        // two-level Z: forward (0,∞) ratio is 2; reverse is (Z(∞)/Z(0))² ≤ 1
        let z = PartitionFunction::from_coeffs(&[1.0, 1.0]).unwrap();
        let s = CoolingSchedule::from_betas(
            vec![Beta::ZERO, Beta::Infinite],
            MoveKind::NonAdaptive,
        )
        .unwrap();
        assert!(z.verify_reversible(&s, 2.0).pass);
        assert!(!z.verify_reversible(&s, 1.5).pass);
    }
}
