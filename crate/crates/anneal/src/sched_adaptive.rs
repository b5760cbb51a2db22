//! The adaptive cooling-schedule generator.
//!
//! Working only from Hamiltonian samples, the algorithm walks the β axis
//! from 0 to the anchor `ln A`. At each position it locates a Hamiltonian
//! interval that carries an `h`-fraction of the Gibbs mass, uses indicator
//! frequencies on that interval to roughly estimate the Chebyshev step
//! quality, and takes the largest step the estimate certifies. A step can
//! be *optimal* (the estimator found the cap), *long* (the estimator's
//! width constraint was the binding limit), or an *interval* move (the
//! heavy interval ran out before the width cap; a geometric bridge crosses
//! its remaining range and the interval is retired). Every oracle batch,
//! move, and failure is recorded in a [`RunTranscript`].
//!
//! Faithful mode uses the published constants for the per-call sample size
//! `s = ⌈(8/h) ln(1/δ)⌉`; desk mode keeps every threshold but lets the
//! caller cap `s`, and correctness is certified after the fact against the
//! exact oracle instead of by the concentration bounds.

use std::collections::HashSet;

use serde::Serialize;
use thiserror::Error;

use crate::partfn::{Beta, PartitionFunction};
use crate::samplers::HamiltonianSampler;
use crate::schedule::{CoolingSchedule, MoveKind, ScheduleError};
use crate::sched_theory::{check_assumptions, AssumptionError};

/// Chebyshev bound the output schedule is guaranteed to meet.
pub const CHEBYSHEV_BOUND: f64 = 3.0e6;
/// Threshold of the rough-estimator predicate.
pub const EST_THRESHOLD: f64 = 2000.0;
/// Lower target `c₁ = e²` that optimal moves additionally meet.
pub fn optimal_floor() -> f64 {
    std::f64::consts::E.powi(2)
}

/// One interval `[lo, hi]` (inclusive) of Hamiltonian levels.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct Interval {
    pub lo: u64,
    pub hi: u64,
}

impl Interval {
    pub fn width(&self) -> u64 {
        self.hi - self.lo
    }

    pub fn contains(&self, level: u64) -> bool {
        self.lo <= level && level <= self.hi
    }
}

/// Ordered partition of `{0, …, n}` into intervals whose width grows like
/// `⌊lo/√(ln A)⌋`, so each interval resolves the Hamiltonian to within the
/// relative accuracy the rough estimator needs.
#[derive(Clone, Debug, Serialize)]
pub struct IntervalPartition {
    intervals: Vec<Interval>,
    n: u64,
    ln_a: f64,
}

impl IntervalPartition {
    pub fn intervals(&self) -> &[Interval] {
        &self.intervals
    }

    pub fn len(&self) -> usize {
        self.intervals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.intervals.is_empty()
    }

    /// Index of the interval containing `level`.
    pub fn locate(&self, level: u64) -> usize {
        debug_assert!(level <= self.n);
        self.intervals.partition_point(|iv| iv.hi < level)
    }

    /// The size bound `4 √(ln A) ln n`.
    pub fn size_bound(&self) -> f64 {
        4.0 * self.ln_a.sqrt() * (self.n as f64).ln()
    }
}

/// Builds the partition inductively from `[0, 0]`: after covering
/// `{0, …, b−1}`, the next interval is `[b, min(b + ⌊b/√(ln A)⌋, n)]`.
pub fn build_partition(n: usize, ln_a: f64) -> IntervalPartition {
    assert!(ln_a > 0.0, "partition needs ln A > 0");
    let sqrt_ln_a = ln_a.sqrt();
    let n = n as u64;
    let mut intervals = vec![Interval { lo: 0, hi: 0 }];
    let mut b = 1u64;
    while b <= n {
        let w = (b as f64 / sqrt_ln_a).floor() as u64;
        let hi = (b + w).min(n);
        intervals.push(Interval { lo: b, hi });
        b = hi + 1;
    }
    IntervalPartition { intervals, n, ln_a }
}

/// Exact probability that `H(X) ∈ iv` for `X ~ μ_β` under an explicit
/// instance; the oracle side of the heaviness machinery.
pub fn interval_mass(z: &PartitionFunction, iv: &Interval, beta: Beta) -> f64 {
    match beta {
        Beta::Finite(b) => {
            let log_mass = crate::logspace::log_sum_exp(
                z.log_coeffs()
                    .iter()
                    .enumerate()
                    .filter(|(i, w)| iv.contains(*i as u64) && !w.is_zero())
                    .map(|(i, w)| w.ln() - b * i as f64),
            );
            (log_mass - z.log_z_at(b)).exp()
        }
        Beta::Infinite => {
            if iv.contains(0) {
                1.0
            } else {
                0.0
            }
        }
    }
}

/// Faithful or desk operation; desk substitutes the per-call sample count.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Mode {
    Faithful,
    Desk,
}

/// Knobs of the adaptive run. Faithful mode uses the published constants
/// exactly; desk mode replaces the per-call sample count `s` with
/// `desk_samples` while keeping all thresholds and precisions.
#[derive(Clone, Copy, Debug)]
pub struct AdaptiveConfig {
    pub delta_prime: f64,
    pub mode: Mode,
    pub desk_samples: u64,
}

impl Default for AdaptiveConfig {
    fn default() -> Self {
        AdaptiveConfig {
            delta_prime: 0.1,
            mode: Mode::Desk,
            desk_samples: 2000,
        }
    }
}

/// Parameters derived from `(n, ln A, δ′)`.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct DerivedParams {
    pub partition_size: usize,
    /// Heaviness threshold `h = 1/(8|P|)`.
    pub h: f64,
    /// Per-call failure budget `δ = δ′/(1600 (ln n)² (ln A)²)`.
    pub delta: f64,
    /// Per-call sample count `s` actually used.
    pub s: u64,
    /// Geometric-bridge depth `t = ⌈ln ln A⌉`.
    pub t: u32,
}

fn derive_params(n: usize, ln_a: f64, partition_size: usize, cfg: &AdaptiveConfig) -> DerivedParams {
    let h = 1.0 / (8.0 * partition_size as f64);
    let ln_n = (n as f64).ln().max(1.0);
    let delta = cfg.delta_prime / (1600.0 * ln_n.powi(2) * ln_a.max(1.0).powi(2));
    let s_faithful = ((8.0 / h) * (1.0 / delta).ln()).ceil() as u64;
    let s = match cfg.mode {
        Mode::Faithful => s_faithful,
        Mode::Desk => cfg.desk_samples,
    };
    let t = if ln_a <= 1.0 {
        1
    } else {
        ln_a.ln().ceil().max(1.0) as u32
    };
    DerivedParams {
        partition_size,
        h,
        delta,
        s,
        t,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum BatchOp {
    FindHeavy,
    IsHeavy,
    Est,
}

/// One batch of oracle draws, as recorded in the transcript.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct OracleBatch {
    pub op: BatchOp,
    pub beta: Beta,
    pub samples: u64,
}

/// One move of the schedule loop.
#[derive(Clone, Debug, Serialize)]
pub struct MoveRecord {
    pub kind: MoveKind,
    pub from: f64,
    pub beta_star: f64,
    pub cap: f64,
    pub interval: Interval,
    pub emitted: Vec<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub enum FailureEvent {
    HeavyNotFound { beta: f64 },
    SampleStarvation { beta: f64 },
}

/// Seeded record of every oracle batch, move, and failure of a run.
#[derive(Clone, Debug, Serialize)]
pub struct RunTranscript {
    pub seed: u64,
    pub n: usize,
    pub ln_a: f64,
    pub mode: Mode,
    pub params: DerivedParams,
    pub batches: Vec<OracleBatch>,
    pub moves: Vec<MoveRecord>,
    pub failures: Vec<FailureEvent>,
    /// Total oracle draws; always the sum of the batch sizes.
    pub total_draws: u64,
}

impl RunTranscript {
    pub fn tally(&self, kind: MoveKind) -> usize {
        self.moves.iter().filter(|m| m.kind == kind).count()
    }

    /// Temperatures emitted by interval moves (the bound on these is
    /// separate from the bound on the move count).
    pub fn interval_emissions(&self) -> usize {
        self.moves
            .iter()
            .filter(|m| m.kind == MoveKind::IntervalMove)
            .map(|m| m.emitted.len())
            .sum()
    }

    /// One JSON object per oracle batch, newline-separated.
    pub fn batches_jsonl(&self) -> String {
        self.batches
            .iter()
            .map(|b| serde_json::to_string(b).expect("batch serializes"))
            .collect::<Vec<_>>()
            .join("\n")
    }
}

#[derive(Debug, Error)]
pub enum AdaptiveError {
    #[error("no allowed interval reached the heaviness threshold at β = {0}")]
    HeavyNotFound(f64),
    #[error("rough estimator starved (no samples landed in the interval) at β = {0}")]
    SampleStarvation(f64),
    #[error("run exceeded the move-count guard; instance is degenerate for these parameters")]
    RunawayLoop,
    #[error("faithful-mode sample budget exceeded (drew {drawn}, budget {budget})")]
    BudgetExceeded { drawn: u64, budget: u128 },
    #[error(transparent)]
    Assumption(#[from] AssumptionError),
    #[error(transparent)]
    Schedule(#[from] ScheduleError),
}

/// A failed run still surrenders its transcript.
#[derive(Debug)]
pub struct AdaptiveFailure {
    pub error: AdaptiveError,
    pub transcript: Box<RunTranscript>,
}

impl std::fmt::Display for AdaptiveFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.error)
    }
}

impl std::error::Error for AdaptiveFailure {}

/// A successful run: the schedule plus its transcript.
#[derive(Debug)]
pub struct AdaptiveRun {
    pub schedule: CoolingSchedule,
    pub transcript: RunTranscript,
}

/// `U ≥ 2h` on `s` fresh draws: the one-sided heaviness test.
pub fn is_heavy(
    iv: &Interval,
    beta: Beta,
    sampler: &mut dyn HamiltonianSampler,
    h: f64,
    s: u64,
) -> bool {
    let hits = (0..s).filter(|_| iv.contains(sampler.sample(beta))).count();
    hits as f64 / s as f64 >= 2.0 * h
}

/// Histogram of `s` draws over the allowed intervals; returns the index of
/// the fullest one (ties go to the lowest interval). Fails when no allowed
/// interval collects `2hs` samples.
pub fn find_heavy(
    beta: Beta,
    bad: &HashSet<usize>,
    partition: &IntervalPartition,
    sampler: &mut dyn HamiltonianSampler,
    h: f64,
    s: u64,
) -> Result<usize, AdaptiveError> {
    let mut counts = vec![0u64; partition.len()];
    for _ in 0..s {
        let level = sampler.sample(beta);
        let idx = partition.locate(level);
        if !bad.contains(&idx) {
            counts[idx] += 1;
        }
    }
    let (best, &best_count) = counts
        .iter()
        .enumerate()
        .max_by(|(i, a), (j, b)| a.cmp(b).then(j.cmp(i)))
        .expect("partition is non-empty");
    if (best_count as f64) < 2.0 * h * s as f64 {
        return Err(AdaptiveError::HeavyNotFound(match beta {
            Beta::Finite(b) => b,
            Beta::Infinite => f64::INFINITY,
        }));
    }
    Ok(best)
}

/// Rough ratio estimate from indicator frequencies on a shared heavy
/// interval: `EST = (U₁/U₂)·e^{lo(β₁−β₂)}`, valid when
/// `|β₁−β₂|·width ≤ 1`. Within a `4e` factor of `Z(β₂)/Z(β₁)` with high
/// probability. Returned in log space; starved denominators are an error.
pub fn est_ratio(
    iv: &Interval,
    beta1: Beta,
    beta2: Beta,
    sampler: &mut dyn HamiltonianSampler,
    s: u64,
) -> Result<f64, AdaptiveError> {
    let (b1, b2) = match (beta1, beta2) {
        (Beta::Finite(a), Beta::Finite(b)) => (a, b),
        _ => unreachable!("rough estimation runs at finite temperatures"),
    };
    debug_assert!(
        (b1 - b2).abs() * iv.width() as f64 <= 1.0 + 1e-9,
        "estimator width constraint violated"
    );
    let hits = |sampler: &mut dyn HamiltonianSampler, beta: Beta| -> u64 {
        (0..s).filter(|_| iv.contains(sampler.sample(beta))).count() as u64
    };
    let u1 = hits(sampler, beta1);
    let u2 = hits(sampler, beta2);
    if u2 == 0 {
        return Err(AdaptiveError::SampleStarvation(b2));
    }
    if u1 == 0 {
        return Ok(f64::NEG_INFINITY);
    }
    Ok((u1 as f64).ln() - (u2 as f64).ln() + iv.lo as f64 * (b1 - b2))
}

#[derive(Debug, Error, PartialEq)]
pub enum BsearchError {
    #[error("predicate is false at the left endpoint")]
    ContractViolation,
}

/// Rightmost point of `[lo, hi]` satisfying a monotone (true-then-false)
/// predicate: returns `hi` outright if the predicate holds there, else the
/// last-true endpoint of a bracket narrowed to `precision`.
pub fn monotone_bsearch(
    lo: f64,
    hi: f64,
    precision: f64,
    mut predicate: impl FnMut(f64) -> bool,
) -> Result<f64, BsearchError> {
    if !predicate(lo) {
        return Err(BsearchError::ContractViolation);
    }
    Ok(bsearch_assume_lo(lo, hi, precision, predicate).0)
}

/// Bisection that trusts the caller about the left endpoint (the algorithm
/// has just established it, and re-testing a randomized predicate would
/// burn samples). Returns the last-true point and whether `hi` itself
/// passed.
fn bsearch_assume_lo(
    lo: f64,
    hi: f64,
    precision: f64,
    mut predicate: impl FnMut(f64) -> bool,
) -> (f64, bool) {
    if hi <= lo {
        return (lo, false);
    }
    if predicate(hi) {
        return (hi, true);
    }
    let (mut lo, mut hi) = (lo, hi);
    while hi - lo > precision {
        let mid = 0.5 * (lo + hi);
        if predicate(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    (lo, false)
}

/// Sample budget of a faithful run and the oracle accuracy it needs.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct QBudget {
    /// `10⁷ (ln A)((ln n) + ln ln A)⁵ ln(1/δ′)`.
    pub max_samples: u128,
    /// Required sampler variation distance `δ′/(2Q)`.
    pub sampler_accuracy: f64,
}

pub fn q_budget(n: usize, ln_a: f64, delta_prime: f64) -> QBudget {
    let ln_n = (n as f64).ln();
    let q = 1.0e7 * ln_a * (ln_n + ln_a.ln()).powi(5) * (1.0 / delta_prime).ln();
    QBudget {
        max_samples: q.ceil() as u128,
        sampler_accuracy: delta_prime / (2.0 * q),
    }
}

struct Runner<'a> {
    sampler: &'a mut dyn HamiltonianSampler,
    transcript: RunTranscript,
}

impl<'a> Runner<'a> {
    fn record(&mut self, op: BatchOp, beta: Beta, samples: u64) {
        self.transcript.batches.push(OracleBatch { op, beta, samples });
        self.transcript.total_draws += samples;
    }

    fn is_heavy(&mut self, iv: &Interval, beta: f64, h: f64, s: u64) -> bool {
        self.record(BatchOp::IsHeavy, Beta::Finite(beta), s);
        is_heavy(iv, Beta::Finite(beta), self.sampler, h, s)
    }

    fn find_heavy(
        &mut self,
        beta: f64,
        bad: &HashSet<usize>,
        partition: &IntervalPartition,
        h: f64,
        s: u64,
    ) -> Result<usize, AdaptiveError> {
        self.record(BatchOp::FindHeavy, Beta::Finite(beta), s);
        find_heavy(Beta::Finite(beta), bad, partition, self.sampler, h, s)
    }

    /// The step predicate: the product of the two rough ratios estimates
    /// the Chebyshev quantity `Z(β₀)Z(2x−β₀)/Z(x)²` directly (the interval
    /// offsets cancel), and the step is allowed while it stays under the
    /// threshold. A starved estimate counts as predicate-false, which only
    /// shortens the step.
    fn est_predicate(&mut self, iv: &Interval, beta0: f64, x: f64, s: u64) -> bool {
        self.record(BatchOp::Est, Beta::Finite(x), 2 * s);
        let first = est_ratio(iv, Beta::Finite(x), Beta::Finite(beta0), self.sampler, s);
        self.record(BatchOp::Est, Beta::Finite(x), 2 * s);
        let second = est_ratio(
            iv,
            Beta::Finite(x),
            Beta::Finite(2.0 * x - beta0),
            self.sampler,
            s,
        );
        match (first, second) {
            (Ok(a), Ok(b)) => a + b <= EST_THRESHOLD.ln(),
            (Err(AdaptiveError::SampleStarvation(beta)), _)
            | (_, Err(AdaptiveError::SampleStarvation(beta))) => {
                self.transcript
                    .failures
                    .push(FailureEvent::SampleStarvation { beta });
                false
            }
            _ => false,
        }
    }
}

/// Runs the adaptive schedule loop against `sampler` and returns the
/// schedule with its transcript.
///
/// `ln_a` is the analytic anchor of the instance (never estimated), and
/// `n` its degree. Faithful mode refuses parameters outside the standing
/// assumptions and enforces the sample budget; desk mode runs any
/// instance. The final two points are always `ln A` and ∞.
pub fn print_cooling_schedule(
    sampler: &mut dyn HamiltonianSampler,
    n: usize,
    ln_a: f64,
    cfg: &AdaptiveConfig,
    seed: u64,
) -> Result<AdaptiveRun, AdaptiveFailure> {
    assert!(
        cfg.delta_prime > 0.0 && cfg.delta_prime < 1.0,
        "failure probability must lie in (0, 1)"
    );
    let trivial_transcript = |params| RunTranscript {
        seed,
        n,
        ln_a,
        mode: cfg.mode,
        params,
        batches: Vec::new(),
        moves: Vec::new(),
        failures: Vec::new(),
        total_draws: 0,
    };

    // nothing to anneal: a single jump covers the whole axis
    if ln_a <= 0.0 || n == 0 {
        let params = DerivedParams {
            partition_size: 1,
            h: 1.0 / 8.0,
            delta: cfg.delta_prime,
            s: 0,
            t: 1,
        };
        let schedule =
            CoolingSchedule::from_betas(vec![Beta::ZERO, Beta::Infinite], MoveKind::Final)
                .map_err(|e| AdaptiveFailure {
                    error: e.into(),
                    transcript: Box::new(trivial_transcript(params)),
                })?;
        return Ok(AdaptiveRun {
            schedule,
            transcript: trivial_transcript(params),
        });
    }

    let partition = build_partition(n, ln_a);
    let params = derive_params(n, ln_a, partition.len(), cfg);
    let mut runner = Runner {
        sampler,
        transcript: trivial_transcript(params),
    };
    if cfg.mode == Mode::Faithful {
        if let Err(e) = check_assumptions(n, ln_a) {
            return Err(AdaptiveFailure {
                error: e.into(),
                transcript: Box::new(runner.transcript),
            });
        }
    }
    let budget = q_budget(n, ln_a, cfg.delta_prime);

    let mut bad: HashSet<usize> = HashSet::new();
    let mut betas: Vec<Beta> = vec![Beta::ZERO];
    let mut moves: Vec<MoveKind> = Vec::new();
    let emit = |betas: &mut Vec<Beta>, moves: &mut Vec<MoveKind>, x: f64, kind: MoveKind| -> bool {
        if let Some(Beta::Finite(prev)) = betas.last() {
            if x <= *prev {
                return false;
            }
        }
        betas.push(Beta::Finite(x));
        moves.push(kind);
        true
    };

    let nf = n as f64;
    let move_guard = (380.0 * ln_a.sqrt().max(1.0) * nf.ln().max(1.0) * (params.t as f64)
        + 1000.0) as usize;
    let mut cursor = 0.0f64;
    let fail = |error: AdaptiveError, transcript: RunTranscript| AdaptiveFailure {
        error,
        transcript: Box::new(transcript),
    };

    while cursor < ln_a {
        if runner.transcript.moves.len() > move_guard {
            return Err(fail(AdaptiveError::RunawayLoop, runner.transcript));
        }
        if cfg.mode == Mode::Faithful && runner.transcript.total_draws as u128 > budget.max_samples
        {
            return Err(fail(
                AdaptiveError::BudgetExceeded {
                    drawn: runner.transcript.total_draws,
                    budget: budget.max_samples,
                },
                runner.transcript,
            ));
        }

        // 1. a heavy interval at the current temperature
        let iv_idx = match runner.find_heavy(cursor, &bad, &partition, params.h, params.s) {
            Ok(idx) => idx,
            Err(e) => {
                runner
                    .transcript
                    .failures
                    .push(FailureEvent::HeavyNotFound { beta: cursor });
                return Err(fail(e, runner.transcript));
            }
        };
        let iv = partition.intervals()[iv_idx];

        // 2. the estimator works while |Δβ|·width ≤ 1
        let cap = if iv.width() == 0 {
            ln_a
        } else {
            (cursor + 1.0 / iv.width() as f64).min(ln_a)
        };

        // 3. how far the interval stays heavy
        let (beta_star, star_hit_cap) =
            bsearch_assume_lo(cursor, cap, 1.0 / (2.0 * nf), |x| {
                runner.is_heavy(&iv, x, params.h, params.s)
            });

        // 4. the largest certified step within (cursor, (cursor + β*)/2]
        let mid = 0.5 * (cursor + beta_star);
        let (step, step_hit_mid) = bsearch_assume_lo(cursor, mid, 1.0 / (4.0 * nf), |x| {
            runner.est_predicate(&iv, cursor, x, params.s)
        });

        if !step_hit_mid && step > cursor {
            // optimal move: the estimator found the edge of the allowed band
            emit(&mut betas, &mut moves, step, MoveKind::Optimal);
            runner.transcript.moves.push(MoveRecord {
                kind: MoveKind::Optimal,
                from: cursor,
                beta_star,
                cap,
                interval: iv,
                emitted: vec![step],
            });
            cursor = step;
        } else if star_hit_cap {
            // long move: the width constraint was binding; emit the midpoint
            // and restart beyond the cap
            let mut emitted = Vec::new();
            if emit(&mut betas, &mut moves, mid, MoveKind::Long) {
                emitted.push(mid);
            }
            runner.transcript.moves.push(MoveRecord {
                kind: MoveKind::Long,
                from: cursor,
                beta_star,
                cap,
                interval: iv,
                emitted,
            });
            cursor = beta_star;
        } else {
            // interval move: bridge the rest of the interval's heavy range
            // geometrically and retire it
            let gamma = beta_star - cursor;
            let mut emitted = Vec::new();
            for r in 1..=params.t {
                let x = cursor + (1.0 - 0.5f64.powi(r as i32)) * gamma;
                if emit(&mut betas, &mut moves, x, MoveKind::IntervalMove) {
                    emitted.push(x);
                }
            }
            if emit(&mut betas, &mut moves, cursor + gamma, MoveKind::IntervalMove) {
                emitted.push(cursor + gamma);
            }
            bad.insert(iv_idx);
            runner.transcript.moves.push(MoveRecord {
                kind: MoveKind::IntervalMove,
                from: cursor,
                beta_star,
                cap,
                interval: iv,
                emitted,
            });
            cursor = beta_star;
        }
    }

    // close at the anchor: Z(ln A)/Z(∞) ≤ 2, so the jump to ∞ is safe
    emit(&mut betas, &mut moves, ln_a, MoveKind::Long);
    betas.push(Beta::Infinite);
    moves.push(MoveKind::Final);

    match CoolingSchedule::new(betas, moves) {
        Ok(schedule) => Ok(AdaptiveRun {
            schedule,
            transcript: runner.transcript,
        }),
        Err(e) => Err(fail(e.into(), runner.transcript)),
    }
}
