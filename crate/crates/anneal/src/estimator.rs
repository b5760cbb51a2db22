//! The telescoping-product estimator.
//!
//! Along a schedule `0 = β_0 < … < β_ℓ = ∞`, each ratio
//! `Z(β_{i+1})/Z(β_i)` has the unbiased estimator `W = e^{(β_i−β_{i+1})H(X)}`
//! for `X ~ μ_{β_i}`. Averaging `⌈16Bℓ/ε²⌉` draws per ratio and taking the
//! product reaches `(1±ε)·Z(∞)/Z(0)` with probability at least 3/4 when
//! the schedule is `B`-Chebyshev; running several independent estimates
//! and taking the median drives the failure probability down
//! exponentially. All products accumulate in log space.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha12Rng;
use serde::Serialize;
use thiserror::Error;

use crate::models::{CountTarget, GibbsSystem};
use crate::partfn::{Beta, PartitionFunction};
use crate::samplers::{ExactSampler, HamiltonianSampler};
use crate::sched_adaptive::{print_cooling_schedule, AdaptiveConfig, AdaptiveFailure, RunTranscript};
use crate::schedule::CoolingSchedule;

#[derive(Debug, Error)]
pub enum EstimateError {
    #[error("need at least one sample per ratio")]
    ZeroCount,
    #[error("need at least one estimate to amplify")]
    NothingToAmplify,
    #[error("ε must lie in (0, 1) (got {0})")]
    BadEpsilon(f64),
    #[error("finite-β target {0} needs a schedule point below it")]
    TargetBeyondSchedule(f64),
    #[error(transparent)]
    Model(#[from] crate::models::ModelError),
    #[error("schedule generation failed: {0}")]
    Schedule(#[from] AdaptiveFailure),
}

/// Sample mean of `W` for one step of the telescope.
#[derive(Clone, Debug, Serialize)]
pub struct RatioEstimate {
    pub from: Beta,
    pub to: Beta,
    /// Mean of the `W` draws; lies in [0, 1] since β < β′.
    pub mean: f64,
    pub count: u64,
}

/// What the estimate is entitled to claim.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub enum Confidence {
    /// Full per-ratio sample counts: the 3/4 product guarantee.
    ThreeQuarters,
    /// Median of `runs` independent estimates.
    Amplified { runs: usize },
    /// Capped sample counts: empirical only.
    Empirical,
}

/// A point estimate of a count (or partition value) in log space.
#[derive(Clone, Debug, Serialize)]
pub struct CountEstimate {
    /// `ln` of the estimated quantity; `None` when some ratio collapsed to
    /// zero (no sample hit the surviving levels).
    pub log_estimate: Option<f64>,
    pub eps: f64,
    pub confidence: Confidence,
    pub per_ratio: Vec<RatioEstimate>,
    pub total_samples: u64,
}

impl CountEstimate {
    pub fn value(&self) -> Option<f64> {
        self.log_estimate.map(f64::exp)
    }
}

/// Mean of `count` draws of `W_{β,β′} = e^{(β−β′)H(X)}`, `X ~ μ_β`.
/// At `β′ = ∞` the weight degenerates to the indicator of `H = 0`.
pub fn sample_ratio(
    from: Beta,
    to: Beta,
    sampler: &mut dyn HamiltonianSampler,
    count: u64,
) -> Result<RatioEstimate, EstimateError> {
    if count == 0 {
        return Err(EstimateError::ZeroCount);
    }
    let mut total = 0.0f64;
    for _ in 0..count {
        total += ratio_weight(from, to, sampler.sample(from));
    }
    Ok(RatioEstimate {
        from,
        to,
        mean: total / count as f64,
        count,
    })
}

fn ratio_weight(from: Beta, to: Beta, h: u64) -> f64 {
    match (from, to) {
        (Beta::Finite(b), Beta::Finite(bn)) => ((b - bn) * h as f64).exp(),
        (_, Beta::Infinite) => {
            if h == 0 {
                1.0
            } else {
                0.0
            }
        }
        (Beta::Infinite, Beta::Finite(_)) => unreachable!("schedules increase"),
    }
}

/// Per-ratio sample count `⌈16Bℓ/ε²⌉` of the product guarantee.
pub fn per_ratio_count(b: f64, num_steps: usize, eps: f64) -> u64 {
    (16.0 * b * num_steps as f64 / (eps * eps)).ceil() as u64
}

/// Sampling plan for a product estimate.
#[derive(Clone, Copy, Debug)]
pub struct ProductPlan {
    /// Chebyshev constant of the schedule being consumed.
    pub b: f64,
    pub eps: f64,
    /// Cap on per-ratio samples; capping demotes the guarantee to
    /// [`Confidence::Empirical`].
    pub per_ratio_cap: Option<u64>,
}

impl ProductPlan {
    pub fn counts(&self, num_steps: usize) -> (u64, Confidence) {
        let full = per_ratio_count(self.b, num_steps, self.eps);
        match self.per_ratio_cap {
            Some(cap) if cap < full => (cap, Confidence::Empirical),
            _ => (full, Confidence::ThreeQuarters),
        }
    }
}

fn estimate_pairs(
    pairs: &[(Beta, Beta)],
    sampler: &mut dyn HamiltonianSampler,
    count: u64,
) -> Result<(Vec<RatioEstimate>, Option<f64>, u64), EstimateError> {
    let mut per_ratio = Vec::with_capacity(pairs.len());
    let mut log_product = Some(0.0f64);
    let mut total_samples = 0u64;
    for &(from, to) in pairs {
        let est = sample_ratio(from, to, sampler, count)?;
        total_samples += est.count;
        log_product = match (log_product, est.mean) {
            (Some(acc), m) if m > 0.0 => Some(acc + m.ln()),
            _ => None,
        };
        per_ratio.push(est);
    }
    Ok((per_ratio, log_product, total_samples))
}

/// Estimates `ln[Z(∞)/Z(0)]` along `schedule` by the telescoping product.
///
/// A ratio whose sample mean is exactly zero short-circuits the product to
/// a flagged zero estimate instead of propagating `-inf` arithmetic.
pub fn product_estimate(
    schedule: &CoolingSchedule,
    sampler: &mut dyn HamiltonianSampler,
    plan: &ProductPlan,
) -> Result<CountEstimate, EstimateError> {
    if !(plan.eps > 0.0 && plan.eps < 1.0) {
        return Err(EstimateError::BadEpsilon(plan.eps));
    }
    let (count, confidence) = plan.counts(schedule.num_steps());
    let pairs: Vec<(Beta, Beta)> = schedule.steps().collect();
    let (per_ratio, log_product, total_samples) = estimate_pairs(&pairs, sampler, count)?;
    Ok(CountEstimate {
        log_estimate: log_product,
        eps: plan.eps,
        confidence,
        per_ratio,
        total_samples,
    })
}

/// Chunk size of the parallel fan-out; fixed so results do not depend on
/// the worker count.
const CHUNK: u64 = 1 << 13;

/// Stream id for chunk `c` of ratio `r`; the documented split of the run
/// seed. Phase 0 is the schedule run, phase 1 the estimation phase, and
/// each (ratio, chunk) cell gets its own ChaCha stream under phase 2.
fn chunk_seed(seed: u64, ratio: usize, chunk: u64) -> u64 {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    rng.set_stream((2 << 60) | ((ratio as u64) << 24) | chunk);
    rng.next_u64()
}

/// Seed of the estimation phase derived from the run seed.
pub fn estimation_seed(seed: u64) -> u64 {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    rng.set_stream(1 << 60);
    rng.next_u64()
}

/// Parallel telescope over an explicit instance: each ratio's draws are
/// split into fixed chunks, chunk `(r, c)` sampling from its own derived
/// stream, so the merged result is identical for every worker count and
/// the merge (sums in chunk order) is order-independent.
pub fn product_estimate_parallel(
    z: &PartitionFunction,
    pairs: &[(Beta, Beta)],
    count: u64,
    seed: u64,
    workers: usize,
) -> (Vec<RatioEstimate>, Option<f64>, u64) {
    let chunks_per_ratio = count.div_ceil(CHUNK).max(1);
    let mut tasks = Vec::new();
    for (r, &(from, to)) in pairs.iter().enumerate() {
        for c in 0..chunks_per_ratio {
            let size = if c + 1 == chunks_per_ratio {
                count - c * CHUNK.min(count)
            } else {
                CHUNK
            };
            // a final partial chunk of zero draws can occur when count is a
            // multiple of the chunk size
            if size > 0 {
                tasks.push((r, c, from, to, size.min(count)));
            }
        }
    }
    let next = std::sync::atomic::AtomicUsize::new(0);
    let sums = std::sync::Mutex::new(vec![0.0f64; tasks.len()]);
    std::thread::scope(|scope| {
        for _ in 0..workers.max(1) {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
                if i >= tasks.len() {
                    break;
                }
                let (r, c, from, to, size) = tasks[i];
                let mut sampler = ExactSampler::new(z.clone(), chunk_seed(seed, r, c));
                let mut sum = 0.0f64;
                for _ in 0..size {
                    sum += ratio_weight(from, to, sampler.sample(from));
                }
                sums.lock().expect("no poisoned workers")[i] = sum;
            });
        }
    });
    let sums = sums.into_inner().expect("workers joined");
    let mut ratio_sums = vec![0.0f64; pairs.len()];
    for (i, &(r, ..)) in tasks.iter().enumerate() {
        ratio_sums[r] += sums[i];
    }
    let mut per_ratio = Vec::with_capacity(pairs.len());
    let mut log_product = Some(0.0f64);
    for (r, &(from, to)) in pairs.iter().enumerate() {
        let mean = ratio_sums[r] / count as f64;
        log_product = match (log_product, mean) {
            (Some(acc), m) if m > 0.0 => Some(acc + m.ln()),
            _ => None,
        };
        per_ratio.push(RatioEstimate {
            from,
            to,
            mean,
            count,
        });
    }
    (per_ratio, log_product, count * pairs.len() as u64)
}

/// Warm-start sample plan: the minimal per-ratio count `K ≥ 512ℓ/ε²` and
/// the pairwise-dependence tolerance `κ ≤ 2⁻²⁰ ε²/(K⁵ ℓ)` it assumes.
pub fn warm_sample_count(num_steps: usize, eps: f64) -> (u64, f64) {
    let k = (512.0 * num_steps as f64 / (eps * eps)).ceil();
    let kappa = 2.0f64.powi(-20) * eps * eps / (k.powi(5) * num_steps as f64);
    (k as u64, kappa)
}

/// Median (in log space) of independent estimates. Even counts average
/// the two central values; zero-flagged estimates sort below everything.
pub fn amplify(estimates: &[CountEstimate]) -> Result<CountEstimate, EstimateError> {
    if estimates.is_empty() {
        return Err(EstimateError::NothingToAmplify);
    }
    if estimates.len() == 1 {
        return Ok(estimates[0].clone());
    }
    let mut keyed: Vec<f64> = estimates
        .iter()
        .map(|e| e.log_estimate.unwrap_or(f64::NEG_INFINITY))
        .collect();
    keyed.sort_by(|a, b| a.partial_cmp(b).expect("log estimates are not NaN"));
    let m = keyed.len();
    let median = if m % 2 == 1 {
        keyed[m / 2]
    } else {
        let lo = keyed[m / 2 - 1];
        let hi = keyed[m / 2];
        if lo == f64::NEG_INFINITY {
            lo
        } else {
            0.5 * (lo + hi)
        }
    };
    Ok(CountEstimate {
        log_estimate: (median > f64::NEG_INFINITY).then_some(median),
        eps: estimates[0].eps,
        confidence: Confidence::Amplified {
            runs: estimates.len(),
        },
        per_ratio: Vec::new(),
        total_samples: estimates.iter().map(|e| e.total_samples).sum(),
    })
}

/// Truncates `schedule` at a finite target: keeps every point strictly
/// below `beta_star` and closes with `beta_star` itself. Valid because
/// shortening a step never worsens its Chebyshev ratio.
fn truncate_at(schedule: &CoolingSchedule, beta_star: f64) -> Vec<(Beta, Beta)> {
    let mut points: Vec<f64> = schedule
        .betas()
        .iter()
        .filter_map(|b| b.finite())
        .filter(|&b| b < beta_star)
        .collect();
    points.push(beta_star);
    points
        .windows(2)
        .map(|w| (Beta::Finite(w[0]), Beta::Finite(w[1])))
        .collect()
}

/// A full counting run: the adaptive schedule, the sampled telescope, and
/// the assembled count.
#[derive(Debug)]
pub struct EndToEnd {
    pub estimate: CountEstimate,
    pub schedule: CoolingSchedule,
    pub schedule_transcript: RunTranscript,
    /// Faithful-mode total sample budget for the end-to-end task,
    /// `(10¹⁰/ε²)(ln A)((ln n) + ln ln A)⁵`, reported for comparison.
    pub faithful_budget: f64,
}

/// Drives schedule generation and estimation with exact samplers built
/// from the instance's enumeration (desk scale).
///
/// The reported count depends on the model:
/// * `GroundStates` — `Z(∞) = Z(0)·ΠS_i` with the analytic anchor `Z(0)`;
/// * `TotalConfigurations` — `Z(0) = Z(∞)/ΠS_i` against the known
///   `Z(∞)` (matchings: the empty matching); sampling runs at the
///   tightened `ε/(1+ε)` so the inverted interval still covers at ε;
/// * `AtBeta(β*)` — `Z(β*)` along the schedule prefix, closing with a
///   partial step to β*.
pub fn end_to_end(
    sys: &GibbsSystem,
    target: CountTarget,
    cfg: &AdaptiveConfig,
    plan: &ProductPlan,
    seed: u64,
    workers: usize,
) -> Result<EndToEnd, EstimateError> {
    if !(plan.eps > 0.0 && plan.eps < 1.0) {
        return Err(EstimateError::BadEpsilon(plan.eps));
    }
    let z = match sys {
        GibbsSystem::Explicit { log_coeffs } => PartitionFunction::new(log_coeffs.clone())
            .map_err(crate::models::ModelError::from)?,
        _ => sys.enumerate_coefficients(None)?,
    };
    let n = sys.degree();
    let ln_a = sys.ln_a();

    // phase 1: the cooling schedule, on the run seed's own stream
    let mut schedule_sampler = ExactSampler::new(z.clone(), seed);
    let run = print_cooling_schedule(&mut schedule_sampler, n, ln_a, cfg, seed)?;

    // phase 2: the telescope, on an independent derived stream
    let mut plan = *plan;
    if matches!(target, CountTarget::TotalConfigurations) {
        plan.eps /= 1.0 + plan.eps;
    }
    let pairs: Vec<(Beta, Beta)> = match target {
        CountTarget::AtBeta(beta_star) => {
            let pairs = truncate_at(&run.schedule, beta_star);
            if pairs.is_empty() {
                return Err(EstimateError::TargetBeyondSchedule(beta_star));
            }
            pairs
        }
        _ => run.schedule.steps().collect(),
    };
    let (count, confidence) = plan.counts(pairs.len());
    let est_seed = estimation_seed(seed);
    let (per_ratio, log_product, total_samples) = if workers > 1 {
        product_estimate_parallel(&z, &pairs, count, seed, workers)
    } else {
        let mut sampler = ExactSampler::new(z.clone(), est_seed);
        estimate_pairs(&pairs, &mut sampler, count)?
    };

    // assemble the count in log space
    let log_estimate = match target {
        CountTarget::GroundStates | CountTarget::AtBeta(_) => log_product.map(|lp| z.ln_a() + lp),
        CountTarget::TotalConfigurations => {
            let log_z_inf = sys
                .known_log_z_infinity()
                .unwrap_or_else(|| z.log_z(Beta::Infinite));
            log_product.map(|lp| log_z_inf - lp)
        }
    };

    Ok(EndToEnd {
        estimate: CountEstimate {
            log_estimate,
            eps: plan.eps,
            confidence,
            per_ratio,
            total_samples,
        },
        schedule: run.schedule,
        schedule_transcript: run.transcript,
        faithful_budget: faithful_total_budget(n, ln_a, plan.eps),
    })
}

/// The published end-to-end sample budget
/// `(10¹⁰/ε²)(ln A)((ln n) + ln ln A)⁵`.
pub fn faithful_total_budget(n: usize, ln_a: f64, eps: f64) -> f64 {
    1.0e10 / (eps * eps) * ln_a * ((n as f64).ln() + ln_a.ln()).powi(5)
}
