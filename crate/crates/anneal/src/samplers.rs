//! Hamiltonian-level sampling oracles.
//!
//! The schedule algorithm consumes only `H(X)` for `X ~ μ_β`, so every
//! sampler here exposes a single operation: draw one Hamiltonian level at a
//! given inverse temperature. Three implementations are provided — exact
//! inverse-CDF sampling from explicit coefficients, Markov chains for the
//! combinatorial models (a Metropolis matchings chain and single-site
//! Glauber dynamics), and a warm-start driver that primes one chain state
//! per rung of a non-adaptive ladder.
//!
//! Every sampler owns its RNG stream: identical seed and call sequence give
//! identical draws. A single instance is not meant for concurrent calls;
//! use one instance per worker.

use std::collections::BTreeMap;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use thiserror::Error;

use crate::graph::Graph;
use crate::models::{Config, GibbsSystem, ModelError};
use crate::partfn::{Beta, PartitionFunction};
use crate::schedule::CoolingSchedule;

#[derive(Debug, Error)]
pub enum SamplerError {
    #[error("steps_per_sample must be >= 1")]
    ZeroSteps,
    #[error("explicit instances have no chain; use the exact sampler")]
    NoChain,
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Draws Hamiltonian levels `H(X)`, `X ~ μ_β` (or a stated approximation).
pub trait HamiltonianSampler {
    /// Degree `n`; returned levels always lie in `[0, n]`.
    fn degree(&self) -> usize;

    /// One draw at inverse temperature `beta`.
    fn sample(&mut self, beta: Beta) -> u64;
}

/// Whether each draw restarts the chain from the fixed feasible state or
/// continues a persistent state kept per β.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StartMode {
    Cold,
    Warm,
}

#[derive(Clone, Copy, Debug)]
pub struct ChainConfig {
    /// Transitions per draw (a relaxation- or mixing-time surrogate).
    pub steps_per_sample: u64,
    pub seed: u64,
    pub mode: StartMode,
}

impl ChainConfig {
    pub fn new(steps_per_sample: u64, seed: u64, mode: StartMode) -> Result<Self, SamplerError> {
        if steps_per_sample == 0 {
            return Err(SamplerError::ZeroSteps);
        }
        Ok(ChainConfig {
            steps_per_sample,
            seed,
            mode,
        })
    }
}

/// Default `steps_per_sample` for a model, from the standard mixing-time
/// bounds: `n·m` for the matchings chain, `k·n·ln n` scale for colorings
/// with `k > 2Δ`, `n·ln n` for the other single-site dynamics.
pub fn default_chain_steps(sys: &GibbsSystem) -> u64 {
    match sys {
        GibbsSystem::Matchings { graph } => {
            (graph.vertex_count() as u64).max(1) * (graph.edge_count() as u64).max(1)
        }
        GibbsSystem::Colorings { k, graph } => {
            let n = graph.vertex_count() as f64;
            ((*k as f64) * n * n.ln().max(1.0)).ceil() as u64
        }
        GibbsSystem::IsingGrid { side } => {
            let n = (side * side) as f64;
            (n * n.ln().max(1.0)).ceil() as u64
        }
        GibbsSystem::IndependentSets { graph } => {
            let n = graph.vertex_count() as f64;
            (n * n.ln().max(1.0)).ceil() as u64
        }
        GibbsSystem::Explicit { .. } => 1,
    }
}

/// Exact sampler for an explicit partition function: level `i` is drawn
/// with probability `a_i e^{-iβ} / Z(β)` by inverse CDF. Probabilities are
/// formed in log space (each term is exponentiated only after subtracting
/// `ln Z`), and the CDF is cached per β since callers draw in batches.
pub struct ExactSampler {
    z: PartitionFunction,
    rng: ChaCha12Rng,
    cached_beta: Option<f64>,
    cdf: Vec<(u64, f64)>,
}

impl ExactSampler {
    pub fn new(z: PartitionFunction, seed: u64) -> Self {
        ExactSampler {
            z,
            rng: ChaCha12Rng::seed_from_u64(seed),
            cached_beta: None,
            cdf: Vec::new(),
        }
    }

    pub fn partition_function(&self) -> &PartitionFunction {
        &self.z
    }

    fn rebuild_cdf(&mut self, beta: f64) {
        let log_z = self.z.log_z_at(beta);
        self.cdf.clear();
        let mut cum = 0.0;
        for (i, w) in self.z.log_coeffs().iter().enumerate() {
            if w.is_zero() {
                continue;
            }
            cum += (w.ln() - beta * i as f64 - log_z).exp();
            self.cdf.push((i as u64, cum));
        }
        // absorb float rounding so the last bucket always catches
        if let Some(last) = self.cdf.last_mut() {
            last.1 = 1.0;
        }
        self.cached_beta = Some(beta);
    }
}

impl HamiltonianSampler for ExactSampler {
    fn degree(&self) -> usize {
        self.z.degree()
    }

    fn sample(&mut self, beta: Beta) -> u64 {
        let b = match beta {
            // only the ground level survives at β = ∞
            Beta::Infinite => return 0,
            Beta::Finite(b) => b,
        };
        if self.cached_beta != Some(b) {
            self.rebuild_cdf(b);
        }
        let u: f64 = self.rng.gen();
        let idx = self.cdf.partition_point(|&(_, cum)| cum < u);
        self.cdf[idx.min(self.cdf.len() - 1)].0
    }
}

/// Acceptance probability of moving between matchings whose sizes differ by
/// `delta`, under `w(M) = λ^{|M|}` with `λ = e^{-β}`: `min{1, λ^Δ}/2`.
fn matching_accept(delta: i64, beta: Beta) -> f64 {
    if delta <= 0 {
        return 0.5;
    }
    match beta {
        Beta::Infinite => 0.0,
        Beta::Finite(b) => 0.5 * (-b * delta as f64).exp(),
    }
}

/// The proposal of the matchings chain for a chosen edge `e = (u, v)`:
/// drop `e` if present, add it if both ends are free, slide the blocking
/// edge off when exactly one end is matched, otherwise stay put. Returns
/// the proposed edge set and the size change.
fn matching_proposal(graph: &Graph, state: &[bool], edge_idx: usize) -> (Vec<bool>, i64) {
    let (u, v) = graph.edges()[edge_idx];
    let find_cover = |vertex: u32| -> Option<usize> {
        graph
            .edges()
            .iter()
            .enumerate()
            .find(|(i, &(a, b))| state[*i] && (a == vertex || b == vertex))
            .map(|(i, _)| i)
    };
    let mut next = state.to_vec();
    if state[edge_idx] {
        next[edge_idx] = false;
        return (next, -1);
    }
    match (find_cover(u), find_cover(v)) {
        (None, None) => {
            next[edge_idx] = true;
            (next, 1)
        }
        (None, Some(ev)) => {
            next[ev] = false;
            next[edge_idx] = true;
            (next, 0)
        }
        (Some(eu), None) => {
            next[eu] = false;
            next[edge_idx] = true;
            (next, 0)
        }
        (Some(_), Some(_)) => (next, 0), // both ends busy: stay
    }
}

/// One transition of the Metropolis matchings chain at `λ = e^{-β}`.
///
/// `state` holds one flag per edge and must encode a matching. An empty
/// graph has a single state, which is returned unchanged.
pub fn matching_chain_step(graph: &Graph, state: &mut Vec<bool>, beta: Beta, rng: &mut impl Rng) {
    if graph.edge_count() == 0 {
        return;
    }
    let edge_idx = rng.gen_range(0..graph.edge_count());
    let (next, delta) = matching_proposal(graph, state, edge_idx);
    if next == *state {
        return;
    }
    if rng.gen::<f64>() < matching_accept(delta, beta) {
        *state = next;
    }
}

/// Heat-bath conditional over the values one site can take given the rest
/// of the configuration; probabilities sum to 1. At β = ∞ only
/// zero-violation values survive, and if none exists the current value is
/// kept with probability 1.
fn site_distribution(
    sys: &GibbsSystem,
    config: &Config,
    site: usize,
    beta: Beta,
) -> Vec<(u32, f64)> {
    let (graph, k) = match sys {
        GibbsSystem::Colorings { k, graph } => (graph.clone(), *k),
        GibbsSystem::IsingGrid { side } => (Graph::grid(*side), 2),
        GibbsSystem::IndependentSets { graph } => (graph.clone(), 2),
        _ => unreachable!("site_distribution only applies to single-site models"),
    };
    // violations the candidate value would incur at this site
    let violations = |value: u32| -> u64 {
        match config {
            Config::Labels(labels) => graph
                .neighbors(site as u32)
                .iter()
                .filter(|&&u| labels[u as usize] == value)
                .count() as u64,
            Config::Spins(spins) => {
                let spin: i8 = if value == 1 { 1 } else { -1 };
                graph
                    .neighbors(site as u32)
                    .iter()
                    .filter(|&&u| spins[u as usize] != spin)
                    .count() as u64
            }
            Config::VertexSet(selected) => {
                if value == 0 {
                    0
                } else {
                    graph
                        .neighbors(site as u32)
                        .iter()
                        .filter(|&&u| selected[u as usize])
                        .count() as u64
                }
            }
            Config::EdgeSet(_) => unreachable!("matchings use their own chain"),
        }
    };
    let current: u32 = match config {
        Config::Labels(labels) => labels[site],
        Config::Spins(spins) => u32::from(spins[site] == 1),
        Config::VertexSet(sel) => u32::from(sel[site]),
        Config::EdgeSet(_) => unreachable!(),
    };
    match beta {
        Beta::Finite(b) => {
            let weights: Vec<f64> = (0..k).map(|c| (-b * violations(c) as f64).exp()).collect();
            let total: f64 = weights.iter().sum();
            (0..k).map(|c| (c, weights[c as usize] / total)).collect()
        }
        Beta::Infinite => {
            let free: Vec<u32> = (0..k).filter(|&c| violations(c) == 0).collect();
            if free.is_empty() {
                vec![(current, 1.0)]
            } else {
                let p = 1.0 / free.len() as f64;
                free.into_iter().map(|c| (c, p)).collect()
            }
        }
    }
}

fn apply_site_value(config: &mut Config, site: usize, value: u32) {
    match config {
        Config::Labels(labels) => labels[site] = value,
        Config::Spins(spins) => spins[site] = if value == 1 { 1 } else { -1 },
        Config::VertexSet(sel) => sel[site] = value == 1,
        Config::EdgeSet(_) => unreachable!(),
    }
}

/// One heat-bath single-site update targeting `μ_β`.
///
/// Applies to colorings, the Ising grid, and independent sets; the
/// matchings chain has its own transition rule.
pub fn glauber_step(
    sys: &GibbsSystem,
    config: &mut Config,
    beta: Beta,
    rng: &mut impl Rng,
) -> Result<(), SamplerError> {
    let sites = match config {
        Config::Labels(l) => l.len(),
        Config::Spins(s) => s.len(),
        Config::VertexSet(v) => v.len(),
        Config::EdgeSet(_) => return Err(SamplerError::NoChain),
    };
    let site = rng.gen_range(0..sites);
    let dist = site_distribution(sys, config, site, beta);
    let u: f64 = rng.gen();
    let mut cum = 0.0;
    for &(value, p) in &dist {
        cum += p;
        if u < cum {
            apply_site_value(config, site, value);
            return Ok(());
        }
    }
    let (value, _) = *dist.last().expect("site distribution is never empty");
    apply_site_value(config, site, value);
    Ok(())
}

fn chain_step(
    sys: &GibbsSystem,
    config: &mut Config,
    beta: Beta,
    rng: &mut impl Rng,
) -> Result<(), SamplerError> {
    match sys {
        GibbsSystem::Matchings { graph } => {
            if let Config::EdgeSet(state) = config {
                matching_chain_step(graph, state, beta, rng);
                Ok(())
            } else {
                Err(SamplerError::NoChain)
            }
        }
        GibbsSystem::Explicit { .. } => Err(SamplerError::NoChain),
        _ => glauber_step(sys, config, beta, rng),
    }
}

/// Checks the standard Glauber ergodicity condition for colorings
/// (`k ≥ Δ + 2`); other models have no construction-time hazard here.
pub fn ergodicity_warning(sys: &GibbsSystem) -> Option<String> {
    if let GibbsSystem::Colorings { k, graph } = sys {
        let needed = graph.max_degree() as u32 + 2;
        if *k < needed {
            return Some(format!(
                "Glauber dynamics may not be ergodic: k = {k} < Δ + 2 = {needed}"
            ));
        }
    }
    None
}

/// Chain-backed sampler: each draw runs `steps_per_sample` transitions,
/// either from the fixed feasible state (cold) or from a persistent state
/// kept per β (warm). At β = ∞ the Hamiltonian is 0 almost surely, so the
/// level is returned without running the chain.
pub struct McmcSampler {
    sys: GibbsSystem,
    cfg: ChainConfig,
    rng: ChaCha12Rng,
    warm_states: BTreeMap<u64, Config>,
    /// Populated when the construction-time ergodicity check fails.
    pub warning: Option<String>,
}

impl McmcSampler {
    pub fn new(sys: GibbsSystem, cfg: ChainConfig) -> Result<Self, SamplerError> {
        if cfg.steps_per_sample == 0 {
            return Err(SamplerError::ZeroSteps);
        }
        if matches!(sys, GibbsSystem::Explicit { .. }) {
            return Err(SamplerError::NoChain);
        }
        let warning = ergodicity_warning(&sys);
        Ok(McmcSampler {
            rng: ChaCha12Rng::seed_from_u64(cfg.seed),
            sys,
            cfg,
            warm_states: BTreeMap::new(),
            warning,
        })
    }
}

impl HamiltonianSampler for McmcSampler {
    fn degree(&self) -> usize {
        self.sys.degree()
    }

    fn sample(&mut self, beta: Beta) -> u64 {
        let b = match beta {
            Beta::Infinite => return 0,
            Beta::Finite(b) => b,
        };
        let mut state = match self.cfg.mode {
            StartMode::Cold => None,
            StartMode::Warm => self.warm_states.remove(&b.to_bits()),
        }
        .unwrap_or_else(|| {
            self.sys
                .initial_config()
                .expect("chain models always have a feasible state")
        });
        for _ in 0..self.cfg.steps_per_sample {
            chain_step(&self.sys, &mut state, beta, &mut self.rng)
                .expect("construction validated the model");
        }
        let h = self
            .sys
            .hamiltonian(&state)
            .expect("chain preserves configuration validity");
        if self.cfg.mode == StartMode::Warm {
            self.warm_states.insert(b.to_bits(), state);
        }
        h
    }
}

/// Warm-start family: one primed chain state per finite rung of a
/// non-adaptive ladder, produced by running each rung's chain for `tau2`
/// steps from the previous rung's state.
///
/// Draws at an arbitrary β clone the state of the nearest rung and pay
/// `tau2` further steps. The β = 0 anchore is sampled directly where the
/// model admits it (uniform labelings, spins, or vertex subsets); the
/// matchings chain starts from the empty matching instead, since under the
/// `λ = e^{-β}` anchoring μ_0 is uniform over matchings and has no direct
/// sampler — the priming pass is what warms it up.
pub struct WarmStartSampler {
    sys: GibbsSystem,
    tau2: u64,
    rng: ChaCha12Rng,
    anchors: Vec<(f64, Config)>,
    priming_steps: u64,
}

fn uniform_config(sys: &GibbsSystem, rng: &mut impl Rng) -> Config {
    match sys {
        GibbsSystem::Colorings { k, graph } => Config::Labels(
            (0..graph.vertex_count())
                .map(|_| rng.gen_range(0..*k))
                .collect(),
        ),
        GibbsSystem::IsingGrid { side } => Config::Spins(
            (0..side * side)
                .map(|_| if rng.gen::<bool>() { 1 } else { -1 })
                .collect(),
        ),
        GibbsSystem::IndependentSets { graph } => Config::VertexSet(
            (0..graph.vertex_count()).map(|_| rng.gen::<bool>()).collect(),
        ),
        GibbsSystem::Matchings { graph } => Config::EdgeSet(vec![false; graph.edge_count()]),
        GibbsSystem::Explicit { .. } => unreachable!("checked by the driver"),
    }
}

/// Runs the priming pass of the warm-start scheme over `ladder` and returns
/// the primed sampler. Total priming work is `tau2` transitions per finite
/// nonzero rung.
pub fn warm_start_driver(
    sys: &GibbsSystem,
    ladder: &CoolingSchedule,
    tau2: u64,
    seed: u64,
) -> Result<WarmStartSampler, SamplerError> {
    if tau2 == 0 {
        return Err(SamplerError::ZeroSteps);
    }
    if matches!(sys, GibbsSystem::Explicit { .. }) {
        return Err(SamplerError::NoChain);
    }
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut state = uniform_config(sys, &mut rng);
    let mut anchors = vec![(0.0, state.clone())];
    let mut priming_steps = 0u64;
    for beta in ladder.interior() {
        for _ in 0..tau2 {
            chain_step(sys, &mut state, Beta::Finite(beta), &mut rng)?;
        }
        priming_steps += tau2;
        anchors.push((beta, state.clone()));
    }
    Ok(WarmStartSampler {
        sys: sys.clone(),
        tau2,
        rng,
        anchors,
        priming_steps,
    })
}

impl WarmStartSampler {
    /// Chain transitions spent by the priming pass.
    pub fn priming_steps(&self) -> u64 {
        self.priming_steps
    }

    pub fn anchor_count(&self) -> usize {
        self.anchors.len()
    }
}

impl HamiltonianSampler for WarmStartSampler {
    fn degree(&self) -> usize {
        self.sys.degree()
    }

    fn sample(&mut self, beta: Beta) -> u64 {
        let b = match beta {
            Beta::Infinite => return 0,
            Beta::Finite(b) => b,
        };
        let nearest = self
            .anchors
            .iter()
            .min_by(|(x, _), (y, _)| {
                (x - b)
                    .abs()
                    .partial_cmp(&(y - b).abs())
                    .expect("anchors are finite")
            })
            .expect("driver always installs the β = 0 anchor");
        let mut state = nearest.1.clone();
        for _ in 0..self.tau2 {
            chain_step(&self.sys, &mut state, beta, &mut self.rng)
                .expect("construction validated the model");
        }
        self.sys
            .hamiltonian(&state)
            .expect("chain preserves configuration validity")
    }
}

/// Exact one-step transition matrix of the model's chain at `beta`, over
/// the full configuration space. Desk-scale diagnostic for detailed-balance
/// and stationarity checks; `cap` bounds the state count.
pub fn transition_matrix(
    sys: &GibbsSystem,
    beta: Beta,
    cap: u128,
) -> Result<(Vec<Config>, Vec<Vec<f64>>), SamplerError> {
    let states = sys.configurations(cap)?;
    let index: std::collections::HashMap<&Config, usize> =
        states.iter().enumerate().map(|(i, c)| (c, i)).collect();
    let m = states.len();
    let mut p = vec![vec![0.0; m]; m];
    match sys {
        GibbsSystem::Matchings { graph } => {
            let ne = graph.edge_count();
            for (i, config) in states.iter().enumerate() {
                let state = match config {
                    Config::EdgeSet(s) => s,
                    _ => unreachable!(),
                };
                if ne == 0 {
                    p[i][i] = 1.0;
                    continue;
                }
                for e in 0..ne {
                    let pick = 1.0 / ne as f64;
                    let (next, delta) = matching_proposal(graph, state, e);
                    let acc = if next == *state {
                        0.0
                    } else {
                        matching_accept(delta, beta)
                    };
                    let j = index[&Config::EdgeSet(next)];
                    p[i][j] += pick * acc;
                    p[i][i] += pick * (1.0 - acc);
                }
            }
        }
        GibbsSystem::Explicit { .. } => return Err(SamplerError::NoChain),
        _ => {
            for (i, config) in states.iter().enumerate() {
                let sites = match config {
                    Config::Labels(l) => l.len(),
                    Config::Spins(s) => s.len(),
                    Config::VertexSet(v) => v.len(),
                    Config::EdgeSet(_) => unreachable!(),
                };
                for site in 0..sites {
                    let pick = 1.0 / sites as f64;
                    for (value, prob) in site_distribution(sys, config, site, beta) {
                        let mut next = config.clone();
                        apply_site_value(&mut next, site, value);
                        let j = index[&next];
                        p[i][j] += pick * prob;
                    }
                }
            }
        }
    }
    Ok((states, p))
}
