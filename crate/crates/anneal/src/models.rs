//! Concrete combinatorial Gibbs systems and their exact desk-scale
//! enumeration into explicit partition functions.
//!
//! Each system fixes a configuration space Ω, an integer Hamiltonian
//! `H: Ω → {0, …, n}`, and the analytic anchor `ln A` with `A = Z(0)`:
//!
//! * **Colorings(k)** — all k-labelings of a graph; `H` = monochromatic
//!   edges; proper colorings sit at level 0; `A = k^|V|`.
//! * **IsingGrid(side)** — ±1 spins on a square grid; `H` = disagreeing
//!   edges; `A = 2^|V|`.
//! * **IndependentSets** — all vertex subsets; `H` = edges with both
//!   endpoints selected, so independent sets sit at level 0 and
//!   `Z(∞)` counts them; `A = 2^|V|`. (The hard-core model at unit
//!   fugacity is the β = ∞ slice.)
//! * **Matchings** — matchings of a graph with `H(M) = |M|` and
//!   `λ = e^{-β}`, so β = 0 is uniform over matchings and `Z(0)` is the
//!   matching count. This reverses the β-axis of the usual presentation
//!   (where λ = 1 is the uniform end): here the *total* count sits on the
//!   `Z(0)` side and the empty matching is the unique level-0 state, so
//!   counting telescopes down to the known anchor `Z(∞) = 1` and inverts.
//!   `ln A` is reported as the upper bound `|E| ln 2`, which is sound for
//!   every schedule construction in this crate.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::Graph;
use crate::logspace::{log_sum_exp, LogWeight};
use crate::partfn::{PartFnError, PartitionFunction};

/// Default cap on the enumerated configuration space.
pub const DEFAULT_ENUMERATION_CAP: u128 = 1 << 24;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("configuration space has about {estimate:.3e} states, over the cap of {cap}")]
    CapExceeded { estimate: f64, cap: u128 },
    #[error("instance has no level-0 configuration (a_0 = 0): {0}")]
    EmptyGroundLevel(String),
    #[error("invalid configuration for this system: {0}")]
    InvalidConfiguration(String),
    #[error(transparent)]
    PartFn(#[from] PartFnError),
    #[error("colorings need k >= 1 (got {0})")]
    BadColorCount(u32),
    #[error("ising grid needs side >= 1")]
    BadGridSide,
}

/// Which quantity an end-to-end run reports for a system.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum CountTarget {
    /// `Z(∞) = a_0`: the level-0 count (proper colorings, independent
    /// sets, ground states). Telescopes forward from the anchor `Z(0)`.
    GroundStates,
    /// `Z(0) = A`: the total count (matchings). Telescopes forward and
    /// inverts against the known `Z(∞)`.
    TotalConfigurations,
    /// `Z(β*)` for a finite target inverse temperature (Ising free-energy
    /// style evaluations). Uses the schedule prefix up to β*.
    AtBeta(f64),
}

/// A concrete counting instance: configuration space, Hamiltonian,
/// degree `n`, and analytic `ln A`.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum GibbsSystem {
    Colorings { k: u32, graph: Graph },
    IsingGrid { side: u32 },
    IndependentSets { graph: Graph },
    Matchings { graph: Graph },
    Explicit {
        #[serde(with = "log_coeff_serde")]
        log_coeffs: Vec<LogWeight>,
    },
}

/// A configuration of one of the combinatorial systems.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Config {
    /// Vertex labels in `0..k` (colorings).
    Labels(Vec<u32>),
    /// ±1 spins (Ising).
    Spins(Vec<i8>),
    /// Selected vertices (independent sets; any subset is a configuration).
    VertexSet(Vec<bool>),
    /// Selected edges, required to form a matching.
    EdgeSet(Vec<bool>),
}

impl GibbsSystem {
    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    /// The interaction graph, where one exists.
    pub fn graph(&self) -> Option<Graph> {
        match self {
            GibbsSystem::Colorings { graph, .. }
            | GibbsSystem::IndependentSets { graph }
            | GibbsSystem::Matchings { graph } => Some(graph.clone()),
            GibbsSystem::IsingGrid { side } => Some(Graph::grid(*side)),
            GibbsSystem::Explicit { .. } => None,
        }
    }

    /// Degree `n` of the partition function (maximum Hamiltonian value).
    pub fn degree(&self) -> usize {
        match self {
            GibbsSystem::Colorings { graph, .. } => graph.edge_count(),
            GibbsSystem::IsingGrid { side } => Graph::grid(*side).edge_count(),
            GibbsSystem::IndependentSets { graph } => graph.edge_count(),
            GibbsSystem::Matchings { graph } => graph.edge_count(),
            GibbsSystem::Explicit { log_coeffs } => log_coeffs.len() - 1,
        }
    }

    /// Analytic `ln A` (for matchings, the `|E| ln 2` upper bound).
    pub fn ln_a(&self) -> f64 {
        match self {
            GibbsSystem::Colorings { k, graph } => {
                graph.vertex_count() as f64 * (*k as f64).ln()
            }
            GibbsSystem::IsingGrid { side } => {
                (side * side) as f64 * 2.0f64.ln()
            }
            GibbsSystem::IndependentSets { graph } => {
                graph.vertex_count() as f64 * 2.0f64.ln()
            }
            GibbsSystem::Matchings { graph } => graph.edge_count() as f64 * 2.0f64.ln(),
            GibbsSystem::Explicit { log_coeffs } => {
                log_sum_exp(log_coeffs.iter().map(|w| w.ln()))
            }
        }
    }

    /// The count an end-to-end run naturally reports for this system.
    pub fn natural_target(&self) -> CountTarget {
        match self {
            GibbsSystem::Matchings { .. } => CountTarget::TotalConfigurations,
            _ => CountTarget::GroundStates,
        }
    }

    /// `ln Z(∞)` when it is known analytically (matchings: the empty
    /// matching is the unique level-0 state).
    pub fn known_log_z_infinity(&self) -> Option<f64> {
        match self {
            GibbsSystem::Matchings { .. } => Some(0.0),
            _ => None,
        }
    }

    fn validate(&self) -> Result<(), ModelError> {
        match self {
            GibbsSystem::Colorings { k, .. } if *k == 0 => Err(ModelError::BadColorCount(*k)),
            GibbsSystem::IsingGrid { side } if *side == 0 => Err(ModelError::BadGridSide),
            _ => Ok(()),
        }
    }

    /// Size of the candidate configuration space (for matchings, the edge
    /// subsets the backtracking walks over).
    pub fn state_space_estimate(&self) -> f64 {
        match self {
            GibbsSystem::Colorings { k, graph } => {
                (*k as f64).powi(graph.vertex_count() as i32)
            }
            GibbsSystem::IsingGrid { side } => 2.0f64.powi((side * side) as i32),
            GibbsSystem::IndependentSets { graph } => 2.0f64.powi(graph.vertex_count() as i32),
            GibbsSystem::Matchings { graph } => 2.0f64.powi(graph.edge_count() as i32),
            GibbsSystem::Explicit { .. } => 0.0,
        }
    }

    fn check_cap(&self, cap: u128) -> Result<(), ModelError> {
        let estimate = self.state_space_estimate();
        if estimate > cap as f64 {
            return Err(ModelError::CapExceeded { estimate, cap });
        }
        Ok(())
    }

    /// Hamiltonian of a configuration; errors on malformed configurations.
    pub fn hamiltonian(&self, config: &Config) -> Result<u64, ModelError> {
        self.validate()?;
        match (self, config) {
            (GibbsSystem::Colorings { k, graph }, Config::Labels(labels)) => {
                if labels.len() != graph.vertex_count() as usize {
                    return Err(ModelError::InvalidConfiguration(format!(
                        "expected {} labels, got {}",
                        graph.vertex_count(),
                        labels.len()
                    )));
                }
                if let Some(bad) = labels.iter().find(|&&c| c >= *k) {
                    return Err(ModelError::InvalidConfiguration(format!(
                        "label {bad} out of range 0..{k}"
                    )));
                }
                Ok(graph
                    .edges()
                    .iter()
                    .filter(|&&(u, v)| labels[u as usize] == labels[v as usize])
                    .count() as u64)
            }
            (GibbsSystem::IsingGrid { side }, Config::Spins(spins)) => {
                let graph = Graph::grid(*side);
                if spins.len() != graph.vertex_count() as usize {
                    return Err(ModelError::InvalidConfiguration(format!(
                        "expected {} spins, got {}",
                        graph.vertex_count(),
                        spins.len()
                    )));
                }
                if spins.iter().any(|&s| s != 1 && s != -1) {
                    return Err(ModelError::InvalidConfiguration(
                        "spins must be +1 or -1".into(),
                    ));
                }
                Ok(graph
                    .edges()
                    .iter()
                    .filter(|&&(u, v)| spins[u as usize] != spins[v as usize])
                    .count() as u64)
            }
            (GibbsSystem::IndependentSets { graph }, Config::VertexSet(selected)) => {
                if selected.len() != graph.vertex_count() as usize {
                    return Err(ModelError::InvalidConfiguration(format!(
                        "expected {} vertex flags, got {}",
                        graph.vertex_count(),
                        selected.len()
                    )));
                }
                Ok(graph
                    .edges()
                    .iter()
                    .filter(|&&(u, v)| selected[u as usize] && selected[v as usize])
                    .count() as u64)
            }
            (GibbsSystem::Matchings { graph }, Config::EdgeSet(selected)) => {
                if selected.len() != graph.edge_count() {
                    return Err(ModelError::InvalidConfiguration(format!(
                        "expected {} edge flags, got {}",
                        graph.edge_count(),
                        selected.len()
                    )));
                }
                let mut used = vec![false; graph.vertex_count() as usize];
                let mut size = 0u64;
                for (i, &(u, v)) in graph.edges().iter().enumerate() {
                    if selected[i] {
                        if used[u as usize] || used[v as usize] {
                            return Err(ModelError::InvalidConfiguration(
                                "edge set is not a matching".into(),
                            ));
                        }
                        used[u as usize] = true;
                        used[v as usize] = true;
                        size += 1;
                    }
                }
                Ok(size)
            }
            (GibbsSystem::Explicit { .. }, _) => Err(ModelError::InvalidConfiguration(
                "explicit instances have no configuration space".into(),
            )),
            _ => Err(ModelError::InvalidConfiguration(
                "configuration kind does not match the system".into(),
            )),
        }
    }

    /// Exact level counts `a_i` by exhaustive backtracking, in log space.
    pub fn enumerate_coefficients(&self, cap: Option<u128>) -> Result<PartitionFunction, ModelError> {
        let counts = self.level_counts(cap)?;
        if counts[0] == 0 {
            return Err(ModelError::EmptyGroundLevel(format!(
                "every one of the {} configurations has a positive Hamiltonian",
                counts.iter().sum::<u64>()
            )));
        }
        let log_coeffs = counts
            .iter()
            .map(|&c| {
                if c == 0 {
                    LogWeight::ZERO
                } else {
                    LogWeight::new((c as f64).ln()).expect("count log is finite")
                }
            })
            .collect();
        Ok(PartitionFunction::new(log_coeffs)?)
    }

    /// Exact per-level configuration counts.
    pub fn level_counts(&self, cap: Option<u128>) -> Result<Vec<u64>, ModelError> {
        self.validate()?;
        let cap = cap.unwrap_or(DEFAULT_ENUMERATION_CAP);
        self.check_cap(cap)?;
        let n = self.degree();
        let mut counts = vec![0u64; n + 1];
        match self {
            GibbsSystem::Colorings { k, graph } => {
                let mut labels = vec![0u32; graph.vertex_count() as usize];
                count_labelings(graph, *k, 0, 0, &mut labels, &mut counts, true);
            }
            GibbsSystem::IsingGrid { side } => {
                let graph = Graph::grid(*side);
                let mut labels = vec![0u32; graph.vertex_count() as usize];
                count_labelings(&graph, 2, 0, 0, &mut labels, &mut counts, false);
            }
            GibbsSystem::IndependentSets { graph } => {
                let mut selected = vec![false; graph.vertex_count() as usize];
                count_subsets(graph, 0, 0, &mut selected, &mut counts);
            }
            GibbsSystem::Matchings { graph } => {
                let mut used = vec![false; graph.vertex_count() as usize];
                count_matchings(graph, 0, 0, &mut used, &mut counts);
            }
            GibbsSystem::Explicit { log_coeffs } => {
                // Already explicit; report rounded masses where they fit.
                return Ok(log_coeffs
                    .iter()
                    .map(|w| w.value().round() as u64)
                    .collect());
            }
        }
        Ok(counts)
    }

    /// All configurations, for instances small enough to list outright.
    /// Intended for exact transition-matrix checks.
    pub fn configurations(&self, cap: u128) -> Result<Vec<Config>, ModelError> {
        self.validate()?;
        self.check_cap(cap)?;
        let mut out = Vec::new();
        match self {
            GibbsSystem::Colorings { k, graph } => {
                let nv = graph.vertex_count() as usize;
                let mut labels = vec![0u32; nv];
                loop {
                    out.push(Config::Labels(labels.clone()));
                    let mut i = 0;
                    while i < nv {
                        labels[i] += 1;
                        if labels[i] < *k {
                            break;
                        }
                        labels[i] = 0;
                        i += 1;
                    }
                    if i == nv {
                        break;
                    }
                }
            }
            GibbsSystem::IsingGrid { side } => {
                let nv = (side * side) as usize;
                for mask in 0u64..(1 << nv) {
                    let spins: Vec<i8> = (0..nv)
                        .map(|v| if mask >> v & 1 == 1 { 1 } else { -1 })
                        .collect();
                    out.push(Config::Spins(spins));
                }
            }
            GibbsSystem::IndependentSets { graph } => {
                let nv = graph.vertex_count() as usize;
                for mask in 0u64..(1 << nv) {
                    out.push(Config::VertexSet(
                        (0..nv).map(|v| mask >> v & 1 == 1).collect(),
                    ));
                }
            }
            GibbsSystem::Matchings { graph } => {
                let ne = graph.edge_count();
                'subset: for mask in 0u64..(1 << ne) {
                    let selected: Vec<bool> = (0..ne).map(|e| mask >> e & 1 == 1).collect();
                    let mut used = vec![false; graph.vertex_count() as usize];
                    for (i, &(u, v)) in graph.edges().iter().enumerate() {
                        if selected[i] {
                            if used[u as usize] || used[v as usize] {
                                continue 'subset;
                            }
                            used[u as usize] = true;
                            used[v as usize] = true;
                        }
                    }
                    out.push(Config::EdgeSet(selected));
                }
            }
            GibbsSystem::Explicit { .. } => {
                return Err(ModelError::InvalidConfiguration(
                    "explicit instances have no configuration space".into(),
                ))
            }
        }
        Ok(out)
    }

    /// A fixed feasible configuration, used as the cold-start chain state.
    pub fn initial_config(&self) -> Option<Config> {
        match self {
            GibbsSystem::Colorings { graph, .. } => {
                Some(Config::Labels(vec![0; graph.vertex_count() as usize]))
            }
            GibbsSystem::IsingGrid { side } => {
                Some(Config::Spins(vec![1; (side * side) as usize]))
            }
            GibbsSystem::IndependentSets { graph } => {
                Some(Config::VertexSet(vec![false; graph.vertex_count() as usize]))
            }
            GibbsSystem::Matchings { graph } => {
                Some(Config::EdgeSet(vec![false; graph.edge_count()]))
            }
            GibbsSystem::Explicit { .. } => None,
        }
    }
}

/// Backtracking over labelings with an incrementally maintained edge count;
/// `monochromatic` selects which edge state the Hamiltonian counts.
fn count_labelings(
    graph: &Graph,
    k: u32,
    vertex: usize,
    h: u64,
    labels: &mut [u32],
    counts: &mut [u64],
    monochromatic: bool,
) {
    if vertex == labels.len() {
        counts[h as usize] += 1;
        return;
    }
    for c in 0..k {
        labels[vertex] = c;
        let delta = graph.neighbors(vertex as u32).iter().filter(|&&u| {
            (u as usize) < vertex && {
                let same = labels[u as usize] == c;
                if monochromatic {
                    same
                } else {
                    !same
                }
            }
        }).count() as u64;
        count_labelings(graph, k, vertex + 1, h + delta, labels, counts, monochromatic);
    }
}

fn count_subsets(
    graph: &Graph,
    vertex: usize,
    h: u64,
    selected: &mut [bool],
    counts: &mut [u64],
) {
    if vertex == selected.len() {
        counts[h as usize] += 1;
        return;
    }
    selected[vertex] = false;
    count_subsets(graph, vertex + 1, h, selected, counts);
    selected[vertex] = true;
    let delta = graph
        .neighbors(vertex as u32)
        .iter()
        .filter(|&&u| (u as usize) < vertex && selected[u as usize])
        .count() as u64;
    count_subsets(graph, vertex + 1, h + delta, selected, counts);
    selected[vertex] = false;
}

fn count_matchings(
    graph: &Graph,
    edge: usize,
    size: u64,
    used: &mut [bool],
    counts: &mut [u64],
) {
    if edge == graph.edge_count() {
        counts[size as usize] += 1;
        return;
    }
    count_matchings(graph, edge + 1, size, used, counts);
    let (u, v) = graph.edges()[edge];
    if !used[u as usize] && !used[v as usize] {
        used[u as usize] = true;
        used[v as usize] = true;
        count_matchings(graph, edge + 1, size + 1, used, counts);
        used[u as usize] = false;
        used[v as usize] = false;
    }
}

/// Serde for explicit coefficient lists: zeros are spelled `"-inf"` because
/// JSON has no infinity literal.
mod log_coeff_serde {
    use super::LogWeight;
    use serde::de::Error;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(coeffs: &[LogWeight], s: S) -> Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        #[serde(untagged)]
        enum Out {
            Num(f64),
            Str(&'static str),
        }
        coeffs
            .iter()
            .map(|w| {
                if w.is_zero() {
                    Out::Str("-inf")
                } else {
                    Out::Num(w.ln())
                }
            })
            .collect::<Vec<_>>()
            .serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<LogWeight>, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum In {
            Num(f64),
            Str(String),
        }
        let raw = Vec::<In>::deserialize(d)?;
        raw.into_iter()
            .map(|v| match v {
                In::Num(x) => LogWeight::new(x).map_err(D::Error::custom),
                In::Str(s) if s == "-inf" => Ok(LogWeight::ZERO),
                In::Str(s) => Err(D::Error::custom(format!(
                    "expected a number or \"-inf\", got {s:?}"
                ))),
            })
            .collect()
    }
}
