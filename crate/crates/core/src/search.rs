//! Score-based structure learning by hill-climbing.
//!
//! [`hill_climb`] starts from the empty graph (plus any whitelisted
//! arcs) and repeatedly applies the single arc addition, deletion, or
//! reversal that improves the network score the most, stopping when no
//! move improves it by more than a small threshold. Scores decompose by
//! family, so each move is evaluated by rescoring only the one or two
//! children whose parent sets it changes.
//!
//! The search is deterministic: candidate moves are enumerated in a
//! fixed order, ties are broken by taking the earliest candidate, and
//! the score cache cannot change any comparison, only skip repeated
//! work.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;

use crate::dataset::Dataset;
use crate::graph::{Dag, GraphError, NodeId};
use crate::scoring::{network_score, ScoreError, ScoreSpec, Scorer};
use crate::textfmt;

#[derive(Debug, Error)]
pub enum SearchError {
    #[error("constraint error: {0}")]
    Constraint(String),
    #[error("search configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Score(#[from] ScoreError),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

/// One candidate change to the current graph.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Move {
    Add { from: NodeId, to: NodeId },
    Delete { from: NodeId, to: NodeId },
    Reverse { from: NodeId, to: NodeId },
}

impl fmt::Display for Move {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Move::Add { from, to } => write!(f, "add {from} -> {to}"),
            Move::Delete { from, to } => write!(f, "delete {from} -> {to}"),
            Move::Reverse { from, to } => write!(f, "reverse {from} -> {to}"),
        }
    }
}

/// Hard structural constraints: blacklisted arcs never appear in the
/// learned graph, whitelisted arcs are always in it.
#[derive(Debug, Clone, Default)]
pub struct ArcConstraints {
    blacklist: BTreeSet<(NodeId, NodeId)>,
    whitelist: BTreeSet<(NodeId, NodeId)>,
}

impl ArcConstraints {
    pub fn none() -> Self {
        ArcConstraints::default()
    }

    pub fn new(
        blacklist: &[(&str, &str)],
        whitelist: &[(&str, &str)],
    ) -> Result<Self, SearchError> {
        let blacklist: BTreeSet<(NodeId, NodeId)> = blacklist
            .iter()
            .map(|&(f, t)| (f.to_string(), t.to_string()))
            .collect();
        let whitelist: BTreeSet<(NodeId, NodeId)> = whitelist
            .iter()
            .map(|&(f, t)| (f.to_string(), t.to_string()))
            .collect();
        for (from, to) in blacklist.iter().chain(&whitelist) {
            if from == to {
                return Err(SearchError::Constraint(format!(
                    "self-loop constraint on `{from}`"
                )));
            }
        }
        if let Some((from, to)) = whitelist.intersection(&blacklist).next() {
            return Err(SearchError::Constraint(format!(
                "{from} -> {to} is both whitelisted and blacklisted"
            )));
        }
        Ok(ArcConstraints { blacklist, whitelist })
    }

    pub fn blacklist(&self) -> &BTreeSet<(NodeId, NodeId)> {
        &self.blacklist
    }

    pub fn whitelist(&self) -> &BTreeSet<(NodeId, NodeId)> {
        &self.whitelist
    }

    pub fn forbids(&self, from: &str, to: &str) -> bool {
        self.blacklist
            .contains(&(from.to_string(), to.to_string()))
    }

    pub fn requires(&self, from: &str, to: &str) -> bool {
        self.whitelist
            .contains(&(from.to_string(), to.to_string()))
    }

    /// Checks every constrained node exists and builds the whitelist
    /// start graph (which also proves the whitelist is acyclic).
    fn start_graph(&self, nodes: &[NodeId]) -> Result<Dag, SearchError> {
        let node_set: BTreeSet<&NodeId> = nodes.iter().collect();
        for (from, to) in self.blacklist.iter().chain(&self.whitelist) {
            for var in [from, to] {
                if !node_set.contains(var) {
                    return Err(SearchError::Constraint(format!(
                        "constraint names unknown variable `{var}`"
                    )));
                }
            }
        }
        let mut dag = Dag::new(nodes.iter().cloned())?;
        for (from, to) in &self.whitelist {
            dag.add_arc(from, to).map_err(|e| match e {
                GraphError::Cycle { .. } => {
                    SearchError::Constraint("whitelist contains a cycle".to_string())
                }
                other => SearchError::Graph(other),
            })?;
        }
        Ok(dag)
    }
}

/// Stopping rule for the search.
#[derive(Debug, Clone, Copy)]
pub struct SearchConfig {
    /// A move must improve the score by more than this to be taken.
    pub eps: f64,
    /// Upper bound on applied moves; `usize::MAX` means unbounded.
    pub max_iter: usize,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            eps: 1e-9,
            max_iter: usize::MAX,
        }
    }
}

impl SearchConfig {
    fn validate(&self) -> Result<(), SearchError> {
        if !(self.eps.is_finite() && self.eps >= 0.0) {
            return Err(SearchError::Config(format!(
                "eps must be finite and nonnegative, got {}",
                self.eps
            )));
        }
        Ok(())
    }
}

/// Every move legal from `dag` under the constraints, in a fixed order:
/// additions sorted by (from, to), then deletions, then reversals.
/// Moves that would create a cycle are excluded.
pub fn legal_moves(dag: &Dag, constraints: &ArcConstraints) -> Vec<Move> {
    let nodes: Vec<NodeId> = dag.nodes().cloned().collect();
    let arcs = dag.arcs();
    let mut moves = Vec::new();
    for from in &nodes {
        for to in &nodes {
            if from == to
                || dag.has_arc(from, to)
                || dag.has_arc(to, from)
                || constraints.forbids(from, to)
                || dag.has_path(to, from)
            {
                continue;
            }
            moves.push(Move::Add {
                from: from.clone(),
                to: to.clone(),
            });
        }
    }
    for (from, to) in &arcs {
        if !constraints.requires(from, to) {
            moves.push(Move::Delete {
                from: from.clone(),
                to: to.clone(),
            });
        }
    }
    // A reversal is legal when the arc is not pinned by the whitelist,
    // the opposite direction is not blacklisted, and no other directed
    // path already runs from tail to head.
    let mut scratch = dag.clone();
    for (from, to) in &arcs {
        if constraints.requires(from, to) || constraints.forbids(to, from) {
            continue;
        }
        scratch.remove_arc(from, to).expect("arc listed by the dag");
        let cyclic = scratch.has_path(from, to);
        scratch.add_arc(from, to).expect("restoring a removed arc");
        if !cyclic {
            moves.push(Move::Reverse {
                from: from.clone(),
                to: to.clone(),
            });
        }
    }
    moves
}

/// Result of a hill-climbing run.
#[derive(Debug, Clone)]
pub struct SearchReport {
    pub dag: Dag,
    /// Network score of `dag`, recomputed from scratch after the search.
    pub score: f64,
    pub spec: ScoreSpec,
    /// Sample size of the training data.
    pub n: usize,
    /// Moves applied.
    pub iterations: usize,
    /// Family-score requests made during the search.
    pub score_calls: u64,
    pub cache_hits: u64,
    pub cache_misses: u64,
    /// Applied moves with their score improvements, in order.
    pub trace: Vec<(Move, f64)>,
}

impl SearchReport {
    /// Human-readable learning summary.
    pub fn text(&self) -> String {
        let summary = self.dag.summary();
        let mut out = String::new();
        out.push_str("Bayesian network learned via Score-based methods\n\n");
        out.push_str("  model:\n");
        for line in wrap_model(&self.dag.to_model_string()) {
            out.push_str("   ");
            out.push_str(&line);
            out.push('\n');
        }
        let mut field = |label: &str, value: String| {
            out.push_str(&format!("  {label:<40}{value}\n"));
        };
        field("nodes:", summary.nodes.to_string());
        field("arcs:", summary.arcs.to_string());
        out.push_str(&format!("    {:<38}{}\n", "undirected arcs:", 0));
        out.push_str(&format!("    {:<38}{}\n", "directed arcs:", summary.arcs));
        let mut field = |label: &str, value: String| {
            out.push_str(&format!("  {label:<40}{value}\n"));
        };
        field(
            "average markov blanket size:",
            textfmt::fixed(summary.avg_markov_blanket, 2),
        );
        field(
            "average neighbourhood size:",
            textfmt::fixed(summary.avg_neighbourhood, 2),
        );
        field(
            "average branching factor:",
            textfmt::fixed(summary.avg_branching, 2),
        );
        out.push('\n');
        let mut field = |label: &str, value: String| {
            out.push_str(&format!("  {label:<40}{value}\n"));
        };
        field("learning algorithm:", "Hill-Climbing".to_string());
        field("score:", self.spec.report_name().to_string());
        match self.spec {
            ScoreSpec::Bic => {
                let coeff = (self.n as f64).ln() / 2.0;
                field("penalization coefficient:", textfmt::sig(coeff, 6));
            }
            ScoreSpec::Aic => {
                field("penalization coefficient:", "1".to_string());
            }
            ScoreSpec::Bdeu { iss } => {
                field("graph prior:", "Uniform".to_string());
                let rendered = if iss.fract() == 0.0 && iss.abs() < 1e15 {
                    format!("{}", iss as i64)
                } else {
                    textfmt::sig(iss, 6)
                };
                field("imaginary sample size:", rendered);
            }
            ScoreSpec::LogLik => {}
        }
        field(
            "tests used in the learning procedure:",
            self.score_calls.to_string(),
        );
        field("optimized:", "TRUE".to_string());
        out
    }
}

/// Splits a model string into lines of at most 77 columns, breaking
/// only between blocks.
fn wrap_model(model: &str) -> Vec<String> {
    let mut lines = Vec::new();
    let mut current = String::new();
    for block in model.split(' ') {
        if !current.is_empty() && current.len() + 1 + block.len() > 77 {
            lines.push(std::mem::take(&mut current));
        }
        if !current.is_empty() {
            current.push(' ');
        }
        current.push_str(block);
    }
    if !current.is_empty() || lines.is_empty() {
        lines.push(current);
    }
    lines
}

/// Learns a structure from complete data by steepest-ascent
/// hill-climbing.
///
/// Each round evaluates every legal move, applies the one with the
/// largest improvement (earliest in enumeration order on ties), and
/// stops when the best improvement is at most `config.eps` or
/// `config.max_iter` moves have been applied. The reported score is
/// recomputed from scratch at the end rather than trusting the
/// incremental updates.
pub fn hill_climb(
    data: &Dataset,
    spec: ScoreSpec,
    constraints: &ArcConstraints,
    config: &SearchConfig,
) -> Result<SearchReport, SearchError> {
    config.validate()?;
    let nodes: Vec<NodeId> = data.schemas().iter().map(|s| s.code.clone()).collect();
    let mut dag = constraints.start_graph(&nodes)?;
    let mut scorer = Scorer::new(data, spec)?;

    let mut family: BTreeMap<NodeId, f64> = BTreeMap::new();
    for node in &nodes {
        let parents = dag.parents(node)?.clone();
        family.insert(node.clone(), scorer.family(node, &parents)?);
    }

    // Best move so far: its gain, the move, and the family rescores
    // it would commit.
    type Candidate = (f64, Move, Vec<(NodeId, f64)>);
    let mut trace: Vec<(Move, f64)> = Vec::new();
    while trace.len() < config.max_iter {
        let mut best: Option<Candidate> = None;
        for mv in legal_moves(&dag, constraints) {
            // Rescore only the children whose parent sets change.
            let mut updates = Vec::with_capacity(2);
            match &mv {
                Move::Add { from, to } => {
                    let mut parents = dag.parents(to)?.clone();
                    parents.insert(from.clone());
                    updates.push((to.clone(), scorer.family(to, &parents)?));
                }
                Move::Delete { from, to } => {
                    let mut parents = dag.parents(to)?.clone();
                    parents.remove(from);
                    updates.push((to.clone(), scorer.family(to, &parents)?));
                }
                Move::Reverse { from, to } => {
                    let mut to_parents = dag.parents(to)?.clone();
                    to_parents.remove(from);
                    updates.push((to.clone(), scorer.family(to, &to_parents)?));
                    let mut from_parents = dag.parents(from)?.clone();
                    from_parents.insert(to.clone());
                    updates.push((from.clone(), scorer.family(from, &from_parents)?));
                }
            }
            let delta: f64 = updates
                .iter()
                .map(|(node, new)| new - family[node])
                .sum();
            if delta > config.eps && best.as_ref().is_none_or(|(d, _, _)| delta > *d) {
                best = Some((delta, mv, updates));
            }
        }
        let Some((delta, mv, updates)) = best else {
            break;
        };
        match &mv {
            Move::Add { from, to } => dag.add_arc(from, to)?,
            Move::Delete { from, to } => dag.remove_arc(from, to)?,
            Move::Reverse { from, to } => dag.reverse_arc(from, to)?,
        }
        for (node, new) in updates {
            family.insert(node, new);
        }
        trace.push((mv, delta));
    }

    let score = network_score(data, &dag, &spec)?;
    Ok(SearchReport {
        dag,
        score,
        spec,
        n: data.n_rows(),
        iterations: trace.len(),
        score_calls: scorer.calls(),
        cache_hits: scorer.hits(),
        cache_misses: scorer.misses(),
        trace,
    })
}
