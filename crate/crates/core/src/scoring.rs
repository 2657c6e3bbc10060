//! Decomposable network scores on the natural-log scale.
//!
//! Every score decomposes into one term per (node, parent set) family,
//! computed from [`FamilyCounts`] alone, and larger is always better:
//!
//! * log-likelihood: `Σ_j Σ_k n_ijk · ln(n_ijk / n_ij)`, the maximized
//!   multinomial log-likelihood, with `0 · ln 0 = 0`;
//! * BIC: log-likelihood minus `(ln n / 2) · q(r − 1)`;
//! * AIC: log-likelihood minus `q(r − 1)`;
//! * BDeu: the Bayesian Dirichlet marginal likelihood with a uniform
//!   structure-equivalent prior, `α_jk = iss / (r·q)`.
//!
//! BDeu assigns Markov-equivalent graphs identical scores for any
//! imaginary sample size, and so do the likelihood-based scores; the
//! integration tests exercise that property over random datasets.

use std::collections::{BTreeSet, HashMap};

use statrs::function::gamma::ln_gamma;
use thiserror::Error;

use crate::dataset::{DataError, Dataset, FamilyCounts};
use crate::graph::{Dag, GraphError, NodeId};

#[derive(Debug, Error)]
pub enum ScoreError {
    #[error("sample size must be positive for this score")]
    BadSampleSize,
    #[error("imaginary sample size must be positive and finite, got {0}")]
    BadIss(f64),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

/// Which score to compute, with its hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ScoreSpec {
    LogLik,
    Bic,
    Aic,
    /// Bayesian Dirichlet equivalent uniform with the given imaginary
    /// sample size.
    Bdeu { iss: f64 },
}

impl ScoreSpec {
    fn validate(&self) -> Result<(), ScoreError> {
        if let ScoreSpec::Bdeu { iss } = self {
            if !(iss.is_finite() && *iss > 0.0) {
                return Err(ScoreError::BadIss(*iss));
            }
        }
        Ok(())
    }

    /// Name used in learning reports.
    pub fn report_name(&self) -> &'static str {
        match self {
            ScoreSpec::LogLik => "Log-Likelihood (disc.)",
            ScoreSpec::Bic => "BIC (disc.)",
            ScoreSpec::Aic => "AIC (disc.)",
            ScoreSpec::Bdeu { .. } => "Bayesian Dirichlet (BDe)",
        }
    }
}

/// Maximized multinomial log-likelihood of one family. Empty counts and
/// empty configurations contribute zero.
pub fn family_loglik(counts: &FamilyCounts) -> f64 {
    let mut total = 0.0;
    for j in 0..counts.q {
        let n_ij = counts.n_ij(j);
        if n_ij == 0 {
            continue;
        }
        for k in 0..counts.r {
            let n_ijk = counts.n_ijk(j, k);
            if n_ijk > 0 {
                total += n_ijk as f64 * (n_ijk as f64 / n_ij as f64).ln();
            }
        }
    }
    total
}

fn family_bdeu(counts: &FamilyCounts, iss: f64) -> f64 {
    let alpha_j = iss / counts.q as f64;
    let alpha_jk = alpha_j / counts.r as f64;
    let mut total = 0.0;
    for j in 0..counts.q {
        let n_ij = counts.n_ij(j);
        if n_ij == 0 {
            // lnΓ(α_j) − lnΓ(α_j) and the inner terms all cancel.
            continue;
        }
        total += ln_gamma(alpha_j) - ln_gamma(alpha_j + n_ij as f64);
        for k in 0..counts.r {
            let n_ijk = counts.n_ijk(j, k);
            if n_ijk > 0 {
                total += ln_gamma(alpha_jk + n_ijk as f64) - ln_gamma(alpha_jk);
            }
        }
    }
    total
}

/// Number of free parameters of one family: `q(r − 1)`.
fn family_dim(counts: &FamilyCounts) -> f64 {
    counts.q as f64 * (counts.r as f64 - 1.0)
}

/// Score of one family under `spec`.
pub fn family_score(counts: &FamilyCounts, spec: &ScoreSpec) -> Result<f64, ScoreError> {
    spec.validate()?;
    match spec {
        ScoreSpec::LogLik => Ok(family_loglik(counts)),
        ScoreSpec::Bic => {
            if counts.n == 0 {
                return Err(ScoreError::BadSampleSize);
            }
            let penalty = (counts.n as f64).ln() / 2.0;
            Ok(family_loglik(counts) - penalty * family_dim(counts))
        }
        ScoreSpec::Aic => Ok(family_loglik(counts) - family_dim(counts)),
        ScoreSpec::Bdeu { iss } => Ok(family_bdeu(counts, *iss)),
    }
}

/// Score of a whole graph: the sum of its family scores, iterating
/// nodes in lexicographic order.
pub fn network_score(data: &Dataset, dag: &Dag, spec: &ScoreSpec) -> Result<f64, ScoreError> {
    let mut total = 0.0;
    for node in dag.nodes() {
        let parents: Vec<&str> = dag.parents(node)?.iter().map(String::as_str).collect();
        let counts = data.family_counts(node, &parents)?;
        total += family_score(&counts, spec)?;
    }
    Ok(total)
}

/// A family-score evaluator with an optional memo table, keyed by
/// (child, sorted parent set). The hill-climbing search asks for the
/// same families over and over; with the cache each is counted once.
pub struct Scorer<'a> {
    data: &'a Dataset,
    spec: ScoreSpec,
    cache: Option<HashMap<(NodeId, Vec<NodeId>), f64>>,
    hits: u64,
    misses: u64,
}

impl<'a> Scorer<'a> {
    pub fn new(data: &'a Dataset, spec: ScoreSpec) -> Result<Self, ScoreError> {
        Self::build(data, spec, true)
    }

    /// A scorer that recomputes every request; results must not change.
    pub fn without_cache(data: &'a Dataset, spec: ScoreSpec) -> Result<Self, ScoreError> {
        Self::build(data, spec, false)
    }

    fn build(data: &'a Dataset, spec: ScoreSpec, cached: bool) -> Result<Self, ScoreError> {
        spec.validate()?;
        Ok(Scorer {
            data,
            spec,
            cache: cached.then(HashMap::new),
            hits: 0,
            misses: 0,
        })
    }

    pub fn spec(&self) -> &ScoreSpec {
        &self.spec
    }

    /// Score of `child` with the given parent set.
    pub fn family(&mut self, child: &str, parents: &BTreeSet<NodeId>) -> Result<f64, ScoreError> {
        let key = (
            child.to_string(),
            parents.iter().cloned().collect::<Vec<_>>(),
        );
        if let Some(cache) = &self.cache {
            if let Some(&score) = cache.get(&key) {
                self.hits += 1;
                return Ok(score);
            }
        }
        self.misses += 1;
        let parent_refs: Vec<&str> = key.1.iter().map(String::as_str).collect();
        let counts = self.data.family_counts(child, &parent_refs)?;
        let score = family_score(&counts, &self.spec)?;
        if let Some(cache) = &mut self.cache {
            cache.insert(key, score);
        }
        Ok(score)
    }

    /// Sum of family scores over the graph, through the cache.
    pub fn network(&mut self, dag: &Dag) -> Result<f64, ScoreError> {
        let mut total = 0.0;
        let nodes: Vec<NodeId> = dag.nodes().cloned().collect();
        for node in &nodes {
            let parents = dag.parents(node)?.clone();
            total += self.family(node, &parents)?;
        }
        Ok(total)
    }

    /// Cache hits so far.
    pub fn hits(&self) -> u64 {
        self.hits
    }

    /// Evaluations that went to the data (cache misses, or every call
    /// when the cache is off).
    pub fn misses(&self) -> u64 {
        self.misses
    }

    /// Total family-score requests.
    pub fn calls(&self) -> u64 {
        self.hits + self.misses
    }
}
