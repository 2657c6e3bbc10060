//! Discrete Bayesian network toolkit for categorical survey data.
//!
//! The crate covers the full workflow:
//!
//! * [`dataset`] — categorical tables with explicit level schemas, the
//!   preprocessing operations that clean survey extracts (level merging,
//!   variable fusion, cascade imputation, discretization, listwise
//!   deletion), and the sufficient statistics used everywhere else.
//! * [`graph`] — directed acyclic graphs over variable codes: model-string
//!   parsing and formatting, d-separation, Markov blankets, skeletons and
//!   v-structures, Markov equivalence, and structural summaries.
//! * [`scoring`] — decomposable network scores (log-likelihood, BIC, AIC,
//!   BDeu) on the natural-log scale, plus a per-family score cache.
//! * [`search`] — score-based structure learning by hill-climbing over
//!   arc additions, deletions, and reversals, with blacklist/whitelist
//!   constraints and a learning report.
//! * [`params`] — conditional probability table estimation, maximum
//!   likelihood or Bayesian posterior mean.
//! * [`inference`] — exact probability queries by variable elimination,
//!   checked against a brute-force joint for small networks.
//! * [`posterior`] — Dirichlet posterior simulation for joint cell
//!   probabilities, with Monte Carlo summaries and HPD intervals.
//! * [`document`] — the JSON network document the CLI reads and writes.
//!
//! All probabilities are f64, all counts u64, and every operation that
//! consumes randomness takes an explicit seed: rerunning with the same
//! inputs reproduces results bit for bit.

pub mod dataset;
pub mod document;
pub mod graph;
pub mod inference;
mod model_string;
pub mod params;
pub mod posterior;
pub mod scoring;
pub mod search;
mod textfmt;

pub use dataset::{DataError, Dataset, FamilyCounts, VariableSchema};
pub use graph::{Dag, GraphError, GraphSummary, NodeId};
pub use inference::{Evidence, Factor, InferenceError};
pub use params::{Cpt, Network};
pub use posterior::{DirichletPosterior, McConfig, McDraws, PosteriorSummary};
pub use scoring::{ScoreSpec, Scorer};
pub use search::{ArcConstraints, Move, SearchConfig, SearchReport};
