//! Dirichlet posterior simulation for contingency-table cell
//! probabilities.
//!
//! A multinomial table with a Dirichlet prior has a Dirichlet
//! posterior, so [`DirichletPosterior::sample`] draws from it directly:
//! independent Gamma variates, one per cell, normalized to the simplex.
//! There is no Markov chain anywhere, but the draws are organized into
//! chains and summarized in the classical MCMC layout (mean, SD, naive
//! and time-series standard errors, quantiles, per-chain HPD intervals)
//! so the report reads like the usual coda output.

use std::fmt::Write as _;

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Gamma};
use thiserror::Error;

use crate::dataset::{DataError, Dataset};
use crate::inference::Evidence;
use crate::textfmt;

#[derive(Debug, Error)]
pub enum PosteriorError {
    #[error("no rows match the filter")]
    EmptySubset,
    #[error("the table needs at least two cells, got {0}")]
    TooFewCells(usize),
    #[error("the two table variables must differ, got `{0}` twice")]
    SameVariable(String),
    #[error("prior weight must be positive and finite, got {0}")]
    BadAlpha(f64),
    #[error("level index {index} out of range for `{variable}` ({r} levels)")]
    LevelOutOfRange { variable: String, index: usize, r: usize },
    #[error("invalid Monte Carlo configuration: {0}")]
    Config(String),
    #[error("malformed draws: {0}")]
    Shape(String),
    #[error(transparent)]
    Data(#[from] DataError),
}

/// A Dirichlet posterior over the cells of a contingency table:
/// observed counts plus a positive prior weight per cell.
#[derive(Debug, Clone, PartialEq)]
pub struct DirichletPosterior {
    cells: Vec<String>,
    counts: Vec<u64>,
    alpha: Vec<f64>,
}

impl DirichletPosterior {
    pub fn new(
        cells: Vec<String>,
        counts: Vec<u64>,
        alpha: Vec<f64>,
    ) -> Result<Self, PosteriorError> {
        if cells.len() < 2 {
            return Err(PosteriorError::TooFewCells(cells.len()));
        }
        if counts.len() != cells.len() || alpha.len() != cells.len() {
            return Err(PosteriorError::Shape(format!(
                "{} cells, {} counts, {} prior weights",
                cells.len(),
                counts.len(),
                alpha.len()
            )));
        }
        if let Some(&a) = alpha.iter().find(|a| !(a.is_finite() && **a > 0.0)) {
            return Err(PosteriorError::BadAlpha(a));
        }
        Ok(DirichletPosterior { cells, counts, alpha })
    }

    pub fn cells(&self) -> &[String] {
        &self.cells
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    /// Posterior Dirichlet parameters, `counts + alpha` per cell.
    pub fn shapes(&self) -> Vec<f64> {
        self.counts
            .iter()
            .zip(&self.alpha)
            .map(|(&n, &a)| n as f64 + a)
            .collect()
    }

    /// Analytic posterior mean, `(counts + alpha) / Σ(counts + alpha)`.
    pub fn mean(&self) -> Vec<f64> {
        let shapes = self.shapes();
        let total: f64 = shapes.iter().sum();
        shapes.into_iter().map(|s| s / total).collect()
    }

    /// Draws `cfg.chains × cfg.samples_per_chain` independent vectors
    /// from the posterior. Chain `c` uses stream `c` of a ChaCha20
    /// generator seeded with `cfg.seed`, so reruns are bit-identical
    /// and chains never share randomness.
    pub fn sample(&self, cfg: &McConfig) -> Result<McDraws, PosteriorError> {
        cfg.validate()?;
        let gammas: Vec<Gamma<f64>> = self
            .shapes()
            .iter()
            .map(|&s| Gamma::new(s, 1.0).expect("shape is positive and finite"))
            .collect();
        let cells = self.cells.len();
        let mut values = Vec::with_capacity(cfg.chains * cfg.samples_per_chain * cells);
        let mut draw = vec![0.0f64; cells];
        for chain in 0..cfg.chains {
            let mut rng = ChaCha20Rng::seed_from_u64(cfg.seed);
            rng.set_stream(chain as u64);
            for _ in 0..cfg.samples_per_chain {
                // Rejects the all-underflow corner so every draw lies
                // strictly inside the simplex.
                loop {
                    let mut total = 0.0;
                    for (slot, gamma) in draw.iter_mut().zip(&gammas) {
                        *slot = gamma.sample(&mut rng);
                        total += *slot;
                    }
                    if total > 0.0 {
                        values.extend(draw.iter().map(|v| v / total));
                        break;
                    }
                }
            }
        }
        McDraws::from_values(self.cells.clone(), cfg.chains, cfg.samples_per_chain, values)
    }
}

/// How many draws to take and how to summarize them.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McConfig {
    pub chains: usize,
    pub samples_per_chain: usize,
    pub seed: u64,
    /// Probability mass each HPD interval must cover.
    pub hpd_prob: f64,
}

impl Default for McConfig {
    fn default() -> Self {
        McConfig {
            chains: 4,
            samples_per_chain: 10_000,
            seed: 0,
            hpd_prob: 0.95,
        }
    }
}

impl McConfig {
    fn validate(&self) -> Result<(), PosteriorError> {
        if self.chains == 0 {
            return Err(PosteriorError::Config("chains must be positive".into()));
        }
        if self.samples_per_chain == 0 {
            return Err(PosteriorError::Config(
                "samples per chain must be positive".into(),
            ));
        }
        if !(self.hpd_prob > 0.0 && self.hpd_prob < 1.0) {
            return Err(PosteriorError::Config(format!(
                "hpd probability must lie in (0, 1), got {}",
                self.hpd_prob
            )));
        }
        Ok(())
    }
}

/// Simulated posterior draws, `chains × samples × cells`, stored
/// chain-major then sample-major.
#[derive(Debug, Clone, PartialEq)]
pub struct McDraws {
    labels: Vec<String>,
    chains: usize,
    samples: usize,
    values: Vec<f64>,
}

impl McDraws {
    pub fn from_values(
        labels: Vec<String>,
        chains: usize,
        samples: usize,
        values: Vec<f64>,
    ) -> Result<Self, PosteriorError> {
        if chains == 0 || samples == 0 || labels.is_empty() {
            return Err(PosteriorError::Shape(
                "chains, samples, and cells must all be positive".into(),
            ));
        }
        if values.len() != chains * samples * labels.len() {
            return Err(PosteriorError::Shape(format!(
                "{} values for {} chains × {} samples × {} cells",
                values.len(),
                chains,
                samples,
                labels.len()
            )));
        }
        Ok(McDraws {
            labels,
            chains,
            samples,
            values,
        })
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn chains(&self) -> usize {
        self.chains
    }

    pub fn samples_per_chain(&self) -> usize {
        self.samples
    }

    pub fn cell_count(&self) -> usize {
        self.labels.len()
    }

    pub fn value(&self, chain: usize, sample: usize, cell: usize) -> f64 {
        let cells = self.labels.len();
        self.values[(chain * self.samples + sample) * cells + cell]
    }

    /// All draws of one cell within one chain, in sampling order.
    pub fn chain_cell(&self, chain: usize, cell: usize) -> Vec<f64> {
        (0..self.samples)
            .map(|s| self.value(chain, s, cell))
            .collect()
    }

    /// All draws of one cell across all chains, chain-major.
    pub fn pooled_cell(&self, cell: usize) -> Vec<f64> {
        (0..self.chains)
            .flat_map(|c| (0..self.samples).map(move |s| self.value(c, s, cell)))
            .collect()
    }

    /// Summarizes the draws: pooled moments and quantiles per cell,
    /// plus one HPD interval per (chain, cell).
    pub fn summarize(&self, cfg: &McConfig) -> Result<PosteriorSummary, PosteriorError> {
        cfg.validate()?;
        let n_total = self.chains * self.samples;
        let mut cells = Vec::with_capacity(self.labels.len());
        for cell in 0..self.labels.len() {
            let pooled = self.pooled_cell(cell);
            let mean = pooled.iter().sum::<f64>() / n_total as f64;
            let ss: f64 = pooled.iter().map(|x| (x - mean) * (x - mean)).sum();
            let sd = if n_total > 1 {
                (ss / (n_total - 1) as f64).sqrt()
            } else {
                0.0
            };
            let naive_se = sd / (n_total as f64).sqrt();
            let ts_se = batch_means_se(&pooled);
            let mut sorted = pooled;
            sorted.sort_by(|a, b| a.partial_cmp(b).expect("draws are finite"));
            let quantiles = [0.025, 0.25, 0.5, 0.75, 0.975]
                .map(|p| quantile_type7(&sorted, p));
            cells.push(CellSummary {
                label: self.labels[cell].clone(),
                mean,
                sd,
                naive_se,
                ts_se,
                quantiles,
            });
        }
        let mut hpd = Vec::with_capacity(self.chains);
        for chain in 0..self.chains {
            let mut intervals = Vec::with_capacity(self.labels.len());
            for cell in 0..self.labels.len() {
                let mut draws = self.chain_cell(chain, cell);
                draws.sort_by(|a, b| a.partial_cmp(b).expect("draws are finite"));
                intervals.push(hpd_shortest(&draws, cfg.hpd_prob));
            }
            hpd.push(intervals);
        }
        Ok(PosteriorSummary {
            cells,
            hpd,
            chains: self.chains,
            samples_per_chain: self.samples,
            hpd_prob: cfg.hpd_prob,
        })
    }
}

/// Pooled statistics for one cell.
#[derive(Debug, Clone, PartialEq)]
pub struct CellSummary {
    pub label: String,
    pub mean: f64,
    pub sd: f64,
    /// `sd / √N` over all pooled draws.
    pub naive_se: f64,
    /// Batch-means standard error; close to `naive_se` here because
    /// the draws are independent, reported for format fidelity.
    pub ts_se: f64,
    /// 2.5%, 25%, 50%, 75%, 97.5% quantiles.
    pub quantiles: [f64; 5],
}

/// Full Monte Carlo summary: per-cell statistics and per-chain HPD
/// intervals.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorSummary {
    pub cells: Vec<CellSummary>,
    /// `hpd[chain][cell] = (lower, upper)`.
    pub hpd: Vec<Vec<(f64, f64)>>,
    pub chains: usize,
    pub samples_per_chain: usize,
    pub hpd_prob: f64,
}

impl PosteriorSummary {
    /// The summary as a text report in the classical coda layout.
    pub fn text(&self) -> String {
        let labels: Vec<String> = (1..=self.cells.len()).map(|k| format!("pi.{k}")).collect();
        let mut out = String::new();
        let _ = writeln!(out, "Iterations = 1:{}", self.samples_per_chain);
        let _ = writeln!(out, "Thinning interval = 1");
        let _ = writeln!(out, "Number of chains = {}", self.chains);
        let _ = writeln!(out, "Sample size per chain = {}", self.samples_per_chain);
        out.push('\n');
        out.push_str("1. Empirical mean and standard deviation for each variable,\n");
        out.push_str("   plus standard error of the mean:\n\n");
        let stat_columns = vec![
            self.cells.iter().map(|c| textfmt::fixed(c.mean, 6)).collect(),
            self.cells.iter().map(|c| textfmt::fixed(c.sd, 6)).collect(),
            self.cells.iter().map(|c| textfmt::sci(c.naive_se, 4)).collect(),
            self.cells.iter().map(|c| textfmt::sci(c.ts_se, 4)).collect(),
        ];
        out.push_str(&render_table(
            &labels,
            &["Mean", "SD", "Naive SE", "Time-series SE"],
            &stat_columns,
        ));
        out.push('\n');
        out.push_str("2. Quantiles for each variable:\n\n");
        let quantile_columns: Vec<Vec<String>> = (0..5)
            .map(|q| r_column(&self.cells.iter().map(|c| c.quantiles[q]).collect::<Vec<_>>()))
            .collect();
        out.push_str(&render_table(
            &labels,
            &["2.5%", "25%", "50%", "75%", "97.5%"],
            &quantile_columns,
        ));
        for (chain, intervals) in self.hpd.iter().enumerate() {
            out.push('\n');
            let _ = writeln!(out, "[[{}]]", chain + 1);
            let lower = r_column(&intervals.iter().map(|i| i.0).collect::<Vec<_>>());
            let upper = r_column(&intervals.iter().map(|i| i.1).collect::<Vec<_>>());
            out.push_str(&render_table(&labels, &["lower", "upper"], &[lower, upper]));
            out.push_str("attr(,\"Probability\")\n");
            let _ = writeln!(out, "[1] {}", self.hpd_prob);
        }
        out
    }
}

/// Builds the posterior for the joint cells of `a` and `b` over the
/// rows matching `filter`. Cells are ordered with `a` cycling fastest:
/// cell `k` is `(a = k mod r_a, b = k div r_a)`. Every cell receives
/// the same prior weight `alpha_scalar`.
pub fn posterior_from_query(
    data: &Dataset,
    filter: &Evidence,
    a: &str,
    b: &str,
    alpha_scalar: f64,
) -> Result<DirichletPosterior, PosteriorError> {
    if !(alpha_scalar.is_finite() && alpha_scalar > 0.0) {
        return Err(PosteriorError::BadAlpha(alpha_scalar));
    }
    if a == b {
        return Err(PosteriorError::SameVariable(a.to_string()));
    }
    let ia = data.var_index(a)?;
    let ib = data.var_index(b)?;
    let mut filter_cols = Vec::new();
    for (var, level) in filter.iter() {
        let idx = data.var_index(var)?;
        let r = data.schemas()[idx].cardinality();
        if level >= r {
            return Err(PosteriorError::LevelOutOfRange {
                variable: var.clone(),
                index: level,
                r,
            });
        }
        filter_cols.push((idx, level as u32));
    }
    if let Some((variable, count)) = data.incomplete_variables().into_iter().next() {
        return Err(DataError::MissingData { variable, count }.into());
    }
    let schema_a = &data.schemas()[ia];
    let schema_b = &data.schemas()[ib];
    let (ra, rb) = (schema_a.cardinality(), schema_b.cardinality());
    if ra * rb < 2 {
        return Err(PosteriorError::TooFewCells(ra * rb));
    }
    let mut counts = vec![0u64; ra * rb];
    let mut kept = 0u64;
    for row in data.rows() {
        if filter_cols.iter().all(|&(idx, level)| row[idx] == Some(level)) {
            let la = row[ia].expect("complete data") as usize;
            let lb = row[ib].expect("complete data") as usize;
            counts[lb * ra + la] += 1;
            kept += 1;
        }
    }
    if kept == 0 {
        return Err(PosteriorError::EmptySubset);
    }
    let cells = (0..ra * rb)
        .map(|k| {
            format!(
                "({a}={}, {b}={})",
                schema_a.levels[k % ra],
                schema_b.levels[k / ra]
            )
        })
        .collect();
    DirichletPosterior::new(cells, counts, vec![alpha_scalar; ra * rb])
}

/// Resolves (variable, level label) pairs against a dataset's schemas.
pub fn evidence_from_labels(
    data: &Dataset,
    pairs: &[(&str, &str)],
) -> Result<Evidence, PosteriorError> {
    let mut evidence = Evidence::empty();
    for (var, label) in pairs {
        let schema = data.schema(var)?;
        let index = schema.level_index(label).ok_or_else(|| {
            DataError::UnknownLabel {
                variable: var.to_string(),
                label: label.to_string(),
                row: None,
            }
        })?;
        evidence.set(*var, index as usize);
    }
    Ok(evidence)
}

/// Standard error of the mean by batch means: the draw sequence is cut
/// into up to 100 equal batches and the batch means treated as an
/// independent sample.
fn batch_means_se(draws: &[f64]) -> f64 {
    let n = draws.len();
    let batches = n.min(100);
    if batches < 2 {
        return 0.0;
    }
    let size = n / batches;
    let means: Vec<f64> = (0..batches)
        .map(|b| draws[b * size..(b + 1) * size].iter().sum::<f64>() / size as f64)
        .collect();
    let grand = means.iter().sum::<f64>() / batches as f64;
    let var = means.iter().map(|m| (m - grand) * (m - grand)).sum::<f64>()
        / (batches - 1) as f64;
    (var / batches as f64).sqrt()
}

/// Linear-interpolation quantile at `p(n−1) + 1` over sorted values.
fn quantile_type7(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = p * (n - 1) as f64;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Shortest interval over sorted draws containing `⌈prob·n⌉` of them.
fn hpd_shortest(sorted: &[f64], prob: f64) -> (f64, f64) {
    let n = sorted.len();
    let w = ((prob * n as f64).ceil() as usize).clamp(1, n);
    let mut best = (sorted[0], sorted[w - 1]);
    for i in 1..=(n - w) {
        let (lo, hi) = (sorted[i], sorted[i + w - 1]);
        if hi - lo < best.1 - best.0 {
            best = (lo, hi);
        }
    }
    best
}

/// Renders a column of values the way R prints a numeric matrix
/// column: every entry with the same number of decimals, chosen as the
/// most any entry needs to show seven significant digits (trailing
/// zeros not counted).
fn r_column(values: &[f64]) -> Vec<String> {
    let dp = values.iter().map(|&v| decimals_for(v, 7)).max().unwrap_or(0);
    values.iter().map(|&v| textfmt::fixed(v, dp)).collect()
}

/// Decimal places needed to show `sig` significant digits of `x`,
/// after stripping trailing zeros.
fn decimals_for(x: f64, sig: usize) -> usize {
    if x == 0.0 || !x.is_finite() {
        return 0;
    }
    let exp = x.abs().log10().floor() as i32;
    let dp = (sig as i32 - 1 - exp).max(0) as usize;
    let rendered = format!("{:.dp$}", x.abs());
    match rendered.find('.') {
        Some(dot) => rendered.trim_end_matches('0').len().saturating_sub(dot + 1),
        None => 0,
    }
}

/// Lays out a labeled table: labels left-aligned, every value column
/// right-aligned under its right-aligned header.
fn render_table(labels: &[String], headers: &[&str], columns: &[Vec<String>]) -> String {
    let label_width = labels.iter().map(String::len).max().unwrap_or(0);
    let widths: Vec<usize> = headers
        .iter()
        .zip(columns)
        .map(|(h, col)| col.iter().map(String::len).max().unwrap_or(0).max(h.len()))
        .collect();
    let mut out = String::new();
    out.push_str(&" ".repeat(label_width));
    for (header, width) in headers.iter().zip(&widths) {
        out.push(' ');
        out.push_str(&textfmt::pad_left(header, *width));
    }
    out.push('\n');
    for (row, label) in labels.iter().enumerate() {
        out.push_str(&format!("{label:<label_width$}"));
        for (col, width) in columns.iter().zip(&widths) {
            out.push(' ');
            out.push_str(&textfmt::pad_left(&col[row], *width));
        }
        out.push('\n');
    }
    out
}
