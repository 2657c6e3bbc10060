//! Conditional probability tables and fitted networks.
//!
//! A [`Network`] couples a DAG with one [`Cpt`] per node and the level
//! schemas the indices refer to. Fitting is either maximum likelihood
//! (relative frequencies, with unobserved parent configurations filled
//! uniformly and reported back) or Bayesian (Dirichlet posterior means
//! under the same uniform prior the BDeu score uses).

use std::collections::BTreeMap;
use std::fmt::Write as _;

use thiserror::Error;

use crate::dataset::{DataError, Dataset, VariableSchema};
use crate::graph::{Dag, GraphError, NodeId};
use crate::textfmt;

#[derive(Debug, Error)]
pub enum ParamError {
    #[error("imaginary sample size must be positive and finite, got {0}")]
    BadIss(f64),
    #[error("network is inconsistent: {0}")]
    Inconsistent(String),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

/// The conditional distribution of one node given its parents, stored
/// row-major: row `j` is the parent configuration (mixed-radix, first
/// parent most significant), column `k` the child level.
#[derive(Debug, Clone, PartialEq)]
pub struct Cpt {
    pub child: NodeId,
    /// Parents in lexicographic order, matching the graph.
    pub parents: Vec<NodeId>,
    pub r: usize,
    pub q: usize,
    table: Vec<f64>,
}

impl Cpt {
    pub fn new(
        child: impl Into<String>,
        parents: Vec<NodeId>,
        r: usize,
        q: usize,
        table: Vec<f64>,
    ) -> Result<Self, ParamError> {
        let cpt = Cpt { child: child.into(), parents, r, q, table };
        cpt.validate()?;
        Ok(cpt)
    }

    fn validate(&self) -> Result<(), ParamError> {
        let fail = |message: String| Err(ParamError::Inconsistent(message));
        if self.r == 0 || self.q == 0 {
            return fail(format!("cpt of `{}` has an empty dimension", self.child));
        }
        if self.table.len() != self.q * self.r {
            return fail(format!(
                "cpt of `{}` has {} entries, expected {}",
                self.child,
                self.table.len(),
                self.q * self.r
            ));
        }
        for j in 0..self.q {
            let row = self.row(j);
            if row.iter().any(|p| !(0.0..=1.0).contains(p)) {
                return fail(format!(
                    "cpt of `{}` row {j} has entries outside [0, 1]",
                    self.child
                ));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > 1e-9 {
                return fail(format!(
                    "cpt of `{}` row {j} sums to {sum}, not 1",
                    self.child
                ));
            }
        }
        Ok(())
    }

    pub fn p(&self, j: usize, k: usize) -> f64 {
        self.table[j * self.r + k]
    }

    pub fn row(&self, j: usize) -> &[f64] {
        &self.table[j * self.r..(j + 1) * self.r]
    }

    pub fn values(&self) -> &[f64] {
        &self.table
    }
}

/// A DAG with fitted parameters and the variable schemas that give its
/// level indices meaning. Schemas are kept sorted by code.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    dag: Dag,
    schemas: Vec<VariableSchema>,
    cpts: BTreeMap<NodeId, Cpt>,
}

impl Network {
    /// Assembles and validates a network: one schema and one CPT per
    /// node, parent lists matching the graph, dimensions matching the
    /// schema cardinalities.
    pub fn new(
        dag: Dag,
        mut schemas: Vec<VariableSchema>,
        cpts: Vec<Cpt>,
    ) -> Result<Self, ParamError> {
        schemas.sort_by(|a, b| a.code.cmp(&b.code));
        let fail = |message: String| Err(ParamError::Inconsistent(message));
        let nodes: Vec<&NodeId> = dag.nodes().collect();
        if schemas.len() != nodes.len()
            || schemas.iter().zip(&nodes).any(|(s, n)| &&s.code != n)
        {
            return fail("schemas do not cover exactly the graph's nodes".to_string());
        }
        let mut by_code: BTreeMap<NodeId, Cpt> = BTreeMap::new();
        for cpt in cpts {
            if by_code.insert(cpt.child.clone(), cpt).is_some() {
                return fail("a node has two cpts".to_string());
            }
        }
        let schema_of = |code: &str| {
            schemas
                .binary_search_by(|s| s.code.as_str().cmp(code))
                .map(|i| &schemas[i])
                .expect("node codes verified")
        };
        for node in &nodes {
            let Some(cpt) = by_code.get(*node) else {
                return fail(format!("node `{node}` has no cpt"));
            };
            let expected_parents: Vec<NodeId> =
                dag.parents(node).expect("own node").iter().cloned().collect();
            if cpt.parents != expected_parents {
                return fail(format!(
                    "cpt of `{node}` lists parents {:?}, graph has {:?}",
                    cpt.parents, expected_parents
                ));
            }
            if cpt.r != schema_of(node).cardinality() {
                return fail(format!(
                    "cpt of `{node}` has {} child levels, schema has {}",
                    cpt.r,
                    schema_of(node).cardinality()
                ));
            }
            let q: usize = cpt
                .parents
                .iter()
                .map(|p| schema_of(p).cardinality())
                .product();
            if cpt.q != q {
                return fail(format!(
                    "cpt of `{node}` has {} parent configurations, schemas give {q}",
                    cpt.q
                ));
            }
        }
        Ok(Network { dag, schemas, cpts: by_code })
    }

    pub fn dag(&self) -> &Dag {
        &self.dag
    }

    /// Schemas sorted by variable code.
    pub fn schemas(&self) -> &[VariableSchema] {
        &self.schemas
    }

    pub fn schema(&self, node: &str) -> Result<&VariableSchema, ParamError> {
        self.schemas
            .binary_search_by(|s| s.code.as_str().cmp(node))
            .map(|i| &self.schemas[i])
            .map_err(|_| ParamError::Graph(GraphError::UnknownNode(node.to_string())))
    }

    pub fn cpt(&self, node: &str) -> Result<&Cpt, ParamError> {
        self.cpts
            .get(node)
            .ok_or_else(|| ParamError::Graph(GraphError::UnknownNode(node.to_string())))
    }

    /// Renders one node's table in the conditional-probability-table
    /// block layout: child levels as rows, the first parent as columns,
    /// one block per configuration of the remaining parents.
    pub fn cpt_text(&self, node: &str) -> Result<String, ParamError> {
        let cpt = self.cpt(node)?;
        let child = self.schema(node)?;
        let mut out = String::from("Conditional probability table:\n\n");
        let fmt = |p: f64| textfmt::fixed(p, 8);

        if cpt.parents.is_empty() {
            let widths: Vec<usize> = child
                .levels
                .iter()
                .enumerate()
                .map(|(k, l)| l.len().max(fmt(cpt.p(0, k)).len()))
                .collect();
            let labels: Vec<String> = child
                .levels
                .iter()
                .zip(&widths)
                .map(|(l, &w)| textfmt::pad_left(l, w))
                .collect();
            let values: Vec<String> = (0..cpt.r)
                .map(|k| textfmt::pad_left(&fmt(cpt.p(0, k)), widths[k]))
                .collect();
            let _ = writeln!(out, "{}", labels.join(" "));
            let _ = writeln!(out, "{}", values.join(" "));
            return Ok(out);
        }

        let first_parent = self.schema(&cpt.parents[0])?;
        let rest: Vec<&VariableSchema> = cpt.parents[1..]
            .iter()
            .map(|p| self.schema(p))
            .collect::<Result<_, _>>()?;
        let label_width = child
            .code
            .len()
            .max(2 + child.levels.iter().map(String::len).max().unwrap_or(0));
        let col_width = first_parent
            .levels
            .iter()
            .map(|l| l.len().max(10))
            .max()
            .unwrap_or(10);

        // Strides of the remaining parents within the configuration
        // index: the first parent is most significant, so a block over
        // the remaining parents selects j = a · q_rest + j_rest.
        let q_rest: usize = rest.iter().map(|s| s.cardinality()).product();
        let mut blocks: Vec<(String, usize)> = Vec::new();
        if rest.is_empty() {
            blocks.push((String::new(), 0));
        } else {
            // Leftmost remaining parent cycles fastest in block order.
            let mut levels = vec![0usize; rest.len()];
            loop {
                let mut j_rest = 0usize;
                for (schema, &level) in rest.iter().zip(&levels) {
                    j_rest = j_rest * schema.cardinality() + level;
                }
                let title: Vec<String> = rest
                    .iter()
                    .zip(&levels)
                    .map(|(s, &l)| format!("{} = {}", s.code, s.levels[l]))
                    .collect();
                blocks.push((format!(", , {}", title.join(", ")), j_rest));
                let mut dim = 0;
                loop {
                    levels[dim] += 1;
                    if levels[dim] < rest[dim].cardinality() {
                        break;
                    }
                    levels[dim] = 0;
                    dim += 1;
                    if dim == rest.len() {
                        break;
                    }
                }
                if dim == rest.len() {
                    break;
                }
            }
        }

        for (block_no, (title, j_rest)) in blocks.iter().enumerate() {
            if block_no > 0 {
                out.push('\n');
            }
            if !title.is_empty() {
                let _ = writeln!(out, "{title}\n");
            }
            let _ = writeln!(out, "{}{}", " ".repeat(label_width + 1), first_parent.code);
            let header: Vec<String> = first_parent
                .levels
                .iter()
                .map(|l| textfmt::pad_left(l, col_width))
                .collect();
            let _ = writeln!(
                out,
                "{}{}",
                format_args!("{:<label_width$}", child.code),
                header.iter().map(|h| format!(" {h}")).collect::<String>()
            );
            for k in 0..cpt.r {
                let _ = write!(out, "{}", textfmt::pad_left(&child.levels[k], label_width));
                for a in 0..first_parent.cardinality() {
                    let j = a * q_rest + j_rest;
                    let _ = write!(out, " {}", textfmt::pad_left(&fmt(cpt.p(j, k)), col_width));
                }
                out.push('\n');
            }
        }
        Ok(out)
    }
}

fn check_iss(iss: f64) -> Result<(), ParamError> {
    if iss.is_finite() && iss > 0.0 {
        Ok(())
    } else {
        Err(ParamError::BadIss(iss))
    }
}

fn fit_with(
    data: &Dataset,
    dag: &Dag,
    mut cell: impl FnMut(u64, u64, usize, usize) -> f64,
) -> Result<(Network, Vec<(NodeId, usize)>), ParamError> {
    let mut cpts = Vec::new();
    let mut uniform_rows = Vec::new();
    for node in dag.nodes() {
        let parents: Vec<NodeId> = dag.parents(node)?.iter().cloned().collect();
        let parent_refs: Vec<&str> = parents.iter().map(String::as_str).collect();
        let counts = data.family_counts(node, &parent_refs)?;
        let mut table = Vec::with_capacity(counts.q * counts.r);
        for j in 0..counts.q {
            let n_ij = counts.n_ij(j);
            if n_ij == 0 {
                // Track rows the estimator had no data for; the caller
                // decides whether that is uniform fill (MLE) or just the
                // prior mean (Bayes).
                uniform_rows.push((node.clone(), j));
            }
            for k in 0..counts.r {
                table.push(cell(counts.n_ijk(j, k), n_ij, counts.r, counts.q));
            }
        }
        cpts.push(Cpt::new(node.clone(), parents, counts.r, counts.q, table)?);
    }
    let schemas: Vec<VariableSchema> = dag
        .nodes()
        .map(|n| data.schema(n).cloned())
        .collect::<Result<_, _>>()?;
    let net = Network::new(dag.clone(), schemas, cpts)?;
    Ok((net, uniform_rows))
}

/// Maximum-likelihood fit: relative frequencies per parent
/// configuration. Configurations that never occur get a uniform row;
/// the returned list names each such (node, configuration index).
pub fn fit_mle(data: &Dataset, dag: &Dag) -> Result<(Network, Vec<(NodeId, usize)>), ParamError> {
    fit_with(data, dag, |n_ijk, n_ij, r, _| {
        if n_ij == 0 {
            1.0 / r as f64
        } else {
            n_ijk as f64 / n_ij as f64
        }
    })
}

/// Bayesian fit: Dirichlet posterior means under the uniform prior with
/// imaginary sample size `iss`, `(n_ijk + iss/(r·q)) / (n_ij + iss/q)`.
/// Every probability is strictly positive.
pub fn fit_bayes(data: &Dataset, dag: &Dag, iss: f64) -> Result<Network, ParamError> {
    check_iss(iss)?;
    let (net, _) = fit_with(data, dag, |n_ijk, n_ij, r, q| {
        let alpha_jk = iss / (r as f64 * q as f64);
        let alpha_j = iss / q as f64;
        (n_ijk as f64 + alpha_jk) / (n_ij as f64 + alpha_j)
    })?;
    Ok(net)
}
