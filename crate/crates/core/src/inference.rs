//! Exact probability queries on fitted networks.
//!
//! [`query`] answers `P(targets | evidence)` by variable elimination
//! with a min-degree elimination order. [`full_joint`] materializes the
//! whole joint distribution cell by cell, straight from the chain rule;
//! it is deliberately independent of the factor algebra so the two
//! paths can check each other on small networks.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::graph::NodeId;
use crate::params::{Network, ParamError};

/// Joint tables larger than this many cells are refused.
const JOINT_CELL_LIMIT: u64 = 1 << 22;

#[derive(Debug, Error)]
pub enum InferenceError {
    #[error("unknown variable `{0}`")]
    UnknownNode(String),
    #[error("variable `{variable}` has no level `{label}`")]
    UnknownLevel { variable: String, label: String },
    #[error("level index {index} out of range for `{variable}` ({r} levels)")]
    LevelOutOfRange { variable: String, index: usize, r: usize },
    #[error("`{0}` cannot be both a query target and evidence")]
    Overlap(String),
    #[error("target list is empty")]
    EmptyTargets,
    #[error("target `{0}` listed twice")]
    DuplicateTarget(String),
    #[error("joint table would need {cells} cells (limit {limit})")]
    StateSpaceTooLarge { cells: u128, limit: u64 },
    #[error("evidence has probability zero under this network")]
    ZeroProbabilityEvidence,
    #[error("malformed factor: {0}")]
    Shape(String),
    #[error(transparent)]
    Param(#[from] ParamError),
}

/// Observed levels for a subset of variables.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Evidence {
    map: BTreeMap<NodeId, usize>,
}

impl Evidence {
    pub fn empty() -> Self {
        Evidence::default()
    }

    /// Builds evidence from (variable, level label) pairs, validated
    /// against the network's schemas.
    pub fn from_labels(net: &Network, pairs: &[(&str, &str)]) -> Result<Self, InferenceError> {
        let mut map = BTreeMap::new();
        for (var, label) in pairs {
            let schema = net
                .schema(var)
                .map_err(|_| InferenceError::UnknownNode(var.to_string()))?;
            let index = schema.level_index(label).ok_or_else(|| {
                InferenceError::UnknownLevel {
                    variable: var.to_string(),
                    label: label.to_string(),
                }
            })?;
            map.insert(var.to_string(), index as usize);
        }
        Ok(Evidence { map })
    }

    /// Sets one observation by level index.
    pub fn set(&mut self, var: impl Into<String>, level: usize) {
        self.map.insert(var.into(), level);
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    pub fn get(&self, var: &str) -> Option<usize> {
        self.map.get(var).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&NodeId, usize)> {
        self.map.iter().map(|(v, &l)| (v, l))
    }

    fn validate(&self, net: &Network) -> Result<(), InferenceError> {
        for (var, level) in self.iter() {
            let schema = net
                .schema(var)
                .map_err(|_| InferenceError::UnknownNode(var.to_string()))?;
            if level >= schema.cardinality() {
                return Err(InferenceError::LevelOutOfRange {
                    variable: var.clone(),
                    index: level,
                    r: schema.cardinality(),
                });
            }
        }
        Ok(())
    }
}

/// A nonnegative table over a list of variables. Values are stored
/// mixed-radix with the first scope variable most significant.
#[derive(Debug, Clone, PartialEq)]
pub struct Factor {
    scope: Vec<NodeId>,
    cards: Vec<usize>,
    values: Vec<f64>,
}

impl Factor {
    pub fn new(
        scope: Vec<NodeId>,
        cards: Vec<usize>,
        values: Vec<f64>,
    ) -> Result<Self, InferenceError> {
        if scope.len() != cards.len() {
            return Err(InferenceError::Shape(format!(
                "{} scope variables but {} cardinalities",
                scope.len(),
                cards.len()
            )));
        }
        let mut seen = BTreeSet::new();
        for var in &scope {
            if !seen.insert(var) {
                return Err(InferenceError::Shape(format!("`{var}` in scope twice")));
            }
        }
        if cards.contains(&0) {
            return Err(InferenceError::Shape("zero cardinality".to_string()));
        }
        let cells: usize = cards.iter().product();
        if values.len() != cells {
            return Err(InferenceError::Shape(format!(
                "{} values for {cells} cells",
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(InferenceError::Shape(
                "values must be finite and nonnegative".to_string(),
            ));
        }
        Ok(Factor { scope, cards, values })
    }

    pub fn scope(&self) -> &[NodeId] {
        &self.scope
    }

    pub fn cards(&self) -> &[usize] {
        &self.cards
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Value at an assignment given as one level per scope variable.
    pub fn value(&self, levels: &[usize]) -> f64 {
        assert_eq!(levels.len(), self.scope.len(), "one level per variable");
        let mut idx = 0usize;
        for (pos, &level) in levels.iter().enumerate() {
            assert!(level < self.cards[pos], "level within cardinality");
            idx = idx * self.cards[pos] + level;
        }
        self.values[idx]
    }

    fn decode(&self, mut idx: usize) -> Vec<usize> {
        let mut levels = vec![0usize; self.cards.len()];
        for pos in (0..self.cards.len()).rev() {
            levels[pos] = idx % self.cards[pos];
            idx /= self.cards[pos];
        }
        levels
    }

    fn position(&self, var: &str) -> Option<usize> {
        self.scope.iter().position(|v| v == var)
    }

    /// Pointwise product; the result's scope is the sorted union.
    pub fn product(&self, other: &Factor) -> Factor {
        let mut scope: Vec<NodeId> = self.scope.iter().chain(&other.scope).cloned().collect();
        scope.sort();
        scope.dedup();
        let cards: Vec<usize> = scope
            .iter()
            .map(|v| {
                self.position(v)
                    .map(|p| self.cards[p])
                    .or_else(|| other.position(v).map(|p| other.cards[p]))
                    .expect("var from one of the scopes")
            })
            .collect();
        let a_pos: Vec<Option<usize>> = scope.iter().map(|v| self.position(v)).collect();
        let b_pos: Vec<Option<usize>> = scope.iter().map(|v| other.position(v)).collect();

        let cells: usize = cards.iter().product();
        let mut values = Vec::with_capacity(cells);
        let mut levels = vec![0usize; scope.len()];
        for _ in 0..cells {
            let mut a_idx = 0usize;
            for (pos, &card) in self.cards.iter().enumerate() {
                let res_pos = a_pos.iter().position(|p| *p == Some(pos)).expect("subset");
                a_idx = a_idx * card + levels[res_pos];
            }
            let mut b_idx = 0usize;
            for (pos, &card) in other.cards.iter().enumerate() {
                let res_pos = b_pos.iter().position(|p| *p == Some(pos)).expect("subset");
                b_idx = b_idx * card + levels[res_pos];
            }
            values.push(self.values[a_idx] * other.values[b_idx]);
            increment(&mut levels, &cards);
        }
        Factor { scope, cards, values }
    }

    /// Sums a variable out of the table.
    pub fn sum_out(&self, var: &str) -> Result<Factor, InferenceError> {
        let pos = self
            .position(var)
            .ok_or_else(|| InferenceError::UnknownNode(var.to_string()))?;
        let mut scope = self.scope.clone();
        scope.remove(pos);
        let mut cards = self.cards.clone();
        cards.remove(pos);
        let cells: usize = cards.iter().product::<usize>().max(1);
        let mut values = vec![0.0; cells];
        for (idx, &v) in self.values.iter().enumerate() {
            let mut levels = self.decode(idx);
            levels.remove(pos);
            let mut out_idx = 0usize;
            for (p, &card) in cards.iter().enumerate() {
                out_idx = out_idx * card + levels[p];
            }
            values[out_idx] += v;
        }
        Ok(Factor { scope, cards, values })
    }

    /// Fixes a variable to one level and drops it from the scope.
    pub fn reduce(&self, var: &str, level: usize) -> Result<Factor, InferenceError> {
        let pos = self
            .position(var)
            .ok_or_else(|| InferenceError::UnknownNode(var.to_string()))?;
        if level >= self.cards[pos] {
            return Err(InferenceError::LevelOutOfRange {
                variable: var.to_string(),
                index: level,
                r: self.cards[pos],
            });
        }
        let mut scope = self.scope.clone();
        scope.remove(pos);
        let mut cards = self.cards.clone();
        cards.remove(pos);
        let mut values = Vec::with_capacity(self.values.len() / self.cards[pos]);
        for (idx, &v) in self.values.iter().enumerate() {
            if self.decode(idx)[pos] == level {
                values.push(v);
            }
        }
        Ok(Factor { scope, cards, values })
    }

    /// Scales the table to sum to one.
    pub fn normalize(&self) -> Result<Factor, InferenceError> {
        let total: f64 = self.values.iter().sum();
        if total <= 0.0 {
            return Err(InferenceError::ZeroProbabilityEvidence);
        }
        let values = self.values.iter().map(|v| v / total).collect();
        Ok(Factor {
            scope: self.scope.clone(),
            cards: self.cards.clone(),
            values,
        })
    }

    /// Reorders the scope (a permutation of the current one), permuting
    /// the table to match.
    pub fn reorder(&self, order: &[&str]) -> Result<Factor, InferenceError> {
        if order.len() != self.scope.len() {
            return Err(InferenceError::Shape(format!(
                "reorder lists {} variables, scope has {}",
                order.len(),
                self.scope.len()
            )));
        }
        let positions: Vec<usize> = order
            .iter()
            .map(|v| {
                self.position(v)
                    .ok_or_else(|| InferenceError::UnknownNode(v.to_string()))
            })
            .collect::<Result<_, _>>()?;
        let mut seen = BTreeSet::new();
        for &p in &positions {
            if !seen.insert(p) {
                return Err(InferenceError::DuplicateTarget(order[p].to_string()));
            }
        }
        let scope: Vec<NodeId> = positions.iter().map(|&p| self.scope[p].clone()).collect();
        let cards: Vec<usize> = positions.iter().map(|&p| self.cards[p]).collect();
        let cells = self.values.len();
        let mut values = vec![0.0; cells];
        let mut new_levels = vec![0usize; scope.len()];
        for _ in 0..cells {
            let mut new_idx = 0usize;
            let mut old_levels = vec![0usize; scope.len()];
            for (pos, &card) in cards.iter().enumerate() {
                new_idx = new_idx * card + new_levels[pos];
                old_levels[positions[pos]] = new_levels[pos];
            }
            let mut old_idx = 0usize;
            for (pos, &card) in self.cards.iter().enumerate() {
                old_idx = old_idx * card + old_levels[pos];
            }
            values[new_idx] = self.values[old_idx];
            increment(&mut new_levels, &cards);
        }
        Ok(Factor { scope, cards, values })
    }

    /// The CPT of `node` as a factor, scope sorted.
    pub fn from_cpt(net: &Network, node: &str) -> Result<Factor, InferenceError> {
        let cpt = net.cpt(node)?;
        let mut scope: Vec<NodeId> = cpt.parents.clone();
        scope.push(cpt.child.clone());
        let cards: Vec<usize> = scope
            .iter()
            .map(|v| net.schema(v).map(|s| s.cardinality()))
            .collect::<Result<_, _>>()?;
        // The flat CPT is already mixed-radix over [parents..., child]
        // with the child least significant.
        let natural = Factor::new(scope, cards, cpt.values().to_vec())?;
        let mut sorted: Vec<&str> = natural.scope.iter().map(String::as_str).collect();
        sorted.sort();
        let sorted: Vec<String> = sorted.into_iter().map(String::from).collect();
        let refs: Vec<&str> = sorted.iter().map(String::as_str).collect();
        natural.reorder(&refs)
    }
}

/// Advances a mixed-radix counter (last digit fastest); wraps at the end.
fn increment(levels: &mut [usize], cards: &[usize]) {
    for pos in (0..levels.len()).rev() {
        levels[pos] += 1;
        if levels[pos] < cards[pos] {
            return;
        }
        levels[pos] = 0;
    }
}

/// The full joint distribution, computed cell by cell from the chain
/// rule. Scope is all variables in lexicographic order. Networks whose
/// joint exceeds 2^22 cells are refused.
pub fn full_joint(net: &Network) -> Result<Factor, InferenceError> {
    let scope: Vec<NodeId> = net.schemas().iter().map(|s| s.code.clone()).collect();
    let cards: Vec<usize> = net.schemas().iter().map(|s| s.cardinality()).collect();
    let mut cells: u128 = 1;
    for &card in &cards {
        cells *= card as u128;
    }
    if cells > JOINT_CELL_LIMIT as u128 {
        return Err(InferenceError::StateSpaceTooLarge {
            cells,
            limit: JOINT_CELL_LIMIT,
        });
    }
    let cells = cells as usize;

    // Per node: its position, its parents' positions, and its CPT.
    struct NodePlan<'a> {
        child_pos: usize,
        parent_pos: Vec<usize>,
        parent_cards: Vec<usize>,
        cpt: &'a crate::params::Cpt,
    }
    let position = |var: &str| scope.iter().position(|v| v == var).expect("own schema");
    let plans: Vec<NodePlan> = scope
        .iter()
        .map(|node| {
            let cpt = net.cpt(node)?;
            Ok(NodePlan {
                child_pos: position(node),
                parent_pos: cpt.parents.iter().map(|p| position(p)).collect(),
                parent_cards: cpt
                    .parents
                    .iter()
                    .map(|p| net.schema(p).map(|s| s.cardinality()))
                    .collect::<Result<_, ParamError>>()?,
                cpt,
            })
        })
        .collect::<Result<_, InferenceError>>()?;

    let mut values = Vec::with_capacity(cells);
    let mut levels = vec![0usize; scope.len()];
    for _ in 0..cells {
        let mut p = 1.0;
        for plan in &plans {
            let mut j = 0usize;
            for (&pos, &card) in plan.parent_pos.iter().zip(&plan.parent_cards) {
                j = j * card + levels[pos];
            }
            p *= plan.cpt.p(j, levels[plan.child_pos]);
        }
        values.push(p);
        increment(&mut levels, &cards);
    }
    Factor::new(scope, cards, values)
}

/// Answers `P(targets | evidence)` exactly by variable elimination.
///
/// The returned factor's scope is `targets` in the order given, and its
/// values sum to one. Evidence with probability zero is an error, not a
/// table of NaNs.
pub fn query(net: &Network, targets: &[&str], evidence: &Evidence) -> Result<Factor, InferenceError> {
    if targets.is_empty() {
        return Err(InferenceError::EmptyTargets);
    }
    let mut target_set = BTreeSet::new();
    for t in targets {
        net.schema(t)
            .map_err(|_| InferenceError::UnknownNode(t.to_string()))?;
        if !target_set.insert(t.to_string()) {
            return Err(InferenceError::DuplicateTarget(t.to_string()));
        }
        if evidence.get(t).is_some() {
            return Err(InferenceError::Overlap(t.to_string()));
        }
    }
    evidence.validate(net)?;

    // One factor per node, with evidence folded in immediately.
    let mut factors: Vec<Factor> = Vec::new();
    for schema in net.schemas() {
        let mut factor = Factor::from_cpt(net, &schema.code)?;
        for (var, level) in evidence.iter() {
            if factor.position(var).is_some() {
                factor = factor.reduce(var, level)?;
            }
        }
        factors.push(factor);
    }

    // Eliminate everything that is neither target nor evidence, always
    // picking the variable with the fewest interaction-graph neighbours
    // (ties broken lexicographically).
    let mut to_eliminate: BTreeSet<NodeId> = net
        .schemas()
        .iter()
        .map(|s| s.code.clone())
        .filter(|v| !target_set.contains(v) && evidence.get(v).is_none())
        .collect();
    while !to_eliminate.is_empty() {
        let degree_of = |var: &NodeId| {
            let mut neighbours: BTreeSet<&NodeId> = BTreeSet::new();
            for f in &factors {
                if f.position(var).is_some() {
                    neighbours.extend(f.scope.iter());
                }
            }
            neighbours.remove(var);
            neighbours.len()
        };
        let var = to_eliminate
            .iter()
            .min_by_key(|v| (degree_of(v), (*v).clone()))
            .expect("nonempty")
            .clone();
        to_eliminate.remove(&var);

        let (involved, rest): (Vec<Factor>, Vec<Factor>) = factors
            .into_iter()
            .partition(|f| f.position(&var).is_some());
        factors = rest;
        let product = involved
            .into_iter()
            .reduce(|a, b| a.product(&b))
            .expect("the variable's own cpt factor mentions it");
        factors.push(product.sum_out(&var)?);
    }

    let joint_over_targets = factors
        .into_iter()
        .reduce(|a, b| a.product(&b))
        .expect("at least one target factor remains");
    joint_over_targets.normalize()?.reorder(targets)
}

/// Marginal distribution of each listed variable, with no evidence.
pub fn marginals(net: &Network, vars: &[&str]) -> Result<Vec<Factor>, InferenceError> {
    vars.iter()
        .map(|v| query(net, &[v], &Evidence::empty()))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::VariableSchema;
    use crate::graph::Dag;
    use crate::params::{Cpt, Network};

    /// A -> B with P(A=1) = 0.3, P(B=1|A=0) = 0.2, P(B=1|A=1) = 0.9.
    fn two_node_net() -> Network {
        let mut dag = Dag::new(["A", "B"]).unwrap();
        dag.add_arc("A", "B").unwrap();
        let schemas = vec![
            VariableSchema::new("A", "A", ["0", "1"]).unwrap(),
            VariableSchema::new("B", "B", ["0", "1"]).unwrap(),
        ];
        let cpts = vec![
            Cpt::new("A", vec![], 2, 1, vec![0.7, 0.3]).unwrap(),
            Cpt::new("B", vec!["A".into()], 2, 2, vec![0.8, 0.2, 0.1, 0.9]).unwrap(),
        ];
        Network::new(dag, schemas, cpts).unwrap()
    }

    #[test]
    fn full_joint_of_the_two_node_network() {
        let joint = full_joint(&two_node_net()).unwrap();
        assert_eq!(joint.scope(), &["A", "B"]);
        let expected = [0.7 * 0.8, 0.7 * 0.2, 0.3 * 0.1, 0.3 * 0.9];
        for (got, want) in joint.values().iter().zip(expected) {
            assert!((got - want).abs() < 1e-15);
        }
    }

    #[test]
    fn conditional_query_matches_hand_computation() {
        let net = two_node_net();
        let evidence = Evidence::from_labels(&net, &[("B", "1")]).unwrap();
        let posterior = query(&net, &["A"], &evidence).unwrap();
        // P(A=1 | B=1) = 0.27 / 0.41.
        assert!((posterior.value(&[1]) - 0.27 / 0.41).abs() < 1e-12);
        assert!((posterior.values().iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn query_validates_targets_and_evidence() {
        let net = two_node_net();
        let ev = Evidence::from_labels(&net, &[("B", "1")]).unwrap();
        assert!(matches!(
            query(&net, &[], &ev),
            Err(InferenceError::EmptyTargets)
        ));
        assert!(matches!(
            query(&net, &["B"], &ev),
            Err(InferenceError::Overlap(v)) if v == "B"
        ));
        assert!(matches!(
            query(&net, &["A", "A"], &ev),
            Err(InferenceError::DuplicateTarget(_))
        ));
        assert!(matches!(
            query(&net, &["Z"], &ev),
            Err(InferenceError::UnknownNode(_))
        ));
        assert!(matches!(
            Evidence::from_labels(&net, &[("B", "7")]),
            Err(InferenceError::UnknownLevel { .. })
        ));
    }

    #[test]
    fn impossible_evidence_is_an_error() {
        let mut dag = Dag::new(["A", "B"]).unwrap();
        dag.add_arc("A", "B").unwrap();
        let schemas = vec![
            VariableSchema::new("A", "A", ["0", "1"]).unwrap(),
            VariableSchema::new("B", "B", ["0", "1"]).unwrap(),
        ];
        // B is never 1, whatever A is.
        let cpts = vec![
            Cpt::new("A", vec![], 2, 1, vec![0.5, 0.5]).unwrap(),
            Cpt::new("B", vec!["A".into()], 2, 2, vec![1.0, 0.0, 1.0, 0.0]).unwrap(),
        ];
        let net = Network::new(dag, schemas, cpts).unwrap();
        let ev = Evidence::from_labels(&net, &[("B", "1")]).unwrap();
        assert!(matches!(
            query(&net, &["A"], &ev),
            Err(InferenceError::ZeroProbabilityEvidence)
        ));
    }

    #[test]
    fn factor_product_aligns_shared_variables() {
        let f = Factor::new(vec!["A".into()], vec![2], vec![0.25, 0.75]).unwrap();
        let g = Factor::new(
            vec!["A".into(), "B".into()],
            vec![2, 3],
            vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0],
        )
        .unwrap();
        let p = f.product(&g);
        assert_eq!(p.scope(), &["A", "B"]);
        assert_eq!(p.values(), &[0.25, 0.5, 0.75, 3.0, 3.75, 4.5]);
    }

    #[test]
    fn sum_out_reduce_and_reorder() {
        let f = Factor::new(
            vec!["A".into(), "B".into()],
            vec![2, 3],
            vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0],
        )
        .unwrap();
        let summed = f.sum_out("A").unwrap();
        assert_eq!(summed.scope(), &["B"]);
        assert_eq!(summed.values(), &[5.0, 7.0, 9.0]);

        let reduced = f.reduce("B", 2).unwrap();
        assert_eq!(reduced.scope(), &["A"]);
        assert_eq!(reduced.values(), &[3.0, 6.0]);

        let flipped = f.reorder(&["B", "A"]).unwrap();
        assert_eq!(flipped.scope(), &["B", "A"]);
        assert_eq!(flipped.value(&[2, 1]), f.value(&[1, 2]));
        assert_eq!(flipped.values(), &[1.0, 4.0, 2.0, 5.0, 3.0, 6.0]);
    }

    #[test]
    fn marginals_match_the_joint() {
        let net = two_node_net();
        let m = marginals(&net, &["B", "A"]).unwrap();
        assert_eq!(m[0].scope(), &["B"]);
        // P(B=1) = 0.7·0.2 + 0.3·0.9 = 0.41.
        assert!((m[0].value(&[1]) - 0.41).abs() < 1e-12);
        assert!((m[1].value(&[1]) - 0.3).abs() < 1e-12);
    }
}
