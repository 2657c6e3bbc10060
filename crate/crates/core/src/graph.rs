//! Directed acyclic graphs over variable codes.
//!
//! Nodes are identified by short string codes ("A", "BB", "Tt"). Every
//! operation that iterates nodes, parents, or arcs does so in
//! case-sensitive lexicographic order, so output is deterministic and
//! ties in the topological order are broken the same way on every run.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

/// A variable code. Codes are compared byte-wise, which for the short
/// ASCII codes used here is case-sensitive lexicographic order.
pub type NodeId = String;

/// A usable variable code: nonempty, no whitespace, and none of the
/// characters that carry meaning in model strings.
pub(crate) fn valid_code(code: &str) -> bool {
    !code.is_empty()
        && code
            .chars()
            .all(|c| !c.is_whitespace() && !matches!(c, '[' | ']' | '|' | ':'))
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum GraphError {
    #[error("unknown node `{0}`")]
    UnknownNode(String),
    #[error("node `{0}` declared more than once")]
    DuplicateNode(String),
    #[error("arc {from} -> {to} already present")]
    DuplicateArc { from: String, to: String },
    #[error("arc {from} -> {to} would create a cycle")]
    Cycle { from: String, to: String },
    #[error("model string syntax error: {0}")]
    Syntax(String),
    #[error("graphs are over different node sets")]
    NodeSetMismatch,
    #[error("node `{0}` appears in more than one of the sets x, y, z")]
    Overlap(String),
    #[error("set `{0}` must not be empty")]
    EmptySet(&'static str),
}

/// Structural statistics of a DAG, as reported after learning.
///
/// Averages are kept at full precision; reports round them to two
/// decimals when printing.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphSummary {
    pub nodes: usize,
    pub arcs: usize,
    pub avg_markov_blanket: f64,
    pub avg_neighbourhood: f64,
    pub avg_branching: f64,
}

/// A directed acyclic graph stored as parent sets.
///
/// The node set is fixed at construction; arcs are added, removed, or
/// reversed afterwards, and every mutation re-checks acyclicity so the
/// invariant cannot be broken through the public API.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dag {
    parents: BTreeMap<NodeId, BTreeSet<NodeId>>,
}

impl Dag {
    /// Creates a graph over the given nodes with no arcs.
    pub fn new<I, S>(nodes: I) -> Result<Self, GraphError>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut parents = BTreeMap::new();
        for node in nodes {
            let code = node.as_ref().to_string();
            if parents.insert(code.clone(), BTreeSet::new()).is_some() {
                return Err(GraphError::DuplicateNode(code));
            }
        }
        Ok(Dag { parents })
    }

    pub fn node_count(&self) -> usize {
        self.parents.len()
    }

    pub fn arc_count(&self) -> usize {
        self.parents.values().map(|p| p.len()).sum()
    }

    pub fn contains_node(&self, node: &str) -> bool {
        self.parents.contains_key(node)
    }

    /// Nodes in lexicographic order.
    pub fn nodes(&self) -> impl Iterator<Item = &NodeId> {
        self.parents.keys()
    }

    /// Arcs as (from, to) pairs, sorted lexicographically.
    pub fn arcs(&self) -> Vec<(NodeId, NodeId)> {
        let mut arcs: Vec<(NodeId, NodeId)> = self
            .parents
            .iter()
            .flat_map(|(child, ps)| ps.iter().map(move |p| (p.clone(), child.clone())))
            .collect();
        arcs.sort();
        arcs
    }

    pub fn has_arc(&self, from: &str, to: &str) -> bool {
        self.parents.get(to).is_some_and(|ps| ps.contains(from))
    }

    /// Parents of `node`, in lexicographic order.
    pub fn parents(&self, node: &str) -> Result<&BTreeSet<NodeId>, GraphError> {
        self.parents
            .get(node)
            .ok_or_else(|| GraphError::UnknownNode(node.to_string()))
    }

    /// Children of `node`, in lexicographic order.
    pub fn children(&self, node: &str) -> Result<BTreeSet<NodeId>, GraphError> {
        if !self.contains_node(node) {
            return Err(GraphError::UnknownNode(node.to_string()));
        }
        Ok(self
            .parents
            .iter()
            .filter(|(_, ps)| ps.contains(node))
            .map(|(child, _)| child.clone())
            .collect())
    }

    fn check_node(&self, node: &str) -> Result<(), GraphError> {
        if self.contains_node(node) {
            Ok(())
        } else {
            Err(GraphError::UnknownNode(node.to_string()))
        }
    }

    /// True if a directed path `from -> ... -> to` exists (including the
    /// trivial path when `from == to`).
    pub fn has_path(&self, from: &str, to: &str) -> bool {
        if from == to {
            return true;
        }
        // Walk child edges depth-first from `from`.
        let mut stack = vec![from];
        let mut seen: BTreeSet<&str> = BTreeSet::new();
        while let Some(v) = stack.pop() {
            for (child, ps) in &self.parents {
                if ps.contains(v) && seen.insert(child) {
                    if child == to {
                        return true;
                    }
                    stack.push(child);
                }
            }
        }
        false
    }

    /// Adds the arc `from -> to`, rejecting duplicates and cycles.
    pub fn add_arc(&mut self, from: &str, to: &str) -> Result<(), GraphError> {
        self.check_node(from)?;
        self.check_node(to)?;
        if self.has_arc(from, to) {
            return Err(GraphError::DuplicateArc {
                from: from.to_string(),
                to: to.to_string(),
            });
        }
        // `from == to` is caught here too: has_path(v, v) is true.
        if self.has_path(to, from) {
            return Err(GraphError::Cycle {
                from: from.to_string(),
                to: to.to_string(),
            });
        }
        self.parents
            .get_mut(to)
            .expect("checked above")
            .insert(from.to_string());
        Ok(())
    }

    /// Removes the arc `from -> to`.
    pub fn remove_arc(&mut self, from: &str, to: &str) -> Result<(), GraphError> {
        self.check_node(from)?;
        self.check_node(to)?;
        if !self.parents.get_mut(to).expect("checked above").remove(from) {
            return Err(GraphError::UnknownNode(format!("arc {from} -> {to}")));
        }
        Ok(())
    }

    /// Replaces `from -> to` with `to -> from`, rejecting the move if the
    /// reversed arc would close a cycle through some other path.
    pub fn reverse_arc(&mut self, from: &str, to: &str) -> Result<(), GraphError> {
        if !self.has_arc(from, to) {
            return Err(GraphError::UnknownNode(format!("arc {from} -> {to}")));
        }
        self.parents.get_mut(to).expect("arc exists").remove(from);
        if self.has_path(from, to) {
            // Some other directed path from -> ... -> to remains; restore.
            self.parents
                .get_mut(to)
                .expect("arc existed")
                .insert(from.to_string());
            return Err(GraphError::Cycle {
                from: to.to_string(),
                to: from.to_string(),
            });
        }
        self.parents
            .get_mut(from)
            .expect("arc exists")
            .insert(to.to_string());
        Ok(())
    }

    /// Nodes in topological order, ties broken lexicographically.
    ///
    /// This is Kahn's algorithm with an ordered frontier, so among all
    /// valid topological orders it returns the lexicographically first.
    pub fn topological_order(&self) -> Vec<NodeId> {
        let mut remaining: BTreeMap<&NodeId, usize> = self
            .parents
            .iter()
            .map(|(node, ps)| (node, ps.len()))
            .collect();
        let mut ready: BTreeSet<&NodeId> = remaining
            .iter()
            .filter(|(_, deg)| **deg == 0)
            .map(|(node, _)| *node)
            .collect();
        let mut order = Vec::with_capacity(self.parents.len());
        while let Some(next) = ready.iter().next().cloned() {
            ready.remove(next);
            remaining.remove(next);
            order.push(next.clone());
            for (child, ps) in &self.parents {
                if ps.contains(next) {
                    let deg = remaining.get_mut(child).expect("child not yet emitted");
                    *deg -= 1;
                    if *deg == 0 {
                        ready.insert(child);
                    }
                }
            }
        }
        debug_assert_eq!(order.len(), self.parents.len(), "graph is acyclic");
        order
    }

    /// Undirected skeleton: each arc as an unordered pair (min, max).
    pub fn skeleton(&self) -> BTreeSet<(NodeId, NodeId)> {
        self.arcs()
            .into_iter()
            .map(|(a, b)| if a <= b { (a, b) } else { (b, a) })
            .collect()
    }

    /// V-structures (immoralities) as (parent, parent, child) triples with
    /// the parents ordered lexicographically. A parent pair counts only
    /// when no arc joins the parents in either direction.
    pub fn v_structures(&self) -> BTreeSet<(NodeId, NodeId, NodeId)> {
        let mut out = BTreeSet::new();
        for (child, ps) in &self.parents {
            let ps: Vec<&NodeId> = ps.iter().collect();
            for i in 0..ps.len() {
                for j in (i + 1)..ps.len() {
                    let (a, b) = (ps[i], ps[j]);
                    if !self.has_arc(a, b) && !self.has_arc(b, a) {
                        out.insert((a.clone(), b.clone(), child.clone()));
                    }
                }
            }
        }
        out
    }

    /// True if the two graphs represent the same set of conditional
    /// independencies: same skeleton and same v-structures.
    pub fn equivalent(&self, other: &Dag) -> Result<bool, GraphError> {
        let mine: Vec<&NodeId> = self.nodes().collect();
        let theirs: Vec<&NodeId> = other.nodes().collect();
        if mine != theirs {
            return Err(GraphError::NodeSetMismatch);
        }
        Ok(self.skeleton() == other.skeleton() && self.v_structures() == other.v_structures())
    }

    /// The Markov blanket of `node`: its parents, its children, and the
    /// other parents of its children.
    pub fn markov_blanket(&self, node: &str) -> Result<BTreeSet<NodeId>, GraphError> {
        let mut blanket = self.parents(node)?.clone();
        for child in self.children(node)? {
            blanket.extend(self.parents(&child)?.iter().cloned());
            blanket.insert(child);
        }
        blanket.remove(node);
        Ok(blanket)
    }

    fn validate_disjoint_sets(
        &self,
        x: &BTreeSet<NodeId>,
        y: &BTreeSet<NodeId>,
        z: &BTreeSet<NodeId>,
    ) -> Result<(), GraphError> {
        for node in x.iter().chain(y).chain(z) {
            self.check_node(node)?;
        }
        for node in x {
            if y.contains(node) || z.contains(node) {
                return Err(GraphError::Overlap(node.clone()));
            }
        }
        for node in y {
            if z.contains(node) {
                return Err(GraphError::Overlap(node.clone()));
            }
        }
        Ok(())
    }

    /// Ancestors of every node in `seed`, including the seed nodes.
    fn ancestral_set(&self, seed: &BTreeSet<NodeId>) -> BTreeSet<NodeId> {
        let mut closed = seed.clone();
        let mut stack: Vec<NodeId> = seed.iter().cloned().collect();
        while let Some(v) = stack.pop() {
            for p in self.parents.get(&v).expect("validated") {
                if closed.insert(p.clone()) {
                    stack.push(p.clone());
                }
            }
        }
        closed
    }

    /// Tests whether `z` d-separates `x` from `y`.
    ///
    /// Reachability is decided on the moralized ancestral graph: restrict
    /// to the ancestors of `x ∪ y ∪ z`, marry co-parents, drop arc
    /// directions, delete `z`, and look for a path from `x` to `y`. A
    /// collider is traversable exactly when it or one of its descendants
    /// is conditioned on, which is what the marriage step encodes.
    pub fn d_separated(&self, x: &[&str], y: &[&str], z: &[&str]) -> Result<bool, GraphError> {
        if x.is_empty() {
            return Err(GraphError::EmptySet("x"));
        }
        if y.is_empty() {
            return Err(GraphError::EmptySet("y"));
        }
        let x: BTreeSet<NodeId> = x.iter().map(|s| s.to_string()).collect();
        let y: BTreeSet<NodeId> = y.iter().map(|s| s.to_string()).collect();
        let z: BTreeSet<NodeId> = z.iter().map(|s| s.to_string()).collect();
        self.validate_disjoint_sets(&x, &y, &z)?;

        let mut seed = x.clone();
        seed.extend(y.iter().cloned());
        seed.extend(z.iter().cloned());
        let ancestral = self.ancestral_set(&seed);

        // Moral graph on the ancestral set. Parents of an ancestral node
        // are themselves ancestral, so no membership filtering is needed.
        let mut adj: BTreeMap<&NodeId, BTreeSet<&NodeId>> =
            ancestral.iter().map(|v| (v, BTreeSet::new())).collect();
        for v in &ancestral {
            let ps: Vec<&NodeId> = self.parents.get(v).expect("validated").iter().collect();
            for p in &ps {
                adj.get_mut(v).expect("ancestral").insert(p);
                adj.get_mut(p).expect("parents of ancestral are ancestral")
                    .insert(v);
            }
            for i in 0..ps.len() {
                for j in (i + 1)..ps.len() {
                    adj.get_mut(ps[i]).expect("ancestral").insert(ps[j]);
                    adj.get_mut(ps[j]).expect("ancestral").insert(ps[i]);
                }
            }
        }

        // Breadth-first search from x, never entering z.
        let mut queue: Vec<&NodeId> = x.iter().collect();
        let mut seen: BTreeSet<&NodeId> = x.iter().collect();
        while let Some(v) = queue.pop() {
            if y.contains(v) {
                return Ok(false);
            }
            for w in &adj[v] {
                if !z.contains(*w) && seen.insert(w) {
                    queue.push(w);
                }
            }
        }
        Ok(true)
    }

    /// Structural statistics: node and arc counts plus the average Markov
    /// blanket size, average neighbourhood (skeleton degree), and average
    /// branching factor (arcs per node).
    pub fn summary(&self) -> GraphSummary {
        let nodes = self.node_count();
        let arcs = self.arc_count();
        if nodes == 0 {
            return GraphSummary {
                nodes,
                arcs,
                avg_markov_blanket: 0.0,
                avg_neighbourhood: 0.0,
                avg_branching: 0.0,
            };
        }
        let mb_total: usize = self
            .nodes()
            .map(|v| self.markov_blanket(v).expect("node exists").len())
            .sum();
        GraphSummary {
            nodes,
            arcs,
            avg_markov_blanket: mb_total as f64 / nodes as f64,
            avg_neighbourhood: 2.0 * arcs as f64 / nodes as f64,
            avg_branching: arcs as f64 / nodes as f64,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dag(nodes: &[&str], arcs: &[(&str, &str)]) -> Dag {
        let mut g = Dag::new(nodes.iter().copied()).unwrap();
        for (from, to) in arcs {
            g.add_arc(from, to).unwrap();
        }
        g
    }

    #[test]
    fn duplicate_nodes_rejected() {
        let err = Dag::new(["A", "B", "A"]).unwrap_err();
        assert_eq!(err, GraphError::DuplicateNode("A".into()));
    }

    #[test]
    fn add_arc_rejects_unknown_duplicate_and_cycle() {
        let mut g = dag(&["A", "B", "C"], &[("A", "B"), ("B", "C")]);
        assert_eq!(
            g.add_arc("A", "Q").unwrap_err(),
            GraphError::UnknownNode("Q".into())
        );
        assert_eq!(
            g.add_arc("A", "B").unwrap_err(),
            GraphError::DuplicateArc { from: "A".into(), to: "B".into() }
        );
        assert_eq!(
            g.add_arc("C", "A").unwrap_err(),
            GraphError::Cycle { from: "C".into(), to: "A".into() }
        );
        assert_eq!(
            g.add_arc("A", "A").unwrap_err(),
            GraphError::Cycle { from: "A".into(), to: "A".into() }
        );
        // The failed attempts must not have left partial state behind.
        assert_eq!(g.arc_count(), 2);
    }

    #[test]
    fn reverse_arc_keeps_graph_acyclic() {
        // A -> B, A -> C -> B: reversing A -> B would close A -> C -> B -> A.
        let mut g = dag(&["A", "B", "C"], &[("A", "B"), ("A", "C"), ("C", "B")]);
        assert_eq!(
            g.reverse_arc("A", "B").unwrap_err(),
            GraphError::Cycle { from: "B".into(), to: "A".into() }
        );
        assert!(g.has_arc("A", "B"), "failed reversal must restore the arc");

        g.reverse_arc("C", "B").unwrap();
        assert!(g.has_arc("B", "C") && !g.has_arc("C", "B"));
    }

    #[test]
    fn topological_order_breaks_ties_lexicographically() {
        let g = dag(&["D", "C", "B", "A"], &[("D", "A"), ("B", "A")]);
        assert_eq!(g.topological_order(), vec!["B", "C", "D", "A"]);
    }

    #[test]
    fn skeleton_and_v_structures() {
        // A -> C <- B with unmarried parents is the one v-structure.
        let g = dag(&["A", "B", "C"], &[("A", "C"), ("B", "C")]);
        let skel: Vec<(NodeId, NodeId)> = g.skeleton().into_iter().collect();
        assert_eq!(skel, vec![("A".into(), "C".into()), ("B".into(), "C".into())]);
        let vs: Vec<_> = g.v_structures().into_iter().collect();
        assert_eq!(vs, vec![("A".into(), "B".into(), "C".into())]);

        // Marrying the parents removes it.
        let g = dag(&["A", "B", "C"], &[("A", "C"), ("B", "C"), ("A", "B")]);
        assert!(g.v_structures().is_empty());
    }

    #[test]
    fn equivalence_matches_skeleton_and_colliders() {
        let chain = dag(&["A", "B", "C"], &[("A", "B"), ("B", "C")]);
        let reversed = dag(&["A", "B", "C"], &[("C", "B"), ("B", "A")]);
        let fork = dag(&["A", "B", "C"], &[("B", "A"), ("B", "C")]);
        let collider = dag(&["A", "B", "C"], &[("A", "B"), ("C", "B")]);
        assert!(chain.equivalent(&reversed).unwrap());
        assert!(chain.equivalent(&fork).unwrap());
        assert!(!chain.equivalent(&collider).unwrap());

        let other = dag(&["A", "B", "D"], &[]);
        assert_eq!(chain.equivalent(&other).unwrap_err(), GraphError::NodeSetMismatch);
    }

    #[test]
    fn d_separation_on_chain_fork_collider() {
        let chain = dag(&["A", "B", "C"], &[("A", "B"), ("B", "C")]);
        assert!(!chain.d_separated(&["A"], &["C"], &[]).unwrap());
        assert!(chain.d_separated(&["A"], &["C"], &["B"]).unwrap());

        let fork = dag(&["A", "B", "C"], &[("B", "A"), ("B", "C")]);
        assert!(!fork.d_separated(&["A"], &["C"], &[]).unwrap());
        assert!(fork.d_separated(&["A"], &["C"], &["B"]).unwrap());

        let collider = dag(&["A", "B", "C"], &[("A", "B"), ("C", "B")]);
        assert!(collider.d_separated(&["A"], &["C"], &[]).unwrap());
        assert!(!collider.d_separated(&["A"], &["C"], &["B"]).unwrap());
    }

    #[test]
    fn conditioning_on_collider_descendant_opens_the_path() {
        // A -> C <- B, C -> D: observing D activates the collider C.
        let g = dag(&["A", "B", "C", "D"], &[("A", "C"), ("B", "C"), ("C", "D")]);
        assert!(g.d_separated(&["A"], &["B"], &[]).unwrap());
        assert!(!g.d_separated(&["A"], &["B"], &["D"]).unwrap());
        assert!(!g.d_separated(&["A"], &["B"], &["C", "D"]).unwrap());
    }

    #[test]
    fn d_separation_validates_inputs() {
        let g = dag(&["A", "B", "C"], &[("A", "B")]);
        assert_eq!(
            g.d_separated(&[], &["B"], &[]).unwrap_err(),
            GraphError::EmptySet("x")
        );
        assert_eq!(
            g.d_separated(&["A"], &["B"], &["A"]).unwrap_err(),
            GraphError::Overlap("A".into())
        );
        assert_eq!(
            g.d_separated(&["A"], &["Q"], &[]).unwrap_err(),
            GraphError::UnknownNode("Q".into())
        );
    }

    #[test]
    fn markov_blanket_is_parents_children_and_coparents() {
        let g = dag(
            &["A", "B", "C", "D", "E", "F"],
            &[("A", "C"), ("B", "C"), ("C", "D"), ("E", "D"), ("E", "F")],
        );
        // C: parents {A, B}, child D, D's other parent E.
        let mb: Vec<NodeId> = g.markov_blanket("C").unwrap().into_iter().collect();
        assert_eq!(mb, vec!["A", "B", "D", "E"]);
        // F: parent E only.
        let mb: Vec<NodeId> = g.markov_blanket("F").unwrap().into_iter().collect();
        assert_eq!(mb, vec!["E"]);
    }

    #[test]
    fn summary_statistics_on_a_small_graph() {
        // A -> B <- C: every Markov blanket has two members, the skeleton
        // degrees are 1, 2, 1.
        let g = dag(&["A", "B", "C"], &[("A", "B"), ("C", "B")]);
        let s = g.summary();
        assert_eq!((s.nodes, s.arcs), (3, 2));
        assert!((s.avg_markov_blanket - 2.0).abs() < 1e-12);
        assert!((s.avg_neighbourhood - 4.0 / 3.0).abs() < 1e-12);
        assert!((s.avg_branching - 2.0 / 3.0).abs() < 1e-12);
    }
}
