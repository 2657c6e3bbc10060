//! Model-string and DOT serialization for [`Dag`].
//!
//! A model string lists one block per node: `[C]` for a root, or
//! `[C|P1:P2]` for a node with parents. Blocks may be separated by any
//! amount of whitespace, so strings wrapped across lines parse as-is.

use std::fmt::Write as _;

use crate::graph::{valid_code, Dag, GraphError};

impl Dag {
    /// Parses a model string such as `[A] [B|A] [C|A:B]`.
    ///
    /// Every node must be declared by exactly one block, every parent
    /// must be declared somewhere in the string, and the arcs must form
    /// a DAG. Block order does not matter.
    pub fn from_model_string(s: &str) -> Result<Self, GraphError> {
        let mut blocks: Vec<(String, Vec<String>)> = Vec::new();
        let mut rest = s.trim_start();
        while !rest.is_empty() {
            if !rest.starts_with('[') {
                return Err(GraphError::Syntax(format!(
                    "expected `[` at `{}`",
                    rest.chars().take(12).collect::<String>()
                )));
            }
            let Some(end) = rest.find(']') else {
                return Err(GraphError::Syntax("unterminated block".to_string()));
            };
            let body = &rest[1..end];
            let (node, parents) = match body.split_once('|') {
                None => (body, Vec::new()),
                Some((node, parents)) => (node, parents.split(':').collect()),
            };
            if !valid_code(node) {
                return Err(GraphError::Syntax(format!("invalid node code `{node}`")));
            }
            for p in &parents {
                if !valid_code(p) {
                    return Err(GraphError::Syntax(format!(
                        "invalid parent code `{p}` in block for `{node}`"
                    )));
                }
            }
            blocks.push((
                node.to_string(),
                parents.into_iter().map(str::to_string).collect(),
            ));
            rest = rest[end + 1..].trim_start();
        }
        if blocks.is_empty() {
            return Err(GraphError::Syntax("no blocks found".to_string()));
        }

        let mut dag = Dag::new(blocks.iter().map(|(node, _)| node.clone()))?;
        for (node, parents) in &blocks {
            for p in parents {
                dag.add_arc(p, node)?;
            }
        }
        Ok(dag)
    }

    /// Formats the graph as a model string: blocks in topological order
    /// (lexicographic tie-breaks), parents sorted lexicographically.
    pub fn to_model_string(&self) -> String {
        let mut out = String::new();
        for node in self.topological_order() {
            if !out.is_empty() {
                out.push(' ');
            }
            let parents = self.parents(&node).expect("node from own order");
            if parents.is_empty() {
                let _ = write!(out, "[{node}]");
            } else {
                let joined: Vec<&str> = parents.iter().map(String::as_str).collect();
                let _ = write!(out, "[{node}|{}]", joined.join(":"));
            }
        }
        out
    }

    /// Renders the graph in DOT format, nodes and arcs each in
    /// lexicographic order.
    pub fn to_dot(&self) -> String {
        let mut out = String::from("digraph bn {\n");
        for node in self.nodes() {
            let _ = writeln!(out, "  \"{node}\";");
        }
        for (from, to) in self.arcs() {
            let _ = writeln!(out, "  \"{from}\" -> \"{to}\";");
        }
        out.push_str("}\n");
        out
    }
}
