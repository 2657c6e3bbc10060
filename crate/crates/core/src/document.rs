//! The JSON document a fitted network is saved as.
//!
//! The document mirrors the network exactly (schemas, arcs, CPT
//! tables) plus provenance: how the structure was learned, from how
//! many rows, under which constraints. Loading rebuilds a [`Network`]
//! through the same validation as hand construction, so a corrupted
//! file cannot produce an inconsistent network. Values are `f64` and
//! JSON numbers round-trip them exactly.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::VariableSchema;
use crate::graph::{Dag, GraphError};
use crate::params::{Cpt, Network, ParamError};
use crate::search::ArcConstraints;

pub const FORMAT: &str = "bnet-network";
pub const VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum DocumentError {
    #[error("not a network document: format is `{0}`, expected `{FORMAT}`")]
    WrongFormat(String),
    #[error("unsupported document version {0}, this build reads {VERSION}")]
    WrongVersion(u32),
    #[error("invalid schema in document: {0}")]
    BadSchema(String),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Param(#[from] ParamError),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchemaDoc {
    pub code: String,
    pub name: String,
    pub levels: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArcDoc {
    pub from: String,
    pub to: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CptDoc {
    pub child: String,
    pub parents: Vec<String>,
    pub levels: usize,
    pub parent_configs: usize,
    /// Flat table, parent configuration major, child level minor.
    pub values: Vec<f64>,
}

/// Where the network came from: learning settings and input shape.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct Provenance {
    /// Score the structure was learned under, e.g. "bic" or "bdeu".
    pub score: String,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub iss: Option<f64>,
    /// Training rows.
    pub n: u64,
    /// Digest of the blacklist/whitelist the search ran under.
    pub constraints_digest: String,
    pub tool_version: String,
    /// Parameter estimator, "mle" or "bayes".
    pub fit: String,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub fit_iss: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkDocument {
    pub format: String,
    pub version: u32,
    pub schemas: Vec<SchemaDoc>,
    pub arcs: Vec<ArcDoc>,
    pub cpts: Vec<CptDoc>,
    pub provenance: Provenance,
}

impl NetworkDocument {
    pub fn from_network(net: &Network, provenance: Provenance) -> Self {
        let schemas = net
            .schemas()
            .iter()
            .map(|s| SchemaDoc {
                code: s.code.clone(),
                name: s.name.clone(),
                levels: s.levels.clone(),
            })
            .collect();
        let arcs = net
            .dag()
            .arcs()
            .into_iter()
            .map(|(from, to)| ArcDoc { from, to })
            .collect();
        let cpts = net
            .schemas()
            .iter()
            .map(|s| {
                let cpt = net.cpt(&s.code).expect("network holds one cpt per node");
                CptDoc {
                    child: cpt.child.clone(),
                    parents: cpt.parents.clone(),
                    levels: cpt.r,
                    parent_configs: cpt.q,
                    values: cpt.values().to_vec(),
                }
            })
            .collect();
        NetworkDocument {
            format: FORMAT.to_string(),
            version: VERSION,
            schemas,
            arcs,
            cpts,
            provenance,
        }
    }

    /// Rebuilds the network, running the full consistency validation.
    pub fn to_network(&self) -> Result<Network, DocumentError> {
        if self.format != FORMAT {
            return Err(DocumentError::WrongFormat(self.format.clone()));
        }
        if self.version != VERSION {
            return Err(DocumentError::WrongVersion(self.version));
        }
        let schemas: Vec<VariableSchema> = self
            .schemas
            .iter()
            .map(|s| {
                VariableSchema::new(&s.code, &s.name, s.levels.iter().map(String::as_str))
                    .map_err(|e| DocumentError::BadSchema(e.to_string()))
            })
            .collect::<Result<_, _>>()?;
        let mut dag = Dag::new(schemas.iter().map(|s| s.code.clone()))?;
        for arc in &self.arcs {
            dag.add_arc(&arc.from, &arc.to)?;
        }
        let cpts: Vec<Cpt> = self
            .cpts
            .iter()
            .map(|c| {
                Cpt::new(
                    &c.child,
                    c.parents.clone(),
                    c.levels,
                    c.parent_configs,
                    c.values.clone(),
                )
            })
            .collect::<Result<_, ParamError>>()?;
        Ok(Network::new(dag, schemas, cpts)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("document serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, DocumentError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), DocumentError> {
        let mut text = self.to_json();
        text.push('\n');
        Ok(fs::write(path, text)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, DocumentError> {
        Self::from_json(&fs::read_to_string(path)?)
    }
}

/// FNV-1a digest of the constraint lists, stable across runs, for the
/// provenance block.
pub fn constraints_digest(constraints: &ArcConstraints) -> String {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    let mut eat = |bytes: &[u8]| {
        for &b in bytes {
            hash ^= b as u64;
            hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
        }
    };
    for (from, to) in constraints.blacklist() {
        eat(b"b ");
        eat(from.as_bytes());
        eat(b" ");
        eat(to.as_bytes());
        eat(b"\n");
    }
    for (from, to) in constraints.whitelist() {
        eat(b"w ");
        eat(from.as_bytes());
        eat(b" ");
        eat(to.as_bytes());
        eat(b"\n");
    }
    format!("{hash:016x}")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fixture() -> Network {
        let mut dag = Dag::new(["A", "B"]).unwrap();
        dag.add_arc("A", "B").unwrap();
        let schemas = vec![
            VariableSchema::new("A", "first", ["0", "1"]).unwrap(),
            VariableSchema::new("B", "second", ["x", "y", "z"]).unwrap(),
        ];
        let cpts = vec![
            Cpt::new("A", vec![], 2, 1, vec![0.7, 0.3]).unwrap(),
            Cpt::new(
                "B",
                vec!["A".into()],
                3,
                2,
                vec![0.2, 0.3, 0.5, 0.6, 0.3, 0.1],
            )
            .unwrap(),
        ];
        Network::new(dag, schemas, cpts).unwrap()
    }

    #[test]
    fn round_trips_through_json() {
        let net = fixture();
        let doc = NetworkDocument::from_network(
            &net,
            Provenance {
                score: "bic".into(),
                iss: None,
                n: 1234,
                constraints_digest: constraints_digest(&ArcConstraints::none()),
                tool_version: "0.1.0".into(),
                fit: "mle".into(),
                fit_iss: None,
            },
        );
        let parsed = NetworkDocument::from_json(&doc.to_json()).unwrap();
        assert_eq!(doc, parsed);
        let rebuilt = parsed.to_network().unwrap();
        assert_eq!(rebuilt.dag().arcs(), net.dag().arcs());
        assert_eq!(rebuilt.cpt("B").unwrap().values(), net.cpt("B").unwrap().values());
        assert_eq!(rebuilt.schemas(), net.schemas());
    }

    #[test]
    fn wrong_format_and_version_are_rejected() {
        let net = fixture();
        let mut doc = NetworkDocument::from_network(&net, Provenance::default());
        doc.format = "something-else".into();
        assert!(matches!(
            doc.to_network(),
            Err(DocumentError::WrongFormat(_))
        ));
        let mut doc = NetworkDocument::from_network(&net, Provenance::default());
        doc.version = 99;
        assert!(matches!(
            doc.to_network(),
            Err(DocumentError::WrongVersion(99))
        ));
    }

    #[test]
    fn inconsistent_documents_fail_validation() {
        let net = fixture();
        // An arc to a variable with no schema.
        let mut doc = NetworkDocument::from_network(&net, Provenance::default());
        doc.arcs.push(ArcDoc {
            from: "A".into(),
            to: "Q".into(),
        });
        assert!(matches!(doc.to_network(), Err(DocumentError::Graph(_))));

        // A CPT row that no longer sums to one.
        let mut doc = NetworkDocument::from_network(&net, Provenance::default());
        doc.cpts[0].values = vec![0.7, 0.7];
        assert!(matches!(doc.to_network(), Err(DocumentError::Param(_))));
    }

    #[test]
    fn digest_is_order_insensitive_and_content_sensitive() {
        let a = ArcConstraints::new(&[("A", "B"), ("C", "D")], &[("E", "F")]).unwrap();
        let b = ArcConstraints::new(&[("C", "D"), ("A", "B")], &[("E", "F")]).unwrap();
        assert_eq!(constraints_digest(&a), constraints_digest(&b));
        let c = ArcConstraints::new(&[("A", "B")], &[("E", "F")]).unwrap();
        assert_ne!(constraints_digest(&a), constraints_digest(&c));
        assert_eq!(constraints_digest(&ArcConstraints::none()).len(), 16);
    }
}
