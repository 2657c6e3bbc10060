//! Categorical datasets with explicit level schemas.
//!
//! A [`Dataset`] is a rectangular table of level indices. Level order is
//! always taken from the schema, never from the order labels happen to
//! appear in a file, so two loads of the same data produce identical
//! indices. Missing cells are represented explicitly and tracked per
//! variable; the counting and scoring layers refuse incomplete data
//! rather than silently dropping rows.
//!
//! The preprocessing operations here are the ones survey extracts need
//! before structure learning: level merging, fusion of two variables
//! into one, cascade imputation of follow-up questions gated by a
//! screening question, discretization of numeric columns, and listwise
//! deletion. Each returns a new dataset and leaves its input untouched.

mod io;

pub use io::{
    apply_pipeline, format_schema_file, parse_pipeline, parse_schema_file, PipelineOp,
};

use std::collections::BTreeMap;

use thiserror::Error;

use crate::graph::{valid_code, NodeId};

#[derive(Debug, Error)]
pub enum DataError {
    #[error("unknown variable `{0}`")]
    UnknownVariable(String),
    #[error("variable `{0}` listed more than once")]
    DuplicateVariable(String),
    #[error("invalid variable code `{0}`")]
    InvalidCode(String),
    #[error("invalid schema for `{variable}`: {message}")]
    InvalidSchema { variable: String, message: String },
    #[error("unknown label `{label}` for variable `{variable}`{}", row_suffix(.row))]
    UnknownLabel {
        variable: String,
        label: String,
        row: Option<usize>,
    },
    #[error("column `{0}` not found in the input header")]
    MissingColumn(String),
    #[error("row {row} has {got} fields, expected {expected}")]
    RowWidth { row: usize, expected: usize, got: usize },
    #[error("row {row}, variable `{variable}`: level index {index} out of range (< {r})")]
    BadCell { row: usize, variable: String, index: u32, r: usize },
    #[error("mapping for `{variable}` does not cover label `{label}`")]
    PartialMapping { variable: String, label: String },
    #[error("mapping for `{variable}` lists label `{label}` twice")]
    DuplicateMapping { variable: String, label: String },
    #[error("variable code `{0}` already in use")]
    CodeCollision(String),
    #[error("bad cut points: {0}")]
    BadCuts(String),
    #[error("label `{label}` of `{variable}` is not numeric")]
    BadNumericLabel { variable: String, label: String },
    #[error("variable `{variable}` has {count} missing cells; complete data required")]
    MissingData { variable: String, count: u64 },
    #[error("family table would need {cells} cells (limit {limit})")]
    StateSpaceTooLarge { cells: u128, limit: u64 },
    #[error("invalid operation: {0}")]
    InvalidOperation(String),
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

fn row_suffix(row: &Option<usize>) -> String {
    match row {
        Some(r) => format!(" (data row {r})"),
        None => String::new(),
    }
}

/// A categorical variable: short code, descriptive name, ordered levels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VariableSchema {
    pub code: NodeId,
    pub name: String,
    pub levels: Vec<String>,
}

impl VariableSchema {
    pub fn new(
        code: impl Into<String>,
        name: impl Into<String>,
        levels: impl IntoIterator<Item = impl Into<String>>,
    ) -> Result<Self, DataError> {
        let schema = VariableSchema {
            code: code.into(),
            name: name.into(),
            levels: levels.into_iter().map(Into::into).collect(),
        };
        schema.validate()?;
        Ok(schema)
    }

    fn validate(&self) -> Result<(), DataError> {
        if !valid_code(&self.code) {
            return Err(DataError::InvalidCode(self.code.clone()));
        }
        let err = |message: &str| {
            Err(DataError::InvalidSchema {
                variable: self.code.clone(),
                message: message.to_string(),
            })
        };
        if self.levels.is_empty() {
            return err("no levels");
        }
        let mut seen = std::collections::BTreeSet::new();
        for level in &self.levels {
            if level.is_empty() {
                return err("empty level label");
            }
            if level.contains('"') || self.name.contains('"') {
                return err("double quotes are not allowed in names or labels");
            }
            if !seen.insert(level) {
                return Err(DataError::DuplicateMapping {
                    variable: self.code.clone(),
                    label: level.clone(),
                });
            }
        }
        Ok(())
    }

    pub fn cardinality(&self) -> usize {
        self.levels.len()
    }

    pub fn level_index(&self, label: &str) -> Option<u32> {
        self.levels.iter().position(|l| l == label).map(|i| i as u32)
    }
}

/// A rectangular categorical table. Cells hold level indices into the
/// corresponding schema; `None` marks a missing value.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    schemas: Vec<VariableSchema>,
    index: BTreeMap<NodeId, usize>,
    rows: Vec<Vec<Option<u32>>>,
    missing_per_var: Vec<u64>,
}

impl Dataset {
    pub fn new(
        schemas: Vec<VariableSchema>,
        rows: Vec<Vec<Option<u32>>>,
    ) -> Result<Self, DataError> {
        let mut index = BTreeMap::new();
        for (i, schema) in schemas.iter().enumerate() {
            schema.validate()?;
            if index.insert(schema.code.clone(), i).is_some() {
                return Err(DataError::DuplicateVariable(schema.code.clone()));
            }
        }
        let mut missing_per_var = vec![0u64; schemas.len()];
        for (row_no, row) in rows.iter().enumerate() {
            if row.len() != schemas.len() {
                return Err(DataError::RowWidth {
                    row: row_no,
                    expected: schemas.len(),
                    got: row.len(),
                });
            }
            for (col, cell) in row.iter().enumerate() {
                match cell {
                    None => missing_per_var[col] += 1,
                    Some(idx) => {
                        let r = schemas[col].cardinality();
                        if *idx as usize >= r {
                            return Err(DataError::BadCell {
                                row: row_no,
                                variable: schemas[col].code.clone(),
                                index: *idx,
                                r,
                            });
                        }
                    }
                }
            }
        }
        Ok(Dataset { schemas, index, rows, missing_per_var })
    }

    /// Builds a dataset from label strings, useful in tests and when the
    /// caller already has parsed records. `missing_token` cells become
    /// missing; any other label must appear in the schema.
    pub fn from_label_rows(
        schemas: Vec<VariableSchema>,
        rows: &[Vec<&str>],
        missing_token: &str,
    ) -> Result<Self, DataError> {
        let mut index_rows = Vec::with_capacity(rows.len());
        for (row_no, row) in rows.iter().enumerate() {
            if row.len() != schemas.len() {
                return Err(DataError::RowWidth {
                    row: row_no,
                    expected: schemas.len(),
                    got: row.len(),
                });
            }
            let mut cells = Vec::with_capacity(row.len());
            for (schema, label) in schemas.iter().zip(row) {
                if *label == missing_token {
                    cells.push(None);
                } else {
                    match schema.level_index(label) {
                        Some(idx) => cells.push(Some(idx)),
                        None => {
                            return Err(DataError::UnknownLabel {
                                variable: schema.code.clone(),
                                label: label.to_string(),
                                row: Some(row_no),
                            })
                        }
                    }
                }
            }
            index_rows.push(cells);
        }
        Dataset::new(schemas, index_rows)
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn n_vars(&self) -> usize {
        self.schemas.len()
    }

    pub fn schemas(&self) -> &[VariableSchema] {
        &self.schemas
    }

    pub fn rows(&self) -> &[Vec<Option<u32>>] {
        &self.rows
    }

    pub fn schema(&self, var: &str) -> Result<&VariableSchema, DataError> {
        self.var_index(var).map(|i| &self.schemas[i])
    }

    pub fn var_index(&self, var: &str) -> Result<usize, DataError> {
        self.index
            .get(var)
            .copied()
            .ok_or_else(|| DataError::UnknownVariable(var.to_string()))
    }

    /// Missing-cell count per variable, in column order.
    pub fn missing_per_var(&self) -> &[u64] {
        &self.missing_per_var
    }

    pub fn is_complete(&self) -> bool {
        self.missing_per_var.iter().all(|&m| m == 0)
    }

    /// Variables that contain missing cells, with their counts.
    pub fn incomplete_variables(&self) -> Vec<(NodeId, u64)> {
        self.schemas
            .iter()
            .zip(&self.missing_per_var)
            .filter(|(_, &m)| m > 0)
            .map(|(s, &m)| (s.code.clone(), m))
            .collect()
    }

    /// Remaps the levels of `var`. The mapping must cover every level
    /// exactly once; the new level order is the first-appearance order
    /// of the mapped-to labels in `mapping`.
    pub fn merge_levels(
        &self,
        var: &str,
        mapping: &[(String, String)],
    ) -> Result<Dataset, DataError> {
        let col = self.var_index(var)?;
        let schema = &self.schemas[col];

        let mut old_to_new_label: BTreeMap<&str, &str> = BTreeMap::new();
        let mut new_levels: Vec<String> = Vec::new();
        for (old, new) in mapping {
            if schema.level_index(old).is_none() {
                return Err(DataError::UnknownLabel {
                    variable: var.to_string(),
                    label: old.clone(),
                    row: None,
                });
            }
            if old_to_new_label.insert(old, new).is_some() {
                return Err(DataError::DuplicateMapping {
                    variable: var.to_string(),
                    label: old.clone(),
                });
            }
            if !new_levels.iter().any(|l| l == new) {
                new_levels.push(new.clone());
            }
        }
        for level in &schema.levels {
            if !old_to_new_label.contains_key(level.as_str()) {
                return Err(DataError::PartialMapping {
                    variable: var.to_string(),
                    label: level.clone(),
                });
            }
        }

        let new_schema = VariableSchema::new(schema.code.clone(), schema.name.clone(), new_levels)?;
        let remap: Vec<u32> = schema
            .levels
            .iter()
            .map(|old| {
                let new = old_to_new_label[old.as_str()];
                new_schema.level_index(new).expect("level from mapping")
            })
            .collect();

        let mut schemas = self.schemas.clone();
        schemas[col] = new_schema;
        let rows = self
            .rows
            .iter()
            .map(|row| {
                let mut row = row.clone();
                row[col] = row[col].map(|idx| remap[idx as usize]);
                row
            })
            .collect();
        Dataset::new(schemas, rows)
    }

    /// Replaces variables `a` and `b` with a single variable `new_code`
    /// whose value is `combine(a_label, b_label)`.
    ///
    /// The new level order is the first-appearance order of the combined
    /// labels over the schema-level product (levels of `a` outermost),
    /// so it depends only on the schemas, not on the rows. `combine`
    /// returning `None` for a reachable pair is an error. A cell of the
    /// fused variable is missing when either source cell is missing.
    pub fn fuse_variables(
        &self,
        a: &str,
        b: &str,
        new_code: &str,
        combine: impl Fn(&str, &str) -> Option<String>,
    ) -> Result<Dataset, DataError> {
        let col_a = self.var_index(a)?;
        let col_b = self.var_index(b)?;
        if col_a == col_b {
            return Err(DataError::DuplicateVariable(a.to_string()));
        }
        if !valid_code(new_code) {
            return Err(DataError::InvalidCode(new_code.to_string()));
        }
        if new_code != a && new_code != b && self.index.contains_key(new_code) {
            return Err(DataError::CodeCollision(new_code.to_string()));
        }

        let schema_a = &self.schemas[col_a];
        let schema_b = &self.schemas[col_b];
        let mut new_levels: Vec<String> = Vec::new();
        let mut pair_to_new: Vec<u32> = Vec::with_capacity(schema_a.cardinality() * schema_b.cardinality());
        for la in &schema_a.levels {
            for lb in &schema_b.levels {
                let Some(out) = combine(la, lb) else {
                    return Err(DataError::PartialMapping {
                        variable: new_code.to_string(),
                        label: format!("({la}, {lb})"),
                    });
                };
                let idx = match new_levels.iter().position(|l| l == &out) {
                    Some(i) => i as u32,
                    None => {
                        new_levels.push(out);
                        (new_levels.len() - 1) as u32
                    }
                };
                pair_to_new.push(idx);
            }
        }

        let name = format!("{} + {}", schema_a.name, schema_b.name);
        let fused = VariableSchema::new(new_code, name, new_levels)?;
        let r_b = schema_b.cardinality();

        // The fused column takes a's position; b's column is dropped.
        let mut schemas = self.schemas.clone();
        schemas[col_a] = fused;
        schemas.remove(col_b);
        let rows = self
            .rows
            .iter()
            .map(|row| {
                let fused_cell = match (row[col_a], row[col_b]) {
                    (Some(ia), Some(ib)) => Some(pair_to_new[ia as usize * r_b + ib as usize]),
                    _ => None,
                };
                let mut row = row.clone();
                row[col_a] = fused_cell;
                row.remove(col_b);
                row
            })
            .collect();
        Dataset::new(schemas, rows)
    }

    /// Fills in structurally missing answers: wherever `gate` equals
    /// `gate_negative`, each missing target cell is set to its fill
    /// label. Rows where the gate is missing or positive are untouched,
    /// as are target cells that already hold an answer.
    pub fn cascade_impute(
        &self,
        gate: &str,
        gate_negative: &str,
        fills: &[(NodeId, String)],
    ) -> Result<Dataset, DataError> {
        let gate_col = self.var_index(gate)?;
        let negative = self.schemas[gate_col]
            .level_index(gate_negative)
            .ok_or_else(|| DataError::UnknownLabel {
                variable: gate.to_string(),
                label: gate_negative.to_string(),
                row: None,
            })?;
        let mut targets = Vec::with_capacity(fills.len());
        for (target, fill) in fills {
            let col = self.var_index(target)?;
            if col == gate_col {
                return Err(DataError::InvalidOperation(format!(
                    "gate `{gate}` cannot be its own imputation target"
                )));
            }
            let fill_idx = self.schemas[col].level_index(fill).ok_or_else(|| {
                DataError::UnknownLabel {
                    variable: target.clone(),
                    label: fill.clone(),
                    row: None,
                }
            })?;
            targets.push((col, fill_idx));
        }

        let rows = self
            .rows
            .iter()
            .map(|row| {
                if row[gate_col] != Some(negative) {
                    return row.clone();
                }
                let mut row = row.clone();
                for &(col, fill_idx) in &targets {
                    if row[col].is_none() {
                        row[col] = Some(fill_idx);
                    }
                }
                row
            })
            .collect();
        Dataset::new(self.schemas.clone(), rows)
    }

    /// Keeps only rows with no missing cells.
    pub fn drop_incomplete(&self) -> Dataset {
        let rows: Vec<Vec<Option<u32>>> = self
            .rows
            .iter()
            .filter(|row| row.iter().all(Option::is_some))
            .cloned()
            .collect();
        Dataset::new(self.schemas.clone(), rows).expect("rows already validated")
    }

    /// Keeps only the listed variables, reordering columns to match.
    pub fn select(&self, vars: &[&str]) -> Result<Dataset, DataError> {
        let mut cols = Vec::with_capacity(vars.len());
        let mut seen = std::collections::BTreeSet::new();
        for var in vars {
            if !seen.insert(*var) {
                return Err(DataError::DuplicateVariable(var.to_string()));
            }
            cols.push(self.var_index(var)?);
        }
        let schemas = cols.iter().map(|&c| self.schemas[c].clone()).collect();
        let rows = self
            .rows
            .iter()
            .map(|row| cols.iter().map(|&c| row[c]).collect())
            .collect();
        Dataset::new(schemas, rows)
    }

    /// Keeps rows where `var` equals `label` (or, with `negate`, rows
    /// where it does not). A missing cell never equals the label, so
    /// `negate` keeps rows where the value is missing.
    pub fn filter(&self, var: &str, label: &str, negate: bool) -> Result<Dataset, DataError> {
        let col = self.var_index(var)?;
        let idx = self.schemas[col].level_index(label).ok_or_else(|| {
            DataError::UnknownLabel {
                variable: var.to_string(),
                label: label.to_string(),
                row: None,
            }
        })?;
        let rows = self
            .rows
            .iter()
            .filter(|row| (row[col] == Some(idx)) != negate)
            .cloned()
            .collect();
        Dataset::new(self.schemas.clone(), rows)
    }

    /// Replaces a variable whose level labels are numbers with its
    /// discretized version: labels are parsed, binned with [`discretize`],
    /// and the variable's levels become `labels`.
    pub fn discretize_variable(
        &self,
        var: &str,
        cuts: &[f64],
        labels: &[String],
    ) -> Result<Dataset, DataError> {
        let col = self.var_index(var)?;
        let schema = &self.schemas[col];
        let numeric: Vec<f64> = schema
            .levels
            .iter()
            .map(|label| {
                label.parse::<f64>().map_err(|_| DataError::BadNumericLabel {
                    variable: var.to_string(),
                    label: label.clone(),
                })
            })
            .collect::<Result<_, _>>()?;
        let label_refs: Vec<&str> = labels.iter().map(String::as_str).collect();
        let binned = discretize(&numeric, cuts, &label_refs)?;
        let remap: Vec<u32> = binned
            .into_iter()
            .enumerate()
            .map(|(i, bin)| {
                bin.ok_or_else(|| DataError::BadNumericLabel {
                    variable: var.to_string(),
                    label: schema.levels[i].clone(),
                })
            })
            .collect::<Result<_, _>>()?;

        let mut schemas = self.schemas.clone();
        schemas[col] = VariableSchema::new(schema.code.clone(), schema.name.clone(), labels.to_vec())?;
        let rows = self
            .rows
            .iter()
            .map(|row| {
                let mut row = row.clone();
                row[col] = row[col].map(|idx| remap[idx as usize]);
                row
            })
            .collect();
        Dataset::new(schemas, rows)
    }

    /// Joint counts of `child` by every configuration of `parents`.
    /// Requires complete data everywhere, matching what the scores and
    /// estimators assume.
    pub fn family_counts(&self, child: &str, parents: &[&str]) -> Result<FamilyCounts, DataError> {
        if let Some((variable, count)) = self.incomplete_variables().into_iter().next() {
            return Err(DataError::MissingData { variable, count });
        }
        let child_col = self.var_index(child)?;
        let mut parent_cols = Vec::with_capacity(parents.len());
        let mut seen = std::collections::BTreeSet::new();
        seen.insert(child);
        for p in parents {
            if !seen.insert(*p) {
                return Err(DataError::DuplicateVariable(p.to_string()));
            }
            parent_cols.push(self.var_index(p)?);
        }

        let r = self.schemas[child_col].cardinality();
        let cards: Vec<usize> = parent_cols.iter().map(|&c| self.schemas[c].cardinality()).collect();
        let mut q: u128 = 1;
        for &card in &cards {
            q *= card as u128;
        }
        const CELL_LIMIT: u64 = 1 << 24;
        let cells = q * r as u128;
        if cells > CELL_LIMIT as u128 {
            return Err(DataError::StateSpaceTooLarge { cells, limit: CELL_LIMIT });
        }
        let q = q as usize;

        let mut n_ijk = vec![0u64; q * r];
        let mut n_ij = vec![0u64; q];
        for row in &self.rows {
            // First parent most significant.
            let mut j = 0usize;
            for (&col, &card) in parent_cols.iter().zip(&cards) {
                j = j * card + row[col].expect("complete") as usize;
            }
            let k = row[child_col].expect("complete") as usize;
            n_ijk[j * r + k] += 1;
            n_ij[j] += 1;
        }

        Ok(FamilyCounts {
            child: child.to_string(),
            parents: parents.iter().map(|p| p.to_string()).collect(),
            r,
            q,
            n: self.rows.len() as u64,
            n_ijk,
            n_ij,
        })
    }
}

/// Bins a numeric column. Bins are left-open and right-closed:
/// `(-inf, cuts[0]], (cuts[0], cuts[1]], ..., (cuts[last], +inf)`, so
/// values beyond the extreme cuts clamp into the end bins. `NaN` maps
/// to missing.
pub fn discretize(
    raw: &[f64],
    cuts: &[f64],
    labels: &[&str],
) -> Result<Vec<Option<u32>>, DataError> {
    if cuts.is_empty() {
        return Err(DataError::BadCuts("at least one cut point required".into()));
    }
    if cuts.iter().any(|c| !c.is_finite()) {
        return Err(DataError::BadCuts("cut points must be finite".into()));
    }
    if cuts.windows(2).any(|w| w[0] >= w[1]) {
        return Err(DataError::BadCuts("cut points must be strictly increasing".into()));
    }
    if labels.len() != cuts.len() + 1 {
        return Err(DataError::BadCuts(format!(
            "{} cut points need {} labels, got {}",
            cuts.len(),
            cuts.len() + 1,
            labels.len()
        )));
    }
    Ok(raw
        .iter()
        .map(|&v| {
            if v.is_nan() {
                return None;
            }
            let bin = cuts.iter().take_while(|&&c| v > c).count();
            Some(bin as u32)
        })
        .collect())
}

/// Sufficient statistics for one node and one parent set: `n_ijk` counts
/// child level `k` under parent configuration `j`, with configurations
/// indexed mixed-radix (first parent most significant).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FamilyCounts {
    pub child: NodeId,
    pub parents: Vec<NodeId>,
    /// Child cardinality.
    pub r: usize,
    /// Number of parent configurations (1 when there are no parents).
    pub q: usize,
    /// Total sample size.
    pub n: u64,
    n_ijk: Vec<u64>,
    n_ij: Vec<u64>,
}

impl FamilyCounts {
    pub fn n_ijk(&self, j: usize, k: usize) -> u64 {
        self.n_ijk[j * self.r + k]
    }

    pub fn n_ij(&self, j: usize) -> u64 {
        self.n_ij[j]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn schema(code: &str, levels: &[&str]) -> VariableSchema {
        VariableSchema::new(code, code, levels.iter().copied()).unwrap()
    }

    fn toy() -> Dataset {
        Dataset::from_label_rows(
            vec![schema("A", &["yes", "no"]), schema("B", &["0", "1", "2"])],
            &[
                vec!["yes", "0"],
                vec!["no", "2"],
                vec!["yes", "NA"],
                vec!["NA", "1"],
                vec!["no", "0"],
            ],
            "NA",
        )
        .unwrap()
    }

    #[test]
    fn construction_validates_cells_and_codes() {
        let err = Dataset::new(vec![schema("A", &["x"])], vec![vec![Some(1)]]).unwrap_err();
        assert!(matches!(err, DataError::BadCell { row: 0, index: 1, .. }));

        let err = Dataset::new(
            vec![schema("A", &["x"]), schema("A", &["y"])],
            vec![],
        )
        .unwrap_err();
        assert!(matches!(err, DataError::DuplicateVariable(v) if v == "A"));

        let err = VariableSchema::new("A|B", "bad", ["x"]).unwrap_err();
        assert!(matches!(err, DataError::InvalidCode(_)));
    }

    #[test]
    fn missing_cells_are_tracked_per_variable() {
        let d = toy();
        assert_eq!(d.missing_per_var(), &[1, 1]);
        assert!(!d.is_complete());
        assert_eq!(
            d.incomplete_variables(),
            vec![("A".to_string(), 1), ("B".to_string(), 1)]
        );
        assert!(d.drop_incomplete().is_complete());
        assert_eq!(d.drop_incomplete().n_rows(), 3);
    }

    #[test]
    fn merge_levels_follows_mapping_order() {
        let d = toy();
        let merged = d
            .merge_levels(
                "B",
                &[
                    ("2".into(), "high".into()),
                    ("1".into(), "high".into()),
                    ("0".into(), "low".into()),
                ],
            )
            .unwrap();
        // First-appearance order of the mapped-to labels: high, then low.
        assert_eq!(merged.schema("B").unwrap().levels, vec!["high", "low"]);
        let col: Vec<Option<u32>> = merged.rows().iter().map(|r| r[1]).collect();
        assert_eq!(col, vec![Some(1), Some(0), None, Some(0), Some(1)]);
        // The input is untouched.
        assert_eq!(d.schema("B").unwrap().levels, vec!["0", "1", "2"]);
    }

    #[test]
    fn merge_levels_must_cover_every_level() {
        let d = toy();
        let err = d
            .merge_levels("B", &[("0".into(), "low".into()), ("1".into(), "low".into())])
            .unwrap_err();
        assert!(matches!(err, DataError::PartialMapping { label, .. } if label == "2"));

        let err = d
            .merge_levels(
                "B",
                &[
                    ("0".into(), "x".into()),
                    ("0".into(), "y".into()),
                    ("1".into(), "x".into()),
                    ("2".into(), "x".into()),
                ],
            )
            .unwrap_err();
        assert!(matches!(err, DataError::DuplicateMapping { label, .. } if label == "0"));
    }

    #[test]
    fn fuse_orders_levels_by_schema_product_not_data() {
        let d = Dataset::from_label_rows(
            vec![schema("F", &["<50", ">=50"]), schema("M", &["<50", ">=50"])],
            &[vec![">=50", ">=50"], vec!["<50", "NA"], vec!["<50", ">=50"]],
            "NA",
        )
        .unwrap();
        let fused = d
            .fuse_variables("F", "M", "FM", |a, b| {
                Some(match (a, b) {
                    ("<50", "<50") => "both_under".into(),
                    (">=50", ">=50") => "both_over".into(),
                    _ => "mixed".into(),
                })
            })
            .unwrap();
        assert_eq!(fused.n_vars(), 1);
        // Product order (<50,<50), (<50,>=50), (>=50,<50), (>=50,>=50)
        // gives first appearances: both_under, mixed, both_over.
        assert_eq!(
            fused.schema("FM").unwrap().levels,
            vec!["both_under", "mixed", "both_over"]
        );
        let col: Vec<Option<u32>> = fused.rows().iter().map(|r| r[0]).collect();
        assert_eq!(col, vec![Some(2), None, Some(1)]);
    }

    #[test]
    fn fuse_rejects_collisions_and_partial_combines() {
        let d = toy();
        let err = d.fuse_variables("A", "B", "A", |_, _| Some("x".into()));
        assert!(err.is_ok(), "reusing one of the fused codes is allowed");
        let d2 = Dataset::from_label_rows(
            vec![schema("A", &["x"]), schema("B", &["y"]), schema("C", &["z"])],
            &[],
            "NA",
        )
        .unwrap();
        let err = d2.fuse_variables("A", "B", "C", |_, _| Some("x".into())).unwrap_err();
        assert!(matches!(err, DataError::CodeCollision(c) if c == "C"));

        let err = d2
            .fuse_variables("A", "B", "AB", |_, _| None)
            .unwrap_err();
        assert!(matches!(err, DataError::PartialMapping { .. }));
    }

    #[test]
    fn cascade_impute_fills_only_gated_missing_cells() {
        let d = Dataset::from_label_rows(
            vec![
                schema("G", &["no", "yes"]),
                schema("T", &["0", "1", "2"]),
                schema("U", &["a", "b"]),
            ],
            &[
                vec!["no", "NA", "NA"],  // gated: both targets filled
                vec!["yes", "NA", "a"],  // not gated: stays missing
                vec!["no", "2", "NA"],   // gated: only U filled, T kept
                vec!["NA", "NA", "a"],   // gate missing: untouched
            ],
            "NA",
        )
        .unwrap();
        let imputed = d
            .cascade_impute("G", "no", &[("T".into(), "0".into()), ("U".into(), "a".into())])
            .unwrap();
        let got: Vec<Vec<Option<u32>>> = imputed.rows().to_vec();
        assert_eq!(
            got,
            vec![
                vec![Some(0), Some(0), Some(0)],
                vec![Some(1), None, Some(0)],
                vec![Some(0), Some(2), Some(0)],
                vec![None, None, Some(0)],
            ]
        );
        assert_eq!(imputed.drop_incomplete().n_rows(), 2);
        assert_eq!(d.drop_incomplete().n_rows(), 0);
    }

    #[test]
    fn discretize_bins_left_open_right_closed() {
        let raw = [10.0, 18.5, 18.6, 25.0, 31.0, f64::NAN, f64::NEG_INFINITY];
        let bins = discretize(&raw, &[18.5, 25.0, 30.0], &["u", "n", "o", "x"]).unwrap();
        assert_eq!(
            bins,
            vec![Some(0), Some(0), Some(1), Some(1), Some(3), None, Some(0)]
        );

        assert!(matches!(
            discretize(&raw, &[25.0, 18.5], &["a", "b", "c"]),
            Err(DataError::BadCuts(_))
        ));
        assert!(matches!(
            discretize(&raw, &[18.5], &["a"]),
            Err(DataError::BadCuts(_))
        ));
    }

    #[test]
    fn discretize_variable_rebins_numeric_labels() {
        let d = Dataset::from_label_rows(
            vec![schema("K6", &["0", "7", "13", "19"])],
            &[vec!["0"], vec!["13"], vec!["NA"], vec!["19"], vec!["7"]],
            "NA",
        )
        .unwrap();
        let binned = d
            .discretize_variable("K6", &[6.0, 12.0], &["low".into(), "mid".into(), "high".into()])
            .unwrap();
        assert_eq!(binned.schema("K6").unwrap().levels, vec!["low", "mid", "high"]);
        let col: Vec<Option<u32>> = binned.rows().iter().map(|r| r[0]).collect();
        assert_eq!(col, vec![Some(0), Some(2), None, Some(2), Some(1)]);

        let labels = ["a".to_string(), "b".to_string()];
        let d = Dataset::from_label_rows(
            vec![schema("W", &["x", "1"])],
            &[],
            "NA",
        )
        .unwrap();
        let err = d.discretize_variable("W", &[0.5], &labels).unwrap_err();
        assert!(matches!(err, DataError::BadNumericLabel { label, .. } if label == "x"));
    }

    #[test]
    fn select_and_filter() {
        let d = toy();
        let s = d.select(&["B", "A"]).unwrap();
        assert_eq!(s.schemas()[0].code, "B");
        assert_eq!(s.schemas()[1].code, "A");
        assert_eq!(s.rows()[0], vec![Some(0), Some(0)]);

        let f = d.filter("A", "yes", false).unwrap();
        assert_eq!(f.n_rows(), 2);
        let f = d.filter("A", "yes", true).unwrap();
        // "no", "no", and the row with A missing.
        assert_eq!(f.n_rows(), 3);
    }

    #[test]
    fn family_counts_use_mixed_radix_parent_configurations() {
        let d = Dataset::from_label_rows(
            vec![
                schema("C", &["0", "1"]),
                schema("P1", &["a", "b"]),
                schema("P2", &["x", "y", "z"]),
            ],
            &[
                vec!["0", "a", "x"],
                vec!["1", "a", "x"],
                vec!["1", "a", "z"],
                vec!["0", "b", "y"],
                vec!["1", "b", "y"],
                vec!["1", "b", "y"],
            ],
            "NA",
        )
        .unwrap();
        let fc = d.family_counts("C", &["P1", "P2"]).unwrap();
        assert_eq!((fc.r, fc.q, fc.n), (2, 6, 6));
        // First parent most significant: j = p1 * 3 + p2.
        assert_eq!(fc.n_ijk(0, 0), 1); // (a, x, C=0)
        assert_eq!(fc.n_ijk(0, 1), 1); // (a, x, C=1)
        assert_eq!(fc.n_ijk(2, 1), 1); // (a, z, C=1)
        assert_eq!(fc.n_ij(4), 3); // (b, y)
        assert_eq!(fc.n_ijk(4, 1), 2);
        let total: u64 = (0..fc.q).map(|j| fc.n_ij(j)).sum();
        assert_eq!(total, fc.n);

        // No parents: a single configuration.
        let fc = d.family_counts("C", &[]).unwrap();
        assert_eq!((fc.r, fc.q), (2, 1));
        assert_eq!(fc.n_ij(0), 6);
        assert_eq!(fc.n_ijk(0, 1), 4);
    }

    #[test]
    fn family_counts_reject_incomplete_data() {
        let d = toy();
        let err = d.family_counts("A", &[]).unwrap_err();
        assert!(matches!(err, DataError::MissingData { variable, count: 1 } if variable == "A"));
    }
}
