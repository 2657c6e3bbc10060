//! File formats around [`Dataset`]: CSV data, schema files, and
//! preprocessing pipelines.
//!
//! Schema and pipeline files are line-oriented. Tokens are separated by
//! whitespace; a token containing spaces is wrapped in double quotes;
//! `#` starts a comment. Labels used in pipeline mappings cannot contain
//! `=` (or `,` inside `fuse` pairs and `discretize` lists) — those
//! characters separate the mapping parts.

use std::io::{Read, Write};
use std::path::Path;

use super::{DataError, Dataset, VariableSchema};
use crate::graph::NodeId;

/// Splits a line into tokens, honoring double quotes and `#` comments.
fn tokenize(line: &str) -> Result<Vec<String>, String> {
    let mut tokens = Vec::new();
    let mut current = String::new();
    let mut quoted = false;
    let mut pending = false; // an empty quoted token still counts
    for c in line.chars() {
        match c {
            '"' => {
                quoted = !quoted;
                pending = true;
            }
            '#' if !quoted => break,
            c if c.is_whitespace() && !quoted => {
                if pending || !current.is_empty() {
                    tokens.push(std::mem::take(&mut current));
                    pending = false;
                }
            }
            c => current.push(c),
        }
    }
    if quoted {
        return Err("unterminated quote".to_string());
    }
    if pending || !current.is_empty() {
        tokens.push(current);
    }
    Ok(tokens)
}

fn quote(token: &str) -> String {
    if token.is_empty() || token.chars().any(|c| c.is_whitespace() || c == '#') {
        format!("\"{token}\"")
    } else {
        token.to_string()
    }
}

/// Parses a schema file: one variable per line as
/// `CODE "Readable name" LEVEL LEVEL ...`.
pub fn parse_schema_file(text: &str) -> Result<Vec<VariableSchema>, DataError> {
    let mut schemas = Vec::new();
    for (line_no, line) in text.lines().enumerate() {
        let line_no = line_no + 1;
        let syntax = |message: String| DataError::Syntax { line: line_no, message };
        let tokens = tokenize(line).map_err(syntax)?;
        if tokens.is_empty() {
            continue;
        }
        if tokens.len() < 3 {
            return Err(syntax(format!(
                "expected `CODE \"name\" LEVEL...`, got {} tokens",
                tokens.len()
            )));
        }
        schemas.push(VariableSchema::new(
            tokens[0].clone(),
            tokens[1].clone(),
            tokens[2..].iter().cloned(),
        )?);
    }
    if schemas.is_empty() {
        return Err(DataError::Syntax {
            line: 0,
            message: "schema file declares no variables".to_string(),
        });
    }
    Ok(schemas)
}

/// Renders schemas in the format [`parse_schema_file`] reads.
pub fn format_schema_file(schemas: &[VariableSchema]) -> String {
    let mut out = String::new();
    for schema in schemas {
        out.push_str(&quote(&schema.code));
        out.push(' ');
        out.push_str(&format!("\"{}\"", schema.name));
        for level in &schema.levels {
            out.push(' ');
            out.push_str(&quote(level));
        }
        out.push('\n');
    }
    out
}

/// One step of a preprocessing pipeline.
#[derive(Debug, Clone, PartialEq)]
pub enum PipelineOp {
    /// `select CODE...` — keep only these variables, in this order.
    Select { vars: Vec<NodeId> },
    /// `merge VAR old=new ...` — remap every level of VAR.
    Merge { var: NodeId, mapping: Vec<(String, String)> },
    /// `fuse A B NEW la,lb=out ...` — combine two variables; `*` in a
    /// pair position matches any label, first matching pair wins.
    Fuse {
        a: NodeId,
        b: NodeId,
        new_code: NodeId,
        pairs: Vec<(String, String, String)>,
    },
    /// `impute GATE=negative TARGET=fill ...` — where GATE equals the
    /// negative answer, fill missing targets.
    Impute {
        gate: NodeId,
        gate_negative: String,
        fills: Vec<(NodeId, String)>,
    },
    /// `discretize VAR cuts=c1,c2 labels=l1,l2,l3` — bin a variable
    /// whose levels are numbers.
    Discretize { var: NodeId, cuts: Vec<f64>, labels: Vec<String> },
    /// `filter VAR=LABEL` or `filter VAR!=LABEL` — keep matching rows.
    Filter { var: NodeId, label: String, negate: bool },
    /// `drop_incomplete` — keep only rows with no missing cells.
    DropIncomplete,
}

impl PipelineOp {
    /// Applies this step to a dataset, returning the transformed copy.
    pub fn apply(&self, data: &Dataset) -> Result<Dataset, DataError> {
        match self {
            PipelineOp::Select { vars } => {
                let refs: Vec<&str> = vars.iter().map(String::as_str).collect();
                data.select(&refs)
            }
            PipelineOp::Merge { var, mapping } => data.merge_levels(var, mapping),
            PipelineOp::Fuse { a, b, new_code, pairs } => {
                data.fuse_variables(a, b, new_code, |la, lb| {
                    pairs
                        .iter()
                        .find(|(pa, pb, _)| {
                            (pa == "*" || pa == la) && (pb == "*" || pb == lb)
                        })
                        .map(|(_, _, out)| out.clone())
                })
            }
            PipelineOp::Impute { gate, gate_negative, fills } => {
                data.cascade_impute(gate, gate_negative, fills)
            }
            PipelineOp::Discretize { var, cuts, labels } => {
                data.discretize_variable(var, cuts, labels)
            }
            PipelineOp::Filter { var, label, negate } => data.filter(var, label, *negate),
            PipelineOp::DropIncomplete => Ok(data.drop_incomplete()),
        }
    }
}

impl std::fmt::Display for PipelineOp {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            PipelineOp::Select { vars } => write!(f, "select {}", vars.join(" ")),
            PipelineOp::Merge { var, mapping } => {
                write!(f, "merge {var}")?;
                for (old, new) in mapping {
                    write!(f, " {}={}", quote(old), quote(new))?;
                }
                Ok(())
            }
            PipelineOp::Fuse { a, b, new_code, pairs } => {
                write!(f, "fuse {a} {b} {new_code}")?;
                for (la, lb, out) in pairs {
                    write!(f, " {},{}={}", quote(la), quote(lb), quote(out))?;
                }
                Ok(())
            }
            PipelineOp::Impute { gate, gate_negative, fills } => {
                write!(f, "impute {gate}={}", quote(gate_negative))?;
                for (target, fill) in fills {
                    write!(f, " {target}={}", quote(fill))?;
                }
                Ok(())
            }
            PipelineOp::Discretize { var, cuts, labels } => {
                let cuts: Vec<String> = cuts.iter().map(|c| c.to_string()).collect();
                write!(
                    f,
                    "discretize {var} cuts={} labels={}",
                    cuts.join(","),
                    labels.join(",")
                )
            }
            PipelineOp::Filter { var, label, negate } => {
                write!(f, "filter {var}{}{}", if *negate { "!=" } else { "=" }, quote(label))
            }
            PipelineOp::DropIncomplete => write!(f, "drop_incomplete"),
        }
    }
}

fn split_pair(token: &str) -> Option<(&str, &str)> {
    // Labels on the left may contain `=`; the right-hand side (a label
    // chosen by the pipeline author) may not.
    token.rsplit_once('=')
}

/// Parses a pipeline file into its steps.
pub fn parse_pipeline(text: &str) -> Result<Vec<PipelineOp>, DataError> {
    let mut ops = Vec::new();
    for (line_no, line) in text.lines().enumerate() {
        let line_no = line_no + 1;
        let syntax = |message: String| DataError::Syntax { line: line_no, message };
        let tokens = tokenize(line).map_err(syntax)?;
        if tokens.is_empty() {
            continue;
        }
        let args = &tokens[1..];
        let op = match tokens[0].as_str() {
            "select" => {
                if args.is_empty() {
                    return Err(syntax("select needs at least one variable".into()));
                }
                PipelineOp::Select { vars: args.to_vec() }
            }
            "merge" => {
                if args.len() < 2 {
                    return Err(syntax("merge needs a variable and old=new pairs".into()));
                }
                let mapping = args[1..]
                    .iter()
                    .map(|t| {
                        split_pair(t)
                            .map(|(o, n)| (o.to_string(), n.to_string()))
                            .ok_or_else(|| syntax(format!("expected old=new, got `{t}`")))
                    })
                    .collect::<Result<_, _>>()?;
                PipelineOp::Merge { var: args[0].clone(), mapping }
            }
            "fuse" => {
                if args.len() < 4 {
                    return Err(syntax(
                        "fuse needs two variables, a new code, and la,lb=out pairs".into(),
                    ));
                }
                let pairs = args[3..]
                    .iter()
                    .map(|t| {
                        split_pair(t)
                            .and_then(|(pair, out)| {
                                pair.split_once(',')
                                    .map(|(la, lb)| (la.to_string(), lb.to_string(), out.to_string()))
                            })
                            .ok_or_else(|| syntax(format!("expected la,lb=out, got `{t}`")))
                    })
                    .collect::<Result<_, _>>()?;
                PipelineOp::Fuse {
                    a: args[0].clone(),
                    b: args[1].clone(),
                    new_code: args[2].clone(),
                    pairs,
                }
            }
            "impute" => {
                if args.len() < 2 {
                    return Err(syntax("impute needs GATE=negative and TARGET=fill pairs".into()));
                }
                let (gate, negative) = split_pair(&args[0])
                    .ok_or_else(|| syntax(format!("expected GATE=negative, got `{}`", args[0])))?;
                let fills = args[1..]
                    .iter()
                    .map(|t| {
                        split_pair(t)
                            .map(|(v, l)| (v.to_string(), l.to_string()))
                            .ok_or_else(|| syntax(format!("expected TARGET=fill, got `{t}`")))
                    })
                    .collect::<Result<_, _>>()?;
                PipelineOp::Impute {
                    gate: gate.to_string(),
                    gate_negative: negative.to_string(),
                    fills,
                }
            }
            "discretize" => {
                if args.len() != 3 {
                    return Err(syntax("discretize needs VAR cuts=... labels=...".into()));
                }
                let mut cuts = None;
                let mut labels = None;
                for t in &args[1..] {
                    if let Some(spec) = t.strip_prefix("cuts=") {
                        let parsed: Result<Vec<f64>, _> =
                            spec.split(',').map(str::parse::<f64>).collect();
                        cuts = Some(parsed.map_err(|_| syntax(format!("bad cut list `{spec}`")))?);
                    } else if let Some(spec) = t.strip_prefix("labels=") {
                        labels = Some(spec.split(',').map(str::to_string).collect::<Vec<_>>());
                    } else {
                        return Err(syntax(format!("unexpected token `{t}`")));
                    }
                }
                match (cuts, labels) {
                    (Some(cuts), Some(labels)) => {
                        PipelineOp::Discretize { var: args[0].clone(), cuts, labels }
                    }
                    _ => return Err(syntax("discretize needs both cuts= and labels=".into())),
                }
            }
            "filter" => {
                if args.len() != 1 {
                    return Err(syntax("filter needs exactly VAR=LABEL or VAR!=LABEL".into()));
                }
                if let Some((var, label)) = args[0].split_once("!=") {
                    PipelineOp::Filter {
                        var: var.to_string(),
                        label: label.to_string(),
                        negate: true,
                    }
                } else if let Some((var, label)) = args[0].split_once('=') {
                    PipelineOp::Filter {
                        var: var.to_string(),
                        label: label.to_string(),
                        negate: false,
                    }
                } else {
                    return Err(syntax(format!("expected VAR=LABEL, got `{}`", args[0])));
                }
            }
            "drop_incomplete" => {
                if !args.is_empty() {
                    return Err(syntax("drop_incomplete takes no arguments".into()));
                }
                PipelineOp::DropIncomplete
            }
            other => return Err(syntax(format!("unknown operation `{other}`"))),
        };
        ops.push(op);
    }
    Ok(ops)
}

/// Runs every step in order, returning the final dataset.
pub fn apply_pipeline(data: &Dataset, ops: &[PipelineOp]) -> Result<Dataset, DataError> {
    let mut current = data.clone();
    for op in ops {
        current = op.apply(&current)?;
    }
    Ok(current)
}

impl Dataset {
    /// Loads a CSV file against a schema. Columns are matched to
    /// variables by header name; extra columns are ignored, absent ones
    /// are an error. Cells equal to `missing_token` become missing; any
    /// other value must be a schema level.
    pub fn load_csv(
        path: impl AsRef<Path>,
        schemas: Vec<VariableSchema>,
        missing_token: &str,
    ) -> Result<Dataset, DataError> {
        let file = std::fs::File::open(path)?;
        Dataset::load_csv_reader(file, schemas, missing_token)
    }

    /// [`Dataset::load_csv`] over any reader.
    pub fn load_csv_reader<R: Read>(
        reader: R,
        schemas: Vec<VariableSchema>,
        missing_token: &str,
    ) -> Result<Dataset, DataError> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
        let headers = rdr.headers()?.clone();
        let columns: Vec<usize> = schemas
            .iter()
            .map(|schema| {
                headers
                    .iter()
                    .position(|h| h == schema.code)
                    .ok_or_else(|| DataError::MissingColumn(schema.code.clone()))
            })
            .collect::<Result<_, _>>()?;

        let mut rows = Vec::new();
        for (row_no, record) in rdr.records().enumerate() {
            let record = record?;
            let mut cells = Vec::with_capacity(schemas.len());
            for (schema, &col) in schemas.iter().zip(&columns) {
                let raw = record.get(col).ok_or(DataError::RowWidth {
                    row: row_no,
                    expected: headers.len(),
                    got: record.len(),
                })?;
                if raw == missing_token {
                    cells.push(None);
                } else {
                    match schema.level_index(raw) {
                        Some(idx) => cells.push(Some(idx)),
                        None => {
                            return Err(DataError::UnknownLabel {
                                variable: schema.code.clone(),
                                label: raw.to_string(),
                                row: Some(row_no),
                            })
                        }
                    }
                }
            }
            rows.push(cells);
        }
        Dataset::new(schemas, rows)
    }

    /// Writes the dataset as CSV with variable codes as headers and
    /// `missing_token` for missing cells.
    pub fn save_csv<W: Write>(&self, writer: W, missing_token: &str) -> Result<(), DataError> {
        let mut wtr = csv::Writer::from_writer(writer);
        wtr.write_record(self.schemas().iter().map(|s| s.code.as_str()))?;
        for row in self.rows() {
            let record: Vec<&str> = self
                .schemas()
                .iter()
                .zip(row)
                .map(|(schema, cell)| match cell {
                    Some(idx) => schema.levels[*idx as usize].as_str(),
                    None => missing_token,
                })
                .collect();
            wtr.write_record(record)?;
        }
        wtr.flush()?;
        Ok(())
    }
}
