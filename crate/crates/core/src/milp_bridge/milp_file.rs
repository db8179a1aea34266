//! MILP input files: a JSON document whose objective and rows are CSV lines.
//!
//! ```json
//! { "sense": "maximize",
//!   "variables": [ { "name": "x", "kind": "continuous" },
//!                  { "name": "n", "kind": "integer", "upper": 7 },
//!                  { "name": "b", "kind": "binary" } ],
//!   "objective": "3, 1, 2",
//!   "rows": [ "1, 1, 0, <=, 4", "1, 0, -1, >=, 0" ] }
//! ```
//!
//! Each row lists one coefficient per variable in declaration order, then the
//! sense (`<=`, `>=`, `=`), then the right-hand side.

use serde::{Deserialize, Serialize};

use super::{expand_integers, EncodeError, Milp};
use crate::solver::{ConstraintSense, ObjectiveSense};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FileVarKind {
    Continuous,
    Binary,
    Integer,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileVar {
    pub name: String,
    pub kind: FileVarKind,
    /// Required for integers.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub upper: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct RawFile {
    sense: ObjectiveSense,
    variables: Vec<FileVar>,
    objective: String,
    #[serde(default)]
    rows: Vec<String>,
}

/// A parsed file: the MILP (integers already expanded into binaries) and the
/// declared names of its `x` and `y` columns.
#[derive(Debug, Clone, PartialEq)]
pub struct MilpFile {
    pub milp: Milp,
    pub x_names: Vec<String>,
    pub y_names: Vec<String>,
    pub variables: Vec<FileVar>,
}

fn csv_fields(line: &str) -> Result<Vec<String>, EncodeError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_reader(line.as_bytes());
    let rec = rdr
        .records()
        .next()
        .ok_or_else(|| EncodeError::Format(format!("empty line {line:?}")))?
        .map_err(|e| EncodeError::Format(e.to_string()))?;
    Ok(rec.iter().map(str::to_string).collect())
}

fn number(s: &str) -> Result<f64, EncodeError> {
    s.parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| EncodeError::Format(format!("not a number: {s:?}")))
}

pub fn parse_milp_file(text: &str) -> Result<MilpFile, EncodeError> {
    let raw: RawFile = serde_json::from_str(text).map_err(|e| EncodeError::Format(e.to_string()))?;
    let n = raw.variables.len();
    // Column position of each declared variable within x or y.
    let mut x_of = Vec::new();
    let mut y_of = Vec::new();
    let (mut nx, mut ny) = (0, 0);
    let mut x_names = Vec::new();
    let mut y_names = Vec::new();
    let mut integer_x = Vec::new();
    let mut bounds = Vec::new();
    for v in &raw.variables {
        match v.kind {
            FileVarKind::Binary => {
                x_of.push(None);
                y_of.push(Some(ny));
                y_names.push(v.name.clone());
                ny += 1;
            }
            FileVarKind::Continuous | FileVarKind::Integer => {
                if v.kind == FileVarKind::Integer {
                    let u = v
                        .upper
                        .ok_or_else(|| EncodeError::Format(format!("integer {:?} needs an upper bound", v.name)))?;
                    integer_x.push(nx);
                    bounds.push(u);
                }
                x_of.push(Some(nx));
                y_of.push(None);
                x_names.push(v.name.clone());
                nx += 1;
            }
        }
    }
    let scatter = |vals: &[f64]| {
        let mut cx = vec![0.0; nx];
        let mut cy = vec![0.0; ny];
        for (k, &a) in vals.iter().enumerate() {
            match (x_of[k], y_of[k]) {
                (Some(j), _) => cx[j] = a,
                (_, Some(j)) => cy[j] = a,
                _ => unreachable!(),
            }
        }
        (cx, cy)
    };

    let obj: Vec<f64> = csv_fields(&raw.objective)?
        .iter()
        .map(|s| number(s))
        .collect::<Result<_, _>>()?;
    if obj.len() != n {
        return Err(EncodeError::Format(format!(
            "objective has {} coefficients for {n} variables",
            obj.len()
        )));
    }
    let (c_x, c_y) = scatter(&obj);
    let mut milp = Milp {
        sense: raw.sense,
        c_x,
        c_y,
        a_x: Vec::new(),
        a_y: Vec::new(),
        b: Vec::new(),
        row_sense: Vec::new(),
        integer_x,
    };
    for (i, line) in raw.rows.iter().enumerate() {
        let f = csv_fields(line)?;
        if f.len() != n + 2 {
            return Err(EncodeError::Format(format!(
                "row {i} has {} fields, expected {}",
                f.len(),
                n + 2
            )));
        }
        let coefs: Vec<f64> = f[..n].iter().map(|s| number(s)).collect::<Result<_, _>>()?;
        let sense = match f[n].as_str() {
            "<=" => ConstraintSense::Le,
            ">=" => ConstraintSense::Ge,
            "=" | "==" => ConstraintSense::Eq,
            other => return Err(EncodeError::Format(format!("row {i}: unknown sense {other:?}"))),
        };
        let (ax, ay) = scatter(&coefs);
        milp.a_x.push(ax);
        milp.a_y.push(ay);
        milp.row_sense.push(sense);
        milp.b.push(number(&f[n + 1])?);
    }
    if !milp.integer_x.is_empty() {
        let before = milp.c_y.len();
        milp = expand_integers(&milp, &bounds);
        for k in before..milp.c_y.len() {
            y_names.push(format!("bit{}", k - before));
        }
    }
    milp.check()?;
    Ok(MilpFile {
        milp,
        x_names,
        y_names,
        variables: raw.variables,
    })
}
