//! A small, solver-neutral representation of a (binary) linear program, with
//! CPLEX-LP and MPS writers.
//!
//! The objective is always maximized. Both text formats lack an objective
//! constant, so it is written as a comment and callers add it back.

use std::collections::HashSet;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VarKind {
    Binary,
    Continuous,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Column {
    pub name: String,
    pub kind: VarKind,
    pub lower: f64,
    pub upper: f64,
}

impl Column {
    pub fn is_fixed(&self) -> bool {
        self.lower == self.upper
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sense {
    #[serde(rename = "<=")]
    Le,
    #[serde(rename = ">=")]
    Ge,
    #[serde(rename = "=")]
    Eq,
}

impl Sense {
    fn lp_symbol(self) -> &'static str {
        match self {
            Sense::Le => "<=",
            Sense::Ge => ">=",
            Sense::Eq => "=",
        }
    }

    fn mps_code(self) -> &'static str {
        match self {
            Sense::Le => "L",
            Sense::Ge => "G",
            Sense::Eq => "E",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Row {
    pub name: String,
    pub coeffs: Vec<(usize, f64)>,
    pub sense: Sense,
    pub rhs: f64,
}

impl Row {
    pub fn activity(&self, x: &[f64]) -> f64 {
        self.coeffs.iter().map(|&(j, a)| a * x[j]).sum()
    }

    /// Amount by which `activity` violates the row (0 when satisfied).
    pub fn violation(&self, activity: f64) -> f64 {
        match self.sense {
            Sense::Le => (activity - self.rhs).max(0.0),
            Sense::Ge => (self.rhs - activity).max(0.0),
            Sense::Eq => (activity - self.rhs).abs(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Objective {
    pub coeffs: Vec<(usize, f64)>,
    pub constant: f64,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("row {row} references column {column} which does not exist")]
    UnknownColumn { row: String, column: usize },
    #[error("row {row} mentions column {column} twice")]
    DuplicateColumn { row: String, column: usize },
    #[error("row {0} has no coefficients")]
    EmptyRow(String),
    #[error("column {name} has bounds [{lower}, {upper}]")]
    BadBounds { name: String, lower: f64, upper: f64 },
    #[error("non-finite coefficient in {0}")]
    NonFinite(String),
}

/// A maximization problem `max c·x + k` subject to linear rows and column bounds.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MilpModel {
    pub name: String,
    columns: Vec<Column>,
    rows: Vec<Row>,
    objective: Objective,
}

/// A row not satisfied by an assignment.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RowViolation {
    pub row: String,
    pub activity: f64,
    pub rhs: f64,
}

impl MilpModel {
    pub fn new(name: impl Into<String>) -> Self {
        MilpModel { name: name.into(), ..Default::default() }
    }

    pub fn add_column(&mut self, name: impl Into<String>, kind: VarKind, lower: f64, upper: f64) -> Result<usize, ModelError> {
        let name = name.into();
        let bad = lower > upper
            || lower.is_nan()
            || upper.is_nan()
            || (kind == VarKind::Binary && (lower < 0.0 || upper > 1.0 || lower.fract() != 0.0 || upper.fract() != 0.0));
        if bad {
            return Err(ModelError::BadBounds { name, lower, upper });
        }
        self.columns.push(Column { name, kind, lower, upper });
        Ok(self.columns.len() - 1)
    }

    pub fn add_row(&mut self, name: impl Into<String>, coeffs: Vec<(usize, f64)>, sense: Sense, rhs: f64) -> Result<usize, ModelError> {
        let name = name.into();
        if coeffs.is_empty() {
            return Err(ModelError::EmptyRow(name));
        }
        let mut seen = HashSet::with_capacity(coeffs.len());
        for &(column, a) in &coeffs {
            if column >= self.columns.len() {
                return Err(ModelError::UnknownColumn { row: name, column });
            }
            if !seen.insert(column) {
                return Err(ModelError::DuplicateColumn { row: name, column });
            }
            if !a.is_finite() {
                return Err(ModelError::NonFinite(name));
            }
        }
        if !rhs.is_finite() {
            return Err(ModelError::NonFinite(name));
        }
        self.rows.push(Row { name, coeffs, sense, rhs });
        Ok(self.rows.len() - 1)
    }

    pub fn set_objective(&mut self, coeffs: Vec<(usize, f64)>, constant: f64) -> Result<(), ModelError> {
        let mut seen = HashSet::with_capacity(coeffs.len());
        for &(column, a) in &coeffs {
            if column >= self.columns.len() {
                return Err(ModelError::UnknownColumn { row: "objective".into(), column });
            }
            if !seen.insert(column) {
                return Err(ModelError::DuplicateColumn { row: "objective".into(), column });
            }
            if !a.is_finite() {
                return Err(ModelError::NonFinite("objective".into()));
            }
        }
        self.objective = Objective { coeffs, constant };
        Ok(())
    }

    pub fn set_bounds(&mut self, column: usize, lower: f64, upper: f64) -> Result<(), ModelError> {
        let col = &self.columns[column];
        if lower > upper || (col.kind == VarKind::Binary && (lower < 0.0 || upper > 1.0)) {
            return Err(ModelError::BadBounds { name: col.name.clone(), lower, upper });
        }
        let col = &mut self.columns[column];
        col.lower = lower;
        col.upper = upper;
        Ok(())
    }

    pub fn columns(&self) -> &[Column] {
        &self.columns
    }

    pub fn rows(&self) -> &[Row] {
        &self.rows
    }

    pub fn objective(&self) -> &Objective {
        &self.objective
    }

    pub fn column_count(&self) -> usize {
        self.columns.len()
    }

    pub fn row_count(&self) -> usize {
        self.rows.len()
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.name == name)
    }

    /// Objective value including the constant.
    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.objective.constant + self.objective.coeffs.iter().map(|&(j, c)| c * x[j]).sum::<f64>()
    }

    /// Dense objective vector (without the constant).
    pub fn objective_dense(&self) -> Vec<f64> {
        let mut c = vec![0.0; self.columns.len()];
        for &(j, a) in &self.objective.coeffs {
            c[j] = a;
        }
        c
    }

    /// Rows violated by `x` beyond `tol · max(1, |rhs|)`, plus bound violations
    /// reported under the column name.
    pub fn violations(&self, x: &[f64], tol: f64) -> Vec<RowViolation> {
        let mut out = Vec::new();
        for (col, &value) in self.columns.iter().zip(x) {
            if value < col.lower - tol || value > col.upper + tol {
                out.push(RowViolation { row: col.name.clone(), activity: value, rhs: if value < col.lower { col.lower } else { col.upper } });
            }
        }
        for row in &self.rows {
            let act = row.activity(x);
            if row.violation(act) > tol * row.rhs.abs().max(1.0) {
                out.push(RowViolation { row: row.name.clone(), activity: act, rhs: row.rhs });
            }
        }
        out
    }

    pub fn is_feasible(&self, x: &[f64], tol: f64) -> bool {
        x.len() == self.columns.len() && self.violations(x, tol).is_empty()
    }

    /// True when every binary column has an integral value within `tol`.
    pub fn is_integral(&self, x: &[f64], tol: f64) -> bool {
        self.columns.iter().zip(x).all(|(c, &v)| c.kind != VarKind::Binary || (v - v.round()).abs() <= tol)
    }
}

const MAX_LP_LINE: usize = 255;

fn fmt_num(x: f64) -> String {
    if x == 0.0 {
        "0".to_string()
    } else {
        format!("{x}")
    }
}

/// Appends `tokens` after `head`, wrapping before a line would exceed 255 chars.
fn push_wrapped(out: &mut String, head: &str, tokens: &[String]) {
    let mut line = head.to_string();
    for tok in tokens {
        if line.len() + 1 + tok.len() > MAX_LP_LINE && !line.trim().is_empty() {
            out.push_str(&line);
            out.push('\n');
            line = String::from(" ");
            line.push_str(tok);
        } else {
            if !line.is_empty() {
                line.push(' ');
            }
            line.push_str(tok);
        }
    }
    out.push_str(&line);
    out.push('\n');
}

fn linear_tokens(coeffs: &[(usize, f64)], columns: &[Column]) -> Vec<String> {
    let mut tokens = Vec::with_capacity(coeffs.len() * 2);
    for (k, &(j, a)) in coeffs.iter().enumerate() {
        let name = &columns[j].name;
        let mag = a.abs();
        let term = if mag == 1.0 { name.clone() } else { format!("{} {}", fmt_num(mag), name) };
        if k == 0 {
            tokens.push(if a < 0.0 { format!("-{term}") } else { term });
        } else {
            tokens.push(format!("{} {}", if a < 0.0 { "-" } else { "+" }, term));
        }
    }
    tokens
}

fn binary_proper(c: &Column) -> bool {
    c.kind == VarKind::Binary && c.lower == 0.0 && c.upper == 1.0
}

/// Writes the model in CPLEX LP format.
///
/// Binary columns with bounds [0, 1] go to `Binaries`; columns whose bounds
/// were tightened to a single value are written as fixed bounds instead.
pub fn export_lp(model: &MilpModel) -> String {
    let mut out = String::new();
    if model.objective.constant != 0.0 {
        let _ = writeln!(out, "\\ objective constant = {}", fmt_num(model.objective.constant));
    }
    out.push_str("Maximize\n");
    push_wrapped(&mut out, " obj:", &linear_tokens(&model.objective.coeffs, &model.columns));
    out.push_str("Subject To\n");
    for row in &model.rows {
        let mut tokens = linear_tokens(&row.coeffs, &model.columns);
        tokens.push(format!("{} {}", row.sense.lp_symbol(), fmt_num(row.rhs)));
        push_wrapped(&mut out, &format!(" {}:", row.name), &tokens);
    }

    let mut bounds = Vec::new();
    for c in &model.columns {
        if binary_proper(c) {
            continue;
        }
        if c.is_fixed() {
            bounds.push(format!(" {} = {}", c.name, fmt_num(c.lower)));
            continue;
        }
        match (c.lower, c.upper) {
            (l, u) if l == f64::NEG_INFINITY && u == f64::INFINITY => bounds.push(format!(" {} free", c.name)),
            (l, u) if l == 0.0 && u == f64::INFINITY => {}
            (l, u) if u == f64::INFINITY => bounds.push(format!(" {} >= {}", c.name, fmt_num(l))),
            (l, u) if l == f64::NEG_INFINITY => bounds.push(format!(" -inf <= {} <= {}", c.name, fmt_num(u))),
            (l, u) => bounds.push(format!(" {} <= {} <= {}", fmt_num(l), c.name, fmt_num(u))),
        }
    }
    if !bounds.is_empty() {
        out.push_str("Bounds\n");
        for b in bounds {
            out.push_str(&b);
            out.push('\n');
        }
    }
    let binaries: Vec<&Column> = model.columns.iter().filter(|c| binary_proper(c)).collect();
    if !binaries.is_empty() {
        out.push_str("Binaries\n");
        for c in binaries {
            let _ = writeln!(out, " {}", c.name);
        }
    }
    out.push_str("End\n");
    out
}

fn mps_entry(out: &mut String, column: &str, row: &str, value: f64) {
    let _ = writeln!(out, "    {column:<8}  {row:<8}  {}", fmt_num(value));
}

/// Writes the model in MPS with fixed-field column positions (names longer than
/// eight characters widen their field but stay whitespace separated).
pub fn export_mps(model: &MilpModel) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "* objective sense: maximize");
    if model.objective.constant != 0.0 {
        let _ = writeln!(out, "* objective constant = {}", fmt_num(model.objective.constant));
    }
    let name = if model.name.is_empty() { "MODEL" } else { model.name.as_str() };
    let _ = writeln!(out, "NAME          {name}");
    out.push_str("OBJSENSE\n    MAX\n");
    out.push_str("ROWS\n");
    out.push_str(" N  obj\n");
    for row in &model.rows {
        let _ = writeln!(out, " {}  {}", row.sense.mps_code(), row.name);
    }

    let mut by_column: Vec<Vec<(&str, f64)>> = vec![Vec::new(); model.columns.len()];
    for &(j, c) in &model.objective.coeffs {
        if c != 0.0 {
            by_column[j].push(("obj", c));
        }
    }
    for row in &model.rows {
        for &(j, a) in &row.coeffs {
            by_column[j].push((row.name.as_str(), a));
        }
    }
    out.push_str("COLUMNS\n");
    for (col, entries) in model.columns.iter().zip(&by_column) {
        if entries.is_empty() {
            // keep the column declared
            mps_entry(&mut out, &col.name, "obj", 0.0);
        }
        for &(row, a) in entries {
            mps_entry(&mut out, &col.name, row, a);
        }
    }
    out.push_str("RHS\n");
    for row in &model.rows {
        if row.rhs != 0.0 {
            mps_entry(&mut out, "RHS", &row.name, row.rhs);
        }
    }
    out.push_str("BOUNDS\n");
    for c in &model.columns {
        let mut bound = |code: &str, value: Option<f64>| match value {
            Some(v) => {
                let _ = writeln!(out, " {code} BND       {:<8}  {}", c.name, fmt_num(v));
            }
            None => {
                let _ = writeln!(out, " {code} BND       {}", c.name);
            }
        };
        if binary_proper(c) {
            bound("BV", None);
        } else if c.is_fixed() {
            bound("FX", Some(c.lower));
        } else {
            match (c.lower, c.upper) {
                (l, u) if l == f64::NEG_INFINITY && u == f64::INFINITY => bound("FR", None),
                (l, u) => {
                    if l == f64::NEG_INFINITY {
                        bound("MI", None);
                    } else if l != 0.0 {
                        bound("LO", Some(l));
                    }
                    if u != f64::INFINITY {
                        bound("UP", Some(u));
                    }
                }
            }
        }
    }
    out.push_str("ENDATA\n");
    out
}
