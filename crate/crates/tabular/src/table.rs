//! Column-oriented tables with per-cell missing flags.

use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Result, TabularError};

/// Name of the boolean column that marks train rows in a combined table.
pub const TRACKING_COLUMN: &str = "__is_train__";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DType {
    Int,
    Float,
    Bool,
    Category,
    Text,
    Datetime,
}

impl DType {
    pub fn is_numeric(self) -> bool {
        matches!(self, DType::Int | DType::Float)
    }

    /// String-valued dtypes (the ones encoders act on).
    pub fn is_stringly(self) -> bool {
        matches!(self, DType::Category | DType::Text | DType::Datetime)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            DType::Int => "int64",
            DType::Float => "float64",
            DType::Bool => "bool",
            DType::Category => "category",
            DType::Text => "object",
            DType::Datetime => "datetime64[ns]",
        }
    }

    pub fn parse(s: &str) -> Option<DType> {
        Some(match s.trim().to_ascii_lowercase().as_str() {
            "int" | "int64" | "int32" | "integer" => DType::Int,
            "float" | "float64" | "float32" | "double" => DType::Float,
            "bool" | "boolean" => DType::Bool,
            "category" | "categorical" => DType::Category,
            "text" | "str" | "string" | "object" => DType::Text,
            "datetime" | "datetime64" | "datetime64[ns]" => DType::Datetime,
            _ => return None,
        })
    }
}

impl fmt::Display for DType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A single non-missing cell value.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Value {
    Int(i64),
    Float(f64),
    Bool(bool),
    Str(String),
}

impl Value {
    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Value::Int(v) => Some(*v as f64),
            Value::Float(v) => Some(*v),
            Value::Bool(b) => Some(if *b { 1.0 } else { 0.0 }),
            Value::Str(_) => None,
        }
    }

    /// Rendering used for CSV output, category labels and one-hot suffixes.
    pub fn render(&self) -> String {
        match self {
            Value::Int(v) => v.to_string(),
            Value::Float(v) => format_float(*v),
            Value::Bool(true) => "True".to_string(),
            Value::Bool(false) => "False".to_string(),
            Value::Str(s) => s.clone(),
        }
    }

    /// Interpret a JSON literal as a cell value.
    pub fn from_json(v: &serde_json::Value) -> Option<Value> {
        match v {
            serde_json::Value::Bool(b) => Some(Value::Bool(*b)),
            serde_json::Value::Number(n) => match n.as_i64() {
                Some(i) => Some(Value::Int(i)),
                None => n.as_f64().filter(|f| f.is_finite()).map(Value::Float),
            },
            serde_json::Value::String(s) => Some(Value::Str(s.clone())),
            _ => None,
        }
    }
}

/// Shortest round-trip float rendering that always keeps a decimal point or
/// exponent, so re-reading a float column never narrows it to integers.
pub fn format_float(v: f64) -> String {
    format!("{v:?}")
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum ColumnData {
    Int(Vec<Option<i64>>),
    Float(Vec<Option<f64>>),
    Bool(Vec<Option<bool>>),
    Category(Vec<Option<String>>),
    Text(Vec<Option<String>>),
    Datetime(Vec<Option<String>>),
}

impl ColumnData {
    pub fn len(&self) -> usize {
        match self {
            ColumnData::Int(v) => v.len(),
            ColumnData::Float(v) => v.len(),
            ColumnData::Bool(v) => v.len(),
            ColumnData::Category(v) | ColumnData::Text(v) | ColumnData::Datetime(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dtype(&self) -> DType {
        match self {
            ColumnData::Int(_) => DType::Int,
            ColumnData::Float(_) => DType::Float,
            ColumnData::Bool(_) => DType::Bool,
            ColumnData::Category(_) => DType::Category,
            ColumnData::Text(_) => DType::Text,
            ColumnData::Datetime(_) => DType::Datetime,
        }
    }

    /// An all-missing column of the given dtype.
    pub fn missing(dtype: DType, len: usize) -> ColumnData {
        match dtype {
            DType::Int => ColumnData::Int(vec![None; len]),
            DType::Float => ColumnData::Float(vec![None; len]),
            DType::Bool => ColumnData::Bool(vec![None; len]),
            DType::Category => ColumnData::Category(vec![None; len]),
            DType::Text => ColumnData::Text(vec![None; len]),
            DType::Datetime => ColumnData::Datetime(vec![None; len]),
        }
    }

    /// Build a column of `dtype` from generic values; values that cannot be
    /// represented in the dtype are an error.
    pub fn from_values(dtype: DType, values: &[Option<Value>]) -> Result<ColumnData> {
        let bad = |v: &Value| {
            TabularError::InvalidArgument(format!("cannot store {} in a {} column", v.render(), dtype))
        };
        Ok(match dtype {
            DType::Int => ColumnData::Int(
                values
                    .iter()
                    .map(|v| match v {
                        None => Ok(None),
                        Some(Value::Int(i)) => Ok(Some(*i)),
                        Some(Value::Bool(b)) => Ok(Some(*b as i64)),
                        Some(Value::Float(f)) if f.fract() == 0.0 && f.abs() < 9.0e15 => Ok(Some(*f as i64)),
                        Some(other) => Err(bad(other)),
                    })
                    .collect::<Result<_>>()?,
            ),
            DType::Float => ColumnData::Float(
                values
                    .iter()
                    .map(|v| match v {
                        None => Ok(None),
                        Some(Value::Str(s)) => s
                            .trim()
                            .parse::<f64>()
                            .ok()
                            .filter(|f| f.is_finite())
                            .map(Some)
                            .ok_or_else(|| bad(&Value::Str(s.clone()))),
                        Some(other) => Ok(other.as_f64()),
                    })
                    .collect::<Result<_>>()?,
            ),
            DType::Bool => ColumnData::Bool(
                values
                    .iter()
                    .map(|v| match v {
                        None => Ok(None),
                        Some(Value::Bool(b)) => Ok(Some(*b)),
                        Some(Value::Int(i)) if *i == 0 || *i == 1 => Ok(Some(*i == 1)),
                        Some(Value::Float(f)) if *f == 0.0 || *f == 1.0 => Ok(Some(*f == 1.0)),
                        Some(Value::Str(s)) => parse_bool(s).map(Some).ok_or_else(|| bad(&Value::Str(s.clone()))),
                        Some(other) => Err(bad(other)),
                    })
                    .collect::<Result<_>>()?,
            ),
            DType::Category | DType::Text | DType::Datetime => {
                let strings: Vec<Option<String>> = values.iter().map(|v| v.as_ref().map(Value::render)).collect();
                match dtype {
                    DType::Category => ColumnData::Category(strings),
                    DType::Text => ColumnData::Text(strings),
                    _ => ColumnData::Datetime(strings),
                }
            }
        })
    }

    pub fn get(&self, i: usize) -> Option<Value> {
        match self {
            ColumnData::Int(v) => v[i].map(Value::Int),
            ColumnData::Float(v) => v[i].map(Value::Float),
            ColumnData::Bool(v) => v[i].map(Value::Bool),
            ColumnData::Category(v) | ColumnData::Text(v) | ColumnData::Datetime(v) => {
                v[i].as_ref().map(|s| Value::Str(s.clone()))
            }
        }
    }

    pub fn is_missing(&self, i: usize) -> bool {
        match self {
            ColumnData::Int(v) => v[i].is_none(),
            ColumnData::Float(v) => v[i].is_none(),
            ColumnData::Bool(v) => v[i].is_none(),
            ColumnData::Category(v) | ColumnData::Text(v) | ColumnData::Datetime(v) => v[i].is_none(),
        }
    }

    pub fn values(&self) -> Vec<Option<Value>> {
        (0..self.len()).map(|i| self.get(i)).collect()
    }

    pub fn missing_count(&self) -> usize {
        (0..self.len()).filter(|&i| self.is_missing(i)).count()
    }

    /// Numeric view (bools become 0/1); `None` for string dtypes.
    pub fn to_f64(&self) -> Option<Vec<Option<f64>>> {
        match self {
            ColumnData::Int(v) => Some(v.iter().map(|x| x.map(|i| i as f64)).collect()),
            ColumnData::Float(v) => Some(v.clone()),
            ColumnData::Bool(v) => Some(v.iter().map(|x| x.map(|b| if b { 1.0 } else { 0.0 })).collect()),
            _ => None,
        }
    }

    /// String view of every cell, using [`Value::render`].
    pub fn to_strings(&self) -> Vec<Option<String>> {
        (0..self.len()).map(|i| self.get(i).map(|v| v.render())).collect()
    }

    pub fn take(&self, idx: &[usize]) -> ColumnData {
        fn pick<T: Clone>(v: &[T], idx: &[usize]) -> Vec<T> {
            idx.iter().map(|&i| v[i].clone()).collect()
        }
        match self {
            ColumnData::Int(v) => ColumnData::Int(pick(v, idx)),
            ColumnData::Float(v) => ColumnData::Float(pick(v, idx)),
            ColumnData::Bool(v) => ColumnData::Bool(pick(v, idx)),
            ColumnData::Category(v) => ColumnData::Category(pick(v, idx)),
            ColumnData::Text(v) => ColumnData::Text(pick(v, idx)),
            ColumnData::Datetime(v) => ColumnData::Datetime(pick(v, idx)),
        }
    }

    /// Append `other` (same dtype required).
    pub fn extend(&mut self, other: &ColumnData) -> bool {
        match (self, other) {
            (ColumnData::Int(a), ColumnData::Int(b)) => a.extend_from_slice(b),
            (ColumnData::Float(a), ColumnData::Float(b)) => a.extend_from_slice(b),
            (ColumnData::Bool(a), ColumnData::Bool(b)) => a.extend_from_slice(b),
            (ColumnData::Category(a), ColumnData::Category(b))
            | (ColumnData::Text(a), ColumnData::Text(b))
            | (ColumnData::Datetime(a), ColumnData::Datetime(b)) => a.extend_from_slice(b),
            _ => return false,
        }
        true
    }

    /// Distinct non-missing values in first-seen order.
    pub fn distinct_strings(&self) -> Vec<String> {
        let mut seen = HashSet::new();
        let mut out = Vec::new();
        for s in self.to_strings().into_iter().flatten() {
            if seen.insert(s.clone()) {
                out.push(s);
            }
        }
        out
    }
}

pub fn parse_bool(s: &str) -> Option<bool> {
    match s {
        "True" | "true" | "TRUE" => Some(true),
        "False" | "false" | "FALSE" => Some(false),
        _ => None,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Column {
    pub name: String,
    pub data: ColumnData,
}

impl Column {
    pub fn new(name: impl Into<String>, data: ColumnData) -> Self {
        Column { name: name.into(), data }
    }

    pub fn dtype(&self) -> DType {
        self.data.dtype()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }
}

/// An ordered set of equal-length, uniquely named columns.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Table {
    columns: Vec<Column>,
    n_rows: usize,
}

impl Table {
    pub fn new(columns: Vec<Column>) -> Result<Table> {
        let n_rows = columns.first().map_or(0, Column::len);
        let mut seen = HashSet::new();
        for c in &columns {
            if c.len() != n_rows {
                return Err(TabularError::LengthMismatch { expected: n_rows, got: c.len() });
            }
            if !seen.insert(c.name.as_str()) {
                return Err(TabularError::DuplicateColumn(c.name.clone()));
            }
        }
        Ok(Table { columns, n_rows })
    }

    /// A table with rows but no columns yet.
    pub fn empty_with_rows(n_rows: usize) -> Table {
        Table { columns: Vec::new(), n_rows }
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.columns.len()
    }

    pub fn columns(&self) -> &[Column] {
        &self.columns
    }

    pub fn into_columns(self) -> Vec<Column> {
        self.columns
    }

    pub fn column_names(&self) -> Vec<String> {
        self.columns.iter().map(|c| c.name.clone()).collect()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.name == name)
    }

    pub fn has_column(&self, name: &str) -> bool {
        self.index_of(name).is_some()
    }

    pub fn column(&self, name: &str) -> Result<&Column> {
        self.columns
            .iter()
            .find(|c| c.name == name)
            .ok_or_else(|| TabularError::UnknownColumn(vec![name.to_string()]))
    }

    /// Fail with every unknown name at once.
    pub fn require_columns<S: AsRef<str>>(&self, names: &[S]) -> Result<()> {
        let missing: Vec<String> = names
            .iter()
            .map(AsRef::as_ref)
            .filter(|n| !self.has_column(n))
            .map(str::to_string)
            .collect();
        if missing.is_empty() {
            Ok(())
        } else {
            Err(TabularError::UnknownColumn(missing))
        }
    }

    /// Replace the column with the same name, or append it.
    pub fn with_column(&self, column: Column) -> Result<Table> {
        if column.len() != self.n_rows && !(self.columns.is_empty() && self.n_rows == 0) {
            return Err(TabularError::LengthMismatch { expected: self.n_rows, got: column.len() });
        }
        let mut out = self.clone();
        out.n_rows = column.len();
        match out.index_of(&column.name) {
            Some(i) => out.columns[i] = column,
            None => out.columns.push(column),
        }
        Ok(out)
    }

    pub fn without_columns<S: AsRef<str>>(&self, names: &[S]) -> Result<Table> {
        self.require_columns(names)?;
        let drop: HashSet<&str> = names.iter().map(AsRef::as_ref).collect();
        Ok(Table {
            columns: self.columns.iter().filter(|c| !drop.contains(c.name.as_str())).cloned().collect(),
            n_rows: self.n_rows,
        })
    }

    pub fn select<S: AsRef<str>>(&self, names: &[S]) -> Result<Table> {
        self.require_columns(names)?;
        let cols = names
            .iter()
            .map(|n| self.column(n.as_ref()).cloned())
            .collect::<Result<Vec<_>>>()?;
        let mut t = Table::new(cols)?;
        t.n_rows = self.n_rows;
        Ok(t)
    }

    pub fn take_rows(&self, idx: &[usize]) -> Table {
        Table {
            columns: self.columns.iter().map(|c| Column::new(c.name.clone(), c.data.take(idx))).collect(),
            n_rows: idx.len(),
        }
    }

    pub fn filter_rows(&self, keep: &[bool]) -> Table {
        let idx: Vec<usize> = keep.iter().enumerate().filter(|(_, k)| **k).map(|(i, _)| i).collect();
        self.take_rows(&idx)
    }

    pub fn missing_cells(&self) -> usize {
        self.columns.iter().map(|c| c.data.missing_count()).sum()
    }

    pub fn cell(&self, row: usize, col: usize) -> Option<Value> {
        self.columns[col].data.get(row)
    }

    /// Short human-readable description used in tool messages.
    pub fn summary(&self) -> String {
        let cols: Vec<String> = self.columns.iter().map(|c| format!("{}: {}", c.name, c.dtype())).collect();
        format!("DataFrame with {} rows and {} columns [{}]", self.n_rows, self.columns.len(), cols.join(", "))
    }
}
