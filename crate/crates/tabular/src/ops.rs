//! Cleaning, combination, encoding and feature operations over [`Table`]s.
//!
//! Every function is pure: it takes tables by reference and returns new ones.

use std::collections::{BTreeSet, HashMap};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Result, TabularError};
use crate::expr::{self, Series};
use crate::metrics::MetricsReport;
use crate::table::{Column, ColumnData, DType, Table, Value, TRACKING_COLUMN};

// ---------------------------------------------------------------------------
// Summaries

/// Per-column `<col>.missing_count` and `<col>.missing_fraction`.
pub fn missing_summary(df: &Table) -> MetricsReport {
    let mut report = MetricsReport::default();
    for c in df.columns() {
        let n = c.data.missing_count();
        let frac = if df.n_rows() == 0 { 0.0 } else { n as f64 / df.n_rows() as f64 };
        report.push(format!("{}.missing_count", c.name), n as f64);
        report.push(format!("{}.missing_fraction", c.name), frac);
    }
    report
}

/// One line per column: name, dtype, distinct and missing counts.
pub fn dtypes_summary(df: &Table) -> String {
    let mut lines = vec![format!("{} rows x {} columns", df.n_rows(), df.n_cols())];
    for c in df.columns() {
        lines.push(format!(
            "{}: {} (unique={}, missing={})",
            c.name,
            c.dtype(),
            c.data.distinct_strings().len(),
            c.data.missing_count()
        ));
    }
    lines.join("\n")
}

/// Distinct values of `column` with their counts, in first-seen order or
/// sorted by value string.
pub fn unique_values(df: &Table, column: &str, sort: bool) -> Result<Table> {
    let col = df.column(column)?;
    let mut counts: HashMap<String, i64> = HashMap::new();
    let mut order: Vec<Value> = Vec::new();
    for v in col.data.values().into_iter().flatten() {
        let key = v.render();
        let e = counts.entry(key).or_insert(0);
        if *e == 0 {
            order.push(v);
        }
        *e += 1;
    }
    if sort {
        order.sort_by(|a, b| match (a.as_f64(), b.as_f64()) {
            (Some(x), Some(y)) if !matches!(a, Value::Str(_)) => x.total_cmp(&y),
            _ => a.render().cmp(&b.render()),
        });
    }
    let count = ColumnData::Int(order.iter().map(|v| Some(counts[&v.render()])).collect());
    let values = ColumnData::from_values(col.dtype(), &order.into_iter().map(Some).collect::<Vec<_>>())?;
    Table::new(vec![Column::new(column, values), Column::new("count", count)])
}

// ---------------------------------------------------------------------------
// Aggregation

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Agg {
    Mean,
    Median,
    Mode,
    Sum,
    Count,
    Min,
    Max,
    Std,
}

impl FromStr for Agg {
    type Err = TabularError;

    fn from_str(s: &str) -> Result<Agg> {
        Ok(match s {
            "mean" => Agg::Mean,
            "median" => Agg::Median,
            "mode" => Agg::Mode,
            "sum" => Agg::Sum,
            "count" => Agg::Count,
            "min" => Agg::Min,
            "max" => Agg::Max,
            "std" => Agg::Std,
            other => {
                return Err(TabularError::InvalidArgument(format!(
                    "unknown aggregation '{other}' (expected mean, median, mode, sum, count, min, max or std)"
                )))
            }
        })
    }
}

impl Agg {
    fn numeric(self) -> bool {
        !matches!(self, Agg::Mode | Agg::Count)
    }

    /// Aggregate the present cells; `None` when there are none.
    fn apply(self, values: &[Value]) -> Option<Value> {
        if self == Agg::Count {
            return Some(Value::Int(values.len() as i64));
        }
        if values.is_empty() {
            return None;
        }
        if self == Agg::Mode {
            return mode(values);
        }
        let xs: Vec<f64> = values.iter().filter_map(Value::as_f64).collect();
        let n = xs.len() as f64;
        let v = match self {
            Agg::Mean => xs.iter().sum::<f64>() / n,
            Agg::Median => median(&xs),
            Agg::Sum => xs.iter().sum(),
            Agg::Min => xs.iter().cloned().fold(f64::INFINITY, f64::min),
            Agg::Max => xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
            Agg::Std => {
                if xs.len() < 2 {
                    return None;
                }
                let m = xs.iter().sum::<f64>() / n;
                (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
            }
            Agg::Mode | Agg::Count => unreachable!(),
        };
        Some(Value::Float(v))
    }
}

/// Standard median: the mean of the two middle values for even counts.
pub fn median(xs: &[f64]) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Most frequent value; ties go to the value seen first.
pub fn mode(values: &[Value]) -> Option<Value> {
    let mut counts: HashMap<String, (usize, usize)> = HashMap::new();
    for (i, v) in values.iter().enumerate() {
        counts.entry(v.render()).or_insert((0, i)).0 += 1;
    }
    counts
        .values()
        .max_by(|a, b| a.0.cmp(&b.0).then(b.1.cmp(&a.1)))
        .map(|(_, first)| values[*first].clone())
}

fn present(data: &ColumnData) -> Vec<Value> {
    data.values().into_iter().flatten().collect()
}

fn require_numeric(col: &Column, strategy: &str) -> Result<()> {
    if col.dtype().is_numeric() || col.dtype() == DType::Bool {
        Ok(())
    } else {
        Err(TabularError::NonNumericForMean {
            column: col.name.clone(),
            dtype: col.dtype().to_string(),
            strategy: strategy.to_string(),
        })
    }
}

/// Group rows of `group_column` and aggregate `agg_column` per group, in
/// first-seen group order. Rows with a missing key are skipped.
pub fn group_aggregation(df: &Table, group_column: &str, agg_column: &str, agg: Agg) -> Result<Table> {
    let (keys, groups) = groups(df, group_column, agg_column, agg)?;
    let aggregated: Vec<Option<Value>> = keys.iter().map(|k| agg.apply(&groups[&k.render()])).collect();
    let key_data = ColumnData::from_values(df.column(group_column)?.dtype(), &keys.into_iter().map(Some).collect::<Vec<_>>())?;
    let out_dtype = aggregate_dtype(agg, df.column(agg_column)?.dtype());
    Table::new(vec![
        Column::new(group_column, key_data),
        Column::new(format!("{agg_column}_{}", agg_name(agg)), ColumnData::from_values(out_dtype, &aggregated)?),
    ])
}

fn agg_name(agg: Agg) -> &'static str {
    match agg {
        Agg::Mean => "mean",
        Agg::Median => "median",
        Agg::Mode => "mode",
        Agg::Sum => "sum",
        Agg::Count => "count",
        Agg::Min => "min",
        Agg::Max => "max",
        Agg::Std => "std",
    }
}

fn aggregate_dtype(agg: Agg, source: DType) -> DType {
    match agg {
        Agg::Count => DType::Int,
        Agg::Mode => source,
        _ => DType::Float,
    }
}

type Groups = (Vec<Value>, HashMap<String, Vec<Value>>);

fn groups(df: &Table, group_column: &str, agg_column: &str, agg: Agg) -> Result<Groups> {
    df.require_columns(&[group_column, agg_column])?;
    let g = df.column(group_column)?;
    let a = df.column(agg_column)?;
    if agg.numeric() {
        require_numeric(a, agg_name(agg))?;
    }
    let mut keys = Vec::new();
    let mut groups: HashMap<String, Vec<Value>> = HashMap::new();
    for i in 0..df.n_rows() {
        let Some(k) = g.data.get(i) else { continue };
        let entry = groups.entry(k.render()).or_insert_with(|| {
            keys.push(k.clone());
            Vec::new()
        });
        if let Some(v) = a.data.get(i) {
            entry.push(v);
        }
    }
    Ok((keys, groups))
}

/// Broadcast a per-group aggregate back onto every row as `new_column`.
pub fn create_group_aggregation(df: &Table, new_column: &str, group_column: &str, agg_column: &str, agg: Agg) -> Result<Table> {
    let (_, groups) = groups(df, group_column, agg_column, agg)?;
    let per_group: HashMap<&String, Option<Value>> = groups.iter().map(|(k, v)| (k, agg.apply(v))).collect();
    let g = df.column(group_column)?;
    let values: Vec<Option<Value>> = (0..df.n_rows())
        .map(|i| g.data.get(i).and_then(|k| per_group[&k.render()].clone()))
        .collect();
    let dtype = aggregate_dtype(agg, df.column(agg_column)?.dtype());
    df.with_column(Column::new(new_column, ColumnData::from_values(dtype, &values)?))
}

// ---------------------------------------------------------------------------
// Missing values

#[derive(Clone, Debug, PartialEq)]
pub enum FillStrategy {
    Value(Value),
    Mean,
    Median,
    Mode,
}

impl FillStrategy {
    fn name(&self) -> &'static str {
        match self {
            FillStrategy::Value(_) => "fillna_with_value",
            FillStrategy::Mean => "mean imputation",
            FillStrategy::Median => "median imputation",
            FillStrategy::Mode => "mode imputation",
        }
    }
}

/// Replace the missing cells of `data` at `rows` (all rows when `None`)
/// with `fill`. Int columns widen to float for fractional fills; an
/// all-missing column adopts the fill's type.
fn fill_cells(data: &ColumnData, fill: &Value, rows: Option<&[bool]>) -> Result<ColumnData> {
    let mut values = data.values();
    for (i, v) in values.iter_mut().enumerate() {
        if v.is_none() && rows.is_none_or(|r| r[i]) {
            *v = Some(fill.clone());
        }
    }
    let dtype = match (data.dtype(), fill) {
        (DType::Int, Value::Float(f)) if f.fract() != 0.0 => DType::Float,
        (d, _) if data.missing_count() == data.len() => match fill {
            Value::Int(_) if d == DType::Int => DType::Int,
            Value::Int(_) | Value::Float(_) => DType::Float,
            Value::Bool(_) => DType::Bool,
            Value::Str(_) if d.is_stringly() => d,
            Value::Str(_) => DType::Text,
        },
        (DType::Float, Value::Str(_)) | (DType::Int, Value::Str(_)) => {
            return Err(TabularError::ExprType(format!(
                "Invalid fill value '{}' for a {} column",
                fill.render(),
                data.dtype()
            )))
        }
        (d, _) => d,
    };
    ColumnData::from_values(dtype, &values)
}

fn fill_value_for(col: &Column, strategy: &FillStrategy) -> Result<Option<Value>> {
    let vals = present(&col.data);
    Ok(match strategy {
        FillStrategy::Value(v) => Some(v.clone()),
        FillStrategy::Mode => mode(&vals),
        FillStrategy::Mean | FillStrategy::Median => {
            require_numeric(col, strategy.name())?;
            let xs: Vec<f64> = vals.iter().filter_map(Value::as_f64).collect();
            if xs.is_empty() {
                None
            } else if *strategy == FillStrategy::Mean {
                Some(Value::Float(xs.iter().sum::<f64>() / xs.len() as f64))
            } else {
                Some(Value::Float(median(&xs)))
            }
        }
    })
}

/// Fill missing cells of `columns`, or of every applicable column (numeric
/// ones for mean/median) when `columns` is `None`.
pub fn fillna(df: &Table, strategy: &FillStrategy, columns: Option<&[String]>) -> Result<Table> {
    let targets: Vec<String> = match columns {
        Some(cols) => {
            df.require_columns(cols)?;
            cols.to_vec()
        }
        None => df
            .columns()
            .iter()
            .filter(|c| c.name != TRACKING_COLUMN)
            .filter(|c| match strategy {
                FillStrategy::Mean | FillStrategy::Median => c.dtype().is_numeric(),
                _ => true,
            })
            .map(|c| c.name.clone())
            .collect(),
    };
    let mut out = df.clone();
    for name in &targets {
        let col = df.column(name)?;
        let fill = fill_value_for(col, strategy)?;
        if col.data.missing_count() == 0 {
            continue;
        }
        if let Some(fill) = fill {
            out = out.with_column(Column::new(name.clone(), fill_cells(&col.data, &fill, None)?))?;
        }
    }
    Ok(out)
}

/// Fill missing cells of `target_column` in rows where `condition` holds.
pub fn fillna_with_condition(df: &Table, target_column: &str, condition: &str, value: &Value) -> Result<Table> {
    fillna_with_multiple_conditions(df, target_column, &[(condition.to_string(), value.clone())])
}

/// Each missing cell of `target_column` takes the value of the first rule
/// whose condition holds in its row.
pub fn fillna_with_multiple_conditions(df: &Table, target_column: &str, rules: &[(String, Value)]) -> Result<Table> {
    let mut data = df.column(target_column)?.data.clone();
    let mut claimed = vec![false; df.n_rows()];
    for (cond, value) in rules {
        let mask = expr::eval_mask(&expr::parse(cond)?, df)?;
        let rows: Vec<bool> = (0..df.n_rows()).map(|i| mask[i] && !claimed[i] && data.is_missing(i)).collect();
        for (i, r) in rows.iter().enumerate() {
            claimed[i] |= *r;
        }
        data = fill_cells(&data, value, Some(&rows))?;
    }
    df.with_column(Column::new(target_column, data))
}

/// Fill missing cells of `target_column` with the aggregate of the target
/// within the row's `group_column` group, falling back to the aggregate over
/// the whole column. `groups`, when given, restricts which groups are filled.
pub fn fillna_with_conditional_aggregation(
    df: &Table,
    target_column: &str,
    group_column: &str,
    agg: Agg,
    groups_filter: Option<&[Value]>,
) -> Result<Table> {
    if agg == Agg::Count {
        return Err(TabularError::InvalidArgument("count is not a fill aggregation".into()));
    }
    let (_, groups) = groups(df, group_column, target_column, agg)?;
    let target = df.column(target_column)?;
    let global = agg.apply(&present(&target.data));
    let allowed: Option<BTreeSet<String>> = groups_filter.map(|g| g.iter().map(Value::render).collect());
    let key = df.column(group_column)?;
    let mut values = target.data.values();
    for (i, v) in values.iter_mut().enumerate() {
        if v.is_some() {
            continue;
        }
        let k = key.data.get(i).map(|k| k.render());
        if let (Some(allowed), Some(k)) = (&allowed, &k) {
            if !allowed.contains(k) {
                continue;
            }
        }
        if allowed.is_some() && k.is_none() {
            continue;
        }
        *v = k.and_then(|k| agg.apply(&groups[&k])).or_else(|| global.clone());
    }
    let mut data = target.data.clone();
    for (i, v) in values.into_iter().enumerate() {
        if let (Some(v), true) = (v, data.is_missing(i)) {
            let mut mask = vec![false; df.n_rows()];
            mask[i] = true;
            data = fill_cells(&data, &v, Some(&mask))?;
        }
    }
    df.with_column(Column::new(target_column, data))
}

/// Drop rows with missing cells among `columns` (all columns when `None`).
/// With `thresh`, keep rows having at least that many present cells instead.
pub fn drop_rows_with_missing(df: &Table, columns: Option<&[String]>, thresh: Option<usize>) -> Result<Table> {
    let cols: Vec<&Column> = match columns {
        Some(names) => {
            df.require_columns(names)?;
            names.iter().map(|n| df.column(n)).collect::<Result<_>>()?
        }
        None => df.columns().iter().collect(),
    };
    let keep: Vec<bool> = (0..df.n_rows())
        .map(|i| {
            let present = cols.iter().filter(|c| !c.data.is_missing(i)).count();
            match thresh {
                Some(t) => present >= t,
                None => present == cols.len(),
            }
        })
        .collect();
    Ok(df.filter_rows(&keep))
}

// ---------------------------------------------------------------------------
// Combination

/// Common dtype for two columns sharing a name, if any.
fn unify(a: &ColumnData, b: &ColumnData) -> Option<DType> {
    let (da, db) = (a.dtype(), b.dtype());
    if da == db {
        return Some(da);
    }
    if a.missing_count() == a.len() {
        return Some(db);
    }
    if b.missing_count() == b.len() {
        return Some(da);
    }
    match (da, db) {
        (DType::Int, DType::Float) | (DType::Float, DType::Int) => Some(DType::Float),
        (DType::Category, DType::Text) | (DType::Text, DType::Category) => Some(DType::Text),
        _ => None,
    }
}

fn convert(data: &ColumnData, dtype: DType) -> Result<ColumnData> {
    if data.dtype() == dtype {
        Ok(data.clone())
    } else {
        ColumnData::from_values(dtype, &data.values())
    }
}

/// Stack rows of `top` over `bottom`. Columns are the union (first table's
/// order, then new ones); cells absent from one side are missing.
fn stack_rows(top: &Table, bottom: &Table) -> Result<Table> {
    let mut names = top.column_names();
    for n in bottom.column_names() {
        if !names.contains(&n) {
            names.push(n);
        }
    }
    let mut cols = Vec::with_capacity(names.len());
    for name in names {
        let a = top.column(&name).ok();
        let b = bottom.column(&name).ok();
        let (a, b) = match (a, b) {
            (Some(a), Some(b)) => (a.data.clone(), b.data.clone()),
            (Some(a), None) => (a.data.clone(), ColumnData::missing(a.dtype(), bottom.n_rows())),
            (None, Some(b)) => (ColumnData::missing(b.dtype(), top.n_rows()), b.data.clone()),
            (None, None) => unreachable!(),
        };
        let dtype = unify(&a, &b).ok_or_else(|| TabularError::IncompatibleSchemas {
            column: name.clone(),
            left: a.dtype().to_string(),
            right: b.dtype().to_string(),
        })?;
        let mut data = convert(&a, dtype)?;
        data.extend(&convert(&b, dtype)?);
        cols.push(Column::new(name, data));
    }
    Table::new(cols)
}

/// Stack train over test and append the `__is_train__` tracking column.
/// Train columns absent from test (the target) are filled missing for the
/// test rows; test columns unknown to train are rejected.
pub fn concatenate_train_test(train: &Table, test: &Table) -> Result<Table> {
    if let Some(extra) = test.column_names().into_iter().find(|n| !train.has_column(n)) {
        let right = test.column(&extra)?.dtype().to_string();
        return Err(TabularError::IncompatibleSchemas { column: extra, left: "absent".into(), right });
    }
    if train.has_column(TRACKING_COLUMN) || test.has_column(TRACKING_COLUMN) {
        return Err(TabularError::DuplicateColumn(TRACKING_COLUMN.into()));
    }
    let combined = stack_rows(train, test)?;
    let mut flags = vec![Some(true); train.n_rows()];
    flags.extend(std::iter::repeat_n(Some(false), test.n_rows()));
    combined.with_column(Column::new(TRACKING_COLUMN, ColumnData::Bool(flags)))
}

/// Inverse of [`concatenate_train_test`]: rows are split by the tracking
/// column, which is removed from both outputs.
pub fn split_combined(combined: &Table) -> Result<(Table, Table)> {
    let flags = match combined.column(TRACKING_COLUMN) {
        Ok(Column { data: ColumnData::Bool(f), .. }) if f.iter().all(Option::is_some) => {
            f.iter().map(|v| v.unwrap()).collect::<Vec<bool>>()
        }
        _ => return Err(TabularError::TrackingColumnMissing),
    };
    let rest = combined.without_columns(&[TRACKING_COLUMN])?;
    let not: Vec<bool> = flags.iter().map(|f| !f).collect();
    Ok((rest.filter_rows(&flags), rest.filter_rows(&not)))
}

/// Concatenate along rows (`axis = 0`) or columns (`axis = 1`).
pub fn concatenate_dataframes(a: &Table, b: &Table, axis: usize) -> Result<Table> {
    match axis {
        0 => stack_rows(a, b),
        1 => {
            if a.n_rows() != b.n_rows() {
                return Err(TabularError::LengthMismatch { expected: a.n_rows(), got: b.n_rows() });
            }
            let mut cols = a.columns().to_vec();
            cols.extend(b.columns().iter().cloned());
            Table::new(cols)
        }
        other => Err(TabularError::InvalidArgument(format!("No axis named {other} for object type DataFrame"))),
    }
}

// ---------------------------------------------------------------------------
// Encoding

fn categories(data: &ColumnData) -> Vec<String> {
    let mut cats = data.distinct_strings();
    cats.sort();
    cats
}

fn encode_targets(df: &Table, columns: Option<&[String]>) -> Result<Vec<String>> {
    match columns {
        Some(cols) => {
            df.require_columns(cols)?;
            Ok(cols
                .iter()
                .filter(|c| {
                    let d = df.column(c).map(Column::dtype).unwrap_or(DType::Int);
                    d.is_stringly() || d == DType::Bool
                })
                .filter(|c| c.as_str() != TRACKING_COLUMN)
                .cloned()
                .collect())
        }
        None => Ok(df.columns().iter().filter(|c| c.dtype().is_stringly()).map(|c| c.name.clone()).collect()),
    }
}

/// One indicator column `<col>_<cat>` per category, replacing the source
/// column in place. Missing cells are all-zero rows. Numeric columns among
/// `columns` are left untouched.
pub fn one_hot_encode(df: &Table, columns: Option<&[String]>, drop_first: bool) -> Result<Table> {
    let targets = encode_targets(df, columns)?;
    let mut out: Vec<Column> = Vec::new();
    for col in df.columns() {
        if !targets.contains(&col.name) {
            out.push(col.clone());
            continue;
        }
        let cells = col.data.to_strings();
        let cats = categories(&col.data);
        for cat in cats.iter().skip(usize::from(drop_first)) {
            let data = cells.iter().map(|c| Some(i64::from(c.as_deref() == Some(cat.as_str())))).collect();
            out.push(Column::new(format!("{}_{}", col.name, cat), ColumnData::Int(data)));
        }
    }
    Table::new(out)
}

/// Replace each category by its lexicographic rank; missing stays missing.
pub fn label_encode(df: &Table, columns: Option<&[String]>) -> Result<Table> {
    let targets = encode_targets(df, columns)?;
    let mut out = df.clone();
    for name in &targets {
        let col = df.column(name)?;
        let cats = categories(&col.data);
        let rank: HashMap<&str, i64> = cats.iter().enumerate().map(|(i, c)| (c.as_str(), i as i64)).collect();
        let data = col.data.to_strings().iter().map(|c| c.as_deref().map(|s| rank[s])).collect();
        out = out.with_column(Column::new(name.clone(), ColumnData::Int(data)))?;
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Features

pub fn create_numeric_feature(df: &Table, name: &str, expression: &str) -> Result<Table> {
    let series = expr::eval(&expr::parse(expression)?, df)?;
    df.with_column(Column::new(name, series.into_column_data()))
}

/// Column of `true_value` where `condition` holds and `false_value`
/// elsewhere (missing conditions count as false).
pub fn create_conditional_feature(df: &Table, name: &str, condition: &str, true_value: &Value, false_value: &Value) -> Result<Table> {
    let mask = expr::eval_mask(&expr::parse(condition)?, df)?;
    let dtype = match (true_value, false_value) {
        (Value::Int(_), Value::Int(_)) => DType::Int,
        (Value::Bool(_), Value::Bool(_)) => DType::Bool,
        (a, b) if a.as_f64().is_some() && b.as_f64().is_some() => DType::Float,
        _ => DType::Category,
    };
    let values: Vec<Option<Value>> =
        mask.iter().map(|m| Some(if *m { true_value.clone() } else { false_value.clone() })).collect();
    df.with_column(Column::new(name, ColumnData::from_values(dtype, &values)?))
}

/// Map the string form of `source_column` through `mapping` into a new
/// categorical column; unmapped cells take `default` (or stay missing).
pub fn create_categorical_feature(
    df: &Table,
    name: &str,
    source_column: &str,
    mapping: &[(String, Value)],
    default: Option<&Value>,
) -> Result<Table> {
    let src = df.column(source_column)?;
    let lookup: HashMap<&str, &Value> = mapping.iter().map(|(k, v)| (k.as_str(), v)).collect();
    let values: Vec<Option<Value>> = src
        .data
        .to_strings()
        .iter()
        .map(|c| match c {
            Some(s) => lookup.get(s.as_str()).map(|v| (*v).clone()).or_else(|| default.cloned()),
            None => None,
        })
        .collect();
    df.with_column(Column::new(name, ColumnData::from_values(DType::Category, &values)?))
}

/// Rows where `condition` evaluates true; missing comparisons are false.
pub fn filter_dataframe(df: &Table, condition: &str) -> Result<Table> {
    let mask = expr::eval_mask(&expr::parse(condition)?, df)?;
    Ok(df.filter_rows(&mask))
}

pub fn rename_columns(df: &Table, pairs: &[(String, String)]) -> Result<Table> {
    let olds: Vec<&String> = pairs.iter().map(|(o, _)| o).collect();
    df.require_columns(&olds)?;
    let cols = df
        .columns()
        .iter()
        .map(|c| match pairs.iter().find(|(o, _)| *o == c.name) {
            Some((_, new)) => Column::new(new.clone(), c.data.clone()),
            None => c.clone(),
        })
        .collect();
    Table::new(cols)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NormalizeMethod {
    Standard,
    MinMax,
}

impl FromStr for NormalizeMethod {
    type Err = TabularError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "standard" | "zscore" => Ok(NormalizeMethod::Standard),
            "minmax" | "min_max" => Ok(NormalizeMethod::MinMax),
            other => Err(TabularError::InvalidArgument(format!(
                "unknown normalization method '{other}' (expected standard or minmax)"
            ))),
        }
    }
}

/// Standard: `(x - mean) / std` with population std; minmax: `(x - min) /
/// (max - min)`. Constant columns become zeros. Missing cells stay missing.
pub fn normalize(df: &Table, columns: Option<&[String]>, method: NormalizeMethod) -> Result<Table> {
    let targets: Vec<String> = match columns {
        Some(cols) => {
            df.require_columns(cols)?;
            for c in cols {
                require_numeric(df.column(c)?, "normalization")?;
            }
            cols.to_vec()
        }
        None => df.columns().iter().filter(|c| c.dtype().is_numeric()).map(|c| c.name.clone()).collect(),
    };
    let mut out = df.clone();
    for name in &targets {
        let vals = df.column(name)?.data.to_f64().expect("numeric column");
        let xs: Vec<f64> = vals.iter().flatten().copied().collect();
        let n = xs.len().max(1) as f64;
        let (shift, scale) = match method {
            NormalizeMethod::Standard => {
                let mean = xs.iter().sum::<f64>() / n;
                let std = (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n).sqrt();
                (mean, std)
            }
            NormalizeMethod::MinMax => {
                let min = xs.iter().cloned().fold(f64::INFINITY, f64::min);
                let max = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                (min, max - min)
            }
        };
        let data = vals
            .iter()
            .map(|v| v.map(|x| if scale > 0.0 { (x - shift) / scale } else { 0.0 }))
            .collect();
        out = out.with_column(Column::new(name.clone(), ColumnData::Float(data)))?;
    }
    Ok(out)
}

/// Convert one column to `dtype`. Floats truncate toward zero when cast to
/// int; text parses.
pub fn cast_column(col: &Column, dtype: DType) -> Result<Column> {
    let values: Vec<Option<Value>> = col
        .data
        .values()
        .into_iter()
        .map(|v| match (v, dtype) {
            (Some(Value::Float(f)), DType::Int) => Some(Value::Float(f.trunc())),
            (Some(Value::Str(s)), DType::Int) => match s.trim().parse::<i64>() {
                Ok(i) => Some(Value::Int(i)),
                Err(_) => Some(Value::Str(s)),
            },
            (v, _) => v,
        })
        .collect();
    ColumnData::from_values(dtype, &values)
        .map(|data| Column::new(col.name.clone(), data))
        .map_err(|_| {
            TabularError::InvalidArgument(format!("Cannot cast column '{}' from {} to {}", col.name, col.dtype(), dtype))
        })
}

pub fn cast_columns(df: &Table, casts: &[(String, DType)]) -> Result<Table> {
    let names: Vec<&String> = casts.iter().map(|(n, _)| n).collect();
    df.require_columns(&names)?;
    let mut out = df.clone();
    for (name, dtype) in casts {
        out = out.with_column(cast_column(df.column(name)?, *dtype)?)?;
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Modeling inputs

/// Features and (for training data) target.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureTargetSplit {
    pub x: Table,
    pub y: Option<Column>,
}

/// Split `df` into features and target. Training data must carry a complete
/// target; for test data the target column is dropped if present.
pub fn features_target(df: &Table, target_column: &str, is_train: bool) -> Result<FeatureTargetSplit> {
    if !is_train {
        let x = if df.has_column(target_column) { df.without_columns(&[target_column])? } else { df.clone() };
        return Ok(FeatureTargetSplit { x, y: None });
    }
    let y = df.column(target_column)?.clone();
    if y.data.missing_count() > 0 {
        return Err(TabularError::TargetMissingValues);
    }
    Ok(FeatureTargetSplit { x: df.without_columns(&[target_column])?, y: Some(y) })
}

/// Build a one-column table from a series (used when converting expression
/// results or predictions back to tables).
pub fn series_table(name: &str, s: Series) -> Result<Table> {
    Table::new(vec![Column::new(name, s.into_column_data())])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ints(name: &str, v: &[Option<i64>]) -> Column {
        Column::new(name, ColumnData::Int(v.to_vec()))
    }

    fn texts(name: &str, v: &[Option<&str>]) -> Column {
        Column::new(name, ColumnData::Text(v.iter().map(|s| s.map(str::to_string)).collect()))
    }

    #[test]
    fn missing_summary_counts_and_fractions() {
        let t = Table::new(vec![ints("a", &[Some(1), None, Some(3)])]).unwrap();
        let r = missing_summary(&t);
        assert_eq!(r.get("a.missing_count"), Some(1.0));
        assert!((r.get("a.missing_fraction").unwrap() - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn mean_fill_keeps_int_when_integral() {
        let t = Table::new(vec![ints("a", &[Some(1), None, Some(3)])]).unwrap();
        let out = fillna(&t, &FillStrategy::Mean, None).unwrap();
        assert_eq!(out.column("a").unwrap().data, ColumnData::Int(vec![Some(1), Some(2), Some(3)]));
        let t = Table::new(vec![ints("a", &[Some(1), None, Some(2)])]).unwrap();
        let out = fillna(&t, &FillStrategy::Mean, None).unwrap();
        assert_eq!(out.column("a").unwrap().data, ColumnData::Float(vec![Some(1.0), Some(1.5), Some(2.0)]));
    }

    #[test]
    fn mode_fill_and_tie_break() {
        let t = Table::new(vec![texts("c", &[Some("a"), Some("a"), None, Some("b")])]).unwrap();
        let out = fillna(&t, &FillStrategy::Mode, None).unwrap();
        assert_eq!(out.column("c").unwrap().data.to_strings()[2].as_deref(), Some("a"));
        let tie = vec![Value::Str("y".into()), Value::Str("x".into()), Value::Str("x".into()), Value::Str("y".into())];
        assert_eq!(mode(&tie), Some(Value::Str("y".into())));
    }

    #[test]
    fn mean_on_text_is_rejected() {
        let t = Table::new(vec![texts("c", &[Some("a"), None])]).unwrap();
        let err = fillna(&t, &FillStrategy::Mean, Some(&["c".to_string()])).unwrap_err();
        assert!(matches!(err, TabularError::NonNumericForMean { .. }));
    }

    #[test]
    fn conditional_fill_first_rule_wins() {
        let t = Table::new(vec![ints("a", &[Some(1), Some(-1), Some(5)]), ints("b", &[None, None, Some(0)])]).unwrap();
        let out = fillna_with_multiple_conditions(
            &t,
            "b",
            &[("a > 0".into(), Value::Int(10)), ("a < 100".into(), Value::Int(20))],
        )
        .unwrap();
        assert_eq!(out.column("b").unwrap().data, ColumnData::Int(vec![Some(10), Some(20), Some(0)]));
    }

    #[test]
    fn group_fill_uses_group_then_global() {
        let t = Table::new(vec![
            texts("g", &[Some("x"), Some("x"), Some("y"), Some("z"), Some("x")]),
            Column::new("v", ColumnData::Float(vec![Some(1.0), Some(3.0), Some(10.0), None, None])),
        ])
        .unwrap();
        let out = fillna_with_conditional_aggregation(&t, "v", "g", Agg::Mean, None).unwrap();
        let v = out.column("v").unwrap().data.to_f64().unwrap();
        assert_eq!(v[4], Some(2.0));
        assert!((v[3].unwrap() - 14.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn concat_adds_tracking_and_missing_target() {
        let train = Table::new(vec![ints("a", &[Some(1), Some(2)]), ints("y", &[Some(0), Some(1)])]).unwrap();
        let test = Table::new(vec![ints("a", &[Some(3)])]).unwrap();
        let c = concatenate_train_test(&train, &test).unwrap();
        assert_eq!(c.n_rows(), 3);
        assert_eq!(c.column("y").unwrap().data.missing_count(), 1);
        let (tr, te) = split_combined(&c).unwrap();
        assert_eq!(tr, train);
        assert_eq!(te.column("a").unwrap().data, test.column("a").unwrap().data);
    }

    #[test]
    fn concat_dtype_conflict() {
        let train = Table::new(vec![ints("a", &[Some(1)])]).unwrap();
        let test = Table::new(vec![texts("a", &[Some("x")])]).unwrap();
        assert!(matches!(concatenate_train_test(&train, &test), Err(TabularError::IncompatibleSchemas { .. })));
    }

    #[test]
    fn split_without_tracking_fails() {
        let t = Table::new(vec![ints("a", &[Some(1)])]).unwrap();
        assert_eq!(split_combined(&t).unwrap_err(), TabularError::TrackingColumnMissing);
    }

    #[test]
    fn label_and_one_hot() {
        let t = Table::new(vec![texts("c", &[Some("b"), Some("a"), Some("b")])]).unwrap();
        let l = label_encode(&t, None).unwrap();
        assert_eq!(l.column("c").unwrap().data, ColumnData::Int(vec![Some(1), Some(0), Some(1)]));
        let t = Table::new(vec![texts("col", &[Some("a"), Some("b"), Some("a")])]).unwrap();
        let o = one_hot_encode(&t, None, true).unwrap();
        assert_eq!(o.column_names(), vec!["col_b"]);
        assert_eq!(o.column("col_b").unwrap().data, ColumnData::Int(vec![Some(0), Some(1), Some(0)]));
        let n = Table::new(vec![ints("n", &[Some(1)])]).unwrap();
        assert_eq!(one_hot_encode(&n, Some(&["n".to_string()]), false).unwrap(), n);
    }

    #[test]
    fn filter_with_conjunction() {
        let t = Table::new(vec![ints("col1", &[Some(1), Some(-1)]), ints("col2", &[Some(50), Some(50)])]).unwrap();
        let f = filter_dataframe(&t, "col1 > 0 and col2 < 100").unwrap();
        assert_eq!(f.n_rows(), 1);
        assert_eq!(f.cell(0, 0), Some(Value::Int(1)));
    }

    #[test]
    fn normalize_constant_column_is_zero() {
        let t = Table::new(vec![ints("a", &[Some(4), Some(4)]), ints("b", &[Some(0), Some(2)])]).unwrap();
        let n = normalize(&t, None, NormalizeMethod::Standard).unwrap();
        assert_eq!(n.column("a").unwrap().data, ColumnData::Float(vec![Some(0.0), Some(0.0)]));
        assert_eq!(n.column("b").unwrap().data, ColumnData::Float(vec![Some(-1.0), Some(1.0)]));
    }

    #[test]
    fn features_target_rules() {
        let t = Table::new(vec![ints("a", &[Some(1), Some(2)]), ints("y", &[Some(1), None])]).unwrap();
        assert_eq!(features_target(&t, "y", true).unwrap_err().to_string(), "Input y contains NaN.");
        let s = features_target(&t, "y", false).unwrap();
        assert!(s.y.is_none());
        assert_eq!(s.x.column_names(), vec!["a"]);
        assert!(matches!(features_target(&t, "zz", true), Err(TabularError::UnknownColumn(_))));
    }

    #[test]
    fn group_aggregation_table() {
        let t = Table::new(vec![texts("g", &[Some("x"), Some("y"), Some("x")]), ints("v", &[Some(1), Some(5), Some(3)])]).unwrap();
        let g = group_aggregation(&t, "g", "v", Agg::Sum).unwrap();
        assert_eq!(g.column_names(), vec!["g", "v_sum"]);
        assert_eq!(g.column("v_sum").unwrap().data, ColumnData::Float(vec![Some(4.0), Some(5.0)]));
        let c = create_group_aggregation(&t, "g_mean", "g", "v", Agg::Mean).unwrap();
        assert_eq!(c.column("g_mean").unwrap().data, ColumnData::Float(vec![Some(2.0), Some(5.0), Some(2.0)]));
    }

    #[test]
    fn casts() {
        let t = Table::new(vec![Column::new("f", ColumnData::Float(vec![Some(2.7), None]))]).unwrap();
        let c = cast_columns(&t, &[("f".into(), DType::Int)]).unwrap();
        assert_eq!(c.column("f").unwrap().data, ColumnData::Int(vec![Some(2), None]));
        let t = Table::new(vec![texts("s", &[Some("x")])]).unwrap();
        assert!(cast_columns(&t, &[("s".into(), DType::Float)]).is_err());
    }
}
