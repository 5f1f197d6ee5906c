//! Built-in implementations behind the catalog entries.

use std::sync::Arc;

use serde_json::Value as Json;
use toolplan_tabular::learn::{self, format_params};
use toolplan_tabular::ops::{self, Agg, FillStrategy, NormalizeMethod};
use toolplan_tabular::{csvio, metrics, persist};
use toolplan_tabular::{Column, ColumnData, DType, FeatureTargetSplit, ModelArtifact, Table, Value, TRACKING_COLUMN};

use crate::artifact::Artifact;
use crate::registry::{IoEvent, ToolArgs, ToolFailure, ToolFn, ToolOutput};

type Impl = fn(&ToolArgs) -> Result<ToolOutput, ToolFailure>;

const TEXT_ROW_LIMIT: usize = 50;

/// Implementation registered under a catalog name.
pub fn builtin(name: &str) -> Option<ToolFn> {
    let f: Impl = match name {
        "read_data" => read_data,
        "get_missing_summary" => get_missing_summary,
        "get_dataframe_dtypes_summary" => get_dtypes_summary,
        "get_unique_values" => get_unique_values,
        "get_group_aggregation" => get_group_aggregation,
        "fillna_with_value" => fillna_with_value,
        "fillna_with_median" => |a| fill(a, FillStrategy::Median),
        "fillna_with_mean" => |a| fill(a, FillStrategy::Mean),
        "fillna_with_mode" => |a| fill(a, FillStrategy::Mode),
        "fillna_with_condition" => fillna_with_condition,
        "fillna_with_multiple_conditions" => fillna_with_multiple_conditions,
        "fillna_with_conditional_aggregation" => fillna_with_conditional_aggregation,
        "drop_rows_with_missing" => drop_rows_with_missing,
        "cast_columns" => cast_columns,
        "cast_numeric_columns" => cast_numeric_columns,
        "cast_integer_columns_to_float" => cast_integer_columns_to_float,
        "cast_categorical_columns" => cast_categorical_columns,
        "create_numeric_feature" => create_numeric_feature,
        "create_categorical_feature" => create_categorical_feature,
        "create_conditional_feature" => create_conditional_feature,
        "create_group_aggregation" => create_group_aggregation,
        "one_hot_encode" => one_hot_encode,
        "label_encode" => label_encode,
        "normalize_features" => normalize_features,
        "encode_all_categorical_columns" => encode_all_categorical_columns,
        "normalize_all_numerical_columns" => normalize_all_numerical_columns,
        "concatenate_train_test" => concatenate_train_test,
        "split_combined_into_train_test" => split_combined_into_train_test,
        "convert_dataframe_to_features_target" => convert_dataframe_to_features_target,
        "convert_to_dataframe" => convert_to_dataframe,
        "drop_feature" => drop_feature,
        "get_features" => get_features,
        "concatenate_dataframes" => concatenate_dataframes,
        "rename_feature" => rename_feature,
        "filter_dataframe" => filter_dataframe,
        "evaluate_regression_model" => |a| evaluate(a, false),
        "evaluate_classification_model" => |a| evaluate(a, true),
        "predict_target" => predict_target,
        "save_dataframe_to_csv" => save_dataframe_to_csv,
        "save_model" => save_model,
        "load_model" => load_model,
        n if n.starts_with("fit_") => fit_model,
        n if n.starts_with("tune_") => tune_model,
        _ => return None,
    };
    Some(Arc::new(f))
}

// ---------------------------------------------------------------------------
// Argument access

impl ToolArgs<'_> {
    fn tool(&self) -> &str {
        &self.desc.name
    }

    fn table(&self, param: &str) -> Result<&Table, ToolFailure> {
        self.bound
            .get(param)
            .and_then(Artifact::as_table)
            .ok_or_else(|| ToolFailure::type_error(format!("{}() argument '{param}' must be a DataFrame", self.tool())))
    }

    fn model(&self, param: &str) -> Result<&ModelArtifact, ToolFailure> {
        self.bound
            .get(param)
            .and_then(Artifact::as_model)
            .ok_or_else(|| ToolFailure::type_error(format!("{}() argument '{param}' must be a fitted model", self.tool())))
    }

    /// Feature matrix: a table, or the features of a split.
    fn features(&self, param: &str) -> Result<&Table, ToolFailure> {
        match self.bound.get(param) {
            Some(Artifact::FeatureTargetSplit(s)) => Ok(&s.x),
            Some(a) => a
                .as_table()
                .ok_or_else(|| ToolFailure::type_error(format!("{}() argument '{param}' must be a DataFrame", self.tool()))),
            None => Err(ToolFailure::type_error(format!("{}() missing argument '{param}'", self.tool()))),
        }
    }

    /// Target vector: a one-column table, or the target of a split.
    fn target(&self, param: &str) -> Result<Column, ToolFailure> {
        match self.bound.get(param) {
            Some(Artifact::FeatureTargetSplit(s)) => s.y.clone().ok_or_else(|| {
                ToolFailure::value_error(format!("{}() argument '{param}' holds test features without a target", self.tool()))
            }),
            Some(a) => {
                let t = a
                    .as_table()
                    .ok_or_else(|| ToolFailure::type_error(format!("{}() argument '{param}' must be a Series", self.tool())))?;
                if t.n_cols() == 1 {
                    return Ok(t.columns()[0].clone());
                }
                if let Some(target) = self.env.target.as_deref().filter(|c| t.has_column(c)) {
                    return Ok(t.column(target)?.clone());
                }
                Err(ToolFailure::value_error(format!(
                    "y should be a 1d array, got an array of shape ({}, {}) instead.",
                    t.n_rows(),
                    t.n_cols()
                )))
            }
            None => Err(ToolFailure::type_error(format!("{}() missing argument '{param}'", self.tool()))),
        }
    }

    fn str(&self, param: &str) -> Result<&str, ToolFailure> {
        self.opt_str(param)
            .ok_or_else(|| ToolFailure::type_error(format!("{}() argument '{param}' must be a string", self.tool())))
    }

    fn opt_str(&self, param: &str) -> Option<&str> {
        self.kwargs.get(param).and_then(Json::as_str)
    }

    fn bool(&self, param: &str) -> Result<bool, ToolFailure> {
        self.kwargs
            .get(param)
            .and_then(Json::as_bool)
            .ok_or_else(|| ToolFailure::type_error(format!("{}() argument '{param}' must be a boolean", self.tool())))
    }

    fn opt_usize(&self, param: &str) -> Result<Option<usize>, ToolFailure> {
        match self.kwargs.get(param) {
            None => Ok(None),
            Some(v) => match v.as_f64() {
                Some(f) if f >= 0.0 && f.fract() == 0.0 => Ok(Some(f as usize)),
                _ => Err(ToolFailure::value_error(format!(
                    "{}() argument '{param}' must be a non-negative integer, got {v}",
                    self.tool()
                ))),
            },
        }
    }

    fn usize(&self, param: &str) -> Result<usize, ToolFailure> {
        self.opt_usize(param)?
            .ok_or_else(|| ToolFailure::type_error(format!("{}() argument '{param}' must be an integer", self.tool())))
    }

    /// A string or a list of strings.
    fn opt_names(&self, param: &str) -> Result<Option<Vec<String>>, ToolFailure> {
        match self.kwargs.get(param) {
            None => Ok(None),
            Some(v) => names_of(v)
                .map(Some)
                .ok_or_else(|| ToolFailure::type_error(format!("{}() argument '{param}' must be a string or a list of strings", self.tool()))),
        }
    }

    fn names(&self, param: &str) -> Result<Vec<String>, ToolFailure> {
        self.opt_names(param)?
            .ok_or_else(|| ToolFailure::type_error(format!("{}() missing argument '{param}'", self.tool())))
    }

    fn value(&self, param: &str) -> Result<Value, ToolFailure> {
        let v = self
            .kwargs
            .get(param)
            .ok_or_else(|| ToolFailure::type_error(format!("{}() missing argument '{param}'", self.tool())))?;
        cell_value(v).ok_or_else(|| ToolFailure::type_error(format!("{}() argument '{param}' must be a scalar, got {v}", self.tool())))
    }

    fn opt_value(&self, param: &str) -> Result<Option<Value>, ToolFailure> {
        match self.kwargs.get(param) {
            None => Ok(None),
            Some(_) => self.value(param).map(Some),
        }
    }

    fn agg(&self, param: &str) -> Result<Agg, ToolFailure> {
        Ok(self.str(param)?.parse::<Agg>()?)
    }
}

fn names_of(v: &Json) -> Option<Vec<String>> {
    match v {
        Json::String(s) => Some(vec![s.clone()]),
        Json::Array(items) => items.iter().map(|i| i.as_str().map(str::to_string)).collect(),
        _ => None,
    }
}

fn cell_value(v: &Json) -> Option<Value> {
    Value::from_json(v)
}

fn table_out(t: Table) -> ToolOutput {
    let text = t.summary();
    ToolOutput { value: Some(Artifact::table(t)), text, ..ToolOutput::default() }
}

fn text_out(text: String) -> ToolOutput {
    ToolOutput { text, ..ToolOutput::default() }
}

/// CSV rendering of `t`, truncated to a readable number of rows.
fn render_table(t: &Table) -> String {
    let shown = t.take_rows(&(0..t.n_rows().min(TEXT_ROW_LIMIT)).collect::<Vec<_>>());
    let mut buf = Vec::new();
    if csvio::write_csv_to(&shown, &mut buf).is_err() {
        return t.summary();
    }
    let mut s = String::from_utf8_lossy(&buf).trim_end().to_string();
    if t.n_rows() > TEXT_ROW_LIMIT {
        s.push_str(&format!("\n... ({} more rows)", t.n_rows() - TEXT_ROW_LIMIT));
    }
    s
}

// ---------------------------------------------------------------------------
// Loading and summaries

fn read_data(a: &ToolArgs) -> Result<ToolOutput, ToolFailure> {
    let raw = a.str("filepath")?;
    let path = a.env.resolve_path(raw);
    let t = csvio::read_csv(&path).map_err(|e| match e {
        toolplan_tabular::TabularError::FileNotFound(_) => {
            toolplan_tabular::TabularError::FileNotFound(raw.to_string()).into()
        }
        other => ToolFailure::from(other),
    })?;
    let mut out = table_out(t);
    out.io = Some(IoEvent::Read { path });
    Ok(out)
}

fn get_missing_summary(a: &ToolArgs) -> Result<ToolOutput, ToolFailure> {
    let df = a.table("df")?;
    let report = ops::missing_summary(df);
    let total = df.missing_cells();
    Ok(text_out(format!("Missing values ({total} cells in total): {report}")))
}

fn get_dtypes_summary(a: &ToolArgs) -> Result<ToolOutput, ToolFailure> {
    Ok(text_out(ops::dtypes_summary(a.table("df")?)))
}

fn get_unique_values(a: &ToolArgs) -> Result<ToolOutput, ToolFailure> {
    let df = a.table("df")?;
    let column = a.str("column")?;
    let mut t = ops::unique_values(df, column, a.bool("sort")?)?;
    if !a.bool("include_counts")? {
        t = t.select(&[column])?;
    }
    Ok(text_out(format!("{} unique values in '{column}':\n{}", t.n_rows(), render_table(&t))))
}

fn get_group_aggregation(a: &ToolArgs) -> Result<ToolOutput, ToolFailure> {
    let t = ops::group_aggregation(a.table("df")?, a.str("group_column")?, a.str("agg_column")?, a.agg("agg_func")?)?;
    Ok(text_out(render_table(&t)))
}

// ---------------------------------------------------------------------------
// Cleaning

fn fill(a: &ToolArgs, strategy: FillStrategy) -> Result<ToolOutput, ToolFailure> {
    let df = a.table("df")?;
    let cols = a.opt_names("columns")?;
    Ok(table_out(ops::fillna(df, &strategy, cols.as_deref())?))
}

fn fillna_with_value(a: &ToolArgs) -> Result<ToolOutput, ToolFailure> {
    fill(a, FillStrategy::Value(a.value("value")?))
}

fn fillna_with_condition(a: &ToolArgs) -> Result<ToolOutput, ToolFailure> {
    let t = ops::fillna_with_condition(a.table("df")?, a.str("target_column")?, a.str("condition")?, &a.value("fill_value")?)?;
    Ok(table_out(t))
}

fn fillna_with_multiple_conditions(a: &ToolArgs) -> Result<ToolOutput, ToolFailure> {
    let bad = || {
        ToolFailure::type_error(format!(
            "{}() argument 'conditions_and_values' must be a list of [condition, value] pairs or a mapping of condition to value",
            a.tool()
        ))
    };
    let raw = a.kwargs.get("conditions_and_values").ok_or_else(bad)?;
    let rules: Vec<(String, Value)> = match raw {
        Json::Object(m) => m
            .iter()
            .map(|(c, v)| cell_value(v).map(|v| (c.clone(), v)).ok_or_else(bad))
            .collect::<Result<_, _>>()?,
        Json::Array(items) => items
            .iter()
            .map(|item| match item.as_array().map(Vec::as_slice) {
                Some([Json::String(c), v]) => cell_value(v).map(|v| (c.clone(), v)).ok_or_else(bad),
                _ => Err(bad()),
            })
            .collect::<Result<_, _>>()?,
        _ => return Err(bad()),
    };
    Ok(table_out(ops::fillna_with_multiple_conditions(a.table("df")?, a.str("target_column")?, &rules)?))
}

fn fillna_with_conditional_aggregation(a: &ToolArgs) -> Result<ToolOutput, ToolFailure> {
    let groups: Option<Vec<Value>> = match a.kwargs.get("condition_values") {
        Some(Json::Array(items)) => Some(
            items
                .iter()
                .map(|v| {
                    cell_value(v).ok_or_else(|| ToolFailure::type_error(format!("condition value {v} is not a scalar")))
                })
                .collect::<Result<_, _>>()?,
        ),
        _ => None,
    };
    let t = ops::fillna_with_conditional_aggregation(
        a.table("df")?,
        a.str("target_column")?,
        a.str("condition_column")?,
        a.agg("agg_func")?,
        groups.as_deref(),
    )?;
    Ok(table_out(t))
}

fn drop_rows_with_missing(a: &ToolArgs) -> Result<ToolOutput, ToolFailure> {
    let cols = a.opt_names("columns")?;
    Ok(table_out(ops::drop_rows_with_missing(a.table("df")?, cols.as_deref(), a.opt_usize("threshold")?)?))
}

fn parse_dtype(s: &str) -> Result<DType, ToolFailure> {
    DType::parse(s).ok_or_else(|| ToolFailure::new(crate::registry::ErrorKind::InvalidArgument, "TypeError", format!("data type '{s}' not understood")))
}

fn cast_columns(a: &ToolArgs) -> Result<ToolOutput, ToolFailure> {
    let Some(Json::Object(m)) = a.kwargs.get("column_type_mapping") else {
        return Err(ToolFailure::type_error("cast_columns() argument 'column_type_mapping' must be a mapping"));
    };
    let casts: Vec<(String, DType)> = m
        .iter()
        .map(|(c, t)| {
            let t = t.as_str().ok_or_else(|| ToolFailure::type_error(format!("dtype for '{c}' must be a string")))?;
            Ok((c.clone(), parse_dtype(t)?))
        })
        .collect::<Result<_, ToolFailure>>()?;
    Ok(table_out(ops::cast_columns(a.table("df")?, &casts)?))
}

fn cast_selected(a: &ToolArgs, default: impl Fn(&Column) -> bool, to: DType) -> Result<ToolOutput, ToolFailure> {
    let df = a.table("df")?;
    let cols = match a.opt_names("columns")? {
        Some(c) => c,
        None => df.columns().iter().filter(|c| c.name != TRACKING_COLUMN && default(c)).map(|c| c.name.clone()).collect(),
    };
    let casts: Vec<(String, DType)> = cols.into_iter().map(|c| (c, to)).collect();
    Ok(table_out(ops::cast_columns(df, &casts)?))
}

fn cast_numeric_columns(a: &ToolArgs) -> Result<ToolOutput, ToolFailure> {
    let to = parse_dtype(a.str("target_type")?)?;
    if !to.is_numeric() {
        return Err(ToolFailure::value_error(format!("target_type must be int or float, got '{}'", a.str("target_type")?)));
    }
    cast_selected(a, |c| c.dtype().is_numeric(), to)
}

fn cast_integer_columns_to_float(a: &ToolArgs) -> Result<ToolOutput, ToolFailure> {
    cast_selected(a, |c| c.dtype() == DType::Int, DType::Float)
}

fn cast_categorical_columns(a: &ToolArgs) -> Result<ToolOutput, ToolFailure> {
    cast_selected(a, |c| c.dtype() == DType::Text, DType::Category)
}

// ---------------------------------------------------------------------------
// Features

fn create_numeric_feature(a: &ToolArgs) -> Result<ToolOutput, ToolFailure> {
    Ok(table_out(ops::create_numeric_feature(a.table("df")?, a.str("name")?, a.str("expression")?)?))
}

fn create_categorical_feature(a: &ToolArgs) -> Result<ToolOutput, ToolFailure> {
    let Some(Json::Object(m)) = a.kwargs.get("mapping") else {
        return Err(ToolFailure::type_error("create_categorical_feature() argument 'mapping' must be a mapping"));
    };
    let mapping: Vec<(String, Value)> = m
        .iter()
        .map(|(k, v)| {
            cell_value(v)
                .map(|v| (k.clone(), v))
                .ok_or_else(|| ToolFailure::type_error(format!("mapping value for '{k}' must be a scalar")))
        })
        .collect::<Result<_, _>>()?;
    let default = a.opt_value("default")?;
    let t = ops::create_categorical_feature(a.table("df")?, a.str("name")?, a.str("source_column")?, &mapping, default.as_ref())?;
    Ok(table_out(t))
}

fn create_conditional_feature(a: &ToolArgs) -> Result<ToolOutput, ToolFailure> {
    let t = ops::create_conditional_feature(
        a.table("df")?,
        a.str("name")?,
        a.str("condition")?,
        &a.value("true_value")?,
        &a.value("false_value")?,
    )?;
    Ok(table_out(t))
}

fn create_group_aggregation(a: &ToolArgs) -> Result<ToolOutput, ToolFailure> {
    let t = ops::create_group_aggregation(
        a.table("df")?,
        a.str("name")?,
        a.str("group_column")?,
        a.str("agg_column")?,
        a.agg("agg_func")?,
    )?;
    Ok(table_out(t))
}

fn one_hot_encode(a: &ToolArgs) -> Result<ToolOutput, ToolFailure> {
    let df = a.table("df")?;
    let cols = a.opt_names("columns")?;
    let mut t = ops::one_hot_encode(df, cols.as_deref(), a.bool("drop_first")?)?;
    let encoded: Vec<String> = match &cols {
        Some(c) => c.clone(),
        None => df.columns().iter().filter(|c| c.dtype().is_stringly()).map(|c| c.name.clone()).collect(),
    };
    let prefix_for = |col: &str| -> Option<String> {
        match a.kwargs.get("prefix") {
            Some(Json::String(p)) => Some(p.clone()),
            Some(Json::Object(m)) => m.get(col).and_then(Json::as_str).map(str::to_string),
            _ => None,
        }
    };
    let mut renames = Vec::new();
    for col in &encoded {
        let Some(p) = prefix_for(col) else { continue };
        let stem = format!("{col}_");
        for name in t.column_names() {
            if !df.has_column(&name) {
                if let Some(suffix) = name.strip_prefix(&stem) {
                    renames.push((name.clone(), format!("{p}_{suffix}")));
                }
            }
        }
    }
    if !renames.is_empty() {
        t = ops::rename_columns(&t, &renames)?;
    }
    Ok(table_out(t))
}

fn label_encode(a: &ToolArgs) -> Result<ToolOutput, ToolFailure> {
    let cols = a.opt_names("columns")?;
    Ok(table_out(ops::label_encode(a.table("df")?, cols.as_deref())?))
}

fn normalize_features(a: &ToolArgs) -> Result<ToolOutput, ToolFailure> {
    let method: NormalizeMethod = a.str("method")?.parse()?;
    let cols = a.opt_names("columns")?;
    Ok(table_out(ops::normalize(a.table("df")?, cols.as_deref(), method)?))
}

fn non_target(a: &ToolArgs, df: &Table, pick: impl Fn(&Column) -> bool) -> Vec<String> {
    df.columns()
        .iter()
        .filter(|c| c.name != TRACKING_COLUMN && Some(c.name.as_str()) != a.env.target.as_deref() && pick(c))
        .map(|c| c.name.clone())
        .collect()
}

fn encode_all_categorical_columns(a: &ToolArgs) -> Result<ToolOutput, ToolFailure> {
    let df = a.table("df")?;
    let cols = non_target(a, df, |c| c.dtype().is_stringly());
    let t = match a.str("method")? {
        "one_hot" | "onehot" => ops::one_hot_encode(df, Some(&cols), a.bool("drop_first")?)?,
        "label" => ops::label_encode(df, Some(&cols))?,
        other => {
            return Err(ToolFailure::value_error(format!("unknown encoding method '{other}' (expected one_hot or label)")))
        }
    };
    Ok(table_out(t))
}

fn normalize_all_numerical_columns(a: &ToolArgs) -> Result<ToolOutput, ToolFailure> {
    let df = a.table("df")?;
    let method: NormalizeMethod = a.str("method")?.parse()?;
    let cols = non_target(a, df, |c| c.dtype().is_numeric());
    Ok(table_out(ops::normalize(df, Some(&cols), method)?))
}

fn drop_feature(a: &ToolArgs) -> Result<ToolOutput, ToolFailure> {
    Ok(table_out(a.table("df")?.without_columns(&a.names("column")?)?))
}

fn get_features(a: &ToolArgs) -> Result<ToolOutput, ToolFailure> {
    Ok(table_out(a.table("df")?.select(&a.names("columns")?)?))
}

fn rename_feature(a: &ToolArgs) -> Result<ToolOutput, ToolFailure> {
    let old = a.names("old_name")?;
    let new = a.names("new_name")?;
    if old.len() != new.len() {
        return Err(ToolFailure::value_error(format!(
            "old_name and new_name must have the same length, got {} and {}",
            old.len(),
            new.len()
        )));
    }
    let pairs: Vec<(String, String)> = old.into_iter().zip(new).collect();
    Ok(table_out(ops::rename_columns(a.table("df")?, &pairs)?))
}

fn filter_dataframe(a: &ToolArgs) -> Result<ToolOutput, ToolFailure> {
    Ok(table_out(ops::filter_dataframe(a.table("df")?, a.str("condition")?)?))
}

// ---------------------------------------------------------------------------
// Combination and conversion

fn concatenate_train_test(a: &ToolArgs) -> Result<ToolOutput, ToolFailure> {
    Ok(table_out(ops::concatenate_train_test(a.table("train_df")?, a.table("test_df")?)?))
}

fn concatenate_dataframes(a: &ToolArgs) -> Result<ToolOutput, ToolFailure> {
    Ok(table_out(ops::concatenate_dataframes(a.table("df1")?, a.table("df2")?, a.usize("axis")?)?))
}

fn split_combined_into_train_test(a: &ToolArgs) -> Result<ToolOutput, ToolFailure> {
    let (train, test) = ops::split_combined(a.table("combined")?)?;
    let text = format!(
        "Split into train_df ({} rows) and test_df ({} rows).",
        train.n_rows(),
        test.n_rows()
    );
    Ok(ToolOutput {
        value: Some(Artifact::text(text.clone())),
        extra: vec![
            ("train_df".to_string(), Artifact::table(train)),
            ("test_df".to_string(), Artifact::table(test)),
        ],
        text,
        io: None,
    })
}

fn convert_dataframe_to_features_target(a: &ToolArgs) -> Result<ToolOutput, ToolFailure> {
    let df = a.table("df")?;
    let is_train = a.bool("is_train")?;
    let split = ops::features_target(df, a.str("target_column")?, is_train)?;
    let mut extra = vec![];
    let text = match &split.y {
        Some(y) if is_train => {
            extra.push(("X_train".to_string(), Artifact::table(split.x.clone())));
            extra.push(("Y_train".to_string(), Artifact::table(Table::new(vec![y.clone()])?)));
            format!("Features X_train: {}. Target Y_train: '{}' ({} values).", split.x.summary(), y.name, y.len())
        }
        _ => {
            extra.push(("X_test".to_string(), Artifact::table(split.x.clone())));
            format!("Features X_test: {}.", split.x.summary())
        }
    };
    Ok(ToolOutput { value: Some(Artifact::FeatureTargetSplit(Arc::new(split))), extra, text, io: None })
}

fn convert_to_dataframe(a: &ToolArgs) -> Result<ToolOutput, ToolFailure> {
    let data = a
        .bound
        .get("data")
        .ok_or_else(|| ToolFailure::type_error("convert_to_dataframe() missing argument 'data'"))?;
    let t = match data {
        Artifact::Table(t) | Artifact::TrainTestPair(t) | Artifact::PredictionTable(t) => (**t).clone(),
        Artifact::FeatureTargetSplit(s) => split_to_table(s)?,
        Artifact::MetricsReport(r) => Table::new(vec![
            Column::new("metric", ColumnData::Text(r.entries.iter().map(|(k, _)| Some(k.clone())).collect())),
            Column::new("value", ColumnData::Float(r.entries.iter().map(|(_, v)| Some(*v)).collect())),
        ])?,
        Artifact::Scalar(v) => Table::new(vec![Column::new("value", ColumnData::Float(vec![Some(*v)]))])?,
        other => {
            return Err(ToolFailure::type_error(format!("cannot convert a {} to a DataFrame", other.kind())));
        }
    };
    Ok(table_out(t))
}

fn split_to_table(s: &FeatureTargetSplit) -> Result<Table, ToolFailure> {
    match &s.y {
        Some(y) => Ok(s.x.with_column(y.clone())?),
        None => Ok(s.x.clone()),
    }
}

// ---------------------------------------------------------------------------
// Modeling

fn model_kind(a: &ToolArgs) -> Result<toolplan_tabular::ModelKind, ToolFailure> {
    a.desc
        .model
        .ok_or_else(|| ToolFailure::new(crate::registry::ErrorKind::ToolRuntimeError, "RuntimeError", format!("{}() has no model", a.tool())))
}

fn fit_model(a: &ToolArgs) -> Result<ToolOutput, ToolFailure> {
    let kind = model_kind(a)?;
    let x = a.features("X_train")?;
    let y = a.target("y_train")?;
    let m = learn::fit(kind, x, &y, a.usize("cv")?, &Default::default(), a.env.seed)?;
    let text = format!(
        "The params and CV score for this method are {} and {:.4} respectively.",
        format_params(&m.best_params),
        m.cv_score
    );
    Ok(ToolOutput { value: Some(Artifact::Model(Arc::new(m))), text, ..ToolOutput::default() })
}

fn tune_model(a: &ToolArgs) -> Result<ToolOutput, ToolFailure> {
    let kind = model_kind(a)?;
    let grid = a.desc.grid.clone().unwrap_or_default();
    let x = a.features("X_train")?;
    let y = a.target("y_train")?;
    let r = learn::tune(kind, x, &y, a.usize("cv")?, &grid, a.env.seed)?;
    let text = format!(
        "The Best params and CV score for this method are {} and {:.4} respectively.",
        format_params(&r.model.best_params),
        r.model.cv_score
    );
    let model = Artifact::Model(Arc::new(r.model));
    Ok(ToolOutput {
        value: Some(model.clone()),
        extra: vec![("best_estimator".to_string(), model)],
        text,
        io: None,
    })
}

fn evaluate(a: &ToolArgs, classification: bool) -> Result<ToolOutput, ToolFailure> {
    let m = a.model("model")?;
    if m.is_classifier() != classification {
        let want = if classification { "classifier" } else { "regressor" };
        return Err(ToolFailure::value_error(format!("{} is not a {want}", m.kind)));
    }
    let report = metrics::evaluate(m, a.features("X_test")?, &a.target("y_test")?)?;
    Ok(text_out(format!(
        "Evaluation of {} on {} data: {report}",
        a.str("model_name")?,
        a.str("eval_data_label")?
    )))
}

fn predict_target(a: &ToolArgs) -> Result<ToolOutput, ToolFailure> {
    let m = a.model("model")?;
    let x = a.features("X_data")?;
    let mut cols = Vec::new();
    if let (Some(id), Some(ids)) = (a.env.id_column.as_deref(), a.env.test_ids.as_deref()) {
        if ids.len() == x.n_rows() && !x.has_column(id) {
            cols.push(Column::new(id, ids.data.clone()));
        }
    }
    if a.bool("return_probabilities")? {
        cols.extend(m.predict_proba(x)?.into_columns());
    } else {
        cols.push(m.predict(x)?);
    }
    let t = Table::new(cols)?;
    let text = format!("Predictions of {}: {}", a.str("model_name")?, t.summary());
    Ok(ToolOutput { value: Some(Artifact::PredictionTable(Arc::new(t))), text, ..ToolOutput::default() })
}

// ---------------------------------------------------------------------------
// Persistence

fn ensure_parent(path: &std::path::Path) -> Result<(), ToolFailure> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| {
            ToolFailure::new(crate::registry::ErrorKind::ToolRuntimeError, "OSError", e.to_string())
        })?;
    }
    Ok(())
}

fn save_dataframe_to_csv(a: &ToolArgs) -> Result<ToolOutput, ToolFailure> {
    let df = a.table("df")?;
    let raw = a.str("filepath")?;
    let path = a.env.resolve_path(raw);
    ensure_parent(&path)?;
    csvio::write_csv(df, &path)?;
    Ok(ToolOutput {
        text: format!("Saved DataFrame with {} rows and {} columns to {raw}.", df.n_rows(), df.n_cols()),
        io: Some(IoEvent::WroteTable { path, table: Arc::new(df.clone()) }),
        ..ToolOutput::default()
    })
}

fn save_model(a: &ToolArgs) -> Result<ToolOutput, ToolFailure> {
    let m = a.model("model")?;
    let raw = a.str("filepath")?;
    let path = a.env.resolve_path(raw);
    ensure_parent(&path)?;
    persist::save_model(m, &path)?;
    Ok(ToolOutput {
        text: format!("Saved {} to {raw}.", m.kind),
        io: Some(IoEvent::WroteModel { path }),
        ..ToolOutput::default()
    })
}

fn load_model(a: &ToolArgs) -> Result<ToolOutput, ToolFailure> {
    let raw = a.str("filepath")?;
    let path = a.env.resolve_path(raw);
    if !path.exists() {
        return Err(toolplan_tabular::TabularError::FileNotFound(raw.to_string()).into());
    }
    let m = persist::load_model(&path)?;
    Ok(ToolOutput {
        text: m.summary(),
        value: Some(Artifact::Model(Arc::new(m))),
        io: Some(IoEvent::Read { path }),
        ..ToolOutput::default()
    })
}
