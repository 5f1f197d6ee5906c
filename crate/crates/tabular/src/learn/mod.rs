//! Desk-scale learners behind the `fit_*` / `tune_*` tool families.

mod forest;
mod gbdt;
mod linear;
mod logistic;
pub mod tree;

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Result, TabularError};
use crate::table::{Column, ColumnData, DType, Table, Value};

/// Hyperparameters by name. All knobs the learners expose are numeric.
pub type Params = BTreeMap<String, f64>;

/// Candidate values per hyperparameter; expanded as a cartesian product in
/// key order.
pub type ParamGrid = BTreeMap<String, Vec<f64>>;

/// Dense row-major feature matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Matrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Matrix {
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Matrix {
        let cols = rows.first().map_or(0, Vec::len);
        Matrix { rows: rows.len(), cols, data: rows.into_iter().flatten().collect() }
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn select_rows(&self, idx: &[usize]) -> Matrix {
        let mut data = Vec::with_capacity(idx.len() * self.cols);
        for &i in idx {
            data.extend_from_slice(self.row(i));
        }
        Matrix { rows: idx.len(), cols: self.cols, data }
    }

    /// Numeric view of a feature table. Every column must be int, float or
    /// bool and free of missing cells.
    pub fn from_table(x: &Table) -> Result<Matrix> {
        let non_numeric: Vec<String> = x
            .columns()
            .iter()
            .filter(|c| !(c.dtype().is_numeric() || c.dtype() == DType::Bool))
            .map(|c| c.name.clone())
            .collect();
        if !non_numeric.is_empty() {
            return Err(TabularError::NonNumericFeatures(non_numeric));
        }
        let with_nan: Vec<String> =
            x.columns().iter().filter(|c| c.data.missing_count() > 0).map(|c| c.name.clone()).collect();
        if !with_nan.is_empty() {
            return Err(TabularError::NaNInFeatures(with_nan));
        }
        let cols: Vec<Vec<f64>> = x
            .columns()
            .iter()
            .map(|c| c.data.to_f64().unwrap_or_default().into_iter().map(|v| v.unwrap_or(0.0)).collect())
            .collect();
        let (rows, ncols) = (x.n_rows(), cols.len());
        let mut data = vec![0.0; rows * ncols];
        for (j, col) in cols.iter().enumerate() {
            for (i, v) in col.iter().enumerate() {
                data[i * ncols + j] = *v;
            }
        }
        Ok(Matrix { rows, cols: ncols, data })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    LinearRegression,
    LogisticRegression,
    RandomForestRegressor,
    RandomForestClassifier,
    XgboostRegressor,
    XgboostClassifier,
    LightgbmRegressor,
    LightgbmClassifier,
    CatboostRegressor,
    CatboostClassifier,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Family {
    Linear,
    Logistic,
    Forest,
    Boosting,
}

impl ModelKind {
    pub const ALL: [ModelKind; 10] = [
        ModelKind::LinearRegression,
        ModelKind::LogisticRegression,
        ModelKind::RandomForestRegressor,
        ModelKind::RandomForestClassifier,
        ModelKind::XgboostRegressor,
        ModelKind::XgboostClassifier,
        ModelKind::LightgbmRegressor,
        ModelKind::LightgbmClassifier,
        ModelKind::CatboostRegressor,
        ModelKind::CatboostClassifier,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::LinearRegression => "linear_regression",
            ModelKind::LogisticRegression => "logistic_regression",
            ModelKind::RandomForestRegressor => "random_forest_regressor",
            ModelKind::RandomForestClassifier => "random_forest_classifier",
            ModelKind::XgboostRegressor => "xgboost_regressor",
            ModelKind::XgboostClassifier => "xgboost_classifier",
            ModelKind::LightgbmRegressor => "lightgbm_regressor",
            ModelKind::LightgbmClassifier => "lightgbm_classifier",
            ModelKind::CatboostRegressor => "catboost_regressor",
            ModelKind::CatboostClassifier => "catboost_classifier",
        }
    }

    /// Name of the underlying learner, e.g. `gbdt_clf` for every boosted
    /// classifier.
    pub fn learner_name(self) -> &'static str {
        match (self.family(), self.is_classifier()) {
            (Family::Linear, _) => "linear_regression",
            (Family::Logistic, _) => "logistic_regression",
            (Family::Forest, false) => "random_forest_reg",
            (Family::Forest, true) => "random_forest_clf",
            (Family::Boosting, false) => "gbdt_reg",
            (Family::Boosting, true) => "gbdt_clf",
        }
    }

    pub fn family(self) -> Family {
        match self {
            ModelKind::LinearRegression => Family::Linear,
            ModelKind::LogisticRegression => Family::Logistic,
            ModelKind::RandomForestRegressor | ModelKind::RandomForestClassifier => Family::Forest,
            _ => Family::Boosting,
        }
    }

    pub fn is_classifier(self) -> bool {
        matches!(
            self,
            ModelKind::LogisticRegression
                | ModelKind::RandomForestClassifier
                | ModelKind::XgboostClassifier
                | ModelKind::LightgbmClassifier
                | ModelKind::CatboostClassifier
        )
    }

    /// Hyperparameter names accepted by this kind, with their defaults.
    pub fn default_params(self) -> Params {
        let pairs: &[(&str, f64)] = match self {
            ModelKind::LinearRegression => &[("alpha", 0.0)],
            ModelKind::LogisticRegression => &[("C", 1.0), ("max_iter", 300.0)],
            ModelKind::RandomForestRegressor | ModelKind::RandomForestClassifier => {
                &[("n_estimators", 50.0), ("max_depth", 10.0), ("min_samples_leaf", 1.0)]
            }
            ModelKind::XgboostRegressor | ModelKind::XgboostClassifier => &[
                ("n_estimators", 50.0),
                ("max_depth", 6.0),
                ("learning_rate", 0.3),
                ("reg_lambda", 1.0),
                ("min_child_weight", 1.0),
            ],
            ModelKind::LightgbmRegressor | ModelKind::LightgbmClassifier => &[
                ("n_estimators", 50.0),
                ("max_depth", 6.0),
                ("learning_rate", 0.1),
                ("reg_lambda", 0.0),
                ("min_child_samples", 20.0),
            ],
            ModelKind::CatboostRegressor | ModelKind::CatboostClassifier => {
                &[("iterations", 50.0), ("depth", 6.0), ("learning_rate", 0.1), ("l2_leaf_reg", 3.0)]
            }
        };
        pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
    }

    /// Defaults overridden by `params`; unknown names are rejected.
    pub fn resolve_params(self, params: &Params) -> Result<Params> {
        let mut out = self.default_params();
        for (k, v) in params {
            match out.get_mut(k) {
                Some(slot) if v.is_finite() => *slot = *v,
                Some(_) => {
                    return Err(TabularError::InvalidArgument(format!("parameter '{k}' must be finite")))
                }
                None => {
                    return Err(TabularError::InvalidArgument(format!(
                        "{}() got an unexpected keyword argument '{k}'",
                        self.name()
                    )))
                }
            }
        }
        Ok(out)
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelKind {
    type Err = TabularError;

    fn from_str(s: &str) -> Result<ModelKind> {
        ModelKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| TabularError::InvalidArgument(format!("unknown model kind '{s}'")))
    }
}

/// Encoded training target.
#[derive(Clone, Debug, PartialEq)]
pub enum Target {
    Regression(Vec<f64>),
    Classification { labels: Vec<usize>, n_classes: usize },
}

impl Target {
    fn len(&self) -> usize {
        match self {
            Target::Regression(v) => v.len(),
            Target::Classification { labels, .. } => labels.len(),
        }
    }

    fn select(&self, idx: &[usize]) -> Target {
        match self {
            Target::Regression(v) => Target::Regression(idx.iter().map(|&i| v[i]).collect()),
            Target::Classification { labels, n_classes } => Target::Classification {
                labels: idx.iter().map(|&i| labels[i]).collect(),
                n_classes: *n_classes,
            },
        }
    }
}

/// Fitted learner state.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
enum Fitted {
    Linear(linear::Linear),
    Logistic(logistic::Logistic),
    Forest(forest::Forest),
    Boosted(gbdt::Gbdt),
}

impl Fitted {
    fn fit(kind: ModelKind, params: &Params, x: &Matrix, y: &Target, seed: u64) -> Result<Fitted> {
        Ok(match kind.family() {
            Family::Linear => match y {
                Target::Regression(v) => Fitted::Linear(linear::Linear::fit(x, v, params["alpha"])),
                Target::Classification { .. } => unreachable!("regressor with class labels"),
            },
            Family::Logistic => match y {
                Target::Classification { labels, n_classes } => Fitted::Logistic(logistic::Logistic::fit(
                    x,
                    labels,
                    *n_classes,
                    params["C"],
                    params["max_iter"] as usize,
                )),
                Target::Regression(_) => unreachable!("classifier with numeric target"),
            },
            Family::Forest => Fitted::Forest(forest::Forest::fit(x, y, &forest::ForestParams::from(params), seed)),
            Family::Boosting => Fitted::Boosted(gbdt::Gbdt::fit(x, y, &gbdt::GbdtParams::from_kind(kind, params))),
        })
    }

    /// One score vector per row: `[value]` for regressors, class
    /// probabilities for classifiers.
    fn predict(&self, x: &Matrix) -> Vec<Vec<f64>> {
        match self {
            Fitted::Linear(m) => (0..x.rows).map(|i| vec![m.predict_row(x.row(i))]).collect(),
            Fitted::Logistic(m) => (0..x.rows).map(|i| m.predict_proba_row(x.row(i))).collect(),
            Fitted::Forest(m) => (0..x.rows).map(|i| m.predict_row(x.row(i))).collect(),
            Fitted::Boosted(m) => (0..x.rows).map(|i| m.predict_row(x.row(i))).collect(),
        }
    }
}

fn argmax(p: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in p.iter().enumerate() {
        if *v > p[best] {
            best = i;
        }
    }
    best
}

/// A fitted model together with everything needed to predict on new tables
/// and to map predictions back to the original target values.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelArtifact {
    pub kind: ModelKind,
    pub feature_names: Vec<String>,
    pub target_name: String,
    pub target_dtype: DType,
    /// Class labels in encoding order (empty for regressors).
    pub classes: Vec<Value>,
    pub cv_score: f64,
    pub best_params: Params,
    fitted: Fitted,
}

impl ModelArtifact {
    pub fn is_classifier(&self) -> bool {
        self.kind.is_classifier()
    }

    fn check_features(&self, x: &Table) -> Result<()> {
        let names = x.column_names();
        if names == self.feature_names {
            return Ok(());
        }
        let missing = self.feature_names.iter().filter(|n| !names.contains(n)).cloned().collect();
        let extra = names.iter().filter(|n| !self.feature_names.contains(n)).cloned().collect();
        Err(TabularError::FeatureMismatch { missing, extra })
    }

    /// Raw scores per row (see [`Fitted::predict`]).
    pub fn predict_scores(&self, x: &Table) -> Result<Vec<Vec<f64>>> {
        self.check_features(x)?;
        Ok(self.fitted.predict(&Matrix::from_table(x)?))
    }

    /// Predictions as a column named after the target, in the target's
    /// original dtype.
    pub fn predict(&self, x: &Table) -> Result<Column> {
        let scores = self.predict_scores(x)?;
        let data = if self.is_classifier() {
            let values: Vec<Option<Value>> = scores.iter().map(|p| Some(self.classes[argmax(p)].clone())).collect();
            ColumnData::from_values(self.target_dtype, &values)?
        } else {
            ColumnData::Float(scores.iter().map(|p| Some(p[0])).collect())
        };
        Ok(Column::new(self.target_name.clone(), data))
    }

    /// Class probabilities, one column per class named `<target>_<class>`.
    pub fn predict_proba(&self, x: &Table) -> Result<Table> {
        if !self.is_classifier() {
            return Err(TabularError::InvalidArgument(format!(
                "{} does not provide class probabilities",
                self.kind
            )));
        }
        let scores = self.predict_scores(x)?;
        let cols = self
            .classes
            .iter()
            .enumerate()
            .map(|(k, c)| {
                Column::new(
                    format!("{}_{}", self.target_name, c.render()),
                    ColumnData::Float(scores.iter().map(|p| Some(p[k])).collect()),
                )
            })
            .collect();
        Table::new(cols)
    }

    pub fn summary(&self) -> String {
        format!(
            "{} trained on {} features (target '{}'), cv score {:.6}",
            self.kind,
            self.feature_names.len(),
            self.target_name,
            self.cv_score
        )
    }
}

/// Encode the target for `kind`. Class labels are ordered
/// lexicographically by their string form.
pub fn encode_target(kind: ModelKind, y: &Column) -> Result<(Target, Vec<Value>)> {
    if y.data.missing_count() > 0 {
        return Err(TabularError::TargetMissingValues);
    }
    if kind.is_classifier() {
        let mut firsts: HashMap<String, Value> = HashMap::new();
        let rendered: Vec<String> = y
            .data
            .values()
            .into_iter()
            .map(|v| {
                let v = v.expect("checked for missing");
                let s = v.render();
                firsts.entry(s.clone()).or_insert(v);
                s
            })
            .collect();
        let mut keys: Vec<String> = firsts.keys().cloned().collect();
        keys.sort();
        let index: HashMap<&str, usize> = keys.iter().enumerate().map(|(i, k)| (k.as_str(), i)).collect();
        let labels = rendered.iter().map(|s| index[s.as_str()]).collect();
        let classes = keys.iter().map(|k| firsts[k].clone()).collect();
        Ok((Target::Classification { labels, n_classes: keys.len() }, classes))
    } else {
        let values = y.data.to_f64().ok_or_else(|| {
            TabularError::NonNumericFeatures(vec![format!("{} (target of {})", y.name, kind)])
        })?;
        Ok((Target::Regression(values.into_iter().map(|v| v.unwrap_or(0.0)).collect()), Vec::new()))
    }
}

fn check_cv(cv: usize, n_rows: usize) -> Result<()> {
    if cv < 2 {
        return Err(TabularError::InvalidArgument(format!(
            "k-fold cross-validation requires at least one train/test split by setting n_splits=2 or more, got n_splits={cv}"
        )));
    }
    if cv > n_rows {
        return Err(TabularError::CvTooLarge { cv, n_rows });
    }
    Ok(())
}

/// Fold of every row: rows are shuffled with `seed` and dealt round-robin.
pub fn fold_assignment(n_rows: usize, cv: usize, seed: u64) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n_rows).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut fold = vec![0; n_rows];
    for (pos, &row) in order.iter().enumerate() {
        fold[row] = pos % cv;
    }
    fold
}

fn score(y: &Target, pred: &[Vec<f64>]) -> f64 {
    match y {
        Target::Classification { labels, .. } => {
            let hits = labels.iter().zip(pred).filter(|(l, p)| **l == argmax(p)).count();
            hits as f64 / labels.len() as f64
        }
        Target::Regression(v) => {
            let mse = v.iter().zip(pred).map(|(t, p)| (t - p[0]).powi(2)).sum::<f64>() / v.len() as f64;
            -mse.sqrt()
        }
    }
}

fn cross_val_score(kind: ModelKind, params: &Params, x: &Matrix, y: &Target, cv: usize, seed: u64) -> Result<f64> {
    let folds = fold_assignment(x.rows, cv, seed);
    let mut total = 0.0;
    for k in 0..cv {
        let train: Vec<usize> = (0..x.rows).filter(|&i| folds[i] != k).collect();
        let test: Vec<usize> = (0..x.rows).filter(|&i| folds[i] == k).collect();
        let model = Fitted::fit(kind, params, &x.select_rows(&train), &y.select(&train), seed)?;
        total += score(&y.select(&test), &model.predict(&x.select_rows(&test)));
    }
    Ok(total / cv as f64)
}

struct Prepared {
    x: Matrix,
    y: Target,
    classes: Vec<Value>,
}

fn prepare(kind: ModelKind, x: &Table, y: &Column, cv: usize) -> Result<Prepared> {
    if y.len() != x.n_rows() {
        return Err(TabularError::LengthMismatch { expected: x.n_rows(), got: y.len() });
    }
    let m = Matrix::from_table(x)?;
    let (target, classes) = encode_target(kind, y)?;
    check_cv(cv, target.len())?;
    Ok(Prepared { x: m, y: target, classes })
}

fn finish(kind: ModelKind, x: &Table, y: &Column, p: &Prepared, params: Params, cv_score: f64, seed: u64) -> Result<ModelArtifact> {
    let fitted = Fitted::fit(kind, &params, &p.x, &p.y, seed)?;
    Ok(ModelArtifact {
        kind,
        feature_names: x.column_names(),
        target_name: y.name.clone(),
        target_dtype: y.dtype(),
        classes: p.classes.clone(),
        cv_score,
        best_params: params,
        fitted,
    })
}

/// Cross-validate with `cv` folds, then refit on all rows.
pub fn fit(kind: ModelKind, x: &Table, y: &Column, cv: usize, params: &Params, seed: u64) -> Result<ModelArtifact> {
    let p = prepare(kind, x, y, cv)?;
    let params = kind.resolve_params(params)?;
    let cv_score = cross_val_score(kind, &params, &p.x, &p.y, cv, seed)?;
    finish(kind, x, y, &p, params, cv_score, seed)
}

/// Every point of `grid` as a full parameter set, in key order.
pub fn expand_grid(grid: &ParamGrid) -> Vec<Params> {
    let mut points = vec![Params::new()];
    for (name, values) in grid {
        points = points
            .into_iter()
            .flat_map(|p| {
                values.iter().map(move |v| {
                    let mut q = p.clone();
                    q.insert(name.clone(), *v);
                    q
                })
            })
            .collect();
    }
    points
}

/// Outcome of an exhaustive grid search.
#[derive(Clone, Debug)]
pub struct TuneResult {
    pub model: ModelArtifact,
    /// Cross-validation score of every grid point, in enumeration order.
    pub scores: Vec<(Params, f64)>,
}

/// Exhaustive grid search; the first best point wins ties. The winner is
/// refit on all rows.
pub fn tune(kind: ModelKind, x: &Table, y: &Column, cv: usize, grid: &ParamGrid, seed: u64) -> Result<TuneResult> {
    if grid.is_empty() || grid.values().any(Vec::is_empty) {
        return Err(TabularError::EmptyGrid(kind.name().to_string()));
    }
    let p = prepare(kind, x, y, cv)?;
    let mut scores = Vec::new();
    let mut best: Option<(Params, f64)> = None;
    for point in expand_grid(grid) {
        let params = kind.resolve_params(&point)?;
        let s = cross_val_score(kind, &params, &p.x, &p.y, cv, seed)?;
        if best.as_ref().is_none_or(|(_, b)| s > *b) {
            best = Some((params.clone(), s));
        }
        scores.push((point, s));
    }
    let (params, cv_score) = best.expect("grid is non-empty");
    let model = finish(kind, x, y, &p, params, cv_score, seed)?;
    Ok(TuneResult { model, scores })
}

/// Render parameters the way a Python dict would print them.
pub fn format_params(params: &Params) -> String {
    let items: Vec<String> = params
        .iter()
        .map(|(k, v)| {
            if v.fract() == 0.0 && v.abs() < 1e15 {
                format!("'{k}': {}", *v as i64)
            } else {
                format!("'{k}': {v}")
            }
        })
        .collect();
    format!("{{{}}}", items.join(", "))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table(cols: Vec<(&str, Vec<f64>)>) -> Table {
        Table::new(
            cols.into_iter()
                .map(|(n, v)| Column::new(n, ColumnData::Float(v.into_iter().map(Some).collect())))
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn folds_are_balanced_and_deterministic() {
        let a = fold_assignment(11, 3, 7);
        assert_eq!(a, fold_assignment(11, 3, 7));
        let counts: Vec<usize> = (0..3).map(|k| a.iter().filter(|f| **f == k).count()).collect();
        assert_eq!(counts, vec![4, 4, 3]);
    }

    #[test]
    fn grid_expansion_is_cartesian_in_key_order() {
        let grid: ParamGrid = [("b".to_string(), vec![1.0, 2.0]), ("a".to_string(), vec![0.5])].into();
        let pts = expand_grid(&grid);
        assert_eq!(pts.len(), 2);
        assert_eq!(format_params(&pts[0]), "{'a': 0.5, 'b': 1}");
        assert_eq!(format_params(&pts[1]), "{'a': 0.5, 'b': 2}");
    }

    #[test]
    fn cv_bounds() {
        let x = table(vec![("a", (0..10).map(f64::from).collect())]);
        let y = Column::new("y", ColumnData::Float((0..10).map(|i| Some(i as f64)).collect()));
        let err = fit(ModelKind::LinearRegression, &x, &y, 50, &Params::new(), 0).unwrap_err();
        assert_eq!(err, TabularError::CvTooLarge { cv: 50, n_rows: 10 });
        assert!(fit(ModelKind::LinearRegression, &x, &y, 1, &Params::new(), 0).is_err());
    }

    #[test]
    fn unknown_param_rejected() {
        let p: Params = [("gamma".to_string(), 1.0)].into();
        assert!(ModelKind::CatboostClassifier.resolve_params(&p).is_err());
    }

    #[test]
    fn feature_mismatch_lists_columns() {
        let x = table(vec![("a", vec![1.0, 2.0, 3.0, 4.0]), ("b", vec![0.0, 1.0, 0.0, 1.0])]);
        let y = Column::new("y", ColumnData::Float(vec![Some(1.0), Some(2.0), Some(3.0), Some(4.0)]));
        let m = fit(ModelKind::LinearRegression, &x, &y, 2, &Params::new(), 0).unwrap();
        let err = m.predict(&x.select(&["a"]).unwrap()).unwrap_err();
        assert_eq!(err, TabularError::FeatureMismatch { missing: vec!["b".into()], extra: vec![] });
    }

    #[test]
    fn class_labels_map_back_to_original_dtype() {
        let x = table(vec![("a", vec![0.0, 0.1, 0.2, 1.0, 1.1, 1.2])]);
        let y = Column::new("t", ColumnData::Bool(vec![Some(false), Some(false), Some(false), Some(true), Some(true), Some(true)]));
        let m = fit(ModelKind::RandomForestClassifier, &x, &y, 2, &Params::new(), 3).unwrap();
        let pred = m.predict(&x).unwrap();
        assert_eq!(pred.data, y.data);
        assert_eq!(m.classes, vec![Value::Bool(false), Value::Bool(true)]);
    }
}
