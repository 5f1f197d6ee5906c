//! Competition definitions, bundled synthetic datasets and train/test preparation.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use toolplan_tabular::csvio::{read_csv, write_csv};
use toolplan_tabular::{Column, ColumnData, Table, TabularError};

pub const DEFAULT_SAMPLE_N: usize = 10_000;
pub const DEFAULT_TEST_FRACTION: f64 = 0.2;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TaskKind {
    Regression,
    Binary,
    Multiclass,
}

impl TaskKind {
    pub fn is_classification(self) -> bool {
        self != TaskKind::Regression
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Rmse,
    Rmsle,
    Mae,
    Accuracy,
    F1,
    Auc,
}

impl Metric {
    pub fn as_str(self) -> &'static str {
        match self {
            Metric::Rmse => "rmse",
            Metric::Rmsle => "rmsle",
            Metric::Mae => "mae",
            Metric::Accuracy => "accuracy",
            Metric::F1 => "f1",
            Metric::Auc => "auc",
        }
    }

    fn suits(self, task: TaskKind) -> bool {
        match self {
            Metric::Rmse | Metric::Rmsle | Metric::Mae => task == TaskKind::Regression,
            Metric::Accuracy | Metric::F1 => task.is_classification(),
            Metric::Auc => task == TaskKind::Binary,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldDoc {
    pub name: String,
    pub description: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SubmissionColumn {
    pub name: String,
    pub dtype: String,
    pub description: String,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Generator {
    Spaceship,
    Housing,
    Terrain,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum Source {
    Synthetic { generator: Generator, rows: usize, seed: u64 },
    /// Path relative to the data directory.
    Csv { path: String },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompetitionSpec {
    pub name: String,
    pub title: String,
    pub task: TaskKind,
    pub target: String,
    pub id_column: String,
    pub metric: Metric,
    pub higher_is_better: bool,
    /// Leaderboard file with one score per line.
    pub leaderboard: String,
    pub description: String,
    #[serde(default)]
    pub fields: Vec<FieldDoc>,
    pub submission: Vec<SubmissionColumn>,
    pub source: Source,
    #[serde(default = "default_sample_n")]
    pub sample_n: usize,
    #[serde(default = "default_test_fraction")]
    pub test_fraction: f64,
    pub split_seed: u64,
}

fn default_sample_n() -> usize {
    DEFAULT_SAMPLE_N
}

fn default_test_fraction() -> f64 {
    DEFAULT_TEST_FRACTION
}

#[derive(Debug, thiserror::Error)]
pub enum CompetitionError {
    #[error("unknown competition `{0}`")]
    Unknown(String),
    #[error("invalid competition config: {0}")]
    Config(String),
    #[error("source data not found at {0} (download the competition files there)")]
    SourceMissing(PathBuf),
    #[error("leaderboard not found at {0}")]
    LeaderboardMissing(PathBuf),
    #[error("leaderboard is empty")]
    EmptyLeaderboard,
    #[error("source has {0} rows, need at least 2")]
    SourceTooSmall(usize),
    #[error("source is missing column `{0}`")]
    MissingColumn(String),
    #[error(transparent)]
    Tabular(#[from] TabularError),
    #[error("io error on {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CompetitionError + '_ {
    move |source| CompetitionError::Io { path: path.to_path_buf(), source }
}

macro_rules! bundled {
    ($($name:literal),* $(,)?) => {
        &[$(($name, include_str!(concat!("../assets/competitions/", $name, ".toml")))),*]
    };
}

const BUNDLED: &[(&str, &str)] = bundled!(
    "synthetic_spaceship",
    "synthetic_housing",
    "synthetic_terrain",
    "santander_value",
    "nyc_taxi_fare",
    "nyc_taxi_duration",
    "bpm_prediction",
    "calorie_expenditure",
    "california_housing",
    "used_car_prices",
    "porto_seguro",
    "costa_rican_poverty",
    "forest_cover",
    "santander_transaction",
    "poisonous_mushrooms",
    "spaceship_titanic",
    "bank_deposit",
    "bank_churn",
);

const BUNDLED_LEADERBOARDS: &[(&str, &str)] = &[
    ("synthetic_spaceship.leaderboard", include_str!("../assets/competitions/synthetic_spaceship.leaderboard")),
    ("synthetic_housing.leaderboard", include_str!("../assets/competitions/synthetic_housing.leaderboard")),
    ("synthetic_terrain.leaderboard", include_str!("../assets/competitions/synthetic_terrain.leaderboard")),
];

/// A loaded competition and where its relative files resolve from.
#[derive(Clone, Debug)]
pub struct Competition {
    pub spec: CompetitionSpec,
    /// Directory of a user-supplied config, `None` for bundled ones.
    pub config_dir: Option<PathBuf>,
}

impl CompetitionSpec {
    pub fn parse(text: &str) -> Result<CompetitionSpec, CompetitionError> {
        let spec: CompetitionSpec = toml::from_str(text).map_err(|e| CompetitionError::Config(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), CompetitionError> {
        let bad = |m: String| Err(CompetitionError::Config(m));
        if !self.metric.suits(self.task) {
            return bad(format!("metric {} does not fit a {:?} task", self.metric.as_str(), self.task));
        }
        if !(self.test_fraction > 0.0 && self.test_fraction < 1.0) {
            return bad(format!("test_fraction must be in (0, 1), got {}", self.test_fraction));
        }
        if self.sample_n < 2 {
            return bad("sample_n must be at least 2".into());
        }
        if self.target == self.id_column {
            return bad("target and id_column must differ".into());
        }
        let names: Vec<&str> = self.submission.iter().map(|c| c.name.as_str()).collect();
        if names != [self.id_column.as_str(), self.target.as_str()] {
            return bad(format!("submission columns must be [{}, {}]", self.id_column, self.target));
        }
        Ok(())
    }
}

/// Every bundled competition, in a fixed order.
pub fn bundled() -> Vec<CompetitionSpec> {
    BUNDLED
        .iter()
        .map(|(name, text)| CompetitionSpec::parse(text).unwrap_or_else(|e| panic!("bundled config {name}: {e}")))
        .collect()
}

impl Competition {
    /// Look a competition up by name, in `config_dir` first when given.
    pub fn find(name: &str, config_dir: Option<&Path>) -> Result<Competition, CompetitionError> {
        if let Some(dir) = config_dir {
            let path = dir.join(format!("{name}.toml"));
            if path.exists() {
                let text = fs::read_to_string(&path).map_err(io_err(&path))?;
                return Ok(Competition { spec: CompetitionSpec::parse(&text)?, config_dir: Some(dir.to_path_buf()) });
            }
        }
        BUNDLED
            .iter()
            .find(|(n, _)| *n == name)
            .map(|(_, text)| Competition { spec: CompetitionSpec::parse(text).expect("bundled config"), config_dir: None })
            .ok_or_else(|| CompetitionError::Unknown(name.to_string()))
    }

    fn resolve(&self, rel: &str, data_dir: &Path) -> PathBuf {
        match &self.config_dir {
            Some(d) if d.join(rel).exists() => d.join(rel),
            _ => data_dir.join(rel),
        }
    }

    /// Leaderboard scores, from the bundled copy or from disk.
    pub fn leaderboard(&self, data_dir: &Path) -> Result<Vec<f64>, CompetitionError> {
        let text = match BUNDLED_LEADERBOARDS.iter().find(|(n, _)| *n == self.spec.leaderboard) {
            Some((_, t)) if self.config_dir.is_none() => t.to_string(),
            _ => {
                let path = self.resolve(&self.spec.leaderboard, data_dir);
                if !path.exists() {
                    return Err(CompetitionError::LeaderboardMissing(path));
                }
                fs::read_to_string(&path).map_err(io_err(&path))?
            }
        };
        parse_leaderboard(&text)
    }

    /// The full labelled source table.
    pub fn load_source(&self, data_dir: &Path) -> Result<Table, CompetitionError> {
        match &self.spec.source {
            Source::Synthetic { generator, rows, seed } => Ok(generate(*generator, *rows, *seed)),
            Source::Csv { path } => {
                let p = self.resolve(path, data_dir);
                if !p.exists() {
                    return Err(CompetitionError::SourceMissing(p));
                }
                Ok(read_csv(&p)?)
            }
        }
    }
}

pub fn parse_leaderboard(text: &str) -> Result<Vec<f64>, CompetitionError> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let v: f64 = line
            .parse()
            .map_err(|_| CompetitionError::Config(format!("leaderboard line {}: `{line}` is not a number", i + 1)))?;
        out.push(v);
    }
    if out.is_empty() {
        return Err(CompetitionError::EmptyLeaderboard);
    }
    Ok(out)
}

/// Relative locations of a competition's files under the run directory.
#[derive(Clone, Debug, PartialEq)]
pub struct Layout {
    pub train: String,
    pub test: String,
    pub labels: String,
    pub model_dir: String,
}

impl Layout {
    pub fn new(competition: &str) -> Layout {
        Layout {
            train: format!("data/{competition}/train.csv"),
            test: format!("data/{competition}/test.csv"),
            labels: format!("private/{competition}/labels.csv"),
            model_dir: format!("model_saves/{competition}/"),
        }
    }

    pub fn submission(competition: &str, algorithm: &str, seed: u64) -> String {
        format!("submissions/{competition}/{algorithm}/trial_{seed}.csv")
    }

    pub fn log(competition: &str, algorithm: &str, seed: u64) -> String {
        format!("logs/{competition}/{algorithm}/trial_{seed}.json")
    }
}

/// The prepared split of a competition.
#[derive(Clone, Debug)]
pub struct PreparedData {
    pub layout: Layout,
    pub train_rows: usize,
    pub test_rows: usize,
    /// Column count of the train file, target included.
    pub original_columns: usize,
    /// Id and target of the test rows.
    pub labels: Table,
    pub test_ids: Arc<Column>,
    /// Non-target text or category columns of the train file, id excluded.
    pub categorical: Vec<String>,
}

/// Subsample the source to `sample_n` rows, split off a test fraction and
/// write train, test (target removed) and private labels under `out_dir`.
pub fn prepare_splits(spec: &CompetitionSpec, source: &Table, out_dir: &Path) -> Result<PreparedData, CompetitionError> {
    for c in [&spec.target, &spec.id_column] {
        if !source.has_column(c) {
            return Err(CompetitionError::MissingColumn(c.clone()));
        }
    }
    let n = source.n_rows();
    if n < 2 {
        return Err(CompetitionError::SourceTooSmall(n));
    }
    let (train_idx, test_idx) = split_indices(n, spec.sample_n, spec.test_fraction, spec.split_seed);
    let train = source.take_rows(&train_idx);
    let test_full = source.take_rows(&test_idx);
    let test = test_full.without_columns(&[&spec.target])?;
    let labels = test_full.select(&[&spec.id_column, &spec.target])?;

    let layout = Layout::new(&spec.name);
    for (rel, table) in [(&layout.train, &train), (&layout.test, &test), (&layout.labels, &labels)] {
        let path = out_dir.join(rel);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(io_err(parent))?;
        }
        write_csv(table, &path)?;
    }
    fs::create_dir_all(out_dir.join(&layout.model_dir)).map_err(io_err(out_dir))?;

    // Dtypes as a reader of the written file sees them.
    let written = read_csv(out_dir.join(&layout.train))?;
    let categorical = written
        .columns()
        .iter()
        .filter(|c| c.name != spec.target && c.name != spec.id_column && c.dtype().is_stringly())
        .map(|c| c.name.clone())
        .collect();
    let labels = read_csv(out_dir.join(&layout.labels))?;
    let test_ids = Arc::new(labels.column(&spec.id_column)?.clone());
    Ok(PreparedData {
        layout,
        train_rows: train.n_rows(),
        test_rows: test.n_rows(),
        original_columns: train.n_cols(),
        labels,
        test_ids,
        categorical,
    })
}

/// Sorted train and test row indices: a seeded shuffle, the first
/// `min(sample_n, n)` rows kept, then `round(m * test_fraction)` of those
/// (at least one, leaving at least one) taken as test.
pub fn split_indices(n: usize, sample_n: usize, test_fraction: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut idx: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    idx.shuffle(&mut rng);
    let m = sample_n.clamp(2, n.max(2)).min(n);
    idx.truncate(m);
    let test_n = ((m as f64 * test_fraction).round() as usize).clamp(1, m - 1);
    let mut test = idx[..test_n].to_vec();
    let mut train = idx[test_n..].to_vec();
    test.sort_unstable();
    train.sort_unstable();
    (train, test)
}

fn maybe<T>(rng: &mut ChaCha8Rng, p_missing: f64, v: T) -> Option<T> {
    (rng.random::<f64>() >= p_missing).then_some(v)
}

fn pick<'a>(rng: &mut ChaCha8Rng, choices: &[(&'a str, f64)]) -> &'a str {
    let mut u = rng.random::<f64>();
    for (c, w) in choices {
        if u < *w {
            return c;
        }
        u -= w;
    }
    choices.last().expect("choices").0
}

fn spend(rng: &mut ChaCha8Rng, asleep: bool) -> f64 {
    if asleep || rng.random::<f64>() < 0.55 {
        0.0
    } else {
        (-(1.0 - rng.random::<f64>()).ln() * 400.0).round()
    }
}

fn text(v: Vec<Option<String>>) -> ColumnData {
    ColumnData::Text(v)
}

/// Build a bundled synthetic dataset.
pub fn generate(generator: Generator, rows: usize, seed: u64) -> Table {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let columns = match generator {
        Generator::Spaceship => spaceship(&mut rng, rows),
        Generator::Housing => housing(&mut rng, rows),
        Generator::Terrain => terrain(&mut rng, rows),
    };
    Table::new(columns).expect("generated columns have equal length")
}

fn spaceship(rng: &mut ChaCha8Rng, n: usize) -> Vec<Column> {
    const MISSING: f64 = 0.02;
    let age_dist = Normal::new(29.0, 14.0).expect("normal");
    let mut id = Vec::with_capacity(n);
    let (mut home, mut cryo, mut dest, mut age, mut vip) = (vec![], vec![], vec![], vec![], vec![]);
    let mut spends: [Vec<Option<f64>>; 5] = Default::default();
    let mut label = Vec::with_capacity(n);
    let (mut group, mut member) = (1usize, 1usize);
    for _ in 0..n {
        id.push(Some(format!("{group:04}_{member:02}")));
        if rng.random::<f64>() < 0.6 {
            group += 1;
            member = 1;
        } else {
            member += 1;
        }
        let h = pick(rng, &[("Earth", 0.5), ("Europa", 0.25), ("Mars", 0.25)]);
        let d = pick(rng, &[("TRAPPIST-1e", 0.7), ("55 Cancri e", 0.2), ("PSO J318.5-22", 0.1)]);
        let asleep = rng.random::<f64>() < 0.35;
        let a: f64 = age_dist.sample(rng);
        let a = a.clamp(0.0, 79.0).round();
        let v = rng.random::<f64>() < 0.03;
        let s: Vec<f64> = (0..5).map(|_| spend(rng, asleep)).collect();
        let total: f64 = s.iter().sum();
        let logit = 2.8 * f64::from(u8::from(asleep)) - 0.004 * total
            + match h {
                "Europa" => 1.2,
                "Earth" => -0.5,
                _ => 0.0,
            }
            + if d == "55 Cancri e" { 0.5 } else { 0.0 }
            + if a < 13.0 { 0.8 } else { 0.0 }
            + 0.3;
        label.push(Some(rng.random::<f64>() < 1.0 / (1.0 + (-logit).exp())));
        home.push(maybe(rng, MISSING, h.to_string()));
        cryo.push(maybe(rng, MISSING, asleep));
        dest.push(maybe(rng, MISSING, d.to_string()));
        age.push(maybe(rng, MISSING, a));
        vip.push(maybe(rng, MISSING, v));
        for (col, x) in spends.iter_mut().zip(s) {
            col.push(maybe(rng, MISSING, x));
        }
    }
    let [room, food, mall, spa, vr] = spends;
    vec![
        Column::new("PassengerId", text(id)),
        Column::new("HomePlanet", text(home)),
        Column::new("CryoSleep", ColumnData::Bool(cryo)),
        Column::new("Destination", text(dest)),
        Column::new("Age", ColumnData::Float(age)),
        Column::new("VIP", ColumnData::Bool(vip)),
        Column::new("RoomService", ColumnData::Float(room)),
        Column::new("FoodCourt", ColumnData::Float(food)),
        Column::new("ShoppingMall", ColumnData::Float(mall)),
        Column::new("Spa", ColumnData::Float(spa)),
        Column::new("VRDeck", ColumnData::Float(vr)),
        Column::new("Transported", ColumnData::Bool(label)),
    ]
}

fn housing(rng: &mut ChaCha8Rng, n: usize) -> Vec<Column> {
    const MISSING: f64 = 0.03;
    let std = Normal::new(0.0, 1.0).expect("normal");
    let noise = Normal::new(0.0, 2.0).expect("normal");
    let (mut area, mut rooms, mut age, mut region, mut price) = (vec![], vec![], vec![], vec![], vec![]);
    for _ in 0..n {
        let (a, r, g): (f64, f64, f64) = (std.sample(rng), std.sample(rng), std.sample(rng));
        let reg = pick(rng, &[("North", 0.25), ("South", 0.25), ("East", 0.25), ("West", 0.25)]);
        let effect = match reg {
            "North" => 5.0,
            "South" => -5.0,
            "East" => 2.0,
            _ => 0.0,
        };
        let y = 50.0 + 10.0 * a - 6.0 * r + 3.0 * g + effect + noise.sample(rng);
        price.push(Some((y * 100.0).round() / 100.0));
        area.push(maybe(rng, MISSING, (a * 1000.0).round() / 1000.0));
        rooms.push(Some((r * 1000.0).round() / 1000.0));
        age.push(Some((g * 1000.0).round() / 1000.0));
        region.push(maybe(rng, MISSING, reg.to_string()));
    }
    vec![
        Column::new("id", ColumnData::Int((1..=n as i64).map(Some).collect())),
        Column::new("area", ColumnData::Float(area)),
        Column::new("rooms", ColumnData::Float(rooms)),
        Column::new("age", ColumnData::Float(age)),
        Column::new("region", text(region)),
        Column::new("price", ColumnData::Float(price)),
    ]
}

fn terrain(rng: &mut ChaCha8Rng, n: usize) -> Vec<Column> {
    const MISSING: f64 = 0.02;
    let std = Normal::new(0.0, 1.0).expect("normal");
    let jitter = Normal::new(0.0, 0.4).expect("normal");
    let mut feats: [Vec<Option<f64>>; 4] = Default::default();
    let (mut kind, mut cover) = (vec![], vec![]);
    for _ in 0..n {
        let f: [f64; 4] = std::array::from_fn(|_| std.sample(rng));
        let t = pick(rng, &[("flat", 0.4), ("hill", 0.35), ("mountain", 0.25)]);
        let scores = [
            2.0 * f[0] + if t == "flat" { 1.0 } else { 0.0 } + jitter.sample(rng),
            2.0 * f[1] + if t == "hill" { 1.0 } else { 0.0 } + jitter.sample(rng),
            2.0 * f[2] - f[0] + f[3] + if t == "mountain" { 1.0 } else { 0.0 } + jitter.sample(rng),
        ];
        let best = (0..3).fold(0, |b, i| if scores[i] > scores[b] { i } else { b });
        cover.push(Some(["A", "B", "C"][best].to_string()));
        for (i, (col, x)) in feats.iter_mut().zip(f).enumerate() {
            let x = (x * 1000.0).round() / 1000.0;
            col.push(if i == 0 { maybe(rng, MISSING, x) } else { Some(x) });
        }
        kind.push(maybe(rng, MISSING, t.to_string()));
    }
    let [elevation, slope, moisture, shade] = feats;
    vec![
        Column::new("Id", ColumnData::Int((1..=n as i64).map(Some).collect())),
        Column::new("elevation", ColumnData::Float(elevation)),
        Column::new("slope", ColumnData::Float(slope)),
        Column::new("moisture", ColumnData::Float(moisture)),
        Column::new("shade", ColumnData::Float(shade)),
        Column::new("terrain", text(kind)),
        Column::new("Cover", text(cover)),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_configs_parse() {
        let all = bundled();
        assert_eq!(all.len(), 18);
        assert_eq!(all.iter().filter(|c| matches!(c.source, Source::Synthetic { .. })).count(), 3);
        for c in &all {
            assert_eq!(c.sample_n, DEFAULT_SAMPLE_N);
        }
    }

    #[test]
    fn metric_must_fit_task() {
        let text = BUNDLED[0].1.replace("metric = \"accuracy\"", "metric = \"rmse\"");
        assert!(matches!(CompetitionSpec::parse(&text), Err(CompetitionError::Config(_))));
    }

    #[test]
    fn split_sizes() {
        let (tr, te) = split_indices(50_000, 10_000, 0.2, 1);
        assert_eq!((tr.len(), te.len()), (8000, 2000));
        let (tr, te) = split_indices(6000, 10_000, 0.2, 1);
        assert_eq!((tr.len(), te.len()), (4800, 1200));
        let (tr, te) = split_indices(2, 10_000, 0.2, 1);
        assert_eq!((tr.len(), te.len()), (1, 1));
    }

    #[test]
    fn generators_are_deterministic() {
        for g in [Generator::Spaceship, Generator::Housing, Generator::Terrain] {
            let a = generate(g, 200, 4);
            assert_eq!(a, generate(g, 200, 4));
            assert_eq!(a.n_rows(), 200);
            assert!(a.missing_cells() > 0);
        }
    }

    #[test]
    fn empty_leaderboard_is_an_error() {
        assert!(matches!(parse_leaderboard("\n# nothing\n"), Err(CompetitionError::EmptyLeaderboard)));
        assert_eq!(parse_leaderboard("0.5\n0.7\n").unwrap(), vec![0.5, 0.7]);
    }
}
