use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use toolplan_tabular::{FeatureTargetSplit, MetricsReport, ModelArtifact, Table, TRACKING_COLUMN};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ObjectKind {
    Table,
    Model,
    FeatureTargetSplit,
    TrainTestPair,
    PredictionTable,
    MetricsReport,
    Scalar,
    Text,
}

impl ObjectKind {
    pub const ALL: [ObjectKind; 8] = [
        ObjectKind::Table,
        ObjectKind::Model,
        ObjectKind::FeatureTargetSplit,
        ObjectKind::TrainTestPair,
        ObjectKind::PredictionTable,
        ObjectKind::MetricsReport,
        ObjectKind::Scalar,
        ObjectKind::Text,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ObjectKind::Table => "Table",
            ObjectKind::Model => "Model",
            ObjectKind::FeatureTargetSplit => "FeatureTargetSplit",
            ObjectKind::TrainTestPair => "TrainTestPair",
            ObjectKind::PredictionTable => "PredictionTable",
            ObjectKind::MetricsReport => "MetricsReport",
            ObjectKind::Scalar => "Scalar",
            ObjectKind::Text => "Text",
        }
    }

    /// Kinds that carry a plain table a dataframe parameter can consume.
    pub fn is_dataframe(self) -> bool {
        matches!(self, ObjectKind::Table | ObjectKind::TrainTestPair | ObjectKind::PredictionTable)
    }
}

impl fmt::Display for ObjectKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// An immutable, cheaply cloneable scratchpad value.
#[derive(Clone, Debug, PartialEq)]
pub enum Artifact {
    Table(Arc<Table>),
    Model(Arc<ModelArtifact>),
    FeatureTargetSplit(Arc<FeatureTargetSplit>),
    /// A combined train/test table carrying the tracking column.
    TrainTestPair(Arc<Table>),
    PredictionTable(Arc<Table>),
    MetricsReport(Arc<MetricsReport>),
    Scalar(f64),
    Text(Arc<str>),
}

impl Artifact {
    pub fn kind(&self) -> ObjectKind {
        match self {
            Artifact::Table(_) => ObjectKind::Table,
            Artifact::Model(_) => ObjectKind::Model,
            Artifact::FeatureTargetSplit(_) => ObjectKind::FeatureTargetSplit,
            Artifact::TrainTestPair(_) => ObjectKind::TrainTestPair,
            Artifact::PredictionTable(_) => ObjectKind::PredictionTable,
            Artifact::MetricsReport(_) => ObjectKind::MetricsReport,
            Artifact::Scalar(_) => ObjectKind::Scalar,
            Artifact::Text(_) => ObjectKind::Text,
        }
    }

    /// Wrap a table, tagging it as a train/test pair when the tracking
    /// column is intact.
    pub fn table(t: Table) -> Artifact {
        let tracked = t
            .column(TRACKING_COLUMN)
            .map(|c| c.dtype() == toolplan_tabular::DType::Bool && c.data.missing_count() == 0)
            .unwrap_or(false);
        if tracked {
            Artifact::TrainTestPair(Arc::new(t))
        } else {
            Artifact::Table(Arc::new(t))
        }
    }

    pub fn text(s: impl Into<String>) -> Artifact {
        Artifact::Text(Arc::from(s.into()))
    }

    pub fn as_table(&self) -> Option<&Table> {
        match self {
            Artifact::Table(t) | Artifact::TrainTestPair(t) | Artifact::PredictionTable(t) => Some(t),
            _ => None,
        }
    }

    pub fn as_model(&self) -> Option<&ModelArtifact> {
        match self {
            Artifact::Model(m) => Some(m),
            _ => None,
        }
    }

    pub fn summary(&self) -> String {
        match self {
            Artifact::Table(t) | Artifact::TrainTestPair(t) | Artifact::PredictionTable(t) => t.summary(),
            Artifact::Model(m) => m.summary(),
            Artifact::FeatureTargetSplit(s) => match &s.y {
                Some(y) => format!("features {} and target '{}' ({} values)", s.x.summary(), y.name, y.len()),
                None => format!("features {} without target", s.x.summary()),
            },
            Artifact::MetricsReport(r) => r.to_string(),
            Artifact::Scalar(v) => v.to_string(),
            Artifact::Text(s) => s.to_string(),
        }
    }

    /// Key naming the stored value behind this handle.
    pub fn handle_key(&self) -> String {
        match self {
            Artifact::Table(a) | Artifact::TrainTestPair(a) | Artifact::PredictionTable(a) => {
                format!("{}@{:p}", self.kind().as_str(), Arc::as_ptr(a))
            }
            Artifact::Model(a) => format!("Model@{:p}", Arc::as_ptr(a)),
            Artifact::FeatureTargetSplit(a) => format!("Split@{:p}", Arc::as_ptr(a)),
            Artifact::MetricsReport(a) => format!("Metrics@{:p}", Arc::as_ptr(a)),
            Artifact::Text(a) => format!("Text@{:p}", Arc::as_ptr(a)),
            Artifact::Scalar(v) => format!("Scalar={}", v.to_bits()),
        }
    }

    /// Identity comparison: two handles to the same stored value.
    pub fn same_handle(&self, other: &Artifact) -> bool {
        match (self, other) {
            (Artifact::Table(a), Artifact::Table(b))
            | (Artifact::TrainTestPair(a), Artifact::TrainTestPair(b))
            | (Artifact::PredictionTable(a), Artifact::PredictionTable(b)) => Arc::ptr_eq(a, b),
            (Artifact::Model(a), Artifact::Model(b)) => Arc::ptr_eq(a, b),
            (Artifact::FeatureTargetSplit(a), Artifact::FeatureTargetSplit(b)) => Arc::ptr_eq(a, b),
            (Artifact::MetricsReport(a), Artifact::MetricsReport(b)) => Arc::ptr_eq(a, b),
            (Artifact::Text(a), Artifact::Text(b)) => Arc::ptr_eq(a, b),
            (Artifact::Scalar(a), Artifact::Scalar(b)) => a.to_bits() == b.to_bits(),
            _ => false,
        }
    }
}
