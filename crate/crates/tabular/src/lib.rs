//! In-memory tables, a small expression language, cleaning and feature
//! operations, and desk-scale learners for tabular competitions.

pub mod csvio;
pub mod error;
pub mod expr;
pub mod learn;
pub mod metrics;
pub mod ops;
pub mod persist;
pub mod table;

pub use error::{Result, TabularError};
pub use learn::{ModelArtifact, ModelKind, ParamGrid, Params};
pub use metrics::MetricsReport;
pub use ops::FeatureTargetSplit;
pub use table::{Column, ColumnData, DType, Table, Value, TRACKING_COLUMN};
