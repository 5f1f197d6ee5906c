//! Scratchpad-backed tool registry, shaped stage rewards and tree-search
//! planners for building tabular ML pipelines out of tool calls.

pub mod artifact;
pub mod competition;
pub mod harness;
pub mod llm;
pub mod message;
pub mod mock;
pub mod playbook;
pub mod policy;
pub mod registry;
pub mod rewards;
pub mod scratchpad;
pub mod search;
pub mod stage;
pub mod tools;
pub mod trajlog;

pub use artifact::{Artifact, ObjectKind};
pub use message::{Message, Role, ToolCall};
pub use registry::{Registry, RegistryView, ToolEnv, ToolResult};
pub use scratchpad::{NodeId, NodePad, PathView, Scratchpad};
pub use stage::{StageId, StageSet};
