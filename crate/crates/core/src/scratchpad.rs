//! Named-object store with one pad per search node.
//!
//! A node's pad holds only what the tool call at that node produced. What a
//! node can see is the union of the pads on its root path, where the deepest
//! definition of a name wins.

use std::collections::BTreeMap;

use serde::Serialize;
use thiserror::Error;

use crate::artifact::{Artifact, ObjectKind};

pub const DEFAULT_SOFT_CAP: usize = 256;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct NodeId(pub usize);

#[derive(Clone, Debug, PartialEq, Error)]
pub enum ScratchpadError {
    #[error("Key '{name}' is already defined in this node")]
    DuplicateNameInNode { name: String },
    #[error("Scratchpad names must be non-empty")]
    EmptyName,
    #[error("Key '{name}' not found in scratchpad. Available keys: {available:?}")]
    NameNotFound { name: String, available: Vec<String> },
}

#[derive(Clone, Debug)]
pub struct Entry {
    pub name: String,
    pub kind: ObjectKind,
    pub value: Artifact,
    pub created_by: String,
}

#[derive(Clone, Debug, Default)]
pub struct NodePad {
    entries: Vec<Entry>,
}

impl NodePad {
    pub fn new() -> NodePad {
        NodePad::default()
    }

    pub fn put(&mut self, name: &str, value: Artifact, created_by: &str) -> Result<(), ScratchpadError> {
        if name.is_empty() {
            return Err(ScratchpadError::EmptyName);
        }
        if self.get(name).is_some() {
            return Err(ScratchpadError::DuplicateNameInNode { name: name.to_string() });
        }
        self.entries.push(Entry { name: name.to_string(), kind: value.kind(), value, created_by: created_by.to_string() });
        Ok(())
    }

    pub fn get(&self, name: &str) -> Option<&Entry> {
        self.entries.iter().find(|e| e.name == name)
    }

    pub fn entries(&self) -> &[Entry] {
        &self.entries
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }
}

/// Root-to-node chain of node ids.
#[derive(Clone, Debug, PartialEq, Eq, Default, Serialize)]
pub struct PathView {
    path: Vec<NodeId>,
}

impl PathView {
    pub fn root(id: NodeId) -> PathView {
        PathView { path: vec![id] }
    }

    pub fn from_path(path: Vec<NodeId>) -> PathView {
        PathView { path }
    }

    pub fn nodes(&self) -> &[NodeId] {
        &self.path
    }

    pub fn last(&self) -> Option<NodeId> {
        self.path.last().copied()
    }

    pub fn len(&self) -> usize {
        self.path.len()
    }

    pub fn is_empty(&self) -> bool {
        self.path.is_empty()
    }

    /// The view of a child of this view's last node. `self` is untouched.
    pub fn branch(&self, child: NodeId) -> PathView {
        let mut path = self.path.clone();
        path.push(child);
        PathView { path }
    }

    pub fn is_prefix_of(&self, other: &PathView) -> bool {
        other.path.starts_with(&self.path)
    }
}

/// Pads for every node of one search tree.
#[derive(Clone, Debug)]
pub struct Scratchpad {
    pads: BTreeMap<NodeId, NodePad>,
    soft_cap: usize,
}

impl Default for Scratchpad {
    fn default() -> Self {
        Scratchpad::new(DEFAULT_SOFT_CAP)
    }
}

#[derive(Serialize)]
struct DumpEntry<'a> {
    name: &'a str,
    kind: &'a str,
    summary: String,
}

#[derive(Serialize)]
struct DumpNode<'a> {
    node: usize,
    entries: Vec<DumpEntry<'a>>,
}

impl Scratchpad {
    pub fn new(soft_cap: usize) -> Scratchpad {
        Scratchpad { pads: BTreeMap::new(), soft_cap }
    }

    /// Install the finished pad of `node`.
    pub fn insert(&mut self, node: NodeId, pad: NodePad) {
        self.pads.insert(node, pad);
    }

    pub fn pad(&self, node: NodeId) -> Option<&NodePad> {
        self.pads.get(&node)
    }

    /// Deepest definition of `name` along `view`.
    pub fn resolve(&self, view: &PathView, name: &str) -> Result<&Entry, ScratchpadError> {
        view.nodes()
            .iter()
            .rev()
            .find_map(|n| self.pads.get(n).and_then(|p| p.get(name)))
            .ok_or_else(|| ScratchpadError::NameNotFound { name: name.to_string(), available: self.available(view) })
    }

    /// Names visible along `view`, sorted.
    pub fn available(&self, view: &PathView) -> Vec<String> {
        self.visible(view).into_iter().map(|(e, _)| e.name.clone()).collect()
    }

    /// Visible entries (deepest wins) with the index in `view` of the node
    /// that defines them, sorted by name.
    pub fn visible(&self, view: &PathView) -> Vec<(&Entry, usize)> {
        let mut out: BTreeMap<&str, (&Entry, usize)> = BTreeMap::new();
        for (depth, n) in view.nodes().iter().enumerate() {
            if let Some(p) = self.pads.get(n) {
                for e in p.entries() {
                    out.insert(e.name.as_str(), (e, depth));
                }
            }
        }
        if out.len() > self.soft_cap {
            log::warn!("scratchpad path holds {} entries (soft cap {})", out.len(), self.soft_cap);
        }
        out.into_values().collect()
    }

    /// JSON array of `{node, entries: [{name, kind, summary}]}` along `view`.
    pub fn dump(&self, view: &PathView) -> serde_json::Value {
        let nodes: Vec<DumpNode> = view
            .nodes()
            .iter()
            .map(|n| DumpNode {
                node: n.0,
                entries: self
                    .pads
                    .get(n)
                    .map(|p| {
                        p.entries()
                            .iter()
                            .map(|e| DumpEntry { name: &e.name, kind: e.kind.as_str(), summary: e.value.summary() })
                            .collect()
                    })
                    .unwrap_or_default(),
            })
            .collect();
        serde_json::to_value(nodes).expect("dump is serializable")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn put_rules() {
        let mut pad = NodePad::new();
        pad.put("train_df", Artifact::Scalar(1.0), "c1").unwrap();
        assert_eq!(pad.len(), 1);
        assert_eq!(
            pad.put("train_df", Artifact::Scalar(2.0), "c2").unwrap_err(),
            ScratchpadError::DuplicateNameInNode { name: "train_df".into() }
        );
        assert_eq!(pad.put("", Artifact::Scalar(2.0), "c2").unwrap_err(), ScratchpadError::EmptyName);
    }

    #[test]
    fn deepest_wins_and_missing_lists_names() {
        let mut s = Scratchpad::default();
        let mut root = NodePad::new();
        root.put("a", Artifact::Scalar(1.0), "r").unwrap();
        root.put("df", Artifact::Scalar(0.0), "r").unwrap();
        s.insert(NodeId(0), root);
        let mut child = NodePad::new();
        child.put("df", Artifact::Scalar(1.0), "c").unwrap();
        s.insert(NodeId(1), child);
        let rv = PathView::root(NodeId(0));
        let cv = rv.branch(NodeId(1));
        assert_eq!(s.resolve(&cv, "a").unwrap().value, Artifact::Scalar(1.0));
        assert_eq!(s.resolve(&cv, "df").unwrap().value, Artifact::Scalar(1.0));
        assert_eq!(s.resolve(&rv, "df").unwrap().value, Artifact::Scalar(0.0));
        let err = s.resolve(&rv, "missing").unwrap_err();
        assert_eq!(err, ScratchpadError::NameNotFound { name: "missing".into(), available: vec!["a".into(), "df".into()] });
    }

    #[test]
    fn siblings_are_isolated() {
        let mut s = Scratchpad::default();
        s.insert(NodeId(0), NodePad::new());
        for (id, v) in [(1, 1.0), (2, 2.0)] {
            let mut p = NodePad::new();
            p.put("x", Artifact::Scalar(v), "c").unwrap();
            s.insert(NodeId(id), p);
        }
        let r = PathView::root(NodeId(0));
        assert_eq!(r.branch(NodeId(1)).nodes(), &[NodeId(0), NodeId(1)]);
        assert_eq!(s.resolve(&r.branch(NodeId(1)), "x").unwrap().value, Artifact::Scalar(1.0));
        assert_eq!(s.resolve(&r.branch(NodeId(2)), "x").unwrap().value, Artifact::Scalar(2.0));
        assert!(s.resolve(&r, "x").is_err());
    }
}
