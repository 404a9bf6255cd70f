use std::fmt::Write as _;

use super::{Cursor, History, NodeKind, Outcome, Prompt, Protocol};
use crate::caps::Caps;
use crate::error::{Error, Result};
use crate::rational::format_rational;
use crate::valuations::Setting;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum TreeNodeKind {
    Leaf(Outcome),
    Decision {
        bidder: usize,
        prompt: Prompt,
        children: Vec<usize>,
    },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TreeNode {
    pub history: History,
    pub parent: Option<usize>,
    pub kind: TreeNodeKind,
}

/// A protocol stored as an arena of nodes in preorder; node 0 is the root.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Tree {
    bidders: usize,
    setting: Setting,
    nodes: Vec<TreeNode>,
}

/// Nested description used to build a [`Tree`] by hand.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum NodeSpec {
    Leaf(Outcome),
    Decision {
        bidder: usize,
        prompt: Prompt,
        children: Vec<NodeSpec>,
    },
}

impl NodeSpec {
    pub fn decision(bidder: usize, children: Vec<NodeSpec>) -> NodeSpec {
        NodeSpec::Decision {
            bidder,
            prompt: Prompt::Opaque,
            children,
        }
    }
}

impl Tree {
    /// Expands an implicit protocol node by node.
    pub fn materialize(protocol: &dyn Protocol, cap: usize) -> Result<Tree> {
        let mut tree = Tree {
            bidders: protocol.bidders(),
            setting: protocol.setting().clone(),
            nodes: Vec::new(),
        };
        let root = protocol.root();
        tree.expand(root.as_ref(), None, cap)?;
        Ok(tree)
    }

    /// Materializes under the global node cap.
    pub fn from_protocol(protocol: &dyn Protocol) -> Result<Tree> {
        Tree::materialize(protocol, Caps::global().max_tree_nodes)
    }

    fn expand(&mut self, cursor: &dyn Cursor, parent: Option<usize>, cap: usize) -> Result<usize> {
        if self.nodes.len() >= cap {
            return Err(Error::cap("protocol tree nodes", self.nodes.len() as u128 + 1, cap as u128));
        }
        let id = self.nodes.len();
        let history = cursor.history().to_vec();
        match cursor.kind() {
            NodeKind::Leaf => {
                let outcome = cursor.outcome().expect("leaf has an outcome");
                self.check_outcome(&outcome, &history)?;
                self.nodes.push(TreeNode {
                    history,
                    parent,
                    kind: TreeNodeKind::Leaf(outcome),
                });
            }
            NodeKind::Decision { bidder, arity } => {
                if arity < 2 || bidder >= self.bidders {
                    return Err(Error::Protocol(format!("malformed decision node {history:?}")));
                }
                self.nodes.push(TreeNode {
                    history,
                    parent,
                    kind: TreeNodeKind::Decision {
                        bidder,
                        prompt: cursor.prompt(),
                        children: Vec::with_capacity(arity),
                    },
                });
                for msg in 0..arity {
                    let mut child = cursor.fork();
                    child.advance(msg)?;
                    let c = self.expand(child.as_ref(), Some(id), cap)?;
                    if let TreeNodeKind::Decision { children, .. } = &mut self.nodes[id].kind {
                        children.push(c);
                    }
                }
            }
        }
        Ok(id)
    }

    fn check_outcome(&self, outcome: &Outcome, history: &[usize]) -> Result<()> {
        if outcome.allocation.bundles.len() != self.bidders || outcome.payments.len() != self.bidders {
            return Err(Error::Protocol(format!("leaf {history:?} has the wrong number of bidders")));
        }
        if !outcome.allocation.is_feasible(&self.setting) {
            return Err(Error::Protocol(format!("leaf {history:?} has an infeasible allocation")));
        }
        Ok(())
    }

    /// Builds a tree from a nested description, contracting nodes with a
    /// single child.
    pub fn from_spec(bidders: usize, setting: Setting, spec: NodeSpec) -> Result<Tree> {
        let mut tree = Tree {
            bidders,
            setting,
            nodes: Vec::new(),
        };
        tree.add_spec(spec, None, Vec::new())?;
        Ok(tree)
    }

    fn add_spec(&mut self, mut spec: NodeSpec, parent: Option<usize>, history: History) -> Result<usize> {
        loop {
            match spec {
                NodeSpec::Decision { mut children, .. } if children.len() == 1 => {
                    spec = children.pop().expect("one child");
                }
                _ => break,
            }
        }
        let id = self.nodes.len();
        match spec {
            NodeSpec::Leaf(outcome) => {
                self.check_outcome(&outcome, &history)?;
                self.nodes.push(TreeNode {
                    history,
                    parent,
                    kind: TreeNodeKind::Leaf(outcome),
                });
            }
            NodeSpec::Decision {
                bidder,
                prompt,
                children,
            } => {
                if children.is_empty() || bidder >= self.bidders {
                    return Err(Error::Protocol(format!("malformed decision node {history:?}")));
                }
                self.nodes.push(TreeNode {
                    history: history.clone(),
                    parent,
                    kind: TreeNodeKind::Decision {
                        bidder,
                        prompt,
                        children: Vec::new(),
                    },
                });
                for (msg, child) in children.into_iter().enumerate() {
                    let mut h = history.clone();
                    h.push(msg);
                    let c = self.add_spec(child, Some(id), h)?;
                    if let TreeNodeKind::Decision { children, .. } = &mut self.nodes[id].kind {
                        children.push(c);
                    }
                }
            }
        }
        Ok(id)
    }

    pub fn bidders(&self) -> usize {
        self.bidders
    }

    pub fn setting(&self) -> &Setting {
        &self.setting
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn node(&self, id: usize) -> &TreeNode {
        &self.nodes[id]
    }

    pub fn nodes(&self) -> &[TreeNode] {
        &self.nodes
    }

    pub fn leaves(&self) -> impl Iterator<Item = (usize, &Outcome)> {
        self.nodes.iter().enumerate().filter_map(|(i, n)| match &n.kind {
            TreeNodeKind::Leaf(o) => Some((i, o)),
            TreeNodeKind::Decision { .. } => None,
        })
    }

    /// Node reached by following `history` from the root.
    pub fn find(&self, history: &[usize]) -> Option<usize> {
        let mut id = 0;
        for &m in history {
            match &self.nodes.get(id)?.kind {
                TreeNodeKind::Decision { children, .. } => id = *children.get(m)?,
                TreeNodeKind::Leaf(_) => return None,
            }
        }
        Some(id)
    }

    /// Graphviz rendering: boxes for leaves, ellipses for decisions.
    pub fn to_dot(&self) -> String {
        let mut out = String::from("digraph protocol {\n  node [fontname=\"monospace\"];\n");
        for (id, node) in self.nodes.iter().enumerate() {
            match &node.kind {
                TreeNodeKind::Decision {
                    bidder, children, ..
                } => {
                    let _ = writeln!(out, "  n{id} [label=\"bidder {bidder}\"];");
                    for (m, c) in children.iter().enumerate() {
                        let _ = writeln!(out, "  n{id} -> n{c} [label=\"{m}\"];");
                    }
                }
                TreeNodeKind::Leaf(o) => {
                    let parts: Vec<String> = o
                        .allocation
                        .bundles
                        .iter()
                        .zip(&o.payments)
                        .map(|(b, p)| format!("{} @ {}", self.setting.bundle_label(b), format_rational(p)))
                        .collect();
                    let _ = writeln!(out, "  n{id} [shape=box, label=\"{}\"];", parts.join("\\n"));
                }
            }
        }
        out.push_str("}\n");
        out
    }
}

impl Protocol for Tree {
    fn bidders(&self) -> usize {
        self.bidders
    }

    fn setting(&self) -> &Setting {
        &self.setting
    }

    fn root(&self) -> Box<dyn Cursor + '_> {
        Box::new(TreeCursor { tree: self, id: 0 })
    }
}

#[derive(Clone, Copy)]
struct TreeCursor<'a> {
    tree: &'a Tree,
    id: usize,
}

impl Cursor for TreeCursor<'_> {
    fn kind(&self) -> NodeKind {
        match &self.tree.nodes[self.id].kind {
            TreeNodeKind::Leaf(_) => NodeKind::Leaf,
            TreeNodeKind::Decision {
                bidder, children, ..
            } => NodeKind::Decision {
                bidder: *bidder,
                arity: children.len(),
            },
        }
    }

    fn prompt(&self) -> Prompt {
        match &self.tree.nodes[self.id].kind {
            TreeNodeKind::Decision { prompt, .. } => prompt.clone(),
            TreeNodeKind::Leaf(_) => Prompt::Opaque,
        }
    }

    fn advance(&mut self, message: usize) -> Result<()> {
        match &self.tree.nodes[self.id].kind {
            TreeNodeKind::Decision { children, .. } => {
                self.id = *children.get(message).ok_or_else(|| {
                    Error::Protocol(format!(
                        "message {message} out of range (arity {})",
                        children.len()
                    ))
                })?;
                Ok(())
            }
            TreeNodeKind::Leaf(_) => Err(Error::Protocol("cannot advance past a leaf".into())),
        }
    }

    fn outcome(&self) -> Option<Outcome> {
        match &self.tree.nodes[self.id].kind {
            TreeNodeKind::Leaf(o) => Some(o.clone()),
            TreeNodeKind::Decision { .. } => None,
        }
    }

    fn history(&self) -> &[usize] {
        &self.tree.nodes[self.id].history
    }

    fn fork(&self) -> Box<dyn Cursor + '_> {
        Box::new(*self)
    }
}
