//! Deterministic extensive-form protocols.
//!
//! A protocol is a finite tree. Each decision node is owned by one bidder who
//! picks one of its ordered messages; each leaf carries an [`Outcome`]. Node
//! identity is the list of messages sent from the root, so two plays share a
//! node exactly when one history is a prefix of the other. Nodes with a
//! single message are contracted away and never appear in a history.
//!
//! Protocols are usually implicit: a [`Machine`] describes how to move from
//! node to node and [`MachineProtocol`] walks it lazily. [`Tree`] is the
//! materialized form used by the verifier and by the export formats.

mod gaa;
mod realize;
mod strategy;
mod tree;

pub use gaa::{build_gaa, gaa_grid, gaa_truthful_strategy, GaaSpec, CLOCK_EXIT, CLOCK_STAY};
pub use realize::{realize_rule, RealizedRule};
pub use strategy::{CanonicalStrategy, Strategy, TableStrategy};
pub use tree::{NodeSpec, Tree, TreeNode, TreeNodeKind};

use std::collections::BTreeMap;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::rational::Rational;
use crate::valuations::{Bundle, Setting, Valuation};
use crate::welfare::Allocation;

/// Node identity: the messages sent on the way from the root.
pub type History = Vec<usize>;

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Outcome {
    pub allocation: Allocation,
    pub payments: Vec<Rational>,
}

impl Outcome {
    pub fn utility(&self, bidder: usize, v: &Valuation) -> Rational {
        v.value(&self.allocation.bundles[bidder]) - self.payments[bidder]
    }

    pub fn welfare(&self, valuations: &[Valuation]) -> Rational {
        self.allocation.welfare(valuations)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MenuOption {
    pub bundle: Bundle,
    pub price: Rational,
}

/// Integer keys that break utility ties in a menu. The key of option `k` is
/// `v(bundle_k) * value_scale + bonus[k] - perturbed_price[k]`; the bidder
/// takes the option with the largest key when it is positive and option 0
/// otherwise.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PerturbedTie {
    pub value_scale: i128,
    pub bonus: Vec<i128>,
    pub perturbed_price: Vec<i128>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum MenuTie {
    /// Utility ties go to the option listed first.
    FirstListed,
    Perturbed(PerturbedTie),
}

/// What the acting bidder is asked at a decision node.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Prompt {
    /// Ascending clock: message 0 keeps `potential` in play at `price`,
    /// message 1 exits with `base` for free.
    Clock {
        price: Rational,
        base: Bundle,
        potential: Bundle,
    },
    /// Message `k` reports `options[k]`.
    Report { options: Arc<[Valuation]> },
    /// Message `k` buys `options[k]`.
    Menu {
        options: Vec<MenuOption>,
        tie: MenuTie,
    },
    /// No canonical interpretation; strategies must come from a table.
    Opaque,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NodeKind {
    Leaf,
    Decision { bidder: usize, arity: usize },
}

/// What a strategy sees when asked for a message.
#[derive(Clone, Copy, Debug)]
pub struct DecisionView<'a> {
    pub history: &'a [usize],
    pub bidder: usize,
    pub arity: usize,
    pub prompt: &'a Prompt,
}

/// A position in a protocol.
pub trait Cursor: Send {
    fn kind(&self) -> NodeKind;
    /// Only meaningful at decision nodes.
    fn prompt(&self) -> Prompt;
    fn advance(&mut self, message: usize) -> Result<()>;
    /// `Some` exactly at leaves.
    fn outcome(&self) -> Option<Outcome>;
    fn history(&self) -> &[usize];
    fn fork(&self) -> Box<dyn Cursor + '_>;
}

pub trait Protocol: Send + Sync {
    fn bidders(&self) -> usize;
    fn setting(&self) -> &Setting;
    fn root(&self) -> Box<dyn Cursor + '_>;
}

/// Raw state machine behind an implicit protocol. Single-message nodes are
/// allowed here; [`MachineProtocol`] contracts them.
pub trait Machine: Clone + Send + Sync {
    fn node(&self) -> NodeKind;
    fn prompt(&self) -> Prompt;
    fn step(&mut self, message: usize);
    fn outcome(&self) -> Outcome;
}

pub struct MachineProtocol<M: Machine> {
    bidders: usize,
    setting: Setting,
    initial: M,
}

impl<M: Machine> MachineProtocol<M> {
    pub fn new(bidders: usize, setting: Setting, initial: M) -> Self {
        MachineProtocol {
            bidders,
            setting,
            initial,
        }
    }
}

impl<M: Machine + 'static> Protocol for MachineProtocol<M> {
    fn bidders(&self) -> usize {
        self.bidders
    }

    fn setting(&self) -> &Setting {
        &self.setting
    }

    fn root(&self) -> Box<dyn Cursor + '_> {
        Box::new(MachineCursor::new(self.initial.clone()))
    }
}

#[derive(Clone)]
struct MachineCursor<M: Machine> {
    machine: M,
    history: History,
}

impl<M: Machine> MachineCursor<M> {
    fn new(machine: M) -> Self {
        let mut c = MachineCursor {
            machine,
            history: Vec::new(),
        };
        c.settle();
        c
    }

    fn settle(&mut self) {
        while let NodeKind::Decision { arity: 1, .. } = self.machine.node() {
            self.machine.step(0);
        }
    }
}

impl<M: Machine + 'static> Cursor for MachineCursor<M> {
    fn kind(&self) -> NodeKind {
        self.machine.node()
    }

    fn prompt(&self) -> Prompt {
        self.machine.prompt()
    }

    fn advance(&mut self, message: usize) -> Result<()> {
        match self.machine.node() {
            NodeKind::Leaf => Err(Error::Protocol("cannot advance past a leaf".into())),
            NodeKind::Decision { arity, .. } if message >= arity => Err(Error::Protocol(format!(
                "message {message} out of range (arity {arity})"
            ))),
            NodeKind::Decision { .. } => {
                self.machine.step(message);
                self.history.push(message);
                self.settle();
                Ok(())
            }
        }
    }

    fn outcome(&self) -> Option<Outcome> {
        match self.machine.node() {
            NodeKind::Leaf => Some(self.machine.outcome()),
            NodeKind::Decision { .. } => None,
        }
    }

    fn history(&self) -> &[usize] {
        &self.history
    }

    fn fork(&self) -> Box<dyn Cursor + '_> {
        Box::new(self.clone())
    }
}

/// A bidder's behavior: a message for each of her nodes that matters.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Behavior {
    pub moves: BTreeMap<History, usize>,
}

impl Behavior {
    pub fn set(&mut self, node: &[usize], message: usize) {
        self.moves.insert(node.to_vec(), message);
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PlayResult {
    pub outcome: Outcome,
    /// Every node visited, root first, ending at the leaf.
    pub path: Vec<History>,
}

impl PlayResult {
    pub fn leaf(&self) -> &History {
        self.path.last().expect("a path always contains the root")
    }
}

/// Plays a behavior profile from the root.
pub fn play(protocol: &dyn Protocol, behaviors: &[Behavior]) -> Result<PlayResult> {
    if behaviors.len() != protocol.bidders() {
        return Err(Error::Protocol("one behavior per bidder is required".into()));
    }
    let mut cursor = protocol.root();
    let mut path = Vec::new();
    loop {
        path.push(cursor.history().to_vec());
        match cursor.kind() {
            NodeKind::Leaf => {
                let outcome = cursor.outcome().expect("leaf has an outcome");
                return Ok(PlayResult { outcome, path });
            }
            NodeKind::Decision { bidder, .. } => {
                let msg = *behaviors[bidder].moves.get(cursor.history()).ok_or_else(|| {
                    Error::Protocol(format!(
                        "behavior of bidder {bidder} undefined at node {:?}",
                        cursor.history()
                    ))
                })?;
                cursor.advance(msg)?;
            }
        }
    }
}

/// Behaviors that reproduce the path to `leaf` in the given protocol.
pub fn behaviors_for_path(protocol: &dyn Protocol, leaf: &[usize]) -> Result<Vec<Behavior>> {
    let mut out = vec![Behavior::default(); protocol.bidders()];
    let mut cursor = protocol.root();
    for &msg in leaf {
        match cursor.kind() {
            NodeKind::Leaf => return Err(Error::Protocol("path runs past a leaf".into())),
            NodeKind::Decision { bidder, .. } => {
                out[bidder].set(cursor.history(), msg);
                cursor.advance(msg)?;
            }
        }
    }
    if cursor.kind() != NodeKind::Leaf {
        return Err(Error::Protocol("path does not end at a leaf".into()));
    }
    Ok(out)
}

/// Plays strategies for a valuation profile, recording the path.
pub fn play_strategy(
    protocol: &dyn Protocol,
    strategy: &dyn Strategy,
    profile: &[Valuation],
) -> Result<PlayResult> {
    let mut path = Vec::new();
    let outcome = drive(protocol, strategy, profile, Some(&mut path))?;
    Ok(PlayResult { outcome, path })
}

/// Plays strategies for a valuation profile and returns the outcome only.
pub fn run(protocol: &dyn Protocol, strategy: &dyn Strategy, profile: &[Valuation]) -> Result<Outcome> {
    drive(protocol, strategy, profile, None)
}

fn drive(
    protocol: &dyn Protocol,
    strategy: &dyn Strategy,
    profile: &[Valuation],
    mut path: Option<&mut Vec<History>>,
) -> Result<Outcome> {
    if profile.len() != protocol.bidders() {
        return Err(Error::Protocol("one valuation per bidder is required".into()));
    }
    let mut cursor = protocol.root();
    loop {
        if let Some(p) = path.as_deref_mut() {
            p.push(cursor.history().to_vec());
        }
        match cursor.kind() {
            NodeKind::Leaf => return Ok(cursor.outcome().expect("leaf has an outcome")),
            NodeKind::Decision { bidder, arity } => {
                let prompt = cursor.prompt();
                let view = DecisionView {
                    history: cursor.history(),
                    bidder,
                    arity,
                    prompt: &prompt,
                };
                let msg = strategy.message(bidder, &profile[bidder], &view)?;
                if msg >= arity {
                    return Err(Error::Strategy(format!(
                        "message {msg} out of range at node {:?}",
                        cursor.history()
                    )));
                }
                cursor.advance(msg)?;
            }
        }
    }
}
