//! Exhaustive checks of obvious dominance, individual rationality, no
//! negative transfers, weak monotonicity, dominant-strategy incentive
//! compatibility and the divergence property.
//!
//! Obvious dominance is decided per bidder `i` and valuation `v` with two
//! passes over the materialized tree. The free pass computes, for every
//! node, the best utility `i` can reach when everybody (including `i`) acts
//! arbitrarily below it. The pinned pass walks down from the root with `i`
//! following her strategy and everybody else arbitrary; it visits exactly
//! the nodes attainable under the strategy and computes the worst utility
//! below each. At every attainable node of `i`, the worst case of the
//! prescribed message must be at least the best case of every other message.

use std::cmp::Ordering;

use rayon::prelude::*;

use crate::caps::Caps;
use crate::error::{Error, Result};
use crate::protocol::{
    behaviors_for_path, play_strategy, realize_rule, Behavior, DecisionView, History, Protocol, RealizedRule,
    Strategy, Tree, TreeNodeKind,
};
use crate::rational::Rational;
use crate::valuations::{Domain, Valuation};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OspWitness {
    pub node: History,
    pub bidder: usize,
    pub valuation_index: usize,
    pub valuation: Valuation,
    pub truthful_message: usize,
    pub deviating_message: usize,
    pub worst_truthful_utility: Rational,
    pub best_deviating_utility: Rational,
    pub truthful_leaf: History,
    pub deviating_leaf: History,
    /// Behaviors whose play ends at `truthful_leaf`.
    pub truthful_behaviors: Vec<Behavior>,
    /// Behaviors whose play ends at `deviating_leaf`.
    pub deviating_behaviors: Vec<Behavior>,
}

impl OspWitness {
    fn key(&self) -> (usize, &History, usize, usize, usize) {
        (
            self.node.len(),
            &self.node,
            self.bidder,
            self.valuation_index,
            self.deviating_message,
        )
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum OspVerdict {
    Pass {
        tree_nodes: usize,
        /// Attainable (node, bidder, valuation) triples that were checked.
        checks: usize,
    },
    Fail(Box<OspWitness>),
}

impl OspVerdict {
    pub fn is_pass(&self) -> bool {
        matches!(self, OspVerdict::Pass { .. })
    }

    pub fn witness(&self) -> Option<&OspWitness> {
        match self {
            OspVerdict::Fail(w) => Some(w),
            OspVerdict::Pass { .. } => None,
        }
    }
}

fn leaf_utilities(tree: &Tree, bidder: usize, v: &Valuation) -> Vec<Option<Rational>> {
    tree.nodes()
        .iter()
        .map(|n| match &n.kind {
            TreeNodeKind::Leaf(o) => Some(o.utility(bidder, v)),
            TreeNodeKind::Decision { .. } => None,
        })
        .collect()
}

/// Best reachable utility and a leaf attaining it, for every node.
fn free_pass(tree: &Tree, util: &[Option<Rational>]) -> Vec<(Rational, usize)> {
    let mut best: Vec<(Rational, usize)> = vec![(Rational::default(), 0); tree.len()];
    for id in (0..tree.len()).rev() {
        best[id] = match &tree.node(id).kind {
            TreeNodeKind::Leaf(_) => (util[id].expect("leaf utility"), id),
            TreeNodeKind::Decision { children, .. } => {
                let mut b = best[children[0]];
                for &c in &children[1..] {
                    if best[c].0 > b.0 {
                        b = best[c];
                    }
                }
                b
            }
        };
    }
    best
}

struct Violation {
    node: usize,
    truthful: usize,
    deviating: usize,
    worst: (Rational, usize),
    best: (Rational, usize),
}

struct PinnedPass<'a> {
    tree: &'a Tree,
    strategy: &'a dyn Strategy,
    bidder: usize,
    valuation: &'a Valuation,
    util: &'a [Option<Rational>],
    free: &'a [(Rational, usize)],
    checks: usize,
    violation: Option<Violation>,
}

impl PinnedPass<'_> {
    fn worst(&mut self, id: usize) -> Result<(Rational, usize)> {
        let node = self.tree.node(id);
        match &node.kind {
            TreeNodeKind::Leaf(_) => Ok((self.util[id].expect("leaf utility"), id)),
            TreeNodeKind::Decision {
                bidder,
                prompt,
                children,
            } if *bidder == self.bidder => {
                let view = DecisionView {
                    history: &node.history,
                    bidder: *bidder,
                    arity: children.len(),
                    prompt,
                };
                let t = self.strategy.message(self.bidder, self.valuation, &view)?;
                if t >= children.len() {
                    return Err(Error::Strategy(format!(
                        "message {t} out of range at node {:?}",
                        node.history
                    )));
                }
                let worst = self.worst(children[t])?;
                self.checks += 1;
                for (d, &c) in children.iter().enumerate() {
                    if d == t || self.free[c].0 <= worst.0 {
                        continue;
                    }
                    let better = match &self.violation {
                        None => true,
                        Some(old) => {
                            let a = &self.tree.node(id).history;
                            let b = &self.tree.node(old.node).history;
                            (a.len(), a, d).cmp(&(b.len(), b, old.deviating)) == Ordering::Less
                        }
                    };
                    if better {
                        self.violation = Some(Violation {
                            node: id,
                            truthful: t,
                            deviating: d,
                            worst,
                            best: self.free[c],
                        });
                    }
                }
                Ok(worst)
            }
            TreeNodeKind::Decision { children, .. } => {
                let mut w = self.worst(children[0])?;
                for &c in &children[1..] {
                    let x = self.worst(c)?;
                    if x.0 < w.0 {
                        w = x;
                    }
                }
                Ok(w)
            }
        }
    }
}

fn check_one(
    tree: &Tree,
    strategy: &dyn Strategy,
    bidder: usize,
    index: usize,
    v: &Valuation,
) -> Result<(usize, Option<OspWitness>)> {
    let util = leaf_utilities(tree, bidder, v);
    let free = free_pass(tree, &util);
    let mut pass = PinnedPass {
        tree,
        strategy,
        bidder,
        valuation: v,
        util: &util,
        free: &free,
        checks: 0,
        violation: None,
    };
    pass.worst(0)?;
    let checks = pass.checks;
    let Some(bad) = pass.violation else {
        return Ok((checks, None));
    };
    let truthful_leaf = tree.node(bad.worst.1).history.clone();
    let deviating_leaf = tree.node(bad.best.1).history.clone();
    let witness = OspWitness {
        node: tree.node(bad.node).history.clone(),
        bidder,
        valuation_index: index,
        valuation: v.clone(),
        truthful_message: bad.truthful,
        deviating_message: bad.deviating,
        worst_truthful_utility: bad.worst.0,
        best_deviating_utility: bad.best.0,
        truthful_behaviors: behaviors_for_path(tree, &truthful_leaf)?,
        deviating_behaviors: behaviors_for_path(tree, &deviating_leaf)?,
        truthful_leaf,
        deviating_leaf,
    };
    Ok((checks, Some(witness)))
}

fn check_domain(protocol: &dyn Protocol, domain: &Domain) -> Result<()> {
    if domain.n() != protocol.bidders() {
        return Err(Error::Verify("domain and protocol disagree on the bidder count".into()));
    }
    if domain.setting() != protocol.setting() {
        return Err(Error::Verify("domain and protocol disagree on the setting".into()));
    }
    Ok(())
}

/// Checks that the strategies are obviously dominant for every valuation of
/// the domain. On failure the witness is the smallest by (depth, node,
/// bidder, valuation, deviating message).
pub fn verify_osp(protocol: &dyn Protocol, strategy: &dyn Strategy, domain: &Domain) -> Result<OspVerdict> {
    check_domain(protocol, domain)?;
    let tree = Tree::materialize(protocol, Caps::global().max_tree_nodes)?;
    verify_osp_tree(&tree, strategy, domain)
}

/// [`verify_osp`] on an already materialized tree.
pub fn verify_osp_tree(tree: &Tree, strategy: &dyn Strategy, domain: &Domain) -> Result<OspVerdict> {
    check_domain(tree, domain)?;
    let jobs: Vec<(usize, usize)> = (0..domain.n())
        .flat_map(|i| (0..domain.set(i).len()).map(move |k| (i, k)))
        .collect();
    let results = jobs
        .par_iter()
        .map(|&(i, k)| check_one(tree, strategy, i, k, &domain.set(i)[k]))
        .collect::<Result<Vec<_>>>()?;
    let checks = results.iter().map(|r| r.0).sum();
    let worst = results
        .into_iter()
        .filter_map(|r| r.1)
        .min_by(|a, b| a.key().cmp(&b.key()));
    Ok(match worst {
        Some(w) => OspVerdict::Fail(Box::new(w)),
        None => OspVerdict::Pass {
            tree_nodes: tree.len(),
            checks,
        },
    })
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IrViolation {
    pub profile: Vec<usize>,
    pub bidder: usize,
    pub utility: Rational,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NntViolation {
    pub leaf: History,
    pub bidder: usize,
    pub payment: Rational,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct IrNntVerdict {
    /// First violation in profile order.
    pub ir: Option<IrViolation>,
    /// First violation in preorder.
    pub nnt: Option<NntViolation>,
}

impl IrNntVerdict {
    pub fn is_pass(&self) -> bool {
        self.ir.is_none() && self.nnt.is_none()
    }
}

/// Individual rationality of truthful play over the domain, and no negative
/// payment at any leaf of the protocol.
pub fn verify_ir_nnt(protocol: &dyn Protocol, strategy: &dyn Strategy, domain: &Domain) -> Result<IrNntVerdict> {
    check_domain(protocol, domain)?;
    let tree = Tree::materialize(protocol, Caps::global().max_tree_nodes)?;
    let rule = realize_rule(&tree, strategy, domain)?;
    Ok(IrNntVerdict {
        ir: first_ir_violation(&rule),
        nnt: first_nnt_violation(&tree),
    })
}

pub fn first_nnt_violation(tree: &Tree) -> Option<NntViolation> {
    tree.leaves().find_map(|(id, o)| {
        o.payments.iter().enumerate().find_map(|(i, p)| {
            (*p < Rational::default()).then(|| NntViolation {
                leaf: tree.node(id).history.clone(),
                bidder: i,
                payment: *p,
            })
        })
    })
}

pub fn first_ir_violation(rule: &RealizedRule) -> Option<IrViolation> {
    let domain = rule.domain();
    rule.outcomes().iter().enumerate().find_map(|(k, o)| {
        let profile = domain.profile(k);
        (0..domain.n()).find_map(|i| {
            let u = o.utility(i, &domain.set(i)[profile[i]]);
            (u < Rational::default()).then(|| IrViolation {
                profile: profile.clone(),
                bidder: i,
                utility: u,
            })
        })
    })
}

/// A bidder, the others' valuations, and two own valuations.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PairViolation {
    pub bidder: usize,
    /// Profile with the bidder holding `truth`.
    pub profile: Vec<usize>,
    pub truth: usize,
    pub other: usize,
}

fn scan_pairs(rule: &RealizedRule, mut bad: impl FnMut(usize, &[usize], usize, usize) -> bool) -> Option<PairViolation> {
    let domain = rule.domain();
    for k in 0..rule.len() {
        let profile = domain.profile(k);
        for i in 0..domain.n() {
            for other in 0..domain.set(i).len() {
                if other != profile[i] && bad(i, &profile, profile[i], other) {
                    return Some(PairViolation {
                        bidder: i,
                        profile: profile.clone(),
                        truth: profile[i],
                        other,
                    });
                }
            }
        }
    }
    None
}

/// `v(S) - v(S') >= v'(S) - v'(S')` for the bundles `S`, `S'` the rule gives
/// a bidder under `v` and `v'` against the same opponents.
pub fn verify_weak_monotonicity(rule: &RealizedRule) -> Option<PairViolation> {
    let domain = rule.domain();
    scan_pairs(rule, |i, profile, a, b| {
        let mut alt = profile.to_vec();
        alt[i] = b;
        let s = &rule.outcome(profile).allocation.bundles[i];
        let s2 = &rule.outcome(&alt).allocation.bundles[i];
        let (va, vb) = (&domain.set(i)[a], &domain.set(i)[b]);
        va.value(s) - va.value(s2) < vb.value(s) - vb.value(s2)
    })
}

/// Truth-telling is a dominant strategy in the direct mechanism of the rule.
pub fn verify_dsic(rule: &RealizedRule) -> Option<PairViolation> {
    let domain = rule.domain();
    scan_pairs(rule, |i, profile, a, b| {
        let mut alt = profile.to_vec();
        alt[i] = b;
        let v = &domain.set(i)[a];
        rule.outcome(profile).utility(i, v) < rule.outcome(&alt).utility(i, v)
    })
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum DivergenceVerdict {
    /// Both conditions hold and the messages agree.
    Consistent,
    /// Both conditions hold but the messages differ.
    Violated { message: usize, other_message: usize },
    /// The utility condition fails, so nothing is claimed.
    NotApplicable,
}

/// Checks the divergence property for `bidder` at `node` and two profiles of
/// valuation indices. `node` must be a node of `bidder` on both plays.
pub fn check_divergence_lemma(
    protocol: &dyn Protocol,
    strategy: &dyn Strategy,
    domain: &Domain,
    bidder: usize,
    node: &[usize],
    first: &[usize],
    second: &[usize],
) -> Result<DivergenceVerdict> {
    check_domain(protocol, domain)?;
    let v = &domain.set(bidder)[first[bidder]];
    let v2 = &domain.set(bidder)[second[bidder]];
    let play1 = play_strategy(protocol, strategy, &domain.valuations_of(first))?;
    let play2 = play_strategy(protocol, strategy, &domain.valuations_of(second))?;
    let on_both = play1.path.iter().any(|h| h == node) && play2.path.iter().any(|h| h == node);
    if !on_both {
        return Err(Error::Verify(format!("node {node:?} is not on both plays")));
    }
    let mut cursor = protocol.root();
    for &m in node {
        cursor.advance(m)?;
    }
    let crate::protocol::NodeKind::Decision { bidder: owner, arity } = cursor.kind() else {
        return Err(Error::Verify(format!("node {node:?} is a leaf")));
    };
    if owner != bidder {
        return Err(Error::Verify(format!("node {node:?} belongs to bidder {owner}")));
    }
    if play1.outcome.utility(bidder, v) >= play2.outcome.utility(bidder, v) {
        return Ok(DivergenceVerdict::NotApplicable);
    }
    let prompt = cursor.prompt();
    let view = DecisionView {
        history: node,
        bidder,
        arity,
        prompt: &prompt,
    };
    let m1 = strategy.message(bidder, v, &view)?;
    let m2 = strategy.message(bidder, v2, &view)?;
    Ok(if m1 == m2 {
        DivergenceVerdict::Consistent
    } else {
        DivergenceVerdict::Violated {
            message: m1,
            other_message: m2,
        }
    })
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct DivergenceSummary {
    pub consistent: usize,
    pub not_applicable: usize,
    /// (bidder, node, first profile, second profile) of each violation.
    pub violations: Vec<(usize, History, Vec<usize>, Vec<usize>)>,
}

/// Runs [`check_divergence_lemma`] on every ordered pair of profiles and
/// every node of every bidder shared by both plays.
pub fn divergence_survey(protocol: &dyn Protocol, strategy: &dyn Strategy, domain: &Domain) -> Result<DivergenceSummary> {
    check_domain(protocol, domain)?;
    let size = domain.product_size();
    let cap = Caps::global().max_profiles as u128;
    if size * size > cap {
        return Err(Error::cap("profile pairs", size * size, cap));
    }
    let profiles: Vec<Vec<usize>> = (0..size as usize).map(|k| domain.profile(k)).collect();
    let plays = profiles
        .iter()
        .map(|p| play_strategy(protocol, strategy, &domain.valuations_of(p)))
        .collect::<Result<Vec<_>>>()?;
    let mut owners = std::collections::HashMap::new();
    for play in &plays {
        for h in &play.path[..play.path.len() - 1] {
            if !owners.contains_key(h) {
                let mut c = protocol.root();
                for &m in h {
                    c.advance(m)?;
                }
                if let crate::protocol::NodeKind::Decision { bidder, .. } = c.kind() {
                    owners.insert(h.clone(), bidder);
                }
            }
        }
    }
    let mut out = DivergenceSummary::default();
    for (a, pa) in profiles.iter().enumerate() {
        for (b, pb) in profiles.iter().enumerate() {
            if a == b {
                continue;
            }
            let shared = plays[a].path.iter().filter(|h| plays[b].path.contains(h));
            for h in shared {
                let Some(&i) = owners.get(h) else { continue };
                match check_divergence_lemma(protocol, strategy, domain, i, h, pa, pb)? {
                    DivergenceVerdict::Consistent => out.consistent += 1,
                    DivergenceVerdict::NotApplicable => out.not_applicable += 1,
                    DivergenceVerdict::Violated { .. } => {
                        out.violations.push((i, h.clone(), pa.clone(), pb.clone()))
                    }
                }
            }
        }
    }
    Ok(out)
}
