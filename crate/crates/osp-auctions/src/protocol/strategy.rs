use std::collections::{BTreeMap, HashMap};

use num_traits::{One, Zero};

use super::{DecisionView, History, MenuOption, MenuTie, PerturbedTie, Prompt};
use crate::error::{Error, Result};
use crate::rational::Rational;
use crate::valuations::Valuation;

/// A strategy profile: each bidder's message as a function of her valuation
/// and the node she is at.
pub trait Strategy: Send + Sync {
    fn message(&self, bidder: usize, valuation: &Valuation, view: &DecisionView<'_>) -> Result<usize>;
}

/// Truthful play read off the node's prompt.
///
/// * clock: stay while the price is at most `v(potential) - v(base)`;
/// * report: name the own valuation;
/// * menu: pick a utility maximizer, breaking ties by the menu's rule.
#[derive(Clone, Copy, Debug, Default)]
pub struct CanonicalStrategy;

impl Strategy for CanonicalStrategy {
    fn message(&self, _bidder: usize, v: &Valuation, view: &DecisionView<'_>) -> Result<usize> {
        match view.prompt {
            Prompt::Clock {
                price,
                base,
                potential,
            } => Ok(if *price <= v.value(potential) - v.value(base) {
                0
            } else {
                1
            }),
            Prompt::Report { options } => options.iter().position(|o| o == v).ok_or_else(|| {
                Error::Strategy(format!("valuation {v} is not among the reportable options"))
            }),
            Prompt::Menu { options, tie } => Ok(menu_choice(v, options, tie)),
            Prompt::Opaque => Err(Error::Strategy(format!(
                "no canonical message at opaque node {:?}",
                view.history
            ))),
        }
    }
}

fn first_listed(v: &Valuation, options: &[MenuOption]) -> usize {
    let mut best = 0;
    let mut best_u: Option<Rational> = None;
    for (k, o) in options.iter().enumerate() {
        let u = v.value(&o.bundle) - o.price;
        if best_u.is_none_or(|b| u > b) {
            best = k;
            best_u = Some(u);
        }
    }
    best
}

fn menu_choice(v: &Valuation, options: &[MenuOption], tie: &MenuTie) -> usize {
    match tie {
        MenuTie::FirstListed => first_listed(v, options),
        MenuTie::Perturbed(t) => perturbed_choice(v, options, t).unwrap_or_else(|| first_listed(v, options)),
    }
}

fn perturbed_choice(v: &Valuation, options: &[MenuOption], t: &PerturbedTie) -> Option<usize> {
    let mut best = 0;
    let mut best_key: i128 = 0;
    for (k, o) in options.iter().enumerate().skip(1) {
        let scaled = v.value(&o.bundle) * t.value_scale;
        if scaled.denom() != &i128::one() {
            return None;
        }
        let key = scaled.to_integer() + t.bonus[k] - t.perturbed_price[k];
        if key > best_key {
            best = k;
            best_key = key;
        }
    }
    debug_assert!(options[0].price.is_zero());
    Some(best)
}

/// Explicit behaviors per (bidder, valuation). Nodes missing from a table
/// fall back to `fallback` when one is set.
#[derive(Default)]
pub struct TableStrategy {
    table: HashMap<(usize, Valuation), BTreeMap<History, usize>>,
    fallback: Option<Box<dyn Strategy>>,
}

impl TableStrategy {
    pub fn new() -> Self {
        TableStrategy::default()
    }

    pub fn with_fallback(fallback: Box<dyn Strategy>) -> Self {
        TableStrategy {
            table: HashMap::new(),
            fallback: Some(fallback),
        }
    }

    pub fn set(&mut self, bidder: usize, valuation: &Valuation, node: &[usize], message: usize) {
        self.table
            .entry((bidder, valuation.clone()))
            .or_default()
            .insert(node.to_vec(), message);
    }

    /// All entries, sorted for stable output.
    pub fn entries(&self) -> Vec<(usize, &Valuation, &History, usize)> {
        let mut out: Vec<_> = self
            .table
            .iter()
            .flat_map(|((b, v), moves)| moves.iter().map(move |(h, m)| (*b, v, h, *m)))
            .collect();
        out.sort_by(|a, b| (a.0, a.1.to_string(), a.2).cmp(&(b.0, b.1.to_string(), b.2)));
        out
    }
}

impl Strategy for TableStrategy {
    fn message(&self, bidder: usize, v: &Valuation, view: &DecisionView<'_>) -> Result<usize> {
        if let Some(m) = self
            .table
            .get(&(bidder, v.clone()))
            .and_then(|moves| moves.get(view.history))
        {
            return Ok(*m);
        }
        match &self.fallback {
            Some(f) => f.message(bidder, v, view),
            None => Err(Error::Strategy(format!(
                "no entry for bidder {bidder} with {v} at node {:?}",
                view.history
            ))),
        }
    }
}
