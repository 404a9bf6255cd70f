//! Generalized ascending auctions.
//!
//! Every bidder starts active with a base bundle and a potential bundle. A
//! price clock climbs a finite grid; at each grid price the active bidders
//! are polled in `poll_order` and each either stays or exits. An exiting
//! bidder keeps her base bundle for free. The auction stops as soon as the
//! remaining active bidders can all receive their potential bundles while
//! everyone else holds the base bundle. A winner pays the last clock price
//! she accepted (zero if she was never polled). If the grid runs out first,
//! everyone receives the base bundle for free.

use std::sync::Arc;

use num_traits::Zero;

use super::{CanonicalStrategy, Machine, MachineProtocol, NodeKind, Outcome, Prompt};
use crate::error::{Error, Result};
use crate::rational::{int, Rational};
use crate::valuations::{Bundle, Domain, Setting};
use crate::welfare::Allocation;

pub const CLOCK_STAY: usize = 0;
pub const CLOCK_EXIT: usize = 1;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GaaSpec {
    pub setting: Setting,
    pub base: Vec<Bundle>,
    pub potential: Vec<Bundle>,
    /// Strictly increasing clock prices.
    pub grid: Vec<Rational>,
    /// Order in which active bidders are polled at each price.
    pub poll_order: Vec<usize>,
}

impl GaaSpec {
    /// Bidders polled in index order.
    pub fn new(setting: Setting, base: Vec<Bundle>, potential: Vec<Bundle>, grid: Vec<Rational>) -> Self {
        let poll_order = (0..base.len()).collect();
        GaaSpec {
            setting,
            base,
            potential,
            grid,
            poll_order,
        }
    }

    pub fn with_poll_order(mut self, order: Vec<usize>) -> Self {
        self.poll_order = order;
        self
    }

    pub fn n(&self) -> usize {
        self.base.len()
    }

    /// Whether `active` bidders can hold their potential bundles and the
    /// rest their base bundles at once.
    pub fn is_feasible(&self, active: &[bool]) -> bool {
        let bundles: Vec<Bundle> = (0..self.n())
            .map(|i| if active[i] { self.potential[i] } else { self.base[i] })
            .collect();
        self.setting.is_feasible(&bundles)
    }

    fn validate(&self) -> Result<()> {
        let n = self.n();
        if n == 0 || self.potential.len() != n {
            return Err(Error::Protocol("base and potential bundles must cover the same bidders".into()));
        }
        if self.grid.is_empty() {
            return Err(Error::Protocol("empty price grid".into()));
        }
        if self.grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Protocol("price grid must be strictly increasing".into()));
        }
        let mut seen = vec![false; n];
        for &i in &self.poll_order {
            if i >= n || seen[i] {
                return Err(Error::Protocol("poll order must be a permutation of the bidders".into()));
            }
            seen[i] = true;
        }
        if self.poll_order.len() != n {
            return Err(Error::Protocol("poll order must be a permutation of the bidders".into()));
        }
        for i in 0..n {
            if !self.setting.contains(&self.base[i]) || !self.setting.contains(&self.potential[i]) {
                return Err(Error::Bundle(format!("bundles of bidder {i} exceed the supply")));
            }
            if !self.base[i].is_within(&self.potential[i]) {
                return Err(Error::Protocol(format!(
                    "base bundle of bidder {i} is not within her potential bundle"
                )));
            }
        }
        if !self.setting.is_feasible(&self.base) {
            return Err(Error::Protocol("base bundles are not jointly feasible".into()));
        }
        Ok(())
    }
}

/// `{0}`, every marginal `v(potential) - v(base)` over the domain, and one
/// price above the largest marginal.
pub fn gaa_grid(domain: &Domain, base: &[Bundle], potential: &[Bundle]) -> Vec<Rational> {
    let mut grid = vec![Rational::zero()];
    for i in 0..domain.n() {
        for v in domain.set(i).iter() {
            grid.push(v.value(&potential[i]) - v.value(&base[i]));
        }
    }
    grid.sort();
    grid.dedup();
    let top = *grid.last().expect("grid holds zero");
    grid.push(top + int(1));
    grid
}

pub fn build_gaa(spec: GaaSpec) -> Result<MachineProtocol<GaaMachine>> {
    spec.validate()?;
    let n = spec.n();
    let setting = spec.setting.clone();
    let mut machine = GaaMachine {
        spec: Arc::new(spec),
        active: vec![true; n],
        accepted: vec![None; n],
        level: 0,
        pos: 0,
        finished: false,
    };
    machine.finished = machine.spec.is_feasible(&machine.active);
    machine.skip_inactive();
    Ok(MachineProtocol::new(n, setting, machine))
}

/// Stay while the clock is at most the bidder's marginal for the upgrade.
pub fn gaa_truthful_strategy(_spec: &GaaSpec) -> CanonicalStrategy {
    CanonicalStrategy
}

#[derive(Clone, Debug)]
pub struct GaaMachine {
    spec: Arc<GaaSpec>,
    active: Vec<bool>,
    accepted: Vec<Option<usize>>,
    level: usize,
    pos: usize,
    finished: bool,
}

impl GaaMachine {
    pub fn spec(&self) -> &GaaSpec {
        &self.spec
    }

    fn current(&self) -> usize {
        self.spec.poll_order[self.pos]
    }

    fn skip_inactive(&mut self) {
        while !self.finished {
            if self.level >= self.spec.grid.len() {
                self.finished = true;
                self.active.iter_mut().for_each(|a| *a = false);
                return;
            }
            if self.active[self.current()] {
                return;
            }
            self.bump();
        }
    }

    fn bump(&mut self) {
        self.pos += 1;
        if self.pos == self.spec.n() {
            self.pos = 0;
            self.level += 1;
        }
    }
}

impl Machine for GaaMachine {
    fn node(&self) -> NodeKind {
        if self.finished {
            NodeKind::Leaf
        } else {
            NodeKind::Decision {
                bidder: self.current(),
                arity: 2,
            }
        }
    }

    fn prompt(&self) -> Prompt {
        let i = self.current();
        Prompt::Clock {
            price: self.spec.grid[self.level],
            base: self.spec.base[i],
            potential: self.spec.potential[i],
        }
    }

    fn step(&mut self, message: usize) {
        let i = self.current();
        if message == CLOCK_STAY {
            self.accepted[i] = Some(self.level);
        } else {
            self.active[i] = false;
            if self.spec.is_feasible(&self.active) {
                self.finished = true;
                return;
            }
        }
        self.bump();
        self.skip_inactive();
    }

    fn outcome(&self) -> Outcome {
        let n = self.spec.n();
        let mut bundles = Vec::with_capacity(n);
        let mut payments = Vec::with_capacity(n);
        for i in 0..n {
            if self.active[i] {
                bundles.push(self.spec.potential[i]);
                payments.push(self.accepted[i].map_or_else(Rational::zero, |l| self.spec.grid[l]));
            } else {
                bundles.push(self.spec.base[i]);
                payments.push(Rational::zero());
            }
        }
        Outcome {
            allocation: Allocation { bundles },
            payments,
        }
    }
}
