//! Secretary-style pricing for unit-demand bidders.
//!
//! Bidders arrive in a uniformly random order. The first `floor(n / e)`
//! only report. Every later bidder is offered each available item `j` at
//! `OPT(S, A) - OPT(S, A - j)`, where `S` holds the bidders that have
//! reported and `A` the available items, then reports and joins `S`.
//!
//! Optima are computed on integer weights that encode the canonical
//! tie-breaking rule, so the buyer's choice (including whether to take a
//! zero-utility item) is the item the canonical optimum on `S` plus the
//! buyer assigns her.

use std::sync::Arc;

use num_traits::Zero;

use super::{check_shape, check_support_size, RandomizedMechanism, SupportElement};
use crate::error::{Error, Result};
use crate::matching::IncrementalMatching;
use crate::protocol::{Machine, MachineProtocol, MenuOption, MenuTie, NodeKind, Outcome, PerturbedTie, Prompt};
use crate::rational::Rational;
use crate::rng::SeedStream;
use crate::valuations::{Bundle, CombinatorialValuation, Domain, ItemSet, Setting, Valuation};
use crate::welfare::{Allocation, Perturbation};

#[derive(Clone, Debug)]
pub struct Mech3 {
    n: usize,
    setting: Setting,
}

pub fn mech3_unit_demand(n: usize, setting: Setting) -> Result<Mech3> {
    if n == 0 || !matches!(setting, Setting::Combinatorial { .. }) {
        return Err(Error::Mechanism("mech3-unit-demand needs bidders and items".into()));
    }
    Ok(Mech3 { n, setting })
}

/// Number of bidders that only report.
pub fn observed_prefix(n: usize) -> usize {
    (n as f64 / std::f64::consts::E).floor() as usize
}

impl Mech3 {
    fn shared(&self, domain: &Domain, order: Vec<usize>) -> Result<Arc<Shared>> {
        check_shape(self, domain)?;
        if let Some(v) = domain
            .all_valuations()
            .find(|v| !matches!(v, Valuation::Combinatorial(CombinatorialValuation::UnitDemand(_))))
        {
            return Err(Error::Mechanism(format!("mech3-unit-demand does not accept {v}")));
        }
        let m = self.setting.size();
        let all: Vec<&Valuation> = domain.all_valuations().collect();
        let pert = Perturbation::for_valuations(self.n, m, all.iter().copied())?;
        let mut weights = Vec::with_capacity(self.n);
        for i in 0..self.n {
            let rows = domain
                .set(i)
                .iter()
                .map(|v| {
                    let values = v.as_combinatorial().expect("unit-demand").item_values();
                    (0..m).map(|j| pert.weight(i, j, &values[j])).collect::<Result<Vec<i128>>>()
                })
                .collect::<Result<Vec<_>>>()?;
            weights.push(rows);
        }
        Ok(Arc::new(Shared {
            setting: self.setting.clone(),
            sets: domain.sets().to_vec(),
            pert,
            weights,
            prefix: observed_prefix(self.n),
            order,
        }))
    }

    fn element(&self, domain: &Domain, order: Vec<usize>, probability: Rational) -> Result<SupportElement> {
        let label = format!(
            "order={}",
            order.iter().map(|i| i.to_string()).collect::<Vec<_>>().join(",")
        );
        let shared = self.shared(domain, order)?;
        let machine = Mech3Machine::new(shared, self.n);
        Ok(SupportElement {
            label,
            probability,
            protocol: Arc::new(MachineProtocol::new(self.n, self.setting.clone(), machine)),
        })
    }
}

impl RandomizedMechanism for Mech3 {
    fn name(&self) -> &str {
        "mech3-unit-demand"
    }

    fn n(&self) -> usize {
        self.n
    }

    fn setting(&self) -> &Setting {
        &self.setting
    }

    fn support(&self, domain: &Domain) -> Result<Vec<SupportElement>> {
        check_support_size(self.support_size())?;
        let p = Rational::new(1, self.support_size() as i128);
        let mut out = Vec::new();
        let mut order: Vec<usize> = (0..self.n).collect();
        loop {
            out.push(self.element(domain, order.clone(), p)?);
            if !next_permutation(&mut order) {
                break;
            }
        }
        Ok(out)
    }

    fn sample(&self, domain: &Domain, rng: &mut SeedStream) -> Result<SupportElement> {
        let mut order: Vec<usize> = (0..self.n).collect();
        rng.shuffle(&mut order);
        self.element(domain, order, Rational::zero())
    }

    fn support_size(&self) -> u128 {
        (1..=self.n as u128).try_fold(1u128, |acc, k| acc.checked_mul(k)).unwrap_or(u128::MAX)
    }
}

fn next_permutation(xs: &mut [usize]) -> bool {
    let Some(i) = (1..xs.len()).rev().find(|&i| xs[i - 1] < xs[i]) else {
        return false;
    };
    let j = (i..xs.len()).rev().find(|&j| xs[j] > xs[i - 1]).expect("successor exists");
    xs.swap(i - 1, j);
    xs[i..].reverse();
    true
}

#[derive(Debug)]
struct Shared {
    setting: Setting,
    sets: Vec<Arc<[Valuation]>>,
    pert: Perturbation,
    /// Perturbed weight rows per bidder and domain valuation.
    weights: Vec<Vec<Vec<i128>>>,
    prefix: usize,
    order: Vec<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Phase {
    Report,
    Buy,
    Done,
}

#[derive(Clone, Debug)]
pub struct Mech3Machine {
    shared: Arc<Shared>,
    pos: usize,
    phase: Phase,
    matching: IncrementalMatching,
    menu: Vec<MenuOption>,
    tie: PerturbedTie,
    bundles: Vec<Bundle>,
    payments: Vec<Rational>,
}

impl Mech3Machine {
    fn new(shared: Arc<Shared>, n: usize) -> Self {
        let m = shared.setting.size();
        let mut machine = Mech3Machine {
            matching: IncrementalMatching::new(m),
            pos: 0,
            phase: Phase::Report,
            menu: Vec::new(),
            tie: PerturbedTie {
                value_scale: shared.pert.value_scale(),
                bonus: Vec::new(),
                perturbed_price: Vec::new(),
            },
            bundles: vec![Bundle::Items(ItemSet::EMPTY); n],
            payments: vec![Rational::zero(); n],
            shared,
        };
        machine.enter();
        machine
    }

    fn bidder(&self) -> usize {
        self.shared.order[self.pos]
    }

    /// Sets the phase for the bidder at `pos`, pricing items for buyers.
    fn enter(&mut self) {
        if self.pos >= self.shared.order.len() {
            self.phase = Phase::Done;
        } else if self.pos < self.shared.prefix {
            self.phase = Phase::Report;
        } else {
            self.phase = Phase::Buy;
            self.price_items();
        }
    }

    fn price_items(&mut self) {
        let i = self.bidder();
        let pert = &self.shared.pert;
        let total = self.matching.value();
        let losses = self.matching.removal_losses();
        let mut menu = vec![MenuOption {
            bundle: Bundle::Items(ItemSet::EMPTY),
            price: Rational::zero(),
        }];
        let mut bonus = vec![0];
        let mut perturbed = vec![0];
        for (j, &loss) in losses.iter().enumerate() {
            if !self.matching.is_alive(j) {
                continue;
            }
            let price = pert.true_value(total) - pert.true_value(total - loss);
            menu.push(MenuOption {
                bundle: Bundle::Items(ItemSet::single(j)),
                price,
            });
            bonus.push(pert.bonus(i, j));
            perturbed.push(loss);
        }
        self.menu = menu;
        self.tie.bonus = bonus;
        self.tie.perturbed_price = perturbed;
    }
}

impl Machine for Mech3Machine {
    fn node(&self) -> NodeKind {
        match self.phase {
            Phase::Done => NodeKind::Leaf,
            Phase::Report => NodeKind::Decision {
                bidder: self.bidder(),
                arity: self.shared.sets[self.bidder()].len(),
            },
            Phase::Buy => NodeKind::Decision {
                bidder: self.bidder(),
                arity: self.menu.len(),
            },
        }
    }

    fn prompt(&self) -> Prompt {
        match self.phase {
            Phase::Buy => Prompt::Menu {
                options: self.menu.clone(),
                tie: MenuTie::Perturbed(self.tie.clone()),
            },
            _ => Prompt::Report {
                options: self.shared.sets[self.bidder()].clone(),
            },
        }
    }

    fn step(&mut self, message: usize) {
        let i = self.bidder();
        let n = self.shared.order.len();
        match self.phase {
            Phase::Buy => {
                let choice = &self.menu[message];
                if let Bundle::Items(s) = choice.bundle {
                    if let Some(j) = s.iter().next() {
                        self.matching.remove_col(j);
                    }
                }
                self.bundles[i] = choice.bundle;
                self.payments[i] = choice.price;
                // The last buyer's report cannot affect anyone.
                self.phase = if self.pos + 1 == n { Phase::Done } else { Phase::Report };
            }
            Phase::Report => {
                self.matching.add_row(self.shared.weights[i][message].clone());
                self.pos += 1;
                self.enter();
            }
            Phase::Done => {}
        }
    }

    fn outcome(&self) -> Outcome {
        Outcome {
            allocation: Allocation {
                bundles: self.bundles.clone(),
            },
            payments: self.payments.clone(),
        }
    }
}
