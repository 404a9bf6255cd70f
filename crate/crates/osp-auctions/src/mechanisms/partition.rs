//! Mechanisms that split the bidders by fair coins into a sample `S`, whose
//! reports only set prices, and the rest `U`, who buy from posted menus in
//! index order.

use std::cmp::Reverse;
use std::sync::Arc;

use num_traits::Zero;

use super::{check_shape, check_support_size, grand_bundle, subset_label, RandomizedMechanism, SupportElement};
use crate::error::{Error, Result};
use crate::protocol::{Machine, MachineProtocol, MenuOption, MenuTie, NodeKind, Outcome, Prompt};
use crate::rational::{int, Rational};
use crate::rng::SeedStream;
use crate::valuations::{
    check_decreasing_marginals, Bundle, CombinatorialValuation, Domain, Instance, ItemSet, Setting, Valuation,
};
use crate::welfare::{opt, Allocation};

const MAX_MENU_ITEMS: usize = 12;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Kind {
    /// Units at `OPT(S) / (10 m)` each.
    UnitPrice { decreasing: bool },
    /// Items at the highest sampled value, any subset.
    AdditivePrices,
    /// Items at the highest sampled value, one item.
    UnitDemandPrices,
}

#[derive(Clone, Debug)]
pub struct Partition {
    name: &'static str,
    n: usize,
    setting: Setting,
    kind: Kind,
    /// Runs the grand-bundle auction with probability 1/2 first.
    grand_half: bool,
}

/// Probability 1/2: grand-bundle auction. Otherwise `S` reports and every
/// bidder of `U`, in index order, buys her preferred quantity of the
/// remaining units at `OPT(S) / (10 m)` per unit.
pub fn mech1_single_minded(n: usize, m: u32) -> Result<Partition> {
    Partition::new("mech1-sm", n, Setting::multi_unit(m)?, Kind::UnitPrice { decreasing: false }, true)
}

/// [`mech1_single_minded`] for decreasing-marginal bidders.
pub fn mech1_decreasing_marginals(n: usize, m: u32) -> Result<Partition> {
    Partition::new("mech1-dm", n, Setting::multi_unit(m)?, Kind::UnitPrice { decreasing: true }, true)
}

/// Items are priced at the highest value in `S`; bidders of `U` buy their
/// preferred sets of unsold items. A zero-utility item is taken exactly when
/// the buyer's index is below the smallest index attaining the price.
pub fn mech2_additive(n: usize, setting: Setting) -> Result<Partition> {
    Partition::new("mech2-additive", n, setting, Kind::AdditivePrices, false)
}

/// The pricing of [`mech2_additive`] with unit-demand buyers taking at most
/// one item.
pub fn naive_max_price(n: usize, setting: Setting) -> Result<Partition> {
    Partition::new("naive-max-price", n, setting, Kind::UnitDemandPrices, false)
}

impl Partition {
    fn new(name: &'static str, n: usize, setting: Setting, kind: Kind, grand_half: bool) -> Result<Self> {
        if n == 0 || n > 63 {
            return Err(Error::Mechanism(format!("{name} supports 1..=63 bidders")));
        }
        match (&setting, kind) {
            (Setting::MultiUnit { .. }, Kind::UnitPrice { .. }) => {}
            (Setting::Combinatorial { items }, Kind::AdditivePrices) if items.len() <= MAX_MENU_ITEMS => {}
            (Setting::Combinatorial { .. }, Kind::UnitDemandPrices) => {}
            _ => return Err(Error::Mechanism(format!("{name} does not support this setting"))),
        }
        Ok(Partition {
            name,
            n,
            setting,
            kind,
            grand_half,
        })
    }

    fn check_domain(&self, domain: &Domain) -> Result<()> {
        check_shape(self, domain)?;
        let ok = |v: &Valuation| match (self.kind, v) {
            (Kind::UnitPrice { decreasing: false }, Valuation::MultiUnit(mu)) => {
                mu.is_zero() || mu.single_minded_params().is_some()
            }
            (Kind::UnitPrice { decreasing: true }, Valuation::MultiUnit(mu)) => check_decreasing_marginals(mu),
            (Kind::AdditivePrices, Valuation::Combinatorial(CombinatorialValuation::Additive(_))) => true,
            (Kind::UnitDemandPrices, Valuation::Combinatorial(CombinatorialValuation::UnitDemand(_))) => true,
            _ => false,
        };
        match domain.all_valuations().find(|v| !ok(v)) {
            Some(v) => Err(Error::Mechanism(format!("{} does not accept {v}", self.name))),
            None => Ok(()),
        }
    }

    fn partition_probability(&self) -> Rational {
        let p = Rational::new(1, 1i128 << self.n);
        if self.grand_half {
            p / int(2)
        } else {
            p
        }
    }

    fn partition_element(&self, domain: &Domain, sample: u64) -> SupportElement {
        let shared = Arc::new(Shared {
            kind: self.kind,
            setting: self.setting.clone(),
            sets: domain.sets().to_vec(),
            sample,
        });
        let machine = PartitionMachine::new(shared, self.n);
        SupportElement {
            label: format!("S={}", subset_label(ItemSet(sample))),
            probability: self.partition_probability(),
            protocol: Arc::new(MachineProtocol::new(self.n, self.setting.clone(), machine)),
        }
    }

    fn grand_element(&self, domain: &Domain) -> Result<SupportElement> {
        let mut e = grand_bundle(self.n, self.setting.clone())?
            .support(domain)?
            .pop()
            .expect("one branch");
        e.probability = Rational::new(1, 2);
        Ok(e)
    }
}

impl RandomizedMechanism for Partition {
    fn name(&self) -> &str {
        self.name
    }

    fn n(&self) -> usize {
        self.n
    }

    fn setting(&self) -> &Setting {
        &self.setting
    }

    fn support(&self, domain: &Domain) -> Result<Vec<SupportElement>> {
        self.check_domain(domain)?;
        check_support_size(self.support_size())?;
        let mut out = Vec::new();
        if self.grand_half {
            out.push(self.grand_element(domain)?);
        }
        for s in 0..1u64 << self.n {
            out.push(self.partition_element(domain, s));
        }
        Ok(out)
    }

    fn sample(&self, domain: &Domain, rng: &mut SeedStream) -> Result<SupportElement> {
        self.check_domain(domain)?;
        if self.grand_half && rng.coin() {
            return self.grand_element(domain);
        }
        let mut s = 0u64;
        for i in 0..self.n {
            if rng.coin() {
                s |= 1 << i;
            }
        }
        Ok(self.partition_element(domain, s))
    }

    fn support_size(&self) -> u128 {
        (1u128 << self.n) + self.grand_half as u128
    }
}

#[derive(Debug)]
struct Shared {
    kind: Kind,
    setting: Setting,
    sets: Vec<Arc<[Valuation]>>,
    /// Bit `i` set when bidder `i` is in `S`.
    sample: u64,
}

impl Shared {
    fn in_sample(&self, i: usize) -> bool {
        self.sample >> i & 1 == 1
    }
}

#[derive(Clone, Debug)]
enum Pricing {
    PerUnit(Rational),
    /// Price and the smallest index attaining it (`None` when `S` is empty).
    PerItem(Vec<(Rational, Option<usize>)>),
}

#[derive(Clone, Debug)]
pub struct PartitionMachine {
    shared: Arc<Shared>,
    n: usize,
    /// Next bidder to act, in index order; `n` once everyone has acted.
    next: usize,
    reports: Vec<Option<usize>>,
    pricing: Option<Pricing>,
    menu: Vec<MenuOption>,
    bundles: Vec<Bundle>,
    payments: Vec<Rational>,
    remaining: Bundle,
}

impl PartitionMachine {
    fn new(shared: Arc<Shared>, n: usize) -> Self {
        let mut m = PartitionMachine {
            n,
            next: 0,
            reports: vec![None; n],
            pricing: None,
            menu: Vec::new(),
            bundles: vec![shared.setting.empty_bundle(); n],
            payments: vec![Rational::zero(); n],
            remaining: shared.setting.full_bundle(),
            shared,
        };
        m.enter();
        m
    }

    fn buying(&self) -> bool {
        self.pricing.is_some()
    }

    /// Moves to the next bidder to act, fixing prices once `S` has reported.
    fn enter(&mut self) {
        if !self.buying() {
            while self.next < self.n && !self.shared.in_sample(self.next) {
                self.next += 1;
            }
            if self.next < self.n {
                return;
            }
            self.pricing = Some(self.price());
            self.next = 0;
        }
        while self.next < self.n && self.shared.in_sample(self.next) {
            self.next += 1;
        }
        if self.next < self.n {
            self.menu = self.build_menu(self.next);
        }
    }

    fn reported(&self) -> Vec<(usize, &Valuation)> {
        (0..self.n)
            .filter_map(|i| self.reports[i].map(|k| (i, &self.shared.sets[i][k])))
            .collect()
    }

    fn price(&self) -> Pricing {
        let reported = self.reported();
        match self.shared.kind {
            Kind::UnitPrice { .. } => {
                let m = self.shared.setting.size() as i128;
                if reported.is_empty() {
                    return Pricing::PerUnit(Rational::zero());
                }
                let inst = Instance::new(
                    self.shared.setting.clone(),
                    reported.iter().map(|(_, v)| (*v).clone()).collect(),
                )
                .expect("reported valuations fit the setting");
                let o = opt(&inst).expect("multi-unit optimum within caps").value;
                Pricing::PerUnit(o / int(10 * m))
            }
            Kind::AdditivePrices | Kind::UnitDemandPrices => {
                let m = self.shared.setting.size();
                let prices = (0..m)
                    .map(|j| {
                        let mut best: (Rational, Option<usize>) = (Rational::zero(), None);
                        for (i, v) in &reported {
                            let x = v.value(&Bundle::Items(ItemSet::single(j)));
                            if best.1.is_none() || x > best.0 {
                                best = (x, Some(*i));
                            }
                        }
                        best
                    })
                    .collect();
                Pricing::PerItem(prices)
            }
        }
    }

    fn build_menu(&self, bidder: usize) -> Vec<MenuOption> {
        match (&self.pricing, self.remaining) {
            (Some(Pricing::PerUnit(p)), Bundle::Units(r)) => (0..=r)
                .map(|q| MenuOption {
                    bundle: Bundle::Units(q),
                    price: p * int(q as i128),
                })
                .collect(),
            (Some(Pricing::PerItem(prices)), Bundle::Items(unsold)) => {
                // With nothing sampled, only the naive sampler hands out zero-utility items.
                let naive = self.shared.kind == Kind::UnitDemandPrices;
                let favored = |j: usize| prices[j].1.map_or(naive, |n| bidder < n);
                let item = |j: usize| MenuOption {
                    bundle: Bundle::Items(ItemSet::single(j)),
                    price: prices[j].0,
                };
                let nothing = MenuOption {
                    bundle: Bundle::Items(ItemSet::EMPTY),
                    price: Rational::zero(),
                };
                if self.shared.kind == Kind::UnitDemandPrices {
                    let mut menu: Vec<MenuOption> = unsold.iter().filter(|&j| favored(j)).map(item).collect();
                    menu.push(nothing);
                    menu.extend(unsold.iter().filter(|&j| !favored(j)).map(item));
                    return menu;
                }
                let items: Vec<usize> = unsold.iter().collect();
                let mut subsets: Vec<(i64, u64)> = (0..1u64 << items.len())
                    .map(|bits| {
                        let set = ItemSet::from_items(
                            items.iter().enumerate().filter(|(k, _)| bits >> k & 1 == 1).map(|(_, &j)| j),
                        );
                        let score = set.iter().map(|j| if favored(j) { 1 } else { -1 }).sum();
                        (score, set.0)
                    })
                    .collect();
                subsets.sort_by_key(|&(score, mask)| (Reverse(score), mask));
                subsets
                    .into_iter()
                    .map(|(_, mask)| {
                        let set = ItemSet(mask);
                        MenuOption {
                            bundle: Bundle::Items(set),
                            price: set.iter().map(|j| prices[j].0).sum(),
                        }
                    })
                    .collect()
            }
            _ => unreachable!("menus are built only after pricing"),
        }
    }
}

impl Machine for PartitionMachine {
    fn node(&self) -> NodeKind {
        if self.next >= self.n {
            return NodeKind::Leaf;
        }
        let arity = if self.buying() {
            self.menu.len()
        } else {
            self.shared.sets[self.next].len()
        };
        NodeKind::Decision {
            bidder: self.next,
            arity,
        }
    }

    fn prompt(&self) -> Prompt {
        if self.buying() {
            Prompt::Menu {
                options: self.menu.clone(),
                tie: MenuTie::FirstListed,
            }
        } else {
            Prompt::Report {
                options: self.shared.sets[self.next].clone(),
            }
        }
    }

    fn step(&mut self, message: usize) {
        let i = self.next;
        if self.buying() {
            let choice = self.menu[message].clone();
            self.remaining = match (self.remaining, choice.bundle) {
                (Bundle::Units(r), Bundle::Units(q)) => Bundle::Units(r - q),
                (Bundle::Items(a), Bundle::Items(s)) => Bundle::Items(a.minus(s)),
                _ => unreachable!("bundle kinds match the setting"),
            };
            self.bundles[i] = choice.bundle;
            self.payments[i] = choice.price;
        } else {
            self.reports[i] = Some(message);
        }
        self.next += 1;
        self.enter();
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
