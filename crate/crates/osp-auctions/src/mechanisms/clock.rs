use std::sync::Arc;

use num_traits::{One, Zero};

use super::{check_shape, check_support_size, RandomizedMechanism, SupportElement};
use crate::error::{Error, Result};
use crate::protocol::{build_gaa, gaa_grid, GaaSpec};
use crate::rational::{int, Rational};
use crate::rng::SeedStream;
use crate::valuations::{Bundle, Domain, ItemSet, Setting};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GaaBranch {
    pub label: String,
    pub probability: Rational,
    pub base: Vec<Bundle>,
    pub potential: Vec<Bundle>,
    pub poll_order: Vec<usize>,
}

/// A finite mixture of generalized ascending auctions. Clock grids are taken
/// from the domain the support is built for.
#[derive(Clone, Debug)]
pub struct GaaMixture {
    name: String,
    n: usize,
    setting: Setting,
    branches: Vec<GaaBranch>,
}

impl GaaMixture {
    pub fn new(name: &str, n: usize, setting: Setting, branches: Vec<GaaBranch>) -> Result<Self> {
        let branches: Vec<GaaBranch> = branches.into_iter().filter(|b| !b.probability.is_zero()).collect();
        let total: Rational = branches.iter().map(|b| b.probability).sum();
        if branches.iter().any(|b| b.probability < Rational::zero()) || total != Rational::one() {
            return Err(Error::Mechanism(format!("{name}: branch probabilities must be a distribution")));
        }
        if branches.iter().any(|b| b.base.len() != n || b.potential.len() != n) {
            return Err(Error::Mechanism(format!("{name}: every branch needs {n} bidders")));
        }
        Ok(GaaMixture {
            name: name.to_string(),
            n,
            setting,
            branches,
        })
    }

    pub fn branches(&self) -> &[GaaBranch] {
        &self.branches
    }

    fn element(&self, b: &GaaBranch, domain: &Domain) -> Result<SupportElement> {
        let spec = GaaSpec {
            setting: self.setting.clone(),
            base: b.base.clone(),
            potential: b.potential.clone(),
            grid: gaa_grid(domain, &b.base, &b.potential),
            poll_order: b.poll_order.clone(),
        };
        Ok(SupportElement {
            label: b.label.clone(),
            probability: b.probability,
            protocol: Arc::new(build_gaa(spec)?),
        })
    }
}

impl RandomizedMechanism for GaaMixture {
    fn name(&self) -> &str {
        &self.name
    }

    fn n(&self) -> usize {
        self.n
    }

    fn setting(&self) -> &Setting {
        &self.setting
    }

    fn support(&self, domain: &Domain) -> Result<Vec<SupportElement>> {
        check_shape(self, domain)?;
        check_support_size(self.branches.len() as u128)?;
        self.branches.iter().map(|b| self.element(b, domain)).collect()
    }

    fn sample(&self, domain: &Domain, rng: &mut SeedStream) -> Result<SupportElement> {
        check_shape(self, domain)?;
        let weights: Vec<Rational> = self.branches.iter().map(|b| b.probability).collect();
        let k = if weights.len() == 1 { 0 } else { rng.pick(&weights) };
        self.element(&self.branches[k], domain)
    }

    fn support_size(&self) -> u128 {
        self.branches.len() as u128
    }
}

fn identity(n: usize) -> Vec<usize> {
    (0..n).collect()
}

/// Ascending auction for everything, sold to at most one bidder.
pub fn grand_bundle(n: usize, setting: Setting) -> Result<GaaMixture> {
    let branch = GaaBranch {
        label: "grand".into(),
        probability: Rational::one(),
        base: vec![setting.empty_bundle(); n],
        potential: vec![setting.full_bundle(); n],
        poll_order: identity(n),
    };
    GaaMixture::new("grand-bundle", n, setting, vec![branch])
}

/// Bundle sizes `1, 2, 4, ...` below `m`, then `m` itself.
pub fn random_bundles_sizes(m: u32) -> Vec<u32> {
    let mut sizes = Vec::new();
    let mut s = 1u32;
    while s < m {
        sizes.push(s);
        s = s.saturating_mul(2);
    }
    sizes.push(m);
    sizes
}

/// A uniformly drawn bundle size `l`; bundles of exactly `l` units are then
/// sold by one clock until at most `m / l` bidders remain.
pub fn random_bundles(n: usize, m: u32) -> Result<GaaMixture> {
    let setting = Setting::multi_unit(m)?;
    let sizes = random_bundles_sizes(m);
    let p = Rational::new(1, sizes.len() as i128);
    let branches = sizes
        .into_iter()
        .map(|l| GaaBranch {
            label: format!("l={l}"),
            probability: p,
            base: vec![Bundle::Units(0); n],
            potential: vec![Bundle::Units(l); n],
            poll_order: identity(n),
        })
        .collect();
    GaaMixture::new("random-bundles", n, setting, branches)
}

/// Two bidders, two units: the grand-bundle auction with probability `p`,
/// otherwise a uniformly chosen bidder is handed one unit and competes for
/// the second.
pub fn m1_2x2(p: Rational) -> Result<GaaMixture> {
    if p < Rational::zero() || p > Rational::one() {
        return Err(Error::Mechanism("mixing probability must lie in [0, 1]".into()));
    }
    let setting = Setting::multi_unit(2)?;
    let mut branches = vec![GaaBranch {
        label: "grand".into(),
        probability: p,
        base: vec![Bundle::Units(0); 2],
        potential: vec![Bundle::Units(2); 2],
        poll_order: identity(2),
    }];
    for i in 0..2 {
        let mut base = vec![Bundle::Units(0); 2];
        let mut potential = vec![Bundle::Units(1); 2];
        base[i] = Bundle::Units(1);
        potential[i] = Bundle::Units(2);
        branches.push(GaaBranch {
            label: format!("fix(bidder={i})"),
            probability: (Rational::one() - p) / int(2),
            base,
            potential,
            poll_order: identity(2),
        });
    }
    GaaMixture::new("m1-2x2", 2, setting, branches)
}

fn fixed_award_branches(probability: Rational) -> Vec<GaaBranch> {
    let mut out = Vec::new();
    for i in 0..2 {
        for j in 0..2 {
            let mut base = vec![Bundle::Items(ItemSet::EMPTY); 2];
            let mut potential = vec![Bundle::Items(ItemSet::single(1 - j)); 2];
            base[i] = Bundle::Items(ItemSet::single(j));
            potential[i] = Bundle::Items(ItemSet::full(2));
            out.push(GaaBranch {
                label: format!("fix(bidder={i},item={})", ["a", "b"][j]),
                probability,
                base,
                potential,
                poll_order: identity(2),
            });
        }
    }
    out
}

/// Two bidders, items `a` and `b`: a uniformly chosen bidder is handed a
/// uniformly chosen item and competes for the other one.
pub fn m2_2x2() -> Result<GaaMixture> {
    GaaMixture::new("m2-2x2", 2, Setting::lettered(2)?, fixed_award_branches(Rational::new(1, 4)))
}

/// The grand-bundle auction with probability `p`, otherwise the mixture of
/// [`m2_2x2`].
pub fn m3_2x2(p: Rational) -> Result<GaaMixture> {
    if p < Rational::zero() || p > Rational::one() {
        return Err(Error::Mechanism("mixing probability must lie in [0, 1]".into()));
    }
    let setting = Setting::lettered(2)?;
    let mut branches = vec![GaaBranch {
        label: "grand".into(),
        probability: p,
        base: vec![Bundle::Items(ItemSet::EMPTY); 2],
        potential: vec![Bundle::Items(ItemSet::full(2)); 2],
        poll_order: identity(2),
    }];
    branches.extend(fixed_award_branches((Rational::one() - p) / int(4)));
    GaaMixture::new("m3-2x2", 2, setting, branches)
}

/// Two bidders, three units: one unit each, and a clock for the third. Ties
/// go to bidder 0, who is polled second.
pub fn three_item_dm() -> Result<GaaMixture> {
    let branch = GaaBranch {
        label: "one-each".into(),
        probability: Rational::one(),
        base: vec![Bundle::Units(1); 2],
        potential: vec![Bundle::Units(2); 2],
        poll_order: vec![1, 0],
    };
    GaaMixture::new("three-item-dm", 2, Setting::multi_unit(3)?, vec![branch])
}
