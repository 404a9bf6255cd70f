//! Randomized mechanisms as distributions over deterministic protocols.
//!
//! Every mechanism is played with [`CanonicalStrategy`]. Protocols are built
//! against a [`Domain`]: reporting nodes offer the bidder's domain set, and
//! clock grids cover the marginals of the domain. To run a mechanism on one
//! instance use [`Domain::singleton`], where reporting nodes collapse.

mod clock;
mod mech3;
mod partition;

pub use clock::{
    grand_bundle, m1_2x2, m2_2x2, m3_2x2, random_bundles, random_bundles_sizes, three_item_dm, GaaMixture,
};
pub use mech3::{mech3_unit_demand, observed_prefix, Mech3};
pub use partition::{mech1_decreasing_marginals, mech1_single_minded, mech2_additive, naive_max_price, Partition};

use std::sync::Arc;

use num_traits::Zero;
use rayon::prelude::*;

use crate::caps::Caps;
use crate::error::{Error, Result};
use crate::protocol::{run, CanonicalStrategy, Outcome, Protocol, Strategy};
use crate::rational::Rational;
use crate::rng::SeedStream;
use crate::valuations::{Domain, Instance, ItemSet, Setting};
use crate::welfare::opt;

#[derive(Clone)]
pub struct SupportElement {
    pub label: String,
    pub probability: Rational,
    pub protocol: Arc<dyn Protocol>,
}

impl std::fmt::Debug for SupportElement {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SupportElement")
            .field("label", &self.label)
            .field("probability", &self.probability)
            .finish_non_exhaustive()
    }
}

pub trait RandomizedMechanism: Send + Sync {
    fn name(&self) -> &str;
    fn n(&self) -> usize;
    fn setting(&self) -> &Setting;
    /// Every protocol with positive probability.
    fn support(&self, domain: &Domain) -> Result<Vec<SupportElement>>;
    /// One protocol drawn from the seed stream.
    fn sample(&self, domain: &Domain, rng: &mut SeedStream) -> Result<SupportElement>;
    /// Size of the exact support, saturating.
    fn support_size(&self) -> u128;
    fn strategy(&self) -> &dyn Strategy {
        &CanonicalStrategy
    }
}

pub const MECHANISM_NAMES: &[&str] = &[
    "grand-bundle",
    "random-bundles",
    "mech1-sm",
    "mech1-dm",
    "mech2-additive",
    "mech3-unit-demand",
    "naive-max-price",
    "m1-2x2",
    "m2-2x2",
    "m3-2x2",
    "three-item-dm",
];

/// Mechanism by name, sized for `n` bidders in `setting`.
pub fn mechanism_by_name(name: &str, n: usize, setting: &Setting) -> Result<Box<dyn RandomizedMechanism>> {
    let units = || match setting {
        Setting::MultiUnit { m } => Ok(*m),
        Setting::Combinatorial { .. } => Err(Error::Mechanism(format!("{name} needs a multi-unit setting"))),
    };
    let items = || match setting {
        Setting::Combinatorial { .. } => Ok(setting.clone()),
        Setting::MultiUnit { .. } => Err(Error::Mechanism(format!("{name} needs a combinatorial setting"))),
    };
    Ok(match name {
        "grand-bundle" => Box::new(grand_bundle(n, setting.clone())?),
        "random-bundles" => Box::new(random_bundles(n, units()?)?),
        "mech1-sm" => Box::new(mech1_single_minded(n, units()?)?),
        "mech1-dm" => Box::new(mech1_decreasing_marginals(n, units()?)?),
        "mech2-additive" => Box::new(mech2_additive(n, items()?)?),
        "mech3-unit-demand" => Box::new(mech3_unit_demand(n, items()?)?),
        "naive-max-price" => Box::new(naive_max_price(n, items()?)?),
        "m1-2x2" => Box::new(m1_2x2(crate::rational::rat(1, 2))?),
        "m2-2x2" => Box::new(m2_2x2()?),
        "m3-2x2" => Box::new(m3_2x2(crate::rational::rat(1, 3))?),
        "three-item-dm" => Box::new(three_item_dm()?),
        other => return Err(Error::Mechanism(format!("unknown mechanism {other:?}"))),
    })
}

pub(crate) fn check_shape(mech: &dyn RandomizedMechanism, domain: &Domain) -> Result<()> {
    if domain.n() != mech.n() || domain.setting() != mech.setting() {
        return Err(Error::Mechanism(format!(
            "{} is set up for {} bidders over another setting",
            mech.name(),
            mech.n()
        )));
    }
    Ok(())
}

pub(crate) fn check_support_size(size: u128) -> Result<()> {
    let cap = Caps::global().max_support as u128;
    if size > cap {
        return Err(Error::cap("mechanism support", size, cap));
    }
    Ok(())
}

/// Welfare of truthful play in one support element.
pub fn element_welfare(mech: &dyn RandomizedMechanism, e: &SupportElement, instance: &Instance) -> Result<Rational> {
    Ok(run(e.protocol.as_ref(), mech.strategy(), instance.valuations())?.welfare(instance.valuations()))
}

/// Expected welfare of truthful play, summed over the exact support.
pub fn exact_expected_welfare(mech: &dyn RandomizedMechanism, instance: &Instance) -> Result<Rational> {
    let domain = Domain::singleton(instance);
    let support = mech.support(&domain)?;
    let parts = support
        .par_iter()
        .map(|e| Ok(e.probability * element_welfare(mech, e, instance)?))
        .collect::<Result<Vec<Rational>>>()?;
    Ok(parts.into_iter().fold(Rational::zero(), |a, b| a + b))
}

/// Draws a protocol for `(seed, trial)` and plays it truthfully.
pub fn sample_run_stream(mech: &dyn RandomizedMechanism, instance: &Instance, seed: u64, trial: u64) -> Result<Outcome> {
    let domain = Domain::singleton(instance);
    let mut rng = SeedStream::new(seed, trial);
    let e = mech.sample(&domain, &mut rng)?;
    run(e.protocol.as_ref(), mech.strategy(), instance.valuations())
}

pub fn sample_run(mech: &dyn RandomizedMechanism, instance: &Instance, seed: u64) -> Result<Outcome> {
    sample_run_stream(mech, instance, seed, 0)
}

/// For every item, the probability that truthful play hands it to the bidder
/// holding it in the canonical optimum.
pub fn canonical_item_probabilities(mech: &dyn RandomizedMechanism, instance: &Instance) -> Result<Vec<Rational>> {
    let Setting::Combinatorial { items } = instance.setting() else {
        return Err(Error::Mechanism("item probabilities need a combinatorial setting".into()));
    };
    let m = items.len();
    let target = opt(instance)?.witness;
    let owner = |bundles: &[crate::valuations::Bundle], j: usize| {
        bundles.iter().position(|b| matches!(b, crate::valuations::Bundle::Items(s) if s.contains(j)))
    };
    let domain = Domain::singleton(instance);
    let mut out = vec![Rational::zero(); m];
    for e in mech.support(&domain)? {
        let o = run(e.protocol.as_ref(), mech.strategy(), instance.valuations())?;
        for (j, slot) in out.iter_mut().enumerate() {
            let want = owner(&target.bundles, j);
            if want.is_some() && owner(&o.allocation.bundles, j) == want {
                *slot += e.probability;
            }
        }
    }
    Ok(out)
}

pub(crate) fn subset_label(set: ItemSet) -> String {
    let xs: Vec<String> = set.iter().map(|i| i.to_string()).collect();
    format!("{{{}}}", xs.join(","))
}
