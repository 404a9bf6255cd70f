use rayon::prelude::*;

use super::{run, Outcome, Protocol, Strategy};
use crate::caps::Caps;
use crate::error::{Error, Result};
use crate::valuations::Domain;

/// The outcome of truthful play for every profile of a domain, in
/// mixed-radix profile order (bidder 0 most significant).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RealizedRule {
    domain: Domain,
    outcomes: Vec<Outcome>,
}

impl RealizedRule {
    /// Tabulates an arbitrary rule given as a function of valuation indices.
    pub fn from_fn(domain: Domain, f: impl Fn(&[usize]) -> Outcome) -> Result<RealizedRule> {
        let size = checked_size(&domain)?;
        let outcomes = (0..size).map(|k| f(&domain.profile(k))).collect();
        Ok(RealizedRule { domain, outcomes })
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn len(&self) -> usize {
        self.outcomes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.outcomes.is_empty()
    }

    pub fn outcome(&self, profile: &[usize]) -> &Outcome {
        &self.outcomes[self.domain.profile_index(profile)]
    }

    pub fn outcomes(&self) -> &[Outcome] {
        &self.outcomes
    }
}

fn checked_size(domain: &Domain) -> Result<usize> {
    let size = domain.product_size();
    let cap = Caps::global().max_profiles;
    if size > cap as u128 {
        return Err(Error::cap("domain profiles", size, cap as u128));
    }
    Ok(size as usize)
}

pub fn realize_rule(protocol: &dyn Protocol, strategy: &dyn Strategy, domain: &Domain) -> Result<RealizedRule> {
    if domain.n() != protocol.bidders() {
        return Err(Error::Protocol("domain and protocol disagree on the bidder count".into()));
    }
    let size = checked_size(domain)?;
    let outcomes = (0..size)
        .into_par_iter()
        .map(|k| run(protocol, strategy, &domain.valuations_of(&domain.profile(k))))
        .collect::<Result<Vec<_>>>()?;
    Ok(RealizedRule {
        domain: domain.clone(),
        outcomes,
    })
}
