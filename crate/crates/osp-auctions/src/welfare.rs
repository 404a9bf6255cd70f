//! Exact optimal welfare, restricted optima and an independent brute-force
//! oracle.
//!
//! Ties between optimal allocations are broken by one global rule: bidder 0
//! receives the largest possible bundle, then bidder 1, and so on. Bundles
//! are ordered by quantity (multi-unit) or by their item-indicator vector
//! read with item 0 most significant (combinatorial). For additive bidders
//! this hands every item to the lowest-index bidder among those valuing it
//! most. When every bidder is unit-demand, optima are taken over matchings
//! (at most one item per bidder) and the same rule applies.

use std::cmp::Ordering;

use num_traits::Zero;

use crate::caps::Caps;
use crate::error::{Error, Result};
use crate::matching::IncrementalMatching;
use crate::rational::{denominator_lcm, int, rat, Rational};
use crate::valuations::{Bundle, CombinatorialValuation, Instance, ItemSet, Setting, Valuation};

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Allocation {
    pub bundles: Vec<Bundle>,
}

impl Allocation {
    pub fn empty(setting: &Setting, n: usize) -> Self {
        Allocation {
            bundles: vec![setting.empty_bundle(); n],
        }
    }

    pub fn welfare(&self, valuations: &[Valuation]) -> Rational {
        self.bundles
            .iter()
            .zip(valuations)
            .map(|(b, v)| v.value(b))
            .sum()
    }

    pub fn is_feasible(&self, setting: &Setting) -> bool {
        setting.is_feasible(&self.bundles)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OptResult {
    pub value: Rational,
    pub witness: Allocation,
}

/// Tie-breaking rank of a bundle; larger ranks are preferred.
pub fn bundle_rank(setting: &Setting, b: &Bundle) -> u128 {
    match b {
        Bundle::Units(q) => *q as u128,
        Bundle::Items(s) => {
            let m = setting.size();
            s.iter().map(|j| 1u128 << (m - 1 - j)).sum()
        }
    }
}

/// Orders allocations of equal welfare: `Greater` means `a` is preferred.
pub fn canonical_cmp(setting: &Setting, a: &Allocation, b: &Allocation) -> Ordering {
    for (x, y) in a.bundles.iter().zip(&b.bundles) {
        match bundle_rank(setting, x).cmp(&bundle_rank(setting, y)) {
            Ordering::Equal => continue,
            other => return other,
        }
    }
    Ordering::Equal
}

pub fn default_critical_threshold() -> Rational {
    rat(1, 100)
}

pub fn opt(instance: &Instance) -> Result<OptResult> {
    let all: Vec<usize> = (0..instance.n()).collect();
    opt_restricted(instance, &all, &instance.setting().full_bundle())
}

fn check_subsets(instance: &Instance, bidders: &[usize], supply: &Bundle) -> Result<()> {
    if bidders.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidInstance("bidder subset must be strictly increasing".into()));
    }
    if bidders.iter().any(|&b| b >= instance.n()) {
        return Err(Error::InvalidInstance("bidder subset outside the instance".into()));
    }
    if !instance.setting().contains(supply) {
        return Err(Error::Bundle("item subset outside the instance".into()));
    }
    Ok(())
}

/// Optimum over allocations that give items of `supply` to `bidders` only.
/// `bidders` must be strictly increasing; the witness has one bundle per
/// bidder of the instance.
pub fn opt_restricted(instance: &Instance, bidders: &[usize], supply: &Bundle) -> Result<OptResult> {
    check_subsets(instance, bidders, supply)?;
    let setting = instance.setting();
    if bidders.is_empty() || supply.is_empty() {
        return Ok(OptResult {
            value: Rational::zero(),
            witness: Allocation::empty(setting, instance.n()),
        });
    }
    match supply {
        Bundle::Units(k) => multi_unit_opt(instance, bidders, *k),
        Bundle::Items(s) => {
            let vals: Vec<&CombinatorialValuation> = bidders
                .iter()
                .map(|&b| instance.valuation(b).as_combinatorial().expect("checked by Instance"))
                .collect();
            if vals.iter().all(|v| matches!(v, CombinatorialValuation::Additive(_))) {
                Ok(additive_opt(instance, bidders, *s))
            } else if vals.iter().all(|v| matches!(v, CombinatorialValuation::UnitDemand(_))) {
                unit_demand_opt(instance, bidders, *s)
            } else {
                subset_dp_opt(instance, bidders, *s)
            }
        }
    }
}

fn multi_unit_opt(instance: &Instance, bidders: &[usize], k: u32) -> Result<OptResult> {
    let vals: Vec<_> = bidders
        .iter()
        .map(|&b| instance.valuation(b).as_multi_unit().expect("checked by Instance"))
        .collect();
    let t = vals.len();
    let k = k as usize;
    let single = vals
        .iter()
        .all(|v| v.is_zero() || v.single_minded_params().is_some());
    let work = if single {
        (t as u128) * (k as u128 + 1)
    } else {
        (t as u128) * (k as u128 + 1) * (k as u128 + 1)
    };
    let caps = Caps::global();
    if work > caps.max_opt_work {
        return Err(Error::cap("multi-unit DP work", work, caps.max_opt_work));
    }
    // best[i][r]: optimum of bidders i.. with at most r units.
    let mut best = vec![vec![Rational::zero(); k + 1]; t + 1];
    for i in (0..t).rev() {
        let (head, tail) = best.split_at_mut(i + 1);
        let next = &tail[0];
        let row = &mut head[i];
        let v = vals[i];
        match v.single_minded_params() {
            Some(p) if single => {
                let d = p.d as usize;
                for r in 0..=k {
                    row[r] = next[r];
                    if d <= r {
                        let cand = p.x + next[r - d];
                        if cand > row[r] {
                            row[r] = cand;
                        }
                    }
                }
            }
            _ if single => row.copy_from_slice(next),
            _ => {
                for r in 0..=k {
                    let mut b = next[r];
                    for q in 1..=r {
                        let cand = v.value(q as u32) + next[r - q];
                        if cand > b {
                            b = cand;
                        }
                    }
                    row[r] = b;
                }
            }
        }
    }
    let mut witness = Allocation::empty(instance.setting(), instance.n());
    let mut r = k;
    for i in 0..t {
        let target = best[i][r];
        let q = (0..=r)
            .rev()
            .find(|&q| vals[i].value(q as u32) + best[i + 1][r - q] == target)
            .expect("the DP optimum is attained");
        witness.bundles[bidders[i]] = Bundle::Units(q as u32);
        r -= q;
    }
    Ok(OptResult {
        value: best[0][k],
        witness,
    })
}

fn additive_opt(instance: &Instance, bidders: &[usize], supply: ItemSet) -> OptResult {
    let mut witness = Allocation::empty(instance.setting(), instance.n());
    let mut sets = vec![ItemSet::EMPTY; instance.n()];
    let mut value = Rational::zero();
    for j in supply.iter() {
        let mut owner = bidders[0];
        let mut best = instance.valuation(owner).value(&Bundle::Items(ItemSet::single(j)));
        for &b in &bidders[1..] {
            let v = instance.valuation(b).value(&Bundle::Items(ItemSet::single(j)));
            if v > best {
                best = v;
                owner = b;
            }
        }
        value += best;
        sets[owner] = sets[owner].with(j);
    }
    for (i, s) in sets.into_iter().enumerate() {
        witness.bundles[i] = Bundle::Items(s);
    }
    OptResult { value, witness }
}

/// Integer encoding of unit-demand weights that realizes the global
/// tie-breaking rule: value first, then bidder 0's item, then bidder 1's.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Perturbation {
    n: usize,
    m: usize,
    lcm: i128,
    scale: i128,
    value_scale: i128,
}

impl Perturbation {
    /// `lcm` must clear every denominator; `max_value` bounds all values.
    pub fn new(n: usize, m: usize, lcm: i128, max_value: Rational) -> Result<Self> {
        let overflow = || Error::cap("perturbed matching weight bits", 128, 120);
        let base = m as i128 + 1;
        let mut scale: i128 = 1;
        for _ in 0..n {
            scale = scale.checked_mul(base).ok_or_else(overflow)?;
        }
        let value_scale = lcm.checked_mul(scale).ok_or_else(overflow)?;
        let top = (max_value * lcm).ceil().to_integer() + 1;
        let bound = top
            .checked_mul(scale)
            .and_then(|x| x.checked_mul(n as i128 + 2))
            .ok_or_else(overflow)?;
        if bound > 1i128 << 120 {
            return Err(overflow());
        }
        Ok(Perturbation {
            n,
            m,
            lcm,
            scale,
            value_scale,
        })
    }

    pub fn for_valuations<'a>(
        n: usize,
        m: usize,
        valuations: impl IntoIterator<Item = &'a Valuation> + Clone,
    ) -> Result<Self> {
        let numbers: Vec<Rational> = valuations.into_iter().flat_map(|v| v.numbers()).collect();
        let lcm = denominator_lcm(&numbers);
        let max = numbers.iter().copied().max().unwrap_or_else(Rational::zero);
        Perturbation::new(n, m, lcm, max)
    }

    pub fn value_scale(&self) -> i128 {
        self.value_scale
    }

    /// Tie-breaking bonus for giving `item` to `bidder`.
    pub fn bonus(&self, bidder: usize, item: usize) -> i128 {
        let base = self.m as i128 + 1;
        let mut place: i128 = 1;
        for _ in 0..(self.n - 1 - bidder) {
            place *= base;
        }
        (self.m - item) as i128 * place
    }

    pub fn scaled_value(&self, value: &Rational) -> Result<i128> {
        let x = value * self.value_scale;
        if !x.is_integer() {
            return Err(Error::InvalidValuation(
                "value denominator not cleared by the perturbation".into(),
            ));
        }
        Ok(x.to_integer())
    }

    pub fn weight(&self, bidder: usize, item: usize, value: &Rational) -> Result<i128> {
        Ok(self.scaled_value(value)? + self.bonus(bidder, item))
    }

    /// The unperturbed welfare of a matching with perturbed weight `total`.
    pub fn true_value(&self, total: i128) -> Rational {
        rat(total.div_euclid(self.scale), self.lcm)
    }
}

fn unit_demand_opt(instance: &Instance, bidders: &[usize], supply: ItemSet) -> Result<OptResult> {
    let m = instance.setting().size();
    let pert = Perturbation::for_valuations(
        instance.n(),
        m,
        bidders.iter().map(|&b| instance.valuation(b)),
    )?;
    let items: Vec<usize> = supply.iter().collect();
    let mut matching = IncrementalMatching::new(items.len());
    for &b in bidders {
        let v = instance.valuation(b);
        let row = items
            .iter()
            .map(|&j| pert.weight(b, j, &v.value(&Bundle::Items(ItemSet::single(j)))))
            .collect::<Result<Vec<_>>>()?;
        matching.add_row(row);
    }
    let mut witness = Allocation::empty(instance.setting(), instance.n());
    for (r, &b) in bidders.iter().enumerate() {
        if let Some(c) = matching.row_match(r) {
            witness.bundles[b] = Bundle::Items(ItemSet::single(items[c]));
        }
    }
    Ok(OptResult {
        value: pert.true_value(matching.value()),
        witness,
    })
}

fn subset_dp_opt(instance: &Instance, bidders: &[usize], supply: ItemSet) -> Result<OptResult> {
    let setting = instance.setting();
    let items: Vec<usize> = supply.iter().collect();
    let k = items.len();
    let t = bidders.len();
    let work = (t as u128) * 3u128.saturating_pow(k as u32);
    let caps = Caps::global();
    if work > caps.max_opt_work {
        return Err(Error::cap("subset DP work", work, caps.max_opt_work));
    }
    let size = 1usize << k;
    let real: Vec<ItemSet> = (0..size)
        .map(|c| ItemSet::from_items((0..k).filter(|&i| c >> i & 1 == 1).map(|i| items[i])))
        .collect();
    let vals: Vec<Vec<Rational>> = bidders
        .iter()
        .map(|&b| {
            let v = instance.valuation(b);
            real.iter().map(|s| v.value(&Bundle::Items(*s))).collect()
        })
        .collect();
    // g[i][a]: optimum of bidders i.. over compressed item set a.
    let mut g = vec![vec![Rational::zero(); size]; t + 1];
    for i in (0..t).rev() {
        for a in 0..size {
            let mut best = g[i + 1][a];
            let mut s = a;
            while s > 0 {
                let cand = vals[i][s] + g[i + 1][a & !s];
                if cand > best {
                    best = cand;
                }
                s = (s - 1) & a;
            }
            g[i][a] = best;
        }
    }
    let mut witness = Allocation::empty(setting, instance.n());
    let mut a = size - 1;
    for i in 0..t {
        let target = g[i][a];
        let mut chosen: Option<usize> = None;
        let mut s = a;
        loop {
            if vals[i][s] + g[i + 1][a & !s] == target {
                let better = match chosen {
                    None => true,
                    Some(c) => {
                        bundle_rank(setting, &Bundle::Items(real[s]))
                            > bundle_rank(setting, &Bundle::Items(real[c]))
                    }
                };
                if better {
                    chosen = Some(s);
                }
            }
            if s == 0 {
                break;
            }
            s = (s - 1) & a;
        }
        let s = chosen.expect("the DP optimum is attained");
        witness.bundles[bidders[i]] = Bundle::Items(real[s]);
        a &= !s;
    }
    Ok(OptResult {
        value: g[0][size - 1],
        witness,
    })
}

pub fn brute_force_opt(instance: &Instance) -> Result<OptResult> {
    let all: Vec<usize> = (0..instance.n()).collect();
    brute_force_opt_restricted(instance, &all, &instance.setting().full_bundle())
}

/// Exhaustive enumeration of every feasible allocation.
pub fn brute_force_opt_restricted(
    instance: &Instance,
    bidders: &[usize],
    supply: &Bundle,
) -> Result<OptResult> {
    check_subsets(instance, bidders, supply)?;
    let setting = instance.setting();
    let n = instance.n();
    let caps = Caps::global();
    let mut best: Option<OptResult> = None;
    let mut consider = |alloc: Allocation| {
        let value = alloc.welfare(instance.valuations());
        let better = match &best {
            None => true,
            Some(b) => match value.cmp(&b.value) {
                Ordering::Greater => true,
                Ordering::Less => false,
                Ordering::Equal => canonical_cmp(setting, &alloc, &b.witness) == Ordering::Greater,
            },
        };
        if better {
            best = Some(OptResult {
                value,
                witness: alloc,
            });
        }
    };
    match supply {
        Bundle::Units(units) => {
            let k = *units as u128;
            let t = bidders.len() as u128;
            // Compositions with sum <= k: C(k + t, t).
            let mut count: u128 = 1;
            for i in 1..=t {
                count = count.saturating_mul(k + i) / i;
            }
            if count > caps.max_brute_force {
                return Err(Error::cap("brute-force allocations", count, caps.max_brute_force));
            }
            let mut q = vec![0u32; bidders.len()];
            fn rec(
                pos: usize,
                left: u32,
                q: &mut Vec<u32>,
                bidders: &[usize],
                n: usize,
                f: &mut dyn FnMut(Allocation),
            ) {
                if pos == q.len() {
                    let mut bundles = vec![Bundle::Units(0); n];
                    for (i, &b) in bidders.iter().enumerate() {
                        bundles[b] = Bundle::Units(q[i]);
                    }
                    f(Allocation { bundles });
                    return;
                }
                for x in 0..=left {
                    q[pos] = x;
                    rec(pos + 1, left - x, q, bidders, n, f);
                }
            }
            rec(0, *units, &mut q, bidders, n, &mut consider);
        }
        Bundle::Items(s) => {
            let items: Vec<usize> = s.iter().collect();
            let t = bidders.len();
            let count = ((t as u128) + 1).saturating_pow(items.len() as u32);
            if count > caps.max_brute_force {
                return Err(Error::cap("brute-force allocations", count, caps.max_brute_force));
            }
            let unit_demand = bidders.iter().all(|&b| {
                matches!(
                    instance.valuation(b),
                    Valuation::Combinatorial(CombinatorialValuation::UnitDemand(_))
                )
            });
            // owner[i] in 0..=t, where t means "unallocated".
            let mut owner = vec![0usize; items.len()];
            loop {
                let mut sets = vec![ItemSet::EMPTY; n];
                for (i, &o) in owner.iter().enumerate() {
                    if o < t {
                        sets[bidders[o]] = sets[bidders[o]].with(items[i]);
                    }
                }
                if !unit_demand || sets.iter().all(|s| s.len() <= 1) {
                    consider(Allocation {
                        bundles: sets.into_iter().map(Bundle::Items).collect(),
                    });
                }
                let mut pos = 0;
                loop {
                    if pos == owner.len() {
                        break;
                    }
                    owner[pos] += 1;
                    if owner[pos] <= t {
                        break;
                    }
                    owner[pos] = 0;
                    pos += 1;
                }
                if pos == owner.len() {
                    break;
                }
            }
        }
    }
    Ok(best.unwrap_or(OptResult {
        value: int(0),
        witness: Allocation::empty(setting, n),
    }))
}

/// `v_i(M) >= threshold * OPT`.
pub fn is_critical(instance: &Instance, bidder: usize, threshold: Rational) -> Result<bool> {
    if bidder >= instance.n() {
        return Err(Error::InvalidInstance(format!("no bidder {bidder}")));
    }
    let grand = instance
        .valuation(bidder)
        .value(&instance.setting().full_bundle());
    Ok(grand >= threshold * opt(instance)?.value)
}
