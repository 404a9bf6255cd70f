//! Hard distributions, exact and sampled welfare ratios, and searches.

mod grids;
mod sampling;

pub use grids::{
    additive_grid, dm_grid, explicit_monotone_grid, explicit_subadditive_grid, grid_valuations, multi_unit_grid,
    single_minded_grid, unit_demand_grid, worst_case_search, GridClass, GridSpec, SearchReport,
};
pub use sampling::{sampling_lemma_experiment, ud_failure_instance, SamplingMethod, SamplingReport};

use num_traits::{ToPrimitive, Zero};
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::mechanisms::{exact_expected_welfare, sample_run_stream, RandomizedMechanism};
use crate::protocol::{run, Protocol, Strategy};
use crate::rational::{format_rational, int, Rational};
use crate::rng::GENERATOR;
use crate::valuations::{
    make_single_minded, CombinatorialValuation, Domain, Instance, Setting, Valuation,
};
use crate::welfare::opt;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DistEntry {
    pub label: String,
    pub profile: Vec<Valuation>,
    pub probability: Rational,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ProfileDistribution {
    setting: Setting,
    k: u64,
    entries: Vec<DistEntry>,
}

impl ProfileDistribution {
    pub fn new(setting: Setting, k: u64, entries: Vec<DistEntry>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::Experiment("empty distribution".into()));
        }
        if entries.iter().any(|e| e.probability <= Rational::zero()) {
            return Err(Error::Experiment("probabilities must be positive".into()));
        }
        let total: Rational = entries.iter().map(|e| e.probability).sum();
        if total != int(1) {
            return Err(Error::Experiment(format!("probabilities sum to {}", format_rational(&total))));
        }
        let n = entries[0].profile.len();
        for e in &entries {
            if e.profile.len() != n || e.profile.iter().any(|v| !v.fits(&setting)) {
                return Err(Error::Experiment(format!("profile {} does not fit the setting", e.label)));
            }
        }
        Ok(ProfileDistribution { setting, k, entries })
    }

    pub fn setting(&self) -> &Setting {
        &self.setting
    }

    pub fn k(&self) -> u64 {
        self.k
    }

    pub fn n(&self) -> usize {
        self.entries[0].profile.len()
    }

    pub fn entries(&self) -> &[DistEntry] {
        &self.entries
    }

    pub fn instance(&self, idx: usize) -> Result<Instance> {
        Instance::new(self.setting.clone(), self.entries[idx].profile.clone())
    }

    /// Per bidder, the distinct valuations of the support in order of first
    /// appearance.
    pub fn domain(&self) -> Result<Domain> {
        let mut sets: Vec<Vec<Valuation>> = vec![Vec::new(); self.n()];
        for e in &self.entries {
            for (set, v) in sets.iter_mut().zip(&e.profile) {
                if !set.contains(v) {
                    set.push(v.clone());
                }
            }
        }
        Domain::new(self.setting.clone(), sets)
    }
}

fn check_k(k: u64) -> Result<i128> {
    if k < 2 {
        return Err(Error::Experiment(format!("k must be at least 2, got {k}")));
    }
    let k = k as i128;
    k.checked_pow(4)
        .filter(|k4| k4.checked_mul(16).is_some())
        .ok_or_else(|| Error::Experiment("k is too large".into()))?;
    Ok(k)
}

/// Multi-unit, `m = 2`, single-minded valuations `one`, `ONE`, `all`, `ALL`.
pub struct MuaSmValuations {
    pub one: Valuation,
    pub one_big: Valuation,
    pub all: Valuation,
    pub all_big: Valuation,
}

pub fn mua_sm_valuations(k: u64) -> Result<MuaSmValuations> {
    let k = check_k(k)?;
    let sm = |x: i128, d: u32| -> Result<Valuation> { Ok(make_single_minded(int(x), d, 2)?.into()) };
    Ok(MuaSmValuations {
        one: sm(1, 1)?,
        one_big: sm(k * k + 1, 1)?,
        all: sm(k * k, 2)?,
        all_big: sm(k.pow(4), 2)?,
    })
}

pub fn hard_dist_mua_sm(k: u64) -> Result<ProfileDistribution> {
    let v = mua_sm_valuations(k)?;
    let entry = |label: &str, a: &Valuation, b: &Valuation, p: Rational| DistEntry {
        label: label.into(),
        profile: vec![a.clone(), b.clone()],
        probability: p,
    };
    let sixth = Rational::new(1, 6);
    ProfileDistribution::new(
        Setting::multi_unit(2)?,
        k,
        vec![
            entry("I1", &v.one, &v.one, Rational::new(1, 3)),
            entry("I2", &v.all, &v.one, sixth),
            entry("I3", &v.one_big, &v.all_big, sixth),
            entry("I4", &v.one, &v.all, sixth),
            entry("I5", &v.all_big, &v.one_big, sixth),
        ],
    )
}

/// Every bidder may hold `one`, `ONE`, `all` or `ALL`.
pub fn hard_domain_mua_sm(k: u64) -> Result<Domain> {
    let v = mua_sm_valuations(k)?;
    Domain::uniform(Setting::multi_unit(2)?, 2, vec![v.one, v.one_big, v.all, v.all_big])
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum ItemVariant {
    Additive,
    UnitDemand,
}

fn two_item(variant: ItemVariant, a: i128, b: i128) -> Result<Valuation> {
    let values = vec![int(a), int(b)];
    Ok(match variant {
        ItemVariant::Additive => CombinatorialValuation::additive(values)?,
        ItemVariant::UnitDemand => CombinatorialValuation::unit_demand(values)?,
    }
    .into())
}

/// Valuations of one bidder over items `a`, `b`, keyed by name. Bidder 0 is
/// the `a`-leaning bidder; bidder 1 mirrors it with the items swapped.
fn two_item_valuations(variant: ItemVariant, k: i128, bidder: usize) -> Result<Vec<(&'static str, Valuation)>> {
    let place = |own: i128, other: i128| if bidder == 0 { (own, other) } else { (other, own) };
    let on_own = |x: i128| place(x, 0);
    let on_other = |x: i128| place(0, x);
    let both = place(2 * k + 3, 2 * k + 1);
    let raw = [
        ("own-one", on_own(1)),
        ("own-mid", on_own(k * k)),
        ("own-large", on_own(k.pow(4))),
        ("other-small", on_other(k)),
        ("other-mid", on_other(k * k)),
        ("other-large", on_other(k.pow(4))),
        ("both", both),
    ];
    raw.into_iter()
        .map(|(name, (a, b))| Ok((name, two_item(variant, a, b)?)))
        .collect()
}

fn hard_dist_two_item(variant: ItemVariant, k: u64) -> Result<ProfileDistribution> {
    let kk = check_k(k)?;
    let v0 = two_item_valuations(variant, kk, 0)?;
    let v1 = two_item_valuations(variant, kk, 1)?;
    let get = |vs: &[(&str, Valuation)], name: &str| vs.iter().find(|(n, _)| *n == name).expect("named").1.clone();
    let eighth = Rational::new(1, 8);
    let profiles = [
        ("I1", "own-one", "own-one", Rational::new(1, 4)),
        ("I2", "own-mid", "other-large", eighth),
        ("I3", "other-large", "own-mid", eighth),
        ("I4", "other-mid", "own-large", eighth),
        ("I5", "own-large", "other-mid", eighth),
        ("I6", "other-small", "own-one", eighth),
        ("I7", "own-one", "other-small", eighth),
    ];
    let entries = profiles
        .into_iter()
        .map(|(label, a, b, p)| DistEntry {
            label: label.into(),
            profile: vec![get(&v0, a), get(&v1, b)],
            probability: p,
        })
        .collect();
    ProfileDistribution::new(Setting::lettered(2)?, k, entries)
}

pub fn hard_dist_additive(k: u64) -> Result<ProfileDistribution> {
    hard_dist_two_item(ItemVariant::Additive, k)
}

pub fn hard_dist_unit_demand(k: u64) -> Result<ProfileDistribution> {
    hard_dist_two_item(ItemVariant::UnitDemand, k)
}

fn hard_domain_two_item(variant: ItemVariant, k: u64) -> Result<Domain> {
    let kk = check_k(k)?;
    let sets = (0..2)
        .map(|i| Ok(two_item_valuations(variant, kk, i)?.into_iter().map(|(_, v)| v).collect()))
        .collect::<Result<Vec<_>>>()?;
    Domain::new(Setting::lettered(2)?, sets)
}

/// The seven valuations per bidder, including `both`.
pub fn hard_domain_additive(k: u64) -> Result<Domain> {
    hard_domain_two_item(ItemVariant::Additive, k)
}

pub fn hard_domain_unit_demand(k: u64) -> Result<Domain> {
    hard_domain_two_item(ItemVariant::UnitDemand, k)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ProfileRatio {
    pub label: String,
    pub probability: Rational,
    pub welfare: Rational,
    pub opt: Rational,
    pub ratio: Rational,
}

#[derive(Clone, Debug, PartialEq)]
pub enum ExpectedRatio {
    Exact(Rational),
    Estimate { estimate: f64, stderr: f64, trials: u64 },
}

impl ExpectedRatio {
    pub fn exact(&self) -> Option<Rational> {
        match self {
            ExpectedRatio::Exact(r) => Some(*r),
            ExpectedRatio::Estimate { .. } => None,
        }
    }

    pub fn estimate(&self) -> f64 {
        match self {
            ExpectedRatio::Exact(r) => r.to_f64().unwrap_or(f64::NAN),
            ExpectedRatio::Estimate { estimate, .. } => *estimate,
        }
    }

    pub fn stderr(&self) -> f64 {
        match self {
            ExpectedRatio::Exact(_) => 0.0,
            ExpectedRatio::Estimate { stderr, .. } => *stderr,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RatioReport {
    pub mechanism: String,
    pub seed: Option<u64>,
    pub k: Option<u64>,
    pub expected: ExpectedRatio,
    pub breakdown: Vec<ProfileRatio>,
}

impl RatioReport {
    /// Probability-weighted sum of the breakdown.
    pub fn breakdown_mean(&self) -> Rational {
        self.breakdown.iter().map(|p| p.probability * p.ratio).sum()
    }

    pub fn to_json(&self) -> Value {
        let mut out = json!({
            "mechanism": self.mechanism,
            "breakdown": self.breakdown.iter().map(|p| json!({
                "profile": p.label,
                "probability": format_rational(&p.probability),
                "welfare": format_rational(&p.welfare),
                "opt": format_rational(&p.opt),
                "ratio": format_rational(&p.ratio),
            })).collect::<Vec<_>>(),
        });
        match &self.expected {
            ExpectedRatio::Exact(r) => {
                out["expected_ratio"] = json!(format_rational(r));
            }
            ExpectedRatio::Estimate { estimate, stderr, trials } => {
                out["expected_ratio"] = json!(estimate);
                out["stderr"] = json!(stderr);
                out["trials"] = json!(trials);
                out["ci95"] = json!([estimate - 1.96 * stderr, estimate + 1.96 * stderr]);
                out["generator"] = json!(GENERATOR);
            }
        }
        if let Some(seed) = self.seed {
            out["seed"] = json!(seed);
        }
        if let Some(k) = self.k {
            out["k"] = json!(k);
        }
        out
    }
}

fn ratio_of(label: &str, probability: Rational, welfare: Rational, optimum: Rational) -> Result<ProfileRatio> {
    if optimum <= Rational::zero() {
        return Err(Error::Experiment(format!("profile {label} has zero optimal welfare")));
    }
    Ok(ProfileRatio {
        label: label.into(),
        probability,
        welfare,
        opt: optimum,
        ratio: welfare / optimum,
    })
}

fn evaluate_with(
    name: &str,
    dist: &ProfileDistribution,
    welfare: impl Fn(&Instance) -> Result<Rational> + Sync,
) -> Result<RatioReport> {
    let breakdown = dist
        .entries
        .par_iter()
        .enumerate()
        .map(|(idx, e)| {
            let inst = dist.instance(idx)?;
            ratio_of(&e.label, e.probability, welfare(&inst)?, opt(&inst)?.value)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut report = RatioReport {
        mechanism: name.into(),
        seed: None,
        k: Some(dist.k),
        expected: ExpectedRatio::Exact(Rational::zero()),
        breakdown,
    };
    report.expected = ExpectedRatio::Exact(report.breakdown_mean());
    Ok(report)
}

/// Exact expected ratio of a randomized mechanism, profile by profile.
pub fn eval_on_distribution(mech: &dyn RandomizedMechanism, dist: &ProfileDistribution) -> Result<RatioReport> {
    evaluate_with(mech.name(), dist, |inst| exact_expected_welfare(mech, inst))
}

/// Exact ratio of one deterministic protocol. The protocol must accept every
/// profile of the distribution.
pub fn eval_protocol_on_distribution(
    name: &str,
    protocol: &dyn Protocol,
    strategy: &dyn Strategy,
    dist: &ProfileDistribution,
) -> Result<RatioReport> {
    evaluate_with(name, dist, |inst| {
        Ok(run(protocol, strategy, inst.valuations())?.welfare(inst.valuations()))
    })
}

/// One report per support element, with protocols built over the domain of
/// the distribution.
pub fn eval_support_on_distribution(
    mech: &dyn RandomizedMechanism,
    dist: &ProfileDistribution,
) -> Result<Vec<(Rational, RatioReport)>> {
    let support = mech.support(&dist.domain()?)?;
    support
        .iter()
        .map(|e| {
            let name = format!("{}[{}]", mech.name(), e.label);
            Ok((e.probability, eval_protocol_on_distribution(&name, e.protocol.as_ref(), mech.strategy(), dist)?))
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct YaoBound {
    /// Minimum over profiles of the weight-averaged per-profile ratio.
    pub min_profile_ratio: Rational,
    pub argmin: String,
    /// Weight-average of the reports' expected ratios.
    pub mixture_expected_ratio: Rational,
}

pub fn yao_aggregate(reports: &[RatioReport], weights: &[Rational]) -> Result<YaoBound> {
    if reports.is_empty() || reports.len() != weights.len() {
        return Err(Error::Experiment("need one weight per report".into()));
    }
    if weights.iter().any(|w| *w < Rational::zero()) || weights.iter().sum::<Rational>() != int(1) {
        return Err(Error::Experiment("weights must be a distribution".into()));
    }
    let first = &reports[0].breakdown;
    for r in reports {
        let same = r.breakdown.len() == first.len()
            && r.breakdown.iter().zip(first).all(|(a, b)| a.label == b.label && a.probability == b.probability);
        if !same {
            return Err(Error::Experiment("reports cover different distributions".into()));
        }
    }
    let mut expected = Rational::zero();
    for (r, w) in reports.iter().zip(weights) {
        let e = r
            .expected
            .exact()
            .ok_or_else(|| Error::Experiment("sampled reports cannot be aggregated exactly".into()))?;
        expected += w * e;
    }
    let (argmin, min) = (0..first.len())
        .map(|p| {
            let mixed: Rational = reports.iter().zip(weights).map(|(r, w)| w * r.breakdown[p].ratio).sum();
            (p, mixed)
        })
        .fold(None, |best: Option<(usize, Rational)>, (p, x)| match best {
            Some((_, b)) if b <= x => best,
            _ => Some((p, x)),
        })
        .expect("non-empty");
    if min > expected {
        return Err(Error::Experiment("minimum exceeds the average".into()));
    }
    Ok(YaoBound {
        min_profile_ratio: min,
        argmin: first[argmin].label.clone(),
        mixture_expected_ratio: expected,
    })
}

/// Monte Carlo welfare ratio over seeded runs; trial `t` uses stream `t`.
pub fn mc_ratio(mech: &dyn RandomizedMechanism, instance: &Instance, trials: u64, seed: u64) -> Result<RatioReport> {
    if trials == 0 {
        return Err(Error::Experiment("need at least one trial".into()));
    }
    let optimum = opt(instance)?.value;
    if optimum <= Rational::zero() {
        return Err(Error::Experiment("instance has zero optimal welfare".into()));
    }
    let welfare = (0..trials)
        .into_par_iter()
        .map(|t| Ok(sample_run_stream(mech, instance, seed, t)?.welfare(instance.valuations())))
        .collect::<Result<Vec<Rational>>>()?;
    let total: Rational = welfare.iter().copied().fold(Rational::zero(), |a, b| a + b);
    let mean = total / int(trials as i128);
    let ratios: Vec<f64> = welfare
        .iter()
        .map(|w| (w / optimum).to_f64().unwrap_or(f64::NAN))
        .collect();
    let estimate = (mean / optimum).to_f64().unwrap_or(f64::NAN);
    let stderr = if trials > 1 {
        let ss: f64 = ratios.iter().map(|r| (r - estimate).powi(2)).sum();
        (ss / (trials - 1) as f64).sqrt() / (trials as f64).sqrt()
    } else {
        0.0
    };
    Ok(RatioReport {
        mechanism: mech.name().into(),
        seed: Some(seed),
        k: None,
        expected: ExpectedRatio::Estimate { estimate, stderr, trials },
        breakdown: vec![ratio_of("instance", int(1), mean, optimum)?],
    })
}

/// Exact ratio on one instance.
pub fn exact_ratio(mech: &dyn RandomizedMechanism, instance: &Instance) -> Result<RatioReport> {
    let optimum = opt(instance)?.value;
    let p = ratio_of("instance", int(1), exact_expected_welfare(mech, instance)?, optimum)?;
    Ok(RatioReport {
        mechanism: mech.name().into(),
        seed: None,
        k: None,
        expected: ExpectedRatio::Exact(p.ratio),
        breakdown: vec![p],
    })
}
