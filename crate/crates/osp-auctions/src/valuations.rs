//! Bidder valuations, bundles, settings and instances.
//!
//! Two settings are supported: `m` identical units ([`Setting::MultiUnit`])
//! and a set of named heterogeneous items ([`Setting::Combinatorial`]).
//! Valuations are immutable after construction and every public constructor
//! enforces monotonicity and non-negativity.

use std::fmt;
use std::sync::Arc;

use num_traits::Zero;

use crate::error::{Error, Result};
use crate::rational::{format_rational, is_nonneg, Rational};

/// Largest item universe for additive and unit-demand valuations.
pub const MAX_ITEMS: usize = 63;
/// Largest item universe for explicit bundle tables.
pub const MAX_EXPLICIT_ITEMS: usize = 12;

/// A set of items encoded as a bitmask; bit `j` is item `j`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ItemSet(pub u64);

impl ItemSet {
    pub const EMPTY: ItemSet = ItemSet(0);

    pub fn full(m: usize) -> ItemSet {
        if m >= 64 {
            ItemSet(u64::MAX)
        } else {
            ItemSet((1u64 << m) - 1)
        }
    }

    pub fn single(j: usize) -> ItemSet {
        ItemSet(1u64 << j)
    }

    pub fn from_items(items: impl IntoIterator<Item = usize>) -> ItemSet {
        ItemSet(items.into_iter().fold(0, |acc, j| acc | (1u64 << j)))
    }

    pub fn contains(self, j: usize) -> bool {
        j < 64 && self.0 >> j & 1 == 1
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn is_subset(self, other: ItemSet) -> bool {
        self.0 & !other.0 == 0
    }

    pub fn union(self, other: ItemSet) -> ItemSet {
        ItemSet(self.0 | other.0)
    }

    pub fn minus(self, other: ItemSet) -> ItemSet {
        ItemSet(self.0 & !other.0)
    }

    pub fn with(self, j: usize) -> ItemSet {
        ItemSet(self.0 | (1u64 << j))
    }

    pub fn without(self, j: usize) -> ItemSet {
        ItemSet(self.0 & !(1u64 << j))
    }

    pub fn iter(self) -> impl Iterator<Item = usize> {
        let mut bits = self.0;
        std::iter::from_fn(move || {
            if bits == 0 {
                None
            } else {
                let j = bits.trailing_zeros() as usize;
                bits &= bits - 1;
                Some(j)
            }
        })
    }
}

/// What a bidder receives: a number of units or a set of items.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Bundle {
    Units(u32),
    Items(ItemSet),
}

impl Bundle {
    pub fn is_empty(&self) -> bool {
        match self {
            Bundle::Units(q) => *q == 0,
            Bundle::Items(s) => s.is_empty(),
        }
    }

    /// Whether `self` is contained in `other`.
    pub fn is_within(&self, other: &Bundle) -> bool {
        match (self, other) {
            (Bundle::Units(a), Bundle::Units(b)) => a <= b,
            (Bundle::Items(a), Bundle::Items(b)) => a.is_subset(*b),
            _ => false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Setting {
    MultiUnit { m: u32 },
    Combinatorial { items: Vec<String> },
}

impl Setting {
    pub fn multi_unit(m: u32) -> Result<Setting> {
        if m == 0 {
            return Err(Error::InvalidInstance("multi-unit setting needs m >= 1".into()));
        }
        Ok(Setting::MultiUnit { m })
    }

    pub fn items<S: Into<String>>(names: impl IntoIterator<Item = S>) -> Result<Setting> {
        let items: Vec<String> = names.into_iter().map(Into::into).collect();
        if items.is_empty() || items.len() > MAX_ITEMS {
            return Err(Error::InvalidInstance(format!(
                "item universe must have 1..={MAX_ITEMS} items, got {}",
                items.len()
            )));
        }
        for (i, a) in items.iter().enumerate() {
            if a.is_empty() || a.contains(',') {
                return Err(Error::InvalidInstance(format!("bad item name {a:?}")));
            }
            if items[..i].contains(a) {
                return Err(Error::InvalidInstance(format!("duplicate item {a:?}")));
            }
        }
        Ok(Setting::Combinatorial { items })
    }

    /// Items named `a`, `b`, ... (then `i26`, `i27`, ...).
    pub fn lettered(m: usize) -> Result<Setting> {
        Setting::items((0..m).map(|j| {
            if j < 26 {
                ((b'a' + j as u8) as char).to_string()
            } else {
                format!("i{j}")
            }
        }))
    }

    /// Units for the multi-unit setting, items otherwise.
    pub fn size(&self) -> usize {
        match self {
            Setting::MultiUnit { m } => *m as usize,
            Setting::Combinatorial { items } => items.len(),
        }
    }

    pub fn empty_bundle(&self) -> Bundle {
        match self {
            Setting::MultiUnit { .. } => Bundle::Units(0),
            Setting::Combinatorial { .. } => Bundle::Items(ItemSet::EMPTY),
        }
    }

    pub fn full_bundle(&self) -> Bundle {
        match self {
            Setting::MultiUnit { m } => Bundle::Units(*m),
            Setting::Combinatorial { items } => Bundle::Items(ItemSet::full(items.len())),
        }
    }

    pub fn contains(&self, b: &Bundle) -> bool {
        match (self, b) {
            (Setting::MultiUnit { m }, Bundle::Units(q)) => q <= m,
            (Setting::Combinatorial { items }, Bundle::Items(s)) => {
                s.is_subset(ItemSet::full(items.len()))
            }
            _ => false,
        }
    }

    /// Whether the bundles can be handed out simultaneously.
    pub fn is_feasible(&self, bundles: &[Bundle]) -> bool {
        match self {
            Setting::MultiUnit { m } => {
                let mut total: u64 = 0;
                for b in bundles {
                    match b {
                        Bundle::Units(q) => total += *q as u64,
                        Bundle::Items(_) => return false,
                    }
                }
                total <= *m as u64
            }
            Setting::Combinatorial { items } => {
                let universe = ItemSet::full(items.len());
                let mut used = ItemSet::EMPTY;
                for b in bundles {
                    match b {
                        Bundle::Items(s) if s.is_subset(universe) && (s.0 & used.0) == 0 => {
                            used = used.union(*s)
                        }
                        _ => return false,
                    }
                }
                true
            }
        }
    }

    pub fn bundle_label(&self, b: &Bundle) -> String {
        match (self, b) {
            (Setting::Combinatorial { items }, Bundle::Items(s)) => {
                let names: Vec<&str> = s
                    .iter()
                    .map(|j| items.get(j).map(String::as_str).unwrap_or("?"))
                    .collect();
                format!("{{{}}}", names.join(","))
            }
            (_, Bundle::Units(q)) => q.to_string(),
            (_, Bundle::Items(s)) => format!("{:#b}", s.0),
        }
    }

    pub fn item_index(&self, name: &str) -> Option<usize> {
        match self {
            Setting::Combinatorial { items } => items.iter().position(|x| x == name),
            Setting::MultiUnit { .. } => None,
        }
    }
}

/// Multi-unit valuation: `values[q-1] = v(q)` for `q = 1..=m`, `v(0) = 0`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct MultiUnitValuation {
    values: Vec<Rational>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SingleMindedParams {
    pub x: Rational,
    pub d: u32,
}

impl MultiUnitValuation {
    pub fn new(values: Vec<Rational>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidValuation("multi-unit valuation needs m >= 1".into()));
        }
        let mut prev = Rational::zero();
        for (q, v) in values.iter().enumerate() {
            if !is_nonneg(v) {
                return Err(Error::InvalidValuation(format!("v({}) is negative", q + 1)));
            }
            if *v < prev {
                return Err(Error::InvalidValuation(format!(
                    "not monotone: v({}) < v({})",
                    q + 1,
                    q
                )));
            }
            prev = *v;
        }
        Ok(MultiUnitValuation { values })
    }

    /// Builds a valuation from its marginals `v(q) - v(q-1)`.
    pub fn from_marginals(marginals: &[Rational]) -> Result<Self> {
        let mut acc = Rational::zero();
        let values = marginals
            .iter()
            .map(|d| {
                acc += d;
                acc
            })
            .collect();
        MultiUnitValuation::new(values)
    }

    pub fn m(&self) -> u32 {
        self.values.len() as u32
    }

    pub fn values(&self) -> &[Rational] {
        &self.values
    }

    /// `v(q)`, with quantities above `m` valued as `v(m)`.
    pub fn value(&self, q: u32) -> Rational {
        if q == 0 {
            Rational::zero()
        } else {
            let idx = (q as usize).min(self.values.len()) - 1;
            self.values[idx]
        }
    }

    pub fn marginals(&self) -> Vec<Rational> {
        let mut prev = Rational::zero();
        self.values
            .iter()
            .map(|v| {
                let d = v - prev;
                prev = *v;
                d
            })
            .collect()
    }

    /// `(x, d)` when the valuation is single-minded with `x > 0`.
    pub fn single_minded_params(&self) -> Option<SingleMindedParams> {
        let x = *self.values.last()?;
        if x.is_zero() {
            return None;
        }
        let d = self.values.iter().position(|v| !v.is_zero())?;
        if self.values[d..].iter().all(|v| *v == x) {
            Some(SingleMindedParams { x, d: d as u32 + 1 })
        } else {
            None
        }
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(Zero::is_zero)
    }
}

pub fn make_single_minded(x: Rational, d: u32, m: u32) -> Result<MultiUnitValuation> {
    if !is_nonneg(&x) {
        return Err(Error::InvalidValuation("single-minded value x is negative".into()));
    }
    if d == 0 || d > m {
        return Err(Error::InvalidValuation(format!("demand d={d} outside 1..={m}")));
    }
    let values = (1..=m)
        .map(|q| if q >= d { x } else { Rational::zero() })
        .collect();
    MultiUnitValuation::new(values)
}

/// Marginals `v(q) - v(q-1)` are non-increasing over `q = 1..=m`.
pub fn check_decreasing_marginals(v: &MultiUnitValuation) -> bool {
    v.marginals().windows(2).all(|w| w[0] >= w[1])
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct ExplicitValuation {
    m: usize,
    table: Vec<Rational>,
}

impl ExplicitValuation {
    /// `table[mask]` is the value of the bundle with bitmask `mask`.
    pub fn new(m: usize, table: Vec<Rational>) -> Result<Self> {
        if m == 0 || m > MAX_EXPLICIT_ITEMS {
            return Err(Error::InvalidValuation(format!(
                "explicit tables need 1..={MAX_EXPLICIT_ITEMS} items, got {m}"
            )));
        }
        if table.len() != 1 << m {
            return Err(Error::InvalidValuation(format!(
                "explicit table over {m} items needs {} entries, got {}",
                1usize << m,
                table.len()
            )));
        }
        if !table[0].is_zero() {
            return Err(Error::InvalidValuation("v(empty set) must be 0".into()));
        }
        for (mask, v) in table.iter().enumerate() {
            if !is_nonneg(v) {
                return Err(Error::InvalidValuation(format!("negative value at {mask:#b}")));
            }
            for j in 0..m {
                if mask >> j & 1 == 1 && table[mask & !(1 << j)] > *v {
                    return Err(Error::InvalidValuation(format!(
                        "not monotone: removing item {j} from {mask:#b} raises the value"
                    )));
                }
            }
        }
        Ok(ExplicitValuation { m, table })
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn table(&self) -> &[Rational] {
        &self.table
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum CombinatorialValuation {
    Additive(Vec<Rational>),
    UnitDemand(Vec<Rational>),
    Explicit(ExplicitValuation),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ValuationClass {
    Monotone,
    Subadditive,
    Additive,
    UnitDemand,
}

fn check_item_values(values: &[Rational]) -> Result<()> {
    if values.is_empty() || values.len() > MAX_ITEMS {
        return Err(Error::InvalidValuation(format!(
            "per-item valuations need 1..={MAX_ITEMS} items, got {}",
            values.len()
        )));
    }
    if let Some(j) = values.iter().position(|v| !is_nonneg(v)) {
        return Err(Error::InvalidValuation(format!("item {j} has a negative value")));
    }
    Ok(())
}

impl CombinatorialValuation {
    pub fn additive(values: Vec<Rational>) -> Result<Self> {
        check_item_values(&values)?;
        Ok(CombinatorialValuation::Additive(values))
    }

    pub fn unit_demand(values: Vec<Rational>) -> Result<Self> {
        check_item_values(&values)?;
        Ok(CombinatorialValuation::UnitDemand(values))
    }

    pub fn explicit(m: usize, table: Vec<Rational>) -> Result<Self> {
        Ok(CombinatorialValuation::Explicit(ExplicitValuation::new(m, table)?))
    }

    pub fn item_count(&self) -> usize {
        match self {
            CombinatorialValuation::Additive(v) | CombinatorialValuation::UnitDemand(v) => v.len(),
            CombinatorialValuation::Explicit(e) => e.m,
        }
    }

    /// Value of a bundle inside the item universe.
    pub fn value(&self, s: ItemSet) -> Rational {
        match self {
            CombinatorialValuation::Additive(v) => s.iter().map(|j| v[j]).sum(),
            CombinatorialValuation::UnitDemand(v) => s
                .iter()
                .map(|j| v[j])
                .max()
                .unwrap_or_else(Rational::zero),
            CombinatorialValuation::Explicit(e) => e.table[s.0 as usize],
        }
    }

    /// Single-item values `v({j})`.
    pub fn item_values(&self) -> Vec<Rational> {
        (0..self.item_count())
            .map(|j| self.value(ItemSet::single(j)))
            .collect()
    }

    pub fn to_explicit(&self) -> Result<ExplicitValuation> {
        let m = self.item_count();
        if m > MAX_EXPLICIT_ITEMS {
            return Err(Error::cap("explicit table items", m as u128, MAX_EXPLICIT_ITEMS as u128));
        }
        let table = (0..1u64 << m).map(|mask| self.value(ItemSet(mask))).collect();
        ExplicitValuation::new(m, table)
    }
}

/// Exhaustive class-membership check over all bundles (or bundle pairs).
pub fn check_class(v: &CombinatorialValuation, class: ValuationClass) -> bool {
    let m = v.item_count();
    if m > MAX_EXPLICIT_ITEMS {
        // Only the structured variants exist at this size.
        return match (v, class) {
            (_, ValuationClass::Monotone | ValuationClass::Subadditive) => true,
            (CombinatorialValuation::Additive(_), ValuationClass::Additive) => true,
            (CombinatorialValuation::UnitDemand(_), ValuationClass::UnitDemand) => true,
            (CombinatorialValuation::Additive(x), ValuationClass::UnitDemand)
            | (CombinatorialValuation::UnitDemand(x), ValuationClass::Additive) => {
                x.iter().filter(|y| !y.is_zero()).count() <= 1
            }
            (CombinatorialValuation::Explicit(_), _) => false,
        };
    }
    let n_sets = 1u64 << m;
    let val = |mask: u64| v.value(ItemSet(mask));
    match class {
        ValuationClass::Monotone => {
            val(0).is_zero()
                && (0..n_sets).all(|a| (0..m).all(|j| val(a) <= val(a | (1 << j))))
        }
        ValuationClass::Subadditive => {
            (0..n_sets).all(|a| (0..n_sets).all(|b| val(a | b) <= val(a) + val(b)))
        }
        ValuationClass::Additive => (0..n_sets).all(|a| {
            let sum: Rational = ItemSet(a).iter().map(|j| val(1 << j)).sum();
            val(a) == sum
        }),
        ValuationClass::UnitDemand => (0..n_sets).all(|a| {
            let max = ItemSet(a)
                .iter()
                .map(|j| val(1 << j))
                .max()
                .unwrap_or_else(Rational::zero);
            val(a) == max
        }),
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Valuation {
    MultiUnit(MultiUnitValuation),
    Combinatorial(CombinatorialValuation),
}

impl From<MultiUnitValuation> for Valuation {
    fn from(v: MultiUnitValuation) -> Self {
        Valuation::MultiUnit(v)
    }
}

impl From<CombinatorialValuation> for Valuation {
    fn from(v: CombinatorialValuation) -> Self {
        Valuation::Combinatorial(v)
    }
}

impl Valuation {
    /// Unchecked evaluation; a bundle of the wrong kind is worth zero.
    pub fn value(&self, b: &Bundle) -> Rational {
        match (self, b) {
            (Valuation::MultiUnit(v), Bundle::Units(q)) => v.value(*q),
            (Valuation::Combinatorial(v), Bundle::Items(s)) => v.value(*s),
            _ => Rational::zero(),
        }
    }

    pub fn fits(&self, setting: &Setting) -> bool {
        match (self, setting) {
            (Valuation::MultiUnit(v), Setting::MultiUnit { m }) => v.m() == *m,
            (Valuation::Combinatorial(v), Setting::Combinatorial { items }) => {
                v.item_count() == items.len()
            }
            _ => false,
        }
    }

    pub fn as_multi_unit(&self) -> Option<&MultiUnitValuation> {
        match self {
            Valuation::MultiUnit(v) => Some(v),
            Valuation::Combinatorial(_) => None,
        }
    }

    pub fn as_combinatorial(&self) -> Option<&CombinatorialValuation> {
        match self {
            Valuation::Combinatorial(v) => Some(v),
            Valuation::MultiUnit(_) => None,
        }
    }

    /// Every rational appearing in the valuation's description.
    pub fn numbers(&self) -> Vec<Rational> {
        match self {
            Valuation::MultiUnit(v) => v.values.clone(),
            Valuation::Combinatorial(CombinatorialValuation::Additive(x))
            | Valuation::Combinatorial(CombinatorialValuation::UnitDemand(x)) => x.clone(),
            Valuation::Combinatorial(CombinatorialValuation::Explicit(e)) => e.table.clone(),
        }
    }
}

impl fmt::Display for Valuation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let list = |xs: &[Rational]| {
            xs.iter()
                .map(format_rational)
                .collect::<Vec<_>>()
                .join(", ")
        };
        match self {
            Valuation::MultiUnit(v) => match v.single_minded_params() {
                Some(p) => write!(f, "single_minded(x={}, d={})", format_rational(&p.x), p.d),
                None => write!(f, "multi_unit({})", list(&v.values)),
            },
            Valuation::Combinatorial(CombinatorialValuation::Additive(x)) => {
                write!(f, "additive({})", list(x))
            }
            Valuation::Combinatorial(CombinatorialValuation::UnitDemand(x)) => {
                write!(f, "unit_demand({})", list(x))
            }
            Valuation::Combinatorial(CombinatorialValuation::Explicit(e)) => {
                write!(f, "explicit({})", list(&e.table))
            }
        }
    }
}

/// Checked evaluation.
pub fn eval(v: &Valuation, b: &Bundle) -> Result<Rational> {
    match (v, b) {
        (Valuation::MultiUnit(mu), Bundle::Units(q)) => {
            if *q > mu.m() {
                return Err(Error::Bundle(format!("{q} units requested, only {}", mu.m())));
            }
            Ok(mu.value(*q))
        }
        (Valuation::Combinatorial(c), Bundle::Items(s)) => {
            if !s.is_subset(ItemSet::full(c.item_count())) {
                return Err(Error::Bundle(format!(
                    "items {:#b} outside a universe of {}",
                    s.0,
                    c.item_count()
                )));
            }
            Ok(c.value(*s))
        }
        _ => Err(Error::Bundle("bundle kind does not match the valuation".into())),
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Instance {
    setting: Setting,
    valuations: Vec<Valuation>,
}

impl Instance {
    pub fn new(setting: Setting, valuations: Vec<Valuation>) -> Result<Self> {
        if valuations.is_empty() {
            return Err(Error::InvalidInstance("an instance needs at least one bidder".into()));
        }
        if let Some(i) = valuations.iter().position(|v| !v.fits(&setting)) {
            return Err(Error::InvalidInstance(format!(
                "bidder {i} does not fit the setting's item universe"
            )));
        }
        Ok(Instance { setting, valuations })
    }

    pub fn multi_unit(m: u32, valuations: Vec<MultiUnitValuation>) -> Result<Self> {
        Instance::new(
            Setting::multi_unit(m)?,
            valuations.into_iter().map(Valuation::MultiUnit).collect(),
        )
    }

    /// Combinatorial instance over items `a`, `b`, ...
    pub fn lettered(valuations: Vec<CombinatorialValuation>) -> Result<Self> {
        let m = valuations.first().map(|v| v.item_count()).unwrap_or(0);
        Instance::new(
            Setting::lettered(m)?,
            valuations.into_iter().map(Valuation::Combinatorial).collect(),
        )
    }

    pub fn n(&self) -> usize {
        self.valuations.len()
    }

    pub fn setting(&self) -> &Setting {
        &self.setting
    }

    pub fn valuations(&self) -> &[Valuation] {
        &self.valuations
    }

    pub fn valuation(&self, i: usize) -> &Valuation {
        &self.valuations[i]
    }
}

/// Per-bidder finite sets of valuations.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Domain {
    setting: Setting,
    sets: Vec<Arc<[Valuation]>>,
}

impl Domain {
    pub fn new(setting: Setting, sets: Vec<Vec<Valuation>>) -> Result<Self> {
        if sets.is_empty() {
            return Err(Error::InvalidInstance("a domain needs at least one bidder".into()));
        }
        for (i, set) in sets.iter().enumerate() {
            if set.is_empty() {
                return Err(Error::InvalidInstance(format!("bidder {i} has an empty domain")));
            }
            if set.iter().any(|v| !v.fits(&setting)) {
                return Err(Error::InvalidInstance(format!(
                    "bidder {i} has a valuation outside the setting"
                )));
            }
            for (k, v) in set.iter().enumerate() {
                if set[..k].contains(v) {
                    return Err(Error::InvalidInstance(format!(
                        "bidder {i} lists valuation {v} twice"
                    )));
                }
            }
        }
        Ok(Domain {
            setting,
            sets: sets.into_iter().map(Arc::from).collect(),
        })
    }

    /// The same set for each of `n` bidders.
    pub fn uniform(setting: Setting, n: usize, set: Vec<Valuation>) -> Result<Self> {
        Domain::new(setting, vec![set; n])
    }

    /// One valuation per bidder: the instance's profile.
    pub fn singleton(instance: &Instance) -> Domain {
        Domain {
            setting: instance.setting.clone(),
            sets: instance
                .valuations
                .iter()
                .map(|v| Arc::from(vec![v.clone()]))
                .collect(),
        }
    }

    pub fn n(&self) -> usize {
        self.sets.len()
    }

    pub fn setting(&self) -> &Setting {
        &self.setting
    }

    pub fn set(&self, i: usize) -> &Arc<[Valuation]> {
        &self.sets[i]
    }

    pub fn sets(&self) -> &[Arc<[Valuation]>] {
        &self.sets
    }

    pub fn all_valuations(&self) -> impl Iterator<Item = &Valuation> {
        self.sets.iter().flat_map(|s| s.iter())
    }

    pub fn product_size(&self) -> u128 {
        self.sets
            .iter()
            .fold(1u128, |acc, s| acc.saturating_mul(s.len() as u128))
    }

    /// Mixed-radix decoding with bidder 0 most significant.
    pub fn profile(&self, mut index: usize) -> Vec<usize> {
        let mut out = vec![0; self.sets.len()];
        for i in (0..self.sets.len()).rev() {
            let r = self.sets[i].len();
            out[i] = index % r;
            index /= r;
        }
        out
    }

    pub fn profile_index(&self, profile: &[usize]) -> usize {
        profile
            .iter()
            .zip(&self.sets)
            .fold(0, |acc, (k, s)| acc * s.len() + k)
    }

    pub fn valuations_of(&self, profile: &[usize]) -> Vec<Valuation> {
        profile
            .iter()
            .enumerate()
            .map(|(i, &k)| self.sets[i][k].clone())
            .collect()
    }

    pub fn instance(&self, profile: &[usize]) -> Result<Instance> {
        Instance::new(self.setting.clone(), self.valuations_of(profile))
    }
}
