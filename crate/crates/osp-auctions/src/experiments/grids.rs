//! Valuation grids and worst-case search over them.

use std::fmt;
use std::str::FromStr;

use num_traits::Zero;
use rayon::prelude::*;

use crate::caps::Caps;
use crate::error::{Error, Result};
use crate::mechanisms::{exact_expected_welfare, mechanism_by_name};
use crate::rational::{int, Rational};
use crate::rng::SeedStream;
use crate::valuations::{make_single_minded, CombinatorialValuation, Instance, MultiUnitValuation, Setting, Valuation};
use crate::welfare::opt;

/// Zero, then every `(x, d)` with `x` in `1..=max`, `d` in `1..=m`.
pub fn single_minded_grid(m: u32, max: u32) -> Result<Vec<Valuation>> {
    let mut out = vec![make_single_minded(int(0), 1, m)?.into()];
    for x in 1..=max {
        for d in 1..=m {
            out.push(make_single_minded(int(x as i128), d, m)?.into());
        }
    }
    Ok(out)
}

/// Monotone sequences in `0..=max` of length `len`, lexicographic.
fn monotone_sequences(len: usize, max: u32, increasing: bool) -> Vec<Vec<u32>> {
    fn go(len: usize, lo: u32, hi: u32, increasing: bool, cur: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        if cur.len() == len {
            out.push(cur.clone());
            return;
        }
        for x in lo..=hi {
            cur.push(x);
            if increasing {
                go(len, x, hi, increasing, cur, out);
            } else {
                go(len, lo, x, increasing, cur, out);
            }
            cur.pop();
        }
    }
    let mut out = Vec::new();
    go(len, 0, max, increasing, &mut Vec::new(), &mut out);
    out
}

/// Decreasing-marginal valuations with marginals in `0..=max`.
pub fn dm_grid(m: u32, max: u32) -> Result<Vec<Valuation>> {
    monotone_sequences(m as usize, max, false)
        .into_iter()
        .map(|ms| {
            let marginals: Vec<Rational> = ms.iter().map(|&x| int(x as i128)).collect();
            Ok(MultiUnitValuation::from_marginals(&marginals)?.into())
        })
        .collect()
}

/// Monotone multi-unit valuations with values in `0..=max`.
pub fn multi_unit_grid(m: u32, max: u32) -> Result<Vec<Valuation>> {
    monotone_sequences(m as usize, max, true)
        .into_iter()
        .map(|vs| Ok(MultiUnitValuation::new(vs.iter().map(|&x| int(x as i128)).collect())?.into()))
        .collect()
}

fn item_vectors(m: usize, max: u32) -> Vec<Vec<Rational>> {
    let base = max as usize + 1;
    let count = base.pow(m as u32);
    (0..count)
        .map(|mut c| {
            (0..m)
                .map(|_| {
                    let x = c % base;
                    c /= base;
                    int(x as i128)
                })
                .collect()
        })
        .collect()
}

pub fn additive_grid(m: usize, max: u32) -> Result<Vec<Valuation>> {
    item_vectors(m, max)
        .into_iter()
        .map(|v| Ok(CombinatorialValuation::additive(v)?.into()))
        .collect()
}

pub fn unit_demand_grid(m: usize, max: u32) -> Result<Vec<Valuation>> {
    item_vectors(m, max)
        .into_iter()
        .map(|v| Ok(CombinatorialValuation::unit_demand(v)?.into()))
        .collect()
}

/// Monotone tables with entries in `0..=max`, optionally subadditive.
fn explicit_tables(m: usize, max: u32, subadditive: bool) -> Vec<Vec<u32>> {
    fn go(mask: usize, m: usize, max: u32, sub: bool, table: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        if mask == 1 << m {
            out.push(table.clone());
            return;
        }
        let lo = (0..m)
            .filter(|j| mask >> j & 1 == 1)
            .map(|j| table[mask & !(1 << j)])
            .max()
            .unwrap_or(0);
        let mut hi = max;
        if sub {
            // Proper non-empty subsets `s` with their complements in `mask`.
            let mut s = (mask - 1) & mask;
            while s > 0 {
                hi = hi.min(table[s] + table[mask & !s]);
                s = (s - 1) & mask;
            }
        }
        for x in lo..=hi {
            table.push(x);
            go(mask + 1, m, max, sub, table, out);
            table.pop();
        }
    }
    let mut out = Vec::new();
    go(1, m, max, subadditive, &mut vec![0], &mut out);
    out
}

fn explicit_grid(m: usize, max: u32, subadditive: bool) -> Result<Vec<Valuation>> {
    explicit_tables(m, max, subadditive)
        .into_iter()
        .map(|t| Ok(CombinatorialValuation::explicit(m, t.iter().map(|&x| int(x as i128)).collect())?.into()))
        .collect()
}

pub fn explicit_monotone_grid(m: usize, max: u32) -> Result<Vec<Valuation>> {
    explicit_grid(m, max, false)
}

pub fn explicit_subadditive_grid(m: usize, max: u32) -> Result<Vec<Valuation>> {
    explicit_grid(m, max, true)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GridClass {
    SingleMinded,
    DecreasingMarginals,
    MultiUnit,
    Additive,
    UnitDemand,
    Monotone,
    Subadditive,
}

impl GridClass {
    const NAMES: [(&'static str, GridClass); 7] = [
        ("single-minded", GridClass::SingleMinded),
        ("dm", GridClass::DecreasingMarginals),
        ("multi-unit", GridClass::MultiUnit),
        ("additive", GridClass::Additive),
        ("unit-demand", GridClass::UnitDemand),
        ("monotone", GridClass::Monotone),
        ("subadditive", GridClass::Subadditive),
    ];

    pub fn name(self) -> &'static str {
        Self::NAMES.iter().find(|(_, c)| *c == self).expect("listed").0
    }

    pub fn is_multi_unit(self) -> bool {
        matches!(
            self,
            GridClass::SingleMinded | GridClass::DecreasingMarginals | GridClass::MultiUnit
        )
    }
}

/// `class:NxM:max`, e.g. `additive:2x2:4`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct GridSpec {
    pub class: GridClass,
    pub n: usize,
    pub m: usize,
    pub max: u32,
}

impl FromStr for GridSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Parse(format!("grid {s:?} is not of the form class:NxM:max"));
        let mut parts = s.split(':');
        let (Some(class), Some(shape), Some(max), None) = (parts.next(), parts.next(), parts.next(), parts.next())
        else {
            return Err(bad());
        };
        let class = GridClass::NAMES
            .iter()
            .find(|(name, _)| *name == class)
            .map(|(_, c)| *c)
            .ok_or_else(|| Error::Parse(format!("unknown grid class {class:?}")))?;
        let (n, m) = shape.split_once('x').ok_or_else(bad)?;
        let spec = GridSpec {
            class,
            n: n.parse().map_err(|_| bad())?,
            m: m.parse().map_err(|_| bad())?,
            max: max.parse().map_err(|_| bad())?,
        };
        if spec.n == 0 || spec.m == 0 {
            return Err(bad());
        }
        Ok(spec)
    }
}

impl fmt::Display for GridSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}x{}:{}", self.class.name(), self.n, self.m, self.max)
    }
}

impl GridSpec {
    pub fn setting(&self) -> Result<Setting> {
        if self.class.is_multi_unit() {
            Setting::multi_unit(self.m as u32)
        } else {
            Setting::lettered(self.m)
        }
    }
}

/// Valuations of one bidder on the grid.
pub fn grid_valuations(spec: &GridSpec) -> Result<Vec<Valuation>> {
    let (m, max) = (spec.m, spec.max);
    let cap = Caps::global().max_profiles as u128;
    let vectors = (max as u128 + 1).checked_pow(m as u32).unwrap_or(u128::MAX);
    match spec.class {
        GridClass::Additive | GridClass::UnitDemand if vectors > cap => {
            return Err(Error::cap("grid valuations", vectors, cap));
        }
        GridClass::Monotone | GridClass::Subadditive if m > 3 => {
            return Err(Error::Experiment("explicit grids are limited to 3 items".into()));
        }
        _ => {}
    }
    match spec.class {
        GridClass::SingleMinded => single_minded_grid(m as u32, max),
        GridClass::DecreasingMarginals => dm_grid(m as u32, max),
        GridClass::MultiUnit => multi_unit_grid(m as u32, max),
        GridClass::Additive => additive_grid(m, max),
        GridClass::UnitDemand => unit_demand_grid(m, max),
        GridClass::Monotone => explicit_monotone_grid(m, max),
        GridClass::Subadditive => explicit_subadditive_grid(m, max),
    }
}

#[derive(Clone, Debug)]
pub struct SearchReport {
    pub mechanism: String,
    pub grid: GridSpec,
    pub exhaustive: bool,
    /// Profiles evaluated, including those skipped for zero optimum.
    pub evaluated: u64,
    pub worst: Option<(Instance, Rational)>,
}

/// Minimizes the exact ratio over grid profiles: every profile when there are
/// at most `budget`, otherwise `budget` profiles drawn from `seed`.
pub fn worst_case_search(mechanism: &str, grid: &GridSpec, budget: u64, seed: u64) -> Result<SearchReport> {
    let setting = grid.setting()?;
    let mech = mechanism_by_name(mechanism, grid.n, &setting)?;
    let values = grid_valuations(grid)?;
    let size = (values.len() as u128).checked_pow(grid.n as u32).unwrap_or(u128::MAX);
    let exhaustive = size <= budget as u128;
    let profiles: Vec<Vec<usize>> = if exhaustive {
        (0..size as usize)
            .map(|mut c| {
                (0..grid.n)
                    .map(|_| {
                        let x = c % values.len();
                        c /= values.len();
                        x
                    })
                    .collect()
            })
            .collect()
    } else {
        let mut rng = SeedStream::new(seed, 0);
        (0..budget)
            .map(|_| (0..grid.n).map(|_| rng.below(values.len() as u64) as usize).collect())
            .collect()
    };
    let scored = profiles
        .par_iter()
        .enumerate()
        .map(|(idx, p)| {
            let inst = Instance::new(setting.clone(), p.iter().map(|&x| values[x].clone()).collect())?;
            let optimum = opt(&inst)?.value;
            if optimum.is_zero() {
                return Ok(None);
            }
            let ratio = exact_expected_welfare(mech.as_ref(), &inst)? / optimum;
            Ok(Some((idx, ratio)))
        })
        .collect::<Result<Vec<_>>>()?;
    let worst = scored
        .into_iter()
        .flatten()
        .fold(None, |best: Option<(usize, Rational)>, (idx, r)| match best {
            Some((_, b)) if b <= r => best,
            _ => Some((idx, r)),
        });
    let worst = match worst {
        Some((idx, r)) => {
            let inst = Instance::new(setting.clone(), profiles[idx].iter().map(|&x| values[x].clone()).collect())?;
            Some((inst, r))
        }
        None => None,
    };
    Ok(SearchReport {
        mechanism: mechanism.into(),
        grid: *grid,
        exhaustive,
        evaluated: profiles.len() as u64,
        worst,
    })
}
