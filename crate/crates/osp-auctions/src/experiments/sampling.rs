use num_traits::ToPrimitive;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::rational::{int, Rational};
use crate::rng::SeedStream;
use crate::valuations::{CombinatorialValuation, Instance};
use crate::welfare::{is_critical, opt, opt_restricted};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SamplingMethod {
    /// All `2^n` partitions.
    Exact,
    MonteCarlo { trials: u64, seed: u64 },
}

#[derive(Clone, Debug, PartialEq)]
pub struct SamplingReport {
    pub n: usize,
    pub threshold: Rational,
    pub method: SamplingMethod,
    /// Partitions with `OPT(S) >= OPT/5` and `OPT(U) >= OPT/5`.
    pub hits: u64,
    pub total: u64,
    pub frequency: Rational,
    pub stderr: f64,
}

const EXACT_LIMIT: usize = 12;

/// Frequency of the event that both halves of a fair-coin partition keep a
/// fifth of the optimum. Refuses instances with a bidder critical at
/// `threshold`.
pub fn sampling_lemma_experiment(
    instance: &Instance,
    threshold: Rational,
    trials: u64,
    seed: u64,
) -> Result<SamplingReport> {
    let n = instance.n();
    for i in 0..n {
        if is_critical(instance, i, threshold)? {
            return Err(Error::Experiment(format!("bidder {i} is critical")));
        }
    }
    let optimum = opt(instance)?.value;
    let full = instance.setting().full_bundle();
    let holds = |in_s: &dyn Fn(usize) -> bool| -> Result<bool> {
        let s: Vec<usize> = (0..n).filter(|&i| in_s(i)).collect();
        let u: Vec<usize> = (0..n).filter(|&i| !in_s(i)).collect();
        let fifth = optimum / int(5);
        Ok(opt_restricted(instance, &s, &full)?.value >= fifth && opt_restricted(instance, &u, &full)?.value >= fifth)
    };
    let (method, outcomes) = if n <= EXACT_LIMIT {
        let outcomes = (0..1u64 << n)
            .into_par_iter()
            .map(|mask| holds(&|i| mask >> i & 1 == 1))
            .collect::<Result<Vec<bool>>>()?;
        (SamplingMethod::Exact, outcomes)
    } else {
        if trials == 0 {
            return Err(Error::Experiment("need at least one trial".into()));
        }
        let outcomes = (0..trials)
            .into_par_iter()
            .map(|t| {
                let mut rng = SeedStream::new(seed, t);
                let coins: Vec<bool> = (0..n).map(|_| rng.coin()).collect();
                holds(&|i| coins[i])
            })
            .collect::<Result<Vec<bool>>>()?;
        (SamplingMethod::MonteCarlo { trials, seed }, outcomes)
    };
    let total = outcomes.len() as u64;
    let hits = outcomes.iter().filter(|&&b| b).count() as u64;
    let frequency = Rational::new(hits as i128, total as i128);
    let stderr = match method {
        SamplingMethod::Exact => 0.0,
        SamplingMethod::MonteCarlo { .. } => {
            let p = frequency.to_f64().unwrap_or(f64::NAN);
            (p * (1.0 - p) / total as f64).sqrt()
        }
    };
    Ok(SamplingReport {
        n,
        threshold,
        method,
        hits,
        total,
        frequency,
        stderr,
    })
}

/// Unit-demand instance with `n` items: `sqrt(n)` high bidders value every
/// item at 2, the others at 1. High bidders come first.
pub fn ud_failure_instance(n: usize) -> Result<Instance> {
    let root = (1..=n).find(|r| r * r >= n).unwrap_or(0);
    if n == 0 || root * root != n {
        return Err(Error::Experiment(format!("{n} is not a positive perfect square")));
    }
    let valuations = (0..n)
        .map(|i| {
            let v = if i < root { 2 } else { 1 };
            CombinatorialValuation::unit_demand(vec![int(v); n])
        })
        .collect::<Result<Vec<_>>>()?;
    Instance::lettered(valuations)
}
