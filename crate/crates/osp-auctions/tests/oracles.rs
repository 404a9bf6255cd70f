//! Reference values computed without the library's optimizers or protocols.

use osp_auctions::experiments::{
    eval_on_distribution, hard_dist_additive, hard_dist_mua_sm, hard_dist_unit_demand, sampling_lemma_experiment,
    SamplingMethod,
};
use osp_auctions::fixtures::instance_fixture;
use osp_auctions::mechanisms::{exact_expected_welfare, grand_bundle, mech3_unit_demand, naive_max_price, observed_prefix};
use osp_auctions::valuations::{Bundle, CombinatorialValuation, Instance, ItemSet, Setting, Valuation};
use osp_auctions::welfare::opt;
use osp_auctions::{int, rat, Rational};
use proptest::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

fn binomial(n: u64, k: u64) -> u64 {
    (0..k).fold(1, |acc, i| acc * (n - i) / (i + 1))
}

/// Partitions of `n` identical bidders with at least `lo` on each side.
fn balanced_partitions(n: u64, lo: u64) -> u64 {
    (lo..=n - lo).map(|k| binomial(n, k)).sum()
}

#[test]
fn hard_multi_unit_distribution_optima() {
    for k in [2i128, 3, 7, 100] {
        let k2 = k * k;
        let k4 = k2 * k2;
        let expected = [int(2), int(k2), int(k4), int(k2), int(k4)];
        let dist = hard_dist_mua_sm(k as u64).unwrap();
        for (idx, want) in expected.iter().enumerate() {
            assert_eq!(opt(&dist.instance(idx).unwrap()).unwrap().value, *want, "k={k} I{}", idx + 1);
        }
    }
}

#[test]
fn grand_bundle_ratio_oracle() {
    for k in [2u64, 5, 10, 100] {
        let dist = hard_dist_mua_sm(k).unwrap();
        let mut oracle = Rational::from_integer(0);
        for (idx, e) in dist.entries().iter().enumerate() {
            let best_single = e.profile.iter().map(|v| v.value(&Bundle::Units(2))).max().unwrap();
            let inst = dist.instance(idx).unwrap();
            oracle += e.probability * best_single / opt(&inst).unwrap().value;
        }
        assert_eq!(oracle, rat(5, 6));
        let report = eval_on_distribution(&grand_bundle(2, Setting::multi_unit(2).unwrap()).unwrap(), &dist).unwrap();
        assert_eq!(report.expected.exact(), Some(oracle));
    }
}

fn item_opt_oracle(values: &[Vec<Rational>], additive: bool) -> Rational {
    if additive {
        (0..values[0].len()).map(|j| values.iter().map(|v| v[j]).max().unwrap()).sum()
    } else {
        let m = values[0].len();
        let mut best = Rational::from_integer(0);
        for a in 0..=m {
            for b in 0..=m {
                if a == b && a < m {
                    continue;
                }
                let x = if a < m { values[0][a] } else { int(0) };
                let y = if b < m { values[1][b] } else { int(0) };
                best = best.max(x + y);
            }
        }
        best
    }
}

#[test]
fn hard_item_distribution_optima() {
    for k in [2u64, 4, 9] {
        for (dist, additive) in [(hard_dist_additive(k).unwrap(), true), (hard_dist_unit_demand(k).unwrap(), false)] {
            let total: Rational = dist.entries().iter().map(|e| e.probability).sum();
            assert_eq!(total, int(1));
            for (idx, e) in dist.entries().iter().enumerate() {
                let values: Vec<Vec<Rational>> = e
                    .profile
                    .iter()
                    .map(|v| v.as_combinatorial().unwrap().item_values())
                    .collect();
                let inst = dist.instance(idx).unwrap();
                assert_eq!(opt(&inst).unwrap().value, item_opt_oracle(&values, additive), "{}", e.label);
            }
        }
    }
}

#[test]
fn knapsack_optimum() {
    assert_eq!(opt(&instance_fixture("knapsack-3").unwrap()).unwrap().value, int(8));
}

#[test]
fn ud_failure_optima() {
    assert_eq!(opt(&instance_fixture("ud-failure-16").unwrap()).unwrap().value, int(20));
    let one = osp_auctions::experiments::ud_failure_instance(1).unwrap();
    assert_eq!(opt(&one).unwrap().value, int(2));
    assert!(osp_auctions::experiments::ud_failure_instance(15).is_err());
}

#[test]
fn sampling_frequencies_match_binomial_counts() {
    let cases = [("sampling-uniform-12", 12, 3), ("sampling-eleven", 11, 3), ("sampling-pairs-12", 12, 3)];
    for (name, n, lo) in cases {
        let r = sampling_lemma_experiment(&instance_fixture(name).unwrap(), rat(1, 10), 0, 0).unwrap();
        assert_eq!(r.method, SamplingMethod::Exact);
        assert_eq!(r.hits, balanced_partitions(n, lo), "{name}");
        assert_eq!(r.total, 1 << n);
    }
    assert_eq!(balanced_partitions(12, 3), 3938);
}

#[test]
fn large_sampling_fixture_agrees_with_binomial() {
    let r = sampling_lemma_experiment(&instance_fixture("sampling-200").unwrap(), rat(1, 10), 2000, 3).unwrap();
    assert!(matches!(r.method, SamplingMethod::MonteCarlo { trials: 2000, seed: 3 }));
    // Missing the event needs fewer than 40 heads in 200 fair coins.
    let miss: f64 = (0..40).map(|k| binomial_f64(200, k)).sum::<f64>() * 2.0 / 2f64.powi(200);
    assert!(miss < 1e-15);
    assert_eq!(r.hits, r.total);
}

fn binomial_f64(n: u64, k: u64) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

fn ud(values: &[i128]) -> CombinatorialValuation {
    CombinatorialValuation::unit_demand(values.iter().map(|&x| int(x)).collect()).unwrap()
}

fn values_of(inst: &Instance) -> Vec<Vec<Rational>> {
    inst.valuations()
        .iter()
        .map(|v| match v {
            Valuation::Combinatorial(c) => c.item_values(),
            _ => unreachable!(),
        })
        .collect()
}

/// Naive sampler replayed by hand: prices are the sampled maxima, each
/// remaining bidder takes the first best option from favored items, nothing,
/// then the rest.
fn naive_oracle(values: &[Vec<Rational>]) -> Rational {
    let n = values.len();
    let m = values[0].len();
    let mut total = Rational::from_integer(0);
    for mask in 0u32..1 << n {
        let sampled = |i: usize| mask >> i & 1 == 1;
        let mut price = vec![int(0); m];
        let mut holder: Vec<Option<usize>> = vec![None; m];
        for i in (0..n).filter(|&i| sampled(i)) {
            for j in 0..m {
                if holder[j].is_none() || values[i][j] > price[j] {
                    price[j] = values[i][j];
                    holder[j] = Some(i);
                }
            }
        }
        let mut sold = vec![false; m];
        let mut welfare = int(0);
        for i in (0..n).filter(|&i| !sampled(i)) {
            let favored = |j: usize| holder[j].is_none_or(|h| i < h);
            let mut order: Vec<Option<usize>> = (0..m).filter(|&j| favored(j)).map(Some).collect();
            order.push(None);
            order.extend((0..m).filter(|&j| !favored(j)).map(Some));
            let utility = |o: &Option<usize>| o.map_or(int(0), |j| values[i][j] - price[j]);
            let mut best: Option<Option<usize>> = None;
            for o in order.into_iter().filter(|o| o.is_none_or(|j| !sold[j])) {
                if best.is_none_or(|b| utility(&o) > utility(&b)) {
                    best = Some(o);
                }
            }
            if let Some(Some(j)) = best {
                sold[j] = true;
                welfare += values[i][j];
            }
        }
        total += welfare;
    }
    total / int(1 << n)
}

fn matching_value(values: &[Vec<Rational>], bidders: &[usize], items: u32) -> Rational {
    let Some((&first, rest)) = bidders.split_first() else {
        return int(0);
    };
    let mut best = matching_value(values, rest, items);
    for j in 0..values[first].len() {
        if items >> j & 1 == 1 {
            best = best.max(values[first][j] + matching_value(values, rest, items & !(1 << j)));
        }
    }
    best
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for pos in 0..=p.len() {
            let mut q = p.clone();
            q.insert(pos, n - 1);
            out.push(q);
        }
    }
    out
}

/// Arrival-order pricing replayed with brute-force matchings; buyers take
/// the strictly best positive-utility item.
fn mech3_oracle(values: &[Vec<Rational>]) -> Rational {
    let n = values.len();
    let m = values[0].len();
    let prefix = observed_prefix(n);
    let perms = permutations(n);
    let mut total = int(0);
    for order in &perms {
        let mut reported: Vec<usize> = order[..prefix].to_vec();
        let mut alive: u32 = (1 << m) - 1;
        for &i in &order[prefix..] {
            let base = matching_value(values, &reported, alive);
            let mut best: Option<(Rational, usize)> = None;
            for j in (0..m).filter(|&j| alive >> j & 1 == 1) {
                let price = base - matching_value(values, &reported, alive & !(1 << j));
                let u = values[i][j] - price;
                if u > int(0) && best.is_none_or(|(b, _)| u > b) {
                    best = Some((u, j));
                }
            }
            if let Some((_, j)) = best {
                alive &= !(1 << j);
                total += values[i][j];
            }
            reported.push(i);
        }
    }
    total / int(perms.len() as i128)
}

fn draw_values(rng: &mut ChaCha8Rng, n: usize, m: usize, max: u64) -> Vec<Vec<i128>> {
    (0..n)
        .map(|_| (0..m).map(|_| (rng.next_u64() % (max + 1)) as i128).collect())
        .collect()
}

#[test]
fn naive_sampler_matches_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..200 {
        let n = 1 + (rng.next_u64() % 4) as usize;
        let m = 1 + (rng.next_u64() % 3) as usize;
        let raw = draw_values(&mut rng, n, m, 4);
        let inst = Instance::lettered(raw.iter().map(|v| ud(v)).collect()).unwrap();
        let mech = naive_max_price(n, inst.setting().clone()).unwrap();
        assert_eq!(exact_expected_welfare(&mech, &inst).unwrap(), naive_oracle(&values_of(&inst)), "{raw:?}");
    }
}

#[test]
fn ud_failure_naive_value() {
    let inst = osp_auctions::experiments::ud_failure_instance(4).unwrap();
    let mech = naive_max_price(4, inst.setting().clone()).unwrap();
    assert_eq!(exact_expected_welfare(&mech, &inst).unwrap(), naive_oracle(&values_of(&inst)));
}

/// Distinct powers of two make every comparison strict.
fn tie_free(rng: &mut ChaCha8Rng, n: usize, m: usize) -> Vec<Vec<i128>> {
    let mut exps: Vec<u32> = (0..(n * m) as u32).collect();
    for i in (1..exps.len()).rev() {
        let j = (rng.next_u64() % (i as u64 + 1)) as usize;
        exps.swap(i, j);
    }
    (0..n).map(|i| (0..m).map(|j| 1i128 << exps[i * m + j]).collect()).collect()
}

#[test]
fn mech3_matches_oracle_without_ties() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..60 {
        let n = 1 + (rng.next_u64() % 5) as usize;
        let m = 1 + (rng.next_u64() % 3) as usize;
        let raw = tie_free(&mut rng, n, m);
        let inst = Instance::lettered(raw.iter().map(|v| ud(v)).collect()).unwrap();
        let mech = mech3_unit_demand(n, inst.setting().clone()).unwrap();
        assert_eq!(exact_expected_welfare(&mech, &inst).unwrap(), mech3_oracle(&values_of(&inst)), "{raw:?}");
    }
}

#[test]
fn observed_prefix_values() {
    let expected = [(1, 0), (2, 0), (3, 1), (5, 1), (6, 2), (8, 2), (9, 3), (100, 36)];
    for (n, k) in expected {
        assert_eq!(observed_prefix(n), k, "n={n}");
    }
}

proptest! {
    #[test]
    fn unit_demand_opt_matches_brute_matching(seed in any::<u64>(), n in 1usize..5, m in 1usize..4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let raw = draw_values(&mut rng, n, m, 6);
        let inst = Instance::lettered(raw.iter().map(|v| ud(v)).collect()).unwrap();
        let bidders: Vec<usize> = (0..n).collect();
        let oracle = matching_value(&values_of(&inst), &bidders, (1 << m) - 1);
        prop_assert_eq!(opt(&inst).unwrap().value, oracle);
    }

    #[test]
    fn additive_opt_is_itemwise_max(seed in any::<u64>(), n in 1usize..5, m in 1usize..5) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let raw = draw_values(&mut rng, n, m, 9);
        let inst = Instance::lettered(
            raw.iter().map(|v| CombinatorialValuation::additive(v.iter().map(|&x| int(x)).collect()).unwrap()).collect(),
        ).unwrap();
        prop_assert_eq!(opt(&inst).unwrap().value, item_opt_oracle(&values_of(&inst), true));
        let full = inst.setting().full_bundle();
        prop_assert!(matches!(full, Bundle::Items(s) if s == ItemSet::full(m)));
    }
}
