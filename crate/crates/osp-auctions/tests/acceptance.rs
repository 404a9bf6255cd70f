//! Acceptance criteria, one PASS/FAIL line each.

use std::process::ExitCode;
use std::time::Instant;

use num_traits::{ToPrimitive, Zero};
use rayon::prelude::*;

use osp_auctions::experiments::{
    dm_grid, eval_on_distribution, explicit_monotone_grid, explicit_subadditive_grid, grid_valuations,
    hard_dist_mua_sm, hard_domain_mua_sm, mc_ratio, multi_unit_grid, sampling_lemma_experiment, single_minded_grid,
    unit_demand_grid, additive_grid, worst_case_search, ExpectedRatio, GridSpec,
};
use osp_auctions::fixtures::{instance_fixture, protocol_fixture};
use osp_auctions::mechanisms::{
    canonical_item_probabilities, exact_expected_welfare, grand_bundle, m1_2x2, m2_2x2, m3_2x2, mech1_decreasing_marginals,
    mech1_single_minded, mech2_additive, mech3_unit_demand, naive_max_price, random_bundles, three_item_dm,
    RandomizedMechanism,
};
use osp_auctions::osp::{divergence_survey, verify_dsic, verify_ir_nnt, verify_osp, verify_weak_monotonicity};
use osp_auctions::protocol::{play, realize_rule, CanonicalStrategy};
use osp_auctions::rational::format_rational;
use osp_auctions::rng::SeedStream;
use osp_auctions::valuations::{CombinatorialValuation, Domain, Instance, Setting, Valuation};
use osp_auctions::welfare::{brute_force_opt, opt};
use osp_auctions::{int, rat, Rational};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn fail<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

/// A mechanism and the domain its support is checked on.
struct OspCase {
    name: &'static str,
    mech: Box<dyn RandomizedMechanism>,
    domain: Domain,
}

fn osp_cases() -> Result<Vec<OspCase>, String> {
    let mu = |m: u32| Setting::multi_unit(m).map_err(fail);
    let items = |m: usize| Setting::lettered(m).map_err(fail);
    let uniform = |s: Setting, n: usize, vals: Vec<Valuation>| Domain::uniform(s, n, vals).map_err(fail);
    Ok(vec![
        OspCase {
            name: "grand-bundle (2 bidders, 2 units)",
            mech: Box::new(grand_bundle(2, mu(2)?).map_err(fail)?),
            domain: uniform(mu(2)?, 2, single_minded_grid(2, 3).map_err(fail)?)?,
        },
        OspCase {
            name: "grand-bundle (2 bidders, 2 items)",
            mech: Box::new(grand_bundle(2, items(2)?).map_err(fail)?),
            domain: uniform(items(2)?, 2, explicit_monotone_grid(2, 3).map_err(fail)?)?,
        },
        OspCase {
            name: "random-bundles (m=4)",
            mech: Box::new(random_bundles(2, 4).map_err(fail)?),
            domain: uniform(mu(4)?, 2, single_minded_grid(4, 3).map_err(fail)?)?,
        },
        OspCase {
            name: "mech1-sm (n=2, m=2)",
            mech: Box::new(mech1_single_minded(2, 2).map_err(fail)?),
            domain: uniform(mu(2)?, 2, single_minded_grid(2, 3).map_err(fail)?)?,
        },
        OspCase {
            name: "mech1-dm (n=2, m=2)",
            mech: Box::new(mech1_decreasing_marginals(2, 2).map_err(fail)?),
            domain: uniform(mu(2)?, 2, dm_grid(2, 3).map_err(fail)?)?,
        },
        OspCase {
            name: "mech2-additive (2x2)",
            mech: Box::new(mech2_additive(2, items(2)?).map_err(fail)?),
            domain: uniform(items(2)?, 2, additive_grid(2, 3).map_err(fail)?)?,
        },
        OspCase {
            name: "mech3-unit-demand (n=3, m=2)",
            mech: Box::new(mech3_unit_demand(3, items(2)?).map_err(fail)?),
            domain: uniform(items(2)?, 3, unit_demand_grid(2, 3).map_err(fail)?)?,
        },
        OspCase {
            name: "naive-max-price (2x2)",
            mech: Box::new(naive_max_price(2, items(2)?).map_err(fail)?),
            domain: uniform(items(2)?, 2, unit_demand_grid(2, 3).map_err(fail)?)?,
        },
        OspCase {
            name: "m1-2x2",
            mech: Box::new(m1_2x2(rat(1, 2)).map_err(fail)?),
            domain: uniform(mu(2)?, 2, single_minded_grid(2, 3).map_err(fail)?)?,
        },
        OspCase {
            name: "m2-2x2",
            mech: Box::new(m2_2x2().map_err(fail)?),
            domain: uniform(items(2)?, 2, explicit_subadditive_grid(2, 3).map_err(fail)?)?,
        },
        OspCase {
            name: "m3-2x2",
            mech: Box::new(m3_2x2(rat(1, 3)).map_err(fail)?),
            domain: uniform(items(2)?, 2, explicit_monotone_grid(2, 3).map_err(fail)?)?,
        },
        OspCase {
            name: "three-item-dm",
            mech: Box::new(three_item_dm().map_err(fail)?),
            domain: uniform(mu(3)?, 2, dm_grid(3, 3).map_err(fail)?)?,
        },
    ])
}

fn criterion_1() -> Outcome {
    let mut elements = 0;
    let mut nodes = 0;
    for case in osp_cases()? {
        for e in case.mech.support(&case.domain).map_err(fail)? {
            let verdict = verify_osp(e.protocol.as_ref(), case.mech.strategy(), &case.domain).map_err(fail)?;
            if let Some(w) = verdict.witness() {
                return Err(format!("{} [{}] is not OSP at node {:?} for bidder {}", case.name, e.label, w.node, w.bidder));
            }
            let ir = verify_ir_nnt(e.protocol.as_ref(), case.mech.strategy(), &case.domain).map_err(fail)?;
            if !ir.is_pass() {
                return Err(format!("{} [{}] violates IR or NNT: {:?}", case.name, e.label, ir));
            }
            if let osp_auctions::osp::OspVerdict::Pass { tree_nodes, .. } = verdict {
                nodes += tree_nodes;
            }
            elements += 1;
        }
    }
    let fixture = protocol_fixture("sealed-bid-2x2").map_err(fail)?;
    let verdict = verify_osp(&fixture.tree, &CanonicalStrategy, &fixture.domain).map_err(fail)?;
    let Some(w) = verdict.witness() else {
        return Err("sealed-bid fixture passed".into());
    };
    let truthful = play(&fixture.tree, &w.truthful_behaviors).map_err(fail)?;
    let deviating = play(&fixture.tree, &w.deviating_behaviors).map_err(fail)?;
    let replayed = truthful.leaf() == &w.truthful_leaf
        && deviating.leaf() == &w.deviating_leaf
        && truthful.outcome.utility(w.bidder, &w.valuation) == w.worst_truthful_utility
        && deviating.outcome.utility(w.bidder, &w.valuation) == w.best_deviating_utility
        && w.best_deviating_utility > w.worst_truthful_utility;
    if !replayed {
        return Err("sealed-bid witness does not replay".into());
    }
    Ok(format!(
        "{elements} support protocols pass ({nodes} tree nodes); sealed-bid fails at node {:?}, bidder {}, {}: truthful worst {} < deviation {} best {}",
        w.node,
        w.bidder,
        w.valuation,
        format_rational(&w.worst_truthful_utility),
        w.deviating_message,
        format_rational(&w.best_deviating_utility)
    ))
}

fn criterion_2() -> Outcome {
    let expected_breakdown = [rat(1, 2), int(1), int(1), int(1), int(1)];
    for k in [2u64, 5, 10, 100] {
        let dist = hard_dist_mua_sm(k).map_err(fail)?;
        let mech = grand_bundle(2, dist.setting().clone()).map_err(fail)?;
        let report = eval_on_distribution(&mech, &dist).map_err(fail)?;
        let ratios: Vec<Rational> = report.breakdown.iter().map(|p| p.ratio).collect();
        if report.expected != ExpectedRatio::Exact(rat(5, 6)) || ratios != expected_breakdown {
            return Err(format!("k={k}: expected {:?}, breakdown {:?}", report.expected, ratios));
        }
    }
    Ok("expected ratio 5/6 with breakdown (1/2,1,1,1,1) for k = 2, 5, 10, 100".into())
}

fn all_profiles(values: &[Valuation], n: usize) -> Vec<Vec<Valuation>> {
    let count = values.len().pow(n as u32);
    (0..count)
        .map(|mut c| {
            (0..n)
                .map(|_| {
                    let v = values[c % values.len()].clone();
                    c /= values.len();
                    v
                })
                .collect()
        })
        .collect()
}

fn criterion_3() -> Outcome {
    let setting = Setting::lettered(2).map_err(fail)?;
    let mut checked = 0usize;
    let mut worst = int(1);
    let mut worst_item = int(1);
    for (n, max) in [(2usize, 4u32), (3, 3)] {
        let mech = mech2_additive(n, setting.clone()).map_err(fail)?;
        let profiles = all_profiles(&additive_grid(2, max).map_err(fail)?, n);
        let results = profiles
            .par_iter()
            .map(|p| {
                let inst = Instance::new(setting.clone(), p.clone()).map_err(fail)?;
                let optimum = opt(&inst).map_err(fail)?.value;
                let welfare = exact_expected_welfare(&mech, &inst).map_err(fail)?;
                if welfare * int(4) < optimum {
                    return Err(format!("welfare {} < OPT/4 on {:?}", format_rational(&welfare), p));
                }
                let probs = canonical_item_probabilities(&mech, &inst).map_err(fail)?;
                let min_p = probs.iter().copied().fold(int(1), |a, b| if b < a { b } else { a });
                if min_p < rat(1, 4) {
                    return Err(format!("item probability {} < 1/4 on {:?}", format_rational(&min_p), p));
                }
                let ratio = if optimum.is_zero() { int(1) } else { welfare / optimum };
                Ok((ratio, min_p))
            })
            .collect::<Result<Vec<_>, String>>()?;
        for (r, p) in results {
            worst = worst.min(r);
            worst_item = worst_item.min(p);
            checked += 1;
        }
    }
    Ok(format!(
        "{checked} instances; worst ratio {}, worst item probability {}",
        format_rational(&worst),
        format_rational(&worst_item)
    ))
}

fn search_floor(mechanism: &str, grid: &str, floor: Rational) -> Result<String, String> {
    let spec: GridSpec = grid.parse().map_err(fail)?;
    let report = worst_case_search(mechanism, &spec, u64::MAX, 0).map_err(fail)?;
    if !report.exhaustive {
        return Err(format!("{mechanism} on {grid} was not exhaustive"));
    }
    let (inst, ratio) = report.worst.ok_or_else(|| format!("{grid} has no instance with positive OPT"))?;
    if ratio < floor {
        return Err(format!(
            "{mechanism} on {grid}: ratio {} below {} at {:?}",
            format_rational(&ratio),
            format_rational(&floor),
            inst.valuations().iter().map(|v| v.to_string()).collect::<Vec<_>>()
        ));
    }
    Ok(format!("{mechanism} worst {} over {} profiles", format_rational(&ratio), report.evaluated))
}

fn criterion_4() -> Outcome {
    let parts = [
        search_floor("m1-2x2", "single-minded:2x2:4", rat(3, 4))?,
        search_floor("m2-2x2", "subadditive:2x2:3", rat(3, 4))?,
        search_floor("m3-2x2", "monotone:2x2:3", rat(2, 3))?,
    ];
    Ok(parts.join("; "))
}

fn criterion_5() -> Outcome {
    search_floor("three-item-dm", "dm:2x3:4", rat(2, 3))
}

/// Every profile when there are at most `limit`, otherwise `samples` seeded
/// draws.
fn corpus(values: &[Valuation], n: usize, limit: usize, samples: usize, seed: u64) -> Vec<Vec<Valuation>> {
    let total = (values.len() as u128).checked_pow(n as u32).unwrap_or(u128::MAX);
    if total <= limit as u128 {
        return all_profiles(values, n);
    }
    let mut rng = SeedStream::new(seed, n as u64);
    (0..samples)
        .map(|_| (0..n).map(|_| values[rng.below(values.len() as u64) as usize].clone()).collect())
        .collect()
}

/// Minimum of `welfare / OPT` over a corpus, failing below `floor`.
fn floor_over(
    mech: &dyn RandomizedMechanism,
    setting: &Setting,
    profiles: &[Vec<Valuation>],
    floor: Rational,
) -> Result<(usize, Rational), String> {
    let ratios = profiles
        .par_iter()
        .map(|p| {
            let inst = Instance::new(setting.clone(), p.clone()).map_err(fail)?;
            let optimum = opt(&inst).map_err(fail)?.value;
            if optimum.is_zero() {
                return Ok(None);
            }
            let ratio = exact_expected_welfare(mech, &inst).map_err(fail)? / optimum;
            if ratio < floor {
                return Err(format!(
                    "{}: ratio {} on {:?}",
                    mech.name(),
                    format_rational(&ratio),
                    p.iter().map(|v| v.to_string()).collect::<Vec<_>>()
                ));
            }
            Ok(Some(ratio))
        })
        .collect::<Result<Vec<_>, String>>()?;
    let worst = ratios.iter().flatten().copied().fold(int(1), |a, b| a.min(b));
    Ok((profiles.len(), worst))
}

fn criterion_6() -> Outcome {
    let mut count = 0;
    let mut worst: Vec<String> = Vec::new();
    for m in [2u32, 4, 8] {
        let setting = Setting::multi_unit(m).map_err(fail)?;
        let values = single_minded_grid(m, 5).map_err(fail)?;
        let log = (m as f64).log2().ceil() as i128;
        let floor = Rational::new(1, 3 * log.max(1));
        let mut w = int(1);
        for n in 1..=5 {
            let mech = random_bundles(n, m).map_err(fail)?;
            let profiles = corpus(&values, n, 200_000, 4_000, 6);
            let (c, r) = floor_over(&mech, &setting, &profiles, floor)?;
            count += c;
            w = w.min(r);
        }
        worst.push(format!("m={m}: {}", format_rational(&w)));
    }
    Ok(format!("{count} instances; worst ratios {}", worst.join(", ")))
}

fn criterion_7() -> Outcome {
    let mut count = 0;
    let mut worst = int(1);
    for m in 1..=6u32 {
        let setting = Setting::multi_unit(m).map_err(fail)?;
        let sm = single_minded_grid(m, 5).map_err(fail)?;
        let dm = dm_grid(m, 5).map_err(fail)?;
        for n in 1..=8 {
            let samples = if n <= 5 { 60 } else { 25 };
            let mech_sm = mech1_single_minded(n, m).map_err(fail)?;
            let (c, r) = floor_over(&mech_sm, &setting, &corpus(&sm, n, 400, samples, 7), rat(1, 400))?;
            count += c;
            worst = worst.min(r);
            let mech_dm = mech1_decreasing_marginals(n, m).map_err(fail)?;
            let (c, r) = floor_over(&mech_dm, &setting, &corpus(&dm, n, 400, samples, 8), rat(1, 400))?;
            count += c;
            worst = worst.min(r);
        }
    }
    Ok(format!("{count} instances; empirical worst ratio {}", format_rational(&worst)))
}

fn criterion_8() -> Outcome {
    let mut parts = Vec::new();
    for name in ["sampling-uniform-12", "sampling-eleven", "sampling-pairs-12"] {
        let inst = instance_fixture(name).map_err(fail)?;
        let report = sampling_lemma_experiment(&inst, rat(1, 10), 0, 0).map_err(fail)?;
        if report.frequency < rat(1, 2) {
            return Err(format!("{name}: frequency {}", format_rational(&report.frequency)));
        }
        parts.push(format!("{name} {}/{}", report.hits, report.total));
    }
    Ok(format!("exact partition frequencies {} (critical threshold 1/10)", parts.join(", ")))
}

fn criterion_9() -> Outcome {
    let inst = instance_fixture("ud-failure-16").map_err(fail)?;
    let mech3 = mech3_unit_demand(16, inst.setting().clone()).map_err(fail)?;
    let report = mc_ratio(&mech3, &inst, 100_000, 9).map_err(fail)?;
    let (est, se) = (report.expected.estimate(), report.expected.stderr());
    let bound = 1.0 / std::f64::consts::E - 3.0 * se;
    if est < bound {
        return Err(format!("mech3 estimate {est:.4} < {bound:.4}"));
    }
    let naive = naive_max_price(16, inst.setting().clone()).map_err(fail)?;
    let optimum = opt(&inst).map_err(fail)?.value;
    let ratio = exact_expected_welfare(&naive, &inst).map_err(fail)? / optimum;
    if ratio > rat(2, 5) {
        return Err(format!("naive exact ratio {} > 0.4", format_rational(&ratio)));
    }
    Ok(format!(
        "mech3 {est:.4} ± {se:.4} over 100000 trials; naive exact {} ≈ {:.4}",
        format_rational(&ratio),
        ratio.to_f64().unwrap_or(f64::NAN)
    ))
}

/// Random monotone table over `m` items with entries in `0..=max`.
fn random_monotone(rng: &mut SeedStream, m: usize, max: u32) -> Valuation {
    let mut table = vec![0i128];
    for mask in 1usize..1 << m {
        let lo = (0..m)
            .filter(|j| mask >> j & 1 == 1)
            .map(|j| table[mask & !(1 << j)])
            .max()
            .unwrap_or(0);
        table.push(lo + rng.below((max as i128 - lo + 1) as u64) as i128);
    }
    CombinatorialValuation::explicit(m, table.into_iter().map(int).collect())
        .expect("monotone by construction")
        .into()
}

fn criterion_10() -> Outcome {
    let mut checked = 0usize;
    let mut rng = SeedStream::new(10, 0);
    for m in 1..=4usize {
        let mu = Setting::multi_unit(m as u32).map_err(fail)?;
        let it = Setting::lettered(m).map_err(fail)?;
        let mut classes: Vec<(Setting, Vec<Valuation>)> = vec![
            (mu.clone(), single_minded_grid(m as u32, 3).map_err(fail)?),
            (mu.clone(), dm_grid(m as u32, 3).map_err(fail)?),
            (mu.clone(), multi_unit_grid(m as u32, 3).map_err(fail)?),
            (it.clone(), additive_grid(m, 3).map_err(fail)?),
            (it.clone(), unit_demand_grid(m, 3).map_err(fail)?),
        ];
        if m <= 3 {
            let spec: GridSpec = format!("monotone:1x{m}:3").parse().map_err(fail)?;
            classes.push((it.clone(), grid_valuations(&spec).map_err(fail)?));
            classes.push((it.clone(), explicit_subadditive_grid(m, 3).map_err(fail)?));
        } else {
            classes.push((it.clone(), (0..400).map(|_| random_monotone(&mut rng, m, 3)).collect()));
        }
        let mixed: Vec<Valuation> = classes
            .iter()
            .filter(|(s, _)| *s == it)
            .flat_map(|(_, vals)| vals.iter().cloned())
            .collect();
        classes.push((it.clone(), mixed));
        for (ci, (setting, values)) in classes.iter().enumerate() {
            for n in 1..=3 {
                let profiles = corpus(values, n, 30_000, 3_000, 100 + ci as u64 * 10 + m as u64);
                profiles.par_iter().try_for_each(|p| {
                    let inst = Instance::new(setting.clone(), p.clone()).map_err(fail)?;
                    let a = opt(&inst).map_err(fail)?;
                    let b = brute_force_opt(&inst).map_err(fail)?;
                    if a != b {
                        return Err(format!("opt {:?} != brute force {:?} on {:?}", a, b, p));
                    }
                    Ok(())
                })?;
                checked += profiles.len();
            }
        }
    }
    Ok(format!("{checked} instances agree on value and witness"))
}

fn criterion_11() -> Outcome {
    let mut rules = 0;
    for case in osp_cases()? {
        for e in case.mech.support(&case.domain).map_err(fail)? {
            let rule = realize_rule(e.protocol.as_ref(), case.mech.strategy(), &case.domain).map_err(fail)?;
            if let Some(v) = verify_weak_monotonicity(&rule) {
                return Err(format!("{} [{}] is not weakly monotone: {:?}", case.name, e.label, v));
            }
            if let Some(v) = verify_dsic(&rule) {
                return Err(format!("{} [{}] is not DSIC: {:?}", case.name, e.label, v));
            }
            rules += 1;
        }
    }
    let posted = protocol_fixture("posted-price-2x2").map_err(fail)?;
    let rule = realize_rule(&posted.tree, &CanonicalStrategy, &posted.domain).map_err(fail)?;
    if verify_weak_monotonicity(&rule).is_some() || verify_dsic(&rule).is_some() {
        return Err("posted-price fixture fails a structural check".into());
    }
    rules += 1;
    let domain = hard_domain_mua_sm(3).map_err(fail)?;
    let setting = domain.setting().clone();
    let mechs: Vec<Box<dyn RandomizedMechanism>> = vec![
        Box::new(grand_bundle(2, setting.clone()).map_err(fail)?),
        Box::new(random_bundles(2, 2).map_err(fail)?),
        Box::new(m1_2x2(rat(1, 2)).map_err(fail)?),
        Box::new(mech1_single_minded(2, 2).map_err(fail)?),
    ];
    let (mut consistent, mut skipped) = (0, 0);
    for mech in &mechs {
        for e in mech.support(&domain).map_err(fail)? {
            let s = divergence_survey(e.protocol.as_ref(), mech.strategy(), &domain).map_err(fail)?;
            if let Some(v) = s.violations.first() {
                return Err(format!("{} [{}] violates the divergence property: {:?}", mech.name(), e.label, v));
            }
            consistent += s.consistent;
            skipped += s.not_applicable;
        }
    }
    Ok(format!(
        "{rules} realized rules weakly monotone and DSIC; divergence cases {consistent} consistent, {skipped} not applicable"
    ))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 11] = [
        ("OSP verification suite", criterion_1),
        ("exact 5/6 identity", criterion_2),
        ("mechanism 2 floor", criterion_3),
        ("2x2 mechanisms", criterion_4),
        ("three-item DM", criterion_5),
        ("random bundles", criterion_6),
        ("mechanism 1", criterion_7),
        ("sampling lemma", criterion_8),
        ("mechanism 3 vs naive", criterion_9),
        ("oracle equivalence", criterion_10),
        ("structural implications", criterion_11),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let result = f();
        let secs = start.elapsed().as_secs_f64();
        match result {
            Ok(detail) => println!("criterion {:>2} PASS {name} ({secs:.1}s): {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {:>2} FAIL {name} ({secs:.1}s): {detail}", i + 1);
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
