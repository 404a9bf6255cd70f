use osp_auctions::experiments::{
    eval_on_distribution, eval_support_on_distribution, exact_ratio, grid_valuations, hard_dist_additive,
    hard_dist_mua_sm, hard_dist_unit_demand, mc_ratio, sampling_lemma_experiment, worst_case_search, yao_aggregate,
    ExpectedRatio, GridSpec,
};
use osp_auctions::fixtures::instance_fixture;
use osp_auctions::mechanisms::{grand_bundle, m1_2x2, mechanism_by_name};
use osp_auctions::valuations::{make_single_minded, Instance, Setting};
use osp_auctions::{int, rat, Rational};
use proptest::prelude::*;

#[test]
fn grand_bundle_report_json() {
    let dist = hard_dist_mua_sm(10).unwrap();
    let report = eval_on_distribution(&grand_bundle(2, Setting::multi_unit(2).unwrap()).unwrap(), &dist).unwrap();
    assert_eq!(report.breakdown_mean(), rat(5, 6));
    let json = report.to_json();
    assert_eq!(json["expected_ratio"], "5/6");
    assert_eq!(json["breakdown"][0]["ratio"], "1/2");
    assert_eq!(json["breakdown"].as_array().unwrap().len(), 5);
}

#[test]
fn support_reports_average_to_the_mechanism() {
    for name in ["grand-bundle", "random-bundles", "m1-2x2", "mech1-sm"] {
        let dist = hard_dist_mua_sm(3).unwrap();
        let mech = mechanism_by_name(name, 2, dist.setting()).unwrap();
        let whole = eval_on_distribution(mech.as_ref(), &dist).unwrap();
        let parts = eval_support_on_distribution(mech.as_ref(), &dist).unwrap();
        let (weights, reports): (Vec<Rational>, Vec<_>) = parts.into_iter().unzip();
        let yao = yao_aggregate(&reports, &weights).unwrap();
        assert_eq!(Some(yao.mixture_expected_ratio), whole.expected.exact(), "{name}");
        assert!(yao.min_profile_ratio <= yao.mixture_expected_ratio);
        assert!(yao.mixture_expected_ratio <= rat(5, 6), "{name}");
    }
}

#[test]
fn item_distributions_bound_item_mechanisms() {
    let additive = hard_dist_additive(4).unwrap();
    let r = eval_on_distribution(mechanism_by_name("m2-2x2", 2, additive.setting()).unwrap().as_ref(), &additive)
        .unwrap();
    assert!(r.expected.exact().unwrap() < int(1));
    let ud = hard_dist_unit_demand(4).unwrap();
    let r = eval_on_distribution(mechanism_by_name("mech3-unit-demand", 2, ud.setting()).unwrap().as_ref(), &ud).unwrap();
    assert!(r.expected.exact().unwrap() < int(1));
}

#[test]
fn yao_aggregate_rejects_bad_input() {
    let dist = hard_dist_mua_sm(2).unwrap();
    let r = eval_on_distribution(&m1_2x2(rat(1, 2)).unwrap(), &dist).unwrap();
    assert!(yao_aggregate(std::slice::from_ref(&r), &[rat(1, 2)]).is_err());
    assert!(yao_aggregate(&[r.clone(), r.clone()], &[int(1)]).is_err());
    let mut other = r.clone();
    other.breakdown.pop();
    assert!(yao_aggregate(&[r, other], &[rat(1, 2), rat(1, 2)]).is_err());
}

#[test]
fn yao_minimum_picks_first_worst_profile() {
    let dist = hard_dist_mua_sm(5).unwrap();
    let r = eval_on_distribution(&grand_bundle(2, Setting::multi_unit(2).unwrap()).unwrap(), &dist).unwrap();
    let y = yao_aggregate(&[r], &[int(1)]).unwrap();
    assert_eq!(y.argmin, "I1");
    assert_eq!(y.min_profile_ratio, rat(1, 2));
    assert_eq!(y.mixture_expected_ratio, rat(5, 6));
}

#[test]
fn grid_specs_parse() {
    let g: GridSpec = "additive:2x3:4".parse().unwrap();
    assert_eq!((g.n, g.m, g.max), (2, 3, 4));
    assert_eq!(g.to_string(), "additive:2x3:4");
    for bad in ["additive:2x3", "cubic:2x2:1", "additive:0x2:1", "additive:2by2:1", "monotone:2x4:1"] {
        assert!(bad.parse::<GridSpec>().and_then(|g| grid_valuations(&g)).is_err(), "{bad}");
    }
    assert_eq!(grid_valuations(&"additive:1x2:2".parse().unwrap()).unwrap().len(), 9);
    assert_eq!(grid_valuations(&"unit-demand:1x2:2".parse().unwrap()).unwrap().len(), 9);
}

#[test]
fn search_finds_known_floors() {
    let r = worst_case_search("m1-2x2", &"single-minded:2x2:4".parse().unwrap(), 1_000_000, 0).unwrap();
    assert!(r.exhaustive);
    assert_eq!(r.worst.as_ref().unwrap().1, rat(3, 4));
    let r = worst_case_search("grand-bundle", &"single-minded:2x2:3".parse().unwrap(), 1_000_000, 0).unwrap();
    assert_eq!(r.worst.as_ref().unwrap().1, rat(1, 2));
    let (inst, _) = r.worst.unwrap();
    assert_eq!(inst.n(), 2);
}

#[test]
fn sampled_search_is_reproducible() {
    let grid: GridSpec = "single-minded:3x4:5".parse().unwrap();
    let a = worst_case_search("mech1-sm", &grid, 50, 7).unwrap();
    let b = worst_case_search("mech1-sm", &grid, 50, 7).unwrap();
    assert!(!a.exhaustive);
    assert_eq!(a.evaluated, 50);
    assert_eq!(a.worst.map(|w| w.1), b.worst.map(|w| w.1));
}

#[test]
fn monte_carlo_tracks_exact() {
    let inst = instance_fixture("m1-example").unwrap();
    let mech = mechanism_by_name("random-bundles", inst.n(), inst.setting()).unwrap();
    let exact = exact_ratio(mech.as_ref(), &inst).unwrap().expected.estimate();
    let small = mc_ratio(mech.as_ref(), &inst, 2_000, 1).unwrap();
    let large = mc_ratio(mech.as_ref(), &inst, 8_000, 1).unwrap();
    assert!((small.expected.estimate() - exact).abs() <= 3.0 * small.expected.stderr());
    assert!((large.expected.estimate() - exact).abs() <= 3.0 * large.expected.stderr());
    let shrink = small.expected.stderr() / large.expected.stderr();
    assert!((1.7..2.3).contains(&shrink), "{shrink}");
    assert_eq!(mc_ratio(mech.as_ref(), &inst, 500, 4).unwrap(), mc_ratio(mech.as_ref(), &inst, 500, 4).unwrap());
}

#[test]
fn deterministic_mechanisms_have_no_spread() {
    let inst = instance_fixture("knapsack-3").unwrap();
    let mech = grand_bundle(3, inst.setting().clone()).unwrap();
    let r = mc_ratio(&mech, &inst, 64, 9).unwrap();
    assert_eq!(r.expected.stderr(), 0.0);
    assert_eq!(r.breakdown[0].ratio, rat(5, 8));
    assert!(matches!(r.expected, ExpectedRatio::Estimate { trials: 64, .. }));
    assert!(mc_ratio(&mech, &inst, 0, 9).is_err());
}

#[test]
fn sampling_refuses_critical_bidders() {
    let one = Instance::multi_unit(1, vec![make_single_minded(int(1), 1, 1).unwrap()]).unwrap();
    assert!(sampling_lemma_experiment(&one, rat(1, 10), 100, 0).is_err());
    assert!(sampling_lemma_experiment(&instance_fixture("critical-sm").unwrap(), rat(1, 10), 100, 0).is_err());
    assert!(sampling_lemma_experiment(&instance_fixture("sampling-eleven").unwrap(), rat(1, 10), 0, 0).is_ok());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn ratios_stay_in_unit_interval(xs in prop::collection::vec((1i128..9, 1u32..5), 2..4), m in 1u32..5) {
        let vals: Vec<_> = xs.iter().map(|&(x, d)| make_single_minded(int(x), d.min(m), m).unwrap()).collect();
        let inst = Instance::multi_unit(m, vals).unwrap();
        for name in ["grand-bundle", "random-bundles", "mech1-sm"] {
            let mech = mechanism_by_name(name, inst.n(), inst.setting()).unwrap();
            let r = exact_ratio(mech.as_ref(), &inst).unwrap().expected.exact().unwrap();
            prop_assert!(r >= Rational::from_integer(0) && r <= int(1));
        }
    }
}
