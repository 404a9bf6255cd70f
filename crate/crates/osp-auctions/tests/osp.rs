use osp_auctions::experiments::{hard_domain_mua_sm, mua_sm_valuations};
use osp_auctions::fixtures::{protocol_fixture, PROTOCOL_FIXTURES};
use osp_auctions::json::{tree_from_json, tree_to_json};
use osp_auctions::mechanisms::{grand_bundle, mechanism_by_name, RandomizedMechanism};
use osp_auctions::osp::{
    check_divergence_lemma, divergence_survey, verify_dsic, verify_ir_nnt, verify_osp, verify_weak_monotonicity,
    DivergenceVerdict, OspVerdict,
};
use osp_auctions::protocol::{play, realize_rule, CanonicalStrategy, TableStrategy, Tree};
use osp_auctions::valuations::{make_single_minded, Setting};
use osp_auctions::int;

#[test]
fn sealed_bid_fails_with_smallest_witness() {
    let f = protocol_fixture("sealed-bid-2x2").unwrap();
    let verdict = verify_osp(&f.tree, &CanonicalStrategy, &f.domain).unwrap();
    let w = verdict.witness().expect("sealed bid is not obviously strategy-proof");
    assert!(w.node.is_empty());
    assert_eq!(w.bidder, 0);
    assert_eq!(w.valuation_index, 1);
    assert_eq!(w.valuation, make_single_minded(int(1), 1, 1).unwrap().into());
    assert_eq!(w.truthful_message, 1);
    assert_eq!(w.deviating_message, 0);
    assert_eq!(w.worst_truthful_utility, int(0));
    assert_eq!(w.best_deviating_utility, int(1));

    let truthful = play(&f.tree, &w.truthful_behaviors).unwrap();
    let deviating = play(&f.tree, &w.deviating_behaviors).unwrap();
    assert_eq!(truthful.leaf(), &w.truthful_leaf);
    assert_eq!(deviating.leaf(), &w.deviating_leaf);
    assert_eq!(truthful.outcome.utility(0, &w.valuation), w.worst_truthful_utility);
    assert_eq!(deviating.outcome.utility(0, &w.valuation), w.best_deviating_utility);
    assert_eq!(truthful.path[1][0], w.truthful_message);
    assert_eq!(deviating.path[1][0], w.deviating_message);
}

#[test]
fn sealed_bid_is_still_dominant_strategy() {
    let f = protocol_fixture("sealed-bid-2x2").unwrap();
    let rule = realize_rule(&f.tree, &CanonicalStrategy, &f.domain).unwrap();
    assert_eq!(verify_dsic(&rule), None);
    assert_eq!(verify_weak_monotonicity(&rule), None);
    assert!(verify_ir_nnt(&f.tree, &CanonicalStrategy, &f.domain).unwrap().is_pass());
}

#[test]
fn posted_price_passes() {
    let f = protocol_fixture("posted-price-2x2").unwrap();
    let verdict = verify_osp(&f.tree, &CanonicalStrategy, &f.domain).unwrap();
    assert!(matches!(verdict, OspVerdict::Pass { tree_nodes: 5, .. }), "{verdict:?}");
    assert!(verify_ir_nnt(&f.tree, &CanonicalStrategy, &f.domain).unwrap().is_pass());
}

#[test]
fn declining_a_good_price_is_caught() {
    let f = protocol_fixture("posted-price-2x2").unwrap();
    let high = f.domain.set(0)[3].clone();
    let mut table = TableStrategy::with_fallback(Box::new(CanonicalStrategy));
    table.set(0, &high, &[], 0);
    let w = verify_osp(&f.tree, &table, &f.domain).unwrap().witness().cloned().unwrap();
    assert_eq!((w.bidder, w.valuation_index, w.deviating_message), (0, 3, 1));
    assert_eq!(w.best_deviating_utility, int(1));
}

#[test]
fn protocol_fixtures_survive_json() {
    for (name, _) in PROTOCOL_FIXTURES {
        let f = protocol_fixture(name).unwrap();
        let text = tree_to_json(&f.tree).unwrap();
        let back = tree_from_json(&text).unwrap();
        assert_eq!(tree_to_json(&back).unwrap(), text);
        assert_eq!(
            verify_osp(&back, &CanonicalStrategy, &f.domain).unwrap(),
            verify_osp(&f.tree, &CanonicalStrategy, &f.domain).unwrap(),
            "{name}"
        );
    }
}

#[test]
fn materialized_gaa_round_trips() {
    let domain = hard_domain_mua_sm(2).unwrap();
    let mech = grand_bundle(2, Setting::multi_unit(2).unwrap()).unwrap();
    let e = mech.support(&domain).unwrap().remove(0);
    let tree = Tree::from_protocol(e.protocol.as_ref()).unwrap();
    let back = tree_from_json(&tree_to_json(&tree).unwrap()).unwrap();
    assert_eq!(back.len(), tree.len());
    assert!(verify_osp(&back, mech.strategy(), &domain).unwrap().is_pass());
}

#[test]
fn divergence_between_small_and_large_profiles() {
    let domain = hard_domain_mua_sm(3).unwrap();
    let v = mua_sm_valuations(3).unwrap();
    let set = domain.set(0);
    let idx = |x| set.iter().position(|y| *y == x).unwrap();
    let (one, one_big, all_big) = (idx(v.one.clone()), idx(v.one_big.clone()), idx(v.all_big.clone()));
    let mech = grand_bundle(2, Setting::multi_unit(2).unwrap()).unwrap();
    let e = mech.support(&domain).unwrap().remove(0);
    // Valuation one earns nothing once the rival holds ALL.
    let verdict =
        check_divergence_lemma(e.protocol.as_ref(), mech.strategy(), &domain, 0, &[], &[one, one], &[one_big, all_big])
            .unwrap();
    assert_eq!(verdict, DivergenceVerdict::NotApplicable);
    assert!(check_divergence_lemma(e.protocol.as_ref(), mech.strategy(), &domain, 1, &[], &[one, one], &[one, one]).is_err());
}

#[test]
fn osp_mechanisms_satisfy_divergence() {
    let domain = hard_domain_mua_sm(3).unwrap();
    let mut consistent = 0;
    for name in ["grand-bundle", "random-bundles", "m1-2x2"] {
        let mech = mechanism_by_name(name, 2, domain.setting()).unwrap();
        for e in mech.support(&domain).unwrap() {
            let s = divergence_survey(e.protocol.as_ref(), mech.strategy(), &domain).unwrap();
            assert!(s.violations.is_empty(), "{name} {}", e.label);
            consistent += s.consistent;
        }
    }
    assert!(consistent > 0);
}

#[test]
fn sealed_bid_divergence_survey() {
    let f = protocol_fixture("sealed-bid-2x2").unwrap();
    let s = divergence_survey(&f.tree, &CanonicalStrategy, &f.domain).unwrap();
    assert!(!s.violations.is_empty());
    let (bidder, node, first, second) = &s.violations[0];
    let verdict =
        check_divergence_lemma(&f.tree, &CanonicalStrategy, &f.domain, *bidder, node, first, second).unwrap();
    assert!(matches!(verdict, DivergenceVerdict::Violated { .. }));
}
