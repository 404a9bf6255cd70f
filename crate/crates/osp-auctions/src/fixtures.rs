//! Built-in instances and protocols.

use num_traits::Zero;

use crate::error::{Error, Result};
use crate::experiments::ud_failure_instance;
use crate::protocol::{MenuOption, MenuTie, NodeSpec, Outcome, Prompt, Tree};
use crate::rational::{int, Rational};
use crate::valuations::{
    make_single_minded, Bundle, CombinatorialValuation, Domain, Instance, MultiUnitValuation, Setting, Valuation,
};
use crate::welfare::Allocation;

pub const INSTANCE_FIXTURES: &[(&str, &str)] = &[
    ("i1-mua-sm", "two units, two bidders wanting one unit at value 1"),
    ("knapsack-3", "three units, single-minded demands 2, 1, 2"),
    ("random-bundles-3", "four units, single-minded demands 1, 2, 4"),
    ("m1-example", "six units, four single-minded bidders"),
    ("critical-sm", "four units, one bidder holding most of the welfare"),
    ("three-item-dm", "three units, two decreasing-marginal bidders"),
    ("additive-split", "additive bidders preferring different items"),
    ("subadd-split", "subadditive bidders each wanting one item"),
    ("ud-failure-16", "16 unit-demand bidders, 4 of them high, 16 items"),
    ("sampling-uniform-12", "12 bidders, 12 units, demand 1 at value 1"),
    ("sampling-eleven", "11 bidders, 11 units, demand 1 at value 1"),
    ("sampling-pairs-12", "12 bidders, 24 units, demand 2 at values 10 to 12"),
    ("sampling-200", "200 bidders, 200 units, demand 1 at value 1"),
];

pub const PROTOCOL_FIXTURES: &[(&str, &str)] = &[
    ("sealed-bid-2x2", "sequential sealed-bid second-price auction for one unit, bids 0..3"),
    ("posted-price-2x2", "one unit offered at price 2 to each bidder in turn, values 0..3"),
];

fn sm(x: i128, d: u32, m: u32) -> Result<MultiUnitValuation> {
    make_single_minded(int(x), d, m)
}

fn dm(marginals: &[i128]) -> Result<MultiUnitValuation> {
    MultiUnitValuation::from_marginals(&marginals.iter().map(|&x| int(x)).collect::<Vec<_>>())
}

fn explicit(a: i128, b: i128, ab: i128) -> Result<CombinatorialValuation> {
    CombinatorialValuation::explicit(2, vec![Rational::zero(), int(a), int(b), int(ab)])
}

fn additive(xs: &[i128]) -> Result<CombinatorialValuation> {
    CombinatorialValuation::additive(xs.iter().map(|&x| int(x)).collect())
}

pub fn instance_fixture(name: &str) -> Result<Instance> {
    match name {
        "i1-mua-sm" => Instance::multi_unit(2, vec![sm(1, 1, 2)?, sm(1, 1, 2)?]),
        "knapsack-3" => Instance::multi_unit(3, vec![sm(5, 2, 3)?, sm(3, 1, 3)?, sm(4, 2, 3)?]),
        "random-bundles-3" => Instance::multi_unit(4, vec![sm(3, 1, 4)?, sm(4, 2, 4)?, sm(6, 4, 4)?]),
        "m1-example" => Instance::multi_unit(6, vec![sm(6, 3, 6)?, sm(5, 2, 6)?, sm(2, 1, 6)?, sm(4, 4, 6)?]),
        "critical-sm" => Instance::multi_unit(4, vec![sm(10, 4, 4)?, sm(1, 1, 4)?, sm(1, 1, 4)?]),
        "three-item-dm" => Instance::multi_unit(3, vec![dm(&[4, 3, 1])?, dm(&[3, 2, 0])?]),
        "additive-split" => Instance::lettered(vec![additive(&[3, 1])?, additive(&[1, 3])?]),
        "subadd-split" => Instance::lettered(vec![explicit(2, 0, 2)?, explicit(0, 2, 2)?]),
        "ud-failure-16" => ud_failure_instance(16),
        "sampling-uniform-12" => Instance::multi_unit(12, (0..12).map(|_| sm(1, 1, 12)).collect::<Result<_>>()?),
        "sampling-eleven" => Instance::multi_unit(11, (0..11).map(|_| sm(1, 1, 11)).collect::<Result<_>>()?),
        "sampling-pairs-12" => {
            Instance::multi_unit(24, (0..12).map(|i| sm(10 + (i % 3), 2, 24)).collect::<Result<_>>()?)
        }
        "sampling-200" => Instance::multi_unit(200, (0..200).map(|_| sm(1, 1, 200)).collect::<Result<_>>()?),
        other => Err(Error::Parse(format!("unknown instance fixture {other:?}"))),
    }
}

/// A hand-built protocol with the domain it is meant to be checked on.
#[derive(Clone, Debug)]
pub struct ProtocolFixture {
    pub tree: Tree,
    pub domain: Domain,
}

fn single_unit_bids() -> Result<Vec<Valuation>> {
    (0..4).map(|x| Ok(sm(x, 1, 1)?.into())).collect()
}

fn leaf(bundles: [u32; 2], payments: [Rational; 2]) -> NodeSpec {
    NodeSpec::Leaf(Outcome {
        allocation: Allocation {
            bundles: bundles.iter().map(|&q| Bundle::Units(q)).collect(),
        },
        payments: payments.to_vec(),
    })
}

/// Bidder 0 reports, then bidder 1; the higher report wins at the lower
/// one, ties going to bidder 0.
fn sealed_bid() -> Result<ProtocolFixture> {
    let bids = single_unit_bids()?;
    let setting = Setting::multi_unit(1)?;
    let options: std::sync::Arc<[Valuation]> = bids.clone().into();
    let children = (0..4i128)
        .map(|b0| NodeSpec::Decision {
            bidder: 1,
            prompt: Prompt::Report { options: options.clone() },
            children: (0..4i128)
                .map(|b1| {
                    if b0 >= b1 {
                        leaf([1, 0], [int(b1), int(0)])
                    } else {
                        leaf([0, 1], [int(0), int(b0)])
                    }
                })
                .collect(),
        })
        .collect();
    let root = NodeSpec::Decision {
        bidder: 0,
        prompt: Prompt::Report { options },
        children,
    };
    Ok(ProtocolFixture {
        tree: Tree::from_spec(2, setting.clone(), root)?,
        domain: Domain::uniform(setting, 2, bids)?,
    })
}

fn posted_price() -> Result<ProtocolFixture> {
    let bids = single_unit_bids()?;
    let setting = Setting::multi_unit(1)?;
    let menu = || Prompt::Menu {
        options: vec![
            MenuOption {
                bundle: Bundle::Units(0),
                price: int(0),
            },
            MenuOption {
                bundle: Bundle::Units(1),
                price: int(2),
            },
        ],
        tie: MenuTie::FirstListed,
    };
    let second = NodeSpec::Decision {
        bidder: 1,
        prompt: menu(),
        children: vec![leaf([0, 0], [int(0), int(0)]), leaf([0, 1], [int(0), int(2)])],
    };
    let root = NodeSpec::Decision {
        bidder: 0,
        prompt: menu(),
        children: vec![second, leaf([1, 0], [int(2), int(0)])],
    };
    Ok(ProtocolFixture {
        tree: Tree::from_spec(2, setting.clone(), root)?,
        domain: Domain::uniform(setting, 2, bids)?,
    })
}

pub fn protocol_fixture(name: &str) -> Result<ProtocolFixture> {
    match name {
        "sealed-bid-2x2" => sealed_bid(),
        "posted-price-2x2" => posted_price(),
        other => Err(Error::Parse(format!("unknown protocol fixture {other:?}"))),
    }
}
