//! JSON documents for instances, domains, protocol trees and strategy tables.
//!
//! Rationals are written as `"p/q"` strings. Item bundles are lists of item
//! names, multi-unit bundles are unit counts. Explicit tables are keyed by
//! comma-joined item names, `""` being the empty bundle.

use std::collections::BTreeMap;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::protocol::{
    History, MenuOption, MenuTie, Outcome, PerturbedTie, Prompt, Strategy, TableStrategy, Tree, TreeNodeKind,
};
use crate::protocol::{CanonicalStrategy, NodeSpec};
use crate::rational::{Rational, Q};
use crate::valuations::{
    make_single_minded, Bundle, CombinatorialValuation, Domain, Instance, ItemSet, MultiUnitValuation, Setting,
    Valuation,
};
use crate::welfare::Allocation;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum SettingDoc {
    Multiunit(u32),
    Items(Vec<String>),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ValuationDoc {
    SingleMinded { x: Q, d: u32 },
    MultiUnit { values: Vec<Q> },
    Additive { values: BTreeMap<String, Q> },
    UnitDemand { values: BTreeMap<String, Q> },
    Explicit { values: BTreeMap<String, Q> },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceDoc {
    pub setting: SettingDoc,
    pub bidders: Vec<ValuationDoc>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainDoc {
    pub setting: SettingDoc,
    pub bidders: Vec<Vec<ValuationDoc>>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum BundleDoc {
    Units(u32),
    Items(Vec<String>),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MenuOptionDoc {
    pub bundle: BundleDoc,
    pub price: Q,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerturbedTieDoc {
    pub value_scale: String,
    pub bonus: Vec<String>,
    pub perturbed_price: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MenuTieDoc {
    FirstListed,
    Perturbed(PerturbedTieDoc),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PromptDoc {
    Clock {
        price: Q,
        base: BundleDoc,
        potential: BundleDoc,
    },
    Report {
        options: Vec<ValuationDoc>,
    },
    Menu {
        options: Vec<MenuOptionDoc>,
        tie: MenuTieDoc,
    },
    Opaque,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum NodeDoc {
    Decision {
        id: usize,
        history: History,
        bidder: usize,
        prompt: PromptDoc,
    },
    Leaf {
        id: usize,
        history: History,
        allocation: Vec<BundleDoc>,
        payments: Vec<Q>,
    },
}

impl NodeDoc {
    fn id(&self) -> usize {
        match self {
            NodeDoc::Decision { id, .. } | NodeDoc::Leaf { id, .. } => *id,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EdgeDoc {
    pub from: usize,
    pub message: usize,
    pub to: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TreeDoc {
    pub setting: SettingDoc,
    pub bidders: usize,
    pub nodes: Vec<NodeDoc>,
    pub edges: Vec<EdgeDoc>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StrategyEntryDoc {
    pub bidder: usize,
    pub valuation: ValuationDoc,
    pub history: History,
    pub message: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StrategyDoc {
    /// Entries override the canonical strategy when `canonical_fallback`.
    #[serde(default)]
    pub canonical_fallback: bool,
    pub entries: Vec<StrategyEntryDoc>,
}

pub fn setting_to_doc(s: &Setting) -> SettingDoc {
    match s {
        Setting::MultiUnit { m } => SettingDoc::Multiunit(*m),
        Setting::Combinatorial { items } => SettingDoc::Items(items.clone()),
    }
}

pub fn setting_from_doc(d: &SettingDoc) -> Result<Setting> {
    match d {
        SettingDoc::Multiunit(m) => Setting::multi_unit(*m),
        SettingDoc::Items(items) => Setting::items(items.iter().cloned()),
    }
}

fn items_of(s: &Setting) -> &[String] {
    match s {
        Setting::Combinatorial { items } => items,
        Setting::MultiUnit { .. } => &[],
    }
}

fn set_label(items: &[String], set: ItemSet) -> String {
    set.iter().map(|j| items[j].as_str()).collect::<Vec<_>>().join(",")
}

fn parse_set(s: &Setting, label: &str) -> Result<ItemSet> {
    if label.is_empty() {
        return Ok(ItemSet::EMPTY);
    }
    let mut set = ItemSet::EMPTY;
    for name in label.split(',') {
        let j = s
            .item_index(name.trim())
            .ok_or_else(|| Error::Parse(format!("unknown item {name:?}")))?;
        set = set.with(j);
    }
    Ok(set)
}

pub fn valuation_to_doc(s: &Setting, v: &Valuation) -> ValuationDoc {
    let items = items_of(s);
    let per_item = |xs: &[Rational]| -> BTreeMap<String, Q> {
        items.iter().cloned().zip(xs.iter().map(|x| Q(*x))).collect()
    };
    match v {
        Valuation::MultiUnit(mu) => match mu.single_minded_params() {
            Some(p) => ValuationDoc::SingleMinded { x: Q(p.x), d: p.d },
            None => ValuationDoc::MultiUnit {
                values: mu.values().iter().map(|x| Q(*x)).collect(),
            },
        },
        Valuation::Combinatorial(CombinatorialValuation::Additive(xs)) => ValuationDoc::Additive { values: per_item(xs) },
        Valuation::Combinatorial(CombinatorialValuation::UnitDemand(xs)) => {
            ValuationDoc::UnitDemand { values: per_item(xs) }
        }
        Valuation::Combinatorial(CombinatorialValuation::Explicit(e)) => ValuationDoc::Explicit {
            values: e
                .table()
                .iter()
                .enumerate()
                .map(|(mask, x)| (set_label(items, ItemSet(mask as u64)), Q(*x)))
                .collect(),
        },
    }
}

pub fn valuation_from_doc(s: &Setting, d: &ValuationDoc) -> Result<Valuation> {
    let need_items = || -> Result<&[String]> {
        match s {
            Setting::Combinatorial { items } => Ok(items),
            Setting::MultiUnit { .. } => Err(Error::Parse("item valuation in a multi-unit setting".into())),
        }
    };
    let need_units = || -> Result<u32> {
        match s {
            Setting::MultiUnit { m } => Ok(*m),
            Setting::Combinatorial { .. } => Err(Error::Parse("multi-unit valuation in an item setting".into())),
        }
    };
    let per_item = |values: &BTreeMap<String, Q>| -> Result<Vec<Rational>> {
        let items = need_items()?;
        let mut out = vec![Rational::from_integer(0); items.len()];
        for (name, x) in values {
            let j = s
                .item_index(name)
                .ok_or_else(|| Error::Parse(format!("unknown item {name:?}")))?;
            out[j] = x.0;
        }
        Ok(out)
    };
    Ok(match d {
        ValuationDoc::SingleMinded { x, d } => make_single_minded(x.0, *d, need_units()?)?.into(),
        ValuationDoc::MultiUnit { values } => {
            let m = need_units()?;
            if values.len() != m as usize {
                return Err(Error::Parse(format!("multi-unit valuation needs {m} values")));
            }
            MultiUnitValuation::new(values.iter().map(|x| x.0).collect())?.into()
        }
        ValuationDoc::Additive { values } => CombinatorialValuation::additive(per_item(values)?)?.into(),
        ValuationDoc::UnitDemand { values } => CombinatorialValuation::unit_demand(per_item(values)?)?.into(),
        ValuationDoc::Explicit { values } => {
            let m = need_items()?.len();
            if m > crate::valuations::MAX_EXPLICIT_ITEMS {
                return Err(Error::Parse(format!("explicit tables support at most {} items", crate::valuations::MAX_EXPLICIT_ITEMS)));
            }
            let mut table: Vec<Option<Rational>> = vec![None; 1 << m];
            for (label, x) in values {
                let mask = parse_set(s, label)?.0 as usize;
                if table[mask].replace(x.0).is_some() {
                    return Err(Error::Parse(format!("bundle {label:?} listed twice")));
                }
            }
            let table = table
                .into_iter()
                .enumerate()
                .map(|(mask, x)| {
                    x.ok_or_else(|| {
                        Error::Parse(format!("explicit table lacks {:?}", set_label(need_items().unwrap_or(&[]), ItemSet(mask as u64))))
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            CombinatorialValuation::explicit(m, table)?.into()
        }
    })
}

pub fn instance_to_doc(instance: &Instance) -> InstanceDoc {
    let s = instance.setting();
    InstanceDoc {
        setting: setting_to_doc(s),
        bidders: instance.valuations().iter().map(|v| valuation_to_doc(s, v)).collect(),
    }
}

pub fn instance_from_doc(doc: &InstanceDoc) -> Result<Instance> {
    let s = setting_from_doc(&doc.setting)?;
    let vals = doc
        .bidders
        .iter()
        .map(|d| valuation_from_doc(&s, d))
        .collect::<Result<Vec<_>>>()?;
    Instance::new(s, vals)
}

pub fn instance_to_json(instance: &Instance) -> Result<String> {
    Ok(serde_json::to_string_pretty(&instance_to_doc(instance))?)
}

pub fn instance_from_json(text: &str) -> Result<Instance> {
    instance_from_doc(&serde_json::from_str(text)?)
}

pub fn domain_to_doc(domain: &Domain) -> DomainDoc {
    let s = domain.setting();
    DomainDoc {
        setting: setting_to_doc(s),
        bidders: domain
            .sets()
            .iter()
            .map(|set| set.iter().map(|v| valuation_to_doc(s, v)).collect())
            .collect(),
    }
}

pub fn domain_from_doc(doc: &DomainDoc) -> Result<Domain> {
    let s = setting_from_doc(&doc.setting)?;
    let sets = doc
        .bidders
        .iter()
        .map(|set| set.iter().map(|d| valuation_from_doc(&s, d)).collect::<Result<Vec<_>>>())
        .collect::<Result<Vec<_>>>()?;
    Domain::new(s, sets)
}

pub fn domain_from_json(text: &str) -> Result<Domain> {
    domain_from_doc(&serde_json::from_str(text)?)
}

pub fn bundle_to_doc(s: &Setting, b: &Bundle) -> BundleDoc {
    match b {
        Bundle::Units(q) => BundleDoc::Units(*q),
        Bundle::Items(set) => BundleDoc::Items(set.iter().map(|j| items_of(s)[j].clone()).collect()),
    }
}

pub fn bundle_from_doc(s: &Setting, d: &BundleDoc) -> Result<Bundle> {
    let b = match (d, s) {
        (BundleDoc::Units(q), Setting::MultiUnit { .. }) => Bundle::Units(*q),
        (BundleDoc::Items(names), Setting::Combinatorial { .. }) => Bundle::Items(parse_set(s, &names.join(","))?),
        _ => return Err(Error::Parse("bundle does not match the setting".into())),
    };
    if !s.contains(&b) {
        return Err(Error::Parse("bundle exceeds the supply".into()));
    }
    Ok(b)
}

fn parse_i128(x: &str) -> Result<i128> {
    x.parse().map_err(|_| Error::Parse(format!("bad integer {x:?}")))
}

pub fn prompt_to_doc(s: &Setting, p: &Prompt) -> PromptDoc {
    match p {
        Prompt::Clock { price, base, potential } => PromptDoc::Clock {
            price: Q(*price),
            base: bundle_to_doc(s, base),
            potential: bundle_to_doc(s, potential),
        },
        Prompt::Report { options } => PromptDoc::Report {
            options: options.iter().map(|v| valuation_to_doc(s, v)).collect(),
        },
        Prompt::Menu { options, tie } => PromptDoc::Menu {
            options: options
                .iter()
                .map(|o| MenuOptionDoc {
                    bundle: bundle_to_doc(s, &o.bundle),
                    price: Q(o.price),
                })
                .collect(),
            tie: match tie {
                MenuTie::FirstListed => MenuTieDoc::FirstListed,
                MenuTie::Perturbed(t) => MenuTieDoc::Perturbed(PerturbedTieDoc {
                    value_scale: t.value_scale.to_string(),
                    bonus: t.bonus.iter().map(i128::to_string).collect(),
                    perturbed_price: t.perturbed_price.iter().map(i128::to_string).collect(),
                }),
            },
        },
        Prompt::Opaque => PromptDoc::Opaque,
    }
}

pub fn prompt_from_doc(s: &Setting, d: &PromptDoc) -> Result<Prompt> {
    Ok(match d {
        PromptDoc::Clock { price, base, potential } => Prompt::Clock {
            price: price.0,
            base: bundle_from_doc(s, base)?,
            potential: bundle_from_doc(s, potential)?,
        },
        PromptDoc::Report { options } => Prompt::Report {
            options: options
                .iter()
                .map(|v| valuation_from_doc(s, v))
                .collect::<Result<Vec<_>>>()?
                .into(),
        },
        PromptDoc::Menu { options, tie } => Prompt::Menu {
            options: options
                .iter()
                .map(|o| {
                    Ok(MenuOption {
                        bundle: bundle_from_doc(s, &o.bundle)?,
                        price: o.price.0,
                    })
                })
                .collect::<Result<Vec<_>>>()?,
            tie: match tie {
                MenuTieDoc::FirstListed => MenuTie::FirstListed,
                MenuTieDoc::Perturbed(t) => MenuTie::Perturbed(PerturbedTie {
                    value_scale: parse_i128(&t.value_scale)?,
                    bonus: t.bonus.iter().map(|x| parse_i128(x)).collect::<Result<_>>()?,
                    perturbed_price: t.perturbed_price.iter().map(|x| parse_i128(x)).collect::<Result<_>>()?,
                }),
            },
        },
        PromptDoc::Opaque => Prompt::Opaque,
    })
}

pub fn tree_to_doc(tree: &Tree) -> TreeDoc {
    let s = tree.setting();
    let mut nodes = Vec::with_capacity(tree.len());
    let mut edges = Vec::new();
    for (id, node) in tree.nodes().iter().enumerate() {
        match &node.kind {
            TreeNodeKind::Leaf(o) => nodes.push(NodeDoc::Leaf {
                id,
                history: node.history.clone(),
                allocation: o.allocation.bundles.iter().map(|b| bundle_to_doc(s, b)).collect(),
                payments: o.payments.iter().map(|p| Q(*p)).collect(),
            }),
            TreeNodeKind::Decision { bidder, prompt, children } => {
                nodes.push(NodeDoc::Decision {
                    id,
                    history: node.history.clone(),
                    bidder: *bidder,
                    prompt: prompt_to_doc(s, prompt),
                });
                edges.extend(children.iter().enumerate().map(|(message, &to)| EdgeDoc { from: id, message, to }));
            }
        }
    }
    TreeDoc {
        setting: setting_to_doc(s),
        bidders: tree.bidders(),
        nodes,
        edges,
    }
}

/// Rebuilds a tree; node 0 is the root and single-child nodes are contracted.
pub fn tree_from_doc(doc: &TreeDoc) -> Result<Tree> {
    let s = setting_from_doc(&doc.setting)?;
    let by_id: BTreeMap<usize, &NodeDoc> = doc.nodes.iter().map(|n| (n.id(), n)).collect();
    if by_id.len() != doc.nodes.len() {
        return Err(Error::Parse("duplicate node ids".into()));
    }
    let mut children: BTreeMap<usize, BTreeMap<usize, usize>> = BTreeMap::new();
    for e in &doc.edges {
        if children.entry(e.from).or_default().insert(e.message, e.to).is_some() {
            return Err(Error::Parse(format!("node {} has two edges for message {}", e.from, e.message)));
        }
    }
    fn build(
        id: usize,
        depth: usize,
        s: &Setting,
        by_id: &BTreeMap<usize, &NodeDoc>,
        children: &BTreeMap<usize, BTreeMap<usize, usize>>,
    ) -> Result<NodeSpec> {
        if depth > by_id.len() {
            return Err(Error::Parse("protocol graph has a cycle".into()));
        }
        let node = by_id.get(&id).ok_or_else(|| Error::Parse(format!("missing node {id}")))?;
        Ok(match node {
            NodeDoc::Leaf { allocation, payments, .. } => NodeSpec::Leaf(Outcome {
                allocation: Allocation {
                    bundles: allocation.iter().map(|b| bundle_from_doc(s, b)).collect::<Result<_>>()?,
                },
                payments: payments.iter().map(|p| p.0).collect(),
            }),
            NodeDoc::Decision { bidder, prompt, .. } => {
                let kids = children.get(&id).cloned().unwrap_or_default();
                if kids.keys().copied().ne(0..kids.len()) {
                    return Err(Error::Parse(format!("messages of node {id} are not 0..k")));
                }
                NodeSpec::Decision {
                    bidder: *bidder,
                    prompt: prompt_from_doc(s, prompt)?,
                    children: kids
                        .values()
                        .map(|&c| build(c, depth + 1, s, by_id, children))
                        .collect::<Result<_>>()?,
                }
            }
        })
    }
    let root = build(0, 0, &s, &by_id, &children)?;
    Tree::from_spec(doc.bidders, s, root)
}

pub fn tree_to_json(tree: &Tree) -> Result<String> {
    Ok(serde_json::to_string_pretty(&tree_to_doc(tree))?)
}

pub fn tree_from_json(text: &str) -> Result<Tree> {
    tree_from_doc(&serde_json::from_str(text)?)
}

pub fn strategy_to_doc(s: &Setting, table: &TableStrategy, canonical_fallback: bool) -> StrategyDoc {
    StrategyDoc {
        canonical_fallback,
        entries: table
            .entries()
            .into_iter()
            .map(|(bidder, v, history, message)| StrategyEntryDoc {
                bidder,
                valuation: valuation_to_doc(s, v),
                history: history.clone(),
                message,
            })
            .collect(),
    }
}

pub fn strategy_from_doc(s: &Setting, doc: &StrategyDoc) -> Result<Box<dyn Strategy>> {
    let mut table = if doc.canonical_fallback {
        TableStrategy::with_fallback(Box::new(CanonicalStrategy))
    } else {
        TableStrategy::new()
    };
    for e in &doc.entries {
        table.set(e.bidder, &valuation_from_doc(s, &e.valuation)?, &e.history, e.message);
    }
    Ok(Box::new(table))
}

pub fn strategy_from_json(s: &Setting, text: &str) -> Result<Box<dyn Strategy>> {
    strategy_from_doc(s, &serde_json::from_str(text)?)
}
