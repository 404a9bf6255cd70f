//! Size caps for exhaustive computations.
//!
//! Defaults can be overridden through the `OSP_AUCTIONS_CAPS` environment
//! variable, a comma separated list such as
//! `max_tree_nodes=2000000,max_profiles=500000`.

use std::sync::OnceLock;

use crate::error::{Error, Result};

pub const CAPS_ENV: &str = "OSP_AUCTIONS_CAPS";

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Caps {
    /// Nodes in a materialized protocol tree.
    pub max_tree_nodes: usize,
    /// Valuation profiles in a realized rule or domain product.
    pub max_profiles: usize,
    /// Inner-loop work of an exact welfare computation.
    pub max_opt_work: u128,
    /// Allocations enumerated by the brute-force oracle.
    pub max_brute_force: u128,
    /// Elements of an enumerated mechanism support.
    pub max_support: usize,
}

impl Default for Caps {
    fn default() -> Self {
        Caps {
            max_tree_nodes: 2_000_000,
            max_profiles: 2_000_000,
            max_opt_work: 200_000_000,
            max_brute_force: 20_000_000,
            max_support: 1 << 17,
        }
    }
}

impl Caps {
    /// Parses an override string on top of the defaults.
    pub fn parse_overrides(spec: &str) -> Result<Caps> {
        let mut caps = Caps::default();
        for part in spec.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let (key, value) = part
                .split_once('=')
                .ok_or_else(|| Error::Parse(format!("cap override {part:?} lacks '='")))?;
            let bad = || Error::Parse(format!("cap override {part:?} has a bad value"));
            let value: u128 = value.trim().parse().map_err(|_| bad())?;
            let as_usize = || usize::try_from(value).map_err(|_| bad());
            match key.trim() {
                "max_tree_nodes" => caps.max_tree_nodes = as_usize()?,
                "max_profiles" => caps.max_profiles = as_usize()?,
                "max_opt_work" => caps.max_opt_work = value,
                "max_brute_force" => caps.max_brute_force = value,
                "max_support" => caps.max_support = as_usize()?,
                other => return Err(Error::Parse(format!("unknown cap {other:?}"))),
            }
        }
        Ok(caps)
    }

    /// Caps read once from the environment; malformed overrides fall back to
    /// the defaults. Use [`Caps::from_env`] to surface the parse error.
    pub fn global() -> &'static Caps {
        static CAPS: OnceLock<Caps> = OnceLock::new();
        CAPS.get_or_init(|| Caps::from_env().unwrap_or_default())
    }

    pub fn from_env() -> Result<Caps> {
        match std::env::var(CAPS_ENV) {
            Ok(spec) => Caps::parse_overrides(&spec),
            Err(_) => Ok(Caps::default()),
        }
    }
}
