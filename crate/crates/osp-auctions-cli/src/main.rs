//! Command-line front end: simulations, OSP verification, lower-bound
//! distributions, worst-case search and the sampling experiment.
//!
//! Exit codes: 0 on success, 1 when a verification fails (the witness is
//! printed), 2 on usage, input or cap errors.

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use osp_auctions::caps::Caps;
use osp_auctions::experiments::{
    eval_on_distribution, exact_ratio, hard_dist_additive, hard_dist_mua_sm, hard_dist_unit_demand, mc_ratio,
    sampling_lemma_experiment, worst_case_search, GridSpec, ProfileDistribution, RatioReport, SamplingMethod,
};
use osp_auctions::fixtures::{instance_fixture, protocol_fixture, INSTANCE_FIXTURES, PROTOCOL_FIXTURES};
use osp_auctions::json::{domain_from_json, instance_from_json, instance_to_doc, strategy_from_json, tree_from_json, valuation_to_doc};
use osp_auctions::mechanisms::{mechanism_by_name, MECHANISM_NAMES};
use osp_auctions::osp::{verify_ir_nnt, verify_osp, OspVerdict, OspWitness};
use osp_auctions::protocol::{Behavior, CanonicalStrategy, Protocol, Strategy};
use osp_auctions::rational::{format_rational, parse_rational};
use osp_auctions::rng::GENERATOR;
use osp_auctions::valuations::{Domain, Instance, Setting};
use osp_auctions::welfare::opt;
use osp_auctions::Rational;

const DEFAULT_SEED: u64 = 20_240_601;
const DEFAULT_TRIALS: u64 = 10_000;

#[derive(Parser, Debug)]
#[command(name = "osp-auctions", version, about = "Randomized OSP auctions: verification and welfare experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Seed for every randomized step.
    #[arg(long, global = true, default_value_t = DEFAULT_SEED)]
    seed: u64,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
    /// Output file, `-` for stdout.
    #[arg(long, global = true, default_value = "-")]
    output: String,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum Format {
    Json,
    Csv,
}

#[derive(Args, Debug, Clone)]
struct Source {
    /// Built-in fixture name.
    #[arg(long, conflicts_with = "instance")]
    fixture: Option<String>,
    /// Instance JSON file.
    #[arg(long)]
    instance: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Welfare of a mechanism on one instance.
    Simulate {
        #[arg(long)]
        mechanism: String,
        #[command(flatten)]
        source: Source,
        #[arg(long, default_value_t = DEFAULT_TRIALS)]
        trials: u64,
        /// Sum over the whole support instead of sampling.
        #[arg(long)]
        exact: bool,
    },
    /// Exhaustive OSP, IR and no-negative-transfer check.
    VerifyOsp {
        /// Built-in protocol fixture.
        #[arg(long, conflicts_with_all = ["protocol", "mechanism"])]
        fixture: Option<String>,
        /// Protocol tree JSON file.
        #[arg(long, conflicts_with = "mechanism", requires = "domain")]
        protocol: Option<PathBuf>,
        /// Check every protocol in the support of a mechanism.
        #[arg(long, requires = "domain")]
        mechanism: Option<String>,
        /// Domain JSON file.
        #[arg(long)]
        domain: Option<PathBuf>,
        /// Strategy table JSON file; canonical strategies otherwise.
        #[arg(long)]
        strategy: Option<PathBuf>,
    },
    /// Expected ratio on a hard distribution.
    LowerBound {
        #[arg(long, value_enum)]
        setting: HardSetting,
        #[arg(long)]
        k: u64,
        #[arg(long)]
        mechanism: String,
    },
    /// Worst exact ratio over a valuation grid.
    Search {
        #[arg(long)]
        mechanism: String,
        /// `class:NxM:max`, e.g. `additive:2x2:3`.
        #[arg(long)]
        grid: GridSpec,
        #[arg(long, default_value_t = 100_000)]
        budget: u64,
    },
    /// Frequency of balanced random partitions.
    SamplingLemma {
        #[command(flatten)]
        source: Source,
        /// Criticality threshold.
        #[arg(long, default_value = "1/10", value_parser = parse_q)]
        threshold: Rational,
        #[arg(long, default_value_t = DEFAULT_TRIALS)]
        trials: u64,
    },
    /// Built-in fixtures and mechanisms.
    ListFixtures,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
enum HardSetting {
    MuaSm,
    Additive,
    UnitDemand,
}

fn parse_q(s: &str) -> Result<Rational, String> {
    parse_rational(s).map_err(|e| e.to_string())
}

#[derive(Serialize)]
struct RunConfig<'a> {
    subcommand: &'a str,
    instance: Option<String>,
    mechanism: Option<&'a str>,
    seed: u64,
    trials: Option<u64>,
    k: Option<u64>,
    format: Format,
    exact: bool,
    output: &'a str,
    extra: Value,
    caps: Value,
    generator: &'static str,
}

enum Failure {
    Usage(String),
    Lib(osp_auctions::Error),
}

impl From<osp_auctions::Error> for Failure {
    fn from(e: osp_auctions::Error) -> Self {
        Failure::Lib(e)
    }
}

type CliResult<T> = Result<T, Failure>;

/// Rendered output and whether a verification failed.
struct Report {
    json: Value,
    csv: Vec<Vec<String>>,
    failed: bool,
}

fn q(r: &Rational) -> String {
    format_rational(r)
}

fn read(path: &PathBuf) -> CliResult<String> {
    std::fs::read_to_string(path).map_err(|e| Failure::Usage(format!("cannot read {}: {e}", path.display())))
}

fn load_instance(source: &Source) -> CliResult<(Instance, String)> {
    match (&source.fixture, &source.instance) {
        (Some(name), None) => Ok((instance_fixture(name)?, name.clone())),
        (None, Some(path)) => Ok((instance_from_json(&read(path)?)?, path.display().to_string())),
        _ => Err(Failure::Usage("give exactly one of --fixture or --instance".into())),
    }
}

fn source_label(source: &Source) -> Option<String> {
    source
        .fixture
        .clone()
        .or_else(|| source.instance.as_ref().map(|p| p.display().to_string()))
}

fn caps_json(c: &Caps) -> Value {
    json!({
        "max_tree_nodes": c.max_tree_nodes,
        "max_profiles": c.max_profiles,
        "max_opt_work": c.max_opt_work.to_string(),
        "max_brute_force": c.max_brute_force.to_string(),
        "max_support": c.max_support,
    })
}

fn log_config(cli: &Cli, caps: &Caps) {
    let mut cfg = RunConfig {
        subcommand: "",
        instance: None,
        mechanism: None,
        seed: cli.seed,
        trials: None,
        k: None,
        format: cli.format,
        exact: false,
        output: &cli.output,
        extra: Value::Null,
        caps: caps_json(caps),
        generator: GENERATOR,
    };
    match &cli.command {
        Command::Simulate { mechanism, source, trials, exact } => {
            cfg.subcommand = "simulate";
            cfg.instance = source_label(source);
            cfg.mechanism = Some(mechanism);
            cfg.trials = (!exact).then_some(*trials);
            cfg.exact = *exact;
        }
        Command::VerifyOsp { fixture, protocol, mechanism, domain, strategy } => {
            cfg.subcommand = "verify-osp";
            cfg.instance = fixture.clone();
            cfg.mechanism = mechanism.as_deref();
            cfg.extra = json!({
                "protocol": protocol.as_ref().map(|p| p.display().to_string()),
                "domain": domain.as_ref().map(|p| p.display().to_string()),
                "strategy": strategy.as_ref().map(|p| p.display().to_string()),
            });
        }
        Command::LowerBound { setting, k, mechanism } => {
            cfg.subcommand = "lower-bound";
            cfg.mechanism = Some(mechanism);
            cfg.k = Some(*k);
            cfg.exact = true;
            cfg.extra = json!({ "setting": setting });
        }
        Command::Search { mechanism, grid, budget } => {
            cfg.subcommand = "search";
            cfg.mechanism = Some(mechanism);
            cfg.extra = json!({ "grid": grid.to_string(), "budget": budget });
        }
        Command::SamplingLemma { source, threshold, trials } => {
            cfg.subcommand = "sampling-lemma";
            cfg.instance = source_label(source);
            cfg.trials = Some(*trials);
            cfg.extra = json!({ "threshold": q(threshold) });
        }
        Command::ListFixtures => cfg.subcommand = "list-fixtures",
    }
    eprintln!("config {}", serde_json::to_string(&cfg).expect("config serializes"));
}

fn simulate(mechanism: &str, source: &Source, trials: u64, exact: bool, seed: u64) -> CliResult<Report> {
    let (inst, label) = load_instance(source)?;
    let mech = mechanism_by_name(mechanism, inst.n(), inst.setting())?;
    let optimum = opt(&inst)?.value;
    let report = if exact {
        exact_ratio(mech.as_ref(), &inst)?
    } else {
        mc_ratio(mech.as_ref(), &inst, trials, seed)?
    };
    let welfare = report.breakdown[0].welfare;
    let mut out = json!({
        "mechanism": mechanism,
        "instance": label,
        "opt": q(&optimum),
        "expected_welfare": q(&welfare),
    });
    let mut row = vec![mechanism.to_string(), label, q(&optimum), q(&welfare)];
    match report.expected.exact() {
        Some(r) => {
            out["ratio"] = json!(q(&r));
            out["ci"] = Value::Null;
            row.extend([q(&r), String::new(), String::new(), String::new()]);
        }
        None => {
            let (est, se) = (report.expected.estimate(), report.expected.stderr());
            out["ratio"] = json!(est);
            out["stderr"] = json!(se);
            out["ci"] = json!([est - 1.96 * se, est + 1.96 * se]);
            out["trials"] = json!(trials);
            out["seed"] = json!(seed);
            out["generator"] = json!(GENERATOR);
            row.extend([est.to_string(), se.to_string(), trials.to_string(), seed.to_string()]);
        }
    }
    let header = ["mechanism", "instance", "opt", "expected_welfare", "ratio", "stderr", "trials", "seed"];
    Ok(Report {
        json: out,
        csv: vec![header.map(String::from).to_vec(), row],
        failed: false,
    })
}

fn behaviors_json(bs: &[Behavior]) -> Value {
    Value::Array(
        bs.iter()
            .map(|b| {
                Value::Array(
                    b.moves
                        .iter()
                        .map(|(h, m)| json!({ "history": h, "message": m }))
                        .collect(),
                )
            })
            .collect(),
    )
}

fn witness_json(setting: &Setting, w: &OspWitness) -> Value {
    json!({
        "node": w.node,
        "bidder": w.bidder,
        "valuation_index": w.valuation_index,
        "valuation": valuation_to_doc(setting, &w.valuation),
        "truthful_message": w.truthful_message,
        "deviating_message": w.deviating_message,
        "worst_truthful_utility": q(&w.worst_truthful_utility),
        "best_deviating_utility": q(&w.best_deviating_utility),
        "truthful_leaf": w.truthful_leaf,
        "deviating_leaf": w.deviating_leaf,
        "truthful_behaviors": behaviors_json(&w.truthful_behaviors),
        "deviating_behaviors": behaviors_json(&w.deviating_behaviors),
    })
}

const VERIFY_HEADER: [&str; 10] = [
    "protocol",
    "verdict",
    "tree_nodes",
    "checks",
    "bidder",
    "node",
    "valuation_index",
    "truthful_message",
    "deviating_message",
    "utilities",
];

/// Verifies one protocol; returns the JSON entry, the CSV row and whether it passed.
fn verify_one(
    label: &str,
    protocol: &dyn Protocol,
    strategy: &dyn Strategy,
    domain: &Domain,
) -> CliResult<(Value, Vec<String>, bool)> {
    let setting = domain.setting();
    let verdict = verify_osp(protocol, strategy, domain)?;
    let ir_nnt = verify_ir_nnt(protocol, strategy, domain)?;
    let ir = ir_nnt.ir.as_ref().map(|v| {
        json!({ "profile": v.profile, "bidder": v.bidder, "utility": q(&v.utility) })
    });
    let nnt = ir_nnt.nnt.as_ref().map(|v| {
        json!({ "leaf": v.leaf, "bidder": v.bidder, "payment": q(&v.payment) })
    });
    let pass = verdict.is_pass() && ir_nnt.is_pass();
    let mut entry = json!({
        "protocol": label,
        "verdict": if pass { "pass" } else { "fail" },
        "osp": verdict.is_pass(),
        "ir_violation": ir,
        "nnt_violation": nnt,
    });
    let mut row = vec![label.to_string(), entry["verdict"].as_str().unwrap_or_default().to_string()];
    match &verdict {
        OspVerdict::Pass { tree_nodes, checks } => {
            entry["tree_nodes"] = json!(tree_nodes);
            entry["checks"] = json!(checks);
            row.extend([tree_nodes.to_string(), checks.to_string()]);
            row.extend(std::iter::repeat_n(String::new(), 6));
        }
        OspVerdict::Fail(w) => {
            entry["witness"] = witness_json(setting, w);
            row.extend([String::new(), String::new()]);
            row.extend([
                w.bidder.to_string(),
                format!("{:?}", w.node),
                w.valuation_index.to_string(),
                w.truthful_message.to_string(),
                w.deviating_message.to_string(),
                format!("{} < {}", q(&w.worst_truthful_utility), q(&w.best_deviating_utility)),
            ]);
        }
    }
    Ok((entry, row, pass))
}

fn verify(
    fixture: Option<&str>,
    protocol: Option<&PathBuf>,
    mechanism: Option<&str>,
    domain: Option<&PathBuf>,
    strategy: Option<&PathBuf>,
) -> CliResult<Report> {
    let load_domain = || -> CliResult<Domain> {
        let path = domain.ok_or_else(|| Failure::Usage("--domain is required".into()))?;
        Ok(domain_from_json(&read(path)?)?)
    };
    let load_strategy = |setting: &Setting| -> CliResult<Box<dyn Strategy>> {
        match strategy {
            Some(path) => Ok(strategy_from_json(setting, &read(path)?)?),
            None => Ok(Box::new(CanonicalStrategy)),
        }
    };
    let mut entries = Vec::new();
    let mut rows = vec![VERIFY_HEADER.map(String::from).to_vec()];
    let mut failed = false;
    let mut push = |(entry, row, pass): (Value, Vec<String>, bool)| {
        failed |= !pass;
        entries.push(entry);
        rows.push(row);
    };
    match (fixture, protocol, mechanism) {
        (Some(name), None, None) => {
            let f = protocol_fixture(name)?;
            let domain = match domain {
                Some(_) => load_domain()?,
                None => f.domain.clone(),
            };
            let strategy = load_strategy(domain.setting())?;
            push(verify_one(name, &f.tree, strategy.as_ref(), &domain)?);
        }
        (None, Some(path), None) => {
            let tree = tree_from_json(&read(path)?)?;
            let domain = load_domain()?;
            let strategy = load_strategy(domain.setting())?;
            push(verify_one(&path.display().to_string(), &tree, strategy.as_ref(), &domain)?);
        }
        (None, None, Some(name)) => {
            let domain = load_domain()?;
            let mech = mechanism_by_name(name, domain.n(), domain.setting())?;
            for e in mech.support(&domain)? {
                let label = format!("{name}[{}]", e.label);
                push(verify_one(&label, e.protocol.as_ref(), mech.strategy(), &domain)?);
            }
        }
        _ => return Err(Failure::Usage("give one of --fixture, --protocol or --mechanism".into())),
    }
    Ok(Report {
        json: json!({
            "verdict": if failed { "fail" } else { "pass" },
            "protocols": entries,
        }),
        csv: rows,
        failed,
    })
}

fn report_rows(report: &RatioReport) -> Vec<Vec<String>> {
    let mut rows = vec![["profile", "probability", "welfare", "opt", "ratio"].map(String::from).to_vec()];
    for p in &report.breakdown {
        rows.push(vec![p.label.clone(), q(&p.probability), q(&p.welfare), q(&p.opt), q(&p.ratio)]);
    }
    rows
}

fn lower_bound(setting: HardSetting, k: u64, mechanism: &str) -> CliResult<Report> {
    let dist: ProfileDistribution = match setting {
        HardSetting::MuaSm => hard_dist_mua_sm(k)?,
        HardSetting::Additive => hard_dist_additive(k)?,
        HardSetting::UnitDemand => hard_dist_unit_demand(k)?,
    };
    let mech = mechanism_by_name(mechanism, dist.n(), dist.setting())?;
    let report = eval_on_distribution(mech.as_ref(), &dist)?;
    Ok(Report {
        json: report.to_json(),
        csv: report_rows(&report),
        failed: false,
    })
}

fn search(mechanism: &str, grid: &GridSpec, budget: u64, seed: u64) -> CliResult<Report> {
    let r = worst_case_search(mechanism, grid, budget, seed)?;
    let (ratio, instance) = match &r.worst {
        Some((inst, ratio)) => (json!(q(ratio)), serde_json::to_value(instance_to_doc(inst)).expect("serializes")),
        None => (Value::Null, Value::Null),
    };
    let row = vec![
        mechanism.to_string(),
        grid.to_string(),
        r.exhaustive.to_string(),
        r.evaluated.to_string(),
        ratio.as_str().unwrap_or_default().to_string(),
    ];
    Ok(Report {
        json: json!({
            "mechanism": mechanism,
            "grid": grid.to_string(),
            "exhaustive": r.exhaustive,
            "evaluated": r.evaluated,
            "seed": (!r.exhaustive).then_some(seed),
            "worst_ratio": ratio,
            "worst_instance": instance,
        }),
        csv: vec![["mechanism", "grid", "exhaustive", "evaluated", "worst_ratio"].map(String::from).to_vec(), row],
        failed: false,
    })
}

fn sampling(source: &Source, threshold: Rational, trials: u64, seed: u64) -> CliResult<Report> {
    let (inst, label) = load_instance(source)?;
    let r = sampling_lemma_experiment(&inst, threshold, trials, seed)?;
    let method = match r.method {
        SamplingMethod::Exact => json!("exact"),
        SamplingMethod::MonteCarlo { trials, seed } => {
            json!({ "monte_carlo": { "trials": trials, "seed": seed, "generator": GENERATOR } })
        }
    };
    let row = vec![
        label.clone(),
        r.n.to_string(),
        q(&r.threshold),
        r.hits.to_string(),
        r.total.to_string(),
        q(&r.frequency),
        r.stderr.to_string(),
    ];
    Ok(Report {
        json: json!({
            "instance": label,
            "n": r.n,
            "threshold": q(&r.threshold),
            "method": method,
            "hits": r.hits,
            "total": r.total,
            "frequency": q(&r.frequency),
            "stderr": r.stderr,
        }),
        csv: vec![
            ["instance", "n", "threshold", "hits", "total", "frequency", "stderr"].map(String::from).to_vec(),
            row,
        ],
        failed: false,
    })
}

fn list_fixtures() -> Report {
    let mut rows = vec![["kind", "name", "description"].map(String::from).to_vec()];
    for (name, desc) in INSTANCE_FIXTURES {
        rows.push(vec!["instance".into(), name.to_string(), desc.to_string()]);
    }
    for (name, desc) in PROTOCOL_FIXTURES {
        rows.push(vec!["protocol".into(), name.to_string(), desc.to_string()]);
    }
    for name in MECHANISM_NAMES {
        rows.push(vec!["mechanism".into(), name.to_string(), String::new()]);
    }
    let pairs = |xs: &[(&str, &str)]| -> Value {
        xs.iter().map(|(n, d)| json!({ "name": n, "description": d })).collect()
    };
    Report {
        json: json!({
            "instances": pairs(INSTANCE_FIXTURES),
            "protocols": pairs(PROTOCOL_FIXTURES),
            "mechanisms": MECHANISM_NAMES,
        }),
        csv: rows,
        failed: false,
    }
}

fn render(report: &Report, format: Format) -> CliResult<Vec<u8>> {
    match format {
        Format::Json => {
            let mut out = serde_json::to_vec_pretty(&report.json).expect("report serializes");
            out.push(b'\n');
            Ok(out)
        }
        Format::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            for row in &report.csv {
                w.write_record(row).map_err(|e| Failure::Usage(e.to_string()))?;
            }
            w.into_inner().map_err(|e| Failure::Usage(e.to_string()))
        }
    }
}

fn execute(cli: &Cli) -> CliResult<Report> {
    match &cli.command {
        Command::Simulate { mechanism, source, trials, exact } => simulate(mechanism, source, *trials, *exact, cli.seed),
        Command::VerifyOsp { fixture, protocol, mechanism, domain, strategy } => verify(
            fixture.as_deref(),
            protocol.as_ref(),
            mechanism.as_deref(),
            domain.as_ref(),
            strategy.as_ref(),
        ),
        Command::LowerBound { setting, k, mechanism } => lower_bound(*setting, *k, mechanism),
        Command::Search { mechanism, grid, budget } => search(mechanism, grid, *budget, cli.seed),
        Command::SamplingLemma { source, threshold, trials } => sampling(source, *threshold, *trials, cli.seed),
        Command::ListFixtures => Ok(list_fixtures()),
    }
}

fn write_output(target: &str, bytes: &[u8]) -> std::io::Result<()> {
    if target == "-" {
        let mut out = std::io::stdout().lock();
        out.write_all(bytes)?;
        out.flush()
    } else {
        std::fs::write(target, bytes)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let caps = match Caps::from_env() {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    log_config(&cli, &caps);
    let result = execute(&cli).and_then(|r| Ok((render(&r, cli.format)?, r.failed)));
    match result {
        Ok((bytes, failed)) => {
            if let Err(e) = write_output(&cli.output, &bytes) {
                eprintln!("error: cannot write {}: {e}", cli.output);
                return ExitCode::from(2);
            }
            if failed {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            }
        }
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Lib(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
