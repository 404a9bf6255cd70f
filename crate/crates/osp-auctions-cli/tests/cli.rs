use std::path::PathBuf;
use std::process::{Command, Output};

use osp_auctions::experiments::hard_domain_mua_sm;
use osp_auctions::fixtures::{instance_fixture, INSTANCE_FIXTURES};
use osp_auctions::json::{domain_to_doc, instance_from_json, instance_to_json};
use osp_auctions::rational::parse_rational;
use osp_auctions::rat;
use serde_json::Value;

fn cli(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_osp-auctions"))
        .args(args)
        .env_remove("OSP_AUCTIONS_CAPS")
        .output()
        .expect("binary runs")
}

fn json_of(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn scratch(name: &str, contents: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("osp-auctions-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join(name);
    std::fs::write(&path, contents).unwrap();
    path
}

#[test]
fn lower_bound_grand_bundle() {
    let out = cli(&["lower-bound", "--setting", "mua-sm", "--k", "10", "--mechanism", "grand-bundle"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(json_of(&out)["expected_ratio"], "5/6");
    let log = String::from_utf8(out.stderr).unwrap();
    assert!(log.contains("\"subcommand\":\"lower-bound\""));
    assert!(log.contains("\"seed\":"));
}

#[test]
fn sealed_bid_fails_verification() {
    let out = cli(&["verify-osp", "--fixture", "sealed-bid-2x2"]);
    assert_eq!(out.status.code(), Some(1));
    let v = json_of(&out);
    assert_eq!(v["verdict"], "fail");
    let w = &v["protocols"][0]["witness"];
    assert_eq!(w["bidder"], 0);
    assert_eq!(w["node"], serde_json::json!([]));
    assert_eq!(w["deviating_message"], 0);
}

#[test]
fn posted_price_passes_verification() {
    let out = cli(&["verify-osp", "--fixture", "posted-price-2x2"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(json_of(&out)["verdict"], "pass");
}

#[test]
fn mechanism_support_verification() {
    let domain = serde_json::to_string(&domain_to_doc(&hard_domain_mua_sm(2).unwrap())).unwrap();
    let path = scratch("domain.json", &domain);
    let out = cli(&["verify-osp", "--mechanism", "m1-2x2", "--domain", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(json_of(&out)["protocols"].as_array().unwrap().len(), 3);
}

#[test]
fn m3_exact_ratio() {
    let out = cli(&["simulate", "--mechanism", "m3-2x2", "--fixture", "subadd-split", "--exact"]);
    assert_eq!(out.status.code(), Some(0));
    let ratio = parse_rational(json_of(&out)["ratio"].as_str().unwrap()).unwrap();
    assert!(ratio >= rat(2, 3));
}

#[test]
fn sampled_runs_are_byte_identical() {
    let args = ["simulate", "--mechanism", "random-bundles", "--fixture", "m1-example", "--trials", "3000", "--seed", "5"];
    let a = cli(&args);
    let b = cli(&args);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    let other = cli(&["simulate", "--mechanism", "random-bundles", "--fixture", "m1-example", "--trials", "3000", "--seed", "6"]);
    assert_ne!(a.stdout, other.stdout);
}

#[test]
fn instance_files_are_accepted() {
    let text = instance_to_json(&instance_fixture("knapsack-3").unwrap()).unwrap();
    let path = scratch("knapsack.json", &text);
    let out = cli(&["simulate", "--mechanism", "grand-bundle", "--instance", path.to_str().unwrap(), "--exact"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(json_of(&out)["ratio"], "5/8");
    let bad = scratch("bad.json", "{\"setting\": 3}");
    let out = cli(&["simulate", "--mechanism", "grand-bundle", "--instance", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn csv_and_output_file() {
    let path = std::env::temp_dir().join(format!("osp-auctions-cli-out-{}.csv", std::process::id()));
    let out = cli(&[
        "lower-bound",
        "--setting",
        "mua-sm",
        "--k",
        "3",
        "--mechanism",
        "m1-2x2",
        "--format",
        "csv",
        "--output",
        path.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    assert!(out.stdout.is_empty());
    let text = std::fs::read_to_string(&path).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("profile,probability,welfare,opt,ratio"));
    assert_eq!(lines.count(), 5);
}

#[test]
fn usage_and_config_errors_exit_2() {
    assert_eq!(cli(&["simulate", "--mechanism", "nope", "--fixture", "m1-example"]).status.code(), Some(2));
    assert_eq!(cli(&["simulate", "--mechanism", "grand-bundle", "--fixture", "nope"]).status.code(), Some(2));
    assert_eq!(cli(&["simulate", "--mechanism", "grand-bundle"]).status.code(), Some(2));
    assert_eq!(cli(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(cli(&["search", "--mechanism", "m1-2x2", "--grid", "cubic:2x2:1"]).status.code(), Some(2));
    assert_eq!(cli(&["sampling-lemma", "--fixture", "critical-sm"]).status.code(), Some(2));
}

#[test]
fn caps_are_enforced_from_the_environment() {
    let out = Command::new(env!("CARGO_BIN_EXE_osp-auctions"))
        .args(["simulate", "--mechanism", "mech1-sm", "--fixture", "m1-example", "--exact"])
        .env("OSP_AUCTIONS_CAPS", "max_support=4")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("exceeds cap"));
    let out = Command::new(env!("CARGO_BIN_EXE_osp-auctions"))
        .args(["list-fixtures"])
        .env("OSP_AUCTIONS_CAPS", "nonsense")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn search_and_sampling() {
    let out = cli(&["search", "--mechanism", "m1-2x2", "--grid", "single-minded:2x2:4"]);
    let v = json_of(&out);
    assert_eq!(v["worst_ratio"], "3/4");
    assert_eq!(v["exhaustive"], true);
    let worst = serde_json::to_string(&v["worst_instance"]).unwrap();
    assert_eq!(instance_from_json(&worst).unwrap().n(), 2);
    let out = cli(&["sampling-lemma", "--fixture", "sampling-uniform-12"]);
    assert_eq!(json_of(&out)["frequency"], "1969/2048");
}

#[test]
fn fixture_listing_covers_every_fixture() {
    let v = json_of(&cli(&["list-fixtures"]));
    let names: Vec<&str> = v["instances"].as_array().unwrap().iter().map(|e| e["name"].as_str().unwrap()).collect();
    let expected: Vec<&str> = INSTANCE_FIXTURES.iter().map(|(n, _)| *n).collect();
    assert_eq!(names, expected);
    assert_eq!(v["protocols"].as_array().unwrap().len(), 2);
    assert_eq!(v["mechanisms"].as_array().unwrap().len(), 11);
}
