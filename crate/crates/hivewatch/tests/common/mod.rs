//! Shared helpers for the CLI and acceptance suites: binary invocation,
//! fixture paths, and a seeded random-scenario generator.

// each test binary uses a different subset of these helpers
#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use hivewatch_core::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_hivewatch"))
}

pub fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../fixtures")
        .join(name)
}

pub fn run_cli(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

pub fn assert_ok(out: &Output, what: &str) {
    assert!(
        out.status.success(),
        "{what} failed:\nstdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

pub struct Scenario {
    pub topo: Topology,
    pub rules: RuleSet,
    pub trace: Vec<EventRecord>,
}

const CATS: [&str; 3] = ["icmp.request", "net.flow", "dns.query"];

/// Random scenario inside the acceptance envelope: up to 3 domains, 4
/// hosts per domain, 3 agents per host, 200 events, with rules across all
/// three interest-deriving scopes.
pub fn gen_scenario(seed: u64) -> Scenario {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut raw = RawTopology::default();
    let mut rules = RuleSet::default();
    let n_domains = rng.gen_range(1..=3);
    let mut host_no = 0;
    let mut rule_no = 0;
    for d in 0..n_domains {
        let dname = format!("d{d}");
        raw.domains.push(dname.clone());
        for _ in 0..rng.gen_range(1..=4) {
            let hname = format!("h{host_no}");
            host_no += 1;
            raw.hosts.push(RawHost { name: hname.clone(), domain: dname.clone() });
            for a in 0..rng.gen_range(1..=3) {
                let mut produces: Vec<String> = Vec::new();
                for _ in 0..rng.gen_range(1..=2) {
                    let c = CATS[rng.gen_range(0..CATS.len())].to_string();
                    if !produces.contains(&c) {
                        produces.push(c);
                    }
                }
                let mut detects = Vec::new();
                for _ in 0..rng.gen_range(0..=2) {
                    let rule_id = format!("r{rule_no}");
                    rule_no += 1;
                    let scope = [ScopeNeeded::Local, ScopeNeeded::Domain, ScopeNeeded::Enterprise]
                        [rng.gen_range(0..3)];
                    let predicate = if rng.gen_range(0..3) == 0 {
                        Predicate::new(vec![Constraint::new(
                            "count",
                            CmpOp::Ge,
                            AttrValue::Int(rng.gen_range(1..4)),
                        )])
                    } else {
                        Predicate::always()
                    };
                    rules.detection.push(DetectionRule {
                        rule_id: rule_id.clone(),
                        category: EventCategory::new(CATS[rng.gen_range(0..CATS.len())]),
                        predicate,
                        window: rng.gen_range(1.0..20.0),
                        threshold: rng.gen_range(1..5),
                        scope_needed: scope,
                        alert_class: [AlertClass::Dos, AlertClass::Probe, AlertClass::R2u, AlertClass::U2r]
                            [rng.gen_range(0..4)],
                    });
                    detects.push(rule_id);
                }
                raw.agents.push(RawAgent {
                    name: format!("a{host_no}_{a}"),
                    host: hname.clone(),
                    produces,
                    detects,
                });
            }
        }
    }
    let topo = validate_topology(&raw).unwrap();

    let agents: Vec<AgentDescriptor> = topo.agents().cloned().collect();
    let mut trace = Vec::new();
    let mut t = 0.0f64;
    for seq in 0..rng.gen_range(5..=200) {
        t += rng.gen_range(0.0..0.5);
        let d = &agents[rng.gen_range(0..agents.len())];
        let category = d.produces[rng.gen_range(0..d.produces.len())].clone();
        trace.push(EventRecord {
            seq,
            time: (t * 1e6).round() / 1e6,
            source: d.address.clone(),
            category,
            attributes: vec![
                ("count".to_string(), AttrValue::Int(rng.gen_range(0..6))),
                (
                    "proto".to_string(),
                    AttrValue::Text(["tcp", "udp", "icmp"][rng.gen_range(0..3)].into()),
                ),
            ],
        });
    }
    Scenario { topo, rules, trace }
}

pub fn delivery_set(r: &SimReport) -> std::collections::BTreeSet<(u64, String)> {
    r.deliveries
        .iter()
        .map(|d| (d.seq, d.agent.to_string()))
        .collect()
}
