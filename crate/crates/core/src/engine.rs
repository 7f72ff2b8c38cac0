//! Deterministic simulation engine. Interests are pre-propagated to
//! quiescence, then each trace event is injected at its producing agent
//! and the message cascade drained before the next event, so a run is a
//! pure function of (topology, trace, rules, config).
//!
//! [`run_oracle`] bypasses the hierarchy entirely: every event is offered
//! to every agent and consumed when an interest matches and the producer
//! is in scope, which makes it the ground truth the routed run is checked
//! against.

use alloc::collections::{BTreeMap, BTreeSet, VecDeque};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use core::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::detection::{
    class_for_label, score, ActivityClass, AgentDetector, Alert, ClassMetrics, DetectionRule,
    SignatureRule, SignatureRuleBase,
};
use crate::model::{
    eval_predicate, scope_admits, AgentAddress, AttrValue, DomainId, EventCategory, EventRecord,
    HostId, Interest, InterestScope, LinkTier, NodeName, Topology,
};
use crate::registry::NodeRef;
use crate::routing::{
    dca_handle_data, dca_handle_interest, eca_handle, wca_handle_data, wca_handle_interest,
    Message, MessageBody, MessageMeta, NodeState, RoutingError,
};

/// Crash-stop removal of one node: from `time` on it neither receives nor
/// sends anything, with no recovery.
#[derive(Debug, Clone, PartialEq)]
pub struct Fault {
    pub time: f64,
    pub node: NodeName,
}

/// Run parameters beyond the input files.
#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub seed: u64,
    pub faults: Vec<Fault>,
    /// Hard hop cap per message; the loop guard. The longest legal path is
    /// 6 links, the default leaves headroom.
    pub max_hops: u32,
}

impl SimConfig {
    pub fn new(seed: u64) -> Self {
        SimConfig {
            seed,
            faults: Vec::new(),
            max_hops: 8,
        }
    }
}

/// All rules of a run; agents pick theirs by id via the topology.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RuleSet {
    pub detection: Vec<DetectionRule>,
    pub signatures: Vec<SignatureRule>,
}

impl RuleSet {
    /// The detection rules assigned to an agent, in rule-file order.
    pub fn detection_for(&self, detects: &[String]) -> Vec<DetectionRule> {
        self.detection
            .iter()
            .filter(|r| detects.contains(&r.rule_id))
            .cloned()
            .collect()
    }

    /// The signature base assigned to an agent, in rule-file order.
    pub fn signatures_for(&self, detects: &[String]) -> SignatureRuleBase {
        SignatureRuleBase {
            rules: self
                .signatures
                .iter()
                .filter(|r| detects.contains(&r.rule_id))
                .cloned()
                .collect(),
        }
    }

    pub fn has_rule(&self, id: &str) -> bool {
        self.detection.iter().any(|r| r.rule_id == id)
            || self.signatures.iter().any(|r| r.rule_id == id)
    }
}

/// One event consumed by one agent via interest routing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Delivery {
    pub seq: u64,
    pub agent: AgentAddress,
}

/// The full run ledger.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimReport {
    pub alerts: Vec<Alert>,
    pub deliveries: Vec<Delivery>,
    /// Message counts keyed `kind.tier`, plus `events_injected` and the
    /// dropped-message counters.
    pub counters: BTreeMap<String, u64>,
    /// Per-class rates, present when the trace carried labels.
    pub metrics: Option<BTreeMap<String, ClassMetrics>>,
    pub seed: u64,
    pub config_digest: String,
}

/// One link traversal, recorded for the routing invariants.
#[derive(Debug, Clone, PartialEq)]
pub struct Traversal {
    pub kind: &'static str,
    pub tier: LinkTier,
    /// Scope of the interest this message serves, when attributable.
    pub scope: Option<InterestScope>,
    pub hop_count: u32,
}

/// One data message as it reached a basic agent.
#[derive(Debug, Clone, PartialEq)]
pub struct DeliveredData {
    pub seq: u64,
    pub dest: AgentAddress,
    pub hop_count: u32,
    /// The nodes that emitted the message, in traversal order.
    pub trace_path: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Diagnostics {
    pub traversals: Vec<Traversal>,
    pub delivered_data: Vec<DeliveredData>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimOutcome {
    pub report: SimReport,
    pub diagnostics: Diagnostics,
}

#[derive(Debug, Clone, PartialEq)]
pub enum EngineError {
    UnknownAgent { seq: u64, agent: String },
    UndeclaredCategory { seq: u64, agent: String, category: String },
    UnknownRule { agent: String, rule: String },
    UnknownLabel { seq: u64, label: String },
    TraceOrder { seq: u64 },
    BadRule { rule: String, reason: &'static str },
    SampleTooLarge { wanted: usize, have: usize },
    UnlabeledRecord { seq: u64 },
    NoProducers { category: String },
    TargetNotProducer { target: String },
    NoBackgroundCategories,
    DigestMismatch,
    MissingCounter { key: &'static str },
    Routing(RoutingError),
}

impl fmt::Display for EngineError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EngineError::UnknownAgent { seq, agent } => {
                write!(f, "trace event {seq} references unknown agent `{agent}`")
            }
            EngineError::UndeclaredCategory { seq, agent, category } => write!(
                f,
                "trace event {seq}: agent `{agent}` does not declare category `{category}`"
            ),
            EngineError::UnknownRule { agent, rule } => {
                write!(f, "agent `{agent}` references unknown rule `{rule}`")
            }
            EngineError::UnknownLabel { seq, label } => {
                write!(f, "trace event {seq} carries unmapped label `{label}`")
            }
            EngineError::TraceOrder { seq } => {
                write!(f, "trace event {seq} breaks seq/time ordering")
            }
            EngineError::BadRule { rule, reason } => write!(f, "rule `{rule}`: {reason}"),
            EngineError::SampleTooLarge { wanted, have } => {
                write!(f, "cannot sample {wanted} records out of {have}")
            }
            EngineError::UnlabeledRecord { seq } => {
                write!(f, "record {seq} has no text label")
            }
            EngineError::NoProducers { category } => {
                write!(f, "no agent produces category `{category}`")
            }
            EngineError::TargetNotProducer { target } => {
                write!(f, "target agent `{target}` does not produce the flood category")
            }
            EngineError::NoBackgroundCategories => {
                f.write_str("background rate set but no non-flood categories are declared")
            }
            EngineError::DigestMismatch => {
                f.write_str("reports come from different configurations")
            }
            EngineError::MissingCounter { key } => {
                write!(f, "report lacks required counter `{key}`")
            }
            EngineError::Routing(e) => write!(f, "{e}"),
        }
    }
}

impl core::error::Error for EngineError {}

impl From<RoutingError> for EngineError {
    fn from(e: RoutingError) -> Self {
        EngineError::Routing(e)
    }
}

fn validate_inputs(
    topo: &Topology,
    trace: &[EventRecord],
    rules: &RuleSet,
) -> Result<(), EngineError> {
    for r in &rules.detection {
        if r.window <= 0.0 {
            return Err(EngineError::BadRule { rule: r.rule_id.clone(), reason: "window must be positive" });
        }
        if r.threshold < 1 {
            return Err(EngineError::BadRule { rule: r.rule_id.clone(), reason: "threshold must be at least 1" });
        }
    }
    for d in topo.agents() {
        for id in &d.detects {
            if !rules.has_rule(id) {
                return Err(EngineError::UnknownRule {
                    agent: d.address.to_string(),
                    rule: id.clone(),
                });
            }
        }
    }
    let mut prev_seq: Option<u64> = None;
    let mut prev_time = f64::NEG_INFINITY;
    for e in trace {
        if prev_seq.is_some_and(|p| e.seq <= p) || e.time < prev_time {
            return Err(EngineError::TraceOrder { seq: e.seq });
        }
        prev_seq = Some(e.seq);
        prev_time = e.time;
        let Some(desc) = topo.agent(&e.source) else {
            return Err(EngineError::UnknownAgent {
                seq: e.seq,
                agent: e.source.to_string(),
            });
        };
        if !desc.produces.contains(&e.category) {
            return Err(EngineError::UndeclaredCategory {
                seq: e.seq,
                agent: e.source.to_string(),
                category: e.category.to_string(),
            });
        }
        if let Some(AttrValue::Text(label)) = e.attr("label") {
            if class_for_label(label).is_none() {
                return Err(EngineError::UnknownLabel {
                    seq: e.seq,
                    label: label.clone(),
                });
            }
        }
    }
    Ok(())
}

fn dead(faults: &[Fault], node: &NodeName, now: f64) -> bool {
    faults.iter().any(|f| f.time <= now && &f.node == node)
}

struct Envelope {
    from: NodeName,
    to: NodeName,
    msg: Message,
}

struct BaRuntime {
    detector: AgentDetector,
    /// Interests this agent was asked to collect for, in arrival order.
    collects: Vec<Interest>,
    /// Events already fed to detection via delivery.
    seen: BTreeSet<u64>,
}

struct Engine {
    faults: Vec<Fault>,
    max_hops: u32,
    now: f64,
    wcas: BTreeMap<(DomainId, HostId), NodeState>,
    dcas: BTreeMap<DomainId, NodeState>,
    eca: NodeState,
    bas: BTreeMap<AgentAddress, BaRuntime>,
    queue: VecDeque<Envelope>,
    interest_table: BTreeMap<String, Interest>,
    counters: BTreeMap<String, u64>,
    deliveries: Vec<Delivery>,
    delivered_set: BTreeSet<(u64, AgentAddress)>,
    alerts: Vec<Alert>,
    pairs: Vec<(ActivityClass, ActivityClass)>,
    diag: Diagnostics,
}

fn link_tier(a: &NodeName, b: &NodeName) -> LinkTier {
    use NodeName::*;
    match (a, b) {
        (Ba(_), Wca { .. }) | (Wca { .. }, Ba(_)) => LinkTier::BaWca,
        (Wca { .. }, Wca { .. }) => LinkTier::WcaWca,
        (Wca { .. }, Dca(_)) | (Dca(_), Wca { .. }) => LinkTier::WcaDca,
        (Dca(_), Dca(_)) => LinkTier::DcaDca,
        (Dca(_), Eca) | (Eca, Dca(_)) => LinkTier::DcaEca,
        _ => unreachable!("no such link in the hierarchy"),
    }
}

impl Engine {
    fn new(topo: &Topology, rules: &RuleSet, cfg: &SimConfig) -> Self {
        let mut wcas = BTreeMap::new();
        let mut dcas = BTreeMap::new();
        let mut bas = BTreeMap::new();
        for d in &topo.domains {
            dcas.insert(d.domain.clone(), NodeState::dca(topo, &d.domain));
            for h in &d.hosts {
                wcas.insert(
                    (d.domain.clone(), h.host.clone()),
                    NodeState::wca(topo, &d.domain, &h.host),
                );
                for a in &h.agents {
                    bas.insert(
                        a.address.clone(),
                        BaRuntime {
                            detector: AgentDetector::new(
                                a.address.clone(),
                                rules.detection_for(&a.detects),
                                rules.signatures_for(&a.detects),
                            ),
                            collects: Vec::new(),
                            seen: BTreeSet::new(),
                        },
                    );
                }
            }
        }
        Engine {
            faults: cfg.faults.clone(),
            max_hops: cfg.max_hops,
            now: 0.0,
            wcas,
            dcas,
            eca: NodeState::eca(topo),
            bas,
            queue: VecDeque::new(),
            interest_table: BTreeMap::new(),
            counters: BTreeMap::new(),
            deliveries: Vec::new(),
            delivered_set: BTreeSet::new(),
            alerts: Vec::new(),
            pairs: Vec::new(),
            diag: Diagnostics::default(),
        }
    }

    fn bump(&mut self, key: &str) {
        *self.counters.entry(key.to_string()).or_insert(0) += 1;
    }

    fn is_dead(&self, node: &NodeName) -> bool {
        dead(&self.faults, node, self.now)
    }

    fn wca_name_of(addr: &AgentAddress) -> NodeName {
        NodeName::Wca {
            domain: addr.domain.clone(),
            host: addr.host.clone(),
        }
    }

    /// Issue one interest from its origin agent toward the local WCA.
    fn issue(&mut self, origin: &AgentAddress, interest: Interest) {
        let from = NodeName::Ba(origin.clone());
        let msg = Message {
            body: MessageBody::Interest(interest.clone()),
            meta: MessageMeta::fresh().forward(&from),
        };
        self.interest_table
            .insert(interest.interest_id.clone(), interest);
        self.queue.push_back(Envelope {
            to: Self::wca_name_of(origin),
            from,
            msg,
        });
    }

    /// Pre-propagate every rule-derived interest to quiescence before the
    /// first trace event.
    fn preissue(&mut self) -> Result<(), EngineError> {
        self.now = 0.0;
        let mut issued: Vec<(AgentAddress, Vec<Interest>)> = Vec::new();
        for (addr, ba) in self.bas.iter_mut() {
            if dead(&self.faults, &NodeName::Ba(addr.clone()), 0.0) {
                continue;
            }
            issued.push((addr.clone(), ba.detector.preissue_interests(0.0)));
        }
        for (addr, interests) in issued {
            for i in interests {
                self.issue(&addr, i);
            }
        }
        self.drain()
    }

    fn inject(&mut self, e: &EventRecord) -> Result<(), EngineError> {
        self.now = e.time;
        self.bump("events_injected");
        let producer = e.source.clone();
        if self.is_dead(&NodeName::Ba(producer.clone())) {
            return Ok(());
        }

        // local observation and analysis at the producing agent
        let ba = self.bas.get_mut(&producer).expect("validated producer");
        let obs = ba.detector.observe_event(e, e.time);
        if let Some(AttrValue::Text(label)) = e.attr("label") {
            if ba.detector.has_signatures() {
                let actual = class_for_label(label).expect("validated label");
                let predicted = ba.detector.classify(e);
                self.pairs.push((actual, predicted));
            }
        }
        let forwards = ba
            .collects
            .iter()
            .any(|i| i.category == e.category && eval_predicate(&i.predicate, e));
        self.alerts.extend(obs.alerts);
        for i in obs.new_interests {
            self.issue(&producer, i);
        }

        if forwards {
            let from = NodeName::Ba(producer.clone());
            self.queue.push_back(Envelope {
                to: Self::wca_name_of(&producer),
                msg: Message {
                    body: MessageBody::Data {
                        event: e.clone(),
                        for_interest: None,
                    },
                    meta: MessageMeta::fresh().forward(&from),
                },
                from,
            });
        }
        self.drain()
    }

    /// Scope served by a message, for the containment diagnostics.
    fn scope_of(&self, body: &MessageBody) -> Option<InterestScope> {
        match body {
            MessageBody::Interest(i) => Some(i.scope.clone()),
            MessageBody::Data { for_interest: Some(id), .. } => {
                self.interest_table.get(id).map(|i| i.scope.clone())
            }
            _ => None,
        }
    }

    fn drain(&mut self) -> Result<(), EngineError> {
        while let Some(env) = self.queue.pop_front() {
            if env.msg.meta.hop_count > self.max_hops {
                self.bump("dropped_hop_cap");
                continue;
            }
            if self.is_dead(&env.to) {
                self.bump("dropped_fault");
                continue;
            }
            let tier = link_tier(&env.from, &env.to);
            self.bump(&format!("{}.{}", env.msg.body.kind(), tier.as_str()));
            self.diag.traversals.push(Traversal {
                kind: env.msg.body.kind(),
                tier,
                scope: self.scope_of(&env.msg.body),
                hop_count: env.msg.meta.hop_count,
            });

            let now = self.now;
            match env.to.clone() {
                NodeName::Ba(addr) => self.ba_receive(&addr, &env),
                NodeName::Wca { domain, host } => {
                    let from_ref = wca_from_ref(&env.from);
                    let node = self
                        .wcas
                        .get_mut(&(domain.clone(), host.clone()))
                        .expect("wca exists");
                    let actions = match &env.msg.body {
                        MessageBody::Interest(i) => {
                            wca_handle_interest(node, i, &env.msg.meta, &from_ref, now)?
                        }
                        MessageBody::Data { event, .. } => {
                            wca_handle_data(node, event, &env.msg.meta, &from_ref, now)?
                        }
                        _ => Vec::new(),
                    };
                    self.emit(env.to, actions);
                }
                NodeName::Dca(domain) => {
                    let from_ref = dca_from_ref(&env.from);
                    let node = self.dcas.get_mut(&domain).expect("dca exists");
                    let actions = match &env.msg.body {
                        MessageBody::Interest(i) => {
                            dca_handle_interest(node, i, &env.msg.meta, &from_ref, now)?
                        }
                        MessageBody::Data { event, for_interest: Some(id) } => {
                            dca_handle_data(node, event, id, &env.msg.meta, &from_ref, now)?
                        }
                        MessageBody::Data { for_interest: None, .. } => {
                            node.dropped_data += 1;
                            Vec::new()
                        }
                        _ => Vec::new(),
                    };
                    self.emit(env.to, actions);
                }
                NodeName::Eca => {
                    let from_ref = eca_from_ref(&env.from);
                    let actions = eca_handle(&mut self.eca, &env.msg, &from_ref, now)?;
                    self.emit(env.to, actions);
                }
            }
        }
        Ok(())
    }

    fn emit(&mut self, sender: NodeName, actions: Vec<crate::routing::OutboundAction>) {
        for a in actions {
            let to = resolve_dest(&sender, &a.dest);
            self.queue.push_back(Envelope {
                from: sender.clone(),
                to,
                msg: a.message,
            });
        }
    }

    fn ba_receive(&mut self, addr: &AgentAddress, env: &Envelope) {
        match &env.msg.body {
            MessageBody::Data { event, .. } => {
                self.diag.delivered_data.push(DeliveredData {
                    seq: event.seq,
                    dest: addr.clone(),
                    hop_count: env.msg.meta.hop_count,
                    trace_path: env.msg.meta.trace_path.clone(),
                });
                if self.delivered_set.insert((event.seq, addr.clone())) {
                    self.deliveries.push(Delivery {
                        seq: event.seq,
                        agent: addr.clone(),
                    });
                }
                let ba = self.bas.get_mut(addr).expect("ba exists");
                if event.source != *addr && ba.seen.insert(event.seq) {
                    let obs = ba.detector.observe_event(event, self.now);
                    self.alerts.extend(obs.alerts);
                    let origin = addr.clone();
                    for i in obs.new_interests {
                        self.issue(&origin, i);
                    }
                }
            }
            MessageBody::Collect { interest_id, .. } => {
                if let Some(i) = self.interest_table.get(interest_id) {
                    let ba = self.bas.get_mut(addr).expect("ba exists");
                    if !ba.collects.iter().any(|c| c.interest_id == *interest_id) {
                        ba.collects.push(i.clone());
                    }
                }
            }
            MessageBody::Inability { .. } | MessageBody::Interest(_) => {}
        }
    }

    fn finish(mut self, digest: String, seed: u64, labeled: bool) -> SimOutcome {
        let mut dropped_data: u64 = self.eca.dropped_data;
        for n in self.wcas.values() {
            dropped_data += n.dropped_data;
        }
        for n in self.dcas.values() {
            dropped_data += n.dropped_data;
        }
        self.counters.insert("dropped_data".into(), dropped_data);
        self.counters.entry("dropped_fault".into()).or_insert(0);
        self.counters.entry("dropped_hop_cap".into()).or_insert(0);
        self.counters.entry("events_injected".into()).or_insert(0);
        let metrics = labeled.then(|| {
            score(&self.pairs)
                .into_iter()
                .map(|(c, m)| (c.as_str().to_string(), m))
                .collect()
        });
        SimOutcome {
            report: SimReport {
                alerts: self.alerts,
                deliveries: self.deliveries,
                counters: self.counters,
                metrics,
                seed,
                config_digest: digest,
            },
            diagnostics: self.diag,
        }
    }
}

/// How a WCA names the sender of an incoming envelope.
fn wca_from_ref(from: &NodeName) -> NodeRef {
    match from {
        NodeName::Ba(addr) => NodeRef::LocalAgent(addr.agent.clone()),
        NodeName::Wca { host, .. } => NodeRef::PeerWca(host.clone()),
        NodeName::Dca(_) => NodeRef::OwnDca,
        NodeName::Eca => unreachable!("no WCA-ECA link"),
    }
}

fn dca_from_ref(from: &NodeName) -> NodeRef {
    match from {
        NodeName::Wca { host, .. } => NodeRef::PeerWca(host.clone()),
        NodeName::Dca(d) => NodeRef::PeerDca(d.clone()),
        NodeName::Eca => NodeRef::Eca,
        NodeName::Ba(_) => unreachable!("no BA-DCA link"),
    }
}

fn eca_from_ref(from: &NodeName) -> NodeRef {
    match from {
        NodeName::Dca(d) => NodeRef::PeerDca(d.clone()),
        _ => unreachable!("only DCAs talk to the ECA"),
    }
}

/// Translate a handler's relative destination into the absolute node name.
fn resolve_dest(sender: &NodeName, dest: &NodeRef) -> NodeName {
    match (sender, dest) {
        (NodeName::Wca { domain, host }, NodeRef::LocalAgent(a)) => NodeName::Ba(AgentAddress {
            domain: domain.clone(),
            host: host.clone(),
            agent: a.clone(),
        }),
        (NodeName::Wca { domain, .. }, NodeRef::PeerWca(h)) => NodeName::Wca {
            domain: domain.clone(),
            host: h.clone(),
        },
        (NodeName::Wca { domain, .. }, NodeRef::OwnDca) => NodeName::Dca(domain.clone()),
        (NodeName::Dca(domain), NodeRef::PeerWca(h)) => NodeName::Wca {
            domain: domain.clone(),
            host: h.clone(),
        },
        (NodeName::Dca(_), NodeRef::PeerDca(d)) => NodeName::Dca(d.clone()),
        (NodeName::Dca(_), NodeRef::Eca) => NodeName::Eca,
        (NodeName::Eca, NodeRef::PeerDca(d)) => NodeName::Dca(d.clone()),
        _ => unreachable!("handler emitted a non-adjacent destination"),
    }
}

fn trace_is_labeled(trace: &[EventRecord]) -> bool {
    trace
        .iter()
        .any(|e| matches!(e.attr("label"), Some(AttrValue::Text(_))))
}

/// Full hierarchical run with per-event quiescence and diagnostics.
pub fn simulate(
    topo: &Topology,
    trace: &[EventRecord],
    rules: &RuleSet,
    cfg: &SimConfig,
) -> Result<SimOutcome, EngineError> {
    validate_inputs(topo, trace, rules)?;
    let digest = config_digest(topo, trace, rules, cfg);
    let mut eng = Engine::new(topo, rules, cfg);
    eng.preissue()?;
    for e in trace {
        eng.inject(e)?;
    }
    let labeled = trace_is_labeled(trace);
    Ok(eng.finish(digest, cfg.seed, labeled))
}

/// Hierarchical run, report only.
pub fn run(
    topo: &Topology,
    trace: &[EventRecord],
    rules: &RuleSet,
    cfg: &SimConfig,
) -> Result<SimReport, EngineError> {
    simulate(topo, trace, rules, cfg).map(|o| o.report)
}

/// The unique hierarchy path data takes from `producer` to the origin of
/// `interest`, as a node list. Assumes the producer is inside the
/// interest's scope.
fn hier_path(interest: &Interest, producer: &AgentAddress) -> Vec<NodeName> {
    let s = &interest.origin;
    let mut path = Vec::new();
    path.push(NodeName::Ba(producer.clone()));
    path.push(Engine::wca_name_of(producer));
    if producer.domain == s.domain {
        if producer.host != s.host {
            // host-directed data rides the WCA peer link; domain-wide data
            // goes through the DCA
            if !matches!(interest.scope, InterestScope::HostDirected { .. }) {
                path.push(NodeName::Dca(s.domain.clone()));
            }
            path.push(Engine::wca_name_of(s));
        }
    } else {
        path.push(NodeName::Dca(producer.domain.clone()));
        if matches!(
            interest.scope,
            InterestScope::Enterprise | InterestScope::Propagated
        ) {
            path.push(NodeName::Eca);
        }
        path.push(NodeName::Dca(s.domain.clone()));
        path.push(Engine::wca_name_of(s));
    }
    path.push(NodeName::Ba(s.clone()));
    path
}

/// Ground-truth comparator: the hierarchy is bypassed and every event is
/// offered to every agent directly. Faults restrict deliveries to the
/// pairs whose hierarchy path stays alive.
pub fn run_oracle(
    topo: &Topology,
    trace: &[EventRecord],
    rules: &RuleSet,
    cfg: &SimConfig,
) -> Result<SimReport, EngineError> {
    validate_inputs(topo, trace, rules)?;
    let digest = config_digest(topo, trace, rules, cfg);

    let mut agents: BTreeMap<AgentAddress, (AgentDetector, Vec<Interest>)> = BTreeMap::new();
    for d in topo.agents() {
        let mut det = AgentDetector::new(
            d.address.clone(),
            rules.detection_for(&d.detects),
            rules.signatures_for(&d.detects),
        );
        let interests = if dead(&cfg.faults, &NodeName::Ba(d.address.clone()), 0.0) {
            Vec::new()
        } else {
            det.preissue_interests(0.0)
        };
        agents.insert(d.address.clone(), (det, interests));
    }

    let mut alerts = Vec::new();
    let mut deliveries = Vec::new();
    let mut delivered_set: BTreeSet<(u64, AgentAddress)> = BTreeSet::new();
    let mut pairs: Vec<(ActivityClass, ActivityClass)> = Vec::new();
    let mut counters: BTreeMap<String, u64> = BTreeMap::new();

    for e in trace {
        let now = e.time;
        *counters.entry("events_injected".into()).or_insert(0) += 1;
        let producer = e.source.clone();
        if dead(&cfg.faults, &NodeName::Ba(producer.clone()), now) {
            continue;
        }
        let addresses: Vec<AgentAddress> = agents.keys().cloned().collect();
        for addr in addresses {
            let is_producer = addr == producer;
            let matched = {
                let (_, interests) = &agents[&addr];
                interests.iter().any(|i| {
                    i.category == e.category
                        && eval_predicate(&i.predicate, e)
                        && scope_admits(i, &producer)
                        && hier_path(i, &producer)
                            .iter()
                            .all(|n| !dead(&cfg.faults, n, now))
                })
            };
            if matched && delivered_set.insert((e.seq, addr.clone())) {
                deliveries.push(Delivery {
                    seq: e.seq,
                    agent: addr.clone(),
                });
            }
            if is_producer || matched {
                let (det, _) = agents.get_mut(&addr).expect("agent exists");
                if is_producer {
                    if let Some(AttrValue::Text(label)) = e.attr("label") {
                        if det.has_signatures() {
                            let actual = class_for_label(label).expect("validated label");
                            pairs.push((actual, det.classify(e)));
                        }
                    }
                }
                let obs = det.observe_event(e, now);
                alerts.extend(obs.alerts);
            }
        }
    }

    counters.insert(
        "data.flat".into(),
        trace.len() as u64 * topo.host_count() as u64,
    );
    counters.entry("events_injected".into()).or_insert(0);
    let metrics = trace_is_labeled(trace).then(|| {
        score(&pairs)
            .into_iter()
            .map(|(c, m)| (c.as_str().to_string(), m))
            .collect()
    });
    Ok(SimReport {
        alerts,
        deliveries,
        counters,
        metrics,
        seed: cfg.seed,
        config_digest: digest,
    })
}

fn push_tagged(buf: &mut String, v: &AttrValue) {
    match v {
        AttrValue::Int(x) => {
            let _ = write!(buf, "i{x}");
        }
        AttrValue::Real(x) => {
            let _ = write!(buf, "r{x}");
        }
        AttrValue::Text(s) => {
            let _ = write!(buf, "t:{s}");
        }
    }
}

/// Stable digest over every run input, so reports from different
/// configurations cannot be compared by accident.
pub fn config_digest(
    topo: &Topology,
    trace: &[EventRecord],
    rules: &RuleSet,
    cfg: &SimConfig,
) -> String {
    let mut buf = String::new();
    let _ = write!(buf, "seed={};max_hops={}\n", cfg.seed, cfg.max_hops);
    for f in &cfg.faults {
        let _ = write!(buf, "fault={}@{}\n", f.node, f.time);
    }
    for d in &topo.domains {
        let _ = write!(buf, "domain {}\n", d.domain);
        for h in &d.hosts {
            let _ = write!(buf, "host {}/{}\n", d.domain, h.host);
            for a in &h.agents {
                let _ = write!(buf, "agent {}", a.address);
                for c in &a.produces {
                    let _ = write!(buf, " p={c}");
                }
                for r in &a.detects {
                    let _ = write!(buf, " d={r}");
                }
                buf.push('\n');
            }
        }
    }
    let push_pred = |buf: &mut String, p: &crate::model::Predicate| {
        for c in &p.constraints {
            let _ = write!(buf, " {} {} ", c.attribute, c.op);
            push_tagged(buf, &c.literal);
        }
    };
    for r in &rules.detection {
        let _ = write!(
            buf,
            "rule {} cat={} w={} t={} s={} c={}",
            r.rule_id, r.category, r.window, r.threshold, r.scope_needed, r.alert_class
        );
        push_pred(&mut buf, &r.predicate);
        buf.push('\n');
    }
    for r in &rules.signatures {
        let _ = write!(buf, "sig {} c={}", r.rule_id, r.class);
        push_pred(&mut buf, &r.predicate);
        buf.push('\n');
    }
    for e in trace {
        let _ = write!(buf, "e {} {} {} {}", e.seq, e.time, e.source, e.category);
        for (n, v) in &e.attributes {
            let _ = write!(buf, " {n}=");
            push_tagged(&mut buf, v);
        }
        buf.push('\n');
    }
    let hash = Sha256::digest(buf.as_bytes());
    let mut hex = String::with_capacity(64);
    for b in hash {
        let _ = write!(hex, "{b:02x}");
    }
    hex
}

/// Proportional sample of `n` labeled records: per-class quotas by largest
/// remainder, uniform within-class selection under `seed`, output in
/// original seq order.
pub fn stratified_sample(
    records: &[EventRecord],
    n: usize,
    seed: u64,
) -> Result<Vec<EventRecord>, EngineError> {
    if n > records.len() {
        return Err(EngineError::SampleTooLarge {
            wanted: n,
            have: records.len(),
        });
    }
    let mut by_class: BTreeMap<ActivityClass, Vec<usize>> = BTreeMap::new();
    for (idx, e) in records.iter().enumerate() {
        let Some(AttrValue::Text(label)) = e.attr("label") else {
            return Err(EngineError::UnlabeledRecord { seq: e.seq });
        };
        let Some(class) = class_for_label(label) else {
            return Err(EngineError::UnknownLabel {
                seq: e.seq,
                label: label.clone(),
            });
        };
        by_class.entry(class).or_default().push(idx);
    }

    let total = records.len() as u128;
    let mut quotas: BTreeMap<ActivityClass, usize> = BTreeMap::new();
    let mut remainders: Vec<(u128, ActivityClass)> = Vec::new();
    let mut assigned = 0usize;
    for (class, members) in &by_class {
        let exact_num = n as u128 * members.len() as u128;
        let floor = (exact_num / total) as usize;
        quotas.insert(*class, floor);
        assigned += floor;
        remainders.push((exact_num % total, *class));
    }
    // distribute the leftovers to the largest remainders, class order
    // breaking ties
    remainders.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
    for (_, class) in remainders.into_iter().take(n - assigned) {
        *quotas.get_mut(&class).expect("quota exists") += 1;
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picked: Vec<usize> = Vec::with_capacity(n);
    for (class, members) in &by_class {
        let quota = quotas[class];
        let mut pool = members.clone();
        // partial Fisher-Yates: the first `quota` slots become the sample
        for i in 0..quota {
            let j = rng.gen_range(i..pool.len());
            pool.swap(i, j);
        }
        picked.extend_from_slice(&pool[..quota]);
    }
    picked.sort_unstable();
    Ok(picked.into_iter().map(|i| records[i].clone()).collect())
}

/// Parameters of the synthetic flood generator.
#[derive(Debug, Clone, PartialEq)]
pub struct FloodParams {
    /// The agent whose detection rule the flood is aimed at; must itself
    /// produce the flood category.
    pub target: AgentAddress,
    /// Flood events per second, spread over every producer of the flood
    /// category.
    pub rate: f64,
    pub duration: f64,
    /// Non-matching background events per second.
    pub background_rate: f64,
    pub seed: u64,
}

pub const FLOOD_CATEGORY: &str = "icmp.request";

fn round_micros(t: f64) -> f64 {
    ((t * 1e6) + 0.5) as u64 as f64 / 1e6
}

/// Deterministic flood trace: `rate * duration` events of the flood
/// category attributed across every producing agent, plus background noise
/// from the declared non-flood categories.
pub fn synth_flood_trace(
    topo: &Topology,
    params: &FloodParams,
) -> Result<Vec<EventRecord>, EngineError> {
    let flood_cat = EventCategory::new(FLOOD_CATEGORY);
    let producers: Vec<AgentAddress> = topo
        .agents()
        .filter(|d| d.produces.contains(&flood_cat))
        .map(|d| d.address.clone())
        .collect();
    if producers.is_empty() {
        return Err(EngineError::NoProducers {
            category: FLOOD_CATEGORY.into(),
        });
    }
    if !producers.contains(&params.target) {
        return Err(EngineError::TargetNotProducer {
            target: params.target.to_string(),
        });
    }
    let background: Vec<(AgentAddress, EventCategory)> = topo
        .agents()
        .flat_map(|d| {
            d.produces
                .iter()
                .filter(|c| c.as_str() != FLOOD_CATEGORY)
                .map(|c| (d.address.clone(), c.clone()))
                .collect::<Vec<_>>()
        })
        .collect();

    let flood_count = (params.rate * params.duration + 0.5) as usize;
    let bg_count = (params.background_rate * params.duration + 0.5) as usize;
    if bg_count > 0 && background.is_empty() {
        return Err(EngineError::NoBackgroundCategories);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let draw_time = |rng: &mut ChaCha8Rng| {
        if params.duration > 0.0 {
            round_micros(rng.gen_range(0.0..params.duration))
        } else {
            0.0
        }
    };
    // (time, insertion index) orders the merged trace deterministically
    let mut events: Vec<(f64, usize, AgentAddress, EventCategory, Vec<(String, AttrValue)>)> =
        Vec::new();
    for k in 0..flood_count {
        let t = draw_time(&mut rng);
        let who = producers[rng.gen_range(0..producers.len())].clone();
        events.push((
            t,
            k,
            who,
            flood_cat.clone(),
            alloc::vec![("proto".to_string(), AttrValue::Text("icmp".into()))],
        ));
    }
    for k in 0..bg_count {
        let t = draw_time(&mut rng);
        let (who, cat) = background[rng.gen_range(0..background.len())].clone();
        events.push((
            t,
            flood_count + k,
            who,
            cat,
            alloc::vec![("proto".to_string(), AttrValue::Text("tcp".into()))],
        ));
    }
    events.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("no NaN times").then(a.1.cmp(&b.1)));
    Ok(events
        .into_iter()
        .enumerate()
        .map(|(seq, (time, _, source, category, attributes))| EventRecord {
            seq: seq as u64,
            time,
            source,
            category,
            attributes,
        })
        .collect())
}

/// The 41 attributes of one connection record, in field order.
pub const KDD_ATTRIBUTES: [&str; 41] = [
    "duration",
    "protocol_type",
    "service",
    "flag",
    "src_bytes",
    "dst_bytes",
    "land",
    "wrong_fragment",
    "urgent",
    "hot",
    "num_failed_logins",
    "logged_in",
    "num_compromised",
    "root_shell",
    "su_attempted",
    "num_root",
    "num_file_creations",
    "num_shells",
    "num_access_files",
    "num_outbound_cmds",
    "is_host_login",
    "is_guest_login",
    "count",
    "srv_count",
    "serror_rate",
    "srv_serror_rate",
    "rerror_rate",
    "srv_rerror_rate",
    "same_srv_rate",
    "diff_srv_rate",
    "srv_diff_host_rate",
    "dst_host_count",
    "dst_host_srv_count",
    "dst_host_same_srv_rate",
    "dst_host_diff_srv_rate",
    "dst_host_same_src_port_rate",
    "dst_host_srv_diff_host_rate",
    "dst_host_serror_rate",
    "dst_host_srv_serror_rate",
    "dst_host_rerror_rate",
    "dst_host_srv_rerror_rate",
];

pub const KDD_CATEGORY: &str = "kdd.connection";

/// Parameters of the schema-faithful synthetic connection generator.
#[derive(Debug, Clone, PartialEq)]
pub struct KddSynthParams {
    /// Exact record count per class.
    pub class_counts: Vec<(ActivityClass, usize)>,
    pub seed: u64,
}

fn kdd_defaults(rng: &mut ChaCha8Rng) -> BTreeMap<&'static str, AttrValue> {
    let mut m = BTreeMap::new();
    m.insert("duration", AttrValue::Int(0));
    m.insert("protocol_type", AttrValue::Text("tcp".into()));
    m.insert("service", AttrValue::Text("http".into()));
    m.insert("flag", AttrValue::Text("SF".into()));
    m.insert("src_bytes", AttrValue::Int(rng.gen_range(100..2000)));
    m.insert("dst_bytes", AttrValue::Int(rng.gen_range(100..5000)));
    m.insert("logged_in", AttrValue::Int(1));
    m.insert("count", AttrValue::Int(rng.gen_range(1..20)));
    m.insert("srv_count", AttrValue::Int(rng.gen_range(1..20)));
    m.insert("same_srv_rate", AttrValue::Real(1.0));
    m.insert("dst_host_count", AttrValue::Int(rng.gen_range(1..256)));
    m.insert("dst_host_srv_count", AttrValue::Int(rng.gen_range(1..256)));
    m.insert("dst_host_same_srv_rate", AttrValue::Real(1.0));
    for name in KDD_ATTRIBUTES {
        m.entry(name).or_insert(match name {
            n if n.ends_with("_rate") => AttrValue::Real(0.0),
            _ => AttrValue::Int(0),
        });
    }
    m
}

/// Generate labeled synthetic connection records whose class patterns are
/// exactly matchable by signature rules: a usable offline stand-in when
/// the real dataset is absent.
pub fn synth_kdd_trace(params: &KddSynthParams) -> Vec<EventRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut rows: Vec<(BTreeMap<&'static str, AttrValue>, &'static str)> = Vec::new();
    for (class, count) in &params.class_counts {
        for _ in 0..*count {
            let mut m = kdd_defaults(&mut rng);
            let label = match class {
                ActivityClass::Dos => {
                    if rng.gen_range(0..2) == 0 {
                        m.insert("protocol_type", AttrValue::Text("icmp".into()));
                        m.insert("service", AttrValue::Text("ecr_i".into()));
                        m.insert("count", AttrValue::Int(rng.gen_range(200..511)));
                        m.insert("src_bytes", AttrValue::Int(1032));
                        "smurf"
                    } else {
                        m.insert("service", AttrValue::Text("private".into()));
                        m.insert("flag", AttrValue::Text("S0".into()));
                        m.insert("serror_rate", AttrValue::Real(rng.gen_range(0.85..1.0)));
                        m.insert("count", AttrValue::Int(rng.gen_range(100..300)));
                        m.insert("src_bytes", AttrValue::Int(0));
                        m.insert("logged_in", AttrValue::Int(0));
                        "neptune"
                    }
                }
                ActivityClass::Probe => {
                    m.insert("service", AttrValue::Text("private".into()));
                    m.insert("flag", AttrValue::Text("REJ".into()));
                    m.insert("diff_srv_rate", AttrValue::Real(rng.gen_range(0.7..1.0)));
                    m.insert("same_srv_rate", AttrValue::Real(rng.gen_range(0.0..0.3)));
                    m.insert("count", AttrValue::Int(rng.gen_range(1..10)));
                    m.insert("logged_in", AttrValue::Int(0));
                    if rng.gen_range(0..2) == 0 { "portsweep" } else { "ipsweep" }
                }
                ActivityClass::R2u => {
                    m.insert("service", AttrValue::Text("telnet".into()));
                    m.insert("num_failed_logins", AttrValue::Int(rng.gen_range(3..7)));
                    m.insert("logged_in", AttrValue::Int(0));
                    "guess_passwd"
                }
                ActivityClass::U2r => {
                    m.insert("service", AttrValue::Text("telnet".into()));
                    m.insert("root_shell", AttrValue::Int(1));
                    m.insert("num_file_creations", AttrValue::Int(rng.gen_range(2..9)));
                    m.insert("hot", AttrValue::Int(rng.gen_range(10..31)));
                    if rng.gen_range(0..2) == 0 { "buffer_overflow" } else { "rootkit" }
                }
                ActivityClass::Normal => "normal",
            };
            rows.push((m, label));
        }
    }
    // full Fisher-Yates so classes interleave
    for i in (1..rows.len()).rev() {
        let j = rng.gen_range(0..=i);
        rows.swap(i, j);
    }
    rows.into_iter()
        .enumerate()
        .map(|(seq, (m, label))| {
            let mut attributes: Vec<(String, AttrValue)> = KDD_ATTRIBUTES
                .iter()
                .map(|name| (name.to_string(), m[name].clone()))
                .collect();
            attributes.push(("label".to_string(), AttrValue::Text(label.into())));
            EventRecord {
                seq: seq as u64,
                time: seq as f64 * 0.001,
                source: AgentAddress::new("unassigned", "unassigned", "unassigned"),
                category: EventCategory::new(KDD_CATEGORY),
                attributes,
            }
        })
        .collect()
}

/// Attribute placeholder-sourced records round-robin across the agents
/// declaring the connection category.
pub fn assign_kdd_producers(
    trace: &mut [EventRecord],
    topo: &Topology,
) -> Result<(), EngineError> {
    let cat = EventCategory::new(KDD_CATEGORY);
    let producers: Vec<AgentAddress> = topo
        .agents()
        .filter(|d| d.produces.contains(&cat))
        .map(|d| d.address.clone())
        .collect();
    if producers.is_empty() {
        return Err(EngineError::NoProducers {
            category: KDD_CATEGORY.into(),
        });
    }
    for (k, e) in trace.iter_mut().enumerate() {
        if e.category == cat {
            e.source = producers[k % producers.len()].clone();
        }
    }
    Ok(())
}

/// Cost comparison of a routed run against its flat-broadcast oracle.
#[derive(Debug, Clone, PartialEq)]
pub struct OverheadReport {
    /// Hierarchical interest+data messages per injected event.
    pub messages_per_event: f64,
    /// The run's per-(kind, tier) counters, copied through.
    pub tier_breakdown: BTreeMap<String, u64>,
    /// Hierarchical interest+data count over the oracle's flat cost.
    pub ratio_vs_flat: f64,
}

pub fn measure_overhead(
    report: &SimReport,
    oracle_report: &SimReport,
) -> Result<OverheadReport, EngineError> {
    if report.config_digest != oracle_report.config_digest {
        return Err(EngineError::DigestMismatch);
    }
    let hier: u64 = report
        .counters
        .iter()
        .filter(|(k, _)| k.starts_with("interest.") || k.starts_with("data."))
        .map(|(_, v)| v)
        .sum();
    let flat = *oracle_report
        .counters
        .get("data.flat")
        .ok_or(EngineError::MissingCounter { key: "data.flat" })?;
    let events = *report
        .counters
        .get("events_injected")
        .ok_or(EngineError::MissingCounter { key: "events_injected" })?;
    let tier_breakdown = report
        .counters
        .iter()
        .filter(|(k, _)| k.contains('.'))
        .map(|(k, v)| (k.clone(), *v))
        .collect();
    Ok(OverheadReport {
        messages_per_event: if events == 0 { 0.0 } else { hier as f64 / events as f64 },
        tier_breakdown,
        ratio_vs_flat: if flat == 0 { 0.0 } else { hier as f64 / flat as f64 },
    })
}
