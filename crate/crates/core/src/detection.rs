//! The basic-agent brain: sliding-window counting with threshold rules,
//! interest issuance when local data cannot settle a rule, signature
//! classification of connection records, and per-class scoring.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::model::{
    eval_predicate, AgentAddress, EventCategory, EventRecord, Interest, InterestScope, Predicate,
};

/// How far a rule's evidence has to reach.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum ScopeNeeded {
    Local,
    Domain,
    Enterprise,
}

impl fmt::Display for ScopeNeeded {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ScopeNeeded::Local => "local",
            ScopeNeeded::Domain => "domain",
            ScopeNeeded::Enterprise => "enterprise",
        })
    }
}

/// Attack class an alert is filed under.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum AlertClass {
    Dos,
    R2u,
    U2r,
    Probe,
}

impl AlertClass {
    pub fn as_str(&self) -> &'static str {
        match self {
            AlertClass::Dos => "DoS",
            AlertClass::R2u => "R2U",
            AlertClass::U2r => "U2R",
            AlertClass::Probe => "Probe",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().as_str() {
            "dos" => Some(AlertClass::Dos),
            "r2u" => Some(AlertClass::R2u),
            "u2r" => Some(AlertClass::U2r),
            "probe" => Some(AlertClass::Probe),
            _ => None,
        }
    }
}

impl fmt::Display for AlertClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl Serialize for AlertClass {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for AlertClass {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let raw = String::deserialize(d)?;
        AlertClass::parse(&raw).ok_or_else(|| serde::de::Error::custom("unknown alert class"))
    }
}

/// The five activity classes of the evaluation: the four attack classes
/// plus normal traffic.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum ActivityClass {
    Dos,
    R2u,
    U2r,
    Probe,
    Normal,
}

impl ActivityClass {
    pub const ALL: [ActivityClass; 5] = [
        ActivityClass::Dos,
        ActivityClass::R2u,
        ActivityClass::U2r,
        ActivityClass::Probe,
        ActivityClass::Normal,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            ActivityClass::Dos => "DoS",
            ActivityClass::R2u => "R2U",
            ActivityClass::U2r => "U2R",
            ActivityClass::Probe => "Probe",
            ActivityClass::Normal => "Normal",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().as_str() {
            "dos" => Some(ActivityClass::Dos),
            "r2u" => Some(ActivityClass::R2u),
            "u2r" => Some(ActivityClass::U2r),
            "probe" => Some(ActivityClass::Probe),
            "normal" => Some(ActivityClass::Normal),
            _ => None,
        }
    }
}

impl From<AlertClass> for ActivityClass {
    fn from(c: AlertClass) -> Self {
        match c {
            AlertClass::Dos => ActivityClass::Dos,
            AlertClass::R2u => ActivityClass::R2u,
            AlertClass::U2r => ActivityClass::U2r,
            AlertClass::Probe => ActivityClass::Probe,
        }
    }
}

impl fmt::Display for ActivityClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Map a trace label to its activity class. Accepts the class names
/// themselves and the named attacks of the standard connection-record
/// catalog; trailing dots are tolerated.
pub fn class_for_label(label: &str) -> Option<ActivityClass> {
    let name = label.trim().trim_end_matches('.');
    if let Some(c) = ActivityClass::parse(name) {
        return Some(c);
    }
    let class = match name {
        "back" | "land" | "neptune" | "pod" | "smurf" | "teardrop" => ActivityClass::Dos,
        "ipsweep" | "nmap" | "portsweep" | "satan" => ActivityClass::Probe,
        "ftp_write" | "guess_passwd" | "imap" | "multihop" | "phf" | "spy" | "warezclient"
        | "warezmaster" => ActivityClass::R2u,
        "buffer_overflow" | "loadmodule" | "perl" | "rootkit" => ActivityClass::U2r,
        _ => return None,
    };
    Some(class)
}

/// One threshold rule: count events matching (category, predicate) inside
/// a sliding window and alert when the count reaches the threshold.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectionRule {
    pub rule_id: String,
    pub category: EventCategory,
    pub predicate: Predicate,
    /// Window length in seconds, > 0.
    pub window: f64,
    /// Alert when the in-window count reaches this, >= 1.
    pub threshold: u64,
    pub scope_needed: ScopeNeeded,
    pub alert_class: AlertClass,
}

/// Time-ordered in-window timestamps of one rule, kept per contributing
/// source so alert evidence can name who contributed what.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct WindowState {
    sources: BTreeMap<AgentAddress, Vec<f64>>,
}

impl WindowState {
    pub fn push(&mut self, source: &AgentAddress, t: f64) {
        self.sources.entry(source.clone()).or_default().push(t);
    }

    /// Drop timestamps at or before `now - window`; the window is the
    /// half-open interval (now - window, now].
    pub fn trim(&mut self, window: f64, now: f64) {
        let cutoff = now - window;
        for stamps in self.sources.values_mut() {
            stamps.retain(|t| *t > cutoff && *t <= now);
        }
        self.sources.retain(|_, stamps| !stamps.is_empty());
    }

    /// Retained timestamps inside (now - window, now], summed over sources.
    pub fn count(&self, window: f64, now: f64) -> u64 {
        self.per_source(window, now).iter().map(|(_, c)| c).sum()
    }

    /// In-window count per contributing source, in source address order.
    pub fn per_source(&self, window: f64, now: f64) -> Vec<(AgentAddress, u64)> {
        let cutoff = now - window;
        self.sources
            .iter()
            .map(|(src, stamps)| {
                let c = stamps.iter().filter(|t| **t > cutoff && **t <= now).count() as u64;
                (src.clone(), c)
            })
            .filter(|(_, c)| *c > 0)
            .collect()
    }
}

/// Count of retained in-window events for one rule.
pub fn window_count(w: &WindowState, rule: &DetectionRule, now: f64) -> u64 {
    w.count(rule.window, now)
}

/// An alarm raised by one basic agent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Alert {
    pub alert_id: String,
    pub raiser: AgentAddress,
    pub rule_id: String,
    pub alert_class: AlertClass,
    pub time: f64,
    /// (contributing source, in-window count) pairs; the counts sum to the
    /// window total at alert time.
    pub evidence: Vec<AlertEvidence>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlertEvidence {
    pub source: AgentAddress,
    pub count: u64,
}

/// Threshold check with one-alert-per-burst suppression: after an alert at
/// time T the rule re-arms once the window has slid past T. Returns the
/// per-source evidence when the rule fires.
pub fn check_rule(
    rule: &DetectionRule,
    w: &WindowState,
    last_alert: Option<f64>,
    now: f64,
) -> Option<Vec<(AgentAddress, u64)>> {
    if let Some(t) = last_alert {
        if now - rule.window < t {
            return None;
        }
    }
    let evidence = w.per_source(rule.window, now);
    let total: u64 = evidence.iter().map(|(_, c)| c).sum();
    if total >= rule.threshold {
        Some(evidence)
    } else {
        None
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DetectionError {
    LocalRuleNeedsNoInterest(String),
}

impl fmt::Display for DetectionError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DetectionError::LocalRuleNeedsNoInterest(id) => {
                write!(f, "rule `{id}` is local-scope and derives no interest")
            }
        }
    }
}

impl core::error::Error for DetectionError {}

/// Build the interest a rule needs for its remote evidence. The counter
/// keeps interest ids fresh per origin.
pub fn derive_interest(
    rule: &DetectionRule,
    agent: &AgentAddress,
    counter: u64,
) -> Result<Interest, DetectionError> {
    let scope = match rule.scope_needed {
        ScopeNeeded::Local => {
            return Err(DetectionError::LocalRuleNeedsNoInterest(rule.rule_id.clone()))
        }
        ScopeNeeded::Domain => InterestScope::Domain,
        ScopeNeeded::Enterprise => InterestScope::Enterprise,
    };
    Ok(Interest {
        interest_id: alloc::format!("{agent}#{counter}"),
        origin: agent.clone(),
        scope,
        category: rule.category.clone(),
        predicate: rule.predicate.clone(),
        issued_at: 0.0,
        ttl: None,
    })
}

/// One signature: first matching entry decides the predicted class.
#[derive(Debug, Clone, PartialEq)]
pub struct SignatureRule {
    pub rule_id: String,
    pub predicate: Predicate,
    pub class: AlertClass,
}

/// Ordered signature list with an implicit final entry predicting Normal.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SignatureRuleBase {
    pub rules: Vec<SignatureRule>,
}

/// First-match classification; records matching no signature are Normal.
pub fn classify_record(rb: &SignatureRuleBase, r: &EventRecord) -> ActivityClass {
    rb.rules
        .iter()
        .find(|rule| eval_predicate(&rule.predicate, r))
        .map(|rule| rule.class.into())
        .unwrap_or(ActivityClass::Normal)
}

/// Per-class rates; `None` when the class has no qualifying records.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub detection_rate: Option<f64>,
    pub false_positive_rate: Option<f64>,
}

/// Per-class recall and fall-out over (actual, predicted) pairs. Every
/// class is present in the output so report layouts stay five rows tall.
pub fn score(pairs: &[(ActivityClass, ActivityClass)]) -> BTreeMap<ActivityClass, ClassMetrics> {
    let mut out = BTreeMap::new();
    for class in ActivityClass::ALL {
        let actual = pairs.iter().filter(|(a, _)| *a == class).count();
        let hits = pairs.iter().filter(|(a, p)| *a == class && *p == class).count();
        let non_actual = pairs.len() - actual;
        let false_hits = pairs.iter().filter(|(a, p)| *a != class && *p == class).count();
        out.insert(
            class,
            ClassMetrics {
                detection_rate: (actual > 0).then(|| hits as f64 / actual as f64),
                false_positive_rate: (non_actual > 0).then(|| false_hits as f64 / non_actual as f64),
            },
        );
    }
    out
}

/// What one observation produced.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Observation {
    pub alerts: Vec<Alert>,
    pub new_interests: Vec<Interest>,
}

/// Detection state of one basic agent: its rules, their window states and
/// suppression marks, the interests already issued, and its signature base.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentDetector {
    pub address: AgentAddress,
    rules: Vec<DetectionRule>,
    signatures: SignatureRuleBase,
    windows: BTreeMap<String, WindowState>,
    last_alert: BTreeMap<String, f64>,
    issued: BTreeSet<String>,
    interest_counter: u64,
    alert_counters: BTreeMap<String, u64>,
}

impl AgentDetector {
    pub fn new(address: AgentAddress, rules: Vec<DetectionRule>, signatures: SignatureRuleBase) -> Self {
        AgentDetector {
            address,
            rules,
            signatures,
            windows: BTreeMap::new(),
            last_alert: BTreeMap::new(),
            issued: BTreeSet::new(),
            interest_counter: 0,
            alert_counters: BTreeMap::new(),
        }
    }

    pub fn rules(&self) -> &[DetectionRule] {
        &self.rules
    }

    pub fn has_signatures(&self) -> bool {
        !self.signatures.rules.is_empty()
    }

    /// Derive the interests of every rule wanting more than local scope,
    /// marking them issued. The harness calls this once at startup so
    /// subscriptions are in place before the first event.
    pub fn preissue_interests(&mut self, issued_at: f64) -> Vec<Interest> {
        let mut out = Vec::new();
        for rule in self.rules.clone() {
            if rule.scope_needed > ScopeNeeded::Local && self.issued.insert(rule.rule_id.clone()) {
                let mut i = derive_interest(&rule, &self.address, self.interest_counter)
                    .expect("non-local rule derives an interest");
                i.issued_at = issued_at;
                self.interest_counter += 1;
                out.push(i);
            }
        }
        out
    }

    /// Feed one event through every rule: append to matching windows, trim,
    /// check thresholds, and issue an interest on a rule's first matching
    /// observation if the harness did not pre-issue it.
    pub fn observe_event(&mut self, e: &EventRecord, now: f64) -> Observation {
        let mut obs = Observation::default();
        for rule in self.rules.clone() {
            if rule.category != e.category || !eval_predicate(&rule.predicate, e) {
                continue;
            }
            if rule.scope_needed > ScopeNeeded::Local && self.issued.insert(rule.rule_id.clone()) {
                let mut i = derive_interest(&rule, &self.address, self.interest_counter)
                    .expect("non-local rule derives an interest");
                i.issued_at = now;
                self.interest_counter += 1;
                obs.new_interests.push(i);
            }
            let w = self.windows.entry(rule.rule_id.clone()).or_default();
            w.push(&e.source, e.time);
            w.trim(rule.window, now);
            if let Some(evidence) = check_rule(&rule, w, self.last_alert.get(&rule.rule_id).copied(), now) {
                self.last_alert.insert(rule.rule_id.clone(), now);
                let n = self.alert_counters.entry(rule.rule_id.clone()).or_insert(0);
                let alert_id = alloc::format!("{}/{}#{}", self.address, rule.rule_id, n);
                *n += 1;
                obs.alerts.push(Alert {
                    alert_id,
                    raiser: self.address.clone(),
                    rule_id: rule.rule_id.clone(),
                    alert_class: rule.alert_class,
                    time: now,
                    evidence: evidence
                        .into_iter()
                        .map(|(source, count)| AlertEvidence { source, count })
                        .collect(),
                });
            }
        }
        obs
    }

    /// In-window count for one rule right now; 0 for unknown rules.
    pub fn window_count(&self, rule_id: &str, now: f64) -> u64 {
        let Some(rule) = self.rules.iter().find(|r| r.rule_id == rule_id) else {
            return 0;
        };
        self.windows
            .get(rule_id)
            .map(|w| w.count(rule.window, now))
            .unwrap_or(0)
    }

    /// Signature classification of one record.
    pub fn classify(&self, e: &EventRecord) -> ActivityClass {
        classify_record(&self.signatures, e)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{AttrValue, CmpOp, Constraint};
    use alloc::vec;

    fn addr(agent: &str) -> AgentAddress {
        AgentAddress::new("d1", "h1", agent)
    }

    fn rule(id: &str, scope: ScopeNeeded, window: f64, threshold: u64) -> DetectionRule {
        DetectionRule {
            rule_id: id.to_string(),
            category: EventCategory::new("icmp.request"),
            predicate: Predicate::always(),
            window,
            threshold,
            scope_needed: scope,
            alert_class: AlertClass::Dos,
        }
    }

    fn event(seq: u64, t: f64, source: &str, category: &str) -> EventRecord {
        EventRecord {
            seq,
            time: t,
            source: addr(source),
            category: EventCategory::new(category),
            attributes: vec![],
        }
    }

    #[test]
    fn irrelevant_event_is_a_no_op() {
        let mut d = AgentDetector::new(addr("a1"), vec![rule("r", ScopeNeeded::Local, 5.0, 3)], SignatureRuleBase::default());
        let before = d.clone();
        let obs = d.observe_event(&event(0, 1.0, "a1", "dns.query"), 1.0);
        assert!(obs.alerts.is_empty());
        assert!(obs.new_interests.is_empty());
        assert_eq!(d, before);
    }

    #[test]
    fn threshold_crossing_raises_alert_with_recounted_evidence() {
        let mut d = AgentDetector::new(addr("a1"), vec![rule("r", ScopeNeeded::Local, 5.0, 3)], SignatureRuleBase::default());
        assert!(d.observe_event(&event(0, 1.0, "a1", "icmp.request"), 1.0).alerts.is_empty());
        assert!(d.observe_event(&event(1, 2.0, "a1", "icmp.request"), 2.0).alerts.is_empty());
        let obs = d.observe_event(&event(2, 3.0, "a1", "icmp.request"), 3.0);
        assert_eq!(obs.alerts.len(), 1);
        let alert = &obs.alerts[0];
        assert_eq!(alert.time, 3.0);
        // brute-force recount of events in (3-5, 3]
        let total: u64 = alert.evidence.iter().map(|ev| ev.count).sum();
        assert_eq!(total, 3);
        assert_eq!(alert.alert_id, "d1/h1/a1/r#0");
    }

    #[test]
    fn first_matching_event_of_domain_rule_issues_one_interest() {
        let mut d = AgentDetector::new(addr("a1"), vec![rule("r", ScopeNeeded::Domain, 5.0, 100)], SignatureRuleBase::default());
        let obs = d.observe_event(&event(0, 1.0, "a1", "icmp.request"), 1.0);
        assert_eq!(obs.new_interests.len(), 1);
        let i = &obs.new_interests[0];
        assert_eq!(i.scope, InterestScope::Domain);
        assert_eq!(i.category, EventCategory::new("icmp.request"));
        assert_eq!(i.origin, addr("a1"));
        // only once per rule per run
        let obs2 = d.observe_event(&event(1, 2.0, "a1", "icmp.request"), 2.0);
        assert!(obs2.new_interests.is_empty());
    }

    #[test]
    fn preissue_covers_all_non_local_rules_exactly_once() {
        let mut d = AgentDetector::new(
            addr("a1"),
            vec![
                rule("local", ScopeNeeded::Local, 5.0, 3),
                rule("dom", ScopeNeeded::Domain, 5.0, 3),
                rule("ent", ScopeNeeded::Enterprise, 5.0, 3),
            ],
            SignatureRuleBase::default(),
        );
        let interests = d.preissue_interests(0.0);
        assert_eq!(interests.len(), 2);
        assert_eq!(interests[0].scope, InterestScope::Domain);
        assert_eq!(interests[1].scope, InterestScope::Enterprise);
        assert_ne!(interests[0].interest_id, interests[1].interest_id);
        // later observations do not re-issue
        let obs = d.observe_event(&event(0, 1.0, "a1", "icmp.request"), 1.0);
        assert!(obs.new_interests.is_empty());
    }

    #[test]
    fn window_count_half_open_interval() {
        let mut w = WindowState::default();
        for t in [0.0, 4.0, 9.0] {
            w.push(&addr("a1"), t);
        }
        // window=5, now=9: interval (4, 9] keeps 9 only... the boundary
        // event at t=4 is excluded, t=9 included, t=0 long gone
        assert_eq!(w.count(5.0, 9.0), 1);
        // at now=8 the interval (3, 8] keeps t=4
        assert_eq!(w.count(5.0, 8.0), 1);
        // recount oracle at now=9, window=9: (0, 9] keeps 4 and 9
        assert_eq!(w.count(9.0, 9.0), 2);
        assert_eq!(WindowState::default().count(5.0, 0.0), 0);
    }

    #[test]
    fn window_count_sums_across_sources() {
        let mut w = WindowState::default();
        for t in [1.0, 2.0] {
            w.push(&addr("a1"), t);
        }
        for t in [1.5, 2.5, 3.0] {
            w.push(&addr("a2"), t);
        }
        assert_eq!(w.count(5.0, 3.0), 5);
        let per = w.per_source(5.0, 3.0);
        assert_eq!(per.len(), 2);
        assert_eq!(per.iter().map(|(_, c)| c).sum::<u64>(), 5);
    }

    #[test]
    fn check_rule_boundary_and_suppression() {
        let r = rule("r", ScopeNeeded::Local, 5.0, 3);
        let mut w = WindowState::default();
        w.push(&addr("a1"), 1.0);
        w.push(&addr("a1"), 2.0);
        // threshold - 1: no alert
        assert!(check_rule(&r, &w, None, 2.0).is_none());
        w.push(&addr("a2"), 3.0);
        // exactly threshold: alert with per-source evidence
        let ev = check_rule(&r, &w, None, 3.0).unwrap();
        assert_eq!(ev, vec![(addr("a1"), 2), (addr("a2"), 1)]);
        // a qualifying count 1s later inside the same window is suppressed
        w.push(&addr("a1"), 4.0);
        assert!(check_rule(&r, &w, Some(3.0), 4.0).is_none());
        // once the window slides past the triggering burst the rule re-arms
        let mut later = WindowState::default();
        for t in [8.5, 8.6, 8.7] {
            later.push(&addr("a1"), t);
        }
        assert!(check_rule(&r, &later, Some(3.0), 8.7).is_some());
    }

    #[test]
    fn check_rule_never_fires_below_recount() {
        let r = rule("r", ScopeNeeded::Local, 4.0, 2);
        let mut w = WindowState::default();
        w.push(&addr("a1"), 0.5);
        w.push(&addr("a1"), 1.0);
        // both events have left the window by now=6
        assert_eq!(w.count(4.0, 6.0), 0);
        assert!(check_rule(&r, &w, None, 6.0).is_none());
    }

    #[test]
    fn derive_interest_maps_scope_and_rejects_local() {
        let dom = rule("r", ScopeNeeded::Domain, 5.0, 3);
        let i = derive_interest(&dom, &addr("a1"), 0).unwrap();
        assert_eq!(i.scope, InterestScope::Domain);
        assert_eq!(i.predicate, dom.predicate);

        let ent = rule("r", ScopeNeeded::Enterprise, 5.0, 3);
        assert_eq!(derive_interest(&ent, &addr("a1"), 1).unwrap().scope, InterestScope::Enterprise);

        let i0 = derive_interest(&ent, &addr("a1"), 0).unwrap();
        let i1 = derive_interest(&ent, &addr("a1"), 1).unwrap();
        assert_ne!(i0.interest_id, i1.interest_id);

        let local = rule("r", ScopeNeeded::Local, 5.0, 3);
        assert!(derive_interest(&local, &addr("a1"), 0).is_err());
    }

    fn kdd_event(attrs: Vec<(&str, AttrValue)>) -> EventRecord {
        EventRecord {
            seq: 0,
            time: 0.0,
            source: addr("a1"),
            category: EventCategory::new("kdd.connection"),
            attributes: attrs.into_iter().map(|(n, v)| (n.to_string(), v)).collect(),
        }
    }

    #[test]
    fn classify_record_first_match_wins() {
        assert_eq!(
            classify_record(&SignatureRuleBase::default(), &kdd_event(vec![])),
            ActivityClass::Normal
        );

        let rb = SignatureRuleBase {
            rules: vec![
                SignatureRule {
                    rule_id: "smurf".into(),
                    predicate: Predicate::new(vec![
                        Constraint::new("service", CmpOp::TextEq, AttrValue::Text("ecr_i".into())),
                        Constraint::new("count", CmpOp::Ge, AttrValue::Int(200)),
                    ]),
                    class: AlertClass::Dos,
                },
                SignatureRule {
                    rule_id: "probeish".into(),
                    predicate: Predicate::new(vec![Constraint::new(
                        "count",
                        CmpOp::Ge,
                        AttrValue::Int(100),
                    )]),
                    class: AlertClass::Probe,
                },
            ],
        };
        let smurf = kdd_event(vec![
            ("service", AttrValue::Text("ecr_i".into())),
            ("count", AttrValue::Int(250)),
        ]);
        // both rules match, the earlier one decides
        assert_eq!(classify_record(&rb, &smurf), ActivityClass::Dos);
        // records missing every referenced attribute fall through to Normal
        assert_eq!(classify_record(&rb, &kdd_event(vec![])), ActivityClass::Normal);
    }

    #[test]
    fn score_all_correct() {
        let pairs: Vec<_> = ActivityClass::ALL
            .into_iter()
            .map(|c| (c, c))
            .collect();
        let m = score(&pairs);
        for c in ActivityClass::ALL {
            assert_eq!(m[&c].detection_rate, Some(1.0));
            assert_eq!(m[&c].false_positive_rate, Some(0.0));
        }
    }

    #[test]
    fn score_hand_computed_confusion() {
        // 10 records: 3 actual DoS of which 2 predicted DoS;
        // 1 of the 7 non-DoS predicted DoS
        let pairs = vec![
            (ActivityClass::Dos, ActivityClass::Dos),
            (ActivityClass::Dos, ActivityClass::Dos),
            (ActivityClass::Dos, ActivityClass::Normal),
            (ActivityClass::Normal, ActivityClass::Dos),
            (ActivityClass::Normal, ActivityClass::Normal),
            (ActivityClass::Normal, ActivityClass::Normal),
            (ActivityClass::Normal, ActivityClass::Normal),
            (ActivityClass::Probe, ActivityClass::Probe),
            (ActivityClass::Probe, ActivityClass::Probe),
            (ActivityClass::R2u, ActivityClass::R2u),
        ];
        let m = score(&pairs);
        assert_eq!(m[&ActivityClass::Dos].detection_rate, Some(2.0 / 3.0));
        assert_eq!(m[&ActivityClass::Dos].false_positive_rate, Some(1.0 / 7.0));
        // U2R has no actuals: undefined detection rate, defined fall-out
        assert_eq!(m[&ActivityClass::U2r].detection_rate, None);
        assert_eq!(m[&ActivityClass::U2r].false_positive_rate, Some(0.0));
    }

    #[test]
    fn score_empty_input_all_undefined() {
        let m = score(&[]);
        for c in ActivityClass::ALL {
            assert_eq!(m[&c].detection_rate, None);
            assert_eq!(m[&c].false_positive_rate, None);
        }
    }

    #[test]
    fn label_catalog_maps_known_attacks() {
        assert_eq!(class_for_label("smurf."), Some(ActivityClass::Dos));
        assert_eq!(class_for_label("portsweep"), Some(ActivityClass::Probe));
        assert_eq!(class_for_label("guess_passwd"), Some(ActivityClass::R2u));
        assert_eq!(class_for_label("buffer_overflow"), Some(ActivityClass::U2r));
        assert_eq!(class_for_label("normal."), Some(ActivityClass::Normal));
        assert_eq!(class_for_label("DoS"), Some(ActivityClass::Dos));
        assert_eq!(class_for_label("weird_zero_day"), None);
    }
}
