//! Domain types shared by every tier: identifiers, events, predicates,
//! interests, and the validated enterprise topology.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

macro_rules! id_newtype {
    ($name:ident, $doc:literal) => {
        #[doc = $doc]
        #[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
        #[serde(transparent)]
        pub struct $name(pub String);

        impl $name {
            pub fn new(s: impl Into<String>) -> Self {
                Self(s.into())
            }

            pub fn as_str(&self) -> &str {
                &self.0
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&self.0)
            }
        }

        impl From<&str> for $name {
            fn from(s: &str) -> Self {
                Self(s.to_string())
            }
        }
    };
}

id_newtype!(DomainId, "Identifier of one administrative domain (LAN).");
id_newtype!(HostId, "Identifier of one workstation, unique within its domain.");
id_newtype!(AgentId, "Identifier of one basic agent, unique within its host.");
id_newtype!(EventCategory, "Tag naming a kind of collected data, compared by exact text equality.");

/// Fully qualified address of a basic agent: domain / host / agent.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct AgentAddress {
    pub domain: DomainId,
    pub host: HostId,
    pub agent: AgentId,
}

impl AgentAddress {
    pub fn new(
        domain: impl Into<String>,
        host: impl Into<String>,
        agent: impl Into<String>,
    ) -> Self {
        Self {
            domain: DomainId::new(domain),
            host: HostId::new(host),
            agent: AgentId::new(agent),
        }
    }
}

impl fmt::Display for AgentAddress {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}/{}", self.domain, self.host, self.agent)
    }
}

impl Serialize for AgentAddress {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for AgentAddress {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let raw = String::deserialize(d)?;
        let mut parts = raw.splitn(3, '/');
        match (parts.next(), parts.next(), parts.next()) {
            (Some(dom), Some(host), Some(agent)) if !dom.is_empty() && !host.is_empty() && !agent.is_empty() => {
                Ok(AgentAddress::new(dom, host, agent))
            }
            _ => Err(serde::de::Error::custom("agent address must be domain/host/agent")),
        }
    }
}

/// One typed attribute value carried by an event record.
#[derive(Debug, Clone, PartialEq)]
pub enum AttrValue {
    Int(i64),
    Real(f64),
    Text(String),
}

impl AttrValue {
    /// Numeric view, promoting integers to reals. Text has none.
    fn as_real(&self) -> Option<f64> {
        match self {
            AttrValue::Int(v) => Some(*v as f64),
            AttrValue::Real(v) => Some(*v),
            AttrValue::Text(_) => None,
        }
    }

    fn as_text(&self) -> Option<&str> {
        match self {
            AttrValue::Text(s) => Some(s),
            _ => None,
        }
    }
}

impl fmt::Display for AttrValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AttrValue::Int(v) => write!(f, "{v}"),
            AttrValue::Real(v) => write!(f, "{v}"),
            AttrValue::Text(s) => f.write_str(s),
        }
    }
}

/// One observed datum flowing through the system.
#[derive(Debug, Clone, PartialEq)]
pub struct EventRecord {
    /// Monotone number assigned at ingestion, strictly increasing in trace order.
    pub seq: u64,
    /// Event time in seconds; non-decreasing in trace order.
    pub time: f64,
    /// Address of the producing basic agent.
    pub source: AgentAddress,
    pub category: EventCategory,
    /// Ordered name/value pairs.
    pub attributes: Vec<(String, AttrValue)>,
}

impl EventRecord {
    pub fn attr(&self, name: &str) -> Option<&AttrValue> {
        self.attributes
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, v)| v)
    }
}

/// Comparison operator of one atomic predicate constraint.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CmpOp {
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
    TextEq,
    TextPrefix,
}

impl fmt::Display for CmpOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            CmpOp::Eq => "=",
            CmpOp::Ne => "!=",
            CmpOp::Lt => "<",
            CmpOp::Le => "<=",
            CmpOp::Gt => ">",
            CmpOp::Ge => ">=",
            CmpOp::TextEq => "eq",
            CmpOp::TextPrefix => "prefix",
        };
        f.write_str(s)
    }
}

/// One atomic constraint: `attribute op literal`.
#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub attribute: String,
    pub op: CmpOp,
    pub literal: AttrValue,
}

impl Constraint {
    pub fn new(attribute: impl Into<String>, op: CmpOp, literal: AttrValue) -> Self {
        Self {
            attribute: attribute.into(),
            op,
            literal,
        }
    }

    /// Whether this constraint holds for `e`. A missing attribute or a
    /// cross-type comparison (text against number) yields false.
    pub fn holds(&self, e: &EventRecord) -> bool {
        let Some(actual) = e.attr(&self.attribute) else {
            return false;
        };
        match self.op {
            CmpOp::Eq | CmpOp::Ne => {
                let equal = match (actual.as_real(), self.literal.as_real()) {
                    (Some(a), Some(b)) => a == b,
                    _ => match (actual.as_text(), self.literal.as_text()) {
                        (Some(a), Some(b)) => a == b,
                        // one side numeric, the other text
                        _ => return false,
                    },
                };
                if self.op == CmpOp::Eq {
                    equal
                } else {
                    !equal
                }
            }
            CmpOp::Lt | CmpOp::Le | CmpOp::Gt | CmpOp::Ge => {
                match (actual.as_real(), self.literal.as_real()) {
                    (Some(a), Some(b)) => match self.op {
                        CmpOp::Lt => a < b,
                        CmpOp::Le => a <= b,
                        CmpOp::Gt => a > b,
                        CmpOp::Ge => a >= b,
                        _ => unreachable!(),
                    },
                    _ => false,
                }
            }
            CmpOp::TextEq | CmpOp::TextPrefix => {
                match (actual.as_text(), self.literal.as_text()) {
                    (Some(a), Some(b)) => {
                        if self.op == CmpOp::TextEq {
                            a == b
                        } else {
                            a.starts_with(b)
                        }
                    }
                    _ => false,
                }
            }
        }
    }
}

/// Conjunction of atomic constraints. The empty conjunction is true.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Predicate {
    pub constraints: Vec<Constraint>,
}

impl Predicate {
    /// The empty conjunction, matching every record.
    pub fn always() -> Self {
        Self::default()
    }

    pub fn new(constraints: Vec<Constraint>) -> Self {
        Self { constraints }
    }

    pub fn eval(&self, e: &EventRecord) -> bool {
        self.constraints.iter().all(|c| c.holds(e))
    }
}

/// True iff every constraint of `p` holds against `e`'s attributes.
pub fn eval_predicate(p: &Predicate, e: &EventRecord) -> bool {
    p.eval(e)
}

/// Where an interest wants its data from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum InterestScope {
    /// Data from one named host (the host's domain is carried along since
    /// host identifiers are only unique per domain).
    HostDirected { domain: DomainId, host: HostId },
    /// Data from every host of one named domain.
    DomainDirected(DomainId),
    /// Data from the origin's own host only.
    Local,
    /// Data from every host of the origin's domain.
    Domain,
    /// Data from the whole enterprise.
    Enterprise,
    /// Origin has no idea where the data lives; routed exactly like
    /// [`InterestScope::Enterprise`], kept distinct because the provenance
    /// differs.
    Propagated,
}

/// An origin-stamped request for data: the unit of subscription routing.
#[derive(Debug, Clone, PartialEq)]
pub struct Interest {
    /// Globally unique: origin address plus an origin-local counter.
    pub interest_id: String,
    pub origin: AgentAddress,
    pub scope: InterestScope,
    pub category: EventCategory,
    pub predicate: Predicate,
    pub issued_at: f64,
    /// Lifetime in seconds; `None` means the interest never expires.
    pub ttl: Option<f64>,
}

/// Whether `producer` falls inside `interest`'s scope, i.e. whether data
/// produced there may be delivered to the interest's origin at all.
pub fn scope_admits(interest: &Interest, producer: &AgentAddress) -> bool {
    let origin = &interest.origin;
    match &interest.scope {
        InterestScope::Local => {
            producer.domain == origin.domain && producer.host == origin.host
        }
        InterestScope::Domain => producer.domain == origin.domain,
        InterestScope::Enterprise | InterestScope::Propagated => true,
        InterestScope::HostDirected { domain, host } => {
            producer.domain == *domain && producer.host == *host
        }
        InterestScope::DomainDirected(domain) => producer.domain == *domain,
    }
}

/// How an interest looks from one observer's position in the hierarchy.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RoutingClass {
    LocalHost,
    SameDomainOtherHost,
    OtherDomainHost,
    OwnDomainWide,
    OtherDomainWide,
    EnterpriseWide,
}

/// Classify `i` relative to an observer sitting on `observer_host` inside
/// `observer_domain`. Total: every (scope, observer) pair maps to exactly
/// one class.
pub fn classify_scope(
    i: &Interest,
    observer_host: &HostId,
    observer_domain: &DomainId,
) -> RoutingClass {
    match &i.scope {
        InterestScope::HostDirected { domain, host } => {
            if domain == observer_domain {
                if host == observer_host {
                    RoutingClass::LocalHost
                } else {
                    RoutingClass::SameDomainOtherHost
                }
            } else {
                RoutingClass::OtherDomainHost
            }
        }
        InterestScope::DomainDirected(domain) => {
            if domain == observer_domain {
                RoutingClass::OwnDomainWide
            } else {
                RoutingClass::OtherDomainWide
            }
        }
        InterestScope::Local => RoutingClass::LocalHost,
        InterestScope::Domain => RoutingClass::OwnDomainWide,
        InterestScope::Enterprise | InterestScope::Propagated => RoutingClass::EnterpriseWide,
    }
}

/// What one basic agent produces and which detection rules it runs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AgentDescriptor {
    pub address: AgentAddress,
    /// Event categories this agent collects.
    pub produces: Vec<EventCategory>,
    /// Rule ids (detection or signature) assigned to this agent.
    pub detects: Vec<String>,
}

/// Name of one node of the hierarchy; the canonical identity used in
/// message trace paths and fault schedules.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub enum NodeName {
    Ba(AgentAddress),
    Wca { domain: DomainId, host: HostId },
    Dca(DomainId),
    Eca,
}

impl fmt::Display for NodeName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NodeName::Ba(addr) => write!(f, "ba:{addr}"),
            NodeName::Wca { domain, host } => write!(f, "wca:{domain}/{host}"),
            NodeName::Dca(domain) => write!(f, "dca:{domain}"),
            NodeName::Eca => f.write_str("eca"),
        }
    }
}

impl core::str::FromStr for NodeName {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "eca" {
            return Ok(NodeName::Eca);
        }
        let bad = || alloc::format!("malformed node name `{s}`");
        let (kind, rest) = s.split_once(':').ok_or_else(bad)?;
        let parts: Vec<&str> = rest.split('/').collect();
        if parts.iter().any(|p| p.is_empty()) {
            return Err(bad());
        }
        match (kind, parts.as_slice()) {
            ("ba", [d, h, a]) => Ok(NodeName::Ba(AgentAddress::new(*d, *h, *a))),
            ("wca", [d, h]) => Ok(NodeName::Wca {
                domain: DomainId::new(*d),
                host: HostId::new(*h),
            }),
            ("dca", [d]) => Ok(NodeName::Dca(DomainId::new(*d))),
            _ => Err(bad()),
        }
    }
}

/// Which kind of link a message traversal crossed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum LinkTier {
    BaWca,
    WcaWca,
    WcaDca,
    DcaDca,
    DcaEca,
}

impl LinkTier {
    pub fn as_str(&self) -> &'static str {
        match self {
            LinkTier::BaWca => "ba_wca",
            LinkTier::WcaWca => "wca_wca",
            LinkTier::WcaDca => "wca_dca",
            LinkTier::DcaDca => "dca_dca",
            LinkTier::DcaEca => "dca_eca",
        }
    }
}

/// Unvalidated topology description, produced by the file parser.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RawTopology {
    pub domains: Vec<String>,
    pub hosts: Vec<RawHost>,
    pub agents: Vec<RawAgent>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawHost {
    pub name: String,
    pub domain: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawAgent {
    pub name: String,
    /// Either a bare host name (must be unambiguous) or `domain/host`.
    pub host: String,
    pub produces: Vec<String>,
    pub detects: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HostSpec {
    pub host: HostId,
    pub agents: Vec<AgentDescriptor>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DomainSpec {
    pub domain: DomainId,
    pub hosts: Vec<HostSpec>,
}

/// The validated enterprise graph. One ECA, one DCA per domain, one WCA
/// per host, any number of basic agents per host; the link set is implied
/// by the hierarchy and materialized by [`Topology::links`].
#[derive(Debug, Clone, PartialEq)]
pub struct Topology {
    pub domains: Vec<DomainSpec>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TopologyError {
    EmptyIdentifier { kind: &'static str },
    DuplicateDomain(String),
    DuplicateHost { domain: String, host: String },
    DuplicateAgent { host: String, agent: String },
    UnknownDomain { host: String, domain: String },
    UnknownHost { agent: String, host: String },
    AmbiguousHost { agent: String, host: String },
    NoHosts,
}

impl fmt::Display for TopologyError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TopologyError::EmptyIdentifier { kind } => write!(f, "empty {kind} identifier"),
            TopologyError::DuplicateDomain(d) => write!(f, "duplicate domain `{d}`"),
            TopologyError::DuplicateHost { domain, host } => {
                write!(f, "duplicate host `{host}` in domain `{domain}`")
            }
            TopologyError::DuplicateAgent { host, agent } => {
                write!(f, "duplicate agent `{agent}` on host `{host}`")
            }
            TopologyError::UnknownDomain { host, domain } => {
                write!(f, "host `{host}` references unknown domain `{domain}`")
            }
            TopologyError::UnknownHost { agent, host } => {
                write!(f, "agent `{agent}` references unknown host `{host}`")
            }
            TopologyError::AmbiguousHost { agent, host } => write!(
                f,
                "agent `{agent}` references host `{host}` which exists in more than one domain; qualify it as domain/host"
            ),
            TopologyError::NoHosts => f.write_str("topology has no hosts"),
        }
    }
}

impl core::error::Error for TopologyError {}

/// Check a raw description against every structural invariant and return
/// the validated topology. Errors name the offending identifier.
pub fn validate_topology(raw: &RawTopology) -> Result<Topology, TopologyError> {
    let mut domains: Vec<DomainSpec> = Vec::new();
    for d in &raw.domains {
        if d.is_empty() {
            return Err(TopologyError::EmptyIdentifier { kind: "domain" });
        }
        if domains.iter().any(|spec| spec.domain.as_str() == d) {
            return Err(TopologyError::DuplicateDomain(d.clone()));
        }
        domains.push(DomainSpec {
            domain: DomainId::new(d.clone()),
            hosts: Vec::new(),
        });
    }

    for h in &raw.hosts {
        if h.name.is_empty() {
            return Err(TopologyError::EmptyIdentifier { kind: "host" });
        }
        if h.domain.is_empty() {
            return Err(TopologyError::UnknownDomain {
                host: h.name.clone(),
                domain: String::new(),
            });
        }
        let spec = domains
            .iter_mut()
            .find(|spec| spec.domain.as_str() == h.domain)
            .ok_or_else(|| TopologyError::UnknownDomain {
                host: h.name.clone(),
                domain: h.domain.clone(),
            })?;
        if spec.hosts.iter().any(|hs| hs.host.as_str() == h.name) {
            return Err(TopologyError::DuplicateHost {
                domain: h.domain.clone(),
                host: h.name.clone(),
            });
        }
        spec.hosts.push(HostSpec {
            host: HostId::new(h.name.clone()),
            agents: Vec::new(),
        });
    }

    if domains.iter().all(|spec| spec.hosts.is_empty()) {
        return Err(TopologyError::NoHosts);
    }

    // Index host names for bare-name resolution before borrowing mutably.
    let mut host_domains: BTreeMap<String, Vec<String>> = BTreeMap::new();
    for spec in &domains {
        for hs in &spec.hosts {
            host_domains
                .entry(hs.host.as_str().to_string())
                .or_default()
                .push(spec.domain.as_str().to_string());
        }
    }

    for a in &raw.agents {
        if a.name.is_empty() {
            return Err(TopologyError::EmptyIdentifier { kind: "agent" });
        }
        let (domain_name, host_name) = match a.host.split_once('/') {
            Some((d, h)) => (d.to_string(), h.to_string()),
            None => {
                let owners = host_domains.get(&a.host).cloned().unwrap_or_default();
                match owners.as_slice() {
                    [] => {
                        return Err(TopologyError::UnknownHost {
                            agent: a.name.clone(),
                            host: a.host.clone(),
                        })
                    }
                    [one] => (one.clone(), a.host.clone()),
                    _ => {
                        return Err(TopologyError::AmbiguousHost {
                            agent: a.name.clone(),
                            host: a.host.clone(),
                        })
                    }
                }
            }
        };
        let spec = domains
            .iter_mut()
            .find(|spec| spec.domain.as_str() == domain_name)
            .ok_or_else(|| TopologyError::UnknownHost {
                agent: a.name.clone(),
                host: a.host.clone(),
            })?;
        let hs = spec
            .hosts
            .iter_mut()
            .find(|hs| hs.host.as_str() == host_name)
            .ok_or_else(|| TopologyError::UnknownHost {
                agent: a.name.clone(),
                host: a.host.clone(),
            })?;
        if hs.agents.iter().any(|d| d.address.agent.as_str() == a.name) {
            return Err(TopologyError::DuplicateAgent {
                host: host_name.clone(),
                agent: a.name.clone(),
            });
        }
        if a.produces.iter().any(|c| c.is_empty()) {
            return Err(TopologyError::EmptyIdentifier { kind: "category" });
        }
        hs.agents.push(AgentDescriptor {
            address: AgentAddress {
                domain: spec.domain.clone(),
                host: hs.host.clone(),
                agent: AgentId::new(a.name.clone()),
            },
            produces: a.produces.iter().map(|c| EventCategory::new(c.clone())).collect(),
            detects: a.detects.clone(),
        });
    }

    Ok(Topology { domains })
}

impl Topology {
    pub fn host_count(&self) -> usize {
        self.domains.iter().map(|d| d.hosts.len()).sum()
    }

    pub fn has_domain(&self, domain: &DomainId) -> bool {
        self.domains.iter().any(|d| &d.domain == domain)
    }

    pub fn domain(&self, domain: &DomainId) -> Option<&DomainSpec> {
        self.domains.iter().find(|d| &d.domain == domain)
    }

    pub fn host(&self, domain: &DomainId, host: &HostId) -> Option<&HostSpec> {
        self.domain(domain)?.hosts.iter().find(|h| &h.host == host)
    }

    pub fn agent(&self, addr: &AgentAddress) -> Option<&AgentDescriptor> {
        self.host(&addr.domain, &addr.host)?
            .agents
            .iter()
            .find(|a| a.address.agent == addr.agent)
    }

    /// Every basic agent, in domain/host/agent order.
    pub fn agents(&self) -> impl Iterator<Item = &AgentDescriptor> {
        self.domains
            .iter()
            .flat_map(|d| d.hosts.iter())
            .flat_map(|h| h.agents.iter())
    }

    /// Resolve a bare host name to its (domain, host) pair; errors when the
    /// name is unknown or appears in more than one domain.
    pub fn resolve_host(&self, name: &str) -> Result<(DomainId, HostId), TopologyError> {
        let mut found: Option<(DomainId, HostId)> = None;
        for d in &self.domains {
            for h in &d.hosts {
                if h.host.as_str() == name {
                    if found.is_some() {
                        return Err(TopologyError::AmbiguousHost {
                            agent: String::new(),
                            host: name.to_string(),
                        });
                    }
                    found = Some((d.domain.clone(), h.host.clone()));
                }
            }
        }
        found.ok_or_else(|| TopologyError::UnknownHost {
            agent: String::new(),
            host: name.to_string(),
        })
    }

    /// Every node of the hierarchy, BAs included, in canonical order.
    pub fn nodes(&self) -> Vec<NodeName> {
        let mut out = Vec::new();
        for d in &self.domains {
            out.push(NodeName::Dca(d.domain.clone()));
            for h in &d.hosts {
                out.push(NodeName::Wca {
                    domain: d.domain.clone(),
                    host: h.host.clone(),
                });
                for a in &h.agents {
                    out.push(NodeName::Ba(a.address.clone()));
                }
            }
        }
        out.push(NodeName::Eca);
        out.sort();
        out
    }

    /// The materialized link set: BA-WCA, WCA-WCA within a domain, WCA-DCA,
    /// DCA-DCA, DCA-ECA. Each undirected link appears once with its
    /// endpoints in sorted order.
    pub fn links(&self) -> BTreeSet<(NodeName, NodeName)> {
        let mut links = BTreeSet::new();
        let mut add = |a: NodeName, b: NodeName| {
            if a <= b {
                links.insert((a, b));
            } else {
                links.insert((b, a));
            }
        };
        for d in &self.domains {
            let dca = NodeName::Dca(d.domain.clone());
            add(dca.clone(), NodeName::Eca);
            for (i, h) in d.hosts.iter().enumerate() {
                let wca = NodeName::Wca {
                    domain: d.domain.clone(),
                    host: h.host.clone(),
                };
                add(wca.clone(), dca.clone());
                for a in &h.agents {
                    add(NodeName::Ba(a.address.clone()), wca.clone());
                }
                for other in &d.hosts[i + 1..] {
                    add(
                        wca.clone(),
                        NodeName::Wca {
                            domain: d.domain.clone(),
                            host: other.host.clone(),
                        },
                    );
                }
            }
        }
        for (i, a) in self.domains.iter().enumerate() {
            for b in &self.domains[i + 1..] {
                let da = NodeName::Dca(a.domain.clone());
                let db = NodeName::Dca(b.domain.clone());
                if da <= db {
                    links.insert((da, db));
                } else {
                    links.insert((db, da));
                }
            }
        }
        links
    }
}
