//! Per-host agent registry and per-node interest registry with
//! reverse-path bookkeeping. A registry is owned by exactly one node and
//! mutated only by that node's handler; first arrival wins on duplicate
//! interest ids so the reverse path stays stable.

use alloc::collections::BTreeSet;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use crate::model::{
    eval_predicate, scope_admits, AgentDescriptor, AgentId, DomainId, EventCategory, EventRecord,
    HostId, Interest, NodeName, Topology,
};

/// Reference to a node adjacent to a registry's owner, as the owner sees it.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub enum NodeRef {
    /// A basic agent on the owner's own host (WCA owners only).
    LocalAgent(AgentId),
    /// A WCA: another host of the same domain for WCA owners, any host of
    /// the own domain for DCA owners.
    PeerWca(HostId),
    /// The DCA above a WCA.
    OwnDca,
    /// A DCA of another domain (DCA owners) or any DCA (the ECA).
    PeerDca(DomainId),
    /// The enterprise coordinator above a DCA.
    Eca,
}

impl fmt::Display for NodeRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NodeRef::LocalAgent(a) => write!(f, "agent:{a}"),
            NodeRef::PeerWca(h) => write!(f, "wca:{h}"),
            NodeRef::OwnDca => f.write_str("dca"),
            NodeRef::PeerDca(d) => write!(f, "dca:{d}"),
            NodeRef::Eca => f.write_str("eca"),
        }
    }
}

/// The nodes adjacent to one registry owner, per the topology link set.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Neighborhood {
    pub local_agents: BTreeSet<AgentId>,
    pub peer_hosts: BTreeSet<HostId>,
    pub peer_domains: BTreeSet<DomainId>,
    pub has_dca: bool,
    pub has_eca: bool,
}

impl Neighborhood {
    /// Adjacency of the WCA on (`domain`, `host`): its own BAs, the other
    /// hosts of the domain, and the domain's DCA.
    pub fn for_wca(topo: &Topology, domain: &DomainId, host: &HostId) -> Self {
        let mut n = Neighborhood { has_dca: true, ..Default::default() };
        if let Some(d) = topo.domain(domain) {
            for h in &d.hosts {
                if &h.host == host {
                    n.local_agents = h.agents.iter().map(|a| a.address.agent.clone()).collect();
                } else {
                    n.peer_hosts.insert(h.host.clone());
                }
            }
        }
        n
    }

    /// Adjacency of the DCA of `domain`: every WCA of the domain, every
    /// peer DCA, and the ECA.
    pub fn for_dca(topo: &Topology, domain: &DomainId) -> Self {
        let mut n = Neighborhood { has_eca: true, ..Default::default() };
        for d in &topo.domains {
            if &d.domain == domain {
                n.peer_hosts = d.hosts.iter().map(|h| h.host.clone()).collect();
            } else {
                n.peer_domains.insert(d.domain.clone());
            }
        }
        n
    }

    /// Adjacency of the ECA: every DCA.
    pub fn for_eca(topo: &Topology) -> Self {
        Neighborhood {
            peer_domains: topo.domains.iter().map(|d| d.domain.clone()).collect(),
            ..Default::default()
        }
    }

    pub fn contains(&self, r: &NodeRef) -> bool {
        match r {
            NodeRef::LocalAgent(a) => self.local_agents.contains(a),
            NodeRef::PeerWca(h) => self.peer_hosts.contains(h),
            NodeRef::OwnDca => self.has_dca,
            NodeRef::PeerDca(d) => self.peer_domains.contains(d),
            NodeRef::Eca => self.has_eca,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RegistryError {
    DuplicateAgent(AgentId),
    ForeignAgent { agent: AgentId, host: HostId },
    NonAdjacentUpstream { upstream: String },
}

impl fmt::Display for RegistryError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RegistryError::DuplicateAgent(a) => write!(f, "agent `{a}` already registered"),
            RegistryError::ForeignAgent { agent, host } => {
                write!(f, "agent `{agent}` does not live on host `{host}`")
            }
            RegistryError::NonAdjacentUpstream { upstream } => {
                write!(f, "upstream `{upstream}` is not adjacent to the registry owner")
            }
        }
    }
}

impl core::error::Error for RegistryError {}

/// What one host knows about its own basic agents.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AgentRegistry {
    pub owner_domain: DomainId,
    pub owner_host: HostId,
    entries: Vec<AgentDescriptor>,
}

impl AgentRegistry {
    pub fn new(owner_domain: DomainId, owner_host: HostId) -> Self {
        Self { owner_domain, owner_host, entries: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[AgentDescriptor] {
        &self.entries
    }

    /// Add `d` to the registry; rejects agents of other hosts and duplicate
    /// agent ids, naming the offender.
    pub fn register_agent(&mut self, d: AgentDescriptor) -> Result<(), RegistryError> {
        if d.address.host != self.owner_host || d.address.domain != self.owner_domain {
            return Err(RegistryError::ForeignAgent {
                agent: d.address.agent,
                host: self.owner_host.clone(),
            });
        }
        if self.entries.iter().any(|e| e.address.agent == d.address.agent) {
            return Err(RegistryError::DuplicateAgent(d.address.agent));
        }
        self.entries.push(d);
        Ok(())
    }

    /// The agents able to collect `category`, in registration order.
    pub fn find_servicers(&self, category: &EventCategory) -> Vec<AgentId> {
        self.entries
            .iter()
            .filter(|e| e.produces.contains(category))
            .map(|e| e.address.agent.clone())
            .collect()
    }
}

/// One registry entry binding an interest to the hop data must return through.
#[derive(Debug, Clone, PartialEq)]
pub struct InterestRegistration {
    pub interest: Interest,
    pub upstream: NodeRef,
    pub registered_at: f64,
}

impl InterestRegistration {
    /// Live means not expired: no ttl, or `issued_at + ttl >= now`.
    pub fn live(&self, now: f64) -> bool {
        match self.interest.ttl {
            None => true,
            Some(ttl) => self.interest.issued_at + ttl >= now,
        }
    }
}

/// Interest registrations held by one WCA, DCA, or the ECA.
#[derive(Debug, Clone, PartialEq)]
pub struct InterestRegistry {
    pub owner: NodeName,
    entries: Vec<InterestRegistration>,
}

impl InterestRegistry {
    pub fn new(owner: NodeName) -> Self {
        Self { owner, entries: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[InterestRegistration] {
        &self.entries
    }

    pub fn contains(&self, interest_id: &str) -> bool {
        self.get(interest_id).is_some()
    }

    pub fn get(&self, interest_id: &str) -> Option<&InterestRegistration> {
        self.entries.iter().find(|r| r.interest.interest_id == interest_id)
    }

    /// Register `i` with the hop it arrived from. Returns whether the entry
    /// is new; a duplicate id leaves the registry unchanged (first arrival
    /// wins) and reports `false`.
    pub fn register_interest(
        &mut self,
        i: &Interest,
        upstream: NodeRef,
        now: f64,
        hood: &Neighborhood,
    ) -> Result<bool, RegistryError> {
        if !hood.contains(&upstream) {
            return Err(RegistryError::NonAdjacentUpstream {
                upstream: alloc::format!("{upstream}"),
            });
        }
        if self.contains(&i.interest_id) {
            return Ok(false);
        }
        self.entries.push(InterestRegistration {
            interest: i.clone(),
            upstream,
            registered_at: now,
        });
        Ok(true)
    }

    /// The live registrations matching `e` by category, predicate, and
    /// producer scope, in registration order.
    pub fn matching(&self, e: &EventRecord, now: f64) -> Vec<&InterestRegistration> {
        self.entries
            .iter()
            .filter(|r| {
                r.live(now)
                    && r.interest.category == e.category
                    && eval_predicate(&r.interest.predicate, e)
                    && scope_admits(&r.interest, &e.source)
            })
            .collect()
    }

    /// Deduplicated upstreams of the registrations matching `e`, in
    /// registration order.
    pub fn match_subscribers(&self, e: &EventRecord, now: f64) -> Vec<NodeRef> {
        let mut out: Vec<NodeRef> = Vec::new();
        for reg in self.matching(e, now) {
            if !out.contains(&reg.upstream) {
                out.push(reg.upstream.clone());
            }
        }
        out
    }

    /// Drop every registration whose ttl has lapsed; returns the removed ids.
    pub fn purge_expired(&mut self, now: f64) -> Vec<String> {
        let mut removed = Vec::new();
        self.entries.retain(|r| {
            let expired = matches!(r.interest.ttl, Some(ttl) if r.interest.issued_at + ttl < now);
            if expired {
                removed.push(r.interest.interest_id.clone());
            }
            !expired
        });
        removed
    }
}
