//! Pure routing state machines for the three coordinator tiers. Each
//! handler maps (node state, incoming message) to an updated state plus a
//! deterministic list of outbound actions; the harness owns dispatch.
//!
//! Interests climb the hierarchy and leave a registration at every relay;
//! data rides those registrations back down. At the WCA tier data is
//! matched against interest content, at the DCA/ECA tiers it is forwarded
//! by the `for_interest` tag alone.

use alloc::collections::BTreeSet;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use crate::model::{
    classify_scope, AgentId, DomainId, EventRecord, HostId, Interest, InterestScope, NodeName,
    RoutingClass, Topology,
};
use crate::registry::{AgentRegistry, InterestRegistry, Neighborhood, NodeRef, RegistryError};

/// Payload of one inter-agent message.
#[derive(Debug, Clone, PartialEq)]
pub enum MessageBody {
    Interest(Interest),
    Data {
        event: EventRecord,
        /// Set on the DCA/ECA legs so relays can follow the exact reverse
        /// path; ignored by WCAs, which match on content.
        for_interest: Option<String>,
    },
    /// A WCA telling a local interest origin that nothing on the host can
    /// service its local-level interest.
    Inability { interest_id: String },
    /// A WCA telling a servicing agent to start sending matching events.
    Collect { interest_id: String, agent: AgentId },
}

impl MessageBody {
    pub fn kind(&self) -> &'static str {
        match self {
            MessageBody::Interest(_) => "interest",
            MessageBody::Data { .. } => "data",
            MessageBody::Inability { .. } => "inability",
            MessageBody::Collect { .. } => "collect",
        }
    }
}

/// Hop accounting carried by every message: how many links it has
/// traversed and which nodes have emitted it.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct MessageMeta {
    pub hop_count: u32,
    pub trace_path: Vec<String>,
}

impl MessageMeta {
    /// Meta of a freshly originated message: zero hops, empty path.
    pub fn fresh() -> Self {
        Self::default()
    }

    /// Meta after one more link traversal emitted by `sender`.
    pub fn forward(&self, sender: &NodeName) -> Self {
        let mut path = self.trace_path.clone();
        path.push(alloc::format!("{sender}"));
        MessageMeta {
            hop_count: self.hop_count + 1,
            trace_path: path,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Message {
    pub body: MessageBody,
    pub meta: MessageMeta,
}

/// One outbound send decided by a handler; `dest` is relative to the
/// emitting node and always adjacent to it.
#[derive(Debug, Clone, PartialEq)]
pub struct OutboundAction {
    pub dest: NodeRef,
    pub message: Message,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum NodeRole {
    Wca { domain: DomainId, host: HostId },
    Dca { domain: DomainId },
    Eca,
}

impl NodeRole {
    pub fn node_name(&self) -> NodeName {
        match self {
            NodeRole::Wca { domain, host } => NodeName::Wca {
                domain: domain.clone(),
                host: host.clone(),
            },
            NodeRole::Dca { domain } => NodeName::Dca(domain.clone()),
            NodeRole::Eca => NodeName::Eca,
        }
    }
}

/// Everything one coordinator node owns: its registries, its adjacency,
/// and the bookkeeping that keeps data delivery exactly-once.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeState {
    pub role: NodeRole,
    pub interests: InterestRegistry,
    /// Present on WCAs only.
    pub agents: Option<AgentRegistry>,
    pub hood: Neighborhood,
    /// Data messages dropped for lack of a reverse-path registration.
    pub dropped_data: u64,
    /// (event seq, upstream key) pairs already served; one event is
    /// delivered at most once per upstream even when several interests
    /// match it.
    delivered: BTreeSet<(u64, String)>,
}

impl NodeState {
    pub fn wca(topo: &Topology, domain: &DomainId, host: &HostId) -> Self {
        let mut reg = AgentRegistry::new(domain.clone(), host.clone());
        if let Some(spec) = topo.host(domain, host) {
            for d in &spec.agents {
                // topology validation already guarantees uniqueness
                let _ = reg.register_agent(d.clone());
            }
        }
        let role = NodeRole::Wca {
            domain: domain.clone(),
            host: host.clone(),
        };
        NodeState {
            interests: InterestRegistry::new(role.node_name()),
            agents: Some(reg),
            hood: Neighborhood::for_wca(topo, domain, host),
            dropped_data: 0,
            delivered: BTreeSet::new(),
            role,
        }
    }

    pub fn dca(topo: &Topology, domain: &DomainId) -> Self {
        let role = NodeRole::Dca { domain: domain.clone() };
        NodeState {
            interests: InterestRegistry::new(role.node_name()),
            agents: None,
            hood: Neighborhood::for_dca(topo, domain),
            dropped_data: 0,
            delivered: BTreeSet::new(),
            role,
        }
    }

    pub fn eca(topo: &Topology) -> Self {
        NodeState {
            interests: InterestRegistry::new(NodeName::Eca),
            agents: None,
            hood: Neighborhood::for_eca(topo),
            dropped_data: 0,
            delivered: BTreeSet::new(),
            role: NodeRole::Eca,
        }
    }

    fn name(&self) -> NodeName {
        self.role.node_name()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RoutingError {
    WrongRole { expected: &'static str },
    NotAdjacent { from: String },
    Registry(RegistryError),
}

impl fmt::Display for RoutingError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RoutingError::WrongRole { expected } => write!(f, "handler requires a {expected} node"),
            RoutingError::NotAdjacent { from } => write!(f, "message from non-adjacent node `{from}`"),
            RoutingError::Registry(e) => write!(f, "{e}"),
        }
    }
}

impl core::error::Error for RoutingError {}

impl From<RegistryError> for RoutingError {
    fn from(e: RegistryError) -> Self {
        RoutingError::Registry(e)
    }
}

fn check_from(s: &NodeState, from: &NodeRef, allowed: &[&str]) -> Result<(), RoutingError> {
    let kind = match from {
        NodeRef::LocalAgent(_) => "agent",
        NodeRef::PeerWca(_) => "wca",
        NodeRef::OwnDca => "dca",
        NodeRef::PeerDca(_) => "peer-dca",
        NodeRef::Eca => "eca",
    };
    if allowed.contains(&kind) && s.hood.contains(from) {
        Ok(())
    } else {
        Err(RoutingError::NotAdjacent {
            from: alloc::format!("{from}"),
        })
    }
}

fn interest_msg(i: &Interest, meta: MessageMeta) -> Message {
    Message {
        body: MessageBody::Interest(i.clone()),
        meta,
    }
}

/// A WCA receiving an interest from a local agent, a peer WCA, or its DCA.
pub fn wca_handle_interest(
    s: &mut NodeState,
    i: &Interest,
    meta: &MessageMeta,
    from: &NodeRef,
    now: f64,
) -> Result<Vec<OutboundAction>, RoutingError> {
    let NodeRole::Wca { domain, host } = s.role.clone() else {
        return Err(RoutingError::WrongRole { expected: "wca" });
    };
    check_from(s, from, &["agent", "wca", "dca"])?;

    // duplicate suppression: the registry keeps its first upstream and the
    // second arrival triggers nothing
    if s.interests.contains(&i.interest_id) {
        return Ok(Vec::new());
    }

    let self_name = s.name();
    let class = classify_scope(i, &host, &domain);
    let mut out = Vec::new();

    match from {
        NodeRef::LocalAgent(_) => match class {
            RoutingClass::OtherDomainHost | RoutingClass::OtherDomainWide => {
                s.interests.register_interest(i, from.clone(), now, &s.hood)?;
                out.push(OutboundAction {
                    dest: NodeRef::OwnDca,
                    message: interest_msg(i, meta.forward(&self_name)),
                });
            }
            RoutingClass::SameDomainOtherHost => {
                let InterestScope::HostDirected { host: target, .. } = &i.scope else {
                    unreachable!("class implies a host-directed scope");
                };
                if s.hood.peer_hosts.contains(target) {
                    s.interests.register_interest(i, from.clone(), now, &s.hood)?;
                    out.push(OutboundAction {
                        dest: NodeRef::PeerWca(target.clone()),
                        message: interest_msg(i, meta.forward(&self_name)),
                    });
                }
                // directed at a host that does not exist: nothing to do
            }
            RoutingClass::LocalHost => {
                let servicers = servicer_collects(s, i);
                if !servicers.is_empty() {
                    s.interests.register_interest(i, from.clone(), now, &s.hood)?;
                    out.extend(servicers);
                } else if i.scope == InterestScope::Local {
                    out.push(OutboundAction {
                        dest: from.clone(),
                        message: Message {
                            body: MessageBody::Inability {
                                interest_id: i.interest_id.clone(),
                            },
                            meta: MessageMeta::fresh().forward(&self_name),
                        },
                    });
                }
            }
            RoutingClass::OwnDomainWide | RoutingClass::EnterpriseWide => {
                // serve locally when possible and forward upward either way
                s.interests.register_interest(i, from.clone(), now, &s.hood)?;
                out.extend(servicer_collects(s, i));
                out.push(OutboundAction {
                    dest: NodeRef::OwnDca,
                    message: interest_msg(i, meta.forward(&self_name)),
                });
            }
        },
        NodeRef::OwnDca | NodeRef::PeerWca(_) => {
            let servicers = servicer_collects(s, i);
            if !servicers.is_empty() {
                s.interests.register_interest(i, from.clone(), now, &s.hood)?;
                out.extend(servicers);
            }
            // no servicer: the request is discarded
        }
        _ => unreachable!("check_from admits agent/wca/dca only"),
    }
    Ok(out)
}

fn servicer_collects(s: &NodeState, i: &Interest) -> Vec<OutboundAction> {
    let Some(agents) = &s.agents else { return Vec::new() };
    let self_name = s.name();
    agents
        .find_servicers(&i.category)
        .into_iter()
        .map(|agent| OutboundAction {
            dest: NodeRef::LocalAgent(agent.clone()),
            message: Message {
                body: MessageBody::Collect {
                    interest_id: i.interest_id.clone(),
                    agent,
                },
                meta: MessageMeta::fresh().forward(&self_name),
            },
        })
        .collect()
}

/// A WCA receiving event data. Local data is matched against the interest
/// registry and fanned out along every matching upstream; data arriving
/// from the DCA or a peer WCA is delivered to local agents only and never
/// re-forwarded, which keeps the hierarchy loop-free.
pub fn wca_handle_data(
    s: &mut NodeState,
    e: &EventRecord,
    meta: &MessageMeta,
    from: &NodeRef,
    now: f64,
) -> Result<Vec<OutboundAction>, RoutingError> {
    if !matches!(s.role, NodeRole::Wca { .. }) {
        return Err(RoutingError::WrongRole { expected: "wca" });
    }
    check_from(s, from, &["agent", "wca", "dca"])?;

    let self_name = s.name();
    let local_only = !matches!(from, NodeRef::LocalAgent(_));
    let mut out = Vec::new();
    let mut sends: Vec<(u64, String, NodeRef, Option<String>)> = Vec::new();

    for reg in s.interests.matching(e, now) {
        let id = reg.interest.interest_id.clone();
        match &reg.upstream {
            NodeRef::LocalAgent(a) => {
                sends.push((e.seq, alloc::format!("agent:{a}"), reg.upstream.clone(), None));
            }
            NodeRef::PeerWca(h) if !local_only => {
                sends.push((e.seq, alloc::format!("wca:{h}"), reg.upstream.clone(), Some(id)));
            }
            // one forward per remote interest so the DCA tier can follow
            // each reverse path
            NodeRef::OwnDca if !local_only => {
                sends.push((e.seq, alloc::format!("dca#{id}"), NodeRef::OwnDca, Some(id)));
            }
            _ => {}
        }
    }

    for (seq, key, dest, for_interest) in sends {
        if s.delivered.insert((seq, key)) {
            out.push(OutboundAction {
                dest,
                message: Message {
                    body: MessageBody::Data {
                        event: e.clone(),
                        for_interest,
                    },
                    meta: meta.forward(&self_name),
                },
            });
        }
    }
    Ok(out)
}

/// A DCA receiving an interest from one of its WCAs, a peer DCA, or the ECA.
pub fn dca_handle_interest(
    s: &mut NodeState,
    i: &Interest,
    meta: &MessageMeta,
    from: &NodeRef,
    now: f64,
) -> Result<Vec<OutboundAction>, RoutingError> {
    let NodeRole::Dca { domain } = s.role.clone() else {
        return Err(RoutingError::WrongRole { expected: "dca" });
    };
    check_from(s, from, &["wca", "peer-dca", "eca"])?;

    if s.interests.contains(&i.interest_id) {
        return Ok(Vec::new());
    }

    let self_name = s.name();
    let all_hosts = || s.hood.peer_hosts.iter().cloned().map(NodeRef::PeerWca);
    let mut dests: Vec<NodeRef> = Vec::new();

    match from {
        NodeRef::Eca | NodeRef::PeerDca(_) => match &i.scope {
            // from above or from a peer the interest is either propagated or
            // directed into this domain
            InterestScope::Enterprise | InterestScope::Propagated => dests.extend(all_hosts()),
            InterestScope::HostDirected { domain: td, host } if *td == domain => {
                if s.hood.peer_hosts.contains(host) {
                    dests.push(NodeRef::PeerWca(host.clone()));
                }
            }
            InterestScope::DomainDirected(td) if *td == domain => dests.extend(all_hosts()),
            _ => {}
        },
        NodeRef::PeerWca(sender_host) => {
            let class = classify_scope(i, sender_host, &domain);
            match class {
                RoutingClass::OtherDomainHost | RoutingClass::OtherDomainWide => {
                    let target = match &i.scope {
                        InterestScope::HostDirected { domain: td, .. } => td.clone(),
                        InterestScope::DomainDirected(td) => td.clone(),
                        _ => unreachable!("class implies a directed scope"),
                    };
                    if s.hood.peer_domains.contains(&target) {
                        dests.push(NodeRef::PeerDca(target));
                    }
                }
                RoutingClass::SameDomainOtherHost => {
                    let InterestScope::HostDirected { host, .. } = &i.scope else {
                        unreachable!("class implies a host-directed scope");
                    };
                    if s.hood.peer_hosts.contains(host) {
                        dests.push(NodeRef::PeerWca(host.clone()));
                    }
                }
                RoutingClass::OwnDomainWide => {
                    dests.extend(all_hosts().filter(|d| d != &NodeRef::PeerWca(sender_host.clone())));
                }
                RoutingClass::EnterpriseWide => {
                    dests.extend(all_hosts().filter(|d| d != &NodeRef::PeerWca(sender_host.clone())));
                    dests.push(NodeRef::Eca);
                }
                RoutingClass::LocalHost => {}
            }
        }
        _ => unreachable!("check_from admits wca/peer-dca/eca only"),
    }

    if dests.is_empty() {
        return Ok(Vec::new());
    }
    s.interests.register_interest(i, from.clone(), now, &s.hood)?;
    Ok(dests
        .into_iter()
        .map(|dest| OutboundAction {
            dest,
            message: interest_msg(i, meta.forward(&self_name)),
        })
        .collect())
}

/// A DCA forwarding data along the reverse path recorded for
/// `for_interest`; exactly one outbound action, or a counted drop when no
/// registration exists.
pub fn dca_handle_data(
    s: &mut NodeState,
    e: &EventRecord,
    for_interest: &str,
    meta: &MessageMeta,
    from: &NodeRef,
    now: f64,
) -> Result<Vec<OutboundAction>, RoutingError> {
    if !matches!(s.role, NodeRole::Dca { .. }) {
        return Err(RoutingError::WrongRole { expected: "dca" });
    }
    check_from(s, from, &["wca", "peer-dca", "eca"])?;

    let self_name = s.name();
    match s.interests.get(for_interest) {
        Some(reg) if reg.live(now) => {
            let dest = reg.upstream.clone();
            Ok(alloc::vec![OutboundAction {
                dest,
                message: Message {
                    body: MessageBody::Data {
                        event: e.clone(),
                        for_interest: Some(for_interest.into()),
                    },
                    meta: meta.forward(&self_name),
                },
            }])
        }
        _ => {
            s.dropped_data += 1;
            Ok(Vec::new())
        }
    }
}

/// The ECA relaying interests and data between domains.
pub fn eca_handle(
    s: &mut NodeState,
    msg: &Message,
    from: &NodeRef,
    now: f64,
) -> Result<Vec<OutboundAction>, RoutingError> {
    if s.role != NodeRole::Eca {
        return Err(RoutingError::WrongRole { expected: "eca" });
    }
    check_from(s, from, &["peer-dca"])?;
    let NodeRef::PeerDca(sender) = from else { unreachable!() };

    let self_name = s.name();
    match &msg.body {
        MessageBody::Interest(i) => {
            if s.interests.contains(&i.interest_id) {
                return Ok(Vec::new());
            }
            let mut dests: Vec<NodeRef> = Vec::new();
            match &i.scope {
                InterestScope::Enterprise | InterestScope::Propagated => {
                    dests.extend(
                        s.hood
                            .peer_domains
                            .iter()
                            .filter(|d| *d != sender)
                            .cloned()
                            .map(NodeRef::PeerDca),
                    );
                }
                // directed traffic normally travels the DCA mesh; relay it
                // anyway so either reading of the hierarchy works
                InterestScope::HostDirected { domain: td, .. }
                | InterestScope::DomainDirected(td) => {
                    if td != sender && s.hood.peer_domains.contains(td) {
                        dests.push(NodeRef::PeerDca(td.clone()));
                    }
                }
                InterestScope::Local | InterestScope::Domain => {}
            }
            if dests.is_empty() {
                return Ok(Vec::new());
            }
            s.interests.register_interest(i, from.clone(), now, &s.hood)?;
            Ok(dests
                .into_iter()
                .map(|dest| OutboundAction {
                    dest,
                    message: interest_msg(i, msg.meta.forward(&self_name)),
                })
                .collect())
        }
        MessageBody::Data { event, for_interest } => {
            match for_interest.as_deref().and_then(|id| s.interests.get(id)) {
                Some(reg) if reg.live(now) => {
                    let dest = reg.upstream.clone();
                    Ok(alloc::vec![OutboundAction {
                        dest,
                        message: Message {
                            body: MessageBody::Data {
                                event: event.clone(),
                                for_interest: for_interest.clone(),
                            },
                            meta: msg.meta.forward(&self_name),
                        },
                    }])
                }
                _ => {
                    s.dropped_data += 1;
                    Ok(Vec::new())
                }
            }
        }
        MessageBody::Inability { .. } | MessageBody::Collect { .. } => Ok(Vec::new()),
    }
}
