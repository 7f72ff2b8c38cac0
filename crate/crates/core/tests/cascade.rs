//! End-to-end routing checks on randomized topologies: interests of every
//! scope (directed ones included) are propagated through the real
//! handlers, events are pumped through the resulting registrations, and
//! the delivery set is compared against the scope definition. Hop bounds,
//! loop freedom, and scope containment are asserted on every traversal.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use hivewatch_core::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Net {
    wcas: BTreeMap<(DomainId, HostId), NodeState>,
    dcas: BTreeMap<DomainId, NodeState>,
    eca: NodeState,
    queue: VecDeque<(NodeName, NodeName, Message)>,
    interests: BTreeMap<String, Interest>,
    /// (event seq, receiving agent) with a delivery count to prove
    /// exactly-once behavior.
    deliveries: BTreeMap<(u64, AgentAddress), u32>,
    /// (message kind, serving scope if attributable, link tier, hops)
    traversals: Vec<(&'static str, Option<InterestScope>, LinkTier, u32)>,
    delivered_paths: Vec<(u32, Vec<String>)>,
}

fn tier(a: &NodeName, b: &NodeName) -> LinkTier {
    use NodeName::*;
    match (a, b) {
        (Ba(_), Wca { .. }) | (Wca { .. }, Ba(_)) => LinkTier::BaWca,
        (Wca { .. }, Wca { .. }) => LinkTier::WcaWca,
        (Wca { .. }, Dca(_)) | (Dca(_), Wca { .. }) => LinkTier::WcaDca,
        (Dca(_), Dca(_)) => LinkTier::DcaDca,
        (Dca(_), Eca) | (Eca, Dca(_)) => LinkTier::DcaEca,
        other => panic!("illegal link {other:?}"),
    }
}

impl Net {
    fn new(topo: &Topology) -> Self {
        let mut wcas = BTreeMap::new();
        let mut dcas = BTreeMap::new();
        for d in &topo.domains {
            dcas.insert(d.domain.clone(), NodeState::dca(topo, &d.domain));
            for h in &d.hosts {
                wcas.insert(
                    (d.domain.clone(), h.host.clone()),
                    NodeState::wca(topo, &d.domain, &h.host),
                );
            }
        }
        Net {
            wcas,
            dcas,
            eca: NodeState::eca(topo),
            queue: VecDeque::new(),
            interests: BTreeMap::new(),
            deliveries: BTreeMap::new(),
            traversals: Vec::new(),
            delivered_paths: Vec::new(),
        }
    }

    fn send_interest(&mut self, i: &Interest) {
        self.interests.insert(i.interest_id.clone(), i.clone());
        let from = NodeName::Ba(i.origin.clone());
        let to = NodeName::Wca {
            domain: i.origin.domain.clone(),
            host: i.origin.host.clone(),
        };
        let msg = Message {
            body: MessageBody::Interest(i.clone()),
            meta: MessageMeta::fresh().forward(&from),
        };
        self.queue.push_back((from, to, msg));
        self.drain();
    }

    fn send_event(&mut self, e: &EventRecord) {
        let from = NodeName::Ba(e.source.clone());
        let to = NodeName::Wca {
            domain: e.source.domain.clone(),
            host: e.source.host.clone(),
        };
        let msg = Message {
            body: MessageBody::Data { event: e.clone(), for_interest: None },
            meta: MessageMeta::fresh().forward(&from),
        };
        self.queue.push_back((from, to, msg));
        self.drain();
    }

    fn scope_of(&self, body: &MessageBody) -> Option<InterestScope> {
        match body {
            MessageBody::Interest(i) => Some(i.scope.clone()),
            MessageBody::Data { for_interest: Some(id), .. } => {
                self.interests.get(id).map(|i| i.scope.clone())
            }
            _ => None,
        }
    }

    fn drain(&mut self) {
        let mut steps = 0u32;
        while let Some((from, to, msg)) = self.queue.pop_front() {
            steps += 1;
            assert!(steps < 100_000, "cascade does not quiesce");
            assert!(msg.meta.hop_count <= 8, "hop cap breached: {msg:?}");
            let t = tier(&from, &to);
            self.traversals
                .push((msg.body.kind(), self.scope_of(&msg.body), t, msg.meta.hop_count));

            // loop freedom: no emitting node repeats, and no relay receives
            // a message it already emitted (a subscribing producer may
            // legitimately receive its own event back, so BAs are exempt)
            let mut seen: BTreeSet<&String> = BTreeSet::new();
            for hop in &msg.meta.trace_path {
                assert!(seen.insert(hop), "repeated node in {:?}", msg.meta.trace_path);
            }
            if !matches!(to, NodeName::Ba(_)) {
                let to_name = format!("{to}");
                assert!(
                    !msg.meta.trace_path.contains(&to_name),
                    "message returned to {to_name}: {:?}",
                    msg.meta.trace_path
                );
            }

            let actions = match to.clone() {
                NodeName::Ba(addr) => {
                    if let MessageBody::Data { event, .. } = &msg.body {
                        *self
                            .deliveries
                            .entry((event.seq, addr.clone()))
                            .or_insert(0) += 1;
                        self.delivered_paths
                            .push((msg.meta.hop_count, msg.meta.trace_path.clone()));
                    }
                    Vec::new()
                }
                NodeName::Wca { domain, host } => {
                    let from_ref = match &from {
                        NodeName::Ba(a) => NodeRef::LocalAgent(a.agent.clone()),
                        NodeName::Wca { host: h, .. } => NodeRef::PeerWca(h.clone()),
                        NodeName::Dca(_) => NodeRef::OwnDca,
                        NodeName::Eca => unreachable!(),
                    };
                    let node = self.wcas.get_mut(&(domain, host)).unwrap();
                    match &msg.body {
                        MessageBody::Interest(i) => {
                            wca_handle_interest(node, i, &msg.meta, &from_ref, 0.0).unwrap()
                        }
                        MessageBody::Data { event, .. } => {
                            wca_handle_data(node, event, &msg.meta, &from_ref, event.time).unwrap()
                        }
                        _ => Vec::new(),
                    }
                }
                NodeName::Dca(domain) => {
                    let from_ref = match &from {
                        NodeName::Wca { host: h, .. } => NodeRef::PeerWca(h.clone()),
                        NodeName::Dca(d) => NodeRef::PeerDca(d.clone()),
                        NodeName::Eca => NodeRef::Eca,
                        NodeName::Ba(_) => unreachable!(),
                    };
                    let node = self.dcas.get_mut(&domain).unwrap();
                    match &msg.body {
                        MessageBody::Interest(i) => {
                            dca_handle_interest(node, i, &msg.meta, &from_ref, 0.0).unwrap()
                        }
                        MessageBody::Data { event, for_interest: Some(id) } => {
                            dca_handle_data(node, event, id, &msg.meta, &from_ref, event.time)
                                .unwrap()
                        }
                        _ => Vec::new(),
                    }
                }
                NodeName::Eca => {
                    let from_ref = match &from {
                        NodeName::Dca(d) => NodeRef::PeerDca(d.clone()),
                        _ => unreachable!(),
                    };
                    eca_handle(&mut self.eca, &msg, &from_ref, 0.0).unwrap()
                }
            };

            for a in actions {
                let dest = resolve(&to, &a.dest);
                self.queue.push_back((to.clone(), dest, a.message));
            }
        }
    }
}

fn resolve(sender: &NodeName, dest: &NodeRef) -> NodeName {
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
        other => panic!("non-adjacent emission {other:?}"),
    }
}

/// Tiers a message serving a given scope may legally cross.
fn allowed_tiers(scope: &Option<InterestScope>) -> &'static [LinkTier] {
    match scope {
        None => &[LinkTier::BaWca],
        Some(InterestScope::Local) => &[LinkTier::BaWca],
        Some(InterestScope::Domain) => &[LinkTier::BaWca, LinkTier::WcaDca],
        Some(InterestScope::HostDirected { .. }) => &[
            LinkTier::BaWca,
            LinkTier::WcaWca,
            LinkTier::WcaDca,
            LinkTier::DcaDca,
        ],
        Some(InterestScope::DomainDirected(_)) => {
            &[LinkTier::BaWca, LinkTier::WcaDca, LinkTier::DcaDca]
        }
        Some(InterestScope::Enterprise) | Some(InterestScope::Propagated) => {
            &[LinkTier::BaWca, LinkTier::WcaDca, LinkTier::DcaEca]
        }
    }
}

fn random_topology(rng: &mut ChaCha8Rng) -> Topology {
    let n_domains = rng.gen_range(1..=3);
    let mut raw = RawTopology::default();
    let mut host_no = 0;
    for d in 0..n_domains {
        let dname = format!("d{d}");
        raw.domains.push(dname.clone());
        for _ in 0..rng.gen_range(1..=3) {
            let hname = format!("h{host_no}");
            host_no += 1;
            raw.hosts.push(RawHost { name: hname.clone(), domain: dname.clone() });
            for a in 0..rng.gen_range(1..=2) {
                let cats = ["icmp.request", "net.flow", "dns.query"];
                let k = rng.gen_range(1..=2);
                let mut produces: Vec<String> = Vec::new();
                for _ in 0..k {
                    let c = cats[rng.gen_range(0..cats.len())].to_string();
                    if !produces.contains(&c) {
                        produces.push(c);
                    }
                }
                raw.agents.push(RawAgent {
                    name: format!("a{host_no}_{a}"),
                    host: hname.clone(),
                    produces,
                    detects: vec![],
                });
            }
        }
    }
    validate_topology(&raw).unwrap()
}

fn random_scope(rng: &mut ChaCha8Rng, topo: &Topology) -> InterestScope {
    let domains: Vec<_> = topo.domains.iter().collect();
    match rng.gen_range(0..6) {
        0 => InterestScope::Local,
        1 => InterestScope::Domain,
        2 => InterestScope::Enterprise,
        3 => InterestScope::Propagated,
        4 => {
            let d = domains[rng.gen_range(0..domains.len())];
            let h = &d.hosts[rng.gen_range(0..d.hosts.len())];
            InterestScope::HostDirected {
                domain: d.domain.clone(),
                host: h.host.clone(),
            }
        }
        _ => {
            let d = domains[rng.gen_range(0..domains.len())];
            InterestScope::DomainDirected(d.domain.clone())
        }
    }
}

#[test]
fn routed_deliveries_equal_scope_oracle_on_random_instances() {
    for seed in 0..150u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let topo = random_topology(&mut rng);
        let agents: Vec<AgentDescriptor> = topo.agents().cloned().collect();
        let mut net = Net::new(&topo);

        // random interests from random origins, every scope kind in play
        let n_interests = rng.gen_range(1..=5);
        let mut interests: Vec<Interest> = Vec::new();
        let cats = ["icmp.request", "net.flow", "dns.query"];
        for k in 0..n_interests {
            let origin = agents[rng.gen_range(0..agents.len())].address.clone();
            let interest = Interest {
                interest_id: format!("{origin}#{k}"),
                origin,
                scope: random_scope(&mut rng, &topo),
                category: EventCategory::new(cats[rng.gen_range(0..cats.len())]),
                predicate: Predicate::always(),
                issued_at: 0.0,
                ttl: None,
            };
            net.send_interest(&interest);
            interests.push(interest);
        }

        // events only from declared producers, as the harness validates
        let mut events: Vec<EventRecord> = Vec::new();
        for seq in 0..rng.gen_range(1..=30) {
            let d = &agents[rng.gen_range(0..agents.len())];
            let category = d.produces[rng.gen_range(0..d.produces.len())].clone();
            let e = EventRecord {
                seq,
                time: seq as f64,
                source: d.address.clone(),
                category,
                attributes: vec![],
            };
            net.send_event(&e);
            events.push(e);
        }

        // oracle straight from the scope definition
        let mut expect: BTreeSet<(u64, AgentAddress)> = BTreeSet::new();
        for e in &events {
            for i in &interests {
                if i.category == e.category && scope_admits(i, &e.source) {
                    expect.insert((e.seq, i.origin.clone()));
                }
            }
        }
        let got: BTreeSet<(u64, AgentAddress)> = net.deliveries.keys().cloned().collect();
        assert_eq!(got, expect, "seed {seed}");

        // exactly-once
        for ((seq, addr), n) in &net.deliveries {
            assert_eq!(*n, 1, "seed {seed}: event {seq} delivered {n} times to {addr}");
        }

        // every delivered data message respects the 6-hop reverse path bound
        for (hops, path) in &net.delivered_paths {
            assert!(*hops <= 6, "seed {seed}: {hops} hops via {path:?}");
        }

        // scope containment across all traversals
        for (kind, scope, t, _) in &net.traversals {
            assert!(
                allowed_tiers(scope).contains(t),
                "seed {seed}: {kind} serving {scope:?} crossed {t:?}"
            );
        }
    }
}

#[test]
fn directed_interest_registers_at_origin_and_target_only() {
    for seed in 0..60u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(1_000 + seed);
        let topo = random_topology(&mut rng);
        let agents: Vec<AgentDescriptor> = topo.agents().cloned().collect();
        let origin = agents[rng.gen_range(0..agents.len())].address.clone();
        let domains: Vec<_> = topo.domains.iter().collect();
        let td = domains[rng.gen_range(0..domains.len())];
        let th = &td.hosts[rng.gen_range(0..td.hosts.len())];
        if td.domain == origin.domain && th.host == origin.host {
            continue; // self-directed: serviced locally, nothing propagates
        }
        let mut net = Net::new(&topo);
        net.send_interest(&Interest {
            interest_id: format!("{origin}#0"),
            origin: origin.clone(),
            scope: InterestScope::HostDirected {
                domain: td.domain.clone(),
                host: th.host.clone(),
            },
            category: EventCategory::new("icmp.request"),
            predicate: Predicate::always(),
            issued_at: 0.0,
            ttl: None,
        });
        // only the origin's WCA (reverse path) and the target's WCA (when
        // it has a servicer) may hold a registration
        for ((d, h), node) in &net.wcas {
            if node.interests.is_empty() {
                continue;
            }
            let is_origin = *d == origin.domain && *h == origin.host;
            let is_target = *d == td.domain && *h == th.host;
            assert!(
                is_origin || is_target,
                "seed {seed}: directed interest registered at bystander wca:{d}/{h}"
            );
        }
    }
}
