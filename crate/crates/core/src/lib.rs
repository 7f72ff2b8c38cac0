//! Core of the hivewatch cooperating-agent intrusion detection simulator.
//!
//! Everything in this crate is pure computation over owned values: the
//! domain model, per-node registries, the WCA/DCA/ECA routing state
//! machines, sliding-window detection, and the deterministic simulation
//! engine with its flat-broadcast oracle. File formats, IO, and the CLI
//! live in the companion `hivewatch` crate.
//!
//! The crate is `no_std` + `alloc`; it never touches the clock, the
//! filesystem, or ambient randomness. All runs are a pure function of
//! their inputs and seed.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod detection;
pub mod engine;
pub mod model;
pub mod registry;
pub mod routing;

pub use detection::{
    class_for_label, classify_record, derive_interest, score, ActivityClass, AgentDetector,
    Alert, AlertClass, ClassMetrics, DetectionRule, ScopeNeeded, SignatureRule, SignatureRuleBase,
};
pub use engine::{
    assign_kdd_producers, config_digest, measure_overhead, run, run_oracle, simulate,
    stratified_sample, synth_flood_trace, synth_kdd_trace, Delivery, DeliveredData, Diagnostics,
    EngineError, Fault, FloodParams, KddSynthParams, OverheadReport, RuleSet, SimConfig,
    SimOutcome, SimReport, Traversal, FLOOD_CATEGORY, KDD_ATTRIBUTES, KDD_CATEGORY,
};
pub use model::{
    classify_scope, eval_predicate, scope_admits, validate_topology, AgentAddress,
    AgentDescriptor, AgentId, AttrValue, CmpOp, Constraint, DomainId, EventCategory, EventRecord,
    HostId, Interest, InterestScope, LinkTier, NodeName, Predicate, RawAgent, RawHost,
    RawTopology, RoutingClass, Topology, TopologyError,
};
pub use registry::{
    AgentRegistry, InterestRegistration, InterestRegistry, Neighborhood, NodeRef, RegistryError,
};
pub use routing::{
    dca_handle_data, dca_handle_interest, eca_handle, wca_handle_data, wca_handle_interest,
    Message, MessageBody, MessageMeta, NodeRole, NodeState, OutboundAction, RoutingError,
};
