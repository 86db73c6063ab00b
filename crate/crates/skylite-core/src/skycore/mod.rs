//! Per-UAV collapsed core-network agents.
//!
//! Every UAV runs a self-contained core agent: session table, switching
//! flow table, and a replica of the subscriber directory (HSS) mapping each
//! device to its anchoring agent. Agents are isolated state machines that
//! interact only via [`CoreMessage`]s carried over the backhaul; the engine
//! (or a test harness) owns delivery, so agents can be driven by an event
//! loop or explored exhaustively by a model checker.
//!
//! Directory replication is versioned last-writer-wins: each anchor claim
//! carries `(version, agent id)` and every replica keeps the highest.
//! Writers bump the highest version they have seen, agents that lose an
//! anchor install a forwarding hint toward the new one, and anchors
//! periodically re-broadcast their entries (anti-entropy), which repairs
//! replicas that missed an update.

mod network;

pub use network::{
    Connectivity, CoreNetwork, DeliveryOutcome, FullMesh, HandoffStart, TrafficCounters,
};

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::types::{AgentId, UeId};

/// Default sim-time allowance for a handoff to complete before the source
/// agent rolls back, milliseconds.
pub const HANDOFF_TIMEOUT_MS: u64 = 5_000;

#[derive(Debug, Error)]
pub enum SkycoreError {
    #[error("unknown agent {0}")]
    UnknownAgent(AgentId),
    #[error("{ue} is not anchored at {agent}")]
    NotAnchored { agent: AgentId, ue: UeId },
    #[error("{ue} is not active at {agent}")]
    NotActive { agent: AgentId, ue: UeId },
    #[error("{ue} is not idle at {agent}")]
    NotIdle { agent: AgentId, ue: UeId },
    #[error("a handoff for {0} is already in flight")]
    HandoffPending(UeId),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SessionState {
    Idle,
    Active,
}

/// Opaque precomputed attributes kept in memory so attach and handoff need
/// no on-the-fly computation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PrecomputedContext {
    pub security_tag: u64,
    pub qos_tag: u64,
}

impl PrecomputedContext {
    pub fn for_ue(ue: UeId) -> Self {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for b in ue.0.to_le_bytes() {
            h ^= b as u64;
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
        Self {
            security_tag: h,
            qos_tag: h.rotate_left(17) ^ 0x9e37_79b9_7f4a_7c15,
        }
    }
}

/// One device's session at its anchoring agent.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct UeSession {
    pub ue: UeId,
    pub state: SessionState,
    pub anchor: AgentId,
    pub bearer_id: u32,
    pub context: PrecomputedContext,
}

/// Switching actions, executed in the fixed order below.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Action {
    Decapsulate,
    Charge,
    Encapsulate,
    Forward(ForwardTarget),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ForwardTarget {
    /// Toward the mesh (uplink); the concrete next hop is resolved per
    /// packet from the directory and the current backhaul plan.
    Backhaul,
    /// Down to the device over this UAV's own RAN.
    LocalRadio,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Direction {
    Uplink,
    Downlink,
}

/// One match-action rule.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FlowRule {
    pub ue: UeId,
    pub direction: Direction,
    pub actions: Vec<Action>,
}

/// The agent's data-plane program: one uplink and one downlink rule per
/// active session, ordered by UE id.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FlowTable {
    pub rules: Vec<FlowRule>,
}

fn rule(ue: UeId, direction: Direction) -> FlowRule {
    let target = match direction {
        Direction::Uplink => ForwardTarget::Backhaul,
        Direction::Downlink => ForwardTarget::LocalRadio,
    };
    FlowRule {
        ue,
        direction,
        actions: vec![
            Action::Decapsulate,
            Action::Charge,
            Action::Encapsulate,
            Action::Forward(target),
        ],
    }
}

/// Directory entry: who anchors the UE, at which write version.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct HssEntry {
    pub anchor: AgentId,
    pub version: u64,
}

/// Replicated UE → anchor directory with last-writer-wins merge:
/// highest version wins, ties to the higher agent id.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct HssReplica {
    entries: BTreeMap<UeId, HssEntry>,
}

impl HssReplica {
    pub fn get(&self, ue: UeId) -> Option<HssEntry> {
        self.entries.get(&ue).copied()
    }

    pub fn version_of(&self, ue: UeId) -> u64 {
        self.entries.get(&ue).map_or(0, |e| e.version)
    }

    /// Merge a remote claim; true when it replaced the local view.
    pub fn merge(&mut self, ue: UeId, incoming: HssEntry) -> bool {
        match self.entries.get(&ue) {
            Some(local)
                if (local.version, local.anchor.0) >= (incoming.version, incoming.anchor.0) =>
            {
                false
            }
            _ => {
                self.entries.insert(ue, incoming);
                true
            }
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (&UeId, &HssEntry)> {
        self.entries.iter()
    }
}

/// Message kinds of the inter-agent control/data interface.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum MessageKind {
    UeDetectedBroadcast,
    HandoffRequest,
    HandoffAck,
    StateTransfer,
    TrackingAreaUpdate,
    PageRequest,
    DataPacket,
}

impl fmt::Display for MessageKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            MessageKind::UeDetectedBroadcast => "ue_detected_broadcast",
            MessageKind::HandoffRequest => "handoff_request",
            MessageKind::HandoffAck => "handoff_ack",
            MessageKind::StateTransfer => "state_transfer",
            MessageKind::TrackingAreaUpdate => "tracking_area_update",
            MessageKind::PageRequest => "page_request",
            MessageKind::DataPacket => "data_packet",
        };
        f.write_str(s)
    }
}

/// A user payload moving between agents. `routed_version` is the directory
/// version the last router acted on: a packet only chases strictly newer
/// anchor information, which rules out forwarding loops.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DataPacket {
    pub src_ue: UeId,
    pub dst_ue: UeId,
    pub bytes: u64,
    pub ttl: u32,
    pub routed_version: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum MessagePayload {
    /// Anchor claim (attach, TAU, post-handoff broadcast, anti-entropy).
    AnchorUpdate(HssEntry),
    HandoffRequest,
    /// Full session state moving from the old anchor to the new one.
    SessionTransfer {
        session: UeSession,
        /// Source's directory version for the UE; the destination writes
        /// `max(local, this) + 1`.
        hss_version: u64,
    },
    HandoffAck,
    Data(DataPacket),
}

/// One unit of EPC-EPC signaling or data.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoreMessage {
    pub kind: MessageKind,
    pub src: AgentId,
    pub dst: AgentId,
    pub ue: UeId,
    pub payload: MessagePayload,
    pub sent_at_ms: u64,
}

/// Why a data packet was not delivered.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum DropReason {
    UnknownUe,
    NoRoute,
    LinkDown,
}

impl fmt::Display for DropReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            DropReason::UnknownUe => "unknown_ue",
            DropReason::NoRoute => "no_route",
            DropReason::LinkDown => "link_down",
        };
        f.write_str(s)
    }
}

/// One line of the message trace log.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub time_ms: u64,
    pub kind: MessageKind,
    pub src: AgentId,
    pub dst: AgentId,
    pub ue: UeId,
}

impl TraceRecord {
    /// `time_ms,kind,src,dst,ue` with bare numeric ids.
    pub fn line(&self) -> String {
        format!(
            "{},{},{},{},{}",
            self.time_ms, self.kind, self.src.0, self.dst.0, self.ue.0
        )
    }
}

/// In-flight handoff bookkeeping at the source agent.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PendingHandoff {
    pub dst: AgentId,
    pub deadline_ms: u64,
    pub snapshot: UeSession,
}

/// One agent's complete state.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AgentState {
    pub id: AgentId,
    pub sessions: BTreeMap<UeId, UeSession>,
    pub hss: HssReplica,
    /// Where to send traffic for a UE this agent no longer anchors.
    pub forward_hints: BTreeMap<UeId, AgentId>,
    pub pending_handoffs: BTreeMap<UeId, PendingHandoff>,
    pub next_bearer: u32,
    /// Bytes that crossed this agent's charge action.
    pub charge_bytes: u64,
}

impl AgentState {
    pub fn new(id: AgentId) -> Self {
        Self {
            id,
            sessions: BTreeMap::new(),
            hss: HssReplica::default(),
            forward_hints: BTreeMap::new(),
            pending_handoffs: BTreeMap::new(),
            next_bearer: 1,
            charge_bytes: 0,
        }
    }

    fn allocate_bearer(&mut self) -> u32 {
        let id = self.next_bearer;
        self.next_bearer += 1;
        id
    }

    /// Become the UE's anchor: write the directory with a version one above
    /// everything this agent has seen and create/adopt the session.
    fn claim_anchor(&mut self, ue: UeId, state: SessionState, floor_version: u64) -> HssEntry {
        let version = self.hss.version_of(ue).max(floor_version) + 1;
        let entry = HssEntry {
            anchor: self.id,
            version,
        };
        self.hss.merge(ue, entry);
        let bearer = self.allocate_bearer();
        self.sessions.insert(
            ue,
            UeSession {
                ue,
                state,
                anchor: self.id,
                bearer_id: bearer,
                context: PrecomputedContext::for_ue(ue),
            },
        );
        self.forward_hints.remove(&ue);
        entry
    }

    /// Apply a remote anchor claim. If this agent held a session for the UE
    /// and someone newer anchored it, the session and any pending handoff
    /// are dropped and a forwarding hint toward the new anchor remains.
    /// Returns true when the claim replaced the local view.
    fn absorb_claim(&mut self, ue: UeId, entry: HssEntry) -> bool {
        if !self.hss.merge(ue, entry) {
            return false;
        }
        if entry.anchor != self.id && self.sessions.contains_key(&ue) {
            self.sessions.remove(&ue);
            self.pending_handoffs.remove(&ue);
            self.forward_hints.insert(ue, entry.anchor);
        }
        true
    }

    /// One uplink and one downlink rule per active anchored session, UE id
    /// ascending, fixed action order.
    pub fn compile_flow_table(&self) -> FlowTable {
        let mut rules = Vec::new();
        for (&ue, session) in &self.sessions {
            if session.state == SessionState::Active && session.anchor == self.id {
                rules.push(rule(ue, Direction::Uplink));
                rules.push(rule(ue, Direction::Downlink));
            }
        }
        FlowTable { rules }
    }
}
