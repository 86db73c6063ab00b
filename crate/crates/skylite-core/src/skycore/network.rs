//! The agent collective: operations, message processing and the data plane.
//!
//! [`CoreNetwork`] owns the agents and their shared accounting, but not
//! message delivery: every operation returns the messages it wants sent and
//! the caller decides when (and whether) each one arrives, checking reach
//! against the live backhaul plan. That keeps the state machines equally
//! drivable from the simulation event loop and from an exhaustive
//! interleaving explorer.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::types::{AgentId, UeId};

use super::{
    AgentState, CoreMessage, DataPacket, DropReason, FlowTable, HssEntry, MessageKind,
    MessagePayload, PendingHandoff, SessionState, SkycoreError, TraceRecord,
};

/// Reachability view the caller supplies when routing matters. The path
/// includes both endpoints.
pub trait Connectivity {
    fn path(&self, from: AgentId, to: AgentId) -> Option<Vec<AgentId>>;
}

/// Everything reaches everything in one hop. Test harness convenience.
pub struct FullMesh;

impl Connectivity for FullMesh {
    fn path(&self, from: AgentId, to: AgentId) -> Option<Vec<AgentId>> {
        if from == to {
            Some(vec![from])
        } else {
            Some(vec![from, to])
        }
    }
}

/// Data-plane accounting. `sent = delivered + Σ dropped` holds at
/// quiescence.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrafficCounters {
    pub sent: u64,
    pub delivered: u64,
    pub dropped: BTreeMap<DropReason, u64>,
    /// Control messages that could not be carried (no backhaul path).
    pub control_lost: u64,
}

impl TrafficCounters {
    pub fn dropped_total(&self) -> u64 {
        self.dropped.values().sum()
    }

    pub fn drop(&mut self, reason: DropReason) {
        *self.dropped.entry(reason).or_insert(0) += 1;
    }
}

/// Result of starting a handoff.
#[derive(Debug, PartialEq)]
pub enum HandoffStart {
    /// Request and state transfer are on their way.
    Started(Vec<CoreMessage>),
    /// Destination unreachable: nothing changed, abort counted.
    Aborted,
}

/// What happened to a data packet processed at an agent.
#[derive(Clone, Debug, PartialEq)]
pub enum DeliveryOutcome {
    DeliveredHere,
    Forwarded(Vec<CoreMessage>),
    Dropped(DropReason),
}

/// The collective of core agents plus shared counters and the message
/// trace.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoreNetwork {
    agents: BTreeMap<AgentId, AgentState>,
    pub counters: TrafficCounters,
    pub trace: Vec<TraceRecord>,
    pub handoffs_completed: u32,
    pub handoff_aborts: u32,
    pub tracking_area_updates: u32,
    pub duplicate_attaches: u32,
    pub pages: u32,
}

impl CoreNetwork {
    pub fn new(agent_ids: impl IntoIterator<Item = AgentId>) -> Self {
        Self {
            agents: agent_ids
                .into_iter()
                .map(|id| (id, AgentState::new(id)))
                .collect(),
            counters: TrafficCounters::default(),
            trace: Vec::new(),
            handoffs_completed: 0,
            handoff_aborts: 0,
            tracking_area_updates: 0,
            duplicate_attaches: 0,
            pages: 0,
        }
    }

    pub fn add_agent(&mut self, id: AgentId) {
        self.agents.entry(id).or_insert_with(|| AgentState::new(id));
    }

    pub fn agent(&self, id: AgentId) -> Option<&AgentState> {
        self.agents.get(&id)
    }

    pub fn agent_ids(&self) -> Vec<AgentId> {
        self.agents.keys().copied().collect()
    }

    /// Behavior-relevant state digest for model-checker deduplication
    /// (counters and trace excluded: they never influence future behavior).
    pub fn state_digest(&self) -> String {
        serde_json::to_string(&self.agents).expect("agent state serializes")
    }

    fn agent_mut(&mut self, id: AgentId) -> Result<&mut AgentState, SkycoreError> {
        self.agents
            .get_mut(&id)
            .ok_or(SkycoreError::UnknownAgent(id))
    }

    fn log(&mut self, msg: &CoreMessage) {
        self.trace.push(TraceRecord {
            time_ms: msg.sent_at_ms,
            kind: msg.kind,
            src: msg.src,
            dst: msg.dst,
            ue: msg.ue,
        });
    }

    fn broadcast_claim(
        &mut self,
        from: AgentId,
        ue: UeId,
        entry: HssEntry,
        kind: MessageKind,
        now_ms: u64,
    ) -> Vec<CoreMessage> {
        let mut out = Vec::new();
        let peers: Vec<AgentId> = self.agents.keys().copied().filter(|&a| a != from).collect();
        for dst in peers {
            let msg = CoreMessage {
                kind,
                src: from,
                dst,
                ue,
                payload: MessagePayload::AnchorUpdate(entry),
                sent_at_ms: now_ms,
            };
            self.log(&msg);
            out.push(msg);
        }
        out
    }

    /// Attach a device at an agent: active session, flow rules, and an
    /// anchor broadcast to every other agent. Re-attaching at the current
    /// anchor is an idempotent no-op (counted).
    pub fn attach(
        &mut self,
        agent_id: AgentId,
        ue: UeId,
        now_ms: u64,
    ) -> Result<Vec<CoreMessage>, SkycoreError> {
        let agent = self.agent_mut(agent_id)?;
        if let Some(session) = agent.sessions.get(&ue) {
            if session.state == SessionState::Active {
                self.duplicate_attaches += 1;
                return Ok(Vec::new());
            }
        }
        let entry = agent.claim_anchor(ue, SessionState::Active, 0);
        Ok(self.broadcast_claim(agent_id, ue, entry, MessageKind::UeDetectedBroadcast, now_ms))
    }

    /// Idle-mode arrival: the agent anchors the UE without installing flow
    /// rules and broadcasts the new tracking area.
    pub fn tracking_area_update(
        &mut self,
        agent_id: AgentId,
        ue: UeId,
        now_ms: u64,
    ) -> Result<Vec<CoreMessage>, SkycoreError> {
        let agent = self.agent_mut(agent_id)?;
        if let Some(session) = agent.sessions.get(&ue) {
            if session.state == SessionState::Active {
                return Err(SkycoreError::NotIdle { agent: agent_id, ue });
            }
        }
        let entry = agent.claim_anchor(ue, SessionState::Idle, 0);
        self.tracking_area_updates += 1;
        Ok(self.broadcast_claim(agent_id, ue, entry, MessageKind::TrackingAreaUpdate, now_ms))
    }

    /// Anchor re-broadcast for anti-entropy: every UE this agent anchors is
    /// re-announced at its current version. Idempotent at the receivers;
    /// repairs replicas that missed an update.
    pub fn anti_entropy(&mut self, agent_id: AgentId, now_ms: u64) -> Vec<CoreMessage> {
        let Some(agent) = self.agents.get(&agent_id) else {
            return Vec::new();
        };
        let claims: Vec<(UeId, HssEntry)> = agent
            .hss
            .iter()
            .filter(|(_, e)| e.anchor == agent_id)
            .map(|(&ue, &e)| (ue, e))
            .collect();
        let mut out = Vec::new();
        for (ue, entry) in claims {
            out.extend(self.broadcast_claim(
                agent_id,
                ue,
                entry,
                MessageKind::UeDetectedBroadcast,
                now_ms,
            ));
        }
        out
    }

    /// Demote an active session to idle and tear down its flow rules. The
    /// anchor does not change, so nothing is broadcast.
    pub fn set_idle(&mut self, agent_id: AgentId, ue: UeId) -> Result<(), SkycoreError> {
        let agent = self.agent_mut(agent_id)?;
        match agent.sessions.get_mut(&ue) {
            Some(session) => {
                session.state = SessionState::Idle;
                Ok(())
            }
            None => Err(SkycoreError::NotAnchored { agent: agent_id, ue }),
        }
    }

    /// Begin the three-way handoff `src → dst` for an actively anchored UE:
    /// `handoff_request`, then `state_transfer` (session plus precomputed
    /// context), acknowledged by `handoff_ack`. If the destination is not
    /// reachable the handoff aborts on the spot, leaving state untouched.
    pub fn start_handoff(
        &mut self,
        src: AgentId,
        dst: AgentId,
        ue: UeId,
        now_ms: u64,
        conn: &impl Connectivity,
    ) -> Result<HandoffStart, SkycoreError> {
        if !self.agents.contains_key(&dst) {
            return Err(SkycoreError::UnknownAgent(dst));
        }
        let agent = self.agent_mut(src)?;
        let Some(session) = agent.sessions.get(&ue).copied() else {
            return Err(SkycoreError::NotAnchored { agent: src, ue });
        };
        if session.state != SessionState::Active {
            return Err(SkycoreError::NotActive { agent: src, ue });
        }
        if agent.pending_handoffs.contains_key(&ue) {
            return Err(SkycoreError::HandoffPending(ue));
        }
        if conn.path(src, dst).is_none() {
            self.handoff_aborts += 1;
            return Ok(HandoffStart::Aborted);
        }
        let hss_version = agent.hss.version_of(ue);
        agent.pending_handoffs.insert(
            ue,
            PendingHandoff {
                dst,
                deadline_ms: now_ms + super::HANDOFF_TIMEOUT_MS,
                snapshot: session,
            },
        );
        let request = CoreMessage {
            kind: MessageKind::HandoffRequest,
            src,
            dst,
            ue,
            payload: MessagePayload::HandoffRequest,
            sent_at_ms: now_ms,
        };
        let transfer = CoreMessage {
            kind: MessageKind::StateTransfer,
            src,
            dst,
            ue,
            payload: MessagePayload::SessionTransfer {
                session,
                hss_version,
            },
            sent_at_ms: now_ms,
        };
        self.log(&request);
        self.log(&transfer);
        Ok(HandoffStart::Started(vec![request, transfer]))
    }

    /// Source-side handoff timeout: if the handoff is still pending, roll
    /// back to the exact pre-handoff state. Returns true when a rollback
    /// happened.
    pub fn handoff_timeout(&mut self, src: AgentId, ue: UeId, _now_ms: u64) -> bool {
        let Some(agent) = self.agents.get_mut(&src) else {
            return false;
        };
        let Some(pending) = agent.pending_handoffs.remove(&ue) else {
            return false;
        };
        agent.sessions.insert(ue, pending.snapshot);
        self.handoff_aborts += 1;
        true
    }

    /// Process one delivered message at its destination, returning any
    /// follow-up messages to dispatch.
    pub fn deliver(
        &mut self,
        msg: &CoreMessage,
        now_ms: u64,
        conn: &impl Connectivity,
    ) -> Vec<CoreMessage> {
        if !self.agents.contains_key(&msg.dst) {
            if msg.kind == MessageKind::DataPacket {
                self.counters.drop(DropReason::LinkDown);
            } else {
                self.counters.control_lost += 1;
            }
            return Vec::new();
        }
        match (&msg.kind, &msg.payload) {
            (
                MessageKind::UeDetectedBroadcast | MessageKind::TrackingAreaUpdate,
                MessagePayload::AnchorUpdate(entry),
            ) => {
                let agent = self.agents.get_mut(&msg.dst).expect("checked above");
                let was_pending_to = agent.pending_handoffs.get(&msg.ue).map(|p| p.dst);
                let merged = agent.absorb_claim(msg.ue, *entry);
                // The destination's own claim can outrun the ack; the
                // handoff still completed.
                if merged
                    && was_pending_to == Some(entry.anchor)
                    && !agent.pending_handoffs.contains_key(&msg.ue)
                {
                    self.handoffs_completed += 1;
                }
                Vec::new()
            }
            (MessageKind::HandoffRequest, MessagePayload::HandoffRequest) => Vec::new(),
            (
                MessageKind::StateTransfer,
                MessagePayload::SessionTransfer {
                    session,
                    hss_version,
                },
            ) => {
                let dst_id = msg.dst;
                let agent = self.agents.get_mut(&dst_id).expect("checked above");
                // Adopt the session with a fresh local bearer, claim the
                // anchor above everything either side has seen, then ack
                // and broadcast.
                let floor = agent.hss.version_of(msg.ue).max(*hss_version);
                let entry = agent.claim_anchor(msg.ue, session.state, floor);
                if let Some(adopted) = agent.sessions.get_mut(&msg.ue) {
                    adopted.context = session.context;
                }
                let ack = CoreMessage {
                    kind: MessageKind::HandoffAck,
                    src: dst_id,
                    dst: msg.src,
                    ue: msg.ue,
                    payload: MessagePayload::HandoffAck,
                    sent_at_ms: now_ms,
                };
                self.log(&ack);
                let mut out = vec![ack];
                out.extend(self.broadcast_claim(
                    dst_id,
                    msg.ue,
                    entry,
                    MessageKind::UeDetectedBroadcast,
                    now_ms,
                ));
                out
            }
            (MessageKind::HandoffAck, MessagePayload::HandoffAck) => {
                let agent = self.agents.get_mut(&msg.dst).expect("checked above");
                if let Some(pending) = agent.pending_handoffs.remove(&msg.ue) {
                    agent.sessions.remove(&msg.ue);
                    agent.forward_hints.insert(msg.ue, pending.dst);
                    self.handoffs_completed += 1;
                }
                // An ack for a rolled-back handoff is stale; the broadcast
                // from the new anchor (higher version) settles ownership.
                Vec::new()
            }
            (MessageKind::DataPacket, MessagePayload::Data(packet)) => {
                match self.route_data_at(msg.dst, *packet, now_ms, conn) {
                    DeliveryOutcome::Forwarded(next) => next,
                    _ => Vec::new(),
                }
            }
            _ => Vec::new(),
        }
    }

    /// Inject a data packet at the agent currently serving `src_ue` and
    /// route it toward `dst_ue`'s anchor.
    pub fn send_data(
        &mut self,
        at: AgentId,
        src_ue: UeId,
        dst_ue: UeId,
        bytes: u64,
        now_ms: u64,
        conn: &impl Connectivity,
    ) -> (DeliveryOutcome, Vec<CoreMessage>) {
        self.counters.sent += 1;
        let ttl = self.agents.len() as u32 + 4;
        let packet = DataPacket {
            src_ue,
            dst_ue,
            bytes,
            ttl,
            routed_version: 0,
        };
        match self.route_data_at(at, packet, now_ms, conn) {
            DeliveryOutcome::Forwarded(next) => (DeliveryOutcome::Forwarded(next.clone()), next),
            other => (other, Vec::new()),
        }
    }

    /// Charge every agent on a backhaul path for the bytes of one leg.
    pub fn charge_path(&mut self, path: &[AgentId], bytes: u64) {
        for agent_id in path {
            if let Some(agent) = self.agents.get_mut(agent_id) {
                agent.charge_bytes += bytes;
            }
        }
    }

    /// The data plane at one agent: deliver locally (paging idle sessions),
    /// or chase the anchor via the directory and forwarding hints. A packet
    /// only follows strictly newer directory versions than the one it was
    /// last routed on.
    fn route_data_at(
        &mut self,
        at: AgentId,
        mut packet: DataPacket,
        now_ms: u64,
        conn: &impl Connectivity,
    ) -> DeliveryOutcome {
        let Some(agent) = self.agents.get_mut(&at) else {
            self.counters.drop(DropReason::LinkDown);
            return DeliveryOutcome::Dropped(DropReason::LinkDown);
        };
        agent.charge_bytes += packet.bytes;

        if let Some(session) = agent.sessions.get_mut(&packet.dst_ue) {
            if session.anchor == at {
                if session.state == SessionState::Idle {
                    session.state = SessionState::Active;
                    self.pages += 1;
                    let page = CoreMessage {
                        kind: MessageKind::PageRequest,
                        src: at,
                        dst: at,
                        ue: packet.dst_ue,
                        payload: MessagePayload::HandoffRequest,
                        sent_at_ms: now_ms,
                    };
                    self.log(&page);
                }
                self.counters.delivered += 1;
                return DeliveryOutcome::DeliveredHere;
            }
        }

        let agent = self.agents.get(&at).expect("still present");
        let believed = agent.hss.get(packet.dst_ue);
        let hint = agent.forward_hints.get(&packet.dst_ue).copied();
        let next: Option<(AgentId, u64)> = match believed {
            Some(entry) if entry.anchor != at && entry.version > packet.routed_version => {
                Some((entry.anchor, entry.version))
            }
            _ => hint
                .filter(|&h| h != at)
                .map(|h| (h, packet.routed_version)),
        };
        let Some((next_agent, version)) = next else {
            let reason = if believed.is_none() && hint.is_none() {
                DropReason::UnknownUe
            } else {
                DropReason::NoRoute
            };
            self.counters.drop(reason);
            return DeliveryOutcome::Dropped(reason);
        };
        if packet.ttl == 0 {
            self.counters.drop(DropReason::NoRoute);
            return DeliveryOutcome::Dropped(DropReason::NoRoute);
        }
        if conn.path(at, next_agent).is_none() {
            self.counters.drop(DropReason::NoRoute);
            return DeliveryOutcome::Dropped(DropReason::NoRoute);
        }
        packet.ttl -= 1;
        packet.routed_version = version;
        let msg = CoreMessage {
            kind: MessageKind::DataPacket,
            src: at,
            dst: next_agent,
            ue: packet.dst_ue,
            payload: MessagePayload::Data(packet),
            sent_at_ms: now_ms,
        };
        self.log(&msg);
        DeliveryOutcome::Forwarded(vec![msg])
    }

    /// Local directory lookup. `None` distinguishes a never-seen UE from an
    /// anchored one.
    pub fn locate_ue(&self, agent_id: AgentId, ue: UeId) -> Option<AgentId> {
        self.agents
            .get(&agent_id)
            .and_then(|a| a.hss.get(ue))
            .map(|e| e.anchor)
    }

    pub fn compile_flow_table(&self, agent_id: AgentId) -> Result<FlowTable, SkycoreError> {
        self.agents
            .get(&agent_id)
            .map(|a| a.compile_flow_table())
            .ok_or(SkycoreError::UnknownAgent(agent_id))
    }

    /// Bulk state migration before a planned shutdown: every session moves
    /// to `replacement` via ordinary state transfers.
    pub fn migrate_all_sessions(
        &mut self,
        from: AgentId,
        replacement: AgentId,
        now_ms: u64,
        conn: &impl Connectivity,
    ) -> Vec<CoreMessage> {
        let Some(agent) = self.agents.get(&from) else {
            return Vec::new();
        };
        let ues: Vec<UeId> = agent
            .sessions
            .iter()
            .filter(|(_, s)| s.anchor == from)
            .map(|(&ue, _)| ue)
            .collect();
        let mut out = Vec::new();
        for ue in ues {
            // Active sessions ride the normal three-way handoff; idle ones
            // move as a bare transfer.
            let agent = self.agents.get_mut(&from).expect("present");
            let Some(session) = agent.sessions.get(&ue).copied() else {
                continue;
            };
            if session.state == SessionState::Active {
                match self.start_handoff(from, replacement, ue, now_ms, conn) {
                    Ok(HandoffStart::Started(msgs)) => out.extend(msgs),
                    _ => continue,
                }
            } else {
                let hss_version = agent.hss.version_of(ue);
                agent.sessions.remove(&ue);
                agent.forward_hints.insert(ue, replacement);
                let transfer = CoreMessage {
                    kind: MessageKind::StateTransfer,
                    src: from,
                    dst: replacement,
                    ue,
                    payload: MessagePayload::SessionTransfer {
                        session,
                        hss_version,
                    },
                    sent_at_ms: now_ms,
                };
                self.log(&transfer);
                out.push(transfer);
            }
        }
        out
    }

    /// True when every replica agrees on every known UE's anchor and each
    /// anchored UE has a session exactly at its anchor.
    pub fn anchors_converged(&self) -> bool {
        let mut anchors: BTreeMap<UeId, AgentId> = BTreeMap::new();
        for agent in self.agents.values() {
            for (&ue, entry) in agent.hss.iter() {
                match anchors.get(&ue) {
                    Some(&a) if a != entry.anchor => return false,
                    _ => {
                        anchors.insert(ue, entry.anchor);
                    }
                }
            }
        }
        for (&ue, &anchor) in &anchors {
            for agent in self.agents.values() {
                let has_session = agent
                    .sessions
                    .get(&ue)
                    .is_some_and(|s| s.anchor == agent.id);
                if has_session != (agent.id == anchor) {
                    return false;
                }
                if agent.hss.get(ue).is_none() {
                    // A replica that never heard of the UE at all is still
                    // divergent.
                    return false;
                }
            }
        }
        true
    }

    /// Agents currently holding a session for the UE.
    pub fn session_holders(&self, ue: UeId) -> Vec<AgentId> {
        self.agents
            .values()
            .filter(|a| a.sessions.contains_key(&ue))
            .map(|a| a.id)
            .collect()
    }

    pub fn pending_handoff_ues(&self) -> Vec<(AgentId, UeId)> {
        self.agents
            .values()
            .flat_map(|a| a.pending_handoffs.keys().map(move |&ue| (a.id, ue)))
            .collect()
    }
}

/// Deliver a batch of messages (and everything they trigger) immediately
/// over the given connectivity, charging data legs as they move. Returns
/// when no messages remain. Test/bootstrap convenience; the engine proper
/// schedules each hop through its event queue instead.
pub fn deliver_all(
    network: &mut CoreNetwork,
    inbox: Vec<CoreMessage>,
    now_ms: u64,
    conn: &impl Connectivity,
) {
    let mut inbox: std::collections::VecDeque<CoreMessage> = inbox.into();
    while let Some(msg) = inbox.pop_front() {
        match conn.path(msg.src, msg.dst) {
            Some(path) => {
                if msg.kind == MessageKind::DataPacket {
                    if let MessagePayload::Data(packet) = &msg.payload {
                        // Strict intermediates; endpoints charge when they
                        // originate or process the packet.
                        if path.len() > 2 {
                            network.charge_path(&path[1..path.len() - 1], packet.bytes);
                        }
                    }
                }
                inbox.extend(network.deliver(&msg, now_ms, conn));
            }
            None => {
                if msg.kind == MessageKind::DataPacket {
                    network.counters.drop(DropReason::NoRoute);
                } else {
                    network.counters.control_lost += 1;
                }
            }
        }
    }
}
