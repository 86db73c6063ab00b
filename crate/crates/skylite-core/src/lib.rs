//! Deterministic simulator and optimization suite for networks of
//! LTE-carrying UAVs.
//!
//! The crate is organized around the layers of such a network:
//!
//! - [`world`] — ground-truth geometry, propagation, antenna and rate models
//!   shared by everything else.
//! - [`localization`] — time-of-flight ranging and trilateration of ground
//!   devices from sampled UAV waypoints.
//! - [`skyran`] — the per-UAV access-network pipeline: operational airspace,
//!   hierarchical RF-map construction, placement optimization, candidate-set
//!   export and collision handling between UAVs.
//! - [`skyhaul`] — the centralized backhaul controller: link graph, channel
//!   or beam assignment, relay augmentation, max-concurrent-flow routing and
//!   reconfiguration on fleet churn.
//! - [`skycore`] — per-UAV collapsed core-network agents: sessions, flow
//!   tables, inter-agent handoff, tracking-area updates and UE lookup over a
//!   replicated subscriber directory.
//! - [`engine`] — the deterministic event loop, scenario I/O, metrics and
//!   the `skylite` CLI entry points.
//!
//! [`oracle`] holds independent brute-force reference implementations
//! (exhaustive search, max-flow, chromatic number, grid trilateration) used
//! by the test suites and by `skylite run --verify-oracles`.
//!
//! Every simulation is a pure function of `(scenario, seed)`: identical
//! inputs produce byte-identical metrics, plans and traces.

pub mod engine;
pub mod localization;
pub mod oracle;
pub mod skycore;
pub mod skyhaul;
pub mod skyran;
pub mod types;
pub mod world;
