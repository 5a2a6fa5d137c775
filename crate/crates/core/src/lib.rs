//! Scheduling and simulation for deadline-constrained packet repair in
//! partially connected device-to-device networks using instantly decodable
//! network coding (IDNC).
//!
//! A session starts with every device holding a subset of `N` source packets
//! and ends after `Θ` short-range slots. In each slot a set of devices may
//! transmit XOR combinations simultaneously, provided the decisions are free
//! of coding conflicts (a receiver must decode instantly) and transmission
//! conflicts (collisions, role clashes). All feasible decisions are the
//! maximal independent sets of a unified conflict graph built per slot.
//!
//! The crate provides:
//!
//! - [`model`] — connectivity/status matrices, deadline clock, importance
//!   weights and the derived Has/Wants/critical sets;
//! - [`graph`] — the unified IDNC conflict graph, maximal-independent-set
//!   enumeration (Bron–Kerbosch) and max-weight selection;
//! - [`video`] — layered GOP packetization and the PSNR quality model that
//!   produces per-packet importance weights;
//! - [`scheduling`] — per-slot policies: the two-stage TS-MIS heuristic and
//!   the PCB / FCD baselines behind a common [`scheduling::Scheduler`] trait;
//! - [`mdp`] — exact finite-horizon backward induction for small instances,
//!   usable both as a solver and as an optimal scheduler;
//! - [`sim`] — seeded scenario generation, episode engine and Monte-Carlo
//!   aggregation with common random numbers across schedulers.

pub mod fixtures;
pub mod graph;
pub mod mdp;
pub mod model;
pub mod scheduling;
pub mod sim;
pub mod video;

pub use graph::{ConflictRule, IdncGraph, IndependentSet, Vertex};
pub use model::{
    critical_set, individual_distortion, non_critical_set, ConnectivityMatrix, DeviceId,
    ImportanceMatrix, PacketId, SessionClock, StatusMatrix,
};
pub use scheduling::{Scheduler, SelectionConfig, SelectionMode, SlotState};
pub use video::GopModel;

