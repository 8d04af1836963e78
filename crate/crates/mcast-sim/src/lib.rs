//! Deterministic system-level simulator of adaptive media delivery over a
//! cellular downlink: unicast (PTP), multicast/broadcast (PTM) over an MBSFN
//! area, audience-driven unicast/broadcast switching, and multi-link
//! duplication with client-side merge and repair. Emits resource, spectral
//! efficiency and QoE reports per run.
//!
//! Start from [`scenario::ScenarioConfig`] and [`runner::run`], or see the
//! `examples/` directory for one runnable example per capability.

pub mod client;
pub mod delivery;
pub mod error;
pub mod kernel;
pub mod kpi;
pub mod mood;
pub mod multilink;
pub mod radio;
pub mod report;
pub mod runner;
pub mod scenario;

pub use error::SimError;
