//! Transient stability screening of transmission switching events.
//!
//! The pre-switching steady state comes from a Newton power flow. Loads are
//! frozen as constant impedances and every network bus is eliminated, which
//! leaves classical machines coupled through a reduced admittance matrix.
//! Each switching event is then judged by a pseudo-fault direct method
//! (exit point, controlling UEP, energy margin), with a brute-force
//! closest-UEP method and time-domain simulation alongside.

pub mod direct_method;
pub mod dynamics;
pub mod energy;
pub mod equilibria;
pub mod linalg;
pub mod network;
pub mod powerflow;
pub mod report;
pub mod study;

pub use network::{BusId, CaseData, SwitchingEvent};
pub use study::Study;

/// The bundled WSCC 9-bus, 3-machine case.
pub const WSCC9_CASE: &str = include_str!("../cases/wscc9.json");
/// Six line-opening events on the WSCC case.
pub const WSCC9_CONTINGENCIES: &str = include_str!("../cases/wscc9_contingencies.json");
/// Ten line-opening events for the IEEE 145-bus case (case file not bundled).
pub const IEEE145_CONTINGENCIES: &str = include_str!("../cases/ieee145_contingencies.json");
