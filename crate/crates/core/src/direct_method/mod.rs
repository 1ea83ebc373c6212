//! Pseudo-fault direct method for switching events.

pub mod bcu;
pub mod pebs;
pub mod screening;

pub use bcu::{bcu_reduced_rhs, find_mgp, project_to_pebs, refine_cuep, BcuFailure, BcuOptions, Mgp};
pub use pebs::{find_exit_point, first_peak, ExitPoint, NoExitPoint};
pub use screening::{
    closest_uep_assessment, contingency_rng, energy_margin, pseudo_fault_cuep, pseudo_fault_exit, screen_batch, screen_contingency,
    ClosestUepAssessment, ClosestVerdict, CuepResult, CuepStatus, DirectVerdict, ExitAttempt, NeedsTdsReason, ScreeningOptions,
    ScreeningVerdict, Step,
};
