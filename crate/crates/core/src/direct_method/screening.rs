//! Per-contingency screening: pseudo-fault CUEP pipeline, closest-UEP
//! assessment and time-domain fallback.

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{simulate_switching, sustained_fault_trajectory, DynamicState, Machines, SwingModel, TdsOptions, TdsVerdict};
use crate::energy::total_energy;
use crate::equilibria::{
    compute_post_switching_sep, uep_inventory, BoundaryOptions, ClosestUepOptions, EquilibriumOptions,
    EquilibriumPoint, SepFailure,
};
use crate::network::{BusId, ReducedNetwork, SwitchingEvent};
use crate::study::{PostSwitching, Study, StudyError};

use super::bcu::{find_mgp, refine_cuep, BcuFailure, BcuOptions, Mgp};
use super::pebs::{find_exit_point, ExitPoint, NoExitPoint};

#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScreeningOptions {
    pub fault_dt: f64,
    pub fault_t_max: f64,
    pub tds: TdsOptions,
    pub tds_fallback: bool,
    pub equilibrium: EquilibriumOptions,
    pub bcu: BcuOptions,
    pub boundary: BoundaryOptions,
    pub closest: ClosestUepOptions,
    pub seed: u64,
}

impl Default for ScreeningOptions {
    fn default() -> Self {
        ScreeningOptions {
            fault_dt: 1e-3,
            fault_t_max: 3.0,
            tds: TdsOptions::default(),
            tds_fallback: false,
            equilibrium: EquilibriumOptions::default(),
            bcu: BcuOptions::default(),
            boundary: BoundaryOptions::default(),
            closest: ClosestUepOptions::default(),
            seed: 42,
        }
    }
}

/// Why the direct analysis could not certify stability.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "reason", rename_all = "kebab-case")]
pub enum NeedsTdsReason {
    SepNotFound { detail: String },
    ExitEnergyBelowInit { bus: BusId, exit_energy: f64 },
    BcuFailed { failure: BcuFailure },
    NoExitPoint { detail: String },
    NonHyperbolic,
    Islanding { detail: String },
    NegativeMargin,
}

impl NeedsTdsReason {
    pub fn label(&self) -> &'static str {
        match self {
            NeedsTdsReason::SepNotFound { .. } => "SEPNotFound",
            NeedsTdsReason::ExitEnergyBelowInit { .. } => "ExitEnergyBelowInit",
            NeedsTdsReason::BcuFailed { .. } => "BCUFailed",
            NeedsTdsReason::NoExitPoint { .. } => "NoExitPoint",
            NeedsTdsReason::NonHyperbolic => "NonHyperbolic",
            NeedsTdsReason::Islanding { .. } => "Islanding",
            NeedsTdsReason::NegativeMargin => "NegativeMargin",
        }
    }

    pub fn describe(&self) -> String {
        match self {
            NeedsTdsReason::SepNotFound { detail }
            | NeedsTdsReason::NoExitPoint { detail }
            | NeedsTdsReason::Islanding { detail } => format!("{}({detail})", self.label()),
            NeedsTdsReason::BcuFailed { failure } => format!("BCUFailed({failure})"),
            NeedsTdsReason::ExitEnergyBelowInit { bus, .. } => format!("ExitEnergyBelowInit(bus {bus})"),
            _ => self.label().to_string(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "kebab-case")]
pub enum DirectVerdict {
    Stable,
    NeedsTds { reason: NeedsTdsReason },
}

impl DirectVerdict {
    pub fn is_stable(&self) -> bool {
        matches!(self, DirectVerdict::Stable)
    }

    pub fn reason(&self) -> Option<&NeedsTdsReason> {
        match self {
            DirectVerdict::Stable => None,
            DirectVerdict::NeedsTds { reason } => Some(reason),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExitAttempt {
    pub bus: BusId,
    pub exit: Option<ExitPoint>,
    pub failure: Option<NoExitPoint>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "kebab-case")]
pub enum CuepStatus {
    Ok,
    BcuFailed { failure: BcuFailure },
    NoExitPoint,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CuepResult {
    pub chosen_bus: Option<BusId>,
    pub exits: Vec<ExitAttempt>,
    pub mgp: Option<Mgp>,
    pub cuep: Option<EquilibriumPoint>,
    pub status: CuepStatus,
}

impl CuepResult {
    pub fn chosen_exit(&self) -> Option<&ExitPoint> {
        let bus = self.chosen_bus?;
        self.exits.iter().find(|e| e.bus == bus)?.exit.as_ref()
    }
}

/// Pipeline step at which the direct analysis stopped.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Step {
    Switching,
    PostSwitchingSep,
    ExitPoints,
    ExitEnergyCheck,
    Bcu,
    MarginCheck,
}

impl Step {
    /// Position in the eight-step scheme (0 for the switching itself).
    pub fn number(&self) -> u8 {
        match self {
            Step::Switching => 0,
            Step::PostSwitchingSep => 1,
            Step::ExitPoints => 3,
            Step::ExitEnergyCheck => 4,
            Step::Bcu => 5,
            Step::MarginCheck => 7,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScreeningVerdict {
    pub contingency: SwitchingEvent,
    pub terminated_at: Step,
    pub sep: Option<EquilibriumPoint>,
    pub init_energy: Option<f64>,
    pub cuep: Option<CuepResult>,
    pub cuep_energy: Option<f64>,
    pub margin: Option<f64>,
    pub verdict: DirectVerdict,
    pub tds: Option<TdsVerdict>,
}

fn study_failure(e: &StudyError) -> NeedsTdsReason {
    if e.is_islanding() {
        NeedsTdsReason::Islanding { detail: e.to_string() }
    } else {
        NeedsTdsReason::SepNotFound { detail: e.to_string() }
    }
}

fn sep_failure(e: &SepFailure) -> NeedsTdsReason {
    match e {
        SepFailure::NotStable { hyperbolic: false, index: 0 } => NeedsTdsReason::NonHyperbolic,
        other => NeedsTdsReason::SepNotFound { detail: other.to_string() },
    }
}

/// V(cuep) − V(init).
pub fn energy_margin(
    cuep: &EquilibriumPoint,
    init: &DynamicState,
    sep: &DVector<f64>,
    net: &ReducedNetwork,
    machines: &Machines,
) -> f64 {
    let critical = total_energy(&cuep.state(), sep, net, machines).total;
    critical - total_energy(init, sep, net, machines).total
}

/// Exit point of the sustained fault at `bus`, started from the SEP at rest.
pub fn pseudo_fault_exit(
    study: &Study,
    post: &PostSwitching,
    sep: &EquilibriumPoint,
    bus: BusId,
    options: &ScreeningOptions,
) -> Result<ExitPoint, NoExitPoint> {
    let faulted = study.faulted(post, bus).map_err(|e| {
        if e.is_reduction_singular() {
            NoExitPoint::ReductionSingular
        } else {
            NoExitPoint::Other { message: e.to_string() }
        }
    })?;
    let undamped = study.machines.with_damping_ratio(0.0);
    let model = SwingModel::new(&faulted, &undamped).map_err(|e| NoExitPoint::Other { message: e.to_string() })?;
    let traj = sustained_fault_trajectory(&sep.state(), &model, options.fault_t_max, options.fault_dt)
        .map_err(|e| NoExitPoint::Other { message: e.to_string() })?;
    find_exit_point(&traj, &sep.angles, &post.reduced, &undamped, bus)
}

/// Exit points for faults at both ends of the switched branch; BCU runs
/// only from the exit with the lower total energy.
pub fn pseudo_fault_cuep(
    study: &Study,
    post: &PostSwitching,
    sep: &EquilibriumPoint,
    options: &ScreeningOptions,
) -> CuepResult {
    let buses = [post.event.branch.from, post.event.branch.to];
    let exits: Vec<ExitAttempt> = buses
        .iter()
        .map(|&bus| match pseudo_fault_exit(study, post, sep, bus, options) {
            Ok(exit) => ExitAttempt {
                bus,
                exit: Some(exit),
                failure: None,
            },
            Err(failure) => ExitAttempt {
                bus,
                exit: None,
                failure: Some(failure),
            },
        })
        .collect();
    let chosen = exits
        .iter()
        .filter_map(|a| a.exit.as_ref())
        .min_by(|a, b| a.energy.total.total_cmp(&b.energy.total))
        .cloned();
    let Some(exit) = chosen else {
        return CuepResult {
            chosen_bus: None,
            exits,
            mgp: None,
            cuep: None,
            status: CuepStatus::NoExitPoint,
        };
    };
    let machines = &study.machines;
    let net = &post.reduced;
    let mgp = match find_mgp(&exit.state.angles, &sep.angles, net, machines, &options.bcu) {
        Ok(m) => m,
        Err(failure) => {
            return CuepResult {
                chosen_bus: Some(exit.fault_bus),
                exits,
                mgp: None,
                cuep: None,
                status: CuepStatus::BcuFailed { failure },
            }
        }
    };
    let refined = refine_cuep(
        &mgp,
        &sep.angles,
        net,
        machines,
        &options.equilibrium,
        &options.boundary,
        &options.bcu,
    );
    let (cuep, status) = match refined {
        Ok(ep) => (Some(ep), CuepStatus::Ok),
        Err(failure) => (None, CuepStatus::BcuFailed { failure }),
    };
    CuepResult {
        chosen_bus: Some(exit.fault_bus),
        exits,
        mgp: Some(mgp),
        cuep,
        status,
    }
}

fn attach_tds(study: &Study, mut verdict: ScreeningVerdict, options: &ScreeningOptions) -> ScreeningVerdict {
    if options.tds_fallback && !verdict.verdict.is_stable() {
        verdict.tds = simulate_switching(study, &verdict.contingency, &options.tds)
            .ok()
            .map(|(_, v)| v);
    }
    verdict
}

/// Steps 1–8 of the screening scheme for one switching event.
pub fn screen_contingency(study: &Study, event: &SwitchingEvent, options: &ScreeningOptions) -> ScreeningVerdict {
    let mut out = ScreeningVerdict {
        contingency: *event,
        terminated_at: Step::Switching,
        sep: None,
        init_energy: None,
        cuep: None,
        cuep_energy: None,
        margin: None,
        verdict: DirectVerdict::Stable,
        tds: None,
    };
    let needs = |reason| DirectVerdict::NeedsTds { reason };

    let post = match study.post_switching(event) {
        Ok(p) => p,
        Err(e) => {
            out.verdict = needs(study_failure(&e));
            if !e.is_islanding() {
                out.terminated_at = Step::PostSwitchingSep;
            }
            return attach_tds(study, out, options);
        }
    };
    // 1. post-switching SEP
    out.terminated_at = Step::PostSwitchingSep;
    let sep = match compute_post_switching_sep(study, &post, &options.equilibrium) {
        Ok(s) => s,
        Err(e) => {
            out.verdict = needs(sep_failure(&e));
            return attach_tds(study, out, options);
        }
    };
    let machines = &study.machines;
    // 2. energy at the post-switching initial point
    let init = study.initial_state();
    let v_init = total_energy(&init, &sep.angles, &post.reduced, machines).total;
    out.init_energy = Some(v_init);
    out.sep = Some(sep.clone());

    // 3. exit points, 5. BCU on the lower one
    out.terminated_at = Step::ExitPoints;
    let cuep = pseudo_fault_cuep(study, &post, &sep, options);
    // 4. any exit below the initial energy
    let below = cuep
        .exits
        .iter()
        .filter_map(|a| a.exit.as_ref())
        .filter(|e| e.energy.total < v_init)
        .min_by(|a, b| a.energy.total.total_cmp(&b.energy.total));
    if let Some(e) = below {
        out.terminated_at = Step::ExitEnergyCheck;
        out.verdict = needs(NeedsTdsReason::ExitEnergyBelowInit {
            bus: e.fault_bus,
            exit_energy: e.energy.total,
        });
        out.cuep = Some(cuep);
        return attach_tds(study, out, options);
    }
    match &cuep.status {
        CuepStatus::NoExitPoint => {
            let detail = cuep
                .exits
                .iter()
                .filter_map(|a| a.failure.as_ref().map(|f| format!("bus {}: {f}", a.bus)))
                .collect::<Vec<_>>()
                .join("; ");
            out.verdict = needs(NeedsTdsReason::NoExitPoint { detail });
            out.cuep = Some(cuep);
            return attach_tds(study, out, options);
        }
        CuepStatus::BcuFailed { failure } => {
            out.terminated_at = Step::Bcu;
            out.verdict = needs(NeedsTdsReason::BcuFailed { failure: *failure });
            out.cuep = Some(cuep);
            return attach_tds(study, out, options);
        }
        CuepStatus::Ok => {}
    }
    // 6. energy at the CUEP, 7. margin
    let point = cuep.cuep.as_ref().expect("ok status carries a CUEP");
    let margin = energy_margin(point, &init, &sep.angles, &post.reduced, machines);
    out.cuep_energy = point.energy;
    out.margin = Some(margin);
    out.terminated_at = Step::MarginCheck;
    out.verdict = if margin > 0.0 {
        DirectVerdict::Stable
    } else {
        needs(NeedsTdsReason::NegativeMargin)
    };
    out.cuep = Some(cuep);
    // 8. time-domain fallback
    attach_tds(study, out, options)
}

pub fn screen_batch(study: &Study, events: &[SwitchingEvent], options: &ScreeningOptions) -> Vec<ScreeningVerdict> {
    events.par_iter().map(|e| screen_contingency(study, e, options)).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClosestUepAssessment {
    pub contingency: SwitchingEvent,
    pub init_energy: Option<f64>,
    pub closest: Option<EquilibriumPoint>,
    pub margin: Option<f64>,
    pub candidates: usize,
    pub boundary_points: usize,
    pub verdict: ClosestVerdict,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "kebab-case")]
pub enum ClosestVerdict {
    Stable,
    NegativeMargin,
    Unavailable { reason: String },
}

impl ClosestVerdict {
    pub fn is_stable(&self) -> bool {
        matches!(self, ClosestVerdict::Stable)
    }
}

/// Deterministic per-contingency random stream.
pub fn contingency_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

/// Critical energy from the lowest-energy certified boundary UEP.
pub fn closest_uep_assessment(
    study: &Study,
    event: &SwitchingEvent,
    index: usize,
    options: &ScreeningOptions,
) -> ClosestUepAssessment {
    let mut out = ClosestUepAssessment {
        contingency: *event,
        init_energy: None,
        closest: None,
        margin: None,
        candidates: 0,
        boundary_points: 0,
        verdict: ClosestVerdict::Stable,
    };
    let unavailable = |reason: String| ClosestVerdict::Unavailable { reason };
    let post = match study.post_switching(event) {
        Ok(p) => p,
        Err(e) => {
            out.verdict = unavailable(study_failure(&e).describe());
            return out;
        }
    };
    let sep = match compute_post_switching_sep(study, &post, &options.equilibrium) {
        Ok(s) => s,
        Err(e) => {
            out.verdict = unavailable(sep_failure(&e).describe());
            return out;
        }
    };
    let init = study.initial_state();
    let machines = &study.machines;
    let v_init = total_energy(&init, &sep.angles, &post.reduced, machines).total;
    out.init_energy = Some(v_init);
    let mut rng = contingency_rng(options.seed, index);
    let inventory = match uep_inventory(
        &post.reduced,
        machines,
        &sep.angles,
        &mut rng,
        &options.equilibrium,
        &options.closest,
    ) {
        Ok(inv) => inv,
        Err(e) => {
            out.verdict = unavailable(e.to_string());
            return out;
        }
    };
    out.candidates = inventory.candidates.len();
    out.boundary_points = inventory.boundary.len();
    match inventory.closest(&sep.angles) {
        Some(u) => {
            let margin = energy_margin(u, &init, &sep.angles, &post.reduced, machines);
            out.margin = Some(margin);
            out.closest = Some(u.clone());
            out.verdict = if margin > 0.0 {
                ClosestVerdict::Stable
            } else {
                ClosestVerdict::NegativeMargin
            };
        }
        None => {
            out.verdict = unavailable("no boundary UEP found".into());
        }
    }
    out
}
