//! Pre-switching operating point and the networks derived from it.

use thiserror::Error;

use crate::dynamics::{to_coi, DynamicState, DynamicsError, Machines};
use crate::network::{
    apply_bus_fault, apply_switching, build_ybus, kron_reduce, AdmittanceMatrix, BusId, CaseData, LoadModel,
    NetworkError, ReducedNetwork, SwitchingEvent, Topology,
};
use crate::powerflow::{
    init_classical_generators, solve_power_flow, GeneratorInternalState, PowerFlowError, PowerFlowOptions,
    PowerFlowSolution,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StudyError {
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error(transparent)]
    PowerFlow(#[from] PowerFlowError),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
}

impl StudyError {
    pub fn is_islanding(&self) -> bool {
        matches!(self, StudyError::Network(NetworkError::Islanding(..)))
    }

    pub fn is_reduction_singular(&self) -> bool {
        matches!(self, StudyError::Network(NetworkError::ReductionSingular(_)))
    }
}

/// Everything fixed by the pre-switching steady state.
#[derive(Clone, Debug)]
pub struct Study {
    pub case: CaseData,
    pub power_flow: PowerFlowSolution,
    pub generators: GeneratorInternalState,
    pub machines: Machines,
    pub pre: ReducedNetwork,
}

/// Post-switching topology with loads frozen as shunts at pre-switching voltages.
#[derive(Clone, Debug)]
pub struct PostSwitching {
    pub event: SwitchingEvent,
    pub case: CaseData,
    pub ybus: AdmittanceMatrix,
    pub reduced: ReducedNetwork,
}

impl Study {
    pub fn new(case: CaseData, options: &PowerFlowOptions) -> Result<Self, StudyError> {
        let power_flow = solve_power_flow(&case, options)?;
        let generators = init_classical_generators(&case, &power_flow)?;
        let ybus = build_ybus(&case, LoadModel::AsShunts(&power_flow.vm))?;
        let pre = kron_reduce(&ybus, &case, &generators)?;
        let machines = Machines::from_case(&case);
        Ok(Study {
            case,
            power_flow,
            generators,
            machines,
            pre,
        })
    }

    /// Pre-switching rotor angles in the COI frame, at rest. Angles are
    /// continuous across the switching instant, so this is also the
    /// post-switching initial point.
    pub fn initial_state(&self) -> DynamicState {
        let angles = nalgebra::DVector::from_column_slice(&self.generators.delta);
        let speeds = nalgebra::DVector::zeros(angles.len());
        to_coi(&angles, &speeds, &self.machines)
    }

    pub fn post_switching(&self, event: &SwitchingEvent) -> Result<PostSwitching, StudyError> {
        let case = apply_switching(&self.case, event)?;
        let ybus = build_ybus(&case, LoadModel::AsShunts(&self.power_flow.vm))?.labeled(Topology::PostSwitching);
        let reduced = kron_reduce(&ybus, &case, &self.generators)?;
        Ok(PostSwitching {
            event: *event,
            case,
            ybus,
            reduced,
        })
    }

    /// Post-switching network with a bolted fault at `bus`.
    pub fn faulted(&self, post: &PostSwitching, bus: BusId) -> Result<ReducedNetwork, StudyError> {
        let y = apply_bus_fault(&post.ybus, bus)?;
        Ok(kron_reduce(&y, &post.case, &self.generators)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::vector_field;
    use crate::network::parse_case;

    fn study() -> Study {
        let case = parse_case(include_str!("../cases/wscc9.json")).unwrap().with_uniform_load_p(279.5);
        Study::new(case, &PowerFlowOptions::default()).unwrap()
    }

    #[test]
    fn initial_point_is_pre_switching_equilibrium() {
        let s = study();
        let x0 = s.initial_state();
        let f = vector_field(&x0.angles, &s.pre, &s.machines);
        assert!(f.amax() < 1e-8, "{f}");
        assert!(x0.angles.dot(&s.machines.inertia).abs() < 1e-12);
    }

    #[test]
    fn post_switching_changes_reduced_network() {
        let s = study();
        let post = s.post_switching(&SwitchingEvent::open(7, 5)).unwrap();
        assert_eq!(post.reduced.topology, Topology::PostSwitching);
        assert!((&post.reduced.y_red - &s.pre.y_red).norm() > 1e-3);
        let faulted = s.faulted(&post, BusId(5)).unwrap();
        assert_eq!(faulted.topology, Topology::Faulted(BusId(5)));
    }

    #[test]
    fn fault_commutes_with_switching() {
        let s = study();
        let event = SwitchingEvent::open(7, 5);
        let post = s.post_switching(&event).unwrap();
        let a = apply_bus_fault(&post.ybus, BusId(9)).unwrap();
        let base = build_ybus(&s.case, LoadModel::AsShunts(&s.power_flow.vm)).unwrap();
        let faulted_first = apply_bus_fault(&base, BusId(9)).unwrap();
        // removing branch 7-5 from the faulted matrix by hand
        let mut b = faulted_first.y.clone();
        let br = s.case.branch(&event.branch).unwrap();
        let ys = br.series_admittance().unwrap();
        let charging = num_complex::Complex64::new(0.0, br.b / 2.0);
        let i = faulted_first.position(BusId(7)).unwrap();
        let j = faulted_first.position(BusId(5)).unwrap();
        b[(i, i)] -= ys + charging;
        b[(j, j)] -= ys + charging;
        b[(i, j)] += ys;
        b[(j, i)] += ys;
        assert!((a.y - b).camax() < 1e-12);
    }
}
