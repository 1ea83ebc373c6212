//! Classical swing equations in the center-of-inertia frame.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::network::{CaseData, SwitchingEvent, Topology};
use crate::network::ReducedNetwork;
use crate::study::{Study, StudyError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DynamicsError {
    #[error("damping ratio D_i/M_i must be uniform (machine {machine}: {found} vs {expected})")]
    NonUniformDamping { machine: usize, found: f64, expected: f64 },
    #[error("invalid integration window: dt = {dt}, T = {horizon}")]
    InvalidStep { dt: f64, horizon: f64 },
    #[error("state has {got} machines, network has {expected}")]
    Dimension { expected: usize, got: usize },
}

/// Inertia and damping of every machine, in generator order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Machines {
    pub inertia: DVector<f64>,
    pub damping: DVector<f64>,
}

impl Machines {
    pub fn new(inertia: Vec<f64>) -> Self {
        let n = inertia.len();
        Machines {
            inertia: DVector::from_vec(inertia),
            damping: DVector::zeros(n),
        }
    }

    pub fn from_case(case: &CaseData) -> Self {
        Machines {
            inertia: DVector::from_iterator(case.generators.len(), case.generators.iter().map(|g| g.inertia)),
            damping: DVector::from_iterator(case.generators.len(), case.generators.iter().map(|g| g.damping)),
        }
    }

    /// Same inertias with D_i = ratio · M_i.
    pub fn with_damping_ratio(&self, ratio: f64) -> Self {
        Machines {
            inertia: self.inertia.clone(),
            damping: &self.inertia * ratio,
        }
    }

    pub fn len(&self) -> usize {
        self.inertia.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inertia.is_empty()
    }

    pub fn total(&self) -> f64 {
        self.inertia.sum()
    }

    /// M_i / M_T.
    pub fn weights(&self) -> DVector<f64> {
        &self.inertia / self.total()
    }

    pub fn damping_ratio(&self) -> Result<f64, DynamicsError> {
        let expected = self.damping[0] / self.inertia[0];
        for i in 1..self.len() {
            let found = self.damping[i] / self.inertia[i];
            if (found - expected).abs() > 1e-12 * expected.abs().max(1.0) {
                return Err(DynamicsError::NonUniformDamping {
                    machine: i,
                    found,
                    expected,
                });
            }
        }
        Ok(expected)
    }
}

/// COI-frame rotor angles (rad) and speeds (rad/s).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DynamicState {
    pub angles: DVector<f64>,
    pub speeds: DVector<f64>,
}

impl DynamicState {
    pub fn at_rest(angles: DVector<f64>) -> Self {
        let n = angles.len();
        DynamicState {
            angles,
            speeds: DVector::zeros(n),
        }
    }

    pub fn len(&self) -> usize {
        self.angles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.angles.is_empty()
    }

    pub fn is_finite(&self) -> bool {
        self.angles.iter().chain(self.speeds.iter()).all(|v| v.is_finite())
    }

    /// Largest pairwise angle separation.
    pub fn spread(&self) -> f64 {
        self.angles.max() - self.angles.min()
    }

    fn axpy(&self, h: f64, d: &DynamicState) -> DynamicState {
        DynamicState {
            angles: &self.angles + &d.angles * h,
            speeds: &self.speeds + &d.speeds * h,
        }
    }
}

/// Inertia-weighted mean.
pub fn coi_mean(values: &DVector<f64>, machines: &Machines) -> f64 {
    values.dot(&machines.inertia) / machines.total()
}

pub fn to_coi(angles: &DVector<f64>, speeds: &DVector<f64>, machines: &Machines) -> DynamicState {
    let d0 = coi_mean(angles, machines);
    let w0 = coi_mean(speeds, machines);
    DynamicState {
        angles: angles.add_scalar(-d0),
        speeds: speeds.add_scalar(-w0),
    }
}

/// Absolute angles and speeds given the COI angle δ₀ and speed ω₀.
pub fn from_coi(state: &DynamicState, delta0: f64, omega0: f64) -> (DVector<f64>, DVector<f64>) {
    (state.angles.add_scalar(delta0), state.speeds.add_scalar(omega0))
}

/// P_COI = Σ P_i − Σ_{i≠j} D_ij cos δ_ij.
pub fn p_coi(angles: &DVector<f64>, net: &ReducedNetwork) -> f64 {
    let n = angles.len();
    let mut total = net.p.sum();
    for i in 0..n {
        for j in 0..n {
            if i != j && net.d[(i, j)] != 0.0 {
                total -= net.d[(i, j)] * (angles[i] - angles[j]).cos();
            }
        }
    }
    total
}

/// Accelerating power with the COI share removed:
/// f_i = P_i − Σ_j [C_ij sin δ_ij + D_ij cos δ_ij] − (M_i/M_T) P_COI.
pub fn vector_field(angles: &DVector<f64>, net: &ReducedNetwork, machines: &Machines) -> DVector<f64> {
    let n = angles.len();
    let mut f = net.p.clone();
    let mut pcoi = net.p.sum();
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let (s, c) = (angles[i] - angles[j]).sin_cos();
            f[i] -= net.c[(i, j)] * s + net.d[(i, j)] * c;
            pcoi -= net.d[(i, j)] * c;
        }
    }
    let mt = machines.total();
    for i in 0..n {
        f[i] -= machines.inertia[i] / mt * pcoi;
    }
    f
}

/// ∂f/∂δ over all n angles.
pub fn vector_field_jacobian(angles: &DVector<f64>, net: &ReducedNetwork, machines: &Machines) -> DMatrix<f64> {
    let n = angles.len();
    // dpe[(i,k)] = ∂Pe_i/∂δ_k, dcoi[k] = ∂P_COI/∂δ_k
    let mut dpe = DMatrix::<f64>::zeros(n, n);
    let mut dcoi = DVector::<f64>::zeros(n);
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let (s, c) = (angles[i] - angles[j]).sin_cos();
            let v = net.c[(i, j)] * c - net.d[(i, j)] * s;
            dpe[(i, i)] += v;
            dpe[(i, j)] -= v;
            dcoi[i] += 2.0 * net.d[(i, j)] * s;
        }
    }
    let mt = machines.total();
    DMatrix::from_fn(n, n, |i, k| -dpe[(i, k)] - machines.inertia[i] / mt * dcoi[k])
}

/// Post-switching (or faulted) swing model with a validated uniform damping ratio.
#[derive(Clone, Debug)]
pub struct SwingModel<'a> {
    pub net: &'a ReducedNetwork,
    pub machines: &'a Machines,
    ratio: f64,
}

impl<'a> SwingModel<'a> {
    pub fn new(net: &'a ReducedNetwork, machines: &'a Machines) -> Result<Self, DynamicsError> {
        if net.machine_count() != machines.len() {
            return Err(DynamicsError::Dimension {
                expected: net.machine_count(),
                got: machines.len(),
            });
        }
        let ratio = machines.damping_ratio()?;
        Ok(SwingModel { net, machines, ratio })
    }

    pub fn damping_ratio(&self) -> f64 {
        self.ratio
    }

    pub fn rhs(&self, x: &DynamicState) -> DynamicState {
        let f = vector_field(&x.angles, self.net, self.machines);
        let accel = f.component_div(&self.machines.inertia) - &x.speeds * self.ratio;
        DynamicState {
            angles: x.speeds.clone(),
            speeds: accel,
        }
    }

    pub fn step(&self, x: &DynamicState, dt: f64) -> DynamicState {
        let k1 = self.rhs(x);
        let k2 = self.rhs(&x.axpy(dt / 2.0, &k1));
        let k3 = self.rhs(&x.axpy(dt / 2.0, &k2));
        let k4 = self.rhs(&x.axpy(dt, &k3));
        DynamicState {
            angles: &x.angles + (k1.angles + k2.angles * 2.0 + k3.angles * 2.0 + k4.angles) * (dt / 6.0),
            speeds: &x.speeds + (k1.speeds + k2.speeds * 2.0 + k3.speeds * 2.0 + k4.speeds) * (dt / 6.0),
        }
    }
}

/// δ̇ = ω, M_i ω̇_i = f_i − D_i ω_i.
pub fn rhs(state: &DynamicState, net: &ReducedNetwork, machines: &Machines) -> Result<DynamicState, DynamicsError> {
    Ok(SwingModel::new(net, machines)?.rhs(state))
}

/// One classical RK4 step of ẋ = g(x) on plain vectors.
pub fn rk4_step(x: &DVector<f64>, dt: f64, g: impl Fn(&DVector<f64>) -> DVector<f64>) -> DVector<f64> {
    let k1 = g(x);
    let k2 = g(&(x + &k1 * (dt / 2.0)));
    let k3 = g(&(x + &k2 * (dt / 2.0)));
    let k4 = g(&(x + &k3 * dt));
    x + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub dt: f64,
    pub topology: Topology,
    pub times: Vec<f64>,
    pub states: Vec<DynamicState>,
    /// Time at which a non-finite state appeared; the trajectory stops before it.
    pub blow_up: Option<f64>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn last(&self) -> &DynamicState {
        self.states.last().expect("trajectory holds the initial state")
    }
}

/// Fixed-step RK4 from `x0` over [0, T]; every step is sampled.
pub fn integrate(x0: &DynamicState, model: &SwingModel<'_>, horizon: f64, dt: f64) -> Result<Trajectory, DynamicsError> {
    integrate_while(x0, model, horizon, dt, |_, _| true)
}

/// As [`integrate`], stopping early once `keep_going` returns false (that sample is kept).
pub fn integrate_while(
    x0: &DynamicState,
    model: &SwingModel<'_>,
    horizon: f64,
    dt: f64,
    mut keep_going: impl FnMut(f64, &DynamicState) -> bool,
) -> Result<Trajectory, DynamicsError> {
    if !(dt > 0.0) || !(horizon >= dt) {
        return Err(DynamicsError::InvalidStep { dt, horizon });
    }
    if x0.len() != model.machines.len() {
        return Err(DynamicsError::Dimension {
            expected: model.machines.len(),
            got: x0.len(),
        });
    }
    let steps = (horizon / dt).round() as usize;
    let mut traj = Trajectory {
        dt,
        topology: model.net.topology,
        times: Vec::with_capacity(steps + 1),
        states: Vec::with_capacity(steps + 1),
        blow_up: None,
    };
    traj.times.push(0.0);
    traj.states.push(x0.clone());
    if !keep_going(0.0, x0) {
        return Ok(traj);
    }
    let mut x = x0.clone();
    for k in 1..=steps {
        let t = k as f64 * dt;
        x = model.step(&x, dt);
        if !x.is_finite() {
            traj.blow_up = Some(t);
            break;
        }
        traj.times.push(t);
        traj.states.push(x.clone());
        if !keep_going(t, &x) {
            break;
        }
    }
    Ok(traj)
}

/// Fault-on trajectory from `start` (normally the projected post-switching SEP at rest).
pub fn sustained_fault_trajectory(
    start: &DynamicState,
    faulted: &SwingModel<'_>,
    t_max: f64,
    dt: f64,
) -> Result<Trajectory, DynamicsError> {
    integrate(start, faulted, t_max, dt)
}

#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "kebab-case")]
pub enum TdsVerdict {
    Stable,
    Unstable { t_loss: f64 },
}

impl TdsVerdict {
    pub fn is_stable(&self) -> bool {
        matches!(self, TdsVerdict::Stable)
    }
}

/// Pole slip test: some pair of machines separates by more than 2π.
pub fn tds_verdict(traj: &Trajectory) -> TdsVerdict {
    let limit = 2.0 * std::f64::consts::PI;
    for (t, x) in traj.times.iter().zip(&traj.states) {
        if x.spread() > limit {
            return TdsVerdict::Unstable { t_loss: *t };
        }
    }
    match traj.blow_up {
        Some(t) => TdsVerdict::Unstable { t_loss: t },
        None => TdsVerdict::Stable,
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TdsOptions {
    pub dt: f64,
    pub horizon: f64,
    pub damping_ratio: f64,
}

impl Default for TdsOptions {
    fn default() -> Self {
        TdsOptions {
            dt: 0.005,
            horizon: 10.0,
            damping_ratio: 0.05,
        }
    }
}

/// Post-switching trajectory from the pre-switching operating point at rest.
pub fn simulate_switching(
    study: &Study,
    event: &SwitchingEvent,
    options: &TdsOptions,
) -> Result<(Trajectory, TdsVerdict), StudyError> {
    let post = study.post_switching(event)?;
    let machines = study.machines.with_damping_ratio(options.damping_ratio);
    let model = SwingModel::new(&post.reduced, &machines)?;
    let traj = integrate(&study.initial_state(), &model, options.horizon, options.dt)?;
    let verdict = tds_verdict(&traj);
    Ok((traj, verdict))
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dvector;
    use num_complex::Complex64;

    fn three_machine() -> (ReducedNetwork, Machines) {
        let c = |re, im| Complex64::new(re, im);
        let y = DMatrix::from_row_slice(3, 3, &[
            c(0.8, -6.0), c(-0.2, 3.0), c(-0.3, 2.5),
            c(-0.2, 3.0), c(0.6, -5.0), c(-0.1, 1.8),
            c(-0.3, 2.5), c(-0.1, 1.8), c(0.5, -4.5),
        ]);
        let net = ReducedNetwork::from_admittance(
            y,
            dvector![1.1, 1.05, 1.02],
            dvector![1.2, 0.9, 0.7],
            Topology::Base,
        );
        (net, Machines::new(vec![0.12, 0.05, 0.03]))
    }

    #[test]
    fn coi_examples() {
        let m = Machines::new(vec![1.0, 1.0]);
        let same = to_coi(&dvector![0.7, 0.7], &dvector![3.0, 3.0], &m);
        assert_eq!(same.angles, dvector![0.0, 0.0]);
        assert_eq!(same.speeds, dvector![0.0, 0.0]);
        let zero = to_coi(&dvector![0.2, -0.2], &dvector![0.0, 0.0], &m);
        assert_eq!(zero.angles, dvector![0.2, -0.2]);

        let m3 = Machines::new(vec![0.3, 1.7, 0.9]);
        let x = to_coi(&dvector![0.4, -1.3, 2.2], &dvector![0.1, 0.0, -0.5], &m3);
        assert!(x.angles.dot(&m3.inertia).abs() < 1e-12);
        assert!(x.speeds.dot(&m3.inertia).abs() < 1e-12);
        let (a, _) = from_coi(&x, 5.0, 0.0);
        let back = to_coi(&a, &dvector![0.0, 0.0, 0.0], &m3);
        assert!((back.angles - x.angles).norm() < 1e-12);
    }

    #[test]
    fn field_sums_to_zero_and_matches_p_coi() {
        let (net, m) = three_machine();
        let d = dvector![0.3, -0.4, 0.9];
        let f = vector_field(&d, &net, &m);
        assert!(f.sum().abs() < 1e-12);
        let pe: DVector<f64> = DVector::from_fn(3, |i, _| {
            (0..3).filter(|&j| j != i).map(|j| {
                let a = d[i] - d[j];
                net.c[(i, j)] * a.sin() + net.d[(i, j)] * a.cos()
            }).sum()
        });
        let pcoi = p_coi(&d, &net);
        for i in 0..3 {
            let expected = net.p[i] - pe[i] - m.inertia[i] / m.total() * pcoi;
            assert!((f[i] - expected).abs() < 1e-14);
        }
    }

    #[test]
    fn analytic_jacobian_matches_finite_differences() {
        let (net, m) = three_machine();
        let d = dvector![0.5, -0.1, -1.2];
        let j = vector_field_jacobian(&d, &net, &m);
        let h = 1e-6;
        for k in 0..3 {
            let mut up = d.clone();
            let mut dn = d.clone();
            up[k] += h;
            dn[k] -= h;
            let col = (vector_field(&up, &net, &m) - vector_field(&dn, &net, &m)) / (2.0 * h);
            for i in 0..3 {
                assert!((j[(i, k)] - col[i]).abs() < 1e-6, "entry ({i},{k})");
            }
        }
    }

    #[test]
    fn coi_momentum_balance() {
        let (net, m) = three_machine();
        let damped = m.with_damping_ratio(0.4);
        let x = DynamicState {
            angles: dvector![0.2, 0.1, -0.5],
            speeds: dvector![0.3, -0.2, 0.1],
        };
        let dx = rhs(&x, &net, &damped).unwrap();
        let lhs = dx.speeds.dot(&damped.inertia);
        let rhs_value = -damped.damping.dot(&x.speeds);
        assert!((lhs - rhs_value).abs() < 1e-12);
    }

    #[test]
    fn non_uniform_damping_rejected() {
        let (net, mut m) = three_machine();
        m.damping = dvector![0.1, 0.0, 0.0];
        assert!(matches!(SwingModel::new(&net, &m), Err(DynamicsError::NonUniformDamping { .. })));
    }

    #[test]
    fn isolated_machine_accelerates_uniformly() {
        // two machines with no coupling and equal inertia: P_COI splits the net power evenly
        let z = Complex64::new(0.0, 0.0);
        let y = DMatrix::from_element(2, 2, z);
        let net = ReducedNetwork::from_admittance(y, dvector![1.0, 1.0], dvector![0.8, -0.8], Topology::Base);
        let m = Machines::new(vec![0.1, 0.1]);
        let model = SwingModel::new(&net, &m).unwrap();
        let x0 = DynamicState::at_rest(dvector![0.3, -0.3]);
        let traj = integrate(&x0, &model, 1.0, 0.01).unwrap();
        for (t, x) in traj.times.iter().zip(&traj.states) {
            let expected = 0.3 + 0.5 * (0.8 / 0.1) * t * t;
            assert!((x.angles[0] - expected).abs() < 1e-6);
        }
    }

    #[test]
    fn tds_verdict_examples() {
        let flat = Trajectory {
            dt: 0.1,
            topology: Topology::Base,
            times: vec![0.0, 0.1, 0.2],
            states: vec![DynamicState::at_rest(dvector![0.1, -0.1]); 3],
            blow_up: None,
        };
        assert_eq!(tds_verdict(&flat), TdsVerdict::Stable);
        let times: Vec<f64> = (0..20).map(|k| k as f64 * 0.1).collect();
        let states = times
            .iter()
            .map(|t| DynamicState::at_rest(dvector![4.0 * t, -0.5 * t]))
            .collect();
        let ramp = Trajectory {
            dt: 0.1,
            topology: Topology::Base,
            times,
            states,
            blow_up: None,
        };
        // 4.5 t > 2π first at t = 1.4
        match tds_verdict(&ramp) {
            TdsVerdict::Unstable { t_loss } => assert!((t_loss - 1.4).abs() < 1e-12),
            v => panic!("expected unstable, got {v:?}"),
        }
    }

    #[test]
    fn invalid_window_rejected() {
        let (net, m) = three_machine();
        let model = SwingModel::new(&net, &m).unwrap();
        let x0 = DynamicState::at_rest(dvector![0.0, 0.0, 0.0]);
        assert!(integrate(&x0, &model, 0.001, 0.01).is_err());
        assert!(integrate(&x0, &model, 1.0, 0.0).is_err());
    }
}
