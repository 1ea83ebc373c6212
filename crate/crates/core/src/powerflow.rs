//! Newton–Raphson power flow and classical generator initialization.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg;
use crate::network::{build_ybus, BusType, CaseData, LoadModel, NetworkError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PowerFlowError {
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error("power flow did not converge in {iterations} iterations (mismatch {mismatch:.3e} pu)")]
    NotConverged { iterations: usize, mismatch: f64 },
    #[error("power flow diverged after {iterations} iterations (mismatch {mismatch:.3e} pu)")]
    Diverged { iterations: usize, mismatch: f64 },
    #[error("singular power-flow Jacobian at iteration {0}")]
    SingularJacobian(usize),
    #[error("generator at bus {0} has zero terminal voltage")]
    ZeroTerminalVoltage(u32),
}

#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PowerFlowOptions {
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for PowerFlowOptions {
    fn default() -> Self {
        PowerFlowOptions {
            tolerance: 1e-8,
            max_iterations: 30,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PowerFlowSolution {
    /// Per-bus magnitude, case bus order, pu.
    pub vm: Vec<f64>,
    /// Per-bus angle, rad; the slack is 0.
    pub va: Vec<f64>,
    /// Per-generator active output, pu.
    pub p_gen: Vec<f64>,
    /// Per-generator reactive output, pu.
    pub q_gen: Vec<f64>,
    pub iterations: usize,
    pub mismatch: f64,
}

impl PowerFlowSolution {
    pub fn phasors(&self) -> DVector<Complex64> {
        DVector::from_iterator(
            self.vm.len(),
            self.vm.iter().zip(&self.va).map(|(&v, &a)| Complex64::from_polar(v, a)),
        )
    }
}

/// Net complex injections S = V ∘ conj(Y V).
pub fn injections(y: &DMatrix<Complex64>, v: &DVector<Complex64>) -> DVector<Complex64> {
    let current = y * v;
    v.zip_map(&current, |vi, ii| vi * ii.conj())
}

/// Scheduled net injections (generation minus load), pu. Slack entries are unused.
fn scheduled(case: &CaseData) -> (Vec<f64>, Vec<f64>) {
    let index = case.bus_index();
    let mut p = vec![0.0; case.buses.len()];
    let mut q = vec![0.0; case.buses.len()];
    for (i, bus) in case.buses.iter().enumerate() {
        p[i] -= bus.load_p_mw / case.base_mva;
        q[i] -= bus.load_q_mvar / case.base_mva;
    }
    for g in &case.generators {
        p[index[&g.bus]] += g.p_mw / case.base_mva;
    }
    (p, q)
}

pub fn solve_power_flow(case: &CaseData, options: &PowerFlowOptions) -> Result<PowerFlowSolution, PowerFlowError> {
    let y = build_ybus(case, LoadModel::Excluded)?.y;
    let n = case.buses.len();
    let (p_spec, q_spec) = scheduled(case);
    let pvpq: Vec<usize> = (0..n).filter(|&i| case.buses[i].kind != BusType::Slack).collect();
    let pq: Vec<usize> = (0..n).filter(|&i| case.buses[i].kind == BusType::Pq).collect();
    let mut vm: Vec<f64> = case.buses.iter().map(|b| b.v_setpoint).collect();
    let mut va: Vec<f64> = case
        .buses
        .iter()
        .map(|b| if b.kind == BusType::Slack { 0.0 } else { b.angle_deg.to_radians() })
        .collect();

    let mismatch_of = |vm: &[f64], va: &[f64]| {
        let v = DVector::from_iterator(n, vm.iter().zip(va).map(|(&m, &a)| Complex64::from_polar(m, a)));
        let s = injections(&y, &v);
        let mut f = DVector::zeros(pvpq.len() + pq.len());
        for (r, &i) in pvpq.iter().enumerate() {
            f[r] = s[i].re - p_spec[i];
        }
        for (r, &i) in pq.iter().enumerate() {
            f[pvpq.len() + r] = s[i].im - q_spec[i];
        }
        (v, f)
    };

    let (mut v, mut f) = mismatch_of(&vm, &va);
    let mut norm = linalg::inf_norm(&f);
    let mut iterations = 0;
    while norm >= options.tolerance {
        if iterations >= options.max_iterations {
            return Err(PowerFlowError::NotConverged {
                iterations,
                mismatch: norm,
            });
        }
        if !norm.is_finite() || norm > 1e6 {
            return Err(PowerFlowError::Diverged {
                iterations,
                mismatch: norm,
            });
        }
        let jac = jacobian(&y, &v, &pvpq, &pq);
        let dx = linalg::solve_real(jac, &(-&f)).ok_or(PowerFlowError::SingularJacobian(iterations))?;
        for (r, &i) in pvpq.iter().enumerate() {
            va[i] += dx[r];
        }
        for (r, &i) in pq.iter().enumerate() {
            vm[i] += dx[pvpq.len() + r];
        }
        iterations += 1;
        (v, f) = mismatch_of(&vm, &va);
        norm = linalg::inf_norm(&f);
    }

    let s = injections(&y, &v);
    let index = case.bus_index();
    let (mut p_gen, mut q_gen) = (Vec::new(), Vec::new());
    for g in &case.generators {
        let i = index[&g.bus];
        let bus = &case.buses[i];
        p_gen.push(s[i].re + bus.load_p_mw / case.base_mva);
        q_gen.push(s[i].im + bus.load_q_mvar / case.base_mva);
    }
    Ok(PowerFlowSolution {
        vm,
        va,
        p_gen,
        q_gen,
        iterations,
        mismatch: norm,
    })
}

/// Polar Jacobian of [P(pvpq); Q(pq)] with respect to [θ(pvpq); |V|(pq)].
fn jacobian(y: &DMatrix<Complex64>, v: &DVector<Complex64>, pvpq: &[usize], pq: &[usize]) -> DMatrix<f64> {
    let n = v.len();
    let current = y * v;
    let unit = v.map(|z| z / z.norm());
    let j = Complex64::i();
    // dS/dθ and dS/d|V| in full bus coordinates
    let ds_dva = DMatrix::from_fn(n, n, |r, c| {
        let diag = if r == c { current[r].conj() } else { Complex64::new(0.0, 0.0) };
        j * v[r] * (diag - (y[(r, c)] * v[c]).conj())
    });
    let ds_dvm = DMatrix::from_fn(n, n, |r, c| {
        let diag = if r == c { current[r].conj() * unit[r] } else { Complex64::new(0.0, 0.0) };
        v[r] * (y[(r, c)] * unit[c]).conj() + diag
    });
    let (a, b) = (pvpq.len(), pq.len());
    DMatrix::from_fn(a + b, a + b, |r, c| {
        let (row, real) = if r < a { (pvpq[r], true) } else { (pq[r - a], false) };
        let entry = if c < a { ds_dva[(row, pvpq[c])] } else { ds_dvm[(row, pq[c - a])] };
        if real {
            entry.re
        } else {
            entry.im
        }
    })
}

/// Classical-machine internal quantities for every generator, in case order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeneratorInternalState {
    /// |E'| behind X'd, pu.
    pub emf: Vec<f64>,
    /// Internal angle δ, rad, same reference as the power flow.
    pub delta: Vec<f64>,
    /// Mechanical power, equal to the initial electrical output, pu.
    pub p_mech: Vec<f64>,
    pub i_d: Vec<f64>,
    pub i_q: Vec<f64>,
}

pub fn init_classical_generators(
    case: &CaseData,
    pf: &PowerFlowSolution,
) -> Result<GeneratorInternalState, PowerFlowError> {
    let index = case.bus_index();
    let mut state = GeneratorInternalState {
        emf: Vec::new(),
        delta: Vec::new(),
        p_mech: Vec::new(),
        i_d: Vec::new(),
        i_q: Vec::new(),
    };
    for (k, g) in case.generators.iter().enumerate() {
        let i = index[&g.bus];
        if pf.vm[i] == 0.0 {
            return Err(PowerFlowError::ZeroTerminalVoltage(g.bus.0));
        }
        let v = Complex64::from_polar(pf.vm[i], pf.va[i]);
        let s = Complex64::new(pf.p_gen[k], pf.q_gen[k]);
        let current = (s / v).conj();
        let e = v + Complex64::new(0.0, g.xd_prime) * current;
        let delta = e.arg();
        // machine frame: d axis lags q axis (aligned with E') by 90°
        let dq = current * Complex64::from_polar(1.0, std::f64::consts::FRAC_PI_2 - delta);
        state.emf.push(e.norm());
        state.delta.push(delta);
        state.p_mech.push((e * current.conj()).re);
        state.i_d.push(dq.re);
        state.i_q.push(dq.im);
    }
    Ok(state)
}
