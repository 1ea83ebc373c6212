//! Shared fixtures and independent oracles for the integration tests and the
//! acceptance runner. Checks return measured quantities; callers decide.
#![allow(dead_code)]

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use switchstab::direct_method::{find_exit_point, find_mgp, refine_cuep, BcuOptions};
use switchstab::dynamics::{integrate, to_coi, vector_field, DynamicState, Machines, SwingModel};
use switchstab::energy::{potential_energy, total_energy};
use switchstab::equilibria::{
    from_relative, relative_angles, solve_equilibrium, BoundaryOptions, EquilibriumOptions,
};
use switchstab::network::{
    build_ybus, kron_reduce, parse_case, parse_contingencies, Branch, BranchStatus, Bus, BusId, BusType, CaseData,
    Generator, LoadModel, ReducedNetwork, SwitchingEvent, Topology,
};
use switchstab::powerflow::{GeneratorInternalState, PowerFlowOptions};
use switchstab::Study;

pub const WSCC_LOAD_MW: f64 = 279.5;

pub fn wscc_case() -> CaseData {
    parse_case(switchstab::WSCC9_CASE).unwrap().with_uniform_load_p(WSCC_LOAD_MW)
}

pub fn wscc_study() -> Study {
    Study::new(wscc_case(), &PowerFlowOptions::default()).unwrap()
}

pub fn wscc_events() -> Vec<SwitchingEvent> {
    parse_contingencies(switchstab::WSCC9_CONTINGENCIES).unwrap()
}

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// Random connected network: a ring plus chords, 2–3 generators on distinct
/// buses, random loads, voltages and internal EMFs.
pub struct RandomSystem {
    pub case: CaseData,
    pub vm: Vec<f64>,
    pub internal: GeneratorInternalState,
    pub emf_phasors: DVector<Complex64>,
}

pub fn random_system(seed: u64) -> RandomSystem {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let nb = rng.random_range(4..=8usize);
    let ng = rng.random_range(2..=3usize);
    let mut gen_buses: Vec<u32> = (1..=nb as u32).collect();
    for i in (1..gen_buses.len()).rev() {
        let j = rng.random_range(0..=i);
        gen_buses.swap(i, j);
    }
    gen_buses.truncate(ng);
    let buses = (1..=nb as u32)
        .map(|id| {
            let has_gen = gen_buses.contains(&id);
            Bus {
                id: BusId(id),
                kind: if id == gen_buses[0] {
                    BusType::Slack
                } else if has_gen {
                    BusType::Pv
                } else {
                    BusType::Pq
                },
                v_setpoint: 1.0,
                angle_deg: 0.0,
                load_p_mw: if has_gen { 0.0 } else { rng.random_range(0.0..120.0) },
                load_q_mvar: if has_gen { 0.0 } else { rng.random_range(-10.0..50.0) },
                shunt_g: 0.0,
                shunt_b: if rng.random_bool(0.3) { rng.random_range(0.0..0.2) } else { 0.0 },
            }
        })
        .collect();
    let mut branches = Vec::new();
    let line = |from: u32, to: u32, circuit: u32, rng: &mut ChaCha8Rng| Branch {
        from: BusId(from),
        to: BusId(to),
        circuit,
        r: rng.random_range(0.0..0.05),
        x: rng.random_range(0.05..0.3),
        b: rng.random_range(0.0..0.3),
        status: BranchStatus::Closed,
    };
    for k in 1..=nb as u32 {
        let next = k % nb as u32 + 1;
        branches.push(line(k, next, 1, &mut rng));
    }
    for _ in 0..rng.random_range(0..=3usize) {
        let a = rng.random_range(1..=nb as u32);
        let b = rng.random_range(1..=nb as u32);
        if a != b {
            branches.push(line(a, b, 2 + branches.len() as u32, &mut rng));
        }
    }
    let generators: Vec<Generator> = gen_buses
        .iter()
        .map(|&b| Generator {
            bus: BusId(b),
            p_mw: rng.random_range(20.0..150.0),
            inertia: rng.random_range(0.02..0.2),
            damping: 0.0,
            xd_prime: rng.random_range(0.05..0.3),
        })
        .collect();
    let vm = (0..nb).map(|_| rng.random_range(0.93..1.07)).collect();
    let emf: Vec<f64> = (0..ng).map(|_| rng.random_range(0.95..1.25)).collect();
    let delta: Vec<f64> = (0..ng).map(|_| rng.random_range(-PI..PI)).collect();
    let internal = GeneratorInternalState {
        emf: emf.clone(),
        delta: delta.clone(),
        p_mech: (0..ng).map(|_| rng.random_range(0.0..1.5)).collect(),
        i_d: vec![0.0; ng],
        i_q: vec![0.0; ng],
    };
    let emf_phasors = DVector::from_fn(ng, |k, _| Complex64::from_polar(emf[k], delta[k]));
    let case = CaseData {
        name: format!("random-{seed}"),
        base_mva: 100.0,
        frequency_hz: 60.0,
        buses,
        branches,
        generators,
    };
    RandomSystem {
        case,
        vm,
        internal,
        emf_phasors,
    }
}

/// Bus admittance matrix assembled entry by entry from the branch list.
pub fn independent_ybus(case: &CaseData, vm: &[f64]) -> DMatrix<Complex64> {
    let n = case.buses.len();
    let pos = |id: BusId| case.buses.iter().position(|b| b.id == id).unwrap();
    let mut y = DMatrix::from_element(n, n, c(0.0, 0.0));
    for br in case.branches.iter().filter(|b| b.status == BranchStatus::Closed) {
        let den = br.r * br.r + br.x * br.x;
        let ys = c(br.r / den, -br.x / den);
        let (i, j) = (pos(br.from), pos(br.to));
        y[(i, j)] -= ys;
        y[(j, i)] -= ys;
        y[(i, i)] += ys + c(0.0, 0.5 * br.b);
        y[(j, j)] += ys + c(0.0, 0.5 * br.b);
    }
    for (i, bus) in case.buses.iter().enumerate() {
        let load = c(bus.load_p_mw, -bus.load_q_mvar) / (case.base_mva * vm[i] * vm[i]);
        y[(i, i)] += c(bus.shunt_g, bus.shunt_b) + load;
    }
    y
}

/// Generator currents from a full network solve with every machine as a
/// Norton source E/(jX'd) at its terminal.
pub fn full_network_currents(case: &CaseData, y: &DMatrix<Complex64>, e: &DVector<Complex64>) -> DVector<Complex64> {
    let pos = |id: BusId| case.buses.iter().position(|b| b.id == id).unwrap();
    let mut ya = y.clone();
    let mut inj = DVector::from_element(y.nrows(), c(0.0, 0.0));
    for (k, g) in case.generators.iter().enumerate() {
        let yg = c(0.0, -1.0 / g.xd_prime);
        let b = pos(g.bus);
        ya[(b, b)] += yg;
        inj[b] += e[k] * yg;
    }
    let v = ya.lu().solve(&inj).expect("network solve");
    DVector::from_fn(case.generators.len(), |k, _| {
        let g = &case.generators[k];
        (e[k] - v[pos(g.bus)]) * c(0.0, -1.0 / g.xd_prime)
    })
}

/// Largest |I_reduced − I_full| over the generators of one random system.
pub fn kron_equivalence_error(seed: u64) -> f64 {
    let sys = random_system(seed);
    let ybus = build_ybus(&sys.case, LoadModel::AsShunts(&sys.vm)).unwrap();
    let reduced = kron_reduce(&ybus, &sys.case, &sys.internal).unwrap();
    let oracle = full_network_currents(&sys.case, &independent_ybus(&sys.case, &sys.vm), &sys.emf_phasors);
    (reduced.currents(&sys.emf_phasors) - oracle).iter().map(|z| z.norm()).fold(0.0, f64::max)
}

pub fn ybus_assembly_error(seed: u64) -> f64 {
    let sys = random_system(seed);
    let ybus = build_ybus(&sys.case, LoadModel::AsShunts(&sys.vm)).unwrap();
    (ybus.y - independent_ybus(&sys.case, &sys.vm)).iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Post-switching network of WSCC contingency `k` (1-based).
pub fn wscc_post(study: &Study, k: usize) -> ReducedNetwork {
    study.post_switching(&wscc_events()[k - 1]).unwrap().reduced
}

/// Random COI state with angles in [−π, π] and speeds in [−s, s].
pub fn random_state(rng: &mut ChaCha8Rng, machines: &Machines, speed: f64) -> DynamicState {
    let n = machines.len();
    let a = DVector::from_fn(n, |_, _| rng.random_range(-PI..PI));
    let w = DVector::from_fn(n, |_, _| if speed > 0.0 { rng.random_range(-speed..speed) } else { 0.0 });
    to_coi(&a, &w, machines)
}

/// Relative error between finite-difference directional derivatives of PE
/// and −f along a basis of the COI plane, on the lossless network.
pub fn gradient_check_error(net: &ReducedNetwork, machines: &Machines, angles: &DVector<f64>) -> f64 {
    let lossless = net.lossless();
    let n = angles.len();
    let sep = DVector::zeros(n);
    let f = vector_field(angles, &lossless, machines);
    let mt = machines.total();
    let h = 1e-5;
    let mut worst = 0.0_f64;
    let scale = f.norm().max(1e-3);
    for k in 0..n {
        let v = DVector::from_fn(n, |i, _| if i == k { 1.0 } else { 0.0 } - machines.inertia[k] / mt);
        let fd = (potential_energy(&(angles + &v * h), &sep, &lossless)
            - potential_energy(&(angles - &v * h), &sep, &lossless))
            / (2.0 * h);
        worst = worst.max((fd + f.dot(&v)).abs() / scale);
    }
    worst
}

/// Largest |V(t) − V(0)| over the trajectory.
pub fn energy_drift(net: &ReducedNetwork, machines: &Machines, x0: &DynamicState, horizon: f64, dt: f64) -> f64 {
    let model = SwingModel::new(net, machines).unwrap();
    let traj = integrate(x0, &model, horizon, dt).unwrap();
    let sep = DVector::zeros(x0.len());
    let v0 = total_energy(x0, &sep, net, machines).total;
    traj.states
        .iter()
        .map(|x| (total_energy(x, &sep, net, machines).total - v0).abs())
        .fold(0.0, f64::max)
}

/// Largest per-step increase of V, divided by dt.
pub fn energy_max_rise(net: &ReducedNetwork, machines: &Machines, x0: &DynamicState, horizon: f64, dt: f64) -> f64 {
    let model = SwingModel::new(net, machines).unwrap();
    let traj = integrate(x0, &model, horizon, dt).unwrap();
    let sep = DVector::zeros(x0.len());
    let v: Vec<f64> = traj.states.iter().map(|x| total_energy(x, &sep, net, machines).total).collect();
    v.windows(2).map(|w| (w[1] - w[0]) / dt).fold(f64::NEG_INFINITY, f64::max)
}

/// ‖x_h − x_{h/2}‖ / ‖x_{h/2} − x_{h/4}‖ at t = 1 s on WSCC contingency 4.
pub fn richardson_ratio() -> f64 {
    let study = wscc_study();
    let net = wscc_post(&study, 4);
    let machines = study.machines.with_damping_ratio(0.05);
    let model = SwingModel::new(&net, &machines).unwrap();
    let x0 = study.initial_state();
    let end = |dt: f64| {
        let x = integrate(&x0, &model, 1.0, dt).unwrap().last().clone();
        let mut v = x.angles.as_slice().to_vec();
        v.extend_from_slice(x.speeds.as_slice());
        DVector::from_vec(v)
    };
    let (a, b, c) = (end(0.04), end(0.02), end(0.01));
    (&a - &b).norm() / (&b - &c).norm()
}

/// Lossless two-machine system: f_1 = P − C sin δ_12.
pub fn smib(p: f64, cap: f64, topology: Topology) -> ReducedNetwork {
    let y = DMatrix::from_row_slice(2, 2, &[c(0.0, -cap), c(0.0, cap), c(0.0, cap), c(0.0, -cap)]);
    ReducedNetwork::from_admittance(y, DVector::from_vec(vec![1.0, 1.0]), DVector::from_vec(vec![p, -p]), topology)
}

pub fn smib_machines() -> Machines {
    Machines::new(vec![0.2, 0.6])
}

#[derive(Debug)]
pub struct SmibErrors {
    pub sep: f64,
    pub uep: f64,
    pub exit_pe: f64,
    pub exit_angle: f64,
    pub mgp: f64,
    pub cuep: f64,
}

impl SmibErrors {
    pub fn max(&self) -> f64 {
        [self.sep, self.uep, self.exit_pe, self.exit_angle, self.mgp, self.cuep]
            .into_iter()
            .fold(0.0, f64::max)
    }
}

/// Errors of every direct-method stage against the analytic SMIB values
/// δ^s = asin(P/C), δ^u = π − δ^s, PE(δ^u) = 2C cos δ^s − P(π − 2δ^s).
pub fn smib_oracle_errors(p: f64, cap: f64, fault_cap: f64) -> SmibErrors {
    let post = smib(p, cap, Topology::PostSwitching);
    let faulted = smib(p, fault_cap, Topology::Faulted(BusId(1)));
    let m = smib_machines();
    let eq = EquilibriumOptions::default();
    let s = (p / cap).asin();
    let rel = |x: &DVector<f64>| relative_angles(x)[0];
    let sep = solve_equilibrium(&from_relative(&DVector::from_vec(vec![0.1]), &m), &post, &m, &eq).unwrap();
    let uep = solve_equilibrium(&from_relative(&DVector::from_vec(vec![PI - 0.1]), &m), &post, &m, &eq).unwrap();
    let undamped = m.with_damping_ratio(0.0);
    let model = SwingModel::new(&faulted, &undamped).unwrap();
    let traj = integrate(&DynamicState::at_rest(sep.angles.clone()), &model, 3.0, 1e-3).unwrap();
    let exit = find_exit_point(&traj, &sep.angles, &post, &undamped, BusId(1)).unwrap();
    let pe_exact = 2.0 * cap * s.cos() - p * (PI - 2.0 * s);
    let bcu = BcuOptions::default();
    let mgp = find_mgp(&exit.state.angles, &sep.angles, &post, &m, &bcu).unwrap();
    let cuep = refine_cuep(&mgp, &sep.angles, &post, &m, &eq, &BoundaryOptions::default(), &bcu).unwrap();
    SmibErrors {
        sep: (rel(&sep.angles) - s).abs(),
        uep: (rel(&uep.angles) - (PI - s)).abs(),
        exit_pe: (potential_energy(&exit.state.angles, &sep.angles, &post) - pe_exact).abs(),
        exit_angle: (rel(&exit.state.angles) - (PI - s)).abs(),
        mgp: (rel(&mgp.angles) - (PI - s)).abs(),
        cuep: (rel(&cuep.angles) - (PI - s)).abs(),
    }
}

/// Fault-on trajectories of WSCC contingency 1, fault at bus 5, from the
/// post-switching SEP and from the post-switching initial point: largest
/// per-machine angle gap at t = 0 and up to the exit time of the first.
pub fn fault_start_gap() -> (f64, f64, f64) {
    let study = wscc_study();
    let post = study.post_switching(&wscc_events()[0]).unwrap();
    let sep = switchstab::equilibria::compute_post_switching_sep(&study, &post, &EquilibriumOptions::default()).unwrap();
    let faulted = study.faulted(&post, BusId(5)).unwrap();
    let undamped = study.machines.with_damping_ratio(0.0);
    let model = SwingModel::new(&faulted, &undamped).unwrap();
    let a = integrate(&sep.state(), &model, 3.0, 1e-3).unwrap();
    let b = integrate(&study.initial_state(), &model, 3.0, 1e-3).unwrap();
    let exit = find_exit_point(&a, &sep.angles, &post.reduced, &undamped, BusId(5)).unwrap();
    let gap = |k: usize| (&a.states[k].angles - &b.states[k].angles).amax();
    let worst = (0..=exit.sample.min(b.len() - 1)).map(gap).fold(0.0, f64::max);
    (gap(0), worst, exit.time)
}
