//! Case data, topology edits and admittance structures.
//!
//! A case is ingested from JSON, validated once, and then treated as an
//! immutable value: switching produces a new case, faulting produces a new
//! admittance matrix. The final product of this module is a
//! [`ReducedNetwork`], the admittance seen between generator internal nodes
//! once every network bus has been eliminated.

use std::collections::{BTreeSet, HashMap, VecDeque};
use std::fmt;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg;
use crate::powerflow::GeneratorInternalState;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NetworkError {
    #[error("malformed case file: {0}")]
    Schema(String),
    #[error("duplicate bus id {0}")]
    DuplicateBus(BusId),
    #[error("duplicate branch {0}")]
    DuplicateBranch(BranchRef),
    #[error("{element} references unknown bus {bus}")]
    UnknownBus { element: String, bus: BusId },
    #[error("case has {0} slack buses; exactly one is required")]
    SlackCount(usize),
    #[error("generator at bus {bus}: {reason}")]
    InvalidGenerator { bus: BusId, reason: String },
    #[error("invalid value for {element}: {reason}")]
    InvalidValue { element: String, reason: String },
    #[error("network is disconnected; buses not reachable from the slack: {}", join_ids(.0))]
    Disconnected(Vec<BusId>),
    #[error("switching {0} islands buses {buses}", buses = join_ids(.1))]
    Islanding(BranchRef, Vec<BusId>),
    #[error("branch {0} does not exist")]
    UnknownBranch(BranchRef),
    #[error("switching event {0} does not change the branch status")]
    NoOpEvent(BranchRef),
    #[error("branch {0} has zero series impedance")]
    ZeroImpedance(BranchRef),
    #[error("load model needs {expected} voltage magnitudes, got {got}")]
    VoltageCount { expected: usize, got: usize },
    #[error("fault at bus {0} grounds every generator")]
    FaultIsolatesGenerators(BusId),
    #[error("bus {0} is not part of the admittance matrix")]
    BusNotInMatrix(BusId),
    #[error("singular network block during reduction ({0})")]
    ReductionSingular(Topology),
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct BusId(pub u32);

impl fmt::Display for BusId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BusType {
    Slack,
    Pv,
    Pq,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Bus {
    pub id: BusId,
    #[serde(rename = "type")]
    pub kind: BusType,
    /// Voltage magnitude setpoint (slack/PV) or flat-start guess (PQ), pu.
    #[serde(default = "one")]
    pub v_setpoint: f64,
    /// Initial angle guess, degrees. The slack bus is always the 0 reference.
    #[serde(default)]
    pub angle_deg: f64,
    #[serde(default)]
    pub load_p_mw: f64,
    #[serde(default)]
    pub load_q_mvar: f64,
    /// Shunt conductance, pu on system base.
    #[serde(default)]
    pub shunt_g: f64,
    /// Shunt susceptance, pu on system base.
    #[serde(default)]
    pub shunt_b: f64,
}

impl Bus {
    pub fn has_load(&self) -> bool {
        self.load_p_mw != 0.0 || self.load_q_mvar != 0.0
    }
}

fn join_ids(ids: &[BusId]) -> String {
    ids.iter().map(|b| b.to_string()).collect::<Vec<_>>().join(", ")
}

fn one() -> f64 {
    1.0
}

fn first_circuit() -> u32 {
    1
}

#[derive(Copy, Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BranchStatus {
    Open,
    #[default]
    Closed,
}

/// Endpoint pair plus circuit number. Orientation does not matter for matching.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BranchRef {
    pub from: BusId,
    pub to: BusId,
    #[serde(default = "first_circuit")]
    pub circuit: u32,
}

impl BranchRef {
    pub fn new(from: u32, to: u32) -> Self {
        BranchRef {
            from: BusId(from),
            to: BusId(to),
            circuit: 1,
        }
    }

    pub fn matches(&self, branch: &Branch) -> bool {
        self.circuit == branch.circuit
            && ((self.from == branch.from && self.to == branch.to)
                || (self.from == branch.to && self.to == branch.from))
    }

    fn key(&self) -> (BusId, BusId, u32) {
        if self.from <= self.to {
            (self.from, self.to, self.circuit)
        } else {
            (self.to, self.from, self.circuit)
        }
    }
}

impl fmt::Display for BranchRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-{}", self.from, self.to)?;
        if self.circuit != 1 {
            write!(f, "#{}", self.circuit)?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Branch {
    pub from: BusId,
    pub to: BusId,
    #[serde(default = "first_circuit")]
    pub circuit: u32,
    pub r: f64,
    pub x: f64,
    /// Total line charging susceptance, pu.
    #[serde(default)]
    pub b: f64,
    #[serde(default)]
    pub status: BranchStatus,
}

impl Branch {
    pub fn reference(&self) -> BranchRef {
        BranchRef {
            from: self.from,
            to: self.to,
            circuit: self.circuit,
        }
    }

    pub fn is_closed(&self) -> bool {
        self.status == BranchStatus::Closed
    }

    pub fn series_admittance(&self) -> Result<Complex64, NetworkError> {
        let z = Complex64::new(self.r, self.x);
        if z.norm() == 0.0 {
            return Err(NetworkError::ZeroImpedance(self.reference()));
        }
        Ok(z.inv())
    }
}

/// Classical machine behind transient reactance.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Generator {
    pub bus: BusId,
    /// Scheduled active power, MW. Ignored at the slack bus.
    pub p_mw: f64,
    /// Inertia coefficient M, s²/rad on system base.
    pub inertia: f64,
    /// Damping coefficient D, pu.
    pub damping: f64,
    /// Direct-axis transient reactance X'd (X'q is taken equal), pu.
    pub xd_prime: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct GeneratorRecord {
    bus: BusId,
    #[serde(default)]
    p_mw: f64,
    /// Inertia coefficient M, s²/rad.
    m: Option<f64>,
    /// Inertia constant H, s, converted with M = 2H / (2πf).
    h: Option<f64>,
    #[serde(default)]
    damping: f64,
    xd_prime: f64,
}

#[derive(Deserialize)]
struct CaseRecord {
    #[serde(default)]
    name: String,
    base_mva: f64,
    frequency_hz: f64,
    buses: Vec<Bus>,
    branches: Vec<Branch>,
    generators: Vec<GeneratorRecord>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CaseData {
    pub name: String,
    pub base_mva: f64,
    pub frequency_hz: f64,
    pub buses: Vec<Bus>,
    pub branches: Vec<Branch>,
    pub generators: Vec<Generator>,
}

impl CaseData {
    /// Validates every case invariant and returns the case unchanged.
    pub fn validated(self) -> Result<Self, NetworkError> {
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<(), NetworkError> {
        if !(self.base_mva > 0.0) {
            return Err(invalid("base_mva", "must be positive"));
        }
        if !(self.frequency_hz > 0.0) {
            return Err(invalid("frequency_hz", "must be positive"));
        }
        let mut seen = BTreeSet::new();
        for bus in &self.buses {
            if !seen.insert(bus.id) {
                return Err(NetworkError::DuplicateBus(bus.id));
            }
            if !(bus.v_setpoint > 0.0) {
                return Err(invalid(&format!("bus {}", bus.id), "v_setpoint must be positive"));
            }
        }
        let slack = self.buses.iter().filter(|b| b.kind == BusType::Slack).count();
        if slack != 1 {
            return Err(NetworkError::SlackCount(slack));
        }
        let mut branch_keys = BTreeSet::new();
        for br in &self.branches {
            for end in [br.from, br.to] {
                if !seen.contains(&end) {
                    return Err(NetworkError::UnknownBus {
                        element: format!("branch {}", br.reference()),
                        bus: end,
                    });
                }
            }
            if br.from == br.to {
                return Err(invalid(&format!("branch {}", br.reference()), "both ends on one bus"));
            }
            if !branch_keys.insert(br.reference().key()) {
                return Err(NetworkError::DuplicateBranch(br.reference()));
            }
        }
        let mut gen_buses = BTreeSet::new();
        for g in &self.generators {
            let bus = self.bus(g.bus).ok_or_else(|| NetworkError::UnknownBus {
                element: "generator".into(),
                bus: g.bus,
            })?;
            let fail = |reason: &str| NetworkError::InvalidGenerator {
                bus: g.bus,
                reason: reason.into(),
            };
            if !gen_buses.insert(g.bus) {
                return Err(fail("more than one generator on the bus"));
            }
            if bus.kind == BusType::Pq {
                return Err(fail("generator on a PQ bus"));
            }
            if !(g.inertia > 0.0) {
                return Err(fail("inertia M must be positive"));
            }
            if !(g.xd_prime > 0.0) {
                return Err(fail("X'd must be positive"));
            }
            if g.damping < 0.0 {
                return Err(fail("damping must be non-negative"));
            }
        }
        for bus in &self.buses {
            if bus.kind != BusType::Pq && !gen_buses.contains(&bus.id) {
                return Err(invalid(
                    &format!("bus {}", bus.id),
                    "slack/PV bus without a generator",
                ));
            }
        }
        let unreachable = self.unreachable_buses();
        if !unreachable.is_empty() {
            return Err(NetworkError::Disconnected(unreachable));
        }
        Ok(())
    }

    pub fn bus(&self, id: BusId) -> Option<&Bus> {
        self.buses.iter().find(|b| b.id == id)
    }

    pub fn bus_index(&self) -> HashMap<BusId, usize> {
        self.buses.iter().enumerate().map(|(i, b)| (b.id, i)).collect()
    }

    pub fn slack_index(&self) -> usize {
        self.buses
            .iter()
            .position(|b| b.kind == BusType::Slack)
            .expect("validated case has a slack bus")
    }

    pub fn branch(&self, r: &BranchRef) -> Option<&Branch> {
        self.branches.iter().find(|b| r.matches(b))
    }

    pub fn closed_branch_count(&self) -> usize {
        self.branches.iter().filter(|b| b.is_closed()).count()
    }

    /// Sets the active load of every bus that carries a load to `p_mw`,
    /// keeping reactive demand unchanged.
    pub fn with_uniform_load_p(mut self, p_mw: f64) -> Self {
        for bus in self.buses.iter_mut().filter(|b| b.has_load()) {
            bus.load_p_mw = p_mw;
        }
        self
    }

    /// Buses not reachable from the slack through closed branches.
    fn unreachable_buses(&self) -> Vec<BusId> {
        let index = self.bus_index();
        let mut adjacency = vec![Vec::new(); self.buses.len()];
        for br in self.branches.iter().filter(|b| b.is_closed()) {
            let (i, j) = (index[&br.from], index[&br.to]);
            adjacency[i].push(j);
            adjacency[j].push(i);
        }
        let mut reached = vec![false; self.buses.len()];
        let start = self.slack_index();
        reached[start] = true;
        let mut queue = VecDeque::from([start]);
        while let Some(i) = queue.pop_front() {
            for &j in &adjacency[i] {
                if !reached[j] {
                    reached[j] = true;
                    queue.push_back(j);
                }
            }
        }
        self.buses
            .iter()
            .zip(reached)
            .filter(|(_, r)| !r)
            .map(|(b, _)| b.id)
            .collect()
    }
}

fn invalid(element: &str, reason: &str) -> NetworkError {
    NetworkError::InvalidValue {
        element: element.into(),
        reason: reason.into(),
    }
}

/// Parses and validates a JSON case file.
pub fn parse_case(text: &str) -> Result<CaseData, NetworkError> {
    let record: CaseRecord = serde_json::from_str(text).map_err(|e| NetworkError::Schema(e.to_string()))?;
    let omega_s = 2.0 * std::f64::consts::PI * record.frequency_hz;
    let generators = record
        .generators
        .into_iter()
        .map(|g| {
            let inertia = match (g.m, g.h) {
                (Some(m), None) => m,
                (None, Some(h)) => 2.0 * h / omega_s,
                _ => {
                    return Err(NetworkError::InvalidGenerator {
                        bus: g.bus,
                        reason: "exactly one of `m` and `h` must be given".into(),
                    })
                }
            };
            Ok(Generator {
                bus: g.bus,
                p_mw: g.p_mw,
                inertia,
                damping: g.damping,
                xd_prime: g.xd_prime,
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    CaseData {
        name: record.name,
        base_mva: record.base_mva,
        frequency_hz: record.frequency_hz,
        buses: record.buses,
        branches: record.branches,
        generators,
    }
    .validated()
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SwitchAction {
    Open,
    Close,
}

impl fmt::Display for SwitchAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SwitchAction::Open => "open",
            SwitchAction::Close => "close",
        })
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SwitchingEvent {
    #[serde(flatten)]
    pub branch: BranchRef,
    pub action: SwitchAction,
    /// Switching instant, s. Informational only.
    #[serde(default)]
    pub time_s: f64,
}

impl SwitchingEvent {
    pub fn open(from: u32, to: u32) -> Self {
        SwitchingEvent {
            branch: BranchRef::new(from, to),
            action: SwitchAction::Open,
            time_s: 0.0,
        }
    }

    pub fn close(from: u32, to: u32) -> Self {
        SwitchingEvent {
            action: SwitchAction::Close,
            ..Self::open(from, to)
        }
    }
}

impl fmt::Display for SwitchingEvent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}", self.action, self.branch)
    }
}

/// Parses a contingency list: a JSON array of `{from, to, circuit, action}`.
pub fn parse_contingencies(text: &str) -> Result<Vec<SwitchingEvent>, NetworkError> {
    serde_json::from_str(text).map_err(|e| NetworkError::Schema(e.to_string()))
}

/// Returns the case with the event's branch status flipped.
pub fn apply_switching(case: &CaseData, event: &SwitchingEvent) -> Result<CaseData, NetworkError> {
    let target = match event.action {
        SwitchAction::Open => BranchStatus::Open,
        SwitchAction::Close => BranchStatus::Closed,
    };
    let mut next = case.clone();
    let branch = next
        .branches
        .iter_mut()
        .find(|b| event.branch.matches(b))
        .ok_or(NetworkError::UnknownBranch(event.branch))?;
    if branch.status == target {
        return Err(NetworkError::NoOpEvent(event.branch));
    }
    branch.status = target;
    let islanded = next.unreachable_buses();
    if !islanded.is_empty() {
        return Err(NetworkError::Islanding(event.branch, islanded));
    }
    Ok(next)
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind", content = "bus")]
pub enum Topology {
    Base,
    PostSwitching,
    Faulted(BusId),
}

impl fmt::Display for Topology {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Topology::Base => f.write_str("base"),
            Topology::PostSwitching => f.write_str("post-switching"),
            Topology::Faulted(b) => write!(f, "faulted-at-bus-{b}"),
        }
    }
}

/// How loads enter the admittance matrix.
#[derive(Copy, Clone, Debug)]
pub enum LoadModel<'a> {
    /// Loads are left out (they are power injections in the power flow).
    Excluded,
    /// Each load becomes y = (P − jQ)/|V|² using these per-bus magnitudes,
    /// given in case bus order.
    AsShunts(&'a [f64]),
}

#[derive(Clone, Debug, PartialEq)]
pub struct AdmittanceMatrix {
    /// Bus ids labelling rows and columns.
    pub buses: Vec<BusId>,
    pub y: DMatrix<Complex64>,
    pub topology: Topology,
    /// Terminal buses of the case's generators, in generator order.
    pub generator_buses: Vec<BusId>,
}

impl AdmittanceMatrix {
    pub fn labeled(mut self, topology: Topology) -> Self {
        self.topology = topology;
        self
    }

    pub fn position(&self, bus: BusId) -> Option<usize> {
        self.buses.iter().position(|&b| b == bus)
    }

    pub fn max_asymmetry(&self) -> f64 {
        let n = self.y.nrows();
        let mut worst = 0.0_f64;
        for i in 0..n {
            for j in 0..n {
                worst = worst.max((self.y[(i, j)] - self.y[(j, i)]).norm());
            }
        }
        worst
    }
}

pub fn build_ybus(case: &CaseData, loads: LoadModel<'_>) -> Result<AdmittanceMatrix, NetworkError> {
    let n = case.buses.len();
    let index = case.bus_index();
    let base = case.base_mva;
    let mut y = DMatrix::from_element(n, n, Complex64::new(0.0, 0.0));
    for br in case.branches.iter().filter(|b| b.is_closed()) {
        let ys = br.series_admittance()?;
        let charging = Complex64::new(0.0, br.b / 2.0);
        let (i, j) = (index[&br.from], index[&br.to]);
        y[(i, i)] += ys + charging;
        y[(j, j)] += ys + charging;
        y[(i, j)] -= ys;
        y[(j, i)] -= ys;
    }
    for (i, bus) in case.buses.iter().enumerate() {
        y[(i, i)] += Complex64::new(bus.shunt_g, bus.shunt_b);
    }
    if let LoadModel::AsShunts(voltages) = loads {
        if voltages.len() != n {
            return Err(NetworkError::VoltageCount {
                expected: n,
                got: voltages.len(),
            });
        }
        for (i, bus) in case.buses.iter().enumerate() {
            if bus.has_load() {
                let s = Complex64::new(bus.load_p_mw, -bus.load_q_mvar) / base;
                y[(i, i)] += s / (voltages[i] * voltages[i]);
            }
        }
    }
    Ok(AdmittanceMatrix {
        buses: case.buses.iter().map(|b| b.id).collect(),
        y,
        topology: Topology::Base,
        generator_buses: case.generators.iter().map(|g| g.bus).collect(),
    })
}

/// Bolted three-phase fault: the bus is held at zero voltage, so its row and
/// column drop out with no fill-in.
pub fn apply_bus_fault(y: &AdmittanceMatrix, bus: BusId) -> Result<AdmittanceMatrix, NetworkError> {
    let k = y.position(bus).ok_or(NetworkError::BusNotInMatrix(bus))?;
    if !y.generator_buses.is_empty() && y.generator_buses.iter().all(|&g| g == bus) {
        return Err(NetworkError::FaultIsolatesGenerators(bus));
    }
    let y_faulted = y.y.clone().remove_row(k).remove_column(k);
    let mut buses = y.buses.clone();
    buses.remove(k);
    Ok(AdmittanceMatrix {
        buses,
        y: y_faulted,
        topology: Topology::Faulted(bus),
        generator_buses: y.generator_buses.clone(),
    })
}

/// Eliminates every node not listed in `keep`:
/// `Y_kk − Y_ke · Y_ee⁻¹ · Y_ek`, rows/columns of the result in `keep` order.
pub fn kron_eliminate(y: &DMatrix<Complex64>, keep: &[usize]) -> Option<DMatrix<Complex64>> {
    let n = y.nrows();
    let eliminate: Vec<usize> = (0..n).filter(|i| !keep.contains(i)).collect();
    let pick = |rows: &[usize], cols: &[usize]| {
        DMatrix::from_fn(rows.len(), cols.len(), |r, c| y[(rows[r], cols[c])])
    };
    let y_kk = pick(keep, keep);
    if eliminate.is_empty() {
        return Some(y_kk);
    }
    let y_ke = pick(keep, &eliminate);
    let y_ek = pick(&eliminate, keep);
    let y_ee = pick(&eliminate, &eliminate);
    let solved = linalg::solve_complex(y_ee, y_ek)?;
    Some(y_kk - y_ke * solved)
}

/// Network as seen between generator internal nodes, with the real
/// coefficients of the classical swing equations.
#[derive(Clone, Debug, PartialEq)]
pub struct ReducedNetwork {
    pub topology: Topology,
    pub y_red: DMatrix<Complex64>,
    /// Internal EMF magnitudes E'_q, pu.
    pub emf: DVector<f64>,
    /// Mechanical power, pu.
    pub p_mech: DVector<f64>,
    /// P_i = P_m,i − E_i² G_ii.
    pub p: DVector<f64>,
    /// C_ij = E_i E_j B_ij (zero diagonal).
    pub c: DMatrix<f64>,
    /// D_ij = E_i E_j G_ij (zero diagonal).
    pub d: DMatrix<f64>,
}

impl ReducedNetwork {
    pub fn from_admittance(
        y_red: DMatrix<Complex64>,
        emf: DVector<f64>,
        p_mech: DVector<f64>,
        topology: Topology,
    ) -> Self {
        let n = emf.len();
        assert_eq!(y_red.nrows(), n);
        assert_eq!(p_mech.len(), n);
        let p = DVector::from_fn(n, |i, _| p_mech[i] - emf[i] * emf[i] * y_red[(i, i)].re);
        let off_diag = |f: fn(Complex64) -> f64| {
            DMatrix::from_fn(n, n, |i, j| if i == j { 0.0 } else { emf[i] * emf[j] * f(y_red[(i, j)]) })
        };
        let c = off_diag(|z| z.im);
        let d = off_diag(|z| z.re);
        ReducedNetwork {
            topology,
            y_red,
            emf,
            p_mech,
            p,
            c,
            d,
        }
    }

    pub fn machine_count(&self) -> usize {
        self.emf.len()
    }

    /// Same susceptance structure with every conductance removed.
    pub fn lossless(&self) -> Self {
        let y = self.y_red.map(|z| Complex64::new(0.0, z.im));
        Self::from_admittance(y, self.emf.clone(), self.p_mech.clone(), self.topology)
    }

    pub fn is_lossless(&self) -> bool {
        self.d.iter().all(|&v| v == 0.0) && self.y_red.diagonal().iter().all(|z| z.re == 0.0)
    }

    /// Complex internal-node current injections for internal EMF phasors.
    pub fn currents(&self, emf_phasors: &DVector<Complex64>) -> DVector<Complex64> {
        &self.y_red * emf_phasors
    }
}

/// Appends generator internal nodes (through 1/(jX'd)) to `y` and eliminates
/// every network bus.
pub fn kron_reduce(
    y: &AdmittanceMatrix,
    case: &CaseData,
    internal: &GeneratorInternalState,
) -> Result<ReducedNetwork, NetworkError> {
    let ng = case.generators.len();
    let nb = y.buses.len();
    let mut full = DMatrix::from_element(ng + nb, ng + nb, Complex64::new(0.0, 0.0));
    full.view_mut((ng, ng), (nb, nb)).copy_from(&y.y);
    for (k, g) in case.generators.iter().enumerate() {
        let yg = Complex64::new(0.0, g.xd_prime).inv();
        full[(k, k)] += yg;
        // a faulted terminal bus is grounded: the internal node keeps only its shunt path
        if let Some(b) = y.position(g.bus) {
            full[(ng + b, ng + b)] += yg;
            full[(k, ng + b)] -= yg;
            full[(ng + b, k)] -= yg;
        }
    }
    let keep: Vec<usize> = (0..ng).collect();
    let y_red = kron_eliminate(&full, &keep).ok_or(NetworkError::ReductionSingular(y.topology))?;
    Ok(ReducedNetwork::from_admittance(
        y_red,
        DVector::from_column_slice(&internal.emf),
        DVector::from_column_slice(&internal.p_mech),
        y.topology,
    ))
}
