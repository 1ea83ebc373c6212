//! Equilibrium points of the post-switching system: Newton solves, type
//! classification, multi-start enumeration and stability-boundary tests.
//!
//! Angles live in the COI frame. Newton works on the first n−1 angles with
//! the last one fixed by Σ M_i δ_i = 0. Two equilibria are the same
//! physical point when their relative angles δ_i − δ_n agree modulo 2π.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::{integrate_while, vector_field, vector_field_jacobian, DynamicState, Machines, SwingModel};
use crate::energy::potential_energy;
use crate::linalg::{self, inf_norm, wrap_angle};
use crate::network::ReducedNetwork;
use crate::study::{PostSwitching, Study};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EquilibriumError {
    #[error("Newton did not converge in {iterations} iterations (residual {residual:.3e})")]
    NotConverged { iterations: usize, residual: f64 },
    #[error("singular Jacobian during Newton iteration {0}")]
    SingularJacobian(usize),
    #[error("non-finite Newton guess or iterate")]
    NonFinite,
    #[error("converged point violates the COI identity (Σ M δ = {0:.3e})")]
    CoiViolation(f64),
    #[error("equilibrium analysis needs at least 2 machines")]
    TooFewMachines,
    #[error("brute-force enumeration is limited to {limit} machines, case has {found}")]
    TooManyMachines { found: usize, limit: usize },
    #[error("no candidate is confirmed on the stability boundary")]
    EmptyBoundary,
}

/// Largest machine count for brute-force UEP enumeration.
pub const ENUMERATION_LIMIT: usize = 10;

#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumOptions {
    pub tolerance: f64,
    pub max_iterations: usize,
    pub max_halvings: usize,
    /// Uniform D/M used for the linearization that decides the type.
    pub classify_damping: f64,
}

impl Default for EquilibriumOptions {
    fn default() -> Self {
        EquilibriumOptions {
            tolerance: 1e-10,
            max_iterations: 50,
            max_halvings: 10,
            classify_damping: 0.05,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Classification {
    /// Number of eigenvalues with positive real part.
    pub index: usize,
    pub hyperbolic: bool,
    pub eigenvalues: Vec<Complex64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumPoint {
    /// COI angles; speeds are identically zero.
    pub angles: DVector<f64>,
    pub residual: f64,
    pub iterations: usize,
    pub index: usize,
    pub hyperbolic: bool,
    /// Potential energy relative to the designated SEP, once known.
    pub energy: Option<f64>,
}

impl EquilibriumPoint {
    pub fn state(&self) -> DynamicState {
        DynamicState::at_rest(self.angles.clone())
    }

    pub fn is_stable(&self) -> bool {
        self.index == 0 && self.hyperbolic
    }
}

/// Chart of the COI plane by its first n−1 angles.
struct CoiChart<'a> {
    machines: &'a Machines,
}

impl CoiChart<'_> {
    fn expand(&self, x: &DVector<f64>) -> DVector<f64> {
        let n = self.machines.len();
        let m = &self.machines.inertia;
        let mut d = DVector::zeros(n);
        let mut moment = 0.0;
        for i in 0..n - 1 {
            d[i] = x[i];
            moment += m[i] * x[i];
        }
        d[n - 1] = -moment / m[n - 1];
        d
    }

    fn project(&self, d: &DVector<f64>) -> DVector<f64> {
        let n = self.machines.len();
        let shift = d.dot(&self.machines.inertia) / self.machines.total();
        DVector::from_fn(n - 1, |i, _| d[i] - shift)
    }

    /// ∂δ/∂x, n × (n−1).
    fn tangent(&self) -> DMatrix<f64> {
        let n = self.machines.len();
        let m = &self.machines.inertia;
        DMatrix::from_fn(n, n - 1, |r, c| {
            if r == n - 1 {
                -m[c] / m[n - 1]
            } else if r == c {
                1.0
            } else {
                0.0
            }
        })
    }
}

/// Relative angles δ_i − δ_n, i < n.
pub fn relative_angles(angles: &DVector<f64>) -> DVector<f64> {
    let n = angles.len();
    DVector::from_fn(n - 1, |i, _| angles[i] - angles[n - 1])
}

/// COI angles with the given relative angles.
pub fn from_relative(rel: &DVector<f64>, machines: &Machines) -> DVector<f64> {
    let n = rel.len() + 1;
    let mut d = DVector::zeros(n);
    d.rows_mut(0, n - 1).copy_from(rel);
    let shift = d.dot(&machines.inertia) / machines.total();
    d.add_scalar(-shift)
}

/// ∞-distance between relative angles, modulo 2π.
pub fn angular_distance(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    let (ra, rb) = (relative_angles(a), relative_angles(b));
    ra.iter().zip(rb.iter()).fold(0.0, |m, (x, y)| m.max(wrap_angle(x - y).abs()))
}

/// Representative of `point` whose relative angles lie within (−π, π] of the reference's.
pub fn canonical(point: &DVector<f64>, reference: &DVector<f64>, machines: &Machines) -> DVector<f64> {
    let (rp, rr) = (relative_angles(point), relative_angles(reference));
    let rel = rr.zip_map(&rp, |r, p| r + wrap_angle(p - r));
    from_relative(&rel, machines)
}

/// Shifts relative angles by −2π·k.
pub fn translate(point: &DVector<f64>, k: &[i64], machines: &Machines) -> DVector<f64> {
    let rel = relative_angles(point);
    let shifted = DVector::from_fn(rel.len(), |i, _| rel[i] - 2.0 * PI * k[i] as f64);
    from_relative(&shifted, machines)
}

/// Linearization of the swing equations in (x, ẋ) with x the first n−1 COI angles.
pub fn linearization(angles: &DVector<f64>, net: &ReducedNetwork, machines: &Machines, damping: f64) -> DMatrix<f64> {
    let n = machines.len();
    let r = n - 1;
    let chart = CoiChart { machines };
    let jt = vector_field_jacobian(angles, net, machines) * chart.tangent();
    let mut a = DMatrix::zeros(2 * r, 2 * r);
    for i in 0..r {
        a[(i, r + i)] = 1.0;
        a[(r + i, r + i)] = -damping;
        for k in 0..r {
            a[(r + i, k)] = jt[(i, k)] / machines.inertia[i];
        }
    }
    a
}

pub fn classify_ep(angles: &DVector<f64>, net: &ReducedNetwork, machines: &Machines, damping: f64) -> Classification {
    let eigenvalues: Vec<Complex64> = linearization(angles, net, machines, damping)
        .complex_eigenvalues()
        .iter()
        .cloned()
        .collect();
    let index = eigenvalues.iter().filter(|z| z.re > 1e-9).count();
    let hyperbolic = eigenvalues.iter().all(|z| z.re.abs() > 1e-9);
    Classification {
        index,
        hyperbolic,
        eigenvalues,
    }
}

/// Unstable eigen-directions of the damped linearization, as full COI
/// (angle, speed) perturbations scaled to unit ∞-norm.
pub fn unstable_directions(
    angles: &DVector<f64>,
    net: &ReducedNetwork,
    machines: &Machines,
    damping: f64,
) -> Vec<DynamicState> {
    let a = linearization(angles, net, machines, damping);
    let r = machines.len() - 1;
    let tangent = CoiChart { machines }.tangent();
    let ac = a.map(|v| Complex64::new(v, 0.0));
    let mut out = Vec::new();
    for lambda in a.complex_eigenvalues().iter() {
        if lambda.re <= 1e-9 || lambda.im < 0.0 {
            continue;
        }
        let shifted = &ac - DMatrix::from_diagonal_element(2 * r, 2 * r, *lambda);
        let v = linalg::null_vector(&shifted);
        // rotate so the largest component is real, then keep the real part
        let big = v.iter().cloned().max_by(|x, y| x.norm().total_cmp(&y.norm())).unwrap_or(Complex64::new(1.0, 0.0));
        let phase = big.conj() / big.norm();
        let real = v.map(|z| (z * phase).re);
        let scale = inf_norm(&real);
        if scale == 0.0 {
            continue;
        }
        let real = real / scale;
        out.push(DynamicState {
            angles: &tangent * real.rows(0, r),
            speeds: &tangent * real.rows(r, r),
        });
    }
    out
}

/// Damped Newton on f(δ) = 0 in the COI plane; the result is classified.
pub fn solve_equilibrium(
    guess: &DVector<f64>,
    net: &ReducedNetwork,
    machines: &Machines,
    options: &EquilibriumOptions,
) -> Result<EquilibriumPoint, EquilibriumError> {
    let n = machines.len();
    if n < 2 {
        return Err(EquilibriumError::TooFewMachines);
    }
    if guess.iter().any(|v| !v.is_finite()) {
        return Err(EquilibriumError::NonFinite);
    }
    let chart = CoiChart { machines };
    let tangent = chart.tangent();
    let residual_at = |x: &DVector<f64>| {
        let f = vector_field(&chart.expand(x), net, machines);
        let r = inf_norm(&f);
        (f, r)
    };
    let newton_step = |x: &DVector<f64>, f: &DVector<f64>, it: usize| {
        let j = vector_field_jacobian(&chart.expand(x), net, machines) * &tangent;
        let jr = j.rows(0, n - 1).into_owned();
        let rhs = -f.rows(0, n - 1).into_owned();
        linalg::solve_real(jr, &rhs).ok_or(EquilibriumError::SingularJacobian(it))
    };

    let mut x = chart.project(guess);
    let (mut f, mut r) = residual_at(&x);
    let mut iterations = 0;
    while r >= options.tolerance {
        if iterations >= options.max_iterations {
            return Err(EquilibriumError::NotConverged { iterations, residual: r });
        }
        let dx = newton_step(&x, &f, iterations)?;
        let mut t = 1.0;
        let mut trial = &x + &dx;
        let (mut ft, mut rt) = residual_at(&trial);
        for _ in 0..options.max_halvings {
            if rt < r {
                break;
            }
            t /= 2.0;
            trial = &x + &dx * t;
            (ft, rt) = residual_at(&trial);
        }
        if !rt.is_finite() {
            return Err(EquilibriumError::NonFinite);
        }
        x = trial;
        f = ft;
        r = rt;
        iterations += 1;
    }
    // one extra full step to push the residual to rounding level
    if iterations > 0 {
        if let Ok(dx) = newton_step(&x, &f, iterations) {
            let trial = &x + &dx;
            let (ft, rt) = residual_at(&trial);
            if rt < r {
                x = trial;
                f = ft;
                r = rt;
            }
        }
    }
    let _ = f;
    let angles = chart.expand(&x);
    let moment = angles.dot(&machines.inertia);
    if moment.abs() > 1e-9 * machines.total().max(1.0) {
        return Err(EquilibriumError::CoiViolation(moment));
    }
    let class = classify_ep(&angles, net, machines, options.classify_damping);
    Ok(EquilibriumPoint {
        angles,
        residual: r,
        iterations,
        index: class.index,
        hyperbolic: class.hyperbolic,
        energy: None,
    })
}

#[derive(Debug, Error, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "reason", rename_all = "kebab-case")]
pub enum SepFailure {
    #[error("Newton from the post-switching initial point failed: {message}")]
    NewtonFailed { message: String },
    #[error("Newton converged to a type-{index} point")]
    NotStable { index: usize, hyperbolic: bool },
}

/// Newton from the post-switching initial point; success needs a type-0 hyperbolic point.
pub fn compute_post_switching_sep(
    study: &Study,
    post: &PostSwitching,
    options: &EquilibriumOptions,
) -> Result<EquilibriumPoint, SepFailure> {
    let init = study.initial_state();
    let mut ep = solve_equilibrium(&init.angles, &post.reduced, &study.machines, options)
        .map_err(|e| SepFailure::NewtonFailed { message: e.to_string() })?;
    if !ep.is_stable() {
        return Err(SepFailure::NotStable {
            index: ep.index,
            hyperbolic: ep.hyperbolic,
        });
    }
    ep.energy = Some(0.0);
    Ok(ep)
}

/// Multi-start Newton around `sep`: a lattice of relative-angle offsets in
/// {0, ±π/2, ±π} plus `budget` uniform offsets in [−π, π]. Results are
/// canonicalized near the SEP, deduplicated modulo 2π, and every type-0
/// point is dropped.
pub fn enumerate_ueps<R: Rng>(
    net: &ReducedNetwork,
    machines: &Machines,
    sep: &DVector<f64>,
    budget: usize,
    rng: &mut R,
    options: &EquilibriumOptions,
) -> Result<Vec<EquilibriumPoint>, EquilibriumError> {
    let n = machines.len();
    if n < 2 {
        return Err(EquilibriumError::TooFewMachines);
    }
    if n > ENUMERATION_LIMIT {
        return Err(EquilibriumError::TooManyMachines {
            found: n,
            limit: ENUMERATION_LIMIT,
        });
    }
    let r = n - 1;
    let levels = [0.0, PI / 2.0, -PI / 2.0, PI, -PI];
    let mut offsets = Vec::new();
    let mut digits = vec![0usize; r];
    loop {
        offsets.push(DVector::from_fn(r, |i, _| levels[digits[i]]));
        let mut pos = 0;
        while pos < r {
            digits[pos] += 1;
            if digits[pos] < levels.len() {
                break;
            }
            digits[pos] = 0;
            pos += 1;
        }
        if pos == r {
            break;
        }
    }
    for _ in 0..budget {
        offsets.push(DVector::from_fn(r, |_, _| rng.random_range(-PI..PI)));
    }
    let sep_rel = relative_angles(sep);
    let solved: Vec<Option<EquilibriumPoint>> = offsets
        .par_iter()
        .map(|off| {
            let guess = from_relative(&(&sep_rel + off), machines);
            solve_equilibrium(&guess, net, machines, options).ok()
        })
        .collect();

    let mut found: Vec<EquilibriumPoint> = Vec::new();
    for mut ep in solved.into_iter().flatten() {
        ep.angles = canonical(&ep.angles, sep, machines);
        if ep.index == 0 && ep.hyperbolic {
            continue;
        }
        if angular_distance(&ep.angles, sep) < 1e-6 {
            continue;
        }
        if found.iter().any(|other| angular_distance(&other.angles, &ep.angles) < 1e-6) {
            continue;
        }
        ep.energy = Some(potential_energy(&ep.angles, sep, net));
        found.push(ep);
    }
    Ok(found)
}

#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundaryOptions {
    /// Offset along each unstable eigenvector, rad.
    pub eps: f64,
    pub horizon: f64,
    /// Uniform D/M of the shooting system.
    pub damping: f64,
    pub dt: f64,
    /// Capture radius in relative angles and speeds.
    pub capture: f64,
}

impl Default for BoundaryOptions {
    fn default() -> Self {
        BoundaryOptions {
            eps: 1e-4,
            horizon: 30.0,
            damping: 1.0,
            dt: 0.01,
            capture: 1e-3,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "kebab-case")]
pub enum BoundaryVerdict {
    /// Some unstable-manifold branch reaches the SEP shifted by 2π·k in
    /// relative angles; the UEP translated by −2π·k is on the boundary.
    Yes { translations: Vec<Vec<i64>> },
    No,
    Inconclusive,
}

impl BoundaryVerdict {
    pub fn is_yes(&self) -> bool {
        matches!(self, BoundaryVerdict::Yes { .. })
    }
}

enum Shot {
    Captured(Vec<i64>),
    Elsewhere,
    Timeout,
}

/// Shoots along the unstable manifold of `uep` and checks where it lands.
pub fn is_on_boundary(
    uep: &DVector<f64>,
    sep: &DVector<f64>,
    net: &ReducedNetwork,
    machines: &Machines,
    options: &BoundaryOptions,
) -> BoundaryVerdict {
    let damped = machines.with_damping_ratio(options.damping);
    let model = match SwingModel::new(net, &damped) {
        Ok(m) => m,
        Err(_) => return BoundaryVerdict::Inconclusive,
    };
    let sep_rel = relative_angles(sep);
    let mut translations: Vec<Vec<i64>> = Vec::new();
    let mut timeout = false;
    for dir in unstable_directions(uep, net, machines, options.damping) {
        for sign in [1.0, -1.0] {
            let x0 = DynamicState {
                angles: uep + &dir.angles * (sign * options.eps),
                speeds: &dir.speeds * (sign * options.eps),
            };
            let mut shot = Shot::Timeout;
            let traj = integrate_while(&x0, &model, options.horizon, options.dt, |_, x| {
                if inf_norm(&x.speeds) >= options.capture {
                    return true;
                }
                let diff = relative_angles(&x.angles) - &sep_rel;
                let k: Vec<i64> = diff.iter().map(|d| (d / (2.0 * PI)).round() as i64).collect();
                let off = diff.iter().zip(&k).fold(0.0_f64, |m, (d, k)| m.max((d - 2.0 * PI * *k as f64).abs()));
                if off < options.capture {
                    shot = Shot::Captured(k);
                    return false;
                }
                true
            });
            match traj {
                Ok(t) if t.blow_up.is_some() => shot = Shot::Elsewhere,
                Ok(t) => {
                    if matches!(shot, Shot::Timeout) && inf_norm(&t.last().speeds) < options.capture {
                        shot = Shot::Elsewhere;
                    }
                }
                Err(_) => {}
            }
            match shot {
                Shot::Captured(k) => {
                    if !translations.contains(&k) {
                        translations.push(k);
                    }
                }
                Shot::Elsewhere => {}
                Shot::Timeout => timeout = true,
            }
        }
    }
    if !translations.is_empty() {
        BoundaryVerdict::Yes { translations }
    } else if timeout {
        BoundaryVerdict::Inconclusive
    } else {
        BoundaryVerdict::No
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UepRecord {
    pub point: EquilibriumPoint,
    pub boundary: BoundaryVerdict,
}

/// Certified boundary UEP of least energy; ties go to the one nearer the SEP.
pub fn closest_uep<'a>(candidates: &'a [UepRecord], sep: &DVector<f64>) -> Result<&'a UepRecord, EquilibriumError> {
    let mut best: Option<&UepRecord> = None;
    for c in candidates.iter().filter(|c| c.boundary.is_yes()) {
        let e = c.point.energy.unwrap_or(f64::INFINITY);
        best = match best {
            None => Some(c),
            Some(b) => {
                let eb = b.point.energy.unwrap_or(f64::INFINITY);
                let closer = (&c.point.angles - sep).amax() < (&b.point.angles - sep).amax();
                if e < eb - 1e-9 || ((e - eb).abs() <= 1e-9 && closer) {
                    Some(c)
                } else {
                    Some(b)
                }
            }
        };
    }
    best.ok_or(EquilibriumError::EmptyBoundary)
}

#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClosestUepOptions {
    pub budget: usize,
    pub boundary: BoundaryOptions,
}

impl Default for ClosestUepOptions {
    fn default() -> Self {
        ClosestUepOptions {
            budget: 100,
            boundary: BoundaryOptions::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UepInventory {
    /// Every enumerated UEP with its own boundary verdict.
    pub candidates: Vec<UepRecord>,
    /// Certified boundary points, including 2π translates of candidates.
    pub boundary: Vec<UepRecord>,
}

impl UepInventory {
    pub fn closest(&self, sep: &DVector<f64>) -> Option<&EquilibriumPoint> {
        closest_uep(&self.boundary, sep).ok().map(|r| &r.point)
    }
}

/// Enumerates, classifies and boundary-tests the UEPs of `net` around `sep`.
pub fn uep_inventory<R: Rng>(
    net: &ReducedNetwork,
    machines: &Machines,
    sep: &DVector<f64>,
    rng: &mut R,
    eq: &EquilibriumOptions,
    options: &ClosestUepOptions,
) -> Result<UepInventory, EquilibriumError> {
    let ueps = enumerate_ueps(net, machines, sep, options.budget, rng, eq)?;
    let candidates: Vec<UepRecord> = ueps
        .into_par_iter()
        .map(|point| {
            let boundary = if point.index >= 1 && point.hyperbolic {
                is_on_boundary(&point.angles, sep, net, machines, &options.boundary)
            } else {
                BoundaryVerdict::No
            };
            UepRecord { point, boundary }
        })
        .collect();
    let mut boundary = Vec::new();
    for c in &candidates {
        if let BoundaryVerdict::Yes { translations } = &c.boundary {
            for k in translations {
                let mut point = c.point.clone();
                point.angles = translate(&c.point.angles, k, machines);
                point.energy = Some(potential_energy(&point.angles, sep, net));
                boundary.push(UepRecord {
                    point,
                    boundary: BoundaryVerdict::Yes {
                        translations: vec![vec![0; k.len()]],
                    },
                });
            }
        }
    }
    Ok(UepInventory { candidates, boundary })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::Topology;
    use nalgebra::dvector;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// Lossless two-machine system with P_2 = −P_1: f_1 = P − C sin δ_12.
    fn smib(p: f64, c: f64) -> (ReducedNetwork, Machines) {
        let b = c;
        let y = DMatrix::from_row_slice(2, 2, &[
            Complex64::new(0.0, -b), Complex64::new(0.0, b),
            Complex64::new(0.0, b), Complex64::new(0.0, -b),
        ]);
        let net = ReducedNetwork::from_admittance(y, dvector![1.0, 1.0], dvector![p, -p], Topology::PostSwitching);
        (net, Machines::new(vec![0.2, 0.6]))
    }

    fn at_separation(delta12: f64, m: &Machines) -> DVector<f64> {
        from_relative(&dvector![delta12], m)
    }

    #[test]
    fn smib_roots_are_analytic() {
        let (net, m) = smib(0.8, 2.0);
        let opts = EquilibriumOptions::default();
        let s = (0.8_f64 / 2.0).asin();
        let sep = solve_equilibrium(&at_separation(0.2, &m), &net, &m, &opts).unwrap();
        let uep = solve_equilibrium(&at_separation(2.5, &m), &net, &m, &opts).unwrap();
        assert!((relative_angles(&sep.angles)[0] - s).abs() < 1e-10);
        assert!((relative_angles(&uep.angles)[0] - (PI - s)).abs() < 1e-10);
        assert_eq!(sep.index, 0);
        assert_eq!(uep.index, 1);
        assert!(sep.hyperbolic && uep.hyperbolic);
        assert!(sep.residual < 1e-8 && uep.residual < 1e-8);
    }

    #[test]
    fn known_root_needs_no_iterations() {
        let (net, m) = smib(0.8, 2.0);
        let opts = EquilibriumOptions::default();
        let sep = solve_equilibrium(&at_separation(0.3, &m), &net, &m, &opts).unwrap();
        let again = solve_equilibrium(&sep.angles, &net, &m, &opts).unwrap();
        assert!(again.iterations <= 1);
    }

    #[test]
    fn single_machine_rejected() {
        let net = ReducedNetwork::from_admittance(
            DMatrix::from_element(1, 1, Complex64::new(0.0, -1.0)),
            dvector![1.0],
            dvector![0.0],
            Topology::Base,
        );
        let m = Machines::new(vec![0.1]);
        assert_eq!(
            solve_equilibrium(&dvector![0.0], &net, &m, &EquilibriumOptions::default()),
            Err(EquilibriumError::TooFewMachines)
        );
    }

    #[test]
    fn smib_enumeration_finds_the_saddle() {
        let (net, m) = smib(0.8, 2.0);
        let opts = EquilibriumOptions::default();
        let sep = solve_equilibrium(&at_separation(0.3, &m), &net, &m, &opts).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let ueps = enumerate_ueps(&net, &m, &sep.angles, 20, &mut rng, &opts).unwrap();
        assert_eq!(ueps.len(), 1);
        let s = (0.4_f64).asin();
        let rel = relative_angles(&ueps[0].angles)[0];
        assert!((wrap_angle(rel - (PI - s))).abs() < 1e-8);
        assert_eq!(ueps[0].index, 1);
    }

    #[test]
    fn smib_saddle_is_on_boundary() {
        let (net, m) = smib(0.8, 2.0);
        let s = (0.4_f64).asin();
        let sep = at_separation(s, &m);
        let uep = at_separation(PI - s, &m);
        match is_on_boundary(&uep, &sep, &net, &m, &BoundaryOptions::default()) {
            BoundaryVerdict::Yes { translations } => assert!(translations.contains(&vec![0])),
            v => panic!("expected a boundary point, got {v:?}"),
        }
        let half = BoundaryOptions {
            eps: 0.5e-4,
            ..BoundaryOptions::default()
        };
        assert!(is_on_boundary(&uep, &sep, &net, &m, &half).is_yes());
    }

    #[test]
    fn saddle_of_another_well_is_not_on_boundary() {
        // the P = 0 system has wells at 0 mod 2π; its saddle at π is tested
        // against the well of the shifted P = 0.8 system instead
        let (net, m) = smib(0.0, 2.0);
        let uep = at_separation(PI, &m);
        let not_sep = at_separation((0.4_f64).asin(), &m);
        let opts = BoundaryOptions::default();
        assert_eq!(is_on_boundary(&uep, &not_sep, &net, &m, &opts), BoundaryVerdict::No);
    }

    #[test]
    fn closest_uep_selection() {
        let mk = |e: f64, a: f64, yes: bool| UepRecord {
            point: EquilibriumPoint {
                angles: dvector![a, -a],
                residual: 0.0,
                iterations: 0,
                index: 1,
                hyperbolic: true,
                energy: Some(e),
            },
            boundary: if yes {
                BoundaryVerdict::Yes { translations: vec![vec![0]] }
            } else {
                BoundaryVerdict::No
            },
        };
        let sep = dvector![0.0, 0.0];
        let single = vec![mk(1.0, 1.0, true)];
        assert_eq!(closest_uep(&single, &sep).unwrap(), &single[0]);
        let list = vec![mk(0.5, 1.0, false), mk(2.0, 1.0, true), mk(1.0, 2.0, true), mk(1.0 + 1e-12, 1.5, true)];
        assert_eq!(closest_uep(&list, &sep).unwrap(), &list[3]);
        assert_eq!(closest_uep(&list[..1], &sep), Err(EquilibriumError::EmptyBoundary));
    }

    #[test]
    fn translate_and_canonical_round_trip() {
        let m = Machines::new(vec![0.1, 0.2, 0.3]);
        let p = from_relative(&dvector![0.4, -2.9], &m);
        let q = translate(&p, &[1, -1], &m);
        assert!(angular_distance(&p, &q) < 1e-12);
        let c = canonical(&q, &from_relative(&dvector![0.0, 0.0], &m), &m);
        assert!((c - &p).amax() < 1e-12);
    }

    #[test]
    fn unstable_direction_is_an_eigenvector() {
        let (net, m) = smib(0.8, 2.0);
        let s = (0.4_f64).asin();
        let uep = at_separation(PI - s, &m);
        let dirs = unstable_directions(&uep, &net, &m, 0.0);
        assert_eq!(dirs.len(), 1);
        // λ² = C cos(δ_12^u)·(1/M_1 + 1/M_2) · (−1) for the relative coordinate
        let lambda2 = -2.0 * (PI - s).cos() * (1.0 / 0.2 + 1.0 / 0.6);
        let d = &dirs[0];
        let ratio = relative_angles(&d.speeds)[0] / relative_angles(&d.angles)[0];
        assert!((ratio - lambda2.sqrt()).abs() < 1e-8);
        assert!(d.angles.dot(&m.inertia).abs() < 1e-12);
    }
}
