//! Controlling UEP by the BCU method with stability-boundary following.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::{coi_mean, rk4_step, vector_field, Machines};
use crate::energy::potential_energy;
use crate::equilibria::{
    angular_distance, is_on_boundary, solve_equilibrium, BoundaryOptions, BoundaryVerdict, EquilibriumOptions,
    EquilibriumPoint,
};
use crate::network::ReducedNetwork;

use super::pebs::first_peak;

#[derive(Debug, Error, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BcuFailure {
    #[error("no-mgp")]
    NoMgp,
    #[error("newton-diverged")]
    NewtonDiverged,
    #[error("converged-to-sep")]
    ConvergedToSep,
    #[error("stable-equilibrium")]
    StableEquilibrium,
    #[error("non-hyperbolic")]
    NonHyperbolic,
    #[error("not-on-boundary")]
    NotOnBoundary,
}

#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BcuOptions {
    pub dt: f64,
    pub t_max: f64,
    /// Integration steps between projections onto the PEBS.
    pub project_every: usize,
    /// Ray scan resolution and extent, as multiples of |x − sep|.
    pub ray_step: f64,
    pub ray_extent: f64,
    /// Minimum ∞-distance between a CUEP and the SEP.
    pub sep_distance: f64,
    /// ‖f‖ below which a point is already an equilibrium.
    pub zero_gradient: f64,
    /// ∞-norm motion between projections below which the trace has settled.
    pub settle: f64,
}

impl Default for BcuOptions {
    fn default() -> Self {
        BcuOptions {
            dt: 1e-3,
            t_max: 10.0,
            project_every: 5,
            ray_step: 0.01,
            ray_extent: 3.0,
            sep_distance: 1e-4,
            zero_gradient: 1e-8,
            settle: 1e-6,
        }
    }
}

/// Gradient-like system δ̇ = f(δ); shares its equilibria with the swing equations.
pub fn bcu_reduced_rhs(angles: &DVector<f64>, net: &ReducedNetwork, machines: &Machines) -> DVector<f64> {
    vector_field(angles, net, machines)
}

/// First potential-energy maximum along the ray sep + s (x − sep), s > 0.
pub fn project_to_pebs(
    x: &DVector<f64>,
    sep: &DVector<f64>,
    net: &ReducedNetwork,
    options: &BcuOptions,
) -> Option<DVector<f64>> {
    let dir = x - sep;
    if dir.amax() == 0.0 {
        return None;
    }
    let at = |s: f64| sep + &dir * s;
    let steps = (options.ray_extent / options.ray_step).round() as usize;
    let mut series = Vec::with_capacity(steps + 1);
    for k in 0..=steps {
        series.push(potential_energy(&at(k as f64 * options.ray_step), sep, net));
        if series.len() >= 3 {
            let tail = &series[series.len() - 3..];
            if let Some((_, offset)) = first_peak(tail) {
                return Some(at((k - 1) as f64 * options.ray_step + offset * options.ray_step));
            }
        }
    }
    None
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Mgp {
    pub angles: DVector<f64>,
    /// Time along the reduced trajectory, s.
    pub time: f64,
    pub gradient_norm: f64,
}

/// Minimum gradient point: the reduced trajectory from the exit point is
/// pulled back onto the PEBS every few steps and ‖f‖₂ is tracked over the
/// projected points; the first local minimum is returned, the starting
/// point included. A trace that settles on the boundary without a strict
/// minimum yields its limit point.
pub fn find_mgp(
    exit_angles: &DVector<f64>,
    sep: &DVector<f64>,
    net: &ReducedNetwork,
    machines: &Machines,
    options: &BcuOptions,
) -> Result<Mgp, BcuFailure> {
    let norm = |x: &DVector<f64>| bcu_reduced_rhs(x, net, machines).norm();
    let start = norm(exit_angles);
    if start < options.zero_gradient {
        return Ok(Mgp {
            angles: exit_angles.clone(),
            time: 0.0,
            gradient_norm: start,
        });
    }
    let mut x = project_to_pebs(exit_angles, sep, net, options).ok_or(BcuFailure::NoMgp)?;
    let mut points = vec![(0.0, norm(&x), x.clone())];
    let steps = (options.t_max / options.dt).round() as usize;
    for i in 1..=steps {
        x = rk4_step(&x, options.dt, |y| bcu_reduced_rhs(y, net, machines));
        // δ̇ = f preserves Σ δ, not Σ M δ; stay on the COI plane
        let shift = coi_mean(&x, machines);
        x.add_scalar_mut(-shift);
        if !x.iter().all(|v| v.is_finite()) {
            return Err(BcuFailure::NoMgp);
        }
        if i % options.project_every != 0 {
            continue;
        }
        x = project_to_pebs(&x, sep, net, options).ok_or(BcuFailure::NoMgp)?;
        let g = norm(&x);
        let settled = (&x - &points[points.len() - 1].2).amax() < options.settle;
        points.push((i as f64 * options.dt, g, x.clone()));
        if g < options.zero_gradient || settled {
            return Ok(Mgp {
                angles: x,
                time: i as f64 * options.dt,
                gradient_norm: g,
            });
        }
        let m = points.len();
        let descended = m == 2 || points[m - 2].1 < points[m - 3].1;
        if descended && points[m - 2].1 < points[m - 1].1 {
            let (time, gradient_norm, angles) = points.swap_remove(m - 2);
            return Ok(Mgp {
                angles,
                time,
                gradient_norm,
            });
        }
    }
    Err(BcuFailure::NoMgp)
}

/// Newton from the MGP; the result must be an unstable hyperbolic
/// equilibrium, away from the SEP, on the SEP's stability boundary.
pub fn refine_cuep(
    mgp: &Mgp,
    sep: &DVector<f64>,
    net: &ReducedNetwork,
    machines: &Machines,
    equilibrium: &EquilibriumOptions,
    boundary: &BoundaryOptions,
    options: &BcuOptions,
) -> Result<EquilibriumPoint, BcuFailure> {
    let mut ep = solve_equilibrium(&mgp.angles, net, machines, equilibrium).map_err(|_| BcuFailure::NewtonDiverged)?;
    if angular_distance(&ep.angles, sep) <= options.sep_distance {
        return Err(BcuFailure::ConvergedToSep);
    }
    if !ep.hyperbolic {
        return Err(BcuFailure::NonHyperbolic);
    }
    if ep.index == 0 {
        return Err(BcuFailure::StableEquilibrium);
    }
    match is_on_boundary(&ep.angles, sep, net, machines, boundary) {
        BoundaryVerdict::Yes { translations } if translations.iter().any(|k| k.iter().all(|&v| v == 0)) => {}
        _ => return Err(BcuFailure::NotOnBoundary),
    }
    ep.energy = Some(potential_energy(&ep.angles, sep, net));
    Ok(ep)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::equilibria::from_relative;
    use crate::network::Topology;
    use nalgebra::{dvector, DMatrix};
    use num_complex::Complex64;
    use std::f64::consts::PI;

    fn smib() -> (ReducedNetwork, Machines) {
        let j = |b: f64| Complex64::new(0.0, b);
        let y = DMatrix::from_row_slice(2, 2, &[j(-2.0), j(2.0), j(2.0), j(-2.0)]);
        let net = ReducedNetwork::from_admittance(y, dvector![1.0, 1.0], dvector![0.8, -0.8], Topology::PostSwitching);
        (net, Machines::new(vec![0.2, 0.6]))
    }

    #[test]
    fn reduced_rhs_sums_to_zero() {
        let (net, m) = smib();
        assert!(bcu_reduced_rhs(&dvector![0.4, -1.3], &net, &m).sum().abs() < 1e-10);
    }

    #[test]
    fn exit_at_uep_is_its_own_mgp() {
        let (net, m) = smib();
        let s = 0.4_f64.asin();
        let sep = from_relative(&dvector![s], &m);
        let uep = from_relative(&dvector![PI - s], &m);
        let mgp = find_mgp(&uep, &sep, &net, &m, &BcuOptions::default()).unwrap();
        assert!(mgp.gradient_norm < 1e-8);
        assert_eq!(mgp.time, 0.0);
        let ep = refine_cuep(
            &mgp,
            &sep,
            &net,
            &m,
            &EquilibriumOptions::default(),
            &BoundaryOptions::default(),
            &BcuOptions::default(),
        )
        .unwrap();
        assert!(ep.iterations <= 1);
        assert!((&ep.angles - &uep).amax() < 1e-12);
        assert_eq!(ep.index, 1);
    }

    #[test]
    fn newton_landing_on_sep_is_rejected() {
        let (net, m) = smib();
        let sep = from_relative(&dvector![0.4_f64.asin()], &m);
        let mgp = Mgp {
            angles: from_relative(&dvector![0.5], &m),
            time: 0.0,
            gradient_norm: 0.0,
        };
        let r = refine_cuep(
            &mgp,
            &sep,
            &net,
            &m,
            &EquilibriumOptions::default(),
            &BoundaryOptions::default(),
            &BcuOptions::default(),
        );
        assert_eq!(r.unwrap_err(), BcuFailure::ConvergedToSep);
    }

    #[test]
    fn projection_lands_on_potential_maximum() {
        let (net, m) = smib();
        let s = 0.4_f64.asin();
        let sep = from_relative(&dvector![s], &m);
        let x = from_relative(&dvector![1.5], &m);
        let p = project_to_pebs(&x, &sep, &net, &BcuOptions::default()).unwrap();
        let rel = p[0] - p[1];
        assert!((rel - (PI - s)).abs() < 1e-3, "{rel}");
        assert!(project_to_pebs(&sep, &sep, &net, &BcuOptions::default()).is_none());
    }

    #[test]
    fn failure_labels() {
        assert_eq!(BcuFailure::NotOnBoundary.to_string(), "not-on-boundary");
        assert_eq!(BcuFailure::NoMgp.to_string(), "no-mgp");
    }
}
