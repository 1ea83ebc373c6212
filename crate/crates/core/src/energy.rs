//! Transient energy function of the reduced post-switching system.
//!
//! Path-dependent transfer-conductance integrals are evaluated along the
//! straight line from the SEP, which gives them a closed form.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::dynamics::{DynamicState, Machines, Trajectory};
use crate::network::ReducedNetwork;

/// Below this |δ_ij − δ_ij^s| the ray term switches to its limit.
const RAY_LIMIT: f64 = 1e-7;

#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnergyValue {
    pub kinetic: f64,
    pub potential: f64,
    pub total: f64,
}

impl EnergyValue {
    pub fn new(kinetic: f64, potential: f64) -> Self {
        EnergyValue {
            kinetic,
            potential,
            total: kinetic + potential,
        }
    }
}

pub fn kinetic_energy(speeds: &DVector<f64>, machines: &Machines) -> f64 {
    0.5 * speeds.iter().zip(machines.inertia.iter()).map(|(w, m)| m * w * w).sum::<f64>()
}

/// Straight-line integral of the D_ij cos δ_ij term from the SEP.
pub fn ray_term(d_i: f64, d_j: f64, s_i: f64, s_j: f64) -> f64 {
    let (a, a0) = (d_i - d_j, s_i - s_j);
    let sum = d_i + d_j - s_i - s_j;
    let delta = a - a0;
    if delta.abs() < RAY_LIMIT {
        a0.cos() * sum
    } else {
        (a.sin() - a0.sin()) * sum / delta
    }
}

pub fn potential_energy(angles: &DVector<f64>, sep: &DVector<f64>, net: &ReducedNetwork) -> f64 {
    let n = angles.len();
    let mut v = 0.0;
    for i in 0..n {
        v -= net.p[i] * (angles[i] - sep[i]);
    }
    for i in 0..n {
        for j in i + 1..n {
            let c = net.c[(i, j)];
            if c != 0.0 {
                v -= c * ((angles[i] - angles[j]).cos() - (sep[i] - sep[j]).cos());
            }
            let d = net.d[(i, j)];
            if d != 0.0 {
                v += d * ray_term(angles[i], angles[j], sep[i], sep[j]);
            }
        }
    }
    v
}

pub fn total_energy(state: &DynamicState, sep: &DVector<f64>, net: &ReducedNetwork, machines: &Machines) -> EnergyValue {
    EnergyValue::new(kinetic_energy(&state.speeds, machines), potential_energy(&state.angles, sep, net))
}

pub fn energy_along_trajectory(
    traj: &Trajectory,
    sep: &DVector<f64>,
    net: &ReducedNetwork,
    machines: &Machines,
) -> Vec<EnergyValue> {
    traj.states.iter().map(|x| total_energy(x, sep, net, machines)).collect()
}
