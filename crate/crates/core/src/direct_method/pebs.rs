//! Exit points: first potential-energy maximum along a fault-on trajectory.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::{DynamicState, Machines, Trajectory};
use crate::energy::{potential_energy, total_energy, EnergyValue};
use crate::network::{BusId, ReducedNetwork};

#[derive(Debug, Error, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "reason", rename_all = "kebab-case")]
pub enum NoExitPoint {
    #[error("potential energy never increases along the fault trajectory")]
    Decreasing,
    #[error("no potential-energy maximum within the fault window")]
    NoMaximum,
    #[error("fault trajectory blew up at t = {t} s")]
    BlowUp { t: f64 },
    #[error("faulted network reduction is singular")]
    ReductionSingular,
    #[error("{message}")]
    Other { message: String },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExitPoint {
    pub fault_bus: BusId,
    /// Time along the fault trajectory, s.
    pub time: f64,
    pub state: DynamicState,
    /// Energy of the interpolated state, post-switching network and SEP.
    pub energy: EnergyValue,
    /// Index of the sample at the discrete maximum.
    pub sample: usize,
}

/// First interior local maximum `k` of `series` (y[k] ≥ y[k−1], y[k] > y[k+1])
/// and the vertex offset in (−1, 1) samples of the parabola through k−1, k, k+1.
pub fn first_peak(series: &[f64]) -> Option<(usize, f64)> {
    for k in 1..series.len().saturating_sub(1) {
        let (y0, y1, y2) = (series[k - 1], series[k], series[k + 1]);
        if y1 >= y0 && y1 > y2 {
            let den = y0 - 2.0 * y1 + y2;
            let offset = if den != 0.0 { 0.5 * (y0 - y2) / den } else { 0.0 };
            return Some((k, offset.clamp(-1.0, 1.0)));
        }
    }
    None
}

pub fn find_exit_point(
    fault_traj: &Trajectory,
    sep: &DVector<f64>,
    net_post: &ReducedNetwork,
    machines: &Machines,
    fault_bus: BusId,
) -> Result<ExitPoint, NoExitPoint> {
    let pe: Vec<f64> = fault_traj
        .states
        .iter()
        .map(|x| potential_energy(&x.angles, sep, net_post))
        .collect();
    let Some((k, offset)) = first_peak(&pe) else {
        if let Some(t) = fault_traj.blow_up {
            return Err(NoExitPoint::BlowUp { t });
        }
        if pe.windows(2).all(|w| w[1] <= w[0]) {
            return Err(NoExitPoint::Decreasing);
        }
        return Err(NoExitPoint::NoMaximum);
    };
    let (a, b, s) = if offset >= 0.0 { (k, k + 1, offset) } else { (k, k - 1, -offset) };
    let (xa, xb) = (&fault_traj.states[a], &fault_traj.states[b]);
    let state = DynamicState {
        angles: &xa.angles + (&xb.angles - &xa.angles) * s,
        speeds: &xa.speeds + (&xb.speeds - &xa.speeds) * s,
    };
    let time = fault_traj.times[k] + offset * fault_traj.dt;
    Ok(ExitPoint {
        fault_bus,
        time,
        energy: total_energy(&state, sep, net_post, machines),
        state,
        sample: k,
    })
}
