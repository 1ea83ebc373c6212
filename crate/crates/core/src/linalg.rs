//! Small dense helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

/// Smallest |pivot| / largest |pivot| accepted before a matrix is called singular.
const PIVOT_RATIO: f64 = 1e-14;

pub fn solve_complex(a: DMatrix<Complex64>, b: DMatrix<Complex64>) -> Option<DMatrix<Complex64>> {
    let lu = a.lu();
    let u = lu.u();
    let pivots: Vec<f64> = u.diagonal().iter().map(|z| z.norm()).collect();
    if !well_conditioned(&pivots) {
        return None;
    }
    lu.solve(&b)
}

pub fn solve_real(a: DMatrix<f64>, b: &DVector<f64>) -> Option<DVector<f64>> {
    let lu = a.lu();
    let pivots: Vec<f64> = lu.u().diagonal().iter().map(|v| v.abs()).collect();
    if !well_conditioned(&pivots) {
        return None;
    }
    lu.solve(b)
}

fn well_conditioned(pivots: &[f64]) -> bool {
    let largest = pivots.iter().cloned().fold(0.0, f64::max);
    let smallest = pivots.iter().cloned().fold(f64::INFINITY, f64::min);
    largest > 0.0 && smallest.is_finite() && smallest > PIVOT_RATIO * largest
}

pub fn inf_norm(v: &DVector<f64>) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Wraps an angle into (−π, π].
pub fn wrap_angle(a: f64) -> f64 {
    use std::f64::consts::PI;
    let w = (a + PI).rem_euclid(2.0 * PI) - PI;
    if w <= -PI {
        w + 2.0 * PI
    } else {
        w
    }
}

/// Unit vector spanning the numerical null space of a square complex matrix.
pub fn null_vector(a: &DMatrix<Complex64>) -> DVector<Complex64> {
    let svd = a.clone().svd(false, true);
    let v_t = svd.v_t.expect("requested right singular vectors");
    let k = svd
        .singular_values
        .iter()
        .enumerate()
        .min_by(|x, y| x.1.total_cmp(y.1))
        .map(|(i, _)| i)
        .expect("non-empty matrix");
    v_t.row(k).transpose().map(|z| z.conj())
}
