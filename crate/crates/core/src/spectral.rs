//! Principal clamped-beam eigenvalue, the smallest eigenvalue of the
//! linearized operator at a solution, and the resulting upper bound on λ.

use std::f64::consts::PI;

use serde::Serialize;

use crate::banded::{negative_eigenvalue_count, BandLu, BandMatrix};
use crate::error::{Error, Result};
use crate::mesh::{assemble_jacobian, BeamSolution, DiscreteProblem};
use crate::nonlinearity::Nonlinearity;

pub const MAX_EIGEN_ITERS: usize = 500;
const EIGEN_RTOL: f64 = 1e-10;
/// Relative width of the Sturm bracket handed to inverse iteration.
const STURM_RTOL: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EigenEstimate {
    pub value: f64,
    /// Interior eigenvector scaled so that the midpoint entry is `+1`.
    pub vector: Vec<f64>,
    pub iterations: usize,
    /// `‖(J − value I) vector‖∞`.
    pub residual: f64,
    /// Shift used by the inverse iteration.
    pub shift: f64,
}

fn char_fn(k: f64) -> f64 {
    k.cos() * k.cosh() - 1.0
}

/// Smallest positive root `k₁` of `cos k cosh k = 1` and `μ₁ = k₁⁴`.
pub fn beam_principal_eigenvalue(tol: f64) -> (f64, f64) {
    let (mut a, mut b) = (PI, 2.0 * PI);
    let (fa, fb) = (char_fn(a), char_fn(b));
    assert!(fa * fb < 0.0, "bracket (pi, 2pi) does not enclose a root");
    let tol = tol.max(f64::EPSILON * b);
    while b - a > tol {
        let m = 0.5 * (a + b);
        let fm = char_fn(m);
        if fm == 0.0 {
            a = m;
            b = m;
        } else if (fm < 0.0) == (fa < 0.0) {
            a = m;
        } else {
            b = m;
        }
    }
    let k = 0.5 * (a + b);
    (k, k.powi(4))
}

/// `r² μ₁ / (4a)`.
pub fn lambda_upper_bound(nl: &Nonlinearity, a: f64) -> Result<f64> {
    if !nl.has_finite_radius() {
        return Err(Error::InfiniteRadius);
    }
    lambda_upper_bound_for_radius(nl.radius(), a)
}

pub fn lambda_upper_bound_for_radius(r: f64, a: f64) -> Result<f64> {
    if !r.is_finite() {
        return Err(Error::InfiniteRadius);
    }
    if !(a > 0.0 && r > 0.0) {
        return Err(Error::Config(format!("bound needs a > 0 and r > 0 (a = {a}, r = {r})")));
    }
    let (_, mu1) = beam_principal_eigenvalue(1e-12);
    Ok(r * r * mu1 / (4.0 * a))
}

fn has_eigenvalue_below(j: &BandMatrix, x: f64) -> Result<bool> {
    match negative_eigenvalue_count(j, x) {
        Ok(c) => Ok(c > 0),
        // x is (numerically) an eigenvalue; nudge it down.
        Err(Error::Singular { .. }) => {
            let dx = 1e-12 * j.norm_inf().max(1.0);
            Ok(negative_eigenvalue_count(j, x - dx)? > 0)
        }
        Err(e) => Err(e),
    }
}

/// Shift strictly below the smallest eigenvalue and closer to it than to
/// any other one.
fn choose_shift(j: &BandMatrix) -> Result<f64> {
    if !has_eigenvalue_below(j, 0.0)? {
        return Ok(0.0);
    }
    // Gershgorin: every eigenvalue is at least -‖J‖∞.
    let mut lo = -j.norm_inf();
    let mut hi = 0.0;
    for _ in 0..200 {
        if hi - lo <= STURM_RTOL * lo.abs() {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if has_eigenvalue_below(j, mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(lo)
}

fn factor_shifted(j: &BandMatrix, sigma: f64) -> Result<(BandLu, f64)> {
    let norm = j.norm_inf().max(1.0);
    let mut last = None;
    for s in [sigma, sigma - 1e-12 * norm, sigma + 1e-12 * norm] {
        let mut a = j.clone();
        a.shift_diagonal(-s);
        match BandLu::factor(&a) {
            Ok(lu) => return Ok((lu, s)),
            Err(e) => last = Some(e),
        }
    }
    Err(last.expect("at least one shift attempted"))
}

/// Smallest eigenvalue of a symmetric band matrix by shifted inverse iteration.
pub fn smallest_eigenpair(j: &BandMatrix, mid: usize) -> Result<EigenEstimate> {
    let n = j.dim();
    let sigma = choose_shift(j)?;
    let (lu, sigma) = factor_shifted(j, sigma)?;

    let mut x: Vec<f64> = (0..n)
        .map(|i| (PI * (i + 1) as f64 / (n + 1) as f64).sin().powi(2))
        .collect();
    normalize2(&mut x);
    let mut value = f64::NAN;
    let mut iterations = 0;
    let mut converged = false;
    for it in 1..=MAX_EIGEN_ITERS {
        let y = lu.solve(&x)?;
        let rq: f64 = x.iter().zip(&y).map(|(a, b)| a * b).sum();
        let next = sigma + 1.0 / rq;
        x = y;
        normalize2(&mut x);
        iterations = it;
        if it > 1 && (next - value).abs() <= EIGEN_RTOL * next.abs().max(f64::MIN_POSITIVE) {
            value = next;
            converged = true;
            break;
        }
        value = next;
    }
    if !converged {
        return Err(Error::EigenNoConvergence(MAX_EIGEN_ITERS));
    }
    let pivot = x[mid];
    if pivot == 0.0 {
        return Err(Error::EigenNoConvergence(iterations));
    }
    x.iter_mut().for_each(|v| *v /= pivot);
    let jx = j.matvec(&x);
    let residual = jx.iter().zip(&x).fold(0.0f64, |m, (a, b)| m.max((a - value * b).abs()));
    Ok(EigenEstimate {
        value,
        vector: x,
        iterations,
        residual,
        shift: sigma,
    })
}

fn normalize2(x: &mut [f64]) {
    let n = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    if n > 0.0 {
        x.iter_mut().for_each(|v| *v /= n);
    }
}

/// Rounding level of `‖J v‖∞` for a max-normalized `v`; eigen-residuals
/// cannot be expected below this.
pub fn residual_floor(j: &BandMatrix) -> f64 {
    64.0 * f64::EPSILON * j.norm_inf()
}

/// Smallest eigenvalue of `J = D₄/h⁴ − λ diag f'(U)` at a solution.
pub fn linearized_smallest_eigenvalue(dp: &DiscreteProblem, sol: &BeamSolution) -> Result<EigenEstimate> {
    let j = assemble_jacobian(dp, sol.lambda, &sol.u)?;
    smallest_eigenpair(&j, dp.mid_interior())
}

/// Smallest eigenvalue of the discrete beam operator `D₄/h⁴`.
pub fn discrete_beam_eigenvalue(dp: &DiscreteProblem) -> Result<f64> {
    Ok(smallest_eigenpair(&dp.beam_matrix(), dp.mid_interior())?.value)
}

/// Gap between the two smallest eigenvalues, from an inertia count on a
/// bracket above the first one.
pub fn spectral_gap(j: &BandMatrix, first: f64) -> Result<f64> {
    let norm = j.norm_inf();
    let mut lo = first + 1e-9 * norm.max(1.0) + 1e-9 * first.abs();
    let mut hi = norm;
    if negative_eigenvalue_count(j, lo)? >= 2 {
        return Ok(0.0);
    }
    for _ in 0..200 {
        if hi - lo <= 1e-6 * hi.abs().max(1.0) {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if negative_eigenvalue_count(j, mid)? >= 2 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(0.5 * (lo + hi) - first)
}

#[cfg(test)]
fn eig_inf_norm(e: &EigenEstimate) -> f64 {
    crate::mesh::max_abs(&e.vector)
}
