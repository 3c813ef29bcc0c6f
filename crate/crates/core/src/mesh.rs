//! Uniform-grid discretization of `u'''' − λ f(u) = 0` with clamped ends.
//!
//! Unknowns are the `n − 2` interior nodal values. The fourth difference
//! uses the stencil `(1, −4, 6, −4, 1)/h⁴`, with the ghost values
//! `u(−h) = u(h)` and `u(1+h) = u(1−h)` eliminated, which leaves a
//! symmetric pentadiagonal operator whose first and last diagonal entries
//! are 7 instead of 6.

use serde::Serialize;

use crate::banded::BandMatrix;
use crate::error::{Error, Result};
use crate::nonlinearity::Nonlinearity;

pub const DEFAULT_NODES: usize = 501;
pub const MIN_NODES: usize = 11;

#[derive(Debug, Clone)]
pub struct DiscreteProblem {
    n: usize,
    h: f64,
    nl: Nonlinearity,
}

impl DiscreteProblem {
    pub fn new(nl: Nonlinearity, n: usize) -> Result<Self> {
        if n < MIN_NODES || n % 2 == 0 {
            return Err(Error::Config(format!("grid size n = {n} must be odd and at least {MIN_NODES}")));
        }
        Ok(DiscreteProblem {
            n,
            h: 1.0 / (n - 1) as f64,
            nl,
        })
    }

    /// Node count including both endpoints.
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn nl(&self) -> &Nonlinearity {
        &self.nl
    }

    /// Number of unknowns.
    pub fn interior(&self) -> usize {
        self.n - 2
    }

    /// Full-grid index of `x = 1/2`.
    pub fn mid(&self) -> usize {
        (self.n - 1) / 2
    }

    /// Interior-vector index of `x = 1/2`.
    pub fn mid_interior(&self) -> usize {
        self.mid() - 1
    }

    /// Coordinate of full-grid node `i`.
    pub fn x(&self, i: usize) -> f64 {
        i as f64 / (self.n - 1) as f64
    }

    /// Pads interior values with the two zero boundary values.
    pub fn full(&self, u: &[f64]) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.n);
        v.push(0.0);
        v.extend_from_slice(u);
        v.push(0.0);
        v
    }

    /// Full grid plus one reflected ghost node at each end
    /// (index `i + 1` holds node `i`).
    pub fn with_ghosts(&self, u: &[f64]) -> Vec<f64> {
        let m = u.len();
        let mut v = Vec::with_capacity(m + 4);
        v.push(u[0]);
        v.push(0.0);
        v.extend_from_slice(u);
        v.push(0.0);
        v.push(u[m - 1]);
        v
    }

    /// Interior samples of a function on the grid.
    pub fn sample(&self, g: impl Fn(f64) -> f64) -> Vec<f64> {
        (1..self.n - 1).map(|i| g(self.x(i))).collect()
    }

    fn check_len(&self, u: &[f64]) -> Result<()> {
        if u.len() != self.interior() {
            return Err(Error::Dimension(format!(
                "nodal vector has length {}, grid needs {}",
                u.len(),
                self.interior()
            )));
        }
        Ok(())
    }

    /// `D₄ u / h⁴` on the interior nodes.
    pub fn fourth_difference(&self, u: &[f64]) -> Result<Vec<f64>> {
        self.check_len(u)?;
        let g = self.with_ghosts(u);
        let s = 1.0 / self.h.powi(4);
        // Pairing mirror-image terms keeps the result exactly symmetric
        // for symmetric input.
        Ok((0..u.len())
            .map(|i| {
                let c = i + 2;
                ((g[c - 2] + g[c + 2]) - 4.0 * (g[c - 1] + g[c + 1]) + 6.0 * g[c]) * s
            })
            .collect())
    }

    /// The beam operator `D₄/h⁴` as a band matrix.
    pub fn beam_matrix(&self) -> BandMatrix {
        let m = self.interior();
        let s = 1.0 / self.h.powi(4);
        let mut a = BandMatrix::zeros(m, 2, 2);
        for i in 0..m {
            let diag = if i == 0 || i == m - 1 { 7.0 } else { 6.0 };
            a.set(i, i, diag * s);
            if i + 1 < m {
                a.set(i, i + 1, -4.0 * s);
                a.set(i + 1, i, -4.0 * s);
            }
            if i + 2 < m {
                a.set(i, i + 2, s);
                a.set(i + 2, i, s);
            }
        }
        a
    }

    /// Small-amplitude predictor `λ f(0) x²(1−x)²/24`.
    pub fn linear_guess(&self, lambda: f64) -> Result<Vec<f64>> {
        let f0 = self.nl.f(0.0)?;
        Ok(self.sample(|x| lambda * f0 * x * x * (1.0 - x) * (1.0 - x) / 24.0))
    }
}

/// `R_i = (D₄U)_i/h⁴ − λ f(U_i)` on interior nodes.
pub fn assemble_residual(dp: &DiscreteProblem, lambda: f64, u: &[f64]) -> Result<Vec<f64>> {
    let mut r = dp.fourth_difference(u)?;
    for (ri, &ui) in r.iter_mut().zip(u) {
        *ri -= lambda * dp.nl.f(ui)?;
    }
    Ok(r)
}

/// `J = D₄/h⁴ − λ diag(f'(U))`.
pub fn assemble_jacobian(dp: &DiscreteProblem, lambda: f64, u: &[f64]) -> Result<BandMatrix> {
    dp.check_len(u)?;
    let mut j = dp.beam_matrix();
    for (i, &ui) in u.iter().enumerate() {
        j.add(i, i, -lambda * dp.nl.eval(ui)?.1);
    }
    Ok(j)
}

/// One-sided estimates of `u''(0)` and `u'''(0)`.
///
/// Fits `u ≈ A x² + B x³ + C x⁴` (which already satisfies `u(0) = u'(0) = 0`)
/// through the first three interior nodes; `u''(0) = 2A`, `u'''(0) = 6B`.
pub fn derived_boundary_values(dp: &DiscreteProblem, u: &[f64]) -> (f64, f64) {
    if u.len() < 3 {
        return (0.0, 0.0);
    }
    let h = dp.h;
    let (u1, u2, u3) = (u[0], u[1], u[2]);
    let d2 = (6.0 * u1 - 1.5 * u2 + (2.0 / 9.0) * u3) / (h * h);
    let d3 = (-15.0 * u1 + 6.0 * u2 - u3) / (h * h * h);
    (d2, d3)
}

/// Accepted pair `(λ, U)` with derived diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BeamSolution {
    pub lambda: f64,
    /// Interior nodal values; boundary values are zero.
    pub u: Vec<f64>,
    /// `u(1/2)`.
    pub p: f64,
    pub d2_0: f64,
    pub d3_0: f64,
    pub residual_norm: f64,
    pub iterations: usize,
    /// Residual max-norm before each Newton update and after the last one.
    pub residual_history: Vec<f64>,
}

impl BeamSolution {
    pub fn new(dp: &DiscreteProblem, lambda: f64, u: Vec<f64>) -> Result<Self> {
        let r = assemble_residual(dp, lambda, &u)?;
        let residual_norm = max_abs(&r);
        let (d2_0, d3_0) = derived_boundary_values(dp, &u);
        Ok(BeamSolution {
            lambda,
            p: u[dp.mid_interior()],
            u,
            d2_0,
            d3_0,
            residual_norm,
            iterations: 0,
            residual_history: vec![residual_norm],
        })
    }

    pub fn max_value(&self) -> f64 {
        self.u.iter().copied().fold(0.0, f64::max)
    }
}

pub fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}
