//! Damped Newton iteration at fixed λ and bordered Newton for the
//! max-value (`U[mid] = p`) and arclength constraints.

use serde::Serialize;

use crate::banded::{banded_solve, BandedSystem, Border};
use crate::error::{Error, Result};
use crate::mesh::{assemble_jacobian, assemble_residual, derived_boundary_values, max_abs, BeamSolution, DiscreteProblem};
use crate::nonlinearity::RADIUS_GUARD;

const MAX_BACKTRACKS: usize = 40;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NewtonConfig {
    /// Residual tolerance; multiplied by `max(1, λ f(p))` when `scale_aware` is set.
    pub tol: f64,
    pub scale_aware: bool,
    pub max_iters: usize,
    /// Backtracking factor applied to the step until the residual decreases.
    pub damping: f64,
    /// Project iterates into `[0, r(1 − 2ε_r)]`.
    pub clamp: bool,
}

impl Default for NewtonConfig {
    fn default() -> Self {
        NewtonConfig {
            tol: 1e-10,
            scale_aware: true,
            max_iters: 25,
            damping: 0.5,
            clamp: true,
        }
    }
}

impl NewtonConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) || self.max_iters == 0 || !(self.damping > 0.0 && self.damping < 1.0) {
            return Err(Error::Config(format!(
                "newton: need tol > 0, max_iters >= 1, 0 < damping < 1 (got {}, {}, {})",
                self.tol, self.max_iters, self.damping
            )));
        }
        Ok(())
    }
}

/// Smallest residual max-norm distinguishable from rounding noise.
///
/// The stencil sums terms of size `16 max|U| / h⁴` that cancel to `O(λ f)`,
/// so a converged residual cannot sit below a few ulps of that.
pub fn rounding_floor(dp: &DiscreteProblem, lambda: f64, u: &[f64]) -> f64 {
    let umax = max_abs(u);
    let fmax = u.iter().filter_map(|&x| dp.nl().f(x).ok()).fold(0.0, f64::max);
    8.0 * f64::EPSILON * (16.0 * umax / dp.h().powi(4) + lambda.abs() * fmax)
}

/// Tolerance actually enforced: the configured one, scaled when
/// `scale_aware`, but never below [`rounding_floor`].
pub fn effective_tol(dp: &DiscreteProblem, lambda: f64, u: &[f64], cfg: &NewtonConfig) -> f64 {
    let mut tol = cfg.tol;
    if cfg.scale_aware {
        let p = u.get(dp.mid_interior()).copied().unwrap_or(0.0);
        let fp = dp.nl().f(p.max(0.0)).unwrap_or(1.0);
        tol *= (lambda.abs() * fp).max(1.0);
    }
    tol.max(rounding_floor(dp, lambda, u))
}

fn project(dp: &DiscreteProblem, u: &mut [f64], clamp: bool) {
    if !clamp {
        return;
    }
    let limit = dp.nl().guard_limit();
    let back = dp.nl().radius() * (1.0 - 2.0 * RADIUS_GUARD);
    for x in u.iter_mut() {
        if *x < 0.0 {
            *x = 0.0;
        } else if *x > limit {
            *x = back;
        }
    }
}

fn finish(dp: &DiscreteProblem, lambda: f64, u: Vec<f64>, history: Vec<f64>) -> BeamSolution {
    let (d2_0, d3_0) = derived_boundary_values(dp, &u);
    BeamSolution {
        lambda,
        p: u[dp.mid_interior()],
        u,
        d2_0,
        d3_0,
        residual_norm: *history.last().unwrap_or(&f64::NAN),
        iterations: history.len() - 1,
        residual_history: history,
    }
}

/// Newton iteration on `R(U) = 0` at fixed λ with backtracking.
pub fn newton_solve(dp: &DiscreteProblem, lambda: f64, u0: &[f64], cfg: &NewtonConfig) -> Result<BeamSolution> {
    cfg.validate()?;
    let mut u = u0.to_vec();
    project(dp, &mut u, cfg.clamp);
    let mut r = assemble_residual(dp, lambda, &u)?;
    let mut rn = max_abs(&r);
    let mut history = vec![rn];

    for _ in 0..cfg.max_iters {
        if rn <= effective_tol(dp, lambda, &u, cfg) {
            return Ok(finish(dp, lambda, u, history));
        }
        let j = assemble_jacobian(dp, lambda, &u)?;
        let rhs: Vec<f64> = r.iter().map(|x| -x).collect();
        let du = banded_solve(&BandedSystem::new(j, rhs))?;
        let (nu, nr, nrn) = backtrack(dp, cfg, rn, |t| {
            let mut trial: Vec<f64> = u.iter().zip(&du).map(|(a, d)| a + t * d).collect();
            project(dp, &mut trial, cfg.clamp);
            let res = assemble_residual(dp, lambda, &trial)?;
            let tol = effective_tol(dp, lambda, &trial, cfg);
            Ok((trial, res, tol))
        })?;
        u = nu;
        r = nr;
        rn = nrn;
        history.push(rn);
    }
    if rn <= effective_tol(dp, lambda, &u, cfg) {
        return Ok(finish(dp, lambda, u, history));
    }
    Err(Error::NoConvergence {
        iterations: cfg.max_iters,
        residual: rn,
    })
}

type Trial<S> = (S, Vec<f64>, f64);

/// Halves the step until the residual norm decreases (or the trial is
/// already converged).
fn backtrack<S>(
    _dp: &DiscreteProblem,
    cfg: &NewtonConfig,
    rn: f64,
    mut trial: impl FnMut(f64) -> Result<Trial<S>>,
) -> Result<(S, Vec<f64>, f64)> {
    let mut t = 1.0;
    let mut last_err = None;
    for _ in 0..MAX_BACKTRACKS {
        match trial(t) {
            Ok((state, res, tol)) => {
                let n = max_abs(&res);
                if n.is_finite() && (n < rn || n <= tol) {
                    return Ok((state, res, n));
                }
            }
            Err(e @ (Error::Domain { .. } | Error::NonFinite { .. })) => last_err = Some(e),
            Err(e) => return Err(e),
        }
        t *= cfg.damping;
    }
    Err(last_err.unwrap_or(Error::NoConvergence {
        iterations: 0,
        residual: rn,
    }))
}

/// Linear constraint `row·U + corner·λ = target` added to the residual system.
pub(crate) struct Constraint {
    pub row: Vec<f64>,
    pub corner: f64,
    pub target: f64,
}

impl Constraint {
    fn value(&self, u: &[f64], lambda: f64) -> f64 {
        self.row.iter().zip(u).map(|(a, b)| a * b).sum::<f64>() + self.corner * lambda - self.target
    }
}

/// Newton on `{R(U, λ) = 0, c(U, λ) = 0}` with a linear constraint `c`.
pub(crate) fn bordered_newton(
    dp: &DiscreteProblem,
    lambda0: f64,
    u0: &[f64],
    con: &Constraint,
    cfg: &NewtonConfig,
) -> Result<BeamSolution> {
    cfg.validate()?;
    let mut u = u0.to_vec();
    let mut lambda = lambda0;
    project(dp, &mut u, cfg.clamp);
    let mut r = assemble_residual(dp, lambda, &u)?;
    let mut rn = max_abs(&r);
    let mut history = vec![rn];

    for it in 0..=cfg.max_iters {
        let tol = effective_tol(dp, lambda, &u, cfg);
        let cval = con.value(&u, lambda);
        let cscale = max_abs(&con.row).max(con.corner.abs()) * max_abs(&u).max(lambda.abs()).max(1.0);
        if rn <= tol && cval.abs() <= 1e-12 * cscale {
            return Ok(finish(dp, lambda, u, history));
        }
        if it == cfg.max_iters {
            break;
        }
        let j = assemble_jacobian(dp, lambda, &u)?;
        let col: Vec<f64> = u.iter().map(|&x| dp.nl().f(x).map(|v| -v)).collect::<Result<_>>()?;
        let mut rhs: Vec<f64> = r.iter().map(|x| -x).collect();
        rhs.push(-cval);
        let border = Border {
            col,
            row: con.row.clone(),
            corner: con.corner,
        };
        let step = banded_solve(&BandedSystem::bordered(j, border, rhs))?;
        let (du, dl) = step.split_at(u.len());
        let dl = dl[0];
        let ((nu, nl), nr, nrn) = backtrack(dp, cfg, rn, |t| {
            let mut trial: Vec<f64> = u.iter().zip(du).map(|(a, d)| a + t * d).collect();
            project(dp, &mut trial, cfg.clamp);
            let tl = lambda + t * dl;
            let res = assemble_residual(dp, tl, &trial)?;
            let tol = effective_tol(dp, tl, &trial, cfg);
            Ok(((trial, tl), res, tol))
        })?;
        u = nu;
        lambda = nl;
        r = nr;
        rn = nrn;
        history.push(rn);
    }
    Err(Error::NoConvergence {
        iterations: cfg.max_iters,
        residual: rn,
    })
}

/// Solves for `(U, λ)` with the midpoint value pinned to `p`.
pub fn solve_at_max(
    dp: &DiscreteProblem,
    p: f64,
    guess: (f64, &[f64]),
    cfg: &NewtonConfig,
) -> Result<BeamSolution> {
    let limit = dp.nl().guard_limit();
    if !(p > 0.0 && p < limit) {
        return Err(Error::Domain { u: p, limit });
    }
    let mid = dp.mid_interior();
    let mut u = guess.1.to_vec();
    if u.len() != dp.interior() {
        return Err(Error::Dimension(format!("guess has length {}, grid needs {}", u.len(), dp.interior())));
    }
    u[mid] = p;
    let mut row = vec![0.0; u.len()];
    row[mid] = 1.0;
    let con = Constraint {
        row,
        corner: 0.0,
        target: p,
    };
    let mut sol = bordered_newton(dp, guess.0, &u, &con, cfg)?;
    sol.u[mid] = p;
    sol.p = p;
    if !(sol.lambda > 0.0) {
        return Err(Error::NegativeLambda(sol.lambda));
    }
    Ok(sol)
}

/// Estimates `C` in `r_{k+1} ≤ C r_k²` from the last two Newton steps.
pub fn quadratic_constant(sol: &BeamSolution) -> Option<f64> {
    let h = &sol.residual_history;
    if h.len() < 3 {
        return None;
    }
    let (a, b) = (h[h.len() - 2], h[h.len() - 1]);
    (a > 0.0).then(|| b / (a * a))
}
