//! Catalog of load nonlinearities `f` and numerical checks of the structural
//! hypotheses the continuation relies on: positivity, monotonicity,
//! convexity and the growth condition `liminf (r - u) f(u) > 0` at the
//! singularity radius `r`.
//!
//! Entries are addressed by name plus a parameter map:
//!
//! | name                | parameters                          | r                      |
//! |---------------------|-------------------------------------|------------------------|
//! | `constant_load`     | none                                | +inf                   |
//! | `inverse_square`    | none                                | 1                      |
//! | `exponential`       | none                                | +inf                   |
//! | `power`             | `p`                                 | +inf                   |
//! | `cnt_actuator`      | `beta_n`, `n`                       | 1                      |
//! | `nanobridge_single` | `beta_vdw`, `alpha`, `delta`, `k`   | 1 - 1/(2k) if 2k > 1   |
//! | `nanobridge_double` | `beta_vdw`, `alpha`, `delta`, `k`   | (1 - 1/k)/2 if k > 1   |
//! | `casimir_actuator`  | `beta_cas`, `alpha`, `delta`, `gamma` | 1                    |
//! | `regularized`       | `eps`, `m`                          | 1                      |

use std::collections::BTreeMap;

use serde::Serialize;

use crate::error::{Error, Result};

/// Relative guard: evaluators are only queried on `[0, r(1 - RADIUS_GUARD)]`.
pub const RADIUS_GUARD: f64 = 1e-8;
/// Sampling window `[0, U_CAP]` for entries without a finite singularity.
pub const U_CAP: f64 = 50.0;
/// Default sample count for [`check_hypotheses`].
pub const DEFAULT_SAMPLES: usize = 10_000;
const GOLDEN_ITERS: usize = 50;

pub type Params = BTreeMap<String, f64>;

/// Names and parameter keys of every catalog entry.
pub const CATALOG: &[(&str, &[&str])] = &[
    ("constant_load", &[]),
    ("inverse_square", &[]),
    ("exponential", &[]),
    ("power", &["p"]),
    ("cnt_actuator", &["beta_n", "n"]),
    ("nanobridge_single", &["beta_vdw", "alpha", "delta", "k"]),
    ("nanobridge_double", &["beta_vdw", "alpha", "delta", "k"]),
    ("casimir_actuator", &["beta_cas", "alpha", "delta", "gamma"]),
    ("regularized", &["eps", "m"]),
];

#[derive(Debug, Clone, PartialEq)]
enum Law {
    Constant,
    InverseSquare,
    Exponential,
    Power { p: f64 },
    /// beta (1-u)^-n
    Cnt { beta: f64, n: f64 },
    /// a (1-u)^-4 + b / ((1-u) ln^2(2k(1-u)))
    SingleNanowire { a: f64, b: f64, k: f64 },
    /// c1 (1-2u)^-5/2 + c2 / ((1-2u) ln^2(k(1-2u)))
    DoubleNanowire { c1: f64, c2: f64, k: f64 },
    /// (beta v^-4 + alpha v^-2 + alpha gamma v^-1) / (1+delta), v = 1-u
    Casimir { beta: f64, alpha: f64, gamma: f64, scale: f64 },
    /// v^-2 - eps^(m-2) v^-m
    Regularized { eps: f64, m: f64 },
}

/// Load term `f` with its first two derivatives and, when known in closed
/// form, its primitive `F(u) = ∫₀ᵘ f`.
#[derive(Debug, Clone, PartialEq)]
pub struct Nonlinearity {
    name: String,
    params: Params,
    radius: f64,
    law: Law,
    analytic_primitive: bool,
}

fn param(model: &str, params: &Params, key: &str) -> Result<f64> {
    params.get(key).copied().ok_or_else(|| Error::MissingParam {
        model: model.to_string(),
        param: key.to_string(),
    })
}

fn invalid(model: &str, key: &str, value: f64, reason: &str) -> Error {
    Error::InvalidParam {
        model: model.to_string(),
        param: key.to_string(),
        value,
        reason: reason.to_string(),
    }
}

fn positive(model: &str, params: &Params, key: &str) -> Result<f64> {
    let v = param(model, params, key)?;
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(invalid(model, key, v, "must be positive"))
    }
}

fn nonnegative(model: &str, params: &Params, key: &str) -> Result<f64> {
    let v = param(model, params, key)?;
    if v.is_finite() && v >= 0.0 {
        Ok(v)
    } else {
        Err(invalid(model, key, v, "must be non-negative"))
    }
}

/// Builds a catalog entry by name.
pub fn catalog_lookup(name: &str, params: &Params) -> Result<Nonlinearity> {
    let keys = CATALOG
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, k)| *k)
        .ok_or_else(|| Error::UnknownModel(name.to_string()))?;
    if let Some(extra) = params.keys().find(|k| !keys.contains(&k.as_str())) {
        return Err(invalid(name, extra, params[extra], "not a parameter of this model"));
    }

    let (law, radius) = match name {
        "constant_load" => (Law::Constant, f64::INFINITY),
        "inverse_square" => (Law::InverseSquare, 1.0),
        "exponential" => (Law::Exponential, f64::INFINITY),
        "power" => (
            Law::Power {
                p: positive(name, params, "p")?,
            },
            f64::INFINITY,
        ),
        "cnt_actuator" => (
            Law::Cnt {
                beta: positive(name, params, "beta_n")?,
                n: positive(name, params, "n")?,
            },
            1.0,
        ),
        "nanobridge_single" => {
            let beta = positive(name, params, "beta_vdw")?;
            let alpha = nonnegative(name, params, "alpha")?;
            let delta = nonnegative(name, params, "delta")?;
            let k = positive(name, params, "k")?;
            // ln(2k(1-u)) vanishes at u = 1 - 1/(2k)
            let zero = 1.0 - 1.0 / (2.0 * k);
            if alpha > 0.0 && zero.abs() < 1e-12 {
                return Err(invalid(name, "k", k, "log term is singular at u = 0"));
            }
            let radius = if alpha > 0.0 && zero > 0.0 { zero } else { 1.0 };
            (
                Law::SingleNanowire {
                    a: beta / (k * (1.0 + delta)),
                    b: alpha / (1.0 + delta),
                    k,
                },
                radius,
            )
        }
        "nanobridge_double" => {
            let beta = positive(name, params, "beta_vdw")?;
            let alpha = nonnegative(name, params, "alpha")?;
            let delta = nonnegative(name, params, "delta")?;
            let k = positive(name, params, "k")?;
            // ln(k(1-2u)) vanishes at u = (1 - 1/k)/2
            let zero = 0.5 * (1.0 - 1.0 / k);
            if alpha > 0.0 && zero.abs() < 1e-12 {
                return Err(invalid(name, "k", k, "log term is singular at u = 0"));
            }
            let radius = if alpha > 0.0 && zero > 0.0 { zero } else { 0.5 };
            (
                Law::DoubleNanowire {
                    c1: beta / (2.0 * (1.0 + delta)),
                    c2: alpha / (2.0 * (1.0 + delta)),
                    k,
                },
                radius,
            )
        }
        "casimir_actuator" => {
            let beta = positive(name, params, "beta_cas")?;
            let alpha = nonnegative(name, params, "alpha")?;
            let delta = nonnegative(name, params, "delta")?;
            let gamma = nonnegative(name, params, "gamma")?;
            (
                Law::Casimir {
                    beta,
                    alpha,
                    gamma,
                    scale: 1.0 / (1.0 + delta),
                },
                1.0,
            )
        }
        "regularized" => {
            let eps = positive(name, params, "eps")?;
            let m = positive(name, params, "m")?;
            if m <= 2.0 {
                return Err(invalid(name, "m", m, "must exceed 2"));
            }
            (Law::Regularized { eps, m }, 1.0)
        }
        _ => unreachable!("catalog table and constructor out of sync"),
    };

    Ok(Nonlinearity {
        name: name.to_string(),
        params: params.clone(),
        radius,
        law,
        analytic_primitive: true,
    })
}

/// Same as [`catalog_lookup`] with parameters given as a JSON object of numbers.
pub fn catalog_lookup_json(name: &str, params: &serde_json::Value) -> Result<Nonlinearity> {
    let mut map = Params::new();
    match params {
        serde_json::Value::Null => {}
        serde_json::Value::Object(obj) => {
            for (k, v) in obj {
                let x = v
                    .as_f64()
                    .ok_or_else(|| Error::Format(format!("parameter `{k}` is not a number")))?;
                map.insert(k.clone(), x);
            }
        }
        _ => return Err(Error::Format("parameters must be a JSON object".into())),
    }
    catalog_lookup(name, &map)
}

/// g(v) = 1/(v L^2) with L = ln(c v), and its first two v-derivatives.
fn log_term(v: f64, c: f64) -> (f64, f64, f64) {
    let l = (c * v).ln();
    let g = 1.0 / (v * l * l);
    let g1 = -(l + 2.0) / (v * v * l * l * l);
    let g2 = (2.0 * l * l + 6.0 * l + 6.0) / (v * v * v * l.powi(4));
    (g, g1, g2)
}

impl Nonlinearity {
    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn params(&self) -> &Params {
        &self.params
    }

    /// Singularity radius `r` (`f64::INFINITY` when `f` is regular on `[0, ∞)`).
    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn has_finite_radius(&self) -> bool {
        self.radius.is_finite()
    }

    /// Largest admissible argument `r(1 - RADIUS_GUARD)`.
    pub fn guard_limit(&self) -> f64 {
        self.radius * (1.0 - RADIUS_GUARD)
    }

    /// The constant load is the linear reference problem: it fails the strict
    /// monotonicity/convexity hypotheses but is always traceable.
    pub fn is_linear_reference(&self) -> bool {
        self.law == Law::Constant
    }

    /// Drops the closed-form primitive so [`Self::primitive`] falls back to quadrature.
    pub fn with_quadrature_primitive(mut self) -> Self {
        self.analytic_primitive = false;
        self
    }

    pub fn has_analytic_primitive(&self) -> bool {
        self.analytic_primitive
    }

    fn check_domain(&self, u: f64) -> Result<()> {
        let limit = self.guard_limit();
        if u.is_nan() || u < 0.0 || u > limit {
            return Err(Error::Domain { u, limit });
        }
        Ok(())
    }

    fn raw(&self, u: f64) -> (f64, f64, f64) {
        match self.law {
            Law::Constant => (1.0, 0.0, 0.0),
            Law::InverseSquare => {
                let v = 1.0 - u;
                let w = 1.0 / (v * v);
                (w, 2.0 * w / v, 6.0 * w / (v * v))
            }
            Law::Exponential => {
                let e = u.exp();
                (e, e, e)
            }
            Law::Power { p } => {
                let b = 1.0 + u;
                (b.powf(p), p * b.powf(p - 1.0), p * (p - 1.0) * b.powf(p - 2.0))
            }
            Law::Cnt { beta, n } => {
                let v = 1.0 - u;
                (
                    beta * v.powf(-n),
                    beta * n * v.powf(-n - 1.0),
                    beta * n * (n + 1.0) * v.powf(-n - 2.0),
                )
            }
            Law::SingleNanowire { a, b, k } => {
                let v = 1.0 - u;
                let (mut f, mut f1, mut f2) = (a * v.powi(-4), 4.0 * a * v.powi(-5), 20.0 * a * v.powi(-6));
                if b > 0.0 {
                    let (g, g1, g2) = log_term(v, 2.0 * k);
                    f += b * g;
                    f1 -= b * g1;
                    f2 += b * g2;
                }
                (f, f1, f2)
            }
            Law::DoubleNanowire { c1, c2, k } => {
                let v = 1.0 - 2.0 * u;
                let (mut f, mut f1, mut f2) = (
                    c1 * v.powf(-2.5),
                    5.0 * c1 * v.powf(-3.5),
                    35.0 * c1 * v.powf(-4.5),
                );
                if c2 > 0.0 {
                    let (g, g1, g2) = log_term(v, k);
                    f += c2 * g;
                    f1 -= 2.0 * c2 * g1;
                    f2 += 4.0 * c2 * g2;
                }
                (f, f1, f2)
            }
            Law::Casimir {
                beta,
                alpha,
                gamma,
                scale,
            } => {
                let v = 1.0 - u;
                (
                    scale * (beta * v.powi(-4) + alpha * v.powi(-2) + alpha * gamma / v),
                    scale * (4.0 * beta * v.powi(-5) + 2.0 * alpha * v.powi(-3) + alpha * gamma * v.powi(-2)),
                    scale
                        * (20.0 * beta * v.powi(-6) + 6.0 * alpha * v.powi(-4) + 2.0 * alpha * gamma * v.powi(-3)),
                )
            }
            Law::Regularized { eps, m } => {
                let v = 1.0 - u;
                let c = eps.powf(m - 2.0);
                (
                    v.powi(-2) - c * v.powf(-m),
                    2.0 * v.powi(-3) - c * m * v.powf(-m - 1.0),
                    6.0 * v.powi(-4) - c * m * (m + 1.0) * v.powf(-m - 2.0),
                )
            }
        }
    }

    /// `(f(u), f'(u), f''(u))` on the guarded domain.
    pub fn eval(&self, u: f64) -> Result<(f64, f64, f64)> {
        self.check_domain(u)?;
        let (f, f1, f2) = self.raw(u);
        if !f.is_finite() {
            return Err(Error::NonFinite { what: "f", u });
        }
        if !f1.is_finite() {
            return Err(Error::NonFinite { what: "f'", u });
        }
        if !f2.is_finite() {
            return Err(Error::NonFinite { what: "f''", u });
        }
        Ok((f, f1, f2))
    }

    pub fn f(&self, u: f64) -> Result<f64> {
        self.check_domain(u)?;
        let f = self.raw(u).0;
        if f.is_finite() {
            Ok(f)
        } else {
            Err(Error::NonFinite { what: "f", u })
        }
    }

    pub fn f1(&self, u: f64) -> Result<f64> {
        self.eval(u).map(|e| e.1)
    }

    pub fn f2(&self, u: f64) -> Result<f64> {
        self.eval(u).map(|e| e.2)
    }

    fn closed_primitive(&self, u: f64) -> f64 {
        match self.law {
            Law::Constant => u,
            Law::InverseSquare => u / (1.0 - u),
            Law::Exponential => u.exp_m1(),
            Law::Power { p } => ((1.0 + u).powf(p + 1.0) - 1.0) / (p + 1.0),
            Law::Cnt { beta, n } => {
                let v = 1.0 - u;
                if (n - 1.0).abs() < 1e-15 {
                    -beta * v.ln()
                } else {
                    beta * (v.powf(1.0 - n) - 1.0) / (n - 1.0)
                }
            }
            Law::SingleNanowire { a, b, k } => {
                let v = 1.0 - u;
                let mut big_f = a * (v.powi(-3) - 1.0) / 3.0;
                if b > 0.0 {
                    big_f += b * (1.0 / (2.0 * k * v).ln() - 1.0 / (2.0 * k).ln());
                }
                big_f
            }
            Law::DoubleNanowire { c1, c2, k } => {
                let v = 1.0 - 2.0 * u;
                let mut big_f = c1 * (v.powf(-1.5) - 1.0) / 3.0;
                if c2 > 0.0 {
                    big_f += 0.5 * c2 * (1.0 / (k * v).ln() - 1.0 / k.ln());
                }
                big_f
            }
            Law::Casimir {
                beta,
                alpha,
                gamma,
                scale,
            } => {
                let v = 1.0 - u;
                scale * (beta * (v.powi(-3) - 1.0) / 3.0 + alpha * (1.0 / v - 1.0) - alpha * gamma * v.ln())
            }
            Law::Regularized { eps, m } => {
                let v = 1.0 - u;
                (1.0 / v - 1.0) - eps.powf(m - 2.0) * (v.powf(1.0 - m) - 1.0) / (m - 1.0)
            }
        }
    }

    /// `F(u) = ∫₀ᵘ f(t) dt`, closed form when available, adaptive Simpson otherwise.
    pub fn primitive(&self, u: f64) -> Result<f64> {
        self.check_domain(u)?;
        if self.analytic_primitive {
            let v = self.closed_primitive(u);
            return if v.is_finite() {
                Ok(v)
            } else {
                Err(Error::NonFinite { what: "F", u })
            };
        }
        self.quadrature_primitive(u)
    }

    /// Adaptive Simpson approximation of `F(u)`, independent of the closed form.
    pub fn quadrature_primitive(&self, u: f64) -> Result<f64> {
        self.check_domain(u)?;
        if u == 0.0 {
            return Ok(0.0);
        }
        let fa = self.f(0.0)?;
        let fm = self.f(0.5 * u)?;
        let fb = self.f(u)?;
        let whole = u / 6.0 * (fa + 4.0 * fm + fb);
        let tol = 1e-13 * whole.abs().max(1e-300);
        self.simpson(0.0, u, fa, fm, fb, whole, tol, 48)
    }

    #[allow(clippy::too_many_arguments)]
    fn simpson(&self, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> Result<f64> {
        let m = 0.5 * (a + b);
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let flm = self.f(lm)?;
        let frm = self.f(rm)?;
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            return Ok(left + right + delta / 15.0);
        }
        Ok(self.simpson(a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)?
            + self.simpson(m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)?)
    }

    /// Closed-form `inf (r - u) f(u)` for entries where `(r - u) f(u)` is monotone.
    pub fn closed_form_a(&self) -> Option<f64> {
        match self.law {
            Law::InverseSquare => Some(1.0),
            Law::Cnt { beta, n } if n >= 1.0 => Some(beta),
            Law::Casimir {
                beta,
                alpha,
                gamma,
                scale,
            } => Some(scale * (beta + alpha + alpha * gamma)),
            _ => None,
        }
    }
}

/// Numerical verdict on the structural hypotheses for one nonlinearity.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HypothesisReport {
    pub model: String,
    pub samples: usize,
    pub positivity_ok: bool,
    /// `min f` over the samples.
    pub positivity_margin: f64,
    pub increasing_ok: bool,
    /// `min f'` over the samples.
    pub increasing_margin: f64,
    pub convex_ok: bool,
    /// `min f''` over the samples.
    pub convex_margin: f64,
    /// Growth test at the singularity; `None` when `r` is infinite.
    pub liminf_ok: Option<bool>,
    /// Estimate of `a` in `f(u) >= a/(r-u)`; `None` when `r` is infinite.
    pub a_estimate: Option<f64>,
    /// Sampled + golden-section estimate, kept even when a closed form exists.
    pub a_numeric: Option<f64>,
    pub a_is_exact: bool,
    pub notes: Vec<String>,
}

impl HypothesisReport {
    pub fn passes(&self) -> bool {
        self.positivity_ok
            && self.increasing_ok
            && self.convex_ok
            && self.liminf_ok.unwrap_or(true)
            && self.a_estimate.map_or(true, |a| a > 0.0)
    }

    /// First violated condition, if any.
    pub fn first_violation(&self) -> Option<&str> {
        self.notes.first().map(String::as_str)
    }
}

fn golden_min(g: impl Fn(f64) -> Result<f64>, mut a: f64, mut b: f64) -> Result<(f64, f64)> {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut gc = g(c)?;
    let mut gd = g(d)?;
    for _ in 0..GOLDEN_ITERS {
        if gc < gd {
            b = d;
            d = c;
            gd = gc;
            c = b - inv_phi * (b - a);
            gc = g(c)?;
        } else {
            a = c;
            c = d;
            gc = gd;
            d = a + inv_phi * (b - a);
            gd = g(d)?;
        }
    }
    Ok(if gc < gd { (c, gc) } else { (d, gd) })
}

/// Samples `f, f', f''` and `(r-u) f(u)` on the guarded domain.
pub fn check_hypotheses(nl: &Nonlinearity, n_samples: usize) -> Result<HypothesisReport> {
    if n_samples < 100 {
        return Err(Error::Config(format!("n_samples = {n_samples} < 100")));
    }
    let r = nl.radius();
    let (lo, hi) = if r.is_finite() {
        (RADIUS_GUARD * r, nl.guard_limit())
    } else {
        (0.0, U_CAP)
    };
    let step = (hi - lo) / (n_samples - 1) as f64;
    let sample = |k: usize| if k + 1 == n_samples { hi } else { lo + step * k as f64 };

    let mut worst = [(f64::INFINITY, lo); 3];
    let mut q_min = (f64::INFINITY, 0usize);
    for k in 0..n_samples {
        let u = sample(k);
        let (f, f1, f2) = nl.eval(u)?;
        for (slot, val) in worst.iter_mut().zip([f, f1, f2]) {
            if val < slot.0 {
                *slot = (val, u);
            }
        }
        if r.is_finite() {
            let q = (r - u) * f;
            if q < q_min.0 {
                q_min = (q, k);
            }
        }
    }

    let mut notes = Vec::new();
    let labels = ["f(u) > 0", "f'(u) > 0", "f''(u) > 0"];
    for (label, (val, u)) in labels.iter().zip(worst.iter()) {
        if *val <= 0.0 {
            notes.push(format!("{label} violated: value {val:e} at u = {u}"));
        }
    }

    let (mut liminf_ok, mut a_numeric) = (None, None);
    if r.is_finite() {
        let q = |u: f64| -> Result<f64> { Ok((r - u) * nl.f(u)?) };
        let k = q_min.1;
        let a = sample(k.saturating_sub(1));
        let b = sample((k + 1).min(n_samples - 1));
        let (_, q_golden) = golden_min(q, a, b)?;
        let est = q_min.0.min(q_golden);
        a_numeric = Some(est);

        // Decade probes toward r: a liminf of zero shows up as (r-u) f(u)
        // shrinking by orders of magnitude as the gap closes.
        let near = q(nl.guard_limit())?;
        let far = q(r * (1.0 - 1e-4))?;
        let ok = near > 0.0 && near >= 0.5 * far && est > 0.0;
        if !ok {
            notes.push(format!(
                "liminf (r-u) f(u) > 0 violated: (r-u) f(u) = {near:e} near r = {r} (vs {far:e} at 1e-4 gap)"
            ));
        }
        liminf_ok = Some(ok);
    }

    let closed = if r.is_finite() { nl.closed_form_a() } else { None };
    let a_estimate = closed.or(a_numeric);

    Ok(HypothesisReport {
        model: nl.name().to_string(),
        samples: n_samples,
        positivity_ok: worst[0].0 > 0.0,
        positivity_margin: worst[0].0,
        increasing_ok: worst[1].0 > 0.0,
        increasing_margin: worst[1].0,
        convex_ok: worst[2].0 > 0.0,
        convex_margin: worst[2].0,
        liminf_ok,
        a_estimate,
        a_numeric,
        a_is_exact: closed.is_some(),
        notes,
    })
}

/// Outcome of the tangent-line lower bound `f(u) >= (4a/r²) u`.
#[derive(Debug, Clone, PartialEq)]
pub struct TangentCheck {
    pub holds: bool,
    /// First sample where the bound failed, as `(u, f(u), (4a/r²) u)`.
    pub first_violation: Option<(f64, f64, f64)>,
}

pub fn tangent_bound_check(nl: &Nonlinearity, a: f64) -> Result<TangentCheck> {
    if !nl.has_finite_radius() {
        return Err(Error::InfiniteRadius);
    }
    tangent_bound_check_with_radius(nl, a, nl.radius())
}

/// Tangent-line check against an explicit radius (which may differ from the
/// entry's own `r`, e.g. to exercise a deliberately false bound).
pub fn tangent_bound_check_with_radius(nl: &Nonlinearity, a: f64, r: f64) -> Result<TangentCheck> {
    if !(a > 0.0 && r.is_finite() && r > 0.0) {
        return Err(Error::Config(format!("tangent check needs a > 0 and finite r > 0 (a = {a}, r = {r})")));
    }
    let slope = 4.0 * a / (r * r);
    let hi = (r * (1.0 - RADIUS_GUARD)).min(nl.guard_limit());
    let n = DEFAULT_SAMPLES;
    for k in 1..=n {
        let u = hi * k as f64 / n as f64;
        let f = nl.f(u)?;
        let line = slope * u;
        if f < line * (1.0 - 1e-12) {
            return Ok(TangentCheck {
                holds: false,
                first_violation: Some((u, f, line)),
            });
        }
    }
    Ok(TangentCheck {
        holds: true,
        first_violation: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(pairs: &[(&str, f64)]) -> Params {
        pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
    }

    fn all_entries() -> Vec<Nonlinearity> {
        vec![
            catalog_lookup("constant_load", &Params::new()).unwrap(),
            catalog_lookup("inverse_square", &Params::new()).unwrap(),
            catalog_lookup("exponential", &Params::new()).unwrap(),
            catalog_lookup("power", &p(&[("p", 3.0)])).unwrap(),
            catalog_lookup("cnt_actuator", &p(&[("beta_n", 1.0), ("n", 4.0)])).unwrap(),
            catalog_lookup(
                "nanobridge_single",
                &p(&[("beta_vdw", 0.5), ("alpha", 1.0), ("delta", 0.2), ("k", 10.0)]),
            )
            .unwrap(),
            catalog_lookup(
                "nanobridge_double",
                &p(&[("beta_vdw", 0.5), ("alpha", 1.0), ("delta", 0.2), ("k", 10.0)]),
            )
            .unwrap(),
            catalog_lookup(
                "casimir_actuator",
                &p(&[("beta_cas", 0.5), ("alpha", 1.0), ("delta", 0.2), ("gamma", 0.3)]),
            )
            .unwrap(),
            catalog_lookup("regularized", &p(&[("eps", 0.1), ("m", 4.0)])).unwrap(),
        ]
    }

    #[test]
    fn inverse_square_values() {
        let nl = catalog_lookup("inverse_square", &Params::new()).unwrap();
        assert_eq!(nl.f(0.0).unwrap(), 1.0);
        assert_eq!(nl.f(0.5).unwrap(), 4.0);
        assert_eq!(nl.radius(), 1.0);
    }

    #[test]
    fn constant_load_is_flat() {
        let nl = catalog_lookup("constant_load", &Params::new()).unwrap();
        assert_eq!(nl.f(0.3).unwrap(), 1.0);
        assert_eq!(nl.f(42.0).unwrap(), 1.0);
        assert!(nl.radius().is_infinite());
        assert!(nl.is_linear_reference());
    }

    #[test]
    fn cnt_actuator_n4() {
        let nl = catalog_lookup("cnt_actuator", &p(&[("beta_n", 1.0), ("n", 4.0)])).unwrap();
        assert_eq!(nl.f(0.5).unwrap(), 16.0);
        assert_eq!(nl.radius(), 1.0);
    }

    #[test]
    fn radii_of_log_models() {
        let single = catalog_lookup(
            "nanobridge_single",
            &p(&[("beta_vdw", 0.5), ("alpha", 1.0), ("delta", 0.0), ("k", 10.0)]),
        )
        .unwrap();
        assert!((single.radius() - 0.95).abs() < 1e-15);
        let double = catalog_lookup(
            "nanobridge_double",
            &p(&[("beta_vdw", 0.5), ("alpha", 1.0), ("delta", 0.0), ("k", 0.5)]),
        )
        .unwrap();
        assert_eq!(double.radius(), 0.5);
        let err = catalog_lookup(
            "nanobridge_double",
            &p(&[("beta_vdw", 0.5), ("alpha", 1.0), ("delta", 0.0), ("k", 1.0)]),
        );
        assert!(matches!(err, Err(Error::InvalidParam { .. })));
    }

    #[test]
    fn lookup_errors() {
        assert!(matches!(
            catalog_lookup("nope", &Params::new()),
            Err(Error::UnknownModel(_))
        ));
        assert!(matches!(
            catalog_lookup("cnt_actuator", &p(&[("beta_n", 1.0)])),
            Err(Error::MissingParam { .. })
        ));
        assert!(matches!(
            catalog_lookup("cnt_actuator", &p(&[("beta_n", -1.0), ("n", 2.0)])),
            Err(Error::InvalidParam { .. })
        ));
        assert!(matches!(
            catalog_lookup("inverse_square", &p(&[("x", 1.0)])),
            Err(Error::InvalidParam { .. })
        ));
    }

    #[test]
    fn json_lookup() {
        let v: serde_json::Value = serde_json::json!({"eps": 0.1, "m": 4});
        let nl = catalog_lookup_json("regularized", &v).unwrap();
        assert_eq!(nl.params()["m"], 4.0);
        assert!(catalog_lookup_json("regularized", &serde_json::json!([1])).is_err());
    }

    #[test]
    fn guard_rejects_pole() {
        let nl = catalog_lookup("inverse_square", &Params::new()).unwrap();
        assert!(matches!(nl.f(1.0), Err(Error::Domain { .. })));
        assert!(matches!(nl.f(-1e-3), Err(Error::Domain { .. })));
        assert!(nl.f(1.0 - 2e-8).is_ok());
    }

    fn interior_points(nl: &Nonlinearity) -> Vec<f64> {
        let top = if nl.has_finite_radius() { 0.98 * nl.radius() } else { 5.0 };
        (1..=100).map(|k| top * k as f64 / 101.0).collect()
    }

    #[test]
    fn derivatives_match_finite_differences() {
        for nl in all_entries() {
            let h = if nl.has_finite_radius() { 1e-6 * nl.radius() } else { 1e-6 };
            for u in interior_points(&nl) {
                let (_, f1, f2) = nl.eval(u).unwrap();
                let fd1 = (nl.f(u + h).unwrap() - nl.f(u - h).unwrap()) / (2.0 * h);
                let fd2 = (nl.f1(u + h).unwrap() - nl.f1(u - h).unwrap()) / (2.0 * h);
                let scale1 = f1.abs().max(nl.f(u).unwrap().abs() * 1e-3).max(1e-12);
                let scale2 = f2.abs().max(f1.abs() * 1e-3).max(1e-12);
                assert!((fd1 - f1).abs() <= 1e-5 * scale1, "{} f' at {u}: {f1} vs {fd1}", nl.name());
                assert!((fd2 - f2).abs() <= 1e-5 * scale2, "{} f'' at {u}: {f2} vs {fd2}", nl.name());
            }
        }
    }

    #[test]
    fn primitive_matches_f() {
        for nl in all_entries() {
            let h = if nl.has_finite_radius() { 1e-6 * nl.radius() } else { 1e-6 };
            assert_eq!(nl.primitive(0.0).unwrap().abs(), 0.0, "{}", nl.name());
            for u in interior_points(&nl) {
                let fd = (nl.primitive(u + h).unwrap() - nl.primitive(u - h).unwrap()) / (2.0 * h);
                let f = nl.f(u).unwrap();
                assert!((fd - f).abs() <= 1e-6 * f.abs().max(1.0), "{} F' at {u}: {fd} vs {f}", nl.name());
            }
        }
    }

    #[test]
    fn quadrature_primitive_agrees_with_closed_form() {
        for nl in all_entries() {
            for u in interior_points(&nl).into_iter().step_by(9) {
                let exact = nl.primitive(u).unwrap();
                let quad = nl.quadrature_primitive(u).unwrap();
                assert!((exact - quad).abs() <= 1e-9 * exact.abs().max(1.0), "{} at {u}", nl.name());
            }
        }
        let nl = catalog_lookup("exponential", &Params::new()).unwrap().with_quadrature_primitive();
        assert!(!nl.has_analytic_primitive());
        assert!((nl.primitive(1.0).unwrap() - (1f64.exp() - 1.0)).abs() < 1e-12);
    }

    #[test]
    fn deterministic_lookup() {
        let a = all_entries();
        let b = all_entries();
        for (x, y) in a.iter().zip(&b) {
            for u in interior_points(x) {
                assert_eq!(x.eval(u).unwrap(), y.eval(u).unwrap());
            }
        }
    }

    #[test]
    fn hypotheses_inverse_square() {
        let nl = catalog_lookup("inverse_square", &Params::new()).unwrap();
        let rep = check_hypotheses(&nl, DEFAULT_SAMPLES).unwrap();
        assert!(rep.passes());
        assert!(rep.a_is_exact);
        assert_eq!(rep.a_estimate, Some(1.0));
        assert!((rep.a_numeric.unwrap() - 1.0).abs() < 1e-7);
    }

    #[test]
    fn hypotheses_exponential() {
        let nl = catalog_lookup("exponential", &Params::new()).unwrap();
        let rep = check_hypotheses(&nl, DEFAULT_SAMPLES).unwrap();
        assert!(rep.positivity_ok && rep.increasing_ok && rep.convex_ok);
        assert_eq!(rep.a_estimate, None);
        assert_eq!(rep.liminf_ok, None);
        assert!(rep.passes());
    }

    #[test]
    fn hypotheses_regularized_not_increasing() {
        let nl = catalog_lookup("regularized", &p(&[("eps", 0.1), ("m", 4.0)])).unwrap();
        let rep = check_hypotheses(&nl, DEFAULT_SAMPLES).unwrap();
        assert!(!rep.increasing_ok);
        assert!(!rep.passes());
        assert!(rep.notes.iter().any(|n| n.starts_with("f'(u) > 0 violated")));
        // Independent check: f' is negative close to the pole.
        let u = 1.0 - 0.05;
        assert!(nl.f1(u).unwrap() < 0.0);
    }

    #[test]
    fn hypotheses_liminf_failure() {
        let nl = catalog_lookup("cnt_actuator", &p(&[("beta_n", 1.0), ("n", 0.5)])).unwrap();
        let rep = check_hypotheses(&nl, 1000).unwrap();
        assert_eq!(rep.liminf_ok, Some(false));
        assert!(!rep.passes());
    }

    #[test]
    fn hypotheses_catalog_models_pass() {
        for nl in all_entries() {
            if matches!(nl.name(), "constant_load" | "regularized") {
                continue;
            }
            let rep = check_hypotheses(&nl, DEFAULT_SAMPLES).unwrap();
            assert!(rep.passes(), "{}: {:?}", nl.name(), rep.notes);
            if let Some(a) = rep.a_estimate {
                let r = nl.radius();
                for k in 0..1000 {
                    let u = RADIUS_GUARD * r + (nl.guard_limit() - RADIUS_GUARD * r) * k as f64 / 999.0;
                    assert!((r - u) * nl.f(u).unwrap() >= a * (1.0 - 1e-9), "{}", nl.name());
                }
            }
        }
    }

    #[test]
    fn hypotheses_need_enough_samples() {
        let nl = catalog_lookup("inverse_square", &Params::new()).unwrap();
        assert!(check_hypotheses(&nl, 10).is_err());
    }

    #[test]
    fn tangent_bound() {
        let nl = catalog_lookup("inverse_square", &Params::new()).unwrap();
        assert!(tangent_bound_check(&nl, 1.0).unwrap().holds);
        assert!(nl.f(0.5).unwrap() >= 4.0 * 0.5);

        let cnt = catalog_lookup("cnt_actuator", &p(&[("beta_n", 1.0), ("n", 4.0)])).unwrap();
        let a = check_hypotheses(&cnt, DEFAULT_SAMPLES).unwrap().a_estimate.unwrap();
        assert!(tangent_bound_check(&cnt, a).unwrap().holds);

        let flat = catalog_lookup("constant_load", &Params::new()).unwrap();
        assert!(matches!(tangent_bound_check(&flat, 10.0), Err(Error::InfiniteRadius)));
        let check = tangent_bound_check_with_radius(&flat, 10.0, 1.0).unwrap();
        assert!(!check.holds);
        let (u, f, line) = check.first_violation.unwrap();
        assert!(f < line && u > 0.0 && u <= 0.025 + 1e-3);
    }
}
