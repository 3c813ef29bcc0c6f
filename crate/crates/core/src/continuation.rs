//! Tracing the solution curve, fold location and multiplicity queries.
//!
//! The default parameterization prescribes the midpoint value `p` and solves
//! for `(λ, U)`; the bordered system stays regular through the fold. A
//! pseudo-arclength mode with a weighted secant tangent is available for
//! loads where global parameterization by `p` is not known to hold.

use serde::Serialize;

use crate::checks::{verify_solution_shape, ShapeReport};
use crate::error::{Error, Result};
use crate::mesh::{max_abs, BeamSolution, DiscreteProblem};
use crate::newton::{bordered_newton, newton_solve, solve_at_max, Constraint, NewtonConfig};
use crate::nonlinearity::{check_hypotheses, DEFAULT_SAMPLES, U_CAP};
use crate::spectral::linearized_smallest_eigenvalue;

/// Sign changes of Δλ below this fraction of `max|λ|` are ignored.
pub const TURN_HYSTERESIS: f64 = 1e-10;
const MAX_ARC_HALVINGS: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    MaxValue,
    Arclength,
}

impl Mode {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "max" => Some(Mode::MaxValue),
            "arclength" => Some(Mode::Arclength),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Mode::MaxValue => "max",
            Mode::Arclength => "arclength",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    ReachedPMax,
    LambdaMin,
    LambdaMax,
    StepFailure,
    MaxSteps,
}

impl Termination {
    pub fn parse(s: &str) -> Option<Self> {
        [
            Termination::ReachedPMax,
            Termination::LambdaMin,
            Termination::LambdaMax,
            Termination::StepFailure,
            Termination::MaxSteps,
        ]
        .into_iter()
        .find(|t| t.as_str() == s)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Termination::ReachedPMax => "reached_p_max",
            Termination::LambdaMin => "lambda_min",
            Termination::LambdaMax => "lambda_max",
            Termination::StepFailure => "step_failure",
            Termination::MaxSteps => "max_steps",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Diagnostics {
    pub symmetry_err: f64,
    pub inflection_count: usize,
    pub energy_dev: f64,
    pub d2_0: f64,
    pub d3_max: f64,
    pub shape_ok: bool,
}

impl From<&ShapeReport> for Diagnostics {
    fn from(r: &ShapeReport) -> Self {
        Diagnostics {
            symmetry_err: r.symmetry_err,
            inflection_count: r.inflection_count,
            energy_dev: r.energy_dev,
            d2_0: r.d2_0,
            d3_max: r.d3_bound,
            shape_ok: r.passes(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurvePoint {
    pub p: f64,
    pub lambda: f64,
    pub solution: BeamSolution,
    pub smallest_eig: Option<f64>,
    pub diagnostics: Diagnostics,
}

impl CurvePoint {
    pub fn from_solution(dp: &DiscreteProblem, solution: BeamSolution, with_eig: bool) -> Result<Self> {
        let shape = verify_solution_shape(dp, &solution);
        let smallest_eig = if with_eig {
            Some(linearized_smallest_eigenvalue(dp, &solution)?.value)
        } else {
            None
        };
        Ok(CurvePoint {
            p: solution.p,
            lambda: solution.lambda,
            diagnostics: Diagnostics::from(&shape),
            smallest_eig,
            solution,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BifurcationCurve {
    pub model: String,
    pub n: usize,
    pub mode: Mode,
    pub points: Vec<CurvePoint>,
    pub lambda0: f64,
    pub p0: f64,
    /// Index of the accepted point with the largest λ, when it is interior.
    pub fold_index: Option<usize>,
    pub fold_absent: bool,
    pub termination: Termination,
    pub exploratory: bool,
    /// Steps rejected by the shape gate.
    pub rejected_shape: usize,
}

impl BifurcationCurve {
    pub fn pl(&self) -> Vec<(f64, f64)> {
        self.points.iter().map(|pt| (pt.p, pt.lambda)).collect()
    }

    /// Interior local maxima and minima of λ along the curve.
    pub fn turning_points(&self) -> (usize, usize) {
        let lam: Vec<f64> = self.points.iter().map(|p| p.lambda).collect();
        turning_points(&lam)
    }
}

/// Counts interior maxima and minima of a sequence, ignoring steps below
/// `TURN_HYSTERESIS · max|v|`.
pub fn turning_points(v: &[f64]) -> (usize, usize) {
    let scale = max_abs(v);
    let mut last = 0i8;
    let (mut maxima, mut minima) = (0, 0);
    for w in v.windows(2) {
        let d = w[1] - w[0];
        if d.abs() <= TURN_HYSTERESIS * scale {
            continue;
        }
        let s = if d > 0.0 { 1 } else { -1 };
        if last == 1 && s == -1 {
            maxima += 1;
        } else if last == -1 && s == 1 {
            minima += 1;
        }
        last = s;
    }
    (maxima, minima)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ContinuationConfig {
    pub p_start: f64,
    pub p_max_fraction: f64,
    /// Upper end of the trace when `r = ∞`.
    pub p_cap: f64,
    pub dp_init: f64,
    pub dp_min: f64,
    pub dp_max: f64,
    /// Stop once λ falls below `lambda_min_fraction · λ₀` past the fold (finite `r` only).
    pub lambda_min_fraction: f64,
    /// Arclength mode stops above this λ.
    pub lambda_max: f64,
    pub mode: Mode,
    /// Initial arclength step; `None` uses the distance between the first two points.
    pub ds_init: Option<f64>,
    pub max_steps: usize,
    pub exploratory: bool,
    pub compute_eigs: bool,
    pub newton: NewtonConfig,
}

impl ContinuationConfig {
    /// Defaults scaled to the load's singularity radius.
    pub fn for_problem(dp: &DiscreteProblem) -> Self {
        let r = dp.nl().radius();
        let s = r.min(1.0);
        ContinuationConfig {
            p_start: 1e-3 * s,
            p_max_fraction: 0.999,
            p_cap: U_CAP,
            dp_init: 1e-2 * s,
            dp_min: 1e-6 * s,
            dp_max: if r.is_finite() { 1e-2 * s } else { 1.0 },
            lambda_min_fraction: 1e-6,
            lambda_max: 1e3,
            mode: Mode::MaxValue,
            ds_init: None,
            max_steps: 20_000,
            exploratory: false,
            compute_eigs: true,
            newton: NewtonConfig::default(),
        }
    }

    pub fn p_max(&self, r: f64) -> f64 {
        if r.is_finite() {
            self.p_max_fraction * r
        } else {
            self.p_cap
        }
    }

    pub fn validate(&self, r: f64) -> Result<()> {
        self.newton.validate()?;
        let p_max = self.p_max(r);
        if !(self.p_start > 0.0 && self.p_start < p_max) {
            return Err(Error::Config(format!("need 0 < p_start < p_max ({} vs {p_max})", self.p_start)));
        }
        if !(self.p_max_fraction > 0.0 && self.p_max_fraction < 1.0) {
            return Err(Error::Config(format!("p_max_fraction = {} outside (0, 1)", self.p_max_fraction)));
        }
        if !(self.dp_min > 0.0 && self.dp_min <= self.dp_init && self.dp_init <= self.dp_max) {
            return Err(Error::Config(format!(
                "need 0 < dp_min <= dp_init <= dp_max ({}, {}, {})",
                self.dp_min, self.dp_init, self.dp_max
            )));
        }
        Ok(())
    }
}

/// Vertex of the parabola through the three points around the largest λ.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FoldFit {
    pub lambda0: f64,
    pub p0: f64,
    pub index: Option<usize>,
    pub absent: bool,
}

/// Fold from `(p, λ)` samples: quadratic fit through the bracketing triple
/// of the largest λ, or the edge value with `absent` set when the maximum
/// sits at an end of the sequence.
pub fn locate_fold(points: &[(f64, f64)]) -> FoldFit {
    if points.is_empty() {
        return FoldFit {
            lambda0: f64::NAN,
            p0: f64::NAN,
            index: None,
            absent: true,
        };
    }
    let (k, &(pk, lk)) = points
        .iter()
        .enumerate()
        .max_by(|a, b| a.1 .1.total_cmp(&b.1 .1))
        .expect("non-empty");
    if k == 0 || k + 1 == points.len() {
        return FoldFit {
            lambda0: lk,
            p0: pk,
            index: None,
            absent: true,
        };
    }
    let (x0, y0) = points[k - 1];
    let (x1, y1) = points[k];
    let (x2, y2) = points[k + 1];
    let d1 = (y1 - y0) / (x1 - x0);
    let d2 = (y2 - y1) / (x2 - x1);
    let a = (d2 - d1) / (x2 - x0);
    let (mut p0, mut lambda0) = (x1, y1);
    if a < 0.0 {
        // y = y0 + d1 (x - x0) + a (x - x0)(x - x1)
        let xv = (0.5 * (x0 + x1) - d1 / (2.0 * a)).clamp(x0, x2);
        let yv = y0 + d1 * (xv - x0) + a * (xv - x0) * (xv - x1);
        if yv >= y1 {
            p0 = xv;
            lambda0 = yv;
        }
    }
    FoldFit {
        lambda0,
        p0,
        index: Some(k),
        absent: false,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Multiplicity {
    pub count: usize,
    /// The query lies beyond the traced part of a branch, so crossings may be missing.
    pub truncated: bool,
}

/// Number of curve points with `λ = lambda_q`, from crossings of the
/// `(λ, p)` polyline. Crossings within the fold-fit tolerance of `λ₀` merge.
pub fn multiplicity_at(curve: &BifurcationCurve, lambda_q: f64) -> Multiplicity {
    let lam: Vec<f64> = curve.points.iter().map(|p| p.lambda).collect();
    if lam.is_empty() {
        return Multiplicity {
            count: 0,
            truncated: true,
        };
    }
    let max_l = lam.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let first = lam[0];
    let last = *lam.last().expect("non-empty");

    if !curve.fold_absent {
        let tol = (curve.lambda0 - max_l).max(1e-9 * curve.lambda0.abs());
        if (lambda_q - curve.lambda0).abs() <= tol {
            return Multiplicity {
                count: 1,
                truncated: false,
            };
        }
        if lambda_q > curve.lambda0 {
            return Multiplicity {
                count: 0,
                truncated: false,
            };
        }
    }
    let mut count = 0;
    for (i, w) in lam.windows(2).enumerate() {
        let (a, b) = (w[0] - lambda_q, w[1] - lambda_q);
        if a == 0.0 && i > 0 {
            // counted through the previous segment's endpoint check
            continue;
        }
        if a * b < 0.0 || b == 0.0 || (a == 0.0 && i == 0) {
            count += 1;
        }
    }
    let below_start = lambda_q < first;
    let beyond_end = if curve.fold_absent {
        lambda_q > last && lambda_q > max_l
    } else {
        lambda_q < last
    };
    Multiplicity {
        count,
        truncated: below_start || beyond_end,
    }
}

fn hypothesis_gate(dp: &DiscreteProblem, cfg: &ContinuationConfig) -> Result<bool> {
    let nl = dp.nl();
    let report = check_hypotheses(nl, DEFAULT_SAMPLES)?;
    if report.passes() || nl.is_linear_reference() {
        return Ok(false);
    }
    if !cfg.exploratory {
        let why = report.first_violation().unwrap_or("hypotheses not satisfied").to_string();
        return Err(Error::Hypothesis(why));
    }
    if cfg.mode != Mode::Arclength {
        return Err(Error::Config("exploratory entries must be traced in arclength mode".into()));
    }
    Ok(true)
}

/// Clips a predictor into `[0, cap]`, with `cap` at most the guarded limit.
fn clamp_guess(dp: &DiscreteProblem, u: &mut [f64], cap: f64) {
    let top = cap.min(dp.nl().guard_limit());
    for x in u.iter_mut() {
        *x = x.clamp(0.0, top);
    }
}

fn accept(dp: &DiscreteProblem, sol: BeamSolution, cfg: &ContinuationConfig, gate: bool) -> Result<Option<CurvePoint>> {
    let pt = CurvePoint::from_solution(dp, sol, cfg.compute_eigs)?;
    if gate && !pt.diagnostics.shape_ok {
        return Ok(None);
    }
    Ok(Some(pt))
}

fn start_point(dp: &DiscreteProblem, cfg: &ContinuationConfig, p: f64, gate: bool) -> Result<CurvePoint> {
    let f0 = dp.nl().f(0.0)?;
    if !(f0 > 0.0) {
        return Err(Error::TraceFailed {
            p,
            reason: "f(0) must be positive to seed the trace".into(),
        });
    }
    let lambda = 384.0 * p / f0;
    let guess = dp.linear_guess(lambda)?;
    let fail = |e: Error| Error::TraceFailed {
        p,
        reason: e.to_string(),
    };
    let sol = solve_at_max(dp, p, (lambda, &guess), &cfg.newton).map_err(fail)?;
    accept(dp, sol, cfg, gate)?.ok_or_else(|| Error::TraceFailed {
        p,
        reason: "starting solution fails the shape checks".into(),
    })
}

/// Wraps accepted points into a curve with its fold annotation.
pub fn assemble_curve(
    dp: &DiscreteProblem,
    mode: Mode,
    points: Vec<CurvePoint>,
    termination: Termination,
    exploratory: bool,
    rejected_shape: usize,
) -> BifurcationCurve {
    let fit = locate_fold(&points.iter().map(|p| (p.p, p.lambda)).collect::<Vec<_>>());
    BifurcationCurve {
        model: dp.nl().name().to_string(),
        n: dp.n(),
        mode,
        points,
        lambda0: fit.lambda0,
        p0: fit.p0,
        fold_index: fit.index,
        fold_absent: fit.absent,
        termination,
        exploratory,
        rejected_shape,
    }
}

/// Traces the curve from `p_start` to `p_max` (or another termination).
pub fn trace_curve(dp: &DiscreteProblem, cfg: &ContinuationConfig) -> Result<BifurcationCurve> {
    let r = dp.nl().radius();
    cfg.validate(r)?;
    let exploratory = hypothesis_gate(dp, cfg)?;
    match cfg.mode {
        Mode::MaxValue => trace_max_value(dp, cfg, exploratory),
        Mode::Arclength => trace_arclength(dp, cfg, exploratory),
    }
}

fn trace_max_value(dp: &DiscreteProblem, cfg: &ContinuationConfig, exploratory: bool) -> Result<BifurcationCurve> {
    let r = dp.nl().radius();
    let p_max = cfg.p_max(r);
    let gate = !exploratory;
    let mut points = vec![start_point(dp, cfg, cfg.p_start, gate)?];
    let mut dp_step = cfg.dp_init;
    let mut streak = 0;
    let mut rejected = 0;
    let mut lambda_peak = points[0].lambda;
    let mut termination = Termination::MaxSteps;

    for _ in 0..cfg.max_steps {
        let last = points.last().expect("non-empty");
        if last.p >= p_max {
            termination = Termination::ReachedPMax;
            break;
        }
        if r.is_finite() {
            dp_step = dp_step.min((0.1 * (r - last.p)).max(cfg.dp_min));
        }
        let p_new = (last.p + dp_step).min(p_max);
        let step = p_new - last.p;

        // Secant predictor in p (first step: scale the profile).
        let (lambda_g, mut u_g) = if points.len() >= 2 {
            let prev = &points[points.len() - 2];
            let t = step / (last.p - prev.p);
            let u: Vec<f64> = last
                .solution
                .u
                .iter()
                .zip(&prev.solution.u)
                .map(|(a, b)| a + t * (a - b))
                .collect();
            (last.lambda + t * (last.lambda - prev.lambda), u)
        } else {
            let s = p_new / last.p;
            (last.lambda * s, last.solution.u.iter().map(|x| x * s).collect())
        };
        clamp_guess(dp, &mut u_g, p_new);
        let lambda_g = if lambda_g > 0.0 { lambda_g } else { 0.5 * last.lambda };

        let outcome = solve_at_max(dp, p_new, (lambda_g, &u_g), &cfg.newton)
            .and_then(|sol| accept(dp, sol, cfg, gate));
        match outcome {
            Ok(Some(pt)) => {
                lambda_peak = lambda_peak.max(pt.lambda);
                let past_fold = pt.lambda < lambda_peak;
                let lam = pt.lambda;
                points.push(pt);
                streak += 1;
                if streak >= 3 {
                    dp_step = (dp_step * 1.5).min(cfg.dp_max);
                    streak = 0;
                }
                if r.is_finite() && past_fold && lam <= cfg.lambda_min_fraction * lambda_peak {
                    termination = Termination::LambdaMin;
                    break;
                }
            }
            Ok(None) | Err(_) => {
                if matches!(outcome, Ok(None)) {
                    rejected += 1;
                }
                streak = 0;
                dp_step *= 0.5;
                if dp_step < cfg.dp_min {
                    termination = Termination::StepFailure;
                    break;
                }
            }
        }
    }
    Ok(assemble_curve(dp, cfg.mode, points, termination, exploratory, rejected))
}

/// Weighted inner product `h Σ aᵢbᵢ + θ² αβ` on `(U, λ)` pairs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArcMetric {
    pub h: f64,
    pub theta: f64,
}

impl ArcMetric {
    fn dot(&self, u1: &[f64], l1: f64, u2: &[f64], l2: f64) -> f64 {
        self.h * u1.iter().zip(u2).map(|(a, b)| a * b).sum::<f64>() + self.theta * self.theta * l1 * l2
    }

    fn dist(&self, a: &CurvePoint, b: &CurvePoint) -> f64 {
        let du: Vec<f64> = a.solution.u.iter().zip(&b.solution.u).map(|(x, y)| x - y).collect();
        let dl = a.lambda - b.lambda;
        self.dot(&du, dl, &du, dl).sqrt()
    }
}

/// One pseudo-arclength step of length `ds` along the secant through `prev`.
pub fn arclength_step(
    dp: &DiscreteProblem,
    prev: (&CurvePoint, &CurvePoint),
    ds: f64,
    metric: ArcMetric,
    cfg: &ContinuationConfig,
) -> Result<CurvePoint> {
    let (a, b) = prev;
    let du: Vec<f64> = b.solution.u.iter().zip(&a.solution.u).map(|(x, y)| x - y).collect();
    let dl = b.lambda - a.lambda;
    let norm = metric.dot(&du, dl, &du, dl).sqrt();
    if !(norm > 0.0) {
        return Err(Error::Config("arclength step needs two distinct points".into()));
    }
    let tu: Vec<f64> = du.iter().map(|x| x / norm).collect();
    let tl = dl / norm;

    let mut u_g: Vec<f64> = b.solution.u.iter().zip(&tu).map(|(x, t)| x + ds * t).collect();
    clamp_guess(dp, &mut u_g, f64::INFINITY);
    let l_g = b.lambda + ds * tl;

    // <t, (U, λ) − (U_b, λ_b)> = ds
    let row: Vec<f64> = tu.iter().map(|t| metric.h * t).collect();
    let corner = metric.theta * metric.theta * tl;
    let target = ds + metric.dot(&tu, tl, &b.solution.u, b.lambda);
    let con = Constraint { row, corner, target };

    let mut cur = ds;
    let mut last_err = None;
    for _ in 0..=MAX_ARC_HALVINGS {
        let attempt = if cur == ds {
            bordered_newton(dp, l_g, &u_g, &con, &cfg.newton)
        } else {
            let mut ug: Vec<f64> = b.solution.u.iter().zip(&tu).map(|(x, t)| x + cur * t).collect();
            clamp_guess(dp, &mut ug, f64::INFINITY);
            let c = Constraint {
                row: con.row.clone(),
                corner,
                target: cur + metric.dot(&tu, tl, &b.solution.u, b.lambda),
            };
            bordered_newton(dp, b.lambda + cur * tl, &ug, &c, &cfg.newton)
        };
        match attempt {
            Ok(sol) => {
                let changed = sol.u.iter().zip(&b.solution.u).any(|(x, y)| x != y);
                if changed {
                    return CurvePoint::from_solution(dp, sol, cfg.compute_eigs);
                }
                last_err = Some(Error::NoConvergence {
                    iterations: 0,
                    residual: 0.0,
                });
            }
            Err(e) => last_err = Some(e),
        }
        cur *= 0.5;
    }
    Err(last_err.unwrap_or(Error::NoConvergence {
        iterations: 0,
        residual: f64::NAN,
    }))
}

fn trace_arclength(dp: &DiscreteProblem, cfg: &ContinuationConfig, exploratory: bool) -> Result<BifurcationCurve> {
    let r = dp.nl().radius();
    let p_max = cfg.p_max(r);
    let gate = !exploratory;
    let first = start_point(dp, cfg, cfg.p_start, gate)?;
    let p1 = cfg.p_start + cfg.dp_init;
    let second = {
        let s = p1 / first.p;
        let guess: Vec<f64> = first.solution.u.iter().map(|x| x * s).collect();
        let sol = solve_at_max(dp, p1, (first.lambda * s, &guess), &cfg.newton).map_err(|e| Error::TraceFailed {
            p: p1,
            reason: e.to_string(),
        })?;
        accept(dp, sol, cfg, gate)?.ok_or_else(|| Error::TraceFailed {
            p: p1,
            reason: "second solution fails the shape checks".into(),
        })?
    };
    let h = dp.h();
    let unorm = (h * second.solution.u.iter().map(|x| x * x).sum::<f64>()).sqrt();
    let metric = ArcMetric {
        h,
        theta: unorm / second.lambda.abs().max(f64::MIN_POSITIVE),
    };
    let ds0 = cfg.ds_init.unwrap_or_else(|| metric.dist(&first, &second));
    let ds_min = ds0 * 1e-4;
    let ds_max = ds0 * 50.0;
    let mut ds = ds0;
    let mut points = vec![first, second];
    let mut streak = 0;
    let mut rejected = 0;
    let mut lambda_peak = points.iter().map(|p| p.lambda).fold(0.0, f64::max);
    let mut termination = Termination::MaxSteps;

    for _ in 0..cfg.max_steps {
        let n = points.len();
        let (a, b) = (&points[n - 2], &points[n - 1]);
        if b.p >= p_max * (1.0 - 1e-3) {
            termination = Termination::ReachedPMax;
            break;
        }
        // Keep the predicted midpoint inside the shrinking gap to r.
        if r.is_finite() {
            let dpds = (b.p - a.p) / metric.dist(a, b);
            if dpds > 0.0 {
                let room = (0.1 * (r - b.p)).min(p_max - b.p).max(0.0);
                ds = ds.min(room / dpds).max(ds_min);
            }
        }
        match arclength_step(dp, (a, b), ds, metric, cfg) {
            Ok(pt) if !gate || pt.diagnostics.shape_ok => {
                let lam = pt.lambda;
                let pp = pt.p;
                lambda_peak = lambda_peak.max(lam);
                points.push(pt);
                streak += 1;
                if streak >= 3 {
                    ds = (ds * 1.5).min(ds_max);
                    streak = 0;
                }
                if !(lam > 0.0) {
                    termination = Termination::LambdaMin;
                    break;
                }
                if lam > cfg.lambda_max {
                    termination = Termination::LambdaMax;
                    break;
                }
                if r.is_finite() && lam < lambda_peak && lam <= cfg.lambda_min_fraction * lambda_peak {
                    termination = Termination::LambdaMin;
                    break;
                }
                if pp >= p_max * (1.0 - 1e-3) {
                    termination = Termination::ReachedPMax;
                    break;
                }
            }
            Ok(_) => {
                rejected += 1;
                streak = 0;
                ds *= 0.5;
                if ds < ds_min {
                    termination = Termination::StepFailure;
                    break;
                }
            }
            Err(_) => {
                termination = Termination::StepFailure;
                break;
            }
        }
    }
    Ok(assemble_curve(dp, cfg.mode, points, termination, exploratory, rejected))
}

/// Distinct solutions found by Newton at fixed λ from a fan of starting
/// profiles `p · 16x²(1−x)²`.
pub fn multistart_solutions(dp: &DiscreteProblem, lambda: f64, amplitudes: &[f64], cfg: &NewtonConfig) -> Vec<BeamSolution> {
    let mut found: Vec<BeamSolution> = Vec::new();
    for &amp in amplitudes {
        let guess = dp.sample(|x| amp * 16.0 * x * x * (1.0 - x) * (1.0 - x));
        if let Ok(sol) = newton_solve(dp, lambda, &guess, cfg) {
            if sol.u.iter().any(|&v| v < 0.0) {
                continue;
            }
            let dup = found.iter().any(|s| {
                s.u.iter().zip(&sol.u).fold(0.0f64, |m, (a, b)| m.max((a - b).abs())) <= 1e-4
            });
            if !dup {
                found.push(sol);
            }
        }
    }
    found
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProbeResult {
    pub lambda: f64,
    pub curve_count: usize,
    pub oracle_count: usize,
}

/// Non-gating summary for loads outside the structural hypotheses.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExploratoryReport {
    pub model: String,
    /// Interior sign changes of Δλ along the arclength trace.
    pub sign_changes: usize,
    pub maxima: usize,
    pub minima: usize,
    pub probes: Vec<ProbeResult>,
}

/// Builds the exploratory report, or `None` if the multistart oracle
/// disagrees with the traced curve at one of the five probe values of λ.
///
/// Agreement means: solutions exist at the probe iff the curve crosses it,
/// and the oracle never finds more solutions than the curve has crossings.
pub fn exploratory_report(dp: &DiscreteProblem, curve: &BifurcationCurve) -> Option<ExploratoryReport> {
    let max_l = curve.points.iter().map(|p| p.lambda).fold(0.0, f64::max);
    let r = dp.nl().radius();
    let top = if r.is_finite() { 0.99 * r } else { 0.9 * U_CAP };
    let amplitudes: Vec<f64> = (1..=24).map(|k| top * k as f64 / 24.0).collect();
    let cfg = NewtonConfig {
        max_iters: 60,
        ..NewtonConfig::default()
    };
    let mut probes = Vec::new();
    for frac in [0.1, 0.3, 0.5, 0.7, 0.9] {
        let lambda = frac * max_l;
        let curve_count = multiplicity_at(curve, lambda).count;
        let oracle_count = multistart_solutions(dp, lambda, &amplitudes, &cfg).len();
        if (curve_count > 0) != (oracle_count > 0) || oracle_count > curve_count {
            return None;
        }
        probes.push(ProbeResult {
            lambda,
            curve_count,
            oracle_count,
        });
    }
    let (maxima, minima) = curve.turning_points();
    Some(ExploratoryReport {
        model: curve.model.clone(),
        sign_changes: maxima + minima,
        maxima,
        minima,
        probes,
    })
}
