//! Shape, energy, endpoint and a-priori checks on solutions and curves.

use serde::Serialize;

use crate::continuation::BifurcationCurve;
use crate::error::{Error, Result};
use crate::mesh::{max_abs, BeamSolution, DiscreteProblem};

/// Sign changes of `u''` smaller than this fraction of `max|u''|` are ignored.
pub const INFLECTION_RTOL: f64 = 1e-10;
/// Allowed mirror defect relative to `p`.
pub const SYMMETRY_RTOL: f64 = 1e-7;
/// Per-step growth tolerated in the tail error sequences.
pub const TAIL_HYSTERESIS: f64 = 0.05;
/// Minimum number of upper-branch points used by [`endpoint_convergence`].
pub const TAIL_POINTS: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ShapeReport {
    pub symmetry_err: f64,
    pub symmetry_ok: bool,
    pub monotone_ok: bool,
    pub d2_0: f64,
    pub d2_ok: bool,
    pub inflection_count: usize,
    pub inflection_ok: bool,
    pub energy_dev: f64,
    /// `max|u'''|` from centered differences.
    pub d3_bound: f64,
}

impl ShapeReport {
    pub fn passes(&self) -> bool {
        self.symmetry_ok && self.monotone_ok && self.d2_ok && self.inflection_ok
    }

    pub fn failures(&self) -> Vec<&'static str> {
        let mut out = Vec::new();
        if !self.symmetry_ok {
            out.push("symmetry");
        }
        if !self.monotone_ok {
            out.push("monotone left half");
        }
        if !self.d2_ok {
            out.push("u''(0) > 0");
        }
        if !self.inflection_ok {
            out.push("two inflections");
        }
        out
    }
}

/// Number of sign changes in `v`, skipping entries with `|v| <= threshold`.
pub fn sign_changes(v: &[f64], threshold: f64) -> usize {
    let mut last = 0i8;
    let mut count = 0;
    for &x in v {
        if x.abs() <= threshold {
            continue;
        }
        let s = if x > 0.0 { 1 } else { -1 };
        if last != 0 && s != last {
            count += 1;
        }
        last = s;
    }
    count
}

/// Second differences `u''` at every full-grid node, the ends through the
/// reflected ghost values.
fn second_differences(dp: &DiscreteProblem, u: &[f64]) -> Vec<f64> {
    let g = dp.with_ghosts(u);
    let h2 = dp.h() * dp.h();
    (1..g.len() - 1).map(|c| (g[c - 1] - 2.0 * g[c] + g[c + 1]) / h2).collect()
}

/// Centered `u'''` at interior nodes (ghosts supply the outside neighbours).
fn third_differences(dp: &DiscreteProblem, u: &[f64]) -> Vec<f64> {
    let g = dp.with_ghosts(u);
    let h3 = dp.h().powi(3);
    (2..u.len() + 2)
        .map(|c| (g[c + 2] - 2.0 * g[c + 1] + 2.0 * g[c - 1] - g[c - 2]) / (2.0 * h3))
        .collect()
}

pub fn symmetry_error(dp: &DiscreteProblem, u: &[f64]) -> f64 {
    let full = dp.full(u);
    let n = full.len();
    (0..n / 2).fold(0.0, |m, i| m.max((full[i] - full[n - 1 - i]).abs()))
}

pub fn verify_solution_shape(dp: &DiscreteProblem, sol: &BeamSolution) -> ShapeReport {
    let u = &sol.u;
    let full = dp.full(u);
    let symmetry_err = symmetry_error(dp, u);
    let monotone_ok = (0..dp.mid()).all(|i| full[i + 1] - full[i] > 0.0);
    let d2 = second_differences(dp, u);
    let inflection_count = sign_changes(&d2, INFLECTION_RTOL * max_abs(&d2));
    let energy_dev = energy_residual(dp, sol).unwrap_or(f64::NAN);
    let d3_bound = max_abs(&third_differences(dp, u));
    ShapeReport {
        symmetry_err,
        symmetry_ok: symmetry_err <= SYMMETRY_RTOL * sol.p.abs(),
        monotone_ok,
        d2_0: sol.d2_0,
        d2_ok: sol.d2_0 > 0.0,
        inflection_count,
        inflection_ok: inflection_count == 2,
        energy_dev,
        d3_bound,
    }
}

/// Normalized deviation of `E = u'u''' − ½u''² − λF(u)` from its value at `x = 0`.
///
/// All derivatives, including the boundary value `E(0) = −½ (2u₁/h²)²`,
/// come from the same ghost-extended central differences, so the deviation
/// measures the discrete first integral rather than the O(h) mismatch
/// between one-sided and centered boundary formulas.
pub fn energy_residual(dp: &DiscreteProblem, sol: &BeamSolution) -> Result<f64> {
    let u = &sol.u;
    let h = dp.h();
    let g = dp.with_ghosts(u);
    let b = 2.0 * u[0] / (h * h);
    let e0 = -0.5 * b * b;
    let norm = (0.5 * b * b).max(1.0);
    let mut worst = 0.0f64;
    for i in 0..u.len() {
        let c = i + 2;
        let d1 = (g[c + 1] - g[c - 1]) / (2.0 * h);
        let d2 = (g[c + 1] - 2.0 * g[c] + g[c - 1]) / (h * h);
        let d3 = (g[c + 2] - 2.0 * g[c + 1] + 2.0 * g[c - 1] - g[c - 2]) / (2.0 * h * h * h);
        let big_f = dp.nl().primitive(u[i])?;
        let e = d1 * d3 - 0.5 * d2 * d2 - sol.lambda * big_f;
        worst = worst.max((e - e0).abs());
    }
    Ok(worst / norm)
}

/// Singular limit profile `w(x) = 12 r x² − 16 r x³` on `[0, 1/2]`, mirrored.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EndpointProfile {
    pub r: f64,
    /// Full-grid nodal values, endpoints included.
    pub w: Vec<f64>,
    /// Exact `w''(0) = 24 r`.
    pub d2_0: f64,
    /// Exact one-sided third derivatives at `x = 1/2`: `−96 r` and `+96 r`.
    pub d3_left: f64,
    pub d3_right: f64,
    /// `w''(0)` from the one-sided boundary fit.
    pub d2_0_numeric: f64,
    /// One-sided `w'(0)` (exact for cubics).
    pub d1_0_numeric: f64,
    pub d3_left_numeric: f64,
    pub d3_right_numeric: f64,
    /// `w(0) = w'(0) = 0`, `w(1/2) = r` and mirror symmetry, to rounding.
    pub conditions_ok: bool,
}

pub fn endpoint_value(r: f64, x: f64) -> f64 {
    let y = x.min(1.0 - x);
    // 12 r y² − 16 r y³, factored so that y = 1/2 gives r exactly
    r * (4.0 * y * y) * (3.0 - 4.0 * y)
}

/// Backward third difference ending two nodes left of the midpoint.
pub fn third_difference_left_of_mid(dp: &DiscreteProblem, full: &[f64]) -> f64 {
    let j = dp.mid() - 2;
    (full[j] - 3.0 * full[j - 1] + 3.0 * full[j - 2] - full[j - 3]) / dp.h().powi(3)
}

/// Forward third difference starting two nodes right of the midpoint.
pub fn third_difference_right_of_mid(dp: &DiscreteProblem, full: &[f64]) -> f64 {
    let j = dp.mid() + 2;
    (full[j + 3] - 3.0 * full[j + 2] + 3.0 * full[j + 1] - full[j]) / dp.h().powi(3)
}

pub fn endpoint_profile(r: f64, dp: &DiscreteProblem) -> Result<EndpointProfile> {
    if !r.is_finite() {
        return Err(Error::InfiniteRadius);
    }
    let n = dp.n();
    let mid = dp.mid();
    let mut w: Vec<f64> = (0..mid).map(|i| endpoint_value(r, dp.x(i))).collect();
    w.push(endpoint_value(r, 0.5));
    for i in mid + 1..n {
        w.push(w[n - 1 - i]);
    }
    let h = dp.h();
    let (d2_0_numeric, _) = crate::mesh::derived_boundary_values(dp, &w[1..n - 1]);
    let d1_0_numeric = (-11.0 * w[0] + 18.0 * w[1] - 9.0 * w[2] + 2.0 * w[3]) / (6.0 * h);
    let tiny = 64.0 * f64::EPSILON * r.abs().max(1.0);
    let symmetric = (0..n).all(|i| w[i] == w[n - 1 - i]);
    let conditions_ok = w[0] == 0.0
        && w[n - 1] == 0.0
        && (w[mid] - r).abs() <= tiny
        && d1_0_numeric.abs() <= tiny / h
        && symmetric;
    Ok(EndpointProfile {
        r,
        d2_0: 24.0 * r,
        d3_left: -96.0 * r,
        d3_right: 96.0 * r,
        d2_0_numeric,
        d1_0_numeric,
        d3_left_numeric: third_difference_left_of_mid(dp, &w),
        d3_right_numeric: third_difference_right_of_mid(dp, &w),
        w,
        conditions_ok,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TailRow {
    pub index: usize,
    pub p: f64,
    pub lambda: f64,
    /// `max|u − w|`.
    pub e0: f64,
    /// Max deviation of first divided differences.
    pub e1: f64,
    /// Max deviation of second divided differences.
    pub e2: f64,
    /// One-sided `u'''` left of the midpoint.
    pub d3_mid_left: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EndpointTable {
    pub r: f64,
    pub rows: Vec<TailRow>,
    pub e0_monotone: bool,
    pub e1_monotone: bool,
    pub e2_monotone: bool,
    /// `e0` at the last point below its value at the first tail point.
    pub e0_decreased: bool,
}

impl EndpointTable {
    pub fn last(&self) -> &TailRow {
        self.rows.last().expect("tail table is never empty")
    }

    /// Closest tail row to a given `p`.
    pub fn near(&self, p: f64) -> &TailRow {
        self.rows
            .iter()
            .min_by(|a, b| (a.p - p).abs().total_cmp(&(b.p - p).abs()))
            .expect("tail table is never empty")
    }
}

fn non_increasing(v: impl Iterator<Item = f64>) -> bool {
    let v: Vec<f64> = v.collect();
    v.windows(2).all(|w| w[1] <= w[0] * (1.0 + TAIL_HYSTERESIS))
}

/// Grid distances between upper-branch solutions and `w`.
///
/// The tail is every upper-branch point with `p ≥ 0.95 r`, or the last
/// [`TAIL_POINTS`] upper-branch points if that is more.
pub fn endpoint_convergence(dp: &DiscreteProblem, curve: &BifurcationCurve, r: f64) -> Result<EndpointTable> {
    if !r.is_finite() {
        return Err(Error::InfiniteRadius);
    }
    let required = 0.99 * r;
    let p_last = curve.points.last().map_or(0.0, |pt| pt.p);
    let start = curve.fold_index.map_or(0, |i| i + 1);
    let upper: Vec<usize> = (start..curve.points.len()).collect();
    if p_last < required || upper.len() < TAIL_POINTS {
        return Err(Error::TailNotReached { p_last, required });
    }
    let near_r = upper.iter().position(|&i| curve.points[i].p >= 0.95 * r).unwrap_or(upper.len());
    let first = near_r.min(upper.len() - TAIL_POINTS);
    let prof = endpoint_profile(r, dp)?;
    let w = &prof.w;
    let h = dp.h();

    let rows: Vec<TailRow> = upper[first..]
        .iter()
        .map(|&i| {
            let pt = &curve.points[i];
            let u = dp.full(&pt.solution.u);
            let e0 = u.iter().zip(w).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
            let e1 = (0..u.len() - 1).fold(0.0f64, |m, k| {
                m.max(((u[k + 1] - u[k]) - (w[k + 1] - w[k])).abs() / h)
            });
            let e2 = (1..u.len() - 1).fold(0.0f64, |m, k| {
                let du = u[k + 1] - 2.0 * u[k] + u[k - 1];
                let dw = w[k + 1] - 2.0 * w[k] + w[k - 1];
                m.max((du - dw).abs() / (h * h))
            });
            TailRow {
                index: i,
                p: pt.p,
                lambda: pt.lambda,
                e0,
                e1,
                e2,
                d3_mid_left: third_difference_left_of_mid(dp, &u),
            }
        })
        .collect();

    Ok(EndpointTable {
        r,
        e0_monotone: non_increasing(rows.iter().map(|r| r.e0)),
        e1_monotone: non_increasing(rows.iter().map(|r| r.e1)),
        e2_monotone: non_increasing(rows.iter().map(|r| r.e2)),
        e0_decreased: rows.last().map(|l| l.e0) < rows.first().map(|f| f.e0),
        rows,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AprioriReport {
    /// `max p / r`; `None` when `r` is infinite.
    pub max_p_over_r: Option<f64>,
    pub below_radius: bool,
    pub max_d2: f64,
    pub max_d3: f64,
    pub finite: bool,
    /// λ window `[λa, λb]` examined for the compact-interval bound.
    pub window: (f64, f64),
    pub window_max_p: Option<f64>,
    pub global_max_p: f64,
    /// Window maximum strictly below the global maximum.
    pub window_ok: bool,
    /// `r = ∞`: p kept growing to the end of the trace.
    pub unbounded_growth: bool,
}

/// Observed a-priori bounds with the window `[0.1 λ₀, λ₀]`.
pub fn apriori_monitor(dp: &DiscreteProblem, curve: &BifurcationCurve) -> AprioriReport {
    apriori_monitor_window(dp, curve, 0.1)
}

/// As [`apriori_monitor`] with window `[lo_fraction λ₀, λ₀]`.
pub fn apriori_monitor_window(dp: &DiscreteProblem, curve: &BifurcationCurve, lo_fraction: f64) -> AprioriReport {
    let r = dp.nl().radius();
    let global_max_p = curve.points.iter().map(|p| p.p).fold(0.0, f64::max);
    let mut max_d2 = 0.0f64;
    let mut max_d3 = 0.0f64;
    for pt in &curve.points {
        max_d2 = max_d2.max(max_abs(&second_differences(dp, &pt.solution.u)));
        max_d3 = max_d3.max(max_abs(&third_differences(dp, &pt.solution.u)));
    }
    let window = (lo_fraction * curve.lambda0, curve.lambda0);
    let window_max_p = curve
        .points
        .iter()
        .filter(|p| p.lambda >= window.0 && p.lambda <= window.1)
        .map(|p| p.p)
        .reduce(f64::max);
    let ps: Vec<f64> = curve.points.iter().map(|p| p.p).collect();
    AprioriReport {
        max_p_over_r: r.is_finite().then(|| global_max_p / r),
        below_radius: !r.is_finite() || global_max_p < r,
        max_d2,
        max_d3,
        finite: max_d2.is_finite() && max_d3.is_finite(),
        window,
        window_max_p,
        global_max_p,
        window_ok: window_max_p.is_some_and(|m| m < global_max_p),
        unbounded_growth: !r.is_finite() && ps.windows(2).all(|w| w[1] > w[0]) && ps.len() > 1,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::newton::{newton_solve, NewtonConfig};
    use crate::nonlinearity::{catalog_lookup, Params};

    fn problem(name: &str, n: usize) -> DiscreteProblem {
        DiscreteProblem::new(catalog_lookup(name, &Params::new()).unwrap(), n).unwrap()
    }

    fn linear_solution(n: usize, lambda: f64) -> (DiscreteProblem, BeamSolution) {
        let dp = problem("constant_load", n);
        let sol = newton_solve(&dp, lambda, &vec![0.0; dp.interior()], &NewtonConfig::default()).unwrap();
        (dp, sol)
    }

    #[test]
    fn sign_change_counting() {
        assert_eq!(sign_changes(&[1.0, -1.0, 1.0], 0.0), 2);
        assert_eq!(sign_changes(&[1.0, 1e-12, -1e-12, 1.0], 1e-10), 0);
        assert_eq!(sign_changes(&[], 0.0), 0);
    }

    #[test]
    fn linear_solution_shape() {
        let (dp, sol) = linear_solution(501, 38.4);
        let rep = verify_solution_shape(&dp, &sol);
        assert!(rep.passes(), "{:?}", rep.failures());
        assert_eq!(rep.inflection_count, 2);
        assert!(rep.symmetry_err <= 1e-7 * sol.p);
    }

    #[test]
    fn exact_quartic_shape() {
        let dp = problem("constant_load", 501);
        let lambda = 38.4;
        let u = dp.sample(|x| lambda * x * x * (1.0 - x) * (1.0 - x) / 24.0);
        let sol = BeamSolution::new(&dp, lambda, u).unwrap();
        let rep = verify_solution_shape(&dp, &sol);
        assert_eq!(rep.inflection_count, 2);
        assert!(rep.symmetry_err <= 1e-15);
    }

    #[test]
    fn corrupted_symmetry_detected() {
        let (dp, mut sol) = linear_solution(201, 38.4);
        sol.u[10] += 1e-3;
        let rep = verify_solution_shape(&dp, &sol);
        assert!(!rep.symmetry_ok);
        assert!(rep.failures().contains(&"symmetry"));
    }

    #[test]
    fn energy_constant_load() {
        let (dp, sol) = linear_solution(501, 38.4);
        assert!(energy_residual(&dp, &sol).unwrap() <= 5e-3);
    }

    #[test]
    fn energy_zero() {
        let dp = problem("inverse_square", 101);
        let sol = BeamSolution::new(&dp, 0.0, vec![0.0; dp.interior()]).unwrap();
        assert_eq!(energy_residual(&dp, &sol).unwrap(), 0.0);
    }

    #[test]
    fn endpoint_values() {
        let dp = problem("constant_load", 501);
        let prof = endpoint_profile(1.0, &dp).unwrap();
        assert_eq!(prof.w[125], 0.5);
        assert_eq!(prof.w[dp.mid()], 1.0);
        assert!(prof.conditions_ok);
        let two = endpoint_profile(2.0, &dp).unwrap();
        assert!((two.d2_0_numeric - 48.0).abs() <= 1e-2);
        assert!((prof.d3_left_numeric + 96.0).abs() <= 1e-6);
        assert!((prof.d3_right_numeric - 96.0).abs() <= 1e-6);
        assert!(matches!(endpoint_profile(f64::INFINITY, &dp), Err(Error::InfiniteRadius)));
    }

    #[test]
    fn endpoint_fourth_differences_vanish_off_mid() {
        let dp = problem("constant_load", 101);
        let prof = endpoint_profile(1.0, &dp).unwrap();
        let w = &prof.w;
        let mid = dp.mid();
        for i in 2..dp.n() - 2 {
            if (i as isize - mid as isize).abs() <= 1 {
                continue;
            }
            let d4 = w[i - 2] - 4.0 * w[i - 1] + 6.0 * w[i] - 4.0 * w[i + 1] + w[i + 2];
            assert!(d4.abs() <= 1e-14, "node {i}: {d4}");
        }
    }
}
