#![allow(dead_code)]

use beamfold::{catalog_lookup, newton_solve, DiscreteProblem, NewtonConfig, Params};

pub fn params(kv: &[(&str, f64)]) -> Params {
    kv.iter().map(|(k, v)| (k.to_string(), *v)).collect()
}

pub fn problem(name: &str, kv: &[(&str, f64)], n: usize) -> DiscreteProblem {
    DiscreteProblem::new(catalog_lookup(name, &params(kv)).unwrap(), n).unwrap()
}

/// Bracket `[last convergent, first divergent]` for the fold value.
///
/// Marches λ upward from `u = 0` in steps of `step`, each Newton solve warm
/// started from the last converged profile, then bisects the first failing
/// interval to relative width `rtol`.
pub fn sweep_fold(dp: &DiscreteProblem, step: f64, rtol: f64) -> (f64, f64) {
    let cfg = NewtonConfig {
        max_iters: 60,
        ..NewtonConfig::default()
    };
    let mut lo = 0.0;
    let mut u = vec![0.0; dp.interior()];
    let mut hi = loop {
        let next = lo + step;
        match newton_solve(dp, next, &u, &cfg) {
            Ok(sol) => {
                lo = next;
                u = sol.u;
            }
            Err(_) => break next,
        }
        assert!(lo < 1e6, "sweep never diverged");
    };
    while hi - lo > rtol * lo {
        let mid = 0.5 * (lo + hi);
        match newton_solve(dp, mid, &u, &cfg) {
            Ok(sol) => {
                lo = mid;
                u = sol.u;
            }
            Err(_) => hi = mid,
        }
    }
    (lo, hi)
}

/// `u*(x) = λ x² (1 − x)² / 24` at the interior nodes.
pub fn quartic(dp: &DiscreteProblem, lambda: f64) -> Vec<f64> {
    (1..dp.n() - 1)
        .map(|i| {
            let x = dp.x(i);
            lambda * x * x * (1.0 - x) * (1.0 - x) / 24.0
        })
        .collect()
}

pub fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()))
}
