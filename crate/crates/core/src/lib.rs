//! Continuation of positive solutions of the clamped beam problem
//!
//! ```text
//! u''''(x) = λ f(u(x)),   0 < x < 1,
//! u(0) = u(1) = u'(0) = u'(1) = 0,
//! ```
//!
//! for convex increasing loads `f`, possibly singular at `u = r`.
//!
//! The solution curve is traced by prescribing the midpoint deflection
//! `p = u(1/2)` and solving for `(λ, u)` on a uniform grid, which passes the
//! fold `λ₀` without degenerating. Every accepted point is checked for the
//! expected shape (symmetry, two inflections, positive boundary curvature)
//! and the curve as a whole for a single fold, an exact solution count,
//! the eigenvalue bound on `λ₀` and, for singular loads, convergence of the
//! upper branch to the piecewise cubic `w(x) = 12 r x² − 16 r x³`.
//!
//! ```no_run
//! use beamfold::{catalog_lookup, ContinuationConfig, DiscreteProblem, Params, trace_curve};
//!
//! let nl = catalog_lookup("inverse_square", &Params::new()).unwrap();
//! let dp = DiscreteProblem::new(nl, 501).unwrap();
//! let curve = trace_curve(&dp, &ContinuationConfig::for_problem(&dp)).unwrap();
//! println!("fold at lambda = {:.6}, p = {:.4}", curve.lambda0, curve.p0);
//! ```

pub mod banded;
pub mod checks;
pub mod continuation;
pub mod error;
pub mod mesh;
pub mod newton;
pub mod nonlinearity;
pub mod report;
pub mod spectral;

pub use banded::{banded_solve, BandMatrix, BandedSystem, Border};
pub use checks::{
    apriori_monitor, endpoint_convergence, endpoint_profile, energy_residual, verify_solution_shape,
    EndpointProfile, EndpointTable, ShapeReport,
};
pub use continuation::{
    arclength_step, locate_fold, multiplicity_at, trace_curve, BifurcationCurve, ContinuationConfig, CurvePoint,
    FoldFit, Mode, Multiplicity, Termination,
};
pub use error::{Error, Result};
pub use mesh::{assemble_jacobian, assemble_residual, derived_boundary_values, BeamSolution, DiscreteProblem};
pub use newton::{newton_solve, solve_at_max, NewtonConfig};
pub use nonlinearity::{catalog_lookup, check_hypotheses, tangent_bound_check, HypothesisReport, Nonlinearity, Params};
pub use spectral::{beam_principal_eigenvalue, lambda_upper_bound, linearized_smallest_eigenvalue, EigenEstimate};
