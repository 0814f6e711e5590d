//! Centralized check tolerances.
//!
//! Every threshold used by a structural validation lives here so that no
//! module invents its own magic number. Numerical *comparison* tolerances
//! for the cross-check suite live with the suite itself.

/// Jacobi identity residual, per component, for stored structure constants.
pub const JACOBI: f64 = 1e-12;

/// Subalgebra closure: m-components of h-h brackets.
pub const SUBALGEBRA: f64 = 1e-12;

/// Reductivity: h-components of h-m brackets.
pub const REDUCTIVE: f64 = 1e-12;

/// Commutator consistency of a matrix representation, per entry.
pub const REP_COMMUTATOR: f64 = 1e-10;

/// Infinitesimal Ad(H)-invariance of a Minkowski norm: `g_y(y, [z,y]_m)`.
pub const AD_H_INVARIANCE: f64 = 1e-8;

/// Infinitesimal equivariance of a spray vector field.
pub const EQUIVARIANCE: f64 = 1e-6;

/// Unimodularity of the isotropy action on g/h: trace of ad(z) on m.
pub const UNIMODULAR: f64 = 1e-10;

/// Relative cone-exit threshold for ODE integration on m \ {0}.
pub const CONE_EXIT_REL: f64 = 1e-9;

/// Flag degeneracy threshold for the flag-curvature denominator.
pub const DEGENERATE_FLAG: f64 = 1e-12;

/// Default truncation tolerance for the dexp series.
pub const DEXP_SERIES: f64 = 1e-15;

/// Residual bound for the h-component check in curve lifting.
pub const LIFT_H_RESIDUAL: f64 = 1e-6;
