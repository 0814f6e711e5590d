//! Numerical engine for homogeneous spray and Finsler geometry.
//!
//! Given a Lie algebra with a decomposition g = h + m and a Minkowski norm
//! on m (or a directly supplied spray vector field), the crate computes the
//! spray vector field and connection operator, integrates geodesics and
//! parallel transports as ODEs on m, and evaluates S-, Landsberg-, and
//! Riemann-curvature. Every homogeneous formula can be cross-checked
//! against an independent local-coordinate oracle built on the exponential
//! chart.
//!
//! Conventions fixed throughout:
//! - basis indices 0..dim_m span m, the rest span h;
//! - the connected isotropy group is encoded only through h, so reductivity
//!   and invariance are checked at the infinitesimal level;
//! - the trivialized differential of exp follows the left convention
//!   T_x(v) = sum_k (-ad_x)^k v / (k+1)!, pinned by a matrix-exponential
//!   finite-difference test.

pub mod chart;
pub mod cli;
pub mod compare;
pub mod dynamics;
pub mod error;
pub mod fd;
pub mod lie_algebra;
pub mod linalg;
pub mod minkowski;
pub mod scene;
pub mod spray;
pub mod textio;
pub mod tol;

pub use chart::{ChartConfig, ChartMetric, TransportMode};
pub use dynamics::{
    integrate_geodesic, lift_curve, linear_transport, nonlinear_transport, reconstruct_group_curve,
    rho_flow_check, CurveSource, GroupTrajectory, IntegratorConfig, Trajectory,
};
pub use error::{Error, Result};
pub use lie_algebra::{preset, preset_with, LieAlgebra, MatrixRepresentation, Preset};
pub use minkowski::{CallbackNorm, EuclideanNorm, MinkowskiNorm, RandersNorm};
pub use scene::{BuiltScene, Scene};
pub use spray::{FdScheme, SprayModel, SpraySource};
