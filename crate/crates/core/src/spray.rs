//! Spray vector field, connection operator, and curvature operators on m.
//!
//! The spray vector field eta is either derived from a Minkowski norm (the
//! geodesic spray of the induced invariant metric, via an SPD solve) or
//! supplied directly as a positively 2-homogeneous map. The connection
//! operator `N(y,w) = Dη(y,w)/2 - [y,w]_m/2` is the definition route (mode A);
//! for Finsler sources a second, independent route solves the linear system
//! coupling N to the fundamental and Cartan tensors (mode B). Both are kept
//! first-class and cross-checked rather than merged.

use crate::error::{Error, Result};
use crate::fd;
use crate::lie_algebra::LieAlgebra;
use crate::linalg::solve_spd;
use crate::minkowski::{check_ad_h_invariance, MinkowskiNorm};
use crate::tol;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use std::sync::Arc;

pub type EtaFn = dyn Fn(&DVector<f64>) -> Result<DVector<f64>> + Send + Sync;
pub type DEtaFn = dyn Fn(&DVector<f64>, &DVector<f64>) -> Result<DVector<f64>> + Send + Sync;

pub enum SpraySource {
    /// Geodesic spray of the invariant Finsler metric determined by a norm.
    Finsler(Arc<dyn MinkowskiNorm>),
    /// User-supplied spray vector field, optionally with analytic derivative.
    Direct {
        eta: Arc<EtaFn>,
        d_eta: Option<Arc<DEtaFn>>,
    },
}

/// Finite-difference parameters for Dη and DN.
#[derive(Debug, Clone, Copy)]
pub struct FdScheme {
    /// Relative step for first derivatives of eta; steps scale with 1 + |y|.
    pub rel_step: f64,
}

impl Default for FdScheme {
    fn default() -> Self {
        Self {
            rel_step: f64::EPSILON.cbrt(),
        }
    }
}

impl FdScheme {
    fn eta_step(&self, y_norm: f64) -> f64 {
        self.rel_step * (1.0 + y_norm)
    }

    /// Widened step for differentiating the FD-built connection operator.
    fn nested_step(&self, y_norm: f64) -> f64 {
        self.rel_step.sqrt() * (1.0 + y_norm)
    }
}

/// The pair (eta, N) over a fixed algebra and decomposition.
///
/// Immutable; all operations are pure and safe to call concurrently.
pub struct SprayModel {
    algebra: Arc<LieAlgebra>,
    source: SpraySource,
    fd: FdScheme,
}

impl SprayModel {
    /// Finsler-derived spray. Requires a reductive decomposition and an
    /// Ad(H)-invariant norm; both are verified here, up front.
    pub fn finsler(algebra: Arc<LieAlgebra>, norm: Arc<dyn MinkowskiNorm>) -> Result<Self> {
        if norm.dim() != algebra.dim_m() {
            return Err(Error::DimensionMismatch {
                expected: algebra.dim_m(),
                got: norm.dim(),
            });
        }
        if !algebra.is_reductive() {
            return Err(Error::UnsupportedConfiguration(
                "Finsler-derived sprays need a reductive decomposition".into(),
            ));
        }
        let invariance = check_ad_h_invariance(norm.as_ref(), &algebra, 32, 42)?;
        if !invariance.pass {
            return Err(Error::UnsupportedConfiguration(format!(
                "norm is not Ad(H)-invariant (violation {:.3e})",
                invariance.max_violation
            )));
        }
        Ok(Self {
            algebra,
            source: SpraySource::Finsler(norm),
            fd: FdScheme::default(),
        })
    }

    /// Direct spray vector field. Accepted without an invariance proof;
    /// `check_equivariance` is available as an advisory diagnostic.
    pub fn direct(algebra: Arc<LieAlgebra>, eta: Arc<EtaFn>, d_eta: Option<Arc<DEtaFn>>) -> Self {
        Self {
            algebra,
            source: SpraySource::Direct { eta, d_eta },
            fd: FdScheme::default(),
        }
    }

    /// The canonical spray (eta = 0); its geodesics are the one-parameter
    /// orbits of the Nomizu construction.
    pub fn canonical(algebra: Arc<LieAlgebra>) -> Self {
        let n = algebra.dim_m();
        Self::direct(
            algebra,
            Arc::new(move |_y: &DVector<f64>| Ok(DVector::zeros(n))),
            Some(Arc::new(move |_y: &DVector<f64>, _u: &DVector<f64>| {
                Ok(DVector::zeros(n))
            })),
        )
    }

    pub fn with_fd_scheme(mut self, fd: FdScheme) -> Self {
        self.fd = fd;
        self
    }

    pub fn algebra(&self) -> &Arc<LieAlgebra> {
        &self.algebra
    }

    pub fn norm(&self) -> Option<&Arc<dyn MinkowskiNorm>> {
        match &self.source {
            SpraySource::Finsler(norm) => Some(norm),
            SpraySource::Direct { .. } => None,
        }
    }

    pub fn is_finsler(&self) -> bool {
        self.norm().is_some()
    }

    fn dim(&self) -> usize {
        self.algebra.dim_m()
    }

    fn require_nonzero(&self, y: &DVector<f64>) -> Result<()> {
        if y.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: y.len(),
            });
        }
        let n = y.norm();
        if n == 0.0 || !n.is_finite() {
            return Err(Error::Numerical(
                "spray operations are undefined at y = 0".into(),
            ));
        }
        Ok(())
    }

    /// Spray vector field. For Finsler sources this solves
    /// g_y eta = b with b_i = g_y(y, [e_i, y]_m).
    pub fn eta(&self, y: &DVector<f64>) -> Result<DVector<f64>> {
        self.require_nonzero(y)?;
        match &self.source {
            SpraySource::Direct { eta, .. } => eta(y),
            SpraySource::Finsler(norm) => {
                let n = self.dim();
                let g = norm.fundamental_tensor(y)?;
                let gy = &g * y;
                let mut b = DVector::zeros(n);
                for i in 0..n {
                    let ei = DVector::from_fn(n, |k, _| if k == i { 1.0 } else { 0.0 });
                    let br = self.algebra.bracket_m(&ei, y)?;
                    b[i] = gy.dot(&br);
                }
                solve_spd(&g, &b, y)
            }
        }
    }

    /// Dη(y,u) = d/dt eta(y + t u) at t = 0.
    pub fn d_eta(&self, y: &DVector<f64>, u: &DVector<f64>) -> Result<DVector<f64>> {
        self.require_nonzero(y)?;
        let nu = u.norm();
        if nu == 0.0 {
            return Ok(DVector::zeros(self.dim()));
        }
        if let SpraySource::Direct {
            d_eta: Some(d_eta), ..
        } = &self.source
        {
            return d_eta(y, u);
        }
        let uhat = u / nu;
        let h = self.shrink_step(self.fd.eta_step(y.norm()), y)?;
        let d = fd::try_deriv1_vec(|t| self.eta(&(y + &uhat * t)), h)?;
        Ok(d * nu)
    }

    /// Keep stencil points away from the cone tip: |y ± h u_hat| >= |y|/2.
    fn shrink_step(&self, mut h: f64, y: &DVector<f64>) -> Result<f64> {
        let limit = 0.5 * y.norm();
        let mut tries = 0;
        while h >= limit {
            h *= 0.5;
            tries += 1;
            if tries > 80 {
                return Err(Error::StepCollapse {
                    y: y.iter().copied().collect(),
                });
            }
        }
        Ok(h)
    }

    /// Connection operator by its definition (mode A):
    /// `N(y,w) = Dη(y,w)/2 - [y,w]_m / 2`.
    pub fn connection_n(&self, y: &DVector<f64>, w: &DVector<f64>) -> Result<DVector<f64>> {
        let de = self.d_eta(y, w)?;
        let br = self.algebra.bracket_m(y, w)?;
        Ok((de - br) * 0.5)
    }

    /// Connection operator by the Finsler linear system (mode B):
    /// `2 g_y(N(y,w), u) = g_y([u,w]_m, y) + g_y([u,y]_m, w) + g_y([w,y]_m, u)`
    ///                    - 2 C_y(u, w, eta(y)).
    pub fn connection_n_finsler(&self, y: &DVector<f64>, w: &DVector<f64>) -> Result<DVector<f64>> {
        self.require_nonzero(y)?;
        let norm = match &self.source {
            SpraySource::Finsler(norm) => norm,
            SpraySource::Direct { .. } => {
                return Err(Error::UnsupportedConfiguration(
                    "mode-B connection solve needs a Finsler source".into(),
                ))
            }
        };
        let n = self.dim();
        let g = norm.fundamental_tensor(y)?;
        let eta = self.eta(y)?;
        let gy = &g * y;
        let gw = &g * w;
        let g_wy = &g * self.algebra.bracket_m(w, y)?;
        let mut rhs = DVector::zeros(n);
        for i in 0..n {
            let ei = DVector::from_fn(n, |k, _| if k == i { 1.0 } else { 0.0 });
            let uw = self.algebra.bracket_m(&ei, w)?;
            let uy = self.algebra.bracket_m(&ei, y)?;
            rhs[i] = uw.dot(&gy) + uy.dot(&gw) + g_wy[i] - 2.0 * norm.cartan(y, &ei, w, &eta);
        }
        Ok(solve_spd(&g, &rhs, y)? * 0.5)
    }

    /// DN(direction, y, w) = d/ds N(y + s direction, w) at s = 0, with the
    /// widened step appropriate for differentiating an FD-built quantity.
    pub fn dn_along(
        &self,
        y: &DVector<f64>,
        direction: &DVector<f64>,
        w: &DVector<f64>,
    ) -> Result<DVector<f64>> {
        self.require_nonzero(y)?;
        let nd = direction.norm();
        if nd == 0.0 {
            return Ok(DVector::zeros(self.dim()));
        }
        let dhat = direction / nd;
        let h = self.shrink_step(self.fd.nested_step(y.norm()), y)?;
        let d = fd::try_deriv1_vec(|s| self.connection_n(&(y + &dhat * s), w), h)?;
        Ok(d * nd)
    }

    /// Riemann curvature operator applied to w, with its five summands.
    pub fn riemann_apply(&self, y: &DVector<f64>, w: &DVector<f64>) -> Result<RiemannTerms> {
        self.require_nonzero(y)?;
        let eta = self.eta(y)?;
        let isotropy = {
            let wy_h = self.algebra.bracket_h(w, y)?;
            let y_g = self.algebra.embed_m(y);
            self.algebra.m_part(&self.algebra.bracket(&y_g, &wy_h)?)
        };
        let spray_derivative = self.dn_along(y, &eta, w)?;
        let n_w = self.connection_n(y, w)?;
        let nested_connection = -self.connection_n(y, &n_w)?;
        let connection_of_bracket = self.connection_n(y, &self.algebra.bracket_m(y, w)?)?;
        let bracket_of_connection = -self.algebra.bracket_m(y, &n_w)?;
        let total = &isotropy
            + &spray_derivative
            + &nested_connection
            + &connection_of_bracket
            + &bracket_of_connection;
        Ok(RiemannTerms {
            isotropy,
            spray_derivative,
            nested_connection,
            connection_of_bracket,
            bracket_of_connection,
            total,
        })
    }

    /// Full Riemann operator as a matrix, column j = R_y(e_j).
    pub fn riemann_operator(&self, y: &DVector<f64>) -> Result<DMatrix<f64>> {
        let n = self.dim();
        let mut out = DMatrix::zeros(n, n);
        for j in 0..n {
            let ej = DVector::from_fn(n, |k, _| if k == j { 1.0 } else { 0.0 });
            let col = self.riemann_apply(y, &ej)?.total;
            out.set_column(j, &col);
        }
        Ok(out)
    }

    /// S-curvature: trace of `w -> N(y,w) + [y,w]_m`. Meaningful when the
    /// isotropy action on g/h is unimodular; see `unimodularity_defect`.
    pub fn s_curvature(&self, y: &DVector<f64>) -> Result<f64> {
        self.require_nonzero(y)?;
        let n = self.dim();
        let mut trace = 0.0;
        for i in 0..n {
            let ei = DVector::from_fn(n, |k, _| if k == i { 1.0 } else { 0.0 });
            trace += self.connection_n(y, &ei)?[i] + self.algebra.bracket_m(y, &ei)?[i];
        }
        Ok(trace)
    }

    /// Max |trace of ad(z) on m| over h-generators; nonzero values mean the
    /// invariant-measure S-curvature formula does not apply.
    pub fn unimodularity_defect(&self) -> f64 {
        (self.algebra.dim_m()..self.algebra.dim_g())
            .map(|a| self.algebra.ad_m_trace_of_h_generator(a).abs())
            .fold(0.0, f64::max)
    }

    /// Landsberg curvature L_y(w,w,w) =
    /// `3 C_y(w, w, [w,y]_m - N(y,w)) - C_y(w, w, w, eta(y))`.
    pub fn landsberg(&self, y: &DVector<f64>, w: &DVector<f64>) -> Result<f64> {
        self.require_nonzero(y)?;
        let norm = self.norm().ok_or_else(|| {
            Error::UnsupportedConfiguration(
                "Landsberg curvature needs a Finsler source (Cartan tensor undefined)".into(),
            )
        })?;
        let eta = self.eta(y)?;
        let n_w = self.connection_n(y, w)?;
        let arg = self.algebra.bracket_m(w, y)? - n_w;
        Ok(3.0 * norm.cartan(y, w, w, &arg) - norm.cartan4(y, w, w, w, &eta))
    }

    /// Flag curvature K(y,w) = g_y(R_y w, w) / (F(y)^2 g_y(w,w) - g_y(y,w)^2).
    pub fn flag_curvature(&self, y: &DVector<f64>, w: &DVector<f64>) -> Result<f64> {
        self.require_nonzero(y)?;
        let norm = self.norm().ok_or_else(|| {
            Error::UnsupportedConfiguration("flag curvature needs a Finsler source".into())
        })?;
        let g = norm.fundamental_tensor(y)?;
        let f = norm.value(y);
        let gww = (w.transpose() * &g * w)[(0, 0)];
        let gyw = (y.transpose() * &g * w)[(0, 0)];
        let denom = f * f * gww - gyw * gyw;
        if denom <= tol::DEGENERATE_FLAG {
            return Err(Error::DegenerateFlag);
        }
        let rw = self.riemann_apply(y, w)?.total;
        let num = (rw.transpose() * &g * w)[(0, 0)];
        Ok(num / denom)
    }

    /// Advisory infinitesimal equivariance check:
    /// `Dη(y, [z,y]) = [z, eta(y)]` for every h-basis z (reductive case).
    pub fn check_equivariance(&self, samples: usize, seed: u64) -> Result<EquivarianceReport> {
        if !self.algebra.is_reductive() {
            return Err(Error::UnsupportedConfiguration(
                "equivariance criterion needs a reductive decomposition".into(),
            ));
        }
        let n = self.dim();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut max_residual: f64 = 0.0;
        let mut used = 0;
        while used < samples {
            let y = DVector::from_fn(n, |_, _| rng.random::<f64>() * 2.0 - 1.0);
            if y.norm() < 0.3 {
                continue;
            }
            used += 1;
            let y_g = self.algebra.embed_m(&y);
            let eta = self.eta(&y)?;
            let eta_g = self.algebra.embed_m(&eta);
            for a in self.algebra.dim_m()..self.algebra.dim_g() {
                let z =
                    DVector::from_fn(self.algebra.dim_g(), |k, _| if k == a { 1.0 } else { 0.0 });
                let zy = self.algebra.m_part(&self.algebra.bracket(&z, &y_g)?);
                let lhs = self.d_eta(&y, &zy)?;
                let rhs = self.algebra.m_part(&self.algebra.bracket(&z, &eta_g)?);
                max_residual = max_residual.max((lhs - rhs).norm());
            }
        }
        Ok(EquivarianceReport {
            max_residual,
            pass: max_residual <= tol::EQUIVARIANCE,
            samples,
            seed,
        })
    }
}

/// The five summands of the Riemann operator, kept for debugging.
#[derive(Debug, Clone)]
pub struct RiemannTerms {
    /// `[y, [w,y]_h]_m`
    pub isotropy: DVector<f64>,
    /// DN(eta(y), y, w)
    pub spray_derivative: DVector<f64>,
    /// -N(y, N(y,w))
    pub nested_connection: DVector<f64>,
    /// `N(y, [y,w]_m)`
    pub connection_of_bracket: DVector<f64>,
    /// -[y, N(y,w)]_m
    pub bracket_of_connection: DVector<f64>,
    pub total: DVector<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct EquivarianceReport {
    pub max_residual: f64,
    pub pass: bool,
    pub samples: usize,
    pub seed: u64,
}

/// Worst relative 2-homogeneity residual of eta over the given scalings.
pub fn eta_homogeneity_residual(
    spray: &SprayModel,
    y: &DVector<f64>,
    lambdas: &[f64],
) -> Result<f64> {
    let eta = spray.eta(y)?;
    let mut worst: f64 = 0.0;
    for &l in lambdas {
        let scaled = spray.eta(&(y * l))?;
        let r = (scaled - &eta * (l * l)).norm() / (l * l * (1.0 + eta.norm()));
        worst = worst.max(r);
    }
    Ok(worst)
}

/// Worst relative 1-homogeneity residual of N(., w) over the given scalings.
pub fn n_homogeneity_residual(
    spray: &SprayModel,
    y: &DVector<f64>,
    w: &DVector<f64>,
    lambdas: &[f64],
) -> Result<f64> {
    let n = spray.connection_n(y, w)?;
    let mut worst: f64 = 0.0;
    for &l in lambdas {
        let scaled = spray.connection_n(&(y * l), w)?;
        let r = (scaled - &n * l).norm() / (l * (1.0 + n.norm()));
        worst = worst.max(r);
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lie_algebra::preset;
    use crate::minkowski::{EuclideanNorm, RandersNorm};
    use proptest::prelude::*;

    fn v3(a: f64, b: f64, c: f64) -> DVector<f64> {
        DVector::from_vec(vec![a, b, c])
    }

    fn sphere_spray() -> SprayModel {
        let p = preset("su2_u1", None).unwrap();
        SprayModel::finsler(Arc::new(p.algebra), Arc::new(EuclideanNorm::identity(2))).unwrap()
    }

    fn biinvariant_su2() -> SprayModel {
        let p = preset("su2", None).unwrap();
        SprayModel::finsler(Arc::new(p.algebra), Arc::new(EuclideanNorm::identity(3))).unwrap()
    }

    pub fn euler_top(inertia: [f64; 3]) -> SprayModel {
        let p = preset("su2", None).unwrap();
        let a = DMatrix::from_diagonal(&DVector::from_vec(inertia.to_vec()));
        SprayModel::finsler(
            Arc::new(p.algebra),
            Arc::new(EuclideanNorm::new(a).unwrap()),
        )
        .unwrap()
    }

    fn randers_heisenberg() -> SprayModel {
        let p = preset("heisenberg3", None).unwrap();
        let norm = RandersNorm::new(DMatrix::identity(3, 3), v3(0.0, 0.0, 0.4)).unwrap();
        SprayModel::finsler(Arc::new(p.algebra), Arc::new(norm)).unwrap()
    }

    /// Classical Euler rigid-body field: eta_i = (y x Iy)_i / I_i.
    fn euler_field(inertia: [f64; 3], y: &DVector<f64>) -> DVector<f64> {
        let iy = v3(inertia[0] * y[0], inertia[1] * y[1], inertia[2] * y[2]);
        let cross = v3(
            y[1] * iy[2] - y[2] * iy[1],
            y[2] * iy[0] - y[0] * iy[2],
            y[0] * iy[1] - y[1] * iy[0],
        );
        v3(
            cross[0] / inertia[0],
            cross[1] / inertia[1],
            cross[2] / inertia[2],
        )
    }

    #[test]
    fn symmetric_pair_eta_vanishes() {
        let spray = sphere_spray();
        for y in [
            DVector::from_vec(vec![1.0, 0.0]),
            DVector::from_vec(vec![0.3, -0.8]),
        ] {
            assert!(spray.eta(&y).unwrap().norm() < 1e-14);
        }
    }

    #[test]
    fn biinvariant_eta_vanishes() {
        let spray = biinvariant_su2();
        let y = v3(0.7, -0.2, 0.5);
        assert!(spray.eta(&y).unwrap().norm() < 1e-14);
    }

    #[test]
    fn euler_top_matches_classical_field() {
        let inertia = [1.0, 2.0, 3.0];
        let spray = euler_top(inertia);
        for y in [v3(1.0, 0.01, 0.0), v3(0.4, -0.9, 0.3), v3(-1.2, 0.5, 0.8)] {
            let eta = spray.eta(&y).unwrap();
            let classical = euler_field(inertia, &y);
            assert!((eta - classical).norm() < 1e-12, "mismatch at y = {y:?}");
        }
    }

    #[test]
    fn d_eta_matches_bilinearization() {
        let inertia = [1.0, 2.0, 3.0];
        let spray = euler_top(inertia);
        let y = v3(0.6, -0.3, 0.9);
        let u = v3(0.2, 1.1, -0.4);
        // d/dt of the quadratic field: bilinear in (y, u)
        let iy = v3(y[0], 2.0 * y[1], 3.0 * y[2]);
        let iu = v3(u[0], 2.0 * u[1], 3.0 * u[2]);
        let cross = |a: &DVector<f64>, b: &DVector<f64>| {
            v3(
                a[1] * b[2] - a[2] * b[1],
                a[2] * b[0] - a[0] * b[2],
                a[0] * b[1] - a[1] * b[0],
            )
        };
        let raw = cross(&y, &iu) + cross(&u, &iy);
        let expected = v3(raw[0] / 1.0, raw[1] / 2.0, raw[2] / 3.0);
        let d = spray.d_eta(&y, &u).unwrap();
        assert!((d - expected).norm() < 1e-9);
    }

    #[test]
    fn d_eta_euler_theorem() {
        let spray = euler_top([1.0, 2.0, 3.0]);
        let y = v3(0.5, 0.8, -0.6);
        let lhs = spray.d_eta(&y, &y).unwrap();
        let rhs = spray.eta(&y).unwrap() * 2.0;
        assert!((lhs - rhs).norm() < 1e-8);
    }

    #[test]
    fn connection_vanishes_on_symmetric_pair() {
        let spray = sphere_spray();
        let y = DVector::from_vec(vec![0.9, -0.4]);
        let w = DVector::from_vec(vec![0.2, 1.0]);
        assert!(spray.connection_n(&y, &w).unwrap().norm() < 1e-14);
    }

    #[test]
    fn biinvariant_connection_is_half_bracket() {
        let spray = biinvariant_su2();
        let y = v3(0.7, -0.2, 0.5);
        let w = v3(-0.3, 0.9, 0.1);
        let n = spray.connection_n(&y, &w).unwrap();
        let expected = spray.algebra().bracket_m(&y, &w).unwrap() * -0.5;
        assert!((n - expected).norm() < 1e-13);
    }

    #[test]
    fn connection_modes_agree_on_randers_heisenberg() {
        let spray = randers_heisenberg();
        let y = v3(0.8, -0.5, 0.3);
        let w = v3(0.1, 0.7, -0.9);
        let a = spray.connection_n(&y, &w).unwrap();
        let b = spray.connection_n_finsler(&y, &w).unwrap();
        assert!((a - b).norm() < 1e-6);
    }

    #[test]
    fn dn_along_biinvariant_is_half_bracket_of_direction() {
        let spray = biinvariant_su2();
        let y = v3(0.7, -0.2, 0.5);
        let u = v3(0.4, 0.1, -0.6);
        let w = v3(-0.3, 0.9, 0.1);
        let d = spray.dn_along(&y, &u, &w).unwrap();
        let expected = spray.algebra().bracket_m(&u, &w).unwrap() * -0.5;
        assert!((d - expected).norm() < 1e-9);
    }

    #[test]
    fn dn_along_zero_direction_is_zero() {
        let spray = biinvariant_su2();
        let y = v3(0.7, -0.2, 0.5);
        let w = v3(-0.3, 0.9, 0.1);
        let d = spray.dn_along(&y, &DVector::zeros(3), &w).unwrap();
        assert_eq!(d.norm(), 0.0);
    }

    #[test]
    fn riemann_on_sphere_is_identityish() {
        let spray = sphere_spray();
        let y = DVector::from_vec(vec![1.0, 0.0]);
        let w = DVector::from_vec(vec![0.0, 1.0]);
        let r = spray.riemann_apply(&y, &w).unwrap();
        assert!((r.total - &w).norm() < 1e-12);
        // only the isotropy term survives
        assert!(r.spray_derivative.norm() < 1e-13);
        assert!(r.nested_connection.norm() < 1e-13);
    }

    #[test]
    fn riemann_biinvariant_quarter_curvature() {
        let spray = biinvariant_su2();
        let y = v3(1.0, 0.0, 0.0);
        let w = v3(0.0, 1.0, 0.0);
        let r = spray.riemann_apply(&y, &w).unwrap().total;
        assert!((r - &w * 0.25).norm() < 1e-9);
    }

    /// For a zero spray vector field the operator must reduce to the direct
    /// assembly with `N = -[.,.]_m / 2`.
    #[test]
    fn riemann_with_zero_eta_matches_direct_assembly() {
        let p = preset("se2", None).unwrap();
        let algebra = Arc::new(p.algebra);
        let spray = SprayModel::canonical(algebra.clone());
        let y = v3(0.8, -0.3, 0.6);
        for j in 0..3 {
            let w = DVector::from_fn(3, |k, _| if k == j { 1.0 } else { 0.0 });
            let half_bracket =
                |a: &DVector<f64>, b: &DVector<f64>| algebra.bracket_m(a, b).unwrap() * -0.5;
            let n_w = half_bracket(&y, &w);
            let wy_h = algebra.bracket_h(&w, &y).unwrap();
            let direct = algebra.m_part(&algebra.bracket(&algebra.embed_m(&y), &wy_h).unwrap())
                + half_bracket(&y, &algebra.bracket_m(&y, &w).unwrap())
                - algebra.bracket_m(&y, &n_w).unwrap()
                - half_bracket(&y, &n_w);
            let computed = spray.riemann_apply(&y, &w).unwrap().total;
            assert!((computed - direct).norm() < 1e-12);
        }
    }

    #[test]
    fn riemann_abelian_is_zero() {
        let p = preset("abelian", Some(3)).unwrap();
        let spray =
            SprayModel::finsler(Arc::new(p.algebra), Arc::new(EuclideanNorm::identity(3))).unwrap();
        let r = spray.riemann_operator(&v3(0.4, -0.2, 0.9)).unwrap();
        assert!(r.norm() < 1e-14);
    }

    #[test]
    fn s_curvature_degenerate_cases() {
        let sphere = sphere_spray();
        assert!(
            sphere
                .s_curvature(&DVector::from_vec(vec![0.6, -0.8]))
                .unwrap()
                .abs()
                < 1e-14
        );
        let bi = biinvariant_su2();
        assert!(bi.s_curvature(&v3(0.7, -0.2, 0.5)).unwrap().abs() < 1e-13);
    }

    #[test]
    fn landsberg_zero_cases() {
        let bi = biinvariant_su2();
        let y = v3(0.7, -0.2, 0.5);
        let w = v3(-0.3, 0.9, 0.1);
        assert_eq!(bi.landsberg(&y, &w).unwrap(), 0.0);

        let sphere = sphere_spray();
        let y = DVector::from_vec(vec![0.9, -0.4]);
        let w = DVector::from_vec(vec![0.2, 1.0]);
        assert!(sphere.landsberg(&y, &w).unwrap().abs() < 1e-14);
    }

    #[test]
    fn landsberg_requires_finsler() {
        let p = preset("su2", None).unwrap();
        let spray = SprayModel::canonical(Arc::new(p.algebra));
        let err = spray.landsberg(&v3(1.0, 0.0, 0.0), &v3(0.0, 1.0, 0.0));
        assert!(matches!(err, Err(Error::UnsupportedConfiguration(_))));
    }

    #[test]
    fn flag_curvatures_of_model_spaces() {
        let sphere = sphere_spray();
        let k = sphere
            .flag_curvature(
                &DVector::from_vec(vec![1.0, 0.0]),
                &DVector::from_vec(vec![0.0, 1.0]),
            )
            .unwrap();
        assert!((k - 1.0).abs() < 1e-10);

        let bi = biinvariant_su2();
        let k = bi
            .flag_curvature(&v3(1.0, 0.0, 0.0), &v3(0.0, 1.0, 0.0))
            .unwrap();
        assert!((k - 0.25).abs() < 1e-9);

        let p = preset("abelian", Some(3)).unwrap();
        let flat =
            SprayModel::finsler(Arc::new(p.algebra), Arc::new(EuclideanNorm::identity(3))).unwrap();
        let k = flat
            .flag_curvature(&v3(1.0, 0.2, 0.0), &v3(0.0, 1.0, 0.5))
            .unwrap();
        assert!(k.abs() < 1e-12);
    }

    #[test]
    fn degenerate_flag_is_rejected() {
        let sphere = sphere_spray();
        let y = DVector::from_vec(vec![1.0, 0.0]);
        let err = sphere.flag_curvature(&y, &(&y * 2.0));
        assert!(matches!(err, Err(Error::DegenerateFlag)));
    }

    #[test]
    fn nonreductive_finsler_is_rejected() {
        let p = preset("sl2_r", None).unwrap();
        let change = DMatrix::from_row_slice(3, 3, &[0.0, 0.0, 1.0, 1.0, 0.0, 0.0, 0.0, 1.0, 1.0]);
        let skewed = p
            .algebra
            .with_basis_change(&change)
            .unwrap()
            .with_dim_m(2)
            .unwrap();
        let err = SprayModel::finsler(Arc::new(skewed), Arc::new(EuclideanNorm::identity(2)));
        assert!(matches!(err, Err(Error::UnsupportedConfiguration(_))));
    }

    #[test]
    fn noninvariant_norm_is_rejected() {
        let p = preset("su2_u1", None).unwrap();
        let norm =
            RandersNorm::new(DMatrix::identity(2, 2), DVector::from_vec(vec![0.3, 0.0])).unwrap();
        let err = SprayModel::finsler(Arc::new(p.algebra), Arc::new(norm));
        assert!(matches!(err, Err(Error::UnsupportedConfiguration(_))));
    }

    #[test]
    fn equivariance_reports() {
        let sphere = sphere_spray();
        assert!(sphere.check_equivariance(16, 42).unwrap().pass);
        // h = 0: vacuous pass
        let top = euler_top([1.0, 2.0, 3.0]);
        let report = top.check_equivariance(16, 42).unwrap();
        assert!(report.pass);
        assert_eq!(report.max_residual, 0.0);
    }

    /// The advisory check must flag a direct field that is not invariant
    /// under the isotropy rotation.
    #[test]
    fn equivariance_detects_noninvariant_direct_field() {
        let p = preset("su2_u1", None).unwrap();
        let spray = SprayModel::direct(
            Arc::new(p.algebra),
            Arc::new(|y: &DVector<f64>| Ok(DVector::from_vec(vec![y[0] * y[0], 0.0]))),
            None,
        );
        let report = spray.check_equivariance(16, 42).unwrap();
        assert!(!report.pass, "residual {:.3e}", report.max_residual);
    }

    /// A dilation-type isotropy action is not unimodular; the defect is the
    /// trace of the h-generator on m.
    #[test]
    fn unimodularity_defect_of_dilation_isotropy() {
        use crate::lie_algebra::LieAlgebra;
        let solvable =
            LieAlgebra::from_triplets(3, 2, &[(2, 0, 0, 1.0), (2, 1, 1, 1.0)]).unwrap();
        assert!(solvable.is_reductive());
        let spray = SprayModel::canonical(Arc::new(solvable));
        assert!((spray.unimodularity_defect() - 2.0).abs() < 1e-15);
        // trace formula still evaluates; only the measure interpretation
        // carries the warning
        let y = DVector::from_vec(vec![1.0, -0.4]);
        assert!(spray.s_curvature(&y).is_ok());
    }

    #[test]
    fn riemann_self_adjoint_wrt_g() {
        for spray in [
            sphere_spray(),
            biinvariant_su2(),
            euler_top([1.0, 2.0, 3.0]),
            randers_heisenberg(),
        ] {
            let n = spray.algebra().dim_m();
            let y = DVector::from_fn(n, |i, _| 0.9 - 0.35 * i as f64);
            let g = spray.norm().unwrap().fundamental_tensor(&y).unwrap();
            let r = spray.riemann_operator(&y).unwrap();
            let gr = &g * &r;
            let asym = (&gr - gr.transpose()).amax();
            assert!(asym < 1e-4, "asymmetry {asym:.3e}");
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]

        #[test]
        fn eta_is_two_homogeneous(
            ys in proptest::collection::vec(0.2f64..1.2, 3),
            which in 0usize..3,
        ) {
            let spray = match which {
                0 => biinvariant_su2(),
                1 => euler_top([1.0, 2.0, 3.0]),
                _ => randers_heisenberg(),
            };
            let y = v3(ys[0], -ys[1], ys[2]);
            let r = eta_homogeneity_residual(&spray, &y, &[0.5, 2.0, 3.7]).unwrap();
            prop_assert!(r < 1e-8, "residual {r:.3e}");
        }

        #[test]
        fn connection_is_one_homogeneous(
            ys in proptest::collection::vec(0.2f64..1.2, 3),
            ws in proptest::collection::vec(-1.0f64..1.0, 3),
        ) {
            let spray = euler_top([1.0, 2.0, 3.0]);
            let y = v3(ys[0], ys[1], ys[2]);
            let w = v3(ws[0], ws[1], ws[2]);
            let r = n_homogeneity_residual(&spray, &y, &w, &[0.5, 2.0]).unwrap();
            prop_assert!(r < 1e-7, "residual {r:.3e}");
        }
    }
}
