//! Independent local-coordinate oracle on the exponential chart x -> exp(x)o.
//!
//! The invariant metric pulls back to F_chart(x, v) = F((T_x v)_m) with T_x
//! the left-trivialized differential of exp. Spray coefficients, connection
//! coefficients, Riemann coefficients, and the measure-density term of the
//! S-curvature are all built from finite differences of F_chart^2, entirely
//! bypassing the algebraic operators they are used to verify. Only origin
//! values feed the cross-check suite; T_x conditioning degrades with |x|, so
//! a chart radius bounds every entry point.
//!
//! Derivatives of the FD-built spray coefficients use widened, square-root
//! scaled steps; the honest error budget for nested quantities is ~1e-4.

use crate::error::{Error, Result};
use crate::fd;
use crate::lie_algebra::LieAlgebra;
use crate::minkowski::{check_ad_h_invariance, MinkowskiNorm};
use crate::spray::SprayModel;
use crate::tol;
use nalgebra::{DMatrix, DVector};
use std::sync::Arc;

/// Step for the second y- and mixed x,y-derivatives of F_chart^2. Wider
/// than eps^(1/4): with Richardson the truncation term is negligible, so
/// the step is chosen to push FD roundoff in the spray coefficients down
/// to ~1e-9.
const F2_SECOND: f64 = 2e-3;
/// Step for first derivatives of the FD-built spray coefficients.
const G_FIRST: f64 = 2e-3;
/// Widened step for second derivatives of the spray coefficients.
const G_SECOND: f64 = 4e-2;

#[derive(Debug, Clone, Copy)]
pub struct ChartConfig {
    pub radius: f64,
    pub dexp_tol: f64,
    /// Multiplies every finite-difference step; used by the step-halving
    /// consistency checks.
    pub fd_scale: f64,
}

impl Default for ChartConfig {
    fn default() -> Self {
        Self {
            radius: 0.5,
            dexp_tol: tol::DEXP_SERIES,
            fd_scale: 1.0,
        }
    }
}

/// The pulled-back coordinate metric powering the local-coordinate oracle.
pub struct ChartMetric {
    algebra: Arc<LieAlgebra>,
    norm: Arc<dyn MinkowskiNorm>,
    config: ChartConfig,
}

impl ChartMetric {
    pub fn new(
        algebra: Arc<LieAlgebra>,
        norm: Arc<dyn MinkowskiNorm>,
        config: ChartConfig,
    ) -> Result<Self> {
        if norm.dim() != algebra.dim_m() {
            return Err(Error::DimensionMismatch {
                expected: algebra.dim_m(),
                got: norm.dim(),
            });
        }
        if !algebra.is_reductive() {
            return Err(Error::UnsupportedConfiguration(
                "chart oracle needs a reductive decomposition".into(),
            ));
        }
        let invariance = check_ad_h_invariance(norm.as_ref(), &algebra, 32, 42)?;
        if !invariance.pass {
            return Err(Error::UnsupportedConfiguration(format!(
                "chart oracle needs an Ad(H)-invariant norm (violation {:.3e})",
                invariance.max_violation
            )));
        }
        Ok(Self {
            algebra,
            norm,
            config,
        })
    }

    pub fn config(&self) -> &ChartConfig {
        &self.config
    }

    fn dim(&self) -> usize {
        self.algebra.dim_m()
    }

    fn check_radius(&self, x: &DVector<f64>) -> Result<()> {
        let n = x.norm();
        if n > self.config.radius {
            return Err(Error::ChartRadiusExceeded {
                norm: n,
                radius: self.config.radius,
            });
        }
        Ok(())
    }

    /// Matrix of v -> (T_x v)_m on m.
    pub fn m_matrix(&self, x: &DVector<f64>) -> Result<DMatrix<f64>> {
        let n = self.dim();
        let x_g = self.algebra.embed_m(x);
        let mut out = DMatrix::zeros(n, n);
        for j in 0..n {
            let ej = DVector::from_fn(n, |k, _| if k == j { 1.0 } else { 0.0 });
            let col = self.algebra.dexp_trivialized(
                &x_g,
                &self.algebra.embed_m(&ej),
                self.config.dexp_tol,
            )?;
            out.set_column(j, &self.algebra.m_part(&col));
        }
        Ok(out)
    }

    /// Pull a chart tangent vector at x back to m (the identification used
    /// when comparing chart transport against the algebraic side).
    pub fn pull_back(&self, x: &DVector<f64>, v: &DVector<f64>) -> Result<DVector<f64>> {
        Ok(self.m_matrix(x)? * v)
    }

    /// F_chart(x, v) = F((T_x v)_m).
    pub fn value(&self, x: &DVector<f64>, v: &DVector<f64>) -> Result<f64> {
        self.check_radius(x)?;
        Ok(self.norm.value(&(self.m_matrix(x)? * v)))
    }

    fn f2(&self, x: &DVector<f64>, v: &DVector<f64>) -> Result<f64> {
        let f = self.norm.value(&(self.m_matrix(x)? * v));
        Ok(f * f)
    }

    /// Chart density of the invariant measure: sigma(x) = det(M(x)).
    pub fn sigma(&self, x: &DVector<f64>) -> Result<f64> {
        Ok(self.m_matrix(x)?.determinant())
    }

    /// Chart fundamental tensor: half the y-Hessian of F_chart^2.
    pub fn chart_tensor(&self, x: &DVector<f64>, y: &DVector<f64>) -> Result<DMatrix<f64>> {
        let n = self.dim();
        let hy = F2_SECOND * y.norm().max(1.0) * self.config.fd_scale;
        let mut g = DMatrix::zeros(n, n);
        for i in 0..n {
            let ei = unit(n, i);
            g[(i, i)] = 0.5 * try_deriv2(|t| self.f2(x, &(y + &ei * t)), hy)?;
            for j in (i + 1)..n {
                let ej = unit(n, j);
                let v = 0.5 * try_cross2(|s, t| self.f2(x, &(y + &ei * s + &ej * t)), hy, hy)?;
                g[(i, j)] = v;
                g[(j, i)] = v;
            }
        }
        Ok(g)
    }

    /// Geodesic spray coefficients
    /// G^i = (1/4) g^{il} ([F^2]_{x^k y^l} y^k - [F^2]_{x^l}),
    /// assembled from finite differences of F_chart^2 in x and y.
    pub fn spray_coefficients(&self, x: &DVector<f64>, y: &DVector<f64>) -> Result<DVector<f64>> {
        self.check_radius(x)?;
        self.spray_inner(x, y)
    }

    fn spray_inner(&self, x: &DVector<f64>, y: &DVector<f64>) -> Result<DVector<f64>> {
        let n = self.dim();
        let scale_y = y.norm().max(1.0);
        let hx1 = fd::first_step(1.0) * self.config.fd_scale;
        let hx2 = F2_SECOND * self.config.fd_scale;
        let hy2 = F2_SECOND * scale_y * self.config.fd_scale;
        let g = self.chart_tensor(x, y)?;
        let ynorm = y.norm();
        let yhat = y / ynorm;
        let mut rhs = DVector::zeros(n);
        for l in 0..n {
            let el = unit(n, l);
            // directional mixed derivative contracts [F^2]_{x^k y^l} with y^k
            let mixed = try_cross2(|a, b| self.f2(&(x + &yhat * a), &(y + &el * b)), hx2, hy2)?;
            let dx = try_deriv1(|t| self.f2(&(x + &el * t), y), hx1)?;
            rhs[l] = mixed * ynorm - dx;
        }
        let chol = g.clone().cholesky().ok_or_else(|| Error::StrongConvexity {
            y: y.iter().copied().collect(),
        })?;
        Ok(chol.solve(&rhs) * 0.25)
    }

    /// Chart connection coefficients N^i_j = dG^i/dy^j as a matrix.
    pub fn n_matrix(&self, x: &DVector<f64>, y: &DVector<f64>) -> Result<DMatrix<f64>> {
        self.check_radius(x)?;
        self.n_matrix_inner(x, y)
    }

    fn n_matrix_inner(&self, x: &DVector<f64>, y: &DVector<f64>) -> Result<DMatrix<f64>> {
        let n = self.dim();
        let scale_y = y.norm().max(1.0);
        let h = G_FIRST * scale_y * self.config.fd_scale;
        let mut out = DMatrix::zeros(n, n);
        for j in 0..n {
            let ej = unit(n, j);
            let col = fd::try_deriv1_vec(|t| self.spray_inner(x, &(y + &ej * t)), h)?;
            out.set_column(j, &col);
        }
        Ok(out)
    }

    /// Riemann curvature coefficients
    /// R^i_k = 2 dG^i/dx^k - y^j d2G^i/(dx^j dy^k)
    ///         + 2 G^j d2G^i/(dy^j dy^k) - dG^i/dy^j dG^j/dy^k,
    /// nested central differences over the spray coefficients.
    pub fn riemann_coeffs(&self, x: &DVector<f64>, y: &DVector<f64>) -> Result<DMatrix<f64>> {
        self.check_radius(x)?;
        let n = self.dim();
        let scale_y = y.norm().max(1.0);
        let h1x = G_FIRST * self.config.fd_scale;
        let h2x = G_SECOND * self.config.fd_scale;
        let h2y = G_SECOND * scale_y * self.config.fd_scale;
        let ynorm = y.norm();
        let yhat = y / ynorm;
        let g_here = self.spray_inner(x, y)?;
        let n_mat = self.n_matrix_inner(x, y)?;
        let mut out = DMatrix::zeros(n, n);
        for k in 0..n {
            let ek = unit(n, k);
            let dx = fd::try_deriv1_vec(|t| self.spray_inner(&(x + &ek * t), y), h1x)?;
            let mixed = fd::try_cross2_vec(
                |a, b| self.spray_inner(&(x + &yhat * a), &(y + &ek * b)),
                h2x,
                h2y,
            )?;
            let mut col = dx * 2.0 - mixed * ynorm;
            let gnorm = g_here.norm();
            if gnorm > 1e-13 {
                let ghat = &g_here / gnorm;
                let yy = fd::try_cross2_vec(
                    |a, b| self.spray_inner(x, &(y + &ghat * a + &ek * b)),
                    h2y,
                    h2y,
                )?;
                col += yy * (2.0 * gnorm);
            }
            out.set_column(k, &col);
        }
        out -= &n_mat * &n_mat;
        Ok(out)
    }

    /// Chart S-curvature S = N^i_i - (y^i / sigma) dsigma/dx^i with sigma the
    /// determinant density of the invariant measure.
    pub fn s_curvature_chart(&self, x: &DVector<f64>, y: &DVector<f64>) -> Result<f64> {
        self.check_radius(x)?;
        let n = self.dim();
        let n_mat = self.n_matrix_inner(x, y)?;
        let sigma = self.sigma(x)?;
        let h = fd::first_step(1.0) * self.config.fd_scale;
        let mut measure_term = 0.0;
        for i in 0..n {
            let ei = unit(n, i);
            let dsigma = try_deriv1(|t| self.sigma(&(x + &ei * t)), h)?;
            measure_term += y[i] * dsigma / sigma;
        }
        Ok(n_mat.trace() - measure_term)
    }

    /// Integrate the chart geodesic xddot + 2G(x, xdot) = 0 from (x0, v0)
    /// with fixed-step RK4, returning (x_k, v_k) samples.
    pub fn geodesic_points(
        &self,
        x0: &DVector<f64>,
        v0: &DVector<f64>,
        dt: f64,
        steps: usize,
    ) -> Result<Vec<(DVector<f64>, DVector<f64>)>> {
        self.check_radius(x0)?;
        let rhs = |x: &DVector<f64>, v: &DVector<f64>| -> Result<(DVector<f64>, DVector<f64>)> {
            Ok((v.clone(), self.spray_inner(x, v)? * -2.0))
        };
        let mut out = vec![(x0.clone(), v0.clone())];
        let (mut x, mut v) = (x0.clone(), v0.clone());
        for _ in 0..steps {
            let (k1x, k1v) = rhs(&x, &v)?;
            let (k2x, k2v) = rhs(&(&x + &k1x * (0.5 * dt)), &(&v + &k1v * (0.5 * dt)))?;
            let (k3x, k3v) = rhs(&(&x + &k2x * (0.5 * dt)), &(&v + &k2v * (0.5 * dt)))?;
            let (k4x, k4v) = rhs(&(&x + &k3x * dt), &(&v + &k3v * dt))?;
            x += (k1x + k2x * 2.0 + k3x * 2.0 + k4x) * (dt / 6.0);
            v += (k1v + k2v * 2.0 + k3v * 2.0 + k4v) * (dt / 6.0);
            if x.norm() > self.config.radius {
                return Err(Error::ChartRadiusExceeded {
                    norm: x.norm(),
                    radius: self.config.radius,
                });
            }
            out.push((x.clone(), v.clone()));
        }
        Ok(out)
    }

    /// Residual of the velocity-derivative identity: integrate the chart
    /// geodesic from (0, y), form y_chart(t) = (T_{x(t)} xdot(t))_m, and
    /// return |d/dt y_chart(0) + eta(y)| with a 4th-order one-sided stencil.
    pub fn compare_eta(&self, spray: &SprayModel, y: &DVector<f64>, dt: f64) -> Result<f64> {
        let points = self.geodesic_points(&DVector::zeros(self.dim()), y, dt, 4)?;
        let samples: Vec<DVector<f64>> = points
            .iter()
            .map(|(x, v)| Ok(self.m_matrix(x)? * v))
            .collect::<Result<_>>()?;
        let dydt = fd::forward_deriv5(&samples, dt);
        Ok((dydt + spray.eta(y)?).norm())
    }

    /// Chart-coordinate parallel transport along a base curve given by
    /// (x(t), xdot(t)). Linear mode contracts N with the transported vector;
    /// nonlinear contracts with the base velocity.
    pub fn transport_chart(
        &self,
        base: &dyn Fn(f64) -> Result<(DVector<f64>, DVector<f64>)>,
        start: &DVector<f64>,
        mode: TransportMode,
        t_end: f64,
        dt: f64,
    ) -> Result<Vec<(f64, DVector<f64>)>> {
        let rhs = |t: f64, w: &DVector<f64>| -> Result<DVector<f64>> {
            let (x, xdot) = base(t)?;
            self.check_radius(&x)?;
            match mode {
                TransportMode::Linear => Ok(-(self.n_matrix_inner(&x, &xdot)? * w)),
                TransportMode::Nonlinear => Ok(-(self.n_matrix_inner(&x, w)? * xdot)),
            }
        };
        let steps = (t_end / dt).round().max(1.0) as usize;
        let h = t_end / steps as f64;
        let mut out = vec![(0.0, start.clone())];
        let mut w = start.clone();
        for k in 0..steps {
            let t = k as f64 * h;
            let k1 = rhs(t, &w)?;
            let k2 = rhs(t + 0.5 * h, &(&w + &k1 * (0.5 * h)))?;
            let k3 = rhs(t + 0.5 * h, &(&w + &k2 * (0.5 * h)))?;
            let k4 = rhs(t + h, &(&w + &k3 * h))?;
            w += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
            out.push(((k + 1) as f64 * h, w.clone()));
        }
        Ok(out)
    }

    /// Chart-side Landsberg value: the Cartan tensor along the chart
    /// geodesic, with chart-parallel w in all three slots, differentiated at
    /// t = 0. Chart Cartan values come from the pullback identity
    /// C_chart(x,y)(u,u,u) = C_{M(x)y}(M(x)u, ...), which is exact calculus
    /// for the linear map M(x); the geodesic, the transport, and the time
    /// derivative stay fully independent of the algebraic Landsberg formula.
    pub fn landsberg_chart(&self, y: &DVector<f64>, w: &DVector<f64>, dt: f64) -> Result<f64> {
        let n = self.dim();
        // coupled state: chart position, velocity, transported vector
        let rhs = |x: &DVector<f64>,
                   v: &DVector<f64>,
                   wv: &DVector<f64>|
         -> Result<(DVector<f64>, DVector<f64>, DVector<f64>)> {
            let nm = self.n_matrix_inner(x, v)?;
            Ok((v.clone(), self.spray_inner(x, v)? * -2.0, -(nm * wv)))
        };
        let mut samples = Vec::with_capacity(5);
        let (mut x, mut v, mut wv) = (DVector::zeros(n), y.clone(), w.clone());
        for _ in 0..5 {
            let m = self.m_matrix(&x)?;
            let base = &m * &v;
            let arg = &m * &wv;
            samples.push(self.norm.cartan(&base, &arg, &arg, &arg));
            let (k1x, k1v, k1w) = rhs(&x, &v, &wv)?;
            let (k2x, k2v, k2w) = rhs(
                &(&x + &k1x * (0.5 * dt)),
                &(&v + &k1v * (0.5 * dt)),
                &(&wv + &k1w * (0.5 * dt)),
            )?;
            let (k3x, k3v, k3w) = rhs(
                &(&x + &k2x * (0.5 * dt)),
                &(&v + &k2v * (0.5 * dt)),
                &(&wv + &k2w * (0.5 * dt)),
            )?;
            let (k4x, k4v, k4w) = rhs(&(&x + &k3x * dt), &(&v + &k3v * dt), &(&wv + &k3w * dt))?;
            x += (k1x + k2x * 2.0 + k3x * 2.0 + k4x) * (dt / 6.0);
            v += (k1v + k2v * 2.0 + k3v * 2.0 + k4v) * (dt / 6.0);
            wv += (k1w + k2w * 2.0 + k3w * 2.0 + k4w) * (dt / 6.0);
        }
        Ok(
            (-25.0 * samples[0] + 48.0 * samples[1] - 36.0 * samples[2] + 16.0 * samples[3]
                - 3.0 * samples[4])
                / (12.0 * dt),
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TransportMode {
    Linear,
    Nonlinear,
}

fn unit(n: usize, i: usize) -> DVector<f64> {
    DVector::from_fn(n, |k, _| if k == i { 1.0 } else { 0.0 })
}

fn try_deriv1(f: impl Fn(f64) -> Result<f64>, h: f64) -> Result<f64> {
    let d = |hh: f64| -> Result<f64> { Ok((f(hh)? - f(-hh)?) / (2.0 * hh)) };
    let coarse = d(h)?;
    let fine = d(0.5 * h)?;
    Ok((4.0 * fine - coarse) / 3.0)
}

fn try_deriv2(f: impl Fn(f64) -> Result<f64>, h: f64) -> Result<f64> {
    let f0 = f(0.0)?;
    let d = |hh: f64| -> Result<f64> { Ok((f(hh)? - 2.0 * f0 + f(-hh)?) / (hh * hh)) };
    let coarse = d(h)?;
    let fine = d(0.5 * h)?;
    Ok((4.0 * fine - coarse) / 3.0)
}

fn try_cross2(f: impl Fn(f64, f64) -> Result<f64>, ha: f64, hb: f64) -> Result<f64> {
    let d = |sa: f64, sb: f64| -> Result<f64> {
        Ok((f(sa, sb)? - f(sa, -sb)? - f(-sa, sb)? + f(-sa, -sb)?) / (4.0 * sa * sb))
    };
    let coarse = d(ha, hb)?;
    let fine = d(0.5 * ha, 0.5 * hb)?;
    Ok((4.0 * fine - coarse) / 3.0)
}
