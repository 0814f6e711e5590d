//! Minkowski norms on m: value, fundamental tensor, Cartan tensors, and the
//! infinitesimal Ad(H)-invariance diagnostic.
//!
//! `EuclideanNorm` and `RandersNorm` carry closed-form tensors (standard
//! Finsler formulas, implementation-level, not sourced from any one place);
//! `CallbackNorm` differentiates a user-supplied value function with the
//! shared central-difference scheme.

use crate::error::{Error, Result};
use crate::fd;
use crate::lie_algebra::LieAlgebra;
use crate::tol;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

/// A Minkowski norm on m. Implementations are immutable and thread-safe;
/// every method is a pure function of its inputs.
pub trait MinkowskiNorm: Send + Sync {
    fn dim(&self) -> usize;

    /// F(y) >= 0 with F(0) = 0 and positive 1-homogeneity.
    fn value(&self, y: &DVector<f64>) -> f64;

    /// Fundamental tensor g_y = half the y-Hessian of F^2, for y != 0.
    fn fundamental_tensor(&self, y: &DVector<f64>) -> Result<DMatrix<f64>>;

    /// Cartan tensor C_y(u,v,w), the quarter third y-derivative of F^2.
    fn cartan(&self, y: &DVector<f64>, u: &DVector<f64>, v: &DVector<f64>, w: &DVector<f64>)
        -> f64;

    /// Directional derivative of the Cartan tensor in its base point:
    /// d/dt C_{y+tz}(u,v,w) at t = 0.
    fn cartan4(
        &self,
        y: &DVector<f64>,
        u: &DVector<f64>,
        v: &DVector<f64>,
        w: &DVector<f64>,
        z: &DVector<f64>,
    ) -> f64;

    /// g_y(u, v) as a scalar.
    fn inner(&self, y: &DVector<f64>, u: &DVector<f64>, v: &DVector<f64>) -> Result<f64> {
        let g = self.fundamental_tensor(y)?;
        Ok((u.transpose() * g * v)[(0, 0)])
    }
}

fn require_spd(a: &DMatrix<f64>, context: &str) -> Result<()> {
    let sym_err = (a - a.transpose()).amax();
    if sym_err > 1e-12 {
        return Err(Error::InadmissibleNorm(format!(
            "{context}: matrix not symmetric (defect {sym_err:e})"
        )));
    }
    if a.clone().cholesky().is_none() {
        return Err(Error::InadmissibleNorm(format!(
            "{context}: matrix not positive definite"
        )));
    }
    Ok(())
}

/// F(y) = sqrt(y^T a y) for a symmetric positive-definite matrix a.
#[derive(Debug, Clone)]
pub struct EuclideanNorm {
    a: DMatrix<f64>,
}

impl EuclideanNorm {
    pub fn new(a: DMatrix<f64>) -> Result<Self> {
        require_spd(&a, "euclidean norm")?;
        Ok(Self { a })
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            a: DMatrix::identity(dim, dim),
        }
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.a
    }
}

impl MinkowskiNorm for EuclideanNorm {
    fn dim(&self) -> usize {
        self.a.nrows()
    }

    fn value(&self, y: &DVector<f64>) -> f64 {
        (y.transpose() * &self.a * y)[(0, 0)].max(0.0).sqrt()
    }

    fn fundamental_tensor(&self, _y: &DVector<f64>) -> Result<DMatrix<f64>> {
        Ok(self.a.clone())
    }

    fn cartan(
        &self,
        _y: &DVector<f64>,
        _u: &DVector<f64>,
        _v: &DVector<f64>,
        _w: &DVector<f64>,
    ) -> f64 {
        0.0
    }

    fn cartan4(
        &self,
        _y: &DVector<f64>,
        _u: &DVector<f64>,
        _v: &DVector<f64>,
        _w: &DVector<f64>,
        _z: &DVector<f64>,
    ) -> f64 {
        0.0
    }
}

/// Randers norm F(y) = sqrt(y^T a y) + b . y with dual norm of b below one.
#[derive(Debug, Clone)]
pub struct RandersNorm {
    a: DMatrix<f64>,
    b: DVector<f64>,
}

impl RandersNorm {
    pub fn new(a: DMatrix<f64>, b: DVector<f64>) -> Result<Self> {
        require_spd(&a, "randers norm")?;
        if b.len() != a.nrows() {
            return Err(Error::DimensionMismatch {
                expected: a.nrows(),
                got: b.len(),
            });
        }
        let a_inv_b = a.clone().cholesky().expect("checked above").solve(&b);
        let dual = b.dot(&a_inv_b).sqrt();
        if dual >= 1.0 {
            return Err(Error::InadmissibleNorm(format!(
                "randers norm: dual norm of b is {dual:.6}, must be < 1"
            )));
        }
        Ok(Self { a, b })
    }

    fn alpha(&self, y: &DVector<f64>) -> f64 {
        (y.transpose() * &self.a * y)[(0, 0)].max(0.0).sqrt()
    }
}

impl MinkowskiNorm for RandersNorm {
    fn dim(&self) -> usize {
        self.a.nrows()
    }

    fn value(&self, y: &DVector<f64>) -> f64 {
        self.alpha(y) + self.b.dot(y)
    }

    fn fundamental_tensor(&self, y: &DVector<f64>) -> Result<DMatrix<f64>> {
        let alpha = self.alpha(y);
        if alpha == 0.0 {
            return Err(Error::StrongConvexity {
                y: y.iter().copied().collect(),
            });
        }
        let ay = &self.a * y;
        let f = alpha + self.b.dot(y);
        let lhat = &ay / alpha;
        let ell = &lhat + &self.b;
        let n = self.dim();
        let mut g = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                g[(i, j)] = (f / alpha) * (self.a[(i, j)] - lhat[i] * lhat[j]) + ell[i] * ell[j];
            }
        }
        Ok(g)
    }

    fn cartan(
        &self,
        y: &DVector<f64>,
        u: &DVector<f64>,
        v: &DVector<f64>,
        w: &DVector<f64>,
    ) -> f64 {
        let alpha = self.alpha(y);
        let beta = self.b.dot(y);
        let ay = &self.a * y;
        let lhat = &ay / alpha;
        let pair = |p: &DVector<f64>, q: &DVector<f64>| (p.transpose() * &self.a * q)[(0, 0)];
        let lu = lhat.dot(u);
        let lv = lhat.dot(v);
        let lw = lhat.dot(w);
        let (auv, auw, avw) = (pair(u, v), pair(u, w), pair(v, w));
        let (huv, huw, hvw) = (auv - lu * lv, auw - lu * lw, avw - lv * lw);
        let (bu, bv, bw) = (self.b.dot(u), self.b.dot(v), self.b.dot(w));
        let third = (3.0 * lu * lv * lw - (auv * lw + auw * lv + avw * lu)) / (alpha * alpha);
        0.5 * (beta * third + (huv * bw + huw * bv + hvw * bu) / alpha)
    }

    fn cartan4(
        &self,
        y: &DVector<f64>,
        u: &DVector<f64>,
        v: &DVector<f64>,
        w: &DVector<f64>,
        z: &DVector<f64>,
    ) -> f64 {
        fd_cartan4_from_cartan(|p| self.cartan(p, u, v, w), y, z)
    }
}

pub type NormFn = dyn Fn(&DVector<f64>) -> f64 + Send + Sync;

/// Norm from a user-supplied value function; all tensors by central
/// differences with one Richardson level.
pub struct CallbackNorm {
    dim: usize,
    f: Box<NormFn>,
}

impl CallbackNorm {
    pub fn new(dim: usize, f: impl Fn(&DVector<f64>) -> f64 + Send + Sync + 'static) -> Self {
        Self {
            dim,
            f: Box::new(f),
        }
    }
}

impl MinkowskiNorm for CallbackNorm {
    fn dim(&self) -> usize {
        self.dim
    }

    fn value(&self, y: &DVector<f64>) -> f64 {
        (self.f)(y)
    }

    fn fundamental_tensor(&self, y: &DVector<f64>) -> Result<DMatrix<f64>> {
        let g = fd_fundamental_tensor(&|p| (self.f)(p), y);
        if g.clone().cholesky().is_none() {
            return Err(Error::StrongConvexity {
                y: y.iter().copied().collect(),
            });
        }
        Ok(g)
    }

    fn cartan(
        &self,
        y: &DVector<f64>,
        u: &DVector<f64>,
        v: &DVector<f64>,
        w: &DVector<f64>,
    ) -> f64 {
        fd_cartan(&|p| (self.f)(p), y, u, v, w)
    }

    fn cartan4(
        &self,
        y: &DVector<f64>,
        u: &DVector<f64>,
        v: &DVector<f64>,
        w: &DVector<f64>,
        z: &DVector<f64>,
    ) -> f64 {
        fd_cartan4(&|p| (self.f)(p), y, u, v, w, z)
    }
}

/// Half the finite-difference y-Hessian of F^2.
pub fn fd_fundamental_tensor(f: &dyn Fn(&DVector<f64>) -> f64, y: &DVector<f64>) -> DMatrix<f64> {
    let n = y.len();
    let f2 = |p: &DVector<f64>| {
        let v = f(p);
        v * v
    };
    let h = fd::second_step(y.norm().max(1.0));
    let mut g = DMatrix::zeros(n, n);
    for i in 0..n {
        let ei = DVector::from_fn(n, |k, _| if k == i { 1.0 } else { 0.0 });
        g[(i, i)] = 0.5 * fd::deriv2(|t| f2(&(y + &ei * t)), h);
        for j in (i + 1)..n {
            let ej = DVector::from_fn(n, |k, _| if k == j { 1.0 } else { 0.0 });
            let val = 0.5 * fd::cross2(|s, t| f2(&(y + &ei * s + &ej * t)), h, h);
            g[(i, j)] = val;
            g[(j, i)] = val;
        }
    }
    g
}

/// Quarter third directional derivative of F^2: the Cartan tensor by FD.
/// Exactly symmetric under permutations of (u, v, w) when steps coincide.
pub fn fd_cartan(
    f: &dyn Fn(&DVector<f64>) -> f64,
    y: &DVector<f64>,
    u: &DVector<f64>,
    v: &DVector<f64>,
    w: &DVector<f64>,
) -> f64 {
    let (nu, nv, nw) = (u.norm(), v.norm(), w.norm());
    if nu == 0.0 || nv == 0.0 || nw == 0.0 {
        return 0.0;
    }
    let (uu, vv, ww) = (u / nu, v / nv, w / nw);
    let f2 = |p: &DVector<f64>| {
        let x = f(p);
        x * x
    };
    let h = fd::third_step(y.norm().max(1.0));
    let d3 = fd::cross3(|a, b, c| f2(&(y + &uu * a + &vv * b + &ww * c)), h);
    0.25 * d3 * nu * nv * nw
}

/// Quarter fourth directional derivative of F^2.
pub fn fd_cartan4(
    f: &dyn Fn(&DVector<f64>) -> f64,
    y: &DVector<f64>,
    u: &DVector<f64>,
    v: &DVector<f64>,
    w: &DVector<f64>,
    z: &DVector<f64>,
) -> f64 {
    let (nu, nv, nw, nz) = (u.norm(), v.norm(), w.norm(), z.norm());
    if nu == 0.0 || nv == 0.0 || nw == 0.0 || nz == 0.0 {
        return 0.0;
    }
    let (uu, vv, ww, zz) = (u / nu, v / nv, w / nw, z / nz);
    let f2 = |p: &DVector<f64>| {
        let x = f(p);
        x * x
    };
    let h = fd::fourth_step(y.norm().max(1.0));
    let d4 = fd::cross4(
        |a, b, c, d| f2(&(y + &uu * a + &vv * b + &ww * c + &zz * d)),
        h,
    );
    0.25 * d4 * nu * nv * nw * nz
}

/// d/dt C_{y+tz}(u,v,w) by FD over an exact cartan evaluation.
fn fd_cartan4_from_cartan(
    cartan_at: impl Fn(&DVector<f64>) -> f64,
    y: &DVector<f64>,
    z: &DVector<f64>,
) -> f64 {
    let nz = z.norm();
    if nz == 0.0 {
        return 0.0;
    }
    let zz = z / nz;
    let h = fd::first_step(y.norm().max(1.0));
    fd::deriv1(|t| cartan_at(&(y + &zz * t)), h) * nz
}

#[derive(Debug, Clone, Serialize)]
pub struct InvarianceReport {
    pub max_violation: f64,
    pub pass: bool,
    pub samples: usize,
    pub seed: u64,
}

/// Infinitesimal Ad(H)-invariance: for each h-basis z and sampled y != 0,
/// g_y(y, [z, y]_m) must vanish. Requires a reductive decomposition.
pub fn check_ad_h_invariance(
    norm: &dyn MinkowskiNorm,
    algebra: &LieAlgebra,
    samples: usize,
    seed: u64,
) -> Result<InvarianceReport> {
    if norm.dim() != algebra.dim_m() {
        return Err(Error::DimensionMismatch {
            expected: algebra.dim_m(),
            got: norm.dim(),
        });
    }
    if !algebra.is_reductive() {
        return Err(Error::UnsupportedConfiguration(
            "Ad(H)-invariance criterion needs a reductive decomposition".into(),
        ));
    }
    let n = algebra.dim_m();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut max_violation: f64 = 0.0;
    let mut used = 0;
    while used < samples {
        let y = DVector::from_fn(n, |_, _| rng.random::<f64>() * 2.0 - 1.0);
        if y.norm() < 0.3 {
            continue;
        }
        used += 1;
        let g = norm.fundamental_tensor(&y)?;
        let y_g = algebra.embed_m(&y);
        for a in algebra.dim_m()..algebra.dim_g() {
            let z = DVector::from_fn(algebra.dim_g(), |k, _| if k == a { 1.0 } else { 0.0 });
            let zy = algebra.m_part(&algebra.bracket(&z, &y_g)?);
            let violation = (y.transpose() * &g * zy)[(0, 0)].abs();
            max_violation = max_violation.max(violation);
        }
    }
    Ok(InvarianceReport {
        max_violation,
        pass: max_violation <= tol::AD_H_INVARIANCE,
        samples,
        seed,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct ConvexityReport {
    pub samples: usize,
    pub seed: u64,
    pub max_euler_residual: f64,
}

/// Sampled strong-convexity check: the fundamental tensor must be positive
/// definite in `samples` random directions. Also records the worst Euler
/// identity residual |g_y(y,y) - F(y)^2| as a diagnostic.
pub fn check_strong_convexity(
    norm: &dyn MinkowskiNorm,
    samples: usize,
    seed: u64,
) -> Result<ConvexityReport> {
    let n = norm.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut max_euler: f64 = 0.0;
    let mut used = 0;
    while used < samples {
        let y = DVector::from_fn(n, |_, _| rng.random::<f64>() * 2.0 - 1.0);
        if y.norm() < 0.3 {
            continue;
        }
        used += 1;
        let g = norm.fundamental_tensor(&y)?;
        if g.clone().cholesky().is_none() {
            return Err(Error::StrongConvexity {
                y: y.iter().copied().collect(),
            });
        }
        let f = norm.value(&y);
        let gyy = (y.transpose() * &g * &y)[(0, 0)];
        max_euler = max_euler.max((gyy - f * f).abs());
    }
    Ok(ConvexityReport {
        samples,
        seed,
        max_euler_residual: max_euler,
    })
}
