//! ODE layer: geodesics as integral curves of -eta, linear and nonlinear
//! parallel transport on m, group-curve reconstruction, and the lifting ODE
//! that factors a group curve through H.
//!
//! Classical fixed-step RK4 is the default (deterministic, testable
//! convergence order); Dormand-Prince 4(5) is available as an opt-in.

use crate::error::{Error, Result};
use crate::lie_algebra::{LieAlgebra, MatrixRepresentation};
use crate::spray::SprayModel;
use crate::textio::fmt_float;
use crate::tol;
use nalgebra::{DMatrix, DVector};
use serde_json::{json, Value};

#[derive(Debug, Clone, Copy)]
pub enum Method {
    Rk4,
    Rk45 { rtol: f64, atol: f64 },
}

#[derive(Debug, Clone, Copy)]
pub struct IntegratorConfig {
    pub method: Method,
    /// Output grid spacing; also the fixed step for RK4.
    pub dt: f64,
}

impl IntegratorConfig {
    pub fn rk4(dt: f64) -> Self {
        Self {
            method: Method::Rk4,
            dt,
        }
    }

    pub fn rk45(dt: f64, rtol: f64, atol: f64) -> Self {
        Self {
            method: Method::Rk45 { rtol, atol },
            dt,
        }
    }

    fn name(&self) -> &'static str {
        match self.method {
            Method::Rk4 => "rk4",
            Method::Rk45 { .. } => "rk45",
        }
    }
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self::rk4(1e-3)
    }
}

#[derive(Debug, Clone)]
pub struct IntegrationMeta {
    pub integrator: String,
    pub dt: f64,
    pub steps_accepted: usize,
    pub steps_rejected: usize,
}

/// Time-sampled curve in m.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<DVector<f64>>,
    pub meta: IntegrationMeta,
}

impl Trajectory {
    pub fn dim(&self) -> usize {
        self.states.first().map_or(0, |s| s.len())
    }

    pub fn last(&self) -> &DVector<f64> {
        self.states.last().expect("trajectory is never empty")
    }

    /// Cubic (4-point Lagrange) interpolation between samples.
    pub fn sample(&self, t: f64) -> Result<DVector<f64>> {
        sample_lagrange(&self.times, &self.states, t)
    }

    /// CSV rows t, y1..yn. Extra named columns may be appended.
    pub fn to_csv(&self, extra: &[(String, Vec<f64>)]) -> String {
        let n = self.dim();
        let mut out = String::from("t");
        for i in 1..=n {
            out.push_str(&format!(",y{i}"));
        }
        for (name, _) in extra {
            out.push(',');
            out.push_str(name);
        }
        out.push('\n');
        for (k, (t, y)) in self.times.iter().zip(&self.states).enumerate() {
            out.push_str(&fmt_float(*t));
            for i in 0..n {
                out.push(',');
                out.push_str(&fmt_float(y[i]));
            }
            for (_, col) in extra {
                out.push(',');
                out.push_str(&fmt_float(col[k]));
            }
            out.push('\n');
        }
        out
    }

    pub fn to_json(&self) -> Value {
        json!({
            "times": self.times,
            "states": self.states.iter().map(|s| s.iter().copied().collect::<Vec<_>>()).collect::<Vec<_>>(),
            "meta": {
                "integrator": self.meta.integrator,
                "dt": self.meta.dt,
                "steps_accepted": self.meta.steps_accepted,
                "steps_rejected": self.meta.steps_rejected,
            },
        })
    }

    fn validate(&self) -> Result<()> {
        for pair in self.times.windows(2) {
            if pair[1] <= pair[0] {
                return Err(Error::Numerical("trajectory times must increase".into()));
            }
        }
        for s in &self.states {
            if s.iter().any(|x: &f64| !x.is_finite()) {
                return Err(Error::Numerical(
                    "trajectory contains non-finite state".into(),
                ));
            }
        }
        Ok(())
    }
}

/// Time-sampled curve of group elements; first sample is the identity.
#[derive(Debug, Clone)]
pub struct GroupTrajectory {
    pub times: Vec<f64>,
    pub matrices: Vec<DMatrix<f64>>,
    pub meta: IntegrationMeta,
    /// max |C^T C - I| over samples; meaningful for orthogonal-type
    /// representations, reported rather than asserted.
    pub orthogonality_drift: f64,
}

impl GroupTrajectory {
    pub fn to_json(&self) -> Value {
        json!({
            "times": self.times,
            "matrices": self
                .matrices
                .iter()
                .map(|m| {
                    (0..m.nrows())
                        .flat_map(|r| (0..m.ncols()).map(move |c| (r, c)))
                        .map(|(r, c)| m[(r, c)])
                        .collect::<Vec<_>>()
                })
                .collect::<Vec<_>>(),
            "matrix_dim": self.matrices.first().map_or(0, |m| m.nrows()),
            "orthogonality_drift": self.orthogonality_drift,
            "meta": {
                "integrator": self.meta.integrator,
                "dt": self.meta.dt,
            },
        })
    }
}

/// A time-dependent m-vector input: dense samples (cubic interpolation) or
/// an exact callable.
pub enum CurveSource<'a> {
    Sampled(&'a Trajectory),
    Callable(&'a (dyn Fn(f64) -> Result<DVector<f64>> + Sync)),
}

impl CurveSource<'_> {
    pub fn eval(&self, t: f64) -> Result<DVector<f64>> {
        match self {
            CurveSource::Sampled(traj) => traj.sample(t),
            CurveSource::Callable(f) => f(t),
        }
    }
}

fn sample_lagrange(times: &[f64], states: &[DVector<f64>], t: f64) -> Result<DVector<f64>> {
    let n = times.len();
    if n == 0 {
        return Err(Error::Numerical("empty trajectory".into()));
    }
    let (lo, hi) = (times[0], times[n - 1]);
    let slack = 1e-9 * (1.0 + hi.abs());
    if t < lo - slack || t > hi + slack {
        return Err(Error::OutsideDomain { t, lo, hi });
    }
    if n == 1 {
        return Ok(states[0].clone());
    }
    // window of up to four nodes around t
    let mut k = times.partition_point(|&x| x <= t);
    k = k.clamp(1, n - 1);
    let start = k.saturating_sub(2).min(n.saturating_sub(4));
    let end = (start + 4).min(n);
    let idx: Vec<usize> = (start..end).collect();
    let mut acc = DVector::zeros(states[0].len());
    for &i in &idx {
        let mut weight = 1.0;
        for &j in &idx {
            if i != j {
                weight *= (t - times[j]) / (times[i] - times[j]);
            }
        }
        acc += &states[i] * weight;
    }
    Ok(acc)
}

/// Output time grid: multiples of dt, with a short final step onto t_end.
fn time_grid(t_end: f64, dt: f64) -> Result<Vec<f64>> {
    if dt <= 0.0 || t_end <= 0.0 || !dt.is_finite() || !t_end.is_finite() {
        return Err(Error::Numerical("need positive dt and t_end".into()));
    }
    let mut times = vec![0.0];
    let mut k = 1usize;
    loop {
        let t = k as f64 * dt;
        if t >= t_end - 1e-12 * t_end.max(1.0) {
            times.push(t_end);
            break;
        }
        times.push(t);
        k += 1;
    }
    Ok(times)
}

struct StepCounts {
    accepted: usize,
    rejected: usize,
}

/// Generic driver: integrate rhs over the output grid, guarding each state.
fn integrate<F, G>(
    rhs: &F,
    y0: &DVector<f64>,
    t_end: f64,
    config: IntegratorConfig,
    guard: &G,
) -> Result<Trajectory>
where
    F: Fn(f64, &DVector<f64>) -> Result<DVector<f64>>,
    G: Fn(f64, &DVector<f64>) -> Result<()>,
{
    let times = time_grid(t_end, config.dt)?;
    let mut states = Vec::with_capacity(times.len());
    let mut counts = StepCounts {
        accepted: 0,
        rejected: 0,
    };
    guard(0.0, y0)?;
    states.push(y0.clone());
    let mut y = y0.clone();
    for w in times.windows(2) {
        let (t0, t1) = (w[0], w[1]);
        y = match config.method {
            Method::Rk4 => {
                counts.accepted += 1;
                rk4_step(rhs, t0, &y, t1 - t0)?
            }
            Method::Rk45 { rtol, atol } => rk45_span(rhs, t0, &y, t1, rtol, atol, &mut counts)?,
        };
        guard(t1, &y)?;
        states.push(y.clone());
    }
    Ok(Trajectory {
        times,
        states,
        meta: IntegrationMeta {
            integrator: config.name().into(),
            dt: config.dt,
            steps_accepted: counts.accepted,
            steps_rejected: counts.rejected,
        },
    })
}

fn rk4_step<F>(rhs: &F, t: f64, y: &DVector<f64>, h: f64) -> Result<DVector<f64>>
where
    F: Fn(f64, &DVector<f64>) -> Result<DVector<f64>>,
{
    let k1 = rhs(t, y)?;
    let k2 = rhs(t + 0.5 * h, &(y + &k1 * (0.5 * h)))?;
    let k3 = rhs(t + 0.5 * h, &(y + &k2 * (0.5 * h)))?;
    let k4 = rhs(t + h, &(y + &k3 * h))?;
    Ok(y + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0))
}

/// Dormand-Prince 4(5) over [t0, t1] with PI-free step control.
#[allow(clippy::too_many_arguments)]
fn rk45_span<F>(
    rhs: &F,
    t0: f64,
    y0: &DVector<f64>,
    t1: f64,
    rtol: f64,
    atol: f64,
    counts: &mut StepCounts,
) -> Result<DVector<f64>>
where
    F: Fn(f64, &DVector<f64>) -> Result<DVector<f64>>,
{
    const A: [[f64; 6]; 6] = [
        [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
        [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
        [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
        [
            19372.0 / 6561.0,
            -25360.0 / 2187.0,
            64448.0 / 6561.0,
            -212.0 / 729.0,
            0.0,
            0.0,
        ],
        [
            9017.0 / 3168.0,
            -355.0 / 33.0,
            46732.0 / 5247.0,
            49.0 / 176.0,
            -5103.0 / 18656.0,
            0.0,
        ],
        [
            35.0 / 384.0,
            0.0,
            500.0 / 1113.0,
            125.0 / 192.0,
            -2187.0 / 6784.0,
            11.0 / 84.0,
        ],
    ];
    const C: [f64; 6] = [0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
    const E: [f64; 7] = [
        35.0 / 384.0 - 5179.0 / 57600.0,
        0.0,
        500.0 / 1113.0 - 7571.0 / 16695.0,
        125.0 / 192.0 - 393.0 / 640.0,
        -2187.0 / 6784.0 + 92097.0 / 339200.0,
        11.0 / 84.0 - 187.0 / 2100.0,
        -1.0 / 40.0,
    ];

    let mut t = t0;
    let mut y = y0.clone();
    let mut h = t1 - t0;
    let mut attempts = 0usize;
    while t < t1 - 1e-14 * t1.abs().max(1.0) {
        attempts += 1;
        if attempts > 100_000 {
            return Err(Error::IntegrationFailure {
                t,
                reason: "adaptive step count exceeded".into(),
            });
        }
        h = h.min(t1 - t);
        let mut k: Vec<DVector<f64>> = Vec::with_capacity(7);
        k.push(rhs(t, &y)?);
        for stage in 0..6 {
            let mut arg = y.clone();
            for (j, kj) in k.iter().enumerate() {
                let a = A[stage][j];
                if a != 0.0 {
                    arg += kj * (a * h);
                }
            }
            k.push(rhs(t + C[stage] * h, &arg)?);
        }
        let y_new = {
            let mut acc = y.clone();
            for (j, kj) in k.iter().enumerate().take(6) {
                let b = A[5][j];
                if b != 0.0 {
                    acc += kj * (b * h);
                }
            }
            acc
        };
        let mut err_acc = 0.0;
        let mut err_vec = DVector::zeros(y.len());
        for (j, kj) in k.iter().enumerate() {
            if E[j] != 0.0 {
                err_vec += kj * (E[j] * h);
            }
        }
        for i in 0..y.len() {
            let scale = atol + rtol * y[i].abs().max(y_new[i].abs());
            let r = err_vec[i] / scale;
            err_acc += r * r;
        }
        let err = (err_acc / y.len() as f64).sqrt();
        if err <= 1.0 {
            t += h;
            y = y_new;
            counts.accepted += 1;
        } else {
            counts.rejected += 1;
        }
        let factor = if err == 0.0 {
            5.0
        } else {
            (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
        };
        h *= factor;
        if h < 1e-14 {
            return Err(Error::IntegrationFailure {
                t,
                reason: "adaptive step underflow".into(),
            });
        }
    }
    Ok(y)
}

/// Geodesics are integral curves of -eta; aborts if the state approaches the
/// cone tip (relative threshold on |y|).
pub fn integrate_geodesic(
    spray: &SprayModel,
    y0: &DVector<f64>,
    t_end: f64,
    config: IntegratorConfig,
) -> Result<Trajectory> {
    let floor = tol::CONE_EXIT_REL * y0.norm();
    let traj = integrate(
        &|_t, y: &DVector<f64>| Ok(-spray.eta(y)?),
        y0,
        t_end,
        config,
        &|t, y: &DVector<f64>| {
            let n = y.norm();
            if n < floor || !n.is_finite() {
                return Err(Error::ConeExit { t, norm: n });
            }
            Ok(())
        },
    )?;
    traj.validate()?;
    Ok(traj)
}

/// Linear parallel transport along a base curve with trivialized velocity
/// y(t): solves dw/dt + N(y(t), w) + [y(t), w]_m = 0.
pub fn linear_transport(
    spray: &SprayModel,
    y_curve: &CurveSource,
    w0: &DVector<f64>,
    t_end: f64,
    config: IntegratorConfig,
) -> Result<Trajectory> {
    let traj = integrate(
        &|t, w: &DVector<f64>| {
            let y = y_curve.eval(t)?;
            Ok(-(spray.connection_n(&y, w)? + spray.algebra().bracket_m(&y, w)?))
        },
        w0,
        t_end,
        config,
        &|_t, w: &DVector<f64>| {
            if w.iter().any(|x: &f64| !x.is_finite()) {
                return Err(Error::Numerical("transport state became non-finite".into()));
            }
            Ok(())
        },
    )?;
    traj.validate()?;
    Ok(traj)
}

/// Nonlinear parallel transport: solves dy/dt + N(y, w(t)) = 0 for a nonzero
/// initial vector, with the cone-exit guard.
pub fn nonlinear_transport(
    spray: &SprayModel,
    w_curve: &CurveSource,
    y0: &DVector<f64>,
    t_end: f64,
    config: IntegratorConfig,
) -> Result<Trajectory> {
    let floor = tol::CONE_EXIT_REL * y0.norm();
    let traj = integrate(
        &|t, y: &DVector<f64>| {
            let w = w_curve.eval(t)?;
            Ok(-spray.connection_n(y, &w)?)
        },
        y0,
        t_end,
        config,
        &|t, y: &DVector<f64>| {
            let n = y.norm();
            if n < floor || !n.is_finite() {
                return Err(Error::ConeExit { t, norm: n });
            }
            Ok(())
        },
    )?;
    traj.validate()?;
    Ok(traj)
}

#[derive(Debug, Clone)]
pub struct RhoFlowReport {
    pub max_deviation: f64,
}

/// The flow of the autonomous field -N(., w) must coincide with nonlinear
/// transport along exp(tw)'s orbit; same ODE reached through two entry
/// points, compared sample by sample.
pub fn rho_flow_check(
    spray: &SprayModel,
    y0: &DVector<f64>,
    w: &DVector<f64>,
    t_end: f64,
    config: IntegratorConfig,
) -> Result<RhoFlowReport> {
    let autonomous = integrate(
        &|_t, y: &DVector<f64>| Ok(-spray.connection_n(y, w)?),
        y0,
        t_end,
        config,
        &|_t, _y: &DVector<f64>| Ok(()),
    )?;
    let w_clone = w.clone();
    let constant = move |_t: f64| Ok(w_clone.clone());
    let transported =
        nonlinear_transport(spray, &CurveSource::Callable(&constant), y0, t_end, config)?;
    let max_deviation = autonomous
        .states
        .iter()
        .zip(&transported.states)
        .map(|(a, b)| (a - b).norm())
        .fold(0.0, f64::max);
    Ok(RhoFlowReport { max_deviation })
}

/// Reconstruct the group curve from its left-trivialized velocity samples:
/// dC/dt = C rep(y(t)), C(0) = I, RK4 on the trajectory's own grid.
pub fn reconstruct_group_curve(
    algebra: &LieAlgebra,
    rep: &MatrixRepresentation,
    y_traj: &Trajectory,
) -> Result<GroupTrajectory> {
    let d = rep.matrix_dim();
    let x_at = |t: f64| -> Result<DMatrix<f64>> {
        let y = y_traj.sample(t)?;
        Ok(rep.map(&algebra.embed_m(&y)))
    };
    let mut matrices = vec![DMatrix::identity(d, d)];
    let mut c = DMatrix::identity(d, d);
    for w in y_traj.times.windows(2) {
        let (t0, t1) = (w[0], w[1]);
        let h = t1 - t0;
        let k1 = &c * x_at(t0)?;
        let k2 = (&c + &k1 * (0.5 * h)) * x_at(t0 + 0.5 * h)?;
        let k3 = (&c + &k2 * (0.5 * h)) * x_at(t0 + 0.5 * h)?;
        let k4 = (&c + &k3 * h) * x_at(t1)?;
        c += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
        if c.iter().any(|x: &f64| !x.is_finite()) {
            return Err(Error::IntegrationFailure {
                t: t1,
                reason: "group reconstruction became non-finite".into(),
            });
        }
        matrices.push(c.clone());
    }
    let drift = matrices
        .iter()
        .map(|m| (m.transpose() * m - DMatrix::identity(d, d)).amax())
        .fold(0.0, f64::max);
    Ok(GroupTrajectory {
        times: y_traj.times.clone(),
        matrices,
        meta: IntegrationMeta {
            integrator: "rk4".into(),
            dt: y_traj.meta.dt,
            steps_accepted: y_traj.times.len() - 1,
            steps_rejected: 0,
        },
        orthogonality_drift: drift,
    })
}

/// 4th-order time derivatives of matrix samples on a uniform grid.
fn matrix_derivatives(times: &[f64], mats: &[DMatrix<f64>]) -> Result<Vec<DMatrix<f64>>> {
    let n = mats.len();
    if n < 5 {
        return Err(Error::Numerical(
            "need at least five samples for 4th-order differentiation".into(),
        ));
    }
    let dt = times[1] - times[0];
    for w in times.windows(2) {
        if ((w[1] - w[0]) - dt).abs() > 1e-9 * dt {
            return Err(Error::Numerical(
                "matrix differentiation requires a uniform time grid".into(),
            ));
        }
    }
    let stencil_at = |coeffs: [f64; 5], base: [usize; 5]| -> DMatrix<f64> {
        let mut acc = DMatrix::zeros(mats[0].nrows(), mats[0].ncols());
        for (c, &i) in coeffs.iter().zip(base.iter()) {
            acc += &mats[i] * (*c / (12.0 * dt));
        }
        acc
    };
    let mut out = Vec::with_capacity(n);
    for k in 0..n {
        let d = if k >= 2 && k + 2 < n {
            stencil_at([1.0, -8.0, 0.0, 8.0, -1.0], [k - 2, k - 1, k, k + 1, k + 2])
        } else if k == 0 {
            stencil_at([-25.0, 48.0, -36.0, 16.0, -3.0], [0, 1, 2, 3, 4])
        } else if k == 1 {
            stencil_at([-3.0, -10.0, 18.0, -6.0, 1.0], [0, 1, 2, 3, 4])
        } else if k == n - 2 {
            stencil_at(
                [-1.0, 6.0, -18.0, 10.0, 3.0],
                [n - 5, n - 4, n - 3, n - 2, n - 1],
            )
        } else {
            stencil_at(
                [3.0, -16.0, 36.0, -48.0, 25.0],
                [n - 5, n - 4, n - 3, n - 2, n - 1],
            )
        };
        out.push(d);
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct LiftedCurve {
    /// The H-valued factor with h(0) = identity.
    pub h: GroupTrajectory,
    /// The m-part of the corrected trivialized velocity.
    pub y: Trajectory,
    /// Max h-component of the trivialized velocity of g(t) h(t), from an
    /// independent finite-difference pass over the computed h samples.
    pub max_h_residual: f64,
}

/// Factor a group curve g(t) as g(t) h(t) so the corrected curve has
/// trivialized velocity in m. Solves the H-valued ODE
/// dh/dt = -h rep((Ad(h^-1)(g^-1 g'))_h) with h(0) = identity.
///
/// Global existence needs a reductive decomposition or compact H; otherwise
/// the integration runs until blow-up and reports the failure point.
pub fn lift_curve(
    algebra: &LieAlgebra,
    rep: &MatrixRepresentation,
    g_curve: &GroupTrajectory,
) -> Result<LiftedCurve> {
    let proj = rep.projector()?;
    let times = &g_curve.times;
    let g_dots = matrix_derivatives(times, &g_curve.matrices)?;
    // trivialized velocity samples xi(t) = coords(g^-1 g')
    let mut xi_states = Vec::with_capacity(times.len());
    for (g, gd) in g_curve.matrices.iter().zip(&g_dots) {
        let g_inv = g
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::Numerical("singular group sample in lift".into()))?;
        xi_states.push(proj.coords(&(&g_inv * gd)));
    }
    let xi_at = |t: f64| sample_lagrange(times, &xi_states, t);

    let d = rep.matrix_dim();
    let rhs = |t: f64, h: &DMatrix<f64>| -> Result<DMatrix<f64>> {
        let xi = xi_at(t)?;
        let h_inv = h
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::IntegrationFailure {
                t,
                reason: "H-factor became singular (lifting ODE blow-up)".into(),
            })?;
        let ad = proj.coords(&(&h_inv * rep.map(&xi) * h));
        let ad_h = algebra.project_h(&ad)?;
        Ok(-(h * rep.map(&ad_h)))
    };
    let mut h_mats = vec![DMatrix::identity(d, d)];
    let mut h = DMatrix::identity(d, d);
    for w in times.windows(2) {
        let (t0, t1) = (w[0], w[1]);
        let dt = t1 - t0;
        let k1 = rhs(t0, &h)?;
        let k2 = rhs(t0 + 0.5 * dt, &(&h + &k1 * (0.5 * dt)))?;
        let k3 = rhs(t0 + 0.5 * dt, &(&h + &k2 * (0.5 * dt)))?;
        let k4 = rhs(t1, &(&h + &k3 * dt))?;
        h += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0);
        if h.iter().any(|x: &f64| !x.is_finite()) || h.norm() > 1e8 {
            return Err(Error::IntegrationFailure {
                t: t1,
                reason: "lifting ODE blew up (expected only for non-reductive, non-compact H)"
                    .into(),
            });
        }
        h_mats.push(h.clone());
    }

    // corrected velocity and the defining-property residual, with dh/dt from
    // an independent finite-difference pass
    let h_dots = matrix_derivatives(times, &h_mats)?;
    let mut y_states = Vec::with_capacity(times.len());
    let mut max_h_residual: f64 = 0.0;
    for ((h, hd), xi) in h_mats.iter().zip(&h_dots).zip(&xi_states) {
        let h_inv = h
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::Numerical("singular H-factor sample".into()))?;
        let ad = proj.coords(&(&h_inv * rep.map(xi) * h));
        let trivialized = &ad + proj.coords(&(&h_inv * hd));
        let h_part = algebra.project_h(&trivialized)?;
        max_h_residual = max_h_residual.max(h_part.amax());
        y_states.push(algebra.m_part(&ad));
    }
    let drift = h_mats
        .iter()
        .map(|m| (m.transpose() * m - DMatrix::identity(d, d)).amax())
        .fold(0.0, f64::max);
    Ok(LiftedCurve {
        h: GroupTrajectory {
            times: times.clone(),
            matrices: h_mats,
            meta: IntegrationMeta {
                integrator: "rk4".into(),
                dt: if times.len() > 1 {
                    times[1] - times[0]
                } else {
                    0.0
                },
                steps_accepted: times.len() - 1,
                steps_rejected: 0,
            },
            orthogonality_drift: drift,
        },
        y: Trajectory {
            times: times.clone(),
            states: y_states,
            meta: IntegrationMeta {
                integrator: "derived".into(),
                dt: if times.len() > 1 {
                    times[1] - times[0]
                } else {
                    0.0
                },
                steps_accepted: 0,
                steps_rejected: 0,
            },
        },
        max_h_residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lie_algebra::preset;
    use crate::linalg::expm;
    use crate::minkowski::{EuclideanNorm, RandersNorm};
    use std::sync::Arc;

    fn v3(a: f64, b: f64, c: f64) -> DVector<f64> {
        DVector::from_vec(vec![a, b, c])
    }

    fn euler_top() -> SprayModel {
        let p = preset("su2", None).unwrap();
        let a = DMatrix::from_diagonal(&v3(1.0, 2.0, 3.0));
        SprayModel::finsler(
            Arc::new(p.algebra),
            Arc::new(EuclideanNorm::new(a).unwrap()),
        )
        .unwrap()
    }

    fn biinvariant() -> SprayModel {
        let p = preset("su2", None).unwrap();
        SprayModel::finsler(Arc::new(p.algebra), Arc::new(EuclideanNorm::identity(3))).unwrap()
    }

    #[test]
    fn zero_eta_freezes_geodesics() {
        let p = preset("su2_u1", None).unwrap();
        let spray =
            SprayModel::finsler(Arc::new(p.algebra), Arc::new(EuclideanNorm::identity(2))).unwrap();
        let y0 = DVector::from_vec(vec![0.4, -0.7]);
        let traj = integrate_geodesic(&spray, &y0, 1.0, IntegratorConfig::rk4(0.05)).unwrap();
        for s in &traj.states {
            assert!((s - &y0).norm() < 1e-14);
        }
    }

    #[test]
    fn euler_top_conserves_energy_and_casimir() {
        let spray = euler_top();
        let y0 = v3(1.0, 0.01, 0.0);
        let traj = integrate_geodesic(&spray, &y0, 10.0, IntegratorConfig::rk4(1e-3)).unwrap();
        let inertia = [1.0, 2.0, 3.0];
        let energy = |y: &DVector<f64>| {
            0.5 * (inertia[0] * y[0] * y[0] + inertia[1] * y[1] * y[1] + inertia[2] * y[2] * y[2])
        };
        let casimir = |y: &DVector<f64>| {
            (inertia[0] * y[0]).powi(2) + (inertia[1] * y[1]).powi(2) + (inertia[2] * y[2]).powi(2)
        };
        let (e0, c0) = (energy(&y0), casimir(&y0));
        for s in &traj.states {
            assert!((energy(s) - e0).abs() < 1e-8);
            assert!((casimir(s) - c0).abs() < 1e-8);
        }
    }

    #[test]
    fn finsler_norm_is_conserved_along_geodesics() {
        let p = preset("heisenberg3", None).unwrap();
        let norm = RandersNorm::new(DMatrix::identity(3, 3), v3(0.0, 0.0, 0.4)).unwrap();
        let spray = SprayModel::finsler(Arc::new(p.algebra), Arc::new(norm.clone())).unwrap();
        let y0 = v3(0.8, -0.5, 0.3);
        let traj = integrate_geodesic(&spray, &y0, 1.0, IntegratorConfig::rk4(1e-3)).unwrap();
        use crate::minkowski::MinkowskiNorm;
        let f0 = norm.value(&y0);
        for s in &traj.states {
            assert!((norm.value(s) - f0).abs() < 1e-8);
        }
    }

    #[test]
    fn rk45_matches_rk4_on_euler_top() {
        let spray = euler_top();
        let y0 = v3(1.0, 0.3, -0.2);
        let fine = integrate_geodesic(&spray, &y0, 1.0, IntegratorConfig::rk4(1e-4)).unwrap();
        let adaptive =
            integrate_geodesic(&spray, &y0, 1.0, IntegratorConfig::rk45(0.1, 1e-10, 1e-12))
                .unwrap();
        assert!(adaptive.meta.steps_accepted > 0);
        let diff = (adaptive.last() - fine.last()).norm();
        assert!(diff < 1e-8, "rk45 vs rk4 endpoint diff {diff:.3e}");
    }

    #[test]
    fn abelian_transport_is_constant() {
        let p = preset("abelian", Some(3)).unwrap();
        let spray =
            SprayModel::finsler(Arc::new(p.algebra), Arc::new(EuclideanNorm::identity(3))).unwrap();
        let y_const = v3(1.0, 0.0, 0.0);
        let curve = move |_t: f64| Ok(y_const.clone());
        let w0 = v3(0.3, -0.8, 0.5);
        let traj = linear_transport(
            &spray,
            &CurveSource::Callable(&curve),
            &w0,
            1.0,
            IntegratorConfig::rk4(0.05),
        )
        .unwrap();
        assert!((traj.last() - &w0).norm() < 1e-14);
    }

    #[test]
    fn biinvariant_linear_transport_closed_form() {
        let spray = biinvariant();
        let y = v3(0.7, -0.2, 0.5);
        let y_curve = y.clone();
        let curve = move |_t: f64| Ok(y_curve.clone());
        let w0 = v3(-0.3, 0.9, 0.1);
        let t_end = 1.0;
        let traj = linear_transport(
            &spray,
            &CurveSource::Callable(&curve),
            &w0,
            t_end,
            IntegratorConfig::rk4(1e-3),
        )
        .unwrap();
        let ad = spray.algebra().ad_m_matrix(&y).unwrap();
        let closed = expm(&(ad * (-0.5 * t_end))) * &w0;
        assert!((traj.last() - closed).norm() < 1e-8);
    }

    #[test]
    fn biinvariant_nonlinear_transport_closed_form() {
        let spray = biinvariant();
        let w = v3(0.4, 0.1, -0.6);
        let w_curve = w.clone();
        let curve = move |_t: f64| Ok(w_curve.clone());
        let y0 = v3(0.7, -0.2, 0.5);
        let t_end = 1.0;
        let traj = nonlinear_transport(
            &spray,
            &CurveSource::Callable(&curve),
            &y0,
            t_end,
            IntegratorConfig::rk4(1e-3),
        )
        .unwrap();
        let ad_w = spray.algebra().ad_m_matrix(&w).unwrap();
        let closed = expm(&(ad_w * (-0.5 * t_end))) * &y0;
        assert!((traj.last() - closed).norm() < 1e-8);
    }

    #[test]
    fn linear_transport_superposes() {
        let spray = euler_top();
        let y0 = v3(1.0, 0.3, -0.2);
        let base = integrate_geodesic(&spray, &y0, 0.5, IntegratorConfig::rk4(5e-3)).unwrap();
        let w0 = v3(0.3, -0.8, 0.5);
        let v0 = v3(-1.0, 0.2, 0.4);
        let combo = &w0 * 1.3 + &v0 * -0.7;
        let cfg = IntegratorConfig::rk4(5e-3);
        let run = |start: &DVector<f64>| {
            linear_transport(&spray, &CurveSource::Sampled(&base), start, 0.5, cfg)
                .unwrap()
                .last()
                .clone()
        };
        let lhs = run(&combo);
        let rhs = run(&w0) * 1.3 + run(&v0) * -0.7;
        assert!((lhs - rhs).norm() < 1e-10);
    }

    /// The geodesic's own velocity field is linearly parallel, so the metric
    /// pairing of a transported vector against it stays constant.
    #[test]
    fn metric_pairing_with_velocity_is_constant() {
        let p = preset("su2", None).unwrap();
        let a = DMatrix::from_diagonal(&v3(1.0, 2.0, 3.0));
        let norm = EuclideanNorm::new(a).unwrap();
        let spray = SprayModel::finsler(Arc::new(p.algebra), Arc::new(norm.clone())).unwrap();
        let y0 = v3(1.0, 0.3, -0.2);
        let t_end = 1.0;
        let cfg = IntegratorConfig::rk4(1e-3);
        let geo = integrate_geodesic(&spray, &y0, t_end, cfg).unwrap();
        let w0 = v3(0.3, -0.8, 0.5);
        let wtr = linear_transport(&spray, &CurveSource::Sampled(&geo), &w0, t_end, cfg).unwrap();
        use crate::minkowski::MinkowskiNorm;
        let pairing = |y: &DVector<f64>, w: &DVector<f64>| {
            let g = norm.fundamental_tensor(y).unwrap();
            (y.transpose() * g * w)[(0, 0)]
        };
        let first = pairing(&y0, &w0);
        for (y, w) in geo.states.iter().zip(&wtr.states) {
            assert!((pairing(y, w) - first).abs() < 1e-6);
        }
    }

    #[test]
    fn sampling_outside_domain_errors() {
        let traj = Trajectory {
            times: (0..6).map(|k| k as f64 * 0.1).collect(),
            states: (0..6).map(|k| v3(k as f64, 0.0, 0.0)).collect(),
            meta: IntegrationMeta {
                integrator: "manual".into(),
                dt: 0.1,
                steps_accepted: 0,
                steps_rejected: 0,
            },
        };
        assert!(matches!(traj.sample(0.7), Err(Error::OutsideDomain { .. })));
        assert!(matches!(
            traj.sample(-0.1),
            Err(Error::OutsideDomain { .. })
        ));
        // interior cubic interpolation reproduces the linear ramp exactly
        let mid = traj.sample(0.25).unwrap();
        assert!((mid[0] - 2.5).abs() < 1e-12);
    }

    #[test]
    fn group_trajectory_serializes_row_major() {
        let g = GroupTrajectory {
            times: vec![0.0, 1.0],
            matrices: vec![
                DMatrix::identity(2, 2),
                DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]),
            ],
            meta: IntegrationMeta {
                integrator: "rk4".into(),
                dt: 1.0,
                steps_accepted: 1,
                steps_rejected: 0,
            },
            orthogonality_drift: 0.0,
        };
        let v = g.to_json();
        assert_eq!(v["matrix_dim"], 2);
        let flat: Vec<f64> = v["matrices"][1]
            .as_array()
            .unwrap()
            .iter()
            .map(|x| x.as_f64().unwrap())
            .collect();
        assert_eq!(flat, vec![1.0, 2.0, 3.0, 4.0]);
    }

    #[test]
    fn transport_time_reversal_returns_start() {
        let spray = euler_top();
        let y0 = v3(1.0, 0.3, -0.2);
        let t_end = 0.5;
        let cfg = IntegratorConfig::rk4(1e-3);
        let forward_base = integrate_geodesic(&spray, &y0, t_end, cfg).unwrap();
        let w0 = v3(0.3, -0.8, 0.5);
        let w_fwd = linear_transport(
            &spray,
            &CurveSource::Sampled(&forward_base),
            &w0,
            t_end,
            cfg,
        )
        .unwrap();
        // reverse the base curve and transport back
        let reversed = move |t: f64| forward_base.sample(t_end - t).map(|y| -y);
        let w_back = linear_transport(
            &spray,
            &CurveSource::Callable(&reversed),
            w_fwd.last(),
            t_end,
            cfg,
        )
        .unwrap();
        assert!((w_back.last() - &w0).norm() < 1e-9);
    }

    #[test]
    fn rho_flow_paths_coincide() {
        let randers_heis = {
            let p = preset("heisenberg3", None).unwrap();
            let norm =
                RandersNorm::new(DMatrix::identity(3, 3), v3(0.0, 0.0, 0.4)).unwrap();
            SprayModel::finsler(Arc::new(p.algebra), Arc::new(norm)).unwrap()
        };
        for spray in [biinvariant(), euler_top(), randers_heis] {
            let report = rho_flow_check(
                &spray,
                &v3(0.9, -0.1, 0.4),
                &v3(0.2, 0.7, -0.5),
                1.0,
                IntegratorConfig::rk4(1e-2),
            )
            .unwrap();
            assert!(report.max_deviation < 1e-10);
        }
    }

    #[test]
    fn reconstruction_matches_matrix_exponential() {
        let p = preset("su2", None).unwrap();
        let rep = p.representation.as_ref().unwrap();
        let y = v3(0.4, -0.7, 0.2);
        // constant-velocity trajectory
        let times: Vec<f64> = (0..=100).map(|k| k as f64 * 0.01).collect();
        let states = vec![y.clone(); times.len()];
        let traj = Trajectory {
            times,
            states,
            meta: IntegrationMeta {
                integrator: "manual".into(),
                dt: 0.01,
                steps_accepted: 0,
                steps_rejected: 0,
            },
        };
        let group = reconstruct_group_curve(&p.algebra, rep, &traj).unwrap();
        let expected = expm(&rep.map(&y));
        assert!((group.matrices.last().unwrap() - expected).amax() < 1e-7);
        assert_eq!(group.matrices[0], DMatrix::identity(3, 3));
    }

    /// With commuting generators the reconstruction is the exponential of
    /// the integrated velocity, even for a time-varying curve.
    #[test]
    fn abelian_reconstruction_is_exponential_of_integral() {
        let p = preset("abelian", Some(3)).unwrap();
        let rep = p.representation.as_ref().unwrap();
        let dt = 0.01;
        let times: Vec<f64> = (0..=100).map(|k| k as f64 * dt).collect();
        let states: Vec<DVector<f64>> = times
            .iter()
            .map(|&t| v3(t.cos(), t.sin(), 1.0))
            .collect();
        let traj = Trajectory {
            times: times.clone(),
            states,
            meta: IntegrationMeta {
                integrator: "manual".into(),
                dt,
                steps_accepted: 0,
                steps_rejected: 0,
            },
        };
        let group = reconstruct_group_curve(&p.algebra, rep, &traj).unwrap();
        let t_end: f64 = 1.0;
        let integral = v3(t_end.sin(), 1.0 - t_end.cos(), t_end);
        let expected = expm(&rep.map(&integral));
        assert!((group.matrices.last().unwrap() - expected).amax() < 1e-9);
    }

    #[test]
    fn geodesic_reconstruction_stays_in_group() {
        let spray = euler_top();
        let p = preset("su2", None).unwrap();
        let rep = p.representation.as_ref().unwrap();
        let y0 = v3(1.0, 0.3, -0.2);
        let traj = integrate_geodesic(&spray, &y0, 1.0, IntegratorConfig::rk4(1e-3)).unwrap();
        let group = reconstruct_group_curve(spray.algebra(), rep, &traj).unwrap();
        assert!(group.orthogonality_drift < 1e-7);
    }

    /// Geodesic correspondence: the reconstructed curve's left-trivialized
    /// velocity must reproduce y(t).
    #[test]
    fn reconstructed_velocity_matches_trajectory() {
        let spray = euler_top();
        let p = preset("su2", None).unwrap();
        let rep = p.representation.as_ref().unwrap();
        let y0 = v3(1.0, 0.3, -0.2);
        let traj = integrate_geodesic(&spray, &y0, 1.0, IntegratorConfig::rk4(1e-3)).unwrap();
        let group = reconstruct_group_curve(spray.algebra(), rep, &traj).unwrap();
        let dots = matrix_derivatives(&group.times, &group.matrices).unwrap();
        let proj = rep.projector().unwrap();
        let mut worst: f64 = 0.0;
        for ((g, dot), y) in group.matrices.iter().zip(&dots).zip(&traj.states) {
            let g_inv = g.clone().try_inverse().unwrap();
            let xi = proj.coords(&(&g_inv * dot));
            worst = worst.max((spray.algebra().m_part(&xi) - y).norm());
        }
        assert!(worst < 1e-7, "trivialized velocity residual {worst:.3e}");
    }

    #[test]
    fn lift_identity_when_velocity_already_in_m() {
        let p = preset("su2_u1", None).unwrap();
        let rep = p.representation.as_ref().unwrap();
        let times: Vec<f64> = (0..=60).map(|k| k as f64 * 0.01).collect();
        let e1 = v3(1.0, 0.0, 0.0);
        let mats: Vec<DMatrix<f64>> = times.iter().map(|&t| expm(&(rep.map(&e1) * t))).collect();
        let g_curve = GroupTrajectory {
            times: times.clone(),
            matrices: mats,
            meta: IntegrationMeta {
                integrator: "manual".into(),
                dt: 0.01,
                steps_accepted: 0,
                steps_rejected: 0,
            },
            orthogonality_drift: 0.0,
        };
        let lifted = lift_curve(&p.algebra, rep, &g_curve).unwrap();
        for h in &lifted.h.matrices {
            assert!((h - DMatrix::identity(3, 3)).amax() < 1e-9);
        }
        assert!(lifted.max_h_residual < 1e-6);
    }

    #[test]
    fn lift_mixed_direction_keeps_velocity_in_m() {
        let p = preset("su2_u1", None).unwrap();
        let rep = p.representation.as_ref().unwrap();
        let dir = v3(1.0, 0.0, 1.0); // e1 + e3
        let times: Vec<f64> = (0..=80).map(|k| k as f64 * 0.005).collect();
        let mats: Vec<DMatrix<f64>> = times.iter().map(|&t| expm(&(rep.map(&dir) * t))).collect();
        let g_curve = GroupTrajectory {
            times: times.clone(),
            matrices: mats,
            meta: IntegrationMeta {
                integrator: "manual".into(),
                dt: 0.005,
                steps_accepted: 0,
                steps_rejected: 0,
            },
            orthogonality_drift: 0.0,
        };
        let lifted = lift_curve(&p.algebra, rep, &g_curve).unwrap();
        assert!(
            lifted.max_h_residual < 1e-6,
            "h-residual {:.3e}",
            lifted.max_h_residual
        );
        // h moved away from the identity
        let last_h = lifted.h.matrices.last().unwrap();
        assert!((last_h - DMatrix::identity(3, 3)).amax() > 1e-3);
    }

    #[test]
    fn lift_abelian_decouples() {
        let p = preset("abelian", Some(3)).unwrap();
        let algebra = p.algebra.with_dim_m(2).unwrap();
        let rep = p.representation.as_ref().unwrap();
        let dir = v3(1.0, 0.0, 0.5); // e1 in m, e3 in h
        let times: Vec<f64> = (0..=50).map(|k| k as f64 * 0.01).collect();
        let mats: Vec<DMatrix<f64>> = times.iter().map(|&t| expm(&(rep.map(&dir) * t))).collect();
        let g_curve = GroupTrajectory {
            times: times.clone(),
            matrices: mats,
            meta: IntegrationMeta {
                integrator: "manual".into(),
                dt: 0.01,
                steps_accepted: 0,
                steps_rejected: 0,
            },
            orthogonality_drift: 0.0,
        };
        let lifted = lift_curve(&algebra, rep, &g_curve).unwrap();
        // h(t) = exp(-t * h-part)
        let h_dir = v3(0.0, 0.0, -0.5);
        for (k, &t) in times.iter().enumerate() {
            let expected = expm(&(rep.map(&h_dir) * t));
            assert!((&lifted.h.matrices[k] - expected).amax() < 1e-8);
        }
        // corrected velocity is the m-part
        for y in &lifted.y.states {
            assert!((y - DVector::from_vec(vec![1.0, 0.0])).norm() < 1e-8);
        }
    }

    #[test]
    fn rk4_convergence_is_fourth_order() {
        let spray = euler_top();
        // fast tumbling orbit keeps truncation well above roundoff
        let y0 = v3(3.0, 5.0, 1.5);
        let t_end = 5.0;
        let reference =
            integrate_geodesic(&spray, &y0, t_end, IntegratorConfig::rk4(1e-5)).unwrap();
        let mut errors = Vec::new();
        for dt in [4e-3, 2e-3, 1e-3] {
            let traj = integrate_geodesic(&spray, &y0, t_end, IntegratorConfig::rk4(dt)).unwrap();
            errors.push((traj.last() - reference.last()).norm());
        }
        for pair in errors.windows(2) {
            let ratio = pair[0] / pair[1];
            assert!(
                (12.0..20.0).contains(&ratio),
                "convergence ratio {ratio} outside [12, 20]"
            );
        }
    }

    #[test]
    fn cone_exit_is_detected() {
        let p = preset("su2", None).unwrap();
        // contraction field pulls y to 0 fast; not 2-homogeneous, but the
        // integrator must still abort cleanly at the cone boundary
        let spray = SprayModel::direct(
            Arc::new(p.algebra),
            Arc::new(move |y: &DVector<f64>| Ok(y * 40.0)),
            None,
        );
        let result =
            integrate_geodesic(&spray, &v3(1.0, 0.0, 0.0), 2.0, IntegratorConfig::rk4(0.01));
        assert!(matches!(result, Err(Error::ConeExit { .. })));
    }

    #[test]
    fn csv_serialization_shape() {
        let traj = Trajectory {
            times: vec![0.0, 0.5],
            states: vec![v3(1.0, 2.0, 3.0), v3(4.0, 5.0, 6.0)],
            meta: IntegrationMeta {
                integrator: "rk4".into(),
                dt: 0.5,
                steps_accepted: 1,
                steps_rejected: 0,
            },
        };
        let csv = traj.to_csv(&[("f".into(), vec![9.0, 9.5])]);
        let mut lines = csv.lines();
        assert_eq!(lines.next().unwrap(), "t,y1,y2,y3,f");
        assert!(lines
            .next()
            .unwrap()
            .starts_with("0.0000000000000000e0,1.0000000000000000e0"));

        let json = traj.to_json();
        assert_eq!(json["states"][1].as_array().unwrap().len(), 3);
        assert_eq!(json["meta"]["integrator"], "rk4");
    }
}
