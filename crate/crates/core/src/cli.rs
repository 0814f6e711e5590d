//! Command implementations behind the batch front end. Each command takes a
//! built scene and returns deterministic text output; the binary handles
//! argument parsing, file IO, and exit codes.

use crate::chart::ChartMetric;
use crate::compare::{oracle_compare, CompareRow};
use crate::dynamics::{integrate_geodesic, linear_transport, nonlinear_transport, CurveSource};
use crate::error::{Error, Result};
use crate::lie_algebra::LieAlgebra;
use crate::minkowski::{check_ad_h_invariance, check_strong_convexity, MinkowskiNorm};
use crate::scene::{BuiltScene, MetricSpec, Scene};
use crate::spray::{eta_homogeneity_residual, n_homogeneity_residual};
use crate::textio::{fmt_float, write_json};
use crate::tol;
use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde_json::{json, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFormat {
    Json,
    Csv,
}

/// Result of a command: the text to emit and whether every check passed
/// (commands without a pass/fail notion always succeed).
pub struct CommandOutput {
    pub text: String,
    pub all_passed: bool,
}

impl CommandOutput {
    fn ok(text: String) -> Self {
        Self {
            text,
            all_passed: true,
        }
    }
}

fn vec_json(v: &DVector<f64>) -> Value {
    Value::Array(v.iter().map(|&x| json!(x)).collect())
}

fn matrix_json(m: &nalgebra::DMatrix<f64>) -> Value {
    Value::Array(
        (0..m.nrows())
            .map(|r| Value::Array((0..m.ncols()).map(|c| json!(m[(r, c)])).collect()))
            .collect(),
    )
}

fn check_entry(
    checks: &mut Vec<Value>,
    all: &mut bool,
    name: &str,
    pass: bool,
    residual: f64,
    tolerance: f64,
) {
    *all &= pass;
    checks.push(json!({
        "name": name,
        "pass": pass,
        "max_violation": residual,
        "tolerance": tolerance,
    }));
}

fn skipped_entry(checks: &mut Vec<Value>, name: &str, pass: bool, reason: String) {
    checks.push(json!({"name": name, "pass": pass, "skipped": reason}));
}

/// Structural checks: Jacobi, subalgebra closure, reductivity, convexity,
/// invariance, equivariance. Exit code 0 iff all pass.
pub fn cmd_validate(scene: &Scene, seed: u64) -> Result<CommandOutput> {
    let (algebra, _rep) = scene.build_algebra()?;
    let norm = scene.build_norm(algebra.dim_m())?;
    let mut checks: Vec<Value> = Vec::new();
    let mut all = true;

    let jacobi = max_jacobi_residual(&algebra);
    check_entry(
        &mut checks,
        &mut all,
        "jacobi",
        jacobi <= tol::JACOBI,
        jacobi,
        tol::JACOBI,
    );
    let sub = max_subalgebra_residual(&algebra);
    check_entry(
        &mut checks,
        &mut all,
        "h_subalgebra",
        sub <= tol::SUBALGEBRA,
        sub,
        tol::SUBALGEBRA,
    );
    let red = algebra.reductivity_report();
    check_entry(
        &mut checks,
        &mut all,
        "reductive",
        red.pass(),
        red.max_violation(),
        tol::REDUCTIVE,
    );

    match &norm {
        Some(norm) => {
            match check_strong_convexity(norm.as_ref(), 64, seed) {
                Ok(report) => check_entry(
                    &mut checks,
                    &mut all,
                    "strong_convexity",
                    true,
                    report.max_euler_residual,
                    f64::INFINITY,
                ),
                Err(Error::StrongConvexity { .. }) => check_entry(
                    &mut checks,
                    &mut all,
                    "strong_convexity",
                    false,
                    f64::NAN,
                    0.0,
                ),
                Err(e) => return Err(e),
            }
            if red.pass() {
                let inv = check_ad_h_invariance(norm.as_ref(), &algebra, 64, seed)?;
                check_entry(
                    &mut checks,
                    &mut all,
                    "ad_h_invariance",
                    inv.max_violation <= scene.tolerances.invariance,
                    inv.max_violation,
                    scene.tolerances.invariance,
                );
            } else {
                skipped_entry(
                    &mut checks,
                    "ad_h_invariance",
                    false,
                    "non-reductive decomposition".into(),
                );
                all = false;
            }
        }
        None => skipped_entry(
            &mut checks,
            "strong_convexity",
            true,
            "direct spray source (no norm)".into(),
        ),
    }

    // equivariance needs a constructible spray and a reductive split
    match scene.build() {
        Ok(built) if built.algebra.is_reductive() => {
            let report = built.spray.check_equivariance(32, seed)?;
            check_entry(
                &mut checks,
                &mut all,
                "equivariance",
                report.max_residual <= scene.tolerances.equivariance,
                report.max_residual,
                scene.tolerances.equivariance,
            );
        }
        Ok(_) => skipped_entry(
            &mut checks,
            "equivariance",
            true,
            "non-reductive decomposition (already reported)".into(),
        ),
        Err(e) => {
            skipped_entry(
                &mut checks,
                "equivariance",
                false,
                format!("spray not constructible: {e}"),
            );
            all = false;
        }
    }

    let unimodular = (algebra.dim_m()..algebra.dim_g())
        .map(|a| algebra.ad_m_trace_of_h_generator(a).abs())
        .fold(0.0, f64::max);
    checks.push(json!({
        "name": "unimodular_isotropy",
        "pass": true,
        "max_violation": unimodular,
        "tolerance": tol::UNIMODULAR,
        "warning": unimodular > tol::UNIMODULAR,
    }));

    let report = json!({"checks": checks, "pass": all, "seed": seed});
    Ok(CommandOutput {
        text: write_json(&report),
        all_passed: all,
    })
}

fn max_jacobi_residual(algebra: &LieAlgebra) -> f64 {
    let m = algebra.dim_g();
    let mut worst: f64 = 0.0;
    for i in 0..m {
        for j in 0..m {
            for k in 0..m {
                for p in 0..m {
                    let mut r = 0.0;
                    for l in 0..m {
                        r += algebra.c(i, j, l) * algebra.c(l, k, p)
                            + algebra.c(j, k, l) * algebra.c(l, i, p)
                            + algebra.c(k, i, l) * algebra.c(l, j, p);
                    }
                    worst = worst.max(r.abs());
                }
            }
        }
    }
    worst
}

fn max_subalgebra_residual(algebra: &LieAlgebra) -> f64 {
    let mut worst: f64 = 0.0;
    for a in algebra.dim_m()..algebra.dim_g() {
        for b in algebra.dim_m()..algebra.dim_g() {
            for i in 0..algebra.dim_m() {
                worst = worst.max(algebra.c(a, b, i).abs());
            }
        }
    }
    worst
}

/// eta(y), the connection columns N(y, e_j), and homogeneity residuals.
pub fn cmd_eta(built: &BuiltScene, y: &DVector<f64>, seed: u64) -> Result<CommandOutput> {
    let spray = &built.spray;
    let n = built.algebra.dim_m();
    let eta = spray.eta(y)?;
    let mut columns = Vec::with_capacity(n);
    for j in 0..n {
        let ej = DVector::from_fn(n, |k, _| if k == j { 1.0 } else { 0.0 });
        columns.push(vec_json(&spray.connection_n(y, &ej)?));
    }
    let eta_res = eta_homogeneity_residual(spray, y, &[0.5, 2.0, 3.7])?;
    let mut n_res: f64 = 0.0;
    for j in 0..n {
        let ej = DVector::from_fn(n, |k, _| if k == j { 1.0 } else { 0.0 });
        n_res = n_res.max(n_homogeneity_residual(spray, y, &ej, &[0.5, 2.0])?);
    }
    let report = json!({
        "y": vec_json(y),
        "eta": vec_json(&eta),
        "n_columns": columns,
        "homogeneity_residuals": {"eta": eta_res, "n": n_res},
        "seed": seed,
    });
    Ok(CommandOutput::ok(write_json(&report)))
}

/// Riemann operator with its five-term breakdown, S-curvature, flag
/// curvatures over a g_y-orthonormal complement, and Landsberg values.
pub fn cmd_curvature(built: &BuiltScene, y: &DVector<f64>, seed: u64) -> Result<CommandOutput> {
    let spray = &built.spray;
    let n = built.algebra.dim_m();
    let mut total = nalgebra::DMatrix::zeros(n, n);
    let mut terms = vec![nalgebra::DMatrix::zeros(n, n); 5];
    for j in 0..n {
        let ej = DVector::from_fn(n, |k, _| if k == j { 1.0 } else { 0.0 });
        let r = spray.riemann_apply(y, &ej)?;
        total.set_column(j, &r.total);
        terms[0].set_column(j, &r.isotropy);
        terms[1].set_column(j, &r.spray_derivative);
        terms[2].set_column(j, &r.nested_connection);
        terms[3].set_column(j, &r.connection_of_bracket);
        terms[4].set_column(j, &r.bracket_of_connection);
    }
    let r_y_y = &total * y;
    let s = spray.s_curvature(y)?;

    let (flags, landsberg) = if spray.is_finsler() {
        let basis = gy_orthonormal_complement(spray.norm().unwrap().as_ref(), y)?;
        let mut flags = Vec::new();
        let mut lands = Vec::new();
        for w in &basis {
            flags.push(json!({
                "w": vec_json(w),
                "value": spray.flag_curvature(y, w)?,
            }));
            lands.push(json!({
                "w": vec_json(w),
                "value": spray.landsberg(y, w)?,
            }));
        }
        (Value::Array(flags), Value::Array(lands))
    } else {
        (Value::Null, Value::Null)
    };

    let report = json!({
        "y": vec_json(y),
        "riemann": matrix_json(&total),
        "terms": {
            "isotropy": matrix_json(&terms[0]),
            "spray_derivative": matrix_json(&terms[1]),
            "nested_connection": matrix_json(&terms[2]),
            "connection_of_bracket": matrix_json(&terms[3]),
            "bracket_of_connection": matrix_json(&terms[4]),
        },
        "riemann_applied_to_y": vec_json(&r_y_y),
        "s_curvature": s,
        "unimodularity_defect": spray.unimodularity_defect(),
        "flag_curvatures": flags,
        "landsberg": landsberg,
        "seed": seed,
    });
    Ok(CommandOutput::ok(write_json(&report)))
}

fn gy_orthonormal_complement(
    norm: &dyn MinkowskiNorm,
    y: &DVector<f64>,
) -> Result<Vec<DVector<f64>>> {
    let n = y.len();
    let g = norm.fundamental_tensor(y)?;
    let inner = |a: &DVector<f64>, b: &DVector<f64>| (a.transpose() * &g * b)[(0, 0)];
    let mut basis: Vec<DVector<f64>> = vec![y.clone() / inner(y, y).sqrt()];
    for i in 0..n {
        let mut v = DVector::from_fn(n, |k, _| if k == i { 1.0 } else { 0.0 });
        for b in &basis {
            let c = inner(&v, b);
            v -= b * c;
        }
        let len = inner(&v, &v).sqrt();
        if len > 1e-8 {
            basis.push(v / len);
        }
        if basis.len() == n {
            break;
        }
    }
    Ok(basis.into_iter().skip(1).collect())
}

/// Whether the m-block structure constants are exactly the 3d cross-product
/// relations (the classical rigid-body case).
fn is_su2_epsilon(algebra: &LieAlgebra) -> bool {
    if algebra.dim_m() != 3 {
        return false;
    }
    let eps = |i: usize, j: usize, k: usize| -> f64 {
        match (i, j, k) {
            (0, 1, 2) | (1, 2, 0) | (2, 0, 1) => 1.0,
            (1, 0, 2) | (2, 1, 0) | (0, 2, 1) => -1.0,
            _ => 0.0,
        }
    };
    for i in 0..3 {
        for j in 0..3 {
            for k in 0..3 {
                if (algebra.c(i, j, k) - eps(i, j, k)).abs() > 0.0 {
                    return false;
                }
            }
        }
    }
    true
}

/// Geodesic CSV with conserved-quantity columns.
pub fn cmd_geodesic(
    built: &BuiltScene,
    y0: &DVector<f64>,
    t_end: f64,
    dt: f64,
) -> Result<CommandOutput> {
    let mut config = built.integrator;
    config.dt = dt;
    let traj = integrate_geodesic(&built.spray, y0, t_end, config)?;
    let mut extra: Vec<(String, Vec<f64>)> = Vec::new();
    if let Some(norm) = &built.norm {
        extra.push((
            "F".into(),
            traj.states.iter().map(|y| norm.value(y)).collect(),
        ));
        // quadratic first integrals for the metric-Euclidean case
        let g0 = norm.fundamental_tensor(&traj.states[0])?;
        let is_quadratic = {
            let g1 = norm.fundamental_tensor(traj.last())?;
            (&g0 - &g1).amax() < 1e-14
        };
        if is_quadratic {
            extra.push((
                "energy".into(),
                traj.states
                    .iter()
                    .map(|y| 0.5 * (y.transpose() * &g0 * y)[(0, 0)])
                    .collect(),
            ));
            if is_su2_epsilon(&built.algebra) {
                extra.push((
                    "casimir".into(),
                    traj.states
                        .iter()
                        .map(|y| {
                            let momentum = &g0 * y;
                            momentum.norm_squared()
                        })
                        .collect(),
                ));
            }
        }
    }
    Ok(CommandOutput::ok(traj.to_csv(&extra)))
}

pub enum BaseCurve {
    /// Base curve exp(t v) o: constant trivialized velocity v.
    ConstantVelocity(DVector<f64>),
    /// Transport along the geodesic launched from y0.
    Geodesic(DVector<f64>),
}

/// Linear or nonlinear parallel transport; CSV of the transported vector.
pub fn cmd_transport(
    built: &BuiltScene,
    mode: &str,
    base: BaseCurve,
    start: &DVector<f64>,
    t_end: f64,
    dt: f64,
) -> Result<CommandOutput> {
    let mut config = built.integrator;
    config.dt = dt;
    let geodesic_base;
    let const_vel;
    let constant_fn;
    let source = match base {
        BaseCurve::ConstantVelocity(v) => {
            const_vel = v;
            let v2 = const_vel.clone();
            constant_fn = move |_t: f64| Ok(v2.clone());
            CurveSource::Callable(&constant_fn)
        }
        BaseCurve::Geodesic(y0) => {
            geodesic_base = integrate_geodesic(&built.spray, &y0, t_end, config)?;
            CurveSource::Sampled(&geodesic_base)
        }
    };
    let traj = match mode {
        "linear" => linear_transport(&built.spray, &source, start, t_end, config)?,
        "nonlinear" => nonlinear_transport(&built.spray, &source, start, t_end, config)?,
        other => {
            return Err(Error::Parse(format!(
                "transport mode must be linear or nonlinear, got {other}"
            )))
        }
    };
    let mut extra: Vec<(String, Vec<f64>)> = Vec::new();
    if mode == "linear" {
        if let Some(norm) = &built.norm {
            // pairing of the transported vector against the base velocity
            let mut col = Vec::with_capacity(traj.times.len());
            for (t, w) in traj.times.iter().zip(&traj.states) {
                let y = source.eval(*t)?;
                let g = norm.fundamental_tensor(&y)?;
                col.push((y.transpose() * &g * w)[(0, 0)]);
            }
            extra.push(("g_y_w".into(), col));
        }
    }
    Ok(CommandOutput::ok(traj.to_csv(&extra)))
}

/// Flag-curvature scan over seeded flag directions, parallel over the grid
/// with deterministic, index-ordered output.
pub fn cmd_scan(
    built: &BuiltScene,
    y: &DVector<f64>,
    grid: usize,
    seed: u64,
) -> Result<CommandOutput> {
    let spray = &built.spray;
    let norm = built.norm.as_ref().ok_or_else(|| {
        Error::UnsupportedConfiguration("flag-curvature scan needs a Finsler metric".into())
    })?;
    let n = built.algebra.dim_m();
    if n < 2 {
        return Err(Error::UnsupportedConfiguration(
            "flag curvature needs dim_m >= 2".into(),
        ));
    }
    let g = norm.fundamental_tensor(y)?;
    let inner = |a: &DVector<f64>, b: &DVector<f64>| (a.transpose() * &g * b)[(0, 0)];
    let gyy = inner(y, y);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut directions = Vec::with_capacity(grid);
    while directions.len() < grid {
        let u = DVector::from_fn(n, |_, _| rng.random::<f64>() * 2.0 - 1.0);
        let mut w = &u - y * (inner(y, &u) / gyy);
        let len = inner(&w, &w).sqrt();
        if len < 1e-3 {
            continue;
        }
        w /= len;
        directions.push(w);
    }
    let rows: Result<Vec<String>> = directions
        .par_iter()
        .enumerate()
        .map(|(idx, w)| {
            let k = spray.flag_curvature(y, w)?;
            let mut row = idx.to_string();
            for i in 0..n {
                row.push(',');
                row.push_str(&fmt_float(w[i]));
            }
            row.push(',');
            row.push_str(&fmt_float(k));
            Ok(row)
        })
        .collect();
    let mut text = String::from("index");
    for i in 1..=n {
        text.push_str(&format!(",w{i}"));
    }
    text.push_str(",flag_curvature\n");
    for row in rows? {
        text.push_str(&row);
        text.push('\n');
    }
    Ok(CommandOutput::ok(text))
}

/// Oracle comparison table; exit code 0 iff every residual is in tolerance.
pub fn cmd_oracle_compare(
    built: &BuiltScene,
    samples: usize,
    seed: u64,
    format: OutputFormat,
) -> Result<CommandOutput> {
    let norm = built.norm.as_ref().ok_or_else(|| {
        Error::UnsupportedConfiguration("the chart oracle needs a Finsler metric scene".into())
    })?;
    let chart = ChartMetric::new(built.algebra.clone(), norm.clone(), built.chart_config)?;
    let transport_samples = samples.min(3);
    let rows = oracle_compare(&built.spray, &chart, samples, transport_samples, seed)?;
    let all = rows.iter().all(|r| r.pass);
    let text = match format {
        OutputFormat::Json => {
            let rows_json: Vec<Value> = rows
                .iter()
                .map(|r| {
                    json!({
                        "check": r.check,
                        "sample": r.sample,
                        "residual": r.residual,
                        "tolerance": r.tolerance,
                        "pass": r.pass,
                    })
                })
                .collect();
            write_json(&json!({"rows": rows_json, "pass": all, "seed": seed, "samples": samples}))
        }
        OutputFormat::Csv => {
            let mut text = String::from("check,sample,residual,tolerance,pass\n");
            for CompareRow {
                check,
                sample,
                residual,
                tolerance,
                pass,
            } in &rows
            {
                text.push_str(&format!(
                    "{check},{sample},{},{},{pass}\n",
                    fmt_float(*residual),
                    fmt_float(*tolerance)
                ));
            }
            text
        }
    };
    Ok(CommandOutput {
        text,
        all_passed: all,
    })
}

/// Scene metric kind, used by the binary for error reporting.
pub fn metric_kind(scene: &Scene) -> &'static str {
    match scene.metric {
        MetricSpec::Euclidean { .. } => "euclidean",
        MetricSpec::Randers { .. } => "randers",
        MetricSpec::Direct { .. } => "direct",
    }
}
