//! Scene files: the JSON front door. A scene names an algebra (preset or
//! inline structure constants), an optional basis change, a metric (norm or
//! direct spray field), and integrator settings. Everything is validated
//! before any computation runs, with field-level diagnostics.

use crate::chart::ChartConfig;
use crate::dynamics::IntegratorConfig;
use crate::error::{Error, Result};
use crate::lie_algebra::{preset_with, AlgebraJson, LieAlgebra, MatrixRepresentation};
use crate::minkowski::{EuclideanNorm, MinkowskiNorm, RandersNorm};
use crate::spray::SprayModel;
use nalgebra::{DMatrix, DVector};
use serde::Deserialize;
use std::sync::Arc;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scene {
    pub algebra: AlgebraSpec,
    #[serde(default)]
    pub basis_change: Option<Vec<Vec<f64>>>,
    pub metric: MetricSpec,
    #[serde(default)]
    pub integrator: IntegratorSpec,
    #[serde(default)]
    pub chart: ChartSpec,
    #[serde(default)]
    pub tolerances: ToleranceSpec,
}

/// Either `preset` (with optional `dim`, `rep`) or inline `dim_g`, `dim_m`,
/// `structure_constants` (sparse `[i,j,k,value]` triplets), `matrix_rep`.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlgebraSpec {
    #[serde(default)]
    pub preset: Option<String>,
    #[serde(default)]
    pub dim: Option<usize>,
    #[serde(default)]
    pub rep: Option<String>,
    #[serde(default)]
    pub dim_g: Option<usize>,
    #[serde(default)]
    pub dim_m: Option<usize>,
    #[serde(default)]
    pub structure_constants: Option<Vec<(usize, usize, usize, f64)>>,
    #[serde(default)]
    pub matrix_rep: Option<Vec<Vec<Vec<f64>>>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum MetricSpec {
    Euclidean {
        a: Vec<Vec<f64>>,
    },
    Randers {
        a: Vec<Vec<f64>>,
        b: Vec<f64>,
    },
    /// Direct spray vector field by name: "zero" (canonical spray) or
    /// "euler_top" (the classical rigid-body field; needs `inertia`).
    Direct {
        eta: String,
        #[serde(default)]
        inertia: Option<Vec<f64>>,
    },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegratorSpec {
    #[serde(default = "default_method")]
    pub method: String,
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(default = "default_rtol")]
    pub rtol: f64,
    #[serde(default = "default_atol")]
    pub atol: f64,
}

fn default_method() -> String {
    "rk4".into()
}
fn default_dt() -> f64 {
    1e-3
}
fn default_rtol() -> f64 {
    1e-9
}
fn default_atol() -> f64 {
    1e-12
}

impl Default for IntegratorSpec {
    fn default() -> Self {
        Self {
            method: default_method(),
            dt: default_dt(),
            rtol: default_rtol(),
            atol: default_atol(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChartSpec {
    #[serde(default = "default_radius")]
    pub radius: f64,
    #[serde(default = "default_fd_scale")]
    pub fd_scale: f64,
}

fn default_radius() -> f64 {
    0.5
}
fn default_fd_scale() -> f64 {
    1.0
}

impl Default for ChartSpec {
    fn default() -> Self {
        Self {
            radius: default_radius(),
            fd_scale: default_fd_scale(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToleranceSpec {
    #[serde(default = "default_invariance_tol")]
    pub invariance: f64,
    #[serde(default = "default_equivariance_tol")]
    pub equivariance: f64,
}

fn default_invariance_tol() -> f64 {
    crate::tol::AD_H_INVARIANCE
}
fn default_equivariance_tol() -> f64 {
    crate::tol::EQUIVARIANCE
}

impl Default for ToleranceSpec {
    fn default() -> Self {
        Self {
            invariance: default_invariance_tol(),
            equivariance: default_equivariance_tol(),
        }
    }
}

/// Fully constructed scene objects.
pub struct BuiltScene {
    pub algebra: Arc<LieAlgebra>,
    pub representation: Option<Arc<MatrixRepresentation>>,
    pub norm: Option<Arc<dyn MinkowskiNorm>>,
    pub spray: SprayModel,
    pub integrator: IntegratorConfig,
    pub chart_config: ChartConfig,
    pub tolerances: ToleranceSpec,
}

impl Scene {
    pub fn from_json_str(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse(format!("scene JSON: {e}")))
    }

    /// Algebra plus optional representation, with the basis change applied
    /// to both.
    pub fn build_algebra(&self) -> Result<(Arc<LieAlgebra>, Option<Arc<MatrixRepresentation>>)> {
        let spec = &self.algebra;
        let (mut algebra, mut rep) = if let Some(name) = &spec.preset {
            if spec.structure_constants.is_some() || spec.dim_g.is_some() {
                return Err(Error::scene(
                    "algebra",
                    "give either a preset or inline structure constants, not both",
                ));
            }
            let p = preset_with(name, spec.dim, spec.rep.as_deref())?;
            (p.algebra, p.representation)
        } else {
            let json = AlgebraJson {
                dim_g: spec
                    .dim_g
                    .ok_or_else(|| Error::scene("algebra.dim_g", "missing"))?,
                dim_m: spec
                    .dim_m
                    .ok_or_else(|| Error::scene("algebra.dim_m", "missing"))?,
                structure_constants: spec
                    .structure_constants
                    .clone()
                    .ok_or_else(|| Error::scene("algebra.structure_constants", "missing"))?,
                matrix_rep: spec.matrix_rep.clone(),
            };
            json.build()?
        };
        if let Some(rows) = &self.basis_change {
            let m = algebra.dim_g();
            if rows.len() != m || rows.iter().any(|r| r.len() != m) {
                return Err(Error::scene(
                    "basis_change",
                    format!("expected a {m}x{m} matrix"),
                ));
            }
            let p = DMatrix::from_fn(m, m, |r, c| rows[r][c]);
            algebra = algebra.with_basis_change(&p)?;
            rep = match rep {
                None => None,
                Some(old) => {
                    let mats: Vec<DMatrix<f64>> = (0..m)
                        .map(|a| {
                            let mut acc = DMatrix::zeros(old.matrix_dim(), old.matrix_dim());
                            for i in 0..m {
                                acc += &old.basis()[i] * p[(i, a)];
                            }
                            acc
                        })
                        .collect();
                    let new_rep = MatrixRepresentation::new(mats)?;
                    new_rep.validate(&algebra)?;
                    Some(new_rep)
                }
            };
        }
        Ok((Arc::new(algebra), rep.map(Arc::new)))
    }

    /// The Minkowski norm, when the metric block specifies one.
    pub fn build_norm(&self, dim_m: usize) -> Result<Option<Arc<dyn MinkowskiNorm>>> {
        let matrix_of = |rows: &Vec<Vec<f64>>, loc: &str| -> Result<DMatrix<f64>> {
            if rows.len() != dim_m || rows.iter().any(|r| r.len() != dim_m) {
                return Err(Error::scene(
                    loc,
                    format!("expected a {dim_m}x{dim_m} matrix"),
                ));
            }
            Ok(DMatrix::from_fn(dim_m, dim_m, |r, c| rows[r][c]))
        };
        match &self.metric {
            MetricSpec::Euclidean { a } => {
                let norm = EuclideanNorm::new(matrix_of(a, "metric.a")?)?;
                Ok(Some(Arc::new(norm)))
            }
            MetricSpec::Randers { a, b } => {
                if b.len() != dim_m {
                    return Err(Error::scene("metric.b", format!("expected length {dim_m}")));
                }
                let norm =
                    RandersNorm::new(matrix_of(a, "metric.a")?, DVector::from_vec(b.clone()))?;
                Ok(Some(Arc::new(norm)))
            }
            MetricSpec::Direct { .. } => Ok(None),
        }
    }

    fn build_spray(
        &self,
        algebra: Arc<LieAlgebra>,
        norm: Option<&Arc<dyn MinkowskiNorm>>,
    ) -> Result<SprayModel> {
        match &self.metric {
            MetricSpec::Euclidean { .. } | MetricSpec::Randers { .. } => {
                SprayModel::finsler(algebra, norm.expect("norm built").clone())
            }
            MetricSpec::Direct { eta, inertia } => match eta.as_str() {
                "zero" => Ok(SprayModel::canonical(algebra)),
                "euler_top" => {
                    if algebra.dim_m() != 3 {
                        return Err(Error::scene("metric.eta", "euler_top needs dim_m = 3"));
                    }
                    let inertia = inertia
                        .clone()
                        .ok_or_else(|| Error::scene("metric.inertia", "required for euler_top"))?;
                    if inertia.len() != 3 || inertia.iter().any(|&x| x <= 0.0) {
                        return Err(Error::scene(
                            "metric.inertia",
                            "need three positive moments",
                        ));
                    }
                    let i = [inertia[0], inertia[1], inertia[2]];
                    let eta_fn = move |y: &DVector<f64>| {
                        let iy = [i[0] * y[0], i[1] * y[1], i[2] * y[2]];
                        Ok(DVector::from_vec(vec![
                            (y[1] * iy[2] - y[2] * iy[1]) / i[0],
                            (y[2] * iy[0] - y[0] * iy[2]) / i[1],
                            (y[0] * iy[1] - y[1] * iy[0]) / i[2],
                        ]))
                    };
                    let d_eta_fn = move |y: &DVector<f64>, u: &DVector<f64>| {
                        let iy = [i[0] * y[0], i[1] * y[1], i[2] * y[2]];
                        let iu = [i[0] * u[0], i[1] * u[1], i[2] * u[2]];
                        Ok(DVector::from_vec(vec![
                            (y[1] * iu[2] - y[2] * iu[1] + u[1] * iy[2] - u[2] * iy[1]) / i[0],
                            (y[2] * iu[0] - y[0] * iu[2] + u[2] * iy[0] - u[0] * iy[2]) / i[1],
                            (y[0] * iu[1] - y[1] * iu[0] + u[0] * iy[1] - u[1] * iy[0]) / i[2],
                        ]))
                    };
                    Ok(SprayModel::direct(
                        algebra,
                        Arc::new(eta_fn),
                        Some(Arc::new(d_eta_fn)),
                    ))
                }
                other => Err(Error::scene(
                    "metric.eta",
                    format!("unknown direct field: {other}"),
                )),
            },
        }
    }

    pub fn integrator_config(&self) -> Result<IntegratorConfig> {
        match self.integrator.method.as_str() {
            "rk4" => Ok(IntegratorConfig::rk4(self.integrator.dt)),
            "rk45" => Ok(IntegratorConfig::rk45(
                self.integrator.dt,
                self.integrator.rtol,
                self.integrator.atol,
            )),
            other => Err(Error::scene(
                "integrator.method",
                format!("unknown method: {other} (rk4 or rk45)"),
            )),
        }
    }

    pub fn build(&self) -> Result<BuiltScene> {
        let (algebra, representation) = self.build_algebra()?;
        let norm = self.build_norm(algebra.dim_m())?;
        let spray = self.build_spray(algebra.clone(), norm.as_ref())?;
        let integrator = self.integrator_config()?;
        Ok(BuiltScene {
            algebra,
            representation,
            norm,
            spray,
            integrator,
            chart_config: ChartConfig {
                radius: self.chart.radius,
                fd_scale: self.chart.fd_scale,
                ..ChartConfig::default()
            },
            tolerances: self.tolerances.clone(),
        })
    }
}
