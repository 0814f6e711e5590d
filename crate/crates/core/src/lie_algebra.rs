//! Finite-dimensional real Lie algebras given by structure constants, with a
//! fixed coordinate decomposition g = h + m.
//!
//! The basis convention is global: indices 0..dim_m span m, the remaining
//! indices span h. A decomposition other than a coordinate split is obtained
//! by supplying an invertible basis-change matrix up front; all projections
//! afterwards are plain coordinate truncations.

use crate::error::{Error, Result};
use crate::linalg::BasisProjector;
use crate::tol;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

/// A Lie algebra with decomposition, stored as dense structure constants
/// `c[i][j][k]` meaning `[e_i, e_j] = sum_k c[i][j][k] e_k`.
///
/// Immutable after construction; every operation is a pure function.
#[derive(Debug, Clone)]
pub struct LieAlgebra {
    dim_g: usize,
    dim_m: usize,
    constants: Vec<f64>,
}

impl LieAlgebra {
    /// Build from dense constants (length dim_g^3, index (i*dim_g + j)*dim_g + k)
    /// and validate antisymmetry, the Jacobi identity, and closure of h.
    pub fn new(dim_g: usize, dim_m: usize, constants: Vec<f64>) -> Result<Self> {
        if dim_g == 0 || dim_m == 0 || dim_m > dim_g {
            return Err(Error::InvalidAlgebra(format!(
                "need 0 < dim_m <= dim_g, got dim_m = {dim_m}, dim_g = {dim_g}"
            )));
        }
        if constants.len() != dim_g * dim_g * dim_g {
            return Err(Error::InvalidAlgebra(format!(
                "expected {} structure constants, got {}",
                dim_g * dim_g * dim_g,
                constants.len()
            )));
        }
        let algebra = Self {
            dim_g,
            dim_m,
            constants,
        };
        algebra.validate()?;
        Ok(algebra)
    }

    /// Build from a sparse triplet list. Missing antisymmetric partners are
    /// filled in; conflicting duplicates are an error.
    pub fn from_triplets(
        dim_g: usize,
        dim_m: usize,
        triplets: &[(usize, usize, usize, f64)],
    ) -> Result<Self> {
        let mut dense = vec![0.0; dim_g * dim_g * dim_g];
        let mut set = vec![false; dim_g * dim_g * dim_g];
        let idx = |i: usize, j: usize, k: usize| (i * dim_g + j) * dim_g + k;
        for &(i, j, k, v) in triplets {
            if i >= dim_g || j >= dim_g || k >= dim_g {
                return Err(Error::InvalidAlgebra(format!(
                    "structure constant index ({i},{j},{k}) out of range for dim_g = {dim_g}"
                )));
            }
            for (a, b, val) in [(i, j, v), (j, i, -v)] {
                let p = idx(a, b, k);
                if set[p] && dense[p] != val {
                    return Err(Error::InvalidAlgebra(format!(
                        "conflicting structure constants at ({a},{b},{k}): {} vs {}",
                        dense[p], val
                    )));
                }
                dense[p] = val;
                set[p] = true;
            }
        }
        Self::new(dim_g, dim_m, dense)
    }

    /// Apply a basis change. Column a of `p` is the new basis vector f_a in
    /// old coordinates; the decomposition indices refer to the new basis.
    pub fn with_basis_change(&self, p: &DMatrix<f64>) -> Result<Self> {
        let m = self.dim_g;
        if p.nrows() != m || p.ncols() != m {
            return Err(Error::DimensionMismatch {
                expected: m * m,
                got: p.nrows() * p.ncols(),
            });
        }
        let lu = p.clone().lu();
        let mut dense = vec![0.0; m * m * m];
        for a in 0..m {
            for b in 0..m {
                let fa = p.column(a).into_owned();
                let fb = p.column(b).into_owned();
                let br = self.bracket(&fa, &fb)?;
                let coeffs = lu.solve(&br).ok_or_else(|| {
                    Error::InvalidAlgebra("basis-change matrix is singular".into())
                })?;
                for c in 0..m {
                    dense[(a * m + b) * m + c] = coeffs[c];
                }
            }
        }
        Self::new(m, self.dim_m, dense)
    }

    /// Same constants with a different m/h split; revalidates closure of h.
    pub fn with_dim_m(&self, dim_m: usize) -> Result<Self> {
        Self::new(self.dim_g, dim_m, self.constants.clone())
    }

    fn validate(&self) -> Result<()> {
        let m = self.dim_g;
        // Antisymmetry is exact: constants are stored, not computed.
        for i in 0..m {
            for j in 0..m {
                for k in 0..m {
                    if self.c(i, j, k) + self.c(j, i, k) != 0.0 {
                        return Err(Error::InvalidAlgebra(format!(
                            "antisymmetry violated at ({i},{j},{k})"
                        )));
                    }
                }
            }
        }
        // Jacobi identity on basis triples.
        for i in 0..m {
            for j in 0..m {
                for k in 0..m {
                    for p in 0..m {
                        let mut r = 0.0;
                        for l in 0..m {
                            r += self.c(i, j, l) * self.c(l, k, p)
                                + self.c(j, k, l) * self.c(l, i, p)
                                + self.c(k, i, l) * self.c(l, j, p);
                        }
                        if r.abs() > tol::JACOBI {
                            return Err(Error::InvalidAlgebra(format!(
                                "Jacobi identity violated at ({i},{j},{k}) component {p}: {r:e}"
                            )));
                        }
                    }
                }
            }
        }
        // h must be a subalgebra: [h,h] has no m-component.
        for a in self.dim_m..m {
            for b in self.dim_m..m {
                for i in 0..self.dim_m {
                    if self.c(a, b, i).abs() > tol::SUBALGEBRA {
                        return Err(Error::InvalidAlgebra(format!(
                            "h is not a subalgebra: [e{a}, e{b}] has m-component {i}"
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    #[inline]
    pub fn c(&self, i: usize, j: usize, k: usize) -> f64 {
        self.constants[(i * self.dim_g + j) * self.dim_g + k]
    }

    pub fn dim_g(&self) -> usize {
        self.dim_g
    }

    pub fn dim_m(&self) -> usize {
        self.dim_m
    }

    pub fn dim_h(&self) -> usize {
        self.dim_g - self.dim_m
    }

    fn check_g(&self, x: &DVector<f64>) -> Result<()> {
        if x.len() != self.dim_g {
            return Err(Error::DimensionMismatch {
                expected: self.dim_g,
                got: x.len(),
            });
        }
        Ok(())
    }

    fn check_m(&self, x: &DVector<f64>) -> Result<()> {
        if x.len() != self.dim_m {
            return Err(Error::DimensionMismatch {
                expected: self.dim_m,
                got: x.len(),
            });
        }
        Ok(())
    }

    /// Lie bracket of two g-vectors.
    pub fn bracket(&self, x: &DVector<f64>, y: &DVector<f64>) -> Result<DVector<f64>> {
        self.check_g(x)?;
        self.check_g(y)?;
        let m = self.dim_g;
        let mut out = DVector::zeros(m);
        for i in 0..m {
            let xi = x[i];
            if xi == 0.0 {
                continue;
            }
            for j in 0..m {
                let yj = y[j];
                if yj == 0.0 {
                    continue;
                }
                for k in 0..m {
                    out[k] += xi * yj * self.c(i, j, k);
                }
            }
        }
        Ok(out)
    }

    /// Projection onto m as a g-vector (h-components zeroed).
    pub fn project_m(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        self.check_g(x)?;
        let mut out = x.clone();
        for a in self.dim_m..self.dim_g {
            out[a] = 0.0;
        }
        Ok(out)
    }

    /// Projection onto h as a g-vector (m-components zeroed).
    pub fn project_h(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        self.check_g(x)?;
        let mut out = x.clone();
        for i in 0..self.dim_m {
            out[i] = 0.0;
        }
        Ok(out)
    }

    /// First dim_m coordinates of a g-vector.
    pub fn m_part(&self, x: &DVector<f64>) -> DVector<f64> {
        DVector::from_fn(self.dim_m, |i, _| x[i])
    }

    /// Embed an m-vector into g with zero h-components.
    pub fn embed_m(&self, x: &DVector<f64>) -> DVector<f64> {
        let mut out = DVector::zeros(self.dim_g);
        for i in 0..x.len().min(self.dim_m) {
            out[i] = x[i];
        }
        out
    }

    /// [x, y]_m for m-vectors: bracket followed by projection onto m.
    pub fn bracket_m(&self, x: &DVector<f64>, y: &DVector<f64>) -> Result<DVector<f64>> {
        self.check_m(x)?;
        self.check_m(y)?;
        let n = self.dim_m;
        let mut out = DVector::zeros(n);
        for i in 0..n {
            let xi = x[i];
            if xi == 0.0 {
                continue;
            }
            for j in 0..n {
                let yj = y[j];
                if yj == 0.0 {
                    continue;
                }
                for k in 0..n {
                    out[k] += xi * yj * self.c(i, j, k);
                }
            }
        }
        Ok(out)
    }

    /// [x, y]_h for m-vectors, returned as a g-vector supported on h.
    pub fn bracket_h(&self, x: &DVector<f64>, y: &DVector<f64>) -> Result<DVector<f64>> {
        self.check_m(x)?;
        self.check_m(y)?;
        let mut out = DVector::zeros(self.dim_g);
        for i in 0..self.dim_m {
            for j in 0..self.dim_m {
                let f = x[i] * y[j];
                if f == 0.0 {
                    continue;
                }
                for a in self.dim_m..self.dim_g {
                    out[a] += f * self.c(i, j, a);
                }
            }
        }
        Ok(out)
    }

    /// Matrix of ad_m(y): `w -> [y, w]_m` on m, column j = `[y, e_j]_m`.
    pub fn ad_m_matrix(&self, y: &DVector<f64>) -> Result<DMatrix<f64>> {
        self.check_m(y)?;
        let n = self.dim_m;
        let mut out = DMatrix::zeros(n, n);
        for j in 0..n {
            for i in 0..n {
                let yi = y[i];
                if yi == 0.0 {
                    continue;
                }
                for k in 0..n {
                    out[(k, j)] += yi * self.c(i, j, k);
                }
            }
        }
        Ok(out)
    }

    /// Matrix of the full adjoint ad(x): g -> g for a g-vector x.
    pub fn ad_matrix(&self, x: &DVector<f64>) -> Result<DMatrix<f64>> {
        self.check_g(x)?;
        let m = self.dim_g;
        let mut out = DMatrix::zeros(m, m);
        for j in 0..m {
            for i in 0..m {
                let xi = x[i];
                if xi == 0.0 {
                    continue;
                }
                for k in 0..m {
                    out[(k, j)] += xi * self.c(i, j, k);
                }
            }
        }
        Ok(out)
    }

    /// Infinitesimal reductivity check: `[h, m]` must stay in m, i.e. all
    /// h-components of h-m brackets vanish.
    pub fn reductivity_report(&self) -> ReductivityReport {
        let mut violations = Vec::new();
        for a in self.dim_m..self.dim_g {
            for i in 0..self.dim_m {
                for b in self.dim_m..self.dim_g {
                    let v = self.c(a, i, b);
                    if v.abs() > tol::REDUCTIVE {
                        violations.push(ReductivityViolation {
                            h_index: a,
                            m_index: i,
                            component: b,
                            value: v,
                        });
                    }
                }
            }
        }
        ReductivityReport { violations }
    }

    pub fn is_reductive(&self) -> bool {
        self.reductivity_report().violations.is_empty()
    }

    /// Left-trivialized differential of exp at x applied to v:
    /// T_x(v) = sum_{k>=0} (-ad_x)^k (v) / (k+1)!.
    ///
    /// The series is entire; truncation stops once the term norm drops below
    /// tol * |v|. Hitting the term cap signals pathological scaling of x.
    pub fn dexp_trivialized(
        &self,
        x: &DVector<f64>,
        v: &DVector<f64>,
        tol: f64,
    ) -> Result<DVector<f64>> {
        self.check_g(x)?;
        self.check_g(v)?;
        const MAX_TERMS: usize = 200;
        let vnorm = v.norm();
        let mut sum = v.clone();
        let mut word = v.clone();
        let mut factorial = 1.0;
        for k in 1..=MAX_TERMS {
            word = -self.bracket(x, &word)?;
            factorial *= (k + 1) as f64;
            let term = &word / factorial;
            sum += &term;
            if term.norm() <= tol * vnorm {
                return Ok(sum);
            }
        }
        Err(Error::SeriesDivergence {
            max_terms: MAX_TERMS,
        })
    }

    /// Trace of ad(z) restricted to m (m-block only), for the unimodularity
    /// check of the isotropy action on g/h.
    pub fn ad_m_trace_of_h_generator(&self, h_index: usize) -> f64 {
        (0..self.dim_m).map(|i| self.c(h_index, i, i)).sum()
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ReductivityViolation {
    pub h_index: usize,
    pub m_index: usize,
    pub component: usize,
    pub value: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ReductivityReport {
    pub violations: Vec<ReductivityViolation>,
}

impl ReductivityReport {
    pub fn pass(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn max_violation(&self) -> f64 {
        self.violations
            .iter()
            .map(|v| v.value.abs())
            .fold(0.0, f64::max)
    }
}

/// Matrices realizing the basis: `E_i E_j - E_j E_i = sum_k c[i][j][k] E_k`.
///
/// Only needed to reconstruct group curves and solve the lifting ODE.
#[derive(Debug, Clone)]
pub struct MatrixRepresentation {
    basis: Vec<DMatrix<f64>>,
    dim: usize,
}

impl MatrixRepresentation {
    pub fn new(basis: Vec<DMatrix<f64>>) -> Result<Self> {
        if basis.is_empty() {
            return Err(Error::InvalidAlgebra("empty matrix representation".into()));
        }
        let d = basis[0].nrows();
        for e in &basis {
            if e.nrows() != d || e.ncols() != d {
                return Err(Error::InvalidAlgebra(
                    "representation matrices must be square and equally sized".into(),
                ));
            }
        }
        Ok(Self { basis, dim: d })
    }

    pub fn matrix_dim(&self) -> usize {
        self.dim
    }

    pub fn basis(&self) -> &[DMatrix<f64>] {
        &self.basis
    }

    /// Commutator consistency against the structure constants.
    pub fn validate(&self, algebra: &LieAlgebra) -> Result<()> {
        if self.basis.len() != algebra.dim_g() {
            return Err(Error::DimensionMismatch {
                expected: algebra.dim_g(),
                got: self.basis.len(),
            });
        }
        let m = algebra.dim_g();
        for i in 0..m {
            for j in 0..m {
                let mut expected = DMatrix::zeros(self.dim, self.dim);
                for k in 0..m {
                    expected += &self.basis[k] * algebra.c(i, j, k);
                }
                let comm = &self.basis[i] * &self.basis[j] - &self.basis[j] * &self.basis[i];
                let err = (comm - expected).amax();
                if err > tol::REP_COMMUTATOR {
                    return Err(Error::InvalidAlgebra(format!(
                        "representation commutator mismatch at ({i},{j}): {err:e}"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Matrix for a g-vector: sum_i x_i E_i.
    pub fn map(&self, x: &DVector<f64>) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(self.dim, self.dim);
        for (i, e) in self.basis.iter().enumerate() {
            if x[i] != 0.0 {
                out += e * x[i];
            }
        }
        out
    }

    pub fn projector(&self) -> Result<BasisProjector> {
        BasisProjector::new(&self.basis)
    }

    /// Group adjoint Ad(g) v = g rep(v) g^{-1}, expressed back in coordinates.
    pub fn ad_group(
        &self,
        g: &DMatrix<f64>,
        v: &DVector<f64>,
        projector: &BasisProjector,
    ) -> Result<DVector<f64>> {
        let g_inv = g
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::Numerical("singular group element in Ad".into()))?;
        Ok(projector.coords(&(g * self.map(v) * g_inv)))
    }
}

/// Named algebra presets with their decompositions and, where available,
/// matrix representations.
#[derive(Debug, Clone)]
pub struct Preset {
    pub algebra: LieAlgebra,
    pub representation: Option<MatrixRepresentation>,
}

/// Adjoint representation matrices built from the structure constants.
pub fn adjoint_representation(algebra: &LieAlgebra) -> Result<MatrixRepresentation> {
    let m = algebra.dim_g();
    let basis = (0..m)
        .map(|i| DMatrix::from_fn(m, m, |k, j| algebra.c(i, j, k)))
        .collect();
    MatrixRepresentation::new(basis)
}

/// Build a preset by name. `dim` only applies to "abelian" (default 3);
/// `rep_choice` selects between representations where more than one exists
/// ("adjoint" or "spinor" for the su2 family).
pub fn preset_with(name: &str, dim: Option<usize>, rep_choice: Option<&str>) -> Result<Preset> {
    let unknown_rep = |name: &str, rep: &str| {
        Err(Error::InvalidAlgebra(format!(
            "preset {name} has no representation named {rep}"
        )))
    };
    match name {
        "abelian" => {
            let n = dim.unwrap_or(3);
            let algebra = LieAlgebra::new(n, n, vec![0.0; n * n * n])?;
            // Commuting strictly-upper nilpotent embedding in (n+1) x (n+1).
            let d = n + 1;
            let basis = (0..n)
                .map(|i| DMatrix::from_fn(d, d, |r, c| if r == i && c == n { 1.0 } else { 0.0 }))
                .collect();
            let rep = MatrixRepresentation::new(basis)?;
            rep.validate(&algebra)?;
            Ok(Preset {
                algebra,
                representation: Some(rep),
            })
        }
        "su2" | "su2_u1" => {
            let dim_m = if name == "su2" { 3 } else { 2 };
            let algebra = LieAlgebra::from_triplets(
                3,
                dim_m,
                &[(0, 1, 2, 1.0), (1, 2, 0, 1.0), (2, 0, 1, 1.0)],
            )?;
            let rep = match rep_choice.unwrap_or("adjoint") {
                "adjoint" => adjoint_representation(&algebra)?,
                "spinor" => MatrixRepresentation::new(su2_spinor_matrices())?,
                other => return unknown_rep(name, other),
            };
            rep.validate(&algebra)?;
            Ok(Preset {
                algebra,
                representation: Some(rep),
            })
        }
        "sl2_r" => {
            let algebra = LieAlgebra::from_triplets(
                3,
                3,
                &[(0, 1, 1, 2.0), (0, 2, 2, -2.0), (1, 2, 0, 1.0)],
            )?;
            let basis = vec![
                DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]),
                DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]),
                DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 1.0, 0.0]),
            ];
            let rep = MatrixRepresentation::new(basis)?;
            rep.validate(&algebra)?;
            Ok(Preset {
                algebra,
                representation: Some(rep),
            })
        }
        "heisenberg3" => {
            let algebra = LieAlgebra::from_triplets(3, 3, &[(0, 1, 2, 1.0)])?;
            let e = |r: usize, c: usize| {
                DMatrix::from_fn(3, 3, move |i, j| if i == r && j == c { 1.0 } else { 0.0 })
            };
            let rep = MatrixRepresentation::new(vec![e(0, 1), e(1, 2), e(0, 2)])?;
            rep.validate(&algebra)?;
            Ok(Preset {
                algebra,
                representation: Some(rep),
            })
        }
        "se2" => {
            let algebra = LieAlgebra::from_triplets(3, 3, &[(0, 1, 2, 1.0), (0, 2, 1, -1.0)])?;
            let j = DMatrix::from_row_slice(3, 3, &[0.0, -1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
            let e = |r: usize, c: usize| {
                DMatrix::from_fn(3, 3, move |a, b| if a == r && b == c { 1.0 } else { 0.0 })
            };
            let rep = MatrixRepresentation::new(vec![j, e(0, 2), e(1, 2)])?;
            rep.validate(&algebra)?;
            Ok(Preset {
                algebra,
                representation: Some(rep),
            })
        }
        other => Err(Error::InvalidAlgebra(format!("unknown preset: {other}"))),
    }
}

pub fn preset(name: &str, dim: Option<usize>) -> Result<Preset> {
    preset_with(name, dim, None)
}

// su(2) via -i/2 times the Pauli matrices, complex 2x2 realized as real 4x4.
fn su2_spinor_matrices() -> Vec<DMatrix<f64>> {
    let complex_to_real = |a: [[f64; 2]; 2], b: [[f64; 2]; 2]| {
        DMatrix::from_fn(4, 4, move |r, c| match (r / 2, c / 2) {
            (0, 0) => a[r % 2][c % 2],
            (0, 1) => -b[r % 2][c % 2],
            (1, 0) => b[r % 2][c % 2],
            (1, 1) => a[r % 2][c % 2],
            _ => unreachable!(),
        })
    };
    let zero = [[0.0, 0.0], [0.0, 0.0]];
    vec![
        complex_to_real(zero, [[0.0, -0.5], [-0.5, 0.0]]),
        complex_to_real([[0.0, -0.5], [0.5, 0.0]], zero),
        complex_to_real(zero, [[-0.5, 0.0], [0.0, 0.5]]),
    ]
}

/// JSON document form of a Lie algebra (sparse triplet structure constants,
/// optional row-major representation matrices).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AlgebraJson {
    pub dim_g: usize,
    pub dim_m: usize,
    pub structure_constants: Vec<(usize, usize, usize, f64)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub matrix_rep: Option<Vec<Vec<Vec<f64>>>>,
}

impl AlgebraJson {
    pub fn build(&self) -> Result<(LieAlgebra, Option<MatrixRepresentation>)> {
        let algebra = LieAlgebra::from_triplets(self.dim_g, self.dim_m, &self.structure_constants)?;
        let rep = match &self.matrix_rep {
            None => None,
            Some(mats) => {
                let basis = mats
                    .iter()
                    .map(|rows| {
                        let d = rows.len();
                        for row in rows {
                            if row.len() != d {
                                return Err(Error::InvalidAlgebra(
                                    "representation matrices must be square".into(),
                                ));
                            }
                        }
                        Ok(DMatrix::from_fn(d, d, |r, c| rows[r][c]))
                    })
                    .collect::<Result<Vec<_>>>()?;
                let rep = MatrixRepresentation::new(basis)?;
                rep.validate(&algebra)?;
                Some(rep)
            }
        };
        Ok((algebra, rep))
    }
}
