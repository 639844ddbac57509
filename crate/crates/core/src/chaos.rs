//! Tensorized chaos bases over independent inputs: total-degree truncation
//! sets, design matrices for values and partial derivatives, and surrogate
//! evaluation.
//!
//! Multi-indices are ordered by total degree, then in descending
//! lexicographic order within a degree, e.g. for `d = 2`:
//! `(0,0), (1,0), (0,1), (2,0), (1,1), (0,2), …`. Coefficient files rely on
//! this order being stable.

use std::path::Path;
use std::sync::Arc;

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectral::PoincareBasis1D;

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MultiIndex(Vec<usize>);

impl MultiIndex {
    pub fn new(entries: Vec<usize>) -> Self {
        Self(entries)
    }

    pub fn entries(&self) -> &[usize] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn degree(&self) -> usize {
        self.0.iter().sum()
    }

    /// Number of variables the term depends on.
    pub fn rank(&self) -> usize {
        self.0.iter().filter(|&&a| a > 0).count()
    }

    pub fn is_constant(&self) -> bool {
        self.0.iter().all(|&a| a == 0)
    }

    #[inline]
    pub fn get(&self, k: usize) -> usize {
        self.0[k]
    }
}

/// A finite set of multi-indices in a fixed order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TruncationSet {
    dim: usize,
    degree: usize,
    indices: Vec<MultiIndex>,
}

/// All `α ∈ ℕ^d` with `|α| ≤ p`, in graded descending-lex order.
pub fn total_degree_set(d: usize, p: usize) -> TruncationSet {
    assert!(d >= 1, "dimension must be positive");
    let mut indices = Vec::new();
    let mut current = vec![0usize; d];
    for s in 0..=p {
        compositions(s, 0, &mut current, &mut indices);
    }
    TruncationSet { dim: d, degree: p, indices }
}

fn compositions(remaining: usize, pos: usize, current: &mut Vec<usize>, out: &mut Vec<MultiIndex>) {
    let d = current.len();
    if pos == d - 1 {
        current[pos] = remaining;
        out.push(MultiIndex(current.clone()));
        return;
    }
    for v in (0..=remaining).rev() {
        current[pos] = v;
        compositions(remaining - v, pos + 1, current, out);
    }
    current[pos] = 0;
}

impl TruncationSet {
    /// Custom set; the constant index must come first.
    pub fn from_indices(indices: Vec<MultiIndex>) -> Result<Self> {
        let dim = indices.first().map(|a| a.dim()).unwrap_or(0);
        if dim == 0 || indices.iter().any(|a| a.dim() != dim) {
            return Err(Error::Shape("multi-indices must share a positive dimension".into()));
        }
        if !indices[0].is_constant() {
            return Err(Error::InvalidParams("the constant multi-index must come first".into()));
        }
        let degree = indices.iter().map(|a| a.degree()).max().unwrap_or(0);
        Ok(Self { dim, degree, indices })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn indices(&self) -> &[MultiIndex] {
        &self.indices
    }

    pub fn position(&self, alpha: &MultiIndex) -> Option<usize> {
        self.indices.iter().position(|a| a == alpha)
    }

    /// Largest degree used in variable `k`.
    pub fn max_degree(&self, k: usize) -> usize {
        self.indices.iter().map(|a| a.get(k)).max().unwrap_or(0)
    }
}

/// Univariate bases plus a truncation set: everything needed to build
/// design matrices.
#[derive(Debug, Clone)]
pub struct ChaosBasis {
    bases: Vec<Arc<PoincareBasis1D>>,
    truncation: TruncationSet,
    max_degrees: Vec<usize>,
}

/// Per-dimension values and derivatives of the univariate modes at the
/// rows of a design.
struct Tables {
    values: Vec<Array2<f64>>,
    derivs: Vec<Array2<f64>>,
}

impl ChaosBasis {
    pub fn new(bases: Vec<Arc<PoincareBasis1D>>, truncation: TruncationSet) -> Result<Self> {
        if bases.len() != truncation.dim() {
            return Err(Error::Shape(format!(
                "{} univariate bases for a {}-dimensional truncation",
                bases.len(),
                truncation.dim()
            )));
        }
        let max_degrees: Vec<usize> = (0..bases.len()).map(|k| truncation.max_degree(k)).collect();
        for (k, (b, &m)) in bases.iter().zip(&max_degrees).enumerate() {
            if m > b.n_modes() {
                return Err(Error::InvalidParams(format!(
                    "variable {k} needs {m} modes but its basis has {}",
                    b.n_modes()
                )));
            }
        }
        Ok(Self { bases, truncation, max_degrees })
    }

    pub fn dim(&self) -> usize {
        self.bases.len()
    }

    /// Cardinality `P` of the truncation set.
    pub fn len(&self) -> usize {
        self.truncation.len()
    }

    pub fn is_empty(&self) -> bool {
        self.truncation.is_empty()
    }

    pub fn truncation(&self) -> &TruncationSet {
        &self.truncation
    }

    pub fn bases(&self) -> &[Arc<PoincareBasis1D>] {
        &self.bases
    }

    pub fn basis(&self, k: usize) -> &PoincareBasis1D {
        &self.bases[k]
    }

    /// `λ_{k, j}`.
    pub fn eigenvalue(&self, k: usize, j: usize) -> f64 {
        self.bases[k].eigenvalues()[j]
    }

    /// Eigenvalue table, one row per variable.
    pub fn eigenvalue_table(&self) -> Vec<Vec<f64>> {
        self.bases.iter().map(|b| b.eigenvalues().to_vec()).collect()
    }

    /// `‖ψ_α‖_{H¹(μ,w)} = sqrt(1 + Σ_k λ_{k,α_k})`.
    pub fn h1_column_norms(&self) -> Vec<f64> {
        self.truncation
            .indices()
            .iter()
            .map(|a| {
                let s: f64 = (0..self.dim()).map(|k| self.eigenvalue(k, a.get(k))).sum();
                (1.0 + s).sqrt()
            })
            .collect()
    }

    /// Evaluates the weight of variable `k`.
    pub fn weight(&self, k: usize, x: f64) -> f64 {
        self.bases[k].weight().eval(x)
    }

    fn check_shape(&self, x: &ArrayView2<f64>) -> Result<()> {
        if x.ncols() != self.dim() {
            return Err(Error::Shape(format!("design has {} columns, expected {}", x.ncols(), self.dim())));
        }
        Ok(())
    }

    fn tables(&self, x: &ArrayView2<f64>) -> Result<Tables> {
        self.check_shape(x)?;
        let n = x.nrows();
        let mut values = Vec::with_capacity(self.dim());
        let mut derivs = Vec::with_capacity(self.dim());
        for (k, basis) in self.bases.iter().enumerate() {
            let upto = self.max_degrees[k];
            let mut v = Array2::zeros((n, upto + 1));
            let mut d = Array2::zeros((n, upto + 1));
            v.axis_iter_mut(Axis(0))
                .into_par_iter()
                .zip(d.axis_iter_mut(Axis(0)).into_par_iter())
                .enumerate()
                .try_for_each(|(i, (mut vr, mut dr))| {
                    basis.eval_all(
                        x[[i, k]],
                        upto,
                        vr.as_slice_mut().expect("row-major"),
                        dr.as_slice_mut().expect("row-major"),
                    )
                })?;
            values.push(v);
            derivs.push(d);
        }
        Ok(Tables { values, derivs })
    }

    /// `Ψ_{i,j} = ψ_{α_j}(x^{(i)})`.
    pub fn basis_matrix(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        let t = self.tables(&x)?;
        let idx = self.truncation.indices();
        let mut out = Array2::zeros((x.nrows(), idx.len()));
        out.axis_iter_mut(Axis(0)).into_par_iter().enumerate().for_each(|(i, mut row)| {
            for (j, a) in idx.iter().enumerate() {
                let mut v = 1.0;
                for (k, &ak) in a.entries().iter().enumerate() {
                    if ak > 0 {
                        v *= t.values[k][[i, ak]];
                    }
                }
                row[j] = v;
            }
        });
        Ok(out)
    }

    /// `(Ψ_{∂,k})_{i,j} = ∂ψ_{α_j}/∂x_k (x^{(i)})`; columns with `α_k = 0`
    /// are exactly zero.
    pub fn deriv_matrix(&self, x: ArrayView2<f64>, k: usize) -> Result<Array2<f64>> {
        if k >= self.dim() {
            return Err(Error::InvalidParams(format!("variable {k} out of range")));
        }
        let t = self.tables(&x)?;
        Ok(self.deriv_from_tables(&t, x.nrows(), k))
    }

    /// All `d` derivative matrices at once (tables built once).
    pub fn deriv_matrices(&self, x: ArrayView2<f64>) -> Result<Vec<Array2<f64>>> {
        let t = self.tables(&x)?;
        Ok((0..self.dim()).map(|k| self.deriv_from_tables(&t, x.nrows(), k)).collect())
    }

    fn deriv_from_tables(&self, t: &Tables, n: usize, k: usize) -> Array2<f64> {
        let idx = self.truncation.indices();
        let mut out = Array2::zeros((n, idx.len()));
        out.axis_iter_mut(Axis(0)).into_par_iter().enumerate().for_each(|(i, mut row)| {
            for (j, a) in idx.iter().enumerate() {
                if a.get(k) == 0 {
                    continue;
                }
                let mut v = t.derivs[k][[i, a.get(k)]];
                for (l, &al) in a.entries().iter().enumerate() {
                    if l != k && al > 0 {
                        v *= t.values[l][[i, al]];
                    }
                }
                row[j] = v;
            }
        });
        out
    }
}

/// A chaos basis with one coefficient per multi-index.
#[derive(Debug, Clone)]
pub struct ChaosExpansion {
    basis: Arc<ChaosBasis>,
    coefficients: Vec<f64>,
}

impl ChaosExpansion {
    pub fn new(basis: Arc<ChaosBasis>, coefficients: Vec<f64>) -> Result<Self> {
        if coefficients.len() != basis.len() {
            return Err(Error::Shape(format!(
                "{} coefficients for {} basis terms",
                coefficients.len(),
                basis.len()
            )));
        }
        Ok(Self { basis, coefficients })
    }

    pub fn basis(&self) -> &ChaosBasis {
        &self.basis
    }

    pub fn basis_arc(&self) -> &Arc<ChaosBasis> {
        &self.basis
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn dim(&self) -> usize {
        self.basis.dim()
    }

    fn active_terms(&self) -> Vec<(usize, f64)> {
        self.coefficients.iter().copied().enumerate().filter(|(_, c)| *c != 0.0).collect()
    }

    /// Surrogate values at the rows of `x`.
    pub fn predict(&self, x: ArrayView2<f64>) -> Result<Array1<f64>> {
        let (vals, _) = self.evaluate(x, false)?;
        Ok(vals)
    }

    /// Surrogate gradients, one row per point.
    pub fn predict_grad(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        let (_, grads) = self.evaluate(x, true)?;
        Ok(grads)
    }

    /// Values and (optionally) gradients without forming design matrices;
    /// only nonzero coefficients are visited.
    pub fn evaluate(&self, x: ArrayView2<f64>, with_grad: bool) -> Result<(Array1<f64>, Array2<f64>)> {
        let basis = &self.basis;
        basis.check_shape(&x)?;
        let d = basis.dim();
        let n = x.nrows();
        let terms = self.active_terms();
        let idx = basis.truncation.indices();
        let upto: Vec<usize> = (0..d)
            .map(|k| terms.iter().map(|&(j, _)| idx[j].get(k)).max().unwrap_or(0))
            .collect();
        let rows: Result<Vec<(f64, Vec<f64>)>> = (0..n)
            .into_par_iter()
            .map(|i| {
                let mut vals: Vec<Vec<f64>> = upto.iter().map(|&u| vec![0.0; u + 1]).collect();
                let mut ders: Vec<Vec<f64>> = upto.iter().map(|&u| vec![0.0; u + 1]).collect();
                for k in 0..d {
                    basis.bases[k].eval_all(x[[i, k]], upto[k], &mut vals[k], &mut ders[k])?;
                }
                let mut value = 0.0;
                let mut grad = vec![0.0; if with_grad { d } else { 0 }];
                let mut factors = vec![0.0; d];
                let mut prefix = vec![0.0; d + 1];
                let mut suffix = vec![0.0; d + 1];
                for &(j, c) in &terms {
                    let a = &idx[j];
                    for k in 0..d {
                        factors[k] = vals[k][a.get(k)];
                    }
                    if !with_grad {
                        value += c * factors.iter().product::<f64>();
                        continue;
                    }
                    prefix[0] = 1.0;
                    for k in 0..d {
                        prefix[k + 1] = prefix[k] * factors[k];
                    }
                    suffix[d] = 1.0;
                    for k in (0..d).rev() {
                        suffix[k] = suffix[k + 1] * factors[k];
                    }
                    value += c * prefix[d];
                    for k in 0..d {
                        if a.get(k) > 0 {
                            grad[k] += c * ders[k][a.get(k)] * prefix[k] * suffix[k + 1];
                        }
                    }
                }
                Ok((value, grad))
            })
            .collect();
        let rows = rows?;
        let mut values = Array1::zeros(n);
        let mut grads = Array2::zeros((n, if with_grad { d } else { 0 }));
        for (i, (v, g)) in rows.into_iter().enumerate() {
            values[i] = v;
            for (k, gk) in g.into_iter().enumerate() {
                grads[[i, k]] = gk;
            }
        }
        Ok((values, grads))
    }

    /// Serializable coefficient listing (nonzero terms only) plus the
    /// eigenvalue table.
    pub fn to_file(&self) -> CoefficientFile {
        let idx = self.basis.truncation.indices();
        CoefficientFile {
            terms: self
                .active_terms()
                .into_iter()
                .map(|(j, c)| Term { alpha: idx[j].entries().to_vec(), c })
                .collect(),
            eigenvalues: self.basis.eigenvalue_table(),
        }
    }

    /// Coefficients read back onto `basis`; terms missing from the file are
    /// zero.
    pub fn from_file(basis: Arc<ChaosBasis>, file: &CoefficientFile) -> Result<Self> {
        let mut c = vec![0.0; basis.len()];
        for t in &file.terms {
            let alpha = MultiIndex::new(t.alpha.clone());
            let j = basis.truncation.position(&alpha).ok_or_else(|| {
                Error::InvalidParams(format!("multi-index {:?} is not in the truncation set", t.alpha))
            })?;
            c[j] = t.c;
        }
        Self::new(basis, c)
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(&self.to_file())?)?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Term {
    pub alpha: Vec<usize>,
    pub c: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientFile {
    pub terms: Vec<Term>,
    pub eigenvalues: Vec<Vec<f64>>,
}
