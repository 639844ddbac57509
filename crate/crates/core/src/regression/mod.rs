//! Sparse regression of chaos coefficients from model values, from
//! gradients (aggregated per-derivative fits) or from both at once
//! (stacked, preconditioned system).

mod lars;

use std::fmt;

use ndarray::{s, Array1, Array2, ArrayView2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::chaos::{ChaosBasis, Term};
use crate::error::{Error, Result};

pub use lars::{lars_loo, LarsDiagnostics, LarsFit, DEFAULT_MAX_TERMS};

/// Inputs, model values and (optionally) gradients at an experimental
/// design.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignData {
    pub x: Array2<f64>,
    pub y: Array1<f64>,
    pub grad: Option<Array2<f64>>,
}

impl DesignData {
    pub fn new(x: Array2<f64>, y: Array1<f64>, grad: Option<Array2<f64>>) -> Result<Self> {
        if y.len() != x.nrows() {
            return Err(Error::Shape(format!("{} points but {} values", x.nrows(), y.len())));
        }
        if let Some(g) = &grad {
            if g.dim() != x.dim() {
                return Err(Error::Shape(format!("gradient shape {:?} vs inputs {:?}", g.dim(), x.dim())));
            }
        }
        Ok(Self { x, y, grad })
    }

    pub fn len(&self) -> usize {
        self.x.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.x.nrows() == 0
    }

    pub fn dim(&self) -> usize {
        self.x.ncols()
    }

    /// Rows `rows` (repeats allowed), keeping values and gradients together.
    pub fn select(&self, rows: &[usize]) -> Self {
        Self {
            x: self.x.select(Axis(0), rows),
            y: self.y.select(Axis(0), rows),
            grad: self.grad.as_ref().map(|g| g.select(Axis(0), rows)),
        }
    }

    /// Row resample with replacement.
    pub fn bootstrap(&self, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = self.len();
        let rows: Vec<usize> = (0..n).map(|_| rng.gen_range(0..n)).collect();
        self.select(&rows)
    }

    fn gradients(&self) -> Result<&Array2<f64>> {
        self.grad.as_ref().ok_or(Error::MissingGradients)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Standard,
    DerivAggregated,
    Combined,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Standard, Method::DerivAggregated, Method::Combined];

    pub fn needs_gradients(self) -> bool {
        self != Method::Standard
    }

    /// Short label; prefix with `w` for weighted bases.
    pub fn label(self) -> &'static str {
        match self {
            Method::Standard => "PoinCE",
            Method::DerivAggregated => "PoinCE-der-aggr",
            Method::Combined => "PoinCE-comb-regr",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    /// Length `P`, in truncation order.
    pub coefficients: Vec<f64>,
    /// Indices with nonzero coefficients, ascending.
    pub active_set: Vec<usize>,
    pub loo_error: f64,
    pub method: Method,
    /// One entry per LARS run (one for Standard/Combined, `d` for
    /// DerivAggregated).
    pub diagnostics: Vec<LarsDiagnostics>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitRecord {
    pub method: Method,
    pub loo_error: f64,
    pub active_set: Vec<usize>,
    pub coefficients: Vec<Term>,
}

impl FitResult {
    fn from_coefficients(coefficients: Vec<f64>, loo_error: f64, method: Method, diagnostics: Vec<LarsDiagnostics>) -> Self {
        let active_set = coefficients.iter().enumerate().filter(|(_, c)| **c != 0.0).map(|(j, _)| j).collect();
        Self { coefficients, active_set, loo_error, method, diagnostics }
    }

    /// Serializable form with coefficients keyed by multi-index.
    pub fn record(&self, basis: &ChaosBasis) -> FitRecord {
        let idx = basis.truncation().indices();
        FitRecord {
            method: self.method,
            loo_error: self.loo_error,
            active_set: self.active_set.clone(),
            coefficients: self
                .active_set
                .iter()
                .map(|&j| Term { alpha: idx[j].entries().to_vec(), c: self.coefficients[j] })
                .collect(),
        }
    }
}

fn check(basis: &ChaosBasis, data: &DesignData) -> Result<()> {
    if data.dim() != basis.dim() {
        return Err(Error::Shape(format!("data has {} inputs, basis {}", data.dim(), basis.dim())));
    }
    Ok(())
}

fn sqrt_weights(basis: &ChaosBasis, x: ArrayView2<f64>, k: usize) -> Array1<f64> {
    x.column(k).mapv(|v| basis.weight(k, v).max(0.0).sqrt())
}

pub fn fit(method: Method, basis: &ChaosBasis, data: &DesignData) -> Result<FitResult> {
    fit_with(method, basis, data, DEFAULT_MAX_TERMS)
}

pub fn fit_with(method: Method, basis: &ChaosBasis, data: &DesignData, max_terms: usize) -> Result<FitResult> {
    match method {
        Method::Standard => fit_standard_with(basis, data, max_terms),
        Method::DerivAggregated => fit_deriv_aggregated_with(basis, data, max_terms),
        Method::Combined => fit_combined_with(basis, data, max_terms),
    }
}

/// LARS on `Ψ c ≈ y`.
pub fn fit_standard(basis: &ChaosBasis, data: &DesignData) -> Result<FitResult> {
    fit_standard_with(basis, data, DEFAULT_MAX_TERMS)
}

pub fn fit_standard_with(basis: &ChaosBasis, data: &DesignData, max_terms: usize) -> Result<FitResult> {
    check(basis, data)?;
    let psi = basis.basis_matrix(data.x.view())?;
    let f = lars_loo(psi.view(), data.y.view(), max_terms)?;
    Ok(FitResult::from_coefficients(f.coefficients, f.loo_error, Method::Standard, vec![f.diagnostics]))
}

/// One LARS fit per partial derivative on the `√w_k`-scaled system, each
/// coefficient averaged over the fits that estimate it; the constant is the
/// mean residual. The reported LOO error is the mean of the per-derivative
/// LOO errors.
pub fn fit_deriv_aggregated(basis: &ChaosBasis, data: &DesignData) -> Result<FitResult> {
    fit_deriv_aggregated_with(basis, data, DEFAULT_MAX_TERMS)
}

pub fn fit_deriv_aggregated_with(basis: &ChaosBasis, data: &DesignData, max_terms: usize) -> Result<FitResult> {
    check(basis, data)?;
    let g = data.gradients()?;
    let d = basis.dim();
    let p = basis.len();
    let idx = basis.truncation().indices();
    let derivs = basis.deriv_matrices(data.x.view())?;

    let per_k: Vec<Result<(Vec<usize>, LarsFit)>> = (0..d)
        .into_par_iter()
        .map(|k| {
            let cols: Vec<usize> = (0..p).filter(|&j| idx[j].get(k) > 0).collect();
            let tw = sqrt_weights(basis, data.x.view(), k);
            // columns scaled to unit expected norm: ‖√w ∂ψ‖² = λ
            let scale: Vec<f64> = cols.iter().map(|&j| basis.eigenvalue(k, idx[j].get(k)).sqrt()).collect();
            let mut a = derivs[k].select(Axis(1), &cols);
            for (mut col, &s) in a.axis_iter_mut(Axis(1)).zip(&scale) {
                col.zip_mut_with(&tw, |v, &t| *v *= t / s);
            }
            let b = &g.column(k) * &tw;
            let mut f = lars_loo(a.view(), b.view(), max_terms)?;
            for (c, &s) in f.coefficients.iter_mut().zip(&scale) {
                *c /= s;
            }
            Ok((cols, f))
        })
        .collect();

    let mut sums = vec![0.0; p];
    let mut loo = 0.0;
    let mut diagnostics = Vec::with_capacity(d);
    for r in per_k {
        let (cols, f) = r?;
        for (&j, &c) in cols.iter().zip(&f.coefficients) {
            sums[j] += c;
        }
        loo += f.loo_error;
        diagnostics.push(f.diagnostics);
    }
    let mut coefficients = vec![0.0; p];
    for j in 1..p {
        let contributing = idx[j].rank();
        if contributing > 0 {
            coefficients[j] = sums[j] / contributing as f64;
        }
    }
    let psi = basis.basis_matrix(data.x.view())?;
    let fitted = psi.dot(&Array1::from(coefficients.clone()));
    let c0 = (&data.y - &fitted).mean().unwrap_or(0.0);
    // a mean at rounding level of the data is an exact zero
    let ymax = data.y.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    coefficients[0] = if c0.abs() <= 64.0 * f64::EPSILON * ymax { 0.0 } else { c0 };
    Ok(FitResult::from_coefficients(coefficients, loo / d as f64, Method::DerivAggregated, diagnostics))
}

/// Stacked values and `√w_k`-preconditioned derivatives, `(d+1)·n` rows;
/// each column divided by its H¹ norm.
pub fn combined_system(basis: &ChaosBasis, data: &DesignData) -> Result<(Array2<f64>, Array1<f64>, Vec<f64>)> {
    check(basis, data)?;
    let g = data.gradients()?;
    let n = data.len();
    let d = basis.dim();
    let p = basis.len();
    let mut a = Array2::zeros(((d + 1) * n, p));
    let mut b = Array1::zeros((d + 1) * n);
    a.slice_mut(s![0..n, ..]).assign(&basis.basis_matrix(data.x.view())?);
    b.slice_mut(s![0..n]).assign(&data.y);
    for (k, dk) in basis.deriv_matrices(data.x.view())?.into_iter().enumerate() {
        let tw = sqrt_weights(basis, data.x.view(), k);
        let rows = (k + 1) * n..(k + 2) * n;
        let mut block = a.slice_mut(s![rows.clone(), ..]);
        block.assign(&dk);
        for (mut row, &t) in block.axis_iter_mut(Axis(0)).zip(&tw) {
            row *= t;
        }
        b.slice_mut(s![rows]).assign(&(&g.column(k) * &tw));
    }
    let norms = basis.h1_column_norms();
    for (mut col, &nm) in a.axis_iter_mut(Axis(1)).zip(&norms) {
        col /= nm;
    }
    Ok((a, b, norms))
}

pub fn fit_combined(basis: &ChaosBasis, data: &DesignData) -> Result<FitResult> {
    fit_combined_with(basis, data, DEFAULT_MAX_TERMS)
}

pub fn fit_combined_with(basis: &ChaosBasis, data: &DesignData, max_terms: usize) -> Result<FitResult> {
    let (a, b, norms) = combined_system(basis, data)?;
    let f = lars_loo(a.view(), b.view(), max_terms)?;
    let coefficients = f.coefficients.iter().zip(&norms).map(|(c, nm)| c / nm).collect();
    Ok(FitResult::from_coefficients(coefficients, f.loo_error, Method::Combined, vec![f.diagnostics]))
}
