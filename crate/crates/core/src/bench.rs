//! Benchmark models with analytic gradients: a product of Lorentzian bumps
//! with interactions, and the dyke maintenance cost of the flood model.

use std::fmt;
use std::sync::Arc;

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::gsa::{pick_freeze, McEstimate};
use crate::measures::{Measure1D, ProductMeasure};
use crate::regression::DesignData;

type EvalFn = dyn Fn(&[f64]) -> Result<f64> + Send + Sync;
type GradFn = dyn Fn(&[f64]) -> Result<Vec<f64>> + Send + Sync;

#[derive(Clone)]
pub struct BenchmarkModel {
    name: String,
    variables: Vec<String>,
    input: ProductMeasure,
    eval: Arc<EvalFn>,
    grad: Arc<GradFn>,
}

impl fmt::Debug for BenchmarkModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("BenchmarkModel").field("name", &self.name).field("variables", &self.variables).finish()
    }
}

impl BenchmarkModel {
    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.input.dim()
    }

    pub fn variables(&self) -> &[String] {
        &self.variables
    }

    pub fn input_measure(&self) -> &ProductMeasure {
        &self.input
    }

    pub fn eval_point(&self, x: &[f64]) -> Result<f64> {
        (self.eval)(x)
    }

    pub fn grad_point(&self, x: &[f64]) -> Result<Vec<f64>> {
        (self.grad)(x)
    }

    fn check(&self, x: &ArrayView2<f64>) -> Result<()> {
        if x.ncols() != self.dim() {
            return Err(Error::Shape(format!("{} columns for a {}-input model", x.ncols(), self.dim())));
        }
        Ok(())
    }

    /// Model values at the rows of `x`.
    pub fn evaluate(&self, x: ArrayView2<f64>) -> Result<Array1<f64>> {
        self.check(&x)?;
        let rows: Vec<_> = x.axis_iter(Axis(0)).collect();
        let v: Result<Vec<f64>> = rows.par_iter().map(|r| (self.eval)(&r.to_vec())).collect();
        Ok(Array1::from(v?))
    }

    /// Gradients, one row per point.
    pub fn gradient(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        self.check(&x)?;
        let rows: Vec<_> = x.axis_iter(Axis(0)).collect();
        let g: Result<Vec<Vec<f64>>> = rows.par_iter().map(|r| (self.grad)(&r.to_vec())).collect();
        let mut out = Array2::zeros(x.dim());
        for (i, gi) in g?.into_iter().enumerate() {
            out.row_mut(i).assign(&Array1::from(gi));
        }
        Ok(out)
    }

    /// `n` input samples with values and gradients.
    pub fn design(&self, n: usize, seed: u64) -> Result<DesignData> {
        let x = self.input.sample(n, seed)?;
        let y = self.evaluate(x.view())?;
        let g = self.gradient(x.view())?;
        DesignData::new(x, y, Some(g))
    }
}

/// Shift of the `k`-th bump (1-based `k`).
pub fn toy_shift(k: usize) -> f64 {
    let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
    sign / (k as f64 + 1.0)
}

/// `f(x) = Π_k (d/4) / (d/4 + (x_k − a_k)²)` on `U(−1, 1)^d`.
pub fn toy_model(d: usize) -> Result<BenchmarkModel> {
    if d == 0 {
        return Err(Error::InvalidParams("toy model needs d >= 1".into()));
    }
    let shifts: Arc<Vec<f64>> = Arc::new((1..=d).map(toy_shift).collect());
    let q = d as f64 / 4.0;
    let input = ProductMeasure::new(vec![Measure1D::uniform(-1.0, 1.0)?; d])?;
    let s1 = shifts.clone();
    let eval = move |x: &[f64]| Ok(x.iter().zip(s1.iter()).map(|(xk, ak)| q / (q + (xk - ak).powi(2))).product());
    let s2 = shifts;
    let grad = move |x: &[f64]| {
        let f: f64 = x.iter().zip(s2.iter()).map(|(xk, ak)| q / (q + (xk - ak).powi(2))).product();
        Ok(x.iter()
            .zip(s2.iter())
            .map(|(xk, ak)| {
                let u = xk - ak;
                -2.0 * u / (q + u * u) * f
            })
            .collect())
    };
    Ok(BenchmarkModel {
        name: "toy".into(),
        variables: (1..=d).map(|k| format!("X{k}")).collect(),
        input,
        eval: Arc::new(eval),
        grad: Arc::new(grad),
    })
}

/// Input order of the flood model.
pub const FLOOD_VARIABLES: [&str; 8] = ["Q", "Ks", "Zv", "Zm", "Hd", "Cb", "L", "B"];

pub fn flood_inputs() -> Result<ProductMeasure> {
    ProductMeasure::new(vec![
        Measure1D::truncated_gumbel(1013.0, 558.0, 500.0, 3000.0)?,
        Measure1D::truncated_gaussian(30.0, 64.0, 15.0, 75.0)?,
        Measure1D::triangular(49.0, 50.0, 51.0)?,
        Measure1D::triangular(54.0, 55.0, 56.0)?,
        Measure1D::uniform(7.0, 9.0)?,
        Measure1D::triangular(55.0, 55.5, 56.0)?,
        Measure1D::triangular(4990.0, 5000.0, 5010.0)?,
        Measure1D::triangular(295.0, 300.0, 305.0)?,
    ])
}

/// Maximal annual overflow `S` and the flow term `g = Q/(B K_s) √(L/(Z_m − Z_v))`.
fn flood_overflow(x: &[f64]) -> Result<(f64, f64)> {
    let [q, ks, zv, zm, hd, cb, l, b] = <[f64; 8]>::try_from(x)
        .map_err(|_| Error::Shape(format!("flood model takes 8 inputs, got {}", x.len())))?;
    if zm <= zv {
        return Err(Error::DomainError(format!("Zm = {zm} must exceed Zv = {zv}")));
    }
    let g = q / (b * ks) * (l / (zm - zv)).sqrt();
    Ok((zv - hd - cb + g.powf(0.6), g))
}

pub fn flood_overflow_height(x: &[f64]) -> Result<f64> {
    flood_overflow(x).map(|(s, _)| s)
}

fn flood_cost(x: &[f64]) -> Result<f64> {
    let (s, _) = flood_overflow(x)?;
    let hd = x[4];
    let c = if s > 0.0 { 1.0 } else { 0.2 + 0.8 * (1.0 - (-1000.0 / s.powi(4)).exp()) };
    Ok(c + hd.max(8.0) / 20.0)
}

fn flood_grad(x: &[f64]) -> Result<Vec<f64>> {
    let (s, g) = flood_overflow(x)?;
    let [q, ks, zv, zm, hd, _cb, l, b] = <[f64; 8]>::try_from(x).expect("checked above");
    // right-sided at the kinks S = 0 and Hd = 8
    let dc_ds = if s < 0.0 { -3200.0 * (-1000.0 / s.powi(4)).exp() / s.powi(5) } else { 0.0 };
    let dh_dg = 0.6 * g.powf(-0.4);
    let dz = zm - zv;
    let ds = [
        dh_dg * g / q,
        -dh_dg * g / ks,
        1.0 + dh_dg * g / (2.0 * dz),
        -dh_dg * g / (2.0 * dz),
        -1.0,
        -1.0,
        dh_dg * g / (2.0 * l),
        -dh_dg * g / b,
    ];
    let mut grad: Vec<f64> = ds.iter().map(|d| dc_ds * d).collect();
    if hd >= 8.0 {
        grad[4] += 1.0 / 20.0;
    }
    Ok(grad)
}

/// Annual dyke maintenance cost with the eight inputs of [`FLOOD_VARIABLES`].
pub fn flood_model() -> Result<BenchmarkModel> {
    Ok(BenchmarkModel {
        name: "flood".into(),
        variables: FLOOD_VARIABLES.iter().map(|s| s.to_string()).collect(),
        input: flood_inputs()?,
        eval: Arc::new(flood_cost),
        grad: Arc::new(flood_grad),
    })
}

/// Model by name: `toy` (with dimension `d`, default 4) or `flood`.
pub fn model_by_name(name: &str, d: Option<usize>) -> Result<BenchmarkModel> {
    match name {
        "toy" => toy_model(d.unwrap_or(4)),
        "flood" => {
            if let Some(d) = d {
                if d != 8 {
                    return Err(Error::Config(format!("the flood model has 8 inputs, not {d}")));
                }
            }
            flood_model()
        }
        other => Err(Error::Config(format!("unknown model '{other}'"))),
    }
}

/// Total Sobol' indices of the model itself by the Jansen pick-freeze
/// estimator.
pub fn reference_sobol(model: &BenchmarkModel, n_mc: usize, seed: u64) -> Result<Vec<McEstimate>> {
    if n_mc < 10_000 {
        return Err(Error::InvalidParams(format!("n_mc = {n_mc}; need at least 10^4")));
    }
    Ok(pick_freeze(|x| model.evaluate(x), model.input_measure(), n_mc, seed)?.total)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fd_check(model: &BenchmarkModel, x: &Array2<f64>, h_rel: f64, skip: impl Fn(&[f64]) -> bool) -> usize {
        let g = model.gradient(x.view()).unwrap();
        let mut checked = 0;
        for (i, row) in x.axis_iter(Axis(0)).enumerate() {
            let p = row.to_vec();
            if skip(&p) {
                continue;
            }
            checked += 1;
            let gnorm = g.row(i).iter().fold(0.0f64, |a, v| a.max(v.abs()));
            for k in 0..model.dim() {
                let h = h_rel * p[k].abs().max(1.0);
                let mut xp = p.clone();
                let mut xm = p.clone();
                xp[k] += h;
                xm[k] -= h;
                let fd = (model.eval_point(&xp).unwrap() - model.eval_point(&xm).unwrap()) / (2.0 * h);
                let err = (fd - g[[i, k]]).abs();
                assert!(err <= 1e-6 * gnorm.max(1e-300) + 1e-12, "point {i} var {k}: {} vs fd {fd}", g[[i, k]]);
            }
        }
        checked
    }

    #[test]
    fn toy_maximum_and_shifts() {
        let m = toy_model(4).unwrap();
        assert_eq!(toy_shift(1), -0.5);
        assert!((toy_shift(2) - 1.0 / 3.0).abs() < 1e-16);
        let a: Vec<f64> = (1..=4).map(toy_shift).collect();
        assert_eq!(m.eval_point(&a).unwrap(), 1.0);
        assert!(m.grad_point(&a).unwrap().iter().all(|&v| v == 0.0));
        assert!(toy_model(0).is_err());
    }

    #[test]
    fn toy_gradient_matches_finite_differences() {
        let m = toy_model(4).unwrap();
        let x = m.input_measure().sample(100, 1).unwrap();
        assert_eq!(fd_check(&m, &x, 1e-6, |_| false), 100);
    }

    #[test]
    fn flood_reference_point() {
        let x = [1013.0, 30.0, 50.0, 55.0, 8.0, 55.5, 5000.0, 300.0];
        let g = 1013.0 / (300.0 * 30.0) * (5000.0f64 / 5.0).sqrt();
        let s = 50.0 - 8.0 - 55.5 + g.powf(3.0 / 5.0);
        let c = 0.2 + 0.8 * (1.0 - (-1000.0 / s.powi(4)).exp()) + 8.0 / 20.0;
        assert!((flood_overflow_height(&x).unwrap() - s).abs() < 1e-12);
        let m = flood_model().unwrap();
        assert!((m.eval_point(&x).unwrap() - c).abs() < 1e-12);
        assert!(s < 0.0);
        // ∂S/∂L > 0, and ∂C/∂S > 0 for S < 0
        assert!(m.grad_point(&x).unwrap()[6] > 0.0);
    }

    #[test]
    fn flood_gradient_matches_finite_differences() {
        let m = flood_model().unwrap();
        let x = m.input_measure().sample(300, 2).unwrap();
        let n = fd_check(&m, &x, 1e-7, |p| {
            let s = flood_overflow_height(p).unwrap();
            s.abs() <= 0.1 || (p[4] - 8.0).abs() <= 0.01
        });
        assert!(n >= 100);
    }

    #[test]
    fn flood_domain_error() {
        let x = [1013.0, 30.0, 55.0, 55.0, 8.0, 55.5, 5000.0, 300.0];
        assert!(matches!(flood_model().unwrap().eval_point(&x), Err(Error::DomainError(_))));
        assert!(flood_model().unwrap().eval_point(&x[..7]).is_err());
    }

    #[test]
    fn models_by_name() {
        assert_eq!(model_by_name("toy", None).unwrap().dim(), 4);
        assert_eq!(model_by_name("flood", None).unwrap().variables()[5], "Cb");
        assert!(model_by_name("flood", Some(3)).is_err());
        assert!(model_by_name("ishigami", None).is_err());
    }

    #[test]
    fn reference_indices_reproducible_across_seeds() {
        let m = toy_model(4).unwrap();
        let a = reference_sobol(&m, 100_000, 1).unwrap();
        let b = reference_sobol(&m, 100_000, 2).unwrap();
        for (x, y) in a.iter().zip(&b) {
            let sigma = (x.std_error.powi(2) + y.std_error.powi(2)).sqrt();
            assert!((x.mean - y.mean).abs() <= 3.0 * sigma, "{x:?} {y:?}");
        }
        assert!(reference_sobol(&m, 100, 1).is_err());
    }
}
