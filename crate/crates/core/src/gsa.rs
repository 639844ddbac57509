//! Sensitivity indices read off a chaos expansion (Sobol' indices, weighted
//! DGSMs, the Poincaré bound) and Monte Carlo estimators used to check them.

use std::path::Path;

use ndarray::{Array1, Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::chaos::ChaosExpansion;
use crate::error::{Error, Result};
use crate::measures::ProductMeasure;
use crate::seeds;

/// Tolerance of the Sobol'–DGSM inequality check.
pub const BOUND_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GsaReport {
    pub variance: f64,
    pub total_sobol: Vec<f64>,
    pub first_sobol: Vec<f64>,
    pub dgsm: Vec<f64>,
    pub poincare_constants: Vec<f64>,
    pub bound_ratios: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundCheck {
    pub holds: bool,
    /// `C_P ν_k / Var − S_k^tot`.
    pub margin: f64,
}

/// `Σ_{α≠0} c_α²`.
pub fn variance(e: &ChaosExpansion) -> f64 {
    e.coefficients()[1..].iter().map(|c| c * c).sum()
}

fn partial_sums(e: &ChaosExpansion, keep: impl Fn(&[usize], usize) -> bool) -> Result<Vec<f64>> {
    let var = variance(e);
    if !(var > 0.0) {
        return Err(Error::ZeroVariance);
    }
    let idx = e.basis().truncation().indices();
    Ok((0..e.dim())
        .map(|k| {
            idx.iter()
                .zip(e.coefficients())
                .filter(|(a, _)| keep(a.entries(), k))
                .map(|(_, c)| c * c)
                .sum::<f64>()
                / var
        })
        .collect())
}

/// `S_k^tot = Σ_{α_k ≥ 1} c_α² / Var`.
pub fn total_sobol(e: &ChaosExpansion) -> Result<Vec<f64>> {
    partial_sums(e, |a, k| a[k] > 0)
}

/// First-order indices: terms that depend on `x_k` alone.
pub fn first_sobol(e: &ChaosExpansion) -> Result<Vec<f64>> {
    partial_sums(e, |a, k| a[k] > 0 && a.iter().enumerate().all(|(l, &v)| l == k || v == 0))
}

/// `ν_k = Σ_{α_k ≥ 1} λ_{k,α_k} c_α²`.
pub fn dgsm(e: &ChaosExpansion) -> Vec<f64> {
    let basis = e.basis();
    let idx = basis.truncation().indices();
    (0..e.dim())
        .map(|k| {
            idx.iter()
                .zip(e.coefficients())
                .filter(|(a, _)| a.get(k) > 0)
                .map(|(a, c)| basis.eigenvalue(k, a.get(k)) * c * c)
                .sum()
        })
        .collect()
}

pub fn gsa_report(e: &ChaosExpansion) -> Result<GsaReport> {
    let variance = variance(e);
    let total_sobol = total_sobol(e)?;
    let first_sobol = first_sobol(e)?;
    let dgsm = dgsm(e);
    let poincare_constants: Vec<f64> = e.basis().bases().iter().map(|b| b.poincare_constant()).collect();
    let bound_ratios = poincare_constants.iter().zip(&dgsm).map(|(cp, nu)| cp * nu / variance).collect();
    Ok(GsaReport { variance, total_sobol, first_sobol, dgsm, poincare_constants, bound_ratios })
}

/// Checks `S_k^tot ≤ C_P ν_k / Var` per variable.
pub fn sobol_dgsm_bound(report: &GsaReport) -> Vec<BoundCheck> {
    report
        .bound_ratios
        .iter()
        .zip(&report.total_sobol)
        .map(|(r, s)| {
            let margin = r - s;
            BoundCheck { holds: margin >= -BOUND_TOL, margin }
        })
        .collect()
}

impl GsaReport {
    pub fn write_json(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }

    /// One row per variable.
    pub fn write_csv(&self, path: &Path, names: Option<&[String]>) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["variable", "s_tot", "s_first", "nu", "c_p", "bound_margin"])?;
        for (k, check) in sobol_dgsm_bound(self).iter().enumerate() {
            let name = names.and_then(|n| n.get(k).cloned()).unwrap_or_else(|| format!("x{}", k + 1));
            w.write_record([
                name,
                self.total_sobol[k].to_string(),
                self.first_sobol[k].to_string(),
                self.dgsm[k].to_string(),
                self.poincare_constants[k].to_string(),
                check.margin.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Monte Carlo mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub mean: f64,
    pub std_error: f64,
}

impl McEstimate {
    fn from_samples(v: &Array1<f64>) -> Self {
        let n = v.len() as f64;
        let mean = v.mean().unwrap_or(0.0);
        let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
        Self { mean, std_error: (var / n).sqrt() }
    }

    /// `|x − mean| ≤ z·σ`.
    pub fn agrees(&self, x: f64, z: f64) -> bool {
        (x - self.mean).abs() <= z * self.std_error
    }
}

/// Sample variance and its standard error.
pub fn mc_variance(values: &Array1<f64>) -> McEstimate {
    let n = values.len() as f64;
    let mean = values.mean().unwrap_or(0.0);
    let centered = values.mapv(|v| (v - mean).powi(2));
    let est = McEstimate::from_samples(&centered);
    McEstimate { mean: est.mean * n / (n - 1.0), std_error: est.std_error }
}

/// Estimates `E[w_k(X_k) (∂M̂/∂x_k)²]` from `n` samples of the input measure.
pub fn mc_dgsm(e: &ChaosExpansion, measure: &ProductMeasure, n: usize, seed: u64) -> Result<Vec<McEstimate>> {
    let x = measure.sample(n, seed)?;
    let g = e.predict_grad(x.view())?;
    Ok((0..e.dim())
        .map(|k| {
            let s = Array1::from_iter(
                x.column(k).iter().zip(g.column(k)).map(|(&xk, &gk)| e.basis().weight(k, xk) * gk * gk),
            );
            McEstimate::from_samples(&s)
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PickFreeze {
    pub variance: f64,
    /// Jansen estimator.
    pub total: Vec<McEstimate>,
    /// Saltelli (2010) estimator.
    pub first: Vec<McEstimate>,
}

/// Pick-freeze estimates of total and first-order indices of `f` with two
/// independent `n × d` blocks drawn from `measure`.
pub fn pick_freeze<F>(f: F, measure: &ProductMeasure, n: usize, seed: u64) -> Result<PickFreeze>
where
    F: Fn(ArrayView2<f64>) -> Result<Array1<f64>>,
{
    if n < 2 {
        return Err(Error::InvalidParams("pick-freeze needs at least 2 samples".into()));
    }
    let a = measure.sample(n, seeds::derive(seed, &[0]))?;
    let b = measure.sample(n, seeds::derive(seed, &[1]))?;
    let fa = f(a.view())?;
    let fb = f(b.view())?;
    let mut both = fa.to_vec();
    both.extend(fb.iter());
    let var = mc_variance(&Array1::from(both)).mean;
    if !(var > 0.0) {
        return Err(Error::ZeroVariance);
    }
    let mut total = Vec::with_capacity(measure.dim());
    let mut first = Vec::with_capacity(measure.dim());
    for k in 0..measure.dim() {
        let mut abk: Array2<f64> = a.clone();
        abk.column_mut(k).assign(&b.column(k));
        let fab = f(abk.view())?;
        let jansen = Array1::from_iter(fa.iter().zip(&fab).map(|(x, y)| 0.5 * (x - y).powi(2) / var));
        let saltelli = Array1::from_iter(
            fb.iter().zip(&fab).zip(&fa).map(|((yb, yab), ya)| yb * (yab - ya) / var),
        );
        total.push(McEstimate::from_samples(&jansen));
        first.push(McEstimate::from_samples(&saltelli));
    }
    Ok(PickFreeze { variance: var, total, first })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chaos::{total_degree_set, ChaosBasis, MultiIndex};
    use crate::measures::Measure1D;
    use crate::spectral::build_basis;
    use crate::weights::{constant_weight, wlin_compute};
    use std::f64::consts::PI;
    use std::sync::Arc;

    fn basis(d: usize, p: usize, weighted: bool) -> Arc<ChaosBasis> {
        let m = Measure1D::uniform(0.0, 1.0).unwrap();
        let w = if weighted { wlin_compute(&m, 4000).unwrap() } else { constant_weight(1.0).unwrap() };
        let b = Arc::new(build_basis(&m, &w, p, 1000).unwrap());
        Arc::new(ChaosBasis::new(vec![b; d], total_degree_set(d, p)).unwrap())
    }

    fn with_terms(basis: &Arc<ChaosBasis>, terms: &[(&[usize], f64)]) -> ChaosExpansion {
        let mut c = vec![0.0; basis.len()];
        for (a, v) in terms {
            c[basis.truncation().position(&MultiIndex::new(a.to_vec())).unwrap()] = *v;
        }
        ChaosExpansion::new(basis.clone(), c).unwrap()
    }

    #[test]
    fn single_and_symmetric_terms() {
        let b = basis(2, 2, false);
        let e = with_terms(&b, &[(&[1, 0], 1.0)]);
        assert_eq!(total_sobol(&e).unwrap(), vec![1.0, 0.0]);
        let e = with_terms(&b, &[(&[1, 0], 1.0), (&[0, 1], 1.0)]);
        assert_eq!(total_sobol(&e).unwrap(), vec![0.5, 0.5]);
        assert_eq!(first_sobol(&e).unwrap(), vec![0.5, 0.5]);
        let e = with_terms(&b, &[(&[0, 0], 3.0)]);
        assert!(matches!(total_sobol(&e), Err(Error::ZeroVariance)));
        assert_eq!(dgsm(&e), vec![0.0, 0.0]);
    }

    #[test]
    fn interaction_has_no_first_order_part() {
        let b = basis(4, 2, false);
        let e = with_terms(&b, &[(&[1, 1, 0, 0], 1.0)]);
        assert_eq!(first_sobol(&e).unwrap(), vec![0.0; 4]);
        assert_eq!(total_sobol(&e).unwrap(), vec![1.0, 1.0, 0.0, 0.0]);
    }

    #[test]
    fn dgsm_and_bound() {
        let b = basis(1, 3, false);
        let e = with_terms(&b, &[(&[1], 1.0)]);
        let nu = dgsm(&e)[0];
        assert!((nu - PI * PI).abs() < 1e-3 * PI * PI);
        let r = gsa_report(&e).unwrap();
        let check = sobol_dgsm_bound(&r)[0];
        assert!(check.holds && check.margin.abs() < 1e-12);
        let e = with_terms(&b, &[(&[3], 1.0)]);
        let high = sobol_dgsm_bound(&gsa_report(&e).unwrap())[0];
        assert!(high.holds && high.margin > 1.0);
        let e = with_terms(&b, &[(&[2], 1.0)]);
        let mid = sobol_dgsm_bound(&gsa_report(&e).unwrap())[0];
        assert!(mid.margin < high.margin);
    }

    #[test]
    fn mc_oracles_agree_with_coefficients() {
        let b = basis(3, 3, true);
        let mut c: Vec<f64> = (0..b.len()).map(|j| 1.0 / (1.0 + j as f64)).collect();
        c[0] = 0.3;
        let e = ChaosExpansion::new(b.clone(), c).unwrap();
        let pm = ProductMeasure::new(vec![Measure1D::uniform(0.0, 1.0).unwrap(); 3]).unwrap();
        let report = gsa_report(&e).unwrap();
        let nu_mc = mc_dgsm(&e, &pm, 100_000, 7).unwrap();
        for (est, nu) in nu_mc.iter().zip(&report.dgsm) {
            assert!(est.agrees(*nu, 4.0), "{est:?} vs {nu}");
        }
        let x = pm.sample(100_000, 8).unwrap();
        let v = mc_variance(&e.predict(x.view()).unwrap());
        assert!(v.agrees(report.variance, 4.0), "{v:?} vs {}", report.variance);
        let pf = pick_freeze(|x| e.predict(x), &pm, 50_000, 9).unwrap();
        for k in 0..3 {
            assert!((pf.total[k].mean - report.total_sobol[k]).abs() < 4.0 * pf.total[k].std_error + 0.01);
            assert!(report.first_sobol[k] <= report.total_sobol[k]);
        }
        assert!(report.first_sobol.iter().sum::<f64>() <= 1.0 + 1e-10);
    }

    #[test]
    fn pick_freeze_analytic_cases() {
        let pm = ProductMeasure::new(vec![Measure1D::uniform(-1.0, 1.0).unwrap(); 2]).unwrap();
        let add = pick_freeze(|x| Ok(x.column(0).to_owned() + x.column(1)), &pm, 20_000, 1).unwrap();
        for k in 0..2 {
            assert!((add.total[k].mean - 0.5).abs() < 4.0 * add.total[k].std_error);
        }
        let prod = pick_freeze(|x| Ok(&x.column(0) * &x.column(1)), &pm, 20_000, 2).unwrap();
        for k in 0..2 {
            assert!((prod.total[k].mean - 1.0).abs() < 4.0 * prod.total[k].std_error);
        }
    }

    #[test]
    fn report_files() {
        let b = basis(2, 1, false);
        let e = with_terms(&b, &[(&[1, 0], 1.0), (&[0, 1], 0.5)]);
        let r = gsa_report(&e).unwrap();
        let dir = tempfile::tempdir().unwrap();
        r.write_json(&dir.path().join("gsa.json")).unwrap();
        r.write_csv(&dir.path().join("gsa.csv"), None).unwrap();
        let text = std::fs::read_to_string(dir.path().join("gsa.csv")).unwrap();
        assert_eq!(text.lines().count(), 3);
        assert!(text.starts_with("variable,s_tot,s_first,nu,c_p,bound_margin"));
    }
}
