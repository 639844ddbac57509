use std::sync::Arc;

use ndarray::{Array1, Array2, Axis};
use poincare_chaos::chaos::{total_degree_set, ChaosBasis, ChaosExpansion};
use poincare_chaos::measures::{Measure1D, ProductMeasure};
use poincare_chaos::quadrature::integrate_with_breaks;
use poincare_chaos::regression::{combined_system, fit, DesignData, Method};
use poincare_chaos::spectral::build_basis;
use poincare_chaos::weights::{constant_weight, WeightSetting};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn measures() -> Vec<Measure1D> {
    vec![
        Measure1D::uniform(-1.0, 1.0).unwrap(),
        Measure1D::triangular(0.0, 0.3, 1.0).unwrap(),
        Measure1D::truncated_gaussian(0.0, 1.0, -3.0, 3.0).unwrap(),
        Measure1D::truncated_gumbel(0.0, 1.0, -2.0, 5.0).unwrap(),
        Measure1D::truncated_exponential(1.0, 0.0, 3.0).unwrap(),
    ]
}

fn chaos(ms: Vec<Measure1D>, weight: WeightSetting, p: usize) -> Arc<ChaosBasis> {
    let bases = ms
        .iter()
        .map(|m| Arc::new(build_basis(m, &weight.build(m).unwrap(), p, 1000).unwrap()))
        .collect::<Vec<_>>();
    let d = bases.len();
    Arc::new(ChaosBasis::new(bases, total_degree_set(d, p)).unwrap())
}

/// Largest |empirical Gram − target| in units of the per-entry Monte
/// Carlo standard error.
fn gram_z(a: &Array2<f64>, target: impl Fn(usize, usize) -> f64) -> f64 {
    let n = a.nrows() as f64;
    let mut worst: f64 = 0.0;
    for i in 0..a.ncols() {
        for j in i..a.ncols() {
            let prod = &a.column(i) * &a.column(j);
            let mean = prod.mean().unwrap();
            let var = prod.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
            let se = (var / n).sqrt().max(1e-300);
            worst = worst.max((mean - target(i, j)).abs() / se);
        }
    }
    worst
}

#[test]
fn tensor_orthonormality_monte_carlo() {
    let ms = vec![
        Measure1D::uniform(-1.0, 1.0).unwrap(),
        Measure1D::triangular(0.0, 0.3, 1.0).unwrap(),
        Measure1D::truncated_exponential(1.0, 0.0, 3.0).unwrap(),
    ];
    let pm = ProductMeasure::new(ms.clone()).unwrap();
    let basis = chaos(ms, WeightSetting::Wlin, 4);
    let mut cols: Vec<usize> = (0..basis.len()).collect();
    cols.shuffle(&mut ChaCha8Rng::seed_from_u64(1));
    cols.truncate(20);
    let x = pm.sample(100_000, 2).unwrap();
    let psi = basis.basis_matrix(x.view()).unwrap().select(Axis(1), &cols);
    // 210 entries: a Bonferroni-level bound rather than a per-entry 3σ
    let z = gram_z(&psi, |i, j| if i == j { 1.0 } else { 0.0 });
    assert!(z < 4.5, "max z {z}");

    let idx = basis.truncation().indices();
    for k in 0..3 {
        let tw = x.column(k).mapv(|v| basis.weight(k, v).sqrt());
        let mut dk = basis.deriv_matrix(x.view(), k).unwrap().select(Axis(1), &cols);
        for mut c in dk.axis_iter_mut(Axis(1)) {
            c *= &tw;
        }
        let z = gram_z(&dk, |i, j| {
            let a = &idx[cols[i]];
            if i == j && a.get(k) > 0 {
                basis.eigenvalue(k, a.get(k))
            } else {
                0.0
            }
        });
        assert!(z < 4.5, "variable {k}: max z {z}");
    }
}

#[test]
fn combined_system_is_orthonormal_in_expectation() {
    let ms = vec![Measure1D::uniform(0.0, 1.0).unwrap(), Measure1D::truncated_gaussian(0.0, 1.0, -3.0, 3.0).unwrap()];
    let pm = ProductMeasure::new(ms.clone()).unwrap();
    let basis = chaos(ms, WeightSetting::Wlin, 3);
    let x = pm.sample(50_000, 4).unwrap();
    let data = DesignData::new(x.clone(), Array1::zeros(x.nrows()), Some(Array2::zeros(x.dim()))).unwrap();
    let (a, _, _) = combined_system(&basis, &data).unwrap();
    let g = a.t().dot(&a) / x.nrows() as f64;
    for i in 0..g.nrows() {
        for j in 0..g.ncols() {
            let target = if i == j { 1.0 } else { 0.0 };
            assert!((g[[i, j]] - target).abs() < 0.05, "({i},{j}) {}", g[[i, j]]);
        }
    }
}

#[test]
fn derivative_basis_captures_smooth_gradients() {
    let m = Measure1D::uniform(0.0, 1.0).unwrap();
    let basis = build_basis(&m, &constant_weight(1.0).unwrap(), 25, 2000).unwrap();
    // degree-6 g with g'(0) = g'(1) = 0; only g' matters
    let dg = |x: f64| x * (1.0 - x) * (x.powi(3) + 1.0);
    let breaks: Vec<f64> = basis.mesh_nodes().to_vec();
    let total = integrate_with_breaks(|x| dg(x).powi(2) * m.pdf(x), &breaks);
    let mut captured = 0.0;
    for j in 1..=25 {
        let ip = integrate_with_breaks(|x| dg(x) * basis.eval_deriv(j, x).unwrap() * m.pdf(x), &breaks);
        captured += ip * ip / basis.eigenvalues()[j];
    }
    assert!(captured / total >= 0.999, "captured {}", captured / total);
}

#[test]
fn type_invariants_for_all_families_and_weights() {
    for m in measures() {
        for setting in [WeightSetting::Constant, WeightSetting::Wlin] {
            let w = setting.build(&m).unwrap();
            let basis = build_basis(&m, &w, 6, 1000).unwrap();
            let lam = basis.eigenvalues();
            assert_eq!(lam[0], 0.0);
            assert!(lam.windows(2).all(|p| p[1] > p[0]), "{m:?} {setting:?}");
            for j in 1..=6 {
                assert_eq!(basis.sign_changes(j), j, "{m:?} {setting:?} mode {j}");
                assert!(basis.eval(j, m.upper()).unwrap() > 0.0 || basis.eval_deriv(j, m.upper()).unwrap() > 0.0);
            }
            let g = basis.gram();
            for i in 0..g.len() {
                for j in 0..g.len() {
                    let t = if i == j { 1.0 } else { 0.0 };
                    assert!((g[i][j] - t).abs() < 1e-6);
                }
            }
        }
    }
}

#[test]
fn recovery_from_noiseless_weighted_data() {
    let ms = vec![Measure1D::triangular(0.0, 0.5, 1.0).unwrap(); 3];
    let pm = ProductMeasure::new(ms.clone()).unwrap();
    let basis = chaos(ms, WeightSetting::Wlin, 4);
    let mut c = vec![0.0; basis.len()];
    for (j, v) in [(0, 2.0), (1, 1.0), (5, -0.5), (12, 0.25), (30, 0.1)] {
        c[j] = v;
    }
    let truth = ChaosExpansion::new(basis.clone(), c.clone()).unwrap();
    let x = pm.sample(80, 5).unwrap();
    let data = DesignData::new(x.clone(), truth.predict(x.view()).unwrap(), Some(truth.predict_grad(x.view()).unwrap()))
        .unwrap();
    for method in Method::ALL {
        let f = fit(method, &basis, &data).unwrap();
        for (a, b) in f.coefficients.iter().zip(&c) {
            assert!((a - b).abs() < 1e-8, "{method}: {a} vs {b}");
        }
    }
}
