//! Hybrid LARS-OLS: least-angle regression proposes a nested sequence of
//! active sets, each set is refit by ordinary least squares and scored by
//! its exact leave-one-out error.

use ndarray::{Array1, ArrayView1, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default cap on the number of LARS steps.
pub const DEFAULT_MAX_TERMS: usize = 200;

/// Relative norm below which an entering column is treated as linearly
/// dependent on the active set.
const RANK_TOL: f64 = 1e-10;
/// Candidates with a leverage this close to one have no usable LOO error.
const LEVERAGE_TOL: f64 = 1e-10;
/// Relative OLS residual at which the path stops (perfect fit).
const EXACT_FIT_TOL: f64 = 1e-13;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LarsDiagnostics {
    /// Number of LARS steps taken.
    pub path_length: usize,
    /// Columns dropped because they were numerically dependent on the
    /// active set when they tried to enter.
    pub rank_deficient: Vec<usize>,
    /// Candidate sizes skipped because some leverage was ~1.
    pub skipped_candidates: Vec<usize>,
    /// LOO error of every scored candidate, indexed by active-set size.
    pub loo_path: Vec<(usize, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LarsFit {
    /// Length `P`; zero outside `active_set`.
    pub coefficients: Vec<f64>,
    /// Selected columns in order of entry.
    pub active_set: Vec<usize>,
    pub loo_error: f64,
    pub diagnostics: LarsDiagnostics,
}

/// Incrementally grown thin QR of the active columns.
struct Qr {
    q: Vec<Array1<f64>>,
    r: Vec<Vec<f64>>, // column-wise: r[j] has j+1 entries
}

impl Qr {
    fn new() -> Self {
        Self { q: Vec::new(), r: Vec::new() }
    }

    fn len(&self) -> usize {
        self.q.len()
    }

    /// Modified Gram–Schmidt with one reorthogonalization pass. Returns
    /// false (and leaves the factorization unchanged) if the column is
    /// dependent.
    fn push(&mut self, col: ArrayView1<f64>) -> bool {
        let norm0 = col.dot(&col).sqrt();
        if norm0 == 0.0 {
            return false;
        }
        let mut v = col.to_owned();
        let mut rcol = vec![0.0; self.q.len() + 1];
        for _ in 0..2 {
            for (i, q) in self.q.iter().enumerate() {
                let c = q.dot(&v);
                v.scaled_add(-c, q);
                rcol[i] += c;
            }
        }
        let nv = v.dot(&v).sqrt();
        if nv < RANK_TOL * norm0 {
            return false;
        }
        v /= nv;
        rcol[self.q.len()] = nv;
        self.q.push(v);
        self.r.push(rcol);
        true
    }

    /// Solves `R x = y`.
    fn back_solve(&self, y: &[f64]) -> Vec<f64> {
        let k = self.len();
        let mut x = y.to_vec();
        for i in (0..k).rev() {
            let mut s = x[i];
            for j in i + 1..k {
                s -= self.r[j][i] * x[j];
            }
            x[i] = s / self.r[i][i];
        }
        x
    }

    /// Solves `Rᵀ z = s`.
    fn forward_solve_t(&self, s: &[f64]) -> Vec<f64> {
        let k = self.len();
        let mut z = vec![0.0; k];
        for i in 0..k {
            let mut acc = s[i];
            for (j, zj) in z.iter().enumerate().take(i) {
                acc -= self.r[i][j] * zj;
            }
            z[i] = acc / self.r[i][i];
        }
        z
    }
}

/// Exact LOO error of the OLS fit on the current QR, or `None` if some
/// leverage is numerically one. Also returns the OLS coefficients (in
/// active order) and the residual norm.
fn score(qr: &Qr, b: ArrayView1<f64>) -> (Option<f64>, Vec<f64>, f64) {
    let m = b.len();
    let qtb: Vec<f64> = qr.q.iter().map(|q| q.dot(&b)).collect();
    let mut resid = b.to_owned();
    let mut lev = Array1::<f64>::zeros(m);
    for (q, &c) in qr.q.iter().zip(&qtb) {
        resid.scaled_add(-c, q);
        lev.zip_mut_with(q, |h, &qi| *h += qi * qi);
    }
    let coef = qr.back_solve(&qtb);
    let rnorm = resid.dot(&resid).sqrt();
    let mut acc = 0.0;
    for i in 0..m {
        let denom = 1.0 - lev[i];
        if denom < LEVERAGE_TOL {
            return (None, coef, rnorm);
        }
        acc += (resid[i] / denom).powi(2);
    }
    (Some(acc / m as f64), coef, rnorm)
}

/// Least-angle regression on `a` (columns used as given) with hybrid OLS
/// refits and LOO model selection. The empty model is always a candidate.
pub fn lars_loo(a: ArrayView2<f64>, b: ArrayView1<f64>, max_terms: usize) -> Result<LarsFit> {
    let (m, p) = a.dim();
    if m < 2 {
        return Err(Error::Degenerate(format!("{m} rows; need at least 2")));
    }
    if b.len() != m {
        return Err(Error::Shape(format!("{m} rows but {} targets", b.len())));
    }
    if a.iter().chain(b.iter()).any(|v| !v.is_finite()) {
        return Err(Error::Degenerate("non-finite entries in the regression system".into()));
    }
    let cap = (m - 1).min(p).min(max_terms);
    let bnorm = b.dot(&b).sqrt();
    let mut diag = LarsDiagnostics::default();

    let empty_loo = b.dot(&b) / m as f64;
    diag.loo_path.push((0, empty_loo));
    let mut best: (f64, Vec<usize>, Vec<f64>) = (empty_loo, Vec::new(), Vec::new());
    if bnorm == 0.0 || cap == 0 {
        return Ok(finish(p, best, diag));
    }

    let mut usable = vec![true; p];
    for j in 0..p {
        if a.column(j).iter().all(|&v| v == 0.0) {
            usable[j] = false;
        }
    }
    let mut active: Vec<usize> = Vec::new();
    let mut in_active = vec![false; p];
    let mut qr = Qr::new();
    let mut resid = b.to_owned();
    let corr_scale = a.axis_iter(Axis(1)).map(|c| c.dot(&c).sqrt()).fold(0.0f64, f64::max) * bnorm;

    let mut corr = a.t().dot(&resid);
    let mut entering = argmax_abs(&corr, &usable, &in_active);

    while active.len() < cap {
        let Some(j_new) = entering else { break };
        if !qr.push(a.column(j_new)) {
            usable[j_new] = false;
            diag.rank_deficient.push(j_new);
            entering = argmax_abs(&corr, &usable, &in_active);
            continue;
        }
        active.push(j_new);
        in_active[j_new] = true;
        diag.path_length += 1;

        let (loo, coef, rnorm) = score(&qr, b);
        match loo {
            Some(e) => {
                diag.loo_path.push((active.len(), e));
                if e < best.0 {
                    best = (e, active.clone(), coef);
                }
            }
            None => diag.skipped_candidates.push(active.len()),
        }
        if rnorm <= EXACT_FIT_TOL * bnorm || active.len() >= cap {
            break;
        }

        // Equiangular direction: u = Q z / ‖z‖ with Rᵀ z = s.
        let c_max = active.iter().map(|&j| corr[j].abs()).fold(0.0f64, f64::max);
        if c_max <= 1e-14 * corr_scale {
            break;
        }
        let s: Vec<f64> = active.iter().map(|&j| corr[j].signum()).collect();
        let z = qr.forward_solve_t(&s);
        let zn = z.iter().map(|v| v * v).sum::<f64>().sqrt();
        let a_eq = 1.0 / zn;
        let mut u = Array1::<f64>::zeros(m);
        for (q, &zi) in qr.q.iter().zip(&z) {
            u.scaled_add(zi / zn, q);
        }
        let au = a.t().dot(&u);

        let mut gamma = c_max / a_eq;
        let mut next = None;
        for j in 0..p {
            if in_active[j] || !usable[j] {
                continue;
            }
            for g in [(c_max - corr[j]) / (a_eq - au[j]), (c_max + corr[j]) / (a_eq + au[j])] {
                if g.is_finite() && g > 1e-12 * (c_max / a_eq) && g < gamma {
                    gamma = g;
                    next = Some(j);
                }
            }
        }
        resid.scaled_add(-gamma, &u);
        corr = a.t().dot(&resid);
        entering = next;
    }
    Ok(finish(p, best, diag))
}

fn argmax_abs(corr: &Array1<f64>, usable: &[bool], in_active: &[bool]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (j, &c) in corr.iter().enumerate() {
        if !usable[j] || in_active[j] {
            continue;
        }
        if best.map_or(true, |(_, v)| c.abs() > v) {
            best = Some((j, c.abs()));
        }
    }
    best.filter(|&(_, v)| v > 0.0).map(|(j, _)| j)
}

fn finish(p: usize, best: (f64, Vec<usize>, Vec<f64>), diagnostics: LarsDiagnostics) -> LarsFit {
    let (loo_error, active_set, coef) = best;
    let mut coefficients = vec![0.0; p];
    for (&j, &c) in active_set.iter().zip(&coef) {
        coefficients[j] = c;
    }
    LarsFit { coefficients, active_set, loo_error, diagnostics }
}
