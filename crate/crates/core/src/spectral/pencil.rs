//! Smallest eigenpairs of a symmetric tridiagonal pencil `S v = λ M v`
//! with `M` positive definite.
//!
//! Eigenvalues come from bisection on the Sylvester inertia of `S - σ M`
//! (an `LDLᵀ` sweep counts the eigenvalues below `σ`); eigenvectors from
//! inverse iteration with a pivoted tridiagonal solve.

use crate::error::{Error, Result};

/// Symmetric tridiagonal matrix stored as diagonal + first off-diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct SymTridiag {
    pub diag: Vec<f64>,
    pub off: Vec<f64>,
}

impl SymTridiag {
    pub fn zeros(n: usize) -> Self {
        Self { diag: vec![0.0; n], off: vec![0.0; n.saturating_sub(1)] }
    }

    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let n = self.dim();
        let mut y = vec![0.0; n];
        for i in 0..n {
            let mut v = self.diag[i] * x[i];
            if i > 0 {
                v += self.off[i - 1] * x[i - 1];
            }
            if i + 1 < n {
                v += self.off[i] * x[i + 1];
            }
            y[i] = v;
        }
        y
    }

    pub fn quad_form(&self, x: &[f64], y: &[f64]) -> f64 {
        self.mul_vec(y).iter().zip(x).map(|(a, b)| a * b).sum()
    }

    /// Pivots of the `LDLᵀ` factorization; `None` if a pivot is not positive.
    pub fn positive_pivots(&self) -> std::result::Result<(), usize> {
        let mut d = self.diag[0];
        if !(d > 0.0) {
            return Err(0);
        }
        for i in 1..self.dim() {
            d = self.diag[i] - self.off[i - 1] * self.off[i - 1] / d;
            if !(d > 0.0) {
                return Err(i);
            }
        }
        Ok(())
    }
}

/// Number of eigenvalues of the pencil strictly below `sigma`.
pub fn count_below(s: &SymTridiag, m: &SymTridiag, sigma: f64) -> usize {
    let n = s.dim();
    let mut count = 0;
    let mut d = s.diag[0] - sigma * m.diag[0];
    let tiny = f64::MIN_POSITIVE.sqrt();
    for i in 0..n {
        if i > 0 {
            let o = s.off[i - 1] - sigma * m.off[i - 1];
            d = s.diag[i] - sigma * m.diag[i] - o * o / d;
        }
        if d == 0.0 {
            d = -tiny;
        }
        if d < 0.0 {
            count += 1;
        }
    }
    count
}

/// Solves `T x = r` for tridiagonal `T` (sub, diag, super) by LU with
/// partial pivoting. Exactly singular pivots are replaced by `eps·‖T‖`,
/// which is what inverse iteration needs.
fn solve_pivoted(sub: &[f64], diag: &[f64], sup: &[f64], rhs: &[f64]) -> Vec<f64> {
    let n = diag.len();
    let scale = diag.iter().chain(sub).chain(sup).fold(0.0f64, |a, v| a.max(v.abs()));
    let guard = f64::EPSILON * scale.max(f64::MIN_POSITIVE);
    let mut dl = sub.to_vec();
    let mut d = diag.to_vec();
    let mut du = sup.to_vec();
    let mut du2 = vec![0.0; n.saturating_sub(2)];
    let mut swapped = vec![false; n.saturating_sub(1)];
    for i in 0..n.saturating_sub(1) {
        if d[i].abs() >= dl[i].abs() {
            if d[i] == 0.0 {
                d[i] = guard;
            }
            let f = dl[i] / d[i];
            dl[i] = f;
            d[i + 1] -= f * du[i];
        } else {
            let f = d[i] / dl[i];
            d[i] = dl[i];
            dl[i] = f;
            let t = du[i];
            du[i] = d[i + 1];
            d[i + 1] = t - f * d[i + 1];
            if i + 2 < n {
                du2[i] = du[i + 1];
                du[i + 1] = -f * du[i + 1];
            }
            swapped[i] = true;
        }
    }
    if d[n - 1] == 0.0 {
        d[n - 1] = guard;
    }
    let mut b = rhs.to_vec();
    for i in 0..n.saturating_sub(1) {
        if swapped[i] {
            let t = b[i];
            b[i] = b[i + 1];
            b[i + 1] = t - dl[i] * b[i];
        } else {
            b[i + 1] -= dl[i] * b[i];
        }
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let mut v = b[i];
        if i + 1 < n {
            v -= du[i] * x[i + 1];
        }
        if i + 2 < n {
            v -= du2[i] * x[i + 2];
        }
        x[i] = v / d[i];
    }
    x
}

fn m_dot(m: &SymTridiag, x: &[f64], y: &[f64]) -> f64 {
    m.quad_form(x, y)
}

/// Bracket `[lo, hi]` around eigenvalue `j` (0-based) by bisection on the
/// inertia count.
fn bisect(s: &SymTridiag, m: &SymTridiag, j: usize, mut lo: f64, mut hi: f64) -> f64 {
    for _ in 0..300 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi || hi - lo <= 2.0 * f64::EPSILON * hi.abs().max(lo.abs()) {
            break;
        }
        if count_below(s, m, mid) > j {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

/// The `count` smallest eigenpairs in ascending order, eigenvectors
/// normalized to `vᵀ M v = 1` and mutually `M`-orthogonal.
///
/// `S` is expected to be a Neumann stiffness matrix (constants in its
/// kernel); eigenvalues are still located by bisection from zero.
pub fn smallest_eigenpairs(
    s: &SymTridiag,
    m: &SymTridiag,
    count: usize,
) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    let n = s.dim();
    if count == 0 || count > n {
        return Err(Error::InvalidParams(format!("cannot extract {count} eigenpairs of a {n}x{n} pencil")));
    }
    if let Err(i) = m.positive_pivots() {
        return Err(Error::NotConverged(format!("mass matrix pivot {i} is not positive")));
    }
    // upper bracket for eigenvalue count-1
    let mut hi = s.diag.iter().zip(&m.diag).map(|(a, b)| a / b).fold(0.0f64, f64::max).max(1e-300);
    let mut guard = 0;
    while count_below(s, m, hi) < count {
        hi *= 4.0;
        guard += 1;
        if guard > 2000 || !hi.is_finite() {
            return Err(Error::NotConverged("no upper bound for the requested eigenvalues".into()));
        }
    }
    let scale = hi;
    let lo0 = -scale;
    let mut values = Vec::with_capacity(count);
    let mut lo = lo0;
    for j in 0..count {
        let v = bisect(s, m, j, lo, hi);
        values.push(v);
        lo = v.min(hi);
    }

    let mut vectors: Vec<Vec<f64>> = Vec::with_capacity(count);
    let sub_s = &s.off;
    for (j, &lambda) in values.iter().enumerate() {
        let diag: Vec<f64> = (0..n).map(|i| s.diag[i] - lambda * m.diag[i]).collect();
        let off: Vec<f64> = (0..n - 1).map(|i| sub_s[i] - lambda * m.off[i]).collect();
        // deterministic start with components along every mode
        let mut v: Vec<f64> = (0..n).map(|i| 1.0 + 0.5 * ((i as f64) * 0.618_034 + j as f64).sin()).collect();
        for _ in 0..4 {
            let rhs = m.mul_vec(&v);
            v = solve_pivoted(&off, &diag, &off, &rhs);
            for u in &vectors {
                let c = m_dot(m, u, &v);
                v.iter_mut().zip(u).for_each(|(a, b)| *a -= c * b);
            }
            let nrm = m_dot(m, &v, &v).sqrt();
            if !(nrm > 0.0) || !nrm.is_finite() {
                return Err(Error::NotConverged(format!("inverse iteration broke down for mode {j}")));
            }
            v.iter_mut().for_each(|a| *a /= nrm);
        }
        // residual check relative to the stiffness scale
        let sv = s.mul_vec(&v);
        let mv = m.mul_vec(&v);
        let res = sv.iter().zip(&mv).map(|(a, b)| (a - lambda * b).powi(2)).sum::<f64>().sqrt();
        let vnorm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        let snorm = s.diag.iter().fold(0.0f64, |a, b| a.max(b.abs()));
        let mnorm = m.diag.iter().fold(0.0f64, |a, b| a.max(b.abs()));
        let ref_scale = (snorm + lambda.abs() * mnorm) * vnorm;
        if !(res <= 1e-8 * ref_scale) {
            return Err(Error::NotConverged(format!("mode {j}: residual {res:e}")));
        }
        vectors.push(v);
    }
    Ok((values, vectors))
}
