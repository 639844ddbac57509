//! Finite-element construction of the univariate Poincaré basis: the
//! eigenfunctions of `⟨f', g'⟩_w = λ ⟨f, g⟩` in `L²(μ)`, with the natural
//! (Neumann) boundary conditions of the weak form.
//!
//! P1 hat functions give tridiagonal stiffness `∫ wρ φ_i' φ_j'` and mass
//! `∫ ρ φ_i φ_j`. Nodal eigenvectors are wrapped in natural cubic splines,
//! re-orthonormalized in `L²(μ)` and sign-normalized so that
//! `ψ_j(b) > 0` (or `ψ_j'(b⁻) > 0` when `ψ_j(b)` vanishes).

mod pencil;

use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

pub use pencil::{count_below, smallest_eigenpairs, SymTridiag};

use crate::error::{Error, Result};
use crate::interp::{locate, NaturalSpline};
use crate::measures::Measure1D;
use crate::quadrature::gauss_legendre_rule;
use crate::weights::{check_existence, ExistenceReport, Weight1D};

pub const DEFAULT_MESH_SIZE: usize = 2000;
pub const MIN_MESH_SIZE: usize = 50;

const GRADING_RATIO: f64 = 0.7;
const GRADED_ELEMENTS: usize = 20;
const ZONE_FRACTION: f64 = 0.05;

/// Strictly increasing finite-element nodes spanning `[a, b]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Mesh1D {
    nodes: Vec<f64>,
}

impl Mesh1D {
    pub fn uniform(a: f64, b: f64, n: usize) -> Result<Self> {
        if n < MIN_MESH_SIZE {
            return Err(Error::InvalidParams(format!("mesh needs at least {MIN_MESH_SIZE} elements, got {n}")));
        }
        let h = (b - a) / n as f64;
        let mut nodes: Vec<f64> = (0..=n).map(|i| a + h * i as f64).collect();
        nodes[n] = b;
        Ok(Self { nodes })
    }

    pub fn from_nodes(nodes: Vec<f64>) -> Result<Self> {
        if nodes.len() < MIN_MESH_SIZE + 1 {
            return Err(Error::InvalidParams(format!("mesh needs at least {MIN_MESH_SIZE} elements")));
        }
        if nodes.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidParams("mesh nodes must be strictly increasing".into()));
        }
        Ok(Self { nodes })
    }

    /// Uniform mesh of `n` elements, geometrically graded towards every
    /// endpoint where `w ρ` vanishes, with the density's interior
    /// breakpoints snapped onto nodes.
    pub fn for_problem(measure: &Measure1D, weight: &Weight1D, n: usize) -> Result<Self> {
        let (a, b) = (measure.lower(), measure.upper());
        let mut mesh = Self::uniform(a, b, n)?;
        let h = (b - a) / n as f64;
        let p = |x: f64| weight.density_product(measure, x);
        let p_scale = (1..16).map(|i| p(a + (b - a) * i as f64 / 16.0)).fold(0.0, f64::max);
        let vanishes = |x: f64| p(x) <= 1e-10 * p_scale;
        let zone = ((ZONE_FRACTION * n as f64).ceil() as usize).max(GRADED_ELEMENTS / 4);
        if vanishes(a) {
            mesh.grade_left(zone, h);
        }
        if vanishes(b) {
            mesh.mirror();
            mesh.grade_left(zone, h);
            mesh.mirror();
        }
        for br in measure.breakpoints() {
            if br > a && br < b {
                mesh.snap(br);
            }
        }
        Ok(mesh)
    }

    // Replace the first `zone` elements by GRADED_ELEMENTS geometric ones
    // (ratio 0.7 towards the endpoint) followed by near-uniform elements.
    fn grade_left(&mut self, zone: usize, h: f64) {
        let a = self.nodes[0];
        let zone_end = self.nodes[zone];
        let mut fine = vec![a];
        let mut sizes: Vec<f64> = (1..=GRADED_ELEMENTS).rev().map(|k| h * GRADING_RATIO.powi(k as i32)).collect();
        let graded: f64 = sizes.iter().sum();
        let rest = zone_end - a - graded;
        let m = (rest / h).round().max(1.0) as usize;
        sizes.extend(std::iter::repeat(rest / m as f64).take(m));
        let mut x = a;
        for s in &sizes[..sizes.len() - 1] {
            x += s;
            fine.push(x);
        }
        let mut nodes = fine;
        nodes.extend_from_slice(&self.nodes[zone..]);
        self.nodes = nodes;
    }

    fn mirror(&mut self) {
        let (a, b) = (self.nodes[0], self.nodes[self.nodes.len() - 1]);
        self.nodes = self.nodes.iter().rev().map(|x| a + b - x).collect();
        let last = self.nodes.len() - 1;
        self.nodes[0] = a;
        self.nodes[last] = b;
    }

    fn snap(&mut self, x: f64) {
        let i = locate(&self.nodes, x);
        let j = if (x - self.nodes[i]).abs() <= (self.nodes[i + 1] - x).abs() { i } else { i + 1 };
        if j > 0 && j < self.nodes.len() - 1 {
            self.nodes[j] = x;
        }
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn elements(&self) -> usize {
        self.nodes.len() - 1
    }
}

/// Tuning knobs for [`build_basis_with`].
#[derive(Debug, Clone)]
pub struct BasisOptions {
    /// Probe the existence conditions and attach the report.
    pub check_existence: bool,
    /// Explicit mesh; overrides the mesh size argument.
    pub mesh: Option<Mesh1D>,
}

impl Default for BasisOptions {
    fn default() -> Self {
        Self { check_existence: true, mesh: None }
    }
}

/// Univariate Poincaré basis `ψ_0 ≡ 1, ψ_1, …, ψ_K` with eigenvalues.
#[derive(Debug, Clone)]
pub struct PoincareBasis1D {
    measure: Measure1D,
    weight: Weight1D,
    eigenvalues: Vec<f64>,
    modes: Vec<NaturalSpline>,
    existence: Option<ExistenceReport>,
}

/// Assembles the P1 stiffness and mass matrices.
pub fn assemble(measure: &Measure1D, weight: &Weight1D, mesh: &Mesh1D) -> (SymTridiag, SymTridiag) {
    let nodes = mesh.nodes();
    let n = nodes.len();
    let (gx, gw) = gauss_legendre_rule();
    let mut s = SymTridiag::zeros(n);
    let mut m = SymTridiag::zeros(n);
    for e in 0..n - 1 {
        let (x0, x1) = (nodes[e], nodes[e + 1]);
        let h = x1 - x0;
        let (mut p_int, mut m00, mut m01, mut m11) = (0.0, 0.0, 0.0, 0.0);
        for (t, w) in gx.iter().zip(gw) {
            let u = 0.5 * (1.0 + t);
            let x = x0 + h * u;
            let wt = 0.5 * h * w;
            let rho = measure.pdf(x);
            p_int += wt * weight.eval(x) * rho;
            let (l, r) = (1.0 - u, u);
            m00 += wt * rho * l * l;
            m01 += wt * rho * l * r;
            m11 += wt * rho * r * r;
        }
        let k = p_int / (h * h);
        s.diag[e] += k;
        s.diag[e + 1] += k;
        s.off[e] -= k;
        m.diag[e] += m00;
        m.diag[e + 1] += m11;
        m.off[e] += m01;
    }
    (s, m)
}

/// Builds the basis with `n_modes` nontrivial modes on a mesh of
/// `mesh_size` elements.
pub fn build_basis(measure: &Measure1D, weight: &Weight1D, n_modes: usize, mesh_size: usize) -> Result<PoincareBasis1D> {
    build_basis_with(measure, weight, n_modes, mesh_size, &BasisOptions::default())
}

pub fn build_basis_with(
    measure: &Measure1D,
    weight: &Weight1D,
    n_modes: usize,
    mesh_size: usize,
    options: &BasisOptions,
) -> Result<PoincareBasis1D> {
    if n_modes < 1 {
        return Err(Error::InvalidParams("at least one nontrivial mode is required".into()));
    }
    let mesh = match &options.mesh {
        Some(mesh) => mesh.clone(),
        None => {
            let needed = MIN_MESH_SIZE.max(20 * n_modes);
            if mesh_size < needed {
                return Err(Error::InvalidParams(format!(
                    "{n_modes} modes need a mesh of at least {needed} elements, got {mesh_size}"
                )));
            }
            Mesh1D::for_problem(measure, weight, mesh_size)?
        }
    };
    let (s, m) = assemble(measure, weight, &mesh);
    if let Err(i) = m.positive_pivots() {
        return Err(Error::MassNotSpd(mesh.nodes()[i]));
    }
    let (mut eigenvalues, vectors) = smallest_eigenpairs(&s, &m, n_modes + 1)?;
    // S annihilates constants exactly, so the first pair is known in closed form
    eigenvalues[0] = 0.0;

    let knots = Arc::new(mesh.nodes().to_vec());
    let mut nodal: Vec<Vec<f64>> = vectors;
    nodal[0] = vec![1.0; knots.len()];
    let ones = vec![1.0; knots.len()];
    for v in nodal.iter_mut().skip(1) {
        let c = m.quad_form(&ones, v);
        v.iter_mut().for_each(|a| *a -= c);
    }
    let nodal = orthonormalize_in_spline_space(measure, &knots, nodal);
    let mut modes: Vec<NaturalSpline> = nodal.into_iter().map(|v| NaturalSpline::new(knots.clone(), v)).collect();
    for spline in modes.iter_mut().skip(1) {
        apply_sign_convention(spline);
    }
    if eigenvalues.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::NotConverged("eigenvalues are not strictly increasing".into()));
    }
    let existence = options.check_existence.then(|| check_existence(measure, weight));
    Ok(PoincareBasis1D { measure: measure.clone(), weight: weight.clone(), eigenvalues, modes, existence })
}

/// Gram–Schmidt of the spline interpolants in `L²(μ)`, in mode order, so
/// that `ψ_0 ≡ 1` is untouched and the splines (not just the P1
/// interpolants) are orthonormal.
fn orthonormalize_in_spline_space(measure: &Measure1D, knots: &Arc<Vec<f64>>, mut nodal: Vec<Vec<f64>>) -> Vec<Vec<f64>> {
    // two passes: the second removes what roundoff left of the first
    for _ in 0..2 {
        let splines: Vec<NaturalSpline> = nodal.iter().map(|v| NaturalSpline::new(knots.clone(), v.clone())).collect();
        let gram = l2_gram(&splines, |s, i, x| s.eval_in(i, x).0, |x| measure.pdf(x));
        let k = gram.len();
        // Cholesky G = L Lᵀ, new = L⁻¹ old
        let mut l = vec![vec![0.0; k]; k];
        for i in 0..k {
            for j in 0..=i {
                let mut v = gram[i][j];
                for r in 0..j {
                    v -= l[i][r] * l[j][r];
                }
                if i == j {
                    l[i][i] = v.max(f64::MIN_POSITIVE).sqrt();
                } else {
                    l[i][j] = v / l[j][j];
                }
            }
        }
        let old = nodal.clone();
        for i in 0..k {
            let mut v = old[i].clone();
            for j in 0..i {
                let c = l[i][j];
                v.iter_mut().zip(&nodal[j]).for_each(|(a, b)| *a -= c * b);
            }
            v.iter_mut().for_each(|a| *a /= l[i][i]);
            nodal[i] = v;
        }
    }
    nodal
}

/// Element-wise Gauss–Legendre Gram matrix `∫ f_i f_j g` over the knots.
fn l2_gram<E, G>(splines: &[NaturalSpline], eval: E, g: G) -> Vec<Vec<f64>>
where
    E: Fn(&NaturalSpline, usize, f64) -> f64,
    G: Fn(f64) -> f64,
{
    let k = splines.len();
    let knots = splines[0].knots();
    let (gx, gw) = gauss_legendre_rule();
    let mut gram = vec![vec![0.0; k]; k];
    let mut vals = vec![0.0; k];
    for e in 0..knots.len() - 1 {
        let (x0, x1) = (knots[e], knots[e + 1]);
        let h = x1 - x0;
        for (t, w) in gx.iter().zip(gw) {
            let x = x0 + 0.5 * h * (1.0 + t);
            let wt = 0.5 * h * w * g(x);
            if wt == 0.0 {
                continue;
            }
            for (v, s) in vals.iter_mut().zip(splines) {
                *v = eval(s, e, x);
            }
            for i in 0..k {
                for j in 0..=i {
                    gram[i][j] += wt * vals[i] * vals[j];
                }
            }
        }
    }
    for i in 0..k {
        for j in i + 1..k {
            gram[i][j] = gram[j][i];
        }
    }
    gram
}

fn apply_sign_convention(spline: &mut NaturalSpline) {
    let vals = spline.values();
    let n = vals.len();
    let sup = vals.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let end = vals[n - 1];
    let flip = if end.abs() >= 1e-8 * sup {
        end < 0.0
    } else {
        let knots = spline.knots();
        let (_, d) = spline.eval_in(n - 2, knots[n - 1]);
        d < 0.0
    };
    if flip {
        let neg: Vec<f64> = vals.iter().map(|v| -v).collect();
        *spline = NaturalSpline::new(Arc::new(spline.knots().to_vec()), neg);
    }
}

impl PoincareBasis1D {
    pub fn measure(&self) -> &Measure1D {
        &self.measure
    }

    pub fn weight(&self) -> &Weight1D {
        &self.weight
    }

    /// `λ_0 = 0 < λ_1 < … < λ_K`.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// Number of nontrivial modes `K`.
    pub fn n_modes(&self) -> usize {
        self.eigenvalues.len() - 1
    }

    pub fn existence(&self) -> Option<&ExistenceReport> {
        self.existence.as_ref()
    }

    /// True when the existence probe could not confirm either condition.
    pub fn existence_warning(&self) -> bool {
        self.existence.as_ref().is_some_and(|r| !r.is_conclusive())
    }

    pub fn mesh_nodes(&self) -> &[f64] {
        self.modes[0].knots()
    }

    /// `C_P = 1/λ_1`.
    pub fn poincare_constant(&self) -> f64 {
        1.0 / self.eigenvalues[1]
    }

    #[inline]
    fn locate_checked(&self, x: f64) -> Result<(usize, f64)> {
        let (a, b) = (self.measure.lower(), self.measure.upper());
        let slack = 1e-12 * (b - a).max(a.abs()).max(b.abs());
        if !(x >= a - slack && x <= b + slack) {
            return Err(Error::OutOfSupport { x, a, b });
        }
        let x = x.clamp(a, b);
        Ok((locate(self.mesh_nodes(), x), x))
    }

    fn check_mode(&self, j: usize) -> Result<()> {
        if j > self.n_modes() {
            return Err(Error::InvalidParams(format!("mode {j} exceeds the {} available", self.n_modes())));
        }
        Ok(())
    }

    /// `ψ_j(x)`.
    pub fn eval(&self, j: usize, x: f64) -> Result<f64> {
        self.check_mode(j)?;
        let (i, x) = self.locate_checked(x)?;
        Ok(self.modes[j].eval_in(i, x).0)
    }

    /// `ψ_j'(x)`.
    pub fn eval_deriv(&self, j: usize, x: f64) -> Result<f64> {
        self.check_mode(j)?;
        let (i, x) = self.locate_checked(x)?;
        Ok(self.modes[j].eval_in(i, x).1)
    }

    pub fn eval_many(&self, j: usize, xs: &[f64]) -> Result<Vec<f64>> {
        xs.iter().map(|&x| self.eval(j, x)).collect()
    }

    pub fn eval_deriv_many(&self, j: usize, xs: &[f64]) -> Result<Vec<f64>> {
        xs.iter().map(|&x| self.eval_deriv(j, x)).collect()
    }

    /// Values and derivatives of modes `0..=upto` at `x`.
    pub fn eval_all(&self, x: f64, upto: usize, values: &mut [f64], derivs: &mut [f64]) -> Result<()> {
        self.check_mode(upto)?;
        let (i, x) = self.locate_checked(x)?;
        for j in 0..=upto {
            let (v, d) = self.modes[j].eval_in(i, x);
            values[j] = v;
            derivs[j] = d;
        }
        Ok(())
    }

    /// `∫ f_i f_j dμ` over the modes, by element-wise quadrature.
    pub fn gram(&self) -> Vec<Vec<f64>> {
        l2_gram(&self.modes, |s, i, x| s.eval_in(i, x).0, |x| self.measure.pdf(x))
    }

    /// `∫ w f_i' f_j' dμ` over the modes.
    pub fn derivative_gram(&self) -> Vec<Vec<f64>> {
        l2_gram(&self.modes, |s, i, x| s.eval_in(i, x).1, |x| self.weight.density_product(&self.measure, x))
    }

    /// Number of sign changes of the nodal values of mode `j`.
    pub fn sign_changes(&self, j: usize) -> usize {
        let v = self.modes[j].values();
        let sup = v.iter().fold(0.0f64, |a, b| a.max(b.abs()));
        let mut last = 0.0;
        let mut changes = 0;
        for &x in v {
            if x.abs() <= 1e-12 * sup {
                continue;
            }
            if last != 0.0 && (x > 0.0) != (last > 0.0) {
                changes += 1;
            }
            last = x;
        }
        changes
    }

    /// CSV with columns `x, psi_j…, dpsi_j…` at the mesh nodes, for
    /// `j` in `first..=K`.
    pub fn write_csv(&self, path: &Path, include_constant: bool) -> Result<()> {
        let first = usize::from(!include_constant);
        let k = self.n_modes();
        let mut out = csv::Writer::from_path(path)?;
        let mut header = vec!["x".to_string()];
        header.extend((first..=k).map(|j| format!("psi_{j}")));
        header.extend((first..=k).map(|j| format!("dpsi_{j}")));
        out.write_record(&header)?;
        let mut vals = vec![0.0; k + 1];
        let mut ders = vec![0.0; k + 1];
        for &x in self.mesh_nodes() {
            self.eval_all(x, k, &mut vals, &mut ders)?;
            let mut row = vec![format!("{x:.17e}")];
            row.extend(vals[first..].iter().map(|v| format!("{v:.17e}")));
            row.extend(ders[first..].iter().map(|v| format!("{v:.17e}")));
            out.write_record(&row)?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn spectrum(&self) -> Spectrum {
        Spectrum {
            eigenvalues: self.eigenvalues.clone(),
            poincare_constant: self.poincare_constant(),
            mesh_elements: self.mesh_nodes().len() - 1,
            existence: self.existence.clone(),
        }
    }
}

/// Serializable eigenvalue summary.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Spectrum {
    pub eigenvalues: Vec<f64>,
    pub poincare_constant: f64,
    pub mesh_elements: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub existence: Option<ExistenceReport>,
}

impl Spectrum {
    pub fn write_json(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::weights::{constant_weight, wlin_compute};
    use std::f64::consts::PI;

    fn grid(a: f64, b: f64, n: usize) -> Vec<f64> {
        (0..=n).map(|i| a + (b - a) * i as f64 / n as f64).collect()
    }

    fn cosine_basis(k: usize, n: usize) -> PoincareBasis1D {
        let m = Measure1D::uniform(0.0, 1.0).unwrap();
        build_basis(&m, &constant_weight(1.0).unwrap(), k, n).unwrap()
    }

    /// Orthonormal Legendre polynomials on [-1, 1] under the uniform law.
    fn legendre(j: usize, x: f64) -> (f64, f64) {
        let (mut p0, mut p1) = (1.0, x);
        let (mut d0, mut d1) = (0.0, 1.0);
        if j == 0 {
            return (1.0, 0.0);
        }
        for k in 2..=j {
            let k = k as f64;
            let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
            let d2 = ((2.0 * k - 1.0) * (p1 + x * d1) - (k - 1.0) * d0) / k;
            p0 = p1;
            p1 = p2;
            d0 = d1;
            d1 = d2;
        }
        let c = (2.0 * j as f64 + 1.0).sqrt();
        (c * p1, c * d1)
    }

    /// Orthonormal probabilists' Hermite polynomials.
    fn hermite(j: usize, x: f64) -> f64 {
        let (mut h0, mut h1) = (1.0, x);
        if j == 0 {
            return 1.0;
        }
        for k in 1..j {
            let h2 = x * h1 - k as f64 * h0;
            h0 = h1;
            h1 = h2;
        }
        let fact: f64 = (1..=j).map(|v| v as f64).product();
        h1 / fact.sqrt()
    }

    #[test]
    fn cosine_case() {
        let basis = cosine_basis(10, 2000);
        for j in 1..=10 {
            let exact = (j as f64 * PI).powi(2);
            let rel = (basis.eigenvalues()[j] - exact).abs() / exact;
            assert!(rel < 1e-3, "λ_{j} rel err {rel}");
        }
        // ψ_j(1) > 0 makes ψ_j = (-1)^j √2 cos(jπx)
        let sign = |j: usize| if j % 2 == 0 { 1.0 } else { -1.0 };
        for j in 1..=5 {
            let err = grid(0.0, 1.0, 3000)
                .into_iter()
                .map(|x| (sign(j) * basis.eval(j, x).unwrap() - 2f64.sqrt() * (j as f64 * PI * x).cos()).abs())
                .fold(0.0, f64::max);
            assert!(err <= 1e-3, "ψ_{j} sup err {err}");
        }
        assert!((sign(1) * basis.eval(1, 0.0).unwrap() - 2f64.sqrt()).abs() < 1e-3);
        assert!((sign(1) * basis.eval_deriv(1, 0.5).unwrap() + 2f64.sqrt() * PI).abs() < 1e-2);
        assert!((basis.eval(0, 0.37).unwrap() - 1.0).abs() < 1e-6);
        assert!(basis.eval_deriv(0, 0.37).unwrap().abs() < 1e-6);
        assert!((basis.poincare_constant() - 1.0 / (PI * PI)).abs() < 1e-3 / (PI * PI));
        let dg = basis.derivative_gram();
        assert!((dg[1][1] - PI * PI).abs() < 1e-3 * PI * PI);
    }

    #[test]
    fn legendre_case() {
        let m = Measure1D::uniform(-1.0, 1.0).unwrap();
        let w = wlin_compute(&m, 4000).unwrap();
        let basis = build_basis(&m, &w, 8, 2000).unwrap();
        for j in 1..=8 {
            let exact = (j * (j + 1)) as f64 / 2.0;
            let rel = (basis.eigenvalues()[j] - exact).abs() / exact;
            assert!(rel < 1e-3, "λ_{j} rel err {rel}");
            let err = grid(-1.0, 1.0, 4000)
                .into_iter()
                .map(|x| (basis.eval(j, x).unwrap() - legendre(j, x).0).abs())
                .fold(0.0, f64::max);
            assert!(err <= 1e-3, "ψ_{j} sup err {err}");
        }
        assert!((basis.eval(2, 1.0).unwrap() - 5f64.sqrt()).abs() < 1e-3);
    }

    #[test]
    fn hermite_case() {
        // the Stein kernel of the standard normal is the constant 1
        let m = Measure1D::truncated_gaussian(0.0, 1.0, -8.0, 8.0).unwrap();
        let basis = build_basis(&m, &constant_weight(1.0).unwrap(), 5, 2000).unwrap();
        for j in 1..=5 {
            assert!((basis.eigenvalues()[j] - j as f64).abs() < 1e-3 * j as f64, "λ_{j} = {}", basis.eigenvalues()[j]);
            let err = grid(-4.0, 4.0, 800)
                .into_iter()
                .map(|x| (basis.eval(j, x).unwrap() - hermite(j, x)).abs())
                .fold(0.0, f64::max);
            assert!(err < 1e-2, "ψ_{j} err {err}");
        }
    }

    #[test]
    fn weight_scaling_scales_spectrum() {
        let m = Measure1D::uniform(0.0, 1.0).unwrap();
        let b1 = build_basis(&m, &constant_weight(1.0).unwrap(), 4, 400).unwrap();
        let b2 = build_basis(&m, &constant_weight(2.0).unwrap(), 4, 400).unwrap();
        for j in 1..=4 {
            assert!((b2.eigenvalues()[j] - 2.0 * b1.eigenvalues()[j]).abs() < 1e-10 * b2.eigenvalues()[j]);
            assert!((b2.eval(j, 0.3).unwrap() - b1.eval(j, 0.3).unwrap()).abs() < 1e-10);
        }
        assert!((b2.poincare_constant() - b1.poincare_constant() / 2.0).abs() < 1e-12);
    }

    #[test]
    fn mesh_convergence_is_second_order() {
        let exact = PI * PI * 4.0;
        let e1 = (cosine_basis(2, 100).eigenvalues()[2] - exact).abs();
        let e2 = (cosine_basis(2, 200).eigenvalues()[2] - exact).abs();
        let ratio = e1 / e2;
        assert!((3.6..4.4).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn sign_convention_and_oscillation() {
        let basis = cosine_basis(6, 600);
        for j in 1..=6 {
            assert!(basis.eval(j, 1.0).unwrap() > 0.0);
            assert_eq!(basis.sign_changes(j), j);
        }
    }

    #[test]
    fn error_paths() {
        let m = Measure1D::uniform(0.0, 1.0).unwrap();
        let w = constant_weight(1.0).unwrap();
        assert!(matches!(build_basis(&m, &w, 0, 100), Err(Error::InvalidParams(_))));
        assert!(matches!(build_basis(&m, &w, 10, 100), Err(Error::InvalidParams(_))));
        let basis = build_basis(&m, &w, 2, 100).unwrap();
        assert!(matches!(basis.eval(1, 1.5), Err(Error::OutOfSupport { .. })));
        assert!(matches!(basis.eval_deriv(1, -0.1), Err(Error::OutOfSupport { .. })));
        assert!(basis.eval(3, 0.5).is_err());
    }
}
