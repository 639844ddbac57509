//! Weight functions on the support of a measure: constants, arbitrary
//! closures and the grid-backed linear-preserving weight (Stein kernel).

use std::fmt;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::interp::Pchip;
use crate::measures::Measure1D;
use crate::quadrature::{gauss_legendre_rule, gl_panel, integrate_tol};

/// Nodes whose density falls below this are not divided by.
pub const MIN_NODAL_DENSITY: f64 = 1e-13;

pub const DEFAULT_WLIN_STEPS: usize = 4000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum WeightKind {
    Constant,
    GridBacked,
    Analytic,
}

/// Weight choices exposed in experiment configs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WeightSetting {
    #[serde(alias = "unweighted")]
    Constant,
    Wlin,
}

impl WeightSetting {
    pub fn build(self, measure: &Measure1D) -> Result<Weight1D> {
        match self {
            WeightSetting::Constant => Weight1D::constant(1.0),
            WeightSetting::Wlin => wlin_compute(measure, DEFAULT_WLIN_STEPS),
        }
    }
}

#[derive(Clone)]
enum Repr {
    Constant(f64),
    Grid(Pchip),
    Analytic(Arc<dyn Fn(f64) -> f64 + Send + Sync>),
}

/// A weight `w`, positive on the open support.
#[derive(Clone)]
pub struct Weight1D {
    repr: Repr,
}

impl fmt::Debug for Weight1D {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.repr {
            Repr::Constant(c) => write!(f, "Weight1D::Constant({c})"),
            Repr::Grid(p) => write!(f, "Weight1D::Grid({} nodes)", p.nodes().len()),
            Repr::Analytic(_) => write!(f, "Weight1D::Analytic"),
        }
    }
}

/// `w ≡ c`.
pub fn constant_weight(c: f64) -> Result<Weight1D> {
    Weight1D::constant(c)
}

impl Weight1D {
    pub fn constant(c: f64) -> Result<Self> {
        if !(c > 0.0) || !c.is_finite() {
            return Err(Error::NonPositive(c));
        }
        Ok(Self { repr: Repr::Constant(c) })
    }

    /// Weight given by a closure; positivity is the caller's contract.
    pub fn from_fn(f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Self { repr: Repr::Analytic(Arc::new(f)) }
    }

    /// Monotone-cubic interpolant through `(xs, ws)`.
    pub fn from_grid(xs: Vec<f64>, ws: Vec<f64>) -> Result<Self> {
        if xs.len() != ws.len() || xs.len() < 2 {
            return Err(Error::Shape(format!("grid of {} nodes and {} values", xs.len(), ws.len())));
        }
        if xs.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidParams("grid nodes must be strictly increasing".into()));
        }
        Ok(Self { repr: Repr::Grid(Pchip::new(xs, ws)) })
    }

    pub fn kind(&self) -> WeightKind {
        match self.repr {
            Repr::Constant(_) => WeightKind::Constant,
            Repr::Grid(_) => WeightKind::GridBacked,
            Repr::Analytic(_) => WeightKind::Analytic,
        }
    }

    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        match &self.repr {
            Repr::Constant(c) => *c,
            Repr::Grid(p) => p.eval(x),
            Repr::Analytic(f) => f(x),
        }
    }

    /// `p = w ρ`, the coefficient of the Sturm–Liouville operator.
    #[inline]
    pub fn density_product(&self, measure: &Measure1D, x: f64) -> f64 {
        self.eval(x) * measure.pdf(x)
    }

    /// Grid nodes and values, for grid-backed weights.
    pub fn grid(&self) -> Option<(&[f64], &[f64])> {
        match &self.repr {
            Repr::Grid(p) => Some((p.nodes(), p.node_values())),
            _ => None,
        }
    }

    /// Same weight multiplied by `c > 0`.
    pub fn scaled(&self, c: f64) -> Result<Self> {
        if !(c > 0.0) {
            return Err(Error::NonPositive(c));
        }
        Ok(match &self.repr {
            Repr::Constant(v) => Self { repr: Repr::Constant(v * c) },
            Repr::Grid(p) => {
                let ws = p.node_values().iter().map(|w| w * c).collect();
                Self::from_grid(p.nodes().to_vec(), ws)?
            }
            Repr::Analytic(f) => {
                let f = f.clone();
                Self::from_fn(move |x| c * f(x))
            }
        })
    }

    /// Writes `x,w` rows for grid-backed weights.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let Some((xs, ws)) = self.grid() else {
            return Err(Error::InvalidParams("only grid-backed weights can be exported".into()));
        };
        let mut out = csv::Writer::from_path(path)?;
        out.write_record(["x", "w"])?;
        for (x, w) in xs.iter().zip(ws) {
            out.write_record([format!("{x:.17e}"), format!("{w:.17e}")])?;
        }
        out.flush()?;
        Ok(())
    }
}

/// One classical Runge–Kutta step for `y' = f(x, y)`.
#[inline]
pub fn rk4_step<F: Fn(f64, f64) -> f64>(f: &F, x: f64, y: f64, h: f64) -> f64 {
    let k1 = f(x, y);
    let k2 = f(x + 0.5 * h, y + 0.5 * h * k1);
    let k3 = f(x + 0.5 * h, y + 0.5 * h * k2);
    let k4 = f(x + h, y + h * k3);
    y + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
}

/// Values of `w_lin ρ` on the uniform grid of `n_steps` intervals over the
/// support, from RK4 on `(w ρ)' = -(x - m) ρ`, `(w ρ)(a) = 0`.
pub fn wlin_density_product(measure: &Measure1D, n_steps: usize) -> (Vec<f64>, Vec<f64>) {
    let (a, b) = (measure.lower(), measure.upper());
    let m = measure.mean();
    let h = (b - a) / n_steps as f64;
    let rhs = |x: f64, _y: f64| -(x - m) * measure.pdf(x);
    let mut xs = Vec::with_capacity(n_steps + 1);
    let mut ys = Vec::with_capacity(n_steps + 1);
    let mut y = 0.0;
    for i in 0..=n_steps {
        let x = if i == n_steps { b } else { a + h * i as f64 };
        xs.push(x);
        ys.push(y);
        if i < n_steps {
            y = rk4_step(&rhs, x, y, h);
        }
    }
    (xs, ys)
}

/// The linear-preserving weight `w_lin(x) = -(1/ρ(x)) ∫_a^x (y - m) ρ(y) dy`.
///
/// Endpoint nodes with vanishing density are filled by quadratic
/// extrapolation from the three nearest interior nodes.
pub fn wlin_compute(measure: &Measure1D, n_steps: usize) -> Result<Weight1D> {
    if n_steps < 100 {
        return Err(Error::InvalidParams(format!("w_lin needs at least 100 steps, got {n_steps}")));
    }
    let (xs, products) = wlin_density_product(measure, n_steps);
    let n = n_steps;
    let mut ws = vec![0.0; n + 1];
    let mut fill = Vec::new();
    for i in 0..=n {
        let rho = measure.pdf(xs[i]);
        if rho < MIN_NODAL_DENSITY {
            if i == 0 || i == n {
                fill.push(i);
                continue;
            }
            return Err(Error::DivisionBlowup { x: xs[i], rho });
        }
        ws[i] = products[i] / rho;
    }
    for i in fill {
        ws[i] = if i == 0 {
            3.0 * ws[1] - 3.0 * ws[2] + ws[3]
        } else {
            3.0 * ws[n - 1] - 3.0 * ws[n - 2] + ws[n - 3]
        }
        .max(0.0);
    }
    // roundoff can leave a signed zero at a nonvanishing endpoint
    ws[0] = ws[0].max(0.0);
    ws[n] = ws[n].max(0.0);
    Weight1D::from_grid(xs, ws)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Holds,
    Diverges,
    Inconclusive,
}

/// Outcome of probing one integrability condition.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConditionProbe {
    pub verdict: Verdict,
    /// Integral over the most refined interval, plus the extrapolated tail
    /// when the increments decay.
    pub estimate: f64,
    /// Integrals over the nested intervals `[a + ε_l, b - ε_l]`.
    pub levels: Vec<f64>,
}

/// Numerical probe of the two sufficient existence conditions.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExistenceReport {
    /// `1/(w ρ)` integrable on `(a, b)`.
    pub cond_i: ConditionProbe,
    /// A primitive of `1/(w ρ)` is square integrable under the measure.
    pub cond_ii: ConditionProbe,
}

impl ExistenceReport {
    pub fn is_conclusive(&self) -> bool {
        self.cond_i.verdict == Verdict::Holds || self.cond_ii.verdict == Verdict::Holds
    }
}

const PROBE_LEVELS: usize = 6;
const PROBE_TOL: f64 = 1e-9;
const SHELL_CELLS: usize = 40;
const MIDDLE_CELLS: usize = 64;

/// Heuristic probe: integrate over `[a + ε_l, b - ε_l]` with
/// `ε_l = (b - a) 10^{-l} / 4`, `l = 0..=6`, and watch the shell increments.
/// Increments that shrink by more than 20x over the refinements mean
/// convergence; increments that stay within a factor 2 of the first one
/// (logarithmic or power-law blow-up) mean divergence.
pub fn check_existence(measure: &Measure1D, weight: &Weight1D) -> ExistenceReport {
    let (a, b) = (measure.lower(), measure.upper());
    let inv_p = |x: f64| {
        let p = weight.density_product(measure, x);
        if p > 0.0 {
            1.0 / p
        } else {
            f64::INFINITY
        }
    };
    let cond_i = probe(a, b, &|lo, hi| integrate_tol(inv_p, lo, hi, PROBE_TOL));

    // Primitive from the mean, tabulated on a grid that is geometric towards
    // both endpoints; within a cell it is completed by a single panel.
    let eps = probe_eps(a, b);
    let mut nodes = vec![measure.mean()];
    for l in 1..=PROBE_LEVELS {
        for i in 0..SHELL_CELLS {
            let t = i as f64 / SHELL_CELLS as f64;
            let d = eps[l] * (eps[l - 1] / eps[l]).powf(t);
            nodes.push(a + d);
            nodes.push(b - d);
        }
    }
    for i in 0..=MIDDLE_CELLS {
        let lo = a + eps[0];
        nodes.push(lo + (b - eps[0] - lo) * i as f64 / MIDDLE_CELLS as f64);
    }
    nodes.push(a + eps[PROBE_LEVELS]);
    nodes.push(b - eps[PROBE_LEVELS]);
    nodes.sort_by(|x, y| x.total_cmp(y));
    nodes.dedup();
    let c = nodes.iter().position(|&x| x == measure.mean()).expect("mean is a node");
    let mut prim = vec![0.0; nodes.len()];
    for i in c..nodes.len() - 1 {
        prim[i + 1] = prim[i] + integrate_tol(inv_p, nodes[i], nodes[i + 1], PROBE_TOL);
    }
    for i in (0..c).rev() {
        prim[i] = prim[i + 1] - integrate_tol(inv_p, nodes[i], nodes[i + 1], PROBE_TOL);
    }
    let (gx, gw) = gauss_legendre_rule();
    let cell = |i: usize| {
        let (lo, hi) = (nodes[i], nodes[i + 1]);
        let (mid, half) = (0.5 * (lo + hi), 0.5 * (hi - lo));
        gx.iter()
            .zip(gw)
            .map(|(t, w)| {
                let x = mid + half * t;
                let r = prim[i] + gl_panel(&inv_p, lo, x);
                w * half * r * r * measure.pdf(x)
            })
            .sum::<f64>()
    };
    let cond_ii = probe(a, b, &|lo, hi| {
        (0..nodes.len() - 1)
            .filter(|&i| nodes[i] >= lo && nodes[i + 1] <= hi)
            .map(cell)
            .sum()
    });
    ExistenceReport { cond_i, cond_ii }
}

fn probe_eps(a: f64, b: f64) -> Vec<f64> {
    (0..=PROBE_LEVELS).map(|l| 0.25 * (b - a) * 10f64.powi(-(l as i32))).collect()
}

/// `integral(lo, hi)` over the nested intervals and their shells.
fn probe<F: Fn(f64, f64) -> f64>(a: f64, b: f64, integral: &F) -> ConditionProbe {
    let eps = probe_eps(a, b);
    let mut levels = vec![integral(a + eps[0], b - eps[0])];
    let mut increments = Vec::new();
    for l in 1..=PROBE_LEVELS {
        let shell = integral(a + eps[l], a + eps[l - 1]) + integral(b - eps[l - 1], b - eps[l]);
        increments.push(shell);
        levels.push(levels[l - 1] + shell);
    }
    let last = *levels.last().unwrap();
    let first_inc = increments[0];
    let last_inc = *increments.last().unwrap();
    let finite = levels.iter().all(|v| v.is_finite());
    let ratio = if first_inc > 0.0 { last_inc / first_inc } else { 0.0 };
    let verdict = if !finite || ratio > 0.5 {
        Verdict::Diverges
    } else if ratio < 0.05 && last_inc <= 1e-3 * last.abs() {
        Verdict::Holds
    } else {
        Verdict::Inconclusive
    };
    let estimate = if verdict == Verdict::Holds {
        let prev = increments[PROBE_LEVELS - 2];
        let q = if prev > 0.0 { (last_inc / prev).min(0.9) } else { 0.0 };
        last + last_inc * q / (1.0 - q)
    } else {
        last
    };
    ConditionProbe { verdict, estimate, levels }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::integrate;

    #[test]
    fn constant_weight_basics() {
        let w = constant_weight(1.0).unwrap();
        assert_eq!(w.eval(0.3), 1.0);
        let m = Measure1D::truncated_exponential(1.0, 0.0, 3.0).unwrap();
        for x in [0.0, 0.7, 2.9] {
            assert_eq!(w.density_product(&m, x), m.pdf(x));
        }
        assert!(matches!(constant_weight(0.0), Err(Error::NonPositive(_))));
        assert!(matches!(constant_weight(-2.0), Err(Error::NonPositive(_))));
    }

    #[test]
    fn wlin_uniform_closed_form() {
        let m = Measure1D::uniform(0.0, 1.0).unwrap();
        let w = wlin_compute(&m, 1000).unwrap();
        let (xs, ws) = w.grid().unwrap();
        let err = xs.iter().zip(ws).map(|(x, w)| (w - x * (1.0 - x) / 2.0).abs()).fold(0.0, f64::max);
        assert!(err <= 1e-8, "{err}");
        let m = Measure1D::uniform(-1.0, 1.0).unwrap();
        let w = wlin_compute(&m, 1000).unwrap();
        for x in [-0.9, -0.3, 0.0, 0.55] {
            assert!((w.eval(x) - (1.0 - x * x) / 2.0).abs() < 1e-8);
        }
    }

    #[test]
    fn wlin_exponential_tends_to_identity() {
        // analytic: w_lin(x) = x + (1 - m) for the exponential truncated on [0, B]
        let m = Measure1D::truncated_exponential(1.0, 0.0, 20.0).unwrap();
        let w = wlin_compute(&m, 4000).unwrap();
        for i in 0..=500 {
            let x = 5.0 * i as f64 / 500.0;
            assert!((w.eval(x) - x).abs() <= 1e-4, "x={x}");
        }
    }

    #[test]
    fn wlin_defining_identity_and_positivity() {
        let measures = [
            Measure1D::truncated_gumbel(1013.0, 558.0, 500.0, 3000.0).unwrap(),
            Measure1D::truncated_gaussian(30.0, 64.0, 15.0, 75.0).unwrap(),
            Measure1D::triangular(49.0, 50.0, 51.0).unwrap(),
            Measure1D::uniform(7.0, 9.0).unwrap(),
            Measure1D::truncated_exponential(1.0, 0.0, 3.0).unwrap(),
        ];
        for m in measures {
            let (xs, prod) = wlin_density_product(&m, 4000);
            let mean = m.mean();
            let scale = integrate(|y| (y - mean).abs() * m.pdf(y), m.lower(), m.upper());
            for (i, (&x, &p)) in xs.iter().zip(&prod).enumerate().step_by(97) {
                let mut br: Vec<f64> = m.breakpoints().into_iter().filter(|&t| t < x).collect();
                br.push(x);
                let exact = -crate::quadrature::integrate_with_breaks(|y| (y - mean) * m.pdf(y), &br);
                assert!((p - exact).abs() <= 1e-8 * scale.max(1.0), "{:?} node {i}", m.family());
            }
            assert_eq!(prod[0], 0.0);
            assert!(prod.last().unwrap().abs() <= 1e-8 * scale.max(1.0));
            let w = wlin_compute(&m, 4000).unwrap();
            let (_, ws) = w.grid().unwrap();
            assert!(ws[1..ws.len() - 1].iter().all(|&v| v > 0.0), "{:?}", m.family());
        }
    }

    #[test]
    fn wlin_rejects_vanishing_interior_density() {
        let m = Measure1D::truncated_gaussian(0.0, 1.0, -8.0, 8.0).unwrap();
        assert!(matches!(wlin_compute(&m, 4000), Err(Error::DivisionBlowup { .. })));
        assert!(matches!(wlin_compute(&m, 10), Err(Error::InvalidParams(_))));
    }

    #[test]
    fn existence_verdicts() {
        let m = Measure1D::uniform(-1.0, 1.0).unwrap();
        let r = check_existence(&m, &constant_weight(1.0).unwrap());
        assert_eq!(r.cond_i.verdict, Verdict::Holds);
        assert!((r.cond_i.estimate - 4.0).abs() < 1e-6, "{}", r.cond_i.estimate);

        let r = check_existence(&m, &Weight1D::from_fn(|x| 1.0 - x * x));
        assert_eq!(r.cond_i.verdict, Verdict::Diverges);
        assert_eq!(r.cond_ii.verdict, Verdict::Holds);

        let r = check_existence(&m, &Weight1D::from_fn(|x| (1.0 - x * x).powi(2)));
        assert_eq!(r.cond_i.verdict, Verdict::Diverges);
        assert_eq!(r.cond_ii.verdict, Verdict::Diverges);
        assert!(!r.is_conclusive());
    }
}
