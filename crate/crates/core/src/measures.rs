//! One-dimensional input distributions on bounded intervals and their
//! independent products.
//!
//! Truncated families keep the parent density and divide by the parent
//! mass of the truncation interval, computed from closed-form parent CDFs.
//! Gumbel is parametrized by location/scale with pdf
//! `(1/scale) exp(-(z + exp(-z)))`, `z = (x - loc) / scale`; the Gaussian
//! takes a variance (so `N(30, 64)` has standard deviation 8).

use ndarray::Array2;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::integrate_with_breaks;

const MIN_MASS: f64 = 1e-300;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FamilyTag {
    Uniform,
    Triangular,
    TruncatedGaussian,
    TruncatedGumbel,
    TruncatedExponential,
}

/// Parent distribution and its parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Family {
    Uniform { lower: f64, upper: f64 },
    Triangular { lower: f64, mode: f64, upper: f64 },
    Gaussian { mean: f64, variance: f64 },
    Gumbel { location: f64, scale: f64 },
    Exponential { rate: f64 },
}

impl Family {
    fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParams(msg));
        match *self {
            Family::Uniform { lower, upper } if !(lower < upper) || !lower.is_finite() || !upper.is_finite() => {
                bad(format!("uniform needs lower < upper, got ({lower}, {upper})"))
            }
            Family::Triangular { lower, mode, upper } if !(lower < mode && mode < upper) => {
                bad(format!("triangular needs lower < mode < upper, got ({lower}, {mode}, {upper})"))
            }
            Family::Gaussian { variance, mean } if !(variance > 0.0) || !mean.is_finite() => {
                bad(format!("gaussian needs a positive variance, got {variance}"))
            }
            Family::Gumbel { scale, location } if !(scale > 0.0) || !location.is_finite() => {
                bad(format!("gumbel needs a positive scale, got {scale}"))
            }
            Family::Exponential { rate } if !(rate > 0.0) || !rate.is_finite() => {
                bad(format!("exponential needs a positive rate, got {rate}"))
            }
            _ => Ok(()),
        }
    }

    /// Natural support of the parent distribution.
    fn support(&self) -> (f64, f64) {
        match *self {
            Family::Uniform { lower, upper } => (lower, upper),
            Family::Triangular { lower, upper, .. } => (lower, upper),
            Family::Gaussian { .. } | Family::Gumbel { .. } => (f64::NEG_INFINITY, f64::INFINITY),
            Family::Exponential { .. } => (0.0, f64::INFINITY),
        }
    }

    fn pdf(&self, x: f64) -> f64 {
        match *self {
            Family::Uniform { lower, upper } => {
                if (lower..=upper).contains(&x) {
                    1.0 / (upper - lower)
                } else {
                    0.0
                }
            }
            Family::Triangular { lower, mode, upper } => {
                if x < lower || x > upper {
                    0.0
                } else if x <= mode {
                    2.0 * (x - lower) / ((upper - lower) * (mode - lower))
                } else {
                    2.0 * (upper - x) / ((upper - lower) * (upper - mode))
                }
            }
            Family::Gaussian { mean, variance } => {
                let z = (x - mean) / variance.sqrt();
                (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI * variance).sqrt()
            }
            Family::Gumbel { location, scale } => {
                let z = (x - location) / scale;
                (-(z + (-z).exp())).exp() / scale
            }
            Family::Exponential { rate } => {
                if x < 0.0 {
                    0.0
                } else {
                    rate * (-rate * x).exp()
                }
            }
        }
    }

    /// Parent probability of `[lo, hi]`, evaluated in the numerically
    /// favourable tail.
    fn mass(&self, lo: f64, hi: f64) -> f64 {
        if hi <= lo {
            return 0.0;
        }
        match *self {
            Family::Uniform { lower, upper } => {
                let (l, h) = (lo.max(lower), hi.min(upper));
                ((h - l) / (upper - lower)).max(0.0)
            }
            Family::Triangular { .. } => self.tri_cdf(hi) - self.tri_cdf(lo),
            Family::Gaussian { mean, variance } => {
                let s = (2.0 * variance).sqrt();
                let (zl, zh) = ((lo - mean) / s, (hi - mean) / s);
                if zl >= 0.0 {
                    0.5 * (libm::erfc(zl) - libm::erfc(zh))
                } else if zh <= 0.0 {
                    0.5 * (libm::erfc(-zh) - libm::erfc(-zl))
                } else {
                    1.0 - 0.5 * (libm::erfc(-zl) + libm::erfc(zh))
                }
            }
            Family::Gumbel { location, scale } => {
                let cdf = |x: f64| (-(-(x - location) / scale).exp()).exp();
                let sf = |x: f64| -(-(-(x - location) / scale).exp()).exp_m1();
                if lo >= location {
                    sf(lo) - sf(hi)
                } else {
                    cdf(hi) - cdf(lo)
                }
            }
            Family::Exponential { rate } => {
                let l = lo.max(0.0);
                if hi <= l {
                    return 0.0;
                }
                (-rate * l).exp() * -(-rate * (hi - l)).exp_m1()
            }
        }
    }

    fn tri_cdf(&self, x: f64) -> f64 {
        let Family::Triangular { lower, mode, upper } = *self else { unreachable!() };
        if x <= lower {
            0.0
        } else if x <= mode {
            (x - lower).powi(2) / ((upper - lower) * (mode - lower))
        } else if x < upper {
            1.0 - (upper - x).powi(2) / ((upper - lower) * (upper - mode))
        } else {
            1.0
        }
    }

    fn tag(&self) -> FamilyTag {
        match self {
            Family::Uniform { .. } => FamilyTag::Uniform,
            Family::Triangular { .. } => FamilyTag::Triangular,
            Family::Gaussian { .. } => FamilyTag::TruncatedGaussian,
            Family::Gumbel { .. } => FamilyTag::TruncatedGumbel,
            Family::Exponential { .. } => FamilyTag::TruncatedExponential,
        }
    }
}

/// Declarative description of a measure, as found in experiment configs:
/// `{"family": "gumbel", "location": 1013, "scale": 558, "truncation": [500, 3000]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasureSpec {
    #[serde(flatten)]
    pub family: Family,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truncation: Option<[f64; 2]>,
}

impl MeasureSpec {
    pub fn build(&self) -> Result<Measure1D> {
        make_measure(self.family, self.truncation.map(|[a, b]| (a, b)))
    }
}

/// A continuous probability measure on a bounded interval `[a, b]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Measure1D {
    family: Family,
    a: f64,
    b: f64,
    norm: f64,
    mean: f64,
}

/// Builds a normalized measure from a parent family restricted to
/// `truncation` (defaults to the natural support, which must be bounded).
pub fn make_measure(family: Family, truncation: Option<(f64, f64)>) -> Result<Measure1D> {
    family.validate()?;
    let (sa, sb) = family.support();
    let (a, b) = match truncation {
        Some((a, b)) => {
            if !(a < b) || !a.is_finite() || !b.is_finite() {
                return Err(Error::InvalidParams(format!("bad truncation interval [{a}, {b}]")));
            }
            (a.max(sa), b.min(sb))
        }
        None if sa.is_finite() && sb.is_finite() => (sa, sb),
        None => {
            return Err(Error::InvalidParams(
                "unbounded family requires a truncation interval".into(),
            ))
        }
    };
    let norm = if b > a { family.mass(a, b) } else { 0.0 };
    if !(norm >= MIN_MASS) {
        return Err(Error::ZeroMass { mass: norm, a, b });
    }
    let mut m = Measure1D { family, a, b, norm, mean: 0.0 };
    let breaks = m.breakpoints();
    m.mean = integrate_with_breaks(|x| x * m.pdf(x), &breaks);
    Ok(m)
}

impl Measure1D {
    pub fn uniform(lower: f64, upper: f64) -> Result<Self> {
        make_measure(Family::Uniform { lower, upper }, None)
    }

    pub fn triangular(lower: f64, mode: f64, upper: f64) -> Result<Self> {
        make_measure(Family::Triangular { lower, mode, upper }, None)
    }

    pub fn truncated_gaussian(mean: f64, variance: f64, a: f64, b: f64) -> Result<Self> {
        make_measure(Family::Gaussian { mean, variance }, Some((a, b)))
    }

    pub fn truncated_gumbel(location: f64, scale: f64, a: f64, b: f64) -> Result<Self> {
        make_measure(Family::Gumbel { location, scale }, Some((a, b)))
    }

    pub fn truncated_exponential(rate: f64, a: f64, b: f64) -> Result<Self> {
        make_measure(Family::Exponential { rate }, Some((a, b)))
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn family_tag(&self) -> FamilyTag {
        self.family.tag()
    }

    #[inline]
    pub fn lower(&self) -> f64 {
        self.a
    }

    #[inline]
    pub fn upper(&self) -> f64 {
        self.b
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Parent mass of the support, i.e. the renormalization constant.
    pub fn normalization(&self) -> f64 {
        self.norm
    }

    #[inline]
    pub fn pdf(&self, x: f64) -> f64 {
        if x < self.a || x > self.b {
            0.0
        } else {
            self.family.pdf(x) / self.norm
        }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        if x <= self.a {
            0.0
        } else if x >= self.b {
            1.0
        } else {
            (self.family.mass(self.a, x) / self.norm).clamp(0.0, 1.0)
        }
    }

    /// Points where the density is not smooth, including both endpoints.
    pub fn breakpoints(&self) -> Vec<f64> {
        match self.family {
            Family::Triangular { mode, .. } if mode > self.a && mode < self.b => {
                vec![self.a, mode, self.b]
            }
            _ => vec![self.a, self.b],
        }
    }

    /// Closed-form inverse of the truncated CDF, used as a starting point.
    fn quantile_guess(&self, u: f64) -> Option<f64> {
        let x = match self.family {
            Family::Uniform { .. } => self.a + u * (self.b - self.a),
            Family::Exponential { rate } => {
                // mass(a, x) = e^{-ra} (1 - e^{-r(x-a)})
                let t = u * self.norm / (-rate * self.a).exp();
                self.a - (-t).ln_1p() / rate
            }
            Family::Gumbel { location, scale } => {
                let p = self.family.mass(f64::NEG_INFINITY, self.a) + u * self.norm;
                location - scale * (-p.ln()).ln()
            }
            Family::Triangular { .. } => {
                let p = self.family.tri_cdf(self.a) + u * self.norm;
                let Family::Triangular { lower, mode, upper } = self.family else { unreachable!() };
                let fc = (mode - lower) / (upper - lower);
                if p <= fc {
                    lower + (p * (upper - lower) * (mode - lower)).sqrt()
                } else {
                    upper - ((1.0 - p) * (upper - lower) * (upper - mode)).sqrt()
                }
            }
            Family::Gaussian { .. } => return None,
        };
        x.is_finite().then_some(x.clamp(self.a, self.b))
    }

    /// Inverse CDF. A closed-form guess (when one exists) is polished by
    /// safeguarded Newton steps inside a shrinking bisection bracket.
    pub fn quantile(&self, u: f64) -> f64 {
        if !(u > 0.0) {
            return self.a;
        }
        if u >= 1.0 {
            return self.b;
        }
        let (mut lo, mut hi) = (self.a, self.b);
        let mut x = self.quantile_guess(u).unwrap_or(0.5 * (lo + hi));
        for _ in 0..200 {
            let f = self.cdf(x) - u;
            if f.abs() <= 1e-16 {
                return x;
            }
            if f < 0.0 {
                lo = x;
            } else {
                hi = x;
            }
            if hi - lo <= 4.0 * f64::EPSILON * hi.abs().max(lo.abs()).max(f64::MIN_POSITIVE) {
                break;
            }
            let d = self.pdf(x);
            let newton = x - f / d;
            x = if d > 0.0 && newton >= lo && newton <= hi {
                newton
            } else {
                0.5 * (lo + hi)
            };
        }
        x
    }
}

/// Independent product of one-dimensional measures.
#[derive(Debug, Clone, PartialEq)]
pub struct ProductMeasure {
    components: Vec<Measure1D>,
}

impl ProductMeasure {
    pub fn new(components: Vec<Measure1D>) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::InvalidParams("product measure needs at least one component".into()));
        }
        Ok(Self { components })
    }

    pub fn dim(&self) -> usize {
        self.components.len()
    }

    pub fn components(&self) -> &[Measure1D] {
        &self.components
    }

    pub fn component(&self, k: usize) -> &Measure1D {
        &self.components[k]
    }

    /// `n` i.i.d. rows. Coordinate `k` uses its own ChaCha stream so that
    /// columns are independent and reproducible from `seed`.
    pub fn sample(&self, n: usize, seed: u64) -> Result<Array2<f64>> {
        if n == 0 {
            return Err(Error::InvalidParams("sample size must be at least 1".into()));
        }
        let d = self.dim();
        let mut out = Array2::zeros((n, d));
        for (k, m) in self.components.iter().enumerate() {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(k as u64);
            for i in 0..n {
                let u: f64 = rng.gen();
                out[[i, k]] = m.quantile(u);
            }
        }
        Ok(out)
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim()
            && self.components.iter().zip(x).all(|(m, &v)| v >= m.lower() && v <= m.upper())
    }
}
