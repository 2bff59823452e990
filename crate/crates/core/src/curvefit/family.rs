use std::fmt;
use std::str::FromStr;

use statrs::function::erf::erfc;

use crate::error::{Error, Result};

/// Candidate cumulative adoption curves.
///
/// Declaration order doubles as the final tie-break during selection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CurveFamily {
    /// `K / (1 + exp(-r (t - t0)))`, params `[K, r, t0]`.
    Logistic,
    /// `K exp(-b exp(-c t))`, params `[K, b, c]`.
    Gompertz,
    /// Bass cumulative adoption
    /// `K (1 - exp(-(p+q) t)) / (1 + (q/p) exp(-(p+q) t))`, params `[K, p, q]`.
    Bass,
    /// `K / (1 + exp(-r (t - t0)))^(1/nu)`, params `[K, r, t0, nu]`.
    GeneralizedRichards,
    /// `K Phi((t - mu) / sigma)`, params `[K, mu, sigma]`.
    CumulativeNormal,
    /// `a (exp(b t) - 1)`, params `[a, b]`.
    Exponential,
    /// `K (1 - exp(-k (t - t0)))^3`, params `[K, k, t0]`.
    Bertalanffy,
    /// Polynomial of the given degree, coefficients in ascending order.
    Polynomial(usize),
    /// `a + b t`, params `[a, b]`.
    Linear,
}

impl CurveFamily {
    /// The seven saturating and growth families that need iterative fitting.
    pub const NONLINEAR: [CurveFamily; 7] = [
        CurveFamily::Logistic,
        CurveFamily::Gompertz,
        CurveFamily::Bass,
        CurveFamily::GeneralizedRichards,
        CurveFamily::CumulativeNormal,
        CurveFamily::Exponential,
        CurveFamily::Bertalanffy,
    ];

    pub fn parameter_count(self) -> usize {
        match self {
            CurveFamily::Logistic
            | CurveFamily::Gompertz
            | CurveFamily::Bass
            | CurveFamily::CumulativeNormal
            | CurveFamily::Bertalanffy => 3,
            CurveFamily::GeneralizedRichards => 4,
            CurveFamily::Exponential | CurveFamily::Linear => 2,
            CurveFamily::Polynomial(d) => d + 1,
        }
    }

    /// Position in the declaration order.
    pub fn order(self) -> usize {
        match self {
            CurveFamily::Logistic => 0,
            CurveFamily::Gompertz => 1,
            CurveFamily::Bass => 2,
            CurveFamily::GeneralizedRichards => 3,
            CurveFamily::CumulativeNormal => 4,
            CurveFamily::Exponential => 5,
            CurveFamily::Bertalanffy => 6,
            CurveFamily::Polynomial(_) => 7,
            CurveFamily::Linear => 8,
        }
    }

    /// S-shaped (saturating) families.
    pub fn is_sigmoid(self) -> bool {
        matches!(
            self,
            CurveFamily::Logistic
                | CurveFamily::Gompertz
                | CurveFamily::Bass
                | CurveFamily::GeneralizedRichards
                | CurveFamily::CumulativeNormal
                | CurveFamily::Bertalanffy
        )
    }

    /// Every family admissible for a series of `t` points.
    pub fn candidates(t: usize) -> Vec<CurveFamily> {
        let mut out: Vec<_> = Self::NONLINEAR
            .into_iter()
            .filter(|f| f.parameter_count() <= t)
            .collect();
        out.extend((2..t).map(CurveFamily::Polynomial));
        out.push(CurveFamily::Linear);
        out
    }

    pub(crate) fn evaluate(self, p: &[f64], t: f64) -> f64 {
        match self {
            CurveFamily::Logistic => p[0] * sigmoid(p[1] * (t - p[2])),
            CurveFamily::Gompertz => p[0] * (-p[1] * (-p[2] * t).exp()).exp(),
            CurveFamily::Bass => {
                let (k, bp, bq) = (p[0], p[1], p[2]);
                let e = (-(bp + bq) * t).exp();
                k * (1.0 - e) / (1.0 + (bq / bp) * e)
            }
            CurveFamily::GeneralizedRichards => {
                let x = -p[1] * (t - p[2]);
                p[0] * (-softplus(x) / p[3]).exp()
            }
            CurveFamily::CumulativeNormal => p[0] * normal_cdf((t - p[1]) / p[2]),
            CurveFamily::Exponential => p[0] * (p[1] * t).exp_m1(),
            CurveFamily::Bertalanffy => {
                let u = -(-p[1] * (t - p[2])).exp_m1();
                p[0] * u * u * u
            }
            CurveFamily::Polynomial(_) => p.iter().rev().fold(0.0, |acc, c| acc * t + c),
            CurveFamily::Linear => p[0] + p[1] * t,
        }
    }

    pub(crate) fn derivative(self, p: &[f64], t: f64) -> f64 {
        match self {
            CurveFamily::Logistic => {
                let s = sigmoid(p[1] * (t - p[2]));
                p[0] * p[1] * s * (1.0 - s)
            }
            CurveFamily::Gompertz => {
                let u = (-p[2] * t).exp();
                p[0] * (-p[1] * u).exp() * p[1] * p[2] * u
            }
            CurveFamily::Bass => {
                let (k, bp, bq) = (p[0], p[1], p[2]);
                let e = (-(bp + bq) * t).exp();
                let d = 1.0 + (bq / bp) * e;
                k * (bp + bq).powi(2) / bp * e / (d * d)
            }
            CurveFamily::GeneralizedRichards => {
                let x = -p[1] * (t - p[2]);
                let v = p[0] * (-softplus(x) / p[3]).exp();
                // exp(x) / (1 + exp(x)) without overflow
                v * p[1] / p[3] * sigmoid(x)
            }
            CurveFamily::CumulativeNormal => {
                let z = (t - p[1]) / p[2];
                p[0] * (-0.5 * z * z).exp() / (p[2] * (2.0 * std::f64::consts::PI).sqrt())
            }
            CurveFamily::Exponential => p[0] * p[1] * (p[1] * t).exp(),
            CurveFamily::Bertalanffy => {
                let e = (-p[1] * (t - p[2])).exp();
                let u = 1.0 - e;
                3.0 * p[0] * p[1] * e * u * u
            }
            CurveFamily::Polynomial(_) => p
                .iter()
                .enumerate()
                .skip(1)
                .rev()
                .fold(0.0, |acc, (i, c)| acc * t + i as f64 * c),
            CurveFamily::Linear => p[1],
        }
    }

    /// Closed-form antiderivative, for the polynomial families only.
    pub(crate) fn antiderivative(self, p: &[f64], t: f64) -> Option<f64> {
        match self {
            CurveFamily::Polynomial(_) | CurveFamily::Linear => Some(
                p.iter()
                    .enumerate()
                    .rev()
                    .fold(0.0, |acc, (i, c)| acc * t + c / (i + 1) as f64)
                    * t,
            ),
            _ => None,
        }
    }
}

impl fmt::Display for CurveFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CurveFamily::Logistic => f.write_str("logistic"),
            CurveFamily::Gompertz => f.write_str("gompertz"),
            CurveFamily::Bass => f.write_str("bass"),
            CurveFamily::GeneralizedRichards => f.write_str("richards"),
            CurveFamily::CumulativeNormal => f.write_str("cumulative_normal"),
            CurveFamily::Exponential => f.write_str("exponential"),
            CurveFamily::Bertalanffy => f.write_str("bertalanffy"),
            CurveFamily::Polynomial(d) => write!(f, "polynomial{d}"),
            CurveFamily::Linear => f.write_str("linear"),
        }
    }
}

impl FromStr for CurveFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "logistic" => CurveFamily::Logistic,
            "gompertz" => CurveFamily::Gompertz,
            "bass" => CurveFamily::Bass,
            "richards" => CurveFamily::GeneralizedRichards,
            "cumulative_normal" => CurveFamily::CumulativeNormal,
            "exponential" => CurveFamily::Exponential,
            "bertalanffy" => CurveFamily::Bertalanffy,
            "linear" => CurveFamily::Linear,
            other => match other
                .strip_prefix("polynomial")
                .and_then(|d| d.parse::<usize>().ok())
            {
                Some(d) if d >= 2 => CurveFamily::Polynomial(d),
                _ => return Err(Error::Config(format!("unknown curve family `{other}`"))),
            },
        })
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + exp(x))`
fn softplus(x: f64) -> f64 {
    if x > 35.0 {
        x
    } else {
        x.exp().ln_1p()
    }
}

pub(crate) fn normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}
