//! Cumulative adoption curve fitting and best-curve selection.
//!
//! Each series is fitted with every admissible family: seven saturating or
//! growth curves solved by bounded Levenberg-Marquardt from eight fixed start
//! points, polynomials of degree 2 to `T - 1` and a straight line solved by
//! linear least squares. Fits with `R² > r2_min` are admitted and the one
//! with the largest adjusted `R²` wins ([`SelectionMode::Adjusted`]).

mod family;
mod lm;

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};

pub(crate) use family::normal_cdf;
pub use family::CurveFamily;
use lm::{Bound, LmSettings};

use crate::error::{Error, Result};

/// Number of deterministic multi-start points per nonlinear family.
pub const START_COUNT: usize = 8;

/// Two `R²` scores closer than this are treated as equal during selection.
pub const SCORE_TIE: f64 = 1e-12;
/// Default margin below the best adjusted `R²` within which a fit still
/// counts as tied with it.
pub const DEFAULT_TIE_MARGIN: f64 = 1e-3;

/// A parameterised curve on a closed time domain.
#[derive(Debug, Clone, PartialEq)]
pub struct Curve {
    family: CurveFamily,
    params: Vec<f64>,
    domain: (f64, f64),
}

impl Curve {
    pub fn new(family: CurveFamily, params: Vec<f64>, domain: (f64, f64)) -> Result<Self> {
        if params.len() != family.parameter_count() {
            return Err(Error::Config(format!(
                "{family} takes {} parameters, got {}",
                family.parameter_count(),
                params.len()
            )));
        }
        if !(domain.0 < domain.1) {
            return Err(Error::Config(format!(
                "empty curve domain [{}, {}]",
                domain.0, domain.1
            )));
        }
        if params.iter().any(|p| !p.is_finite()) {
            return Err(Error::Config(format!("non-finite {family} parameter")));
        }
        Ok(Self {
            family,
            params,
            domain,
        })
    }

    /// Shorthand for a polynomial with ascending coefficients.
    pub fn polynomial(coefficients: Vec<f64>, domain: (f64, f64)) -> Result<Self> {
        let family = match coefficients.len() {
            0 | 1 => {
                return Err(Error::Config(
                    "a polynomial needs at least two coefficients".into(),
                ))
            }
            2 => CurveFamily::Linear,
            n => CurveFamily::Polynomial(n - 1),
        };
        Self::new(family, coefficients, domain)
    }

    pub fn family(&self) -> CurveFamily {
        self.family
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn domain(&self) -> (f64, f64) {
        self.domain
    }

    pub fn value(&self, t: f64) -> f64 {
        self.family.evaluate(&self.params, t)
    }

    pub fn derivative(&self, t: f64) -> f64 {
        self.family.derivative(&self.params, t)
    }

    pub(crate) fn antiderivative(&self, t: f64) -> Option<f64> {
        self.family.antiderivative(&self.params, t)
    }

    /// The same curve on a sub-interval of its domain.
    pub fn restrict(&self, start: f64, end: f64) -> Result<Self> {
        if !(self.domain.0 <= start && start < end && end <= self.domain.1) {
            return Err(Error::SplitOutOfDomain {
                split: if start < self.domain.0 { start } else { end },
                start: self.domain.0,
                end: self.domain.1,
            });
        }
        Ok(Self {
            domain: (start, end),
            ..self.clone()
        })
    }

    /// Multiplies the curve by `c`, when the family has a linear scale
    /// parameter.
    pub fn scaled(&self, c: f64) -> Option<Self> {
        let mut params = self.params.clone();
        match self.family {
            CurveFamily::Polynomial(_) | CurveFamily::Linear => {
                params.iter_mut().for_each(|p| *p *= c)
            }
            _ => params[0] *= c,
        }
        Some(Self {
            params,
            ..self.clone()
        })
    }
}

/// How admitted fits are ranked.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SelectionMode {
    /// Largest adjusted `R²`, which penalises parameter count.
    #[default]
    Adjusted,
    /// Largest plain `R²`. The interpolating polynomial wins almost always.
    Plain,
}

impl fmt::Display for SelectionMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SelectionMode::Adjusted => "adjusted",
            SelectionMode::Plain => "plain",
        })
    }
}

impl FromStr for SelectionMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "adjusted" => Ok(SelectionMode::Adjusted),
            "plain" => Ok(SelectionMode::Plain),
            other => Err(Error::Config(format!(
                "selection mode must be `adjusted` or `plain`, got `{other}`"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct FitOptions {
    /// Admission gate on plain `R²` (strict inequality).
    pub r2_min: f64,
    pub mode: SelectionMode,
    /// Adjusted-mode fits within this margin of the best score tie with it,
    /// so a simpler curve is not beaten by a polynomial chasing noise.
    pub tie_margin: f64,
    pub max_iter: usize,
    /// Relative parameter step at which an iteration stops.
    pub step_tol: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            r2_min: 0.9,
            mode: SelectionMode::Adjusted,
            tie_margin: DEFAULT_TIE_MARGIN,
            max_iter: 200,
            step_tol: 1e-10,
        }
    }
}

/// A curve together with its goodness of fit on the observed points.
#[derive(Debug, Clone, PartialEq)]
pub struct FittedCurve {
    pub curve: Curve,
    pub r2: f64,
    /// `-inf` when the fit has no residual degrees of freedom.
    pub r2_adjusted: f64,
    /// Set when no family passed the `R²` gate.
    pub low_fit: bool,
}

impl FittedCurve {
    pub fn family(&self) -> CurveFamily {
        self.curve.family
    }

    pub fn params(&self) -> &[f64] {
        &self.curve.params
    }

    pub fn value(&self, t: f64) -> f64 {
        self.curve.value(t)
    }

    pub fn derivative(&self, t: f64) -> f64 {
        self.curve.derivative(t)
    }
}

/// Why a single family could not be fitted.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum FitFailure {
    #[error("{family} needs at least {needed} points, got {got}")]
    TooFewPoints {
        family: CurveFamily,
        needed: usize,
        got: usize,
    },
    #[error("{0} did not converge from any start point")]
    NoConvergence(CurveFamily),
    #[error("{0} does not reproduce a constant series")]
    ConstantMismatch(CurveFamily),
    #[error("invalid input series: {0}")]
    BadInput(String),
}

/// Least-squares fit of one family.
pub fn fit_family(
    times: &[f64],
    values: &[f64],
    family: CurveFamily,
    options: &FitOptions,
) -> Result<FittedCurve, FitFailure> {
    if times.len() != values.len() || times.len() < 2 {
        return Err(FitFailure::BadInput(format!(
            "{} times and {} values",
            times.len(),
            values.len()
        )));
    }
    if values.iter().any(|v| !v.is_finite()) || times.iter().any(|t| !t.is_finite()) {
        return Err(FitFailure::BadInput("non-finite observation".into()));
    }
    let n = times.len();
    let k = family.parameter_count();
    if n < k {
        return Err(FitFailure::TooFewPoints {
            family,
            needed: k,
            got: n,
        });
    }
    let domain = (times[0], times[n - 1]);
    let (params, ss_res) = match family {
        CurveFamily::Linear | CurveFamily::Polynomial(_) => {
            polynomial_fit(times, values, k - 1).ok_or(FitFailure::NoConvergence(family))?
        }
        _ => nonlinear_fit(times, values, family, options)?,
    };
    let curve = Curve {
        family,
        params,
        domain,
    };
    let r2 = r_squared(values, ss_res).ok_or(FitFailure::ConstantMismatch(family))?;
    Ok(FittedCurve {
        curve,
        r2,
        r2_adjusted: adjusted_r_squared(r2, n, k),
        low_fit: false,
    })
}

/// `1 - SS_res / SS_tot`. A constant series scores 1 when its residuals
/// vanish and has no score otherwise.
fn r_squared(values: &[f64], ss_res: f64) -> Option<f64> {
    let n = values.len() as f64;
    let (lo, hi) = values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
    if lo == hi {
        let tol = n * (1e-12 * hi.abs()).powi(2);
        return (ss_res <= tol).then_some(1.0);
    }
    let mean = values.iter().sum::<f64>() / n;
    let ss_tot = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>();
    Some(1.0 - ss_res / ss_tot)
}

/// Adjusted `R²` with `parameter_count - 1` explanatory terms.
pub fn adjusted_r_squared(r2: f64, n: usize, parameter_count: usize) -> f64 {
    if n <= parameter_count {
        return f64::NEG_INFINITY;
    }
    if r2 == 1.0 {
        return 1.0;
    }
    1.0 - (1.0 - r2) * (n as f64 - 1.0) / (n - parameter_count) as f64
}

fn polynomial_fit(t: &[f64], y: &[f64], degree: usize) -> Option<(Vec<f64>, f64)> {
    let n = t.len();
    let m = degree + 1;
    if degree == 1 {
        let tm = t.iter().sum::<f64>() / n as f64;
        let ym = y.iter().sum::<f64>() / n as f64;
        let sxy: f64 = t.iter().zip(y).map(|(a, b)| (a - tm) * (b - ym)).sum();
        let sxx: f64 = t.iter().map(|a| (a - tm) * (a - tm)).sum();
        let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
        let intercept = ym - slope * tm;
        let params = vec![intercept, slope];
        let ss = sum_sq(CurveFamily::Linear, &params, t, y);
        return Some((params, ss));
    }
    // Columns are equilibrated before the SVD solve.
    let mut vander = DMatrix::from_fn(n, m, |i, j| t[i].powi(j as i32));
    let norms: Vec<f64> = (0..m)
        .map(|j| {
            let c = vander.column(j).norm();
            if c > 0.0 {
                c
            } else {
                1.0
            }
        })
        .collect();
    for (j, c) in norms.iter().enumerate() {
        vander.column_mut(j).unscale_mut(*c);
    }
    let rhs = DVector::from_column_slice(y);
    let svd = vander.svd(true, true);
    let tol = f64::EPSILON * n.max(m) as f64 * svd.singular_values.max();
    let sol = svd.solve(&rhs, tol).ok()?;
    let params: Vec<f64> = sol.iter().zip(&norms).map(|(s, c)| s / c).collect();
    if params.iter().any(|p| !p.is_finite()) {
        return None;
    }
    let ss = sum_sq(CurveFamily::Polynomial(degree), &params, t, y);
    Some((params, ss))
}

fn sum_sq(family: CurveFamily, p: &[f64], t: &[f64], y: &[f64]) -> f64 {
    t.iter()
        .zip(y)
        .map(|(&tk, &yk)| (family.evaluate(p, tk) - yk).powi(2))
        .sum()
}

/// Parameter box for a nonlinear family, scaled to the data.
fn parameter_bounds(family: CurveFamily, t: &[f64], y: &[f64]) -> Vec<Bound> {
    let first = t[0];
    let last = t[t.len() - 1];
    let span = last - first;
    let ymax = y.iter().cloned().fold(0.0, f64::max);
    let eps = 1e-9 * ymax.max(1e-300) + f64::MIN_POSITIVE;
    let height = Bound::linear(ymax, 10.0 * ymax + eps);
    let rate = Bound::log(1e-6 / span, 50.0 / span);
    let location = Bound::linear(first - span, last + span);
    match family {
        CurveFamily::Logistic => vec![height, rate, location],
        CurveFamily::Gompertz => vec![height, Bound::log(1e-4, 1e4), rate],
        CurveFamily::Bass => vec![height, rate, rate],
        CurveFamily::GeneralizedRichards => {
            vec![height, rate, location, Bound::log(1e-2, 50.0)]
        }
        CurveFamily::CumulativeNormal => {
            vec![height, location, Bound::log(1e-3 * span, 10.0 * span)]
        }
        CurveFamily::Exponential => vec![
            Bound::log(1e-12 * (ymax + 1e-300), 1e6 * (ymax + 1e-300)),
            rate,
        ],
        CurveFamily::Bertalanffy => vec![height, rate, location],
        CurveFamily::Polynomial(_) | CurveFamily::Linear => unreachable!("linear families"),
    }
}

/// Data-driven first start point.
fn heuristic_start(family: CurveFamily, t: &[f64], y: &[f64]) -> Vec<f64> {
    let first = t[0];
    let last = t[t.len() - 1];
    let span = last - first;
    let ymax = y.iter().cloned().fold(0.0, f64::max);
    let half = {
        let target = 0.5 * ymax;
        let k = y.iter().position(|&v| v >= target).unwrap_or(0);
        if k == 0 {
            first
        } else {
            let (t0, t1, y0, y1) = (t[k - 1], t[k], y[k - 1], y[k]);
            if y1 > y0 {
                t0 + (target - y0) / (y1 - y0) * (t1 - t0)
            } else {
                t1
            }
        }
    };
    let k = 1.2 * ymax;
    match family {
        CurveFamily::Logistic => vec![k, 4.0 / span, half],
        CurveFamily::Gompertz => {
            let y0 = y[0].max(1e-3 * k).min(0.99 * k);
            let b = (k / y0).ln().max(1e-3);
            vec![k, b, 2.0 / span]
        }
        CurveFamily::Bass => vec![k, 0.3 / span, 3.0 / span],
        CurveFamily::GeneralizedRichards => vec![k, 4.0 / span, half, 1.0],
        CurveFamily::CumulativeNormal => vec![k, half, span / 4.0],
        CurveFamily::Exponential => {
            let b = 2.0 / span;
            vec![ymax.max(1e-300) / (b * span).exp_m1(), b]
        }
        CurveFamily::Bertalanffy => vec![k, 1.0 / span, first],
        CurveFamily::Polynomial(_) | CurveFamily::Linear => unreachable!("linear families"),
    }
}

const PRIMES: [usize; 4] = [2, 3, 5, 7];

/// The deterministic start points: one data-driven guess followed by
/// Halton points spread across the parameter box.
fn start_points(family: CurveFamily, t: &[f64], y: &[f64], bounds: &[Bound]) -> Vec<Vec<f64>> {
    let mut starts = vec![heuristic_start(family, t, y)];
    for i in 1..START_COUNT {
        starts.push(
            bounds
                .iter()
                .enumerate()
                .map(|(j, b)| b.at(lm::halton(i, PRIMES[j])))
                .collect(),
        );
    }
    starts
}

fn nonlinear_fit(
    t: &[f64],
    y: &[f64],
    family: CurveFamily,
    options: &FitOptions,
) -> Result<(Vec<f64>, f64), FitFailure> {
    let bounds = parameter_bounds(family, t, y);
    let settings = LmSettings {
        max_iter: options.max_iter,
        step_tol: options.step_tol,
    };
    let model = |p: &[f64], x: f64| family.evaluate(p, x);
    let mut best: Option<(Vec<f64>, f64)> = None;
    for start in start_points(family, t, y, &bounds) {
        if let Some(out) = lm::minimize(model, t, y, &start, &bounds, settings) {
            if best.as_ref().is_none_or(|(_, c)| out.ss_res < *c) {
                best = Some((out.params, out.ss_res));
            }
        }
    }
    best.ok_or(FitFailure::NoConvergence(family))
}

/// Fits every admissible family and picks the best one.
///
/// Fits with `R² > r2_min` are admitted; among them the highest score wins
/// (adjusted or plain `R²` depending on `options.mode`). Adjusted scores
/// within `options.tie_margin` of the best tie with it, plain scores within
/// [`SCORE_TIE`]. Ties go to fewer parameters, then to the higher score,
/// then to the family declaration order. When nothing is admitted the best
/// plain `R²` fit is returned with `low_fit` set. A constant series is
/// described by the flat line.
pub fn select_best_curve(
    times: &[f64],
    values: &[f64],
    options: &FitOptions,
) -> Result<FittedCurve, FitFailure> {
    if values.windows(2).all(|w| w[0] == w[1]) {
        return fit_family(times, values, CurveFamily::Linear, options);
    }
    let fits: Vec<FittedCurve> = CurveFamily::candidates(times.len())
        .into_iter()
        .filter_map(|f| fit_family(times, values, f, options).ok())
        .collect();
    if fits.is_empty() {
        return Err(FitFailure::NoConvergence(CurveFamily::Linear));
    }
    let admitted: Vec<&FittedCurve> = fits.iter().filter(|f| f.r2 > options.r2_min).collect();
    type Score = fn(&FittedCurve) -> f64;
    let (pool, score, margin): (Vec<&FittedCurve>, Score, f64) = if admitted.is_empty() {
        (fits.iter().collect(), |f| f.r2, SCORE_TIE)
    } else {
        match options.mode {
            SelectionMode::Adjusted => (
                admitted,
                |f| f.r2_adjusted,
                options.tie_margin.max(SCORE_TIE),
            ),
            SelectionMode::Plain => (admitted, |f| f.r2, SCORE_TIE),
        }
    };
    let top = pool
        .iter()
        .map(|f| score(f))
        .fold(f64::NEG_INFINITY, f64::max);
    let tied: Vec<&FittedCurve> = pool
        .into_iter()
        .filter(|f| {
            let s = score(f);
            s == top || s >= top - margin
        })
        .collect();
    let fewest = tied
        .iter()
        .map(|f| f.family().parameter_count())
        .min()
        .expect("pool is non-empty");
    let simplest: Vec<&FittedCurve> = tied
        .into_iter()
        .filter(|f| f.family().parameter_count() == fewest)
        .collect();
    let best = simplest
        .iter()
        .map(|f| score(f))
        .fold(f64::NEG_INFINITY, f64::max);
    let chosen = simplest
        .into_iter()
        .filter(|f| {
            let s = score(f);
            s == best || s >= best - SCORE_TIE
        })
        .min_by_key(|f| f.family().order())
        .expect("pool is non-empty");
    let mut chosen = chosen.clone();
    chosen.low_fit = fits.iter().all(|f| f.r2 <= options.r2_min);
    Ok(chosen)
}
