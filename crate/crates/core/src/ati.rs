//! The adoption-over-time index.
//!
//! An entity's fitted curve is integrated over the timeline and normalised by
//! the regional mean curve's area, so the region scores 100. The normalised
//! area is then pulled toward 100 in proportion to the time the entity spent
//! on the "wrong" side of the mean curve: entities above the mean are
//! penalised for the periods they were below it, entities below the mean are
//! rewarded for the periods they were above it. The periods are delimited by
//! the crossings of the two curves, and the side after each crossing is
//! read from the sign of the slope difference there.

use rayon::prelude::*;

use crate::curvefit::{select_best_curve, Curve, FitOptions, FittedCurve};
use crate::dataset::RegionDataset;
use crate::error::{Error, Result};
use crate::quad;

/// Cells in the uniform sign-change scan.
pub const SCAN_CELLS: usize = 2048;
/// Bisection stops when the bracket is shorter than this fraction of the span.
pub const ROOT_TOL: f64 = 1e-9;
/// Roots this close (relative to the span) to each other or to an end of the
/// domain are merged or dropped.
pub const ROOT_SEPARATION: f64 = 1e-6;
/// Slope differences below this are too flat to give the crossing direction.
pub const SLOPE_TOL: f64 = 1e-9;
/// Look-ahead (relative to the span) used when the slopes are too close.
pub const LOOKAHEAD: f64 = 1e-4;
/// Default relative tolerance for adaptive quadrature.
pub const DEFAULT_QUAD_TOL: f64 = 1e-10;

/// A crossing of an entity curve with the regional mean curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Intersection {
    pub t: f64,
    /// `+1` when the entity rises above the mean after `t`, `-1` when it
    /// drops below.
    pub alpha_sign: i8,
    /// Feedback factor: 1 when the interval after this crossing counts
    /// toward the adjustment, 0 when it does not. Set to 0.5 when the
    /// entity's normalised area is exactly 100, where feedback is skipped.
    pub s_factor: f64,
}

/// Crossings found by the scan, plus a flag for stretches where the two
/// curves coincide exactly.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CrossingScan {
    pub crossings: Vec<(f64, i8)>,
    pub coincident: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AtiResult {
    /// Area under the entity curve.
    pub a_i: f64,
    /// `100 * a_i / a_m`.
    pub a_norm: f64,
    /// `a_norm - 100`.
    pub delta: f64,
    pub intersections: Vec<Intersection>,
    /// Feedback for the interval before the first crossing.
    pub feedback_initial: f64,
    /// Feedback for the interval after each crossing.
    pub feedback_terms: Vec<f64>,
    pub ati: f64,
    /// The curves coincide on some stretch of the timeline.
    pub coincident: bool,
}

impl AtiResult {
    /// Result for an entity that never adopted.
    pub fn non_adopter() -> Self {
        Self {
            a_i: 0.0,
            a_norm: 0.0,
            delta: -100.0,
            intersections: Vec::new(),
            feedback_initial: 0.0,
            feedback_terms: Vec::new(),
            ati: 0.0,
            coincident: false,
        }
    }

    /// Sum of the feedback durations.
    pub fn feedback_duration(&self) -> f64 {
        self.feedback_initial + self.feedback_terms.iter().sum::<f64>()
    }
}

/// Area under `curve` over its domain. Polynomials are integrated exactly,
/// everything else by adaptive quadrature.
pub fn compute_auc(curve: &Curve, rel_tol: f64) -> Result<f64> {
    let (a, b) = curve.domain();
    if let (Some(hi), Some(lo)) = (curve.antiderivative(b), curve.antiderivative(a)) {
        let area = hi - lo;
        return if area.is_finite() {
            Ok(area)
        } else {
            Err(Error::NonFinite(b))
        };
    }
    quad::integrate(|t| curve.value(t), a, b, rel_tol)
}

fn sign(x: f64) -> i8 {
    if x > 0.0 {
        1
    } else if x < 0.0 {
        -1
    } else {
        0
    }
}

/// Locates every sign change of `c_i - c_m` strictly inside the shared
/// domain.
pub fn scan_crossings(c_i: &Curve, c_m: &Curve) -> CrossingScan {
    let (a, b) = c_m.domain();
    let span = b - a;
    let g = |t: f64| c_i.value(t) - c_m.value(t);
    let grid: Vec<f64> = (0..=SCAN_CELLS)
        .map(|k| {
            if k == SCAN_CELLS {
                b
            } else {
                a + span * k as f64 / SCAN_CELLS as f64
            }
        })
        .collect();
    let signs: Vec<i8> = grid.iter().map(|&t| sign(g(t))).collect();

    let mut raw: Vec<(f64, i8)> = Vec::new();
    let mut coincident = false;
    let mut prev: Option<usize> = None;
    for k in 0..grid.len() {
        if signs[k] == 0 {
            continue;
        }
        let zeros_before = match prev {
            Some(p) => k - p - 1,
            None => k,
        };
        if zeros_before >= 2 {
            coincident = true;
        }
        if let Some(p) = prev {
            if signs[p] != signs[k] {
                match zeros_before {
                    0 => raw.push((bisect(&g, grid[p], grid[k], signs[p], span), signs[k])),
                    1 => raw.push((grid[p + 1], signs[k])),
                    _ => {}
                }
            }
        }
        prev = Some(k);
    }
    if let Some(p) = prev {
        if grid.len() - p > 2 {
            coincident = true;
        }
    } else {
        coincident = true;
    }

    let sep = ROOT_SEPARATION * span;
    raw.retain(|&(t, _)| t - a > sep && b - t > sep);

    // Crossings closer than `sep` collapse: an odd cluster is one crossing,
    // an even cluster is a touch.
    let mut crossings = Vec::new();
    let mut i = 0;
    while i < raw.len() {
        let mut j = i + 1;
        while j < raw.len() && raw[j].0 - raw[j - 1].0 < sep {
            j += 1;
        }
        if (j - i) % 2 == 1 {
            crossings.push((raw[i].0, raw[j - 1].1));
        }
        i = j;
    }
    CrossingScan {
        crossings,
        coincident,
    }
}

fn bisect<G: Fn(f64) -> f64>(g: &G, mut lo: f64, mut hi: f64, lo_sign: i8, span: f64) -> f64 {
    let tol = ROOT_TOL * span;
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let s = sign(g(mid));
        if s == 0 {
            return mid;
        }
        if s == lo_sign {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Crossings of `c_i` with `c_m` and the direction of each.
///
/// The direction is the sign of `c_i' - c_m'` at the crossing; when the
/// slopes agree to within [`SLOPE_TOL`] it is the side `c_i` is on a short
/// distance later. Feedback factors are left at 0 here and filled in by
/// [`compute_ati`].
pub fn find_intersections(c_i: &Curve, c_m: &Curve) -> Vec<Intersection> {
    let (a, b) = c_m.domain();
    let span = b - a;
    scan_crossings(c_i, c_m)
        .crossings
        .into_iter()
        .map(|(t, side_after)| Intersection {
            t,
            alpha_sign: crossing_direction(c_i, c_m, t, span, side_after),
            s_factor: 0.0,
        })
        .collect()
}

fn crossing_direction(c_i: &Curve, c_m: &Curve, t: f64, span: f64, side_after: i8) -> i8 {
    let slope = c_i.derivative(t) - c_m.derivative(t);
    if slope.abs() >= SLOPE_TOL {
        return sign(slope);
    }
    let ahead = t + LOOKAHEAD * span;
    match sign(c_i.value(ahead) - c_m.value(ahead)) {
        0 => side_after,
        s => s,
    }
}

/// `(1 - sgn(sin alpha) sgn(delta)) / 2`: 1 when the interval after the
/// crossing is spent on the wrong side of the mean.
pub fn feedback_factor(alpha_sign: i8, delta: f64) -> f64 {
    (1.0 - f64::from(alpha_sign.signum()) * f64::from(sign(delta))) / 2.0
}

/// Index of one entity curve against the regional mean curve with area
/// `a_m`.
pub fn compute_ati(c_i: &Curve, c_m: &Curve, a_m: f64, rel_tol: f64) -> Result<AtiResult> {
    if !(a_m > 0.0) || !a_m.is_finite() {
        return Err(Error::DegenerateRegion(format!(
            "regional mean area must be positive, got {a_m}"
        )));
    }
    let a_i = compute_auc(c_i, rel_tol)?;
    let a_norm = a_i / a_m * 100.0;
    let delta = a_norm - 100.0;
    let scan = scan_crossings(c_i, c_m);
    let (first, last) = c_m.domain();
    let span = last - first;
    let mut intersections: Vec<Intersection> = scan
        .crossings
        .iter()
        .map(|&(t, side)| Intersection {
            t,
            alpha_sign: crossing_direction(c_i, c_m, t, span, side),
            s_factor: 0.0,
        })
        .collect();
    for x in &mut intersections {
        x.s_factor = feedback_factor(x.alpha_sign, delta);
    }

    if intersections.is_empty() || delta == 0.0 {
        return Ok(AtiResult {
            a_i,
            a_norm,
            delta,
            intersections,
            feedback_initial: 0.0,
            feedback_terms: Vec::new(),
            ati: a_norm,
            coincident: scan.coincident,
        });
    }

    let feedback_initial = (intersections[0].t - first) * (1.0 - intersections[0].s_factor);
    let feedback_terms: Vec<f64> = intersections
        .iter()
        .enumerate()
        .map(|(j, x)| {
            let next = intersections.get(j + 1).map_or(last, |n| n.t);
            (next - x.t) * x.s_factor
        })
        .collect();
    let duration = feedback_initial + feedback_terms.iter().sum::<f64>();
    let ati = a_norm - duration / span * delta;
    Ok(AtiResult {
        a_i,
        a_norm,
        delta,
        intersections,
        feedback_initial,
        feedback_terms,
        ati,
        coincident: scan.coincident,
    })
}

/// One entity's fitted curve and index.
#[derive(Debug, Clone, PartialEq)]
pub struct EntityAti {
    pub entity_id: String,
    pub fit: FittedCurve,
    pub result: AtiResult,
}

/// Index results for a whole region.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionAti {
    pub mean_fit: FittedCurve,
    pub a_m: f64,
    pub entities: Vec<EntityAti>,
}

/// Fits every curve in the region and computes each entity's index.
pub fn compute_region_ati(
    dataset: &RegionDataset,
    fit: &FitOptions,
    quad_rel_tol: f64,
) -> Result<RegionAti> {
    let times = dataset.axis().points();
    let mean_fit = select_best_curve(times, dataset.mean_series(), fit)
        .map_err(|e| Error::NoFit(format!("regional mean ({e})")))?;
    let fits: Vec<FittedCurve> = dataset
        .series()
        .par_iter()
        .map(|s| {
            select_best_curve(times, &s.values, fit)
                .map_err(|e| Error::NoFit(format!("{} ({e})", s.entity_id)))
        })
        .collect::<Result<_>>()?;
    region_ati_from_fits(dataset, mean_fit, fits, quad_rel_tol)
}

/// Computes the index from already fitted curves (one per entity, in
/// dataset order).
pub fn region_ati_from_fits(
    dataset: &RegionDataset,
    mean_fit: FittedCurve,
    fits: Vec<FittedCurve>,
    quad_rel_tol: f64,
) -> Result<RegionAti> {
    if fits.len() != dataset.len() {
        return Err(Error::Config(format!(
            "{} fitted curves for {} entities",
            fits.len(),
            dataset.len()
        )));
    }
    let a_m = compute_auc(&mean_fit.curve, quad_rel_tol)?;
    if !(a_m > 0.0) {
        return Err(Error::DegenerateRegion(format!(
            "area under the regional mean curve is {a_m}"
        )));
    }
    let entities = dataset
        .series()
        .par_iter()
        .zip(fits)
        .map(|(s, fit)| {
            let result = if s.is_zero() {
                AtiResult::non_adopter()
            } else {
                compute_ati(&fit.curve, &mean_fit.curve, a_m, quad_rel_tol).map_err(|e| {
                    Error::Entity {
                        entity: s.entity_id.clone(),
                        message: e.to_string(),
                    }
                })?
            };
            Ok(EntityAti {
                entity_id: s.entity_id.clone(),
                fit,
                result,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(RegionAti {
        mean_fit,
        a_m,
        entities,
    })
}
