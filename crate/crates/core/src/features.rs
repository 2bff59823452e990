//! Entry time, latest adoption intensity and latest trajectory.

use std::fmt;
use std::str::FromStr;

use crate::ati::AtiResult;
use crate::dataset::{AdoptionSeries, RegionDataset, TimeAxis};
use crate::error::{Error, Result};
use crate::stats::{moments, MomentSummary};

/// Threshold fractions tried by [`select_entry_threshold`].
pub const THRESHOLD_CANDIDATES: [f64; 6] = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6];

/// Minimum share of entities that must reach a threshold for it to qualify.
pub const MIN_COVERAGE: f64 = 0.6;

/// Scores within this distance tie during threshold selection.
const SCORE_TIE: f64 = 1e-12;

/// First time an entity reaches `threshold_fraction` of the regional mean
/// intensity, or `None` if it never does.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EntryTime {
    pub value: Option<f64>,
    pub threshold_fraction: f64,
}

/// Direction of an entity relative to the mean curve after the last
/// crossing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Trajectory {
    Uphill,
    Downhill,
    Stable,
    /// The entity never adopted.
    Null,
}

impl Trajectory {
    pub const ALL: [Trajectory; 4] = [
        Trajectory::Uphill,
        Trajectory::Downhill,
        Trajectory::Stable,
        Trajectory::Null,
    ];
}

impl fmt::Display for Trajectory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Trajectory::Uphill => "uphill",
            Trajectory::Downhill => "downhill",
            Trajectory::Stable => "stable",
            Trajectory::Null => "null",
        })
    }
}

impl FromStr for Trajectory {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "uphill" => Trajectory::Uphill,
            "downhill" => Trajectory::Downhill,
            "stable" => Trajectory::Stable,
            "null" => Trajectory::Null,
            other => return Err(Error::Config(format!("unknown trajectory `{other}`"))),
        })
    }
}

/// The four features of one entity.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub entity_id: String,
    pub ati: f64,
    pub entry: EntryTime,
    pub lai: f64,
    pub trajectory: Trajectory,
}

/// Entry time on the raw series, both series linearly interpolated between
/// observations.
///
/// Reaching the threshold also requires positive adoption, so an entity that
/// never adopted has no entry time even where the mean is zero.
pub fn entry_time(
    entity: &AdoptionSeries,
    mean_series: &[f64],
    axis: &TimeAxis,
    fraction: f64,
) -> EntryTime {
    let t = axis.points();
    let a = &entity.values;
    let g: Vec<f64> = a
        .iter()
        .zip(mean_series)
        .map(|(ai, am)| ai - fraction * am)
        .collect();
    let found = |value| EntryTime {
        value: Some(value),
        threshold_fraction: fraction,
    };
    if a[0] > 0.0 && g[0] >= 0.0 {
        return found(t[0]);
    }
    for k in 0..t.len() - 1 {
        let (g0, g1) = (g[k], g[k + 1]);
        let (a0, a1) = (a[k], a[k + 1]);
        if a0 == 0.0 && a1 == 0.0 {
            continue;
        }
        if g0 >= 0.0 && g1 >= 0.0 {
            // positive adoption starts right after t[k]
            return found(t[k]);
        }
        if g0 < 0.0 && g1 >= 0.0 {
            let s = g0 / (g0 - g1);
            let at = a0 + s * (a1 - a0);
            if at > 0.0 {
                return found(t[k] + s * (t[k + 1] - t[k]));
            }
            if a1 > 0.0 {
                return found(t[k + 1]);
            }
        }
    }
    EntryTime {
        value: None,
        threshold_fraction: fraction,
    }
}

/// Last observed intensity as a percentage of the mean's last observed
/// intensity.
pub fn latest_adoption_intensity(entity: &AdoptionSeries, mean_series: &[f64]) -> Result<f64> {
    let mean_last = *mean_series.last().expect("non-empty series");
    if !(mean_last > 0.0) {
        return Err(Error::DegenerateRegion(
            "regional mean intensity at the last time point is zero".into(),
        ));
    }
    Ok(entity.last() / mean_last * 100.0)
}

/// Intensity at an arbitrary time relative to the mean at that time.
pub fn adoption_intensity_at(
    entity: &AdoptionSeries,
    mean_series: &[f64],
    axis: &TimeAxis,
    t: f64,
) -> Result<f64> {
    let mean = crate::dataset::interpolate(axis.points(), mean_series, t);
    if !(mean > 0.0) {
        return Err(Error::DegenerateRegion(format!(
            "regional mean intensity at t = {t} is zero"
        )));
    }
    Ok(crate::dataset::interpolate(axis.points(), &entity.values, t) / mean * 100.0)
}

/// Null for non-adopters, Stable without crossings, otherwise the direction
/// of the last crossing.
pub fn latest_trajectory(result: &AtiResult) -> Trajectory {
    if result.ati == 0.0 {
        return Trajectory::Null;
    }
    match result.intersections.last() {
        None => Trajectory::Stable,
        Some(x) if x.alpha_sign > 0 => Trajectory::Uphill,
        Some(_) => Trajectory::Downhill,
    }
}

/// Entry-time distribution for one candidate threshold.
#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdDiagnostics {
    pub fraction: f64,
    /// Share of entities that reach the threshold.
    pub coverage: f64,
    pub skewness: f64,
    pub excess_kurtosis: f64,
    pub sd: f64,
}

impl ThresholdDiagnostics {
    pub fn score(&self) -> f64 {
        self.skewness.abs() + self.excess_kurtosis.abs()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdSelection {
    pub fraction: f64,
    /// No candidate reached the coverage floor; the best-covered one was
    /// taken.
    pub forced: bool,
    pub diagnostics: Vec<ThresholdDiagnostics>,
}

/// Picks the entry threshold whose entry-time distribution is closest to
/// normal (smallest `|skewness| + |excess kurtosis|`) among candidates
/// reached by at least [`MIN_COVERAGE`] of the entities. Ties go to the
/// larger spread and then to the smaller fraction.
pub fn select_entry_threshold(
    dataset: &RegionDataset,
    candidates: &[f64],
) -> Result<ThresholdSelection> {
    if dataset.len() < 2 {
        return Err(Error::TooFewEntities(dataset.len()));
    }
    if candidates.is_empty() {
        return Err(Error::Config("no threshold candidates".into()));
    }
    let mut diagnostics = Vec::with_capacity(candidates.len());
    for &fraction in candidates {
        if !(fraction > 0.0 && fraction < 1.0) {
            return Err(Error::Config(format!(
                "threshold fraction must lie in (0, 1), got {fraction}"
            )));
        }
        let entries: Vec<f64> = dataset
            .series()
            .iter()
            .filter_map(|s| entry_time(s, dataset.mean_series(), dataset.axis(), fraction).value)
            .collect();
        let coverage = entries.len() as f64 / dataset.len() as f64;
        let m = if entries.len() >= 2 {
            moments(&entries)?
        } else {
            MomentSummary::default()
        };
        diagnostics.push(ThresholdDiagnostics {
            fraction,
            coverage,
            skewness: m.skewness,
            excess_kurtosis: m.excess_kurtosis,
            sd: m.sd,
        });
    }

    let eligible: Vec<&ThresholdDiagnostics> = diagnostics
        .iter()
        .filter(|d| d.coverage >= MIN_COVERAGE)
        .collect();
    let (fraction, forced) = if eligible.is_empty() {
        let best = diagnostics
            .iter()
            .max_by(|a, b| {
                a.coverage
                    .total_cmp(&b.coverage)
                    .then(b.fraction.total_cmp(&a.fraction))
            })
            .expect("non-empty");
        (best.fraction, true)
    } else {
        let low = eligible
            .iter()
            .map(|d| d.score())
            .fold(f64::INFINITY, f64::min);
        let tied: Vec<_> = eligible
            .into_iter()
            .filter(|d| d.score() <= low + SCORE_TIE)
            .collect();
        let top_sd = tied.iter().map(|d| d.sd).fold(f64::NEG_INFINITY, f64::max);
        let best = tied
            .into_iter()
            .filter(|d| d.sd >= top_sd - SCORE_TIE * top_sd.abs().max(1.0))
            .min_by(|a, b| a.fraction.total_cmp(&b.fraction))
            .expect("non-empty");
        (best.fraction, false)
    };
    Ok(ThresholdSelection {
        fraction,
        forced,
        diagnostics,
    })
}

/// Features of every entity, given the region's index results (in dataset
/// order).
pub fn extract_features(
    dataset: &RegionDataset,
    results: &[AtiResult],
    fraction: f64,
) -> Result<Vec<FeatureVector>> {
    if results.len() != dataset.len() {
        return Err(Error::Config(format!(
            "{} index results for {} entities",
            results.len(),
            dataset.len()
        )));
    }
    dataset
        .series()
        .iter()
        .zip(results)
        .map(|(s, r)| {
            Ok(FeatureVector {
                entity_id: s.entity_id.clone(),
                ati: r.ati,
                entry: entry_time(s, dataset.mean_series(), dataset.axis(), fraction),
                lai: latest_adoption_intensity(s, dataset.mean_series())?,
                trajectory: latest_trajectory(r),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ati::Intersection;

    fn axis3() -> TimeAxis {
        TimeAxis::new(vec![0.0, 1.0, 2.0]).unwrap()
    }

    #[test]
    fn entry_by_interpolation() {
        let e = AdoptionSeries::new("e", vec![1.0, 5.0, 9.0]);
        let entry = entry_time(&e, &[10.0, 20.0, 30.0], &axis3(), 0.2);
        assert_eq!(entry.value, Some(0.5));
    }

    #[test]
    fn entry_never_for_zero_series() {
        let e = AdoptionSeries::new("e", vec![0.0; 3]);
        assert_eq!(
            entry_time(&e, &[0.0, 20.0, 30.0], &axis3(), 0.2).value,
            None
        );
        assert_eq!(
            entry_time(&e, &[10.0, 20.0, 30.0], &axis3(), 0.2).value,
            None
        );
    }

    #[test]
    fn entry_at_first_point() {
        let e = AdoptionSeries::new("e", vec![5.0, 5.0, 5.0]);
        assert_eq!(
            entry_time(&e, &[10.0, 20.0, 30.0], &axis3(), 0.2).value,
            Some(0.0)
        );
    }

    #[test]
    fn entry_when_mean_starts_at_zero() {
        let e = AdoptionSeries::new("e", vec![0.0, 1.0, 9.0]);
        // g = a - 0.5 m = (0, -4, -1): never reached
        assert_eq!(
            entry_time(&e, &[0.0, 10.0, 20.0], &axis3(), 0.5).value,
            None
        );
        // g = a - 0.05 m = (0, 0.5, 8): adoption starts right after t = 0
        assert_eq!(
            entry_time(&e, &[0.0, 10.0, 20.0], &axis3(), 0.05).value,
            Some(0.0)
        );
    }

    #[test]
    fn lai_examples() {
        let mean = [5.0, 10.0, 20.0];
        let same = AdoptionSeries::new("a", vec![1.0, 2.0, 20.0]);
        assert_eq!(latest_adoption_intensity(&same, &mean).unwrap(), 100.0);
        let high = AdoptionSeries::new("b", vec![1.0, 2.0, 30.0]);
        assert_eq!(latest_adoption_intensity(&high, &mean).unwrap(), 150.0);
        let zero = AdoptionSeries::new("c", vec![1.0, 2.0, 0.0]);
        assert_eq!(latest_adoption_intensity(&zero, &mean).unwrap(), 0.0);
        assert!(latest_adoption_intensity(&zero, &[1.0, 1.0, 0.0]).is_err());
    }

    fn result(ati: f64, signs: &[i8]) -> AtiResult {
        AtiResult {
            a_i: 1.0,
            a_norm: ati,
            delta: ati - 100.0,
            intersections: signs
                .iter()
                .enumerate()
                .map(|(j, &s)| Intersection {
                    t: 5.0 + j as f64,
                    alpha_sign: s,
                    s_factor: 0.0,
                })
                .collect(),
            feedback_initial: 0.0,
            feedback_terms: vec![],
            ati,
            coincident: false,
        }
    }

    #[test]
    fn trajectory_rules() {
        assert_eq!(latest_trajectory(&result(116.0, &[1])), Trajectory::Uphill);
        assert_eq!(
            latest_trajectory(&result(90.0, &[1, -1])),
            Trajectory::Downhill
        );
        assert_eq!(latest_trajectory(&result(120.0, &[])), Trajectory::Stable);
        assert_eq!(latest_trajectory(&result(0.0, &[])), Trajectory::Null);
    }

    #[test]
    fn identical_entities_pick_smallest_fraction() {
        let axis = TimeAxis::new(vec![0.0, 1.0, 2.0, 3.0]).unwrap();
        let series = (0..4)
            .map(|i| AdoptionSeries::new(format!("e{i}"), vec![0.0, 1.0, 3.0, 6.0]))
            .collect();
        let d = RegionDataset::new(axis, series).unwrap();
        let sel = select_entry_threshold(&d, &THRESHOLD_CANDIDATES).unwrap();
        assert_eq!(sel.fraction, 0.1);
        assert!(!sel.forced);
        for diag in &sel.diagnostics {
            assert_eq!(diag.coverage, 1.0);
            assert_eq!(diag.sd, 0.0);
        }
    }

    #[test]
    fn forced_when_nobody_reaches() {
        // only one of three entities ever adopts
        let axis = TimeAxis::new(vec![0.0, 1.0, 2.0]).unwrap();
        let d = RegionDataset::new(
            axis,
            vec![
                AdoptionSeries::new("a", vec![0.0, 3.0, 9.0]),
                AdoptionSeries::new("b", vec![0.0; 3]),
                AdoptionSeries::new("c", vec![0.0; 3]),
            ],
        )
        .unwrap();
        let sel = select_entry_threshold(&d, &THRESHOLD_CANDIDATES).unwrap();
        assert!(sel.forced);
        assert_eq!(sel.fraction, 0.1);
    }
}
