//! Path transitions between the two halves of the timeline.

use rayon::prelude::*;

use crate::ati::{compute_ati, compute_auc, AtiResult, RegionAti};
use crate::dataset::{interpolate, AdoptionSeries, RegionDataset, TimeAxis};
use crate::error::{Error, Result};
use crate::features::{adoption_intensity_at, latest_trajectory, EntryTime, FeatureVector};
use crate::stats::median;
use crate::typology::{classify_region, EntityClass, Path};

/// Features recomputed over one window of the timeline.
#[derive(Debug, Clone, PartialEq)]
pub struct HalfWindow {
    pub start: f64,
    pub end: f64,
    /// Area under the regional mean curve within the window.
    pub a_m: f64,
    /// Index results in dataset order.
    pub results: Vec<AtiResult>,
    pub features: Vec<FeatureVector>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SplitFeatures {
    pub split_time: f64,
    pub halves: [HalfWindow; 2],
}

/// The raw series is zero everywhere on `[a, b]`.
fn zero_on(series: &AdoptionSeries, axis: &TimeAxis, a: f64, b: f64) -> bool {
    let t = axis.points();
    interpolate(t, &series.values, a) == 0.0
        && interpolate(t, &series.values, b) == 0.0
        && t.iter()
            .zip(&series.values)
            .filter(|(tk, _)| (a..=b).contains(*tk))
            .all(|(_, v)| *v == 0.0)
}

/// Recomputes the features on `[t_first, split_time]` and
/// `[split_time, t_last]`.
///
/// The full-timeline curves are restricted to each window rather than refit,
/// so only crossings inside a window feed its index. Entry times carry over
/// from `full` unchanged, except that an entity with no adoption at all in a
/// window has no entry there. The first window's LAI is taken at the split
/// time from the interpolated raw series; the second window's is the
/// full-timeline LAI.
pub fn split_features(
    dataset: &RegionDataset,
    region: &RegionAti,
    full: &[FeatureVector],
    split_time: f64,
    quad_rel_tol: f64,
) -> Result<SplitFeatures> {
    let axis = dataset.axis();
    let (first, last) = (axis.first(), axis.last());
    if !(split_time > first && split_time < last) {
        return Err(Error::SplitOutOfDomain {
            split: split_time,
            start: first,
            end: last,
        });
    }
    if full.len() != dataset.len() || region.entities.len() != dataset.len() {
        return Err(Error::Config(
            "features and index results must cover every entity".into(),
        ));
    }
    let window = |start: f64, end: f64, second: bool| -> Result<HalfWindow> {
        let c_m = region.mean_fit.curve.restrict(start, end)?;
        let a_m = compute_auc(&c_m, quad_rel_tol)?;
        if !(a_m > 0.0) {
            return Err(Error::DegenerateRegion(format!(
                "area under the regional mean curve on [{start}, {end}] is {a_m}"
            )));
        }
        let rows: Vec<(AtiResult, FeatureVector)> = dataset
            .series()
            .par_iter()
            .zip(&region.entities)
            .zip(full)
            .map(|((s, e), f)| {
                let idle = zero_on(s, axis, start, end);
                let result = if idle {
                    AtiResult::non_adopter()
                } else {
                    let c_i = e.fit.curve.restrict(start, end)?;
                    compute_ati(&c_i, &c_m, a_m, quad_rel_tol).map_err(|err| Error::Entity {
                        entity: s.entity_id.clone(),
                        message: err.to_string(),
                    })?
                };
                let lai = if second {
                    f.lai
                } else {
                    adoption_intensity_at(s, dataset.mean_series(), axis, end)?
                };
                let entry = if idle {
                    EntryTime {
                        value: None,
                        ..f.entry
                    }
                } else {
                    f.entry
                };
                let features = FeatureVector {
                    entity_id: s.entity_id.clone(),
                    ati: result.ati,
                    entry,
                    lai,
                    trajectory: latest_trajectory(&result),
                };
                Ok((result, features))
            })
            .collect::<Result<_>>()?;
        let (results, features) = rows.into_iter().unzip();
        Ok(HalfWindow {
            start,
            end,
            a_m,
            results,
            features,
        })
    };
    Ok(SplitFeatures {
        split_time,
        halves: [
            window(first, split_time, false)?,
            window(split_time, last, true)?,
        ],
    })
}

/// Change of one entity's path between the halves.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TransitionRecord {
    pub entity_id: String,
    pub first: Path,
    pub second: Path,
    /// `tier(second) - tier(first)`.
    pub magnitude: i8,
}

impl TransitionRecord {
    pub fn new(entity_id: impl Into<String>, first: Path, second: Path) -> Self {
        Self {
            entity_id: entity_id.into(),
            first,
            second,
            magnitude: second.tier_order() as i8 - first.tier_order() as i8,
        }
    }
}

/// Per-half classes and the transition of every entity feasible in both
/// halves.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionAnalysis {
    pub split: SplitFeatures,
    pub classes: [Vec<EntityClass>; 2],
    pub records: Vec<TransitionRecord>,
}

pub fn analyse_transitions(
    dataset: &RegionDataset,
    region: &RegionAti,
    full: &[FeatureVector],
    split_time: f64,
    quad_rel_tol: f64,
) -> Result<TransitionAnalysis> {
    let split = split_features(dataset, region, full, split_time, quad_rel_tol)?;
    let first = classify_region(&split.halves[0].features);
    let second = classify_region(&split.halves[1].features);
    let records = first
        .iter()
        .zip(&second)
        .filter_map(|(a, b)| {
            Some(TransitionRecord::new(
                a.entity_id.clone(),
                a.path()?,
                b.path()?,
            ))
        })
        .collect();
    Ok(TransitionAnalysis {
        split,
        classes: [first, second],
        records,
    })
}

/// Counts of first-half path (row) against second-half path (column), both
/// in tier order.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionMatrix {
    pub counts: [[usize; 8]; 8],
    /// Counts as a percentage of all records.
    pub percentages: [[f64; 8]; 8],
}

impl TransitionMatrix {
    pub fn total(&self) -> usize {
        self.counts.iter().flatten().sum()
    }

    /// Records per first-half path.
    pub fn row_totals(&self) -> [usize; 8] {
        self.counts.map(|row| row.iter().sum())
    }

    /// Records per second-half path.
    pub fn column_totals(&self) -> [usize; 8] {
        let mut out = [0; 8];
        for row in &self.counts {
            for (o, c) in out.iter_mut().zip(row) {
                *o += c;
            }
        }
        out
    }
}

pub fn transition_matrix(records: &[TransitionRecord]) -> TransitionMatrix {
    let mut counts = [[0usize; 8]; 8];
    for r in records {
        counts[r.first.tier_order() as usize][r.second.tier_order() as usize] += 1;
    }
    let n = records.len();
    let percentages = counts.map(|row| {
        row.map(|c| {
            if n == 0 {
                0.0
            } else {
                c as f64 / n as f64 * 100.0
            }
        })
    });
    TransitionMatrix {
        counts,
        percentages,
    }
}

/// Histogram of signed transition magnitudes.
#[derive(Debug, Clone, PartialEq)]
pub struct MagnitudeDistribution {
    /// `counts[m + 7]` holds the number of records with magnitude `m`.
    pub counts: [usize; 15],
    pub upward: f64,
    pub downward: f64,
    pub unchanged: f64,
}

impl MagnitudeDistribution {
    pub fn count(&self, magnitude: i8) -> usize {
        self.counts[(magnitude + 7) as usize]
    }
}

pub fn magnitude_distribution(records: &[TransitionRecord]) -> MagnitudeDistribution {
    let mut counts = [0usize; 15];
    for r in records {
        counts[(r.magnitude + 7) as usize] += 1;
    }
    let n = records.len() as f64;
    let share = |range: std::ops::Range<usize>| {
        if records.is_empty() {
            0.0
        } else {
            counts[range].iter().sum::<usize>() as f64 / n
        }
    };
    MagnitudeDistribution {
        upward: share(8..15),
        downward: share(0..7),
        unchanged: share(7..8),
        counts,
    }
}

/// Median intensity over time of each path's members, in tier order. Paths
/// without members are left out.
pub fn path_median_curves(
    dataset: &RegionDataset,
    classes: &[EntityClass],
) -> Vec<(Path, Vec<f64>)> {
    Path::ALL
        .iter()
        .filter_map(|&path| {
            let members: Vec<&AdoptionSeries> = classes
                .iter()
                .filter(|c| c.path() == Some(path))
                .filter_map(|c| dataset.get(&c.entity_id))
                .collect();
            if members.is_empty() {
                return None;
            }
            let curve = (0..dataset.axis().len())
                .map(|k| median(&members.iter().map(|s| s.values[k]).collect::<Vec<_>>()))
                .collect();
            Some((path, curve))
        })
        .collect()
}
