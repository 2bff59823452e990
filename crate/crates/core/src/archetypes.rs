//! Synthetic regions whose entities follow the eight conceptual adoption
//! paths.
//!
//! Each adopting path is a logistic curve on an 11-point yearly axis
//! (`t = 0..=10`). Members of a path are small variations of it: scaled by
//! 0.97, 1 or 1.03 and shifted by 0.1 years. The shapes were tuned so that
//! every member sits well inside its tiers for any entry threshold between
//! 0.1 and 0.6.

use crate::dataset::{AdoptionSeries, RegionDataset, TimeAxis};
use crate::error::Result;
use crate::typology::Path;

/// Number of yearly observations.
pub const YEARS: usize = 11;

/// `(scale, time shift)` of the three members of each path.
pub const VARIANTS: [(f64, f64); 3] = [(0.97, 0.1), (1.0, 0.0), (1.03, -0.1)];

/// Logistic `[K, r, t0]` of each adopting path, in tier order from
/// lagging to leading. Non-adopters are identically zero.
pub const SHAPES: [(Path, [f64; 3]); 7] = [
    (Path::Lagging, [43.886, 1.312, 8.597]),
    (Path::DecliningModerate, [83.3, 2.347, 3.259]),
    (Path::Moderate, [117.391, 1.061, 4.37]),
    (Path::Decelerating, [95.033, 2.992, 0.237]),
    (Path::Leaping, [298.7, 1.429, 9.851]),
    (Path::Accelerating, [188.645, 0.675, 4.924]),
    (Path::Leading, [193.257, 0.374, 4.459]),
];

/// Value of a path's base curve at time `t`.
pub fn archetype_value(path: Path, t: f64) -> f64 {
    match SHAPES.iter().find(|(p, _)| *p == path) {
        Some((_, [k, r, t0])) => k / (1.0 + (-r * (t - t0)).exp()),
        None => 0.0,
    }
}

/// Observations of one member: the base curve scaled by `scale` and
/// evaluated at `t + shift`.
pub fn archetype_series(path: Path, scale: f64, shift: f64) -> Vec<f64> {
    (0..YEARS)
        .map(|k| scale * archetype_value(path, k as f64 + shift))
        .collect()
}

/// Entity id of variant `variant` of `path`, e.g. `leading_1`.
pub fn member_id(path: Path, variant: usize) -> String {
    format!("{path}_{variant}")
}

/// Path encoded in a member id.
pub fn intended_path(entity_id: &str) -> Option<Path> {
    entity_id.rsplit_once('_')?.0.parse().ok()
}

/// A region holding the given `(path, variant)` members on `t = 0..=10`.
pub fn archetype_region(members: &[(Path, usize)]) -> Result<RegionDataset> {
    let axis = TimeAxis::new((0..YEARS).map(|k| k as f64).collect())?;
    let series = members
        .iter()
        .map(|&(path, v)| {
            let (scale, shift) = VARIANTS[v];
            AdoptionSeries::new(member_id(path, v), archetype_series(path, scale, shift))
        })
        .collect();
    RegionDataset::new(axis, series)
}

/// Every variant of every path: 24 entities.
pub fn full_archetype_region() -> Result<RegionDataset> {
    let members: Vec<(Path, usize)> = Path::ALL
        .iter()
        .flat_map(|&p| (0..VARIANTS.len()).map(move |v| (p, v)))
        .collect();
    archetype_region(&members)
}

/// The twelve members of the bundled command-line fixture.
pub const TWELVE: [(Path, usize); 12] = [
    (Path::Leading, 0),
    (Path::Leading, 1),
    (Path::Accelerating, 1),
    (Path::Decelerating, 1),
    (Path::Leaping, 1),
    (Path::Moderate, 0),
    (Path::Moderate, 2),
    (Path::DecliningModerate, 1),
    (Path::DecliningModerate, 2),
    (Path::Lagging, 0),
    (Path::Lagging, 2),
    (Path::NonAdopting, 1),
];
