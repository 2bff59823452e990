//! Ordinal tiers, adoption profiles, feasibility filtering and path
//! assignment.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::features::{FeatureVector, Trajectory};

/// Half-width of the Medium band in standard deviations.
pub const BAND_HALF_WIDTH: f64 = 0.44;

/// Tier of ATI or LAI.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Tier {
    Zero,
    Low,
    Medium,
    High,
}

/// Tier of the entry time. `Null` means the threshold was never reached.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum EntryTier {
    Null,
    Early,
    Middle,
    Late,
}

impl Tier {
    pub const ALL: [Tier; 4] = [Tier::Zero, Tier::Low, Tier::Medium, Tier::High];
}

impl EntryTier {
    pub const ALL: [EntryTier; 4] = [
        EntryTier::Null,
        EntryTier::Early,
        EntryTier::Middle,
        EntryTier::Late,
    ];
}

macro_rules! named_enum {
    ($ty:ident { $($variant:ident => $name:literal),+ $(,)? }) => {
        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(match self { $($ty::$variant => $name),+ })
            }
        }

        impl FromStr for $ty {
            type Err = Error;

            fn from_str(s: &str) -> Result<Self> {
                match s {
                    $($name => Ok($ty::$variant),)+
                    other => Err(Error::Config(format!(
                        concat!("unknown ", stringify!($ty), " `{}`"),
                        other
                    ))),
                }
            }
        }
    };
}

named_enum!(Tier { Zero => "zero", Low => "low", Medium => "medium", High => "high" });
named_enum!(EntryTier { Null => "null", Early => "early", Middle => "middle", Late => "late" });

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Band {
    Absent,
    Below,
    Within,
    Above,
}

/// Places each present value relative to `mean ± 0.44 sd` of the present
/// values (population SD, band inclusive). With fewer than two present
/// values everything present is `Within`.
fn bands(values: &[Option<f64>]) -> Vec<Band> {
    let present: Vec<f64> = values.iter().flatten().copied().collect();
    if present.len() < 2 {
        return values
            .iter()
            .map(|v| {
                if v.is_some() {
                    Band::Within
                } else {
                    Band::Absent
                }
            })
            .collect();
    }
    let n = present.len() as f64;
    let mean = present.iter().sum::<f64>() / n;
    let sd = (present.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n).sqrt();
    let half = BAND_HALF_WIDTH * sd;
    // absorbs rounding in mean and sd so that exact band edges stay inside
    let eps = 1e-12 * mean.abs().max(sd);
    values
        .iter()
        .map(|v| match v {
            None => Band::Absent,
            Some(v) if *v < mean - half - eps => Band::Below,
            Some(v) if *v > mean + half + eps => Band::Above,
            Some(_) => Band::Within,
        })
        .collect()
}

/// Tiers of a feature whose zero entries (marked in `zero_mask`) get their
/// own tier and are left out of the band statistics.
pub fn assign_tiers(values: &[f64], zero_mask: &[bool]) -> Vec<Tier> {
    assert_eq!(values.len(), zero_mask.len(), "mask length mismatch");
    let opts: Vec<Option<f64>> = values
        .iter()
        .zip(zero_mask)
        .map(|(&v, &z)| (!z).then_some(v))
        .collect();
    bands(&opts)
        .into_iter()
        .map(|b| match b {
            Band::Absent => Tier::Zero,
            Band::Below => Tier::Low,
            Band::Within => Tier::Medium,
            Band::Above => Tier::High,
        })
        .collect()
}

/// Entry tiers; entities without an entry time are `Null`.
pub fn assign_entry_tiers(entries: &[Option<f64>]) -> Vec<EntryTier> {
    bands(entries)
        .into_iter()
        .map(|b| match b {
            Band::Absent => EntryTier::Null,
            Band::Below => EntryTier::Early,
            Band::Within => EntryTier::Middle,
            Band::Above => EntryTier::Late,
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct AdoptionProfile {
    pub ati: Tier,
    pub entry: EntryTier,
    pub trajectory: Trajectory,
    pub lai: Tier,
}

impl AdoptionProfile {
    pub fn new(ati: Tier, entry: EntryTier, trajectory: Trajectory, lai: Tier) -> Self {
        Self {
            ati,
            entry,
            trajectory,
            lai,
        }
    }

    /// All 256 tier combinations, in a fixed order.
    pub fn all() -> impl Iterator<Item = AdoptionProfile> {
        Tier::ALL.into_iter().flat_map(|ati| {
            EntryTier::ALL.into_iter().flat_map(move |entry| {
                Trajectory::ALL.into_iter().flat_map(move |trajectory| {
                    Tier::ALL
                        .into_iter()
                        .map(move |lai| AdoptionProfile::new(ati, entry, trajectory, lai))
                })
            })
        })
    }

    /// For adopters, a missing entry counts as late and a zero LAI as low.
    fn normalised(self) -> Self {
        if self.ati == Tier::Zero {
            return self;
        }
        Self {
            entry: if self.entry == EntryTier::Null {
                EntryTier::Late
            } else {
                self.entry
            },
            lai: if self.lai == Tier::Zero {
                Tier::Low
            } else {
                self.lai
            },
            ..self
        }
    }
}

impl fmt::Display for AdoptionProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "({}, {}, {}, {})",
            self.ati, self.entry, self.trajectory, self.lai
        )
    }
}

/// Whether a profile can occur.
///
/// A zero ATI must come with a null trajectory, a null entry and a zero LAI,
/// and a null trajectory only occurs with zero ATI. Adopters may still lack
/// an entry time or end at zero intensity. Beyond that a high ATI rules out a
/// late entry, a high ATI with a low LAI rules out a rising or stable finish,
/// and a low ATI with a high LAI rules out a falling or stable finish.
pub fn is_feasible(profile: &AdoptionProfile) -> bool {
    infeasibility(profile).is_none()
}

fn infeasibility(profile: &AdoptionProfile) -> Option<&'static str> {
    use Trajectory::*;
    let zero = profile.ati == Tier::Zero;
    if zero != (profile.trajectory == Null) {
        return Some("zero ATI and null trajectory must coincide");
    }
    if zero {
        if profile.entry != EntryTier::Null || profile.lai != Tier::Zero {
            return Some("a non-adopter has no entry and zero LAI");
        }
        return None;
    }
    let p = profile.normalised();
    if p.ati == Tier::High && p.entry == EntryTier::Late {
        return Some("high ATI with a late entry");
    }
    if p.ati == Tier::Low && p.lai == Tier::High && matches!(p.trajectory, Downhill | Stable) {
        return Some("low ATI and high LAI without an uphill finish");
    }
    if p.ati == Tier::High && p.lai == Tier::Low && matches!(p.trajectory, Uphill | Stable) {
        return Some("high ATI and low LAI without a downhill finish");
    }
    None
}

/// The eight adoption paths.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Path {
    NonAdopting,
    Lagging,
    DecliningModerate,
    Moderate,
    Decelerating,
    Leaping,
    Accelerating,
    Leading,
}

named_enum!(Path {
    NonAdopting => "non_adopting",
    Lagging => "lagging",
    DecliningModerate => "declining_moderate",
    Moderate => "moderate",
    Decelerating => "decelerating",
    Leaping => "leaping",
    Accelerating => "accelerating",
    Leading => "leading",
});

impl Path {
    /// Paths from the lowest to the highest tier.
    pub const ALL: [Path; 8] = [
        Path::NonAdopting,
        Path::Lagging,
        Path::DecliningModerate,
        Path::Moderate,
        Path::Decelerating,
        Path::Leaping,
        Path::Accelerating,
        Path::Leading,
    ];

    /// Position in the tier ordering, 0 (non-adopting) to 7 (leading).
    pub fn tier_order(self) -> u8 {
        self as u8
    }

    pub fn from_tier_order(order: u8) -> Option<Path> {
        Path::ALL.get(order as usize).copied()
    }
}

/// Which rule produced a path: a row of the criteria table or one of the
/// fallbacks for profiles no row matches.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RuleId {
    Row(Path),
    HighDownhill,
    HighUphill,
    HighStable,
    MediumDownhill,
    MediumOther,
    LowUphillRising,
    LowOther,
}

impl RuleId {
    pub fn is_fallback(self) -> bool {
        !matches!(self, RuleId::Row(_))
    }
}

impl fmt::Display for RuleId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RuleId::Row(p) => write!(f, "row:{p}"),
            RuleId::HighDownhill => f.write_str("fallback:high_downhill"),
            RuleId::HighUphill => f.write_str("fallback:high_uphill"),
            RuleId::HighStable => f.write_str("fallback:high_stable"),
            RuleId::MediumDownhill => f.write_str("fallback:medium_downhill"),
            RuleId::MediumOther => f.write_str("fallback:medium_other"),
            RuleId::LowUphillRising => f.write_str("fallback:low_uphill_rising"),
            RuleId::LowOther => f.write_str("fallback:low_other"),
        }
    }
}

impl FromStr for RuleId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if let Some(p) = s.strip_prefix("row:") {
            return Ok(RuleId::Row(p.parse()?));
        }
        Ok(match s {
            "fallback:high_downhill" => RuleId::HighDownhill,
            "fallback:high_uphill" => RuleId::HighUphill,
            "fallback:high_stable" => RuleId::HighStable,
            "fallback:medium_downhill" => RuleId::MediumDownhill,
            "fallback:medium_other" => RuleId::MediumOther,
            "fallback:low_uphill_rising" => RuleId::LowUphillRising,
            "fallback:low_other" => RuleId::LowOther,
            other => return Err(Error::Config(format!("unknown rule id `{other}`"))),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PathAssignment {
    pub path: Path,
    pub rule: RuleId,
}

/// Assigns the adoption path of a feasible profile.
///
/// The criteria rows are tried in order; profiles matching none fall back on
/// ATI tier first and trajectory second.
pub fn classify(profile: &AdoptionProfile) -> Result<PathAssignment> {
    use EntryTier::{Early, Late, Middle};
    use Tier::{High, Low, Medium, Zero};
    use Trajectory::{Downhill, Stable, Uphill};

    if let Some(why) = infeasibility(profile) {
        return Err(Error::InfeasibleProfile(format!("{profile}: {why}")));
    }
    let p = profile.normalised();
    let row = |path| {
        Ok(PathAssignment {
            path,
            rule: RuleId::Row(path),
        })
    };
    let fallback = |path, rule| Ok(PathAssignment { path, rule });
    match (p.ati, p.entry, p.trajectory, p.lai) {
        (Zero, ..) => row(Path::NonAdopting),
        (High, Early, Stable, High) => row(Path::Leading),
        (High, Early, Uphill, High) => row(Path::Accelerating),
        (High, Early, Downhill, Medium | Low) => row(Path::Decelerating),
        (Low | Medium, Late, Uphill, High) => row(Path::Leaping),
        (Medium, Early | Middle, Stable | Uphill, Medium) => row(Path::Moderate),
        (Medium, Early | Middle, Downhill, Low) => row(Path::DecliningModerate),
        (Low, _, Stable | Downhill, Low) => row(Path::Lagging),
        (High, _, Downhill, _) => fallback(Path::Decelerating, RuleId::HighDownhill),
        (High, _, Uphill, _) => fallback(Path::Accelerating, RuleId::HighUphill),
        (High, ..) => fallback(Path::Leading, RuleId::HighStable),
        (Medium, _, Downhill, _) => fallback(Path::DecliningModerate, RuleId::MediumDownhill),
        (Medium, ..) => fallback(Path::Moderate, RuleId::MediumOther),
        (Low, _, Uphill, High | Medium) => fallback(Path::Leaping, RuleId::LowUphillRising),
        (Low, ..) => fallback(Path::Lagging, RuleId::LowOther),
    }
}

/// Profile and path of one entity. `assignment` is `None` when the profile is
/// infeasible.
#[derive(Debug, Clone, PartialEq)]
pub struct EntityClass {
    pub entity_id: String,
    pub profile: AdoptionProfile,
    pub assignment: Option<PathAssignment>,
}

impl EntityClass {
    pub fn path(&self) -> Option<Path> {
        self.assignment.map(|a| a.path)
    }
}

/// Tiers every feature across the region and classifies each entity.
pub fn classify_region(features: &[FeatureVector]) -> Vec<EntityClass> {
    let ati: Vec<f64> = features.iter().map(|f| f.ati).collect();
    let lai: Vec<f64> = features.iter().map(|f| f.lai).collect();
    let entries: Vec<Option<f64>> = features.iter().map(|f| f.entry.value).collect();
    let ati_tiers = assign_tiers(&ati, &ati.iter().map(|v| *v == 0.0).collect::<Vec<_>>());
    let lai_tiers = assign_tiers(&lai, &lai.iter().map(|v| *v == 0.0).collect::<Vec<_>>());
    let entry_tiers = assign_entry_tiers(&entries);
    features
        .iter()
        .enumerate()
        .map(|(k, f)| {
            let profile =
                AdoptionProfile::new(ati_tiers[k], entry_tiers[k], f.trajectory, lai_tiers[k]);
            EntityClass {
                entity_id: f.entity_id.clone(),
                profile,
                assignment: classify(&profile).ok(),
            }
        })
        .collect()
}

/// Entities per path in tier order, followed by the number of infeasible
/// profiles.
pub fn path_frequencies(classes: &[EntityClass]) -> ([usize; 8], usize) {
    let mut counts = [0; 8];
    let mut infeasible = 0;
    for c in classes {
        match c.path() {
            Some(p) => counts[p.tier_order() as usize] += 1,
            None => infeasible += 1,
        }
    }
    (counts, infeasible)
}
