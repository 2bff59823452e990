//! The file-based pipeline: six stages that each read the input panel and
//! the files written by earlier stages, and write their own tables plus a
//! section of `manifest.json`.
//!
//! [`run_pipeline`] runs the stages in order through the same files, so a
//! full run and a stage-by-stage run produce identical bytes.

mod table;

use std::fmt;
use std::fs::File;
use std::path::{Path as FsPath, PathBuf};
use std::str::FromStr;

use serde_json::{json, Map, Value};

use crate::ati::{
    compute_auc, region_ati_from_fits, AtiResult, EntityAti, Intersection, RegionAti,
};
use crate::curvefit::{
    select_best_curve, Curve, CurveFamily, FitOptions, FittedCurve, SelectionMode,
};
use crate::dataset::{load_region, RegionDataset};
use crate::error::{Error, Result};
use crate::features::{
    entry_time, latest_adoption_intensity, latest_trajectory, select_entry_threshold, EntryTime,
    FeatureVector, Trajectory, THRESHOLD_CANDIDATES,
};
use crate::stats::{moments, wilcoxon_signed_rank, WilcoxonOutcome};
use crate::transitions::{
    analyse_transitions, magnitude_distribution, path_median_curves, transition_matrix,
};
use crate::typology::{
    classify_region, is_feasible, AdoptionProfile, EntityClass, EntryTier, Path, PathAssignment,
    RuleId, Tier,
};
use table::{opt_real, real, Table, TableWriter};

/// Name of the manifest file in the output directory.
pub const MANIFEST: &str = "manifest.json";

/// Files written by each stage.
pub mod files {
    pub const FITS: &str = "fits.csv";
    pub const REGION_FIT: &str = "region_fit.csv";
    pub const ATI: &str = "ati.csv";
    pub const INTERSECTIONS: &str = "intersections.csv";
    pub const FEATURES: &str = "features.csv";
    pub const THRESHOLDS: &str = "thresholds.csv";
    pub const PROFILES: &str = "profiles.csv";
    pub const FREQUENCIES: &str = "frequencies.csv";
    pub const HALVES: &str = "halves.csv";
    pub const TRANSITIONS: &str = "transitions.csv";
    pub const MATRIX: &str = "matrix.csv";
    pub const MATRIX_PERCENT: &str = "matrix_percent.csv";
    pub const MAGNITUDES: &str = "magnitudes.csv";
    pub const MEDIANS: &str = "medians.csv";
    pub const STATS: &str = "stats.csv";
}

/// Label written in place of a path for infeasible profiles.
pub const INFEASIBLE: &str = "infeasible";

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum ThresholdChoice {
    /// Pick the fraction with the most normal-looking entry distribution.
    #[default]
    Auto,
    Fixed(f64),
}

impl FromStr for ThresholdChoice {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "auto" {
            return Ok(Self::Auto);
        }
        s.parse().map(Self::Fixed).map_err(|_| {
            Error::Config(format!(
                "threshold fraction must be `auto` or a number, got `{s}`"
            ))
        })
    }
}

impl fmt::Display for ThresholdChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Auto => f.write_str("auto"),
            Self::Fixed(x) => write!(f, "{x}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum SplitChoice {
    /// Halfway between the first and last observation.
    #[default]
    Midpoint,
    /// A time in the input's units.
    At(f64),
}

impl FromStr for SplitChoice {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "mid" {
            return Ok(Self::Midpoint);
        }
        s.parse()
            .map(Self::At)
            .map_err(|_| Error::Config(format!("split time must be `mid` or a number, got `{s}`")))
    }
}

impl fmt::Display for SplitChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Midpoint => f.write_str("mid"),
            Self::At(x) => write!(f, "{x}"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub input: PathBuf,
    pub output: PathBuf,
    pub threshold: ThresholdChoice,
    pub r2_min: f64,
    pub selection_mode: SelectionMode,
    pub tie_margin: f64,
    pub split: SplitChoice,
    pub quad_rel_tol: f64,
}

impl RunConfig {
    pub fn new(input: impl Into<PathBuf>, output: impl Into<PathBuf>) -> Self {
        Self {
            input: input.into(),
            output: output.into(),
            threshold: ThresholdChoice::Auto,
            r2_min: 0.9,
            selection_mode: SelectionMode::Adjusted,
            tie_margin: crate::curvefit::DEFAULT_TIE_MARGIN,
            split: SplitChoice::Midpoint,
            quad_rel_tol: crate::ati::DEFAULT_QUAD_TOL,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let ThresholdChoice::Fixed(f) = self.threshold {
            if !(f > 0.0 && f < 1.0) {
                return Err(Error::Config(format!(
                    "threshold fraction must lie in (0, 1), got {f}"
                )));
            }
        }
        if !(self.r2_min.is_finite()) {
            return Err(Error::Config(format!(
                "r2_min must be finite, got {}",
                self.r2_min
            )));
        }
        if !(self.tie_margin >= 0.0 && self.tie_margin.is_finite()) {
            return Err(Error::Config(format!(
                "tie margin must be a finite non-negative number, got {}",
                self.tie_margin
            )));
        }
        if !(self.quad_rel_tol > 0.0 && self.quad_rel_tol < 1.0) {
            return Err(Error::Config(format!(
                "quadrature tolerance must lie in (0, 1), got {}",
                self.quad_rel_tol
            )));
        }
        if let SplitChoice::At(t) = self.split {
            if !t.is_finite() {
                return Err(Error::Config(format!("split time must be finite, got {t}")));
            }
        }
        Ok(())
    }

    fn fit_options(&self) -> FitOptions {
        FitOptions {
            r2_min: self.r2_min,
            mode: self.selection_mode,
            tie_margin: self.tie_margin,
            ..FitOptions::default()
        }
    }

    fn out(&self, name: &str) -> PathBuf {
        self.output.join(name)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Fit,
    Ati,
    Features,
    Classify,
    Transitions,
    Stats,
}

impl Stage {
    pub const ALL: [Stage; 6] = [
        Stage::Fit,
        Stage::Ati,
        Stage::Features,
        Stage::Classify,
        Stage::Transitions,
        Stage::Stats,
    ];

    fn key(self) -> &'static str {
        match self {
            Stage::Fit => "fit",
            Stage::Ati => "ati",
            Stage::Features => "features",
            Stage::Classify => "classify",
            Stage::Transitions => "transitions",
            Stage::Stats => "stats",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.key())
    }
}

/// Runs every stage in order.
pub fn run_pipeline(config: &RunConfig) -> Result<()> {
    for stage in Stage::ALL {
        run_stage(config, stage)?;
    }
    Ok(())
}

/// Runs one stage from the input panel and the earlier stages' files.
pub fn run_stage(config: &RunConfig, stage: Stage) -> Result<()> {
    config.validate()?;
    let dataset = load_input(&config.input)?;
    std::fs::create_dir_all(&config.output)?;
    let section = match stage {
        Stage::Fit => fit_stage(config, &dataset)?,
        Stage::Ati => ati_stage(config, &dataset)?,
        Stage::Features => features_stage(config, &dataset)?,
        Stage::Classify => classify_stage(config, &dataset)?,
        Stage::Transitions => transitions_stage(config, &dataset)?,
        Stage::Stats => stats_stage(config, &dataset)?,
    };
    update_manifest(config, &dataset, stage, section)
}

pub fn load_input(path: &FsPath) -> Result<RegionDataset> {
    if !path.is_file() {
        return Err(Error::MissingFile(path.display().to_string()));
    }
    load_region(File::open(path)?)
}

fn update_manifest(
    config: &RunConfig,
    dataset: &RegionDataset,
    stage: Stage,
    section: Value,
) -> Result<()> {
    let path = config.out(MANIFEST);
    let mut root: Map<String, Value> = if path.is_file() {
        match serde_json::from_slice(&std::fs::read(&path)?)? {
            Value::Object(m) => m,
            _ => Map::new(),
        }
    } else {
        Map::new()
    };
    root.insert("tool".into(), json!(env!("CARGO_PKG_NAME")));
    root.insert("version".into(), json!(env!("CARGO_PKG_VERSION")));
    root.insert(
        "input".into(),
        json!({
            "file": config.input.file_name().map(|n| n.to_string_lossy().into_owned()),
            "entities": dataset.len(),
            "time_points": dataset.axis().len(),
            "time_origin": dataset.axis().origin(),
        }),
    );
    root.insert(stage.key().into(), section);
    let mut text = serde_json::to_string_pretty(&Value::Object(root))?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

fn read_manifest(config: &RunConfig) -> Result<Map<String, Value>> {
    let path = config.out(MANIFEST);
    if !path.is_file() {
        return Err(Error::MissingFile(path.display().to_string()));
    }
    match serde_json::from_slice(&std::fs::read(&path)?)? {
        Value::Object(m) => Ok(m),
        _ => Err(Error::Config(format!(
            "{} is not a JSON object",
            path.display()
        ))),
    }
}

const FIT_HEADER: [&str; 6] = [
    "entity_id",
    "family",
    "params",
    "r2",
    "r2_adjusted",
    "low_fit",
];

fn fit_row(id: &str, fit: &FittedCurve) -> Vec<String> {
    vec![
        id.to_string(),
        fit.family().to_string(),
        fit.params()
            .iter()
            .map(|p| real(*p))
            .collect::<Vec<_>>()
            .join(";"),
        real(fit.r2),
        real(fit.r2_adjusted),
        fit.low_fit.to_string(),
    ]
}

fn fit_stage(config: &RunConfig, dataset: &RegionDataset) -> Result<Value> {
    use rayon::prelude::*;
    let options = config.fit_options();
    let times = dataset.axis().points();
    let mean_fit = select_best_curve(times, dataset.mean_series(), &options)
        .map_err(|e| Error::NoFit(format!("regional mean ({e})")))?;
    let fits: Vec<FittedCurve> = dataset
        .series()
        .par_iter()
        .map(|s| {
            select_best_curve(times, &s.values, &options)
                .map_err(|e| Error::NoFit(format!("{} ({e})", s.entity_id)))
        })
        .collect::<Result<_>>()?;

    let mut region = TableWriter::new(&FIT_HEADER)?;
    region.row(fit_row("mean", &mean_fit))?;
    region.finish(&config.out(files::REGION_FIT))?;
    let mut table = TableWriter::new(&FIT_HEADER)?;
    let mut families = Map::new();
    let mut low = Vec::new();
    for (s, fit) in dataset.series().iter().zip(&fits) {
        table.row(fit_row(&s.entity_id, fit))?;
        families.insert(s.entity_id.clone(), json!(fit.family().to_string()));
        if fit.low_fit {
            low.push(s.entity_id.clone());
        }
    }
    table.finish(&config.out(files::FITS))?;
    Ok(json!({
        "r2_min": config.r2_min,
        "selection_mode": config.selection_mode.to_string(),
        "tie_margin": config.tie_margin,
        "mean_family": mean_fit.family().to_string(),
        "families": families,
        "low_fit": low,
    }))
}

fn parse_fit(row: &table::Row<'_>, domain: (f64, f64)) -> Result<FittedCurve> {
    let family: CurveFamily = row.parse("family")?;
    let params = row
        .str("params")?
        .split(';')
        .map(|p| {
            crate::format::parse_real(p)
                .ok_or_else(|| row.error(format!("`{p}` is not a parameter value")))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(FittedCurve {
        curve: Curve::new(family, params, domain).map_err(|e| row.error(e))?,
        r2: row.real("r2")?,
        r2_adjusted: row.real("r2_adjusted")?,
        low_fit: row.parse("low_fit")?,
    })
}

/// Reads `rows` keyed by entity id and checks they match the panel.
fn by_entity<'t, T>(
    dataset: &RegionDataset,
    table: &'t Table,
    mut parse: impl FnMut(&table::Row<'t>) -> Result<T>,
) -> Result<Vec<T>> {
    if table.len() != dataset.len() {
        return Err(Error::Config(format!(
            "stage file has {} rows for {} entities; rerun the earlier stages",
            table.len(),
            dataset.len()
        )));
    }
    table
        .rows()
        .zip(dataset.series())
        .map(|(row, s)| {
            let id = row.str("entity_id")?;
            if id != s.entity_id {
                return Err(row.error(format!(
                    "expected entity `{}`, found `{id}`; rerun the earlier stages",
                    s.entity_id
                )));
            }
            parse(&row)
        })
        .collect()
}

fn read_fits(
    config: &RunConfig,
    dataset: &RegionDataset,
) -> Result<(FittedCurve, Vec<FittedCurve>)> {
    let domain = (dataset.axis().first(), dataset.axis().last());
    let region = Table::read(&config.out(files::REGION_FIT))?;
    let mean_fit = region
        .rows()
        .next()
        .ok_or_else(|| Error::Config("region_fit.csv is empty".into()))
        .and_then(|r| parse_fit(&r, domain))?;
    let fits = by_entity(dataset, &Table::read(&config.out(files::FITS))?, |r| {
        parse_fit(r, domain)
    })?;
    Ok((mean_fit, fits))
}

fn ati_stage(config: &RunConfig, dataset: &RegionDataset) -> Result<Value> {
    let (mean_fit, fits) = read_fits(config, dataset)?;
    let region = region_ati_from_fits(dataset, mean_fit, fits, config.quad_rel_tol)?;
    let axis = dataset.axis();

    let mut table = TableWriter::new(&[
        "entity_id",
        "family",
        "low_fit",
        "a_i",
        "a_norm",
        "delta",
        "feedback_initial",
        "feedback_duration",
        "ati",
        "crossings",
        "coincident",
    ])?;
    let mut crossings = TableWriter::new(&[
        "entity_id",
        "index",
        "t",
        "alpha_sign",
        "s_factor",
        "feedback",
    ])?;
    let mut coincident = Vec::new();
    for e in &region.entities {
        let r = &e.result;
        table.row([
            e.entity_id.clone(),
            e.fit.family().to_string(),
            e.fit.low_fit.to_string(),
            real(r.a_i),
            real(r.a_norm),
            real(r.delta),
            real(r.feedback_initial),
            real(r.feedback_duration()),
            real(r.ati),
            r.intersections.len().to_string(),
            r.coincident.to_string(),
        ])?;
        for (j, x) in r.intersections.iter().enumerate() {
            crossings.row([
                e.entity_id.clone(),
                (j + 1).to_string(),
                real(axis.to_input(x.t)),
                x.alpha_sign.to_string(),
                real(x.s_factor),
                opt_real(r.feedback_terms.get(j).copied()),
            ])?;
        }
        if r.coincident {
            coincident.push(e.entity_id.clone());
        }
    }
    table.finish(&config.out(files::ATI))?;
    crossings.finish(&config.out(files::INTERSECTIONS))?;
    Ok(json!({
        "quad_rel_tol": config.quad_rel_tol,
        "a_m": region.a_m,
        "coincident": coincident,
    }))
}

/// Index results as written by the `ati` stage.
fn read_ati(config: &RunConfig, dataset: &RegionDataset) -> Result<Vec<AtiResult>> {
    let axis = dataset.axis();
    let mut results = by_entity(dataset, &Table::read(&config.out(files::ATI))?, |r| {
        Ok(AtiResult {
            a_i: r.real("a_i")?,
            a_norm: r.real("a_norm")?,
            delta: r.real("delta")?,
            intersections: Vec::new(),
            feedback_initial: r.real("feedback_initial")?,
            feedback_terms: Vec::new(),
            ati: r.real("ati")?,
            coincident: r.parse("coincident")?,
        })
    })?;
    let crossings = Table::read(&config.out(files::INTERSECTIONS))?;
    for row in crossings.rows() {
        let id = row.str("entity_id")?;
        let k = dataset
            .series()
            .binary_search_by(|s| s.entity_id.as_str().cmp(id))
            .map_err(|_| row.error(format!("unknown entity `{id}`")))?;
        let r = &mut results[k];
        r.intersections.push(Intersection {
            t: axis.from_input(row.real("t")?),
            alpha_sign: row.parse("alpha_sign")?,
            s_factor: row.real("s_factor")?,
        });
        if let Some(f) = row.opt_real("feedback")? {
            r.feedback_terms.push(f);
        }
    }
    Ok(results)
}

fn features_stage(config: &RunConfig, dataset: &RegionDataset) -> Result<Value> {
    let results = read_ati(config, dataset)?;
    let low_fit = by_entity(dataset, &Table::read(&config.out(files::ATI))?, |r| {
        r.parse::<bool>("low_fit")
    })?;
    let auto = select_entry_threshold(dataset, &THRESHOLD_CANDIDATES)?;
    let (fraction, source, forced) = match config.threshold {
        ThresholdChoice::Auto => (auto.fraction, "auto", auto.forced),
        ThresholdChoice::Fixed(f) => (f, "explicit", false),
    };
    let axis = dataset.axis();

    let mut thresholds = TableWriter::new(&[
        "fraction",
        "coverage",
        "skewness",
        "excess_kurtosis",
        "sd",
        "score",
        "selected",
    ])?;
    for d in &auto.diagnostics {
        thresholds.row([
            real(d.fraction),
            real(d.coverage),
            real(d.skewness),
            real(d.excess_kurtosis),
            real(d.sd),
            real(d.score()),
            (d.fraction == fraction).to_string(),
        ])?;
    }
    thresholds.finish(&config.out(files::THRESHOLDS))?;

    let mut table = TableWriter::new(&[
        "entity_id",
        "ati",
        "entry_time",
        "lai",
        "trajectory",
        "low_fit",
    ])?;
    for ((s, r), low) in dataset.series().iter().zip(&results).zip(low_fit) {
        let entry = entry_time(s, dataset.mean_series(), axis, fraction);
        table.row([
            s.entity_id.clone(),
            real(r.ati),
            opt_real(entry.value.map(|t| axis.to_input(t))),
            real(latest_adoption_intensity(s, dataset.mean_series())?),
            latest_trajectory(r).to_string(),
            low.to_string(),
        ])?;
    }
    table.finish(&config.out(files::FEATURES))?;
    Ok(json!({
        "threshold_fraction": fraction,
        "threshold_source": source,
        "threshold_forced": forced,
        "auto_fraction": auto.fraction,
    }))
}

fn read_features(config: &RunConfig, dataset: &RegionDataset) -> Result<Vec<FeatureVector>> {
    let manifest = read_manifest(config)?;
    let fraction = manifest
        .get("features")
        .and_then(|f| f.get("threshold_fraction"))
        .and_then(Value::as_f64)
        .ok_or_else(|| Error::Config("manifest lacks the features section".into()))?;
    let axis = dataset.axis();
    by_entity(dataset, &Table::read(&config.out(files::FEATURES))?, |r| {
        Ok(FeatureVector {
            entity_id: r.str("entity_id")?.to_string(),
            ati: r.real("ati")?,
            entry: EntryTime {
                value: r.opt_real("entry_time")?.map(|t| axis.from_input(t)),
                threshold_fraction: fraction,
            },
            lai: r.real("lai")?,
            trajectory: r.parse::<Trajectory>("trajectory")?,
        })
    })
}

fn class_row(c: &EntityClass) -> Vec<String> {
    let (path, rule) = match c.assignment {
        Some(a) => (a.path.to_string(), a.rule.to_string()),
        None => (INFEASIBLE.to_string(), INFEASIBLE.to_string()),
    };
    vec![
        c.entity_id.clone(),
        c.profile.ati.to_string(),
        c.profile.entry.to_string(),
        c.profile.trajectory.to_string(),
        c.profile.lai.to_string(),
        path,
        rule,
    ]
}

fn classify_stage(config: &RunConfig, dataset: &RegionDataset) -> Result<Value> {
    if let ThresholdChoice::Fixed(f) = config.threshold {
        let recorded = read_manifest(config)
            .ok()
            .and_then(|m| m.get("features")?.get("threshold_fraction")?.as_f64());
        if recorded != Some(f) {
            let section = features_stage(config, dataset)?;
            update_manifest(config, dataset, Stage::Features, section)?;
        }
    }
    let features = read_features(config, dataset)?;
    let classes = classify_region(&features);

    let mut table = TableWriter::new(&[
        "entity_id",
        "ati_tier",
        "entry_tier",
        "trajectory",
        "lai_tier",
        "path",
        "rule_id",
    ])?;
    for c in &classes {
        table.row(class_row(c))?;
    }
    table.finish(&config.out(files::PROFILES))?;

    let (counts, infeasible) = crate::typology::path_frequencies(&classes);
    let n = classes.len() as f64;
    let mut freq = TableWriter::new(&["path", "count", "percent"])?;
    for p in Path::ALL {
        let c = counts[p.tier_order() as usize];
        freq.row([p.to_string(), c.to_string(), real(c as f64 / n * 100.0)])?;
    }
    freq.row([
        INFEASIBLE.to_string(),
        infeasible.to_string(),
        real(infeasible as f64 / n * 100.0),
    ])?;
    freq.finish(&config.out(files::FREQUENCIES))?;

    let excluded: Vec<&str> = classes
        .iter()
        .filter(|c| c.assignment.is_none())
        .map(|c| c.entity_id.as_str())
        .collect();
    Ok(json!({
        "threshold_fraction": features.first().map(|f| f.entry.threshold_fraction),
        "feasible_profiles": AdoptionProfile::all().filter(is_feasible).count(),
        "infeasible": excluded,
    }))
}

fn read_classes(config: &RunConfig, dataset: &RegionDataset) -> Result<Vec<EntityClass>> {
    by_entity(dataset, &Table::read(&config.out(files::PROFILES))?, |r| {
        let profile = AdoptionProfile::new(
            r.parse::<Tier>("ati_tier")?,
            r.parse::<EntryTier>("entry_tier")?,
            r.parse::<Trajectory>("trajectory")?,
            r.parse::<Tier>("lai_tier")?,
        );
        let assignment = match r.str("path")? {
            INFEASIBLE => None,
            _ => Some(PathAssignment {
                path: r.parse::<Path>("path")?,
                rule: r.parse::<RuleId>("rule_id")?,
            }),
        };
        Ok(EntityClass {
            entity_id: r.str("entity_id")?.to_string(),
            profile,
            assignment,
        })
    })
}

fn transitions_stage(config: &RunConfig, dataset: &RegionDataset) -> Result<Value> {
    let (mean_fit, fits) = read_fits(config, dataset)?;
    let results = read_ati(config, dataset)?;
    let features = read_features(config, dataset)?;
    let classes = read_classes(config, dataset)?;
    let axis = dataset.axis();
    let a_m = compute_auc(&mean_fit.curve, config.quad_rel_tol)?;
    let region = RegionAti {
        mean_fit,
        a_m,
        entities: dataset
            .series()
            .iter()
            .zip(fits)
            .zip(results)
            .map(|((s, fit), result)| EntityAti {
                entity_id: s.entity_id.clone(),
                fit,
                result,
            })
            .collect(),
    };
    let (split, source) = match config.split {
        SplitChoice::Midpoint => (axis.midpoint(), "midpoint"),
        SplitChoice::At(t) => (axis.from_input(t), "explicit"),
    };
    let analysis = analyse_transitions(dataset, &region, &features, split, config.quad_rel_tol)
        .map_err(|e| match e {
            Error::SplitOutOfDomain { split, start, end } => Error::SplitOutOfDomain {
                split: axis.to_input(split),
                start: axis.to_input(start),
                end: axis.to_input(end),
            },
            other => other,
        })?;

    let mut halves = TableWriter::new(&[
        "entity_id",
        "half",
        "a_norm",
        "ati",
        "entry_time",
        "lai",
        "trajectory",
        "ati_tier",
        "entry_tier",
        "lai_tier",
        "path",
        "rule_id",
    ])?;
    for (h, (window, classes)) in analysis
        .split
        .halves
        .iter()
        .zip(&analysis.classes)
        .enumerate()
    {
        for ((r, f), c) in window.results.iter().zip(&window.features).zip(classes) {
            let row = class_row(c);
            halves.row([
                f.entity_id.clone(),
                (h + 1).to_string(),
                real(r.a_norm),
                real(f.ati),
                opt_real(f.entry.value.map(|t| axis.to_input(t))),
                real(f.lai),
                f.trajectory.to_string(),
                row[1].clone(),
                row[2].clone(),
                row[4].clone(),
                row[5].clone(),
                row[6].clone(),
            ])?;
        }
    }
    halves.finish(&config.out(files::HALVES))?;

    let mut table = TableWriter::new(&["entity_id", "path_h1", "path_h2", "magnitude"])?;
    for r in &analysis.records {
        table.row([
            r.entity_id.clone(),
            r.first.to_string(),
            r.second.to_string(),
            r.magnitude.to_string(),
        ])?;
    }
    table.finish(&config.out(files::TRANSITIONS))?;

    let matrix = transition_matrix(&analysis.records);
    let header: Vec<String> = std::iter::once("from".to_string())
        .chain(Path::ALL.iter().map(|p| p.to_string()))
        .collect();
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    let mut counts = TableWriter::new(&header)?;
    let mut percents = TableWriter::new(&header)?;
    for p in Path::ALL {
        let k = p.tier_order() as usize;
        counts.row(
            std::iter::once(p.to_string()).chain(matrix.counts[k].iter().map(|c| c.to_string())),
        )?;
        percents.row(
            std::iter::once(p.to_string()).chain(matrix.percentages[k].iter().map(|c| real(*c))),
        )?;
    }
    counts.finish(&config.out(files::MATRIX))?;
    percents.finish(&config.out(files::MATRIX_PERCENT))?;

    let dist = magnitude_distribution(&analysis.records);
    let mut mags = TableWriter::new(&["magnitude", "count"])?;
    for m in -7i8..=7 {
        mags.row([m.to_string(), dist.count(m).to_string()])?;
    }
    mags.finish(&config.out(files::MAGNITUDES))?;

    let mut medians = TableWriter::new(&["path", "time", "value"])?;
    for (path, curve) in path_median_curves(dataset, &classes) {
        for (k, v) in curve.iter().enumerate() {
            medians.row([path.to_string(), axis.label(k), real(*v)])?;
        }
    }
    medians.finish(&config.out(files::MEDIANS))?;

    let excluded: Vec<&str> = analysis.classes[0]
        .iter()
        .zip(&analysis.classes[1])
        .filter(|(a, b)| a.assignment.is_none() || b.assignment.is_none())
        .map(|(a, _)| a.entity_id.as_str())
        .collect();
    Ok(json!({
        "split_time": axis.to_input(split),
        "split_source": source,
        "quad_rel_tol": config.quad_rel_tol,
        "excluded": excluded,
        "upward": dist.upward,
        "downward": dist.downward,
        "unchanged": dist.unchanged,
    }))
}

fn stats_stage(config: &RunConfig, dataset: &RegionDataset) -> Result<Value> {
    let results = read_ati(config, dataset)?;
    let features = read_features(config, dataset)?;
    let axis = dataset.axis();
    let a_norm: Vec<f64> = results.iter().map(|r| r.a_norm).collect();
    let ati: Vec<f64> = results.iter().map(|r| r.ati).collect();
    let entry: Vec<f64> = features
        .iter()
        .filter_map(|f| f.entry.value.map(|t| axis.to_input(t)))
        .collect();
    let lai: Vec<f64> = features.iter().map(|f| f.lai).collect();

    let mut table = TableWriter::new(&["metric", "statistic", "value"])?;
    for (name, values) in [
        ("a_norm", &a_norm),
        ("ati", &ati),
        ("entry_time", &entry),
        ("lai", &lai),
    ] {
        table.row([name, "n", &values.len().to_string()])?;
        if let Ok(m) = moments(values) {
            for (stat, v) in [
                ("mean", m.mean),
                ("median", m.median),
                ("sd", m.sd),
                ("excess_kurtosis", m.excess_kurtosis),
                ("skewness", m.skewness),
            ] {
                table.row([name, stat, &real(v)])?;
            }
        }
    }
    const TEST: &str = "wilcoxon_a_norm_vs_ati";
    let status = match wilcoxon_signed_rank(&a_norm, &ati) {
        Ok(WilcoxonOutcome::Test(t)) => {
            table.row([TEST, "n", &t.n.to_string()])?;
            table.row([TEST, "w_plus", &real(t.w_plus)])?;
            table.row([TEST, "w_minus", &real(t.w_minus)])?;
            table.row([TEST, "w", &real(t.w)])?;
            table.row([TEST, "p_value", &real(t.p_value)])?;
            table.row([TEST, "method", if t.exact { "exact" } else { "normal" }])?;
            "test"
        }
        Ok(WilcoxonOutcome::NoNonzeroDifferences) => "no_nonzero_differences",
        Err(Error::InsufficientData(_)) => "insufficient_data",
        Err(e) => return Err(e),
    };
    table.row([TEST, "status", status])?;
    table.finish(&config.out(files::STATS))?;
    Ok(json!({ "wilcoxon": status }))
}
