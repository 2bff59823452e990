//! Panel ingestion: time axis, per-entity adoption intensity series and the
//! regional mean series.

use std::collections::{BTreeMap, HashMap};
use std::io::{Read, Write};

use chrono::{Datelike, NaiveDate};

use crate::error::{Error, Result};
use crate::format::fmt_real;

/// Days per year used when converting calendar dates to fractional years.
pub const DAYS_PER_YEAR: f64 = 365.2425;

/// Scale applied to the PV-to-built-area ratio so intensities are not tiny.
pub const INTENSITY_SCALE: f64 = 1.0e6;

/// Observation times, expressed in years since the first observation.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeAxis {
    points: Vec<f64>,
    labels: Option<Vec<String>>,
    origin: f64,
}

impl TimeAxis {
    /// Builds an axis from raw times. The first time becomes 0.
    pub fn new(raw: Vec<f64>) -> Result<Self> {
        Self::with_labels(raw, None)
    }

    pub fn with_labels(raw: Vec<f64>, labels: Option<Vec<String>>) -> Result<Self> {
        if raw.len() < 3 {
            return Err(Error::TooFewTimePoints(raw.len()));
        }
        if let Some(index) = raw.iter().position(|t| !t.is_finite()) {
            return Err(Error::UnorderedTime { index });
        }
        if let Some(index) = raw.windows(2).position(|w| w[1] <= w[0]) {
            return Err(Error::UnorderedTime { index: index + 1 });
        }
        if let Some(l) = &labels {
            if l.len() != raw.len() {
                return Err(Error::Config(format!(
                    "{} time labels for {} time points",
                    l.len(),
                    raw.len()
                )));
            }
        }
        let origin = raw[0];
        let points = raw.iter().map(|t| t - origin).collect();
        Ok(Self {
            points,
            labels,
            origin,
        })
    }

    /// Input-unit time of the first observation.
    pub fn origin(&self) -> f64 {
        self.origin
    }

    /// Converts an axis time to input units.
    pub fn to_input(&self, t: f64) -> f64 {
        self.origin + t
    }

    /// Converts a time in input units to the axis.
    pub fn from_input(&self, t: f64) -> f64 {
        t - self.origin
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn labels(&self) -> Option<&[String]> {
        self.labels.as_deref()
    }

    /// Label of the k-th point, falling back to its numeric value.
    pub fn label(&self, k: usize) -> String {
        match &self.labels {
            Some(l) => l[k].clone(),
            None => fmt_real(self.points[k]),
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn first(&self) -> f64 {
        self.points[0]
    }

    pub fn last(&self) -> f64 {
        self.points[self.points.len() - 1]
    }

    pub fn span(&self) -> f64 {
        self.last() - self.first()
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.first() + self.last())
    }
}

/// One entity's observed adoption intensities, one value per time point.
#[derive(Debug, Clone, PartialEq)]
pub struct AdoptionSeries {
    pub entity_id: String,
    pub values: Vec<f64>,
}

impl AdoptionSeries {
    pub fn new(entity_id: impl Into<String>, values: Vec<f64>) -> Self {
        Self {
            entity_id: entity_id.into(),
            values,
        }
    }

    /// True when the entity never adopted.
    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|&v| v == 0.0)
    }

    pub fn last(&self) -> f64 {
        *self.values.last().expect("series is never empty")
    }
}

/// A dense region panel together with its per-time-point arithmetic mean.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionDataset {
    axis: TimeAxis,
    series: Vec<AdoptionSeries>,
    mean_series: Vec<f64>,
}

impl RegionDataset {
    /// Validates the panel, sorts entities by id and computes the mean series.
    pub fn new(axis: TimeAxis, mut series: Vec<AdoptionSeries>) -> Result<Self> {
        if series.is_empty() {
            return Err(Error::NoEntities);
        }
        if series.len() < 2 {
            return Err(Error::TooFewEntities(series.len()));
        }
        for s in &series {
            if s.values.len() != axis.len() {
                return Err(Error::LengthMismatch {
                    entity: s.entity_id.clone(),
                    expected: axis.len(),
                    found: s.values.len(),
                });
            }
            if let Some(k) = s.values.iter().position(|v| !v.is_finite() || *v < 0.0) {
                return Err(Error::Entity {
                    entity: s.entity_id.clone(),
                    message: format!(
                        "adoption intensity at time {} must be finite and non-negative, got {}",
                        axis.label(k),
                        s.values[k]
                    ),
                });
            }
        }
        series.sort_by(|a, b| a.entity_id.cmp(&b.entity_id));
        if let Some(w) = series.windows(2).find(|w| w[0].entity_id == w[1].entity_id) {
            return Err(Error::Entity {
                entity: w[0].entity_id.clone(),
                message: "entity appears twice".into(),
            });
        }
        let n = series.len() as f64;
        let mean_series = (0..axis.len())
            .map(|k| series.iter().map(|s| s.values[k]).sum::<f64>() / n)
            .collect();
        Ok(Self {
            axis,
            series,
            mean_series,
        })
    }

    pub fn axis(&self) -> &TimeAxis {
        &self.axis
    }

    pub fn series(&self) -> &[AdoptionSeries] {
        &self.series
    }

    pub fn mean_series(&self) -> &[f64] {
        &self.mean_series
    }

    pub fn len(&self) -> usize {
        self.series.len()
    }

    pub fn is_empty(&self) -> bool {
        self.series.is_empty()
    }

    pub fn get(&self, entity_id: &str) -> Option<&AdoptionSeries> {
        self.series
            .binary_search_by(|s| s.entity_id.as_str().cmp(entity_id))
            .ok()
            .map(|i| &self.series[i])
    }

    /// Writes the panel back out in long `entity_id,time,value` form.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["entity_id", "time", "value"])?;
        for s in &self.series {
            for (k, v) in s.values.iter().enumerate() {
                w.write_record([s.entity_id.clone(), self.axis.label(k), fmt_real(*v)])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// Adoption intensity of one entity at one time: PV area per built-up area,
/// scaled by 10^6.
pub fn compute_adoption_intensity(entity: &str, pv_area: f64, built_area: f64) -> Result<f64> {
    if !(built_area > 0.0) || !built_area.is_finite() {
        return Err(Error::NonPositiveBuiltArea {
            entity: entity.to_string(),
            value: built_area,
        });
    }
    if !(pv_area >= 0.0) || !pv_area.is_finite() {
        return Err(Error::Entity {
            entity: entity.to_string(),
            message: format!("PV area must be finite and non-negative, got {pv_area}"),
        });
    }
    Ok(pv_area * INTENSITY_SCALE / built_area)
}

/// Piecewise-linear interpolation of `values` observed at `points`.
/// Outside the observed range the end values are held constant.
pub fn interpolate(points: &[f64], values: &[f64], t: f64) -> f64 {
    debug_assert_eq!(points.len(), values.len());
    let last = points.len() - 1;
    if t <= points[0] {
        return values[0];
    }
    if t >= points[last] {
        return values[last];
    }
    let k = points.partition_point(|&p| p <= t) - 1;
    let (t0, t1) = (points[k], points[k + 1]);
    let w = (t - t0) / (t1 - t0);
    values[k] + w * (values[k + 1] - values[k])
}

enum RowShape {
    Value { value: usize },
    Areas { pv: usize, built: usize },
}

fn sniff_delimiter(header_line: &str) -> u8 {
    if header_line.contains('\t') {
        b'\t'
    } else if header_line.contains(';') && !header_line.contains(',') {
        b';'
    } else {
        b','
    }
}

enum TimeKind {
    Numeric,
    Date,
}

fn parse_time(raw: &str, kind: &TimeKind) -> Result<f64> {
    match kind {
        TimeKind::Numeric => raw
            .parse::<f64>()
            .ok()
            .filter(|t| t.is_finite())
            .ok_or_else(|| Error::BadTime(raw.to_string())),
        TimeKind::Date => {
            let date = NaiveDate::parse_from_str(raw, "%Y-%m-%d")
                .map_err(|_| Error::BadTime(raw.to_string()))?;
            Ok(f64::from(date.num_days_from_ce()) / DAYS_PER_YEAR)
        }
    }
}

/// Calendar year plus the elapsed fraction of it.
fn decimal_year(raw: &str) -> Result<f64> {
    let date =
        NaiveDate::parse_from_str(raw, "%Y-%m-%d").map_err(|_| Error::BadTime(raw.to_string()))?;
    let days = if date.leap_year() { 366.0 } else { 365.0 };
    Ok(f64::from(date.year()) + f64::from(date.ordinal0()) / days)
}

/// Reads a long-format panel (`entity_id,time,value` or
/// `entity_id,time,pv_area,built_area`) into a [`RegionDataset`].
///
/// Times are either all numeric or all ISO-8601 dates. Dates are converted to
/// fractional years since the first observation, and the first date's
/// decimal year becomes the axis origin.
pub fn load_region<R: Read>(mut reader: R) -> Result<RegionDataset> {
    let mut text = String::new();
    reader.read_to_string(&mut text)?;
    let text = text.strip_prefix('\u{feff}').unwrap_or(&text);
    let header_line = text.lines().next().unwrap_or("");
    if header_line.trim().is_empty() {
        return Err(Error::NoEntities);
    }
    let mut rdr = csv::ReaderBuilder::new()
        .delimiter(sniff_delimiter(header_line))
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());

    let headers = rdr.headers()?.clone();
    let find = |name: &str| headers.iter().position(|h| h.eq_ignore_ascii_case(name));
    let entity_col = find("entity_id").ok_or_else(|| Error::Parse {
        line: 1,
        message: "missing `entity_id` column".into(),
    })?;
    let time_col = find("time").ok_or_else(|| Error::Parse {
        line: 1,
        message: "missing `time` column".into(),
    })?;
    let shape = match (find("value"), find("pv_area"), find("built_area")) {
        (Some(value), _, _) => RowShape::Value { value },
        (None, Some(pv), Some(built)) => RowShape::Areas { pv, built },
        _ => {
            return Err(Error::Parse {
                line: 1,
                message: "expected a `value` column or `pv_area` and `built_area` columns".into(),
            })
        }
    };

    struct Row {
        line: u64,
        entity: String,
        time: String,
        value: f64,
    }

    let mut rows = Vec::new();
    let mut built: HashMap<String, f64> = HashMap::new();
    for record in rdr.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        let field = |i: usize| {
            record.get(i).ok_or_else(|| Error::Parse {
                line,
                message: format!("row has only {} fields", record.len()),
            })
        };
        let number = |i: usize| -> Result<f64> {
            let raw = field(i)?;
            raw.parse::<f64>().map_err(|_| Error::Parse {
                line,
                message: format!("`{raw}` is not a number"),
            })
        };
        let entity = field(entity_col)?.to_string();
        let time = field(time_col)?.to_string();
        if entity.is_empty() {
            return Err(Error::Parse {
                line,
                message: "empty entity_id".into(),
            });
        }
        let value = match shape {
            RowShape::Value { value } => number(value)?,
            RowShape::Areas { pv, built: b } => {
                let area = number(b)?;
                if let Some(prev) = built.insert(entity.clone(), area) {
                    if prev != area {
                        return Err(Error::Entity {
                            entity,
                            message: format!(
                                "built-up area must be constant per entity ({prev} vs {area})"
                            ),
                        });
                    }
                }
                compute_adoption_intensity(&entity, number(pv)?, area)?
            }
        };
        rows.push(Row {
            line,
            entity,
            time,
            value,
        });
    }
    if rows.is_empty() {
        return Err(Error::NoEntities);
    }

    let kind = if rows.iter().all(|r| r.time.parse::<f64>().is_ok()) {
        TimeKind::Numeric
    } else {
        TimeKind::Date
    };
    let mut times: Vec<(f64, String)> = Vec::new();
    let mut parsed = Vec::with_capacity(rows.len());
    for r in &rows {
        let t = parse_time(&r.time, &kind)?;
        parsed.push(t);
        times.push((t, r.time.clone()));
    }
    times.sort_by(|a, b| a.0.total_cmp(&b.0));
    times.dedup_by(|a, b| a.0 == b.0);
    let raw: Vec<f64> = times.iter().map(|t| t.0).collect();
    let labels: Vec<String> = times.iter().map(|t| t.1.clone()).collect();
    if raw.len() < 3 {
        return Err(Error::TooFewTimePoints(raw.len()));
    }

    let mut cells: BTreeMap<String, Vec<Option<f64>>> = BTreeMap::new();
    for (r, t) in rows.iter().zip(&parsed) {
        let k = raw.partition_point(|x| x < t);
        let slot = cells
            .entry(r.entity.clone())
            .or_insert_with(|| vec![None; raw.len()]);
        if slot[k].is_some() {
            return Err(Error::DuplicateCell {
                entity: r.entity.clone(),
                time: r.time.clone(),
            });
        }
        if !r.value.is_finite() {
            return Err(Error::Parse {
                line: r.line,
                message: format!("non-finite value for entity `{}`", r.entity),
            });
        }
        slot[k] = Some(r.value);
    }

    let mut missing = Vec::new();
    for (entity, slot) in &cells {
        for (k, v) in slot.iter().enumerate() {
            if v.is_none() {
                missing.push((entity.clone(), labels[k].clone()));
            }
        }
    }
    if !missing.is_empty() {
        return Err(Error::MissingCells(missing));
    }

    let mut axis = TimeAxis::with_labels(raw, Some(labels))?;
    if let TimeKind::Date = kind {
        axis.origin = decimal_year(&axis.labels.as_ref().expect("labels set")[0])?;
    }
    let series = cells
        .into_iter()
        .map(|(entity, slot)| AdoptionSeries::new(entity, slot.into_iter().flatten().collect()))
        .collect();
    RegionDataset::new(axis, series)
}
