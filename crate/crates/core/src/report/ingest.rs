//! Comma-separated input with a header row.
//!
//! Observed: `region, season, week, ili_count[, total_visits][, population]`.
//!
//! Forecasts: `method, region, k, target_week` plus one of
//! - `value` for deterministic runs; target weeks up to `k` are fitted
//!   values;
//! - `value` and `replicate_id[, weight]` for replicate forecasts;
//! - `mean, variance[, n_samples]` for moment forecasts.
//!
//! A method must use a single kind throughout the file.

use std::collections::BTreeMap;
use std::io::Read;
use std::path::Path;

use csv::StringRecord;

use super::{ReportError, Result};
use crate::curve::{DistSpec, EpiCurve, ForecastRun, Replicates, StochasticSeries, Week, WeekPrediction, WeeklySeries};

/// Deterministic runs of one method in one region.
#[derive(Debug, Clone, PartialEq)]
pub struct DeterministicForecast {
    pub method_id: String,
    pub region_id: String,
    pub runs: Vec<ForecastRun>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum IngestedForecast {
    Deterministic(DeterministicForecast),
    Stochastic {
        region_id: String,
        series: StochasticSeries,
    },
}

impl IngestedForecast {
    pub fn region_id(&self) -> &str {
        match self {
            IngestedForecast::Deterministic(d) => &d.region_id,
            IngestedForecast::Stochastic { region_id, .. } => region_id,
        }
    }

    pub fn method_id(&self) -> &str {
        match self {
            IngestedForecast::Deterministic(d) => &d.method_id,
            IngestedForecast::Stochastic { series, .. } => &series.method_id,
        }
    }
}

struct Table {
    source: String,
    header: Vec<String>,
    reader: csv::Reader<Box<dyn Read>>,
}

struct Row<'a> {
    source: &'a str,
    header: &'a [String],
    record: StringRecord,
    line: u64,
}

impl Row<'_> {
    fn err(&self, message: impl Into<String>) -> ReportError {
        ReportError::Parse {
            path: self.source.to_string(),
            line: self.line,
            message: message.into(),
        }
    }

    fn raw(&self, name: &str) -> Option<&str> {
        let i = self.header.iter().position(|h| h == name)?;
        self.record.get(i).map(str::trim).filter(|s| !s.is_empty())
    }

    fn text(&self, name: &str) -> Result<String> {
        self.raw(name)
            .map(str::to_string)
            .ok_or_else(|| self.err(format!("missing `{name}`")))
    }

    fn opt<T: std::str::FromStr>(&self, name: &str) -> Result<Option<T>> {
        self.raw(name)
            .map(|s| {
                s.parse()
                    .map_err(|_| self.err(format!("malformed `{name}` value `{s}`")))
            })
            .transpose()
    }

    fn req<T: std::str::FromStr>(&self, name: &str) -> Result<T> {
        self.opt(name)?.ok_or_else(|| self.err(format!("missing `{name}`")))
    }
}

impl Table {
    fn open(source: String, input: Box<dyn Read>, required: &[&str]) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new().flexible(false).from_reader(input);
        let header: Vec<String> = reader
            .headers()
            .map_err(|e| ReportError::Parse {
                path: source.clone(),
                line: 1,
                message: e.to_string(),
            })?
            .iter()
            .map(|h| h.trim().to_ascii_lowercase())
            .collect();
        for r in required {
            if !header.iter().any(|h| h == r) {
                return Err(ReportError::Parse {
                    path: source,
                    line: 1,
                    message: format!("header lacks column `{r}`"),
                });
            }
        }
        Ok(Self { source, header, reader })
    }

    fn for_each(mut self, mut f: impl FnMut(&Row<'_>) -> Result<()>) -> Result<usize> {
        let mut n = 0;
        for rec in self.reader.records() {
            let record = rec.map_err(|e| ReportError::Parse {
                path: self.source.clone(),
                line: e.position().map_or(0, |p| p.line()),
                message: e.to_string(),
            })?;
            let line = record.position().map_or(0, |p| p.line());
            f(&Row {
                source: &self.source,
                header: &self.header,
                record,
                line,
            })?;
            n += 1;
        }
        Ok(n)
    }
}

fn open_file(path: &Path) -> Result<Box<dyn Read>> {
    let file = std::fs::File::open(path).map_err(|e| ReportError::io(path, e))?;
    Ok(Box::new(std::io::BufReader::new(file)))
}

pub fn ingest_observed(path: &Path) -> Result<Vec<EpiCurve>> {
    parse_observed(path.display().to_string(), open_file(path)?)
}

pub fn ingest_forecasts(path: &Path) -> Result<Vec<IngestedForecast>> {
    parse_forecasts(path.display().to_string(), open_file(path)?)
}

#[derive(Default)]
struct ObservedGroup {
    rows: Vec<(Week, f64, Option<f64>)>,
    population: Option<u64>,
    first_line: u64,
}

/// Observed curves, one per (region, season), ordered by region then season.
pub fn parse_observed(source: String, input: Box<dyn Read>) -> Result<Vec<EpiCurve>> {
    let table = Table::open(source.clone(), input, &["region", "season", "week", "ili_count"])?;
    let mut groups: BTreeMap<(String, String), ObservedGroup> = BTreeMap::new();
    let rows = table.for_each(|row| {
        let key = (row.text("region")?, row.text("season")?);
        let week: Week = row.req("week")?;
        let count: f64 = row.req("ili_count")?;
        let visits: Option<f64> = row.opt("total_visits")?;
        let population: Option<u64> = row.opt("population")?;
        let g = groups.entry(key).or_default();
        if g.rows.is_empty() {
            g.first_line = row.line;
        }
        match (g.population, population) {
            (Some(a), Some(b)) if a != b => return Err(row.err("population differs within one curve")),
            (None, Some(b)) => g.population = Some(b),
            _ => {}
        }
        g.rows.push((week, count, visits));
        Ok(())
    })?;
    if rows == 0 {
        log::warn!("{source}: no observed rows");
    }
    groups
        .into_iter()
        .map(|((region, season), mut g)| {
            let at = |e: String| ReportError::Parse {
                path: source.clone(),
                line: g.first_line,
                message: format!("region {region}, season {season}: {e}"),
            };
            g.rows.sort_by_key(|r| r.0);
            let raw: Vec<(Week, f64)> = g.rows.iter().map(|r| (r.0, r.1)).collect();
            let mut curve = EpiCurve::new(&region, &season, &raw).map_err(|e| at(e.to_string()))?;
            let visits: Option<Vec<f64>> = g.rows.iter().map(|r| r.2).collect();
            match visits {
                Some(v) => curve = curve.with_total_visits(v).map_err(|e| at(e.to_string()))?,
                None if g.rows.iter().any(|r| r.2.is_some()) => {
                    return Err(at("total_visits is present for only some weeks".into()))
                }
                None => {}
            }
            if let Some(p) = g.population {
                curve = curve.with_population(p).map_err(|e| at(e.to_string()))?;
            }
            Ok(curve)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Kind {
    Deterministic,
    Replicate,
    Moment,
}

impl Kind {
    fn name(self) -> &'static str {
        match self {
            Kind::Deterministic => "deterministic",
            Kind::Replicate => "replicate",
            Kind::Moment => "moment",
        }
    }
}

type RunKey = (String, String, Week);
/// `(replicate_id, value, weight)`
type ReplicateRow = (String, f64, Option<f64>);

#[derive(Default)]
struct Collected {
    point: BTreeMap<RunKey, BTreeMap<Week, f64>>,
    replicate: BTreeMap<RunKey, BTreeMap<Week, Vec<ReplicateRow>>>,
    moment: BTreeMap<RunKey, BTreeMap<Week, DistSpec>>,
}

/// Forecast entries ordered by method, region and (for stochastic input)
/// prediction time.
pub fn parse_forecasts(source: String, input: Box<dyn Read>) -> Result<Vec<IngestedForecast>> {
    let table = Table::open(source.clone(), input, &["method", "region", "k", "target_week"])?;
    let mut kinds: BTreeMap<String, Kind> = BTreeMap::new();
    let mut c = Collected::default();
    let mut duplicate_at = None;
    table.for_each(|row| {
        let method = row.text("method")?;
        let region = row.text("region")?;
        let k: Week = row.req("k")?;
        let week: Week = row.req("target_week")?;
        let value: Option<f64> = row.opt("value")?;
        let mean: Option<f64> = row.opt("mean")?;
        let variance: Option<f64> = row.opt("variance")?;
        let replicate = row.raw("replicate_id").map(str::to_string);
        let kind = match (value, mean.is_some() || variance.is_some(), &replicate) {
            (Some(_), true, _) => {
                return Err(ReportError::MixedForecastKinds {
                    method,
                    first: "value",
                    second: "moment",
                })
            }
            (Some(_), false, Some(_)) => Kind::Replicate,
            (Some(_), false, None) => Kind::Deterministic,
            (None, true, _) => Kind::Moment,
            (None, false, _) => return Err(row.err("row has neither `value` nor `mean`/`variance`")),
        };
        let prior = *kinds.entry(method.clone()).or_insert(kind);
        if prior != kind {
            return Err(ReportError::MixedForecastKinds {
                method,
                first: prior.name(),
                second: kind.name(),
            });
        }
        let key = (method, region, k);
        match kind {
            Kind::Deterministic => {
                if c.point.entry(key).or_default().insert(week, value.unwrap()).is_some() {
                    duplicate_at.get_or_insert(row.line);
                }
            }
            Kind::Replicate => {
                let weight: Option<f64> = row.opt("weight")?;
                c.replicate.entry(key).or_default().entry(week).or_default().push((
                    replicate.unwrap(),
                    value.unwrap(),
                    weight,
                ));
            }
            Kind::Moment => {
                let (mean, variance) = mean
                    .zip(variance)
                    .ok_or_else(|| row.err("moment rows need both `mean` and `variance`"))?;
                if variance < 0.0 {
                    return Err(row.err("variance must be non-negative"));
                }
                let n: Option<u32> = row.opt("n_samples")?;
                let spec = match n {
                    Some(n) => DistSpec::from_sample_stats(mean, variance.sqrt(), n),
                    None => DistSpec::normal(mean, variance.sqrt()),
                }
                .map_err(|e| row.err(e.to_string()))?;
                c.moment.entry(key).or_default().insert(week, spec);
            }
        }
        Ok(())
    })?;
    if let Some(line) = duplicate_at {
        return Err(ReportError::Parse {
            path: source,
            line,
            message: "duplicate (method, region, k, target_week) row".into(),
        });
    }
    if kinds.is_empty() {
        log::warn!("{source}: no forecast rows");
    }

    let mut out = Vec::new();
    let mut det: BTreeMap<(String, String), Vec<ForecastRun>> = BTreeMap::new();
    for ((method, region, k), weeks) in c.point {
        det.entry((method.clone(), region))
            .or_default()
            .push(build_run(&method, k, &weeks)?);
    }
    out.extend(det.into_iter().map(|((method_id, region_id), runs)| {
        IngestedForecast::Deterministic(DeterministicForecast {
            method_id,
            region_id,
            runs,
        })
    }));
    for ((method, region, k), weeks) in c.replicate {
        let mut series = StochasticSeries::new(method, Some(k));
        for (week, mut reps) in weeks.into_iter().filter(|(w, _)| *w > k) {
            reps.sort_by(|a, b| a.0.cmp(&b.0));
            let samples = reps.iter().map(|r| r.1).collect();
            let weights: Option<Vec<f64>> = reps.iter().map(|r| r.2).collect();
            series
                .per_week
                .insert(week, WeekPrediction::Replicates(Replicates::new(samples, weights)?));
        }
        out.push(IngestedForecast::Stochastic {
            region_id: region,
            series,
        });
    }
    for ((method, region, k), weeks) in c.moment {
        let mut series = StochasticSeries::new(method, Some(k));
        for (week, spec) in weeks.into_iter().filter(|(w, _)| *w > k) {
            series.per_week.insert(week, WeekPrediction::Dist(spec));
        }
        out.push(IngestedForecast::Stochastic {
            region_id: region,
            series,
        });
    }
    out.sort_by(|a, b| (a.method_id(), a.region_id()).cmp(&(b.method_id(), b.region_id())));
    Ok(out)
}

fn build_run(method: &str, k: Week, weeks: &BTreeMap<Week, f64>) -> Result<ForecastRun> {
    let fitted: Vec<(Week, f64)> = weeks.range(..=k).map(|(&w, &v)| (w, v)).collect();
    let predicted: Vec<(Week, f64)> = weeks.range(k + 1..).map(|(&w, &v)| (w, v)).collect();
    if predicted.first().map(|p| p.0) != Some(k + 1) {
        return Err(crate::curve::CurveError::InvalidRun {
            k,
            reason: format!("{method}: predictions must start at week {}", k + 1),
        }
        .into());
    }
    let predicted = WeeklySeries::from_pairs(&predicted)?;
    let run = ForecastRun::new(method, k, predicted.values().to_vec())?;
    Ok(if fitted.is_empty() {
        run
    } else {
        run.with_fitted(WeeklySeries::from_pairs(&fitted)?)?
    })
}
