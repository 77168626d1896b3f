use std::path::{Path, PathBuf};

use super::config::OutputFormat;
use super::pipeline::ReportBundle;
use super::svg::emit_plots;
use super::{ReportError, Result};

pub(crate) fn file_stem(s: &str) -> String {
    s.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' { c } else { '_' })
        .collect()
}

fn table(header: Vec<String>, rows: Vec<Vec<String>>) -> String {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    w.write_record(&header).expect("in-memory write");
    for r in rows {
        w.write_record(&r).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 input")
}

fn num(x: f64) -> String {
    format!("{x}")
}

/// Every CSV table of the bundle as `(file name, contents)`, in a fixed
/// order.
pub fn csv_tables(bundle: &ReportBundle) -> Vec<(String, String)> {
    let mut out = Vec::new();
    for r in &bundle.regions {
        let region = file_stem(&r.region_id);
        for f in &r.features {
            let rm = &f.ranks;
            let mut header = vec!["method".to_string()];
            header.extend(rm.measures.iter().map(|m| m.name().to_string()));
            header.extend(["consensus".into(), "median".into()]);
            let rows = rm
                .methods
                .iter()
                .enumerate()
                .map(|(i, m)| {
                    let mut row = vec![m.clone()];
                    row.extend(rm.ranks[i].iter().map(u32::to_string));
                    row.push(num(rm.consensus[i]));
                    row.push(num(rm.median_rank[i]));
                    row
                })
                .collect();
            out.push((
                format!("{region}__{}__ranks.csv", f.feature.name()),
                table(header, rows),
            ));

            let mut header = vec!["method".to_string()];
            header.extend(f.errors.measures.iter().map(|m| m.name().to_string()));
            let rows = f
                .errors
                .methods
                .iter()
                .zip(&f.errors.cells)
                .map(|(m, cells)| {
                    std::iter::once(m.clone())
                        .chain(cells.iter().map(|&x| num(x)))
                        .collect()
                })
                .collect();
            out.push((
                format!("{region}__{}__errors.csv", f.feature.name()),
                table(header, rows),
            ));

            if let Some(h) = &f.horizon {
                let mut header = vec!["k".to_string()];
                header.extend(h.methods.iter().cloned());
                let rows = h
                    .prediction_times
                    .iter()
                    .enumerate()
                    .map(|(i, k)| {
                        std::iter::once(k.to_string())
                            .chain(h.ranks.iter().map(|r| r[i].map(num).unwrap_or_default()))
                            .collect()
                    })
                    .collect();
                out.push((
                    format!("{region}__{}__horizon.csv", f.feature.name()),
                    table(header, rows),
                ));
            }
        }

        let c = &r.consensus;
        let mut header = vec!["method".to_string()];
        header.extend(c.columns.iter().cloned());
        header.extend(["average".into(), "median".into()]);
        let rows = c
            .methods
            .iter()
            .enumerate()
            .map(|(i, m)| {
                let mut row = vec![m.clone()];
                row.extend(c.cells[i].iter().map(|&x| num(x)));
                row.push(num(r.consensus_mean[i]));
                row.push(num(r.consensus_median[i]));
                row
            })
            .collect();
        out.push((format!("{region}__consensus.csv"), table(header, rows)));

        let header = ["method", "one_step_mape", "group", "interval"]
            .map(String::from)
            .to_vec();
        let rows = r
            .one_step
            .iter()
            .map(|o| {
                vec![
                    o.method_id.clone(),
                    num(o.mape),
                    o.group.to_string(),
                    o.group.interval().to_string(),
                ]
            })
            .collect();
        out.push((format!("{region}__clusters.csv"), table(header, rows)));
    }

    if let Some(o) = &bundle.overall {
        let mut header = vec!["method".to_string()];
        header.extend(o.table.columns.iter().cloned());
        header.push("average".into());
        let rows = o
            .table
            .methods
            .iter()
            .enumerate()
            .map(|(i, m)| {
                let mut row = vec![m.clone()];
                row.extend(o.table.cells[i].iter().map(|&x| num(x)));
                row.push(num(o.average[i]));
                row
            })
            .collect();
        out.push(("overall__consensus.csv".into(), table(header, rows)));
    }

    if !bundle.stochastic.is_empty() {
        let measures: Vec<_> = bundle.stochastic[0].scores.mean_over_weeks.keys().copied().collect();
        let mut header = ["region", "method", "k", "aggregate"].map(String::from).to_vec();
        header.extend(measures.iter().map(|m| m.name().to_string()));
        let mut rows = Vec::new();
        for s in &bundle.stochastic {
            for (label, map) in [
                ("mean", &s.scores.mean_over_weeks),
                ("median", &s.scores.median_over_weeks),
            ] {
                let mut row = vec![
                    s.region_id.clone(),
                    s.method_id.clone(),
                    s.prediction_time.map(|k| k.to_string()).unwrap_or_default(),
                    label.to_string(),
                ];
                row.extend(measures.iter().map(|m| map.get(m).map(|&x| num(x)).unwrap_or_default()));
                rows.push(row);
            }
        }
        out.push(("stochastic.csv".into(), table(header, rows)));
    }

    if !bundle.failures.is_empty() {
        let header = vec!["region".to_string(), "message".to_string()];
        let rows = bundle
            .failures
            .iter()
            .map(|f| vec![f.region_id.clone(), f.message.clone()])
            .collect();
        out.push(("failures.csv".into(), table(header, rows)));
    }
    out
}

fn write_file(path: PathBuf, contents: &[u8]) -> Result<PathBuf> {
    std::fs::write(&path, contents).map_err(|e| ReportError::io(&path, e))?;
    Ok(path)
}

fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| ReportError::io(dir, e))
}

pub fn write_csv(bundle: &ReportBundle, dir: &Path) -> Result<Vec<PathBuf>> {
    ensure_dir(dir)?;
    csv_tables(bundle)
        .into_iter()
        .map(|(name, text)| write_file(dir.join(name), text.as_bytes()))
        .collect()
}

pub fn write_json(bundle: &ReportBundle, dir: &Path) -> Result<PathBuf> {
    ensure_dir(dir)?;
    let mut text = serde_json::to_string_pretty(bundle)?;
    text.push('\n');
    write_file(dir.join("bundle.json"), text.as_bytes())
}

pub fn read_json(path: &Path) -> Result<ReportBundle> {
    let text = std::fs::read_to_string(path).map_err(|e| ReportError::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

/// Writes the requested formats and returns the files written.
pub fn write_outputs(bundle: &ReportBundle, dir: &Path, formats: &[OutputFormat]) -> Result<Vec<PathBuf>> {
    let mut formats = formats.to_vec();
    formats.sort();
    formats.dedup();
    let mut written = Vec::new();
    for f in formats {
        match f {
            OutputFormat::Csv => written.extend(write_csv(bundle, dir)?),
            OutputFormat::Json => written.push(write_json(bundle, dir)?),
            OutputFormat::Svg => written.extend(emit_plots(bundle, dir)?),
        }
    }
    Ok(written)
}

/// Writes evaluation inputs as `observed.csv` and `forecasts.csv` in the
/// ingestion format.
pub fn export_inputs(inputs: &super::pipeline::PipelineInputs, dir: &Path) -> Result<(PathBuf, PathBuf)> {
    ensure_dir(dir)?;
    let mut rows = Vec::new();
    for (target, _) in &inputs.regions {
        let visits = target.total_visits();
        for (i, (w, y)) in target.counts().iter().enumerate() {
            let mut row = vec![
                target.region_id().to_string(),
                target.season_id().to_string(),
                w.to_string(),
                num(y),
            ];
            if let Some(v) = visits {
                row.push(num(v[i]));
            }
            rows.push(row);
        }
    }
    let with_visits = inputs.regions.iter().all(|(t, _)| t.total_visits().is_some());
    let mut header = ["region", "season", "week", "ili_count"].map(String::from).to_vec();
    if with_visits {
        header.push("total_visits".into());
    } else {
        rows.iter_mut().for_each(|r| r.truncate(4));
    }
    let observed = write_file(dir.join("observed.csv"), table(header, rows).as_bytes())?;

    let header = ["method", "region", "k", "target_week", "value"]
        .map(String::from)
        .to_vec();
    let mut rows = Vec::new();
    for (target, sets) in &inputs.regions {
        for set in sets {
            for run in set.runs() {
                let k = run.prediction_time().to_string();
                let fitted = run.fitted().into_iter().flat_map(|f| f.iter());
                for (w, x) in fitted.chain(run.predicted().iter()) {
                    rows.push(vec![
                        set.method_id().to_string(),
                        target.region_id().to_string(),
                        k.clone(),
                        w.to_string(),
                        num(x),
                    ]);
                }
            }
        }
    }
    let forecasts = write_file(dir.join("forecasts.csv"), table(header, rows).as_bytes())?;
    Ok((observed, forecasts))
}
