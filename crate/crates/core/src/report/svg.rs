//! Static SVG charts. Output depends only on the bundle, so reruns give
//! identical bytes.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use super::output::file_stem;
use super::pipeline::{RegionReport, ReportBundle};
use super::{ReportError, Result};
use crate::ranking::HorizonRanking;
use crate::stats::BoxStats;

const W: f64 = 640.0;
const H: f64 = 400.0;
const LEFT: f64 = 60.0;
const RIGHT: f64 = 150.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 50.0;
const PALETTE: [&str; 8] = [
    "#1b9e77", "#d95f02", "#7570b3", "#e7298a", "#66a61e", "#e6ab02", "#a6761d", "#666666",
];

fn colour(i: usize) -> &'static str {
    PALETTE[i % PALETTE.len()]
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

/// Plot area mapping data coordinates to pixels.
struct Frame {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
    /// Larger values drawn lower when set (ranks).
    flip: bool,
}

impl Frame {
    fn new(x0: f64, x1: f64, y0: f64, y1: f64, flip: bool) -> Self {
        let pad = |a: f64, b: f64| if a == b { (a - 0.5, b + 0.5) } else { (a, b) };
        let (x0, x1) = pad(x0, x1);
        let (y0, y1) = pad(y0, y1);
        Self { x0, x1, y0, y1, flip }
    }

    fn px(&self, x: f64) -> f64 {
        LEFT + (x - self.x0) / (self.x1 - self.x0) * (W - LEFT - RIGHT)
    }

    fn py(&self, y: f64) -> f64 {
        let t = (y - self.y0) / (self.y1 - self.y0);
        let t = if self.flip { t } else { 1.0 - t };
        TOP + t * (H - TOP - BOTTOM)
    }
}

struct Doc(String);

impl Doc {
    fn new(title: &str) -> Self {
        let mut s = String::new();
        let _ = writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="11">"#
        );
        let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="22" font-size="14" text-anchor="middle">{}</text>"#,
            (W - RIGHT + LEFT) / 2.0,
            escape(title)
        );
        Doc(s)
    }

    fn line(&mut self, x1: f64, y1: f64, x2: f64, y2: f64, stroke: &str, width: f64) {
        let _ = writeln!(
            self.0,
            r#"<line x1="{x1:.2}" y1="{y1:.2}" x2="{x2:.2}" y2="{y2:.2}" stroke="{stroke}" stroke-width="{width}"/>"#
        );
    }

    fn text(&mut self, x: f64, y: f64, anchor: &str, s: &str) {
        let _ = writeln!(
            self.0,
            r#"<text x="{x:.2}" y="{y:.2}" text-anchor="{anchor}">{}</text>"#,
            escape(s)
        );
    }

    fn polyline(&mut self, pts: &[(f64, f64)], stroke: &str, dash: bool) {
        if pts.is_empty() {
            return;
        }
        let coords: Vec<String> = pts.iter().map(|(x, y)| format!("{x:.2},{y:.2}")).collect();
        let dash = if dash { r#" stroke-dasharray="5,3""# } else { "" };
        let _ = writeln!(
            self.0,
            r#"<polyline points="{}" fill="none" stroke="{stroke}" stroke-width="1.5"{dash}/>"#,
            coords.join(" ")
        );
    }

    fn axes(&mut self, f: &Frame, x_label: &str, y_label: &str, y_ticks: &[f64]) {
        let (l, r, t, b) = (LEFT, W - RIGHT, TOP, H - BOTTOM);
        self.line(l, b, r, b, "black", 1.0);
        self.line(l, t, l, b, "black", 1.0);
        for &y in y_ticks {
            let py = f.py(y);
            self.line(l - 4.0, py, l, py, "black", 1.0);
            self.text(l - 6.0, py + 4.0, "end", &trim_num(y));
        }
        self.text((l + r) / 2.0, H - 12.0, "middle", x_label);
        let _ = writeln!(
            self.0,
            r#"<text x="14" y="{:.2}" text-anchor="middle" transform="rotate(-90 14 {:.2})">{}</text>"#,
            (t + b) / 2.0,
            (t + b) / 2.0,
            escape(y_label)
        );
    }

    fn legend(&mut self, names: &[String]) {
        for (i, n) in names.iter().enumerate() {
            let y = TOP + 14.0 * i as f64;
            self.line(W - RIGHT + 12.0, y, W - RIGHT + 30.0, y, colour(i), 2.0);
            self.text(W - RIGHT + 34.0, y + 4.0, "start", n);
        }
    }

    fn finish(mut self) -> String {
        self.0.push_str("</svg>\n");
        self.0
    }
}

fn trim_num(x: f64) -> String {
    let s = format!("{x:.2}");
    s.trim_end_matches('0').trim_end_matches('.').to_string()
}

/// Round tick values from 0 covering `hi`, with steps of 1, 2 or 5 × 10ⁿ.
fn nice_ticks(hi: f64) -> Vec<f64> {
    let raw = hi / 4.0;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0]
        .into_iter()
        .map(|m| m * mag)
        .find(|&s| s >= raw)
        .unwrap_or(10.0 * mag);
    let n = (hi / step).ceil() as usize;
    (0..=n).map(|i| i as f64 * step).collect()
}

fn ticks(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..=n).map(|i| lo + (hi - lo) * i as f64 / n as f64).collect()
}

/// Box-whisker chart with one box per labelled sample.
fn box_chart(title: &str, y_label: &str, groups: &[(String, Vec<f64>)]) -> String {
    let stats: Vec<Option<BoxStats>> = groups.iter().map(|(_, v)| BoxStats::from_values(v)).collect();
    let hi = stats.iter().flatten().map(|s| s.max).fold(1.0, f64::max).ceil();
    let f = Frame::new(0.0, groups.len() as f64, 1.0, hi, true);
    let mut d = Doc::new(title);
    let rank_ticks: Vec<f64> = (1..=hi as u32).map(f64::from).collect();
    d.axes(&f, "method", y_label, &rank_ticks);
    let half = 0.3;
    for (i, ((name, _), s)) in groups.iter().zip(&stats).enumerate() {
        let cx = i as f64 + 0.5;
        d.text(f.px(cx), H - BOTTOM + 14.0, "middle", name);
        let Some(s) = s else { continue };
        let (xl, xr, xc) = (f.px(cx - half), f.px(cx + half), f.px(cx));
        let c = colour(i);
        d.line(xc, f.py(s.whisker_low), xc, f.py(s.q1), "black", 1.0);
        d.line(xc, f.py(s.q3), xc, f.py(s.whisker_high), "black", 1.0);
        d.line(
            f.px(cx - half / 2.0),
            f.py(s.whisker_low),
            f.px(cx + half / 2.0),
            f.py(s.whisker_low),
            "black",
            1.0,
        );
        d.line(
            f.px(cx - half / 2.0),
            f.py(s.whisker_high),
            f.px(cx + half / 2.0),
            f.py(s.whisker_high),
            "black",
            1.0,
        );
        let (top, bottom) = (f.py(s.q1).min(f.py(s.q3)), f.py(s.q1).max(f.py(s.q3)));
        let _ = writeln!(
            d.0,
            r#"<rect x="{xl:.2}" y="{top:.2}" width="{:.2}" height="{:.2}" fill="{c}" fill-opacity="0.35" stroke="{c}"/>"#,
            xr - xl,
            (bottom - top).max(1.0)
        );
        d.line(xl, f.py(s.median), xr, f.py(s.median), c, 2.0);
        let _ = writeln!(
            d.0,
            r#"<circle cx="{xc:.2}" cy="{:.2}" r="2.5" fill="black"/>"#,
            f.py(s.mean)
        );
        for &o in &s.outliers {
            let _ = writeln!(
                d.0,
                r#"<circle cx="{xc:.2}" cy="{:.2}" r="3" fill="none" stroke="{c}"/>"#,
                f.py(o)
            );
        }
    }
    d.finish()
}

fn horizon_chart(title: &str, h: Option<&HorizonRanking>, methods: &[String]) -> String {
    let Some(h) = h.filter(|h| !h.prediction_times.is_empty()) else {
        let mut d = Doc::new(title);
        d.text(
            (W - RIGHT + LEFT) / 2.0,
            H / 2.0,
            "middle",
            "no common prediction times",
        );
        return d.finish();
    };
    let ks = &h.prediction_times;
    let x0 = f64::from(ks[0]);
    let x1 = f64::from(*ks.last().expect("non-empty")) + 1.0;
    let n = methods.len().max(1) as f64;
    let f = Frame::new(x0, x1, 1.0, n, true);
    let mut d = Doc::new(title);
    d.axes(
        &f,
        "prediction time k",
        "average rank",
        &(1..=n as u32).map(f64::from).collect::<Vec<_>>(),
    );
    for k in ticks(x0, x1 - 1.0, 5) {
        let k = k.round();
        d.text(f.px(k), H - BOTTOM + 14.0, "middle", &trim_num(k));
    }
    let spread = (h.ranks.len() as f64 - 1.0) / 2.0;
    for (i, row) in h.ranks.iter().enumerate() {
        // Small per-method offset keeps tied steps visible.
        let offset = (i as f64 - spread) * 0.04;
        // Steps break where the method has no prediction.
        let mut segment: Vec<(f64, f64)> = Vec::new();
        for (j, r) in row.iter().enumerate() {
            match r {
                Some(r) => {
                    let xa = f.px(f64::from(ks[j]));
                    let xb = f.px(f64::from(ks[j]) + 1.0);
                    let y = f.py(*r + offset);
                    segment.push((xa, y));
                    segment.push((xb, y));
                }
                None => d.polyline(&std::mem::take(&mut segment), colour(i), false),
            }
        }
        d.polyline(&segment, colour(i), false);
    }
    d.legend(&h.methods);
    d.finish()
}

fn overlay_chart(r: &RegionReport) -> String {
    let title = format!("{}: observed vs one-step-ahead", r.region_id);
    let first = f64::from(r.observed_start);
    let last = first + r.observed.len() as f64 - 1.0;
    let hi = r
        .observed
        .iter()
        .chain(r.one_step.iter().flat_map(|o| o.values.iter()))
        .fold(0.0f64, |a, &b| a.max(b));
    let y_ticks = nice_ticks(if hi > 0.0 { hi } else { 1.0 });
    let f = Frame::new(first, last, 0.0, *y_ticks.last().expect("non-empty"), false);
    let mut d = Doc::new(&title);
    d.axes(&f, "week", "cases", &y_ticks);
    for w in ticks(first, last, 5) {
        let w = w.round();
        d.text(f.px(w), H - BOTTOM + 14.0, "middle", &trim_num(w));
    }
    let pts: Vec<_> = r
        .observed
        .iter()
        .enumerate()
        .map(|(i, &y)| (f.px(first + i as f64), f.py(y)))
        .collect();
    d.polyline(&pts, "black", false);
    let mut names = vec!["observed".to_string()];
    for (i, o) in r.one_step.iter().enumerate() {
        let pts: Vec<_> = o
            .values
            .iter()
            .enumerate()
            .map(|(j, &y)| (f.px(f64::from(o.start) + j as f64), f.py(y)))
            .collect();
        d.polyline(&pts, colour(i + 1), true);
        names.push(format!("{} ({})", o.method_id, o.group));
    }
    for (i, n) in names.iter().enumerate() {
        let y = TOP + 14.0 * i as f64;
        let c = if i == 0 { "black" } else { colour(i) };
        d.line(W - RIGHT + 12.0, y, W - RIGHT + 30.0, y, c, 2.0);
        d.text(W - RIGHT + 34.0, y + 4.0, "start", n);
    }
    d.finish()
}

/// Writes every chart of the bundle to `out_dir` and returns the paths.
///
/// Per region: a rank box plot and a horizon step chart per feature, and one
/// observed vs one-step-ahead overlay. With two or more regions, an overall
/// box plot of per-region consensus.
pub fn emit_plots(bundle: &ReportBundle, out_dir: &Path) -> Result<Vec<PathBuf>> {
    if bundle.regions.is_empty() {
        log::warn!("no ranked regions; no plots written");
        return Ok(Vec::new());
    }
    std::fs::create_dir_all(out_dir).map_err(|e| ReportError::io(out_dir, e))?;
    let mut files: Vec<(String, String)> = Vec::new();
    for r in &bundle.regions {
        let region = file_stem(&r.region_id);
        for f in &r.features {
            let groups: Vec<(String, Vec<f64>)> = f
                .ranks
                .methods
                .iter()
                .zip(&f.ranks.ranks)
                .map(|(m, ranks)| (m.clone(), ranks.iter().map(|&x| f64::from(x)).collect()))
                .collect();
            let title = format!("{}: {} ranks across measures", r.region_id, f.feature);
            files.push((
                format!("{region}__{}__box.svg", f.feature.name()),
                box_chart(&title, "rank", &groups),
            ));
            let title = format!("{}: {} rank by prediction time", r.region_id, f.feature);
            files.push((
                format!("{region}__{}__horizon.svg", f.feature.name()),
                horizon_chart(&title, f.horizon.as_ref(), &r.methods),
            ));
        }
        files.push((format!("{region}__one_step.svg"), overlay_chart(r)));
    }
    if let Some(o) = bundle.overall.as_ref().filter(|_| bundle.regions.len() >= 2) {
        let groups: Vec<(String, Vec<f64>)> = o
            .table
            .methods
            .iter()
            .cloned()
            .zip(o.table.cells.iter().cloned())
            .collect();
        files.push((
            "overall__box.svg".into(),
            box_chart("consensus rank across regions", "average consensus rank", &groups),
        ));
    }
    files
        .into_iter()
        .map(|(name, text)| {
            let path = out_dir.join(name);
            std::fs::write(&path, text).map_err(|e| ReportError::io(&path, e))?;
            Ok(path)
        })
        .collect()
}
