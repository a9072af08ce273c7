//! Tab-separated tables and static SVG plots of an evaluation.
//!
//! Rendering is pure: the same evaluation always yields the same bytes.
//! Plots draw from the formatted strings of the series tables, so a plot
//! never shows a number the tables do not contain.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use svg::node::element::{Line, Polyline, Rectangle, Text};
use svg::Document;

use crate::domain::Stance;
use crate::stats::{
    Change, ComparisonReport, Evaluation, Hypothesis, HypothesisVerdict, Modality, SeriesPoint,
};

pub const OVERALL: &str = "overall";

/// Fixed four-decimal rendering; negative zero prints as zero.
pub fn fmt_num(x: f64) -> String {
    if x.is_nan() {
        return "NA".into();
    }
    let s = format!("{x:.4}");
    if s == "-0.0000" {
        "0.0000".into()
    } else {
        s
    }
}

pub fn fmt_p(p: f64) -> String {
    if p < 1e-3 {
        format!("{p:.2e}")
    } else {
        format!("{p:.4}")
    }
}

/// "better (U=…, p=…)" for significant changes, "n.s.d." otherwise.
pub fn change_cell(change: Change, u: f64, p: f64) -> String {
    match change {
        Change::Nsd => Change::Nsd.name().into(),
        c => format!("{} (U={}, p={})", c.name(), u, fmt_p(p)),
    }
}

fn group_name(v: &HypothesisVerdict) -> &str {
    v.topic.as_ref().map_or(OVERALL, |t| t.as_str())
}

fn groups(ev: &Evaluation) -> Vec<Option<&crate::domain::TopicId>> {
    ev.topics.iter().map(Some).chain(std::iter::once(None)).collect()
}

fn metric_name(m: Modality) -> &'static str {
    match m {
        Modality::Search => "SERP-MS",
        _ => "NS",
    }
}

/// Per-topic S1/E1/E2 means and the three pairwise changes of one modality.
pub fn comparison_table(ev: &Evaluation, modality: Modality) -> String {
    let metric = metric_name(modality);
    let mut out = format!("topic\t{metric} S1\t{metric} E1\t{metric} E2\tS1-E1\tE1-E2\tS1-E2\n");
    for g in groups(ev) {
        let one = |h| ev.find(h, g, modality).into_iter().next();
        let (Some(h0), Some(h1), Some(h2)) = (one(Hypothesis::H2_0), one(Hypothesis::H2_1), one(Hypothesis::H2_2)) else {
            continue;
        };
        let cell = |v: &HypothesisVerdict| change_cell(v.change, v.statistic, v.p_value.unwrap_or(f64::NAN));
        let _ = writeln!(
            out,
            "{}\t{}\t{}\t{}\t{}\t{}\t{}",
            group_name(h0),
            fmt_num(h0.mean_a),
            fmt_num(h0.mean_b),
            fmt_num(h1.mean_b),
            cell(h0),
            cell(h1),
            cell(h2)
        );
    }
    out
}

/// DIFF-TO-LINEAR per phase and modality. A cell is "-" unless the phase's
/// pairwise test (S1-E1 for phase 1, E1-E2 for phase 2) found a change.
pub fn linearity_table(ev: &Evaluation) -> String {
    let gs = groups(ev);
    let mut out = String::from("phase\tmodality");
    for g in &gs {
        out.push('\t');
        out.push_str(g.map_or(OVERALL, |t| t.as_str()));
    }
    out.push('\n');
    for (phase, gate) in [("phase1", Hypothesis::H2_0), ("phase2", Hypothesis::H2_1)] {
        for modality in [Modality::Recommendations, Modality::Home] {
            let _ = write!(out, "{phase}\t{modality}");
            for g in &gs {
                let significant = ev.find(gate, *g, modality).iter().any(|v| v.change != Change::Nsd);
                let dtl = ev.find(Hypothesis::H2_3, *g, modality).into_iter().find(|v| v.comparison == phase);
                let cell = match dtl {
                    Some(v) if significant => format!("{:.3}", v.statistic),
                    _ => "-".into(),
                };
                let _ = write!(out, "\t{cell}");
            }
            out.push('\n');
        }
    }
    out
}

/// Every verdict with its full statistics.
pub fn verdicts_table(ev: &Evaluation) -> String {
    let mut out = String::from(
        "hypothesis\ttopic\tmodality\tcomparison\tstatistic\tp_value\talpha\tchange\tverdict\tn_a\tn_b\tmean_a\tmean_b\tci_low\tci_high\n",
    );
    for v in &ev.verdicts {
        let (lo, hi) = v.interval.map_or(("NA".into(), "NA".into()), |(a, b)| (fmt_num(a), fmt_num(b)));
        let _ = writeln!(
            out,
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
            v.hypothesis,
            group_name(v),
            v.modality,
            v.comparison,
            fmt_num(v.statistic),
            v.p_value.map_or("NA".into(), fmt_p),
            v.alpha,
            v.change.name(),
            v.verdict.name(),
            v.n_a,
            v.n_b,
            fmt_num(v.mean_a),
            fmt_num(v.mean_b),
            lo,
            hi
        );
    }
    out
}

/// One point of a run-averaged series, already formatted.
#[derive(Debug, Clone, PartialEq)]
pub struct SeriesRow {
    pub group: String,
    pub modality: Modality,
    pub watch_index: u32,
    pub mean: String,
    pub runs: usize,
    /// Promoting, neutral and debunking shares.
    pub proportions: [String; 3],
}

/// Series rows of every topic, then the overall series, per modality.
pub fn series_rows(ev: &Evaluation) -> Vec<SeriesRow> {
    let mut rows = Vec::new();
    let mut push = |group: &str, modality: Modality, points: &[SeriesPoint]| {
        for p in points {
            rows.push(SeriesRow {
                group: group.to_string(),
                modality,
                watch_index: p.watch_index,
                mean: fmt_num(p.mean),
                runs: p.runs,
                proportions: p.proportions.map(fmt_num),
            });
        }
    };
    for modality in Modality::ALL {
        for t in &ev.topics {
            if let Some(points) = ev.series.get(&(t.clone(), modality)) {
                push(t.as_str(), modality, points);
            }
        }
        if let Some(points) = ev.overall_series.get(&modality) {
            push(OVERALL, modality, points);
        }
    }
    rows
}

pub fn series_table(rows: &[SeriesRow]) -> String {
    let mut out = String::from("group\tmodality\twatch_index\tmean\truns\n");
    for r in rows {
        let _ = writeln!(out, "{}\t{}\t{}\t{}\t{}", r.group, r.modality, r.watch_index, r.mean, r.runs);
    }
    out
}

pub fn proportions_table(rows: &[SeriesRow]) -> String {
    let mut out = String::from("group\tmodality\twatch_index\tpromoting\tneutral\tdebunking\n");
    for r in rows {
        let [p, n, d] = &r.proportions;
        let _ = writeln!(out, "{}\t{}\t{}\t{p}\t{n}\t{d}", r.group, r.modality, r.watch_index);
    }
    out
}

const WIDTH: f64 = 760.0;
const HEIGHT: f64 = 380.0;
const MARGIN: f64 = 50.0;
const PALETTE: [&str; 8] = ["#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#333333"];

struct Frame {
    x_max: f64,
    y_min: f64,
    y_max: f64,
}

impl Frame {
    fn x(&self, i: u32) -> f64 {
        MARGIN + (WIDTH - 2.0 * MARGIN) * i as f64 / self.x_max.max(1.0)
    }

    fn y(&self, v: f64) -> f64 {
        HEIGHT - MARGIN - (HEIGHT - 2.0 * MARGIN) * (v - self.y_min) / (self.y_max - self.y_min)
    }

    fn axes(&self, title: &str, boundary: Option<u32>) -> Document {
        let mut doc = Document::new()
            .set("viewBox", (0, 0, WIDTH, HEIGHT))
            .set("width", WIDTH)
            .set("height", HEIGHT)
            .add(Rectangle::new().set("width", WIDTH).set("height", HEIGHT).set("fill", "white"))
            .add(Text::new(title).set("x", MARGIN).set("y", 24).set("font-size", 14).set("font-family", "sans-serif"));
        let (x0, x1) = (self.x(0), self.x(self.x_max as u32));
        for v in [self.y_min, (self.y_min + self.y_max) / 2.0, self.y_max] {
            let y = self.y(v);
            doc = doc
                .add(Line::new().set("x1", x0).set("x2", x1).set("y1", y).set("y2", y).set("stroke", "#dddddd"))
                .add(
                    Text::new(format!("{v}"))
                        .set("x", x0 - 6.0)
                        .set("y", y + 4.0)
                        .set("font-size", 10)
                        .set("text-anchor", "end")
                        .set("font-family", "sans-serif"),
                );
        }
        doc = doc.add(
            Text::new("videos watched")
                .set("x", (x0 + x1) / 2.0)
                .set("y", HEIGHT - 12.0)
                .set("font-size", 11)
                .set("text-anchor", "middle")
                .set("font-family", "sans-serif"),
        );
        if let Some(b) = boundary {
            let x = self.x(b);
            doc = doc.add(
                Line::new()
                    .set("x1", x)
                    .set("x2", x)
                    .set("y1", self.y(self.y_min))
                    .set("y2", self.y(self.y_max))
                    .set("stroke", "#999999")
                    .set("stroke-dasharray", "4 3"),
            );
        }
        doc
    }
}

/// One polyline per named series of `(watch_index, formatted value)`.
/// The formatted strings are kept verbatim in a `data-values` attribute.
fn line_plot(title: &str, series: &[(String, Vec<(u32, &str)>)], y_range: (f64, f64), x_max: u32, boundary: Option<u32>) -> String {
    let frame = Frame { x_max: x_max as f64, y_min: y_range.0, y_max: y_range.1 };
    let mut doc = frame.axes(title, boundary);
    for (k, (name, points)) in series.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        let coords: Vec<String> = points
            .iter()
            .filter_map(|(i, v)| v.parse::<f64>().ok().map(|y| format!("{:.2},{:.2}", frame.x(*i), frame.y(y))))
            .collect();
        let data: Vec<String> = points.iter().map(|(i, v)| format!("{i}:{v}")).collect();
        doc = doc
            .add(
                Polyline::new()
                    .set("points", coords.join(" "))
                    .set("fill", "none")
                    .set("stroke", color)
                    .set("stroke-width", 1.5)
                    .set("data-series", name.as_str())
                    .set("data-values", data.join(" ")),
            )
            .add(
                Text::new(name.as_str())
                    .set("x", WIDTH - MARGIN + 4.0)
                    .set("y", MARGIN + 14.0 * k as f64)
                    .set("font-size", 10)
                    .set("fill", color)
                    .set("font-family", "sans-serif"),
            );
    }
    doc.to_string()
}

/// Mean score per group over watches for one modality.
pub fn series_svg(rows: &[SeriesRow], modality: Modality, boundary: Option<u32>) -> String {
    let mut series: Vec<(String, Vec<(u32, &str)>)> = Vec::new();
    for r in rows.iter().filter(|r| r.modality == modality) {
        match series.last_mut() {
            Some((g, pts)) if *g == r.group => pts.push((r.watch_index, r.mean.as_str())),
            _ => series.push((r.group.clone(), vec![(r.watch_index, r.mean.as_str())])),
        }
    }
    let x_max = rows.iter().filter(|r| r.modality == modality).map(|r| r.watch_index).max().unwrap_or(1);
    line_plot(&format!("{} {modality}", metric_name(modality)), &series, (-1.0, 1.0), x_max, boundary)
}

/// Stance shares of one group over watches.
pub fn proportions_svg(rows: &[SeriesRow], modality: Modality, group: &str, boundary: Option<u32>) -> String {
    let mine: Vec<&SeriesRow> = rows.iter().filter(|r| r.modality == modality && r.group == group).collect();
    let series: Vec<(String, Vec<(u32, &str)>)> = [Stance::Promoting, Stance::Neutral, Stance::Debunking]
        .iter()
        .enumerate()
        .map(|(k, s)| (s.name().to_string(), mine.iter().map(|r| (r.watch_index, r.proportions[k].as_str())).collect()))
        .collect();
    let x_max = mine.iter().map(|r| r.watch_index).max().unwrap_or(1);
    line_plot(&format!("stance shares {group} {modality}"), &series, (0.0, 1.0), x_max, boundary)
}

/// Two-study comparison, one row per shared topic plus the pooled row.
pub fn compare_table(report: &ComparisonReport) -> String {
    let metric = metric_name(report.modality);
    let mut out = format!("topic\tn_a\t{metric} a\tsd a\tn_b\t{metric} b\tsd b\tchange\tverdict\n");
    for r in &report.rows {
        let _ = writeln!(
            out,
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
            r.topic.as_ref().map_or(OVERALL, |t| t.as_str()),
            r.n_a,
            fmt_num(r.mean_a),
            fmt_num(r.std_a),
            r.n_b,
            fmt_num(r.mean_b),
            fmt_num(r.std_b),
            change_cell(r.change, r.u, r.p_value),
            r.verdict.name()
        );
    }
    out
}

fn write(dir: &Path, name: &str, contents: &str, written: &mut Vec<PathBuf>) -> io::Result<()> {
    let path = dir.join(name);
    fs::write(&path, contents)?;
    written.push(path);
    Ok(())
}

/// Writes every table, and the plots when `plots` is set. Returns the paths
/// in writing order.
pub fn write_report(ev: &Evaluation, dir: &Path, plots: bool) -> io::Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    for m in Modality::ALL {
        write(dir, &format!("comparison_{m}.tsv"), &comparison_table(ev, m), &mut written)?;
    }
    write(dir, "diff_to_linear.tsv", &linearity_table(ev), &mut written)?;
    write(dir, "verdicts.tsv", &verdicts_table(ev), &mut written)?;
    let rows = series_rows(ev);
    write(dir, "series.tsv", &series_table(&rows), &mut written)?;
    write(dir, "proportions.tsv", &proportions_table(&rows), &mut written)?;
    if plots {
        let boundary = Some(ev.parameters.n_prom);
        for m in Modality::ALL {
            write(dir, &format!("series_{m}.svg"), &series_svg(&rows, m, boundary), &mut written)?;
            let groups: Vec<&str> =
                ev.topics.iter().map(|t| t.as_str()).chain(std::iter::once(OVERALL)).collect();
            for g in groups {
                write(dir, &format!("proportions_{m}_{g}.svg"), &proportions_svg(&rows, m, g, boundary), &mut written)?;
            }
        }
    }
    Ok(written)
}
