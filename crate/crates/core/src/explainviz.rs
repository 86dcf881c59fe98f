//! Global and local views over explanations, serialised as JSON and SVG.
//!
//! - [`feature_importance`]: mean |phi| per feature and label, stacked per label.
//! - [`summary_points`]: one point per (instance, feature) for a beeswarm plot.
//! - [`force_data`]: the forces that move one prediction away from the base value.
//!
//! Every emitter is a pure function of its input.

use std::collections::BTreeMap;
use std::fmt::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::shap::Explanation;

pub const PLOT_SCHEMA_VERSION: u32 = 1;

/// Stacked-bar palette; labels past the twelfth reuse it cyclically.
pub const PALETTE: [&str; 12] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
    "#bcbd22", "#17becf", "#393b79", "#ad494a",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceRow {
    pub feature: usize,
    pub name: String,
    /// Mean |phi| for each label in [`ImportanceTable::labels`] order.
    pub per_label: Vec<f64>,
    pub total: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceTable {
    pub labels: Vec<usize>,
    pub label_names: Vec<String>,
    /// Sorted by decreasing total, ties by feature index.
    pub rows: Vec<ImportanceRow>,
}

impl ImportanceTable {
    /// Replaces the default `label <i>` names using a full label-name list.
    pub fn with_label_names(mut self, all_names: &[String]) -> Self {
        self.label_names = self
            .labels
            .iter()
            .map(|&l| {
                all_names
                    .get(l)
                    .cloned()
                    .unwrap_or_else(|| format!("label {l}"))
            })
            .collect();
        self
    }
}

fn check_widths(explanations: &[Explanation]) -> Result<usize> {
    let first = explanations
        .first()
        .ok_or(Error::EmptyInput("no explanations"))?;
    let m = first.n_features();
    if let Some(e) = explanations.iter().find(|e| e.n_features() != m) {
        return Err(Error::WidthMismatch {
            expected: m,
            actual: e.n_features(),
        });
    }
    Ok(m)
}

/// Groups explanations by label in a canonical order, so aggregates do not
/// depend on input order.
fn by_label(explanations: &[Explanation]) -> BTreeMap<usize, Vec<&Explanation>> {
    let mut groups: BTreeMap<usize, Vec<&Explanation>> = BTreeMap::new();
    for e in explanations {
        groups.entry(e.label).or_default().push(e);
    }
    for group in groups.values_mut() {
        group.sort_by(|a, b| {
            a.instance.cmp(&b.instance).then_with(|| {
                a.phi
                    .iter()
                    .zip(&b.phi)
                    .map(|(p, q)| p.total_cmp(q))
                    .find(|o| o.is_ne())
                    .unwrap_or(std::cmp::Ordering::Equal)
            })
        });
    }
    groups
}

pub fn feature_importance(explanations: &[Explanation]) -> Result<ImportanceTable> {
    let m = check_widths(explanations)?;
    let groups = by_label(explanations);
    let labels: Vec<usize> = groups.keys().copied().collect();
    let names = &explanations[0].feature_names;
    let mut rows: Vec<ImportanceRow> = (0..m)
        .map(|f| {
            let per_label: Vec<f64> = groups
                .values()
                .map(|g| g.iter().map(|e| e.phi[f].abs()).sum::<f64>() / g.len() as f64)
                .collect();
            ImportanceRow {
                feature: f,
                name: names.get(f).cloned().unwrap_or_else(|| format!("f{f}")),
                total: per_label.iter().sum(),
                per_label,
            }
        })
        .collect();
    rows.sort_by(|a, b| b.total.total_cmp(&a.total).then(a.feature.cmp(&b.feature)));
    Ok(ImportanceTable {
        label_names: labels.iter().map(|l| format!("label {l}")).collect(),
        labels,
        rows,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryPoint {
    pub instance: usize,
    pub shap: f64,
    /// Feature value min-max scaled over the explained instances.
    pub color: f64,
    /// Vertical offset in row units, within `[-0.4, 0.4]`.
    pub jitter: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub feature: usize,
    pub name: String,
    pub mean_abs: f64,
    pub points: Vec<SummaryPoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryPoints {
    pub label: usize,
    pub label_name: String,
    /// Ordered by decreasing mean |phi|, ties by feature index.
    pub rows: Vec<SummaryRow>,
}

impl SummaryPoints {
    pub fn n_points(&self) -> usize {
        self.rows.iter().map(|r| r.points.len()).sum()
    }
}

const JITTER_BINS: usize = 40;
const JITTER_SPAN: f64 = 0.4;

/// Beeswarm offsets: values are binned along the x axis and points sharing a
/// bin fan out as 0, +1, -1, +2, ... steps, scaled so the fullest bin spans
/// the row. A point alone in its bin stays on the centre line.
fn beeswarm_offsets(values: &[f64]) -> Vec<f64> {
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let bin_of = |v: f64| {
        if hi > lo {
            (((v - lo) / (hi - lo)) * JITTER_BINS as f64)
                .floor()
                .min((JITTER_BINS - 1) as f64) as usize
        } else {
            0
        }
    };
    let mut bins: Vec<Vec<usize>> = vec![Vec::new(); JITTER_BINS];
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)));
    for i in order {
        bins[bin_of(values[i])].push(i);
    }
    let widest = bins
        .iter()
        .map(|b| b.len().saturating_sub(1).div_ceil(2))
        .max()
        .unwrap_or(0);
    let step = if widest == 0 {
        0.0
    } else {
        JITTER_SPAN / widest as f64
    };
    let mut out = vec![0.0; values.len()];
    for bin in &bins {
        for (rank, &i) in bin.iter().enumerate() {
            let slot = rank.div_ceil(2) as f64;
            out[i] = if rank % 2 == 1 {
                slot * step
            } else {
                -slot * step
            };
        }
    }
    out
}

/// Points for one label's summary plot.
pub fn summary_points(explanations: &[Explanation]) -> Result<SummaryPoints> {
    let m = check_widths(explanations)?;
    let label = explanations[0].label;
    if let Some(e) = explanations.iter().find(|e| e.label != label) {
        return Err(Error::InvalidParameter(format!(
            "summary points need a single label, got {label} and {}",
            e.label
        )));
    }
    let names = &explanations[0].feature_names;
    let group = by_label(explanations).remove(&label).expect("non-empty");
    let n = group.len() as f64;
    let mut rows: Vec<SummaryRow> = (0..m)
        .map(|f| {
            let shap: Vec<f64> = group.iter().map(|e| e.phi[f]).collect();
            let vals: Vec<f64> = group.iter().map(|e| e.values[f]).collect();
            let lo = vals.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let jitter = beeswarm_offsets(&shap);
            let points = group
                .iter()
                .enumerate()
                .map(|(i, e)| SummaryPoint {
                    instance: e.instance,
                    shap: shap[i],
                    color: if hi > lo {
                        (vals[i] - lo) / (hi - lo)
                    } else {
                        0.5
                    },
                    jitter: jitter[i],
                })
                .collect();
            SummaryRow {
                feature: f,
                name: names.get(f).cloned().unwrap_or_else(|| format!("f{f}")),
                mean_abs: shap.iter().map(|v| v.abs()).sum::<f64>() / n,
                points,
            }
        })
        .collect();
    rows.sort_by(|a, b| {
        b.mean_abs
            .total_cmp(&a.mean_abs)
            .then(a.feature.cmp(&b.feature))
    });
    Ok(SummaryPoints {
        label,
        label_name: format!("label {label}"),
        rows,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Contribution {
    pub feature: usize,
    pub name: String,
    pub value: f64,
    pub shap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForceData {
    pub instance: usize,
    pub label: usize,
    pub base_value: f64,
    pub fx: f64,
    /// Positive contributions, largest first.
    pub up: Vec<Contribution>,
    /// Negative contributions, most negative first.
    pub down: Vec<Contribution>,
}

impl ForceData {
    pub fn net_force(&self) -> f64 {
        self.up.iter().chain(&self.down).map(|c| c.shap).sum()
    }
}

pub fn force_data(explanation: &Explanation) -> ForceData {
    let contributions = |keep: fn(f64) -> bool| -> Vec<Contribution> {
        explanation
            .phi
            .iter()
            .enumerate()
            .filter(|(_, &p)| keep(p))
            .map(|(f, &p)| Contribution {
                feature: f,
                name: explanation
                    .feature_names
                    .get(f)
                    .cloned()
                    .unwrap_or_else(|| format!("f{f}")),
                value: explanation.values.get(f).copied().unwrap_or(f64::NAN),
                shap: p,
            })
            .collect()
    };
    let mut up = contributions(|p| p > 0.0);
    let mut down = contributions(|p| p < 0.0);
    up.sort_by(|a, b| b.shap.total_cmp(&a.shap).then(a.feature.cmp(&b.feature)));
    down.sort_by(|a, b| a.shap.total_cmp(&b.shap).then(a.feature.cmp(&b.feature)));
    ForceData {
        instance: explanation.instance,
        label: explanation.label,
        base_value: explanation.base_value,
        fx: explanation.fx,
        up,
        down,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "payload", rename_all = "snake_case")]
pub enum Payload {
    Importance(ImportanceTable),
    Summary(SummaryPoints),
    Force(ForceData),
}

/// A renderable view. The `kind` tag in JSON is derived from the payload.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlotSpec {
    pub schema_version: u32,
    pub title: String,
    pub width: u32,
    pub height: u32,
    #[serde(flatten)]
    pub payload: Payload,
}

impl PlotSpec {
    pub fn importance(table: ImportanceTable, title: impl Into<String>) -> Self {
        let height = 90 + 22 * table.rows.len() as u32;
        PlotSpec {
            schema_version: PLOT_SCHEMA_VERSION,
            title: title.into(),
            width: 900,
            height,
            payload: Payload::Importance(table),
        }
    }

    pub fn summary(points: SummaryPoints, title: impl Into<String>) -> Self {
        let height = 100 + 28 * points.rows.len() as u32;
        PlotSpec {
            schema_version: PLOT_SCHEMA_VERSION,
            title: title.into(),
            width: 900,
            height,
            payload: Payload::Summary(points),
        }
    }

    pub fn force(force: ForceData, title: impl Into<String>) -> Self {
        PlotSpec {
            schema_version: PLOT_SCHEMA_VERSION,
            title: title.into(),
            width: 1000,
            height: 220,
            payload: Payload::Force(force),
        }
    }

    pub fn kind(&self) -> &'static str {
        match self.payload {
            Payload::Importance(_) => "importance",
            Payload::Summary(_) => "summary",
            Payload::Force(_) => "force",
        }
    }
}

pub fn write_json(spec: &PlotSpec) -> Result<String> {
    Ok(serde_json::to_string_pretty(spec)?)
}

pub fn read_json(text: &str) -> Result<PlotSpec> {
    Ok(serde_json::from_str(text)?)
}

/// At most four decimals, trailing zeros dropped: `0.79`, `0.7533`, `-1.5`.
pub fn fmt_num(v: f64) -> String {
    let s = format!("{v:.4}");
    let s = if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    };
    if s == "-0" {
        "0".into()
    } else {
        s
    }
}

fn esc(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            c => out.push(c),
        }
    }
    out
}

/// Coordinates are written with two decimals to keep output stable and small.
fn px(v: f64) -> String {
    let s = format!("{v:.2}");
    if s == "-0.00" {
        "0.00".into()
    } else {
        s
    }
}

fn svg_open(out: &mut String, spec: &PlotSpec) {
    let (w, h) = (spec.width, spec.height);
    let _ = writeln!(
        out,
        r#"<?xml version="1.0" encoding="UTF-8" standalone="no"?>"#
    );
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="Helvetica, Arial, sans-serif">"#
    );
    let _ = writeln!(
        out,
        r#"<rect x="0" y="0" width="{w}" height="{h}" fill="white"/>"#
    );
    let _ = writeln!(
        out,
        r#"<text x="{}" y="24" font-size="16" text-anchor="middle">{}</text>"#,
        w / 2,
        esc(&spec.title)
    );
}

/// Nice tick positions covering `[lo, hi]`.
fn ticks(lo: f64, hi: f64, target: usize) -> Vec<f64> {
    if hi <= lo {
        return vec![lo];
    }
    let raw = (hi - lo) / target as f64;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0]
        .iter()
        .map(|m| m * mag)
        .find(|s| *s >= raw)
        .unwrap_or(10.0 * mag);
    let start = (lo / step).ceil() as i64;
    let end = (hi / step).floor() as i64;
    (start..=end).map(|i| i as f64 * step).collect()
}

fn render_importance(out: &mut String, spec: &PlotSpec, t: &ImportanceTable) {
    let left = 180.0;
    let right = spec.width as f64 - 170.0;
    let top = 44.0;
    let bottom = spec.height as f64 - 40.0;
    let n = t.rows.len().max(1) as f64;
    let row_h = (bottom - top) / n;
    let max_total = t.rows.iter().map(|r| r.total).fold(0.0, f64::max);
    let scale = if max_total > 0.0 {
        (right - left) / max_total
    } else {
        0.0
    };

    for (i, row) in t.rows.iter().enumerate() {
        let y = top + i as f64 * row_h;
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{}" font-size="12" text-anchor="end" dominant-baseline="middle">{}</text>"#,
            px(left - 6.0),
            px(y + row_h / 2.0),
            esc(&row.name)
        );
        let mut x = left;
        for (s, v) in row.per_label.iter().enumerate() {
            let w = v * scale;
            if w > 0.0 {
                let _ = writeln!(
                    out,
                    r#"<rect x="{}" y="{}" width="{}" height="{}" fill="{}"/>"#,
                    px(x),
                    px(y + row_h * 0.15),
                    px(w),
                    px(row_h * 0.7),
                    PALETTE[s % PALETTE.len()]
                );
            }
            x += w;
        }
    }
    let _ = writeln!(
        out,
        r##"<line x1="{l}" y1="{b}" x2="{r}" y2="{b}" stroke="#333"/>"##,
        l = px(left),
        r = px(right),
        b = px(bottom)
    );
    for tick in ticks(0.0, max_total, 5) {
        let x = left + tick * scale;
        let _ = writeln!(
            out,
            r##"<line x1="{x}" y1="{b}" x2="{x}" y2="{b2}" stroke="#333"/><text x="{x}" y="{ty}" font-size="11" text-anchor="middle">{}</text>"##,
            fmt_num(tick),
            x = px(x),
            b = px(bottom),
            b2 = px(bottom + 4.0),
            ty = px(bottom + 16.0)
        );
    }
    let _ = writeln!(
        out,
        r#"<text x="{}" y="{}" font-size="12" text-anchor="middle">mean(|SHAP value|)</text>"#,
        px((left + right) / 2.0),
        px(bottom + 32.0)
    );
    for (s, name) in t.label_names.iter().enumerate() {
        let y = top + s as f64 * 18.0;
        let _ = writeln!(
            out,
            r#"<rect x="{}" y="{}" width="12" height="12" fill="{}"/><text x="{}" y="{}" font-size="11" dominant-baseline="middle">{}</text>"#,
            px(right + 16.0),
            px(y),
            PALETTE[s % PALETTE.len()],
            px(right + 34.0),
            px(y + 6.0),
            esc(name)
        );
    }
}

fn lerp_color(t: f64) -> String {
    // low = blue, high = red
    let (lo, hi) = ((0x00u8, 0x8b, 0xfb), (0xffu8, 0x00, 0x51));
    let t = t.clamp(0.0, 1.0);
    let mix = |a: u8, b: u8| (a as f64 + (b as f64 - a as f64) * t).round() as u8;
    format!(
        "#{:02x}{:02x}{:02x}",
        mix(lo.0, hi.0),
        mix(lo.1, hi.1),
        mix(lo.2, hi.2)
    )
}

fn render_summary(out: &mut String, spec: &PlotSpec, s: &SummaryPoints) {
    let left = 180.0;
    let right = spec.width as f64 - 90.0;
    let top = 44.0;
    let bottom = spec.height as f64 - 50.0;
    let n = s.rows.len().max(1) as f64;
    let row_h = (bottom - top) / n;
    let all = s.rows.iter().flat_map(|r| r.points.iter().map(|p| p.shap));
    let (lo, hi) = all.fold((0.0f64, 0.0f64), |(lo, hi), v| (lo.min(v), hi.max(v)));
    let pad = if hi > lo { (hi - lo) * 0.05 } else { 1.0 };
    let (lo, hi) = (lo - pad, hi + pad);
    let sx = |v: f64| left + (v - lo) / (hi - lo) * (right - left);

    let _ = writeln!(
        out,
        r##"<line x1="{x}" y1="{t}" x2="{x}" y2="{b}" stroke="#999"/>"##,
        x = px(sx(0.0)),
        t = px(top),
        b = px(bottom)
    );
    for (i, row) in s.rows.iter().enumerate() {
        let cy = top + (i as f64 + 0.5) * row_h;
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{}" font-size="12" text-anchor="end" dominant-baseline="middle">{}</text>"#,
            px(left - 6.0),
            px(cy),
            esc(&row.name)
        );
        for p in &row.points {
            let _ = writeln!(
                out,
                r#"<circle cx="{}" cy="{}" r="3" fill="{}" fill-opacity="0.8"/>"#,
                px(sx(p.shap)),
                px(cy + p.jitter * row_h),
                lerp_color(p.color)
            );
        }
    }
    let _ = writeln!(
        out,
        r##"<line x1="{l}" y1="{b}" x2="{r}" y2="{b}" stroke="#333"/>"##,
        l = px(left),
        r = px(right),
        b = px(bottom)
    );
    for tick in ticks(lo, hi, 6) {
        let x = sx(tick);
        let _ = writeln!(
            out,
            r##"<line x1="{x}" y1="{b}" x2="{x}" y2="{b2}" stroke="#333"/><text x="{x}" y="{ty}" font-size="11" text-anchor="middle">{}</text>"##,
            fmt_num(tick),
            x = px(x),
            b = px(bottom),
            b2 = px(bottom + 4.0),
            ty = px(bottom + 16.0)
        );
    }
    let _ = writeln!(
        out,
        r#"<text x="{}" y="{}" font-size="12" text-anchor="middle">SHAP value (impact on model output)</text>"#,
        px((left + right) / 2.0),
        px(bottom + 34.0)
    );
    // colour bar
    let bar_x = right + 30.0;
    let _ = writeln!(
        out,
        r##"<defs><linearGradient id="featval" x1="0" y1="1" x2="0" y2="0"><stop offset="0" stop-color="{}"/><stop offset="1" stop-color="{}"/></linearGradient></defs><rect x="{bx}" y="{t}" width="10" height="{h}" fill="url(#featval)"/><text x="{tx}" y="{t2}" font-size="11">High</text><text x="{tx}" y="{b}" font-size="11">Low</text>"##,
        lerp_color(0.0),
        lerp_color(1.0),
        bx = px(bar_x),
        t = px(top),
        h = px(bottom - top),
        tx = px(bar_x + 14.0),
        t2 = px(top + 10.0),
        b = px(bottom)
    );
}

fn render_force(out: &mut String, spec: &PlotSpec, f: &ForceData) {
    let left = 40.0;
    let right = spec.width as f64 - 40.0;
    let axis_y = 90.0;
    let bar_y = 110.0;
    let bar_h = 26.0;
    let total_up: f64 = f.up.iter().map(|c| c.shap).sum();
    let total_down: f64 = f.down.iter().map(|c| -c.shap).sum();
    // up forces end at fx from the left, down forces start at fx to the right
    let up_start = f.fx - total_up;
    let down_end = f.fx + total_down;
    let lo = up_start.min(f.base_value).min(f.fx);
    let hi = down_end.max(f.base_value).max(f.fx);
    let pad = if hi > lo { (hi - lo) * 0.08 } else { 0.05 };
    let (lo, hi) = (lo - pad, hi + pad);
    let sx = |v: f64| left + (v - lo) / (hi - lo) * (right - left);

    let _ = writeln!(
        out,
        r##"<line x1="{l}" y1="{y}" x2="{r}" y2="{y}" stroke="#333"/>"##,
        l = px(left),
        r = px(right),
        y = px(axis_y)
    );
    for tick in ticks(lo, hi, 8) {
        let x = sx(tick);
        let _ = writeln!(
            out,
            r##"<line x1="{x}" y1="{y}" x2="{x}" y2="{y2}" stroke="#999"/><text x="{x}" y="{ty}" font-size="10" fill="#666" text-anchor="middle">{}</text>"##,
            fmt_num(tick),
            x = px(x),
            y = px(axis_y - 4.0),
            y2 = px(axis_y),
            ty = px(axis_y - 8.0)
        );
    }

    let mut x0 = up_start;
    for c in f.up.iter().rev() {
        let x1 = x0 + c.shap;
        force_segment(out, sx(x0), sx(x1), bar_y, bar_h, "#ff0051", c);
        x0 = x1;
    }
    let mut x0 = f.fx;
    for c in &f.down {
        let x1 = x0 - c.shap;
        force_segment(out, sx(x0), sx(x1), bar_y, bar_h, "#008bfb", c);
        x0 = x1;
    }

    let marker = |out: &mut String, v: f64, caption: &str, y_text: f64| {
        let x = sx(v);
        let _ = writeln!(
            out,
            r##"<line x1="{x}" y1="{y1}" x2="{x}" y2="{y2}" stroke="#000" stroke-dasharray="3,2"/><text x="{x}" y="{ty}" font-size="11" text-anchor="middle">{}</text><text x="{x}" y="{ty2}" font-size="13" font-weight="bold" text-anchor="middle">{}</text>"##,
            esc(caption),
            fmt_num(v),
            x = px(x),
            y1 = px(axis_y),
            y2 = px(bar_y + bar_h + 4.0),
            ty = px(y_text),
            ty2 = px(y_text + 15.0)
        );
    };
    marker(out, f.base_value, "base value", 40.0);
    marker(out, f.fx, "f(x)", 170.0);
    let _ = writeln!(
        out,
        r##"<text x="{}" y="{}" font-size="11" fill="#ff0051">higher</text><text x="{}" y="{}" font-size="11" fill="#008bfb" text-anchor="end">lower</text>"##,
        px(left),
        px(axis_y - 22.0),
        px(right),
        px(axis_y - 22.0)
    );
}

fn force_segment(
    out: &mut String,
    xa: f64,
    xb: f64,
    y: f64,
    h: f64,
    color: &str,
    c: &Contribution,
) {
    let (l, r) = (xa.min(xb), xa.max(xb));
    let _ = writeln!(
        out,
        r##"<rect x="{}" y="{}" width="{}" height="{}" fill="{}" stroke="white" stroke-width="1"><title>{} = {} ({})</title></rect>"##,
        px(l),
        px(y),
        px(r - l),
        px(h),
        color,
        esc(&c.name),
        fmt_num(c.value),
        fmt_num(c.shap)
    );
    if r - l >= 48.0 {
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{}" font-size="10" text-anchor="middle">{}</text>"#,
            px((l + r) / 2.0),
            px(y + h + 12.0),
            esc(&c.name)
        );
    }
}

/// Standalone SVG 1.1 document for a plot spec.
pub fn render_svg(spec: &PlotSpec) -> String {
    let mut out = String::new();
    svg_open(&mut out, spec);
    match &spec.payload {
        Payload::Importance(t) => render_importance(&mut out, spec, t),
        Payload::Summary(s) => render_summary(&mut out, spec, s),
        Payload::Force(f) => render_force(&mut out, spec, f),
    }
    out.push_str("</svg>\n");
    out
}
