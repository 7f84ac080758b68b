//! Deterministic SVG rendering of CSV-shaped tables.
//!
//! Every number is printed with fixed precision, so identical tables give
//! identical bytes.

use std::fmt::Write as _;
use std::str::FromStr;

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum PlotError {
    #[error("{kind} plot needs columns {expected:?}, table has {found:?}")]
    Columns { kind: &'static str, expected: Vec<&'static str>, found: Vec<String> },
    #[error("{0} plot needs at least one row")]
    Empty(&'static str),
    #[error("non-finite value in column {0}")]
    NotFinite(String),
    #[error("unparseable table: {0}")]
    Parse(String),
    #[error("unknown plot kind '{0}'")]
    UnknownKind(String),
}

/// Numeric table with named columns.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(columns: &[&str], rows: Vec<Vec<f64>>) -> Self {
        Self { columns: columns.iter().map(|s| s.to_string()).collect(), rows }
    }

    /// Reads a header plus numeric rows; `inf`/`-inf` are accepted.
    pub fn from_csv(text: &str) -> Result<Self, PlotError> {
        let mut rdr = csv::ReaderBuilder::new().from_reader(text.as_bytes());
        let columns = rdr
            .headers()
            .map_err(|e| PlotError::Parse(e.to_string()))?
            .iter()
            .map(str::to_string)
            .collect();
        let mut rows = Vec::new();
        for rec in rdr.records() {
            let rec = rec.map_err(|e| PlotError::Parse(e.to_string()))?;
            let row = rec
                .iter()
                .map(|v| v.trim().parse::<f64>().map_err(|_| PlotError::Parse(format!("not a number: '{v}'"))))
                .collect::<Result<Vec<_>, _>>()?;
            rows.push(row);
        }
        Ok(Self { columns, rows })
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.columns.join(",");
        out.push('\n');
        for r in &self.rows {
            let cells: Vec<String> = r.iter().map(|v| v.to_string()).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }

    fn column(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r.get(i).copied().unwrap_or(f64::NAN)).collect())
    }

    fn require(&self, kind: PlotKind) -> Result<Vec<Vec<f64>>, PlotError> {
        let expected = kind.columns();
        let cols: Option<Vec<Vec<f64>>> = expected.iter().map(|c| self.column(c)).collect();
        let cols = cols.ok_or_else(|| PlotError::Columns { kind: kind.name(), expected: expected.to_vec(), found: self.columns.clone() })?;
        if self.rows.is_empty() {
            return Err(PlotError::Empty(kind.name()));
        }
        Ok(cols)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlotKind {
    Ecdf,
    /// Bars from `lo, hi, count` with an expected-count curve in `fit`.
    HistogramFit,
    Acf,
    Scatter,
    SeriesOverlay,
    Roc,
}

impl PlotKind {
    pub fn name(self) -> &'static str {
        match self {
            PlotKind::Ecdf => "ecdf",
            PlotKind::HistogramFit => "histogram",
            PlotKind::Acf => "acf",
            PlotKind::Scatter => "scatter",
            PlotKind::SeriesOverlay => "overlay",
            PlotKind::Roc => "roc",
        }
    }

    /// Required column names.
    pub fn columns(self) -> &'static [&'static str] {
        match self {
            PlotKind::Ecdf => &["value", "prob"],
            PlotKind::HistogramFit => &["lo", "hi", "count", "fit"],
            PlotKind::Acf => &["lag", "value", "band"],
            PlotKind::Scatter => &["x", "y"],
            PlotKind::SeriesOverlay => &["index", "measured", "predicted"],
            PlotKind::Roc => &["fpr", "tpr"],
        }
    }
}

impl FromStr for PlotKind {
    type Err = PlotError;

    fn from_str(s: &str) -> Result<Self, PlotError> {
        Ok(match s {
            "ecdf" => PlotKind::Ecdf,
            "histogram" | "histogram+fit" => PlotKind::HistogramFit,
            "acf" => PlotKind::Acf,
            "scatter" => PlotKind::Scatter,
            "overlay" | "series-overlay" => PlotKind::SeriesOverlay,
            "roc" => PlotKind::Roc,
            other => return Err(PlotError::UnknownKind(other.to_string())),
        })
    }
}

/// Title and axis labels; put units in the axis labels, e.g. `size (MB)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Labels {
    pub title: String,
    pub x: String,
    pub y: String,
}

impl Labels {
    pub fn new(title: &str, x: &str, y: &str) -> Self {
        Self { title: title.into(), x: x.into(), y: y.into() }
    }
}

const W: f64 = 640.0;
const H: f64 = 420.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 55.0;

struct Frame {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
}

impl Frame {
    fn new(xs: &[f64], ys: &[f64]) -> Self {
        let (x0, x1) = span(xs);
        let (y0, y1) = span(ys);
        Self { x0, x1, y0, y1 }
    }

    fn px(&self, x: f64) -> f64 {
        LEFT + (x - self.x0) / (self.x1 - self.x0) * (W - LEFT - RIGHT)
    }

    fn py(&self, y: f64) -> f64 {
        H - BOTTOM - (y - self.y0) / (self.y1 - self.y0) * (H - TOP - BOTTOM)
    }
}

fn span(v: &[f64]) -> (f64, f64) {
    let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !lo.is_finite() || !hi.is_finite() {
        return (0.0, 1.0);
    }
    if hi > lo {
        (lo, hi)
    } else {
        let pad = if lo == 0.0 { 1.0 } else { lo.abs() * 0.5 };
        (lo - pad, hi + pad)
    }
}

fn esc(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn tick(v: f64) -> String {
    let a = v.abs();
    if a != 0.0 && !(1e-3..1e5).contains(&a) {
        format!("{v:.2e}")
    } else {
        let s = format!("{v:.3}");
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    }
}

fn header(out: &mut String, labels: &Labels, f: &Frame) {
    writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
    )
    .unwrap();
    writeln!(out, r#"<rect x="0" y="0" width="{W}" height="{H}" fill="white"/>"#).unwrap();
    writeln!(out, r#"<text x="{:.1}" y="22" text-anchor="middle" font-size="14">{}</text>"#, W / 2.0, esc(&labels.title)).unwrap();
    let (bx, by) = (LEFT, H - BOTTOM);
    writeln!(out, r#"<line class="axis" x1="{bx:.1}" y1="{by:.1}" x2="{:.1}" y2="{by:.1}" stroke="black"/>"#, W - RIGHT).unwrap();
    writeln!(out, r#"<line class="axis" x1="{bx:.1}" y1="{by:.1}" x2="{bx:.1}" y2="{TOP:.1}" stroke="black"/>"#).unwrap();
    for i in 0..=4 {
        let t = i as f64 / 4.0;
        let xv = f.x0 + t * (f.x1 - f.x0);
        let yv = f.y0 + t * (f.y1 - f.y0);
        let (px, py) = (f.px(xv), f.py(yv));
        writeln!(out, r#"<text x="{px:.1}" y="{:.1}" text-anchor="middle">{}</text>"#, by + 16.0, tick(xv)).unwrap();
        writeln!(out, r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{}</text>"#, bx - 6.0, py + 4.0, tick(yv)).unwrap();
    }
    writeln!(out, r#"<text class="xlabel" x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#, (LEFT + W - RIGHT) / 2.0, H - 12.0, esc(&labels.x)).unwrap();
    writeln!(
        out,
        r#"<text class="ylabel" x="16" y="{:.1}" text-anchor="middle" transform="rotate(-90 16 {:.1})">{}</text>"#,
        (TOP + H - BOTTOM) / 2.0,
        (TOP + H - BOTTOM) / 2.0,
        esc(&labels.y)
    )
    .unwrap();
}

fn polyline(out: &mut String, class: &str, color: &str, f: &Frame, xs: &[f64], ys: &[f64], dashed: bool) {
    let pts: Vec<String> = xs.iter().zip(ys).map(|(x, y)| format!("{:.2},{:.2}", f.px(*x), f.py(*y))).collect();
    let dash = if dashed { r#" stroke-dasharray="5,3""# } else { "" };
    writeln!(out, r#"<polyline class="{class}" fill="none" stroke="{color}" stroke-width="1.5"{dash} points="{}"/>"#, pts.join(" ")).unwrap();
}

fn legend(out: &mut String, entries: &[(&str, &str)]) {
    for (i, (name, color)) in entries.iter().enumerate() {
        let y = TOP + 8.0 + 16.0 * i as f64;
        let x = W - RIGHT - 150.0;
        writeln!(out, r#"<g class="legend"><line x1="{x:.1}" y1="{y:.1}" x2="{:.1}" y2="{y:.1}" stroke="{color}" stroke-width="2"/><text x="{:.1}" y="{:.1}">{}</text></g>"#, x + 20.0, x + 26.0, y + 4.0, esc(name)).unwrap();
    }
}

fn check_finite(kind: PlotKind, cols: &[Vec<f64>]) -> Result<(), PlotError> {
    for (name, c) in kind.columns().iter().zip(cols) {
        if c.iter().any(|v| !v.is_finite()) {
            return Err(PlotError::NotFinite(name.to_string()));
        }
    }
    Ok(())
}

/// Renders `table` as a standalone SVG document.
pub fn render_plot(table: &Table, kind: PlotKind, labels: &Labels) -> Result<String, PlotError> {
    let cols = table.require(kind)?;
    check_finite(kind, &cols)?;
    let mut out = String::new();
    match kind {
        PlotKind::Ecdf => {
            let (xs, ps) = (&cols[0], &cols[1]);
            let (lo, hi) = span(xs);
            let right = hi + 0.05 * (hi - lo);
            let f = Frame { x0: lo - 0.05 * (hi - lo), x1: right, y0: 0.0, y1: 1.0 };
            header(&mut out, labels, &f);
            for i in 0..xs.len() {
                let end = xs.get(i + 1).copied().unwrap_or(right);
                let prev = if i == 0 { 0.0 } else { ps[i - 1] };
                writeln!(out, r#"<line class="riser" x1="{0:.2}" y1="{1:.2}" x2="{0:.2}" y2="{2:.2}" stroke="steelblue"/>"#, f.px(xs[i]), f.py(prev), f.py(ps[i])).unwrap();
                writeln!(out, r#"<line class="step" x1="{:.2}" y1="{2:.2}" x2="{:.2}" y2="{2:.2}" stroke="steelblue" stroke-width="1.5"/>"#, f.px(xs[i]), f.px(end), f.py(ps[i])).unwrap();
            }
        }
        PlotKind::HistogramFit => {
            let (lo, hi, count, fit) = (&cols[0], &cols[1], &cols[2], &cols[3]);
            let mut ys = count.clone();
            ys.extend(fit);
            ys.push(0.0);
            let xs: Vec<f64> = lo.iter().chain(hi).copied().collect();
            let f = Frame::new(&xs, &ys);
            header(&mut out, labels, &f);
            for i in 0..lo.len() {
                let (x0, x1) = (f.px(lo[i]), f.px(hi[i]));
                let (ytop, ybase) = (f.py(count[i]), f.py(f.y0.max(0.0)));
                writeln!(out, r#"<rect class="bar" x="{x0:.2}" y="{ytop:.2}" width="{:.2}" height="{:.2}" fill="lightsteelblue" stroke="white"/>"#, (x1 - x0).max(0.0), (ybase - ytop).max(0.0)).unwrap();
            }
            let mids: Vec<f64> = lo.iter().zip(hi).map(|(a, b)| (a + b) / 2.0).collect();
            polyline(&mut out, "fit", "firebrick", &f, &mids, fit, false);
            legend(&mut out, &[("observed", "lightsteelblue"), ("fit", "firebrick")]);
        }
        PlotKind::Acf => {
            let (lag, v, band) = (&cols[0], &cols[1], &cols[2]);
            let mut ys = v.clone();
            ys.extend(band.iter().map(|b| -b));
            ys.extend(band);
            let f = Frame::new(lag, &ys);
            header(&mut out, labels, &f);
            for (l, a) in lag.iter().zip(v) {
                writeln!(out, r#"<line class="stem" x1="{0:.2}" y1="{1:.2}" x2="{0:.2}" y2="{2:.2}" stroke="steelblue" stroke-width="2"/>"#, f.px(*l), f.py(0.0_f64.clamp(f.y0, f.y1)), f.py(*a)).unwrap();
            }
            let b = band[0];
            polyline(&mut out, "band", "grey", &f, &[lag[0], lag[lag.len() - 1]], &[b, b], true);
            polyline(&mut out, "band", "grey", &f, &[lag[0], lag[lag.len() - 1]], &[-b, -b], true);
        }
        PlotKind::Scatter => {
            let f = Frame::new(&cols[0], &cols[1]);
            header(&mut out, labels, &f);
            for (x, y) in cols[0].iter().zip(&cols[1]) {
                writeln!(out, r#"<circle class="point" cx="{:.2}" cy="{:.2}" r="2" fill="steelblue" fill-opacity="0.6"/>"#, f.px(*x), f.py(*y)).unwrap();
            }
        }
        PlotKind::SeriesOverlay => {
            let ys: Vec<f64> = cols[1].iter().chain(&cols[2]).copied().collect();
            let f = Frame::new(&cols[0], &ys);
            header(&mut out, labels, &f);
            polyline(&mut out, "measured", "black", &f, &cols[0], &cols[1], false);
            polyline(&mut out, "predicted", "firebrick", &f, &cols[0], &cols[2], true);
            legend(&mut out, &[("measured", "black"), ("predicted", "firebrick")]);
        }
        PlotKind::Roc => {
            let f = Frame { x0: 0.0, x1: 1.0, y0: 0.0, y1: 1.0 };
            header(&mut out, labels, &f);
            polyline(&mut out, "chance", "grey", &f, &[0.0, 1.0], &[0.0, 1.0], true);
            polyline(&mut out, "roc", "steelblue", &f, &cols[0], &cols[1], false);
            let auc: f64 = cols[0].windows(2).zip(cols[1].windows(2)).map(|(x, y)| (x[1] - x[0]) * (y[1] + y[0]) / 2.0).sum();
            writeln!(out, r#"<text class="auc" x="{:.1}" y="{:.1}" text-anchor="end">AUC = {auc:.3}</text>"#, W - RIGHT - 10.0, H - BOTTOM - 12.0).unwrap();
        }
    }
    out.push_str("</svg>\n");
    Ok(out)
}
