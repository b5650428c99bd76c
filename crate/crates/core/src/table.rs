//! Labeled numeric tables and their CSV, JSON and SVG renderings.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde_json::{json, Map, Value};

use crate::error::{domain, LabResult};

/// One numeric cell. `Exact` holds a decimal integer too large for `f64`.
#[derive(Clone, Debug, PartialEq)]
pub enum Cell {
    Real(f64),
    Int(i64),
    Exact(String),
}

impl Cell {
    pub fn as_f64(&self) -> f64 {
        match self {
            Cell::Real(x) => *x,
            Cell::Int(i) => *i as f64,
            Cell::Exact(s) => s.parse().unwrap_or(f64::NAN),
        }
    }

    fn render(&self) -> String {
        match self {
            Cell::Real(x) => format_real(*x),
            Cell::Int(i) => i.to_string(),
            Cell::Exact(s) => s.clone(),
        }
    }

    fn to_json(&self) -> Value {
        match self {
            Cell::Real(x) if x.is_finite() => json!(x),
            Cell::Real(x) => json!(format_real(*x)),
            Cell::Int(i) => json!(i),
            Cell::Exact(s) => json!(s),
        }
    }
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::Real(x)
    }
}

impl From<i64> for Cell {
    fn from(x: i64) -> Self {
        Cell::Int(x)
    }
}

impl From<usize> for Cell {
    fn from(x: usize) -> Self {
        Cell::Int(x as i64)
    }
}

impl From<u64> for Cell {
    fn from(x: u64) -> Self {
        Cell::Int(x as i64)
    }
}

/// Shortest round-trip text; exponent form outside [1e-4, 1e15).
pub fn format_real(x: f64) -> String {
    if x.is_nan() {
        "NaN".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf".into() } else { "-inf".into() }
    } else if x == 0.0 || (1e-4..1e15).contains(&x.abs()) {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

/// A rectangular table with named columns and free-form metadata.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct DataTable {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
    pub metadata: BTreeMap<String, String>,
}

impl DataTable {
    pub fn new<S: Into<String>>(columns: impl IntoIterator<Item = S>) -> Self {
        Self { columns: columns.into_iter().map(Into::into).collect(), ..Default::default() }
    }

    pub fn with_meta(mut self, key: &str, value: impl Into<String>) -> Self {
        self.metadata.insert(key.to_string(), value.into());
        self
    }

    pub fn push_row(&mut self, row: Vec<Cell>) -> LabResult<()> {
        if row.len() != self.columns.len() {
            return domain(format!("row has {} cells, table has {} columns", row.len(), self.columns.len()));
        }
        self.rows.push(row);
        Ok(())
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    pub fn column_f64(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.column_index(name)?;
        Some(self.rows.iter().map(|r| r[i].as_f64()).collect())
    }

    /// CSV with leading `# key=value` lines for the manifest hash and
    /// metadata, then a header row; '\n' line endings.
    pub fn to_csv(&self, manifest_hash: Option<&str>) -> String {
        let mut out = String::new();
        if let Some(h) = manifest_hash {
            let _ = writeln!(out, "# manifest_sha256={h}");
        }
        for (k, v) in &self.metadata {
            let _ = writeln!(out, "# {k}={v}");
        }
        out.push_str(&self.columns.join(","));
        out.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(Cell::render).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }

    /// Column-oriented JSON: {"manifest_sha256", "metadata", "columns",
    /// "data": {name: [values]}}.
    pub fn to_json(&self, manifest_hash: Option<&str>) -> String {
        let mut data = Map::new();
        for (i, name) in self.columns.iter().enumerate() {
            data.insert(name.clone(), Value::Array(self.rows.iter().map(|r| r[i].to_json()).collect()));
        }
        let doc = json!({
            "manifest_sha256": manifest_hash,
            "metadata": self.metadata,
            "columns": self.columns,
            "data": data,
        });
        let mut s = serde_json::to_string_pretty(&doc).expect("table serializes");
        s.push('\n');
        s
    }

    /// Line plot of every column against the first.
    pub fn to_svg_lines(&self, title: &str, manifest_hash: Option<&str>) -> String {
        let xs: Vec<f64> = self.rows.iter().map(|r| r[0].as_f64()).collect();
        let series: Vec<(String, Vec<f64>)> = (1..self.columns.len())
            .map(|j| (self.columns[j].clone(), self.rows.iter().map(|r| r[j].as_f64()).collect()))
            .collect();
        let ys = series.iter().flat_map(|(_, v)| v.iter().copied());
        let frame = Frame::fit(xs.iter().copied(), ys);
        let mut out = svg_open(title, manifest_hash);
        const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];
        for (k, (name, ys)) in series.iter().enumerate() {
            let pts: Vec<String> = xs
                .iter()
                .zip(ys)
                .filter(|(x, y)| x.is_finite() && y.is_finite())
                .map(|(&x, &y)| {
                    let (px, py) = frame.map(x, y);
                    format!("{px:.2},{py:.2}")
                })
                .collect();
            let color = COLORS[k % COLORS.len()];
            let _ = writeln!(
                out,
                r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
                pts.join(" ")
            );
            let _ = writeln!(
                out,
                r#"<text x="{}" y="{}" font-size="11" fill="{color}">{}</text>"#,
                MARGIN + 8.0,
                MARGIN + 14.0 * (k as f64 + 1.0),
                escape(name)
            );
        }
        frame.axes(&mut out, &self.columns[0]);
        out.push_str("</svg>\n");
        out
    }

    /// Heat map of column `z` over the (x, y) cells given by the first two
    /// columns.
    pub fn to_svg_heatmap(&self, z: usize, title: &str, manifest_hash: Option<&str>) -> String {
        let xs: Vec<f64> = self.rows.iter().map(|r| r[0].as_f64()).collect();
        let ys: Vec<f64> = self.rows.iter().map(|r| r[1].as_f64()).collect();
        let zs: Vec<f64> = self.rows.iter().map(|r| r[z].as_f64()).collect();
        let frame = Frame::fit(xs.iter().copied(), ys.iter().copied());
        let distinct = |v: &[f64]| {
            let mut u: Vec<f64> = v.iter().copied().filter(|x| x.is_finite()).collect();
            u.sort_by(f64::total_cmp);
            u.dedup();
            u.len().max(1)
        };
        let cw = (WIDTH - 2.0 * MARGIN) / distinct(&xs) as f64;
        let ch = (HEIGHT - 2.0 * MARGIN) / distinct(&ys) as f64;
        let zmax = zs.iter().filter(|v| v.is_finite()).fold(0.0f64, |m, v| m.max(v.abs())).max(1e-300);
        let mut out = svg_open(title, manifest_hash);
        for ((&x, &y), &v) in xs.iter().zip(&ys).zip(&zs) {
            if !(x.is_finite() && y.is_finite() && v.is_finite()) {
                continue;
            }
            let (px, py) = frame.map(x, y);
            let t = (v / zmax).clamp(-1.0, 1.0);
            let (r, g, b) = if t >= 0.0 {
                (255.0, 255.0 * (1.0 - t), 255.0 * (1.0 - t))
            } else {
                (255.0 * (1.0 + t), 255.0 * (1.0 + t), 255.0)
            };
            let _ = writeln!(
                out,
                r#"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="rgb({},{},{})"/>"#,
                px - cw / 2.0,
                py - ch / 2.0,
                cw,
                ch,
                r as u8,
                g as u8,
                b as u8
            );
        }
        frame.axes(&mut out, &self.columns[0]);
        out.push_str("</svg>\n");
        out
    }
}

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const MARGIN: f64 = 50.0;

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn svg_open(title: &str, manifest_hash: Option<&str>) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    if let Some(h) = manifest_hash {
        let _ = writeln!(out, "<desc>manifest_sha256={h}</desc>");
    }
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(out, r#"<text x="{}" y="24" font-size="14">{}</text>"#, MARGIN, escape(title));
    out
}

struct Frame {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
}

impl Frame {
    fn fit(xs: impl Iterator<Item = f64>, ys: impl Iterator<Item = f64>) -> Self {
        let range = |it: &mut dyn Iterator<Item = f64>| {
            let (lo, hi) = it.filter(|v| v.is_finite()).fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
            if !lo.is_finite() {
                (0.0, 1.0)
            } else if hi == lo {
                (lo - 0.5, hi + 0.5)
            } else {
                (lo, hi)
            }
        };
        let mut xs = xs;
        let mut ys = ys;
        let (x0, x1) = range(&mut xs);
        let (y0, y1) = range(&mut ys);
        Self { x0, x1, y0, y1 }
    }

    fn map(&self, x: f64, y: f64) -> (f64, f64) {
        let px = MARGIN + (x - self.x0) / (self.x1 - self.x0) * (WIDTH - 2.0 * MARGIN);
        let py = HEIGHT - MARGIN - (y - self.y0) / (self.y1 - self.y0) * (HEIGHT - 2.0 * MARGIN);
        (px, py)
    }

    fn axes(&self, out: &mut String, xlabel: &str) {
        let (l, r) = (MARGIN, WIDTH - MARGIN);
        let (t, b) = (MARGIN, HEIGHT - MARGIN);
        let _ = writeln!(out, r#"<polyline fill="none" stroke="black" points="{l},{t} {l},{b} {r},{b}"/>"#);
        let _ = writeln!(out, r#"<text x="{l}" y="{}" font-size="11">{}</text>"#, b + 16.0, format_real(self.x0));
        let _ = writeln!(out, r#"<text x="{}" y="{}" font-size="11" text-anchor="end">{}</text>"#, r, b + 16.0, format_real(self.x1));
        let _ = writeln!(out, r#"<text x="{}" y="{}" font-size="11" text-anchor="middle">{}</text>"#, (l + r) / 2.0, b + 32.0, escape(xlabel));
        let _ = writeln!(out, r#"<text x="{}" y="{b}" font-size="11" text-anchor="end">{}</text>"#, l - 4.0, format_real(self.y0));
        let _ = writeln!(out, r#"<text x="{}" y="{}" font-size="11" text-anchor="end">{}</text>"#, l - 4.0, t + 4.0, format_real(self.y1));
    }
}
