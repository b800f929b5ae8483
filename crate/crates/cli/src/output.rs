//! File emission: CSV tables, SVG line plots and the summary report.
//! All files are written to a temporary name first and renamed into place.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

/// Format a float with shortest round-trip precision.
pub fn fmt_f64(v: f64) -> String {
    format!("{v}")
}

fn csv_field(s: &str) -> String {
    if s.contains(',') || s.contains('"') || s.contains('\n') {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

pub fn write_atomic(path: &Path, content: &str) -> io::Result<()> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, content)?;
    fs::rename(&tmp, path)
}

/// A CSV table built in memory and written atomically.
pub struct Csv {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Csv {
    pub fn new(header: &[&str]) -> Self {
        Csv {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn with_header(header: Vec<String>) -> Self {
        Csv {
            header,
            rows: Vec::new(),
        }
    }

    pub fn row(&mut self, fields: Vec<String>) {
        assert_eq!(fields.len(), self.header.len(), "CSV row width");
        self.rows.push(fields);
    }

    pub fn numeric_row(&mut self, values: &[f64]) {
        self.row(values.iter().map(|v| fmt_f64(*v)).collect());
    }

    pub fn write(&self, path: &Path) -> io::Result<()> {
        let mut s = String::new();
        let fields: Vec<String> = self.header.iter().map(|h| csv_field(h)).collect();
        s.push_str(&fields.join(","));
        s.push_str("\r\n");
        for row in &self.rows {
            let fields: Vec<String> = row.iter().map(|f| csv_field(f)).collect();
            s.push_str(&fields.join(","));
            s.push_str("\r\n");
        }
        write_atomic(path, &s)
    }
}

const PALETTE: [&str; 6] = ["#1f6fb2", "#d1495b", "#2e933c", "#8f2d56", "#e2a310", "#40476d"];

/// One polyline of a chart.
pub struct Series<'a> {
    pub label: &'a str,
    pub points: Vec<(f64, f64)>,
}

/// A minimal static SVG line chart; presentational only, every verdict comes
/// from CSV-backed numbers.
pub fn line_chart(path: &Path, title: &str, series: &[Series<'_>]) -> io::Result<()> {
    let (w, h) = (720.0, 440.0);
    let (ml, mr, mt, mb) = (70.0, 20.0, 40.0, 50.0);
    let (pw, ph) = (w - ml - mr, h - mt - mb);

    let mut x_min = f64::INFINITY;
    let mut x_max = f64::NEG_INFINITY;
    let mut y_min = f64::INFINITY;
    let mut y_max = f64::NEG_INFINITY;
    for s in series {
        for &(x, y) in &s.points {
            x_min = x_min.min(x);
            x_max = x_max.max(x);
            y_min = y_min.min(y);
            y_max = y_max.max(y);
        }
    }
    if !(x_min < x_max) {
        x_max = x_min + 1.0;
    }
    if !(y_min < y_max) {
        y_max = y_min + 1.0;
    }
    let pad = 0.05 * (y_max - y_min);
    y_min -= pad;
    y_max += pad;
    let px = |x: f64| ml + (x - x_min) / (x_max - x_min) * pw;
    let py = |y: f64| mt + (1.0 - (y - y_min) / (y_max - y_min)) * ph;

    let mut svg = String::new();
    let _ = write!(
        svg,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\">\n\
         <rect width=\"{w}\" height=\"{h}\" fill=\"white\"/>\n\
         <text x=\"{}\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"16\">{}</text>\n\
         <rect x=\"{ml}\" y=\"{mt}\" width=\"{pw}\" height=\"{ph}\" fill=\"none\" stroke=\"#444\"/>\n",
        w / 2.0,
        title
    );
    for (tick, anchor, xpos, ypos) in [
        (x_min, "start", ml, h - mb + 20.0),
        (x_max, "end", ml + pw, h - mb + 20.0),
    ] {
        let _ = writeln!(
            svg,
            "<text x=\"{xpos}\" y=\"{ypos}\" text-anchor=\"{anchor}\" font-family=\"sans-serif\" font-size=\"12\">{:.4}</text>",
            tick
        );
    }
    for (tick, ypos) in [(y_min, mt + ph), (y_max, mt + 12.0)] {
        let _ = writeln!(
            svg,
            "<text x=\"{}\" y=\"{ypos}\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"12\">{:.4}</text>",
            ml - 6.0,
            tick
        );
    }
    for (i, s) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let mut d = String::new();
        for &(x, y) in &s.points {
            if y.is_finite() && x.is_finite() {
                let _ = write!(d, "{:.2},{:.2} ", px(x), py(y));
            }
        }
        let _ = writeln!(
            svg,
            "<polyline points=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\"/>",
            d.trim_end()
        );
        let _ = writeln!(
            svg,
            "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"12\" fill=\"{color}\">{}</text>",
            ml + 10.0,
            mt + 18.0 + 16.0 * i as f64,
            s.label
        );
    }
    svg.push_str("</svg>\n");
    write_atomic(path, &svg)
}

/// Scatter markers added on top of a chart are easier to emit as their own
/// tiny SVG group; nullcline plots use circles for equilibria.
pub fn scatter_chart(
    path: &Path,
    title: &str,
    series: &[Series<'_>],
    markers: &[(f64, f64, &str)],
) -> io::Result<()> {
    // draw the lines, then splice the markers in before the closing tag
    line_chart(path, title, series)?;
    if markers.is_empty() {
        return Ok(());
    }
    let mut svg = fs::read_to_string(path)?;
    let body = svg.trim_end().trim_end_matches("</svg>").to_string();

    // recompute the same mapping the chart used
    let (w, h) = (720.0, 440.0);
    let (ml, mr, mt, mb) = (70.0, 20.0, 40.0, 50.0);
    let (pw, ph) = (w - ml - mr, h - mt - mb);
    let mut x_min = f64::INFINITY;
    let mut x_max = f64::NEG_INFINITY;
    let mut y_min = f64::INFINITY;
    let mut y_max = f64::NEG_INFINITY;
    for s in series {
        for &(x, y) in &s.points {
            x_min = x_min.min(x);
            x_max = x_max.max(x);
            y_min = y_min.min(y);
            y_max = y_max.max(y);
        }
    }
    if !(x_min < x_max) {
        x_max = x_min + 1.0;
    }
    if !(y_min < y_max) {
        y_max = y_min + 1.0;
    }
    let pad = 0.05 * (y_max - y_min);
    y_min -= pad;
    y_max += pad;

    svg = body;
    for &(x, y, color) in markers {
        let cx = ml + (x - x_min) / (x_max - x_min) * pw;
        let cy = mt + (1.0 - (y - y_min) / (y_max - y_min)) * ph;
        let _ = writeln!(
            svg,
            "<circle cx=\"{cx:.2}\" cy=\"{cy:.2}\" r=\"5\" fill=\"{color}\" stroke=\"#222\"/>"
        );
    }
    svg.push_str("</svg>\n");
    write_atomic(path, &svg)
}

/// Accumulates the structured text report and the list of written files.
pub struct Report {
    lines: Vec<String>,
    files: Vec<PathBuf>,
    pub passed: bool,
}

impl Report {
    pub fn new(kind: &str) -> Self {
        Report {
            lines: vec![format!("scenario: {kind}")],
            files: Vec::new(),
            passed: true,
        }
    }

    pub fn note(&mut self, line: impl Into<String>) {
        self.lines.push(line.into());
    }

    pub fn verdict(&mut self, name: &str, pass: bool, detail: &str) {
        if !pass {
            self.passed = false;
        }
        self.lines
            .push(format!("{name}: {} [{detail}]", if pass { "PASS" } else { "FAIL" }));
    }

    pub fn file(&mut self, path: PathBuf) {
        self.files.push(path);
    }

    pub fn finish(mut self, out_dir: &Path) -> io::Result<(bool, Vec<PathBuf>)> {
        self.lines
            .push(format!("result: {}", if self.passed { "PASS" } else { "FAIL" }));
        let path = out_dir.join("summary.txt");
        write_atomic(&path, &(self.lines.join("\n") + "\n"))?;
        self.files.push(path);
        Ok((self.passed, self.files))
    }
}
