use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum XTransform {
    Identity,
    /// Plot `1 - x`.
    OneMinus,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PlotSpec {
    pub x: String,
    pub y: String,
    /// Column splitting rows into lines; one line when `None`.
    pub series: Option<String>,
    pub series_label: String,
    pub x_transform: XTransform,
    pub title: String,
    pub x_label: String,
    pub y_label: String,
}

impl PlotSpec {
    pub fn sweep() -> Self {
        Self {
            x: "lambda".into(),
            y: "leader_payoff".into(),
            series: Some("N".into()),
            series_label: "N".into(),
            x_transform: XTransform::OneMinus,
            title: "Mean packets delivered vs jammer strength".into(),
            x_label: "1 - lambda".into(),
            y_label: "mean leader payoff".into(),
        }
    }

    pub fn gateways() -> Self {
        Self {
            series: Some("M".into()),
            series_label: "M".into(),
            title: "Gateway layouts".into(),
            ..Self::sweep()
        }
    }

    pub fn fictitious() -> Self {
        Self {
            x: "round".into(),
            y: "leader_payoff".into(),
            series: None,
            series_label: String::new(),
            x_transform: XTransform::Identity,
            title: "Alternating best responses".into(),
            x_label: "round".into(),
            y_label: "leader payoff".into(),
        }
    }

    pub fn preset(name: &str) -> Result<Self> {
        match name {
            "sweep" | "scaling" => Ok(Self::sweep()),
            "gateways" => Ok(Self::gateways()),
            "fictitious" => Ok(Self::fictitious()),
            other => Err(Error::invalid(format!("unknown plot kind `{other}`"))),
        }
    }
}

type Series = BTreeMap<u64, (f64, usize)>;

/// Sort key for series labels: numeric labels by value, others after.
fn label_key(label: &str) -> (u8, u64, String) {
    match label.parse::<f64>() {
        Ok(v) if v >= 0.0 => (0, v.to_bits(), label.to_owned()),
        _ => (1, 0, label.to_owned()),
    }
}

type Curve = (String, Vec<(f64, f64)>);

fn collect(csv_text: &str, spec: &PlotSpec) -> Result<Vec<Curve>> {
    let mut reader = csv::Reader::from_reader(csv_text.as_bytes());
    let headers = reader.headers()?.clone();
    let column = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Format(format!("column `{name}` missing")))
    };
    let xi = column(&spec.x)?;
    let yi = column(&spec.y)?;
    let si = spec.series.as_deref().map(column).transpose()?;

    let mut series: BTreeMap<(u8, u64, String), Series> = BTreeMap::new();
    for record in reader.records() {
        let record = record?;
        let field = |i: usize| record.get(i).unwrap_or("");
        let (xs, ys) = (field(xi), field(yi));
        if ys.is_empty() {
            continue;
        }
        let parse = |s: &str| {
            s.parse::<f64>()
                .map_err(|_| Error::Format(format!("`{s}` is not a number")))
        };
        let x = match spec.x_transform {
            XTransform::Identity => parse(xs)?,
            XTransform::OneMinus => 1.0 - parse(xs)?,
        };
        let y = parse(ys)?;
        if !x.is_finite() || !y.is_finite() {
            return Err(Error::Format("non-finite plot value".into()));
        }
        let label = si.map(|i| field(i).to_owned()).unwrap_or_default();
        // shift so negative x still orders by bit pattern
        let e = series
            .entry(label_key(&label))
            .or_default()
            .entry((x + 1e6).to_bits())
            .or_default();
        e.0 += y;
        e.1 += 1;
    }
    if series.is_empty() {
        return Err(Error::Format("no data rows to plot".into()));
    }
    Ok(series
        .into_iter()
        .map(|((_, _, label), pts)| {
            let pts = pts
                .into_iter()
                .map(|(bits, (sum, n))| (f64::from_bits(bits) - 1e6, sum / n as f64))
                .collect();
            (label, pts)
        })
        .collect())
}

fn nice_range(lo: f64, hi: f64) -> (f64, f64) {
    if hi - lo < 1e-12 {
        (lo - 0.5, hi + 0.5)
    } else {
        (lo, hi)
    }
}

const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

/// Renders the averaged series of a CSV as an SVG line chart.
pub fn render_svg(csv_text: &str, spec: &PlotSpec) -> Result<String> {
    let series = collect(csv_text, spec)?;
    let all = series.iter().flat_map(|(_, pts)| pts.iter());
    let (mut x0, mut x1, mut y0, mut y1) = (f64::MAX, f64::MIN, 0.0f64, f64::MIN);
    for &(x, y) in all {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    let (x0, x1) = nice_range(x0, x1);
    let (y0, y1) = nice_range(y0, y1 * 1.05);

    let (w, h) = (640.0, 420.0);
    let (left, right, top, bottom) = (70.0, 130.0, 40.0, 60.0);
    let pw = w - left - right;
    let ph = h - top - bottom;
    let sx = |x: f64| left + (x - x0) / (x1 - x0) * pw;
    let sy = |y: f64| top + ph - (y - y0) / (y1 - y0) * ph;

    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(out, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(
        out,
        r#"<text x="{:.2}" y="24" text-anchor="middle" font-size="15">{}</text>"#,
        left + pw / 2.0,
        escape(&spec.title)
    );
    let _ = writeln!(
        out,
        r#"<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#
    );
    for i in 0..=5 {
        let t = f64::from(i) / 5.0;
        let (xv, yv) = (x0 + t * (x1 - x0), y0 + t * (y1 - y0));
        let (px, py) = (sx(xv), sy(yv));
        let _ = writeln!(
            out,
            r##"<line x1="{px:.2}" y1="{:.2}" x2="{px:.2}" y2="{:.2}" stroke="#ccc"/><text x="{px:.2}" y="{:.2}" text-anchor="middle">{}</text>"##,
            top,
            top + ph,
            top + ph + 18.0,
            tick(xv)
        );
        let _ = writeln!(
            out,
            r##"<line x1="{left}" y1="{py:.2}" x2="{:.2}" y2="{py:.2}" stroke="#ccc"/><text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"##,
            left + pw,
            left - 6.0,
            py + 4.0,
            tick(yv)
        );
    }
    let _ = writeln!(
        out,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
        left + pw / 2.0,
        h - 18.0,
        escape(&spec.x_label)
    );
    let _ = writeln!(
        out,
        r#"<text x="18" y="{:.2}" text-anchor="middle" transform="rotate(-90 18 {:.2})">{}</text>"#,
        top + ph / 2.0,
        top + ph / 2.0,
        escape(&spec.y_label)
    );

    for (k, (label, pts)) in series.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        let coords: Vec<String> = pts
            .iter()
            .map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y)))
            .collect();
        let _ = writeln!(
            out,
            r#"<polyline fill="none" stroke="{color}" stroke-width="2" points="{}"/>"#,
            coords.join(" ")
        );
        let ly = top + 14.0 + 18.0 * k as f64;
        let name = if spec.series.is_some() {
            format!("{} = {}", spec.series_label, label)
        } else {
            spec.y.clone()
        };
        let _ = writeln!(
            out,
            r#"<line x1="{:.2}" y1="{ly:.2}" x2="{:.2}" y2="{ly:.2}" stroke="{color}" stroke-width="2"/><text x="{:.2}" y="{:.2}">{}</text>"#,
            left + pw + 10.0,
            left + pw + 30.0,
            left + pw + 36.0,
            ly + 4.0,
            escape(&name)
        );
    }
    out.push_str("</svg>\n");
    Ok(out)
}

fn tick(v: f64) -> String {
    let s = format!("{v:.2}");
    if s == "-0.00" {
        "0.00".into()
    } else {
        s
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Reads `csv_path`, renders it and writes `svg_path`. Nothing is written
/// when the CSV cannot be plotted.
pub fn emit_plot(csv_path: &Path, spec: &PlotSpec, svg_path: &Path) -> Result<()> {
    let text = std::fs::read_to_string(csv_path)?;
    let svg = render_svg(&text, spec)?;
    std::fs::write(svg_path, svg)?;
    Ok(())
}
