//! Minimal self-contained SVG charts: line panels and histograms.

use std::fmt::Write;

const PANEL_W: f64 = 440.0;
const PANEL_H: f64 = 320.0;
const MARGIN_L: f64 = 64.0;
const MARGIN_R: f64 = 16.0;
const MARGIN_T: f64 = 36.0;
const MARGIN_B: f64 = 48.0;
const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

#[derive(Debug, Clone)]
pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
    pub dashed: bool,
}

impl Series {
    pub fn new(name: impl Into<String>, points: Vec<(f64, f64)>) -> Self {
        Series {
            name: name.into(),
            points,
            dashed: false,
        }
    }

    pub fn dashed(mut self) -> Self {
        self.dashed = true;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bin {
    pub lo: f64,
    pub hi: f64,
    pub count: f64,
}

#[derive(Debug, Clone)]
pub enum Panel {
    Lines {
        title: String,
        x_label: String,
        y_label: String,
        series: Vec<Series>,
    },
    Bars {
        title: String,
        x_label: String,
        y_label: String,
        bins: Vec<Bin>,
    },
}

/// Equal-width histogram over the data range; empty input gives no bins.
pub fn histogram(values: &[f64], n_bins: usize) -> Vec<Bin> {
    let finite: Vec<f64> = values.iter().copied().filter(|v| v.is_finite()).collect();
    if finite.is_empty() || n_bins == 0 {
        return Vec::new();
    }
    let lo = finite.iter().copied().fold(f64::INFINITY, f64::min);
    let mut hi = finite.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if hi <= lo {
        hi = lo + 1.0;
    }
    let width = (hi - lo) / n_bins as f64;
    let mut counts = vec![0usize; n_bins];
    for v in finite {
        let k = (((v - lo) / width) as usize).min(n_bins - 1);
        counts[k] += 1;
    }
    counts
        .into_iter()
        .enumerate()
        .map(|(k, c)| Bin {
            lo: lo + k as f64 * width,
            hi: lo + (k + 1) as f64 * width,
            count: c as f64,
        })
        .collect()
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn tick_label(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    if v.abs() >= 1e4 || v.abs() < 1e-3 {
        return format!("{v:.2e}");
    }
    let s = format!("{v:.3}");
    s.trim_end_matches('0').trim_end_matches('.').to_string()
}

struct Frame {
    x0: f64,
    y0: f64,
    x_range: (f64, f64),
    y_range: (f64, f64),
}

impl Frame {
    fn plot_w(&self) -> f64 {
        PANEL_W - MARGIN_L - MARGIN_R
    }

    fn plot_h(&self) -> f64 {
        PANEL_H - MARGIN_T - MARGIN_B
    }

    fn px(&self, x: f64) -> f64 {
        let (lo, hi) = self.x_range;
        self.x0 + MARGIN_L + (x - lo) / (hi - lo) * self.plot_w()
    }

    fn py(&self, y: f64) -> f64 {
        let (lo, hi) = self.y_range;
        self.y0 + MARGIN_T + (1.0 - (y - lo) / (hi - lo)) * self.plot_h()
    }
}

fn padded(lo: f64, hi: f64) -> (f64, f64) {
    if !(lo.is_finite() && hi.is_finite()) {
        return (0.0, 1.0);
    }
    if hi > lo {
        let pad = 0.04 * (hi - lo);
        (lo - pad, hi + pad)
    } else {
        (lo - 0.5, hi + 0.5)
    }
}

fn axes(out: &mut String, f: &Frame, title: &str, x_label: &str, y_label: &str) {
    let (left, right) = (f.x0 + MARGIN_L, f.x0 + PANEL_W - MARGIN_R);
    let (top, bottom) = (f.y0 + MARGIN_T, f.y0 + PANEL_H - MARGIN_B);
    let _ = writeln!(
        out,
        r##"<rect x="{left:.2}" y="{top:.2}" width="{:.2}" height="{:.2}" fill="none" stroke="#444"/>"##,
        right - left,
        bottom - top
    );
    let _ = writeln!(
        out,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle" font-size="14">{}</text>"#,
        (left + right) / 2.0,
        f.y0 + 22.0,
        escape(title)
    );
    let _ = writeln!(
        out,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle" font-size="12">{}</text>"#,
        (left + right) / 2.0,
        f.y0 + PANEL_H - 10.0,
        escape(x_label)
    );
    let (cx, cy) = (f.x0 + 14.0, (top + bottom) / 2.0);
    let _ = writeln!(
        out,
        r#"<text x="{cx:.2}" y="{cy:.2}" text-anchor="middle" font-size="12" transform="rotate(-90 {cx:.2} {cy:.2})">{}</text>"#,
        escape(y_label)
    );
    for k in 0..=4 {
        let t = k as f64 / 4.0;
        let xv = f.x_range.0 + t * (f.x_range.1 - f.x_range.0);
        let yv = f.y_range.0 + t * (f.y_range.1 - f.y_range.0);
        let (x, y) = (f.px(xv), f.py(yv));
        let _ = writeln!(
            out,
            r##"<line x1="{x:.2}" y1="{bottom:.2}" x2="{x:.2}" y2="{:.2}" stroke="#444"/><text x="{x:.2}" y="{:.2}" text-anchor="middle" font-size="10">{}</text>"##,
            bottom + 4.0,
            bottom + 16.0,
            tick_label(xv)
        );
        let _ = writeln!(
            out,
            r##"<line x1="{:.2}" y1="{y:.2}" x2="{left:.2}" y2="{y:.2}" stroke="#444"/><text x="{:.2}" y="{:.2}" text-anchor="end" font-size="10">{}</text>"##,
            left - 4.0,
            left - 6.0,
            y + 3.0,
            tick_label(yv)
        );
    }
}

fn no_data(out: &mut String, x0: f64, y0: f64, title: &str) {
    let _ = writeln!(
        out,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle" font-size="14">{}</text>"#,
        x0 + PANEL_W / 2.0,
        y0 + 22.0,
        escape(title)
    );
    let _ = writeln!(
        out,
        r##"<text x="{:.2}" y="{:.2}" text-anchor="middle" font-size="16" fill="#888">no data</text>"##,
        x0 + PANEL_W / 2.0,
        y0 + PANEL_H / 2.0
    );
}

fn lines(out: &mut String, x0: f64, y0: f64, title: &str, x_label: &str, y_label: &str, series: &[Series]) {
    let pts = series.iter().flat_map(|s| s.points.iter()).filter(|(x, y)| x.is_finite() && y.is_finite());
    let (mut xl, mut xh, mut yl, mut yh) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    let mut any = false;
    for &(x, y) in pts {
        any = true;
        xl = xl.min(x);
        xh = xh.max(x);
        yl = yl.min(y);
        yh = yh.max(y);
    }
    if !any {
        no_data(out, x0, y0, title);
        return;
    }
    let f = Frame {
        x0,
        y0,
        x_range: padded(xl, xh),
        y_range: padded(yl, yh),
    };
    axes(out, &f, title, x_label, y_label);
    for (i, s) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let mut d = String::new();
        for &(x, y) in s.points.iter().filter(|(x, y)| x.is_finite() && y.is_finite()) {
            let _ = write!(d, "{}{:.2},{:.2}", if d.is_empty() { "" } else { " " }, f.px(x), f.py(y));
        }
        let dash = if s.dashed { r#" stroke-dasharray="5,3""# } else { "" };
        let _ = writeln!(
            out,
            r#"<polyline points="{d}" fill="none" stroke="{color}" stroke-width="1.5"{dash}/>"#
        );
        let ly = y0 + MARGIN_T + 14.0 + 14.0 * i as f64;
        let lx = x0 + PANEL_W - MARGIN_R - 8.0;
        let _ = writeln!(
            out,
            r#"<text x="{lx:.2}" y="{ly:.2}" text-anchor="end" font-size="10" fill="{color}">{}</text>"#,
            escape(&s.name)
        );
    }
}

fn bars(out: &mut String, x0: f64, y0: f64, title: &str, x_label: &str, y_label: &str, bins: &[Bin]) {
    if bins.is_empty() {
        no_data(out, x0, y0, title);
        return;
    }
    let xl = bins.iter().map(|b| b.lo).fold(f64::INFINITY, f64::min);
    let xh = bins.iter().map(|b| b.hi).fold(f64::NEG_INFINITY, f64::max);
    let yh = bins.iter().map(|b| b.count).fold(0.0, f64::max).max(1.0);
    let f = Frame {
        x0,
        y0,
        x_range: (xl, xh),
        y_range: (0.0, yh * 1.05),
    };
    axes(out, &f, title, x_label, y_label);
    for b in bins {
        let (x, w) = (f.px(b.lo), f.px(b.hi) - f.px(b.lo));
        let (y, base) = (f.py(b.count), f.py(0.0));
        let _ = writeln!(
            out,
            r##"<rect x="{x:.2}" y="{y:.2}" width="{:.2}" height="{:.2}" fill="{}" stroke="#fff" stroke-width="0.5"/>"##,
            w.max(0.0),
            (base - y).max(0.0),
            PALETTE[0]
        );
    }
}

/// Renders panels side by side into one SVG document.
pub fn render(title: &str, panels: &[Panel]) -> String {
    let n = panels.len().max(1) as f64;
    let (w, h) = (PANEL_W * n, PANEL_H + 28.0);
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w:.0}" height="{h:.0}" viewBox="0 0 {w:.0} {h:.0}" font-family="sans-serif">"#
    );
    let _ = writeln!(out, r##"<rect width="100%" height="100%" fill="#fff"/>"##);
    let _ = writeln!(
        out,
        r#"<text x="{:.2}" y="18" text-anchor="middle" font-size="15" font-weight="bold">{}</text>"#,
        w / 2.0,
        escape(title)
    );
    if panels.is_empty() {
        no_data(&mut out, 0.0, 28.0, "");
    }
    for (i, p) in panels.iter().enumerate() {
        let x0 = PANEL_W * i as f64;
        match p {
            Panel::Lines {
                title,
                x_label,
                y_label,
                series,
            } => lines(&mut out, x0, 28.0, title, x_label, y_label, series),
            Panel::Bars {
                title,
                x_label,
                y_label,
                bins,
            } => bars(&mut out, x0, 28.0, title, x_label, y_label, bins),
        }
    }
    out.push_str("</svg>\n");
    out
}
