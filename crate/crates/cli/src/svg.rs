//! Minimal static SVG plots. All coordinates are printed with three
//! decimals so identical inputs give identical files.

use std::fmt::Write;

use erw_core::Histogram;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const MARGIN: f64 = 56.0;

struct Frame {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
}

impl Frame {
    fn new(x0: f64, x1: f64, y0: f64, y1: f64) -> Self {
        let pad = |a: f64, b: f64| if a == b { (a - 0.5, b + 0.5) } else { (a, b) };
        let (x0, x1) = pad(x0, x1);
        let (y0, y1) = pad(y0, y1);
        Self { x0, x1, y0, y1 }
    }

    fn x(&self, v: f64) -> f64 {
        MARGIN + (v - self.x0) / (self.x1 - self.x0) * (WIDTH - 2.0 * MARGIN)
    }

    fn y(&self, v: f64) -> f64 {
        HEIGHT - MARGIN - (v - self.y0) / (self.y1 - self.y0) * (HEIGHT - 2.0 * MARGIN)
    }
}

fn open(title: &str, xlabel: &str, ylabel: &str, f: &Frame) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{:.3}" y="24" text-anchor="middle" font-size="14">{}</text>"#,
        WIDTH / 2.0,
        escape(title)
    );
    let (l, r, t, b) = (MARGIN, WIDTH - MARGIN, MARGIN, HEIGHT - MARGIN);
    let _ = writeln!(
        s,
        r#"<path d="M{l:.3} {t:.3} L{l:.3} {b:.3} L{r:.3} {b:.3}" fill="none" stroke="black"/>"#
    );
    for (v, anchor_x, anchor_y) in [(f.x0, l, b + 16.0), (f.x1, r, b + 16.0)] {
        let _ = writeln!(
            s,
            r#"<text x="{anchor_x:.3}" y="{anchor_y:.3}" text-anchor="middle">{}</text>"#,
            tick(v)
        );
    }
    for (v, y) in [(f.y0, b), (f.y1, t)] {
        let _ = writeln!(
            s,
            r#"<text x="{:.3}" y="{:.3}" text-anchor="end">{}</text>"#,
            l - 6.0,
            y + 4.0,
            tick(v)
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.3}" y="{:.3}" text-anchor="middle">{}</text>"#,
        WIDTH / 2.0,
        HEIGHT - 12.0,
        escape(xlabel)
    );
    let _ = writeln!(
        s,
        r#"<text x="16" y="{:.3}" text-anchor="middle" transform="rotate(-90 16 {:.3})">{}</text>"#,
        HEIGHT / 2.0,
        HEIGHT / 2.0,
        escape(ylabel)
    );
    s
}

fn tick(v: f64) -> String {
    format!("{v:.3}")
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn finite_range(values: impl Iterator<Item = f64>) -> Option<(f64, f64)> {
    values
        .filter(|v| v.is_finite())
        .fold(None, |acc, v| match acc {
            None => Some((v, v)),
            Some((lo, hi)) => Some((lo.min(v), hi.max(v))),
        })
}

/// Density histogram with an optional overlaid curve.
pub fn histogram(hist: &Histogram, overlay: Option<&dyn Fn(f64) -> f64>, title: &str, xlabel: &str) -> String {
    let total = hist.total().max(1) as f64;
    let width = hist.bin_width();
    let density: Vec<f64> = hist.bins.iter().map(|&c| c as f64 / (total * width)).collect();
    let grid: Vec<(f64, f64)> = match overlay {
        Some(f) => (0..=200)
            .map(|i| {
                let x = hist.lo + (hist.hi - hist.lo) * i as f64 / 200.0;
                (x, f(x))
            })
            .collect(),
        None => Vec::new(),
    };
    let ymax = density
        .iter()
        .copied()
        .chain(grid.iter().map(|p| p.1))
        .filter(|v| v.is_finite())
        .fold(0.0, f64::max);
    let frame = Frame::new(hist.lo, hist.hi, 0.0, ymax);
    let mut s = open(title, xlabel, "density", &frame);
    for (i, &h) in density.iter().enumerate() {
        if h <= 0.0 {
            continue;
        }
        let a = hist.lo + i as f64 * width;
        let (x, y) = (frame.x(a), frame.y(h));
        let _ = writeln!(
            s,
            r##"<rect x="{x:.3}" y="{y:.3}" width="{:.3}" height="{:.3}" fill="#9ab8d8" stroke="#4a6f96" stroke-width="0.5"/>"##,
            frame.x(a + width) - x,
            frame.y(0.0) - y
        );
    }
    if !grid.is_empty() {
        s.push_str(&polyline(&frame, &grid, "black"));
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.3}" y="{:.3}" text-anchor="end">outside range: {} below, {} above</text>"#,
        WIDTH - MARGIN,
        MARGIN - 8.0,
        hist.underflow,
        hist.overflow
    );
    s.push_str("</svg>\n");
    s
}

fn polyline(frame: &Frame, points: &[(f64, f64)], colour: &str) -> String {
    let mut d = String::new();
    for (i, &(x, y)) in points.iter().filter(|p| p.1.is_finite()).enumerate() {
        let _ = write!(d, "{}{:.3} {:.3}", if i == 0 { "M" } else { " L" }, frame.x(x), frame.y(y));
    }
    format!("<path d=\"{d}\" fill=\"none\" stroke=\"{colour}\" stroke-width=\"1.5\"/>\n")
}

/// Scatter plot with an optional horizontal reference line.
pub fn scatter(points: &[(f64, f64)], reference: Option<f64>, title: &str, xlabel: &str, ylabel: &str) -> String {
    let (x0, x1) = finite_range(points.iter().map(|p| p.0)).unwrap_or((0.0, 1.0));
    let (y0, y1) = finite_range(points.iter().map(|p| p.1).chain(reference)).unwrap_or((0.0, 1.0));
    let frame = Frame::new(x0, x1, y0, y1);
    let mut s = open(title, xlabel, ylabel, &frame);
    if let Some(r) = reference {
        s.push_str(&polyline(&frame, &[(x0, r), (x1, r)], "red"));
    }
    for &(x, y) in points {
        if x.is_finite() && y.is_finite() {
            let _ = writeln!(
                s,
                r##"<circle cx="{:.3}" cy="{:.3}" r="1.2" fill="#4a6f96"/>"##,
                frame.x(x),
                frame.y(y)
            );
        }
    }
    s.push_str("</svg>\n");
    s
}

/// Line plot with markers, e.g. mean speed against `p`.
pub fn line(points: &[(f64, f64)], reference: Option<f64>, title: &str, xlabel: &str, ylabel: &str) -> String {
    let (x0, x1) = finite_range(points.iter().map(|p| p.0)).unwrap_or((0.0, 1.0));
    let (y0, y1) = finite_range(points.iter().map(|p| p.1).chain(reference)).unwrap_or((0.0, 1.0));
    let frame = Frame::new(x0, x1, y0, y1);
    let mut s = open(title, xlabel, ylabel, &frame);
    if let Some(r) = reference {
        s.push_str(&polyline(&frame, &[(x0, r), (x1, r)], "red"));
    }
    s.push_str(&polyline(&frame, points, "#4a6f96"));
    for &(x, y) in points {
        if y.is_finite() {
            let _ = writeln!(
                s,
                r##"<circle cx="{:.3}" cy="{:.3}" r="3" fill="#4a6f96"/>"##,
                frame.x(x),
                frame.y(y)
            );
        }
    }
    s.push_str("</svg>\n");
    s
}
