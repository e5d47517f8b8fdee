//! Small self-contained SVG charts.

use std::fmt::Write;

const W: f64 = 640.0;
const H: f64 = 420.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 55.0;
const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

fn header(out: &mut String, title: &str, width: f64, height: f64) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        out,
        r#"<text x="{:.1}" y="22" text-anchor="middle" font-size="14">{}</text>"#,
        width / 2.0,
        escape(title)
    );
}

struct Axis {
    lo: f64,
    hi: f64,
    log: bool,
}

impl Axis {
    fn new(values: impl Iterator<Item = f64>, log: bool) -> Self {
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for v in values.filter(|v| v.is_finite() && (!log || *v > 0.0)) {
            let v = if log { v.log10() } else { v };
            lo = lo.min(v);
            hi = hi.max(v);
        }
        if !lo.is_finite() {
            (lo, hi) = (0.0, 1.0);
        }
        if log {
            lo = lo.floor();
            hi = hi.ceil();
        }
        if hi <= lo {
            hi = lo + 1.0;
        }
        Self { lo, hi, log }
    }

    fn frac(&self, v: f64) -> Option<f64> {
        let v = if self.log {
            if v <= 0.0 {
                return None;
            }
            v.log10()
        } else {
            v
        };
        Some((v - self.lo) / (self.hi - self.lo))
    }

    fn ticks(&self) -> Vec<(f64, String)> {
        if self.log {
            let (a, b) = (self.lo as i32, self.hi as i32);
            let step = ((b - a) / 8).max(1);
            (a..=b)
                .step_by(step as usize)
                .map(|e| ((e as f64 - self.lo) / (self.hi - self.lo), format!("1e{e}")))
                .collect()
        } else {
            (0..=4)
                .map(|i| {
                    let v = self.lo + (self.hi - self.lo) * i as f64 / 4.0;
                    (i as f64 / 4.0, fmt_num(v).to_string())
                })
                .collect()
        }
    }
}

fn fmt_num(v: f64) -> String {
    if v == 0.0 {
        "0".into()
    } else if v.abs() >= 1e4 || v.abs() < 1e-2 {
        format!("{v:.2e}")
    } else {
        format!("{v:.3}")
            .trim_end_matches('0')
            .trim_end_matches('.')
            .to_string()
    }
}

fn frame(out: &mut String, x: &Axis, y: &Axis, xlabel: &str, ylabel: &str) {
    let (pw, ph) = (W - LEFT - RIGHT, H - TOP - BOTTOM);
    let _ = writeln!(
        out,
        r#"<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#
    );
    for (f, label) in x.ticks() {
        let px = LEFT + f * pw;
        let _ = writeln!(
            out,
            r#"<line x1="{px:.1}" y1="{:.1}" x2="{px:.1}" y2="{:.1}" stroke="black"/><text x="{px:.1}" y="{:.1}" text-anchor="middle">{label}</text>"#,
            TOP + ph,
            TOP + ph + 5.0,
            TOP + ph + 18.0
        );
    }
    for (f, label) in y.ticks() {
        let py = TOP + ph - f * ph;
        let _ = writeln!(
            out,
            r#"<line x1="{:.1}" y1="{py:.1}" x2="{LEFT}" y2="{py:.1}" stroke="black"/><text x="{:.1}" y="{:.1}" text-anchor="end">{label}</text>"#,
            LEFT - 5.0,
            LEFT - 8.0,
            py + 4.0
        );
    }
    let _ = writeln!(
        out,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
        LEFT + pw / 2.0,
        H - 12.0,
        escape(xlabel)
    );
    let _ = writeln!(
        out,
        r#"<text x="16" y="{:.1}" text-anchor="middle" transform="rotate(-90 16 {:.1})">{}</text>"#,
        TOP + ph / 2.0,
        TOP + ph / 2.0,
        escape(ylabel)
    );
}

fn legend(out: &mut String, names: &[&str]) {
    for (i, name) in names.iter().enumerate() {
        let y = TOP + 14.0 + 16.0 * i as f64;
        let x = W - RIGHT - 150.0;
        let _ = writeln!(
            out,
            r#"<rect x="{x:.1}" y="{:.1}" width="10" height="10" fill="{}"/><text x="{:.1}" y="{y:.1}">{}</text>"#,
            y - 9.0,
            PALETTE[i % PALETTE.len()],
            x + 15.0,
            escape(name)
        );
    }
}

/// Marker plot of several `(x, y)` series; non-positive values are dropped
/// on log axes.
pub fn scatter(
    title: &str,
    xlabel: &str,
    ylabel: &str,
    series: &[(&str, &[(f64, f64)])],
    log_x: bool,
    log_y: bool,
) -> String {
    let x = Axis::new(series.iter().flat_map(|s| s.1.iter().map(|p| p.0)), log_x);
    let y = Axis::new(series.iter().flat_map(|s| s.1.iter().map(|p| p.1)), log_y);
    let mut out = String::new();
    header(&mut out, title, W, H);
    frame(&mut out, &x, &y, xlabel, ylabel);
    let (pw, ph) = (W - LEFT - RIGHT, H - TOP - BOTTOM);
    for (i, (_, pts)) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        for &(a, b) in pts.iter() {
            if let (Some(fx), Some(fy)) = (x.frac(a), y.frac(b)) {
                let _ = writeln!(
                    out,
                    r#"<circle cx="{:.1}" cy="{:.1}" r="2" fill="{color}" fill-opacity="0.6"/>"#,
                    LEFT + fx * pw,
                    TOP + ph - fy * ph
                );
            }
        }
    }
    legend(&mut out, &series.iter().map(|s| s.0).collect::<Vec<_>>());
    out.push_str("</svg>\n");
    out
}

/// Step outlines of histograms sharing the bin `edges`.
pub fn histogram(title: &str, xlabel: &str, edges: &[f64], series: &[(&str, &[usize])]) -> String {
    let x = Axis::new(edges.iter().copied(), false);
    let y = Axis::new(
        series
            .iter()
            .flat_map(|s| s.1.iter().map(|&c| c as f64))
            .chain([0.0]),
        false,
    );
    let mut out = String::new();
    header(&mut out, title, W, H);
    frame(&mut out, &x, &y, xlabel, "count");
    let (pw, ph) = (W - LEFT - RIGHT, H - TOP - BOTTOM);
    for (i, (_, counts)) in series.iter().enumerate() {
        let mut d = String::new();
        for (b, &c) in counts.iter().enumerate() {
            let x0 = LEFT + x.frac(edges[b]).unwrap_or(0.0) * pw;
            let x1 = LEFT + x.frac(edges[b + 1]).unwrap_or(0.0) * pw;
            let py = TOP + ph - y.frac(c as f64).unwrap_or(0.0) * ph;
            let _ = write!(
                d,
                "{}{x0:.1},{py:.1} L{x1:.1},{py:.1} ",
                if b == 0 { "M" } else { "L" }
            );
        }
        let _ = writeln!(
            out,
            r#"<path d="{}" fill="none" stroke="{}" stroke-width="1.5"/>"#,
            d.trim_end(),
            PALETTE[i % PALETTE.len()]
        );
    }
    legend(&mut out, &series.iter().map(|s| s.0).collect::<Vec<_>>());
    out.push_str("</svg>\n");
    out
}

/// Vertical bars with value labels.
pub fn bars(title: &str, ylabel: &str, items: &[(&str, f64)]) -> String {
    let y = Axis::new(items.iter().map(|i| i.1).chain([0.0]), false);
    let mut out = String::new();
    header(&mut out, title, W, H);
    let (pw, ph) = (W - LEFT - RIGHT, H - TOP - BOTTOM);
    let _ = writeln!(
        out,
        r#"<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#
    );
    for (f, label) in y.ticks() {
        let py = TOP + ph - f * ph;
        let _ = writeln!(
            out,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{label}</text>"#,
            LEFT - 8.0,
            py + 4.0
        );
    }
    let slot = pw / items.len().max(1) as f64;
    for (i, &(label, v)) in items.iter().enumerate() {
        let h = y.frac(v).unwrap_or(0.0) * ph;
        let px = LEFT + slot * i as f64 + slot * 0.15;
        let _ = writeln!(
            out,
            r#"<rect x="{px:.1}" y="{:.1}" width="{:.1}" height="{h:.1}" fill="{}"/><text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text><text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
            TOP + ph - h,
            slot * 0.7,
            PALETTE[i % PALETTE.len()],
            px + slot * 0.35,
            TOP + ph + 18.0,
            escape(label),
            px + slot * 0.35,
            TOP + ph - h - 4.0,
            fmt_num(v)
        );
    }
    let _ = writeln!(
        out,
        r#"<text x="16" y="{:.1}" text-anchor="middle" transform="rotate(-90 16 {:.1})">{}</text>"#,
        TOP + ph / 2.0,
        TOP + ph / 2.0,
        escape(ylabel)
    );
    out.push_str("</svg>\n");
    out
}

/// Grayscale-to-red heat map; `grid[row][col]`, row 0 drawn at the bottom.
/// `None` cells are drawn hatched gray.
pub fn heatmap(title: &str, grid: &[Vec<Option<f64>>]) -> String {
    let rows = grid.len();
    let cols = grid.first().map_or(0, Vec::len);
    let side = 480.0;
    let cell = side / rows.max(cols).max(1) as f64;
    let max = grid
        .iter()
        .flatten()
        .flatten()
        .fold(0.0f64, |a, &b| a.max(b));
    let mut out = String::new();
    let (width, height) = (side + 80.0, side + 70.0);
    header(&mut out, title, width, height);
    for (r, row) in grid.iter().enumerate() {
        for (c, v) in row.iter().enumerate() {
            let x = 40.0 + c as f64 * cell;
            let y = 40.0 + (rows - 1 - r) as f64 * cell;
            let fill = match v {
                None => "#bbbbbb".to_string(),
                Some(v) if max > 0.0 => {
                    let t = (v / max).clamp(0.0, 1.0);
                    let g = (255.0 * (1.0 - t)).round() as u8;
                    format!("#ff{g:02x}{g:02x}")
                }
                Some(_) => "#ffffff".to_string(),
            };
            if fill != "#ffffff" {
                let _ = writeln!(
                    out,
                    r#"<rect x="{x:.2}" y="{y:.2}" width="{:.2}" height="{:.2}" fill="{fill}"/>"#,
                    cell + 0.05,
                    cell + 0.05
                );
            }
        }
    }
    let _ = writeln!(
        out,
        r#"<rect x="40" y="40" width="{:.2}" height="{:.2}" fill="none" stroke="black"/>"#,
        cols as f64 * cell,
        rows as f64 * cell
    );
    let _ = writeln!(
        out,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">max {}</text>"#,
        width / 2.0,
        height - 10.0,
        fmt_num(max)
    );
    out.push_str("</svg>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn outputs_are_closed_svg() {
        let pts = [(1.0, 1.0), (10.0, 0.1), (100.0, 0.01)];
        for s in [
            scatter("ccdf", "k", "P", &[("in", &pts)], true, true),
            histogram("h", "phi", &[0.0, 1.0, 2.0], &[("GSCC", &[3, 4])]),
            bars("b", "share", &[("GSCC", 0.4), ("IN", 0.2)]),
            heatmap("m", &[vec![Some(1.0), None], vec![Some(0.0), Some(2.0)]]),
        ] {
            assert!(s.starts_with("<svg"));
            assert!(s.trim_end().ends_with("</svg>"));
        }
    }

    #[test]
    fn log_axis_drops_nonpositive() {
        let s = scatter(
            "t",
            "x",
            "y",
            &[("a", &[(0.0, 1.0), (1.0, 1.0)])],
            true,
            true,
        );
        assert_eq!(s.matches("<circle").count(), 1);
    }
}
