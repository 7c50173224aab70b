//! Minimal deterministic SVG charts: line plots with guide lines and
//! labelled markers, and a gallery of small orbit panels.

use std::fmt::Write;

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 480.0;
const MARGIN_L: f64 = 80.0;
const MARGIN_R: f64 = 24.0;
const MARGIN_T: f64 = 40.0;
const MARGIN_B: f64 = 56.0;

#[derive(Debug, Clone, PartialEq)]
pub struct Marker {
    pub x: f64,
    pub y: f64,
    pub label: String,
}

#[derive(Debug, Clone, Default)]
pub struct Chart {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub series: Vec<Vec<[f64; 2]>>,
    /// Horizontal reference lines.
    pub guides: Vec<f64>,
    pub markers: Vec<Marker>,
    /// Shown in place of data when the chart has nothing to draw.
    pub warning: Option<String>,
}

/// Fixed-precision number for coordinates, so output is stable.
fn n(x: f64) -> String {
    format!("{x:.2}")
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Tick positions covering `[lo, hi]` at a 1-2-5 spacing.
fn ticks(lo: f64, hi: f64) -> Vec<f64> {
    let span = hi - lo;
    let raw = span / 6.0;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0].into_iter().map(|k| k * mag).find(|s| *s >= raw).unwrap_or(10.0 * mag);
    let first = (lo / step).ceil() as i64;
    let last = (hi / step).floor() as i64;
    (first..=last).map(|i| i as f64 * step).collect()
}

fn tick_label(v: f64) -> String {
    if v == 0.0 {
        "0".to_string()
    } else if v.abs() >= 1e4 || v.abs() < 1e-3 {
        format!("{v:.1e}")
    } else {
        let s = format!("{v:.4}");
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    }
}

fn range(values: impl Iterator<Item = f64>) -> Option<(f64, f64)> {
    let (lo, hi) =
        values.filter(|v| v.is_finite()).fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if lo > hi {
        return None;
    }
    if hi - lo < 1e-12 * lo.abs().max(1.0) {
        let pad = 0.5 * lo.abs().max(1.0) * 1e-3;
        return Some((lo - pad, hi + pad));
    }
    let pad = 0.04 * (hi - lo);
    Some((lo - pad, hi + pad))
}

fn header(out: &mut String, width: f64, height: f64) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="12">"#,
        w = n(width),
        h = n(height)
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
}

impl Chart {
    pub fn render(&self) -> String {
        let mut out = String::new();
        header(&mut out, WIDTH, HEIGHT);
        let (x0, x1) = (MARGIN_L, WIDTH - MARGIN_R);
        let (y0, y1) = (HEIGHT - MARGIN_B, MARGIN_T);
        let _ = writeln!(
            out,
            r#"<text x="{}" y="24" text-anchor="middle" font-size="15">{}</text>"#,
            n(WIDTH / 2.0),
            escape(&self.title)
        );
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
            n((x0 + x1) / 2.0),
            n(HEIGHT - 14.0),
            escape(&self.x_label)
        );
        let _ = writeln!(
            out,
            r#"<text x="18" y="{y}" text-anchor="middle" transform="rotate(-90 18 {y})">{}</text>"#,
            escape(&self.y_label),
            y = n((y0 + y1) / 2.0)
        );
        let _ = writeln!(
            out,
            r#"<rect x="{}" y="{}" width="{}" height="{}" fill="none" stroke="black"/>"#,
            n(x0),
            n(y1),
            n(x1 - x0),
            n(y0 - y1)
        );

        let points = || self.series.iter().flatten();
        let xr = range(points().map(|p| p[0]).chain(self.markers.iter().map(|m| m.x)));
        let yr = range(points().map(|p| p[1]).chain(self.markers.iter().map(|m| m.y)));
        let (Some((xa, xb)), Some((ya, yb))) = (xr, yr) else {
            let msg = self.warning.as_deref().unwrap_or("no data");
            let _ = writeln!(
                out,
                r##"<text x="{}" y="{}" text-anchor="middle" fill="#b00000" font-size="16">{}</text>"##,
                n((x0 + x1) / 2.0),
                n((y0 + y1) / 2.0),
                escape(msg)
            );
            out.push_str("</svg>\n");
            return out;
        };
        // Guides only widen the range when they are close to the data.
        let (ya, yb) = self.guides.iter().fold((ya, yb), |(a, b), &g| {
            if g >= a - 0.5 * (b - a) && g <= b + 0.5 * (b - a) {
                (a.min(g - 0.02 * (b - a)), b.max(g + 0.02 * (b - a)))
            } else {
                (a, b)
            }
        });
        let sx = |x: f64| x0 + (x - xa) / (xb - xa) * (x1 - x0);
        let sy = |y: f64| y0 - (y - ya) / (yb - ya) * (y0 - y1);

        for t in ticks(xa, xb) {
            let _ = writeln!(
                out,
                r##"<line x1="{x}" y1="{}" x2="{x}" y2="{}" stroke="#dddddd"/>"##,
                n(y0),
                n(y1),
                x = n(sx(t))
            );
            let _ = writeln!(
                out,
                r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
                n(sx(t)),
                n(y0 + 16.0),
                tick_label(t)
            );
        }
        for t in ticks(ya, yb) {
            let _ = writeln!(
                out,
                r##"<line x1="{}" y1="{y}" x2="{}" y2="{y}" stroke="#dddddd"/>"##,
                n(x0),
                n(x1),
                y = n(sy(t))
            );
            let _ = writeln!(
                out,
                r#"<text x="{}" y="{}" text-anchor="end">{}</text>"#,
                n(x0 - 6.0),
                n(sy(t) + 4.0),
                tick_label(t)
            );
        }
        for &g in &self.guides {
            if g >= ya && g <= yb {
                let _ = writeln!(
                    out,
                    r##"<line x1="{}" y1="{y}" x2="{}" y2="{y}" stroke="#888888" stroke-dasharray="6 4"/>"##,
                    n(x0),
                    n(x1),
                    y = n(sy(g))
                );
            }
        }
        for s in &self.series {
            let pts: Vec<String> = s
                .iter()
                .filter(|p| p[0].is_finite() && p[1].is_finite())
                .map(|p| format!("{},{}", n(sx(p[0])), n(sy(p[1]))))
                .collect();
            if !pts.is_empty() {
                let _ = writeln!(
                    out,
                    r##"<polyline fill="none" stroke="#1f4e9c" stroke-width="1.5" points="{}"/>"##,
                    pts.join(" ")
                );
            }
        }
        for m in &self.markers {
            let _ = writeln!(out, r##"<circle cx="{}" cy="{}" r="4" fill="#c0392b"/>"##, n(sx(m.x)), n(sy(m.y)));
            let _ =
                writeln!(out, r#"<text x="{}" y="{}">{}</text>"#, n(sx(m.x) + 6.0), n(sy(m.y) - 6.0), escape(&m.label));
        }
        out.push_str("</svg>\n");
        out
    }
}

/// One orbit drawn in its own panel with equal axis scaling.
#[derive(Debug, Clone)]
pub struct Panel {
    pub caption: String,
    pub path: Result<Vec<[f64; 2]>, String>,
}

pub fn gallery(title: &str, panels: &[Panel], warning: Option<&str>) -> String {
    const COLS: usize = 4;
    const CELL: f64 = 200.0;
    const PAD: f64 = 14.0;
    let rows = panels.len().div_ceil(COLS).max(1);
    let width = COLS as f64 * CELL;
    let height = 40.0 + rows as f64 * CELL;
    let mut out = String::new();
    header(&mut out, width, height);
    let _ = writeln!(
        out,
        r#"<text x="{}" y="24" text-anchor="middle" font-size="15">{}</text>"#,
        n(width / 2.0),
        escape(title)
    );
    if panels.is_empty() {
        let _ = writeln!(
            out,
            r##"<text x="{}" y="{}" text-anchor="middle" fill="#b00000" font-size="16">{}</text>"##,
            n(width / 2.0),
            n(40.0 + CELL / 2.0),
            escape(warning.unwrap_or("no data"))
        );
    }
    for (i, p) in panels.iter().enumerate() {
        let (cx, cy) = ((i % COLS) as f64 * CELL, 40.0 + (i / COLS) as f64 * CELL);
        let _ = writeln!(
            out,
            r##"<rect x="{}" y="{}" width="{s}" height="{s}" fill="none" stroke="#bbbbbb"/>"##,
            n(cx + 4.0),
            n(cy + 4.0),
            s = n(CELL - 8.0)
        );
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
            n(cx + CELL / 2.0),
            n(cy + CELL - 10.0),
            escape(&p.caption)
        );
        let pts = match &p.path {
            Ok(pts) if !pts.is_empty() => pts,
            Ok(_) => continue,
            Err(e) => {
                let _ = writeln!(
                    out,
                    r##"<text x="{}" y="{}" text-anchor="middle" fill="#b00000">{}</text>"##,
                    n(cx + CELL / 2.0),
                    n(cy + CELL / 2.0),
                    escape(e)
                );
                continue;
            }
        };
        let (xa, xb) = range(pts.iter().map(|q| q[0])).expect("non-empty");
        let (ya, yb) = range(pts.iter().map(|q| q[1])).expect("non-empty");
        let span = (xb - xa).max(yb - ya);
        let inner = CELL - 2.0 * PAD - 20.0;
        let scale = inner / span;
        let (mx, my) = (0.5 * (xa + xb), 0.5 * (ya + yb));
        let (ox, oy) = (cx + CELL / 2.0, cy + PAD + inner / 2.0);
        let line: Vec<String> =
            pts.iter().map(|q| format!("{},{}", n(ox + (q[0] - mx) * scale), n(oy - (q[1] - my) * scale))).collect();
        let _ =
            writeln!(out, r##"<polyline fill="none" stroke="#1f4e9c" stroke-width="1" points="{}"/>"##, line.join(" "));
        let _ = writeln!(
            out,
            r##"<circle cx="{}" cy="{}" r="2.5" fill="#c0392b"/>"##,
            n(ox + (pts[0][0] - mx) * scale),
            n(oy - (pts[0][1] - my) * scale)
        );
    }
    out.push_str("</svg>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ticks_are_round() {
        let t = ticks(0.0, 1.0);
        assert_eq!(t.len(), 6);
        assert!(t.iter().enumerate().all(|(i, v)| (v - 0.2 * i as f64).abs() < 1e-15));
        assert!(ticks(-66.0, 0.4).iter().all(|t| t % 10.0 == 0.0));
    }

    #[test]
    fn empty_chart_carries_warning() {
        let c = Chart { title: "t".into(), warning: Some("empty record".into()), ..Default::default() };
        let s = c.render();
        assert!(s.contains("empty record") && s.ends_with("</svg>\n"));
        assert!(!s.contains("polyline"));
    }

    #[test]
    fn rendering_is_deterministic() {
        let c = Chart {
            title: "a < b".into(),
            series: vec![vec![[0.0, 1.0], [1.0, 3.0], [2.0, 2.0]]],
            guides: vec![2.0, -2.0],
            markers: vec![Marker { x: 1.0, y: 3.0, label: "peak".into() }],
            ..Default::default()
        };
        assert_eq!(c.render(), c.render());
        assert!(c.render().contains("a &lt; b"));
        assert_eq!(c.render().matches("stroke-dasharray").count(), 1);
    }
}
