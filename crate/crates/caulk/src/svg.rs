//! Minimal hand-written SVG line charts with optional log axes, error bars,
//! fitted power-law lines and per-series minimum markers.

use std::fmt::Write;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 160.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 56.0;
const PALETTE: [&str; 6] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b",
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point {
    pub x: f64,
    pub y: f64,
    /// Half-width of the error bar.
    pub err: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub name: String,
    pub points: Vec<Point>,
    /// Index of the point drawn with the minimum marker.
    pub min_index: Option<usize>,
}

/// `y = exp(intercept) · x^slope`, drawn dashed across the x range.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerLine {
    pub name: String,
    pub slope: f64,
    pub intercept: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Chart {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub x_log: bool,
    pub y_log: bool,
    pub series: Vec<Series>,
    pub lines: Vec<PowerLine>,
}

struct Axis {
    log: bool,
    lo: f64,
    hi: f64,
    from: f64,
    to: f64,
}

impl Axis {
    fn new(values: impl Iterator<Item = f64>, log: bool, from: f64, to: f64) -> Axis {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for v in values.filter(|v| v.is_finite() && (!log || *v > 0.0)) {
            let v = if log { v.log10() } else { v };
            lo = lo.min(v);
            hi = hi.max(v);
        }
        if !lo.is_finite() {
            lo = 0.0;
            hi = 1.0;
        }
        if hi - lo < 1e-12 {
            lo -= 0.5;
            hi += 0.5;
        }
        let pad = 0.05 * (hi - lo);
        Axis {
            log,
            lo: lo - pad,
            hi: hi + pad,
            from,
            to,
        }
    }

    fn raw(&self, v: f64) -> f64 {
        if self.log {
            v.max(f64::MIN_POSITIVE).log10()
        } else {
            v
        }
    }

    fn map(&self, v: f64) -> f64 {
        let t = (self.raw(v) - self.lo) / (self.hi - self.lo);
        self.from + t.clamp(-0.05, 1.05) * (self.to - self.from)
    }

    fn ticks(&self) -> Vec<(f64, String)> {
        if self.log {
            let mut out: Vec<(f64, String)> = (self.lo.ceil() as i32..=self.hi.floor() as i32)
                .map(|e| (10f64.powi(e), format!("1e{e}")))
                .collect();
            if out.len() < 2 {
                for l in [self.lo, self.hi] {
                    let v = 10f64.powf(l);
                    out.push((v, format!("{v:.2e}")));
                }
                out.sort_by(|a, b| a.0.total_cmp(&b.0));
            }
            out
        } else {
            let span = self.hi - self.lo;
            let raw = span / 5.0;
            let mag = 10f64.powf(raw.log10().floor());
            let step = [1.0, 2.0, 5.0, 10.0]
                .iter()
                .map(|m| m * mag)
                .find(|s| *s >= raw)
                .unwrap_or(10.0 * mag);
            let mut v = (self.lo / step).ceil() * step;
            let mut out = Vec::new();
            while v <= self.hi + 1e-12 {
                let label = if step >= 1.0 {
                    format!("{}", v.round())
                } else {
                    format!("{v:.2}")
                };
                out.push((v, label));
                v += step;
            }
            out
        }
    }
}

fn esc(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

pub fn render(chart: &Chart) -> String {
    let pts = || chart.series.iter().flat_map(|s| s.points.iter());
    let x = Axis::new(pts().map(|p| p.x), chart.x_log, LEFT, WIDTH - RIGHT);
    let y = Axis::new(
        pts().flat_map(|p| {
            let e = p.err.unwrap_or(0.0);
            [p.y, p.y + e, if chart.y_log { p.y } else { p.y - e }]
        }),
        chart.y_log,
        HEIGHT - BOTTOM,
        TOP,
    );
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="22" text-anchor="middle" font-size="14">{}</text>"#,
        (LEFT + WIDTH - RIGHT) / 2.0,
        esc(&chart.title)
    );
    // axes and ticks
    let (x0, x1, y0, y1) = (LEFT, WIDTH - RIGHT, HEIGHT - BOTTOM, TOP);
    let _ = writeln!(
        s,
        r#"<path class="axes" d="M{x0:.2},{y1:.2} L{x0:.2},{y0:.2} L{x1:.2},{y0:.2}" stroke="black" fill="none"/>"#
    );
    for (v, label) in x.ticks() {
        let px = x.map(v);
        let _ = writeln!(
            s,
            r#"<line x1="{px:.2}" y1="{y0:.2}" x2="{px:.2}" y2="{:.2}" stroke="black"/><text x="{px:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            y0 + 5.0,
            y0 + 18.0,
            esc(&label)
        );
    }
    for (v, label) in y.ticks() {
        let py = y.map(v);
        let _ = writeln!(
            s,
            r#"<line x1="{:.2}" y1="{py:.2}" x2="{x0:.2}" y2="{py:.2}" stroke="black"/><text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#,
            x0 - 5.0,
            x0 - 8.0,
            py + 4.0,
            esc(&label)
        );
    }
    let _ = writeln!(
        s,
        r#"<text class="x-label" x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
        (x0 + x1) / 2.0,
        HEIGHT - 14.0,
        esc(&chart.x_label)
    );
    let _ = writeln!(
        s,
        r#"<text class="y-label" x="18" y="{:.2}" text-anchor="middle" transform="rotate(-90 18 {:.2})">{}</text>"#,
        (y0 + y1) / 2.0,
        (y0 + y1) / 2.0,
        esc(&chart.y_label)
    );
    for (k, series) in chart.series.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        let path: Vec<String> = series
            .points
            .iter()
            .map(|p| format!("{:.2},{:.2}", x.map(p.x), y.map(p.y)))
            .collect();
        if !path.is_empty() {
            let _ = writeln!(
                s,
                r#"<polyline class="series" points="{}" stroke="{color}" fill="none" stroke-width="1.5"/>"#,
                path.join(" ")
            );
        }
        for p in &series.points {
            let (px, py) = (x.map(p.x), y.map(p.y));
            let _ = writeln!(
                s,
                r#"<circle cx="{px:.2}" cy="{py:.2}" r="3" fill="{color}"/>"#
            );
            if let Some(e) = p.err.filter(|e| *e > 0.0) {
                let lo = if chart.y_log && p.y - e <= 0.0 {
                    y0
                } else {
                    y.map(p.y - e)
                };
                let hi = y.map(p.y + e);
                let _ = writeln!(
                    s,
                    r#"<path class="error-bar" d="M{px:.2},{lo:.2} L{px:.2},{hi:.2} M{:.2},{lo:.2} L{:.2},{lo:.2} M{:.2},{hi:.2} L{:.2},{hi:.2}" stroke="{color}"/>"#,
                    px - 3.0,
                    px + 3.0,
                    px - 3.0,
                    px + 3.0
                );
            }
        }
        if let Some(p) = series.min_index.and_then(|i| series.points.get(i)) {
            let (px, py) = (x.map(p.x), y.map(p.y));
            let star: Vec<String> = (0..10)
                .map(|i| {
                    let r = if i % 2 == 0 { 9.0 } else { 4.0 };
                    let a = std::f64::consts::PI * (i as f64) / 5.0 - std::f64::consts::FRAC_PI_2;
                    format!("{:.2},{:.2}", px + r * a.cos(), py + r * a.sin())
                })
                .collect();
            let _ = writeln!(
                s,
                r#"<polygon class="min-marker" points="{}" fill="gold" stroke="{color}"/>"#,
                star.join(" ")
            );
        }
        let ly = TOP + 16.0 * k as f64;
        let _ = writeln!(
            s,
            r#"<line x1="{:.2}" y1="{ly:.2}" x2="{:.2}" y2="{ly:.2}" stroke="{color}" stroke-width="2"/><text x="{:.2}" y="{:.2}">{}</text>"#,
            x1 + 12.0,
            x1 + 32.0,
            x1 + 38.0,
            ly + 4.0,
            esc(&series.name)
        );
    }
    let (xmin, xmax) = pts().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), p| {
        (a.min(p.x), b.max(p.x))
    });
    for (k, line) in chart.lines.iter().enumerate() {
        if !(xmin.is_finite() && xmax > 0.0) {
            break;
        }
        let steps = 32;
        let path: Vec<String> = (0..=steps)
            .map(|i| {
                let t = i as f64 / steps as f64;
                let xv = if chart.x_log {
                    (xmin.ln() + t * (xmax.ln() - xmin.ln())).exp()
                } else {
                    xmin + t * (xmax - xmin)
                };
                let yv = (line.intercept + line.slope * xv.ln()).exp();
                format!("{:.2},{:.2}", x.map(xv), y.map(yv))
            })
            .collect();
        let _ = writeln!(
            s,
            r#"<polyline class="fit-line" points="{}" stroke="black" stroke-dasharray="6 4" fill="none"/>"#,
            path.join(" ")
        );
        let ly = TOP + 16.0 * (chart.series.len() + k) as f64;
        let _ = writeln!(
            s,
            r#"<line x1="{:.2}" y1="{ly:.2}" x2="{:.2}" y2="{ly:.2}" stroke="black" stroke-dasharray="6 4"/><text x="{:.2}" y="{:.2}">{}</text>"#,
            x1 + 12.0,
            x1 + 32.0,
            x1 + 38.0,
            ly + 4.0,
            esc(&line.name)
        );
    }
    s.push_str("</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chart() -> Chart {
        Chart {
            title: "error vs n".into(),
            x_label: "n".into(),
            y_label: "L2 error".into(),
            x_log: true,
            y_log: true,
            series: vec![Series {
                name: "caulk".into(),
                points: vec![
                    Point {
                        x: 64.0,
                        y: 1e-3,
                        err: Some(1e-4),
                    },
                    Point {
                        x: 256.0,
                        y: 2e-4,
                        err: Some(3e-4),
                    },
                ],
                min_index: Some(1),
            }],
            lines: vec![PowerLine {
                name: "fit".into(),
                slope: -1.0,
                intercept: (64e-3f64).ln(),
            }],
        }
    }

    #[test]
    fn contains_every_element_kind() {
        let svg = render(&chart());
        assert!(svg.starts_with("<svg"));
        assert!(svg.ends_with("</svg>\n"));
        for needle in [
            "fit-line",
            "error-bar",
            "min-marker",
            "x-label",
            "y-label",
            "1e-3",
        ] {
            assert!(svg.contains(needle), "missing {needle}");
        }
        assert_eq!(svg.matches("class=\"error-bar\"").count(), 2);
    }

    #[test]
    fn rendering_is_deterministic() {
        assert_eq!(render(&chart()), render(&chart()));
    }

    #[test]
    fn empty_and_linear_charts_render() {
        let mut c = chart();
        c.x_log = false;
        c.y_log = false;
        assert!(render(&c).contains("polyline"));
        c.series.clear();
        c.lines.clear();
        assert!(render(&c).ends_with("</svg>\n"));
    }

    #[test]
    fn labels_are_escaped() {
        let mut c = chart();
        c.title = "a < b & c".into();
        assert!(render(&c).contains("a &lt; b &amp; c"));
    }
}
