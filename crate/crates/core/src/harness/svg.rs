//! Minimal line charts written as plain SVG.

use std::fmt::Write as _;

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 440.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 180.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 50.0;

const PALETTE: [&str; 10] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf",
];

/// Shaded region between `lower` and `upper`, sharing the series' x values.
#[derive(Debug, Clone, PartialEq)]
pub struct Band {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub label: String,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub band: Option<Band>,
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
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
        if hi - lo < 1e-12 {
            hi = lo + 1.0;
        }
        Self { lo, hi, log }
    }

    /// Fraction along the axis, or `None` for values a log axis cannot show.
    fn frac(&self, v: f64) -> Option<f64> {
        if !v.is_finite() || (self.log && v <= 0.0) {
            return None;
        }
        let v = if self.log { v.log10() } else { v };
        Some((v - self.lo) / (self.hi - self.lo))
    }

    fn ticks(&self) -> Vec<(f64, String)> {
        if self.log {
            let (a, b) = (self.lo.floor() as i32, self.hi.ceil() as i32);
            return (a..=b)
                .map(|e| 10f64.powi(e))
                .filter(|v| self.frac(*v).is_some_and(|f| (-1e-9..=1.0 + 1e-9).contains(&f)))
                .map(|v| (v, format!("{v}")))
                .collect();
        }
        (0..=4)
            .map(|i| {
                let v = self.lo + (self.hi - self.lo) * i as f64 / 4.0;
                (v, format!("{:.3}", v))
            })
            .collect()
    }
}

/// Renders `series` as an SVG document.
pub fn line_chart(title: &str, x_label: &str, y_label: &str, series: &[Series], log_log: bool) -> String {
    let xs = Axis::new(series.iter().flat_map(|s| s.x.iter().copied()), log_log);
    let ys = Axis::new(
        series.iter().flat_map(|s| {
            let band = s.band.iter().flat_map(|b| b.lower.iter().chain(&b.upper).copied());
            s.y.iter().copied().chain(band)
        }),
        log_log,
    );
    let pw = WIDTH - LEFT - RIGHT;
    let ph = HEIGHT - TOP - BOTTOM;
    let px = |v: f64| xs.frac(v).map(|f| LEFT + f * pw);
    let py = |v: f64| ys.frac(v).map(|f| TOP + (1.0 - f) * ph);

    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(out, r#"<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(
        out,
        r#"<text x="{}" y="22" text-anchor="middle" font-size="15">{}</text>"#,
        LEFT + pw / 2.0,
        escape(title)
    );
    let _ = writeln!(
        out,
        r#"<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#
    );
    for (v, label) in xs.ticks() {
        if let Some(x) = px(v) {
            let _ = writeln!(
                out,
                r#"<line x1="{x:.2}" y1="{}" x2="{x:.2}" y2="{}" stroke="black"/><text x="{x:.2}" y="{}" text-anchor="middle">{}</text>"#,
                TOP + ph,
                TOP + ph + 5.0,
                TOP + ph + 18.0,
                escape(&label)
            );
        }
    }
    for (v, label) in ys.ticks() {
        if let Some(y) = py(v) {
            let _ = writeln!(
                out,
                r#"<line x1="{}" y1="{y:.2}" x2="{LEFT}" y2="{y:.2}" stroke="black"/><text x="{}" y="{:.2}" text-anchor="end">{}</text>"#,
                LEFT - 5.0,
                LEFT - 8.0,
                y + 4.0,
                escape(&label)
            );
        }
    }
    let _ = writeln!(
        out,
        r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
        LEFT + pw / 2.0,
        HEIGHT - 10.0,
        escape(x_label)
    );
    let _ = writeln!(
        out,
        r#"<text x="16" y="{0}" text-anchor="middle" transform="rotate(-90 16 {0})">{1}</text>"#,
        TOP + ph / 2.0,
        escape(y_label)
    );

    for (i, s) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        if let Some(b) = &s.band {
            let upper = s.x.iter().zip(&b.upper).filter_map(|(&x, &y)| Some((px(x)?, py(y)?)));
            let lower: Vec<_> = s.x.iter().zip(&b.lower).filter_map(|(&x, &y)| Some((px(x)?, py(y)?))).collect();
            let pts: Vec<String> = upper
                .chain(lower.into_iter().rev())
                .map(|(x, y)| format!("{x:.2},{y:.2}"))
                .collect();
            if !pts.is_empty() {
                let _ = writeln!(
                    out,
                    r#"<polygon points="{}" fill="{color}" fill-opacity="0.15" stroke="none"/>"#,
                    pts.join(" ")
                );
            }
        }
        let pts: Vec<String> = s
            .x
            .iter()
            .zip(&s.y)
            .filter_map(|(&x, &y)| Some(format!("{:.2},{:.2}", px(x)?, py(y)?)))
            .collect();
        let _ = writeln!(
            out,
            r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.5"><title>{}</title></polyline>"#,
            pts.join(" "),
            escape(&s.label)
        );
        let ly = TOP + 14.0 + 16.0 * i as f64;
        let lx = WIDTH - RIGHT + 12.0;
        let _ = writeln!(
            out,
            r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2"/><text x="{}" y="{}">{}</text>"#,
            lx + 18.0,
            lx + 24.0,
            ly + 4.0,
            escape(&s.label)
        );
    }
    out.push_str("</svg>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_polyline_per_series() {
        let s = |l: &str| Series {
            label: l.into(),
            x: vec![1.0, 2.0, 3.0],
            y: vec![0.5, 0.25, 0.1],
            band: Some(Band {
                lower: vec![0.4, 0.2, 0.05],
                upper: vec![0.6, 0.3, 0.15],
            }),
        };
        let svg = line_chart("t<1>", "x", "y", &[s("a"), s("b&c")], false);
        assert_eq!(svg.matches("<polyline").count(), 2);
        assert_eq!(svg.matches("<polygon").count(), 2);
        assert!(svg.contains("b&amp;c") && svg.contains("t&lt;1&gt;"));
    }

    #[test]
    fn log_axes_skip_nonpositive_points() {
        let s = Series {
            label: "a".into(),
            x: vec![1.0, 10.0, 100.0],
            y: vec![0.0, 0.1, 0.01],
            band: None,
        };
        let svg = line_chart("t", "x", "y", &[s], true);
        let line = svg.lines().find(|l| l.starts_with("<polyline")).unwrap();
        let pts = line.split('"').nth(1).unwrap();
        assert_eq!(pts.split(' ').count(), 2);
    }
}
