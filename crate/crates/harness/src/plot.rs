//! Minimal SVG line charts: mean curves with shaded bands.

use std::fmt::Write as _;

use crate::aggregate::MeanCurve;

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 480.0;
const MARGIN_L: f64 = 72.0;
const MARGIN_R: f64 = 160.0;
const MARGIN_T: f64 = 24.0;
const MARGIN_B: f64 = 56.0;
// enough points for a smooth curve without megabyte files
const MAX_POINTS: usize = 600;
const COLOURS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

pub struct Series<'a> {
    pub label: String,
    pub curve: &'a MeanCurve,
}

fn sample_indices(len: usize, log_x: bool) -> Vec<usize> {
    if len <= MAX_POINTS {
        return (0..len).collect();
    }
    let mut idx: Vec<usize> = (0..MAX_POINTS)
        .map(|k| {
            let t = k as f64 / (MAX_POINTS - 1) as f64;
            let pos = if log_x { (len as f64).powf(t) - 1.0 } else { t * (len - 1) as f64 };
            (pos.round() as usize).min(len - 1)
        })
        .collect();
    idx.dedup();
    idx
}

struct Axis {
    lo: f64,
    hi: f64,
    log: bool,
}

impl Axis {
    fn fit(values: impl Iterator<Item = f64>, log: bool) -> Self {
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
        if log {
            (lo, hi) = (lo.floor(), hi.ceil());
        }
        Self { lo, hi, log }
    }

    fn frac(&self, v: f64) -> Option<f64> {
        if self.log && v <= 0.0 {
            return None;
        }
        let v = if self.log { v.log10() } else { v };
        Some((v - self.lo) / (self.hi - self.lo))
    }

    fn ticks(&self) -> Vec<(f64, String)> {
        if self.log {
            let (lo, hi) = (self.lo as i32, self.hi as i32);
            let step = ((hi - lo) as usize).div_ceil(8).max(1);
            (lo..=hi)
                .step_by(step)
                .map(|e| ((e as f64 - self.lo) / (self.hi - self.lo), format!("1e{e}")))
                .collect()
        } else {
            (0..=5)
                .map(|k| {
                    let v = self.lo + k as f64 / 5.0 * (self.hi - self.lo);
                    (k as f64 / 5.0, format!("{v:.3}"))
                })
                .collect()
        }
    }
}

/// Render curves against iteration, on log-log axes or linear axes.
pub fn render_svg(series: &[Series<'_>], title: &str, log_axes: bool) -> String {
    let x_axis = Axis::fit(series.iter().flat_map(|s| s.curve.iters.iter().map(|&n| n as f64)), log_axes);
    let y_axis = Axis::fit(
        series
            .iter()
            .flat_map(|s| s.curve.band_lo.iter().chain(&s.curve.band_hi).chain(&s.curve.mean).copied()),
        log_axes,
    );
    let pw = WIDTH - MARGIN_L - MARGIN_R;
    let ph = HEIGHT - MARGIN_T - MARGIN_B;
    let px = |f: f64| MARGIN_L + f * pw;
    let py = |f: f64| MARGIN_T + (1.0 - f) * ph;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="16" text-anchor="middle">{}</text>"#, MARGIN_L + pw / 2.0, escape(title));
    let _ = writeln!(
        s,
        r##"<rect x="{MARGIN_L}" y="{MARGIN_T}" width="{pw}" height="{ph}" fill="none" stroke="#444"/>"##
    );
    for (f, label) in x_axis.ticks() {
        let x = px(f);
        let _ = writeln!(
            s,
            r##"<line x1="{x:.1}" y1="{:.1}" x2="{x:.1}" y2="{:.1}" stroke="#ddd"/><text x="{x:.1}" y="{:.1}" text-anchor="middle">{label}</text>"##,
            MARGIN_T,
            MARGIN_T + ph,
            MARGIN_T + ph + 16.0
        );
    }
    for (f, label) in y_axis.ticks() {
        let y = py(f);
        let _ = writeln!(
            s,
            r##"<line x1="{MARGIN_L}" y1="{y:.1}" x2="{:.1}" y2="{y:.1}" stroke="#ddd"/><text x="{:.1}" y="{:.1}" text-anchor="end">{label}</text>"##,
            MARGIN_L + pw,
            MARGIN_L - 6.0,
            y + 4.0
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle">iteration n</text>"#,
        MARGIN_L + pw / 2.0,
        HEIGHT - 12.0
    );
    let _ = writeln!(
        s,
        r#"<text x="16" y="{}" text-anchor="middle" transform="rotate(-90 16 {})">mean squared error</text>"#,
        MARGIN_T + ph / 2.0,
        MARGIN_T + ph / 2.0
    );

    for (k, ser) in series.iter().enumerate() {
        let colour = COLOURS[k % COLOURS.len()];
        let c = ser.curve;
        let idx = sample_indices(c.len(), log_axes);
        let point = |i: usize, v: f64| -> Option<(f64, f64)> {
            Some((px(x_axis.frac(c.iters[i] as f64)?), py(y_axis.frac(v)?)))
        };
        let upper: Vec<(f64, f64)> = idx.iter().filter_map(|&i| point(i, c.band_hi[i])).collect();
        let lower: Vec<(f64, f64)> = idx.iter().rev().filter_map(|&i| point(i, c.band_lo[i])).collect();
        if !upper.is_empty() && !lower.is_empty() {
            let pts: Vec<String> = upper.iter().chain(&lower).map(|(x, y)| format!("{x:.1},{y:.1}")).collect();
            let _ = writeln!(
                s,
                r#"<polygon points="{}" fill="{colour}" fill-opacity="0.18" stroke="none"/>"#,
                pts.join(" ")
            );
        }
        let line: Vec<String> = idx
            .iter()
            .filter_map(|&i| point(i, c.mean[i]))
            .map(|(x, y)| format!("{x:.1},{y:.1}"))
            .collect();
        let _ = writeln!(
            s,
            r#"<polyline points="{}" fill="none" stroke="{colour}" stroke-width="1.6"/>"#,
            line.join(" ")
        );
        let ly = MARGIN_T + 16.0 + 18.0 * k as f64;
        let lx = MARGIN_L + pw + 12.0;
        let _ = writeln!(
            s,
            r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{colour}" stroke-width="2"/><text x="{}" y="{}">{}</text>"#,
            lx + 20.0,
            lx + 26.0,
            ly + 4.0,
            escape(&ser.label)
        );
    }
    s.push_str("</svg>\n");
    s
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
