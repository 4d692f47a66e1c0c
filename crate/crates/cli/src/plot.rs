//! Static SVG line plot of the state components against time.

use std::fmt::Write;

use lbes_core::engine::Trajectory;

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 420.0;
const LEFT: f64 = 64.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 36.0;
const BOTTOM: f64 = 44.0;
const COLORS: [&str; 6] = ["#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b"];

/// At most this many columns per series; each keeps its min and max sample.
const BUCKETS: usize = 1600;

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Roughly 5 round tick values covering `[lo, hi]`.
fn ticks(lo: f64, hi: f64) -> Vec<f64> {
    let span = hi - lo;
    if !(span > 0.0) {
        return vec![lo];
    }
    let raw = span / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0]
        .into_iter()
        .map(|m| m * mag)
        .find(|s| span / s <= 6.0)
        .unwrap_or(10.0 * mag);
    let mut v = (lo / step).ceil() * step;
    let mut out = Vec::new();
    while v <= hi + 1e-9 * span {
        out.push(if v.abs() < 1e-12 * span { 0.0 } else { v });
        v += step;
    }
    out
}

/// Min/max decimation of `(t, y)` into at most `BUCKETS` columns.
fn decimate(t: &[f64], y: &[f64], t_lo: f64, t_hi: f64) -> Vec<(f64, f64)> {
    if t.len() <= 2 * BUCKETS {
        return t.iter().copied().zip(y.iter().copied()).collect();
    }
    let mut out = Vec::with_capacity(2 * BUCKETS);
    let width = (t_hi - t_lo) / BUCKETS as f64;
    let mut start = 0;
    while start < t.len() {
        let bucket = ((t[start] - t_lo) / width).floor();
        let mut end = start;
        while end < t.len() && ((t[end] - t_lo) / width).floor() == bucket {
            end += 1;
        }
        let (mut lo, mut hi) = (start, start);
        for k in start..end {
            if y[k] < y[lo] {
                lo = k;
            }
            if y[k] > y[hi] {
                hi = k;
            }
        }
        let (a, b) = if lo <= hi { (lo, hi) } else { (hi, lo) };
        out.push((t[a], y[a]));
        if b != a {
            out.push((t[b], y[b]));
        }
        start = end;
    }
    out
}

pub fn render_svg(traj: &Trajectory, title: &str, x_star: &[f64]) -> String {
    let t = traj.times();
    let (t_lo, t_hi) = (t[0], t[t.len() - 1].max(t[0] + f64::EPSILON));
    let series: Vec<Vec<f64>> = (0..traj.dim()).map(|i| traj.component(i)).collect();
    let finite = series.iter().flatten().chain(x_star).copied().filter(|v| v.is_finite());
    let (mut y_lo, mut y_hi) = finite.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if !(y_hi > y_lo) {
        y_lo -= 1.0;
        y_hi += 1.0;
    }
    let pad = 0.05 * (y_hi - y_lo);
    let (y_lo, y_hi) = (y_lo - pad, y_hi + pad);
    let pw = WIDTH - LEFT - RIGHT;
    let ph = HEIGHT - TOP - BOTTOM;
    let sx = |v: f64| LEFT + (v - t_lo) / (t_hi - t_lo) * pw;
    let sy = |v: f64| TOP + (y_hi - v) / (y_hi - y_lo) * ph;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="22" text-anchor="middle" font-size="15">{}</text>"#,
        WIDTH / 2.0,
        escape(title)
    );
    let _ = writeln!(
        s,
        r##"<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="#444"/>"##
    );
    for v in ticks(t_lo, t_hi) {
        let x = sx(v);
        let _ = writeln!(
            s,
            r##"<line x1="{x:.2}" y1="{}" x2="{x:.2}" y2="{}" stroke="#444"/><text x="{x:.2}" y="{}" text-anchor="middle">{v}</text>"##,
            TOP + ph,
            TOP + ph + 5.0,
            TOP + ph + 18.0
        );
    }
    for v in ticks(y_lo, y_hi) {
        let y = sy(v);
        let _ = writeln!(
            s,
            r##"<line x1="{}" y1="{y:.2}" x2="{LEFT}" y2="{y:.2}" stroke="#444"/><text x="{}" y="{:.2}" text-anchor="end">{}</text>"##,
            LEFT - 5.0,
            LEFT - 8.0,
            y + 4.0,
            (v * 1e6).round() / 1e6
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle">t [s]</text>"#,
        LEFT + pw / 2.0,
        HEIGHT - 8.0
    );
    let _ = writeln!(
        s,
        r#"<text x="16" y="{}" text-anchor="middle" transform="rotate(-90 16 {})">x</text>"#,
        TOP + ph / 2.0,
        TOP + ph / 2.0
    );
    for (i, &v) in x_star.iter().enumerate() {
        let y = sy(v);
        let _ = writeln!(
            s,
            r#"<line x1="{LEFT}" y1="{y:.2}" x2="{}" y2="{y:.2}" stroke="{}" stroke-dasharray="6 4" opacity="0.7"/>"#,
            LEFT + pw,
            COLORS[i % COLORS.len()]
        );
    }
    for (i, ys) in series.iter().enumerate() {
        let pts = decimate(t, ys, t_lo, t_hi)
            .into_iter()
            .filter(|(_, y)| y.is_finite())
            .map(|(t, y)| format!("{:.2},{:.2}", sx(t), sy(y)))
            .collect::<Vec<_>>()
            .join(" ");
        let _ = writeln!(
            s,
            r#"<polyline fill="none" stroke="{}" stroke-width="1.2" points="{pts}"/>"#,
            COLORS[i % COLORS.len()]
        );
    }
    s.push_str("</svg>\n");
    s
}
