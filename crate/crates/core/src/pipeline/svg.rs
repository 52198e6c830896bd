//! Minimal SVG line and bar charts.

use std::fmt::Write;

use super::artifact::Stamp;

const W: f64 = 640.0;
const H: f64 = 400.0;
const LEFT: f64 = 64.0;
const RIGHT: f64 = 150.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 56.0;
const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
];

fn esc(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn header(out: &mut String, title: &str, stamp: &Stamp) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(out, "<!-- {} -->", stamp.comment());
    let _ = writeln!(out, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(
        out,
        r#"<text x="{}" y="24" text-anchor="middle" font-size="15">{}</text>"#,
        W / 2.0,
        esc(title)
    );
}

fn range(vals: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = vals
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if !lo.is_finite() {
        (0.0, 1.0)
    } else if hi - lo < 1e-12 {
        (lo - 0.5, hi + 0.5)
    } else {
        (lo, hi)
    }
}

fn axes(out: &mut String, x_label: &str, y_label: &str, ylo: f64, yhi: f64) {
    let (x0, y0, x1, y1) = (LEFT, H - BOTTOM, W - RIGHT, TOP);
    let _ = writeln!(out, r#"<line x1="{x0}" y1="{y0}" x2="{x1}" y2="{y0}" stroke="black"/>"#);
    let _ = writeln!(out, r#"<line x1="{x0}" y1="{y0}" x2="{x0}" y2="{y1}" stroke="black"/>"#);
    for i in 0..=4 {
        let v = ylo + (yhi - ylo) * i as f64 / 4.0;
        let y = y0 - (y0 - y1) * i as f64 / 4.0;
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{}" text-anchor="end">{:.2}</text>"#,
            x0 - 6.0,
            y + 4.0,
            v
        );
    }
    let _ = writeln!(
        out,
        r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
        (x0 + x1) / 2.0,
        H - 12.0,
        esc(x_label)
    );
    let _ = writeln!(
        out,
        r#"<text x="16" y="{}" text-anchor="middle" transform="rotate(-90 16 {})">{}</text>"#,
        (y0 + y1) / 2.0,
        (y0 + y1) / 2.0,
        esc(y_label)
    );
}

/// One polyline per series, with a legend on the right.
pub fn line_chart(
    title: &str,
    x_label: &str,
    y_label: &str,
    series: &[(String, Vec<(f64, f64)>)],
    stamp: &Stamp,
) -> String {
    let mut out = String::new();
    header(&mut out, title, stamp);
    let (xlo, xhi) = range(series.iter().flat_map(|s| s.1.iter().map(|p| p.0)));
    let (ylo, yhi) = range(series.iter().flat_map(|s| s.1.iter().map(|p| p.1)));
    axes(&mut out, x_label, y_label, ylo, yhi);
    let sx = |x: f64| LEFT + (x - xlo) / (xhi - xlo) * (W - RIGHT - LEFT);
    let sy = |y: f64| H - BOTTOM - (y - ylo) / (yhi - ylo) * (H - BOTTOM - TOP);
    let mut ticks: Vec<f64> = series.iter().flat_map(|s| s.1.iter().map(|p| p.0)).collect();
    ticks.sort_by(f64::total_cmp);
    ticks.dedup();
    if ticks.len() <= 20 {
        for x in ticks {
            let _ = writeln!(
                out,
                r#"<text x="{:.1}" y="{}" text-anchor="middle">{x}</text>"#,
                sx(x),
                H - BOTTOM + 16.0
            );
        }
    }
    for (i, (name, pts)) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let path: Vec<String> = pts
            .iter()
            .filter(|p| p.1.is_finite())
            .map(|&(x, y)| format!("{:.1},{:.1}", sx(x), sy(y)))
            .collect();
        let _ = writeln!(
            out,
            r#"<polyline fill="none" stroke="{color}" stroke-width="2" points="{}"/>"#,
            path.join(" ")
        );
        for p in &path {
            let (x, y) = p.split_once(',').unwrap();
            let _ = writeln!(out, r#"<circle cx="{x}" cy="{y}" r="3" fill="{color}"/>"#);
        }
        let ly = TOP + 18.0 * i as f64;
        let lx = W - RIGHT + 12.0;
        let _ = writeln!(
            out,
            r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2"/>"#,
            lx + 18.0
        );
        let _ = writeln!(out, r#"<text x="{}" y="{}">{}</text>"#, lx + 24.0, ly + 4.0, esc(name));
    }
    out.push_str("</svg>\n");
    out
}

/// Vertical bars from zero, labels rotated under the axis.
pub fn bar_chart(title: &str, y_label: &str, bars: &[(String, f64)], stamp: &Stamp) -> String {
    let mut out = String::new();
    header(&mut out, title, stamp);
    let (_, hi) = range(bars.iter().map(|b| b.1).chain([0.0]));
    axes(&mut out, "", y_label, 0.0, hi);
    let n = bars.len().max(1) as f64;
    let slot = (W - RIGHT - LEFT) / n;
    for (i, (label, v)) in bars.iter().enumerate() {
        let h = (v.max(0.0) / hi) * (H - BOTTOM - TOP);
        let x = LEFT + slot * i as f64 + slot * 0.15;
        let _ = writeln!(
            out,
            r#"<rect x="{x:.1}" y="{:.1}" width="{:.1}" height="{h:.1}" fill="{}"><title>{} {v:.4}</title></rect>"#,
            H - BOTTOM - h,
            slot * 0.7,
            PALETTE[0],
            esc(label)
        );
        let cx = x + slot * 0.35;
        let cy = H - BOTTOM + 12.0;
        let _ = writeln!(
            out,
            r#"<text x="{cx:.1}" y="{cy}" text-anchor="end" font-size="10" transform="rotate(-35 {cx:.1} {cy})">{}</text>"#,
            esc(label)
        );
    }
    out.push_str("</svg>\n");
    out
}
