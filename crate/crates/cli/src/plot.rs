//! Static SVG scatter plots of data, ridge points and threshold intervals.

use std::fmt::Write;

use crate::io::ResultRow;

const PLOT_SIZE: f64 = 560.0;
const MARGIN_LEFT: f64 = 64.0;
const MARGIN_RIGHT: f64 = 20.0;
const MARGIN_TOP: f64 = 20.0;
const MARGIN_BOTTOM: f64 = 48.0;

/// Step from {1, 2, 5}·10^k giving about `target` ticks over `span`.
fn tick_step(span: f64, target: f64) -> f64 {
    let raw = span / target;
    let mag = 10f64.powf(raw.log10().floor());
    let r = raw / mag;
    let m = if r < 1.5 {
        1.0
    } else if r < 3.5 {
        2.0
    } else if r < 7.5 {
        5.0
    } else {
        10.0
    };
    m * mag
}

fn ticks(lo: f64, hi: f64) -> (Vec<f64>, usize) {
    let step = tick_step(hi - lo, 5.0);
    let decimals = (-step.log10().floor()).max(0.0) as usize;
    let first = (lo / step).ceil() as i64;
    let last = (hi / step).floor() as i64;
    ((first..=last).map(|k| k as f64 * step).collect(), decimals)
}

fn extend(bounds: &mut [f64; 4], p: &[f64]) {
    bounds[0] = bounds[0].min(p[0]);
    bounds[1] = bounds[1].max(p[0]);
    bounds[2] = bounds[2].min(p[1]);
    bounds[3] = bounds[3].max(p[1]);
}

/// Renders a standalone SVG 1.1 document. `data` holds 2-D points; only
/// converged ridge rows are drawn.
pub fn render_svg(data: &[[f64; 2]], rows: &[ResultRow], labels: [&str; 2]) -> String {
    let ridge: Vec<&ResultRow> = rows.iter().filter(|r| r.converged).collect();
    let mut b = [f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY];
    for p in data {
        extend(&mut b, p);
    }
    for r in &ridge {
        extend(&mut b, &r.point);
        if let Some((lo, hi)) = &r.interval {
            extend(&mut b, lo);
            extend(&mut b, hi);
        }
    }
    if !b[0].is_finite() {
        b = [0.0, 1.0, 0.0, 1.0];
    }
    let pad = 0.04 * (b[1] - b[0]).max(b[3] - b[2]).max(1e-9);
    let (x0, x1, y0, y1) = (b[0] - pad, b[1] + pad, b[2] - pad, b[3] + pad);
    let scale = PLOT_SIZE / (x1 - x0).max(y1 - y0);
    let (pw, ph) = ((x1 - x0) * scale, (y1 - y0) * scale);
    let width = MARGIN_LEFT + pw + MARGIN_RIGHT;
    let height = MARGIN_TOP + ph + MARGIN_BOTTOM;
    let sx = |x: f64| MARGIN_LEFT + (x - x0) * scale;
    let sy = |y: f64| MARGIN_TOP + (y1 - y) * scale;

    let mut s = String::new();
    let _ = writeln!(s, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{width:.2}" height="{height:.2}" viewBox="0 0 {width:.2} {height:.2}">"#
    );
    let _ = writeln!(s, r#"<rect x="0" y="0" width="{width:.2}" height="{height:.2}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<rect class="frame" x="{MARGIN_LEFT:.2}" y="{MARGIN_TOP:.2}" width="{pw:.2}" height="{ph:.2}" fill="none" stroke="black" stroke-width="1"/>"#
    );

    let _ = writeln!(s, r#"<g class="axes" font-family="sans-serif" font-size="11" fill="black">"#);
    let (xt, xd) = ticks(x0, x1);
    for t in xt {
        let x = sx(t);
        let y = MARGIN_TOP + ph;
        let _ = writeln!(s, r#"<line class="tick" x1="{x:.2}" y1="{y:.2}" x2="{x:.2}" y2="{:.2}" stroke="black"/>"#, y + 5.0);
        let _ = writeln!(s, r#"<text x="{x:.2}" y="{:.2}" text-anchor="middle">{t:.xd$}</text>"#, y + 18.0);
    }
    let (yt, yd) = ticks(y0, y1);
    for t in yt {
        let y = sy(t);
        let _ = writeln!(s, r#"<line class="tick" x1="{:.2}" y1="{y:.2}" x2="{MARGIN_LEFT:.2}" y2="{y:.2}" stroke="black"/>"#, MARGIN_LEFT - 5.0);
        let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{t:.yd$}</text>"#, MARGIN_LEFT - 8.0, y + 4.0);
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
        MARGIN_LEFT + pw / 2.0,
        height - 10.0,
        escape(labels[0])
    );
    let _ = writeln!(
        s,
        r#"<text x="14" y="{:.2}" text-anchor="middle" transform="rotate(-90 14 {:.2})">{}</text>"#,
        MARGIN_TOP + ph / 2.0,
        MARGIN_TOP + ph / 2.0,
        escape(labels[1])
    );
    let _ = writeln!(s, "</g>");

    let _ = writeln!(s, r##"<g class="data" fill="#b4b4b4">"##);
    for p in data {
        let _ = writeln!(s, r#"<circle cx="{:.2}" cy="{:.2}" r="1.5"/>"#, sx(p[0]), sy(p[1]));
    }
    let _ = writeln!(s, "</g>");

    let _ = writeln!(s, r##"<g class="intervals" stroke="#d03030" stroke-width="1">"##);
    for r in &ridge {
        if let Some((lo, hi)) = &r.interval {
            let _ = writeln!(
                s,
                r#"<line class="interval" x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}"/>"#,
                sx(lo[0]),
                sy(lo[1]),
                sx(hi[0]),
                sy(hi[1])
            );
        }
    }
    let _ = writeln!(s, "</g>");

    let _ = writeln!(s, r##"<g class="ridge" fill="#202020">"##);
    for r in &ridge {
        let _ = writeln!(s, r#"<circle cx="{:.2}" cy="{:.2}" r="1.8"/>"#, sx(r.point[0]), sy(r.point[1]));
    }
    let _ = writeln!(s, "</g>");
    let _ = writeln!(s, "</svg>");
    s
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
