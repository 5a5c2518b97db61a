//! Heatmaps of a two-axis result table as standalone SVG.

use std::fmt::Write;

use anyhow::{bail, Context, Result};

use crate::table::Table;

const PLOT: f64 = 360.0;
const LEFT: f64 = 80.0;
const TOP: f64 = 40.0;
const BAR_W: f64 = 16.0;
const MISSING: &str = "#d0d0d0";

// viridis, sampled at five evenly spaced stops
const STOPS: [[f64; 3]; 5] = [
    [68.0, 1.0, 84.0],
    [59.0, 82.0, 139.0],
    [33.0, 145.0, 140.0],
    [94.0, 201.0, 98.0],
    [253.0, 231.0, 37.0],
];

/// Colour of `t` in [0, 1] on the linear palette.
fn colour(t: f64) -> String {
    let t = t.clamp(0.0, 1.0) * (STOPS.len() - 1) as f64;
    let k = (t.floor() as usize).min(STOPS.len() - 2);
    let f = t - k as f64;
    let c: Vec<u8> = (0..3)
        .map(|i| (STOPS[k][i] + f * (STOPS[k + 1][i] - STOPS[k][i])).round() as u8)
        .collect();
    format!("#{:02x}{:02x}{:02x}", c[0], c[1], c[2])
}

fn label(v: f64) -> String {
    let s = format!("{v:.4}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" { "0".to_string() } else { s.to_string() }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Distinct values of a column in order of first appearance.
fn levels(col: &[Option<f64>]) -> Result<Vec<f64>> {
    let mut out: Vec<f64> = Vec::new();
    for v in col {
        let v = v.context("axis column has an empty field")?;
        if !out.contains(&v) {
            out.push(v);
        }
    }
    Ok(out)
}

/// Heatmap of `metric` with the first axis column horizontal and the second
/// vertical (increasing upwards). Rows must be in row-major grid order.
pub fn heatmap(table: &Table, metric: &str) -> Result<String> {
    let (xname, yname) = (&table.header[0], &table.header[1]);
    let xs = levels(&table.values(xname).unwrap())?;
    let ys = levels(&table.values(yname).unwrap())?;
    let values = table.values(metric).with_context(|| format!("no column `{metric}`"))?;
    if xs.len() * ys.len() != values.len() {
        bail!("table is not a full {}x{} grid", xs.len(), ys.len());
    }
    let finite: Vec<f64> = values.iter().flatten().copied().filter(|v| v.is_finite()).collect();
    let lo = finite.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = finite.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = if hi > lo { hi - lo } else { 1.0 };

    let (cw, ch) = (PLOT / xs.len() as f64, PLOT / ys.len() as f64);
    let width = LEFT + PLOT + 110.0;
    let height = TOP + PLOT + 60.0;
    let mut s = String::new();
    writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="12" shape-rendering="crispEdges">"#
    )?;
    writeln!(s, r#"<rect width="{width}" height="{height}" fill="white"/>"#)?;
    writeln!(s, r#"<text x="{}" y="22" text-anchor="middle" font-size="14">{}</text>"#, LEFT + PLOT / 2.0, escape(metric))?;
    for (k, v) in values.iter().enumerate() {
        let (i, j) = (k / ys.len(), k % ys.len());
        let x = LEFT + i as f64 * cw;
        let y = TOP + PLOT - (j + 1) as f64 * ch;
        let fill = match v {
            Some(v) if v.is_finite() => colour((v - lo) / span),
            _ => MISSING.to_string(),
        };
        writeln!(
            s,
            r#"<rect x="{x:.2}" y="{y:.2}" width="{:.2}" height="{:.2}" fill="{fill}"/>"#,
            cw + 0.05,
            ch + 0.05
        )?;
    }
    writeln!(s, r#"<rect x="{LEFT}" y="{TOP}" width="{PLOT}" height="{PLOT}" fill="none" stroke="black"/>"#)?;

    // ticks at both ends and the middle level
    let ticks = |n: usize| {
        let mut t = vec![0, n / 2, n - 1];
        t.dedup();
        t
    };
    for i in ticks(xs.len()) {
        let x = LEFT + (i as f64 + 0.5) * cw;
        writeln!(s, r#"<line x1="{x:.2}" y1="{}" x2="{x:.2}" y2="{}" stroke="black"/>"#, TOP + PLOT, TOP + PLOT + 5.0)?;
        writeln!(s, r#"<text x="{x:.2}" y="{}" text-anchor="middle">{}</text>"#, TOP + PLOT + 18.0, label(xs[i]))?;
    }
    for j in ticks(ys.len()) {
        let y = TOP + PLOT - (j as f64 + 0.5) * ch;
        writeln!(s, r#"<line x1="{}" y1="{y:.2}" x2="{LEFT}" y2="{y:.2}" stroke="black"/>"#, LEFT - 5.0)?;
        writeln!(s, r#"<text x="{}" y="{:.2}" text-anchor="end">{}</text>"#, LEFT - 8.0, y + 4.0, label(ys[j]))?;
    }
    writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, LEFT + PLOT / 2.0, TOP + PLOT + 40.0, escape(xname))?;
    writeln!(
        s,
        r#"<text x="20" y="{0}" text-anchor="middle" transform="rotate(-90 20 {0})">{1}</text>"#,
        TOP + PLOT / 2.0,
        escape(yname)
    )?;

    // colour bar
    let bx = LEFT + PLOT + 20.0;
    let steps = 50;
    for k in 0..steps {
        let t = k as f64 / (steps - 1) as f64;
        let y = TOP + PLOT * (1.0 - (k + 1) as f64 / steps as f64);
        writeln!(
            s,
            r#"<rect x="{bx}" y="{y:.2}" width="{BAR_W}" height="{:.2}" fill="{}"/>"#,
            PLOT / steps as f64 + 0.05,
            colour(t)
        )?;
    }
    writeln!(s, r#"<rect x="{bx}" y="{TOP}" width="{BAR_W}" height="{PLOT}" fill="none" stroke="black"/>"#)?;
    let (top_label, bottom_label) = if finite.is_empty() { ("n/a".to_string(), "n/a".to_string()) } else { (label(hi), label(lo)) };
    writeln!(s, r#"<text x="{}" y="{}">{}</text>"#, bx + BAR_W + 4.0, TOP + 10.0, top_label)?;
    writeln!(s, r#"<text x="{}" y="{}">{}</text>"#, bx + BAR_W + 4.0, TOP + PLOT, bottom_label)?;
    s.push_str("</svg>\n");
    Ok(s)
}
