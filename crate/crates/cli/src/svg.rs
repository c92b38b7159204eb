//! Minimal self-contained SVG output: payoff heatmaps and strategy
//! trajectories.

use std::fmt::Write as _;

use payofflab::experiments::HeatmapGrid;
use payofflab::game::GameParams;
use payofflab::learn::Trajectory;

const SIZE: f64 = 400.0;
const MARGIN: f64 = 40.0;

fn header(out: &mut String, title: &str) {
    let full = SIZE + 2.0 * MARGIN;
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{full}" height="{full}" viewBox="0 0 {full} {full}">"#
    );
    let _ = writeln!(out, "<title>{title}</title>");
    let _ = writeln!(out, r#"<rect x="0" y="0" width="{full}" height="{full}" fill="white"/>"#);
}

fn axes(out: &mut String, x_label: &str, y_label: &str, x_range: (f64, f64), y_range: (f64, f64)) {
    let (x0, y0, x1, y1) = (MARGIN, MARGIN + SIZE, MARGIN + SIZE, MARGIN);
    let _ = writeln!(out, r#"<g class="axes" stroke="black" stroke-width="1">"#);
    let _ = writeln!(out, r#"<line x1="{x0}" y1="{y0}" x2="{x1}" y2="{y0}"/>"#);
    let _ = writeln!(out, r#"<line x1="{x0}" y1="{y0}" x2="{x0}" y2="{y1}"/>"#);
    let _ = writeln!(out, "</g>");
    let _ = writeln!(
        out,
        r#"<text x="{}" y="{}" text-anchor="middle" font-size="12">{x_label}</text>"#,
        MARGIN + SIZE / 2.0,
        y0 + 30.0
    );
    let _ = writeln!(
        out,
        r#"<text x="12" y="{}" text-anchor="middle" font-size="12" transform="rotate(-90 12 {})">{y_label}</text>"#,
        MARGIN + SIZE / 2.0,
        MARGIN + SIZE / 2.0
    );
    for (v, x) in [(x_range.0, x0), (x_range.1, x1)] {
        let _ = writeln!(out, r#"<text x="{x}" y="{}" text-anchor="middle" font-size="10">{v}</text>"#, y0 + 14.0);
    }
    for (v, y) in [(y_range.0, y0), (y_range.1, y1)] {
        let _ = writeln!(out, r#"<text x="{}" y="{y}" text-anchor="end" font-size="10">{v}</text>"#, x0 - 4.0);
    }
}

fn scale(v: f64, lo: f64, hi: f64) -> f64 {
    if hi > lo {
        (v - lo) / (hi - lo) * SIZE
    } else {
        0.0
    }
}

/// Heatmap of a payoff grid, π_Y across and π_X up, with the hull of the
/// game's four payoff pairs outlined. Each occupied bin is one
/// `class="cell"` rectangle.
pub fn heatmap_svg(grid: &HeatmapGrid, g: &GameParams, title: &str) -> String {
    let mut out = String::new();
    header(&mut out, title);
    axes(&mut out, "pi_Y", "pi_X", grid.y_range, grid.x_range);

    let (ylo, yhi) = grid.y_range;
    let (xlo, xhi) = grid.x_range;
    let px = |pi_y: f64, pi_x: f64| (MARGIN + scale(pi_y, ylo, yhi), MARGIN + SIZE - scale(pi_x, xlo, xhi));
    let corners = g.payoff_corners();
    // (R,R), (T,S), (P,P), (S,T) goes round the outside
    let outline: Vec<String> = [0, 1, 3, 2]
        .iter()
        .map(|&i| {
            let (x, y) = px(corners[i].pi_y, corners[i].pi_x);
            format!("{x:.3},{y:.3}")
        })
        .collect();
    let _ = writeln!(
        out,
        r#"<polygon class="hull" points="{}" fill="rgb(220,230,250)" stroke="rgb(40,60,160)" stroke-width="1"/>"#,
        outline.join(" ")
    );

    let max = grid.counts.iter().flatten().copied().max().unwrap_or(0).max(1) as f64;
    let cell = SIZE / grid.bins as f64;
    for (row, counts) in grid.counts.iter().enumerate() {
        for (col, &c) in counts.iter().enumerate() {
            if c == 0 {
                continue;
            }
            // log scale so rare endpoints stay visible
            let t = (1.0 + c as f64).ln() / (1.0 + max).ln();
            let red = (255.0 * t).round() as u8;
            let blue = (255.0 * (1.0 - t)).round() as u8;
            let x = MARGIN + col as f64 * cell;
            let y = MARGIN + SIZE - (row as f64 + 1.0) * cell;
            let _ = writeln!(
                out,
                r#"<rect class="cell" x="{x:.3}" y="{y:.3}" width="{w:.3}" height="{w:.3}" fill="rgb({red},0,{blue})" stroke="black" stroke-width="0.3"><title>{c}</title></rect>"#,
                w = cell.max(2.0)
            );
        }
    }
    out.push_str("</svg>\n");
    out
}

const COLOURS: [&str; 4] = ["#1b9e77", "#d95f02", "#7570b3", "#e7298a"];
const NAMES: [&str; 4] = ["q_CC", "q_CD", "q_DC", "q_DD"];

/// Strategy components against iteration, one polyline each.
pub fn trajectory_svg(t: Option<&Trajectory>, title: &str) -> String {
    let mut out = String::new();
    header(&mut out, title);
    let last = t.and_then(|t| t.records.last()).map(|r| r.iteration).unwrap_or(0);
    axes(&mut out, "iteration", "probability", (0.0, last as f64), (0.0, 1.0));
    if let Some(t) = t {
        for k in 0..4 {
            let pts: Vec<String> = t
                .records
                .iter()
                .map(|r| {
                    let x = MARGIN + scale(r.iteration as f64, 0.0, last.max(1) as f64);
                    let y = MARGIN + SIZE - r.q[k] * SIZE;
                    format!("{x:.3},{y:.3}")
                })
                .collect();
            if pts.is_empty() {
                continue;
            }
            let _ = writeln!(
                out,
                r#"<polyline class="component" points="{}" fill="none" stroke="{}" stroke-width="1.5"><title>{}</title></polyline>"#,
                pts.join(" "),
                COLOURS[k],
                NAMES[k]
            );
        }
    }
    out.push_str("</svg>\n");
    out
}
