//! SVG output for fitted models.
//!
//! Marginal densities are evaluated on a logit-spaced grid, `x = 1/(1+e^-t)`
//! for `t` evenly spaced in `[-GRID_T_MAX, GRID_T_MAX]`. Perks marginals have
//! shape parameters well below 1, so almost all of their mass sits in a thin
//! layer next to 0 or 1 that an evenly spaced grid in `x` would step over.

use std::fmt::Write as _;

use dirimult_core::special::ln_beta;
use dirimult_core::{BetaMarginal, FittedModel};

pub const GRID_POINTS: usize = 512;
pub const GRID_T_MAX: f64 = 40.0;

const PALETTE: [&str; 10] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
    "#bcbd22", "#17becf",
];

/// A grid point: `x` and `1 - x`, kept separately so neither end rounds to
/// exactly 0 or 1.
#[derive(Debug, Clone, Copy)]
pub struct GridPoint {
    pub x: f64,
    pub one_minus_x: f64,
}

pub fn logit_grid() -> Vec<GridPoint> {
    let last = (GRID_POINTS - 1) as f64;
    (0..GRID_POINTS)
        .map(|i| {
            // written so that point i and point N-1-i are exact mirrors
            let t = GRID_T_MAX * (2.0 * i as f64 - last) / last;
            GridPoint {
                x: 1.0 / (1.0 + (-t).exp()),
                one_minus_x: 1.0 / (1.0 + t.exp()),
            }
        })
        .collect()
}

pub fn beta_density(m: &BetaMarginal, p: &GridPoint) -> f64 {
    ((m.a - 1.0) * p.x.ln() + (m.b - 1.0) * p.one_minus_x.ln() - ln_beta(m.a, m.b)).exp()
}

fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            _ => out.push(c),
        }
    }
    out
}

fn colour(i: usize) -> &'static str {
    PALETTE[i % PALETTE.len()]
}

/// Rounds `v` up to a tidy axis limit.
fn nice_ceiling(v: f64) -> f64 {
    if v.is_nan() || v <= 0.0 {
        return 1.0;
    }
    let magnitude = 10f64.powf(v.log10().floor());
    for step in [1.0, 2.0, 2.5, 5.0, 10.0] {
        if step * magnitude >= v {
            return step * magnitude;
        }
    }
    10.0 * magnitude
}

fn header(out: &mut String, width: f64, height: f64) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0}" height="{height:.0}" viewBox="0 0 {width:.0} {height:.0}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
}

fn y_axis(out: &mut String, left: f64, top: f64, height: f64, right: f64, y_max: f64) {
    for k in 0..=5 {
        let v = y_max * k as f64 / 5.0;
        let y = top + height * (1.0 - k as f64 / 5.0);
        let _ = writeln!(
            out,
            r##"<line x1="{left:.2}" y1="{y:.2}" x2="{right:.2}" y2="{y:.2}" stroke="#dddddd"/>"##
        );
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#,
            left - 6.0,
            y + 4.0,
            trim_number(v)
        );
    }
    let _ = writeln!(
        out,
        r#"<line x1="{left:.2}" y1="{top:.2}" x2="{left:.2}" y2="{:.2}" stroke="black"/>"#,
        top + height
    );
}

fn trim_number(v: f64) -> String {
    let s = format!("{v:.3}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s.is_empty() {
        "0".into()
    } else {
        s.to_string()
    }
}

fn legend(out: &mut String, x: f64, y: f64, labels: &[String], line: bool) {
    for (i, label) in labels.iter().enumerate() {
        let ly = y + 16.0 * i as f64;
        if line {
            let _ = writeln!(
                out,
                r#"<line x1="{x:.2}" y1="{ly:.2}" x2="{:.2}" y2="{ly:.2}" stroke="{}" stroke-width="2"/>"#,
                x + 14.0,
                colour(i)
            );
        } else {
            let _ = writeln!(
                out,
                r#"<rect x="{x:.2}" y="{:.2}" width="12" height="10" fill="{}"/>"#,
                ly - 5.0,
                colour(i)
            );
        }
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="{:.2}">{}</text>"#,
            x + 18.0,
            ly + 4.0,
            escape(label)
        );
    }
}

/// Grouped bars: one group per category, one bar per class.
pub fn posterior_means_svg(model: &FittedModel) -> String {
    let types = model.typology().labels();
    let classes = model.class_labels();
    let means: Vec<Vec<f64>> = model.posteriors().iter().map(|p| p.mean()).collect();
    let (left, right, top, bottom) = (60.0, 120.0, 40.0, 50.0);
    let group_w = (classes.len() as f64 * 14.0 + 16.0).max(60.0);
    let plot_w = group_w * types.len() as f64;
    let plot_h = 320.0;
    let (width, height) = (left + plot_w + right, top + plot_h + bottom);
    let highest = means.iter().flatten().copied().fold(0.0, f64::max);
    let y_max = nice_ceiling(highest).min(1.0);

    let mut out = String::new();
    header(&mut out, width, height);
    let _ = writeln!(
        out,
        r#"<text x="{:.2}" y="22" text-anchor="middle" font-size="14">Posterior mean proportion of each type by class</text>"#,
        left + plot_w / 2.0
    );
    y_axis(&mut out, left, top, plot_h, left + plot_w, y_max);
    let bar_w = (group_w - 16.0) / classes.len() as f64;
    for (j, t) in types.iter().enumerate() {
        let gx = left + group_w * j as f64 + 8.0;
        for (i, c) in classes.iter().enumerate() {
            let v = means[i][j];
            let h = plot_h * (v / y_max).min(1.0);
            let _ = writeln!(
                out,
                r#"<rect class="bar" data-class="{}" data-type="{}" data-value="{v:.10}" x="{:.2}" y="{:.2}" width="{:.2}" height="{h:.2}" fill="{}"/>"#,
                escape(c),
                escape(t),
                gx + bar_w * i as f64,
                top + plot_h - h,
                bar_w,
                colour(i)
            );
        }
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            gx + (group_w - 16.0) / 2.0,
            top + plot_h + 18.0,
            escape(t)
        );
    }
    let _ = writeln!(
        out,
        r#"<line x1="{left:.2}" y1="{0:.2}" x2="{1:.2}" y2="{0:.2}" stroke="black"/>"#,
        top + plot_h,
        left + plot_w
    );
    legend(&mut out, left + plot_w + 20.0, top + 10.0, classes, false);
    out.push_str("</svg>\n");
    out
}

/// One panel per class with the Beta marginal density of every category.
/// Curves are clipped at the panel's y limit, which is set from the interior
/// `0.02 <= x <= 0.98` so the spikes at the ends do not flatten everything.
pub fn marginals_svg(model: &FittedModel) -> String {
    let types = model.typology().labels();
    let grid = logit_grid();
    let (left, right, top) = (60.0, 120.0, 40.0);
    let (plot_w, panel_h, gap) = (600.0, 180.0, 50.0);
    let n = model.num_classes();
    let width = left + plot_w + right;
    let height = top + n as f64 * (panel_h + gap);

    let mut out = String::new();
    header(&mut out, width, height);
    let _ = writeln!(
        out,
        r#"<text x="{:.2}" y="22" text-anchor="middle" font-size="14">Marginal posterior density of each type's proportion</text>"#,
        left + plot_w / 2.0
    );
    for (i, (label, post)) in model
        .class_labels()
        .iter()
        .zip(model.posteriors())
        .enumerate()
    {
        let marginals: Vec<BetaMarginal> = (0..types.len())
            .map(|j| post.marginal_beta(j).expect("index in range"))
            .collect();
        let curves: Vec<Vec<f64>> = marginals
            .iter()
            .map(|m| grid.iter().map(|p| beta_density(m, p)).collect())
            .collect();
        let interior = curves
            .iter()
            .flat_map(|c| c.iter().zip(&grid))
            .filter(|(_, p)| (0.02..=0.98).contains(&p.x))
            .map(|(d, _)| *d)
            .fold(0.0, f64::max);
        let y_max = nice_ceiling(interior.max(1.0));
        let panel_top = top + 20.0 + i as f64 * (panel_h + gap);

        let _ = writeln!(out, r#"<g class="panel" data-class="{}">"#, escape(label));
        let _ = writeln!(
            out,
            r#"<text x="{left:.2}" y="{:.2}" font-size="13">{}: {}</text>"#,
            panel_top - 8.0,
            escape(label),
            post
        );
        y_axis(&mut out, left, panel_top, panel_h, left + plot_w, y_max);
        for k in 0..=4 {
            let x = left + plot_w * k as f64 / 4.0;
            let _ = writeln!(
                out,
                r#"<text x="{x:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
                panel_top + panel_h + 16.0,
                trim_number(k as f64 / 4.0)
            );
        }
        let _ = writeln!(
            out,
            r#"<line x1="{left:.2}" y1="{0:.2}" x2="{1:.2}" y2="{0:.2}" stroke="black"/>"#,
            panel_top + panel_h,
            left + plot_w
        );
        for (j, curve) in curves.iter().enumerate() {
            let mut points = String::new();
            let mut last = String::new();
            for (d, p) in curve.iter().zip(&grid) {
                let px = left + plot_w * p.x;
                let py = panel_top + panel_h * (1.0 - (d / y_max).min(1.0));
                let point = format!("{px:.2},{py:.2}");
                // many grid points share a pixel near the ends
                if point != last {
                    if !points.is_empty() {
                        points.push(' ');
                    }
                    points.push_str(&point);
                    last = point;
                }
            }
            let _ = writeln!(
                out,
                r#"<polyline class="density" data-type="{}" fill="none" stroke="{}" stroke-width="1.5" points="{points}"/>"#,
                escape(&types[j]),
                colour(j)
            );
        }
        legend(
            &mut out,
            left + plot_w + 20.0,
            panel_top + 10.0,
            types,
            true,
        );
        out.push_str("</g>\n");
    }
    out.push_str("</svg>\n");
    out
}
