//! Report emission: per-curve CSVs, a combined CSV, and an SVG line chart.
//! All floats are serialized with 10 significant digits so re-runs produce
//! byte-identical files.

use super::{AveragedCurve, MatchRateCurve};
use crate::error::{Error, Result};
use crate::util::{atomic_write, fmt_sig10};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

const PALETTE: &[&str] = &[
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
    "#bcbd22", "#17becf",
];

fn sanitize(label: &str) -> String {
    label
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect()
}

/// Write the report files for a set of curves (and optional averaged
/// curves) into `out_dir`. Emits one CSV per curve (`k,k_over_u,match_rate`),
/// a combined CSV keyed by method, `averaged.csv` when averaged curves are
/// given, and one SVG chart. Returns the paths written.
pub fn emit_report(
    curves: &[MatchRateCurve],
    averaged: &[AveragedCurve],
    out_dir: &Path,
) -> Result<Vec<PathBuf>> {
    if curves.is_empty() && averaged.is_empty() {
        return Err(Error::Evaluation("no curves to report".into()));
    }
    std::fs::create_dir_all(out_dir)?;
    let mut written = Vec::new();

    for curve in curves {
        let mut name = format!("curve_{}", sanitize(&curve.method));
        if !curve.dataset_id.is_empty() {
            name.push('_');
            name.push_str(&sanitize(&curve.dataset_id));
        }
        let path = out_dir.join(format!("{name}.csv"));
        let mut text = String::from("k,k_over_u,match_rate\n");
        for p in &curve.points {
            let _ = writeln!(
                text,
                "{},{},{}",
                p.k,
                fmt_sig10(p.k_over_u),
                fmt_sig10(p.match_rate)
            );
        }
        atomic_write(&path, text.as_bytes())?;
        written.push(path);
    }

    if !curves.is_empty() {
        let path = out_dir.join("curves.csv");
        let mut text = String::from("method,dataset,k,k_over_u,match_rate\n");
        for curve in curves {
            for p in &curve.points {
                let _ = writeln!(
                    text,
                    "{},{},{},{},{}",
                    curve.method,
                    curve.dataset_id,
                    p.k,
                    fmt_sig10(p.k_over_u),
                    fmt_sig10(p.match_rate)
                );
            }
        }
        atomic_write(&path, text.as_bytes())?;
        written.push(path);
    }

    if !averaged.is_empty() {
        let path = out_dir.join("averaged.csv");
        let mut text = String::from("method,k_over_u,match_rate\n");
        for curve in averaged {
            for &(g, v) in &curve.points {
                let _ = writeln!(text, "{},{},{}", curve.method, fmt_sig10(g), fmt_sig10(v));
            }
        }
        atomic_write(&path, text.as_bytes())?;
        written.push(path);
    }

    // Chart the averaged curves when present, else the raw curves.
    let lines: Vec<(String, Vec<(f64, f64)>)> = if !averaged.is_empty() {
        averaged
            .iter()
            .map(|c| (c.method.clone(), c.points.clone()))
            .collect()
    } else {
        curves
            .iter()
            .map(|c| {
                let label = if c.dataset_id.is_empty() {
                    c.method.clone()
                } else {
                    format!("{}/{}", c.method, c.dataset_id)
                };
                (
                    label,
                    c.points.iter().map(|p| (p.k_over_u, p.match_rate)).collect(),
                )
            })
            .collect()
    };
    let svg_path = out_dir.join("match_rate.svg");
    atomic_write(&svg_path, render_svg(&lines).as_bytes())?;
    written.push(svg_path);
    Ok(written)
}

/// Render match-rate lines (x = k/u in (0,1], y = match rate in [0,1]) as a
/// fixed-size SVG with axes and a legend.
fn render_svg(lines: &[(String, Vec<(f64, f64)>)]) -> String {
    const W: f64 = 800.0;
    const H: f64 = 500.0;
    const ML: f64 = 60.0; // left margin
    const MR: f64 = 170.0; // room for the legend
    const MT: f64 = 20.0;
    const MB: f64 = 50.0;
    let plot_w = W - ML - MR;
    let plot_h = H - MT - MB;
    let x_of = |g: f64| ML + g * plot_w;
    let y_of = |v: f64| MT + (1.0 - v) * plot_h;

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" viewBox=\"0 0 {W} {H}\">"
    );
    let _ = writeln!(svg, "<rect width=\"{W}\" height=\"{H}\" fill=\"white\"/>");

    // Gridlines and ticks at 0, 0.2, ..., 1.0 on both axes.
    for i in 0..=5 {
        let t = i as f64 / 5.0;
        let x = x_of(t);
        let y = y_of(t);
        let _ = writeln!(
            svg,
            "<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"#dddddd\"/>",
            fmt_sig10(x), fmt_sig10(MT), fmt_sig10(x), fmt_sig10(MT + plot_h)
        );
        let _ = writeln!(
            svg,
            "<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"#dddddd\"/>",
            fmt_sig10(ML), fmt_sig10(y), fmt_sig10(ML + plot_w), fmt_sig10(y)
        );
        let _ = writeln!(
            svg,
            "<text x=\"{}\" y=\"{}\" font-size=\"12\" text-anchor=\"middle\">{}</text>",
            fmt_sig10(x), fmt_sig10(MT + plot_h + 18.0), fmt_sig10(t)
        );
        let _ = writeln!(
            svg,
            "<text x=\"{}\" y=\"{}\" font-size=\"12\" text-anchor=\"end\">{}</text>",
            fmt_sig10(ML - 6.0), fmt_sig10(y + 4.0), fmt_sig10(t)
        );
    }
    let _ = writeln!(
        svg,
        "<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"black\"/>",
        fmt_sig10(ML), fmt_sig10(MT), fmt_sig10(plot_w), fmt_sig10(plot_h)
    );
    let _ = writeln!(
        svg,
        "<text x=\"{}\" y=\"{}\" font-size=\"14\" text-anchor=\"middle\">k / u</text>",
        fmt_sig10(ML + plot_w / 2.0), fmt_sig10(H - 10.0)
    );
    let _ = writeln!(
        svg,
        "<text x=\"16\" y=\"{}\" font-size=\"14\" text-anchor=\"middle\" transform=\"rotate(-90 16 {})\">match rate</text>",
        fmt_sig10(MT + plot_h / 2.0), fmt_sig10(MT + plot_h / 2.0)
    );

    for (i, (label, points)) in lines.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let coords: Vec<String> = points
            .iter()
            .map(|&(g, v)| format!("{},{}", fmt_sig10(x_of(g)), fmt_sig10(y_of(v))))
            .collect();
        let _ = writeln!(
            svg,
            "<polyline points=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"2\"/>",
            coords.join(" ")
        );
        let ly = MT + 16.0 + i as f64 * 18.0;
        let _ = writeln!(
            svg,
            "<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"{color}\" stroke-width=\"2\"/>",
            fmt_sig10(ML + plot_w + 10.0), fmt_sig10(ly - 4.0),
            fmt_sig10(ML + plot_w + 34.0), fmt_sig10(ly - 4.0)
        );
        let _ = writeln!(
            svg,
            "<text x=\"{}\" y=\"{}\" font-size=\"12\">{}</text>",
            fmt_sig10(ML + plot_w + 40.0), fmt_sig10(ly), xml_escape(label)
        );
    }
    svg.push_str("</svg>\n");
    svg
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
