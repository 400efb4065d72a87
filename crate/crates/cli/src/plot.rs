//! Minimal SVG line chart of an optimization trace.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use pcc_core::ldo::LdoTrace;

use crate::CliError;

/// Display factor applied to the critic term.
pub const LD_SCALE: f64 = 0.1;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 400.0;
const MARGIN: f64 = 50.0;
const COLORS: [&str; 4] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"];

/// `(label, values)` for each curve that has data.
pub fn curves(trace: &LdoTrace) -> Vec<(String, Vec<f64>)> {
    let r = &trace.records;
    let mut out = vec![
        ("L_EMD".to_string(), r.iter().map(|x| x.l_emd).collect()),
        (format!("{LD_SCALE} x L_D"), r.iter().map(|x| LD_SCALE * x.l_d).collect()),
        ("L_2".to_string(), r.iter().map(|x| x.l_2).collect()),
    ];
    if r.iter().all(|x| x.emd_gt.is_some()) {
        out.push(("EMD-GT".to_string(), r.iter().map(|x| x.emd_gt.unwrap_or(f64::NAN)).collect()));
    }
    out
}

pub fn render_svg(trace: &LdoTrace) -> Result<String, CliError> {
    if trace.is_empty() {
        return Err(CliError::Data("trace has no records".into()));
    }
    let curves = curves(trace);
    let (lo, hi) = curves
        .iter()
        .flat_map(|(_, v)| v.iter().copied())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    let span = if hi > lo { hi - lo } else { 1.0 };
    let last = trace.records.last().map_or(0, |r| r.iteration).max(1) as f64;
    let x = |i: usize| MARGIN + (WIDTH - 2.0 * MARGIN) * trace.records[i].iteration as f64 / last;
    let y = |v: f64| HEIGHT - MARGIN - (HEIGHT - 2.0 * MARGIN) * (v - lo) / span;

    let mut svg = String::new();
    let w = &mut svg;
    let fail = |_| CliError::Data("formatting failed".into());
    writeln!(w, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}">"#).map_err(fail)?;
    writeln!(w, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#).map_err(fail)?;
    writeln!(
        w,
        r#"<path d="M{m} {t} L{m} {b} L{r} {b}" stroke="black" fill="none"/>"#,
        m = MARGIN,
        t = MARGIN,
        b = HEIGHT - MARGIN,
        r = WIDTH - MARGIN
    )
    .map_err(fail)?;
    writeln!(w, r#"<text x="{}" y="{}" font-size="12">iteration (0..{last})</text>"#, WIDTH / 2.0 - 40.0, HEIGHT - 15.0)
        .map_err(fail)?;
    writeln!(w, r#"<text x="5" y="{}" font-size="12">{hi:.4}</text>"#, MARGIN).map_err(fail)?;
    writeln!(w, r#"<text x="5" y="{}" font-size="12">{lo:.4}</text>"#, HEIGHT - MARGIN).map_err(fail)?;
    for (k, (label, values)) in curves.iter().enumerate() {
        let points: Vec<String> = values.iter().enumerate().map(|(i, &v)| format!("{:.2},{:.2}", x(i), y(v))).collect();
        writeln!(
            w,
            r#"<polyline class="curve" data-label="{label}" points="{}" stroke="{}" fill="none"/>"#,
            points.join(" "),
            COLORS[k]
        )
        .map_err(fail)?;
        writeln!(
            w,
            r#"<text x="{}" y="{}" font-size="12" fill="{}">{label}</text>"#,
            WIDTH - MARGIN - 90.0,
            MARGIN + 15.0 * k as f64,
            COLORS[k]
        )
        .map_err(fail)?;
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}

pub fn cmd_trace_plot(trace_path: &Path, out: &Path) -> Result<(), CliError> {
    let text = fs::read_to_string(trace_path).map_err(|e| CliError::data(trace_path, e))?;
    let trace = LdoTrace::from_text(&text).map_err(|e| CliError::data(trace_path, e))?;
    let svg = render_svg(&trace)?;
    fs::write(out, svg).map_err(|e| CliError::data(out, e))
}
