//! Convergence-curve rendering: training logs in, one SVG out.
//!
//! The x axis is the backprop counter on a log scale, the y axis average
//! validation PSNR. Each log contributes a polyline; reference values
//! (e.g. the bicubic baseline) become dashed horizontal rules.

use srlab::{Error, Result};

pub struct Series {
    pub label: String,
    /// (backprops, psnr) pairs.
    pub points: Vec<(f64, f64)>,
}

/// Parses our training-log CSV, keeping rows with a finite validation PSNR.
pub fn parse_log(text: &str) -> Result<Vec<(f64, f64)>> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h.starts_with("backprops,") => {}
        _ => return Err(Error::Format("log missing header row".into())),
    }
    let mut points = Vec::new();
    for line in lines {
        if line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 5 {
            return Err(Error::Format(format!("malformed log row '{}'", line)));
        }
        let backprops: f64 = cols[0]
            .parse()
            .map_err(|_| Error::Format(format!("bad backprops in '{}'", line)))?;
        if let Ok(psnr) = cols[3].parse::<f64>() {
            if psnr.is_finite() && backprops > 0.0 {
                points.push((backprops, psnr));
            }
        }
    }
    Ok(points)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AxisRange {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

/// Data bounds over all series and baselines, padded by 5% per side
/// (log-domain for x).
pub fn compute_range(series: &[Series], baselines: &[(String, f64)]) -> Result<AxisRange> {
    let xs: Vec<f64> = series.iter().flat_map(|s| s.points.iter().map(|p| p.0)).collect();
    let mut ys: Vec<f64> = series.iter().flat_map(|s| s.points.iter().map(|p| p.1)).collect();
    ys.extend(baselines.iter().map(|b| b.1));
    if xs.is_empty() {
        return Err(Error::Data("no plottable points".into()));
    }
    let (lx_min, lx_max) = bounds(&xs.iter().map(|v| v.log10()).collect::<Vec<_>>());
    let (y_min, y_max) = bounds(&ys);
    let xpad = 0.05 * (lx_max - lx_min).max(0.1);
    let ypad = 0.05 * (y_max - y_min).max(0.1);
    Ok(AxisRange {
        x_min: 10f64.powf(lx_min - xpad),
        x_max: 10f64.powf(lx_max + xpad),
        y_min: y_min - ypad,
        y_max: y_max + ypad,
    })
}

fn bounds(v: &[f64]) -> (f64, f64) {
    let min = v.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    (min, max)
}

const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];
const W: f64 = 800.0;
const H: f64 = 500.0;
const ML: f64 = 70.0;
const MR: f64 = 20.0;
const MT: f64 = 20.0;
const MB: f64 = 50.0;

pub fn render_svg(series: &[Series], baselines: &[(String, f64)]) -> Result<String> {
    let range = compute_range(series, baselines)?;
    let (lx0, lx1) = (range.x_min.log10(), range.x_max.log10());
    let px = |x: f64| ML + (x.log10() - lx0) / (lx1 - lx0) * (W - ML - MR);
    let py = |y: f64| H - MB - (y - range.y_min) / (range.y_max - range.y_min) * (H - MT - MB);

    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 {W} {H}\" font-family=\"sans-serif\" font-size=\"12\">\n"
    ));
    svg.push_str(&format!(
        "  <rect x=\"0\" y=\"0\" width=\"{W}\" height=\"{H}\" fill=\"white\"/>\n"
    ));
    // Axes.
    svg.push_str(&format!(
        "  <line x1=\"{ML}\" y1=\"{0}\" x2=\"{1}\" y2=\"{0}\" stroke=\"black\"/>\n",
        H - MB,
        W - MR
    ));
    svg.push_str(&format!(
        "  <line x1=\"{ML}\" y1=\"{MT}\" x2=\"{ML}\" y2=\"{}\" stroke=\"black\"/>\n",
        H - MB
    ));
    // Decade ticks on x.
    let mut decade = lx0.ceil() as i64;
    while (decade as f64) <= lx1 {
        let x = px(10f64.powi(decade as i32));
        svg.push_str(&format!(
            "  <line x1=\"{x:.1}\" y1=\"{0}\" x2=\"{x:.1}\" y2=\"{1}\" stroke=\"#ccc\"/>\n",
            MT,
            H - MB
        ));
        svg.push_str(&format!(
            "  <text x=\"{x:.1}\" y=\"{}\" text-anchor=\"middle\">1e{}</text>\n",
            H - MB + 18.0,
            decade
        ));
        decade += 1;
    }
    // Five evenly spaced y ticks.
    for i in 0..=4 {
        let y = range.y_min + (range.y_max - range.y_min) * i as f64 / 4.0;
        let yy = py(y);
        svg.push_str(&format!(
            "  <line x1=\"{0}\" y1=\"{yy:.1}\" x2=\"{1}\" y2=\"{yy:.1}\" stroke=\"#eee\"/>\n",
            ML,
            W - MR
        ));
        svg.push_str(&format!(
            "  <text x=\"{}\" y=\"{:.1}\" text-anchor=\"end\">{:.2}</text>\n",
            ML - 6.0,
            yy + 4.0,
            y
        ));
    }
    svg.push_str(&format!(
        "  <text x=\"{}\" y=\"{}\" text-anchor=\"middle\">backprops</text>\n",
        (ML + W - MR) / 2.0,
        H - 12.0
    ));
    svg.push_str(&format!(
        "  <text x=\"16\" y=\"{}\" text-anchor=\"middle\" transform=\"rotate(-90 16 {})\">average PSNR (dB)</text>\n",
        (MT + H - MB) / 2.0,
        (MT + H - MB) / 2.0
    ));

    for (i, (label, value)) in baselines.iter().enumerate() {
        let yy = py(*value);
        svg.push_str(&format!(
            "  <line x1=\"{0}\" y1=\"{yy:.1}\" x2=\"{1}\" y2=\"{yy:.1}\" stroke=\"#555\" stroke-dasharray=\"6 4\"/>\n",
            ML,
            W - MR
        ));
        svg.push_str(&format!(
            "  <text x=\"{}\" y=\"{:.1}\" fill=\"#555\">{} = {:.2}</text>\n",
            ML + 8.0 + 150.0 * i as f64,
            yy - 5.0,
            label,
            value
        ));
    }

    for (i, s) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let pts: Vec<String> = s
            .points
            .iter()
            .map(|&(x, y)| format!("{:.1},{:.1}", px(x), py(y)))
            .collect();
        svg.push_str(&format!(
            "  <polyline fill=\"none\" stroke=\"{}\" stroke-width=\"1.5\" points=\"{}\"/>\n",
            color,
            pts.join(" ")
        ));
        svg.push_str(&format!(
            "  <text x=\"{}\" y=\"{}\" fill=\"{}\">{}</text>\n",
            W - MR - 160.0,
            MT + 16.0 * (i + 1) as f64,
            color,
            s.label
        ));
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}
