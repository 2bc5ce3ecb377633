//! Deterministic SVG output: realizations (1D stacked rows, 2D nested squares)
//! and line plots of profiles against `|ln r|`.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::realization::{units_to_f64, Realization};

const WIDTH: f64 = 800.0;
const MARGIN: f64 = 20.0;
const ROW: f64 = 14.0;
const ROW_GAP: f64 = 6.0;
/// Largest number of elements drawn per level.
pub const DRAW_LIMIT: usize = 1 << 14;

fn header(w: f64, h: f64) -> String {
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w:.0}\" height=\"{h:.0}\" viewBox=\"0 0 {w:.0} {h:.0}\">\n\
         <rect x=\"0\" y=\"0\" width=\"{w:.0}\" height=\"{h:.0}\" fill=\"white\"/>\n"
    )
}

/// Levels `0..=depth` of a realization. Levels with more than [`DRAW_LIMIT`] elements are rejected.
pub fn render_realization(real: &Realization, depth: usize) -> Result<String> {
    let depth = depth.min(real.depth);
    let count = real.count_at(depth)?;
    if count > DRAW_LIMIT as u128 {
        return Err(Error::TooLarge(format!("{count} elements at level {depth}; draw a shallower depth")));
    }
    let frame = real.frame();
    let denom = &frame.denom;
    let diam = units_to_f64(&frame.extent[0], denom);
    let scale = (WIDTH - 2.0 * MARGIN) / diam;
    let mut s = String::new();
    if real.dimension() == 1 {
        let h = 2.0 * MARGIN + (depth + 1) as f64 * (ROW + ROW_GAP);
        s.push_str(&header(WIDTH, h));
        for level in 0..=depth {
            let y = MARGIN + level as f64 * (ROW + ROW_GAP);
            let ext = units_to_f64(&frame.extent[level], denom) * scale;
            let _ = writeln!(s, "<g fill=\"black\" data-level=\"{level}\">");
            for [x, _] in real.corners_units(level)? {
                let x = MARGIN + units_to_f64(&x, denom) * scale;
                let _ = writeln!(s, "<rect x=\"{x:.4}\" y=\"{y:.1}\" width=\"{:.4}\" height=\"{ROW:.1}\"/>", ext.max(0.05));
            }
            s.push_str("</g>\n");
        }
    } else {
        let side = WIDTH;
        s.push_str(&header(side, side));
        for level in 0..=depth {
            let ext = units_to_f64(&frame.extent[level], denom) * scale;
            let shade = 40 + (level * 160 / depth.max(1));
            let _ = writeln!(s, "<g fill=\"none\" stroke=\"rgb({shade},{shade},{shade})\" stroke-width=\"0.5\" data-level=\"{level}\">");
            for [x, y] in real.corners_units(level)? {
                let px = MARGIN + units_to_f64(&x, denom) * scale;
                let py = MARGIN + units_to_f64(&y, denom) * scale;
                let _ = writeln!(s, "<rect x=\"{px:.4}\" y=\"{py:.4}\" width=\"{ext:.4}\" height=\"{ext:.4}\"/>");
            }
            s.push_str("</g>\n");
        }
    }
    s.push_str("</svg>\n");
    Ok(s)
}

/// A named series of `(|ln r|, value)` points.
pub struct Series<'a> {
    pub label: &'a str,
    pub points: Vec<(f64, f64)>,
}

const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

/// Step-free polyline plot; the horizontal axis is `|ln r|`, so the scale axis is logarithmic.
pub fn render_plot(title: &str, y_label: &str, series: &[Series<'_>]) -> String {
    let h = 480.0;
    let left = 70.0;
    let bottom = 50.0;
    let pts = series.iter().flat_map(|s| s.points.iter()).filter(|(x, y)| x.is_finite() && y.is_finite());
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in pts {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if !x0.is_finite() {
        (x0, x1, y0, y1) = (0.0, 1.0, 0.0, 1.0);
    }
    if x1 - x0 < 1e-12 {
        x1 = x0 + 1.0;
    }
    if y1 - y0 < 1e-12 {
        y0 -= 0.5;
        y1 += 0.5;
    }
    let px = |x: f64| left + (x - x0) / (x1 - x0) * (WIDTH - left - MARGIN);
    let py = |y: f64| MARGIN + 20.0 + (y1 - y) / (y1 - y0) * (h - bottom - MARGIN - 20.0);
    let mut s = header(WIDTH, h);
    let _ = writeln!(s, "<text x=\"{left:.1}\" y=\"{:.1}\" font-family=\"sans-serif\" font-size=\"14\">{}</text>", MARGIN + 4.0, escape(title));
    let axis_y = h - bottom;
    let _ = writeln!(s, "<line x1=\"{left:.1}\" y1=\"{axis_y:.1}\" x2=\"{:.1}\" y2=\"{axis_y:.1}\" stroke=\"black\"/>", WIDTH - MARGIN);
    let _ = writeln!(s, "<line x1=\"{left:.1}\" y1=\"{:.1}\" x2=\"{left:.1}\" y2=\"{axis_y:.1}\" stroke=\"black\"/>", MARGIN + 20.0);
    for i in 0..=4 {
        let t = i as f64 / 4.0;
        let xv = x0 + t * (x1 - x0);
        let yv = y0 + t * (y1 - y0);
        let _ = writeln!(s, "<text x=\"{:.1}\" y=\"{:.1}\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"middle\">{xv:.3}</text>", px(xv), axis_y + 16.0);
        let _ = writeln!(s, "<text x=\"{:.1}\" y=\"{:.1}\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"end\">{yv:.4}</text>", left - 6.0, py(yv) + 4.0);
    }
    let _ = writeln!(s, "<text x=\"{:.1}\" y=\"{:.1}\" font-family=\"sans-serif\" font-size=\"12\" text-anchor=\"middle\">|ln r|</text>", (left + WIDTH - MARGIN) / 2.0, h - 12.0);
    let _ = writeln!(s, "<text x=\"14\" y=\"{:.1}\" font-family=\"sans-serif\" font-size=\"12\" transform=\"rotate(-90 14 {:.1})\" text-anchor=\"middle\">{}</text>", h / 2.0, h / 2.0, escape(y_label));
    for (i, ser) in series.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let path: Vec<String> = ser
            .points
            .iter()
            .filter(|(x, y)| x.is_finite() && y.is_finite())
            .map(|&(x, y)| format!("{:.3},{:.3}", px(x), py(y)))
            .collect();
        let _ = writeln!(s, "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"1.2\" points=\"{}\"/>", path.join(" "));
        let _ = writeln!(
            s,
            "<text x=\"{:.1}\" y=\"{:.1}\" font-family=\"sans-serif\" font-size=\"11\" fill=\"{color}\">{}</text>",
            WIDTH - MARGIN - 180.0,
            MARGIN + 40.0 + 14.0 * i as f64,
            escape(ser.label)
        );
    }
    s.push_str("</svg>\n");
    s
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus;
    use crate::realization::realize;

    #[test]
    fn cantor_rows_and_determinism() {
        let c = corpus::cantor();
        let r = realize(&c.spec, c.placement, 5).unwrap();
        let a = render_realization(&r, 4).unwrap();
        let b = render_realization(&r, 4).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.matches("<rect").count(), 1 + (1 + 2 + 4 + 8 + 16));
    }

    #[test]
    fn plot_has_one_polyline_per_series() {
        let s = render_plot("t", "alpha", &[Series { label: "a", points: vec![(1.0, 0.5), (2.0, 0.6)] }, Series { label: "b", points: vec![] }]);
        assert_eq!(s.matches("<polyline").count(), 2);
    }
}
