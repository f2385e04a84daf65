//! Minimal static SVG output: line plots, log-log plots and spike rasters.

use std::fmt::Write;

use crate::error::{Error, Result};

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 400.0;
const MARGIN: f64 = 56.0;
const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

#[derive(Clone, Debug, PartialEq)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Axes {
    Linear,
    LogLog,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Figure {
    Lines {
        title: String,
        x_label: String,
        y_label: String,
        axes: Axes,
        series: Vec<Series>,
    },
    /// One row of marks per neuron.
    Raster {
        title: String,
        t_end: f64,
        rows: Vec<Vec<f64>>,
    },
}

/// Renders `figure` as a self-contained SVG document. The output depends only
/// on the input values.
pub fn emit_svg(figure: &Figure) -> Result<String> {
    match figure {
        Figure::Lines { title, x_label, y_label, axes, series } => lines(title, x_label, y_label, *axes, series),
        Figure::Raster { title, t_end, rows } => raster(title, *t_end, rows),
    }
}

fn header(out: &mut String, title: &str) {
    let _ = write!(
        out,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" viewBox=\"0 0 {WIDTH} {HEIGHT}\" font-family=\"sans-serif\" font-size=\"12\">\n\
         <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n\
         <text x=\"{:.1}\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">{}</text>\n",
        WIDTH / 2.0,
        escape(title)
    );
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// Maps `[lo, hi]` onto pixel range `[a, b]`, tolerating degenerate spans.
fn scale(lo: f64, hi: f64, a: f64, b: f64) -> impl Fn(f64) -> f64 {
    let span = if hi > lo { hi - lo } else { 1.0 };
    let lo = if hi > lo { lo } else { lo - 0.5 };
    move |x| a + (x - lo) / span * (b - a)
}

fn frame(out: &mut String, x_label: &str, y_label: &str, x_range: (f64, f64), y_range: (f64, f64), log: bool) {
    let (x0, x1, y0, y1) = (MARGIN, WIDTH - MARGIN / 2.0, HEIGHT - MARGIN, MARGIN / 1.5);
    let _ = writeln!(
        out,
        "<rect x=\"{x0:.1}\" y=\"{y1:.1}\" width=\"{:.1}\" height=\"{:.1}\" fill=\"none\" stroke=\"black\"/>",
        x1 - x0,
        y0 - y1
    );
    let tick = |v: f64| if log { format!("1e{v:.1}") } else { format!("{v:.3}") };
    let _ =
        writeln!(out, "<text x=\"{x0:.1}\" y=\"{:.1}\" text-anchor=\"start\">{}</text>", y0 + 16.0, tick(x_range.0));
    let _ = writeln!(out, "<text x=\"{x1:.1}\" y=\"{:.1}\" text-anchor=\"end\">{}</text>", y0 + 16.0, tick(x_range.1));
    let _ = writeln!(out, "<text x=\"{:.1}\" y=\"{y0:.1}\" text-anchor=\"end\">{}</text>", x0 - 4.0, tick(y_range.0));
    let _ = writeln!(
        out,
        "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"end\">{}</text>",
        x0 - 4.0,
        y1 + 10.0,
        tick(y_range.1)
    );
    let _ = writeln!(
        out,
        "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\">{}</text>",
        (x0 + x1) / 2.0,
        HEIGHT - 12.0,
        escape(x_label)
    );
    let _ = writeln!(
        out,
        "<text x=\"14\" y=\"{:.1}\" text-anchor=\"middle\" transform=\"rotate(-90 14 {:.1})\">{}</text>",
        (y0 + y1) / 2.0,
        (y0 + y1) / 2.0,
        escape(y_label)
    );
}

fn lines(title: &str, x_label: &str, y_label: &str, axes: Axes, series: &[Series]) -> Result<String> {
    let log = axes == Axes::LogLog;
    let map = |(x, y): (f64, f64)| if log { (x.log10(), y.log10()) } else { (x, y) };
    let data: Vec<Vec<(f64, f64)>> = series
        .iter()
        .map(|s| s.points.iter().map(|&p| map(p)).filter(|(x, y)| x.is_finite() && y.is_finite()).collect())
        .collect();
    if data.iter().all(|d| d.is_empty()) {
        return Err(Error::Usage(format!("plot {title:?} has no finite data points")));
    }
    let all = data.iter().flatten();
    let (mut xl, mut xh, mut yl, mut yh) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in all {
        xl = xl.min(x);
        xh = xh.max(x);
        yl = yl.min(y);
        yh = yh.max(y);
    }
    let mut out = String::new();
    header(&mut out, title);
    frame(&mut out, x_label, y_label, (xl, xh), (yl, yh), log);
    let sx = scale(xl, xh, MARGIN, WIDTH - MARGIN / 2.0);
    let sy = scale(yl, yh, HEIGHT - MARGIN, MARGIN / 1.5);
    for (i, (d, s)) in data.iter().zip(series).enumerate() {
        if d.is_empty() {
            continue;
        }
        let color = PALETTE[i % PALETTE.len()];
        let pts: Vec<String> = d.iter().map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y))).collect();
        let _ = writeln!(
            out,
            "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\" points=\"{}\"/>",
            pts.join(" ")
        );
        let _ = writeln!(
            out,
            "<text x=\"{:.1}\" y=\"{:.1}\" fill=\"{color}\">{}</text>",
            MARGIN + 8.0,
            MARGIN / 1.5 + 16.0 + 14.0 * i as f64,
            escape(&s.label)
        );
    }
    out.push_str("</svg>\n");
    Ok(out)
}

fn raster(title: &str, t_end: f64, rows: &[Vec<f64>]) -> Result<String> {
    if rows.is_empty() || !(t_end > 0.0) {
        return Err(Error::Usage(format!("raster {title:?} needs at least one row and a positive time span")));
    }
    let mut out = String::new();
    header(&mut out, title);
    frame(&mut out, "time", "neuron", (0.0, t_end), (0.0, (rows.len() - 1) as f64), false);
    let sx = scale(0.0, t_end, MARGIN, WIDTH - MARGIN / 2.0);
    let row_h = (HEIGHT - MARGIN - MARGIN / 1.5) / rows.len() as f64;
    for (i, times) in rows.iter().enumerate() {
        let y = HEIGHT - MARGIN - (i as f64 + 0.5) * row_h;
        let mut path = String::new();
        for &t in times {
            let _ = write!(path, "M{:.2} {:.2}v{:.2}", sx(t), y - 0.4 * row_h, 0.8 * row_h);
        }
        let _ = writeln!(out, "<path class=\"row\" d=\"{path}\" stroke=\"black\" stroke-width=\"1\"/>");
    }
    out.push_str("</svg>\n");
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_points() -> Figure {
        Figure::Lines {
            title: "t".into(),
            x_label: "x".into(),
            y_label: "y".into(),
            axes: Axes::Linear,
            series: vec![Series { label: "a".into(), points: vec![(0.0, 1.0), (1.0, 2.0)] }],
        }
    }

    #[test]
    fn two_point_series_gives_one_polyline() {
        let svg = emit_svg(&two_points()).unwrap();
        assert!(svg.starts_with("<svg") && svg.ends_with("</svg>\n"));
        assert_eq!(svg.matches("<polyline").count(), 1);
    }

    #[test]
    fn raster_has_one_row_per_neuron() {
        let fig = Figure::Raster { title: "r".into(), t_end: 1.0, rows: vec![vec![0.1], vec![], vec![0.3, 0.7]] };
        assert_eq!(emit_svg(&fig).unwrap().matches("class=\"row\"").count(), 3);
    }

    #[test]
    fn output_is_deterministic() {
        assert_eq!(emit_svg(&two_points()).unwrap(), emit_svg(&two_points()).unwrap());
    }

    #[test]
    fn empty_input_is_a_usage_error() {
        let empty = Figure::Lines {
            title: "e".into(),
            x_label: String::new(),
            y_label: String::new(),
            axes: Axes::LogLog,
            series: vec![],
        };
        assert!(matches!(emit_svg(&empty), Err(Error::Usage(_))));
        let raster = Figure::Raster { title: "r".into(), t_end: 1.0, rows: vec![] };
        assert!(matches!(emit_svg(&raster), Err(Error::Usage(_))));
    }
}
