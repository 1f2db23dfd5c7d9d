//! Minimal SVG output: scatter plots and polylines, no external renderer.

/// One scatter series: points as (x, y) pairs and a CSS color.
pub struct Series<'a> {
    pub points: &'a [(f64, f64)],
    pub color: &'a str,
    pub label: &'a str,
}

const W: f64 = 640.0;
const H: f64 = 480.0;
const PAD: f64 = 40.0;

fn bounds(all: impl Iterator<Item = (f64, f64)>) -> (f64, f64, f64, f64) {
    let mut min_x = f64::INFINITY;
    let mut max_x = f64::NEG_INFINITY;
    let mut min_y = f64::INFINITY;
    let mut max_y = f64::NEG_INFINITY;
    for (x, y) in all {
        min_x = min_x.min(x);
        max_x = max_x.max(x);
        min_y = min_y.min(y);
        max_y = max_y.max(y);
    }
    if !min_x.is_finite() {
        return (0.0, 1.0, 0.0, 1.0);
    }
    let pad_x = (max_x - min_x).max(1e-9) * 0.05;
    let pad_y = (max_y - min_y).max(1e-9) * 0.05;
    (min_x - pad_x, max_x + pad_x, min_y - pad_y, max_y + pad_y)
}

/// Scatter plot of one or more series.
pub fn scatter(series: &[Series<'_>]) -> String {
    let (min_x, max_x, min_y, max_y) =
        bounds(series.iter().flat_map(|s| s.points.iter().copied()));
    let sx = |x: f64| PAD + (x - min_x) / (max_x - min_x) * (W - 2.0 * PAD);
    let sy = |y: f64| H - PAD - (y - min_y) / (max_y - min_y) * (H - 2.0 * PAD);
    let mut out = svg_open();
    for (si, s) in series.iter().enumerate() {
        for &(x, y) in s.points {
            out.push_str(&format!(
                "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"2.5\" fill=\"{}\" fill-opacity=\"0.7\"/>\n",
                sx(x),
                sy(y),
                s.color
            ));
        }
        out.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" fill=\"{}\" font-size=\"13\">{}</text>\n",
            PAD,
            18.0 + 16.0 * si as f64,
            s.color,
            escape(s.label)
        ));
    }
    out.push_str("</svg>\n");
    out
}

/// Line plot of a single series indexed by position.
pub fn line(values: &[f64], color: &str, label: &str) -> String {
    let pts: Vec<(f64, f64)> = values
        .iter()
        .enumerate()
        .map(|(i, &v)| (i as f64, v))
        .collect();
    let (min_x, max_x, min_y, max_y) = bounds(pts.iter().copied());
    let sx = |x: f64| PAD + (x - min_x) / (max_x - min_x) * (W - 2.0 * PAD);
    let sy = |y: f64| H - PAD - (y - min_y) / (max_y - min_y) * (H - 2.0 * PAD);
    let path: Vec<String> = pts
        .iter()
        .map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y)))
        .collect();
    let mut out = svg_open();
    out.push_str(&format!(
        "<polyline points=\"{}\" fill=\"none\" stroke=\"{}\" stroke-width=\"1.5\"/>\n",
        path.join(" "),
        color
    ));
    out.push_str(&format!(
        "<text x=\"{PAD}\" y=\"18\" fill=\"{color}\" font-size=\"13\">{}</text>\n",
        escape(label)
    ));
    out.push_str("</svg>\n");
    out
}

fn svg_open() -> String {
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" \
         viewBox=\"0 0 {W} {H}\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
    )
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
