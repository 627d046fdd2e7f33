//! Static SVG scatter plots of embeddings. No raster dependencies; output
//! bytes are a pure function of the input.

/// 10-color categorical palette; label ids cycle through it.
const PALETTE: [&str; 10] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
    "#bcbd22", "#17becf",
];

fn color_for(label: Option<i64>) -> &'static str {
    match label {
        Some(l) => PALETTE[(l.rem_euclid(10)) as usize],
        None => PALETTE[0],
    }
}

/// Renders a scatter of 2-D points, axes autoscaled with a 5% margin,
/// one `<circle>` per point.
pub fn render_scatter_svg(
    points: &[(f64, f64)],
    labels: Option<&[i64]>,
    width: u32,
    height: u32,
) -> String {
    let (mut xmin, mut xmax) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut ymin, mut ymax) = (f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in points {
        xmin = xmin.min(x);
        xmax = xmax.max(x);
        ymin = ymin.min(y);
        ymax = ymax.max(y);
    }
    if points.is_empty() {
        (xmin, xmax, ymin, ymax) = (0.0, 1.0, 0.0, 1.0);
    }
    let pad = |lo: f64, hi: f64| -> (f64, f64) {
        let span = hi - lo;
        if span <= 0.0 {
            (lo - 1.0, hi + 1.0)
        } else {
            (lo - 0.05 * span, hi + 0.05 * span)
        }
    };
    let (xmin, xmax) = pad(xmin, xmax);
    let (ymin, ymax) = pad(ymin, ymax);

    let w = width as f64;
    let h = height as f64;
    let sx = |x: f64| (x - xmin) / (xmax - xmin) * w;
    // SVG y axis points down
    let sy = |y: f64| h - (y - ymin) / (ymax - ymin) * h;

    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" \
         viewBox=\"0 0 {w} {h}\">\n",
        w = width,
        h = height
    ));
    svg.push_str(&format!(
        "<rect x=\"0\" y=\"0\" width=\"{}\" height=\"{}\" fill=\"#ffffff\"/>\n",
        width, height
    ));
    for (i, &(x, y)) in points.iter().enumerate() {
        let color = color_for(labels.map(|l| l[i]));
        svg.push_str(&format!(
            "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"3\" fill=\"{}\" fill-opacity=\"0.8\"/>\n",
            sx(x),
            sy(y),
            color
        ));
    }
    svg.push_str("</svg>\n");
    svg
}
