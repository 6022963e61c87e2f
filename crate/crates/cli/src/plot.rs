//! Minimal SVG line plots of `N(λ)` with a log-scale y axis.

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 400.0;
const MARGIN: f64 = 50.0;

/// `(x, y)` pairs from two named columns of a CSV with `#` comments.
/// Rows whose y value is not finite and positive are dropped.
pub fn read_columns(csv: &str, x_col: &str, y_col: &str) -> Result<Vec<(f64, f64)>, String> {
    let mut lines = csv.lines().filter(|l| !l.starts_with('#'));
    let header: Vec<&str> = lines.next().ok_or("empty CSV")?.split(',').collect();
    let find = |name: &str| header.iter().position(|h| *h == name).ok_or(format!("no column {name:?}"));
    let (ix, iy) = (find(x_col)?, find(y_col)?);
    let mut out = Vec::new();
    for line in lines {
        let fields: Vec<&str> = line.split(',').collect();
        let parse = |i: usize| fields.get(i).and_then(|f| f.parse::<f64>().ok());
        if let (Some(x), Some(y)) = (parse(ix), parse(iy)) {
            if x.is_finite() && y.is_finite() && y > 0.0 {
                out.push((x, y));
            }
        }
    }
    Ok(out)
}

/// Polyline of `log10 y` against `x`.
pub fn svg_log_plot(points: &[(f64, f64)], x_label: &str, y_label: &str) -> String {
    let mut svg = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" viewBox=\"0 0 {WIDTH} {HEIGHT}\">\n"
    );
    svg += &format!(
        "<rect x=\"{MARGIN}\" y=\"{MARGIN}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"black\"/>\n",
        WIDTH - 2.0 * MARGIN,
        HEIGHT - 2.0 * MARGIN
    );
    if !points.is_empty() {
        let logs: Vec<(f64, f64)> = points.iter().map(|&(x, y)| (x, y.log10())).collect();
        let range = |f: fn(&(f64, f64)) -> f64| {
            let lo = logs.iter().map(f).fold(f64::INFINITY, f64::min);
            let hi = logs.iter().map(f).fold(f64::NEG_INFINITY, f64::max);
            if hi > lo {
                (lo, hi)
            } else {
                (lo - 0.5, lo + 0.5)
            }
        };
        let (x0, x1) = range(|p| p.0);
        let (y0, y1) = range(|p| p.1);
        let sx = |x: f64| MARGIN + (x - x0) / (x1 - x0) * (WIDTH - 2.0 * MARGIN);
        let sy = |y: f64| HEIGHT - MARGIN - (y - y0) / (y1 - y0) * (HEIGHT - 2.0 * MARGIN);
        let coords: Vec<String> = logs.iter().map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y))).collect();
        svg += &format!(
            "<polyline fill=\"none\" stroke=\"steelblue\" stroke-width=\"1.5\" points=\"{}\"/>\n",
            coords.join(" ")
        );
        let text = |x: f64, y: f64, anchor: &str, s: String| {
            format!("<text x=\"{x:.2}\" y=\"{y:.2}\" font-size=\"12\" text-anchor=\"{anchor}\">{s}</text>\n")
        };
        svg += &text(MARGIN, HEIGHT - MARGIN + 16.0, "middle", format!("{x0}"));
        svg += &text(WIDTH - MARGIN, HEIGHT - MARGIN + 16.0, "middle", format!("{x1}"));
        svg += &text(MARGIN - 4.0, HEIGHT - MARGIN, "end", format!("1e{y0:.1}"));
        svg += &text(MARGIN - 4.0, MARGIN + 4.0, "end", format!("1e{y1:.1}"));
        svg += &text(WIDTH / 2.0, HEIGHT - 12.0, "middle", x_label.to_string());
        svg += &text(14.0, HEIGHT / 2.0, "middle", format!("log {y_label}"));
    }
    svg += "</svg>\n";
    svg
}
