//! Minimal hand-rolled SVG line charts (polylines plus axes); enough for
//! eyeballing forecasts and decompositions without a plotting dependency.

const PALETTE: [&str; 5] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e"];

pub struct Panel<'a> {
    pub title: &'a str,
    /// `(label, points)` per line; x values need not be shared.
    pub series: Vec<(&'a str, Vec<(f64, f64)>)>,
}

fn fmt_tick(v: f64) -> String {
    if v.abs() >= 1000.0 {
        format!("{v:.0}")
    } else {
        format!("{v:.2}")
    }
}

/// Renders stacked panels into one standalone SVG document.
pub fn render(panels: &[Panel], width: usize, panel_height: usize) -> String {
    let mut out = String::new();
    let total_height = panel_height * panels.len();
    out.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width}\" height=\"{total_height}\" \
         viewBox=\"0 0 {width} {total_height}\">\n\
         <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
    ));

    let (left, right, top, bottom) = (60.0, 15.0, 28.0, 24.0);
    for (idx, panel) in panels.iter().enumerate() {
        let y0 = (idx * panel_height) as f64;
        let plot_w = width as f64 - left - right;
        let plot_h = panel_height as f64 - top - bottom;

        let all: Vec<(f64, f64)> = panel
            .series
            .iter()
            .flat_map(|(_, p)| p.iter().copied())
            .collect();
        if all.is_empty() {
            continue;
        }
        let (mut x_min, mut x_max) = (f64::MAX, f64::MIN);
        let (mut y_min, mut y_max) = (f64::MAX, f64::MIN);
        for (x, y) in &all {
            x_min = x_min.min(*x);
            x_max = x_max.max(*x);
            y_min = y_min.min(*y);
            y_max = y_max.max(*y);
        }
        if x_max == x_min {
            x_max += 1.0;
        }
        if y_max == y_min {
            y_max += 1.0;
            y_min -= 1.0;
        }
        let sx = |x: f64| left + (x - x_min) / (x_max - x_min) * plot_w;
        let sy = |y: f64| y0 + top + plot_h - (y - y_min) / (y_max - y_min) * plot_h;

        out.push_str(&format!(
            "<text x=\"{left}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"13\" \
             font-weight=\"bold\">{}</text>\n",
            y0 + 16.0,
            panel.title
        ));
        // frame and horizontal gridlines with value labels
        out.push_str(&format!(
            "<rect x=\"{left}\" y=\"{}\" width=\"{plot_w}\" height=\"{plot_h}\" fill=\"none\" \
             stroke=\"#999\"/>\n",
            y0 + top
        ));
        for k in 0..=4 {
            let v = y_min + (y_max - y_min) * f64::from(k) / 4.0;
            let yy = sy(v);
            out.push_str(&format!(
                "<line x1=\"{left}\" y1=\"{yy:.1}\" x2=\"{:.1}\" y2=\"{yy:.1}\" stroke=\"#ddd\"/>\n\
                 <text x=\"{:.1}\" y=\"{:.1}\" font-family=\"sans-serif\" font-size=\"10\" \
                 text-anchor=\"end\">{}</text>\n",
                left + plot_w,
                left - 4.0,
                yy + 3.0,
                fmt_tick(v)
            ));
        }

        for (s, (label, points)) in panel.series.iter().enumerate() {
            let color = PALETTE[s % PALETTE.len()];
            let path: Vec<String> = points
                .iter()
                .map(|(x, y)| format!("{:.1},{:.1}", sx(*x), sy(*y)))
                .collect();
            out.push_str(&format!(
                "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\" points=\"{}\"/>\n",
                path.join(" ")
            ));
            out.push_str(&format!(
                "<text x=\"{:.1}\" y=\"{:.1}\" font-family=\"sans-serif\" font-size=\"11\" \
                 fill=\"{color}\">{label}</text>\n",
                left + plot_w - 150.0 + (s % 2) as f64 * 75.0,
                y0 + 16.0 + (s / 2) as f64 * 12.0,
            ));
        }
    }
    out.push_str("</svg>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn renders_wellformed_document() {
        let panel = Panel {
            title: "demo",
            series: vec![
                ("a", vec![(0.0, 1.0), (1.0, 2.0), (2.0, 0.5)]),
                ("b", vec![(0.0, 2.0), (2.0, 2.5)]),
            ],
        };
        let svg = render(&[panel], 640, 240);
        assert!(svg.starts_with("<svg"));
        assert!(svg.trim_end().ends_with("</svg>"));
        assert_eq!(svg.matches("<polyline").count(), 2);
    }

    #[test]
    fn constant_series_does_not_divide_by_zero() {
        let panel = Panel {
            title: "flat",
            series: vec![("c", vec![(0.0, 5.0), (1.0, 5.0)])],
        };
        let svg = render(&[panel], 320, 160);
        assert!(!svg.contains("NaN"));
    }
}
