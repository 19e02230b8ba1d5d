//! Minimal hand-rolled SVG line/scatter charts — no styling ambitions,
//! just legible axes, error bars and a legend.

use std::fmt::Write;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const MARGIN_L: f64 = 64.0;
const MARGIN_R: f64 = 24.0;
const MARGIN_T: f64 = 40.0;
const MARGIN_B: f64 = 48.0;

const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
    /// Connect points with a polyline (otherwise markers only).
    pub line: bool,
    /// Optional symmetric error bar half-heights, one per point.
    pub error: Option<Vec<f64>>,
}

pub fn render_chart(title: &str, x_label: &str, y_label: &str, series: &[Series]) -> String {
    let mut xs: Vec<f64> = Vec::new();
    let mut ys: Vec<f64> = Vec::new();
    for s in series {
        for (i, (x, y)) in s.points.iter().enumerate() {
            let e = s.error.as_ref().map(|e| e[i]).unwrap_or(0.0);
            xs.push(*x);
            ys.push(y - e);
            ys.push(y + e);
        }
    }
    let (x0, x1) = padded_range(&xs);
    let (y0, y1) = padded_range(&ys);
    let px = |x: f64| MARGIN_L + (x - x0) / (x1 - x0) * (WIDTH - MARGIN_L - MARGIN_R);
    let py = |y: f64| HEIGHT - MARGIN_B - (y - y0) / (y1 - y0) * (HEIGHT - MARGIN_T - MARGIN_B);

    let mut out = String::new();
    write!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    )
    .unwrap();
    out.push_str(r#"<rect width="100%" height="100%" fill="white"/>"#);
    write!(
        out,
        r#"<text x="{}" y="24" font-size="15" text-anchor="middle" font-family="sans-serif">{}</text>"#,
        WIDTH / 2.0,
        escape(title)
    )
    .unwrap();

    // axes
    write!(
        out,
        r#"<line x1="{l}" y1="{b}" x2="{r}" y2="{b}" stroke="black"/><line x1="{l}" y1="{t}" x2="{l}" y2="{b}" stroke="black"/>"#,
        l = MARGIN_L,
        r = WIDTH - MARGIN_R,
        t = MARGIN_T,
        b = HEIGHT - MARGIN_B
    )
    .unwrap();
    for k in 0..=4 {
        let fx = x0 + (x1 - x0) * k as f64 / 4.0;
        let fy = y0 + (y1 - y0) * k as f64 / 4.0;
        write!(
            out,
            r#"<text x="{}" y="{}" font-size="11" text-anchor="middle" font-family="sans-serif">{}</text>"#,
            px(fx),
            HEIGHT - MARGIN_B + 18.0,
            tick(fx)
        )
        .unwrap();
        write!(
            out,
            r#"<text x="{}" y="{}" font-size="11" text-anchor="end" font-family="sans-serif">{}</text>"#,
            MARGIN_L - 6.0,
            py(fy) + 4.0,
            tick(fy)
        )
        .unwrap();
        write!(
            out,
            r##"<line x1="{l}" y1="{y}" x2="{r}" y2="{y}" stroke="#dddddd"/>"##,
            l = MARGIN_L,
            r = WIDTH - MARGIN_R,
            y = py(fy)
        )
        .unwrap();
    }
    write!(
        out,
        r#"<text x="{}" y="{}" font-size="12" text-anchor="middle" font-family="sans-serif">{}</text>"#,
        WIDTH / 2.0,
        HEIGHT - 10.0,
        escape(x_label)
    )
    .unwrap();
    write!(
        out,
        r#"<text x="14" y="{}" font-size="12" text-anchor="middle" font-family="sans-serif" transform="rotate(-90 14 {})">{}</text>"#,
        HEIGHT / 2.0,
        HEIGHT / 2.0,
        escape(y_label)
    )
    .unwrap();

    for (si, s) in series.iter().enumerate() {
        let color = PALETTE[si % PALETTE.len()];
        if s.line && s.points.len() > 1 {
            let path: Vec<String> = s
                .points
                .iter()
                .map(|(x, y)| format!("{:.2},{:.2}", px(*x), py(*y)))
                .collect();
            write!(
                out,
                r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
                path.join(" ")
            )
            .unwrap();
        }
        for (i, (x, y)) in s.points.iter().enumerate() {
            if let Some(err) = &s.error {
                if err[i] > 0.0 {
                    write!(
                        out,
                        r#"<line x1="{x0}" y1="{ylo}" x2="{x0}" y2="{yhi}" stroke="{color}"/>"#,
                        x0 = px(*x),
                        ylo = py(y - err[i]),
                        yhi = py(y + err[i]),
                    )
                    .unwrap();
                }
            }
            if !s.line || s.error.is_some() || s.points.len() < 2 {
                write!(
                    out,
                    r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="{color}"/>"#,
                    px(*x),
                    py(*y)
                )
                .unwrap();
            }
        }
        // legend entry
        let ly = MARGIN_T + 16.0 * si as f64;
        write!(
            out,
            r#"<rect x="{}" y="{}" width="10" height="10" fill="{color}"/><text x="{}" y="{}" font-size="11" font-family="sans-serif">{}</text>"#,
            WIDTH - MARGIN_R - 150.0,
            ly,
            WIDTH - MARGIN_R - 136.0,
            ly + 9.0,
            escape(&s.label)
        )
        .unwrap();
    }
    out.push_str("</svg>\n");
    out
}

fn padded_range(vals: &[f64]) -> (f64, f64) {
    let lo = vals.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !lo.is_finite() || !hi.is_finite() {
        return (0.0, 1.0);
    }
    let span = (hi - lo).max(1e-12);
    (lo - 0.05 * span, hi + 0.05 * span)
}

fn tick(v: f64) -> String {
    if v == 0.0 {
        "0".into()
    } else if v.abs() >= 1000.0 || v.abs() < 0.01 {
        format!("{v:.2e}")
    } else {
        format!("{v:.3}")
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn renders_wellformed_svg() {
        let svg = render_chart(
            "fit",
            "z",
            "P",
            &[
                Series {
                    label: "limit".into(),
                    points: vec![(0.0, 0.1), (1.0, 0.5), (2.0, 0.8)],
                    line: true,
                    error: None,
                },
                Series {
                    label: "empirical".into(),
                    points: vec![(0.0, 0.12), (1.0, 0.48)],
                    line: false,
                    error: Some(vec![0.02, 0.02]),
                },
            ],
        );
        assert!(svg.starts_with("<svg"));
        assert!(svg.ends_with("</svg>\n"));
        assert!(svg.contains("polyline"));
        assert!(svg.contains("circle"));
        assert_eq!(svg.matches('<').count(), svg.matches('>').count());
    }

    #[test]
    fn degenerate_input_does_not_panic() {
        let svg = render_chart("empty", "x", "y", &[]);
        assert!(svg.contains("</svg>"));
        let one = render_chart(
            "one",
            "x",
            "y",
            &[Series { label: "p".into(), points: vec![(1.0, 1.0)], line: true, error: None }],
        );
        assert!(one.contains("circle"));
    }
}
