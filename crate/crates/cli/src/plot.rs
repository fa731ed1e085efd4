//! Minimal self-contained SVG line plots for truth/prediction overlays and
//! convergence curves. No interactivity, no dependencies.

const WIDTH: f64 = 840.0;
const HEIGHT: f64 = 520.0;
const MARGIN_L: f64 = 80.0;
const MARGIN_R: f64 = 30.0;
const MARGIN_T: f64 = 50.0;
const MARGIN_B: f64 = 60.0;
const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

pub struct Plot {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub log_x: bool,
    /// (legend label, points)
    pub series: Vec<(String, Vec<(f64, f64)>)>,
}

impl Plot {
    pub fn render(&self) -> String {
        let mut xs: Vec<f64> = Vec::new();
        let mut ys: Vec<f64> = Vec::new();
        for (_, pts) in &self.series {
            for &(x, y) in pts {
                let x = if self.log_x { pos_log(x) } else { Some(x) };
                if let Some(x) = x {
                    if x.is_finite() && y.is_finite() {
                        xs.push(x);
                        ys.push(y);
                    }
                }
            }
        }
        let (x_lo, x_hi) = bounds(&xs);
        let (y_lo, y_hi) = pad(bounds(&ys));
        let pw = WIDTH - MARGIN_L - MARGIN_R;
        let ph = HEIGHT - MARGIN_T - MARGIN_B;
        let sx = |x: f64| MARGIN_L + (x - x_lo) / (x_hi - x_lo) * pw;
        let sy = |y: f64| MARGIN_T + ph - (y - y_lo) / (y_hi - y_lo) * ph;

        let mut svg = String::new();
        svg.push_str(&format!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" \
             viewBox=\"0 0 {WIDTH} {HEIGHT}\" font-family=\"sans-serif\">\n"
        ));
        svg.push_str(&format!(
            "<rect width=\"{WIDTH}\" height=\"{HEIGHT}\" fill=\"white\"/>\n"
        ));
        svg.push_str(&format!(
            "<text x=\"{}\" y=\"28\" text-anchor=\"middle\" font-size=\"18\">{}</text>\n",
            WIDTH / 2.0,
            escape(&self.title)
        ));

        // axes
        svg.push_str(&format!(
            "<rect x=\"{MARGIN_L}\" y=\"{MARGIN_T}\" width=\"{pw}\" height=\"{ph}\" \
             fill=\"none\" stroke=\"#444\"/>\n"
        ));
        for i in 0..=5 {
            let fx = x_lo + (x_hi - x_lo) * i as f64 / 5.0;
            let px = sx(fx);
            let label = if self.log_x { format!("{:.2e}", 10f64.powf(fx)) } else { fmt(fx) };
            svg.push_str(&format!(
                "<line x1=\"{px}\" y1=\"{}\" x2=\"{px}\" y2=\"{}\" stroke=\"#444\"/>\n",
                MARGIN_T + ph,
                MARGIN_T + ph + 6.0
            ));
            svg.push_str(&format!(
                "<text x=\"{px}\" y=\"{}\" text-anchor=\"middle\" font-size=\"12\">{label}</text>\n",
                MARGIN_T + ph + 22.0
            ));
            let fy = y_lo + (y_hi - y_lo) * i as f64 / 5.0;
            let py = sy(fy);
            svg.push_str(&format!(
                "<line x1=\"{}\" y1=\"{py}\" x2=\"{MARGIN_L}\" y2=\"{py}\" stroke=\"#444\"/>\n",
                MARGIN_L - 6.0
            ));
            svg.push_str(&format!(
                "<text x=\"{}\" y=\"{}\" text-anchor=\"end\" font-size=\"12\">{}</text>\n",
                MARGIN_L - 10.0,
                py + 4.0,
                fmt(fy)
            ));
        }
        svg.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\" font-size=\"14\">{}</text>\n",
            MARGIN_L + pw / 2.0,
            HEIGHT - 14.0,
            escape(&self.x_label)
        ));
        svg.push_str(&format!(
            "<text x=\"20\" y=\"{}\" text-anchor=\"middle\" font-size=\"14\" \
             transform=\"rotate(-90 20 {})\">{}</text>\n",
            MARGIN_T + ph / 2.0,
            MARGIN_T + ph / 2.0,
            escape(&self.y_label)
        ));

        // series
        for (i, (label, pts)) in self.series.iter().enumerate() {
            let color = PALETTE[i % PALETTE.len()];
            let path: Vec<String> = pts
                .iter()
                .filter_map(|&(x, y)| {
                    let x = if self.log_x { pos_log(x)? } else { x };
                    if x.is_finite() && y.is_finite() {
                        Some(format!("{:.2},{:.2}", sx(x), sy(y)))
                    } else {
                        None
                    }
                })
                .collect();
            if !path.is_empty() {
                svg.push_str(&format!(
                    "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"1.6\" \
                     points=\"{}\"/>\n",
                    path.join(" ")
                ));
            }
            // legend
            let ly = MARGIN_T + 16.0 + 18.0 * i as f64;
            svg.push_str(&format!(
                "<line x1=\"{}\" y1=\"{ly}\" x2=\"{}\" y2=\"{ly}\" stroke=\"{color}\" \
                 stroke-width=\"2\"/>\n",
                WIDTH - 190.0,
                WIDTH - 160.0
            ));
            svg.push_str(&format!(
                "<text x=\"{}\" y=\"{}\" font-size=\"12\">{}</text>\n",
                WIDTH - 152.0,
                ly + 4.0,
                escape(label)
            ));
        }
        svg.push_str("</svg>\n");
        svg
    }
}

fn pos_log(x: f64) -> Option<f64> {
    if x > 0.0 {
        Some(x.log10())
    } else {
        None
    }
}

fn bounds(v: &[f64]) -> (f64, f64) {
    let lo = v.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if lo.is_finite() && hi.is_finite() && hi > lo {
        (lo, hi)
    } else if lo.is_finite() {
        (lo - 1.0, lo + 1.0)
    } else {
        (0.0, 1.0)
    }
}

fn pad((lo, hi): (f64, f64)) -> (f64, f64) {
    let w = hi - lo;
    (lo - 0.05 * w, hi + 0.05 * w)
}

fn fmt(v: f64) -> String {
    if v == 0.0 {
        "0".into()
    } else if v.abs() >= 1e4 || v.abs() < 1e-2 {
        format!("{v:.2e}")
    } else {
        format!("{v:.3}")
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
