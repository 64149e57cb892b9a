//! Minimal hand-rolled vector-graphics plotting: line charts with axes
//! labeled in both physical units and rate-normalized units.

/// One axis: physical label plus a normalized twin label on the opposite
/// side, related by `value / norm`.
pub struct Axis {
    pub label: String,
    pub norm_label: String,
    pub norm: f64,
    pub log: bool,
}

impl Axis {
    pub fn new(label: &str, norm_label: &str, norm: f64, log: bool) -> Axis {
        Axis { label: label.into(), norm_label: norm_label.into(), norm, log }
    }
}

pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
    pub dashed: bool,
}

const WIDTH: f64 = 820.0;
const HEIGHT: f64 = 540.0;
const MARGIN_L: f64 = 78.0;
const MARGIN_R: f64 = 78.0;
const MARGIN_T: f64 = 56.0;
const MARGIN_B: f64 = 64.0;
const PALETTE: [&str; 5] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e"];

fn fmt_tick(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    let a = v.abs();
    if a >= 1e4 || a < 1e-3 {
        format!("{v:.1e}")
    } else if a >= 100.0 {
        format!("{v:.0}")
    } else if a >= 1.0 {
        format!("{v:.2}")
    } else {
        format!("{v:.4}")
    }
}

struct Scale {
    lo: f64,
    hi: f64,
    log: bool,
    pix_lo: f64,
    pix_hi: f64,
}

impl Scale {
    fn map(&self, v: f64) -> Option<f64> {
        let t = if self.log {
            if v <= 0.0 {
                return None;
            }
            (v.ln() - self.lo) / (self.hi - self.lo)
        } else {
            (v - self.lo) / (self.hi - self.lo)
        };
        Some(self.pix_lo + t * (self.pix_hi - self.pix_lo))
    }

    fn ticks(&self) -> Vec<f64> {
        if self.log {
            let d0 = (self.lo / std::f64::consts::LN_10).ceil() as i32;
            let d1 = (self.hi / std::f64::consts::LN_10).floor() as i32;
            if d1 >= d0 {
                return (d0..=d1).map(|d| 10f64.powi(d)).collect();
            }
            // Less than one decade: fall back to endpoints.
            return vec![self.lo.exp(), self.hi.exp()];
        }
        let span = self.hi - self.lo;
        let raw = span / 5.0;
        let mag = 10f64.powf(raw.abs().log10().floor());
        let step = [1.0, 2.0, 2.5, 5.0, 10.0]
            .iter()
            .map(|m| m * mag)
            .find(|&s| span / s <= 6.0)
            .unwrap_or(mag * 10.0);
        let first = (self.lo / step).ceil();
        let mut out = Vec::new();
        let mut k = first;
        while k * step <= self.hi + 1e-12 * span {
            out.push(k * step);
            k += 1.0;
        }
        out
    }
}

fn make_scale(values: impl Iterator<Item = f64>, log: bool, pix_lo: f64, pix_hi: f64) -> Scale {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for v in values {
        if !v.is_finite() || (log && v <= 0.0) {
            continue;
        }
        lo = lo.min(v);
        hi = hi.max(v);
    }
    if !lo.is_finite() || !hi.is_finite() {
        lo = if log { 0.1 } else { 0.0 };
        hi = 1.0;
    }
    if log {
        let (mut l, mut h) = (lo.ln(), hi.ln());
        if h - l < 1e-9 {
            l -= 1.0;
            h += 1.0;
        }
        let pad = 0.04 * (h - l);
        Scale { lo: l - pad, hi: h + pad, log, pix_lo, pix_hi }
    } else {
        let mut span = hi - lo;
        if span < 1e-300 {
            span = lo.abs().max(1.0);
            lo -= span / 2.0;
            hi = lo + span;
        }
        let pad = 0.05 * (hi - lo);
        Scale { lo: lo - pad, hi: hi + pad, log, pix_lo, pix_hi }
    }
}

fn esc(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Render a line chart.  The bottom/left axes carry physical units; the
/// top/right axes repeat the same ticks divided by the axis `norm`.
pub fn line_plot(title: &str, x: &Axis, y: &Axis, series: &[Series]) -> String {
    let sx = make_scale(
        series.iter().flat_map(|s| s.points.iter().map(|p| p.0)),
        x.log,
        MARGIN_L,
        WIDTH - MARGIN_R,
    );
    let sy = make_scale(
        series.iter().flat_map(|s| s.points.iter().map(|p| p.1)),
        y.log,
        HEIGHT - MARGIN_B,
        MARGIN_T,
    );
    let mut out = String::with_capacity(16 * 1024);
    out.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" \
         viewBox=\"0 0 {WIDTH} {HEIGHT}\" font-family=\"sans-serif\" font-size=\"12\">\n"
    ));
    out.push_str(&format!(
        "<rect x=\"0\" y=\"0\" width=\"{WIDTH}\" height=\"{HEIGHT}\" fill=\"white\"/>\n"
    ));
    out.push_str(&format!(
        "<text x=\"{}\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">{}</text>\n",
        WIDTH / 2.0,
        esc(title)
    ));
    // Plot frame.
    out.push_str(&format!(
        "<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"#444\"/>\n",
        MARGIN_L,
        MARGIN_T,
        WIDTH - MARGIN_L - MARGIN_R,
        HEIGHT - MARGIN_T - MARGIN_B
    ));
    // X ticks: physical below, normalized above.
    for t in sx.ticks() {
        if let Some(px) = sx.map(t) {
            out.push_str(&format!(
                "<line x1=\"{px:.2}\" y1=\"{}\" x2=\"{px:.2}\" y2=\"{}\" stroke=\"#bbb\" stroke-dasharray=\"2,4\"/>\n",
                MARGIN_T,
                HEIGHT - MARGIN_B
            ));
            out.push_str(&format!(
                "<text x=\"{px:.2}\" y=\"{}\" text-anchor=\"middle\">{}</text>\n",
                HEIGHT - MARGIN_B + 18.0,
                fmt_tick(t)
            ));
            out.push_str(&format!(
                "<text x=\"{px:.2}\" y=\"{}\" text-anchor=\"middle\" fill=\"#555\">{}</text>\n",
                MARGIN_T - 8.0,
                fmt_tick(t / x.norm)
            ));
        }
    }
    // Y ticks: physical left, normalized right.
    for t in sy.ticks() {
        if let Some(py) = sy.map(t) {
            out.push_str(&format!(
                "<line x1=\"{}\" y1=\"{py:.2}\" x2=\"{}\" y2=\"{py:.2}\" stroke=\"#bbb\" stroke-dasharray=\"2,4\"/>\n",
                MARGIN_L,
                WIDTH - MARGIN_R
            ));
            out.push_str(&format!(
                "<text x=\"{}\" y=\"{:.2}\" text-anchor=\"end\">{}</text>\n",
                MARGIN_L - 6.0,
                py + 4.0,
                fmt_tick(t)
            ));
            out.push_str(&format!(
                "<text x=\"{}\" y=\"{:.2}\" text-anchor=\"start\" fill=\"#555\">{}</text>\n",
                WIDTH - MARGIN_R + 6.0,
                py + 4.0,
                fmt_tick(t / y.norm)
            ));
        }
    }
    // Axis labels, physical and normalized.
    out.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{}</text>\n",
        WIDTH / 2.0,
        HEIGHT - 16.0,
        esc(&x.label)
    ));
    out.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\" fill=\"#555\">{}</text>\n",
        WIDTH / 2.0,
        MARGIN_T - 28.0,
        esc(&x.norm_label)
    ));
    out.push_str(&format!(
        "<text x=\"18\" y=\"{}\" text-anchor=\"middle\" transform=\"rotate(-90 18 {})\">{}</text>\n",
        HEIGHT / 2.0,
        HEIGHT / 2.0,
        esc(&y.label)
    ));
    out.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\" fill=\"#555\" transform=\"rotate(90 {} {})\">{}</text>\n",
        WIDTH - 18.0,
        HEIGHT / 2.0,
        WIDTH - 18.0,
        HEIGHT / 2.0,
        esc(&y.norm_label)
    ));
    // Curves.
    for (i, s) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let mut path = String::new();
        for &(px, py) in &s.points {
            if let (Some(mx), Some(my)) = (sx.map(px), sy.map(py)) {
                if path.is_empty() {
                    path.push_str(&format!("M{mx:.2},{my:.2}"));
                } else {
                    path.push_str(&format!(" L{mx:.2},{my:.2}"));
                }
            }
        }
        let dash = if s.dashed { " stroke-dasharray=\"6,4\"" } else { "" };
        out.push_str(&format!(
            "<path d=\"{path}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"1.8\"{dash}/>\n"
        ));
        // Legend entry.
        let ly = MARGIN_T + 16.0 + 18.0 * i as f64;
        let lx = WIDTH - MARGIN_R - 150.0;
        out.push_str(&format!(
            "<line x1=\"{lx}\" y1=\"{ly}\" x2=\"{}\" y2=\"{ly}\" stroke=\"{color}\" stroke-width=\"1.8\"{dash}/>\n",
            lx + 26.0
        ));
        out.push_str(&format!(
            "<text x=\"{}\" y=\"{}\">{}</text>\n",
            lx + 32.0,
            ly + 4.0,
            esc(&s.name)
        ));
    }
    out.push_str("</svg>\n");
    out
}
