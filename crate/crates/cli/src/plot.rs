//! Static SVG chart: MMF throughput and Shannon bound against the operating
//! point, one colour per strategy.

use rsma::sim::PointSummary;
use rsma::sysmodel::Strategy;
use std::fmt::Write;

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 480.0;
const MARGIN_L: f64 = 70.0;
const MARGIN_R: f64 = 180.0;
const MARGIN_T: f64 = 40.0;
const MARGIN_B: f64 = 60.0;

fn colour(s: Strategy) -> &'static str {
    match s {
        Strategy::Rsma => "#c0392b",
        Strategy::Sdma => "#2471a3",
    }
}

/// A tick step of 1, 2 or 5 times a power of ten giving about five ticks.
fn tick_step(span: f64) -> f64 {
    let raw = span / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    [1.0, 2.0, 5.0, 10.0].into_iter().map(|m| m * mag).find(|s| *s >= raw).unwrap_or(10.0 * mag)
}

fn ticks(lo: f64, hi: f64) -> Vec<f64> {
    let step = tick_step(hi - lo);
    let first = (lo / step).ceil() as i64;
    let last = (hi / step + 1e-9).floor() as i64;
    (first..=last).map(|i| i as f64 * step).collect()
}

pub fn render(title: &str, axis_label: &str, rows: &[PointSummary]) -> String {
    let valid: Vec<&PointSummary> = rows.iter().filter(|r| r.status == "ok").collect();
    let (mut x0, mut x1) = valid
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), r| (a.min(r.point), b.max(r.point)));
    if !x0.is_finite() {
        (x0, x1) = (0.0, 1.0);
    }
    if x1 <= x0 {
        x1 = x0 + 1.0;
    }
    let ymax = valid
        .iter()
        .map(|r| r.shannon_bound.max(r.mmf_throughput))
        .fold(0.0, f64::max);
    let y1 = if ymax > 0.0 { ymax * 1.1 } else { 1.0 };

    let pw = WIDTH - MARGIN_L - MARGIN_R;
    let ph = HEIGHT - MARGIN_T - MARGIN_B;
    let sx = |x: f64| MARGIN_L + (x - x0) / (x1 - x0) * pw;
    let sy = |y: f64| MARGIN_T + ph - y / y1 * ph;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="24" text-anchor="middle" font-size="15">{}</text>"#, MARGIN_L + pw / 2.0, escape(title));

    for x in ticks(x0, x1) {
        let px = sx(x);
        let _ = writeln!(s, r##"<line x1="{px:.2}" y1="{MARGIN_T}" x2="{px:.2}" y2="{:.2}" stroke="#e5e5e5"/>"##, MARGIN_T + ph);
        let _ = writeln!(s, r#"<text x="{px:.2}" y="{:.2}" text-anchor="middle">{x}</text>"#, MARGIN_T + ph + 18.0);
    }
    for y in ticks(0.0, y1) {
        let py = sy(y);
        let _ = writeln!(s, r##"<line x1="{MARGIN_L}" y1="{py:.2}" x2="{:.2}" y2="{py:.2}" stroke="#e5e5e5"/>"##, MARGIN_L + pw);
        let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#, MARGIN_L - 8.0, py + 4.0, fmt_tick(y));
    }
    let _ = writeln!(s, r#"<rect x="{MARGIN_L}" y="{MARGIN_T}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#);
    let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#, MARGIN_L + pw / 2.0, HEIGHT - 16.0, escape(axis_label));
    let _ = writeln!(
        s,
        r#"<text transform="translate(20 {:.2}) rotate(-90)" text-anchor="middle">MMF rate [bps/Hz]</text>"#,
        MARGIN_T + ph / 2.0
    );

    let mut legend = 0;
    for strategy in [Strategy::Rsma, Strategy::Sdma] {
        let mut pts: Vec<&PointSummary> = valid.iter().copied().filter(|r| r.strategy == strategy).collect();
        if pts.is_empty() {
            continue;
        }
        pts.sort_by(|a, b| a.point.total_cmp(&b.point));
        let c = colour(strategy);
        let name = strategy.name().to_uppercase();
        for (dashed, label, value) in [
            (false, "throughput", (|r: &PointSummary| r.mmf_throughput) as fn(&PointSummary) -> f64),
            (true, "Shannon bound", |r: &PointSummary| r.shannon_bound),
        ] {
            let path: Vec<String> = pts.iter().map(|r| format!("{:.2},{:.2}", sx(r.point), sy(value(r)))).collect();
            let dash = if dashed { r#" stroke-dasharray="6 4""# } else { "" };
            let _ = writeln!(s, r#"<polyline points="{}" fill="none" stroke="{c}" stroke-width="2"{dash}/>"#, path.join(" "));
            if !dashed {
                for r in &pts {
                    let _ = writeln!(s, r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="{c}"/>"#, sx(r.point), sy(value(r)));
                }
            }
            let ly = MARGIN_T + 10.0 + legend as f64 * 20.0;
            let lx = MARGIN_L + pw + 15.0;
            let _ = writeln!(s, r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{c}" stroke-width="2"{dash}/>"#, lx + 25.0);
            let _ = writeln!(s, r#"<text x="{}" y="{}">{name} {label}</text>"#, lx + 32.0, ly + 4.0);
            legend += 1;
        }
    }
    s.push_str("</svg>\n");
    s
}

fn fmt_tick(y: f64) -> String {
    let r = (y * 1e6).round() / 1e6;
    format!("{r}")
}

fn escape(t: &str) -> String {
    t.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ticks_are_round() {
        assert_eq!(ticks(0.0, 40.0), vec![0.0, 10.0, 20.0, 30.0, 40.0]);
        assert_eq!(tick_step(4.4), 1.0);
        assert_eq!(tick_step(0.9), 0.2);
    }

    #[test]
    fn empty_input_still_renders() {
        let svg = render("t", "x", &[]);
        assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
    }
}
