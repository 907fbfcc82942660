//! Static SVG of drift against time. Presentation only.

use std::fmt::Write;

const W: f64 = 640.0;
const H: f64 = 400.0;
const PAD: f64 = 50.0;
const FLOOR: f64 = 1e-18;
const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

/// One polyline per series of `(t, |J - J0|)`, on a log10 vertical axis.
pub fn drift_svg(series: &[(String, Vec<(f64, f64)>)]) -> String {
    let all = series.iter().flat_map(|(_, p)| p.iter());
    let t_max = all.clone().map(|p| p.0).fold(0.0, f64::max).max(1e-12);
    let logs = all.map(|p| p.1.max(FLOOR).log10());
    let (lo, hi) = logs.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    let (lo, hi) = if lo.is_finite() { (lo.floor(), hi.ceil().max(lo.floor() + 1.0)) } else { (-18.0, 0.0) };
    let px = |t: f64| PAD + t / t_max * (W - 2.0 * PAD);
    let py = |d: f64| H - PAD - (d.max(FLOOR).log10() - lo) / (hi - lo) * (H - 2.0 * PAD);

    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" font-family="sans-serif" font-size="12">"#);
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let (x0, x1, y0, y1) = (PAD, W - PAD, H - PAD, PAD);
    let _ = writeln!(s, r#"<path d="M{x0},{y1} V{y0} H{x1}" fill="none" stroke="black"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">t</text>"#, W / 2.0, H - 15.0);
    let _ = writeln!(s, r#"<text x="{x1}" y="{}" text-anchor="end">{t_max:.3}</text>"#, y0 + 15.0);
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="end">1e{lo}</text>"#, x0 - 4.0, y0);
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="end">1e{hi}</text>"#, x0 - 4.0, y1 + 4.0);
    for (k, (name, pts)) in series.iter().enumerate() {
        let color = COLORS[k % COLORS.len()];
        let path: Vec<String> = pts.iter().map(|&(t, d)| format!("{:.2},{:.2}", px(t), py(d))).collect();
        let _ = writeln!(s, r#"<polyline fill="none" stroke="{color}" points="{}"/>"#, path.join(" "));
        let _ = writeln!(s, r#"<text x="{}" y="{}" fill="{color}">{name}</text>"#, x1 - 60.0, y1 + 15.0 * (k as f64 + 1.0));
    }
    s.push_str("</svg>\n");
    s
}
