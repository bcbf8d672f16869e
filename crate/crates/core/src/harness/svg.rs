use std::fmt::Write;

pub struct Line<'a> {
    pub name: &'a str,
    pub xs: &'a [f64],
    pub ys: &'a [f64],
    pub dashed: bool,
}

const PALETTE: [&str; 5] = ["#1f77b4", "#222222", "#d62728", "#2ca02c", "#9467bd"];
const W: f64 = 640.0;
const H: f64 = 400.0;
const PAD: f64 = 56.0;

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// A self-contained SVG line chart. Non-finite points are skipped.
pub fn line_chart(title: &str, x_label: &str, lines: &[Line]) -> String {
    let pts = || lines.iter().flat_map(|l| l.xs.iter().zip(l.ys)).filter(|(x, y)| x.is_finite() && y.is_finite());
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for (&x, &y) in pts() {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if !x0.is_finite() {
        (x0, x1, y0, y1) = (0.0, 1.0, 0.0, 1.0);
    }
    if x1 - x0 <= 0.0 {
        x1 = x0 + 1.0;
    }
    if y1 - y0 <= 1e-12 * y0.abs().max(1.0) {
        let pad = 0.5 * y0.abs().max(1.0) * 1e-3;
        (y0, y1) = (y0 - pad, y1 + pad);
    }
    let sx = |x: f64| PAD + (x - x0) / (x1 - x0) * (W - 2.0 * PAD);
    let sy = |y: f64| H - PAD - (y - y0) / (y1 - y0) * (H - 2.0 * PAD);

    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#);
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="20" text-anchor="middle" font-size="14">{}</text>"#, W / 2.0, escape(title));
    let _ = writeln!(
        s,
        r##"<path d="M{PAD} {PAD} V{} H{}" fill="none" stroke="#888"/>"##,
        H - PAD,
        W - PAD
    );
    for (v, anchor, x, y) in [
        (y1, "end", PAD - 6.0, PAD + 4.0),
        (y0, "end", PAD - 6.0, H - PAD + 4.0),
        (x0, "middle", PAD, H - PAD + 18.0),
        (x1, "middle", W - PAD, H - PAD + 18.0),
    ] {
        let _ = writeln!(s, r#"<text x="{x}" y="{y}" text-anchor="{anchor}">{v:.4e}</text>"#);
    }
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, W / 2.0, H - 12.0, escape(x_label));
    for (k, line) in lines.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        let mut d = String::new();
        for (&x, &y) in line.xs.iter().zip(line.ys).filter(|(x, y)| x.is_finite() && y.is_finite()) {
            let _ = write!(d, "{}{:.2} {:.2}", if d.is_empty() { "M" } else { " L" }, sx(x), sy(y));
        }
        let dash = if line.dashed { r#" stroke-dasharray="6 4""# } else { "" };
        let _ = writeln!(s, r#"<path d="{d}" fill="none" stroke="{color}" stroke-width="1.5"{dash}/>"#);
        let ly = PAD + 16.0 * k as f64;
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{ly}" fill="{color}" text-anchor="end">{}</text>"#,
            W - PAD - 4.0,
            escape(line.name)
        );
    }
    s.push_str("</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn renders_lines_and_skips_nan() {
        let xs = [0.0, 1.0, 2.0];
        let svg = line_chart(
            "a < b",
            "t",
            &[
                Line { name: "emp", xs: &xs, ys: &[1.0, 2.0, 3.0], dashed: false },
                Line { name: "pred", xs: &xs, ys: &[1.0, f64::NAN, 3.0], dashed: true },
            ],
        );
        assert!(svg.starts_with("<svg") && svg.ends_with("</svg>\n"));
        assert!(svg.contains("a &lt; b"));
        assert_eq!(svg.matches("<path d=\"M").count(), 3);
        assert!(svg.contains("stroke-dasharray"));
    }

    #[test]
    fn flat_and_empty_series() {
        let flat = line_chart("flat", "t", &[Line { name: "c", xs: &[0.0, 1.0], ys: &[2.0, 2.0], dashed: false }]);
        assert!(!flat.contains("NaN") && !flat.contains("inf"));
        let empty = line_chart("none", "t", &[]);
        assert!(empty.contains("</svg>"));
    }
}
