use std::fmt::Write as _;

use super::Report;

const PANEL: f64 = 320.0;
const MARGIN: f64 = 50.0;
const COLORS: [&str; 6] = ["#d62728", "#1f77b4", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

/// Two ROC panels: the full unit square and the low-FPR corner `[0, 0.35]`.
pub fn render_svg(report: &Report) -> String {
    let width = 2.0 * (PANEL + 2.0 * MARGIN);
    let legend = 20.0 * report.rows.len() as f64;
    let height = PANEL + 2.0 * MARGIN + legend;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    panel(&mut s, report, MARGIN, 1.0, "ROC");
    panel(&mut s, report, 3.0 * MARGIN + PANEL, 0.35, "ROC, FPR in [0, 0.35]");
    for (i, r) in report.rows.iter().enumerate() {
        let y = 2.0 * MARGIN + PANEL + 20.0 * i as f64;
        let c = COLORS[i % COLORS.len()];
        let _ = writeln!(
            s,
            r#"<line x1="{MARGIN}" y1="{y}" x2="{}" y2="{y}" stroke="{c}" stroke-width="2"/><text x="{}" y="{}">{} (AUC {:.3}, TPR@{} {:.3})</text>"#,
            MARGIN + 24.0,
            MARGIN + 30.0,
            y + 4.0,
            r.method,
            r.auc,
            report.fpr_target,
            r.tpr
        );
    }
    s.push_str("</svg>\n");
    s
}

fn panel(s: &mut String, report: &Report, x0: f64, range: f64, title: &str) {
    let y0 = MARGIN;
    let px = |f: f64| x0 + f / range * PANEL;
    let py = |t: f64| y0 + (1.0 - t / range) * PANEL;
    let _ = writeln!(
        s,
        r#"<rect x="{x0}" y="{y0}" width="{PANEL}" height="{PANEL}" fill="none" stroke="black"/>"#
    );
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle" font-size="14">{title}</text>"#,
        x0 + PANEL / 2.0,
        y0 - 12.0
    );
    for k in 0..=5 {
        let v = range * k as f64 / 5.0;
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" text-anchor="middle">{v:.2}</text><text x="{}" y="{}" text-anchor="end">{v:.2}</text>"#,
            px(v),
            y0 + PANEL + 16.0,
            x0 - 6.0,
            py(v) + 4.0
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle">false positive rate</text>"#,
        x0 + PANEL / 2.0,
        y0 + PANEL + 34.0
    );
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle" transform="rotate(-90 {} {})">true positive rate</text>"#,
        x0 - 36.0,
        y0 + PANEL / 2.0,
        x0 - 36.0,
        y0 + PANEL / 2.0
    );
    let _ = writeln!(
        s,
        r##"<line x1="{}" y1="{}" x2="{}" y2="{}" stroke="#bbbbbb" stroke-dasharray="4 3"/>"##,
        px(0.0),
        py(0.0),
        px(range),
        py(range)
    );
    let _ = writeln!(
        s,
        r#"<clipPath id="clip{range}"><rect x="{x0}" y="{y0}" width="{PANEL}" height="{PANEL}"/></clipPath>"#
    );
    for (i, curve) in report.curves.iter().enumerate() {
        let pts: Vec<String> = curve
            .points
            .iter()
            .map(|p| format!("{:.2},{:.2}", px(p.fpr), py(p.tpr)))
            .collect();
        let _ = writeln!(
            s,
            r#"<polyline clip-path="url(#clip{range})" fill="none" stroke="{}" stroke-width="2" points="{}"/>"#,
            COLORS[i % COLORS.len()],
            pts.join(" ")
        );
    }
}
