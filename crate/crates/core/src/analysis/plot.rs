use std::fmt::Write;

use super::ViolinStats;

const PANEL_W: f64 = 90.0;
const PLOT_H: f64 = 360.0;
const TOP: f64 = 30.0;
const LEFT: f64 = 60.0;
const BOTTOM: f64 = 70.0;

fn y_of(v: f64) -> f64 {
    TOP + (1.0 - (v + 1.0) / 2.0) * PLOT_H
}

/// Static SVG: one mirrored density silhouette per group with an IQR bar and
/// a median tick. Sentiment runs vertically over `[-1, 1]`.
pub fn render_svg(groups: &[ViolinStats], title: &str) -> String {
    let width = LEFT + PANEL_W * groups.len().max(1) as f64 + 20.0;
    let height = TOP + PLOT_H + BOTTOM;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0}" height="{height:.0}" viewBox="0 0 {width:.0} {height:.0}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="18" text-anchor="middle" font-size="14">{}</text>"#,
        width / 2.0,
        escape(title)
    );
    for tick in [-1.0, -0.5, 0.0, 0.5, 1.0] {
        let y = y_of(tick);
        let _ = writeln!(
            s,
            r##"<line x1="{LEFT}" x2="{:.1}" y1="{y:.2}" y2="{y:.2}" stroke="#ddd"/><text x="{:.1}" y="{:.2}" text-anchor="end">{tick:.1}</text>"##,
            width - 20.0,
            LEFT - 6.0,
            y + 4.0
        );
    }
    let peak = groups
        .iter()
        .flat_map(|g| g.density_grid.iter().map(|p| p.1))
        .fold(0.0_f64, f64::max);
    let half = PANEL_W * 0.42;
    for (i, g) in groups.iter().enumerate() {
        let cx = LEFT + PANEL_W * (i as f64 + 0.5);
        if peak > 0.0 && !g.density_grid.is_empty() {
            let mut pts: Vec<String> = g
                .density_grid
                .iter()
                .map(|(x, d)| format!("{:.2},{:.2}", cx + d / peak * half, y_of(*x)))
                .collect();
            pts.extend(
                g.density_grid
                    .iter()
                    .rev()
                    .map(|(x, d)| format!("{:.2},{:.2}", cx - d / peak * half, y_of(*x))),
            );
            let _ = writeln!(
                s,
                r##"<polygon points="{}" fill="#8fb3d9" stroke="#3b6ea5" stroke-width="1"/>"##,
                pts.join(" ")
            );
        }
        if let (Some(q1), Some(q3), Some(med)) = (g.q1, g.q3, g.median) {
            let _ = writeln!(
                s,
                r##"<rect x="{:.2}" y="{:.2}" width="6" height="{:.2}" fill="#222"/>"##,
                cx - 3.0,
                y_of(q3),
                (y_of(q1) - y_of(q3)).max(0.5)
            );
            let _ = writeln!(
                s,
                r##"<line x1="{:.2}" x2="{:.2}" y1="{:.2}" y2="{:.2}" stroke="white" stroke-width="2"/>"##,
                cx - 5.0,
                cx + 5.0,
                y_of(med),
                y_of(med)
            );
        }
        let _ = writeln!(
            s,
            r#"<text x="{cx:.1}" y="{:.1}" text-anchor="end" transform="rotate(-35 {cx:.1} {:.1})">{} (n={})</text>"#,
            TOP + PLOT_H + 16.0,
            TOP + PLOT_H + 16.0,
            escape(&g.group),
            g.n
        );
    }
    s.push_str("</svg>\n");
    s
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::violin_for;

    #[test]
    fn one_polygon_per_nonempty_group() {
        let groups = [
            violin_for("A", &[0.1, 0.2], 16).unwrap(),
            violin_for("B & C", &[], 16).unwrap(),
        ];
        let svg = render_svg(&groups, "t");
        assert_eq!(svg.matches("<polygon").count(), 1);
        assert!(svg.contains("B &amp; C (n=0)"));
        assert!(svg.trim_end().ends_with("</svg>"));
    }
}
