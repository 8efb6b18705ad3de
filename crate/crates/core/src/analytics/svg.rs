use std::fmt::Write;

use super::ChartSeries;
use crate::taxonomy::Category;

const PALETTE: [&str; 6] = ["#4e79a7", "#f28e2b", "#e15759", "#76b7b2", "#59a14f", "#edc948"];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

/// Grouped bar chart: one cluster per category, one bar per series.
pub fn render_bar_chart(series: &[ChartSeries]) -> String {
    let n_series = series.len().max(1);
    let bar_w = 10.0_f64;
    let cluster_w = bar_w * n_series as f64 + 12.0;
    let left = 50.0;
    let top = 40.0;
    let plot_h = 300.0;
    let width = left + cluster_w * Category::ALL.len() as f64 + 160.0;
    let height = top + plot_h + 140.0;

    let max = series
        .iter()
        .flat_map(|s| s.points.iter().map(|p| p.percentage))
        .fold(0.0_f64, f64::max);
    // round the axis up to the next 10%
    let axis_max = ((max * 10.0).ceil() / 10.0).max(0.1);

    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0}" height="{height:.0}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(
        out,
        r#"<text x="{left}" y="20" font-size="14">Share of inspection comments per category</text>"#
    );

    let steps = (axis_max * 10.0).round() as usize;
    for i in 0..=steps {
        let v = i as f64 / 10.0;
        let y = top + plot_h - v / axis_max * plot_h;
        let _ = writeln!(
            out,
            r##"<line x1="{left}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#ddd"/><text x="{:.0}" y="{:.2}" text-anchor="end">{:.0}%</text>"##,
            width - 150.0,
            left - 4.0,
            y + 4.0,
            v * 100.0
        );
    }

    for (ci, cat) in Category::ALL.iter().enumerate() {
        let x0 = left + ci as f64 * cluster_w + 6.0;
        for (si, s) in series.iter().enumerate() {
            let v = s.value(*cat);
            let h = v / axis_max * plot_h;
            let x = x0 + si as f64 * bar_w;
            let y = top + plot_h - h;
            let _ = writeln!(
                out,
                r#"<rect x="{x:.2}" y="{y:.2}" width="{bar_w:.2}" height="{h:.2}" fill="{}"><title>{}{} {}: {:.2}%</title></rect>"#,
                PALETTE[si % PALETTE.len()],
                s.year,
                escape(&s.group),
                cat.slug(),
                v * 100.0
            );
        }
        let lx = x0 + bar_w * n_series as f64 / 2.0;
        let ly = top + plot_h + 10.0;
        let _ = writeln!(
            out,
            r#"<text x="{lx:.2}" y="{ly:.2}" transform="rotate(60 {lx:.2} {ly:.2})">{}</text>"#,
            cat.slug()
        );
    }

    let legend_x = width - 140.0;
    for (si, s) in series.iter().enumerate() {
        let y = top + si as f64 * 18.0;
        let _ = writeln!(
            out,
            r#"<rect x="{legend_x:.0}" y="{y:.0}" width="12" height="12" fill="{}"/><text x="{:.0}" y="{:.0}">{}{}</text>"#,
            PALETTE[si % PALETTE.len()],
            legend_x + 18.0,
            y + 10.0,
            s.year,
            escape(&s.group)
        );
    }
    out.push_str("</svg>\n");
    out
}
