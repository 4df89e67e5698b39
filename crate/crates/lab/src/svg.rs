//! Grouped bar charts as standalone SVG built from rect, line and text elements.
//!
//! Coordinates are printed with two decimals, so identical input gives
//! identical bytes.

use std::fmt::Write as _;
use std::path::Path;

use advcausal_core::Error;

use crate::error::{self, LabResult};

const PALETTE: [&str; 6] = ["#4c72b0", "#dd8452", "#55a868", "#c44e52", "#8172b3", "#937860"];
const BAR_W: f64 = 14.0;
const GROUP_GAP: f64 = 18.0;
const LEFT: f64 = 60.0;
const TOP: f64 = 40.0;
const PLOT_H: f64 = 220.0;
const LEGEND_ROW: f64 = 18.0;

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub name: String,
    /// One value in `[0, 1]` per group label.
    pub values: Vec<f64>,
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn contract(msg: String) -> crate::error::LabError {
    Error::Contract(msg).into()
}

/// Renders one bar per (group, series), grouped by label.
pub fn render_grouped_bars(title: &str, y_label: &str, series: &[Series], labels: &[String]) -> LabResult<String> {
    if series.is_empty() || labels.is_empty() {
        return Err(contract("plot needs at least one series and one label".into()));
    }
    for s in series {
        if s.values.len() != labels.len() {
            return Err(contract(format!(
                "series '{}' has {} values for {} labels",
                s.name,
                s.values.len(),
                labels.len()
            )));
        }
        if let Some(v) = s.values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(contract(format!("series '{}' has value {v} outside [0, 1]", s.name)));
        }
    }
    let group_w = series.len() as f64 * BAR_W + GROUP_GAP;
    let plot_w = labels.len() as f64 * group_w;
    let width = LEFT + plot_w + 20.0;
    let base = TOP + PLOT_H;
    let height = base + 40.0 + series.len() as f64 * LEGEND_ROW + 10.0;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width:.2}" height="{height:.2}" viewBox="0 0 {width:.2} {height:.2}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(s, r#"<rect x="0" y="0" width="{width:.2}" height="{height:.2}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="20.00" text-anchor="middle" font-size="14">{}</text>"#,
        width / 2.0,
        escape(title)
    );
    let _ = writeln!(
        s,
        r#"<text x="14.00" y="{:.2}" text-anchor="middle" transform="rotate(-90 14.00 {:.2})">{}</text>"#,
        TOP + PLOT_H / 2.0,
        TOP + PLOT_H / 2.0,
        escape(y_label)
    );
    for i in 0..=4 {
        let v = f64::from(i) / 4.0;
        let y = base - v * PLOT_H;
        let _ = writeln!(
            s,
            r##"<line x1="{LEFT:.2}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#dddddd"/>"##,
            LEFT + plot_w
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{v:.2}</text>"#,
            LEFT - 6.0,
            y + 4.0
        );
    }
    let _ = writeln!(s, r#"<line x1="{LEFT:.2}" y1="{TOP:.2}" x2="{LEFT:.2}" y2="{base:.2}" stroke="black"/>"#);
    let _ = writeln!(
        s,
        r#"<line x1="{LEFT:.2}" y1="{base:.2}" x2="{:.2}" y2="{base:.2}" stroke="black"/>"#,
        LEFT + plot_w
    );
    for (g, label) in labels.iter().enumerate() {
        let gx = LEFT + g as f64 * group_w + GROUP_GAP / 2.0;
        for (k, ser) in series.iter().enumerate() {
            let h = ser.values[g] * PLOT_H;
            let _ = writeln!(
                s,
                r#"<rect class="bar" x="{:.2}" y="{:.2}" width="{BAR_W:.2}" height="{h:.2}" fill="{}"><title>{} {}: {:.4}</title></rect>"#,
                gx + k as f64 * BAR_W,
                base - h,
                PALETTE[k % PALETTE.len()],
                escape(&ser.name),
                escape(label),
                ser.values[g]
            );
        }
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            gx + series.len() as f64 * BAR_W / 2.0,
            base + 16.0,
            escape(label)
        );
    }
    for (k, ser) in series.iter().enumerate() {
        let y = base + 34.0 + k as f64 * LEGEND_ROW;
        let _ = writeln!(
            s,
            r#"<rect class="swatch" x="{LEFT:.2}" y="{:.2}" width="12.00" height="12.00" fill="{}"/>"#,
            y - 10.0,
            PALETTE[k % PALETTE.len()]
        );
        let _ = writeln!(s, r#"<text x="{:.2}" y="{y:.2}">{}</text>"#, LEFT + 18.0, escape(&ser.name));
    }
    s.push_str("</svg>\n");
    Ok(s)
}

pub fn emit_plot_svg(title: &str, y_label: &str, series: &[Series], labels: &[String], path: &Path) -> LabResult<()> {
    let svg = render_grouped_bars(title, y_label, series, labels)?;
    error::write(path, svg.as_bytes())
}
