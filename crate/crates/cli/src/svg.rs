//! Minimal SVG rendering: stacked line panels and a region-map raster.

use std::fmt::Write;

use sisnet::equilibria::{RegionCell, RegionClass};

const WIDTH: f64 = 640.0;
const PANEL: f64 = 220.0;
const MARGIN: f64 = 50.0;

/// One panel per series, sharing the horizontal axis.
pub fn line_panels(title: &str, panels: &[(&str, Vec<(f64, f64)>)]) -> String {
    let height = MARGIN + panels.len() as f64 * (PANEL + MARGIN);
    let mut s = header(WIDTH + 2.0 * MARGIN, height);
    let _ = writeln!(s, r#"<text x="{}" y="24" font-size="16" text-anchor="middle">{}</text>"#, (WIDTH + 2.0 * MARGIN) / 2.0, escape(title));
    for (k, (label, points)) in panels.iter().enumerate() {
        let top = MARGIN + k as f64 * (PANEL + MARGIN);
        let (x0, x1) = range(points.iter().map(|p| p.0));
        let (y0, y1) = range(points.iter().map(|p| p.1));
        let px = |x: f64| MARGIN + (x - x0) / (x1 - x0) * WIDTH;
        let py = |y: f64| top + PANEL - (y - y0) / (y1 - y0) * PANEL;
        let _ = writeln!(s, r##"<rect x="{MARGIN}" y="{top}" width="{WIDTH}" height="{PANEL}" fill="none" stroke="#888"/>"##);
        let _ = writeln!(s, r#"<text x="{}" y="{}" font-size="12">{}</text>"#, MARGIN + 6.0, top + 14.0, escape(label));
        for (v, y) in [(y1, top + 4.0), (y0, top + PANEL)] {
            let _ = writeln!(s, r#"<text x="{}" y="{y}" font-size="10" text-anchor="end">{}</text>"#, MARGIN - 4.0, tick(v));
        }
        for (v, x) in [(x0, MARGIN), (x1, MARGIN + WIDTH)] {
            let _ = writeln!(s, r#"<text x="{x}" y="{}" font-size="10" text-anchor="middle">{}</text>"#, top + PANEL + 14.0, tick(v));
        }
        let path: Vec<String> = points.iter().map(|&(x, y)| format!("{:.2},{:.2}", px(x), py(y))).collect();
        let _ = writeln!(s, r##"<polyline fill="none" stroke="#1f5fa8" stroke-width="1.5" points="{}"/>"##, path.join(" "));
    }
    s.push_str("</svg>\n");
    s
}

/// Cells coloured by regime on a `u1` (linear) by `u2` (grid index) raster.
pub fn region_map(cells: &[RegionCell]) -> String {
    let mut u1: Vec<f64> = cells.iter().map(|c| c.u1).collect();
    let mut u2: Vec<f64> = cells.iter().map(|c| c.u2).collect();
    for v in [&mut u1, &mut u2] {
        v.sort_by(f64::total_cmp);
        v.dedup();
    }
    let (cw, ch) = (WIDTH / u1.len().max(1) as f64, WIDTH / u2.len().max(1) as f64);
    let mut s = header(WIDTH + 2.0 * MARGIN, WIDTH + 2.0 * MARGIN);
    for c in cells {
        let i = u1.partition_point(|&v| v < c.u1) as f64;
        let j = u2.partition_point(|&v| v < c.u2) as f64;
        let fill = match c.class {
            RegionClass::EndemicStable => "#e8a33d",
            RegionClass::Oscillatory => "#b23a48",
            RegionClass::DiseaseFreeStable => "#4f9d69",
        };
        let _ = writeln!(
            s,
            r#"<rect x="{:.2}" y="{:.2}" width="{cw:.2}" height="{ch:.2}" fill="{fill}"><title>u1={} u2={} {}</title></rect>"#,
            MARGIN + i * cw,
            MARGIN + WIDTH - (j + 1.0) * ch,
            c.u1,
            c.u2,
            c.class
        );
    }
    let _ = writeln!(s, r#"<text x="{}" y="{}" font-size="12" text-anchor="middle">u1</text>"#, MARGIN + WIDTH / 2.0, MARGIN + WIDTH + 20.0);
    let _ = writeln!(s, r#"<text x="14" y="{}" font-size="12">u2</text>"#, MARGIN + WIDTH / 2.0);
    s.push_str("</svg>\n");
    s
}

fn header(w: f64, h: f64) -> String {
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\" font-family=\"sans-serif\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
    )
}

fn range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if !lo.is_finite() {
        (0.0, 1.0)
    } else if hi - lo <= f64::EPSILON * lo.abs().max(1.0) {
        (lo - 0.5, hi + 0.5)
    } else {
        (lo, hi)
    }
}

fn tick(v: f64) -> String {
    if v != 0.0 && (v.abs() < 1e-2 || v.abs() >= 1e4) {
        format!("{v:.2e}")
    } else {
        format!("{:.3}", v).trim_end_matches('0').trim_end_matches('.').to_string()
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn panels_contain_one_polyline_each() {
        let svg = line_panels("run", &[("I", vec![(0.0, 1.0), (1.0, 2.0)]), ("n", vec![(0.0, 10.0), (1.0, 10.0)])]);
        assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
        assert_eq!(svg.matches("<polyline").count(), 2);
        assert!(!svg.contains("NaN"));
    }

    #[test]
    fn region_cells_become_rects() {
        let cells = [
            RegionCell { u1: 0.0, u2: 0.1, class: RegionClass::Oscillatory },
            RegionCell { u1: 1.0, u2: 0.1, class: RegionClass::EndemicStable },
        ];
        assert_eq!(region_map(&cells).matches("<title>").count(), 2);
    }

    #[test]
    fn ticks() {
        assert_eq!(tick(10.0), "10");
        assert_eq!(tick(0.25), "0.25");
        assert_eq!(tick(1e-4), "1.00e-4");
    }
}
