//! 2-D heatmap slices of per-cell subspace values, with CSV and SVG export.
//!
//! The first subspace feature runs along the x-axis and the second along the
//! y-axis; one slice is produced for every combination of the remaining
//! features. A one-feature subspace yields a single one-row slice.

use std::fmt::Write;

use crate::subspace::ContextSubspace;

#[derive(Debug, Clone, PartialEq)]
pub struct HeatmapSlice {
    /// Fixed values of the remaining axes, e.g. `sc=1 weather=rain`.
    pub title: String,
    pub x_name: String,
    pub y_name: String,
    pub x_labels: Vec<String>,
    pub y_labels: Vec<String>,
    /// `values[row][col]` with rows along y and columns along x.
    pub values: Vec<Vec<f64>>,
}

impl HeatmapSlice {
    pub fn width(&self) -> usize {
        self.x_labels.len()
    }

    pub fn height(&self) -> usize {
        self.y_labels.len()
    }

    /// Header row of x labels, then one row per y label.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        let corner = format!("{}\\{}", self.y_name, self.x_name);
        let header: Vec<String> = std::iter::once(corner)
            .chain(self.x_labels.iter().cloned())
            .map(|s| csv_field(&s))
            .collect();
        out.push_str(&header.join(","));
        out.push('\n');
        for (label, row) in self.y_labels.iter().zip(&self.values) {
            out.push_str(&csv_field(label));
            for v in row {
                let _ = write!(out, ",{v}");
            }
            out.push('\n');
        }
        out
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Splits `values` (one per cell, row-major over `subspace`) into 2-D slices.
pub fn slices(subspace: &ContextSubspace, values: &[f64]) -> Vec<HeatmapSlice> {
    let features = subspace.features();
    assert_eq!(values.len(), subspace.cell_count());
    let (x, y) = match features.len() {
        0 => return Vec::new(),
        1 => (&features[0], None),
        _ => (&features[0], Some(&features[1])),
    };
    let x_labels: Vec<String> = (0..x.cardinality()).map(|c| x.label(c)).collect();
    let y_labels: Vec<String> = match y {
        Some(y) => (0..y.cardinality()).map(|c| y.label(c)).collect(),
        None => vec![String::from("-")],
    };
    let rest = &features[features.len().min(2)..];
    let rest_cells: usize = rest.iter().map(|f| f.cardinality()).product();

    (0..rest_cells)
        .map(|r| {
            // decode the remaining-axes index, last axis fastest
            let mut rem = r;
            let mut rest_codes = vec![0u32; rest.len()];
            for (k, f) in rest.iter().enumerate().rev() {
                rest_codes[k] = (rem % f.cardinality()) as u32;
                rem /= f.cardinality();
            }
            let title = rest
                .iter()
                .zip(&rest_codes)
                .map(|(f, &c)| format!("{}={}", f.name, f.label(c as usize)))
                .collect::<Vec<_>>()
                .join(" ");
            let values = (0..y_labels.len())
                .map(|yc| {
                    (0..x_labels.len())
                        .map(|xc| {
                            let mut codes = vec![xc as u32];
                            if y.is_some() {
                                codes.push(yc as u32);
                            }
                            codes.extend(&rest_codes);
                            values[subspace.cell_of(&codes)]
                        })
                        .collect()
                })
                .collect();
            HeatmapSlice {
                title,
                x_name: x.name.clone(),
                y_name: y.map_or_else(String::new, |f| f.name.clone()),
                x_labels: x_labels.clone(),
                y_labels: y_labels.clone(),
                values,
            }
        })
        .collect()
}

const CELL: usize = 36;
const LEFT: usize = 120;
const TOP: usize = 40;

/// Renders one slice as a standalone SVG document. Colors scale linearly from
/// white at `lo` to dark red at `hi`. Cells are `<rect class="cell">` elements.
pub fn render_svg(slice: &HeatmapSlice, caption: &str, lo: f64, hi: f64) -> String {
    let width = LEFT + CELL * slice.width() + 20;
    let height = TOP + CELL * slice.height() + 60;
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" font-family="sans-serif" font-size="10">"#
    );
    let heading = if slice.title.is_empty() {
        caption.to_string()
    } else {
        format!("{caption} ({})", slice.title)
    };
    let _ = writeln!(svg, r#"<text x="4" y="16" font-size="12">{}</text>"#, escape(&heading));
    for (yi, (label, row)) in slice.y_labels.iter().zip(&slice.values).enumerate() {
        let y = TOP + yi * CELL;
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{}" text-anchor="end">{}</text>"#,
            LEFT - 4,
            y + CELL / 2 + 3,
            escape(label)
        );
        for (xi, &v) in row.iter().enumerate() {
            let x = LEFT + xi * CELL;
            let _ = writeln!(
                svg,
                r##"<rect class="cell" x="{x}" y="{y}" width="{CELL}" height="{CELL}" fill="{}" stroke="#888"/>"##,
                color(v, lo, hi)
            );
            let _ = writeln!(
                svg,
                r#"<text x="{}" y="{}" text-anchor="middle" font-size="8">{:.2}</text>"#,
                x + CELL / 2,
                y + CELL / 2 + 3,
                v
            );
        }
    }
    let axis_y = TOP + slice.height() * CELL;
    for (xi, label) in slice.x_labels.iter().enumerate() {
        let x = LEFT + xi * CELL + CELL / 2;
        let _ = writeln!(
            svg,
            r#"<text x="{x}" y="{}" text-anchor="end" transform="rotate(-45 {x} {})" font-size="8">{}</text>"#,
            axis_y + 12,
            axis_y + 12,
            escape(label)
        );
    }
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="{}">{} / {}</text>"#,
        4,
        height - 6,
        escape(&slice.x_name),
        escape(&slice.y_name)
    );
    svg.push_str("</svg>\n");
    svg
}

fn color(v: f64, lo: f64, hi: f64) -> String {
    let t = if hi > lo { ((v - lo) / (hi - lo)).clamp(0.0, 1.0) } else { 0.0 };
    let lerp = |a: f64, b: f64| (a + (b - a) * t).round() as u8;
    format!("#{:02x}{:02x}{:02x}", lerp(255.0, 165.0), lerp(255.0, 15.0), lerp(255.0, 21.0))
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
