use std::fmt::Write;

use super::AlignmentTable;
use crate::tensorio::AttentionTensor;
use crate::{Error, Result};

const CELL: usize = 14;
const MARGIN: usize = 90;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HeatmapMode {
    Head(usize),
    MeanOverHeads,
}

/// White-to-navy ramp; `v` is clamped to `[0, 1]`.
fn color(v: f64) -> String {
    let t = if v.is_finite() { v.clamp(0.0, 1.0) } else { 0.0 };
    let lerp = |hi: f64, lo: f64| (hi + (lo - hi) * t).round() as u8;
    format!("#{:02x}{:02x}{:02x}", lerp(255.0, 8.0), lerp(255.0, 48.0), lerp(255.0, 107.0))
}

fn escape(text: &str) -> String {
    text.chars()
        .map(|c| match c {
            '&' => "&amp;".to_string(),
            '<' => "&lt;".to_string(),
            '>' => "&gt;".to_string(),
            '"' => "&quot;".to_string(),
            c if c.is_control() => " ".to_string(),
            c => c.to_string(),
        })
        .collect()
}

fn label(text: &str) -> String {
    let short: String = text.chars().take(12).collect();
    escape(&short)
}

/// Renders one layer's attention as an `n × n` grid (row = attending token).
pub fn attention_heatmap(
    attn: &AttentionTensor,
    words: &[String],
    layer: usize,
    mode: HeatmapMode,
) -> Result<String> {
    if layer >= attn.layers() {
        return Err(Error::InvalidArgument(format!(
            "layer {layer} out of range ({} layers)",
            attn.layers()
        )));
    }
    let n = attn.n();
    if words.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            actual: words.len(),
        });
    }
    let (weights, title) = match mode {
        HeatmapMode::Head(h) if h < attn.heads() => {
            (attn.matrix(layer, h).to_vec(), format!("layer {layer} head {h}"))
        }
        HeatmapMode::Head(h) => {
            return Err(Error::InvalidArgument(format!(
                "head {h} out of range ({} heads)",
                attn.heads()
            )))
        }
        HeatmapMode::MeanOverHeads => (attn.mean_over_heads(layer), format!("layer {layer} mean of heads")),
    };

    let size = MARGIN + n * CELL;
    let mut svg = String::new();
    writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" viewBox="0 0 {size} {size}" font-family="monospace" font-size="9">"#
    )
    .unwrap();
    writeln!(svg, "<title>{}</title>", escape(&title)).unwrap();
    for (i, w) in words.iter().enumerate() {
        let pos = MARGIN + i * CELL + CELL / 2 + 3;
        writeln!(svg, r#"<text x="{}" y="{pos}" text-anchor="end">{}</text>"#, MARGIN - 4, label(w)).unwrap();
        writeln!(
            svg,
            r#"<text x="{pos}" y="{}" text-anchor="start" transform="rotate(-90 {pos} {})">{}</text>"#,
            MARGIN - 4,
            MARGIN - 4,
            label(w)
        )
        .unwrap();
    }
    for i in 0..n {
        for j in 0..n {
            let v = weights[i * n + j] as f64;
            writeln!(
                svg,
                r#"<rect x="{}" y="{}" width="{CELL}" height="{CELL}" fill="{}"><title>{:.4}</title></rect>"#,
                MARGIN + j * CELL,
                MARGIN + i * CELL,
                color(v),
                v
            )
            .unwrap();
        }
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}

/// Layer × head grid of alignment proportions with a per-layer maximum
/// column; null cells are hatched grey.
pub fn alignment_grid_svg(table: &AlignmentTable) -> String {
    let width = MARGIN + (table.heads + 2) * CELL * 2;
    let height = MARGIN + table.layers * CELL * 2;
    let mut svg = String::new();
    writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" font-family="monospace" font-size="9">"#
    )
    .unwrap();
    for h in 0..table.heads {
        writeln!(svg, r#"<text x="{}" y="{}">{}</text>"#, MARGIN + h * CELL * 2 + 4, MARGIN - 6, h).unwrap();
    }
    writeln!(svg, r#"<text x="{}" y="{}">max</text>"#, MARGIN + (table.heads + 1) * CELL * 2, MARGIN - 6).unwrap();
    for l in 0..table.layers {
        let y = MARGIN + l * CELL * 2;
        writeln!(svg, r#"<text x="{}" y="{}" text-anchor="end">layer {l}</text>"#, MARGIN - 6, y + CELL + 3).unwrap();
        let cells = (0..table.heads)
            .map(|h| (h, table.get(l, h).p_align))
            .chain(std::iter::once((table.heads + 1, table.layer_max(l))));
        for (col, value) in cells {
            let fill = value.map_or_else(|| "#cccccc".to_string(), color);
            let tip = value.map_or_else(|| "null".to_string(), |v| format!("{v:.4}"));
            writeln!(
                svg,
                r#"<rect x="{}" y="{y}" width="{}" height="{}" fill="{fill}"><title>{tip}</title></rect>"#,
                MARGIN + col * CELL * 2,
                CELL * 2,
                CELL * 2
            )
            .unwrap();
        }
    }
    svg.push_str("</svg>\n");
    svg
}

#[cfg(test)]
mod tests {
    use super::*;

    fn words(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("w<{i}>")).collect()
    }

    #[test]
    fn identity_attention_lights_only_the_diagonal() {
        let n = 3;
        let data: Vec<f32> = (0..n * n).map(|k| if k % (n + 1) == 0 { 1.0 } else { 0.0 }).collect();
        let attn = AttentionTensor::new(1, 1, n, data).unwrap();
        let svg = attention_heatmap(&attn, &words(n), 0, HeatmapMode::Head(0)).unwrap();
        assert_eq!(svg.matches(r##"fill="#08306b""##).count(), n);
        assert_eq!(svg.matches(r##"fill="#ffffff""##).count(), n * n - n);
        assert!(svg.contains("w&lt;0&gt;"));
        assert_eq!(svg, attention_heatmap(&attn, &words(n), 0, HeatmapMode::Head(0)).unwrap());
    }

    #[test]
    fn mean_mode_averages_heads() {
        let attn = AttentionTensor::new(1, 2, 1, vec![1.0, 0.0]).unwrap();
        let svg = attention_heatmap(&attn, &words(1), 0, HeatmapMode::MeanOverHeads).unwrap();
        assert!(svg.contains("<title>0.5000</title>"));
        assert!(attention_heatmap(&attn, &words(1), 0, HeatmapMode::Head(2)).is_err());
        assert!(attention_heatmap(&attn, &words(2), 0, HeatmapMode::Head(0)).is_err());
    }
}
