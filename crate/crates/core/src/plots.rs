//! Force-plot and network-plot documents derived from a Shapley report, plus
//! simple SVG renderings.

use serde::{Deserialize, Serialize};

use crate::shapley::ShapleyReport;

fn sign_of(value: f64) -> i8 {
    if value > 0.0 {
        1
    } else if value < 0.0 {
        -1
    } else {
        0
    }
}

/// Force plot: per-player attributions pushing from the baseline towards the
/// full value. Positive sign increases performance, negative decreases.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForcePlotDoc {
    pub baseline: f64,
    pub full_value: f64,
    pub attributions: Vec<ForceAttribution>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForceAttribution {
    pub name: String,
    pub value: f64,
    pub sign: i8,
}

/// Network plot: nodes carry order-1 terms, edges carry pairwise
/// interactions. Nodes are laid out on a unit circle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkPlotDoc {
    pub nodes: Vec<NetworkNode>,
    pub edges: Vec<NetworkEdge>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkNode {
    pub name: String,
    pub magnitude: f64,
    pub sign: i8,
    pub x: f64,
    pub y: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkEdge {
    pub source: String,
    pub target: String,
    pub magnitude: f64,
    pub sign: i8,
}

pub fn export_force_plot(report: &ShapleyReport) -> ForcePlotDoc {
    ForcePlotDoc {
        baseline: report.baseline,
        full_value: report.full_value,
        attributions: report
            .player_names
            .iter()
            .zip(&report.sv)
            .map(|(name, &value)| ForceAttribution {
                name: name.clone(),
                value,
                sign: sign_of(value),
            })
            .collect(),
    }
}

pub fn export_network_plot(report: &ShapleyReport) -> NetworkPlotDoc {
    let n = report.player_count();
    let nodes = report
        .player_names
        .iter()
        .zip(&report.two_sii_order1)
        .enumerate()
        .map(|(i, (name, &value))| {
            let angle = std::f64::consts::TAU * i as f64 / n.max(1) as f64;
            NetworkNode {
                name: name.clone(),
                magnitude: value.abs(),
                sign: sign_of(value),
                x: angle.cos(),
                y: angle.sin(),
            }
        })
        .collect();
    let edges = report
        .sii_pairs
        .iter()
        .map(|p| NetworkEdge {
            source: report.player_names[p.i].clone(),
            target: report.player_names[p.j].clone(),
            magnitude: p.value.abs(),
            sign: sign_of(p.value),
        })
        .collect();
    NetworkPlotDoc { nodes, edges }
}

fn color(sign: i8) -> &'static str {
    match sign {
        1 => "#d62728",  // red: increases performance
        -1 => "#1f77b4", // blue: decreases performance
        _ => "#999999",
    }
}

/// Render the force plot as a horizontal number line with signed bars.
pub fn render_force_svg(doc: &ForcePlotDoc) -> String {
    let width = 800.0;
    let height = 160.0;
    let margin = 60.0;
    let mut points = vec![doc.baseline, doc.full_value];
    let mut cursor = doc.baseline;
    for a in &doc.attributions {
        cursor += a.value;
        points.push(cursor);
    }
    let min = points.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = points.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let span = (max - min).max(1e-9);
    let x = |v: f64| margin + (v - min) / span * (width - 2.0 * margin);

    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width}\" height=\"{height}\" viewBox=\"0 0 {width} {height}\">\n"
    ));
    svg.push_str(&format!(
        "  <line x1=\"{:.2}\" y1=\"80\" x2=\"{:.2}\" y2=\"80\" stroke=\"#333\"/>\n",
        margin,
        width - margin
    ));
    let mut cursor = doc.baseline;
    for (i, a) in doc.attributions.iter().enumerate() {
        let x0 = x(cursor);
        cursor += a.value;
        let x1 = x(cursor);
        let y = 80.0 - 8.0 * (i % 2) as f64 + 4.0;
        svg.push_str(&format!(
            "  <line x1=\"{x0:.2}\" y1=\"{y:.2}\" x2=\"{x1:.2}\" y2=\"{y:.2}\" stroke=\"{}\" stroke-width=\"6\" opacity=\"0.8\"/>\n",
            color(a.sign)
        ));
        svg.push_str(&format!(
            "  <text x=\"{:.2}\" y=\"{:.2}\" font-size=\"10\" text-anchor=\"middle\">{} ({:+.3})</text>\n",
            (x0 + x1) / 2.0,
            y + 22.0 + 12.0 * (i % 3) as f64,
            a.name,
            a.value
        ));
    }
    for (label, v) in [("baseline", doc.baseline), ("full", doc.full_value)] {
        svg.push_str(&format!(
            "  <line x1=\"{0:.2}\" y1=\"60\" x2=\"{0:.2}\" y2=\"100\" stroke=\"#333\"/>\n  <text x=\"{0:.2}\" y=\"52\" font-size=\"10\" text-anchor=\"middle\">{1} {2:.3}</text>\n",
            x(v),
            label,
            v
        ));
    }
    svg.push_str("</svg>\n");
    svg
}

/// Render the network plot: nodes on a circle, edges between them, size by
/// magnitude, color by sign.
pub fn render_network_svg(doc: &NetworkPlotDoc) -> String {
    let size = 480.0;
    let center = size / 2.0;
    let radius = size / 2.0 - 70.0;
    let pos = |x: f64, y: f64| (center + radius * x, center + radius * y);
    let max_node = doc
        .nodes
        .iter()
        .map(|n| n.magnitude)
        .fold(0.0f64, f64::max)
        .max(1e-9);
    let max_edge = doc
        .edges
        .iter()
        .map(|e| e.magnitude)
        .fold(0.0f64, f64::max)
        .max(1e-9);

    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{size}\" height=\"{size}\" viewBox=\"0 0 {size} {size}\">\n"
    ));
    let node_pos: Vec<(f64, f64)> = doc.nodes.iter().map(|n| pos(n.x, n.y)).collect();
    let index_of = |name: &str| doc.nodes.iter().position(|n| n.name == name).unwrap_or(0);
    for e in &doc.edges {
        let (x1, y1) = node_pos[index_of(&e.source)];
        let (x2, y2) = node_pos[index_of(&e.target)];
        let w = 1.0 + 7.0 * e.magnitude / max_edge;
        let opacity = 0.2 + 0.7 * e.magnitude / max_edge;
        svg.push_str(&format!(
            "  <line x1=\"{x1:.2}\" y1=\"{y1:.2}\" x2=\"{x2:.2}\" y2=\"{y2:.2}\" stroke=\"{}\" stroke-width=\"{w:.2}\" opacity=\"{opacity:.2}\"/>\n",
            color(e.sign)
        ));
    }
    for (node, (x, y)) in doc.nodes.iter().zip(&node_pos) {
        let r = 4.0 + 14.0 * node.magnitude / max_node;
        svg.push_str(&format!(
            "  <circle cx=\"{x:.2}\" cy=\"{y:.2}\" r=\"{r:.2}\" fill=\"{}\"/>\n",
            color(node.sign)
        ));
        svg.push_str(&format!(
            "  <text x=\"{x:.2}\" y=\"{:.2}\" font-size=\"11\" text-anchor=\"middle\">{}</text>\n",
            y - r - 6.0,
            node.name
        ));
    }
    svg.push_str("</svg>\n");
    svg
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::CompositionGame;
    use crate::shapley::two_sii;
    use approx::assert_abs_diff_eq;

    #[test]
    fn additive_game_edges_are_zero() {
        let values = (0..8usize)
            .map(|mask| {
                [0.2, 0.5, -0.1]
                    .iter()
                    .enumerate()
                    .filter(|(i, _)| mask & (1 << i) != 0)
                    .map(|(_, w)| w)
                    .sum()
            })
            .collect();
        let report = two_sii(&CompositionGame::from_values(values, "additive")).unwrap();
        let network = export_network_plot(&report);
        for e in &network.edges {
            assert_abs_diff_eq!(e.magnitude, 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn synergy_game_has_one_positive_edge() {
        let game = CompositionGame::from_values(vec![0.0, 0.0, 0.0, 1.0], "synergy");
        let report = two_sii(&game).unwrap();
        let network = export_network_plot(&report);
        assert_eq!(network.edges.len(), 1);
        assert_abs_diff_eq!(network.edges[0].magnitude, 1.0, epsilon = 1e-12);
        assert_eq!(network.edges[0].sign, 1);
    }

    #[test]
    fn force_attributions_sum_to_full_value() {
        let game = CompositionGame::from_values(vec![0.1, 0.6, 0.4, 0.9], "game");
        let report = two_sii(&game).unwrap();
        let force = export_force_plot(&report);
        let total: f64 = force.attributions.iter().map(|a| a.value).sum();
        assert_abs_diff_eq!(force.baseline + total, force.full_value, epsilon = 1e-12);
    }

    #[test]
    fn svg_rendering_is_well_formed() {
        let game = CompositionGame::from_values(vec![0.1, 0.6, 0.4, 0.9], "game");
        let report = two_sii(&game).unwrap();
        let force_svg = render_force_svg(&export_force_plot(&report));
        assert!(force_svg.starts_with("<svg"));
        assert!(force_svg.ends_with("</svg>\n"));
        let network_svg = render_network_svg(&export_network_plot(&report));
        assert!(network_svg.contains("<circle"));
        assert!(network_svg.ends_with("</svg>\n"));
    }
}
