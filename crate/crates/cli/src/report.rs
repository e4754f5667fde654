//! Consolidated markdown report with SVG heatmaps.

use std::fmt::Write;
use std::fs;
use std::path::Path;

use contextspace_core::heatmap::{render_svg, slices, HeatmapSlice};

use crate::artifacts::*;
use crate::error::{CliError, Result};

fn prediction_artifacts(dir: &Path) -> Result<Vec<PredictionArtifact>> {
    let mut paths: Vec<_> = fs::read_dir(dir)
        .map_err(|e| CliError::io(dir, e))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| {
            p.file_name()
                .and_then(|n| n.to_str())
                .is_some_and(|n| n.starts_with("prediction_") && n.ends_with(".json"))
        })
        .collect();
    paths.sort();
    paths.iter().map(|p| read_json(p)).collect()
}

fn write_svgs(dir: &Path, prefix: &str, caption: &str, slices: &[HeatmapSlice], lo: f64, hi: f64) -> Result<Vec<String>> {
    slices
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let name = format!("{prefix}_slice{i}.svg");
            write_text(&dir.join(&name), &render_svg(s, caption, lo, hi))?;
            Ok(name)
        })
        .collect()
}

pub fn report(dir: &Path) -> Result<()> {
    let ranking: RankingArtifact = read_json(&require(dir, RANKING)?)?;
    let dimensionality: DimensionalityArtifact = read_json(&require(dir, DIMENSIONALITY)?)?;
    let fitted: LossMapArtifact = read_json(&require(dir, LOSS_MAP)?)?;
    let predictions = prediction_artifacts(dir)?;

    let mut md = String::new();
    let _ = writeln!(md, "# Context subspace report\n");
    let _ = writeln!(md, "Generated by {} with seed {}.\n", fitted.tool_version, fitted.seed);

    let _ = writeln!(md, "## Feature ranking\n");
    let _ = writeln!(md, "| rank | feature | score (nats) |\n|---:|---|---:|");
    for (i, (name, score)) in ranking.order.iter().zip(&ranking.scores).enumerate() {
        let _ = writeln!(md, "| {} | {} | {:.6} |", i + 1, name, score);
    }

    let report = &dimensionality.report;
    let _ = writeln!(md, "\n## Subspace dimensionality\n");
    let _ = writeln!(
        md,
        "{} fit/validation splits at {:.0}% fit. Context-free baseline error: {:.6}.\n",
        report.iterations,
        report.split_fraction * 100.0,
        report.baseline_error
    );
    let _ = writeln!(md, "| K | mean error | |\n|---:|---:|---|");
    for (k, e) in report.epsilon_tilde.iter().enumerate() {
        let mark = if k + 1 == report.chosen_k { "chosen" } else { "" };
        let _ = writeln!(md, "| {} | {:.6} | {} |", k + 1, e, mark);
    }
    if report.uninformative {
        let _ = writeln!(
            md,
            "\nThe error curve is flat or rising from K = 1: the context looks uninformative about the loss."
        );
    }

    let map = &fitted.loss_map;
    let features: Vec<&str> = map.subspace.features().iter().map(|f| f.name.as_str()).collect();
    let _ = writeln!(md, "\n## Loss map\n");
    let _ = writeln!(
        md,
        "Subspace `{}`: {} cells, {} untested (assigned the maximum loss {}). Test-domain loss: {:.6}.\n",
        features.join(" x "),
        map.subspace.cell_count(),
        map.untested_cells(),
        map.max_loss,
        fitted.test_prediction.predicted_loss
    );
    let g_slices = slices(&map.subspace, &map.expected_loss);
    let (lo, hi) = (map.support.min_loss(), map.support.max_loss());
    for (name, s) in write_svgs(dir, "g", "expected loss", &g_slices, lo, hi)?.iter().zip(&g_slices) {
        let _ = writeln!(md, "![expected loss {}]({name})", s.title);
    }

    let _ = writeln!(md, "\n## Predictions\n");
    if predictions.is_empty() {
        let _ = writeln!(md, "No operating domains were predicted.");
    } else {
        let _ = writeln!(
            md,
            "| domain | source | predicted loss | predicted recall | untested mass |\n|---|---|---:|---:|---:|"
        );
        for p in &predictions {
            let recall = p.report.predicted_recall.map_or_else(|| "-".to_string(), |r| format!("{r:.6}"));
            let _ = writeln!(
                md,
                "| {} | {} | {:.6} | {} | {:.6} |",
                p.domain, p.source, p.report.predicted_loss, recall, p.report.untested_mass
            );
        }
        for p in &predictions {
            map.subspace.ensure_same(&p.subspace)?;
            let p_slices = slices(&p.subspace, &p.mass);
            let hi = p.mass.iter().copied().fold(0.0, f64::max);
            let caption = format!("p({})", p.domain);
            let _ = writeln!(md);
            for (name, s) in write_svgs(dir, &format!("p_{}", p.domain), &caption, &p_slices, 0.0, hi)?
                .iter()
                .zip(&p_slices)
            {
                let _ = writeln!(md, "![{caption} {}]({name})", s.title);
            }
        }
    }
    write_text(&dir.join(REPORT), &md)
}
