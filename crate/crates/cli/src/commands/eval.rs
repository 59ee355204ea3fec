use std::path::PathBuf;

use pointmask::io::{self, ReportConfig};
use pointmask::metrics::{self, EvalReport};
use pointmask::{evaluate_dataset, BinaryMask};
use serde::Serialize;
use serde_json::json;

use crate::args::{Effective, EvalArgs, MaskSource};
use crate::dataset;
use crate::error::CliError;
use crate::runlog::RunLog;

#[derive(Serialize)]
struct PairScore {
    id: String,
    iou: f64,
    hits: usize,
    targets: usize,
    false_pixels: u64,
}

/// Headline plus one line per size category, in the units of the literature
/// (IoU and Pd in percent, Fa per million pixels).
pub fn summary(report: &EvalReport) -> String {
    let mut s = format!(
        "{}  ({} images, {}/{} targets detected)",
        report.headline(),
        report.n_images,
        report.hits,
        report.n_targets
    );
    for (cat, score) in &report.per_category {
        let iou = score
            .iou
            .map_or_else(|| "-".to_string(), |v| format!("{:.2}", v * 100.0));
        s.push_str(&format!("\n  {cat:<8} IoU {iou:>6}  n={}", score.count));
    }
    s
}

pub fn run(args: &EvalArgs, cfg: &Effective, run_log: Option<PathBuf>) -> Result<(), CliError> {
    let mut log = RunLog::new(
        "eval",
        cfg,
        json!({ "manifest": args.manifest, "report": args.report, "source": args.source }),
    );
    let manifest = dataset::load_manifest(&args.manifest, &mut log)?;

    let mut inputs = Vec::new();
    for entry in &manifest.entries {
        let pred = match args.source {
            MaskSource::Initial => &entry.initial_mask,
            MaskSource::Prediction => &entry.prediction_mask,
        };
        match (pred, &entry.gt_mask) {
            (Some(p), Some(g)) => inputs.push((entry.id.clone(), manifest.resolve(p), manifest.resolve(g))),
            _ => log::warn!("{}: skipped, needs both a mask to score and gt_mask", entry.id),
        }
    }
    let loaded = dataset::par_map(&inputs, |(_, pred, gt)| {
        let pred = dataset::load_binary(pred, cfg.eval.binarize_threshold)?;
        let gt = io::load_image(gt)?;
        Ok((pred, gt.binarize(0.5), gt.bit_depth))
    });

    let mut pairs: Vec<(BinaryMask, BinaryMask)> = Vec::new();
    let mut depths = Vec::new();
    for ((id, pred_path, gt_path), result) in inputs.iter().zip(loaded) {
        match result {
            Ok((pred, gt, depth)) => {
                let stats = metrics::evaluate_pair(&pred, &gt, &cfg.eval)
                    .map_err(|e| CliError::Data(format!("{id}: {e}")));
                let stats = match stats {
                    Ok(s) => s,
                    Err(e) => {
                        log::error!("{e}");
                        continue;
                    }
                };
                log.input(pred_path)?;
                log.input(gt_path)?;
                log.image(PairScore {
                    id: id.clone(),
                    iou: stats.pixels.iou(),
                    hits: stats.hits,
                    targets: stats.targets,
                    false_pixels: stats.pixels.false_pixels,
                });
                pairs.push((pred, gt));
                if !depths.contains(&depth) {
                    depths.push(depth);
                }
            }
            Err(e) => log::error!("{id}: {e}"),
        }
    }
    if pairs.is_empty() {
        return Err(CliError::Data("no valid (mask, ground truth) pairs to evaluate".into()));
    }
    depths.sort_unstable();
    let report = evaluate_dataset(&pairs, &cfg.eval)?;
    if let Some(dir) = args.report.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    let config = ReportConfig::new(&cfg.pmg, &cfg.update, &cfg.eval);
    io::write_report(&report, &config, &depths, &args.report)?;
    log.output(&args.report)?;
    log.write(&run_log.unwrap_or_else(|| dataset::run_log_beside(&args.report)))?;
    println!("{}", summary(&report));
    Ok(())
}
