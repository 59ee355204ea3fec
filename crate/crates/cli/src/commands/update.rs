use std::path::PathBuf;

use pointmask::io::{self, DatasetManifest};
use pointmask::pmu::{self, UpdateSample, UpdateStats};
use serde::Serialize;
use serde_json::json;

use crate::args::{Effective, UpdateArgs};
use crate::dataset;
use crate::error::CliError;
use crate::runlog::RunLog;

#[derive(Serialize)]
struct HybridStats {
    id: String,
    #[serde(flatten)]
    counts: UpdateStats,
    prediction_missing: bool,
    mask_pixels: usize,
}

pub fn run(args: &UpdateArgs, cfg: &Effective, run_log: Option<PathBuf>) -> Result<(), CliError> {
    let mut log = RunLog::new(
        "update",
        cfg,
        json!({
            "manifest": args.manifest,
            "out": args.out,
            "allow_missing_pred": args.allow_missing_pred,
            "strict": args.strict,
        }),
    );
    let manifest = dataset::load_manifest(&args.manifest, &mut log)?;
    let run_log = run_log.unwrap_or_else(|| dataset::run_log_in(&args.out));
    if manifest.entries.is_empty() {
        log::warn!("{}: manifest has no entries", args.manifest.display());
        log.write(&run_log)?;
        println!("update: 0 masks (empty manifest)");
        return Ok(());
    }
    let masks = dataset::mask_dir(&args.out)?;

    let results = dataset::process(&manifest.entries, args.strict, |entry| {
        let initial_path = entry
            .initial_mask
            .as_ref()
            .ok_or_else(|| CliError::Data("no initial_mask in manifest".into()))?;
        let initial = dataset::load_binary(&manifest.resolve(initial_path), 0.5)?;
        let (w, h) = initial.dims();
        let points = dataset::points_for(entry, w, h)?;
        if points.is_empty() {
            log::warn!("{}: no point labels; every predicted component will be erased", entry.id);
        }
        let (hybrid, counts, missing) = match &entry.prediction_mask {
            Some(p) => {
                let prediction = dataset::load_binary(&manifest.resolve(p), cfg.eval.binarize_threshold)?;
                let sample = UpdateSample {
                    initial,
                    prediction,
                    points,
                };
                let outcome = pmu::update_sample(&sample, &cfg.update)?;
                let counts = UpdateStats::from(&outcome);
                (outcome.hybrid, counts, false)
            }
            None if args.allow_missing_pred => {
                log::warn!("{}: no prediction; keeping the current mask", entry.id);
                (initial, UpdateStats::default(), true)
            }
            None => return Err(CliError::Data("no prediction_mask in manifest".into())),
        };
        log::info!(
            "{}: erased {} components, retrieved {} pixels",
            entry.id,
            counts.erased_components,
            counts.retrieved_pixels
        );
        let path = masks.join(format!("{}.png", entry.id));
        io::save_mask(&hybrid, &path)?;
        let stats = HybridStats {
            id: entry.id.clone(),
            counts,
            prediction_missing: missing,
            mask_pixels: hybrid.count_ones(),
        };
        Ok((path, stats))
    })?;

    let mut out = DatasetManifest::default();
    let (mut erased, mut retrieved, mut written) = (0, 0, 0);
    for (entry, result) in manifest.entries.iter().zip(&results) {
        let mut rebased = dataset::rebased(&manifest, &args.out, entry);
        if let Ok((path, stats)) = result {
            for p in [&entry.initial_mask, &entry.prediction_mask].into_iter().flatten() {
                log.input(&manifest.resolve(p))?;
            }
            log.output(path)?;
            erased += stats.counts.erased_components;
            retrieved += stats.counts.retrieved_pixels;
            log.image(stats);
            rebased.initial_mask = Some(PathBuf::from("masks").join(format!("{}.png", entry.id)));
            written += 1;
        }
        out.entries.push(rebased);
    }
    let manifest_path = args.out.join("manifest.json");
    io::save_manifest(&out, &manifest_path)?;
    log.output(&manifest_path)?;
    log.write(&run_log)?;

    println!(
        "update: {written}/{} hybrid masks written to {}; {erased} components erased, {retrieved} pixels retrieved",
        results.len(),
        args.out.display()
    );
    dataset::report_failures(&results, "update")
}
