use std::path::PathBuf;
use std::time::{Duration, Instant};

use pointmask::io::{self, DatasetManifest};
use pointmask::point_to_mask;
use serde::Serialize;
use serde_json::json;

use crate::args::{Effective, PmgArgs};
use crate::dataset;
use crate::error::CliError;
use crate::runlog::RunLog;

#[derive(Serialize)]
struct MaskStats {
    id: String,
    points: usize,
    mask_pixels: usize,
}

pub fn run(args: &PmgArgs, cfg: &Effective, run_log: Option<PathBuf>) -> Result<(), CliError> {
    let mut log = RunLog::new(
        "pmg",
        cfg,
        json!({ "manifest": args.manifest, "out": args.out, "strict": args.strict }),
    );
    let manifest = dataset::load_manifest(&args.manifest, &mut log)?;
    let run_log = run_log.unwrap_or_else(|| dataset::run_log_in(&args.out));
    if manifest.entries.is_empty() {
        log::warn!("{}: manifest has no entries", args.manifest.display());
        log.write(&run_log)?;
        println!("pmg: 0 masks (empty manifest)");
        return Ok(());
    }
    let masks = dataset::mask_dir(&args.out)?;

    let started = Instant::now();
    let results = dataset::process(&manifest.entries, args.strict, |entry| {
        let t = Instant::now();
        let loaded = io::load_image(manifest.resolve(&entry.image))?;
        let (w, h) = loaded.image.dims();
        let points = dataset::points_for(entry, w, h)?;
        if points.is_empty() {
            log::warn!("{}: no point labels; mask will be empty", entry.id);
        }
        let mask = point_to_mask(&loaded.image, &points, &cfg.pmg)?;
        let path = masks.join(format!("{}.png", entry.id));
        io::save_mask(&mask, &path)?;
        let elapsed = t.elapsed();
        log::info!(
            "{}: {} points, {} mask pixels, {:.2} ms",
            entry.id,
            points.len(),
            mask.count_ones(),
            elapsed.as_secs_f64() * 1e3
        );
        let stats = MaskStats {
            id: entry.id.clone(),
            points: points.len(),
            mask_pixels: mask.count_ones(),
        };
        Ok((path, stats, elapsed))
    })?;
    let wall = started.elapsed();

    let mut out = DatasetManifest::default();
    let mut busy = Duration::ZERO;
    let mut written = 0;
    for (entry, result) in manifest.entries.iter().zip(&results) {
        let mut rebased = dataset::rebased(&manifest, &args.out, entry);
        if let Ok((path, stats, elapsed)) = result {
            log.input(&manifest.resolve(&entry.image))?;
            log.output(path)?;
            log.image(stats);
            rebased.initial_mask = Some(PathBuf::from("masks").join(format!("{}.png", entry.id)));
            busy += *elapsed;
            written += 1;
        }
        out.entries.push(rebased);
    }
    let manifest_path = args.out.join("manifest.json");
    io::save_manifest(&out, &manifest_path)?;
    log.output(&manifest_path)?;
    log.write(&run_log)?;

    println!(
        "pmg: {written}/{} masks written to {} in {:.1} ms ({:.2} ms/image)",
        results.len(),
        args.out.display(),
        wall.as_secs_f64() * 1e3,
        busy.as_secs_f64() * 1e3 / written.max(1) as f64
    );
    dataset::report_failures(&results, "mask generation")
}
