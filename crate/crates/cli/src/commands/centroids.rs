use std::fs;
use std::path::PathBuf;

use pointmask::io::{self, PointTable};
use pointmask::pmu::connected_components;
use pointmask::synth::{self, GT_CONNECTIVITY};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use crate::args::{CentroidsArgs, Effective};
use crate::dataset;
use crate::error::CliError;
use crate::runlog::RunLog;

#[derive(Serialize)]
struct MaskStats {
    id: String,
    targets: usize,
}

/// `(id, mask path)` pairs in a stable order.
fn sources(args: &CentroidsArgs, log: &mut RunLog) -> Result<Vec<(String, PathBuf)>, CliError> {
    if let Some(m) = &args.manifest {
        let manifest = dataset::load_manifest(m, log)?;
        return manifest
            .entries
            .iter()
            .map(|e| match &e.gt_mask {
                Some(p) => Ok((e.id.clone(), manifest.resolve(p))),
                None => Err(CliError::Data(format!("{}: no gt_mask in manifest", e.id))),
            })
            .collect();
    }
    let dir = args.masks_dir.as_ref().expect("clap requires one source");
    let mut found = Vec::new();
    for entry in fs::read_dir(dir).map_err(|e| CliError::Data(format!("{}: {e}", dir.display())))? {
        let path = entry?.path();
        let is_png = path
            .extension()
            .is_some_and(|e| e.eq_ignore_ascii_case("png"));
        if is_png {
            let id = path.file_stem().unwrap_or_default().to_string_lossy().into_owned();
            found.push((id, path));
        }
    }
    found.sort();
    Ok(found)
}

pub fn run(args: &CentroidsArgs, cfg: &Effective, run_log: Option<PathBuf>) -> Result<(), CliError> {
    let jitter = args.jitter.unwrap_or(0.0);
    if !(jitter >= 0.0) || !jitter.is_finite() {
        return Err(CliError::Config(format!("--jitter must be non-negative, got {jitter}")));
    }
    let seed = cfg.seed.unwrap_or(0);
    let mut log = RunLog::new(
        "centroids",
        cfg,
        json!({
            "manifest": args.manifest,
            "masks_dir": args.masks_dir,
            "out": args.out,
            "jitter": jitter,
        }),
    );
    let sources = sources(args, &mut log)?;
    if sources.is_empty() {
        log::warn!("no masks found; writing an empty points file");
    }

    let labelled: Vec<(String, Vec<pointmask::PointLabel>)> = sources
        .par_iter()
        .enumerate()
        .map(|(i, (id, path))| -> Result<_, CliError> {
            let mask = dataset::load_binary(path, 0.5)?;
            let labels = if jitter > 0.0 {
                let comps = connected_components(&mask, GT_CONNECTIVITY);
                let exact: Vec<_> = comps.iter().map(synth::centroid_label).collect();
                let (w, h) = mask.dims();
                synth::jitter_labels(&exact, &comps, jitter, w, h, seed.wrapping_add(i as u64))
            } else {
                synth::centroid_labels(&mask)
            };
            Ok((id.clone(), labels))
        })
        .collect::<Result<_, _>>()?;

    let mut table = PointTable::default();
    for ((id, labels), (_, path)) in labelled.iter().zip(&sources) {
        log.input(path)?;
        for p in labels {
            table.push(id, p.x as i64, p.y as i64);
        }
        log.image(MaskStats {
            id: id.clone(),
            targets: labels.len(),
        });
    }
    if let Some(dir) = args.out.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    io::write_points(&table, &args.out)?;
    log.output(&args.out)?;
    log.write(&run_log.unwrap_or_else(|| dataset::run_log_beside(&args.out)))?;
    println!(
        "centroids: {} labels from {} masks written to {}",
        labelled.iter().map(|(_, l)| l.len()).sum::<usize>(),
        labelled.len(),
        args.out.display()
    );
    Ok(())
}
