use std::fs;
use std::path::{Path, PathBuf};

use pointmask::io::{self, DatasetManifest, ManifestEntry, PointTable};
use pointmask::synth::{self, CorpusParams, CorruptionSpec, SceneSpec};
use rayon::prelude::*;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::args::{Effective, SynthArgs};
use crate::dataset;
use crate::error::CliError;
use crate::runlog::RunLog;

/// Accepted shapes of the `--spec` file.
#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum CorpusSource {
    Random { random: CorpusParams },
    Many(Vec<SceneSpec>),
    One(SceneSpec),
}

#[derive(Serialize)]
struct SceneStats {
    id: String,
    targets: usize,
    gt_pixels: usize,
    dropped: Option<Vec<usize>>,
    injected: Option<usize>,
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

fn scene_specs(source: CorpusSource, seed: Option<u64>) -> Result<Vec<SceneSpec>, CliError> {
    Ok(match source {
        CorpusSource::Random { random } => synth::random_scenes(&random, seed.unwrap_or(0))?,
        CorpusSource::Many(mut specs) => {
            if let Some(s) = seed {
                for (i, spec) in specs.iter_mut().enumerate() {
                    spec.seed = s.wrapping_add(i as u64);
                }
            }
            specs
        }
        CorpusSource::One(mut spec) => {
            if let Some(s) = seed {
                spec.seed = s;
            }
            vec![spec]
        }
    })
}

pub fn run(args: &SynthArgs, cfg: &Effective, run_log: Option<PathBuf>) -> Result<(), CliError> {
    let mut log = RunLog::new(
        "synth",
        cfg,
        json!({ "spec": args.spec, "corrupt": args.corrupt, "out": args.out }),
    );
    let specs = scene_specs(read_json(&args.spec)?, cfg.seed)?;
    log.input(&args.spec)?;
    let corruption: Option<CorruptionSpec> = match &args.corrupt {
        Some(p) => {
            let c: CorruptionSpec = read_json(p)?;
            c.validate()?;
            log.input(p)?;
            Some(c)
        }
        None => None,
    };
    for s in &specs {
        s.validate()?;
    }

    let dirs = ["images", "masks", "predictions"].map(|d| args.out.join(d));
    for d in &dirs[..if corruption.is_some() { 3 } else { 2 }] {
        fs::create_dir_all(d)?;
    }
    let width = (specs.len().max(1) - 1).to_string().len().max(4);
    let ids: Vec<String> = (0..specs.len()).map(|i| format!("scene_{i:0width$}")).collect();

    let results: Vec<(ManifestEntry, SceneStats, Vec<PathBuf>)> = specs
        .par_iter()
        .zip(&ids)
        .enumerate()
        .map(|(i, (spec, id))| -> Result<_, CliError> {
            let scene = synth::generate_scene(spec)?;
            let name = format!("{id}.png");
            let image = Path::new("images").join(&name);
            let gt = Path::new("masks").join(&name);
            io::save_image(&scene.image, spec.bit_depth, args.out.join(&image))?;
            io::save_mask(&scene.gt, args.out.join(&gt))?;
            let mut written = vec![image.clone(), gt.clone()];
            let mut stats = SceneStats {
                id: id.clone(),
                targets: scene.components.len(),
                gt_pixels: scene.gt.count_ones(),
                dropped: None,
                injected: None,
            };
            let mut prediction = None;
            if let Some(c) = &corruption {
                let spec_i = CorruptionSpec {
                    seed: cfg.seed.unwrap_or(c.seed).wrapping_add(i as u64),
                    ..c.clone()
                };
                let corrupted = synth::corrupt_prediction(&scene.gt, &scene.labels, &spec_i)?;
                let pred = Path::new("predictions").join(&name);
                io::save_mask(&corrupted.mask, args.out.join(&pred))?;
                stats.dropped = Some(corrupted.dropped);
                stats.injected = Some(corrupted.injected.len());
                written.push(pred.clone());
                prediction = Some(pred);
            }
            let entry = ManifestEntry {
                id: id.clone(),
                image,
                points: scene.labels.iter().map(|p| [p.x as i64, p.y as i64]).collect(),
                gt_mask: Some(gt),
                prediction_mask: prediction,
                initial_mask: None,
            };
            Ok((entry, stats, written))
        })
        .collect::<Result<_, _>>()?;

    let mut table = PointTable::default();
    let mut manifest = DatasetManifest {
        points_file: Some(PathBuf::from("points.txt")),
        ..DatasetManifest::default()
    };
    for (mut entry, stats, written) in results {
        for p in entry.points.drain(..) {
            table.push(&entry.id, p[0], p[1]);
        }
        for w in written {
            log.output(&args.out.join(w))?;
        }
        log.image(stats);
        manifest.entries.push(entry);
    }
    let points_path = args.out.join("points.txt");
    io::write_points(&table, &points_path)?;
    log.output(&points_path)?;
    let manifest_path = args.out.join("manifest.json");
    io::save_manifest(&manifest, &manifest_path)?;
    log.output(&manifest_path)?;
    log.write(&run_log.unwrap_or_else(|| dataset::run_log_in(&args.out)))?;

    println!(
        "synth: {} scenes with {} targets written to {}",
        manifest.entries.len(),
        table.iter().map(|(_, p)| p.len()).sum::<usize>(),
        args.out.display()
    );
    Ok(())
}
