use std::fs;
use std::path::{Path, PathBuf};

use pointmask::io::{self, DatasetManifest, ManifestEntry};
use pointmask::{BinaryMask, PointLabel};
use rayon::prelude::*;

use crate::error::CliError;
use crate::runlog::RunLog;

/// Loads a manifest and records it (and its points file) as run inputs.
pub fn load_manifest(path: &Path, log: &mut RunLog) -> Result<DatasetManifest, CliError> {
    let manifest = io::load_manifest(path)?;
    log.input(path)?;
    if let Some(pf) = &manifest.points_file {
        log.input(&manifest.resolve(pf))?;
    }
    Ok(manifest)
}

/// Entry ids become file names, so they must be plain names.
pub fn check_id(id: &str) -> Result<(), CliError> {
    if id.is_empty() || id == "." || id == ".." || id.contains(['/', '\\']) {
        return Err(CliError::Data(format!("entry id {id:?} is not a valid file name")));
    }
    Ok(())
}

pub fn points_for(entry: &ManifestEntry, width: usize, height: usize) -> Result<Vec<PointLabel>, CliError> {
    let raw: Vec<(i64, i64)> = entry.points.iter().map(|p| (p[0], p[1])).collect();
    Ok(io::validate_points(&entry.id, &raw, width, height)?)
}

/// `p` (relative to the manifest) re-expressed relative to directory `out`.
pub fn relative_to(manifest: &DatasetManifest, out: &Path, p: &Path) -> PathBuf {
    let resolved = manifest.resolve(p);
    let abs = |q: &Path| std::path::absolute(q).unwrap_or_else(|_| q.to_path_buf());
    pathdiff::diff_paths(abs(&resolved), abs(out)).unwrap_or(resolved)
}

/// Copy of `entry` for a manifest written into `out`, with points inlined.
pub fn rebased(manifest: &DatasetManifest, out: &Path, entry: &ManifestEntry) -> ManifestEntry {
    let rel = |p: &Option<PathBuf>| p.as_ref().map(|p| relative_to(manifest, out, p));
    ManifestEntry {
        id: entry.id.clone(),
        image: relative_to(manifest, out, &entry.image),
        points: entry.points.clone(),
        gt_mask: rel(&entry.gt_mask),
        prediction_mask: rel(&entry.prediction_mask),
        initial_mask: rel(&entry.initial_mask),
    }
}

pub fn mask_dir(out: &Path) -> Result<PathBuf, CliError> {
    let dir = out.join("masks");
    fs::create_dir_all(&dir)?;
    Ok(dir)
}

/// Runs `f` over the entries in parallel, preserving order. With `strict`
/// the first failure aborts the run.
pub fn process<T: Send>(
    entries: &[ManifestEntry],
    strict: bool,
    f: impl Fn(&ManifestEntry) -> Result<T, CliError> + Sync,
) -> Result<Vec<Result<T, CliError>>, CliError> {
    let run = |e: &ManifestEntry| {
        check_id(&e.id)
            .and_then(|_| f(e))
            .map_err(|err| CliError::Data(format!("{}: {err}", e.id)))
    };
    if strict {
        let done: Vec<T> = entries.par_iter().map(run).collect::<Result<_, _>>()?;
        Ok(done.into_iter().map(Ok).collect())
    } else {
        Ok(entries.par_iter().map(run).collect())
    }
}

/// Logs every failure and turns any into a single data error.
pub fn report_failures<T>(results: &[Result<T, CliError>], what: &str) -> Result<(), CliError> {
    let failed: Vec<&CliError> = results.iter().filter_map(|r| r.as_ref().err()).collect();
    for e in &failed {
        log::error!("{e}");
    }
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::Data(format!(
            "{} of {} images failed during {what}",
            failed.len(),
            results.len()
        )))
    }
}

pub fn load_binary(path: &Path, threshold: f64) -> Result<BinaryMask, CliError> {
    Ok(io::load_mask(path, threshold)?)
}

/// Default run-log location for a command writing into directory `out`.
pub fn run_log_in(out: &Path) -> PathBuf {
    out.join("run_log.json")
}

/// Default run-log location for a command writing the single file `out`.
pub fn run_log_beside(out: &Path) -> PathBuf {
    out.with_extension("run_log.json")
}

/// Order-preserving parallel map.
pub fn par_map<I: Sync, T: Send>(
    items: &[I],
    f: impl Fn(&I) -> Result<T, CliError> + Sync,
) -> Vec<Result<T, CliError>> {
    items.par_iter().map(|i| f(i)).collect()
}
