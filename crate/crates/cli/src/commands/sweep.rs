use std::fs;
use std::path::PathBuf;

use pointmask::io;
use pointmask::pmu;
use pointmask::{evaluate_dataset, point_to_mask, BinaryMask, EvalReport, GrayImage, PmgConfig, PointLabel, SizeCategory, UpdateConfig};
use serde_json::json;

use crate::args::{Effective, SweepArgs, SweepParam};
use crate::dataset;
use crate::error::CliError;
use crate::runlog::RunLog;

struct Item {
    image: GrayImage,
    points: Vec<PointLabel>,
    gt: BinaryMask,
    initial: Option<BinaryMask>,
    prediction: Option<BinaryMask>,
}

fn integral(param: &str, v: f64, min: f64) -> Result<usize, CliError> {
    if v.fract() != 0.0 || v < min || !v.is_finite() {
        return Err(CliError::Config(format!("{param} must be an integer >= {min}, got {v}")));
    }
    Ok(v as usize)
}

fn pmg_config(base: &PmgConfig, param: SweepParam, v: f64) -> Result<PmgConfig, CliError> {
    let mut c = *base;
    match param {
        SweepParam::LEp => c.l_ep = integral("l_ep", v, 1.0)?,
        SweepParam::LDp => c.l_dp = integral("l_dp", v, 0.0)?,
        SweepParam::Alpha => c.alpha = v,
        SweepParam::R => unreachable!("r does not affect mask generation"),
    }
    c.validate()?;
    Ok(c)
}

fn category_cells(report: &EvalReport) -> Vec<String> {
    SizeCategory::ALL
        .iter()
        .map(|c| {
            report
                .per_category
                .get(c)
                .and_then(|s| s.iou)
                .map_or_else(String::new, |v| v.to_string())
        })
        .collect()
}

fn score_cells(report: &EvalReport) -> Vec<String> {
    let mut cells = vec![report.iou.to_string(), report.pd.to_string(), report.fa.to_string()];
    cells.extend(category_cells(report));
    cells
}

fn score(masks: Vec<BinaryMask>, items: &[Item], cfg: &Effective) -> Result<EvalReport, CliError> {
    let pairs: Vec<_> = masks.into_iter().zip(items.iter().map(|i| i.gt.clone())).collect();
    Ok(evaluate_dataset(&pairs, &cfg.eval)?)
}

fn generate(items: &[Item], pmg: &PmgConfig) -> Result<Vec<BinaryMask>, CliError> {
    dataset::par_map(items, |it| Ok(point_to_mask(&it.image, &it.points, pmg)?))
        .into_iter()
        .collect()
}

pub fn run(args: &SweepArgs, cfg: &Effective, run_log: Option<PathBuf>) -> Result<(), CliError> {
    if args.values.is_empty() {
        return Err(CliError::Config("--values must list at least one value".into()));
    }
    let param_name = serde_json::to_value(args.param).expect("param serializes");
    let param_name = param_name.as_str().expect("param name is a string").to_string();
    let filtering = args.param == SweepParam::R;
    // Validate every value before any work starts.
    for &v in &args.values {
        if filtering {
            UpdateConfig { r: v, ..cfg.update }.validate()?;
        } else {
            pmg_config(&cfg.pmg, args.param, v)?;
        }
    }

    let mut log = RunLog::new(
        "sweep",
        cfg,
        json!({
            "manifest": args.manifest,
            "param": param_name,
            "values": args.values,
            "out": args.out,
        }),
    );
    let manifest = dataset::load_manifest(&args.manifest, &mut log)?;
    if manifest.entries.is_empty() {
        return Err(CliError::Data("manifest has no entries to sweep over".into()));
    }
    let items: Vec<Item> = dataset::par_map(&manifest.entries, |e| {
        let loaded = io::load_image(manifest.resolve(&e.image))?;
        let (w, h) = loaded.image.dims();
        let gt = e
            .gt_mask
            .as_ref()
            .ok_or_else(|| CliError::Data("sweeps need gt_mask for every entry".into()))?;
        let gt = dataset::load_binary(&manifest.resolve(gt), 0.5)?;
        let load = |p: &Option<PathBuf>, t: f64| {
            p.as_ref()
                .map(|p| dataset::load_binary(&manifest.resolve(p), t))
                .transpose()
        };
        let prediction = if filtering {
            Some(load(&e.prediction_mask, cfg.eval.binarize_threshold)?.ok_or_else(|| {
                CliError::Data("an r sweep needs prediction_mask for every entry".into())
            })?)
        } else {
            None
        };
        Ok(Item {
            points: dataset::points_for(e, w, h)?,
            image: loaded.image,
            gt,
            initial: load(&e.initial_mask, 0.5)?,
            prediction,
        })
    })
    .into_iter()
    .zip(&manifest.entries)
    .map(|(r, e)| r.map_err(|err| CliError::Data(format!("{}: {err}", e.id))))
    .collect::<Result<_, _>>()?;
    for e in &manifest.entries {
        for p in [Some(&e.image), e.gt_mask.as_ref(), e.initial_mask.as_ref()]
            .into_iter()
            .flatten()
            .chain(e.prediction_mask.as_ref().filter(|_| filtering))
        {
            log.input(&manifest.resolve(p))?;
        }
    }

    let cats = ["point", "spot", "extended"];
    let mut header = vec![param_name.clone()];
    let mut rows = Vec::new();
    if filtering {
        for prefix in ["filtered", "hybrid"] {
            header.extend(["iou", "pd", "fa"].iter().map(|m| format!("{prefix}_{m}")));
            header.extend(cats.iter().map(|c| format!("{prefix}_iou_{c}")));
        }
        header.push("erased_components".into());
        let initial = match items.iter().all(|i| i.initial.is_some()) {
            true => items.iter().map(|i| i.initial.clone().unwrap()).collect(),
            false => {
                log::info!("some entries lack initial_mask; generating initial masks with the current settings");
                generate(&items, &cfg.pmg)?
            }
        };
        for &r in &args.values {
            let ucfg = UpdateConfig { r, ..cfg.update };
            let outcomes: Vec<_> = items
                .iter()
                .zip(&initial)
                .map(|(it, init)| {
                    let pred = it.prediction.as_ref().expect("loaded for r sweeps");
                    let filtered = pmu::filter_false_alarms(pred, &it.points, &ucfg);
                    let hybrid = pmu::missed_detection_retrieve(init, &filtered.mask)?;
                    Ok((filtered.mask, hybrid, filtered.erased.len()))
                })
                .collect::<Result<_, CliError>>()?;
            let erased: usize = outcomes.iter().map(|o| o.2).sum();
            let (filtered, hybrid): (Vec<_>, Vec<_>) = outcomes.into_iter().map(|o| (o.0, o.1)).unzip();
            let mut row = vec![r.to_string()];
            row.extend(score_cells(&score(filtered, &items, cfg)?));
            row.extend(score_cells(&score(hybrid, &items, cfg)?));
            row.push(erased.to_string());
            rows.push(row);
        }
    } else {
        header.extend(["iou", "pd", "fa"].map(String::from));
        header.extend(cats.iter().map(|c| format!("iou_{c}")));
        for &v in &args.values {
            let pmg = pmg_config(&cfg.pmg, args.param, v)?;
            let mut row = vec![v.to_string()];
            row.extend(score_cells(&score(generate(&items, &pmg)?, &items, cfg)?));
            rows.push(row);
        }
    }

    let mut table = header.join(",") + "\n";
    for row in &rows {
        table.push_str(&row.join(","));
        table.push('\n');
    }
    fs::create_dir_all(&args.out)?;
    let csv = args.out.join("sweep.csv");
    fs::write(&csv, &table)?;
    log.output(&csv)?;
    log.write(&run_log.unwrap_or_else(|| dataset::run_log_in(&args.out)))?;
    print!("{table}");
    Ok(())
}
