use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use fundus_core::dataset::{
    amalgamate, load_manifest, stratified_split, DatasetRecord, Manifest, Source, Split,
    DEFAULT_TEST_FRAC, DEFAULT_VAL_FRAC, NUM_CLASSES,
};
use fundus_core::harness::{roundtrip_eval, Metric, RoundTripConfig, RowStatus};
use fundus_core::image::{tile_quadrants, CropBox, Image, Quadrants, DEFAULT_CROP_THRESHOLD};
use fundus_core::io::{load_image, save_image, FileFormat};
use fundus_core::iqa::{self, SsimParams, DEFAULT_PEAK};
use fundus_core::metrics::{evaluate, load_predictions};
use fundus_core::pipeline::{finish_preprocess, preprocess_one, PreprocessConfig, DEFAULT_TARGET};
use fundus_core::resample::external::{check_external_dir, external_path};
use fundus_core::resample::{
    Algorithm, ResampleSpec, DEFAULT_LANCZOS_TAPS, DEFAULT_RDIP_EPSILON, DEFAULT_RDIP_LAMBDA,
    DEFAULT_SCALE,
};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use crate::config::{
    pick, require, MetricsFile, PreprocessFile, PsnrFile, ResampleFile, RoundtripFile, SplitFile,
    SsimFile, TileFile,
};
use crate::{
    MetricsArgs, PreprocessArgs, PsnrArgs, ResampleArgs, RoundtripArgs, SplitArgs, SsimArgs,
    Status, TileArgs,
};

pub const RESOLVED_CONFIG: &str = "resolved-config.json";

fn write_resolved(
    dir: &Path,
    command: &str,
    workers: usize,
    settings: impl Serialize,
) -> Result<()> {
    let body = json!({
        "command": command,
        "workers": workers,
        "version": env!("CARGO_PKG_VERSION"),
        "settings": settings,
    });
    let path = dir.join(RESOLVED_CONFIG);
    std::fs::write(&path, serde_json::to_string_pretty(&body)? + "\n")
        .with_context(|| format!("writing {}", path.display()))
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)
        .with_context(|| format!("creating output directory {}", dir.display()))
}

fn parse_source(raw: Option<String>) -> Result<Option<Source>> {
    raw.map(|s| s.parse::<Source>().map_err(anyhow::Error::msg))
        .transpose()
}

/// `lanczos6` style names select the tap count.
fn parse_algorithm(name: &str) -> Result<(Algorithm, Option<u32>)> {
    let name = name.trim().to_ascii_lowercase();
    if let Some(taps) = name.strip_prefix("lanczos").filter(|t| !t.is_empty()) {
        let taps = taps
            .parse()
            .with_context(|| format!("unknown algorithm {name:?}"))?;
        return Ok((Algorithm::Lanczos, Some(taps)));
    }
    Ok((name.parse::<Algorithm>()?, None))
}

fn resample_spec(
    algorithm: Algorithm,
    taps: Option<u32>,
    flags: &ResampleArgs,
    file: &ResampleFile,
) -> ResampleSpec {
    let mut spec = ResampleSpec::new(algorithm)
        .with_scale(pick(flags.scale, file.scale, DEFAULT_SCALE))
        .with_lanczos_taps(taps.unwrap_or(pick(
            flags.lanczos_taps,
            file.lanczos_taps,
            DEFAULT_LANCZOS_TAPS,
        )))
        .with_rdip(
            pick(flags.rdip_lambda, file.rdip_lambda, DEFAULT_RDIP_LAMBDA),
            pick(flags.rdip_epsilon, file.rdip_epsilon, DEFAULT_RDIP_EPSILON),
        );
    spec.antialias = if flags.no_antialias {
        false
    } else {
        file.antialias.unwrap_or(true)
    };
    if algorithm == Algorithm::External {
        spec.external_dir = flags.external_dir.clone().or(file.external_dir.clone());
    }
    spec
}

fn save_png(image: &Image, path: &Path) -> Result<()> {
    save_image(image, path, FileFormat::Png).with_context(|| format!("writing {}", path.display()))
}

/// Loads a non-empty manifest; records without a path are looked up as
/// `<id>.{png,jpeg,jpg}` next to the CSV.
fn load_batch_manifest(path: &Path, source: Option<Source>) -> Result<Manifest> {
    let mut manifest = load_manifest(path, source)?;
    if manifest.is_empty() {
        bail!("manifest {} has no records", path.display());
    }
    let dir = std::path::absolute(path)?
        .parent()
        .map(Path::to_path_buf)
        .unwrap_or_default();
    for id in manifest.attach_image_dir(&dir, &["png", "jpeg", "jpg"]) {
        log::warn!(
            "{id}: no image path and no {id}.png/.jpeg/.jpg in {}",
            dir.display()
        );
    }
    Ok(manifest)
}

fn tile_paths(dir: &Path, stem: &str) -> [PathBuf; 4] {
    Quadrants::SUFFIXES.map(|s| dir.join(format!("{stem}{s}.png")))
}

fn save_tiles(tiles: &Quadrants, dir: &Path, stem: &str) -> Result<()> {
    for (tile, path) in tiles.as_array().into_iter().zip(tile_paths(dir, stem)) {
        save_png(tile, &path)?;
    }
    Ok(())
}

fn write_failures(dir: &Path, failures: &[(String, String)]) -> Result<()> {
    let path = dir.join("failures.csv");
    let mut w =
        csv::Writer::from_path(&path).with_context(|| format!("writing {}", path.display()))?;
    w.write_record(["id", "error"])?;
    for (id, err) in failures {
        w.write_record([id, err])?;
    }
    w.flush()?;
    Ok(())
}

struct PreprocessOutcome {
    record: DatasetRecord,
    crop_box: CropBox,
    downscaled: (usize, usize),
    offset: (usize, usize),
}

fn preprocess_record(
    record: &DatasetRecord,
    config: &PreprocessConfig,
    out: &Path,
) -> Result<PreprocessOutcome> {
    let image = load_image(&record.path)?;
    let done = match (&config.downscale.algorithm, &config.downscale.external_dir) {
        (Algorithm::External, Some(dir)) => {
            // external downscales are taken as final; only pad and tile apply
            let small = load_image(external_path(dir, &record.id))?;
            finish_preprocess(&small, CropBox::full(image.width(), image.height()), config)?
        }
        _ => preprocess_one(&image, config)?,
    };
    let path = out.join(format!("{}.png", record.id));
    save_png(&done.image, &path)?;
    if let Some(tiles) = &done.tiles {
        save_tiles(tiles, out, &record.id)?;
    }
    Ok(PreprocessOutcome {
        record: DatasetRecord {
            path,
            ..record.clone()
        },
        crop_box: done.crop_box,
        downscaled: done.downscaled_dims,
        offset: (done.offset_x, done.offset_y),
    })
}

pub fn preprocess(args: PreprocessArgs, file: &PreprocessFile, workers: usize) -> Result<Status> {
    let manifest_path = require(args.manifest, file.manifest.clone(), "manifest")?;
    let out = require(args.out, file.out.clone(), "out")?;
    let source = parse_source(args.source.or(file.source.clone()))?;
    let (algorithm, taps) = match args.algorithm.or(file.algorithm.clone()) {
        Some(name) => parse_algorithm(&name)?,
        None if args.resample.external_dir.is_some() => (Algorithm::External, None),
        None => (Algorithm::Lanczos, None),
    };
    let config = PreprocessConfig {
        crop_threshold: pick(
            args.crop_threshold,
            file.crop_threshold,
            DEFAULT_CROP_THRESHOLD,
        ),
        downscale: resample_spec(algorithm, taps, &args.resample, &file.resample()),
        target_width: pick(args.target_width, file.target_width, DEFAULT_TARGET),
        target_height: pick(args.target_height, file.target_height, DEFAULT_TARGET),
        pad_fill: pick(args.pad_fill, file.pad_fill, 0),
        center_crop: args.center_crop || file.center_crop.unwrap_or(false),
        tile: args.tile || file.tile.unwrap_or(false),
    };
    config.validate()?;
    config.downscale.validate()?;
    let manifest = load_batch_manifest(&manifest_path, source)?;
    create_dir(&out)?;
    write_resolved(
        &out,
        "preprocess",
        workers,
        json!({ "manifest": manifest_path, "out": out, "pipeline": config }),
    )?;

    let results: Vec<Result<PreprocessOutcome>> = manifest
        .records
        .par_iter()
        .map(|r| preprocess_record(r, &config, &out))
        .collect();

    let mut done = Manifest::default();
    let mut failures = Vec::new();
    let mut log = csv::Writer::from_writer(Vec::new());
    log.write_record([
        "id",
        "crop_left",
        "crop_top",
        "crop_right",
        "crop_bottom",
        "downscaled_width",
        "downscaled_height",
        "offset_x",
        "offset_y",
    ])?;
    for (record, result) in manifest.records.iter().zip(results) {
        match result {
            Ok(o) => {
                let b = o.crop_box;
                log.write_record([
                    o.record.id.clone(),
                    b.left.to_string(),
                    b.top.to_string(),
                    b.right.to_string(),
                    b.bottom.to_string(),
                    o.downscaled.0.to_string(),
                    o.downscaled.1.to_string(),
                    o.offset.0.to_string(),
                    o.offset.1.to_string(),
                ])?;
                done.records.push(o.record);
            }
            Err(e) => {
                log::warn!("{}: {e:#}", record.id);
                failures.push((record.id.clone(), format!("{e:#}")));
            }
        }
    }
    done.write_csv(out.join("manifest.csv"))?;
    std::fs::write(out.join("preprocess.csv"), log.into_inner()?)?;
    write_failures(&out, &failures)?;
    println!(
        "preprocessed {} of {} image(s) into {}",
        done.len(),
        manifest.len(),
        out.display()
    );
    Ok(if failures.is_empty() {
        Status::Ok
    } else {
        Status::Partial
    })
}

pub fn roundtrip(args: RoundtripArgs, file: &RoundtripFile, workers: usize) -> Result<Status> {
    let manifest_path = require(args.manifest, file.manifest.clone(), "manifest")?;
    let out = require(args.out, file.out.clone(), "out")?;
    let source = parse_source(args.source.or(file.source.clone()))?;
    let names = args.algos.or(file.algos.clone()).unwrap_or_else(|| {
        Algorithm::NATIVE
            .iter()
            .map(|a| a.name().to_string())
            .collect()
    });
    let resample_file = file.resample();
    let external_dir = args
        .resample
        .external_dir
        .clone()
        .or(resample_file.external_dir.clone());
    let mut specs = Vec::new();
    for name in names.iter().filter(|n| !n.trim().is_empty()) {
        let (algorithm, taps) = parse_algorithm(name)?;
        specs.push(resample_spec(
            algorithm,
            taps,
            &args.resample,
            &resample_file,
        ));
    }
    if external_dir.is_some() && !specs.iter().any(|s| s.algorithm == Algorithm::External) {
        specs.push(resample_spec(
            Algorithm::External,
            None,
            &args.resample,
            &resample_file,
        ));
    }
    if specs.is_empty() {
        bail!("no algorithms selected");
    }
    for s in &specs {
        s.validate()?;
    }
    let mut labels: Vec<String> = specs.iter().map(ResampleSpec::label).collect();
    labels.sort();
    labels.dedup();
    if labels.len() != specs.len() {
        bail!("an algorithm is listed twice");
    }
    let config = RoundTripConfig {
        scale: pick(args.resample.scale, resample_file.scale, DEFAULT_SCALE),
        upscale_taps: pick(args.upscale_taps, file.upscale_taps, 4),
        ssim: SsimParams {
            window: pick(
                args.ssim_window,
                file.ssim_window,
                SsimParams::default().window,
            ),
            stride: pick(
                args.ssim_stride,
                file.ssim_stride,
                SsimParams::default().stride,
            ),
            dynamic_range: pick(
                args.ssim_dynamic_range,
                file.ssim_dynamic_range,
                SsimParams::default().dynamic_range,
            ),
            ..SsimParams::default()
        },
        psnr_peak: pick(args.psnr_peak, file.psnr_peak, DEFAULT_PEAK),
    };
    config.ssim.validate()?;
    if ![4, 6, 8].contains(&config.upscale_taps) {
        bail!(
            "upscale taps must be 4, 6 or 8, got {}",
            config.upscale_taps
        );
    }
    let manifest = load_batch_manifest(&manifest_path, source)?;
    if let Some(dir) = &external_dir {
        check_external_dir(dir, &manifest)?;
    }
    create_dir(&out)?;
    write_resolved(
        &out,
        "roundtrip",
        workers,
        json!({ "manifest": manifest_path, "out": out, "algorithms": specs, "roundtrip": config }),
    )?;
    let report = roundtrip_eval(&manifest, &specs, &config)?;
    report.write_all(&out, "roundtrip")?;
    print!(
        "{}\n{}",
        report.table(Metric::Psnr),
        report.table(Metric::Ssim)
    );
    for row in report.rows.iter().filter(|r| r.status != RowStatus::Ok) {
        log::warn!(
            "{} [{}]: {}",
            row.id,
            row.algorithm,
            row.message.as_deref().unwrap_or("")
        );
    }
    let failed = report.rows.iter().any(|r| r.status == RowStatus::Error);
    Ok(if failed { Status::Partial } else { Status::Ok })
}

fn parse_input(raw: &str) -> Result<(Source, PathBuf)> {
    let (source, path) = raw
        .split_once('=')
        .with_context(|| format!("input {raw:?} is not SOURCE=PATH"))?;
    let source = source.parse::<Source>().map_err(anyhow::Error::msg)?;
    Ok((source, PathBuf::from(path)))
}

pub fn split(args: SplitArgs, file: &SplitFile, workers: usize) -> Result<Status> {
    let inputs = if args.inputs.is_empty() {
        file.inputs.clone().unwrap_or_default()
    } else {
        args.inputs
    };
    if inputs.is_empty() {
        bail!("at least one --input SOURCE=PATH is required");
    }
    let out = require(args.out, file.out.clone(), "out")?;
    let test_frac = pick(args.test_frac, file.test_frac, DEFAULT_TEST_FRAC);
    let val_frac = pick(args.val_frac, file.val_frac, DEFAULT_VAL_FRAC);
    let seed = pick(args.seed, file.seed, 0);
    let parsed = inputs
        .iter()
        .map(|i| parse_input(i))
        .collect::<Result<Vec<_>>>()?;
    let manifests = parsed
        .iter()
        .map(|(source, path)| load_manifest(path, Some(*source)))
        .collect::<fundus_core::Result<Vec<_>>>()?;
    let all = amalgamate(&manifests)?;
    let split = stratified_split(&all, test_frac, val_frac, seed)?;
    let dir = out
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    create_dir(dir)?;
    split.write_csv(&out)?;
    write_resolved(
        dir,
        "split",
        workers,
        json!({
            "inputs": parsed.iter().map(|(s, p)| json!({"source": s.name(), "path": p})).collect::<Vec<_>>(),
            "out": out,
            "test_frac": test_frac,
            "val_frac": val_frac,
            "seed": seed,
        }),
    )?;
    let (train, val, test) = (
        split.class_counts_in(Split::Train),
        split.class_counts_in(Split::Val),
        split.class_counts_in(Split::Test),
    );
    println!(
        "{:<6} {:>8} {:>8} {:>8} {:>8}",
        "class", "train", "val", "test", "total"
    );
    for c in 0..NUM_CLASSES {
        println!(
            "{c:<6} {:>8} {:>8} {:>8} {:>8}",
            train[c],
            val[c],
            test[c],
            train[c] + val[c] + test[c]
        );
    }
    println!("{} records written to {}", split.len(), out.display());
    Ok(Status::Ok)
}

pub fn tile(args: TileArgs, file: &TileFile, workers: usize) -> Result<Status> {
    let out = require(args.out, file.out.clone(), "out")?;
    create_dir(&out)?;
    write_resolved(
        &out,
        "tile",
        workers,
        json!({ "images": args.images, "out": out }),
    )?;
    let results: Vec<Result<()>> = args
        .images
        .par_iter()
        .map(|path| {
            let stem = path
                .file_stem()
                .with_context(|| format!("{} has no file name", path.display()))?
                .to_string_lossy()
                .into_owned();
            let tiles = tile_quadrants(&load_image(path)?)?;
            save_tiles(&tiles, &out, &stem)
        })
        .collect();
    let mut failures = Vec::new();
    for (path, r) in args.images.iter().zip(results) {
        if let Err(e) = r {
            log::warn!("{}: {e:#}", path.display());
            failures.push((path.display().to_string(), format!("{e:#}")));
        }
    }
    write_failures(&out, &failures)?;
    println!(
        "tiled {} of {} image(s)",
        args.images.len() - failures.len(),
        args.images.len()
    );
    Ok(if failures.is_empty() {
        Status::Ok
    } else {
        Status::Partial
    })
}

pub fn metrics(args: MetricsArgs, file: &MetricsFile, workers: usize) -> Result<Status> {
    let path = require(args.predictions, file.predictions.clone(), "predictions")?;
    let report = evaluate(&load_predictions(&path)?)?;
    if let Some(out) = args.out.or(file.out.clone()) {
        create_dir(&out)?;
        write_resolved(
            &out,
            "metrics",
            workers,
            json!({ "predictions": path, "out": out }),
        )?;
        std::fs::write(
            out.join("metrics.json"),
            serde_json::to_string_pretty(&report)? + "\n",
        )?;
        std::fs::write(out.join("metrics.csv"), report.to_csv())?;
    }
    if args.json {
        println!("{}", serde_json::to_string_pretty(&report)?);
    } else {
        println!("accuracy sensitivity specificity");
        println!("{}", report.binary_metrics().summary_row());
    }
    Ok(Status::Ok)
}

fn load_pair(a: &Path, b: &Path) -> Result<(Image, Image)> {
    Ok((load_image(a)?, load_image(b)?))
}

pub fn psnr(args: PsnrArgs, file: &PsnrFile, workers: usize) -> Result<Status> {
    let peak = pick(args.peak, file.peak, DEFAULT_PEAK);
    let (x, y) = load_pair(&args.reference, &args.test)?;
    let value = iqa::psnr(&x, &y, peak)?;
    if let Some(out) = args.out.or(file.out.clone()) {
        create_dir(&out)?;
        write_resolved(
            &out,
            "psnr",
            workers,
            json!({ "reference": args.reference, "test": args.test, "peak": peak, "psnr": value }),
        )?;
    }
    println!("{value}");
    Ok(Status::Ok)
}

pub fn ssim(args: SsimArgs, file: &SsimFile, workers: usize) -> Result<Status> {
    let d = SsimParams::default();
    let params = SsimParams {
        window: pick(args.window, file.window, d.window),
        stride: pick(args.stride, file.stride, d.stride),
        dynamic_range: pick(args.dynamic_range, file.dynamic_range, d.dynamic_range),
        ..d
    };
    params.validate()?;
    let (x, y) = load_pair(&args.reference, &args.test)?;
    let value = iqa::ssim(&x, &y, &params)?;
    if let Some(out) = args.out.or(file.out.clone()) {
        create_dir(&out)?;
        write_resolved(
            &out,
            "ssim",
            workers,
            json!({ "reference": args.reference, "test": args.test, "params": params, "ssim": value }),
        )?;
    }
    println!("{value}");
    Ok(Status::Ok)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn algorithm_names() {
        assert_eq!(
            parse_algorithm("lanczos6").unwrap(),
            (Algorithm::Lanczos, Some(6))
        );
        assert_eq!(
            parse_algorithm("Lanczos").unwrap(),
            (Algorithm::Lanczos, None)
        );
        assert_eq!(parse_algorithm("lid").unwrap(), (Algorithm::External, None));
        assert!(parse_algorithm("lanczosx").is_err());
        assert!(parse_algorithm("area").is_err());
    }

    #[test]
    fn split_inputs() {
        let (s, p) = parse_input("idrid=a=b.csv").unwrap();
        assert_eq!(s, Source::Idrid);
        assert_eq!(p, PathBuf::from("a=b.csv"));
        assert!(parse_input("labels.csv").is_err());
        assert!(parse_input("other=x.csv").is_err());
    }

    #[test]
    fn flags_override_file_for_specs() {
        let file = ResampleFile {
            scale: Some(4),
            lanczos_taps: Some(8),
            antialias: Some(false),
            ..Default::default()
        };
        let flags = ResampleArgs {
            scale: Some(2),
            ..Default::default()
        };
        let spec = resample_spec(Algorithm::Lanczos, None, &flags, &file);
        assert_eq!(
            (spec.scale, spec.lanczos_taps, spec.antialias),
            (2, 8, false)
        );
        let spec = resample_spec(Algorithm::Lanczos, Some(6), &flags, &file);
        assert_eq!(spec.lanczos_taps, 6);
    }
}
