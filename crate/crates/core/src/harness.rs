//! Round-trip evaluation of downscalers.
//!
//! Each original is downscaled by the configured factor, brought back to
//! full size with a Lanczos upscaler common to all algorithms, and compared
//! with the original by PSNR and SSIM. Rows are aggregated per
//! `(class, algorithm)`.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{DatasetRecord, Manifest, NUM_CLASSES};
use crate::error::{Error, Result};
use crate::image::{CropBox, Image};
use crate::io::load_image;
use crate::iqa::{psnr, ssim, NeumaierSum, Psnr, SsimParams, DEFAULT_PEAK};
use crate::resample::external::load_external;
use crate::resample::{downscale, upscale_lanczos, Algorithm, ResampleSpec, DEFAULT_SCALE};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundTripConfig {
    pub scale: u32,
    pub upscale_taps: u32,
    pub ssim: SsimParams,
    pub psnr_peak: f64,
}

impl Default for RoundTripConfig {
    fn default() -> Self {
        RoundTripConfig {
            scale: DEFAULT_SCALE,
            upscale_taps: 4,
            ssim: SsimParams::default(),
            psnr_peak: DEFAULT_PEAK,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RoundTripScore {
    pub psnr: Psnr,
    pub ssim: f64,
}

/// Upscales `downscaled` back and scores it against `original`. An upscale
/// larger than the original (from rounded-up downscale sizes) is cropped
/// from the top-left corner.
pub fn score_downscaled(
    original: &Image,
    downscaled: &Image,
    config: &RoundTripConfig,
) -> Result<RoundTripScore> {
    let up = upscale_lanczos(downscaled, config.scale, config.upscale_taps)?;
    let (w, h) = original.dimensions();
    if up.width() < w || up.height() < h || up.channels() != original.channels() {
        return Err(Error::DimensionMismatch(format!(
            "upscaled image {}x{}x{} cannot cover original {}x{}x{}",
            up.width(),
            up.height(),
            up.channels(),
            w,
            h,
            original.channels()
        )));
    }
    let restored = if up.dimensions() == (w, h) {
        up
    } else {
        up.crop(CropBox::full(w, h))?
    };
    Ok(RoundTripScore {
        psnr: psnr(original, &restored, config.psnr_peak)?,
        ssim: ssim(original, &restored, &config.ssim)?,
    })
}

/// Downscales with `spec` at `config.scale`, then scores the round trip.
pub fn roundtrip_one(
    image: &Image,
    spec: &ResampleSpec,
    config: &RoundTripConfig,
) -> Result<RoundTripScore> {
    let s = config.scale as usize;
    if image.width() < s || image.height() < s {
        return Err(Error::InvalidImage(format!(
            "{}x{} image is smaller than the scale factor {s}",
            image.width(),
            image.height()
        )));
    }
    let spec = ResampleSpec {
        scale: config.scale,
        ..spec.clone()
    };
    let small = downscale(image, &spec)?;
    score_downscaled(image, &small, config)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RowStatus {
    Ok,
    Warning,
    Error,
}

impl RowStatus {
    pub fn name(&self) -> &'static str {
        match self {
            RowStatus::Ok => "ok",
            RowStatus::Warning => "warning",
            RowStatus::Error => "error",
        }
    }
}

/// One image scored with one algorithm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QualityRow {
    pub id: String,
    pub label: u8,
    pub algorithm: String,
    pub psnr: Option<Psnr>,
    pub ssim: Option<f64>,
    pub status: RowStatus,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub message: Option<String>,
}

impl QualityRow {
    fn error(record: &DatasetRecord, algorithm: &str, message: String) -> Self {
        QualityRow {
            id: record.id.clone(),
            label: record.label,
            algorithm: algorithm.to_string(),
            psnr: None,
            ssim: None,
            status: RowStatus::Error,
            message: Some(message),
        }
    }

    pub fn is_scored(&self) -> bool {
        self.status != RowStatus::Error
    }
}

/// Mean metrics of the rows for one `(class, algorithm)` pair. Infinite
/// PSNR values are excluded from the PSNR mean and counted separately.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub label: u8,
    pub algorithm: String,
    pub psnr_mean: Option<f64>,
    pub psnr_count: usize,
    pub psnr_infinite: usize,
    pub ssim_mean: Option<f64>,
    pub ssim_count: usize,
    pub errors: usize,
}

/// Settings recorded alongside every report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportConfig {
    pub scale: u32,
    pub upscaler: String,
    pub specs: Vec<ResampleSpec>,
    pub ssim: SsimParams,
    pub psnr_peak: f64,
    pub mse_pooling: String,
    pub ssim_channels: String,
    pub dimension_reconciliation: String,
}

impl ReportConfig {
    pub fn new(specs: &[ResampleSpec], config: &RoundTripConfig) -> Self {
        ReportConfig {
            scale: config.scale,
            upscaler: format!("lanczos{}", config.upscale_taps),
            specs: specs.to_vec(),
            ssim: config.ssim,
            psnr_peak: config.psnr_peak,
            mse_pooling: "all channels pooled".into(),
            ssim_channels: "per-channel SSIM averaged".into(),
            dimension_reconciliation: "upscaled image cropped top-left to original size".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundTripReport {
    pub config: ReportConfig,
    pub rows: Vec<QualityRow>,
    pub aggregates: Vec<Aggregate>,
}

fn mean(values: impl Iterator<Item = f64>) -> (Option<f64>, usize) {
    let mut acc = NeumaierSum::default();
    let mut n = 0;
    for v in values {
        acc.add(v);
        n += 1;
    }
    ((n > 0).then(|| acc.total() / n as f64), n)
}

/// Groups rows by `(label, algorithm)`. Algorithms appear in the order of
/// `algorithms`; any others follow in first-seen order.
pub fn aggregate(rows: &[QualityRow], algorithms: &[String]) -> Vec<Aggregate> {
    let mut order: Vec<String> = algorithms.to_vec();
    for r in rows {
        if !order.contains(&r.algorithm) {
            order.push(r.algorithm.clone());
        }
    }
    let mut groups: BTreeMap<(u8, usize), Vec<&QualityRow>> = BTreeMap::new();
    for r in rows {
        let a = order.iter().position(|x| *x == r.algorithm).unwrap();
        groups.entry((r.label, a)).or_default().push(r);
    }
    groups
        .into_iter()
        .map(|((label, a), rows)| {
            let scored: Vec<&&QualityRow> = rows.iter().filter(|r| r.is_scored()).collect();
            let (psnr_mean, psnr_count) = mean(
                scored
                    .iter()
                    .filter_map(|r| r.psnr)
                    .filter(|p| !p.is_infinite())
                    .map(|p| p.value()),
            );
            let psnr_infinite = scored
                .iter()
                .filter(|r| r.psnr.is_some_and(|p| p.is_infinite()))
                .count();
            let (ssim_mean, ssim_count) = mean(scored.iter().filter_map(|r| r.ssim));
            Aggregate {
                label,
                algorithm: order[a].clone(),
                psnr_mean,
                psnr_count,
                psnr_infinite,
                ssim_mean,
                ssim_count,
                errors: rows.len() - scored.len(),
            }
        })
        .collect()
}

fn score_record(
    record: &DatasetRecord,
    specs: &[ResampleSpec],
    labels: &[String],
    config: &RoundTripConfig,
) -> (bool, Vec<QualityRow>) {
    let original = match load_image(&record.path) {
        Ok(img) => img,
        Err(e) => {
            let rows = labels
                .iter()
                .map(|l| QualityRow::error(record, l, e.to_string()))
                .collect();
            return (false, rows);
        }
    };
    let rows = specs
        .iter()
        .zip(labels)
        .map(|(spec, label)| {
            let scored = match (&spec.algorithm, &spec.external_dir) {
                (Algorithm::External, Some(dir)) => {
                    load_external(dir, record, original.dimensions(), config.scale).and_then(
                        |(small, warning)| {
                            score_downscaled(&original, &small, config).map(|s| (s, warning))
                        },
                    )
                }
                _ => roundtrip_one(&original, spec, config).map(|s| (s, None)),
            };
            match scored {
                Ok((score, warning)) => QualityRow {
                    id: record.id.clone(),
                    label: record.label,
                    algorithm: label.clone(),
                    psnr: Some(score.psnr),
                    ssim: Some(score.ssim),
                    status: if warning.is_some() {
                        RowStatus::Warning
                    } else {
                        RowStatus::Ok
                    },
                    message: warning.map(|w| w.to_string()),
                },
                Err(e) => QualityRow::error(record, label, e.to_string()),
            }
        })
        .collect();
    (true, rows)
}

/// Scores every `(record, spec)` pair. Per-image failures become error rows;
/// rows follow manifest order, then spec order.
pub fn roundtrip_eval(
    manifest: &Manifest,
    specs: &[ResampleSpec],
    config: &RoundTripConfig,
) -> Result<RoundTripReport> {
    if manifest.is_empty() {
        return Err(Error::Empty("manifest has no records".into()));
    }
    if specs.is_empty() {
        return Err(Error::Empty("no algorithms selected".into()));
    }
    for spec in specs {
        spec.validate()?;
    }
    let labels: Vec<String> = specs.iter().map(ResampleSpec::label).collect();
    let results: Vec<(bool, Vec<QualityRow>)> = manifest
        .records
        .par_iter()
        .map(|r| score_record(r, specs, &labels, config))
        .collect();
    if !results.iter().any(|(readable, _)| *readable) {
        return Err(Error::Empty("no readable images in manifest".into()));
    }
    let rows: Vec<QualityRow> = results.into_iter().flat_map(|(_, rows)| rows).collect();
    let aggregates = aggregate(&rows, &labels);
    Ok(RoundTripReport {
        config: ReportConfig::new(specs, config),
        rows,
        aggregates,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankEntry {
    pub algorithm: String,
    pub value: f64,
    /// Another algorithm in this class has exactly the same value.
    pub tied: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassRanking {
    pub label: u8,
    pub by_psnr: Vec<RankEntry>,
    pub by_ssim: Vec<RankEntry>,
}

fn rank(mut entries: Vec<(String, f64)>) -> Vec<RankEntry> {
    entries.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    let tied: Vec<bool> = (0..entries.len())
        .map(|i| {
            (i > 0 && entries[i - 1].1 == entries[i].1)
                || (i + 1 < entries.len() && entries[i + 1].1 == entries[i].1)
        })
        .collect();
    entries
        .into_iter()
        .zip(tied)
        .map(|((algorithm, value), tied)| RankEntry {
            algorithm,
            value,
            tied,
        })
        .collect()
}

/// Orders algorithms per class by descending mean PSNR and mean SSIM; equal
/// values are ordered by name and flagged.
pub fn rank_aggregates(aggregates: &[Aggregate]) -> Vec<ClassRanking> {
    let mut labels: Vec<u8> = aggregates.iter().map(|a| a.label).collect();
    labels.sort_unstable();
    labels.dedup();
    labels
        .into_iter()
        .map(|label| {
            let in_class = || aggregates.iter().filter(move |a| a.label == label);
            ClassRanking {
                label,
                by_psnr: rank(
                    in_class()
                        .filter_map(|a| a.psnr_mean.map(|v| (a.algorithm.clone(), v)))
                        .collect(),
                ),
                by_ssim: rank(
                    in_class()
                        .filter_map(|a| a.ssim_mean.map(|v| (a.algorithm.clone(), v)))
                        .collect(),
                ),
            }
        })
        .collect()
}

pub fn rank_algorithms(report: &RoundTripReport) -> Vec<ClassRanking> {
    rank_aggregates(&report.aggregates)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    Psnr,
    Ssim,
}

impl RoundTripReport {
    fn algorithm_order(&self) -> Vec<String> {
        let mut order: Vec<String> = self.config.specs.iter().map(ResampleSpec::label).collect();
        for a in &self.aggregates {
            if !order.contains(&a.algorithm) {
                order.push(a.algorithm.clone());
            }
        }
        order
    }

    /// Per-row CSV: `id,label,algorithm,psnr,ssim,status,message`.
    pub fn rows_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record([
            "id",
            "label",
            "algorithm",
            "psnr",
            "ssim",
            "status",
            "message",
        ])
        .expect("writing to memory");
        for r in &self.rows {
            w.write_record([
                r.id.clone(),
                r.label.to_string(),
                r.algorithm.clone(),
                r.psnr.map(|p| p.to_string()).unwrap_or_default(),
                r.ssim.map(|s| s.to_string()).unwrap_or_default(),
                r.status.name().to_string(),
                r.message.clone().unwrap_or_default(),
            ])
            .expect("writing to memory");
        }
        String::from_utf8(w.into_inner().expect("flushing memory writer")).expect("utf-8 csv")
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Class-by-algorithm table of mean values, six decimals.
    pub fn table(&self, metric: Metric) -> String {
        let algos = self.algorithm_order();
        let width = algos.iter().map(|a| a.len()).max().unwrap_or(0).max(10);
        let mut out = String::new();
        let title = match metric {
            Metric::Psnr => "Mean PSNR (dB)",
            Metric::Ssim => "Mean SSIM",
        };
        let _ = writeln!(out, "{title}");
        let _ = write!(out, "{:<6}", "Class");
        for a in &algos {
            let _ = write!(out, " {a:>width$}");
        }
        out.push('\n');
        for label in 0..NUM_CLASSES as u8 {
            let in_class: Vec<&Aggregate> = self
                .aggregates
                .iter()
                .filter(|a| a.label == label)
                .collect();
            if in_class.is_empty() {
                continue;
            }
            let _ = write!(out, "{label:<6}");
            for algo in &algos {
                let v = in_class
                    .iter()
                    .find(|a| a.algorithm == *algo)
                    .and_then(|a| match metric {
                        Metric::Psnr => a.psnr_mean,
                        Metric::Ssim => a.ssim_mean,
                    });
                match v {
                    Some(v) => {
                        let _ = write!(out, " {v:>width$.6}");
                    }
                    None => {
                        let _ = write!(out, " {:>width$}", "-");
                    }
                }
            }
            out.push('\n');
        }
        out
    }

    /// Writes `<stem>.csv`, `<stem>.json` and `<stem>.txt` into `dir`.
    pub fn write_all(&self, dir: &Path, stem: &str) -> Result<()> {
        let write = |name: String, body: String| {
            let p = dir.join(name);
            std::fs::write(&p, body).map_err(|e| Error::io(&p, e))
        };
        write(format!("{stem}.csv"), self.rows_csv())?;
        write(format!("{stem}.json"), self.to_json())?;
        let text = format!("{}\n{}", self.table(Metric::Psnr), self.table(Metric::Ssim));
        write(format!("{stem}.txt"), text)
    }
}
