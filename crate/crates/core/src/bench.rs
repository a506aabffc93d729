//! Ideal-condition (loss = 0) benchmark: every scheme decodes its own
//! ground-truth label and the leftover error is pure quantization error.
//!
//! Two drivers share the same per-sample evaluation:
//! [`run_ideal`] over annotation records and [`run_montecarlo`] over
//! synthetic landmarks with uniform sub-pixel offsets.
//!
//! Synthetic landmarks are drawn from a ChaCha8 generator seeded with
//! `seed`, one stream per sample index, so results do not depend on how
//! samples are scheduled.

use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::codecs::{roundtrip_error, CodecConfig, Scheme};
use crate::datasets::AnnotationRecord;
use crate::error::{Error, Result};
use crate::geometry::{
    crop_from_box, crop_from_landmarks, AffineTransform, FaceSample, LandmarkSet, Point2, Space, DEFAULT_INPUT_SIZE,
};
use crate::metrics::{
    ced_auc_values, ced_curve_values, failure_rate_values, landmark_distance, nme_from_errors, MetricsConfig,
    Normalization, PerImageError, DEFAULT_THRESHOLD,
};

pub const DEFAULT_SEED: u64 = 7;
pub const DEFAULT_CROP_MARGIN: f64 = 0.25;

/// Synthetic samples evaluated per parallel batch.
const MC_BATCH: u64 = 1 << 15;

/// Expected 2-D round-off distance `n·(√2 + asinh 1)/6` for offsets uniform
/// on a pixel, in raw pixels.
pub fn analytic_direct_error(n: f64) -> f64 {
    n * (std::f64::consts::SQRT_2 + 1f64.asinh()) / 6.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "kind")]
pub enum CropSource {
    /// Square box around the landmarks.
    Landmarks,
    /// Square box around the annotated face box.
    Bbox { inclusive: bool },
}

impl FromStr for CropSource {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "landmarks" => Ok(CropSource::Landmarks),
            "bbox" => Ok(CropSource::Bbox { inclusive: true }),
            _ => Err(Error::Config(format!(
                "unknown crop source `{s}` (valid: landmarks, bbox)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchConfig {
    pub schemes: Vec<Scheme>,
    pub codec: CodecConfig,
    pub metrics: MetricsConfig,
    pub crop_margin: f64,
    pub crop_source: CropSource,
    pub input_size: (u32, u32),
    pub seed: u64,
    pub mc_samples: usize,
    pub mc_landmarks: usize,
    pub mc_n: f64,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            schemes: Scheme::ALL.to_vec(),
            codec: CodecConfig::default(),
            metrics: MetricsConfig {
                norm: Normalization::Indices(60, 72),
                threshold: DEFAULT_THRESHOLD,
                include_invalid: false,
            },
            crop_margin: DEFAULT_CROP_MARGIN,
            crop_source: CropSource::Landmarks,
            input_size: DEFAULT_INPUT_SIZE,
            seed: DEFAULT_SEED,
            mc_samples: 100_000,
            mc_landmarks: 1,
            mc_n: 4.0,
        }
    }
}

impl BenchConfig {
    fn validate(&self) -> Result<()> {
        if self.schemes.is_empty() {
            return Err(Error::Config("no schemes selected".into()));
        }
        self.codec.validate()?;
        self.metrics.validate()?;
        if !(self.crop_margin >= 0.0) {
            return Err(Error::Config("crop margin must be >= 0".into()));
        }
        Ok(())
    }

    fn sorted_schemes(&self) -> Vec<Scheme> {
        let mut s = self.schemes.clone();
        s.sort();
        s.dedup();
        s
    }
}

/// One row of a report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchemeReport {
    pub scheme: Scheme,
    /// Mean per-image NME ×100.
    pub nme_percent: f64,
    pub auc: f64,
    pub fr: f64,
    pub ced: Vec<(f64, f64)>,
    /// WOM occupancy conflicts summed over images.
    pub conflicts: usize,
    pub clamped_points: usize,
    pub n_images: usize,
    pub n_points: usize,
    /// Mean per-landmark error in raw pixels.
    pub mean_px_error: f64,
    /// Standard error of `mean_px_error`.
    pub stderr_px: f64,
    /// Summed raw-pixel error of landmarks whose WOM entry was not overwritten.
    pub unconflicted_error: f64,
    /// Per-image errors sorted by id. Empty for synthetic runs.
    #[serde(skip)]
    pub per_image: Vec<PerImageError>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BenchMode {
    Ideal,
    Synthetic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub mode: BenchMode,
    pub dataset: String,
    pub n_samples: usize,
    /// Degenerate samples excluded from every row.
    pub skipped: usize,
    pub config: BenchConfig,
    /// `analytic_direct_error(mc_n)` for synthetic runs.
    pub analytic_direct_px: Option<f64>,
    pub rows: Vec<SchemeReport>,
}

impl BenchReport {
    pub fn row(&self, scheme: Scheme) -> Option<&SchemeReport> {
        self.rows.iter().find(|r| r.scheme == scheme)
    }
}

/// Build the raw→input crop and normaliser for one annotation.
pub fn prepare_sample(rec: &AnnotationRecord, cfg: &BenchConfig) -> Result<FaceSample> {
    let crop = match cfg.crop_source {
        CropSource::Landmarks => crop_from_landmarks(&rec.landmarks, cfg.crop_margin, cfg.input_size)?,
        CropSource::Bbox { inclusive } => {
            let b = rec
                .bbox
                .ok_or_else(|| Error::Config(format!("record `{}` has no bbox", rec.id)))?;
            let extra = if inclusive { 1.0 } else { 0.0 };
            crop_from_box(
                [b[0], b[1], b[2] + extra, b[3] + extra],
                cfg.crop_margin,
                cfg.input_size,
            )?
        }
    };
    let d = match cfg.metrics.norm {
        Normalization::Indices(a, b) => landmark_distance(&rec.landmarks, (a, b))?,
        Normalization::Explicit => {
            return Err(Error::Config(
                "annotation records need index-based normalisation".into(),
            ))
        }
    };
    FaceSample::new(rec.id.clone(), rec.landmarks.clone(), crop, cfg.input_size, d)
}

struct SampleOutcome {
    nme: f64,
    errors: Vec<f64>,
    valid: Vec<bool>,
    overwritten: Vec<bool>,
    conflicts: usize,
    clamped: usize,
}

fn evaluate(sample: &FaceSample, codec: &CodecConfig, schemes: &[Scheme]) -> Result<Vec<SampleOutcome>> {
    schemes
        .iter()
        .map(|&scheme| {
            let rt = roundtrip_error(sample, &codec.with_scheme(scheme))?;
            let per_point: Vec<Option<f64>> = rt.errors.iter().zip(&rt.valid).map(|(&e, &v)| v.then_some(e)).collect();
            let nme = nme_from_errors(&per_point, sample.norm_distance_raw)?;
            let clamped = rt.clamped_points();
            Ok(SampleOutcome {
                nme,
                overwritten: rt.flags.iter().map(|f| f.overwritten).collect(),
                errors: rt.errors,
                valid: rt.valid,
                conflicts: rt.conflict_count,
                clamped,
            })
        })
        .collect()
}

/// Running totals for one scheme, fed samples in a fixed order.
#[derive(Default)]
struct Totals {
    nmes: Vec<f64>,
    per_image: Vec<PerImageError>,
    sum: f64,
    sq: f64,
    count: usize,
    unconflicted: f64,
    conflicts: usize,
    clamped: usize,
}

impl Totals {
    fn push(&mut self, id: Option<&str>, o: SampleOutcome) {
        for k in 0..o.errors.len() {
            if o.valid[k] {
                let e = o.errors[k];
                self.sum += e;
                self.sq += e * e;
                self.count += 1;
                if !o.overwritten[k] {
                    self.unconflicted += e;
                }
            }
        }
        self.conflicts += o.conflicts;
        self.clamped += o.clamped;
        self.nmes.push(o.nme);
        if let Some(id) = id {
            self.per_image.push(PerImageError {
                id: id.to_string(),
                nme: o.nme,
                per_point: o.errors,
            });
        }
    }

    fn finish(self, scheme: Scheme, threshold: f64) -> Result<SchemeReport> {
        let n = self.count as f64;
        let mean = if self.count > 0 { self.sum / n } else { 0.0 };
        let stderr = if self.count > 1 {
            let var = ((self.sq - self.sum * mean) / (n - 1.0)).max(0.0);
            (var / n).sqrt()
        } else {
            0.0
        };
        let nme_sum: f64 = self.nmes.iter().sum();
        Ok(SchemeReport {
            scheme,
            nme_percent: 100.0 * nme_sum / self.nmes.len() as f64,
            auc: ced_auc_values(&self.nmes, threshold)?,
            fr: failure_rate_values(&self.nmes, threshold)?,
            ced: ced_curve_values(&self.nmes, threshold)?,
            conflicts: self.conflicts,
            clamped_points: self.clamped,
            n_images: self.nmes.len(),
            n_points: self.count,
            mean_px_error: mean,
            stderr_px: stderr,
            unconflicted_error: self.unconflicted,
            per_image: self.per_image,
        })
    }
}

fn finish_all(schemes: &[Scheme], totals: Vec<Totals>, threshold: f64) -> Result<Vec<SchemeReport>> {
    schemes
        .iter()
        .zip(totals)
        .map(|(&s, t)| t.finish(s, threshold))
        .collect()
}

/// Table-1 style evaluation over annotation records.
///
/// Samples whose crop or normaliser is degenerate are skipped and counted.
/// Per-sample work runs in parallel; results are reduced in record order
/// after sorting by id, so record order does not affect the output.
pub fn run_ideal(dataset_name: &str, records: &[AnnotationRecord], cfg: &BenchConfig) -> Result<BenchReport> {
    cfg.validate()?;
    if records.is_empty() {
        return Err(Error::Config("dataset is empty".into()));
    }
    let schemes = cfg.sorted_schemes();
    let mut order: Vec<usize> = (0..records.len()).collect();
    order.sort_by(|&a, &b| records[a].id.cmp(&records[b].id).then(a.cmp(&b)));

    let results: Vec<Result<Option<(String, Vec<SampleOutcome>)>>> = order
        .par_iter()
        .map(|&i| {
            let rec = &records[i];
            let sample = match prepare_sample(rec, cfg) {
                Ok(s) => s,
                Err(Error::Degenerate(_)) => return Ok(None),
                Err(e) => return Err(e),
            };
            match evaluate(&sample, &cfg.codec, &schemes) {
                Ok(o) => Ok(Some((rec.id.clone(), o))),
                Err(Error::Degenerate(_)) => Ok(None),
                Err(e) => Err(e),
            }
        })
        .collect();

    let mut totals: Vec<Totals> = schemes.iter().map(|_| Totals::default()).collect();
    let mut skipped = 0;
    for r in results {
        match r? {
            Some((id, outcomes)) => {
                for (t, o) in totals.iter_mut().zip(outcomes) {
                    t.push(Some(&id), o);
                }
            }
            None => skipped += 1,
        }
    }
    if totals[0].nmes.is_empty() {
        return Err(Error::Degenerate("every sample was degenerate".into()));
    }
    Ok(BenchReport {
        mode: BenchMode::Ideal,
        dataset: dataset_name.to_string(),
        n_samples: records.len(),
        skipped,
        config: cfg.clone(),
        analytic_direct_px: None,
        rows: finish_all(&schemes, totals, cfg.metrics.threshold)?,
    })
}

/// Synthetic face `i`: `mc_landmarks` points with integer cells uniform on
/// `[1, w−2] × [1, h−2]` and offsets uniform on `[0, 1)²`, placed in a raw
/// frame that is `mc_n` times the heatmap.
pub fn synthetic_sample(cfg: &BenchConfig, index: u64) -> Result<FaceSample> {
    let (w, h) = cfg.codec.heatmap_shape;
    if w < 3 || h < 3 {
        return Err(Error::Config("synthetic mode needs a heatmap of at least 3x3".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(index);
    let n = cfg.mc_n;
    let points = (0..cfg.mc_landmarks)
        .map(|_| {
            let cx = rng.gen_range(1..=w - 2) as f64;
            let cy = rng.gen_range(1..=h - 2) as f64;
            let ox: f64 = rng.gen();
            let oy: f64 = rng.gen();
            Point2::new((cx + ox) * n, (cy + oy) * n)
        })
        .collect();
    let raw = LandmarkSet::new(points, Space::Raw)?;
    let factor = cfg.input_size.0 as f64 / w as f64;
    let crop = AffineTransform::scale(factor / n)?;
    FaceSample::new(format!("synthetic-{index:09}"), raw, crop, cfg.input_size, w as f64 * n)
}

/// Monte-Carlo estimate of each scheme's quantization error.
pub fn run_montecarlo(cfg: &BenchConfig) -> Result<BenchReport> {
    cfg.validate()?;
    if cfg.mc_samples == 0 || cfg.mc_landmarks == 0 {
        return Err(Error::Config(
            "synthetic mode needs at least one sample and one landmark".into(),
        ));
    }
    if !(cfg.mc_n > 0.0) || !cfg.mc_n.is_finite() {
        return Err(Error::Config(format!(
            "downsample factor must be positive, got {}",
            cfg.mc_n
        )));
    }
    if cfg.input_size.0 != cfg.input_size.1 {
        return Err(Error::Config("synthetic mode needs a square input".into()));
    }
    let schemes = cfg.sorted_schemes();
    let mut totals: Vec<Totals> = schemes.iter().map(|_| Totals::default()).collect();
    let total = cfg.mc_samples as u64;
    let mut start = 0;
    // bounded batches keep memory flat; each batch is reduced in index order
    while start < total {
        let end = (start + MC_BATCH).min(total);
        let batch: Vec<Result<Vec<SampleOutcome>>> = (start..end)
            .into_par_iter()
            .map(|i| evaluate(&synthetic_sample(cfg, i)?, &cfg.codec, &schemes))
            .collect();
        for outcomes in batch {
            for (t, o) in totals.iter_mut().zip(outcomes?) {
                t.push(None, o);
            }
        }
        start = end;
    }
    Ok(BenchReport {
        mode: BenchMode::Synthetic,
        dataset: "synthetic".into(),
        n_samples: cfg.mc_samples,
        skipped: 0,
        config: cfg.clone(),
        analytic_direct_px: Some(analytic_direct_error(cfg.mc_n)),
        rows: finish_all(&schemes, totals, cfg.metrics.threshold)?,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Table,
    Csv,
    Json,
}

impl FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "table" => Ok(Self::Table),
            "csv" => Ok(Self::Csv),
            "json" => Ok(Self::Json),
            _ => Err(Error::Config(format!("unknown format `{s}` (valid: table, csv, json)"))),
        }
    }
}

const CSV_HEADER: &str = "scheme,nme_percent,auc10,fr10_percent,conflicts,clamped_points,n_images";

pub fn emit_report(r: &BenchReport, format: ReportFormat) -> String {
    let synthetic = r.mode == BenchMode::Synthetic;
    match format {
        ReportFormat::Json => {
            let mut s = serde_json::to_string_pretty(r).expect("report serializes");
            s.push('\n');
            s
        }
        ReportFormat::Csv => {
            let mut out = String::from(CSV_HEADER);
            if synthetic {
                out.push_str(",mean_px_error,stderr_px");
            }
            out.push('\n');
            for row in &r.rows {
                out.push_str(&format!(
                    "{},{},{},{},{},{},{}",
                    row.scheme,
                    row.nme_percent,
                    row.auc,
                    100.0 * row.fr,
                    row.conflicts,
                    row.clamped_points,
                    row.n_images
                ));
                if synthetic {
                    out.push_str(&format!(",{},{}", row.mean_px_error, row.stderr_px));
                }
                out.push('\n');
            }
            out
        }
        ReportFormat::Table => {
            let mut out = format!(
                "dataset: {}  samples: {}  skipped: {}  mode: {}\n",
                r.dataset,
                r.n_samples,
                r.skipped,
                if synthetic { "synthetic" } else { "ideal" }
            );
            out.push_str(&format!(
                "{:<8}{:>10}{:>9}{:>10}{:>11}{:>9}",
                "scheme", "nme(%)", "auc10", "fr10(%)", "conflicts", "clamped"
            ));
            if synthetic {
                out.push_str(&format!("{:>13}{:>12}", "mean_px", "stderr_px"));
            }
            out.push('\n');
            for row in &r.rows {
                out.push_str(&format!(
                    "{:<8}{:>10.3}{:>9.3}{:>10.3}{:>11}{:>9}",
                    row.scheme.name().to_uppercase(),
                    row.nme_percent,
                    row.auc,
                    100.0 * row.fr,
                    row.conflicts,
                    row.clamped_points
                ));
                if synthetic {
                    out.push_str(&format!("{:>13.6}{:>12.6}", row.mean_px_error, row.stderr_px));
                }
                out.push('\n');
            }
            if let Some(a) = r.analytic_direct_px {
                out.push_str(&format!(
                    "analytic DIRECT mean error at n = {}: {:.6} px\n",
                    r.config.mc_n, a
                ));
            }
            out
        }
    }
}

/// One parsed CSV report row.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvRow {
    pub scheme: Scheme,
    pub nme_percent: f64,
    pub auc10: f64,
    pub fr10_percent: f64,
    pub conflicts: usize,
    pub clamped_points: usize,
    pub n_images: usize,
}

impl From<&SchemeReport> for CsvRow {
    fn from(r: &SchemeReport) -> Self {
        Self {
            scheme: r.scheme,
            nme_percent: r.nme_percent,
            auc10: r.auc,
            fr10_percent: 100.0 * r.fr,
            conflicts: r.conflicts,
            clamped_points: r.clamped_points,
            n_images: r.n_images,
        }
    }
}

pub fn parse_report_csv(text: &str) -> Result<Vec<CsvRow>> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.starts_with(CSV_HEADER) => {}
        _ => return Err(Error::parse(1, "missing report header")),
    }
    lines
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            let f: Vec<&str> = l.split(',').collect();
            if f.len() < 7 {
                return Err(Error::parse(i + 1, "expected at least 7 columns"));
            }
            let num = |s: &str| {
                s.parse::<f64>()
                    .map_err(|_| Error::parse(i + 1, format!("bad number `{s}`")))
            };
            let int = |s: &str| {
                s.parse::<usize>()
                    .map_err(|_| Error::parse(i + 1, format!("bad count `{s}`")))
            };
            Ok(CsvRow {
                scheme: f[0].parse()?,
                nme_percent: num(f[1])?,
                auc10: num(f[2])?,
                fr10_percent: num(f[3])?,
                conflicts: int(f[4])?,
                clamped_points: int(f[5])?,
                n_images: int(f[6])?,
            })
        })
        .collect()
}
