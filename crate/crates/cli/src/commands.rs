use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use hih_core::bench::{self, emit_report, BenchConfig, CropSource, ReportFormat};
use hih_core::codecs::{self, decode, encode, encode_heatmap_points, CodecConfig, Scheme};
use hih_core::datasets::{canonical_to_string, load_canonical, load_dataset, write_canonical, DatasetSpec};
use hih_core::metrics::{self, MetricsConfig, Normalization, PerImageError};
use hih_core::wire::{encoded_from_json, encoded_to_json};
use hih_core::{geometry, Error, LandmarkSet, Point2, Space};
use serde::Serialize;

use crate::args::*;

#[derive(Debug)]
pub enum CliError {
    /// Bad flags, unreadable or malformed input. Exit code 2.
    Input(String),
    /// A computed result broke an invariant. Exit code 1.
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Input(_) => 2,
            CliError::Internal(_) => 1,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            CliError::Input(m) | CliError::Internal(m) => m,
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Input(e.to_string())
    }
}

type CliResult<T = ()> = Result<T, CliError>;

fn input<T>(msg: impl Into<String>) -> CliResult<T> {
    Err(CliError::Input(msg.into()))
}

fn emit(path: Option<&Path>, text: &str) -> CliResult {
    match path {
        Some(p) => fs::write(p, text).map_err(|e| CliError::Input(format!("cannot write {}: {e}", p.display()))),
        None => {
            let mut out = std::io::stdout().lock();
            match out.write_all(text.as_bytes()).and_then(|_| out.flush()) {
                // reader went away (e.g. `| head`): nothing left to deliver
                Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => Ok(()),
                Err(e) => Err(CliError::Internal(format!("cannot write stdout: {e}"))),
                Ok(()) => Ok(()),
            }
        }
    }
}

fn parse_schemes(s: &str) -> CliResult<Vec<Scheme>> {
    if s.trim().eq_ignore_ascii_case("all") {
        return Ok(Scheme::ALL.to_vec());
    }
    let schemes = s
        .split(',')
        .filter(|t| !t.trim().is_empty())
        .map(|t| t.parse::<Scheme>())
        .collect::<Result<Vec<_>, _>>()?;
    if schemes.is_empty() {
        return input("no schemes given (valid: direct, wsm, wov, wom, hih, all)");
    }
    Ok(schemes)
}

fn parse_pair(s: &str, flag: &str) -> CliResult<(usize, usize)> {
    let bad = || CliError::Input(format!("{flag} expects `a,b` with two indices, got `{s}`"));
    let (a, b) = s.split_once(',').ok_or_else(bad)?;
    Ok((
        a.trim().parse().map_err(|_| bad())?,
        b.trim().parse().map_err(|_| bad())?,
    ))
}

fn parse_point(s: &str) -> CliResult<Point2> {
    let bad = || CliError::Input(format!("--point expects `x,y`, got `{s}`"));
    let (x, y) = s.split_once(',').ok_or_else(bad)?;
    let p = Point2::new(
        x.trim().parse().map_err(|_| bad())?,
        y.trim().parse().map_err(|_| bad())?,
    );
    if !p.is_finite() {
        return Err(bad());
    }
    Ok(p)
}

fn codec_config(a: &CodecArgs, scheme: Scheme) -> CliResult<CodecConfig> {
    if a.input_res == 0 || a.heatmap_res == 0 || a.input_res as usize % a.heatmap_res != 0 {
        return input(format!(
            "--input-res {} must be a positive multiple of --heatmap-res {}",
            a.input_res, a.heatmap_res
        ));
    }
    let cfg = CodecConfig {
        scheme,
        heatmap_shape: (a.heatmap_res, a.heatmap_res),
        decimal_shape: (a.decimal_res, a.decimal_res),
        sigma_integer: a.sigma_int,
        sigma_decimal: a.sigma_dec,
        oob_policy: a.oob.parse()?,
        tie_eps: a.tie_eps,
    };
    cfg.validate()?;
    Ok(cfg)
}

fn report_format(s: &str) -> CliResult<ReportFormat> {
    Ok(s.parse()?)
}

fn norm_indices(flag: Option<&str>, n_landmarks: usize) -> CliResult<(usize, usize)> {
    if let Some(s) = flag {
        return parse_pair(s, "--norm-indices");
    }
    DatasetSpec::for_landmark_count(n_landmarks, hih_core::datasets::AnnotationFormat::CanonicalJson)
        .norm_indices
        .ok_or_else(|| {
            CliError::Input(format!(
                "no default eye-corner indices for {n_landmarks} landmarks; pass --norm-indices a,b"
            ))
        })
}

pub fn bench_ideal(a: &BenchIdealArgs) -> CliResult {
    let schemes = parse_schemes(&a.schemes)?;
    let format = report_format(&a.out.format)?;
    let codec = codec_config(&a.codec, schemes[0])?;
    let crop_source = match a.crop_source.parse::<CropSource>()? {
        CropSource::Bbox { .. } => CropSource::Bbox {
            inclusive: !a.bbox_exclusive,
        },
        other => other,
    };
    let data = load_dataset(&a.dataset)?;
    let n = data.records[0].landmarks.len();
    let (i, j) = norm_indices(a.norm_indices.as_deref(), n)?;
    if i >= n || j >= n {
        return input(format!("--norm-indices {i},{j} out of range for {n} landmarks"));
    }
    let cfg = BenchConfig {
        schemes,
        codec,
        metrics: MetricsConfig::new(Normalization::Indices(i, j), a.threshold)?,
        crop_margin: a.margin,
        crop_source,
        input_size: (a.codec.input_res, a.codec.input_res),
        ..BenchConfig::default()
    };
    let report = bench::run_ideal(&data.spec.name, &data.records, &cfg)?;
    if let Some(wov) = report.row(Scheme::Wov) {
        if wov.nme_percent >= 1e-7 {
            return Err(CliError::Internal(format!(
                "WOV ideal NME {} is not zero",
                wov.nme_percent
            )));
        }
    }
    if report.skipped > 0 {
        eprintln!("skipped {} degenerate sample(s)", report.skipped);
    }
    if let Some(prefix) = &a.ced_out {
        for row in &report.rows {
            let mut name = prefix.as_os_str().to_owned();
            name.push(format!("_{}.csv", row.scheme));
            emit(Some(&PathBuf::from(name)), &metrics::ced_csv(&row.ced))?;
        }
    }
    emit(a.out.output.as_deref(), &emit_report(&report, format))
}

fn parse_samples(s: &str) -> CliResult<usize> {
    let bad = || CliError::Input(format!("--samples must be a positive integer, got `{s}`"));
    let n = match s.parse::<usize>() {
        Ok(n) => n,
        Err(_) => {
            let v: f64 = s.parse().map_err(|_| bad())?;
            if !(v >= 1.0) || v.fract() != 0.0 || v > 1e12 {
                return Err(bad());
            }
            v as usize
        }
    };
    if n == 0 {
        return Err(bad());
    }
    Ok(n)
}

pub fn synth(a: &SynthArgs) -> CliResult {
    let samples = parse_samples(&a.samples)?;
    let schemes = parse_schemes(&a.schemes)?;
    let format = report_format(&a.out.format)?;
    if a.landmarks == 0 {
        return input("--landmarks must be positive");
    }
    if !(a.n_factor > 0.0) || !a.n_factor.is_finite() {
        return input(format!("--n-factor must be positive, got {}", a.n_factor));
    }
    let cfg = BenchConfig {
        schemes,
        codec: codec_config(&a.codec, Scheme::Direct)?,
        input_size: (a.codec.input_res, a.codec.input_res),
        seed: a.seed,
        mc_samples: samples,
        mc_landmarks: a.landmarks,
        mc_n: a.n_factor,
        ..BenchConfig::default()
    };
    let report = bench::run_montecarlo(&cfg)?;
    emit(a.out.output.as_deref(), &emit_report(&report, format))
}

pub fn encode_cmd(a: &EncodeArgs) -> CliResult {
    let scheme: Scheme = a.scheme.parse()?;
    let cfg = codec_config(&a.codec, scheme)?;
    let enc = if let Some(path) = &a.record {
        let c = load_canonical(path)?;
        let rec = c.records.get(a.index).ok_or_else(|| {
            CliError::Input(format!(
                "--index {} out of range ({} records)",
                a.index,
                c.records.len()
            ))
        })?;
        let input_size = (a.codec.input_res, a.codec.input_res);
        let crop = geometry::crop_from_landmarks(&rec.landmarks, a.margin, input_size)?;
        // the normaliser is irrelevant for encoding
        let sample = geometry::FaceSample::new(rec.id.clone(), rec.landmarks.clone(), crop, input_size, 1.0)?;
        encode(&sample, &cfg)?
    } else {
        if a.point.is_empty() {
            return input("encode needs --point x,y (repeatable) or --record FILE");
        }
        let pts = a.point.iter().map(|s| parse_point(s)).collect::<CliResult<Vec<_>>>()?;
        encode_heatmap_points(&LandmarkSet::new(pts, Space::Heatmap)?, &cfg)?
    };
    emit(a.output.as_deref(), &(encoded_to_json(&enc) + "\n"))
}

#[derive(Serialize)]
struct DecodeOut {
    scheme: Scheme,
    /// Normalized input-space coordinates; `null` for dropped points.
    points: Vec<Option<[f64; 2]>>,
    flags: Vec<codecs::DecodeFlags>,
}

pub fn decode_cmd(a: &DecodeArgs) -> CliResult {
    let text = if a.input == "-" {
        let mut s = String::new();
        std::io::stdin()
            .read_to_string(&mut s)
            .map_err(|e| CliError::Input(format!("cannot read stdin: {e}")))?;
        s
    } else {
        fs::read_to_string(&a.input).map_err(|e| CliError::Input(format!("cannot read {}: {e}", a.input)))?
    };
    let enc = encoded_from_json(&text)?;
    let cfg = CodecConfig {
        scheme: enc.scheme,
        heatmap_shape: enc.heatmap_shape,
        decimal_shape: enc.decimal_shape,
        tie_eps: a.tie_eps,
        ..CodecConfig::default()
    };
    let dec = decode(&enc, &cfg)?;
    let out = DecodeOut {
        scheme: enc.scheme,
        points: dec
            .landmarks
            .points()
            .iter()
            .zip(dec.landmarks.valid())
            .map(|(p, &v)| v.then_some([p.x, p.y]))
            .collect(),
        flags: dec.flags,
    };
    let json = serde_json::to_string_pretty(&out).expect("decode output serializes");
    emit(a.output.as_deref(), &(json + "\n"))
}

#[derive(Serialize)]
struct MetricsOut {
    n_images: usize,
    nme_percent: f64,
    auc10: f64,
    fr10_percent: f64,
    threshold: f64,
}

pub fn metrics_cmd(a: &MetricsArgs) -> CliResult {
    let format = report_format(&a.out.format)?;
    let gt = load_canonical(&a.gt)?;
    let pred = load_canonical(&a.pred)?;
    if gt.records.len() != pred.records.len() {
        return input(format!(
            "ground truth has {} records, prediction has {}",
            gt.records.len(),
            pred.records.len()
        ));
    }
    if gt.n_landmarks != pred.n_landmarks {
        return input(format!(
            "landmark count mismatch: ground truth {}, prediction {}",
            gt.n_landmarks, pred.n_landmarks
        ));
    }
    if let Some((i, (g, p))) = gt
        .records
        .iter()
        .zip(&pred.records)
        .enumerate()
        .find(|(_, (g, p))| g.id != p.id)
    {
        return input(format!(
            "record id mismatch at index {i}: ground truth `{}`, prediction `{}`",
            g.id, p.id
        ));
    }
    let pair = norm_indices(a.norm_indices.as_deref(), gt.n_landmarks)?;
    let cfg = MetricsConfig::new(Normalization::Indices(pair.0, pair.1), a.threshold)?;

    let per_image = gt
        .records
        .iter()
        .zip(&pred.records)
        .map(|(g, p)| {
            let d = metrics::landmark_distance(&g.landmarks, pair)?;
            let errs = metrics::point_errors(&g.landmarks, &p.landmarks)?;
            let nme =
                metrics::nme_from_errors(&errs, d).map_err(|e| Error::Degenerate(format!("record `{}`: {e}", g.id)))?;
            Ok(PerImageError {
                id: g.id.clone(),
                nme,
                per_point: errs.into_iter().map(|e| e.unwrap_or(0.0)).collect(),
            })
        })
        .collect::<Result<Vec<_>, Error>>()?;

    let out = MetricsOut {
        n_images: per_image.len(),
        nme_percent: 100.0 * per_image.iter().map(|e| e.nme).sum::<f64>() / per_image.len() as f64,
        auc10: metrics::ced_auc(&per_image, cfg.threshold)?,
        fr10_percent: 100.0 * metrics::failure_rate(&per_image, cfg.threshold)?,
        threshold: cfg.threshold,
    };
    if let Some(p) = &a.ced_out {
        emit(
            Some(p),
            &metrics::ced_csv(&metrics::ced_curve(&per_image, cfg.threshold)?),
        )?;
    }
    let text = match format {
        ReportFormat::Json => serde_json::to_string_pretty(&out).expect("metrics serialize") + "\n",
        ReportFormat::Csv => format!(
            "n_images,nme_percent,auc10,fr10_percent\n{},{},{},{}\n",
            out.n_images, out.nme_percent, out.auc10, out.fr10_percent
        ),
        ReportFormat::Table => format!(
            "{:<8}{:>10}{:>9}{:>10}\n{:<8}{:>10.3}{:>9.3}{:>10.3}\n",
            "images", "nme(%)", "auc10", "fr10(%)", out.n_images, out.nme_percent, out.auc10, out.fr10_percent
        ),
    };
    emit(a.out.output.as_deref(), &text)
}

pub fn convert(a: &ConvertArgs) -> CliResult {
    let data = load_dataset(&a.input)?;
    let name = a.name.clone().unwrap_or(data.spec.name);
    match &a.output {
        Some(p) => Ok(write_canonical(p, &name, &data.records)?),
        None => emit(None, &(canonical_to_string(&name, &data.records)? + "\n")),
    }
}
