//! Normalized mean error, cumulative error distribution, AUC and failure rate.
//!
//! All values are fractions. Scaling by 100 for presentation happens in the
//! report layer.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::LandmarkSet;

/// NME cut-off for AUC and FR (the "10" in AUC₁₀ / FR₁₀).
pub const DEFAULT_THRESHOLD: f64 = 0.10;

/// How the per-image normaliser `d` is obtained.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Normalization {
    /// Distance between two ground-truth landmarks (outer eye corners).
    Indices(usize, usize),
    /// Use the distance stored on each sample.
    Explicit,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsConfig {
    pub norm: Normalization,
    pub threshold: f64,
    pub include_invalid: bool,
}

impl MetricsConfig {
    pub fn new(norm: Normalization, threshold: f64) -> Result<Self> {
        let cfg = Self {
            norm,
            threshold,
            include_invalid: false,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.threshold > 0.0) || !self.threshold.is_finite() {
            return Err(Error::Config(format!(
                "threshold must be positive, got {}",
                self.threshold
            )));
        }
        if let Normalization::Indices(a, b) = self.norm {
            if a == b {
                return Err(Error::Config("normalisation indices must be distinct".into()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerImageError {
    pub id: String,
    pub nme: f64,
    pub per_point: Vec<f64>,
}

/// Distance between two landmarks of `lms`.
pub fn landmark_distance(lms: &LandmarkSet, (a, b): (usize, usize)) -> Result<f64> {
    let n = lms.len();
    if a >= n || b >= n {
        return Err(Error::Config(format!(
            "normalisation indices ({a}, {b}) out of range for {n} landmarks"
        )));
    }
    Ok(lms.points()[a].distance(&lms.points()[b]))
}

/// `(1/N) Σ ‖P_k − P̂_k‖₂ / d` over points valid in both sets.
pub fn nme(gt: &LandmarkSet, pred: &LandmarkSet, d: f64) -> Result<f64> {
    let per_point = point_errors(gt, pred)?;
    nme_from_errors(&per_point, d)
}

/// Euclidean error per landmark; `None` where either side is invalid.
pub fn point_errors(gt: &LandmarkSet, pred: &LandmarkSet) -> Result<Vec<Option<f64>>> {
    if gt.len() != pred.len() {
        return Err(Error::Shape(format!(
            "ground truth has {} landmarks, prediction has {}",
            gt.len(),
            pred.len()
        )));
    }
    if gt.space() != pred.space() {
        return Err(Error::Config(format!(
            "ground truth is in {:?} space, prediction in {:?}",
            gt.space(),
            pred.space()
        )));
    }
    Ok(gt
        .points()
        .iter()
        .zip(pred.points())
        .enumerate()
        .map(|(k, (g, p))| (gt.is_valid(k) && pred.is_valid(k)).then(|| g.distance(p)))
        .collect())
}

pub fn nme_from_errors(per_point: &[Option<f64>], d: f64) -> Result<f64> {
    if !(d > 0.0) || !d.is_finite() {
        return Err(Error::Degenerate(format!(
            "normalisation distance must be positive, got {d}"
        )));
    }
    let (sum, count) = per_point
        .iter()
        .flatten()
        .fold((0.0, 0usize), |(s, c), e| (s + e, c + 1));
    if count == 0 {
        return Err(Error::Degenerate("no valid landmarks to score".into()));
    }
    Ok(sum / count as f64 / d)
}

fn sorted(nmes: &[f64]) -> Result<Vec<f64>> {
    if nmes.is_empty() {
        return Err(Error::Degenerate("no images to aggregate".into()));
    }
    if nmes.iter().any(|x| !x.is_finite() || *x < 0.0) {
        return Err(Error::NonFinite("per-image nme".into()));
    }
    let mut v = nmes.to_vec();
    v.sort_by(f64::total_cmp);
    Ok(v)
}

fn check_threshold(threshold: f64) -> Result<()> {
    if !(threshold > 0.0) || !threshold.is_finite() {
        return Err(Error::Config(format!("threshold must be positive, got {threshold}")));
    }
    Ok(())
}

/// Area under the CED curve on `[0, threshold]`, divided by `threshold`.
pub fn ced_auc(per_image: &[PerImageError], threshold: f64) -> Result<f64> {
    ced_auc_values(&nmes_of(per_image), threshold)
}

/// Fraction of images whose NME is strictly above `threshold`.
pub fn failure_rate(per_image: &[PerImageError], threshold: f64) -> Result<f64> {
    failure_rate_values(&nmes_of(per_image), threshold)
}

/// CED points `(nme, fraction ≤ nme)`: the origin, every distinct NME up to
/// `threshold`, and the threshold itself.
pub fn ced_curve(per_image: &[PerImageError], threshold: f64) -> Result<Vec<(f64, f64)>> {
    ced_curve_values(&nmes_of(per_image), threshold)
}

fn nmes_of(per_image: &[PerImageError]) -> Vec<f64> {
    per_image.iter().map(|e| e.nme).collect()
}

/// [`ced_auc`] over bare per-image NMEs.
///
/// The CED is a right-continuous step function; the integral is summed
/// exactly between consecutive distinct error values.
pub fn ced_auc_values(nmes: &[f64], threshold: f64) -> Result<f64> {
    check_threshold(threshold)?;
    let errs = sorted(nmes)?;
    let total = errs.len() as f64;
    let mut area = 0.0;
    let mut left = 0.0;
    let mut below = 0usize;
    let mut i = 0;
    while i < errs.len() && errs[i] < threshold {
        let e = errs[i];
        area += below as f64 / total * (e - left);
        while i < errs.len() && errs[i] == e {
            below += 1;
            i += 1;
        }
        left = e;
    }
    area += below as f64 / total * (threshold - left);
    Ok(area / threshold)
}

pub fn failure_rate_values(nmes: &[f64], threshold: f64) -> Result<f64> {
    check_threshold(threshold)?;
    let errs = sorted(nmes)?;
    Ok(errs.iter().filter(|&&e| e > threshold).count() as f64 / errs.len() as f64)
}

pub fn ced_curve_values(nmes: &[f64], threshold: f64) -> Result<Vec<(f64, f64)>> {
    check_threshold(threshold)?;
    let errs = sorted(nmes)?;
    let total = errs.len() as f64;
    let frac_at = |x: f64| errs.partition_point(|&e| e <= x) as f64 / total;
    let mut out = vec![(0.0, frac_at(0.0))];
    let mut last = 0.0;
    for &e in &errs {
        if e > threshold {
            break;
        }
        if e > last {
            out.push((e, frac_at(e)));
            last = e;
        }
    }
    if last < threshold {
        out.push((threshold, frac_at(threshold)));
    }
    Ok(out)
}

pub fn ced_csv(points: &[(f64, f64)]) -> String {
    let mut out = String::from("nme_threshold,fraction\n");
    for (t, f) in points {
        out.push_str(&format!("{t},{f}\n"));
    }
    out
}
