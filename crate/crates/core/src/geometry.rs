//! Coordinate spaces, landmark containers and the preprocessing transform
//! chain (raw image → network input → heatmap).
//!
//! Convention: pixel centers sit at integer coordinates with the origin at the
//! center of the top-left pixel. Heatmap cell `(i, j)` covers
//! `[i - 0.5, i + 0.5) × [j - 0.5, j + 0.5)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default network input resolution.
pub const DEFAULT_INPUT_SIZE: (u32, u32) = (256, 256);

const SINGULAR_DET: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    pub fn distance(&self, other: &Point2) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// Which coordinate frame a [`LandmarkSet`] lives in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Space {
    /// Original image pixels.
    Raw,
    /// Network input pixels (after crop/resize).
    Input,
    /// Integer-heatmap pixels.
    Heatmap,
    /// Input space divided by the input resolution, so each axis is in `[0, 1]`.
    Normalized,
}

/// Ordered landmarks with per-point validity.
#[derive(Debug, Clone, PartialEq)]
pub struct LandmarkSet {
    points: Vec<Point2>,
    valid: Vec<bool>,
    space: Space,
}

impl LandmarkSet {
    /// All points valid. Fails on an empty set or non-finite coordinates.
    pub fn new(points: Vec<Point2>, space: Space) -> Result<Self> {
        let valid = vec![true; points.len()];
        Self::with_validity(points, valid, space)
    }

    pub fn with_validity(points: Vec<Point2>, valid: Vec<bool>, space: Space) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::Config("landmark set must not be empty".into()));
        }
        if points.len() != valid.len() {
            return Err(Error::Shape(format!(
                "{} points but {} validity flags",
                points.len(),
                valid.len()
            )));
        }
        if let Some(k) = points.iter().zip(&valid).position(|(p, &v)| v && !p.is_finite()) {
            return Err(Error::NonFinite(format!("landmark {k}")));
        }
        Ok(Self { points, valid, space })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Point2] {
        &self.points
    }

    pub fn valid(&self) -> &[bool] {
        &self.valid
    }

    pub fn is_valid(&self, k: usize) -> bool {
        self.valid[k]
    }

    pub fn space(&self) -> Space {
        self.space
    }

    pub fn set_valid(&mut self, k: usize, valid: bool) {
        self.valid[k] = valid;
    }

    pub fn valid_count(&self) -> usize {
        self.valid.iter().filter(|&&v| v).count()
    }

    /// Map every point through `f` into `space`, keeping validity.
    pub fn map(&self, space: Space, f: impl Fn(Point2) -> Point2) -> Self {
        Self {
            points: self.points.iter().map(|&p| f(p)).collect(),
            valid: self.valid.clone(),
            space,
        }
    }
}

/// `p ↦ linear · p + offset`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AffineTransform {
    linear: [[f64; 2]; 2],
    offset: [f64; 2],
    similarity: bool,
}

impl AffineTransform {
    /// General affine map. The similarity flag is detected from the matrix.
    pub fn new(linear: [[f64; 2]; 2], offset: [f64; 2]) -> Result<Self> {
        let det = linear[0][0] * linear[1][1] - linear[0][1] * linear[1][0];
        if !det.is_finite() || det.abs() <= SINGULAR_DET {
            return Err(Error::Config(format!("transform is not invertible (det = {det})")));
        }
        if !offset.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("transform offset".into()));
        }
        let [[a, b], [c, d]] = linear;
        let tol = 1e-12 * (a.abs() + b.abs() + c.abs() + d.abs());
        let similarity = det > 0.0 && (a - d).abs() <= tol && (b + c).abs() <= tol;
        Ok(Self {
            linear,
            offset,
            similarity,
        })
    }

    pub fn identity() -> Self {
        Self {
            linear: [[1.0, 0.0], [0.0, 1.0]],
            offset: [0.0, 0.0],
            similarity: true,
        }
    }

    /// Rotation by `angle` radians, uniform scale `scale > 0`, then translation.
    pub fn similarity(scale: f64, angle: f64, offset: [f64; 2]) -> Result<Self> {
        if !(scale > 0.0) || !scale.is_finite() {
            return Err(Error::Config(format!("similarity scale must be positive, got {scale}")));
        }
        let (s, c) = angle.sin_cos();
        let linear = [[scale * c, -scale * s], [scale * s, scale * c]];
        let mut t = Self::new(linear, offset)?;
        t.similarity = true;
        Ok(t)
    }

    pub fn scale(scale: f64) -> Result<Self> {
        Self::similarity(scale, 0.0, [0.0, 0.0])
    }

    pub fn linear(&self) -> [[f64; 2]; 2] {
        self.linear
    }

    pub fn offset(&self) -> [f64; 2] {
        self.offset
    }

    pub fn is_similarity(&self) -> bool {
        self.similarity
    }

    pub fn determinant(&self) -> f64 {
        self.linear[0][0] * self.linear[1][1] - self.linear[0][1] * self.linear[1][0]
    }

    /// Uniform scale factor, if this is a similarity.
    pub fn similarity_scale(&self) -> Option<f64> {
        self.similarity.then(|| self.determinant().sqrt())
    }

    pub fn apply_point(&self, p: Point2) -> Point2 {
        let [[a, b], [c, d]] = self.linear;
        Point2 {
            x: a * p.x + b * p.y + self.offset[0],
            y: c * p.x + d * p.y + self.offset[1],
        }
    }

    /// Map a landmark set into `target` space.
    pub fn apply(&self, pts: &LandmarkSet, target: Space) -> LandmarkSet {
        pts.map(target, |p| self.apply_point(p))
    }

    pub fn invert(&self) -> Result<Self> {
        let det = self.determinant();
        if det.abs() <= SINGULAR_DET {
            return Err(Error::Config("cannot invert a singular transform".into()));
        }
        let [[a, b], [c, d]] = self.linear;
        let inv = [[d / det, -b / det], [-c / det, a / det]];
        let [tx, ty] = self.offset;
        let offset = [-(inv[0][0] * tx + inv[0][1] * ty), -(inv[1][0] * tx + inv[1][1] * ty)];
        Ok(Self {
            linear: inv,
            offset,
            similarity: self.similarity,
        })
    }

    /// `other ∘ self`: apply `self` first, then `other`.
    pub fn then(&self, other: &AffineTransform) -> Self {
        let [[a, b], [c, d]] = other.linear;
        let [[e, f], [g, h]] = self.linear;
        let linear = [[a * e + b * g, a * f + b * h], [c * e + d * g, c * f + d * h]];
        let p = other.apply_point(Point2::new(self.offset[0], self.offset[1]));
        Self {
            linear,
            offset: [p.x, p.y],
            similarity: self.similarity && other.similarity,
        }
    }
}

/// Combined raw→heatmap downsample factor `n = model_factor / s`, where `s`
/// is the raw→input scale of the preprocessing similarity.
pub fn downsample_factor(t_preproc: &AffineTransform, model_factor: f64) -> Result<f64> {
    if !(model_factor > 0.0) || !model_factor.is_finite() {
        return Err(Error::Config(format!(
            "model factor must be positive, got {model_factor}"
        )));
    }
    let s = t_preproc
        .similarity_scale()
        .ok_or_else(|| Error::Config("downsample factor is undefined for a non-similarity transform".into()))?;
    Ok(model_factor / s)
}

/// Square similarity crop around the landmark bounding box, scaled to `target`.
///
/// The crop side is `max(width, height) · (1 + margin)`, centered on the box.
pub fn crop_from_landmarks(lms: &LandmarkSet, margin: f64, target: (u32, u32)) -> Result<AffineTransform> {
    let mut pts = lms
        .points()
        .iter()
        .zip(lms.valid())
        .filter(|(_, &v)| v)
        .map(|(p, _)| *p);
    let first = pts
        .next()
        .ok_or_else(|| Error::Degenerate("no valid landmarks to crop around".into()))?;
    let (mut x0, mut y0, mut x1, mut y1) = (first.x, first.y, first.x, first.y);
    for p in pts {
        x0 = x0.min(p.x);
        y0 = y0.min(p.y);
        x1 = x1.max(p.x);
        y1 = y1.max(p.y);
    }
    crop_from_box([x0, y0, x1, y1], margin, target)
}

/// Square similarity crop around an explicit `[x0, y0, x1, y1]` box.
pub fn crop_from_box(bbox: [f64; 4], margin: f64, target: (u32, u32)) -> Result<AffineTransform> {
    if !(margin >= 0.0) || !margin.is_finite() {
        return Err(Error::Config(format!("crop margin must be >= 0, got {margin}")));
    }
    if target.0 != target.1 || target.0 == 0 {
        return Err(Error::Config(format!(
            "crop target must be a non-empty square, got {}x{}",
            target.0, target.1
        )));
    }
    if !bbox.iter().all(|v| v.is_finite()) {
        return Err(Error::NonFinite("crop box".into()));
    }
    let [x0, y0, x1, y1] = bbox;
    let side = (x1 - x0).max(y1 - y0) * (1.0 + margin);
    if !(side > 0.0) {
        return Err(Error::Degenerate("crop box has zero extent".into()));
    }
    let scale = target.0 as f64 / side;
    let cx = 0.5 * (x0 + x1);
    let cy = 0.5 * (y0 + y1);
    let half = 0.5 * target.0 as f64;
    AffineTransform::similarity(scale, 0.0, [half - scale * cx, half - scale * cy])
}

/// One face ready for encoding: raw landmarks plus the raw→input crop.
#[derive(Debug, Clone)]
pub struct FaceSample {
    pub id: String,
    pub landmarks_raw: LandmarkSet,
    pub crop: AffineTransform,
    pub image_size_input: (u32, u32),
    pub norm_distance_raw: f64,
}

impl FaceSample {
    pub fn new(
        id: impl Into<String>,
        landmarks_raw: LandmarkSet,
        crop: AffineTransform,
        image_size_input: (u32, u32),
        norm_distance_raw: f64,
    ) -> Result<Self> {
        if landmarks_raw.space() != Space::Raw {
            return Err(Error::Config("face sample landmarks must be in raw space".into()));
        }
        if !(norm_distance_raw > 0.0) || !norm_distance_raw.is_finite() {
            return Err(Error::Degenerate(format!(
                "normalisation distance must be positive, got {norm_distance_raw}"
            )));
        }
        if image_size_input.0 == 0 || image_size_input.1 == 0 {
            return Err(Error::Config("input image size must be positive".into()));
        }
        Ok(Self {
            id: id.into(),
            landmarks_raw,
            crop,
            image_size_input,
            norm_distance_raw,
        })
    }
}
