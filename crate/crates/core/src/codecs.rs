//! Ground-truth encoders and argmax decoders for the five sub-pixel schemes.
//!
//! | scheme | label | decode |
//! |--------|-------|--------|
//! | DIRECT | integer heatmap at the nearest cell | `m / (w, h)` |
//! | WSM    | same as DIRECT | quarter-pixel shift toward a unique second maximum |
//! | WOV    | integer heatmap at the floor cell + offset pair | `(m + o) / (w, h)` |
//! | WOM    | integer heatmap at the floor cell + shared offset maps | `(m + O[m]) / (w, h)` |
//! | HIH    | integer heatmap at the floor cell + decimal heatmap | `(m + m_o / (w_o, h_o)) / (w, h)` |
//!
//! Everything here evaluates the ideal condition: a decoder reads back the
//! exact label the encoder produced.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{FaceSample, LandmarkSet, Point2, Space};
use crate::heatmap::{clamp_to_grid, render_gaussian, GaussianSpec, GridPoint, HeatmapGrid, DEFAULT_TIE_EPS};

/// Largest `f64` strictly below 1.
const ONE_MINUS: f64 = 1.0 - f64::EPSILON / 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    Direct,
    Wsm,
    Wov,
    Wom,
    Hih,
}

impl Scheme {
    pub const ALL: [Scheme; 5] = [Scheme::Direct, Scheme::Wsm, Scheme::Wov, Scheme::Wom, Scheme::Hih];

    pub fn name(self) -> &'static str {
        match self {
            Scheme::Direct => "direct",
            Scheme::Wsm => "wsm",
            Scheme::Wov => "wov",
            Scheme::Wom => "wom",
            Scheme::Hih => "hih",
        }
    }

    /// Whether the integer heatmap is placed at the floor cell (offset in
    /// `[0, 1)`) rather than the nearest cell.
    pub fn uses_floor_cell(self) -> bool {
        matches!(self, Scheme::Wov | Scheme::Wom | Scheme::Hih)
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Scheme::ALL
            .into_iter()
            .find(|k| k.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::Config(format!("unknown scheme `{s}` (valid: direct, wsm, wov, wom, hih, all)")))
    }
}

/// What to do with landmarks that land outside the integer heatmap.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OobPolicy {
    /// Snap to the border cell and keep the point.
    #[default]
    Clamp,
    /// Exclude the point from encoding and from metrics.
    Drop,
}

impl FromStr for OobPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "clamp" => Ok(OobPolicy::Clamp),
            "drop" => Ok(OobPolicy::Drop),
            _ => Err(Error::Config(format!(
                "unknown out-of-bounds policy `{s}` (valid: clamp, drop)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CodecConfig {
    pub scheme: Scheme,
    /// Integer heatmap `(w, h)`.
    pub heatmap_shape: (usize, usize),
    /// Decimal heatmap `(w_o, h_o)`, HIH only.
    pub decimal_shape: (usize, usize),
    pub sigma_integer: f64,
    pub sigma_decimal: f64,
    pub oob_policy: OobPolicy,
    pub tie_eps: f64,
}

impl Default for CodecConfig {
    fn default() -> Self {
        Self {
            scheme: Scheme::Hih,
            heatmap_shape: (64, 64),
            decimal_shape: (8, 8),
            sigma_integer: 1.5,
            sigma_decimal: 1.0,
            oob_policy: OobPolicy::Clamp,
            tie_eps: DEFAULT_TIE_EPS,
        }
    }
}

impl CodecConfig {
    pub fn with_scheme(mut self, scheme: Scheme) -> Self {
        self.scheme = scheme;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let (w, h) = self.heatmap_shape;
        let (wo, ho) = self.decimal_shape;
        if w == 0 || h == 0 || wo == 0 || ho == 0 {
            return Err(Error::Config("heatmap and decimal shapes must be positive".into()));
        }
        GaussianSpec::new(self.sigma_integer)?;
        GaussianSpec::new(self.sigma_decimal)?;
        if !(self.tie_eps >= 0.0) {
            return Err(Error::Config("tie_eps must be >= 0".into()));
        }
        if self.scheme == Scheme::Wsm && w * h < 2 {
            return Err(Error::Config("WSM needs a heatmap with at least two cells".into()));
        }
        Ok(())
    }
}

/// Heatmap-space point is inside `[0, w) × [0, h)`.
pub fn in_grid(p: Point2, shape: (usize, usize)) -> bool {
    p.x >= 0.0 && p.y >= 0.0 && p.x < shape.0 as f64 && p.y < shape.1 as f64
}

/// Integer cell and the sub-pixel remainder of a heatmap-space point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OffsetCell {
    pub cell: GridPoint,
    pub offset: [f64; 2],
    pub clamped: bool,
}

/// Split `p` into `floor(p)` and `p - floor(p)`. Points outside the grid are
/// clamped to the border cell with the offset clamped into `[0, 1)`.
pub fn relative_offset(p: Point2, shape: (usize, usize)) -> Result<OffsetCell> {
    if !p.is_finite() {
        return Err(Error::NonFinite(format!("heatmap point ({}, {})", p.x, p.y)));
    }
    let (fx, fy) = (p.x.floor(), p.y.floor());
    let (cell, clamped) = clamp_to_grid(fx as i64, fy as i64, shape);
    let offset = [
        (p.x - cell.x as f64).clamp(0.0, ONE_MINUS),
        (p.y - cell.y as f64).clamp(0.0, ONE_MINUS),
    ];
    Ok(OffsetCell { cell, offset, clamped })
}

/// Cell containing `p` under the pixel-center convention (round half up).
pub fn nearest_cell(p: Point2, shape: (usize, usize)) -> Result<(GridPoint, bool)> {
    if !p.is_finite() {
        return Err(Error::NonFinite(format!("heatmap point ({}, {})", p.x, p.y)));
    }
    Ok(clamp_to_grid(
        (p.x + 0.5).floor() as i64,
        (p.y + 0.5).floor() as i64,
        shape,
    ))
}

/// Peak of the decimal heatmap for a sub-pixel offset: round half up of
/// `offset · (w_o, h_o)`, clamped into the decimal grid.
pub fn decimal_center(offset: [f64; 2], decimal_shape: (usize, usize)) -> (GridPoint, bool) {
    clamp_to_grid(
        (offset[0] * decimal_shape.0 as f64 + 0.5).floor() as i64,
        (offset[1] * decimal_shape.1 as f64 + 0.5).floor() as i64,
        decimal_shape,
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct PointFlags {
    /// Integer cell was snapped to the grid border.
    pub clamped: bool,
    /// Decimal peak was snapped into the decimal grid.
    pub decimal_clamped: bool,
    /// Excluded under [`OobPolicy::Drop`].
    pub dropped: bool,
    /// WOM: a later landmark overwrote this landmark's offset entry.
    pub overwritten: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Payload {
    /// DIRECT and WSM carry only the integer heatmaps.
    None,
    /// WOV: one offset pair per landmark.
    OffsetValues(Vec<[f64; 2]>),
    /// WOM: shared x/y offset grids.
    OffsetMaps {
        x: HeatmapGrid,
        y: HeatmapGrid,
        conflict_count: usize,
    },
    /// HIH: one decimal heatmap per landmark.
    Decimal(Vec<HeatmapGrid>),
}

/// Ground-truth label representation for one face.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodedSample {
    pub scheme: Scheme,
    pub heatmap_shape: (usize, usize),
    pub decimal_shape: (usize, usize),
    /// One integer heatmap per landmark (all zero for dropped points).
    pub integer: Vec<HeatmapGrid>,
    pub payload: Payload,
    pub flags: Vec<PointFlags>,
}

impl EncodedSample {
    pub fn len(&self) -> usize {
        self.integer.len()
    }

    pub fn is_empty(&self) -> bool {
        self.integer.is_empty()
    }

    pub fn conflict_count(&self) -> usize {
        match &self.payload {
            Payload::OffsetMaps { conflict_count, .. } => *conflict_count,
            _ => 0,
        }
    }

    fn check_shape(&self) -> Result<()> {
        let n = self.integer.len();
        if n == 0 || self.flags.len() != n {
            return Err(Error::Shape(
                "encoded sample has no landmarks or mismatched flags".into(),
            ));
        }
        if self.integer.iter().any(|g| g.shape() != self.heatmap_shape) {
            return Err(Error::Shape("integer heatmap shape mismatch".into()));
        }
        match (&self.payload, self.scheme) {
            (Payload::None, Scheme::Direct | Scheme::Wsm) => Ok(()),
            (Payload::OffsetValues(v), Scheme::Wov) if v.len() == n => Ok(()),
            (Payload::OffsetMaps { x, y, .. }, Scheme::Wom)
                if x.shape() == self.heatmap_shape && y.shape() == self.heatmap_shape =>
            {
                Ok(())
            }
            (Payload::Decimal(d), Scheme::Hih) if d.len() == n && d.iter().all(|g| g.shape() == self.decimal_shape) => {
                Ok(())
            }
            _ => Err(Error::Shape(format!("payload does not match scheme {}", self.scheme))),
        }
    }
}

/// Raw landmarks of a sample mapped into integer-heatmap space.
pub fn heatmap_landmarks(sample: &FaceSample, cfg: &CodecConfig) -> Result<LandmarkSet> {
    let factor = model_factor(sample, cfg)?;
    let input = sample.crop.apply(&sample.landmarks_raw, Space::Input);
    Ok(input.map(Space::Heatmap, |p| Point2::new(p.x / factor, p.y / factor)))
}

/// Input→heatmap downsampling of the network, e.g. 256 / 64 = 4.
pub fn model_factor(sample: &FaceSample, cfg: &CodecConfig) -> Result<f64> {
    let (wi, hi) = sample.image_size_input;
    let (w, h) = cfg.heatmap_shape;
    let fx = wi as f64 / w as f64;
    let fy = hi as f64 / h as f64;
    if fx != fy {
        return Err(Error::Config(format!(
            "input {wi}x{hi} and heatmap {w}x{h} have different aspect ratios"
        )));
    }
    Ok(fx)
}

pub fn encode(sample: &FaceSample, cfg: &CodecConfig) -> Result<EncodedSample> {
    encode_heatmap_points(&heatmap_landmarks(sample, cfg)?, cfg)
}

/// Encode landmarks already expressed in integer-heatmap coordinates.
pub fn encode_heatmap_points(pts: &LandmarkSet, cfg: &CodecConfig) -> Result<EncodedSample> {
    cfg.validate()?;
    if pts.space() != Space::Heatmap {
        return Err(Error::Config("encoder expects heatmap-space landmarks".into()));
    }
    let shape = cfg.heatmap_shape;
    let int_spec = GaussianSpec::new(cfg.sigma_integer)?;
    let dec_spec = GaussianSpec::new(cfg.sigma_decimal)?;

    let n = pts.len();
    let mut integer = Vec::with_capacity(n);
    let mut flags = vec![PointFlags::default(); n];
    let mut offsets = vec![[0.0; 2]; n];
    let mut decimal = Vec::new();

    for (k, &p) in pts.points().iter().enumerate() {
        let dropped = !pts.is_valid(k) || (cfg.oob_policy == OobPolicy::Drop && !in_grid(p, shape));
        if dropped {
            flags[k].dropped = true;
            integer.push(HeatmapGrid::zeros(shape.0, shape.1)?);
            if cfg.scheme == Scheme::Hih {
                decimal.push(HeatmapGrid::zeros(cfg.decimal_shape.0, cfg.decimal_shape.1)?);
            }
            continue;
        }
        let cell = if cfg.scheme.uses_floor_cell() {
            let oc = relative_offset(p, shape)?;
            offsets[k] = oc.offset;
            flags[k].clamped = oc.clamped;
            oc.cell
        } else {
            let (cell, clamped) = nearest_cell(p, shape)?;
            flags[k].clamped = clamped;
            cell
        };
        integer.push(render_gaussian(cell, int_spec, shape)?);

        if cfg.scheme == Scheme::Hih {
            let (center, clamped) = decimal_center(offsets[k], cfg.decimal_shape);
            flags[k].decimal_clamped = clamped;
            decimal.push(render_gaussian(center, dec_spec, cfg.decimal_shape)?);
        }
    }

    let payload = match cfg.scheme {
        Scheme::Direct | Scheme::Wsm => Payload::None,
        Scheme::Wov => Payload::OffsetValues(offsets),
        Scheme::Hih => Payload::Decimal(decimal),
        Scheme::Wom => {
            let mut ox = HeatmapGrid::zeros(shape.0, shape.1)?;
            let mut oy = HeatmapGrid::zeros(shape.0, shape.1)?;
            let mut owner: HashMap<GridPoint, usize> = HashMap::new();
            let mut conflict_count = 0;
            for k in 0..n {
                if flags[k].dropped {
                    continue;
                }
                let cell = integer[k].argmax();
                if let Some(prev) = owner.insert(cell, k) {
                    flags[prev].overwritten = true;
                    conflict_count += 1;
                }
                ox.set(cell, offsets[k][0]);
                oy.set(cell, offsets[k][1]);
            }
            Payload::OffsetMaps {
                x: ox,
                y: oy,
                conflict_count,
            }
        }
    };

    Ok(EncodedSample {
        scheme: cfg.scheme,
        heatmap_shape: shape,
        decimal_shape: cfg.decimal_shape,
        integer,
        payload,
        flags,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct DecodeFlags {
    /// WSM saw several tied second-place cells and applied no shift.
    pub tie_encountered: bool,
    pub clamped: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecodeResult {
    /// Normalized input space; dropped points are marked invalid.
    pub landmarks: LandmarkSet,
    pub flags: Vec<DecodeFlags>,
}

pub fn decode(enc: &EncodedSample, cfg: &CodecConfig) -> Result<DecodeResult> {
    if enc.scheme != cfg.scheme
        || enc.heatmap_shape != cfg.heatmap_shape
        || (enc.scheme == Scheme::Hih && enc.decimal_shape != cfg.decimal_shape)
    {
        return Err(Error::Config(format!(
            "encoded sample ({} {:?}) does not match codec config ({} {:?})",
            enc.scheme, enc.heatmap_shape, cfg.scheme, cfg.heatmap_shape
        )));
    }
    enc.check_shape()?;
    let (w, h) = (enc.heatmap_shape.0 as f64, enc.heatmap_shape.1 as f64);
    let (wo, ho) = (enc.decimal_shape.0 as f64, enc.decimal_shape.1 as f64);

    let n = enc.len();
    let mut points = Vec::with_capacity(n);
    let mut valid = Vec::with_capacity(n);
    let mut flags = Vec::with_capacity(n);

    for (k, grid) in enc.integer.iter().enumerate() {
        let pf = enc.flags[k];
        let mut df = DecodeFlags {
            clamped: pf.clamped || pf.decimal_clamped,
            ..Default::default()
        };
        if pf.dropped {
            points.push(Point2::default());
            valid.push(false);
            flags.push(df);
            continue;
        }
        let m = grid.argmax();
        let (mx, my) = (m.x as f64, m.y as f64);
        let (dx, dy) = match &enc.payload {
            Payload::None if enc.scheme == Scheme::Wsm => {
                let top = grid.top2(cfg.tie_eps)?;
                if top.second.len() == 1 {
                    let s = top.second[0];
                    let (vx, vy) = (s.x as f64 - mx, s.y as f64 - my);
                    let norm = vx.hypot(vy);
                    (0.25 * vx / norm, 0.25 * vy / norm)
                } else {
                    df.tie_encountered = true;
                    (0.0, 0.0)
                }
            }
            Payload::None => (0.0, 0.0),
            Payload::OffsetValues(o) => (o[k][0], o[k][1]),
            Payload::OffsetMaps { x, y, .. } => (x.get(m), y.get(m)),
            Payload::Decimal(d) => {
                let md = d[k].argmax();
                (md.x as f64 / wo, md.y as f64 / ho)
            }
        };
        points.push(Point2::new((mx + dx) / w, (my + dy) / h));
        valid.push(true);
        flags.push(df);
    }

    Ok(DecodeResult {
        landmarks: LandmarkSet::with_validity(points, valid, Space::Normalized)?,
        flags,
    })
}

/// Per-landmark outcome of encoding then decoding a sample.
#[derive(Debug, Clone)]
pub struct RoundTrip {
    /// Raw-space Euclidean error per landmark (0 for dropped points).
    pub errors: Vec<f64>,
    /// Landmarks that took part in encoding.
    pub valid: Vec<bool>,
    pub flags: Vec<PointFlags>,
    pub decode_flags: Vec<DecodeFlags>,
    pub conflict_count: usize,
    /// Ground truth in heatmap space.
    pub target_heatmap: LandmarkSet,
    /// Decoded points in heatmap space.
    pub decoded_heatmap: LandmarkSet,
    /// Decoded points mapped back to raw space.
    pub decoded_raw: LandmarkSet,
}

impl RoundTrip {
    pub fn clamped_points(&self) -> usize {
        self.flags
            .iter()
            .filter(|f| !f.dropped && (f.clamped || f.decimal_clamped))
            .count()
    }
}

/// Encode, decode and map the prediction back through the inverse crop.
pub fn roundtrip_error(sample: &FaceSample, cfg: &CodecConfig) -> Result<RoundTrip> {
    let target = heatmap_landmarks(sample, cfg)?;
    let enc = encode_heatmap_points(&target, cfg)?;
    let dec = decode(&enc, cfg)?;

    let (w, h) = (cfg.heatmap_shape.0 as f64, cfg.heatmap_shape.1 as f64);
    let (wi, hi) = (sample.image_size_input.0 as f64, sample.image_size_input.1 as f64);
    let uncrop = sample.crop.invert()?;
    let decoded_heatmap = dec.landmarks.map(Space::Heatmap, |p| Point2::new(p.x * w, p.y * h));
    let decoded_raw = dec
        .landmarks
        .map(Space::Raw, |p| uncrop.apply_point(Point2::new(p.x * wi, p.y * hi)));

    let errors = decoded_raw
        .points()
        .iter()
        .zip(sample.landmarks_raw.points())
        .zip(dec.landmarks.valid())
        .map(|((d, g), &v)| if v { d.distance(g) } else { 0.0 })
        .collect();

    Ok(RoundTrip {
        errors,
        valid: dec.landmarks.valid().to_vec(),
        flags: enc.flags.clone(),
        decode_flags: dec.flags,
        conflict_count: enc.conflict_count(),
        target_heatmap: target,
        decoded_heatmap,
        decoded_raw,
    })
}
