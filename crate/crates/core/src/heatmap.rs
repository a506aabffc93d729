//! Dense scalar grids, truncated-Gaussian label rendering and deterministic
//! peak extraction.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Absolute tolerance used to group second-place responses.
pub const DEFAULT_TIE_EPS: f64 = 1e-9;

/// Integer cell coordinate, `x` is the column and `y` the row.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct GridPoint {
    pub x: usize,
    pub y: usize,
}

impl GridPoint {
    pub const fn new(x: usize, y: usize) -> Self {
        Self { x, y }
    }
}

/// Clamp a signed cell into a `(w, h)` grid. The flag reports whether
/// clamping moved the cell.
pub fn clamp_to_grid(x: i64, y: i64, shape: (usize, usize)) -> (GridPoint, bool) {
    let cx = x.clamp(0, shape.0 as i64 - 1);
    let cy = y.clamp(0, shape.1 as i64 - 1);
    (GridPoint::new(cx as usize, cy as usize), cx != x || cy != y)
}

/// Inclusive cell rectangle `x0..=x1, y0..=y1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Rect {
    x0: usize,
    y0: usize,
    x1: usize,
    y1: usize,
}

impl Rect {
    fn contains(&self, x: usize, y: usize) -> bool {
        x >= self.x0 && x <= self.x1 && y >= self.y0 && y <= self.y1
    }

    fn union(self, o: Rect) -> Rect {
        Rect {
            x0: self.x0.min(o.x0),
            y0: self.y0.min(o.y0),
            x1: self.x1.max(o.x1),
            y1: self.y1.max(o.y1),
        }
    }
}

/// `h × w` grid stored row-major.
///
/// The grid remembers a rectangle outside of which every value is known to
/// be zero, so peak searches on sparse labels only touch the written window.
/// Results are identical to a full scan.
#[derive(Debug, Clone)]
pub struct HeatmapGrid {
    width: usize,
    height: usize,
    values: Vec<f64>,
    support: Option<Rect>,
}

impl PartialEq for HeatmapGrid {
    fn eq(&self, other: &Self) -> bool {
        self.width == other.width && self.height == other.height && self.values == other.values
    }
}

impl HeatmapGrid {
    pub fn zeros(width: usize, height: usize) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Shape(format!("grid must be non-empty, got {width}x{height}")));
        }
        Ok(Self {
            width,
            height,
            values: vec![0.0; width * height],
            support: None,
        })
    }

    pub fn from_values(width: usize, height: usize, values: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 || values.len() != width * height {
            return Err(Error::Shape(format!(
                "{} values do not fill a {width}x{height} grid",
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("grid value".into()));
        }
        let support = Some(Rect {
            x0: 0,
            y0: 0,
            x1: width - 1,
            y1: height - 1,
        });
        Ok(Self {
            width,
            height,
            values,
            support,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, p: GridPoint) -> f64 {
        self.values[p.y * self.width + p.x]
    }

    pub fn set(&mut self, p: GridPoint, v: f64) {
        self.values[p.y * self.width + p.x] = v;
        self.touch(Rect {
            x0: p.x,
            y0: p.y,
            x1: p.x,
            y1: p.y,
        });
    }

    fn touch(&mut self, r: Rect) {
        self.support = Some(match self.support {
            Some(s) => s.union(r),
            None => r,
        });
    }

    fn point(&self, idx: usize) -> GridPoint {
        GridPoint::new(idx % self.width, idx / self.width)
    }

    fn is_full(&self) -> bool {
        self.support
            == Some(Rect {
                x0: 0,
                y0: 0,
                x1: self.width - 1,
                y1: self.height - 1,
            })
    }

    /// Smallest row-major index outside the support other than `exclude`.
    fn first_outside(&self, exclude: usize) -> Option<usize> {
        (0..self.values.len())
            .find(|&i| i != exclude && !self.support.is_some_and(|s| s.contains(i % self.width, i / self.width)))
    }

    /// Largest value and its smallest row-major index within the support
    /// rows `y0..=y1`, columns `x0..=x1`, skipping `exclude`.
    fn scan_rect(&self, r: Rect, exclude: usize) -> (f64, usize) {
        let mut out = (f64::NEG_INFINITY, usize::MAX);
        for y in r.y0..=r.y1 {
            let base = y * self.width;
            for (x, &v) in self.values[base + r.x0..=base + r.x1].iter().enumerate() {
                let i = base + r.x0 + x;
                if v > out.0 && i != exclude {
                    out = (v, i);
                }
            }
        }
        out
    }

    /// Largest value and its smallest row-major index, skipping `exclude`.
    fn scan_max(&self, exclude: usize) -> (f64, usize) {
        let mut out = match self.support {
            Some(r) => self.scan_rect(r, exclude),
            None => (f64::NEG_INFINITY, usize::MAX),
        };
        if !self.is_full() {
            if let Some(o) = self.first_outside(exclude) {
                if 0.0 > out.0 || (0.0 == out.0 && o < out.1) {
                    out = (0.0, o);
                }
            }
        }
        out
    }

    /// Location of the maximum; ties go to the smallest row-major index.
    pub fn argmax(&self) -> GridPoint {
        self.point(self.scan_max(usize::MAX).1)
    }

    /// Global maximum plus every other cell within `tie_eps` of the
    /// second-largest value, in row-major order.
    pub fn top2(&self, tie_eps: f64) -> Result<Top2> {
        if self.values.len() < 2 {
            return Err(Error::Shape("top2 needs at least two cells".into()));
        }
        let (max_value, max_idx) = self.scan_max(usize::MAX);
        let (second_value, _) = self.scan_max(max_idx);
        let floor = second_value - tie_eps;
        let rows = match self.support {
            Some(r) if floor > 0.0 => r,
            _ => Rect {
                x0: 0,
                y0: 0,
                x1: self.width - 1,
                y1: self.height - 1,
            },
        };
        let mut second = Vec::new();
        for y in rows.y0..=rows.y1 {
            let base = y * self.width;
            for x in rows.x0..=rows.x1 {
                let i = base + x;
                if self.values[i] >= floor && i != max_idx {
                    second.push(self.point(i));
                }
            }
        }
        Ok(Top2 {
            max: self.point(max_idx),
            max_value,
            second,
            second_value,
        })
    }

    /// Row-major CSV, one grid row per line, values at 17 significant digits.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for row in self.values.chunks(self.width) {
            for (i, v) in row.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                out.push_str(&format_g17(*v));
            }
            out.push('\n');
        }
        out
    }

    /// Nonzero cells as `(row, col, value)`.
    pub fn nonzero(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.values
            .iter()
            .enumerate()
            .filter(|(_, &v)| v != 0.0)
            .map(move |(i, &v)| (i / self.width, i % self.width, v))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Top2 {
    pub max: GridPoint,
    pub max_value: f64,
    pub second: Vec<GridPoint>,
    pub second_value: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianSpec {
    pub sigma: f64,
}

impl GaussianSpec {
    pub fn new(sigma: f64) -> Result<Self> {
        if !(sigma > 0.0) || !sigma.is_finite() {
            return Err(Error::Config(format!("sigma must be positive, got {sigma}")));
        }
        Ok(Self { sigma })
    }

    /// Support radius in the ∞-norm.
    pub fn truncation_radius(&self) -> f64 {
        3.0 * self.sigma
    }
}

/// Truncated Gaussian `exp(-‖o - c‖² / 2σ²)` for `‖o - c‖∞ ≤ 3σ`, zero
/// elsewhere. The peak value at `center` is exactly 1.
pub fn render_gaussian(center: GridPoint, spec: GaussianSpec, shape: (usize, usize)) -> Result<HeatmapGrid> {
    let mut grid = HeatmapGrid::zeros(shape.0, shape.1)?;
    if center.x >= shape.0 || center.y >= shape.1 {
        return Err(Error::Shape(format!(
            "center ({}, {}) outside {}x{} grid",
            center.x, center.y, shape.0, shape.1
        )));
    }
    GaussianSpec::new(spec.sigma)?;
    let reach = spec.truncation_radius().floor() as i64;
    let denom = 2.0 * spec.sigma * spec.sigma;
    let (cx, cy) = (center.x as i64, center.y as i64);
    let (w, h) = (shape.0 as i64, shape.1 as i64);
    for y in (cy - reach).max(0)..=(cy + reach).min(h - 1) {
        let dy = (y - cy) as f64;
        for x in (cx - reach).max(0)..=(cx + reach).min(w - 1) {
            let dx = (x - cx) as f64;
            let v = (-(dx * dx + dy * dy) / denom).exp();
            grid.values[(y * w + x) as usize] = v;
        }
    }
    let clip = |v: i64, hi: i64| v.clamp(0, hi) as usize;
    grid.touch(Rect {
        x0: clip(cx - reach, w - 1),
        y0: clip(cy - reach, h - 1),
        x1: clip(cx + reach, w - 1),
        y1: clip(cy + reach, h - 1),
    });
    Ok(grid)
}

/// `printf("%.17g")` formatting.
pub fn format_g17(v: f64) -> String {
    if v == 0.0 {
        return if v.is_sign_negative() { "-0".into() } else { "0".into() };
    }
    if !v.is_finite() {
        return format!("{v}");
    }
    let sci = format!("{v:.16e}");
    let (mantissa, exp) = sci.split_once('e').expect("scientific format");
    let exp: i32 = exp.parse().expect("exponent");
    if !(-4..17).contains(&exp) {
        let mantissa = trim_fraction(mantissa);
        let mut out = String::new();
        let _ = write!(out, "{}e{}{:02}", mantissa, if exp < 0 { '-' } else { '+' }, exp.abs());
        out
    } else {
        let decimals = (16 - exp) as usize;
        trim_fraction(&format!("{v:.decimals$}")).to_string()
    }
}

fn trim_fraction(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}
