//! Annotation parsers and the canonical JSON interchange format.
//!
//! Supported inputs:
//! - 300W-style `.pts` files (1-based coordinates, shifted to 0-based on load)
//! - WFLW annotation lists (one face per line, 207 tokens)
//! - canonical JSON, the lossless format written by [`write_canonical`]

use std::collections::HashMap;
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{LandmarkSet, Point2, Space};

const WFLW_POINTS: usize = 98;
const WFLW_TOKENS: usize = WFLW_POINTS * 2 + 4 + 6 + 1;

/// WFLW per-face attribute flags, in file order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Attributes {
    pub pose: bool,
    pub expression: bool,
    pub illumination: bool,
    #[serde(rename = "make-up")]
    pub make_up: bool,
    pub occlusion: bool,
    pub blur: bool,
}

impl Attributes {
    pub const NAMES: [&'static str; 6] = ["pose", "expression", "illumination", "make-up", "occlusion", "blur"];

    pub fn as_array(&self) -> [bool; 6] {
        [
            self.pose,
            self.expression,
            self.illumination,
            self.make_up,
            self.occlusion,
            self.blur,
        ]
    }

    fn from_array(f: [bool; 6]) -> Self {
        Self {
            pose: f[0],
            expression: f[1],
            illumination: f[2],
            make_up: f[3],
            occlusion: f[4],
            blur: f[5],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnnotationRecord {
    pub id: String,
    pub image_path: String,
    pub landmarks: LandmarkSet,
    /// `[x_min, y_min, x_max, y_max]`.
    pub bbox: Option<[f64; 4]>,
    pub attributes: Option<Attributes>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnnotationFormat {
    PtsDir,
    WflwList,
    CanonicalJson,
}

impl FromStr for AnnotationFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pts" | "pts_dir" | "300w" => Ok(Self::PtsDir),
            "wflw" | "wflw_list" => Ok(Self::WflwList),
            "json" | "canonical" | "canonical_json" => Ok(Self::CanonicalJson),
            _ => Err(Error::Config(format!(
                "unknown annotation format `{s}` (valid: pts, wflw, json)"
            ))),
        }
    }
}

impl fmt::Display for AnnotationFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::PtsDir => "pts",
            Self::WflwList => "wflw",
            Self::CanonicalJson => "json",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSpec {
    pub name: String,
    pub n_landmarks: usize,
    /// Outer eye corners, when known.
    pub norm_indices: Option<(usize, usize)>,
    pub format: AnnotationFormat,
}

impl DatasetSpec {
    pub fn wflw() -> Self {
        Self {
            name: "wflw".into(),
            n_landmarks: 98,
            norm_indices: Some((60, 72)),
            format: AnnotationFormat::WflwList,
        }
    }

    pub fn w300() -> Self {
        Self {
            name: "300w".into(),
            n_landmarks: 68,
            norm_indices: Some((36, 45)),
            format: AnnotationFormat::PtsDir,
        }
    }

    /// COFW eye-corner indices depend on the conversion; none by default.
    pub fn cofw() -> Self {
        Self {
            name: "cofw".into(),
            n_landmarks: 29,
            norm_indices: None,
            format: AnnotationFormat::CanonicalJson,
        }
    }

    /// Preset keyed by landmark count, falling back to a custom spec.
    pub fn for_landmark_count(n: usize, format: AnnotationFormat) -> Self {
        let mut spec = match n {
            98 => Self::wflw(),
            68 => Self::w300(),
            29 => Self::cofw(),
            _ => Self {
                name: "custom".into(),
                n_landmarks: n,
                norm_indices: None,
                format,
            },
        };
        spec.format = format;
        spec
    }
}

fn parse_f64(tok: &str, line: usize, what: &str) -> Result<f64> {
    let v: f64 = tok
        .parse()
        .map_err(|_| Error::parse(line, format!("expected a number for {what}, found `{tok}`")))?;
    if !v.is_finite() {
        return Err(Error::parse(line, format!("non-finite {what} `{tok}`")));
    }
    Ok(v)
}

/// Parse a `.pts` file. Coordinates are shifted by −1 to 0-based.
pub fn parse_pts(text: &str) -> Result<LandmarkSet> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty());

    let mut expected = None;
    let mut last_line = 0;
    loop {
        let Some((no, line)) = lines.next() else {
            return Err(Error::parse(last_line + 1, "missing `{` before point list"));
        };
        last_line = no;
        if line == "{" {
            break;
        }
        let Some((key, value)) = line.split_once(':') else {
            return Err(Error::parse(no, format!("malformed header line `{line}`")));
        };
        match key.trim() {
            "version" => {
                value
                    .trim()
                    .parse::<f64>()
                    .map_err(|_| Error::parse(no, format!("bad version `{}`", value.trim())))?;
            }
            "n_points" => {
                let n: usize = value
                    .trim()
                    .parse()
                    .map_err(|_| Error::parse(no, format!("bad n_points `{}`", value.trim())))?;
                if n == 0 {
                    return Err(Error::parse(no, "n_points must be positive"));
                }
                expected = Some(n);
            }
            other => return Err(Error::parse(no, format!("unknown header key `{other}`"))),
        }
    }
    let expected = expected.ok_or_else(|| Error::parse(last_line, "missing n_points header"))?;

    let mut points = Vec::with_capacity(expected);
    let mut closed = false;
    for (no, line) in lines.by_ref() {
        last_line = no;
        if line == "}" {
            closed = true;
            break;
        }
        let mut toks = line.split_whitespace();
        let (Some(x), Some(y), None) = (toks.next(), toks.next(), toks.next()) else {
            return Err(Error::parse(no, format!("expected `x y`, found `{line}`")));
        };
        if points.len() == expected {
            return Err(Error::parse(no, format!("count mismatch: more than {expected} points")));
        }
        points.push(Point2::new(parse_f64(x, no, "x")? - 1.0, parse_f64(y, no, "y")? - 1.0));
    }
    if !closed {
        return Err(Error::parse(last_line + 1, "missing closing `}`"));
    }
    if points.len() != expected {
        return Err(Error::parse(
            last_line,
            format!(
                "count mismatch: n_points is {expected} but {} points listed",
                points.len()
            ),
        ));
    }
    if let Some((no, l)) = lines.next() {
        return Err(Error::parse(no, format!("unexpected content after `}}`: `{l}`")));
    }
    LandmarkSet::new(points, Space::Raw)
}

/// Render landmarks as a `.pts` file (0-based → 1-based).
pub fn write_pts(lms: &LandmarkSet) -> String {
    let mut out = format!("version: 1\nn_points: {}\n{{\n", lms.len());
    for p in lms.points() {
        out.push_str(&format!("{} {}\n", p.x + 1.0, p.y + 1.0));
    }
    out.push_str("}\n");
    out
}

/// Parse one WFLW annotation line. `line_no` is only used in errors.
pub fn parse_wflw_line(line: &str, line_no: usize) -> Result<AnnotationRecord> {
    let toks: Vec<&str> = line.split_whitespace().collect();
    if toks.len() != WFLW_TOKENS {
        return Err(Error::parse(
            line_no,
            format!("expected {WFLW_TOKENS} tokens, found {}", toks.len()),
        ));
    }
    let mut points = Vec::with_capacity(WFLW_POINTS);
    for k in 0..WFLW_POINTS {
        points.push(Point2::new(
            parse_f64(toks[2 * k], line_no, &format!("landmark {k} x"))?,
            parse_f64(toks[2 * k + 1], line_no, &format!("landmark {k} y"))?,
        ));
    }
    let b = 2 * WFLW_POINTS;
    let mut bbox = [0.0; 4];
    for (i, v) in bbox.iter_mut().enumerate() {
        *v = parse_f64(toks[b + i], line_no, "bbox")?;
    }
    if bbox[0] > bbox[2] || bbox[1] > bbox[3] {
        return Err(Error::parse(
            line_no,
            "bbox is not ordered (x_min > x_max or y_min > y_max)",
        ));
    }
    let mut flags = [false; 6];
    for (i, f) in flags.iter_mut().enumerate() {
        *f = match toks[b + 4 + i] {
            "0" => false,
            "1" => true,
            other => {
                return Err(Error::parse(
                    line_no,
                    format!("attribute `{}` must be 0 or 1, found `{other}`", Attributes::NAMES[i]),
                ))
            }
        };
    }
    let path = toks[WFLW_TOKENS - 1].to_string();
    Ok(AnnotationRecord {
        id: path.clone(),
        image_path: path,
        landmarks: LandmarkSet::new(points, Space::Raw)?,
        bbox: Some(bbox),
        attributes: Some(Attributes::from_array(flags)),
    })
}

/// Parse a whole WFLW list. Repeated image paths get `#k` id suffixes.
pub fn parse_wflw_list(text: &str) -> Result<Vec<AnnotationRecord>> {
    let mut seen: HashMap<String, usize> = HashMap::new();
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let mut rec = parse_wflw_line(line, i + 1)?;
        let count = seen.entry(rec.image_path.clone()).or_insert(0);
        if *count > 0 {
            rec.id = format!("{}#{}", rec.image_path, count);
        }
        *count += 1;
        out.push(rec);
    }
    if out.is_empty() {
        return Err(Error::parse(1, "annotation list is empty"));
    }
    Ok(out)
}

pub fn write_wflw_line(rec: &AnnotationRecord) -> Result<String> {
    if rec.landmarks.len() != WFLW_POINTS {
        return Err(Error::Shape(format!(
            "WFLW needs 98 landmarks, record has {}",
            rec.landmarks.len()
        )));
    }
    let mut toks: Vec<String> = Vec::with_capacity(WFLW_TOKENS);
    for p in rec.landmarks.points() {
        toks.push(p.x.to_string());
        toks.push(p.y.to_string());
    }
    let bbox = rec.bbox.unwrap_or_default();
    toks.extend(bbox.iter().map(|v| v.to_string()));
    let attrs = rec.attributes.unwrap_or_default();
    toks.extend(attrs.as_array().iter().map(|&f| if f { "1" } else { "0" }.to_string()));
    toks.push(rec.image_path.clone());
    Ok(toks.join(" "))
}

/// Number of faces carrying each WFLW attribute, in [`Attributes::NAMES`] order.
pub fn subset_counts(records: &[AnnotationRecord]) -> [usize; 6] {
    let mut counts = [0; 6];
    for r in records {
        if let Some(a) = r.attributes {
            for (c, f) in counts.iter_mut().zip(a.as_array()) {
                *c += f as usize;
            }
        }
    }
    counts
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CanonicalRecord {
    id: String,
    image_path: String,
    points: Vec<[f64; 2]>,
    bbox: Option<[f64; 4]>,
    attributes: Option<Attributes>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CanonicalFile {
    dataset: String,
    n_landmarks: usize,
    records: Vec<CanonicalRecord>,
}

/// A parsed canonical JSON document.
#[derive(Debug, Clone, PartialEq)]
pub struct Canonical {
    pub dataset: String,
    pub n_landmarks: usize,
    pub records: Vec<AnnotationRecord>,
}

pub fn canonical_to_string(dataset: &str, records: &[AnnotationRecord]) -> Result<String> {
    let n_landmarks = records.first().map_or(0, |r| r.landmarks.len());
    let file = CanonicalFile {
        dataset: dataset.to_string(),
        n_landmarks,
        records: records
            .iter()
            .map(|r| {
                if r.landmarks.len() != n_landmarks {
                    return Err(Error::Shape(format!(
                        "record `{}` has {} landmarks, expected {n_landmarks}",
                        r.id,
                        r.landmarks.len()
                    )));
                }
                Ok(CanonicalRecord {
                    id: r.id.clone(),
                    image_path: r.image_path.clone(),
                    points: r.landmarks.points().iter().map(|p| [p.x, p.y]).collect(),
                    bbox: r.bbox,
                    attributes: r.attributes,
                })
            })
            .collect::<Result<_>>()?,
    };
    serde_json::to_string_pretty(&file).map_err(|e| Error::Schema {
        field: "<document>".into(),
        message: e.to_string(),
    })
}

pub fn canonical_from_str(text: &str) -> Result<Canonical> {
    let file: CanonicalFile = serde_json::from_str(text).map_err(|e| {
        let msg = e.to_string();
        let field = msg
            .split('`')
            .nth(1)
            .map(str::to_string)
            .unwrap_or_else(|| "<document>".into());
        Error::Schema {
            field,
            message: msg.to_string(),
        }
    })?;
    if file.n_landmarks == 0 {
        return Err(Error::Schema {
            field: "n_landmarks".into(),
            message: "must be positive".into(),
        });
    }
    let records = file
        .records
        .into_iter()
        .enumerate()
        .map(|(i, r)| {
            if r.points.len() != file.n_landmarks {
                return Err(Error::Schema {
                    field: format!("records[{i}].points"),
                    message: format!("{} points, expected {}", r.points.len(), file.n_landmarks),
                });
            }
            if let Some(b) = r.bbox {
                if b[0] > b[2] || b[1] > b[3] {
                    return Err(Error::Schema {
                        field: format!("records[{i}].bbox"),
                        message: "box is not ordered".into(),
                    });
                }
            }
            let points = r.points.iter().map(|&[x, y]| Point2::new(x, y)).collect();
            let landmarks = LandmarkSet::new(points, Space::Raw).map_err(|e| Error::Schema {
                field: format!("records[{i}].points"),
                message: e.to_string(),
            })?;
            Ok(AnnotationRecord {
                id: r.id,
                image_path: r.image_path,
                landmarks,
                bbox: r.bbox,
                attributes: r.attributes,
            })
        })
        .collect::<Result<_>>()?;
    Ok(Canonical {
        dataset: file.dataset,
        n_landmarks: file.n_landmarks,
        records,
    })
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn load_canonical(path: &Path) -> Result<Canonical> {
    canonical_from_str(&read(path)?)
}

pub fn write_canonical(path: &Path, dataset: &str, records: &[AnnotationRecord]) -> Result<()> {
    let text = canonical_to_string(dataset, records)?;
    fs::write(path, text + "\n").map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })
}

/// All `*.pts` files under `dir` (non-recursive), sorted by path.
pub fn load_pts_dir(dir: &Path) -> Result<Vec<AnnotationRecord>> {
    let entries = fs::read_dir(dir).map_err(|source| Error::Io {
        path: dir.display().to_string(),
        source,
    })?;
    let mut paths = Vec::new();
    for e in entries {
        let e = e.map_err(|source| Error::Io {
            path: dir.display().to_string(),
            source,
        })?;
        let p = e.path();
        if p.extension().is_some_and(|x| x.eq_ignore_ascii_case("pts")) {
            paths.push(p);
        }
    }
    paths.sort();
    if paths.is_empty() {
        return Err(Error::Config(format!("no .pts files in {}", dir.display())));
    }
    paths
        .iter()
        .map(|p| {
            let name = p.display().to_string();
            let landmarks = parse_pts(&read(p)?).map_err(|e| e.with_source(&name))?;
            let stem = p
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_default();
            Ok(AnnotationRecord {
                id: stem.clone(),
                image_path: stem,
                landmarks,
                bbox: None,
                attributes: None,
            })
        })
        .collect()
}

/// A dataset loaded from any supported source.
#[derive(Debug, Clone)]
pub struct LoadedDataset {
    pub spec: DatasetSpec,
    pub records: Vec<AnnotationRecord>,
}

/// Load a dataset given as `format:path`, e.g. `wflw:list_98pt_test.txt`.
pub fn load_dataset(arg: &str) -> Result<LoadedDataset> {
    let (fmt, path) = arg
        .split_once(':')
        .ok_or_else(|| Error::Config(format!("dataset must be given as <format>:<path>, got `{arg}`")))?;
    let format: AnnotationFormat = fmt.parse()?;
    let path = Path::new(path);
    let (name, records) = match format {
        AnnotationFormat::PtsDir => (None, load_pts_dir(path)?),
        AnnotationFormat::WflwList => {
            let name = path.display().to_string();
            (None, parse_wflw_list(&read(path)?).map_err(|e| e.with_source(&name))?)
        }
        AnnotationFormat::CanonicalJson => {
            let c = load_canonical(path)?;
            (Some(c.dataset), c.records)
        }
    };
    let n = records[0].landmarks.len();
    if let Some(r) = records.iter().find(|r| r.landmarks.len() != n) {
        return Err(Error::Shape(format!(
            "record `{}` has {} landmarks, expected {n}",
            r.id,
            r.landmarks.len()
        )));
    }
    let mut spec = DatasetSpec::for_landmark_count(n, format);
    if let Some(name) = name {
        spec.name = name;
    }
    Ok(LoadedDataset { spec, records })
}
