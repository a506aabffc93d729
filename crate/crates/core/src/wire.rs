//! Sparse JSON debug format for [`EncodedSample`].
//!
//! Grids are stored as lists of `"k,row,col,value"` strings, one per nonzero
//! cell, where `k` is the landmark index (always 0 for the shared WOM
//! offset maps). Values use shortest round-trip formatting, so decoding the
//! JSON reproduces the in-memory sample bit for bit.

use serde::{Deserialize, Serialize};

use crate::codecs::{EncodedSample, Payload, PointFlags, Scheme};
use crate::error::{Error, Result};
use crate::heatmap::HeatmapGrid;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncodedJson {
    pub scheme: Scheme,
    pub heatmap_shape: [usize; 2],
    pub decimal_shape: [usize; 2],
    pub n_landmarks: usize,
    pub integer: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub decimal: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub offset_values: Option<Vec<[f64; 2]>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub offset_x: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub offset_y: Option<Vec<String>>,
    #[serde(default)]
    pub conflict_count: usize,
    pub flags: Vec<PointFlags>,
}

fn sparse(grids: &[HeatmapGrid]) -> Vec<String> {
    grids
        .iter()
        .enumerate()
        .flat_map(|(k, g)| g.nonzero().map(move |(r, c, v)| format!("{k},{r},{c},{v}")))
        .collect()
}

fn dense(entries: &[String], count: usize, shape: [usize; 2], field: &str) -> Result<Vec<HeatmapGrid>> {
    let mut grids = (0..count)
        .map(|_| HeatmapGrid::zeros(shape[0], shape[1]))
        .collect::<Result<Vec<_>>>()?;
    for (i, e) in entries.iter().enumerate() {
        let bad = |msg: &str| Error::Schema {
            field: format!("{field}[{i}]"),
            message: format!("{msg}: `{e}`"),
        };
        let parts: Vec<&str> = e.split(',').collect();
        if parts.len() != 4 {
            return Err(bad("expected k,row,col,value"));
        }
        let k: usize = parts[0].parse().map_err(|_| bad("bad landmark index"))?;
        let r: usize = parts[1].parse().map_err(|_| bad("bad row"))?;
        let c: usize = parts[2].parse().map_err(|_| bad("bad column"))?;
        let v: f64 = parts[3].parse().map_err(|_| bad("bad value"))?;
        if k >= count || r >= shape[1] || c >= shape[0] || !v.is_finite() {
            return Err(bad("entry out of range"));
        }
        grids[k].set(crate::heatmap::GridPoint::new(c, r), v);
    }
    Ok(grids)
}

impl EncodedJson {
    pub fn from_sample(enc: &EncodedSample) -> Self {
        let mut out = Self {
            scheme: enc.scheme,
            heatmap_shape: [enc.heatmap_shape.0, enc.heatmap_shape.1],
            decimal_shape: [enc.decimal_shape.0, enc.decimal_shape.1],
            n_landmarks: enc.len(),
            integer: sparse(&enc.integer),
            decimal: None,
            offset_values: None,
            offset_x: None,
            offset_y: None,
            conflict_count: 0,
            flags: enc.flags.clone(),
        };
        match &enc.payload {
            Payload::None => {}
            Payload::OffsetValues(v) => out.offset_values = Some(v.clone()),
            Payload::OffsetMaps { x, y, conflict_count } => {
                out.offset_x = Some(sparse(std::slice::from_ref(x)));
                out.offset_y = Some(sparse(std::slice::from_ref(y)));
                out.conflict_count = *conflict_count;
            }
            Payload::Decimal(d) => out.decimal = Some(sparse(d)),
        }
        out
    }

    pub fn to_sample(&self) -> Result<EncodedSample> {
        let n = self.n_landmarks;
        if n == 0 || self.flags.len() != n {
            return Err(Error::Schema {
                field: "flags".into(),
                message: format!("{} flags for {n} landmarks", self.flags.len()),
            });
        }
        let missing = |field: &str| Error::Schema {
            field: field.into(),
            message: format!("required for scheme {}", self.scheme),
        };
        let integer = dense(&self.integer, n, self.heatmap_shape, "integer")?;
        let payload = match self.scheme {
            Scheme::Direct | Scheme::Wsm => Payload::None,
            Scheme::Wov => {
                let v = self.offset_values.clone().ok_or_else(|| missing("offset_values"))?;
                if v.len() != n {
                    return Err(Error::Schema {
                        field: "offset_values".into(),
                        message: format!("{} entries for {n} landmarks", v.len()),
                    });
                }
                Payload::OffsetValues(v)
            }
            Scheme::Wom => {
                let x = self.offset_x.as_ref().ok_or_else(|| missing("offset_x"))?;
                let y = self.offset_y.as_ref().ok_or_else(|| missing("offset_y"))?;
                Payload::OffsetMaps {
                    x: dense(x, 1, self.heatmap_shape, "offset_x")?.remove(0),
                    y: dense(y, 1, self.heatmap_shape, "offset_y")?.remove(0),
                    conflict_count: self.conflict_count,
                }
            }
            Scheme::Hih => {
                let d = self.decimal.as_ref().ok_or_else(|| missing("decimal"))?;
                Payload::Decimal(dense(d, n, self.decimal_shape, "decimal")?)
            }
        };
        Ok(EncodedSample {
            scheme: self.scheme,
            heatmap_shape: (self.heatmap_shape[0], self.heatmap_shape[1]),
            decimal_shape: (self.decimal_shape[0], self.decimal_shape[1]),
            integer,
            payload,
            flags: self.flags.clone(),
        })
    }
}

pub fn encoded_to_json(enc: &EncodedSample) -> String {
    serde_json::to_string_pretty(&EncodedJson::from_sample(enc)).expect("encoded sample serializes")
}

pub fn encoded_from_json(text: &str) -> Result<EncodedSample> {
    let parsed: EncodedJson = serde_json::from_str(text).map_err(|e| Error::Schema {
        field: e.to_string().split('`').nth(1).unwrap_or("<document>").to_string(),
        message: e.to_string(),
    })?;
    parsed.to_sample()
}
