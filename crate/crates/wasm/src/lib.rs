//! Browser bindings for the codec demo page.
//!
//! Every export takes plain numbers and returns a JSON string. The
//! `*_json` functions carry the logic and run natively so they can be tested
//! without a browser; the `#[wasm_bindgen]` wrappers only convert errors.

use hih_core::codecs::{decode, encode_heatmap_points, relative_offset, Payload};
use hih_core::{CodecConfig, LandmarkSet, Point2, Scheme, Space};
use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

/// Half-width of the integer heatmap window shipped to the page.
const WINDOW_RADIUS: usize = 5;
/// Cap on lattice size so one call stays interactive.
const MAX_STEPS: usize = 256;
const MAX_RES: usize = 1024;

fn config(heatmap_res: usize, decimal_res: usize, sigma_int: f64, sigma_dec: f64) -> Result<CodecConfig, String> {
    if heatmap_res > MAX_RES || decimal_res > MAX_RES {
        return Err(format!("resolution above {MAX_RES} is not supported here"));
    }
    let cfg = CodecConfig {
        heatmap_shape: (heatmap_res, heatmap_res),
        decimal_shape: (decimal_res, decimal_res),
        sigma_integer: sigma_int,
        sigma_decimal: sigma_dec,
        ..CodecConfig::default()
    };
    cfg.validate().map_err(|e| e.to_string())?;
    Ok(cfg)
}

/// Encode and decode one heatmap-space point, returning the decoded point in
/// heatmap pixels.
fn roundtrip(p: Point2, cfg: &CodecConfig) -> Result<Point2, String> {
    let pts = LandmarkSet::new(vec![p], Space::Heatmap).map_err(|e| e.to_string())?;
    let enc = encode_heatmap_points(&pts, cfg).map_err(|e| e.to_string())?;
    let dec = decode(&enc, cfg).map_err(|e| e.to_string())?;
    let q = dec.landmarks.points()[0];
    let (w, h) = cfg.heatmap_shape;
    Ok(Point2::new(q.x * w as f64, q.y * h as f64))
}

fn check_steps(steps: usize) -> Result<(), String> {
    if steps == 0 || steps > MAX_STEPS {
        return Err(format!("steps must be in 1..={MAX_STEPS}, got {steps}"));
    }
    Ok(())
}

/// Decode of `(x, y)` by every scheme plus the HIH label maps around it.
pub fn codec_panel_json(
    x: f64,
    y: f64,
    heatmap_res: usize,
    decimal_res: usize,
    sigma_int: f64,
    sigma_dec: f64,
) -> Result<String, String> {
    let base = config(heatmap_res, decimal_res, sigma_int, sigma_dec)?;
    let p = Point2::new(x, y);
    if !p.is_finite() {
        return Err("point must be finite".into());
    }

    let mut schemes = Vec::new();
    for scheme in Scheme::ALL {
        let q = roundtrip(p, &base.with_scheme(scheme))?;
        schemes.push(json!({
            "scheme": scheme.name(),
            "decoded": [q.x, q.y],
            "error": p.distance(&q),
        }));
    }

    let hih = base.with_scheme(Scheme::Hih);
    let pts = LandmarkSet::new(vec![p], Space::Heatmap).map_err(|e| e.to_string())?;
    let enc = encode_heatmap_points(&pts, &hih).map_err(|e| e.to_string())?;
    let grid = &enc.integer[0];
    let peak = grid.argmax();
    let x0 = peak.x.saturating_sub(WINDOW_RADIUS);
    let y0 = peak.y.saturating_sub(WINDOW_RADIUS);
    let x1 = (peak.x + WINDOW_RADIUS).min(grid.width() - 1);
    let y1 = (peak.y + WINDOW_RADIUS).min(grid.height() - 1);
    let window: Vec<f64> = (y0..=y1)
        .flat_map(|r| (x0..=x1).map(move |c| (r, c)))
        .map(|(r, c)| grid.values()[r * grid.width() + c])
        .collect();

    let decimal = match &enc.payload {
        Payload::Decimal(maps) => {
            let m = &maps[0];
            let c = m.argmax();
            json!({ "width": m.width(), "height": m.height(), "values": m.values(), "peak": [c.x, c.y] })
        }
        _ => Value::Null,
    };
    let off = relative_offset(p, hih.heatmap_shape).map_err(|e| e.to_string())?;

    let out = json!({
        "point": [x, y],
        "cell": [off.cell.x, off.cell.y],
        "offset": off.offset,
        "schemes": schemes,
        "integer": {
            "x0": x0, "y0": y0,
            "width": x1 - x0 + 1, "height": y1 - y0 + 1,
            "peak": [peak.x, peak.y],
            "values": window,
        },
        "decimal": decimal,
    });
    Ok(out.to_string())
}

/// Round-trip error of each scheme over a `steps × steps` lattice of
/// sub-pixel offsets inside the central heatmap cell.
pub fn residual_field_json(heatmap_res: usize, decimal_res: usize, steps: usize) -> Result<String, String> {
    check_steps(steps)?;
    let base = config(heatmap_res, decimal_res, 1.5, 1.0)?;
    let c = (heatmap_res / 2) as f64;
    let mut fields = Vec::new();
    for scheme in Scheme::ALL {
        let cfg = base.with_scheme(scheme);
        let mut values = Vec::with_capacity(steps * steps);
        for j in 0..steps {
            for i in 0..steps {
                let p = Point2::new(c + (i as f64 + 0.5) / steps as f64, c + (j as f64 + 0.5) / steps as f64);
                values.push(p.distance(&roundtrip(p, &cfg)?));
            }
        }
        let mean = values.iter().sum::<f64>() / values.len() as f64;
        let max = values.iter().copied().fold(0.0, f64::max);
        fields.push(json!({ "scheme": scheme.name(), "values": values, "mean": mean, "max": max }));
    }
    Ok(json!({ "steps": steps, "fields": fields }).to_string())
}

/// Mean HIH and DIRECT lattice error for decimal resolutions `1..=max_decimal_res`.
pub fn resolution_sweep_json(heatmap_res: usize, max_decimal_res: usize, steps: usize) -> Result<String, String> {
    check_steps(steps)?;
    if max_decimal_res == 0 || max_decimal_res > 64 {
        return Err(format!(
            "max decimal resolution must be in 1..=64, got {max_decimal_res}"
        ));
    }
    let c = (heatmap_res / 2) as f64;
    let lattice: Vec<Point2> = (0..steps * steps)
        .map(|k| {
            let (i, j) = (k % steps, k / steps);
            Point2::new(c + (i as f64 + 0.5) / steps as f64, c + (j as f64 + 0.5) / steps as f64)
        })
        .collect();
    let mean_error = |cfg: &CodecConfig| -> Result<f64, String> {
        let mut sum = 0.0;
        for p in &lattice {
            sum += p.distance(&roundtrip(*p, cfg)?);
        }
        Ok(sum / lattice.len() as f64)
    };

    let direct = mean_error(&config(heatmap_res, 1, 1.5, 1.0)?.with_scheme(Scheme::Direct))?;
    let mut rows = Vec::new();
    for r in 1..=max_decimal_res {
        let hih = mean_error(&config(heatmap_res, r, 1.5, 1.0)?.with_scheme(Scheme::Hih))?;
        rows.push(json!({
            "decimal_res": r,
            "hih": hih,
            "direct": direct,
            "ratio": if hih > 0.0 { direct / hih } else { f64::INFINITY },
        }));
    }
    Ok(json!({ "steps": steps, "rows": rows }).to_string())
}

#[wasm_bindgen]
pub fn codec_panel(
    x: f64,
    y: f64,
    heatmap_res: usize,
    decimal_res: usize,
    sigma_int: f64,
    sigma_dec: f64,
) -> Result<String, JsValue> {
    codec_panel_json(x, y, heatmap_res, decimal_res, sigma_int, sigma_dec).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn residual_field(heatmap_res: usize, decimal_res: usize, steps: usize) -> Result<String, JsValue> {
    residual_field_json(heatmap_res, decimal_res, steps).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn resolution_sweep(heatmap_res: usize, max_decimal_res: usize, steps: usize) -> Result<String, JsValue> {
    resolution_sweep_json(heatmap_res, max_decimal_res, steps).map_err(|e| JsValue::from_str(&e))
}
