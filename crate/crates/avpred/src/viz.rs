//! Flow colorization (HSV wheel) and PNG output.

use std::path::Path;

use crate::error::{Error, Result};

/// HxWx3 RGB in [0,1]: hue encodes flow direction, saturation encodes
/// magnitude relative to the image's 99th-percentile magnitude, value is 1.
/// Zero flow maps to white.
pub fn flow_to_color(flow: &[f64], h: usize, w: usize) -> Result<Vec<f64>> {
    let plane = h * w;
    if flow.len() != 2 * plane {
        return Err(Error::Eval(format!(
            "flow length {} does not match 2x{h}x{w}",
            flow.len()
        )));
    }
    let mags: Vec<f64> = (0..plane)
        .map(|p| (flow[p] * flow[p] + flow[plane + p] * flow[plane + p]).sqrt())
        .collect();
    let mut sorted = mags.clone();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite magnitudes"));
    let idx = ((plane - 1) as f64 * 0.99).round() as usize;
    let f_max = sorted[idx];
    let mut out = vec![0.0; plane * 3];
    for p in 0..plane {
        let (fx, fy) = (flow[p], flow[plane + p]);
        let sat = if f_max > 1e-12 {
            (mags[p] / f_max).min(1.0)
        } else {
            0.0
        };
        let hue_deg = fy.atan2(fx).to_degrees().rem_euclid(360.0);
        let (r, g, b) = hsv_to_rgb(hue_deg, sat, 1.0);
        out[p * 3] = r;
        out[p * 3 + 1] = g;
        out[p * 3 + 2] = b;
    }
    Ok(out)
}

pub fn hsv_to_rgb(h_deg: f64, s: f64, v: f64) -> (f64, f64, f64) {
    let c = v * s;
    let hp = h_deg / 60.0;
    let x = c * (1.0 - (hp.rem_euclid(2.0) - 1.0).abs());
    let (r1, g1, b1) = match hp as u32 {
        0 => (c, x, 0.0),
        1 => (x, c, 0.0),
        2 => (0.0, c, x),
        3 => (0.0, x, c),
        4 => (x, 0.0, c),
        _ => (c, 0.0, x),
    };
    let m = v - c;
    (r1 + m, g1 + m, b1 + m)
}

fn to_u8(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

/// Write a [C,H,W] frame (C = 1 or 3) as a PNG.
pub fn save_frame_png(frame: &[f64], channels: usize, h: usize, w: usize, path: &Path) -> Result<()> {
    let plane = h * w;
    if frame.len() != channels * plane {
        return Err(Error::Eval(format!(
            "frame length {} does not match {channels}x{h}x{w}",
            frame.len()
        )));
    }
    match channels {
        1 => {
            let buf: Vec<u8> = frame.iter().map(|v| to_u8(*v)).collect();
            let img = image::GrayImage::from_raw(w as u32, h as u32, buf)
                .ok_or_else(|| Error::Eval("png buffer".into()))?;
            img.save(path).map_err(|e| Error::Eval(e.to_string()))?;
        }
        3 => {
            let mut buf = Vec::with_capacity(plane * 3);
            for p in 0..plane {
                for c in 0..3 {
                    buf.push(to_u8(frame[c * plane + p]));
                }
            }
            let img = image::RgbImage::from_raw(w as u32, h as u32, buf)
                .ok_or_else(|| Error::Eval("png buffer".into()))?;
            img.save(path).map_err(|e| Error::Eval(e.to_string()))?;
        }
        other => {
            return Err(Error::Eval(format!("cannot write {other}-channel PNG")));
        }
    }
    Ok(())
}

/// Write an HxWx3 color array (e.g. from `flow_to_color`) as a PNG.
pub fn save_rgb_png(rgb: &[f64], h: usize, w: usize, path: &Path) -> Result<()> {
    if rgb.len() != h * w * 3 {
        return Err(Error::Eval("rgb buffer size mismatch".into()));
    }
    let buf: Vec<u8> = rgb.iter().map(|v| to_u8(*v)).collect();
    let img = image::RgbImage::from_raw(w as u32, h as u32, buf)
        .ok_or_else(|| Error::Eval("png buffer".into()))?;
    img.save(path).map_err(|e| Error::Eval(e.to_string()))?;
    Ok(())
}
