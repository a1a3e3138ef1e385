//! Allen–Berkeley image-source expansion for shoebox rooms.

use std::f64::consts::PI;

use super::RoomSpec;
use crate::error::{Error, Result};

/// Image offsets along one axis: squared distance component and the number
/// of wall reflections it carries.
fn axis_images(len: f64, src: f64, mic: f64, reach: f64) -> Vec<(f64, u32)> {
    let n_max = (reach / (2.0 * len)).ceil() as i64 + 1;
    let mut out = Vec::new();
    for q in 0..2i64 {
        for n in -n_max..=n_max {
            let pos = (1 - 2 * q) as f64 * src + 2.0 * n as f64 * len;
            let delta = pos - mic;
            if delta.abs() > reach {
                continue;
            }
            let order = ((n - q).abs() + n.abs()) as u32;
            out.push((delta * delta, order));
        }
    }
    out
}

/// Impulse response with nearest-sample tap placement and a uniform wall
/// reflection coefficient `beta`.
pub fn image_response(room: &RoomSpec, beta: f64, out_len: usize) -> Result<Vec<f64>> {
    room.validate()?;
    if !(0.0..=1.0).contains(&beta) {
        return Err(Error::InvalidRoom(format!(
            "reflection coefficient {beta} outside [0, 1]"
        )));
    }
    if room.ml_distance() <= 0.0 {
        return Err(Error::DegenerateGeometry(
            "source and microphone coincide".into(),
        ));
    }
    let fs = room.fs as f64;
    let samples_per_meter = fs / room.c;
    // taps at index >= out_len are dropped, so reach covers round(d*fs/c) < out_len
    let reach = (out_len as f64 - 0.5) / samples_per_meter;
    let reach_sq = reach * reach;

    let xs = axis_images(room.dims[0], room.src[0], room.mic[0], reach);
    let ys = axis_images(room.dims[1], room.src[1], room.mic[1], reach);
    let zs = axis_images(room.dims[2], room.src[2], room.mic[2], reach);

    let max_order = xs.iter().map(|v| v.1).max().unwrap_or(0)
        + ys.iter().map(|v| v.1).max().unwrap_or(0)
        + zs.iter().map(|v| v.1).max().unwrap_or(0);
    let mut pow = Vec::with_capacity(max_order as usize + 1);
    let mut acc = 1.0;
    for _ in 0..=max_order {
        pow.push(acc);
        acc *= beta;
    }

    let mut h = vec![0.0; out_len];
    for &(dx2, ox) in &xs {
        for &(dy2, oy) in &ys {
            let dxy = dx2 + dy2;
            if dxy > reach_sq {
                continue;
            }
            for &(dz2, oz) in &zs {
                let d2 = dxy + dz2;
                if d2 > reach_sq {
                    continue;
                }
                let gain = pow[(ox + oy + oz) as usize];
                if gain == 0.0 {
                    continue;
                }
                let dist = d2.sqrt();
                let tap = (dist * samples_per_meter).round() as usize;
                if tap < out_len {
                    h[tap] += gain / (4.0 * PI * dist);
                }
            }
        }
    }
    Ok(h)
}
