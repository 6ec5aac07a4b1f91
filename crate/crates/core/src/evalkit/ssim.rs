//! Flow warping and windowed SSIM.

use rayon::prelude::*;
use serde::Serialize;

use super::{FlowField, FrameRender};
use crate::{Error, Result};

const WINDOW: usize = 11;
const SIGMA: f64 = 1.5;
const K1: f64 = 0.01;
const K2: f64 = 0.03;
const RANGE: f64 = 1.0;

/// Normalized 11x11 Gaussian weights, row-major.
pub fn gaussian_window() -> [f64; WINDOW * WINDOW] {
    let r = (WINDOW / 2) as f64;
    let g: Vec<f64> = (0..WINDOW)
        .map(|i| (-(i as f64 - r).powi(2) / (2.0 * SIGMA * SIGMA)).exp())
        .collect();
    let mut w = [0.0; WINDOW * WINDOW];
    for y in 0..WINDOW {
        for x in 0..WINDOW {
            w[y * WINDOW + x] = g[x] * g[y];
        }
    }
    let s: f64 = w.iter().sum();
    w.iter_mut().for_each(|v| *v /= s);
    w
}

/// Per-pixel SSIM. Windows are truncated at the image border and their
/// weights renormalized, so the map has the image's size.
pub fn ssim_map(a: &[f64], b: &[f64], width: usize, height: usize) -> Result<Vec<f64>> {
    if a.len() != width * height || b.len() != width * height {
        return Err(Error::SizeMismatch(width, height, a.len(), b.len()));
    }
    let win = gaussian_window();
    let c1 = (K1 * RANGE).powi(2);
    let c2 = (K2 * RANGE).powi(2);
    let r = (WINDOW / 2) as isize;
    Ok((0..width * height)
        .into_par_iter()
        .map(|i| {
            let (x, y) = ((i % width) as isize, (i / width) as isize);
            let (mut sw, mut ma, mut mb, mut aa, mut bb, mut ab) = (0.0, 0.0, 0.0, 0.0, 0.0, 0.0);
            for dy in -r..=r {
                let yy = y + dy;
                if yy < 0 || yy >= height as isize {
                    continue;
                }
                for dx in -r..=r {
                    let xx = x + dx;
                    if xx < 0 || xx >= width as isize {
                        continue;
                    }
                    let w = win[((dy + r) as usize) * WINDOW + (dx + r) as usize];
                    let j = yy as usize * width + xx as usize;
                    let (va, vb) = (a[j], b[j]);
                    sw += w;
                    ma += w * va;
                    mb += w * vb;
                    aa += w * va * va;
                    bb += w * vb * vb;
                    ab += w * va * vb;
                }
            }
            let (ma, mb) = (ma / sw, mb / sw);
            let va = (aa / sw - ma * ma).max(0.0);
            let vb = (bb / sw - mb * mb).max(0.0);
            let cov = ab / sw - ma * mb;
            ((2.0 * ma * mb + c1) * (2.0 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2))
        })
        .collect())
}

/// Samples `img` at `(x, y) + flow` with bilinear interpolation, clamping
/// to the border. Pixels without valid flow keep their own value.
pub fn warp_bilinear(img: &[f64], width: usize, height: usize, flow: &FlowField) -> Vec<f64> {
    (0..width * height)
        .into_par_iter()
        .map(|i| {
            if !flow.valid[i] {
                return img[i];
            }
            let sx = (i % width) as f64 + flow.flow[i][0];
            let sy = (i / width) as f64 + flow.flow[i][1];
            let sx = sx.clamp(0.0, (width - 1) as f64);
            let sy = sy.clamp(0.0, (height - 1) as f64);
            let (x0, y0) = (sx.floor() as usize, sy.floor() as usize);
            let (x1, y1) = ((x0 + 1).min(width - 1), (y0 + 1).min(height - 1));
            let (tx, ty) = (sx - x0 as f64, sy - y0 as f64);
            let at = |x: usize, y: usize| img[y * width + x];
            let top = at(x0, y0) * (1.0 - tx) + at(x1, y0) * tx;
            let bottom = at(x0, y1) * (1.0 - tx) + at(x1, y1) * tx;
            top * (1.0 - ty) + bottom * ty
        })
        .collect()
}

/// SSIM between a frame and the next frame warped back onto it.
#[derive(Debug, Clone, Serialize)]
pub struct Consistency {
    /// SSIM against the masked warp.
    #[serde(skip)]
    pub map: Vec<f64>,
    #[serde(skip)]
    pub warped: Vec<f64>,
    /// Mean over pixels with valid, unoccluded flow, with the other pixels
    /// of the warped frame replaced by the source frame.
    pub masked_mean: f64,
    /// Mean over all pixels against the raw warp.
    pub unmasked_mean: f64,
    pub masked_pixels: usize,
    pub occluded_pixels: usize,
}

pub fn consistency(src: &FrameRender, dst: &FrameRender, flow: &FlowField) -> Result<Consistency> {
    if (src.width, src.height) != (dst.width, dst.height) || (flow.width, flow.height) != (src.width, src.height) {
        return Err(Error::SizeMismatch(src.width, src.height, dst.width, dst.height));
    }
    let (w, h) = (src.width, src.height);
    let warped = warp_bilinear(&dst.shade, w, h, flow);
    let keep: Vec<bool> = (0..w * h).map(|i| flow.valid[i] && !flow.occluded[i]).collect();
    // Masked pixels take the source value so windows only compare pixels
    // with trusted flow.
    let filled: Vec<f64> = (0..w * h)
        .map(|i| if keep[i] { warped[i] } else { src.shade[i] })
        .collect();
    let map = ssim_map(&src.shade, &filled, w, h)?;
    let raw = ssim_map(&src.shade, &warped, w, h)?;
    let mut sum = 0.0;
    let mut n = 0;
    for i in 0..map.len() {
        if keep[i] {
            sum += map[i];
            n += 1;
        }
    }
    let unmasked_mean = raw.iter().sum::<f64>() / raw.len().max(1) as f64;
    Ok(Consistency {
        masked_mean: if n > 0 { sum / n as f64 } else { f64::NAN },
        unmasked_mean,
        masked_pixels: n,
        occluded_pixels: flow.occluded.iter().filter(|o| **o).count(),
        map,
        warped,
    })
}
