use super::image::DesignImage;
use crate::error::{Error, Result};

fn quarter_turn(src: &[f64], n: usize) -> Vec<f64> {
    // out(i, j) = in(col = j, row = n - 1 - i) for a +90° rotation.
    let mut out = vec![0.0; n * n];
    for j in 0..n {
        for i in 0..n {
            out[j * n + i] = src[(n - 1 - i) * n + j];
        }
    }
    out
}

/// Bilinear sample at fractional pixel-index coordinates, zero outside the grid.
pub(crate) fn sample_bilinear(pixels: &[f64], n: usize, fx: f64, fy: f64) -> f64 {
    let x0 = fx.floor();
    let y0 = fy.floor();
    let tx = fx - x0;
    let ty = fy - y0;
    let at = |x: f64, y: f64| -> f64 {
        if x < 0.0 || y < 0.0 || x >= n as f64 || y >= n as f64 {
            0.0
        } else {
            pixels[y as usize * n + x as usize]
        }
    };
    let a = at(x0, y0);
    let b = at(x0 + 1.0, y0);
    let c = at(x0, y0 + 1.0);
    let d = at(x0 + 1.0, y0 + 1.0);
    (a * (1.0 - tx) + b * tx) * (1.0 - ty) + (c * (1.0 - tx) + d * tx) * ty
}

/// Rotates about the image center by `angle_deg`.
///
/// Multiples of 90° are exact pixel permutations; any other angle is resampled
/// bilinearly with zero fill outside the domain.
pub fn rotate(image: &DesignImage, angle_deg: f64) -> DesignImage {
    let n = image.size();
    let turns = angle_deg.rem_euclid(360.0) / 90.0;
    let nearest = turns.round();
    if (turns - nearest).abs() < 1e-12 {
        let k = (nearest as usize) % 4;
        let mut px = image.pixels().to_vec();
        for _ in 0..k {
            px = quarter_turn(&px, n);
        }
        return image.with_pixels_unchecked(px);
    }

    let theta = angle_deg.to_radians();
    let (s, c) = theta.sin_cos();
    let half = n as f64 / 2.0;
    let src = image.pixels();
    let mut out = Vec::with_capacity(n * n);
    for j in 0..n {
        let v = j as f64 + 0.5 - half;
        for i in 0..n {
            let u = i as f64 + 0.5 - half;
            // inverse rotation of the output pixel center
            let us = c * u + s * v;
            let vs = -s * u + c * v;
            let val = sample_bilinear(src, n, us + half - 0.5, vs + half - 0.5);
            out.push(val.clamp(0.0, 1.0));
        }
    }
    image.with_pixels_unchecked(out)
}

/// Mirrors the image left to right.
pub fn flip_horizontal(image: &DesignImage) -> DesignImage {
    let n = image.size();
    let src = image.pixels();
    let mut out = Vec::with_capacity(n * n);
    for y in 0..n {
        for x in 0..n {
            out.push(src[y * n + (n - 1 - x)]);
        }
    }
    image.with_pixels_unchecked(out)
}

/// Sum of absolute pixel differences.
pub fn l1_distance(a: &DesignImage, b: &DesignImage) -> Result<f64> {
    if a.size() != b.size() {
        return Err(Error::dimension(
            format!("{0}x{0}", a.size()),
            format!("{0}x{0}", b.size()),
        ));
    }
    Ok(l1_pixels(a.pixels(), b.pixels()))
}

#[inline]
pub(crate) fn l1_pixels(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
}
