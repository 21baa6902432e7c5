//! Padding-based boundary handling and partial convolution.
//!
//! Every scheme widens the field by `M = (K-1)/2` on each side and then runs
//! a valid convolution, so interior pixels are bitwise identical to
//! [`conv2d_valid`](crate::conv::conv2d_valid).
//!
//! Distribution padding draws from a ChaCha8 stream (`rand_chacha`) seeded
//! with the user seed, on stream number `(H << 40) ^ (W << 8) ^ K`. Margins are
//! filled in the order left, right (row pass), then top, bottom (column pass),
//! each block row-major. Normal deviates come from the cosine branch of the
//! Box-Muller transform applied to two consecutive `f64` uniforms
//! `u1 = 1 - U[0,1)`, `u2 = U[0,1)`.

use std::f64::consts::TAU;
use std::fmt;
use std::str::FromStr;

use ndarray::{s, Array2, ArrayView1};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::conv::{check_field, valid_unchecked, Field};
use crate::error::{invalid, Error, Result};
use crate::exact_kernels::KernelSize;
use crate::transform::Kernel;

/// How the margin of width `M` is filled before a valid convolution.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PaddingScheme {
    Zero,
    /// Mirror about the edge pixel, excluding it: `[c b | a b c]`.
    Reflect,
    Replicate,
    Circular,
    /// Per-axis polynomial extrapolation of degree `M` (linear for `K = 3`).
    Extrapolate,
    /// I.i.d. normal samples with per-edge mean and sample standard deviation.
    Distribution { seed: u64 },
}

impl PaddingScheme {
    pub const TAGS: [&'static str; 6] = ["zero", "reflect", "replicate", "circular", "extrapolate", "distribution"];

    pub fn tag(&self) -> &'static str {
        match self {
            PaddingScheme::Zero => "zero",
            PaddingScheme::Reflect => "reflect",
            PaddingScheme::Replicate => "replicate",
            PaddingScheme::Circular => "circular",
            PaddingScheme::Extrapolate => "extrapolate",
            PaddingScheme::Distribution { .. } => "distribution",
        }
    }

    /// Parses a tag; `seed` is used only by `distribution`.
    pub fn from_tag(tag: &str, seed: u64) -> Result<Self> {
        Ok(match tag {
            "zero" => PaddingScheme::Zero,
            "reflect" => PaddingScheme::Reflect,
            "replicate" => PaddingScheme::Replicate,
            "circular" => PaddingScheme::Circular,
            "extrapolate" => PaddingScheme::Extrapolate,
            "distribution" => PaddingScheme::Distribution { seed },
            other => return invalid(format!("unknown padding scheme {other:?}")),
        })
    }

    fn needs_full_window(&self) -> bool {
        matches!(
            self,
            PaddingScheme::Reflect | PaddingScheme::Extrapolate | PaddingScheme::Distribution { .. }
        )
    }
}

impl FromStr for PaddingScheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::from_tag(s, 0)
    }
}

impl fmt::Display for PaddingScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

/// Polynomial degree used by extrapolation padding: 1, 2, 3, 4 for `K` = 3, 5, 7, 9.
pub fn extrapolation_degree(size: KernelSize) -> usize {
    size.half()
}

/// Edge band thickness `(K+1)/2` used by distribution padding.
pub fn distribution_band(size: KernelSize) -> usize {
    size.half() + 1
}

/// Widens `field` by `M` on every side according to `scheme`.
pub fn pad(field: &Field, size: KernelSize, scheme: PaddingScheme) -> Result<Field> {
    let (h, w) = field.dim();
    let k = size.get();
    if scheme.needs_full_window() {
        check_field(field, k).map_err(|_| {
            Error::InvalidArgument(format!(
                "{scheme} padding needs a field of at least {k}x{k} finite values (got {h}x{w})"
            ))
        })?;
    } else if h == 0 || w == 0 {
        return invalid("cannot pad an empty field");
    }
    let m = size.half();
    Ok(match scheme {
        PaddingScheme::Zero => {
            let mut out = Array2::zeros((h + 2 * m, w + 2 * m));
            out.slice_mut(s![m..m + h, m..m + w]).assign(field);
            out
        }
        PaddingScheme::Reflect => remap(field, m, reflect_index),
        PaddingScheme::Replicate => remap(field, m, |i, n| i.clamp(0, n as isize - 1) as usize),
        PaddingScheme::Circular => remap(field, m, |i, n| i.rem_euclid(n as isize) as usize),
        PaddingScheme::Extrapolate => extrapolate(field, m, extrapolation_degree(size)),
        PaddingScheme::Distribution { seed } => distribution(field, size, seed),
    })
}

// mirror about the edge pixel; valid while the margin is below `n`
fn reflect_index(i: isize, n: usize) -> usize {
    let i = i.unsigned_abs();
    if i < n {
        i
    } else {
        2 * (n - 1) - i
    }
}

/// Fills every padded pixel from `field[map(y), map(x)]`, with signed source
/// coordinates relative to the unpadded field.
fn remap(field: &Field, m: usize, map: impl Fn(isize, usize) -> usize) -> Field {
    let (h, w) = field.dim();
    Array2::from_shape_fn((h + 2 * m, w + 2 * m), |(y, x)| {
        let sy = map(y as isize - m as isize, h);
        let sx = map(x as isize - m as isize, w);
        field[[sy, sx]]
    })
}

/// Weights that extrapolate from samples at `0..=degree` to position `-t`.
fn extrapolation_weights(degree: usize, t: usize) -> Vec<f64> {
    let x = -(t as f64);
    (0..=degree)
        .map(|j| {
            (0..=degree)
                .filter(|&k| k != j)
                .map(|k| (x - k as f64) / (j as f64 - k as f64))
                .product()
        })
        .collect()
}

// `line` has `m` margin slots on each side around `n` known values.
fn extrapolate_line(line: &mut [f64], m: usize, weights: &[Vec<f64>]) {
    let n = line.len() - 2 * m;
    for (t, wts) in weights.iter().enumerate() {
        let t = t + 1;
        let left: f64 = wts.iter().enumerate().map(|(j, c)| c * line[m + j]).sum();
        let right: f64 = wts.iter().enumerate().map(|(j, c)| c * line[m + n - 1 - j]).sum();
        line[m - t] = left;
        line[m + n - 1 + t] = right;
    }
}

fn extrapolate(field: &Field, m: usize, degree: usize) -> Field {
    let (h, w) = field.dim();
    let weights: Vec<_> = (1..=m).map(|t| extrapolation_weights(degree, t)).collect();
    let mut out = Array2::zeros((h + 2 * m, w + 2 * m));
    out.slice_mut(s![m..m + h, m..m + w]).assign(field);

    let mut line = vec![0.0; w + 2 * m];
    for y in m..m + h {
        line.copy_from_slice(out.row(y).as_slice().expect("standard layout"));
        extrapolate_line(&mut line, m, &weights);
        out.row_mut(y).assign(&ArrayView1::from(&line));
    }
    let mut line = vec![0.0; h + 2 * m];
    for x in 0..w + 2 * m {
        for (v, src) in line.iter_mut().zip(out.column(x)) {
            *v = *src;
        }
        extrapolate_line(&mut line, m, &weights);
        out.column_mut(x).assign(&ArrayView1::from(&line));
    }
    out
}

/// Mean and sample standard deviation (denominator `n - 1`).
fn band_stats<'a>(values: impl Iterator<Item = &'a f64> + Clone) -> (f64, f64) {
    let n = values.clone().count() as f64;
    let mean = values.clone().sum::<f64>() / n;
    let var = values.map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    let u1: f64 = 1.0 - rng.gen::<f64>();
    let u2: f64 = rng.gen::<f64>();
    (-2.0 * u1.ln()).sqrt() * (TAU * u2).cos()
}

fn distribution(field: &Field, size: KernelSize, seed: u64) -> Field {
    let (h, w) = field.dim();
    let m = size.half();
    let band = distribution_band(size);
    let left = band_stats(field.slice(s![.., ..band]).into_iter());
    let right = band_stats(field.slice(s![.., w - band..]).into_iter());
    let top = band_stats(field.slice(s![..band, ..]).into_iter());
    let bottom = band_stats(field.slice(s![h - band.., ..]).into_iter());

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((h as u64) << 40) ^ ((w as u64) << 8) ^ size.get() as u64);

    let mut out = Array2::zeros((h + 2 * m, w + 2 * m));
    out.slice_mut(s![m..m + h, m..m + w]).assign(field);
    let mut fill = |rows: std::ops::Range<usize>, cols: std::ops::Range<usize>, (mu, sigma): (f64, f64)| {
        for y in rows {
            for x in cols.clone() {
                out[[y, x]] = mu + sigma * normal(&mut rng);
            }
        }
    };
    fill(m..m + h, 0..m, left);
    fill(m..m + h, m + w..w + 2 * m, right);
    fill(0..m, 0..w + 2 * m, top);
    fill(m + h..h + 2 * m, 0..w + 2 * m, bottom);
    out
}

/// Same-size convolution: `conv2d_valid(pad(field), kernel)`.
pub fn conv2d_padded(field: &Field, kernel: &Kernel, scheme: PaddingScheme) -> Result<Field> {
    let padded = pad(field, kernel.size(), scheme)?;
    Ok(valid_unchecked(&padded, kernel))
}

/// Zero-padded convolution rescaled by `K² / (in-image pixels in the window)`.
pub fn partial_conv2d(field: &Field, kernel: &Kernel) -> Result<Field> {
    let size = kernel.size();
    let (h, w) = field.dim();
    if field.iter().any(|v| !v.is_finite()) {
        return invalid("field entries must be finite");
    }
    let mut out = conv2d_padded(field, kernel, PaddingScheme::Zero)?;
    let m = size.half() as isize;
    let area = size.area() as f64;
    let inside = |c: usize, n: usize| {
        let c = c as isize;
        ((c + m).min(n as isize - 1) - (c - m).max(0) + 1) as usize
    };
    for ((y, x), v) in out.indexed_iter_mut() {
        let count = inside(y, h) * inside(x, w);
        if count != size.area() {
            *v *= area / count as f64;
        }
    }
    Ok(out)
}
