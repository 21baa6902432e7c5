//! Error measures used to compare boundary-handling methods.
//!
//! All reductions use pairwise summation in a fixed order, so results do not
//! depend on threading.

use ndarray::{s, Array2};
use serde::Serialize;

use crate::conv::Field;
use crate::error::{invalid, Error, Result};

fn pairwise_sum(values: &[f64]) -> f64 {
    const BLOCK: usize = 64;
    if values.len() <= BLOCK {
        return values.iter().sum();
    }
    let (a, b) = values.split_at(values.len() / 2);
    pairwise_sum(a) + pairwise_sum(b)
}

fn check_shapes(a: &Field, b: &Field) -> Result<()> {
    if a.dim() != b.dim() {
        return Err(Error::ShapeMismatch {
            expected: a.dim(),
            actual: b.dim(),
        });
    }
    if a.is_empty() {
        return invalid("cannot measure error over an empty field");
    }
    Ok(())
}

fn mean_of(a: &Field, b: &Field, f: impl Fn(f64) -> f64) -> Result<f64> {
    check_shapes(a, b)?;
    let terms: Vec<f64> = a.iter().zip(b.iter()).map(|(x, y)| f(x - y)).collect();
    Ok(pairwise_sum(&terms) / terms.len() as f64)
}

/// `ε¹`: mean absolute difference.
pub fn l1_error(a: &Field, b: &Field) -> Result<f64> {
    mean_of(a, b, f64::abs)
}

/// `ε²`: mean squared difference.
pub fn mse(a: &Field, b: &Field) -> Result<f64> {
    mean_of(a, b, |d| d * d)
}

pub fn squared_error_map(a: &Field, b: &Field) -> Result<Field> {
    check_shapes(a, b)?;
    Ok(Array2::from_shape_fn(a.dim(), |ix| (a[ix] - b[ix]).powi(2)))
}

/// Mean of a per-pixel error map over the central `(H-2f)×(W-2f)` block and
/// over the surrounding frame of width `f`: `(interior, frame)`.
pub fn interior_frame_split(map: &Field, frame_width: usize) -> Result<(f64, f64)> {
    let (h, w) = map.dim();
    if frame_width == 0 {
        return invalid("frame width must be at least 1");
    }
    if h <= 2 * frame_width || w <= 2 * frame_width {
        return invalid(format!(
            "a {h}x{w} map has no interior inside a frame of width {frame_width}"
        ));
    }
    let f = frame_width;
    let inner: Vec<f64> = map.slice(s![f..h - f, f..w - f]).iter().copied().collect();
    let frame: Vec<f64> = map
        .indexed_iter()
        .filter(|((y, x), _)| *y < f || *y >= h - f || *x < f || *x >= w - f)
        .map(|(_, &v)| v)
        .collect();
    Ok((
        pairwise_sum(&inner) / inner.len() as f64,
        pairwise_sum(&frame) / frame.len() as f64,
    ))
}

/// Errors of one method on one (field, kernel) pair.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ErrorReport {
    pub method: String,
    pub eps1: f64,
    pub eps2: f64,
    /// `(interior, frame)` mean squared error, when a frame width was given.
    pub split: Option<(f64, f64)>,
}

impl ErrorReport {
    pub fn new(method: &str, result: &Field, truth: &Field, frame_width: Option<usize>) -> Result<Self> {
        let split = match frame_width {
            Some(f) => Some(interior_frame_split(&squared_error_map(result, truth)?, f)?),
            None => None,
        };
        Ok(Self {
            method: method.to_string(),
            eps1: l1_error(result, truth)?,
            eps2: mse(result, truth)?,
            split,
        })
    }

    /// Frame over interior error; `None` when the interior error is zero.
    pub fn frame_ratio(&self) -> Option<f64> {
        match self.split {
            Some((inner, frame)) if inner > 0.0 => Some(frame / inner),
            _ => None,
        }
    }
}
