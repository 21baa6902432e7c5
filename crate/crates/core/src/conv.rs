//! Valid and size-keeping 2D convolution.
//!
//! Orientation is cross-correlation (no kernel flip): kernel entry `(i, j)`
//! multiplies window pixel `(i, j)`, as in CNN frameworks.
//!
//! [`conv2d_diff`] keeps the input shape without padding. Interior pixels get
//! the ordinary valid convolution. A pixel `(y, x)` whose centred window
//! leaves the image is assigned its nearest complete window, centred at the
//! clamped position `(cy, cx)`; with `(R, S)` its position inside that
//! window, the output is the window convolved with the transformed kernel
//! `ϖ_RS`.

use ndarray::Array2;
use rayon::prelude::*;

use crate::error::{invalid, Result};
use crate::exact_kernels::KernelSize;
use crate::transform::{build_bank, Kernel, TransformBank};

/// A single-channel image or sampled field, `H×W` doubles in row-major order.
pub type Field = Array2<f64>;

/// Nearest complete window of a pixel and the pixel's place inside it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WindowAssignment {
    /// Centre `(cy, cx)` of the nearest complete window.
    pub center: (usize, usize),
    /// In-window position `(R, S)`; `(M, M)` for interior pixels.
    pub local: (usize, usize),
}

#[inline]
fn clamp_axis(v: usize, half: usize, len: usize) -> (usize, usize) {
    let c = v.clamp(half, len - 1 - half);
    (c, v + half - c)
}

pub fn window_assignment(
    height: usize,
    width: usize,
    size: KernelSize,
    y: usize,
    x: usize,
) -> Result<WindowAssignment> {
    let k = size.get();
    if height < k || width < k {
        return invalid(format!("field {height}x{width} is smaller than the {k}x{k} kernel"));
    }
    if y >= height || x >= width {
        return invalid(format!("pixel ({y},{x}) outside {height}x{width} field"));
    }
    let half = size.half();
    let (cy, r) = clamp_axis(y, half, height);
    let (cx, s) = clamp_axis(x, half, width);
    Ok(WindowAssignment {
        center: (cy, cx),
        local: (r, s),
    })
}

pub(crate) fn check_field(field: &Field, k: usize) -> Result<()> {
    let (h, w) = field.dim();
    if h < k || w < k {
        return invalid(format!(
            "field must be at least {k}x{k} for a {k}x{k} kernel (got {h}x{w})"
        ));
    }
    if field.iter().any(|v| !v.is_finite()) {
        return invalid("field entries must be finite");
    }
    Ok(())
}

/// Product-sum of a row-major `k×k` kernel with the window whose top-left
/// pixel is `(top, left)`. Every convolution in the crate goes through here,
/// so the accumulation order is the same everywhere.
#[inline]
pub(crate) fn window_dot(data: &[f64], width: usize, top: usize, left: usize, kernel: &[f64], k: usize) -> f64 {
    let mut acc = 0.0;
    for (i, krow) in kernel.chunks_exact(k).enumerate() {
        let start = (top + i) * width + left;
        for (&wv, &dv) in krow.iter().zip(&data[start..start + k]) {
            acc += wv * dv;
        }
    }
    acc
}

/// Valid convolution: output `(H-K+1)×(W-K+1)`.
pub fn conv2d_valid(field: &Field, kernel: &Kernel) -> Result<Field> {
    let k = kernel.size().get();
    check_field(field, k)?;
    Ok(valid_unchecked(field, kernel))
}

pub(crate) fn valid_unchecked(field: &Field, kernel: &Kernel) -> Field {
    let k = kernel.size().get();
    let (h, w) = field.dim();
    let data = field.as_standard_layout();
    let data = data.as_slice().expect("standard layout");
    let (oh, ow) = (h - k + 1, w - k + 1);
    let weights = kernel.as_slice();
    let mut out = vec![0.0; oh * ow];
    out.par_chunks_mut(ow).enumerate().for_each(|(y, row)| {
        for (x, v) in row.iter_mut().enumerate() {
            *v = window_dot(data, w, y, x, weights, k);
        }
    });
    Array2::from_shape_vec((oh, ow), out).expect("output shape")
}

/// Size-keeping convolution with transformed kernels at the boundary.
pub fn conv2d_diff(field: &Field, kernel: &Kernel) -> Result<Field> {
    conv2d_diff_with_bank(field, &build_bank(kernel))
}

/// [`conv2d_diff`] with a precomputed bank, for applying one kernel to many
/// fields.
pub fn conv2d_diff_with_bank(field: &Field, bank: &TransformBank) -> Result<Field> {
    let size = bank.size();
    let k = size.get();
    check_field(field, k)?;
    let half = size.half();
    let (h, w) = field.dim();
    let data = field.as_standard_layout();
    let data = data.as_slice().expect("standard layout");
    let centre = bank.original().as_slice();

    let mut out = vec![0.0; h * w];
    out.par_chunks_mut(w).enumerate().for_each(|(y, row)| {
        let (cy, r) = clamp_axis(y, half, h);
        let top = cy - half;
        if r == half {
            for (x, v) in row.iter_mut().enumerate().take(w - half).skip(half) {
                *v = window_dot(data, w, top, x - half, centre, k);
            }
        } else {
            // edge run with a fixed kernel class (R, M)
            let edge = bank.get(r, half).as_slice();
            for (x, v) in row.iter_mut().enumerate().take(w - half).skip(half) {
                *v = window_dot(data, w, top, x - half, edge, k);
            }
        }
        // left and right ends: one class per pixel
        for x in (0..half).chain(w - half..w) {
            let (cx, s) = clamp_axis(x, half, w);
            row[x] = window_dot(data, w, top, cx - half, bank.get(r, s).as_slice(), k);
        }
    });
    Ok(Array2::from_shape_vec((h, w), out).expect("output shape"))
}

/// Rotates a field by 180°.
pub fn rot180(field: &Field) -> Field {
    let mut out = field.clone();
    out.invert_axis(ndarray::Axis(0));
    out.invert_axis(ndarray::Axis(1));
    out.as_standard_layout().into_owned()
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{array, s};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn size(k: usize) -> KernelSize {
        KernelSize::new(k).unwrap()
    }

    fn random_field(rng: &mut ChaCha8Rng, h: usize, w: usize) -> Field {
        Array2::from_shape_fn((h, w), |_| rng.gen_range(-1.0..1.0))
    }

    fn random_kernel(rng: &mut ChaCha8Rng, k: usize) -> Kernel {
        Kernel::from_vec(size(k), (0..k * k).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap()
    }

    // Quadruple-loop oracle, written independently of `window_dot`.
    fn reference_valid(f: &Field, w: &Kernel) -> Field {
        let k = w.size().get();
        let (h, wd) = f.dim();
        let mut out = Array2::zeros((h - k + 1, wd - k + 1));
        for y in 0..h - k + 1 {
            for x in 0..wd - k + 1 {
                let mut acc = 0.0;
                for i in 0..k {
                    for j in 0..k {
                        acc += w.weights()[[i, j]] * f[[y + i, x + j]];
                    }
                }
                out[[y, x]] = acc;
            }
        }
        out
    }

    #[test]
    fn valid_counts_box() {
        let out = conv2d_valid(&Array2::ones((3, 3)), &Kernel::ones(size(3))).unwrap();
        assert_eq!(out, array![[9.0]]);
    }

    #[test]
    fn valid_central_difference() {
        let f = array![[0.0, 0.0, 0.0], [1.0, 2.0, 3.0], [0.0, 0.0, 0.0]];
        let w = Kernel::new(array![[0.0, 0.0, 0.0], [-0.5, 0.0, 0.5], [0.0, 0.0, 0.0]]).unwrap();
        assert_eq!(conv2d_valid(&f, &w).unwrap(), array![[1.0]]);
    }

    #[test]
    fn valid_matches_loop_reference() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let f = random_field(&mut rng, 8, 8);
        let w = random_kernel(&mut rng, 3);
        let out = conv2d_valid(&f, &w).unwrap();
        let reference = reference_valid(&f, &w);
        for (a, b) in out.iter().zip(reference.iter()) {
            assert!((a - b).abs() <= 1e-13);
        }
    }

    #[test]
    fn undersized_fields_rejected() {
        let w = Kernel::ones(size(5));
        assert!(conv2d_valid(&Array2::ones((4, 9)), &w).is_err());
        assert!(conv2d_diff(&Array2::ones((9, 4)), &w).is_err());
        assert!(window_assignment(2, 2, size(3), 0, 0).is_err());
    }

    #[test]
    fn window_assignments() {
        let a = window_assignment(4, 4, size(3), 0, 0).unwrap();
        assert_eq!((a.center, a.local), ((1, 1), (0, 0)));
        let a = window_assignment(10, 12, size(5), 4, 7).unwrap();
        assert_eq!((a.center, a.local), ((4, 7), (2, 2)));
        let a = window_assignment(5, 5, size(5), 4, 2).unwrap();
        assert_eq!((a.center, a.local), ((2, 2), (4, 2)));
        assert!(window_assignment(5, 5, size(3), 5, 0).is_err());
    }

    #[test]
    fn identity_kernel_is_fixpoint() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for k in [3, 5, 7] {
            let f = random_field(&mut rng, 11, 9);
            let out = conv2d_diff(&f, &Kernel::identity(size(k))).unwrap();
            for (a, b) in out.iter().zip(f.iter()) {
                assert!((a - b).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn constant_field_maps_to_scaled_constant() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let c = 2.5;
        for k in [3, 5] {
            let w = random_kernel(&mut rng, k);
            let out = conv2d_diff(&Array2::from_elem((9, 10), c), &w).unwrap();
            let abs_sum: f64 = w.weights().iter().map(|v| v.abs()).sum();
            for v in out.iter() {
                assert!((v - c * w.sum()).abs() <= 1e-10 * c * abs_sum);
            }
        }
    }

    #[test]
    fn boundary_pixels_use_shifted_window() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let f = random_field(&mut rng, 6, 7);
        let w = random_kernel(&mut rng, 3);
        let bank = build_bank(&w);
        let out = conv2d_diff(&f, &w).unwrap();
        for y in 0..6 {
            for x in 0..7 {
                let a = window_assignment(6, 7, size(3), y, x).unwrap();
                let (cy, cx) = a.center;
                let win = f.slice(s![cy - 1..cy + 2, cx - 1..cx + 2]);
                let t = bank.get(a.local.0, a.local.1).weights();
                let expected: f64 = (&win * t).sum();
                assert!((out[[y, x]] - expected).abs() <= 1e-12, "({y},{x})");
            }
        }
    }

    #[test]
    fn interior_bitwise_matches_valid() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let f = random_field(&mut rng, 13, 10);
        let w = random_kernel(&mut rng, 5);
        let diff = conv2d_diff(&f, &w).unwrap();
        let valid = conv2d_valid(&f, &w).unwrap();
        assert_eq!(diff.slice(s![2..11, 2..8]), valid);
    }

    #[test]
    fn single_window_field() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let f = random_field(&mut rng, 5, 5);
        let w = random_kernel(&mut rng, 5);
        let out = conv2d_diff(&f, &w).unwrap();
        assert_eq!(out.dim(), (5, 5));
        assert_eq!(out[[2, 2]], conv2d_valid(&f, &w).unwrap()[[0, 0]]);
    }

    proptest! {
        #[test]
        fn linear_in_field(seed in any::<u64>(), a in -3.0f64..3.0, b in -3.0f64..3.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let f1 = random_field(&mut rng, 8, 9);
            let f2 = random_field(&mut rng, 8, 9);
            let w = random_kernel(&mut rng, 3);
            let lhs = conv2d_diff(&(&f1 * a + &f2 * b), &w).unwrap();
            let rhs = conv2d_diff(&f1, &w).unwrap() * a + conv2d_diff(&f2, &w).unwrap() * b;
            for (u, v) in lhs.iter().zip(rhs.iter()) {
                prop_assert!((u - v).abs() <= 1e-11);
            }
        }

        #[test]
        fn symmetric_kernels_commute_with_rotation(seed in any::<u64>(), k in prop::sample::select(vec![3usize, 5])) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let f = random_field(&mut rng, 9, 11);
            let raw = random_kernel(&mut rng, k);
            let w = Kernel::new(raw.weights() + &rot180(raw.weights())).unwrap();
            prop_assert!(w.is_point_symmetric());
            let lhs = conv2d_diff(&rot180(&f), &w).unwrap();
            let rhs = rot180(&conv2d_diff(&f, &w).unwrap());
            for (u, v) in lhs.iter().zip(rhs.iter()) {
                prop_assert!((u - v).abs() <= 1e-10);
            }
        }

        #[test]
        fn shape_is_kept(h in 7usize..15, w in 7usize..15) {
            let f = Array2::zeros((h, w));
            prop_assert_eq!(conv2d_diff(&f, &Kernel::ones(size(7))).unwrap().dim(), (h, w));
        }
    }
}
