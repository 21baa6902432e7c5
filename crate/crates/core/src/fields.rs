//! Analytic test fields, random kernels and the extended-sampling oracle.
//!
//! Families, with `(h, w)` the row and column coordinates:
//!
//! - Chebyshev: `C_n(h, w) = U_n(h) U_n(w) sin(n (h + w))` on `[-1, 1]²`.
//! - Spherical: `S_n(h, w) = Y_{2n}^n(h, w) sin(n (h + w))` with `θ = h ∈ [0, π]`
//!   (closed) and `φ = w ∈ [0, 2π)` (half-open).
//! - Polynomial: `Σ c[a][b] h^a w^b`, either on pixel indices or on `[-1, 1]²`.
//!
//! A margin of `m` pixels continues the same affine coordinate map past the
//! domain edges, so the central block is independent of `m`.

use std::f64::consts::PI;

use ndarray::{s, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::conv::{valid_unchecked, Field};
use crate::error::{invalid, Result};
use crate::exact_kernels::KernelSize;
use crate::transform::Kernel;

/// Chebyshev polynomial of the second kind, `U_n(x)`.
pub fn chebyshev_u(n: usize, x: f64) -> f64 {
    let (mut prev, mut cur) = (1.0, 2.0 * x);
    if n == 0 {
        return prev;
    }
    for _ in 1..n {
        (prev, cur) = (cur, 2.0 * x * cur - prev);
    }
    cur
}

/// Real orthonormal spherical harmonic `N_lm P_l^m(cos θ) cos(m φ)`, with the
/// Condon-Shortley phase in `P_l^m`.
///
/// `sin θ` is used as is rather than `sqrt(1 - cos² θ)`, so the function
/// stays analytic in `θ` outside `[0, π]`.
pub fn spherical_y(l: usize, m: usize, theta: f64, phi: f64) -> Result<f64> {
    if m > l {
        return invalid(format!("spherical harmonic order m = {m} exceeds degree l = {l}"));
    }
    let (x, sin_t) = (theta.cos(), theta.sin());
    // normalised P_m^m
    let mut pmm = (1.0 / (4.0 * PI)).sqrt();
    for k in 1..=m {
        let k = k as f64;
        pmm *= -((2.0 * k + 1.0) / (2.0 * k)).sqrt() * sin_t;
    }
    let value = if l == m {
        pmm
    } else {
        let mf = m as f64;
        let mut prev = pmm;
        let mut cur = x * (2.0 * mf + 3.0).sqrt() * pmm;
        for deg in m + 2..=l {
            let lf = deg as f64;
            let a = ((4.0 * lf * lf - 1.0) / (lf * lf - mf * mf)).sqrt();
            let b = (((lf - 1.0).powi(2) - mf * mf) / (4.0 * (lf - 1.0).powi(2) - 1.0)).sqrt();
            (prev, cur) = (cur, a * (x * cur - b * prev));
        }
        cur
    };
    Ok(value * (m as f64 * phi).cos())
}

/// Coordinate system of a polynomial field.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PolyDomain {
    /// `h`, `w` are the row and column indices of the central block.
    Index,
    /// `h`, `w` span `[-1, 1]` over the central block.
    Symmetric,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum FieldFamily {
    Chebyshev { order: usize },
    Spherical { order: usize },
    /// `coeffs[a][b]` multiplies `h^a w^b`.
    Polynomial { coeffs: Vec<Vec<f64>>, domain: PolyDomain },
}

impl FieldFamily {
    pub fn name(&self) -> &'static str {
        match self {
            FieldFamily::Chebyshev { .. } => "chebyshev",
            FieldFamily::Spherical { .. } => "spherical",
            FieldFamily::Polynomial { .. } => "polynomial",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldSpec {
    pub family: FieldFamily,
    pub height: usize,
    pub width: usize,
    pub margin: usize,
}

/// A field sampled on `(H+2m)×(W+2m)`; only the central `H×W` block is the
/// image, the band around it is ground truth for oracles.
#[derive(Debug, Clone, PartialEq)]
pub struct ExtendedField {
    pub data: Field,
    pub margin: usize,
}

impl ExtendedField {
    pub fn height(&self) -> usize {
        self.data.nrows() - 2 * self.margin
    }

    pub fn width(&self) -> usize {
        self.data.ncols() - 2 * self.margin
    }

    /// The visible `H×W` image.
    pub fn central(&self) -> Field {
        let m = self.margin;
        self.data
            .slice(s![m..m + self.height(), m..m + self.width()])
            .to_owned()
    }
}

fn symmetric_coord(i: isize, n: usize) -> f64 {
    -1.0 + 2.0 * i as f64 / (n - 1) as f64
}

fn eval_polynomial(coeffs: &[Vec<f64>], h: f64, w: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, row| {
        acc * h + row.iter().rev().fold(0.0, |a, &c| a * w + c)
    })
}

/// Samples `spec` on the margin-extended grid.
pub fn generate(spec: &FieldSpec) -> Result<ExtendedField> {
    let (h, w, m) = (spec.height, spec.width, spec.margin);
    if h < 3 || w < 3 {
        return invalid(format!("field must be at least 3x3 (got {h}x{w})"));
    }
    let value: Box<dyn Fn(isize, isize) -> f64> = match &spec.family {
        FieldFamily::Chebyshev { order } => {
            if *order == 0 {
                return invalid("chebyshev order must be at least 1");
            }
            let n = *order;
            Box::new(move |y, x| {
                let (hc, wc) = (symmetric_coord(y, h), symmetric_coord(x, w));
                chebyshev_u(n, hc) * chebyshev_u(n, wc) * (n as f64 * (hc + wc)).sin()
            })
        }
        FieldFamily::Spherical { order } => {
            if *order == 0 {
                return invalid("spherical order must be at least 1");
            }
            let n = *order;
            Box::new(move |y, x| {
                let theta = PI * y as f64 / (h - 1) as f64;
                let phi = 2.0 * PI * x as f64 / w as f64;
                let y = spherical_y(2 * n, n, theta, phi).expect("m <= l");
                y * (n as f64 * (theta + phi)).sin()
            })
        }
        FieldFamily::Polynomial { coeffs, domain } => {
            if coeffs.is_empty() || coeffs.iter().any(|r| r.iter().any(|c| !c.is_finite())) {
                return invalid("polynomial needs a non-empty table of finite coefficients");
            }
            let domain = *domain;
            Box::new(move |y, x| {
                let (hc, wc) = match domain {
                    PolyDomain::Index => (y as f64, x as f64),
                    PolyDomain::Symmetric => (symmetric_coord(y, h), symmetric_coord(x, w)),
                };
                eval_polynomial(coeffs, hc, wc)
            })
        }
    };
    let off = m as isize;
    let data = Array2::from_shape_fn((h + 2 * m, w + 2 * m), |(y, x)| {
        value(y as isize - off, x as isize - off)
    });
    Ok(ExtendedField { data, margin: m })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RandomKernelSpec {
    pub size: KernelSize,
    pub count: usize,
    pub seed: u64,
}

/// Kernel `j` of a seeded family of uniform(−1, 1) kernels. Each index has its
/// own ChaCha8 stream, so kernels can be generated in any order.
pub fn random_kernel(size: KernelSize, seed: u64, index: u64) -> Kernel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    let values = (0..size.area()).map(|_| rng.gen_range(-1.0..=1.0)).collect();
    Kernel::from_vec(size, values).expect("K² finite entries")
}

pub fn random_kernels(spec: &RandomKernelSpec) -> Result<Vec<Kernel>> {
    if spec.count == 0 {
        return invalid("kernel count must be at least 1");
    }
    Ok((0..spec.count as u64)
        .map(|j| random_kernel(spec.size, spec.seed, j))
        .collect())
}

/// Valid convolution over the margin-extended data, cropped to the `H×W`
/// image: the result a boundary method would give if the true values outside
/// the image were known.
pub fn oracle_convolution(field: &ExtendedField, kernel: &Kernel) -> Result<Field> {
    let half = kernel.size().half();
    if field.margin < half {
        return invalid(format!(
            "oracle needs a margin of at least {half} for a {0}x{0} kernel (got {1})",
            kernel.size().get(),
            field.margin
        ));
    }
    let skip = field.margin - half;
    let (rows, cols) = field.data.dim();
    let window = field.data.slice(s![skip..rows - skip, skip..cols - skip]).to_owned();
    Ok(valid_unchecked(&window, kernel))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::conv::conv2d_valid;
    use ndarray::array;

    fn cheb(order: usize, h: usize, w: usize, margin: usize) -> FieldSpec {
        FieldSpec {
            family: FieldFamily::Chebyshev { order },
            height: h,
            width: w,
            margin,
        }
    }

    #[test]
    fn chebyshev_values() {
        assert_eq!(chebyshev_u(0, 0.3), 1.0);
        assert_eq!(chebyshev_u(1, 0.5), 1.0);
        assert_eq!(chebyshev_u(2, 0.5), 0.0);
        // U_n(1) = n + 1
        assert_eq!(chebyshev_u(10, 1.0), 11.0);
    }

    #[test]
    fn chebyshev_matches_trigonometric_form() {
        // U_n(cos t) = sin((n+1) t) / sin t
        for n in [3, 8, 17] {
            for t in [0.3, 1.1, 2.5] {
                let expected = ((n + 1) as f64 * t).sin() / t.sin();
                assert!((chebyshev_u(n, f64::cos(t)) - expected).abs() < 1e-11);
            }
        }
    }

    #[test]
    fn chebyshev_recurrence_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..200 {
            let x: f64 = rng.gen_range(-1.0..1.0);
            let k = rng.gen_range(1..50);
            let lhs = chebyshev_u(k + 1, x) + chebyshev_u(k - 1, x);
            assert!((lhs - 2.0 * x * chebyshev_u(k, x)).abs() <= 1e-10);
        }
    }

    #[test]
    fn spherical_harmonic_values() {
        assert!((spherical_y(0, 0, 0.4, 1.0).unwrap() - 0.5 / PI.sqrt()).abs() < 1e-15);
        assert!((spherical_y(1, 0, 0.0, 2.0).unwrap() - (3.0 / (4.0 * PI)).sqrt()).abs() < 1e-15);
        assert!(spherical_y(2, 1, PI / 2.0, 0.0).unwrap().abs() < 1e-15);
        assert!(spherical_y(1, 2, 0.0, 0.0).is_err());
    }

    #[test]
    fn spherical_harmonic_closed_forms() {
        for (theta, phi) in [(0.3, 0.0), (1.2, 0.7), (2.9, 4.0)] {
            let (c, s) = (f64::cos(theta), f64::sin(theta));
            let y21 = -(15.0 / (8.0 * PI)).sqrt() * c * s * f64::cos(phi);
            assert!((spherical_y(2, 1, theta, phi).unwrap() - y21).abs() < 1e-14);
            // N_42 P_4^2, P_4^2 = 15/2 (7x² - 1)(1 - x²)
            let n42 = (9.0 / (4.0 * PI) * 2.0 / 720.0).sqrt();
            let y42 = n42 * 7.5 * (7.0 * c * c - 1.0) * s * s * f64::cos(2.0 * phi);
            assert!((spherical_y(4, 2, theta, phi).unwrap() - y42).abs() < 1e-13);
        }
    }

    #[test]
    fn chebyshev_centre_is_zero() {
        let f = generate(&cheb(1, 3, 3, 0)).unwrap();
        assert_eq!(f.data[[1, 1]], 0.0);
    }

    #[test]
    fn polynomial_on_index_grid() {
        let spec = FieldSpec {
            family: FieldFamily::Polynomial {
                coeffs: vec![vec![0.0, 1.0], vec![1.0]],
                domain: PolyDomain::Index,
            },
            height: 3,
            width: 3,
            margin: 0,
        };
        let f = generate(&spec).unwrap();
        assert_eq!(f.data, array![[0.0, 1.0, 2.0], [1.0, 2.0, 3.0], [2.0, 3.0, 4.0]]);
    }

    #[test]
    fn margin_does_not_change_central_block() {
        let wide = generate(&cheb(4, 64, 64, 3)).unwrap();
        let plain = generate(&cheb(4, 64, 64, 0)).unwrap();
        assert_eq!(wide.central(), plain.data);
        let sph = FieldSpec {
            family: FieldFamily::Spherical { order: 3 },
            height: 20,
            width: 24,
            margin: 2,
        };
        let plain_sph = FieldSpec { margin: 0, ..sph.clone() };
        assert_eq!(generate(&sph).unwrap().central(), generate(&plain_sph).unwrap().data);
    }

    #[test]
    fn invalid_specs() {
        assert!(generate(&cheb(0, 8, 8, 0)).is_err());
        assert!(generate(&cheb(2, 2, 8, 0)).is_err());
    }

    #[test]
    fn random_kernels_are_reproducible() {
        let size = KernelSize::new(3).unwrap();
        let spec = RandomKernelSpec { size, count: 2, seed: 42 };
        assert_eq!(random_kernels(&spec).unwrap(), random_kernels(&spec).unwrap());
        let many = random_kernels(&RandomKernelSpec { count: 100, ..spec }).unwrap();
        assert_eq!(many.len(), 100);
        assert!(many.iter().flat_map(|k| k.as_slice()).all(|v| (-1.0..=1.0).contains(v)));
        assert_eq!(many[1], random_kernel(size, 42, 1));
        assert!(random_kernels(&RandomKernelSpec { count: 0, ..spec }).is_err());
    }

    #[test]
    fn random_entries_have_zero_mean() {
        let size = KernelSize::new(5).unwrap();
        let kernels = random_kernels(&RandomKernelSpec { size, count: 400, seed: 1 }).unwrap();
        let entries: Vec<f64> = kernels.iter().flat_map(|k| k.as_slice().to_vec()).collect();
        assert_eq!(entries.len(), 10_000);
        let mean = entries.iter().sum::<f64>() / entries.len() as f64;
        assert!(mean.abs() <= 0.02, "{mean}");
    }

    #[test]
    fn oracle_properties() {
        let size = KernelSize::new(3).unwrap();
        let w = random_kernel(size, 5, 0);
        let constant = ExtendedField { data: Array2::from_elem((10, 12), 3.0), margin: 2 };
        let out = oracle_convolution(&constant, &w).unwrap();
        assert_eq!(out.dim(), (6, 8));
        assert!(out.iter().all(|v| (v - 3.0 * w.sum()).abs() < 1e-13));

        let f = generate(&cheb(3, 12, 10, 1)).unwrap();
        let out = oracle_convolution(&f, &w).unwrap();
        let valid = conv2d_valid(&f.central(), &w).unwrap();
        assert_eq!(out.slice(s![1..11, 1..9]), valid);

        let lin = generate(&FieldSpec {
            family: FieldFamily::Polynomial { coeffs: vec![vec![0.0, 1.0], vec![1.0]], domain: PolyDomain::Index },
            height: 6,
            width: 6,
            margin: 1,
        })
        .unwrap();
        assert_eq!(oracle_convolution(&lin, &Kernel::identity(size)).unwrap(), lin.central());

        let thin = generate(&cheb(2, 8, 8, 1)).unwrap();
        assert!(oracle_convolution(&thin, &Kernel::ones(KernelSize::new(5).unwrap())).is_err());
    }
}
