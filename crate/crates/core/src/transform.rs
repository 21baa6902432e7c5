//! Kernels, operator coefficients and transformed kernels.
//!
//! A kernel `ω` is equivalent to a unique linear differential operator
//! `L = Σ α^{mn} ∂^{m+n}/∂h^m ∂w^n` acting on the window interpolant and
//! evaluated at the window centre: `α = D_MM⁻¹ ω⃗`. Evaluating the same
//! operator at in-window position `(R, S)` instead gives the transformed
//! kernel `ϖ⃗ = D_RS · D_MM⁻¹ · ω⃗ = T_RS · ω⃗`.
//!
//! The exact `T_RS` are integer matrices, so their double copies are exact;
//! matrix-vector products use a compensated dot product so transformed
//! kernels are accurate to a few ulps even where entries grow large.

use std::sync::OnceLock;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::exact_kernels::{self, KernelSize};

/// A `K×K` filter of doubles, `K` odd. Row-major vectorisation uses index
/// `i*K + j`.
#[derive(Debug, Clone, PartialEq)]
pub struct Kernel {
    size: KernelSize,
    weights: Array2<f64>,
}

impl Kernel {
    pub fn new(weights: Array2<f64>) -> Result<Self> {
        let (r, c) = weights.dim();
        if r != c {
            return invalid(format!("kernel must be square (got {r}x{c})"));
        }
        let size = KernelSize::new(r)?;
        if weights.iter().any(|v| !v.is_finite()) {
            return invalid("kernel entries must be finite");
        }
        Ok(Self {
            size,
            weights: weights.as_standard_layout().into_owned(),
        })
    }

    /// Builds a kernel from its row-major vectorisation.
    pub fn from_vec(size: KernelSize, values: Vec<f64>) -> Result<Self> {
        let k = size.get();
        if values.len() != k * k {
            return invalid(format!("expected {} kernel entries, got {}", k * k, values.len()));
        }
        Self::new(Array2::from_shape_vec((k, k), values).expect("length checked"))
    }

    /// 1 at the centre, 0 elsewhere.
    pub fn identity(size: KernelSize) -> Self {
        let m = size.half();
        let mut w = Array2::zeros((size.get(), size.get()));
        w[[m, m]] = 1.0;
        Self { size, weights: w }
    }

    /// The box blur: all ones.
    pub fn ones(size: KernelSize) -> Self {
        Self {
            size,
            weights: Array2::ones((size.get(), size.get())),
        }
    }

    pub fn size(&self) -> KernelSize {
        self.size
    }

    pub fn weights(&self) -> &Array2<f64> {
        &self.weights
    }

    pub fn as_slice(&self) -> &[f64] {
        self.weights.as_slice().expect("standard layout")
    }

    pub fn sum(&self) -> f64 {
        self.weights.sum()
    }

    /// `true` if the kernel is unchanged by a 180° rotation.
    pub fn is_point_symmetric(&self) -> bool {
        let w = self.as_slice();
        w.iter().eq(w.iter().rev())
    }

    pub fn into_array(self) -> Array2<f64> {
        self.weights
    }
}

/// Coefficients `α^{mn}` of the differential operator a kernel represents,
/// stored at index `m*K + n`.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorCoeffs {
    pub size: KernelSize,
    pub alpha: Vec<f64>,
}

impl OperatorCoeffs {
    pub fn zeros(size: KernelSize) -> Self {
        Self {
            size,
            alpha: vec![0.0; size.area()],
        }
    }

    pub fn get(&self, m: usize, n: usize) -> f64 {
        self.alpha[m * self.size.get() + n]
    }

    pub fn set(&mut self, m: usize, n: usize, v: f64) -> Result<()> {
        let k = self.size.get();
        if m >= k || n >= k {
            return invalid(format!("derivative order ({m},{n}) out of range for K = {k}"));
        }
        self.alpha[m * k + n] = v;
        Ok(())
    }
}

/// Double-precision copies of the exact tables for one kernel size.
struct FloatTables {
    d_center: Vec<f64>,
    d_center_inv: Vec<f64>,
    /// `T_RS` at index `R*K + S`, each `K²×K²` row-major.
    transforms: Vec<Vec<f64>>,
}

static FLOAT_TABLES: [OnceLock<FloatTables>; 4] = [const { OnceLock::new() }; 4];

fn float_tables(size: KernelSize) -> &'static FloatTables {
    FLOAT_TABLES[size.half() - 1].get_or_init(|| {
        let k = size.get();
        let m = size.half();
        let d_center = exact_kernels::assemble_d(size, m, m)
            .expect("centre index in range")
            .entries
            .map_to_f64();
        let d_center_inv = exact_kernels::invert_center_d(size).map_to_f64();
        let mut transforms = Vec::with_capacity(k * k);
        for r in 0..k {
            for s in 0..k {
                let t = exact_kernels::transform_matrix_exact(size, r, s).expect("index in range");
                transforms.push(t.map_to_f64());
            }
        }
        FloatTables {
            d_center,
            d_center_inv,
            transforms,
        }
    })
}

/// `T_RS` as a row-major `K²×K²` slice of doubles (exact: integer entries).
pub fn transform_matrix(size: KernelSize, r: usize, s: usize) -> Result<&'static [f64]> {
    let k = size.get();
    if r >= k || s >= k {
        return invalid(format!("position ({r},{s}) out of range for K = {k}"));
    }
    Ok(&float_tables(size).transforms[r * k + s])
}

#[inline]
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

/// Compensated dot product: as accurate as evaluating in twice the working
/// precision and rounding once.
pub(crate) fn dot2(a: &[f64], b: &[f64]) -> f64 {
    let mut sum = 0.0;
    let mut comp = 0.0;
    for (&x, &y) in a.iter().zip(b) {
        let p = x * y;
        let perr = x.mul_add(y, -p);
        let (s, serr) = two_sum(sum, p);
        sum = s;
        comp += serr + perr;
    }
    sum + comp
}

fn mat_vec(matrix: &[f64], v: &[f64]) -> Vec<f64> {
    matrix.chunks_exact(v.len()).map(|row| dot2(row, v)).collect()
}

/// `α = D_MM⁻¹ · ω⃗`.
pub fn operator_coeffs(omega: &Kernel) -> OperatorCoeffs {
    let t = float_tables(omega.size);
    OperatorCoeffs {
        size: omega.size,
        alpha: mat_vec(&t.d_center_inv, omega.as_slice()),
    }
}

/// `ω⃗ = D_MM · α`.
pub fn kernel_from_operator(coeffs: &OperatorCoeffs) -> Result<Kernel> {
    if coeffs.alpha.len() != coeffs.size.area() {
        return invalid("coefficient vector length must be K²");
    }
    if coeffs.alpha.iter().any(|v| !v.is_finite()) {
        return invalid("operator coefficients must be finite");
    }
    let t = float_tables(coeffs.size);
    Kernel::from_vec(coeffs.size, mat_vec(&t.d_center, &coeffs.alpha))
}

/// Transformed kernel `ϖ_RS` for a pixel at in-window position `(R, S)` of
/// its nearest complete window. `(M, M)` returns `ω` itself.
pub fn transform_kernel(omega: &Kernel, r: usize, s: usize) -> Result<Kernel> {
    let size = omega.size;
    let t = transform_matrix(size, r, s)?;
    if r == size.half() && s == size.half() {
        return Ok(omega.clone());
    }
    let mut varpi = mat_vec(t, omega.as_slice());
    restore_sum(&mut varpi, omega.as_slice());
    Ok(Kernel {
        size,
        weights: Array2::from_shape_vec((size.get(), size.get()), varpi).expect("K² entries"),
    })
}

/// Every column of `T_RS` sums to one, so `Σϖ = Σω` holds exactly. Rounding
/// each entry of a large `ϖ` breaks that by up to `Σ|ϖ|·ε`; the compensated
/// residual is folded into the smallest entry, where it rounds cheaply.
fn restore_sum(varpi: &mut [f64], omega: &[f64]) {
    let terms: Vec<f64> = omega.iter().copied().chain(varpi.iter().map(|v| -v)).collect();
    let residual = dot2(&terms, &vec![1.0; terms.len()]);
    let smallest = (0..varpi.len())
        .min_by(|&a, &b| varpi[a].abs().total_cmp(&varpi[b].abs()))
        .expect("non-empty kernel");
    varpi[smallest] += residual;
}

/// All `K²` transformed kernels of one input kernel, indexed `R*K + S`.
#[derive(Debug, Clone, PartialEq)]
pub struct TransformBank {
    size: KernelSize,
    kernels: Vec<Kernel>,
}

impl TransformBank {
    pub fn size(&self) -> KernelSize {
        self.size
    }

    /// `ϖ_RS`. Panics if `(r, s)` is outside the window.
    pub fn get(&self, r: usize, s: usize) -> &Kernel {
        &self.kernels[r * self.size.get() + s]
    }

    pub fn original(&self) -> &Kernel {
        let m = self.size.half();
        self.get(m, m)
    }

    pub fn iter(&self) -> impl Iterator<Item = ((usize, usize), &Kernel)> {
        let k = self.size.get();
        self.kernels.iter().enumerate().map(move |(i, w)| ((i / k, i % k), w))
    }

    pub fn to_json(&self) -> Result<String> {
        let doc = BankJson {
            kernel_size: self.size.get(),
            kernels: self
                .iter()
                .map(|((r, s), w)| PositionedKernel {
                    position: [r, s],
                    weights: w.weights.rows().into_iter().map(|row| row.to_vec()).collect(),
                })
                .collect(),
        };
        Ok(serde_json::to_string_pretty(&doc)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: BankJson = serde_json::from_str(text)?;
        let size = KernelSize::new(doc.kernel_size)?;
        let k = size.get();
        let mut slots: Vec<Option<Kernel>> = vec![None; k * k];
        for entry in doc.kernels {
            let [r, s] = entry.position;
            if r >= k || s >= k {
                return Err(Error::Format(format!("bank position ({r},{s}) out of range")));
            }
            if entry.weights.len() != k || entry.weights.iter().any(|row| row.len() != k) {
                return Err(Error::Format(format!("bank kernel at ({r},{s}) is not {k}x{k}")));
            }
            let flat = entry.weights.into_iter().flatten().collect();
            slots[r * k + s] = Some(Kernel::from_vec(size, flat)?);
        }
        let kernels = slots
            .into_iter()
            .enumerate()
            .map(|(i, w)| {
                w.ok_or_else(|| Error::Format(format!("bank is missing position ({},{})", i / k, i % k)))
            })
            .collect::<Result<_>>()?;
        Ok(Self { size, kernels })
    }
}

#[derive(Serialize, Deserialize)]
struct BankJson {
    kernel_size: usize,
    kernels: Vec<PositionedKernel>,
}

#[derive(Serialize, Deserialize)]
struct PositionedKernel {
    position: [usize; 2],
    weights: Vec<Vec<f64>>,
}

pub fn build_bank(omega: &Kernel) -> TransformBank {
    let k = omega.size.get();
    let kernels = (0..k * k)
        .map(|i| transform_kernel(omega, i / k, i % k).expect("index in range"))
        .collect();
    TransformBank {
        size: omega.size,
        kernels,
    }
}
