//! Exact Lagrange-derivative tables, differential kernels and `D` matrices.
//!
//! Inside a `K×K` window with unit pixel spacing, the Lagrange basis
//! `l_i(x) = Π_{k≠i} (x-k)/(i-k)` interpolates the pixels. The differential
//! kernel `δ^{mn}_{pq}` has entries `l_i^{(m)}(p) · l_j^{(n)}(q)`: convolving a
//! window with it yields `∂^{m+n}/∂h^m ∂w^n` of the interpolant at pixel
//! `(p, q)`. Stacking the vectorised `δ^{mn}_{pq}` as columns `m*K + n` gives
//! the `K²×K²` matrix `D_pq`.
//!
//! Everything here is exact. `D_pq` factors as the Kronecker product
//! `A_p ⊗ A_q` of the 1D derivative tables `A_p[i][m] = l_i^{(m)}(p)`, which
//! is what makes the per-position transformation matrices cheap to build.

use std::sync::OnceLock;

use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};
use serde::Serialize;

use crate::error::{invalid, Result};
pub use crate::rational::Rational;
use crate::rational::{to_f64, MatrixJson, NumberFormat, RationalMatrix};

/// Supported odd kernel sizes.
pub const SUPPORTED_SIZES: [usize; 4] = [3, 5, 7, 9];

/// An odd kernel size `K ∈ {3, 5, 7, 9}` with half-width `M = (K-1)/2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(into = "usize")]
pub struct KernelSize(usize);

impl KernelSize {
    pub fn new(k: usize) -> Result<Self> {
        if SUPPORTED_SIZES.contains(&k) {
            Ok(Self(k))
        } else {
            invalid(format!("kernel size must be one of 3, 5, 7, 9 (got {k})"))
        }
    }

    /// Kernel side length `K`.
    pub fn get(self) -> usize {
        self.0
    }

    /// Half-width `M`; the window centre is `(M, M)`.
    pub fn half(self) -> usize {
        (self.0 - 1) / 2
    }

    /// `K²`, the length of a vectorised kernel.
    pub fn area(self) -> usize {
        self.0 * self.0
    }

    fn slot(self) -> usize {
        self.half() - 1
    }

    fn check_index(self, what: &str, v: usize) -> Result<()> {
        if v < self.0 {
            Ok(())
        } else {
            invalid(format!("{what} = {v} out of range 0..{} for K = {}", self.0, self.0))
        }
    }
}

impl From<KernelSize> for usize {
    fn from(k: KernelSize) -> usize {
        k.0
    }
}

impl TryFrom<usize> for KernelSize {
    type Error = crate::Error;

    fn try_from(k: usize) -> Result<Self> {
        Self::new(k)
    }
}

/// Integer coefficients (ascending powers) of `Π_{k≠i} (x-k)` and the
/// denominator `Π_{k≠i} (i-k)`.
fn basis_polynomial(k: usize, i: usize) -> (Vec<BigInt>, BigInt) {
    let mut coeffs = vec![BigInt::one()];
    let mut denom = BigInt::one();
    for node in (0..k).filter(|&node| node != i) {
        // multiply by (x - node)
        let mut next = vec![BigInt::zero(); coeffs.len() + 1];
        for (d, c) in coeffs.iter().enumerate() {
            next[d + 1] += c;
            next[d] -= c * BigInt::from(node);
        }
        coeffs = next;
        denom *= BigInt::from(i as i64 - node as i64);
    }
    (coeffs, denom)
}

fn differentiate(coeffs: &[BigInt]) -> Vec<BigInt> {
    coeffs
        .iter()
        .enumerate()
        .skip(1)
        .map(|(d, c)| c * BigInt::from(d))
        .collect()
}

fn evaluate(coeffs: &[BigInt], x: &BigInt) -> BigInt {
    coeffs.iter().rev().fold(BigInt::zero(), |acc, c| acc * x + c)
}

/// `l_i^{(m)}(p)`, the `m`-th derivative of the `i`-th Lagrange basis
/// polynomial on nodes `0..K`, evaluated at node `p`.
pub fn lagrange_derivative(size: KernelSize, i: usize, m: usize, p: usize) -> Result<Rational> {
    size.check_index("i", i)?;
    size.check_index("m", m)?;
    size.check_index("p", p)?;
    Ok(lagrange_derivative_unchecked(size.get(), i, m, p))
}

fn lagrange_derivative_unchecked(k: usize, i: usize, m: usize, p: usize) -> Rational {
    let (mut coeffs, denom) = basis_polynomial(k, i);
    for _ in 0..m {
        coeffs = differentiate(&coeffs);
    }
    Rational::new(evaluate(&coeffs, &BigInt::from(p)), denom)
}

/// `A_p` with `A_p[i][m] = l_i^{(m)}(p)`.
fn derivative_table(k: usize, p: usize) -> RationalMatrix {
    RationalMatrix::from_fn(k, k, |i, m| lagrange_derivative_unchecked(k, i, m, p))
}

/// Per-size exact tables, built once on first use.
struct ExactTables {
    /// `A_p` for every `p`.
    derivative: Vec<RationalMatrix>,
    /// `P_R = A_R · A_M⁻¹`: the 1D transformation for in-window offset `R`.
    transfer: Vec<RationalMatrix>,
}

impl ExactTables {
    fn build(size: KernelSize) -> Self {
        let k = size.get();
        let derivative: Vec<_> = (0..k).map(|p| derivative_table(k, p)).collect();
        let center_inv = derivative[size.half()]
            .inverse()
            .expect("1D Lagrange derivative table at the centre node is invertible");
        let transfer = derivative.iter().map(|a| a * &center_inv).collect();
        Self {
            derivative,
            transfer,
        }
    }
}

static TABLES: [OnceLock<ExactTables>; 4] = [const { OnceLock::new() }; 4];
static CENTER_INVERSE: [OnceLock<RationalMatrix>; 4] = [const { OnceLock::new() }; 4];

fn tables(size: KernelSize) -> &'static ExactTables {
    TABLES[size.slot()].get_or_init(|| ExactTables::build(size))
}

/// `K×K` table `A_p[i][m] = l_i^{(m)}(p)`.
pub fn derivative_table_at(size: KernelSize, p: usize) -> Result<&'static RationalMatrix> {
    size.check_index("p", p)?;
    Ok(&tables(size).derivative[p])
}

/// The 1D transformation `A_R · A_M⁻¹`. Its entries are integers for every
/// supported `K`.
pub fn transfer_matrix(size: KernelSize, r: usize) -> Result<&'static RationalMatrix> {
    size.check_index("R", r)?;
    Ok(&tables(size).transfer[r])
}

/// Differential kernel `δ^{mn}_{pq}` of one kernel size.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DifferentialKernel {
    pub size: KernelSize,
    pub m: usize,
    pub n: usize,
    pub p: usize,
    pub q: usize,
    /// `entries[(i, j)] = l_i^{(m)}(p) · l_j^{(n)}(q)`.
    pub entries: RationalMatrix,
}

impl DifferentialKernel {
    pub fn to_json(&self, format: NumberFormat) -> serde_json::Value {
        serde_json::json!({
            "size": self.size.get(),
            "orders": [self.m, self.n],
            "position": [self.p, self.q],
            "entries": MatrixJson::new(&self.entries, format),
        })
    }
}

pub fn differential_kernel(
    size: KernelSize,
    m: usize,
    n: usize,
    p: usize,
    q: usize,
) -> Result<DifferentialKernel> {
    size.check_index("m", m)?;
    size.check_index("n", n)?;
    size.check_index("p", p)?;
    size.check_index("q", q)?;
    let t = tables(size);
    let (ap, aq) = (&t.derivative[p], &t.derivative[q]);
    let k = size.get();
    let entries = RationalMatrix::from_fn(k, k, |i, j| &ap[(i, m)] * &aq[(j, n)]);
    Ok(DifferentialKernel {
        size,
        m,
        n,
        p,
        q,
        entries,
    })
}

/// Assembled matrix `D_pq`: row `i*K + j`, column `m*K + n`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DMatrix {
    pub size: KernelSize,
    pub p: usize,
    pub q: usize,
    pub entries: RationalMatrix,
}

impl DMatrix {
    pub fn to_json(&self, format: NumberFormat) -> serde_json::Value {
        serde_json::json!({
            "size": self.size.get(),
            "position": [self.p, self.q],
            "entries": MatrixJson::new(&self.entries, format),
        })
    }
}

pub fn assemble_d(size: KernelSize, p: usize, q: usize) -> Result<DMatrix> {
    size.check_index("p", p)?;
    size.check_index("q", q)?;
    let t = tables(size);
    Ok(DMatrix {
        size,
        p,
        q,
        entries: t.derivative[p].kron(&t.derivative[q]),
    })
}

/// Exact inverse of `D_MM`, by Gauss-Jordan elimination over the full
/// `K²×K²` matrix. Cached per size.
pub fn invert_center_d(size: KernelSize) -> &'static RationalMatrix {
    CENTER_INVERSE[size.slot()].get_or_init(|| {
        let m = size.half();
        let d = assemble_d(size, m, m).expect("centre index in range");
        d.entries
            .inverse()
            .unwrap_or_else(|| panic!("D_MM is singular for K = {}", size.get()))
    })
}

/// Exact transformation matrix `T_RS = D_RS · D_MM⁻¹`, built as the
/// Kronecker product of the 1D transformations.
pub fn transform_matrix_exact(size: KernelSize, r: usize, s: usize) -> Result<RationalMatrix> {
    Ok(transfer_matrix(size, r)?.kron(transfer_matrix(size, s)?))
}

/// Infinity-norm condition number of `D_MM`, computed from the exact matrix
/// and its exact inverse.
pub fn center_condition_number(size: KernelSize) -> f64 {
    let m = size.half();
    let d = assemble_d(size, m, m).expect("centre index in range").entries;
    inf_norm(&d) * inf_norm(invert_center_d(size))
}

fn inf_norm(a: &RationalMatrix) -> f64 {
    (0..a.rows())
        .map(|r| to_f64(&a.row(r).iter().fold(Rational::zero(), |acc, v| acc + v.abs())))
        .fold(0.0, f64::max)
}
