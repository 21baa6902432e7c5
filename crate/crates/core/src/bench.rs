//! Method-comparison benchmark: every boundary method against the
//! extended-sampling oracle, over a range of field orders and a seeded set of
//! random kernels.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rayon::prelude::*;

use crate::baselines::{conv2d_padded, partial_conv2d, PaddingScheme};
use crate::conv::{conv2d_diff_with_bank, Field};
use crate::error::{invalid, Error, Result};
use crate::exact_kernels::KernelSize;
use crate::fields::{generate, oracle_convolution, random_kernel, FieldFamily, FieldSpec};
use crate::metrics::{l1_error, mse};
use crate::transform::{build_bank, Kernel, TransformBank};

/// A size-keeping boundary-handling method.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    Diff,
    Zero,
    Reflect,
    Replicate,
    Circular,
    Extrapolate,
    Distribution,
    Partial,
}

impl Method {
    pub const ALL: [Method; 8] = [
        Method::Diff,
        Method::Zero,
        Method::Reflect,
        Method::Replicate,
        Method::Circular,
        Method::Extrapolate,
        Method::Distribution,
        Method::Partial,
    ];

    pub fn tag(self) -> &'static str {
        match self {
            Method::Diff => "diff",
            Method::Zero => "zero",
            Method::Reflect => "reflect",
            Method::Replicate => "replicate",
            Method::Circular => "circular",
            Method::Extrapolate => "extrapolate",
            Method::Distribution => "distribution",
            Method::Partial => "partial",
        }
    }

    fn padding(self, seed: u64) -> Option<PaddingScheme> {
        Some(match self {
            Method::Zero => PaddingScheme::Zero,
            Method::Reflect => PaddingScheme::Reflect,
            Method::Replicate => PaddingScheme::Replicate,
            Method::Circular => PaddingScheme::Circular,
            Method::Extrapolate => PaddingScheme::Extrapolate,
            Method::Distribution => PaddingScheme::Distribution { seed },
            Method::Diff | Method::Partial => return None,
        })
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.tag() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown method {s:?}")))
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

/// Applies `method` to `field`. `seed` only matters for distribution padding.
pub fn apply_method(field: &Field, kernel: &Kernel, method: Method, seed: u64) -> Result<Field> {
    match method {
        Method::Diff => conv2d_diff_with_bank(field, &build_bank(kernel)),
        Method::Partial => partial_conv2d(field, kernel),
        other => conv2d_padded(field, kernel, other.padding(seed).expect("padding method")),
    }
}

fn apply_with_bank(field: &Field, kernel: &Kernel, bank: &TransformBank, method: Method, seed: u64) -> Result<Field> {
    match method {
        Method::Diff => conv2d_diff_with_bank(field, bank),
        other => apply_method(field, kernel, other, seed),
    }
}

/// Analytic families the benchmark sweeps by order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    Chebyshev,
    Spherical,
}

impl Family {
    pub fn name(self) -> &'static str {
        match self {
            Family::Chebyshev => "chebyshev",
            Family::Spherical => "spherical",
        }
    }

    pub fn with_order(self, order: usize) -> FieldFamily {
        match self {
            Family::Chebyshev => FieldFamily::Chebyshev { order },
            Family::Spherical => FieldFamily::Spherical { order },
        }
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "chebyshev" => Ok(Family::Chebyshev),
            "spherical" => Ok(Family::Spherical),
            other => invalid(format!("unknown benchmark family {other:?} (chebyshev or spherical)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkConfig {
    pub family: Family,
    pub orders: Vec<usize>,
    pub height: usize,
    pub width: usize,
    pub size: KernelSize,
    pub filters: usize,
    pub seed: u64,
    pub methods: Vec<Method>,
}

impl BenchmarkConfig {
    pub fn validate(&self) -> Result<()> {
        let k = self.size.get();
        if self.orders.is_empty() || self.orders.contains(&0) {
            return invalid("orders must be a non-empty list of positive integers");
        }
        if self.height < k || self.width < k {
            return invalid(format!("field {}x{} is smaller than the kernel size {k}", self.height, self.width));
        }
        if self.filters == 0 {
            return invalid("filter count must be at least 1");
        }
        if self.methods.is_empty() {
            return invalid("method list is empty");
        }
        Ok(())
    }
}

/// One line of the comparison report.
#[derive(Debug, Clone, PartialEq)]
pub struct CompareRow {
    pub family: &'static str,
    pub order: usize,
    pub method: Method,
    pub kernel_index: usize,
    pub eps1: f64,
    pub eps2: f64,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Distribution-padding seed for one (order, kernel) cell.
pub fn padding_seed(seed: u64, order: usize, kernel_index: usize) -> u64 {
    splitmix64(splitmix64(seed ^ order as u64) ^ kernel_index as u64)
}

/// Runs the comparison. Rows are ordered by order, then method (config
/// order), then kernel index; the content does not depend on thread count.
pub fn run_compare(config: &BenchmarkConfig) -> Result<Vec<CompareRow>> {
    config.validate()?;
    let size = config.size;
    let kernels: Vec<Kernel> = (0..config.filters as u64)
        .map(|j| random_kernel(size, config.seed, j))
        .collect();
    let banks: Vec<TransformBank> = kernels.par_iter().map(build_bank).collect();

    let mut rows = Vec::with_capacity(config.orders.len() * config.methods.len() * config.filters);
    for &order in &config.orders {
        let field = generate(&FieldSpec {
            family: config.family.with_order(order),
            height: config.height,
            width: config.width,
            margin: size.half(),
        })?;
        let image = field.central();

        // per kernel: one (eps1, eps2) per method
        let per_kernel: Vec<Vec<(f64, f64)>> = kernels
            .par_iter()
            .zip(banks.par_iter())
            .enumerate()
            .map(|(j, (kernel, bank))| {
                let truth = oracle_convolution(&field, kernel)?;
                let seed = padding_seed(config.seed, order, j);
                config
                    .methods
                    .iter()
                    .map(|&method| {
                        let out = apply_with_bank(&image, kernel, bank, method, seed)?;
                        Ok((l1_error(&out, &truth)?, mse(&out, &truth)?))
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<_>>()?;

        for (mi, &method) in config.methods.iter().enumerate() {
            for (j, errs) in per_kernel.iter().enumerate() {
                rows.push(CompareRow {
                    family: config.family.name(),
                    order,
                    method,
                    kernel_index: j,
                    eps1: errs[mi].0,
                    eps2: errs[mi].1,
                });
            }
        }
    }
    Ok(rows)
}

/// 17 significant digits: enough to round-trip any double.
pub fn format_float(v: f64) -> String {
    format!("{v:.16e}")
}

pub const CSV_HEADER: &str = "family,order,method,kernel_index,eps1,eps2";

pub fn write_csv<W: Write>(writer: &mut W, rows: &[CompareRow]) -> Result<()> {
    writeln!(writer, "{CSV_HEADER}")?;
    for r in rows {
        writeln!(
            writer,
            "{},{},{},{},{},{}",
            r.family,
            r.order,
            r.method,
            r.kernel_index,
            format_float(r.eps1),
            format_float(r.eps2)
        )?;
    }
    Ok(())
}

/// Median of a non-empty sample (mean of the two middle values for even
/// lengths).
pub fn median(values: &[f64]) -> f64 {
    assert!(!values.is_empty(), "median of an empty sample");
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// `eps1` values of one (order, method) cell, in kernel order.
pub fn eps1_of(rows: &[CompareRow], order: usize, method: Method) -> Vec<f64> {
    rows.iter()
        .filter(|r| r.order == order && r.method == method)
        .map(|r| r.eps1)
        .collect()
}
