//! Size-keeping 2D convolution without padding.
//!
//! Near the image boundary, the convolution over an incomplete sliding window
//! is replaced by a convolution of the nearest complete window with a
//! transformed kernel. The transformed kernel evaluates the same linear
//! differential operator that the original kernel represents at the window
//! centre, but at the off-centre position of the boundary pixel, using the
//! Lagrange interpolant of the complete window.
//!
//! Module map:
//!
//! - [`exact_kernels`]: Lagrange derivative tables, differential kernels and
//!   the assembled `D` matrices in exact rational arithmetic.
//! - [`transform`]: kernel ⇄ operator coefficients and transformed kernels.
//! - [`conv`]: valid and size-keeping ("diff") convolution.
//! - [`baselines`]: padding schemes and partial convolution.
//! - [`fields`]: analytic test fields, random kernels, ground-truth oracle.
//! - [`metrics`]: error measures.
//! - [`npy`]: minimal `.npy` reader/writer.
//! - [`bench`]: method-comparison benchmark producing CSV reports.

pub mod baselines;
pub mod bench;
pub mod conv;
pub mod error;
pub mod exact_kernels;
pub mod fields;
pub mod metrics;
pub mod npy;
pub mod rational;
pub mod transform;

pub use baselines::{conv2d_padded, pad, partial_conv2d, PaddingScheme};
pub use conv::{conv2d_diff, conv2d_valid, window_assignment, Field, WindowAssignment};
pub use error::{Error, Result};
pub use exact_kernels::{KernelSize, Rational};
pub use transform::{build_bank, kernel_from_operator, operator_coeffs, transform_kernel, Kernel, OperatorCoeffs, TransformBank};
