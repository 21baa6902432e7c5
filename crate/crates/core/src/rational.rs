//! Dense matrices over exact rationals.

use std::fmt;
use std::ops::Mul;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use serde::Serialize;

/// Exact fraction with arbitrary-precision numerator and denominator, kept in
/// lowest terms with a positive denominator.
pub type Rational = BigRational;

pub fn rat(num: i64, den: i64) -> Rational {
    Rational::new(BigInt::from(num), BigInt::from(den))
}

pub fn rat_int(v: i64) -> Rational {
    Rational::from_integer(BigInt::from(v))
}

/// Nearest double to an exact rational.
pub fn to_f64(r: &Rational) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}

/// Exact rational equal to a finite double.
pub fn from_f64(v: f64) -> Rational {
    Rational::from_float(v).expect("finite double")
}

/// `"num/den"`, or just `"num"` for integers.
pub fn format_exact(r: &Rational) -> String {
    if r.denom().is_one() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

/// Row-major dense matrix of [`Rational`] entries.
#[derive(Clone, PartialEq, Eq)]
pub struct RationalMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Rational>,
}

impl RationalMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![Rational::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = Rational::one();
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> Rational) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Self { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, r: usize) -> &[Rational] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn column(&self, c: usize) -> Vec<Rational> {
        (0..self.rows).map(|r| self[(r, c)].clone()).collect()
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |r, c| self[(c, r)].clone())
    }

    pub fn is_identity(&self) -> bool {
        self.rows == self.cols
            && (0..self.rows).all(|r| {
                (0..self.cols).all(|c| {
                    let v = &self[(r, c)];
                    if r == c {
                        v.is_one()
                    } else {
                        v.is_zero()
                    }
                })
            })
    }

    /// Kronecker product: entry `(i*p + j, m*q + n)` is `self[(i,m)] * other[(j,n)]`.
    pub fn kron(&self, other: &Self) -> Self {
        let (p, q) = (other.rows, other.cols);
        Self::from_fn(self.rows * p, self.cols * q, |r, c| {
            &self[(r / p, c / q)] * &other[(r % p, c % q)]
        })
    }

    pub fn mul_vec(&self, v: &[Rational]) -> Vec<Rational> {
        assert_eq!(v.len(), self.cols, "dimension mismatch");
        (0..self.rows)
            .map(|r| {
                self.row(r)
                    .iter()
                    .zip(v)
                    .filter(|(a, b)| !a.is_zero() && !b.is_zero())
                    .fold(Rational::zero(), |acc, (a, b)| acc + a * b)
            })
            .collect()
    }

    /// Exact inverse by Gauss-Jordan elimination. Returns `None` when singular.
    pub fn inverse(&self) -> Option<Self> {
        assert_eq!(self.rows, self.cols, "inverse of a non-square matrix");
        let n = self.rows;
        let mut a = self.clone();
        let mut inv = Self::identity(n);

        for col in 0..n {
            let pivot = (col..n).find(|&r| !a[(r, col)].is_zero())?;
            if pivot != col {
                a.swap_rows(pivot, col);
                inv.swap_rows(pivot, col);
            }

            let p = a[(col, col)].recip();
            a.scale_row(col, &p);
            inv.scale_row(col, &p);

            for r in 0..n {
                if r == col || a[(r, col)].is_zero() {
                    continue;
                }
                let factor = a[(r, col)].clone();
                a.sub_scaled_row(r, col, &factor);
                inv.sub_scaled_row(r, col, &factor);
            }
        }
        Some(inv)
    }

    pub fn map_to_f64(&self) -> Vec<f64> {
        self.data.iter().map(to_f64).collect()
    }

    fn swap_rows(&mut self, a: usize, b: usize) {
        for c in 0..self.cols {
            self.data.swap(a * self.cols + c, b * self.cols + c);
        }
    }

    fn scale_row(&mut self, r: usize, s: &Rational) {
        for v in &mut self.data[r * self.cols..(r + 1) * self.cols] {
            if !v.is_zero() {
                *v *= s;
            }
        }
    }

    // row[target] -= factor * row[source]
    fn sub_scaled_row(&mut self, target: usize, source: usize, factor: &Rational) {
        for c in 0..self.cols {
            let s = &self.data[source * self.cols + c];
            if s.is_zero() {
                continue;
            }
            let delta = s * factor;
            self.data[target * self.cols + c] -= delta;
        }
    }
}

impl std::ops::Index<(usize, usize)> for RationalMatrix {
    type Output = Rational;

    fn index(&self, (r, c): (usize, usize)) -> &Rational {
        &self.data[r * self.cols + c]
    }
}

impl std::ops::IndexMut<(usize, usize)> for RationalMatrix {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut Rational {
        &mut self.data[r * self.cols + c]
    }
}

impl Mul for &RationalMatrix {
    type Output = RationalMatrix;

    fn mul(self, rhs: &RationalMatrix) -> RationalMatrix {
        assert_eq!(self.cols, rhs.rows, "dimension mismatch");
        let mut out = RationalMatrix::zeros(self.rows, rhs.cols);
        for r in 0..self.rows {
            for k in 0..self.cols {
                let a = &self[(r, k)];
                if a.is_zero() {
                    continue;
                }
                for c in 0..rhs.cols {
                    let b = &rhs[(k, c)];
                    if !b.is_zero() {
                        out[(r, c)] += a * b;
                    }
                }
            }
        }
        out
    }
}

impl fmt::Debug for RationalMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "RationalMatrix {}x{} [", self.rows, self.cols)?;
        for r in 0..self.rows {
            let row: Vec<String> = self.row(r).iter().map(format_exact).collect();
            writeln!(f, "  [{}]", row.join(", "))?;
        }
        write!(f, "]")
    }
}

/// How rational entries are written when dumped as JSON.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum NumberFormat {
    /// `"num/den"` strings, lossless.
    #[default]
    Exact,
    /// Nearest doubles.
    Float,
}

/// A matrix serialised as nested rows in the chosen [`NumberFormat`].
#[derive(Debug, Clone, Serialize)]
#[serde(untagged)]
pub enum MatrixJson {
    Exact(Vec<Vec<String>>),
    Float(Vec<Vec<f64>>),
}

impl MatrixJson {
    pub fn new(m: &RationalMatrix, format: NumberFormat) -> Self {
        let rows = 0..m.rows();
        match format {
            NumberFormat::Exact => MatrixJson::Exact(
                rows.map(|r| m.row(r).iter().map(format_exact).collect())
                    .collect(),
            ),
            NumberFormat::Float => {
                MatrixJson::Float(rows.map(|r| m.row(r).iter().map(to_f64).collect()).collect())
            }
        }
    }
}
