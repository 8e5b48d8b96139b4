//! Minimal dense linear algebra and seeded randomness.
//!
//! Everything downstream works in plain `f64`. The two container types are
//! deliberately thin: a [`Vector`] is a boxed slice of entries, a [`Matrix`]
//! is a row-major buffer. The only nontrivial algorithm here is
//! [`spectral_norm`], which runs power iteration on the smaller Gram matrix
//! from a deterministic start vector so repeated runs agree bit for bit.

use std::ops::{Add, Index, IndexMut, Sub};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Arguments to [`exp_elementwise`] must not exceed this magnitude.
/// `exp(709.8)` already overflows an `f64`, and an infinity here would turn
/// every downstream bound check into a comparison against `inf`.
pub const EXP_GUARD: f64 = 700.0;

/// Relative tolerance [`spectral_norm_default`] uses.
pub const SPECTRAL_TOL: f64 = 1e-10;
/// Sweep cap for [`spectral_norm_default`].
pub const SPECTRAL_MAX_ITER: usize = 10_000;

/// A dense column vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Vector(pub Vec<f64>);

impl Vector {
    pub fn zeros(n: usize) -> Self {
        Vector(vec![0.0; n])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn iter(&self) -> std::slice::Iter<'_, f64> {
        self.0.iter()
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }

    /// Entrywise scaling by `s`.
    pub fn scale(&self, s: f64) -> Vector {
        Vector(self.0.iter().map(|v| v * s).collect())
    }

    /// `self + s * other`. Panics if the lengths differ.
    pub fn add_scaled(&self, s: f64, other: &Vector) -> Vector {
        assert_eq!(self.len(), other.len(), "add_scaled length mismatch");
        Vector(
            self.0
                .iter()
                .zip(&other.0)
                .map(|(a, b)| a + s * b)
                .collect(),
        )
    }
}

impl From<Vec<f64>> for Vector {
    fn from(v: Vec<f64>) -> Self {
        Vector(v)
    }
}

impl Index<usize> for Vector {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl IndexMut<usize> for Vector {
    fn index_mut(&mut self, i: usize) -> &mut f64 {
        &mut self.0[i]
    }
}

/// Panics if the lengths differ; use the checked ops for untrusted input.
impl Add for &Vector {
    type Output = Vector;
    fn add(self, rhs: &Vector) -> Vector {
        self.add_scaled(1.0, rhs)
    }
}

impl Sub for &Vector {
    type Output = Vector;
    fn sub(self, rhs: &Vector) -> Vector {
        self.add_scaled(-1.0, rhs)
    }
}

/// Euclidean norm, scaled to avoid overflow for very large entries.
pub fn l2_norm(v: &Vector) -> f64 {
    let max = linf_norm(v);
    if max == 0.0 || !max.is_finite() {
        return max;
    }
    let sum: f64 = v.iter().map(|x| (x / max) * (x / max)).sum();
    max * sum.sqrt()
}

/// Max-magnitude norm; 0 for the empty vector.
pub fn linf_norm(v: &Vector) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Plain dot product. Panics if the lengths differ.
pub fn dot(a: &Vector, b: &Vector) -> f64 {
    assert_eq!(a.len(), b.len(), "dot length mismatch");
    a.iter().zip(b.iter()).map(|(x, y)| x * y).sum()
}

/// Entrywise product.
pub fn hadamard(a: &Vector, b: &Vector) -> Result<Vector> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            op: "hadamard",
            expected: a.len(),
            got: b.len(),
        });
    }
    Ok(Vector(a.iter().zip(b.iter()).map(|(x, y)| x * y).collect()))
}

/// Entrywise `exp`, refusing inputs that would overflow.
pub fn exp_elementwise(v: &Vector) -> Result<Vector> {
    let max = linf_norm(v);
    if max.is_nan() || max > EXP_GUARD {
        return Err(Error::OverflowRisk {
            actual: max,
            limit: EXP_GUARD,
        });
    }
    Ok(Vector(v.iter().map(|x| x.exp()).collect()))
}

/// A dense row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    /// Builds from row vectors; every row must have the same length.
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let nrows = rows.len();
        let ncols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(nrows * ncols);
        for row in &rows {
            if row.len() != ncols {
                return Err(Error::DimensionMismatch {
                    op: "from_rows",
                    expected: ncols,
                    got: row.len(),
                });
            }
            data.extend_from_slice(row);
        }
        Ok(Matrix {
            rows: nrows,
            cols: ncols,
            data,
        })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = Matrix::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                m.data[i * cols + j] = f(i, j);
            }
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// `self + s * other`, entrywise.
    pub fn add_scaled(&self, s: f64, other: &Matrix) -> Result<Matrix> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(Error::DimensionMismatch {
                op: "add_scaled",
                expected: self.data.len(),
                got: other.data.len(),
            });
        }
        Ok(Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a + s * b)
                .collect(),
        })
    }

    pub fn scale(&self, s: f64) -> Matrix {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| v * s).collect(),
        }
    }

    /// `self * v`.
    pub fn matvec(&self, v: &Vector) -> Result<Vector> {
        if v.len() != self.cols {
            return Err(Error::DimensionMismatch {
                op: "matvec",
                expected: self.cols,
                got: v.len(),
            });
        }
        let mut out = vec![0.0; self.rows];
        for (i, oi) in out.iter_mut().enumerate() {
            *oi = self.row(i).iter().zip(v.iter()).map(|(a, x)| a * x).sum();
        }
        Ok(Vector(out))
    }

    /// `self^T * v`.
    pub fn mat_t_vec(&self, v: &Vector) -> Result<Vector> {
        if v.len() != self.rows {
            return Err(Error::DimensionMismatch {
                op: "mat_t_vec",
                expected: self.rows,
                got: v.len(),
            });
        }
        let mut out = vec![0.0; self.cols];
        for i in 0..self.rows {
            let vi = v[i];
            for (j, oj) in out.iter_mut().enumerate() {
                *oj += self.data[i * self.cols + j] * vi;
            }
        }
        Ok(Vector(out))
    }

    /// Gram matrix on the smaller side: `A^T A` if `cols <= rows`, else `A A^T`.
    fn small_gram(&self) -> Matrix {
        if self.cols <= self.rows {
            let k = self.cols;
            Matrix::from_fn(k, k, |j, l| {
                (0..self.rows)
                    .map(|i| self.data[i * k + j] * self.data[i * k + l])
                    .sum()
            })
        } else {
            let k = self.rows;
            Matrix::from_fn(k, k, |i, l| {
                self.row(i)
                    .iter()
                    .zip(self.row(l))
                    .map(|(a, b)| a * b)
                    .sum()
            })
        }
    }
}

impl Index<(usize, usize)> for Matrix {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

// Matrices serialize as nested row arrays; deserialization goes through
// `from_rows`, so a ragged payload is rejected instead of silently
// producing a misshapen matrix.
impl Serialize for Matrix {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let rows: Vec<&[f64]> = (0..self.rows).map(|i| self.row(i)).collect();
        rows.serialize(s)
    }
}

impl<'de> Deserialize<'de> for Matrix {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let rows = Vec::<Vec<f64>>::deserialize(d)?;
        Matrix::from_rows(rows).map_err(serde::de::Error::custom)
    }
}

/// Largest singular value with the default tolerance and sweep cap.
pub fn spectral_norm_default(m: &Matrix) -> Result<f64> {
    spectral_norm(m, SPECTRAL_TOL, SPECTRAL_MAX_ITER)
}

/// Largest singular value of `m`.
///
/// When the smaller dimension is at most 2 the symmetric 2x2 (or 1x1)
/// eigenproblem is solved in closed form. Otherwise: power iteration on the
/// smaller Gram matrix, started from the normalized all-ones vector so the
/// result is reproducible, stopping once the eigenvalue estimate moves by
/// less than `tol` relative between sweeps. If the all-ones start happens to
/// lie in the null space, the iteration restarts once from the basis vector
/// with the largest Gram diagonal (which cannot be null for a nonzero Gram).
pub fn spectral_norm(m: &Matrix, tol: f64, max_iter: usize) -> Result<f64> {
    let k = m.rows.min(m.cols);
    if k == 0 {
        return Ok(0.0);
    }

    let g = m.small_gram();
    let k = g.rows;

    if k == 1 {
        return Ok(g[(0, 0)].max(0.0).sqrt());
    }
    if k == 2 {
        // eigenvalues of [[a, b], [b, c]]: mean +- sqrt(((a-c)/2)^2 + b^2)
        let (a, b, c) = (g[(0, 0)], g[(0, 1)], g[(1, 1)]);
        let mean = 0.5 * (a + c);
        let disc = (0.25 * (a - c) * (a - c) + b * b).sqrt();
        return Ok((mean + disc).max(0.0).sqrt());
    }

    let mut v = Vector(vec![1.0 / (k as f64).sqrt(); k]);
    let mut lambda = 0.0_f64;
    let mut restarted = false;
    let mut last_change = f64::INFINITY;
    for _sweep in 0..max_iter {
        let w = g.matvec(&v).expect("gram matvec shape");
        let wnorm = l2_norm(&w);
        if wnorm == 0.0 {
            if restarted {
                return Ok(0.0); // the Gram matrix itself is zero
            }
            let argmax = (0..k)
                .max_by(|&i, &j| g[(i, i)].total_cmp(&g[(j, j)]))
                .unwrap_or(0);
            if g[(argmax, argmax)] <= 0.0 {
                return Ok(0.0);
            }
            let mut e = Vector::zeros(k);
            e[argmax] = 1.0;
            v = e;
            restarted = true;
            continue;
        }
        last_change = (wnorm - lambda).abs();
        if last_change <= tol * wnorm.max(f64::MIN_POSITIVE) {
            return Ok(wnorm.sqrt());
        }
        lambda = wnorm;
        v = w.scale(1.0 / wnorm);
    }
    Err(Error::NonConvergence {
        sweeps: max_iter,
        tol,
        last_change,
    })
}

/// A deterministic random stream.
///
/// The same `(master_seed, stream_index)` pair yields the same sample
/// sequence on every platform; the harness gives each trial its own stream
/// index so reports are reproducible under any degree of parallelism.
pub struct RngStream {
    rng: ChaCha12Rng,
}

impl RngStream {
    pub fn new(master_seed: u64, stream_index: u64) -> Self {
        let mut rng = ChaCha12Rng::seed_from_u64(master_seed);
        rng.set_stream(stream_index);
        RngStream { rng }
    }

    /// Uniform in `[0, 1)`.
    /// Direct access to the underlying generator, for sampling from
    /// `rand_distr` distributions.
    pub fn rng(&mut self) -> &mut ChaCha12Rng {
        &mut self.rng
    }

    pub fn uniform(&mut self) -> f64 {
        self.rng.random()
    }

    /// Uniform in `[lo, hi)`.
    pub fn uniform_in(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    /// Uniform integer in `[lo, hi]`.
    pub fn uniform_usize(&mut self, lo: usize, hi: usize) -> usize {
        self.rng.random_range(lo..=hi)
    }

    pub fn standard_normal(&mut self) -> f64 {
        self.rng.sample(StandardNormal)
    }

    pub fn normal_vector(&mut self, n: usize) -> Vector {
        Vector((0..n).map(|_| self.standard_normal()).collect())
    }

    pub fn normal_matrix(&mut self, rows: usize, cols: usize) -> Matrix {
        Matrix::from_fn(rows, cols, |_, _| self.standard_normal())
    }

    /// Uniform direction on the unit sphere.
    pub fn unit_vector(&mut self, n: usize) -> Vector {
        loop {
            let v = self.normal_vector(n);
            let norm = l2_norm(&v);
            if norm > 1e-12 {
                return v.scale(1.0 / norm);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn norms_of_empty_vector_are_zero() {
        let v = Vector(vec![]);
        assert_eq!(l2_norm(&v), 0.0);
        assert_eq!(linf_norm(&v), 0.0);
    }

    #[test]
    fn l2_norm_survives_huge_entries() {
        let v = Vector(vec![1e200, -1e200]);
        let expected = 1e200 * 2f64.sqrt();
        assert!((l2_norm(&v) - expected).abs() <= 1e185);
    }

    #[test]
    fn hadamard_rejects_mismatched_lengths() {
        let e = hadamard(&Vector(vec![1.0]), &Vector(vec![1.0, 2.0])).unwrap_err();
        assert!(matches!(e, Error::DimensionMismatch { op: "hadamard", .. }));
    }

    #[test]
    fn exp_elementwise_guards_overflow() {
        assert!(exp_elementwise(&Vector(vec![0.0, 700.0])).is_ok());
        let e = exp_elementwise(&Vector(vec![0.0, 700.5])).unwrap_err();
        assert!(matches!(e, Error::OverflowRisk { .. }));
    }

    #[test]
    fn spectral_norm_of_identity_and_scalings() {
        let id = Matrix::identity(5);
        let sigma = spectral_norm_default(&id).unwrap();
        assert!((sigma - 1.0).abs() < 1e-9);
        let sigma3 = spectral_norm_default(&id.scale(-3.0)).unwrap();
        assert!((sigma3 - 3.0).abs() < 1e-9);
    }

    #[test]
    fn spectral_norm_single_column_is_its_length() {
        let m = Matrix::from_rows(vec![vec![3.0], vec![4.0]]).unwrap();
        assert_eq!(spectral_norm_default(&m).unwrap(), 5.0);
    }

    #[test]
    fn spectral_norm_zero_matrix_is_zero() {
        let m = Matrix::zeros(4, 3);
        assert_eq!(spectral_norm_default(&m).unwrap(), 0.0);
    }

    #[test]
    fn spectral_norm_2x2_closed_form() {
        // diag(2, 1) has singular values {2, 1}
        let m = Matrix::from_rows(vec![vec![2.0, 0.0], vec![0.0, 1.0]]).unwrap();
        assert_eq!(spectral_norm_default(&m).unwrap(), 2.0);
    }

    #[test]
    fn spectral_norm_recovers_from_null_start() {
        // columns sum to zero, so the all-ones start vector is in the null
        // space of A^T A and the first sweep produces w = 0 exactly
        let m = Matrix::from_rows(vec![
            vec![1.0, -1.0, 0.0],
            vec![1.0, 0.0, -1.0],
            vec![0.0, 1.0, -1.0],
        ])
        .unwrap();
        let sigma = spectral_norm_default(&m).unwrap();
        // sigma_1 = sqrt(3): Gram has eigenvalues {3, 3, 0}
        assert!((sigma - 3f64.sqrt()).abs() < 1e-9, "sigma = {sigma}");
    }

    #[test]
    fn rng_streams_are_reproducible_and_distinct() {
        let mut a = RngStream::new(7, 3);
        let mut b = RngStream::new(7, 3);
        let mut c = RngStream::new(7, 4);
        let xa: Vec<f64> = (0..8).map(|_| a.standard_normal()).collect();
        let xb: Vec<f64> = (0..8).map(|_| b.standard_normal()).collect();
        let xc: Vec<f64> = (0..8).map(|_| c.standard_normal()).collect();
        assert_eq!(xa, xb);
        assert_ne!(xa, xc);
    }
}
