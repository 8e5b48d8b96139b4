//! Independent reference computations.
//!
//! These deliberately avoid the code paths they are used to check: the
//! high-precision target-shift oracle evaluates both softmax outputs in
//! double-double arithmetic and subtracts them (the numerically naive
//! formula, made safe by ~32 digits of headroom), and the gradient oracle
//! differentiates the loss by central differences. Agreement between a
//! fast path and its oracle is evidence, not tautology.

use crate::error::{Error, Result};
use crate::numkit::{Matrix, Vector};
use crate::shift::ShiftPair;
use crate::softmax::Instance;

/// Largest `n * d` the double-double oracle accepts; it is a desk-scale
/// checker, not a production path.
pub const HIGHPREC_MAX_SIZE: usize = 64;

/// Double-double ("dd") arithmetic: an unevaluated sum `hi + lo` of two
/// doubles carrying roughly 32 significant decimal digits.
pub mod dd {
    use std::ops::{Add, Div, Mul, Neg, Sub};

    /// `hi + lo` with `|lo| <= ulp(hi)/2`.
    #[derive(Debug, Clone, Copy, PartialEq)]
    pub struct Dd {
        pub hi: f64,
        pub lo: f64,
    }

    /// `ln 2` to double-double precision: the f64 constant plus its
    /// rounding error.
    pub const LN2: Dd = Dd {
        hi: std::f64::consts::LN_2,
        lo: 2.319046813846299_6e-17,
    };

    /// Error-free sum: `a + b = s + err` exactly.
    fn two_sum(a: f64, b: f64) -> (f64, f64) {
        let s = a + b;
        let bb = s - a;
        let err = (a - (s - bb)) + (b - bb);
        (s, err)
    }

    /// Error-free sum assuming `|a| >= |b|`.
    fn quick_two_sum(a: f64, b: f64) -> (f64, f64) {
        let s = a + b;
        let err = b - (s - a);
        (s, err)
    }

    /// Error-free product via fused multiply-add.
    fn two_prod(a: f64, b: f64) -> (f64, f64) {
        let p = a * b;
        let err = a.mul_add(b, -p);
        (p, err)
    }

    impl Dd {
        pub fn from_f64(v: f64) -> Dd {
            Dd { hi: v, lo: 0.0 }
        }

        pub fn to_f64(self) -> f64 {
            self.hi + self.lo
        }

        /// Product of an error-free multiplication of two doubles.
        pub fn prod(a: f64, b: f64) -> Dd {
            let (hi, lo) = two_prod(a, b);
            Dd { hi, lo }
        }

        /// `exp(self)` by range reduction against `ln 2` and a Taylor
        /// tail on the reduced argument. Supports `hi <= 350`, ample for
        /// logits confined to a ball of radius `R^2`; arguments below the
        /// f64 underflow point flush to zero so centered softmax inputs
        /// of any spread stay in range.
        pub fn exp(self) -> Dd {
            if self.hi < -745.0 {
                return Dd::from_f64(0.0);
            }
            assert!(
                self.hi <= 350.0,
                "dd exp argument {} outside supported range",
                self.hi
            );
            let k = (self.hi / LN2.hi).round();
            let r = self - LN2 * Dd::from_f64(k);
            let mut term = Dd::from_f64(1.0);
            let mut sum = Dd::from_f64(1.0);
            for i in 1..60 {
                term = term * r / Dd::from_f64(i as f64);
                sum = sum + term;
                if term.hi.abs() < 1e-40 * sum.hi.abs() {
                    break;
                }
            }
            // Scaling by a power of two is exact.
            let scale = 2f64.powi(k as i32);
            Dd {
                hi: sum.hi * scale,
                lo: sum.lo * scale,
            }
        }
    }

    impl Add for Dd {
        type Output = Dd;
        fn add(self, other: Dd) -> Dd {
            let (s, e) = two_sum(self.hi, other.hi);
            let e = e + self.lo + other.lo;
            let (hi, lo) = quick_two_sum(s, e);
            Dd { hi, lo }
        }
    }

    impl Neg for Dd {
        type Output = Dd;
        fn neg(self) -> Dd {
            Dd {
                hi: -self.hi,
                lo: -self.lo,
            }
        }
    }

    impl Sub for Dd {
        type Output = Dd;
        fn sub(self, other: Dd) -> Dd {
            self + (-other)
        }
    }

    impl Mul for Dd {
        type Output = Dd;
        fn mul(self, other: Dd) -> Dd {
            let (p, e) = two_prod(self.hi, other.hi);
            let e = e + self.hi * other.lo + self.lo * other.hi;
            let (hi, lo) = quick_two_sum(p, e);
            Dd { hi, lo }
        }
    }

    impl Div for Dd {
        type Output = Dd;
        fn div(self, other: Dd) -> Dd {
            let q1 = self.hi / other.hi;
            let r = self - other * Dd::from_f64(q1);
            let q2 = (r.hi + r.lo) / other.hi;
            let (hi, lo) = quick_two_sum(q1, q2);
            Dd { hi, lo }
        }
    }
}

use dd::Dd;

/// Matrix-vector product in double-double arithmetic.
fn dd_matvec(a: &Matrix, x: &Vector) -> Vec<Dd> {
    (0..a.rows())
        .map(|i| {
            let mut acc = Dd::from_f64(0.0);
            for j in 0..a.cols() {
                acc = acc + Dd::prod(a[(i, j)], x[j]);
            }
            acc
        })
        .collect()
}

/// Softmax in double-double arithmetic, centered on the largest logit so
/// any validated logit range stays inside the `exp` domain.
fn dd_softmax(z: &[Dd]) -> Vec<Dd> {
    let top = z.iter().map(|v| v.hi).fold(f64::NEG_INFINITY, f64::max);
    let center = Dd::from_f64(top);
    let exps: Vec<Dd> = z.iter().map(|v| (*v - center).exp()).collect();
    let mut total = Dd::from_f64(0.0);
    for e in &exps {
        total = total + *e;
    }
    exps.into_iter().map(|e| e / total).collect()
}

/// Target shift evaluated the naive way — two softmaxes, subtracted — but
/// in double-double arithmetic, where the cancellation costs ~16 of the
/// ~32 available digits instead of everything. Validates the pair first
/// and rejects problems larger than [`HIGHPREC_MAX_SIZE`].
pub fn highprec_delta_b(pair: &ShiftPair) -> Result<Vector> {
    pair.validate()?;
    let size = pair.n() * pair.d();
    if size > HIGHPREC_MAX_SIZE {
        return Err(Error::ScaleExceeded {
            size,
            limit: HIGHPREC_MAX_SIZE,
        });
    }
    let (z_t, z_next) = match pair {
        ShiftPair::Weight { a, x_t, x_next, .. } => (dd_matvec(a, x_t), dd_matvec(a, x_next)),
        ShiftPair::Data { a_t, a_next, x, .. } => (dd_matvec(a_t, x), dd_matvec(a_next, x)),
    };
    let f_t = dd_softmax(&z_t);
    let f_next = dd_softmax(&z_next);
    let mut out = Vector::zeros(pair.n());
    for i in 0..pair.n() {
        out[i] = (f_next[i] - f_t[i]).to_f64();
    }
    Ok(out)
}

/// The two sides of the defining identity — `||f(next) - b||_2` and
/// `||f(t) - b + delta_b||_2` — each accumulated in double-double from
/// the pair's raw inputs, then rounded once at the end.
///
/// Working-precision evaluation of these norms carries absolute noise
/// near one ulp of the softmax scale, which swamps a relative comparison
/// whenever `b` happens to sit close to the prediction. Rounding each
/// dd-accumulated side costs at most a couple ulp *of that side*, so the
/// comparison stays meaningful however small the residuals get: any gap
/// beyond that is `delta_b`'s own deviation, not the measurement's. Cost
/// is linear in `n`, cheap enough to run on every sampled trial.
pub fn defining_identity_norms(pair: &ShiftPair, delta_b: &Vector) -> Result<(f64, f64)> {
    if delta_b.len() != pair.n() {
        return Err(Error::DimensionMismatch {
            op: "defining identity",
            expected: pair.n(),
            got: delta_b.len(),
        });
    }
    let (z_t, z_next) = match pair {
        ShiftPair::Weight { a, x_t, x_next, .. } => (dd_matvec(a, x_t), dd_matvec(a, x_next)),
        ShiftPair::Data { a_t, a_next, x, .. } => (dd_matvec(a_t, x), dd_matvec(a_next, x)),
    };
    let f_t = dd_softmax(&z_t);
    let f_next = dd_softmax(&z_next);
    let b = pair.b();
    let mut left = Dd::from_f64(0.0);
    let mut right = Dd::from_f64(0.0);
    for i in 0..pair.n() {
        let l = f_next[i] - Dd::from_f64(b[i]);
        left = left + l * l;
        let r = f_t[i] - Dd::from_f64(b[i]) + Dd::from_f64(delta_b[i]);
        right = right + r * r;
    }
    Ok((left.to_f64().sqrt(), right.to_f64().sqrt()))
}

/// Central-difference loss gradient. The step must lie in `[1e-8, 1e-3]`:
/// larger steps leave the truncation regime, smaller ones drown in
/// rounding.
pub fn fd_gradient(a: &Matrix, b: &Vector, x: &Vector, h: f64) -> Result<Vector> {
    if !(1e-8..=1e-3).contains(&h) {
        return Err(Error::InvalidConfig(format!(
            "finite-difference step must lie in [1e-8, 1e-3], got {h}"
        )));
    }
    let loss_at = |x: Vector| -> Result<f64> { Instance::new(a.clone(), x, b.clone())?.loss() };
    let mut g = Vector::zeros(x.len());
    for j in 0..x.len() {
        let mut xp = x.clone();
        xp[j] += h;
        let mut xm = x.clone();
        xm[j] -= h;
        g[j] = (loss_at(xp)? - loss_at(xm)?) / (2.0 * h);
    }
    Ok(g)
}

/// Richardson extrapolation of [`fd_gradient`]: combines steps `h` and
/// `h/2` to cancel the leading truncation term, giving an independent
/// second oracle with error `O(h^4)`.
pub fn fd_gradient_richardson(a: &Matrix, b: &Vector, x: &Vector, h: f64) -> Result<Vector> {
    let coarse = fd_gradient(a, b, x, h)?;
    let fine = fd_gradient(a, b, x, h / 2.0)?;
    Ok(fine.scale(4.0 / 3.0).add_scaled(-1.0 / 3.0, &coarse))
}
