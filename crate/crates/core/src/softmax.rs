//! Softmax regression: prediction, loss, and the closed-form gradient.
//!
//! An [`Instance`] bundles a data matrix `A` (n rows, d columns), a weight
//! vector `x` of length d, and a target `b` of length n. The model prediction
//! is the softmax of the logits `Ax`:
//!
//! ```text
//! u = exp(Ax)        alpha = <u, 1>        f = u / alpha
//! c = f - b          loss  = 0.5 * |c|^2
//! grad = A^T * ( f * <c, f>  +  f o c )        (o = entrywise product)
//! ```
//!
//! All exponentials go through the guarded entrywise exp, so an instance
//! whose logits would overflow is rejected instead of propagating infinity.

use crate::error::{Error, Precondition, Result};
use crate::numkit::{dot, exp_elementwise, hadamard, l2_norm, linf_norm, Matrix, Vector};

/// One softmax-regression problem: data, weights, target.
#[derive(Debug, Clone)]
pub struct Instance {
    pub a: Matrix,
    pub x: Vector,
    pub b: Vector,
}

impl Instance {
    /// Builds an instance, checking shapes and finiteness.
    pub fn new(a: Matrix, x: Vector, b: Vector) -> Result<Self> {
        if a.cols() != x.len() {
            return Err(Error::DimensionMismatch {
                op: "instance weights",
                expected: a.cols(),
                got: x.len(),
            });
        }
        if a.rows() != b.len() {
            return Err(Error::DimensionMismatch {
                op: "instance target",
                expected: a.rows(),
                got: b.len(),
            });
        }
        if a.rows() == 0 || a.cols() == 0 {
            return Err(Error::InvalidConfig(
                "instance needs at least one row and one column".into(),
            ));
        }
        if !a.is_finite() || !x.is_finite() || !b.is_finite() {
            return Err(Precondition::NonFiniteInput.into());
        }
        Ok(Instance { a, x, b })
    }

    pub fn n(&self) -> usize {
        self.a.rows()
    }

    pub fn d(&self) -> usize {
        self.a.cols()
    }

    /// Logits `Ax`.
    pub fn logits(&self) -> Vector {
        self.a.matvec(&self.x).expect("instance shapes verified")
    }

    /// Logits for an alternative weight vector against this data matrix.
    pub fn logits_at(&self, x: &Vector) -> Result<Vector> {
        self.a.matvec(x)
    }

    /// `exp(Ax)`, guarded against overflow.
    pub fn exp_logits(&self) -> Result<Vector> {
        exp_elementwise(&self.logits())
    }

    /// Normalizer `alpha = <exp(Ax), 1>`.
    pub fn alpha(&self) -> Result<f64> {
        Ok(self.exp_logits()?.iter().sum())
    }

    /// `ln alpha`, computed max-shifted so it stays accurate when the
    /// logits are large or strongly negative.
    pub fn log_alpha(&self) -> f64 {
        log_sum_exp(&self.logits())
    }

    /// Model prediction `f = exp(Ax) / alpha`.
    pub fn predict(&self) -> Result<Vector> {
        let u = self.exp_logits()?;
        let alpha: f64 = u.iter().sum();
        Ok(u.scale(1.0 / alpha))
    }

    /// Residual `c = f - b`.
    pub fn residual(&self) -> Result<Vector> {
        Ok(&self.predict()? - &self.b)
    }

    /// Loss `0.5 * |f - b|^2`.
    pub fn loss(&self) -> Result<f64> {
        let c = self.residual()?;
        Ok(0.5 * dot(&c, &c))
    }

    /// Closed-form loss gradient with respect to the weights:
    /// `A^T (f ∘ c - <c, f> f)`, materializing the prediction once and
    /// keeping everything O(nd) with no n-by-n intermediates.
    pub fn gradient(&self) -> Result<Vector> {
        let f = self.predict()?;
        let c = &f - &self.b;
        let cf = dot(&c, &f);
        let inner = hadamard(&f, &c)?.add_scaled(-cf, &f);
        self.a.mat_t_vec(&inner)
    }
}

/// `ln sum_i exp(v_i)` via the max-shift identity.
pub fn log_sum_exp(v: &Vector) -> f64 {
    let max = v.iter().fold(f64::NEG_INFINITY, |m, &x| m.max(x));
    if !max.is_finite() {
        return max;
    }
    let sum: f64 = v.iter().map(|x| (x - max).exp()).sum();
    max + sum.ln()
}

/// Softmax of an arbitrary score vector, max-shifted so the entries always
/// sum to 1 even for extreme scores.
pub fn softmax(v: &Vector) -> Vector {
    let max = v.iter().fold(f64::NEG_INFINITY, |m, &x| m.max(x));
    let shifted: Vec<f64> = v.iter().map(|x| (x - max).exp()).collect();
    let sum: f64 = shifted.iter().sum();
    Vector(shifted.into_iter().map(|e| e / sum).collect())
}

/// Directional derivative of `exp(A x)` in direction `dx`:
/// `J dx = exp(Ax) o (A dx)`.
pub fn jvp_exp(inst: &Instance, dx: &Vector) -> Result<Vector> {
    let u = inst.exp_logits()?;
    let adx = inst.a.matvec(dx)?;
    hadamard(&u, &adx)
}

/// Scaled norms that bound-checking needs together: `(|v|_2, |v|_inf)`.
pub fn norm_pair(v: &Vector) -> (f64, f64) {
    (l2_norm(v), linf_norm(v))
}

#[cfg(test)]
// Frozen reference values keep every digit of the exact computation
// they came from, beyond what an f64 literal can hold.
#[allow(clippy::excessive_precision)]
mod tests {
    use super::*;
    use crate::numkit::l2_norm;

    fn small_instance() -> Instance {
        // n = 3, d = 2 reference problem used across the test suite
        let a =
            Matrix::from_rows(vec![vec![1.0, -0.5], vec![0.25, 1.0], vec![-1.0, 0.75]]).unwrap();
        let x = Vector(vec![0.3, -0.2]);
        let b = Vector(vec![0.5, 0.25, 0.25]);
        Instance::new(a, x, b).unwrap()
    }

    #[test]
    fn prediction_is_a_probability_vector() {
        let inst = small_instance();
        let f = inst.predict().unwrap();
        let sum: f64 = f.iter().sum();
        assert!((sum - 1.0).abs() < 1e-14);
        assert!(f.iter().all(|&p| p > 0.0));
    }

    #[test]
    fn prediction_matches_high_precision_reference() {
        let inst = small_instance();
        let f = inst.predict().unwrap();
        let expected = [
            0.4953019872679253837217491,
            0.2929985475498852048959906,
            0.2116994651821894113822603,
        ];
        for (got, want) in f.iter().zip(expected) {
            assert!((got - want).abs() < 1e-15, "got {got}, want {want}");
        }
    }

    #[test]
    fn loss_matches_high_precision_reference() {
        let inst = small_instance();
        let loss = inst.loss().unwrap();
        assert!((loss - 0.001668938691180397667969824).abs() < 1e-17);
    }

    #[test]
    fn gradient_matches_high_precision_reference() {
        let inst = small_instance();
        let g = inst.gradient().unwrap();
        let expected = [
            0.00815889093573133602713427779,
            0.007239234848345339288919506992,
        ];
        for (got, want) in g.iter().zip(expected) {
            assert!((got - want).abs() < 1e-16, "got {got}, want {want}");
        }
    }

    #[test]
    fn two_class_symmetric_case_has_closed_form() {
        // A = [[1], [-1]], x = 0: f = (1/2, 1/2), alpha = 2.
        let a = Matrix::from_rows(vec![vec![1.0], vec![-1.0]]).unwrap();
        let inst = Instance::new(a, Vector(vec![0.0]), Vector(vec![1.0, 0.0])).unwrap();
        assert_eq!(inst.alpha().unwrap(), 2.0);
        let f = inst.predict().unwrap();
        assert_eq!(f.0, vec![0.5, 0.5]);
        // c = (-1/2, 1/2); <c,f> = 0; inner = f o c = (-1/4, 1/4);
        // grad = A^T inner = -1/2.
        let g = inst.gradient().unwrap();
        assert!((g[0] + 0.5).abs() < 1e-16);
        assert!((inst.loss().unwrap() - 0.25).abs() < 1e-16);
    }

    #[test]
    fn log_alpha_handles_extreme_logits() {
        let v = Vector(vec![1000.0, 999.0]);
        let expected = 1000.0 + (1.0 + (-1.0f64).exp()).ln();
        assert!((log_sum_exp(&v) - expected).abs() < 1e-12);
        let s = softmax(&v);
        assert!((s.iter().sum::<f64>() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn jvp_matches_finite_difference() {
        let inst = small_instance();
        let dx = Vector(vec![0.02, -0.01]);
        let jvp = jvp_exp(&inst, &dx).unwrap();
        let h = 1e-6;
        let plus =
            Instance::new(inst.a.clone(), inst.x.add_scaled(h, &dx), inst.b.clone()).unwrap();
        let minus =
            Instance::new(inst.a.clone(), inst.x.add_scaled(-h, &dx), inst.b.clone()).unwrap();
        let fd = (&plus.exp_logits().unwrap() - &minus.exp_logits().unwrap()).scale(0.5 / h);
        assert!(l2_norm(&(&jvp - &fd)) < 1e-9);
    }

    #[test]
    fn instance_rejects_bad_shapes_and_non_finite() {
        let a = Matrix::from_rows(vec![vec![1.0], vec![-1.0]]).unwrap();
        assert!(Instance::new(a.clone(), Vector(vec![0.0, 1.0]), Vector(vec![0.0, 0.0])).is_err());
        assert!(Instance::new(a.clone(), Vector(vec![0.0]), Vector(vec![0.0])).is_err());
        assert!(Instance::new(a, Vector(vec![f64::NAN]), Vector(vec![0.0, 0.0])).is_err());
    }
}
