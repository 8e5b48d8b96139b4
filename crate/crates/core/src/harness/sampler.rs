//! Random problem generators used by the verification suites.
//!
//! Every draw comes from a counter-addressed stream (`RngStream`), so trial
//! `i` of a run is fully determined by `(master_seed, i)` regardless of
//! thread scheduling. Generators resample on rejection up to a fixed
//! attempt budget; exhausting it is an error rather than a silent retry
//! forever, so a misconfigured region surfaces immediately.

use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numkit::{l2_norm, linf_norm, spectral_norm_default, Matrix, RngStream, Vector};
use crate::shift::{ShiftPair, STEP_CAP};

/// How many rejected draws a single trial tolerates before failing.
pub const MAX_ATTEMPTS: u32 = 100;

/// Smallest direction response treated as usable when solving for a step
/// size; anything below this would ask for an absurd scale factor.
const MIN_RESPONSE: f64 = 1e-12;

/// Target-vector families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BMode {
    /// Nonnegative entries summing to one.
    Simplex,
    /// Independent uniforms on `[0, 1)`.
    Box01,
    /// Independent standard normals.
    Gaussian,
}

/// Where the normalizer lower bound used in bound evaluation comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BetaMode {
    /// The worst-case floor `log beta = -R^2`.
    Floor,
    /// The pair's own normalizers: `log beta = min(log alpha_t, log alpha_next)`.
    Empirical,
}

/// Sampling region and run shape shared by all suites.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleConfig {
    /// Inclusive range of output dimensions.
    pub n_range: (usize, usize),
    /// Inclusive range of input dimensions.
    pub d_range: (usize, usize),
    /// Region radius: spectral-norm cap for matrices, Euclidean cap for
    /// weight vectors.
    #[serde(rename = "R")]
    pub r: f64,
    /// Fraction of the admissible step cap a sampled shift uses, in (0, 1).
    pub step_fraction: f64,
    pub b_mode: BMode,
    pub beta_mode: BetaMode,
    pub trials: u64,
    pub master_seed: u64,
    /// Central-difference step for the gradient suite.
    pub fd_step: f64,
}

impl SampleConfig {
    /// Defaults for the shift, fact, and normalizer suites.
    pub fn bounds_default() -> SampleConfig {
        SampleConfig {
            n_range: (2, 32),
            d_range: (1, 8),
            r: 4.0,
            step_fraction: 0.5,
            b_mode: BMode::Simplex,
            beta_mode: BetaMode::Floor,
            trials: 10_000,
            master_seed: 0,
            fd_step: 1e-5,
        }
    }

    /// Defaults for the gradient suite: a smaller radius keeps losses in a
    /// range where central differences are sharp.
    pub fn gradient_default() -> SampleConfig {
        SampleConfig {
            n_range: (2, 16),
            d_range: (1, 8),
            r: 2.0,
            trials: 1_000,
            ..SampleConfig::bounds_default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let (nl, nh) = self.n_range;
        let (dl, dh) = self.d_range;
        if nl < 1 || nl > nh {
            return Err(Error::InvalidConfig(format!(
                "n_range must satisfy 1 <= lo <= hi, got ({nl}, {nh})"
            )));
        }
        if dl < 1 || dl > dh {
            return Err(Error::InvalidConfig(format!(
                "d_range must satisfy 1 <= lo <= hi, got ({dl}, {dh})"
            )));
        }
        if !self.r.is_finite() || self.r <= 0.0 {
            return Err(Error::InvalidConfig(format!(
                "R must be a positive finite number, got {}",
                self.r
            )));
        }
        if !self.step_fraction.is_finite() || self.step_fraction <= 0.0 || self.step_fraction >= 1.0
        {
            return Err(Error::InvalidConfig(format!(
                "step_fraction must lie strictly between 0 and 1, got {}",
                self.step_fraction
            )));
        }
        if self.trials < 1 {
            return Err(Error::InvalidConfig("trials must be at least 1".into()));
        }
        if !(1e-8..=1e-3).contains(&self.fd_step) {
            return Err(Error::InvalidConfig(format!(
                "fd_step must lie in [1e-8, 1e-3], got {}",
                self.fd_step
            )));
        }
        Ok(())
    }
}

/// Which iterate of a pair moves.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ShiftKind {
    Weight,
    Data,
}

fn draw_dims(stream: &mut RngStream, config: &SampleConfig) -> (usize, usize) {
    let n = stream.uniform_usize(config.n_range.0, config.n_range.1);
    let d = stream.uniform_usize(config.d_range.0, config.d_range.1);
    (n, d)
}

/// A Gaussian matrix rescaled so its spectral norm is `u * r` with
/// `u` uniform on (0.2, 1]; keeping away from zero exercises the bounds
/// where they are loosest without degenerating to the trivial region.
fn draw_matrix(stream: &mut RngStream, n: usize, d: usize, r: f64) -> Result<Matrix> {
    loop {
        let raw = stream.normal_matrix(n, d);
        let sigma = spectral_norm_default(&raw)?;
        if sigma < MIN_RESPONSE {
            continue;
        }
        let u = 1.0 - 0.8 * stream.uniform();
        return Ok(raw.scale(u * r / sigma));
    }
}

/// A point uniform in the ball of radius `0.9 * r`; the margin keeps
/// projected shifted iterates comfortably inside the region.
fn draw_x(stream: &mut RngStream, d: usize, r: f64) -> Vector {
    let dir = stream.unit_vector(d);
    let radius = 0.9 * r * stream.uniform().powf(1.0 / d as f64);
    dir.scale(radius)
}

fn draw_b(stream: &mut RngStream, n: usize, mode: BMode) -> Vector {
    match mode {
        BMode::Simplex => loop {
            let mut v = Vector::zeros(n);
            let mut sum = 0.0;
            for i in 0..n {
                let e: f64 = Exp1.sample(stream.rng());
                v[i] = e;
                sum += e;
            }
            if sum > 0.0 {
                return v.scale(1.0 / sum);
            }
        },
        BMode::Box01 => {
            let mut v = Vector::zeros(n);
            for i in 0..n {
                v[i] = stream.uniform();
            }
            v
        }
        BMode::Gaussian => stream.normal_vector(n),
    }
}

/// A full problem instance for gradient checking.
pub fn sample_gradient_instance(
    config: &SampleConfig,
    stream: &mut RngStream,
) -> Result<(Matrix, Vector, Vector)> {
    let (n, d) = draw_dims(stream, config);
    let a = draw_matrix(stream, n, d, config.r)?;
    let x = draw_x(stream, d, config.r);
    let b = draw_b(stream, n, config.b_mode);
    Ok((a, x, b))
}

/// A pair of vectors plus a small perturbation for the norm-fact suite.
/// The perturbation's sup norm is `step_fraction * STEP_CAP`, mirroring
/// the shift suites' logit displacement scale.
pub fn sample_fact_vectors(
    config: &SampleConfig,
    stream: &mut RngStream,
) -> (Vector, Vector, Vector) {
    let n = stream.uniform_usize(config.n_range.0, config.n_range.1);
    let x = stream.normal_vector(n);
    let y = stream.normal_vector(n);
    let mut delta = Vector::zeros(n);
    for i in 0..n {
        delta[i] = config.step_fraction * STEP_CAP * stream.uniform_in(-1.0, 1.0);
    }
    (x, y, delta)
}

/// A validated pair whose logit displacement uses `step_fraction` of the
/// admissible cap. Rejection reasons: a direction the matrix annihilates,
/// or a shifted matrix leaving the region. Each attempt redraws everything.
pub fn sample_pair(kind: ShiftKind, config: &SampleConfig, trial_index: u64) -> Result<ShiftPair> {
    let mut stream = RngStream::new(config.master_seed, trial_index);
    for _ in 0..MAX_ATTEMPTS {
        let (n, d) = draw_dims(&mut stream, config);
        let b = draw_b(&mut stream, n, config.b_mode);
        let candidate = match kind {
            ShiftKind::Weight => {
                let a = draw_matrix(&mut stream, n, d, config.r)?;
                let x_t = draw_x(&mut stream, d, config.r);
                let dir = stream.unit_vector(d);
                let response = linf_norm(&a.matvec(&dir)?);
                if response < MIN_RESPONSE {
                    continue;
                }
                let step = config.step_fraction * STEP_CAP / response;
                let mut x_next = x_t.add_scaled(step, &dir);
                let xn = l2_norm(&x_next);
                if xn > config.r {
                    x_next = x_next.scale(config.r / xn);
                }
                ShiftPair::Weight {
                    a,
                    b,
                    x_t,
                    x_next,
                    r: config.r,
                }
            }
            ShiftKind::Data => {
                let a_t = draw_matrix(&mut stream, n, d, config.r)?;
                let x = draw_x(&mut stream, d, config.r);
                let g = stream.normal_matrix(n, d);
                let response = linf_norm(&g.matvec(&x)?);
                if response < MIN_RESPONSE {
                    continue;
                }
                let step = config.step_fraction * STEP_CAP / response;
                let a_next = a_t.add_scaled(step, &g)?;
                if spectral_norm_default(&a_next)? > config.r {
                    continue;
                }
                ShiftPair::Data {
                    a_t,
                    a_next,
                    b,
                    x,
                    r: config.r,
                }
            }
        };
        if candidate.validate().is_ok() {
            return Ok(candidate);
        }
    }
    Err(Error::SamplerExhausted {
        trial: trial_index,
        attempts: MAX_ATTEMPTS,
    })
}
