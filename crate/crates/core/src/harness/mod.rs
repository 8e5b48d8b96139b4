//! Randomized verification suites.
//!
//! Each suite draws seeded instances, measures a quantity, compares it
//! against the bound that is supposed to dominate it, and records the
//! outcome per trial. Trials are independent: trial `i` owns RNG stream
//! `i` of the master seed, so runs are reproducible bit-for-bit under any
//! thread count, and a single trial can be replayed in isolation.

pub mod oracle;
pub mod report;
pub mod sampler;

pub use report::{SuiteReport, Summary, TrialRecord};
pub use sampler::{BMode, BetaMode, SampleConfig, ShiftKind};

use std::time::Instant;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::numkit::{exp_elementwise, hadamard, l2_norm, linf_norm, RngStream, Vector};
use crate::shift::{check_lemmas, check_theorem, BoundContext, Certificate};
use crate::softmax::Instance;

/// Gradient agreement threshold: the analytic gradient must match central
/// differences to this relative tolerance, with small components measured
/// against an absolute floor of `GRADIENT_TOL * GRADIENT_ABS_FLOOR`.
pub const GRADIENT_TOL: f64 = 1e-6;
/// Denominator floor for the relative gradient deviation.
pub const GRADIENT_ABS_FLOOR: f64 = 1e-3;

/// The available verification suites.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    /// Analytic gradient vs central differences.
    Gradient,
    /// The elementary norm and exponential inequalities the proofs lean on.
    Facts,
    /// Per-lemma bounds under weight shifts.
    LemmasX,
    /// Per-lemma bounds under data shifts.
    LemmasA,
    /// End-to-end bound with certificate, weight shifts.
    TheoremX,
    /// End-to-end bound with certificate, data shifts.
    TheoremA,
    /// Normalizer lower bound over the region.
    Beta,
}

impl Suite {
    pub const ALL: [Suite; 7] = [
        Suite::Gradient,
        Suite::Facts,
        Suite::LemmasX,
        Suite::LemmasA,
        Suite::TheoremX,
        Suite::TheoremA,
        Suite::Beta,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Gradient => "gradient",
            Suite::Facts => "facts",
            Suite::LemmasX => "lemmas_x",
            Suite::LemmasA => "lemmas_A",
            Suite::TheoremX => "theorem_x",
            Suite::TheoremA => "theorem_A",
            Suite::Beta => "beta",
        }
    }

    pub fn from_name(name: &str) -> Option<Suite> {
        Suite::ALL.iter().copied().find(|s| s.name() == name)
    }

    /// Default configuration for this suite.
    pub fn default_config(self) -> SampleConfig {
        match self {
            Suite::Gradient => SampleConfig::gradient_default(),
            _ => SampleConfig::bounds_default(),
        }
    }

    fn requires_certificate(self) -> bool {
        matches!(self, Suite::TheoremX | Suite::TheoremA)
    }
}

/// Runs a suite: validates the configuration, executes all trials (in
/// parallel, each on its own RNG stream), and aggregates. Configuration
/// problems — including a radius too small for certificate mode — fail
/// here, before any trial runs.
pub fn run_suite(suite: Suite, config: &SampleConfig) -> Result<SuiteReport> {
    config.validate()?;
    if suite.requires_certificate() {
        Certificate::new(config.n_range.0, config.r)?;
    }
    let records = (0..config.trials)
        .into_par_iter()
        .map(|trial| run_trial(suite, config, trial))
        .collect::<Result<Vec<TrialRecord>>>()?;
    let summary = Summary::from_records(&records, suite == Suite::Gradient);
    Ok(SuiteReport {
        suite: suite.name().to_string(),
        config: config.clone(),
        records,
        summary,
    })
}

/// Convenience: look up the suite by name and run it.
pub fn run_suite_by_name(name: &str, config: &SampleConfig) -> Result<SuiteReport> {
    let suite = Suite::from_name(name).ok_or_else(|| {
        Error::InvalidConfig(format!(
            "unknown suite {name:?}; expected one of {}",
            Suite::ALL.map(Suite::name).join(", ")
        ))
    })?;
    run_suite(suite, config)
}

fn run_trial(suite: Suite, config: &SampleConfig, trial: u64) -> Result<TrialRecord> {
    let start = Instant::now();
    let mut rec = match suite {
        Suite::Gradient => gradient_trial(config, trial)?,
        Suite::Facts => facts_trial(config, trial)?,
        Suite::LemmasX => shift_trial(ShiftKind::Weight, config, trial, false)?,
        Suite::LemmasA => shift_trial(ShiftKind::Data, config, trial, false)?,
        Suite::TheoremX => shift_trial(ShiftKind::Weight, config, trial, true)?,
        Suite::TheoremA => shift_trial(ShiftKind::Data, config, trial, true)?,
        Suite::Beta => beta_trial(config, trial)?,
    };
    rec.wall_time = start.elapsed().as_secs_f64();
    Ok(rec)
}

fn gradient_trial(config: &SampleConfig, trial: u64) -> Result<TrialRecord> {
    let mut stream = RngStream::new(config.master_seed, trial);
    let (a, x, b) = sampler::sample_gradient_instance(config, &mut stream)?;
    let analytic = Instance::new(a.clone(), x.clone(), b.clone())?.gradient()?;
    let fd = oracle::fd_gradient(&a, &b, &x, config.fd_step)?;
    let mut max_rel: f64 = 0.0;
    for j in 0..x.len() {
        let rel = (analytic[j] - fd[j]).abs() / fd[j].abs().max(GRADIENT_ABS_FLOOR);
        max_rel = max_rel.max(rel);
    }
    let mut rec = TrialRecord::new(trial, a.rows(), a.cols(), config.r);
    rec.log_actual = max_rel.ln();
    rec.slack_log = GRADIENT_TOL.ln() - rec.log_actual;
    rec.satisfied
        .insert("gradient".into(), max_rel <= GRADIENT_TOL);
    Ok(rec)
}

/// Log-margin `ln(lhs) - ln(rhs)` of an inequality `lhs <= rhs` between
/// nonnegative quantities; a zero left side has margin negative infinity
/// (satisfied by any bound).
fn log_margin(lhs: f64, rhs: f64) -> f64 {
    if lhs == 0.0 {
        f64::NEG_INFINITY
    } else {
        lhs.ln() - rhs.ln()
    }
}

fn facts_trial(config: &SampleConfig, trial: u64) -> Result<TrialRecord> {
    let mut stream = RngStream::new(config.master_seed, trial);
    let (x, y, delta) = sampler::sample_fact_vectors(config, &mut stream);
    let n = x.len();

    let m_hadamard = log_margin(l2_norm(&hadamard(&x, &y)?), linf_norm(&x) * l2_norm(&y));
    let m_linf = log_margin(linf_norm(&x), l2_norm(&x));
    let m_l2 = log_margin(l2_norm(&x), (n as f64).sqrt() * linf_norm(&x));
    // sup norm of exp(x) against exp of the Euclidean norm, compared in
    // log space so nothing is ever exponentiated.
    let max_entry = x
        .as_slice()
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);
    let m_exp_linf = max_entry - l2_norm(&x);
    // Perturbation response of exp: the difference is computed stably as
    // exp(x) * expm1(delta) rather than by subtracting the two exponentials.
    let ex = exp_elementwise(&x)?;
    let mut diff = Vector::zeros(n);
    for i in 0..n {
        diff[i] = ex[i] * delta[i].exp_m1();
    }
    let m_exp_pert = log_margin(l2_norm(&diff), 2.0 * linf_norm(&delta) * l2_norm(&ex));

    let checks = [
        ("hadamard", m_hadamard),
        ("linf_le_l2", m_linf),
        ("l2_le_sqrt_n_linf", m_l2),
        ("exp_linf", m_exp_linf),
        ("exp_perturbation", m_exp_pert),
    ];
    let mut rec = TrialRecord::new(trial, n, 0, config.r);
    rec.log_actual = f64::NEG_INFINITY;
    for (key, margin) in checks {
        rec.log_actual = rec.log_actual.max(margin);
        rec.satisfied.insert(key.into(), margin <= 0.0);
    }
    rec.slack_log = if rec.log_actual == f64::NEG_INFINITY {
        f64::INFINITY
    } else {
        -rec.log_actual
    };
    Ok(rec)
}

fn shift_trial(
    kind: ShiftKind,
    config: &SampleConfig,
    trial: u64,
    theorem: bool,
) -> Result<TrialRecord> {
    let pair = sampler::sample_pair(kind, config, trial)?;
    let ctx = match config.beta_mode {
        BetaMode::Floor => BoundContext::with_floor(pair.n(), config.r),
        BetaMode::Empirical => BoundContext::with_empirical_beta(&pair)?,
    };
    let report = if theorem {
        check_theorem(&pair, &ctx)?
    } else {
        check_lemmas(&pair, &ctx)?
    };
    let mut rec = TrialRecord::new(trial, pair.n(), pair.d(), config.r);
    rec.fill_from_shift(&report);
    Ok(rec)
}

fn beta_trial(config: &SampleConfig, trial: u64) -> Result<TrialRecord> {
    let pair = sampler::sample_pair(ShiftKind::Weight, config, trial)?;
    let (la_t, la_next) = pair.log_alphas()?;
    let floor = -(config.r * config.r);
    let mut rec = TrialRecord::new(trial, pair.n(), pair.d(), config.r);
    rec.shift_norm = Some(pair.shift_norm()?);
    rec.log_alpha_t = Some(la_t);
    rec.log_alpha_next = Some(la_next);
    // Principal measurement: the worse (smaller) log-normalizer, negated so
    // that "actual <= bound" reads the usual way against R^2.
    rec.log_actual = -la_t.min(la_next);
    rec.slack_log = config.r * config.r - rec.log_actual;
    rec.satisfied.insert("beta_t".into(), la_t >= floor);
    rec.satisfied.insert("beta_next".into(), la_next >= floor);
    Ok(rec)
}
