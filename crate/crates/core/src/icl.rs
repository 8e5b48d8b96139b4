//! Gradient-descent trajectories, induced targets, and single
//! self-attention-layer updates.
//!
//! The central observation: moving the weights and moving the targets are
//! two views of one event. A gradient step `x_t -> x_next` changes the
//! prediction, and there is a target vector `b_tilde = b - delta_b` that
//! makes the *old* weights look exactly as far from `b_tilde` as the new
//! weights are from `b`. For linear regression that correspondence is
//! algebraically identical to one linear self-attention update with
//! hand-built weights, which this module verifies to machine precision;
//! for softmax regression both induced shifts are bounded and the module
//! reports how close they actually are.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harness::report::{json_f64, json_f64_opt};
use crate::numkit::{dot, l2_norm, Matrix, Vector};
use crate::shift::{bound_delta_b, BoundContext, ShiftPair};
use crate::softmax::{softmax, Instance};

/// Update direction of a gradient step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepSign {
    /// `x - eta * g`: follows the negative gradient downhill.
    Descent,
    /// `x + eta * g`: the literal plus-sign update, kept selectable so its
    /// divergence from descent is observable rather than silently fixed.
    Plus,
}

/// Gradient-descent step parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GDConfig {
    pub eta: f64,
    pub steps: usize,
    pub sign: StepSign,
    /// Halve the learning rate until the loss stops increasing, down to a
    /// floor of `2^-40 * eta`.
    pub backtracking: bool,
}

impl GDConfig {
    pub fn new(eta: f64, steps: usize, sign: StepSign, backtracking: bool) -> Result<Self> {
        if eta.is_nan() || eta <= 0.0 || !eta.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "learning rate must be positive and finite, got {eta}"
            )));
        }
        if steps < 1 {
            return Err(Error::InvalidConfig("steps must be at least 1".into()));
        }
        Ok(GDConfig {
            eta,
            steps,
            sign,
            backtracking,
        })
    }
}

/// One token: an input row and its target channel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Token {
    pub a: Vector,
    pub b: f64,
}

impl Token {
    /// The `(d+1)`-dimensional embedding `(a, b)`.
    fn embed(&self) -> Vector {
        let mut v = Vector::zeros(self.a.len() + 1);
        for j in 0..self.a.len() {
            v[j] = self.a[j];
        }
        v[self.a.len()] = self.b;
        v
    }
}

/// Context examples plus one query token.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TokenSet {
    pub context: Vec<Token>,
    pub query: Token,
}

impl TokenSet {
    /// Builds tokens from a regression task: row `j` of `a` with target
    /// `b[j]` becomes a context token; the query starts with an empty
    /// target channel.
    pub fn from_regression(a: &Matrix, b: &Vector, query: Vector) -> Result<TokenSet> {
        if a.rows() != b.len() {
            return Err(Error::DimensionMismatch {
                op: "from_regression",
                expected: a.rows(),
                got: b.len(),
            });
        }
        if query.len() != a.cols() {
            return Err(Error::DimensionMismatch {
                op: "from_regression",
                expected: a.cols(),
                got: query.len(),
            });
        }
        let context = (0..a.rows())
            .map(|i| Token {
                a: Vector(a.row(i).to_vec()),
                b: b[i],
            })
            .collect();
        Ok(TokenSet {
            context,
            query: Token { a: query, b: 0.0 },
        })
    }

    /// Input dimension shared by every token.
    pub fn dim(&self) -> usize {
        self.query.a.len()
    }

    fn validate(&self) -> Result<()> {
        let d = self.dim();
        if self.context.is_empty() {
            return Err(Error::InvalidConfig(
                "token set needs at least one context token".into(),
            ));
        }
        for t in &self.context {
            if t.a.len() != d {
                return Err(Error::DimensionMismatch {
                    op: "token dimensions",
                    expected: d,
                    got: t.a.len(),
                });
            }
        }
        Ok(())
    }

    /// All tokens, context first, query last.
    fn all(&self) -> Vec<&Token> {
        let mut v: Vec<&Token> = self.context.iter().collect();
        v.push(&self.query);
        v
    }
}

/// The four matrices of one attention layer, all `(d+1) x (d+1)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttentionWeights {
    pub w_q: Matrix,
    pub w_k: Matrix,
    pub w_v: Matrix,
    pub p: Matrix,
}

impl AttentionWeights {
    fn validate(&self, dim: usize) -> Result<()> {
        for (m, name) in [
            (&self.w_q, "W_Q"),
            (&self.w_k, "W_K"),
            (&self.w_v, "W_V"),
            (&self.p, "P"),
        ] {
            if m.rows() != dim || m.cols() != dim {
                return Err(Error::DimensionMismatch {
                    op: "attention weights",
                    expected: dim,
                    got: m.rows().max(m.cols()),
                });
            }
            if !m.is_finite() {
                return Err(crate::error::Precondition::NonFiniteInput.into());
            }
            let _ = name;
        }
        Ok(())
    }
}

/// Attention weights that make one linear attention step reproduce the
/// gradient-descent prediction shift on a linear regression task (implicit
/// initial weight zero): queries and keys select the input channels,
/// values scale the target channel by `eta`, and the projection is the
/// identity.
pub fn construct_gd_weights(d: usize, eta: f64) -> AttentionWeights {
    let selector = Matrix::from_fn(d + 1, d + 1, |i, j| if i == j && i < d { 1.0 } else { 0.0 });
    let mut w_v = Matrix::zeros(d + 1, d + 1);
    w_v[(d, d)] = eta;
    AttentionWeights {
        w_q: selector.clone(),
        w_k: selector,
        w_v,
        p: Matrix::identity(d + 1),
    }
}

/// Sum over context tokens of `(W_V e_k) * weight_k`, projected by `P`.
fn weighted_value_sum(tokens: &TokenSet, w: &AttentionWeights, weights: &[f64]) -> Result<Vector> {
    let dim = tokens.dim() + 1;
    let mut acc = Vector::zeros(dim);
    for (k, token) in tokens.context.iter().enumerate() {
        let v = w.w_v.matvec(&token.embed())?;
        acc = acc.add_scaled(weights[k], &v);
    }
    w.p.matvec(&acc)
}

/// One linear (un-normalized) self-attention update. Keys and values come
/// from the context tokens; every token, query included, receives the
/// update on its target channel.
pub fn attention_step_linear(tokens: &TokenSet, w: &AttentionWeights) -> Result<TokenSet> {
    tokens.validate()?;
    let d = tokens.dim();
    w.validate(d + 1)?;
    let keys: Vec<Vector> = tokens
        .context
        .iter()
        .map(|t| w.w_k.matvec(&t.embed()))
        .collect::<Result<_>>()?;
    let mut out = tokens.clone();
    let update = |token: &Token| -> Result<f64> {
        let q = w.w_q.matvec(&token.embed())?;
        let scores: Vec<f64> = keys.iter().map(|k| dot(k, &q)).collect();
        Ok(weighted_value_sum(tokens, w, &scores)?[d])
    };
    for (j, token) in tokens.context.iter().enumerate() {
        out.context[j].b = token.b + update(token)?;
    }
    out.query.b = tokens.query.b + update(&tokens.query)?;
    Ok(out)
}

/// Softmax attention scores: row `j` holds the normalized weights token
/// `j` places on each context token. Rows sum to one.
pub fn attention_scores(tokens: &TokenSet, w: &AttentionWeights) -> Result<Matrix> {
    tokens.validate()?;
    w.validate(tokens.dim() + 1)?;
    let keys: Vec<Vector> = tokens
        .context
        .iter()
        .map(|t| w.w_k.matvec(&t.embed()))
        .collect::<Result<_>>()?;
    let all = tokens.all();
    let mut scores = Matrix::zeros(all.len(), keys.len());
    for (j, token) in all.iter().enumerate() {
        let q = w.w_q.matvec(&token.embed())?;
        let logits = Vector(keys.iter().map(|k| dot(k, &q)).collect());
        let row = softmax(&logits);
        for k in 0..keys.len() {
            scores[(j, k)] = row[k];
        }
    }
    Ok(scores)
}

/// One normalized self-attention update to the target channel only.
pub fn attention_step_softmax(tokens: &TokenSet, w: &AttentionWeights) -> Result<TokenSet> {
    let scores = attention_scores(tokens, w)?;
    let d = tokens.dim();
    let mut out = tokens.clone();
    for (j, token) in tokens.all().iter().enumerate() {
        let row: Vec<f64> = (0..scores.cols()).map(|k| scores[(j, k)]).collect();
        let upd = weighted_value_sum(tokens, w, &row)?[d];
        if j < out.context.len() {
            out.context[j].b = token.b + upd;
        } else {
            out.query.b = token.b + upd;
        }
    }
    Ok(out)
}

/// One normalized self-attention update applied to *every* channel, input
/// rows included; used to read an updated data matrix off the tokens.
pub fn attention_step_softmax_full(tokens: &TokenSet, w: &AttentionWeights) -> Result<TokenSet> {
    let scores = attention_scores(tokens, w)?;
    let d = tokens.dim();
    let mut out = tokens.clone();
    for (j, token) in tokens.all().iter().enumerate() {
        let row: Vec<f64> = (0..scores.cols()).map(|k| scores[(j, k)]).collect();
        let upd = weighted_value_sum(tokens, w, &row)?;
        let embedded = token.embed().add_scaled(1.0, &upd);
        let new = Token {
            a: Vector(embedded.as_slice()[..d].to_vec()),
            b: embedded[d],
        };
        if j < out.context.len() {
            out.context[j] = new;
        } else {
            out.query = new;
        }
    }
    Ok(out)
}

/// One gradient step on the softmax regression loss. With backtracking,
/// the learning rate is halved until the new loss does not exceed the old
/// one (plus a 1e-12 cushion) or the rate reaches its floor, in which case
/// the floor step is taken as-is.
pub fn gd_step(a: &Matrix, b: &Vector, x: &Vector, config: &GDConfig) -> Result<Vector> {
    let inst = Instance::new(a.clone(), x.clone(), b.clone())?;
    let g = inst.gradient()?;
    let dir = match config.sign {
        StepSign::Descent => -1.0,
        StepSign::Plus => 1.0,
    };
    let base_loss = inst.loss()?;
    let floor = config.eta * (-40f64).exp2();
    let mut eta = config.eta;
    loop {
        let candidate = x.add_scaled(dir * eta, &g);
        if !config.backtracking || eta <= floor {
            return Ok(candidate);
        }
        let new_loss = Instance::new(a.clone(), candidate.clone(), b.clone())?.loss()?;
        if new_loss <= base_loss + 1e-12 {
            return Ok(candidate);
        }
        eta *= 0.5;
    }
}

/// The target that absorbs a weight shift: `b_tilde = b - delta_b`, so the
/// residual of the *old* weights against `b_tilde` matches the residual of
/// the new weights against `b`.
pub fn induced_target(
    a: &Matrix,
    b: &Vector,
    x_t: &Vector,
    x_next: &Vector,
    r: f64,
) -> Result<Vector> {
    let pair = ShiftPair::Weight {
        a: a.clone(),
        b: b.clone(),
        x_t: x_t.clone(),
        x_next: x_next.clone(),
        r,
    };
    let delta = pair.delta_b_exact()?;
    Ok(b.add_scaled(-1.0, &delta))
}

/// Linear-regression analogue, exact in real arithmetic: one GD step on
/// `0.5 * |Ax - b|^2` moves the weights by `delta_x = -eta * A^T (Ax - b)`
/// and the induced target is `b - A * delta_x`.
pub fn linear_gd_induced_target(
    a: &Matrix,
    b: &Vector,
    x: &Vector,
    eta: f64,
) -> Result<(Vector, Vector)> {
    let residual = a.matvec(x)?.add_scaled(-1.0, b);
    let delta_x = a.mat_t_vec(&residual)?.scale(-eta);
    let x_next = x.add_scaled(1.0, &delta_x);
    let b_tilde = b.add_scaled(-1.0, &a.matvec(&delta_x)?);
    Ok((x_next, b_tilde))
}

/// Per-step agreement between two sequences of shift vectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepMetric {
    #[serde(with = "json_f64")]
    pub l2_distance: f64,
    /// Zero when either vector is zero.
    #[serde(with = "json_f64")]
    pub cosine: f64,
    /// `|b| / |a|`; 1 when both are zero, infinite when only `a` is.
    #[serde(with = "json_f64")]
    pub norm_ratio: f64,
}

/// Step metrics plus trajectory aggregates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareReport {
    pub steps: Vec<StepMetric>,
    #[serde(with = "json_f64")]
    pub mean_l2_distance: f64,
    #[serde(with = "json_f64")]
    pub max_l2_distance: f64,
    #[serde(with = "json_f64")]
    pub mean_cosine: f64,
    /// Worst-case alignment over the run.
    #[serde(with = "json_f64")]
    pub min_cosine: f64,
}

/// Compares two equally long runs of shift vectors.
pub fn compare_transforms(run_a: &[Vector], run_b: &[Vector]) -> Result<CompareReport> {
    if run_a.len() != run_b.len() {
        return Err(Error::DimensionMismatch {
            op: "compare_transforms",
            expected: run_a.len(),
            got: run_b.len(),
        });
    }
    let mut steps = Vec::with_capacity(run_a.len());
    for (a, b) in run_a.iter().zip(run_b) {
        if a.len() != b.len() {
            return Err(Error::DimensionMismatch {
                op: "compare_transforms",
                expected: a.len(),
                got: b.len(),
            });
        }
        let na = l2_norm(a);
        let nb = l2_norm(b);
        let cosine = if na == 0.0 || nb == 0.0 {
            0.0
        } else {
            dot(a, b) / (na * nb)
        };
        let norm_ratio = if na == 0.0 && nb == 0.0 { 1.0 } else { nb / na };
        steps.push(StepMetric {
            l2_distance: l2_norm(&a.add_scaled(-1.0, b)),
            cosine,
            norm_ratio,
        });
    }
    let len = steps.len().max(1) as f64;
    Ok(CompareReport {
        mean_l2_distance: steps.iter().map(|s| s.l2_distance).sum::<f64>() / len,
        max_l2_distance: steps
            .iter()
            .map(|s| s.l2_distance)
            .fold(f64::NEG_INFINITY, f64::max),
        mean_cosine: steps.iter().map(|s| s.cosine).sum::<f64>() / len,
        min_cosine: steps.iter().map(|s| s.cosine).fold(f64::INFINITY, f64::min),
        steps,
    })
}

/// Which regression task a trajectory runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IclTask {
    Linear,
    Softmax,
}

/// One point of a trajectory dump. `metrics` compares the gradient-induced
/// target shift with the attention-induced one at the same state;
/// `log_bound` is the certified log bound on the gradient-induced shift,
/// absent when the step leaves the bound's region of validity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryStep {
    pub step: usize,
    pub x: Vector,
    #[serde(with = "json_f64")]
    pub loss: f64,
    pub b_tilde: Vector,
    #[serde(with = "json_f64")]
    pub delta_b_norm: f64,
    #[serde(default, with = "json_f64_opt")]
    pub log_bound: Option<f64>,
    pub metrics: Option<StepMetric>,
}

/// Trajectory parameters: the task, the step rule, and the region radius
/// used when certifying shifts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryConfig {
    pub task: IclTask,
    pub gd: GDConfig,
    #[serde(rename = "R")]
    pub r: f64,
}

/// Runs a gradient-descent trajectory from `x0`, recording at every step
/// the induced target and how the matching attention update compares.
/// Step 0 is the initial state.
pub fn run_trajectory(
    a: &Matrix,
    b: &Vector,
    x0: &Vector,
    config: &TrajectoryConfig,
) -> Result<Vec<TrajectoryStep>> {
    match config.task {
        IclTask::Linear => linear_trajectory(a, b, x0, config),
        IclTask::Softmax => softmax_trajectory(a, b, x0, config),
    }
}

fn linear_loss(a: &Matrix, b: &Vector, x: &Vector) -> Result<f64> {
    let r = a.matvec(x)?.add_scaled(-1.0, b);
    Ok(0.5 * dot(&r, &r))
}

/// Linear task: at each visited state, one GD step and one linear
/// attention step (with the hand-built weights, on residual-carrying
/// tokens) produce prediction shifts that agree to machine precision.
fn linear_trajectory(
    a: &Matrix,
    b: &Vector,
    x0: &Vector,
    config: &TrajectoryConfig,
) -> Result<Vec<TrajectoryStep>> {
    let eta = config.gd.eta;
    let weights = construct_gd_weights(a.cols(), eta);
    let mut steps = Vec::with_capacity(config.gd.steps + 1);
    let mut x = x0.clone();
    steps.push(TrajectoryStep {
        step: 0,
        x: x.clone(),
        loss: linear_loss(a, b, &x)?,
        b_tilde: b.clone(),
        delta_b_norm: 0.0,
        log_bound: None,
        metrics: None,
    });
    for step in 1..=config.gd.steps {
        // Gradient side: the prediction shift A * delta_x.
        let (x_next, b_tilde) = linear_gd_induced_target(a, b, &x, eta)?;
        let delta_x = x_next.add_scaled(-1.0, &x);
        let prediction_shift = a.matvec(&delta_x)?;

        // Attention side: tokens carry the current residual in the target
        // channel; the update each context token receives is the induced
        // shift for that example.
        let residual = b.add_scaled(-1.0, &a.matvec(&x)?);
        let tokens = TokenSet::from_regression(a, &residual, Vector::zeros(a.cols()))?;
        let updated = attention_step_linear(&tokens, &weights)?;
        let mut attention_shift = Vector::zeros(a.rows());
        for j in 0..a.rows() {
            attention_shift[j] = updated.context[j].b - tokens.context[j].b;
        }

        let report = compare_transforms(
            std::slice::from_ref(&prediction_shift),
            std::slice::from_ref(&attention_shift),
        )?;
        x = x_next;
        steps.push(TrajectoryStep {
            step,
            x: x.clone(),
            loss: linear_loss(a, b, &x)?,
            b_tilde,
            delta_b_norm: l2_norm(&prediction_shift),
            log_bound: None,
            metrics: Some(report.steps[0].clone()),
        });
    }
    Ok(steps)
}

/// Softmax task: at each visited state, compare the target shift induced
/// by one GD step with the one induced by a softmax attention layer that
/// moves the input channels (a data shift read back off the tokens).
fn softmax_trajectory(
    a: &Matrix,
    b: &Vector,
    x0: &Vector,
    config: &TrajectoryConfig,
) -> Result<Vec<TrajectoryStep>> {
    let d = a.cols();
    // Values move the input channels; queries and keys select them.
    let gd_selector = construct_gd_weights(d, config.gd.eta);
    let mut value_selector = Matrix::zeros(d + 1, d + 1);
    for i in 0..d {
        value_selector[(i, i)] = config.gd.eta;
    }
    let attn = AttentionWeights {
        w_q: gd_selector.w_q.clone(),
        w_k: gd_selector.w_k,
        w_v: value_selector,
        p: Matrix::identity(d + 1),
    };

    let mut steps = Vec::with_capacity(config.gd.steps + 1);
    let mut x = x0.clone();
    let loss_at =
        |x: &Vector| -> Result<f64> { Instance::new(a.clone(), x.clone(), b.clone())?.loss() };
    steps.push(TrajectoryStep {
        step: 0,
        x: x.clone(),
        loss: loss_at(&x)?,
        b_tilde: b.clone(),
        delta_b_norm: 0.0,
        log_bound: None,
        metrics: None,
    });
    for step in 1..=config.gd.steps {
        let x_next = gd_step(a, b, &x, &config.gd)?;

        // Gradient side: exact target shift for the weight move, certified
        // when the pair sits inside the bound's region.
        let pair = ShiftPair::Weight {
            a: a.clone(),
            b: b.clone(),
            x_t: x.clone(),
            x_next: x_next.clone(),
            r: config.r,
        };
        let delta_gd = pair.delta_b_exact()?;
        let b_tilde = b.add_scaled(-1.0, &delta_gd);
        let log_bound = match pair.validate() {
            Ok(()) => {
                let ctx = BoundContext::with_floor(pair.n(), config.r);
                Some(bound_delta_b(&pair, &ctx)?)
            }
            Err(_) => None,
        };

        // Attention side: one full softmax attention update moves the
        // input channels; the shifted rows form a data matrix whose
        // softmax output at the *current* weights defines the induced
        // target shift.
        let tokens = TokenSet::from_regression(a, b, Vector::zeros(d))?;
        let updated = attention_step_softmax_full(&tokens, &attn)?;
        let mut a_shifted = Matrix::zeros(a.rows(), d);
        for i in 0..a.rows() {
            for j in 0..d {
                a_shifted[(i, j)] = updated.context[i].a[j];
            }
        }
        let f_before = softmax(&a.matvec(&x)?);
        let f_after = softmax(&a_shifted.matvec(&x)?);
        let delta_att = f_after.add_scaled(-1.0, &f_before);

        let report = compare_transforms(
            std::slice::from_ref(&delta_gd),
            std::slice::from_ref(&delta_att),
        )?;
        x = x_next;
        steps.push(TrajectoryStep {
            step,
            x: x.clone(),
            loss: loss_at(&x)?,
            b_tilde,
            delta_b_norm: l2_norm(&delta_gd),
            log_bound,
            metrics: Some(report.steps[0].clone()),
        });
    }
    Ok(steps)
}
