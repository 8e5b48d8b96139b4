//! Python bindings for the softshift library.
//!
//! Scalars and vectors cross the boundary as plain floats and lists
//! (infinities included); structured results cross either as dicts
//! (single-pair shift reports) or as the same JSON documents the CLI
//! writes (suite reports, trajectories), so downstream tooling can treat
//! both front ends identically. All library errors surface as
//! `ValueError` with the library's message.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

use softshift::harness::{run_suite_by_name, SampleConfig, Suite};
use softshift::icl::{
    run_trajectory as run_trajectory_rs, GDConfig, IclTask, StepSign, TrajectoryConfig,
};
use softshift::numkit::{spectral_norm_default, Matrix, Vector};
use softshift::shift::{
    beta_floor as beta_floor_rs, certificate_log_m as certificate_log_m_rs, check_lemmas,
    check_theorem, BoundContext, ShiftPair, ShiftReport,
};
use softshift::softmax::{log_sum_exp, Instance};

fn value_err(e: softshift::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn matrix(rows: Vec<Vec<f64>>) -> PyResult<Matrix> {
    Matrix::from_rows(rows).map_err(value_err)
}

fn instance(a: Vec<Vec<f64>>, x: Vec<f64>, b: Vec<f64>) -> PyResult<Instance> {
    Instance::new(matrix(a)?, Vector(x), Vector(b)).map_err(value_err)
}

fn report_dict(py: Python<'_>, report: &ShiftReport) -> PyResult<Py<PyDict>> {
    let d = PyDict::new(py);
    d.set_item("delta_b", report.delta_b.as_slice().to_vec())?;
    d.set_item("delta_b1", report.delta_b1.as_slice().to_vec())?;
    d.set_item("delta_b2", report.delta_b2.as_slice().to_vec())?;
    d.set_item("shift_norm", report.shift_norm)?;
    d.set_item("log_actual", report.log_actual)?;
    d.set_item("log_actual_exp", report.log_actual_exp)?;
    d.set_item("log_bound_exp", report.log_bound_exp)?;
    d.set_item("log_actual_alpha", report.log_actual_alpha)?;
    d.set_item("log_bound_alpha", report.log_bound_alpha)?;
    d.set_item("log_actual_alpha_inv", report.log_actual_alpha_inv)?;
    d.set_item("log_bound_alpha_inv", report.log_bound_alpha_inv)?;
    d.set_item("log_actual_db1", report.log_actual_db1)?;
    d.set_item("log_bound_db1", report.log_bound_db1)?;
    d.set_item("log_bound_db1_statement", report.log_bound_db1_statement)?;
    d.set_item("log_actual_db2", report.log_actual_db2)?;
    d.set_item("log_bound_db2", report.log_bound_db2)?;
    d.set_item("log_bound_db2_statement", report.log_bound_db2_statement)?;
    d.set_item("log_bound_db", report.log_bound_db)?;
    d.set_item("log_certificate", report.log_certificate)?;
    d.set_item("log_alpha_t", report.log_alpha_t)?;
    d.set_item("log_alpha_next", report.log_alpha_next)?;
    d.set_item("split_identity_rel", report.split_identity_rel)?;
    d.set_item("defining_identity_rel", report.defining_identity_rel)?;
    d.set_item("slack_log", report.slack_log)?;
    let satisfied = PyDict::new(py);
    for (key, ok) in &report.satisfied {
        satisfied.set_item(key, *ok)?;
    }
    d.set_item("satisfied", satisfied)?;
    Ok(d.into())
}

fn checked_report(
    py: Python<'_>,
    pair: ShiftPair,
    empirical_beta: bool,
    theorem: bool,
) -> PyResult<Py<PyDict>> {
    let ctx = if empirical_beta {
        BoundContext::with_empirical_beta(&pair).map_err(value_err)?
    } else {
        BoundContext::with_floor(pair.n(), pair.radius())
    };
    let report = if theorem {
        check_theorem(&pair, &ctx)
    } else {
        check_lemmas(&pair, &ctx)
    }
    .map_err(value_err)?;
    report_dict(py, &report)
}

/// Softmax prediction `f(x)` for the instance `(a, x)`.
#[pyfunction]
fn predict(a: Vec<Vec<f64>>, x: Vec<f64>, b: Vec<f64>) -> PyResult<Vec<f64>> {
    let inst = instance(a, x, b)?;
    Ok(inst.predict().map_err(value_err)?.as_slice().to_vec())
}

/// Loss `0.5 * ||f(x) - b||^2`.
#[pyfunction]
fn loss(a: Vec<Vec<f64>>, x: Vec<f64>, b: Vec<f64>) -> PyResult<f64> {
    instance(a, x, b)?.loss().map_err(value_err)
}

/// Closed-form loss gradient with respect to `x`.
#[pyfunction]
fn gradient(a: Vec<Vec<f64>>, x: Vec<f64>, b: Vec<f64>) -> PyResult<Vec<f64>> {
    let inst = instance(a, x, b)?;
    Ok(inst.gradient().map_err(value_err)?.as_slice().to_vec())
}

/// `ln <exp(Ax), 1>`, the log normalizer.
#[pyfunction]
fn log_alpha(a: Vec<Vec<f64>>, x: Vec<f64>) -> PyResult<f64> {
    let logits = matrix(a)?.matvec(&Vector(x)).map_err(value_err)?;
    Ok(log_sum_exp(&logits))
}

/// Largest singular value of the matrix.
#[pyfunction]
fn spectral_norm(a: Vec<Vec<f64>>) -> PyResult<f64> {
    spectral_norm_default(&matrix(a)?).map_err(value_err)
}

/// Exact induced target shift for a weight move `x_t -> x_next` inside
/// the radius-`r` region.
#[pyfunction]
fn weight_delta_b(
    a: Vec<Vec<f64>>,
    b: Vec<f64>,
    x_t: Vec<f64>,
    x_next: Vec<f64>,
    r: f64,
) -> PyResult<Vec<f64>> {
    let pair = ShiftPair::Weight {
        a: matrix(a)?,
        b: Vector(b),
        x_t: Vector(x_t),
        x_next: Vector(x_next),
        r,
    };
    Ok(pair.delta_b_exact().map_err(value_err)?.as_slice().to_vec())
}

/// Exact induced target shift for a data move `a_t -> a_next` inside the
/// radius-`r` region.
#[pyfunction]
fn data_delta_b(
    a_t: Vec<Vec<f64>>,
    a_next: Vec<Vec<f64>>,
    b: Vec<f64>,
    x: Vec<f64>,
    r: f64,
) -> PyResult<Vec<f64>> {
    let pair = ShiftPair::Data {
        a_t: matrix(a_t)?,
        a_next: matrix(a_next)?,
        b: Vector(b),
        x: Vector(x),
        r,
    };
    Ok(pair.delta_b_exact().map_err(value_err)?.as_slice().to_vec())
}

/// Full measured-vs-bounded report for a weight move, as a dict. With
/// `theorem=True` the end-to-end certificate is included (requires
/// `r >= 4`); `empirical_beta=True` tightens the bounds using the
/// smallest observed softmax entry instead of the worst-case floor.
#[pyfunction]
#[pyo3(signature = (a, b, x_t, x_next, r, empirical_beta = false, theorem = false))]
#[allow(clippy::too_many_arguments)]
fn weight_shift_report(
    py: Python<'_>,
    a: Vec<Vec<f64>>,
    b: Vec<f64>,
    x_t: Vec<f64>,
    x_next: Vec<f64>,
    r: f64,
    empirical_beta: bool,
    theorem: bool,
) -> PyResult<Py<PyDict>> {
    let pair = ShiftPair::Weight {
        a: matrix(a)?,
        b: Vector(b),
        x_t: Vector(x_t),
        x_next: Vector(x_next),
        r,
    };
    checked_report(py, pair, empirical_beta, theorem)
}

/// Full measured-vs-bounded report for a data move, as a dict; options
/// as in `weight_shift_report`.
#[pyfunction]
#[pyo3(signature = (a_t, a_next, b, x, r, empirical_beta = false, theorem = false))]
#[allow(clippy::too_many_arguments)]
fn data_shift_report(
    py: Python<'_>,
    a_t: Vec<Vec<f64>>,
    a_next: Vec<Vec<f64>>,
    b: Vec<f64>,
    x: Vec<f64>,
    r: f64,
    empirical_beta: bool,
    theorem: bool,
) -> PyResult<Py<PyDict>> {
    let pair = ShiftPair::Data {
        a_t: matrix(a_t)?,
        a_next: matrix(a_next)?,
        b: Vector(b),
        x: Vector(x),
        r,
    };
    checked_report(py, pair, empirical_beta, theorem)
}

/// `ln M = 10 R^2 + 1.5 ln n`, the certificate constant in log space.
#[pyfunction]
fn certificate_log_m(n: usize, r: f64) -> f64 {
    certificate_log_m_rs(n, r)
}

/// Log of the analytic normalizer floor, `ln beta = -R^2`.
#[pyfunction]
fn beta_floor(r: f64) -> f64 {
    beta_floor_rs(r)
}

/// One gradient step on the linear task: returns `(x_next, b_tilde)`
/// where `b_tilde` is the target that makes the old weights optimal for
/// the step just taken.
#[pyfunction]
fn linear_gd_induced_target(
    a: Vec<Vec<f64>>,
    b: Vec<f64>,
    x: Vec<f64>,
    eta: f64,
) -> PyResult<(Vec<f64>, Vec<f64>)> {
    let (x_next, b_tilde) =
        softshift::icl::linear_gd_induced_target(&matrix(a)?, &Vector(b), &Vector(x), eta)
            .map_err(value_err)?;
    Ok((x_next.as_slice().to_vec(), b_tilde.as_slice().to_vec()))
}

/// Default sampling configuration of a suite, as a JSON object suitable
/// for editing and passing back to `run_suite`.
#[pyfunction]
fn suite_default_config(suite: &str) -> PyResult<String> {
    let suite = Suite::from_name(suite)
        .ok_or_else(|| PyValueError::new_err(format!("unknown suite: {suite}")))?;
    serde_json::to_string_pretty(&suite.default_config())
        .map_err(|e| PyValueError::new_err(e.to_string()))
}

/// Runs a verification suite and returns its report as the same JSON
/// document the CLI writes. `config_json`, when given, must be a full
/// configuration object as produced by `suite_default_config`.
#[pyfunction]
#[pyo3(signature = (suite, config_json = None))]
fn run_suite(suite: &str, config_json: Option<&str>) -> PyResult<String> {
    let config: SampleConfig = match config_json {
        Some(text) => {
            serde_json::from_str(text).map_err(|e| PyValueError::new_err(e.to_string()))?
        }
        None => Suite::from_name(suite)
            .ok_or_else(|| PyValueError::new_err(format!("unknown suite: {suite}")))?
            .default_config(),
    };
    let report = run_suite_by_name(suite, &config).map_err(value_err)?;
    report.to_json().map_err(value_err)
}

/// Runs a gradient-descent trajectory with the matching attention-layer
/// comparison and returns the per-step records as a JSON array, the same
/// document the CLI's `icl` subcommand writes.
#[pyfunction]
#[pyo3(signature = (a, b, x0, task = "softmax", eta = 1e-3, steps = 50, sign = "descent", r = 4.0))]
#[allow(clippy::too_many_arguments)]
fn run_trajectory(
    a: Vec<Vec<f64>>,
    b: Vec<f64>,
    x0: Vec<f64>,
    task: &str,
    eta: f64,
    steps: usize,
    sign: &str,
    r: f64,
) -> PyResult<String> {
    let task = match task {
        "linear" => IclTask::Linear,
        "softmax" => IclTask::Softmax,
        other => return Err(PyValueError::new_err(format!("unknown task: {other}"))),
    };
    let sign = match sign {
        "descent" => StepSign::Descent,
        "plus" => StepSign::Plus,
        other => return Err(PyValueError::new_err(format!("unknown sign: {other}"))),
    };
    let gd = GDConfig::new(eta, steps, sign, sign == StepSign::Descent).map_err(value_err)?;
    let config = TrajectoryConfig { task, gd, r };
    let trajectory =
        run_trajectory_rs(&matrix(a)?, &Vector(b), &Vector(x0), &config).map_err(value_err)?;
    serde_json::to_string_pretty(&trajectory).map_err(|e| PyValueError::new_err(e.to_string()))
}

#[pymodule]
fn softshift_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(predict, m)?)?;
    m.add_function(wrap_pyfunction!(loss, m)?)?;
    m.add_function(wrap_pyfunction!(gradient, m)?)?;
    m.add_function(wrap_pyfunction!(log_alpha, m)?)?;
    m.add_function(wrap_pyfunction!(spectral_norm, m)?)?;
    m.add_function(wrap_pyfunction!(weight_delta_b, m)?)?;
    m.add_function(wrap_pyfunction!(data_delta_b, m)?)?;
    m.add_function(wrap_pyfunction!(weight_shift_report, m)?)?;
    m.add_function(wrap_pyfunction!(data_shift_report, m)?)?;
    m.add_function(wrap_pyfunction!(certificate_log_m, m)?)?;
    m.add_function(wrap_pyfunction!(beta_floor, m)?)?;
    m.add_function(wrap_pyfunction!(linear_gd_induced_target, m)?)?;
    m.add_function(wrap_pyfunction!(suite_default_config, m)?)?;
    m.add_function(wrap_pyfunction!(run_suite, m)?)?;
    m.add_function(wrap_pyfunction!(run_trajectory, m)?)?;
    Ok(())
}
