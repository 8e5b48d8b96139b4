//! End-to-end acceptance checks, one test per criterion. Each prints a
//! single line naming the criterion and its outcome; every tolerance is
//! pinned as a constant next to the assertions it guards.

use softshift::harness::sampler::sample_gradient_instance;
use softshift::harness::{run_suite, SampleConfig, Suite};
use softshift::icl::{gd_step, run_trajectory, GDConfig, IclTask, StepSign, TrajectoryConfig};
use softshift::numkit::{l2_norm, RngStream, Vector};
use softshift::shift::certificate_log_m;
use softshift::softmax::Instance;

/// Worst acceptable relative error of the analytic gradient against
/// central differences (absolute floor 1e-9 via the 1e-3 denominator
/// floor inside the suite).
const GRADIENT_TOL: f64 = 1e-6;
/// Relative tolerance for the defining and split identities.
const IDENTITY_REL: f64 = 1e-12;
/// Absolute tolerance for the linear attention-vs-gradient agreement.
const LINEAR_EQUIV_ABS: f64 = 1e-9;
/// Slack allowed before a loss step counts as an increase.
const DESCENT_TOL: f64 = 1e-12;

fn assert_clean(report: &softshift::harness::SuiteReport) {
    assert_eq!(
        report.summary.total_violations, 0,
        "{} suite reported violations: {:?}",
        report.suite, report.summary.violations
    );
}

fn min_slack(report: &softshift::harness::SuiteReport, key: &str) -> f64 {
    *report
        .summary
        .min_slack_log
        .get(key)
        .unwrap_or_else(|| panic!("missing slack entry for {key}"))
}

#[test]
fn acceptance_01_gradient_matches_central_differences() {
    let config = SampleConfig::gradient_default();
    assert_eq!(config.trials, 1000);
    assert_eq!(config.n_range, (2, 16));
    assert_eq!(config.d_range, (1, 8));
    assert_eq!(config.r, 2.0);
    assert_eq!(config.fd_step, 1e-5);

    let report = run_suite(Suite::Gradient, &config).unwrap();
    assert_clean(&report);
    let max_rel = report.summary.max_rel_err.unwrap();
    assert!(
        max_rel <= GRADIENT_TOL,
        "worst relative gradient error {max_rel:.3e} above {GRADIENT_TOL:.0e}"
    );
    println!(
        "acceptance_01 gradient vs central differences: PASS \
         (1000 instances, max rel err {max_rel:.3e})"
    );
}

#[test]
fn acceptance_02_defining_and_split_identities() {
    let config = SampleConfig::bounds_default();
    assert_eq!(config.trials, 10_000);
    let report = run_suite(Suite::LemmasX, &config).unwrap();

    let mut worst_defining: f64 = 0.0;
    let mut worst_split: f64 = 0.0;
    for rec in &report.records {
        worst_defining = worst_defining.max(rec.defining_identity_rel.unwrap());
        worst_split = worst_split.max(rec.split_identity_rel.unwrap());
    }
    assert!(
        worst_defining <= IDENTITY_REL,
        "defining identity drifted to {worst_defining:.3e}"
    );
    assert!(
        worst_split <= IDENTITY_REL,
        "split identity drifted to {worst_split:.3e}"
    );
    println!(
        "acceptance_02 induced-target identities: PASS \
         (10000 pairs, defining {worst_defining:.3e}, split {worst_split:.3e})"
    );
}

#[test]
fn acceptance_03_softmax_floor_at_three_radii() {
    let mut slacks = Vec::new();
    for r in [4.0, 6.0, 8.0] {
        let config = SampleConfig {
            r,
            ..Suite::Beta.default_config()
        };
        assert_eq!(config.trials, 10_000);
        let report = run_suite(Suite::Beta, &config).unwrap();
        assert_clean(&report);
        let slack = min_slack(&report, "beta_t").min(min_slack(&report, "beta_next"));
        assert!(slack >= 0.0);
        slacks.push(format!("R={r}: {slack:.3}"));
    }
    println!(
        "acceptance_03 softmax floor exp(-R^2): PASS (10000 pairs each; min slack {})",
        slacks.join(", ")
    );
}

fn lemma_chain(suite: Suite, label: &str, id: &str) {
    let config = suite.default_config();
    assert_eq!(config.trials, 10_000);
    assert_eq!(config.r, 4.0);
    assert_eq!(config.n_range, (2, 32));
    assert_eq!(config.d_range, (1, 8));

    let report = run_suite(suite, &config).unwrap();
    assert_clean(&report);
    let mut slacks = Vec::new();
    for key in ["exp", "alpha", "alpha_inv", "db1", "db2", "db"] {
        let slack = min_slack(&report, key);
        assert!(slack >= 0.0, "{key} bound violated on the {label} side");
        slacks.push(format!("{key}={slack:.3}"));
    }
    println!(
        "{id} bound chain, {label} shift: PASS (10000 pairs; min slack {})",
        slacks.join(" ")
    );
}

#[test]
fn acceptance_04_bound_chain_weight_shift() {
    lemma_chain(Suite::LemmasX, "weight", "acceptance_04");
}

#[test]
fn acceptance_05_bound_chain_data_shift() {
    lemma_chain(Suite::LemmasA, "data", "acceptance_05");
}

#[test]
fn acceptance_06_end_to_end_certificates() {
    for (suite, label) in [(Suite::TheoremX, "weight"), (Suite::TheoremA, "data")] {
        let config = suite.default_config();
        assert_eq!(config.trials, 10_000);
        let report = run_suite(suite, &config).unwrap();
        assert_clean(&report);
        let slack = min_slack(&report, "certificate");
        assert!(slack >= 0.0, "certificate violated on the {label} side");
        println!(
            "acceptance_06 certificate, {label} shift: PASS (10000 pairs; min slack {slack:.3})"
        );
    }
    assert_eq!(certificate_log_m(1, 4.0).to_bits(), 160.0f64.to_bits());
    println!("acceptance_06 certificate constant: PASS (log M(1, 4) = 160 exactly)");
}

#[test]
fn acceptance_07_norm_and_exponential_facts() {
    let config = Suite::Facts.default_config();
    assert_eq!(config.trials, 10_000);
    let report = run_suite(Suite::Facts, &config).unwrap();
    assert_clean(&report);
    println!("acceptance_07 norm and exponential facts: PASS (10000 vector draws)");
}

#[test]
fn acceptance_08_linear_attention_reproduces_gradient_updates() {
    let gd = GDConfig::new(0.01, 1, StepSign::Descent, false).unwrap();
    let config = TrajectoryConfig {
        task: IclTask::Linear,
        gd,
        r: 4.0,
    };
    let mut worst_distance: f64 = 0.0;
    let mut worst_identity: f64 = 0.0;
    for task in 0..1000u64 {
        let mut stream = RngStream::new(2024, task);
        let n = stream.uniform_usize(2, 32);
        let d = stream.uniform_usize(1, 8);
        let a = stream.normal_matrix(n, d);
        let b = stream.normal_vector(n);
        let x0 = stream.normal_vector(d);

        let steps = run_trajectory(&a, &b, &x0, &config).unwrap();
        let metric = steps[1].metrics.as_ref().unwrap();
        worst_distance = worst_distance.max(metric.l2_distance);

        // Moving the target by the induced shift preserves the residual
        // norm: ||A x_1 - b|| equals ||A x_0 - b_tilde||.
        let after = l2_norm(&a.matvec(&steps[1].x).unwrap().add_scaled(-1.0, &b));
        let before = l2_norm(&a.matvec(&x0).unwrap().add_scaled(-1.0, &steps[1].b_tilde));
        worst_identity = worst_identity.max((after - before).abs() / before.max(1e-300));
    }
    assert!(
        worst_distance <= LINEAR_EQUIV_ABS,
        "attention and gradient shifts disagree by {worst_distance:.3e}"
    );
    assert!(
        worst_identity <= IDENTITY_REL,
        "linear induced-target identity drifted to {worst_identity:.3e}"
    );
    println!(
        "acceptance_08 linear attention = gradient step: PASS \
         (1000 tasks, max shift gap {worst_distance:.3e}, identity {worst_identity:.3e})"
    );
}

#[test]
fn acceptance_09_descent_decreases_and_raw_plus_does_not() {
    let sample = SampleConfig::bounds_default();
    let descent = GDConfig::new(0.05, 50, StepSign::Descent, true).unwrap();
    let plus = GDConfig::new(0.05, 50, StepSign::Plus, false).unwrap();
    let mut saw_increase = false;

    for instance in 0..100u64 {
        let mut stream = RngStream::new(404, instance);
        let (a, x0, b) = sample_gradient_instance(&sample, &mut stream).unwrap();
        let loss_at = |x: &Vector| {
            Instance::new(a.clone(), x.clone(), b.clone())
                .unwrap()
                .loss()
                .unwrap()
        };

        let mut x = x0.clone();
        let mut previous = loss_at(&x);
        for step in 0..descent.steps {
            x = gd_step(&a, &b, &x, &descent).unwrap();
            let loss = loss_at(&x);
            assert!(
                loss <= previous + DESCENT_TOL,
                "descent raised the loss at instance {instance}, step {step}: \
                 {previous:.17} -> {loss:.17}"
            );
            previous = loss;
        }

        let mut x = x0.clone();
        let mut previous = loss_at(&x);
        for _ in 0..plus.steps {
            x = gd_step(&a, &b, &x, &plus).unwrap();
            let loss = loss_at(&x);
            if loss > previous + DESCENT_TOL {
                saw_increase = true;
            }
            previous = loss;
        }
    }
    assert!(
        saw_increase,
        "the raw plus update never increased the loss on 100 instances"
    );
    println!(
        "acceptance_09 step rule signatures: PASS \
         (descent non-increasing on 100x50 steps; raw plus rule increased the loss)"
    );
}

#[test]
fn acceptance_10_reports_are_deterministic() {
    for suite in Suite::ALL {
        let mut config = suite.default_config();
        config.trials = 60;
        let first = run_suite(suite, &config).unwrap().strip_wall_time();
        let second = run_suite(suite, &config).unwrap().strip_wall_time();
        assert_eq!(
            first.to_json().unwrap(),
            second.to_json().unwrap(),
            "json reports differ for {}",
            suite.name()
        );
        let mut csv_first = Vec::new();
        let mut csv_second = Vec::new();
        first.write_csv(&mut csv_first).unwrap();
        second.write_csv(&mut csv_second).unwrap();
        assert_eq!(
            csv_first,
            csv_second,
            "csv reports differ for {}",
            suite.name()
        );
    }
    println!(
        "acceptance_10 determinism: PASS \
         (all {} suites byte-identical across reruns, wall time excluded)",
        Suite::ALL.len()
    );
}
