#!/usr/bin/env python3
"""Smoke test for the softshift_py extension module.

Loads the compiled extension straight from the cargo target directory
(no install step required) and exercises every exported function against
independent pure-Python checks. Run from the repository root after
`cargo build -p softshift-py`:

    python3 python/smoke_test.py
"""

import importlib.machinery
import importlib.util
import json
import math
import pathlib
import sys

ROOT = pathlib.Path(__file__).resolve().parent.parent


def load_module():
    candidates = [
        ROOT / "target" / "release" / "libsoftshift_py.so",
        ROOT / "target" / "debug" / "libsoftshift_py.so",
    ]
    for path in candidates:
        if path.exists():
            loader = importlib.machinery.ExtensionFileLoader("softshift_py", str(path))
            spec = importlib.util.spec_from_loader("softshift_py", loader)
            module = importlib.util.module_from_spec(spec)
            loader.exec_module(module)
            return module
    sys.exit(
        "softshift_py extension not found; run `cargo build -p softshift-py` first"
    )


ss = load_module()

CHECKS = []


def check(name):
    def wrap(fn):
        CHECKS.append((name, fn))
        return fn

    return wrap


A = [[0.3, -0.5, 0.2], [-0.1, 0.4, 0.6], [0.7, 0.1, -0.3], [0.2, -0.2, 0.1]]
B = [0.2, 0.3, 0.4, 0.1]
X = [0.5, -0.8, 0.3]


def py_predict(a, x):
    logits = [sum(row[j] * x[j] for j in range(len(x))) for row in a]
    top = max(logits)
    exps = [math.exp(v - top) for v in logits]
    total = sum(exps)
    return [v / total for v in exps]


def py_loss(a, x, b):
    f = py_predict(a, x)
    return 0.5 * sum((fi - bi) ** 2 for fi, bi in zip(f, b))


@check("predict matches a hand-rolled softmax and sums to one")
def _():
    f = ss.predict(A, X, B)
    expected = py_predict(A, X)
    assert all(v > 0.0 for v in f)
    assert abs(sum(f) - 1.0) < 1e-12
    assert max(abs(u - v) for u, v in zip(f, expected)) < 1e-14


@check("loss matches 0.5 * squared residual")
def _():
    assert abs(ss.loss(A, X, B) - py_loss(A, X, B)) < 1e-14


@check("gradient matches central finite differences")
def _():
    g = ss.gradient(A, X, B)
    h = 1e-5
    for j in range(len(X)):
        xp = list(X)
        xm = list(X)
        xp[j] += h
        xm[j] -= h
        fd = (py_loss(A, xp, B) - py_loss(A, xm, B)) / (2.0 * h)
        assert abs(g[j] - fd) <= 1e-9 + 1e-7 * abs(fd), (j, g[j], fd)


@check("log_alpha matches log-sum-exp of the logits")
def _():
    logits = [sum(row[j] * X[j] for j in range(len(X))) for row in A]
    expected = math.log(sum(math.exp(v) for v in logits))
    assert abs(ss.log_alpha(A, X) - expected) < 1e-12


@check("spectral_norm of a diagonal matrix is its largest entry")
def _():
    assert abs(ss.spectral_norm([[3.0, 0.0], [0.0, 1.0]]) - 3.0) < 1e-9


@check("weight_delta_b satisfies f(x_next) = f(x_t) + delta_b")
def _():
    x_next = [x + d for x, d in zip(X, [0.004, -0.003, 0.002])]
    delta = ss.weight_delta_b(A, B, X, x_next, 4.0)
    f_t = ss.predict(A, X, B)
    f_next = ss.predict(A, x_next, B)
    err = max(abs(fn - (ft + d)) for fn, ft, d in zip(f_next, f_t, delta))
    assert err < 1e-15, err


@check("data_delta_b satisfies the same identity for a matrix move")
def _():
    a_next = [[v + 0.002 * (-1) ** (i + j) for j, v in enumerate(row)] for i, row in enumerate(A)]
    delta = ss.data_delta_b(A, a_next, B, X, 4.0)
    f_t = ss.predict(A, X, B)
    f_next = ss.predict(a_next, X, B)
    err = max(abs(fn - (ft + d)) for fn, ft, d in zip(f_next, f_t, delta))
    assert err < 1e-15, err


@check("weight_shift_report: every lemma holds with positive slack")
def _():
    x_next = [x + d for x, d in zip(X, [0.004, -0.003, 0.002])]
    report = ss.weight_shift_report(A, B, X, x_next, 4.0)
    assert report["satisfied"], "no bounds were checked"
    assert all(report["satisfied"].values()), report["satisfied"]
    assert report["slack_log"] > 0.0
    assert report["defining_identity_rel"] < 1e-12
    assert report["log_certificate"] is None


@check("theorem mode adds the certificate row and it dominates")
def _():
    x_next = [x + d for x, d in zip(X, [0.004, -0.003, 0.002])]
    report = ss.data_shift_report(
        A,
        [[v + 0.001 for v in row] for row in A],
        B,
        X,
        4.0,
        theorem=True,
    )
    assert report["satisfied"]["certificate"]
    assert report["log_certificate"] is not None
    assert report["log_certificate"] > report["log_actual"]


@check("certificate_log_m(1, 4) is exactly 160")
def _():
    assert ss.certificate_log_m(1, 4.0) == 160.0
    assert ss.beta_floor(4.0) == -16.0


@check("linear_gd_induced_target: old weights are optimal for the shifted target")
def _():
    a = [[1.0, 2.0], [3.0, -1.0], [0.5, 0.5]]
    b = [1.0, -2.0, 0.5]
    x = [0.2, -0.3]
    x_next, b_tilde = ss.linear_gd_induced_target(a, b, x, 0.01)
    ax_next = [sum(r[j] * x_next[j] for j in range(2)) for r in a]
    ax = [sum(r[j] * x[j] for j in range(2)) for r in a]
    # A x_next - b == A x - b_tilde, i.e. stepping the weights and shifting
    # the target produce identical residuals.
    err = max(abs((u - bi) - (v - bt)) for u, bi, v, bt in zip(ax_next, b, ax, b_tilde))
    assert err < 1e-12, err


@check("linear trajectory keeps both views within 1e-9 of each other")
def _():
    a = [[1.0, 2.0], [3.0, -1.0], [0.5, 0.5]]
    b = [1.0, -2.0, 0.5]
    steps = json.loads(
        ss.run_trajectory(a, b, [0.2, -0.3], task="linear", eta=0.01, steps=5)
    )
    # Record 0 is the initial state; the 5 gradient steps follow it.
    assert len(steps) == 6
    assert steps[0]["metrics"] is None
    for step in steps[1:]:
        assert step["metrics"]["l2_distance"] <= 1e-9, step


@check("softmax trajectory stays within its per-step bound")
def _():
    steps = json.loads(
        ss.run_trajectory(A, B, X, task="softmax", eta=0.05, steps=10, r=4.0)
    )
    assert len(steps) == 11
    for step in steps[1:]:
        norm = step["delta_b_norm"]
        if isinstance(norm, float) and norm > 0.0 and step["log_bound"] is not None:
            assert math.log(norm) <= step["log_bound"], step


@check("run_suite round-trips the default config and reports no violations")
def _():
    config = json.loads(ss.suite_default_config("lemmas_x"))
    config["trials"] = 200
    report = json.loads(ss.run_suite("lemmas_x", json.dumps(config)))
    assert report["suite"] == "lemmas_x"
    assert report["summary"]["total_violations"] == 0
    assert len(report["records"]) == 200


@check("bad input raises ValueError instead of panicking")
def _():
    for fn in (
        lambda: ss.predict([[1.0, 2.0], [3.0]], [1.0, 2.0], [0.5, 0.5]),
        lambda: ss.run_suite("no_such_suite"),
        lambda: ss.run_trajectory(A, B, X, task="sideways"),
    ):
        try:
            fn()
        except ValueError:
            continue
        raise AssertionError("expected ValueError")


def main():
    failures = 0
    for name, fn in CHECKS:
        try:
            fn()
        except Exception as exc:  # noqa: BLE001 - report and keep going
            failures += 1
            print(f"FAIL {name}: {exc!r}")
        else:
            print(f"ok   {name}")
    if failures:
        sys.exit(f"{failures} of {len(CHECKS)} checks failed")
    print(f"all {len(CHECKS)} checks passed")


if __name__ == "__main__":
    main()
