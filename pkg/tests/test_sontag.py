"""
Sontag feedback tests.

 Group 1 — λ and feedback at hand-worked states
   integrator with Q = 4, cubic at x = 1 and 2, double integrator with the Riccati CLF
 Group 2 — Branches
   origin, series branch near b = 0, agreement of the two root forms across the
   beta_tol band, |u| within C·δ of the b = 0 line, distorted HJB on many series-branch
   states, CLF violation
 Group 3 — Sampled identities
   λ ≡ 1 and u = -Kx for the Riccati CLF, scalar optimality on [-3, 3],
   distorted HJB residual and V̇ identity on every catalog problem
"""

import math

import numpy as np
import pytest

from oracles import DOUBLE_INTEGRATOR_K, SQRT2, cubic_lambda, cubic_optimal_gradient
from sontag_clf.clf_checks import sample_states
from sontag_clf.exceptions import ClfCheckError, ClfViolationError
from sontag_clf.hjb import check_distorted_hjb
from sontag_clf.models import SamplingConfig, Weights
from sontag_clf.sontag import DEFAULT_BETA_TOL, Branch, SontagController, plus_root, series_root


# Group 1 — λ and feedback at hand-worked states

def test_integrator_lambda_with_q4(integrator):
    ctrl = SontagController(integrator.system, integrator.clf(), Weights(Q=[[4.0]], R=[[1.0]]))
    for x in (-3.0, 0.1, 1.0, 7.5):
        assert ctrl.lambda_value([x]) == pytest.approx(2.0, rel=1e-14)
    assert ctrl.vdot([1.0]) == pytest.approx(-2.0, rel=1e-14)


def test_cubic_lambda_feedback_and_vdot(cubic):
    ctrl = SontagController(cubic.system, cubic.clf(), cubic.weights)
    ev = ctrl.feedback([1.0])
    assert ev.branch is Branch.REGULAR
    assert ev.lambda_ == pytest.approx(1.0 + SQRT2, rel=1e-14)
    assert ev.u[0] == pytest.approx(-2.414213562, abs=1e-9)
    assert ctrl.vdot([1.0]) == pytest.approx(-SQRT2, rel=1e-13)
    assert ctrl.lambda_value([2.0]) == pytest.approx(4.0 + math.sqrt(17.0), rel=1e-14)


def test_double_integrator_riccati_feedback(double_integrator):
    ctrl = SontagController(double_integrator.system, double_integrator.clf("riccati"), double_integrator.weights)
    ev = ctrl.feedback([1.0, 1.0])
    assert ev.lambda_ == pytest.approx(1.0, abs=1e-14)
    assert ev.u[0] == pytest.approx(-(1.0 + math.sqrt(3.0)), abs=1e-12)


def test_call_returns_input(cubic):
    ctrl = SontagController(cubic.system, cubic.clf(), cubic.weights)
    np.testing.assert_array_equal(ctrl([1.0]), ctrl.feedback([1.0]).u)


# Group 2 — Branches

def test_origin_gives_zero_input(cubic, double_integrator):
    for entry in (cubic, double_integrator):
        ctrl = SontagController(entry.system, entry.clf(), entry.weights)
        ev = ctrl.feedback(np.zeros(entry.system.n))
        assert ev.branch is Branch.ORIGIN
        np.testing.assert_array_equal(ev.u, np.zeros(entry.system.m))
        assert ctrl.vdot(np.zeros(entry.system.n)) == 0.0


def test_vdot_vanishes_towards_origin(cubic):
    ctrl = SontagController(cubic.system, cubic.clf(), cubic.weights)
    assert abs(ctrl.vdot([1e-6])) < 1e-11


def test_root_forms_agree_at_threshold():
    a, q = -1.0, 2.0
    for beta in (1e-8, 1e-9, 1e-10):
        assert series_root(a, beta, q) == pytest.approx(plus_root(a, beta, q), rel=1e-12)


@pytest.mark.parametrize("a", [-1e-3, -0.5, -7.0])
@pytest.mark.parametrize("q", [0.1, 1.0, 10.0])
def test_root_forms_agree_around_beta_tol(a, q):
    for ratio in np.linspace(0.5, 2.0, 31) * DEFAULT_BETA_TOL:
        beta = ratio * a * a
        regular, series = plus_root(a, beta, q), series_root(a, beta, q)
        assert abs(series - regular) <= 1e-9 * regular, (ratio, regular, series)


def test_series_branch_near_b_zero(double_integrator):
    ctrl = SontagController(double_integrator.system, double_integrator.clf("quadratic_alt"),
                            double_integrator.weights)
    x = [1.0, -1.0 + 1e-5]
    ev = ctrl.feedback(x)
    assert ev.branch is Branch.SERIES
    lam, a, beta, q = ctrl.distorted_terms(x)
    assert abs(0.5 * q - 0.5 * lam * lam * beta + lam * a) < 1e-8
    assert lam > 0.0


def _near_b_zero_controller(double_integrator):
    # quadratic_alt: b = x1 + x2 vanishes on x2 = -x1 where a = -x1^2; a step δ off it gives β/a² ≈ δ²/x1⁴
    return SontagController(double_integrator.system, double_integrator.clf("quadratic_alt"),
                            double_integrator.weights)


def test_input_continuous_as_b_vanishes(double_integrator):
    ctrl = _near_b_zero_controller(double_integrator)
    on_line = ctrl([1.0, -1.0])
    assert ctrl.feedback([1.0, -1.0]).branch is Branch.SERIES
    np.testing.assert_array_equal(on_line, [0.0])
    for delta in np.concatenate([np.logspace(-12, -1, 45), -np.logspace(-12, -1, 45)]):
        u = ctrl([1.0, -1.0 + delta])[0]
        assert abs(u - on_line[0]) <= 2.0 * abs(delta), (delta, u)
        assert abs(u) >= 0.5 * abs(delta), (delta, u)


def test_distorted_hjb_on_series_branch_states(double_integrator):
    ctrl = _near_b_zero_controller(double_integrator)
    rng = np.random.default_rng(11)
    R = double_integrator.weights.R
    for _ in range(500):
        s = rng.choice([-1.0, 1.0]) * rng.uniform(0.1, 5.0)
        delta = rng.uniform(-0.9e-4, 0.9e-4) * s * s
        x = [s, -s + delta]
        ev = ctrl.feedback(x)
        assert ev.branch is Branch.SERIES, x
        lam, a, beta, q = ctrl.distorted_terms(x)
        assert lam > 0.0
        scale = max(1.0, q)
        assert abs(0.5 * q - 0.5 * lam * lam * beta + lam * a) < 1e-8 * scale, x
        vdot = a + float(ev.b @ ev.u)
        assert abs(vdot + (q + float(ev.u @ R @ ev.u)) / (2.0 * lam)) < 1e-8 * scale, x


def test_clf_violation_raised_when_unchecked(uncontrollable, half_square, unit_weights):
    ctrl = SontagController(uncontrollable, half_square, unit_weights, verify_clf=False)
    assert not ctrl.clf_checked
    with pytest.raises(ClfViolationError):
        ctrl.feedback([1.0])


def test_construction_rejects_invalid_clf(uncontrollable, half_square, unit_weights):
    with pytest.raises(ClfCheckError):
        SontagController(uncontrollable, half_square, unit_weights)


def test_lambda_is_positive_on_samples(damped):
    ctrl = SontagController(damped.system, damped.clf("square"), damped.weights)
    for x in sample_states(1, SamplingConfig(samples=200)):
        assert ctrl.lambda_value(x) > 0.0


# Group 3 — Sampled identities

def test_riccati_clf_collapses_to_lqr(double_integrator):
    ctrl = SontagController(double_integrator.system, double_integrator.clf("riccati"),
                            double_integrator.weights, verify_clf=False)
    worst_lambda = 0.0
    for x in sample_states(2, SamplingConfig(samples=1000, seed=42)):
        ev = ctrl.feedback(x)
        worst_lambda = max(worst_lambda, abs(ev.lambda_ - 1.0))
        lqr = -DOUBLE_INTEGRATOR_K @ x
        assert np.linalg.norm(ev.u - lqr) < 1e-8 * max(1.0, np.linalg.norm(x)), x
    assert worst_lambda < 1e-8


@pytest.mark.parametrize("entry_name, optimal", [
    ("cubic1d", lambda x: -cubic_optimal_gradient(x)),
    ("integrator1d", lambda x: -x),
])
def test_scalar_optimality(entry_name, optimal):
    from sontag_clf.catalog import get_entry
    entry = get_entry(entry_name)
    ctrl = SontagController(entry.system, entry.clf("half_square"), entry.weights)
    for x in np.linspace(-3.0, 3.0, 1000):
        expected = optimal(x)
        u = ctrl([x])[0]
        assert abs(u - expected) <= 1e-9 * max(abs(expected), 1e-300), (x, u, expected)


def test_cubic_lambda_matches_closed_form(cubic):
    ctrl = SontagController(cubic.system, cubic.clf(), cubic.weights)
    for x in (-2.5, -0.3, 0.7, 3.0):
        assert ctrl.lambda_value([x]) == pytest.approx(cubic_lambda(x), rel=1e-13)


@pytest.mark.parametrize("entry_name", ["integrator1d", "cubic1d", "damped1d", "double_integrator"])
def test_distorted_hjb_and_vdot_identity(entry_name):
    from sontag_clf.catalog import get_entry
    entry = get_entry(entry_name)
    for clf in entry.clfs.values():
        ctrl = SontagController(entry.system, clf, entry.weights, verify_clf=False)
        report = check_distorted_hjb(ctrl, SamplingConfig(samples=1000, seed=42))
        assert report.passed, (clf.name, report.to_dict())
