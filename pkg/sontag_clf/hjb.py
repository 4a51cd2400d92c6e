"""
Hamilton–Jacobi–Bellman residuals for the classical quadratic cost and for
the λ-distorted cost minimized by Sontag's formula, the λ ≡ 1 identity for
CLFs that solve the classical HJB, the optimal feedback u = −R⁻¹GᵀJ*ₓ and the
pointwise solution of the scalar (n = 1) HJB.
"""

import math
from dataclasses import dataclass
from typing import Callable, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .clf_checks import check_weights, eval_ab, sample_states
from .exceptions import ClfViolationError, DimensionError, NonFiniteError
from .exprcore import Expression
from .models import ClfCandidate, SamplingConfig, SystemModel, Weights
from .sontag import Branch, ControlEval, SontagController
from .utils import as_state, get_logger, quad_form

logger = get_logger("Hjb")

GradientProvider = Union[ClfCandidate, Callable[[np.ndarray], np.ndarray]]


@dataclass
class HjbReport:
    samples: int
    max_abs_residual: float
    max_lambda_deviation: float
    excluded_b_zero: int = 0
    clf_failures: int = 0
    residual_tol: float = 1e-8
    lambda_tol: float = 1e-8

    @property
    def passed(self) -> bool:
        return (self.max_abs_residual < self.residual_tol
                and self.max_lambda_deviation < self.lambda_tol
                and self.clf_failures == 0)

    @property
    def verdict(self) -> str:
        return "pass" if self.passed else "fail"

    def to_dict(self) -> dict:
        return {
            "verdict": self.verdict,
            "samples": self.samples,
            "max_abs_residual": self.max_abs_residual,
            "max_lambda_deviation": self.max_lambda_deviation,
            "excluded_b_zero": self.excluded_b_zero,
            "clf_failures": self.clf_failures,
            "residual_tol": self.residual_tol,
            "lambda_tol": self.lambda_tol,
        }


def _value_gradient(value_gradient: GradientProvider, x: np.ndarray) -> np.ndarray:
    if isinstance(value_gradient, ClfCandidate):
        return value_gradient.gradient(x)
    return np.asarray(value_gradient(x), dtype=float)


def hjb_residual_classical(system: SystemModel, candidate: ClfCandidate, weights: Weights,
                           x: Sequence[float]) -> float:
    """½xᵀQx − ½J*ₓᵀGR⁻¹GᵀJ*ₓ + J*ₓᵀf with J*ₓ replaced by ∇candidate(x)."""
    x = as_state(x, system.n)
    ab = eval_ab(system, candidate, x)
    beta = float(ab.b @ cho_solve(cho_factor(weights.R), ab.b))
    residual = 0.5 * quad_form(weights.Q, x) - 0.5 * beta + ab.a
    if not math.isfinite(residual):
        raise NonFiniteError(f"Classical HJB residual not finite at {x.tolist()}")
    return residual


def hjb_residual_distorted(ctrl: SontagController, x: Sequence[float]) -> float:
    """½xᵀQx − ½λ²·bᵀR⁻¹b + λ·a with λ from the controller; zero up to rounding."""
    lam, a, beta, q = ctrl.distorted_terms(x)
    return 0.5 * q - 0.5 * lam * lam * beta + lam * a


def verify_lambda_identity(system: SystemModel, clf: ClfCandidate, weights: Weights,
                           sampling: Optional[SamplingConfig] = None,
                           residual_tol: float = 1e-8, lambda_tol: float = 1e-8) -> HjbReport:
    """Checks whether a CLF that solves the classical HJB yields λ ≡ 1 at sampled states.

    States with ‖b‖ <= eps_b are left out of the λ statistic and counted.
    """
    sampling = sampling or SamplingConfig()
    ctrl = SontagController(system, clf, weights, verify_clf=False)
    max_residual = 0.0
    max_deviation = 0.0
    excluded = 0
    failures = 0
    states = sample_states(system.n, sampling)
    for x in states:
        try:
            max_residual = max(max_residual, abs(hjb_residual_classical(system, clf, weights, x)))
            if ctrl.ab(x).b_norm <= sampling.eps_b:
                excluded += 1
                continue
            max_deviation = max(max_deviation, abs(ctrl.lambda_value(x) - 1.0))
        except (ClfViolationError, NonFiniteError):
            failures += 1

    report = HjbReport(
        samples=len(states),
        max_abs_residual=max_residual,
        max_lambda_deviation=max_deviation,
        excluded_b_zero=excluded,
        clf_failures=failures,
        residual_tol=residual_tol,
        lambda_tol=lambda_tol,
    )
    logger.info(
        f"λ identity for {clf.name} on {system.name or '<inline>'}: {report.verdict} "
        f"(max |HJB| = {max_residual:.3e}, max |λ-1| = {max_deviation:.3e})"
    )
    return report


def scalar_optimal_gradient(f: Expression, g: Expression, q: float, r: float, x: float) -> float:
    """J*ₓ(x) of the scalar HJB ½qx² − ½(g²/r)J*ₓ² + fJ*ₓ = 0, root with J*ₓ·x > 0."""
    if f.n != 1 or g.n != 1:
        raise DimensionError("scalar_optimal_gradient needs expressions over x1 only")
    if q <= 0.0 or r <= 0.0:
        raise ValueError(f"q and r must be positive, got q={q}, r={r}")
    if x == 0.0:
        return 0.0
    fx = f.evaluate([x])
    gx = g.evaluate([x])
    if gx == 0.0:
        raise NonFiniteError(f"g({x}) = 0: the scalar HJB cannot be solved for the feedback")
    sign = 1.0 if x > 0.0 else -1.0
    root = math.sqrt(fx * fx + (gx * gx / r) * q * x * x)
    if fx * sign >= 0.0:
        return (r / (gx * gx)) * (fx + sign * root)
    # rationalized form of the same root, free of cancellation
    return -q * x * x / (fx - sign * root)


def scalar_value_gradient(system: SystemModel, weights: Weights) -> Callable[[np.ndarray], np.ndarray]:
    """Gradient provider backed by scalar_optimal_gradient for an n = m = 1 system."""
    if system.n != 1 or system.m != 1:
        raise DimensionError("scalar_value_gradient needs a system with n = m = 1")
    f, g = system.f[0], system.G[0][0]
    q, r = float(weights.Q[0, 0]), float(weights.R[0, 0])

    def provider(x: np.ndarray) -> np.ndarray:
        return np.array([scalar_optimal_gradient(f, g, q, r, float(np.asarray(x).reshape(-1)[0]))])

    return provider


def optimal_feedback(system: SystemModel, value_gradient: GradientProvider, weights: Weights,
                     x: Sequence[float]) -> np.ndarray:
    """u = −R⁻¹G(x)ᵀ∇J*(x)."""
    x = as_state(x, system.n)
    grad = _value_gradient(value_gradient, x)
    if grad.shape != (system.n,):
        raise DimensionError(f"Value gradient must have length {system.n}, got {grad.shape}")
    u = -cho_solve(cho_factor(weights.R), system.input_matrix(x).T @ grad)
    if not np.all(np.isfinite(u)):
        raise NonFiniteError(f"Optimal feedback not finite at {x.tolist()}")
    return u


class OptimalFeedback:
    """Controller wrapper around optimal_feedback; reports λ = 1."""

    def __init__(self, system: SystemModel, value_gradient: GradientProvider, weights: Weights,
                 clf: Optional[ClfCandidate] = None):
        check_weights(weights, system.n, system.m).raise_for_status()
        self.system = system
        self.value_gradient = value_gradient
        self.weights = weights
        self.clf = clf if clf is not None else (value_gradient if isinstance(value_gradient, ClfCandidate) else None)

    def feedback(self, x: Sequence[float]) -> ControlEval:
        u = optimal_feedback(self.system, self.value_gradient, self.weights, x)
        return ControlEval(u=u, lambda_=1.0, branch=Branch.FIXED)

    def __call__(self, x: Sequence[float]) -> np.ndarray:
        return self.feedback(x).u


@dataclass
class LambdaSpread:
    """Statistics of λ over sampled states; flatness = max/min (1.0 means constant λ)."""
    samples: int
    minimum: float
    maximum: float
    mean: float
    std: float
    failures: int = 0

    @property
    def flatness(self) -> float:
        return self.maximum / self.minimum if self.minimum > 0.0 else math.inf

    def is_constant(self, tol: float = 1e-9) -> bool:
        return self.flatness - 1.0 < tol

    def to_dict(self) -> dict:
        return {
            "samples": self.samples,
            "min": self.minimum,
            "max": self.maximum,
            "mean": self.mean,
            "std": self.std,
            "flatness": self.flatness,
            "failures": self.failures,
        }


def lambda_spread(ctrl: SontagController, sampling: Optional[SamplingConfig] = None) -> LambdaSpread:
    sampling = sampling or SamplingConfig()
    values: List[float] = []
    failures = 0
    for x in sample_states(ctrl.system.n, sampling):
        try:
            values.append(ctrl.lambda_value(x))
        except (ClfViolationError, NonFiniteError):
            failures += 1
    if not values:
        return LambdaSpread(0, math.nan, math.nan, math.nan, math.nan, failures)
    arr = np.array(values)
    return LambdaSpread(
        samples=len(arr),
        minimum=float(arr.min()),
        maximum=float(arr.max()),
        mean=float(arr.mean()),
        std=float(arr.std()),
        failures=failures,
    )


def rank_clfs(system: SystemModel, clfs: Mapping[str, ClfCandidate], weights: Weights,
              sampling: Optional[SamplingConfig] = None) -> List[Tuple[str, LambdaSpread]]:
    """Orders CLFs by how close λ stays to a constant on the sampled region."""
    ranking = []
    for name, clf in clfs.items():
        ctrl = SontagController(system, clf, weights, verify_clf=False)
        ranking.append((name, lambda_spread(ctrl, sampling)))
    ranking.sort(key=lambda item: (item[1].failures > 0, item[1].flatness))
    return ranking


@dataclass
class DistortedHjbReport:
    """Distorted-HJB residual and V̇ identity at sampled states, both relative to max(1, xᵀQx)."""
    samples: int
    max_rel_residual: float
    max_rel_vdot_error: float
    failed_points: int = 0
    series_points: int = 0
    clf_failures: int = 0
    tol: float = 1e-9
    series_tol: float = 1e-8

    @property
    def passed(self) -> bool:
        return self.failed_points == 0 and self.clf_failures == 0

    def to_dict(self) -> dict:
        return {
            "passed": self.passed,
            "samples": self.samples,
            "max_rel_residual": self.max_rel_residual,
            "max_rel_vdot_error": self.max_rel_vdot_error,
            "failed_points": self.failed_points,
            "series_points": self.series_points,
            "clf_failures": self.clf_failures,
            "tol": self.tol,
            "series_tol": self.series_tol,
        }


def check_distorted_hjb(ctrl: SontagController, sampling: Optional[SamplingConfig] = None,
                        tol: float = 1e-9, series_tol: float = 1e-8) -> DistortedHjbReport:
    sampling = sampling or SamplingConfig()
    report = DistortedHjbReport(samples=0, max_rel_residual=0.0, max_rel_vdot_error=0.0,
                                tol=tol, series_tol=series_tol)
    R = ctrl.weights.R
    for x in sample_states(ctrl.system.n, sampling):
        report.samples += 1
        try:
            ev = ctrl.feedback(x)
            lam, a, beta, q = ctrl.distorted_terms(x)
        except (ClfViolationError, NonFiniteError):
            report.clf_failures += 1
            continue
        scale = max(1.0, q)
        residual = abs(0.5 * q - 0.5 * lam * lam * beta + lam * a) / scale
        vdot = a + float(ev.b @ ev.u)
        vdot_error = abs(vdot + (q + quad_form(R, ev.u)) / (2.0 * lam)) / scale
        report.max_rel_residual = max(report.max_rel_residual, residual)
        report.max_rel_vdot_error = max(report.max_rel_vdot_error, vdot_error)
        bound = tol
        if ev.branch is Branch.SERIES:
            report.series_points += 1
            bound = series_tol
        if residual > bound or vdot_error > bound:
            report.failed_points += 1

    log = logger.info if report.passed else logger.warning
    log(f"Distorted HJB on {ctrl.system.name or '<inline>'} with {ctrl.clf.name}: "
        f"max residual {report.max_rel_residual:.3e}, max V̇ error {report.max_rel_vdot_error:.3e}")
    return report
