"""
Sontag's formula in the Freeman–Primbs form

    u(x) = -λ(x) R⁻¹ b(x),   λ = (a + √(a² + xᵀQx·bᵀR⁻¹b)) / bᵀR⁻¹b

where λ(x) > 0 is the positive root of the distorted HJB equation
½xᵀQx − ½λ²·bᵀR⁻¹b + λ·a = 0. The closed loop then minimizes
½∫(1/λ)(xᵀQx + uᵀRu)dt.
"""

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Protocol, Sequence, Tuple

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .clf_checks import check_clf, check_weights, eval_ab
from .exceptions import ClfViolationError, DimensionError
from .models import AbPair, ClfCandidate, SamplingConfig, SystemModel, Weights
from .utils import as_state, get_logger, quad_form, require_finite

DEFAULT_BETA_TOL = 1e-8
DEFAULT_ORIGIN_TOL = 1e-12


class Branch(str, Enum):
    REGULAR = "regular"
    SERIES = "series"
    ORIGIN = "origin"
    FIXED = "fixed"  # feedback laws not built from a CLF; λ reported as 1


@dataclass(frozen=True, eq=False)
class ControlEval:
    u: np.ndarray
    lambda_: float
    branch: Branch
    a: Optional[float] = None
    b: Optional[np.ndarray] = field(default=None)


class Controller(Protocol):
    """State-to-input map understood by the simulator."""

    def feedback(self, x: Sequence[float]) -> ControlEval:
        ...


def plus_root(a: float, beta: float, q: float) -> float:
    """Positive root of ½q − ½λ²β + λa = 0 for β > 0, evaluated without cancellation."""
    disc = math.sqrt(a * a + q * beta)
    if a > 0.0:
        return (a + disc) / beta
    return q / (disc - a)


def series_root(a: float, beta: float, q: float) -> float:
    """Second-order expansion of the positive root in β, valid for a < 0 and β·a⁻² small."""
    abs_a = -a
    return q / (2.0 * abs_a) - q * q * beta / (8.0 * abs_a ** 3)


class SontagController:
    """Sontag feedback bound to a system, a CLF and constant weights."""

    def __init__(self, system: SystemModel, clf: ClfCandidate, weights: Weights,
                 beta_tol: float = DEFAULT_BETA_TOL, origin_tol: float = DEFAULT_ORIGIN_TOL,
                 verify_clf: bool = True, sampling: Optional[SamplingConfig] = None):
        if clf.n != system.n:
            raise DimensionError(f"CLF dimension {clf.n} does not match system dimension {system.n}")
        if beta_tol <= 0.0 or origin_tol < 0.0:
            raise ValueError(f"Invalid tolerances beta_tol={beta_tol}, origin_tol={origin_tol}")
        check_weights(weights, system.n, system.m).raise_for_status()

        self.system = system
        self.clf = clf
        self.weights = weights
        self.beta_tol = beta_tol
        self.origin_tol = origin_tol
        self.logger = get_logger("SontagController")
        self._r_factor = cho_factor(weights.R)

        self.clf_report = None
        if verify_clf:
            self.clf_report = check_clf(system, clf, sampling).raise_for_status()
        self.clf_checked = verify_clf
        self.logger.info(
            f"Controller ready: system={system.name or '<inline>'}, V={clf.name}, "
            f"CLF {'checked' if verify_clf else 'unchecked'}"
        )

    def r_solve(self, v: np.ndarray) -> np.ndarray:
        """R⁻¹v through the cached Cholesky factor."""
        return cho_solve(self._r_factor, v)

    def ab(self, x: Sequence[float]) -> AbPair:
        return eval_ab(self.system, self.clf, x)

    def _lambda(self, x: np.ndarray) -> Tuple[float, Branch, AbPair, float, float]:
        ab = self.ab(x)
        beta = float(ab.b @ self.r_solve(ab.b))
        q = quad_form(self.weights.Q, x)
        a = ab.a
        ratio = beta / (a * a) if a != 0.0 else math.inf
        if beta > 0.0 and ratio >= self.beta_tol:
            return plus_root(a, beta, q), Branch.REGULAR, ab, q, beta
        if a < 0.0:
            return series_root(a, beta, q), Branch.SERIES, ab, q, beta
        raise ClfViolationError(x, a, beta)

    def lambda_value(self, x: Sequence[float]) -> float:
        x = as_state(x, self.system.n)
        return self._lambda(x)[0]

    def feedback(self, x: Sequence[float]) -> ControlEval:
        x = require_finite(as_state(x, self.system.n), "state")
        if np.linalg.norm(x) <= self.origin_tol:
            return ControlEval(u=np.zeros(self.system.m), lambda_=1.0, branch=Branch.ORIGIN,
                               a=0.0, b=np.zeros(self.system.m))
        lam, branch, ab, _, _ = self._lambda(x)
        u = require_finite(-lam * self.r_solve(ab.b), "control input")
        return ControlEval(u=u, lambda_=lam, branch=branch, a=ab.a, b=ab.b)

    def __call__(self, x: Sequence[float]) -> np.ndarray:
        return self.feedback(x).u

    def vdot(self, x: Sequence[float]) -> float:
        """V̇ = a + bᵀu along the closed loop; equals −(xᵀQx + uᵀRu)/(2λ)."""
        ev = self.feedback(x)
        if ev.branch is Branch.ORIGIN:
            return 0.0
        return float(ev.a + ev.b @ ev.u)

    def distorted_terms(self, x: Sequence[float]) -> Tuple[float, float, float, float]:
        """Returns (λ, a, bᵀR⁻¹b, xᵀQx) at x != 0."""
        x = as_state(x, self.system.n)
        lam, _, ab, q, beta = self._lambda(x)
        return lam, ab.a, beta, q
