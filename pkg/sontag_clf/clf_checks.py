"""
Sampled checks of the CLF definition and of the weight matrices, plus the
a(x), b(x) decomposition every other module builds on.

A sampler cannot prove a property over all x != 0, so reports state
"no violation found" for a given seed, sample count and radius range.
"""

from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np

from .exceptions import ClfCheckError, DimensionError, NonFiniteError, WeightsError
from .models import AbPair, ClfCandidate, SamplingConfig, SystemModel, Weights
from .utils import as_state, get_logger

logger = get_logger("ClfChecks")

SYMMETRY_ATOL = 1e-12
RADIAL_POINTS = 16


def sample_states(n: int, sampling: SamplingConfig) -> np.ndarray:
    """Returns (samples, n) states with uniform directions and radii uniform in [r_min, r_max]."""
    rng = np.random.default_rng(sampling.seed)
    directions = rng.standard_normal((sampling.samples, n))
    norms = np.linalg.norm(directions, axis=1, keepdims=True)
    norms[norms == 0.0] = 1.0
    radii = rng.uniform(sampling.r_min, sampling.r_max, size=(sampling.samples, 1))
    return directions / norms * radii


def eval_ab(system: SystemModel, clf: ClfCandidate, x: Sequence[float]) -> AbPair:
    if clf.n != system.n:
        raise DimensionError(f"CLF dimension {clf.n} does not match system dimension {system.n}")
    x = as_state(x, system.n)
    grad = clf.gradient(x)
    a = float(grad @ system.drift(x))
    b = system.input_matrix(x).T @ grad
    if not (np.isfinite(a) and np.all(np.isfinite(b))):
        raise NonFiniteError(f"a(x), b(x) not finite at {x.tolist()}")
    return AbPair(a=a, b=b)


@dataclass
class ClfReport:
    samples: int
    seed: int
    eps_b: float
    radius_range: tuple
    positivity_violations: List[List[float]] = field(default_factory=list)
    clf_violations: List[List[float]] = field(default_factory=list)
    nonfinite_points: List[List[float]] = field(default_factory=list)
    radial_violations: List[str] = field(default_factory=list)
    radial_note: str = "radial unboundedness checked heuristically along the 2n axis rays only"

    @property
    def violation_count(self) -> int:
        return (len(self.positivity_violations) + len(self.clf_violations)
                + len(self.nonfinite_points) + len(self.radial_violations))

    @property
    def passed(self) -> bool:
        return self.violation_count == 0

    def describe(self) -> str:
        if self.passed:
            return f"no violation found in {self.samples} samples (seed {self.seed})"
        return (
            f"{len(self.positivity_violations)} positivity, {len(self.clf_violations)} CLF-condition, "
            f"{len(self.nonfinite_points)} non-finite and {len(self.radial_violations)} radial violations "
            f"in {self.samples} samples (seed {self.seed})"
        )

    def raise_for_status(self) -> "ClfReport":
        if not self.passed:
            raise ClfCheckError(self)
        return self

    def to_dict(self, max_points: int = 10) -> dict:
        return {
            "passed": self.passed,
            "samples": self.samples,
            "seed": self.seed,
            "eps_b": self.eps_b,
            "radius_range": list(self.radius_range),
            "positivity_violations": len(self.positivity_violations),
            "clf_violations": len(self.clf_violations),
            "nonfinite_points": len(self.nonfinite_points),
            "radial_violations": list(self.radial_violations),
            "example_points": (self.positivity_violations + self.clf_violations + self.nonfinite_points)[:max_points],
            "note": self.radial_note,
        }


def _radial_violations(clf: ClfCandidate, sampling: SamplingConfig) -> List[str]:
    radii = np.geomspace(sampling.r_min, sampling.r_max, RADIAL_POINTS)
    failed = []
    for axis in range(clf.n):
        for sign in (1.0, -1.0):
            ray = np.zeros(clf.n)
            ray[axis] = sign
            label = f"{'+' if sign > 0 else '-'}x{axis + 1}"
            try:
                values = np.array([clf.value(r * ray) for r in radii])
            except NonFiniteError:
                failed.append(label)
                continue
            if not np.all(np.diff(values) > 0.0):
                failed.append(label)
    return failed


def check_clf(system: SystemModel, clf: ClfCandidate, sampling: Optional[SamplingConfig] = None) -> ClfReport:
    sampling = sampling or SamplingConfig()
    report = ClfReport(
        samples=sampling.samples,
        seed=sampling.seed,
        eps_b=sampling.eps_b,
        radius_range=(sampling.r_min, sampling.r_max),
    )
    for x in sample_states(system.n, sampling):
        point = x.tolist()
        try:
            if clf.value(x) <= 0.0:
                report.positivity_violations.append(point)
            ab = eval_ab(system, clf, x)
        except NonFiniteError:
            report.nonfinite_points.append(point)
            continue
        if ab.b_norm <= sampling.eps_b and ab.a >= 0.0:
            report.clf_violations.append(point)
    report.radial_violations.extend(_radial_violations(clf, sampling))

    log = logger.info if report.passed else logger.warning
    log(f"CLF check for {clf.name} on {system.name or '<inline>'}: {report.describe()}")
    return report


@dataclass
class WeightsVerdict:
    accepted: bool
    matrix: Optional[str] = None
    reason: str = ""

    @property
    def passed(self) -> bool:
        return self.accepted

    def raise_for_status(self) -> "WeightsVerdict":
        if not self.accepted:
            raise WeightsError(self.reason, self.matrix)
        return self


def _check_matrix(label: str, M: np.ndarray) -> Optional[WeightsVerdict]:
    asymmetry = float(np.max(np.abs(M - M.T))) if M.size else 0.0
    if asymmetry > SYMMETRY_ATOL:
        return WeightsVerdict(False, label, f"{label} is not symmetric (max |{label}-{label}ᵀ| = {asymmetry:.3g})")
    try:
        L = np.linalg.cholesky(M)
    except np.linalg.LinAlgError:
        return WeightsVerdict(False, label, f"{label} is not positive definite (non-positive pivot in its Cholesky factorization)")
    if np.any(np.diag(L) <= 0.0):
        return WeightsVerdict(False, label, f"{label} is not positive definite (non-positive pivot in its Cholesky factorization)")
    return None


def check_weights(weights: Weights, n: Optional[int] = None, m: Optional[int] = None) -> WeightsVerdict:
    if n is not None and weights.n != n:
        return WeightsVerdict(False, "Q", f"Q must be {n}x{n}, got {weights.Q.shape[0]}x{weights.Q.shape[1]}")
    if m is not None and weights.m != m:
        return WeightsVerdict(False, "R", f"R must be {m}x{m}, got {weights.R.shape[0]}x{weights.R.shape[1]}")
    for label, M in (("Q", weights.Q), ("R", weights.R)):
        verdict = _check_matrix(label, M)
        if verdict is not None:
            return verdict
    return WeightsVerdict(True)
