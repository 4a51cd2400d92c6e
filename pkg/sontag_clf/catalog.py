"""
Built-in benchmark problems shared by the CLI and the test suite.

Every entry carries the reference values worked out for it in closed form,
each tagged with where the number comes from.
"""

import math
from dataclasses import dataclass
from enum import Enum
from functools import lru_cache
from types import MappingProxyType
from typing import Dict, List, Mapping, Optional, Tuple

import numpy as np

from .care import LinearSystem, quadratic_form_expression
from .exceptions import CatalogError
from .models import ClfCandidate, SystemModel, Weights
from .utils import get_logger

logger = get_logger("Catalog")

SQRT2 = math.sqrt(2.0)
SQRT3 = math.sqrt(3.0)


class Provenance(str, Enum):
    PAPER = "PAPER"
    TRIVIAL = "TRIVIAL"
    DERIVED = "DERIVED"


@dataclass(frozen=True)
class Reference:
    value: float
    provenance: Provenance
    note: str = ""


@dataclass(frozen=True, eq=False)
class CatalogEntry:
    name: str
    system: SystemModel
    clfs: Mapping[str, ClfCandidate]
    weights: Weights
    references: Mapping[str, Reference]
    default_clf: str
    optimal_clf: Optional[str] = None
    initial_states: Tuple[Tuple[float, ...], ...] = ((1.0,),)
    linear: Optional[LinearSystem] = None
    description: str = ""

    def __post_init__(self):
        object.__setattr__(self, "clfs", MappingProxyType(dict(self.clfs)))
        object.__setattr__(self, "references", MappingProxyType(dict(self.references)))
        if self.default_clf not in self.clfs:
            raise ValueError(f"Default CLF '{self.default_clf}' missing from entry {self.name}")
        if self.optimal_clf is not None and self.optimal_clf not in self.clfs:
            raise ValueError(f"Optimal CLF '{self.optimal_clf}' missing from entry {self.name}")

    def clf(self, name: Optional[str] = None) -> ClfCandidate:
        key = name or self.default_clf
        if key not in self.clfs:
            raise CatalogError(f"Entry {self.name} has no CLF '{key}'; available: {sorted(self.clfs)}")
        return self.clfs[key]


def _scalar_clfs(**texts: str) -> Dict[str, ClfCandidate]:
    return {name: ClfCandidate.from_string(text, 1, name=name) for name, text in texts.items()}


def _integrator1d() -> CatalogEntry:
    return CatalogEntry(
        name="integrator1d",
        system=SystemModel.from_strings(["0"], [["1"]], name="integrator1d"),
        clfs=_scalar_clfs(half_square="0.5*x1^2", square="x1^2"),
        weights=Weights(Q=[[1.0]], R=[[1.0]]),
        default_clf="half_square",
        optimal_clf="half_square",
        references={
            "lambda_half_square": Reference(1.0, Provenance.DERIVED, "a = 0, λ = √(q r)/p with p = 1"),
            "lambda_half_square_q4": Reference(2.0, Provenance.DERIVED, "Q = 4: λ = √4, the scalar Riccati p"),
            "x_at_t1": Reference(math.exp(-1.0), Provenance.DERIVED, "closed loop x' = -x from x0 = 1"),
            "j4_from_1": Reference(0.5, Provenance.DERIVED, "J4 = V(x0)"),
            "hjb_residual_square_at_1": Reference(-1.5, Provenance.DERIVED, "V = x², ½ - ½·4"),
        },
        description="x' = u",
    )


def _cubic1d() -> CatalogEntry:
    return CatalogEntry(
        name="cubic1d",
        system=SystemModel.from_strings(["x1^3"], [["1"]], name="cubic1d"),
        clfs=_scalar_clfs(half_square="0.5*x1^2", quartic="0.25*x1^4"),
        weights=Weights(Q=[[1.0]], R=[[1.0]]),
        default_clf="half_square",
        references={
            "lambda_at_1": Reference(1.0 + SQRT2, Provenance.DERIVED, "λ = x² + √(x⁴+1)"),
            "lambda_at_2": Reference(4.0 + math.sqrt(17.0), Provenance.DERIVED, "λ = x² + √(x⁴+1)"),
            "u_at_1": Reference(-(1.0 + SQRT2), Provenance.DERIVED, "u = -x(x² + √(x⁴+1))"),
            "vdot_at_1": Reference(-SQRT2, Provenance.DERIVED, "a + b·u = 1 - (1+√2)"),
            "optimal_gradient_at_1": Reference(1.0 + SQRT2, Provenance.DERIVED, "J*ₓ = x³ + x√(x⁴+1)"),
            "u_at_0": Reference(0.0, Provenance.TRIVIAL, "u = 0 at the origin"),
            "j4_from_1": Reference(0.5, Provenance.DERIVED, "J4 = V(x0)"),
        },
        description="x' = x³ + u",
    )


def _damped1d() -> CatalogEntry:
    p = SQRT2 - 1.0
    clfs = _scalar_clfs(half_square="0.5*x1^2", square="x1^2")
    clfs["riccati"] = ClfCandidate(V=quadratic_form_expression([[p]]), n=1, name="riccati")
    return CatalogEntry(
        name="damped1d",
        system=SystemModel.from_strings(["-x1"], [["1"]], name="damped1d"),
        clfs=clfs,
        weights=Weights(Q=[[1.0]], R=[[1.0]]),
        default_clf="half_square",
        optimal_clf="riccati",
        linear=LinearSystem(A=[[-1.0]], B=[[1.0]]),
        references={
            "lambda_half_square": Reference(p, Provenance.DERIVED, "a = -x², β = q = x²: λ = √2 - 1, constant"),
            "riccati_p": Reference(p, Provenance.DERIVED, "p² + 2p - 1 = 0"),
            "j4_from_1": Reference(0.5, Provenance.DERIVED, "J4 = V(x0)"),
        },
        description="x' = -x + u",
    )


def _double_integrator() -> CatalogEntry:
    P = np.array([[SQRT3, 1.0], [1.0, SQRT3]])
    return CatalogEntry(
        name="double_integrator",
        system=SystemModel.from_strings(["x2", "0"], [["0"], ["1"]], name="double_integrator"),
        clfs={
            "riccati": ClfCandidate(V=quadratic_form_expression(P), n=2, name="riccati"),
            "quadratic_alt": ClfCandidate.from_string("x1^2 + x1*x2 + 0.5*x2^2", 2, name="quadratic_alt"),
        },
        weights=Weights(Q=np.eye(2), R=[[1.0]]),
        default_clf="riccati",
        optimal_clf="riccati",
        initial_states=((1.0, 0.0),),
        linear=LinearSystem(A=[[0.0, 1.0], [0.0, 0.0]], B=[[0.0], [1.0]]),
        references={
            "p11": Reference(SQRT3, Provenance.DERIVED, "CARE with Q = I, R = 1"),
            "p12": Reference(1.0, Provenance.DERIVED, "CARE with Q = I, R = 1"),
            "p22": Reference(SQRT3, Provenance.DERIVED, "CARE with Q = I, R = 1"),
            "k1": Reference(1.0, Provenance.DERIVED, "K = R⁻¹BᵀP"),
            "k2": Reference(SQRT3, Provenance.DERIVED, "K = R⁻¹BᵀP"),
            "lambda_riccati": Reference(1.0, Provenance.PAPER, "λ ≡ 1 for the HJB solution"),
            "u_riccati_at_11": Reference(-(1.0 + SQRT3), Provenance.DERIVED, "u = -Kx at (1, 1)"),
            "v_riccati_at_11": Reference(1.0 + SQRT3, Provenance.DERIVED, "½(√3 + 2 + √3)"),
            "j5_from_10": Reference(SQRT3 / 2.0, Provenance.DERIVED, "½x0ᵀPx0 at (1, 0)"),
        },
        description="x1' = x2, x2' = u",
    )


_BUILDERS = {
    "cubic1d": _cubic1d,
    "damped1d": _damped1d,
    "double_integrator": _double_integrator,
    "integrator1d": _integrator1d,
}


@lru_cache(maxsize=None)
def get_entry(name: str) -> CatalogEntry:
    builder = _BUILDERS.get(name)
    if builder is None:
        raise CatalogError(f"Unknown catalog entry '{name}'; available: {list_entries()}")
    logger.debug(f"Building catalog entry {name}")
    return builder()


def list_entries() -> List[str]:
    return sorted(_BUILDERS)


def export_entry(name: str, clf: Optional[str] = None) -> dict:
    """Experiment config (JSON-ready) reproducing a catalog entry with inline expressions."""
    entry = get_entry(name)
    clf_name = clf or entry.default_clf
    candidate = entry.clf(clf_name)
    checks = ["clf_check", "hjb_residuals", "value_consistency"]
    if clf_name == entry.optimal_clf:
        checks.insert(1, "lambda_identity")
    return {
        "system": {"name": entry.name, **entry.system.to_strings()},
        "clf": str(candidate),
        "weights": {"Q": entry.weights.Q.tolist(), "R": entry.weights.R.tolist()},
        "initial_states": [list(x0) for x0 in entry.initial_states],
        "simulation": {"method": "rk45_adaptive", "rtol": 1e-8, "atol": 1e-10,
                       "t_max": 100.0, "stop_norm": 1e-8, "max_steps": 200000},
        "checks": checks,
        "output_dir": f"out_{entry.name}",
        "seed": 42,
    }
