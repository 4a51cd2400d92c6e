from dataclasses import dataclass, field
from typing import Sequence, Tuple

import numpy as np

from .exceptions import DimensionError, NonFiniteError
from .exprcore import Expression, parse
from .utils import as_state

ORIGIN_ATOL = 1e-12


@dataclass(frozen=True)
class SystemModel:
    """Input-affine system x' = f(x) + G(x)u with f(0) = 0."""
    n: int
    m: int
    f: Tuple[Expression, ...]
    G: Tuple[Tuple[Expression, ...], ...]
    name: str = ""

    def __post_init__(self):
        if self.n < 1 or self.m < 1:
            raise DimensionError(f"System dimensions must be positive, got n={self.n}, m={self.m}")
        if len(self.f) != self.n:
            raise DimensionError(f"Drift has {len(self.f)} entries, expected {self.n}")
        if len(self.G) != self.n or any(len(row) != self.m for row in self.G):
            raise DimensionError(f"Input matrix must be {self.n}x{self.m}")
        for expr in (*self.f, *(e for row in self.G for e in row)):
            if expr.n != self.n:
                raise DimensionError(f"Expression '{expr}' declared over {expr.n} variables, system has {self.n}")
        try:
            f0 = self.drift(np.zeros(self.n))
        except NonFiniteError as e:
            raise ValueError(f"Drift of system {self.name or '<inline>'} is not finite at the origin: {e}") from e
        if np.max(np.abs(f0)) > ORIGIN_ATOL:
            raise ValueError(f"Drift of system {self.name or '<inline>'} must vanish at the origin, f(0) = {f0.tolist()}")

    @classmethod
    def from_strings(cls, f: Sequence[str], G: Sequence[Sequence[str]], name: str = "") -> "SystemModel":
        n = len(f)
        m = len(G[0]) if G else 0
        return cls(
            n=n,
            m=m,
            f=tuple(parse(text, n) for text in f),
            G=tuple(tuple(parse(text, n) for text in row) for row in G),
            name=name,
        )

    def drift(self, x: Sequence[float]) -> np.ndarray:
        x = as_state(x, self.n)
        return np.array([e.evaluate(x) for e in self.f])

    def input_matrix(self, x: Sequence[float]) -> np.ndarray:
        x = as_state(x, self.n)
        return np.array([[e.evaluate(x) for e in row] for row in self.G])

    def rhs(self, x: Sequence[float], u: Sequence[float]) -> np.ndarray:
        x = as_state(x, self.n)
        return self.drift(x) + self.input_matrix(x) @ np.asarray(u, dtype=float)

    def to_strings(self) -> dict:
        return {
            "n": self.n,
            "m": self.m,
            "f": [str(e) for e in self.f],
            "G": [[str(e) for e in row] for row in self.G],
        }


@dataclass(frozen=True)
class ClfCandidate:
    """Candidate Control Lyapunov Function V(x) with V(0) = 0."""
    V: Expression
    n: int
    name: str = "V"

    def __post_init__(self):
        if self.V.n != self.n:
            raise DimensionError(f"CLF '{self.V}' declared over {self.V.n} variables, expected {self.n}")
        v0 = self.V.evaluate(np.zeros(self.n))
        if abs(v0) > ORIGIN_ATOL:
            raise ValueError(f"CLF {self.name} must vanish at the origin, V(0) = {v0}")

    @classmethod
    def from_string(cls, text: str, n: int, name: str = "V") -> "ClfCandidate":
        return cls(V=parse(text, n), n=n, name=name)

    def value(self, x: Sequence[float]) -> float:
        return self.V.evaluate(as_state(x, self.n))

    def gradient(self, x: Sequence[float]) -> np.ndarray:
        return self.V.gradient(as_state(x, self.n))

    def __str__(self) -> str:
        return str(self.V)


@dataclass(frozen=True, eq=False)
class Weights:
    """Constant weights Q (n×n) and R (m×m) of the quadratic integrand."""
    Q: np.ndarray
    R: np.ndarray

    def __post_init__(self):
        Q = np.atleast_2d(np.asarray(self.Q, dtype=float))
        R = np.atleast_2d(np.asarray(self.R, dtype=float))
        for label, M in (("Q", Q), ("R", R)):
            if M.ndim != 2 or M.shape[0] != M.shape[1]:
                raise DimensionError(f"{label} must be square, got shape {M.shape}")
        object.__setattr__(self, "Q", Q)
        object.__setattr__(self, "R", R)

    @property
    def n(self) -> int:
        return self.Q.shape[0]

    @property
    def m(self) -> int:
        return self.R.shape[0]


@dataclass(frozen=True, eq=False)
class AbPair:
    """a(x) = ∇Vᵀf and b(x) = Gᵀ∇V from the decomposition of V̇."""
    a: float
    b: np.ndarray = field(default_factory=lambda: np.zeros(0))

    @property
    def b_norm(self) -> float:
        return float(np.linalg.norm(self.b))


@dataclass(frozen=True)
class SamplingConfig:
    """Deterministic state sampling used by the sampled CLF and HJB checks."""
    samples: int = 1000
    r_min: float = 1e-3
    r_max: float = 10.0
    eps_b: float = 1e-9
    seed: int = 42

    def __post_init__(self):
        if self.samples < 1:
            raise ValueError(f"samples must be positive, got {self.samples}")
        if not 0.0 < self.r_min <= self.r_max:
            raise ValueError(f"Radius range must satisfy 0 < r_min <= r_max, got [{self.r_min}, {self.r_max}]")
        if self.eps_b < 0.0:
            raise ValueError(f"eps_b must be non-negative, got {self.eps_b}")
