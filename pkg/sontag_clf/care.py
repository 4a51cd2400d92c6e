"""
Continuous-time algebraic Riccati equation AᵀP + PA − PBR⁻¹BᵀP + Q = 0
solved by Newton–Kleinman iteration, the LQR baseline u = −Kx, and the
quadratic CLF V = ½xᵀPx that turns Sontag's formula into LQR.
"""

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.linalg import cho_factor, cho_solve, solve_continuous_lyapunov
from tenacity import RetryError, Retrying, retry_if_exception_type, stop_after_attempt

from .clf_checks import check_weights
from .exceptions import CareError, DimensionError, NotConvergedError
from .exprcore import BinaryOp, Expression, Negate, Number, constant, sum_of, variable
from .models import ClfCandidate, SystemModel, Weights
from .sontag import Branch, ControlEval
from .utils import as_state, get_logger

logger = get_logger("CareSolver")


@dataclass(frozen=True, eq=False)
class LinearSystem:
    A: np.ndarray
    B: np.ndarray

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.A, dtype=float))
        B = np.asarray(self.B, dtype=float)
        if B.ndim == 1:
            B = B.reshape(-1, 1)
        if A.shape[0] != A.shape[1]:
            raise DimensionError(f"A must be square, got {A.shape}")
        if B.shape[0] != A.shape[0]:
            raise DimensionError(f"B must have {A.shape[0]} rows, got {B.shape}")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def m(self) -> int:
        return self.B.shape[1]


@dataclass(frozen=True)
class SolverOptions:
    tol: float = 1e-12
    max_iter: int = 50
    initial_gain: Optional[np.ndarray] = field(default=None, compare=False)
    shift_attempts: int = 5

    def __post_init__(self):
        if self.tol <= 0.0 or self.max_iter < 1 or self.shift_attempts < 1:
            raise ValueError(f"Invalid solver options: {self}")


@dataclass(frozen=True, eq=False)
class CareSolution:
    P: np.ndarray
    K: np.ndarray
    residual_norm: float
    iterations: int = 0


@dataclass(frozen=True, eq=False)
class EigenCheck:
    eigenvalues: np.ndarray

    @property
    def max_real_part(self) -> float:
        return float(np.max(self.eigenvalues.real))

    @property
    def passed(self) -> bool:
        return self.max_real_part < 0.0

    def raise_for_status(self) -> "EigenCheck":
        if not self.passed:
            raise CareError(f"Closed loop is not Hurwitz, max Re(eig) = {self.max_real_part:.6g}")
        return self


class _NotStabilizing(Exception):
    pass


def closed_loop_eigen_check(sys: LinearSystem, K: np.ndarray) -> EigenCheck:
    K = np.atleast_2d(np.asarray(K, dtype=float))
    if K.shape != (sys.m, sys.n):
        raise DimensionError(f"Gain must be {sys.m}x{sys.n}, got {K.shape}")
    try:
        eigenvalues = np.linalg.eigvals(sys.A - sys.B @ K)
    except np.linalg.LinAlgError as e:
        raise CareError(f"Eigenvalue computation failed: {e}") from e
    return EigenCheck(eigenvalues=eigenvalues)


def care_residual(sys: LinearSystem, weights: Weights, P: np.ndarray) -> float:
    A, B = sys.A, sys.B
    R_inv_Bt_P = cho_solve(cho_factor(weights.R), B.T @ P)
    residual = A.T @ P + P @ A - P @ B @ R_inv_Bt_P + weights.Q
    return float(np.linalg.norm(residual, "fro"))


def _shifted_gain(sys: LinearSystem, weights: Weights, sigma: float) -> np.ndarray:
    """Bass-type gain K = R⁻¹BᵀZ⁻¹ with (A+σI)Z + Z(A+σI)ᵀ = 2BR⁻¹Bᵀ."""
    A_shift = sys.A + sigma * np.eye(sys.n)
    rhs = 2.0 * sys.B @ cho_solve(cho_factor(weights.R), sys.B.T)
    Z = solve_continuous_lyapunov(A_shift, rhs)
    Z = 0.5 * (Z + Z.T)
    try:
        Z_inv_factor = cho_factor(Z)
    except np.linalg.LinAlgError as e:
        raise _NotStabilizing(f"shift {sigma:g}: controllability Gramian is singular") from e
    K = cho_solve(cho_factor(weights.R), sys.B.T @ cho_solve(Z_inv_factor, np.eye(sys.n)))
    if not closed_loop_eigen_check(sys, K).passed:
        raise _NotStabilizing(f"shift {sigma:g}: gain does not stabilize")
    return K


def initial_gain(sys: LinearSystem, weights: Weights, attempts: int = 5) -> np.ndarray:
    """Stabilizing starting gain: zero when A is Hurwitz, otherwise a shifted-Lyapunov gain."""
    abscissa = float(np.max(np.linalg.eigvals(sys.A).real))
    if abscissa < 0.0:
        return np.zeros((sys.m, sys.n))

    base = max(abscissa, 0.0) + 1.0
    try:
        for attempt in Retrying(stop=stop_after_attempt(attempts),
                                retry=retry_if_exception_type(_NotStabilizing)):
            with attempt:
                sigma = base * 2.0 ** (attempt.retry_state.attempt_number - 1)
                logger.debug(f"Trying initial gain with shift {sigma:g}")
                return _shifted_gain(sys, weights, sigma)
    except RetryError as e:
        raise CareError(f"No stabilizing initial gain found: {e.last_attempt.exception()}") from e


def solve_care(sys: LinearSystem, weights: Weights, opts: Optional[SolverOptions] = None) -> CareSolution:
    opts = opts or SolverOptions()
    check_weights(weights, sys.n, sys.m).raise_for_status()
    if sys.n > 10:
        logger.warning(f"solve_care is meant for n <= 10, got n = {sys.n}")

    if opts.initial_gain is not None:
        K = np.atleast_2d(np.asarray(opts.initial_gain, dtype=float))
        closed_loop_eigen_check(sys, K).raise_for_status()
    else:
        K = initial_gain(sys, weights, opts.shift_attempts)

    r_factor = cho_factor(weights.R)
    P = None
    for iteration in range(1, opts.max_iter + 1):
        A_cl = sys.A - sys.B @ K
        rhs = -(weights.Q + K.T @ weights.R @ K)
        try:
            P_next = solve_continuous_lyapunov(A_cl.T, rhs)
        except np.linalg.LinAlgError as e:
            raise CareError(f"Singular Lyapunov system at iteration {iteration}: {e}") from e
        if not np.all(np.isfinite(P_next)):
            raise CareError(f"Singular Lyapunov system at iteration {iteration}")
        P_next = 0.5 * (P_next + P_next.T)
        K = cho_solve(r_factor, sys.B.T @ P_next)
        if P is not None:
            step = np.linalg.norm(P_next - P, "fro")
            logger.debug(f"Newton-Kleinman iteration {iteration}: |dP| = {step:.3e}")
            if step < opts.tol * max(1.0, np.linalg.norm(P, "fro")):
                P = P_next
                break
        P = P_next
    else:
        raise NotConvergedError(f"Newton-Kleinman did not converge in {opts.max_iter} iterations")

    try:
        np.linalg.cholesky(P)
    except np.linalg.LinAlgError as e:
        raise CareError("Riccati solution is not positive definite") from e
    closed_loop_eigen_check(sys, K).raise_for_status()

    residual = care_residual(sys, weights, P)
    logger.info(f"CARE solved in {iteration} iterations, residual {residual:.3e}")
    return CareSolution(P=P, K=K, residual_norm=residual, iterations=iteration)


def quadratic_form_expression(P: np.ndarray, scale: float = 0.5) -> Expression:
    """scale·xᵀPx expanded over x1..xn."""
    P = np.atleast_2d(np.asarray(P, dtype=float))
    n = P.shape[0]
    terms = []
    for i in range(n):
        for j in range(i, n):
            coefficient = scale * P[i, i] if i == j else scale * (P[i, j] + P[j, i])
            if coefficient == 0.0:
                continue
            if i == j:
                monomial = BinaryOp("^", variable(i + 1), Number(2.0))
            else:
                monomial = BinaryOp("*", variable(i + 1), variable(j + 1))
            term = monomial if abs(coefficient) == 1.0 else BinaryOp("*", constant(abs(coefficient)), monomial)
            terms.append(term if coefficient > 0.0 else Negate(term))
    return Expression(sum_of(terms), n)


def riccati_clf(sol: CareSolution, name: str = "riccati") -> ClfCandidate:
    expr = quadratic_form_expression(sol.P)
    return ClfCandidate(V=expr, n=expr.n, name=name)


def is_affine(system: SystemModel, rng: Optional[np.random.Generator] = None,
              trials: int = 8, scale: float = 1.0, tol: float = 1e-8) -> bool:
    """Second differences of f vanish and G is constant at random points."""
    rng = rng or np.random.default_rng(0)
    G0 = system.input_matrix(np.zeros(system.n))
    for _ in range(trials):
        x = rng.uniform(-scale, scale, system.n)
        d1 = rng.uniform(-scale, scale, system.n)
        d2 = rng.uniform(-scale, scale, system.n)
        second = (system.drift(x + d1 + d2) - system.drift(x + d1)
                  - system.drift(x + d2) + system.drift(x))
        magnitude = max(1.0, float(np.max(np.abs(system.drift(x + d1 + d2)))))
        if np.max(np.abs(second)) > tol * magnitude:
            return False
        if np.max(np.abs(system.input_matrix(x) - G0)) > tol * max(1.0, float(np.max(np.abs(G0)))):
            return False
    return True


def linearize(system: SystemModel) -> LinearSystem:
    """A = ∂f/∂x(0) from exact gradients, B = G(0)."""
    origin = np.zeros(system.n)
    A = np.array([e.gradient(origin) for e in system.f])
    B = system.input_matrix(origin)
    return LinearSystem(A=A, B=B)


class LinearFeedback:
    """Static gain u = −Kx (e.g. the LQR baseline); reports λ = 1."""

    def __init__(self, K: np.ndarray, clf: Optional[ClfCandidate] = None, name: str = "lqr"):
        self.K = np.atleast_2d(np.asarray(K, dtype=float))
        self.clf = clf
        self.name = name

    def feedback(self, x: Sequence[float]) -> ControlEval:
        x = as_state(x, self.K.shape[1])
        return ControlEval(u=-self.K @ x, lambda_=1.0, branch=Branch.FIXED)

    def __call__(self, x: Sequence[float]) -> np.ndarray:
        return self.feedback(x).u
