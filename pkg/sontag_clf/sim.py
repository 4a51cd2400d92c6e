"""
Closed-loop simulation x' = f(x) + G(x)u(x).

The ODE state is augmented with the two running cost integrals

    J4' = ½(1/λ)(xᵀQx + uᵀRu)     (distorted cost minimized by Sontag's formula)
    J5' = ½(xᵀQx + uᵀRu)          (classical quadratic cost)

so that quadrature error follows the integrator tolerance. Integration stops
when ‖x‖ <= stop_norm, at t_max, after max_steps attempts, or when the
controller raises a CLF violation (partial trajectory returned).
"""

import math
from dataclasses import dataclass
from enum import Enum
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from .exceptions import (
    ClfViolationError,
    NonFiniteError,
    NotConvergedError,
    SimulationDivergedError,
    ValueConsistencyError,
)
from .models import ClfCandidate, SystemModel, Weights
from .sontag import DEFAULT_ORIGIN_TOL, Controller, ControlEval
from .utils import as_state, get_logger, quad_form, require_finite

logger = get_logger("Simulator")

DEFAULT_VALUE_TOL = 5e-3
DEFAULT_DRIFT_TOL = 1e-5


class Method(str, Enum):
    RK4_FIXED = "rk4_fixed"
    RK45_ADAPTIVE = "rk45_adaptive"


class Termination(str, Enum):
    CONVERGED = "converged"
    T_MAX_REACHED = "t_max_reached"
    STEP_LIMIT = "step_limit"
    CONTROLLER_ERROR = "controller_error"


@dataclass(frozen=True)
class SimConfig:
    method: Method = Method.RK45_ADAPTIVE
    step: float = 1e-2
    rtol: float = 1e-8
    atol: float = 1e-10
    t_max: float = 100.0
    stop_norm: float = 1e-8
    max_steps: int = 200_000
    initial_step: float = 1e-3

    def __post_init__(self):
        object.__setattr__(self, "method", Method(self.method))
        if self.step <= 0.0 or self.initial_step <= 0.0:
            raise ValueError(f"Step sizes must be positive, got step={self.step}, initial_step={self.initial_step}")
        if self.rtol <= 0.0 or self.atol <= 0.0:
            raise ValueError(f"Tolerances must be positive, got rtol={self.rtol}, atol={self.atol}")
        if self.t_max <= 0.0:
            raise ValueError(f"t_max must be positive, got {self.t_max}")
        if self.stop_norm < 0.0:
            raise ValueError(f"stop_norm must be non-negative, got {self.stop_norm}")
        if self.max_steps < 1:
            raise ValueError(f"max_steps must be positive, got {self.max_steps}")


def trajectory_columns(n: int, m: int) -> List[str]:
    return (["t"] + [f"x{i}" for i in range(1, n + 1)] + [f"u{j}" for j in range(1, m + 1)]
            + ["V", "lambda", "integrand_j4", "integrand_j5", "j4_running", "j5_running"])


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Time-stamped closed-loop record. The frame columns are those of trajectory_columns."""
    data: pd.DataFrame
    n: int
    m: int
    termination: Termination
    message: str = ""
    steps: int = 0
    j4_tail: float = 0.0
    j5_tail_bound: float = 0.0

    def __post_init__(self):
        expected = trajectory_columns(self.n, self.m)
        if list(self.data.columns) != expected:
            raise ValueError(f"Trajectory columns {list(self.data.columns)} differ from {expected}")
        if len(self.data) > 1 and not np.all(np.diff(self.data["t"].to_numpy()) > 0.0):
            raise ValueError("Trajectory times must be strictly increasing")

    @property
    def times(self) -> np.ndarray:
        return self.data["t"].to_numpy()

    @property
    def states(self) -> np.ndarray:
        return self.data[[f"x{i}" for i in range(1, self.n + 1)]].to_numpy()

    @property
    def inputs(self) -> np.ndarray:
        return self.data[[f"u{j}" for j in range(1, self.m + 1)]].to_numpy()

    @property
    def lambdas(self) -> np.ndarray:
        return self.data["lambda"].to_numpy()

    @property
    def v_values(self) -> np.ndarray:
        return self.data["V"].to_numpy()

    @property
    def j4_running(self) -> np.ndarray:
        return self.data["j4_running"].to_numpy()

    @property
    def j5_running(self) -> np.ndarray:
        return self.data["j5_running"].to_numpy()

    @property
    def converged(self) -> bool:
        return self.termination is Termination.CONVERGED

    def lambda_stats(self, origin_tol: float = DEFAULT_ORIGIN_TOL) -> dict:
        """min/max/mean of λ over recorded states with ‖x‖ > origin_tol."""
        if self.data.empty:
            return {"min": None, "max": None, "mean": None, "count": 0}
        mask = np.linalg.norm(self.states, axis=1) > origin_tol
        values = self.lambdas[mask]
        if values.size == 0:
            return {"min": None, "max": None, "mean": None, "count": 0}
        return {"min": float(values.min()), "max": float(values.max()),
                "mean": float(values.mean()), "count": int(values.size)}


# Butcher tableau of the Runge-Kutta-Fehlberg 4(5) pair
_RKF45_A = [
    [],
    [1 / 4],
    [3 / 32, 9 / 32],
    [1932 / 2197, -7200 / 2197, 7296 / 2197],
    [439 / 216, -8.0, 3680 / 513, -845 / 4104],
    [-8 / 27, 2.0, -3544 / 2565, 1859 / 4104, -11 / 40],
]
_RKF45_B4 = np.array([25 / 216, 0.0, 1408 / 2565, 2197 / 4104, -1 / 5, 0.0])
_RKF45_ERR = np.array([1 / 360, 0.0, -128 / 4275, -2197 / 75240, 1 / 50, 2 / 55])


def _rk4_step(rhs: Callable, y: np.ndarray, h: float, k1: np.ndarray) -> np.ndarray:
    k2 = rhs(y + 0.5 * h * k1)
    k3 = rhs(y + 0.5 * h * k2)
    k4 = rhs(y + h * k3)
    return y + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def _rkf45_step(rhs: Callable, y: np.ndarray, h: float, k1: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    stages = [k1]
    for row in _RKF45_A[1:]:
        increment = sum(coefficient * k for coefficient, k in zip(row, stages))
        stages.append(rhs(y + h * increment))
    K = np.array(stages)
    return y + h * (_RKF45_B4 @ K), h * (_RKF45_ERR @ K)


class _ClosedLoop:
    """Augmented right-hand side (x, J4, J5) evaluated through a controller."""

    def __init__(self, ctrl: Controller, system: SystemModel, weights: Weights):
        self.ctrl = ctrl
        self.system = system
        self.Q = weights.Q
        self.R = weights.R
        self.n = system.n

    def evaluate(self, y: np.ndarray) -> Tuple[np.ndarray, ControlEval, float]:
        x = y[:self.n]
        ev = self.ctrl.feedback(x)
        running = 0.5 * (quad_form(self.Q, x) + quad_form(self.R, ev.u))
        dy = np.concatenate([self.system.rhs(x, ev.u), [running / ev.lambda_, running]])
        return dy, ev, running

    def __call__(self, y: np.ndarray) -> np.ndarray:
        return self.evaluate(y)[0]


def simulate(ctrl: Controller, system: SystemModel, x0: Sequence[float], cfg: Optional[SimConfig] = None,
             clf: Optional[ClfCandidate] = None, weights: Optional[Weights] = None,
             label: str = "") -> Trajectory:
    cfg = cfg or SimConfig()
    clf = clf if clf is not None else getattr(ctrl, "clf", None)
    weights = weights if weights is not None else getattr(ctrl, "weights", None)
    if clf is None:
        raise ValueError("simulate needs a value function to record V: pass clf or use a controller with .clf")
    if weights is None:
        raise ValueError("simulate needs weights for the cost integrands: pass weights or use a controller with .weights")

    n, m = system.n, system.m
    x0 = require_finite(as_state(x0, n), "initial state")
    loop = _ClosedLoop(ctrl, system, weights)
    rows: List[np.ndarray] = []
    label = label or f"x0={x0.tolist()}"

    def record(t: float, y: np.ndarray, ev: ControlEval, running: float, v: float):
        rows.append(np.concatenate([
            [t], y[:n], ev.u,
            [v, ev.lambda_, running / ev.lambda_, running, y[n], y[n + 1]],
        ]))

    def finish(termination: Termination, steps: int, message: str = "") -> Trajectory:
        columns = trajectory_columns(n, m)
        frame = pd.DataFrame(np.array(rows).reshape(len(rows), len(columns)), columns=columns)
        traj = Trajectory(data=frame, n=n, m=m, termination=termination, message=message, steps=steps)
        if rows:
            j4_tail = float(traj.v_values[-1])
            lam_max = traj.lambda_stats()["max"] or 1.0
            traj = Trajectory(data=frame, n=n, m=m, termination=termination, message=message,
                              steps=steps, j4_tail=j4_tail, j5_tail_bound=lam_max * j4_tail)
        log = logger.info if termination is Termination.CONVERGED else logger.warning
        log(f"[{label}] {termination.value} after {steps} steps at t={traj.times[-1] if rows else 0.0:.6g}"
            + (f": {message}" if message else ""))
        return traj

    t = 0.0
    y = np.concatenate([x0, [0.0, 0.0]])
    try:
        dy, ev, running = loop.evaluate(y)
        v = clf.value(x0)
    except ClfViolationError as e:
        return finish(Termination.CONTROLLER_ERROR, 0, str(e))
    except NonFiniteError as e:
        partial = finish(Termination.STEP_LIMIT, 0, f"diverged: {e}")
        raise SimulationDivergedError(f"[{label}] closed loop undefined at x0: {e}", partial) from e
    record(t, y, ev, running, v)

    fixed = cfg.method is Method.RK4_FIXED
    h = cfg.step if fixed else cfg.initial_step
    steps = 0
    while True:
        if np.linalg.norm(y[:n]) <= cfg.stop_norm:
            return finish(Termination.CONVERGED, steps)
        remaining = cfg.t_max - t
        if remaining <= 1e-12 * cfg.t_max:
            return finish(Termination.T_MAX_REACHED, steps)
        if steps >= cfg.max_steps:
            return finish(Termination.STEP_LIMIT, steps)

        h_try = min(h, remaining)
        steps += 1
        try:
            if fixed:
                y_new = _rk4_step(loop, y, h_try, dy)
                ratio = 0.0
            else:
                y_new, err = _rkf45_step(loop, y, h_try, dy)
                scale = cfg.atol + cfg.rtol * np.maximum(np.abs(y), np.abs(y_new))
                ratio = float(np.max(np.abs(err) / scale))
                if not math.isfinite(ratio) or ratio > 1.0:
                    shrink = 0.2 if not math.isfinite(ratio) else max(0.2, 0.9 * ratio ** -0.2)
                    h = h_try * shrink
                    if h < 1e-14 * max(1.0, t):
                        return finish(Termination.STEP_LIMIT, steps, "step size underflow")
                    continue
            if not np.all(np.isfinite(y_new)):
                raise NonFiniteError(f"state became non-finite at t={t + h_try:.6g}")
            dy_new, ev_new, running_new = loop.evaluate(y_new)
            v_new = clf.value(y_new[:n])
        except ClfViolationError as e:
            return finish(Termination.CONTROLLER_ERROR, steps, str(e))
        except NonFiniteError as e:
            partial = finish(Termination.STEP_LIMIT, steps, f"diverged: {e}")
            raise SimulationDivergedError(f"[{label}] closed loop diverged: {e}", partial) from e

        t_new = t + h_try
        if cfg.t_max - t_new <= 1e-12 * cfg.t_max:
            t_new = cfg.t_max
        t, y, dy = t_new, y_new, dy_new
        record(t, y, ev_new, running_new, v_new)
        if not fixed:
            h = h_try * (5.0 if ratio == 0.0 else min(5.0, max(0.2, 0.9 * ratio ** -0.2)))


def costs(traj: Trajectory, tail_corrected: bool = False) -> Tuple[float, float]:
    """(J4, J5) accumulated at termination, ½ included; optionally with the tail estimates added."""
    if traj.data.empty:
        return 0.0, 0.0
    j4 = float(traj.j4_running[-1])
    j5 = float(traj.j5_running[-1])
    if tail_corrected:
        j4 += traj.j4_tail
        j5 += traj.j5_tail_bound
    return j4, j5


def conservation_drift(traj: Trajectory) -> float:
    """max_t |V(x(t)) + J4(t) − V(x0)| / max(V(x0), 1e-12)."""
    if traj.data.empty:
        return 0.0
    total = traj.v_values + traj.j4_running
    return float(np.max(np.abs(total - total[0])) / max(abs(total[0]), 1e-12))


@dataclass(frozen=True)
class ValueConsistency:
    """J4 + V(x(T)) against V(x0), plus the worst drift of V + J4 along the trajectory."""
    relative_error: float
    drift: float
    tol: float = DEFAULT_VALUE_TOL
    drift_tol: float = DEFAULT_DRIFT_TOL

    @property
    def passed(self) -> bool:
        return self.relative_error < self.tol and self.drift <= self.drift_tol

    def describe(self) -> str:
        return (f"relative error {self.relative_error:.3e} (tolerance {self.tol:.1e}), "
                f"drift {self.drift:.3e} (tolerance {self.drift_tol:.1e})")

    def raise_for_status(self) -> "ValueConsistency":
        if not self.passed:
            raise ValueConsistencyError(self)
        return self

    def to_dict(self) -> dict:
        return {"passed": self.passed, "relative_error": self.relative_error, "drift": self.drift,
                "tol": self.tol, "drift_tol": self.drift_tol}


def value_consistency(traj: Trajectory, clf: ClfCandidate, x0: Sequence[float],
                      tol: float = DEFAULT_VALUE_TOL, drift_tol: float = DEFAULT_DRIFT_TOL) -> ValueConsistency:
    """|J4 − V(x0)| / max(V(x0), 1e-12) with J4 tail-corrected by V(x(T))."""
    if not traj.converged:
        raise NotConvergedError(f"Trajectory terminated with {traj.termination.value}, not converged")
    v0 = clf.value(as_state(x0, clf.n))
    j4 = costs(traj)[0] + clf.value(traj.states[-1])
    result = ValueConsistency(abs(j4 - v0) / max(v0, 1e-12), conservation_drift(traj), tol, drift_tol)
    if not result.passed:
        logger.warning(f"Value consistency failed: {result.describe()}")
    return result
