import multiprocessing
import time
from dataclasses import dataclass
from typing import List, Optional, Sequence

import numpy as np

from .exceptions import SimulationDivergedError
from .models import ClfCandidate, SystemModel, Weights
from .sim import SimConfig, Trajectory, simulate
from .sontag import Controller
from .utils import get_logger

MAX_PROCESSES = 4


@dataclass(frozen=True, eq=False)
class SimulationOutcome:
    index: int
    label: str
    x0: np.ndarray
    trajectory: Optional[Trajectory]
    duration: float
    error: str = ""


def _simulate_one(ctrl: Controller, system: SystemModel, x0: np.ndarray, cfg: SimConfig,
                  clf: Optional[ClfCandidate], weights: Optional[Weights], index: int) -> SimulationOutcome:
    """Internal function that performs the workload per initial state."""
    label = f"traj_{index}"
    started = time.perf_counter()
    try:
        traj = simulate(ctrl, system, x0, cfg, clf=clf, weights=weights, label=label)
        error = ""
    except SimulationDivergedError as e:
        traj, error = e.trajectory, str(e)
    return SimulationOutcome(index=index, label=label, x0=np.asarray(x0, dtype=float), trajectory=traj,
                             duration=time.perf_counter() - started, error=error)


def _run_worker(args):
    """Bridge unpacking one task tuple inside a pool process."""
    return _simulate_one(*args)


def simulate_many(ctrl: Controller, system: SystemModel, initial_states: Sequence[Sequence[float]],
                  cfg: Optional[SimConfig] = None, clf: Optional[ClfCandidate] = None,
                  weights: Optional[Weights] = None, workers: int = 1) -> List[SimulationOutcome]:
    """
    Simulates the closed loop from every initial state. Outcomes come back in input order,
    whatever the number of worker processes.
    """
    cfg = cfg or SimConfig()
    logger = get_logger("BulkEngine")
    tasks = [(ctrl, system, np.asarray(x0, dtype=float), cfg, clf, weights, k)
             for k, x0 in enumerate(initial_states)]
    num_processes = min(len(tasks), workers, MAX_PROCESSES)
    logger.info(f"Simulating {len(tasks)} initial states with {max(num_processes, 1)} process(es)")

    if num_processes <= 1:
        return [_run_worker(task) for task in tasks]
    with multiprocessing.Pool(processes=num_processes) as pool:
        return pool.map(_run_worker, tasks)
