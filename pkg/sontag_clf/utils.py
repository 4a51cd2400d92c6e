import csv
import logging
import math
import os
from datetime import datetime
from typing import Any, Sequence

import numpy as np

from .exceptions import DimensionError, NonFiniteError


def get_logger(name: str = "sontag_clf") -> logging.Logger:
    logger = logging.getLogger(name)
    logger.setLevel(logging.INFO)
    if not logger.handlers:
        console_handler = logging.StreamHandler()
        console_formatter = logging.Formatter('%(asctime)s - %(name)s - %(levelname)s - %(message)s')
        console_handler.setFormatter(console_formatter)
        logger.addHandler(console_handler)
    return logger


class RunStats:
    """Appends one row per simulated initial state to a CSV file."""

    def __init__(self, filename: str = "run_stats.csv"):
        self.filename = filename
        self.headers = ["timestamp", "label", "duration", "termination", "steps"]
        self._ensure_file_exists()

    def _ensure_file_exists(self):
        if not os.path.exists(self.filename):
            with open(self.filename, 'w', newline='') as f:
                writer = csv.writer(f)
                writer.writerow(self.headers)

    def add_stat(self, label: str, duration: float, termination: str, steps: int):
        with open(self.filename, 'a', newline='') as f:
            writer = csv.writer(f)
            writer.writerow([datetime.now().isoformat(), label, f"{duration:.6f}", termination, steps])


def as_state(x: Sequence[float], n: int) -> np.ndarray:
    """Converts x to a float vector of length n."""
    arr = np.asarray(x, dtype=float).reshape(-1)
    if arr.shape[0] != n:
        raise DimensionError(f"Expected a state of dimension {n}, got {arr.shape[0]}")
    return arr


def require_finite(value: Any, what: str) -> Any:
    if not np.all(np.isfinite(value)):
        raise NonFiniteError(f"Non-finite {what}: {value}")
    return value


def quad_form(M: np.ndarray, x: np.ndarray) -> float:
    return float(x @ M @ x)


def finite_or_none(value: Any) -> Any:
    """Recursively replaces NaN/inf by None so the result is strict JSON."""
    if isinstance(value, dict):
        return {k: finite_or_none(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [finite_or_none(v) for v in value]
    if isinstance(value, np.ndarray):
        return finite_or_none(value.tolist())
    if isinstance(value, (np.floating, np.integer)):
        value = value.item()
    if isinstance(value, float) and not math.isfinite(value):
        return None
    return value
