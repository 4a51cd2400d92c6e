"""
Experiment runner behind the command line: config loading and validation,
controller synthesis, simulation of every initial state and the artifacts
(trajectory CSVs, optional Parquet copies, summary.json, run_stats.csv).
"""

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple, Union

import jsonschema
import numpy as np
import pyarrow as pa
import pyarrow.parquet as pq

from .bulk import SimulationOutcome, simulate_many
from .care import CareSolution, is_affine, linearize, riccati_clf, solve_care
from .catalog import CatalogEntry, get_entry
from .clf_checks import check_clf, check_weights
from .exceptions import CareError, CatalogError, ConfigError, NotConvergedError, SontagToolkitError
from .exprcore import parse
from .hjb import check_distorted_hjb, verify_lambda_identity
from .models import ClfCandidate, SamplingConfig, SystemModel, Weights
from .schema import EXPERIMENT_SCHEMA
from .sim import DEFAULT_DRIFT_TOL, DEFAULT_VALUE_TOL, SimConfig, conservation_drift, costs, value_consistency
from .sontag import SontagController
from .utils import RunStats, finite_or_none, get_logger

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_CHECK_FAILED = 2

DEFAULT_CHECKS = ("clf_check", "hjb_residuals", "value_consistency")

PathLike = Union[str, Path]


@dataclass(frozen=True, eq=False)
class ExperimentConfig:
    system: SystemModel
    clf: ClfCandidate
    clf_source: str
    weights: Weights
    initial_states: List[np.ndarray]
    simulation: SimConfig = field(default_factory=SimConfig)
    sampling: SamplingConfig = field(default_factory=SamplingConfig)
    checks: Tuple[str, ...] = DEFAULT_CHECKS
    output_dir: Path = Path("out")
    formats: Tuple[str, ...] = ("csv",)
    workers: int = 1
    seed: int = 42
    care: Optional[CareSolution] = None
    source: Optional[Path] = None


def load_config(config_path: PathLike) -> Dict[str, Any]:
    path = Path(config_path)
    if not path.is_file():
        raise ConfigError(f"Config file not found: {path}")
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise ConfigError(f"Invalid JSON at line {e.lineno}, column {e.colno}: {e.msg}") from e
    errors = sorted(jsonschema.Draft202012Validator(EXPERIMENT_SCHEMA).iter_errors(raw),
                    key=lambda err: list(err.absolute_path))
    if errors:
        first = errors[0]
        raise ConfigError(first.message, _dotted(first.absolute_path))
    return raw


def _dotted(parts) -> str:
    text = ""
    for part in parts:
        text += f"[{part}]" if isinstance(part, int) else (f".{part}" if text else str(part))
    return text


def _build_system(raw: Any) -> Tuple[SystemModel, Optional[CatalogEntry]]:
    if isinstance(raw, str) or "catalog" in raw:
        name = raw if isinstance(raw, str) else raw["catalog"]
        try:
            entry = get_entry(name)
        except CatalogError as e:
            raise ConfigError(str(e), "system") from e
        return entry.system, entry

    n, m = raw["n"], raw["m"]
    if len(raw["f"]) != n:
        raise ConfigError(f"f must have {n} components, got {len(raw['f'])}", "system.f")
    if len(raw["G"]) != n:
        raise ConfigError(f"G must have {n} rows, got {len(raw['G'])}", "system.G")
    for i, text in enumerate(raw["f"]):
        _parse_field(text, n, f"system.f[{i}]")
    for i, row in enumerate(raw["G"]):
        if len(row) != m:
            raise ConfigError(f"G rows must have {m} entries, got {len(row)}", f"system.G[{i}]")
        for j, text in enumerate(row):
            _parse_field(text, n, f"system.G[{i}][{j}]")
    try:
        return SystemModel.from_strings(raw["f"], raw["G"], name=raw.get("name", "")), None
    except (SontagToolkitError, ValueError) as e:
        raise ConfigError(str(e), "system") from e


def _parse_field(text: str, n: int, path: str):
    try:
        return parse(text, n)
    except (SontagToolkitError, ValueError) as e:
        raise ConfigError(str(e), path) from e


def _build_weights(raw: Optional[dict], entry: Optional[CatalogEntry], system: SystemModel) -> Weights:
    if raw is None:
        if entry is None:
            raise ConfigError("weights are required for an inline system", "weights")
        return entry.weights
    try:
        weights = Weights(Q=raw["Q"], R=raw["R"])
    except (SontagToolkitError, ValueError) as e:
        raise ConfigError(str(e), "weights") from e
    verdict = check_weights(weights, system.n, system.m)
    if not verdict.passed:
        raise ConfigError(verdict.reason, f"weights.{verdict.matrix}")
    return weights


def _build_clf(text: str, entry: Optional[CatalogEntry], system: SystemModel, weights: Weights,
               seed: int) -> Tuple[ClfCandidate, str, Optional[CareSolution]]:
    if entry is not None and text in entry.clfs:
        return entry.clfs[text], f"catalog:{text}", None
    if text == "riccati":
        if not is_affine(system, np.random.default_rng(seed)):
            raise ConfigError("the riccati directive needs an affine f and a constant G", "clf")
        try:
            solution = solve_care(linearize(system), weights)
        except (CareError, NotConvergedError) as e:
            raise ConfigError(f"Riccati synthesis failed: {e}", "clf") from e
        return riccati_clf(solution), "riccati", solution
    expr = _parse_field(text, system.n, "clf")
    try:
        return ClfCandidate(V=expr, n=system.n, name="V"), "expression", None
    except (SontagToolkitError, ValueError) as e:
        raise ConfigError(str(e), "clf") from e


def _build_config(raw: Dict[str, Any], seed: Optional[int], source: Optional[Path]) -> ExperimentConfig:
    system, entry = _build_system(raw["system"])
    weights = _build_weights(raw.get("weights"), entry, system)
    seed = raw.get("seed", 42) if seed is None else seed
    clf, clf_source, care = _build_clf(raw["clf"], entry, system, weights, seed)

    states = []
    for k, x0 in enumerate(raw["initial_states"]):
        if len(x0) != system.n:
            raise ConfigError(f"expected {system.n} components, got {len(x0)}", f"initial_states[{k}]")
        states.append(np.asarray(x0, dtype=float))

    try:
        simulation = SimConfig(**raw.get("simulation", {}))
    except ValueError as e:
        raise ConfigError(str(e), "simulation") from e
    try:
        sampling = SamplingConfig(seed=seed, **raw.get("sampling", {}))
    except ValueError as e:
        raise ConfigError(str(e), "sampling") from e

    return ExperimentConfig(
        system=system,
        clf=clf,
        clf_source=clf_source,
        weights=weights,
        initial_states=states,
        simulation=simulation,
        sampling=sampling,
        checks=tuple(raw.get("checks", DEFAULT_CHECKS)),
        output_dir=Path(raw.get("output_dir", "out")),
        formats=tuple(raw.get("formats", ("csv",))),
        workers=raw.get("workers", 1),
        seed=seed,
        care=care,
        source=source,
    )


def validate_config(config_path: PathLike, seed: Optional[int] = None) -> ExperimentConfig:
    """Schema, dimension and definiteness checks; raises ConfigError, never simulates."""
    path = Path(config_path)
    return _build_config(load_config(path), seed, path)


class Experiment:
    """Orchestrator running one validated config end to end."""

    def __init__(self, config: ExperimentConfig, output_dir: Optional[PathLike] = None):
        self.config = config
        self.output_dir = Path(output_dir) if output_dir is not None else config.output_dir
        self.logger = get_logger("Experiment")

    def _save_trajectory(self, outcome: SimulationOutcome) -> List[str]:
        frame = outcome.trajectory.data
        written = []
        if "csv" in self.config.formats:
            path = self.output_dir / f"traj_{outcome.index}.csv"
            frame.to_csv(path, index=False, float_format="%.17g")
            written.append(path.name)
        if "parquet" in self.config.formats:
            path = self.output_dir / f"traj_{outcome.index}.parquet"
            pq.write_table(pa.Table.from_pandas(frame, preserve_index=False), path, compression="snappy")
            written.append(path.name)
        self.logger.info(f"Saved: {', '.join(written)}")
        return written

    def _trajectory_summary(self, outcome: SimulationOutcome, files: List[str]) -> dict:
        clf = self.config.clf
        traj = outcome.trajectory
        v0 = clf.value(outcome.x0)
        j4, j5 = costs(traj)
        j4_tail, j5_tail = costs(traj, tail_corrected=True)
        entry = {
            "index": outcome.index,
            "x0": outcome.x0.tolist(),
            "files": files,
            "termination": traj.termination.value,
            "converged": traj.converged,
            "message": outcome.error or traj.message,
            "steps": traj.steps,
            "t_final": float(traj.times[-1]) if len(traj.times) else 0.0,
            "V0": v0,
            "j4": j4,
            "j5": j5,
            "j4_tail_corrected": j4_tail,
            "j5_tail_corrected": j5_tail,
            "conservation_drift": conservation_drift(traj),
            "lambda": traj.lambda_stats(),
        }
        try:
            consistency = value_consistency(traj, clf, outcome.x0)
            entry["value_error"] = consistency.relative_error
            entry["value_consistency_passed"] = consistency.passed
        except NotConvergedError:
            entry["value_error"] = None
            entry["value_consistency_passed"] = False
        return entry

    def _controller_summary(self, ctrl: SontagController) -> dict:
        config = self.config
        summary = {
            "type": "sontag",
            "system": {"name": config.system.name, **config.system.to_strings()},
            "clf": str(config.clf),
            "clf_source": config.clf_source,
            "weights": {"Q": config.weights.Q.tolist(), "R": config.weights.R.tolist()},
            "beta_tol": ctrl.beta_tol,
            "origin_tol": ctrl.origin_tol,
            "simulation": {"method": config.simulation.method.value, "step": config.simulation.step,
                           "rtol": config.simulation.rtol, "atol": config.simulation.atol,
                           "t_max": config.simulation.t_max, "stop_norm": config.simulation.stop_norm,
                           "max_steps": config.simulation.max_steps},
        }
        if config.care is not None:
            summary["care"] = {"P": config.care.P.tolist(), "K": config.care.K.tolist(),
                               "residual_norm": config.care.residual_norm,
                               "iterations": config.care.iterations}
        return summary

    def _sampled_checks(self, ctrl: SontagController) -> Dict[str, dict]:
        config = self.config
        checks: Dict[str, dict] = {}
        if "clf_check" in config.checks:
            checks["clf_check"] = check_clf(config.system, config.clf, config.sampling).to_dict()
        if "lambda_identity" in config.checks:
            report = verify_lambda_identity(config.system, config.clf, config.weights, config.sampling)
            checks["lambda_identity"] = {"passed": report.passed, **report.to_dict()}
        if "hjb_residuals" in config.checks:
            checks["hjb_residuals"] = check_distorted_hjb(ctrl, config.sampling).to_dict()
        return checks

    def run(self) -> int:
        config = self.config
        self.output_dir.mkdir(parents=True, exist_ok=True)
        self.logger.info(f"Starting experiment on {config.system.name or '<inline>'} with V = {config.clf}")

        ctrl = SontagController(config.system, config.clf, config.weights, verify_clf=False,
                                sampling=config.sampling)
        checks = self._sampled_checks(ctrl)

        outcomes = simulate_many(ctrl, config.system, config.initial_states, config.simulation,
                                 workers=config.workers)
        stats = RunStats(str(self.output_dir / "run_stats.csv"))
        trajectories = []
        for outcome in outcomes:
            stats.add_stat(outcome.label, outcome.duration, outcome.trajectory.termination.value,
                           outcome.trajectory.steps)
            trajectories.append(self._trajectory_summary(outcome, self._save_trajectory(outcome)))

        if "value_consistency" in config.checks:
            errors = [t["value_error"] for t in trajectories]
            drifts = [t["conservation_drift"] for t in trajectories]
            checks["value_consistency"] = {
                "passed": all(t["value_consistency_passed"] for t in trajectories),
                "relative_errors": errors,
                "max_drift": max(drifts),
                "tol": DEFAULT_VALUE_TOL,
                "drift_tol": DEFAULT_DRIFT_TOL,
            }

        all_converged = all(t["converged"] for t in trajectories)
        passed = all_converged and all(check["passed"] for check in checks.values())
        exit_code = EXIT_OK if passed else EXIT_CHECK_FAILED
        summary = {
            "config": str(config.source) if config.source else None,
            "seed": config.seed,
            "controller": self._controller_summary(ctrl),
            "checks": checks,
            "trajectories": trajectories,
            "all_converged": all_converged,
            "passed": passed,
            "exit_code": exit_code,
        }
        summary_path = self.output_dir / "summary.json"
        summary_path.write_text(json.dumps(finite_or_none(summary), indent=2, allow_nan=False) + "\n",
                                encoding="utf-8")
        self.logger.info(f"Saved: {summary_path}")

        if passed:
            self.logger.info("Experiment completed, all checks passed.")
        else:
            failed = [name for name, check in checks.items() if not check["passed"]]
            self.logger.warning(f"Experiment completed with failures: checks {failed}, "
                                f"all trajectories converged: {all_converged}")
        return exit_code


def run_experiment(config_path: PathLike, out: Optional[PathLike] = None, seed: Optional[int] = None) -> int:
    """Runs a config file end to end and returns the process exit code (0, 1 or 2)."""
    logger = get_logger("Experiment")
    try:
        config = validate_config(config_path, seed)
    except ConfigError as e:
        logger.error(f"Invalid config {config_path}: {e}")
        return EXIT_ERROR
    try:
        return Experiment(config, out).run()
    except (SontagToolkitError, OSError) as e:
        logger.error(f"Experiment aborted: {e}")
        return EXIT_ERROR
