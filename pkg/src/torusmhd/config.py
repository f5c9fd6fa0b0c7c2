"""Experiment configuration: JSON on disk, validated into solver objects.

Validation is typo-safe (unknown keys are rejected) and reports every
violation at once rather than stopping at the first.  Stochastic runs must
name their seed explicitly; there is no wall-clock fallback anywhere in the
package.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Any, Optional

from .galerkin import EquationParams, NoiseSpec
from .lattice import norm_sq


class ConfigError(ValueError):
    """Carries the full list of validation violations."""

    def __init__(self, violations: list[str]):
        super().__init__("invalid configuration:\n  - " + "\n  - ".join(violations))
        self.violations = violations


@dataclass
class RunParams:
    horizon: float
    seed: int
    snapshot_stride: int = 1
    ensemble_size: int = 1
    workers: int = 1


@dataclass
class ExperimentConfig:
    equation: EquationParams
    noise: NoiseSpec
    run: RunParams
    analysis: dict[str, Any] = field(default_factory=dict)
    raw: dict[str, Any] = field(default_factory=dict)


_EQUATION_KEYS = {"alpha", "beta", "n_cut", "dt", "nonlinearity_enabled", "grid"}
_NOISE_KEYS = {"z0"}
_RUN_KEYS = {"T", "seed", "snapshot_stride", "ensemble_size", "workers"}
_TOP_KEYS = {"equation", "noise", "run", "analysis"}


def _check_keys(section: dict, allowed: set, where: str, errors: list[str]) -> None:
    for key in section:
        if key not in allowed:
            errors.append(f"unknown key {key!r} in {where}")


def validate_config(doc: dict) -> ExperimentConfig:
    errors: list[str] = []
    if not isinstance(doc, dict):
        raise ConfigError(["top-level document must be an object"])
    _check_keys(doc, _TOP_KEYS, "top level", errors)

    eq = doc.get("equation")
    if not isinstance(eq, dict):
        errors.append("missing 'equation' section")
        eq = {}
    _check_keys(eq, _EQUATION_KEYS, "'equation'", errors)
    alpha = eq.get("alpha")
    beta = eq.get("beta")
    n_cut = eq.get("n_cut")
    dt = eq.get("dt")
    if not isinstance(alpha, (int, float)):
        errors.append("equation.alpha must be a number")
    elif alpha <= 1:
        errors.append(f"alpha must exceed 1 (got {alpha})")
    if not isinstance(beta, (int, float)):
        errors.append("equation.beta must be a number")
    elif beta <= 1:
        errors.append(f"beta must exceed 1 (got {beta})")
    if not isinstance(n_cut, int) or n_cut < 1:
        errors.append("equation.n_cut must be a positive integer")
    if not isinstance(dt, (int, float)) or dt <= 0:
        errors.append("equation.dt must be a positive number")
    grid = eq.get("grid")
    if grid is not None and (not isinstance(grid, int) or grid % 2 or
                             (isinstance(n_cut, int) and grid < 3 * n_cut + 1)):
        errors.append("equation.grid must be an even integer >= 3*n_cut + 1")
    nonlin = eq.get("nonlinearity_enabled", True)
    if not isinstance(nonlin, bool):
        errors.append("equation.nonlinearity_enabled must be a boolean")

    noise_doc = doc.get("noise")
    if not isinstance(noise_doc, dict):
        errors.append("missing 'noise' section")
        noise_doc = {}
    _check_keys(noise_doc, _NOISE_KEYS, "'noise'", errors)
    z0 = noise_doc.get("z0")
    amplitudes: dict[tuple, tuple[float, float]] = {}
    if not isinstance(z0, list) or not z0:
        errors.append("noise.z0 must be a nonempty list of forced-mode entries")
    else:
        for i, entry in enumerate(z0):
            where = f"noise.z0[{i}]"
            if not isinstance(entry, dict):
                errors.append(f"{where} must be an object")
                continue
            _check_keys(entry, {"k", "amplitudes"}, where, errors)
            k = entry.get("k")
            amps = entry.get("amplitudes", [1.0, 1.0])
            if (not isinstance(k, list) or len(k) != 2
                    or not all(isinstance(v, int) for v in k)):
                errors.append(f"{where}.k must be a pair of integers")
                continue
            k = (k[0], k[1])
            if k == (0, 0):
                errors.append(f"{where}.k must be nonzero")
                continue
            if (not isinstance(amps, list) or len(amps) != 2
                    or not all(isinstance(a, (int, float)) for a in amps)):
                errors.append(f"{where}.amplitudes must be a pair of numbers")
                continue
            if any(a == 0 for a in amps):
                errors.append(f"{where}: amplitudes must be non-zero")
                continue
            if isinstance(n_cut, int) and norm_sq(k) > n_cut * n_cut:
                errors.append(f"{where}: forced mode {list(k)} outside truncation "
                              f"n_cut={n_cut}")
                continue
            if k in amplitudes:
                errors.append(f"{where}: duplicate forced mode {list(k)}")
                continue
            amplitudes[k] = (float(amps[0]), float(amps[1]))

    run_doc = doc.get("run")
    if not isinstance(run_doc, dict):
        errors.append("missing 'run' section")
        run_doc = {}
    _check_keys(run_doc, _RUN_KEYS, "'run'", errors)
    horizon = run_doc.get("T")
    seed = run_doc.get("seed")
    if not isinstance(horizon, (int, float)) or horizon <= 0:
        errors.append("run.T must be a positive number")
    if not isinstance(seed, int):
        errors.append("run.seed must be present and an integer "
                      "(stochastic runs never default to wall-clock seeds)")
    stride = run_doc.get("snapshot_stride", 1)
    if not isinstance(stride, int) or stride < 1:
        errors.append("run.snapshot_stride must be a positive integer")
    ensemble = run_doc.get("ensemble_size", 1)
    if not isinstance(ensemble, int) or ensemble < 1:
        errors.append("run.ensemble_size must be a positive integer")
    workers = run_doc.get("workers", 1)
    if not isinstance(workers, int) or workers < 1:
        errors.append("run.workers must be a positive integer")
    if (isinstance(horizon, (int, float)) and isinstance(dt, (int, float)) and dt > 0
            and horizon > 0):
        n = horizon / dt
        if abs(n - round(n)) > 1e-9 * max(1.0, n):
            errors.append(f"run.T={horizon} is not a whole number of steps of dt={dt}")

    analysis = doc.get("analysis", {})
    if not isinstance(analysis, dict):
        errors.append("'analysis' must be an object")
        analysis = {}

    if errors:
        raise ConfigError(errors)

    params = EquationParams(alpha=float(alpha), beta=float(beta), n_cut=n_cut,
                            dt=float(dt), nonlinearity_enabled=nonlin, grid=grid)
    noise = NoiseSpec.from_amplitudes(amplitudes)
    run = RunParams(horizon=float(horizon), seed=seed, snapshot_stride=stride,
                    ensemble_size=ensemble, workers=workers)
    return ExperimentConfig(equation=params, noise=noise, run=run,
                            analysis=analysis, raw=doc)


def parse_config(path: str, overrides: Optional[dict[str, Any]] = None) -> ExperimentConfig:
    """Load, override, and validate a JSON experiment configuration."""
    with open(path, "r", encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError([f"not valid JSON: {exc}"]) from exc
    if overrides:
        doc = apply_overrides(doc, overrides)
    return validate_config(doc)


def apply_overrides(doc: dict, overrides: dict[str, Any]) -> dict:
    """Apply dotted-path overrides such as {'run.seed': 7} to a config document."""
    doc = json.loads(json.dumps(doc))  # deep copy
    for dotted, value in overrides.items():
        parts = dotted.split(".")
        cursor = doc
        for p in parts[:-1]:
            cursor = cursor.setdefault(p, {})
        cursor[parts[-1]] = value
    return doc


def example_hypoelliptic_config(seed: int = 1234) -> dict:
    """The four-mode magnetic forcing set that spans both parity chains."""
    return {
        "equation": {"alpha": 1.5, "beta": 1.5, "n_cut": 4, "dt": 1e-3,
                     "nonlinearity_enabled": True},
        "noise": {"z0": [
            {"k": [0, 1], "amplitudes": [1.0, 1.0]},
            {"k": [1, 1], "amplitudes": [1.0, 1.0]},
            {"k": [1, 0], "amplitudes": [1.0, 1.0]},
            {"k": [1, 2], "amplitudes": [1.0, 1.0]},
        ]},
        "run": {"T": 1.0, "seed": seed, "snapshot_stride": 1},
        "analysis": {},
    }
