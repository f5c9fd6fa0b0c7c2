"""Empirical ergodicity probes: time averages, CLT histograms, mixing decay,
exponential-moment statistics, and a computable upper bound for the weighted
path metric.

Mixing is probed through differences of ensemble expectations of fixed
observables rather than through a Wasserstein distance: estimating the latter
at desk scale is statistically infeasible, while the decay of
|E_a Phi(U_t) - E_b Phi(U_t)| is the directly testable shadow of exponential
mixing.  Every stochastic routine takes an explicit seed, derives one
independent stream per trajectory from (seed, index), and reduces ensemble
results keyed by trajectory index, so estimates are reproducible bit-for-bit
and independent of worker scheduling.

In the linear regime (nonlinearity disabled) every forced mode is an exactly
discretized Ornstein-Uhlenbeck process, which supplies closed-form oracles:
stationary variance amp^2/(2 lam), mean decay rate lam, and long-run CLT
variance amp^4/(2 lam^3) for the squared coefficient.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy import integrate, stats

from .galerkin import (
    EquationParams,
    ModeBasis,
    NoiseSpec,
    SpectralState,
    TrajectoryRecord,
    simulate,
    sobolev_energy,
)
from .lattice import Mode


# ---------------------------------------------------------------------------
# Observables.
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Observable:
    """A functional of the state, measurable from the coefficients alone.

    kinds: ``mode_coefficient``, ``mode_coefficient_squared``,
    ``total_energy``, and ``bounded_lipschitz`` (tanh of a scaled mode
    coefficient, bounded with bounded gradient by construction).
    """

    kind: str
    mode: Optional[Mode] = None
    scale: float = 1.0

    def __post_init__(self):
        if self.kind not in ("mode_coefficient", "mode_coefficient_squared",
                             "total_energy", "bounded_lipschitz"):
            raise ValueError(f"unknown observable kind {self.kind!r}")
        if self.kind != "total_energy" and self.mode is None:
            raise ValueError(f"observable {self.kind!r} needs a mode")

    def of_states(self, basis: ModeBasis, states: np.ndarray) -> np.ndarray:
        states = np.atleast_2d(states)
        if self.kind == "total_energy":
            return (states**2).sum(axis=-1)
        c = states[..., basis.mode_index(self.mode)]
        if self.kind == "mode_coefficient":
            return c
        if self.kind == "mode_coefficient_squared":
            return c**2
        return np.tanh(self.scale * c)

    def __call__(self, state: SpectralState) -> float:
        return float(self.of_states(state.basis, state.coeffs[None, :])[0])


@dataclass
class ErgodicReport:
    estimate: float
    standard_error: float
    sample_count: int
    seed: object

    def to_dict(self) -> dict:
        return {
            "estimate": self.estimate,
            "standard_error": self.standard_error,
            "sample_count": self.sample_count,
            "seed": _seed_repr(self.seed),
        }


def _seed_repr(seed):
    return seed if isinstance(seed, (int, type(None))) else str(seed)


def ensemble_map(worker: Callable[[int], object], n: int, workers: int = 1) -> list:
    """Order-preserving parallel map keyed by trajectory index."""
    if workers <= 1:
        return [worker(i) for i in range(n)]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(worker, range(n)))


#: stream index reserved for pilot/centering runs, clear of replica indices
PILOT_STREAM = 1_000_000_007


def trajectory_seed(master, index: int):
    if index < 0:
        raise ValueError("trajectory stream index must be non-negative")
    return (int(master), int(index))


# ---------------------------------------------------------------------------
# Law of large numbers.
# ---------------------------------------------------------------------------

def time_average(rec: TrajectoryRecord, obs: Observable, burn_in: float = 0.0,
                 n_batches: int = 20) -> ErgodicReport:
    """Trapezoid time average over [burn_in, T] with batch-means error bars."""
    mask = rec.times >= burn_in - 1e-12
    if mask.sum() < 2:
        raise ValueError("averaging window is empty")
    times = rec.times[mask]
    values = obs.of_states(rec.basis, rec.states[mask])
    estimate = float(np.trapezoid(values, times) / (times[-1] - times[0]))
    nb = min(n_batches, len(values))
    usable = (len(values) // nb) * nb
    batches = values[:usable].reshape(nb, -1).mean(axis=1)
    se = float(batches.std(ddof=1) / math.sqrt(nb)) if nb > 1 else 0.0
    return ErgodicReport(estimate=estimate, standard_error=se,
                         sample_count=len(values), seed=rec.seed)


# ---------------------------------------------------------------------------
# Central limit theorem.
# ---------------------------------------------------------------------------

@dataclass
class CltReport:
    samples: np.ndarray
    m_hat: float
    sample_variance: float
    ks_statistic: float
    ks_pvalue: float
    seed: int

    def to_dict(self) -> dict:
        return {
            "samples": self.samples.tolist(),
            "m_hat": self.m_hat,
            "sample_variance": self.sample_variance,
            "ks_statistic": self.ks_statistic,
            "ks_pvalue": self.ks_pvalue,
            "seed": self.seed,
        }


def normalized_integral(values: np.ndarray, times: np.ndarray, m_hat: float) -> float:
    """(1/sqrt(T)) integral of (values - m_hat) over the record's time span."""
    span = times[-1] - times[0]
    return float(np.trapezoid(values - m_hat, times) / math.sqrt(span))


def ks_against_fitted_normal(samples: np.ndarray) -> tuple[float, float]:
    mu, sd = float(np.mean(samples)), float(np.std(samples, ddof=1))
    if sd == 0.0:
        raise ValueError("degenerate sample variance")
    res = stats.kstest(samples, "norm", args=(mu, sd))
    return float(res.statistic), float(res.pvalue)


def clt_sample(u0: SpectralState, params: EquationParams, noise: NoiseSpec,
               obs: Observable, horizon: float, n_replicas: int, seed: int,
               pilot_horizon: Optional[float] = None, burn_in: float = 0.0,
               snapshot_stride: int = 1, workers: int = 1) -> CltReport:
    """Normalized-deviation samples of the time integral across replicas.

    The centering constant comes from one long pilot run; each replica then
    contributes (1/sqrt(T)) * integral of (Phi - m_hat).
    """
    if n_replicas < 2:
        raise ValueError("need at least two replicas")
    if pilot_horizon is None:
        pilot_horizon = 4.0 * horizon
    pilot = simulate(u0, params, noise, pilot_horizon, trajectory_seed(seed, PILOT_STREAM),
                     snapshot_stride=snapshot_stride)
    m_hat = time_average(pilot, obs, burn_in=min(burn_in, 0.5 * pilot_horizon)).estimate

    def one(i: int) -> float:
        rec = simulate(u0, params, noise, horizon, trajectory_seed(seed, i),
                       snapshot_stride=snapshot_stride)
        mask = rec.times >= burn_in - 1e-12
        vals = obs.of_states(rec.basis, rec.states[mask])
        return normalized_integral(vals, rec.times[mask], m_hat)

    samples = np.array(ensemble_map(one, n_replicas, workers))
    ks_stat, ks_p = ks_against_fitted_normal(samples)
    return CltReport(samples=samples, m_hat=m_hat,
                     sample_variance=float(samples.var(ddof=1)),
                     ks_statistic=ks_stat, ks_pvalue=ks_p, seed=seed)


# ---------------------------------------------------------------------------
# Two-ensemble mixing decay.
# ---------------------------------------------------------------------------

@dataclass
class MixingReport:
    gamma_hat: float
    gamma_stderr: float
    r_squared: float
    identifiable: bool
    times: np.ndarray
    abs_diff: np.ndarray
    noise_floor: np.ndarray
    fit_count: int
    seed: int

    def to_dict(self) -> dict:
        return {
            "gamma_hat": self.gamma_hat,
            "gamma_stderr": self.gamma_stderr,
            "r_squared": self.r_squared,
            "identifiable": self.identifiable,
            "times": self.times.tolist(),
            "abs_diff": self.abs_diff.tolist(),
            "noise_floor": self.noise_floor.tolist(),
            "fit_count": self.fit_count,
            "seed": self.seed,
        }


def mixing_decay_estimate(u0_a: SpectralState, u0_b: SpectralState,
                          params: EquationParams, noise: NoiseSpec,
                          obs: Observable, horizon: float, n_replicas: int,
                          seed: int, snapshot_stride: int = 1,
                          snr: float = 3.0, workers: int = 1) -> MixingReport:
    """Log-linear decay rate of |E_a Phi(U_t) - E_b Phi(U_t)| from two ensembles.

    Points whose ensemble difference falls below ``snr`` combined standard
    errors are excluded from the fit; if fewer than five usable points
    remain, the report is flagged unidentifiable instead of raising.
    """

    def run(u0: SpectralState, tag: int):
        def one(i: int) -> np.ndarray:
            rec = simulate(u0, params, noise, horizon,
                           trajectory_seed(seed, tag * n_replicas + i),
                           snapshot_stride=snapshot_stride)
            return obs.of_states(rec.basis, rec.states)

        vals = np.array(ensemble_map(one, n_replicas, workers))
        return vals.mean(axis=0), vals.var(axis=0, ddof=1) / n_replicas

    n_steps = int(round(horizon / params.dt))
    snap = list(range(0, n_steps + 1, snapshot_stride))
    if snap[-1] != n_steps:
        snap.append(n_steps)
    times = u0_a.time + params.dt * np.array(snap)
    mean_a, var_a = run(u0_a, 1)
    mean_b, var_b = run(u0_b, 2)
    diff = np.abs(mean_a - mean_b)
    floor = snr * np.sqrt(var_a + var_b)

    usable = diff > floor
    if usable.sum() < 5:
        return MixingReport(gamma_hat=float("nan"), gamma_stderr=float("nan"),
                            r_squared=float("nan"), identifiable=False,
                            times=times, abs_diff=diff, noise_floor=floor,
                            fit_count=int(usable.sum()), seed=seed)
    t_fit = times[usable]
    y_fit = np.log(diff[usable])
    design = np.column_stack([np.ones_like(t_fit), -t_fit])
    coef, residuals, *_ = np.linalg.lstsq(design, y_fit, rcond=None)
    fitted = design @ coef
    ss_res = float(((y_fit - fitted) ** 2).sum())
    ss_tot = float(((y_fit - y_fit.mean()) ** 2).sum())
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else float("nan")
    dof = max(len(t_fit) - 2, 1)
    cov = ss_res / dof * np.linalg.inv(design.T @ design)
    return MixingReport(gamma_hat=float(coef[1]), gamma_stderr=float(np.sqrt(cov[1, 1])),
                        r_squared=r2, identifiable=True, times=times,
                        abs_diff=diff, noise_floor=floor,
                        fit_count=int(usable.sum()), seed=seed)


# ---------------------------------------------------------------------------
# Exponential-moment statistic.
# ---------------------------------------------------------------------------

@dataclass
class MomentProbe:
    times: np.ndarray
    log_statistic: np.ndarray

    def statistic(self) -> np.ndarray:
        with np.errstate(over="ignore"):
            return np.exp(self.log_statistic)

    def to_dict(self) -> dict:
        return {"times": self.times.tolist(),
                "log_statistic": self.log_statistic.tolist()}


def exp_moment_probe(rec: TrajectoryRecord, params: EquationParams,
                     eta: float) -> MomentProbe:
    """Pathwise series eta ||U_t||^2 + (eta/2) e^{-t/2} * cumulative dissipation.

    Values are produced in log space; exponentiate via the probe when the
    magnitudes allow it.
    """
    if eta <= 0:
        raise ValueError("eta must be positive")
    e_u, e_b = sobolev_energy(rec.basis, rec.states, params)
    diss = e_u + e_b
    cum = np.concatenate([[0.0], np.cumsum(
        0.5 * (diss[1:] + diss[:-1]) * np.diff(rec.times))])
    nsq = (rec.states**2).sum(axis=1)
    rel_t = rec.times - rec.times[0]
    log_stat = eta * nsq + 0.5 * eta * np.exp(-rel_t / 2.0) * cum
    return MomentProbe(times=rec.times, log_statistic=log_stat)


# ---------------------------------------------------------------------------
# Weighted path metric, upper bound along the straight line.
# ---------------------------------------------------------------------------

def rho_upper_bound(u1: SpectralState, u2: SpectralState, eta: float,
                    r: float) -> float:
    """Straight-line value of the weighted path length between two states.

    The weight along gamma(t) = (1-t) U1 + t U2 is exp(eta r ||gamma||^2);
    the squared norm is quadratic in t, and the 1-D integral is evaluated
    adaptively.  The infimum over paths is out of scope, so this is an upper
    bound for the metric.
    """
    if not 0.0 < r <= 1.0:
        raise ValueError("r must lie in (0, 1]")
    if eta <= 0:
        raise ValueError("eta must be positive")
    delta = u2.coeffs - u1.coeffs
    dist = float(np.linalg.norm(delta))
    if dist == 0.0:
        return 0.0
    a = float(delta @ delta)
    b = 2.0 * float(u1.coeffs @ delta)
    c = float(u1.coeffs @ u1.coeffs)
    w = eta * r
    value, _ = integrate.quad(lambda t: math.exp(w * (a * t * t + b * t + c)), 0.0, 1.0)
    return dist * value
