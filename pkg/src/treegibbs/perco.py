"""Percolation of zeros in the majority-rule image.

A *path of zeros* to level ``k`` is a descending path ``r = i_0, ..., i_k``
with ``eta'(i_j) = 0`` for every ``j``; ``N_k`` counts them.  Alongside the
exact counts this module carries the surrogate birth-death model of ``N_R``
(its mean, moment generating function and deviation bound), Monte Carlo
estimates over exact Gibbs samples, and a diagnostic classification of
single configurations.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import tree
from .errors import DomainError
from .gibbs import FREE, Boundary, ModelParams, Sampler, derive_seed, make_rng
from .renorm import ImageField, majority_values

ZEBRA_BOUND = 2.0 / 9.0  # (1/3)^2 + (1/3)^2 at infinite temperature
CRITICAL_P = 0.5  # bond percolation threshold on the binary tree
GOOD_RATIO = 0.01
THETA_GRID = np.logspace(-3, 1, 50)
CHUNK = 512


@dataclass
class PathStats:
    counts: list[int]

    @property
    def survived(self) -> bool:
        return self.counts[-1] > 0

    @property
    def depth(self) -> int:
        return len(self.counts) - 1


def zero_path_counts(values: np.ndarray, depth: int) -> np.ndarray:
    """``N_0..N_depth`` for heap-ordered image values with any leading batch axes."""
    values = np.asarray(values)
    open_ = values[..., :1] == 0
    counts = [open_.sum(axis=-1)]
    for k in range(1, depth + 1):
        open_ = np.repeat(open_, 2, axis=-1) & (values[..., tree.level_slice(k)] == 0)
        counts.append(open_.sum(axis=-1))
    return np.stack(counts, axis=-1)


def count_zero_paths(eta: ImageField) -> PathStats:
    if eta.partial:
        raise DomainError("path counting needs the root image; got a partial field")
    return PathStats([int(c) for c in zero_path_counts(eta.values, eta.depth)])


# ---------------------------------------------------------------------------
# closed forms


def p_zero(beta: float) -> float:
    """Probability that a cell is mixed under the free measure."""
    if not beta >= 0:
        raise DomainError("beta must be nonnegative")
    return (2.0 + math.exp(-2 * beta)) / (math.exp(-beta) + math.exp(beta)) ** 2


def beta_one(tol: float = 1e-12) -> float:
    """The ``beta`` at which ``p_zero`` crosses 1/2, by bisection."""
    lo, hi = 0.0, 2.0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if p_zero(mid) > CRITICAL_P:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def _check_p(p: float) -> None:
    if not 0.0 <= p <= 1.0:
        raise DomainError(f"p must lie in [0, 1], got {p!r}")


def _check_R(R: int) -> None:
    if R < 1:
        raise DomainError("R must be at least 1")


def expected_paths_model(R: int, p: float) -> float:
    """Mean of the birth-death surrogate: ``p + (R - 1)(2p - 1)``."""
    _check_R(R)
    _check_p(p)
    return p + (R - 1) * (2 * p - 1)


def mgf_model(theta: float, p: float, R: int) -> float:
    """``(p^2 e^t + 2p(1-p) + (1-p)^2 e^-t)^R``."""
    _check_R(R)
    _check_p(p)
    return math.exp(_log_step(theta, p)) ** R


def _log_step(theta: float, p: float) -> float:
    # log of the one-step factor, written as log1p so that theta = 0 gives exactly 0
    return math.log1p(p * p * math.expm1(theta) + (1 - p) ** 2 * math.expm1(-theta))


def cumulant_model(theta: float, p: float, R: int) -> float:
    _check_R(R)
    _check_p(p)
    return R * _log_step(theta, p)


def deviation_bound(R: int, beta: float, theta: float) -> float:
    """Chernoff bound ``e^(theta (R - e^(beta R)))`` on ``P[N_R >= e^(beta R)]``."""
    if theta < 0:
        raise DomainError("theta must be nonnegative")
    return math.exp(theta * (R - math.exp(beta * R)))


def optimal_deviation_bound(R: int, beta: float, thetas: Sequence[float] = THETA_GRID) -> tuple[float, float]:
    """Smallest :func:`deviation_bound` over a theta grid, and the minimising theta."""
    best = min((deviation_bound(R, beta, t), t) for t in thetas)
    return best[0], float(best[1])


def mgf_general(k: int, theta: float, p: float, R: int) -> float:
    """``[e^-t (p (e^t - 1) + 1)^k]^R`` for a tree of order ``k``."""
    if k < 2:
        raise DomainError("tree order k must be at least 2")
    _check_R(R)
    _check_p(p)
    return (math.exp(-theta) * (p * (math.exp(theta) - 1) + 1) ** k) ** R


def survival_probability(p: float) -> float:
    """Survival of the binary Galton-Watson tree with edge probability ``p``.

    Solves ``s = (1 - p + p s)^2`` for the extinction probability ``s``.
    """
    _check_p(p)
    if p <= CRITICAL_P:
        return 0.0
    return 1.0 - ((1 - p) / p) ** 2


# ---------------------------------------------------------------------------
# per-configuration diagnostics


def _flank_scan(values: np.ndarray, depth: int):
    """Walk zero paths level by level, tracking the flank seen at each step.

    Yields ``(k, open_, flank)`` with ``open_`` marking zero vertices at level
    ``k`` reached through zeros and ``flank`` the image of each vertex's
    sibling, both shaped ``(..., 2**k)``.
    """
    open_ = values[..., :1] == 0
    for k in range(1, depth + 1):
        level = values[..., tree.level_slice(k)]
        open_ = np.repeat(open_, 2, axis=-1) & (level == 0)
        flank = level.reshape(level.shape[:-1] + (-1, 2))[..., ::-1].reshape(level.shape)
        yield k, open_, flank


def alternating_zero_paths(values: np.ndarray, depth: int) -> np.ndarray:
    """Number of zero paths to ``depth`` whose flanks ``h_1..h_depth`` are nonzero and alternate."""
    values = np.asarray(values)
    alive = prev = None
    for k, open_, flank in _flank_scan(values, depth):
        ok = open_ & (flank != 0)
        if k > 1:
            ok &= np.repeat(alive, 2, axis=-1) & (flank == -np.repeat(prev, 2, axis=-1))
        alive, prev = ok, flank
    return alive.sum(axis=-1)


@dataclass
class Classification:
    depth: int
    beta: float
    n_paths: int
    ratio: float
    alternating_paths: int

    @property
    def verdict(self) -> str:
        return "good" if self.ratio <= GOOD_RATIO and self.alternating_paths == 0 else "suspect"


def classify(eta: ImageField, beta: float) -> Classification:
    """Compare ``N_R`` with ``e^(beta R)`` and look for zebra (alternating) zero paths."""
    stats = count_zero_paths(eta)
    R = eta.depth
    alt = int(alternating_zero_paths(eta.values, R)) if R >= 1 else 0
    return Classification(R, beta, stats.counts[-1], stats.counts[-1] / math.exp(beta * R), alt)


# ---------------------------------------------------------------------------
# Monte Carlo


def thread_count() -> int:
    env = os.environ.get("TREEGIBBS_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise DomainError(f"TREEGIBBS_THREADS must be an integer, got {env!r}") from None
    return min(4, os.cpu_count() or 1)


def _replica_images(sampler: Sampler, seed: int, start: int, stop: int, depth: int) -> np.ndarray:
    n = tree.ball_size(sampler.depth)
    u = np.empty((stop - start, n))
    for row, i in enumerate(range(start, stop)):
        u[row] = make_rng(derive_seed(seed, i)).random(n)
    return majority_values(sampler.values_from_uniforms(u), depth)


def _map_replicas(fn, replicas: int, threads: int | None = None) -> list:
    """Run ``fn(start, stop)`` over replica chunks; results come back in replica order."""
    bounds = [(s, min(s + CHUNK, replicas)) for s in range(0, replicas, CHUNK)]
    threads = thread_count() if threads is None else threads
    if threads <= 1 or len(bounds) == 1:
        return [fn(a, b) for a, b in bounds]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(lambda ab: fn(*ab), bounds))


@dataclass
class MonteCarloSummary:
    beta: float
    depth: int
    replicas: int
    survival_freq: float
    mean_paths: float
    histogram: dict[int, int]
    mgf_emp: dict[float, float] = field(default_factory=dict)
    counts: np.ndarray | None = None

    @property
    def survival_stderr(self) -> float:
        q = self.survival_freq
        return math.sqrt(q * (1 - q) / self.replicas)


def monte_carlo_paths(
    beta: float,
    R: int,
    bc: Boundary = FREE,
    replicas: int = 1000,
    seed: int = 0,
    thetas: Sequence[float] = (),
    threads: int | None = None,
) -> MonteCarloSummary:
    """Sample spins of depth ``R + 1``, map to images of depth ``R`` and count zero paths."""
    if replicas < 1:
        raise DomainError("replicas must be at least 1")
    if R < 1:
        raise DomainError("R must be at least 1")
    params = ModelParams(beta)
    sampler = Sampler(R + 1, bc, params)

    def work(start: int, stop: int) -> np.ndarray:
        return zero_path_counts(_replica_images(sampler, seed, start, stop, R), R)[:, -1]

    counts = np.concatenate(_map_replicas(work, replicas, threads))
    values, freq = np.unique(counts, return_counts=True)
    mgf = {float(t): float(np.mean(np.exp(t * counts.astype(float)))) for t in thetas}
    return MonteCarloSummary(
        beta=beta,
        depth=R,
        replicas=replicas,
        survival_freq=float(np.mean(counts > 0)),
        mean_paths=float(counts.mean()),
        histogram={int(v): int(f) for v, f in zip(values, freq)},
        mgf_emp=mgf,
        counts=counts,
    )


@dataclass
class ZebraEstimate:
    beta: float
    depth: int
    trials: int
    events: int
    estimate: float
    stderr: float
    bound: float = ZEBRA_BOUND


def zebra_counts(values: np.ndarray, depth: int) -> tuple[np.ndarray, np.ndarray]:
    """Per configuration: zero paths to ``depth`` with alternating flanks up to ``depth - 1``,
    and how many of those also alternate at the last step.
    """
    if depth < 2:
        raise DomainError("the one-step zebra statistic needs depth >= 2")
    values = np.asarray(values)
    alive = prev = None
    for k, open_, flank in _flank_scan(values, depth):
        if k < depth:
            ok = open_ & (flank != 0)
            if k > 1:
                ok &= np.repeat(alive, 2, axis=-1) & (flank == -np.repeat(prev, 2, axis=-1))
            alive, prev = ok, flank
        else:
            trial = open_ & np.repeat(alive, 2, axis=-1)
            event = trial & (flank * np.repeat(prev, 2, axis=-1) == -1)
    return trial.sum(axis=-1), event.sum(axis=-1)


def zebra_one_step(
    beta: float,
    samples: int,
    seed: int = 0,
    depth: int = 4,
    bc: Boundary = FREE,
    threads: int | None = None,
) -> ZebraEstimate:
    """Estimate ``P[h_R h_(R-1) = -1 | zero path to R, flanks alternating before R]``.

    Every zero path of every sampled image is one trial; the standard error
    treats each sample as a cluster (ratio estimator, delta method).
    """
    if samples < 2:
        raise DomainError("need at least two samples")
    params = ModelParams(beta)
    sampler = Sampler(depth + 1, bc, params)

    def work(start: int, stop: int) -> np.ndarray:
        trials, events = zebra_counts(_replica_images(sampler, seed, start, stop, depth), depth)
        return np.stack([trials, events], axis=1)

    te = np.concatenate(_map_replicas(work, samples, threads)).astype(float)
    trials, events = te[:, 0], te[:, 1]
    total = trials.sum()
    if total == 0:
        return ZebraEstimate(beta, depth, 0, 0, math.nan, math.nan)
    est = events.sum() / total
    resid = events - est * trials
    stderr = math.sqrt(samples / (samples - 1) * (resid**2).sum()) / total
    return ZebraEstimate(beta, depth, int(total), int(events.sum()), float(est), float(stderr))
