"""Brute-force ground truth by exhaustive enumeration.

Nothing here reuses the message-passing code: energies are summed bond by
bond over every configuration, images are recomputed cell by cell, and
chains are enumerated over all sign strings.  Volume caps keep each call
around a second; they can be raised with a warning.
"""

from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import tree
from .errors import DomainError, InfeasibleConditioning, VolumeTooLarge
from .gibbs import Boundary, ModelParams

log = logging.getLogger(__name__)

MAX_TREE_DEPTH = 3
MAX_CHAIN_LENGTH = 14


@dataclass
class ExactDistribution:
    """Configurations (one per row, heap order) and their probabilities."""

    support: np.ndarray
    weights: np.ndarray

    def __post_init__(self) -> None:
        if abs(self.weights.sum() - 1.0) > 1e-12 or np.any(self.weights < 0):
            raise ValueError("weights must be a probability vector")

    def marginal(self, index: int, value: int) -> float:
        return float(self.weights[self.support[:, index] == value].sum())

    def as_dict(self) -> dict[tuple[int, ...], float]:
        return {tuple(int(x) for x in row): float(w) for row, w in zip(self.support, self.weights)}


def _check_cap(value: int, cap: int, default: int, what: str) -> None:
    if value > cap:
        raise VolumeTooLarge(f"{what} {value} exceeds the oracle cap {cap}")
    if cap > default and value > default:
        log.warning("oracle %s %d is above the default cap %d; this may be slow", what, value, default)


def all_spin_configurations(n: int) -> np.ndarray:
    return np.array(list(itertools.product((-1, 1), repeat=n)), dtype=np.int8)


def _edges(depth: int) -> list[tuple[int, int]]:
    out = []
    for v in tree.ball(depth - 1) if depth > 0 else []:
        for c in tree.children(v):
            out.append((tree.heap_index(v), tree.heap_index(c)))
    return out


def brute_energies(configs: np.ndarray, depth: int, bc: Boundary, params: ModelParams) -> np.ndarray:
    """Hamiltonian of every row of ``configs``, summed bond by bond."""
    s = configs.astype(float)
    energy = np.zeros(len(configs))
    for i, j in _edges(depth):
        energy -= params.coupling * s[:, i] * s[:, j]
    energy -= params.field * s.sum(axis=1)
    if bc.kind != "free":
        boundary = {
            "plus": np.ones(2 ** (depth + 1)),
            "minus": -np.ones(2 ** (depth + 1)),
            "fixed": bc.spins.astype(float) if bc.spins is not None else None,
        }[bc.kind]
        for pos, leaf in enumerate(tree.sphere(depth)):
            i = tree.heap_index(leaf)
            energy -= params.coupling * s[:, i] * (boundary[2 * pos] + boundary[2 * pos + 1])
    return energy


def _boltzmann(depth: int, bc: Boundary, params: ModelParams) -> tuple[np.ndarray, np.ndarray, float]:
    configs = all_spin_configurations(tree.ball_size(depth))
    energy = brute_energies(configs, depth, bc, params)
    expo = -params.beta * energy
    shift = expo.max()
    w = np.exp(expo - shift)
    # a priori weight 1/2 per site
    log_z = math.log(w.sum()) + shift - tree.ball_size(depth) * math.log(2.0)
    return configs, w / w.sum(), log_z


def enumerate_gibbs(
    depth: int, bc: Boundary, params: ModelParams, max_depth: int = MAX_TREE_DEPTH
) -> ExactDistribution:
    _check_cap(depth, max_depth, MAX_TREE_DEPTH, "tree depth")
    configs, probs, _ = _boltzmann(depth, bc, params)
    return ExactDistribution(configs, probs)


def brute_partition_function(
    depth: int, bc: Boundary, params: ModelParams, max_depth: int = MAX_TREE_DEPTH
) -> float:
    _check_cap(depth, max_depth, MAX_TREE_DEPTH, "tree depth")
    return math.exp(_boltzmann(depth, bc, params)[2])


def brute_images(configs: np.ndarray, depth: int) -> np.ndarray:
    """Majority-rule image of each configuration on ``ball(depth)``, cell by cell."""
    out = np.zeros((len(configs), tree.ball_size(depth)), dtype=np.int8)
    for v in tree.ball(depth):
        c0, c1 = tree.children(v)
        total = configs[:, v.index].astype(int) + configs[:, c0.index] + configs[:, c1.index]
        out[:, v.index] = np.where(total == 3, 1, np.where(total == -3, -1, 0))
    return out


def enumerate_image(
    depth: int, bc: Boundary, params: ModelParams, max_depth: int = MAX_TREE_DEPTH
) -> ExactDistribution:
    """Pushforward of ``enumerate_gibbs(depth + 1)`` through the majority rule."""
    _check_cap(depth + 1, max_depth, MAX_TREE_DEPTH, "tree depth")
    configs, probs, _ = _boltzmann(depth + 1, bc, params)
    images = brute_images(configs, depth)
    acc: dict[bytes, float] = {}
    rows: dict[bytes, np.ndarray] = {}
    for row, p in zip(images, probs):
        key = row.tobytes()
        acc[key] = acc.get(key, 0.0) + p
        rows[key] = row
    keys = sorted(acc)
    return ExactDistribution(np.array([rows[k] for k in keys]), np.array([acc[k] for k in keys]))


def oracle_conditional_magnetization(
    eta_values: Sequence[int],
    eta_depth: int,
    tail: Boundary,
    depth: int,
    params: ModelParams,
    max_depth: int = MAX_TREE_DEPTH,
) -> float:
    """``E[sigma'_r | image = eta on ball(R) minus root]`` by filtering all configurations.

    ``eta_values`` are heap ordered on ``ball(eta_depth)``; entry 0 (the root)
    is ignored.
    """
    _check_cap(depth, max_depth, MAX_TREE_DEPTH, "tree depth")
    if depth < eta_depth + 1:
        raise DomainError("tail depth must be at least R + 1")
    configs, probs, _ = _boltzmann(depth, tail, params)
    images = brute_images(configs, depth - 1)
    eta = np.asarray(eta_values, dtype=np.int8)
    n = tree.ball_size(eta_depth)
    keep = np.all(images[:, 1:n] == eta[1:n], axis=1)
    mass = probs[keep].sum()
    if mass <= 0:
        raise InfeasibleConditioning("no configuration maps onto the conditioning image")
    return float((probs[keep] * images[keep, 0]).sum() / mass)


def oracle_conditional_table(
    eta_depth: int,
    tail: Boundary,
    depth: int,
    params: ModelParams,
    max_depth: int = MAX_TREE_DEPTH,
) -> dict[tuple[int, ...], float]:
    """Conditional root-image magnetization for every feasible event at once.

    Keys are the image values on ``ball(eta_depth)`` without the root, in
    heap order; one enumeration serves all of them.
    """
    _check_cap(depth, max_depth, MAX_TREE_DEPTH, "tree depth")
    if depth < eta_depth + 1:
        raise DomainError("tail depth must be at least R + 1")
    configs, probs, _ = _boltzmann(depth, tail, params)
    images = brute_images(configs, depth - 1)
    n = tree.ball_size(eta_depth)
    mass: dict[tuple[int, ...], float] = {}
    moment: dict[tuple[int, ...], float] = {}
    for row, p in zip(images, probs):
        key = tuple(int(x) for x in row[1:n])
        mass[key] = mass.get(key, 0.0) + p
        moment[key] = moment.get(key, 0.0) + p * int(row[0])
    return {k: moment[k] / mass[k] for k in mass if mass[k] > 0}


def chain_weight(xs: Sequence[int], x0: int, fields: Sequence[int], beta: float) -> float:
    """Weight of the constrained chain path ``x0, x_1, ..., x_R``.

    Bond ``n`` joins ``x_{n-1}`` and ``x_n`` with weight
    ``exp(beta x_{n-1} x_n + beta/2 (h_{n-1} x_{n-1} + h_n x_n))`` and is
    forbidden outright when ``x_{n-1} == x_n == h_n``.  ``fields`` holds
    ``h_0, ..., h_R``.
    """
    prev = x0
    logw = 0.0
    for n, x in enumerate(xs, start=1):
        if prev == x == fields[n]:
            return 0.0
        logw += beta * prev * x + 0.5 * beta * (fields[n - 1] * prev + fields[n] * x)
        prev = x
    return math.exp(logw)


def oracle_chain(
    fields: Sequence[int], length: int, beta: float, max_length: int = MAX_CHAIN_LENGTH
) -> tuple[float, float]:
    """``(P[X_R = + | X_0 = +], P[X_R = + | X_0 = -])`` by enumerating every path.

    ``fields`` holds ``h_0, ..., h_R`` (at least ``length + 1`` entries).
    """
    _check_cap(length, max_length, MAX_CHAIN_LENGTH, "chain length")
    if len(fields) < length + 1:
        raise DomainError("need h_0..h_R")
    out = []
    for x0 in (1, -1):
        total = plus = 0.0
        for xs in itertools.product((-1, 1), repeat=length):
            w = chain_weight(xs, x0, fields, beta)
            total += w
            if xs and xs[-1] == 1:
                plus += w
        if total <= 0:
            raise InfeasibleConditioning("every chain path is excluded")
        if length == 0:
            plus = total if x0 == 1 else 0.0
        out.append(plus / total)
    return out[0], out[1]
