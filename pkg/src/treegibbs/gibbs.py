"""Exact finite-volume Ising measures on the rooted binary tree.

Everything here is leaf-to-root message passing on ``ball(R)`` with the
boundary spins living on ``sphere(R + 1)``.  Spin index convention:
index 0 is spin -1, index 1 is spin +1.

Each site carries the a priori weight 1/2, so ``Z == 1`` at ``beta == 0``.
Messages are normalised level by level and the logs of the normalisers are
accumulated, which keeps depth-40 partition functions finite.

For ``Plus``/``Minus``/``Free`` boundaries every vertex of a level sees the
same subtree, so a level is stored as a single ``(1, 2)`` row and broadcast.
Only ``Fixed`` boundaries need one row per vertex.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import tree
from .errors import DomainError

SPINS = np.array([-1, 1])


@dataclass(frozen=True)
class ModelParams:
    """Inverse temperature, ferromagnetic coupling and uniform field."""

    beta: float
    coupling: float = 1.0
    field: float = 0.0

    def __post_init__(self) -> None:
        if not (self.beta >= 0 and math.isfinite(self.beta)):
            raise DomainError(f"beta must be a finite nonnegative number, got {self.beta}")
        if not self.coupling >= 0:
            raise DomainError(f"coupling must be nonnegative (ferromagnetic), got {self.coupling}")


@dataclass(frozen=True, eq=False)
class Boundary:
    """Boundary condition on ``sphere(R + 1)``: plus, minus, free or fixed spins."""

    kind: str
    spins: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self) -> None:
        if self.kind not in ("plus", "minus", "free", "fixed"):
            raise DomainError(f"unknown boundary kind {self.kind!r}")
        if self.kind == "fixed":
            if self.spins is None:
                raise DomainError("fixed boundary needs spins")
            s = np.asarray(self.spins, dtype=np.int8)
            if s.ndim != 1 or not np.all(np.abs(s) == 1):
                raise DomainError("fixed boundary spins must be a 1-d array of +/-1")
            n = s.size
            if n < 2 or n & (n - 1):
                raise DomainError("fixed boundary must cover a whole sphere (2**(R+1) spins)")
            object.__setattr__(self, "spins", s)

    @classmethod
    def fixed(cls, spins: Sequence[int]) -> "Boundary":
        return cls("fixed", np.asarray(spins, dtype=np.int8))

    @classmethod
    def parse(cls, name: str) -> "Boundary":
        name = name.strip().lower()
        if name not in ("plus", "minus", "free"):
            raise DomainError(f"boundary must be plus, minus or free, got {name!r}")
        return cls(name)

    @property
    def homogeneous(self) -> bool:
        return self.kind != "fixed"

    def flipped(self) -> "Boundary":
        if self.kind == "plus":
            return MINUS
        if self.kind == "minus":
            return PLUS
        if self.kind == "free":
            return FREE
        return Boundary.fixed(-self.spins)

    def leaf_fields(self, depth: int) -> np.ndarray:
        """Sum of the boundary spins adjacent to each vertex of ``sphere(depth)``.

        Shape ``(1,)`` for homogeneous conditions, ``(2**depth,)`` for fixed ones.
        """
        if self.kind == "plus":
            return np.array([2.0])
        if self.kind == "minus":
            return np.array([-2.0])
        if self.kind == "free":
            return np.array([0.0])
        if self.spins.size != 2 ** (depth + 1):
            raise DomainError(
                f"fixed boundary has {self.spins.size} spins, sphere({depth + 1}) needs {2 ** (depth + 1)}"
            )
        s = self.spins.astype(float)
        return s[0::2] + s[1::2]

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Boundary):
            return NotImplemented
        if self.kind != other.kind:
            return False
        return self.kind != "fixed" or np.array_equal(self.spins, other.spins)

    def __hash__(self) -> int:
        return hash((self.kind, None if self.spins is None else self.spins.tobytes()))

    def __str__(self) -> str:
        return self.kind


PLUS = Boundary("plus")
MINUS = Boundary("minus")
FREE = Boundary("free")


class SpinField:
    """A +/-1 assignment on ``ball(depth)``, stored in heap order."""

    __slots__ = ("depth", "values")

    def __init__(self, depth: int, values: np.ndarray):
        values = np.asarray(values, dtype=np.int8)
        if depth < 0:
            raise DomainError("depth must be nonnegative")
        if values.shape != (tree.ball_size(depth),):
            raise DomainError(f"spin field of depth {depth} needs {tree.ball_size(depth)} values")
        if not np.all(np.abs(values) == 1):
            raise DomainError("spin values must be +/-1")
        self.depth = depth
        self.values = values

    @classmethod
    def constant(cls, depth: int, spin: int) -> "SpinField":
        return cls(depth, np.full(tree.ball_size(depth), spin, dtype=np.int8))

    def __getitem__(self, v: tree.Vertex | str) -> int:
        if isinstance(v, str):
            v = tree.parse(v)
        return int(self.values[v.index])

    def level(self, k: int) -> np.ndarray:
        return self.values[tree.level_slice(k)]

    def restrict(self, depth: int) -> "SpinField":
        if depth > self.depth:
            raise DomainError("cannot restrict to a deeper ball")
        return SpinField(depth, self.values[: tree.ball_size(depth)].copy())

    def __neg__(self) -> "SpinField":
        return SpinField(self.depth, -self.values)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, SpinField):
            return NotImplemented
        return self.depth == other.depth and np.array_equal(self.values, other.values)

    def __repr__(self) -> str:
        return f"SpinField(depth={self.depth}, values={self.values.tolist()})"


# ---------------------------------------------------------------------------
# message passing


def edge_kernel(params: ModelParams) -> np.ndarray:
    """``K[s, t] = 1/2 exp(beta*J*s*t + beta*h*t)``: parent spin s, child spin t."""
    b = params.beta
    return 0.5 * np.exp(b * params.coupling * np.outer(SPINS, SPINS) + b * params.field * SPINS[None, :])


def leaf_messages(depth: int, bc: Boundary, params: ModelParams) -> np.ndarray:
    """Weight of the boundary bonds as a function of the leaf spin."""
    f = bc.leaf_fields(depth)
    return np.exp(params.beta * params.coupling * np.outer(f, SPINS))


def child_pairs(msg: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Split a level's messages into (left children, right children)."""
    if msg.shape[0] == 1:
        return msg, msg
    return msg[0::2], msg[1::2]


def _normalise(msg: np.ndarray, multiplicity: int) -> tuple[np.ndarray, float]:
    norm = msg.max(axis=1, keepdims=True)
    if np.any(norm <= 0):
        raise ArithmeticError("vanishing message")
    log_norm = float(np.log(norm).sum()) * multiplicity
    return msg / norm, log_norm


@dataclass
class Messages:
    """Normalised subtree messages ``Z_v(s)`` for every level of ``ball(depth)``."""

    depth: int
    levels: list[np.ndarray]  # levels[k] has shape (1, 2) or (2**k, 2)
    log_scale: float  # sum of log normalisers removed from the levels

    def at(self, k: int) -> np.ndarray:
        return self.levels[k]


def upward(depth: int, bc: Boundary, params: ModelParams) -> Messages:
    K = edge_kernel(params)
    msg = leaf_messages(depth, bc, params)
    levels: list[np.ndarray] = [None] * (depth + 1)  # type: ignore[list-item]
    log_scale = 0.0
    for k in range(depth, -1, -1):
        if k < depth:
            left, right = child_pairs(levels[k + 1])
            msg = (left @ K.T) * (right @ K.T)
        mult = 2**k if msg.shape[0] == 1 else 1
        msg, ls = _normalise(msg, mult)
        levels[k] = msg
        log_scale += ls
    return Messages(depth, levels, log_scale)


def _root_weights(msgs: Messages, params: ModelParams) -> np.ndarray:
    prior = 0.5 * np.exp(params.beta * params.field * SPINS)
    return prior * msgs.levels[0][0]


def log_partition_function(depth: int, bc: Boundary, params: ModelParams) -> float:
    msgs = upward(depth, bc, params)
    return float(np.log(_root_weights(msgs, params).sum()) + msgs.log_scale)


def partition_function(depth: int, bc: Boundary, params: ModelParams) -> float:
    """``Z = sum_sigma 2**-|ball| exp(-beta H(sigma | bc))``."""
    return math.exp(log_partition_function(depth, bc, params))


def root_marginal(depth: int, bc: Boundary, params: ModelParams) -> float:
    """Exact probability that the root spin is +1."""
    w = _root_weights(upward(depth, bc, params), params)
    return float(w[1] / w.sum())


def root_magnetization(depth: int, bc: Boundary, params: ModelParams) -> float:
    return 2.0 * root_marginal(depth, bc, params) - 1.0


def hamiltonian(sigma: SpinField, bc: Boundary, params: ModelParams) -> float:
    """``-J sum_edges s_i s_j - h sum_i s_i`` plus the bonds to the boundary."""
    s = sigma.values.astype(float)
    n_inner = tree.ball_size(sigma.depth - 1) if sigma.depth > 0 else 0
    idx = np.arange(n_inner)
    bonds = s[idx] * (s[2 * idx + 1] + s[2 * idx + 2])
    energy = -params.coupling * bonds.sum() - params.field * s.sum()
    if bc.kind != "free":
        leaves = sigma.level(sigma.depth).astype(float)
        energy -= params.coupling * float((leaves * bc.leaf_fields(sigma.depth)).sum())
    return float(energy)


# ---------------------------------------------------------------------------
# exact ancestral sampling


class Sampler:
    """Exact top-down sampler for one ``(depth, bc, params)`` triple.

    The upward messages are computed once; each draw then costs a single
    uniform vector of length ``|ball(depth)|``.
    """

    def __init__(self, depth: int, bc: Boundary, params: ModelParams):
        self.depth = depth
        self.bc = bc
        self.params = params
        msgs = upward(depth, bc, params)
        w = _root_weights(msgs, params)
        self.p_root_plus = float(w[1] / w.sum())
        K = edge_kernel(params)
        # cond[k][row, s] = P(child spin = +1 | parent spin index s) for level-k children
        self.cond: list[np.ndarray] = [np.empty((0, 2))]
        for k in range(1, depth + 1):
            joint = K[None, :, :] * msgs.levels[k][:, None, :]  # (n, s, t)
            self.cond.append(joint[:, :, 1] / joint.sum(axis=2))

    def draw_values(self, rng: np.random.Generator) -> np.ndarray:
        u = rng.random(tree.ball_size(self.depth))
        return self.values_from_uniforms(u)

    def values_from_uniforms(self, u: np.ndarray) -> np.ndarray:
        """Map uniforms (heap order, any leading batch axes) to spins."""
        out = np.empty(u.shape, dtype=np.int8)
        out[..., 0] = np.where(u[..., 0] < self.p_root_plus, 1, -1)
        for k in range(1, self.depth + 1):
            parents = out[..., tree.level_slice(k - 1)]
            pidx = np.repeat((parents > 0).astype(np.intp), 2, axis=-1)
            cond = self.cond[k]
            if cond.shape[0] == 1:
                p = cond[0][pidx]
            else:
                p = cond[np.arange(cond.shape[0]), pidx]
            out[..., tree.level_slice(k)] = np.where(u[..., tree.level_slice(k)] < p, 1, -1)
        return out

    def draw(self, rng: np.random.Generator) -> SpinField:
        return SpinField(self.depth, self.draw_values(rng))


def sample(depth: int, bc: Boundary, params: ModelParams, seed: int) -> SpinField:
    """One exact sample from the finite-volume Gibbs measure; deterministic in ``seed``."""
    return Sampler(depth, bc, params).draw(make_rng(seed))


# ---------------------------------------------------------------------------
# seeds

_MASK64 = (1 << 64) - 1


def splitmix64(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & _MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK64
    return x ^ (x >> 31)


def derive_seed(master: int, replica: int) -> int:
    """Per-replica seed: ``splitmix64(splitmix64(master) XOR replica)``.

    Replica ``i`` always gets the same stream whatever the replica count or
    the thread that runs it.  Hashing the master first keeps nearby masters
    (say 1 and 10) from sharing the same set of replica streams.
    """
    return splitmix64((splitmix64(master & _MASK64) ^ replica) & _MASK64)


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed & _MASK64))


# ---------------------------------------------------------------------------
# critical points


def beta_c(k: int = tree.ORDER) -> float:
    """Ferromagnetic critical inverse temperature ``arctanh(1/k)``."""
    if k < 2:
        raise DomainError("tree order k must be at least 2")
    return math.atanh(1.0 / k)


def beta_sg(k: int = tree.ORDER) -> float:
    """Free-measure extremality threshold ``arctanh(1/sqrt(k))``."""
    if k < 2:
        raise DomainError("tree order k must be at least 2")
    return math.atanh(1.0 / math.sqrt(k))
