"""Constrained Ising chains along a single path of zeros.

Below a unique zero path the model reduces to a one-dimensional chain
``X_0, X_1, ...`` (the path spins) in an environment ``h_n = +-1`` given by
the images of the off-path neighbours.  A bond joining ``X_{n-1} = x`` and
``X_n = y`` carries the weight

    exp(beta*x*y + beta/2 * (h_{n-1}*x + h_n*y)),

and is forbidden outright when ``x == y == h_n`` (the cell would no longer be
a zero).  All 2x2 matrices here index rows and columns in the spin order
``(-, +)``; row ``x`` is the earlier spin, column ``y`` the later one.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import DegenerateProduct, DomainError, NotApplicable

SPIN_ORDER = (-1, 1)
CONTRACTION_TAGS = ("f1", "f2", "f3", "f4")


def spin_index(x: int) -> int:
    if x not in (-1, 1):
        raise DomainError(f"spin must be +1 or -1, got {x!r}")
    return (x + 1) // 2


def _check_beta(beta: float) -> None:
    if not (beta >= 0 and math.isfinite(beta)):
        raise DomainError(f"beta must be a finite nonnegative number, got {beta!r}")


@dataclass(frozen=True)
class ChainEnvironment:
    """Environment of a zero path: the root image sign and the flanks ``h_1..h_R``."""

    eta0_sign: int
    fields: tuple[int, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "fields", tuple(int(h) for h in self.fields))
        if self.eta0_sign not in (-1, 1):
            raise DomainError("eta0_sign must be +1 or -1")
        if not self.fields:
            raise DomainError("environment must contain at least one field")
        if any(h not in (-1, 1) for h in self.fields):
            raise DomainError("environment fields must be +1 or -1")

    def __len__(self) -> int:
        return len(self.fields)

    def full(self) -> tuple[int, ...]:
        """``h_0, h_1, ..., h_R`` with ``h_0`` taken to be the root sign."""
        return (self.eta0_sign,) + self.fields

    @classmethod
    def from_pattern(cls, pattern: str, length: int, eta0_sign: int = 1) -> "ChainEnvironment":
        """Repeat a pattern cyclically: ``"plus"``, ``"minus"``, ``"alt"`` or a string over ``+-``."""
        named = {"plus": "+", "minus": "-", "alt": "+-"}
        text = named.get(pattern.strip().lower(), pattern.strip())
        if not text or any(c not in "+-" for c in text):
            raise DomainError(f"environment pattern must be plus, minus, alt or a +/- string, got {pattern!r}")
        if length < 1:
            raise DomainError("environment length must be at least 1")
        signs = [1 if c == "+" else -1 for c in text]
        return cls(eta0_sign, tuple(signs[i % len(signs)] for i in range(length)))

    @classmethod
    def random(cls, rng: np.random.Generator, length: int) -> "ChainEnvironment":
        signs = rng.choice((-1, 1), size=length + 1)
        return cls(int(signs[0]), tuple(int(s) for s in signs[1:]))


def q_matrix(h_prev: int, h_cur: int, beta: float) -> np.ndarray:
    """Transfer matrix of the bond ``(n-1, n)`` with ``h_prev = h_{n-1}``, ``h_cur = h_n``."""
    _check_beta(beta)
    spin_index(h_prev), spin_index(h_cur)
    Q = np.empty((2, 2))
    for i, x in enumerate(SPIN_ORDER):
        for j, y in enumerate(SPIN_ORDER):
            if x == y == h_cur:
                Q[i, j] = 0.0  # hard-core exclusion
            else:
                Q[i, j] = math.exp(beta * x * y + 0.5 * beta * (h_prev * x + h_cur * y))
    return Q


def a_coeff(beta: float) -> float:
    """Transition weight ``a`` of the homogeneous reduced chain, in ``(0, 1)``."""
    _check_beta(beta)
    return math.exp(-beta) / (math.cosh(beta) + math.sqrt(math.exp(-beta) + math.sinh(beta) ** 2))


def p_plus(beta: float) -> np.ndarray:
    a = a_coeff(beta)
    return np.array([[a, 1.0 - a], [1.0, 0.0]])


def p_plus_power(n: int, beta: float) -> np.ndarray:
    """Closed form of ``p_plus(beta) ** n``.

    ``P^n = M + (a - 1)^n (I - M)`` where ``M`` is :func:`limit_matrix`.
    """
    if n < 1:
        raise DomainError("power must be at least 1")
    a = a_coeff(beta)
    r = a - 1.0
    c = 2.0 - a
    return np.array(
        [
            [(1.0 - r ** (n + 1)) / c, ((1.0 - a) + r ** (n + 1)) / c],
            [(1.0 - r**n) / c, ((1.0 - a) + r**n) / c],
        ]
    )


def limit_matrix(beta: float) -> np.ndarray:
    a = a_coeff(beta)
    row = [1.0 / (2.0 - a), (1.0 - a) / (2.0 - a)]
    return np.array([row, row])


def homogeneous_limit_magnetization(beta: float, sign: int = 1) -> float:
    """Closed-form root magnetization for one infinite zero path with constant flanks."""
    spin_index(sign)
    a = a_coeff(beta)
    return sign * math.exp(2 * beta) * a * (1.0 - a) / (2.0 - a)


def perron_limit_probability(beta: float) -> float:
    """``lim P[X_R = + | X_0]`` for the chain with ``h_n = +`` everywhere.

    Computed from the Perron eigenvectors of ``q_matrix(+, +)``, as an
    independent check on :func:`homogeneous_limit_magnetization`.
    """
    Q = q_matrix(1, 1, beta)
    vals, left = np.linalg.eig(Q.T)
    # every row of Q^n / lambda^n tends to a multiple of the left Perron vector
    l = np.abs(left[:, np.argmax(vals.real)])
    return float(l[1] / l.sum())


def _running_products(env: ChainEnvironment, R: int, beta: float):
    """Yield ``(n, P_n)`` for ``n = 1..R`` with ``P_n = P_{n-1} Q_n``, max-normalised."""
    _check_beta(beta)
    if R < 0 or R > len(env):
        raise DomainError(f"R must lie in 0..{len(env)}, got {R}")
    h = env.full()
    P = np.eye(2)
    for n in range(1, R + 1):
        P = P @ q_matrix(h[n - 1], h[n], beta)
        top = P.max()
        if not top > 0:
            raise DegenerateProduct("transfer-matrix product vanished")
        P = P / top
        yield n, P


def chain_product(env: ChainEnvironment, R: int, beta: float) -> np.ndarray:
    """Normalised ``P_R = Q_1 Q_2 ... Q_R`` (positive scale is irrelevant)."""
    P = np.eye(2)
    for _, P in _running_products(env, R, beta):
        pass
    return P


def chain_conditional_magnetization(env: ChainEnvironment, x0: int, R: int, beta: float) -> float:
    """``P[X_R = + | X_0 = x0]`` under the environment, in ``[0, 1]``."""
    row = chain_product(env, R, beta)[spin_index(x0)]
    total = row.sum()
    if not total > 0:
        raise DegenerateProduct("both entries of the conditioning row vanished")
    return float(row[1] / total)


@dataclass
class RatioTrajectory:
    """Entry ratios ``x_n = a_n/b_n`` and ``y_n = c_n/d_n`` of ``P_n = [[a, b], [c, d]]``.

    ``n0`` is the first ``n`` at which every entry of ``P_n`` is positive;
    ``steps``, ``x`` and ``y`` run over ``n = n0..R``.
    """

    n0: int | None
    steps: list[int] = field(default_factory=list)
    x: list[float] = field(default_factory=list)
    y: list[float] = field(default_factory=list)

    @property
    def diffs(self) -> list[float]:
        return [abs(a - b) for a, b in zip(self.x, self.y)]


def ratio_trajectories(env: ChainEnvironment, beta: float, R: int | None = None) -> RatioTrajectory:
    R = len(env) if R is None else R
    traj = RatioTrajectory(None)
    for n, P in _running_products(env, R, beta):
        if traj.n0 is None and np.all(P > 0):
            traj.n0 = n
        if traj.n0 is not None:
            traj.steps.append(n)
            traj.x.append(float(P[0, 0] / P[0, 1]))
            traj.y.append(float(P[1, 0] / P[1, 1]))
    return traj


def contraction_map(tag: str, x: float, beta: float) -> tuple[float, float]:
    """Ratio update attached to one transfer matrix, and its stated Lipschitz constant.

    ``f1``: ``1 + e^-b/x``; ``f2``: ``e^b + e^-2b/x``; ``f3``: ``1/(x + e^b)``;
    ``f4``: ``1/(x e^-2b + e^b)``.
    """
    _check_beta(beta)
    if not x > 0:
        raise DomainError(f"contraction maps act on x > 0, got {x!r}")
    eb = math.exp(beta)
    if tag == "f1":
        return 1.0 + 1.0 / (eb * x), 1.0 / eb
    if tag == "f2":
        return eb + 1.0 / (eb * eb * x), 1.0 / eb**2
    if tag == "f3":
        return 1.0 / (x + eb), 1.0 / eb**2
    if tag == "f4":
        return 1.0 / (x / eb**2 + eb), 1.0 / eb**2
    raise DomainError(f"unknown contraction map {tag!r}; expected one of {CONTRACTION_TAGS}")


# which map drives x_n for the bond with fields (h_{n-1}, h_n)
STEP_MAP = {(1, 1): "f1", (-1, 1): "f2", (-1, -1): "f3", (1, -1): "f4"}


def is_alternating(env: ChainEnvironment | Sequence[int]) -> bool:
    """True iff consecutive fields always differ, ``h_n = -h_{n+1}``."""
    h = env.fields if isinstance(env, ChainEnvironment) else tuple(env)
    return all(a == -b for a, b in zip(h, h[1:]))


@dataclass
class GapBound:
    actual: float
    bound: float
    n0: int | None

    @property
    def holds(self) -> bool:
        return self.actual <= self.bound * (1 + 1e-9)


def _bound_at(traj: RatioTrajectory, n: int, beta: float) -> float:
    if traj.n0 is None or n < traj.n0:
        return math.inf
    return math.exp(beta * (traj.n0 - n)) * traj.diffs[0]


def gap_bound(env: ChainEnvironment, R: int, beta: float) -> GapBound:
    """Actual ``|m_+ - m_-|`` against ``e^(n0 b) e^(-b R) |x_n0 - y_n0|``.

    The bound is infinite when no product up to ``R`` is entrywise positive.
    """
    if is_alternating(env):
        raise NotApplicable("the gap bound does not apply to alternating environments")
    actual = abs(chain_conditional_magnetization(env, 1, R, beta) - chain_conditional_magnetization(env, -1, R, beta))
    traj = ratio_trajectories(env, beta, R)
    return GapBound(actual, _bound_at(traj, R, beta), traj.n0)


TRAJECTORY_COLUMNS = ("n", "x_n", "y_n", "abs_diff", "bound_n", "m_plus", "m_minus")


def trajectory_rows(env: ChainEnvironment, beta: float, R: int | None = None) -> list[dict]:
    """One row per step ``n >= n0`` with ratios, their gap, the bound and both magnetisations."""
    R = len(env) if R is None else R
    traj = ratio_trajectories(env, beta, R)
    rows = []
    for n, x, y in zip(traj.steps, traj.x, traj.y):
        rows.append(
            {
                "n": n,
                "x_n": x,
                "y_n": y,
                "abs_diff": abs(x - y),
                "bound_n": _bound_at(traj, n, beta),
                "m_plus": chain_conditional_magnetization(env, 1, n, beta),
                "m_minus": chain_conditional_magnetization(env, -1, n, beta),
            }
        )
    return rows


def trajectory_csv(rows: list[dict]) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=TRAJECTORY_COLUMNS, lineterminator="\n")
    writer.writeheader()
    writer.writerows(rows)
    return buf.getvalue()
