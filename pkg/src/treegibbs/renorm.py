"""Overlapping-cell majority rule and exact inference for the image measure.

The image spin of vertex ``j`` is read off the cell ``{j, j0, j1}``: +1 or -1
when the three spins agree, 0 otherwise.  A spin field of depth ``R + 1`` is
therefore needed to produce an image field of depth ``R``.

Conditional expectations of the image measure are computed exactly by the
same leaf-to-root recursion as in :mod:`treegibbs.gibbs`, except that at a
constrained vertex the two child messages are combined only over the child
spin pairs whose cell maps to the prescribed image value.
"""

from __future__ import annotations

from typing import Iterable, Sequence

import mpmath
import numpy as np

from . import tree
from .errors import DomainError, InfeasibleConditioning
from .gibbs import (
    FREE,
    MINUS,
    PLUS,
    SPINS,
    Boundary,
    ModelParams,
    SpinField,
    child_pairs,
    edge_kernel,
    leaf_messages,
    make_rng,
    upward,
)

FEASIBILITY_FLOOR = 1e-300


class ImageField:
    """A {-1, 0, +1} assignment on ``ball(depth)`` in heap order.

    A *partial* field leaves the root unassigned (the conditioning event of a
    conditional magnetization); its stored root value is meaningless.
    """

    __slots__ = ("depth", "values", "partial")

    def __init__(self, depth: int, values: np.ndarray, partial: bool = False):
        values = np.array(values, dtype=np.int8)  # copy: a partial field rewrites its root
        if depth < 0:
            raise DomainError("depth must be nonnegative")
        if values.shape != (tree.ball_size(depth),):
            raise DomainError(f"image field of depth {depth} needs {tree.ball_size(depth)} values")
        if np.any(np.abs(values) > 1):
            raise DomainError("image values must lie in {-1, 0, 1}")
        self.depth = depth
        self.values = values
        self.partial = partial
        if partial:
            self.values[0] = 0

    @classmethod
    def constant(cls, depth: int, value: int, partial: bool = False) -> "ImageField":
        return cls(depth, np.full(tree.ball_size(depth), value, dtype=np.int8), partial)

    def __getitem__(self, v: tree.Vertex | str) -> int | None:
        if isinstance(v, str):
            v = tree.parse(v)
        if self.partial and v.is_root:
            return None
        return int(self.values[v.index])

    def level(self, k: int) -> np.ndarray:
        return self.values[tree.level_slice(k)]

    def as_partial(self) -> "ImageField":
        return ImageField(self.depth, self.values.copy(), partial=True)

    def truncate(self, depth: int) -> "ImageField":
        if depth > self.depth:
            raise DomainError("cannot truncate to a deeper ball")
        return ImageField(depth, self.values[: tree.ball_size(depth)].copy(), self.partial)

    def __neg__(self) -> "ImageField":
        return ImageField(self.depth, -self.values, self.partial)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, ImageField):
            return NotImplemented
        return (
            self.depth == other.depth
            and self.partial == other.partial
            and np.array_equal(self.values[int(self.partial):], other.values[int(other.partial):])
        )

    def __repr__(self) -> str:
        vals = self.values.tolist()
        if self.partial:
            vals[0] = "?"
        return f"ImageField(depth={self.depth}, values={vals})"


# ---------------------------------------------------------------------------
# transformations


def majority_values(spins: np.ndarray, depth: int) -> np.ndarray:
    """Image values on ``ball(depth)`` from heap-ordered spins (batch axes allowed)."""
    n = tree.ball_size(depth)
    if spins.shape[-1] < tree.ball_size(depth + 1):
        raise DomainError(f"an image of depth {depth} needs spins down to depth {depth + 1}")
    idx = np.arange(n)
    s = spins[..., idx].astype(np.int16) + spins[..., 2 * idx + 1] + spins[..., 2 * idx + 2]
    return (s // 3).astype(np.int8) * (np.abs(s) == 3)


def majority_image(sigma: SpinField, depth: int | None = None) -> ImageField:
    """Deterministic majority rule; consumes depth ``R + 1`` and emits depth ``R``."""
    if depth is None:
        depth = sigma.depth - 1
    if depth < 0 or depth + 1 > sigma.depth:
        raise DomainError(f"spin field of depth {sigma.depth} cannot produce an image of depth {depth}")
    return ImageField(depth, majority_values(sigma.values, depth))


def stochastic_image(
    sigma: SpinField, epsilon: float, seed: int, depth: int | None = None
) -> ImageField:
    """Majority rule where every cell is independently blanked to 0 with probability ``epsilon``."""
    if not 0.0 <= epsilon <= 1.0:
        raise DomainError(f"epsilon must lie in [0, 1], got {epsilon}")
    image = majority_image(sigma, depth)
    blank = make_rng(seed).random(image.values.size) < epsilon
    image.values[blank] = 0
    return image


# ---------------------------------------------------------------------------
# constrained inference


def _same_flip(msg: np.ndarray, K: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Split ``sum_t K[s, t] Z(t)`` into the ``t == s`` and ``t == -s`` terms."""
    same = msg * np.diagonal(K)
    flip = msg[:, ::-1] * np.array([K[0, 1], K[1, 0]], dtype=msg.dtype)
    return same, flip


def _cell_messages(
    left: np.ndarray, right: np.ndarray, K: np.ndarray, constraint: np.ndarray | None
) -> np.ndarray:
    """Parent messages given child messages and optional image constraints."""
    a0, b0 = _same_flip(left, K)
    a1, b1 = _same_flip(right, K)
    if constraint is None:
        return (a0 + b0) * (a1 + b1)
    n = constraint.size
    a0, b0, a1, b1 = (np.broadcast_to(x, (n, 2)) for x in (a0, b0, a1, b1))
    mono = a0 * a1
    # non-monochromatic cells, summed without cancellation
    mixed = a0 * b1 + b0 * a1 + b0 * b1
    out = np.where((constraint == 0)[:, None], mixed, 0)
    out[:, 1] = np.where(constraint == 1, mono[:, 1], out[:, 1])
    out[:, 0] = np.where(constraint == -1, mono[:, 0], out[:, 0])
    return out


def _normalise_rows(msg: np.ndarray) -> np.ndarray:
    norm = msg.max(axis=1, keepdims=True)
    if np.any(norm <= FEASIBILITY_FLOOR):
        raise InfeasibleConditioning("conditioning event has probability zero")
    return msg / norm


def extend_with_tail(eta: ImageField, tail: Boundary, depth: int) -> ImageField:
    """Element of the neighbourhood of ``eta`` selected by a Plus/Minus tail.

    The result agrees with ``eta`` on ``ball(R)`` and extends it down to level
    ``depth - 1``: a vertex copies its parent's image when that is nonzero
    (a monochromatic cell forces its children's spins, so only that sign
    stays feasible) and takes the tail's sign below zeros.  For the null
    configuration this is the all-plus or all-minus image beyond ``R``.
    Free and fixed tails leave the far images unconstrained.
    """
    if tail.kind not in ("plus", "minus") or depth <= eta.depth + 1:
        return eta
    sign = 1 if tail.kind == "plus" else -1
    values = np.empty(tree.ball_size(depth - 1), dtype=np.int8)
    values[: tree.ball_size(eta.depth)] = eta.values
    for k in range(eta.depth + 1, depth):
        parents = np.repeat(values[tree.level_slice(k - 1)], 2)
        values[tree.level_slice(k)] = np.where(parents != 0, parents, sign)
    return ImageField(depth - 1, values, eta.partial)


def root_cell_joint(
    eta: ImageField | None,
    tail: Boundary,
    depth: int,
    params: ModelParams,
    dtype=np.float64,
    image_tail: bool = True,
) -> np.ndarray:
    """Exact law of ``(sigma_r, sigma_0, sigma_1)`` given the image off the root.

    ``eta`` constrains the image on ``ball(eta.depth) \\ {root}``.  The spin
    tree is closed at ``depth`` with the boundary ``tail`` on
    ``sphere(depth + 1)``.  With ``image_tail`` a Plus/Minus tail also fixes
    the image on the levels between ``eta.depth`` and ``depth`` (see
    :func:`extend_with_tail`); otherwise those images are left free.
    Returns a normalised ``(2, 2, 2)`` array indexed by spin indices.
    """
    if depth < 1:
        raise DomainError("depth must be at least 1")
    if eta is not None:
        if depth < eta.depth + 1:
            raise DomainError(f"tail depth D={depth} must be at least R+1={eta.depth + 1}")
        if image_tail:
            eta = extend_with_tail(eta, tail, depth)
    R = 0 if eta is None else eta.depth
    K = edge_kernel(params).astype(dtype)
    msg = _normalise_rows(leaf_messages(depth, tail, params).astype(dtype))
    for k in range(depth - 1, 0, -1):
        left, right = child_pairs(msg)
        constraint = eta.level(k) if (eta is not None and k <= R) else None
        msg = _normalise_rows(_cell_messages(left, right, K, constraint))
    left, right = child_pairs(msg)
    prior = (0.5 * np.exp(params.beta * params.field * SPINS)).astype(dtype)
    z0 = K * left[0][None, :]  # (s, t0)
    z1 = K * right[0][None, :]  # (s, t1)
    joint = prior[:, None, None] * z0[:, :, None] * z1[:, None, :]
    total = joint.sum()
    if not total > FEASIBILITY_FLOOR:
        raise InfeasibleConditioning("conditioning event has probability zero")
    return joint / total


def _magnetization(joint: np.ndarray):
    return joint[1, 1, 1] - joint[0, 0, 0]


def conditional_image_magnetization(
    eta: ImageField,
    tail: Boundary,
    depth: int,
    params: ModelParams,
    dtype=np.float64,
    image_tail: bool = True,
) -> float:
    """``nu[sigma'_r | sigma' = eta off the root]`` on the depth-``D`` tree closed by ``tail``."""
    return float(_magnetization(root_cell_joint(eta, tail, depth, params, dtype, image_tail)))


def image_root_law(params: ModelParams, depth: int, bc: Boundary = FREE) -> dict[int, float]:
    """Unconditioned law of the root image spin on the depth-``D`` tree."""
    joint = root_cell_joint(None, bc, depth, params)
    plus, minus = float(joint[1, 1, 1]), float(joint[0, 0, 0])
    return {-1: minus, 0: 1.0 - plus - minus, 1: plus}


def image_zero_marginal(params: ModelParams, depth: int, bc: Boundary = FREE) -> float:
    """Exact ``nu[eta'_r = 0]`` for the root cell."""
    if depth < 2:
        raise DomainError("depth must be at least 2")
    msgs = upward(depth, bc, params)
    K = edge_kernel(params)
    left, right = child_pairs(msgs.levels[1])
    prior = 0.5 * np.exp(params.beta * params.field * SPINS)
    z0 = K * left[0][None, :]
    z1 = K * right[0][None, :]
    total = float((prior * z0.sum(axis=1) * z1.sum(axis=1)).sum())
    # mixed cells summed term by term: 1 - mono/total cancels badly at large beta
    mixed = sum(
        prior[s] * z0[s, t0] * z1[s, t1]
        for s in range(2)
        for t0 in range(2)
        for t1 in range(2)
        if not s == t0 == t1
    )
    return float(mixed / total)


# ---------------------------------------------------------------------------
# test configurations and tail-dependence diagnostics


def null_image(depth: int) -> ImageField:
    """The all-zero configuration, root unassigned."""
    return ImageField.constant(depth, 0, partial=True)


def path_spins(fields: Sequence[int], depth: int) -> SpinField:
    """Spins of depth ``depth + 1`` whose image has one zero path along the all-ones branch.

    ``fields[k - 1]`` is the spin ``h_k`` of the off-path vertex ``1^(k-1) 0``;
    its whole subtree copies it, so its image is ``h_k`` too.  Each path spin
    is set opposite to the next flank, which keeps every path cell mixed.
    """
    fields = np.asarray([int(h) for h in fields], dtype=np.int8)
    if fields.size < depth + 1:
        raise DomainError(f"need {depth + 1} flank values for a depth-{depth} image")
    if np.any(np.abs(fields) != 1):
        raise DomainError("flank values must be +/-1")
    D = depth + 1
    values = np.empty(tree.ball_size(D), dtype=np.int8)
    for k in range(D + 1):
        offsets = np.arange(2**k)
        rest = (2**k - 1) - offsets
        # number of leading ones in the k-bit address
        lead = k - np.where(rest > 0, np.floor(np.log2(np.maximum(rest, 1))).astype(int) + 1, 0)
        level = fields[np.minimum(lead, fields.size - 1)]
        level[-1] = -fields[k] if k < fields.size else 1
        values[tree.level_slice(k)] = level
    return SpinField(D, values)


def single_path_image(fields: Sequence[int], depth: int) -> ImageField:
    """Partial image with exactly one zero path (the all-ones branch) down to ``depth``."""
    return majority_image(path_spins(fields, depth), depth).as_partial()


def path_flanks(eta: ImageField) -> list[int]:
    """Images of the off-path vertices ``1^(k-1) 0`` for ``k = 1..R``."""
    return [int(eta.values[tree.heap_index(tree.Vertex("1" * (k - 1) + "0"))]) for k in range(1, eta.depth + 1)]


UNCONSTRAINED = 2  # class key for vertices without an image constraint


def _mp_cell(left, right, K, c):
    out = []
    for s in (0, 1):
        a0, b0 = K[s][s] * left[s], K[s][1 - s] * left[1 - s]
        a1, b1 = K[s][s] * right[s], K[s][1 - s] * right[1 - s]
        if c == UNCONSTRAINED:
            out.append((a0 + b0) * (a1 + b1))
        elif c == 0:
            out.append(a0 * b1 + b0 * a1 + b0 * b1)
        else:
            out.append(a0 * a1 if (c == 1) == (s == 1) else mpmath.mpf(0))
    if out[0] == 0 and out[1] == 0:
        raise InfeasibleConditioning("conditioning event has probability zero")
    return out


def precise_root_cell_joint(
    eta: ImageField | None,
    tail: Boundary,
    depth: int,
    params: ModelParams,
    dps: int = 50,
    image_tail: bool = True,
) -> list:
    """Same law as :func:`root_cell_joint`, in ``dps``-digit arithmetic.

    Vertices whose subtrees carry the same constraints and boundary share one
    message, so the cost grows with the number of distinct subtrees rather
    than with the volume.  Structured conditionings (null, single path,
    homogeneous) have a handful of classes per level.  Returns nested lists
    ``joint[s][t0][t1]`` of ``mpmath.mpf``.
    """
    if depth < 1:
        raise DomainError("depth must be at least 1")
    if eta is not None:
        if depth < eta.depth + 1:
            raise DomainError(f"tail depth D={depth} must be at least R+1={eta.depth + 1}")
        if image_tail:
            eta = extend_with_tail(eta, tail, depth)
    R = 0 if eta is None else eta.depth
    with mpmath.workdps(dps):
        beta, J, h = (mpmath.mpf(params.beta), mpmath.mpf(params.coupling), mpmath.mpf(params.field))
        spins = (-1, 1)
        K = [[mpmath.exp(beta * J * s * t + beta * h * t) / 2 for t in spins] for s in spins]
        fields = np.broadcast_to(tail.leaf_fields(depth), (2**depth,))
        values, ids = np.unique(fields, return_inverse=True)
        msgs = [[mpmath.exp(beta * J * mpmath.mpf(f) * s) for s in spins] for f in values]
        for k in range(depth - 1, 0, -1):
            if eta is not None and k <= R:
                c = eta.level(k).astype(np.int64)
            else:
                c = np.full(2**k, UNCONSTRAINED)
            keys = np.stack([c, ids[0::2], ids[1::2]], axis=1)
            classes, ids = np.unique(keys, axis=0, return_inverse=True)
            ids = ids.ravel()
            msgs = [_mp_cell(msgs[l], msgs[r], K, int(cc)) for cc, l, r in classes]
        left, right = msgs[ids[0]], msgs[ids[1]]
        prior = [mpmath.exp(beta * h * s) / 2 for s in spins]
        joint = [
            [[prior[s] * K[s][t0] * left[t0] * K[s][t1] * right[t1] for t1 in (0, 1)] for t0 in (0, 1)]
            for s in (0, 1)
        ]
        total = mpmath.fsum(x for plane in joint for row in plane for x in row)
        if total == 0:
            raise InfeasibleConditioning("conditioning event has probability zero")
        return [[[x / total for x in row] for row in plane] for plane in joint]


def tail_gap(
    eta: ImageField,
    params: ModelParams,
    extra_depth: int = 1,
    dps: int = 50,
    image_tail: bool = True,
) -> float:
    """``|m(Plus tail) - m(Minus tail)|`` with the tail at ``D = R + extra_depth``.

    Computed in ``dps``-digit arithmetic, so gaps far below double-precision
    epsilon are resolved before the final rounding.
    """
    D = eta.depth + extra_depth
    with mpmath.workdps(dps):
        m = []
        for tail in (PLUS, MINUS):
            joint = precise_root_cell_joint(eta, tail, D, params, dps, image_tail)
            m.append(joint[1][1][1] - joint[0][0][0])
        return float(abs(m[0] - m[1]))


def gap_profile(
    make_eta,
    radii: Iterable[int],
    params: ModelParams,
    extra_depth: int = 1,
    dps: int = 50,
    image_tail: bool = True,
) -> list[tuple[int, float]]:
    """Tail gap for each radius; ``make_eta(R)`` builds the conditioning field."""
    return [(R, tail_gap(make_eta(R), params, extra_depth, dps, image_tail)) for R in radii]


def log_slope(radii: Sequence[int], gaps: Sequence[float]) -> float:
    """Least-squares slope of ``log gap`` against ``R``."""
    return float(np.polyfit(np.asarray(radii, float), np.log(np.asarray(gaps, float)), 1)[0])
