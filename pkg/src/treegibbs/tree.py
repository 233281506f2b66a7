"""Addressing and geometry of the rooted binary Cayley tree.

Vertices are bit strings: the root is the empty string, and the children of
``v`` are ``v + "0"`` and ``v + "1"``.  Inside a level, vertices are ordered
lexicographically, which coincides with the integer value of the bit string.
Field arrays throughout the package use the matching *heap order*: vertex
``v`` at level ``k`` lives at index ``2**k - 1 + int(v, 2)``, so the children
of index ``i`` are ``2*i + 1`` and ``2*i + 2``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator

from .errors import RootHasNoParent

ROOT_LABEL = "r"
ORDER = 2  # branching number of the rooted tree; the core is binary only


@dataclass(frozen=True, order=True)
class Vertex:
    """Bit-string address of a tree vertex."""

    bits: str = ""

    def __post_init__(self) -> None:
        if any(b not in "01" for b in self.bits):
            raise ValueError(f"vertex address must be a 0/1 string, got {self.bits!r}")

    @property
    def level(self) -> int:
        return len(self.bits)

    @property
    def is_root(self) -> bool:
        return not self.bits

    @property
    def index(self) -> int:
        """Position of the vertex in heap order."""
        return heap_index(self)

    def __str__(self) -> str:
        return render(self)


ROOT = Vertex("")


def render(v: Vertex) -> str:
    return ROOT_LABEL if v.is_root else v.bits


def parse(text: str) -> Vertex:
    text = text.strip()
    if text == ROOT_LABEL:
        return ROOT
    if not text:
        raise ValueError("empty vertex label; the root is written 'r'")
    return Vertex(text)


def children(v: Vertex) -> tuple[Vertex, Vertex]:
    return Vertex(v.bits + "0"), Vertex(v.bits + "1")


def parent(v: Vertex) -> Vertex:
    if v.is_root:
        raise RootHasNoParent("the root has no parent")
    return Vertex(v.bits[:-1])


def cell(v: Vertex) -> frozenset[Vertex]:
    """The majority-rule cell ``{v, v0, v1}``."""
    c0, c1 = children(v)
    return frozenset((v, c0, c1))


def sphere(radius: int) -> list[Vertex]:
    if radius < 0:
        raise ValueError("radius must be nonnegative")
    if radius == 0:
        return [ROOT]
    return [Vertex(format(i, f"0{radius}b")) for i in range(2**radius)]


def ball(radius: int) -> list[Vertex]:
    out: list[Vertex] = []
    for k in range(radius + 1):
        out.extend(sphere(k))
    return out


def iter_paths(radius: int) -> Iterator[list[Vertex]]:
    """All descending root-to-sphere(radius) paths, in lexicographic order."""
    for leaf in sphere(radius):
        yield [Vertex(leaf.bits[:k]) for k in range(radius + 1)]


# heap-order helpers used by the array-based modules

def ball_size(radius: int) -> int:
    return 2 ** (radius + 1) - 1


def level_slice(level: int) -> slice:
    """Slice of a heap-ordered array holding ``sphere(level)``."""
    start = 2**level - 1
    return slice(start, start + 2**level)


def heap_index(v: Vertex) -> int:
    return 2**v.level - 1 + (int(v.bits, 2) if v.bits else 0)


def vertex_at(index: int) -> Vertex:
    if index < 0:
        raise ValueError("heap index must be nonnegative")
    level = (index + 1).bit_length() - 1
    offset = index - (2**level - 1)
    return ROOT if level == 0 else Vertex(format(offset, f"0{level}b"))


def labels(radius: int) -> list[str]:
    """Rendered labels of ``ball(radius)`` in heap order."""
    return [render(v) for v in ball(radius)]
