"""Graded Hilbert spaces: ordered direct sums of labelled blocks.

A *tower* block of ``depth`` levels over a ``base_dim``-dimensional space
stands for the truncation of ``l^2_+(base)``.  Levels are contiguous slices
ordered bottom-up.  The top level of a truncated tower is where the
truncation bites, so identities are only asserted on a *window* that stays
clear of the top levels (see :func:`window_projector`).
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import (DimensionMismatch, InvalidDepth, LabelNotFound, NotTower,
                     WindowTooDeep)


@dataclass(frozen=True)
class Block:
    label: str
    dim: int
    base_dim: Optional[int] = None
    depth: Optional[int] = None

    def __post_init__(self):
        if self.dim < 1:
            raise DimensionMismatch(f"block {self.label!r} has dim {self.dim}")
        if (self.base_dim is None) != (self.depth is None):
            raise ValueError("tower blocks need both base_dim and depth")
        if self.is_tower and self.base_dim * self.depth != self.dim:
            raise DimensionMismatch(
                f"tower {self.label!r}: {self.base_dim}x{self.depth} != {self.dim}")

    @property
    def is_tower(self) -> bool:
        return self.depth is not None

    def to_dict(self) -> dict:
        d = {"label": self.label, "dim": self.dim}
        if self.is_tower:
            d["tower"] = {"base_dim": self.base_dim, "depth": self.depth}
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "Block":
        tower = d.get("tower")
        if tower:
            return cls(d["label"], int(d["dim"]), int(tower["base_dim"]),
                       int(tower["depth"]))
        return cls(d["label"], int(d["dim"]))


@dataclass(frozen=True)
class GradedSpace:
    blocks: tuple

    def __post_init__(self):
        object.__setattr__(self, "blocks", tuple(self.blocks))
        labels = [b.label for b in self.blocks]
        if len(set(labels)) != len(labels):
            raise ValueError(f"duplicate block labels in {labels}")
        if not self.blocks:
            raise DimensionMismatch("a space needs at least one block")

    @property
    def total_dim(self) -> int:
        return sum(b.dim for b in self.blocks)

    @property
    def labels(self) -> list:
        return [b.label for b in self.blocks]

    @property
    def towers(self) -> list:
        return [b for b in self.blocks if b.is_tower]

    def block(self, label: str) -> Block:
        for b in self.blocks:
            if b.label == label:
                return b
        raise LabelNotFound(label)

    def offset(self, label: str) -> int:
        off = 0
        for b in self.blocks:
            if b.label == label:
                return off
            off += b.dim
        raise LabelNotFound(label)

    def slice(self, label: str) -> slice:
        off = self.offset(label)
        return slice(off, off + self.block(label).dim)

    def level_slice(self, label: str, level: int) -> slice:
        b = self.block(label)
        if not b.is_tower:
            raise NotTower(label)
        off = self.offset(label) + level * b.base_dim
        return slice(off, off + b.base_dim)

    def to_list(self) -> list:
        return [b.to_dict() for b in self.blocks]

    @classmethod
    def from_list(cls, items) -> "GradedSpace":
        return cls(tuple(Block.from_dict(d) for d in items))

    def __repr__(self):
        parts = []
        for b in self.blocks:
            if b.is_tower:
                parts.append(f"{b.label}[{b.base_dim}x{b.depth}]")
            else:
                parts.append(f"{b.label}[{b.dim}]")
        return "GradedSpace(" + " + ".join(parts) + ")"


def space(*blocks) -> GradedSpace:
    """Shorthand: ``space(("H", 3), ("K", 2))``."""
    return GradedSpace(tuple(b if isinstance(b, Block) else Block(*b)
                             for b in blocks))


def make_tower(label: str, base_dim: int, depth: int) -> GradedSpace:
    if depth < 2:
        raise InvalidDepth(f"tower depth must be >= 2, got {depth}")
    if base_dim < 1:
        raise DimensionMismatch(f"tower base_dim must be >= 1, got {base_dim}")
    return GradedSpace((Block(label, base_dim * depth, base_dim, depth),))


def direct_sum(*spaces: GradedSpace) -> GradedSpace:
    blocks = []
    for s in spaces:
        if s is not None:
            blocks.extend(s.blocks)
    return GradedSpace(tuple(blocks))


@dataclass(frozen=True)
class WindowSpec:
    space: GradedSpace
    margin: int = 0

    def __post_init__(self):
        if self.margin < 0:
            raise WindowTooDeep("margin must be nonnegative")
        for b in self.space.towers:
            if self.margin >= b.depth:
                raise WindowTooDeep(
                    f"margin {self.margin} >= depth {b.depth} of {b.label!r}")

    def mask(self, budget: int = 0) -> np.ndarray:
        return window_mask(self.space, self.margin, budget)

    def projector(self, budget: int = 0) -> np.ndarray:
        return window_projector(self, budget)


def window_mask(sp: GradedSpace, margin: int, budget: int) -> np.ndarray:
    """Boolean mask of the coordinates kept by the window."""
    keep = np.ones(sp.total_dim, dtype=bool)
    off = 0
    for b in sp.blocks:
        if b.is_tower:
            top = b.depth - 1 - margin - budget
            if top < 0:
                raise WindowTooDeep(
                    f"margin {margin} + budget {budget} exhausts tower "
                    f"{b.label!r} of depth {b.depth}")
            keep[off + (top + 1) * b.base_dim: off + b.dim] = False
        off += b.dim
    return keep


def window_projector(w: WindowSpec, power_budget: int) -> np.ndarray:
    """Diagonal projector onto non-tower blocks plus the lower tower levels
    ``0 .. depth - 1 - margin - power_budget``."""
    return np.diag(window_mask(w.space, w.margin, power_budget).astype(complex))


def max_budget(sp: GradedSpace, margin: int = 0) -> int:
    """Largest power budget a window on ``sp`` supports (large if no towers)."""
    depths = [b.depth for b in sp.towers]
    if not depths:
        return 10**6
    return min(depths) - 1 - margin


def forward_shift(t: GradedSpace):
    """Truncated forward shift on a single-tower space (top level maps to 0)."""
    from .operators import Operator

    if len(t.blocks) != 1 or not t.blocks[0].is_tower:
        raise NotTower(f"forward_shift needs a single tower block, got {t!r}")
    b = t.blocks[0]
    n, d = b.dim, b.base_dim
    m = np.zeros((n, n), dtype=complex)
    m[d:, :n - d] = np.eye(n - d)
    return Operator(m, t, t, boundary_depth=1)


def embed(sub: GradedSpace, whole: GradedSpace, at_label: str,
          offset: int = 0):
    """Isometric embedding of ``sub`` into block ``at_label`` of ``whole``.

    For a tower target the image is the bottom level; ``offset`` shifts the
    image inside the target block (or bottom level).
    """
    from .operators import Operator

    b = whole.block(at_label)
    room = b.base_dim if b.is_tower else b.dim
    if sub.total_dim + offset > room:
        raise DimensionMismatch(
            f"cannot embed dim {sub.total_dim} at offset {offset} into "
            f"{at_label!r} with room {room}")
    m = np.zeros((whole.total_dim, sub.total_dim), dtype=complex)
    start = whole.offset(at_label) + offset
    m[start:start + sub.total_dim, :] = np.eye(sub.total_dim)
    return Operator(m, sub, whole, boundary_depth=0)


def block_projector(sp: GradedSpace, label: str) -> np.ndarray:
    p = np.zeros((sp.total_dim, sp.total_dim), dtype=complex)
    s = sp.slice(label)
    p[s, s] = np.eye(s.stop - s.start)
    return p
