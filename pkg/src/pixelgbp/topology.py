"""Builders for the two graph layouts: a flat pixel grid and a quad-tree pyramid.

Both layouts give every pixel of the left image its own rotation variable with
a photometric factor and a trust-region prior.  They differ in how consensus
is wired: the flat layout couples each pixel to its 4-neighbours (loopy), the
sharded layout couples non-overlapping 2x2 blocks to a shared parent variable,
repeated up to a single apex (a tree).
"""

from __future__ import annotations

from dataclasses import dataclass

from .factors import FactorParams
from .graph import FactorGraph

__all__ = ["TopologySpec", "build_flat", "build_sharded"]


def _is_power_of_two(n: int) -> bool:
    return n > 0 and (n & (n - 1)) == 0


@dataclass(frozen=True)
class TopologySpec:
    """Recipe for a graph layout, convenient for configs and result tagging."""

    kind: str
    height: int
    width: int
    params: FactorParams

    def __post_init__(self):
        if self.kind not in ("flat", "sharded"):
            raise ValueError(f"unknown topology kind {self.kind!r}")
        if self.height < 1 or self.width < 1:
            raise ValueError("image dimensions must be positive")

    def build(self, damping: float = 0.0) -> FactorGraph:
        if self.kind == "flat":
            return build_flat(self.height, self.width, self.params, damping=damping)
        return build_sharded(self.height, self.width, self.params, damping=damping)


def build_flat(h: int, w: int, params: FactorParams,
               damping: float = 0.0) -> FactorGraph:
    """Grid of h*w pixel variables with 4-neighbour smoothness coupling.

    Variables are laid out row-major (v = y*w + x).  Each variable carries one
    photometric and one prior factor; each horizontally or vertically adjacent
    pair shares one smoothness factor, for 2hw - h - w of them in total.
    """
    if h < 1 or w < 1:
        raise ValueError("image dimensions must be positive")
    g = FactorGraph(params, damping=damping)
    for y in range(h):
        for x in range(w):
            v = g.add_variable(level=0, pixel=(x, y))
            g.add_photo_factor(v)
            g.add_prior_factor(v)
    for y in range(h):
        for x in range(w):
            v = y * w + x
            if x + 1 < w:
                g.add_reg_factor(v, v + 1)
            if y + 1 < h:
                g.add_reg_factor(v, v + w)
    g.finalize()
    return g


def build_sharded(h: int, w: int, params: FactorParams,
                  damping: float = 0.0) -> FactorGraph:
    """Quad-tree pyramid: 2x2 blocks report to a parent, up to one apex.

    Level 0 holds the h*w pixel variables (photometric + prior).  Level l+1
    holds one variable per 2x2 block of level l, carrying only a prior; each
    child is tied to its parent by its own smoothness factor, so every parent
    sees exactly four of them.  Requires a square power-of-two image so the
    halving bottoms out at a single variable.
    """
    if h != w:
        raise ValueError("sharded layout requires a square image")
    if not _is_power_of_two(h):
        raise ValueError("sharded layout requires power-of-two dimensions")
    g = FactorGraph(params, damping=damping)
    for y in range(h):
        for x in range(w):
            v = g.add_variable(level=0, pixel=(x, y))
            g.add_photo_factor(v)
            g.add_prior_factor(v)

    side = h
    level = 0
    offset = 0  # index of the first variable of the current level
    while side > 1:
        child_offset, child_side = offset, side
        side //= 2
        level += 1
        offset = child_offset + child_side * child_side
        for y in range(side):
            for x in range(side):
                parent = g.add_variable(level=level)
                g.add_prior_factor(parent)
                for dy in (0, 1):
                    for dx in (0, 1):
                        child = child_offset + (2 * y + dy) * child_side + (2 * x + dx)
                        g.add_reg_factor(child, parent)
    g.finalize()
    return g
