"""Macrostate probabilities by counting equal-weight refinement cells.

A densitized view is virtually subdivided into a dyadic tree: at depth n the
support is partitioned into 2^n cells of equal squared weight, items being
split into sub-cells at cell boundaries. Counting the cells that lie
entirely inside one macro label estimates that label's weight with error
bounded by the number of straddling cells over 2^n.

Squared weights are exact: each item's weight is an integer on a power-of-
two scale with headroom bits, so halving a cell and cutting a boundary item
are exact integer operations at every depth. Internally a partially split
item is carried as an integer-weight interval of its own weight line, which
is the closed form of repeated dyadic sub-cell splits.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import NamedTuple

import numpy as np

from .macrostates import MacroPartition
from .spacegraph import SpaceState
from .wavefunctional import DensitizedView, EntryKey

MAX_DEPTH = 24

# Extra trailing zero bits on every item weight; each depth consumes at most
# one, so cells halve exactly for any depth up to MAX_DEPTH.
HEADROOM_BITS = 64


class ZeroDensity(Exception):
    """Raised when splitting an item that carries no weight."""


class DepthExceeded(Exception):
    """Raised when a refinement deeper than MAX_DEPTH is requested."""


@dataclass(frozen=True)
class CellItem:
    """One micro-cell: a basis key, its dyadic cell index, and an exact
    squared weight."""

    key: bytes
    cell_index: tuple[int, ...]
    sq_weight: Fraction

    @classmethod
    def from_density(cls, key: bytes, cell_index: tuple[int, ...], density) -> "CellItem":
        sq = Fraction(density) ** 2
        return cls(key, tuple(cell_index), sq)

    @property
    def density(self) -> float:
        return math.sqrt(float(self.sq_weight))


def split_cell(item: CellItem) -> tuple[CellItem, CellItem]:
    """Split a micro-cell into its two dyadic children, each carrying half
    the squared weight (density r/sqrt(2)); weight is conserved exactly."""
    if item.sq_weight == 0:
        raise ZeroDensity("cannot split a zero-weight cell")
    half = item.sq_weight / 2
    return (
        CellItem(item.key, item.cell_index + (0,), half),
        CellItem(item.key, item.cell_index + (1,), half),
    )


class TreeItem(NamedTuple):
    key: EntryKey
    lo: int  # interval start on the item's own weight line, in scale units
    weight: int  # interval width, in scale units


@dataclass
class RefinementTree:
    """Dyadic refinement of a densitized view: levels[n] holds 2^n cells,
    each a list of items whose integer weights sum to total/2^n exactly."""

    depth: int
    scale: int
    levels: list[list[list[TreeItem]]]
    states: dict[EntryKey, SpaceState]

    def cells(self, depth: int) -> list[list[TreeItem]]:
        if not (0 <= depth <= self.depth):
            raise ValueError(f"depth {depth} outside tree depth {self.depth}")
        return self.levels[depth]

    def cell_weight(self, depth: int, i: int) -> Fraction:
        return Fraction(sum(item.weight for item in self.cells(depth)[i]), self.scale)

    def total_weight(self, depth: int = 0) -> Fraction:
        return Fraction(
            sum(item.weight for cell in self.cells(depth) for item in cell), self.scale
        )

    def label_weight(self, partition: MacroPartition, alpha: str) -> Fraction:
        labels = {k: partition.label_of(s) for k, s in self.states.items()}
        return Fraction(
            sum(item.weight for item in self.levels[0][0] if labels[item.key] == alpha),
            self.scale,
        )


def _cut(items: list[TreeItem], total: int) -> tuple[list[TreeItem], list[TreeItem]]:
    """Split a sorted item list into two halves of exactly total//2 and
    total - total//2 weight, cutting at most one boundary item."""
    half = total // 2
    acc = 0
    idx = 0
    while idx < len(items) and acc + items[idx].weight <= half:
        acc += items[idx].weight
        idx += 1
    left = list(items[:idx])
    if acc == half or idx == len(items):
        return left, list(items[idx:])
    boundary = items[idx]
    needed = half - acc
    piece_l = TreeItem(boundary.key, boundary.lo, needed)
    piece_r = TreeItem(boundary.key, boundary.lo + needed, boundary.weight - needed)
    return left + [piece_l], [piece_r] + list(items[idx + 1 :])


def build_refinement(
    view: DensitizedView, depth_max: int, partition: MacroPartition | None = None
) -> RefinementTree:
    """Greedy dyadic bisection of the view's support.

    Items are ordered macro-label first (when a partition is given), then by
    basis key, which keeps cells label-contiguous and the straddling-cell
    count below the number of labels.
    """
    if depth_max < 0 or depth_max > MAX_DEPTH:
        raise DepthExceeded(f"depth_max must be in [0, {MAX_DEPTH}]")
    if len(view) == 0:
        raise ValueError("cannot refine an empty view")

    sq_weights = {k: Fraction(view.entries[k][1]) ** 2 for k in view.sorted_keys()}

    states = {k: view.entries[k][0] for k in view.sorted_keys()}
    if partition is not None:
        labels = {k: partition.label_of(s) for k, s in states.items()}
        order = sorted(states, key=lambda k: (labels[k], k))
    else:
        order = sorted(states)

    # Squared float weights have power-of-two denominators, so the largest
    # one is a common denominator; headroom keeps every halving integral.
    denom = max(sq.denominator for sq in sq_weights.values())
    scale = denom << HEADROOM_BITS
    root = [TreeItem(k, 0, int(sq_weights[k] * scale)) for k in order if sq_weights[k] > 0]
    total_exact = Fraction(sum(item.weight for item in root), scale)
    if abs(total_exact - 1) > Fraction(1, 10**12):
        raise ValueError(f"view is not normalized: total squared weight {float(total_exact)!r}")

    levels = [[root]]
    for _depth in range(depth_max):
        next_level: list[list[TreeItem]] = []
        for cell in levels[-1]:
            cell_total = sum(item.weight for item in cell)
            left, right = _cut(cell, cell_total)
            next_level.append(left)
            next_level.append(right)
        levels.append(next_level)
    return RefinementTree(depth_max, scale, levels, states)


@dataclass
class LabelCount:
    label: str
    n_alpha: int
    estimate: Fraction
    exact: Fraction
    bound: Fraction


@dataclass
class CountReport:
    depth: int
    straddlers: int
    per_label: list[LabelCount]

    def by_label(self) -> dict[str, LabelCount]:
        return {lc.label: lc for lc in self.per_label}


def count_estimate(tree: RefinementTree, partition: MacroPartition, depth: int) -> CountReport:
    """Per-label counting estimate n_alpha / 2^depth with its straddler
    error bound and the exact label weights."""
    if not (0 <= depth <= tree.depth):
        raise ValueError(f"depth {depth} outside tree depth {tree.depth}")
    label_cache = tree.__dict__.setdefault("_label_cache", {})
    labels = label_cache.get(partition.name)
    if labels is None:
        labels = {k: partition.label_of(s) for k, s in tree.states.items()}
        label_cache[partition.name] = labels
    counts: dict[str, int] = {}
    exact_units: dict[str, int] = {}
    for item in tree.levels[0][0]:
        lab = labels[item.key]
        exact_units[lab] = exact_units.get(lab, 0) + item.weight
        counts.setdefault(lab, 0)
    exact = {lab: Fraction(units, tree.scale) for lab, units in exact_units.items()}
    straddlers = 0
    cells_total = 2**depth
    for cell in tree.cells(depth):
        present = {labels[item.key] for item in cell}
        if len(present) == 1:
            counts[present.pop()] += 1
        elif len(present) > 1:
            straddlers += 1
    bound = Fraction(straddlers, cells_total)
    per_label = [
        LabelCount(
            label=lab,
            n_alpha=counts[lab],
            estimate=Fraction(counts[lab], cells_total),
            exact=exact.get(lab, Fraction(0)),
            bound=bound,
        )
        for lab in sorted(counts)
    ]
    return CountReport(depth=depth, straddlers=straddlers, per_label=per_label)


def sample_selflocation(
    view: DensitizedView, partition: MacroPartition, samples: int, seed: int
) -> dict[str, float]:
    """Draw seeded i.i.d. micro-states with probability proportional to the
    squared density and report empirical macro-label frequencies.

    Uses a counter-based generator, so results are reproducible and
    independent of thread count.
    """
    if samples < 1:
        raise ValueError("samples must be >= 1")
    keys = view.sorted_keys()
    probs = np.array([view.entries[k][1] ** 2 for k in keys], dtype=float)
    probs /= probs.sum()
    labels = [partition.label_of(view.entries[k][0]) for k in keys]
    rng = np.random.Generator(np.random.Philox(seed))
    draws = rng.random(samples)
    idx = np.searchsorted(np.cumsum(probs), draws, side="left")
    idx = np.minimum(idx, len(keys) - 1)
    counts = np.bincount(idx, minlength=len(keys))
    freqs: dict[str, float] = {}
    for lab, c in zip(labels, counts):
        freqs[lab] = freqs.get(lab, 0.0) + int(c) / samples
    return dict(sorted(freqs.items()))
