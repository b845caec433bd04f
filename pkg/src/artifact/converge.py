"""Uniform convergence under product measures on finite grids.

Single-intersecting events, exact probability gaps between product measures,
and the partition-optimised sample-complexity calculator.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .dist import Marginal

MAX_PARTITION_DIM = 12


class IncompleteTable(KeyError):
    pass


@dataclass(frozen=True, eq=False)
class GridEvent:
    """Boolean membership tensor over a product of ascending 1-d grids."""

    grids: tuple
    member: np.ndarray

    def __post_init__(self):
        shape = tuple(len(g) for g in self.grids)
        if self.member.shape != shape:
            raise ValueError(f"member shape {self.member.shape} does not match grids {shape}")
        for g in self.grids:
            if np.any(np.diff(np.asarray(g, dtype=float)) <= 0):
                raise ValueError("grids must be strictly ascending")

    @property
    def dim(self) -> int:
        return len(self.grids)

    @staticmethod
    def from_mask(mask) -> "GridEvent":
        mask = np.asarray(mask, dtype=bool)
        return GridEvent(tuple(np.arange(s, dtype=float) for s in mask.shape), mask)


def is_single_intersecting(e: GridEvent) -> bool:
    """Every axis-parallel grid line meets the event in one contiguous run or not at all."""
    M = e.member
    for ax in range(M.ndim):
        lines = np.moveaxis(M, ax, -1).reshape(-1, M.shape[ax]).astype(np.int8)
        starts = np.diff(np.concatenate([np.zeros((lines.shape[0], 1), np.int8), lines], axis=1), axis=1) == 1
        if np.any(starts.sum(axis=1) > 1):
            return False
    return True


def event_prob(e: GridEvent, probs) -> float:
    """Pr[event] under the product of per-axis probability vectors."""
    out = e.member.astype(float)
    for p in reversed(probs):
        out = out @ np.asarray(p, dtype=float)
    return float(out)


def event_prob_gap(e: GridEvent, D, D_hat) -> float:
    return abs(event_prob(e, D) - event_prob(e, D_hat))


def axis_kolmogorov(p, q) -> float:
    """Kolmogorov distance of two probability vectors on the same grid."""
    return float(np.max(np.abs(np.cumsum(p) - np.cumsum(q)), initial=0.0))


def surplus_event_check(row, prices, x: float) -> GridEvent:
    """{t : sum_j (t_j - p_j)^+ >= x} on the support grid of an additive row."""
    grids = tuple(np.asarray(c.support if isinstance(c, Marginal) else c, dtype=float) for c in row)
    prices = np.asarray(prices, dtype=float)
    total = np.zeros(tuple(len(g) for g in grids))
    for j, g in enumerate(grids):
        shape = [1] * len(grids)
        shape[j] = len(g)
        total = total + np.maximum(g - prices[j], 0.0).reshape(shape)
    return GridEvent(grids, total >= x)


# ---------------------------------------------------------------- sample bounds


def dkw_samples(eps: float, delta: float) -> int:
    return math.ceil(math.log(2.0 / delta) / (2.0 * eps * eps))


@dataclass(frozen=True, eq=False)
class ComplexityTable:
    """Per-subset sample-complexity functions ``s[T](eps, delta)`` and/or VC dimensions ``vc[T]``."""

    d: int
    s: dict = field(default_factory=dict)
    vc: dict = field(default_factory=dict)

    @staticmethod
    def dkw_singletons(d: int) -> "ComplexityTable":
        return ComplexityTable(d, s={frozenset([i]): dkw_samples for i in range(d)})

    @staticmethod
    def from_vc(d: int, vc: dict) -> "ComplexityTable":
        return ComplexityTable(d, vc={frozenset(k): float(v) for k, v in vc.items()})


def set_partitions(items):
    """All set partitions of ``items`` (restricted growth strings)."""
    items = list(items)
    if not items:
        yield []
        return
    first, rest = items[0], items[1:]
    for part in set_partitions(rest):
        yield [[first]] + part
        for k in range(len(part)):
            yield part[:k] + [[first] + part[k]] + part[k + 1 :]


def sample_bound_partition(tbl: ComplexityTable, eps: float, delta: float, mode: str = "samples") -> dict:
    """Minimise over partitions of [d].

    ``samples``: max_i s_{T_i}(eps/k, delta/k).
    ``vc``: V_max = k^2 max_i V_{T_i}, then the VC sample formula with unit constants.
    """
    if tbl.d > MAX_PARTITION_DIM:
        raise ValueError(f"d = {tbl.d} exceeds exhaustive partition limit {MAX_PARTITION_DIM}")
    source = tbl.s if mode == "samples" else tbl.vc
    best, best_part = math.inf, None
    for part in set_partitions(range(tbl.d)):
        keys = [frozenset(T) for T in part]
        if any(k not in source for k in keys):
            continue
        k = len(part)
        if mode == "samples":
            val = max(source[T](eps / k, delta / k) for T in keys)
        else:
            val = k * k * max(source[T] for T in keys)
        if val < best:
            best, best_part = val, sorted(sorted(T) for T in part)
    if best_part is None:
        raise IncompleteTable("no partition of [d] is covered by the table")
    if mode == "samples":
        return {"bound": best, "partition": best_part, "k": len(best_part), "provenance": "partition minimum"}
    k = len(best_part)
    if math.isinf(best):
        samples = math.inf
    else:
        samples = best / eps**2 * math.log(k / eps) + k * k / eps**2 * math.log(k / delta)
    return {
        "V_max": best,
        "partition": best_part,
        "k": k,
        "bound": samples,
        "provenance": "formula instantiation with unit leading constants",
    }


def table_rectangles(d: int) -> ComplexityTable:
    """Axis-aligned boxes: VC 2d jointly and 2 per coordinate."""
    vc = {frozenset([i]): 2 for i in range(d)}
    vc[frozenset(range(d))] = 2 * d
    return ComplexityTable.from_vc(d, vc)


def table_convex(d: int) -> ComplexityTable:
    """Convex sets: unbounded VC jointly, intervals per coordinate."""
    vc = {frozenset([i]): 2 for i in range(d)}
    if d > 1:
        vc[frozenset(range(d))] = math.inf
    return ComplexityTable.from_vc(d, vc)


def product_deviation(fn: Callable, probs, probs_hat) -> float:
    """|E_D f - E_D_hat f| for f given as a tensor over the grid."""
    F = np.asarray(fn, dtype=float)
    a, b = F, F
    for p, q in zip(reversed(probs), reversed(probs_hat)):
        a = a @ np.asarray(p)
        b = b @ np.asarray(q)
    return float(abs(a - b))
