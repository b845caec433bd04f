"""Revenue curves in quantile space, ironed virtual values and regularity scans."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .dist import Marginal, quantile

DEFAULT_GRID = 1024
REGULARITY_TOL = 1e-9


class RequiresTruncation(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class RevenueCurve:
    """Concave hull of (q, q * F^{-1}(1 - q)) with (0, 0) as first vertex.

    ``prices[k]`` is the posted price selling with probability ``q[k]``;
    ``prices[0]`` is the never-sell sentinel.
    """

    q: np.ndarray
    r: np.ndarray
    prices: np.ndarray

    @property
    def slopes(self) -> np.ndarray:
        return np.diff(self.r) / np.diff(self.q)

    def __call__(self, q):
        return np.interp(q, self.q, self.r)

    @property
    def q_max(self) -> float:
        return float(self.q[-1])

    def argmax(self) -> float:
        """Smallest quantile attaining the maximum of R."""
        top = self.r.max()
        return float(self.q[np.nonzero(self.r >= top - 1e-12 * max(1.0, top))[0][0]])

    def segments(self):
        for k in range(self.q.size - 1):
            yield float(self.q[k]), float(self.q[k + 1]), float(self.prices[k]), float(self.prices[k + 1])


def _discrete(d: Marginal, grid: int) -> Marginal:
    if d.is_discrete:
        return d
    if not np.isfinite(d.upper):
        raise RequiresTruncation("unbounded marginal; truncate it first")
    return d.discretize(grid)


def revenue_curve(d: Marginal, grid: int = DEFAULT_GRID) -> RevenueCurve:
    d = _discrete(d, grid)
    s = d.support[::-1]
    tails = d.tail(s)
    q = np.concatenate([[0.0], tails])
    r = np.concatenate([[0.0], tails * s])
    p = np.concatenate([[d.sentinel], s])
    keep = _kernels.upper_hull(q, r)
    return RevenueCurve(q=q[keep].copy(), r=r[keep].copy(), prices=p[keep].copy())


def lottery_at(c: RevenueCurve, q: float) -> tuple[float, float, float]:
    """(x, p_lo, p_hi): post p_lo w.p. x and p_hi w.p. 1 - x.

    p_lo is the higher price (lower quantile end of the segment).
    """
    if q < -1e-12 or q > 1 + 1e-12:
        raise ValueError("q must lie in [0, 1]")
    q = min(max(q, 0.0), c.q_max)
    k = int(np.searchsorted(c.q, q, side="right")) - 1
    k = min(max(k, 0), c.q.size - 1)
    if abs(c.q[k] - q) <= 1e-15 or k == c.q.size - 1:
        return 1.0, float(c.prices[k]), float(c.prices[k])
    lo, hi = c.q[k], c.q[k + 1]
    x = float((hi - q) / (hi - lo))
    return x, float(c.prices[k]), float(c.prices[k + 1])


@dataclass(frozen=True, eq=False)
class IronedVirtuals:
    support: np.ndarray
    phi: np.ndarray

    def at(self, v) -> np.ndarray:
        """φ̄ at support values (values between atoms take the atom below)."""
        idx = np.searchsorted(self.support, v, side="right") - 1
        return np.where(idx >= 0, self.phi[np.maximum(idx, 0)], -np.inf)


def ironed_virtuals(d: Marginal, grid: int = DEFAULT_GRID) -> IronedVirtuals:
    """Slope of the revenue curve over each atom's quantile interval."""
    d = _discrete(d, grid)
    c = revenue_curve(d)
    s = d.support
    hi_q = d.tail(s)
    lo_q = hi_q - d.probs
    phi = (c(hi_q) - c(np.maximum(lo_q, 0.0))) / d.probs
    return IronedVirtuals(support=s.copy(), phi=phi)


def monopoly_price(d: Marginal) -> tuple[float, float]:
    """Exhaustive best single posted price (lowest among ties) and its revenue."""
    s = d.support
    rev = s * d.tail(s)
    best = rev.max()
    k = int(np.nonzero(rev >= best - 1e-12 * max(1.0, best))[0][0])
    return float(s[k]), float(rev[k])


def raw_curve(d: Marginal, qs) -> np.ndarray:
    return np.array([q * quantile(d, q) for q in np.asarray(qs, dtype=float)])


def check_regular_curve(d: Marginal, grid: int = 200) -> dict:
    """Scan (1 - p) R(q') <= R(q) over grid triples 0 < q' <= q <= p < 1.

    The left side is largest at p = q, so the scan runs over pairs.
    """
    qs = np.arange(1, grid) / grid
    R = raw_curve(d, qs)
    best_prev = np.maximum.accumulate(R)
    margin = (1.0 - qs) * best_prev - R
    k = int(np.argmax(margin))
    worst = float(margin[k])
    qp = float(qs[int(np.argmax(R[: k + 1]))])
    return {
        "regular": worst <= REGULARITY_TOL,
        "worst_violation": max(worst, 0.0),
        "witness": {"q_prime": qp, "q": float(qs[k]), "p": float(qs[k])},
        "grid": grid,
    }


def curve_csv(c: RevenueCurve, qs=None) -> str:
    """CSV rows (q, R, x, p_lo, p_hi); defaults to the breakpoints."""
    qs = c.q if qs is None else np.asarray(qs, dtype=float)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["q", "R", "x", "p_lo", "p_hi"])
    for q in qs:
        x, lo, hi = lottery_at(c, float(q))
        w.writerow([repr(float(q)), repr(float(c(q))), repr(x), repr(lo), repr(hi)])
    return buf.getvalue()
