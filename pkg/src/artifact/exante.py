"""Ex-ante relaxation for unit-demand bidders and its conversion to posted prices.

The objective sum_ij R_ij(q_ij) is concave and piecewise linear, so the
program is solved exactly as an LP over per-segment amounts.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .curve import RevenueCurve, lottery_at, revenue_curve
from .dist import ProductPrior
from .lp import InfeasibleLP, linprog_max

DEFAULT_C = 8.0
DEFAULT_D = 8.0


class InfeasibleCaps(ValueError):
    pass


class VacuousBound(UserWarning):
    pass


@dataclass(frozen=True, eq=False)
class ExAnteSolution:
    q: np.ndarray
    objective: float
    tag: str
    row_cap: float
    col_cap: float
    certificate: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "q": self.q.tolist(),
            "objective": self.objective,
            "tag": self.tag,
            "row_cap": self.row_cap,
            "col_cap": self.col_cap,
            "certificate": self.certificate,
        }


@dataclass(frozen=True, eq=False)
class PriceLotteryGrid:
    """Per-cell two-point lottery: price p_lo w.p. x, else p_hi."""

    x: np.ndarray
    p_lo: np.ndarray
    p_hi: np.ndarray

    @property
    def shape(self):
        return self.x.shape

    @staticmethod
    def deterministic(prices) -> "PriceLotteryGrid":
        p = np.asarray(prices, dtype=float)
        return PriceLotteryGrid(np.ones_like(p), p.copy(), p.copy())

    def is_deterministic(self) -> bool:
        return bool(np.all((self.x >= 1.0) | (self.x <= 0.0) | (self.p_lo == self.p_hi)))

    def to_dict(self) -> dict:
        return {"x": self.x.tolist(), "p_lo": self.p_lo.tolist(), "p_hi": self.p_hi.tolist()}


def caps_exact() -> tuple[float, float]:
    return 0.5, 0.5


def caps_approx(n: int, m: int, eps: float) -> tuple[float, float]:
    """(row cap on sum_j, column cap on sum_i) with Kolmogorov error eps."""
    return 0.5 + m * eps, 0.5 + n * eps


def caps_regular(n: int, m: int, eps: float, C: float = DEFAULT_C) -> tuple[float, float]:
    return 0.5 + 1.0 / C + m * eps, 0.5 + 1.0 / C + n * eps


def prior_curves(prior: ProductPrior, values=None) -> list[list[RevenueCurve]]:
    """Revenue curve per cell; ``values`` optionally maps a Marginal to its single-item law."""
    out = []
    for row in prior.marginals:
        out.append([revenue_curve(values(c) if values else c) for c in row])
    return out


def solve_exante(curves, row_cap: float, col_cap: float, tag: str = "exact") -> ExAnteSolution:
    """max sum R_ij(q_ij) s.t. sum_j q_ij <= row_cap, sum_i q_ij <= col_cap."""
    if row_cap <= 0 or col_cap <= 0:
        raise InfeasibleCaps("caps must be positive")
    n, m = len(curves), len(curves[0])
    cells, widths, slopes = [], [], []
    for i in range(n):
        for j in range(m):
            c = curves[i][j]
            w = np.diff(c.q)
            s = c.slopes
            for k in range(w.size):
                if s[k] > 0:
                    cells.append((i, j))
                    widths.append(w[k])
                    slopes.append(s[k])
    q = np.zeros((n, m))
    if not cells:
        return ExAnteSolution(q, 0.0, tag, row_cap, col_cap, {"gap": 0.0})
    nv = len(cells)
    rows_A, rhs = [], []
    for i in range(n):
        rows_A.append([1.0 if c[0] == i else 0.0 for c in cells])
        rhs.append(row_cap)
    for j in range(m):
        rows_A.append([1.0 if c[1] == j else 0.0 for c in cells])
        rhs.append(col_cap)
    A = np.vstack([np.array(rows_A), np.eye(nv)])
    b = np.concatenate([rhs, widths])
    try:
        res = linprog_max(np.array(slopes), A, b)
    except InfeasibleLP as e:  # pragma: no cover - positive caps are always feasible
        raise InfeasibleCaps(str(e)) from e
    for (i, j), y in zip(cells, res.x):
        q[i, j] += y
    q = np.minimum(q, np.array([[curves[i][j].q_max for j in range(m)] for i in range(n)]))
    obj = float(sum(curves[i][j](q[i, j]) for i in range(n) for j in range(m)))
    return ExAnteSolution(q, obj, tag, float(row_cap), float(col_cap), res.certificate)


def solution_to_lotteries(sol: ExAnteSolution, curves) -> PriceLotteryGrid:
    n, m = sol.q.shape
    x = np.zeros((n, m))
    lo = np.zeros((n, m))
    hi = np.zeros((n, m))
    for i in range(n):
        for j in range(m):
            x[i, j], lo[i, j], hi[i, j] = lottery_at(curves[i][j], float(sol.q[i, j]))
    return PriceLotteryGrid(x, lo, hi)


def sale_probabilities(lots: PriceLotteryGrid, value_marginals) -> np.ndarray:
    """Pr[V_ij >= p_ij] under the lottery, per cell."""
    n, m = lots.shape
    out = np.zeros((n, m))
    for i in range(n):
        for j in range(m):
            d = value_marginals[i][j]
            out[i, j] = lots.x[i, j] * d.tail(lots.p_lo[i, j]) + (1 - lots.x[i, j]) * d.tail(lots.p_hi[i, j])
    return out


def expected_posted_revenue(lots: PriceLotteryGrid, value_marginals) -> np.ndarray:
    """E[p_ij * Pr[V_ij >= p_ij]] per cell."""
    n, m = lots.shape
    out = np.zeros((n, m))
    for i in range(n):
        for j in range(m):
            d = value_marginals[i][j]
            a = lots.p_lo[i, j] * d.tail(lots.p_lo[i, j])
            b = lots.p_hi[i, j] * d.tail(lots.p_hi[i, j])
            out[i, j] = lots.x[i, j] * a + (1 - lots.x[i, j]) * b
    return out


def rspm_bound(lots: PriceLotteryGrid, value_marginals) -> dict:
    """eta1 * eta2 * sum_ij E[p Pr[t >= p]] with the two slack factors."""
    sale = sale_probabilities(lots, value_marginals)
    eta1 = 1.0 - float(sale.sum(axis=0).max())
    eta2 = 1.0 - float(sale.sum(axis=1).max())
    base = float(expected_posted_revenue(lots, value_marginals).sum())
    vacuous = eta1 <= 0 or eta2 <= 0
    if vacuous:
        warnings.warn("posted-price bound is vacuous (eta <= 0)", VacuousBound, stacklevel=2)
    bound = eta1 * eta2 * base if not vacuous else 0.0
    return {"eta1": eta1, "eta2": eta2, "base": base, "bound": bound, "vacuous": vacuous}


def lotteries_to_rspm(lots: PriceLotteryGrid, order=None, value_marginals=None):
    """Randomised RSPM drawing each price from its lottery; bound attached as metadata."""
    from .mech import Mechanism

    n, _ = lots.shape
    order = tuple(range(n)) if order is None else tuple(int(i) for i in order)
    meta = {}
    if value_marginals is not None:
        meta["bound"] = rspm_bound(lots, value_marginals)
    return Mechanism(tag="rspm", lots=lots, order=order, meta=meta)
