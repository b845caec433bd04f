"""Valuation classes over independent items: value, demand and supporting prices.

A bidder row ``t`` is an array of shape (m,) for scalar signals or (m, K) for
XOS clause signals. Item sets are sorted tuples of item indices.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

CLASSES = ("additive", "unit-demand", "constrained-additive", "xos", "subadditive-table")
MAX_EXHAUSTIVE_ITEMS = 16
TIE_TOL = 1e-12


class InvalidValuation(ValueError):
    pass


class UnsupportedOracle(TypeError):
    pass


class DemandTooLarge(RuntimeError):
    pass


@dataclass(frozen=True)
class Feasibility:
    """Downward-closed family of item sets for constrained-additive bidders.

    kind ``cardinality``: sets of size <= k.
    kind ``sets``: subsets of the listed sets.
    kind ``partition``: at most caps[g] items from each group g.
    """

    kind: str
    k: int = 0
    sets: tuple[frozenset, ...] = ()
    groups: tuple[tuple[int, ...], ...] = ()
    caps: tuple[int, ...] = ()

    def __post_init__(self):
        if self.kind not in ("cardinality", "sets", "partition"):
            raise InvalidValuation(f"unknown feasibility kind {self.kind!r}")
        if self.kind == "sets" and not self.sets:
            raise InvalidValuation("empty feasibility family")
        if self.kind == "partition" and len(self.groups) != len(self.caps):
            raise InvalidValuation("partition groups and caps differ in length")

    def feasible(self, S: Iterable[int]) -> bool:
        S = frozenset(S)
        if self.kind == "cardinality":
            return len(S) <= self.k
        if self.kind == "sets":
            return any(S <= F for F in self.sets)
        for g, cap in zip(self.groups, self.caps):
            if len(S.intersection(g)) > cap:
                return False
        covered = set().union(*map(set, self.groups)) if self.groups else set()
        return S <= covered

    @property
    def is_matroid(self) -> bool:
        return self.kind in ("cardinality", "partition")

    def to_dict(self) -> dict:
        if self.kind == "cardinality":
            return {"kind": "cardinality", "k": self.k}
        if self.kind == "sets":
            return {"kind": "sets", "sets": [sorted(s) for s in self.sets]}
        return {"kind": "partition", "groups": [list(g) for g in self.groups], "caps": list(self.caps)}

    @staticmethod
    def from_dict(d: dict) -> "Feasibility":
        kind = d["kind"]
        if kind == "cardinality":
            return Feasibility("cardinality", k=int(d["k"]))
        if kind == "sets":
            return Feasibility("sets", sets=tuple(frozenset(int(x) for x in s) for s in d["sets"]))
        if kind == "partition":
            return Feasibility(
                "partition",
                groups=tuple(tuple(int(x) for x in g) for g in d["groups"]),
                caps=tuple(int(c) for c in d["caps"]),
            )
        raise InvalidValuation(f"unknown feasibility kind {kind!r}")


@dataclass(frozen=True)
class Valuation:
    """A valuation class plus its parameters.

    For ``subadditive-table`` the table maps (item mask, signals of the items
    in the mask) to a value, so a value depends only on the signals of the
    items it covers.
    """

    cls: str
    feasibility: Feasibility | None = None
    clauses: int | None = None
    table: dict = field(default_factory=dict, compare=False, hash=False)

    def __post_init__(self):
        if self.cls not in CLASSES:
            raise InvalidValuation(f"unknown valuation class {self.cls!r}")
        if self.cls == "constrained-additive" and self.feasibility is None:
            raise InvalidValuation("constrained-additive needs a feasibility family")

    @staticmethod
    def additive() -> "Valuation":
        return Valuation("additive")

    @staticmethod
    def unit_demand() -> "Valuation":
        return Valuation("unit-demand")

    @staticmethod
    def xos(K: int) -> "Valuation":
        return Valuation("xos", clauses=int(K))

    @staticmethod
    def cardinality(k: int) -> "Valuation":
        return Valuation("constrained-additive", feasibility=Feasibility("cardinality", k=int(k)))

    @staticmethod
    def constrained(feas: Feasibility) -> "Valuation":
        return Valuation("constrained-additive", feasibility=feas)

    @staticmethod
    def subadditive(table: dict) -> "Valuation":
        return Valuation("subadditive-table", table=dict(table))

    @property
    def is_xos(self) -> bool:
        return self.cls in ("additive", "unit-demand", "xos")

    def to_dict(self) -> dict:
        d: dict = {"class": self.cls}
        if self.feasibility is not None:
            d["feasibility"] = self.feasibility.to_dict()
        if self.clauses is not None:
            d["clauses"] = self.clauses
        if self.table:
            d["table"] = [
                {"mask": int(mask), "signals": list(sig), "value": float(v)}
                for (mask, sig), v in sorted(self.table.items())
            ]
        return d

    @staticmethod
    def from_dict(d: dict) -> "Valuation":
        cls = d.get("class")
        feas = Feasibility.from_dict(d["feasibility"]) if "feasibility" in d else None
        table = {}
        for e in d.get("table", []):
            table[(int(e["mask"]), tuple(float(x) for x in e["signals"]))] = float(e["value"])
        return Valuation(cls, feasibility=feas, clauses=d.get("clauses"), table=table)


# ---------------------------------------------------------------- helpers


def _items(S) -> tuple[int, ...]:
    return tuple(sorted(set(int(j) for j in S)))


def _mask(S) -> int:
    out = 0
    for j in S:
        out |= 1 << int(j)
    return out


def _table_key(t, S):
    return (_mask(S), tuple(float(t[j]) for j in S))


def all_subsets(items: Sequence[int]):
    items = tuple(items)
    for r in range(len(items) + 1):
        yield from itertools.combinations(items, r)


# ---------------------------------------------------------------- oracles


def value(val: Valuation, t, S) -> float:
    """v(t, S) for one bidder row ``t``."""
    S = _items(S)
    if not S:
        return 0.0
    t = np.asarray(t, dtype=float)
    c = val.cls
    if c == "additive":
        return float(t[list(S)].sum())
    if c == "unit-demand":
        return float(t[list(S)].max())
    if c == "constrained-additive":
        return _best_feasible_sum(val.feasibility, t, S)
    if c == "xos":
        if t.ndim != 2:
            raise InvalidValuation("xos signals need shape (m, K)")
        return float(t[list(S)].sum(axis=0).max())
    key = _table_key(t, S)
    if key not in val.table:
        raise InvalidValuation(f"subadditive table has no entry for items {S}")
    return float(val.table[key])


def _best_feasible_sum(feas: Feasibility, t, S) -> float:
    vals = {j: float(t[j]) for j in S}
    if feas.kind == "cardinality":
        return float(sum(sorted(vals.values(), reverse=True)[: feas.k]))
    if feas.kind == "partition":
        total = 0.0
        for g, cap in zip(feas.groups, feas.caps):
            inside = sorted((vals[j] for j in g if j in vals), reverse=True)
            total += sum(inside[:cap])
        return float(total)
    best = 0.0
    for F in feas.sets:
        best = max(best, sum(vals[j] for j in S if j in F))
    return float(best)


def single_item_value(val: Valuation, t, j: int) -> float:
    """V(t_j) = v(t, {j})."""
    return value(val, t, (j,))


def single_item_values(val: Valuation, profiles) -> np.ndarray:
    """V(t_ij) for an array of rows or profiles; drops the clause axis."""
    P = np.asarray(profiles, dtype=float)
    c = val.cls
    if c == "xos":
        return P.max(axis=-1)
    if c in ("additive", "unit-demand"):
        return P.copy()
    if c == "constrained-additive":
        m = P.shape[-1]
        ok = np.array([val.feasibility.feasible((j,)) for j in range(m)])
        return np.where(ok, P, 0.0)
    out = np.empty_like(P)
    flat = P.reshape(-1, P.shape[-1])
    of = out.reshape(-1, P.shape[-1])
    for r in range(flat.shape[0]):
        for j in range(flat.shape[1]):
            of[r, j] = value(val, flat[r], (j,))
    return out


def _better(cand, best) -> bool:
    """Order by utility, then value, then fewer items, then lexicographic."""
    u, v, S = cand
    bu, bv, bS = best
    scale = TIE_TOL * max(1.0, abs(u), abs(bu), abs(v), abs(bv))
    if u > bu + scale:
        return True
    if u < bu - scale:
        return False
    if v > bv + scale:
        return True
    if v < bv - scale:
        return False
    if len(S) != len(bS):
        return len(S) < len(bS)
    return S < bS


def demand_exhaustive(val: Valuation, t, prices, available) -> tuple[int, ...]:
    avail = _items(available)
    if len(avail) > MAX_EXHAUSTIVE_ITEMS:
        raise DemandTooLarge(f"{len(avail)} items exceeds exhaustive demand limit {MAX_EXHAUSTIVE_ITEMS}")
    prices = np.asarray(prices, dtype=float)
    best = (0.0, 0.0, ())
    for S in all_subsets(avail):
        if not S:
            continue
        if val.cls == "constrained-additive" and not val.feasibility.feasible(S):
            continue
        v = value(val, t, S)
        u = v - float(prices[list(S)].sum())
        cand = (u, v, S)
        if _better(cand, best):
            best = cand
    return best[2]


def demand(val: Valuation, t, prices, available) -> tuple[int, ...]:
    """Utility-maximising bundle among ``available`` items.

    Ties go to the larger value, then the smaller set, then the
    lexicographically smallest sorted tuple.
    """
    avail = _items(available)
    if not avail:
        return ()
    t = np.asarray(t, dtype=float)
    prices = np.asarray(prices, dtype=float)
    c = val.cls
    if c == "additive":
        return tuple(j for j in avail if t[j] > prices[j] or (t[j] == prices[j] and t[j] > 0))
    if c == "unit-demand":
        best = (0.0, 0.0, ())
        for j in avail:
            if t[j] <= 0:
                continue
            cand = (float(t[j] - prices[j]), float(t[j]), (j,))
            if cand[0] >= 0 and _better(cand, best):
                best = cand
        return best[2]
    if c == "constrained-additive" and val.feasibility.kind == "cardinality":
        return _greedy_pick(t, prices, avail, val.feasibility.k)
    if c == "constrained-additive" and val.feasibility.kind == "partition":
        out = []
        for g, cap in zip(val.feasibility.groups, val.feasibility.caps):
            out.extend(_greedy_pick(t, prices, [j for j in avail if j in g], cap))
        return tuple(sorted(out))
    return demand_exhaustive(val, t, prices, avail)


def _greedy_pick(t, prices, avail, k) -> tuple[int, ...]:
    cand = [j for j in avail if t[j] > prices[j] or (t[j] == prices[j] and t[j] > 0)]
    cand.sort(key=lambda j: (-(t[j] - prices[j]), -t[j], j))
    return tuple(sorted(cand[:k]))


def utility(val: Valuation, t, S, prices) -> float:
    S = _items(S)
    return value(val, t, S) - float(np.asarray(prices, dtype=float)[list(S)].sum()) if S else 0.0


def supporting_prices(val: Valuation, t, S) -> np.ndarray:
    """Per-item prices (length m, zero off S) certifying v(t, S) additively."""
    if not val.is_xos:
        raise UnsupportedOracle(f"supporting prices need an XOS valuation, got {val.cls}")
    S = _items(S)
    t = np.asarray(t, dtype=float)
    m = t.shape[0]
    theta = np.zeros(m)
    if not S:
        return theta
    idx = list(S)
    if val.cls == "additive":
        theta[idx] = t[idx]
    elif val.cls == "unit-demand":
        j = idx[int(np.argmax(t[idx]))]
        theta[j] = t[j]
    else:
        k = int(np.argmax(t[idx].sum(axis=0)))
        theta[idx] = t[idx, k]
    return theta


@dataclass(frozen=True)
class CheapView:
    """v'(t, S) = v(t, S ∩ C) with C the items whose single value is below threshold."""

    base: Valuation
    t: np.ndarray
    cheap: tuple[int, ...]

    def value(self, S) -> float:
        return value(self.base, self.t, [j for j in _items(S) if j in self.cheap])

    def single_item_value(self, j: int) -> float:
        return self.value((j,))

    def demand(self, prices, available) -> tuple[int, ...]:
        m = self.t.shape[0]
        full = value(self.base, self.t, range(m))
        p = np.array(prices, dtype=float)
        for j in range(m):
            if j not in self.cheap:
                p[j] = 2.0 * full
        out = demand(self.base, self.t, p, available)
        # when every value is zero the padded price is zero too; C still rules
        return tuple(j for j in out if j in self.cheap)

    def supporting_prices(self, S) -> np.ndarray:
        inside = [j for j in _items(S) if j in self.cheap]
        return supporting_prices(self.base, self.t, inside)


def restrict_to_cheap_items(val: Valuation, t, thresholds) -> CheapView:
    t = np.asarray(t, dtype=float)
    thr = np.asarray(thresholds, dtype=float)
    m = t.shape[0]
    cheap = tuple(j for j in range(m) if single_item_value(val, t, j) < thr[j])
    return CheapView(val, t, cheap)


def check_properties(val: Valuation, t, m: int, tol: float = 1e-9) -> dict:
    """Exhaustive monotonicity and subadditivity scan over all item subsets."""
    subs = list(all_subsets(range(m)))
    vals = {S: value(val, t, S) for S in subs}
    mono = sub = 0
    for S in subs:
        for U in subs:
            if set(S) <= set(U) and vals[S] > vals[U] + tol:
                mono += 1
            union = _items(set(S) | set(U))
            if vals[union] > vals[S] + vals[U] + tol:
                sub += 1
    return {"monotone_violations": mono, "subadditive_violations": sub, "empty": vals[()]}


def budget_additive_table(supports: Sequence[Sequence[float]], cap: float) -> dict:
    """Table for v(t, S) = min(cap, sum of t_j over S) on every signal combination."""
    m = len(supports)
    table = {}
    for S in all_subsets(range(m)):
        if not S:
            continue
        for sig in itertools.product(*(supports[j] for j in S)):
            table[(_mask(S), tuple(float(x) for x in sig))] = float(min(cap, sum(sig)))
    return table


def value_marginals(prior, val: Valuation):
    """Per-cell law of V(t_ij) as an n x m nested list of scalar Marginals."""
    from .dist import Marginal, value_marginal

    out = []
    for row in prior.marginals:
        cells = []
        for j, c in enumerate(row):
            if val.cls in ("additive", "unit-demand", "xos"):
                cells.append(value_marginal(c))
                continue
            if not c.is_discrete:
                raise InvalidValuation("pushforward needs discrete marginals")
            m = len(row)
            vals = []
            for s in c.support:
                t = np.zeros(m)
                t[j] = s
                if val.cls == "subadditive-table":
                    vals.append(float(val.table[(1 << j, (float(s),))]))
                else:
                    vals.append(value(val, t, (j,)))
            vals = np.asarray(vals)
            uniq, inv = np.unique(vals, return_inverse=True)
            cells.append(Marginal.discrete(uniq, np.bincount(inv, weights=c.probs, minlength=uniq.size)))
        out.append(cells)
    return out
