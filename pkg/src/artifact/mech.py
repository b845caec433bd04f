"""Execution and exact or Monte Carlo revenue of every mechanism family.

Families: ``spm`` and ``rspm`` (sequential posted prices, the latter selling
at most one item per bidder), ``spem`` and ``aspe`` (posted prices with an
entry fee, the latter with anonymous prices), ``vcg_entry`` (second-price
items behind a personalised entry fee) and ``myerson_item`` (each item sold
by its own optimal single-item auction).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .curve import IronedVirtuals, ironed_virtuals
from .dist import DEFAULT_GUARD_PROFILES, ProductPrior, enumerate_cells, enumerate_profiles, sample, upper_median
from .exante import PriceLotteryGrid
from .valuation import Valuation, demand, restrict_to_cheap_items, single_item_values, value, value_marginals

TAGS = ("spm", "rspm", "spem", "aspe", "vcg_entry", "myerson_item")
ENUM_BUDGET = 10_000_000
ACCEPT_TOL = 1e-12


class BudgetExceeded(RuntimeError):
    pass


class UnusableRule(ValueError):
    pass


class UnsupportedMechanism(TypeError):
    pass


@dataclass(frozen=True, eq=False)
class EntryFeeRule:
    """delta_i(S) for a bidder facing available set S.

    ``table``: explicit {(i, S): fee}; missing entries are an error.
    ``median_samples``: upper median of the bidder's best utility over a stored
    sample batch (``samples[i]`` has shape (K, m) or (K, m, C)), memoised per S.
    With ``cheap`` set, utilities are taken under the view that keeps only
    items whose single value is below ``cheap[j]``.
    """

    mode: str
    table: dict = field(default_factory=dict)
    samples: tuple = ()
    weights: tuple = ()
    cheap: np.ndarray | None = None
    cache: dict = field(default_factory=dict, compare=False)

    @staticmethod
    def zero() -> "EntryFeeRule":
        return EntryFeeRule("zero")

    @staticmethod
    def from_table(table: dict) -> "EntryFeeRule":
        return EntryFeeRule("table", table={(int(i), tuple(sorted(S))): float(v) for (i, S), v in table.items()})

    @staticmethod
    def median(samples, weights=None, cheap=None) -> "EntryFeeRule":
        """``samples[i]`` is bidder i's batch; ``weights[i]`` optional atom weights."""
        smp = tuple(np.asarray(s, dtype=float) for s in samples)
        w = () if weights is None else tuple(np.asarray(x, dtype=float) for x in weights)
        c = None if cheap is None else np.asarray(cheap, dtype=float)
        return EntryFeeRule("median_samples", samples=smp, weights=w, cheap=c)

    def fee(self, i: int, S: tuple[int, ...], val: Valuation, prices_i: np.ndarray) -> float:
        if self.mode == "zero":
            return 0.0
        if self.mode == "table":
            key = (i, S)
            if key not in self.table:
                raise UnusableRule(f"fee table has no entry for bidder {i}, set {S}")
            return self.table[key]
        key = (i, S, prices_i.tobytes())
        if key in self.cache:
            return self.cache[key]
        if i >= len(self.samples) or len(self.samples[i]) == 0:
            raise UnusableRule("median fee rule has no samples")
        if self.cheap is None:
            us = batch_best_utility(val, self.samples[i], prices_i, S)
        else:
            us = cheap_best_utility(val, self.samples[i], prices_i, S, self.cheap)
        out = upper_median(us, self.weights[i] if self.weights else None)
        self.cache[key] = out
        return out


@dataclass(frozen=True, eq=False)
class VcgFee:
    """Entry-fee source for VCG with entry fees.

    ``median``: exact upper median over the bidder's row law (``rows[i]``
    is (signals, weights)). ``single_sample``: one held-out type per bidder.
    ``order_stat``: the ``rank``-th largest surplus over stored draws.
    """

    mode: str
    rows: tuple = ()
    sample: np.ndarray | None = None
    draws: tuple = ()
    rank: int = 0

    def fee(self, i: int, b: np.ndarray) -> float:
        if self.mode == "median":
            sig, w = self.rows[i]
            return upper_median(np.maximum(sig - b, 0.0).sum(axis=1), w)
        if self.mode == "single_sample":
            return float(np.maximum(self.sample[i] - b, 0.0).sum())
        if self.mode == "order_stat":
            s = np.sort(np.maximum(self.draws[i] - b, 0.0).sum(axis=1))[::-1]
            return float(s[self.rank - 1])
        raise UnusableRule(f"unknown fee mode {self.mode!r}")


@dataclass(frozen=True, eq=False)
class Mechanism:
    tag: str
    lots: PriceLotteryGrid | None = None
    order: tuple = ()
    fee: EntryFeeRule | None = None
    vcg: VcgFee | None = None
    virtuals: tuple | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.tag not in TAGS:
            raise UnsupportedMechanism(f"unknown mechanism tag {self.tag!r}")
        if self.tag == "aspe" and self.lots is not None:
            for grid in (self.lots.x, self.lots.p_lo, self.lots.p_hi):
                if not np.all(grid == grid[0]):
                    raise UnsupportedMechanism("aspe prices must be identical across bidders")

    @property
    def n(self) -> int:
        if self.lots is not None:
            return self.lots.shape[0]
        if self.virtuals is not None:
            return len(self.virtuals)
        return len(self.order)

    def to_dict(self) -> dict:
        d = {"tag": self.tag, "order": list(self.order)}
        if self.lots is not None:
            if self.lots.is_deterministic():
                d["prices"] = np.where(self.lots.x > 0, self.lots.p_lo, self.lots.p_hi).tolist()
            else:
                d["lotteries"] = self.lots.to_dict()
        if self.fee is not None:
            if self.fee.mode == "table":
                data = [{"bidder": i, "set": list(S), "fee": v} for (i, S), v in sorted(self.fee.table.items())]
            elif self.fee.mode == "median_samples":
                data = [s.tolist() for s in self.fee.samples]
            else:
                data = None
            d["entry_fee"] = {"mode": self.fee.mode, "data": data}
            if self.fee.weights:
                d["entry_fee"]["weights"] = [w.tolist() for w in self.fee.weights]
            if self.fee.cheap is not None:
                d["entry_fee"]["cheap"] = self.fee.cheap.tolist()
        if self.vcg is not None:
            v = self.vcg
            if v.mode == "median":
                data = [{"signals": s.tolist(), "weights": w.tolist()} for s, w in v.rows]
            elif v.mode == "single_sample":
                data = v.sample.tolist()
            else:
                data = {"rank": v.rank, "draws": [x.tolist() for x in v.draws]}
            d["vcg_fee"] = {"mode": v.mode, "data": data}
        if self.virtuals is not None:
            d["virtuals"] = [
                [{"support": iv.support.tolist(), "phi": iv.phi.tolist()} for iv in row] for row in self.virtuals
            ]
        if self.meta:
            d["meta"] = self.meta
        return d


@dataclass
class Outcome:
    allocation: list
    payments: np.ndarray
    fees: np.ndarray

    @property
    def revenue(self) -> float:
        return float(self.payments.sum())


# ---------------------------------------------------------------- constructors


def posted(prices, order=None, rationed: bool = False) -> Mechanism:
    lots = prices if isinstance(prices, PriceLotteryGrid) else PriceLotteryGrid.deterministic(prices)
    n = lots.shape[0]
    order = tuple(range(n)) if order is None else tuple(order)
    return Mechanism("rspm" if rationed else "spm", lots=lots, order=order)


def spem(prices, fee: EntryFeeRule, order=None) -> Mechanism:
    lots = PriceLotteryGrid.deterministic(prices)
    n = lots.shape[0]
    return Mechanism("spem", lots=lots, order=tuple(range(n)) if order is None else tuple(order), fee=fee)


def aspe(prices, n: int, fee: EntryFeeRule, order=None) -> Mechanism:
    p = np.tile(np.asarray(prices, dtype=float), (n, 1))
    lots = PriceLotteryGrid.deterministic(p)
    return Mechanism("aspe", lots=lots, order=tuple(range(n)) if order is None else tuple(order), fee=fee)


def vcg_entry(fee: VcgFee, n: int) -> Mechanism:
    return Mechanism("vcg_entry", order=tuple(range(n)), vcg=fee)


def vcg_median_fee(prior: ProductPrior, guard: int = DEFAULT_GUARD_PROFILES) -> VcgFee:
    rows = tuple(enumerate_cells(prior.row(i), guard) for i in range(prior.n))
    return VcgFee("median", rows=rows)


def myerson(prior: ProductPrior, val: Valuation) -> Mechanism:
    vm = value_marginals(prior, val)
    virt = tuple(tuple(ironed_virtuals(c) for c in row) for row in vm)
    return Mechanism("myerson_item", order=tuple(range(prior.n)), virtuals=virt)


# ---------------------------------------------------------------- execution


def best_utility(val: Valuation, t, prices, S) -> float:
    D = demand(val, t, prices, S)
    if not D:
        return 0.0
    return value(val, t, D) - float(np.asarray(prices)[list(D)].sum())


def batch_best_utility(val: Valuation, rows, prices, S) -> np.ndarray:
    """Best utility from available set S for a batch of rows (closed forms where they exist)."""
    rows = np.asarray(rows, dtype=float)
    S = list(S)
    if not S:
        return np.zeros(rows.shape[0])
    p = np.asarray(prices, dtype=float)[S]
    if val.cls == "additive":
        return np.maximum(rows[:, S] - p, 0.0).sum(axis=1)
    if val.cls == "unit-demand":
        return np.maximum((rows[:, S] - p).max(axis=1), 0.0)
    if val.cls == "xos":
        # max over clauses and subsets separates into positive parts per clause
        return np.maximum(rows[:, S, :] - p[None, :, None], 0.0).sum(axis=1).max(axis=1)
    return np.array([best_utility(val, t, prices, S) for t in rows])


def cheap_best_utility(val: Valuation, rows, prices, S, cheap) -> np.ndarray:
    """Best utility under v'(t, .) = v(t, . restricted to items with V(t_j) < cheap[j])."""
    rows = np.asarray(rows, dtype=float)
    if val.cls in ("additive", "unit-demand", "xos", "constrained-additive"):
        # a zero signal removes the item for these classes
        dear = single_item_values(val, rows) >= cheap
        r = rows.copy()
        r[dear] = 0.0
        return batch_best_utility(val, r, prices, S)
    p = np.asarray(prices, dtype=float)
    out = np.empty(rows.shape[0])
    for k, t in enumerate(rows):
        view = restrict_to_cheap_items(val, t, cheap)
        D = view.demand(p, S)
        out[k] = view.value(D) - float(p[list(D)].sum()) if D else 0.0
    return out


def draw_prices(lots: PriceLotteryGrid, rng: np.random.Generator) -> np.ndarray:
    u = rng.random(lots.shape)
    return np.where(u < lots.x, lots.p_lo, lots.p_hi)


def _rspm_choice(v: np.ndarray, p: np.ndarray, avail: list[int]) -> int:
    best, bu, bv = -1, 0.0, 0.0
    for j in avail:
        u = v[j] - p[j]
        if u < 0 or v[j] <= 0:
            continue
        if best < 0 or u > bu or (u == bu and v[j] > bv):
            best, bu, bv = j, u, v[j]
    return best


def run_posted(mech: Mechanism, val: Valuation, profile, prices=None, rng=None) -> Outcome:
    profile = np.asarray(profile, dtype=float)
    P = _prices(mech, prices, rng)
    n, m = P.shape
    avail = list(range(m))
    alloc = [()] * n
    pay = np.zeros(n)
    V = single_item_values(val, profile) if mech.tag == "rspm" else None
    for i in mech.order:
        if mech.tag == "rspm":
            j = _rspm_choice(V[i], P[i], avail)
            S = (j,) if j >= 0 else ()
        else:
            S = demand(val, profile[i], P[i], avail)
        alloc[i] = S
        pay[i] = float(P[i, list(S)].sum()) if S else 0.0
        avail = [j for j in avail if j not in S]
    return Outcome(alloc, pay, np.zeros(n))


def run_entry_fee(mech: Mechanism, val: Valuation, profile, prices=None, rng=None) -> Outcome:
    profile = np.asarray(profile, dtype=float)
    P = _prices(mech, prices, rng)
    n, m = P.shape
    avail = tuple(range(m))
    alloc = [()] * n
    pay = np.zeros(n)
    fees = np.zeros(n)
    rule = mech.fee or EntryFeeRule.zero()
    for i in mech.order:
        delta = rule.fee(i, avail, val, P[i])
        S = demand(val, profile[i], P[i], avail)
        u = value(val, profile[i], S) - float(P[i, list(S)].sum()) if S else 0.0
        if u >= delta - ACCEPT_TOL * max(1.0, abs(delta)):
            alloc[i] = S
            fees[i] = delta
            pay[i] = delta + (float(P[i, list(S)].sum()) if S else 0.0)
            avail = tuple(j for j in avail if j not in S)
    return Outcome(alloc, pay, fees)


def run_vcg_entry(mech: Mechanism, val: Valuation, profile, cache=None) -> Outcome:
    if val.cls != "additive":
        raise UnsupportedMechanism("VCG with entry fees needs additive bidders")
    t = np.asarray(profile, dtype=float)
    n, m = t.shape
    alloc = [()] * n
    pay = np.zeros(n)
    fees = np.zeros(n)
    for i in range(n):
        others = np.delete(t, i, axis=0)
        b = others.max(axis=0) if others.size else np.zeros(m)
        key = (i, b.tobytes())
        if cache is not None and key in cache:
            delta = cache[key]
        else:
            delta = mech.vcg.fee(i, b)
            if cache is not None:
                cache[key] = delta
        gain = t[i] - b
        surplus = float(np.maximum(gain, 0.0).sum())
        if surplus >= delta - ACCEPT_TOL * max(1.0, abs(delta)):
            S = tuple(int(j) for j in np.nonzero(gain > 0)[0])
            alloc[i] = S
            fees[i] = delta
            pay[i] = delta + float(b[list(S)].sum()) if S else delta
    return Outcome(alloc, pay, fees)


def myerson_winner(virtuals: list[IronedVirtuals], bids) -> tuple[int, float]:
    """Winner (or -1) and threshold payment for one item."""
    phis = np.array([float(iv.at(b)) for iv, b in zip(virtuals, bids)])
    n = len(phis)
    best = -1
    for i in range(n):
        if phis[i] > 0 and (best < 0 or phis[i] > phis[best]):
            best = i
    if best < 0:
        return -1, 0.0
    iv = virtuals[best]
    lower = max((phis[k] for k in range(best)), default=-np.inf)
    upper = max((phis[k] for k in range(best + 1, n)), default=-np.inf)
    for s, ph in zip(iv.support, iv.phi):
        if ph > 0 and ph > lower and ph >= upper:
            return best, float(s)
    return best, float(bids[best])  # pragma: no cover - the bid itself always wins


def run_myerson(mech: Mechanism, val: Valuation, profile) -> Outcome:
    V = single_item_values(val, np.asarray(profile, dtype=float))
    n, m = V.shape
    alloc = [[] for _ in range(n)]
    pay = np.zeros(n)
    for j in range(m):
        col = [mech.virtuals[i][j] for i in range(n)]
        w, p = myerson_winner(col, V[:, j])
        if w >= 0:
            alloc[w].append(j)
            pay[w] += p
    return Outcome([tuple(a) for a in alloc], pay, np.zeros(n))


def run(mech: Mechanism, val: Valuation, profile, prices=None, rng=None) -> Outcome:
    if mech.tag in ("spm", "rspm"):
        return run_posted(mech, val, profile, prices, rng)
    if mech.tag in ("spem", "aspe"):
        return run_entry_fee(mech, val, profile, prices, rng)
    if mech.tag == "vcg_entry":
        return run_vcg_entry(mech, val, profile)
    return run_myerson(mech, val, profile)


def _prices(mech: Mechanism, prices, rng) -> np.ndarray:
    if prices is not None:
        return np.asarray(prices, dtype=float)
    if mech.lots.is_deterministic():
        return np.where(mech.lots.x > 0, mech.lots.p_lo, mech.lots.p_hi)
    if rng is None:
        raise ValueError("randomised prices need a generator")
    return draw_prices(mech.lots, rng)


# ---------------------------------------------------------------- evaluation


def price_draws(lots: PriceLotteryGrid) -> tuple[np.ndarray, np.ndarray]:
    """All joint price tables of independent two-point lotteries with weights."""
    x, lo, hi = lots.x, lots.p_lo, lots.p_hi
    rand = np.argwhere((x > 0) & (x < 1) & (lo != hi))
    base = np.where(x > 0, lo, hi)
    D = 1 << len(rand)
    if D > ENUM_BUDGET:
        raise BudgetExceeded(f"{D} price draws exceeds budget")
    P = np.repeat(base[None], D, axis=0)
    w = np.ones(D)
    for bit, (i, j) in enumerate(rand):
        take_lo = ((np.arange(D) >> bit) & 1) == 0
        P[:, i, j] = np.where(take_lo, lo[i, j], hi[i, j])
        w *= np.where(take_lo, x[i, j], 1 - x[i, j])
    return P, w


def _uses_rspm_kernel(mech: Mechanism, val: Valuation) -> bool:
    return mech.tag == "rspm" or (mech.tag == "spm" and val.cls == "unit-demand")


def expected_outcome_exact(
    mech: Mechanism,
    prior: ProductPrior,
    val: Valuation,
    guard: int = DEFAULT_GUARD_PROFILES,
    budget: int = ENUM_BUDGET,
) -> dict:
    """Exact expected revenue and expected entry fees by full enumeration."""
    if mech.tag == "myerson_item":
        return {"revenue": myerson_revenue_exact(mech, prior, val, guard), "fees": 0.0}
    if mech.tag == "spm" and val.cls == "additive":
        return {"revenue": additive_spm_revenue(mech, prior), "fees": 0.0}
    try:
        profiles, w = enumerate_profiles(prior, guard)
    except RuntimeError as e:
        raise BudgetExceeded(f"{e}; use the Monte Carlo estimator") from e
    if mech.lots is not None:
        P, pw = price_draws(mech.lots)
    else:
        P, pw = np.zeros((1, 0, 0)), np.ones(1)
    if profiles.shape[0] * P.shape[0] > budget:
        raise BudgetExceeded(
            f"{profiles.shape[0]} profiles x {P.shape[0]} price draws exceeds {budget}; use the Monte Carlo estimator"
        )
    if _uses_rspm_kernel(mech, val):
        V = np.ascontiguousarray(single_item_values(val, profiles))
        order = np.asarray(mech.order, dtype=np.int64)
        rev = float(_kernels.rspm_revenue(V, w, np.ascontiguousarray(P), pw, order))
        return {"revenue": rev, "fees": 0.0}
    rev = fee = 0.0
    cache: dict = {}
    for d in range(P.shape[0]):
        for t in range(profiles.shape[0]):
            if mech.tag == "vcg_entry":
                out = run_vcg_entry(mech, val, profiles[t], cache)
            else:
                out = run(mech, val, profiles[t], prices=P[d])
            rev += pw[d] * w[t] * out.revenue
            fee += pw[d] * w[t] * float(out.fees.sum())
    return {"revenue": rev, "fees": fee}


def expected_revenue_exact(mech, prior, val, guard: int = DEFAULT_GUARD_PROFILES, budget: int = ENUM_BUDGET) -> float:
    return expected_outcome_exact(mech, prior, val, guard, budget)["revenue"]


def additive_spm_revenue(mech: Mechanism, prior: ProductPrior) -> float:
    """Additive buyers treat items separately: sum over items of the sequential sale revenue."""
    lots = mech.lots
    total = 0.0
    for j in range(prior.m):
        none_yet = 1.0
        for i in mech.order:
            d = prior[i, j]
            if d.clauses is not None:
                raise UnsupportedMechanism("additive posted prices need scalar signals")
            rev_i = buy_i = 0.0
            for x, p in ((lots.x[i, j], lots.p_lo[i, j]), (1 - lots.x[i, j], lots.p_hi[i, j])):
                if x <= 0:
                    continue
                b = float(d.tail(p)) if p > 0 else 1.0 - float(d.cdf(0.0))
                buy_i += x * b
                rev_i += x * b * p
            total += none_yet * rev_i
            none_yet *= 1.0 - buy_i
    return total


def myerson_revenue_exact(mech: Mechanism, prior: ProductPrior, val: Valuation, guard=DEFAULT_GUARD_PROFILES) -> float:
    """Items are sold independently, so each item column is enumerated alone."""
    vm = value_marginals(prior, val)
    total = 0.0
    for j in range(prior.m):
        sig, w = enumerate_cells([vm[i][j] for i in range(prior.n)], guard)
        col = [mech.virtuals[i][j] for i in range(prior.n)]
        for t in range(sig.shape[0]):
            win, p = myerson_winner(col, sig[t])
            if win >= 0:
                total += w[t] * p
    return total


def expected_revenue_mc(mech: Mechanism, prior: ProductPrior, val: Valuation, trials: int, seed: int) -> tuple[float, float]:
    """Seeded Monte Carlo mean and standard error of per-run revenue."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    rng = np.random.default_rng(seed)
    profiles = sample(prior, rng, trials)
    if mech.lots is not None:
        u = rng.random((trials,) + mech.lots.shape)
        P = np.where(u < mech.lots.x, mech.lots.p_lo, mech.lots.p_hi)
    if _uses_rspm_kernel(mech, val):
        V = np.ascontiguousarray(single_item_values(val, profiles))
        revs = _kernels.rspm_paired(V, np.ascontiguousarray(P), np.asarray(mech.order, dtype=np.int64))
    else:
        revs = np.empty(trials)
        for t in range(trials):
            revs[t] = run(mech, val, profiles[t], prices=P[t] if mech.lots is not None else None).revenue
    se = float(revs.std(ddof=1) / math.sqrt(trials)) if trials > 1 else 0.0
    return float(revs.mean()), se


def purchased_set_distribution(val: Valuation, row_cells, prices, fee: float, S) -> dict:
    """Law of the set bought by one bidder facing (prices, fee, available S)."""
    sig, w = enumerate_cells(row_cells)
    S = tuple(sorted(S))
    out: dict = {}
    for t, p in zip(sig, w):
        D = demand(val, t, prices, S)
        u = value(val, t, D) - float(np.asarray(prices)[list(D)].sum()) if D else 0.0
        got = D if u >= fee - ACCEPT_TOL * max(1.0, abs(fee)) else None
        out[got] = out.get(got, 0.0) + float(p)
    return out


def tv_distance(a: dict, b: dict) -> float:
    keys = set(a) | set(b)
    return 0.5 * sum(abs(a.get(k, 0.0) - b.get(k, 0.0)) for k in keys)
