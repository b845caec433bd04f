"""Learners that turn samples or an approximate prior into simple mechanisms.

Each learner returns a Mechanism (or a pair) together with an audit dict of
the estimated parameters it used.
"""

from __future__ import annotations

import itertools
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .curve import check_regular_curve, ironed_virtuals, revenue_curve
from .dist import (
    DEFAULT_GUARD_PROFILES,
    InfeasibleBand,
    Marginal,
    ProductPrior,
    empirical,
    enumerate_cells,
    enumerate_profiles,
    quantile,
    sample,
    tail_threshold,
    truncate,
    upper_median,
)
from .exante import (
    DEFAULT_C,
    PriceLotteryGrid,
    caps_approx,
    caps_regular,
    expected_posted_revenue,
    solution_to_lotteries,
    solve_exante,
)
from .mech import (
    EntryFeeRule,
    Mechanism,
    VcgFee,
    aspe,
    batch_best_utility,
    posted,
    run,
    vcg_entry,
)
from .oracle import welfare_allocation
from .valuation import Valuation, restrict_to_cheap_items, value_marginals

DEFAULT_K_FEE = 512
DEFAULT_MU = 0.125
NET_BUDGET = 10_000_000


class GuaranteeWarning(UserWarning):
    pass


class NetTooLarge(RuntimeError):
    pass


@dataclass(frozen=True, eq=False)
class AccessModel:
    """How a learner sees the prior.

    ``samples_bounded`` / ``samples_regular``: ``count`` profiles drawn from
    ``prior`` with ``seed``. ``approx_dist``: ``prior`` is the approximate
    prior itself and ``eps`` its cellwise Kolmogorov radius.
    """

    mode: str
    prior: ProductPrior
    count: int = 0
    seed: int = 0
    eps: float = 0.0
    H: float | None = None

    def __post_init__(self):
        if self.mode not in ("samples_bounded", "samples_regular", "approx_dist"):
            raise ValueError(f"unknown access mode {self.mode!r}")
        if not 0.0 <= self.eps <= 1.0:
            raise ValueError("eps must lie in [0, 1]")
        if self.mode == "samples_bounded" and self.H is not None and self.H <= 0:
            raise ValueError("H must be positive")
        if self.mode != "approx_dist" and self.count < 1:
            raise ValueError("sample access needs count >= 1")

    def draw(self, stream: int = 0, count: int | None = None) -> np.ndarray:
        rng = np.random.default_rng(np.random.SeedSequence([self.seed, stream]))
        return sample(self.prior, rng, self.count if count is None else count)


@dataclass(frozen=True)
class BalancedThresholds:
    beta: np.ndarray
    b: float
    c: float
    eta: float
    tails: np.ndarray = field(default=None)


def _rng(seed: int, stream: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([seed, stream]))


def _ud(prior: ProductPrior) -> list[list[Marginal]]:
    return value_marginals(prior, Valuation.unit_demand())


# ---------------------------------------------------------------- unit-demand


def learn_ud_maxmin(approx: ProductPrior, eps: float, order=None) -> tuple[Mechanism, dict]:
    """Randomised SPM from the ex-ante program over the approximate prior."""
    n, m = approx.n, approx.m
    if (n + m) * eps >= 0.25:
        warnings.warn("(n + m) * eps >= 1/4: the revenue guarantee is vacuous", GuaranteeWarning, stacklevel=2)
    vm = _ud(approx)
    curves = [[revenue_curve(c) for c in row] for row in vm]
    row_cap, col_cap = caps_approx(n, m, eps)
    sol = solve_exante(curves, row_cap, col_cap, tag=f"approx({eps:g})")
    lots = solution_to_lotteries(sol, curves)
    order = tuple(range(n)) if order is None else tuple(order)
    H = max(c.upper for row in vm for c in row)
    audit = {
        "cp_objective": sol.objective,
        "q": sol.q.tolist(),
        "caps": [row_cap, col_cap],
        "eps": eps,
        "H": H,
        "guarantee": {"factor": 0.25 - (n + m) * eps, "opt_divisor": 8.0, "slack": 2 * eps * m * n * H},
        "certificate": sol.certificate,
    }
    return Mechanism("spm", lots=lots, order=order, meta={"learner": "ud-maxmin"}), audit


def ud_maxmin_guarantee(opt: float, n: int, m: int, eps: float, H: float) -> float:
    return (0.25 - (n + m) * eps) * (opt / 8.0 - 2.0 * eps * m * n * H)


def learn_ud_regular(access: AccessModel, delta: float = 0.1, C: float = DEFAULT_C, order=None) -> tuple[Mechanism, dict]:
    """Truncate each empirical cell at an estimated high quantile, then solve the capped program."""
    prior = access.prior
    n, m = prior.n, prior.m
    Z = max(n, m)
    N = access.count
    draws = access.draw(stream=0)
    lo, hi = 1.0 / (3 * C * Z), 1.0 / (C * Z)
    eps = math.sqrt(math.log(4 * n * m / delta) / (2 * N))
    H = np.zeros((n, m))
    cells: list[list[Marginal]] = []
    regular_warn = []
    for i in range(n):
        row = []
        for j in range(m):
            col = draws[:, i, j]
            if col.ndim > 1:
                col = col.max(axis=-1)
            if np.all(col == col[0]):
                # a degenerate cell needs no truncation
                H[i, j] = col[0]
                row.append(empirical(col))
                continue
            try:
                H[i, j] = tail_threshold(col, lo, hi)
            except InfeasibleBand as e:
                raise InfeasibleBand(f"cell ({i}, {j}): {e}", e.below, e.above) from e
            emp = truncate(empirical(col), H[i, j])
            if not check_regular_curve(emp, 50)["regular"]:
                regular_warn.append([i, j])
            row.append(emp)
        cells.append(row)
    if regular_warn:
        warnings.warn(f"empirical cells {regular_warn} fail the regularity scan", GuaranteeWarning, stacklevel=2)
    curves = [[revenue_curve(c) for c in row] for row in cells]
    row_cap, col_cap = caps_regular(n, m, eps, C)
    sol = solve_exante(curves, row_cap, col_cap, tag=f"regular({C:g},{eps:.4g})")
    lots = solution_to_lotteries(sol, curves)
    # prices above the truncation point never help: lower them to H_ij
    lots = PriceLotteryGrid(lots.x, np.minimum(lots.p_lo, H), np.minimum(lots.p_hi, H))
    order = tuple(range(n)) if order is None else tuple(order)
    audit = {
        "H": H.tolist(),
        "band": [lo, hi],
        "eps": eps,
        "samples": N,
        "cp_objective": sol.objective,
        "q": sol.q.tolist(),
        "irregular_cells": regular_warn,
    }
    return Mechanism("spm", lots=lots, order=order, meta={"learner": "ud-regular"}), audit


# ---------------------------------------------------------------- additive


def _item_spm_revenue(cells: list[Marginal], prices) -> float:
    rev, none_yet = 0.0, 1.0
    for d, p in zip(cells, prices):
        b = float(d.tail(p)) if p > 0 else 1.0 - float(d.cdf(0.0))
        rev += none_yet * b * p
        none_yet *= 1.0 - b
    return rev


def _threshold_prices(cells: list[Marginal], tau: float) -> list[float]:
    """Per bidder, the lowest value whose ironed virtual value reaches tau."""
    out = []
    for d in cells:
        iv = ironed_virtuals(d)
        ok = np.nonzero(iv.phi >= tau)[0]
        out.append(float(iv.support[ok[0]]) if ok.size else d.sentinel)
    return out


def _prophet_tau(cells: list[Marginal], guard: int = DEFAULT_GUARD_PROFILES) -> float:
    """Upper median of max_i of the positive part of the ironed virtual value."""
    phis = [ironed_virtuals(d) for d in cells]
    try:
        sig, w = enumerate_cells(cells, guard)
    except RuntimeError:
        return 0.0
    top = np.zeros(sig.shape[0])
    for i, iv in enumerate(phis):
        top = np.maximum(top, np.maximum(iv.at(sig[:, i]), 0.0))
    return upper_median(top, w)


def srev_item_prices(cells: list[Marginal]) -> tuple[list[float], dict]:
    """Threshold prices for one item, choosing tau among ironed-virtual levels."""
    levels = sorted({float(x) for d in cells for x in ironed_virtuals(d).phi if x > 0})
    prophet = _prophet_tau(cells)
    cands = sorted(set(levels) | ({prophet} if prophet > 0 else set()))
    best_rev, best = -1.0, ([d.sentinel for d in cells], math.inf)
    for tau in cands:
        p = _threshold_prices(cells, tau)
        r = _item_spm_revenue(cells, p)
        if r > best_rev + 1e-12:
            best_rev, best = r, (p, tau)
    p_prophet = _threshold_prices(cells, prophet) if prophet > 0 else [d.sentinel for d in cells]
    info = {
        "tau": best[1],
        "empirical_revenue": max(best_rev, 0.0),
        "prophet_tau": prophet,
        "prophet_prices": p_prophet,
        "prophet_revenue": _item_spm_revenue(cells, p_prophet),
    }
    return best[0], info


def learn_additive_bounded(access: AccessModel, delta: float = 0.1) -> tuple[tuple[Mechanism, Mechanism], dict]:
    """Per-item threshold SPM on the empirical prior plus a single-sample VCG entry-fee mechanism."""
    prior = access.prior
    n, m = prior.n, prior.m
    draws = access.draw(stream=0)
    emp = [[empirical(draws[:, i, j]) for j in range(m)] for i in range(n)]
    P = np.zeros((n, m))
    items = []
    for j in range(m):
        p, info = srev_item_prices([emp[i][j] for i in range(n)])
        P[:, j] = p
        items.append(info)
    held_out = access.draw(stream=1, count=1)[0]
    spm = posted(P, rationed=False)
    vcg = vcg_entry(VcgFee("single_sample", sample=np.asarray(held_out, dtype=float)), n)
    audit = {"prices": P.tolist(), "items": items, "held_out": held_out.tolist(), "samples": access.count}
    return (spm, vcg), audit


def learn_additive_maxmin(
    approx: ProductPrior, eps: float, k: int = DEFAULT_K_FEE, seed: int = 0, truth: ProductPrior | None = None
) -> tuple[tuple[Mechanism, Mechanism], dict]:
    """Per-item max-min SPMs and a VCG mechanism with an order-statistic entry fee."""
    n, m = approx.n, approx.m
    if k < DEFAULT_K_FEE:
        raise ValueError(f"k must be at least {DEFAULT_K_FEE}")
    if m * eps > 1.0 / 16:
        warnings.warn("m * eps > 1/16: the entry-fee guarantee is void", GuaranteeWarning, stacklevel=2)
    x = np.zeros((n, m))
    lo = np.zeros((n, m))
    hi = np.zeros((n, m))
    objs = []
    for j in range(m):
        col = ProductPrior.grid([[approx[i, j]] for i in range(n)])
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", GuaranteeWarning)
            mech_j, a = learn_ud_maxmin(col, eps)
        x[:, j], lo[:, j], hi[:, j] = mech_j.lots.x[:, 0], mech_j.lots.p_lo[:, 0], mech_j.lots.p_hi[:, 0]
        objs.append(a["cp_objective"])
    spm = Mechanism("spm", lots=PriceLotteryGrid(x, lo, hi), order=tuple(range(n)), meta={"learner": "additive-maxmin"})
    rng = _rng(seed, 0)
    draws = tuple(sample(ProductPrior.grid([approx.row(i)]), rng, k)[:, 0] for i in range(n))
    rank = math.ceil(5 * k / 16)
    vcg = vcg_entry(VcgFee("order_stat", draws=draws, rank=rank), n)
    audit = {"cp_objectives": objs, "k": k, "rank": rank, "eps": eps}
    if truth is not None:
        audit["acceptance"] = order_stat_acceptance(vcg, truth)
    return (spm, vcg), audit


def order_stat_acceptance(vcg: Mechanism, truth: ProductPrior, guard: int = DEFAULT_GUARD_PROFILES) -> dict:
    """min / max over bidders and opponent profiles of Pr_t[surplus >= fee]."""
    n = truth.n
    lo, hi = 1.0, 0.0
    for i in range(n):
        sig, w = enumerate_cells(truth.row(i), guard)
        if n > 1:
            others = ProductPrior.grid([truth.row(k) for k in range(n) if k != i])
            prof, _ = enumerate_profiles(others, guard)
            bs = prof.max(axis=1)
        else:
            bs = np.zeros((1, truth.m))
        for b in np.unique(bs, axis=0):
            fee = vcg.vcg.fee(i, b)
            pr = float(w[np.maximum(sig - b, 0.0).sum(axis=1) >= fee - 1e-12].sum())
            lo, hi = min(lo, pr), max(hi, pr)
    return {"min": lo, "max": hi}


# ---------------------------------------------------------------- XOS, sample based


class EpsilonNet:
    """Price vectors with every coordinate a positive multiple of ``step`` up to ``B``."""

    def __init__(self, B: float, step: float, m: int, budget: int = NET_BUDGET):
        if step <= 0 or B < step:
            raise ValueError("need step > 0 and B >= step")
        self.B, self.step, self.m = float(B), float(step), int(m)
        self.levels = np.arange(1, int(math.floor(B / step + 1e-9)) + 1) * step
        if self.size > budget:
            raise NetTooLarge(f"net has {self.size} vectors, over budget {budget}; use a larger step")

    @property
    def size(self) -> int:
        return len(self.levels) ** self.m

    def __len__(self) -> int:
        return self.size

    def __iter__(self):
        for combo in itertools.product(self.levels, repeat=self.m):
            yield np.array(combo)

    def contains(self, p) -> bool:
        p = np.asarray(p, dtype=float)
        k = p / self.step
        return bool(np.all(np.abs(k - np.round(k)) <= 1e-12 * np.maximum(1.0, k)) and np.all(p <= self.B + 1e-12))


def epsilon_net(B: float, step: float, m: int, budget: int = NET_BUDGET) -> EpsilonNet:
    return EpsilonNet(B, step, m, budget)


def estimate_G(source, n: int | None = None, m: int | None = None) -> float:
    """max over cells of the value whose tail mass is 1/(5 max{m, n}).

    ``source`` is a ProductPrior or a sample array of shape (N, n, m[, K]).
    """
    if isinstance(source, ProductPrior):
        n, m = source.n, source.m
        vm = _ud(source)
        Z = max(n, m)
        return max(quantile(c, 1.0 / (5 * Z)) for row in vm for c in row)
    arr = np.asarray(source, dtype=float)
    if arr.ndim == 4:
        arr = arr.max(axis=-1)
    _, n, m = arr.shape
    Z = max(n, m)
    return max(quantile(empirical(arr[:, i, j]), 1.0 / (5 * Z)) for i in range(n) for j in range(m))


def mu_balance_k(eta: float, n: int, m: int, B: float, step: float, mu: float) -> int:
    """Fee-batch size with unit leading constant."""
    return math.ceil((math.log(1 / eta) + math.log(n) + m * math.log(B / step)) / mu**2)


def learn_xos_sample(
    access: AccessModel,
    val: Valuation,
    B: float,
    step: float,
    fee_count: int,
    select_count: int,
    mu: float = DEFAULT_MU,
    audit_truth: bool = True,
    budget: int = NET_BUDGET,
) -> tuple[Mechanism, dict]:
    """Best ASPE over a price net, with median entry fees from a separate batch."""
    prior = access.prior
    n, m = prior.n, prior.m
    net = epsilon_net(B, step, m, budget)
    fee_batch = access.draw(stream=1, count=fee_count)
    sel_batch = access.draw(stream=2, count=select_count)
    fee_samples = [fee_batch[:, i] for i in range(n)]
    best_rev, best_mech, revs = -1.0, None, []
    for p in net:
        mech = aspe(p, n, EntryFeeRule.median(fee_samples))
        r = float(np.mean([run(mech, val, t).revenue for t in sel_batch]))
        revs.append(r)
        if r > best_rev + 1e-12:
            best_rev, best_mech = r, mech
    audit = {"net_size": net.size, "empirical_revenues": revs, "selected": revs.index(best_rev), "mu": mu}
    if audit_truth:
        audit["balance"] = mu_balance_audit(net, fee_samples, prior, val, mu)
    return best_mech, audit


def mu_balance_audit(net, fee_samples, truth: ProductPrior, val: Valuation, mu: float, guard=DEFAULT_GUARD_PROFILES) -> dict:
    """Exact Pr_t[u(t, S) >= median fee] for every (p, i, non-empty S)."""
    n, m = truth.n, truth.m
    rows = [enumerate_cells(truth.row(i), guard) for i in range(n)]
    probs, bad = [], 0
    for p in net:
        rule = EntryFeeRule.median(fee_samples)
        for i in range(n):
            sig, w = rows[i]
            for r in range(1, m + 1):
                for S in itertools.combinations(range(m), r):
                    fee = rule.fee(i, S, val, p)
                    u = batch_best_utility(val, sig, p, S)
                    pr = float(w[u >= fee - 1e-12 * max(1.0, abs(fee))].sum())
                    probs.append(pr)
                    if abs(pr - 0.5) > mu + 1e-12:
                        bad += 1
    return {"triples": len(probs), "violations": bad, "min": min(probs), "max": max(probs)}


# ---------------------------------------------------------------- symmetric


def learn_symmetric_thresholds(
    source, n: int, b: float, eta: float, val: Valuation | None = None, exact: bool | None = None
) -> BalancedThresholds:
    """b-balanced per-item thresholds and the Core shift c.

    ``source`` is the symmetric prior (exact mode) or pooled single-item value
    samples of shape (N, m) (sample mode, interior band).
    """
    if not 0 < b < 1 or not 0 <= eta <= 0.25:
        raise ValueError("need b in (0, 1) and eta in [0, 1/4]")
    if n < 2:
        raise ValueError("balanced thresholds need n >= 2")
    if isinstance(source, ProductPrior):
        if not source.symmetric:
            raise ValueError("symmetric learner needs a symmetric prior")
        vm = value_marginals(source, val or Valuation.unit_demand())[0]
        lo, hi = b / n, b / (n - 1)
    else:
        arr = np.asarray(source, dtype=float)
        vm = [empirical(arr[:, j]) for j in range(arr.shape[1])]
        lo, hi = b / n + b / (3 * n * n), b / (n - 1) - b / (3 * n * n)
    beta = np.array([tail_threshold(d, lo, hi) for d in vm])
    tails = np.array([float(d.tail(x)) for d, x in zip(vm, beta)])
    c = _core_shift(vm, beta, eta)
    return BalancedThresholds(beta=beta, b=b, c=c, eta=eta, tails=tails)


def _core_shift(vm, beta, eta) -> float:
    total = sum(float(d.tail(x)) for d, x in zip(vm, beta))
    if total <= 0.5 - eta / 2 + 1e-12:
        return 0.0
    shifts = sorted({float(v - x) for d, x in zip(vm, beta) for v in d.support if v > x})
    # the tail sum at beta + c is right-continuous in c, so probe just above each jump too
    for c in shifts:
        for probe in (c, np.nextafter(c, np.inf)):
            s = sum(float(d.tail(x + probe)) for d, x in zip(vm, beta))
            if 0.5 - eta / 2 - 1e-12 <= s <= 0.5 - eta / 4 + 1e-12:
                return float(probe)
    raise InfeasibleBand("no shift puts the tail sum inside [1/2 - eta/2, 1/2 - eta/4]")


def core_prices(
    profiles, weights, val: Valuation, thresholds: BalancedThresholds, guard: int = 10_000
) -> np.ndarray:
    """Q_j = E[1/2 sum_i 1[j in A_i] gamma_j] under the exact welfare allocation of v'."""
    profiles = np.asarray(profiles, dtype=float)
    n, m = profiles.shape[1], profiles.shape[2]
    adj = thresholds.beta + thresholds.c
    Q = np.zeros(m)
    for t, w in zip(profiles, weights):
        views = [restrict_to_cheap_items(val, t[i], adj) for i in range(n)]
        alloc, _ = welfare_allocation([v.value for v in views], n, m, guard)
        for i in range(n):
            if alloc[i]:
                Q += w * 0.5 * views[i].supporting_prices(alloc[i])
    return Q


def learn_symmetric_aspe(
    source, val: Valuation, thresholds: BalancedThresholds, n: int | None = None, G: float | None = None
) -> tuple[Mechanism, dict]:
    """ASPE with Core-derived prices and shared median entry fees.

    ``source`` is the exact symmetric prior or a sample array (N, n, m[, K]);
    the same batch serves prices and fees.
    """
    if isinstance(source, ProductPrior):
        profiles, w = enumerate_profiles(source)
        row_sig, row_w = enumerate_cells(source.row(0))
        n = source.n
    else:
        profiles = np.asarray(source, dtype=float)
        w = np.full(profiles.shape[0], 1.0 / profiles.shape[0])
        n = profiles.shape[1]
        row_sig = profiles.reshape((-1,) + profiles.shape[2:])
        row_w = np.full(row_sig.shape[0], 1.0 / row_sig.shape[0])
    Q = core_prices(profiles, w, val, thresholds)
    rule = EntryFeeRule.median([row_sig] * n, [row_w] * n, cheap=thresholds.beta + thresholds.c)
    mech = aspe(Q, n, rule)
    audit = {"Q": Q.tolist(), "beta": thresholds.beta.tolist(), "c": thresholds.c}
    if G is not None:
        m = profiles.shape[2]
        worst = 0.0
        for r in range(1, m + 1):
            for S in itertools.combinations(range(m), r):
                worst = max(worst, rule.fee(0, S, val, Q))
        audit["max_fee"] = worst
        audit["fee_cap"] = m * G
    return mech, audit


def induced_unit_demand(prior: ProductPrior, val: Valuation) -> tuple[ProductPrior, Valuation]:
    """Unit-demand instance whose cell (i, j) is the law of V(t_ij)."""
    vm = value_marginals(prior, val)
    return ProductPrior.grid(vm, symmetric=prior.symmetric), Valuation.unit_demand()


def learn_symmetric_subadditive(access: AccessModel, val: Valuation) -> tuple[Mechanism, dict]:
    """Learn an SPM on the induced unit-demand instance and run it as an RSPM."""
    ud_prior, _ = induced_unit_demand(access.prior, val)
    if access.mode == "approx_dist":
        mech, audit = learn_ud_maxmin(ud_prior, access.eps)
    else:
        sub = AccessModel(access.mode, ud_prior, count=access.count, seed=access.seed, H=access.H)
        if access.mode == "samples_regular":
            mech, audit = learn_ud_regular(sub)
        else:
            draws = sub.draw(stream=0)
            emp = ProductPrior.grid([[empirical(draws[:, i, j]) for j in range(ud_prior.m)] for i in range(ud_prior.n)])
            mech, audit = learn_ud_maxmin(emp, 0.0)
    out = Mechanism("rspm", lots=mech.lots, order=mech.order, meta={"learner": "sym-subadditive"})
    return out, audit


def beta_rspm(thresholds: BalancedThresholds, n: int) -> Mechanism:
    return posted(np.tile(thresholds.beta, (n, 1)), rationed=True)


def posted_lower_bound(lots: PriceLotteryGrid, vm) -> float:
    return float(expected_posted_revenue(lots, vm).sum())
