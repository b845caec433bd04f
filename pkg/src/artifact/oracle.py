"""Brute-force ground truth on tiny instances.

Optimal BIC revenue by LP, the best deterministic posted-price mechanism on a
price grid, the exact Core benchmark and exact welfare maximisation.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .dist import ProductPrior, enumerate_cells, enumerate_profiles
from .lp import linprog_max
from .mech import Mechanism, expected_revenue_exact, posted
from .valuation import Valuation, restrict_to_cheap_items, single_item_values, value, value_marginals

DEFAULT_GUARD_ALLOCATIONS = 10_000
GAP_TOL = 1e-7


class GuardExceeded(RuntimeError):
    pass


class UnsupportedClass(TypeError):
    pass


@dataclass(frozen=True)
class TinyInstanceGuard:
    profiles: int = 100_000
    allocations: int = DEFAULT_GUARD_ALLOCATIONS


def feasible_allocations(val: Valuation, n: int, m: int, guard: int = DEFAULT_GUARD_ALLOCATIONS):
    """Every assignment of items to bidders or to nobody whose bundles are feasible."""
    if (n + 1) ** m > 50 * guard:
        raise GuardExceeded(f"{(n + 1) ** m} raw assignments exceeds guard")
    out = []
    for owners in itertools.product(range(n + 1), repeat=m):
        bundles = [tuple(j for j in range(m) if owners[j] == i) for i in range(n)]
        if val.cls == "unit-demand" and any(len(b) > 1 for b in bundles):
            continue
        if val.cls == "constrained-additive" and not all(val.feasibility.feasible(b) for b in bundles):
            continue
        out.append(tuple(bundles))
    if len(out) > guard:
        raise GuardExceeded(f"{len(out)} allocations exceeds guard {guard}")
    return out


def opt_bic_lp(prior: ProductPrior, val: Valuation, guard: TinyInstanceGuard = TinyInstanceGuard()) -> dict:
    """Optimal revenue over BIC and interim IR mechanisms.

    Variables: ex-post lottery weights x[t, A] per profile and allocation, and
    free interim payments per (bidder, type).
    """
    if val.cls not in ("additive", "unit-demand", "constrained-additive"):
        raise UnsupportedClass(f"BIC LP does not support {val.cls}")
    n, m = prior.n, prior.m
    rows = [enumerate_cells(prior.row(i), guard.profiles) for i in range(n)]
    sizes = [r[0].shape[0] for r in rows]
    T = math.prod(sizes)
    if T > guard.profiles:
        raise GuardExceeded(f"{T} profiles exceeds guard {guard.profiles}")
    allocs = feasible_allocations(val, n, m, guard.allocations)
    A = len(allocs)
    idx = np.indices(sizes).reshape(n, -1).T  # (T, n) row-atom index per bidder
    wt = np.ones(T)
    for i in range(n):
        wt *= rows[i][1][idx[:, i]]
    # vals[i][tau, a] = v_i(type tau, bundle of bidder i in allocation a)
    vals = []
    for i in range(n):
        sig = rows[i][0]
        vi = np.array([[value(val, sig[tau], allocs[a][i]) for a in range(A)] for tau in range(sizes[i])])
        vals.append(vi)
    npay = sum(sizes)
    pay_off = np.cumsum([0] + sizes)
    nx = T * A
    nvar = nx + 2 * npay

    def pay_cols(i, tau):
        k = nx + pay_off[i] + tau
        return k, k + npay

    A_ub, b_ub = [], []
    for t in range(T):
        row = np.zeros(nvar)
        row[t * A : (t + 1) * A] = 1.0
        A_ub.append(row)
        b_ub.append(1.0)
    for i in range(n):
        p_i = rows[i][1]
        w_other = wt / p_i[idx[:, i]]
        # interim allocation value: coef[tau_true, tau_report] over x
        for tau in range(sizes[i]):
            for rep in range(sizes[i]):
                mask = idx[:, i] == rep
                coef = np.zeros(nx)
                block = (w_other[mask][:, None] * vals[i][tau][None, :]).ravel()
                cols = (np.nonzero(mask)[0][:, None] * A + np.arange(A)[None, :]).ravel()
                coef[cols] = block
                if rep == tau:
                    truth = coef
                    # IR: -(truthful value - P) <= 0
                    row = np.zeros(nvar)
                    row[:nx] = -coef
                    pp, pm = pay_cols(i, tau)
                    row[pp], row[pm] = 1.0, -1.0
                    A_ub.append(row)
                    b_ub.append(0.0)
            for rep in range(sizes[i]):
                if rep == tau:
                    continue
                mask = idx[:, i] == rep
                lie = np.zeros(nx)
                block = (w_other[mask][:, None] * vals[i][tau][None, :]).ravel()
                cols = (np.nonzero(mask)[0][:, None] * A + np.arange(A)[None, :]).ravel()
                lie[cols] = block
                truth_row = np.zeros(nx)
                tmask = idx[:, i] == tau
                tblock = (w_other[tmask][:, None] * vals[i][tau][None, :]).ravel()
                tcols = (np.nonzero(tmask)[0][:, None] * A + np.arange(A)[None, :]).ravel()
                truth_row[tcols] = tblock
                # lie value - P(rep) <= truth value - P(tau)
                row = np.zeros(nvar)
                row[:nx] = lie - truth_row
                pp, pm = pay_cols(i, rep)
                row[pp] -= 1.0
                row[pm] += 1.0
                tp, tm = pay_cols(i, tau)
                row[tp] += 1.0
                row[tm] -= 1.0
                A_ub.append(row)
                b_ub.append(0.0)
    c = np.zeros(nvar)
    for i in range(n):
        for tau in range(sizes[i]):
            pp, pm = pay_cols(i, tau)
            c[pp] = rows[i][1][tau]
            c[pm] = -rows[i][1][tau]
    res = linprog_max(c, np.array(A_ub), np.array(b_ub))
    cert = dict(res.certificate)
    cert["ok"] = cert["gap"] <= GAP_TOL * max(1.0, abs(res.objective)) and cert["primal_residual"] <= GAP_TOL
    return {"value": res.objective, "profiles": T, "allocations": A, "certificate": cert}


def expected_max_welfare(prior: ProductPrior, val: Valuation, guard: TinyInstanceGuard = TinyInstanceGuard()) -> float:
    profiles, w = enumerate_profiles(prior, guard.profiles)
    allocs = feasible_allocations(val, prior.n, prior.m, guard.allocations)
    total = 0.0
    for t, p in zip(profiles, w):
        best = max(sum(value(val, t[i], a[i]) for i in range(prior.n)) for a in allocs)
        total += p * best
    return total


def price_grid(prior: ProductPrior, val: Valuation) -> list[list[np.ndarray]]:
    """Per cell: support of the single-item value plus the never-sell sentinel."""
    vm = value_marginals(prior, val)
    return [[np.concatenate([c.support, [c.sentinel]]) for c in row] for row in vm]


def opt_posted_exhaustive(
    prior: ProductPrior,
    val: Valuation,
    family: str = "rspm",
    grid=None,
    guard: TinyInstanceGuard = TinyInstanceGuard(),
) -> tuple[Mechanism, float]:
    """Best deterministic SPM/RSPM (identity order) over the price grid."""
    n, m = prior.n, prior.m
    grid = price_grid(prior, val) if grid is None else grid
    cells = [grid[i][j] for i in range(n) for j in range(m)]
    combos = math.prod(len(g) for g in cells)
    if combos > guard.allocations * 100:
        raise GuardExceeded(f"{combos} price vectors exceeds guard")
    if family == "spm" and val.cls == "additive":
        return _best_additive_spm(prior, grid)
    profiles, w = enumerate_profiles(prior, guard.profiles)
    best_rev, best_p = -1.0, None
    kernel = family == "rspm" or val.cls == "unit-demand"
    if kernel:
        V = np.ascontiguousarray(single_item_values(val, profiles))
        order = np.arange(n, dtype=np.int64)
        one = np.ones(1)
    for combo in itertools.product(*cells):
        P = np.array(combo, dtype=float).reshape(n, m)
        if kernel:
            rev = float(_kernels.rspm_revenue(V, w, P[None].copy(), one, order))
        else:
            rev = expected_revenue_exact(posted(P, rationed=False), prior, val, guard.profiles)
        if rev > best_rev + 1e-12:
            best_rev, best_p = rev, P
    return posted(best_p, rationed=(family == "rspm")), best_rev


def _best_additive_spm(prior: ProductPrior, grid) -> tuple[Mechanism, float]:
    # additive buyers decide item by item, so items are optimised separately
    n, m = prior.n, prior.m
    P = np.zeros((n, m))
    total = 0.0
    for j in range(m):
        col = [prior[i, j] for i in range(n)]
        best, best_p = -1.0, None
        for combo in itertools.product(*(grid[i][j] for i in range(n))):
            rev, none_yet = 0.0, 1.0
            for i, p in enumerate(combo):
                d = col[i]
                buy = float(d.tail(p)) if p > 0 else 1.0 - float(d.cdf(0.0))
                rev += none_yet * buy * p
                none_yet *= 1.0 - buy
            if rev > best + 1e-12:
                best, best_p = rev, combo
        P[:, j] = best_p
        total += best
    return posted(P, rationed=False), total


def welfare_allocation(value_fns, n: int, m: int, guard: int = DEFAULT_GUARD_ALLOCATIONS):
    """Welfare-maximising assignment; ``value_fns[i]`` maps an item tuple to a value.

    Ties go to the lexicographically smallest owner vector, with n meaning unassigned.
    """
    if (n + 1) ** m > guard:
        raise GuardExceeded(f"{(n + 1) ** m} allocations exceeds guard {guard}")
    best, best_alloc = -np.inf, None
    for owners in itertools.product(range(n + 1), repeat=m):
        bundles = tuple(tuple(j for j in range(m) if owners[j] == i) for i in range(n))
        w = sum(value_fns[i](bundles[i]) for i in range(n))
        if w > best + 1e-12:
            best, best_alloc = w, bundles
    return best_alloc, float(best)


def exact_welfare_allocation(profile, val: Valuation, guard: int = DEFAULT_GUARD_ALLOCATIONS):
    t = np.asarray(profile, dtype=float)
    n, m = t.shape[0], t.shape[1]
    fns = [lambda S, i=i: value(val, t[i], S) for i in range(n)]
    return welfare_allocation(fns, n, m, guard)[0]


def exact_core(
    prior: ProductPrior,
    beta,
    c: float,
    val: Valuation,
    guard: TinyInstanceGuard = TinyInstanceGuard(),
) -> float:
    """E over profiles of max_alloc sum_i v(t_i, S_i restricted to items below beta_j + c)."""
    beta = np.asarray(beta, dtype=float)
    profiles, w = enumerate_profiles(prior, guard.profiles)
    n, m = prior.n, prior.m
    total = 0.0
    for t, p in zip(profiles, w):
        views = [restrict_to_cheap_items(val, t[i], beta + c) for i in range(n)]
        _, best = welfare_allocation([v.value for v in views], n, m, guard.allocations)
        total += p * best
    return total
