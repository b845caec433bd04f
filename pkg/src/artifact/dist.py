"""Single-cell marginals, product priors, sampling and distances."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

PROB_TOL = 1e-12
CHECK_TOL = 1e-9
DEFAULT_GUARD_PROFILES = 100_000


class DistError(ValueError):
    pass


class UnsupportedSampling(DistError):
    pass


class NeedsGrid(DistError):
    pass


class InfeasibleBand(DistError):
    def __init__(self, msg: str, below: float | None = None, above: float | None = None):
        super().__init__(msg)
        self.below = below
        self.above = above


class GuardExceeded(RuntimeError):
    pass


_FAMILIES = ("uniform", "truncexp", "equal_revenue")


@dataclass(frozen=True, eq=False)
class Marginal:
    """Distribution of one (bidder, item) signal.

    Discrete marginals hold ``support``/``probs``. When ``clauses`` is set the
    signal is a vector of XOS clause values per atom and ``support`` holds the
    single-item value (the clause maximum) of each atom.
    """

    kind: str
    support: np.ndarray | None = None
    probs: np.ndarray | None = None
    clauses: np.ndarray | None = None
    family: str | None = None
    params: tuple = ()
    cap: float | None = None

    # ---- constructors

    @staticmethod
    def discrete(support: Sequence[float], probs: Sequence[float]) -> "Marginal":
        s = np.asarray(support, dtype=float).ravel()
        p = np.asarray(probs, dtype=float).ravel()
        if s.size == 0 or s.size != p.size:
            raise DistError("support and probs must be non-empty and of equal length")
        if np.any(p < -PROB_TOL) or abs(p.sum() - 1.0) > PROB_TOL * max(1, s.size) * 10:
            raise DistError(f"probs must be non-negative and sum to 1 (sum={p.sum():.15g})")
        if np.any(s < 0):
            raise DistError("support values must be non-negative")
        if np.any(np.diff(s) <= 0):
            raise DistError("support must be strictly ascending")
        keep = p > 0
        s, p = s[keep], p[keep]
        p = p / p.sum()
        s.setflags(write=False)
        p.setflags(write=False)
        return Marginal("discrete", support=s, probs=p)

    @staticmethod
    def from_pairs(pairs: dict[float, float]) -> "Marginal":
        items = sorted(pairs.items())
        return Marginal.discrete([k for k, _ in items], [v for _, v in items])

    @staticmethod
    def point(v: float) -> "Marginal":
        return Marginal.discrete([v], [1.0])

    @staticmethod
    def xos(clauses: Sequence[Sequence[float]], probs: Sequence[float]) -> "Marginal":
        """Atoms are clause vectors; atoms are ordered by their maximum."""
        c = np.asarray(clauses, dtype=float)
        p = np.asarray(probs, dtype=float).ravel()
        if c.ndim != 2 or c.shape[0] != p.size or p.size == 0:
            raise DistError("clauses must be (atoms, K) matching probs")
        if np.any(c < 0):
            raise DistError("clause values must be non-negative")
        if np.any(p < -PROB_TOL) or abs(p.sum() - 1.0) > PROB_TOL * max(1, p.size) * 10:
            raise DistError("probs must be non-negative and sum to 1")
        keep = p > 0
        c, p = c[keep], p[keep] / p[keep].sum()
        vals = c.max(axis=1)
        order = np.lexsort(tuple(c[:, k] for k in reversed(range(c.shape[1]))) + (vals,))
        c, p, vals = c[order], p[order], vals[order]
        for a in (c, p, vals):
            a.setflags(write=False)
        return Marginal("discrete", support=vals, probs=p, clauses=c)

    @staticmethod
    def parametric(family: str, *params: float) -> "Marginal":
        if family not in _FAMILIES:
            raise DistError(f"unknown parametric family {family!r}")
        if family == "uniform":
            a, b = params
            if not 0 <= a < b:
                raise DistError("uniform needs 0 <= a < b")
        elif family == "truncexp":
            rate, h = params
            if rate <= 0 or h <= 0:
                raise DistError("truncexp needs rate > 0 and H > 0")
        else:
            (h,) = params
            if h < 1:
                raise DistError("equal_revenue needs H >= 1")
        return Marginal("parametric", family=family, params=tuple(float(x) for x in params))

    # ---- basic queries

    @property
    def is_discrete(self) -> bool:
        return self.kind == "discrete"

    @property
    def upper(self) -> float:
        if self.is_discrete:
            return float(self.support[-1])
        if self.family == "uniform":
            h = self.params[1]
        else:
            h = self.params[-1]
        return float(h if self.cap is None else min(h, self.cap))

    @property
    def sentinel(self) -> float:
        """Price above every value: used for never-sell lottery branches."""
        return self.upper + 1.0

    def _raw_cdf(self, x):
        x = np.asarray(x, dtype=float)
        f, p = self.family, self.params
        if f == "uniform":
            a, b = p
            return np.clip((x - a) / (b - a), 0.0, 1.0)
        if f == "truncexp":
            rate, h = p
            z = -math.expm1(-rate * h)
            out = -np.expm1(-rate * np.clip(x, 0.0, h)) / z
            return np.where(x < 0, 0.0, np.where(x >= h, 1.0, out))
        (h,) = p
        return np.where(x < 1, 0.0, np.where(x >= h, 1.0, 1.0 - 1.0 / np.maximum(x, 1.0)))

    def cdf(self, x):
        """Pr[X <= x]."""
        x = np.asarray(x, dtype=float)
        if self.is_discrete:
            cum = np.cumsum(self.probs)
            idx = np.searchsorted(self.support, x, side="right")
            out = np.where(idx > 0, cum[np.maximum(idx - 1, 0)], 0.0)
            return np.minimum(out, 1.0)
        out = self._raw_cdf(x)
        if self.cap is not None:
            out = np.where(x >= self.cap, 1.0, out)
        return out

    def tail(self, x):
        """Pr[X >= x]."""
        x = np.asarray(x, dtype=float)
        if self.is_discrete:
            rev = np.cumsum(self.probs[::-1])[::-1]
            idx = np.searchsorted(self.support, x, side="left")
            out = np.where(idx < self.support.size, rev[np.minimum(idx, self.support.size - 1)], 0.0)
            return np.minimum(out, 1.0)
        out = 1.0 - self._left_cdf(x)
        return np.clip(out, 0.0, 1.0)

    def _left_cdf(self, x):
        # Pr[X < x]; the only parametric atom is the equal-revenue top or the cap
        f = self.family
        base = self._raw_cdf(x)
        h = self.params[-1] if f != "uniform" else self.params[1]
        if f == "equal_revenue":
            base = np.where(x >= h, np.where(x > h, 1.0, 1.0 - 1.0 / h), base)
        if self.cap is not None and self.cap < h:
            base = np.where(x > self.cap, 1.0, np.minimum(base, self._raw_cdf(np.minimum(x, self.cap))))
        return base

    def ppf(self, u):
        """Generalised inverse cdf: inf{x : Pr[X <= x] >= u}."""
        u = np.asarray(u, dtype=float)
        if self.is_discrete:
            cum = np.cumsum(self.probs)
            idx = np.searchsorted(cum, u - 1e-15, side="left")
            return self.support[np.minimum(idx, self.support.size - 1)]
        f, p = self.family, self.params
        if f == "uniform":
            a, b = p
            out = a + u * (b - a)
        elif f == "truncexp":
            rate, h = p
            z = -math.expm1(-rate * h)
            out = -np.log1p(-u * z) / rate
        else:
            (h,) = p
            out = np.where(u >= 1.0 - 1.0 / h, h, 1.0 / np.maximum(1.0 - u, 1e-300))
        if self.cap is not None:
            out = np.minimum(out, self.cap)
        return out

    def mean(self) -> float:
        if self.is_discrete:
            return float(self.support @ self.probs)
        g = (np.arange(20000) + 0.5) / 20000
        return float(self.ppf(g).mean())

    def atoms(self) -> tuple[np.ndarray, np.ndarray]:
        """Signals (scalars, or clause vectors) and their probabilities."""
        if not self.is_discrete:
            raise DistError("atoms() needs a discrete marginal")
        sig = self.clauses if self.clauses is not None else self.support
        return sig, self.probs

    def discretize(self, grid: int) -> "Marginal":
        """Equal-mass discretisation at mid-quantiles."""
        if self.is_discrete:
            return self
        u = (np.arange(grid) + 0.5) / grid
        vals = self.ppf(u)
        uniq, inv = np.unique(vals, return_inverse=True)
        probs = np.bincount(inv, minlength=uniq.size) / grid
        return Marginal.discrete(uniq, probs)

    def to_dict(self) -> dict:
        if self.is_discrete:
            d = {"kind": "discrete", "support": self.support.tolist(), "probs": self.probs.tolist()}
            if self.clauses is not None:
                d["clauses"] = self.clauses.tolist()
            return d
        d = {"kind": "parametric", "family": self.family, "params": list(self.params)}
        if self.cap is not None:
            d["cap"] = self.cap
        return d

    def __repr__(self) -> str:
        if self.is_discrete:
            pairs = ", ".join(f"{s:g}:{p:.4g}" for s, p in zip(self.support, self.probs))
            tag = "xos " if self.clauses is not None else ""
            return f"Marginal({tag}{{{pairs}}})"
        return f"Marginal({self.family}{self.params}, cap={self.cap})"


@dataclass(frozen=True, eq=False)
class ProductPrior:
    marginals: tuple[tuple[Marginal, ...], ...]
    symmetric: bool = False

    def __post_init__(self):
        rows = self.marginals
        if not rows or not rows[0]:
            raise DistError("prior needs at least one bidder and one item")
        m = len(rows[0])
        if any(len(r) != m for r in rows):
            raise DistError("marginal grid is ragged")
        if self.symmetric:
            for r in rows[1:]:
                for a, b in zip(rows[0], r):
                    if not _same(a, b):
                        raise DistError("symmetric flag set but rows differ")

    @staticmethod
    def grid(rows: Sequence[Sequence[Marginal]], symmetric: bool = False) -> "ProductPrior":
        return ProductPrior(tuple(tuple(r) for r in rows), symmetric)

    @staticmethod
    def iid(marg: Marginal, n: int, m: int) -> "ProductPrior":
        return ProductPrior(tuple(tuple(marg for _ in range(m)) for _ in range(n)), True)

    @staticmethod
    def symmetric_of(items: Sequence[Marginal], n: int) -> "ProductPrior":
        return ProductPrior(tuple(tuple(items) for _ in range(n)), True)

    @property
    def n(self) -> int:
        return len(self.marginals)

    @property
    def m(self) -> int:
        return len(self.marginals[0])

    def __getitem__(self, ij) -> Marginal:
        i, j = ij
        return self.marginals[i][j]

    @property
    def is_discrete(self) -> bool:
        return all(c.is_discrete for r in self.marginals for c in r)

    @property
    def clause_count(self) -> int | None:
        ks = {c.clauses.shape[1] for r in self.marginals for c in r if c.clauses is not None}
        if not ks:
            return None
        if len(ks) > 1:
            raise DistError("all XOS cells must share one clause count")
        return ks.pop()

    @property
    def H(self) -> float:
        return max(c.upper for r in self.marginals for c in r)

    def row(self, i: int) -> tuple[Marginal, ...]:
        return self.marginals[i]

    def replace_row(self, i: int, row: Sequence[Marginal]) -> "ProductPrior":
        rows = list(self.marginals)
        rows[i] = tuple(row)
        return ProductPrior(tuple(rows), False)

    def map(self, fn) -> "ProductPrior":
        return ProductPrior(tuple(tuple(fn(c) for c in r) for r in self.marginals), self.symmetric)

    def profile_count(self) -> int:
        return math.prod(c.support.size for r in self.marginals for c in r)

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "m": self.m,
            "symmetric": self.symmetric,
            "marginals": [[c.to_dict() for c in r] for r in self.marginals],
        }


def _same(a: Marginal, b: Marginal) -> bool:
    if a is b:
        return True
    if a.kind != b.kind:
        return False
    if a.is_discrete:
        if a.support.shape != b.support.shape or not np.array_equal(a.support, b.support):
            return False
        if not np.allclose(a.probs, b.probs, atol=PROB_TOL, rtol=0):
            return False
        if (a.clauses is None) != (b.clauses is None):
            return False
        return a.clauses is None or np.array_equal(a.clauses, b.clauses)
    return a.family == b.family and a.params == b.params and a.cap == b.cap


# ---------------------------------------------------------------- enumeration


def enumerate_cells(cells: Sequence[Marginal], guard: int = DEFAULT_GUARD_PROFILES):
    """All joint atoms of independent cells: (signals, weights).

    Signals have shape (T, len(cells)) for scalar cells and (T, len(cells), K)
    for XOS cells.
    """
    for c in cells:
        if not c.is_discrete:
            raise DistError("exact enumeration needs discrete marginals")
    sizes = [c.support.size for c in cells]
    total = math.prod(sizes)
    if total > guard:
        raise GuardExceeded(f"{total} joint atoms exceeds guard {guard}")
    idx = np.indices(sizes).reshape(len(sizes), -1).T if sizes else np.zeros((1, 0), int)
    w = np.ones(idx.shape[0])
    sigs = []
    for k, c in enumerate(cells):
        sig, p = c.atoms()
        w = w * p[idx[:, k]]
        sigs.append(sig[idx[:, k]])
    return np.stack(sigs, axis=1), w


def enumerate_profiles(prior: ProductPrior, guard: int = DEFAULT_GUARD_PROFILES):
    """All type profiles of a discrete prior: (profiles, weights).

    Profiles have shape (T, n, m) or (T, n, m, K).
    """
    cells = [c for r in prior.marginals for c in r]
    sig, w = enumerate_cells(cells, guard)
    shape = (sig.shape[0], prior.n, prior.m) + sig.shape[2:]
    return sig.reshape(shape), w


def enumerate_row(prior: ProductPrior, i: int, guard: int = DEFAULT_GUARD_PROFILES):
    return enumerate_cells(prior.row(i), guard)


# ---------------------------------------------------------------- operations


def sample(prior: ProductPrior, seed: int | np.random.Generator, count: int) -> np.ndarray:
    """Independent draws of type profiles, shape (count, n, m[, K])."""
    if count < 1:
        raise DistError("count must be >= 1")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    K = prior.clause_count
    shape = (count, prior.n, prior.m) + ((K,) if K else ())
    out = np.zeros(shape)
    for i, row in enumerate(prior.marginals):
        for j, c in enumerate(row):
            out[:, i, j] = sample_marginal(c, rng, count)
    return out


def sample_marginal(c: Marginal, rng: np.random.Generator, count: int) -> np.ndarray:
    if c.is_discrete:
        k = rng.choice(c.support.size, size=count, p=c.probs)
        sig, _ = c.atoms()
        return sig[k]
    if c.family not in _FAMILIES:
        raise UnsupportedSampling(f"no inverse cdf for {c.family!r}")
    return np.asarray(c.ppf(rng.random(count)), dtype=float)


def kolmogorov_distance(a: Marginal, b: Marginal, grid: np.ndarray | None = None) -> float:
    """sup_x |Pr_a[X <= x] - Pr_b[X <= x]|."""
    pts = []
    for c in (a, b):
        if c.is_discrete:
            pts.append(c.support)
    if not a.is_discrete and not b.is_discrete:
        if grid is None:
            hi = max(a.upper, b.upper)
            if not np.isfinite(hi):
                raise NeedsGrid("two unbounded parametric marginals need a grid")
            grid = np.linspace(0.0, hi, 8193)
        pts.append(np.asarray(grid, dtype=float))
    elif grid is not None:
        pts.append(np.asarray(grid, dtype=float))
    x = np.unique(np.concatenate(pts))
    d = np.abs(a.cdf(x) - b.cdf(x))
    best = float(d.max(initial=0.0))
    # left limits matter when one side is continuous and the other jumps
    if not (a.is_discrete and b.is_discrete):
        xl = np.nextafter(x, -np.inf)
        best = max(best, float(np.abs(a.cdf(xl) - b.cdf(xl)).max(initial=0.0)))
    return min(best, 1.0)


def empirical(samples) -> Marginal:
    """Uniform distribution over the multiset of samples."""
    s = np.asarray(samples, dtype=float)
    if s.size == 0:
        raise DistError("empirical() needs at least one sample")
    if s.ndim == 2:
        uniq, counts = np.unique(s, axis=0, return_counts=True)
        return Marginal.xos(uniq, counts / counts.sum())
    uniq, counts = np.unique(s.ravel(), return_counts=True)
    return Marginal.discrete(uniq, counts / counts.sum())


def truncate(d: Marginal, cap: float) -> Marginal:
    """Distribution of min(t, cap)."""
    if cap <= 0:
        raise DistError("cap must be positive")
    if not d.is_discrete:
        new_cap = cap if d.cap is None else min(cap, d.cap)
        return Marginal("parametric", family=d.family, params=d.params, cap=float(new_cap))
    if d.clauses is not None:
        raise DistError("truncate() applies to scalar signals")
    if cap >= d.support[-1]:
        return d
    vals = np.minimum(d.support, cap)
    uniq, inv = np.unique(vals, return_inverse=True)
    probs = np.bincount(inv, weights=d.probs, minlength=uniq.size)
    return Marginal.discrete(uniq, probs)


def quantile(d: Marginal, q: float) -> float:
    """F^{-1}(1-q) = sup{x : Pr[v >= x] >= q}; q = 0 gives the sentinel."""
    if q < 0 or q > 1:
        raise DistError("q must lie in [0, 1]")
    if q == 0:
        return d.sentinel
    if d.is_discrete:
        tails = d.tail(d.support)
        ok = np.nonzero(tails >= q - 1e-15)[0]
        return float(d.support[ok[-1]])
    h = d.upper
    if d.tail(h) >= q:
        return h
    return float(d.ppf(1.0 - q))


def tail_threshold(d, lo: float, hi: float) -> float:
    """A value x whose tail Pr[v >= x] lies in [lo, hi].

    ``d`` is a Marginal or a sample array. Among feasible support points the
    one whose tail is closest to the band centre is returned.
    """
    if not 0 < lo < hi <= 1:
        raise DistError("need 0 < lo < hi <= 1")
    if not isinstance(d, Marginal):
        d = empirical(np.asarray(d, dtype=float))
    if not d.is_discrete:
        return quantile(d, 0.5 * (lo + hi))
    vals = np.unique(d.support)
    tails = d.tail(vals)
    ok = (tails >= lo - 1e-12) & (tails <= hi + 1e-12)
    if not ok.any():
        below = tails[tails < lo]
        above = tails[tails > hi]
        b = float(below.max()) if below.size else None
        a = float(above.min()) if above.size else None
        raise InfeasibleBand(
            f"no support point has tail in [{lo:.6g}, {hi:.6g}]; nearest tails below={b} above={a}",
            below=b,
            above=a,
        )
    cand = np.nonzero(ok)[0]
    mid = 0.5 * (lo + hi)
    dist = np.abs(tails[cand] - mid)
    best = cand[dist <= dist.min() + 1e-15]
    return float(vals[best[-1]])


def upper_median(values, weights=None) -> float:
    """sup{x : Pr[X >= x] >= 1/2} for a weighted sample."""
    v = np.asarray(values, dtype=float).ravel()
    if v.size == 0:
        raise DistError("median of an empty sample")
    w = np.full(v.size, 1.0 / v.size) if weights is None else np.asarray(weights, dtype=float).ravel()
    order = np.argsort(-v, kind="stable")
    cum = np.cumsum(w[order])
    k = int(np.searchsorted(cum, 0.5 * w.sum() - 1e-12, side="left"))
    return float(v[order[min(k, v.size - 1)]])


def dkw_epsilon(count: int, delta: float) -> float:
    """Kolmogorov radius holding with probability 1 - delta."""
    return math.sqrt(math.log(2.0 / delta) / (2.0 * count))


def dkw_count(eps: float, delta: float) -> int:
    return math.ceil(math.log(2.0 / delta) / (2.0 * eps * eps))


def iter_subsets(items: Sequence[int]):
    for r in range(len(items) + 1):
        yield from itertools.combinations(items, r)


def value_marginal(c: Marginal) -> Marginal:
    """Scalar law of the single-item value (clause maximum for XOS cells)."""
    if c.clauses is None:
        return c
    uniq, inv = np.unique(c.support, return_inverse=True)
    return Marginal.discrete(uniq, np.bincount(inv, weights=c.probs, minlength=uniq.size))
