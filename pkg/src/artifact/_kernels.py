"""Hot loops with a numba implementation and a pure-numpy fallback.

Set ``ARTIFACT_NO_JIT=1`` to force the numpy path. The numba path is also
skipped when numba cannot be imported.
"""

from __future__ import annotations

import os

import numpy as np

_WANT_JIT = os.environ.get("ARTIFACT_NO_JIT", "").strip().lower() not in ("1", "true", "yes")

try:  # pragma: no cover - import guard
    import numba

    _HAVE_NUMBA = True
except ImportError:  # pragma: no cover
    numba = None
    _HAVE_NUMBA = False

USE_JIT = _WANT_JIT and _HAVE_NUMBA


# ---------------------------------------------------------------- numpy path


def pivot_np(T: np.ndarray, r: int, c: int) -> None:
    T[r] /= T[r, c]
    col = T[:, c].copy()
    col[r] = 0.0
    T -= np.outer(col, T[r])


def upper_hull_np(q: np.ndarray, r: np.ndarray) -> np.ndarray:
    """Indices of the strict vertices of the upper concave hull.

    ``q`` must be strictly increasing.
    """
    keep: list[int] = []
    for k in range(len(q)):
        while len(keep) >= 2:
            a, b = keep[-2], keep[-1]
            cross = (q[b] - q[a]) * (r[k] - r[a]) - (r[b] - r[a]) * (q[k] - q[a])
            if cross >= -1e-15 * max(1.0, abs(r[k]) + abs(r[a])):
                keep.pop()
            else:
                break
        keep.append(k)
    return np.asarray(keep, dtype=np.int64)


def rspm_revenue_np(
    V: np.ndarray, w: np.ndarray, P: np.ndarray, pw: np.ndarray, order: np.ndarray
) -> float:
    """Expected revenue of a one-item-per-bidder posted-price run.

    V: (T, n, m) single-item values per type profile, w: (T,) weights.
    P: (D, n, m) price draws, pw: (D,) draw weights.
    """
    T, n, m = V.shape
    total = 0.0
    for d in range(P.shape[0]):
        avail = np.ones((T, m), dtype=bool)
        rev = np.zeros(T)
        for i in order:
            v = V[:, i, :]
            p = P[d, i, :][None, :]
            u = v - p
            ok = avail & (u >= 0.0) & (v > 0.0)
            # key: utility, then value, then lower index
            big = np.where(ok, u, -np.inf)
            best_u = big.max(axis=1)
            tie_u = ok & (big == best_u[:, None])
            vv = np.where(tie_u, v, -np.inf)
            best_v = vv.max(axis=1)
            tie_v = tie_u & (vv == best_v[:, None])
            any_ok = tie_v.any(axis=1)
            j = np.argmax(tie_v, axis=1)
            rows = np.nonzero(any_ok)[0]
            jj = j[rows]
            rev[rows] += P[d, i, jj]
            avail[rows, jj] = False
        total += pw[d] * float(np.dot(w, rev))
    return total


def rspm_paired_np(V: np.ndarray, P: np.ndarray, order: np.ndarray) -> np.ndarray:
    """Per-run revenue when run t uses profile V[t] and prices P[t]."""
    T, n, m = V.shape
    avail = np.ones((T, m), dtype=bool)
    rev = np.zeros(T)
    for i in order:
        v = V[:, i, :]
        p = P[:, i, :]
        u = v - p
        ok = avail & (u >= 0.0) & (v > 0.0)
        big = np.where(ok, u, -np.inf)
        best_u = big.max(axis=1)
        tie_u = ok & (big == best_u[:, None])
        vv = np.where(tie_u, v, -np.inf)
        best_v = vv.max(axis=1)
        tie_v = tie_u & (vv == best_v[:, None])
        rows = np.nonzero(tie_v.any(axis=1))[0]
        jj = np.argmax(tie_v, axis=1)[rows]
        rev[rows] += p[rows, jj]
        avail[rows, jj] = False
    return rev


# ---------------------------------------------------------------- numba path

if _HAVE_NUMBA:

    @numba.njit(cache=True)
    def pivot_nb(T, r, c):  # pragma: no cover - compiled
        rows, cols = T.shape
        piv = T[r, c]
        for k in range(cols):
            T[r, k] /= piv
        for i in range(rows):
            if i == r:
                continue
            f = T[i, c]
            if f != 0.0:
                for k in range(cols):
                    T[i, k] -= f * T[r, k]

    @numba.njit(cache=True)
    def upper_hull_nb(q, r):  # pragma: no cover - compiled
        keep = np.empty(len(q), dtype=np.int64)
        top = 0
        for k in range(len(q)):
            while top >= 2:
                a = keep[top - 2]
                b = keep[top - 1]
                cross = (q[b] - q[a]) * (r[k] - r[a]) - (r[b] - r[a]) * (q[k] - q[a])
                if cross >= -1e-15 * max(1.0, abs(r[k]) + abs(r[a])):
                    top -= 1
                else:
                    break
            keep[top] = k
            top += 1
        return keep[:top].copy()

    @numba.njit(cache=True)
    def rspm_revenue_nb(V, w, P, pw, order):  # pragma: no cover - compiled
        T, n, m = V.shape
        total = 0.0
        avail = np.empty(m, dtype=np.bool_)
        for d in range(P.shape[0]):
            acc = 0.0
            for t in range(T):
                for j in range(m):
                    avail[j] = True
                rev = 0.0
                for oi in range(n):
                    i = order[oi]
                    best = -1
                    bu = 0.0
                    bv = 0.0
                    for j in range(m):
                        if not avail[j]:
                            continue
                        v = V[t, i, j]
                        u = v - P[d, i, j]
                        if u < 0.0 or v <= 0.0:
                            continue
                        if best < 0 or u > bu or (u == bu and v > bv):
                            best = j
                            bu = u
                            bv = v
                    if best >= 0:
                        rev += P[d, i, best]
                        avail[best] = False
                acc += w[t] * rev
            total += pw[d] * acc
        return total


    @numba.njit(cache=True)
    def rspm_paired_nb(V, P, order):  # pragma: no cover - compiled
        T, n, m = V.shape
        rev = np.zeros(T)
        avail = np.empty(m, dtype=np.bool_)
        for t in range(T):
            for j in range(m):
                avail[j] = True
            acc = 0.0
            for oi in range(n):
                i = order[oi]
                best = -1
                bu = 0.0
                bv = 0.0
                for j in range(m):
                    if not avail[j]:
                        continue
                    v = V[t, i, j]
                    u = v - P[t, i, j]
                    if u < 0.0 or v <= 0.0:
                        continue
                    if best < 0 or u > bu or (u == bu and v > bv):
                        best = j
                        bu = u
                        bv = v
                if best >= 0:
                    acc += P[t, i, best]
                    avail[best] = False
            rev[t] = acc
        return rev


if USE_JIT:
    pivot = pivot_nb
    upper_hull = upper_hull_nb
    rspm_revenue = rspm_revenue_nb
    rspm_paired = rspm_paired_nb
else:
    pivot = pivot_np
    upper_hull = upper_hull_np
    rspm_revenue = rspm_revenue_np
    rspm_paired = rspm_paired_np


def backend() -> str:
    return "numba" if USE_JIT else "numpy"
