"""Small dense two-phase simplex for the tiny LPs used across the package.

Solves ``max c.x`` subject to ``A_ub x <= b_ub``, ``A_eq x = b_eq``, ``x >= 0``
and returns a primal/dual pair together with a duality certificate.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _kernels


class LPError(RuntimeError):
    pass


class InfeasibleLP(LPError):
    pass


class UnboundedLP(LPError):
    pass


@dataclass
class LPResult:
    x: np.ndarray
    objective: float
    y_ub: np.ndarray
    y_eq: np.ndarray
    iterations: int
    certificate: dict = field(default_factory=dict)


def _choose_entering(r: np.ndarray, allowed: np.ndarray, tol: float, bland: bool) -> int:
    cand = np.nonzero(allowed & (r > tol))[0]
    if cand.size == 0:
        return -1
    if bland:
        return int(cand[0])
    return int(cand[np.argmax(r[cand])])


def _choose_leaving(T: np.ndarray, c: int, basis: np.ndarray, tol: float) -> int:
    col = T[:-1, c]
    pos = np.nonzero(col > tol)[0]
    if pos.size == 0:
        return -1
    ratios = T[pos, -1] / col[pos]
    best = ratios.min()
    ties = pos[ratios <= best + 1e-12 * max(1.0, abs(best))]
    # smallest basic index among ties keeps Bland's rule anti-cycling
    return int(ties[np.argmin(basis[ties])])


def _run(T, basis, allowed, tol, max_iter, start_iter):
    it = start_iter
    degenerate = 0
    while True:
        bland = degenerate > 50
        c = _choose_entering(T[-1, :-1], allowed, tol, bland)
        if c < 0:
            return it
        r = _choose_leaving(T, c, basis, tol)
        if r < 0:
            raise UnboundedLP("objective is unbounded")
        degenerate = degenerate + 1 if T[r, -1] <= tol else 0
        _kernels.pivot(T, r, c)
        basis[r] = c
        it += 1
        if it > max_iter:
            raise LPError(f"iteration limit {max_iter} reached")


def linprog_max(
    c,
    A_ub=None,
    b_ub=None,
    A_eq=None,
    b_eq=None,
    tol: float = 1e-9,
    max_iter: int = 200_000,
) -> LPResult:
    c = np.asarray(c, dtype=float)
    nx = c.size
    A_ub = np.zeros((0, nx)) if A_ub is None else np.asarray(A_ub, dtype=float).reshape(-1, nx)
    b_ub = np.zeros(0) if b_ub is None else np.asarray(b_ub, dtype=float).ravel()
    A_eq = np.zeros((0, nx)) if A_eq is None else np.asarray(A_eq, dtype=float).reshape(-1, nx)
    b_eq = np.zeros(0) if b_eq is None else np.asarray(b_eq, dtype=float).ravel()
    m1, m2 = A_ub.shape[0], A_eq.shape[0]
    rows = m1 + m2

    A = np.vstack([A_ub, A_eq])
    b = np.concatenate([b_ub, b_eq])
    sign = np.where(b < 0, -1.0, 1.0)
    A = A * sign[:, None]
    b = b * sign

    # unit column per row: slack for unflipped <= rows, artificial otherwise
    slack = np.zeros((rows, m1))
    slack[np.arange(m1), np.arange(m1)] = sign[:m1]
    needs_art = np.ones(rows, dtype=bool)
    needs_art[:m1] = sign[:m1] < 0
    art_rows = np.nonzero(needs_art)[0]
    na = art_rows.size
    art = np.zeros((rows, na))
    art[art_rows, np.arange(na)] = 1.0

    ncol = nx + m1 + na
    T = np.zeros((rows + 1, ncol + 1))
    T[:rows, :nx] = A
    T[:rows, nx : nx + m1] = slack
    T[:rows, nx + m1 : ncol] = art
    T[:rows, -1] = b

    basis = np.empty(rows, dtype=np.int64)
    unit_col = np.empty(rows, dtype=np.int64)
    for k in range(m1):
        unit_col[k] = nx + k
    for a, rr in enumerate(art_rows):
        unit_col[rr] = nx + m1 + a
    basis[:] = unit_col

    allowed = np.ones(ncol, dtype=bool)
    it = 0
    if na:
        # phase 1: maximise minus the sum of artificials
        T[-1, :] = 0.0
        T[-1, nx + m1 : ncol] = -1.0
        for rr in art_rows:
            T[-1] += T[rr]
        it = _run(T, basis, allowed, tol, max_iter, it)
        infeas = -T[-1, -1]
        if abs(infeas) > 1e-7 * max(1.0, float(np.abs(b).max(initial=0.0))):
            raise InfeasibleLP(f"phase 1 residual {abs(infeas):.3e}")
        # drive zero-level artificials out where possible
        for rr in range(rows):
            if basis[rr] >= nx + m1:
                cand = np.nonzero(np.abs(T[rr, : nx + m1]) > 1e-9)[0]
                if cand.size:
                    _kernels.pivot(T, rr, int(cand[0]))
                    basis[rr] = cand[0]
        allowed[nx + m1 :] = False

    T[-1, :] = 0.0
    T[-1, :nx] = c
    for rr in range(rows):
        bc = basis[rr]
        if T[-1, bc] != 0.0:
            T[-1] -= T[-1, bc] * T[rr]
    it = _run(T, basis, allowed, tol, max_iter, it)

    x_full = np.zeros(ncol)
    x_full[basis] = T[:rows, -1]
    x = np.clip(x_full[:nx], 0.0, None)
    # reduced cost of a row's unit column is minus that row's dual
    y = -T[-1, unit_col] * sign
    y_ub, y_eq = y[:m1], y[m1:]
    obj = float(c @ x)
    cert = _certificate(c, A_ub, b_ub, A_eq, b_eq, x, y_ub, y_eq)
    return LPResult(x=x, objective=obj, y_ub=y_ub, y_eq=y_eq, iterations=it, certificate=cert)


def _certificate(c, A_ub, b_ub, A_eq, b_eq, x, y_ub, y_eq) -> dict:
    primal = 0.0
    if A_ub.size:
        primal = max(primal, float(np.max(A_ub @ x - b_ub, initial=0.0)))
    if A_eq.size:
        primal = max(primal, float(np.max(np.abs(A_eq @ x - b_eq), initial=0.0)))
    red = c - A_ub.T @ y_ub - A_eq.T @ y_eq
    dual = max(float(np.max(red, initial=0.0)), float(np.max(-y_ub, initial=0.0)))
    pobj = float(c @ x)
    dobj = float(b_ub @ y_ub + b_eq @ y_eq)
    return {
        "primal_residual": primal,
        "dual_residual": dual,
        "gap": abs(pobj - dobj),
        "dual_objective": dobj,
    }
