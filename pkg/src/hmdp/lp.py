"""Dense revised simplex for the relaxed HALP linear programs.

The primal problem is

    minimize    c^T w
    subject to  A w >= b,   -bound <= w_i <= bound   (bound optional).

Rows are plentiful and columns few, so the solver works on the dual
``max h^T y s.t. G^T y = c, y >= 0`` whose basis is only K x K.  The primal
solution is read off the simplex multipliers of the final dual basis.
Pricing is Dantzig's rule, switching to Bland's rule after a run of
degenerate pivots to rule out cycling.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ContractError

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"
ITERATION_LIMIT = "iteration-limit"

_PIVOT_TOL = 1e-9
_COST_TOL = 1e-9
_DEGENERATE_RUN = 30


@dataclass
class LPResult:
    x: np.ndarray | None
    objective: float
    status: str
    iterations: int


def _simplex(E: np.ndarray, rhs: np.ndarray, cost: np.ndarray, basis: list[int],
             allowed: np.ndarray, max_iters: int) -> tuple[str, list[int], int]:
    """Minimize cost^T y s.t. E y = rhs, y >= 0 from a feasible basis."""
    iters = 0
    degenerate = 0
    while iters < max_iters:
        B = E[:, basis]
        try:
            xb = np.linalg.solve(B, rhs)
            pi = np.linalg.solve(B.T, cost[basis])
        except np.linalg.LinAlgError:
            return "singular", basis, iters
        reduced = cost - E.T @ pi
        reduced[~allowed] = 0.0
        reduced[basis] = 0.0
        candidates = np.flatnonzero(reduced < -_COST_TOL)
        if candidates.size == 0:
            return OPTIMAL, basis, iters
        bland = degenerate >= _DEGENERATE_RUN
        j = int(candidates[0]) if bland else int(candidates[np.argmin(reduced[candidates])])
        u = np.linalg.solve(B, E[:, j])
        positive = np.flatnonzero(u > _PIVOT_TOL)
        if positive.size == 0:
            return UNBOUNDED, basis, iters
        ratios = np.maximum(xb[positive], 0.0) / u[positive]
        best = ratios.min()
        ties = positive[ratios <= best + 1e-12]
        if bland:
            leave = int(min(ties, key=lambda r: basis[r]))
        else:
            leave = int(ties[np.argmax(u[ties])])
        degenerate = degenerate + 1 if best <= 1e-12 else 0
        basis = basis.copy()
        basis[leave] = j
        iters += 1
    return ITERATION_LIMIT, basis, iters


def solve_lp(c: np.ndarray, A: np.ndarray, b: np.ndarray, bound: float | None = None,
             max_iters: int = 100_000) -> LPResult:
    """Solve min c^T w s.t. A w >= b (and |w_i| <= bound if given)."""
    c = np.asarray(c, dtype=float)
    A = np.asarray(A, dtype=float).reshape(-1, c.size)
    b = np.asarray(b, dtype=float)
    if A.shape[0] != b.size:
        raise ContractError("constraint matrix and right-hand side disagree in length")
    k = c.size
    if bound is not None:
        if not bound > 0:
            raise ContractError("weight bound must be positive")
        eye = np.eye(k)
        G = np.vstack([A, eye, -eye])
        h = np.concatenate([b, np.full(2 * k, -bound)])
    else:
        G, h = A, b
    # dual: min (-h)^T y  s.t.  G^T y = c, y >= 0 ; flip rows so c >= 0
    sign = np.where(c < 0, -1.0, 1.0)
    E = np.hstack([(G.T * sign[:, None]), np.eye(k)])
    rhs = c * sign
    n_real = G.shape[0]
    allowed = np.ones(n_real + k, dtype=bool)
    basis = list(range(n_real, n_real + k))

    phase1_cost = np.concatenate([np.zeros(n_real), np.ones(k)])
    status, basis, it1 = _simplex(E, rhs, phase1_cost, basis, allowed, max_iters)
    if status in ("singular", ITERATION_LIMIT):
        return LPResult(None, np.nan, ITERATION_LIMIT, it1)
    xb = np.linalg.solve(E[:, basis], rhs)
    art = np.array([j >= n_real for j in basis])
    if np.sum(xb[art]) > 1e-7 * max(1.0, np.abs(rhs).max()):
        # the dual is infeasible, so the primal is unbounded (or infeasible)
        return LPResult(None, -np.inf, UNBOUNDED, it1)
    # drive zero-level artificials out of the basis where possible
    for r in np.flatnonzero(art):
        B = E[:, basis]
        row = np.linalg.solve(B.T, np.eye(k)[r])  # row r of B^{-1}
        alpha = row @ E[:, :n_real]
        cand = [j for j in np.flatnonzero(np.abs(alpha) > 1e-7) if j not in basis]
        if cand:
            basis[r] = int(cand[0])
    allowed[n_real:] = False
    phase2_cost = np.concatenate([-h, np.zeros(k)])
    status, basis, it2 = _simplex(E, rhs, phase2_cost, basis, allowed, max_iters - it1)
    iters = it1 + it2
    if status == UNBOUNDED:
        return LPResult(None, np.inf, INFEASIBLE, iters)
    if status != OPTIMAL:
        return LPResult(None, np.nan, ITERATION_LIMIT, iters)
    B = E[:, basis]
    pi = np.linalg.solve(B.T, phase2_cost[basis])
    w = -pi * sign
    return LPResult(w, float(c @ w), OPTIMAL, iters)
