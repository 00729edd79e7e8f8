"""Dense exact simplex for the package's small linear programs.

Two-phase primal simplex with Bland's rule (cycle-proof).  Problems here are
tiny (tens of variables), so every iteration refactorizes the basis; clarity
over speed.  Returns the primal witness and the dual prices of every
constraint, which the column-generation master problem consumes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import LPInfeasible, LPUnbounded

_TOL = 1e-10


@dataclass
class LPResult:
    value: float
    x: np.ndarray
    dual_ub: np.ndarray  # shadow price per A_ub row: d(optimum)/d(b_ub)
    dual_eq: np.ndarray  # shadow price per A_eq row


def _iterate(A, b, c, basis, n_allowed, max_iter=20000):
    """Simplex iterations for min c.x s.t. Ax = b, x >= 0 from a feasible basis.

    Only the first ``n_allowed`` columns may enter.  Bland's rule: lowest-index
    entering column, lowest-index basic variable among min-ratio ties.
    """
    m, _ = A.shape
    in_basis = set(basis)
    for _ in range(max_iter):
        B = A[:, basis]
        x_b = np.linalg.solve(B, b)
        y = np.linalg.solve(B.T, c[basis])
        entering = -1
        for j in range(n_allowed):
            if j not in in_basis and c[j] - A[:, j] @ y < -_TOL:
                entering = j
                break
        if entering < 0:
            return x_b, y
        d = np.linalg.solve(B, A[:, entering])
        rows = [i for i in range(m) if d[i] > _TOL]
        if not rows:
            raise LPUnbounded("objective improves without bound")
        ratios = [x_b[i] / d[i] for i in rows]
        best = min(ratios)
        tied = [rows[i] for i in range(len(rows)) if ratios[i] <= best + _TOL]
        leave = min(tied, key=lambda i: basis[i])
        in_basis.discard(basis[leave])
        in_basis.add(entering)
        basis[leave] = entering
    raise LPInfeasible("simplex iteration cap reached")  # pragma: no cover


def _two_phase(A, b, c):
    """Solve min c.x s.t. Ax = b, x >= 0.

    Returns (x, duals) with one dual per input row; rows found redundant in
    phase 1 get dual price zero.
    """
    A = np.asarray(A, dtype=float).copy()
    b = np.asarray(b, dtype=float).copy()
    c = np.asarray(c, dtype=float)
    m_orig, n = A.shape
    row_ids = list(range(m_orig))
    signs = np.ones(m_orig)
    neg = b < 0
    A[neg] *= -1.0
    b[neg] = -b[neg]
    signs[neg] = -1.0

    # phase 1 from an all-artificial basis
    m = m_orig
    A1 = np.hstack([A, np.eye(m)])
    c1 = np.concatenate([np.zeros(n), np.ones(m)])
    basis = list(range(n, n + m))
    x_b, _ = _iterate(A1, b, c1, basis, n_allowed=n + m)
    if c1[basis] @ x_b > 1e-8:
        raise LPInfeasible("phase-1 found no feasible point")

    # pivot zero-level artificials out; a row with no real pivot is redundant
    drop = []
    for pos in range(m):
        if basis[pos] < n:
            continue
        e = np.zeros(m)
        e[pos] = 1.0
        binv_row = np.linalg.solve(A1[:, basis].T, e)
        pivot = next(
            (j for j in range(n) if j not in basis and abs(binv_row @ A1[:, j]) > 1e-9),
            -1,
        )
        if pivot >= 0:
            basis[pos] = pivot
        else:
            drop.append(pos)
    if drop:
        keep = [i for i in range(m) if i not in drop]
        A, b, signs = A[keep], b[keep], signs[keep]
        basis = [basis[p] for p in range(m) if p not in drop]
        row_ids = [row_ids[i] for i in keep]

    # phase 2 over real columns only
    x_b, y = _iterate(A, b, c, basis, n_allowed=n)
    x = np.zeros(n)
    for pos, j in enumerate(basis):
        x[j] = x_b[pos]
    duals = np.zeros(m_orig)
    duals[row_ids] = signs * y
    return x, duals


def lp_solve(
    c,
    a_ub=None,
    b_ub=None,
    a_eq=None,
    b_eq=None,
    free=(),
    maximize=True,
) -> LPResult:
    """Solve max (or min) c.x s.t. a_ub x <= b_ub, a_eq x = b_eq.

    Variables are non-negative unless listed in ``free``.  dual_ub / dual_eq
    are shadow prices of the stated problem: the derivative of the optimum
    with respect to the corresponding right-hand side.
    """
    c = np.asarray(c, dtype=float)
    n = c.size
    a_ub = np.zeros((0, n)) if a_ub is None else np.atleast_2d(np.asarray(a_ub, dtype=float))
    b_ub = np.zeros(0) if b_ub is None else np.atleast_1d(np.asarray(b_ub, dtype=float))
    a_eq = np.zeros((0, n)) if a_eq is None else np.atleast_2d(np.asarray(a_eq, dtype=float))
    b_eq = np.zeros(0) if b_eq is None else np.atleast_1d(np.asarray(b_eq, dtype=float))
    m_ub, m_eq = a_ub.shape[0], a_eq.shape[0]

    # split free variables into positive and negative parts
    free = sorted(set(free))
    ext = np.eye(n, n + len(free))
    for k, j in enumerate(free):
        ext[j, n + k] = -1.0

    A = np.vstack(
        [
            np.hstack([a_ub @ ext, np.eye(m_ub)]),
            np.hstack([a_eq @ ext, np.zeros((m_eq, m_ub))]),
        ]
    )
    b = np.concatenate([b_ub, b_eq])
    c_full = np.concatenate([c @ ext, np.zeros(m_ub)])

    sign = -1.0 if maximize else 1.0
    x_std, duals = _two_phase(A, b, sign * c_full)
    x = ext @ x_std[: n + len(free)]
    value = float(c @ x)
    if maximize:  # we minimized -c.x, so flip sensitivity back
        duals = -duals
    return LPResult(value=value, x=x, dual_ub=duals[:m_ub], dual_eq=duals[m_ub:])
