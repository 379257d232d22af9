"""Dense linear programming with dual values.

A two-phase revised simplex over dense numpy arrays, sized for the
second-stage allocation programs and the deterministic planning baseline
(at most a few hundred variables).  Duals are read off the final basis
and reported in the sensitivity convention: the derivative of the posed
optimal objective with respect to each row's right-hand side.

Anti-cycling: Dantzig pricing by default, switching permanently to
Bland's rule once 10 * (rows + cols) degenerate pivots accumulate.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import DimensionError, LpInternalError

__all__ = ["LpProblem", "LpSolution", "solve_lp", "verify_solution"]

LE, EQ, GE = "<=", "=", ">="
_SENSES = (LE, EQ, GE)

_PIVOT_TOL = 1e-9
_FEAS_TOL = 1e-7
_CS_TOL = 1e-6


@dataclass(frozen=True)
class LpProblem:
    """min or max of c @ x subject to tagged rows and x >= lower bounds.

    ``rows`` is an (m, n) coefficient matrix, ``row_senses`` one of
    "<=", "=", ">=" per row, ``rhs`` the right-hand sides.  Variables
    default to x >= 0; ``bounds`` may give per-variable (lb, ub) with
    finite lb and optional finite ub (enforced via internal rows).
    """

    sense: str  # "min" | "max"
    cost: np.ndarray
    rows: np.ndarray
    row_senses: tuple
    rhs: np.ndarray
    bounds: Optional[tuple] = None

    def __post_init__(self):
        if self.sense not in ("min", "max"):
            raise ValueError("sense must be 'min' or 'max'")
        c = np.atleast_1d(np.asarray(self.cost, dtype=float))
        a = np.asarray(self.rows, dtype=float)
        if a.size == 0:
            a = a.reshape(0, c.size)
        a = np.atleast_2d(a)
        b = np.atleast_1d(np.asarray(self.rhs, dtype=float))
        senses = tuple(self.row_senses)
        if a.shape != (b.size, c.size):
            raise DimensionError(
                f"rows {a.shape} inconsistent with cost ({c.size}) and rhs ({b.size})"
            )
        if len(senses) != b.size or any(s not in _SENSES for s in senses):
            raise DimensionError("row_senses must match rhs and use <=, =, >=")
        if not np.all(np.isfinite(b)) or not np.all(np.isfinite(a)) or not np.all(np.isfinite(c)):
            raise ValueError("LP data must be finite")
        bounds = self.bounds
        if bounds is not None:
            bounds = tuple((float(lo), (float(hi) if hi is not None else None)) for lo, hi in bounds)
            if len(bounds) != c.size:
                raise DimensionError("bounds must give one (lb, ub) per variable")
            for lo, hi in bounds:
                if not np.isfinite(lo):
                    raise ValueError("variable lower bounds must be finite")
                if hi is not None and hi < lo:
                    raise ValueError("variable upper bound below lower bound")
        object.__setattr__(self, "cost", c)
        object.__setattr__(self, "rows", a)
        object.__setattr__(self, "rhs", b)
        object.__setattr__(self, "row_senses", senses)
        object.__setattr__(self, "bounds", bounds)

    @property
    def n_rows(self) -> int:
        return self.rhs.size

    @property
    def n_vars(self) -> int:
        return self.cost.size


@dataclass(frozen=True)
class LpSolution:
    status: str  # "optimal" | "infeasible" | "unbounded"
    primal: Optional[np.ndarray]
    dual: Optional[np.ndarray]  # per original row, d(objective)/d(rhs)
    objective: Optional[float]


def _build_internal(p: LpProblem):
    """Convert to equality standard form; returns data plus dual back-maps."""
    c = p.cost.copy()
    a = p.rows.copy()
    b = p.rhs.copy()
    senses = list(p.row_senses)
    shift = np.zeros(p.n_vars)
    extra_rows = []
    if p.bounds is not None:
        for j, (lo, hi) in enumerate(p.bounds):
            shift[j] = lo
            if hi is not None:
                row = np.zeros(p.n_vars)
                row[j] = 1.0
                extra_rows.append((row, LE, hi - lo))
    if np.any(shift != 0.0):
        b = b - a @ shift
    if p.sense == "max":
        c = -c
    if extra_rows:
        a = np.vstack([a] + [r for r, _, _ in extra_rows])
        senses = senses + [s for _, s, _ in extra_rows]
        b = np.concatenate([b, [rhs for _, _, rhs in extra_rows]])
    m = b.size
    flip = np.ones(m)
    neg = b < 0.0
    flip[neg] = -1.0
    a[neg] *= -1.0
    b = b * flip
    for i in np.flatnonzero(neg):
        if senses[i] == LE:
            senses[i] = GE
        elif senses[i] == GE:
            senses[i] = LE
    slack_cols = []
    slack_row = []
    for i, s in enumerate(senses):
        if s == LE:
            slack_cols.append(1.0)
            slack_row.append(i)
        elif s == GE:
            slack_cols.append(-1.0)
            slack_row.append(i)
    n = p.n_vars
    n_slack = len(slack_cols)
    full = np.zeros((m, n + n_slack))
    full[:, :n] = a
    for j, (sign, i) in enumerate(zip(slack_cols, slack_row)):
        full[i, n + j] = sign
    c_full = np.concatenate([c, np.zeros(n_slack)])
    return full, b, c_full, senses, flip, shift, m


def _pivot(basis, b_inv, x_b, a_full, q, leave, direction):
    basis[leave] = q
    row = b_inv[leave] / direction[leave]
    b_inv -= np.outer(direction, row)
    b_inv[leave] = row
    theta = x_b[leave] / direction[leave]
    x_b -= theta * direction
    x_b[leave] = theta
    np.clip(x_b, 0.0, None, out=x_b)


def _simplex_phase(a_full, b, cost, basis, b_inv, banned, degen_budget):
    """Run the simplex to optimality on one phase.

    Returns (status, degenerate_pivots_used); mutates basis / b_inv.
    status is "optimal" or "unbounded".
    """
    m, n_total = a_full.shape
    x_b = b_inv @ b
    np.clip(x_b, 0.0, None, out=x_b)
    bland = False
    degen = 0
    max_iter = 500 * (m + n_total) + 2000
    for it in range(max_iter):
        if it and it % 100 == 0:  # refactorize for numerical hygiene
            b_inv = np.linalg.inv(a_full[:, basis])
            x_b = b_inv @ b
            np.clip(x_b, 0.0, None, out=x_b)
        y = cost[basis] @ b_inv
        rc = cost - y @ a_full
        rc[basis] = 0.0
        if banned is not None:
            rc = rc.copy()
            rc[banned] = 0.0
        if bland:
            cand = np.flatnonzero(rc < -_PIVOT_TOL)
            if cand.size == 0:
                return "optimal", degen, b_inv
            q = int(cand[0])
        else:
            q = int(np.argmin(rc))
            if rc[q] >= -_PIVOT_TOL:
                return "optimal", degen, b_inv
        direction = b_inv @ a_full[:, q]
        pos = direction > _PIVOT_TOL
        if not np.any(pos):
            return "unbounded", degen, b_inv
        ratios = np.full(m, np.inf)
        ratios[pos] = x_b[pos] / direction[pos]
        theta = ratios.min()
        ties = np.flatnonzero(ratios <= theta + _PIVOT_TOL)
        if bland:
            leave = int(ties[np.argmin(np.asarray(basis)[ties])])
        else:
            leave = int(ties[np.argmax(direction[ties])])
        if theta <= _PIVOT_TOL:
            degen += 1
            if degen > degen_budget:
                bland = True
        _pivot(basis, b_inv, x_b, a_full, q, leave, direction)
    raise LpInternalError("simplex failed to terminate")


def solve_lp(p: LpProblem, verify: bool = True) -> LpSolution:
    """Solve the LP; never raises on infeasible or unbounded input.

    When ``verify`` is set (the default) an optimal solution is checked
    for primal/dual feasibility, complementary slackness, and strong
    duality at the library tolerances before being returned.
    """
    a_full, b, cost, senses, flip, shift, m = _build_internal(p)
    n_total = a_full.shape[1]
    degen_budget = 10 * (m + n_total)

    # phase 1: artificial columns for rows lacking a usable slack start
    art_cols = np.eye(m)
    a_ph1 = np.hstack([a_full, art_cols])
    basis = []
    need_phase1 = False
    for i, s in enumerate(senses):
        if s == LE:
            # the row's own +1 slack column starts basic (b >= 0 here)
            j = np.flatnonzero(a_full[i, p.n_vars :])[0] + p.n_vars
            basis.append(int(j))
        else:
            basis.append(n_total + i)
            need_phase1 = True
    b_inv = np.linalg.inv(a_ph1[:, basis])
    if need_phase1:
        c1 = np.zeros(n_total + m)
        c1[n_total:] = 1.0
        status, _, b_inv = _simplex_phase(a_ph1, b, c1, basis, b_inv, None, degen_budget)
        if status != "optimal":
            raise LpInternalError("phase 1 cannot be unbounded")
        x_b = b_inv @ b
        if float(c1[basis] @ np.clip(x_b, 0.0, None)) > 1e-7 * (1.0 + abs(b).max()):
            return LpSolution(status="infeasible", primal=None, dual=None, objective=None)
        # pivot leftover artificials out where possible
        for row_i in range(m):
            if basis[row_i] >= n_total:
                tab_row = b_inv[row_i] @ a_ph1[:, :n_total]
                nz = np.flatnonzero(np.abs(tab_row) > 1e-9)
                nz = [j for j in nz if j not in basis]
                if nz:
                    q = int(nz[0])
                    direction = b_inv @ a_ph1[:, q]
                    _pivot(basis, b_inv, np.clip(b_inv @ b, 0, None), a_ph1, q, row_i, direction)
    # phase 2: artificial columns banned from entering
    c2 = np.concatenate([cost, np.zeros(m)])
    banned = np.arange(n_total, n_total + m)
    status, _, b_inv = _simplex_phase(a_ph1, b, c2, basis, b_inv, banned, degen_budget)
    if status == "unbounded":
        return LpSolution(status="unbounded", primal=None, dual=None, objective=None)
    x_full = np.zeros(n_total + m)
    x_b = b_inv @ b
    np.clip(x_b, 0.0, None, out=x_b)
    x_full[basis] = x_b
    x = x_full[: p.n_vars] + shift
    y = c2[basis] @ b_inv  # duals of the internal min equality form
    dual = y[: p.n_rows] * flip[: p.n_rows]
    obj = float(p.cost @ x)
    if p.sense == "max":
        dual = -dual
    sol = LpSolution(status="optimal", primal=x, dual=dual, objective=obj)
    if verify:
        res = verify_solution(p, sol)
        if (
            res["primal_residual"] > _FEAS_TOL
            or res["dual_residual"] > _FEAS_TOL
            or res["cs_max"] > _CS_TOL
            or res["gap_rel"] > _CS_TOL
        ):
            raise LpInternalError(f"optimality certificates out of tolerance: {res}")
    return sol


def verify_solution(p: LpProblem, sol: LpSolution) -> dict:
    """Residuals certifying optimality, in the posed problem's convention.

    primal_residual: worst constraint/bound violation.
    dual_residual:   worst dual sign or reduced-cost violation.
    cs_max:          worst complementary-slackness product.
    gap_rel:         relative primal-dual objective gap.
    """
    if sol.status != "optimal":
        raise ValueError("verification applies to optimal solutions only")
    x, y = sol.primal, sol.dual
    a, b, c = p.rows, p.rhs, p.cost
    sgn = 1.0 if p.sense == "min" else -1.0
    lbs = np.zeros(p.n_vars)
    ubs = np.full(p.n_vars, np.inf)
    if p.bounds is not None:
        lbs = np.array([lo for lo, _ in p.bounds])
        ubs = np.array([np.inf if hi is None else hi for _, hi in p.bounds])
    ax = a @ x if p.n_rows else np.zeros(0)
    primal = 0.0
    dual_res = 0.0
    cs = 0.0
    scale = 1.0 + (np.abs(b).max() if b.size else 0.0)
    for i, s in enumerate(p.row_senses):
        slack = b[i] - ax[i]
        if s == LE:
            primal = max(primal, -slack)
            dual_res = max(dual_res, sgn * y[i])  # min: y <= 0, max: y >= 0
        elif s == GE:
            primal = max(primal, slack)
            dual_res = max(dual_res, -sgn * y[i])
        else:
            primal = max(primal, abs(slack))
        cs = max(cs, abs(y[i] * slack))
    primal = max(primal, float(np.max(lbs - x, initial=0.0)))
    primal = max(primal, float(np.max(x - ubs, initial=0.0)))
    # reduced costs of structural variables: c - A^T y, min convention
    rc = sgn * (c - (a.T @ y if p.n_rows else 0.0))
    at_lb = np.isclose(x, lbs, atol=1e-6)
    at_ub = np.isfinite(ubs) & np.isclose(x, ubs, atol=1e-6)
    interior = ~(at_lb | at_ub)
    if np.any(at_lb):
        dual_res = max(dual_res, float(np.max(-rc[at_lb], initial=0.0)))
    if np.any(at_ub):
        dual_res = max(dual_res, float(np.max(rc[at_ub], initial=0.0)))
    if np.any(interior):
        dual_res = max(dual_res, float(np.max(np.abs(rc[interior]), initial=0.0)))
    cs = max(cs, float(np.max(np.abs(rc * np.where(at_ub, 0.0, x - lbs)), initial=0.0)))
    dual_obj = float(y @ b) if p.n_rows else 0.0
    # bound contributions to the dual objective
    if p.bounds is not None or np.any(at_ub):
        dual_obj += float(np.sum(np.where(at_lb, sgn * rc * lbs, 0.0)))
        dual_obj += float(np.sum(np.where(at_ub, sgn * rc * ubs, 0.0)))
    gap = abs(sol.objective - dual_obj) / (1.0 + abs(sol.objective))
    return {
        "primal_residual": primal / scale,
        "dual_residual": dual_res,
        "cs_max": cs,
        "gap_rel": gap,
    }
