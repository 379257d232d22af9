"""Brute-force LP oracle shared by the solver and recourse tests."""

import itertools

import numpy as np

from hconvex.lp import LpProblem


def brute_force_optimum(p: LpProblem):
    """Vertex enumeration: solve every n x n active set, keep feasible ones.

    Returns (best objective, best point) or (None, None) when no feasible
    vertex exists.  Valid for LPs whose feasible set is pointed (x >= 0
    guarantees that here).
    """
    n = p.n_vars
    a_all = np.vstack([p.rows, np.eye(n)]) if p.n_rows else np.eye(n)
    b_all = np.concatenate([p.rhs, np.zeros(n)]) if p.n_rows else np.zeros(n)
    total = a_all.shape[0]
    combos = np.array(list(itertools.combinations(range(total), n)))
    mats = a_all[combos]  # (S, n, n)
    dets = np.linalg.det(mats)
    ok = np.abs(dets) > 1e-9
    pts = np.full((len(combos), n), np.nan)
    if np.any(ok):
        pts[ok] = np.linalg.solve(mats[ok], b_all[combos[ok]][..., None])[..., 0]
    best_val, best_x = None, None
    for x in pts[ok]:
        if np.any(x < -1e-7):
            continue
        if p.n_rows:
            ax = p.rows @ x
            feas = True
            for i, s in enumerate(p.row_senses):
                r = ax[i] - p.rhs[i]
                if s == "<=" and r > 1e-7:
                    feas = False
                elif s == ">=" and r < -1e-7:
                    feas = False
                elif s == "=" and abs(r) > 1e-7:
                    feas = False
            if not feas:
                continue
        val = float(p.cost @ x)
        if best_val is None or (val < best_val if p.sense == "min" else val > best_val):
            best_val, best_x = val, x
    return best_val, best_x
