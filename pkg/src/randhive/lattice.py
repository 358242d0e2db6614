"""Triangular-lattice primitives on Z^2 and an exact height-function optimizer.

The triangular lattice is identified with Z^2: unit edges run along
``(1,0)``, ``(0,1)`` and ``(1,-1)``.  The positive directions are
``(1,0)``, ``(0,-1)`` and ``(-1,1)``; around every unit triangle they form
a directed cycle.

Edges are tuples ``(kind, a, b)``:

* ``("H", a, b)``: ``(a,b) -> (a+1,b)``
* ``("V", a, b)``: ``(a,b+1) -> (a,b)``
* ``("D", a, b)``: ``(a+1,b) -> (a,b+1)``

each written tail -> head along its positive direction.  Triangles are
``("L", a, b)`` with vertices ``(a,b), (a+1,b), (a,b+1)`` and ``("R", a, b)``
with vertices ``(a+1,b), (a+1,b+1), (a,b+1)``.

A tiling assigns to each triangle one "crossed" edge: the short diagonal of
the lozenge it belongs to.  Its height function rises by 1 along an
uncrossed positive edge and drops by 2 along a crossed one.
"""

from __future__ import annotations

import math
from functools import lru_cache

import numpy as np
from scipy import sparse
from scipy.optimize import linprog

from .errors import InfeasibleError, NumericalError

POSITIVE_STEPS = ((1, 0), (0, -1), (-1, 1))


def edge_ends(e):
    kind, a, b = e
    if kind == "H":
        return (a, b), (a + 1, b)
    if kind == "V":
        return (a, b + 1), (a, b)
    if kind == "D":
        return (a + 1, b), (a, b + 1)
    raise ValueError(f"bad edge {e!r}")


def triangle_vertices(t):
    kind, a, b = t
    if kind == "L":
        return (a, b), (a + 1, b), (a, b + 1)
    return (a + 1, b), (a + 1, b + 1), (a, b + 1)


def triangle_edges(t):
    kind, a, b = t
    if kind == "L":
        return ("H", a, b), ("V", a, b), ("D", a, b)
    return ("H", a, b + 1), ("V", a + 1, b), ("D", a, b)


def edge_triangles(e):
    """The two unit triangles sharing edge ``e``."""
    kind, a, b = e
    if kind == "H":
        return ("L", a, b), ("R", a, b - 1)
    if kind == "V":
        return ("L", a, b), ("R", a - 1, b)
    return ("L", a, b), ("R", a, b)


def edges_between(points):
    """Every unit edge whose endpoints both lie in ``points``."""
    pts = set(points)
    out = []
    for a, b in pts:
        if (a + 1, b) in pts:
            out.append(("H", a, b))
        if (a, b + 1) in pts:
            out.append(("V", a, b))
        if (a + 1, b - 1) in pts:
            out.append(("D", a, b - 1))
    return out


@lru_cache(maxsize=256)
def _difference_matrix(nvars: int, edge_bytes: bytes):
    """Stacked ``[D; -D]`` for the edge list; cached since solvers reuse layouts."""
    edges = np.frombuffer(edge_bytes, dtype=np.int64).reshape(-1, 2)
    m = edges.shape[0]
    rows = np.repeat(np.arange(m), 2)
    cols = edges[:, ::-1].ravel()
    vals = np.tile([1.0, -1.0], m)
    d = sparse.csr_matrix((vals, (rows, cols)), shape=(m, nvars))
    return sparse.vstack([d, -d]).tocsr()


def solve_difference_lp(nvars, edges, lo, hi, cost, var_lo=None, var_hi=None, fixed=None):
    """Maximize ``sum_e cost_e (G[v_e] - G[u_e])`` over integer G.

    Subject to ``lo_e <= G[v_e] - G[u_e] <= hi_e`` and optional per-variable
    bounds.  ``fixed`` maps variable index to a pinned value.  The
    constraint matrix is a network matrix, so the simplex vertex returned by
    HiGHS is integral; it is rounded and re-checked.
    """
    edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
    m = edges.shape[0]
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    cost = np.asarray(cost, dtype=float)
    c = np.zeros(nvars)
    np.add.at(c, edges[:, 1], cost)
    np.add.at(c, edges[:, 0], -cost)
    a_ub = _difference_matrix(nvars, edges.tobytes())
    b_ub = np.concatenate([hi, -lo])
    vlo = np.full(nvars, -np.inf) if var_lo is None else np.asarray(var_lo, dtype=float).copy()
    vhi = np.full(nvars, np.inf) if var_hi is None else np.asarray(var_hi, dtype=float).copy()
    for k, val in (fixed or {}).items():
        if val < vlo[k] or val > vhi[k]:
            raise InfeasibleError(f"pinned variable {k} outside its band")
        vlo[k] = vhi[k] = val
    if np.any(vlo > vhi):
        raise InfeasibleError("empty variable band")
    bounds = list(zip(np.where(np.isinf(vlo), None, vlo), np.where(np.isinf(vhi), None, vhi)))
    res = linprog(-c, A_ub=a_ub, b_ub=b_ub, bounds=bounds, method="highs-ds")
    if res.status == 2:
        raise InfeasibleError("no height function satisfies the constraints")
    if res.status != 0:
        raise NumericalError("LP solver failed", {"status": res.status, "message": res.message})
    g = np.rint(res.x).astype(np.int64)
    if np.max(np.abs(res.x - g), initial=0.0) > 1e-6:
        raise NumericalError("LP vertex is not integral", {"max_frac": float(np.max(np.abs(res.x - g)))})
    diff = g[edges[:, 1]] - g[edges[:, 0]]
    if np.any(diff < lo - 1e-9) or np.any(diff > hi + 1e-9):
        raise NumericalError("rounded LP solution violates a constraint")
    return g
