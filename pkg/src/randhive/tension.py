"""Empirical surface tension of GUE patches and the equator and hexagon terms.

A patch of half-width m is tiled on the square ``[0, W]^2`` (``W = 2m``)
with a free boundary.  Tiling point ``(i, j)`` sits over patch entry
``values[j, W - i]`` (entry index j, row W - i), so that

* green (type iii, diagonal ``D(i, j)``) weighs
  ``(values[j+1, W-i-1] - values[j+1, W-i]) / 3`` = minus one third of an
  up-gap,
* blue (type ii, diagonal ``H(a, b)``) weighs
  ``(values[b+1, W-a] - values[b, W-a-1]) / 3`` = minus one third of a
  down-gap,
* red (type i) weighs nothing.

The lower trapezoid of a hexagon counts blue twice and green once; the
upper trapezoid, read through the same frame, counts green twice and
blue once.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy import sparse
from scipy.optimize import linprog

from .errors import (
    DomainError,
    InfeasibleError,
    NumericalError,
    ParameterError,
    StatisticsError,
    ValidationError,
)
from .height import in_K, tilt_to_covector
from .lozenge import lambda_offset, excavation_hexagon, hexagon_weight_alt
from .randmat import extract_patch, interlacing_gap_array, minor_process, sample_gue

FACTORS = {"lo": {"blue": 2.0, "green": 1.0}, "up": {"blue": 1.0, "green": 2.0}}
FEASIBILITY_RADIUS = 1.5  # below this a tilted corridor may hold no height function


def psi(m) -> float:
    if m < 2:
        raise ParameterError("psi needs m >= 2")
    return math.log(m) ** -0.1


def upper_to_patch_covector(c):
    """Tilt covector of the upper trapezoid expressed in the patch frame."""
    c1, c2 = c
    return (c2 - c1, -c1)


# ---------------------------------------------------------------------------
# patch weights and heights


def patch_weights(values):
    """Blue and green weight arrays of a ``(W+1) x (W+1)`` patch.

    ``green[i, j]`` belongs to ``D(i, j)`` for ``0 <= i, j < W`` and
    ``blue[a, b]`` to ``H(a, b)`` for ``0 <= a < W``, ``1 <= b < W`` (other
    entries are 0).
    """
    v = np.asarray(values, dtype=float)
    w = v.shape[0] - 1
    i = np.arange(w)[:, None]
    j = np.arange(w)[None, :]
    green = (v[j + 1, w - i - 1] - v[j + 1, w - i]) / 3.0
    blue = np.zeros((w, w + 1))
    b = np.arange(1, w)[None, :]
    blue[:, 1:w] = (v[b + 1, w - i] - v[b, w - i - 1]) / 3.0
    return blue, green


def total_lozenge_weight(patch, heights, side: str = "lo") -> float:
    """Weighted sum of the interior lozenges of the tiling with these heights.

    ``heights`` is a ``(W+1) x (W+1)`` integer array indexed ``[i, j]``.
    """
    v = patch.values if hasattr(patch, "values") else np.asarray(patch, dtype=float)
    f = np.asarray(heights)
    w = v.shape[0] - 1
    if f.shape != v.shape:
        raise ValidationError("height array and patch differ in shape")
    dh = f[1:, :] - f[:-1, :]  # along (1, 0): H edges
    dv = f[:, :-1] - f[:, 1:]  # along (0, -1): V edges
    dd = f[:-1, 1:] - f[1:, :-1]  # along (-1, 1): D edges
    for d in (dh, dv, dd):
        if not np.all((d == 1) | (d == -2)):
            raise ValidationError("heights do not come from a tiling")
    _check_triangles(dh, dv, dd)
    blue, green = patch_weights(v)
    fac = FACTORS[side]
    crossed_h = dh == -2
    crossed_d = dd == -2
    total = fac["green"] * float(np.sum(green[crossed_d]))
    total += fac["blue"] * float(np.sum(blue[:, 1:w][crossed_h[:, 1:w]]))
    return total


def _check_triangles(dh, dv, dd):
    # L(a,b): H(a,b), V(a,b), D(a,b); R(a,b): H(a,b+1), V(a+1,b), D(a,b)
    lt = (dh[:, :-1] == -2).astype(int) + (dv[:-1, :] == -2) + (dd == -2)
    rt = (dh[:, 1:] == -2).astype(int) + (dv[1:, :] == -2) + (dd == -2)
    if np.any(lt != 1) or np.any(rt != 1):
        raise ValidationError("heights do not come from a tiling")


class PatchSolver:
    """Exact corridor-constrained maximizer for one patch size.

    Variables ``G`` with ``f = f_ref + 3 G`` where ``f_ref(i, j) = i - j``
    is the all-green tiling.  H and V steps of G lie in ``[-1, 0]`` and D
    steps in ``[0, 1]``.
    """

    def __init__(self, m: int):
        if m < 1:
            raise ParameterError("patch half-width must be positive")
        self.m = m
        w = self.w = 2 * m
        npts = (w + 1) ** 2
        idx = np.arange(npts).reshape(w + 1, w + 1)
        self.idx = idx
        tail, head, lo, hi = [], [], [], []
        # H(a,b): (a,b)->(a+1,b)
        tail.append(idx[:-1, :].ravel()), head.append(idx[1:, :].ravel())
        nh = w * (w + 1)
        lo.append(np.full(nh, -1.0)), hi.append(np.zeros(nh))
        # V(a,b): (a,b+1)->(a,b)
        tail.append(idx[:, 1:].ravel()), head.append(idx[:, :-1].ravel())
        lo.append(np.full(nh, -1.0)), hi.append(np.zeros(nh))
        # D(a,b): (a+1,b)->(a,b+1)
        tail.append(idx[1:, :-1].ravel()), head.append(idx[:-1, 1:].ravel())
        nd = w * w
        lo.append(np.zeros(nd)), hi.append(np.ones(nd))
        self.tail = np.concatenate(tail)
        self.head = np.concatenate(head)
        self.lo = np.concatenate(lo)
        self.hi = np.concatenate(hi)
        ne = self.tail.size
        rows = np.repeat(np.arange(ne), 2)
        cols = np.stack([self.head, self.tail], axis=1).ravel()
        vals = np.tile([1.0, -1.0], ne)
        d = sparse.csr_matrix((vals, (rows, cols)), shape=(ne, npts))
        self.a_ub = sparse.vstack([d, -d]).tocsc()
        self.b_ub = np.concatenate([self.hi, -self.lo])
        ii, jj = np.meshgrid(np.arange(w + 1), np.arange(w + 1), indexing="ij")
        self.ii, self.jj = ii, jj
        self.f_ref = ii - jj  # 0 at the centre (m, m)

    def edge_costs(self, values, side: str = "lo"):
        """Objective coefficients of the G-steps (crossing weights)."""
        blue, green = patch_weights(values)
        fac = FACTORS[side]
        w = self.w
        # H crossed iff dG = -1: weight = -dG * blue; only interior H edges (0 < b < W)
        ch = -fac["blue"] * blue
        ch[:, 0] = 0.0
        ch[:, w] = 0.0
        cv = np.zeros((w + 1, w))  # red
        # D crossed iff dG = 0: weight = (1 - dG) * green; constant part dropped
        cd = -fac["green"] * green
        return np.concatenate([ch.ravel(), cv.ravel(), cd.ravel()]), fac["green"] * float(green.sum())

    def bounds(self, covector, radius: float):
        """Per-variable bounds of the corridor ``|f - c . (p - centre)| <= radius``."""
        c1, c2 = covector
        m = self.m
        target = c1 * (self.ii - m) + c2 * (self.jj - m)
        lo = np.ceil((target - radius - self.f_ref) / 3.0 - 1e-9)
        hi = np.floor((target + radius - self.f_ref) / 3.0 + 1e-9)
        lo[m, m] = max(lo[m, m], 0.0)
        hi[m, m] = min(hi[m, m], 0.0)
        if np.any(lo > hi):
            raise InfeasibleError("corridor is empty at some point")
        return lo.ravel(), hi.ravel()

    def solve(self, values, covector, radius: float, side: str = "lo"):
        """Return ``(max total weight, height array)``."""
        cost, const = self.edge_costs(values, side)
        c = np.zeros(self.idx.size)
        np.add.at(c, self.head, cost)
        np.add.at(c, self.tail, -cost)
        lo, hi = self.bounds(covector, radius)
        res = linprog(-c, A_ub=self.a_ub, b_ub=self.b_ub, bounds=np.stack([lo, hi], axis=1), method="highs-ds")
        if res.status == 2:
            raise InfeasibleError("no height function fits the corridor")
        if res.status != 0:
            raise NumericalError("patch LP failed", {"status": res.status, "message": res.message})
        g = np.rint(res.x)
        if np.max(np.abs(res.x - g)) > 1e-6:
            raise NumericalError("patch LP vertex is not integral", {"max_frac": float(np.max(np.abs(res.x - g)))})
        heights = (self.f_ref + 3 * g.reshape(self.ii.shape)).astype(np.int64)
        value = total_lozenge_weight(values, heights, side)
        if abs(value - (const + float(c @ g))) > 1e-7 * max(1.0, abs(value)):
            raise NumericalError("patch LP objective disagrees with the recomputed weight")
        return value, heights


@lru_cache(maxsize=16)
def patch_solver(m: int) -> PatchSolver:
    return PatchSolver(m)


def brute_force_patch_max(values, covector, radius: float, side: str = "lo"):
    """Enumerate corridor height functions by depth-first search (tiny m only)."""
    v = np.asarray(values, dtype=float)
    w = v.shape[0] - 1
    m = w // 2
    solver = patch_solver(m)
    lo, hi = solver.bounds(covector, radius)
    lo = lo.reshape(w + 1, w + 1).astype(int)
    hi = hi.reshape(w + 1, w + 1).astype(int)
    g = np.zeros((w + 1, w + 1), dtype=int)
    order = [(i, j) for i in range(w + 1) for j in range(w + 1)]
    best = [-np.inf]

    def ok(i, j):
        x = g[i, j]
        if i > 0 and not -1 <= x - g[i - 1, j] <= 0:  # H(i-1, j)
            return False
        if j > 0 and not -1 <= g[i, j - 1] - x <= 0:  # V(i, j-1)
            return False
        if i > 0 and j < w and not 0 <= g[i - 1, j + 1] - x <= 1:  # D(i-1, j)
            return False
        return True

    def rec(k):
        if k == len(order):
            f = solver.f_ref + 3 * g
            best[0] = max(best[0], total_lozenge_weight(v, f, side))
            return
        i, j = order[k]
        for x in range(lo[i, j], hi[i, j] + 1):
            g[i, j] = x
            if ok(i, j):
                rec(k + 1)

    rec(0)
    if best[0] == -np.inf:
        raise InfeasibleError("no height function fits the corridor")
    return best[0]


# ---------------------------------------------------------------------------
# Monte Carlo estimates


@dataclass(frozen=True)
class TensionQuery:
    position: tuple = (0.35, 0.7)
    tilt: tuple = (0.0, 0.0)  # 60-degree basis
    m: int = 8
    eps: float | None = None  # defaults to psi(m)
    trials: int = 200
    side: str = "lo"
    n: int | None = None  # matrix size; defaults to max(64, 8m)
    variance_param: float = 1.0
    seed: int = 0
    feasibility: float = FEASIBILITY_RADIUS

    @property
    def covector(self):
        return tilt_to_covector(self.tilt)

    @property
    def radius(self) -> float:
        return self.m * (psi(self.m) if self.eps is None else self.eps)

    @property
    def matrix_size(self) -> int:
        return self.n if self.n is not None else max(64, 8 * self.m)

    def validate(self):
        if self.m < 2:
            raise ParameterError("m must be at least 2")
        if self.trials < 2:
            raise ParameterError("at least two trials are needed")
        if self.side not in FACTORS:
            raise ParameterError(f"unknown side {self.side!r}")
        if not in_K(self.covector, 1e-12):
            raise ParameterError(f"tilt {self.tilt} is outside K")
        if self.radius <= self.feasibility:
            raise ParameterError(f"eps*m = {self.radius:.3g} is below the feasibility threshold {self.feasibility}")


@dataclass
class TensionEstimate:
    mean: float
    std_error: float
    m: int
    eps: float
    trials: int
    per_trial: np.ndarray = field(repr=False, default=None)
    solver: str = "exact-lp"


def sample_patch(n: int, x, m: int, seed: int, trial: int, variance_param: float = 1.0):
    """Patch of half-width m at relative position x of an n x n GUE minor process."""
    s0 = math.ceil(n * x[1])
    top = s0 + m
    if top > n:
        raise DomainError("patch window extends past the top row")
    h = sample_gue(n, variance_param=variance_param, seed=seed, index=trial, size=top)
    p = minor_process(h, levels=range(s0 - m, top + 1))
    return extract_patch(p, x, n, m)


def patch_maxima(q: TensionQuery, covectors, radii, patches=None):
    """Per-trial maxima, array of shape ``(trials, len(covectors), len(radii))``."""
    q.validate()
    solver = patch_solver(q.m)
    out = np.empty((q.trials, len(covectors), len(radii)))
    for t in range(q.trials):
        patch = patches[t] if patches is not None else sample_patch(q.matrix_size, q.position, q.m, q.seed, t, q.variance_param)
        for a, c in enumerate(covectors):
            for b, r in enumerate(radii):
                out[t, a, b], _ = solver.solve(patch.values, c, r, q.side)
    return out


def sigma_m_estimate(q: TensionQuery, patches=None) -> TensionEstimate:
    vals = patch_maxima(q, [q.covector], [q.radius], patches)[:, 0, 0]
    return _estimate(vals, q)


def _estimate(vals, q: TensionQuery) -> TensionEstimate:
    m2 = float(q.m) ** 2
    mean = -float(np.mean(vals)) / m2
    se = float(np.std(vals, ddof=1)) / math.sqrt(vals.size) / m2
    eps = psi(q.m) if q.eps is None else q.eps
    return TensionEstimate(mean, se, q.m, eps, int(vals.size), -np.asarray(vals) / m2)


def sigma_diamond(position, tilt, m_schedule=(8, 16, 32), trials: int = 200, side: str = "lo", seed: int = 0, **kw):
    """Estimates over an m schedule, with an approximate-monotonicity report."""
    seq = []
    for m in m_schedule:
        q = TensionQuery(position=tuple(position), tilt=tuple(tilt), m=m, trials=trials, side=side, seed=seed, **kw)
        seq.append(sigma_m_estimate(q))
    violations = []
    for a, b in zip(seq[:-1], seq[1:]):
        slack = 3.0 * math.hypot(a.std_error, b.std_error)
        if b.mean > a.mean + slack:
            violations.append((a.m, b.m, b.mean - a.mean, slack))
    return {
        "estimate": seq[-1].mean,
        "std_error": seq[-1].std_error,
        "sequence": [(e.m, e.mean, e.std_error) for e in seq],
        "monotone_within_noise": not violations,
        "violations": violations,
    }


def rho_field(x, trials: int = 50, n: int = 128, m: int = 4, seed: int = 0, variance_param: float = 1.0):
    """Mean (down-gap, up-gap) of patches at x, with standard errors.

    ``x`` is (entry, row) relative to n; the equator of a hexagon maps to
    the top row, so ``x[1]`` must be below 1.
    """
    if not 0 < x[1] < 1 or not 0 < x[0] < x[1]:
        raise DomainError(f"position {x} is not strictly inside the GT triangle")
    means = np.empty((trials, 2))
    for t in range(trials):
        gaps = interlacing_gap_array(sample_patch(n, x, m, seed, t, variance_param))
        means[t] = gaps.reshape(2, -1).mean(axis=1)
    return means.mean(axis=0), means.std(axis=0, ddof=1) / math.sqrt(trials)


# ---------------------------------------------------------------------------
# equator and hexagon terms


def sigma_delta(tau, b) -> float:
    tau_up, tau_lo = tau
    if not -1.0 - 1e-12 <= b <= 2.0 + 1e-12:
        raise DomainError(f"equator slope {b} outside [-1, 2]")
    return -(((b + 1.0) / 3.0) * (tau_up / 3.0) + ((2.0 - b) / 3.0) * (-tau_lo / 3.0))


def equator_pairing(mu, lam, pair, hexagon) -> float:
    """Sum over the equator of the slope-weighted border-triangle values."""
    n = hexagon.n
    total = 0.0
    for k in hexagon.equator_range:
        b = pair.up[(k + 1, n - k - 1)] - pair.up[(k, n - k)]
        r = n - k
        mu1 = mu.entry(1, r) if 1 <= r <= n else 0.0
        lamr = lam.entry(r, r) if 1 <= r <= n else 0.0
        total += ((1.0 + b) / 3.0) * (mu1 / 3.0) + ((2.0 - b) / 3.0) * (-lamr / 3.0)
    return total


def equator_pairing_by_parts(mu, lam, pair, hexagon) -> float:
    """Same sum regrouped: a constant part plus height-differences times spectral sums."""
    n = hexagon.n
    ks = list(hexagon.equator_range)
    heights = [pair.up[(k, n - k)] for k in ks] + [pair.up[(ks[-1] + 1, n - ks[-1] - 1)]]
    a = np.array([mu.entry(1, n - k) / 9.0 for k in ks])
    c = np.array([-lam.entry(n - k, n - k) / 9.0 for k in ks])
    coef = a - c  # multiplies b_k
    const = float(np.sum(a + 2.0 * c))
    # sum_k coef_k (h_{k+1} - h_k) = coef_last h_last - coef_0 h_0 - sum h_k (coef_k - coef_{k-1})
    h = np.array(heights, dtype=float)
    by_parts = coef[-1] * h[-1] - coef[0] * h[0] - float(np.sum(h[1:-1] * (coef[1:] - coef[:-1])))
    return const + by_parts


def hexagon_term(fields, v, lambda_free: bool = True):
    """Mean and standard error of ``n^-2 wt'(hexagon_v)`` over weight-field samples."""
    fields = list(fields)
    if len(fields) < 30:
        raise StatisticsError("hexagon_term needs at least 30 samples")
    n = fields[0].n
    hx = excavation_hexagon(v, n)
    vals = []
    for w in fields:
        val = hexagon_weight_alt(hx, w)
        if lambda_free:
            val -= lambda_offset(v, w.offset)
        vals.append(val / n**2)
    vals = np.array(vals)
    return float(vals.mean()), float(vals.std(ddof=1) / math.sqrt(vals.size)), float(vals.std(ddof=1))


def patch_variance_probe(x, m_schedule=(3, 9), eps: float | None = None, trials: int = 100, tilt=(0.0, 0.0), side: str = "lo", seed: int = 0, **kw):
    """Variance of the per-patch maximum, compared with ``m^4``."""
    rows = []
    for m in m_schedule:
        q = TensionQuery(position=tuple(x), tilt=tuple(tilt), m=m, eps=eps, trials=trials, side=side, seed=seed, **kw)
        vals = patch_maxima(q, [q.covector], [q.radius])[:, 0, 0]
        var = float(np.var(vals, ddof=1))
        rows.append({"m": m, "variance": var, "m4": float(m) ** 4, "ratio": var / float(m) ** 4})
    ratios = [r["ratio"] for r in rows]
    return {"rows": rows, "ratio_decreasing": all(b < a for a, b in zip(ratios[:-1], ratios[1:]))}
