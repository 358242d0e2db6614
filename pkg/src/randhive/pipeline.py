"""Monte Carlo drivers shared by the command line and the acceptance tests.

Every trial draws its randomness from ``(seed, index)`` streams, so results
depend only on the seed and the trial index.  Parallel maps keep the input
order, which makes any reduction independent of the number of workers.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import partial

import numpy as np

from .errors import ParameterError, StatisticsError
from .hive import GTPattern, gt_from_minors
from .lozenge import build_weight_field, octahedron_from_field
from .randmat import minor_process, sample_gue
from .tension import FACTORS, TensionQuery, hexagon_term, patch_solver, psi, sample_patch
from .varsolve import Mesh, S_v, SigmaTable, TensionModel, f_ddagger, k_grid, maximize_Sv, mesh_hexagon


def default_threads() -> int:
    return os.cpu_count() or 1


def parallel_map(fn, items, threads: int = 1):
    """Ordered map, in-process for one thread, across processes otherwise."""
    items = list(items)
    if threads <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items, chunksize=max(1, len(items) // (4 * threads))))


# ---------------------------------------------------------------------------
# random hives


def sample_gt(n: int, variance_param: float, seed: int, index: int) -> GTPattern:
    return gt_from_minors(minor_process(sample_gue(n, variance_param, seed, index)))


def lambda_offset_grid(offset) -> np.ndarray:
    """``lambda_offset(v, offset)`` for every v of the grid at once."""
    offset = np.asarray(offset, dtype=float)
    n = offset.size
    prefix = np.concatenate([[0.0], np.cumsum(offset)])
    i, j = np.meshgrid(np.arange(n + 1), np.arange(n + 1), indexing="ij")
    return prefix[n - np.maximum(i - j, 0)]


@dataclass
class HiveSample:
    """One trial: the weight field and ``n^-2 (h~ - offset)`` on the whole grid."""

    trial: int
    field: object
    normalized: np.ndarray


def hive_sample(trial: int, n: int, seed: int = 0, sigma_lambda: float = 1.0, sigma_mu: float = 1.0) -> HiveSample:
    lam = sample_gt(n, sigma_lambda, seed, 2 * trial)
    mu = sample_gt(n, sigma_mu, seed, 2 * trial + 1)
    w = build_weight_field(mu, lam)
    h = octahedron_from_field(w.kt)
    return HiveSample(trial, w, (h - lambda_offset_grid(w.offset)) / n**2)


def hive_samples(n: int, trials: int, seed: int = 0, sigma_lambda: float = 1.0, sigma_mu: float = 1.0, threads: int = 1):
    fn = partial(hive_sample, n=n, seed=seed, sigma_lambda=sigma_lambda, sigma_mu=sigma_mu)
    return parallel_map(fn, range(trials), threads)


def hive_values_at(n: int, trials: int, v, seed: int = 0, threads: int = 1) -> np.ndarray:
    """``n^-2 (h~(v) - offset)`` per trial, without keeping the fields."""
    fn = partial(_value_at, n=n, v=tuple(v), seed=seed)
    return np.array(parallel_map(fn, range(trials), threads))


def _value_at(trial, n, v, seed):
    return float(hive_sample(trial, n, seed).normalized[v])


# ---------------------------------------------------------------------------
# local statistics of the GT patterns


def _stack(patterns) -> np.ndarray:
    """Array ``a[t, s, r]`` = entry r+1 of row s+1 (NaN above the row length)."""
    n = patterns[0].n
    out = np.full((len(patterns), n, n), np.nan)
    for t, g in enumerate(patterns):
        for s, row in enumerate(g.rows):
            out[t, s, : s + 1] = row
    return out


class GapField:
    """Mean interlacing gaps of a family of GT patterns, by relative position.

    Positions are ``(entry, row)`` divided by n, as in
    :meth:`Mesh.gt_position`.  Gaps are averaged over a square window of
    half-width ``window`` around the nearest index.
    """

    def __init__(self, patterns, window: int = 2):
        a = _stack(patterns)
        self.n = a.shape[1]
        self.window = window
        # NaN marks entries above the row length; every pattern has the same shape
        self.down = np.mean(a[:, :-1, :-1] - a[:, 1:, 1:], axis=0)  # lambda_{r,s} - lambda_{r+1,s+1}
        self.up = np.mean(a[:, 1:, :-1] - a[:, :-1, :-1], axis=0)  # lambda_{r,s+1} - lambda_{r,s}

    def __call__(self, x):
        n, w = self.n, self.window
        s = min(max(int(math.ceil(n * x[1])), 1), n - 1)
        r = min(max(int(math.ceil(n * x[0])), 1), s)
        rs = slice(max(s - 1 - w, 0), min(s + w, n - 1))
        rr = slice(max(r - 1 - w, 0), min(r + w, n - 1))
        d = self.down[rs, rr]
        u = self.up[rs, rr]
        return np.array([np.nanmean(d), np.nanmean(u)])


def equator_tau(fields):
    """``tau(t) = (E mu_{1,r} / n, E lambda_{r,r} / n)`` with ``r = n - nt``, interpolated."""
    n = fields[0].n
    k = np.arange(n)
    up = np.array([[w.mu.entry(1, n - kk) for kk in k] for w in fields]).mean(axis=0) / n
    lo = np.array([[w.lam.entry(n - kk, n - kk) for kk in k] for w in fields]).mean(axis=0) / n
    t = k / n

    def tau(s):
        return np.array([np.interp(s, t, up), np.interp(s, t, lo)])

    return tau


# ---------------------------------------------------------------------------
# tension tables and the variational consistency experiment


def sigma_table(side: str, m: int, trials: int, spacing: float = 0.1, position=(0.35, 0.7), seed: int = 0,
                eps: float | None = None, threads: int = 1) -> SigmaTable:
    """Estimated tension on the barycentric grid of K, convexified."""
    cov = k_grid(spacing)
    q = TensionQuery(position=tuple(position), m=m, eps=eps, trials=trials, side=side, seed=seed)
    q.validate()
    fn = partial(_table_trial, q=q, covectors=cov)
    vals = -np.array(parallel_map(fn, range(trials), threads)) / float(m) ** 2
    mean = vals.mean(axis=0)
    se = vals.std(axis=0, ddof=1) / math.sqrt(trials)
    return SigmaTable(cov, mean, se).convexified()


def _table_trial(t, q, covectors):
    patch = sample_patch(q.matrix_size, q.position, q.m, q.seed, t, q.variance_param)
    solver = patch_solver(q.m)
    return [solver.solve(patch.values, c, q.radius, q.side)[0] for c in covectors]


@dataclass
class ConsistencyReport:
    v_rel: tuple
    n: int
    trials: int
    empirical: float
    empirical_se: float
    s_hex: float
    s_hex_se: float
    predicted: float
    s_diamond: float
    s_delta: float
    error_bound: float
    relative_gap: float
    dagger_value: float
    mesh: int
    m: int
    details: dict = field(default_factory=dict)

    def summary(self) -> dict:
        out = dict(self.__dict__)
        out["v_rel"] = list(self.v_rel)
        return out


def consistency_experiment(samples, v_rel=(0.5, 0.5), mesh: int = 12, m: int = 8, table_trials: int = 20,
                           spacing: float = 0.1, position=(0.35, 0.7), seed: int = 0, threads: int = 1,
                           tables=None):
    """Compare ``max_f S_v(f)`` with the empirical mean of ``n^-2 h~(v)``.

    ``samples`` are :class:`HiveSample` objects at one size n.  Returns the
    report and the maximizing mesh field.
    """
    if len(samples) < 30:
        raise StatisticsError("need at least 30 hive samples")
    fields = [s.field for s in samples]
    n = fields[0].n
    v = (round(v_rel[0] * n), round(v_rel[1] * n))
    if abs(v[0] - v_rel[0] * n) > 1e-9 or abs(v[1] - v_rel[1] * n) > 1e-9:
        raise ParameterError(f"vertex {v_rel} is not on the lattice of size {n}")
    vals = np.array([s.normalized[v] for s in samples])
    s_hex, s_hex_se, _ = hexagon_term(fields, v)
    tau = equator_tau(fields)
    gaps = {"lo": GapField([w.lam for w in fields]), "up": GapField([w.mu for w in fields])}
    anchor = {side: float(np.linalg.norm(g(position))) for side, g in gaps.items()}
    cache = {}

    def scale(side, x):
        key = (side, round(float(x[0]), 12), round(float(x[1]), 12))
        if key not in cache:
            cache[key] = float(np.linalg.norm(gaps[side](x))) / anchor[side]
        return cache[key]

    if tables is None:
        tables = {side: sigma_table(side, m, table_trials, spacing, position, seed, threads=threads) for side in FACTORS}
    model = TensionModel(tables, scale, spacing)
    hx = mesh_hexagon(v_rel, mesh)
    f, value, info = maximize_Sv(hx, model, tau, s_hex)
    dagger = S_v(f_ddagger(hx), model, tau, s_hex, Mesh(hx)).total
    empirical = float(vals.mean())
    report = ConsistencyReport(
        v_rel=tuple(v_rel), n=n, trials=len(samples), empirical=empirical,
        empirical_se=float(vals.std(ddof=1) / math.sqrt(vals.size)), s_hex=s_hex, s_hex_se=s_hex_se,
        predicted=value.total, s_diamond=value.s_diamond, s_delta=value.s_delta, error_bound=value.error,
        relative_gap=abs(value.total - empirical) / abs(empirical), dagger_value=dagger, mesh=mesh, m=m,
        details={"lp": info, "psi": psi(m)},
    )
    return report, f, tables


# ---------------------------------------------------------------------------
# tension grids


def tension_line(center=(0.0, 0.0), direction=(0.3, 0.15), count: int = 5):
    """Evenly spaced tilts on a line through ``center`` (60-degree basis)."""
    half = (count - 1) / 2.0
    return [tuple(float(c + (k - half) * d) for c, d in zip(center, direction)) for k in range(count)]


def tension_grid(tilts, m: int, trials: int, eps_ratios=(0.5, 1.0), position=(0.35, 0.7), side: str = "lo",
                 seed: int = 0, variance_param: float = 1.0, threads: int = 1) -> np.ndarray:
    """Per-trial ``sigma`` samples, shape ``(trials, len(tilts), len(eps_ratios))``.

    Column b uses the corridor radius ``eps_ratios[b] * m * psi(m)``.  All
    tilts and radii of one trial share the same patch.
    """
    from .height import tilt_to_covector

    q = TensionQuery(position=tuple(position), tilt=tuple(tilts[0]), m=m, trials=trials, side=side, seed=seed,
                     variance_param=variance_param)
    radii = [r * q.radius for r in eps_ratios]
    for t in tilts:
        TensionQuery(position=tuple(position), tilt=tuple(t), m=m, eps=min(radii) / m, side=side).validate()
    cov = [tilt_to_covector(t) for t in tilts]
    fn = partial(_grid_trial, q=q, covectors=cov, radii=radii)
    vals = np.array(parallel_map(fn, range(trials), threads))
    return -vals / float(m) ** 2


def _grid_trial(t, q, covectors, radii):
    patch = sample_patch(q.matrix_size, q.position, q.m, q.seed, t, q.variance_param)
    solver = patch_solver(q.m)
    return [[solver.solve(patch.values, c, r, q.side)[0] for r in radii] for c in covectors]


def tension_properties(grids: dict, tilts) -> dict:
    """Nonnegativity, eps-monotonicity, m-monotonicity and midpoint convexity.

    ``grids[m]`` is the output of :func:`tension_grid` with eps ratios
    ``(smaller, default)``; the default radius is the last column.
    """
    ms = sorted(grids)
    out = {"nonnegative": [], "eps_monotone": [], "m_monotone": [], "midpoint_convex": []}
    for m in ms:
        g = grids[m]
        mean = g[:, :, -1].mean(axis=0)
        se = g[:, :, -1].std(axis=0, ddof=1) / math.sqrt(g.shape[0])
        for a, t in enumerate(tilts):
            out["nonnegative"].append({"m": m, "tilt": list(t), "mean": float(mean[a]), "se": float(se[a]),
                                       "ok": bool(mean[a] >= -3 * se[a])})
        # a wider corridor can only raise the max, so sigma can only drop
        worst = float(np.max(g[:, :, -1] - g[:, :, 0]))
        out["eps_monotone"].append({"m": m, "worst_increase": worst, "ok": worst <= 1e-9})
        for a in range(1, len(tilts) - 1):
            d = g[:, a, -1] - 0.5 * (g[:, a - 1, -1] + g[:, a + 1, -1])
            slack = 3 * float(d.std(ddof=1)) / math.sqrt(d.size)
            out["midpoint_convex"].append({"m": m, "tilt": list(tilts[a]), "excess": float(d.mean()), "slack": slack,
                                           "ok": bool(d.mean() <= slack)})
    for m0, m1 in zip(ms[:-1], ms[1:]):
        for a, t in enumerate(tilts):
            x, y = grids[m0][:, a, -1], grids[m1][:, a, -1]
            slack = 3 * math.hypot(x.std(ddof=1) / math.sqrt(x.size), y.std(ddof=1) / math.sqrt(y.size))
            out["m_monotone"].append({"m": [m0, m1], "tilt": list(t), "increase": float(y.mean() - x.mean()),
                                      "slack": slack, "ok": bool(y.mean() - x.mean() <= slack)})
    out["ok"] = {k: all(r["ok"] for r in v) for k, v in out.items()}
    return out


# ---------------------------------------------------------------------------
# quick invariant suite


def run_checks(seed: int = 0, trials: int = 5) -> list:
    """Small versions of the main invariants; returns ``[(name, ok, detail)]``."""
    from .height import is_tileable, brute_force_tileable, random_domain, round_asymptotic, rounding_error
    from .hive import hive_from_gt, is_rhombus_concave
    from .lozenge import (enumerate_tilings, excavation_hexagon, hive_value, lambda_offset, max_weight_tiling,
                          octahedron_recurrence, tiling_weight)
    from .qdiff import cz_decompose, random_lipschitz, verify_cz
    from .randmat import rng_for
    from .varsolve import dagger_fields

    results = []

    def record(name, fn):
        try:
            ok, detail = fn()
        except Exception as exc:  # a crash is a failed check, reported with its module
            ok, detail = False, f"{type(exc).__module__}.{type(exc).__name__}: {exc}"
        results.append((name, bool(ok), detail))

    def fields(n, count):
        for t in range(count):
            lam = sample_gt(n, 1.0, seed, 2 * t)
            mu = sample_gt(n, 1.0, seed, 2 * t + 1)
            yield build_weight_field(mu, lam)

    def oracle():
        worst = 0.0
        for w in fields(3, trials):
            for v in ((1, 1), (1, 2), (2, 1), (2, 2)):
                hx = excavation_hexagon(v, 3)
                best = max(tiling_weight(t, w, hx) for t in enumerate_tilings(hx))
                worst = max(worst, abs(max_weight_tiling(hx, w)[1] - best))
        return worst <= 1e-9, f"max |LP - enumeration| = {worst:.2e}"

    def forms():
        worst = 0.0
        for w in fields(3, trials):
            hx = excavation_hexagon((1, 2), 3)
            for t in enumerate_tilings(hx):
                worst = max(worst, abs(tiling_weight(t, w, hx) - tiling_weight(t, w, hx, "red-avoiding")))
        return worst <= 1e-9, f"max form difference = {worst:.2e}"

    def octahedron():
        worst = 0.0
        for w in fields(4, trials):
            h, hp = octahedron_recurrence(w.kt, w.kt)
            for v in ((1, 1), (1, 3), (3, 1), (2, 2)):
                ref = h[v] if v[0] <= v[1] else hp[v]
                worst = max(worst, abs(ref - hive_value(v, w.mu, w.lam, field=w)))
        return worst <= 1e-9, f"max |octahedron - tiling| = {worst:.2e}"

    def concave():
        bad = 0
        for t in range(4 * trials):
            ok, _ = is_rhombus_concave(hive_from_gt(sample_gt(10, 1.0, seed, 1000 + t)))
            bad += not ok
        return bad == 0, f"{bad} non-concave hives"

    def lam_invariance():
        worst = 0.0
        for w in fields(4, trials):
            v = (2, 1)
            a = hive_value(v, w.mu, w.lam, w.offset) - lambda_offset(v, w.offset)
            b = hive_value(v, w.mu, w.lam, 2 * w.offset) - lambda_offset(v, 2 * w.offset)
            worst = max(worst, abs(a - b))
        return worst <= 1e-9, f"max difference = {worst:.2e}"

    def thurston():
        rng = rng_for(seed, 11)
        bad = 0
        for _ in range(10 * trials):
            d = random_domain(int(rng.integers(2, 9)) * 2, rng)
            bad += is_tileable(d) != brute_force_tileable(d)
        return bad == 0, f"{bad} disagreements"

    def rounding():
        hx = excavation_hexagon((6, 5), 12)
        up, lo = dagger_fields(hx)

        class Pair:
            pass

        pair = Pair()
        pair.up, pair.lo = up, lo
        err = rounding_error(pair, round_asymptotic(pair, hx))
        return err < 3, f"sup error = {err:.3f}"

    def czd():
        rng = rng_for(seed, 13)
        bad = 0
        for _ in range(2 * trials):
            f = random_lipschitz(rng)
            r = cz_decompose(f, 0.9, 0.25, 7)
            bad += not verify_cz(f, r)["ok"]
        return bad == 0, f"{bad} failing decompositions"

    for name, fn in (("tiling oracle", oracle), ("weight forms", forms), ("octahedron", octahedron),
                     ("rhombus concavity", concave), ("offset invariance", lam_invariance),
                     ("tileability", thurston), ("rounding", rounding), ("dyadic decomposition", czd)):
        record(name, fn)
    return results
