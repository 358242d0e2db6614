"""GUE sampling, minor processes and the eigenvalue statistics built on them.

Normalization: an ``n x n`` sample with parameter ``s2`` has off-diagonal
entries that are complex Gaussians with ``E|x|^2 = s2 * n`` and real
Gaussian diagonal entries with variance ``s2 * n``.  Dividing by
``sqrt(s2 * n)`` gives the unit-variance GUE, whose spectrum fills
``[-2 sqrt(n), 2 sqrt(n)]``; the scaled matrix therefore has spectrum in
``[-2 s n, 2 s n]`` with bulk spacings of order ``s``.

Randomness is counter based: matrix ``index`` under ``seed`` owns a Philox
stream, and the entries are laid out row by row so the first ``k*k`` normals
always describe the top-left ``k x k`` block.  A leading block can thus be
sampled without drawing the rest of the matrix.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import NumericalError, ParameterError, RangeError, StatisticsError

__all__ = [
    "HermitianSample",
    "MinorProcess",
    "Patch",
    "sample_gue",
    "rng_for",
    "eigenvalues_hermitian",
    "householder_tridiagonalize",
    "tridiagonal_eigen",
    "minor_process",
    "semicircle_density",
    "semicircle_cdf",
    "classical_location",
    "kolmogorov_distance",
    "normalized_gaps",
    "bulk_gaps",
    "extract_patch",
    "interlacing_gap_array",
    "rigidity_report",
]


def rng_for(seed: int, *key: int) -> np.random.Generator:
    """Philox generator for the stream ``(seed, *key)``."""
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.Philox(ss))


@dataclass(frozen=True)
class HermitianSample:
    n: int
    entries: np.ndarray
    variance_param: float
    seed: int
    index: int = 0

    @property
    def entry_scale(self) -> float:
        """Standard deviation of each entry, ``sqrt(variance_param * n)``."""
        return math.sqrt(self.variance_param * self.n)

    @property
    def size(self) -> int:
        return self.entries.shape[0]


def sample_gue(
    n: int,
    variance_param: float = 1.0,
    seed: int = 0,
    index: int = 0,
    size: int | None = None,
) -> HermitianSample:
    """Sample the ``n x n`` scaled GUE matrix (or its leading ``size`` block)."""
    if int(n) != n or n < 1:
        raise ParameterError(f"n must be a positive integer, got {n!r}")
    if not variance_param > 0:
        raise ParameterError(f"variance_param must be positive, got {variance_param!r}")
    n = int(n)
    k = n if size is None else int(size)
    if not 1 <= k <= n:
        raise ParameterError(f"block size {size!r} outside [1, {n}]")
    z = rng_for(seed, index).standard_normal(k * k)
    s = math.sqrt(variance_param * n)
    a = np.zeros((k, k), dtype=complex)
    # row r consumes 2r normals for its strictly-lower entries, then one for the diagonal
    for r in range(k):
        base = r * r
        if r:
            re = z[base : base + 2 * r : 2]
            im = z[base + 1 : base + 2 * r : 2]
            a[r, :r] = (re + 1j * im) * (s / math.sqrt(2.0))
        a[r, r] = z[base + 2 * r] * s
    a = a + np.tril(a, -1).conj().T
    return HermitianSample(n, a, float(variance_param), int(seed), int(index))


# ---------------------------------------------------------------------------
# eigensolver


def householder_tridiagonalize(a: np.ndarray, want_q: bool = False):
    """Reduce a Hermitian matrix to real symmetric tridiagonal form.

    Returns ``(d, e, q)`` with ``q^H a q = tridiag(e, d, e)``; ``q`` is None
    unless requested.
    """
    a = np.array(a, dtype=complex)
    n = a.shape[0]
    q = np.eye(n, dtype=complex) if want_q else None
    for k in range(n - 2):
        x = a[k + 1 :, k].copy()
        norm = np.linalg.norm(x)
        if norm == 0.0:
            continue
        phase = x[0] / abs(x[0]) if x[0] != 0 else 1.0
        v = x.copy()
        v[0] += phase * norm
        v /= np.linalg.norm(v)
        sub = a[k + 1 :, k:]
        # reflect the trailing block from both sides: A <- H A H with H = I - 2 v v^H
        sub -= 2.0 * np.outer(v, v.conj() @ sub)
        a[k + 1 :, k:] = sub
        a[k:, k + 1 :] -= 2.0 * np.outer(a[k:, k + 1 :] @ v, v.conj())
        if q is not None:
            q[:, k + 1 :] -= 2.0 * np.outer(q[:, k + 1 :] @ v, v.conj())
    d = np.real(np.diag(a)).copy()
    off = np.diag(a, -1).copy()
    e = np.abs(off)
    if q is not None:
        # diagonal phases turn the complex subdiagonal into |e|
        phases = np.ones(n, dtype=complex)
        for k in range(n - 1):
            if off[k] != 0:
                phases[k + 1] = phases[k] * off[k] / abs(off[k])
            else:
                phases[k + 1] = phases[k]
        q = q * phases[None, :]
    return d, e, q


def tridiagonal_eigen(d, e, z=None, max_sweeps: int | None = None):
    """Implicit QL with Wilkinson shifts on a symmetric tridiagonal matrix.

    ``d`` (length n) is the diagonal and ``e`` (length n-1) the off-diagonal.
    If ``z`` is given its columns are rotated along so that eigenvectors of
    the original matrix come back as ``z``'s columns.
    """
    d = np.array(d, dtype=float)
    n = d.size
    e = np.concatenate([np.asarray(e, dtype=float), [0.0]]) if n else np.zeros(0)
    cap = 64 * max(n, 1) if max_sweeps is None else max_sweeps
    sweeps = 0
    for l in range(n):
        while True:
            m = l
            while m < n - 1:
                dd = abs(d[m]) + abs(d[m + 1])
                if abs(e[m]) <= np.finfo(float).eps * dd:
                    break
                m += 1
            if m == l:
                break
            sweeps += 1
            if sweeps > cap:
                raise NumericalError(
                    "tridiagonal QL did not converge",
                    {"sweeps": sweeps, "cap": cap, "row": l, "residual": float(abs(e[l]))},
                )
            g = (d[l + 1] - d[l]) / (2.0 * e[l])
            r = math.hypot(g, 1.0)
            g = d[m] - d[l] + e[l] / (g + math.copysign(r, g))
            s = c = 1.0
            p = 0.0
            i = m - 1
            underflow = False
            while i >= l:
                f = s * e[i]
                b = c * e[i]
                r = math.hypot(f, g)
                e[i + 1] = r
                if r == 0.0:
                    d[i + 1] -= p
                    e[m] = 0.0
                    underflow = True
                    break
                s = f / r
                c = g / r
                g = d[i + 1] - p
                r = (d[i] - g) * s + 2.0 * c * b
                p = s * r
                d[i + 1] = g + p
                g = c * r - b
                if z is not None:
                    zi = z[:, i].copy()
                    z[:, i] = c * zi - s * z[:, i + 1]
                    z[:, i + 1] = s * zi + c * z[:, i + 1]
                i -= 1
            if underflow:
                continue
            d[l] -= p
            e[l] = g
            e[m] = 0.0
    return d, z


def eigenvalues_hermitian(m, method: str = "lapack", vectors: bool = False):
    """Eigenvalues sorted non-increasing, optionally with eigenvectors.

    ``method="householder"`` runs the in-house tridiagonal reduction and
    implicit QL; ``method="lapack"`` delegates to numpy.
    """
    a = m.entries if isinstance(m, HermitianSample) else np.asarray(m)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ParameterError("expected a square matrix")
    n = a.shape[0]
    if n == 0:
        return (np.zeros(0), np.zeros((0, 0))) if vectors else np.zeros(0)
    if method == "lapack":
        if vectors:
            w, v = np.linalg.eigh(a)
            order = np.argsort(-w, kind="stable")
            return w[order], v[:, order]
        return np.linalg.eigvalsh(a)[::-1].copy()
    if method != "householder":
        raise ParameterError(f"unknown eigensolver method {method!r}")
    d, e, q = householder_tridiagonalize(a, want_q=vectors)
    w, z = tridiagonal_eigen(d, e, z=q)
    order = np.argsort(-w, kind="stable")
    if vectors:
        return w[order], z[:, order]
    return w[order]


# ---------------------------------------------------------------------------
# minor process


@dataclass
class MinorProcess:
    """Spectra of leading minors: ``rows[k]`` holds the k x k minor's spectrum.

    Only the levels that were computed are present.  ``entry_scale`` is the
    entry standard deviation of the parent matrix.
    """

    n: int
    rows: dict = field(default_factory=dict)
    entry_scale: float = 1.0
    variance_param: float = 1.0

    @property
    def unit(self) -> float:
        """Entry scale of the same matrix with variance_param = 1."""
        return self.entry_scale / math.sqrt(self.variance_param)

    def entry(self, j: int, k: int) -> float:
        """``lambda_{j,k}``: the j-th largest eigenvalue of the k x k minor."""
        if k not in self.rows or not 1 <= j <= k:
            raise RangeError(f"entry ({j},{k}) not available")
        return float(self.rows[k][j - 1])

    @property
    def top(self) -> np.ndarray:
        return self.rows[self.n]

    def is_complete(self) -> bool:
        return all(k in self.rows for k in range(1, self.n + 1))

    def interlacing_violations(self, tol: float = 1e-8) -> list:
        bad = []
        for k in range(1, self.n):
            if k not in self.rows or k + 1 not in self.rows:
                continue
            lo, hi = self.rows[k], self.rows[k + 1]
            slack = tol * max(1.0, float(np.max(np.abs(hi))))
            for j in range(k):
                if not (hi[j] + slack >= lo[j] >= hi[j + 1] - slack):
                    bad.append((j + 1, k))
        return bad

    def to_json(self, **meta) -> str:
        payload = {
            "n": self.n,
            "entry_scale": self.entry_scale,
            "variance_param": self.variance_param,
            "rows": {str(k): list(map(float, v)) for k, v in sorted(self.rows.items())},
        }
        payload.update(meta)
        return json.dumps(payload)

    @classmethod
    def from_json(cls, text: str) -> "MinorProcess":
        data = json.loads(text)
        rows = {int(k): np.array(v, dtype=float) for k, v in data["rows"].items()}
        return cls(int(data["n"]), rows, float(data.get("entry_scale", 1.0)), float(data.get("variance_param", 1.0)))


def minor_process(m: HermitianSample, levels=None, method: str = "lapack") -> MinorProcess:
    """Spectra of the requested leading minors (all of them by default)."""
    a = m.entries
    size = a.shape[0]
    ks = range(1, size + 1) if levels is None else sorted(set(int(k) for k in levels))
    rows = {}
    for k in ks:
        if not 1 <= k <= size:
            raise RangeError(f"level {k} outside [1, {size}]")
        rows[k] = eigenvalues_hermitian(a[:k, :k], method=method)
    return MinorProcess(size, rows, m.entry_scale, m.variance_param)


# ---------------------------------------------------------------------------
# semicircle


def semicircle_density(u):
    u = np.asarray(u, dtype=float)
    out = np.sqrt(np.clip(4.0 - u * u, 0.0, None)) / (2.0 * math.pi)
    return float(out) if out.ndim == 0 else out


def semicircle_cdf(u):
    u = np.clip(np.asarray(u, dtype=float), -2.0, 2.0)
    out = 0.5 + (u * np.sqrt(4.0 - u * u)) / (4.0 * math.pi) + np.arcsin(u / 2.0) / math.pi
    out = np.clip(out, 0.0, 1.0)
    return float(out) if out.ndim == 0 else out


def classical_location(i: float, n: int, tol: float = 1e-12) -> float:
    """The u with semicircle mass ``i/n`` to its left, found by bisection."""
    if not 0 <= i <= n or n <= 0:
        raise RangeError(f"index {i} outside [0, {n}]")
    target = i / n
    lo, hi = -2.0, 2.0
    if target >= 1.0:
        return 2.0
    if target <= 0.0:
        return -2.0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if semicircle_cdf(mid) < target:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def kolmogorov_distance(samples, cdf) -> float:
    x = np.sort(np.asarray(samples, dtype=float))
    k = x.size
    f = cdf(x)
    upper = np.arange(1, k + 1) / k - f
    lower = f - np.arange(0, k) / k
    return float(max(upper.max(), lower.max()))


# ---------------------------------------------------------------------------
# gaps


def _gap_factor(n: int, i: int, scale: float) -> float:
    return math.sqrt(n) * semicircle_density(classical_location(i, n)) / scale


def normalized_gaps(p: MinorProcess, i: int, bulk: float = 0.1):
    """Return ``(g_i, gt_i)`` for the top row of ``p``.

    ``g_i`` is the gap ``lambda_i - lambda_{i+1}`` and ``gt_i`` the interlacing
    gap ``lambda_i - lambda'_i`` against the next-lower row.  Both are
    multiplied by ``sqrt(N) rho_sc(gamma_{i/N}) / s``, with s the entry
    scale, so that bulk gaps have mean one.
    """
    n = p.n
    if n not in p.rows or n - 1 not in p.rows:
        raise RangeError("normalized_gaps needs the top two rows")
    if not (bulk * n <= i <= (1 - bulk) * n) or not 1 <= i <= n - 1:
        raise RangeError(f"index {i} is not in the bulk of a size-{n} spectrum")
    top, below = p.rows[n], p.rows[n - 1]
    c = _gap_factor(n, i, p.entry_scale)
    return c * (top[i - 1] - top[i]), c * (top[i - 1] - below[i - 1])


def bulk_gaps(p: MinorProcess, bulk: float = 0.1):
    """Vectorized ``normalized_gaps`` over every bulk index."""
    n = p.n
    idx = np.arange(max(1, math.ceil(bulk * n)), math.floor((1 - bulk) * n) + 1)
    idx = idx[idx <= n - 1]
    top = p.rows[n]
    u = np.array([classical_location(i, n) for i in idx])
    c = math.sqrt(n) * semicircle_density(u) / p.entry_scale
    g = c * (top[idx - 1] - top[idx])
    gt = None
    if n - 1 in p.rows:
        gt = c * (top[idx - 1] - p.rows[n - 1][idx - 1])
    return idx, g, gt


# ---------------------------------------------------------------------------
# patches


@dataclass(frozen=True)
class Patch:
    """Window of minor-process entries around ``origin = (eigen index, level)``.

    ``values[a + m, b + m]`` is the rescaled, recentred
    ``lambda_{r0 + a, s0 + b}``.
    """

    origin: tuple
    m: int
    values: np.ndarray
    ell: float = 1.0


def extract_patch(p: MinorProcess, x, ell: float, m: int) -> Patch:
    r0 = math.ceil(ell * x[0])
    s0 = math.ceil(ell * x[1])
    if m < 0:
        raise RangeError("negative half-width")
    if r0 - m < 1 or s0 + m > p.n or r0 + m > s0 - m:
        raise RangeError(f"window around {(r0, s0)} with m={m} leaves the index triangle")
    w = 2 * m + 1
    vals = np.empty((w, w))
    for b in range(-m, m + 1):
        s = s0 + b
        if s not in p.rows:
            raise RangeError(f"level {s} not computed")
        vals[:, b + m] = p.rows[s][r0 - m - 1 : r0 + m]
    centre = vals[m, m]
    vals = math.sqrt(ell) * (vals - centre) / p.unit
    vals[m, m] = 0.0
    return Patch((r0, s0), m, vals, float(ell))


def interlacing_gap_array(patch) -> np.ndarray:
    """Two families of interlacing gaps in a patch, shape ``(2, 2m, 2m)``.

    Channel 0: ``lambda_{r,s} - lambda_{r+1,s+1}``; channel 1:
    ``lambda_{r,s+1} - lambda_{r,s}``.  Both are nonnegative by interlacing.
    """
    v = patch.values if isinstance(patch, Patch) else np.asarray(patch, dtype=float)
    if v.shape[0] < 2:
        raise RangeError("patch width must be at least 1")
    down = v[:-1, :-1] - v[1:, 1:]
    up = v[:-1, 1:] - v[:-1, :-1]
    return np.stack([down, up])


def rigidity_report(samples, multiplier: float = 1.0, log_power: float = 1.0, scale: float = 1.0):
    """Per-index fluctuation summary against the rigidity envelope.

    Spectra are expected in the normalization with bulk spacings of order
    ``scale``.  The envelope at index i is
    ``multiplier * n^{1/3} min(i, n-i+1)^{-1/3} (log n)^log_power``.
    """
    arr = np.array([np.asarray(s, dtype=float) for s in samples])
    if arr.ndim != 2 or arr.shape[0] < 30:
        raise StatisticsError("rigidity_report needs at least 30 spectra of a common size")
    n = arr.shape[1]
    dev = np.abs(arr - arr.mean(axis=0)) / scale
    i = np.arange(1, n + 1)
    envelope = multiplier * n ** (1 / 3) * np.minimum(i, n - i + 1) ** (-1 / 3) * math.log(max(n, 2)) ** log_power
    worst = dev.max(axis=0)
    return {
        "n": n,
        "samples": arr.shape[0],
        "std": arr.std(axis=0) / scale,
        "mean_abs_deviation": dev.mean(axis=0),
        "max_deviation": worst,
        "envelope": envelope,
        "flagged": [int(k) for k in i[worst > envelope]],
    }
