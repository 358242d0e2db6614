"""Gelfand-Tsetlin patterns, hives and discrete concavity.

Hives live on the lattice triangle ``T_n = {(i, j) : 0 <= i <= j <= n}``
stored in an ``(n+1) x (n+1)`` array with NaN outside ``T_n``.  The three
rhombus types are indexed by their lower-left vertex ``v``:

* type 0: ``f(v) - f(v+(1,0)) - f(v+(1,1)) + f(v+(2,1))``
* type 1: ``-f(v) + f(v+(1,0)) + f(v+(0,1)) - f(v+(1,1))``
* type 2: ``f(v) - f(v+(1,1)) - f(v+(0,1)) + f(v+(1,2))``

A hive is a function whose three Hessians are all nonpositive.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass

import numpy as np

from .errors import PreconditionError, RangeError, ValidationError
from .randmat import MinorProcess, rng_for

__all__ = [
    "GTPattern",
    "Hive",
    "HESSIAN_STENCILS",
    "in_triangle",
    "discrete_hessian",
    "hessian_cells",
    "is_rhombus_concave",
    "gt_from_minors",
    "default_large_gaps",
    "check_large_gaps",
    "hive_from_gt",
    "majorization_check",
    "weyl_check",
    "vandermonde",
    "gt_polytope_volume_mc",
]

# offset, coefficient pairs for each rhombus type
HESSIAN_STENCILS = {
    0: (((0, 0), 1), ((1, 0), -1), ((1, 1), -1), ((2, 1), 1)),
    1: (((0, 0), -1), ((1, 0), 1), ((0, 1), 1), ((1, 1), -1)),
    2: (((0, 0), 1), ((1, 1), -1), ((0, 1), -1), ((1, 2), 1)),
}


@dataclass(frozen=True)
class GTPattern:
    """Interlacing triangular array; ``rows[k-1]`` has length k."""

    rows: tuple

    @property
    def n(self) -> int:
        return len(self.rows)

    @property
    def top(self) -> np.ndarray:
        return self.rows[-1]

    def entry(self, j: int, k: int) -> float:
        return float(self.rows[k - 1][j - 1])

    def diagonal(self) -> np.ndarray:
        """The vector a with ``a_1 + ... + a_k`` equal to the k-th row sum."""
        sums = np.array([r.sum() for r in self.rows])
        return np.diff(np.concatenate([[0.0], sums]))

    def to_json(self) -> str:
        return json.dumps([list(map(float, r)) for r in self.rows])

    @classmethod
    def from_json(cls, text: str) -> "GTPattern":
        return cls(tuple(np.array(r, dtype=float) for r in json.loads(text)))


@dataclass(frozen=True)
class Hive:
    n: int
    values: np.ndarray

    def __call__(self, i: int, j: int) -> float:
        if not in_triangle(i, j, self.n):
            raise RangeError(f"({i},{j}) outside T_{self.n}")
        return float(self.values[i, j])

    def boundary(self):
        """Increments along the three sides: (lambda, mu, nu)."""
        h = self.values
        n = self.n
        lam = np.diff([h[0, j] for j in range(n + 1)])
        mu = np.diff([h[i, n] for i in range(n + 1)])
        nu = np.diff([h[i, i] for i in range(n + 1)])
        return lam, mu, nu

    def to_csv(self) -> str:
        lines = []
        for i in range(self.n + 1):
            lines.append(",".join("" if j < i else repr(float(self.values[i, j])) for j in range(self.n + 1)))
        return "\n".join(lines) + "\n"


def in_triangle(i: int, j: int, n: int) -> bool:
    return 0 <= i <= j <= n


def _lookup(f, p, n):
    if callable(f):
        return f(*p)
    if not in_triangle(p[0], p[1], n):
        raise RangeError(f"vertex {p} outside T_{n}")
    return f[p]


def discrete_hessian(f, kind: int, v, n: int | None = None) -> float:
    """Signed four-point sum of rhombus type ``kind`` anchored at ``v``.

    ``f`` is either a callable ``f(x, y)`` (no domain check unless ``n`` is
    given) or an array indexed ``f[i, j]`` on ``T_n``.
    """
    if kind not in HESSIAN_STENCILS:
        raise RangeError(f"unknown rhombus type {kind}")
    if n is None and not callable(f):
        n = np.asarray(f).shape[0] - 1
    total = 0.0
    for (dx, dy), c in HESSIAN_STENCILS[kind]:
        p = (v[0] + dx, v[1] + dy)
        if n is not None and not in_triangle(p[0], p[1], n):
            raise RangeError(f"vertex {p} outside T_{n}")
        total += c * _lookup(f, p, n)
    return total


def hessian_cells(n: int, kind: int):
    """Anchors of every rhombus of the given type contained in ``T_n``."""
    out = []
    offs = [o for o, _ in HESSIAN_STENCILS[kind]]
    for i in range(n + 1):
        for j in range(i, n + 1):
            if all(in_triangle(i + dx, j + dy, n) for dx, dy in offs):
                out.append((i, j))
    return out


def _hessian_arrays(h: np.ndarray):
    """All Hessians of an array on T_n at once, NaN where undefined."""
    out = {}
    n = h.shape[0] - 1
    pad = np.full((n + 4, n + 4), np.nan)
    pad[: n + 1, : n + 1] = h
    for kind, stencil in HESSIAN_STENCILS.items():
        acc = np.zeros((n + 1, n + 1))
        for (dx, dy), c in stencil:
            acc = acc + c * pad[dx : dx + n + 1, dy : dy + n + 1]
        out[kind] = acc
    return out


def is_rhombus_concave(f, tol: float | None = None):
    """Return ``(ok, violation)``; violation is ``(kind, anchor, value)`` or None."""
    h = f.values if isinstance(f, Hive) else np.asarray(f, dtype=float)
    n = h.shape[0] - 1
    mask = np.zeros_like(h, dtype=bool)
    for i in range(n + 1):
        mask[i, i:] = True
    h = np.where(mask, h, np.nan)
    if tol is None:
        scale = np.nanmax(np.abs(h)) if n >= 0 else 1.0
        tol = 1e-9 * max(1.0, float(scale))
    worst = None
    for kind, acc in _hessian_arrays(h).items():
        vals = np.where(np.isnan(acc), -np.inf, acc)
        idx = np.unravel_index(np.argmax(vals), vals.shape)
        if vals[idx] > tol and (worst is None or vals[idx] > worst[2]):
            worst = (kind, (int(idx[0]), int(idx[1])), float(vals[idx]))
    return worst is None, worst


def gt_from_minors(p: MinorProcess, tol: float = 1e-8) -> GTPattern:
    if not p.is_complete():
        raise ValidationError("minor process is missing levels")
    bad = p.interlacing_violations(tol)
    if bad:
        raise ValidationError(f"interlacing violated at {bad[:5]}")
    return GTPattern(tuple(np.array(p.rows[k], dtype=float) for k in range(1, p.n + 1)))


def default_large_gaps(*spectra) -> np.ndarray:
    """``Lambda_i = (n - i + 1) G`` with ``G = 2 (total spread) + 1``."""
    n = len(spectra[0])
    spread = sum(float(np.max(s) - np.min(s)) for s in spectra)
    g = 2.0 * spread + 1.0
    return g * np.arange(n, 0, -1, dtype=float)


def check_large_gaps(lam_offset, spectrum) -> bool:
    lam_offset = np.asarray(lam_offset, dtype=float)
    s = np.asarray(spectrum, dtype=float)
    if lam_offset.size < 2:
        return True
    return float(np.min(lam_offset[:-1] - lam_offset[1:])) > float(s.max() - s.min())


def hive_from_gt(g: GTPattern, lam_offset=None, check: bool = True) -> Hive:
    """``h(i, j) = Lambda_1 + ... + Lambda_j + lambda_{1,j} + ... + lambda_{i,j}``."""
    n = g.n
    if lam_offset is None:
        lam_offset = default_large_gaps(g.top)
    lam_offset = np.asarray(lam_offset, dtype=float)
    if lam_offset.size != n:
        raise PreconditionError("offset tuple has the wrong length")
    if check and not check_large_gaps(lam_offset, g.top):
        raise PreconditionError("offset tuple does not have large gaps")
    prefix = np.concatenate([[0.0], np.cumsum(lam_offset)])
    h = np.full((n + 1, n + 1), np.nan)
    h[0, 0] = 0.0
    for j in range(1, n + 1):
        h[0, j] = prefix[j]
        h[1 : j + 1, j] = prefix[j] + np.cumsum(g.rows[j - 1])
    return Hive(n, h)


def majorization_check(a, lam, tol: float = 1e-9) -> bool:
    a = np.sort(np.asarray(a, dtype=float))[::-1]
    lam = np.sort(np.asarray(lam, dtype=float))[::-1]
    if a.shape != lam.shape:
        raise ValidationError("length mismatch")
    scale = tol * max(1.0, float(np.max(np.abs(lam))) * lam.size)
    if abs(a.sum() - lam.sum()) > scale:
        return False
    return bool(np.all(np.cumsum(a) <= np.cumsum(lam) + scale))


def weyl_check(lam, mu, nu, tol: float = 1e-9):
    """Return ``(ok, violations)`` for ``nu_{i+j-1} <= lam_i + mu_j``."""
    lam, mu, nu = (np.sort(np.asarray(x, dtype=float))[::-1] for x in (lam, mu, nu))
    n = lam.size
    scale = tol * max(1.0, float(np.max(np.abs(np.concatenate([lam, mu, nu])))) * n)
    if abs(lam.sum() + mu.sum() - nu.sum()) > scale:
        raise ValidationError("trace condition fails")
    bad = []
    for i in range(1, n + 1):
        for j in range(1, n + 2 - i):
            if nu[i + j - 2] > lam[i - 1] + mu[j - 1] + scale:
                bad.append((i, j))
    return not bad, bad


def vandermonde(lam) -> float:
    lam = np.asarray(lam, dtype=float)
    out = 1.0
    for i, j in itertools.combinations(range(lam.size), 2):
        out *= lam[i] - lam[j]
    return float(abs(out)) if out != 0 else 0.0


def gt_polytope_volume_mc(lam, trials: int = 20000, seed: int = 0):
    """Sequential importance estimate of the volume of GT patterns with top row lam.

    Each lower row is drawn uniformly from the box its interlacing intervals
    define, and the sample is weighted by the product of the box volumes.
    Returns ``(estimate, standard_error)``.
    """
    lam = np.sort(np.asarray(lam, dtype=float))[::-1]
    n = lam.size
    if np.any(np.diff(lam) == 0):
        raise ValidationError("degenerate spectrum")
    rng = rng_for(seed, 0)
    rows = np.broadcast_to(lam, (trials, n)).copy()
    weight = np.ones(trials)
    for k in range(n - 1, 0, -1):
        hi, lo = rows[:, :k], rows[:, 1 : k + 1]
        width = hi - lo
        weight *= np.prod(width, axis=1)
        rows = lo + width * rng.random((trials, k))
    est = float(weight.mean())
    se = float(weight.std(ddof=1) / np.sqrt(trials)) if trials > 1 else float("nan")
    return est, se
