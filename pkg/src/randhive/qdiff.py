"""Calderon-Zygmund style decomposition of Lipschitz functions on the unit square.

A function is sampled at cell centres of a ``2^(k+2)``-per-side grid, so
a level-k dyadic cube holds 16 samples.  Starting from a root cube, a
cube is GOOD when its mean-square deviation from the least-squares
affine fit ``L_Q`` is at most ``C_HAT * eps^4 * side^2``; otherwise it is
cut into four children, and cubes that reach level k are BAD.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ParameterError, ValidationError
from .randmat import rng_for

DIM = 2
# Largest power of two with R2 >= C_HAT * S^4 on the whole calibration corpus
# (R2: mean-square residual / side^2, S: sup residual / side); see
# calibrate_c_hat and scripts/calibrate_c_hat.py.
C_HAT = 2.0**-4


@dataclass(frozen=True, order=True)
class DyadicCube:
    level: int
    index: tuple

    @property
    def side(self) -> float:
        return 2.0**-self.level

    @property
    def volume(self) -> float:
        return self.side**DIM

    @property
    def lower(self):
        return tuple(i * self.side for i in self.index)

    def children(self):
        i, j = self.index
        return [DyadicCube(self.level + 1, (2 * i + a, 2 * j + b)) for a in (0, 1) for b in (0, 1)]

    def parent(self):
        if self.level == 0:
            return None
        return DyadicCube(self.level - 1, (self.index[0] // 2, self.index[1] // 2))

    def contains(self, other: "DyadicCube") -> bool:
        if other.level < self.level:
            return False
        s = other.level - self.level
        return (other.index[0] >> s, other.index[1] >> s) == self.index


class SampledFunction:
    """Samples of F at cell centres of a ``res x res`` grid on a root cube."""

    def __init__(self, values, root: DyadicCube = DyadicCube(0, (0, 0))):
        self.values = np.asarray(values, dtype=float)
        res = self.values.shape[0]
        if self.values.shape != (res, res) or res & (res - 1):
            raise ParameterError("samples must form a square grid with a power-of-two side")
        self.res = res
        self.root = root
        self.h = root.side / res
        x0, y0 = root.lower
        c = (np.arange(res) + 0.5) * self.h
        self.x, self.y = np.meshgrid(x0 + c, y0 + c, indexing="ij")

    @classmethod
    def from_callable(cls, fn, k: int, root: DyadicCube = DyadicCube(0, (0, 0))):
        res = 2 ** (k + 2 - root.level)
        if res < 1:
            raise ParameterError("k is below the root level")
        x0, y0 = root.lower
        h = root.side / res
        c = (np.arange(res) + 0.5) * h
        x, y = np.meshgrid(x0 + c, y0 + c, indexing="ij")
        return cls(np.asarray(fn(x, y), dtype=float) * np.ones_like(x), root)

    def block(self, cube: DyadicCube):
        if not self.root.contains(cube):
            raise ParameterError(f"{cube} is not inside the root {self.root}")
        s = cube.level - self.root.level
        n = self.res >> s
        if n < 1:
            raise ParameterError(f"{cube} is finer than the sampling grid")
        i0 = (cube.index[0] - (self.root.index[0] << s)) * n
        j0 = (cube.index[1] - (self.root.index[1] << s)) * n
        sl = (slice(i0, i0 + n), slice(j0, j0 + n))
        return self.x[sl], self.y[sl], self.values[sl]

    def lipschitz_violation(self, bound: float = 1.0, tol: float = 1e-9) -> float:
        """Largest excess of |F(p) - F(q)| / |p - q| over ``bound`` on neighbouring samples."""
        v, h = self.values, self.h
        worst = 0.0
        for d, dist in ((np.abs(v[1:, :] - v[:-1, :]), h), (np.abs(v[:, 1:] - v[:, :-1]), h),
                        (np.abs(v[1:, 1:] - v[:-1, :-1]), h * math.sqrt(2)), (np.abs(v[1:, :-1] - v[:-1, 1:]), h * math.sqrt(2))):
            if d.size:
                worst = max(worst, float(d.max()) / dist - bound)
        return worst if worst > tol else 0.0


def best_l2_linear(F: SampledFunction, cube: DyadicCube):
    """Least-squares affine fit ``(c0, cx, cy)`` of the samples inside ``cube``."""
    x, y, v = F.block(cube)
    if v.size < DIM + 1:
        raise ParameterError("too few samples in the cube for an affine fit")
    a = np.column_stack([np.ones(v.size), x.ravel(), y.ravel()])
    if np.linalg.matrix_rank(a) < DIM + 1:
        raise ParameterError("sample points are affinely dependent")
    coef, *_ = np.linalg.lstsq(a, v.ravel(), rcond=None)
    return tuple(float(c) for c in coef)


def _residual(F, cube, coef):
    x, y, v = F.block(cube)
    return v - (coef[0] + coef[1] * x + coef[2] * y)


@dataclass
class CZResult:
    good: list
    bad: list
    params: dict
    root: DyadicCube = DyadicCube(0, (0, 0))
    trace: list = field(default_factory=list, repr=False)

    def to_json(self) -> str:
        return json.dumps(
            {
                "params": self.params,
                "root": [self.root.level, list(self.root.index)],
                "good": [{"level": q.level, "index": list(q.index), "fit": list(c)} for q, c in self.good],
                "bad": [{"level": q.level, "index": list(q.index)} for q in self.bad],
            },
            indent=1,
        )

    @property
    def bad_volume(self) -> float:
        return sum(q.volume for q in self.bad)


def precondition_product(eps: float, eta: float, k: int) -> float:
    return eps ** (DIM + 2) * eta * k


def cz_decompose(F, eps: float, eta: float, k: int, c_sharp: float = 1.0, c_hat: float = C_HAT,
                 root: DyadicCube = DyadicCube(0, (0, 0)), lipschitz: float = 1.0) -> CZResult:
    """Dyadic GOOD/BAD decomposition of ``F`` below ``root``.

    ``F`` is a :class:`SampledFunction` or a vectorized callable ``F(x, y)``.
    """
    if not (0 < eps and 0 < eta and k >= root.level):
        raise ParameterError("need eps > 0, eta > 0 and k >= root level")
    prod = precondition_product(eps, eta, k)
    if prod < c_sharp:
        raise ParameterError(f"precondition fails: eps^{DIM + 2} * eta * k = {prod:.4g} < {c_sharp}")
    if callable(F):
        F = SampledFunction.from_callable(F, k, root)
    if F.root != root:
        raise ParameterError("samples were taken on a different root cube")
    if F.res < 4 * 2 ** (k - root.level):
        raise ParameterError("sampling grid too coarse for level k")
    excess = F.lipschitz_violation(lipschitz)
    if excess > 0:
        raise ValidationError(f"samples exceed the Lipschitz bound by {excess:.3g}")
    threshold = c_hat * eps ** (DIM + 2)
    good, bad, trace = [], [], []
    stack = [root]
    while stack:
        q = stack.pop()
        coef = best_l2_linear(F, q)
        r2 = float(np.mean(_residual(F, q, coef) ** 2)) / q.side**2
        trace.append((q, r2))
        if r2 <= threshold:
            good.append((q, coef))
        elif q.level >= k:
            bad.append(q)
        else:
            stack.extend(reversed(q.children()))
    good.sort(key=lambda t: t[0])
    bad.sort()
    params = {"eps": eps, "eta": eta, "k": k, "c_hat": c_hat, "c_sharp": c_sharp, "precondition": prod}
    return CZResult(good, bad, params, root, trace)


def verify_cz(F, result: CZResult) -> dict:
    """Check the sup bound on GOOD cubes, the BAD volume and exact coverage."""
    p = result.params
    if callable(F):
        F = SampledFunction.from_callable(F, p["k"], result.root)
    eps, eta = p["eps"], p["eta"]
    sup_violations = []
    for q, coef in result.good:
        worst = float(np.max(np.abs(_residual(F, q, coef))))
        if worst > eps * q.side + 1e-12:
            sup_violations.append({"cube": [q.level, list(q.index)], "sup": worst, "bound": eps * q.side})
    cubes = [q for q, _ in result.good] + list(result.bad)
    cover = np.zeros((F.res, F.res), dtype=int)
    for q in cubes:
        s = q.level - result.root.level
        n = F.res >> s
        i0 = (q.index[0] - (result.root.index[0] << s)) * n
        j0 = (q.index[1] - (result.root.index[1] << s)) * n
        cover[i0 : i0 + n, j0 : j0 + n] += 1
    volume = sum(q.volume for q in cubes)
    bad_level_ok = all(q.level == p["k"] for q in result.bad)
    return {
        "sup_violations": sup_violations,
        "bad_volume": result.bad_volume,
        "bad_volume_ok": result.bad_volume <= eta * result.root.volume + 1e-15,
        "partition_exact": bool(np.all(cover == 1)) and abs(volume - result.root.volume) < 1e-12,
        "bad_at_level_k": bad_level_ok,
        "ok": not sup_violations and result.bad_volume <= eta * result.root.volume + 1e-15 and bool(np.all(cover == 1)) and bad_level_ok,
    }


# ---------------------------------------------------------------------------
# test functions and calibration


def random_lipschitz(rng, kind: str | None = None):
    """A random 1-Lipschitz function on the plane (vectorized callable)."""
    kinds = ("cones", "waves", "distance", "tent")
    kind = kind or kinds[int(rng.integers(len(kinds)))]
    if kind == "cones":
        pts = rng.random((int(rng.integers(1, 8)), 2))
        hts = rng.random(len(pts)) * 0.5
        sgn = rng.choice([-1.0, 1.0])

        def f(x, y):
            d = np.min([h + np.hypot(x - p[0], y - p[1]) for p, h in zip(pts, hts)], axis=0)
            return sgn * d

        return f
    if kind == "waves":
        m = int(rng.integers(1, 5))
        freq = rng.normal(size=(m, 2)) * 6.0
        amp = rng.random(m)
        phase = rng.random(m) * 2 * np.pi
        lip = float(np.sum(amp * np.hypot(freq[:, 0], freq[:, 1])))
        scale = 1.0 / max(lip, 1e-12)

        def f(x, y):
            return scale * sum(a * np.sin(fx * x + fy * y + ph) for a, (fx, fy), ph in zip(amp, freq, phase))

        return f
    if kind == "distance":
        pts = cantor_points(int(rng.integers(2, 5)), rng)
        small = 0.2 + 0.8 * rng.random()

        def f(x, y):
            d = np.full(np.shape(x), np.inf)
            for p in pts:
                d = np.minimum(d, np.hypot(x - p[0], y - p[1]))
            return small * d

        return f
    a = rng.normal(size=2)
    a = a / max(np.hypot(*a), 1.0) * rng.random()
    c = rng.random(2)

    def f(x, y):
        return np.minimum(a[0] * (x - c[0]) + a[1] * (y - c[1]), np.abs(x - c[0]) * 0.5)

    return f


def cantor_points(depth: int, rng):
    """Corners of a random Cantor-like dust in the unit square."""
    squares = [(0.0, 0.0, 1.0)]
    for _ in range(depth):
        nxt = []
        for x, y, s in squares:
            t = s / 3.0
            for a, b in ((0, 0), (2, 0), (0, 2), (2, 2)):
                if rng.random() < 0.8:
                    nxt.append((x + a * t, y + b * t, t))
        squares = nxt or squares
    return [(x + s / 2, y + s / 2) for x, y, s in squares]


def calibrate_c_hat(corpus: int = 10_000, seed: int = 0, resolutions=(16, 32, 64, 128)):
    """Largest power of two ``c`` with ``R2 >= c * S^4`` on a random corpus.

    Each corpus member is a random 1-Lipschitz function restricted to a
    random dyadic cube of side 2^-l (l in 0..4) and sampled with a random
    number of points per side, as cubes at different depths are.
    """
    rng = rng_for(seed, 7)
    worst = math.inf
    for _ in range(corpus):
        fn = random_lipschitz(rng)
        level = int(rng.integers(0, 5))
        idx = tuple(int(i) for i in rng.integers(0, 2**level, size=2))
        q = DyadicCube(level, idx)
        res = int(resolutions[int(rng.integers(len(resolutions)))])
        h = q.side / res
        c = (np.arange(res) + 0.5) * h
        x, y = np.meshgrid(q.lower[0] + c, q.lower[1] + c, indexing="ij")
        F = SampledFunction(np.asarray(fn(x, y), dtype=float) * np.ones_like(x), q)
        coef = best_l2_linear(F, q)
        res_ = _residual(F, q, coef)
        s = float(np.max(np.abs(res_))) / q.side
        if s < 1e-9:
            continue
        r2 = float(np.mean(res_**2)) / q.side**2
        worst = min(worst, r2 / s**4)
    return 2.0 ** math.floor(math.log2(worst)), worst
