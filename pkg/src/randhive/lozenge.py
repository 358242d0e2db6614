"""Excavation hexagons, lozenge tilings and the augmented-hive value.

Coordinates are those of the square ``{0..n}^2``.  The anti-diagonal
``i + j = n`` splits it into the upper part U (``i + j >= n``) and the
lower part U' (``i + j <= n``); the hexagon's stretch of anti-diagonal is
its equator.

Weight field.  Two GT patterns feed the field ``kt`` on the square:

* on U' the pattern of lambda gives ``kt(i, j) = h_lam(j, n - i)``;
* on U the pattern of mu gives ``kt(i, j) = h_mu(i + j - n, j)``.

Here ``h_lam`` uses the large-gap offset ``Lam`` and ``h_mu`` the offset
``Lam + diag(lam)``, so the two hives agree on the equator and ``kt`` is
a single function.  With this placement the lozenge and border-triangle
weights reduce to the usual GT differences (see :func:`lozenge_weight`).
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property, lru_cache

import numpy as np

from .errors import CapacityError, InfeasibleError, RangeError, ValidationError
from .hive import GTPattern, default_large_gaps
from .lattice import (
    edge_ends,
    edge_triangles,
    solve_difference_lp,
    triangle_edges,
    triangle_vertices,
)

__all__ = [
    "ExcavationHexagon",
    "Lozenge",
    "Tiling",
    "WeightField",
    "Band",
    "excavation_hexagon",
    "build_weight_field",
    "lozenge_weight",
    "triangle_weight",
    "hexagon_weight",
    "hexagon_weight_alt",
    "standard_tiling",
    "tiling_weight",
    "tiling_coefficients",
    "enumerate_tilings",
    "count_tilings",
    "max_weight_tiling",
    "hive_value",
    "lambda_offset",
    "augmented_hive_value",
    "octahedron_recurrence",
    "octahedron_from_field",
]

EDGE_TO_KIND = {"D": "iii", "V": "i", "H": "ii"}
COLORS = {
    "up": {"i": "blue", "ii": "red", "iii": "green"},
    "lo": {"i": "red", "ii": "blue", "iii": "green"},
}


# ---------------------------------------------------------------------------
# geometry


@dataclass(frozen=True)
class ExcavationHexagon:
    n: int
    v: tuple
    corners: tuple  # A, B, C, D, E, F

    @property
    def A(self):
        return self.corners[0]

    @property
    def O(self):
        """Intersection of the diagonal BE with the equator."""
        return (self.n - self.v[1], self.v[1])

    @cached_property
    def bounds(self):
        a, b, _, d, e, _ = self.corners
        return a[0], d[0], d[1], a[1], b[0] + b[1], e[0] + e[1]

    def contains(self, p) -> bool:
        x0, x1, y0, y1, s0, s1 = self.bounds
        x, y = p
        return x0 <= x <= x1 and y0 <= y <= y1 and s0 <= x + y <= s1

    @cached_property
    def points(self):
        x0, x1, y0, y1, _, _ = self.bounds
        return [(x, y) for y in range(y0, y1 + 1) for x in range(x0, x1 + 1) if self.contains((x, y))]

    @cached_property
    def triangles(self):
        x0, x1, y0, y1, _, _ = self.bounds
        out = []
        for b in range(y0, y1):
            for a in range(x0 - 1, x1 + 1):
                for kind in ("L", "R"):
                    t = (kind, a, b)
                    if all(self.contains(p) for p in triangle_vertices(t)):
                        out.append(t)
        return out

    def side(self, t) -> str:
        kind, a, b = t
        return "up" if a + b + (0 if kind == "L" else 1) >= self.n else "lo"

    @property
    def equator_range(self):
        return range(self.A[0], self.corners[3][0])

    def equator_edge(self, k):
        return ("D", k, self.n - 1 - k)

    def is_equator_edge(self, e) -> bool:
        return e[0] == "D" and e[1] + e[2] + 1 == self.n and self.A[0] <= e[1] < self.corners[3][0]

    @cached_property
    def area(self) -> int:
        """Area in lozenges (pairs of unit triangles)."""
        return len(self.triangles) // 2

    @cached_property
    def part_points(self):
        up = [p for p in self.points if p[0] + p[1] >= self.n]
        lo = [p for p in self.points if p[0] + p[1] <= self.n]
        return {"up": up, "lo": lo}

    @cached_property
    def part_edges(self):
        """Edges of each trapezoid, flagged as boundary or interior.

        Returns ``{side: [(edge, status)]}`` with status in
        ``{"interior", "boundary", "equator"}``; equator edges are listed
        in both parts.
        """
        tris = set(self.triangles)
        out = {"up": [], "lo": []}
        seen = set()
        for t in self.triangles:
            for e in triangle_edges(t):
                if (e, self.side(t)) in seen:
                    continue
                seen.add((e, self.side(t)))
                if self.is_equator_edge(e):
                    status = "equator"
                else:
                    inside = sum(1 for s in edge_triangles(e) if s in tris)
                    status = "interior" if inside == 2 else "boundary"
                out[self.side(t)].append((e, status))
        return out


def excavation_hexagon(v, n: int) -> ExcavationHexagon:
    i, j = v
    if not (0 < i < n and 0 < j < n):
        raise RangeError(f"vertex {v} is not interior to the square of side {n}")
    if i <= j:
        corners = ((0, n), (0, j), (i, j - i), (n + i - j, j - i), (n + i - j, j), (i, n))
    else:
        corners = ((i - j, n + j - i), (i - j, j), (i, 0), (n, 0), (n, j), (i, n + j - i))
    return ExcavationHexagon(n, (i, j), corners)


# ---------------------------------------------------------------------------
# tiles


@dataclass(frozen=True, order=True)
class Lozenge:
    kind: str  # "i", "ii" or "iii"
    anchor: tuple
    side: str = "lo"

    @property
    def vertices(self):
        i, j = self.anchor
        if self.kind == "i":
            return (i, j), (i + 1, j - 1), (i + 2, j - 1), (i + 1, j)
        if self.kind == "ii":
            return (i, j), (i, j + 1), (i - 1, j + 2), (i - 1, j + 1)
        return (i, j), (i + 1, j), (i + 1, j + 1), (i, j + 1)

    @property
    def color(self) -> str:
        return COLORS[self.side][self.kind]

    @property
    def edge(self):
        """Short diagonal, as a lattice edge."""
        i, j = self.anchor
        if self.kind == "iii":
            return ("D", i, j)
        if self.kind == "i":
            return ("V", i + 1, j - 1)
        return ("H", i - 1, j + 1)

    @classmethod
    def from_edge(cls, e, side: str) -> "Lozenge":
        kind, a, b = e
        if kind == "D":
            return cls("iii", (a, b), side)
        if kind == "V":
            return cls("i", (a - 1, b + 1), side)
        return cls("ii", (a + 1, b - 1), side)


@dataclass(frozen=True)
class Tiling:
    """Lozenges plus one border triangle per equator edge.

    ``border`` maps equator index k to ``"up"`` (triangle in U) or
    ``"down"`` (triangle in U').
    """

    lozenges: frozenset
    border: tuple  # sorted (k, "up"/"down") pairs

    def crossed_edges(self, hexagon: ExcavationHexagon):
        up, lo = set(), set()
        for z in self.lozenges:
            (up if z.side == "up" else lo).add(z.edge)
        for k, which in self.border:
            (up if which == "up" else lo).add(hexagon.equator_edge(k))
        return up, lo

    def to_json(self):
        return {
            "lozenges": [{"kind": z.kind, "anchor": list(z.anchor), "side": z.side, "color": z.color} for z in sorted(self.lozenges)],
            "border": [[k, w] for k, w in self.border],
        }


def tiling_from_choice(hexagon: ExcavationHexagon, choice) -> Tiling:
    """Assemble a tiling from a map triangle -> crossed edge, validating it."""
    tris = set(hexagon.triangles)
    if set(choice) != tris:
        raise ValidationError("choice does not cover the hexagon")
    lozenges = set()
    border = {}
    for t, e in choice.items():
        if e not in triangle_edges(t):
            raise ValidationError(f"{e} is not an edge of {t}")
        if hexagon.is_equator_edge(e):
            k = e[1]
            which = "up" if t[0] == "R" else "down"
            if k in border:
                raise ValidationError(f"equator edge {k} has two border triangles")
            border[k] = which
            continue
        partner = [s for s in edge_triangles(e) if s != t][0]
        if partner not in tris or choice[partner] != e:
            raise ValidationError(f"triangle {t} is not matched across {e}")
        lozenges.add(Lozenge.from_edge(e, hexagon.side(t)))
    if set(border) != set(hexagon.equator_range):
        raise ValidationError("some equator edge has no border triangle")
    return Tiling(frozenset(lozenges), tuple(sorted(border.items())))


def validate_tiling(hexagon: ExcavationHexagon, tiling: Tiling) -> None:
    covered = {}
    for z in tiling.lozenges:
        for t in edge_triangles(z.edge):
            if t in covered:
                raise ValidationError(f"triangle {t} covered twice")
            if hexagon.side(t) != z.side:
                raise ValidationError(f"lozenge {z} has the wrong side label")
            covered[t] = z.edge
    for k, which in tiling.border:
        t = ("R" if which == "up" else "L", k, hexagon.n - 1 - k)
        if t in covered:
            raise ValidationError(f"triangle {t} covered twice")
        covered[t] = hexagon.equator_edge(k)
    tiling_from_choice(hexagon, covered)


# ---------------------------------------------------------------------------
# weights


@dataclass
class WeightField:
    """The field ``kt`` on ``{0..n}^2`` plus the data it was built from."""

    n: int
    kt: np.ndarray
    lam: GTPattern | None = None
    mu: GTPattern | None = None
    offset: np.ndarray | None = None

    def __call__(self, p) -> float:
        return float(self.kt[p[0], p[1]])


def _hive_prefix(rows, offset):
    """Array ``h[p, q]`` of the GT hive, 0 <= p <= q <= n."""
    n = len(rows)
    prefix = np.concatenate([[0.0], np.cumsum(offset)])
    h = np.full((n + 1, n + 1), np.nan)
    h[0, :] = prefix
    for q in range(1, n + 1):
        h[1 : q + 1, q] = prefix[q] + np.cumsum(rows[q - 1])
    return h


def build_weight_field(mu: GTPattern, lam: GTPattern, offset=None) -> WeightField:
    """Weight field from the upper (mu) and lower (lambda) GT patterns."""
    if mu.n != lam.n:
        raise ValidationError("GT patterns of different sizes")
    n = lam.n
    if offset is None:
        offset = default_large_gaps(lam.top, mu.top)
    offset = np.asarray(offset, dtype=float)
    h_lam = _hive_prefix(lam.rows, offset)
    h_mu = _hive_prefix(mu.rows, offset + lam.diagonal())
    kt = np.empty((n + 1, n + 1))
    for i in range(n + 1):
        for j in range(n + 1):
            kt[i, j] = h_lam[j, n - i] if i + j <= n else h_mu[i + j - n, j]
    return WeightField(n, kt, lam, mu, offset)


def lozenge_weight(z: Lozenge, w: WeightField, hexagon: ExcavationHexagon | None = None) -> float:
    """``(kt(A) + kt(C) - kt(B) - kt(D)) / 3`` with B, D the obtuse corners."""
    if hexagon is not None:
        for t in edge_triangles(z.edge):
            if t not in set(hexagon.triangles):
                raise RangeError(f"lozenge {z} leaves the hexagon")
    a, b, c, d = z.vertices
    k = w.kt
    return (k[a] + k[c] - k[b] - k[d]) / 3.0


def triangle_weight(which: str, k: int, w: WeightField) -> float:
    """Border triangle at equator index k: ``(kt(B) - kt(A)) / 3``."""
    n = w.n
    if not 0 <= k < n:
        raise RangeError(f"equator index {k} outside [0, {n})")
    a = (k, n - k)
    if which == "up":
        b = (k + 1, n - k)
    elif which == "down":
        b = (k, n - k - 1)
    else:
        raise ValidationError(f"not a border triangle: {which!r}")
    return (w.kt[b] - w.kt[a]) / 3.0


def hexagon_weight(hexagon: ExcavationHexagon, w: WeightField) -> float:
    _, b, c, d, e, f = hexagon.corners
    k = w.kt
    return (k[b] + k[c] - k[d] + k[e] + k[f]) / 3.0


def hexagon_weight_alt(hexagon: ExcavationHexagon, w: WeightField) -> float:
    a, b, _, _, _, f = hexagon.corners
    k = w.kt
    return (-k[a] + 2.0 * k[b] + 2.0 * k[f]) / 3.0


def tiling_weight(tiling: Tiling, w: WeightField, hexagon: ExcavationHexagon, form: str = "primal", validate: bool = True) -> float:
    if validate:
        validate_tiling(hexagon, tiling)
    tri = sum(triangle_weight(which, k, w) for k, which in tiling.border)
    if form == "primal":
        return sum(lozenge_weight(z, w) for z in tiling.lozenges) + tri + hexagon_weight(hexagon, w)
    if form == "red-avoiding":
        factor = {"blue": 2.0, "green": 1.0, "red": 0.0}
        loz = sum(factor[z.color] * lozenge_weight(z, w) for z in tiling.lozenges if z.color != "red")
        return loz + tri + hexagon_weight_alt(hexagon, w)
    raise ValidationError(f"unknown weight form {form!r}")


def tiling_coefficients(tiling: Tiling, hexagon: ExcavationHexagon):
    """Exact coefficients c with ``primal weight = sum_p c[p] kt(p)``."""
    coef = {}

    def add(p, c):
        coef[p] = coef.get(p, Fraction(0)) + Fraction(c, 3)

    for z in tiling.lozenges:
        a, b, c, d = z.vertices
        add(a, 1), add(c, 1), add(b, -1), add(d, -1)
    n = hexagon.n
    for k, which in tiling.border:
        add((k, n - k), -1)
        add((k + 1, n - k) if which == "up" else (k, n - k - 1), 1)
    _, b, c, d, e, f = hexagon.corners
    for p, s in ((b, 1), (c, 1), (d, -1), (e, 1), (f, 1)):
        add(p, s)
    return {p: v for p, v in coef.items() if v != 0}


# ---------------------------------------------------------------------------
# distinguished tilings and enumeration


def standard_tiling(hexagon: ExcavationHexagon) -> Tiling:
    """Blue / green-plus-down above BE, green-plus-up / red below it."""
    j = hexagon.v[1]
    choice = {}
    for t in hexagon.triangles:
        kind, a, b = t
        upper_band = b >= j
        side = hexagon.side(t)
        vertical = upper_band if side == "up" else not upper_band
        choice[t] = triangle_edges(t)[1] if vertical else triangle_edges(t)[2]
    return tiling_from_choice(hexagon, choice)


AREA_GUARD = 40


def enumerate_tilings(hexagon: ExcavationHexagon, guard: int = AREA_GUARD):
    """Yield every tiling of the hexagon exactly once (backtracking)."""
    if hexagon.area > guard:
        raise CapacityError(f"hexagon area {hexagon.area} exceeds the guard {guard}")
    yield from _enumerate_region(hexagon)


def _enumerate_region(hexagon):
    tris = sorted(hexagon.triangles, key=lambda t: (t[2], t[1], t[0]))
    tset = set(tris)
    eq_tris = {}
    for k in hexagon.equator_range:
        e = hexagon.equator_edge(k)
        eq_tris[k] = [s for s in edge_triangles(e) if s in tset]
    choice = {}
    used_eq = set()

    def eq_dead(t):
        # t has just been paired off; its equator edge must still be servable
        e = triangle_edges(t)[2]
        if not hexagon.is_equator_edge(e):
            return False
        k = e[1]
        if k in used_eq:
            return False
        return all(s in choice and choice[s] != e for s in eq_tris[k])

    def rec(pos):
        while pos < len(tris) and tris[pos] in choice:
            pos += 1
        if pos == len(tris):
            if len(used_eq) == len(eq_tris):
                yield tiling_from_choice(hexagon, dict(choice))
            return
        t = tris[pos]
        for e in triangle_edges(t):
            if hexagon.is_equator_edge(e):
                k = e[1]
                if k in used_eq:
                    continue
                choice[t] = e
                used_eq.add(k)
                yield from rec(pos + 1)
                used_eq.discard(k)
                del choice[t]
                continue
            partner = [s for s in edge_triangles(e) if s != t][0]
            if partner not in tset or partner in choice:
                continue
            choice[t] = e
            choice[partner] = e
            if not (eq_dead(t) or eq_dead(partner)):
                yield from rec(pos + 1)
            del choice[partner]
            del choice[t]

    yield from rec(0)


def count_tilings(hexagon: ExcavationHexagon, guard: int = AREA_GUARD) -> int:
    return sum(1 for _ in enumerate_tilings(hexagon, guard))


# ---------------------------------------------------------------------------
# exact maximization through height functions


@dataclass
class Band:
    """Per-point bounds on the height pair: ``{"up": {p: (lo, hi)}, "lo": {...}}``."""

    up: dict
    lo: dict

    @classmethod
    def around(cls, pair, radius: float) -> "Band":
        up = {p: (v - radius, v + radius) for p, v in pair["up"].items()}
        lo = {p: (v - radius, v + radius) for p, v in pair["lo"].items()}
        return cls(up, lo)


def _heights_from_crossed(hexagon, crossed, side):
    """Height function of one trapezoid, normalized to 0 at corner A."""
    pts = hexagon.part_points[side]
    adj = {p: [] for p in pts}
    for e, _ in hexagon.part_edges[side]:
        u, v = edge_ends(e)
        d = -2 if e in crossed else 1
        adj[u].append((v, d))
        adj[v].append((u, -d))
    f = {hexagon.A: 0}
    stack = [hexagon.A]
    while stack:
        u = stack.pop()
        for v, d in adj[u]:
            if v not in f:
                f[v] = f[u] + d
                stack.append(v)
            elif f[v] != f[u] + d:
                raise ValidationError("crossed edges do not define a height function")
    return f


@lru_cache(maxsize=512)
def _lp_layout(hexagon):
    """Variables, edge constraints and reference heights (standard tiling)."""
    std = standard_tiling(hexagon)
    up_x, lo_x = std.crossed_edges(hexagon)
    ref = {"up": _heights_from_crossed(hexagon, up_x, "up"), "lo": _heights_from_crossed(hexagon, lo_x, "lo")}
    index = {p: k for k, p in enumerate(hexagon.points)}
    rows = []
    for side, crossed in (("up", up_x), ("lo", lo_x)):
        sign = 1 if side == "up" else -1
        for e, status in hexagon.part_edges[side]:
            if status == "equator" and side == "lo":
                continue
            u, v = edge_ends(e)
            d_ref = -2 if e in crossed else 1
            if status == "boundary":
                lo, hi = 0, 0
            elif (d_ref == 1) == (sign == 1):
                lo, hi = -1, 0
            else:
                lo, hi = 0, 1
            rows.append((e, side, status, index[u], index[v], lo, hi, d_ref))
    return std, ref, index, rows


def _edge_value(e, side, status, w, hexagon):
    """Weight gained when edge e is crossed in the given trapezoid."""
    if status == "equator":
        k = e[1]
        return triangle_weight("up", k, w) - triangle_weight("down", k, w)
    return lozenge_weight(Lozenge.from_edge(e, side), w)


def max_weight_tiling(hexagon: ExcavationHexagon, w: WeightField, band: Band | None = None):
    """Maximum of the primal weight over tilings (optionally inside a band)."""
    std, ref, index, rows = _lp_layout(hexagon)
    npts = len(index)
    edges = [(r[3], r[4]) for r in rows]
    lo = [r[5] for r in rows]
    hi = [r[6] for r in rows]
    cost = []
    for e, side, status, _, _, _, _, _ in rows:
        if status == "boundary":
            cost.append(0.0)
            continue
        val = _edge_value(e, side, status, w, hexagon)
        # crossing = crossing_ref - sign * dG
        cost.append(-val if side == "up" else val)
    vlo = np.full(npts, -np.inf)
    vhi = np.full(npts, np.inf)
    if band is not None:
        for side, bounds in (("up", band.up), ("lo", band.lo)):
            for p, (b0, b1) in bounds.items():
                if p not in index:
                    raise RangeError(f"band point {p} outside the hexagon")
                r = ref[side][p]
                if side == "up":
                    g0, g1 = np.ceil((b0 - r) / 3.0), np.floor((b1 - r) / 3.0)
                else:
                    g0, g1 = np.ceil((r - b1) / 3.0), np.floor((r - b0) / 3.0)
                k = index[p]
                vlo[k] = max(vlo[k], g0)
                vhi[k] = min(vhi[k], g1)
    g = solve_difference_lp(npts, edges, lo, hi, cost, vlo, vhi, fixed={index[hexagon.A]: 0})
    up_x, lo_x = set(), set()
    for e, side, status, iu, iv, _, _, d_ref in rows:
        dg = g[iv] - g[iu]
        d = d_ref + 3 * dg if side == "up" else d_ref - 3 * dg
        if d == -2:
            (up_x if side == "up" else lo_x).add(e)
        if status == "equator" and d == 1:
            lo_x.add(e)
    tiling = tiling_from_crossed(hexagon, up_x, lo_x)
    return tiling, tiling_weight(tiling, w, hexagon, validate=False)


def tiling_from_crossed(hexagon, up_x, lo_x) -> Tiling:
    choice = {}
    for t in hexagon.triangles:
        crossed = up_x if hexagon.side(t) == "up" else lo_x
        hit = [e for e in triangle_edges(t) if e in crossed]
        if len(hit) != 1:
            raise ValidationError(f"triangle {t} has {len(hit)} crossed edges")
        choice[t] = hit[0]
    # an equator edge crossed on both sides would give two border triangles
    return tiling_from_choice(hexagon, choice)


def lambda_offset(v, offset) -> float:
    """Deterministic contribution of the large-gap offset to ``h~(v)``."""
    offset = np.asarray(offset, dtype=float)
    n = offset.size
    return float(offset[: n - max(v[0] - v[1], 0)].sum())


def hive_value(v, mu: GTPattern, lam: GTPattern, offset=None, field: WeightField | None = None) -> float:
    """``h~(v)``: the maximum tiling weight of the excavation hexagon at v."""
    w = field if field is not None else build_weight_field(mu, lam, offset)
    _, val = max_weight_tiling(excavation_hexagon(v, w.n), w)
    return val


def augmented_hive_value(v, mu: GTPattern, lam: GTPattern, offset=None) -> float:
    w = build_weight_field(mu, lam, offset)
    return hive_value(v, mu, lam, field=w) - lambda_offset(v, w.offset)


# ---------------------------------------------------------------------------
# octahedron recurrence


def octahedron_from_field(kt: np.ndarray) -> np.ndarray:
    """Run the tropical octahedron recurrence from the lower surface.

    Cell ``(i, j)`` enters at height ``t = |i + j - n|`` with value
    ``kt[i, j]`` and is lifted in steps of two by
    ``F(t+1) = max(F(i+1) + F(i-1), F(j+1) + F(j-1)) - F(t-1)`` until it
    reaches ``t = n - |i - j|``.  Returns the final values.
    """
    kt = np.asarray(kt, dtype=float)
    n = kt.shape[0] - 1
    i, j = np.meshgrid(np.arange(n + 1), np.arange(n + 1), indexing="ij")
    t_lo = np.abs(i + j - n)
    t_hi = n - np.abs(i - j)
    out = np.where(t_lo == t_hi, kt, np.nan)
    before = np.full_like(kt, np.nan)
    now = np.where(t_lo == 0, kt, np.nan)
    pad = np.full((n + 3, n + 3), np.nan)
    for t in range(1, n + 1):
        pad[1:-1, 1:-1] = now
        horiz = pad[2:, 1:-1] + pad[:-2, 1:-1]
        vert = pad[1:-1, 2:] + pad[1:-1, :-2]
        step = (t_lo < t) & (t <= t_hi) & ((t - t_lo) % 2 == 0)
        lifted = np.maximum(horiz, vert) - before
        if np.any(np.isnan(lifted[step])):
            raise ValidationError("octahedron recurrence reached an undefined value")
        nxt = np.where(t_lo == t, kt, np.nan)
        nxt[step] = lifted[step]
        done = step & (t_hi == t)
        out[done] = lifted[done]
        before, now = now, nxt
    return out


def octahedron_recurrence(k: np.ndarray, k_prime: np.ndarray, tol: float = 1e-9):
    """Transform a pair on (U, U') into the pair on (T, T').

    ``k`` holds values on U (``i + j >= n``) and ``k_prime`` on U'
    (``i + j <= n``); other entries are ignored.  Returns ``(h, h_prime)``
    with NaN outside T (``i <= j``) and T' (``i >= j``) respectively.
    """
    k = np.asarray(k, dtype=float)
    kp = np.asarray(k_prime, dtype=float)
    n = k.shape[0] - 1
    i, j = np.meshgrid(np.arange(n + 1), np.arange(n + 1), indexing="ij")
    eq = i + j == n
    scale = max(1.0, float(np.nanmax(np.abs(np.where(eq, k, np.nan)))))
    if np.any(np.abs(k[eq] - kp[eq]) > tol * scale):
        raise ValidationError("the two input hives disagree on the equator")
    kt = np.where(i + j >= n, k, kp)
    out = octahedron_from_field(kt)
    h = np.where(i <= j, out, np.nan)
    hp = np.where(i >= j, out, np.nan)
    return h, hp
