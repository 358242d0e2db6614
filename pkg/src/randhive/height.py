"""Height functions, Thurston tileability, extension and rounding.

A height function rises by 1 along every positive unit step that is not
crossed by a lozenge and drops by 2 across a lozenge diagonal.  The
asymmetric distance ``d_R(u, v)`` counts positive steps on the shortest
path inside the domain; every height function obeys
``f(v) - f(u) <= d_R(u, v)``.

Tilts.  An affine height ``f(p) = c . p`` is admissible when its slope
along each positive direction is at most 1, i.e. ``c`` lies in the
triangle with vertices ``(1, -1)``, ``(1, 2)`` and ``(-2, -1)``.  Tilt
vectors ``g`` given in the 60-degree basis (where the triangle is
``conv{2(i-j), 2j, -2i}``) convert through :func:`tilt_to_covector`.
"""

from __future__ import annotations

import heapq
import math
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DomainError,
    InfeasibleError,
    PreconditionError,
    RangeError,
    ValidationError,
)
from .lattice import (
    POSITIVE_STEPS,
    edge_ends,
    edge_triangles,
    triangle_edges,
    triangle_vertices,
)

# covector vertices of K, labelled by the lozenge colour (lower trapezoid)
# whose all-one tiling has that slope
K_VERTICES = {"green": (1.0, -1.0), "red": (1.0, 2.0), "blue": (-2.0, -1.0)}


# ---------------------------------------------------------------------------
# tilts


def tilt_to_covector(g):
    a, b = g
    return (a + b / 2.0, a / 2.0 + b)


def covector_to_tilt(c):
    c1, c2 = c
    return ((4.0 * c1 - 2.0 * c2) / 3.0, (4.0 * c2 - 2.0 * c1) / 3.0)


def k_slack(c):
    """Slack of the three constraints defining K (all >= 0 inside K)."""
    c1, c2 = c
    return np.array([1.0 - c1, 1.0 + c2, 1.0 + c1 - c2])


def in_K(c, tol: float = 1e-12) -> bool:
    return bool(np.all(k_slack(c) >= -tol))


def barycentric_K(c):
    """Barycentric coordinates w.r.t. (green, red, blue) vertices."""
    s = k_slack(c) / 3.0
    # each weight is the slack of the side opposite that vertex
    return np.array([s[2], s[1], s[0]])


def from_barycentric_K(w):
    w = np.asarray(w, dtype=float)
    verts = np.array([K_VERTICES["green"], K_VERTICES["red"], K_VERTICES["blue"]])
    return tuple(w @ verts)


def project_to_K(c):
    """Closest point of K to ``c`` (Euclidean, covector coordinates)."""
    p = np.asarray(c, dtype=float)
    if in_K(p):
        return tuple(p)
    verts = [np.array(K_VERTICES[k]) for k in ("green", "red", "blue")]
    best, best_d = None, np.inf
    for a, b in ((0, 1), (1, 2), (2, 0)):
        u, v = verts[a], verts[b]
        t = np.clip(np.dot(p - u, v - u) / np.dot(v - u, v - u), 0.0, 1.0)
        q = u + t * (v - u)
        d = np.dot(p - q, p - q)
        if d < best_d:
            best, best_d = q, d
    return tuple(best)


# ---------------------------------------------------------------------------
# domains


class LatticeDomain:
    """A finite union of unit triangles (``("L"|"R", a, b)`` tuples)."""

    def __init__(self, triangles):
        self.triangles = frozenset(triangles)
        if not self.triangles:
            raise DomainError("empty domain")
        pts, edges = set(), {}
        for t in self.triangles:
            pts.update(triangle_vertices(t))
            for e in triangle_edges(t):
                edges[e] = edges.get(e, 0) + 1
        self.points = frozenset(pts)
        self.edges = frozenset(edges)
        self.boundary_edges = frozenset(e for e, c in edges.items() if c == 1)
        self.boundary_points = frozenset(p for e in self.boundary_edges for p in edge_ends(e))
        self._succ = {p: [] for p in pts}
        for e in self.edges:
            u, v = edge_ends(e)
            self._succ[u].append(v)
        self._dist = {}

    @classmethod
    def from_boundary(cls, path):
        """Region enclosed by a closed lattice path of unit or longer segments."""
        pts = [tuple(p) for p in path]
        if pts[0] != pts[-1]:
            pts.append(pts[0])
        xs = [p[0] for p in pts]
        ys = [p[1] for p in pts]
        poly = np.array(pts, dtype=float)
        tris = []
        for b in range(min(ys) - 1, max(ys) + 1):
            for a in range(min(xs) - 1, max(xs) + 1):
                for kind in ("L", "R"):
                    cx, cy = np.mean(triangle_vertices((kind, a, b)), axis=0)
                    if _inside(poly, cx, cy):
                        tris.append((kind, a, b))
        return cls(tris)

    @property
    def area(self) -> int:
        return len(self.triangles)

    def balance(self) -> int:
        """Number of L triangles minus number of R triangles."""
        return sum(1 if t[0] == "L" else -1 for t in self.triangles)

    def euler_characteristic(self) -> int:
        return len(self.points) - len(self.edges) + len(self.triangles)

    def is_simply_connected(self) -> bool:
        if self.euler_characteristic() != 1:
            return False
        deg = {}
        for e in self.boundary_edges:
            for p in edge_ends(e):
                deg[p] = deg.get(p, 0) + 1
        return all(d == 2 for d in deg.values())

    def distances_from(self, u):
        """BFS distances along positive steps; missing keys are unreachable."""
        if u not in self.points:
            raise RangeError(f"{u} is not a point of the domain")
        if u not in self._dist:
            dist = {u: 0}
            queue = deque([u])
            while queue:
                p = queue.popleft()
                for q in self._succ[p]:
                    if q not in dist:
                        dist[q] = dist[p] + 1
                        queue.append(q)
            self._dist[u] = dist
        return self._dist[u]

    def positive_edges(self):
        return [edge_ends(e) for e in self.edges]

    def __sub__(self, other: "LatticeDomain") -> "LatticeDomain":
        return LatticeDomain(self.triangles - other.triangles)


def _inside(poly, x, y) -> bool:
    inside = False
    for (x0, y0), (x1, y1) in zip(poly[:-1], poly[1:]):
        if (y0 > y) != (y1 > y):
            xc = x0 + (y - y0) * (x1 - x0) / (y1 - y0)
            if xc > x:
                inside = not inside
    return inside


def hexagon_region(a: int, b: int, c: int) -> LatticeDomain:
    """The a x b x c hexagon (sides a, b, c, a, b, c along the lattice directions)."""
    path = [(0, 0)]
    for (dx, dy), k in (((1, 0), a), ((0, 1), b), ((-1, 1), c), ((-1, 0), a), ((0, -1), b), ((1, -1), c)):
        x, y = path[-1]
        path.append((x + dx * k, y + dy * k))
    return LatticeDomain.from_boundary(path)


def triangle_region(size: int, kind: str = "L") -> LatticeDomain:
    """Big triangle of side ``size`` with the same orientation as ``kind``."""
    if kind == "L":
        path = [(0, 0), (size, 0), (0, size)]
    else:
        path = [(size, 0), (size, size), (0, size)]
    return LatticeDomain.from_boundary(path)


def random_domain(area: int, rng, max_tries: int = 1000) -> LatticeDomain:
    """Simply connected domain of ``area`` triangles grown at random."""
    for _ in range(max_tries):
        tris = {("L", 0, 0)}
        frontier = []

        def neighbours(t):
            out = []
            for e in triangle_edges(t):
                out.extend(s for s in edge_triangles(e) if s != t)
            return out

        frontier = list(neighbours(("L", 0, 0)))
        while len(tris) < area:
            t = frontier[int(rng.integers(len(frontier)))]
            if t in tris:
                frontier.remove(t)
                continue
            tris.add(t)
            frontier.extend(s for s in neighbours(t) if s not in tris)
        d = LatticeDomain(tris)
        if d.is_simply_connected():
            return d
    raise DomainError("could not grow a simply connected domain")


def d_R(u, v, domain: LatticeDomain) -> float:
    if v not in domain.points:
        raise RangeError(f"{v} is not a point of the domain")
    return domain.distances_from(u).get(v, math.inf)


# ---------------------------------------------------------------------------
# tilings of general domains


def enumerate_domain_tilings(domain: LatticeDomain, limit: int | None = None):
    """Yield tilings as maps triangle -> crossed edge (backtracking)."""
    tris = sorted(domain.triangles, key=lambda t: (t[2], t[1], t[0]))
    tset = domain.triangles
    choice = {}
    count = [0]

    def rec(pos):
        while pos < len(tris) and tris[pos] in choice:
            pos += 1
        if pos == len(tris):
            count[0] += 1
            yield dict(choice)
            return
        t = tris[pos]
        for e in triangle_edges(t):
            partner = [s for s in edge_triangles(e) if s != t][0]
            if partner in tset and partner not in choice:
                choice[t] = choice[partner] = e
                yield from rec(pos + 1)
                del choice[t], choice[partner]
                if limit is not None and count[0] >= limit:
                    return

    yield from rec(0)


def brute_force_tileable(domain: LatticeDomain) -> bool:
    return next(iter(enumerate_domain_tilings(domain, limit=1)), None) is not None


def boundary_height(domain: LatticeDomain, start=None):
    """Heights along the boundary (+1 per positive step), or None if inconsistent."""
    adj = {}
    for e in domain.boundary_edges:
        u, v = edge_ends(e)
        adj.setdefault(u, []).append((v, 1))
        adj.setdefault(v, []).append((u, -1))
    start = start if start is not None else min(adj)
    f = {start: 0}
    stack = [start]
    while stack:
        u = stack.pop()
        for v, d in adj[u]:
            if v not in f:
                f[v] = f[u] + d
                stack.append(v)
            elif f[v] != f[u] + d:
                return None
    if len(f) != len(adj):
        raise DomainError("boundary is not connected")
    return f


def is_tileable(domain: LatticeDomain, witness: bool = False):
    """Thurston's criterion for simply connected domains."""
    if not domain.is_simply_connected():
        raise DomainError("domain is not simply connected; use extendability_annulus")
    f = boundary_height(domain)
    if f is None:
        return (False, "boundary height does not close up") if witness else False
    pts = sorted(f)
    for u in pts:
        dist = domain.distances_from(u)
        for v in pts:
            if f[v] - f[u] > dist.get(v, math.inf):
                return (False, (u, v)) if witness else False
    return (True, None) if witness else True


# ---------------------------------------------------------------------------
# height fields


@dataclass
class HeightField:
    values: dict

    def __call__(self, p):
        return self.values[p]

    def to_csv(self) -> str:
        rows = ["x,y,height"]
        rows += [f"{x},{y},{v}" for (x, y), v in sorted(self.values.items())]
        return "\n".join(rows) + "\n"


def heights_from_tiling(domain: LatticeDomain, choice, start=None) -> HeightField:
    crossed = set(choice.values())
    adj = {p: [] for p in domain.points}
    for e in domain.edges:
        u, v = edge_ends(e)
        d = -2 if e in crossed else 1
        adj[u].append((v, d))
        adj[v].append((u, -d))
    start = start if start is not None else min(domain.points)
    f = {start: 0}
    stack = [start]
    while stack:
        u = stack.pop()
        for v, d in adj[u]:
            if v not in f:
                f[v] = f[u] + d
                stack.append(v)
            elif f[v] != f[u] + d:
                raise ValidationError("tiling does not define a consistent height")
    return HeightField(f)


def check_height_field(f: dict, domain: LatticeDomain) -> None:
    """Raise unless every positive edge has increment 1 or -2."""
    for e in domain.edges:
        u, v = edge_ends(e)
        if u in f and v in f and f[v] - f[u] not in (1, -2):
            raise ValidationError(f"edge {e} has increment {f[v] - f[u]}")


def _dijkstra(domain: LatticeDomain, seeds: dict, reverse: bool = False):
    """``min_u seeds[u] + d(u, w)`` (or ``max_u seeds[u] - d(w, u)`` if reverse)."""
    succ = {p: [] for p in domain.points}
    for u, v in domain.positive_edges():
        if reverse:
            succ[v].append(u)
        else:
            succ[u].append(v)
    sign = -1 if reverse else 1
    best = {}
    heap = [(sign * val, p) for p, val in seeds.items()]
    heapq.heapify(heap)
    while heap:
        d, p = heapq.heappop(heap)
        if p in best:
            continue
        best[p] = d
        for q in succ[p]:
            if q not in best:
                heapq.heappush(heap, (d + 1, q))
    return {p: sign * d for p, d in best.items()}


def max_extension(boundary: dict, domain: LatticeDomain) -> HeightField:
    """Pointwise-largest height function agreeing with ``boundary``."""
    for p in boundary:
        if p not in domain.points:
            raise RangeError(f"{p} is not a point of the domain")
    g = _dijkstra(domain, boundary)
    if len(g) != len(domain.points):
        raise InfeasibleError("some points are unreachable from the prescribed values")
    for p, val in boundary.items():
        if g[p] != val:
            raise InfeasibleError(f"prescribed value at {p} cannot be attained")
    check_height_field(g, domain)
    return HeightField(g)


def min_extension(boundary: dict, domain: LatticeDomain) -> HeightField:
    """Pointwise-smallest height function agreeing with ``boundary``."""
    g = _dijkstra(domain, boundary, reverse=True)
    if len(g) != len(domain.points):
        raise InfeasibleError("some points cannot reach the prescribed values")
    for p, val in boundary.items():
        if g[p] != val:
            raise InfeasibleError(f"prescribed value at {p} cannot be attained")
    check_height_field(g, domain)
    return HeightField(g)


def extendability_annulus(g0: dict, g1: dict, outer: LatticeDomain, inner: LatticeDomain, tilt=None, margin=None):
    """Shift ``chi`` in {-1, 0, 1} making ``g0`` and ``g1 + chi`` jointly extendable.

    ``g0`` lives on the outer boundary and ``g1`` on the boundary of the
    inner domain.  If ``tilt`` (a covector) and ``margin`` are given, both
    boundaries must be within ``margin`` of a common affine function
    ``c . p + const``.  Returns ``(chi, extension)``.
    """
    if not inner.triangles <= outer.triangles:
        raise PreconditionError("inner domain is not contained in the outer one")
    ring = outer - inner
    if tilt is not None and margin is not None:
        c = np.asarray(tilt, dtype=float)
        vals = [(p, v - float(c @ np.asarray(p))) for g in (g0, g1) for p, v in g.items()]
        lo = min(vals, key=lambda t: t[1])
        hi = max(vals, key=lambda t: t[1])
        if hi[1] - lo[1] > 2 * margin:
            raise PreconditionError(f"boundaries are not within the margin of the tilt: pair {lo[0]}, {hi[0]}")
    last = None
    for chi in (0, -1, 1):
        bd = dict(g0)
        for p, v in g1.items():
            if p in bd and bd[p] != v + chi:
                break
            bd[p] = v + chi
        else:
            try:
                return chi, max_extension(bd, ring)
            except (InfeasibleError, ValidationError) as exc:
                last = exc
    raise InfeasibleError(f"no shift in {{-1, 0, 1}} gives an extendable boundary ({last})")


# ---------------------------------------------------------------------------
# height pairs on excavation hexagons


@dataclass
class HeightPair:
    """Heights on the upper and lower trapezoids, both 0 at corner A."""

    up: dict
    lo: dict
    meta: dict = field(default_factory=dict)

    def equator_slopes(self, hexagon):
        n = hexagon.n
        return [self.up[(k + 1, n - k - 1)] - self.up[(k, n - k)] for k in hexagon.equator_range]


def trapezoid_domain(hexagon, side: str) -> LatticeDomain:
    return LatticeDomain(t for t in hexagon.triangles if hexagon.side(t) == side)


def tiling_to_height(tiling, hexagon) -> HeightPair:
    from .lozenge import _heights_from_crossed

    up_x, lo_x = tiling.crossed_edges(hexagon)
    return HeightPair(_heights_from_crossed(hexagon, up_x, "up"), _heights_from_crossed(hexagon, lo_x, "lo"))


def height_to_tiling(pair: HeightPair, hexagon):
    from .lozenge import tiling_from_crossed

    crossed = {"up": set(), "lo": set()}
    for side in ("up", "lo"):
        f = pair.up if side == "up" else pair.lo
        if f.get(hexagon.A) != 0:
            raise ValidationError("height pair is not normalized at A")
        for e, _ in hexagon.part_edges[side]:
            u, v = edge_ends(e)
            d = f[v] - f[u]
            if d == -2:
                crossed[side].add(e)
            elif d != 1:
                raise ValidationError(f"edge {e} has increment {d}")
    return tiling_from_crossed(hexagon, crossed["up"], crossed["lo"])


def join(f: HeightPair, g: HeightPair) -> HeightPair:
    """Max on the upper trapezoid, min on the lower one."""
    if set(f.up) != set(g.up) or set(f.lo) != set(g.lo):
        raise DomainError("height pairs live on different hexagons")
    return HeightPair({p: max(f.up[p], g.up[p]) for p in f.up}, {p: min(f.lo[p], g.lo[p]) for p in f.lo})


def meet(f: HeightPair, g: HeightPair) -> HeightPair:
    if set(f.up) != set(g.up) or set(f.lo) != set(g.lo):
        raise DomainError("height pairs live on different hexagons")
    return HeightPair({p: min(f.up[p], g.up[p]) for p in f.up}, {p: max(f.lo[p], g.lo[p]) for p in f.lo})


def pair_precedes(f: HeightPair, g: HeightPair) -> bool:
    """``f`` below ``g`` in the order for which :func:`join` is the supremum."""
    return all(f.up[p] <= g.up[p] for p in f.up) and all(f.lo[p] >= g.lo[p] for p in f.lo)


def _snap(value: float, cls: int, down: bool) -> int:
    """Nearest integer congruent to ``cls`` mod 3 below (or above) ``value``."""
    if down:
        k = math.floor(value + 1e-9)
        return k - ((k - cls) % 3)
    k = math.ceil(value - 1e-9)
    return k + ((cls - k) % 3)


def round_field(f, domain: LatticeDomain, reference: dict, down: bool = True) -> HeightField:
    """Integer height function within 3 of a Lipschitz field ``f``.

    ``f`` maps lattice points to reals and must satisfy
    ``f(v) - f(u) <= d_R(u, v)``.  Values are snapped into the residue class
    of ``reference`` mod 3 (downwards if ``down``) and then extended by the
    maximal (or minimal) extension formula.
    """
    seeds = {p: _snap(f(p), reference[p] % 3, down) for p in domain.points}
    g = _dijkstra(domain, seeds, reverse=not down)
    check_height_field(g, domain)
    return HeightField(g)


def round_asymptotic(pair, hexagon) -> HeightPair:
    """Round an asymptotic height pair to a discrete one on the hexagon.

    ``pair`` has callables ``up`` and ``lo`` on lattice points.  The upper
    field is rounded down and the lower one up; on the equator the two
    roundings then add up to the required linear function because their
    sum is congruent to it mod 3 and within 3 of it.
    """
    from .lozenge import standard_tiling

    std = tiling_to_height(standard_tiling(hexagon), hexagon)
    out = {}
    for side, down, ref in (("up", True, std.up), ("lo", False, std.lo)):
        dom = trapezoid_domain(hexagon, side)
        fn = pair.up if side == "up" else pair.lo
        out[side] = round_field(fn, dom, ref, down=down).values
    result = HeightPair(out["up"], out["lo"])
    height_to_tiling(result, hexagon)  # validates the equator coupling
    return result


def rounding_error(pair, discrete: HeightPair) -> float:
    err = [abs(pair.up(p) - v) for p, v in discrete.up.items()]
    err += [abs(pair.lo(p) - v) for p, v in discrete.lo.items()]
    return float(max(err))


def triangle_covector(vals, t):
    """Gradient covector of the affine interpolant on unit triangle ``t``."""
    kind, a, b = t
    if kind == "L":
        f0, fx, fy = vals[(a, b)], vals[(a + 1, b)], vals[(a, b + 1)]
        return (fx - f0, fy - f0)
    f11, fx0, f0y = vals[(a + 1, b + 1)], vals[(a + 1, b)], vals[(a, b + 1)]
    return (f11 - f0y, f11 - fx0)


def gradients_in_K(f, triangles, tol: float = 1e-9) -> bool:
    """Check an asymptotic field (callable on lattice points) triangle by triangle."""
    for t in triangles:
        vals = {p: f(p) for p in triangle_vertices(t)}
        if not in_K(triangle_covector(vals, t), tol):
            return False
    return True
