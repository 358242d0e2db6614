"""Asymptotic height pairs on a mesh and the functional S_v.

The mesh is the excavation hexagon of a coarse lattice (size ``N``); its
unit triangles are the mesh triangles and positions are rescaled by ``N``.
Node values are asymptotic heights in lattice units of the mesh.  A
piecewise-affine field has all its gradients in K exactly when every
positive unit step rises by at most 1, so the feasible set is a polytope
cut out by difference constraints.

With a convexified tension table (a maximum of affine pieces) the
functional is concave and piecewise linear, and :func:`maximize_Sv`
solves it exactly as a linear program.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse
from scipy.optimize import linprog
from scipy.spatial import ConvexHull

from .errors import (
    ExtrapolationError,
    GeometryError,
    InfeasibleError,
    NumericalError,
    ParameterError,
    ValidationError,
)
from .height import K_VERTICES, from_barycentric_K, in_K, k_slack, triangle_covector
from .lattice import edge_ends, triangle_vertices
from .lozenge import ExcavationHexagon, excavation_hexagon, standard_tiling
from .tension import sigma_delta, upper_to_patch_covector


# ---------------------------------------------------------------------------
# geometry


def trapezoid_sides(hexagon: ExcavationHexagon):
    """``(a, b)``: the upper trapezoid has height a, the lower one height b."""
    i, j = hexagon.v
    n = hexagon.n
    return (i, n - j) if i <= j else (j, n - i)


def mesh_hexagon(v_rel, n_mesh: int) -> ExcavationHexagon:
    """Excavation hexagon of the mesh lattice for a rescaled vertex."""
    v = (v_rel[0] * n_mesh, v_rel[1] * n_mesh)
    vi = (round(v[0]), round(v[1]))
    if abs(v[0] - vi[0]) > 1e-9 or abs(v[1] - vi[1]) > 1e-9:
        raise GeometryError(f"vertex {v_rel} is not on the mesh lattice of size {n_mesh}")
    return excavation_hexagon(vi, n_mesh)


def dagger_fields(hexagon: ExcavationHexagon):
    """The closed-form pair ``f_up, f_lo`` that is linear on each line parallel to the equator."""
    a, b = trapezoid_sides(hexagon)
    if a <= 0 or b <= 0:
        raise GeometryError("degenerate trapezoid")
    n = hexagon.n
    x0 = hexagon.A[0]

    def up(p):
        x = p[0] + p[1] - n
        z = p[0] - x0 - x
        return x if x >= a + b else x + z * (2 * a - b - 2 * x) / (a + b - x)

    def lo(p):
        y = n - p[0] - p[1]
        z = p[0] - x0
        return y if y >= a + b else y + z * (2 * b - a - 2 * y) / (a + b - y)

    return up, lo


@dataclass
class MeshAHT:
    hexagon: ExcavationHexagon
    up: dict
    lo: dict

    def field(self, side):
        return self.up if side == "up" else self.lo

    def __call__(self, side, p):
        return self.field(side)[p]

    def to_csv(self) -> str:
        rows = ["side,x,y,value"]
        for side in ("up", "lo"):
            rows += [f"{side},{x},{y},{float(val)!r}" for (x, y), val in sorted(self.field(side).items())]
        return "\n".join(rows) + "\n"


class Mesh:
    """Index tables for one mesh hexagon (built once, reused by evaluations)."""

    def __init__(self, hexagon: ExcavationHexagon):
        self.hexagon = hexagon
        self.n = hexagon.n
        self.tri = {s: [t for t in hexagon.triangles if hexagon.side(t) == s] for s in ("up", "lo")}
        self.points = {s: hexagon.part_points[s] for s in ("up", "lo")}
        self.edges = {}
        for s in ("up", "lo"):
            self.edges[s] = [edge_ends(e) for e, _ in hexagon.part_edges[s]]
        self.equator_points = [(k, self.n - k) for k in range(hexagon.A[0], hexagon.corners[3][0] + 1)]
        std = _standard_heights(hexagon)
        self.standard = std
        self.boundary = {}
        eq = set(self.equator_points)
        for s in ("up", "lo"):
            pts = set()
            for e, status in hexagon.part_edges[s]:
                if status == "boundary":
                    pts.update(edge_ends(e))
            # corners A and D lie on the outer boundary too
            pts.update({hexagon.A, hexagon.corners[3]})
            self.boundary[s] = {p: std[s][p] for p in pts}
        self.eq_line = {p: p[0] - hexagon.A[0] for p in self.equator_points}
        self.eq_set = eq

    def centroid(self, t):
        pts = np.array(triangle_vertices(t), dtype=float)
        return pts.mean(axis=0) / self.n

    @staticmethod
    def gt_position(side, x):
        """Relative (entry, row) position in the GT pattern feeding this side."""
        if side == "lo":
            return (x[1], 1.0 - x[0])
        return (x[0] + x[1] - 1.0, x[1])


def _standard_heights(hexagon):
    from .height import tiling_to_height

    pair = tiling_to_height(standard_tiling(hexagon), hexagon)
    return {"up": pair.up, "lo": pair.lo}


def f_ddagger(hexagon: ExcavationHexagon) -> MeshAHT:
    up, lo = dagger_fields(hexagon)
    return MeshAHT(
        hexagon,
        {p: float(up(p)) for p in hexagon.part_points["up"]},
        {p: float(lo(p)) for p in hexagon.part_points["lo"]},
    )


def check_mesh_aht(f: MeshAHT, mesh: Mesh | None = None, tol: float = 1e-9):
    """Raise ValidationError unless ``f`` is a feasible asymptotic height pair."""
    mesh = mesh or Mesh(f.hexagon)
    for s in ("up", "lo"):
        vals = f.field(s)
        for u, v in mesh.edges[s]:
            if vals[v] - vals[u] > 1 + tol:
                raise ValidationError(f"gradient leaves K across {u}->{v} ({s})")
        for p, val in mesh.boundary[s].items():
            if abs(vals[p] - val) > tol:
                raise ValidationError(f"boundary value at {p} ({s}) is {vals[p]}, expected {val}")
    for p, val in mesh.eq_line.items():
        if abs(f.up[p] + f.lo[p] - val) > tol:
            raise ValidationError(f"equator sum at {p} is not the required linear function")


def blend(f: MeshAHT, delta: float) -> MeshAHT:
    """``delta * f_ddagger + (1 - delta) * f``."""
    if not 0.0 <= delta <= 1.0:
        raise ParameterError("blend weight must lie in [0, 1]")
    g = f_ddagger(f.hexagon)
    return MeshAHT(
        f.hexagon,
        {p: delta * g.up[p] + (1 - delta) * v for p, v in f.up.items()},
        {p: delta * g.lo[p] + (1 - delta) * v for p, v in f.lo.items()},
    )


# ---------------------------------------------------------------------------
# tension tables


def k_grid(spacing: float = 0.1):
    """Covectors on the barycentric grid of K with the given spacing."""
    steps = int(round(1.0 / spacing))
    if abs(steps * spacing - 1.0) > 1e-9:
        raise ParameterError("grid spacing must divide 1")
    out = []
    for a in range(steps + 1):
        for b in range(steps + 1 - a):
            w = np.array([a, b, steps - a - b], dtype=float) / steps
            out.append(from_barycentric_K(w))
    return np.array(out)


@dataclass
class SigmaTable:
    """Tension values on a set of covectors in K, with a convex envelope."""

    covectors: np.ndarray
    values: np.ndarray
    std_errors: np.ndarray | None = None
    facets: np.ndarray | None = field(default=None, repr=False)  # rows (a1, a2, b)

    def convexified(self) -> "SigmaTable":
        """Lower convex envelope: values replaced by the envelope at the grid."""
        pts = np.column_stack([self.covectors, self.values])
        design = np.column_stack([self.covectors, np.ones(len(self.values))])
        plane, *_ = np.linalg.lstsq(design, self.values, rcond=None)
        if np.max(np.abs(design @ plane - self.values)) <= 1e-12 * max(1.0, float(np.max(np.abs(self.values)))):
            # affine data: the hull is flat and qhull would reject it
            return SigmaTable(self.covectors, design @ plane, self.std_errors, plane[None, :])
        hull = ConvexHull(pts)
        facets = []
        for eq in hull.equations:
            nx, ny, nz, off = eq
            if nz < -1e-12:  # outward normal points down: lower hull
                facets.append((-nx / nz, -ny / nz, -off / nz))
        facets = np.array(facets)
        env = np.max(self.covectors @ facets[:, :2].T + facets[:, 2], axis=1)
        return SigmaTable(self.covectors, np.minimum(env, self.values), self.std_errors, facets)

    def __call__(self, c) -> float:
        c = np.asarray(c, dtype=float)
        if not in_K(c, 1e-9):
            raise ExtrapolationError(f"tilt {tuple(c)} is outside the table's hull")
        if self.facets is None:
            raise ValidationError("evaluate the convexified table")
        return float(np.max(self.facets[:, :2] @ c + self.facets[:, 2]))

    def lipschitz(self) -> float:
        if self.facets is None:
            return float("nan")
        return float(np.max(np.hypot(self.facets[:, 0], self.facets[:, 1])))

    @classmethod
    def from_function(cls, fn, spacing: float = 0.1) -> "SigmaTable":
        cov = k_grid(spacing)
        return cls(cov, np.array([fn(c) for c in cov])).convexified()

    def to_csv(self) -> str:
        rows = ["c1,c2,sigma,std_error"]
        se = self.std_errors if self.std_errors is not None else np.full(len(self.values), np.nan)
        rows += [f"{float(c[0])!r},{float(c[1])!r},{float(v)!r},{float(s)!r}" for c, v, s in zip(self.covectors, self.values, se)]
        return "\n".join(rows) + "\n"


@dataclass
class TensionModel:
    """Per-side convex tables plus the local scale at each position.

    ``scale(side, gt_position)`` multiplies the table (it carries the
    ratio of local gap means to those of the table's reference patch and
    any unit conversion).  The patch frame is used for tilts, so upper
    covectors are converted before lookup.
    """

    tables: dict
    scale: object = None
    grid_spacing: float = 0.1

    def density(self, side, gt_pos, c_mesh):
        c = c_mesh if side == "lo" else upper_to_patch_covector(c_mesh)
        s = 1.0 if self.scale is None else float(self.scale(side, gt_pos))
        return s, self.tables[side], c


# ---------------------------------------------------------------------------
# functional


@dataclass
class FunctionalValue:
    s_diamond: float
    s_delta: float
    s_hex: float
    total: float
    error: float = 0.0
    details: dict = field(default_factory=dict)


def _area(mesh: Mesh) -> float:
    """Area of one mesh triangle in rescaled unit squares."""
    return 0.5 / mesh.n**2


def S_v_diamond(f: MeshAHT, model: TensionModel, mesh: Mesh | None = None):
    """``-(1/4) sum_triangles area * sigma(position, gradient)``, with an error bound."""
    mesh = mesh or Mesh(f.hexagon)
    area = _area(mesh)
    total, err = 0.0, 0.0
    for side in ("up", "lo"):
        vals = f.field(side)
        for t in mesh.tri[side]:
            c = triangle_covector(vals, t)
            s, table, cp = model.density(side, mesh.gt_position(side, mesh.centroid(t)), c)
            total -= area * s * table(cp) / 4.0
            err += area * s * table.lipschitz() * model.grid_spacing / 4.0
    return total, err


def _tau_mean(tau, t0, t1):
    """Simpson average of tau over [t0, t1]."""
    a, b, c = np.asarray(tau(t0)), np.asarray(tau(0.5 * (t0 + t1))), np.asarray(tau(t1))
    return (a + 4 * b + c) / 6.0


def S_v_delta(f: MeshAHT, tau, mesh: Mesh | None = None) -> float:
    """Equator term; ``tau(t)`` gives (tau_up, tau_lo) at rescaled abscissa t."""
    mesh = mesh or Mesh(f.hexagon)
    n = mesh.n
    total = 0.0
    for p, q in zip(mesh.equator_points[:-1], mesh.equator_points[1:]):
        b = f.up[q] - f.up[p]
        if not -1 - 1e-9 <= b <= 2 + 1e-9:
            raise ValidationError(f"equator slope {b} outside [-1, 2]")
        total -= sigma_delta(_tau_mean(tau, p[0] / n, q[0] / n), min(max(b, -1.0), 2.0)) / n
    return total


def S_v(f: MeshAHT, model: TensionModel, tau, s_hex: float, mesh: Mesh | None = None) -> FunctionalValue:
    mesh = mesh or Mesh(f.hexagon)
    sd, err = S_v_diamond(f, model, mesh)
    se = S_v_delta(f, tau, mesh)
    return FunctionalValue(sd, se, float(s_hex), sd + se + float(s_hex), err)


def maximize_Sv(hexagon: ExcavationHexagon, model: TensionModel, tau, s_hex: float):
    """Exact maximizer of S_v over mesh height pairs (linear program).

    Returns ``(MeshAHT, FunctionalValue, info)``.
    """
    mesh = Mesh(hexagon)
    n = mesh.n
    area = _area(mesh)
    # variables: upper points, then lower points off the equator, then one epigraph per triangle
    index = {}
    for p in mesh.points["up"]:
        index[("up", p)] = len(index)
    for p in mesh.points["lo"]:
        if p not in mesh.eq_set:
            index[("lo", p)] = len(index)
    nf = len(index)
    tris = [(s, t) for s in ("up", "lo") for t in mesh.tri[s]]
    nvar = nf + len(tris)

    def lin(side, p):
        """Node value as (coeffs dict, constant)."""
        if side == "lo" and p in mesh.eq_set:
            return {index[("up", p)]: -1.0}, float(mesh.eq_line[p])
        return {index[(side, p)]: 1.0}, 0.0

    rows, cols, vals, rhs = [], [], [], []
    r = 0

    def add_row(coef, bound):
        nonlocal r
        for k, v in coef.items():
            if v != 0.0:
                rows.append(r), cols.append(k), vals.append(v)
        rhs.append(bound)
        r += 1

    # gradient in K: rise <= 1 along every positive edge
    for side in ("up", "lo"):
        for u, v in mesh.edges[side]:
            cu, ku = lin(side, u)
            cv, kv = lin(side, v)
            coef = dict(cv)
            for k, x in cu.items():
                coef[k] = coef.get(k, 0.0) - x
            add_row(coef, 1.0 - kv + ku)
    # epigraphs: t >= s * (a . c' + b) for every facet
    cost = np.zeros(nvar)
    for ti, (side, t) in enumerate(tris):
        tv = nf + ti
        s, table, _ = model.density(side, mesh.gt_position(side, mesh.centroid(t)), (0.0, 0.0))
        cost[tv] = -area / 4.0
        grad = _covector_linear(t, side, lin)
        for a1, a2, b in table.facets:
            # facet in patch frame: a . c'  with c' = c (lo) or (c2 - c1, -c1) (up)
            if side == "up":
                g1, g2 = -a1 - a2, a1
            else:
                g1, g2 = a1, a2
            coef, const = _combine(grad, g1, g2)
            coef = {k: s * x for k, x in coef.items()}
            coef[tv] = coef.get(tv, 0.0) - 1.0
            add_row(coef, -s * (const + b))
    # equator term: linear in the upper equator values
    c_delta = np.zeros(nvar)
    d_const = 0.0
    for p, q in zip(mesh.equator_points[:-1], mesh.equator_points[1:]):
        tu, tl = _tau_mean(tau, p[0] / n, q[0] / n)
        # -sigma_delta = (b+1) tau_up / 9 - (2-b) tau_lo / 9 = b (tau_up + tau_lo)/9 + (tau_up - 2 tau_lo)/9
        k = (tu + tl) / 9.0 / n
        c_delta[index[("up", q)]] += k
        c_delta[index[("up", p)]] -= k
        d_const += (tu - 2.0 * tl) / 9.0 / n
    bounds = [(None, None)] * nvar
    for side in ("up", "lo"):
        for p, val in mesh.boundary[side].items():
            coef, const = lin(side, p)
            (k, x), = coef.items()
            fixed = (val - const) / x
            bounds[k] = (fixed, fixed)
    a_ub = sparse.csr_matrix((vals, (rows, cols)), shape=(r, nvar))
    res = linprog(-(cost + c_delta), A_ub=a_ub, b_ub=np.array(rhs), bounds=bounds, method="highs")
    if res.status == 2:
        raise InfeasibleError("no asymptotic height pair satisfies the boundary conditions")
    if res.status != 0:
        raise NumericalError("S_v linear program failed", {"status": res.status, "message": res.message})
    x = res.x
    up = {p: float(x[index[("up", p)]]) for p in mesh.points["up"]}
    lo = {}
    for p in mesh.points["lo"]:
        coef, const = lin("lo", p)
        lo[p] = const + sum(x[k] * w for k, w in coef.items())
    f = MeshAHT(hexagon, up, lo)
    value = S_v(f, model, tau, s_hex, mesh)
    lp_value = float(-res.fun + d_const + s_hex)
    info = {"lp_value": lp_value, "variables": nvar, "constraints": r}
    if abs(lp_value - value.total) > 1e-6 * max(1.0, abs(value.total)):
        raise NumericalError("LP optimum disagrees with direct evaluation", {"lp": lp_value, "direct": value.total})
    return f, value, info


def _covector_linear(t, side, lin):
    """Triangle covector as two (coeffs, const) linear forms in the node variables."""
    kind, a, b = t
    if kind == "L":
        p0, px, py = (a, b), (a + 1, b), (a, b + 1)
        return _diff(lin(side, px), lin(side, p0)), _diff(lin(side, py), lin(side, p0))
    p11, px0, p0y = (a + 1, b + 1), (a + 1, b), (a, b + 1)
    return _diff(lin(side, p11), lin(side, p0y)), _diff(lin(side, p11), lin(side, px0))


def _diff(f, g):
    coef = dict(f[0])
    for k, x in g[0].items():
        coef[k] = coef.get(k, 0.0) - x
    return coef, f[1] - g[1]


def _combine(grad, g1, g2):
    (c1, k1), (c2, k2) = grad
    coef = {}
    for k, x in c1.items():
        coef[k] = coef.get(k, 0.0) + g1 * x
    for k, x in c2.items():
        coef[k] = coef.get(k, 0.0) + g2 * x
    return coef, g1 * k1 + g2 * k2


def tiling_profile(pair, hexagon_fine: ExcavationHexagon, mesh_hexagon_: ExcavationHexagon) -> MeshAHT:
    """Restrict a discrete height pair on a finer hexagon to the mesh, rescaled."""
    ratio = hexagon_fine.n / mesh_hexagon_.n
    if abs(ratio - round(ratio)) > 1e-12:
        raise GeometryError("fine hexagon size must be a multiple of the mesh size")
    k = int(round(ratio))
    up = {p: pair.up[(p[0] * k, p[1] * k)] / k for p in mesh_hexagon_.part_points["up"]}
    lo = {p: pair.lo[(p[0] * k, p[1] * k)] / k for p in mesh_hexagon_.part_points["lo"]}
    return MeshAHT(mesh_hexagon_, up, lo)
