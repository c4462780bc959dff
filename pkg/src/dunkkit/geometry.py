"""Problem domains: analytic catalog members, polygons and their measures.

Every domain is described by a frozen :class:`DomainSpec`.  Polygons carry a
tag per edge (``"robin"`` or ``"neumann"``); only robin edges count towards
the boundary measure, so a symmetry-reduced domain such as a gear half tooth
reports the same ``gamma`` as the full body it was cut from.
"""

from __future__ import annotations

import heapq
import json
import math
from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np
from scipy.optimize import linprog
from scipy.spatial import ConvexHull

ROBIN = "robin"
NEUMANN = "neumann"
_TAGS = (ROBIN, NEUMANN)


class GeometryError(ValueError):
    """Invalid domain parameters or polygon."""


@dataclass(frozen=True)
class DomainSpec:
    kind: str
    params: dict[str, Any]
    dim: int
    volume: float
    boundary: float
    diameter: float
    in_radius: float
    vertices: np.ndarray | None = field(default=None, repr=False, compare=False)
    tags: tuple[str, ...] | None = field(default=None, compare=False)

    @property
    def gamma(self) -> float:
        return self.boundary / self.volume

    @property
    def shape(self) -> str:
        """Catalog label (``params['shape']``), falling back to the kind."""
        return self.params.get("shape", self.kind)

    @property
    def is_polygon(self) -> bool:
        return self.kind == "polygon"

    def edges(self) -> np.ndarray:
        """Edge endpoints as an array of shape (n, 2, 2)."""
        _require_polygon(self)
        v = self.vertices
        return np.stack([v, np.roll(v, -1, axis=0)], axis=1)

    def scaled(self, alpha: float) -> "DomainSpec":
        """Uniform dilation by ``alpha`` about the origin."""
        if alpha <= 0:
            raise GeometryError("dilation factor must be positive")
        if self.kind == "polygon":
            return polygon(alpha * self.vertices, self.tags, **_scaled_params(self.params, alpha))
        if self.kind == "interval":
            return interval(alpha * self.params["half_length"])
        if self.kind == "disk":
            return disk(alpha * self.params["radius"])
        if self.kind == "sphere":
            return sphere(alpha * self.params["radius"])
        if self.kind == "tensorized":
            return tensorized(self.params["base"].scaled(alpha), alpha * self.params["length"])
        raise GeometryError(f"cannot scale kind {self.kind!r}")

    def to_json(self) -> dict[str, Any]:
        out: dict[str, Any] = {"kind": self.kind}
        for key, val in self.params.items():
            out[key] = val.to_json() if isinstance(val, DomainSpec) else val
        if self.kind == "polygon":
            out["vertices"] = self.vertices.tolist()
            out["tags"] = {str(i): t for i, t in enumerate(self.tags) if t != ROBIN}
        return out


def _scaled_params(params: dict[str, Any], alpha: float) -> dict[str, Any]:
    out = dict(params)
    for key in ("width", "height", "side", "radius"):
        if key in out:
            out[key] = out[key] * alpha
    return out


def _require_polygon(d: DomainSpec) -> None:
    if d.kind != "polygon":
        raise GeometryError(f"operation needs a polygon, got {d.kind!r}")


# ---------------------------------------------------------------------------
# analytic kinds


def interval(half_length: float = 1.0) -> DomainSpec:
    _positive(half_length=half_length)
    L = 2.0 * half_length
    return DomainSpec("interval", {"half_length": float(half_length)}, 1, L, 2.0, L, half_length)


def disk(radius: float = 1.0) -> DomainSpec:
    _positive(radius=radius)
    r = float(radius)
    return DomainSpec("disk", {"radius": r}, 2, math.pi * r * r, 2.0 * math.pi * r, 2.0 * r, r)


def sphere(radius: float = 1.0) -> DomainSpec:
    _positive(radius=radius)
    r = float(radius)
    return DomainSpec("sphere", {"radius": r}, 3, 4.0 / 3.0 * math.pi * r**3, 4.0 * math.pi * r * r, 2.0 * r, r)


def tensorized(base: DomainSpec, length: float) -> DomainSpec:
    """Prism (or slab) ``base x (0, length)``."""
    _positive(length=length)
    if base.dim >= 3:
        raise GeometryError("base of a tensorized domain must be 1D or 2D")
    vol = base.volume * length
    bnd = base.boundary * length + 2.0 * base.volume
    diam = math.hypot(base.diameter, length)
    rin = min(base.in_radius, 0.5 * length)
    return DomainSpec("tensorized", {"base": base, "length": float(length)}, base.dim + 1, vol, bnd, diam, rin)


def _positive(**kw: float) -> None:
    for name, val in kw.items():
        if not (val > 0 and math.isfinite(val)):
            raise GeometryError(f"{name} must be positive, got {val!r}")


# ---------------------------------------------------------------------------
# polygons


def polygon(vertices: Sequence[Sequence[float]] | np.ndarray,
            tags: Sequence[str] | dict[int, str] | None = None,
            *, check: bool = True, in_radius_tol: float | None = None,
            **params: Any) -> DomainSpec:
    """Simple polygon; vertices in either orientation, stored counter-clockwise.

    ``tags[i]`` labels the edge from vertex ``i`` to vertex ``i + 1``.  A dict
    maps edge index to tag with robin as the default.
    """
    v = np.array(vertices, dtype=float)
    if v.ndim != 2 or v.shape[1] != 2 or len(v) < 3:
        raise GeometryError("polygon needs at least three 2D vertices")
    n = len(v)
    if isinstance(tags, dict):
        tag_list = [ROBIN] * n
        for key, val in tags.items():
            tag_list[int(key)] = val
    elif tags is None:
        tag_list = [ROBIN] * n
    else:
        tag_list = list(tags)
    if len(tag_list) != n or any(t not in _TAGS for t in tag_list):
        raise GeometryError("one tag per edge, each 'robin' or 'neumann'")

    area = shoelace_area(v)
    if abs(area) <= 1e-14 * max(1.0, float(np.ptp(v, axis=0).max()) ** 2):
        raise GeometryError("degenerate polygon (zero area)")
    if area < 0:
        v = np.concatenate([v[:1], v[:0:-1]])
        tag_list = [tag_list[-1 - k] for k in range(n)]
        area = -area
    if check:
        bad = self_intersections(v)
        if bad:
            i, j = bad[0]
            raise GeometryError(f"polygon is not simple: edges {i} and {j} intersect")

    lengths = np.linalg.norm(np.roll(v, -1, axis=0) - v, axis=1)
    robin_len = float(sum(L for L, t in zip(lengths, tag_list) if t == ROBIN))
    if robin_len <= 0:
        raise GeometryError("polygon has no robin edge")
    hull = v[ConvexHull(v).vertices]
    diam = float(np.max(np.linalg.norm(hull[:, None, :] - hull[None, :, :], axis=-1)))
    v.setflags(write=False)
    tol = in_radius_tol if in_radius_tol is not None else 1e-6 * diam
    rin = _largest_disk(v, tol)[1]
    return DomainSpec("polygon", dict(params), 2, float(area), robin_len, diam, rin, v, tuple(tag_list))


def shoelace_area(v: np.ndarray) -> float:
    x, y = v[:, 0], v[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))


def self_intersections(v: np.ndarray) -> list[tuple[int, int]]:
    """Pairs of non-adjacent edges that touch or cross."""
    n = len(v)
    a = v
    b = np.roll(v, -1, axis=0)
    found = []
    for i in range(n - 2):
        j = np.arange(i + 2, n)
        if i == 0:
            j = j[j != n - 1]
        if len(j) == 0:
            continue
        hit = _segments_intersect(a[i], b[i], a[j], b[j])
        found.extend((i, int(k)) for k in j[hit])
        if found:
            break
    return found


def _cross(o, p, q):
    return (p[..., 0] - o[..., 0]) * (q[..., 1] - o[..., 1]) - (p[..., 1] - o[..., 1]) * (q[..., 0] - o[..., 0])


def _segments_intersect(p1, p2, q1, q2) -> np.ndarray:
    d1 = _cross(q1, q2, p1)
    d2 = _cross(q1, q2, p2)
    d3 = _cross(p1, p2, q1)
    d4 = _cross(p1, p2, q2)
    scale = max(1.0, float(np.abs(p2 - p1).max()))
    eps = 1e-13 * scale * scale
    proper = (d1 * d2 < 0) & (d3 * d4 < 0)

    def on_seg(o, p, q, d):
        within = (np.minimum(o[..., 0], p[..., 0]) - eps <= q[..., 0]) & (q[..., 0] <= np.maximum(o[..., 0], p[..., 0]) + eps)
        within &= (np.minimum(o[..., 1], p[..., 1]) - eps <= q[..., 1]) & (q[..., 1] <= np.maximum(o[..., 1], p[..., 1]) + eps)
        return (np.abs(d) <= eps) & within

    touch = on_seg(q1, q2, np.broadcast_to(p1, q1.shape), d1) | on_seg(q1, q2, np.broadcast_to(p2, q1.shape), d2)
    touch |= on_seg(np.broadcast_to(p1, q1.shape), np.broadcast_to(p2, q1.shape), q1, d3)
    touch |= on_seg(np.broadcast_to(p1, q1.shape), np.broadcast_to(p2, q1.shape), q2, d4)
    return proper | touch


def rectangle(width: float, height: float, origin: Sequence[float] = (0.0, 0.0)) -> DomainSpec:
    _positive(width=width, height=height)
    x0, y0 = origin
    v = [(x0, y0), (x0 + width, y0), (x0 + width, y0 + height), (x0, y0 + height)]
    return polygon(v, shape="rectangle", width=float(width), height=float(height))


def right_triangle(W: float) -> DomainSpec:
    """Right triangle with legs ``W`` (along x) and 1 (along y)."""
    _positive(W=W)
    return polygon([(0.0, 0.0), (W, 0.0), (0.0, 1.0)], shape="right_triangle", W=float(W))


def equilateral_triangle(side: float = 1.0) -> DomainSpec:
    _positive(side=side)
    h = side * math.sqrt(3.0) / 2.0
    return polygon([(0.0, 0.0), (side, 0.0), (side / 2.0, h)], shape="equilateral_triangle", side=float(side))


def regular_polygon(n_sides: int = 256, radius: float = 1.0) -> DomainSpec:
    """Inscribed n-gon, the straight-edged stand-in for a disk."""
    if n_sides < 3:
        raise GeometryError("need at least 3 sides")
    _positive(radius=radius)
    t = 2.0 * np.pi * np.arange(n_sides) / n_sides
    v = radius * np.column_stack([np.cos(t), np.sin(t)])
    return polygon(v, check=False, shape="regular_polygon", n_sides=int(n_sides), radius=float(radius))


# ---------------------------------------------------------------------------
# gear


def gear_angles(n: int, q: float) -> tuple[float, float]:
    """Half-tooth angle ``pi/n`` and tooth depth ``(pi/n)**q``."""
    if int(n) != n or n % 2:
        raise GeometryError(f"gear parameter n must be even, got {n!r}")
    if n < 8:
        raise GeometryError("gear needs at least 4 teeth (n >= 8)")
    _positive(q=q)
    theta = math.pi / n
    return theta, theta**q


def _gear_profile(n: int, q: float) -> np.ndarray:
    """Outer boundary of one half tooth, polar angle 0 .. theta.

    The tip (radius 1) covers the first half of the cell and the root
    (radius ``1 - depth``) the second, joined by a radial flank.
    """
    theta, depth = gear_angles(n, q)
    if depth >= 1.0:
        raise GeometryError("tooth depth reaches the centre; increase q or n")
    r_root = 1.0 - depth
    pts = [(1.0, 0.0), (1.0, 0.5 * theta), (r_root, 0.5 * theta), (r_root, theta)]
    return np.array([(r * math.cos(a), r * math.sin(a)) for r, a in pts])


def gear_halftooth(n: int, q: float) -> DomainSpec:
    """Symmetry cell of the gear; the two radial cuts are neumann edges."""
    prof = _gear_profile(n, q)
    v = np.vstack([[0.0, 0.0], prof])
    tags = [NEUMANN] + [ROBIN] * (len(prof) - 1) + [NEUMANN]
    return polygon(v, tags, shape="gear_halftooth", n=int(n), q=float(q))


def gear(n: int, q: float) -> DomainSpec:
    """Full gear: ``2n`` mirrored copies of the half tooth."""
    theta, _ = gear_angles(n, q)
    prof = _gear_profile(n, q)
    mirror = prof[::-1] * np.array([1.0, -1.0])
    tooth = np.vstack([mirror[:-1], prof[:-1]])
    pts = []
    for k in range(n):
        a = 2.0 * theta * k
        c, s = math.cos(a), math.sin(a)
        pts.append(tooth @ np.array([[c, s], [-s, c]]))
    return polygon(np.vstack(pts), check=False, shape="gear", n=int(n), q=float(q))


# ---------------------------------------------------------------------------
# features


def distance_to_boundary(d: DomainSpec, pts: np.ndarray) -> np.ndarray:
    """Signed distance from points to the polygon boundary (positive inside)."""
    _require_polygon(d)
    return _signed_distance(d.vertices, np.atleast_2d(pts))


def _segment_distance(pts: np.ndarray, a: np.ndarray, b: np.ndarray, chunk: int = 4096) -> np.ndarray:
    ab = b - a
    L2 = np.einsum("ij,ij->i", ab, ab)
    L2 = np.where(L2 > 0, L2, 1.0)
    out = np.empty(len(pts))
    for s in range(0, len(pts), chunk):
        p = pts[s:s + chunk, None, :]
        t = np.clip(np.einsum("pkj,kj->pk", p - a, ab) / L2, 0.0, 1.0)
        proj = a + t[..., None] * ab
        out[s:s + chunk] = np.sqrt(np.min(np.sum((p - proj) ** 2, axis=-1), axis=1))
    return out


def _inside(v: np.ndarray, pts: np.ndarray) -> np.ndarray:
    x, y = pts[:, 0:1], pts[:, 1:2]
    x1, y1 = v[:, 0], v[:, 1]
    x2, y2 = np.roll(x1, -1), np.roll(y1, -1)
    straddle = (y1 > y) != (y2 > y)
    with np.errstate(divide="ignore", invalid="ignore"):
        xint = x1 + (y - y1) * (x2 - x1) / (y2 - y1)
    crossings = straddle & (x < xint)
    return (np.count_nonzero(crossings, axis=1) % 2) == 1


def _signed_distance(v: np.ndarray, pts: np.ndarray) -> np.ndarray:
    dist = _segment_distance(pts, v, np.roll(v, -1, axis=0))
    return np.where(_inside(v, pts), dist, -dist)


def _polylabel(v: np.ndarray, tol: float) -> tuple[np.ndarray, float]:
    """Pole of inaccessibility by best-first subdivision of square cells."""
    lo, hi = v.min(axis=0), v.max(axis=0)
    size = float(np.max(hi - lo))
    grid = 16
    h = size / grid
    xs = lo[0] + h * (np.arange(int(math.ceil((hi[0] - lo[0]) / h)) + 1) + 0.5)
    ys = lo[1] + h * (np.arange(int(math.ceil((hi[1] - lo[1]) / h)) + 1) + 0.5)
    centres = np.array([(x, y) for x in xs for y in ys])
    d = _signed_distance(v, centres)
    half = h / 2.0
    heap = [(-(di + half * math.sqrt(2.0)), di, tuple(c), half) for c, di in zip(centres, d)]
    heapq.heapify(heap)
    centroid = _polygon_centroid(v)
    best_d = float(_signed_distance(v, centroid[None, :])[0])
    best = centroid
    i_max = int(np.argmax(d))
    if d[i_max] > best_d:
        best, best_d = centres[i_max], float(d[i_max])
    while heap:
        neg_pot, dc, c, half = heapq.heappop(heap)
        if -neg_pot - best_d <= tol:
            break
        h2 = half / 2.0
        kids = np.array(c) + h2 * np.array([[-1, -1], [1, -1], [-1, 1], [1, 1]])
        dk = _signed_distance(v, kids)
        for kc, kd in zip(kids, dk):
            if kd > best_d:
                best, best_d = kc, float(kd)
            pot = kd + h2 * math.sqrt(2.0)
            if pot - best_d > tol:
                heapq.heappush(heap, (-pot, float(kd), tuple(kc), h2))
    return np.asarray(best), max(best_d, 0.0)


def is_convex(v: np.ndarray) -> bool:
    """Counter-clockwise vertex list turning left (or straight) everywhere."""
    a, b, c = v, np.roll(v, -1, axis=0), np.roll(v, -2, axis=0)
    cr = (b[:, 0] - a[:, 0]) * (c[:, 1] - b[:, 1]) - (b[:, 1] - a[:, 1]) * (c[:, 0] - b[:, 0])
    scale = float(np.ptp(v, axis=0).max()) ** 2
    return bool(np.all(cr >= -1e-14 * scale))


def _chebyshev_centre(v: np.ndarray) -> tuple[np.ndarray, float]:
    """Largest inscribed disk of a convex CCW polygon as a linear program."""
    e = np.roll(v, -1, axis=0) - v
    nrm = np.column_stack([e[:, 1], -e[:, 0]])        # outward normals
    length = np.linalg.norm(nrm, axis=1)
    keep = length > 0
    nrm, length, v0 = nrm[keep] / length[keep, None], length[keep], v[keep]
    A = np.column_stack([nrm, np.ones(len(nrm))])
    b = np.einsum("ij,ij->i", nrm, v0)
    res = linprog([0.0, 0.0, -1.0], A_ub=A, b_ub=b, bounds=[(None, None)] * 2 + [(0, None)], method="highs")
    if not res.success:
        raise GeometryError(f"in-radius program failed: {res.message}")
    return res.x[:2], float(res.x[2])


def _largest_disk(v: np.ndarray, tol: float) -> tuple[np.ndarray, float]:
    if is_convex(v):
        return _chebyshev_centre(v)
    return _polylabel(v, tol)


def _polygon_centroid(v: np.ndarray) -> np.ndarray:
    x, y = v[:, 0], v[:, 1]
    xn, yn = np.roll(x, -1), np.roll(y, -1)
    cr = x * yn - xn * y
    a = cr.sum() / 2.0
    return np.array([((x + xn) * cr).sum(), ((y + yn) * cr).sum()]) / (6.0 * a)


def in_radius(d: DomainSpec, tol: float | None = None) -> float:
    """Radius of the largest inscribed disk, to absolute tolerance ``tol``."""
    if d.kind != "polygon":
        return d.in_radius
    if tol is None:
        return d.in_radius
    if tol <= 0:
        raise GeometryError("tolerance must be positive")
    return _largest_disk(d.vertices, tol)[1]


def in_circle(d: DomainSpec, tol: float | None = None) -> tuple[np.ndarray, float]:
    """Centre and radius of the largest inscribed disk of a polygon."""
    _require_polygon(d)
    return _largest_disk(d.vertices, tol if tol is not None else 1e-6 * d.diameter)


def feat2(d: DomainSpec) -> float:
    """Inscribed radius times gamma (dimensionless)."""
    return d.in_radius * d.gamma


def sample_boundary(d: DomainSpec, spacing: float) -> np.ndarray:
    """Points along the polygon boundary, no farther apart than ``spacing``."""
    _require_polygon(d)
    if spacing <= 0:
        raise GeometryError("sampling spacing must be positive")
    out = []
    for a, b in d.edges():
        k = max(1, int(math.ceil(np.linalg.norm(b - a) / spacing)))
        t = np.arange(k)[:, None] / k
        out.append(a + t * (b - a))
    return np.vstack(out)


def hausdorff_distance(a: DomainSpec, b: DomainSpec, spacing: float | None = None) -> float:
    """Hausdorff distance between the two boundary curves.

    Each boundary is sampled at ``spacing`` (default 1/2000 of the larger
    diameter) and samples are measured exactly against the other polygon's
    edges, so the error is at most ``spacing / 2``.
    """
    _require_polygon(a)
    _require_polygon(b)
    if spacing is None:
        spacing = max(a.diameter, b.diameter) / 2000.0
    pa = sample_boundary(a, spacing)
    pb = sample_boundary(b, spacing)
    ea, eb = a.edges(), b.edges()
    d_ab = _segment_distance(pa, eb[:, 0], eb[:, 1]).max()
    d_ba = _segment_distance(pb, ea[:, 0], ea[:, 1]).max()
    return float(max(d_ab, d_ba))


def dist(a: DomainSpec, b: DomainSpec, c1: float = 1.0, c2: float = 1.0,
         spacing: float | None = None) -> float:
    """``c1 * hausdorff + c2 * |perimeter difference|``."""
    if c1 < 0 or c2 < 0:
        raise GeometryError("distance weights must be nonnegative")
    h = hausdorff_distance(a, b, spacing) if c1 > 0 else 0.0
    return c1 * h + c2 * abs(a.boundary - b.boundary)


def features(d: DomainSpec) -> dict[str, float]:
    return {"gamma": d.gamma, "in_radius": d.in_radius, "feat2": feat2(d), "diameter": d.diameter}


# ---------------------------------------------------------------------------
# construction from JSON-like specs


_FACTORIES = {
    "interval": lambda p: interval(p.get("half_length", 1.0)),
    "disk": lambda p: disk(p.get("radius", 1.0)),
    "sphere": lambda p: sphere(p.get("radius", 1.0)),
    "rectangle": lambda p: rectangle(p["width"], p["height"], p.get("origin", (0.0, 0.0))),
    "right_triangle": lambda p: right_triangle(p["W"]),
    "equilateral_triangle": lambda p: equilateral_triangle(p.get("side", 1.0)),
    "regular_polygon": lambda p: regular_polygon(p.get("n_sides", 256), p.get("radius", 1.0)),
    "gear_halftooth": lambda p: gear_halftooth(p["n"], p["q"]),
    "gear": lambda p: gear(p["n"], p["q"]),
    "tensorized": lambda p: tensorized(make_domain(p["base"]), p["length"]),
}


def make_domain(spec: dict[str, Any]) -> DomainSpec:
    """Build a domain from ``{"kind": ..., params..., "tags": {...}}``."""
    spec = dict(spec)
    kind = spec.pop("kind", None)
    if kind == "polygon":
        shape = spec.get("shape")
        if shape in _FACTORIES and "vertices" not in spec:
            return _FACTORIES[shape](spec)
        verts = spec.pop("vertices", None)
        if verts is None:
            raise GeometryError("polygon spec needs 'vertices'")
        tags = spec.pop("tags", None)
        if isinstance(tags, dict):
            tags = {int(k): v for k, v in tags.items()}
        return polygon(verts, tags, **spec)
    if kind in _FACTORIES:
        return _FACTORIES[kind](spec)
    raise GeometryError(f"unknown domain kind {kind!r}")


def load_domain(path: str) -> DomainSpec:
    with open(path) as fh:
        return make_domain(json.load(fh))
