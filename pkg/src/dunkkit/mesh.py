"""Conforming triangle meshes with region and boundary tags.

Coarse meshes come from ear clipping (generic polygons) or tensor grids
(rectangles, optionally with internal material interfaces); accuracy is then
bought with uniform red refinement.  Quadratic (P2) degrees of freedom are
numbered vertices first, then one per edge midpoint.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Sequence

import numpy as np

from .geometry import NEUMANN, ROBIN, DomainSpec, GeometryError, _require_polygon


class MeshError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class Mesh:
    vertices: np.ndarray            # (nv, 2)
    triangles: np.ndarray           # (nt, 3), counter-clockwise
    regions: np.ndarray             # (nt,)
    boundary: np.ndarray            # (nb, 2) vertex pairs
    boundary_tags: tuple[str, ...]  # per boundary edge
    level: int = 0
    parent: np.ndarray | None = field(default=None, repr=False)
    coarser: "Mesh | None" = field(default=None, repr=False)

    def __post_init__(self):
        for arr in (self.vertices, self.triangles, self.regions, self.boundary):
            arr.setflags(write=False)

    # -- topology --------------------------------------------------------

    @cached_property
    def _edge_data(self) -> tuple[np.ndarray, np.ndarray]:
        t = self.triangles
        local = np.stack([t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]], axis=1).reshape(-1, 2)
        key = np.sort(local, axis=1)
        edges, inverse = np.unique(key, axis=0, return_inverse=True)
        return edges, inverse.reshape(-1, 3)

    @property
    def edges(self) -> np.ndarray:
        """Unique edges as sorted vertex pairs."""
        return self._edge_data[0]

    @property
    def tri_edges(self) -> np.ndarray:
        """Global edge index of local edges (0-1, 1-2, 2-0) of each triangle."""
        return self._edge_data[1]

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_dofs(self) -> int:
        return self.n_vertices + len(self.edges)

    @cached_property
    def dofs(self) -> np.ndarray:
        """(nt, 6) P2 dofs: three vertices then midpoints of 0-1, 1-2, 2-0."""
        return np.hstack([self.triangles, self.n_vertices + self.tri_edges])

    @cached_property
    def boundary_edge_index(self) -> np.ndarray:
        return self.edge_index(self.boundary)

    @cached_property
    def boundary_dofs(self) -> np.ndarray:
        """(nb, 3) P2 dofs of boundary edges: endpoints then midpoint."""
        return np.column_stack([self.boundary, self.n_vertices + self.boundary_edge_index])

    def edge_index(self, pairs: np.ndarray) -> np.ndarray:
        key = np.sort(np.asarray(pairs), axis=1)
        nv = self.n_vertices
        code = self.edges[:, 0].astype(np.int64) * nv + self.edges[:, 1]
        q = key[:, 0].astype(np.int64) * nv + key[:, 1]
        idx = np.searchsorted(code, q)
        if np.any(idx >= len(code)) or np.any(code[np.minimum(idx, len(code) - 1)] != q):
            raise MeshError("boundary edge is not an edge of the mesh")
        return idx

    @cached_property
    def p2_points(self) -> np.ndarray:
        v = self.vertices
        mid = 0.5 * (v[self.edges[:, 0]] + v[self.edges[:, 1]])
        return np.vstack([v, mid])

    @property
    def robin_mask(self) -> np.ndarray:
        return np.array([t == ROBIN for t in self.boundary_tags], dtype=bool)

    # -- measures --------------------------------------------------------

    @cached_property
    def areas(self) -> np.ndarray:
        p = self.vertices[self.triangles]
        d1 = p[:, 1] - p[:, 0]
        d2 = p[:, 2] - p[:, 0]
        return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])

    @property
    def area(self) -> float:
        return float(math.fsum(self.areas))

    @cached_property
    def boundary_lengths(self) -> np.ndarray:
        v = self.vertices
        return np.linalg.norm(v[self.boundary[:, 1]] - v[self.boundary[:, 0]], axis=1)

    @property
    def robin_length(self) -> float:
        return float(math.fsum(self.boundary_lengths[self.robin_mask]))

    @property
    def gamma(self) -> float:
        return self.robin_length / self.area

    @property
    def h_max(self) -> float:
        v = self.vertices
        e = self.edges
        return float(np.linalg.norm(v[e[:, 1]] - v[e[:, 0]], axis=1).max())

    # -- checks ----------------------------------------------------------

    def validate(self) -> None:
        if np.any(self.areas <= 0):
            raise MeshError("triangle with nonpositive signed area")
        counts = np.bincount(self.tri_edges.ravel(), minlength=len(self.edges))
        if np.any(counts > 2):
            raise MeshError("edge shared by more than two triangles")
        free = set(np.flatnonzero(counts == 1).tolist())
        tagged = set(self.boundary_edge_index.tolist())
        if free != tagged:
            raise MeshError("boundary edges do not match edges used once")

    # -- transforms ------------------------------------------------------

    def scaled(self, alpha: float) -> "Mesh":
        return Mesh(alpha * self.vertices, self.triangles, self.regions, self.boundary,
                    self.boundary_tags, self.level)

    def with_regions(self, regions: np.ndarray) -> "Mesh":
        return Mesh(self.vertices, self.triangles, np.asarray(regions, dtype=int), self.boundary,
                    self.boundary_tags, self.level, self.parent, self.coarser)

    def retagged(self, tag_of_edge: Callable[[np.ndarray, np.ndarray], str]) -> "Mesh":
        """Reassign boundary tags from the endpoints of each edge."""
        v = self.vertices
        tags = tuple(tag_of_edge(v[i], v[j]) for i, j in self.boundary)
        return Mesh(self.vertices, self.triangles, self.regions, self.boundary, tags,
                    self.level, self.parent, self.coarser)

    def to_json(self) -> dict:
        tris = np.column_stack([self.triangles, self.regions]).tolist()
        bnd = [[int(i), int(j), t] for (i, j), t in zip(self.boundary, self.boundary_tags)]
        return {"vertices": self.vertices.tolist(), "triangles": tris, "boundary": bnd}

    @classmethod
    def from_json(cls, data: dict) -> "Mesh":
        tri = np.asarray(data["triangles"], dtype=int)
        if tri.shape[1] == 3:
            tri = np.column_stack([tri, np.zeros(len(tri), dtype=int)])
        bnd = data["boundary"]
        m = cls(np.asarray(data["vertices"], dtype=float), tri[:, :3].copy(), tri[:, 3].copy(),
                np.array([[b[0], b[1]] for b in bnd], dtype=int).reshape(-1, 2),
                tuple(b[2] for b in bnd))
        m.validate()
        return m

    def save(self, path: str) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_json(), fh)


# ---------------------------------------------------------------------------
# refinement


def refine(m: Mesh) -> Mesh:
    """Red refinement: each triangle into four similar children."""
    nv = m.n_vertices
    verts = m.p2_points.copy()
    t = m.triangles
    mid = nv + m.tri_edges            # midpoints of 0-1, 1-2, 2-0
    a, b, c = t[:, 0], t[:, 1], t[:, 2]
    m01, m12, m20 = mid[:, 0], mid[:, 1], mid[:, 2]
    kids = np.stack([
        np.column_stack([a, m01, m20]),
        np.column_stack([m01, b, m12]),
        np.column_stack([m20, m12, c]),
        np.column_stack([m01, m12, m20]),
    ], axis=1).reshape(-1, 3)
    nt = len(t)
    parent = np.repeat(np.arange(nt), 4)
    regions = m.regions[parent]
    bm = nv + m.boundary_edge_index
    i, j = m.boundary[:, 0], m.boundary[:, 1]
    bnd = np.stack([np.column_stack([i, bm]), np.column_stack([bm, j])], axis=1).reshape(-1, 2)
    tags = tuple(tg for tg in m.boundary_tags for _ in (0, 1))
    return Mesh(verts, kids, regions, bnd, tags, m.level + 1, parent, m)


def refine_to(m: Mesh, target_h: float) -> Mesh:
    if target_h <= 0:
        raise MeshError("target_h must be positive")
    while m.h_max > target_h * (1 + 1e-12):
        m = refine(m)
    return m


def refine_times(m: Mesh, k: int) -> Mesh:
    for _ in range(k):
        m = refine(m)
    return m


def ancestors(fine: Mesh, coarse: Mesh) -> np.ndarray:
    """Index in ``coarse`` of the ancestor of every triangle of ``fine``."""
    idx = np.arange(len(fine.triangles))
    m = fine
    while m is not coarse:
        if m.parent is None or m.coarser is None:
            raise MeshError("meshes are not nested by refinement")
        idx = m.parent[idx]
        m = m.coarser
    return idx


def prolong(coarse: Mesh, fine: Mesh, u: np.ndarray) -> np.ndarray:
    """Exact interpolation of a coarse P2 field onto a nested fine mesh."""
    if fine is coarse:
        return np.asarray(u).copy()
    anc = ancestors(fine, coarse)
    pc = coarse.vertices[coarse.triangles[anc]]          # (nt, 3, 2)
    pts = fine.p2_points[fine.dofs]                        # (nt, 6, 2)
    d1 = pc[:, 1] - pc[:, 0]
    d2 = pc[:, 2] - pc[:, 0]
    det = d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0]
    r = pts - pc[:, None, 0]
    xi = (r[..., 0] * d2[:, None, 1] - r[..., 1] * d2[:, None, 0]) / det[:, None]
    eta = (d1[:, None, 0] * r[..., 1] - d1[:, None, 1] * r[..., 0]) / det[:, None]
    from .assembly import p2_basis
    vals = np.einsum("tqi,ti->tq", p2_basis(xi, eta), np.asarray(u)[coarse.dofs[anc]])
    out = np.empty(fine.n_dofs)
    out[fine.dofs.ravel()] = vals.ravel()
    return out


# ---------------------------------------------------------------------------
# coarse generators


def ear_clip(vertices: np.ndarray) -> np.ndarray:
    """Triangulate a simple counter-clockwise polygon by ear clipping.

    Among the available ears the one with the largest minimum angle is cut
    first, which keeps slivers out of the coarse mesh where possible.
    """
    v = np.asarray(vertices, dtype=float)
    idx = list(range(len(v)))
    tris = []
    scale = float(np.ptp(v, axis=0).max())
    eps = 1e-14 * scale * scale

    def cross(o, a, b):
        return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])

    def is_ear(k):
        n = len(idx)
        i0, i1, i2 = idx[(k - 1) % n], idx[k], idx[(k + 1) % n]
        a, b, c = v[i0], v[i1], v[i2]
        if cross(a, b, c) <= eps:
            return False
        for j in idx:
            if j in (i0, i1, i2):
                continue
            p = v[j]
            if cross(a, b, p) >= -eps and cross(b, c, p) >= -eps and cross(c, a, p) >= -eps:
                if np.allclose(p, a) or np.allclose(p, b) or np.allclose(p, c):
                    continue
                return False
        return True

    def quality(k):
        n = len(idx)
        a, b, c = v[idx[(k - 1) % n]], v[idx[k]], v[idx[(k + 1) % n]]
        return _min_angle(a, b, c)

    while len(idx) > 3:
        ears = [k for k in range(len(idx)) if is_ear(k)]
        if not ears:
            raise MeshError("ear clipping failed (polygon not simple?)")
        k = max(ears, key=quality)
        n = len(idx)
        tris.append((idx[(k - 1) % n], idx[k], idx[(k + 1) % n]))
        del idx[k]
    tris.append(tuple(idx))
    return np.array(tris, dtype=int)


def _min_angle(a, b, c) -> float:
    def ang(p, q, r):
        u, w = q - p, r - p
        cosv = np.dot(u, w) / (np.linalg.norm(u) * np.linalg.norm(w))
        return math.acos(max(-1.0, min(1.0, cosv)))
    return min(ang(a, b, c), ang(b, c, a), ang(c, a, b))


def triangulate(d: DomainSpec, target_h: float | None = None) -> Mesh:
    """Ear-clipped coarse mesh of a polygon, red-refined down to ``target_h``."""
    _require_polygon(d)
    v = np.array(d.vertices)
    tris = ear_clip(v)
    n = len(v)
    bnd = np.column_stack([np.arange(n), (np.arange(n) + 1) % n])
    m = Mesh(v, tris, np.zeros(len(tris), dtype=int), bnd, tuple(d.tags))
    m.validate()
    if target_h is not None:
        m = refine_to(m, target_h)
    return m


def rectangle_mesh(xs: Sequence[float], ys: Sequence[float],
                   region_of: Callable[[float, float], int] | None = None,
                   tag_of: Callable[[np.ndarray, np.ndarray], str] | None = None,
                   pattern: str = "cross") -> Mesh:
    """Structured mesh of a rectangle on the tensor grid ``xs`` x ``ys``.

    ``pattern='cross'`` splits every cell into four triangles through its
    centre (symmetric, no preferred diagonal); ``'diagonal'`` uses two.
    ``region_of(x, y)`` is evaluated at cell centres, so material interfaces
    should lie on grid lines.
    """
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    if np.any(np.diff(xs) <= 0) or np.any(np.diff(ys) <= 0) or len(xs) < 2 or len(ys) < 2:
        raise MeshError("grid coordinates must be strictly increasing")
    nx, ny = len(xs), len(ys)
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    verts = [np.column_stack([X.ravel(), Y.ravel()])]

    def vid(i, j):
        return i * ny + j

    tris, regs = [], []
    nxt = nx * ny
    for i in range(nx - 1):
        for j in range(ny - 1):
            a, b, c, e = vid(i, j), vid(i + 1, j), vid(i + 1, j + 1), vid(i, j + 1)
            xc, yc = 0.5 * (xs[i] + xs[i + 1]), 0.5 * (ys[j] + ys[j + 1])
            r = region_of(xc, yc) if region_of else 0
            if pattern == "cross":
                verts.append([[xc, yc]])
                m = nxt
                nxt += 1
                tris += [(a, b, m), (b, c, m), (c, e, m), (e, a, m)]
                regs += [r] * 4
            elif pattern == "diagonal":
                tris += [(a, b, c), (a, c, e)]
                regs += [r] * 2
            else:
                raise MeshError(f"unknown pattern {pattern!r}")
    bnd = []
    for i in range(nx - 1):
        bnd.append((vid(i, 0), vid(i + 1, 0)))
        bnd.append((vid(i + 1, ny - 1), vid(i, ny - 1)))
    for j in range(ny - 1):
        bnd.append((vid(nx - 1, j), vid(nx - 1, j + 1)))
        bnd.append((vid(0, j + 1), vid(0, j)))
    v = np.vstack(verts)
    bnd = np.array(bnd, dtype=int)
    tags = tuple(tag_of(v[i], v[j]) if tag_of else ROBIN for i, j in bnd)
    mesh = Mesh(v, np.array(tris, dtype=int), np.array(regs, dtype=int), bnd, tags)
    mesh.validate()
    return mesh


def uniform_rectangle(width: float, height: float, nx: int, ny: int, **kw) -> Mesh:
    return rectangle_mesh(np.linspace(0.0, width, nx + 1), np.linspace(0.0, height, ny + 1), **kw)


def graded_points(breaks: Sequence[float], h: float) -> np.ndarray:
    """Grid coordinates containing every break point, spacing at most ``h``."""
    out = [breaks[0]]
    for a, b in zip(breaks[:-1], breaks[1:]):
        k = max(1, int(math.ceil((b - a) / h - 1e-9)))
        out.extend(np.linspace(a, b, k + 1)[1:])
    return np.array(out)


def ring_mesh(d: DomainSpec) -> Mesh:
    """Graded ring mesh of a regular polygon (vertex 0 on the positive x-axis).

    Rings shrink inward with a radial step close to the edge length; the
    vertex count halves whenever the ring edges get too short, down to a
    fan of at most eight triangles around the centre.
    """
    if d.shape != "regular_polygon":
        raise MeshError("ring mesh needs a regular polygon")
    n = d.params["n_sides"]
    R = d.params["radius"]
    h = 2.0 * math.pi * R / n
    verts = [d.vertices]
    rings = [np.arange(n)]
    r, nv = R, n
    tris: list[tuple[int, int, int]] = []
    while nv > 8 and nv % 2 == 0:
        r_in = r - 0.866 * 2.0 * math.pi * r / nv
        if r_in <= 0.0:
            break
        n_in = nv // 2 if 2.0 * math.pi * r_in / nv < 0.7 * h else nv
        t = 2.0 * math.pi * np.arange(n_in) / n_in
        start = sum(len(x) for x in verts)
        verts.append(r_in * np.column_stack([np.cos(t), np.sin(t)]))
        outer, inner = rings[-1], start + np.arange(n_in)
        if n_in == nv:
            for j in range(nv):
                k = (j + 1) % nv
                # alternate the quad diagonal to avoid a spiral bias
                if j % 2:
                    tris += [(outer[j], outer[k], inner[k]), (outer[j], inner[k], inner[j])]
                else:
                    tris += [(outer[j], outer[k], inner[j]), (inner[j], outer[k], inner[k])]
        else:
            for j in range(n_in):
                a0, a1, a2 = outer[2 * j], outer[(2 * j + 1) % nv], outer[(2 * j + 2) % nv]
                i0, i1 = inner[j], inner[(j + 1) % n_in]
                tris += [(i0, a0, a1), (i0, a1, i1), (i1, a1, a2)]
        rings.append(inner)
        r, nv = r_in, n_in
    centre = sum(len(x) for x in verts)
    verts.append(np.zeros((1, 2)))
    last = rings[-1]
    tris += [(centre, last[j], last[(j + 1) % nv]) for j in range(nv)]
    v = np.vstack(verts)
    bnd = np.column_stack([np.arange(n), (np.arange(n) + 1) % n])
    m = Mesh(v, np.array(tris, dtype=int), np.zeros(len(tris), dtype=int), bnd, tuple(d.tags))
    m.validate()
    return m


def mesh_domain(d: DomainSpec, target_h: float | None = None) -> Mesh:
    """Default mesher: structured for rectangles, ear clipping otherwise."""
    _require_polygon(d)
    if d.shape == "rectangle":
        x0, y0 = d.vertices.min(axis=0)
        w, hgt = d.params["width"], d.params["height"]
        h = target_h or min(w, hgt)
        xs = graded_points([x0, x0 + w], h)
        ys = graded_points([y0, y0 + hgt], h)
        return rectangle_mesh(xs, ys)
    if d.shape == "regular_polygon" and d.params["n_sides"] % 16 == 0:
        m = ring_mesh(d)
        return refine_to(m, target_h) if target_h is not None else m
    return triangulate(d, target_h)


def check_area(m: Mesh, d: DomainSpec) -> float:
    """Relative mismatch between mesh area and domain area."""
    if d.kind != "polygon":
        raise GeometryError("area check needs a polygon")
    return abs(m.area - d.volume) / d.volume


__all__ = [
    "Mesh", "MeshError", "refine", "refine_to", "refine_times", "prolong", "ear_clip",
    "triangulate", "ring_mesh", "rectangle_mesh", "uniform_rectangle", "graded_points", "mesh_domain",
    "check_area", "ROBIN", "NEUMANN",
]
