"""Polygonal meshes with face topology, white/grey region tags and axonal fields.

A :class:`PolyMesh` is immutable once built. Faces are derived from the
element polygons by edge matching, so two elements are neighbours exactly
when they share an edge with identical endpoints (conforming polygons,
possibly with collinear vertices).
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import linprog
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components
from scipy.spatial import Delaunay

GREY = 0
WHITE = 1

AXONAL_TOL = 1e-8

RegionRule = Callable[[float, float], "tuple[int, Sequence[float]]"]


class MeshError(ValueError):
    """Raised for invalid mesh geometry or topology."""


class MeshFormatError(MeshError):
    """Raised when a mesh file cannot be parsed; carries the offending line."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


@dataclass(frozen=True)
class Face:
    """An edge of the mesh.

    ``normal`` is the unit normal pointing out of ``owner`` (towards
    ``neighbor`` on interior faces). ``neighbor`` is ``None`` on the boundary.
    """

    endpoints: tuple[int, int]
    owner: int
    neighbor: int | None
    normal: tuple[float, float]
    length: float

    @property
    def is_boundary(self) -> bool:
        return self.neighbor is None


def signed_area(pts: np.ndarray) -> float:
    x, y = pts[:, 0], pts[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))


def polygon_centroid(pts: np.ndarray) -> np.ndarray:
    x, y = pts[:, 0], pts[:, 1]
    xn, yn = np.roll(x, -1), np.roll(y, -1)
    cross = x * yn - xn * y
    a = 0.5 * cross.sum()
    cx = ((x + xn) * cross).sum() / (6.0 * a)
    cy = ((y + yn) * cross).sum() / (6.0 * a)
    return np.array([cx, cy])


def _segments_cross(p1, p2, p3, p4) -> bool:
    """Proper intersection test for two segments that share no endpoint."""

    def orient(a, b, c):
        return (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])

    d1 = orient(p3, p4, p1)
    d2 = orient(p3, p4, p2)
    d3 = orient(p1, p2, p3)
    d4 = orient(p1, p2, p4)
    return (d1 * d2 < 0) and (d3 * d4 < 0)


def is_simple(pts: np.ndarray) -> bool:
    n = len(pts)
    if n < 3:
        return False
    if len({(float(p[0]), float(p[1])) for p in pts}) != n:
        return False
    for i in range(n):
        a, b = pts[i], pts[(i + 1) % n]
        for j in range(i + 2, n):
            if i == 0 and j == n - 1:
                continue
            c, d = pts[j], pts[(j + 1) % n]
            if _segments_cross(a, b, c, d):
                return False
    return True


def _validate_axonal(region: int, vec: np.ndarray, where: str) -> None:
    norm = float(np.hypot(vec[0], vec[1]))
    if region == WHITE:
        if abs(norm - 1.0) > AXONAL_TOL:
            raise MeshError(f"{where}: axonal vector on white element must be unit (norm {norm:.6g})")
    elif norm != 0.0 and abs(norm - 1.0) > AXONAL_TOL:
        raise MeshError(f"{where}: axonal vector must be zero or unit (norm {norm:.6g})")


@dataclass(frozen=True, eq=False)
class PolyMesh:
    vertices: np.ndarray
    elements: tuple[np.ndarray, ...]
    element_region: np.ndarray
    axonal: np.ndarray
    faces: tuple[Face, ...] = field(repr=False)
    reoriented: int = 0

    @classmethod
    def from_polygons(
        cls,
        vertices,
        elements,
        element_region=None,
        axonal=None,
        *,
        check: bool = True,
    ) -> "PolyMesh":
        """Build a mesh, orienting polygons counter-clockwise and deriving faces."""
        verts = np.ascontiguousarray(np.asarray(vertices, dtype=float).reshape(-1, 2))
        n_el = len(elements)
        region = (
            np.zeros(n_el, dtype=np.int64)
            if element_region is None
            else np.asarray(element_region, dtype=np.int64).copy()
        )
        ax = np.zeros((n_el, 2)) if axonal is None else np.asarray(axonal, dtype=float).reshape(n_el, 2).copy()
        polys = []
        flipped = 0
        for k, poly in enumerate(elements):
            idx = np.asarray(poly, dtype=np.int64)
            if idx.min() < 0 or idx.max() >= len(verts):
                raise MeshError(f"element {k}: vertex index out of range")
            area = signed_area(verts[idx])
            if area == 0.0:
                raise MeshError(f"element {k}: degenerate polygon (zero area)")
            if area < 0:
                idx = idx[::-1].copy()
                flipped += 1
            if check and not is_simple(verts[idx]):
                raise MeshError(f"element {k}: polygon is not simple")
            if region[k] not in (GREY, WHITE):
                raise MeshError(f"element {k}: region must be 0 (grey) or 1 (white)")
            _validate_axonal(int(region[k]), ax[k], f"element {k}")
            idx.setflags(write=False)
            polys.append(idx)
        region.setflags(write=False)
        ax.setflags(write=False)
        verts.setflags(write=False)
        faces = _build_faces(verts, polys)
        return cls(verts, tuple(polys), region, ax, faces, flipped)

    @property
    def n_elements(self) -> int:
        return len(self.elements)

    @property
    def interior_faces(self) -> list[Face]:
        return [f for f in self.faces if f.neighbor is not None]

    @property
    def boundary_faces(self) -> list[Face]:
        return [f for f in self.faces if f.neighbor is None]

    def element_points(self, k: int) -> np.ndarray:
        return self.vertices[self.elements[k]]

    def areas(self) -> np.ndarray:
        return np.array([signed_area(self.element_points(k)) for k in range(self.n_elements)])

    def centroids(self) -> np.ndarray:
        return np.array([polygon_centroid(self.element_points(k)) for k in range(self.n_elements)])

    def diameters(self) -> np.ndarray:
        """Element diameter h_K: the largest pairwise vertex distance."""
        out = np.empty(self.n_elements)
        for k in range(self.n_elements):
            p = self.element_points(k)
            d = p[:, None, :] - p[None, :, :]
            out[k] = np.sqrt((d**2).sum(-1).max())
        return out

    def total_area(self) -> float:
        return float(self.areas().sum())

    def adjacency(self):
        """Element adjacency graph over interior faces (symmetric CSR)."""
        pairs = np.array([(f.owner, f.neighbor) for f in self.interior_faces], dtype=np.int64).reshape(-1, 2)
        rows = np.r_[pairs[:, 0], pairs[:, 1]]
        cols = np.r_[pairs[:, 1], pairs[:, 0]]
        n = self.n_elements
        return coo_matrix((np.ones(len(rows)), (rows, cols)), shape=(n, n)).tocsr()

    def same_as(self, other: "PolyMesh") -> bool:
        return (
            np.array_equal(self.vertices, other.vertices)
            and len(self.elements) == len(other.elements)
            and all(np.array_equal(a, b) for a, b in zip(self.elements, other.elements))
            and np.array_equal(self.element_region, other.element_region)
            and np.array_equal(self.axonal, other.axonal)
        )


def _build_faces(verts: np.ndarray, polys: Sequence[np.ndarray]) -> tuple[Face, ...]:
    edges: dict[tuple[int, int], list[tuple[int, int, int]]] = {}
    order: list[tuple[int, int]] = []
    for k, idx in enumerate(polys):
        n = len(idx)
        for i in range(n):
            a, b = int(idx[i]), int(idx[(i + 1) % n])
            key = (a, b) if a < b else (b, a)
            if key not in edges:
                edges[key] = []
                order.append(key)
            edges[key].append((k, a, b))
    faces = []
    for key in order:
        users = edges[key]
        if len(users) > 2:
            raise MeshError(f"edge {key} shared by {len(users)} elements")
        owner, a, b = users[0]
        if len(users) == 2:
            other, a2, b2 = users[1]
            if (a2, b2) == (a, b):
                raise MeshError(f"elements {owner} and {other} overlap along edge {key}")
            neighbor = other
        else:
            neighbor = None
        t = verts[b] - verts[a]
        length = float(np.hypot(t[0], t[1]))
        if length == 0.0:
            raise MeshError(f"zero-length edge {key}")
        # outward normal of a CCW polygon edge a->b
        normal = (float(t[1] / length), float(-t[0] / length))
        faces.append(Face((a, b), owner, neighbor, normal, length))
    return tuple(faces)


# ---------------------------------------------------------------------------
# generators


def all_grey(cx: float, cy: float):
    return GREY, (0.0, 0.0)


def split_rule(x_split: float, direction=(1.0, 0.0)) -> RegionRule:
    """Grey matter left of ``x_split``, white matter (with fibres along
    ``direction``) to the right."""
    d = np.asarray(direction, dtype=float)
    d = d / np.linalg.norm(d)
    ad = (float(d[0]), float(d[1]))

    def rule(cx, cy):
        if cx < x_split:
            return GREY, (0.0, 0.0)
        return WHITE, ad

    return rule


def _apply_rule(centroids: np.ndarray, rule: RegionRule):
    region = np.empty(len(centroids), dtype=np.int64)
    ax = np.empty((len(centroids), 2))
    for k, (cx, cy) in enumerate(centroids):
        r, a = rule(float(cx), float(cy))
        region[k] = r
        ax[k] = a
    return region, ax


def generate_structured(nx: int, ny: int, width: float = 1.0, height: float = 1.0,
                        region_rule: RegionRule | None = None, *, origin=(0.0, 0.0)) -> PolyMesh:
    """Axis-aligned ``nx`` x ``ny`` quadrilateral grid on ``[0, width] x [0, height]``."""
    if nx < 1 or ny < 1:
        raise MeshError("nx and ny must be at least 1")
    if not (width > 0 and height > 0):
        raise MeshError("width and height must be positive")
    xs = origin[0] + np.linspace(0.0, width, nx + 1)
    ys = origin[1] + np.linspace(0.0, height, ny + 1)
    X, Y = np.meshgrid(xs, ys, indexing="xy")
    verts = np.column_stack([X.ravel(), Y.ravel()])

    def vid(i, j):
        return j * (nx + 1) + i

    elems = [[vid(i, j), vid(i + 1, j), vid(i + 1, j + 1), vid(i, j + 1)] for j in range(ny) for i in range(nx)]
    cent = np.array([[0.5 * (xs[i] + xs[i + 1]), 0.5 * (ys[j] + ys[j + 1])] for j in range(ny) for i in range(nx)])
    region, ax = _apply_rule(cent, region_rule or all_grey)
    return PolyMesh.from_polygons(verts, elems, region, ax, check=False)


def generate_triangles(nx: int, ny: int, width: float = 1.0, height: float = 1.0,
                       region_rule: RegionRule | None = None) -> PolyMesh:
    """Structured grid with every quad split along alternating diagonals."""
    quad = generate_structured(nx, ny, width, height)
    tris = []
    for k, q in enumerate(quad.elements):
        i, j = k % nx, k // nx
        a, b, c, d = (int(v) for v in q)
        if (i + j) % 2 == 0:
            tris += [[a, b, c], [a, c, d]]
        else:
            tris += [[a, b, d], [b, c, d]]
    verts = np.asarray(quad.vertices)
    cent = np.array([verts[t].mean(axis=0) for t in tris])
    region, ax = _apply_rule(cent, region_rule or all_grey)
    return PolyMesh.from_polygons(verts, tris, region, ax, check=False)


def generate_disc(n_rings: int, radius: float = 1.0, center=(0.0, 0.0),
                  region_rule: RegionRule | None = None) -> PolyMesh:
    """Delaunay triangulation of concentric rings of points.

    Ring ``r`` carries ``6 r`` points, so the disc has ``6 n_rings**2``
    triangles. The boundary is the polygon inscribed in the circle.
    """
    if n_rings < 1:
        raise MeshError("n_rings must be at least 1")
    pts = [np.zeros(2)]
    for r in range(1, n_rings + 1):
        m = 6 * r
        th = 2 * np.pi * np.arange(m) / m + (0.5 * np.pi / m if r % 2 else 0.0)
        pts.append(np.column_stack([r * np.cos(th), r * np.sin(th)]) * (radius / n_rings))
    verts = np.vstack([np.atleast_2d(p) for p in pts]) + np.asarray(center, dtype=float)
    tri = Delaunay(verts)
    simplices = tri.simplices
    keep = [s for s in simplices if abs(signed_area(verts[s])) > 1e-14 * radius**2]
    cent = np.array([verts[s].mean(axis=0) for s in keep])
    region, ax = _apply_rule(cent, region_rule or all_grey)
    return PolyMesh.from_polygons(verts, keep, region, ax, check=False)


# ---------------------------------------------------------------------------
# agglomeration


def _region_boundary(tri_ids, tris: Sequence[np.ndarray]) -> list[int] | None:
    """Trace the boundary of a union of CCW triangles.

    Returns the CCW vertex loop, or ``None`` when the union is not a single
    simple polygon (hole, pinch vertex).
    """
    count: dict[tuple[int, int], int] = {}
    for t in tri_ids:
        v = tris[t]
        for i in range(3):
            a, b = int(v[i]), int(v[(i + 1) % 3])
            key = (a, b) if a < b else (b, a)
            count[key] = count.get(key, 0) + 1
    succ: dict[int, int] = {}
    for t in tri_ids:
        v = tris[t]
        for i in range(3):
            a, b = int(v[i]), int(v[(i + 1) % 3])
            key = (a, b) if a < b else (b, a)
            if count[key] == 1:
                if a in succ:
                    return None
                succ[a] = b
    start = min(succ)
    loop = [start]
    v = succ[start]
    while v != start:
        loop.append(v)
        v = succ[v]
        if len(loop) > len(succ):
            return None
    if len(loop) != len(succ):
        return None
    return loop


def _fan_areas(pts: np.ndarray, c: np.ndarray) -> np.ndarray:
    nxt = np.roll(pts, -1, axis=0)
    return 0.5 * ((pts[:, 0] - c[0]) * (nxt[:, 1] - c[1]) - (nxt[:, 0] - c[0]) * (pts[:, 1] - c[1]))


def fan_center(pts: np.ndarray, rel_tol: float = 1e-10) -> np.ndarray | None:
    """A point from which the fan triangulation of a CCW polygon is valid.

    The area centroid is used when it works; otherwise the Chebyshev centre
    of the polygon kernel (the point deepest inside all edge half-planes).
    Returns ``None`` for polygons that are not star-shaped.
    """
    pts = np.asarray(pts, dtype=float)
    area = signed_area(pts)
    c = polygon_centroid(pts)
    if np.all(_fan_areas(pts, c) > rel_tol * area):
        return c
    nxt = np.roll(pts, -1, axis=0)
    t = nxt - pts
    length = np.hypot(t[:, 0], t[:, 1])
    inward = np.column_stack([-t[:, 1], t[:, 0]]) / length[:, None]
    # maximise r subject to inward_i . (x - a_i) >= r
    A_ub = np.column_stack([-inward, np.ones(len(pts))])
    b_ub = -np.einsum("ij,ij->i", inward, pts)
    res = linprog([0.0, 0.0, -1.0], A_ub=A_ub, b_ub=b_ub, bounds=[(None, None)] * 3, method="highs")
    if res.status != 0:
        return None
    x = res.x[:2]
    if np.all(_fan_areas(pts, x) > rel_tol * area):
        return x
    return None


def _fan_ok(pts: np.ndarray, rel_tol: float = 1e-10) -> bool:
    return fan_center(pts, rel_tol) is not None


def _check_connected(mesh: PolyMesh) -> None:
    n_comp, labels = connected_components(mesh.adjacency(), directed=False)
    if n_comp > 1:
        sizes = np.bincount(labels)
        main = int(np.argmax(sizes))
        other = next(c for c in range(n_comp) if c != main)
        members = np.flatnonzero(labels == other)
        raise MeshError(
            f"input mesh is disconnected: {n_comp} components; component {other} "
            f"(elements {members[:10].tolist()}{'...' if len(members) > 10 else ''}) "
            f"is not connected to component {main}"
        )


def agglomerate(tri: PolyMesh, target_elements: int, seed: int = 0) -> PolyMesh:
    """Merge a conforming triangle mesh into about ``target_elements`` polygons.

    Seeded greedy graph growing: seeds are picked by farthest-point
    sampling from a random first triangle, then regions grow round-robin,
    each absorbing the unassigned neighbour closest to its seed. A triangle is
    only absorbed when the union stays a simple star-shaped polygon, so every
    output element admits a valid fan quadrature. Triangles that no region
    can take start new regions; surplus regions are merged into neighbours
    (or handed out triangle by triangle) until the count is within 10%.
    """
    if any(len(e) != 3 for e in tri.elements):
        raise MeshError("agglomerate expects a triangle mesh")
    n = tri.n_elements
    if not 1 <= target_elements <= n:
        raise MeshError(f"target_elements must be in [1, {n}]")
    _check_connected(tri)
    tris = tri.elements
    if target_elements == n:
        groups = [[t] for t in range(n)]
        return _assemble_agglomerates(tri, groups)

    adj = tri.adjacency()
    indptr, indices = adj.indptr, adj.indices
    cent = tri.centroids()
    rng = np.random.default_rng(seed)

    seeds = [int(rng.integers(n))]
    dist = np.linalg.norm(cent - cent[seeds[0]], axis=1)
    while len(seeds) < target_elements:
        nxt = int(np.argmax(dist))
        if dist[nxt] == 0.0:
            break
        seeds.append(nxt)
        dist = np.minimum(dist, np.linalg.norm(cent - cent[nxt], axis=1))

    owner = np.full(n, -1, dtype=np.int64)
    groups: list[list[int]] = []
    for s in seeds:
        owner[s] = len(groups)
        groups.append([s])
    anchors = [cent[s] for s in seeds]
    active = list(range(len(groups)))

    def try_grow(g: int) -> bool:
        members = groups[g]
        cand = set()
        for t in members:
            for u in indices[indptr[t]:indptr[t + 1]]:
                if owner[u] < 0:
                    cand.add(int(u))
        if not cand:
            return False
        ranked = sorted(cand, key=lambda u: (float(np.sum((cent[u] - anchors[g]) ** 2)), u))
        for u in ranked:
            loop = _region_boundary(members + [u], tris)
            if loop is None or not _fan_ok(tri.vertices[loop]):
                continue
            members.append(u)
            owner[u] = g
            return True
        return False

    while True:
        while active:
            active = [g for g in active if try_grow(g)]
        free = np.flatnonzero(owner < 0)
        if len(free) == 0:
            break
        # orphan: start a new region at the free triangle farthest from all anchors
        d = np.min(np.linalg.norm(cent[free][:, None, :] - np.asarray(anchors)[None], axis=2), axis=1)
        t = int(free[np.argmax(d)])
        owner[t] = len(groups)
        groups.append([t])
        anchors.append(cent[t])
        active = [len(groups) - 1]

    groups = _merge_small(tri, groups, owner, target_elements)
    return _assemble_agglomerates(tri, groups)


def _merge_small(tri: PolyMesh, groups, owner, target: int):
    """Merge the smallest regions into neighbours until the count is near target."""
    tris = tri.elements
    adj = tri.adjacency()
    areas = tri.areas()
    alive = {g: list(m) for g, m in enumerate(groups)}
    limit = int(np.floor(1.1 * target))
    failed: set[int] = set()
    while len(alive) > limit:
        order = sorted((g for g in alive if g not in failed), key=lambda g: (sum(areas[t] for t in alive[g]), g))
        if not order:
            break
        g = order[0]
        neigh = set()
        for t in alive[g]:
            for u in adj.indices[adj.indptr[t]:adj.indptr[t + 1]]:
                h = int(owner[u])
                if h != g:
                    neigh.add(h)
        merged = False
        for h in sorted(neigh, key=lambda h: (sum(areas[t] for t in alive[h]), h)):
            union = alive[h] + alive[g]
            loop = _region_boundary(union, tris)
            if loop is not None and _fan_ok(tri.vertices[loop]):
                alive[h] = union
                for t in alive[g]:
                    owner[t] = h
                del alive[g]
                merged = True
                break
        if not merged and not _dissolve(tri, alive, owner, g):
            failed.add(g)
    return [alive[g] for g in sorted(alive)]


def _valid_union(tri: PolyMesh, members) -> bool:
    loop = _region_boundary(members, tri.elements)
    return loop is not None and _fan_ok(tri.vertices[loop])


def _dissolve(tri: PolyMesh, alive, owner, g: int) -> bool:
    """Hand the triangles of region ``g`` one by one to adjacent regions.

    Used when no whole-region merge keeps a valid polygon. Every
    intermediate state keeps all regions valid; on failure nothing changes.
    """
    adj = tri.adjacency()
    moves = []
    rest = list(alive[g])
    while rest:
        progress = False
        for t in sorted(rest):
            remaining = [u for u in rest if u != t]
            if remaining and not _valid_union(tri, remaining):
                continue
            for u in adj.indices[adj.indptr[t]:adj.indptr[t + 1]]:
                h = int(owner[u])
                if h == g or h not in alive:
                    continue
                if _valid_union(tri, alive[h] + [t]):
                    alive[h].append(t)
                    owner[t] = h
                    moves.append((t, h))
                    rest = remaining
                    progress = True
                    break
            if progress:
                break
        if not progress:
            for t, h in reversed(moves):
                alive[h].remove(t)
                owner[t] = g
            return False
        alive[g] = rest
    del alive[g]
    return True


def _assemble_agglomerates(tri: PolyMesh, groups) -> PolyMesh:
    areas = tri.areas()
    polys, region, ax = [], [], []
    for members in groups:
        loop = _region_boundary(members, tri.elements)
        if loop is None:
            raise MeshError("agglomerate is not a simple polygon")
        polys.append(loop)
        tags = tri.element_region[members]
        w = areas[members]
        white = float(w[tags == WHITE].sum())
        grey = float(w[tags == GREY].sum())
        r = WHITE if white > grey else GREY
        region.append(r)
        if r == WHITE:
            vecs = tri.axonal[members][tags == WHITE]
            ref = vecs[0]
            signs = np.where(vecs @ ref < 0, -1.0, 1.0)
            v = (vecs * (signs * w[tags == WHITE])[:, None]).sum(axis=0)
            nv = np.linalg.norm(v)
            ax.append(v / nv if nv > 0 else ref)
        else:
            ax.append(np.zeros(2))
    used = np.unique(np.concatenate([np.asarray(p) for p in polys]))
    remap = -np.ones(len(tri.vertices), dtype=np.int64)
    remap[used] = np.arange(len(used))
    verts = np.asarray(tri.vertices)[used]
    polys = [remap[np.asarray(p)] for p in polys]
    return PolyMesh.from_polygons(verts, polys, region, ax, check=False)


# ---------------------------------------------------------------------------
# file IO


def save_mesh(mesh: PolyMesh, path) -> None:
    lines = ["#vertices"]
    lines += [f"{x:.17g} {y:.17g}" for x, y in mesh.vertices]
    lines.append("#elements")
    for k, poly in enumerate(mesh.elements):
        ax, ay = mesh.axonal[k]
        ids = " ".join(str(int(v)) for v in poly)
        lines.append(f"{len(poly)} {ids} {int(mesh.element_region[k])} {ax:.17g} {ay:.17g}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_mesh(path) -> PolyMesh:
    """Read the text mesh format; polygons given clockwise are reoriented."""
    text = Path(path).read_text(encoding="utf-8")
    section = None
    seen = set()
    verts: list[tuple[float, float]] = []
    elems, region, ax, elem_lines = [], [], [], []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            name = line[1:].strip()
            if name not in ("vertices", "elements"):
                raise MeshFormatError(f"unknown section header {line!r}", lineno)
            if name in seen:
                raise MeshFormatError(f"duplicate section {line!r}", lineno)
            if name == "elements" and "vertices" not in seen:
                raise MeshFormatError("#elements before #vertices", lineno)
            seen.add(name)
            section = name
            continue
        tok = line.split()
        if section is None:
            raise MeshFormatError("data before any section header", lineno)
        try:
            if section == "vertices":
                if len(tok) != 2:
                    raise MeshFormatError(f"expected 'x y', got {len(tok)} fields", lineno)
                verts.append((float(tok[0]), float(tok[1])))
            else:
                k = int(tok[0])
                if k < 3:
                    raise MeshFormatError("polygon needs at least 3 vertices", lineno)
                if len(tok) != k + 4:
                    raise MeshFormatError(f"expected {k + 4} fields, got {len(tok)}", lineno)
                ids = [int(t) for t in tok[1:k + 1]]
                r = int(tok[k + 1])
                a = (float(tok[k + 2]), float(tok[k + 3]))
        except ValueError as exc:
            if isinstance(exc, MeshFormatError):
                raise
            raise MeshFormatError(f"malformed number ({exc})", lineno) from None
        if section == "elements":
            for v in ids:
                if v < 0 or v >= len(verts):
                    raise MeshFormatError(f"vertex index out of range ({v})", lineno)
            if r not in (GREY, WHITE):
                raise MeshFormatError(f"region must be 0 or 1, got {r}", lineno)
            try:
                _validate_axonal(r, np.asarray(a), "axonal vector")
            except MeshError as exc:
                raise MeshFormatError(str(exc), lineno) from None
            pts = np.asarray([verts[v] for v in ids])
            if signed_area(pts) == 0.0:
                raise MeshFormatError("degenerate polygon (zero area)", lineno)
            if not is_simple(pts if signed_area(pts) > 0 else pts[::-1]):
                raise MeshFormatError("polygon is not simple", lineno)
            elems.append(ids)
            region.append(r)
            ax.append(a)
            elem_lines.append(lineno)
    if "vertices" not in seen or "elements" not in seen:
        raise MeshFormatError("missing #vertices or #elements section")
    if not elems:
        raise MeshFormatError("mesh has no elements")
    mesh = PolyMesh.from_polygons(verts, elems, region, ax, check=False)
    if mesh.reoriented:
        warnings.warn(f"{path}: {mesh.reoriented} clockwise polygon(s) reoriented to CCW", stacklevel=2)
    return mesh
