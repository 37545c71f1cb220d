"""Structured polar triangulations of disk domains with exact circle conformity.

The solver domains are disks B_R carrying a ladder of concentric material
interfaces (lens layers, cloak shells).  A structured polar mesh -- rings of
vertices at shared angles, quads split into triangles, a fan at the center --
guarantees that element edges conform exactly to every declared interface
circle and that mesh generation is deterministic: identical inputs produce
bit-identical meshes.

Ring placement matches the radial spacing to the local arc length so element
aspect ratios stay near one away from the center (the center fan is inevitably
slivered; it covers a vanishing area).  A grading exponent concentrates rings
toward interface circles, where sign-changing media drive the largest field
gradients.

Small off-center disk inclusions (objects sitting on a circle) are handled by
tagging plus one level of local red/green refinement rather than boundary
fitting; edge midpoints created on an interface circle or the outer boundary
are snapped back to the circle so conformity survives refinement.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

__all__ = [
    "Mesh",
    "MeshLocator",
    "build_annular_mesh",
    "embed_disk_inclusions",
    "triangle_areas",
    "triangle_centroids",
    "max_edge_length",
]

_CIRCLE_TOL = 1e-9


@dataclass(frozen=True)
class Mesh:
    """Conforming triangulation of a disk with region bookkeeping.

    Attributes:
        vertices: (nv, 2) float coordinates.
        triangles: (nt, 3) vertex indices, counterclockwise.
        region_tag: (nt,) annulus index; 0 is the innermost disk, increasing
            outward between consecutive interface circles.
        inclusion_tag: (nt,) index into the embedded inclusion list, -1 if the
            triangle belongs to no inclusion.
        boundary_edges: (nb, 2) vertex pairs lying on the outer boundary.
        boundary_tag: (nb,) integer tag per boundary edge (1 = outer circle).
        interface_circles: radii the element edges conform to.
        outer_radius: radius of the meshed disk.
    """

    vertices: np.ndarray
    triangles: np.ndarray
    region_tag: np.ndarray
    inclusion_tag: np.ndarray
    boundary_edges: np.ndarray
    boundary_tag: np.ndarray
    interface_circles: tuple[float, ...]
    outer_radius: float

    def __post_init__(self) -> None:
        for arr in (
            self.vertices,
            self.triangles,
            self.region_tag,
            self.inclusion_tag,
            self.boundary_edges,
            self.boundary_tag,
        ):
            arr.setflags(write=False)

    @property
    def num_vertices(self) -> int:
        return self.vertices.shape[0]

    @property
    def num_triangles(self) -> int:
        return self.triangles.shape[0]

    def boundary_vertices(self) -> np.ndarray:
        """Indices of vertices on the outer boundary, sorted."""
        return np.unique(self.boundary_edges)

    def element_radii(self) -> np.ndarray:
        """Distance of each triangle centroid from the origin."""
        return np.linalg.norm(triangle_centroids(self), axis=1)

    def region_of_radius(self, radius: float) -> int:
        """Annulus index containing the given radius."""
        return int(np.searchsorted(np.asarray(self.interface_circles), radius))

    def mesh_size(self) -> float:
        return max_edge_length(self)


def triangle_areas(mesh: Mesh) -> np.ndarray:
    """Signed areas; positive for counterclockwise triangles."""
    p = mesh.vertices[mesh.triangles]
    d1 = p[:, 1] - p[:, 0]
    d2 = p[:, 2] - p[:, 0]
    return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])


def triangle_centroids(mesh: Mesh) -> np.ndarray:
    return mesh.vertices[mesh.triangles].mean(axis=1)


def max_edge_length(mesh: Mesh) -> float:
    p = mesh.vertices[mesh.triangles]
    e = np.concatenate(
        [p[:, 1] - p[:, 0], p[:, 2] - p[:, 1], p[:, 0] - p[:, 2]], axis=0
    )
    return float(np.max(np.hypot(e[:, 0], e[:, 1])))


def _grade(t: np.ndarray, g: float, left: bool, right: bool) -> np.ndarray:
    """Map uniform t in [0,1] to graded positions clustering at flagged ends."""
    if g == 1.0 or (not left and not right):
        return t
    if left and right:
        tg = t**g
        return tg / (tg + (1.0 - t) ** g)
    if left:
        return t**g
    return 1.0 - (1.0 - t) ** g


def _band_rings(
    a: float,
    b: float,
    angular_count: int,
    grading: float,
    left_iface: bool,
    right_iface: bool,
    aspect: float,
) -> np.ndarray:
    """Interior ring radii for the band (a, b), excluding both endpoints."""
    target = aspect * 2.0 * np.pi * (0.5 * (a + b)) / angular_count
    n = max(1, int(np.ceil((b - a) / target)))
    t = np.arange(1, n) / n
    return a + (b - a) * _grade(t, grading, left_iface, right_iface)


def build_annular_mesh(
    outer_radius: float,
    interface_radii: Sequence[float],
    angular_count: int,
    radial_grading: float = 1.0,
    aspect: float = 1.3,
    theta_offset: float = 0.0,
) -> Mesh:
    """Triangulate B_R conforming to the given concentric interface circles.

    Args:
        outer_radius: radius R of the meshed disk.
        interface_radii: strictly increasing radii, all < R; every element
            edge chain follows these circles exactly.
        angular_count: sectors per ring (>= 16); controls the mesh size h.
        radial_grading: >= 1; larger values concentrate rings toward
            interface circles within each band.
        aspect: target ratio of radial spacing to arc length.
        theta_offset: rotation of the sector pattern; a half-sector offset
            decorrelates discretization artifacts between two meshes.

    Raises:
        ValueError: on non-increasing radii, radii outside (0, R), too few
            sectors, or non-positive grading.
    """
    radii = [float(r) for r in interface_radii]
    if angular_count < 16:
        raise ValueError(f"angular_count must be >= 16, got {angular_count}")
    if radial_grading <= 0:
        raise ValueError("radial_grading must be positive")
    if any(r2 <= r1 for r1, r2 in zip(radii, radii[1:])):
        raise ValueError(f"interface radii must be strictly increasing: {radii}")
    if radii and (radii[0] <= 0 or radii[-1] >= outer_radius):
        raise ValueError(
            f"interface radii must lie strictly inside (0, {outer_radius}): {radii}"
        )

    anchors = [0.0] + radii + [outer_radius]
    iface_set = set(radii)
    ring_radii: list[float] = []
    # Innermost band: replace rings below the fan radius with a center fan.
    b0 = anchors[1]
    # Fan spokes set the local h at the center; cap them by the outer-ring
    # target spacing so h still halves when the sector count doubles.
    fan_radius = min(0.5 * b0, aspect * 2.0 * np.pi * outer_radius / angular_count)
    inner = _band_rings(
        fan_radius,
        b0,
        angular_count,
        radial_grading,
        left_iface=False,
        right_iface=b0 in iface_set,
        aspect=aspect,
    )
    ring_radii.append(fan_radius)
    ring_radii.extend(inner.tolist())
    ring_radii.append(b0)
    for a, b in zip(anchors[1:], anchors[2:]):
        mids = _band_rings(
            a,
            b,
            angular_count,
            radial_grading,
            left_iface=a in iface_set,
            right_iface=b in iface_set,
            aspect=aspect,
        )
        ring_radii.extend(mids.tolist())
        ring_radii.append(b)

    n_ang = angular_count
    theta = 2.0 * np.pi * np.arange(n_ang) / n_ang + theta_offset
    cos_t, sin_t = np.cos(theta), np.sin(theta)

    n_rings = len(ring_radii)
    verts = np.empty((1 + n_rings * n_ang, 2))
    verts[0] = 0.0
    for k, rho in enumerate(ring_radii):
        base = 1 + k * n_ang
        verts[base : base + n_ang, 0] = rho * cos_t
        verts[base : base + n_ang, 1] = rho * sin_t

    tris: list[tuple[int, int, int]] = []
    # Center fan against the first ring.
    for j in range(n_ang):
        jn = (j + 1) % n_ang
        tris.append((0, 1 + j, 1 + jn))
    # Quad bands split along alternating diagonals to avoid a global bias.
    for k in range(n_rings - 1):
        lo = 1 + k * n_ang
        hi = 1 + (k + 1) * n_ang
        for j in range(n_ang):
            jn = (j + 1) % n_ang
            a_, b_, c_, d_ = lo + j, lo + jn, hi + j, hi + jn
            if (j + k) % 2 == 0:
                tris.append((a_, c_, d_))
                tris.append((a_, d_, b_))
            else:
                tris.append((a_, c_, b_))
                tris.append((b_, c_, d_))

    triangles = np.asarray(tris, dtype=np.int32)
    vertices = verts

    centroids = vertices[triangles].mean(axis=1)
    rads = np.hypot(centroids[:, 0], centroids[:, 1])
    region_tag = np.searchsorted(np.asarray(radii), rads).astype(np.int32)

    top = 1 + (n_rings - 1) * n_ang
    be = np.array(
        [(top + j, top + (j + 1) % n_ang) for j in range(n_ang)], dtype=np.int32
    )
    mesh = Mesh(
        vertices=vertices,
        triangles=triangles,
        region_tag=region_tag,
        inclusion_tag=np.full(len(triangles), -1, dtype=np.int32),
        boundary_edges=be,
        boundary_tag=np.ones(len(be), dtype=np.int32),
        interface_circles=tuple(radii),
        outer_radius=float(outer_radius),
    )
    _validate(mesh)
    return mesh


def _validate(mesh: Mesh) -> None:
    areas = triangle_areas(mesh)
    if not np.all(areas > 0):
        bad = int(np.argmin(areas))
        raise ValueError(f"triangle {bad} has non-positive area {areas[bad]:.3e}")
    vr = np.hypot(mesh.vertices[:, 0], mesh.vertices[:, 1])
    tri_r = vr[mesh.triangles]
    for rho in mesh.interface_circles:
        tol = _CIRCLE_TOL * rho
        straddle = (tri_r.min(axis=1) < rho - tol) & (tri_r.max(axis=1) > rho + tol)
        if straddle.any():
            raise ValueError(
                f"{int(straddle.sum())} triangles straddle interface circle r={rho}"
            )


def _snap_midpoint(
    mid: np.ndarray, ra: float, rb: float, circles: Sequence[float], outer: float
) -> np.ndarray:
    """Keep refinement conforming: project midpoints that fall on the wrong
    side of a circle (chords of the outside region dip inside) back onto it,
    and keep boundary chords on the outer circle."""
    nrm = np.hypot(mid[0], mid[1])
    if nrm == 0.0:
        return mid
    for rho in circles:
        tol = _CIRCLE_TOL * rho
        if ra >= rho - tol and rb >= rho - tol and nrm < rho:
            return mid * (rho / nrm)
    tol = _CIRCLE_TOL * outer
    if abs(ra - outer) <= tol and abs(rb - outer) <= tol:
        return mid * (outer / nrm)
    return mid


def embed_disk_inclusions(
    mesh: Mesh,
    centers: Sequence[tuple[float, float]],
    radius: float,
    levels: int = 1,
) -> Mesh:
    """Tag and locally refine small disk inclusions centered on interface circles.

    Triangles meeting B(c, radius) are red-refined ``levels`` times (with green
    closure to stay conforming); afterwards triangles whose centroid falls in
    inclusion i get ``inclusion_tag == i``.  Conformity to the inclusion circle
    itself is only within one element layer, which is all the rate experiments
    need at small radius.

    Raises:
        ValueError: if a center does not sit on a declared interface circle,
            or the radius reaches the neighbouring interface (layer width).
    """
    if radius < 0:
        raise ValueError("inclusion radius must be nonnegative")
    if radius == 0.0 or not centers:
        return mesh
    circles = np.asarray(mesh.interface_circles)
    for c in centers:
        rc = float(np.hypot(c[0], c[1]))
        k = int(np.argmin(np.abs(circles - rc))) if len(circles) else -1
        if k < 0 or abs(circles[k] - rc) > 1e-9 * max(rc, 1.0):
            raise ValueError(f"inclusion center {c} is not on a declared circle")
        gaps = [circles[k] - circles[k - 1] if k > 0 else circles[k]]
        if k + 1 < len(circles):
            gaps.append(circles[k + 1] - circles[k])
        gaps.append(mesh.outer_radius - circles[k])
        if radius >= min(gaps):
            raise ValueError(
                f"inclusion radius {radius} reaches the neighbouring layer "
                f"(width {min(gaps):.3g})"
            )

    out = mesh
    for _ in range(levels):
        marked = _mark_near_disks(out, centers, radius)
        if not marked.any():
            break
        out = _refine(out, marked)

    cent = triangle_centroids(out)
    inc = np.full(out.num_triangles, -1, dtype=np.int32)
    for i, c in enumerate(centers):
        inside = np.hypot(cent[:, 0] - c[0], cent[:, 1] - c[1]) < radius
        inc[inside] = i
    object.__setattr__(out, "inclusion_tag", inc)
    out.inclusion_tag.setflags(write=False)
    _validate(out)
    return out


def _mark_near_disks(
    mesh: Mesh, centers: Sequence[tuple[float, float]], radius: float
) -> np.ndarray:
    p = mesh.vertices[mesh.triangles]
    marked = np.zeros(mesh.num_triangles, dtype=bool)
    for c in centers:
        d = np.hypot(p[..., 0] - c[0], p[..., 1] - c[1])
        cent = triangle_centroids(mesh)
        dc = np.hypot(cent[:, 0] - c[0], cent[:, 1] - c[1])
        marked |= (d.min(axis=1) < radius) | (dc < radius)
    return marked


def _refine(mesh: Mesh, red: np.ndarray) -> Mesh:
    """One conforming red/green refinement sweep of the marked triangles."""
    tris = mesh.triangles
    nt = mesh.num_triangles

    def edges_of(t):
        a, b, c = int(tris[t, 0]), int(tris[t, 1]), int(tris[t, 2])
        return ((a, b), (b, c), (c, a))

    red = red.copy()
    split_edges: set[tuple[int, int]] = set()
    # Closure: an element with 2+ split edges must itself go red.
    while True:
        split_edges = set()
        for t in range(nt):
            if red[t]:
                for e in edges_of(t):
                    split_edges.add(tuple(sorted(e)))
        changed = False
        for t in range(nt):
            if red[t]:
                continue
            cnt = sum(tuple(sorted(e)) in split_edges for e in edges_of(t))
            if cnt >= 2:
                red[t] = True
                changed = True
        if not changed:
            break

    verts = [mesh.vertices]
    vr = np.hypot(mesh.vertices[:, 0], mesh.vertices[:, 1])
    mid_index: dict[tuple[int, int], int] = {}
    new_pts = []
    next_id = mesh.num_vertices
    for e in sorted(split_edges):
        mid = 0.5 * (mesh.vertices[e[0]] + mesh.vertices[e[1]])
        mid = _snap_midpoint(
            mid, vr[e[0]], vr[e[1]], mesh.interface_circles, mesh.outer_radius
        )
        mid_index[e] = next_id
        new_pts.append(mid)
        next_id += 1
    if new_pts:
        verts.append(np.asarray(new_pts))
    vertices = np.concatenate(verts, axis=0)

    new_tris: list[tuple[int, int, int]] = []
    new_region: list[int] = []
    for t in range(nt):
        a, b, c = (int(v) for v in tris[t])
        tag = int(mesh.region_tag[t])
        if red[t]:
            mab = mid_index[tuple(sorted((a, b)))]
            mbc = mid_index[tuple(sorted((b, c)))]
            mca = mid_index[tuple(sorted((c, a)))]
            children = [(a, mab, mca), (mab, b, mbc), (mca, mbc, c), (mab, mbc, mca)]
        else:
            have = [
                (i, tuple(sorted(e)))
                for i, e in enumerate(edges_of(t))
                if tuple(sorted(e)) in split_edges
            ]
            if not have:
                children = [(a, b, c)]
            else:
                # Green split: one hanging node, bisect toward the far vertex.
                i, key = have[0]
                m = mid_index[key]
                far = (c, a, b)[i]
                e0, e1 = edges_of(t)[i]
                children = [(e0, m, far), (m, e1, far)]
        for ch in children:
            new_tris.append(ch)
            new_region.append(tag)

    triangles = np.asarray(new_tris, dtype=np.int32)
    region_tag = np.asarray(new_region, dtype=np.int32)

    # Fix orientation where midpoint snapping flipped a sliver.
    p = vertices[triangles]
    d1 = p[:, 1] - p[:, 0]
    d2 = p[:, 2] - p[:, 0]
    areas = 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])
    flip = areas < 0
    if flip.any():
        triangles[flip] = triangles[flip][:, [0, 2, 1]]

    edge_count: dict[tuple[int, int], int] = {}
    for tri in triangles:
        a, b, c = (int(v) for v in tri)
        for e in ((a, b), (b, c), (c, a)):
            key = tuple(sorted(e))
            edge_count[key] = edge_count.get(key, 0) + 1
    outer_r = mesh.outer_radius
    vr_new = np.hypot(vertices[:, 0], vertices[:, 1])
    be = [
        e
        for e, cnt in sorted(edge_count.items())
        if cnt == 1
        and abs(vr_new[e[0]] - outer_r) < 1e-9 * outer_r
        and abs(vr_new[e[1]] - outer_r) < 1e-9 * outer_r
    ]
    boundary_edges = np.asarray(be, dtype=np.int32)

    return Mesh(
        vertices=vertices,
        triangles=triangles,
        region_tag=region_tag,
        inclusion_tag=np.full(len(triangles), -1, dtype=np.int32),
        boundary_edges=boundary_edges,
        boundary_tag=np.ones(len(boundary_edges), dtype=np.int32),
        interface_circles=mesh.interface_circles,
        outer_radius=mesh.outer_radius,
    )


class MeshLocator:
    """Point location plus piecewise-linear interpolation on a mesh.

    Backed by matplotlib's trapezoid-map trifinder; points that fall just
    outside the mesh (polygonal boundary roundoff) are attached to the nearest
    triangle by centroid and their barycentric weights clamped.
    """

    def __init__(self, mesh: Mesh):
        import matplotlib.tri as mtri
        from scipy.spatial import cKDTree

        self.mesh = mesh
        self._tri = mtri.Triangulation(
            mesh.vertices[:, 0], mesh.vertices[:, 1], mesh.triangles
        )
        self._finder = self._tri.get_trifinder()
        self._tree = cKDTree(triangle_centroids(mesh))
        p = mesh.vertices[mesh.triangles]
        # Affine maps for barycentric coordinates of each triangle.
        T = np.stack([p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]], axis=-1)
        self._Tinv = np.linalg.inv(T)
        self._origin = p[:, 0]

    def locate(self, points: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(points)
        idx = np.asarray(self._finder(pts[:, 0], pts[:, 1]))
        missing = idx < 0
        if missing.any():
            _, nearest = self._tree.query(pts[missing])
            idx[missing] = nearest
        return idx

    def barycentric(self, points: np.ndarray, tri_idx: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(points)
        loc = np.einsum(
            "nij,nj->ni", self._Tinv[tri_idx], pts - self._origin[tri_idx]
        )
        lam = np.empty((len(pts), 3))
        lam[:, 1:] = loc
        lam[:, 0] = 1.0 - loc.sum(axis=1)
        return np.clip(lam, 0.0, 1.0)

    def interpolate(self, values: np.ndarray, points: np.ndarray) -> np.ndarray:
        """Evaluate the nodal field at arbitrary points."""
        pts = np.atleast_2d(points)
        idx = self.locate(pts)
        lam = self.barycentric(pts, idx)
        tri = self.mesh.triangles[idx]
        return np.einsum("ni,ni->n", lam, values[tri])
