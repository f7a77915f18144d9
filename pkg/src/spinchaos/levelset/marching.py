"""Level-surface extraction on the rotation group by marching tetrahedra.

The Euler chart is sampled on a product grid (periodic in phi and psi,
half-cell inset from the theta poles), each grid cell is split into six
tetrahedra sharing the main diagonal, and sign changes of f - t are
triangulated by linear interpolation along tetrahedron edges.  Triangle
areas are measured through the scaled matrix embedding P / sqrt(2), whose
Euclidean chords reproduce the bi-invariant metric all the area formulas
are written in; the two-column embedding into R^6 is attached to the mesh
for export and inspection.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..so3geom import euler_to_matrices
from ..spinfield import evaluate_grid

MIN_RESOLUTION = 16

# corner c of a cell has offsets (c & 1, (c >> 1) & 1, (c >> 2) & 1) in the
# (phi, theta, psi) axes
_CORNER_OFFSETS = np.array([[(c >> a) & 1 for a in range(3)] for c in range(8)],
                           dtype=float)

# six tetrahedra around the main diagonal 0-7, one per coordinate ordering
_TETS_LEX = ((0, 1, 3, 7), (0, 1, 5, 7), (0, 2, 3, 7),
             (0, 2, 6, 7), (0, 4, 5, 7), (0, 4, 6, 7))
# mirrored split (reflect the phi axis): diagonal 1-6
_TETS_ALT = tuple(tuple(v ^ 1 for v in tet) for tet in _TETS_LEX)

# tetrahedron edges by local vertex pair
_EDGE_VERTS = ((0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3))

# triangles (as edge triples) per sign case; case bit k set means vertex k
# is below the level
_CASE_TRIS = {
    1: ((0, 1, 2),), 14: ((0, 1, 2),),
    2: ((0, 3, 4),), 13: ((0, 3, 4),),
    4: ((1, 3, 5),), 11: ((1, 3, 5),),
    8: ((2, 4, 5),), 7: ((2, 4, 5),),
    3: ((1, 3, 4), (1, 4, 2)), 12: ((1, 3, 4), (1, 4, 2)),
    5: ((0, 3, 5), (0, 5, 2)), 10: ((0, 3, 5), (0, 5, 2)),
    6: ((0, 1, 5), (0, 5, 4)), 9: ((0, 1, 5), (0, 5, 4)),
}


class EulerGrid:
    """Product grid over the Euler chart with cached field values.

    Nodes: phi_j = -pi + j * dphi and psi_m = -pi + m * dpsi wrap around
    periodically; theta_k = (k + 1/2) * dtheta stays strictly interior, so
    the two half-cell slabs touching the poles are never meshed (their
    volume fraction is reported by theta_slab_volume_fraction).
    """

    def __init__(self, resolution):
        if np.ndim(resolution) == 0:
            resolution = (int(resolution),) * 3
        n_phi, n_theta, n_psi = (int(v) for v in resolution)
        for name, v in (("phi", n_phi), ("theta", n_theta), ("psi", n_psi)):
            if v < MIN_RESOLUTION:
                raise ValueError(
                    f"grid needs at least {MIN_RESOLUTION} nodes per axis, "
                    f"got {v} along {name}")
        self.resolution = (n_phi, n_theta, n_psi)
        self.phis = -math.pi + np.arange(n_phi) * (2.0 * math.pi / n_phi)
        self.thetas = (np.arange(n_theta) + 0.5) * (math.pi / n_theta)
        self.psis = -math.pi + np.arange(n_psi) * (2.0 * math.pi / n_psi)
        self._cache = None

    @property
    def steps(self):
        n_phi, n_theta, n_psi = self.resolution
        return (2.0 * math.pi / n_phi, math.pi / n_theta, 2.0 * math.pi / n_psi)

    @property
    def theta_slab_volume_fraction(self):
        """Haar-volume fraction of the two omitted polar slabs."""
        return 1.0 - math.cos(0.5 * self.steps[1])

    def field_values(self, realization):
        """Values of f = Re X on the grid, cached for the last realization."""
        if self._cache is not None and self._cache[0] is realization:
            return self._cache[1]
        values = evaluate_grid(realization, self.phis, self.thetas, self.psis).real
        self._cache = (realization, values)
        return values

    def __getstate__(self):
        return {"resolution": self.resolution}

    def __setstate__(self, state):
        self.__init__(state["resolution"])


@dataclass(frozen=True)
class LevelSurfaceMesh:
    """Extracted level surface: triangles in R^6 plus chart preimages.

    total_area is the sum of Euclidean triangle areas of the chart triangles
    mapped through the scaled matrix embedding (the isometric one for the
    reference metric); triangles holds the same vertices through the
    two-column R^6 embedding for export.
    """

    triangles: np.ndarray
    level: float
    total_area: float
    chart_triangles: np.ndarray

    @property
    def n_triangles(self):
        return self.triangles.shape[0]


def _empty_mesh(t):
    return LevelSurfaceMesh(triangles=np.zeros((0, 3, 6)), level=float(t),
                            total_area=0.0, chart_triangles=np.zeros((0, 3, 3)))


def _candidate_cells(values, t):
    """Indices of grid cells whose corner values straddle the level."""
    n_phi, n_theta, n_psi = values.shape
    cmin = None
    cmax = None
    for di, dj, dk in _CORNER_OFFSETS.astype(int):
        corner = np.roll(np.roll(values, -di, axis=0), -dk, axis=2)
        corner = corner[:, dj:n_theta - 1 + dj, :]
        if cmin is None:
            cmin = corner.copy()
            cmax = corner.copy()
        else:
            np.minimum(cmin, corner, out=cmin)
            np.maximum(cmax, corner, out=cmax)
    mask = (cmin < t) & (cmax >= t)
    return np.nonzero(mask)


def extract_level_surface(realization, t, grid, split="lex"):
    """Mesh the level surface f = t by marching tetrahedra on the grid.

    split chooses the cell diagonal of the six-tetrahedron decomposition
    ("lex" or the mirrored "alt"); both must produce areas agreeing to a
    fraction of a percent on smooth fields, which is a standing test.
    An empty mesh (zero triangles, zero area) means the level is not
    crossed on the grid.
    """
    t = float(t)
    tets = {"lex": _TETS_LEX, "alt": _TETS_ALT}.get(split)
    if tets is None:
        raise ValueError(f"split must be 'lex' or 'alt', got {split!r}")
    values = grid.field_values(realization)
    jj, kk, mm = _candidate_cells(values, t)
    if jj.size == 0:
        return _empty_mesh(t)

    n_phi, n_theta, n_psi = grid.resolution
    steps = np.array(grid.steps)
    corner_vals = np.empty((jj.size, 8))
    for c, (di, dj, dk) in enumerate(_CORNER_OFFSETS.astype(int)):
        corner_vals[:, c] = values[(jj + di) % n_phi, kk + dj, (mm + dk) % n_psi]
    base = np.stack([grid.phis[jj], grid.thetas[kk], grid.psis[mm]], axis=1)
    # chart coordinates are kept unwrapped so every cell is a true box
    corner_coords = base[:, None, :] + _CORNER_OFFSETS[None, :, :] * steps[None, None, :]

    tri_chunks = []
    for tet in tets:
        vals = corner_vals[:, tet]
        case = ((vals[:, 0] < t).astype(np.uint8)
                | ((vals[:, 1] < t) << np.uint8(1))
                | ((vals[:, 2] < t) << np.uint8(2))
                | ((vals[:, 3] < t) << np.uint8(3)))
        for code, tris in _CASE_TRIS.items():
            rows = np.nonzero(case == code)[0]
            if rows.size == 0:
                continue
            for tri in tris:
                verts = np.empty((rows.size, 3, 3))
                for v_idx, edge in enumerate(tri):
                    la, lb = _EDGE_VERTS[edge]
                    ca, cb = tet[la], tet[lb]
                    va = corner_vals[rows, ca]
                    vb = corner_vals[rows, cb]
                    w = ((t - va) / (vb - va))[:, None]
                    pa = corner_coords[rows, ca, :]
                    pb = corner_coords[rows, cb, :]
                    verts[:, v_idx, :] = pa + w * (pb - pa)
                tri_chunks.append(verts)
    if not tri_chunks:
        return _empty_mesh(t)
    chart_tris = np.concatenate(tri_chunks, axis=0)

    flat = chart_tris.reshape(-1, 3)
    mats = euler_to_matrices(flat[:, 0], flat[:, 1], flat[:, 2])
    embedded9 = (mats / math.sqrt(2.0)).reshape(chart_tris.shape[0], 3, 9)
    u = embedded9[:, 1, :] - embedded9[:, 0, :]
    v = embedded9[:, 2, :] - embedded9[:, 0, :]
    uu = np.einsum("ij,ij->i", u, u)
    vv = np.einsum("ij,ij->i", v, v)
    uv = np.einsum("ij,ij->i", u, v)
    areas = 0.5 * np.sqrt(np.clip(uu * vv - uv * uv, 0.0, None))

    embedded6 = np.concatenate([mats[:, :, 1], mats[:, :, 2]], axis=1)
    triangles = embedded6.reshape(chart_tris.shape[0], 3, 6)
    return LevelSurfaceMesh(triangles=triangles, level=t,
                            total_area=float(areas.sum()),
                            chart_triangles=chart_tris)


# ---------------------------------------------------------------------------
# Independent 2D extraction on the base sphere (oracle for spin-0 fields)
# ---------------------------------------------------------------------------

# segments (as edge pairs) per marching-squares case; corners are
# 0:(0,0) 1:(1,0) 2:(0,1) 3:(1,1) in (phi, theta); edges 0:bottom 1:left
# 2:right 3:top; bit k set means corner k is below the level
_SQUARE_SEGMENTS = {
    1: ((0, 1),), 14: ((0, 1),),
    2: ((0, 2),), 13: ((0, 2),),
    4: ((1, 3),), 11: ((1, 3),),
    8: ((2, 3),), 7: ((2, 3),),
    3: ((1, 2),), 12: ((1, 2),),
    5: ((0, 3),), 10: ((0, 3),),
}
_SQUARE_EDGE_VERTS = ((0, 1), (0, 2), (1, 3), (2, 3))


def sphere_level_curve_length(realization, t, resolution):
    """Length of the level curve of a spin-0 field on the base sphere.

    A marching-squares pass over the (phi, theta) chart of the sphere, with
    the same periodic phi nodes and half-cell theta insets as EulerGrid, and
    chord lengths measured in R^3.  Saddle cells are resolved by the sign of
    the cell-center average.  This is a deliberately separate code path from
    the 3D extraction, used as its oracle on fields with no fiber
    dependence.
    """
    prof = realization.profile
    if prof.spin != 0:
        raise ValueError(f"2D extraction needs a spin-0 field, got spin {prof.spin}")
    t = float(t)
    if np.ndim(resolution) == 0:
        resolution = (int(resolution),) * 2
    n_phi, n_theta = (int(v) for v in resolution)
    if min(n_phi, n_theta) < MIN_RESOLUTION:
        raise ValueError(f"need at least {MIN_RESOLUTION} nodes per axis")
    phis = -math.pi + np.arange(n_phi) * (2.0 * math.pi / n_phi)
    thetas = (np.arange(n_theta) + 0.5) * (math.pi / n_theta)
    dphi = 2.0 * math.pi / n_phi
    dtheta = math.pi / n_theta
    values = evaluate_grid(realization, phis, thetas, [0.0])[:, :, 0].real

    v00 = values[:, :-1]
    v10 = np.roll(values, -1, axis=0)[:, :-1]
    v01 = values[:, 1:]
    v11 = np.roll(values, -1, axis=0)[:, 1:]
    case = ((v00 < t).astype(np.uint8)
            | ((v10 < t) << np.uint8(1))
            | ((v01 < t) << np.uint8(2))
            | ((v11 < t) << np.uint8(3)))
    corner_vals = (v00, v10, v01, v11)

    total = 0.0
    segments = []
    for code in range(1, 15):
        rows, cols = np.nonzero(case == code)
        if rows.size == 0:
            continue
        if code in (6, 9):
            center = 0.25 * (v00[rows, cols] + v10[rows, cols]
                             + v01[rows, cols] + v11[rows, cols])
            below = center < t
            # diagonal pairs: which corners are joined flips with the center
            if code == 6:
                joined = [((0, 1), (2, 3)), ((0, 2), (1, 3))]
            else:
                joined = [((0, 2), (1, 3)), ((0, 1), (2, 3))]
            for connect, sel in ((joined[0], below), (joined[1], ~below)):
                if not np.any(sel):
                    continue
                segments.append((rows[sel], cols[sel], connect[0]))
                segments.append((rows[sel], cols[sel], connect[1]))
        else:
            for seg in _SQUARE_SEGMENTS[code]:
                segments.append((rows, cols, seg))

    for rows, cols, (e1, e2) in segments:
        pts = []
        for edge in (e1, e2):
            ca, cb = _SQUARE_EDGE_VERTS[edge]
            va = corner_vals[ca][rows, cols]
            vb = corner_vals[cb][rows, cols]
            w = (t - va) / (vb - va)
            pa_phi = phis[rows] + (ca & 1) * dphi
            pa_th = thetas[cols] + ((ca >> 1) & 1) * dtheta
            pb_phi = phis[rows] + (cb & 1) * dphi
            pb_th = thetas[cols] + ((cb >> 1) & 1) * dtheta
            phi_pt = pa_phi + w * (pb_phi - pa_phi)
            th_pt = pa_th + w * (pb_th - pa_th)
            st = np.sin(th_pt)
            pts.append(np.stack([st * np.cos(phi_pt), st * np.sin(phi_pt),
                                 np.cos(th_pt)], axis=1))
        total += float(np.linalg.norm(pts[1] - pts[0], axis=1).sum())
    return total


# ---------------------------------------------------------------------------
# Export
# ---------------------------------------------------------------------------

def mesh_to_off(mesh, path):
    """Write a mesh as OFF text.

    Vertex lines carry the first three coordinates of the R^6 embedding (the
    fiber-circle block); the remaining three coordinates follow in a
    trailing comment on each line, so the full embedding survives a
    round-trip through any OFF reader.
    """
    tris = mesh.triangles
    n_tri = tris.shape[0]
    lines = ["OFF",
             f"# level surface at t = {mesh.level!r}",
             f"# total area {mesh.total_area!r}",
             f"{3 * n_tri} {n_tri} 0"]
    for i in range(n_tri):
        for v in range(3):
            c = [repr(float(x)) for x in tris[i, v]]
            lines.append(f"{c[0]} {c[1]} {c[2]} # {c[3]} {c[4]} {c[5]}")
    for i in range(n_tri):
        lines.append(f"3 {3 * i} {3 * i + 1} {3 * i + 2}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
