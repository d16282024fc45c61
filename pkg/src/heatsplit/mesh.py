"""Triangulations of the unit square and the geometric checks behind positivity.

The solver only ever needs the uniform right-triangle mesh obtained by
splitting an N-by-N grid of squares along the lower-left to upper-right
diagonal.  The checker is more general: it verifies weak acuteness (all
per-element gradient products of distinct P1 basis functions nonpositive)
and shape regularity for any admissible triangulation of the square.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "Mesh",
    "AcutenessReport",
    "build_uniform_unit_square",
    "check_weak_acuteness",
    "triangle_geometry",
]

# Off-diagonal gradient integrals up to this absolute size count as <= 0;
# absorbs rounding in entries whose exact value is zero.
ACUTENESS_TOL = 1e-12

_BOUNDARY_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class Mesh:
    """Admissible triangulation of the closed unit square.

    ``triangles`` holds counter-clockwise vertex index triples.
    ``interior_nodes`` enumerates the vertices strictly inside the square;
    for uniform meshes the order is lexicographic by (row, column), which
    fixes the layout of every assembled matrix and nodal vector.

    Attributes:
        n_subdiv: subdivisions per side (0 for hand-built meshes).
        vertices: (n_vertices, 2) coordinates in [0, 1]^2.
        triangles: (n_triangles, 3) CCW vertex indices.
        interior_nodes: vertex indices not on the boundary.
        n_h: number of interior nodes.
        h: maximum triangle diameter.
        label: short identifier used in output provenance.
    """

    n_subdiv: int
    vertices: np.ndarray
    triangles: np.ndarray
    interior_nodes: np.ndarray
    n_h: int
    h: float
    label: str = "custom"

    @property
    def interior_coords(self) -> np.ndarray:
        """Coordinates of the interior nodes, shape (n_h, 2)."""
        return self.vertices[self.interior_nodes]

    @property
    def is_uniform(self) -> bool:
        return self.n_subdiv >= 2

    @classmethod
    def from_arrays(cls, vertices, triangles, label: str = "custom") -> "Mesh":
        """Wrap raw vertex/triangle arrays; interior nodes are detected as the
        vertices lying strictly inside the unit square."""
        vertices = np.asarray(vertices, dtype=float)
        triangles = np.asarray(triangles, dtype=np.intp)
        x, y = vertices[:, 0], vertices[:, 1]
        on_boundary = (
            (np.abs(x) < _BOUNDARY_TOL)
            | (np.abs(x - 1.0) < _BOUNDARY_TOL)
            | (np.abs(y) < _BOUNDARY_TOL)
            | (np.abs(y - 1.0) < _BOUNDARY_TOL)
        )
        interior = np.flatnonzero(~on_boundary)
        pts = vertices[triangles]
        edges = np.linalg.norm(pts - np.roll(pts, -1, axis=1), axis=2)
        return cls(
            n_subdiv=0,
            vertices=vertices,
            triangles=triangles,
            interior_nodes=interior,
            n_h=len(interior),
            h=float(edges.max()),
            label=label,
        )


@dataclass(frozen=True)
class AcutenessReport:
    """Verdict of the weak-acuteness check plus a shape-regularity measure.

    ``worst_offdiag`` is the largest per-element integral of the product of
    two distinct local basis gradients; the mesh is weakly acute when it is
    nonpositive (up to ``tolerance``).  ``shape_constant`` is the minimum over
    triangles of inradius / diameter.
    """

    is_weakly_acute: bool
    worst_offdiag: float
    shape_constant: float
    tolerance: float = ACUTENESS_TOL

    def as_lines(self) -> list[str]:
        return [
            f"is_weakly_acute={str(self.is_weakly_acute).lower()}",
            f"worst_offdiag={self.worst_offdiag:.17g}",
            f"shape_constant={self.shape_constant:.17g}",
        ]


def build_uniform_unit_square(n_subdiv: int) -> Mesh:
    """Uniform triangulation of [0,1]^2 with N subdivisions per side.

    Each grid square is split along its lower-left to upper-right diagonal,
    giving 2*N^2 right isosceles triangles with legs 1/N.  Interior nodes are
    numbered lexicographically by (row, column).

    Args:
        n_subdiv: N >= 2 (N < 2 has no interior nodes and is rejected).
    """
    n = int(n_subdiv)
    if n < 2:
        raise ValueError(f"n_subdiv must be >= 2 (got {n_subdiv}); N=1 has no interior nodes")

    side = np.arange(n + 1) / n
    xg, yg = np.meshgrid(side, side, indexing="xy")
    vertices = np.column_stack([xg.ravel(), yg.ravel()])  # row-major by y, then x

    def vid(i, j):
        return j * (n + 1) + i

    tris = []
    for j in range(n):
        for i in range(n):
            ll, lr = vid(i, j), vid(i + 1, j)
            ul, ur = vid(i, j + 1), vid(i + 1, j + 1)
            tris.append((ll, lr, ur))
            tris.append((ll, ur, ul))
    triangles = np.asarray(tris, dtype=np.intp)

    jj, ii = np.meshgrid(np.arange(1, n), np.arange(1, n), indexing="ij")
    interior = (jj * (n + 1) + ii).ravel()

    return Mesh(
        n_subdiv=n,
        vertices=vertices,
        triangles=triangles,
        interior_nodes=interior,
        n_h=(n - 1) ** 2,
        h=float(np.sqrt(2.0) / n),
        label=f"uniform-N{n}",
    )


def triangle_geometry(mesh: Mesh) -> tuple[np.ndarray, np.ndarray]:
    """Areas and constant P1 basis gradients for every triangle.

    Returns:
        areas: (n_triangles,) positive areas.
        grads: (n_triangles, 3, 2); grads[t, a] is the gradient of the local
            basis function attached to vertex a of triangle t.

    Raises:
        ValueError: on a degenerate (zero-area or wrongly oriented) triangle,
            naming its index.
    """
    pts = mesh.vertices[mesh.triangles]  # (n_t, 3, 2)
    d1 = pts[:, 1] - pts[:, 0]
    d2 = pts[:, 2] - pts[:, 0]
    signed = 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])
    bad = np.flatnonzero(signed <= 1e-14)
    if bad.size:
        t = int(bad[0])
        raise ValueError(
            f"degenerate or negatively oriented triangle {t} "
            f"(signed area {signed[t]:.3e}): vertices {mesh.triangles[t].tolist()}"
        )
    areas = signed

    # grad(lambda_a) = ((p_b - p_c).y, (p_c - p_b).x) / (2A), (a, b, c) cyclic
    grads = np.empty((len(areas), 3, 2))
    for a in range(3):
        b, c = (a + 1) % 3, (a + 2) % 3
        grads[:, a, 0] = pts[:, b, 1] - pts[:, c, 1]
        grads[:, a, 1] = pts[:, c, 0] - pts[:, b, 0]
    grads /= (2.0 * areas)[:, None, None]
    return areas, grads


def check_weak_acuteness(mesh: Mesh, tolerance: float = ACUTENESS_TOL) -> AcutenessReport:
    """Evaluate the weak-acuteness criterion element by element.

    For each triangle and each pair of distinct local basis functions the
    integral of the gradient product is the (constant) gradient dot product
    times the area.  The mesh passes when the largest such value does not
    exceed ``tolerance``.
    """
    areas, grads = triangle_geometry(mesh)

    worst = -np.inf
    for a in range(3):
        for b in range(a + 1, 3):
            pair = areas * np.einsum("td,td->t", grads[:, a], grads[:, b])
            worst = max(worst, float(pair.max()))

    pts = mesh.vertices[mesh.triangles]
    sides = np.linalg.norm(pts - np.roll(pts, -1, axis=1), axis=2)  # (n_t, 3)
    diam = sides.max(axis=1)
    inradius = areas / (0.5 * sides.sum(axis=1))
    shape_constant = float((inradius / diam).min())

    return AcutenessReport(
        is_weakly_acute=bool(worst <= tolerance),
        worst_offdiag=worst,
        shape_constant=shape_constant,
        tolerance=tolerance,
    )
