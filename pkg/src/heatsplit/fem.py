"""P1 finite-element operators with mass lumping on unit-square meshes.

All element integrals are closed form (exact for piecewise linears):
on a triangle T, int_T Phi_i*Phi_i = |T|/6, int_T Phi_i*Phi_j = |T|/12 for
i != j, and the stiffness entries come from the constant basis gradients.
Matrices are assembled over interior-node pairs only, which imposes the
homogeneous Dirichlet condition directly.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from heatsplit.mesh import Mesh, triangle_geometry

__all__ = [
    "FemOperators",
    "FemFunction",
    "assemble",
    "l2_norm",
    "h_norm",
    "nodal_interpolant",
    "evaluate_on_uniform",
    "prolongation_matrix",
    "prolongate",
    "dump_operators",
]


@dataclass(frozen=True, eq=False)
class FemOperators:
    """Assembled mass, lumped mass and stiffness matrices for one mesh.

    ``lumped_mass`` stores the diagonal entries int_D Phi_i (the full matrix
    is diagonal).  ``mass`` and ``stiffness`` are CSR with sorted indices so
    iteration order is reproducible.
    """

    mass: sp.csr_matrix
    lumped_mass: np.ndarray
    stiffness: sp.csr_matrix
    n_h: int


@dataclass(frozen=True, eq=False)
class FemFunction:
    """A piecewise-linear function given by its interior nodal values."""

    coefficients: np.ndarray
    mesh: Mesh


def _coeffs(v) -> np.ndarray:
    if isinstance(v, FemFunction):
        return v.coefficients
    return np.asarray(v, dtype=float)


_LOCAL_MASS = (np.ones((3, 3)) + np.eye(3)) / 12.0


def assemble(mesh: Mesh) -> FemOperators:
    """Assemble the P1 operators for ``mesh`` over its interior nodes."""
    areas, grads = triangle_geometry(mesh)
    n_h = mesh.n_h

    interior_of = np.full(len(mesh.vertices), -1, dtype=np.intp)
    interior_of[mesh.interior_nodes] = np.arange(n_h)
    tri_int = interior_of[mesh.triangles]  # (n_t, 3), -1 for boundary vertices

    local_mass = areas[:, None, None] * _LOCAL_MASS
    local_stiff = areas[:, None, None] * np.einsum("tad,tbd->tab", grads, grads)

    rows = np.broadcast_to(tri_int[:, :, None], local_mass.shape)
    cols = np.broadcast_to(tri_int[:, None, :], local_mass.shape)
    keep = (rows >= 0) & (cols >= 0)
    r, c = rows[keep], cols[keep]

    mass = sp.coo_matrix((local_mass[keep], (r, c)), shape=(n_h, n_h)).tocsr()
    stiffness = sp.coo_matrix((local_stiff[keep], (r, c)), shape=(n_h, n_h)).tocsr()
    mass.sort_indices()
    stiffness.sort_indices()

    lumped = np.zeros(n_h)
    keep_l = tri_int >= 0
    np.add.at(lumped, tri_int[keep_l], np.broadcast_to((areas / 3.0)[:, None], tri_int.shape)[keep_l])

    return FemOperators(mass=mass, lumped_mass=lumped, stiffness=stiffness, n_h=n_h)


def _check_size(v: np.ndarray, ops: FemOperators) -> None:
    if v.shape[0] != ops.n_h:
        raise ValueError(f"coefficient vector has length {v.shape[0]}, operators expect {ops.n_h}")


def l2_norm(v, ops: FemOperators) -> float:
    """Exact L2 norm of the P1 function with coefficients ``v``: sqrt(v' M v)."""
    c = _coeffs(v)
    _check_size(c, ops)
    q = float(c @ (ops.mass @ c))
    return float(np.sqrt(max(q, 0.0)))


def h_norm(v, ops: FemOperators) -> float:
    """Lumped (discrete) L2 norm: sqrt(v' M_L v)."""
    c = _coeffs(v)
    _check_size(c, ops)
    return float(np.sqrt(np.sum(ops.lumped_mass * c * c)))


def nodal_interpolant(f, mesh: Mesh) -> FemFunction:
    """Interpolate a function (vanishing on the boundary) at the interior nodes.

    ``f`` must accept numpy coordinate arrays: ``f(x, y)``.
    """
    pts = mesh.interior_coords
    values = np.asarray(f(pts[:, 0], pts[:, 1]), dtype=float)
    return FemFunction(coefficients=values, mesh=mesh)


def _locate_cells(n: int, points: np.ndarray):
    """Cell indices and in-cell fractional coordinates for points in [0,1]^2."""
    x, y = points[:, 0], points[:, 1]
    ci = np.clip(np.floor(x * n).astype(np.intp), 0, n - 1)
    cj = np.clip(np.floor(y * n).astype(np.intp), 0, n - 1)
    fx = x * n - ci
    fy = y * n - cj
    return ci, cj, fx, fy


def evaluate_on_uniform(mesh: Mesh, v, points) -> np.ndarray:
    """Point values of the P1 function ``v`` on a uniform mesh.

    Each cell is split along the lower-left to upper-right diagonal; the
    triangle containing a point is picked by comparing the fractional cell
    coordinates, and the value is the barycentric combination of the vertex
    values (zero on boundary vertices).
    """
    if not mesh.is_uniform:
        raise ValueError("point evaluation is implemented for uniform meshes only")
    c = _coeffs(v)
    if c.shape[0] != mesh.n_h:
        raise ValueError(f"coefficient vector has length {c.shape[0]}, mesh has n_h={mesh.n_h}")
    n = mesh.n_subdiv
    full = np.zeros(len(mesh.vertices))
    full[mesh.interior_nodes] = c

    pts = np.asarray(points, dtype=float)
    ci, cj, fx, fy = _locate_cells(n, pts)
    v_ll = full[cj * (n + 1) + ci]
    v_lr = full[cj * (n + 1) + ci + 1]
    v_ul = full[(cj + 1) * (n + 1) + ci]
    v_ur = full[(cj + 1) * (n + 1) + ci + 1]

    lower = v_ll * (1.0 - fx) + v_lr * (fx - fy) + v_ur * fy
    upper = v_ll * (1.0 - fy) + v_ur * fx + v_ul * (fy - fx)
    return np.where(fx >= fy, lower, upper)


def prolongation_matrix(coarse: Mesh, fine: Mesh) -> sp.csr_matrix:
    """Sparse operator taking coarse interior coefficients to fine ones.

    Requires nested uniform meshes (coarse N dividing fine N'); the coarse
    space is then a subspace of the fine one and nodal evaluation is exact.
    """
    if not (coarse.is_uniform and fine.is_uniform):
        raise ValueError("prolongation requires uniform meshes")
    if fine.n_subdiv % coarse.n_subdiv != 0:
        raise ValueError(
            f"coarse N={coarse.n_subdiv} does not divide fine N'={fine.n_subdiv}; meshes are not nested"
        )
    n = coarse.n_subdiv
    pts = fine.interior_coords
    ci, cj, fx, fy = _locate_cells(n, pts)

    interior_of = np.full(len(coarse.vertices), -1, dtype=np.intp)
    interior_of[coarse.interior_nodes] = np.arange(coarse.n_h)

    idx_ll = cj * (n + 1) + ci
    idx_lr = idx_ll + 1
    idx_ul = idx_ll + (n + 1)
    idx_ur = idx_ul + 1

    lower = fx >= fy
    cols = np.where(lower[:, None], np.column_stack([idx_ll, idx_lr, idx_ur]),
                    np.column_stack([idx_ll, idx_ur, idx_ul]))
    w_lower = np.column_stack([1.0 - fx, fx - fy, fy])
    w_upper = np.column_stack([1.0 - fy, fx, fy - fx])
    weights = np.where(lower[:, None], w_lower, w_upper)

    rows = np.repeat(np.arange(fine.n_h, dtype=np.intp), 3)
    col_int = interior_of[cols.ravel()]
    vals = weights.ravel()
    keep = col_int >= 0
    mat = sp.coo_matrix(
        (vals[keep], (rows[keep], col_int[keep])), shape=(fine.n_h, coarse.n_h)
    ).tocsr()
    mat.sort_indices()
    return mat


def prolongate(v, coarse: Mesh, fine: Mesh):
    """Represent a coarse-mesh function exactly on a nested fine mesh."""
    mat = prolongation_matrix(coarse, fine)
    out = mat @ _coeffs(v)
    if isinstance(v, FemFunction):
        return FemFunction(coefficients=out, mesh=fine)
    return out


def dump_operators(ops: FemOperators, directory: str) -> None:
    """Write M, M_L and S as plain-text triplets (row, col, value).

    One file per matrix; values carry 17 significant digits so they can be
    reloaded bit-for-bit.
    """
    os.makedirs(directory, exist_ok=True)

    def write_sparse(name, mat):
        coo = mat.tocoo()
        order = np.lexsort((coo.col, coo.row))
        with open(os.path.join(directory, name), "w") as fh:
            fh.write(f"# {mat.shape[0]} {mat.shape[1]} {coo.nnz}\n")
            for r, c, x in zip(coo.row[order], coo.col[order], coo.data[order]):
                fh.write(f"{r} {c} {x:.17g}\n")

    write_sparse("mass.txt", ops.mass)
    write_sparse("stiffness.txt", ops.stiffness)
    with open(os.path.join(directory, "lumped_mass.txt"), "w") as fh:
        fh.write(f"# {ops.n_h} {ops.n_h} {ops.n_h}\n")
        for i, x in enumerate(ops.lumped_mass):
            fh.write(f"{i} {i} {x:.17g}\n")
