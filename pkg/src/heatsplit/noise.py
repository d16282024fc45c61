"""Sinusoidal noise basis and reproducible Brownian increments.

Every (realization, mode) pair gets its own counter-based stream, so the
draws do not depend on iteration order or on how work is split across
workers.  The stream derivation is fixed and documented here:

* bit generator: Philox-4x64 with the 128-bit key
  ``master_seed + 2**64 * (realization * 2**32 + mode)``
  (master_seed < 2**64, realization and mode < 2**32), counter starting at 0;
* uniforms: each raw 64-bit word ``w`` maps to ``(w >> 11) * 2**-53``;
* normals: Box-Muller on consecutive uniform pairs (u1, u2),
  ``r = sqrt(-2*log(1 - u1))``, ``z = r*cos(2*pi*u2), r*sin(2*pi*u2)``;
* increments: normals scaled by ``sqrt(t_final / m_fine)``.

Increments are stored on the finest grid only.  Coarsening always sums
consecutive fine increments in ascending index order, and re-coarsening a
coarse view goes back to the stored finest grid, so any chain of coarsening
operations yields bit-identical arrays.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.random import Philox

__all__ = [
    "NoiseBasis",
    "BrownianStore",
    "CoarseStore",
    "eval_basis",
    "basis_for_mesh",
    "sample_paths",
    "aggregate",
    "aggregate_array",
    "path_checksums",
]

MODE_SUP_NORM = 2.0  # sup norm of every 2*sin(pi i x)*sin(pi j y) on the closed square

_MASK32 = (1 << 32) - 1
_MASK64 = (1 << 64) - 1


def eval_basis(i: int, j: int, x, y):
    """Value of the orthonormal mode e_{i,j}(x, y) = 2 sin(pi i x) sin(pi j y)."""
    return 2.0 * np.sin(np.pi * i * np.asarray(x)) * np.sin(np.pi * j * np.asarray(y))


@dataclass(frozen=True, eq=False)
class NoiseBasis:
    """The first n^2 sinusoidal modes evaluated at a mesh's interior nodes.

    Mode k corresponds to the pair (i, j) in row-major order over
    1 <= i, j <= n.  ``sq_sum_at_nodes`` caches sum_k e_k(P)^2, the only
    mode statistic the stochastic substep needs besides the node values.
    """

    n: int
    modes: np.ndarray          # (K, 2) int pairs (i, j)
    node_values: np.ndarray    # (K, n_h)
    sup_norms: np.ndarray      # (K,), all equal to 2
    k_e: float                 # sqrt(sum_k sup_norm_k^2) = 2*sqrt(K)
    sq_sum_at_nodes: np.ndarray  # (n_h,)

    @property
    def k_modes(self) -> int:
        return self.node_values.shape[0]


def basis_for_mesh(n: int, mesh) -> NoiseBasis:
    """Evaluate the K = n^2 sinusoidal modes at the interior nodes of ``mesh``."""
    if n < 1:
        raise ValueError(f"n must be >= 1 (got {n})")
    k_count = n * n
    pairs = np.array([(i, j) for i in range(1, n + 1) for j in range(1, n + 1)], dtype=np.intp)
    pts = mesh.interior_coords
    node_values = np.empty((k_count, mesh.n_h))
    for k, (i, j) in enumerate(pairs):
        node_values[k] = eval_basis(int(i), int(j), pts[:, 0], pts[:, 1])
    return NoiseBasis(
        n=n,
        modes=pairs,
        node_values=node_values,
        sup_norms=np.full(k_count, MODE_SUP_NORM),
        k_e=float(MODE_SUP_NORM * np.sqrt(k_count)),
        sq_sum_at_nodes=(node_values**2).sum(axis=0),
    )


def _stream_key(master_seed: int, realization: int, mode: int) -> int:
    if not 0 <= realization <= _MASK32:
        raise ValueError(f"realization index out of range: {realization}")
    if not 0 <= mode <= _MASK32:
        raise ValueError(f"mode index out of range: {mode}")
    return (master_seed & _MASK64) + (((realization << 32) | mode) << 64)


def _standard_normals(key: int, count: int) -> np.ndarray:
    """Box-Muller normals from the Philox stream with the given key."""
    npairs = (count + 1) // 2
    raw = Philox(key=key).random_raw(2 * npairs)
    u = (raw >> np.uint64(11)) * 2.0**-53
    u1, u2 = u[0::2], u[1::2]
    radius = np.sqrt(-2.0 * np.log1p(-u1))  # 1 - u1 in (0, 1], no log(0)
    angle = 2.0 * np.pi * u2
    z = np.empty(2 * npairs)
    z[0::2] = radius * np.cos(angle)
    z[1::2] = radius * np.sin(angle)
    return z[:count]


@dataclass(frozen=True, eq=False)
class BrownianStore:
    """Seeded Brownian increments for R realizations of K independent motions.

    ``increments`` has shape (realizations, m_fine, modes) and holds
    N(0, t_final/m_fine) increments on the finest time grid.
    """

    master_seed: int
    realizations: int
    modes: int
    m_fine: int
    t_final: float
    increments: np.ndarray

    def at(self, m_steps: int) -> "CoarseStore":
        """View of these paths on a coarser grid with ``m_steps`` steps."""
        return CoarseStore(root=self, m_steps=_check_divisor(self.m_fine, m_steps))


@dataclass(frozen=True, eq=False)
class CoarseStore:
    """Coarse-grid view over a BrownianStore.

    The view never stores summed increments: ``increments`` and any further
    ``at`` always reduce from the root's finest grid, which is what makes
    chained coarsenings bit-identical.
    """

    root: BrownianStore
    m_steps: int

    @property
    def increments(self) -> np.ndarray:
        return aggregate_array(self.root.increments, self.m_steps)

    def at(self, m_steps: int) -> "CoarseStore":
        if self.m_steps % m_steps != 0:
            raise ValueError(f"{m_steps} does not divide {self.m_steps}")
        return CoarseStore(root=self.root, m_steps=_check_divisor(self.root.m_fine, m_steps))


def sample_paths(master_seed: int, realizations: int, modes: int, m_fine: int, t_final: float) -> BrownianStore:
    """Generate the finest-grid increments for all (realization, mode) pairs."""
    if m_fine < 1:
        raise ValueError(f"m_fine must be >= 1 (got {m_fine})")
    scale = np.sqrt(t_final / m_fine)
    inc = np.empty((realizations, m_fine, modes))
    for r in range(realizations):
        for k in range(modes):
            inc[r, :, k] = scale * _standard_normals(_stream_key(master_seed, r, k), m_fine)
    return BrownianStore(
        master_seed=master_seed,
        realizations=realizations,
        modes=modes,
        m_fine=m_fine,
        t_final=t_final,
        increments=inc,
    )


def _check_divisor(m_fine: int, m_coarse: int) -> int:
    m_coarse = int(m_coarse)
    if m_coarse < 1 or m_fine % m_coarse != 0:
        raise ValueError(f"m_coarse={m_coarse} does not divide m_fine={m_fine}")
    return m_coarse


def aggregate_array(fine: np.ndarray, m_coarse: int) -> np.ndarray:
    """Sum blocks of q = M_fine/M_coarse consecutive increments.

    ``fine`` has time on its second-to-last axis.  Each block is accumulated
    in ascending index order so the result is a fixed function of the fine
    values, independent of platform reduction tricks.
    """
    m_fine = fine.shape[-2]
    m_coarse = _check_divisor(m_fine, m_coarse)
    q = m_fine // m_coarse
    blocks = fine.reshape(fine.shape[:-2] + (m_coarse, q, fine.shape[-1]))
    out = np.zeros(fine.shape[:-2] + (m_coarse, fine.shape[-1]))
    for i in range(q):
        out += blocks[..., i, :]
    return out


def aggregate(store, m_coarse: int) -> np.ndarray:
    """Coarse increments (R, m_coarse, K) for a store or a coarse view."""
    root = store.root if isinstance(store, CoarseStore) else store
    return aggregate_array(root.increments, m_coarse)


def path_checksums(store) -> np.ndarray:
    """Endpoint B_T per (realization, mode), reduced canonically from the finest grid.

    Any view over the same store returns bit-identical checksums, which is
    how experiment runs prove they consumed the same underlying paths.
    """
    return aggregate(store, 1)[:, 0, :]
