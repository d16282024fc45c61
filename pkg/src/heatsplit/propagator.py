"""The deterministic-substep operator exp(-tau * M_L^{-1} S) and its certificate.

On a weakly acute mesh, -tau*M_L^{-1}S is a Metzler matrix (nonnegative
off-diagonal), so its exponential is entrywise nonnegative.  The build step
records the smallest entry and verifies the Metzler precondition so that the
property is certified numerically, not assumed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from heatsplit.fem import FemOperators

__all__ = [
    "HeatPropagator",
    "NonnegativityCertificate",
    "build_propagator",
    "certify_nonnegative",
    "apply_propagator",
    "NONNEG_TOL",
    "DEFAULT_DENSE_LIMIT",
]

# Entries of the exponential in [-NONNEG_TOL, 0) are treated as rounding
# noise and clamped to zero after certification.
NONNEG_TOL = 1e-12

# Guard against accidentally requesting a dense matrix exponential far beyond
# desk scale.
DEFAULT_DENSE_LIMIT = 8192


@dataclass(frozen=True, eq=False)
class HeatPropagator:
    """Dense exp(-tau * M_L^{-1} S), reused across steps and realizations.

    ``min_entry`` is recorded before tiny negative entries are clamped, so
    certification always sees the raw exponential.
    """

    matrix: np.ndarray
    tau: float
    mesh_id: str
    min_entry: float
    min_index: tuple[int, int]
    metzler_verified: bool
    ops: FemOperators


@dataclass(frozen=True)
class NonnegativityCertificate:
    min_entry: float
    min_index: tuple[int, int]
    tolerance: float
    metzler_ok: bool
    passed: bool

    @property
    def verdict(self) -> str:
        return "pass" if self.passed else "fail"

    def as_lines(self) -> list[str]:
        return [
            f"min_entry={self.min_entry:.17g}",
            f"min_index={self.min_index[0]},{self.min_index[1]}",
            f"metzler_ok={str(self.metzler_ok).lower()}",
            f"certificate={self.verdict}",
        ]


def _metzler_precondition(ops: FemOperators) -> bool:
    """All off-diagonal entries of -M_L^{-1} S nonnegative, i.e. off-diagonal S <= 0."""
    coo = ops.stiffness.tocoo()
    off = coo.row != coo.col
    if not off.any():
        return True
    return bool(coo.data[off].max() <= 0.0)


def build_propagator(
    ops: FemOperators,
    tau: float,
    mesh_id: str = "",
    dense_limit: int = DEFAULT_DENSE_LIMIT,
) -> HeatPropagator:
    """Compute the dense matrix exponential for one (mesh, tau) pair.

    Uses scaling-and-squaring with the standard norm-based Pade order
    selection (scipy.linalg.expm), which agrees with any other compliant
    implementation to ~1e-12.  M_L is diagonal, so forming M_L^{-1}S is an
    exact row scaling.
    """
    if tau < 0:
        raise ValueError(f"tau must be nonnegative (got {tau})")
    if ops.n_h > dense_limit:
        raise ValueError(
            f"n_h={ops.n_h} exceeds the dense-exponential limit {dense_limit}; "
            "use a smaller N (or raise dense_limit explicitly)"
        )

    metzler_ok = _metzler_precondition(ops)

    if tau == 0.0:
        matrix = np.eye(ops.n_h)
        min_entry, min_index = 0.0, (0, 0)
    else:
        generator = -tau * (ops.stiffness.toarray() / ops.lumped_mass[:, None])
        matrix = scipy.linalg.expm(generator)
        flat = int(np.argmin(matrix))
        min_index = np.unravel_index(flat, matrix.shape)
        min_entry = float(matrix[min_index])
        if -NONNEG_TOL <= min_entry < 0.0:
            matrix[matrix < 0.0] = 0.0

    return HeatPropagator(
        matrix=matrix,
        tau=float(tau),
        mesh_id=mesh_id,
        min_entry=min_entry,
        min_index=(int(min_index[0]), int(min_index[1])),
        metzler_verified=metzler_ok,
        ops=ops,
    )


def certify_nonnegative(prop: HeatPropagator, tolerance: float = NONNEG_TOL) -> NonnegativityCertificate:
    """Check the recorded minimum entry against ``tolerance`` and re-verify
    the Metzler precondition on the generator."""
    metzler_ok = _metzler_precondition(prop.ops)
    passed = metzler_ok and prop.min_entry >= -tolerance
    return NonnegativityCertificate(
        min_entry=prop.min_entry,
        min_index=prop.min_index,
        tolerance=tolerance,
        metzler_ok=metzler_ok,
        passed=passed,
    )


def apply_propagator(prop: HeatPropagator, v: np.ndarray) -> np.ndarray:
    """Dense matrix-vector (or matrix-block) product with the propagator."""
    v = np.asarray(v, dtype=float)
    if v.shape[0] != prop.matrix.shape[1]:
        raise ValueError(f"vector length {v.shape[0]} does not match propagator size {prop.matrix.shape[1]}")
    return prop.matrix @ v
