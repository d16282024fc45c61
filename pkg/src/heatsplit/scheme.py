"""The fully discrete splitting stepper.

One step from U_m:

    Uhat_j = exp( g(U_j) * sum_k dB^k e_k(P_j)
                  - (tau/2) * g(U_j)^2 * sum_k e_k(P_j)^2 ) * U_j
    U_{m+1} = exp(-tau * M_L^{-1} S) @ Uhat

i.e. the exact solve of the frozen-coefficient stochastic subsystem followed
by the heat propagator.  The substep multiplies each node by a positive
scalar, so it preserves the sign pattern exactly; nonnegativity of the whole
step then rests on the certified propagator.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from heatsplit.fem import FemOperators, h_norm, l2_norm
from heatsplit.mesh import Mesh
from heatsplit.noise import BrownianStore, NoiseBasis, aggregate_array
from heatsplit.nonlinearity import Nonlinearity
from heatsplit.propagator import HeatPropagator

__all__ = [
    "SchemeConfig",
    "Trajectory",
    "OverflowMonitor",
    "default_initial_condition",
    "initial_state",
    "stochastic_substep",
    "scheme_step",
    "run_scheme",
    "OVERFLOW_EXPONENT",
]

# Natural-log exponent beyond which exp() overflows to inf; crossing it is
# reported as a diagnostic, never as an exception.
OVERFLOW_EXPONENT = 700.0

RECORD_MODES = ("all_steps", "norms_only", "final_only")


def default_initial_condition(x, y):
    """The standard experiment initial condition sin(pi x) sin(pi y)."""
    return np.sin(np.pi * np.asarray(x)) * np.sin(np.pi * np.asarray(y))


@dataclass(frozen=True, eq=False)
class SchemeConfig:
    """Everything one trajectory needs: discretization, nonlinearity, noise basis."""

    mesh: Mesh
    ops: FemOperators
    propagator: HeatPropagator
    nonlinearity: Nonlinearity
    basis: NoiseBasis
    m_steps: int
    t_final: float
    u0: Callable = default_initial_condition
    record_mode: str = "norms_only"

    def __post_init__(self):
        if self.record_mode not in RECORD_MODES:
            raise ValueError(f"record_mode must be one of {RECORD_MODES} (got {self.record_mode!r})")
        if self.m_steps < 0:
            raise ValueError("m_steps must be nonnegative")
        if self.m_steps == 0:
            if self.t_final != 0.0:
                raise ValueError("m_steps=0 requires t_final=0")
            return
        tau = self.t_final / self.m_steps
        if abs(self.propagator.tau - tau) > 1e-14 * max(1.0, self.t_final):
            raise ValueError(
                f"propagator tau {self.propagator.tau} does not match t_final/m_steps = {tau}"
            )

    @property
    def tau(self) -> float:
        return self.t_final / self.m_steps if self.m_steps else 0.0


class OverflowMonitor:
    """Collects substep exponent overflows as (step, node) diagnostics."""

    def __init__(self, max_events: int = 16):
        self.overflowed = False
        self.events: list[tuple[int, int]] = []
        self._max_events = max_events
        self.step_index = -1

    def scan(self, exponent: np.ndarray) -> None:
        mask = exponent > OVERFLOW_EXPONENT
        if not mask.any():
            return
        self.overflowed = True
        if len(self.events) < self._max_events:
            for node in np.argwhere(mask)[: self._max_events - len(self.events)]:
                self.events.append((self.step_index, int(node[0])))


@dataclass(eq=False)
class Trajectory:
    """Recorded output of one realization.

    ``min_values[m]`` is the smallest entry of the state after step m
    (m = 0 is the initial state); ``min_value_seen`` is their minimum.
    """

    times: np.ndarray
    l2_norms: np.ndarray
    h_norms: np.ndarray
    min_values: np.ndarray
    final_state: np.ndarray
    min_value_seen: float
    overflow: bool
    overflow_events: list = field(default_factory=list)
    states: list | None = None
    record_mode: str = "norms_only"


def initial_state(u0: Callable, mesh: Mesh) -> np.ndarray:
    """Nodal values (u0(P_j))_j at the interior nodes."""
    pts = mesh.interior_coords
    return np.asarray(u0(pts[:, 0], pts[:, 1]), dtype=float)


def stochastic_substep(
    state: np.ndarray,
    db: np.ndarray,
    basis: NoiseBasis,
    nonlinearity: Nonlinearity,
    tau: float,
    monitor: OverflowMonitor | None = None,
) -> np.ndarray:
    """Exact one-step solve of the frozen-coefficient stochastic subsystem.

    ``state`` may be a single vector (n_h,) or a block (n_h, B) of
    realizations; ``db`` is the matching (K,) or (K, B) increment slice.
    """
    g = nonlinearity.g(state)
    drive = basis.node_values.T @ db  # sum_k dB^k e_k(P_j)
    sq = basis.sq_sum_at_nodes if state.ndim == 1 else basis.sq_sum_at_nodes[:, None]
    exponent = g * drive - 0.5 * tau * (g * g) * sq
    if monitor is not None:
        monitor.scan(exponent)
    with np.errstate(over="ignore"):
        factor = np.exp(exponent)
    return factor * state


def scheme_step(
    state: np.ndarray,
    db: np.ndarray,
    cfg: SchemeConfig,
    monitor: OverflowMonitor | None = None,
) -> np.ndarray:
    """One full step: stochastic substep, then the heat propagator."""
    return cfg.propagator.matrix @ stochastic_substep(
        state, db, cfg.basis, cfg.nonlinearity, cfg.tau, monitor
    )


def run_scheme(cfg: SchemeConfig, store: BrownianStore, realization: int) -> Trajectory:
    """Iterate the scheme over all steps for one realization of the noise.

    The store's fine increments are coarsened to the scheme's grid, so runs
    at different step counts against the same store share Brownian paths.
    """
    m = cfg.m_steps
    state = initial_state(cfg.u0, cfg.mesh)

    times = np.arange(m + 1) * (cfg.tau if m else 0.0)
    l2 = np.empty(m + 1)
    hn = np.empty(m + 1)
    mins = np.empty(m + 1)
    states = [] if cfg.record_mode == "all_steps" else None
    monitor = OverflowMonitor()

    def record(idx, u):
        l2[idx] = l2_norm(u, cfg.ops)
        hn[idx] = h_norm(u, cfg.ops)
        mins[idx] = float(u.min())
        if states is not None:
            states.append(u.copy())

    record(0, state)
    if m > 0:
        if store.modes != cfg.basis.k_modes:
            raise ValueError(f"store has {store.modes} modes, basis has {cfg.basis.k_modes}")
        increments = aggregate_array(store.increments[realization], m)  # (m, K)
        for step_index in range(m):
            monitor.step_index = step_index + 1
            state = scheme_step(state, increments[step_index], cfg, monitor)
            record(step_index + 1, state)

    return Trajectory(
        times=times,
        l2_norms=l2,
        h_norms=hn,
        min_values=mins,
        final_state=state,
        min_value_seen=float(mins.min()),
        overflow=monitor.overflowed,
        overflow_events=monitor.events,
        states=states,
        record_mode=cfg.record_mode,
    )
