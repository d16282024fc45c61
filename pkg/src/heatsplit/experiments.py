"""Monte-Carlo strong- and weak-error studies against a fine reference run.

The reference solution is the splitting scheme itself at the finest
resolution.  All runs inside a study consume the same fine Brownian paths
(coarse time grids get exact block sums of the fine increments), so the
comparison uses common random numbers throughout.

The strong error at a sweep value is

    sup_m sqrt( (1/R) sum_r || u_m(w_r) - u_ref(t_m, w_r) ||_{L2}^2 )

over the coarse grid times; the weak error is the absolute mean of the
paired differences of the squared final-time L2 norms.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from heatsplit.fem import assemble, l2_norm, prolongation_matrix
from heatsplit.mesh import build_uniform_unit_square
from heatsplit.noise import aggregate_array, basis_for_mesh, sample_paths
from heatsplit.nonlinearity import Nonlinearity, RegularizedSqrt, Zero
from heatsplit.propagator import build_propagator, certify_nonnegative
from heatsplit.scheme import (
    OverflowMonitor,
    SchemeConfig,
    default_initial_condition,
    initial_state,
    run_scheme,
    stochastic_substep,
)

__all__ = [
    "StudyConfig",
    "ErrorRow",
    "ErrorTable",
    "RateFit",
    "StudyResult",
    "run_study",
    "fit_rate",
    "deterministic_heat_study",
    "DEFAULT_MASTER_SEED",
]

DEFAULT_MASTER_SEED = 12345

_TEMPORAL_SWEEP = tuple(2**k for k in range(3, 12))
_SPATIAL_SWEEP = (4, 8, 16, 32)


@dataclass
class StudyConfig:
    """Parameters of one convergence study.

    Defaults reproduce the full-scale experiment protocol; the desk-scale
    configurations shipped under configs/ override the reference resolutions
    and the number of realizations.
    """

    vary: str = "time"
    n_ref: int = 64
    m_ref: int = 4096
    sweep: tuple[int, ...] | None = None
    realizations: int = 150
    t_final: float = 0.5
    k_modes: int = 4
    nonlinearity: Nonlinearity = field(default_factory=lambda: RegularizedSqrt(0.1))
    u0: Callable = default_initial_condition
    master_seed: int = DEFAULT_MASTER_SEED
    workers: int | None = None
    block_size: int = 16
    rel_error_fit_cutoff: float = 0.4

    def __post_init__(self):
        if self.vary not in ("time", "space"):
            raise ValueError(f"vary must be 'time' or 'space' (got {self.vary!r})")
        if self.sweep is None:
            self.sweep = _TEMPORAL_SWEEP if self.vary == "time" else _SPATIAL_SWEEP
        self.sweep = tuple(int(v) for v in self.sweep)
        self.validate()

    def validate(self) -> None:
        n = math.isqrt(self.k_modes)
        if n * n != self.k_modes:
            raise ValueError(f"k_modes must be a perfect square (got {self.k_modes})")
        if self.realizations < 2:
            raise ValueError("need at least 2 realizations for standard errors")
        if self.block_size < 1:
            raise ValueError("block_size must be >= 1")
        if self.vary == "time":
            for m in self.sweep:
                if self.m_ref % m != 0:
                    raise ValueError(f"sweep step count {m} does not divide m_ref={self.m_ref}")
        else:
            for n_sub in self.sweep:
                if self.n_ref % n_sub != 0:
                    raise ValueError(f"sweep mesh N={n_sub} does not divide n_ref={self.n_ref}; meshes not nested")

    def config_items(self) -> dict:
        items = {
            "study": "temporal" if self.vary == "time" else "spatial",
            "n_ref": self.n_ref,
            "m_ref": self.m_ref,
            "sweep": ",".join(str(v) for v in self.sweep),
            "realizations": self.realizations,
            "t_final": self.t_final,
            "k_modes": self.k_modes,
            "master_seed": self.master_seed,
            "block_size": self.block_size,
            "rel_error_fit_cutoff": self.rel_error_fit_cutoff,
        }
        items.update(self.nonlinearity.config_items())
        return items


@dataclass(frozen=True)
class ErrorRow:
    param_kind: str  # "tau" or "h"
    param_value: float
    error: float
    std_error: float
    rel_error: float
    ref_norm: float
    sweep_value: int


@dataclass(frozen=True)
class RateFit:
    slope: float
    intercept: float
    residual: float


@dataclass
class ErrorTable:
    rows: list
    fit: RateFit | None = None
    fit_note: str = ""


@dataclass
class StudyResult:
    config: StudyConfig
    strong: ErrorTable
    weak: ErrorTable
    certificates: dict
    overflow: dict
    min_value_seen: dict
    crn_max_deviation: float

    @property
    def all_certificates_pass(self) -> bool:
        return all(c.passed for c in self.certificates.values())


def _sq_l2(mass, block: np.ndarray) -> np.ndarray:
    """Squared L2 norms of the columns of ``block``: diag(X' M X)."""
    return np.einsum("ib,ib->b", block, mass @ block)


def _blocks(total: int, size: int) -> list[tuple[int, int]]:
    return [(s, min(s + size, total)) for s in range(0, total, size)]


def _map_blocks(fn, blocks, workers):
    if workers is not None and workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(fn, blocks))
    return [fn(b) for b in blocks]


def _ascending_sum(arr: np.ndarray) -> np.ndarray:
    """Sum over the leading axis in strictly ascending index order."""
    acc = np.zeros(arr.shape[1:])
    for i in range(arr.shape[0]):
        acc = acc + arr[i]
    return acc


def _strong_row(kind: str, pvalue: float, sweep_value: int, d2: np.ndarray, ref2: np.ndarray) -> ErrorRow:
    """Estimator, delta-method standard error and relative error at the arg-sup time.

    ``d2[m, r]`` are squared L2 distances; the standard error of the plain
    mean at the arg-sup index is pushed through the square root, so
    se(sqrt(mu)) = se(mu) / (2 sqrt(mu)).
    """
    n_real = d2.shape[1]
    mean_sq = d2.mean(axis=1)
    per_time = np.sqrt(mean_sq)
    m_star = int(np.argmax(per_time))
    est = float(per_time[m_star])
    if est > 0.0:
        se_mean = float(d2[m_star].std(ddof=1)) / math.sqrt(n_real)
        std_error = se_mean / (2.0 * est)
    else:
        std_error = 0.0
    ref_norm = float(np.sqrt(ref2[m_star].mean()))
    rel = est / ref_norm if ref_norm > 0 else 0.0
    return ErrorRow(kind, pvalue, est, std_error, rel, ref_norm, sweep_value)


def _weak_row(kind: str, pvalue: float, sweep_value: int, phi: np.ndarray, phi_ref: np.ndarray) -> ErrorRow:
    """Paired (common-random-number) estimate of |E phi(u(T)) - E phi(u_ref(T))|."""
    diff = phi - phi_ref
    n_real = diff.shape[0]
    err = float(abs(diff.mean()))
    se = float(diff.std(ddof=1)) / math.sqrt(n_real)
    ref = float(phi_ref.mean())
    rel = err / ref if ref > 0 else 0.0
    return ErrorRow(kind, pvalue, err, se, rel, ref, sweep_value)


def fit_rate(table_or_rows, rel_error_cutoff: float = 0.4) -> RateFit:
    """Least-squares slope of log(error) against log(parameter).

    Rows with error exactly zero (self comparisons) are excluded; coarsest
    rows whose relative error exceeds ``rel_error_cutoff`` are dropped as
    unreliable.  At least three usable points are required.
    """
    rows = table_or_rows.rows if isinstance(table_or_rows, ErrorTable) else list(table_or_rows)
    usable = [r for r in rows if r.error > 0.0]
    usable.sort(key=lambda r: -r.param_value)  # coarsest first
    while usable and usable[0].rel_error > rel_error_cutoff:
        usable.pop(0)
    if len(usable) < 3:
        raise ValueError(f"rate fit needs at least 3 usable points, have {len(usable)}")
    x = np.log(np.array([r.param_value for r in usable]))
    y = np.log(np.array([r.error for r in usable]))
    slope, intercept = np.polyfit(x, y, 1)
    residual = float(np.sqrt(np.mean((y - (slope * x + intercept)) ** 2)))
    return RateFit(slope=float(slope), intercept=float(intercept), residual=residual)


def _attach_fit(table: ErrorTable, cutoff: float) -> None:
    try:
        table.fit = fit_rate(table, cutoff)
    except ValueError as exc:
        table.fit = None
        table.fit_note = str(exc)


def run_study(cfg: StudyConfig) -> StudyResult:
    """Run the reference and all sweep resolutions in lockstep and build the tables."""
    cfg.validate()
    if cfg.vary == "time":
        return _run_temporal(cfg)
    return _run_spatial(cfg)


def _run_temporal(cfg: StudyConfig) -> StudyResult:
    mesh = build_uniform_unit_square(cfg.n_ref)
    ops = assemble(mesh)
    basis = basis_for_mesh(math.isqrt(cfg.k_modes), mesh)
    u0_vec = initial_state(cfg.u0, mesh)
    nl = cfg.nonlinearity

    step_counts = list(dict.fromkeys(list(cfg.sweep) + [cfg.m_ref]))
    props = {m: build_propagator(ops, cfg.t_final / m, mesh.label) for m in step_counts}
    certificates = {(cfg.n_ref, m): certify_nonnegative(props[m]) for m in step_counts}

    store = sample_paths(cfg.master_seed, cfg.realizations, cfg.k_modes, cfg.m_ref, cfg.t_final)
    m_ref = cfg.m_ref
    taus = {m: cfg.t_final / m for m in step_counts}
    sq0 = float(u0_vec @ (ops.mass @ u0_vec))

    def run_block(block):
        r0, r1 = block
        width = r1 - r0
        inc = store.increments[r0:r1]  # (B, Mf, K)
        fine = np.ascontiguousarray(np.moveaxis(inc, 0, 2))  # (Mf, K, B)
        coarse = {
            m: np.ascontiguousarray(np.moveaxis(aggregate_array(inc, m), 0, 2)) for m in cfg.sweep
        }
        u_ref = np.repeat(u0_vec[:, None], width, axis=1)
        u_sweep = {m: u_ref.copy() for m in cfg.sweep}
        d2 = {m: np.zeros((m + 1, width)) for m in cfg.sweep}
        ref2 = {m: np.zeros((m + 1, width)) for m in cfg.sweep}
        for m in cfg.sweep:
            ref2[m][0] = sq0
        monitors = {m: OverflowMonitor() for m in cfg.sweep}
        monitors["ref"] = OverflowMonitor()
        mins = {m: float(u0_vec.min()) for m in cfg.sweep}
        mins["ref"] = float(u0_vec.min())

        for mf in range(m_ref):
            u_ref = props[m_ref].matrix @ stochastic_substep(
                u_ref, fine[mf], basis, nl, taus[m_ref], monitors["ref"]
            )
            mins["ref"] = min(mins["ref"], float(u_ref.min()))
            for m in cfg.sweep:
                q = m_ref // m
                if (mf + 1) % q == 0:
                    mc = (mf + 1) // q
                    u_sweep[m] = props[m].matrix @ stochastic_substep(
                        u_sweep[m], coarse[m][mc - 1], basis, nl, taus[m], monitors[m]
                    )
                    mins[m] = min(mins[m], float(u_sweep[m].min()))
                    d2[m][mc] = _sq_l2(ops.mass, u_sweep[m] - u_ref)
                    ref2[m][mc] = _sq_l2(ops.mass, u_ref)

        phi_ref = _sq_l2(ops.mass, u_ref)
        phi = {m: _sq_l2(ops.mass, u_sweep[m]) for m in cfg.sweep}

        endpoint_fine = _ascending_sum(fine)  # (K, B), canonical fine endpoints
        dev = 0.0
        for m in cfg.sweep:
            dev = max(dev, float(np.abs(_ascending_sum(coarse[m]) - endpoint_fine).max()))
        return d2, ref2, phi_ref, phi, monitors, mins, dev

    outs = _map_blocks(run_block, _blocks(cfg.realizations, cfg.block_size), cfg.workers)

    d2 = {m: np.concatenate([o[0][m] for o in outs], axis=1) for m in cfg.sweep}
    ref2 = {m: np.concatenate([o[1][m] for o in outs], axis=1) for m in cfg.sweep}
    phi_ref = np.concatenate([o[2] for o in outs])
    phi = {m: np.concatenate([o[3][m] for o in outs]) for m in cfg.sweep}
    overflow = {
        key: any(o[4][key].overflowed for o in outs) for key in list(cfg.sweep) + ["ref"]
    }
    min_seen = {key: min(o[5][key] for o in outs) for key in list(cfg.sweep) + ["ref"]}
    crn_dev = max(o[6] for o in outs)

    strong_rows = [_strong_row("tau", taus[m], m, d2[m], ref2[m]) for m in cfg.sweep]
    weak_rows = [_weak_row("tau", taus[m], m, phi[m], phi_ref) for m in cfg.sweep]
    strong = ErrorTable(rows=strong_rows)
    weak = ErrorTable(rows=weak_rows)
    _attach_fit(strong, cfg.rel_error_fit_cutoff)

    return StudyResult(
        config=cfg,
        strong=strong,
        weak=weak,
        certificates=certificates,
        overflow=overflow,
        min_value_seen=min_seen,
        crn_max_deviation=crn_dev,
    )


def _run_spatial(cfg: StudyConfig) -> StudyResult:
    n_mode = math.isqrt(cfg.k_modes)
    all_n = list(dict.fromkeys(list(cfg.sweep) + [cfg.n_ref]))
    meshes = {n: build_uniform_unit_square(n) for n in all_n}
    ops = {n: assemble(meshes[n]) for n in all_n}
    bases = {n: basis_for_mesh(n_mode, meshes[n]) for n in all_n}
    u0_vecs = {n: initial_state(cfg.u0, meshes[n]) for n in all_n}
    tau = cfg.t_final / cfg.m_ref
    nl = cfg.nonlinearity

    props = {n: build_propagator(ops[n], tau, meshes[n].label) for n in all_n}
    certificates = {(n, cfg.m_ref): certify_nonnegative(props[n]) for n in all_n}
    prol = {n: prolongation_matrix(meshes[n], meshes[cfg.n_ref]) for n in cfg.sweep}

    store = sample_paths(cfg.master_seed, cfg.realizations, cfg.k_modes, cfg.m_ref, cfg.t_final)
    mass_ref = ops[cfg.n_ref].mass
    n_ref = cfg.n_ref
    m_ref = cfg.m_ref

    def run_block(block):
        r0, r1 = block
        width = r1 - r0
        inc = store.increments[r0:r1]
        fine = np.ascontiguousarray(np.moveaxis(inc, 0, 2))  # (Mf, K, B)
        u = {n: np.repeat(u0_vecs[n][:, None], width, axis=1) for n in all_n}
        d2 = {n: np.zeros((m_ref + 1, width)) for n in cfg.sweep}
        ref2 = np.zeros((m_ref + 1, width))
        ref2[0] = _sq_l2(mass_ref, u[n_ref])
        for n in cfg.sweep:
            d2[n][0] = _sq_l2(mass_ref, prol[n] @ u[n] - u[n_ref])
        monitors = {n: OverflowMonitor() for n in all_n}
        mins = {n: float(u0_vecs[n].min()) for n in all_n}

        for m in range(m_ref):
            for n in all_n:
                u[n] = props[n].matrix @ stochastic_substep(
                    u[n], fine[m], bases[n], nl, tau, monitors[n]
                )
                mins[n] = min(mins[n], float(u[n].min()))
            ref2[m + 1] = _sq_l2(mass_ref, u[n_ref])
            for n in cfg.sweep:
                d2[n][m + 1] = _sq_l2(mass_ref, prol[n] @ u[n] - u[n_ref])

        phi_ref = _sq_l2(mass_ref, u[n_ref])
        phi = {n: _sq_l2(mass_ref, prol[n] @ u[n]) for n in cfg.sweep}
        return d2, ref2, phi_ref, phi, monitors, mins, 0.0

    outs = _map_blocks(run_block, _blocks(cfg.realizations, cfg.block_size), cfg.workers)

    d2 = {n: np.concatenate([o[0][n] for o in outs], axis=1) for n in cfg.sweep}
    ref2 = np.concatenate([o[1] for o in outs], axis=1)
    phi_ref = np.concatenate([o[2] for o in outs])
    phi = {n: np.concatenate([o[3][n] for o in outs]) for n in cfg.sweep}
    overflow = {n: any(o[4][n].overflowed for o in outs) for n in all_n}
    min_seen = {n: min(o[5][n] for o in outs) for n in all_n}

    sqrt2 = math.sqrt(2.0)
    strong_rows = [_strong_row("h", sqrt2 / n, n, d2[n], ref2) for n in cfg.sweep]
    weak_rows = [_weak_row("h", sqrt2 / n, n, phi[n], phi_ref) for n in cfg.sweep]
    strong = ErrorTable(rows=strong_rows)
    weak = ErrorTable(rows=weak_rows)
    _attach_fit(strong, cfg.rel_error_fit_cutoff)

    return StudyResult(
        config=cfg,
        strong=strong,
        weak=weak,
        certificates=certificates,
        overflow=overflow,
        min_value_seen=min_seen,
        crn_max_deviation=0.0,
    )


def deterministic_heat_study(
    n_values=(8, 16, 32), m_steps: int = 64, t_final: float = 0.1, master_seed: int = 0
) -> ErrorTable:
    """Zero-nonlinearity runs against the exact heat solution.

    With f = 0 the scheme is exact in time up to the matrix-exponential
    tolerance, so the final-time error against exp(-2 pi^2 T) sin sin is a
    pure spatial error and its log-log slope in h sits at 2.
    """
    store = sample_paths(master_seed, 1, 1, m_steps, t_final)
    rows = []
    decay = math.exp(-2.0 * math.pi**2 * t_final)
    for n in n_values:
        mesh = build_uniform_unit_square(n)
        ops = assemble(mesh)
        prop = build_propagator(ops, t_final / m_steps, mesh.label)
        cfg = SchemeConfig(
            mesh=mesh,
            ops=ops,
            propagator=prop,
            nonlinearity=Zero(),
            basis=basis_for_mesh(1, mesh),
            m_steps=m_steps,
            t_final=t_final,
        )
        traj = run_scheme(cfg, store, 0)
        exact = decay * initial_state(default_initial_condition, mesh)
        err = l2_norm(traj.final_state - exact, ops)
        ref = l2_norm(exact, ops)
        rows.append(ErrorRow("h", math.sqrt(2.0) / n, err, 0.0, err / ref, ref, n))
    table = ErrorTable(rows=rows)
    _attach_fit(table, 0.4)
    return table
