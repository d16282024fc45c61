"""Nonnegativity-preserving splitting solver for the stochastic heat equation.

The package discretizes the heat equation driven by finitely many Brownian
motions with a multiplicative coefficient: mass-lumped P1 finite elements in
space, and per time step an exact solve of the frozen-coefficient stochastic
subsystem followed by the heat semigroup of the lumped discrete Laplacian.
On weakly acute meshes the deterministic substep is an entrywise nonnegative
matrix, so nonnegative initial data stays nonnegative.
"""

from heatsplit.mesh import Mesh, AcutenessReport, build_uniform_unit_square, check_weak_acuteness
from heatsplit.fem import FemOperators, FemFunction, assemble, l2_norm, h_norm, nodal_interpolant, prolongate
from heatsplit.noise import NoiseBasis, BrownianStore, eval_basis, basis_for_mesh, sample_paths, aggregate
from heatsplit.nonlinearity import Nonlinearity, Linear, RegularizedSqrt, HalfSqrt, Zero
from heatsplit.propagator import HeatPropagator, NonnegativityCertificate, build_propagator, certify_nonnegative
from heatsplit.scheme import SchemeConfig, Trajectory, initial_state, stochastic_substep, run_scheme
from heatsplit.experiments import StudyConfig, ErrorTable, run_study, fit_rate

__version__ = "0.1.0"
