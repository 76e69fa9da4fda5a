"""Sobolev norm growth for time-dependent perturbations of the harmonic oscillator.

Classical side: growth rates, the explicit perturbation ``phi_f``, the
fundamental matrix of ``xi'' + (1 + phi_f) xi = 0`` and its forced solution.
Quantum side: Hermite-basis evolution of ``-i du/dt = (T + phi X^2/2 + a sin t X) u``
and Sobolev norms. The two are tied together in :mod:`.correspondence`;
:mod:`.representations` checks the Schrodinger and metaplectic identities.
"""

from .growth_rates import GrowthRate, check_class_M, check_support_condition, make_catalog_rate
from .perturbation import HfEvaluator, build_phi, check_decay, check_hypotheses
from .classical_dynamics import AnalyticBasis, integrate_flow, oscillator_system
from .quantum_evolution import HermiteState, QuantumHamiltonianSpec, basis_state, evolve, sobolev_norm
from .correspondence import predicted_norm, ratio_series
from .representations import GridFunction, SymplecticMatrix, metaplectic_apply, schrodinger_rep

__version__ = "0.1.0"

__all__ = [
    "GrowthRate", "check_class_M", "check_support_condition", "make_catalog_rate",
    "HfEvaluator", "build_phi", "check_decay", "check_hypotheses",
    "AnalyticBasis", "integrate_flow", "oscillator_system",
    "HermiteState", "QuantumHamiltonianSpec", "basis_state", "evolve", "sobolev_norm",
    "predicted_norm", "ratio_series",
    "GridFunction", "SymplecticMatrix", "metaplectic_apply", "schrodinger_rep",
]
