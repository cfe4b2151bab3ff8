"""
chlab: a numerical laboratory for the Camassa-Holm equation.

Modules
-------
spectral     periodic Fourier substrate
dynamics     classic and generalized equation, RK4, diagnostics
peakons      N-peakon Hamiltonian dynamics
scaling      shallow-water scaling pipeline and linear background flows
variational  discrete action on circle diffeomorphisms and its first variation
runner, cli  configuration-driven experiments
"""

from .dynamics import CHParams, ch_rhs, gch_rhs, simulate, step_rk4
from .peakons import PeakonState, simulate_peakons
from .spectral import FieldState, Grid1D

__all__ = ["Grid1D", "FieldState", "CHParams", "ch_rhs", "gch_rhs", "step_rk4", "simulate",
           "PeakonState", "simulate_peakons"]

__version__ = "0.1.0"
