"""
Reusable experiment definitions for the variational certification.

The CLI and the tests share these so that reported numbers refer to the
same paths, perturbations, and offsets.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .spectral import Grid1D, deriv_array, interpolate
from .variational import (
    ActionOffset,
    DiffeoPath,
    DiscreteDiffeo,
    Perturbation,
    discrete_action,
    identity_check,
    invert,
    variation_inverse,
    variation_velocity,
    variation_velocity_gradient,
)

__all__ = [
    "SHEAR_SI",
    "default_offsets",
    "smooth_path",
    "smooth_perturbation",
    "random_diffeo",
    "random_pair",
    "variation_oracles",
    "right_invariance_gap",
    "ConvergenceRow",
    "identity_convergence",
    "observed_orders",
]

# omega0 [1/s], g [m/s^2], h0 [m], c0
SHEAR_SI = dict(omega0=0.5, g=9.81, h0=0.4, c0=0.7)


def default_offsets(grid: Grid1D) -> list[ActionOffset]:
    """Zero, ``c0 = 0.7``, the shear value of ``kappa`` and ``F = 0.5 + 0.2 sin x``."""
    return [
        ActionOffset.zero(grid),
        ActionOffset.irrotational(0.7, grid),
        ActionOffset.shear(grid=grid, **SHEAR_SI),
        ActionOffset.from_field(lambda x: 0.5 + 0.2 * np.sin(2 * np.pi * x / grid.L), grid,
                                label="F=0.5+0.2sin(x)"),
    ]


def _path_disp(t, x):
    return (0.15 * np.sin(x + 0.7 * t) + 0.08 * np.cos(2 * x - 1.3 * t) * np.cos(0.9 * t)
            + 0.05 * t * np.sin(3 * x))


def smooth_path(grid: Grid1D, m: int, T: float = 1.0) -> DiffeoPath:
    """Generic smooth path of circle diffeomorphisms (``L = 2 pi`` units)."""
    s = 2 * np.pi / grid.L
    return DiffeoPath.from_function(grid, lambda t, x: _path_disp(t, s * x) / s, T, m)


def smooth_perturbation(path: DiffeoPath) -> Perturbation:
    T = path.T
    s = 2 * np.pi / path.grid.L

    def phi(t, x):
        y = s * x
        return (np.sin(np.pi * t / T) * (0.3 * np.cos(y) + 0.1 * np.sin(3 * y + 0.4))
                + 0.2 * np.sin(2 * np.pi * t / T) * np.sin(2 * y + 0.5)) / s

    return Perturbation.from_function(path, phi)


def _random_trig(grid: Grid1D, rng: np.random.Generator, modes: int = 3):
    j = np.arange(1, modes + 1)
    a, b = rng.standard_normal((2, modes)) / j
    k = 2 * np.pi * j / grid.L
    arg = np.outer(grid.x, k)
    val = np.cos(arg) @ a + np.sin(arg) @ b
    slope = np.cos(arg) @ (b * k) - np.sin(arg) @ (a * k)
    return val, slope


def random_diffeo(grid: Grid1D, rng: np.random.Generator, max_slope: float = 0.3) -> DiscreteDiffeo:
    """Random low-mode diffeomorphism with ``|d'| <= max_slope``."""
    val, slope = _random_trig(grid, rng)
    return DiscreteDiffeo(grid, val * (max_slope / np.max(np.abs(slope))))


def random_pair(grid: Grid1D, rng: np.random.Generator):
    """``(gamma, gamma_t, phi, phi_t)`` with smooth random low-mode samples."""
    gamma = random_diffeo(grid, rng)
    gamma_t, phi, phi_t = (_random_trig(grid, rng)[0] for _ in range(3))
    return gamma, gamma_t, phi, phi_t


def variation_oracles(gamma: DiscreteDiffeo, gamma_t, phi, phi_t, h: float = 1e-5) -> dict:
    """Max-abs gaps between the analytic variations and centred ``h`` differences.

    The difference quotients perturb ``gamma -> gamma + e phi`` and
    ``gamma_t -> gamma_t + e phi_t`` and invert the perturbed map directly.
    """
    g = gamma.grid

    def inverse_disp(e):
        return invert(DiscreteDiffeo(g, gamma.disp + e * phi)).disp

    def velocity(e):
        gm = DiscreteDiffeo(g, gamma.disp + e * phi)
        return interpolate(gamma_t + e * phi_t, g, gm.inverse_nodes())

    fd_inv = (inverse_disp(h) - inverse_disp(-h)) / (2 * h)
    fd_vel = (velocity(h) - velocity(-h)) / (2 * h)
    fd_grad = deriv_array(fd_vel, g, 1)
    return {
        "inverse": float(np.max(np.abs(variation_inverse(gamma, phi).values - fd_inv))),
        "velocity": float(np.max(np.abs(variation_velocity(gamma, gamma_t, phi, phi_t).values - fd_vel))),
        "velocity_gradient": float(np.max(np.abs(
            variation_velocity_gradient(gamma, gamma_t, phi, phi_t).values - fd_grad))),
    }


def right_invariance_gap(path: DiffeoPath, offset: ActionOffset, psi: DiscreteDiffeo) -> float:
    """``|a(gamma o psi) - a(gamma)|`` for a fixed ``psi``."""
    return abs(discrete_action(path.right_compose(psi), offset) - discrete_action(path, offset))


@dataclass(frozen=True)
class ConvergenceRow:
    offset: str
    m: int
    lhs: float
    rhs: float
    gap: float
    estimate: float


def identity_convergence(n: int = 128, m_values=(32, 64, 128), eps: float = 1e-3,
                         offsets=None) -> list[ConvergenceRow]:
    """Identity gaps on the smooth path for each offset and time resolution."""
    grid = Grid1D(2 * np.pi, n)
    offsets = default_offsets(grid) if offsets is None else offsets
    rows = []
    for off in offsets:
        for m in m_values:
            path = smooth_path(grid, m)
            rep = identity_check(path, smooth_perturbation(path), off, eps=eps)
            rows.append(ConvergenceRow(rep.offset, m, rep.lhs, rep.rhs, rep.gap, rep.estimate))
    return rows


def observed_orders(rows: list[ConvergenceRow]) -> dict:
    """``log2(gap(m) / gap(2m))`` for each offset and consecutive doubling."""
    out = {}
    by = {}
    for r in rows:
        by.setdefault(r.offset, {})[r.m] = r.gap
    for off, gaps in by.items():
        for m in sorted(gaps):
            if 2 * m in gaps and gaps[2 * m] > 0:
                out[(off, m)] = float(np.log2(gaps[m] / gaps[2 * m]))
    return out
