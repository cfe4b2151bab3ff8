"""
Camassa-Holm time evolution in nonlocal momentum form.

Both the classic equation (constant ``kappa``) and the generalized equation
with a spatial coefficient ``F(x)`` are advanced as

    m_t = -(u m_x + 2 u_x m + F'(x) u + 2 F(x) u_x),    m = u - u_xx,
    u_t = (1 - d_xx)^{-1} m_t,

which for ``F == kappa`` is ``u_t + 2 kappa u_x + 3 u u_x - u_txx = 2 u_x u_xx + u u_xxx``.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field

import numpy as np

from .spectral import (
    FieldState,
    Grid1D,
    dealias_mask,
    deriv_array,
)

logger = logging.getLogger(__name__)

__all__ = [
    "CHParams",
    "DiagnosticRecord",
    "BlowUpError",
    "StabilityWarning",
    "SimulationResult",
    "ch_rhs",
    "gch_rhs",
    "step_rk4",
    "simulate",
    "diagnostics",
    "detect_breaking",
    "dispersion_speed",
]

DEFAULT_DEALIAS = 2.0 / 3.0
STABILITY_CONSTANT = 1.0


class BlowUpError(RuntimeError):
    """Non-finite values appeared during evolution.

    ``state`` holds the last finite state, if any.
    """

    def __init__(self, message: str, state: FieldState | None = None):
        super().__init__(message)
        self.state = state


class StabilityWarning(RuntimeWarning):
    pass


@dataclass(frozen=True)
class CHParams:
    """Coefficient data for the classic or generalized equation.

    Use :meth:`classic` for constant ``kappa`` and :meth:`generalized` for a
    sampled ``F(x)``. ``dealias`` is the kept fraction of the Nyquist band applied
    to ``m_t`` (``None`` disables filtering).
    """

    F: np.ndarray = field(repr=False)
    dF: np.ndarray = field(repr=False)
    is_classic: bool
    kappa: float | None = None
    dealias: float | None = DEFAULT_DEALIAS

    @classmethod
    def classic(cls, kappa: float, grid: Grid1D, dealias: float | None = DEFAULT_DEALIAS) -> "CHParams":
        kappa = float(kappa)
        return cls(np.full(grid.n, kappa), np.zeros(grid.n), True, kappa, dealias)

    @classmethod
    def generalized(cls, F, grid: Grid1D, dF=None, dealias: float | None = DEFAULT_DEALIAS) -> "CHParams":
        """Build from samples (or a callable) ``F``; ``dF`` is derived spectrally if absent."""
        F = np.asarray(F(grid.x) if callable(F) else F, dtype=float)
        if F.shape != (grid.n,):
            raise ValueError(f"F must have {grid.n} samples, got shape {F.shape}")
        if dF is None:
            dF = deriv_array(F, grid, 1)
        else:
            dF = np.asarray(dF(grid.x) if callable(dF) else dF, dtype=float)
            mismatch = np.max(np.abs(dF - deriv_array(F, grid, 1)))
            if mismatch > 1e-8:
                raise ValueError(
                    f"supplied dF disagrees with the spectral derivative of F by {mismatch:.3e}; "
                    "F must be smooth and periodic on the box"
                )
        if not (np.isfinite(F).all() and np.isfinite(dF).all()):
            raise ValueError("F and dF must be finite")
        return cls(F, dF, False, None, dealias)

    def offset(self) -> np.ndarray:
        return self.F


@dataclass(frozen=True)
class DiagnosticRecord:
    t: float
    M0: float
    E: float
    H3: float | None
    min_slope: float
    max_abs_u: float


def _momentum_tendency(u: np.ndarray, grid: Grid1D, F: np.ndarray, dF: np.ndarray,
                       dealias: float | None) -> np.ndarray:
    uh = np.fft.rfft(u)
    ik = 1j * grid.k
    ik_odd = ik.copy()
    ik_odd[-1] = 0.0
    mh = uh * (1.0 + grid.k**2)
    m = np.fft.irfft(mh, n=grid.n)
    m_x = np.fft.irfft(ik_odd * mh, n=grid.n)
    u_x = np.fft.irfft(ik_odd * uh, n=grid.n)
    mt = -(u * m_x + 2.0 * u_x * m + dF * u + 2.0 * F * u_x)
    mth = np.fft.rfft(mt)
    if dealias is not None:
        mth = mth * dealias_mask(grid, dealias)
    return mth


def _rhs_values(u: np.ndarray, grid: Grid1D, params: CHParams) -> np.ndarray:
    mth = _momentum_tendency(u, grid, params.F, params.dF, params.dealias)
    ut = np.fft.irfft(mth / (1.0 + grid.k**2), n=grid.n)
    if not np.isfinite(ut).all():
        raise BlowUpError("non-finite tendency; the solution may be breaking")
    return ut


def gch_rhs(u: FieldState, params: CHParams) -> FieldState:
    """``u_t`` for the generalized equation with coefficient ``params.F``."""
    return u.with_values(_rhs_values(u.values, u.grid, params))


def ch_rhs(u: FieldState, params: CHParams) -> FieldState:
    """``u_t`` for the classic equation; ``params`` must be constant-coefficient."""
    if not params.is_classic:
        raise ValueError("ch_rhs requires classic (constant kappa) parameters; use gch_rhs")
    return gch_rhs(u, params)


def _stable_dt(u: np.ndarray, grid: Grid1D, C: float = STABILITY_CONSTANT) -> float:
    umax = float(np.max(np.abs(u)))
    return np.inf if umax == 0.0 else C * grid.dx / umax


def _rk4(u: np.ndarray, dt: float, grid: Grid1D, params: CHParams) -> np.ndarray:
    k1 = _rhs_values(u, grid, params)
    k2 = _rhs_values(u + 0.5 * dt * k1, grid, params)
    k3 = _rhs_values(u + 0.5 * dt * k2, grid, params)
    k4 = _rhs_values(u + dt * k3, grid, params)
    return u + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def step_rk4(u: FieldState, dt: float, params: CHParams) -> FieldState:
    """One classical RK4 step.

    Emits :class:`StabilityWarning` when ``dt > dx / max|u|`` and raises
    :class:`BlowUpError` (carrying the input state) on non-finite output.
    """
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt}")
    limit = _stable_dt(u.values, u.grid)
    if dt > limit:
        warnings.warn(f"dt={dt:g} exceeds advective bound {limit:g} at t={u.t:g}", StabilityWarning,
                      stacklevel=2)
    try:
        new = _rk4(u.values, dt, u.grid, params)
    except BlowUpError as exc:
        raise BlowUpError(f"{exc} at t={u.t:g}", u) from None
    if not np.isfinite(new).all():
        raise BlowUpError(f"non-finite state after step from t={u.t:g}", u)
    return FieldState(u.grid, new, u.t + dt)


def diagnostics(u: FieldState, params: CHParams) -> DiagnosticRecord:
    g = u.grid
    v = u.values
    u_x = deriv_array(v, g, 1)
    m = v - deriv_array(v, g, 2)
    dx = g.dx
    H3 = None
    if params.is_classic:
        H3 = 0.5 * dx * float(np.sum(v**3 + v * u_x**2 + 2.0 * params.kappa * v**2))
    return DiagnosticRecord(
        t=u.t,
        M0=dx * float(np.sum(m)),
        E=0.5 * dx * float(np.sum(v**2 + u_x**2)),
        H3=H3,
        min_slope=float(np.min(u_x)),
        max_abs_u=float(np.max(np.abs(v))),
    )


@dataclass
class SimulationResult:
    trajectory: list[FieldState]
    records: list[DiagnosticRecord]
    aborted: str | None = None
    breaking_time: float | None = None
    warnings: list[str] = field(default_factory=list)

    @property
    def final(self) -> FieldState:
        return self.trajectory[-1]


def simulate(u0: FieldState, params: CHParams, dt: float, T: float, record_every: int = 1,
             stop_below_slope: float | None = None) -> SimulationResult:
    """Fixed-step RK4 from ``u0.t`` to ``u0.t + T``.

    States and diagnostics are stored every ``record_every`` steps (and at the
    start and end). The step count is ``round(T/dt)``; the last step is shortened
    so the final time is exact. If ``stop_below_slope`` is given the run halts
    at the first record whose ``min_slope`` falls below it. Blow-up returns the
    partial trajectory with ``aborted`` set.
    """
    if not (dt > 0 and T > 0):
        raise ValueError("dt and T must be positive")
    if int(record_every) != record_every or record_every < 1:
        raise ValueError("record_every must be a positive integer")
    nsteps = max(1, int(round(T / dt)))
    t0 = u0.t
    u = u0
    result = SimulationResult([u0], [diagnostics(u0, params)])
    warned = False
    for i in range(1, nsteps + 1):
        h = (t0 + T) - u.t if i == nsteps else dt
        if not warned and h > _stable_dt(u.values, u.grid):
            msg = f"dt={h:g} exceeds advective bound {_stable_dt(u.values, u.grid):g} at t={u.t:g}"
            result.warnings.append(msg)
            logger.warning(msg)
            warned = True
        try:
            new = _rk4(u.values, h, u.grid, params)
            if not np.isfinite(new).all():
                raise BlowUpError("non-finite state")
        except BlowUpError as exc:
            result.aborted = f"blow-up after t={u.t:.6g}: {exc}"
            if result.trajectory[-1] is not u:
                result.trajectory.append(u)
                result.records.append(diagnostics(u, params))
            break
        u = FieldState(u.grid, new, t0 + T if i == nsteps else t0 + i * dt)
        if i % record_every == 0 or i == nsteps:
            rec = diagnostics(u, params)
            result.trajectory.append(u)
            result.records.append(rec)
            if stop_below_slope is not None and rec.min_slope < stop_below_slope:
                break
    result.breaking_time = None if stop_below_slope is None else detect_breaking(result.records,
                                                                                 stop_below_slope)
    return result


def detect_breaking(records: list[DiagnosticRecord], threshold: float) -> float | None:
    """Time of the first record with ``min_slope < threshold``, else ``None``."""
    for rec in records:
        if rec.min_slope < threshold:
            return rec.t
    return None


def dispersion_speed(kappa: float, k: float) -> float:
    """Linear phase speed ``2 kappa / (1 + k^2)``."""
    return 2.0 * kappa / (1.0 + k * k)

