"""
N-peakon dynamics for ``kappa = 0``.

The field is ``u(x) = sum_i 2 p_i G(x - q_i)`` where ``G`` is the Green's
function of ``1 - d_xx`` (``exp(-|x|)/2`` on the line, a cosh kernel on a
periodic box), so a lone line peakon of momentum ``p`` has height and speed
``p``. Positions and momenta evolve under the canonical Hamiltonian

    H = sum_ij p_i p_j G(q_i - q_j).

The field energy ``(1/2) int (u^2 + u_x^2) dx`` equals ``2 H``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .spectral import FieldState, Grid1D

__all__ = [
    "LINE",
    "PeakonState",
    "PeakonCollision",
    "PeakonRun",
    "green",
    "green_slope",
    "peakon_field",
    "peakon_rhs",
    "peakon_hamiltonian",
    "peakon_energy",
    "simulate_peakons",
    "asymptotic_momenta",
]

LINE = None
COLLISION_GUARD = 1e-8


class PeakonCollision(RuntimeError):
    def __init__(self, message: str, t: float, state: "PeakonState | None" = None):
        super().__init__(message)
        self.t = t
        self.state = state


def _min_separation(q: np.ndarray, L) -> float:
    if q.size < 2:
        return np.inf
    d = np.abs(q[:, None] - q[None, :])
    if L is not None:
        d = np.mod(d, L)
        d = np.minimum(d, L - d)
    d[np.diag_indices(q.size)] = np.inf
    return float(d.min())


@dataclass(frozen=True)
class PeakonState:
    """Peakon positions ``q`` and momenta ``p`` at time ``t``.

    ``L`` is the box length for a periodic ensemble, or ``None`` on the line.
    """

    q: np.ndarray
    p: np.ndarray
    t: float = 0.0
    L: float | None = LINE

    def __post_init__(self):
        q = np.atleast_1d(np.array(self.q, dtype=float))
        p = np.atleast_1d(np.array(self.p, dtype=float))
        if q.ndim != 1 or q.shape != p.shape or q.size < 1:
            raise ValueError("q and p must be equal-length 1-d arrays with at least one peakon")
        if not (np.isfinite(q).all() and np.isfinite(p).all() and np.isfinite(self.t)):
            raise ValueError("peakon state must be finite")
        if self.L is not None and not self.L > 0:
            raise ValueError("box length must be positive")
        q.setflags(write=False)
        p.setflags(write=False)
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "p", p)

    @property
    def n(self) -> int:
        return self.q.size

    def min_separation(self) -> float:
        return _min_separation(self.q, self.L)

    def replace(self, q=None, p=None, t=None) -> "PeakonState":
        return PeakonState(self.q if q is None else q, self.p if p is None else p,
                           self.t if t is None else t, self.L)


def green(x, L: float | None = LINE):
    """Green's function of ``1 - d_xx`` on the line (``L=None``) or a box of length ``L``."""
    x = np.asarray(x, dtype=float)
    if L is None:
        return 0.5 * np.exp(-np.abs(x))
    d = np.mod(x, L)
    # exp form avoids cosh/sinh overflow on large boxes
    a = np.exp(-d) + np.exp(d - L)
    return 0.5 * a / (1.0 - np.exp(-L))


def green_slope(x, L: float | None = LINE):
    """``G'(x)`` with the value 0 taken at the kink ``x = 0``."""
    x = np.asarray(x, dtype=float)
    if L is None:
        return -0.5 * np.sign(x) * np.exp(-np.abs(x))
    d = np.mod(x, L)
    s = 0.5 * (np.exp(d - L) - np.exp(-d)) / (1.0 - np.exp(-L))
    return np.where(d == 0.0, 0.0, s)


def peakon_field(s: PeakonState, grid: Grid1D, origin: float = 0.0) -> FieldState:
    """Sample ``u = sum 2 p_i G(x - q_i)`` at ``grid.x + origin``.

    On a periodic ensemble ``grid.L`` must equal ``s.L``.
    """
    if s.L is not None and not np.isclose(grid.L, s.L, rtol=1e-12):
        raise ValueError(f"grid length {grid.L} does not match peakon box {s.L}")
    x = grid.x + origin
    u = 2.0 * green(x[:, None] - s.q[None, :], s.L) @ s.p
    return FieldState(grid, u, s.t)


def _pairwise(q: np.ndarray, L):
    diff = q[:, None] - q[None, :]
    return green(diff, L), green_slope(diff, L)


def _vector_field(q: np.ndarray, p: np.ndarray, L, t: float):
    # kernel, slope and collision guard share one gap matrix and one exponential pass
    d = q[:, None] - q[None, :]
    if L is None:
        a = np.abs(d)
        G = 0.5 * np.exp(-a)
        dG = -np.sign(d) * G
        sep = a
    else:
        r = np.mod(d, L)
        e1, e2 = np.exp(-r), np.exp(r - L)
        c = 0.5 / (1.0 - np.exp(-L))
        G = c * (e1 + e2)
        dG = np.where(r == 0.0, 0.0, c * (e2 - e1))
        sep = np.minimum(r, L - r)
    if q.size > 1:
        np.fill_diagonal(sep, np.inf)
        if sep.min() < COLLISION_GUARD:
            raise PeakonCollision(f"peakons within {COLLISION_GUARD:g} at t={t:g}", t)
    return 2.0 * G @ p, -2.0 * p * (dG @ p)


def peakon_rhs(s: PeakonState) -> tuple[np.ndarray, np.ndarray]:
    """``(dq/dt, dp/dt)`` from Hamilton's equations."""
    try:
        return _vector_field(s.q, s.p, s.L, s.t)
    except PeakonCollision as exc:
        exc.state = s
        raise


def peakon_hamiltonian(s: PeakonState) -> float:
    G, _ = _pairwise(s.q, s.L)
    return float(s.p @ G @ s.p)


def peakon_energy(s: PeakonState) -> float:
    """Field energy ``(1/2) int (u^2 + u_x^2) dx`` of the ensemble, ``= 2 H``."""
    return 2.0 * peakon_hamiltonian(s)


@dataclass
class PeakonRun:
    states: list[PeakonState]
    H: list[float]
    aborted: str | None = None
    collision_time: float | None = None
    times: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        self.times = np.array([s.t for s in self.states])

    @property
    def final(self) -> PeakonState:
        return self.states[-1]

    def positions(self) -> np.ndarray:
        return np.array([s.q for s in self.states])

    def momenta(self) -> np.ndarray:
        return np.array([s.p for s in self.states])


def _rk4_step(q: np.ndarray, p: np.ndarray, L, t: float, h: float):
    k1q, k1p = _vector_field(q, p, L, t)
    k2q, k2p = _vector_field(q + 0.5 * h * k1q, p + 0.5 * h * k1p, L, t + 0.5 * h)
    k3q, k3p = _vector_field(q + 0.5 * h * k2q, p + 0.5 * h * k2p, L, t + 0.5 * h)
    k4q, k4p = _vector_field(q + h * k3q, p + h * k3p, L, t + h)
    return (q + h / 6.0 * (k1q + 2 * k2q + 2 * k3q + k4q),
            p + h / 6.0 * (k1p + 2 * k2p + 2 * k3p + k4p))


def _signed_gaps(q: np.ndarray, L) -> np.ndarray:
    d = q[:, None] - q[None, :]
    if L is not None:
        d = d - L * np.round(d / L)
    return d


def _crossed(q_old: np.ndarray, q_new: np.ndarray, L) -> bool:
    # a pair that changes sides within one step has passed through a collision
    a, b = _signed_gaps(q_old, L), _signed_gaps(q_new, L)
    near = np.abs(a - b) < (np.inf if L is None else L / 4)
    return bool(np.any((np.sign(a) != np.sign(b)) & near))


def simulate_peakons(s0: PeakonState, dt: float, T: float, record_every: int = 1) -> PeakonRun:
    """Integrate with RK4 for total signed time ``T`` (negative runs backwards).

    A near-collision, or a pair swapping sides within one step, stops the run;
    the partial trajectory is returned with ``collision_time`` set.
    """
    if not dt > 0:
        raise ValueError("dt must be positive")
    nsteps = max(1, int(round(abs(T) / dt)))
    h = T / nsteps
    L = s0.L
    q, p = s0.q.copy(), s0.p.copy()
    states, H = [s0], [peakon_hamiltonian(s0)]

    def stop(i: int, reason: str) -> PeakonRun:
        t = s0.t + i * h
        if i > 0 and states[-1].t != t:
            s = PeakonState(q, p, t, L)
            states.append(s)
            H.append(peakon_hamiltonian(s))
        return PeakonRun(states, H, aborted=reason, collision_time=t)

    for i in range(1, nsteps + 1):
        try:
            q_new, p_new = _rk4_step(q, p, L, s0.t + (i - 1) * h, h)
        except PeakonCollision as exc:
            return stop(i - 1, str(exc))
        if _crossed(q, q_new, L):
            return stop(i - 1, f"peakons crossed near t={s0.t + (i - 1) * h:g}")
        if not (np.isfinite(q_new).all() and np.isfinite(p_new).all()):
            return stop(i - 1, f"non-finite state near t={s0.t + i * h:g}")
        q, p = q_new, p_new
        if i % record_every == 0 or i == nsteps:
            s = PeakonState(q, p, s0.t + i * h, L)
            states.append(s)
            H.append(peakon_hamiltonian(s))
    return PeakonRun(states, H)


def asymptotic_momenta(s: PeakonState) -> np.ndarray:
    """Sorted momenta the ensemble approaches once all peakons separate (N <= 2, line).

    For two peakons the conserved total momentum ``P`` and energy ``2H`` fix the
    asymptotic pair as the roots of ``lam^2 - P lam + (P^2 - 2H)/2``.
    """
    if s.L is not None or s.n > 2:
        raise NotImplementedError("closed form only for one or two line peakons")
    if s.n == 1:
        return s.p.copy()
    P = float(s.p.sum())
    two_H = 2.0 * peakon_hamiltonian(s)
    disc = max(P * P - 2.0 * (P * P - two_H), 0.0)
    r = np.sqrt(disc)
    return np.sort([(P - r) / 2.0, (P + r) / 2.0])
