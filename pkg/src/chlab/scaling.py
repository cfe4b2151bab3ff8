"""
Shallow-water scaling pipeline and linear background flows.

Variable maps
-------------
``nondim_map`` takes dimensional SI values to the nondimensional ones::

    x = lam * x',  z = h0 * z',  eta = a * eta',  t = lam / sqrt(g h0) * t',
    u = sqrt(g h0) * u',  v = h0 sqrt(g h0) / lam * v',
    p = p0 + rho g h0 (1 - z') + rho g h0 * p'.

``eps_scale`` then divides ``u, v, p`` by ``eps = a/h0``, and ``delta_removal``
rescales with ``A = sqrt(eps)/delta``::

    x -> A x,   t -> A t,   v -> v / A.

With this direction the vertical momentum equation ``delta^2 [v_t + ...] = -p_z``
turns into ``eps [v_t + ...] = -p_z`` while the rest of the system keeps its form.

Linear flows
------------
For a right-moving profile ``eta = f(x - t)`` the linear system has

    irrotational   u = eta + c0,                      v = -z eta_x
    shear          u = eta + (w0 sqrt(g h0)/g) z + c0, v = -z eta_x
    arbitrary      u = eta + F(x, z),                 v = -z eta_x - G(x, z) + G(x, 0)

with ``G_z = F_x`` and the pressure ``p = eta`` at every depth.
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields, replace
from typing import Callable, Literal

import numpy as np
from numpy.polynomial import chebyshev as C

from .spectral import Grid1D, deriv_array, interpolate

__all__ = [
    "PhysicalParams",
    "ScaleParams",
    "Sample",
    "Profile",
    "ArbitraryVorticity",
    "LinearSolution",
    "DroppedDepthFactor",
    "LinearResidualReport",
    "scale_params",
    "nondim_map",
    "redim_map",
    "eps_scale",
    "delta_removal",
    "compute_kappa",
    "linear_solution",
    "verify_linear_system",
    "gauss_legendre_depth_integral",
    "delta_removal_jet",
    "system_residuals",
]

Regime = Literal["irrotational", "shear", "arbitrary"]
REGIMES = ("irrotational", "shear", "arbitrary")
GL_NODES = 32
CLOSURE_TOL = 1e-8


@dataclass(frozen=True)
class PhysicalParams:
    """Dimensional constants in SI units."""

    g: float = 9.81
    h0: float = 1.0
    a: float = 0.1
    lam: float = 10.0
    omega0: float = 0.0
    c0: float = 0.0
    rho: float = 1000.0
    p0: float = 101325.0

    def __post_init__(self):
        for f in fields(self):
            v = getattr(self, f.name)
            if not np.isfinite(v):
                raise ValueError(f"{f.name} must be finite, got {v}")
        bad = [n for n in ("g", "h0", "a", "lam", "rho") if not getattr(self, n) > 0]
        if bad:
            raise ValueError(f"must be positive: {', '.join(bad)}")

    @property
    def speed(self) -> float:
        """Long-wave speed ``sqrt(g h0)``."""
        return float(np.sqrt(self.g * self.h0))

    @property
    def shear_slope(self) -> float:
        """Nondimensional background shear ``omega0 sqrt(g h0) / g``."""
        return self.omega0 * self.speed / self.g


@dataclass(frozen=True)
class ScaleParams:
    eps: float
    delta: float

    def __post_init__(self):
        if not (self.eps > 0 and self.delta > 0):
            raise ValueError("eps and delta must be positive")


def scale_params(p: PhysicalParams) -> ScaleParams:
    """Amplitude ``a/h0`` and shallowness ``h0/lam``."""
    return ScaleParams(p.a / p.h0, p.h0 / p.lam)


@dataclass(frozen=True)
class Sample:
    """One (or an array of) flow samples, tagged dimensional or nondimensional.

    ``p`` is the full pressure in the dimensional phase and the dynamic part
    in the nondimensional phase.
    """

    x: np.ndarray | float
    z: np.ndarray | float
    t: np.ndarray | float
    u: np.ndarray | float
    v: np.ndarray | float
    eta: np.ndarray | float
    p: np.ndarray | float
    phase: Literal["dimensional", "nondimensional"] = "dimensional"

    def __post_init__(self):
        if self.phase not in ("dimensional", "nondimensional"):
            raise ValueError(f"unknown phase {self.phase!r}")

    def values(self) -> dict:
        return {k: getattr(self, k) for k in ("x", "z", "t", "u", "v", "eta", "p")}


def _require(s: Sample, phase: str):
    if s.phase != phase:
        raise ValueError(f"expected a {phase} sample, got {s.phase}")


def nondim_map(p: PhysicalParams, s: Sample) -> Sample:
    _require(s, "dimensional")
    c = p.speed
    z = np.divide(s.z, p.h0)
    hydro = p.p0 + p.rho * p.g * p.h0 * (1.0 - z)
    return Sample(
        x=np.divide(s.x, p.lam),
        z=z,
        t=np.multiply(s.t, c / p.lam),
        u=np.divide(s.u, c),
        v=np.multiply(s.v, p.lam / (p.h0 * c)),
        eta=np.divide(s.eta, p.a),
        p=(s.p - hydro) / (p.rho * p.g * p.h0),
        phase="nondimensional",
    )


def redim_map(p: PhysicalParams, s: Sample) -> Sample:
    """Inverse of :func:`nondim_map`."""
    _require(s, "nondimensional")
    c = p.speed
    return Sample(
        x=np.multiply(s.x, p.lam),
        z=np.multiply(s.z, p.h0),
        t=np.multiply(s.t, p.lam / c),
        u=np.multiply(s.u, c),
        v=np.multiply(s.v, p.h0 * c / p.lam),
        eta=np.multiply(s.eta, p.a),
        p=p.p0 + p.rho * p.g * p.h0 * (1.0 - np.asarray(s.z)) + p.rho * p.g * p.h0 * np.asarray(s.p),
        phase="dimensional",
    )


def eps_scale(s: Sample, eps: float, inverse: bool = False) -> Sample:
    """Divide ``u, v, p`` by ``eps`` (multiply when ``inverse``)."""
    _require(s, "nondimensional")
    if not eps > 0:
        raise ValueError("eps must be positive")
    f = eps if inverse else 1.0 / eps
    return replace(s, u=np.multiply(s.u, f), v=np.multiply(s.v, f), p=np.multiply(s.p, f))


def delta_removal(s: Sample, eps: float, delta: float, inverse: bool = False) -> Sample:
    """``x, t -> A x, A t`` and ``v -> v/A`` with ``A = sqrt(eps)/delta``."""
    _require(s, "nondimensional")
    if not (eps > 0 and delta > 0):
        raise ValueError("eps and delta must be positive")
    A = np.sqrt(eps) / delta
    if inverse:
        A = 1.0 / A
    return replace(s, x=np.multiply(s.x, A), t=np.multiply(s.t, A), v=np.divide(s.v, A))


# --- residual bookkeeping for the scaled system --------------------------

JET_KEYS = ("u", "u_t", "u_x", "u_z", "v", "v_t", "v_x", "v_z", "p", "p_x", "p_z",
            "eta", "eta_t", "eta_x")


def system_residuals(jet: dict, eps: float, vertical: float) -> dict:
    """Residuals of the scaled Euler system from a jet of point values.

    ``vertical`` multiplies the vertical momentum balance (``delta**2`` before
    the delta removal, ``eps`` after). Surface conditions are evaluated from the
    same jet, which the caller should take on the free surface.
    """
    j = jet
    return {
        "momentum_x": j["u_t"] + eps * (j["u"] * j["u_x"] + j["v"] * j["u_z"]) + j["p_x"],
        "momentum_z": vertical * (j["v_t"] + eps * (j["u"] * j["v_x"] + j["v"] * j["v_z"])) + j["p_z"],
        "mass": j["u_x"] + j["v_z"],
        "surface_kinematic": j["v"] - j["eta_t"] - eps * j["u"] * j["eta_x"],
        "surface_dynamic": j["p"] - j["eta"],
    }


def delta_removal_jet(jet: dict, eps: float, delta: float) -> dict:
    """Transform a derivative jet under :func:`delta_removal`.

    Horizontal and time derivatives pick up ``1/A``, ``v`` is divided by ``A``.
    """
    A = np.sqrt(eps) / delta
    out = dict(jet)
    for k in ("u_t", "u_x", "p_x", "eta_t", "eta_x", "v_z"):
        out[k] = jet[k] / A
    out["v"] = jet["v"] / A
    out["v_t"] = jet["v_t"] / A**2
    out["v_x"] = jet["v_x"] / A**2
    return out


# --- kappa ---------------------------------------------------------------

def compute_kappa(regime: Regime, p: PhysicalParams) -> float:
    """Constant ``kappa`` of the classic equation for a background flow."""
    if regime == "irrotational":
        return float(p.c0)
    if regime == "shear":
        return float(p.shear_slope + p.c0)
    if regime == "arbitrary":
        raise ValueError("arbitrary vorticity gives a coefficient F(x), not a scalar kappa")
    raise ValueError(f"unknown regime {regime!r}")


# --- profiles and linear solutions ---------------------------------------

@dataclass(frozen=True)
class Profile:
    """Periodic surface profile ``f`` with derivatives.

    ``func(s, order)`` evaluates ``f^(order)(s)``; build with :meth:`sine`,
    :meth:`gaussian` or :meth:`from_samples`.
    """

    name: str
    func: Callable = field(repr=False)

    def __call__(self, s, order: int = 0):
        return self.func(np.asarray(s, dtype=float), order)

    @classmethod
    def sine(cls, amplitude: float = 0.1, k: float = 1.0, phase: float = 0.0) -> "Profile":
        def f(s, order):
            arg = k * s + phase
            return amplitude * k**order * np.sin(arg + order * np.pi / 2)
        return cls(f"sine(A={amplitude:g},k={k:g})", f)

    @classmethod
    def gaussian(cls, amplitude: float = 0.1, center: float = np.pi, width: float = 0.5,
                 L: float = 2 * np.pi, images: int = 3) -> "Profile":
        """Gaussian bump summed over periodic images (derivatives up to order 2)."""
        def f(s, order):
            out = np.zeros_like(s)
            for j in range(-images, images + 1):
                y = (s - center - j * L) / width
                e = np.exp(-y * y)
                if order == 0:
                    out = out + e
                elif order == 1:
                    out = out - 2 * y * e / width
                elif order == 2:
                    out = out + (4 * y * y - 2) * e / width**2
                else:
                    raise ValueError("gaussian profile supports derivative orders 0..2")
            return amplitude * out
        return cls(f"gaussian(A={amplitude:g},w={width:g})", f)

    @classmethod
    def from_samples(cls, values, grid: Grid1D) -> "Profile":
        """Trigonometric interpolant of periodic samples."""
        values = np.array(values, dtype=float)

        def f(s, order):
            return interpolate(values, grid, np.ravel(s), order).reshape(np.shape(s))
        return cls("samples", f)


def gauss_legendre_depth_integral(integrand, x, z, nodes: int = GL_NODES):
    """``int_0^z integrand(x, s) ds`` with ``nodes``-point Gauss-Legendre on ``[0, z]``."""
    xi, w = np.polynomial.legendre.leggauss(nodes)
    x, z = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(z, dtype=float))
    s = 0.5 * z[..., None] * (xi + 1.0)
    vals = integrand(x[..., None], s)
    return 0.5 * z * np.sum(w * vals, axis=-1)


def _central_x(F, x, z, h: float = 1e-2):
    # 8th-order centred difference; used only when F_x is not supplied
    c = np.array([1 / 280, -4 / 105, 1 / 5, -4 / 5, 0.0, 4 / 5, -1 / 5, 4 / 105, -1 / 280])
    return sum(ci * F(x + (i - 4) * h, z) for i, ci in enumerate(c) if ci) / h


@dataclass(frozen=True)
class ArbitraryVorticity:
    """Background ``F(x, z)`` for the arbitrary-vorticity regime.

    ``F_x`` is optional; without it an 8th-order centred difference is used.
    """

    F: Callable = field(repr=False)
    F_x: Callable | None = field(default=None, repr=False)

    def fx(self, x, z):
        return self.F_x(x, z) if self.F_x is not None else _central_x(self.F, x, z)

    def G(self, x, z):
        """``G(x, z) = int_0^z F_x(x, s) ds`` in the ``G(x, 0) = 0`` gauge."""
        return gauss_legendre_depth_integral(self.fx, x, z)


@dataclass(frozen=True)
class LinearSolution:
    """Linear flow under a right-moving profile ``eta = f(x - t)``.

    Sample arrays ``eta, u, v`` are broadcast over the requested ``(x, z, t)``;
    :meth:`fields` re-evaluates the flow anywhere.
    """

    regime: str
    profile: Profile
    params: PhysicalParams
    coeffs: ArbitraryVorticity | None
    eta: np.ndarray = field(repr=False)
    u: np.ndarray = field(repr=False)
    v: np.ndarray = field(repr=False)

    def eta_of(self, x, t, order: int = 0):
        return self.profile(np.asarray(x) - np.asarray(t), order)

    def background(self, x, z):
        if self.regime == "irrotational":
            return np.full(np.broadcast(x, z).shape, self.params.c0)
        if self.regime == "shear":
            return self.params.shear_slope * np.asarray(z) + self.params.c0 + 0.0 * np.asarray(x)
        return self.coeffs.F(x, z)

    def vertical(self, x, z, t):
        v = -np.asarray(z) * self.eta_of(x, t, 1)
        if self.regime == "arbitrary":
            v = v - self.coeffs.G(x, z)  # G(x, 0) = 0 in this gauge
        return v

    def fields(self, x, z, t):
        """``(eta, u, v, p)`` at broadcast points, with ``p = eta`` at every depth."""
        x, z, t = np.broadcast_arrays(*(np.asarray(a, dtype=float) for a in (x, z, t)))
        eta = self.eta_of(x, t)
        u = eta + self.background(x, z)
        return eta, u, self.vertical(x, z, t), eta.copy()


class DroppedDepthFactor(LinearSolution):
    """Negative control: ``v = -eta_x`` with the ``z`` factor dropped."""

    def vertical(self, x, z, t):
        return -self.eta_of(x, t, 1) + 0.0 * np.asarray(z)

    @classmethod
    def of(cls, sol: LinearSolution) -> "DroppedDepthFactor":
        return cls(**{f.name: getattr(sol, f.name) for f in fields(sol)})


def linear_solution(regime: Regime, f: Profile, x, z, t, p: PhysicalParams,
                    coeffs: ArbitraryVorticity | None = None,
                    closure_points: np.ndarray | None = None) -> LinearSolution:
    """Sample the linear flow of the given regime.

    For the arbitrary regime the closure ``G(x, 1) = G(x, 0)`` is checked at
    ``closure_points`` (default: the requested ``x`` plus 64 points on
    ``[0, 2 pi)``) and violations beyond 1e-8 raise ``ValueError``.
    """
    if regime not in REGIMES:
        raise ValueError(f"unknown regime {regime!r}; expected one of {REGIMES}")
    z_arr = np.asarray(z, dtype=float)
    if np.any(z_arr < 0.0) or np.any(z_arr > 1.0):
        raise ValueError("depth coordinate must satisfy 0 <= z <= 1")
    if regime == "arbitrary":
        if coeffs is None:
            raise ValueError("the arbitrary regime needs ArbitraryVorticity coefficients")
        xs = np.concatenate([np.ravel(np.asarray(x, dtype=float)),
                             np.linspace(0.0, 2 * np.pi, 64, endpoint=False)]) \
            if closure_points is None else np.ravel(closure_points)
        gap = np.max(np.abs(coeffs.G(xs, np.ones_like(xs))))
        if gap > CLOSURE_TOL:
            raise ValueError(
                f"G(x,1) - G(x,0) reaches {gap:.3e} > {CLOSURE_TOL:g}: the supplied F is "
                "incompatible with the surface and bed kinematic conditions"
            )
    elif coeffs is not None:
        raise ValueError(f"coefficients are only used by the arbitrary regime, not {regime!r}")
    sol = LinearSolution(regime, f, p, coeffs, np.empty(0), np.empty(0), np.empty(0))
    eta, u, v, _ = sol.fields(x, z, t)
    return replace(sol, eta=eta, u=u, v=v)


@dataclass(frozen=True)
class LinearResidualReport:
    """Max-abs residuals of the linear system on a sampling lattice."""

    residuals: dict
    tolerance: float

    @property
    def worst(self) -> float:
        return max(self.residuals.values())

    @property
    def passed(self) -> bool:
        return self.worst <= self.tolerance


def _chebyshev_z(nz: int) -> np.ndarray:
    return 0.5 * (1.0 - np.cos(np.pi * np.arange(nz) / (nz - 1)))


def verify_linear_system(sol: LinearSolution, grid: Grid1D, times=(0.0, 0.3, 1.1),
                         nz: int = 17, tolerance: float = 1e-8) -> LinearResidualReport:
    """Evaluate the residuals of the linearised equations.

    ``x`` derivatives are spectral on ``grid``, ``t`` derivatives of ``f(x - t)``
    analytic, and ``z`` derivatives come from a degree ``nz - 1`` Chebyshev fit
    on Chebyshev-Lobatto depths in ``[0, 1]``. Also reports the wave-equation
    residual ``eta_tt - eta_xx``.
    """
    z = _chebyshev_z(nz)
    x = grid.x
    res = {k: 0.0 for k in ("momentum", "hydrostatic", "mass", "surface_kinematic",
                            "surface_dynamic", "bottom", "wave")}
    for t in np.atleast_1d(times):
        X, Z = np.meshgrid(x, z, indexing="ij")
        eta, u, v, p = sol.fields(X, Z, t)
        eta_t = -sol.eta_of(X, t, 1)
        eta_tt = sol.eta_of(X, t, 2)
        u_t = eta_t  # the background does not depend on time
        p_x = deriv_array(p.T, grid, 1).T
        u_x = deriv_array(u.T, grid, 1).T
        # map [0,1] to the Chebyshev domain [-1,1]: d/dz = 2 d/ds
        coef_v = C.chebfit(2 * z - 1, v.T, nz - 1)
        v_z = 2.0 * C.chebval(2 * z - 1, C.chebder(coef_v))
        coef_p = C.chebfit(2 * z - 1, p.T, nz - 1)
        p_z = 2.0 * C.chebval(2 * z - 1, C.chebder(coef_p))
        eta_xx = deriv_array(eta[:, 0], grid, 2)
        top, bed = -1, 0
        cur = {
            "momentum": u_t + p_x,
            "hydrostatic": p_z,
            "mass": u_x + v_z,
            "surface_kinematic": v[:, top] - eta_t[:, top],
            "surface_dynamic": p[:, top] - eta[:, top],
            "bottom": v[:, bed],
            "wave": eta_tt[:, 0] - eta_xx,
        }
        for k, r in cur.items():
            res[k] = max(res[k], float(np.max(np.abs(r))))
    return LinearResidualReport(res, tolerance)
