"""
Periodic Fourier substrate.

Uniform periodic grids, spectral derivatives, the Helmholtz operator
``m = u - u_xx`` and its inverse, trapezoidal quadrature, and trigonometric
interpolation at off-grid points.

Conventions
-----------
Nodes are ``x_j = j * L / n`` for ``j = 0..n-1``. Transforms use ``numpy.fft.rfft``
so wavenumbers are ``k_j = 2*pi*j/L`` for ``j = 0..n/2``. The Nyquist mode of
odd-order derivatives is zeroed, which keeps the first-derivative matrix real and
skew-symmetric.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "Grid1D",
    "FieldState",
    "NonFiniteError",
    "deriv",
    "deriv_array",
    "helmholtz_map",
    "helmholtz_invert",
    "helmholtz_invert_array",
    "integrate",
    "dealias_mask",
    "interpolate",
    "band_limited_random",
]


class NonFiniteError(ValueError):
    """Raised when a field contains NaN or Inf samples."""

    def __init__(self, index: int, value: float, what: str = "field"):
        self.index = index
        self.value = value
        super().__init__(f"non-finite {what} sample at index {index}: {value!r}")


def _check_finite(values: np.ndarray, what: str = "field") -> None:
    ok = np.isfinite(values)
    if not ok.all():
        flat = np.flatnonzero(~ok.ravel())[0]
        raise NonFiniteError(int(flat), float(values.ravel()[flat]), what)


@dataclass(frozen=True)
class Grid1D:
    """Uniform periodic grid on ``[0, L)`` with ``n`` samples."""

    L: float
    n: int

    def __post_init__(self):
        if not (np.isfinite(self.L) and self.L > 0):
            raise ValueError(f"grid length must be positive, got {self.L}")
        if int(self.n) != self.n or self.n < 8 or self.n % 2:
            raise ValueError(f"grid size must be an even integer >= 8, got {self.n}")
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "L", float(self.L))

    @property
    def dx(self) -> float:
        return self.L / self.n

    @property
    def x(self) -> np.ndarray:
        return np.arange(self.n) * self.dx

    @property
    def k(self) -> np.ndarray:
        """Non-negative wavenumbers matching ``rfft`` ordering."""
        return 2.0 * np.pi * np.arange(self.n // 2 + 1) / self.L

    def field(self, values, t: float = 0.0) -> "FieldState":
        return FieldState(self, values, t)

    def sample(self, func, t: float = 0.0) -> "FieldState":
        """Sample a vectorised callable ``func(x)`` on the nodes."""
        return FieldState(self, np.asarray(func(self.x), dtype=float), t)


@dataclass(frozen=True)
class FieldState:
    """Real samples of a field on ``grid`` at time ``t``."""

    grid: Grid1D
    values: np.ndarray = field(repr=False)
    t: float = 0.0

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.shape != (self.grid.n,):
            raise ValueError(f"expected {self.grid.n} samples, got shape {v.shape}")
        _check_finite(v)
        v.setflags(write=False)
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "t", float(self.t))

    def with_values(self, values, t: float | None = None) -> "FieldState":
        return FieldState(self.grid, values, self.t if t is None else t)

    def __add__(self, other: "FieldState") -> "FieldState":
        return self.with_values(self.values + other.values)

    def __sub__(self, other: "FieldState") -> "FieldState":
        return self.with_values(self.values - other.values)

    def __mul__(self, a: float) -> "FieldState":
        return self.with_values(a * self.values)

    __rmul__ = __mul__


def _derivative_multiplier(grid: Grid1D, order: int) -> np.ndarray:
    mult = (1j * grid.k) ** order
    if order % 2:
        mult[-1] = 0.0
    return mult


def deriv_array(values: np.ndarray, grid: Grid1D, order: int = 1) -> np.ndarray:
    """Spectral derivative of raw samples along the last axis."""
    if order == 0:
        return np.array(values, dtype=float)
    spec = np.fft.rfft(values, axis=-1) * _derivative_multiplier(grid, order)
    return np.fft.irfft(spec, n=grid.n, axis=-1)


def deriv(f: FieldState, order: int = 1) -> FieldState:
    """Spectral derivative of ``f`` of the given order (1..4)."""
    if int(order) != order or not 1 <= order <= 4:
        raise ValueError(f"derivative order must be in 1..4, got {order}")
    return f.with_values(deriv_array(f.values, f.grid, int(order)))


def helmholtz_map(u: FieldState) -> FieldState:
    """Return ``m = u - u_xx``."""
    return u.with_values(u.values - deriv_array(u.values, u.grid, 2))


def helmholtz_invert_array(values: np.ndarray, grid: Grid1D) -> np.ndarray:
    spec = np.fft.rfft(values, axis=-1) / (1.0 + grid.k**2)
    return np.fft.irfft(spec, n=grid.n, axis=-1)


def helmholtz_invert(m: FieldState) -> FieldState:
    """Solve ``u - u_xx = m`` with the Fourier multiplier ``1/(1 + k^2)``."""
    return m.with_values(helmholtz_invert_array(m.values, m.grid))


def integrate(f: FieldState) -> float:
    """Trapezoidal integral over one period."""
    return float(f.grid.dx * np.sum(f.values))


def dealias_mask(grid: Grid1D, fraction: float | None = 2.0 / 3.0) -> np.ndarray:
    """Boolean mask over ``rfft`` modes keeping ``|j| <= fraction * n/2``.

    ``fraction=None`` keeps every mode.
    """
    j = np.arange(grid.n // 2 + 1)
    if fraction is None:
        return np.ones_like(j, dtype=bool)
    if not 0.0 < fraction <= 1.0:
        raise ValueError(f"dealias fraction must be in (0, 1], got {fraction}")
    return j <= fraction * (grid.n // 2)


def interpolate(values: np.ndarray, grid: Grid1D, y: np.ndarray, order: int = 0) -> np.ndarray:
    """Evaluate the trigonometric interpolant (or its derivative) at points ``y``.

    ``values`` may carry leading batch axes; ``y`` must then broadcast against
    them, e.g. ``values`` of shape ``(m, n)`` with ``y`` of shape ``(m, p)``.
    """
    values = np.asarray(values, dtype=float)
    y = np.asarray(y, dtype=float)
    n = grid.n
    coef = np.fft.rfft(values, axis=-1) / n
    weights = np.full(n // 2 + 1, 2.0)
    weights[0] = 1.0
    weights[-1] = 1.0
    coef = coef * weights * (1j * grid.k) ** order
    if order % 2:
        coef[..., -1] = 0.0
    # Horner in z = exp(i k1 y); |z| = 1 keeps the recurrence stable
    z = np.exp(1j * (2.0 * np.pi / grid.L) * y)
    acc = np.broadcast_to(coef[..., -1:], np.broadcast_shapes(coef.shape[:-1] + (1,), y.shape)).copy()
    for j in range(coef.shape[-1] - 2, -1, -1):
        acc *= z
        acc += coef[..., j:j + 1]
    return acc.real


def band_limited_random(grid: Grid1D, rng: np.random.Generator, max_mode: int | None = None,
                        decay: float = 0.0, t: float = 0.0) -> FieldState:
    """Random real field with Fourier modes up to ``max_mode`` (default ``n//8``)."""
    kmax = grid.n // 8 if max_mode is None else int(max_mode)
    j = np.arange(1, kmax + 1)
    amp = np.exp(-decay * j) / j
    a = rng.standard_normal(kmax) * amp
    b = rng.standard_normal(kmax) * amp
    arg = 2.0 * np.pi * np.outer(grid.x, j) / grid.L
    values = rng.standard_normal() + np.cos(arg) @ a + np.sin(arg) @ b
    return FieldState(grid, values, t)
