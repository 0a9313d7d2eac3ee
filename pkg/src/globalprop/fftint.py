"""Cumulative integration of sampled signals in O(N log N).

For a T-periodic signal the prefix integrals ``I(t_j) = int_0^{t_j} f`` are
obtained with one forward and one inverse transform: the non-zero Fourier
coefficients are divided by ``2 pi i nu_l``, the zero-frequency slot is
filled so that ``I(0) = 0``, and the mean of ``f`` is restored through a
linear ramp. Non-periodic signals are first continued on ``[T0, T]`` by a
polynomial bridge that matches value, slope and curvature at both seams.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import signal as sig
from .errors import ConfigurationError, NumericalError
from .signal import ComplexSignal, TimeGrid

__all__ = [
    "MuCoefficients",
    "ExtensionPolynomial",
    "mu_coefficients",
    "integrate_array",
    "cumulative_integral_periodic",
    "boundary_derivatives",
    "fit_extension_polynomial",
    "hermite_extension",
    "cumulative_integral",
    "extended_grid",
    "simpson_cumulative",
    "convergence_factor",
    "oscillatory_asymptote",
    "BENCHMARK_TERMS",
    "benchmark_signal",
    "benchmark_integral",
]


@dataclass(frozen=True)
class MuCoefficients:
    """Spectral antiderivative multipliers ``mu_l = T / (2 pi i l')``.

    ``l' = l`` below N/2 and ``l - N`` from N/2 on. ``mu[0]`` is NaN: that
    slot is overwritten after the multiplication.
    """

    grid: TimeGrid
    mu: np.ndarray

    def __post_init__(self):
        mu = np.array(self.mu, dtype=complex)
        mu.setflags(write=False)
        object.__setattr__(self, "mu", mu)


def _signed_index(n: int) -> np.ndarray:
    l = np.arange(n)
    return np.where(l < n // 2, l, l - n)


def mu_coefficients(grid: TimeGrid) -> MuCoefficients:
    n = grid.n_samples
    mu = np.full(n, np.nan, dtype=complex)
    mu[1:] = grid.t_total / (2j * np.pi * _signed_index(n)[1:])
    return MuCoefficients(grid, mu)


def integrate_array(values, grid: TimeGrid, mu: MuCoefficients | None = None) -> np.ndarray:
    """Periodic cumulative integral of samples along the last axis.

    Leading axes are treated as a batch of independent signals; the whole
    batch costs one forward and one inverse transform call.
    """
    if mu is None:
        mu = mu_coefficients(grid)
    n = grid.n_samples
    coeffs = sig.dft_array(np.asarray(values, dtype=complex))
    product = np.empty_like(coeffs)
    product[..., 1:] = mu.mu[1:] * coeffs[..., 1:]
    product[..., 0] = -product[..., 1:].sum(axis=-1)
    ramp = (np.arange(n) / n) * (grid.t_total / math.sqrt(n))
    result = sig.idft_array(product) + ramp * coeffs[..., :1]
    result[..., 0] = 0.0
    return result


def cumulative_integral_periodic(f: ComplexSignal) -> ComplexSignal:
    return ComplexSignal(f.grid, integrate_array(f.values, f.grid))


@dataclass(frozen=True)
class ExtensionPolynomial:
    """``p(t) = sum_k a_k (t - T0)^k`` bridging ``f(T0)`` back to ``f(0)``.

    ``residual`` is the relative residual of the small linear solve.
    """

    coefficients: np.ndarray
    t_start: float
    t_end: float
    residual: float

    def __call__(self, t):
        x = np.asarray(t, dtype=float) - self.t_start
        return np.polynomial.polynomial.polyval(x, self.coefficients)

    def derivative(self, t, order=1):
        x = np.asarray(t, dtype=float) - self.t_start
        c = np.polynomial.polynomial.polyder(self.coefficients, order)
        return np.polynomial.polynomial.polyval(x, c)


def _stencil_derivatives(samples, h, x_eval):
    """Value, first and second derivative of the interpolating polynomial.

    ``samples`` sit at ``x = 0, 1, ..., k-1`` (units of ``h``); the
    polynomial is evaluated at ``x_eval``. Six points give fourth-order
    accurate second derivatives.
    """
    k = len(samples)
    x = np.arange(k, dtype=float) - x_eval
    vander = np.vander(x, k, increasing=True)
    c = np.linalg.solve(vander, np.asarray(samples, dtype=complex))
    return c[0], c[1] / h, 2.0 * c[2] / h**2


def boundary_derivatives(values, grid: TimeGrid, stencil: int = 6):
    """Estimate ``f, f', f''`` at ``t = 0`` and ``t = T0`` from samples.

    ``values`` holds the samples with ``t_j < T0``. One-sided stencils are
    used so no periodicity is presupposed.
    """
    values = np.asarray(values, dtype=complex)
    if len(values) < stencil:
        raise ConfigurationError("too few physical samples for boundary stencils")
    h = grid.dt
    start = _stencil_derivatives(values[:stencil], h, 0.0)
    j_first = len(values) - stencil
    x_end = grid.t_physical_end / h - j_first
    end = _stencil_derivatives(values[j_first:], h, x_end)
    return start + end


def fit_extension_polynomial(derivatives, t_start: float, t_end: float, zero_integral=False):
    """Solve for the bridge polynomial on ``[t_start, t_end]``.

    ``derivatives`` is ``(f(0), f'(0), f''(0), f(T0), f'(T0), f''(T0))``.
    The unknowns are scaled by powers of the bridge length so the system is
    O(1). Without the integral row the sixth-order coefficient is fixed at
    zero and three equations determine ``a3..a5``; with it ``a3..a6`` follow
    from four equations whose last row makes the bridge integrate to zero.
    """
    delta = float(t_end) - float(t_start)
    if not delta > 0:
        raise ConfigurationError("extension interval has zero length; T must exceed T0")
    f0, df0, d2f0, fT, dfT, d2fT = (complex(x) for x in derivatives)
    b = np.array([fT, dfT * delta, d2fT * delta**2 / 2.0])
    rhs = [
        f0 - b[0] - b[1] - b[2],
        df0 * delta - b[1] - 2.0 * b[2],
        d2f0 * delta**2 - 2.0 * b[2],
    ]
    powers = np.arange(3, 7)
    rows = [
        np.ones(4),
        powers.astype(float),
        (powers * (powers - 1)).astype(float),
    ]
    if zero_integral:
        rows.append(1.0 / (powers + 1.0))
        rhs.append(-(b[0] + b[1] / 2.0 + b[2] / 3.0))
        matrix = np.array(rows)
    else:
        matrix = np.array(rows)[:, :3]
    rhs = np.array(rhs, dtype=complex)
    # LAPACK gesv: LU with partial pivoting
    upper = np.linalg.solve(matrix, rhs)
    residual = np.linalg.norm(matrix @ upper - rhs) / max(np.linalg.norm(rhs), 1e-300)
    if residual > 1e-10:
        raise NumericalError(f"extension system residual {residual:.3e} too large")
    scaled = np.zeros(7, dtype=complex)
    scaled[:3] = b
    scaled[3 : 3 + len(upper)] = upper
    coefficients = scaled / delta ** np.arange(7)
    return ExtensionPolynomial(coefficients, float(t_start), float(t_end), float(residual))


def _first_extension_index(grid: TimeGrid) -> int:
    j0 = grid.physical_end_index
    return j0 if math.isclose(j0 * grid.dt, grid.t_physical_end) else j0 + 1


def hermite_extension(f, grid: TimeGrid | None = None, derivatives=None, zero_integral=False):
    """Replace the samples on ``[T0, T)`` by the bridge polynomial.

    ``f`` is either a full-length ``ComplexSignal`` or the array of samples
    with ``t_j < T0``. Without analytic ``derivatives`` they are estimated by
    :func:`boundary_derivatives`.
    """
    if isinstance(f, ComplexSignal):
        grid = f.grid if grid is None else grid
        values = f.values
    else:
        if grid is None:
            raise ConfigurationError("a grid is required for raw samples")
        values = np.asarray(f, dtype=complex)
    j_ext = _first_extension_index(grid)
    if j_ext >= grid.n_samples:
        raise ConfigurationError("grid has no extension interval (T0 == T)")
    if len(values) < j_ext:
        raise ConfigurationError("not enough samples to cover the physical interval")
    physical = values[:j_ext]
    if derivatives is None:
        derivatives = boundary_derivatives(physical, grid)
    poly = fit_extension_polynomial(
        derivatives, grid.t_physical_end, grid.t_total, zero_integral=zero_integral
    )
    out = np.empty(grid.n_samples, dtype=complex)
    out[:j_ext] = physical
    out[j_ext:] = poly(grid.times[j_ext:])
    return ComplexSignal(grid, out)


def cumulative_integral(f: ComplexSignal, mode: str = "periodic", derivatives=None,
                        zero_integral=False) -> ComplexSignal:
    if mode == "periodic":
        return cumulative_integral_periodic(f)
    if mode == "extend":
        if not f.grid.t_total > f.grid.t_physical_end:
            raise ConfigurationError("extend mode needs T > T0")
        extended = hermite_extension(f, derivatives=derivatives, zero_integral=zero_integral)
        return cumulative_integral_periodic(extended)
    raise ConfigurationError(f"unknown integration mode {mode!r}")


def extended_grid(T0: float, N: int, fraction: float = 0.1) -> TimeGrid:
    """Grid whose extension interval is ``fraction * T0`` long."""
    return TimeGrid(float(T0), float(T0) * (1.0 + fraction), N)


def simpson_cumulative(f, dt: float | None = None) -> np.ndarray:
    """Cumulative composite Simpson rule; returns an array of prefix integrals.

    Even nodes carry the classical composite rule. An odd node adds the
    exact integral of the quadratic through its neighbours over the last
    sub-interval, which keeps the fourth-order error at every node.
    """
    if isinstance(f, ComplexSignal):
        dt = f.grid.dt
        values = f.values
    else:
        if dt is None:
            raise ConfigurationError("dt is required for raw samples")
        values = np.asarray(f)
    n = len(values)
    if n < 3:
        raise ConfigurationError("Simpson integration needs at least 3 samples")
    values = np.asarray(values, dtype=complex)
    out = np.zeros(n, dtype=complex)
    panels = dt / 3.0 * (values[0:-2:2] + 4.0 * values[1:-1:2] + values[2::2])
    out[2::2] = np.cumsum(panels)
    # I(t_1) from the forward quadratic on nodes 0,1,2
    out[1] = dt / 12.0 * (5.0 * values[0] + 8.0 * values[1] - values[2])
    odd = np.arange(3, n, 2)
    out[odd] = out[odd - 1] + dt / 12.0 * (
        -values[odd - 2] + 8.0 * values[odd - 1] + 5.0 * values[odd]
    )
    return out


def convergence_factor(I_N, I_2N) -> float:
    """``max_j |I_2N[2j] - I_N[j]|`` over the nodes shared by both grids."""
    if isinstance(I_N, ComplexSignal) and isinstance(I_2N, ComplexSignal):
        if (
            I_2N.grid.n_samples != 2 * I_N.grid.n_samples
            or not math.isclose(I_N.grid.t_total, I_2N.grid.t_total)
        ):
            raise ConfigurationError("grids are not nested by a factor of two")
    a = np.asarray(getattr(I_N, "values", I_N))
    b = np.asarray(getattr(I_2N, "values", I_2N))
    if len(b) == 2 * len(a):
        coarse = b[::2]
    elif len(b) == 2 * len(a) - 1:
        coarse = b[::2]
    else:
        raise ConfigurationError(f"lengths {len(a)} and {len(b)} are not nested")
    return float(np.max(np.abs(coarse - a)))


def oscillatory_asymptote(g, nu_tilde: float, t: float) -> complex:
    """Leading term of ``int g(t') exp(2 pi i nu t') dt'`` for large ``nu``."""
    if nu_tilde == 0:
        raise ZeroDivisionError("asymptote undefined at zero frequency")
    if isinstance(g, ComplexSignal):
        g_t = sig.interpolate(g, t)
    elif callable(g):
        g_t = g(t)
    else:
        g_t = complex(g)
    w = 2.0 * np.pi * nu_tilde
    return complex(np.exp(1j * (w * t - np.pi / 2.0)) * g_t / w)


# (a_j, t_j, x_j) of the gaussian-times-phase test function on T = 180
BENCHMARK_TERMS = (
    (6.790, 27.0, 12.0),
    (3.819, 36.0, 135.6),
    (1.018, 90.0, 1.75),
    (1.591, 108.0, 154.7),
    (2.118, 135.0, 3.25),
    (3.310, 144.0, 18.15),
)


def benchmark_signal(t, T: float = 180.0, terms=BENCHMARK_TERMS):
    t = np.asarray(t, dtype=float)
    out = np.zeros(t.shape, dtype=complex)
    for a, tc, x in terms:
        out += np.exp(-a * (t - tc) ** 2) * np.exp(2j * np.pi * x * t / T)
    return out


def benchmark_integral(t, T: float = 180.0, terms=BENCHMARK_TERMS):
    """Closed form of the prefix integral through the complex error function."""
    from scipy.special import erf

    t = np.asarray(t, dtype=float)
    out = np.zeros(t.shape, dtype=complex)
    for a, tc, x in terms:
        k = 2.0 * np.pi * x / T
        s = math.sqrt(a)
        # complete the square: -a(t-tc)^2 + i k t
        shift = 1j * k / (2.0 * a)
        pref = np.exp(1j * k * tc - k**2 / (4.0 * a)) * math.sqrt(math.pi) / (2.0 * s)
        out += pref * (erf(s * (t - tc - shift)) - erf(s * (0.0 - tc - shift)))
    return out
