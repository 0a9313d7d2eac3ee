"""Uniform time grids, sampled complex signals and the unitary DFT.

All transforms use the symmetric convention

    F_k = N^{-1/2} sum_j f_j exp(-2 pi i j k / N)

so that forward and inverse transforms are unitary.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .errors import ConfigurationError

__all__ = [
    "TimeGrid",
    "ComplexSignal",
    "Spectrum",
    "make_time_grid",
    "forward_dft",
    "inverse_dft",
    "spectral_derivative",
    "dft_array",
    "idft_array",
    "derivative_array",
    "interpolate",
    "write_signal_csv",
    "format_float",
]


def _frozen_array(values, dtype=complex):
    arr = np.array(values, dtype=dtype, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class TimeGrid:
    """Samples ``t_j = j T / N`` for ``j = 0..N-1``.

    ``t_physical_end`` (T0) closes the physical window; ``[T0, T]`` is the
    artificial extension used to make signals periodic.
    """

    t_physical_end: float
    t_total: float
    n_samples: int

    def __post_init__(self):
        n = self.n_samples
        if int(n) != n or n < 4 or n % 2:
            raise ConfigurationError(f"n_samples must be an even integer >= 4, got {n}")
        if not (self.t_physical_end > 0 and self.t_total > 0):
            raise ConfigurationError("durations must be positive")
        if self.t_physical_end > self.t_total:
            raise ConfigurationError(
                f"T0={self.t_physical_end} exceeds total duration T={self.t_total}"
            )
        object.__setattr__(self, "n_samples", int(n))

    @property
    def dt(self) -> float:
        return self.t_total / self.n_samples

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.n_samples) * self.dt

    @property
    def physical_end_index(self) -> int:
        """``j0 = floor(N T0 / T)``, evaluated exactly on the decimal inputs."""
        ratio = Fraction(self.n_samples) * Fraction(str(self.t_physical_end)) / Fraction(
            str(self.t_total)
        )
        return math.floor(ratio)

    @property
    def frequencies(self) -> np.ndarray:
        # nu_l = l/T below N/2, then negative; nu_{N/2} = -N/(2T)
        return np.fft.fftfreq(self.n_samples, d=self.dt)

    def refine(self, factor: int = 2) -> "TimeGrid":
        return TimeGrid(self.t_physical_end, self.t_total, self.n_samples * factor)


def make_time_grid(T0: float, T: float, N: int) -> TimeGrid:
    return TimeGrid(float(T0), float(T), N)


@dataclass(frozen=True)
class ComplexSignal:
    grid: TimeGrid
    values: np.ndarray

    def __post_init__(self):
        values = _frozen_array(self.values)
        if values.shape != (self.grid.n_samples,):
            raise ConfigurationError(
                f"signal has shape {values.shape}, grid expects ({self.grid.n_samples},)"
            )
        object.__setattr__(self, "values", values)

    @classmethod
    def from_function(cls, grid: TimeGrid, func) -> "ComplexSignal":
        return cls(grid, func(grid.times))

    @property
    def times(self) -> np.ndarray:
        return self.grid.times

    def __len__(self):
        return self.grid.n_samples


@dataclass(frozen=True)
class Spectrum:
    grid: TimeGrid
    coefficients: np.ndarray

    def __post_init__(self):
        coeffs = _frozen_array(self.coefficients)
        if coeffs.shape != (self.grid.n_samples,):
            raise ConfigurationError("spectrum length does not match grid")
        object.__setattr__(self, "coefficients", coeffs)

    @property
    def frequencies(self) -> np.ndarray:
        return self.grid.frequencies


def dft_array(values, axis=-1):
    """Unitary forward transform of a raw array along ``axis``."""
    return np.fft.fft(values, axis=axis, norm="ortho")


def idft_array(coefficients, axis=-1):
    return np.fft.ifft(coefficients, axis=axis, norm="ortho")


def _derivative_multiplier(grid: TimeGrid) -> np.ndarray:
    factor = 2j * np.pi * grid.frequencies
    factor[grid.n_samples // 2] = 0.0
    return factor


def derivative_array(values, grid: TimeGrid, axis=-1):
    """Spectral time derivative of samples stored along ``axis``."""
    values = np.asarray(values)
    shape = [1] * values.ndim
    shape[axis] = grid.n_samples
    factor = _derivative_multiplier(grid).reshape(shape)
    return idft_array(factor * dft_array(values, axis=axis), axis=axis)


def forward_dft(f: ComplexSignal) -> Spectrum:
    return Spectrum(f.grid, dft_array(f.values))


def inverse_dft(F: Spectrum) -> ComplexSignal:
    return ComplexSignal(F.grid, idft_array(F.coefficients))


def spectral_derivative(f: ComplexSignal) -> ComplexSignal:
    """Derivative through multiplication of coefficient l by ``2 pi i nu_l``.

    The Nyquist coefficient is discarded.
    """
    return ComplexSignal(f.grid, derivative_array(f.values, f.grid))


def interpolate(f: ComplexSignal, t) -> np.ndarray | complex:
    """Trigonometric interpolant of ``f`` evaluated at arbitrary times."""
    grid = f.grid
    coeffs = dft_array(f.values) / math.sqrt(grid.n_samples)
    nu = grid.frequencies.copy()
    # split the Nyquist term symmetrically so real data stays real
    half = grid.n_samples // 2
    t_arr = np.atleast_1d(np.asarray(t, dtype=float))
    phases = np.exp(2j * np.pi * np.outer(t_arr, nu))
    phases[:, half] = np.cos(np.pi * grid.n_samples * t_arr / grid.t_total)
    out = phases @ coeffs
    return out[0] if np.ndim(t) == 0 else out


def format_float(x: float) -> str:
    return f"{x:.17g}"


def write_signal_csv(path, f: ComplexSignal, value_name="f", units="arb") -> None:
    """Write one row per sample with columns ``t, Re, Im``."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"# t [time], Re {value_name} [{units}], Im {value_name} [{units}]\n")
        fh.write("t,re,im\n")
        for t, v in zip(f.times, f.values):
            fh.write(f"{format_float(t)},{format_float(v.real)},{format_float(v.imag)}\n")
