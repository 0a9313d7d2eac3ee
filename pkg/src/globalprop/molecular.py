"""Two-surface vibrational model driven by a laser field.

The vibrational eigenbasis of each surface comes from a Fourier-grid
Hamiltonian on a periodic radial grid. The two surfaces are coupled by a
constant transition dipole, so in the eigenbasis

    H(t) = diag(E) - mu E(t) [[0, O], [O^T, 0]],

with ``O`` the overlap matrix between the vibrational states of surface 1
and surface 2.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import eigh

from .errors import ConfigurationError, GridError

__all__ = [
    "RadialGrid",
    "SurfaceSpec",
    "VibrationalBasis",
    "Pulse",
    "PulseSet",
    "AbsorberSpec",
    "ModelHamiltonian",
    "DOUBLE_WELL",
    "UPPER_QUARTIC",
    "fourier_grid_eigensolve",
    "build_basis",
    "field_amplitude",
    "coupling_matrix",
    "hamiltonian_matrix",
    "absorbing_potential",
    "resonance_frequencies",
]


@dataclass(frozen=True)
class RadialGrid:
    r_min: float = -4.5
    r_max: float = 4.5
    n_points: int = 256

    def __post_init__(self):
        if not self.r_min < self.r_max:
            raise ConfigurationError("r_min must be smaller than r_max")
        n = self.n_points
        if n < 2 or n & (n - 1):
            raise ConfigurationError(f"n_points must be a power of two, got {n}")

    @property
    def spacing(self) -> float:
        return (self.r_max - self.r_min) / self.n_points

    @property
    def points(self) -> np.ndarray:
        return self.r_min + self.spacing * np.arange(self.n_points)


@dataclass(frozen=True)
class SurfaceSpec:
    """Potential ``eps(R) = sum_k c_k R^k`` (ascending powers) and a mass."""

    coefficients: tuple
    mass: float = 10.0

    def __post_init__(self):
        object.__setattr__(self, "coefficients", tuple(float(c) for c in self.coefficients))
        if self.mass <= 0:
            raise ConfigurationError("mass must be positive")

    def potential(self, r):
        return np.polynomial.polynomial.polyval(np.asarray(r, dtype=float), self.coefficients)


DOUBLE_WELL = SurfaceSpec((0.0, 0.0, -5.0, 0.5, 1.0), mass=10.0)
UPPER_QUARTIC = SurfaceSpec((0.0, 0.0, 0.0, 0.0, 0.2), mass=10.0)


def _fix_sign(vectors: np.ndarray) -> np.ndarray:
    # first appreciable component (scanning from r_min) is made positive
    out = vectors.copy()
    for k in range(out.shape[1]):
        col = out[:, k]
        idx = np.argmax(np.abs(col) > 1e-3 * np.abs(col).max())
        if col[idx] < 0:
            out[:, k] = -col
    return out


def fourier_grid_eigensolve(surface: SurfaceSpec, grid: RadialGrid, n_keep: int,
                            boundary_tol: float = 1e-10):
    """Lowest ``n_keep`` eigenpairs of ``-1/(2m) d^2/dR^2 + eps(R)``.

    The kinetic operator is built by transforming the identity to momentum
    space, so it is exact for band-limited functions on the periodic grid.
    Eigenvectors are normalised with the rectangle weight (``sum |c|^2 dr =
    1``) and returned column-wise.

    Raises
    ------
    GridError
        If any kept eigenvector is larger than ``boundary_tol`` at either
        end of the grid.
    """
    n = grid.n_points
    if not 0 < n_keep <= n:
        raise ConfigurationError(f"n_keep must be in 1..{n}")
    dr = grid.spacing
    k = 2.0 * np.pi * np.fft.fftfreq(n, d=dr)
    eye = np.eye(n)
    kinetic = np.fft.ifft((k**2 / (2.0 * surface.mass))[:, None] * np.fft.fft(eye, axis=0), axis=0)
    kinetic = 0.5 * (kinetic.real + kinetic.real.T)
    h = kinetic + np.diag(surface.potential(grid.points))
    energies, vectors = eigh(h, subset_by_index=[0, n_keep - 1])
    vectors = _fix_sign(vectors) / np.sqrt(dr)
    edge = np.abs(vectors[[0, -1], :]).max()
    if edge > boundary_tol:
        raise GridError(
            f"eigenvectors reach {edge:.2e} at the radial boundary; widen the grid"
        )
    return energies, vectors


@dataclass(frozen=True)
class VibrationalBasis:
    """Eigenpairs of both surfaces and their cross overlap.

    Global indices are 0-based here: ``0..n_keep-1`` for surface 1 and
    ``n_keep..2 n_keep-1`` for surface 2.
    """

    grid: RadialGrid
    surface_energies: tuple
    surface_vectors: tuple
    overlap: np.ndarray
    energies: np.ndarray = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "energies", np.concatenate(self.surface_energies))
        for arr in (self.overlap, self.energies, *self.surface_energies, *self.surface_vectors):
            arr.setflags(write=False)

    @property
    def n_keep(self) -> int:
        return len(self.surface_energies[0])

    @property
    def size(self) -> int:
        return len(self.energies)

    def index(self, v: int, surface: int) -> int:
        """Global index of vibrational level ``v`` (1-based) on ``surface``."""
        if not 1 <= v <= self.n_keep or surface not in (1, 2):
            raise ConfigurationError(f"no state v={v} on surface {surface}")
        return (surface - 1) * self.n_keep + v - 1

    def energy(self, v: int, surface: int) -> float:
        return float(self.energies[self.index(v, surface)])


def build_basis(surfaces=(DOUBLE_WELL, UPPER_QUARTIC), grid: RadialGrid = RadialGrid(),
                n_keep: int = 30) -> VibrationalBasis:
    pairs = [fourier_grid_eigensolve(s, grid, n_keep) for s in surfaces]
    overlap = pairs[0][1].T @ pairs[1][1] * grid.spacing
    return VibrationalBasis(
        grid,
        tuple(p[0] for p in pairs),
        tuple(p[1] for p in pairs),
        overlap,
    )


@dataclass(frozen=True)
class Pulse:
    amplitude: float
    omega: float
    center: float
    width: float

    def __post_init__(self):
        if self.width <= 0:
            raise ConfigurationError("pulse width must be positive")


@dataclass(frozen=True)
class PulseSet:
    pulses: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "pulses", tuple(self.pulses))

    def __iter__(self):
        return iter(self.pulses)

    def __len__(self):
        return len(self.pulses)


def field_amplitude(t, pulses: PulseSet):
    """``E(t) = sum_j E_j cos(w_j (t - T_j)) exp(-((t - T_j)/tau_j)^2)``."""
    t = np.asarray(t, dtype=float)
    out = np.zeros(t.shape)
    for p in pulses:
        x = t - p.center
        out += p.amplitude * np.cos(p.omega * x) * np.exp(-((x / p.width) ** 2))
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class AbsorberSpec:
    """Time-dependent optical potential living on ``[t_start, t_end]``.

    ``strength`` is the peak value of ``V_opt`` in energy units.

    ``shape="gaussian"`` places a gaussian of standard width
    ``width * (t_end - t_start)`` in the middle of the window; it is smooth
    across the periodic wrap at ``t_end``. ``shape="sin2"`` is the ramp
    ``strength * sin^2(pi (t - t_start) / (2 (t_end - t_start)))``, which
    jumps back to zero at the wrap.
    """

    t_start: float
    t_end: float
    strength: float
    shape: str = "gaussian"
    width: float = 0.08

    def __post_init__(self):
        if self.shape not in ("gaussian", "sin2"):
            raise ConfigurationError(f"unknown absorber shape {self.shape!r}")
        if self.t_end <= self.t_start:
            raise ConfigurationError("absorber window is empty")
        if self.strength < 0 or self.width <= 0:
            raise ConfigurationError("absorber strength and width must be positive")

    @classmethod
    def from_integral(cls, t_start, t_end, integral=40.0, shape="gaussian", width=0.08):
        """Pick the peak so that ``int V_opt dt`` equals ``integral``."""
        length = t_end - t_start
        if shape == "gaussian":
            peak = integral / (width * length * np.sqrt(np.pi))
        else:
            peak = 2.0 * integral / length
        return cls(t_start, t_end, peak, shape, width)

    @property
    def integral(self) -> float:
        length = self.t_end - self.t_start
        if self.shape == "gaussian":
            return self.strength * self.width * length * np.sqrt(np.pi)
        return self.strength * length / 2.0

    def profile(self, t):
        t = np.asarray(t, dtype=float)
        length = self.t_end - self.t_start
        inside = (t > self.t_start) & (t <= self.t_end)
        if self.shape == "gaussian":
            mid = 0.5 * (self.t_start + self.t_end)
            values = np.exp(-(((t - mid) / (self.width * length)) ** 2))
        else:
            values = np.sin(np.pi * (t - self.t_start) / (2.0 * length)) ** 2
        out = np.where(inside, self.strength * values, 0.0)
        return out if out.ndim else float(out)


def coupling_matrix(basis: VibrationalBasis, dipole: float = 1.0) -> np.ndarray:
    """Matrix ``C`` with ``H(t) = diag(E) + E(t) C``."""
    n = basis.n_keep
    c = np.zeros((basis.size, basis.size))
    c[:n, n:] = -dipole * basis.overlap
    c[n:, :n] = -dipole * basis.overlap.T
    return c


class ModelHamiltonian:
    """``H(t) = diag(E) + E(t) C``, optionally with a diagonal absorber."""

    def __init__(self, energies, coupling, pulses: PulseSet):
        self.energies = np.asarray(energies, dtype=float)
        self.coupling = np.asarray(coupling, dtype=float)
        self.pulses = pulses

    @classmethod
    def from_basis(cls, basis: VibrationalBasis, pulses: PulseSet, dipole: float = 1.0):
        return cls(basis.energies, coupling_matrix(basis, dipole), pulses)

    @property
    def size(self) -> int:
        return len(self.energies)

    def field(self, t):
        return field_amplitude(t, self.pulses)

    def matrix(self, t) -> np.ndarray:
        return np.diag(self.energies).astype(complex) + self.field(t) * self.coupling


def hamiltonian_matrix(t, basis: VibrationalBasis, pulses: PulseSet, dipole: float = 1.0):
    return ModelHamiltonian.from_basis(basis, pulses, dipole).matrix(t)


def absorbing_potential(t, spec: AbsorberSpec, initial_index: int, n_states: int) -> np.ndarray:
    """Diagonal ``-i V_opt(t)`` on every channel except ``initial_index``."""
    out = np.full(n_states, -1j * spec.profile(float(t)))
    out[initial_index] = 0.0
    return out


def resonance_frequencies(basis: VibrationalBasis):
    """Carriers pumping v=1 (surface 1) to v=7 (surface 2) and dumping to v=6.

    The Raman relation ``w1 - w2 = E(6,1) - E(1,1)`` is checked before
    returning.
    """
    upper = basis.energy(7, 2)
    w1 = upper - basis.energy(1, 1)
    w2 = upper - basis.energy(6, 1)
    raman = basis.energy(6, 1) - basis.energy(1, 1)
    if abs((w1 - w2) - raman) > 8 * np.finfo(float).eps * abs(upper):
        raise ArithmeticError("Raman relation violated")
    return w1, w2
