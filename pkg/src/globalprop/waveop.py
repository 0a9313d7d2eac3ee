"""Global time-dependent wave-operator solver for a one-state model space.

The unknown is the reduced wave operator ``X_v(t)``, ``v != i``, which maps
the initial state ``|i>`` onto the rest of the basis. Starting from
``X = 0`` every iteration

1. evaluates the residual ``Delta_v = [H(1+X)]_v - X_v H_eff - i dX_v/dt``,
2. solves the linear first-order equation

       i d(dX_v)/dt = Delta_v + (h_v - H_eff) dX_v,   dX_v(0) = 0,

   in closed form with two cumulative FFT integrals per channel, where
   ``h_v = H_vv - X_v H_iv`` is the dressed diagonal element,
3. sets ``X <- X + dX``.

The wavefunction follows as ``Psi_v = (delta_vi + X_v) exp(-i int H_eff)``.
An optical potential on ``[T0, T]`` absorbs ``X`` so that all signals are
periodic on the full grid.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from . import signal as sig
from .errors import ConfigurationError, DegenerateInputError, DivergenceError, SingularityError
from .fftint import integrate_array, mu_coefficients
from .molecular import AbsorberSpec, ModelHamiltonian
from .signal import ComplexSignal, TimeGrid

__all__ = [
    "DrivenSystem",
    "ReducedWaveOperator",
    "IterationReport",
    "PropagationResult",
    "residual_delta",
    "effective_hamiltonian",
    "tilde_h_diag",
    "increment_delta_x",
    "dealias",
    "iterate",
    "global_convergence_factor",
    "reconstruct_wavefunction",
    "fubini_study_distance",
    "rdwa_update",
    "rdwa_iterate",
    "solve",
]

# Re(phi) spread above which the increment switches to windowed rescaling
WINDOW_THRESHOLD = 20.0
# target Re(phi) spread per window in windowed mode
WINDOW_SPREAD = 4.0


@dataclass(frozen=True)
class DrivenSystem:
    """Samples of ``H(t) = diag(E) + E(t) C - i V_opt(t) Q`` on a time grid.

    ``Q`` projects out ``initial_index``.
    """

    grid: TimeGrid
    energies: np.ndarray
    coupling: np.ndarray
    field: np.ndarray
    vopt: np.ndarray
    initial_index: int = 0

    def __post_init__(self):
        n_v = len(self.energies)
        n_t = self.grid.n_samples
        if np.shape(self.coupling) != (n_v, n_v):
            raise ConfigurationError("coupling matrix does not match the basis size")
        if np.shape(self.field) != (n_t,) or np.shape(self.vopt) != (n_t,):
            raise ConfigurationError("field and absorber samples must match the time grid")
        if not 0 <= self.initial_index < n_v:
            raise ConfigurationError("initial index outside the basis")
        for name in ("energies", "coupling", "field", "vopt"):
            arr = np.array(getattr(self, name), copy=True)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @classmethod
    def from_model(cls, hamiltonian: ModelHamiltonian, grid: TimeGrid,
                   absorber: AbsorberSpec | None = None, initial_index: int = 0):
        times = grid.times
        vopt = np.zeros(grid.n_samples) if absorber is None else absorber.profile(times)
        return cls(grid, hamiltonian.energies, hamiltonian.coupling,
                   np.asarray(hamiltonian.field(times), dtype=float), vopt, initial_index)

    @property
    def size(self) -> int:
        return len(self.energies)

    @property
    def channel_mask(self) -> np.ndarray:
        mask = np.ones(self.size, dtype=bool)
        mask[self.initial_index] = False
        return mask

    def diagonal(self) -> np.ndarray:
        """``H_vv(t)`` including the optical potential, shape ``(N_v, N_t)``."""
        absorb = np.where(self.channel_mask[:, None], self.vopt[None, :], 0.0)
        return self.energies[:, None] - 1j * absorb

    def apply(self, y: np.ndarray) -> np.ndarray:
        """``H(t_k) y[:, k]`` for every time sample."""
        return self.diagonal() * y + self.field[None, :] * (self.coupling @ y)

    def initial_row(self) -> np.ndarray:
        """``H_iv(t)`` for all v, shape ``(N_v, N_t)``."""
        return self.coupling[self.initial_index][:, None] * self.field[None, :]


@dataclass
class ReducedWaveOperator:
    values: np.ndarray
    initial_index: int
    grid: TimeGrid
    iteration: int = 0

    @classmethod
    def zeros(cls, system: DrivenSystem) -> "ReducedWaveOperator":
        return cls(np.zeros((system.size, system.grid.n_samples), dtype=complex),
                   system.initial_index, system.grid)

    def omega(self) -> np.ndarray:
        """``P_o + X`` as columns over time: row ``i`` is one."""
        om = self.values.copy()
        om[self.initial_index] = 1.0
        return om


@dataclass(frozen=True)
class IterationReport:
    n: int
    convergence: float
    residual: float
    seconds: float


@dataclass
class PropagationResult:
    operator: ReducedWaveOperator
    heff: ComplexSignal
    psi: np.ndarray
    reports: list
    residual_norm: float
    converged: bool
    stop_reason: str
    snapshots: dict = field(default_factory=dict)

    @property
    def grid(self) -> TimeGrid:
        return self.operator.grid

    @property
    def final_index(self) -> int:
        return self.grid.physical_end_index

    @property
    def final_amplitudes(self) -> np.ndarray:
        return self.psi[:, self.final_index]

    @property
    def final_omega(self) -> np.ndarray:
        return self.operator.omega()[:, self.final_index]

    @property
    def convergence_history(self) -> np.ndarray:
        return np.array([r.convergence for r in self.reports])


def effective_hamiltonian(X: ReducedWaveOperator, system: DrivenSystem) -> ComplexSignal:
    i = system.initial_index
    h_ii = system.diagonal()[i]
    heff = h_ii + np.sum(system.initial_row() * X.values, axis=0)
    return ComplexSignal(system.grid, heff)


def residual_delta(X: ReducedWaveOperator, system: DrivenSystem) -> np.ndarray:
    """Defect of the wave-operator equation; row ``i`` is zero."""
    h_omega = system.apply(X.omega())
    heff = h_omega[system.initial_index]
    delta = h_omega - X.values * heff[None, :] - 1j * sig.derivative_array(X.values, system.grid)
    delta[system.initial_index] = 0.0
    return delta


def tilde_h_diag(X: ReducedWaveOperator, system: DrivenSystem) -> np.ndarray:
    """``h_v(t) = H_vv(t) - X_v(t) H_iv(t)``; the row of ``i`` is left at ``H_ii``."""
    return system.diagonal() - X.values * system.initial_row()


def _smooth_step(x):
    x = np.clip(x, 0.0, 1.0)

    def bump(y):
        return np.where(y > 0, np.exp(-1.0 / np.where(y > 0, y, 1.0)), 0.0)

    return bump(x) / (bump(x) + bump(1.0 - x))


def _windows(grid: TimeGrid, length: float, transition: float):
    """Smooth partition of unity over the grid with cut points every ``length``."""
    t = grid.times
    cuts = np.arange(length, grid.t_total - 0.5 * length, length)
    if len(cuts) == 0:
        return [(np.ones_like(t), 0)]
    steps = [_smooth_step((t - a) / transition) for a in cuts]
    weights = [1.0 - steps[0]]
    weights += [steps[k] - steps[k + 1] for k in range(len(steps) - 1)]
    weights.append(steps[-1])
    starts = [0] + [int(np.searchsorted(t, a, side="left")) for a in cuts]
    return list(zip(weights, starts))


def _exp_product(delta, phi, grid, mu, rescale):
    """``exp(phi(t)) int_0^t delta exp(-phi)`` channel-wise."""
    rho = phi.real
    spread = (rho.max(axis=-1) - rho.min(axis=-1)).max() if rho.size else 0.0
    if rescale == "global" or (rescale == "auto" and spread < WINDOW_THRESHOLD):
        c = rho.max(axis=-1, keepdims=True)
        return np.exp(phi - c) * integrate_array(delta * np.exp(-(phi - c)), grid, mu)
    # windowed: the exponents stay bounded on every window's support; more
    # windows for larger spreads, but never narrower than 32 samples
    n_windows = int(np.clip(np.ceil(spread / WINDOW_SPREAD), 20, grid.n_samples // 32))
    length = grid.t_total / n_windows
    out = np.zeros_like(delta)
    for weight, start in _windows(grid, length, 0.8 * length):
        support = weight > 0
        c = np.where(support[None, :], rho, np.inf).min(axis=-1, keepdims=True)
        expo = np.where(support[None, :], -(phi - c), -np.inf)
        g = weight * delta * np.exp(expo)
        part = integrate_array(g, grid, mu)
        # before the support the partial integral is zero and exp(phi - c)
        # may overflow
        out[:, start:] += np.exp(phi[:, start:] - c) * part[:, start:]
    return out


def increment_delta_x(delta, heff, htilde, grid: TimeGrid, rescale: str = "auto") -> np.ndarray:
    """Exact solution of ``i dY/dt = delta + (htilde - heff) Y`` with ``Y(0) = 0``.

    ``delta`` and ``htilde`` have shape ``(channels, N_t)``; ``heff`` is a
    scalar signal. ``rescale`` is ``"auto"``, ``"global"`` or ``"window"``;
    all three are algebraically identical and differ only in how the
    exponentials are kept inside floating-point range.
    """
    delta = np.atleast_2d(np.asarray(delta, dtype=complex))
    heff = np.asarray(getattr(heff, "values", heff), dtype=complex)
    htilde = np.atleast_2d(np.asarray(htilde, dtype=complex))
    mu = mu_coefficients(grid)
    phi = integrate_array((htilde - heff[None, :]) / 1j, grid, mu)
    with np.errstate(over="ignore", invalid="ignore"):
        out = _exp_product(delta, phi, grid, mu, rescale) / 1j
    out[:, 0] = 0.0
    return out


def dealias(values: np.ndarray, fraction: float = 1.0 / 3.0) -> np.ndarray:
    """Remove Fourier modes with ``|l'| > fraction * N`` along the last axis."""
    n = values.shape[-1]
    l = np.arange(n)
    signed = np.where(l < n // 2, l, l - n)
    coeffs = sig.dft_array(values)
    coeffs[..., np.abs(signed) > fraction * n] = 0.0
    out = sig.idft_array(coeffs)
    out[..., 0] = 0.0
    return out


def global_convergence_factor(dX, X_new) -> float:
    dX = np.asarray(getattr(dX, "values", dX))
    X_new = np.asarray(getattr(X_new, "values", X_new))
    denominator = float(np.sum(np.abs(X_new) ** 2))
    if denominator == 0.0:
        raise DegenerateInputError("new wave operator is identically zero")
    return float(np.sum(np.abs(dX) ** 2)) / denominator


def _physical_tail(grid: TimeGrid) -> np.ndarray:
    return grid.times >= grid.t_physical_end


def iterate(X: ReducedWaveOperator, system: DrivenSystem, project_tail: bool = True,
            filter_modes: bool = True, rescale: str = "auto"):
    """One increment ``X -> X + dX`` and its report.

    ``project_tail`` discards the residual on ``[T0, T]``, where the field
    vanishes. ``filter_modes`` applies a two-thirds de-aliasing filter to
    ``dX``.

    Returns
    -------
    (ReducedWaveOperator, IterationReport, numpy.ndarray)
        The new operator, the report and the increment itself.
    """
    start = time.perf_counter()
    delta = residual_delta(X, system)
    residual = float(np.abs(delta[:, ~_physical_tail(system.grid)]).max())
    if project_tail:
        delta[:, _physical_tail(system.grid)] = 0.0
    heff = effective_hamiltonian(X, system)
    htilde = tilde_h_diag(X, system)
    mask = system.channel_mask
    dX = np.zeros_like(X.values)
    dX[mask] = increment_delta_x(delta[mask], heff, htilde[mask], system.grid, rescale)
    if filter_modes:
        dX = dealias(dX)
    new = ReducedWaveOperator(X.values + dX, X.initial_index, X.grid, X.iteration + 1)
    if not np.all(np.isfinite(new.values)):
        raise DivergenceError(f"non-finite wave operator at iteration {new.iteration}")
    if np.any(dX):
        f = global_convergence_factor(dX, new.values)
    else:
        f = 0.0
    report = IterationReport(new.iteration, f, residual, time.perf_counter() - start)
    return new, report, dX


def reconstruct_wavefunction(X: ReducedWaveOperator, heff, grid: TimeGrid | None = None):
    """``Psi_v(t) = (delta_vi + X_v(t)) exp(-i int_0^t H_eff)``."""
    grid = X.grid if grid is None else grid
    heff = np.asarray(getattr(heff, "values", heff))
    phase = np.exp(integrate_array(heff, grid) / 1j)
    return X.omega() * phase[None, :]


def fubini_study_distance(X, t_index=None):
    """``arccos(1 / sqrt(1 + |X(t)|^2))`` per sample, or at ``t_index``."""
    values = np.asarray(getattr(X, "values", X))
    if values.ndim == 1:
        values = values[:, None]
    norm2 = np.sum(np.abs(values) ** 2, axis=0)
    dist = np.arccos(1.0 / np.sqrt(1.0 + norm2))
    return dist if t_index is None else float(dist[t_index])


def rdwa_update(X: ReducedWaveOperator, system: DrivenSystem, variant: str = "adiabatic",
                tiny: float = 1e-10) -> ReducedWaveOperator:
    """Approximate update replacing the exact increment by a quotient.

    ``adiabatic`` divides the residual pointwise in time by
    ``H_eff - h_v``. ``fourier`` projects ``(H_F - h) X + H`` on each
    Fourier mode ``p`` and divides by the zero-mode averages
    ``<H_eff> - <h_v>``; the quotient is the same for every ``p``.
    """
    mask = system.channel_mask
    heff = effective_hamiltonian(X, system).values
    htilde = tilde_h_diag(X, system)
    new = X.values.copy()
    if variant == "adiabatic":
        delta = residual_delta(X, system)[mask]
        denom = heff[None, :] - htilde[mask]
        if np.min(np.abs(denom)) < tiny:
            raise SingularityError("h_v crosses H_eff; adiabatic quotient undefined")
        new[mask] = X.values[mask] + delta / denom
    elif variant == "fourier":
        # numerator <v',p'|(H_F - H~) X + H|i,0>, i.e. the residual without
        # the X H_eff term; the denominator is p-independent
        numer = (system.apply(X.omega()) - htilde * X.values
                 - 1j * sig.derivative_array(X.values, system.grid))[mask]
        denom = np.mean(heff) - np.mean(htilde[mask], axis=1)
        if np.min(np.abs(denom)) < tiny:
            raise SingularityError("averaged denominators vanish")
        new[mask] = numer / denom[:, None]
    else:
        raise ConfigurationError(f"unknown RDWA variant {variant!r}")
    return ReducedWaveOperator(new, X.initial_index, X.grid, X.iteration + 1)


def rdwa_iterate(system: DrivenSystem, variant: str, n_iter: int = 10, blowup: float = 1e8):
    """Run the approximate update from ``X = 0``; return the norm history.

    Stops early (without raising) when the norm exceeds ``blowup`` or stops
    being finite. A :class:`SingularityError` is propagated.
    """
    X = ReducedWaveOperator.zeros(system)
    norms = []
    with np.errstate(all="ignore"):
        for _ in range(n_iter):
            X = rdwa_update(X, system, variant)
            norm = float(np.sqrt(np.sum(np.abs(X.values) ** 2)))
            norms.append(norm)
            if not np.isfinite(norm) or norm > blowup:
                break
    return norms


def _plateau(history, window=3, ratio=1.1, ceiling=1e-8) -> bool:
    if len(history) < window:
        return False
    recent = history[-window:]
    lo, hi = min(recent), max(recent)
    return hi < ceiling and (lo == hi or (lo > 0 and hi / lo < ratio))


def solve(system: DrivenSystem, tol: float = 1e-16, max_iter: int = 25, keep=(),
          project_tail: bool = True, filter_modes: bool = True, rescale: str = "auto",
          detect_plateau: bool = True, callback=None) -> PropagationResult:
    """Iterate from ``X = 0`` until ``F <= tol``, a plateau, or ``max_iter``.

    ``keep`` lists iteration numbers whose operator is stored in
    ``result.snapshots``. A plateau means three consecutive factors within
    10% of each other, only accepted once ``F`` is below ``1e-8``.

    Raises
    ------
    DivergenceError
        On non-finite values or five consecutive increases of ``F`` after
        the fifth iteration. ``history`` carries the reports so far.
    """
    if max_iter < 1:
        raise ConfigurationError("max_iter must be positive")
    X = ReducedWaveOperator.zeros(system)
    reports, history, snapshots = [], [], {}
    keep = set(keep)
    rises = 0
    converged, reason = False, "max_iter"
    for _ in range(max_iter):
        try:
            # overflow on the way to a blow-up is reported as divergence
            with np.errstate(over="ignore", invalid="ignore"):
                X, report, _dX = iterate(X, system, project_tail, filter_modes, rescale)
        except DivergenceError as exc:
            raise DivergenceError(str(exc), reports) from exc
        reports.append(report)
        if callback is not None:
            callback(report)
        if X.iteration in keep:
            snapshots[X.iteration] = X.values.copy()
        f = report.convergence
        if history and X.iteration > 5 and f > history[-1]:
            rises += 1
        else:
            rises = 0
        history.append(f)
        if rises >= 5:
            raise DivergenceError("convergence factor grew for five iterations", reports)
        if f <= tol:
            converged, reason = True, "tolerance"
            break
        if detect_plateau and _plateau(history):
            converged, reason = True, "plateau"
            break
    heff = effective_hamiltonian(X, system)
    psi = reconstruct_wavefunction(X, heff)
    final_delta = residual_delta(X, system)[:, ~_physical_tail(system.grid)]
    return PropagationResult(
        operator=X,
        heff=heff,
        psi=psi,
        reports=reports,
        residual_norm=float(np.abs(final_delta).max()),
        converged=converged,
        stop_reason=reason,
        snapshots=snapshots,
    )
