"""Step-by-step reference propagators.

Two independent integrators of ``i dpsi/dt = H(t) psi`` in the vibrational
eigenbasis:

* ``split_sod``: the diagonal part ``H0 = diag(E)`` is propagated exactly and
  the field coupling by second-order differencing in the interaction
  picture,

      psi(t+dt) = e^{-2i H0 dt} psi(t-dt) - 2i dt e^{-i H0 dt} V(t) psi(t),

  started with one exact exponential of the midpoint Hamiltonian.
* ``sil``: short iterative Lanczos; each step exponentiates the midpoint
  Hamiltonian in a small Krylov space.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import expm

from .errors import ConfigurationError, ModelSpaceBreakdown
from .molecular import ModelHamiltonian

__all__ = [
    "StepPropagatorConfig",
    "Trajectory",
    "lanczos_step",
    "split_sod_propagate",
    "sil_propagate",
    "propagate",
    "reconstruct_wave_operator",
    "cross_convergence_factor",
]


@dataclass(frozen=True)
class StepPropagatorConfig:
    n_steps: int
    method: str = "sil"
    lanczos_dim: int = 10

    def __post_init__(self):
        if self.n_steps < 2:
            raise ConfigurationError("n_steps must be at least 2")
        if self.lanczos_dim < 2:
            raise ConfigurationError("lanczos_dim must be at least 2")
        if self.method not in ("split_sod", "sil"):
            raise ConfigurationError(f"unknown step method {self.method!r}")


@dataclass(frozen=True)
class Trajectory:
    times: np.ndarray
    states: np.ndarray  # shape (n_records, N_v)

    @property
    def final(self) -> np.ndarray:
        return self.states[-1]


def _record_stride(record, n_steps):
    if record == "final":
        return n_steps
    if record == "all":
        return 1
    stride = int(record)
    if stride < 1:
        raise ConfigurationError("record stride must be positive")
    return stride


def _normalized(psi0):
    psi = np.array(psi0, dtype=complex)
    norm = np.linalg.norm(psi)
    if not np.isclose(norm, 1.0, atol=1e-12):
        raise ConfigurationError("initial state must be normalised")
    return psi


def split_sod_propagate(psi0, model: ModelHamiltonian, config: StepPropagatorConfig,
                        t_final: float, record="final") -> Trajectory:
    psi_prev = _normalized(psi0)
    n = config.n_steps
    dt = t_final / n
    stride = _record_stride(record, n)
    phase = np.exp(-1j * model.energies * dt)
    phase2 = phase * phase
    coupling = model.coupling
    fields = np.atleast_1d(model.field(np.arange(n) * dt))
    psi = expm(-1j * dt * model.matrix(0.5 * dt)) @ psi_prev
    times, states = [0.0], [psi_prev.copy()]
    for s in range(1, n + 1):
        if s % stride == 0 or s == n:
            times.append(s * dt)
            states.append(psi.copy())
        if s == n:
            break
        v_psi = fields[s] * (coupling @ psi)
        psi_prev, psi = psi, phase2 * psi_prev - 2j * dt * phase * v_psi
    return Trajectory(np.array(times), np.array(states))


def lanczos_step(h: np.ndarray, psi: np.ndarray, dt: float, dim: int,
                 breakdown: float = 1e-14) -> np.ndarray:
    """``exp(-i h dt) psi`` from a Krylov space of dimension ``<= dim``.

    Basis vectors are fully re-orthogonalised. A small ``beta`` ends the
    recursion early; the space is then invariant and the result exact.
    """
    beta0 = np.linalg.norm(psi)
    if beta0 == 0.0:
        return psi.copy()
    dim = min(dim, len(psi))
    basis = np.empty((dim, len(psi)), dtype=complex)  # one Krylov vector per row
    basis[0] = psi / beta0
    alpha, beta = [], []
    for j in range(dim):
        w = h @ basis[j]
        alpha.append(np.vdot(basis[j], w).real)
        block = basis[: j + 1]
        w -= (block.conj() @ w) @ block
        w -= (block.conj() @ w) @ block
        b = np.linalg.norm(w)
        if j == dim - 1 or b < breakdown:
            break
        beta.append(b)
        basis[j + 1] = w / b
    k = len(alpha)
    if k == 1:
        return psi * np.exp(-1j * alpha[0] * dt)
    tri = np.diag(alpha) + np.diag(beta[: k - 1], 1) + np.diag(beta[: k - 1], -1)
    evals, evecs = np.linalg.eigh(tri)
    coeffs = evecs @ (np.exp(-1j * evals * dt) * evecs[0])
    return beta0 * (coeffs @ basis[:k])


def sil_propagate(psi0, model: ModelHamiltonian, config: StepPropagatorConfig,
                  t_final: float, record="final") -> Trajectory:
    psi = _normalized(psi0)
    n = config.n_steps
    dt = t_final / n
    stride = _record_stride(record, n)
    times, states = [0.0], [psi.copy()]
    fields = np.atleast_1d(model.field((np.arange(n) + 0.5) * dt))
    diag = np.diag(model.energies).astype(complex)
    for k in range(n):
        h = diag + fields[k] * model.coupling
        psi = lanczos_step(h, psi, dt, config.lanczos_dim)
        if (k + 1) % stride == 0 or k + 1 == n:
            times.append((k + 1) * dt)
            states.append(psi.copy())
    return Trajectory(np.array(times), np.array(states))


def propagate(psi0, model: ModelHamiltonian, config: StepPropagatorConfig, t_final: float,
              record="final") -> Trajectory:
    run = split_sod_propagate if config.method == "split_sod" else sil_propagate
    return run(psi0, model, config, t_final, record)


def reconstruct_wave_operator(trajectory, initial_index: int, t_index: int = -1,
                              tiny: float = 1e-12) -> np.ndarray:
    """``Omega_v = Psi_v / Psi_i`` for a state or a recorded trajectory."""
    if isinstance(trajectory, Trajectory):
        psi = trajectory.states[t_index]
    else:
        psi = np.asarray(trajectory)
    ref = psi[initial_index]
    if abs(ref) <= tiny:
        raise ModelSpaceBreakdown("initial-state amplitude vanished; wave operator undefined")
    omega = psi / ref
    omega[initial_index] = 1.0
    return omega


def cross_convergence_factor(omega_a, omega_b) -> float:
    a = np.asarray(omega_a)
    b = np.asarray(omega_b)
    if a.shape != b.shape:
        raise ConfigurationError("wave-operator vectors differ in size")
    return float(np.sum(np.abs(a - b) ** 2))
