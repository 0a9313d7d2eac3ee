import numpy as np
import pytest

from globalprop import config, molecular, waveop
from globalprop.signal import make_time_grid


@pytest.fixture(scope="session")
def basis():
    return molecular.build_basis()


@pytest.fixture(scope="session")
def example1(basis):
    return config.build_model(config.builtin_config(1), basis=basis)


@pytest.fixture(scope="session")
def example2(basis):
    return config.build_model(config.builtin_config(2), basis=basis)


@pytest.fixture(scope="session")
def example1_full(example1):
    """Example 1 iterated to n = 22 regardless of convergence, with snapshots."""
    return waveop.solve(example1.system, tol=0.0, max_iter=22, detect_plateau=False,
                        keep=(2, 4, 9, 22))


@pytest.fixture(scope="session")
def example2_result(example2):
    return waveop.solve(example2.system, tol=1e-16, max_iter=25)


@pytest.fixture(scope="session")
def example1_result(example1):
    return waveop.solve(example1.system, tol=1e-16, max_iter=25)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def make_four_level(integral=40.0, seed=5):
    """Random 4-level system with a resolved absorber on [20, 30], 512 samples.

    Returns the system and the field as a callable for ODE oracles.
    """
    rng = np.random.default_rng(seed)
    energies = np.sort(rng.uniform(0, 3, 4))
    coupling = rng.normal(size=(4, 4))
    coupling = (coupling + coupling.T) / 2
    np.fill_diagonal(coupling, 0)
    grid = make_time_grid(20.0, 30.0, 512)

    def field(s):
        return 0.3 * np.exp(-(((s - 10) / 2.0) ** 2)) * np.cos(1.7 * s)

    absorber = molecular.AbsorberSpec.from_integral(20.0, 30.0, integral)
    system = waveop.DrivenSystem(grid, energies, coupling, field(grid.times),
                                 absorber.profile(grid.times), 0)
    return system, field


@pytest.fixture
def four_level():
    return make_four_level()
