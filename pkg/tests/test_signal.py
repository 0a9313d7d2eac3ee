import numpy as np
import pytest

from globalprop import fftint
from globalprop.errors import ConfigurationError
from globalprop.signal import (
    ComplexSignal,
    Spectrum,
    forward_dft,
    interpolate,
    inverse_dft,
    make_time_grid,
    spectral_derivative,
    write_signal_csv,
)


def brute_dft(f):
    n = len(f)
    j = np.arange(n)
    return np.exp(-2j * np.pi * np.outer(j, j) / n) @ f / np.sqrt(n)


def brute_idft(F):
    n = len(F)
    j = np.arange(n)
    return np.exp(2j * np.pi * np.outer(j, j) / n) @ F / np.sqrt(n)


def test_grid_spacing():
    grid = make_time_grid(180, 180, 2048)
    assert grid.times[1] == pytest.approx(180 / 2048, rel=0, abs=1e-15)
    np.testing.assert_allclose(np.diff(grid.times), grid.dt, rtol=0, atol=1e-12)


def test_grid_small():
    np.testing.assert_array_equal(make_time_grid(1, 1, 4).times, [0, 0.25, 0.5, 0.75])


def test_physical_end_index():
    assert make_time_grid(45, 50, 4096).physical_end_index == 3686


@pytest.mark.parametrize("args", [(1, 1, 5), (1, 1, 2), (0, 1, 8), (2, 1, 8), (1, -1, 8)])
def test_grid_rejects_bad_input(args):
    with pytest.raises(ConfigurationError):
        make_time_grid(*args)


def test_frequency_layout():
    grid = make_time_grid(2, 2, 8)
    expected = np.array([0, 1, 2, 3, -4, -3, -2, -1]) / 2
    np.testing.assert_array_equal(grid.frequencies, expected)


def test_dft_constant():
    grid = make_time_grid(1, 1, 4)
    F = forward_dft(ComplexSignal(grid, np.ones(4)))
    np.testing.assert_allclose(F.coefficients, [2, 0, 0, 0], atol=1e-15)


def test_dft_single_harmonic():
    grid = make_time_grid(1, 1, 8)
    f = ComplexSignal(grid, np.exp(2j * np.pi * np.arange(8) / 8))
    expected = np.zeros(8)
    expected[1] = np.sqrt(8)
    np.testing.assert_allclose(forward_dft(f).coefficients, expected, atol=1e-14)


def test_dft_matches_direct_sum(rng):
    grid = make_time_grid(1, 1, 16)
    f = rng.normal(size=16) + 1j * rng.normal(size=16)
    np.testing.assert_allclose(forward_dft(ComplexSignal(grid, f)).coefficients, brute_dft(f),
                               rtol=0, atol=1e-13)


def test_inverse_constant():
    grid = make_time_grid(1, 1, 4)
    np.testing.assert_allclose(inverse_dft(Spectrum(grid, [2, 0, 0, 0])).values, np.ones(4),
                               atol=1e-15)


def test_inverse_of_delta_is_flat():
    grid = make_time_grid(1, 1, 16)
    delta = np.zeros(16)
    delta[3] = 1.0
    F = forward_dft(ComplexSignal(grid, delta))
    np.testing.assert_allclose(np.abs(F.coefficients), 0.25, atol=1e-15)


def test_inverse_matches_direct_sum(rng):
    grid = make_time_grid(1, 1, 16)
    F = rng.normal(size=16) + 1j * rng.normal(size=16)
    np.testing.assert_allclose(inverse_dft(Spectrum(grid, F)).values, brute_idft(F), atol=1e-13)


def test_round_trip(rng):
    grid = make_time_grid(3, 3, 256)
    f = ComplexSignal(grid, rng.normal(size=256) + 1j * rng.normal(size=256))
    back = inverse_dft(forward_dft(f)).values
    err = np.linalg.norm(back - f.values) / np.linalg.norm(f.values)
    assert err <= 100 * np.finfo(float).eps * 256


def test_derivative_of_harmonic():
    T = 3.0
    grid = make_time_grid(T, T, 64)
    t = grid.times
    d = spectral_derivative(ComplexSignal(grid, np.exp(2j * np.pi * t / T)))
    np.testing.assert_allclose(d.values, 2j * np.pi / T * np.exp(2j * np.pi * t / T), atol=1e-12)


def test_derivative_of_constant():
    grid = make_time_grid(1, 1, 32)
    d = spectral_derivative(ComplexSignal(grid, np.full(32, 4.0 - 1j)))
    np.testing.assert_allclose(d.values, 0, atol=1e-14)


def test_derivative_of_gaussian_against_central_differences():
    grid = make_time_grid(180, 180, 2048)
    a, tc, x = fftint.BENCHMARK_TERMS[2]
    t = grid.times
    g = np.exp(-a * (t - tc) ** 2) * np.exp(2j * np.pi * x * t / 180)
    spectral = spectral_derivative(ComplexSignal(grid, g)).values
    h = grid.dt
    central = (np.roll(g, -1) - np.roll(g, 1)) / (2 * h)
    # exact derivative to separate the two error sources
    exact = (-2 * a * (t - tc) + 2j * np.pi * x / 180) * g
    fd_err = np.abs(central - exact).max()
    assert np.abs(spectral - central).max() <= 1.01 * fd_err
    assert np.abs(spectral - exact).max() < 1e-10 < fd_err


def test_nyquist_coefficient_dropped():
    grid = make_time_grid(1, 1, 8)
    alternating = ComplexSignal(grid, (-1.0) ** np.arange(8))
    np.testing.assert_allclose(spectral_derivative(alternating).values, 0, atol=1e-14)


def test_signal_is_immutable():
    grid = make_time_grid(1, 1, 4)
    f = ComplexSignal(grid, np.ones(4))
    with pytest.raises(ValueError):
        f.values[0] = 2.0


def test_signal_length_checked():
    with pytest.raises(ConfigurationError):
        ComplexSignal(make_time_grid(1, 1, 4), np.ones(5))


def test_interpolate_reproduces_samples_and_harmonics():
    T = 2.0
    grid = make_time_grid(T, T, 32)
    f = ComplexSignal(grid, np.exp(2j * np.pi * 3 * grid.times / T))
    np.testing.assert_allclose(interpolate(f, grid.times), f.values, atol=1e-13)
    assert interpolate(f, 0.123) == pytest.approx(np.exp(2j * np.pi * 3 * 0.123 / T), abs=1e-13)


def test_csv_format(tmp_path):
    grid = make_time_grid(1, 1, 4)
    f = ComplexSignal(grid, [0.1, 1 / 3, -2j, 1e-300])
    path = tmp_path / "f.csv"
    write_signal_csv(path, f)
    lines = path.read_text().splitlines()
    assert lines[1] == "t,re,im"
    assert lines[3] == "0.25,0.33333333333333331,0"
    assert len(lines) == 6
    values = np.loadtxt(path, delimiter=",", skiprows=2)
    np.testing.assert_array_equal(values[:, 1] + 1j * values[:, 2], f.values)
