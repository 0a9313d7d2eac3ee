"""Acceptance criteria C1-C8.

Each test prints one ``PASS``/``FAIL`` line with the measured values and
then asserts the same verdict. Run alone with::

    pytest tests/test_acceptance.py -s -q
"""

import time

import numpy as np
import pytest
from scipy.integrate import solve_ivp

from globalprop import config, fftint, molecular, refprop, waveop
from globalprop import signal as sig
from globalprop.errors import SingularityError
from globalprop.signal import make_time_grid


def verdict(capsys, label, checks):
    """Print one line for a criterion; ``checks`` maps a detail string to a bool."""
    ok = all(checks.values())
    detail = "; ".join(f"{text} [{'ok' if good else 'x'}]" for text, good in checks.items())
    with capsys.disabled():
        print(f"\n{label}: {'PASS' if ok else 'FAIL'} | {detail}")
    failed = [text for text, good in checks.items() if not good]
    assert ok, "failed: " + "; ".join(failed)


@pytest.fixture(scope="module")
def final_time(example1):
    grid = example1.system.grid
    return grid.times[grid.physical_end_index]


@pytest.fixture(scope="module")
def step_runs(example1, example2, final_time):
    """Cached step-by-step runs keyed by (example, method, steps)."""
    cache = {}
    models = {1: example1, 2: example2}

    def run(example, method, steps):
        key = (example, method, steps)
        if key not in cache:
            start = time.perf_counter()
            traj = refprop.propagate(np.eye(60)[0], models[example].hamiltonian,
                                     refprop.StepPropagatorConfig(steps, method), final_time)
            cache[key] = (traj.final, time.perf_counter() - start)
        return cache[key]

    return run


def benchmark_cf(n):
    grids = [make_time_grid(180, 180, m) for m in (n, 2 * n)]
    coarse, fine = (fftint.integrate_array(fftint.benchmark_signal(g.times), g) for g in grids)
    return fftint.convergence_factor(coarse, fine)


def test_c1_integrator_plateau(capsys):
    start = time.perf_counter()
    cf = {n: benchmark_cf(n) for n in (512, 1024, 2048, 4096, 8192)}
    seconds = time.perf_counter() - start
    verdict(capsys, "C1 FFT integrator plateau", {
        f"CF_N <= 1e-12 for N >= 1024 (max {max(cf[n] for n in cf if n >= 1024):.2e}, "
        f"CF_1024 = {cf[1024]:.2e})": all(cf[n] <= 1e-12 for n in cf if n >= 1024),
        f"CF_512/CF_1024 >= 100 ({cf[512] / cf[1024]:.2e})": cf[512] >= 100 * cf[1024],
        f"runtime < 1 s ({seconds:.2f} s)": seconds < 1,
    })


def test_c2_fft_against_simpson(capsys):
    start = time.perf_counter()
    n = 1024
    grid = make_time_grid(180, 180, n)
    fft = fftint.integrate_array(fftint.benchmark_signal(grid.times), grid)
    per = 146  # 1024 * 146 = 149504 Simpson intervals
    m = n * per
    t = np.arange(m + 1) * (180 / m)
    simpson = fftint.simpson_cumulative(fftint.benchmark_signal(t), 180 / m)[:m:per]
    diff = np.abs(fft - simpson).max()
    seconds = time.perf_counter() - start
    verdict(capsys, "C2 FFT vs Simpson", {
        f"max diff <= 1e-11 ({diff:.2e})": diff <= 1e-11,
        f"runtime < 5 s ({seconds:.2f} s)": seconds < 5,
    })


def test_c3_eigenstructure(capsys):
    start = time.perf_counter()
    basis = molecular.build_basis()
    seconds = time.perf_counter() - start
    fine = molecular.build_basis(grid=molecular.RadialGrid(-4.5, 4.5, 512))
    gap = basis.energy(2, 1) - basis.energy(1, 1)
    w1, w2 = molecular.resonance_frequencies(basis)
    drift = np.abs(fine.energies - basis.energies).max()
    verdict(capsys, "C3 eigenstructure", {
        f"gap {gap:.5f} = 1.451 +- 2e-3": abs(gap - 1.451) <= 2e-3,
        f"omega1 {w1:.5f} = 9.98449 +- 1e-3": abs(w1 - 9.98449) <= 1e-3,
        f"omega2 {w2:.5f} = 4.77725 +- 1e-3": abs(w2 - 4.77725) <= 1e-3,
        f"doubling drift < 1e-9 ({drift:.1e})": drift < 1e-9,
        f"runtime < 2 s ({seconds:.2f} s)": seconds < 2,
    })


def test_c4_global_convergence(capsys, example1_result, example2_result):
    f1 = example1_result.convergence_history
    f2 = example2_result.convergence_history
    early = f2[:5]
    t1 = sum(r.seconds for r in example1_result.reports)
    t2 = sum(r.seconds for r in example2_result.reports)
    verdict(capsys, "C4 global convergence", {
        f"example 1 F <= 1e-14 within 25 (F = {f1.min():.1e} at n = {len(f1)})":
            f1.min() <= 1e-14 and len(f1) <= 25,
        f"example 2 F <= 1e-13 within 25 (F = {f2.min():.1e} at n = {len(f2)})":
            f2.min() <= 1e-13 and len(f2) <= 25,
        "example 2 F non-monotonic in n = 1..5 "
        f"({', '.join(f'{x:.1e}' for x in early)})": bool(np.any(np.diff(early) > 0)),
        f"runtime < 60 s each ({t1:.1f} s, {t2:.1f} s)": t1 < 60 and t2 < 60,
    })


def test_c5_physics_endpoints(capsys, example1_result, example2_result, step_runs):
    p1 = np.abs(example1_result.final_amplitudes) ** 2
    p2 = np.abs(example2_result.final_amplitudes) ** 2
    s1 = np.abs(step_runs(1, "sil", 64000)[0]) ** 2
    s2 = np.abs(step_runs(2, "sil", 64000)[0]) ** 2
    cross = max(abs(p1[0] - s1[0]), abs(p2[0] - s2[0]), abs(p2[5] - s2[5]))
    verdict(capsys, "C5 physics endpoints", {
        f"example 1 survival {p1[0]:.5f} = 0.2129 +- 1e-3": abs(p1[0] - 0.2129) <= 1e-3,
        f"example 2 survival {p2[0]:.5f} = 0.02864 +- 1e-3": abs(p2[0] - 0.02864) <= 1e-3,
        f"example 2 P(v=6) {p2[5]:.5f} = 0.22 +- 0.01": abs(p2[5] - 0.22) <= 0.01,
        f"SIL cross-check <= 1e-6 ({cross:.1e})": cross <= 1e-6,
    })


def test_c6_defect_bands(capsys, example1, example1_full):
    s = example1.system
    reference = example1_full.psi[36]
    defect = {}
    for n in (4, 9):
        X = waveop.ReducedWaveOperator(example1_full.snapshots[n], 0, s.grid)
        psi = waveop.reconstruct_wavefunction(X, waveop.effective_hamiltonian(X, s))
        defect[n] = np.abs(psi[36] - reference).max()
    verdict(capsys, "C6 iteration defect", {
        f"v=37 defect at n=4 < 1e-1 ({defect[4]:.1e})": defect[4] < 1e-1,
        f"v=37 defect at n=9 < 1e-3 ({defect[9]:.1e})": defect[9] < 1e-3,
    })


def test_c7_cross_method(capsys, example1, basis, example1_result, step_runs):
    omega_g = example1_result.final_omega
    t_global = sum(r.seconds for r in example1_result.reports)
    fine = config.builtin_config(1).with_overrides(time=config.TimeSection(45.0, 50.0, 8192))
    fine_result = waveop.solve(config.build_model(fine, basis=basis).system)
    f_g = refprop.cross_convergence_factor(fine_result.final_omega, omega_g)
    curves = {}
    for method, steps in (("split_sod", (1000, 2000, 4000, 8000, 16000, 32000, 64000)),
                          ("sil", (1000, 4000, 16000, 64000, 96000))):
        curves[method] = []
        for n in steps:
            psi, seconds = step_runs(1, method, n)
            omega = refprop.reconstruct_wave_operator(psi, 0)
            curves[method].append((n, refprop.cross_convergence_factor(omega, omega_g), seconds))
    checks = {}
    for method, points in curves.items():
        fs = [f for _, f, _ in points]
        checks[f"{method} F_C monotone within 10x ({', '.join(f'{f:.1e}' for f in fs)})"] = all(
            b <= 10 * a for a, b in zip(fs, fs[1:]))
        checks[f"{method} reaches <= 1e-9"] = min(fs) <= 1e-9
    checks[f"F_G(4096 vs 8192) <= 1e-12 ({f_g:.1e})"] = f_g <= 1e-12
    sil_costs = [sec for _, f, sec in curves["sil"] if f <= 1e-14]
    if sil_costs:
        ratio = t_global / min(sil_costs)
        checks[f"T_G/T_SIL < 1 at 1e-14 ({ratio:.3f})"] = ratio < 1
    else:
        checks["SIL reaches 1e-14 within the sweep"] = False
    verdict(capsys, "C7 cross-method convergence", checks)


def test_c8_property_suite(capsys, example1, example1_result, example2, four_level):
    rng = np.random.default_rng(8)
    checks = {}

    f = rng.normal(size=512) + 1j * rng.normal(size=512)
    parseval = abs(np.linalg.norm(sig.dft_array(f)) - np.linalg.norm(f)) / np.linalg.norm(f)
    checks[f"Parseval ({parseval:.1e})"] = parseval <= 1e-13

    grid = make_time_grid(7.0, 7.0, 256)
    t = grid.times
    exact_err = 0.0
    for ell in (1, 17, -90, 127):
        h = np.exp(2j * np.pi * ell * t / 7.0)
        expected = 7.0 / (2j * np.pi * ell) * (h - 1)
        exact_err = max(exact_err, np.abs(fftint.integrate_array(h, grid) - expected).max())
    checks[f"harmonic exactness ({exact_err:.1e})"] = exact_err <= 1e-13
    checks["I(0) = 0"] = fftint.integrate_array(f, make_time_grid(2, 2, 512))[0] == 0

    s = example1.system
    X = waveop.ReducedWaveOperator.zeros(s)
    mask = s.channel_mask
    physical = s.grid.times < s.grid.t_physical_end
    delta = waveop.residual_delta(X, s)
    delta[:, ~physical] = 0
    heff = waveop.effective_hamiltonian(X, s).values
    h = waveop.tilde_h_diag(X, s)[mask]
    dX = waveop.increment_delta_x(delta[mask], heff, h, s.grid)
    back = np.abs(1j * sig.derivative_array(dX, s.grid) - delta[mask]
                  - (h - heff[None, :]) * dX).max() / np.abs(delta).max()
    checks[f"back-substitution ({back:.1e})"] = back <= 1e-8

    norm = np.sum(np.abs(example1_result.psi[:, physical]) ** 2, axis=0)
    drift = np.abs(norm - 1).max()
    checks[f"norm restoration ({drift:.1e})"] = drift <= 1e-6

    system, field = four_level
    result = waveop.solve(system, tol=1e-20, max_iter=40)
    j = system.grid.times <= 20.0
    sol = solve_ivp(lambda u, y: -1j * (system.energies * y + field(u) * (system.coupling @ y)),
                    (0, 20.0), np.eye(4)[0].astype(complex), t_eval=system.grid.times[j],
                    rtol=1e-12, atol=1e-13)
    rk = np.abs(sol.y - result.psi[:, j]).max()
    checks[f"4-level RK45 ({rk:.1e})"] = rk <= 1e-8

    for variant in ("adiabatic", "fourier"):
        try:
            norms = waveop.rdwa_iterate(example2.system, variant, n_iter=12)
            diverged = not np.isfinite(norms[-1]) or norms[-1] > 1e6
            note = f"{norms[-1]:.1e}"
        except SingularityError:
            diverged, note = True, "singular"
        checks[f"RDWA {variant} diverges ({note})"] = diverged
    verdict(capsys, "C8 property suite", checks)
