"""Command-line entry point: ``globalprop <subcommand> [options]``.

Exit codes: 0 success, 2 configuration error, 3 divergence, 4 numerical
failure.
"""

from __future__ import annotations

import argparse
import json
import os
import platform
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from . import fftint, molecular, refprop, waveop
from .config import build_model, builtin_config, config_hash, load_config, serialize
from .errors import ConfigurationError, GlobalPropError
from .signal import ComplexSignal, format_float, make_time_grid, write_signal_csv

THREADS_ENV = "GLOBALPROP_THREADS"


def worker_count() -> int:
    raw = os.environ.get(THREADS_ENV, "1")
    try:
        value = int(raw)
    except ValueError:
        raise ConfigurationError(f"{THREADS_ENV} must be an integer, got {raw!r}") from None
    if value < 1:
        raise ConfigurationError(f"{THREADS_ENV} must be positive")
    return value


def write_csv(path, columns, rows, comment=None):
    """Header line of ``name [unit]`` pairs, then plain rows."""
    with open(path, "w", encoding="utf-8") as fh:
        if comment:
            fh.write(f"# {comment}\n")
        fh.write("# " + ", ".join(f"{name} [{unit}]" for name, unit in columns) + "\n")
        fh.write(",".join(name for name, _ in columns) + "\n")
        for row in rows:
            fh.write(",".join(_cell(x) for x in row) + "\n")


def _cell(x):
    if isinstance(x, (float, np.floating)):
        return format_float(float(x))
    return str(x)


def write_manifest(directory: Path, config, timings: dict, extra=None):
    manifest = {
        "command": sys.argv,
        "config_sha256": config_hash(config) if config is not None else None,
        "versions": {
            "globalprop": __version__,
            "python": platform.python_version(),
            "numpy": np.__version__,
            "scipy": scipy.__version__,
        },
        "timings_seconds": timings,
    }
    if extra:
        manifest.update(extra)
    with open(directory / "manifest.json", "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _emit_dir(path) -> Path | None:
    if path is None:
        return None
    directory = Path(path)
    directory.mkdir(parents=True, exist_ok=True)
    return directory


# -- integrate ---------------------------------------------------------------


def _integrate_once(n, t_total, t_physical, mode):
    grid = make_time_grid(t_physical, t_total, n)
    f = ComplexSignal(grid, fftint.benchmark_signal(grid.times, t_total))
    return fftint.cumulative_integral(f, mode)


def _simpson_reference(n, t_total, points):
    per = max(2, int(round(points / n)))
    per += per % 2  # even sub-count keeps the coarse nodes on Simpson panels
    m = n * per
    t = np.arange(m + 1) * (t_total / m)
    values = fftint.simpson_cumulative(fftint.benchmark_signal(t, t_total), t_total / m)
    return values[: m : per], m


def cmd_integrate(args) -> int:
    if not args.test_function:
        raise ConfigurationError("only --test-function input is supported")
    t_physical = args.t_physical if args.t_physical is not None else args.t_total
    directory = _emit_dir(args.emit_dir)
    timings = {}
    start = time.perf_counter()
    result = _integrate_once(args.n_samples, args.t_total, t_physical, args.mode)
    timings["fft"] = time.perf_counter() - start
    if args.emit:
        write_signal_csv(args.emit, result, "I", "arb*time")
    print(f"N = {args.n_samples}  I(T-dt) = {result.values[-1]:.17g}")
    if args.refine:
        fine = _integrate_once(2 * args.n_samples, args.t_total, t_physical, args.mode)
        print(f"CF_{args.n_samples} = {fftint.convergence_factor(result, fine):.3e}")
    if args.oracle == "simpson":
        start = time.perf_counter()
        reference, m = _simpson_reference(args.n_samples, args.t_total, args.simpson_points)
        timings["simpson"] = time.perf_counter() - start
        diff = np.abs(result.values - reference)
        print(f"max |FFT - Simpson({m})| = {diff.max():.3e}")
        if directory is not None:
            write_csv(directory / "fig4_fft_vs_simpson.csv", [("t", "time"), ("abs_diff", "arb*time")],
                      zip(result.times, diff))
    if args.sweep:
        if directory is None:
            raise ConfigurationError("--sweep needs --emit-dir")
        rows = []
        for k in range(6, 14):
            n = 2**k
            fft_cf = fftint.convergence_factor(
                _integrate_once(n, args.t_total, args.t_total, "periodic"),
                _integrate_once(2 * n, args.t_total, args.t_total, "periodic"),
            )
            t1 = np.arange(n + 1) * args.t_total / n
            t2 = np.arange(2 * n + 1) * args.t_total / (2 * n)
            s1 = fftint.simpson_cumulative(fftint.benchmark_signal(t1), args.t_total / n)
            s2 = fftint.simpson_cumulative(fftint.benchmark_signal(t2), args.t_total / (2 * n))
            rows.append((n, fft_cf, fftint.convergence_factor(s1, s2)))
        for k in range(14, 19):
            n = 2**k
            t1 = np.arange(n + 1) * args.t_total / n
            t2 = np.arange(2 * n + 1) * args.t_total / (2 * n)
            s1 = fftint.simpson_cumulative(fftint.benchmark_signal(t1), args.t_total / n)
            s2 = fftint.simpson_cumulative(fftint.benchmark_signal(t2), args.t_total / (2 * n))
            rows.append((n, "", fftint.convergence_factor(s1, s2)))
        write_csv(directory / "fig3_cf.csv",
                  [("n", "samples"), ("cf_fft", "arb*time"), ("cf_simpson", "arb*time")], rows)
    if directory is not None:
        write_manifest(directory, None, timings, {"n_samples": args.n_samples})
    return 0


# -- eigen -------------------------------------------------------------------


def cmd_eigen(args) -> int:
    config = _config_from_args(args) if (args.config or args.example) else builtin_config(1)
    m = config.model
    coeffs = m.surface1 if args.surface == 1 else m.surface2
    grid = molecular.RadialGrid(
        args.r_min if args.r_min is not None else m.r_min,
        args.r_max if args.r_max is not None else m.r_max,
        args.n_points if args.n_points is not None else m.n_points,
    )
    n_keep = args.n_keep if args.n_keep is not None else m.n_keep
    energies, vectors = molecular.fourier_grid_eigensolve(
        molecular.SurfaceSpec(coeffs, m.mass), grid, n_keep
    )
    rows = [(v + 1, e) for v, e in enumerate(energies)]
    if args.emit:
        write_csv(args.emit, [("v", "index"), ("energy", "energy")], rows)
    else:
        for v, e in rows:
            print(f"{v},{format_float(e)}")
    if args.vectors:
        columns = [("r", "length")] + [(f"v{v + 1}", "length^-1/2") for v in range(n_keep)]
        write_csv(args.vectors, columns, np.column_stack([grid.points, vectors]).tolist())
    return 0


# -- propagate ---------------------------------------------------------------


def _config_from_args(args):
    if getattr(args, "config", None):
        config = load_config(args.config)
    elif getattr(args, "example", None):
        config = builtin_config(args.example)
    else:
        raise ConfigurationError("give --config or --example")
    model, time_section, solver = config.model, config.time, config.solver
    if getattr(args, "dipole", None) is not None:
        model = type(model)(**{**model.__dict__, "dipole": args.dipole})
    if getattr(args, "n_samples", None) is not None:
        time_section = type(time_section)(time_section.t_physical, time_section.t_total,
                                          args.n_samples)
    updates = {}
    for key in ("tol", "max_iter"):
        if getattr(args, key, None) is not None:
            updates[key] = getattr(args, key)
    if getattr(args, "track", None):
        updates["track"] = tuple(int(v) for v in args.track.replace("v=", "").split(",") if v)
    if updates:
        solver = type(solver)(**{**solver.__dict__, **updates})
    return config.with_overrides(model=model, time=time_section, solver=solver)


def _label(basis, v):
    surface = 1 if v < basis.n_keep else 2
    return surface, v - (surface - 1) * basis.n_keep + 1


def cmd_propagate(args) -> int:
    config = _config_from_args(args)
    timings = {}
    start = time.perf_counter()
    built = build_model(config)
    timings["basis"] = time.perf_counter() - start
    basis, system = built.basis, built.system

    def progress(report):
        print(f"n={report.n:3d}  F={report.convergence:.3e}  residual={report.residual:.3e}"
              f"  {report.seconds:.2f}s", flush=True)

    start = time.perf_counter()
    result = waveop.solve(system, config.solver.tol, config.solver.max_iter,
                          keep=config.solver.keep, callback=progress if args.verbose else None)
    timings["solve"] = time.perf_counter() - start
    j = result.final_index
    amps = result.final_amplitudes
    survival = abs(amps[built.initial_index]) ** 2
    print(f"stop: {result.stop_reason} after {len(result.reports)} iterations, "
          f"F = {result.reports[-1].convergence:.3e}")
    print(f"t_final = {system.grid.times[j]:.6f}  survival = {survival:.6f}")

    directory = _emit_dir(args.emit_dir or config.output_dir)
    # wall times go to the manifest so that every CSV is reproducible
    write_csv(directory / "fig7_convergence.csv",
              [("n", "iteration"), ("F", "1"), ("residual", "energy")],
              [(r.n, r.convergence, r.residual) for r in result.reports])
    timings["iterations"] = [r.seconds for r in result.reports]
    write_csv(directory / "final_amplitudes.csv",
              [("v", "index"), ("surface", "1"), ("level", "1"), ("re", "1"), ("im", "1"),
               ("probability", "1")],
              [(v + 1, *_label(basis, v), a.real, a.imag, abs(a) ** 2)
               for v, a in enumerate(amps)])
    times = system.grid.times
    physical = slice(0, j + 1)
    tracked = [v - 1 for v in config.solver.track if 1 <= v <= system.size]
    columns = [("t", "time")]
    for v in tracked:
        columns += [(f"re_v{v + 1}", "1"), (f"im_v{v + 1}", "1")]
    write_csv(directory / "fig11_tracked.csv", columns,
              [(t, *sum(([result.psi[v, k].real, result.psi[v, k].imag] for v in tracked), []))
               for k, t in enumerate(times[physical])])
    write_signal_csv(directory / "fig12_heff.csv", result.heff, "H_eff", "energy")
    dist = waveop.fubini_study_distance(result.operator)
    write_csv(directory / "fig8_fubini_study.csv", [("t", "time"), ("distance", "rad")],
              zip(times[physical], dist[physical]))
    # per-iteration wavefunctions for the kept orders
    rows, defect_cols, defects = [], [("t", "time")], []
    for n, values in sorted(result.snapshots.items()):
        op = waveop.ReducedWaveOperator(values, system.initial_index, system.grid, n)
        psi_n = waveop.reconstruct_wavefunction(op, waveop.effective_hamiltonian(op, system))
        for v, a in enumerate(psi_n[:, j]):
            rows.append((n, v + 1, a.real, a.imag, abs(a) ** 2))
        for v in tracked:
            defect_cols.append((f"defect_n{n}_v{v + 1}", "1"))
            defects.append(np.abs(psi_n[v, physical] - result.psi[v, physical]))
    write_csv(directory / "fig9_amplitudes_by_iteration.csv",
              [("n", "iteration"), ("v", "index"), ("re", "1"), ("im", "1"),
               ("probability", "1")], rows)
    if defects:
        write_csv(directory / "fig10_defect.csv", defect_cols,
                  np.column_stack([times[physical], *defects]).tolist())
    with open(directory / "config.txt", "w", encoding="utf-8") as fh:
        fh.write(serialize(config))
    with open(directory / "summary.txt", "w", encoding="utf-8") as fh:
        fh.write(f"stop_reason = {result.stop_reason}\n")
        fh.write(f"iterations = {len(result.reports)}\n")
        fh.write(f"final_F = {format_float(result.reports[-1].convergence)}\n")
        fh.write(f"residual_norm = {format_float(result.residual_norm)}\n")
        fh.write(f"t_final = {format_float(times[j])}\n")
        fh.write(f"survival = {format_float(survival)}\n")
    write_manifest(directory, config, timings)
    return 0


# -- reference / compare -----------------------------------------------------


def _reference_run(built, method, steps, lanczos_dim=10):
    psi0 = np.zeros(built.system.size, dtype=complex)
    psi0[built.initial_index] = 1.0
    grid = built.system.grid
    t_final = grid.times[grid.physical_end_index]
    cfg = refprop.StepPropagatorConfig(steps, method, lanczos_dim)
    start = time.perf_counter()
    trajectory = refprop.propagate(psi0, built.hamiltonian, cfg, t_final)
    return trajectory, time.perf_counter() - start


def cmd_reference(args) -> int:
    config = _config_from_args(args)
    built = build_model(config)
    method = "split_sod" if args.method == "split" else "sil"
    trajectory, seconds = _reference_run(built, method, args.steps, args.lanczos_dim)
    psi = trajectory.final
    omega = refprop.reconstruct_wave_operator(psi, built.initial_index)
    print(f"{method}: {args.steps} steps in {seconds:.2f}s, "
          f"survival = {abs(psi[built.initial_index]) ** 2:.6f}")
    if args.emit:
        write_csv(args.emit,
                  [("v", "index"), ("re", "1"), ("im", "1"), ("probability", "1"),
                   ("omega_re", "1"), ("omega_im", "1")],
                  [(v + 1, a.real, a.imag, abs(a) ** 2, o.real, o.imag)
                   for v, (a, o) in enumerate(zip(psi, omega))])
    return 0


def _global_run(built, n_samples):
    config = built.config
    t = config.time
    config = config.with_overrides(time=type(t)(t.t_physical, t.t_total, n_samples))
    local = build_model(config, basis=built.basis)
    start = time.perf_counter()
    try:
        result = waveop.solve(local.system, config.solver.tol, config.solver.max_iter)
    except GlobalPropError:
        return None, time.perf_counter() - start, None
    return result.final_omega, time.perf_counter() - start, result.grid.times[result.final_index]


THRESHOLDS = (1e-6, 1e-8, 1e-10, 1e-12, 1e-14)


def timing_table(curves, thresholds=THRESHOLDS):
    """Cheapest run of each method whose factor is at or below each threshold."""
    table = []
    for threshold in thresholds:
        best = {}
        for method, points in curves.items():
            costs = [sec for _, f, sec in points if f is not None and f <= threshold]
            best[method] = min(costs) if costs else None
        table.append((threshold, best))
    return table


def cmd_compare(args) -> int:
    config = _config_from_args(args)
    built = build_model(config)
    directory = _emit_dir(args.emit_dir or config.output_dir)
    reference_omega, ref_seconds, t_ref = _global_run(built, args.reference_samples)
    if reference_omega is None:
        raise GlobalPropError("reference global run failed")
    grids = [int(x) for x in args.grids.split(",")]
    jobs = [("global", n) for n in grids]
    jobs += [("split_sod", int(s)) for s in args.split_steps.split(",")]
    jobs += [("sil", int(s)) for s in args.sil_steps.split(",")]

    def run(job):
        method, size = job
        if method == "global":
            omega, seconds, _ = _global_run(built, size)
        else:
            trajectory, seconds = _reference_run(built, method, size)
            omega = refprop.reconstruct_wave_operator(trajectory.final, built.initial_index)
        f = None if omega is None else refprop.cross_convergence_factor(omega, reference_omega)
        return method, size, f, seconds

    with ThreadPoolExecutor(max_workers=worker_count()) as pool:
        results = list(pool.map(run, jobs))
    write_csv(directory / "fig13_sweep.csv",
              [("method", "-"), ("size", "samples|steps"), ("F", "1"), ("seconds", "s")],
              [(m, s, "" if f is None else f, sec) for m, s, f, sec in results],
              comment=f"reference: global run with {args.reference_samples} samples")
    curves = {}
    for method, size, f, seconds in results:
        curves.setdefault(method, []).append((size, f, seconds))
    rows = []
    for threshold, best in timing_table(curves):
        tg, tsil, tsplit = best.get("global"), best.get("sil"), best.get("split_sod")
        rows.append((threshold,
                     "" if tg is None else tg, "" if tsil is None else tsil,
                     "" if tsplit is None else tsplit,
                     "" if None in (tg, tsil) else tg / tsil,
                     "" if None in (tg, tsplit) else tg / tsplit))
    write_csv(directory / "table2_timing.csv",
              [("threshold", "1"), ("t_global", "s"), ("t_sil", "s"), ("t_split", "s"),
               ("ratio_global_sil", "1"), ("ratio_global_split", "1")], rows)
    for method, size, f, seconds in results:
        shown = "failed" if f is None else f"{f:.3e}"
        print(f"{method:10s} {size:8d}  F = {shown:>10s}  {seconds:.2f}s")
    write_manifest(directory, config, {"reference_global": ref_seconds})
    return 0


# -- entry point -------------------------------------------------------------


def _add_model_source(parser):
    parser.add_argument("--config", help="key=value configuration file")
    parser.add_argument("--example", type=int, choices=(1, 2), help="built-in parameter set")
    parser.add_argument("--dipole", type=float, help="override the transition dipole")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="globalprop", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("integrate", help="FFT cumulative integration of the benchmark signal")
    p.add_argument("--test-function", action="store_true", help="use the gaussian benchmark")
    p.add_argument("--n-samples", type=int, default=1024)
    p.add_argument("--t-total", type=float, default=180.0)
    p.add_argument("--t-physical", type=float, help="end of the physical window (extend mode)")
    p.add_argument("--mode", choices=("periodic", "extend"), default="periodic")
    p.add_argument("--oracle", choices=("simpson",))
    p.add_argument("--simpson-points", type=int, default=150000)
    p.add_argument("--refine", action="store_true", help="also run 2N and report CF_N")
    p.add_argument("--sweep", action="store_true", help="emit CF curves over N")
    p.add_argument("--emit", help="CSV path for I(t)")
    p.add_argument("--emit-dir")
    p.set_defaults(func=cmd_integrate)

    p = sub.add_parser("eigen", help="vibrational eigenenergies of one surface")
    _add_model_source(p)
    p.add_argument("--surface", type=int, choices=(1, 2), default=1)
    p.add_argument("--n-points", type=int)
    p.add_argument("--r-min", type=float)
    p.add_argument("--r-max", type=float)
    p.add_argument("--n-keep", type=int)
    p.add_argument("--emit", help="CSV path for energies")
    p.add_argument("--vectors", help="CSV path for eigenvectors")
    p.set_defaults(func=cmd_eigen)

    p = sub.add_parser("propagate", help="global wave-operator propagation")
    _add_model_source(p)
    p.add_argument("--tol", type=float)
    p.add_argument("--max-iter", type=int)
    p.add_argument("--n-samples", type=int)
    p.add_argument("--track", help="comma-separated channels, e.g. 1,37")
    p.add_argument("--emit-dir")
    p.add_argument("-v", "--verbose", action="store_true")
    p.set_defaults(func=cmd_propagate)

    p = sub.add_parser("reference", help="step-by-step reference propagation")
    _add_model_source(p)
    p.add_argument("--method", choices=("split", "sil"), default="sil")
    p.add_argument("--steps", type=int, required=True)
    p.add_argument("--lanczos-dim", type=int, default=10)
    p.add_argument("--emit", help="CSV path for final amplitudes")
    p.set_defaults(func=cmd_reference)

    p = sub.add_parser("compare", help="cross-method convergence sweep and timing table")
    _add_model_source(p)
    p.add_argument("--grids", default="512,1024,2048,4096")
    p.add_argument("--reference-samples", type=int, default=4096)
    p.add_argument("--split-steps", default="1000,2000,4000,8000,16000,32000")
    p.add_argument("--sil-steps", default="1000,4000,16000,64000")
    p.add_argument("--emit-dir")
    p.set_defaults(func=cmd_compare)
    return parser


def _origin(exc) -> str:
    tb = exc.__traceback__
    module = "globalprop"
    while tb is not None:
        name = tb.tb_frame.f_globals.get("__name__", "")
        if name.startswith("globalprop"):
            module = name
        tb = tb.tb_next
    return module


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except GlobalPropError as exc:
        print(f"globalprop: {type(exc).__name__} in {_origin(exc)}: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
