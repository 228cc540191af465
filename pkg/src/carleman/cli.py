"""Command-line interface.

Exit status: 0 success, 1 malformed input, 2 violated precondition or
failed check, 3 I/O error.  Reports go to stdout as ``key=value`` lines;
files are only written to paths given on the command line.
"""

from __future__ import annotations

import argparse
import math
import os
import sys
from pathlib import Path
from typing import Sequence

import numpy as np

from . import bench as bm
from ._io import atomic_write_text
from .bounds import BoundInputs, bound_reports
from .field import (
    MaclaurinField,
    PreconditionError,
    SpecError,
    certify_decay,
    diagonal_decay_rate,
    drift_bound,
    eval_field,
    load_field,
)
from .indexing import indices_of_degree, monomial_eval
from .lifting import (
    assemble_finite_section,
    check_block_norms,
    lift_initial,
    structural_blocks,
    write_matrix_csv,
)
from .sim import (
    Trajectory,
    error_series,
    integrate_nonlinear,
    integrate_rhs,
    integrate_section,
    oracle_trajectory,
    time_grid,
    write_error_csv,
    write_trajectory_csv,
)

EXIT_INPUT, EXIT_PRECONDITION, EXIT_IO = 1, 2, 3
GENERATOR_CHECK_DEGREE = 50


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _fmt(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return str(v)


def _emit(out, key: str, value) -> None:
    out.write(f"{key}={_fmt(value)}\n")


# argument checks -----------------------------------------------------------


def _positive_int(s: str) -> int:
    try:
        v = int(s)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {s!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {s!r}")
    return v


def _finite(s: str) -> float:
    try:
        v = float(s)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a real number, got {s!r}") from None
    if not math.isfinite(v):
        raise argparse.ArgumentTypeError(f"expected a finite number, got {s!r}")
    return v


def _positive(s: str) -> float:
    v = _finite(s)
    if v <= 0:
        raise argparse.ArgumentTypeError(f"expected a positive number, got {s!r}")
    return v


def _out_path(p: str | None) -> Path | None:
    if p is None:
        return None
    path = Path(p)
    parent = path.parent if str(path.parent) else Path(".")
    if not parent.is_dir():
        raise OSError(f"output directory does not exist: {parent}")
    if not os.access(parent, os.W_OK):
        raise OSError(f"output directory is not writable: {parent}")
    return path


def _out_dir(p: str) -> Path:
    path = Path(p)
    if path.exists() and not path.is_dir():
        raise OSError(f"not a directory: {path}")
    path.mkdir(parents=True, exist_ok=True)
    if not os.access(path, os.W_OK):
        raise OSError(f"output directory is not writable: {path}")
    return path


def _add_system(p: argparse.ArgumentParser) -> None:
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--spec", help="YAML/JSON system description")
    g.add_argument("--bench", choices=["1d-stable", "1d-unstable", "vdp"], help="built-in benchmark")
    p.add_argument("--mu", type=_positive, default=0.5, help="Van der Pol damping (default 0.5)")


def _load_system(args) -> tuple[MaclaurinField, bm.Benchmark | None]:
    if args.spec is not None:
        try:
            return load_field(args.spec), None
        except FileNotFoundError as exc:
            raise OSError(f"cannot read {args.spec}: {exc.strerror}") from exc
    b = bm.get_benchmark(args.bench, args.mu)
    return b.field, b


def _x0(args, d: int) -> np.ndarray:
    x0 = np.asarray(args.x0, dtype=float)
    if x0.size != d:
        raise SpecError(f"--x0 needs {d} values, got {x0.size}")
    return x0


# commands -------------------------------------------------------------------


def cmd_lift(args, out) -> int:
    field, b = _load_system(args)
    path = _out_path(args.out)
    section = b.section(args.order) if b is not None and b.d == 1 else assemble_finite_section(field, args.order)
    if b is not None:
        section.field = field
    t = field.t0 if args.time is None else args.time
    if path is not None:
        write_matrix_csv(section, path, t)
        _emit(out, "dim", section.dim)
        _emit(out, "structure", section.structure)
        _emit(out, "out", str(path))
    else:
        M = section.matrix(t)
        out.write(",".join(section.block_labels()) + "\n")
        for row in M:
            out.write(",".join(f"{v:.17g}" for v in row) + "\n")
    return 0


def _constants(field: MaclaurinField, b, radius: float, degree: int | None):
    if b is not None and b.name != "vdp" and radius == b.radius:
        coef = b.coef_bound
    else:
        if field.is_generator:
            degree = degree or GENERATOR_CHECK_DEGREE
        coef = certify_decay(field, radius, degree=degree).coef_bound
    decay = diagonal_decay_rate(field)
    return coef, (decay.rate if decay.ok else None), drift_bound(field)


def cmd_bounds(args, out) -> int:
    field, b = _load_system(args)
    x0 = _x0(args, field.d)
    coef, mu, nu = _constants(field, b, args.radius, args.degree)
    if coef <= 0:
        raise PreconditionError("coefficient decay constant is zero; the field is trivial")
    inp = BoundInputs.from_state(x0, coef, args.radius, mu, nu, field.t0)
    if inp.x0_inf == 0:
        raise PreconditionError("initial state must be nonzero")
    _emit(out, "input.radius", inp.radius)
    _emit(out, "input.coef_bound", inp.coef_bound)
    _emit(out, "input.x0_inf", inp.x0_inf)
    _emit(out, "input.x0_two", inp.x0_two)
    _emit(out, "input.decay_rate", "none" if mu is None else mu)
    _emit(out, "input.drift", inp.drift)
    reports = bound_reports(inp, field if not field.is_generator else None, x0)
    any_valid = False
    for r in reports:
        any_valid |= r.valid
        _emit(out, f"{r.tag}.valid", r.valid)
        _emit(out, f"{r.tag}.horizon", r.horizon)
        for k in sorted(r.constants):
            _emit(out, f"{r.tag}.{k}", r.constants[k])
        if args.order is not None and r.envelope is not None:
            t = args.time if args.time is not None else (inp.t0 + r.horizon if math.isfinite(r.horizon) else inp.t0)
            env = r.envelope(args.order, t)
            _emit(out, f"{r.tag}.envelope", env.value)
            _emit(out, f"{r.tag}.envelope_valid", env.valid)
        if r.note:
            _emit(out, f"{r.tag}.note", r.note)
    if not any_valid:
        notes = "; ".join(f"{r.tag}: {r.note}" for r in reports if r.note)
        raise PreconditionError(f"no estimate applies ({notes})")
    return 0


def cmd_simulate(args, out) -> int:
    field, b = _load_system(args)
    x0 = _x0(args, field.d)
    outdir = _out_dir(args.out_dir)
    t0 = field.t0
    if args.t_final <= t0:
        raise SpecError(f"--t-final must exceed the initial time {t0}")
    section = b.section(args.order) if b is not None and b.d == 1 else assemble_finite_section(field, args.order)
    lifted = integrate_section(section, x0, args.t_final, args.step, t0=t0)
    if b is not None and b.oracle is not None and np.all(x0 > 0):
        ref = oracle_trajectory(b.params["sign"], float(x0[0]), time_grid(t0, args.t_final, args.step))
    elif b is not None:
        ref = integrate_rhs(b.rhs, x0, args.t_final, args.step, t0)
    else:
        ref = integrate_nonlinear(field, x0, args.t_final, args.step, t0=t0)
    write_trajectory_csv(lifted, outdir / "lifted.csv")
    write_trajectory_csv(ref, outdir / "reference.csv")
    n = min(lifted.times.size, ref.times.size)
    series = error_series(
        Trajectory(lifted.times[:n], lifted.states[:n], "lifted", lifted.d, lifted.order),
        Trajectory(ref.times[:n], ref.states[:n], ref.kind, ref.d),
    )
    write_error_csv(series, outdir / "error.csv")
    _emit(out, "order", args.order)
    _emit(out, "dim", section.dim)
    _emit(out, "steps", lifted.times.size - 1)
    _emit(out, "lifted.blowup", lifted.blew_up)
    if lifted.blew_up:
        _emit(out, "lifted.blowup_time", lifted.blowup_time)
    _emit(out, "reference.blowup", ref.blew_up)
    sup = math.inf if lifted.blew_up or ref.blew_up else float(np.max(series.raw))
    _emit(out, "sup_error", sup)
    _emit(out, "out_dir", str(outdir))
    return 0


def _axis(lo: float, hi: float, n: int) -> np.ndarray:
    if n == 1:
        return np.array([hi])
    return np.linspace(lo, hi, n)


def cmd_sweep(args, out) -> int:
    csv_path, svg_path = _out_path(args.out_csv), _out_path(args.out_svg)
    b = bm.get_benchmark(args.bench, args.mu)
    if b.d == 1:
        lo = 1.0 / args.x0_count if args.x0_min is None else args.x0_min
        if lo <= 0 or args.x0_max < lo:
            raise SpecError("x0 axis must satisfy 0 < x0-min <= x0-max")
        x0 = _axis(lo, args.x0_max, args.x0_count)
        Ns = bm.default_N_axis(args.N_count, args.N_max) if args.orders is None else sorted(set(args.orders))
        horizon = args.horizon
        grid = bm.sweep_x0_N(b, x0, Ns, horizon=horizon, h=args.step)
        emit = [("threshold", bm.convergence_threshold(grid, args.level))]
    else:
        lo = -6.0 if args.x0_min is None else args.x0_min
        hi = 6.0 if args.x0_max == 1.0 else args.x0_max
        axis = _axis(lo, hi, args.x0_count)
        T = 0.1 if args.horizon is None else args.horizon
        N = 10 if args.orders is None else args.orders[0]
        grid = bm.sweep_x0_v0(b, axis, axis, N, T, args.step)
        emit = [("converged_cells", int(np.sum(grid.values <= args.level)))]
    if csv_path is not None:
        bm.emit_csv(grid, csv_path)
    if svg_path is not None:
        bm.emit_svg_heatmap(grid, svg_path)
    _emit(out, "rows", grid.values.shape[0])
    _emit(out, "cols", grid.values.shape[1])
    for k, v in emit:
        _emit(out, k, v)
    return 0


def lifting_identity_residual(field: MaclaurinField, N: int, points: np.ndarray) -> float:
    """Largest relative mismatch between ``d/dt x^alpha`` and the lifted rows.

    Only degrees whose rows see every term of the field inside the section
    are compared, so the identity must hold exactly up to rounding.
    """
    section = assemble_finite_section(field, N)
    L = field.degree
    k_max = N - (L - 1) if L and L > 1 else N
    if field.is_generator or k_max < 1:
        return 0.0
    A = section.matrix(field.t0)
    b = section.forcing(field.t0)
    worst = 0.0
    for x in points:
        z = lift_initial(x, N).data
        rhs = A @ z + (0.0 if b is None else b)
        fx = eval_field(field, field.t0, x)
        for k in range(1, k_max + 1):
            sl = section.block_slice(k)
            for i, alpha in enumerate(indices_of_degree(field.d, k)):
                a = np.array(alpha)
                deriv = 0.0
                for j in range(field.d):
                    if a[j]:
                        e = a.copy()
                        e[j] -= 1
                        deriv += a[j] * monomial_eval(x, e) * fx[j]
                lhs = rhs[sl][i]
                scale = max(1.0, abs(deriv))
                worst = max(worst, abs(lhs - deriv) / scale)
    return worst


def cmd_verify(args, out) -> int:
    field, b = _load_system(args)
    degree = args.degree if field.is_generator else None
    if field.is_generator and degree is None:
        degree = GENERATOR_CHECK_DEGREE
    failures = []
    cert = certify_decay(field, args.radius, degree=degree)
    _emit(out, "decay.coef_bound", cert.coef_bound)
    _emit(out, "decay.checked_degree", cert.checked_degree)
    _emit(out, "decay.valid", cert.valid)
    if not cert.valid:
        failures.append(f"coefficient decay: {cert.note or 'ratio above 1'}")
    diag = diagonal_decay_rate(field)
    _emit(out, "linear_decay.holds", diag.ok)
    _emit(out, "linear_decay.rate", diag.rate if diag.ok else "none")
    if not diag.ok:
        _emit(out, "linear_decay.detail", diag.detail)
    _emit(out, "drift", drift_bound(field))

    K = args.order
    if cert.valid:
        rep = check_block_norms(field, args.radius, cert.coef_bound, K, K)
        _emit(out, "block_norms.checked", rep.checked)
        _emit(out, "block_norms.worst_ratio", rep.worst_ratio)
        _emit(out, "block_norms.violations", len(rep.violations))
        if rep.violations:
            k, l, n, bd = rep.violations[0]
            failures.append(f"block norm ({k},{l}) = {n:.6g} exceeds D k R^(k-l-1) = {bd:.6g}")

    section = assemble_finite_section(field, K)
    allowed = set(structural_blocks(field, K))
    present = set()
    degrees = {g for g in range(0, (field.degree if field.degree is not None else K) + 1) if field.terms_of_degree(g)}
    stray = []
    for k in range(1, K + 1):
        for l in range(1, K + 1):
            if np.any(section.block(k, l, field.t0)):
                present.add((k, l))
                if (k, l) not in allowed or (l - k + 1) not in degrees:
                    stray.append((k, l))
    _emit(out, "structure.nonzero_blocks", len(present))
    _emit(out, "structure.stray_blocks", len(stray))
    if stray:
        failures.append(f"nonzero block outside the structural pattern at {stray[0]}")

    if not field.is_generator:
        rng = np.random.default_rng(0)
        pts = rng.uniform(-0.5, 0.5, size=(4, field.d)) * args.radius
        res = lifting_identity_residual(field, K, pts)
        _emit(out, "lifting_identity.residual", res)
        if res > 1e-10:
            failures.append(f"lifted rows disagree with the monomial derivatives (residual {res:.3g})")

    _emit(out, "ok", not failures)
    if failures:
        for f in failures:
            _emit(out, "failure", f)
        return EXIT_PRECONDITION
    return 0


def cmd_bench(args, out) -> int:
    outdir = _out_dir(args.out_dir)
    res = args.resolution
    if args.figure == 1:
        grids = bm.figure_1(res, args.step)
    elif args.figure == 2:
        grids = bm.figure_2(res, args.step)
    else:
        grids = bm.figure_3(res, h=args.step)
    for name, grid in grids.items():
        bm.emit_csv(grid, outdir / f"figure{args.figure}_{name}.csv")
        bm.emit_svg_heatmap(grid, outdir / f"figure{args.figure}_{name}.svg")
        _emit(out, f"{name}.csv", str(outdir / f"figure{args.figure}_{name}.csv"))
    if args.figure == 2:
        rows = bm.threshold_report({T: grids[f"horizon_{T:g}"] for T in bm.THRESHOLD_HORIZONS}, args.level)
        text = bm.format_threshold_report(rows)
        atomic_write_text(outdir / "thresholds.csv", text)
        for r in rows:
            _emit(out, f"threshold.T={r.horizon:g}.theoretical", round(r.theoretical, 5))
            _emit(out, f"threshold.T={r.horizon:g}.reported_theoretical", r.reported_theoretical)
            _emit(out, f"threshold.T={r.horizon:g}.empirical", r.empirical)
            _emit(out, f"threshold.T={r.horizon:g}.reported_empirical", r.reported_empirical)
    return 0


# parser -----------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="carleman", description="Carleman linearization with certified error bounds.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    q = sub.add_parser("lift", help="dump the assembled finite-section matrix")
    _add_system(q)
    q.add_argument("--order", type=_positive_int, required=True, help="truncation order N")
    q.add_argument("--time", type=_finite, default=None, help="evaluation time (default t0)")
    q.add_argument("--out", default=None, help="CSV path (default: stdout)")
    q.set_defaults(func=cmd_lift)

    q = sub.add_parser("bounds", help="report every applicable error estimate")
    _add_system(q)
    q.add_argument("--x0", type=_finite, nargs="+", required=True, help="initial state")
    q.add_argument("--radius", type=_positive, default=1.0, help="decay radius R (default 1)")
    q.add_argument("--order", type=_positive_int, default=None, help="also evaluate envelopes at this N")
    q.add_argument("--time", type=_finite, default=None, help="time for envelope evaluation (default: horizon end)")
    q.add_argument("--degree", type=_positive_int, default=None, help="degree checked for generator fields")
    q.set_defaults(func=cmd_bounds)

    q = sub.add_parser("simulate", help="integrate the lifted and the nonlinear system")
    _add_system(q)
    q.add_argument("--x0", type=_finite, nargs="+", required=True)
    q.add_argument("--order", type=_positive_int, required=True)
    q.add_argument("--t-final", type=_finite, required=True)
    q.add_argument("--step", type=_positive, default=1e-3)
    q.add_argument("--out-dir", required=True, help="directory for lifted.csv, reference.csv, error.csv")
    q.set_defaults(func=cmd_simulate)

    q = sub.add_parser("sweep", help="clipped-log error map of a benchmark")
    q.add_argument("--bench", choices=["1d-stable", "1d-unstable", "vdp"], required=True)
    q.add_argument("--mu", type=_positive, default=0.5)
    q.add_argument("--x0-min", type=_finite, default=None, help="lower end of the initial-value axis")
    q.add_argument("--x0-max", type=_finite, default=1.0, help="upper end (vdp default 6)")
    q.add_argument("--x0-count", type=_positive_int, default=100)
    q.add_argument("--N-max", type=_positive_int, default=100)
    q.add_argument("--N-count", type=_positive_int, default=100)
    q.add_argument("--orders", type=_positive_int, nargs="+", default=None, help="explicit orders (vdp: first one)")
    q.add_argument("--horizon", type=_positive, default=None, help="fixed horizon (default: benchmark rule)")
    q.add_argument("--step", type=_positive, default=1e-3)
    q.add_argument("--level", type=_finite, default=bm.CONVERGENCE_LEVEL, help="convergence level in log10")
    q.add_argument("--out-csv", required=True)
    q.add_argument("--out-svg", default=None)
    q.set_defaults(func=cmd_sweep)

    q = sub.add_parser("verify", help="check decay certificate, block norms and structure")
    _add_system(q)
    q.add_argument("--radius", type=_positive, default=1.0)
    q.add_argument("--order", type=_positive_int, default=12, help="largest block degree checked")
    q.add_argument("--degree", type=_positive_int, default=None, help="degree checked for generator fields")
    q.set_defaults(func=cmd_verify)

    q = sub.add_parser("bench", help="reproduce the data behind a benchmark figure")
    q.add_argument("--figure", type=int, choices=[1, 2, 3], required=True)
    q.add_argument("--out-dir", required=True)
    q.add_argument("--resolution", type=_positive_int, default=100)
    q.add_argument("--step", type=_positive, default=1e-3)
    q.add_argument("--level", type=_finite, default=bm.CONVERGENCE_LEVEL)
    q.set_defaults(func=cmd_bench)
    return p


def main(argv: Sequence[str] | None = None, out=None) -> int:
    out = sys.stdout if out is None else out
    try:
        args = build_parser().parse_args(argv)
        return args.func(args, out)
    except UsageError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_INPUT
    except SpecError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_INPUT
    except PreconditionError as exc:
        sys.stderr.write(f"precondition violated: {exc}\n")
        return EXIT_PRECONDITION
    except OSError as exc:
        sys.stderr.write(f"I/O error: {exc}\n")
        return EXIT_IO
    except ValueError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
