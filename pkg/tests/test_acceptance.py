"""Acceptance criteria 1-10.

Each criterion is a function returning ``(ok, detail)``; the pytest wrappers
print one ``PASS``/``FAIL`` line per criterion and then assert.  Running the
module directly prints the same lines without pytest::

    python3 tests/test_acceptance.py
"""

from __future__ import annotations

import io
import math
import sys
import time

import numpy as np
import pytest

from carleman.bench import (
    REPORTED_EMPIRICAL,
    THRESHOLD_HORIZONS,
    benchmark_1d,
    benchmark_vdp,
    convergence_threshold,
    default_N_axis,
    default_x0_axis,
    format_threshold_report,
    sweep_x0_N,
    threshold_report,
    vdp_cubic_block,
    vdp_diagonal_block,
)
from carleman.bounds import (
    BoundInputs,
    convergence_horizon,
    drift_admissibility,
    drift_envelope,
    drift_parameters,
    global_envelope,
    local_envelope,
)
from carleman.cli import main as cli_main
from carleman.field import linear_field
from carleman.indexing import indices_of_degree
from carleman.lifting import assemble_finite_section, build_block, check_block_norms, lift_initial
from carleman.sim import (
    integrate_nonlinear,
    integrate_rhs,
    integrate_section,
    oracle_1d,
    oracle_trajectory,
    sup_error,
)

LOG10_LEVEL = -12.0
# The same level read as a natural logarithm, converted to log10 (diagnostic only).
NATURAL_LOG_LEVEL = LOG10_LEVEL / math.log(10.0)


def _timed(fn):
    start = time.perf_counter()
    ok, detail = fn()
    return ok, detail, time.perf_counter() - start


def _line(number: int, ok: bool, detail: str, seconds: float) -> str:
    return f"criterion {number:>2}: {'PASS' if ok else 'FAIL'}  {detail}  [{seconds:.2f} s]"


# criteria -----------------------------------------------------------------


def criterion_1():
    buf = io.StringIO()
    code = cli_main(["lift", "--bench", "1d-unstable", "--order", "5"], buf)
    rows = buf.getvalue().strip().splitlines()[1:]
    got = np.array([[float(v) for v in r.split(",")] for r in rows])
    want = np.array(
        [[1, 0, -1, 0, 1], [0, 2, 0, -2, 0], [0, 0, 3, 0, -3], [0, 0, 0, 4, 0], [0, 0, 0, 0, 5]], dtype=float
    )
    ok = code == 0 and got.shape == want.shape and np.array_equal(got, want)
    return ok, "unstable 1D lift at N=5 is entry-exact" if ok else f"lift output differs:\n{got}"


def criterion_2():
    mu, N = 0.5, 6
    field = benchmark_vdp(mu).field
    bad = []
    for k in range(1, N + 1):
        for l in range(1, N + 1):
            blk = build_block(field, k, l).entries
            if l == k:
                match = np.array_equal(blk, vdp_diagonal_block(k, mu))
            elif l == k + 2:
                match = np.array_equal(blk, vdp_cubic_block(k, mu))
            else:
                match = not blk.any()
            if not match:
                bad.append((k, l))
    sec = assemble_finite_section(field, N)
    ok = not bad and sorted(sec.nonzero_blocks) == sorted(
        [(k, k) for k in range(1, N + 1)] + [(k, k + 2) for k in range(1, N - 1)]
    )
    return ok, "Van der Pol blocks only at (k,k),(k,k+2) and equal closed forms" if ok else f"mismatched blocks {bad}"


def _step_ratio_ok(errors, ratio, floor=1e-13):
    """Errors shrink by ``ratio`` per order, checked over two-order steps.

    The 1D benchmark has only odd-degree terms, so orders ``2m-1`` and
    ``2m`` produce the same first component; the decay shows up every two
    orders.  Pairs already at the integrator's noise floor are skipped.
    """
    worst = 0.0
    for n in range(len(errors) - 2):
        if errors[n + 2] > floor:
            worst = max(worst, math.sqrt(errors[n + 2] / errors[n]))
    return worst <= ratio, worst


def criterion_3():
    bench = benchmark_1d(-1)
    details, ok = [], True
    for x0 in (0.1, 0.25, 0.4):
        inp = BoundInputs.from_state([x0], 1.0, 1.0, 1.0)
        errors = []
        for N in range(1, 16):
            tr = integrate_section(bench.section(N), [x0], 10.0)
            errors.append(sup_error(tr, oracle_trajectory(-1, x0, tr.times)))
        envs = [global_envelope(inp, N) for N in range(1, 16)]
        dominated = all(e.valid and err <= 1.05 * e.value for err, e in zip(errors, envs))
        geometric, worst = _step_ratio_ok(errors, 2 * x0 + 0.05)
        monotone = all(b <= a * (1 + 1e-6) + 1e-14 for a, b in zip(errors, errors[1:]))
        ok &= dominated and geometric and monotone
        worst_env = max(err / e.value for err, e in zip(errors, envs))
        details.append(f"x0={x0}: err/env<={worst_env:.3f} rate={worst:.3f}<={2 * x0 + 0.05:.2f}")
    return ok, "stable 1D under time-uniform envelope; " + "; ".join(details)


def criterion_4():
    bench = benchmark_1d(1)
    x0 = 0.2
    inp = BoundInputs.from_state([x0], 1.0, 1.0)
    T = convergence_horizon(inp)
    worst = 0.0
    ok = True
    for N in range(1, 21):
        tr = integrate_section(bench.section(N), [x0], T)
        err = np.abs(tr.states[:, 0] - oracle_trajectory(1, x0, tr.times).states[:, 0])
        env = np.array([local_envelope(inp, N, t).value for t in tr.times])
        valid = all(local_envelope(inp, N, t).valid for t in (tr.times[0], tr.times[-1]))
        ok &= valid and bool(np.all(err <= 1.05 * env)) and err.max() <= 1.05 * env[-1]
        worst = max(worst, float(np.max(err / env)))
    return ok, f"unstable 1D x0=0.2 on [0, {T:.6f}] under local envelope, max err/env={worst:.3g}"


def criterion_5():
    rows = threshold_report()
    targets = ("0.35850", "0.28416", "0.02782")
    # Five decimals read as truncation: the middle value is 0.2841657...
    got = [f"{math.floor(r.theoretical * 1e5) / 1e5:.5f}" for r in rows]
    matches = got == list(targets)
    at_tenth = next(r for r in rows if r.horizon == 0.1)
    close = abs(at_tenth.theoretical - at_tenth.reported_theoretical) <= 5e-4
    report = format_threshold_report(rows)
    ok = matches and close and len(report.splitlines()) == len(rows) + 1
    detail = (
        f"thresholds {' / '.join(f'{r.theoretical:.7f}' for r in rows)}; "
        f"T=0.1 differs from reported by {abs(at_tenth.theoretical - at_tenth.reported_theoretical):.2e}; "
        "reported values at T=0.01 / 1.0 differ by "
        + " / ".join(f"{r.theoretical - r.reported_theoretical:+.5f}" for r in rows if r.horizon != 0.1)
    )
    return ok, detail


def _threshold_sweep(resolution: int):
    bench = benchmark_1d(1)
    x0, Ns = default_x0_axis(resolution), default_N_axis(resolution)
    return {T: sweep_x0_N(bench, x0, Ns, horizon=T) for T in THRESHOLD_HORIZONS}


def _criterion_6(resolution: int, tol: float, budget: float):
    start = time.perf_counter()
    grids = _threshold_sweep(resolution)
    elapsed = time.perf_counter() - start
    got = [convergence_threshold(grids[T], LOG10_LEVEL) for T in THRESHOLD_HORIZONS]
    alt = [convergence_threshold(grids[T], NATURAL_LOG_LEVEL) for T in THRESHOLD_HORIZONS]
    diffs = [g - r for g, r in zip(got, REPORTED_EMPIRICAL)]
    ok = all(abs(d) <= tol for d in diffs) and elapsed < budget
    detail = (
        f"{resolution}x{resolution} grid: thresholds {' / '.join(f'{g:.4f}' for g in got)} "
        f"vs reported {' / '.join(f'{r:.4f}' for r in REPORTED_EMPIRICAL)} "
        f"(diff {' / '.join(f'{d:+.4f}' for d in diffs)}, tol {tol}); "
        f"diagnostic with the level read as ln e <= -12: {' / '.join(f'{a:.4f}' for a in alt)}; "
        f"sweep {elapsed:.1f} s of {budget:.0f} s"
    )
    return ok, detail


def criterion_6_default():
    return _criterion_6(100, 0.03, 600.0)


def criterion_6_coarse():
    return _criterion_6(25, 0.05, 60.0)


def criterion_7():
    rng = np.random.default_rng(20240607)
    worst_rel, worst_res = 0.0, 0.0
    for _ in range(100):
        D = rng.uniform(0.1, 5.0)
        R = rng.uniform(0.1, 5.0)
        mu = rng.uniform(0.05, 5.0)
        N = int(rng.integers(1, 40))
        eta1 = R * mu / D
        # Without drift the rate root is eta1 / (1 + eta1).
        x0 = rng.uniform(0.01, 0.99) * R * eta1 / (1 + eta1)
        inp = BoundInputs(D, R, x0, x0, mu, 0.0)
        a = drift_envelope(inp, drift_parameters(inp), N)
        b = global_envelope(inp, N)
        worst_rel = max(worst_rel, abs(a.value - b.value) / abs(b.value))
        drift = rng.uniform(0.0, 1.0) * drift_admissibility(eta1) * D
        params = drift_parameters(BoundInputs(D, R, x0, x0, mu, drift))
        scale = max(1.0, params.eta_drift + params.eta_decay)
        worst_res = max(worst_res, max(abs(r) for r in params.residuals()) / scale)
    ok = worst_rel <= 1e-12 and worst_res <= 1e-12
    return ok, f"drift envelope at zero drift vs time-uniform envelope rel={worst_rel:.2e}; quadratic residual={worst_res:.2e}"


def criterion_8():
    details, ok = [], True
    for bench in (benchmark_1d(1), benchmark_1d(-1), benchmark_vdp(0.5)):
        rep = check_block_norms(bench.field, bench.radius, bench.coef_bound, 12, 12)
        ok &= rep.ok
        details.append(f"{bench.name}: {len(rep.violations)} violations, worst ratio {rep.worst_ratio:.3f}")
    return ok, "Schur norms of blocks k,l<=12; " + "; ".join(details)


def _monomial(x, alpha):
    return float(np.prod(np.asarray(x) ** np.asarray(alpha)))


def criterion_9():
    bench = benchmark_vdp(0.5)
    N, h_fd = 6, 1e-5
    sec = assemble_finite_section(bench.field, N)
    A = sec.matrix()
    traj = integrate_rhs(bench.rhs, [0.8, -0.4], 0.3, h_fd)
    worst = 0.0
    for i in (5000, 15000, 25000):
        xm, x, xp = traj.states[i - 1], traj.states[i], traj.states[i + 1]
        lifted = A @ lift_initial(x, N).data
        for k in range(1, 5):
            rows = lifted[sec.block_slice(k)]
            for r, alpha in enumerate(indices_of_degree(2, k)):
                fd = (_monomial(xp, alpha) - _monomial(xm, alpha)) / (2 * h_fd)
                worst = max(worst, abs(fd - rows[r]) / max(1.0, abs(rows[r])))
    return worst <= 1e-4, f"Van der Pol lifted rows vs central differences, |alpha|<=4: max rel err {worst:.2e}"


def criterion_10():
    f = linear_field(np.diag([-1.0, -2.0]))
    x0 = [0.7, -0.4]
    ref = integrate_nonlinear(f, x0, 5.0)
    errs = [sup_error(integrate_section(assemble_finite_section(f, N), x0, 5.0), ref) for N in (1, 3, 7)]
    bench = benchmark_1d(-1)
    exact = oracle_1d(-1, 0.5, 1.0)
    e1 = abs(integrate_rhs(bench.rhs, [0.5], 1.0, 0.1).states[-1, 0] - exact)
    e2 = abs(integrate_rhs(bench.rhs, [0.5], 1.0, 0.05).states[-1, 0] - exact)
    ratio = float(e1 / e2)
    ok = max(errs) <= 1e-8 and 12 <= ratio <= 20
    return ok, f"diagonal linear sup errors {' / '.join(f'{e:.1e}' for e in errs)}; step-halving ratio {ratio:.2f}"


CRITERIA = [
    (1, criterion_1, 1.0),
    (2, criterion_2, 1.0),
    (3, criterion_3, 30.0),
    (4, criterion_4, 30.0),
    (5, criterion_5, None),
    (6, criterion_6_coarse, None),
    (6, criterion_6_default, None),
    (7, criterion_7, None),
    (8, criterion_8, 5.0),
    (9, criterion_9, 10.0),
    (10, criterion_10, 5.0),
]


@pytest.mark.parametrize(
    "number,fn,budget", CRITERIA, ids=[f"criterion_{n}_{fn.__name__.split('_', 2)[-1]}" for n, fn, _ in CRITERIA]
)
def test_criterion(number, fn, budget, capsys):
    ok, detail, seconds = _timed(fn)
    if budget is not None and seconds >= budget:
        ok, detail = False, f"{detail}; over the {budget:g} s budget"
    with capsys.disabled():
        print("\n" + _line(number, ok, detail, seconds))
    assert ok, detail


if __name__ == "__main__":
    failed = 0
    for number, fn, budget in CRITERIA:
        ok, detail, seconds = _timed(fn)
        if budget is not None and seconds >= budget:
            ok, detail = False, f"{detail}; over the {budget:g} s budget"
        failed += not ok
        print(_line(number, ok, detail, seconds), flush=True)
    sys.exit(1 if failed else 0)
