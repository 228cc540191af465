"""Benchmark systems and error sweeps with CSV/SVG output.

Two families are built in:

* ``x' = +-x / (1 + x^2)`` on ``x > 0``, an analytic field with infinitely many
  Maclaurin terms and an exact implicit solution;
* the Van der Pol oscillator ``x'' - mu (1 - x^2) x' + x = 0`` written as a
  cubic system in ``(x, v)``.

A sweep integrates the finite section for every cell of a grid and stores
the clipped ``log10`` of the sup-norm error against a reference.  Cells are
computed independently and written back by index, so running them on
several threads (``CARLEMAN_WORKERS``) does not change the result.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field as dc_field
from typing import Callable, Sequence

import numpy as np

from ._io import atomic_write_text
from .bounds import SPLIT
from .field import ConstantCoefficient, MaclaurinField, polynomial_field
from .lifting import FiniteSection, assemble_finite_section, lift_initial
from .sim import (
    BLOWUP_GUARD,
    DEFAULT_STEP,
    REFERENCE_STEP,
    _run_rhs,
    clipped_log,
    oracle_1d,
    rk4_step_matrix,
    time_grid,
)

WORKERS_ENV = "CARLEMAN_WORKERS"
CONVERGENCE_LEVEL = -12.0

# Thresholds reported for the unstable 1D benchmark; used only for comparison.
THRESHOLD_HORIZONS = (0.01, 0.1, 1.0)
REPORTED_THEORETICAL = (0.3582, 0.2841, 0.0401)
REPORTED_EMPIRICAL = (0.8423, 0.6722, 0.2348)


@dataclass(frozen=True)
class HorizonRule:
    """Integration horizon as a function of the initial value."""

    name: str
    func: Callable[[float], float]

    def __call__(self, x0: float) -> float:
        return float(self.func(x0))

    @classmethod
    def fixed(cls, T: float) -> "HorizonRule":
        return cls(f"fixed:{T!r}", lambda x0: T)


def unstable_horizon(x0: float) -> float:
    """Plotting horizon for the unstable 1D benchmark, never below 0.1."""
    return max(SPLIT * (math.log(1.0 / abs(x0)) - 1.0), 0.1)


@dataclass
class Benchmark:
    """A built-in test system.

    ``oracle(x0, times)`` returns exact states with shape ``(len(times), d)``;
    ``rhs(t, Y)`` is a fast batched evaluation of the untruncated field used
    for reference integrations.
    """

    name: str
    field: MaclaurinField
    radius: float
    coef_bound: float
    decay_rate: float | None
    horizon: HorizonRule
    section: Callable[[int], FiniteSection]
    rhs: Callable[[float, np.ndarray], np.ndarray]
    oracle: Callable[[float, np.ndarray], np.ndarray] | None = None
    params: dict = dc_field(default_factory=dict)

    @property
    def d(self) -> int:
        return self.field.d


# 1D benchmark ---------------------------------------------------------------


def _odd_series(sign: int) -> Callable[[int], dict]:
    def generator(k: int) -> dict:
        if k % 2 == 0:
            return {}
        n = (k - 1) // 2
        return {(k,): ConstantCoefficient([sign * (-1.0) ** n])}

    return generator


def section_1d(sign: int, N: int) -> np.ndarray:
    """Finite-section matrix of ``+-x/(1+x^2)`` from its closed-form pattern.

    Row ``k`` holds ``+-k (-1)^((l-k)/2)`` in columns ``l >= k`` with ``l - k``
    even and zeros elsewhere.
    """
    M = np.zeros((N, N))
    for k in range(1, N + 1):
        for l in range(k, N + 1, 2):
            M[k - 1, l - 1] = sign * k * (-1.0) ** ((l - k) // 2)
    return M


def benchmark_1d(sign: int) -> Benchmark:
    """``x' = sign * x / (1 + x^2)``; ``sign=-1`` is stable, ``+1`` unstable."""
    if sign not in (1, -1):
        raise ValueError(f"sign must be +1 or -1, got {sign}")
    name = "1d-stable" if sign < 0 else "1d-unstable"
    field = MaclaurinField(1, generator=_odd_series(sign), name=name)
    if sign < 0:
        horizon = HorizonRule.fixed(10.0)
    else:
        horizon = HorizonRule("max(split*(ln(1/x0)-1),0.1)", unstable_horizon)

    def section(N: int) -> FiniteSection:
        return FiniteSection.from_matrix(section_1d(sign, N), 1, N, label=name)

    def rhs(t, Y):
        return sign * Y / (1.0 + Y * Y)

    def oracle(x0, times):
        return oracle_1d(sign, float(np.asarray(x0).reshape(-1)[0]), times)[:, None]

    return Benchmark(
        name, field, radius=1.0, coef_bound=1.0, decay_rate=1.0 if sign < 0 else None,
        horizon=horizon, section=section, rhs=rhs, oracle=oracle, params={"sign": sign},
    )


# Van der Pol ----------------------------------------------------------------


def vdp_field(mu: float) -> MaclaurinField:
    return polynomial_field(
        2, [((1, 0), [0.0, -1.0]), ((0, 1), [1.0, mu]), ((2, 1), [0.0, -mu])], name=f"vdp(mu={mu!r})"
    )


def vdp_coef_bound(mu: float, radius: float) -> float:
    return max((2.0 + mu) * radius, mu * radius**3)


def vdp_diagonal_block(k: int, mu: float) -> np.ndarray:
    """Closed form of the degree-``k`` to degree-``k`` block.

    With monomials ``x^(k-i) v^i`` ordered by ``i``, row ``i`` has ``k - i``
    on the superdiagonal, ``i mu`` on the diagonal and ``-i`` on the
    subdiagonal.
    """
    B = np.zeros((k + 1, k + 1))
    for i in range(k + 1):
        B[i, i] = i * mu
        if i < k:
            B[i, i + 1] = k - i
        if i > 0:
            B[i, i - 1] = -i
    return B


def vdp_cubic_block(k: int, mu: float) -> np.ndarray:
    """Closed form of the degree-``k`` to degree-``k+2`` block: ``-i mu`` at ``(i, i)``."""
    B = np.zeros((k + 1, k + 3))
    for i in range(k + 1):
        B[i, i] = -i * mu
    return B


def benchmark_vdp(mu: float) -> Benchmark:
    """Van der Pol oscillator as ``x' = v``, ``v' = -x + mu v - mu x^2 v``."""
    if not mu > 0:
        raise ValueError(f"mu must be positive, got {mu}")
    field = vdp_field(mu)

    def rhs(t, Y):
        x, v = Y[..., 0], Y[..., 1]
        return np.stack([v, -x + mu * v - mu * x * x * v], axis=-1)

    return Benchmark(
        "vdp", field, radius=1.0, coef_bound=vdp_coef_bound(mu, 1.0), decay_rate=None,
        horizon=HorizonRule.fixed(0.1), section=lambda N: assemble_finite_section(field, N),
        rhs=rhs, params={"mu": mu},
    )


def get_benchmark(name: str, mu: float = 0.5) -> Benchmark:
    if name == "1d-stable":
        return benchmark_1d(-1)
    if name == "1d-unstable":
        return benchmark_1d(1)
    if name == "vdp":
        return benchmark_vdp(mu)
    raise ValueError(f"unknown benchmark {name!r}")


# batched lifted integration -------------------------------------------------


def _grid_length(T: float, h: float) -> int:
    return len(time_grid(0.0, T, h))


def lifted_paths(
    A: np.ndarray,
    Z0: np.ndarray,
    horizons: Sequence[float],
    h: float,
    d: int,
    guard: float = BLOWUP_GUARD,
) -> tuple[list[np.ndarray], np.ndarray]:
    """First-block paths of ``z' = A z`` for a batch with individual horizons.

    Member ``b`` is sampled on ``time_grid(0, horizons[b], h)``, the grid a
    single-trajectory run would use: shared full steps of size ``h`` and a
    shortened last step computed per member.  Returns the per-member paths
    (``(n_b, d)`` arrays) and a blow-up mask.
    """
    horizons = np.asarray(horizons, dtype=float)
    B = Z0.shape[0]
    lengths = np.array([_grid_length(T, h) for T in horizons])
    last_full = lengths - 2  # grid index where the final (possibly short) step starts
    n_shared = int(lengths.max()) - 1
    S = rk4_step_matrix(A, h).T
    rec = np.empty((n_shared, B, d))
    starts = np.empty_like(Z0)
    bad = np.zeros(B, dtype=bool)
    Z = Z0.copy()
    for i in range(n_shared):
        rec[i] = Z[:, :d]
        hit = last_full == i
        if np.any(hit):
            starts[hit] = Z[hit]
        if i + 1 < n_shared:
            with np.errstate(all="ignore"):
                Z = Z @ S
    finals = np.empty((B, d))
    for b in range(B):
        if lengths[b] == 1:
            finals[b] = Z0[b, :d]
            continue
        t_start = h * last_full[b]
        hh = horizons[b] - t_start
        with np.errstate(all="ignore"):
            finals[b] = (rk4_step_matrix(A, hh) @ starts[b])[:d]
    paths = []
    for b in range(B):
        n_b = lengths[b]
        path = np.concatenate([rec[: n_b - 1, b], finals[b][None]], axis=0) if n_b > 1 else finals[b][None]
        with np.errstate(invalid="ignore"):
            bad[b] = not np.all(np.isfinite(path)) or float(np.max(np.abs(path))) > guard
        paths.append(path)
    return paths, bad


def _cell_errors(paths, bad, refs) -> np.ndarray:
    out = np.empty(len(paths))
    for b, (p, r) in enumerate(zip(paths, refs)):
        if bad[b] or r is None:
            out[b] = math.inf
        else:
            out[b] = float(np.max(np.abs(p - r)))
    return out


# sweeps -------------------------------------------------------------------


@dataclass
class SweepGrid:
    """Clipped-log errors on a rectangular grid.

    ``values[i, j]`` belongs to ``row_values[i]`` and ``col_values[j]``.
    """

    row_label: str
    row_values: np.ndarray
    col_label: str
    col_values: np.ndarray
    values: np.ndarray
    metadata: dict = dc_field(default_factory=dict)

    def __post_init__(self):
        self.row_values = np.asarray(self.row_values, dtype=float)
        self.col_values = np.asarray(self.col_values, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (self.row_values.size, self.col_values.size):
            raise ValueError(
                f"values shape {self.values.shape} does not match axes "
                f"({self.row_values.size}, {self.col_values.size})"
            )


def worker_count() -> int:
    raw = os.environ.get(WORKERS_ENV, "1")
    try:
        n = int(raw)
    except ValueError:
        raise ValueError(f"{WORKERS_ENV} must be an integer, got {raw!r}") from None
    return max(1, n)


def _map(func, items, workers: int | None):
    workers = worker_count() if workers is None else max(1, workers)
    if workers == 1:
        return [func(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(func, items))


def _as_rule(horizon) -> HorizonRule:
    if isinstance(horizon, HorizonRule):
        return horizon
    if callable(horizon):
        return HorizonRule(getattr(horizon, "__name__", "custom"), horizon)
    return HorizonRule.fixed(float(horizon))


def sweep_x0_N(
    bench: Benchmark,
    x0_axis: Sequence[float],
    N_axis: Sequence[int],
    horizon=None,
    h: float = DEFAULT_STEP,
    workers: int | None = None,
) -> SweepGrid:
    """Sup error over ``[0, T(x0)]`` for every ``(x0, N)`` of a scalar benchmark.

    ``horizon`` is a number, a callable of ``x0`` or a :class:`HorizonRule`
    (default: the benchmark's own rule).  Non-positive ``x0`` cells, where
    the exact solution is undefined, are stored at the clip ceiling.
    """
    if bench.d != 1 or bench.oracle is None:
        raise ValueError("sweep_x0_N needs a scalar benchmark with an exact solution")
    x0_axis = np.asarray(x0_axis, dtype=float)
    N_axis = [int(n) for n in N_axis]
    if x0_axis.size == 0 or not N_axis:
        raise ValueError("sweep axes must be non-empty")
    rule = bench.horizon if horizon is None else _as_rule(horizon)
    usable = x0_axis > 0
    horizons = np.array([rule(x) if ok else 0.0 for x, ok in zip(x0_axis, usable)])
    refs = [
        bench.oracle(x, time_grid(0.0, T, h)) if ok else None
        for x, T, ok in zip(x0_axis, horizons, usable)
    ]

    def column(N: int) -> np.ndarray:
        A = bench.section(N).matrix()
        Z0 = lift_initial(x0_axis[:, None], N).data
        paths, bad = lifted_paths(A, Z0, horizons, h, 1)
        return clipped_log(_cell_errors(paths, bad, refs))

    cols = _map(column, N_axis, workers)
    values = np.stack(cols, axis=1)
    meta = {"benchmark": bench.name, "horizon_rule": rule.name, "h": h, "metric": "clipped_log10_sup_error"}
    return SweepGrid("x0", x0_axis, "N", np.array(N_axis, dtype=float), values, meta)


def sweep_t_N(
    bench: Benchmark,
    x0: float,
    t_axis: Sequence[float],
    N_axis: Sequence[int],
    h: float = DEFAULT_STEP,
    workers: int | None = None,
) -> SweepGrid:
    """Pointwise error ``|y_1(t) - x(t)|`` at the times of ``t_axis`` (rows) for each ``N``.

    ``t_axis`` must lie on the step grid ``i * h``.
    """
    if bench.d != 1 or bench.oracle is None:
        raise ValueError("sweep_t_N needs a scalar benchmark with an exact solution")
    t_axis = np.asarray(t_axis, dtype=float)
    if t_axis.size == 0 or len(N_axis) == 0:
        raise ValueError("sweep axes must be non-empty")
    T = float(t_axis.max())
    grid = time_grid(0.0, T, h)
    idx = np.rint(t_axis / h).astype(int)
    if np.any(np.abs(grid[np.minimum(idx, grid.size - 1)] - t_axis) > 1e-9 * max(T, 1.0)):
        raise ValueError("t_axis values must be multiples of the step")
    ref = bench.oracle(x0, grid)[idx, 0]

    def column(N: int) -> np.ndarray:
        A = bench.section(int(N)).matrix()
        Z0 = lift_initial(np.array([[x0]]), int(N)).data
        paths, bad = lifted_paths(A, Z0, [T], h, 1)
        if bad[0]:
            # keep the samples before the blow-up; later ones sit at the ceiling
            path = paths[0][:, 0]
            err = np.abs(path[idx] - ref)
            return clipped_log(np.where(np.isfinite(err) & (np.abs(path[idx]) <= BLOWUP_GUARD), err, np.inf))
        return clipped_log(np.abs(paths[0][idx, 0] - ref))

    cols = _map(column, list(N_axis), workers)
    meta = {"benchmark": bench.name, "x0": x0, "h": h, "metric": "clipped_log10_pointwise_error"}
    return SweepGrid("t", t_axis, "N", np.array(N_axis, dtype=float), np.stack(cols, axis=1), meta)


def vdp_reference(bench: Benchmark, X0: np.ndarray, T: float, h: float, h_ref: float = REFERENCE_STEP):
    """Fine-step RK4 solutions sampled on ``time_grid(0, T, h)``.

    Returns ``(n, batch, 2)`` states and a blow-up mask.
    """
    ratio = h / h_ref
    every = int(round(ratio))
    if abs(ratio - every) > 1e-9 * ratio or every < 1:
        raise ValueError(f"coarse step {h} must be an integer multiple of the reference step {h_ref}")
    coarse = time_grid(0.0, T, h)
    fine = time_grid(0.0, T, h_ref)
    rec, blow = _run_rhs(bench.rhs, np.asarray(X0, dtype=float), fine, BLOWUP_GUARD, bench.d, every)
    states = np.full((coarse.size, X0.shape[0], bench.d), np.nan)
    states[: len(rec)] = np.stack(rec)
    if len(rec) == coarse.size:
        rec_times = fine[np.r_[0 : fine.size : every]]
        if rec_times[-1] != fine[-1]:
            rec_times = np.append(rec_times, fine[-1])
        if not np.allclose(rec_times, coarse, rtol=0, atol=1e-12 * max(T, 1.0)):
            raise ValueError("reference and coarse grids do not line up")
    return states, blow >= 0


def sweep_x0_v0(
    bench: Benchmark,
    x0_axis: Sequence[float],
    v0_axis: Sequence[float],
    N: int,
    T: float = 0.1,
    h: float = DEFAULT_STEP,
    h_ref: float = REFERENCE_STEP,
    reference=None,
) -> SweepGrid:
    """Sup error of ``[x, v]`` over ``[0, T]`` for every initial ``(x0, v0)``.

    Rows follow ``v0``, columns ``x0``.  ``reference`` may carry a
    precomputed :func:`vdp_reference` result for the same grid so several
    truncation orders can share it.
    """
    x0_axis = np.asarray(x0_axis, dtype=float)
    v0_axis = np.asarray(v0_axis, dtype=float)
    if x0_axis.size == 0 or v0_axis.size == 0:
        raise ValueError("sweep axes must be non-empty")
    XX, VV = np.meshgrid(x0_axis, v0_axis)
    X0 = np.stack([XX.ravel(), VV.ravel()], axis=1)
    if reference is None:
        reference = vdp_reference(bench, X0, T, h, h_ref)
    ref, ref_bad = reference
    A = bench.section(N).matrix()
    Z0 = lift_initial(X0, N).data
    paths, bad = lifted_paths(A, Z0, np.full(X0.shape[0], T), h, 2)
    Y = np.stack(paths, axis=1)  # (n, batch, 2)
    with np.errstate(invalid="ignore"):
        err = np.max(np.abs(Y - ref), axis=(0, 2))
    err = np.where(bad | ref_bad | ~np.isfinite(err), np.inf, err)
    values = clipped_log(err).reshape(VV.shape)
    meta = {"benchmark": bench.name, "N": N, "T": T, "h": h, "h_ref": h_ref, **bench.params}
    return SweepGrid("v0", v0_axis, "x0", x0_axis, values, meta)


def convergence_threshold(grid: SweepGrid, level: float = CONVERGENCE_LEVEL, column: float | None = None) -> float:
    """Largest row value whose entry in ``column`` (default: last) is at most ``level``.

    Returns ``nan`` when no cell qualifies.
    """
    j = grid.col_values.size - 1 if column is None else int(np.flatnonzero(grid.col_values == column)[0])
    ok = grid.values[:, j] <= level
    return float(grid.row_values[ok].max()) if np.any(ok) else math.nan


# output -------------------------------------------------------------------


def _fmt(v: float) -> str:
    return f"{v:.17g}"


def grid_to_csv(grid: SweepGrid) -> str:
    lines = [f"# {k}={grid.metadata[k]!r}" for k in sorted(grid.metadata)]
    lines.append(",".join([f"{grid.row_label}\\{grid.col_label}"] + [_fmt(c) for c in grid.col_values]))
    for r, row in zip(grid.row_values, grid.values):
        lines.append(",".join([_fmt(r)] + [_fmt(v) for v in row]))
    return "\n".join(lines) + "\n"


def emit_csv(grid: SweepGrid, path) -> None:
    """Axes in the first row and column, 17-digit values, metadata as ``#`` lines."""
    atomic_write_text(path, grid_to_csv(grid))


def read_csv(path) -> SweepGrid:
    meta: dict = {}
    rows = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.rstrip("\n")
            if line.startswith("# "):
                key, _, val = line[2:].partition("=")
                meta[key] = val
            elif line:
                rows.append(line.split(","))
    corner, cols = rows[0][0], [float(c) for c in rows[0][1:]]
    row_label, _, col_label = corner.partition("\\")
    body = np.array([[float(v) for v in r] for r in rows[1:]])
    return SweepGrid(row_label, body[:, 0], col_label, np.array(cols), body[:, 1:], meta)


# Perceptually ordered stops, dark (small error) to bright (large error).
DEFAULT_PALETTE = ("#0d0887", "#6a00a8", "#b12a90", "#e16462", "#fca636", "#f0f921")
VALUE_RANGE = (-15.0, 5.0)


def _hex(rgb) -> str:
    return "#" + "".join(f"{int(round(c)):02x}" for c in rgb)


def color_for(value: float, palette: Sequence[str] = DEFAULT_PALETTE) -> str:
    """Linear interpolation through ``palette`` over ``[-15, 5]``."""
    lo, hi = VALUE_RANGE
    s = min(max((value - lo) / (hi - lo), 0.0), 1.0)
    stops = [tuple(int(p[i : i + 2], 16) for i in (1, 3, 5)) for p in palette]
    if len(stops) == 1:
        return _hex(stops[0])
    pos = s * (len(stops) - 1)
    i = min(int(pos), len(stops) - 2)
    f = pos - i
    a, b = stops[i], stops[i + 1]
    return _hex([a[c] + (b[c] - a[c]) * f for c in range(3)])


def _tick(v: float) -> str:
    return f"{v:.4g}"


def grid_to_svg(grid: SweepGrid, palette: Sequence[str] = DEFAULT_PALETTE, cell: float = 4.0) -> str:
    nr, nc = grid.values.shape
    left, top, bottom, bar = 60.0, 30.0, 45.0, 70.0
    w, hgt = nc * cell, nr * cell
    width, height = left + w + bar, top + hgt + bottom
    title = str(grid.metadata.get("benchmark", ""))
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width:g}" height="{height:g}" '
        f'viewBox="0 0 {width:g} {height:g}" font-family="sans-serif" font-size="10">',
        f'<text x="{left + w / 2:g}" y="15" text-anchor="middle">{title}</text>',
        f'<g class="cells" shape-rendering="crispEdges">',
    ]
    # first row at the bottom so the row axis increases upwards
    for i in range(nr):
        y = top + (nr - 1 - i) * cell
        for j in range(nc):
            x = left + j * cell
            out.append(
                f'<rect class="cell" x="{x:g}" y="{y:g}" width="{cell:g}" height="{cell:g}" '
                f'fill="{color_for(grid.values[i, j], palette)}"/>'
            )
    out.append("</g>")
    out.append(f'<text x="{left + w / 2:g}" y="{top + hgt + 32:g}" text-anchor="middle">{grid.col_label}</text>')
    out.append(
        f'<text x="15" y="{top + hgt / 2:g}" text-anchor="middle" '
        f'transform="rotate(-90 15 {top + hgt / 2:g})">{grid.row_label}</text>'
    )
    for j in sorted({0, nc // 2, nc - 1}):
        x = left + (j + 0.5) * cell
        out.append(f'<text x="{x:g}" y="{top + hgt + 14:g}" text-anchor="middle">{_tick(grid.col_values[j])}</text>')
    for i in sorted({0, nr // 2, nr - 1}):
        y = top + (nr - 1 - i + 0.5) * cell
        out.append(f'<text x="{left - 4:g}" y="{y + 3:g}" text-anchor="end">{_tick(grid.row_values[i])}</text>')
    # colour bar
    bx, steps = left + w + 15, 40
    step_h = hgt / steps
    out.append('<g class="colorbar" shape-rendering="crispEdges">')
    lo, hi = VALUE_RANGE
    for s in range(steps):
        v = lo + (hi - lo) * (s + 0.5) / steps
        y = top + hgt - (s + 1) * step_h
        out.append(f'<rect x="{bx:g}" y="{y:g}" width="12" height="{step_h:g}" fill="{color_for(v, palette)}"/>')
    out.append("</g>")
    for v in (lo, -10.0, -5.0, 0.0, hi):
        y = top + hgt - (v - lo) / (hi - lo) * hgt
        out.append(f'<text x="{bx + 16:g}" y="{y + 3:g}">{v:g}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def emit_svg_heatmap(grid: SweepGrid, path, palette: Sequence[str] = DEFAULT_PALETTE) -> None:
    """Self-contained SVG: one ``rect.cell`` per grid value, axis labels and a colour bar."""
    atomic_write_text(path, grid_to_svg(grid, palette))


# figure data ----------------------------------------------------------------


def default_x0_axis(n: int = 100) -> np.ndarray:
    """``n`` equispaced points in ``(0, 1]``."""
    return np.linspace(1.0 / n, 1.0, n)


def default_N_axis(n: int = 100, N_max: int = 100) -> np.ndarray:
    """``n`` roughly equispaced orders in ``1..N_max`` ending at ``N_max``."""
    if n >= N_max:
        return np.arange(1, N_max + 1)
    return np.unique(np.rint(np.linspace(N_max / n, N_max, n)).astype(int))


def figure_1(resolution: int = 100, h: float = DEFAULT_STEP, workers: int | None = None) -> dict[str, SweepGrid]:
    """Sup errors of both 1D benchmarks over their plotting horizons."""
    x0, Ns = default_x0_axis(resolution), default_N_axis(resolution)
    return {
        "unstable": sweep_x0_N(benchmark_1d(1), x0, Ns, h=h, workers=workers),
        "stable": sweep_x0_N(benchmark_1d(-1), x0, Ns, h=h, workers=workers),
    }


def figure_2(resolution: int = 100, h: float = DEFAULT_STEP, workers: int | None = None) -> dict[str, SweepGrid]:
    """Unstable 1D benchmark: fixed horizons over ``(x0, N)`` and time maps for two initials."""
    bench = benchmark_1d(1)
    x0, Ns = default_x0_axis(resolution), default_N_axis(resolution)
    out = {}
    for T in THRESHOLD_HORIZONS:
        out[f"horizon_{T:g}"] = sweep_x0_N(bench, x0, Ns, horizon=T, h=h, workers=workers)
    t_axis = np.rint(np.linspace(0.0, 1.0, resolution + 1) / h) * h
    for x in (0.3, 0.5):
        out[f"time_x0_{x:g}"] = sweep_t_N(bench, x, t_axis, Ns, h=h, workers=workers)
    return out


def figure_3(resolution: int = 100, mu: float = 0.5, T: float = 0.1, h: float = DEFAULT_STEP,
             h_ref: float = REFERENCE_STEP, orders: Sequence[int] = (1, 10, 20)) -> dict[str, SweepGrid]:
    """Van der Pol sup errors over ``[-6, 6]^2`` for several truncation orders."""
    bench = benchmark_vdp(mu)
    axis = np.linspace(-6.0, 6.0, resolution)
    XX, VV = np.meshgrid(axis, axis)
    X0 = np.stack([XX.ravel(), VV.ravel()], axis=1)
    ref = vdp_reference(bench, X0, T, h, h_ref)
    return {f"N_{N}": sweep_x0_v0(bench, axis, axis, N, T, h, h_ref, reference=ref) for N in orders}


@dataclass
class ThresholdRow:
    horizon: float
    theoretical: float
    reported_theoretical: float
    empirical: float | None = None
    reported_empirical: float | None = None


def threshold_report(grids: dict[float, SweepGrid] | None = None, level: float = CONVERGENCE_LEVEL) -> list[ThresholdRow]:
    """Theoretical thresholds from the horizon formula next to the reported ones.

    ``grids`` maps a horizon to an unstable ``(x0, N)`` sweep; when given the
    empirical threshold at ``level`` is filled in.
    """
    from .bounds import horizon_threshold

    rows = []
    for T, rt, re_ in zip(THRESHOLD_HORIZONS, REPORTED_THEORETICAL, REPORTED_EMPIRICAL):
        row = ThresholdRow(T, horizon_threshold(T, 1.0, 1.0), rt, reported_empirical=re_)
        if grids and T in grids:
            row.empirical = convergence_threshold(grids[T], level)
        rows.append(row)
    return rows


def format_threshold_report(rows: Sequence[ThresholdRow]) -> str:
    """CSV table of computed against reported thresholds, one row per horizon."""
    lines = ["horizon,theoretical,reported_theoretical,theoretical_diff,empirical,reported_empirical,empirical_diff"]
    for r in rows:
        emp = "" if r.empirical is None else _fmt(r.empirical)
        ediff = "" if r.empirical is None else _fmt(r.empirical - r.reported_empirical)
        lines.append(",".join([
            f"{r.horizon:g}", _fmt(r.theoretical), f"{r.reported_theoretical:g}",
            _fmt(r.theoretical - r.reported_theoretical), emp, f"{r.reported_empirical:g}", ediff,
        ]))
    return "\n".join(lines) + "\n"


__all__ = [
    "Benchmark",
    "HorizonRule",
    "SweepGrid",
    "benchmark_1d",
    "benchmark_vdp",
    "convergence_threshold",
    "emit_csv",
    "emit_svg_heatmap",
    "figure_1",
    "figure_2",
    "figure_3",
    "read_csv",
    "section_1d",
    "sweep_t_N",
    "sweep_x0_N",
    "sweep_x0_v0",
    "threshold_report",
]
