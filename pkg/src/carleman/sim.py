"""Fixed-step RK4 integration, exact reference solutions and error metrics.

Grids are ``t0, t0 + h, ..., t0 + (n-1) h, t_final``: the last step is
shortened so the grid lands on ``t_final`` exactly.  Constant linear
systems are advanced with the RK4 step matrix
``I + hA + (hA)^2/2 + (hA)^3/6 + (hA)^4/24``, which is the same scheme
applied once per step instead of stage by stage.

Integrations stop at the first step whose observed state leaves the
``guard`` ball (sup-norm) or turns non-finite; the trajectory is truncated
there and flagged.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
import numpy as np

from ._io import atomic_write_text
from .field import MaclaurinField, eval_field
from .lifting import FiniteSection, lift_initial

DEFAULT_STEP = 1e-3
REFERENCE_STEP = 1e-5
BLOWUP_GUARD = 1e10
CLIP_FLOOR = 1e-15
CLIP_CEIL = 1e5


@dataclass
class Trajectory:
    """Samples of a nonlinear, lifted or exact solution.

    ``states`` has shape ``(len(times), dim)``; for lifted runs the first
    ``d`` columns are the degree-1 block.  ``blowup_time`` is the time of
    the first rejected step when the run was cut short.
    """

    times: np.ndarray
    states: np.ndarray
    kind: str
    d: int
    order: int | None = None
    blowup_time: float | None = None

    @property
    def blew_up(self) -> bool:
        return self.blowup_time is not None

    @property
    def first_block(self) -> np.ndarray:
        return self.states[:, : self.d]


def time_grid(t0: float, t_final: float, h: float) -> np.ndarray:
    if not h > 0:
        raise ValueError(f"step must be positive, got {h}")
    if t_final < t0:
        raise ValueError(f"t_final {t_final} precedes t0 {t0}")
    span = t_final - t0
    n = max(int(math.ceil(span / h * (1 - 1e-12))), 0)
    times = t0 + h * np.arange(n + 1, dtype=float)
    times[-1] = t_final
    return times


def _record_mask(n_points: int, every: int) -> np.ndarray:
    mask = np.zeros(n_points, dtype=bool)
    mask[::every] = True
    mask[-1] = True
    return mask


def rk4_step_matrix(A: np.ndarray, h: float) -> np.ndarray:
    M = h * np.asarray(A, dtype=float)
    eye = np.eye(M.shape[0])
    return eye + M @ (eye + M @ (eye + M @ (eye + M / 4.0) / 3.0) / 2.0)


def _run_linear(A, b, Z0, times, guard, obs, every):
    """Constant ``z' = A z + b`` for a batch ``Z0`` of shape ``(batch, dim)``.

    Returns recorded observed blocks ``(n_rec, batch, obs)`` and the first
    rejected grid index per batch member (``-1`` if none).
    """
    dim = A.shape[0]
    if b is not None:
        Aug = np.zeros((dim + 1, dim + 1))
        Aug[:dim, :dim] = A
        Aug[:dim, dim] = b
        A = Aug
        Z0 = np.concatenate([Z0, np.ones((Z0.shape[0], 1))], axis=1)
    steps = np.diff(times)
    cache: dict[float, np.ndarray] = {}
    Z = Z0.copy()
    mask = _record_mask(times.size, every)
    rec = [Z[:, :obs].copy()]
    blow = np.full(Z.shape[0], -1)
    for i, hh in enumerate(steps, start=1):
        S = cache.get(hh)
        if S is None:
            S = cache[hh] = rk4_step_matrix(A, hh).T
        Z = Z @ S
        _mark_blowup(Z, obs, guard, blow, i)
        if mask[i]:
            rec.append(Z[:, :obs].copy())
        if np.all(blow >= 0):
            break
    return rec, blow


def _mark_blowup(Z, obs, guard, blow, i):
    with np.errstate(invalid="ignore"):
        bad = ~np.all(np.isfinite(Z), axis=1) | (np.max(np.abs(Z[:, :obs]), axis=1) > guard)
    new = bad & (blow < 0)
    if np.any(new):
        blow[new] = i
    if np.any(blow >= 0):
        Z[blow >= 0] = np.nan


def _run_rhs(rhs, Y0, times, guard, obs, every):
    """Classical RK4 for ``y' = rhs(t, Y)`` on a batch ``Y0`` of shape ``(batch, dim)``."""
    Y = Y0.copy()
    mask = _record_mask(times.size, every)
    rec = [Y[:, :obs].copy()]
    blow = np.full(Y.shape[0], -1)
    for i in range(1, times.size):
        t, hh = times[i - 1], times[i] - times[i - 1]
        with np.errstate(all="ignore"):
            k1 = rhs(t, Y)
            k2 = rhs(t + hh / 2, Y + hh / 2 * k1)
            k3 = rhs(t + hh / 2, Y + hh / 2 * k2)
            k4 = rhs(t + hh, Y + hh * k3)
            Y = Y + hh / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
        _mark_blowup(Y, obs, guard, blow, i)
        if mask[i]:
            rec.append(Y[:, :obs].copy())
        if np.all(blow >= 0):
            break
    return rec, blow


def _finish(times, rec, blow, every, kind, d, order):
    rec_times = times[_record_mask(times.size, every)]
    states = np.stack(rec)[:, 0, :]
    blowup_time = None
    if blow[0] >= 0:
        blowup_time = float(times[blow[0]])
        keep = rec_times < blowup_time
        rec_times, states = rec_times[keep], states[: int(keep.sum())]
    return Trajectory(rec_times[: states.shape[0]], states, kind, d, order, blowup_time)


def integrate_nonlinear(
    field: MaclaurinField,
    x0,
    t_final: float,
    h: float = DEFAULT_STEP,
    t0: float | None = None,
    degree: int | None = None,
    guard: float = BLOWUP_GUARD,
    record_every: int = 1,
) -> Trajectory:
    """RK4 on ``x' = f(t, x)``.  Generator fields need ``degree``."""
    t0 = field.t0 if t0 is None else t0
    if degree is None and field.is_generator:
        raise ValueError("generator fields need an explicit truncation degree")
    rhs = lambda t, Y: eval_field(field, t, Y, degree)  # noqa: E731
    return integrate_rhs(rhs, x0, t_final, h, t0, guard, record_every)


def integrate_rhs(
    rhs,
    x0,
    t_final: float,
    h: float = DEFAULT_STEP,
    t0: float = 0.0,
    guard: float = BLOWUP_GUARD,
    record_every: int = 1,
) -> Trajectory:
    """RK4 on ``x' = rhs(t, x)`` where ``rhs`` accepts batches ``(..., d)``."""
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    times = time_grid(t0, t_final, h)
    d = x0.size
    rec, blow = _run_rhs(rhs, x0[None, :], times, guard, d, record_every)
    return _finish(times, rec, blow, record_every, "nonlinear", d, None)


def _section_rhs(section: FiniteSection):
    cache: dict[float, tuple[np.ndarray, np.ndarray | None]] = {}

    def rhs(t, Z):
        hit = cache.get(t)
        if hit is None:
            if len(cache) > 8:
                cache.clear()
            hit = cache[t] = (section.matrix(t), section.forcing(t))
        A, b = hit
        out = Z @ A.T
        if b is not None:
            out = out + b
        return out

    return rhs


def propagate_section(
    section: FiniteSection,
    Z0: np.ndarray,
    times: np.ndarray,
    guard: float = BLOWUP_GUARD,
    observe: int | None = None,
    record_every: int = 1,
):
    """Batched RK4 for the lifted system.

    ``Z0`` has shape ``(batch, dim)``.  Returns the recorded first ``observe``
    coordinates (default: the degree-1 block) with shape ``(n_rec, batch,
    observe)`` and the first rejected grid index per batch member.
    """
    obs = section.d if observe is None else observe
    if section.constant:
        b = section.forcing(0.0)
        rec, blow = _run_linear(section.matrix(0.0), b, Z0, times, guard, obs, record_every)
    else:
        rec, blow = _run_rhs(_section_rhs(section), Z0, times, guard, obs, record_every)
    n_rec = int(_record_mask(times.size, record_every).sum())
    out = np.full((n_rec, Z0.shape[0], obs), np.nan)
    out[: len(rec)] = np.stack(rec)
    return out, blow


def integrate_section(
    section: FiniteSection,
    x0,
    t_final: float,
    h: float = DEFAULT_STEP,
    t0: float = 0.0,
    guard: float = BLOWUP_GUARD,
    record_every: int = 1,
    full_state: bool = True,
) -> Trajectory:
    """RK4 on the order-``N`` section started from the lifted ``x0``.

    The guard watches the degree-1 block (non-finite values anywhere also
    stop the run).  With ``full_state=False`` only that block is stored.
    """
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    if x0.size != section.d:
        raise ValueError(f"initial state has length {x0.size}, section dimension is {section.d}")
    if section.field is not None and t0 == 0.0:
        t0 = section.field.t0
    times = time_grid(t0, t_final, h)
    Z0 = lift_initial(x0, section.N).data[None, :]
    if full_state:
        # guard applies to the degree-1 block only; track it through a wrapper
        rec, blow = _run_guarded_full(section, Z0, times, guard, record_every)
    else:
        recs, blow = propagate_section(section, Z0, times, guard, section.d, record_every)
        rec = list(recs)
    return _finish(times, rec, blow, record_every, "lifted", section.d, section.N)


def _run_guarded_full(section, Z0, times, guard, every):
    # Record the full lifted state while guarding only the degree-1 block.
    d = section.d
    dim = section.dim
    mask = _record_mask(times.size, every)
    blow = np.full(1, -1)
    rec = [Z0.copy()]
    if section.constant:
        A = section.matrix(0.0)
        b = section.forcing(0.0)
        if b is not None:
            Aug = np.zeros((dim + 1, dim + 1))
            Aug[:dim, :dim] = A
            Aug[:dim, dim] = b
            A = Aug
        cache: dict[float, np.ndarray] = {}
        Z = np.concatenate([Z0, np.ones((1, 1))], axis=1) if b is not None else Z0.copy()
        for i in range(1, times.size):
            hh = times[i] - times[i - 1]
            S = cache.get(hh)
            if S is None:
                S = cache[hh] = rk4_step_matrix(A, hh).T
            with np.errstate(all="ignore"):
                Z = Z @ S
            _mark_blowup(Z[:, :dim], d, guard, blow, i)
            if blow[0] >= 0:
                break
            if mask[i]:
                rec.append(Z[:, :dim].copy())
        return rec, blow
    rhs = _section_rhs(section)
    Y = Z0.copy()
    for i in range(1, times.size):
        t, hh = times[i - 1], times[i] - times[i - 1]
        with np.errstate(all="ignore"):
            k1 = rhs(t, Y)
            k2 = rhs(t + hh / 2, Y + hh / 2 * k1)
            k3 = rhs(t + hh / 2, Y + hh / 2 * k2)
            k4 = rhs(t + hh, Y + hh * k3)
            Y = Y + hh / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
        _mark_blowup(Y, d, guard, blow, i)
        if blow[0] >= 0:
            break
        if mask[i]:
            rec.append(Y.copy())
    return rec, blow


# exact solution of x' = +-x / (1 + x^2) -----------------------------------


def oracle_1d(sign: int, x0: float, t) -> np.ndarray:
    """Solve ``ln x + x^2/2 - sign*t = ln x0 + x0^2/2`` for ``x > 0``.

    Bisection in ``u = ln x`` (the left side is strictly increasing), run to
    a few ulps so the answer has full relative precision even when ``x`` is
    tiny.  ``x0`` and ``t`` broadcast.
    """
    if sign not in (1, -1):
        raise ValueError(f"sign must be +1 or -1, got {sign}")
    x0 = np.asarray(x0, dtype=float)
    if np.any(x0 <= 0):
        raise ValueError("the exact solution is defined for x0 > 0")
    t = np.asarray(t, dtype=float)
    c = np.log(x0) + x0**2 / 2 + sign * t
    hi_x = np.minimum(np.exp(np.minimum(c, 700.0)), np.sqrt(2 * np.maximum(c, 0.0)) + 1.0)
    hi = np.log(hi_x)
    lo = c - hi_x**2 / 2
    g = lambda u: u + np.exp(2 * u) / 2  # noqa: E731
    if np.any(g(lo) > c) or np.any(g(hi) < c):
        raise ArithmeticError("bracketing failed for the implicit solution")
    for _ in range(400):
        mid = 0.5 * (lo + hi)
        below = g(mid) < c
        lo = np.where(below, mid, lo)
        hi = np.where(below, hi, mid)
        if np.all(hi - lo <= 4 * np.finfo(float).eps * np.maximum(1.0, np.abs(hi))):
            break
    return np.exp(0.5 * (lo + hi))


def oracle_trajectory(sign: int, x0: float, times) -> Trajectory:
    times = np.asarray(times, dtype=float)
    return Trajectory(times, oracle_1d(sign, x0, times)[:, None], "oracle", 1)


# errors -------------------------------------------------------------------


def _same_grid(a: np.ndarray, b: np.ndarray) -> bool:
    if a.shape != b.shape:
        return False
    scale = max(1.0, float(np.max(np.abs(a))) if a.size else 1.0)
    return bool(np.all(np.abs(a - b) <= 1e-12 * scale))


def sup_error(lifted: Trajectory, reference: Trajectory) -> float:
    """``max_t |y_1(t) - x(t)|_inf`` over a shared grid; ``inf`` after a blow-up."""
    if lifted.blew_up or reference.blew_up:
        return math.inf
    if not _same_grid(lifted.times, reference.times):
        raise ValueError("trajectories are sampled on different grids")
    diff = np.abs(lifted.first_block - reference.states[:, : lifted.d])
    return float(np.max(diff)) if diff.size else 0.0


def clipped_log(e):
    """``log10`` of the error clipped into ``[1e-15, 1e5]``; NaN counts as divergent."""
    e = np.asarray(e, dtype=float)
    e = np.where(np.isnan(e), CLIP_CEIL, e)
    out = np.log10(np.clip(e, CLIP_FLOOR, CLIP_CEIL))
    return float(out) if out.ndim == 0 else out


@dataclass
class ErrorSeries:
    times: np.ndarray
    raw: np.ndarray
    clipped: np.ndarray


def error_series(lifted: Trajectory, reference: Trajectory) -> ErrorSeries:
    n = lifted.times.size
    if not _same_grid(lifted.times, reference.times[:n]):
        raise ValueError("trajectories are sampled on different grids")
    raw = np.max(np.abs(lifted.first_block - reference.states[:n, : lifted.d]), axis=1)
    return ErrorSeries(lifted.times, raw, clipped_log(raw))


def subsample(traj: Trajectory, times: np.ndarray) -> Trajectory:
    """Restrict ``traj`` to the given grid, which must be a subset of its own."""
    idx = np.searchsorted(traj.times, times - 1e-12 * max(1.0, float(np.max(np.abs(times)))))
    idx = np.clip(idx, 0, traj.times.size - 1)
    if not _same_grid(traj.times[idx], np.asarray(times, dtype=float)):
        raise ValueError("requested times are not on the trajectory grid")
    return Trajectory(traj.times[idx], traj.states[idx], traj.kind, traj.d, traj.order, traj.blowup_time)


def write_trajectory_csv(traj: Trajectory, path) -> None:
    """CSV with header ``t,x1,...`` (or ``t,y1,...`` for lifted runs), 17 significant digits."""
    prefix = "y" if traj.kind == "lifted" else "x"
    header = ["t"] + [f"{prefix}{i + 1}" for i in range(traj.states.shape[1])]
    lines = [",".join(header)]
    for t, row in zip(traj.times, traj.states):
        lines.append(",".join(f"{v:.17g}" for v in (t, *row)))
    atomic_write_text(path, "\n".join(lines) + "\n")


def write_error_csv(series: ErrorSeries, path) -> None:
    lines = ["t,error,clipped_log10"]
    for t, e, c in zip(series.times, series.raw, series.clipped):
        lines.append(f"{t:.17g},{e:.17g},{c:.17g}")
    atomic_write_text(path, "\n".join(lines) + "\n")

