"""Certified truncation-error envelopes and convergence horizons.

All estimates take a :class:`BoundInputs` bundle:

``coef_bound`` and ``radius``
    constants ``D`` and ``R`` with ``sum_j sum_{|alpha|=k} |f_{j,alpha}(t)| <= D R^-k``
    for all ``k >= 1`` and all times;
``decay_rate``
    ``mu`` such that the Jacobian at the origin is constant, diagonal and
    bounded above by ``-mu`` (``None`` when that does not hold);
``drift``
    ``nu = sup_t sum_j |f_j(t, 0)|``.

Envelope functions never raise on out-of-range arguments; they return an
:class:`Envelope` whose ``valid`` flag says whether the estimate applies.
Functions producing constants (horizons, parameter sets) raise
:class:`~carleman.field.PreconditionError` instead.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field
from typing import Callable, NamedTuple, Sequence

import numpy as np

from .field import MaclaurinField, PreconditionError, degree_masses

E = math.e
# Exponent splitting the local horizon between state growth and truncation decay.
SPLIT = (E - 1.0) / (2.0 * E - 1.0)


class Envelope(NamedTuple):
    value: float
    valid: bool


@dataclass(frozen=True)
class BoundInputs:
    coef_bound: float
    radius: float
    x0_inf: float
    x0_two: float
    decay_rate: float | None = None
    drift: float = 0.0
    t0: float = 0.0

    def __post_init__(self):
        if not self.coef_bound > 0:
            raise PreconditionError(f"coefficient bound must be positive, got {self.coef_bound}")
        if not self.radius > 0:
            raise PreconditionError(f"radius must be positive, got {self.radius}")
        if self.x0_inf < 0 or self.x0_two < 0:
            raise PreconditionError("initial-state norms must be non-negative")
        if self.x0_inf > self.x0_two * (1 + 1e-12):
            raise PreconditionError(f"max-norm {self.x0_inf} exceeds Euclidean norm {self.x0_two}")
        if self.drift < 0:
            raise PreconditionError(f"drift bound must be non-negative, got {self.drift}")
        if self.decay_rate is not None and not self.decay_rate > 0:
            raise PreconditionError(f"decay rate must be positive, got {self.decay_rate}")

    @classmethod
    def from_state(cls, x0, coef_bound: float, radius: float, decay_rate: float | None = None,
                   drift: float = 0.0, t0: float = 0.0) -> "BoundInputs":
        x0 = np.atleast_1d(np.asarray(x0, dtype=float))
        return cls(coef_bound, radius, float(np.max(np.abs(x0))), float(np.linalg.norm(x0)),
                   decay_rate, drift, t0)


def _require_nonzero(inp: BoundInputs) -> None:
    if inp.x0_inf == 0:
        raise PreconditionError("initial state is zero; the horizon is unbounded and no estimate is formed")


def local_threshold(inp: BoundInputs) -> float:
    """Largest admissible ``|x0|_inf`` for the finite-horizon estimate, ``R/e``."""
    return inp.radius / E


def convergence_horizon(inp: BoundInputs) -> float:
    """Length of the window on which the finite section converges exponentially.

    ``(e-1) R / ((2e-1) D) * ln(R / (e |x0|_inf))`` for ``0 < |x0|_inf <= R/e``.
    """
    _require_nonzero(inp)
    limit = local_threshold(inp)
    if inp.x0_inf > limit:
        raise PreconditionError(
            f"finite-horizon condition |x0|_inf < R/e violated: threshold {limit:.6g}, got {inp.x0_inf:.6g}"
        )
    return SPLIT * inp.radius / inp.coef_bound * math.log(inp.radius / (E * inp.x0_inf))


def horizon_threshold(horizon: float, coef_bound: float, radius: float) -> float:
    """Largest ``|x0|_inf`` whose convergence horizon is at least ``horizon``."""
    if horizon < 0:
        raise ValueError("horizon must be non-negative")
    return radius / E * math.exp(-horizon * coef_bound / (SPLIT * radius))


def local_state_bound(inp: BoundInputs) -> float:
    """Sup-norm bound on the true state over the convergence window.

    ``|x0|_inf^((e-1)/(2e-1)) * (R/e)^(e/(2e-1))``, which stays below ``R/e``.
    """
    convergence_horizon(inp)
    return inp.x0_inf**SPLIT * (inp.radius / E) ** (1.0 - SPLIT)


def local_prefactor(inp: BoundInputs) -> float:
    M = local_state_bound(inp)
    return inp.radius * M / (math.sqrt(2 * math.pi) * (inp.radius - M))


def local_envelope(inp: BoundInputs, N: int, t: float) -> Envelope:
    """Error bound on ``[t0, t0 + horizon]`` from the coefficient decay alone."""
    try:
        T = convergence_horizon(inp)
        pref = local_prefactor(inp)
    except PreconditionError:
        return Envelope(math.inf, False)
    dt = t - inp.t0
    valid = N >= 1 and -1e-12 <= dt <= T * (1 + 1e-12) + 1e-15
    log_val = (
        math.log(pref)
        - 1.5 * math.log(N)
        + inp.coef_bound * dt * N / inp.radius
        + SPLIT * N * math.log(inp.x0_inf * E / inp.radius)
    )
    return Envelope(_safe_exp(log_val), valid)


def _safe_exp(x: float) -> float:
    return math.exp(x) if x < 709.0 else math.inf


def apriori_horizon(bound: float, window: float, inp: BoundInputs) -> float:
    """``min(window, (R/D) ln(R/(M e)))`` for an a priori sup bound ``M <= R/e``."""
    if bound <= 0:
        raise PreconditionError(f"a priori bound must be positive, got {bound}")
    if bound > inp.radius / E:
        raise PreconditionError(
            f"a priori bound must satisfy M < R/e: threshold {inp.radius / E:.6g}, got {bound:.6g}"
        )
    return min(window, inp.radius / inp.coef_bound * math.log(inp.radius / (bound * E)))


def apriori_envelope(bound: float, window: float, inp: BoundInputs, N: int, t: float) -> tuple[Envelope, float]:
    """Error bound when ``|x(t)|_inf <= bound`` is known on ``[t0, t0 + window]``.

    Returns the envelope and the horizon on which it holds.
    """
    try:
        T = apriori_horizon(bound, window, inp)
    except PreconditionError:
        return Envelope(math.inf, False), 0.0
    R, M = inp.radius, bound
    dt = t - inp.t0
    pref = R * M / (math.sqrt(2 * math.pi) * (R - M))
    log_base = math.log(M / R) + inp.coef_bound * dt / R + 1.0
    value = _safe_exp(math.log(pref) - 1.5 * math.log(N) + N * log_base)
    return Envelope(value, N >= 1 and -1e-12 <= dt <= T * (1 + 1e-12) + 1e-15), T


@dataclass(frozen=True)
class PolynomialHorizon:
    horizon: float
    radius: float
    closed_form: bool


def _poly_objective(masses: Sequence[float], x: float) -> Callable[[float], float]:
    def g(R: float) -> float:
        D = max(R**k * a for k, a in enumerate(masses, start=1))
        return SPLIT * R / D * math.log(R / (E * x))

    return g


def _golden_max(g: Callable[[float], float], lo: float, hi: float, rtol: float = 1e-10) -> float:
    invphi = (math.sqrt(5) - 1) / 2
    a, b = lo, hi
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    gc, gd = g(c), g(d)
    while (b - a) > rtol * 0.5 * (a + b):
        if gc > gd:
            b, d, gd = d, c, gc
            c = b - invphi * (b - a)
            gc = g(c)
        else:
            a, c, gc = c, d, gd
            d = a + invphi * (b - a)
            gd = g(d)
    return 0.5 * (a + b)


def polynomial_horizon(field: MaclaurinField, x0, method: str = "auto") -> PolynomialHorizon:
    """Best convergence horizon over all admissible radii for a polynomial field.

    ``method`` is ``"auto"`` (closed form when it applies, numeric search
    otherwise), ``"closed"`` or ``"numeric"``.
    """
    if field.is_generator:
        raise PreconditionError("the radius optimisation needs a polynomial field")
    masses = degree_masses(field)
    L = len(masses)
    if L < 2 or masses[-1] == 0:
        raise PreconditionError(f"polynomial degree must be at least 2, got {L}")
    x = float(np.max(np.abs(np.atleast_1d(np.asarray(x0, dtype=float)))))
    if x == 0:
        raise PreconditionError("initial state is zero; the horizon is unbounded")
    aL = masses[-1]
    crossover = max(
        ((a / aL) ** (1.0 / (L - k)) for k, a in enumerate(masses[:-1], start=1) if a > 0), default=0.0
    )
    closed_ok = x >= crossover / E
    if method == "closed" or (method == "auto" and closed_ok):
        if not closed_ok:
            raise PreconditionError(
                f"closed form needs |x0|_inf >= {crossover / E:.6g}, got {x:.6g}"
            )
        T = SPLIT / ((L - 1) * E**L * aL) * x ** (1 - L)
        return PolynomialHorizon(T, E ** (L / (L - 1)) * x, True)
    if method not in ("auto", "numeric"):
        raise ValueError(f"unknown method {method!r}")
    g = _poly_objective(masses, x)
    lo = E * x
    hi = max(1e3 * E * x, 10.0 * crossover)
    grid = np.geomspace(lo, hi, 513)[1:]
    vals = np.array([g(R) for R in grid])
    i = int(np.argmax(vals))
    left = grid[i - 1] if i > 0 else lo
    right = grid[i + 1] if i + 1 < grid.size else grid[i]
    R = _golden_max(g, left, right)
    return PolynomialHorizon(g(R), R, False)


def global_threshold(inp: BoundInputs) -> float:
    """Largest admissible ``|x0|_2`` for the whole-time estimate, ``R^2 mu / (D + R mu)``."""
    if inp.decay_rate is None:
        raise PreconditionError("no decay rate: the linear part is not a stable diagonal matrix")
    mu = inp.decay_rate
    return inp.radius**2 * mu / (inp.coef_bound + inp.radius * mu)


def global_base(inp: BoundInputs) -> float:
    mu = inp.decay_rate
    return (inp.coef_bound + inp.radius * mu) * inp.x0_two / (inp.radius**2 * mu)


def global_envelope(inp: BoundInputs, N: int) -> Envelope:
    """Time-uniform bound ``|x0|_2 * base^N`` for stable equilibria."""
    if inp.decay_rate is None:
        return Envelope(math.inf, False)
    valid = N >= 1 and 0 < inp.x0_two < global_threshold(inp) and inp.drift == 0
    base = global_base(inp)
    return Envelope(inp.x0_two * base**N, valid)


@dataclass(frozen=True)
class DriftParameters:
    """Ratios governing the estimate with a drift term.

    ``eta_drift = nu / D`` and ``eta_decay = R mu / D``.  ``rate_root`` and
    ``floor_root`` are the larger and smaller roots of
    ``(1 + eta_decay) s^2 - (eta_drift + eta_decay) s + eta_drift = 0``.
    """

    eta_drift: float
    eta_decay: float
    rate_root: float
    floor_root: float

    def residuals(self) -> tuple[float, float]:
        a, b, c = 1.0 + self.eta_decay, -(self.eta_drift + self.eta_decay), self.eta_drift
        return tuple(a * s * s + b * s + c for s in (self.rate_root, self.floor_root))


def drift_admissibility(eta_decay: float) -> float:
    """Largest admissible ``eta_drift``: ``2 + eta_decay - 2 sqrt(1 + eta_decay)``."""
    return 2.0 + eta_decay - 2.0 * math.sqrt(1.0 + eta_decay)


def drift_parameters(inp: BoundInputs) -> DriftParameters:
    if inp.decay_rate is None:
        raise PreconditionError("no decay rate: the linear part is not a stable diagonal matrix")
    eta0 = inp.drift / inp.coef_bound
    eta1 = inp.radius * inp.decay_rate / inp.coef_bound
    limit = drift_admissibility(eta1)
    if eta0 > limit:
        raise PreconditionError(
            f"drift condition nu/D <= 2 + R mu/D - 2 sqrt(1 + R mu/D) violated: threshold {limit:.6g}, got {eta0:.6g}"
        )
    disc = (eta1 - eta0) ** 2 - 4.0 * eta0
    if disc < 0:
        if disc > -1e-14:
            disc = 0.0
        else:
            raise ArithmeticError(f"negative discriminant {disc} despite admissible drift")
    eps0 = (eta0 + eta1 + math.sqrt(disc)) / (2.0 * (1.0 + eta1))
    eps1 = eta0 / ((1.0 + eta1) * eps0)
    return DriftParameters(eta0, eta1, eps0, eps1)


def state_bound(inp: BoundInputs, params: DriftParameters) -> float:
    """Euclidean bound on the true state for all times, ``max(|x0|_2, R * floor_root)``."""
    return max(inp.x0_two, inp.radius * params.floor_root)


def drift_envelope(inp: BoundInputs, params: DriftParameters, N: int) -> Envelope:
    m = state_bound(inp, params)
    eps0, eta1 = params.rate_root, params.eta_decay
    value = eps0 * m / (eta1 * (1.0 - eps0)) * (m / (inp.radius * eps0)) ** N
    valid = N >= 1 and 0 < inp.x0_two < inp.radius * eps0
    return Envelope(value, valid)


def decay_rate_bound(inp: BoundInputs) -> float:
    """Guaranteed exponential decay rate ``mu - D |x0|_2 / (R (R - |x0|_2))``."""
    if inp.decay_rate is None:
        raise PreconditionError("no decay rate: the linear part is not a stable diagonal matrix")
    u = inp.x0_two
    if u >= inp.radius:
        return -math.inf
    return inp.decay_rate - inp.coef_bound * u / (inp.radius * (inp.radius - u))


def decay_envelope(inp: BoundInputs, t: float) -> Envelope:
    """``|x(t)|_2 <= |x0|_2 exp(-rate (t - t0))`` for stable equilibria."""
    if inp.decay_rate is None:
        return Envelope(math.inf, False)
    rate = decay_rate_bound(inp)
    valid = inp.drift == 0 and 0 < inp.x0_two < global_threshold(inp) and t >= inp.t0
    if not math.isfinite(rate):
        return Envelope(math.inf, False)
    return Envelope(inp.x0_two * math.exp(-rate * (t - inp.t0)), valid)


@dataclass
class BoundReport:
    """One certified estimate with its constants.

    ``tag`` is one of ``local``, ``apriori``, ``polynomial``, ``global``,
    ``drift`` or ``decay``.
    """

    tag: str
    valid: bool
    horizon: float
    constants: dict[str, float] = dc_field(default_factory=dict)
    envelope: Callable[[int, float], Envelope] | None = None
    note: str = ""


def bound_reports(inp: BoundInputs, field: MaclaurinField | None = None, x0=None) -> list[BoundReport]:
    """Every estimate whose hypotheses can be phrased for ``inp``, valid or not."""
    reports = []

    try:
        T = convergence_horizon(inp)
        M0 = local_state_bound(inp)
        reports.append(BoundReport(
            "local", True, T,
            {"threshold": local_threshold(inp), "state_bound": M0, "prefactor": local_prefactor(inp)},
            lambda N, t: local_envelope(inp, N, t),
        ))
    except PreconditionError as exc:
        reports.append(BoundReport("local", False, 0.0, {"threshold": local_threshold(inp)}, note=str(exc)))

    if field is not None and not field.is_generator and (field.degree or 0) >= 2 and x0 is not None:
        try:
            ph = polynomial_horizon(field, x0)
            reports.append(BoundReport(
                "polynomial", True, ph.horizon,
                {"best_radius": ph.radius},
                note="closed form" if ph.closed_form else "numeric search over the radius",
            ))
        except PreconditionError as exc:
            reports.append(BoundReport("polynomial", False, 0.0, note=str(exc)))

    if inp.decay_rate is not None:
        thr = global_threshold(inp)
        if inp.drift == 0:
            ok = 0 < inp.x0_two < thr
            note = "" if ok else f"|x0|_2 < R^2 mu/(D + R mu) violated: threshold {thr:.6g}, got {inp.x0_two:.6g}"
            reports.append(BoundReport(
                "global", ok, math.inf if ok else 0.0,
                {"threshold": thr, "base": global_base(inp)},
                lambda N, t: global_envelope(inp, N), note,
            ))
            reports.append(BoundReport(
                "decay", ok, math.inf if ok else 0.0,
                {"rate": decay_rate_bound(inp)},
                lambda N, t: decay_envelope(inp, t), note,
            ))
        else:
            try:
                params = drift_parameters(inp)
                ok = 0 < inp.x0_two < inp.radius * params.rate_root
                note = "" if ok else (
                    f"|x0|_2 < R * rate_root violated: threshold {inp.radius * params.rate_root:.6g}, "
                    f"got {inp.x0_two:.6g}"
                )
                reports.append(BoundReport(
                    "drift", ok, math.inf if ok else 0.0,
                    {
                        "eta_drift": params.eta_drift, "eta_decay": params.eta_decay,
                        "rate_root": params.rate_root, "floor_root": params.floor_root,
                        "state_bound": state_bound(inp, params),
                        "base": state_bound(inp, params) / (inp.radius * params.rate_root),
                    },
                    lambda N, t: drift_envelope(inp, params, N), note,
                ))
            except PreconditionError as exc:
                reports.append(BoundReport("drift", False, 0.0, note=str(exc)))
    return reports
