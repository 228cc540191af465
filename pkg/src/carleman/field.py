"""Analytic vector fields stored by their Maclaurin coefficients.

A field ``f(t, x) = sum_alpha f_alpha(t) x^alpha`` is kept as a mapping
from :class:`~carleman.indexing.MultiIndex` to coefficient providers.  Two
flavours exist: polynomial fields with a finite list of terms, and
generator fields whose coefficients are produced degree by degree on
demand (e.g. the power series of ``x / (1 + x^2)``).

System spec files
-----------------
Spec files are YAML (JSON is accepted as well)::

    dimension: 2
    t0: 0.0            # optional
    terms:
      - {alpha: [1, 0], coeff: [0.0, -1.0]}
      - {alpha: [0, 1], coeff: [1.0, 0.5]}
      - {alpha: [2, 1], coeff: [0.0, -0.5]}

Only constant coefficients can be expressed in a file.  Duplicate ``alpha``
entries are summed and all-zero coefficients are dropped.  An all-zero
``alpha`` is a drift term ``f(t, 0)``.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass, field as dc_field
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np
import yaml

from .indexing import MultiIndex, indices_of_degree, monomials, position_map


class SpecError(ValueError):
    """Malformed system description."""


class PreconditionError(ValueError):
    """A hypothesis required by a certified estimate does not hold."""


class Coefficient:
    """Coefficient vector ``f_alpha(t)`` of one monomial."""

    constant: bool = False

    def evaluate(self, t: float) -> np.ndarray:
        raise NotImplementedError

    def sup_abs(self) -> np.ndarray | None:
        """Componentwise ``sup_t |f_{j,alpha}(t)|`` if known, else ``None``."""
        return None


class ConstantCoefficient(Coefficient):
    constant = True

    def __init__(self, value: Sequence[float]):
        self.value = np.asarray(value, dtype=float).copy()
        self.value.flags.writeable = False

    def evaluate(self, t: float) -> np.ndarray:
        return self.value

    def sup_abs(self) -> np.ndarray:
        return np.abs(self.value)

    def __repr__(self) -> str:
        return f"ConstantCoefficient({self.value.tolist()})"


class TimeVaryingCoefficient(Coefficient):
    """Coefficient given by a callable of time.

    ``sup`` declares ``sup_t |f_{j,alpha}(t)|`` per component; without it the
    quantities that take a supremum over time cannot be formed.
    """

    constant = False

    def __init__(self, func: Callable[[float], Sequence[float]], sup: Sequence[float] | None = None):
        self.func = func
        self._sup = None if sup is None else np.asarray(sup, dtype=float)

    def evaluate(self, t: float) -> np.ndarray:
        return np.asarray(self.func(t), dtype=float)

    def sup_abs(self) -> np.ndarray | None:
        return self._sup


def _as_coefficient(value) -> Coefficient:
    if isinstance(value, Coefficient):
        return value
    if callable(value):
        return TimeVaryingCoefficient(value)
    return ConstantCoefficient(value)


class MaclaurinField:
    """A vector field ``f(t, x)`` on ``R^d`` given by Maclaurin coefficients.

    Parameters
    ----------
    d : int
        State dimension.
    terms : mapping
        ``alpha -> coefficient``.  Values may be arrays (constant), callables
        of time, or :class:`Coefficient` instances.
    generator : callable, optional
        ``generator(k)`` returns a mapping ``alpha -> coefficient`` holding the
        degree-``k`` terms.  Used for fields with infinitely many terms; the
        stored ``terms`` are then ignored for degrees ``>= 1``.
    t0 : float
        Initial time attached to the system.
    name : str
        Free-form label.
    """

    def __init__(
        self,
        d: int,
        terms: Mapping[Sequence[int], object] | None = None,
        generator: Callable[[int], Mapping[Sequence[int], object]] | None = None,
        t0: float = 0.0,
        name: str = "",
    ):
        if d < 1:
            raise SpecError(f"dimension must be positive, got {d}")
        self.d = int(d)
        self.t0 = float(t0)
        self.name = name
        self._generator = generator
        self._generated: dict[int, dict[MultiIndex, Coefficient]] = {}
        self._lock = threading.Lock()
        self._by_degree: dict[int, dict[MultiIndex, Coefficient]] = {}
        self._matrices: dict[int, tuple[np.ndarray | None]] = {}
        for alpha, value in (terms or {}).items():
            alpha = MultiIndex(alpha)
            if len(alpha) != self.d:
                raise SpecError(f"multi-index {tuple(alpha)} has length {len(alpha)}, expected {self.d}")
            coeff = _as_coefficient(value)
            if coeff.constant and coeff.evaluate(0.0).shape != (self.d,):
                raise SpecError(f"coefficient of {tuple(alpha)} must have length {self.d}")
            self._by_degree.setdefault(alpha.degree, {})[alpha] = coeff

    # structure ---------------------------------------------------------

    @property
    def is_generator(self) -> bool:
        return self._generator is not None

    @property
    def degree(self) -> int | None:
        """Largest stored degree, or ``None`` for generator fields (unbounded)."""
        if self.is_generator:
            return None
        nonzero = [k for k, terms in self._by_degree.items() if terms]
        return max(nonzero, default=0)

    @property
    def equilibrium(self) -> bool:
        """True when ``f(t, 0) = 0``, i.e. no degree-0 term is present."""
        return not self._by_degree.get(0)

    @property
    def constant(self) -> bool:
        if self.is_generator:
            # generated coefficients are checked lazily; probe the linear part
            return all(c.constant for c in self.terms_of_degree(1).values()) and all(
                c.constant for c in self._by_degree.get(0, {}).values()
            )
        return all(c.constant for terms in self._by_degree.values() for c in terms.values())

    def terms_of_degree(self, k: int) -> dict[MultiIndex, Coefficient]:
        """Terms with ``|alpha| = k``; generated and memoized if needed."""
        if k == 0 or not self.is_generator:
            return self._by_degree.get(k, {})
        cached = self._generated.get(k)
        if cached is not None:
            return cached
        with self._lock:
            cached = self._generated.get(k)
            if cached is None:
                cached = {}
                for alpha, value in self._generator(k).items():
                    alpha = MultiIndex(alpha)
                    if len(alpha) != self.d or alpha.degree != k:
                        raise SpecError(f"generator returned {tuple(alpha)} for degree {k}")
                    cached[alpha] = _as_coefficient(value)
                self._generated[k] = cached
        return cached

    def terms(self, max_degree: int | None = None) -> dict[MultiIndex, Coefficient]:
        """All terms up to ``max_degree`` (required for generator fields)."""
        if max_degree is None:
            if self.is_generator:
                raise ValueError("generator fields need an explicit truncation degree")
            max_degree = self.degree
        out: dict[MultiIndex, Coefficient] = {}
        for k in range(0, max_degree + 1):
            out.update(self.terms_of_degree(k))
        return out

    def coefficient(self, alpha: Sequence[int], t: float = 0.0) -> np.ndarray:
        """``f_alpha(t)``; zero for absent terms."""
        alpha = MultiIndex(alpha)
        coeff = self.terms_of_degree(alpha.degree).get(alpha)
        if coeff is None:
            return np.zeros(self.d)
        return coeff.evaluate(t)

    def coefficient_matrix(self, k: int, t: float = 0.0) -> np.ndarray | None:
        """Degree-``k`` coefficients as a ``(block_size, d)`` matrix, ``None`` if absent.

        Constant degrees are assembled once and reused.
        """
        cached = self._matrices.get(k)
        if cached is not None:
            return cached[0]
        terms = self.terms_of_degree(k)
        if not terms:
            self._matrices[k] = (None,)
            return None
        pos = position_map(self.d, k)
        C = np.zeros((len(pos), self.d))
        for alpha, coeff in terms.items():
            C[pos[alpha]] += coeff.evaluate(t)
        if all(c.constant for c in terms.values()):
            C.flags.writeable = False
            self._matrices[k] = (C,)
        return C

    def jacobian_at_zero(self, t: float = 0.0) -> np.ndarray:
        """Matrix ``J[j, i] = df_j/dx_i (t, 0)``."""
        J = np.zeros((self.d, self.d))
        for i in range(self.d):
            J[:, i] = self.coefficient(MultiIndex.unit(self.d, i), t)
        return J

    # evaluation --------------------------------------------------------

    def __call__(self, t: float, x, degree: int | None = None) -> np.ndarray:
        return eval_field(self, t, x, degree)

    def truncated(self, degree: int) -> "MaclaurinField":
        """Polynomial field holding the terms up to ``degree``."""
        return MaclaurinField(self.d, self.terms(degree), t0=self.t0, name=self.name)

    def __repr__(self) -> str:
        deg = "inf" if self.degree is None else self.degree
        return f"MaclaurinField(d={self.d}, degree={deg}, name={self.name!r})"


def eval_field(field: MaclaurinField, t: float, x, degree: int | None = None) -> np.ndarray:
    """Evaluate ``sum_alpha f_alpha(t) x^alpha``.

    ``x`` may be batched with shape ``(..., d)``.  Generator fields need an
    explicit ``degree`` at which the series is cut.
    """
    x = np.asarray(x, dtype=float)
    if degree is None:
        if field.is_generator:
            raise ValueError("generator fields need an explicit truncation degree")
        degree = field.degree
    out = np.zeros(x.shape[:-1] + (field.d,))
    for k in range(0, degree + 1):
        C = field.coefficient_matrix(k, t)
        if C is not None:
            out += monomials(x, k) @ C
    return out


# spec files -------------------------------------------------------------

_ALLOWED_KEYS = {"dimension", "t0", "terms", "name"}
_ALLOWED_TERM_KEYS = {"alpha", "coeff"}


def parse_field(text: str) -> MaclaurinField:
    """Parse a YAML/JSON system description into a polynomial field."""
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise SpecError(f"cannot parse system description: {exc}") from exc
    if not isinstance(doc, dict):
        raise SpecError("system description must be a mapping")
    unknown = set(doc) - _ALLOWED_KEYS
    if unknown:
        raise SpecError(f"unknown keys: {sorted(unknown)}")
    if "dimension" not in doc or "terms" not in doc:
        raise SpecError("system description needs 'dimension' and 'terms'")
    d = doc["dimension"]
    if isinstance(d, bool) or not isinstance(d, int) or d < 1:
        raise SpecError(f"'dimension' must be a positive integer, got {d!r}")
    try:
        t0 = float(doc.get("t0", 0.0))
    except (TypeError, ValueError) as exc:
        raise SpecError(f"'t0' must be a real number, got {doc.get('t0')!r}") from exc
    raw_terms = doc["terms"]
    if not isinstance(raw_terms, list):
        raise SpecError("'terms' must be a list")

    summed: dict[MultiIndex, np.ndarray] = {}
    for i, term in enumerate(raw_terms):
        if not isinstance(term, dict):
            raise SpecError(f"term {i} must be a mapping")
        bad = set(term) - _ALLOWED_TERM_KEYS
        if bad or set(term) != _ALLOWED_TERM_KEYS:
            raise SpecError(f"term {i} must have exactly the keys 'alpha' and 'coeff'")
        alpha, coeff = term["alpha"], term["coeff"]
        if not isinstance(alpha, list) or len(alpha) != d:
            raise SpecError(f"term {i}: 'alpha' must be a list of length {d}")
        if any(isinstance(a, bool) or not isinstance(a, int) for a in alpha):
            raise SpecError(f"term {i}: exponents must be integers")
        if any(a < 0 for a in alpha):
            raise SpecError(f"term {i}: negative exponent in {alpha}")
        if not isinstance(coeff, list) or len(coeff) != d:
            raise SpecError(f"term {i}: 'coeff' must be a list of length {d}")
        try:
            vec = np.array([float(c) for c in coeff])
        except (TypeError, ValueError) as exc:
            raise SpecError(f"term {i}: coefficients must be real numbers") from exc
        key = MultiIndex(alpha)
        summed[key] = summed.get(key, np.zeros(d)) + vec
    terms = {alpha: vec for alpha, vec in summed.items() if np.any(vec != 0.0)}
    return MaclaurinField(d, terms, t0=t0, name=str(doc.get("name", "")))


def load_field(path) -> MaclaurinField:
    with open(path, encoding="utf-8") as fh:
        return parse_field(fh.read())


def field_to_spec(field: MaclaurinField) -> str:
    """Serialize a constant polynomial field back to spec-file text."""
    if field.is_generator or not field.constant:
        raise ValueError("only constant polynomial fields can be written to a spec file")
    terms = []
    for k in range(0, field.degree + 1):
        for alpha in indices_of_degree(field.d, k):
            coeff = field.terms_of_degree(k).get(alpha)
            if coeff is not None:
                terms.append({"alpha": list(alpha), "coeff": coeff.evaluate(0.0).tolist()})
    doc = {"dimension": field.d, "t0": field.t0, "terms": terms}
    if field.name:
        doc["name"] = field.name
    return yaml.safe_dump(doc, sort_keys=False)


# coefficient masses and hypotheses --------------------------------------


def _sup_abs(coeff: Coefficient, alpha: MultiIndex) -> np.ndarray:
    sup = coeff.sup_abs()
    if sup is None:
        raise PreconditionError(
            f"coefficient of {tuple(alpha)} is time-varying without a declared supremum"
        )
    return sup


def degree_masses(field: MaclaurinField, degree: int | None = None) -> list[float]:
    """``a_k = sup_t sum_j sum_{|alpha|=k} |f_{j,alpha}(t)|`` for ``k = 1..degree``."""
    if degree is None:
        if field.is_generator:
            raise ValueError("generator fields need an explicit degree")
        degree = field.degree
    out = []
    for k in range(1, degree + 1):
        total = 0.0
        for alpha, coeff in field.terms_of_degree(k).items():
            total += float(np.sum(_sup_abs(coeff, alpha)))
        out.append(total)
    return out


def coef_bound_for_radius(field: MaclaurinField, radius: float, degree: int | None = None) -> float:
    """Smallest constant ``D`` with ``a_k <= D radius^-k`` for all stored degrees.

    For a polynomial of degree ``L`` this is ``max_{1<=k<=L} radius^k a_k``.
    """
    if radius <= 0:
        raise ValueError(f"radius must be positive, got {radius}")
    masses = degree_masses(field, degree)
    return max((radius**k * a for k, a in enumerate(masses, start=1)), default=0.0)


@dataclass(frozen=True)
class DiagonalDecayCheck:
    """Outcome of testing for a constant, diagonal, strictly negative linear part.

    ``rate`` is ``min_j (-lambda_j)`` when the test passes; otherwise
    ``violation`` names the failed clause (``non-constant``, ``non-diagonal``
    or ``non-negative entry``) and ``detail`` explains it.
    """

    rate: float | None
    violation: str | None = None
    detail: str = ""

    @property
    def ok(self) -> bool:
        return self.violation is None

    def __bool__(self) -> bool:
        return self.ok


def diagonal_decay_rate(field: MaclaurinField, samples: Sequence[float] = (0.0, 1.0)) -> DiagonalDecayCheck:
    """Check that the Jacobian at 0 is a constant diagonal matrix with negative entries.

    Non-constant coefficients are refused outright; ``samples`` are only used
    to report how they differ.
    """
    linear = field.terms_of_degree(1)
    if not all(c.constant for c in linear.values()):
        J0, J1 = (field.jacobian_at_zero(t) for t in samples[:2])
        return DiagonalDecayCheck(
            None, "non-constant", f"linear part varies in time (max change {np.max(np.abs(J1 - J0)):.3g})"
        )
    J = field.jacobian_at_zero()
    off = J - np.diag(np.diag(J))
    if np.any(off != 0.0):
        return DiagonalDecayCheck(None, "non-diagonal", f"Jacobian {J.tolist()} is not diagonal")
    diag = np.diag(J)
    if np.any(diag >= 0.0):
        return DiagonalDecayCheck(None, "non-negative entry", f"diagonal {diag.tolist()} has an entry >= 0")
    return DiagonalDecayCheck(float(np.min(-diag)))


def drift_bound(field: MaclaurinField) -> float:
    """``sup_t sum_j |f_{j,0}(t)|``; zero for equilibrium fields."""
    total = 0.0
    for alpha, coeff in field.terms_of_degree(0).items():
        total += float(np.sum(_sup_abs(coeff, alpha)))
    return total


@dataclass
class DecayCertificate:
    """Witness for ``sum_j sum_{|alpha|=k} |f_{j,alpha}| <= D * radius^-k``."""

    radius: float
    coef_bound: float
    checked_degree: int
    valid: bool
    ratios: list[float] = dc_field(default_factory=list)
    # Termwise alternative: |f_{j,alpha}| <= D~ radius^-|alpha|
    termwise_bound: float = 0.0
    note: str = ""


def certify_decay(
    field: MaclaurinField,
    radius: float,
    samples: Sequence[float] | None = None,
    degree: int | None = None,
) -> DecayCertificate:
    """Certify uniform geometric decay of the coefficient masses.

    Polynomial fields are checked over all stored degrees with the bound
    from :func:`coef_bound_for_radius`.  Generator fields are checked up to
    ``degree`` and the tightest bound over the checked range is returned.
    Time-varying coefficients without a declared supremum are sampled at
    ``samples`` instead (an empirical, not certified, supremum).
    """
    if radius <= 0:
        raise ValueError(f"radius must be positive, got {radius}")
    if degree is None:
        if field.is_generator:
            raise ValueError("generator fields need an explicit check degree")
        degree = field.degree
    masses = []
    termwise = 0.0
    empirical = False
    for k in range(1, degree + 1):
        total = 0.0
        for alpha, coeff in field.terms_of_degree(k).items():
            sup = coeff.sup_abs()
            if sup is None:
                if not samples:
                    raise PreconditionError(
                        f"coefficient of {tuple(alpha)} is time-varying; pass sample times"
                    )
                sup = np.max(np.abs([coeff.evaluate(t) for t in samples]), axis=0)
                empirical = True
            total += float(np.sum(sup))
            termwise = max(termwise, float(np.max(sup)) * radius**k)
        masses.append(total)
    D = max((radius**k * a for k, a in enumerate(masses, start=1)), default=0.0)
    ratios = [radius**k * a / D if D > 0 else 0.0 for k, a in enumerate(masses, start=1)]
    valid = D > 0 and all(r <= 1.0 + 1e-12 for r in ratios)
    note = ""
    if D <= 0:
        note = "all coefficients vanish; the decay constant must be positive"
    elif empirical:
        note = "supremum over time estimated from samples"
    elif field.is_generator:
        note = f"checked up to degree {degree}"
    return DecayCertificate(radius, D, degree, valid, ratios, termwise, note)


@dataclass
class AssumptionReport:
    radius: float
    coef_bound: float
    decay_rate: float | None
    drift: float
    jacobian_diagonal: bool
    degree: int | None


def assumption_report(field: MaclaurinField, radius: float, degree: int | None = None) -> AssumptionReport:
    cert = certify_decay(field, radius, degree=degree)
    check = diagonal_decay_rate(field)
    J = field.jacobian_at_zero()
    return AssumptionReport(
        radius=radius,
        coef_bound=cert.coef_bound,
        decay_rate=check.rate,
        drift=drift_bound(field),
        jacobian_diagonal=bool(np.all(J == np.diag(np.diag(J)))),
        degree=field.degree,
    )


def polynomial_field(d: int, terms: Iterable[tuple[Sequence[int], Sequence[float]]], **kw) -> MaclaurinField:
    """Convenience constructor from ``(alpha, coeff)`` pairs, summing duplicates."""
    summed: dict[MultiIndex, np.ndarray] = {}
    for alpha, coeff in terms:
        key = MultiIndex(alpha)
        summed[key] = summed.get(key, np.zeros(d)) + np.asarray(coeff, dtype=float)
    return MaclaurinField(d, {a: v for a, v in summed.items() if np.any(v != 0)}, **kw)


def linear_field(A) -> MaclaurinField:
    """``f(x) = A x``."""
    A = np.asarray(A, dtype=float)
    d = A.shape[0]
    return polynomial_field(d, [(MultiIndex.unit(d, i), A[:, i]) for i in range(d)])

