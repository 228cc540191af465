import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from carleman.bench import benchmark_1d, benchmark_vdp, vdp_field
from carleman.field import MaclaurinField, TimeVaryingCoefficient, linear_field, polynomial_field
from carleman.indexing import block_size, indices_of_degree, monomial_eval
from carleman.lifting import (
    FiniteSection,
    assemble_finite_section,
    build_block,
    check_block_norms,
    lift_initial,
    read_matrix_csv,
    schur_norm,
    structural_blocks,
    write_matrix_csv,
)
from carleman.sim import integrate_rhs

UNSTABLE_ORDER_FIVE = [[1, 0, -1, 0, 1], [0, 2, 0, -2, 0], [0, 0, 3, 0, -3], [0, 0, 0, 4, 0], [0, 0, 0, 0, 5]]


def brute_force_block(field, k, l, t=0.0):
    """Differentiate each monomial term by term and collect degree-l coefficients."""
    d = field.d
    rows, cols = indices_of_degree(d, k), indices_of_degree(d, l)
    col = {c: i for i, c in enumerate(cols)}
    out = np.zeros((len(rows), len(cols)))
    terms = field.terms(l - k + 1) if l - k + 1 >= 0 else {}
    for i, alpha in enumerate(rows):
        for j in range(d):
            if alpha[j] == 0:
                continue
            for gamma, coeff in terms.items():
                c = coeff.evaluate(t)[j]
                beta = tuple(a - (m == j) + g for m, (a, g) in enumerate(zip(alpha, gamma)))
                if sum(beta) == l and c:
                    out[i, col[beta]] += alpha[j] * c
    return out


def test_unstable_block_one_three():
    np.testing.assert_array_equal(build_block(benchmark_1d(1).field, 1, 3).entries, [[-1.0]])


def test_vdp_block_one_three():
    np.testing.assert_array_equal(build_block(vdp_field(0.5), 1, 3).entries, [[0, 0, 0, 0], [0, -0.5, 0, 0]])


def test_vdp_block_one_three_schur_norm():
    assert schur_norm(build_block(vdp_field(0.5), 1, 3).entries) == 0.5


def test_blocks_below_subdiagonal_vanish():
    f = vdp_field(0.5)
    for k in range(3, 7):
        for l in range(1, k - 1):
            assert not np.any(build_block(f, k, l).entries)


def test_unstable_section_order_five():
    sec = assemble_finite_section(benchmark_1d(1).field, 5)
    np.testing.assert_array_equal(sec.matrix(), UNSTABLE_ORDER_FIVE)
    assert sec.structure == "upper"


def test_vdp_nonzero_pattern():
    sec = assemble_finite_section(vdp_field(0.5), 4)
    nz = {(k, l) for k in range(1, 5) for l in range(1, 5) if np.any(sec.block(k, l))}
    assert nz == {(k, k) for k in range(1, 5)} | {(k, k + 2) for k in range(1, 3)}


def test_linear_field_is_block_diagonal():
    sec = assemble_finite_section(linear_field([[-1.0, 0.3], [0.2, -2.0]]), 4)
    for k in range(1, 5):
        for l in range(1, 5):
            if k != l:
                assert not np.any(sec.block(k, l))


def test_lift_initial_examples():
    np.testing.assert_allclose(lift_initial([0.5], 3).data, [0.5, 0.25, 0.125])
    z = lift_initial([0.7, -1.3], 4)
    for k in range(1, 5):
        np.testing.assert_allclose(z.block(k), [0.7 ** (k - i) * (-1.3) ** i for i in range(k + 1)])
    assert not np.any(lift_initial([0.0, 0.0], 5).data)


def test_schur_norm_examples():
    assert schur_norm([[1, -2], [3, 4]]) == 7
    assert schur_norm(np.eye(6)) == 1


@settings(max_examples=60)
@given(
    arrays(float, (3, 4), elements=st.floats(-5, 5)),
    arrays(float, (4, 2), elements=st.floats(-5, 5)),
)
def test_schur_norm_submultiplicative(C, D):
    assert schur_norm(C @ D) <= schur_norm(C) * schur_norm(D) * (1 + 1e-12) + 1e-12


def test_block_norm_check_examples():
    rep = check_block_norms(benchmark_1d(1).field, 1.0, 1.0, 12, 12)
    assert rep.ok and rep.worst_ratio <= 1.0
    rep = check_block_norms(vdp_field(0.5), 1.0, 2.5, 10, 10)
    assert rep.ok and rep.worst_ratio <= 1.0
    rep = check_block_norms(MaclaurinField(2, {}), 1.0, 1.0, 4, 4)
    assert rep.ok and rep.worst_ratio == 0.0


def test_drift_block_bound_uses_row_degree():
    # The subdiagonal block mapping degree k-1 into degree k has Schur norm
    # k * nu in one dimension, so the factor is the target degree.
    nu = 0.3
    f = polynomial_field(1, [((0,), [nu]), ((1,), [-1.0])])
    for k in range(2, 9):
        assert schur_norm(build_block(f, k, k - 1).entries) == pytest.approx(k * nu)
    rep = check_block_norms(f, 1.0, 1.0, 8, 8)
    assert rep.ok and rep.drift_worst_ratio == pytest.approx(1.0)
    # the bound with the source degree as factor is exceeded
    assert schur_norm(build_block(f, 3, 2).entries) > nu * 2


def test_drift_section_structure_and_forcing():
    f = polynomial_field(2, [((0, 0), [0.01, -0.02]), ((1, 0), [-1.0, 0.0]), ((0, 1), [0.0, -1.0])])
    sec = assemble_finite_section(f, 3)
    assert sec.structure == "subdiagonal"
    assert np.any(sec.block(2, 1)) and np.any(sec.block(3, 2))
    b = sec.forcing()
    np.testing.assert_allclose(b[:2], [0.01, -0.02])
    assert not np.any(b[2:])
    assert assemble_finite_section(vdp_field(0.5), 3).forcing() is None


@pytest.mark.parametrize("d", [1, 2, 3])
def test_structural_zeros_exhaustive(d):
    rng = np.random.default_rng(d)
    for L in (1, 2, 3):
        terms = []
        for deg in range(1, L + 1):
            for alpha in indices_of_degree(d, deg):
                terms.append((alpha, rng.normal(size=d)))
        f = polynomial_field(d, terms)
        N = 10 if d < 3 else 6
        sec = assemble_finite_section(f, N)
        for k in range(1, N + 1):
            for l in range(1, N + 1):
                if not (k <= l <= k + L - 1):
                    assert not np.any(sec.block(k, l)), (k, l)


@pytest.mark.parametrize("d", [1, 2, 3])
def test_blocks_match_brute_force(d):
    rng = np.random.default_rng(10 + d)
    terms = [(a, rng.normal(size=d)) for deg in (1, 2, 3) for a in indices_of_degree(d, deg)]
    f = polynomial_field(d, terms)
    sec = assemble_finite_section(f, 5)
    for k in range(1, 6):
        for l in range(k, 6):
            ref = brute_force_block(f, k, l)
            np.testing.assert_allclose(build_block(f, k, l).entries, ref, atol=1e-13)
            np.testing.assert_allclose(sec.block(k, l), ref, atol=1e-13)


def test_vdp_blocks_shape():
    f = vdp_field(0.5)
    for k in range(1, 6):
        for l in range(1, 6):
            assert build_block(f, k, l).entries.shape == (block_size(2, k), block_size(2, l))


def test_time_varying_section_rebuilds():
    f = MaclaurinField(1, {(1,): TimeVaryingCoefficient(lambda t: [-1.0 - t], sup=[3.0]), (2,): [0.5]})
    sec = assemble_finite_section(f, 3)
    assert not sec.constant
    assert sec.matrix(0.0)[0, 0] == -1.0 and sec.matrix(2.0)[0, 0] == -3.0


def test_constant_matrix_is_cached_and_read_only():
    sec = assemble_finite_section(vdp_field(0.5), 3)
    assert sec.matrix() is sec.matrix(5.0)
    with pytest.raises(ValueError):
        sec.matrix()[0, 0] = 1.0


def test_from_matrix_detects_structure():
    sec = FiniteSection.from_matrix(np.array(UNSTABLE_ORDER_FIVE, dtype=float), 1, 5)
    assert sec.structure == "upper" and (1, 3) in sec.nonzero_blocks
    assert set(structural_blocks(benchmark_1d(1).field, 5)) == set(sec.nonzero_blocks)


def test_matrix_csv_round_trip(tmp_path):
    sec = assemble_finite_section(vdp_field(0.5), 3)
    p = tmp_path / "m.csv"
    write_matrix_csv(sec, p)
    header, M = read_matrix_csv(p)
    assert header == ["k=1:0..1", "k=2:2..4", "k=3:5..8"]
    np.testing.assert_array_equal(M, sec.matrix())


def test_lifting_consistency_along_vdp_trajectory():
    # d/dt x^alpha by central differences versus the lifted rows applied to
    # the exact monomials; every term of the cubic field is inside the rows
    # up to degree N - 2.
    bench = benchmark_vdp(0.5)
    N, h_fd = 6, 1e-5
    sec = assemble_finite_section(bench.field, N)
    A = sec.matrix()
    traj = integrate_rhs(bench.rhs, [0.8, -0.4], 0.3, h_fd)
    for i in (5000, 15000, 25000):
        xm, x, xp = traj.states[i - 1], traj.states[i], traj.states[i + 1]
        z = lift_initial(x, N).data
        lifted = A @ z
        for k in range(1, 5):
            sl = sec.block_slice(k)
            for r, alpha in enumerate(indices_of_degree(2, k)):
                fd = (monomial_eval(xp, alpha) - monomial_eval(xm, alpha)) / (2 * h_fd)
                assert abs(fd - lifted[sl][r]) <= 1e-4 * max(1.0, abs(lifted[sl][r]))
