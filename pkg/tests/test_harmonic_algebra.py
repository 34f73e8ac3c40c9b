import numpy as np
import pytest

from conftest import CORR
from mvtransfer.harmonic_algebra import (
    NonHarmonicWarning,
    UnitNotBoundedBelow,
    cesaro_average,
    domination_check,
    monotone_witness,
    orthogonality_table,
    projection_check,
    star_product,
    star_product_cesaro,
)
from mvtransfer.transfer import fixed_space, transfer_apply
from mvtransfer.trigmat import MatTrigPoly, coeff_norm, midpoint_grid

ONE = MatTrigPoly.identity(1)


def test_cesaro_identity(stretched, diag_haar):
    for m in (stretched, diag_haar):
        eye = MatTrigPoly.identity(m.dim)
        for n in (1, 7, 10**6):
            assert coeff_norm(cesaro_average(m, eye, n) - eye) < 1e-12


def test_cesaro_haar_cosine(haar):
    # R f -> f(0) for Haar, so the mean tends to the constant 2; the
    # oscillating part decays like 2^-n
    f = MatTrigPoly.scalar({1: 1, -1: 1})
    for n in (1, 4, 16, 1000, 2**30):
        c = cesaro_average(haar, f, n)
        assert coeff_norm(c - 2 * ONE) <= 4 / n + 1e-12
    g = f
    for n in range(1, 12):
        g = transfer_apply(haar, g)
        assert abs(g.coefficient(1)[0, 0] - 2.0**-n) < 1e-15


def test_cesaro_fixed_point(stretched):
    for e in fixed_space(stretched):
        assert coeff_norm(cesaro_average(stretched, e.poly, 12345) - e.poly) < 1e-10


def test_cesaro_long_matches_direct(stretched):
    f = CORR @ CORR
    n = 5000
    acc = MatTrigPoly.zero(1)
    g = f
    for _ in range(n):
        acc = acc + g
        g = transfer_apply(stretched, g)
    assert coeff_norm(cesaro_average(stretched, f, n) - acc / n) < 1e-11


def test_star_haar_unit(haar):
    r = star_product(haar, ONE, ONE, ONE)
    assert r.depth_used == 1 and r.converged
    assert np.allclose(r.values, 1, atol=1e-14)


def test_star_half(haar):
    r = star_product(haar, ONE / 2, ONE / 2, ONE)
    assert np.allclose(r.values, 0.25, atol=1e-14)
    rep = projection_check(haar, ONE / 2, ONE)
    assert not rep.is_projection and rep.star_deviation == pytest.approx(0.25)


def test_projection_trivial(haar):
    assert projection_check(haar, ONE, ONE).is_projection
    assert projection_check(haar, MatTrigPoly.zero(1), ONE).is_projection


def test_unit_law(stretched):
    for e in fixed_space(stretched):
        for r in (star_product(stretched, ONE, e.poly, ONE), star_product(stretched, e.poly, ONE, ONE)):
            assert np.max(np.abs(r.values[:, 0, 0] - e.poly.eval_many(r.points)[:, 0, 0])) < 1e-12


def test_star_corr_square(stretched):
    # CORR * CORR = 3 CORR; the increments halve per level
    r = star_product(stretched, CORR, CORR, ONE, depth=16, tol=0, grid_size=8)
    err = np.max(np.abs(r.values[:, 0, 0] - 3 * CORR.eval_many(r.points)[:, 0, 0]))
    assert err < 5e-5
    inc = np.array(r.increments[-6:])
    assert np.all(inc[1:] <= 0.51 * inc[:-1])


def test_star_adjoint_symmetry(stretched):
    basis = [e.poly for e in fixed_space(stretched)]
    a, b = basis[0], basis[-1] * 0.5 + basis[0]
    ab = star_product(stretched, a, b, ONE, depth=10, grid_size=8).values
    ba = star_product(stretched, b, a, ONE, depth=10, grid_size=8).values
    assert np.allclose(ab, np.conj(np.swapaxes(ba, -1, -2)), atol=1e-12)


def test_star_matrix_case(diag_haar):
    eye = MatTrigPoly.identity(2)
    r = star_product(diag_haar, eye, eye, eye, grid_size=16)
    assert np.allclose(r.values, np.eye(2), atol=1e-13)


def test_cesaro_and_iterated_agree_roughly(stretched):
    it = star_product(stretched, CORR, CORR, ONE, depth=16, tol=0, grid_size=8).values[:, 0, 0]
    ce = star_product_cesaro(stretched, CORR, CORR, ONE, grid_size=8)[:, 0, 0]
    assert np.max(np.abs(it - ce)) < 5e-5


def test_unit_not_bounded_below(stretched):
    with pytest.raises(UnitNotBoundedBelow):
        star_product(stretched, ONE, ONE, CORR)


def test_non_harmonic_input_flagged(haar):
    f = MatTrigPoly.scalar({0: 1, 1: 0.5, -1: 0.5})
    with pytest.warns(NonHarmonicWarning):
        r = star_product(haar, f, ONE, ONE, depth=3)
    assert not r.inputs_harmonic


def test_monotone(stretched):
    for e in fixed_space(stretched):
        rep = monotone_witness(stretched, e.poly, ONE, depth=8, grid_size=16)
        assert rep.monotone


def test_orthogonality_tables(haar):
    t = orthogonality_table(haar, [ONE], ONE)
    assert t.norms[0, 0] == pytest.approx(1.0) and t.diagonal_deviation[0] < 1e-12
    t = orthogonality_table(haar, [MatTrigPoly.zero(1), ONE], ONE)
    assert t.norms[0, 1] == 0 and t.norms[1, 0] == 0


def test_orthogonality_reproducible(stretched):
    basis = [e.poly for e in fixed_space(stretched)]
    a = orthogonality_table(stretched, basis, ONE, depth=8, grid_size=8).norms
    b = orthogonality_table(stretched, basis, ONE, depth=8, grid_size=8).norms
    assert np.array_equal(a, b)


def test_domination():
    assert domination_check(CORR, CORR) == pytest.approx(1.0)
    assert domination_check(MatTrigPoly.zero(1), CORR) == 0.0
    assert domination_check(ONE, CORR) is None
    assert domination_check(ONE * 0.5, ONE * 2) == pytest.approx(0.25)


def test_domination_matrix():
    h = MatTrigPoly.constant(np.diag([1.0, 0.0]))
    assert domination_check(MatTrigPoly.constant(np.diag([3.0, 0.0])), h) == pytest.approx(3.0)
    assert domination_check(MatTrigPoly.constant([[0, 1], [1, 0]]), h) is None
