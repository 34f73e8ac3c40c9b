import numpy as np
import pytest
from hypothesis import given, settings

from conftest import CORR, polys
from mvtransfer.trigmat import MatTrigPoly, adjoint, coeff_norm, make_filter, midpoint_grid
from mvtransfer.transfer import (
    EnumerationGuardError,
    InvarianceError,
    e1_spectral_projection,
    el_condition,
    fixed_space,
    invariance_bound,
    lawton_verdict,
    midpoint_grid_powers,
    pointwise_powers,
    stack_coeffs,
    transfer_apply,
    transfer_apply_pointwise,
    transfer_power,
    transition_matrix,
)
from mvtransfer.filters import random_qmf

RANDOM = make_filter(random_qmf(2, 2, seed=20240), 2)


def in_span(p, basis, tol=1e-9):
    K = max([p.max_abs_index()] + [b.max_abs_index() for b in basis])
    A = np.array([stack_coeffs(b, K) for b in basis]).T
    v = stack_coeffs(p, K)
    c, *_ = np.linalg.lstsq(A, v, rcond=None)
    return np.linalg.norm(A @ c - v) <= tol


def test_identity_is_fixed_for_qmf(haar, stretched, diag_haar):
    for m in (haar, stretched, diag_haar, RANDOM):
        eye = MatTrigPoly.identity(m.dim)
        assert coeff_norm(transfer_apply(m, eye) - eye) < 1e-14


def test_haar_on_exponential(haar):
    r = transfer_apply(haar, MatTrigPoly.scalar({1: 1.0}))
    assert coeff_norm(r - MatTrigPoly.scalar({0: 0.5, 1: 0.5})) < 1e-15


def test_zero_maps_to_zero(haar):
    assert transfer_apply(haar, MatTrigPoly.zero(1)).is_zero


def test_power_boundedness_on_identity(stretched, diag_haar):
    for m in (stretched, diag_haar, RANDOM):
        eye = MatTrigPoly.identity(m.dim)
        f = eye
        for _ in range(20):
            f = transfer_apply(m, f)
            assert coeff_norm(f - eye) <= 1e-14


def test_pointwise_identity_any_depth(stretched, diag_haar):
    for m in (stretched, diag_haar):
        for k in (0, 1, 5, 9):
            v = transfer_apply_pointwise(m, np.eye(m.dim), k, 0.3141)
            assert np.allclose(v, np.eye(m.dim), atol=1e-12)


def test_pointwise_depth_zero_is_identity_map(stretched):
    assert np.allclose(transfer_apply_pointwise(stretched, CORR, 0, 0.2), CORR(0.2))


def test_pointwise_matches_exact(stretched):
    rng = np.random.default_rng(3)
    f = MatTrigPoly(rng.normal(size=(7, 2, 2)) + 1j * rng.normal(size=(7, 2, 2)), -3)
    for k in range(5):
        exact = transfer_power(RANDOM, f, k)
        for x in rng.random(3):
            assert np.allclose(transfer_apply_pointwise(RANDOM, f, k, x), exact(x), atol=1e-10)


def test_pointwise_k1_on_64_points(haar):
    f = MatTrigPoly.scalar({-2: 1, 0: 0.3, 3: 2j})
    xs = midpoint_grid(64)
    vals = pointwise_powers(haar, f, xs, 1)[1]
    assert np.allclose(vals, transfer_apply(haar, f).eval_many(xs), atol=1e-12)


def test_pointwise_parallel_matches_serial(stretched):
    xs = midpoint_grid(24)
    a = pointwise_powers(stretched, CORR, xs, 6)
    b = pointwise_powers(stretched, CORR, xs, 6, workers=3)
    assert np.allclose(a, b, atol=1e-12)


def test_midpoint_grid_powers_matches_tree_walk(stretched):
    f = MatTrigPoly.scalar({-1: 1, 2: 0.5j})
    a = pointwise_powers(RANDOM, MatTrigPoly.identity(2) * 0.5 + MatTrigPoly.from_dict({1: [[0, 1], [0, 0]]}), midpoint_grid(8), 5)
    b = midpoint_grid_powers(RANDOM, MatTrigPoly.identity(2) * 0.5 + MatTrigPoly.from_dict({1: [[0, 1], [0, 0]]}), 8, range(6), block=32)
    assert np.allclose(a, b, atol=1e-12)
    a = pointwise_powers(stretched, f, midpoint_grid(8), 7)
    b = midpoint_grid_powers(stretched, f.eval_many, 8, range(8), block=64)
    assert np.allclose(a, b, atol=1e-12)


def test_enumeration_guard(haar):
    with pytest.raises(EnumerationGuardError):
        transfer_apply_pointwise(haar, 1.0, 25, 0.1)
    with pytest.raises(EnumerationGuardError):
        transfer_apply_pointwise(haar, 1.0, 3, 0.1, max_preimages=7)
    assert np.allclose(transfer_apply_pointwise(haar, 1.0, 3, 0.1, max_preimages=8), 1.0)


def test_haar_transition_matrix(haar):
    tm = transition_matrix(haar, 1)
    T = np.array([[0.5, 0, 0], [0.5, 1, 0.5], [0, 0, 0.5]])
    assert np.allclose(tm.matrix, T, atol=1e-15)
    assert np.allclose(np.sort(tm.eigenvalues.real), [0.5, 0.5, 1], atol=1e-10)
    assert len(tm.fixed_basis) == 1
    assert coeff_norm(tm.fixed_basis[0] - MatTrigPoly.identity(1)) < 1e-12


def test_transition_matrix_reproduces_transfer(stretched):
    tm = transition_matrix(stretched, 4)
    rng = np.random.default_rng(1)
    f = MatTrigPoly(rng.normal(size=(9, 1, 1)) + 0j, -4)
    assert coeff_norm(tm.apply(f) - transfer_apply(stretched, f)) < 1e-14


def test_invariance_bound(haar, stretched):
    assert invariance_bound(haar) == 1
    assert invariance_bound(stretched) == 3
    with pytest.raises(InvarianceError) as e:
        transition_matrix(stretched, 2)
    assert e.value.minimal == 3


def test_fixed_spaces(haar, stretched, diag_haar):
    fh = fixed_space(haar)
    assert len(fh) == 1 and lawton_verdict(fh, 1) == "orthogonal"
    fs = fixed_space(stretched, 3)
    assert len(fs) >= 2 and lawton_verdict(fs, 1) == "non-orthogonal"
    basis = [e.poly for e in fs]
    assert in_span(MatTrigPoly.identity(1), basis)
    assert in_span(CORR, basis)
    for e in fs:
        assert e.residual <= 1e-9 and e.hermitian
    fd = fixed_space(diag_haar)
    assert in_span(MatTrigPoly.identity(2), [e.poly for e in fd])
    assert lawton_verdict(fd, 2) is None


def test_fixed_space_normalization(stretched):
    for e in fixed_space(stretched):
        tr = np.trace(e.poly.coefficient(0)).real
        assert tr == pytest.approx(1.0) or (abs(tr) < 1e-12 and coeff_norm(e.poly) == pytest.approx(1.0))


def test_fixed_space_per_degree(stretched):
    dims = [len(fixed_space(stretched, K)) for K in (3, 4, 6)]
    assert dims == sorted(dims)


def test_el_condition_examples(haar, diag_haar):
    r = el_condition(haar)
    assert r.satisfied and r.l == 1 and np.allclose(np.abs(r.e1_basis[0]), [1])
    r = el_condition(diag_haar)
    assert r.satisfied and r.l == 1 and np.allclose(r.e1_basis[0], [1, 0])
    r = el_condition(make_filter(MatTrigPoly.identity(1), 2))
    assert not r.satisfied and r.l == 0 and r.e1_basis == ()


def test_el_condition_rejects_jordan_block():
    # m(0)/sqrt(2) = [[1, 1], [0, 1]] has eigenvalue 1 twice but one eigenvector
    m = make_filter(MatTrigPoly.constant(np.sqrt(2) * np.array([[1, 1], [0, 1]])), 2)
    assert not el_condition(m).satisfied


def test_spectral_projection(diag_haar):
    assert np.allclose(e1_spectral_projection(diag_haar), np.diag([1, 0]), atol=1e-12)
    P = e1_spectral_projection(RANDOM)
    assert np.allclose(P @ P, P, atol=1e-10)


@settings(max_examples=30, deadline=None)
@given(polys(2))
def test_adjoint_equivariance(f):
    assert coeff_norm(adjoint(transfer_apply(RANDOM, f)) - transfer_apply(RANDOM, adjoint(f))) < 1e-12


@settings(max_examples=30, deadline=None)
@given(polys(2, max_deg=2))
def test_positivity(f):
    g = adjoint(f) @ f  # pointwise PSD
    r = transfer_apply(RANDOM, g).eval_many(midpoint_grid(32))
    r = 0.5 * (r + np.conj(np.swapaxes(r, -1, -2)))
    assert np.min(np.linalg.eigvalsh(r)) >= -1e-10
