import math
from fractions import Fraction

import numpy as np
import pytest

from conftest import CORR
from mvtransfer.solenoid import (
    PathOutsideSupport,
    atom_mass,
    atoms_vs_cylinder,
    cylinder_measure,
    enumerate_words,
    extend_word,
    inner_product_level,
    isometry_gap,
    make_word,
    martingale_trace,
    martingale_value,
    sample_path,
    uniform_word,
)
from mvtransfer.trigmat import MatTrigPoly, make_filter

ONE = MatTrigPoly.identity(1)
EYE2 = MatTrigPoly.identity(2)


def test_word_examples(haar):
    w = make_word(haar, 0.0, (0, 0))
    assert w.anchors == (0.0, 0.0, 0.0) and w.cocycle[0, 0] == pytest.approx(2.0)
    w = make_word(haar, 0.0, (1, 0))
    assert w.anchors == (0.0, 0.5, 0.25) and abs(w.cocycle[0, 0]) < 1e-15
    assert np.array_equal(make_word(haar, 0.3).cocycle, np.eye(1))


def test_word_extension_law(diag_haar):
    w = make_word(diag_haar, 0.17, (1, 0, 1))
    w2 = extend_word(w, 1, diag_haar)
    assert np.allclose(w2.cocycle, diag_haar.poly(w2.anchors[-1]) @ w.cocycle)
    for k in range(1, len(w2.anchors)):
        assert abs((2 * w2.anchors[k]) % 1 - w2.anchors[k - 1]) < 1e-14
    with pytest.raises(ValueError):
        extend_word(w, 2, diag_haar)


def test_exact_dyadic_anchors(haar):
    w = make_word(haar, Fraction(1, 3), (1, 1, 0, 1))
    assert w.anchors[-1] == float((Fraction(1, 3) + w.offset) / 16)


def test_cylinder_examples(haar):
    assert cylinder_measure(haar, ONE, make_word(haar, 0.0, (0,))).mass[0, 0] == pytest.approx(1.0)
    assert cylinder_measure(haar, ONE, make_word(haar, 0.0, (1,))).mass[0, 0] == pytest.approx(0.0, abs=1e-30)
    assert cylinder_measure(haar, CORR, make_word(haar, 0.2)).mass[0, 0] == pytest.approx(CORR(0.2)[0, 0].real)


def test_cylinder_flags_non_harmonic(haar):
    assert not cylinder_measure(haar, CORR, make_word(haar, 0.2)).harmonic


def test_trace_additivity(stretched):
    for w in enumerate_words(stretched, 0.37, 4):
        parent = cylinder_measure(stretched, CORR, w).trace
        kids = sum(cylinder_measure(stretched, CORR, extend_word(w, i, stretched)).trace for i in range(2))
        assert kids == pytest.approx(parent, abs=1e-12)


def test_martingale_examples(haar, stretched):
    w = make_word(stretched, 0.3, (0, 1, 1))
    assert martingale_value(stretched, CORR, CORR, w)[0, 0] == pytest.approx(1.0)
    v = martingale_value(haar, CORR, ONE, make_word(haar, 0.2))
    assert v[0, 0] == pytest.approx(1 / CORR(0.2)[0, 0].real)
    with pytest.raises(PathOutsideSupport):
        martingale_value(haar, ONE, ONE, make_word(haar, 0.0, (1,)))


def test_martingale_trace_one(diag_haar):
    w = uniform_word(diag_haar, 0.2, 12, seed=1)
    tr = martingale_trace(diag_haar, EYE2, EYE2, w)
    assert all(np.trace(v).real == pytest.approx(1.0) for v in tr.values)
    assert len(tr.smallest_singular) == 13


def test_sample_path_haar_zero(haar):
    sp = sample_path(haar, ONE, 0.0, 20, seed=3)
    assert sp.word.digits == (0,) * 20 and not sp.fallback


def test_sample_path_uniform_filter():
    m = make_filter(MatTrigPoly.identity(1), 2)
    sp = sample_path(m, ONE, 0.1, 10_000, seed=11)
    assert abs(np.mean(np.array(sp.word.digits) == 0) - 0.5) <= 0.02


def test_sample_path_deterministic(stretched):
    a = sample_path(stretched, CORR, 0.2, 30, seed=5, path_index=2)
    b = sample_path(stretched, CORR, 0.2, 30, seed=5, path_index=2)
    assert a.word.digits == b.word.digits and a.fallback == b.fallback
    m = make_filter(MatTrigPoly.identity(1), 2)
    a = sample_path(m, ONE, 0.2, 30, seed=5, path_index=2)
    b = sample_path(m, ONE, 0.2, 30, seed=5, path_index=2)
    c = sample_path(m, ONE, 0.2, 30, seed=5, path_index=3)
    assert a.word.digits == b.word.digits and a.word.digits != c.word.digits


def test_sample_path_fallback(haar):
    # every child of the base point 1/3 under the zero harmonic has zero mass
    sp = sample_path(haar, MatTrigPoly.zero(1), 1 / 3, 3, seed=0)
    assert sp.fallback and sp.fallback_levels == (0, 1, 2)


def test_atoms(haar, diag_haar):
    assert atom_mass(haar, 0.0, 0)[0, 0] == pytest.approx(1.0)
    assert abs(atom_mass(haar, 0.0, 1)[0, 0]) < 1e-20
    assert np.allclose(atom_mass(diag_haar, 0.0, 0), np.diag([1, 0]), atol=1e-9)


def test_atoms_vs_cylinder_decreasing(haar):
    w = make_word(haar, 0.3, (1, 0))
    gaps = [atoms_vs_cylinder(haar, ONE, w, T).gap for T in (5, 50, 500)]
    assert gaps[0] > gaps[1] > gaps[2] and gaps[2] < 1e-3


def test_inner_product_base(haar):
    e1 = MatTrigPoly.constant([[1.0]])
    assert inner_product_level(haar, ONE, e1, e1, 0) == pytest.approx(1.0)


def test_inner_product_level_independence(stretched):
    f = MatTrigPoly.scalar({0: 1, 1: 0.3j})
    g = MatTrigPoly.scalar({-1: 0.2, 2: 1})
    vals = [inner_product_level(stretched, CORR, f, g, k, 128) for k in range(4)]
    assert max(abs(v - vals[0]) for v in vals) < 1e-10
    single = inner_product_level(stretched, CORR, f, g, 3, 512, method="single")
    assert abs(single - vals[0]) < 1e-10


def test_isometry(diag_haar):
    f = MatTrigPoly.from_dict({0: [[1], [0]], 1: [[0], [1j]]})
    g = MatTrigPoly.from_dict({0: [[1], [2]], -1: [[0.5], [0]]})
    assert isometry_gap(diag_haar, EYE2, f, g, 2, 512) < 1e-10
