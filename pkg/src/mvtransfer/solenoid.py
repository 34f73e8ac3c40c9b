"""Path measures on the solenoid: words, cylinders, martingales, atoms.

A word ``(w_1, ..., w_n)`` over a base point ``x`` selects the backward
orbit ``x_0 = x``, ``x_k = (x_{k-1} + w_k) / N``.  The cylinder it spans has
operator mass ``N^{-n} C^* h(x_n) C`` with ``C = m(x_n) ... m(x_1)``.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .cascade import infinite_product_many
from .transfer import DEFAULT_MAX_PREIMAGES, EnumerationGuardError, transfer_apply
from .trigmat import Filter, MatTrigPoly, as_matrix_function, coeff_norm, midpoint_grid

ZERO_MASS = 1e-24


class PathOutsideSupport(ValueError):
    """The word has zero trace mass, so the martingale ratio is undefined."""


@dataclass(frozen=True, eq=False)
class Word:
    base: float | Fraction
    digits: tuple[int, ...]
    anchors: tuple[float, ...]
    cocycle: np.ndarray
    dilation: int
    offset: int = 0  # g_n = sum_k w_k N^{k-1}, so that x_n = (x + g_n) / N^n

    @property
    def depth(self) -> int:
        return len(self.digits)


def _anchor(base, offset: int, N: int, n: int) -> float:
    # recomputed from scratch at each depth; exact when the base is rational
    if isinstance(base, (int, Fraction)):
        return float((Fraction(base) + offset) / N**n)
    # int / int division rounds correctly even when N**n exceeds float range
    return offset / N**n + base * float(Fraction(1, N**n))


def make_word(m: Filter, x, digits=()) -> Word:
    w = Word(x if isinstance(x, Fraction) else float(x), (), (float(x),), np.eye(m.dim, dtype=complex), m.dilation)
    for digit in digits:
        w = extend_word(w, digit, m)
    return w


def extend_word(w: Word, digit: int, m: Filter) -> Word:
    N = m.dilation
    if not 0 <= int(digit) < N:
        raise ValueError(f"digit {digit} outside 0..{N - 1}")
    digits = w.digits + (int(digit),)
    n = len(digits)
    offset = w.offset + int(digit) * N ** (n - 1)
    xn = _anchor(w.base, offset, N, n)
    return Word(w.base, digits, w.anchors + (xn,), m.poly(xn) @ w.cocycle, N, offset)


def enumerate_words(m: Filter, x, depth: int):
    """All words of length ``depth`` in lexicographic digit order."""
    for digits in itertools.product(range(m.dilation), repeat=depth):
        yield make_word(m, x, digits)


# cylinders ---------------------------------------------------------------------


@dataclass(frozen=True)
class CylinderMass:
    word: Word
    mass: np.ndarray
    trace: float
    harmonic: bool


def _is_harmonic(m: Filter, h: MatTrigPoly, tol: float = 1e-8) -> bool:
    return coeff_norm(transfer_apply(m, h) - h) <= tol


def _sandwich(C: np.ndarray, H: np.ndarray) -> np.ndarray:
    return np.conj(C.T) @ H @ C


def cylinder_measure(m: Filter, h: MatTrigPoly, w: Word, *, check: bool = True) -> CylinderMass:
    """``N^{-n} C^* h(x_n) C``; ``harmonic`` flags whether additivity can be expected."""
    mass = _sandwich(w.cocycle, h(w.anchors[-1])) / float(m.dilation) ** w.depth
    mass = 0.5 * (mass + np.conj(mass.T))
    ok = _is_harmonic(m, h) if check else True
    return CylinderMass(w, mass, float(np.trace(mass).real), ok)


def martingale_value(m: Filter, h: MatTrigPoly, h0: MatTrigPoly, w: Word, zero_tol: float = ZERO_MASS) -> np.ndarray:
    """``C^* h0(x_n) C / Tr(C^* h(x_n) C)`` at the word's last anchor."""
    xn = w.anchors[-1]
    den = float(np.trace(_sandwich(w.cocycle, h(xn))).real)
    if den <= zero_tol:
        raise PathOutsideSupport(f"path outside support: trace mass {den:.3g} at depth {w.depth}")
    return _sandwich(w.cocycle, h0(xn)) / den


@dataclass(frozen=True)
class MartingaleTrace:
    word: Word
    values: tuple[np.ndarray, ...]  # k = 0..depth
    smallest_singular: tuple[float, ...]  # of N^{-k/2} m^(k), per depth


def martingale_trace(m: Filter, h: MatTrigPoly, h0: MatTrigPoly, w: Word) -> MartingaleTrace:
    vals = []
    sings = []
    for k in range(w.depth + 1):
        sub = make_word(m, w.base, w.digits[:k])
        vals.append(martingale_value(m, h, h0, sub))
        s = np.linalg.svd(sub.cocycle / math.sqrt(m.dilation) ** k, compute_uv=False)
        sings.append(float(s[-1]))
    return MartingaleTrace(w, tuple(vals), tuple(sings))


# sampling ----------------------------------------------------------------------


def path_rng(seed: int, path_index: int = 0) -> np.random.Generator:
    """PCG64 stream for path ``path_index``: ``SeedSequence(seed, spawn_key=(path_index,))``."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(path_index,))))


@dataclass(frozen=True)
class SampledPath:
    word: Word
    fallback: bool  # a zero-mass parent forced uniform digits somewhere
    fallback_levels: tuple[int, ...]


def sample_path(
    m: Filter, h: MatTrigPoly, x, depth: int, seed: int, path_index: int = 0, zero_tol: float = ZERO_MASS
) -> SampledPath:
    """Digits drawn with probability proportional to the child cylinder traces."""
    rng = path_rng(seed, path_index)
    w = make_word(m, x)
    N = m.dilation
    fallback = []
    for level in range(depth):
        kids = [extend_word(w, i, m) for i in range(N)]
        t = np.array([np.trace(_sandwich(c.cocycle, h(c.anchors[-1]))).real for c in kids])
        t = np.clip(t, 0.0, None)
        total = t.sum()
        if total <= zero_tol:
            fallback.append(level)
            p = np.full(N, 1.0 / N)
        else:
            p = t / total
        w = kids[int(rng.choice(N, p=p))]
    return SampledPath(w, bool(fallback), tuple(fallback))


def uniform_word(m: Filter, x, depth: int, seed: int, path_index: int = 0) -> Word:
    """Word with i.i.d. uniform digits."""
    rng = path_rng(seed, path_index)
    return make_word(m, x, rng.integers(0, m.dilation, size=depth).tolist())


# atoms -------------------------------------------------------------------------


def atom_mass(m: Filter, x: float, g: int, tol: float = 1e-12) -> np.ndarray:
    """``P(x+g)^* P(x+g)``, the point mass of the path ending in the lattice point ``g``."""
    P, _ = infinite_product_many(m, [float(x) + g], tol)
    return np.conj(P[0].T) @ P[0]


@dataclass(frozen=True)
class AtomReport:
    atom_sum: np.ndarray
    cylinder: np.ndarray
    gap: float


def atoms_vs_cylinder(m: Filter, h: MatTrigPoly, w: Word, truncation: int, tol: float = 1e-12) -> AtomReport:
    """Sum the atoms ``g = g_n + N^n t``, ``|t| <= truncation``, lying in the cylinder of ``w``."""
    Nn = m.dilation**w.depth
    t = np.arange(-truncation, truncation + 1)
    xs = float(w.base) + w.offset + Nn * t
    P, _ = infinite_product_many(m, xs, tol)
    atoms = np.conj(np.swapaxes(P, -1, -2)) @ P
    # add small terms first
    order = np.argsort(np.abs(t), kind="stable")[::-1]
    total = atoms[order].sum(axis=0)
    cyl = cylinder_measure(m, h, w).mass
    return AtomReport(total, cyl, float(np.linalg.norm(total - cyl, 2)))


# level inner products ----------------------------------------------------------


def _cocycle_many(m: Filter, ys: np.ndarray, k: int) -> np.ndarray:
    """``m^(k)(y) = m(y) m(ry) ... m(r^{k-1} y)`` for each ``y``."""
    d = m.dim
    out = np.broadcast_to(np.eye(d, dtype=complex), ys.shape + (d, d)).copy()
    N = m.dilation
    for i in range(k):
        out = out @ m.poly.eval_many(np.mod(ys * N**i, 1.0))
    return out


def level_inner_product(
    m: Filter, h, F, G, k: int, grid_size: int = 512, method: str = "double", max_preimages: int | None = None
) -> complex:
    """``int <m^(k) F, h m^(k) G>`` for sections ``F, G`` given as functions of the level-``k`` variable ``y``.

    ``method="double"`` averages over a midpoint grid in ``x`` and the
    ``N**k`` preimages ``y = (x + j) / N**k`` of each point; ``"single"``
    integrates over a midpoint grid in ``y`` directly, which is equivalent
    by strong invariance of Lebesgue measure.
    """
    N = m.dilation
    d = m.dim
    if method == "double":
        limit = DEFAULT_MAX_PREIMAGES if max_preimages is None else max_preimages
        if N**k * grid_size > limit:
            raise EnumerationGuardError(f"{grid_size} * {N}**{k} points exceed the guard {limit}")
        xs = midpoint_grid(grid_size)
        ys = ((xs[:, None] + np.arange(N**k)[None, :]) / N**k).ravel()
    elif method == "single":
        ys = midpoint_grid(grid_size)
    else:
        raise ValueError(f"unknown method {method!r}")
    C = _cocycle_many(m, ys, k)
    a = C @ as_matrix_function(F, (d, 1))(ys)
    b = C @ as_matrix_function(G, (d, 1))(ys)
    hv = as_matrix_function(h, (d, d))(ys)
    vals = np.einsum("nia,nij,nja->n", np.conj(a), hv, b)
    return complex(vals.mean())


def inner_product_level(
    m: Filter, h, f, g, k: int, grid_size: int = 512, method: str = "double", max_preimages: int | None = None
) -> complex:
    """``<f o theta_k, g o theta_k>_k``: base-point sections ``f, g`` pulled back by ``r^k``.

    Independent of ``k`` whenever ``R h = h``.
    """
    N = m.dilation
    d = m.dim
    fa = as_matrix_function(f, (d, 1))
    ga = as_matrix_function(g, (d, 1))

    def F(ys):
        return fa(np.mod(ys * N**k, 1.0))

    def G(ys):
        return ga(np.mod(ys * N**k, 1.0))

    return level_inner_product(m, h, F, G, k, grid_size, method, max_preimages)


def isometry_gap(m: Filter, h, f, g, k: int, grid_size: int = 512) -> float:
    """``|<(m o r^{k-1}) f, (m o r^{k-1}) g>_{k-1} - <f, g>_k|`` for level-``k`` sections, both by double sums."""
    if k < 1:
        raise ValueError("k must be >= 1")
    N = m.dilation
    d = m.dim
    fa = as_matrix_function(f, (d, 1))
    ga = as_matrix_function(g, (d, 1))

    def mf(ys):
        return m.poly.eval_many(np.mod(ys * N ** (k - 1), 1.0)) @ fa(ys)

    def mg(ys):
        return m.poly.eval_many(np.mod(ys * N ** (k - 1), 1.0)) @ ga(ys)

    lhs = level_inner_product(m, h, mf, mg, k - 1, grid_size)
    rhs = level_inner_product(m, h, fa, ga, k, grid_size)
    return abs(lhs - rhs)
