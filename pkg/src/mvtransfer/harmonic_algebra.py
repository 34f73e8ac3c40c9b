"""Algebra of harmonic maps: Cesaro averages and the star product.

The product of two harmonic maps relative to a positive harmonic unit ``h``
is ``h1 * h2 = lim_k R^k(h1 h^{-1} h2)``.  Since ``h^{-1}`` is not a
polynomial the limit is evaluated pointwise on a midpoint grid.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .transfer import (
    invariance_bound,
    midpoint_grid_powers,
    positivity_floor,
    stack_coeffs,
    transfer_apply,
    transition_matrix,
    unstack_coeffs,
)
from .trigmat import (
    DimensionError,
    Filter,
    MatTrigPoly,
    coeff_norm,
    grid_project,
    hermitian_defect,
    interpolate_midpoint,
    midpoint_grid,
    sup_norm_on_grid,
)

FLOOR_TOL = 1e-6
HARMONIC_TOL = 1e-8
DEFAULT_DEPTH = 14
DEFAULT_GRID = 256


class UnitNotBoundedBelow(ValueError):
    """The harmonic unit is (numerically) singular somewhere on the grid."""


class NonHarmonicWarning(UserWarning):
    pass


# Cesaro averages ---------------------------------------------------------------


def _mean_of_powers(T: np.ndarray, v: np.ndarray, n: int, tol: float = 1e-9) -> np.ndarray:
    """``(1/n) sum_{i < n} T^i v`` for a power-bounded ``T``.

    Short sums are iterated.  Long ones split ``T`` (ordered Schur form plus
    a Sylvester solve) into its unit-circle part, whose eigenvalues are
    snapped to modulus one and averaged in closed form, and a contracting
    part summed as ``(I - A)^{-1} (I - A^n)``.  Repeated squaring is avoided
    because it amplifies eigenvalue round-off by a factor ``n``.
    """
    if n <= 4096:
        acc = np.zeros_like(v)
        w = v
        for _ in range(n):
            acc = acc + w
            w = T @ w
        return acc / n
    size = T.shape[0]
    S, Q, k = scipy.linalg.schur(T.astype(complex), output="complex", sort=lambda z: abs(z) >= 1 - 1e-6)
    T11, T12, T22 = S[:k, :k], S[:k, k:], S[k:, k:]
    Y = scipy.linalg.solve_sylvester(T11, -T22, -T12) if 0 < k < size else np.zeros((k, size - k))
    w = np.conj(Q.T) @ v
    w1 = w[:k] - Y @ w[k:]
    w2 = w[k:]
    if k:
        lam, V = np.linalg.eig(T11)
        mu = lam / np.abs(lam)
        near = np.abs(lam - 1) <= tol
        safe = np.where(near, 0.5, mu)
        weight = np.where(near, 1.0, (1 - safe**n) / (n * (1 - safe)))
        w1 = V @ (weight * np.linalg.solve(V, w1))
    if k < size:
        w2 = np.linalg.solve(np.eye(size - k) - T22, w2 - np.linalg.matrix_power(T22, n) @ w2) / n
    return Q @ np.concatenate([w1 + Y @ w2, w2])


def cesaro_average(m: Filter, f: MatTrigPoly, n_terms: int) -> MatTrigPoly:
    """``(1/n) sum_{j<n} R^j f``, coefficient-exact.

    ``R`` is applied directly until the support of ``R^j f`` fits in the
    invariant window ``[-K, K]``; the remaining terms are summed with the
    transition matrix, so very large ``n_terms`` are cheap.
    """
    if n_terms < 1:
        raise ValueError("n_terms must be >= 1")
    if f.shape != m.poly.shape:
        raise DimensionError(f"filter is {m.poly.shape}, argument is {f.shape}")
    K = invariance_bound(m)
    total = MatTrigPoly.zero(*f.shape)
    g = f
    j = 0
    while j < n_terms and (not g.is_zero and g.max_abs_index() > K):
        total = total + g
        g = transfer_apply(m, g)
        j += 1
    total = total / n_terms
    rest = n_terms - j
    if rest and not g.is_zero:
        T = transition_matrix(m, K).matrix
        s = _mean_of_powers(T, stack_coeffs(g, K), rest)
        total = total + unstack_coeffs(s, K, m.dim) * (rest / n_terms)
    return total


# star product ------------------------------------------------------------------


class _Integrand:
    """``x -> h1(x) h(x)^{-1} h2(x)`` with a positivity guard on ``h``."""

    def __init__(self, h1: MatTrigPoly, h2: MatTrigPoly, h: MatTrigPoly, floor_tol: float):
        self.h1, self.h2, self.h, self.floor_tol = h1, h2, h, floor_tol

    def from_z(self, z):
        hv = self.h.eval_z(z)
        herm = 0.5 * (hv + np.conj(np.swapaxes(hv, -1, -2)))
        if hv.shape[-1] == 1:
            low = float(np.min(herm.real)) if herm.size else np.inf
        else:
            low = float(np.min(np.linalg.eigvalsh(herm))) if herm.size else np.inf
        if low < self.floor_tol:
            raise UnitNotBoundedBelow(f"unit not bounded below: smallest eigenvalue {low:.3g} < {self.floor_tol:g}")
        a = self.h1.eval_z(z)
        b = self.h2.eval_z(z)
        if hv.shape[-1] == 1:
            return a * b / hv
        return a @ np.linalg.solve(hv, b)

    def __call__(self, xs):
        return self.from_z(np.exp(2j * np.pi * np.asarray(xs, dtype=float)))


@dataclass(frozen=True)
class StarProductResult:
    """Grid samples of ``h1 * h2`` with convergence diagnostics.

    ``values[j]`` is the product at ``points[j]``, the midpoint grid.
    """

    points: np.ndarray
    values: np.ndarray
    depth_used: int
    sup_increment: float
    converged: bool
    residual: float
    inputs_harmonic: bool
    increments: tuple[float, ...] = ()


def _check_unit(h: MatTrigPoly, grid_size: int, floor_tol: float):
    # a dense grid, so that isolated zeros of h are not stepped over
    floor = positivity_floor(h, max(grid_size, 1 << 14))
    if floor < floor_tol:
        raise UnitNotBoundedBelow(f"unit not bounded below: positivity floor {floor:.3g} < {floor_tol:g}")


def _is_harmonic(m: Filter, p: MatTrigPoly, tol: float = HARMONIC_TOL) -> bool:
    return coeff_norm(transfer_apply(m, p) - p) <= tol


def star_product(
    m: Filter,
    h1: MatTrigPoly,
    h2: MatTrigPoly,
    h: MatTrigPoly,
    depth: int = DEFAULT_DEPTH,
    tol: float = 1e-8,
    grid_size: int = DEFAULT_GRID,
    floor_tol: float = FLOOR_TOL,
) -> StarProductResult:
    """``lim_k R^k(h1 h^{-1} h2)`` on ``midpoint_grid(grid_size)``.

    Stops at the first ``k >= 1`` whose sup increment is at most ``tol``,
    or at ``depth``.  Raises ``UnitNotBoundedBelow`` when ``h`` drops below
    ``floor_tol``; non-harmonic inputs only set ``inputs_harmonic=False``.
    """
    _check_unit(h, grid_size, floor_tol)
    ok = all(_is_harmonic(m, p) for p in (h1, h2, h))
    if not ok:
        warnings.warn("star product inputs are not harmonic", NonHarmonicWarning, stacklevel=2)
    g = _Integrand(h1, h2, h, floor_tol)
    prev = midpoint_grid_powers(m, g, grid_size, [0])[0]
    incs = []
    k = 0
    for k in range(1, max(1, depth) + 1):
        cur = midpoint_grid_powers(m, g, grid_size, [k])[0]
        incs.append(sup_norm_on_grid(cur - prev))
        prev = cur
        if incs[-1] <= tol:
            break
    poly = interpolate_midpoint(prev)
    residual = sup_norm_on_grid(midpoint_grid_powers(m, poly, grid_size, [1])[0] - prev)
    return StarProductResult(
        points=midpoint_grid(grid_size),
        values=prev,
        depth_used=k,
        sup_increment=incs[-1],
        converged=incs[-1] <= tol,
        residual=residual,
        inputs_harmonic=ok,
        increments=tuple(incs),
    )


def star_product_cesaro(
    m: Filter,
    h1: MatTrigPoly,
    h2: MatTrigPoly,
    h: MatTrigPoly,
    n_terms: int = 2**30,
    n_points: int = 64,
    grid_size: int = DEFAULT_GRID,
    floor_tol: float = FLOOR_TOL,
) -> np.ndarray:
    """Star product through the Cesaro mean of the grid projection of ``h1 h^{-1} h2``.

    Returns samples on ``midpoint_grid(grid_size)``.
    """
    _check_unit(h, grid_size, floor_tol)
    g = grid_project(_Integrand(h1, h2, h, floor_tol), m.poly.shape, n_points)
    return cesaro_average(m, g, n_terms).eval_many(midpoint_grid(grid_size))


@dataclass(frozen=True)
class MonotoneReport:
    min_eigenvalues: tuple[float, ...]  # smallest eigenvalue of each increment
    monotone: bool


def monotone_witness(
    m: Filter,
    h1: MatTrigPoly,
    h: MatTrigPoly,
    depth: int = 12,
    grid_size: int = 64,
    tol: float = 1e-9,
    floor_tol: float = FLOOR_TOL,
) -> MonotoneReport:
    """Check that ``R^k(h1 h^{-1} h1)`` increases in the semidefinite order for ``k <= depth``."""
    _check_unit(h, grid_size, floor_tol)
    vals = midpoint_grid_powers(m, _Integrand(h1, h1, h, floor_tol), grid_size, range(depth + 1))
    mins = []
    for k in range(depth):
        inc = vals[k + 1] - vals[k]
        inc = 0.5 * (inc + np.conj(np.swapaxes(inc, -1, -2)))
        mins.append(float(np.min(np.linalg.eigvalsh(inc))))
    return MonotoneReport(tuple(mins), all(v >= -tol for v in mins))


# projections -------------------------------------------------------------------


@dataclass(frozen=True)
class ProjectionReport:
    is_projection: bool
    star_deviation: float
    hermitian_deviation: float
    product: StarProductResult


def projection_check(
    m: Filter,
    p: MatTrigPoly,
    h: MatTrigPoly,
    tol: float = 1e-6,
    depth: int = DEFAULT_DEPTH,
    grid_size: int = DEFAULT_GRID,
) -> ProjectionReport:
    """Is ``p * p = p = p^*`` within ``tol`` on the grid?"""
    prod = star_product(m, p, p, h, depth=depth, tol=min(tol, 1e-8), grid_size=grid_size)
    dev = sup_norm_on_grid(prod.values - p.eval_many(prod.points))
    herm = hermitian_defect(p)
    return ProjectionReport(dev <= tol and herm <= tol, dev, herm, prod)


@dataclass(frozen=True)
class OrthogonalityTable:
    norms: np.ndarray  # grid sup of ||b_i * b_j||
    diagonal_deviation: np.ndarray  # ||b_i * b_i - b_i||
    off_diagonal_max: float
    products: tuple[tuple[StarProductResult, ...], ...]


def orthogonality_table(
    m: Filter,
    basis: list[MatTrigPoly],
    h: MatTrigPoly,
    depth: int = DEFAULT_DEPTH,
    grid_size: int = DEFAULT_GRID,
    tol: float = 1e-8,
) -> OrthogonalityTable:
    n = len(basis)
    norms = np.zeros((n, n))
    diag = np.zeros(n)
    rows = []
    for i, a in enumerate(basis):
        row = []
        for j, b in enumerate(basis):
            r = star_product(m, a, b, h, depth=depth, tol=tol, grid_size=grid_size)
            norms[i, j] = sup_norm_on_grid(r.values)
            if i == j:
                diag[i] = sup_norm_on_grid(r.values - a.eval_many(r.points))
            row.append(r)
        rows.append(tuple(row))
    off = norms[~np.eye(n, dtype=bool)]
    return OrthogonalityTable(norms, diag, float(off.max()) if off.size else 0.0, tuple(rows))


# domination --------------------------------------------------------------------


def domination_check(h0: MatTrigPoly, h: MatTrigPoly, grid_size: int = 360, tol: float = 1e-10) -> float | None:
    """Least ``c`` with ``-c h <= h0 <= c h`` at the points ``j / grid_size``.

    Returns ``None`` when ``h(x)`` has a kernel direction on which ``h0(x)``
    does not vanish.  The uniform grid contains ``0`` and, for the default
    size, all rationals with denominator dividing 360.
    """
    xs = np.arange(grid_size) / grid_size
    H = h.eval_many(xs)
    H0 = h0.eval_many(xs)
    H = 0.5 * (H + np.conj(np.swapaxes(H, -1, -2)))
    H0 = 0.5 * (H0 + np.conj(np.swapaxes(H0, -1, -2)))
    scale = max(1.0, sup_norm_on_grid(H))
    c = 0.0
    for A, B in zip(H, H0):
        w, U = np.linalg.eigh(A)
        ker = w <= tol * scale
        if ker.any() and np.linalg.norm(B @ U[:, ker]) > tol * max(1.0, np.linalg.norm(B)):
            return None
        U, w = U[:, ~ker], w[~ker]
        if w.size == 0:
            continue
        S = U / np.sqrt(w)
        c = max(c, float(np.max(np.abs(np.linalg.eigvalsh(np.conj(S.T) @ B @ S)))))
    return c
