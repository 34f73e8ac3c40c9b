"""The matrix-valued transfer operator ``R f = (1/N) sum_{Ny = x} m^* f m``.

Two realizations are provided: an exact one on coefficients (convolve, then
keep the indices divisible by ``N``) and a pointwise one that enumerates the
``N**k`` preimages of a point.  On top of the exact map sit the finite
transition matrix on degree-``K`` polynomials, the Hermitian fixed space, and
the low-pass (E(l)) report for ``m(0) / sqrt(N)``.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .trigmat import (
    DimensionError,
    ELReport,
    Filter,
    MatTrigPoly,
    adjoint,
    as_matrix_function,
    coeff_norm,
    downsample,
    hermitian_defect,
    midpoint_grid,
    multiply,
)

FIXED_TOL = 1e-9
DEFAULT_MAX_PREIMAGES = 2**24
# nodes held in memory at once by the preimage walk
_NODE_BLOCK = 1 << 18


class InvarianceError(ValueError):
    """The requested degree bound does not give an R-invariant space."""

    def __init__(self, K: int, minimal: int):
        super().__init__(f"degree bound K={K} is below the invariance bound {minimal}")
        self.K = K
        self.minimal = minimal


class EnumerationGuardError(ValueError):
    """Too many preimages requested for pointwise evaluation."""


def transfer_apply(m: Filter, f: MatTrigPoly) -> MatTrigPoly:
    """Coefficient-exact ``R f``."""
    if f.shape != m.poly.shape:
        raise DimensionError(f"filter is {m.poly.shape}, argument is {f.shape}")
    g = multiply(multiply(adjoint(m.poly), f), m.poly)
    return downsample(g, m.dilation)


def transfer_power(m: Filter, f: MatTrigPoly, k: int) -> MatTrigPoly:
    for _ in range(k):
        f = transfer_apply(m, f)
    return f


# pointwise -------------------------------------------------------------------


def _check_guard(N: int, depth: int, max_preimages: int | None):
    limit = DEFAULT_MAX_PREIMAGES if max_preimages is None else max_preimages
    if depth < 0:
        raise ValueError("depth must be >= 0")
    if N**depth > limit:
        raise EnumerationGuardError(
            f"{N}**{depth} preimages exceed the enumeration guard {limit}; pass max_preimages to override"
        )


def _walk_roots(m: Filter, fun, roots: np.ndarray, depth: int) -> np.ndarray:
    """Unnormalized level sums ``sum_{r^k y = x} m^(k)(y)^* f(y) m^(k)(y)`` for each root."""
    N = m.dilation
    d = m.dim
    G = len(roots)
    out = np.zeros((depth + 1, G, d, d), dtype=complex)
    scalar = d == 1
    mpoly = m.poly
    digits = np.arange(N)
    per = max(1, _NODE_BLOCK // G)
    # nodes: y (G, n) and cocycle weights; children of y are (y + i) / N.
    # Scalar filters carry |m^(k)|^2 only.
    if scalar:
        c0 = np.ones((G, 1))
    else:
        c0 = np.broadcast_to(np.eye(d, dtype=complex), (G, 1, d, d)).copy()
    stack = [(0, roots[:, None].astype(float), c0)]
    while stack:
        level, y, c = stack.pop()
        vals = np.asarray(fun(y.ravel()), dtype=complex).reshape(y.shape + (d, d))
        if scalar:
            out[level, :, 0, 0] += np.einsum("gn,gn->g", c, vals[..., 0, 0])
        else:
            out[level] += np.sum(np.conj(np.swapaxes(c, -1, -2)) @ vals @ c, axis=1)
        if level == depth:
            continue
        yc = ((y[:, :, None] + digits) / N).reshape(G, -1)
        mv = mpoly.eval_many(yc)
        if scalar:
            mv = mv[..., 0, 0]
            cc = (mv.real**2 + mv.imag**2) * np.repeat(c, N, axis=1)
        else:
            cc = mv @ np.repeat(c, N, axis=1)
        n = yc.shape[1]
        if n > per:
            for s in range(0, n, per)[::-1]:
                stack.append((level + 1, yc[:, s : s + per], cc[:, s : s + per]))
        else:
            stack.append((level + 1, yc, cc))
    return out


def pointwise_powers(
    m: Filter,
    f,
    xs,
    depth: int,
    *,
    max_preimages: int | None = None,
    workers: int = 1,
) -> np.ndarray:
    """``R^k f(x)`` for ``k = 0..depth`` at each point, by preimage enumeration.

    The preimage tree is walked once: level-``k`` cocycles are built from
    their parents, so the cost is about ``2 N**depth`` node visits per point.
    Returns an array of shape ``(depth + 1, len(xs), d, d)``.
    """
    N = m.dilation
    _check_guard(N, depth, max_preimages)
    fun = as_matrix_function(f, m.poly.shape)
    xs = np.atleast_1d(np.asarray(xs, dtype=float))
    per = max(1, min(len(xs), 8))
    chunks = [xs[i : i + per] for i in range(0, len(xs), per)]
    if workers > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            parts = list(ex.map(lambda r: _walk_roots(m, fun, r, depth), chunks))
    else:
        parts = [_walk_roots(m, fun, r, depth) for r in chunks]
    out = np.concatenate(parts, axis=1)
    scale = float(N) ** -np.arange(depth + 1)
    return out * scale[:, None, None, None]


def transfer_apply_pointwise(m: Filter, f, k: int, x: float, *, max_preimages: int | None = None) -> np.ndarray:
    """``R^k f(x)`` from the ``N**k`` preimages ``(x + j) / N**k``; ``k = 0`` gives ``f(x)``."""
    return pointwise_powers(m, f, [x], k, max_preimages=max_preimages)[k, 0]


def _level_z(idx0: np.ndarray, G0: int, G: int, n: int) -> np.ndarray:
    """``exp(2 pi i y)`` at midpoints ``y = (2 (idx0 + G0 t) + 1) / (2 G)``, ``t < n``, shape ``(n, len(idx0))``.

    Built as an outer product of two short exponential tables.
    """
    a = np.exp(1j * np.pi * (2 * idx0 + 1) / G)
    b = np.exp(2j * np.pi * G0 * np.arange(n) / G)
    return b[:, None] * a[None, :]


def _reduce_levels(m: Filter, vals: np.ndarray, idx0: np.ndarray, G0: int, r: int) -> np.ndarray:
    """Apply ``R`` ``r`` times to samples on a nested midpoint grid.

    ``vals[t, b]`` is the value at midpoint index ``idx0[b] + G0 * t`` of the
    grid of size ``G0 * N**r``.  Returns values at ``idx0`` on the grid of
    size ``G0``.  Scalar filters pass ``vals`` without the trailing 1x1 axes.
    """
    N = m.dilation
    scalar = m.dim == 1
    B = len(idx0)
    for s in range(r, 0, -1):
        mv = m.poly.eval_z(_level_z(idx0, G0, G0 * N**s, N**s))
        if scalar:
            mv = mv[..., 0, 0]
            w = (mv.real**2 + mv.imag**2) * vals
        else:
            w = np.conj(np.swapaxes(mv, -1, -2)) @ vals @ mv
        vals = w.reshape((N, N ** (s - 1), B) + vals.shape[2:]).sum(axis=0) / N
    return vals[0]


def midpoint_grid_powers(m: Filter, f, M: int, depths, *, block: int = 1 << 20) -> np.ndarray:
    """``R^k f`` on ``midpoint_grid(M)`` for each ``k`` in ``depths``.

    Preimages of midpoint-grid points are midpoint-grid points of the grid
    ``N`` times finer, so ``R^k`` is evaluated by sampling ``f`` once on the
    grid of size ``M N**k`` and folding ``k`` times.  Work is split into
    blocks of about ``block`` samples.  Returns shape ``(len(depths), M, d, d)``.

    ``f`` may be a polynomial, a constant, or a callable of ``x``; a callable
    with a ``from_z`` attribute is handed ``exp(2 pi i x)`` instead.
    """
    N = m.dilation
    d = m.dim
    scalar = d == 1
    if isinstance(f, MatTrigPoly):
        zfun = f.eval_z
    elif callable(getattr(f, "from_z", None)):
        zfun = f.from_z
    else:
        fun = as_matrix_function(f, m.poly.shape)

        def zfun(z):
            return fun(np.mod(np.angle(z) / (2 * np.pi), 1.0))

    out = []
    for k in depths:
        k = int(k)
        if k < 0:
            raise ValueError("depth must be >= 0")
        # fold r levels per block, from grid G0 * N**r down to G0
        r = min(k, int(math.floor(math.log(block / M, N)))) if block >= M * N else 0
        q = k - r
        G0 = M * N**q
        per = max(1, block // N**r)
        coarse = np.empty((G0,) if scalar else (G0, d, d), dtype=complex)
        for a in range(0, G0, per):
            idx0 = np.arange(a, min(G0, a + per))
            z = _level_z(idx0, G0, G0 * N**r, N**r)
            vals = np.asarray(zfun(z), dtype=complex).reshape(z.shape + (d, d))
            if scalar:
                vals = vals[..., 0, 0]
            coarse[idx0] = _reduce_levels(m, vals, idx0, G0, r)
        vals = coarse.reshape((N**q, M) + coarse.shape[1:])
        res = _reduce_levels(m, vals, np.arange(M), M, q)
        out.append(res[..., None, None] if scalar else res)
    return np.array(out).reshape(len(out), M, d, d)


# transition matrix -------------------------------------------------------------


def invariance_bound(m: Filter) -> int:
    """Smallest ``K >= 1`` for which degree-``K`` polynomials are mapped into themselves."""
    L = multiply(adjoint(m.poly), m.poly).max_abs_index()
    return max(1, math.ceil(L / (m.dilation - 1)))


def stack_coeffs(f: MatTrigPoly, K: int) -> np.ndarray:
    """Vector ``(c_{-K}, ..., c_K)`` with each block flattened row-major."""
    if not f.is_zero and f.max_abs_index() > K:
        raise ValueError(f"polynomial support {f.support} exceeds [-{K}, {K}]")
    d = f.shape[0]
    out = np.zeros((2 * K + 1, d, f.shape[1]), dtype=complex)
    for k, c in f.items():
        out[k + K] = c
    return out.reshape(-1)


def unstack_coeffs(v: np.ndarray, K: int, d: int) -> MatTrigPoly:
    return MatTrigPoly(np.asarray(v).reshape(2 * K + 1, d, d), -K)


@dataclass(frozen=True)
class TransitionMatrix:
    degree_bound: int
    dim: int
    matrix: np.ndarray
    eigenvalues: np.ndarray
    fixed_basis: tuple[MatTrigPoly, ...]

    def apply(self, f: MatTrigPoly) -> MatTrigPoly:
        return unstack_coeffs(self.matrix @ stack_coeffs(f, self.degree_bound), self.degree_bound, self.dim)

    def peripheral(self, tol: float = FIXED_TOL) -> np.ndarray:
        """Eigenvalues of modulus at least ``1 - tol``, sorted by argument."""
        ev = self.eigenvalues[np.abs(self.eigenvalues) >= 1 - tol]
        return ev[np.argsort(np.angle(ev))]


@dataclass(frozen=True)
class HarmonicElement:
    poly: MatTrigPoly
    residual: float
    hermitian: bool
    positivity_floor: float


def _raw_matrix(m: Filter, K: int) -> np.ndarray:
    d = m.dim
    n = (2 * K + 1) * d * d
    T = np.zeros((n, n), dtype=complex)
    for col in range(n):
        e = np.zeros(n, dtype=complex)
        e[col] = 1.0
        T[:, col] = stack_coeffs(transfer_apply(m, unstack_coeffs(e, K, d)), K)
    return T


def _realify(vecs: np.ndarray, K: int, d: int) -> np.ndarray:
    """Real coordinates of stacked coefficient vectors, highest index first."""
    blocks = vecs.reshape(2 * K + 1, d * d, -1)[::-1].reshape((2 * K + 1) * d * d, -1)
    return np.concatenate([blocks.real, blocks.imag], axis=0)


def _unrealify(r: np.ndarray, K: int, d: int) -> np.ndarray:
    half = r.shape[0] // 2
    blocks = (r[:half] + 1j * r[half:]).reshape(2 * K + 1, d * d)[::-1]
    return blocks.reshape(-1)


def _rref_columns(B: np.ndarray, tol: float) -> np.ndarray:
    """Column basis of span(B) in reduced echelon form (pivots scanned top-down)."""
    A = B.T.copy()
    rows, cols = A.shape
    r = 0
    for j in range(cols):
        if r == rows:
            break
        p = r + int(np.argmax(np.abs(A[r:, j])))
        if abs(A[p, j]) <= tol:
            continue
        A[[r, p]] = A[[p, r]]
        A[r] /= A[r, j]
        for i in range(rows):
            if i != r:
                A[i] -= A[i, j] * A[r]
        r += 1
    return A[:r].T


def _hermitian_fixed_vectors(T: np.ndarray, K: int, d: int, tol: float) -> list[np.ndarray]:
    n = T.shape[0]
    ker = scipy.linalg.null_space(T - np.eye(n), rcond=tol)
    if ker.shape[1] == 0:
        return []
    # Hermitian parts of v and i v span the real form of the kernel
    cand = []
    for v in ker.T:
        for w in (v, 1j * v):
            f = unstack_coeffs(w, K, d)
            cand.append(stack_coeffs((f + adjoint(f)) * 0.5, K))
    R = _realify(np.array(cand).T, K, d)
    R[np.abs(R) < 1e-15] = 0.0
    scale = max(1.0, float(np.max(np.abs(R))))
    basis = _rref_columns(R, tol * scale * 10)
    return [_unrealify(b, K, d) for b in basis.T]


def _normalize(p: MatTrigPoly) -> MatTrigPoly:
    d = p.dim
    tr = np.trace(p.coefficient(0)).real
    if abs(tr) > 1e-12:
        return p * (d / tr)
    return p / coeff_norm(p)


def transition_matrix(m: Filter, K: int | None = None, tol: float = FIXED_TOL) -> TransitionMatrix:
    """Matrix of ``R`` on polynomials supported in ``[-K, K]``."""
    Kmin = invariance_bound(m)
    K = Kmin if K is None else int(K)
    if K < Kmin:
        raise InvarianceError(K, Kmin)
    d = m.dim
    T = _raw_matrix(m, K)
    ev = np.linalg.eigvals(T)
    vecs = _hermitian_fixed_vectors(T, K, d, tol)
    basis = []
    for v in vecs:
        p = _normalize(unstack_coeffs(v, K, d))
        # drop round-off in coefficients that should vanish
        c = p.coeffs.copy()
        c[np.abs(c) < 1e-14] = 0
        basis.append(MatTrigPoly(c, p.kmin))
    return TransitionMatrix(K, d, T, ev, tuple(basis))


def positivity_floor(h: MatTrigPoly, grid_size: int = 512) -> float:
    """Minimum over a midpoint grid of the smallest eigenvalue of ``h(x)``."""
    vals = h.eval_many(midpoint_grid(grid_size))
    herm = 0.5 * (vals + np.conj(np.swapaxes(vals, -1, -2)))
    return float(np.min(np.linalg.eigvalsh(herm)))


def harmonic_element(m: Filter, h: MatTrigPoly, grid_size: int = 512) -> HarmonicElement:
    return HarmonicElement(
        poly=h,
        residual=coeff_norm(transfer_apply(m, h) - h),
        hermitian=hermitian_defect(h) <= 1e-9,
        positivity_floor=positivity_floor(h, grid_size),
    )


def fixed_space(m: Filter, K: int | None = None, tol: float = FIXED_TOL) -> list[HarmonicElement]:
    """Basis of Hermitian-valued fixed points of degree at most ``K``.

    Elements are scaled so that ``trace(c_0) = d`` (unit coefficient norm
    when that trace vanishes).  For ``d = 1`` a one-dimensional space spanned
    by the constant means the filter passes the orthogonality test.
    """
    tm = transition_matrix(m, K, tol)
    out = []
    for p in tm.fixed_basis:
        el = harmonic_element(m, p)
        if el.residual <= max(tol, 1e-9):
            out.append(el)
    return out


def lawton_verdict(basis: list[HarmonicElement], d: int, tol: float = FIXED_TOL) -> str | None:
    """``"orthogonal"`` iff the fixed space is spanned by a constant; ``None`` when ``d > 1``."""
    if d != 1:
        return None
    if len(basis) != 1:
        return "non-orthogonal"
    p = basis[0].poly
    const = MatTrigPoly.constant(p.coefficient(0))
    return "orthogonal" if coeff_norm(p - const) <= tol else "non-orthogonal"


# low-pass condition --------------------------------------------------------------


def el_condition(m: Filter, tol: float = 1e-10) -> ELReport:
    """Check that 1 is the only eigenvalue of ``m(0)/sqrt(N)`` on or outside the unit circle,
    and that it is semisimple."""
    A = m.poly(0.0) / math.sqrt(m.dilation)
    d = A.shape[0]
    ev = np.linalg.eigvals(A)
    near_one = np.abs(ev - 1) <= max(tol, 1e-8)
    alg = int(near_one.sum())
    others_inside = bool(np.all(np.abs(ev[~near_one]) < 1 - tol))
    # absolute threshold: A - I may be all round-off
    _, sv, vh = np.linalg.svd(A - np.eye(d))
    null = sv <= max(tol, 1e-8) * max(1.0, np.linalg.norm(A, 2))
    ker = np.conj(vh[null]).T
    geo = ker.shape[1]
    satisfied = alg >= 1 and alg == geo and others_inside
    basis: tuple[np.ndarray, ...] = ()
    if satisfied:
        q, _ = np.linalg.qr(ker)
        vecs = []
        for v in q.T:
            i = int(np.argmax(np.abs(v)))
            v = v * (abs(v[i]) / v[i])
            v[np.abs(v) < 1e-15] = 0
            vecs.append(v)
        basis = tuple(vecs)
    return ELReport(
        eigenvalues=tuple(complex(e) for e in ev),
        l=alg if satisfied else 0,
        e1_basis=basis,
        satisfied=satisfied,
    )


def e1_spectral_projection(m: Filter, tol: float = 1e-8) -> np.ndarray:
    """Riesz projection of ``m(0)/sqrt(N)`` onto the eigenvalue-1 subspace.

    Uses an ordered Schur form and a Sylvester solve, so it does not need a
    full eigenvector basis.
    """
    A = m.poly(0.0) / math.sqrt(m.dilation)
    d = A.shape[0]
    T, Q, k = scipy.linalg.schur(A.astype(complex), output="complex", sort=lambda z: abs(z - 1) <= tol)
    if k == 0:
        return np.zeros((d, d), dtype=complex)
    if k == d:
        return np.eye(d, dtype=complex)
    T11, T12, T22 = T[:k, :k], T[:k, k:], T[k:, k:]
    Y = scipy.linalg.solve_sylvester(T11, -T22, -T12)
    P = np.zeros((d, d), dtype=complex)
    P[:k, :k] = np.eye(k)
    P[:k, k:] = -Y
    return Q @ P @ Q.conj().T
