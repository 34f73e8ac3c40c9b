"""Matrix-valued trigonometric polynomials on the circle.

A polynomial is stored as a dense block of coefficient matrices over its
tight support ``[kmin, kmax]``; the value at ``x`` in ``[0, 1)`` is
``sum_k c_k exp(2 pi i k x)``.  Instances are immutable.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Mapping

import numpy as np

DEFAULT_TOL = 1e-10

MatrixFunction = Callable[[np.ndarray], np.ndarray]


class DimensionError(ValueError):
    """Raised when polynomial shapes are incompatible."""


def _zpow(z: np.ndarray, k: int) -> np.ndarray:
    # integer power of a point on the unit circle
    return z**k if k > 0 else np.conj(z) ** (-k)


class MatTrigPoly:
    """A matrix-valued Laurent polynomial in ``z = exp(2 pi i x)``.

    Parameters
    ----------
    coeffs : array_like
        Coefficient blocks, shape ``(n, rows, cols)``; ``coeffs[i]`` is the
        coefficient of index ``kmin + i``.  Scalars are ``(n, 1, 1)``.
    kmin : int
        Index of the first block.

    Leading and trailing blocks that are exactly zero are trimmed, so
    ``kmin``/``kmax`` are tight unless the polynomial is zero, in which case
    the support is empty.  Most polynomials here are square (``d x d``); the
    ``rows x 1`` case is used for vector sections.
    """

    __slots__ = ("_coeffs", "_kmin")

    def __init__(self, coeffs, kmin: int = 0):
        c = np.array(coeffs, dtype=complex)
        if c.ndim != 3:
            raise DimensionError(f"coefficients must have shape (n, rows, cols), got {c.shape}")
        nz = np.flatnonzero(np.any(c != 0, axis=(1, 2)))
        if nz.size == 0:
            c = c[:0]
            kmin = 0
        else:
            c = c[nz[0] : nz[-1] + 1]
            kmin = int(kmin) + int(nz[0])
        c.setflags(write=False)
        self._coeffs = c
        self._kmin = int(kmin)

    # construction helpers -------------------------------------------------

    @classmethod
    def from_dict(cls, coeffs: Mapping[int, object], shape: tuple[int, int] | None = None):
        """Build from ``{k: matrix}``; scalars are accepted for 1x1 polynomials."""
        items = {int(k): np.atleast_2d(np.asarray(v, dtype=complex)) for k, v in coeffs.items()}
        if not items:
            if shape is None:
                raise DimensionError("shape is required for an empty coefficient map")
            return cls.zero(*shape)
        shapes = {a.shape for a in items.values()}
        if len(shapes) != 1:
            raise DimensionError(f"inconsistent coefficient shapes {sorted(shapes)}")
        (s,) = shapes
        if shape is not None and tuple(shape) != s:
            raise DimensionError(f"coefficients have shape {s}, expected {tuple(shape)}")
        lo, hi = min(items), max(items)
        block = np.zeros((hi - lo + 1,) + s, dtype=complex)
        for k, a in items.items():
            block[k - lo] = a
        return cls(block, lo)

    @classmethod
    def zero(cls, rows: int, cols: int | None = None):
        return cls(np.zeros((0, rows, rows if cols is None else cols)), 0)

    @classmethod
    def constant(cls, matrix):
        a = np.atleast_2d(np.asarray(matrix, dtype=complex))
        return cls(a[None], 0)

    @classmethod
    def identity(cls, d: int):
        return cls.constant(np.eye(d))

    @classmethod
    def scalar(cls, coeffs: Mapping[int, complex]):
        """1x1 polynomial from ``{k: c_k}``."""
        return cls.from_dict({k: [[v]] for k, v in coeffs.items()}, shape=(1, 1))

    # basic properties -----------------------------------------------------

    @property
    def coeffs(self) -> np.ndarray:
        return self._coeffs

    @property
    def kmin(self) -> int:
        return self._kmin

    @property
    def kmax(self) -> int:
        return self._kmin + len(self._coeffs) - 1

    @property
    def shape(self) -> tuple[int, int]:
        return self._coeffs.shape[1:]

    @property
    def dim(self) -> int:
        return self._coeffs.shape[1]

    @property
    def is_zero(self) -> bool:
        return len(self._coeffs) == 0

    @property
    def support(self) -> tuple[int, int] | None:
        """Tight support ``(kmin, kmax)``, or ``None`` for the zero polynomial."""
        return None if self.is_zero else (self.kmin, self.kmax)

    @property
    def indices(self) -> np.ndarray:
        return np.arange(self.kmin, self.kmin + len(self._coeffs))

    def coefficient(self, k: int) -> np.ndarray:
        i = k - self._kmin
        if 0 <= i < len(self._coeffs):
            return self._coeffs[i].copy()
        return np.zeros(self.shape, dtype=complex)

    def items(self):
        for k, c in zip(self.indices, self._coeffs):
            yield int(k), c

    def max_abs_index(self) -> int:
        return 0 if self.is_zero else max(abs(self.kmin), abs(self.kmax))

    # evaluation -----------------------------------------------------------

    def __call__(self, x):
        return evaluate(self, x)

    def eval_many(self, xs) -> np.ndarray:
        """Values at an array of points; result shape ``xs.shape + (rows, cols)``."""
        xs = np.asarray(xs, dtype=float)
        return self.eval_z(np.exp(2j * np.pi * xs))

    def eval_z(self, z) -> np.ndarray:
        """Values at points ``z`` on the unit circle, shape ``z.shape + (rows, cols)``."""
        z = np.asarray(z, dtype=complex)
        if self.is_zero:
            return np.zeros(z.shape + self.shape, dtype=complex)
        c = self._coeffs
        if self.shape == (1, 1):
            # flat Horner for scalars, much cheaper than broadcasting 1x1 blocks
            acc = np.full(z.shape, c[-1, 0, 0], dtype=complex)
            for a in c[-2::-1, 0, 0]:
                acc *= z
                if a != 0:
                    acc += a
            if self._kmin:
                acc *= _zpow(z, self._kmin)
            return acc[..., None, None]
        acc = np.broadcast_to(c[-1], z.shape + self.shape).astype(complex)
        zz = z[..., None, None]
        for a in c[-2::-1]:
            acc = acc * zz + a
        if self._kmin:
            acc = acc * _zpow(z, self._kmin)[..., None, None]
        return acc

    # arithmetic -----------------------------------------------------------

    def _aligned(self, other: "MatTrigPoly"):
        if self.shape != other.shape:
            raise DimensionError(f"shape mismatch {self.shape} vs {other.shape}")
        if self.is_zero:
            return other.kmin, np.zeros_like(other._coeffs), other._coeffs
        if other.is_zero:
            return self.kmin, self._coeffs, np.zeros_like(self._coeffs)
        lo = min(self.kmin, other.kmin)
        hi = max(self.kmax, other.kmax)
        a = np.zeros((hi - lo + 1,) + self.shape, dtype=complex)
        b = np.zeros_like(a)
        a[self.kmin - lo : self.kmax - lo + 1] = self._coeffs
        b[other.kmin - lo : other.kmax - lo + 1] = other._coeffs
        return lo, a, b

    def __add__(self, other):
        if not isinstance(other, MatTrigPoly):
            return NotImplemented
        lo, a, b = self._aligned(other)
        return MatTrigPoly(a + b, lo)

    def __sub__(self, other):
        if not isinstance(other, MatTrigPoly):
            return NotImplemented
        lo, a, b = self._aligned(other)
        return MatTrigPoly(a - b, lo)

    def __neg__(self):
        return MatTrigPoly(-self._coeffs, self._kmin)

    def __mul__(self, scalar):
        if isinstance(scalar, MatTrigPoly):
            return NotImplemented
        return MatTrigPoly(self._coeffs * complex(scalar), self._kmin)

    __rmul__ = __mul__

    def __truediv__(self, scalar):
        return MatTrigPoly(self._coeffs / complex(scalar), self._kmin)

    def __matmul__(self, other):
        if not isinstance(other, MatTrigPoly):
            return NotImplemented
        return multiply(self, other)

    def __eq__(self, other):
        if not isinstance(other, MatTrigPoly):
            return NotImplemented
        return (
            self.shape == other.shape
            and self._kmin == other._kmin
            and np.array_equal(self._coeffs, other._coeffs)
        )

    def __hash__(self):
        return hash((self.shape, self._kmin, self._coeffs.tobytes()))

    def __repr__(self):
        if self.is_zero:
            return f"MatTrigPoly(zero, shape={self.shape})"
        return f"MatTrigPoly(shape={self.shape}, support=[{self.kmin}, {self.kmax}])"


def evaluate(p: MatTrigPoly, x: float) -> np.ndarray:
    """Value ``sum_k c_k exp(2 pi i k x)`` as a matrix."""
    return p.eval_many(np.asarray(float(x)))


def adjoint(p: MatTrigPoly) -> MatTrigPoly:
    """Pointwise conjugate transpose: ``c_k`` moves to index ``-k`` as ``c_k^*``."""
    c = np.conj(np.swapaxes(p.coeffs, 1, 2))[::-1]
    return MatTrigPoly(c, -p.kmax) if not p.is_zero else MatTrigPoly.zero(p.shape[1], p.shape[0])


def conjugate(p: MatTrigPoly) -> MatTrigPoly:
    """Pointwise complex conjugate of the function values."""
    if p.is_zero:
        return p
    return MatTrigPoly(np.conj(p.coeffs)[::-1], -p.kmax)


def transpose(p: MatTrigPoly) -> MatTrigPoly:
    """Pointwise (non-conjugating) transpose, i.e. ``conjugate(adjoint(p))``."""
    return conjugate(adjoint(p))


def multiply(p: MatTrigPoly, q: MatTrigPoly) -> MatTrigPoly:
    """Pointwise product ``p(x) q(x)``, an ordered convolution of coefficients."""
    if p.shape[1] != q.shape[0]:
        raise DimensionError(f"cannot multiply shapes {p.shape} and {q.shape}")
    out_shape = (p.shape[0], q.shape[1])
    if p.is_zero or q.is_zero:
        return MatTrigPoly.zero(*out_shape)
    n = len(p.coeffs) + len(q.coeffs) - 1
    out = np.zeros((n,) + out_shape, dtype=complex)
    for i, a in enumerate(p.coeffs):
        out[i : i + len(q.coeffs)] += a @ q.coeffs
    return MatTrigPoly(out, p.kmin + q.kmin)


def dilate(p: MatTrigPoly, N: int) -> MatTrigPoly:
    """Composition with ``x -> N x mod 1``: index ``k`` moves to ``N k``."""
    N = int(N)
    if N < 1:
        raise ValueError(f"dilation factor must be >= 1, got {N}")
    if p.is_zero or N == 1:
        return p
    out = np.zeros(((len(p.coeffs) - 1) * N + 1,) + p.shape, dtype=complex)
    out[::N] = p.coeffs
    return MatTrigPoly(out, p.kmin * N)


def downsample(p: MatTrigPoly, N: int) -> MatTrigPoly:
    """Keep the coefficients whose index is divisible by ``N``, reindexed ``k -> k / N``."""
    if p.is_zero:
        return p
    ks = p.indices
    keep = ks % N == 0
    if not keep.any():
        return MatTrigPoly.zero(*p.shape)
    sel = ks[keep]
    return MatTrigPoly.from_dict({int(k) // N: c for k, c in zip(sel, p.coeffs[keep])}, shape=p.shape)


def coeff_norm(p: MatTrigPoly) -> float:
    """Largest Frobenius norm over the coefficient blocks (0 for the zero polynomial)."""
    if p.is_zero:
        return 0.0
    return float(np.max(np.linalg.norm(p.coeffs, axis=(1, 2))))


def midpoint_grid(n: int) -> np.ndarray:
    """``x_j = (2j + 1) / (2n)``; avoids the dyadic points where filters tend to vanish."""
    if n < 1:
        raise ValueError("grid size must be >= 1")
    return (2 * np.arange(n) + 1) / (2 * n)


def sup_norm_on_grid(values: np.ndarray) -> float:
    """Max operator 2-norm over a stack of matrices shaped ``(..., r, c)``."""
    if values.size == 0:
        return 0.0
    return float(np.max(np.linalg.norm(values, ord=2, axis=(-2, -1))))


def qmf_residual(m: MatTrigPoly, N: int, grid_size: int = 256) -> float:
    """Sup over a midpoint grid of ``|| (1/N) sum_{Ny = x} m*(y) m(y) - I ||``.

    The averaged sum is computed coefficient-exactly as the transfer of the
    identity, ``downsample(adjoint(m) m, N)``, then sampled.
    """
    if grid_size < 1:
        raise ValueError("grid_size must be >= 1")
    r1 = downsample(multiply(adjoint(m), m), N)
    diff = r1 - MatTrigPoly.identity(m.dim)
    return sup_norm_on_grid(diff.eval_many(midpoint_grid(grid_size)))


def is_hermitian_valued(p: MatTrigPoly, tol: float = DEFAULT_TOL) -> bool:
    return hermitian_defect(p) <= tol


def hermitian_defect(p: MatTrigPoly) -> float:
    """``max_k || c_{-k} - c_k^* ||``."""
    if p.shape[0] != p.shape[1]:
        return float("inf")
    return coeff_norm(p - adjoint(p))


def hermitian_part(p: MatTrigPoly) -> MatTrigPoly:
    return (p + adjoint(p)) * 0.5


def grid_project(fun: MatrixFunction, shape: tuple[int, int], n_points: int, cutoff: float = 0.0) -> MatTrigPoly:
    """Trigonometric interpolant of ``fun`` on ``n_points`` equispaced nodes.

    Coefficients with index ``|k| < n_points / 2`` are kept; blocks whose
    norm is at most ``cutoff`` are dropped.
    """
    xs = np.arange(n_points) / n_points
    vals = np.asarray(fun(xs), dtype=complex).reshape((n_points,) + tuple(shape))
    c = np.fft.fft(vals, axis=0) / n_points
    half = (n_points - 1) // 2
    coeffs = {}
    for k in range(-half, half + 1):
        block = c[k % n_points]
        if np.linalg.norm(block) > cutoff:
            coeffs[k] = block
    return MatTrigPoly.from_dict(coeffs, shape=tuple(shape))


def as_matrix_function(h, shape: tuple[int, int] | None = None) -> MatrixFunction:
    """Vectorized sampler ``xs -> (len(xs), r, c)`` for a polynomial, constant or callable.

    Callables must accept a 1-D float array and return stacked matrices.
    """
    if isinstance(h, MatTrigPoly):
        return h.eval_many
    if callable(h):
        return h
    a = np.atleast_2d(np.asarray(h, dtype=complex))
    if shape is not None and a.shape != tuple(shape):
        raise DimensionError(f"constant has shape {a.shape}, expected {tuple(shape)}")

    def const(xs):
        xs = np.asarray(xs, dtype=float)
        return np.broadcast_to(a, xs.shape + a.shape).copy()

    return const


# Filters --------------------------------------------------------------------


@dataclass(frozen=True)
class ELReport:
    """Spectral report on ``m(0) / sqrt(N)`` for the low-pass condition."""

    eigenvalues: tuple[complex, ...]
    l: int
    e1_basis: tuple[np.ndarray, ...]
    satisfied: bool


@dataclass(frozen=True)
class Filter:
    """A filter ``m`` with its dilation ``N`` and cached QMF residual."""

    poly: MatTrigPoly
    dilation: int
    qmf_residual: float
    el_report: ELReport | None = field(default=None, compare=False)
    name: str = ""

    def __post_init__(self):
        if self.dilation < 2:
            raise ValueError(f"dilation must be >= 2, got {self.dilation}")
        if self.poly.shape[0] != self.poly.shape[1]:
            raise DimensionError(f"filter must be square, got {self.poly.shape}")

    @property
    def dim(self) -> int:
        return self.poly.dim

    @property
    def N(self) -> int:
        return self.dilation

    def __call__(self, x):
        return self.poly(x)


def make_filter(poly: MatTrigPoly, N: int, *, name: str = "", grid_size: int = 256) -> Filter:
    return Filter(poly, int(N), qmf_residual(poly, N, grid_size), name=name)


def interpolate_midpoint(values) -> MatTrigPoly:
    """Trigonometric interpolant of samples on ``midpoint_grid(M)``.

    ``values`` has shape ``(M, r, c)``; indices ``|k| <= (M - 1) // 2`` are kept.
    """
    v = np.asarray(values, dtype=complex)
    M = v.shape[0]
    half = (M - 1) // 2
    c = np.fft.fft(v, axis=0) / M
    ks = np.arange(-half, half + 1)
    blocks = c[ks % M] * np.exp(-1j * np.pi * ks / M)[:, None, None]
    return MatTrigPoly(blocks, -half)
