"""Low-pass constructions: the infinite product, scaling functions, correlations.

For a filter satisfying the E(l) condition the normalized product

    P(x) = lim_k N^{-k/2} m(x / N^k) ... m(x / N^2) m(x / N)

converges uniformly on compact sets.  Columns of ``P(x)^* v`` with ``v`` in
the eigenvalue-1 space ``E_1`` of ``m(0)/sqrt(N)`` are frequency-side
scaling functions, and their periodized outer products are harmonic.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .transfer import el_condition, pointwise_powers
from .trigmat import Filter, MatTrigPoly, as_matrix_function, midpoint_grid, sup_norm_on_grid

PRODUCT_TOL = 1e-12
PRODUCT_KMAX = 2000


class LowPassError(ValueError):
    """The filter does not satisfy the E(l) condition."""


@dataclass(frozen=True)
class ProductReport:
    kmax_used: int
    last_increment: float
    converged: bool


@dataclass(frozen=True)
class GridFunction:
    """Samples at ``x = j / N**scale`` for ``-range * N**scale <= j <= range * N**scale``.

    ``values[i]`` belongs to index ``j = i - range * N**scale``; entries are
    ``d x d`` matrices (kind ``"matrix"``) or ``d``-vectors (kind ``"vector"``).
    """

    dilation: int
    scale: int
    range: int
    values: np.ndarray
    kind: str

    @property
    def offset(self) -> int:
        return self.range * self.dilation**self.scale

    @property
    def indices(self) -> np.ndarray:
        return np.arange(-self.offset, self.offset + 1)

    @property
    def points(self) -> np.ndarray:
        return self.indices / self.dilation**self.scale

    def at(self, j: int) -> np.ndarray:
        i = int(j) + self.offset
        if not 0 <= i < len(self.values):
            raise IndexError(f"index {j} outside the grid")
        return self.values[i]

    def to_csv(self, path) -> None:
        """Columns ``j, s, x`` then real/imaginary parts of the entries, row-major."""
        shape = self.values.shape[1:]
        names = []
        for idx in np.ndindex(*shape):
            tag = "_".join(str(i) for i in idx)
            names += [f"re_{tag}", f"im_{tag}"]
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["j", "s", "x"] + names)
            for j, x, v in zip(self.indices, self.points, self.values):
                row = [str(int(j)), str(self.scale), "%.17g" % x]
                for c in np.asarray(v).ravel():
                    row += ["%.17g" % c.real, "%.17g" % c.imag]
                w.writerow(row)


def _require_lowpass(m: Filter, override: bool):
    if override:
        return
    rep = el_condition(m)
    if not rep.satisfied:
        raise LowPassError("filter does not satisfy the E(l) condition; pass override=True to proceed")


def infinite_product_many(
    m: Filter,
    xs,
    tol: float = PRODUCT_TOL,
    kmax: int = PRODUCT_KMAX,
    *,
    override: bool = False,
) -> tuple[np.ndarray, list[ProductReport]]:
    """``P(x)`` at every point of ``xs``; returns ``(values, reports)``.

    Each point stops at the first ``k`` with ``|x| / N**k < 1`` and
    ``||P_k - P_{k-1}|| <= tol``.  Before the argument is inside the unit
    interval an increment says nothing (``m`` is 1-periodic).
    """
    _require_lowpass(m, override)
    xs = np.atleast_1d(np.asarray(xs, dtype=float))
    N = m.dilation
    d = m.dim
    c = 1 / math.sqrt(N)
    P = np.broadcast_to(np.eye(d, dtype=complex), xs.shape + (d, d)).copy()
    active = np.ones(xs.shape, dtype=bool)
    used = np.full(xs.shape, kmax, dtype=int)
    last = np.full(xs.shape, np.inf)
    for k in range(1, kmax + 1):
        idx = np.flatnonzero(active)
        if idx.size == 0:
            break
        A = c * m.poly.eval_many(xs[idx] / float(N) ** k)
        new = A @ P[idx]
        inc = np.linalg.norm(new - P[idx], ord=2, axis=(-2, -1))
        P[idx] = new
        last[idx] = inc
        done = (inc <= tol) & (np.abs(xs[idx]) / float(N) ** k < 1)
        used[idx[done]] = k
        active[idx[done]] = False
    reports = [ProductReport(int(u), float(v), bool(v <= tol)) for u, v in zip(used, last)]
    return P, reports


def infinite_product(
    m: Filter, x: float, tol: float = PRODUCT_TOL, kmax: int = PRODUCT_KMAX, *, override: bool = False
) -> tuple[np.ndarray, ProductReport]:
    P, reps = infinite_product_many(m, [x], tol, kmax, override=override)
    return P[0], reps[0]


def product_grid(m: Filter, scale: int, range_: int, tol: float = PRODUCT_TOL, *, override: bool = False) -> GridFunction:
    """``P`` on the N-adic grid of step ``N**-scale`` over ``[-range_, range_]``."""
    N = m.dilation
    n = range_ * N**scale
    xs = np.arange(-n, n + 1) / N**scale
    P, _ = infinite_product_many(m, xs, tol, override=override)
    return GridFunction(N, scale, range_, P, "matrix")


def scaling_function_grid(
    m: Filter,
    v,
    scale: int,
    range_: int,
    tol: float = 1e-8,
    convention: str = "adjoint",
    *,
    override: bool = False,
) -> GridFunction:
    """``phi_hat(x) = P(x)^* v`` on an N-adic grid.

    ``convention="transpose"`` uses ``P(x)^T v`` instead; the two agree up to
    complex conjugation only for real filters, see ``compare_conventions``.
    """
    v = np.asarray(v, dtype=complex).reshape(-1)
    A0 = m.poly(0.0) / math.sqrt(m.dilation)
    if np.linalg.norm(A0 @ v - v) > tol * max(1.0, np.linalg.norm(v)):
        raise ValueError("v is not fixed by m(0)/sqrt(N)")
    if convention not in ("adjoint", "transpose"):
        raise ValueError(f"unknown convention {convention!r}")
    G = product_grid(m, scale, range_, override=override)
    Pt = np.swapaxes(G.values, -1, -2)
    if convention == "adjoint":
        Pt = np.conj(Pt)
    return GridFunction(G.dilation, scale, range_, Pt @ v, "vector")


def compare_conventions(m: Filter, v, scale: int, range_: int) -> float:
    """Sup difference between ``|P^* v|`` and ``|P^T v|`` over the grid."""
    a = scaling_function_grid(m, v, scale, range_, convention="adjoint")
    b = scaling_function_grid(m, v, scale, range_, convention="transpose")
    return float(np.max(np.abs(np.linalg.norm(a.values, axis=-1) - np.linalg.norm(b.values, axis=-1))))


def refinement_residual(m: Filter, gf: GridFunction) -> float:
    """Sup of the refinement defect at every index divisible by ``N``.

    Vector grids hold ``phi_hat`` and are checked against
    ``phi_hat(x) = N^{-1/2} m^*(x/N) phi_hat(x/N)``; matrix grids hold ``P``
    and are checked against ``P(x) = P(x/N) N^{-1/2} m(x/N)``.
    """
    N = gf.dilation
    j = gf.indices
    j = j[j % N == 0]
    x_half = j / N ** (gf.scale + 1)
    A = m.poly.eval_many(x_half) / math.sqrt(N)
    lhs = np.array([gf.at(i) for i in j])
    coarse = np.array([gf.at(i // N) for i in j])
    if gf.kind == "vector":
        rhs = np.einsum("nji,nj->ni", np.conj(A), coarse)
        return float(np.max(np.linalg.norm(lhs - rhs, axis=-1)))
    return sup_norm_on_grid(lhs - coarse @ A)


# correlations ------------------------------------------------------------------


@dataclass(frozen=True)
class TailReport:
    shells_used: int
    last_shell: float  # operator norm of the last shell's contribution
    converged: bool


def correlation_many(
    m: Filter,
    v,
    xs,
    lattice_bound: int,
    tol: float = 0.0,
    *,
    override: bool = False,
) -> tuple[np.ndarray, list[TailReport]]:
    """``h(x) = sum_{|g| <= T} w w^*`` with ``w = P(x+g)^* v``, at each point of ``xs``.

    Shells ``{g, -g}`` are added in order; with ``tol > 0`` a point stops at
    the first shell contributing at most ``tol``.
    """
    if lattice_bound < 1:
        raise ValueError("lattice_bound must be >= 1")
    v = np.asarray(v, dtype=complex).reshape(-1)
    xs = np.atleast_1d(np.asarray(xs, dtype=float))
    g = np.arange(-lattice_bound, lattice_bound + 1)
    P, _ = infinite_product_many(m, (xs[:, None] + g[None, :]).ravel(), override=override)
    w = (np.conj(np.swapaxes(P, -1, -2)) @ v).reshape(len(xs), len(g), -1)
    terms = w[..., :, None] * np.conj(w[..., None, :])
    T = lattice_bound
    # shell s holds g = +-s
    shells = np.concatenate([terms[:, T : T + 1], terms[:, T + 1 :] + terms[:, T - 1 :: -1]], axis=1)
    norms = np.linalg.norm(shells, ord=2, axis=(-2, -1))
    out = []
    reports = []
    for i in range(len(xs)):
        stop = T
        if tol > 0:
            small = np.flatnonzero(norms[i, 1:] <= tol)
            if small.size:
                stop = int(small[0]) + 1
        out.append(shells[i, : stop + 1].sum(axis=0))
        reports.append(TailReport(stop, float(norms[i, stop]), bool(norms[i, stop] <= tol) if tol > 0 else False))
    return np.array(out), reports


def correlation_function(
    m: Filter, v, x: float, lattice_bound: int, tol: float = 0.0, *, override: bool = False
) -> tuple[np.ndarray, TailReport]:
    h, reps = correlation_many(m, v, [x], lattice_bound, tol, override=override)
    return h[0], reps[0]


def correlation_callable(m: Filter, v, lattice_bound: int):
    """``x -> h(x)`` for use with grid checks; periodic in ``x``."""

    def fun(xs):
        return correlation_many(m, v, np.asarray(xs, dtype=float), lattice_bound)[0]

    return fun


def lowpass_unit_callable(m: Filter, lattice_bound: int):
    """``x -> sum_j h_j(x)`` over an orthonormal basis of ``E_1``."""
    basis = el_condition(m).e1_basis
    if not basis:
        raise LowPassError("filter does not satisfy the E(l) condition")

    def fun(xs):
        return sum(correlation_many(m, v, np.asarray(xs, dtype=float), lattice_bound)[0] for v in basis)

    return fun


def verify_harmonic_grid(
    m: Filter, hfun, grid_size: int = 16, k: int = 1, *, max_preimages: int | None = None, workers: int = 1
) -> float:
    """``sup_x ||R^k h(x) - h(x)||`` over ``midpoint_grid(grid_size)``, by preimage enumeration."""
    if k < 1:
        raise ValueError("k must be >= 1")
    fun = as_matrix_function(hfun, m.poly.shape)
    xs = midpoint_grid(grid_size)
    vals = pointwise_powers(m, fun, xs, k, max_preimages=max_preimages, workers=workers)
    return sup_norm_on_grid(vals[k] - vals[0])


def correlation_polynomial(coeffs: dict[int, complex]) -> MatTrigPoly:
    """Scalar helper: a 1x1 polynomial from ``{k: c_k}``."""
    return MatTrigPoly.scalar(coeffs)
