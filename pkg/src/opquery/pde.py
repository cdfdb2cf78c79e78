r"""Uniform-grid PDE toolkit on the unit interval and the unit square.

Three ingredients feed the operator-recovery loop: analytic Dirichlet
Laplacian eigenbases (the reference operator whose spectrum is known in
closed form), finite-difference assembly of constant-coefficient
advection-diffusion operators with banded LU solves, and the closed-form
Green's function of the 1-D convection-diffusion problem.

Eigenfunction columns are scaled by sqrt(quad_weight), so Euclidean inner
products and matrix 2-norms downstream coincide with their discrete-L2
counterparts and no weight factors leak into other modules.

Banded matrices use column-major band storage: band[q + i - j, j] holds
A[i, j] for -q <= i - j <= p, with zero padding in the unused corners.  The
no-pivot LU overwrites that array in place; the trailing update at each
column is a rank-1 update of a parallelogram-shaped window of the band,
which as_strided exposes as an ordinary 2-D view.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numpy.lib.stride_tricks import as_strided

from .errors import (
    DimensionMismatch,
    InvalidRange,
    PecletViolation,
    SingularOperator,
    Underresolved,
)
from .linalg import as_matrix, frobenius

_PIVOT_TOL = 1e-14
_GREENS_C_CUTOFF = 1e-8


@dataclass(frozen=True)
class Grid:
    """Interior nodes of [0,1]^dim; Dirichlet boundary values are implicit zeros."""

    dim: int
    points_per_axis: int
    h: float = field(init=False)
    quad_weight: float = field(init=False)

    def __post_init__(self):
        if self.dim not in (1, 2):
            raise InvalidRange(f"dim must be 1 or 2, got {self.dim}")
        if self.points_per_axis < 1:
            raise InvalidRange("points_per_axis must be at least 1")
        h = 1.0 / (self.points_per_axis + 1)
        object.__setattr__(self, "h", h)
        object.__setattr__(self, "quad_weight", h**self.dim)

    @property
    def n_nodes(self) -> int:
        return self.points_per_axis**self.dim

    def axis_nodes(self) -> np.ndarray:
        """Interior coordinates h, 2h, ..., mh along one axis."""
        return self.h * np.arange(1, self.points_per_axis + 1)


@dataclass(frozen=True)
class EigenBasis:
    """Dirichlet-Laplacian eigenpairs sampled on a grid.

    lambdas is ascending and positive; column k of phis is the k-th
    eigenfunction at the grid nodes times sqrt(quad_weight), which makes
    phisᵀphis the discrete-L2 Gram matrix.
    """

    grid: Grid
    modes: int
    lambdas: np.ndarray
    phis: np.ndarray


@dataclass(frozen=True)
class Coefficients:
    nu: float
    c: float | tuple[float, float]
    r: float


def sine_basis_1d(n_modes: int, grid: Grid) -> EigenBasis:
    """First n_modes eigenpairs sin((k+1)πx), λ = π²(k+1)² on the interval.

    Requires n_modes < points_per_axis/2: at least two interior nodes per
    half-wave of the highest mode beyond the Nyquist limit, so sampled
    modes stay exactly orthogonal and resolvable by the stencils.
    """
    if grid.dim != 1:
        raise DimensionMismatch("1-D basis needs a 1-D grid")
    if n_modes < 1:
        raise InvalidRange("n_modes must be at least 1")
    if 2 * n_modes >= grid.points_per_axis:
        raise Underresolved(
            f"{n_modes} modes need more than {2 * n_modes} grid points, "
            f"got {grid.points_per_axis}"
        )
    ks = np.arange(1, n_modes + 1)
    phis = math.sqrt(2.0 * grid.h) * np.sin(np.pi * np.outer(grid.axis_nodes(), ks))
    lambdas = np.pi**2 * ks.astype(float) ** 2
    return EigenBasis(grid=grid, modes=n_modes, lambdas=lambdas, phis=phis)


def sine_basis_2d(n_modes: int, grid: Grid) -> EigenBasis:
    """Tensor modes 2·sin(iπx)sin(jπy), λ = π²(i²+j²), sorted by λ.

    Ties in λ are broken lexicographically by (i, j).  The frequency box is
    grown until the (n_modes)-th smallest value provably beats everything
    outside the box.
    """
    if grid.dim != 2:
        raise DimensionMismatch("2-D basis needs a 2-D grid")
    if n_modes < 1:
        raise InvalidRange("n_modes must be at least 1")
    k_box = max(2, math.isqrt(n_modes) + 2)
    while True:
        side = np.arange(1, k_box + 1)
        ii, jj = np.meshgrid(side, side, indexing="ij")
        fi, fj = ii.ravel(), jj.ravel()
        s2 = fi * fi + fj * fj
        if s2.size >= n_modes:
            order = np.lexsort((fj, fi, s2))
            # anything outside the box has i² + j² ≥ (k_box+1)² + 1
            if s2[order[n_modes - 1]] < (k_box + 1) ** 2 + 1:
                order = order[:n_modes]
                break
        k_box *= 2
    fi, fj = fi[order], fj[order]
    top = int(max(fi.max(), fj.max()))
    if 2 * top >= grid.points_per_axis:
        raise Underresolved(
            f"mode frequency {top} needs more than {2 * top} points per axis, "
            f"got {grid.points_per_axis}"
        )
    sines = np.sin(np.pi * np.outer(grid.axis_nodes(), np.arange(1, top + 1)))
    m = grid.points_per_axis
    phis = np.empty((m * m, n_modes))
    for k in range(n_modes):
        phis[:, k] = np.outer(sines[:, fi[k] - 1], sines[:, fj[k] - 1]).ravel()
    phis *= 2.0 * grid.h
    lambdas = np.pi**2 * (fi.astype(float) ** 2 + fj.astype(float) ** 2)
    return EigenBasis(grid=grid, modes=n_modes, lambdas=lambdas, phis=phis)


def _factor_banded(band: np.ndarray, p: int, q: int) -> np.ndarray:
    """No-pivot LU of column-major band storage; returns the packed factors.

    Valid without pivoting for the diagonally dominant stencils assembled
    here; a pivot below 1e-14 times the matrix scale aborts instead of
    dividing garbage through the factorization.
    """
    lu = np.asfortranarray(band.copy())
    n = lu.shape[1]
    tol = _PIVOT_TOL * frobenius(lu)
    if tol == 0.0:
        raise SingularOperator("zero operator")
    s0, s1 = lu.strides
    for j in range(n - 1):
        piv = lu[q, j]
        if abs(piv) < tol:
            raise SingularOperator(f"pivot {piv:.3e} at column {j} below {tol:.3e}")
        pl = min(p, n - 1 - j)
        ql = min(q, n - 1 - j)
        col = lu[q + 1 : q + 1 + pl, j]
        col /= piv
        if pl and ql:
            row = as_strided(lu[q - 1 :, j + 1 :], shape=(ql,), strides=(s1 - s0,))
            window = as_strided(lu[q:, j + 1 :], shape=(pl, ql), strides=(s0, s1 - s0))
            window -= col[:, None] * row[None, :]
    if abs(lu[q, n - 1]) < tol:
        raise SingularOperator(f"pivot {lu[q, n - 1]:.3e} at column {n - 1} below {tol:.3e}")
    return lu


def _solve_banded(lu: np.ndarray, p: int, q: int, rhs: np.ndarray) -> np.ndarray:
    """Forward/back substitution on packed factors; rhs may carry many columns."""
    x = np.array(rhs, dtype=float)
    single = x.ndim == 1
    if single:
        x = x[:, None]
    n = lu.shape[1]
    for j in range(n - 1):
        pl = min(p, n - 1 - j)
        x[j + 1 : j + 1 + pl] -= lu[q + 1 : q + 1 + pl, j][:, None] * x[j]
    for j in range(n - 1, -1, -1):
        x[j] /= lu[q, j]
        ql = min(q, j)
        if ql:
            x[j - ql : j] -= lu[q - ql : q, j][:, None] * x[j]
    return x[:, 0] if single else x


class DiscreteOperator:
    """Constant-coefficient FD operator with a cached banded LU.

    The factorization is computed at construction and never mutated, so
    solve is read-only and safe to call concurrently for distinct
    right-hand sides.
    """

    def __init__(self, grid: Grid, coeffs: Coefficients, band_matrix: np.ndarray, p: int, q: int):
        self.grid = grid
        self.coeffs = coeffs
        self.band_matrix = band_matrix
        self.bandwidths = (p, q)
        self.factorization = _factor_banded(band_matrix, p, q)

    @property
    def n_nodes(self) -> int:
        return self.band_matrix.shape[1]

    def apply(self, vec) -> np.ndarray:
        """Band matrix-vector (or matrix-matrix) product, no factorization involved."""
        x = np.asarray(vec, dtype=float)
        single = x.ndim == 1
        if single:
            x = x[:, None]
        if x.shape[0] != self.n_nodes:
            raise DimensionMismatch(f"expected {self.n_nodes} rows, got {x.shape[0]}")
        p, q = self.bandwidths
        n = self.n_nodes
        y = np.zeros_like(x)
        for d in range(-q, p + 1):
            diag = self.band_matrix[q + d]
            if d >= 0:
                y[d:] += diag[: n - d, None] * x[: n - d]
            else:
                y[: n + d] += diag[-d:, None] * x[-d:]
        return y[:, 0] if single else y

    def to_dense(self) -> np.ndarray:
        p, q = self.bandwidths
        n = self.n_nodes
        dense = np.zeros((n, n))
        for d in range(-q, p + 1):
            diag = self.band_matrix[q + d]
            if d >= 0:
                dense[np.arange(d, n), np.arange(n - d)] = diag[: n - d]
            else:
                dense[np.arange(n + d), np.arange(-d, n)] = diag[-d:]
        return dense


def _check_peclet(nu: float, cs, h: float):
    if nu == 0.0:
        raise InvalidRange("nu must be nonzero")
    worst = max(abs(float(c)) for c in cs)
    peclet = worst * h / (2.0 * abs(nu))
    if peclet >= 1.0:
        raise PecletViolation(
            f"grid Peclet number {peclet:.3f} >= 1 for |c| = {worst:g}; refine the grid"
        )


def assemble_1d(nu: float, c: float, r: float, grid: Grid) -> DiscreteOperator:
    """Tridiagonal stencil for nu·u″ + c·u′ + r·u with zero Dirichlet data."""
    if grid.dim != 1:
        raise DimensionMismatch("assemble_1d needs a 1-D grid")
    h = grid.h
    _check_peclet(nu, (c,), h)
    m = grid.points_per_axis
    band = np.zeros((3, m), order="F")
    band[1, :] = -2.0 * nu / h**2 + r
    band[0, 1:] = nu / h**2 + c / (2.0 * h)
    band[2, : m - 1] = nu / h**2 - c / (2.0 * h)
    return DiscreteOperator(grid, Coefficients(nu, float(c), r), band, 1, 1)


def assemble_2d(nu: float, c, r: float, grid: Grid) -> DiscreteOperator:
    """Five-point stencil for nu·Δu + c·∇u + r·u on the unit square.

    Nodes are flattened x-major: node (x_i, y_j) sits at index i·m + j, so
    y-neighbours are offset ±1 (zeroed across row seams) and x-neighbours
    are offset ±m; the bandwidth equals points_per_axis.
    """
    if grid.dim != 2:
        raise DimensionMismatch("assemble_2d needs a 2-D grid")
    cx, cy = (float(c[0]), float(c[1]))
    h = grid.h
    _check_peclet(nu, (cx, cy), h)
    m = grid.points_per_axis
    n = m * m
    band = np.zeros((2 * m + 1, n), order="F")
    q = m
    band[q, :] = -4.0 * nu / h**2 + r
    cols = np.arange(n)
    band[q - 1, (cols % m != 0) & (cols >= 1)] = nu / h**2 + cy / (2.0 * h)
    band[q + 1, (cols % m != m - 1) & (cols <= n - 2)] = nu / h**2 - cy / (2.0 * h)
    band[q - m, m:] = nu / h**2 + cx / (2.0 * h)
    band[q + m, : n - m] = nu / h**2 - cx / (2.0 * h)
    return DiscreteOperator(grid, Coefficients(nu, (cx, cy), r), band, m, m)


def solve(op: DiscreteOperator, rhs) -> np.ndarray:
    """Solve op·u = rhs via the cached LU; a 2-D rhs is solved column by column.

    Column results are bitwise identical whether columns arrive stacked or
    one at a time: the substitution sweeps touch each column independently.
    """
    x = np.asarray(rhs, dtype=float)
    if x.shape[0] != op.n_nodes:
        raise DimensionMismatch(f"rhs has {x.shape[0]} rows, operator has {op.n_nodes} nodes")
    p, q = op.bandwidths
    return _solve_banded(op.factorization, p, q, x)


@dataclass(frozen=True)
class GreensSample:
    """Kernel values on a 1-D tensor grid: values[i, j] ≈ G(x_i, y_j)."""

    grid: Grid
    values: np.ndarray
    c: float | None


def greens_exact_convdiff(c: float, x: float, y: float) -> float:
    r"""Green's function of -u″ + c·u′ = f on (0,1) with zero Dirichlet data.

    For y <= x:
        G = (1 - e^{c(x-1)}) (1 - e^{-cy}) / (c (1 - e^{-c}))
    and symmetrically for y >= x; both branches agree on the diagonal.
    Below |c| = 1e-8 the analytic limit min(x,y)(1 - max(x,y)) is used,
    and expm1 keeps the general form stable for small c elsewhere.
    """
    if not (0.0 <= x <= 1.0 and 0.0 <= y <= 1.0):
        raise InvalidRange(f"point ({x}, {y}) outside the unit square")
    if abs(c) < _GREENS_C_CUTOFF:
        lo, hi = (x, y) if x <= y else (y, x)
        return lo * (1.0 - hi)
    den = -c * math.expm1(-c)
    if y <= x:
        return math.expm1(c * (x - 1.0)) * math.expm1(-c * y) / den
    return math.expm1(c * x) * math.exp(-c) * math.expm1(c * (1.0 - y)) / den


def greens_exact_grid(c: float, xs, ys) -> np.ndarray:
    """greens_exact_convdiff evaluated on the tensor grid xs × ys in one shot."""
    x = np.asarray(xs, dtype=float)[:, None]
    y = np.asarray(ys, dtype=float)[None, :]
    for axis in (x, y):
        if axis.size and (axis.min() < 0.0 or axis.max() > 1.0):
            raise InvalidRange("grid coordinates must lie in [0, 1]")
    if abs(c) < _GREENS_C_CUTOFF:
        return np.minimum(x, y) * (1.0 - np.maximum(x, y))
    den = -c * math.expm1(-c)
    lower = np.expm1(c * (x - 1.0)) * np.expm1(-c * y)
    upper = np.expm1(c * x) * math.exp(-c) * np.expm1(c * (1.0 - y))
    return np.where(y <= x, lower, upper) / den


def greens_kernel_from_responses(basis: EigenBasis, responses, c: float | None = None) -> GreensSample:
    """Degree-n kernel of the recovered operator: values = responses·phisᵀ/weight.

    Column k of responses must be the sampled solution for right-hand side
    φₖ in the same sqrt-weight scaling as the basis.  The optional c tags
    the sample with the convection coefficient it came from.
    """
    if basis.grid.dim != 1:
        raise DimensionMismatch("kernel sampling is 1-D only")
    resp = as_matrix(responses)
    if resp.shape != basis.phis.shape:
        raise DimensionMismatch(
            f"responses shape {resp.shape} does not match basis {basis.phis.shape}"
        )
    values = resp @ basis.phis.T / basis.grid.quad_weight
    return GreensSample(grid=basis.grid, values=values, c=c)
