"""Deterministic dense linear algebra kernels.

Matrices are plain C-contiguous float64 numpy arrays (validated by
:func:`as_matrix`); everything here is a pure function of its inputs plus an
explicit seed, so concurrent use on distinct inputs is safe.

All randomness flows through :class:`Rng`, a SplitMix64 generator: 64-bit
state advanced by the golden-gamma increment, finalized with two xor-shift
multiplies. Splitting derives an independent child stream from (state, tag),
which keeps every randomized kernel reproducible bit for bit from one root
seed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    ConvergenceFailure,
    DimensionMismatch,
    InvalidRange,
    RankDeficient,
)

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15

# Jacobi sweep budget; cyclic one-sided Jacobi on well-scaled input converges
# in ~10 sweeps, the budget only guards pathological inputs.
_SVD_MAX_SWEEPS = 64
_SVD_MAX_DIM = 512


@dataclass(frozen=True)
class Seed:
    """64-bit unsigned seed; equal seeds reproduce results bit for bit."""

    value: int = 0

    def __post_init__(self):
        if not (0 <= self.value <= _MASK64):
            raise InvalidRange(f"seed must be a 64-bit unsigned integer, got {self.value}")


def _as_seed(seed) -> int:
    if isinstance(seed, Seed):
        return seed.value
    return Seed(int(seed)).value


def _mix64(z: int) -> int:
    z = (z + _GOLDEN) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


class Rng:
    """SplitMix64 stream with Box-Muller gaussians."""

    def __init__(self, seed=0):
        self._state = _as_seed(seed)
        self._spare = None

    def u64(self) -> int:
        self._state = (self._state + _GOLDEN) & _MASK64
        z = self._state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
        return z ^ (z >> 31)

    def uniform(self) -> float:
        # 53-bit mantissa in [0, 1)
        return (self.u64() >> 11) * 2.0**-53

    def normal(self) -> float:
        if self._spare is not None:
            z, self._spare = self._spare, None
            return z
        # Box-Muller; reject u1 = 0 so the log is finite
        u1 = 0.0
        while u1 == 0.0:
            u1 = self.uniform()
        u2 = self.uniform()
        r = math.sqrt(-2.0 * math.log(u1))
        self._spare = r * math.sin(2.0 * math.pi * u2)
        return r * math.cos(2.0 * math.pi * u2)

    def normals(self, rows: int, cols: int) -> np.ndarray:
        out = np.empty((rows, cols))
        flat = out.reshape(-1)
        for i in range(flat.size):
            flat[i] = self.normal()
        return out

    def split(self, tag: int) -> "Rng":
        """Independent child stream determined by (current seed, tag)."""
        return Rng(_mix64(self._state ^ _mix64(tag & _MASK64)))


@dataclass(frozen=True)
class SVDTriple:
    """Slim SVD factors: u (m×r), s nonincreasing ≥ 0, v (n×r)."""

    u: np.ndarray
    s: np.ndarray
    v: np.ndarray


def as_matrix(a) -> np.ndarray:
    """Validate and normalize a real dense matrix: 2-D, float64, finite."""
    m = np.ascontiguousarray(a, dtype=float)
    if m.ndim != 2:
        raise DimensionMismatch(f"expected a 2-D matrix, got ndim={m.ndim}")
    if m.size and not np.isfinite(m).all():
        raise InvalidRange("matrix entries must be finite")
    return m


def frobenius(m: np.ndarray) -> float:
    return float(np.sqrt(np.sum(m * m)))


def qr_factor(m) -> tuple[np.ndarray, np.ndarray]:
    """Thin Householder QR with nonnegative R diagonal.

    Parameters
    ----------
    m : array_like, shape (rows, cols)
        Must have full column rank up to 1e-12 relative tolerance.

    Returns
    -------
    q : ndarray, shape (rows, cols), orthonormal columns
    r : ndarray, shape (cols, cols), upper triangular, diag >= 0
    """
    a = as_matrix(m).copy()
    rows, cols = a.shape
    if rows < cols:
        raise RankDeficient(f"{rows}x{cols} matrix cannot have {cols} independent columns")
    scale = frobenius(a)
    # Householder vectors stored column by column
    vs = []
    for j in range(cols):
        x = a[j:, j].copy()
        nx = math.sqrt(float(np.dot(x, x)))
        if nx == 0.0:
            raise RankDeficient(f"column {j} is dependent (zero pivot)")
        # reflect onto -sign(x0)*||x|| e1 to avoid cancellation
        s = -1.0 if x[0] < 0 else 1.0
        x0 = x[0] + s * nx
        v = x.copy()
        v[0] = x0
        vn = math.sqrt(float(np.dot(v, v)))
        v /= vn
        a[j:, j:] -= 2.0 * np.outer(v, v @ a[j:, j:])
        vs.append(v)
    r = np.triu(a[:cols, :cols]).copy()
    tol = 1e-12 * scale
    small = np.abs(np.diag(r)) <= tol
    if small.any():
        j = int(np.nonzero(small)[0][0])
        raise RankDeficient(f"R diagonal {j} below tolerance {tol:.3e}")
    # back-accumulate Q = H_0 ... H_{cols-1} applied to the first cols columns of I
    q = np.zeros((rows, cols))
    for j in range(cols):
        q[j, j] = 1.0
    for j in range(cols - 1, -1, -1):
        v = vs[j]
        q[j:, :] -= 2.0 * np.outer(v, v @ q[j:, :])
    # normalize signs so diag(r) >= 0
    d = np.where(np.diag(r) < 0, -1.0, 1.0)
    q *= d
    r *= d[:, None]
    return q, r


def _complete_column(u: np.ndarray, taken: list[int]) -> np.ndarray:
    """Unit vector orthogonal to the columns of u listed in `taken`."""
    rows = u.shape[0]
    for c in range(rows):
        v = np.zeros(rows)
        v[c] = 1.0
        for _ in range(2):
            for j in taken:
                v -= np.dot(u[:, j], v) * u[:, j]
        n = math.sqrt(float(np.dot(v, v)))
        if n > 1e-8:
            return v / n
    raise ConvergenceFailure("could not complete an orthonormal basis")


def svd(m) -> SVDTriple:
    """Slim SVD by one-sided Jacobi rotations on the narrower orientation.

    Column pairs of the working matrix are rotated until all mutual inner
    products fall below 1e-14·||m||_F²; singular values are the resulting
    column norms. Each singular-vector pair is signed so the largest-magnitude
    entry of the u column is positive.
    """
    a0 = as_matrix(m)
    rows, cols = a0.shape
    r = min(rows, cols)
    if r == 0:
        raise DimensionMismatch("empty matrix has no SVD")
    if r > _SVD_MAX_DIM:
        raise DimensionMismatch(f"small dense SVD is limited to min dim {_SVD_MAX_DIM}, got {r}")
    transposed = cols > rows
    a = (a0.T if transposed else a0).copy()
    n = a.shape[1]
    frob = frobenius(a)
    v = np.eye(n)
    if frob > 0.0:
        off_tol = 1e-14 * frob * frob
        for _sweep in range(_SVD_MAX_SWEEPS):
            rotated = False
            for i in range(n - 1):
                for j in range(i + 1, n):
                    g = float(np.dot(a[:, i], a[:, j]))
                    if abs(g) <= off_tol:
                        continue
                    rotated = True
                    aa = float(np.dot(a[:, i], a[:, i]))
                    bb = float(np.dot(a[:, j], a[:, j]))
                    zeta = (bb - aa) / (2.0 * g)
                    t = math.copysign(1.0, zeta) / (abs(zeta) + math.sqrt(1.0 + zeta * zeta))
                    cs = 1.0 / math.sqrt(1.0 + t * t)
                    sn = cs * t
                    ai = a[:, i].copy()
                    a[:, i] = cs * ai - sn * a[:, j]
                    a[:, j] = sn * ai + cs * a[:, j]
                    vi = v[:, i].copy()
                    v[:, i] = cs * vi - sn * v[:, j]
                    v[:, j] = sn * vi + cs * v[:, j]
            if not rotated:
                break
        else:
            raise ConvergenceFailure(f"Jacobi SVD did not converge in {_SVD_MAX_SWEEPS} sweeps")
    norms = np.sqrt(np.sum(a * a, axis=0))
    order = np.argsort(-norms, kind="stable")
    s = norms[order]
    u = np.zeros((a.shape[0], n))
    vv = v[:, order].copy()
    tiny = 1e-14 * frob
    good: list[int] = []
    for k in range(n):
        if s[k] > tiny:
            u[:, k] = a[:, order[k]] / s[k]
            good.append(k)
    for k in range(n):
        if s[k] <= tiny:
            u[:, k] = _complete_column(u, good)
            good.append(k)
    for k in range(n):
        idx = int(np.argmax(np.abs(u[:, k])))
        if u[idx, k] < 0:
            u[:, k] = -u[:, k]
            vv[:, k] = -vv[:, k]
    if transposed:
        return SVDTriple(u=vv, s=s, v=u)
    return SVDTriple(u=u, s=s, v=vv)


def _orthonormal_block(w: np.ndarray, rng: Rng) -> np.ndarray:
    """Orthonormalize columns in place order; dead columns are replaced by
    fresh random directions so the block keeps full rank."""
    rows, cols = w.shape
    q = np.zeros((rows, cols))
    for j in range(cols):
        x = w[:, j].copy()
        ref = math.sqrt(float(np.dot(x, x)))
        for _attempt in range(rows + 1):
            v = x.copy()
            for _ in range(2):  # projected twice for stable orthogonality
                for i in range(j):
                    v -= np.dot(q[:, i], v) * q[:, i]
            n = math.sqrt(float(np.dot(v, v)))
            if n > max(1e-13 * ref, 1e-290):
                q[:, j] = v / n
                break
            x = np.array([rng.normal() for _ in range(rows)])
            ref = math.sqrt(float(np.dot(x, x)))
        else:
            raise ConvergenceFailure("could not build an orthonormal start block")
    return q


def spectral_norm(m, tol: float = 1e-10, max_iter: int = 10000, seed=Seed(0)) -> float:
    """Largest singular value by seeded block power iteration on mᵀm.

    A block of 4 random start vectors guards against an unlucky start being
    orthogonal to the top singular space; the estimate is the Rayleigh-Ritz
    value of the current block, and iteration stops when its relative change
    stays within tol on two consecutive steps.
    """
    a = as_matrix(m)
    if tol <= 0:
        raise InvalidRange("tol must be positive")
    if max_iter < 1:
        raise InvalidRange("max_iter must be at least 1")
    if frobenius(a) == 0.0:
        return 0.0
    rows, cols = a.shape
    b = min(4, cols, rows)
    rng = Rng(seed)
    block = _orthonormal_block(rng.normals(cols, b), rng)
    prev = -1.0
    calm = 0
    for _it in range(max_iter):
        z = a @ block
        gram = z.T @ z
        sigma = math.sqrt(max(float(svd(gram).s[0]), 0.0))
        if sigma == 0.0:
            # block fell entirely in the null space; restart from fresh noise
            block = _orthonormal_block(rng.normals(cols, b), rng)
            prev = -1.0
            calm = 0
            continue
        if prev >= 0.0 and abs(sigma - prev) <= tol * sigma:
            calm += 1
            if calm >= 2:
                return sigma
        else:
            calm = 0
        prev = sigma
        block = _orthonormal_block(a.T @ z, rng)
    raise ConvergenceFailure(f"power iteration did not settle within {max_iter} iterations")


def principal_angles(u, v) -> np.ndarray:
    """Angles 0 ≤ θ₁ ≤ … ≤ θ_k ≤ π/2 between the column spaces of u and v.

    Both inputs must have orthonormal columns of the same shape; angles come
    from arccos of the singular values of uᵀv (clamped into [-1, 1]).
    """
    uu = as_matrix(u)
    vv = as_matrix(v)
    if uu.shape != vv.shape:
        raise DimensionMismatch(f"shape mismatch {uu.shape} vs {vv.shape}")
    g = uu.T @ vv
    # canonical orientation: swapping u and v transposes g, so pick one of
    # g/gᵀ by byte order to make the symmetric contract hold bitwise
    gt = np.ascontiguousarray(g.T)
    if gt.tobytes() < g.tobytes():
        g = gt
    cosines = np.clip(svd(g).s, -1.0, 1.0)
    # cosines are nonincreasing, so arccos gives the angles in ascending order
    return np.arccos(cosines)


def numerical_rank(m, tol: float) -> int:
    """Number of singular values above tol·σ_max; 0 for the zero matrix."""
    if tol <= 0:
        raise InvalidRange("tol must be positive")
    a = as_matrix(m)
    if frobenius(a) == 0.0:
        return 0
    s = svd(a).s
    if s[0] == 0.0:
        return 0
    return int(np.sum(s > tol * s[0]))
