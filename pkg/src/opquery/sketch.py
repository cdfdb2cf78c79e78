"""Ambiguity bounds for recovering a near-symmetric low-rank matrix from a
sketch, plus the explicit extremal pair that witnesses the lower bound.

The central object is the set of rank-k, ε-near-symmetric matrices A that
agree with the hidden matrix F on a test sketch, AX = FX. Its diameter limits
what any forward-query algorithm can recover; the functions here compute a
certified upper bound on that diameter, a closed-form lower bound, and a pair
B± inside the set that attains the lower bound exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, InvalidRange, NoComplement, ZeroMatrix
from .linalg import Rng, Seed, as_matrix, frobenius, numerical_rank, qr_factor, svd

_RANK_TOL = 1e-10  # singular values below this fraction of sigma_max count as zero


@dataclass(frozen=True)
class SketchInstance:
    """A hidden-matrix recovery problem.

    f is the hidden n×n matrix of rank k, x an n×s test matrix with
    orthonormal columns revealing the range (rank(fx) = k), delta the true
    near-symmetry of f, and epsilon >= delta the assumed prior knowledge.
    """

    f: np.ndarray
    x: np.ndarray
    k: int
    delta: float
    epsilon: float

    def __post_init__(self):
        f = as_matrix(self.f)
        x = as_matrix(self.x)
        object.__setattr__(self, "f", f)
        object.__setattr__(self, "x", x)
        n = f.shape[0]
        if f.shape != (n, n):
            raise DimensionMismatch(f"hidden matrix must be square, got {f.shape}")
        if x.shape[0] != n:
            raise DimensionMismatch(f"test matrix row count {x.shape[0]} != {n}")
        if not (0.0 <= self.delta <= self.epsilon < 1.0):
            raise InvalidRange(f"need 0 <= delta <= epsilon < 1, got ({self.delta}, {self.epsilon})")
        gram_err = svd(x.T @ x - np.eye(x.shape[1])).s[0]
        if gram_err > 1e-12:
            raise InvalidRange(f"test matrix columns not orthonormal (deviation {gram_err:.3e})")
        if numerical_rank(f, _RANK_TOL) != self.k:
            raise InvalidRange(f"rank of hidden matrix != {self.k}")
        if numerical_rank(f @ x, _RANK_TOL) != self.k:
            raise InvalidRange("test matrix does not reveal the full range (rank(fx) != k)")
        if near_symmetry_delta(f) > self.delta + 1e-10:
            raise InvalidRange("hidden matrix is less symmetric than the declared delta")


@dataclass(frozen=True)
class BoundReport:
    """Diameter bounds; upper is None when the theorem precondition fails."""

    upper: float | None
    lower: float
    c_constant: float
    fx_norm: float

    def to_dict(self) -> dict:
        return {
            "upper": self.upper,
            "lower": self.lower,
            "c_constant": self.c_constant,
            "fx_norm": self.fx_norm,
        }


@dataclass(frozen=True)
class MembershipReport:
    rank_ok: bool
    sketch_residual: float
    symmetry_delta: float
    in_set: bool

    def to_dict(self) -> dict:
        return {
            "rank_ok": self.rank_ok,
            "sketch_residual": self.sketch_residual,
            "symmetry_delta": self.symmetry_delta,
            "in_set": self.in_set,
        }


def near_symmetry_delta(f, rank_tol: float = _RANK_TOL) -> float:
    """Distance of U_FᵀV_F to the orthogonal group: 1 − σ_min(U_FᵀV_F).

    U_F, V_F come from the slim SVD of f truncated at the numerical rank
    (threshold rank_tol·σ_max). 0 means the left and right singular subspaces
    align (e.g. any symmetric matrix); 1 means they can be fully orthogonal.
    """
    a = as_matrix(f)
    scale = frobenius(a)
    if scale == 0.0:
        raise ZeroMatrix("near-symmetry of the zero matrix is undefined")
    # power-of-two prescaling: exact in floating point, so positive dyadic
    # rescalings of f reproduce the result bit for bit
    a = a / math.ldexp(1.0, math.frexp(scale)[1])
    t = svd(a)
    r = int(np.sum(t.s > rank_tol * t.s[0]))
    smin = svd(t.u[:, :r].T @ t.v[:, :r]).s[-1]
    return float(min(max(1.0 - smin, 0.0), 1.0))


def align_rotation(u, v) -> np.ndarray:
    """Closest orthogonal alignment Q₀ = QₗQᵣᵀ from the SVD uᵀv = QₗΣQᵣᵀ.

    For orthonormal u, v this minimizes ‖v − u·Q‖₂ over orthogonal Q, with
    the minimum satisfying ‖v − uQ₀‖₂² = 2(1 − σ_min(uᵀv)).
    """
    uu = as_matrix(u)
    vv = as_matrix(v)
    if uu.shape != vv.shape:
        raise DimensionMismatch(f"shape mismatch {uu.shape} vs {vv.shape}")
    t = svd(uu.T @ vv)
    return t.u @ t.v.T


def diameter_lower_bound(f, epsilon: float, delta: float) -> float:
    """Closed-form lower bound on the ambiguity diameter.

    2(σ_min²/σ_max)·(arccos(1−ε) − arccos(1−δ))/(π/2 + arccos(1−ε) − arccos(1−δ)),
    with σ_min, σ_max over the nonzero singular values of f.
    """
    if not (0.0 <= delta <= epsilon < 1.0):
        raise InvalidRange(f"need 0 <= delta <= epsilon < 1, got ({delta}, {epsilon})")
    a = as_matrix(f)
    if frobenius(a) == 0.0:
        raise ZeroMatrix("lower bound needs a nonzero matrix")
    s = svd(a).s
    s = s[s > _RANK_TOL * s[0]]
    gap = math.acos(1.0 - epsilon) - math.acos(1.0 - delta)
    return 2.0 * (s[-1] ** 2 / s[0]) * gap / (math.pi / 2.0 + gap)


def diameter_upper_bound(inst: SketchInstance) -> BoundReport:
    """Certified bound report for an instance.

    upper = 4‖FX‖₂·c²(√(2ε)+√(2δ))/(1 − c(√(2ε)+√(2δ))) with
    c = σ_max(XᵀV₀)/σ_min(XᵀV₀)², valid only while c(√(2ε)+√(2δ)) < 1;
    otherwise upper is reported absent. lower always comes from
    diameter_lower_bound.
    """
    t = svd(inst.f)
    v0 = t.v[:, : inst.k]
    xv = svd(inst.x.T @ v0).s
    c = float(xv[0] / xv[-1] ** 2)
    fx_norm = float(svd(inst.f @ inst.x).s[0])
    tau = math.sqrt(2.0 * inst.epsilon) + math.sqrt(2.0 * inst.delta)
    upper = None
    if c * tau < 1.0:
        upper = 4.0 * fx_norm * (c * c * tau) / (1.0 - c * tau)
    lower = diameter_lower_bound(inst.f, inst.epsilon, inst.delta)
    return BoundReport(upper=upper, lower=lower, c_constant=c, fx_norm=fx_norm)


def _complement_direction(x: np.ndarray) -> np.ndarray:
    """First canonical vector with a usable projection onto Range(x)^⊥."""
    n = x.shape[0]
    for i in range(n):
        cand = -x @ x[i, :].copy()
        cand[i] += 1.0
        nrm = math.sqrt(float(np.dot(cand, cand)))
        if nrm >= 1e-8:
            return cand / nrm
    raise NoComplement("no canonical direction survives projection off Range(x)")


def construct_extremal_pair(inst: SketchInstance, seed=Seed(0)) -> tuple[np.ndarray, np.ndarray]:
    """Extremal members B± = F(I ± E) of the ambiguity set.

    E = η·v_min·zᵀ with v_min the right singular vector at σ_min(F), z a unit
    vector in Range(X)^⊥ picked by deterministic canonical-vector projection,
    and η = (σ_min/σ_max)·(arccos(1−ε) − arccos(1−δ))/(π/2 + arccos(1−ε) − arccos(1−δ)).
    The pair separates by exactly 2σ_min(F)·η while both members keep the
    sketch, the rank, and ε-near-symmetry. The seed is accepted for interface
    stability; the construction itself is deterministic.
    """
    n = inst.f.shape[0]
    if inst.x.shape[1] >= n:
        raise NoComplement(f"need s < n for a nontrivial complement, got s={inst.x.shape[1]}")
    if inst.epsilon == inst.delta:
        return inst.f.copy(), inst.f.copy()
    t = svd(inst.f)
    smax = float(t.s[0])
    smin = float(t.s[inst.k - 1])
    v_min = t.v[:, inst.k - 1]
    z = _complement_direction(inst.x)
    gap = math.acos(1.0 - inst.epsilon) - math.acos(1.0 - inst.delta)
    eta = (smin / smax) * gap / (math.pi / 2.0 + gap)
    fe = eta * np.outer(inst.f @ v_min, z)
    return inst.f + fe, inst.f - fe


def membership_check(a, inst: SketchInstance, tol: float = 1e-8) -> MembershipReport:
    """Check the three defining conditions: rank k, sketch match, ε-near-symmetry.

    The sketch residual ‖AX − FX‖₂ is compared against tol·‖FX‖₂; the
    symmetry condition allows tol additively.
    """
    m = as_matrix(a)
    if m.shape != inst.f.shape:
        raise DimensionMismatch(f"candidate shape {m.shape} != {inst.f.shape}")
    rank_ok = numerical_rank(m, _RANK_TOL) == inst.k
    fx = inst.f @ inst.x
    residual = float(svd(m @ inst.x - fx).s[0])
    fx_norm = float(svd(fx).s[0])
    try:
        sym = near_symmetry_delta(m)
    except ZeroMatrix:
        sym = 0.0
    in_set = bool(rank_ok and residual <= tol * fx_norm and sym <= inst.epsilon + tol)
    return MembershipReport(rank_ok=rank_ok, sketch_residual=residual, symmetry_delta=sym, in_set=in_set)


def toeplitz_from_two_queries(oracle, n: int) -> np.ndarray:
    """Reconstruct an n×n Toeplitz matrix from the two products Te₁ and Te_n.

    Te₁ is the first column; Te_n read backwards is the first row. No
    consistency check is possible from two queries, so a non-Toeplitz oracle
    is reproduced incorrectly without complaint.
    """
    e_first = np.zeros(n)
    e_first[0] = 1.0
    e_last = np.zeros(n)
    e_last[-1] = 1.0
    col = np.asarray(oracle(e_first), dtype=float).reshape(n)
    last_col = np.asarray(oracle(e_last), dtype=float).reshape(n)
    row = last_col[::-1]  # row[j] = T[0, j]
    idx = np.arange(n)
    diff = idx[:, None] - idx[None, :]
    return np.where(diff >= 0, col[np.clip(diff, 0, n - 1)], row[np.clip(-diff, 0, n - 1)])


def toeplitz_matrix(first_col, first_row) -> np.ndarray:
    """Dense Toeplitz matrix from its first column and first row.

    first_col[0] and first_row[0] must agree.
    """
    c = np.asarray(first_col, dtype=float)
    r = np.asarray(first_row, dtype=float)
    if c[0] != r[0]:
        raise InvalidRange("first column and first row disagree at (0, 0)")
    n = c.size
    idx = np.arange(n)
    diff = idx[:, None] - idx[None, :]
    return np.where(diff >= 0, c[np.clip(diff, 0, n - 1)], r[np.clip(-diff, 0, n - 1)])


def random_instance(n: int, s: int, k: int, delta: float, epsilon: float, seed=Seed(0)) -> SketchInstance:
    """Canonical δ-near-symmetric fixture family.

    F = U_k·diag(σ)·Vᵀ with V the first k columns of U rotated by the angle
    arccos(1−δ) in the (k, k+1) coordinate plane, which makes
    1 − σ_min(U_FᵀV_F) = δ exactly. Singular values are drawn in [1, 2], and
    X is a random orthonormal n×s test matrix.
    """
    if not (1 <= k < n):
        raise InvalidRange(f"need 1 <= k < n, got k={k}, n={n}")
    if not (k <= s < n):
        raise InvalidRange(f"need k <= s < n, got s={s}")
    rng = Rng(seed)
    u, _ = qr_factor(rng.normals(n, n))
    sing = np.sort(np.array([1.0 + rng.uniform() for _ in range(k)]))[::-1]
    v = u[:, :k].copy()
    theta = math.acos(1.0 - delta)
    v[:, k - 1] = math.cos(theta) * u[:, k - 1] + math.sin(theta) * u[:, k]
    f = (u[:, :k] * sing) @ v.T
    x, _ = qr_factor(rng.normals(n, s))
    return SketchInstance(f=f, x=x, k=k, delta=delta, epsilon=epsilon)
