import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from opquery.errors import DimensionMismatch, InvalidRange, NoComplement, ZeroMatrix
from opquery.linalg import Rng, Seed, qr_factor
from opquery.sketch import (
    SketchInstance,
    align_rotation,
    construct_extremal_pair,
    diameter_lower_bound,
    diameter_upper_bound,
    membership_check,
    near_symmetry_delta,
    random_instance,
    toeplitz_from_two_queries,
    toeplitz_matrix,
)

from oracles import min_dist_to_O2


class CountingOracle:
    def __init__(self, matrix):
        self.matrix = np.asarray(matrix, dtype=float)
        self.calls = 0

    def __call__(self, vec):
        self.calls += 1
        return self.matrix @ vec


class TestNearSymmetryDelta:
    def test_spd_is_zero(self):
        rng = np.random.default_rng(0)
        w = rng.standard_normal((5, 5))
        spd = w @ w.T + 5.0 * np.eye(5)
        assert near_symmetry_delta(spd) <= 1e-12

    def test_orthogonal_rank_one_is_one(self):
        u = np.zeros(6)
        v = np.zeros(6)
        u[0] = 1.0
        v[1] = 1.0
        assert abs(near_symmetry_delta(np.outer(u, v)) - 1.0) <= 1e-12

    def test_rank_two_against_O2_sweep(self):
        # brute-force the defining minimization over orthogonal 2x2 matrices
        rng = Rng(4)
        f = np.outer(rng.normals(6, 1)[:, 0], rng.normals(6, 1)[:, 0])
        f += np.outer(rng.normals(6, 1)[:, 0], rng.normals(6, 1)[:, 0])
        u, s, vt = np.linalg.svd(f)
        m2 = u[:, :2].T @ vt[:2, :].T
        assert abs(near_symmetry_delta(f) - min_dist_to_O2(m2)) <= 1e-6

    def test_zero_matrix_raises(self):
        with pytest.raises(ZeroMatrix):
            near_symmetry_delta(np.zeros((3, 3)))

    def test_dyadic_scaling_exact(self):
        f = Rng(12).normals(5, 5)
        base = near_symmetry_delta(f)
        for alpha in (0.25, 2.0, 1024.0, 2.0**-20):
            assert near_symmetry_delta(alpha * f) == base

    @settings(max_examples=20, deadline=None)
    @given(st.integers(0, 2**32), st.floats(0.1, 100.0))
    def test_general_scaling(self, seed, alpha):
        f = Rng(seed).normals(4, 4)
        assert abs(near_symmetry_delta(alpha * f) - near_symmetry_delta(f)) <= 1e-12

    @settings(max_examples=20, deadline=None)
    @given(st.integers(0, 2**32))
    def test_orthogonal_conjugation_invariance(self, seed):
        rng = Rng(seed)
        f = rng.normals(6, 6)
        q, _ = qr_factor(rng.normals(6, 6))
        assert abs(near_symmetry_delta(q.T @ f @ q) - near_symmetry_delta(f)) <= 1e-10


class TestAlignRotation:
    def test_identity_case(self):
        u, _ = qr_factor(Rng(1).normals(5, 2))
        q0 = align_rotation(u, u)
        assert np.linalg.norm(u - u @ q0, 2) <= 1e-12

    def test_unit_vectors_at_60_degrees(self):
        u = np.array([[1.0], [0.0]])
        v = np.array([[math.cos(math.pi / 3)], [math.sin(math.pi / 3)]])
        q0 = align_rotation(u, v)
        assert abs(np.linalg.norm(v - u @ q0, 2) ** 2 - 1.0) <= 1e-14

    def test_lemma_equality_random(self):
        rng = Rng(5)
        u, _ = qr_factor(rng.normals(7, 3))
        v, _ = qr_factor(rng.normals(7, 3))
        q0 = align_rotation(u, v)
        lhs = np.linalg.norm(v - u @ q0, 2) ** 2
        rhs = 2.0 * (1.0 - np.linalg.svd(u.T @ v, compute_uv=False)[-1])
        assert abs(lhs - rhs) <= 1e-10

    def test_shape_mismatch(self):
        with pytest.raises(DimensionMismatch):
            align_rotation(np.eye(4)[:, :2], np.eye(4)[:, :3])


class TestDiameterLowerBound:
    def test_epsilon_equals_delta(self):
        f = Rng(2).normals(4, 4)
        assert diameter_lower_bound(f, 0.3, 0.3) == 0.0

    def test_unit_singular_values_full_range(self):
        assert abs(diameter_lower_bound(np.eye(3), 1.0 - 1e-16, 0.0) - 1.0) <= 1e-7

    def test_diag_2_1_frozen_value(self):
        f = np.zeros((5, 5))
        f[0, 0] = 2.0
        f[1, 1] = 1.0
        # arccos(0.5) = pi/3 collapses the formula to exactly 2/5
        assert abs(diameter_lower_bound(f, 0.5, 0.0) - 0.4) <= 1e-14

    def test_ordering_validation(self):
        with pytest.raises(InvalidRange):
            diameter_lower_bound(np.eye(2), 0.1, 0.2)

    def test_monotone_in_epsilon_and_delta(self):
        f = Rng(3).normals(6, 6)
        grid = np.linspace(0.0, 0.9, 20)
        for d in grid:
            vals = [diameter_lower_bound(f, e, d) for e in grid if e >= d]
            assert np.all(np.diff(vals) >= 0)
        for e in grid:
            vals = [diameter_lower_bound(f, e, d) for d in grid if d <= e]
            assert np.all(np.diff(vals) <= 0)


def symmetric_instance(epsilon, n=5, k=2, s=2):
    f = np.zeros((n, n))
    f[0, 0] = 2.0
    f[1, 1] = 1.0
    x = np.eye(n)[:, :s]
    return SketchInstance(f=f, x=x, k=k, delta=0.0, epsilon=epsilon)


class TestDiameterUpperBound:
    def test_symmetric_zero_gap(self):
        rep = diameter_upper_bound(symmetric_instance(0.0))
        assert rep.upper == 0.0
        assert rep.lower == 0.0

    def test_precondition_failure_leaves_upper_absent(self):
        rep = diameter_upper_bound(symmetric_instance(0.9))
        assert rep.upper is None
        assert rep.lower > 0.0

    def test_recomputed_from_raw_factors(self):
        inst = random_instance(8, 4, 2, 0.0, 0.02, seed=Seed(6))
        rep = diameter_upper_bound(inst)
        u, s, vt = np.linalg.svd(inst.f)
        v0 = vt[:2, :].T
        xs = np.linalg.svd(inst.x.T @ v0, compute_uv=False)
        c = xs[0] / xs[-1] ** 2
        tau = math.sqrt(2 * 0.02) + 0.0
        fx = np.linalg.norm(inst.f @ inst.x, 2)
        assert abs(rep.c_constant - c) <= 1e-12 * c
        assert abs(rep.fx_norm - fx) <= 1e-12 * fx
        assert rep.upper is not None
        expected = 4.0 * fx * c * c * tau / (1.0 - c * tau)
        assert abs(rep.upper - expected) <= 1e-12 * expected

    def test_bounds_consistent(self):
        rep = diameter_upper_bound(random_instance(10, 6, 3, 0.001, 0.01, seed=Seed(13)))
        if rep.upper is not None:
            assert rep.upper >= rep.lower - 1e-9

    def test_json_fields(self):
        d = diameter_upper_bound(symmetric_instance(0.0)).to_dict()
        assert list(d) == ["upper", "lower", "c_constant", "fx_norm"]


class TestConstructExtremalPair:
    def test_degenerate_gap_returns_f_twice(self):
        inst = symmetric_instance(0.0)
        bp, bm = construct_extremal_pair(inst)
        assert np.array_equal(bp, inst.f)
        assert np.array_equal(bm, inst.f)

    def test_symmetric_diag_example(self):
        inst = symmetric_instance(0.3)
        bp, bm = construct_extremal_pair(inst)
        gap = math.acos(0.7)
        eta = (1.0 / 2.0) * gap / (math.pi / 2.0 + gap)
        sep = np.linalg.norm(bp - bm, 2)
        assert abs(sep - 2.0 * 1.0 * eta) <= 1e-10
        assert membership_check(bp, inst).in_set
        assert membership_check(bm, inst).in_set
        # independent recomputation of the membership conditions
        for b in (bp, bm):
            assert np.linalg.matrix_rank(b, tol=1e-10) == 2
            assert np.linalg.norm(b @ inst.x - inst.f @ inst.x, 2) <= 1e-10
            u, s, vt = np.linalg.svd(b)
            r = int(np.sum(s > 1e-10 * s[0]))
            smin = np.linalg.svd(u[:, :r].T @ vt[:r, :].T, compute_uv=False)[-1]
            assert 1.0 - smin <= 0.3 + 1e-8

    def test_sketch_preserved(self):
        inst = random_instance(9, 5, 3, 0.02, 0.15, seed=Seed(21))
        bp, bm = construct_extremal_pair(inst)
        fx = inst.f @ inst.x
        assert np.linalg.norm(bp @ inst.x - fx, 2) <= 1e-10
        assert np.linalg.norm(bm @ inst.x - fx, 2) <= 1e-10

    def test_separation_attains_lower_bound(self):
        inst = random_instance(10, 5, 3, 0.05, 0.2, seed=Seed(7))
        bp, bm = construct_extremal_pair(inst)
        sep = np.linalg.norm(bp - bm, 2)
        lower = diameter_lower_bound(inst.f, 0.2, 0.05)
        assert sep >= lower - 1e-10
        # closed-form cross-check: separation is 2 sigma_min^2/sigma_max * ratio
        s = np.linalg.svd(inst.f, compute_uv=False)
        s = s[s > 1e-10 * s[0]]
        gap = math.acos(0.8) - math.acos(0.95)
        expected = 2.0 * (s[-1] ** 2 / s[0]) * gap / (math.pi / 2.0 + gap)
        assert abs(sep - expected) <= 1e-10

    def test_no_complement(self):
        f = np.diag([2.0, 1.0])
        inst = SketchInstance(f=f, x=np.eye(2), k=2, delta=0.0, epsilon=0.1)
        with pytest.raises(NoComplement):
            construct_extremal_pair(inst)


class TestMembershipCheck:
    def test_f_is_member(self):
        inst = random_instance(8, 4, 2, 0.01, 0.05, seed=Seed(3))
        rep = membership_check(inst.f, inst)
        assert rep.in_set
        assert rep.sketch_residual <= 1e-12

    def test_scaled_f_violates_sketch(self):
        inst = random_instance(8, 4, 2, 0.01, 0.05, seed=Seed(3))
        rep = membership_check(2.0 * inst.f, inst)
        assert rep.rank_ok
        assert not rep.in_set
        fx_norm = np.linalg.norm(inst.f @ inst.x, 2)
        assert abs(rep.sketch_residual - fx_norm) <= 1e-10 * fx_norm

    def test_json_fields(self):
        inst = random_instance(8, 4, 2, 0.01, 0.05, seed=Seed(3))
        d = membership_check(inst.f, inst).to_dict()
        assert list(d) == ["rank_ok", "sketch_residual", "symmetry_delta", "in_set"]


class TestToeplitz:
    def test_identity(self):
        oracle = CountingOracle(np.eye(5))
        assert np.array_equal(toeplitz_from_two_queries(oracle, 5), np.eye(5))
        assert oracle.calls == 2

    def test_tridiagonal(self):
        t = toeplitz_matrix([2.0, -1.0, 0, 0, 0, 0], [2.0, -1.0, 0, 0, 0, 0])
        oracle = CountingOracle(t)
        assert np.array_equal(toeplitz_from_two_queries(oracle, 6), t)
        assert oracle.calls == 2

    def test_random_seed8(self):
        rng = Rng(8)
        n = 50
        col = rng.normals(n, 1)[:, 0]
        row = rng.normals(n, 1)[:, 0]
        row[0] = col[0]
        t = toeplitz_matrix(col, row)
        oracle = CountingOracle(t)
        got = toeplitz_from_two_queries(oracle, n)
        assert np.array_equal(got, t)
        assert oracle.calls == 2

    def test_inconsistent_symbol_rejected(self):
        with pytest.raises(InvalidRange):
            toeplitz_matrix([1.0, 2.0], [3.0, 4.0])


class TestInstanceValidation:
    def test_fixture_delta_is_exact(self):
        for seed, delta in [(0, 0.0), (1, 0.05), (2, 0.3)]:
            inst = random_instance(10, 6, 3, delta, max(delta, 0.4), seed=Seed(seed))
            assert abs(near_symmetry_delta(inst.f) - delta) <= 1e-10

    def test_bad_ordering(self):
        with pytest.raises(InvalidRange):
            random_instance(8, 4, 2, 0.5, 0.1, seed=Seed(0))

    def test_non_orthonormal_x(self):
        f = np.diag([2.0, 1.0, 0.0, 0.0])
        with pytest.raises(InvalidRange):
            SketchInstance(f=f, x=np.ones((4, 2)), k=2, delta=0.0, epsilon=0.1)

    def test_wrong_rank(self):
        f = np.diag([2.0, 1.0, 0.0, 0.0])
        with pytest.raises(InvalidRange):
            SketchInstance(f=f, x=np.eye(4)[:, :2], k=3, delta=0.0, epsilon=0.1)
