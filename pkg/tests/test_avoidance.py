import itertools

import numpy as np
import pytest

from descentcert.avoidance import (
    AvoidanceSearchExhausted,
    ProjPoint,
    avoiding_subspace,
    build_beta,
    check_counting_inequality,
    grassmannian_count,
    kernel_generators,
    normalize,
    plucker_image,
    projective_count,
    projective_points,
)
from descentcert.fpcore import BudgetExceeded, Wedge2, is_decomposable, rank, wedge_dim

from oracles import brute_rank, count_subspaces_by_bases, decomposable_set


def span_points(sub, p):
    """Projective points of a subspace, by brute force over coefficient vectors."""
    basis = sub.basis.array
    out = set()
    for c in itertools.product(range(p), repeat=sub.dim):
        v = np.array(c, dtype=np.int64) @ basis % p if sub.dim else None
        if v is not None and v.any():
            out.add(normalize(v, p))
    return out


class TestCounts:
    @pytest.mark.parametrize("n,p", [(0, 3), (1, 3), (5, 3), (3, 5), (2, 7)])
    def test_projective_count(self, n, p):
        assert projective_count(n, p) == len(projective_points(n, p))

    def test_projective_points_sorted_and_normalized(self):
        pts = projective_points(3, 3)
        assert len(set(pts)) == len(pts)
        for pt in pts:
            assert pt.coords == normalize(pt.coords, 3)

    @pytest.mark.parametrize("p,a", [(3, 2), (3, 4), (3, 5), (5, 4), (7, 3)])
    def test_grassmannian_count(self, p, a):
        assert grassmannian_count(p, a) == count_subspaces_by_bases(a, 2, p)

    def test_grassmannian_examples(self):
        assert grassmannian_count(3, 4) == 130
        assert grassmannian_count(5, 4) == 806

    def test_grassmannian_rejects_small(self):
        with pytest.raises(ValueError):
            grassmannian_count(3, 1)

    @pytest.mark.parametrize("p,r1", [(3, 4), (3, 5), (5, 4), (7, 4), (3, 8)])
    def test_counting_inequality(self, p, r1):
        lhs, rhs = check_counting_inequality(p, r1)
        assert lhs == grassmannian_count(p, r1)
        assert rhs == projective_count(2 * r1 - 3, p)
        assert lhs < rhs


class TestPlucker:
    @pytest.mark.parametrize("p,r1", [(3, 2), (3, 3), (3, 4), (3, 5), (5, 4)])
    def test_cardinality(self, p, r1):
        assert len(plucker_image(p, r1)) == grassmannian_count(p, r1)

    @pytest.mark.parametrize("p,r1", [(3, 3), (3, 4)])
    def test_matches_pure_wedges(self, p, r1):
        pure = {normalize(w, p) for w in decomposable_set(r1, p) if any(w)}
        assert {pt.coords for pt in plucker_image(p, r1)} == pure

    def test_points_are_decomposable(self):
        for pt in plucker_image(3, 4):
            assert is_decomposable(Wedge2(3, 4, pt.coords))

    def test_budget(self):
        with pytest.raises(BudgetExceeded):
            plucker_image(3, 5, budget=10)


class TestAvoidingSubspace:
    def test_empty_point_set_gives_first_subspace(self):
        sub = avoiding_subspace([], 3, 1, 3)
        assert sub.dim == 3
        # greedy growth takes (1,0,0,0), (1,0,0,1), (1,0,1,0): the hyperplane where the second coordinate vanishes
        assert sub.basis.tolist() == [[1, 0, 0, 0], [0, 0, 1, 0], [0, 0, 0, 1]]

    def test_codim_equal_to_N(self):
        pts = [ProjPoint.of(x, 3) for x in [(1, 0, 0), (0, 1, 0)]]
        sub = avoiding_subspace(pts, 2, 2, 3)
        assert sub.dim == 1
        assert not span_points(sub, 3) & {pt.coords for pt in pts}

    @pytest.mark.parametrize("seed", [0, 1, 7])
    def test_avoids_grassmannian(self, seed):
        p, r1 = 3, 4
        grass = plucker_image(p, r1)
        N = wedge_dim(r1) - 1
        sub = avoiding_subspace(grass, N, 2 * r1 - 3, p, seed=seed)
        assert sub.dim == N + 1 - (2 * r1 - 3)
        assert not span_points(sub, p) & {pt.coords for pt in grass}

    def test_deterministic(self):
        grass = plucker_image(3, 4)
        a = avoiding_subspace(grass, 5, 5, 3, seed=3)
        b = avoiding_subspace(grass, 5, 5, 3, seed=3)
        assert a.basis == b.basis

    def test_rejects_too_many_points(self):
        pts = projective_points(2, 3)[: projective_count(1, 3)]
        with pytest.raises(ValueError, match="not below"):
            avoiding_subspace(pts, 2, 1, 3)

    def test_rejects_wrong_ambient(self):
        with pytest.raises(ValueError):
            avoiding_subspace([ProjPoint((1, 0))], 3, 1, 3)

    def test_tiny_search_budget(self):
        # with no backtracking the search either succeeds correctly or says it gave up
        line = {normalize(x, 3) for x in [(1, 0, 0), (0, 1, 0), (1, 1, 0), (1, 2, 0)]}
        pts = [pt for pt in projective_points(2, 3) if pt.coords not in line][:3]
        try:
            sub = avoiding_subspace(pts, 2, 1, 3, restarts=0, max_backtracks=0)
        except AvoidanceSearchExhausted as e:
            assert e.max_backtracks == 0
        else:
            assert not span_points(sub, 3) & {pt.coords for pt in pts}

    def test_exhaustion_error_carries_parameters(self):
        e = AvoidanceSearchExhausted(4, 2, 9)
        assert (e.seed, e.restarts, e.max_backtracks) == (4, 2, 9)
        assert "seed=4" in str(e)


class TestBuildBeta:
    @pytest.mark.parametrize("p,r1", [(3, 4), (5, 4)])
    def test_properties(self, p, r1):
        beta = build_beta(p, r1)
        assert beta.r2 == 2 * r1 - 3
        assert beta.is_surjective
        assert brute_rank(beta.matrix.tolist(), p) == beta.r2
        kern = kernel_generators(beta)
        assert kern.rows == wedge_dim(r1) - beta.r2
        # every nonzero kernel element has full rank: no pure wedge is killed
        for c in itertools.product(range(p), repeat=kern.rows):
            if any(c):
                w = np.array(c, dtype=np.int64) @ kern.array % p
                assert rank(Wedge2(p, r1, w).to_matrix()) >= 4

    def test_p3_r1_4_kernel_generator(self):
        beta = build_beta(3, 4)
        kern = kernel_generators(beta)
        assert kern.rows == 1
        assert kern.tolist() == [[1, 0, 0, 0, 0, 1]]
        assert not is_decomposable(Wedge2(3, 4, kern.row(0)))

    def test_seeded_determinism(self):
        assert build_beta(3, 4, seed=5).matrix == build_beta(3, 4, seed=5).matrix

    @pytest.mark.parametrize("r1", [2, 3])
    def test_rejects_small_rank(self, r1):
        with pytest.raises(ValueError):
            build_beta(3, r1)
