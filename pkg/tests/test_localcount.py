import itertools
import random

import numpy as np
import pytest

from descentcert.avoidance import build_beta
from descentcert.extension import BetaMap, bic_of_beta
from descentcert.fpcore import BudgetExceeded, FpMatrix, Wedge2, wedge_dim
from descentcert.localcount import (
    THREADS_ENV,
    CountReport,
    DualWedge,
    SymplecticSpace,
    axkatz_bound,
    climit_terms,
    closed_climit,
    closed_xi,
    count_both,
    count_Cv,
    count_Ev,
    count_report,
    default_threads,
    dual_basis,
    find_obstruction_witness,
    index_of_matrix,
    isotropic_count,
    iter_Ev,
    matrix_of_index,
    padic_valuation,
    pullback_wedge,
    rank_one_membership,
    surjection_count,
    tame_Ev,
    unramified_check,
    w_pairing,
)

from oracles import brute_counts, count_subspaces_by_bases, decomposable_set, symplectic_pullback, wedge_coords


def columns(*cols, p=3):
    return FpMatrix(p, np.array(cols, dtype=np.int64).T)


class TestSymplectic:
    def test_J_and_omega(self):
        S = SymplecticSpace(3, 4)
        assert S.J.tolist() == [[0, 1, 0, 0], [2, 0, 0, 0], [0, 0, 0, 1], [0, 0, 2, 0]]
        assert S.omega == Wedge2.basis(3, 4, 0, 1) + Wedge2.basis(3, 4, 2, 3)

    @pytest.mark.parametrize("r", [-2, 1, 3])
    def test_rejects_odd_or_negative(self, r):
        with pytest.raises(ValueError):
            SymplecticSpace(3, r)

    def test_pullback_of_identity_is_omega(self):
        S = SymplecticSpace(5, 4)
        assert pullback_wedge(FpMatrix.identity(5, 4), S) == S.omega

    def test_pullback_zero_and_rank_one(self):
        S = SymplecticSpace(3, 4)
        assert pullback_wedge(FpMatrix.zeros(3, 3, 4), S).is_zero()
        u, v = np.array([1, 2, 0]), np.array([2, 0, 1, 1])
        assert pullback_wedge(FpMatrix(3, np.outer(u, v) % 3), S).is_zero()

    def test_pullback_matches_oracle(self):
        rng = random.Random(3)
        for p in (3, 5):
            for r1, r in [(2, 2), (3, 4), (4, 2), (5, 6)]:
                S = SymplecticSpace(p, r)
                for _ in range(20):
                    rows = [[rng.randrange(p) for _ in range(r)] for _ in range(r1)]
                    got = pullback_wedge(FpMatrix(p, rows), S)
                    assert got.coords == symplectic_pullback(rows, p)
                    # the antisymmetric matrix is M J M^T
                    M = FpMatrix(p, rows)
                    assert got.to_matrix() == M @ S.J @ M.T

    def test_pullback_shape_mismatch(self):
        with pytest.raises(ValueError):
            pullback_wedge(FpMatrix.zeros(3, 2, 3), SymplecticSpace(3, 2))


class TestPairing:
    def test_example(self):
        S = SymplecticSpace(3, 2)
        f = DualWedge.basis(3, 3, 0, 2)
        assert w_pairing(f, columns([1, 0, 0], [0, 0, 1]), S) == 1

    def test_zero_matrix(self):
        S = SymplecticSpace(3, 4)
        for f in dual_basis(3, 3):
            assert w_pairing(f, FpMatrix.zeros(3, 3, 4), S) == 0

    def test_additive_in_f(self):
        rng = random.Random(0)
        p, r1, r = 5, 4, 4
        S = SymplecticSpace(p, r)
        for _ in range(50):
            f = DualWedge(p, r1, [rng.randrange(p) for _ in range(wedge_dim(r1))])
            g = DualWedge(p, r1, [rng.randrange(p) for _ in range(wedge_dim(r1))])
            M = FpMatrix(p, [[rng.randrange(p) for _ in range(r)] for _ in range(r1)])
            assert w_pairing(f + g, M, S) == (w_pairing(f, M, S) + w_pairing(g, M, S)) % p

    def test_vanishes_on_Cv(self):
        S = SymplecticSpace(3, 2)
        beta = BetaMap.zero(3, 2, 1)
        cv_mats = [M for M in iter_Ev(beta, S) if pullback_wedge(M, S).is_zero()]
        assert len(cv_mats) == 33
        for M in cv_mats:
            for f in dual_basis(3, 2):
                assert w_pairing(f, M, S) == 0

    def test_dual_wedge_validation(self):
        with pytest.raises(ValueError):
            DualWedge(3, 3, [1, 0])


class TestIndexing:
    def test_roundtrip(self):
        for idx in [0, 1, 2, 80, 12345, 3**12 - 1]:
            assert index_of_matrix(matrix_of_index(idx, 3, 4, 3)) == idx

    def test_little_endian_row_major(self):
        assert matrix_of_index(1, 2, 2, 3).tolist() == [[1, 0], [0, 0]]
        assert matrix_of_index(3, 2, 2, 3).tolist() == [[0, 1], [0, 0]]
        assert matrix_of_index(9, 2, 2, 3).tolist() == [[0, 0], [1, 0]]

    def test_iter_Ev_in_index_order(self):
        beta = BetaMap.coordinate(3, 3, 0, 1)
        idx = [index_of_matrix(M) for M in iter_Ev(beta, SymplecticSpace(3, 2))]
        assert idx == sorted(idx)
        assert len(idx) == 297


BRUTE_CASES = [
    # (p, r1, r, beta rows)
    (3, 2, 2, [[1]]),
    (3, 2, 2, [[0]]),
    (3, 3, 2, [[1, 0, 0]]),
    (3, 3, 2, [[0, 1, 2]]),
    (3, 3, 2, [[1, 0, 0], [0, 1, 0]]),
    (3, 2, 4, [[1]]),
    (5, 2, 2, [[1]]),
    (3, 4, 2, [[1, 0, 0, 0, 0, 1]]),
]


class TestCounts:
    @pytest.mark.parametrize("p,r1,r,rows", BRUTE_CASES)
    def test_against_oracle(self, p, r1, r, rows):
        beta = BetaMap.from_rows(p, r1, rows)
        S = SymplecticSpace(p, r)
        ev, cv = brute_counts(rows, r1, r, p)
        assert count_Ev(beta, S)[0] == ev
        assert count_Cv(p, r1, S) == cv
        assert count_both(beta, S) == (ev, cv)

    def test_examples(self):
        S2 = SymplecticSpace(3, 2)
        assert count_Ev(BetaMap.coordinate(3, 2, 0, 1), S2)[0] == 33
        assert count_Ev(BetaMap.coordinate(3, 3, 0, 1), S2)[0] == 297
        assert count_Cv(3, 1, S2) == 9
        assert count_Cv(3, 2, S2) == 33
        assert count_Cv(3, 3, S2) == 105
        assert count_Cv(3, 2, SymplecticSpace(3, 4)) == 2241

    def test_injective_beta_gives_Cv(self):
        p, r1 = 3, 3
        beta = BetaMap(p, r1, 3, FpMatrix.identity(p, 3))
        S = SymplecticSpace(p, 2)
        assert count_Ev(beta, S)[0] == count_Cv(p, r1, S)
        assert find_obstruction_witness(beta, S) is None

    def test_zero_beta_counts_everything(self):
        S = SymplecticSpace(3, 2)
        assert count_Ev(BetaMap.zero(3, 3, 2), S)[0] == 3**6

    def test_Cv_inside_Ev(self):
        rng = random.Random(1)
        S = SymplecticSpace(3, 2)
        for _ in range(10):
            rows = [[rng.randrange(3) for _ in range(6)] for _ in range(rng.randrange(1, 4))]
            beta = BetaMap.from_rows(3, 4, rows)
            ev, cv = count_both(beta, S)
            assert 1 <= cv <= ev

    def test_witnesses(self):
        beta = BetaMap.coordinate(3, 3, 0, 1)
        S = SymplecticSpace(3, 2)
        n, wit = count_Ev(beta, S, collect_witnesses=True, witness_cap=4)
        assert n == 297
        assert len(wit.in_Cv) == len(wit.outside_Cv) == 4
        assert wit.in_Cv[0] == FpMatrix.zeros(3, 3, 2)
        for M in wit.in_Cv:
            assert pullback_wedge(M, S).is_zero()
        for M in wit.outside_Cv:
            w = pullback_wedge(M, S)
            assert not w.is_zero() and not any(beta(w))
        idx = [index_of_matrix(M) for M in wit.outside_Cv]
        assert idx == sorted(idx)

    def test_budget(self):
        with pytest.raises(BudgetExceeded):
            count_Cv(3, 3, SymplecticSpace(3, 4), budget=1000)

    def test_modulus_mismatch(self):
        with pytest.raises(ValueError):
            count_Ev(BetaMap.coordinate(5, 2, 0, 1), SymplecticSpace(3, 2))

    @pytest.mark.parametrize("partitions", [1, 2, 3, 8, 100])
    @pytest.mark.parametrize("threads", [1, 4])
    def test_partitions_and_threads_agree(self, partitions, threads):
        beta = BetaMap.coordinate(3, 3, 0, 1)
        S = SymplecticSpace(3, 4)
        ref = count_Ev(beta, S, collect_witnesses=True, witness_cap=5)
        got = count_Ev(beta, S, collect_witnesses=True, witness_cap=5, partitions=partitions, threads=threads)
        assert got == ref
        assert count_Cv(3, 3, S, partitions=partitions, threads=threads) == closed_xi(3, 3, 4)

    def test_threads_env(self, monkeypatch):
        monkeypatch.setenv(THREADS_ENV, "3")
        assert default_threads() == 3
        monkeypatch.setenv(THREADS_ENV, "junk")
        assert default_threads() >= 1


class TestClosedForms:
    def test_surjections(self):
        # surjections F_3^3 -> F_3^2 counted directly
        mats = itertools.product(range(3), repeat=6)
        from oracles import brute_rank

        n = sum(1 for m in mats if brute_rank([m[:3], m[3:]], 3) == 2)
        assert surjection_count(3, 3, 2) == n

    @pytest.mark.parametrize("p,r", [(3, 2), (3, 4), (5, 4), (3, 6)])
    def test_isotropic_subspace_counts(self, p, r):
        assert isotropic_count(p, r, 0) == 1
        # every line is isotropic
        assert isotropic_count(p, r, 1) == count_subspaces_by_bases(r, 1, p)

    def test_examples(self):
        assert closed_xi(3, 0, 2) == 1
        assert [closed_xi(3, a, 2) for a in (1, 2, 3)] == [9, 33, 105]
        assert closed_xi(3, 2, 4) == 2241
        assert closed_xi(3, 1, 4) == 81
        assert closed_climit(3, 2) == -3
        assert closed_climit(3, 4) == 81
        assert climit_terms(3, 4) == [1, 40, 120]

    @pytest.mark.parametrize("p", [3, 5, 7])
    def test_climit_r2(self, p):
        assert closed_climit(p, 2) == -p

    @pytest.mark.parametrize("p,a,r", [(3, 1, 2), (3, 2, 2), (3, 3, 2), (3, 2, 4), (5, 2, 2), (3, 1, 4), (5, 1, 4), (7, 2, 2)])
    def test_xi_matches_enumeration(self, p, a, r):
        assert closed_xi(p, a, r) == count_Cv(p, a, SymplecticSpace(p, r))

    def test_xi_matches_enumeration_larger(self):
        # p^(a r) <= 10^7 cases beyond the quick set
        for p, a, r in [(3, 3, 4), (3, 4, 2), (3, 5, 2), (5, 3, 2), (3, 2, 6), (3, 7, 2)]:
            assert p ** (a * r) <= 10**7
            assert closed_xi(p, a, r) == count_Cv(p, a, SymplecticSpace(p, r)), (p, a, r)

    @pytest.mark.parametrize("p", [3, 5])
    @pytest.mark.parametrize("r", [2, 4])
    def test_congruence(self, p, r):
        c = closed_climit(p, r)
        for a in range(1, 7):
            assert (closed_xi(p, a, r) - c) % p**a == 0

    @pytest.mark.parametrize("p", [3, 5, 7])
    @pytest.mark.parametrize("r", [2, 4, 6, 8])
    def test_climit_nonzero_with_sign(self, p, r):
        c = closed_climit(p, r)
        assert c != 0
        assert (c > 0) == (r // 2 % 2 == 0)
        terms = climit_terms(p, r)
        assert all(x < y for x, y in zip(terms, terms[1:]))

    def test_odd_r_rejected(self):
        with pytest.raises(ValueError):
            closed_xi(3, 2, 3)
        with pytest.raises(ValueError):
            closed_climit(3, 5)

    def test_large_values_are_exact(self):
        x = closed_xi(5, 30, 20)
        assert x > 2**128
        assert (x - closed_climit(5, 20)) % 5**30 == 0


class TestValuations:
    def test_examples(self):
        assert padic_valuation(33, 3) == 1
        assert padic_valuation(2241, 3) == 3
        assert padic_valuation(-3, 3) == 1
        assert padic_valuation(7, 3) == 0

    def test_zero_raises(self):
        with pytest.raises(ValueError):
            padic_valuation(0, 3)

    def test_axkatz_examples(self):
        assert axkatz_bound(2, 2, 1) == 1
        assert axkatz_bound(3, 2, 1) == 2
        assert axkatz_bound(4, 4, 5) == 3
        assert axkatz_bound(2, 2, 5) == 0

    @pytest.mark.parametrize("p,r1,r,rows", BRUTE_CASES)
    def test_axkatz_holds(self, p, r1, r, rows):
        beta = BetaMap.from_rows(p, r1, rows)
        ev = count_Ev(beta, SymplecticSpace(p, r))[0]
        assert padic_valuation(ev, p) >= axkatz_bound(r1, r, beta.r2)

    def test_axkatz_on_all_betas_small(self):
        S = SymplecticSpace(3, 2)
        for rows in itertools.product(itertools.product(range(3), repeat=3), repeat=2):
            beta = BetaMap.from_rows(3, 3, rows)
            ev = count_Ev(beta, S)[0]
            assert padic_valuation(ev, 3) >= axkatz_bound(3, 2, 2)

    @pytest.mark.parametrize("p,r1,r", [(3, 2, 2), (3, 3, 2), (3, 4, 2), (3, 2, 4), (3, 3, 4), (5, 2, 2)])
    def test_Cv_valuation_matches_limit(self, p, r1, r):
        v = padic_valuation(closed_climit(p, r), p)
        if r1 > v:
            assert padic_valuation(count_Cv(p, r1, SymplecticSpace(p, r)), p) == v

    def test_report(self):
        rep = count_report(BetaMap.coordinate(3, 3, 0, 1), SymplecticSpace(3, 2))
        assert rep == CountReport(3, 3, 1, 2, 297, 105, 3, 1, 2, 105, -3)

    def test_report_rejects_bad_counts(self):
        with pytest.raises(ValueError):
            CountReport(3, 3, 1, 2, 10, 11, 0, 0, 0, 0, 0)


class TestWitness:
    def test_example(self):
        beta = BetaMap.coordinate(3, 3, 0, 1)
        S = SymplecticSpace(3, 2)
        w = find_obstruction_witness(beta, S)
        assert w.b == DualWedge.basis(3, 3, 0, 2)
        assert w.xi == columns([1, 0, 0], [0, 0, 1])
        assert w.value == 1
        assert w_pairing(w.b, FpMatrix.zeros(3, 3, 2), S) == 0

    def test_scan_method(self):
        beta = BetaMap.coordinate(3, 3, 0, 1)
        S = SymplecticSpace(3, 2)
        w = find_obstruction_witness(beta, S, method="scan")
        assert w.value != 0
        assert not any(beta(pullback_wedge(w.xi, S)))

    def test_unknown_method(self):
        with pytest.raises(ValueError):
            find_obstruction_witness(BetaMap.coordinate(3, 2, 0, 1), SymplecticSpace(3, 2), method="guess")

    def exhaustive_cases(self):
        S = SymplecticSpace(3, 2)
        for r1, r2 in [(2, 1), (3, 1), (3, 2)]:
            for rows in itertools.product(itertools.product(range(3), repeat=wedge_dim(r1)), repeat=r2):
                yield BetaMap.from_rows(3, r1, rows), S

    def test_found_iff_Cv_smaller(self):
        for beta, S in self.exhaustive_cases():
            ev, cv = count_both(beta, S)
            for method in ("construct", "scan"):
                w = find_obstruction_witness(beta, S, method=method)
                assert (w is not None) == (cv < ev)
                if w is not None:
                    assert not any(beta(pullback_wedge(w.xi, S)))
                    assert w_pairing(w.b, w.xi, S) == w.value != 0

    def test_r4(self):
        beta = build_beta(3, 4)
        S = SymplecticSpace(3, 4)
        # the kernel generator e1^e2 + e3^e4 has rank 4, so r = 4 sees it but r = 2 does not
        assert find_obstruction_witness(beta, SymplecticSpace(3, 2)) is None
        w = find_obstruction_witness(beta, S)
        assert w is not None
        assert pullback_wedge(w.xi, S).coords == (1, 0, 0, 0, 0, 1)


class TestTame:
    def test_zero_beta(self):
        assert len(tame_Ev(BetaMap.zero(3, 2, 1))) == 81

    def test_built_beta(self):
        pairs = tame_Ev(build_beta(3, 4))
        assert len(pairs) == 321
        for a1, a2 in pairs:
            assert not any(wedge_coords(a1, a2, 3))

    def test_matches_count_Ev_at_r2(self):
        S = SymplecticSpace(3, 2)
        for r1, r2 in [(2, 1), (3, 1), (3, 2)]:
            for rows in itertools.product(itertools.product(range(3), repeat=wedge_dim(r1)), repeat=r2):
                beta = BetaMap.from_rows(3, r1, rows)
                pairs = tame_Ev(beta)
                assert len(pairs) == count_Ev(beta, S)[0]

    def test_columns_of_Ev(self):
        beta = BetaMap.coordinate(3, 3, 0, 1)
        cols = {(tuple(M.array[:, 0]), tuple(M.array[:, 1])) for M in iter_Ev(beta, SymplecticSpace(3, 2))}
        assert cols == tame_Ev(beta)


class TestUnramified:
    def test_bic_trivial_passes_all(self):
        beta = build_beta(3, 4)
        for f in dual_basis(3, 4):
            assert unramified_check(f, beta)

    def test_zero_beta_only_zero(self):
        beta = BetaMap.zero(3, 3, 1)
        assert unramified_check(DualWedge.zero(3, 3), beta)
        for f in dual_basis(3, 3):
            assert not unramified_check(f, beta)

    def test_example(self):
        beta = BetaMap.coordinate(3, 3, 0, 1)
        assert unramified_check(DualWedge.basis(3, 3, 0, 1), beta)
        assert not unramified_check(DualWedge.basis(3, 3, 0, 2), beta)

    @pytest.mark.parametrize("r1", [2, 3, 4])
    def test_against_pure_wedges(self, r1):
        p = 3
        rng = random.Random(r1)
        pure = [w for w in decomposable_set(r1, p) if any(w)]
        dim = wedge_dim(r1)
        betas = [build_beta(3, 4)] if r1 == 4 else []
        for _ in range(6):
            rows = [[rng.randrange(p) for _ in range(dim)] for _ in range(rng.randrange(1, dim + 1))]
            betas.append(BetaMap.from_rows(p, r1, rows))
        for beta in betas:
            bic = bic_of_beta(beta)
            killed = [w for w in pure if not any(beta(Wedge2(p, r1, w)))]
            fs = dual_basis(p, r1) + [DualWedge(p, r1, [rng.randrange(p) for _ in range(dim)]) for _ in range(10)]
            fs += [DualWedge(p, r1, beta.matrix.row(0))]
            for f in fs:
                expected = all(sum(c * x for c, x in zip(f.coeffs, w)) % p == 0 for w in killed)
                assert unramified_check(f, beta, bic=bic) == expected

    def test_rank_mismatch(self):
        with pytest.raises(ValueError):
            unramified_check(DualWedge.zero(3, 3), BetaMap.zero(3, 4, 1))


class TestRankOne:
    def test_example(self):
        rep = rank_one_membership(SymplecticSpace(3, 2), 2)
        assert rep.count == 33 and rep.span_dim == 4 and rep.all_in_Cv and rep.ok

    @pytest.mark.parametrize("p,r1,r", [(3, 3, 4), (5, 2, 2), (3, 1, 2)])
    def test_ok(self, p, r1, r):
        assert rank_one_membership(SymplecticSpace(p, r), r1).ok
