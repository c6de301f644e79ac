"""Local descent sets in the symplectic matrix model, and the counts around them.

A homomorphism xi is an ``r1 x r`` matrix M over F_p.  The local cup-product
pairing is modeled by the standard alternating form J on F_p^r, so the class
pulled back along xi is the alternating matrix ``M J M^T`` (an element of the
exterior square of A).  Then

* ``E_v = {M : beta(M J M^T) = 0}``
* ``C_v = {M : M J M^T = 0}``

Matrices are enumerated by index: entry ``(i, j)`` is the base-p digit at
position ``i * r + j`` (little-endian), so an index range is a partition.
"""

from __future__ import annotations

import itertools
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterator

import numpy as np

from .avoidance import projective_points
from .extension import BetaMap, bic_of_beta
from .fpcore import (
    FpMatrix,
    PrimeModulus,
    Wedge2,
    check_budget,
    decompose_alternating,
    digits,
    rank,
    rref_rank_kernel,
    wedge_dim,
    wedge_pairs,
)

THREADS_ENV = "DESCENTCERT_THREADS"
CHUNK = 1 << 16


def default_threads() -> int:
    try:
        return max(1, int(os.environ.get(THREADS_ENV, "1")))
    except ValueError:
        return 1


@dataclass(frozen=True)
class SymplecticSpace:
    """F_p^r with the standard alternating form ``sum e_{2i-1} ^ e_{2i}``."""

    p: int
    r: int

    def __post_init__(self):
        object.__setattr__(self, "p", PrimeModulus(self.p))
        if self.r < 0 or self.r % 2:
            raise ValueError(f"symplectic dimension must be even and >= 0, got {self.r}")

    @property
    def J(self) -> FpMatrix:
        a = np.zeros((self.r, self.r), dtype=np.int64)
        for i in range(0, self.r, 2):
            a[i, i + 1] = 1
            a[i + 1, i] = -1
        return FpMatrix(self.p, a)

    @property
    def omega(self) -> Wedge2:
        return Wedge2.from_matrix(self.J)


@dataclass(frozen=True)
class DualWedge:
    """A linear functional on the exterior square of F_p^r1, by coordinates."""

    p: int
    r1: int
    coeffs: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "p", PrimeModulus(self.p))
        coeffs = tuple(int(c) % self.p for c in self.coeffs)
        if len(coeffs) != wedge_dim(self.r1):
            raise ValueError(f"expected {wedge_dim(self.r1)} coefficients, got {len(coeffs)}")
        object.__setattr__(self, "coeffs", coeffs)

    @classmethod
    def basis(cls, p, r1: int, i: int, j: int) -> "DualWedge":
        """The functional reading the e_i ^ e_j coordinate (0-based)."""
        return cls(p, r1, Wedge2.basis(p, r1, i, j).coords)

    @classmethod
    def zero(cls, p, r1: int) -> "DualWedge":
        return cls(p, r1, (0,) * wedge_dim(r1))

    def __call__(self, w: Wedge2) -> int:
        if w.n != self.r1:
            raise ValueError("functional and wedge have different ambient rank")
        return sum(c * x for c, x in zip(self.coeffs, w.coords)) % self.p

    def __add__(self, other: "DualWedge") -> "DualWedge":
        return DualWedge(self.p, self.r1, tuple(x + y for x, y in zip(self.coeffs, other.coeffs)))

    def is_zero(self) -> bool:
        return not any(self.coeffs)


def dual_basis(p, r1: int) -> list[DualWedge]:
    return [DualWedge.basis(p, r1, i, j) for i, j in wedge_pairs(r1)]


# -- pullback and pairing ----------------------------------------------------


def pullback_wedge(M: FpMatrix, S: SymplecticSpace) -> Wedge2:
    """The alternating matrix ``M J M^T``, as a wedge over F_p^rows(M)."""
    if M.cols != S.r:
        raise ValueError(f"matrix has {M.cols} columns, symplectic space has dimension {S.r}")
    if M.p != S.p:
        raise ValueError("modulus mismatch")
    return Wedge2.from_matrix(M @ S.J @ M.T)


def _pullback_coords(mats: np.ndarray, p: int) -> np.ndarray:
    """Batch pullback: ``(N, r1, r)`` matrices to ``(N, dim)`` wedge coordinates."""
    n, r1, _ = mats.shape
    x = mats[:, :, 0::2]
    y = mats[:, :, 1::2]
    full = (np.einsum("nik,njk->nij", x, y) - np.einsum("nik,njk->nij", y, x)) % p
    pairs = wedge_pairs(r1)
    if not pairs:
        return np.zeros((n, 0), dtype=np.int64)
    rows, cols = zip(*pairs)
    return full[:, list(rows), list(cols)]


def w_pairing(f: DualWedge, M: FpMatrix, S: SymplecticSpace) -> int:
    """``f`` evaluated on the pullback of the standard form along M; a residue mod p."""
    if f.r1 != M.rows:
        raise ValueError(f"functional on rank {f.r1} but matrix has {M.rows} rows")
    return f(pullback_wedge(M, S))


# -- enumeration ---------------------------------------------------------------


def matrix_of_index(index: int, r1: int, r: int, p: int) -> FpMatrix:
    d = digits(np.array([index], dtype=np.int64), r1 * r, p)
    return FpMatrix(p, d.reshape(r1, r))


def index_of_matrix(M: FpMatrix) -> int:
    return sum(int(x) * M.p**k for k, x in enumerate(M.array.reshape(-1)))


def _ranges(total: int, partitions: int) -> list[tuple[int, int]]:
    partitions = max(1, min(partitions, total)) if total else 1
    step, extra = divmod(total, partitions)
    out, lo = [], 0
    for k in range(partitions):
        hi = lo + step + (1 if k < extra else 0)
        out.append((lo, hi))
        lo = hi
    return out


@dataclass
class _Tally:
    ev: int = 0
    cv: int = 0
    in_cv: list[int] = field(default_factory=list)
    out_cv: list[int] = field(default_factory=list)


def _scan(lo: int, hi: int, r1: int, r: int, p: int, beta_m, cap: int) -> _Tally:
    t = _Tally()
    for start in range(lo, hi, CHUNK):
        idx = np.arange(start, min(hi, start + CHUNK), dtype=np.int64)
        mats = digits(idx, r1 * r, p).reshape(-1, r1, r)
        coords = _pullback_coords(mats, p)
        iso = ~np.any(coords, axis=1)
        if beta_m is None:
            ev = iso
        else:
            ev = ~np.any((coords @ beta_m.T) % p, axis=1)
        t.ev += int(ev.sum())
        t.cv += int(iso.sum())
        if cap:
            if len(t.in_cv) < cap:
                t.in_cv.extend(int(i) for i in idx[iso][: cap - len(t.in_cv)])
            if len(t.out_cv) < cap:
                t.out_cv.extend(int(i) for i in idx[ev & ~iso][: cap - len(t.out_cv)])
    return t


def _tally(beta_m, p, r1, r, budget, partitions, threads, cap) -> _Tally:
    total = p ** (r1 * r)
    check_budget(f"{r1}x{r} matrices over F_{p}", total, budget)
    parts = _ranges(total, partitions)
    threads = default_threads() if threads is None else threads
    if threads > 1 and len(parts) > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            tallies = list(ex.map(lambda rng: _scan(rng[0], rng[1], r1, r, p, beta_m, cap), parts))
    else:
        tallies = [_scan(lo, hi, r1, r, p, beta_m, cap) for lo, hi in parts]
    out = _Tally()
    for t in tallies:
        out.ev += t.ev
        out.cv += t.cv
        out.in_cv.extend(t.in_cv)
        out.out_cv.extend(t.out_cv)
    # partitions are disjoint contiguous ranges, so sorting recovers global index order
    out.in_cv = sorted(out.in_cv)[:cap]
    out.out_cv = sorted(out.out_cv)[:cap]
    return out


@dataclass(frozen=True)
class EvWitnesses:
    """Smallest-index members of E_v, split by membership in C_v."""

    in_Cv: tuple[FpMatrix, ...]
    outside_Cv: tuple[FpMatrix, ...]


def _check_beta(beta: BetaMap, S: SymplecticSpace) -> None:
    if beta.p != S.p:
        raise ValueError("beta and symplectic space use different moduli")


def count_Ev(
    beta: BetaMap,
    S: SymplecticSpace,
    collect_witnesses: bool = False,
    witness_cap: int = 8,
    budget: int | None = None,
    partitions: int = 1,
    threads: int | None = None,
) -> tuple[int, EvWitnesses | None]:
    """Number of ``r1 x r`` matrices M with ``beta(M J M^T) = 0``."""
    _check_beta(beta, S)
    cap = witness_cap if collect_witnesses else 0
    t = _tally(beta.matrix.array, S.p, beta.r1, S.r, budget, partitions, threads, cap)
    if not collect_witnesses:
        return t.ev, None
    r1, r, p = beta.r1, S.r, S.p
    return t.ev, EvWitnesses(
        tuple(matrix_of_index(i, r1, r, p) for i in t.in_cv),
        tuple(matrix_of_index(i, r1, r, p) for i in t.out_cv),
    )


def count_Cv(
    p,
    r1: int,
    S: SymplecticSpace,
    budget: int | None = None,
    partitions: int = 1,
    threads: int | None = None,
) -> int:
    """Number of ``r1 x r`` matrices M with ``M J M^T = 0``."""
    p = PrimeModulus(p)
    if p != S.p:
        raise ValueError("modulus mismatch")
    return _tally(None, p, r1, S.r, budget, partitions, threads, 0).cv


def count_both(
    beta: BetaMap,
    S: SymplecticSpace,
    budget: int | None = None,
    partitions: int = 1,
    threads: int | None = None,
) -> tuple[int, int]:
    """``(#E_v, #C_v)`` from a single pass."""
    _check_beta(beta, S)
    t = _tally(beta.matrix.array, S.p, beta.r1, S.r, budget, partitions, threads, 0)
    return t.ev, t.cv


def iter_Ev(beta: BetaMap, S: SymplecticSpace, budget: int | None = None) -> Iterator[FpMatrix]:
    """Members of E_v in index order."""
    _check_beta(beta, S)
    p, r1, r = S.p, beta.r1, S.r
    total = p ** (r1 * r)
    check_budget(f"{r1}x{r} matrices over F_{p}", total, budget)
    for start in range(0, total, CHUNK):
        idx = np.arange(start, min(total, start + CHUNK), dtype=np.int64)
        mats = digits(idx, r1 * r, p).reshape(-1, r1, r)
        ev = ~np.any(beta.apply_coords(_pullback_coords(mats, p)), axis=1)
        for m in mats[ev]:
            yield FpMatrix(p, m)


# -- closed forms ----------------------------------------------------------------


def surjection_count(p: int, a: int, d: int) -> int:
    """Surjections from F_p^a onto a d-dimensional space."""
    out = 1
    for i in range(d):
        out *= p**a - p**i
    return out


def _isotropic_numerator(p: int, r: int, d: int) -> int:
    out = 1
    for i in range(d):
        out *= p ** (r - i) - p**i
    return out


def isotropic_count(p: int, r: int, d: int) -> int:
    """Isotropic d-dimensional subspaces of a symplectic F_p^r."""
    den = 1
    for i in range(d):
        den *= p**d - p**i
    q, rem = divmod(_isotropic_numerator(p, r, d), den)
    if rem:
        raise ArithmeticError(f"isotropic subspace count not integral (p={p}, r={r}, d={d})")
    return q


def _check_even(r: int) -> None:
    if r < 0 or r % 2:
        raise ValueError(f"r must be even and >= 0, got {r}")


def closed_xi(p, a: int, r: int) -> int:
    """Number of maps F_p^a -> F_p^r pulling the symplectic form back to zero."""
    p = PrimeModulus(p)
    _check_even(r)
    if a < 0:
        raise ValueError(f"a must be >= 0, got {a}")
    return sum(surjection_count(p, a, d) * isotropic_count(p, r, d) for d in range(min(a, r // 2) + 1))


def climit_terms(p, r: int) -> list[int]:
    """The strictly increasing magnitudes whose alternating sum is ``closed_climit``."""
    p = PrimeModulus(p)
    _check_even(r)
    terms = []
    for d in range(r // 2 + 1):
        den = 1
        for i in range(1, d + 1):
            den *= p**i - 1
        q, rem = divmod(_isotropic_numerator(p, r, d), den)
        if rem:
            raise ArithmeticError(f"limit term not integral (p={p}, r={r}, d={d})")
        terms.append(q)
    return terms


def closed_climit(p, r: int) -> int:
    """p-adic limit of ``closed_xi(p, a, r)`` as a grows."""
    return sum((-1) ** d * t for d, t in enumerate(climit_terms(p, r)))


def axkatz_bound(r1: int, r: int, r2: int) -> int:
    """Lower bound on v_p(#E_v): ceil((r1 r - 2 r2) / 2), floored at 0."""
    return max(0, -((2 * r2 - r1 * r) // 2))


def padic_valuation(n: int, p) -> int:
    p = PrimeModulus(p)
    if n == 0:
        raise ValueError("the p-adic valuation of 0 is infinite")
    n = abs(n)
    k = 0
    while n % p == 0:
        n //= p
        k += 1
    return k


# -- witnesses and criteria -----------------------------------------------------


@dataclass(frozen=True)
class ObstructionWitness:
    """A class ``b`` and a point ``xi`` of E_v with ``w_pairing(b, xi) != 0``."""

    b: DualWedge
    xi: FpMatrix
    value: int


def _kernel_points(beta: BetaMap, budget: int | None) -> Iterator[Wedge2]:
    """Nonzero kernel elements of beta up to scalars."""
    kern = rref_rank_kernel(beta.matrix)[2]
    k = kern.rows
    if k == 0:
        return
    check_budget("kernel lines of beta", (beta.p**k - 1) // (beta.p - 1), budget)
    basis = kern.array
    for pt in projective_points(k - 1, beta.p):
        coords = (np.array(pt.coords, dtype=np.int64) @ basis) % beta.p
        yield Wedge2(beta.p, beta.r1, tuple(int(x) for x in coords))


def _matrix_from_terms(terms, r1: int, r: int, p: int) -> FpMatrix:
    m = np.zeros((r1, r), dtype=np.int64)
    for k, (u, v) in enumerate(terms):
        m[:, 2 * k] = u
        m[:, 2 * k + 1] = v
    return FpMatrix(p, m)


def find_obstruction_witness(
    beta: BetaMap,
    S: SymplecticSpace,
    budget: int | None = None,
    method: str = "construct",
) -> ObstructionWitness | None:
    """A pair ``(b, xi)`` with xi in E_v and ``w_pairing(b, xi) != 0``, or None if E_v = C_v.

    ``construct`` walks the kernel lines of beta and returns the first one of
    rank <= r, realized as ``M J M^T`` through a symplectic basis.  Every
    alternating matrix of rank <= r arises that way, so None means no point
    of E_v has nonzero pullback.  ``scan`` walks E_v itself in index order.
    The class ``b`` reads the first nonzero coordinate of the pullback.
    """
    _check_beta(beta, S)
    if method == "construct":
        for w in _kernel_points(beta, budget):
            if rank(w.to_matrix()) <= S.r:
                xi = _matrix_from_terms(decompose_alternating(w), beta.r1, S.r, S.p)
                return _certify(beta, S, xi)
        return None
    if method == "scan":
        for xi in iter_Ev(beta, S, budget):
            if not pullback_wedge(xi, S).is_zero():
                return _certify(beta, S, xi)
        return None
    raise ValueError(f"unknown method {method!r}")


def _certify(beta: BetaMap, S: SymplecticSpace, xi: FpMatrix) -> ObstructionWitness:
    w = pullback_wedge(xi, S)
    assert not any(beta(w)), "witness is not in E_v"
    k = next(i for i, c in enumerate(w.coords) if c)
    i, j = wedge_pairs(beta.r1)[k]
    b = DualWedge.basis(S.p, beta.r1, i, j)
    value = w_pairing(b, xi, S)
    assert value != 0
    assert w_pairing(b, FpMatrix.zeros(S.p, beta.r1, S.r), S) == 0
    return ObstructionWitness(b, xi, value)


def tame_Ev(beta: BetaMap, budget: int | None = None) -> frozenset[tuple[tuple[int, ...], tuple[int, ...]]]:
    """Pairs ``(a1, a2)`` in A x A with ``beta(a1 ^ a2) = 0``."""
    p, r1 = beta.p, beta.r1
    check_budget(f"pairs in F_{p}^{r1}", p ** (2 * r1), budget)
    vecs = [tuple(v) for v in itertools.product(range(p), repeat=r1)]
    arr = np.array(vecs, dtype=np.int64).reshape(len(vecs), r1)
    out = set()
    pairs = wedge_pairs(r1)
    for k, a1 in enumerate(vecs):
        coords = np.stack([arr[k, i] * arr[:, j] - arr[k, j] * arr[:, i] for i, j in pairs], axis=-1) % p \
            if pairs else np.zeros((len(vecs), 0), dtype=np.int64)
        ok = ~np.any(beta.apply_coords(coords), axis=1)
        out.update((a1, vecs[m]) for m in np.nonzero(ok)[0])
    return frozenset(out)


def unramified_check(f: DualWedge, beta: BetaMap, budget: int | None = None, bic=None) -> bool:
    """True iff f vanishes on every pure wedge killed by beta."""
    if f.r1 != beta.r1:
        raise ValueError("functional and beta have different ranks")
    if bic is None:
        bic = bic_of_beta(beta, budget)
    return all(f(w) == 0 for w in bic)


@dataclass(frozen=True)
class RankOneReport:
    count: int
    expected_count: int
    all_in_Cv: bool
    span_dim: int
    full_dim: int

    @property
    def ok(self) -> bool:
        return self.count == self.expected_count and self.all_in_Cv and self.span_dim == self.full_dim


def rank_one_membership(S: SymplecticSpace, r1: int, budget: int | None = None) -> RankOneReport:
    """Every matrix of rank <= 1 lies in C_v, and these matrices span all matrices."""
    p, r = S.p, S.r
    check_budget("rank-one matrices", p ** (r1 + r), budget)
    mats = set()
    for u in itertools.product(range(p), repeat=r1):
        for v in itertools.product(range(p), repeat=r):
            mats.add(tuple(ui * vj % p for ui in u for vj in v))
    arr = np.array(sorted(mats), dtype=np.int64).reshape(len(mats), r1, r)
    all_in = not np.any(_pullback_coords(arr, p))
    span = rank(FpMatrix(p, arr.reshape(len(mats), r1 * r))) if r1 * r else 0
    expected = 1 + (p**r1 - 1) * (p**r - 1) // (p - 1)
    return RankOneReport(len(mats), expected, bool(all_in), span, r1 * r)


@dataclass(frozen=True)
class CountReport:
    p: int
    r1: int
    r2: int
    r: int
    count_Ev: int
    count_Cv: int
    val_Ev: int
    val_Cv: int
    axkatz_bound: int
    closed_xi: int
    closed_climit: int

    def __post_init__(self):
        if not 1 <= self.count_Cv <= self.count_Ev:
            raise ValueError(f"inconsistent counts: #C_v={self.count_Cv}, #E_v={self.count_Ev}")


def count_report(
    beta: BetaMap,
    S: SymplecticSpace,
    budget: int | None = None,
    partitions: int = 1,
    threads: int | None = None,
) -> CountReport:
    ev, cv = count_both(beta, S, budget=budget, partitions=partitions, threads=threads)
    p = S.p
    return CountReport(
        p=int(p),
        r1=beta.r1,
        r2=beta.r2,
        r=S.r,
        count_Ev=ev,
        count_Cv=cv,
        val_Ev=padic_valuation(ev, p),
        val_Cv=padic_valuation(cv, p),
        axkatz_bound=axkatz_bound(beta.r1, S.r, beta.r2),
        closed_xi=closed_xi(p, beta.r1, S.r),
        closed_climit=closed_climit(p, S.r),
    )
