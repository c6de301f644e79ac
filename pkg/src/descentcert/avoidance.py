"""Plücker image of Gr(2, A), subspaces avoiding it, and the resulting beta.

A point set X in P^N(F_p) with fewer points than P^n(F_p) misses some linear
subspace of codimension n.  Applied to the Grassmannian of planes in A inside
P(Λ²A) with n = 2 r1 - 3, the cone over such a subspace is the kernel of a
surjection beta onto F_p^(2 r1 - 3) that kills no nonzero pure wedge.
"""

from __future__ import annotations

import itertools
import random
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

from .extension import BetaMap
from .fpcore import (
    DEFAULT_BUDGET,
    FpMatrix,
    PrimeModulus,
    Subspace,
    check_budget,
    enumerate_subspaces,
    gaussian_binomial,
    rref_rank_kernel,
    row_space,
    wedge,
    wedge_dim,
)


class AvoidanceSearchExhausted(RuntimeError):
    """The bounded search ran out before finding an avoiding subspace."""

    def __init__(self, seed: int, restarts: int, max_backtracks: int):
        super().__init__(
            f"no avoiding subspace found (seed={seed}, restarts={restarts}, "
            f"max_backtracks={max_backtracks}); one exists, so raise the search budget"
        )
        self.seed = seed
        self.restarts = restarts
        self.max_backtracks = max_backtracks


@dataclass(frozen=True, order=True)
class ProjPoint:
    """A point of P^N(F_p) with first nonzero coordinate scaled to 1."""

    coords: tuple[int, ...]

    @classmethod
    def of(cls, x: Sequence[int], p: int) -> "ProjPoint":
        return cls(normalize(x, p))

    @property
    def N(self) -> int:
        return len(self.coords) - 1


def normalize(x: Sequence[int], p: int) -> tuple[int, ...]:
    x = [int(v) % p for v in x]
    for v in x:
        if v:
            inv = pow(v, -1, p)
            return tuple(t * inv % p for t in x)
    raise ValueError("the zero vector is not a projective point")


def projective_count(n: int, p: int) -> int:
    """#P^n(F_p)."""
    return (p ** (n + 1) - 1) // (p - 1)


def grassmannian_count(p, a: int) -> int:
    """Number of 2-dimensional subspaces of F_p^a."""
    p = PrimeModulus(p)
    if a < 2:
        raise ValueError(f"need a >= 2, got {a}")
    num = (p**a - 1) * (p ** (a - 1) - 1)
    den = (p**2 - 1) * (p - 1)
    q, rem = divmod(num, den)
    if rem:
        raise ArithmeticError(f"Grassmannian count not integral for p={p}, a={a}")
    return q


def plucker_image(p, r1: int, budget: int | None = None) -> frozenset[ProjPoint]:
    """Points ``[u ^ v]`` in P(Λ²F_p^r1) for independent u, v."""
    p = PrimeModulus(p)
    if r1 < 2:
        raise ValueError(f"need r1 >= 2, got {r1}")
    pts = set()
    for plane in enumerate_subspaces(r1, 2, p, budget=budget):
        u, v = plane.basis.row(0), plane.basis.row(1)
        pts.add(ProjPoint.of(wedge(u, v, p).coords, p))
    return frozenset(pts)


def projective_points(N: int, p: int) -> list[ProjPoint]:
    """All points of P^N(F_p) in lexicographic order of normalized coordinates."""
    pts = []
    for lead in range(N + 1):
        for tail in itertools.product(range(p), repeat=N - lead):
            pts.append(ProjPoint((0,) * lead + (1,) + tail))
    return pts


def avoiding_subspace(
    points: Iterable[ProjPoint],
    N: int,
    n: int,
    p,
    seed: int = 0,
    restarts: int = 16,
    max_backtracks: int = 10_000,
    budget: int | None = None,
) -> Subspace:
    """A linear subspace of F_p^(N+1) of codimension n whose projectivization misses ``points``.

    Grows a flag one vector at a time, trying candidates in lexicographic
    order and backtracking a bounded number of times; then retries with
    seeded shuffles of the candidate order.
    """
    p = PrimeModulus(p)
    pts = {pt.coords for pt in points}
    if any(len(c) != N + 1 for c in pts):
        raise ValueError(f"points must live in P^{N}")
    if not 0 <= n <= N:
        raise ValueError(f"need 0 <= n <= N, got n={n}, N={N}")
    if len(pts) >= projective_count(n, p):
        raise ValueError(
            f"#points = {len(pts)} is not below #P^{n}(F_{p}) = {projective_count(n, p)}"
        )
    target = N + 1 - n
    check_budget(f"candidate points of P^{N}(F_{p})", projective_count(N, p), budget)
    candidates = [pt.coords for pt in projective_points(N, p) if pt.coords not in pts]

    orders = [candidates]
    rng = random.Random(seed)
    for _ in range(restarts):
        shuffled = candidates[:]
        rng.shuffle(shuffled)
        orders.append(shuffled)
    for order in orders:
        basis = _grow(order, pts, target, p, max_backtracks)
        if basis is not None:
            if not basis:
                return Subspace(p, N + 1, FpMatrix.zeros(p, 0, N + 1))
            return row_space(FpMatrix(p, basis))
    raise AvoidanceSearchExhausted(seed, restarts, max_backtracks)


def _grow(order, pts: set, target: int, p: int, max_backtracks: int):
    """Depth-first flag growth over ``order``.  Returns a basis list or None."""
    remaining = [max_backtracks]

    def extend(basis, covered, start):
        if len(basis) == target:
            return basis
        arr = np.array(basis, dtype=np.int64).reshape(len(basis), -1) if basis else None
        for idx in range(start, len(order)):
            v = order[idx]
            if v in covered:
                continue
            vv = np.array(v, dtype=np.int64)
            new = set()
            # the points added by v are the lines through w + v, w in span(basis)
            for c in itertools.product(range(p), repeat=len(basis)):
                w = np.array(c, dtype=np.int64) @ arr % p if basis else 0
                q = normalize((w + vv) % p, p)
                if q in pts:
                    break
                new.add(q)
            else:
                got = extend(basis + [v], covered | new, idx + 1)
                if got is not None:
                    return got
                remaining[0] -= 1
                if remaining[0] < 0:
                    return None
        return None

    return extend([], set(), 0)


def check_counting_inequality(p, r1: int) -> tuple[int, int]:
    """Assert #Gr(2, r1)(F_p) < #P^(2 r1 - 3)(F_p) through the intermediate bound; returns both sides."""
    p = PrimeModulus(p)
    num = (p**r1 - 1) * (p ** (r1 - 1) - 1)
    lhs = Fraction(num, (p**2 - 1) * (p - 1))
    mid = Fraction(num, (p + 1) * (p - 1))
    top = Fraction((p ** (2 * r1 - 2) - 1) * (p + 1), (p + 1) * (p - 1))
    rhs = projective_count(2 * r1 - 3, p)
    if not (lhs < mid <= top == rhs):
        raise AssertionError(f"counting chain fails at p={p}, r1={r1}: {lhs} < {mid} <= {top} = {rhs}")
    assert lhs == grassmannian_count(p, r1)
    return int(lhs), rhs


def build_beta(
    p,
    r1: int,
    seed: int = 0,
    budget: int | None = None,
) -> BetaMap:
    """A surjection Λ²F_p^r1 -> F_p^(2 r1 - 3) whose kernel contains no nonzero pure wedge."""
    p = PrimeModulus(p)
    if r1 < 4:
        raise ValueError(f"build_beta needs r1 >= 4, got {r1}")
    dim = wedge_dim(r1)
    r2 = 2 * r1 - 3
    check_counting_inequality(p, r1)
    grass = plucker_image(p, r1, budget=budget)
    L = avoiding_subspace(grass, dim - 1, r2, p, seed=seed, budget=budget)
    # rows of beta: a basis of the functionals vanishing on L
    _, _, annihilator = rref_rank_kernel(L.basis)
    beta_m = row_space(annihilator).basis
    assert beta_m.shape == (r2, dim)
    return BetaMap(p, r1, r2, beta_m)


def kernel_generators(beta: BetaMap) -> FpMatrix:
    return rref_rank_kernel(beta.matrix)[2]


__all__ = [
    "AvoidanceSearchExhausted",
    "DEFAULT_BUDGET",
    "ProjPoint",
    "avoiding_subspace",
    "build_beta",
    "check_counting_inequality",
    "grassmannian_count",
    "gaussian_binomial",
    "kernel_generators",
    "normalize",
    "plucker_image",
    "projective_count",
    "projective_points",
]
