"""Central extensions of A = F_p^r1 by B = F_p^r2 built from a map on the exterior square.

The extension is realized on the set ``B x A`` with the twisted law

    (b1, a1) . (b2, a2) = (b1 + b2 + 1/2 beta(a2 ^ a1), a1 + a2)

so every group operation is a handful of vector operations mod p.
"""

from __future__ import annotations

import itertools
import random
from dataclasses import dataclass
from typing import Callable, Iterator, Sequence

import numpy as np

from .fpcore import (
    FpMatrix,
    PrimeModulus,
    Wedge2,
    all_vectors,
    check_budget,
    rank,
    wedge,
    wedge_dim,
    wedge_pairs,
)

Vector = tuple[int, ...]


@dataclass(frozen=True)
class BetaMap:
    """A linear map from the exterior square of F_p^r1 to F_p^r2.

    ``matrix`` has shape ``r2 x r1(r1-1)/2`` and acts on wedge coordinates.
    """

    p: int
    r1: int
    r2: int
    matrix: FpMatrix

    def __post_init__(self):
        object.__setattr__(self, "p", PrimeModulus(self.p))
        if self.matrix.p != self.p:
            raise ValueError("matrix modulus differs from beta modulus")
        if self.matrix.shape != (self.r2, wedge_dim(self.r1)):
            raise ValueError(
                f"beta matrix must be {self.r2} x {wedge_dim(self.r1)}, got {self.matrix.shape}"
            )

    @classmethod
    def from_rows(cls, p, r1: int, rows: Sequence[Sequence[int]]) -> "BetaMap":
        rows = [list(r) for r in rows]
        m = FpMatrix(p, np.array(rows, dtype=np.int64).reshape(len(rows), wedge_dim(r1)))
        return cls(p, r1, len(rows), m)

    @classmethod
    def zero(cls, p, r1: int, r2: int) -> "BetaMap":
        return cls(p, r1, r2, FpMatrix.zeros(p, r2, wedge_dim(r1)))

    @classmethod
    def coordinate(cls, p, r1: int, i: int, j: int) -> "BetaMap":
        """The rank-one map picking out the e_i ^ e_j coordinate (0-based)."""
        return cls.from_rows(p, r1, [Wedge2.basis(p, r1, i, j).coords])

    def __call__(self, w: Wedge2) -> Vector:
        if w.n != self.r1 or w.p != self.p:
            raise ValueError("wedge does not live in the source of beta")
        v = (self.matrix.array @ np.array(w.coords, dtype=np.int64)) % self.p
        return tuple(int(x) for x in v)

    def apply_coords(self, coords: np.ndarray) -> np.ndarray:
        """Batch form: rows of wedge coordinates to rows of B-vectors."""
        return (coords @ self.matrix.array.T) % self.p

    @property
    def is_surjective(self) -> bool:
        return rank(self.matrix) == self.r2


# -- the cocycle and its antisymmetrization ---------------------------------


@dataclass(frozen=True)
class Cocycle2:
    """The normalized 2-cocycle ``(a, a') -> 1/2 beta(a' ^ a)`` with trivial action."""

    beta: BetaMap

    def __call__(self, a: Sequence[int], a2: Sequence[int]) -> Vector:
        b = self.beta
        v = b(wedge(a2, a, b.p))
        return tuple(b.p.half * x % b.p for x in v)


def iota(beta: BetaMap) -> Cocycle2:
    return Cocycle2(beta)


def theta(c: Callable[[Vector, Vector], Sequence[int]], p, r1: int, r2: int) -> BetaMap:
    """Antisymmetrize a 2-cochain: ``e_i ^ e_j -> c(e_j, e_i) - c(e_i, e_j)``.

    The order of the difference is the one that makes ``theta(iota(beta)) == beta``
    for the cocycle ``1/2 beta(a' ^ a)``.
    """
    p = PrimeModulus(p)
    cols = []
    for i, j in wedge_pairs(r1):
        ei = _unit(r1, i)
        ej = _unit(r1, j)
        x = c(ei, ej)
        y = c(ej, ei)
        cols.append([(t - s) % p for s, t in zip(x, y)])
    m = np.array(cols, dtype=np.int64).reshape(wedge_dim(r1), r2).T
    return BetaMap(p, r1, r2, FpMatrix(p, m))


def verify_cocycle(c: Cocycle2, triples=None) -> bool:
    """Check ``c(x,y) + c(x+y,z) == c(y,z) + c(x,y+z)`` on the given triples (default: all)."""
    p = c.beta.p
    if triples is None:
        elems = list(itertools.product(range(p), repeat=c.beta.r1))
        triples = itertools.product(elems, repeat=3)
    for x, y, z in triples:
        lhs = _add(c(x, y), c(_add(x, y, p), z), p)
        rhs = _add(c(y, z), c(x, _add(y, z, p)), p)
        if lhs != rhs:
            return False
    return True


def _unit(n: int, i: int) -> Vector:
    return tuple(1 if k == i else 0 for k in range(n))


def _add(x: Sequence[int], y: Sequence[int], p: int) -> Vector:
    return tuple((s + t) % p for s, t in zip(x, y))


# -- the group --------------------------------------------------------------


@dataclass(frozen=True)
class ExtElem:
    """An element ``(b, a)`` of the extension; ``a`` is its image in A."""

    b: Vector
    a: Vector

    @property
    def pi(self) -> Vector:
        return self.a


def _check_shapes(beta: BetaMap, *gs: ExtElem) -> None:
    for g in gs:
        if len(g.b) != beta.r2 or len(g.a) != beta.r1:
            raise ValueError(
                f"element shape ({len(g.b)}, {len(g.a)}) does not match extension ({beta.r2}, {beta.r1})"
            )


def ext_elem(beta: BetaMap, b: Sequence[int], a: Sequence[int]) -> ExtElem:
    p = beta.p
    g = ExtElem(tuple(int(x) % p for x in b), tuple(int(x) % p for x in a))
    _check_shapes(beta, g)
    return g


def identity(beta: BetaMap) -> ExtElem:
    return ExtElem((0,) * beta.r2, (0,) * beta.r1)


def group_mul(g1: ExtElem, g2: ExtElem, beta: BetaMap) -> ExtElem:
    _check_shapes(beta, g1, g2)
    p = beta.p
    twist = iota(beta)(g1.a, g2.a)
    b = tuple((x + y + t) % p for x, y, t in zip(g1.b, g2.b, twist))
    return ExtElem(b, _add(g1.a, g2.a, p))


def group_inv(g: ExtElem, beta: BetaMap) -> ExtElem:
    _check_shapes(beta, g)
    p = beta.p
    return ExtElem(tuple(-x % p for x in g.b), tuple(-x % p for x in g.a))


def group_pow(g: ExtElem, k: int, beta: BetaMap) -> ExtElem:
    out = identity(beta)
    for _ in range(k):
        out = group_mul(out, g, beta)
    return out


def commutator(g1: ExtElem, g2: ExtElem, beta: BetaMap) -> ExtElem:
    """``g1 g2 g1^-1 g2^-1``, computed from the group law."""
    left = group_mul(g1, g2, beta)
    right = group_mul(group_inv(g1, beta), group_inv(g2, beta), beta)
    return group_mul(left, right, beta)


def elements(beta: BetaMap) -> Iterator[ExtElem]:
    p = beta.p
    for b in itertools.product(range(p), repeat=beta.r2):
        for a in itertools.product(range(p), repeat=beta.r1):
            yield ExtElem(b, a)


def mul_batch(b1: np.ndarray, a1: np.ndarray, b2: np.ndarray, a2: np.ndarray, beta: BetaMap):
    """Row-wise ``group_mul`` on stacked components; arrays broadcast like numpy."""
    p = beta.p
    pairs = wedge_pairs(beta.r1)
    if pairs:
        # coordinates of a2 ^ a1
        coords = np.stack([a2[..., i] * a1[..., j] - a2[..., j] * a1[..., i] for i, j in pairs], axis=-1)
        twist = (coords % p) @ beta.matrix.array.T % p * p.half % p
    else:
        twist = 0
    return (b1 + b2 + twist) % p, (a1 + a2) % p


def commutator_batch(b1, a1, b2, a2, beta: BetaMap):
    """Row-wise ``commutator`` through three batch products."""
    p = beta.p
    lb, la = mul_batch(b1, a1, b2, a2, beta)
    rb, ra = mul_batch(-b1 % p, -a1 % p, -b2 % p, -a2 % p, beta)
    return mul_batch(lb, la, rb, ra, beta)


def cayley_table(beta: BetaMap, budget: int | None = None) -> tuple[list[ExtElem], np.ndarray]:
    """All elements (in ``elements`` order) and the index table of their products."""
    p, r1, r2 = beta.p, beta.r1, beta.r2
    order = p ** (r1 + r2)
    check_budget("Cayley table", order * order, budget)
    elems = list(elements(beta))
    a = np.array([g.a for g in elems], dtype=np.int64).reshape(order, r1)
    b = np.array([g.b for g in elems], dtype=np.int64).reshape(order, r2)
    prod_b, prod_a = mul_batch(b[:, None, :], a[:, None, :], b[None, :, :], a[None, :, :], beta)
    weights_a = p ** np.arange(r1, dtype=np.int64)[::-1]
    weights_b = p ** np.arange(r2, dtype=np.int64)[::-1]
    index = (prod_b @ weights_b) * p**r1 + prod_a @ weights_a
    return elems, index


# -- bicyclic part ------------------------------------------------------------


def _pair_wedges(p: int, r1: int, budget: int | None) -> np.ndarray:
    """Wedge coordinates of ``u ^ v`` for all pairs, shape ``(p**r1, p**r1, dim)``."""
    check_budget(f"pairs in F_{p}^{r1}", p ** (2 * r1), budget)
    vecs = all_vectors(r1, p)
    return np.stack(
        [(vecs[:, None, i] * vecs[None, :, j] - vecs[:, None, j] * vecs[None, :, i]) % p for i, j in wedge_pairs(r1)],
        axis=-1,
    ) if r1 >= 2 else np.zeros((p**r1, p**r1, 0), dtype=np.int64)


def bic_of_beta(beta: BetaMap, budget: int | None = None) -> frozenset[Wedge2]:
    """Decomposable wedges killed by beta: ``{u ^ v : beta(u ^ v) = 0}`` (always contains 0)."""
    p, r1 = beta.p, beta.r1
    coords = _pair_wedges(p, r1, budget).reshape(-1, wedge_dim(r1))
    coords = np.unique(coords, axis=0)
    killed = ~np.any(beta.apply_coords(coords), axis=1)
    return frozenset(Wedge2(p, r1, tuple(int(x) for x in row)) for row in coords[killed])


def bic_bruteforce_oracle(beta: BetaMap, sample_budget: int = 10**6, seed: int = 0) -> frozenset[Wedge2]:
    """Bicyclic part from its definition: wedges of images of commuting pairs.

    Runs over all pairs of group elements when ``|G|**2 <= sample_budget``.
    Otherwise the central parts are fixed to seeded random vectors and all
    pairs ``(a1, a2)`` are scanned, which is enough because commutators only
    depend on the images in A.
    """
    p, r1, r2 = beta.p, beta.r1, beta.r2
    avecs = all_vectors(r1, p)
    if p ** (2 * (r1 + r2)) <= sample_budget:
        bvecs = all_vectors(r2, p)
        a = a_other = np.tile(avecs, (len(bvecs), 1))
        b = b_other = np.repeat(bvecs, len(avecs), axis=0)
    else:
        rng = random.Random(seed)
        fixed1 = [rng.randrange(p) for _ in range(r2)]
        fixed2 = [rng.randrange(p) for _ in range(r2)]
        a = a_other = avecs
        b = np.array([fixed1] * len(avecs), dtype=np.int64).reshape(len(avecs), r2)
        b_other = np.array([fixed2] * len(avecs), dtype=np.int64).reshape(len(avecs), r2)
    found: set[tuple[int, ...]] = set()
    m = len(a_other)
    step = max(1, (1 << 16) // m)
    for lo in range(0, len(a), step):
        hi = min(len(a), lo + step)
        cb, ca = commutator_batch(
            b[lo:hi, None, :], a[lo:hi, None, :], b_other[None, :, :], a_other[None, :, :], beta
        )
        commute = ~np.any(cb, axis=-1) & ~np.any(ca, axis=-1)
        i, j = np.nonzero(commute)
        x, y = a[lo:hi][i], a_other[j]
        if r1 >= 2:
            coords = np.stack([x[:, s] * y[:, t] - x[:, t] * y[:, s] for s, t in wedge_pairs(r1)], axis=-1) % p
        else:
            coords = np.zeros((len(i), 0), dtype=np.int64)
        found.update(map(tuple, np.unique(coords, axis=0).tolist()))
    return frozenset(Wedge2(p, r1, c) for c in found)


def bic_is_trivial(bic: frozenset[Wedge2]) -> bool:
    return all(w.is_zero() for w in bic)


def all_decomposable(p: int, r1: int, budget: int | None = None) -> frozenset[Wedge2]:
    """Every pure wedge in the exterior square of F_p^r1 (including 0)."""
    coords = np.unique(_pair_wedges(p, r1, budget).reshape(-1, wedge_dim(r1)), axis=0)
    return frozenset(Wedge2(p, r1, tuple(int(x) for x in row)) for row in coords)
