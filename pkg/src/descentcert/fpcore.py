"""Exact linear and exterior algebra over a prime field F_p (p odd).

Matrices are thin immutable wrappers around int64 numpy arrays whose entries
are always reduced to ``[0, p)``.  Elements of the exterior square are stored
in strictly-upper-triangular coordinates, pairs ``(i, j)`` with ``i < j`` in
lexicographic order.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Iterator, Sequence

import numpy as np

DEFAULT_BUDGET = 2**28


class BudgetExceeded(RuntimeError):
    """An enumeration would exceed its configured item cap."""

    def __init__(self, what: str, needed: int, budget: int):
        super().__init__(f"{what}: {needed} items exceed budget {budget}")
        self.what = what
        self.needed = needed
        self.budget = budget


def check_budget(what: str, needed: int, budget: int | None) -> None:
    if budget is None:
        budget = DEFAULT_BUDGET
    if needed > budget:
        raise BudgetExceeded(what, needed, budget)


def _is_prime(n: int) -> bool:
    if n < 2:
        return False
    if n % 2 == 0:
        return n == 2
    f = 3
    while f * f <= n:
        if n % f == 0:
            return False
        f += 2
    return True


class PrimeModulus(int):
    """An odd prime ``3 <= p < 2**16``; behaves as a plain int."""

    def __new__(cls, p):
        if isinstance(p, PrimeModulus):
            return p
        if isinstance(p, bool) or int(p) != p:
            raise ValueError(f"modulus must be an integer, got {p!r}")
        p = int(p)
        if p == 2:
            raise ValueError("p = 2 is not supported: 1/2 must exist in F_p")
        if not (3 <= p < 2**16) or not _is_prime(p):
            raise ValueError(f"modulus must be an odd prime below 2**16, got {p}")
        return super().__new__(cls, p)

    @property
    def half(self) -> int:
        return (self + 1) // 2

    def inv(self, x: int) -> int:
        x %= self
        if x == 0:
            raise ZeroDivisionError("0 has no inverse mod p")
        return pow(x, -1, int(self))


class FpMatrix:
    """Immutable rectangular matrix over Z/p."""

    __slots__ = ("p", "_a")

    def __init__(self, p, entries):
        self.p = PrimeModulus(p)
        a = np.array(entries, dtype=np.int64)
        if a.ndim == 1 and a.size == 0:
            a = a.reshape(0, 0)
        if a.ndim != 2:
            raise ValueError(f"matrix must be 2-dimensional, got shape {a.shape}")
        a %= self.p
        a.setflags(write=False)
        self._a = a

    @classmethod
    def zeros(cls, p, rows: int, cols: int) -> "FpMatrix":
        return cls(p, np.zeros((rows, cols), dtype=np.int64))

    @classmethod
    def identity(cls, p, n: int) -> "FpMatrix":
        return cls(p, np.eye(n, dtype=np.int64))

    @property
    def array(self) -> np.ndarray:
        """Read-only view of the entries."""
        return self._a

    @property
    def shape(self) -> tuple[int, int]:
        return self._a.shape  # type: ignore[return-value]

    @property
    def rows(self) -> int:
        return self._a.shape[0]

    @property
    def cols(self) -> int:
        return self._a.shape[1]

    @property
    def T(self) -> "FpMatrix":
        return FpMatrix(self.p, self._a.T)

    def tolist(self) -> list[list[int]]:
        return [[int(x) for x in row] for row in self._a]

    def row(self, i: int) -> tuple[int, ...]:
        return tuple(int(x) for x in self._a[i])

    def __matmul__(self, other: "FpMatrix") -> "FpMatrix":
        return mat_mul(self, other)

    def __eq__(self, other) -> bool:
        if not isinstance(other, FpMatrix):
            return NotImplemented
        return self.p == other.p and self.shape == other.shape and bool(np.array_equal(self._a, other._a))

    def __hash__(self) -> int:
        return hash((int(self.p), self.shape, self._a.tobytes()))

    def __repr__(self) -> str:
        return f"FpMatrix(p={int(self.p)}, {self.tolist()})"


def mat_mul(a: FpMatrix, b: FpMatrix) -> FpMatrix:
    if a.p != b.p:
        raise ValueError(f"modulus mismatch: {a.p} vs {b.p}")
    if a.cols != b.rows:
        raise ValueError(f"dimension mismatch: {a.shape} @ {b.shape}")
    # entries < 2**16, so each product < 2**32; reduce per term to stay in int64
    # for any inner dimension
    out = np.zeros((a.rows, b.cols), dtype=np.int64)
    for k in range(a.cols):
        out = (out + np.outer(a.array[:, k], b.array[k, :])) % a.p
    return FpMatrix(a.p, out)


def _rref_array(a: np.ndarray, p: int) -> tuple[np.ndarray, list[int]]:
    a = a.copy() % p
    rows, cols = a.shape
    pivots: list[int] = []
    r = 0
    for c in range(cols):
        if r == rows:
            break
        nz = np.nonzero(a[r:, c])[0]
        if nz.size == 0:
            continue
        k = r + int(nz[0])
        if k != r:
            a[[r, k]] = a[[k, r]]
        a[r] = (a[r] * pow(int(a[r, c]), -1, p)) % p
        col = a[:, c].copy()
        col[r] = 0
        a = (a - np.outer(col, a[r])) % p
        pivots.append(c)
        r += 1
    return a, pivots


def rref_rank_kernel(m: FpMatrix) -> tuple[FpMatrix, int, FpMatrix]:
    """Reduced row-echelon form, rank, and a basis (as rows) of ``{x : m x = 0}``.

    The rref keeps the input's row count (zero rows at the bottom).  Kernel
    rows are the standard basis attached to the free columns, so the kernel
    basis is itself in reduced echelon form up to row order.
    """
    p = m.p
    rows, cols = m.shape
    red, pivots = _rref_array(m.array, p)
    rank = len(pivots)
    free = [c for c in range(cols) if c not in pivots]
    kernel = np.zeros((len(free), cols), dtype=np.int64)
    for idx, f in enumerate(free):
        kernel[idx, f] = 1
        for i, pc in enumerate(pivots):
            kernel[idx, pc] = (-red[i, f]) % p
    return FpMatrix(p, red), rank, FpMatrix(p, kernel.reshape(len(free), cols))


def rank(m: FpMatrix) -> int:
    return len(_rref_array(m.array, m.p)[1])


def row_space(m: FpMatrix) -> "Subspace":
    red, pivots = _rref_array(m.array, m.p)
    return Subspace(m.p, m.cols, FpMatrix(m.p, red[: len(pivots)].reshape(len(pivots), m.cols)))


# -- exterior square -------------------------------------------------------


@lru_cache(maxsize=None)
def wedge_pairs(n: int) -> tuple[tuple[int, int], ...]:
    """Basis pairs of the exterior square in lexicographic order (0-based)."""
    return tuple(itertools.combinations(range(n), 2))


def wedge_dim(n: int) -> int:
    return n * (n - 1) // 2


@dataclass(frozen=True)
class Wedge2:
    """An element of the exterior square of F_p^n."""

    p: int
    n: int
    coords: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "p", PrimeModulus(self.p))
        coords = tuple(int(c) % self.p for c in self.coords)
        if len(coords) != wedge_dim(self.n):
            raise ValueError(f"expected {wedge_dim(self.n)} coordinates for n={self.n}, got {len(coords)}")
        object.__setattr__(self, "coords", coords)

    @classmethod
    def zero(cls, p, n: int) -> "Wedge2":
        return cls(p, n, (0,) * wedge_dim(n))

    @classmethod
    def basis(cls, p, n: int, i: int, j: int) -> "Wedge2":
        """The unit wedge e_i ^ e_j (0-based, i < j)."""
        c = [0] * wedge_dim(n)
        c[wedge_pairs(n).index((i, j))] = 1
        return cls(p, n, tuple(c))

    @classmethod
    def from_matrix(cls, m: FpMatrix) -> "Wedge2":
        a = m.array
        n = m.rows
        if m.cols != n:
            raise ValueError("antisymmetric matrix must be square")
        if np.any(np.diag(a)) or np.any((a + a.T) % m.p):
            raise ValueError("matrix is not alternating")
        return cls(m.p, n, tuple(int(a[i, j]) for i, j in wedge_pairs(n)))

    def to_matrix(self) -> FpMatrix:
        a = np.zeros((self.n, self.n), dtype=np.int64)
        for c, (i, j) in zip(self.coords, wedge_pairs(self.n)):
            a[i, j] = c
            a[j, i] = -c
        return FpMatrix(self.p, a)

    def is_zero(self) -> bool:
        return not any(self.coords)

    def __add__(self, other: "Wedge2") -> "Wedge2":
        self._check(other)
        return Wedge2(self.p, self.n, tuple(x + y for x, y in zip(self.coords, other.coords)))

    def __sub__(self, other: "Wedge2") -> "Wedge2":
        self._check(other)
        return Wedge2(self.p, self.n, tuple(x - y for x, y in zip(self.coords, other.coords)))

    def __neg__(self) -> "Wedge2":
        return Wedge2(self.p, self.n, tuple(-x for x in self.coords))

    def scale(self, c: int) -> "Wedge2":
        return Wedge2(self.p, self.n, tuple(c * x for x in self.coords))

    def _check(self, other: "Wedge2") -> None:
        if self.p != other.p or self.n != other.n:
            raise ValueError("wedges live in different exterior squares")


def wedge(u: Sequence[int], v: Sequence[int], p) -> Wedge2:
    if len(u) != len(v):
        raise ValueError(f"dimension mismatch: {len(u)} vs {len(v)}")
    n = len(u)
    return Wedge2(p, n, tuple(u[i] * v[j] - u[j] * v[i] for i, j in wedge_pairs(n)))


def is_decomposable(w: Wedge2) -> bool:
    """True iff ``w = u ^ v`` for some vectors; i.e. its matrix has rank <= 2."""
    return rank(w.to_matrix()) <= 2


def decompose_alternating(w: Wedge2) -> list[tuple[tuple[int, ...], tuple[int, ...]]]:
    """Write ``w`` as a sum of ``rank/2`` pure wedges ``u_k ^ v_k``.

    Repeatedly strips a rank-2 piece off the alternating matrix: with pivot
    entry ``c = a[i, j]`` the piece is ``(-row_j / c) ^ row_i``, so a unit
    wedge ``e_i ^ e_j`` comes back as the pair ``(e_i, e_j)``.
    """
    p = w.p
    a = w.to_matrix().array.copy()
    terms = []
    while np.any(a):
        i, j = (int(x) for x in np.argwhere(a)[0])
        inv = pow(int(a[i, j]), -1, p)
        u = (-a[j, :] * inv) % p
        v = a[i, :].copy()
        a = (a - np.outer(u, v) + np.outer(v, u)) % p
        terms.append((tuple(int(x) for x in u), tuple(int(x) for x in v)))
    return terms


# -- subspaces -------------------------------------------------------------


@dataclass(frozen=True)
class Subspace:
    """A linear subspace of F_p^n, stored by its reduced echelon basis."""

    p: int
    n: int
    basis: FpMatrix

    def __post_init__(self):
        if self.basis.cols != self.n:
            raise ValueError("basis width does not match ambient dimension")

    @property
    def dim(self) -> int:
        return self.basis.rows

    @property
    def codim(self) -> int:
        return self.n - self.dim

    def contains(self, x: Sequence[int]) -> bool:
        stacked = np.vstack([self.basis.array, np.array(x, dtype=np.int64).reshape(1, self.n)])
        return rank(FpMatrix(self.p, stacked)) == self.dim

    def vectors(self) -> Iterator[tuple[int, ...]]:
        """Every vector of the subspace, coefficient odometer order."""
        b = self.basis.array
        for coeffs in itertools.product(range(self.p), repeat=self.dim):
            if self.dim:
                yield tuple(int(x) for x in (np.array(coeffs, dtype=np.int64) @ b) % self.p)
            else:
                yield (0,) * self.n


def gaussian_binomial(n: int, d: int, p: int) -> int:
    if d < 0 or d > n:
        return 0
    num = den = 1
    for i in range(d):
        num *= p ** (n - i) - 1
        den *= p ** (i + 1) - 1
    return num // den


def enumerate_subspaces(
    n: int,
    d: int,
    p,
    budget: int | None = None,
    start: int = 0,
    stop: int | None = None,
) -> Iterator[Subspace]:
    """Every d-dimensional subspace of F_p^n exactly once, as reduced echelon bases.

    Order: pivot-column tuples lexicographically, then free entries in
    odometer order.  ``start``/``stop`` select an index range of that order.
    """
    p = PrimeModulus(p)
    if not 0 <= d <= n:
        raise ValueError(f"need 0 <= d <= n, got d={d}, n={n}")
    check_budget(f"subspaces of dim {d} in F_{p}^{n}", gaussian_binomial(n, d, p), budget)
    return _subspaces(n, d, p, start, stop)


def _subspaces(n: int, d: int, p: int, start: int, stop: int | None) -> Iterator[Subspace]:
    # one block of p**len(free) subspaces per pivot pattern; blocks before
    # ``start`` are skipped without being walked
    offset = 0
    for pivots in itertools.combinations(range(n), d):
        if stop is not None and offset >= stop:
            return
        free = [(i, c) for i, pc in enumerate(pivots) for c in range(pc + 1, n) if c not in pivots]
        size = p ** len(free)
        if offset + size <= start:
            offset += size
            continue
        template = np.zeros((d, n), dtype=np.int64)
        for i, pc in enumerate(pivots):
            template[i, pc] = 1
        lo = max(start - offset, 0)
        hi = size if stop is None else min(size, stop - offset)
        for k in range(lo, hi):
            b = template.copy()
            rest = k
            for i, c in reversed(free):
                rest, b[i, c] = divmod(rest, p)
            yield Subspace(p, n, FpMatrix(p, b))
        offset += size


def all_vectors(n: int, p: int) -> np.ndarray:
    """All p**n vectors of F_p^n as rows, little-endian odometer order."""
    idx = np.arange(p**n, dtype=np.int64)
    return digits(idx, n, p)


def digits(idx: np.ndarray, width: int, p: int) -> np.ndarray:
    """Base-p little-endian digits of each index, shape ``(len(idx), width)``."""
    out = np.empty((idx.shape[0], width), dtype=np.int64)
    rest = idx.copy()
    for k in range(width):
        out[:, k] = rest % p
        rest //= p
    return out


def as_vector(x: Iterable[int], p: int) -> tuple[int, ...]:
    return tuple(int(v) % p for v in x)
