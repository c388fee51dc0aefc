"""Dense matrices over Z_q.

:class:`ZqMatrix` wraps a 2-D numpy array of Python ints (``dtype=object``)
so that products of entries near a 48-bit modulus stay exact. Every
constructor reduces entries into ``[0, q)``.

Elimination is deterministic: pivots are taken in the leftmost remaining
column, from the topmost candidate row. No other pivoting is performed,
so the same input always yields the same reduced form and, downstream,
the same normal-form transform.
"""
from __future__ import annotations

from typing import Iterable, Sequence

import numpy as np

from .errors import DependentInput, DimensionMismatch, ModulusMismatch, Singular
from .field import centered_lift, mod_inv, require_prime

__all__ = [
    "ZqMatrix",
    "vstack",
    "hstack",
    "row_reduce",
    "rank",
    "mat_inverse",
    "null_space",
    "left_kernel_basis",
    "extend_to_basis",
    "mat_pow",
]


def _as_object_array(data) -> np.ndarray:
    arr = np.asarray(data)
    if arr.dtype.kind not in "iuO":
        if arr.size == 0:
            arr = arr.astype(np.int64)
        else:
            raise TypeError(f"Z_q entries must be integers, got dtype {arr.dtype}")
    arr = arr.astype(object)
    if arr.ndim != 2:
        raise DimensionMismatch(f"expected a 2-D array, got shape {arr.shape}")
    return arr


class ZqMatrix:
    """Immutable dense matrix over Z_q."""

    __slots__ = ("data", "q")

    def __init__(self, data, q: int):
        self.q = require_prime(q)
        arr = _as_object_array(data) % self.q
        arr.flags.writeable = False
        self.data = arr

    # construction helpers
    @classmethod
    def zeros(cls, rows: int, cols: int, q: int) -> "ZqMatrix":
        return cls(np.zeros((rows, cols), dtype=np.int64), q)

    @classmethod
    def identity(cls, n: int, q: int) -> "ZqMatrix":
        return cls(np.eye(n, dtype=np.int64), q)

    @classmethod
    def column(cls, values: Iterable[int], q: int) -> "ZqMatrix":
        vals = [int(v) for v in values]
        return cls(np.array(vals, dtype=object).reshape(len(vals), 1), q)

    @classmethod
    def row(cls, values: Iterable[int], q: int) -> "ZqMatrix":
        vals = [int(v) for v in values]
        return cls(np.array(vals, dtype=object).reshape(1, len(vals)), q)

    @classmethod
    def scalar(cls, value: int, q: int) -> "ZqMatrix":
        return cls([[int(value)]], q)

    # shape
    @property
    def shape(self) -> tuple[int, int]:
        return self.data.shape

    @property
    def rows(self) -> int:
        return self.data.shape[0]

    @property
    def cols(self) -> int:
        return self.data.shape[1]

    @property
    def T(self) -> "ZqMatrix":
        return ZqMatrix(self.data.T, self.q)

    def _check(self, other: "ZqMatrix") -> None:
        if not isinstance(other, ZqMatrix):
            raise TypeError(f"expected ZqMatrix, got {type(other).__name__}")
        if other.q != self.q:
            raise ModulusMismatch(f"moduli differ: {self.q} vs {other.q}")

    # arithmetic
    def __matmul__(self, other: "ZqMatrix") -> "ZqMatrix":
        if not isinstance(other, ZqMatrix):
            return NotImplemented  # lets ciphertexts handle K @ c
        self._check(other)
        if self.cols != other.rows:
            raise DimensionMismatch(f"cannot multiply {self.shape} by {other.shape}")
        if self.cols == 0:
            return ZqMatrix.zeros(self.rows, other.cols, self.q)
        return ZqMatrix(np.dot(self.data, other.data), self.q)

    def __add__(self, other: "ZqMatrix") -> "ZqMatrix":
        self._check(other)
        if self.shape != other.shape:
            raise DimensionMismatch(f"cannot add {self.shape} and {other.shape}")
        return ZqMatrix(self.data + other.data, self.q)

    def __sub__(self, other: "ZqMatrix") -> "ZqMatrix":
        self._check(other)
        if self.shape != other.shape:
            raise DimensionMismatch(f"cannot subtract {other.shape} from {self.shape}")
        return ZqMatrix(self.data - other.data, self.q)

    def __neg__(self) -> "ZqMatrix":
        return ZqMatrix(-self.data, self.q)

    def __mul__(self, k: int) -> "ZqMatrix":
        if isinstance(k, ZqMatrix):
            raise TypeError("use @ for matrix products")
        return ZqMatrix(self.data * int(k), self.q)

    __rmul__ = __mul__

    def __eq__(self, other) -> bool:
        if not isinstance(other, ZqMatrix):
            return NotImplemented
        return (
            self.q == other.q
            and self.shape == other.shape
            and bool(np.all(self.data == other.data))
        )

    def __hash__(self) -> int:
        return hash((self.q, self.shape, tuple(self.data.ravel().tolist())))

    def __getitem__(self, key) -> "ZqMatrix | int":
        """Integer pairs give an int; anything else gives a 2-D ZqMatrix."""
        if (
            isinstance(key, tuple)
            and len(key) == 2
            and all(isinstance(k, (int, np.integer)) for k in key)
        ):
            return int(self.data[key])
        rows, cols = key if isinstance(key, tuple) else (key, slice(None))
        if isinstance(rows, (int, np.integer)):
            rows = slice(rows, rows + 1 if rows != -1 else None)
        if isinstance(cols, (int, np.integer)):
            cols = slice(cols, cols + 1 if cols != -1 else None)
        return ZqMatrix(self.data[rows, cols], self.q)

    def __repr__(self) -> str:
        return f"ZqMatrix({self.data.tolist()}, q={self.q})"

    # conversions
    def tolist(self) -> list[list[int]]:
        return [[int(v) for v in row] for row in self.data]

    def flat(self) -> list[int]:
        return [int(v) for v in self.data.ravel()]

    def centered(self) -> np.ndarray:
        """Entrywise centered lift as an object array of signed ints."""
        lift = np.frompyfunc(lambda a: centered_lift(a, self.q), 1, 1)
        return lift(self.data).astype(object) if self.data.size else self.data.copy()

    def is_zero(self) -> bool:
        return not bool(np.any(self.data != 0))


def vstack(blocks: Sequence[ZqMatrix], q: int | None = None) -> ZqMatrix:
    if not blocks:
        raise ValueError("vstack needs at least one block")
    q = blocks[0].q if q is None else q
    for b in blocks:
        if b.q != q:
            raise ModulusMismatch("moduli differ in vstack")
    return ZqMatrix(np.vstack([b.data for b in blocks]), q)


def hstack(blocks: Sequence[ZqMatrix], q: int | None = None) -> ZqMatrix:
    if not blocks:
        raise ValueError("hstack needs at least one block")
    q = blocks[0].q if q is None else q
    for b in blocks:
        if b.q != q:
            raise ModulusMismatch("moduli differ in hstack")
    return ZqMatrix(np.hstack([b.data for b in blocks]), q)


def row_reduce(M: ZqMatrix) -> tuple[ZqMatrix, list[int]]:
    """Reduced row echelon form and the list of pivot columns."""
    q = M.q
    a = [[int(v) for v in row] for row in M.data]
    nrows, ncols = M.shape
    pivots: list[int] = []
    r = 0
    for c in range(ncols):
        if r == nrows:
            break
        piv = next((i for i in range(r, nrows) if a[i][c] != 0), None)
        if piv is None:
            continue
        a[r], a[piv] = a[piv], a[r]
        inv = mod_inv(a[r][c], q)
        a[r] = [(v * inv) % q for v in a[r]]
        for i in range(nrows):
            if i != r and a[i][c] != 0:
                f = a[i][c]
                a[i] = [(x - f * y) % q for x, y in zip(a[i], a[r])]
        pivots.append(c)
        r += 1
    out = np.array(a, dtype=object).reshape(nrows, ncols)
    return ZqMatrix(out, q), pivots


def rank(M: ZqMatrix) -> int:
    if M.rows == 0 or M.cols == 0:
        return 0
    return len(row_reduce(M)[1])


def mat_inverse(M: ZqMatrix) -> ZqMatrix:
    """Gauss-Jordan inverse; raises :class:`Singular` if M is not invertible."""
    n = M.rows
    if M.rows != M.cols:
        raise DimensionMismatch(f"cannot invert non-square {M.shape}")
    if n == 0:
        return M
    aug = hstack([M, ZqMatrix.identity(n, M.q)])
    red, pivots = row_reduce(aug)
    if pivots[:n] != list(range(n)):
        missing = next(c for c in range(n) if c not in pivots)
        raise Singular(f"no pivot in column {missing}")
    return red[:, n:]


def null_space(M: ZqMatrix) -> list[ZqMatrix]:
    """Basis of ``{x : M x = 0}`` as column vectors, one per free column."""
    q = M.q
    ncols = M.cols
    if M.rows == 0:
        return [ZqMatrix.identity(ncols, q)[:, j] for j in range(ncols)]
    red, pivots = row_reduce(M)
    free = [c for c in range(ncols) if c not in pivots]
    basis = []
    for f in free:
        vec = [0] * ncols
        vec[f] = 1
        for i, p in enumerate(pivots):
            vec[p] = -red[i, f]
        basis.append(ZqMatrix.column(vec, q))
    return basis


def left_kernel_basis(G: ZqMatrix) -> list[ZqMatrix]:
    """Row vectors ``v`` with ``v G = 0``: n-1 of them if G != 0, else n."""
    return [v.T for v in null_space(G.T)]


def extend_to_basis(partial: Sequence[ZqMatrix], kernel: Sequence[ZqMatrix]) -> list[ZqMatrix]:
    """Rows ``C`` such that ``partial + C`` is a basis of ``span(kernel)``.

    Rows of ``kernel`` are tried in order and kept whenever they raise the
    rank, which keeps the completion deterministic.
    """
    if not kernel:
        if partial:
            raise DependentInput("partial rows lie outside an empty span")
        return []
    q = kernel[0].q
    span_rank = rank(vstack(list(kernel)))
    if partial:
        P = vstack(list(partial))
        if rank(P) != len(partial):
            raise DependentInput("partial rows are linearly dependent")
        if rank(vstack([vstack(list(kernel)), P])) != span_rank:
            raise DependentInput("partial rows are not in the span of the kernel")
    chosen = list(partial)
    completion: list[ZqMatrix] = []
    current = len(chosen)
    for row in kernel:
        if current == span_rank:
            break
        trial = vstack(chosen + [row], q)
        if rank(trial) > current:
            chosen.append(row)
            completion.append(row)
            current += 1
    return completion


def mat_pow(M: ZqMatrix, t: int) -> ZqMatrix:
    if M.rows != M.cols:
        raise DimensionMismatch(f"cannot raise non-square {M.shape} to a power")
    if t < 0:
        raise ValueError("exponent must be non-negative")
    result = ZqMatrix.identity(M.rows, M.q)
    base = M
    while t:
        if t & 1:
            result = result @ base
        base = base @ base
        t >>= 1
    return result
