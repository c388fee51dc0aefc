"""LWE encryption of vectors over Z_q and the binary ciphertext format.

A conventional ciphertext of an n-vector ``v`` is the n x (N+1) matrix
``[v + A sk + e, A] mod q``. Decryption multiplies by ``[1, -sk]^T``.
Left-multiplication by any Z_q matrix commutes with decryption, which is
all the homomorphism the controller needs.

Binary layout (all little-endian)::

    offset  size  field
    0       4     magic  b"LWEC"
    4       1     format version (1)
    5       1     kind   (0 = conventional, 1 = modified)
    6       2     reserved, zero
    8       8     q      (u64)
    16      4     N      (u32, key dimension)
    20      4     rows   (u32)
    24      ...   rows * width u64 entries, row-major,
                  width = N + 1 (conventional) or N + 2 (modified)
"""
from __future__ import annotations

import enum
import math
import struct
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import DimensionMismatch, FormatError, ModulusMismatch, WidthMismatch
from .field import require_prime
from .linalg import ZqMatrix, hstack

__all__ = [
    "CiphertextKind",
    "Ciphertext",
    "SecretKey",
    "make_rng",
    "uniform_matrix",
    "sample_gaussian",
    "gaussian_vector",
    "tail_bound",
    "keygen",
    "encrypt",
    "decrypt",
    "hom_matmul",
    "trivial_ciphertext",
    "to_bytes",
    "from_bytes",
]

MAGIC = b"LWEC"
FORMAT_VERSION = 1
_HEADER = struct.Struct("<4sBBHQII")


def make_rng(seed: int | None) -> np.random.Generator:
    """The package's RNG stream: PCG64 seeded with a 64-bit value."""
    return np.random.Generator(np.random.PCG64(seed))


class CiphertextKind(enum.IntEnum):
    CONVENTIONAL = 0
    MODIFIED = 1

    @property
    def extra_columns(self) -> int:
        return 1 if self is CiphertextKind.CONVENTIONAL else 2


@dataclass(frozen=True)
class SecretKey:
    sk: ZqMatrix  # N x 1
    sigma: float

    @property
    def N(self) -> int:
        return self.sk.rows

    @property
    def q(self) -> int:
        return self.sk.q


@dataclass(frozen=True)
class Ciphertext:
    body: ZqMatrix
    kind: CiphertextKind = CiphertextKind.CONVENTIONAL

    def __post_init__(self):
        if self.body.cols < self.kind.extra_columns:
            raise WidthMismatch(f"{self.kind.name.lower()} ciphertext too narrow")

    @property
    def q(self) -> int:
        return self.body.q

    @property
    def rows(self) -> int:
        return self.body.rows

    @property
    def N(self) -> int:
        return self.body.cols - self.kind.extra_columns

    @property
    def message_column(self) -> ZqMatrix:
        return self.body[:, 0]

    @property
    def mask(self) -> ZqMatrix:
        """The uniformly random block ``A`` (columns 1..N)."""
        return self.body[:, 1 : 1 + self.N]

    @property
    def disclosed_column(self) -> ZqMatrix | None:
        if self.kind is CiphertextKind.MODIFIED:
            return self.body[:, -1]
        return None

    def _compatible(self, other: "Ciphertext") -> None:
        if self.kind is not other.kind:
            raise WidthMismatch("cannot combine conventional and modified ciphertexts")
        if self.q != other.q:
            raise ModulusMismatch(f"moduli differ: {self.q} vs {other.q}")

    def __add__(self, other: "Ciphertext") -> "Ciphertext":
        self._compatible(other)
        return Ciphertext(self.body + other.body, self.kind)

    def __sub__(self, other: "Ciphertext") -> "Ciphertext":
        self._compatible(other)
        return Ciphertext(self.body - other.body, self.kind)

    def __rmatmul__(self, K: ZqMatrix) -> "Ciphertext":
        return hom_matmul(K, self)


def uniform_matrix(rows: int, cols: int, q: int, rng: np.random.Generator) -> ZqMatrix:
    # Generator.integers draws by rejection (Lemire), so Z_q samples are unbiased.
    return ZqMatrix(rng.integers(0, q, size=(rows, cols), dtype=np.int64), q)


def tail_bound(sigma: float) -> int:
    """Support half-width of the truncated discrete Gaussian: ceil(10 sigma)."""
    return int(math.ceil(10 * sigma))


@lru_cache(maxsize=32)
def _gaussian_table(sigma: float) -> tuple[np.ndarray, np.ndarray]:
    bound = tail_bound(sigma)
    support = np.arange(-bound, bound + 1)
    weights = np.exp(-(support.astype(float) ** 2) / (2 * sigma * sigma))
    cdf = np.cumsum(weights)
    cdf /= cdf[-1]
    return support, cdf


def gaussian_vector(size: int, sigma: float, rng: np.random.Generator) -> list[int]:
    """``size`` draws from the zero-mean discrete Gaussian truncated at 10 sigma.

    Sampling is by inverse CDF over the explicit support table; ``sigma = 0``
    yields exact zeros without touching the stream.
    """
    if sigma < 0:
        raise ValueError("sigma must be non-negative")
    if sigma == 0:
        return [0] * size
    support, cdf = _gaussian_table(float(sigma))
    u = rng.random(size)
    idx = np.searchsorted(cdf, u, side="right")
    idx = np.minimum(idx, len(support) - 1)
    return [int(v) for v in support[idx]]


def sample_gaussian(sigma: float, rng: np.random.Generator) -> int:
    return gaussian_vector(1, sigma, rng)[0]


def keygen(N: int, q: int, sigma: float, rng: np.random.Generator) -> SecretKey:
    if N < 1:
        raise ValueError("key dimension must be at least 1")
    if sigma < 0:
        raise ValueError("sigma must be non-negative")
    require_prime(q)
    return SecretKey(uniform_matrix(N, 1, q, rng), float(sigma))


def encrypt(
    v: ZqMatrix,
    key: SecretKey,
    rng: np.random.Generator,
    *,
    A: ZqMatrix | None = None,
    e: list[int] | None = None,
) -> Ciphertext:
    """Conventional encryption of the column vector ``v``.

    ``A`` and ``e`` override the sampled mask and error; they exist so that
    tests can pair this scheme with the modified one under matched randomness.
    """
    if v.cols != 1:
        raise DimensionMismatch(f"message must be a column vector, got {v.shape}")
    if v.q != key.q:
        raise ModulusMismatch("message and key moduli differ")
    n, q = v.rows, v.q
    if A is None:
        A = uniform_matrix(n, key.N, q, rng)
    if e is None:
        e = gaussian_vector(n, key.sigma, rng)
    first = v + A @ key.sk + ZqMatrix.column(e, q)
    return Ciphertext(hstack([first, A]), CiphertextKind.CONVENTIONAL)


def decrypt(c: Ciphertext, key: SecretKey) -> ZqMatrix:
    if c.kind is not CiphertextKind.CONVENTIONAL:
        raise WidthMismatch("modified ciphertext: use decrypt_mod")
    if c.N != key.N:
        raise WidthMismatch(f"ciphertext width {c.body.cols} does not match N + 1 = {key.N + 1}")
    return c.message_column - c.mask @ key.sk


def hom_matmul(K: ZqMatrix, c: Ciphertext) -> Ciphertext:
    if K.cols != c.rows:
        raise DimensionMismatch(f"cannot apply {K.shape} to a {c.rows}-row ciphertext")
    return Ciphertext(K @ c.body, c.kind)


def trivial_ciphertext(
    message: ZqMatrix, N: int, kind: CiphertextKind = CiphertextKind.CONVENTIONAL
) -> Ciphertext:
    """``[m, 0, ..., 0]``: decrypts to ``m`` under every key, needs no key to build."""
    pad = ZqMatrix.zeros(message.rows, N + kind.extra_columns - 1, message.q)
    return Ciphertext(hstack([message, pad]), kind)


def to_bytes(c: Ciphertext) -> bytes:
    if c.q >= 1 << 64:
        raise FormatError("modulus does not fit in 64 bits")
    header = _HEADER.pack(MAGIC, FORMAT_VERSION, int(c.kind), 0, c.q, c.N, c.rows)
    body = np.asarray(c.body.data.astype(np.uint64), dtype="<u8")
    return header + body.tobytes()


def from_bytes(blob: bytes) -> Ciphertext:
    if len(blob) < _HEADER.size:
        raise FormatError("truncated header")
    magic, version, kind, _reserved, q, N, rows = _HEADER.unpack_from(blob)
    if magic != MAGIC:
        raise FormatError("bad magic")
    if version != FORMAT_VERSION:
        raise FormatError(f"unsupported format version {version}")
    try:
        kind = CiphertextKind(kind)
    except ValueError:
        raise FormatError(f"unknown ciphertext kind {kind}") from None
    width = N + kind.extra_columns
    expected = _HEADER.size + 8 * rows * width
    if len(blob) != expected:
        raise FormatError(f"expected {expected} bytes, got {len(blob)}")
    entries = np.frombuffer(blob, dtype="<u8", offset=_HEADER.size).reshape(rows, width)
    if entries.size and int(entries.max()) >= q:
        raise FormatError("entry out of range for modulus")
    try:
        body = ZqMatrix(entries.astype(object), q)
    except ValueError as exc:
        raise FormatError(str(exc)) from None
    return Ciphertext(body, kind)
