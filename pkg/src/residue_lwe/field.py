"""Scalar arithmetic in Z_q for a prime modulus q.

Scalars are plain Python ints in ``[0, q)``; Python's unbounded integers
mean products never overflow, so any prime q is supported. Primality is
checked with :func:`sympy.isprime`, which is deterministic below 2**64.
"""
from __future__ import annotations

import math
from functools import lru_cache

from sympy import isprime, nextprime

from .errors import ZeroInverse

__all__ = [
    "require_prime",
    "mod_reduce",
    "mod_inv",
    "centered_lift",
    "round_half_away",
    "round_div",
    "next_prime",
]


@lru_cache(maxsize=256)
def require_prime(q: int) -> int:
    """Return ``q`` unchanged if it is a prime >= 3, else raise ValueError."""
    q = int(q)
    if q < 3 or not isprime(q):
        raise ValueError(f"modulus must be a prime >= 3, got {q}")
    return q


def next_prime(n: int) -> int:
    """Smallest prime strictly greater than ``n``."""
    return int(nextprime(int(n)))


def mod_reduce(a: int, q: int) -> int:
    """``a - floor(a/q) q``; always in ``[0, q)``."""
    return int(a) % q


def mod_inv(a: int, q: int) -> int:
    a = int(a) % q
    if a == 0:
        raise ZeroInverse(f"0 has no inverse modulo {q}")
    return pow(a, -1, q)


def centered_lift(a: int, q: int) -> int:
    """Signed representative of ``a`` in ``[-(q-1)/2, (q-1)/2]`` for odd q.

    Computes ``a - floor((a + q/2)/q) q`` with the floor taken as
    ``(2a + q) // (2q)`` so no floating point is involved.
    """
    a = int(a) % q
    return a - ((2 * a + q) // (2 * q)) * q


def round_half_away(x: float) -> int:
    """Round a real to the nearest integer, ties away from zero."""
    if not math.isfinite(x):
        raise ValueError(f"cannot round {x}")
    mag = abs(x)
    whole = math.floor(mag)
    # mag - whole is exact for binary floats, so the tie test is exact too
    if mag - whole >= 0.5:
        whole += 1
    return int(whole) if x >= 0 else -int(whole)


def round_div(a: int, b: int) -> int:
    """Exact ``round(a / b)`` for integers, ties away from zero (b > 0)."""
    if b <= 0:
        raise ValueError("divisor must be positive")
    sign = -1 if a < 0 else 1
    return sign * ((2 * abs(a) + b) // (2 * b))
