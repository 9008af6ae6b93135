"""Arithmetic in GF(2^k) with log/antilog tables.

Elements are plain integers in ``[0, 2**k)``; bit ``i`` holds the coefficient
of ``x**i``. Addition is XOR.
"""
from __future__ import annotations

from functools import lru_cache

import numpy as np

# Default primitive polynomials, indexed by degree (bitmask incl. the x^k term).
DEFAULT_POLYS = {
    1: 0b11,
    2: 0b111,
    3: 0b1011,
    4: 0b10011,  # x^4 + x + 1
    5: 0b100101,
    6: 0b1000011,
    7: 0b10001001,
    8: 0b100011101,
}


def poly_mulmod(a: int, b: int, poly: int) -> int:
    """Schoolbook carry-less multiplication of ``a`` and ``b`` reduced mod ``poly``."""
    deg = poly.bit_length() - 1
    prod = 0
    while b:
        if b & 1:
            prod ^= a
        b >>= 1
        a <<= 1
    for shift in range(prod.bit_length() - 1, deg - 1, -1):
        if prod >> shift & 1:
            prod ^= poly << (shift - deg)
    return prod


def is_irreducible(poly: int) -> bool:
    """Brute-force irreducibility test over GF(2) (fine for degree <= 8)."""
    deg = poly.bit_length() - 1
    if deg < 1:
        return False
    # every candidate divisor of degree 1..deg//2
    for d in range(2, 1 << (deg // 2 + 1)):
        r = poly
        dd = d.bit_length() - 1
        while r and r.bit_length() - 1 >= dd:
            r ^= d << (r.bit_length() - 1 - dd)
        if r == 0:
            return False
    return True


class FieldSpec:
    """GF(2^k) defined by a primitive polynomial.

    Instances are immutable and cached per ``(k, poly)``; use :func:`gf`.
    """

    def __init__(self, k: int, primitive_poly: int | None = None):
        if not 1 <= k <= 8:
            raise ValueError("only 1 <= k <= 8 is supported")
        poly = DEFAULT_POLYS[k] if primitive_poly is None else int(primitive_poly)
        if poly.bit_length() - 1 != k:
            raise ValueError(f"polynomial {poly:#b} does not have degree {k}")
        if not is_irreducible(poly):
            raise ValueError(f"polynomial {poly:#b} is reducible")
        self.k = k
        self.primitive_poly = poly
        self.order = 1 << k

        q = self.order
        exp = np.zeros(2 * q, dtype=np.int64)
        log = np.full(q, -1, dtype=np.int64)
        x = 1
        for i in range(q - 1):
            if log[x] != -1:
                raise ValueError(f"polynomial {poly:#b} is not primitive")
            exp[i] = x
            log[x] = i
            x = poly_mulmod(x, 2, poly)
        if x != 1:
            raise ValueError(f"polynomial {poly:#b} is not primitive")
        exp[q - 1 : 2 * q - 2] = exp[: q - 1]
        self.exp = exp
        self.log = log

        # full tables are tiny for q <= 256 and make vectorised code trivial
        a = np.arange(q)
        mul = np.zeros((q, q), dtype=np.int64)
        nz = a[1:]
        mul[1:, 1:] = exp[(log[nz][:, None] + log[nz][None, :]) % (q - 1)]
        self.mul_table = mul
        inv = np.zeros(q, dtype=np.int64)
        inv[1:] = exp[(q - 1 - log[nz]) % (q - 1)]
        self.inv_table = inv
        for arr in (self.exp, self.log, self.mul_table, self.inv_table):
            arr.setflags(write=False)

    @property
    def q(self) -> int:
        return self.order

    def mul(self, a: int, b: int) -> int:
        if a == 0 or b == 0:
            return 0
        return int(self.exp[self.log[a] + self.log[b]])

    def inv(self, a: int) -> int:
        if a == 0:
            raise ZeroDivisionError("zero has no multiplicative inverse")
        return int(self.inv_table[a])

    def div(self, a: int, b: int) -> int:
        return self.mul(a, self.inv(b))

    def pow(self, a: int, e: int) -> int:
        if a == 0:
            return 0 if e else 1
        return int(self.exp[(self.log[a] * e) % (self.order - 1)])

    def __repr__(self) -> str:
        return f"FieldSpec(k={self.k}, primitive_poly={self.primitive_poly:#x})"


@lru_cache(maxsize=None)
def gf(k: int, primitive_poly: int | None = None) -> FieldSpec:
    return FieldSpec(k, primitive_poly)


def field_mul(a: int, b: int, spec: FieldSpec) -> int:
    return spec.mul(a, b)


def field_inv(a: int, spec: FieldSpec) -> int:
    return spec.inv(a)
