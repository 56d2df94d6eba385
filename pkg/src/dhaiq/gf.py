"""Arithmetic over GF(2^u).

Symbols are plain ints in ``[0, 2**u)``. Scalar operations go through
log/antilog tables; the ``*_array`` variants operate elementwise on numpy
arrays and are what the simulator uses on hot paths.
"""

from __future__ import annotations

import numpy as np

FieldElement = int

MIN_DEGREE = 1
MAX_DEGREE = 16


def poly_mul_mod(a: int, b: int, modulus: int, u: int) -> int:
    """Carry-less multiply of ``a`` and ``b`` reduced by ``modulus``.

    Bit-at-a-time shift-and-add. Slow, but shares nothing with the table
    path, so it serves as a cross-check for :meth:`GaloisField.mul`.
    """
    result = 0
    top = 1 << u
    while b:
        if b & 1:
            result ^= a
        b >>= 1
        a <<= 1
        if a & top:
            a ^= modulus
    return result


def _poly_mod(a: int, m: int) -> int:
    dm = m.bit_length()
    while a and a.bit_length() >= dm:
        a ^= m << (a.bit_length() - dm)
    return a


def is_irreducible(poly: int) -> bool:
    """Trial division by every polynomial of degree 1..deg/2 over GF(2)."""
    degree = poly.bit_length() - 1
    if degree < 1:
        return False
    for d in range(1, degree // 2 + 1):
        for divisor in range(1 << d, 1 << (d + 1)):
            if _poly_mod(poly, divisor) == 0:
                return False
    return True


def default_modulus(u: int) -> int:
    """Smallest irreducible polynomial of degree ``u`` (0x11B for u=8)."""
    for poly in range((1 << u) | 1, 1 << (u + 1), 2):
        if is_irreducible(poly):
            return poly
    raise ValueError(f"no irreducible polynomial of degree {u}")  # pragma: no cover


class GaloisField:
    """GF(2^u) with a fixed modulus polynomial.

    The modulus only has to be irreducible; it need not be primitive (the
    AES polynomial is not), so the log tables are built over the smallest
    element that generates the multiplicative group.
    """

    def __init__(self, u: int = 8, modulus: int | None = None):
        if not MIN_DEGREE <= u <= MAX_DEGREE:
            raise ValueError(f"field exponent u must be in [{MIN_DEGREE}, {MAX_DEGREE}], got {u}")
        if modulus is None:
            modulus = default_modulus(u)
        if modulus.bit_length() - 1 != u:
            raise ValueError(f"modulus {modulus:#x} does not have degree {u}")
        if not is_irreducible(modulus):
            raise ValueError(f"modulus {modulus:#x} is reducible")
        self.u = u
        self.q = 1 << u
        self.modulus = modulus
        self.dtype = np.uint8 if u <= 8 else np.uint16
        self.generator = self._find_generator()
        self._build_tables()

    def __repr__(self) -> str:
        return f"GaloisField(u={self.u}, modulus={self.modulus:#x})"

    def _find_generator(self) -> int:
        order = self.q - 1
        prime_factors = [p for p in range(2, order + 1) if order % p == 0 and all(p % d for d in range(2, int(p**0.5) + 1))]
        for g in range(2, self.q):
            if all(self._pow_slow(g, order // p) != 1 for p in prime_factors):
                return g
        return 1  # q == 2 has no element besides 1

    def _pow_slow(self, a: int, e: int) -> int:
        result = 1
        while e:
            if e & 1:
                result = poly_mul_mod(result, a, self.modulus, self.u)
            a = poly_mul_mod(a, a, self.modulus, self.u)
            e >>= 1
        return result

    def _build_tables(self) -> None:
        order = self.q - 1
        exp = np.zeros(2 * order, dtype=np.int64)
        log = np.zeros(self.q, dtype=np.int64)
        x = 1
        for i in range(order):
            exp[i] = x
            log[x] = i
            x = poly_mul_mod(x, self.generator, self.modulus, self.u)
        exp[order:] = exp[:order]
        self._exp = exp
        self._log = log
        self._exp_list = exp.tolist()
        self._log_list = log.tolist()
        inv = np.zeros(self.q, dtype=self.dtype)
        inv[1:] = exp[(order - log[1:]) % order]
        self.inv_table = inv
        # full product table only where it stays small
        if self.q <= 256:
            prod = exp[(log[:, None] + log[None, :])]
            prod[0, :] = 0
            prod[:, 0] = 0
            self.mul_table = prod.astype(self.dtype)
            self._mul_flat = self.mul_table.ravel()
        else:
            self.mul_table = None

    def check(self, a: int) -> int:
        if not 0 <= a < self.q:
            raise ValueError(f"{a} is not an element of GF(2^{self.u})")
        return a

    def add(self, a: FieldElement, b: FieldElement) -> FieldElement:
        return a ^ b

    sub = add

    def mul(self, a: FieldElement, b: FieldElement) -> FieldElement:
        if a == 0 or b == 0:
            return 0
        return self._exp_list[self._log_list[a] + self._log_list[b]]

    def inv(self, a: FieldElement) -> FieldElement:
        if a == 0:
            raise ZeroDivisionError("zero has no inverse")
        return self._exp_list[(self.q - 1 - self._log_list[a]) % (self.q - 1)]

    def div(self, a: FieldElement, b: FieldElement) -> FieldElement:
        return self.mul(a, self.inv(b))

    def random_symbol(self, rng: np.random.Generator) -> FieldElement:
        """One symbol drawn uniformly over all q elements, zero included."""
        return int(rng.integers(0, self.q))

    def random_symbols(self, rng: np.random.Generator, size) -> np.ndarray:
        return rng.integers(0, self.q, size=size, dtype=self.dtype)

    def mul_array(self, a, b) -> np.ndarray:
        """Elementwise product with numpy broadcasting."""
        a = np.asarray(a)
        b = np.asarray(b)
        if self.mul_table is not None:
            return self._mul_flat[(a.astype(np.uint16) << self.u) | b]
        prod = self._exp[self._log[a] + self._log[b]]
        return np.where((a == 0) | (b == 0), 0, prod).astype(self.dtype)

    def inv_array(self, a) -> np.ndarray:
        a = np.asarray(a)
        if np.any(a == 0):
            raise ZeroDivisionError("zero has no inverse")
        return self.inv_table[a]
