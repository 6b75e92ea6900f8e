"""Exact arithmetic over a prime field GF(q) and small linear solves.

Everything downstream (query masking, secret-shared storage, decoding)
runs on these values.  Elements are immutable and hashable, so they can
be shared freely across threads and used as enumeration keys.
"""

from __future__ import annotations

from dataclasses import dataclass

MAX_MODULUS_BITS = 61  # products of two reduced values fit in 128 bits

_MR_BASES = (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37)


class FieldError(Exception):
    """Base class for field arithmetic errors."""


class FieldMismatchError(FieldError):
    """Operands belong to fields with different moduli."""


class NonInvertibleError(FieldError):
    """Zero has no multiplicative inverse."""


class SingularMatrixError(FieldError):
    """Linear system has no unique solution."""


def is_prime(n: int) -> bool:
    """Deterministic Miller-Rabin, valid for all n < 3.3e24."""
    if n < 2:
        return False
    for p in _MR_BASES:
        if n % p == 0:
            return n == p
    d, s = n - 1, 0
    while d % 2 == 0:
        d //= 2
        s += 1
    for a in _MR_BASES:
        x = pow(a, d, n)
        if x in (1, n - 1):
            continue
        for _ in range(s - 1):
            x = x * x % n
            if x == n - 1:
                break
        else:
            return False
    return True


class PrimeField:
    """The field GF(q) for a prime modulus q < 2^61.

    Acts as an element factory: ``field(value)`` reduces an integer into
    the field.  Two PrimeField instances with the same modulus compare
    equal and are interchangeable.
    """

    __slots__ = ("q",)

    def __init__(self, q: int):
        if not isinstance(q, int) or q < 2:
            raise ValueError(f"modulus must be an integer >= 2, got {q!r}")
        if q.bit_length() > MAX_MODULUS_BITS:
            raise ValueError(f"modulus must be below 2^{MAX_MODULUS_BITS}")
        if not is_prime(q):
            raise ValueError(f"modulus {q} is not prime")
        object.__setattr__(self, "q", q)

    def __setattr__(self, name, value):
        raise AttributeError("PrimeField is immutable")

    def __call__(self, value: int) -> FieldElement:
        return FieldElement(value % self.q, self)

    def zero(self) -> FieldElement:
        return FieldElement(0, self)

    def one(self) -> FieldElement:
        return FieldElement(1 % self.q, self)

    def elements(self):
        """Iterate over all q field elements, ascending."""
        return (FieldElement(v, self) for v in range(self.q))

    def vector(self, values) -> SymbolVector:
        return SymbolVector(tuple(self(v) if isinstance(v, int) else v for v in values))

    @property
    def symbol_bits(self) -> int:
        """Information-theoretic width of one symbol: ceil(log2 q)."""
        return (self.q - 1).bit_length() if self.q > 2 else 1

    def __eq__(self, other):
        return isinstance(other, PrimeField) and other.q == self.q

    def __hash__(self):
        return hash(("PrimeField", self.q))

    def __repr__(self):
        return f"PrimeField({self.q})"


@dataclass(frozen=True)
class FieldElement:
    """An integer in [0, q) tied to its field; arithmetic is mod q."""

    value: int
    field: PrimeField

    def _check(self, other: "FieldElement") -> None:
        if not isinstance(other, FieldElement):
            raise TypeError(f"expected FieldElement, got {type(other).__name__}")
        if other.field.q != self.field.q:
            raise FieldMismatchError(
                f"mixing GF({self.field.q}) and GF({other.field.q}) operands"
            )

    def __add__(self, other):
        self._check(other)
        return FieldElement((self.value + other.value) % self.field.q, self.field)

    def __sub__(self, other):
        self._check(other)
        return FieldElement((self.value - other.value) % self.field.q, self.field)

    def __mul__(self, other):
        self._check(other)
        return FieldElement(self.value * other.value % self.field.q, self.field)

    def __neg__(self):
        return FieldElement(-self.value % self.field.q, self.field)

    def __pow__(self, exponent: int):
        return FieldElement(pow(self.value, exponent, self.field.q), self.field)

    def inv(self) -> "FieldElement":
        if self.value == 0:
            raise NonInvertibleError("0 has no inverse")
        return FieldElement(pow(self.value, self.field.q - 2, self.field.q), self.field)

    def __truediv__(self, other):
        self._check(other)
        return self * other.inv()

    def __bool__(self):
        return self.value != 0

    def __int__(self):
        return self.value

    def __repr__(self):
        return f"{self.value}%{self.field.q}"


class SymbolVector:
    """Fixed-length tuple of elements from one field."""

    __slots__ = ("elements",)

    def __init__(self, elements):
        elements = tuple(elements)
        if not elements:
            raise ValueError("empty vector")
        field = elements[0].field
        for e in elements[1:]:
            if e.field.q != field.q:
                raise FieldMismatchError("vector elements span different fields")
        self.elements = elements

    @property
    def field(self) -> PrimeField:
        return self.elements[0].field

    def __len__(self):
        return len(self.elements)

    def __iter__(self):
        return iter(self.elements)

    def __getitem__(self, i):
        return self.elements[i]

    def __add__(self, other):
        if len(other) != len(self):
            raise ValueError("length mismatch")
        return SymbolVector(a + b for a, b in zip(self.elements, other))

    def __sub__(self, other):
        if len(other) != len(self):
            raise ValueError("length mismatch")
        return SymbolVector(a - b for a, b in zip(self.elements, other))

    def dot(self, other) -> FieldElement:
        if len(other) != len(self):
            raise ValueError("length mismatch")
        total = self.field.zero()
        for a, b in zip(self.elements, other):
            total = total + a * b
        return total

    def scale(self, c: FieldElement) -> "SymbolVector":
        return SymbolVector(c * a for a in self.elements)

    def values(self) -> tuple:
        return tuple(e.value for e in self.elements)

    def __eq__(self, other):
        return isinstance(other, SymbolVector) and self.elements == other.elements

    def __hash__(self):
        return hash(self.elements)

    def __repr__(self):
        return f"SymbolVector({list(self.values())} over GF({self.field.q}))"


def add(a: FieldElement, b: FieldElement) -> FieldElement:
    return a + b


def inv(a: FieldElement) -> FieldElement:
    return a.inv()


def solve_linear(matrix, rhs) -> SymbolVector:
    """Solve A x = b over the field by Gaussian elimination.

    ``matrix`` is a square sequence of rows of FieldElement, ``rhs`` a
    SymbolVector (or sequence) of matching length.  First nonzero entry
    in each column is the pivot; raises SingularMatrixError when no
    pivot exists.
    """
    rows = [list(row) for row in matrix]
    b = list(rhs)
    n = len(rows)
    if n == 0 or any(len(row) != n for row in rows) or len(b) != n:
        raise ValueError("matrix must be square and match the rhs length")
    field = b[0].field

    for col in range(n):
        pivot_row = next(
            (r for r in range(col, n) if rows[r][col].value != 0), None
        )
        if pivot_row is None:
            raise SingularMatrixError(f"no pivot in column {col}")
        rows[col], rows[pivot_row] = rows[pivot_row], rows[col]
        b[col], b[pivot_row] = b[pivot_row], b[col]
        pinv = rows[col][col].inv()
        rows[col] = [x * pinv for x in rows[col]]
        b[col] = b[col] * pinv
        for r in range(n):
            if r != col and rows[r][col].value != 0:
                factor = rows[r][col]
                rows[r] = [x - factor * y for x, y in zip(rows[r], rows[col])]
                b[r] = b[r] - factor * b[col]
    return SymbolVector(b)


def lagrange_at(points, at: FieldElement) -> FieldElement:
    """Evaluate the unique interpolating polynomial at ``at``.

    ``points`` is a sequence of (x, y) FieldElement pairs with distinct
    x values.  Used as the decode oracle independent of solve_linear.
    """
    points = list(points)
    field = at.field
    total = field.zero()
    for i, (xi, yi) in enumerate(points):
        term = yi
        for j, (xj, _) in enumerate(points):
            if i != j:
                term = term * (at - xj) * (xi - xj).inv()
        total = total + term
    return total


def sample_uniform(field: PrimeField, source) -> FieldElement:
    """Draw one uniform field element from a randomness source."""
    return FieldElement(source.randbelow(field.q), field)


def sample_vector(field: PrimeField, length: int, source) -> SymbolVector:
    return SymbolVector(sample_uniform(field, source) for _ in range(length))
