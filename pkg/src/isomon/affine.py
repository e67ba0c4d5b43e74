"""Affine maps of exponent space with exact rational coefficients."""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from numbers import Rational
from typing import Sequence


def _frac(x) -> Fraction:
    if isinstance(x, Fraction):
        return x
    if isinstance(x, (int, Rational)):
        return Fraction(x)
    return Fraction(str(x))


@dataclass(frozen=True)
class AffineMap:
    """``lam -> linear @ lam + shift`` over the rationals.

    ``f @ g`` is the composite ``f o g`` (``g`` applied first).
    """

    linear: tuple[tuple[Fraction, ...], ...]
    shift: tuple[Fraction, ...]

    @classmethod
    def from_rows(cls, linear: Sequence[Sequence], shift: Sequence) -> "AffineMap":
        return cls(tuple(tuple(_frac(x) for x in row) for row in linear),
                   tuple(_frac(x) for x in shift))

    @classmethod
    def identity(cls, n: int) -> "AffineMap":
        return cls.from_rows([[int(i == j) for j in range(n)] for i in range(n)], [0] * n)

    @property
    def dim(self) -> int:
        return len(self.shift)

    def __call__(self, lam: Sequence) -> tuple:
        if len(lam) != self.dim:
            raise ValueError(f"expected a vector of length {self.dim}, got {len(lam)}")
        exact = all(isinstance(x, (int, Fraction)) for x in lam)
        out = []
        for row, b in zip(self.linear, self.shift):
            if exact:
                acc = b + sum((c * Fraction(x) for c, x in zip(row, lam) if c), Fraction(0))
            else:
                acc = float(b) + sum(float(c) * x for c, x in zip(row, lam) if c)
            out.append(acc)
        return tuple(out)

    def __matmul__(self, other: "AffineMap") -> "AffineMap":
        n = self.dim
        lin = [[sum((self.linear[i][k] * other.linear[k][j] for k in range(n)), Fraction(0))
                for j in range(n)] for i in range(n)]
        sh = [self.shift[i] + sum((self.linear[i][k] * other.shift[k] for k in range(n)), Fraction(0))
              for i in range(n)]
        return AffineMap.from_rows(lin, sh)

    def __pow__(self, k: int) -> "AffineMap":
        if k < 0:
            raise ValueError("negative powers are not supported")
        out = AffineMap.identity(self.dim)
        for _ in range(k):
            out = self @ out
        return out

    def is_identity(self) -> bool:
        return self == AffineMap.identity(self.dim)
