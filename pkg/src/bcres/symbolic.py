"""Rotational symbol sequences and words over the alphabet {L, R}."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from fractions import Fraction
from math import gcd


class Symbol(str, enum.Enum):
    L = "L"
    R = "R"

    def toggled(self) -> "Symbol":
        return Symbol.R if self is Symbol.L else Symbol.L


@dataclass(frozen=True)
class RotationalParams:
    """Counts describing a rotational word: ``l`` symbols L, rotation ``m/n``
    and ``d``, the inverse of ``m`` modulo ``n``."""

    l: int
    m: int
    n: int
    d: int

    def __post_init__(self):
        if not 1 <= self.l <= self.n - 1:
            raise ValueError(f"l={self.l} outside [1, {self.n - 1}]")
        if not 1 <= self.m <= self.n - 1 or gcd(self.m, self.n) != 1:
            raise ValueError(f"m={self.m} is not a unit modulo n={self.n}")
        if (self.m * self.d) % self.n != 1:
            raise ValueError(f"d={self.d} is not the inverse of m={self.m} mod {self.n}")


@dataclass(frozen=True)
class SymbolWord:
    """A finite word; indices are taken modulo its length."""

    symbols: tuple[Symbol, ...]
    rotation: RotationalParams | None = field(default=None, compare=False)

    def __post_init__(self):
        if len(self.symbols) < 1:
            raise ValueError("a word needs at least one symbol")
        if not all(type(s) is Symbol for s in self.symbols):
            object.__setattr__(self, "symbols", tuple(Symbol(s) for s in self.symbols))

    @classmethod
    def parse(cls, text: str) -> "SymbolWord":
        text = text.strip().upper()
        bad = set(text) - {"L", "R"}
        if bad or not text:
            raise ValueError(f"not a word over {{L,R}}: {text!r}")
        return cls(tuple(Symbol(c) for c in text))

    def __len__(self) -> int:
        return len(self.symbols)

    def __getitem__(self, i: int) -> Symbol:
        return self.symbols[i % len(self.symbols)]

    def __iter__(self):
        return iter(self.symbols)

    def __str__(self) -> str:
        return "".join(s.value for s in self.symbols)

    def __repr__(self) -> str:
        return f"SymbolWord({str(self)!r})"

    @property
    def n(self) -> int:
        return len(self.symbols)

    def count(self, sym: Symbol | str) -> int:
        return self.symbols.count(Symbol(sym))

    def shift(self, i: int) -> "SymbolWord":
        return cyclic_shift(self, i)

    def flip(self, i: int) -> "SymbolWord":
        return flip(self, i)


def mod_inverse(m: int, n: int) -> int:
    """Return ``d`` in ``[1, n-1]`` with ``m*d = 1 (mod n)``."""
    if n < 2 or gcd(m, n) != 1:
        raise ValueError(f"{m} has no inverse modulo {n}")
    return pow(m, -1, n)


def sequence_element(alpha: float | Fraction, beta: float | Fraction, i: int) -> Symbol:
    """Element ``i`` of the bi-infinite sequence: L when ``i*alpha mod 1`` lies in ``[0, beta)``.

    Exact arithmetic is used when ``alpha`` and ``beta`` are Fractions, which
    avoids misclassifying points that sit exactly on ``beta``.
    """
    phase = (i * alpha) % 1
    return Symbol.L if phase < beta else Symbol.R


def rotational_word(l: int, m: int, n: int) -> SymbolWord:
    """The word made of elements ``0..n-1`` of the rotational sequence with rotation ``m/n``
    and ``l`` symbols L."""
    if n < 2:
        raise ValueError("n must be at least 2")
    if not 1 <= l <= n - 1:
        raise ValueError(f"l={l} outside [1, {n - 1}]")
    if not 1 <= m <= n - 1 or gcd(m, n) != 1:
        raise ValueError(f"gcd({m}, {n}) != 1 or m out of range")
    # i*(m/n) mod 1 < l/n, in integers
    symbols = tuple(Symbol.L if (i * m) % n < l else Symbol.R for i in range(n))
    return SymbolWord(symbols, RotationalParams(l, m, n, mod_inverse(m, n)))


def cyclic_shift(w: SymbolWord, i: int) -> SymbolWord:
    """Left cyclic permutation: element ``j`` of the result is element ``j+i`` of ``w``."""
    k = i % w.n
    return SymbolWord(w.symbols[k:] + w.symbols[:k])


def flip(w: SymbolWord, i: int) -> SymbolWord:
    k = i % w.n
    s = list(w.symbols)
    s[k] = s[k].toggled()
    return SymbolWord(tuple(s))


def as_word(w: SymbolWord | str) -> SymbolWord:
    return w if isinstance(w, SymbolWord) else SymbolWord.parse(w)
