"""Longest Expected Repeated Pattern bound and alphabet-prefix classification."""

import logging
import math
from dataclasses import dataclass
from fractions import Fraction
from itertools import product
from typing import List

import numpy as np

from .errors import ParameterError

log = logging.getLogger(__name__)

DEFAULT_P_BAR = 1e-4
RESIDUAL_KEY = "_short"
MAX_CLASSES = 4096
# bytes per stored record on top of its text (uint32 global position)
POSITION_BYTES = 4


@dataclass(frozen=True)
class LerpParams:
    n: int
    m: int
    p_bar: float
    lerp: int

    @classmethod
    def from_probability(cls, n, m, p_bar=DEFAULT_P_BAR):
        return cls(n, m, p_bar, compute_lerp(n, m, p_bar))


def _exact(x) -> Fraction:
    if isinstance(x, float):
        # the decimal the caller typed, not its binary approximation
        return Fraction(repr(x))
    return Fraction(x)


def compute_lerp(n: int, m: int, p_bar: float = DEFAULT_P_BAR) -> int:
    """Smallest integer l >= 1 with m**l >= n**2 / (2 * p_bar).

    The float logarithm only seeds the search; the boundary is settled with
    exact rational arithmetic so results at integer powers are never off by one.
    """
    if not (isinstance(n, (int, np.integer)) and n >= 1):
        raise ParameterError(f"n must be a positive integer, got {n!r}")
    if not (isinstance(m, (int, np.integer)) and m >= 2):
        raise ParameterError(f"alphabet size m must be an integer >= 2, got {m!r}")
    if not (0 < p_bar <= 1):
        raise ParameterError(f"p_bar must lie in (0, 1], got {p_bar!r}")
    n, m = int(n), int(m)
    target = Fraction(n * n) / (2 * _exact(p_bar))
    if target <= 1:
        return 1
    l = max(1, math.ceil(math.log(float(target), m)))
    while m**l < target:
        l += 1
    while l > 1 and m ** (l - 1) >= target:
        l -= 1
    return l


@dataclass(frozen=True)
class ClassificationScheme:
    """Partition of suffixes by their first ``level`` symbols.

    Suffixes shorter than ``level`` fall into the residual class.
    """

    alphabet: str
    level: int

    def __post_init__(self):
        if len(self.alphabet) < 2:
            raise ParameterError("classification needs an alphabet of size >= 2")
        if self.level < 0:
            raise ParameterError(f"classification level must be >= 0, got {self.level}")

    @property
    def m(self) -> int:
        return len(self.alphabet)

    @property
    def symbols(self) -> str:
        """Alphabet in bytewise order, which is the order class keys sort in."""
        return "".join(sorted(self.alphabet))

    @property
    def keys(self) -> List[str]:
        keys = ["".join(p) for p in product(self.symbols, repeat=self.level)]
        if self.level > 0:
            keys.append(RESIDUAL_KEY)
        return keys

    @property
    def n_full(self) -> int:
        return self.m**self.level

    def code_table(self) -> np.ndarray:
        """Byte value -> rank in the sorted alphabet, -1 for foreign bytes."""
        table = np.full(256, -1, dtype=np.int64)
        for rank, sym in enumerate(self.symbols):
            table[ord(sym)] = rank
        return table

    def class_indices(self, symbols: np.ndarray) -> np.ndarray:
        """Class index of the suffix at every offset of a uint8 symbol array.

        Index ``n_full`` denotes the residual class.
        """
        n = len(symbols)
        out = np.full(n, self.n_full, dtype=np.int64)
        if self.level == 0:
            out[:] = 0
            return out
        full = n - self.level + 1
        if full <= 0:
            return out
        codes = self.code_table()[np.asarray(symbols)]
        if (codes < 0).any():
            bad = int(np.argmax(codes < 0))
            raise ParameterError(f"symbol {chr(symbols[bad])!r} at offset {bad} is outside the alphabet")
        idx = np.zeros(full, dtype=np.int64)
        for j in range(self.level):
            idx = idx * self.m + codes[j : j + full]
        out[:full] = idx
        return out

    def key_of(self, index: int) -> str:
        return self.keys[index] if self.level > 0 else ""


def class_key(suffix_prefix: str, scheme: ClassificationScheme) -> str:
    bad = set(suffix_prefix) - set(scheme.alphabet)
    if bad:
        raise ParameterError(f"symbols {sorted(bad)} are outside the alphabet {scheme.alphabet!r}")
    if len(suffix_prefix) < scheme.level:
        return RESIDUAL_KEY
    return suffix_prefix[: scheme.level]


def max_level(m: int) -> int:
    level = 0
    while m ** (level + 1) <= MAX_CLASSES:
        level += 1
    return level


def estimated_class_bytes(total_length: int, lerp: int, m: int, level: int) -> float:
    return total_length * (lerp + POSITION_BYTES) / m**level


def choose_level(total_length: int, lerp: int, m: int, memory_budget: int) -> int:
    """Smallest level whose uniform per-class size estimate fits ``memory_budget``."""
    if memory_budget <= 0:
        raise ParameterError(f"memory budget must be positive, got {memory_budget}")
    cap = max_level(m)
    for level in range(cap + 1):
        if estimated_class_bytes(total_length, lerp, m, level) <= memory_budget:
            return level
    log.warning(
        "budget of %d bytes is unreachable with at most %d classes; using level %d",
        memory_budget, MAX_CLASSES, cap,
    )
    return cap
