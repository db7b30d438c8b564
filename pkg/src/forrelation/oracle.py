"""±1-valued Boolean functions, their diagonal query operators and query counters.

Inputs x = (x_1 ... x_n) are indexed big-endian: x_1 is the most significant
bit of the integer index. The same convention is used by the circuit
simulator, the diagonal text format and every dot product in the package.
"""
from __future__ import annotations

import re
import threading
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np


class DiagonalParseError(ValueError):
    """Malformed ``D([...])`` text. ``position`` is a character offset."""

    def __init__(self, message: str, position: int):
        super().__init__(f"{message} (at position {position})")
        self.position = position


@dataclass(frozen=True)
class BooleanFunction:
    n: int
    table: tuple[int, ...]

    def __post_init__(self):
        if self.n < 1:
            raise ValueError(f"bit count must be >= 1, got {self.n}")
        table = tuple(int(v) for v in self.table)
        if len(table) != 2**self.n:
            raise ValueError(f"table has {len(table)} entries, expected {2**self.n}")
        bad = [i for i, v in enumerate(table) if v not in (1, -1)]
        if bad:
            raise ValueError(f"entry {bad[0]} is {table[bad[0]]}, expected +1 or -1")
        object.__setattr__(self, "table", table)

    @classmethod
    def from_table(cls, table: Sequence[int]) -> "BooleanFunction":
        size = len(table)
        n = size.bit_length() - 1
        if size < 2 or 2**n != size:
            raise ValueError(f"table length {size} is not a power of two >= 2")
        return cls(n, tuple(table))

    @property
    def size(self) -> int:
        return 2**self.n

    def __call__(self, x: int) -> int:
        return self.table[x]

    def __neg__(self) -> "BooleanFunction":
        return BooleanFunction(self.n, tuple(-v for v in self.table))

    def as_array(self) -> np.ndarray:
        return np.array(self.table, dtype=np.int64)

    def __str__(self) -> str:
        return format_diagonal(self)


_DIAG_RE = re.compile(r"\s*D\(\s*\[(?P<body>[^\]]*)\]\s*\)\s*$")
_TOKEN_RE = re.compile(r"[^\s,]+")


def parse_diagonal(text: str, n: int) -> BooleanFunction:
    """Parse ``D([1 1 1 -1])`` (spaces and/or commas) into a function of ``n`` bits."""
    m = _DIAG_RE.match(text)
    if m is None:
        pos = _first_syntax_error(text)
        raise DiagonalParseError("expected the form D([s1 s2 ...])", pos)
    body_start = m.start("body")
    tokens = list(_TOKEN_RE.finditer(m.group("body")))
    values = []
    for tok in tokens:
        raw = tok.group().replace("−", "-")
        if raw not in ("1", "-1", "+1"):
            raise DiagonalParseError(f"element {tok.group()!r} is not 1 or -1", body_start + tok.start())
        values.append(int(raw))
    if len(values) != 2**n:
        raise DiagonalParseError(
            f"wrong element count: got {len(values)}, expected {2**n}", body_start + len(m.group("body"))
        )
    return BooleanFunction(n, tuple(values))


def _first_syntax_error(text: str) -> int:
    stripped = text.lstrip()
    offset = len(text) - len(stripped)
    for i, expected in enumerate("D(["):
        if i >= len(stripped) or stripped[i] != expected:
            return offset + i
    close = text.find("]")
    if close < 0:
        return len(text)
    rest = text[close + 1 :].lstrip()
    if not rest.startswith(")"):
        return close + 1
    return len(text)


def format_diagonal(f: BooleanFunction) -> str:
    return "D([" + " ".join(str(v) for v in f.table) + "])"


def bits_to_index(bits: str | Sequence[int]) -> int:
    out = 0
    for b in bits:
        b = int(b)
        if b not in (0, 1):
            raise ValueError(f"bit value {b!r} is not 0 or 1")
        out = (out << 1) | b
    return out


def fwht(values: Sequence[float]) -> np.ndarray:
    """Normalized fast Walsh-Hadamard transform of a length-2^n vector (an involution)."""
    a = np.array(values, dtype=float)
    n = a.size.bit_length() - 1
    if a.size < 1 or 2**n != a.size:
        raise ValueError(f"length {a.size} is not a power of two")
    h = 1
    while h < a.size:
        a = a.reshape(-1, 2, h)
        a = np.stack((a[:, 0] + a[:, 1], a[:, 0] - a[:, 1]), axis=1).reshape(-1)
        h *= 2
    return a / 2 ** (n / 2)


def walsh_spectrum(f: BooleanFunction) -> np.ndarray:
    """2^{-n/2} Σ_x (-1)^{x·y} f(x) for every y; Σ_y spectrum(y)² = 2^n."""
    return fwht(f.table)


@dataclass
class CountingOracle:
    """Wraps a function and counts classical and quantum queries.

    A quantum query is one oracle-gate application to the whole register.
    Counters are guarded by a lock, so totals are exact under threads.
    """

    function: BooleanFunction
    classical_queries: int = 0
    quantum_queries: int = 0
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False, compare=False)

    @property
    def n(self) -> int:
        return self.function.n

    def evaluate(self, x: str | Sequence[int] | int, mode: str = "classical") -> int:
        if isinstance(x, (int, np.integer)):
            index = int(x)
            if not 0 <= index < self.function.size:
                raise ValueError(f"input {index} out of range for n={self.n}")
        else:
            if len(x) != self.n:
                raise ValueError(f"input has {len(x)} bits, oracle expects {self.n}")
            index = bits_to_index(x)
        self._count(mode)
        return self.function.table[index]

    def apply(self, amplitudes: np.ndarray) -> np.ndarray:
        """One quantum query: multiply each basis amplitude by f(x)."""
        self._count("quantum")
        return amplitudes * self.function.as_array()

    def _count(self, mode: str) -> None:
        with self._lock:
            if mode == "classical":
                self.classical_queries += 1
            elif mode == "quantum":
                self.quantum_queries += 1
            else:
                raise ValueError(f"unknown query mode {mode!r}")

    def reset(self) -> None:
        with self._lock:
            self.classical_queries = 0
            self.quantum_queries = 0
