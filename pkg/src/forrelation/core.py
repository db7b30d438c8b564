"""Exact k-fold Forrelation, threshold classification and classical query accounting."""
from __future__ import annotations

import enum
import itertools
import json
import os
from dataclasses import dataclass
from typing import Iterator, Sequence

import numpy as np

from .oracle import BooleanFunction, CountingOracle, format_diagonal, parse_diagonal

DEFAULT_GUARD = 24
GUARD_ENV = "FORRELATION_GUARD"

LARGE_THRESHOLD = 3 / 5
SMALL_THRESHOLD = 1 / 100


class GuardExceeded(RuntimeError):
    pass


def enumeration_guard(override: int | None = None) -> int:
    if override is not None:
        return override
    env = os.environ.get(GUARD_ENV)
    return int(env) if env else DEFAULT_GUARD


@dataclass(frozen=True)
class ForrelationInstance:
    k: int
    n: int
    functions: tuple[BooleanFunction, ...]
    target: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "functions", tuple(self.functions))
        if self.k < 2:
            raise ValueError(f"fold count must be >= 2, got {self.k}")
        if len(self.functions) != self.k:
            raise ValueError(f"expected {self.k} functions, got {len(self.functions)}")
        for i, f in enumerate(self.functions):
            if f.n != self.n:
                raise ValueError(f"function {i + 1} has {f.n} bits, instance has n={self.n}")
        if self.target is not None and abs(self.target) > 1:
            raise ValueError(f"target {self.target} outside [-1, 1]")

    @classmethod
    def of(cls, *functions: BooleanFunction, target: float | None = None) -> "ForrelationInstance":
        return cls(len(functions), functions[0].n, tuple(functions), target)

    def canonical_text(self) -> str:
        return " ".join(format_diagonal(f) for f in self.functions)

    def to_dict(self) -> dict:
        doc = {"k": self.k, "n": self.n, "oracles": [format_diagonal(f) for f in self.functions]}
        if self.target is not None:
            doc["target"] = self.target
        return doc

    @classmethod
    def from_dict(cls, doc: dict) -> "ForrelationInstance":
        try:
            k, n, oracles = int(doc["k"]), int(doc["n"]), doc["oracles"]
        except KeyError as exc:
            raise ValueError(f"instance document is missing {exc.args[0]!r}") from None
        functions = tuple(parse_diagonal(text, n) for text in oracles)
        target = doc.get("target")
        return cls(k, n, functions, None if target is None else float(target))

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


def load_instances(text: str) -> list[ForrelationInstance]:
    """Accept one instance document, a JSON list of them, or one document per line."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError:
        lines = [line for line in text.splitlines() if line.strip()]
        return [ForrelationInstance.from_dict(json.loads(line)) for line in lines]
    if isinstance(doc, list):
        return [ForrelationInstance.from_dict(d) for d in doc]
    return [ForrelationInstance.from_dict(doc)]


def _check_guard(instance: ForrelationInstance, guard: int | None) -> None:
    limit = enumeration_guard(guard)
    if instance.k * instance.n > limit:
        raise GuardExceeded(
            f"k*n = {instance.k * instance.n} exceeds the enumeration guard {limit}; "
            f"raise it with guard= or ${GUARD_ENV}"
        )


def sign_matrix(n: int) -> np.ndarray:
    """Integer matrix of (-1)^{x·y} over n-bit strings."""
    idx = np.arange(2**n)
    parity = (np.bitwise_count(idx[:, None] & idx[None, :]) & 1).astype(np.int64)
    return 1 - 2 * parity


def _check_bound(phi: float) -> float:
    assert abs(phi) <= 1 + 1e-12, f"|Phi| = {abs(phi)} exceeds 1"
    return phi


def forrelation(instance: ForrelationInstance, guard: int | None = None) -> float:
    """Φ_k of the instance.

    The sum over all 2^{kn} terms is carried out in exact integer arithmetic
    by summing out x_1, x_2, ... in turn, then scaled once by 2^{-(k+1)n/2}.
    """
    _check_guard(instance, guard)
    s = sign_matrix(instance.n)
    v = instance.functions[0].as_array()
    for f in instance.functions[1:]:
        v = (v @ s) * f.as_array()
    total = int(v.sum())
    return _check_bound(total / 2 ** ((instance.k + 1) * instance.n / 2))


def forrelation_bruteforce(instance: ForrelationInstance, guard: int | None = None) -> float:
    """Literal term-by-term enumeration of the defining sum; the reference oracle."""
    _check_guard(instance, guard)
    n, k = instance.n, instance.k
    tables = [f.table for f in instance.functions]
    total = 0
    for xs in itertools.product(range(2**n), repeat=k):
        parity = 0
        for a, b in zip(xs, xs[1:]):
            parity ^= (a & b).bit_count() & 1
        term = -1 if parity else 1
        for table, x in zip(tables, xs):
            term *= table[x]
        total += term
    return _check_bound(total / 2 ** ((k + 1) * n / 2))


class Label(str, enum.Enum):
    LARGE = "LARGE"
    SMALL = "SMALL"
    NEITHER = "NEITHER"


@dataclass(frozen=True)
class Classification:
    label: Label
    value: float


def classify(phi: float) -> Classification:
    if abs(phi) > 1 + 1e-9:
        raise ValueError(f"|phi| = {abs(phi)} exceeds 1")
    if phi >= LARGE_THRESHOLD:
        label = Label.LARGE
    elif abs(phi) <= SMALL_THRESHOLD:
        label = Label.SMALL
    else:
        label = Label.NEITHER
    return Classification(label, phi)


def classical_query_cost(k: int, n: int, memoized: bool = True) -> int:
    if k < 2 or n < 1:
        raise ValueError("need k >= 2 and n >= 1")
    return k * 2**n if memoized else k * 2 ** (k * n)


def instrumented_forrelation(
    instance: ForrelationInstance, memoized: bool = True, guard: int | None = None
) -> tuple[float, list[CountingOracle]]:
    """Evaluate Φ through counting oracles, returning the value and the oracles.

    Memoized: every function is read once per input and cached.
    Non-memoized: every summand re-queries all k functions.
    """
    _check_guard(instance, guard)
    oracles = [CountingOracle(f) for f in instance.functions]
    n, k = instance.n, instance.k
    if memoized:
        tables = [[o.evaluate(x) for x in range(2**n)] for o in oracles]
        lookup = lambda i, x: tables[i][x]  # noqa: E731
    else:
        lookup = lambda i, x: oracles[i].evaluate(x)  # noqa: E731
    total = 0
    for xs in itertools.product(range(2**n), repeat=k):
        parity = 0
        for a, b in zip(xs, xs[1:]):
            parity ^= (a & b).bit_count() & 1
        term = -1 if parity else 1
        for i, x in enumerate(xs):
            term *= lookup(i, x)
        total += term
    return _check_bound(total / 2 ** ((k + 1) * n / 2)), oracles


def all_functions(n: int) -> Iterator[BooleanFunction]:
    """Every n-bit ±1 function in lexicographic order, +1 sorting before -1."""
    size = 2**n
    for code in range(2**size):
        yield BooleanFunction(n, tuple(-1 if (code >> (size - 1 - j)) & 1 else 1 for j in range(size)))


def find_instances(
    target: float, k: int = 2, n: int = 2, limit: int = 10, tol: float = 1e-12
) -> list[ForrelationInstance]:
    """Up to ``limit`` k-tuples of n-bit diagonals whose Φ equals ``target``.

    Tuples are scanned in lexicographic order of their tables (see
    :func:`all_functions`), so the result is deterministic.
    """
    if abs(target) > 1:
        raise ValueError(f"target {target} outside [-1, 1]")
    functions = list(all_functions(n))
    arrays = [f.as_array() for f in functions]
    s = sign_matrix(n)
    scale = 2 ** ((k + 1) * n / 2)
    found: list[ForrelationInstance] = []
    seen: set[str] = set()
    for combo in itertools.product(range(len(functions)), repeat=k):
        v = arrays[combo[0]]
        for j in combo[1:]:
            v = (v @ s) * arrays[j]
        if abs(int(v.sum()) / scale - target) > tol:
            continue
        inst = ForrelationInstance(k, n, tuple(functions[j] for j in combo), target)
        key = inst.canonical_text()
        if key in seen:
            continue
        seen.add(key)
        found.append(inst)
        if len(found) >= limit:
            break
    return found


SHOWCASE_TARGETS = (1.0, 0.5, 0.0, -0.5, -1.0)


def showcase_instances(k: int, n: int = 2) -> list[ForrelationInstance]:
    """One instance per target 1, 0.5, 0, -0.5, -1.

    Picks the first search hit in which no function is constant (constant
    oracles compile to nothing and make dull benchmarks), else the first hit.
    """
    out = []
    for t in SHOWCASE_TARGETS:
        hits = find_instances(t, k, n, limit=2 ** (k * 2**n))
        if not hits:
            raise LookupError(f"no {k}-fold instance with Phi = {t} at n = {n}")
        varied = [h for h in hits if all(len(set(f.table)) > 1 for f in h.functions)]
        out.append(varied[0] if varied else hits[0])
    return out


def with_target(instance: ForrelationInstance, target: float | None) -> ForrelationInstance:
    return ForrelationInstance(instance.k, instance.n, instance.functions, target)


def negate_function(instance: ForrelationInstance, index: int) -> ForrelationInstance:
    fs = list(instance.functions)
    fs[index] = -fs[index]
    target = None if instance.target is None else -instance.target
    return ForrelationInstance(instance.k, instance.n, tuple(fs), target)


def functions_from_tables(tables: Sequence[Sequence[int]]) -> tuple[BooleanFunction, ...]:
    return tuple(BooleanFunction.from_table(t) for t in tables)
