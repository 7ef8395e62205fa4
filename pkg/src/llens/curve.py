"""Elliptic curves over Q, their reduction data and the Dirichlet coefficients a_n."""

from __future__ import annotations

import math
from collections.abc import Iterable, Mapping
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
import sympy

from llens.errors import (
    BadReductionPrime,
    CurveFileError,
    DomainError,
    OverflowLimit,
    UnsupportedPrime,
)

POINT_COUNT_CEILING = 10**7


class ReductionType(str, Enum):
    GOOD = "good"
    ADDITIVE = "additive"
    SPLIT = "split_multiplicative"
    NONSPLIT = "nonsplit_multiplicative"


# Inverse local factor at a bad prime, written in the variable p^(-s-1/2).
INVERSE_FACTORS = {
    "1": ReductionType.ADDITIVE,
    "1+p^-s-1/2": ReductionType.NONSPLIT,
    "1-p^-s-1/2": ReductionType.SPLIT,
}
_FACTOR_OF = {v: k for k, v in INVERSE_FACTORS.items()}
_BAD_AP = {ReductionType.ADDITIVE: 0, ReductionType.SPLIT: 1, ReductionType.NONSPLIT: -1}


@dataclass(frozen=True)
class BadPrime:
    p: int
    reduction: ReductionType

    def __post_init__(self):
        if self.reduction is ReductionType.GOOD:
            raise CurveFileError(f"p = {self.p} listed as bad with good reduction")

    @property
    def a_p(self) -> int:
        """Dirichlet coefficient a_p, so that the inverse factor is 1 - a_p p^(-s-1/2)."""
        return _BAD_AP[self.reduction]

    @property
    def inverse_factor(self) -> str:
        return _FACTOR_OF[self.reduction]

    @classmethod
    def from_inverse_factor(cls, p: int, form: str) -> BadPrime:
        try:
            return cls(p, INVERSE_FACTORS[form])
        except KeyError:
            raise CurveFileError(f"unknown inverse factor {form!r} at p = {p}") from None


def weierstrass_invariants(ainvs) -> dict[str, int]:
    a1, a2, a3, a4, a6 = ainvs
    b2 = a1 * a1 + 4 * a2
    b4 = 2 * a4 + a1 * a3
    b6 = a3 * a3 + 4 * a6
    b8 = a1 * a1 * a6 + 4 * a2 * a6 - a1 * a3 * a4 + a2 * a3 * a3 - a4 * a4
    c4 = b2 * b2 - 24 * b4
    c6 = -(b2**3) + 36 * b2 * b4 - 216 * b6
    disc = -b2 * b2 * b8 - 8 * b4**3 - 27 * b6 * b6 + 9 * b2 * b4 * b6
    return {"b2": b2, "b4": b4, "b6": b6, "b8": b8, "c4": c4, "c6": c6, "disc": disc}


@dataclass(frozen=True)
class CurveSpec:
    """A Weierstrass model together with the arithmetic data the engine takes as input.

    The model should be minimal at every prime whose a_p is obtained by counting.
    The Sato-Tate prediction only applies to curves without complex multiplication.
    """

    ainvs: tuple[int, int, int, int, int]
    conductor: int
    root_number: int
    bad_primes: tuple[BadPrime, ...]
    label: str | None = None
    invariants: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "ainvs", tuple(int(a) for a in self.ainvs))
        object.__setattr__(self, "bad_primes", tuple(sorted(self.bad_primes, key=lambda b: b.p)))
        if len(self.ainvs) != 5:
            raise CurveFileError("expected five Weierstrass coefficients")
        inv = weierstrass_invariants(self.ainvs)
        object.__setattr__(self, "invariants", inv)
        if inv["disc"] == 0:
            raise CurveFileError("singular Weierstrass model (zero discriminant)")
        if self.root_number not in (1, -1):
            raise CurveFileError("root number must be +1 or -1")
        if self.conductor < 1:
            raise CurveFileError("conductor must be positive")
        listed = [b.p for b in self.bad_primes]
        if len(set(listed)) != len(listed):
            raise CurveFileError("a bad prime is listed twice")
        divisors = sorted(sympy.primefactors(self.conductor))
        if listed != divisors:
            raise CurveFileError(f"bad primes {listed} do not match the primes {divisors} dividing the conductor")

    @property
    def discriminant(self) -> int:
        return self.invariants["disc"]

    @property
    def desk_scale(self) -> bool:
        return self.conductor < 10**9

    def bad_prime(self, p: int) -> BadPrime | None:
        for b in self.bad_primes:
            if b.p == p:
                return b
        return None

    def reduction(self, p: int) -> ReductionType:
        b = self.bad_prime(p)
        return ReductionType.GOOD if b is None else b.reduction


def _count_points(ainvs, p: int) -> int:
    """Projective point count of the reduced model over F_p (point at infinity included)."""
    a1, a2, a3, a4, a6 = ainvs
    if p == 2:
        n = 1
        for x in range(2):
            for y in range(2):
                if (y * y + a1 * x * y + a3 * y - (x**3 + a2 * x * x + a4 * x + a6)) % 2 == 0:
                    n += 1
        return n
    inv = weierstrass_invariants(ainvs)
    # completing the square: (2y + a1 x + a3)^2 = 4x^3 + b2 x^2 + 2 b4 x + b6
    x = np.arange(p, dtype=np.int64)
    x2 = x * x % p
    rhs = (4 * x2 % p * x % p + (inv["b2"] % p) * x2 + (2 * inv["b4"] % p) * x + inv["b6"] % p) % p
    is_square = np.zeros(p, dtype=bool)
    is_square[x2] = True
    return 1 + int(np.count_nonzero(rhs == 0)) + 2 * int(np.count_nonzero(is_square[rhs] & (rhs != 0)))


def count_points_mod_p(curve: CurveSpec, p: int, ceiling: int = POINT_COUNT_CEILING) -> int:
    if curve.conductor % p == 0:
        raise BadReductionPrime(f"p = {p} divides the conductor {curve.conductor}")
    if p > ceiling:
        raise OverflowLimit(f"p = {p} exceeds the point-counting ceiling {ceiling}")
    if curve.discriminant % p == 0:
        raise DomainError(f"the model is not minimal at p = {p}")
    return _count_points(curve.ainvs, p)


def coefficient_ap(curve: CurveSpec, p: int, ceiling: int = POINT_COUNT_CEILING) -> int:
    bad = curve.bad_prime(p)
    if bad is not None:
        return bad.a_p
    return p + 1 - count_points_mod_p(curve, p, ceiling)


def _ap_chunk(ainvs, conductor, primes, bad):
    return [bad[p] if p in bad else p + 1 - _count_points(ainvs, p) for p in primes]


def prime_coefficients(curve: CurveSpec, primes: Iterable[int], workers: int = 1,
                       ceiling: int = POINT_COUNT_CEILING) -> dict[int, int]:
    """a_p for many primes; counting is split across processes when ``workers > 1``."""
    primes = [int(p) for p in primes]
    if primes and max(primes) > ceiling:
        raise OverflowLimit(f"p = {max(primes)} exceeds the point-counting ceiling {ceiling}")
    for p in primes:
        if curve.conductor % p and curve.discriminant % p == 0:
            raise DomainError(f"the model is not minimal at p = {p}")
    bad = {b.p: b.a_p for b in curve.bad_primes}
    if workers <= 1 or len(primes) < 2000:
        values = _ap_chunk(curve.ainvs, curve.conductor, primes, bad)
    else:
        # interleave so every chunk gets a similar share of large primes
        chunks = [primes[i::workers] for i in range(workers)]
        with ProcessPoolExecutor(workers) as pool:
            parts = list(pool.map(_ap_chunk, [curve.ainvs] * workers, [curve.conductor] * workers,
                                  chunks, [bad] * workers))
        lookup = {}
        for chunk, part in zip(chunks, parts):
            lookup.update(zip(chunk, part))
        values = [lookup[p] for p in primes]
    return dict(zip(primes, values))


def primes_up_to(limit: int) -> list[int]:
    return list(sympy.sieve.primerange(2, limit + 1))


@dataclass(frozen=True)
class CoefficientTable:
    """Dirichlet coefficients a_1..a_T; ``values[n]`` is a_n and ``values[0]`` is unused."""

    limit: int
    values: np.ndarray
    provenance: str = "recursed"

    def __post_init__(self):
        if len(self.values) != self.limit + 1:
            raise ValueError("values must hold limit + 1 entries")
        self.values.setflags(write=False)

    def __getitem__(self, n: int) -> int:
        if not 1 <= n <= self.limit:
            raise IndexError(f"a_{n} is outside the table (limit {self.limit})")
        return int(self.values[n])

    def __len__(self) -> int:
        return self.limit

    def as_list(self) -> list[int]:
        return [int(v) for v in self.values]

    def check_invariants(self, curve: CurveSpec | None = None) -> None:
        v = self.values
        if self.limit >= 1 and v[1] != 1:
            raise AssertionError("a_1 must be 1")
        n = np.arange(self.limit + 1)
        if np.any(np.abs(v[1:]) > n[1:]):
            raise AssertionError("|a_n| <= n violated")
        for p in primes_up_to(self.limit):
            if curve is None or curve.conductor % p:
                if v[p] * v[p] >= 4 * p:
                    raise AssertionError(f"Hasse bound violated at p = {p}")


def _prime_power_values(a_p: int, p: int, reduction: ReductionType, kmax: int) -> list[int]:
    vals = [1, a_p]
    for _ in range(2, kmax + 1):
        if reduction is ReductionType.GOOD:
            vals.append(a_p * vals[-1] - p * vals[-2])
        else:
            vals.append(a_p * vals[-1])
    return vals


def extend_coefficients(ap_source: CurveSpec, T: int, ap: Mapping[int, int] | None = None,
                        workers: int = 1) -> CoefficientTable:
    """Build a_1..a_T from the prime coefficients by expanding every local factor.

    ``ap`` may supply some or all a_p (for example from a cache); the rest are counted.
    """
    if T < 1:
        raise DomainError("T must be at least 1")
    curve = ap_source
    primes = primes_up_to(T)
    known = dict(ap or {})
    missing = [p for p in primes if p not in known]
    known.update(prime_coefficients(curve, missing, workers=workers))
    values = np.ones(T + 1, dtype=np.int64)
    values[0] = 0
    for p in primes:
        kmax = 1
        while p ** (kmax + 1) <= T:
            kmax += 1
        pk = _prime_power_values(known[p], p, curve.reduction(p), kmax)
        for k in range(1, kmax + 1):
            q = p**k
            idx = np.arange(q, T + 1, q)
            if k < kmax:
                idx = idx[idx % (q * p) != 0]
            values[idx] *= pk[k]
    provenance = "supplied+recursed" if ap else "counted+recursed"
    return CoefficientTable(T, values, provenance)


def sato_tate_predicted(delta: float) -> float:
    """Sato-Tate mass of a_p >= delta * sqrt(p)."""
    if not 0 < delta < 2:
        raise DomainError("delta must lie in (0, 2)")
    return (-delta * math.sqrt(4 - delta * delta) + 4 * math.acos(delta / 2)) / (4 * math.pi)


def sato_tate_density(curve: CurveSpec, X: int, delta: float, ap: Mapping[int, int] | None = None,
                      workers: int = 1) -> tuple[float, float]:
    """Empirical share of primes p <= X with a_p >= delta sqrt(p), and its prediction."""
    predicted = sato_tate_predicted(delta)
    primes = primes_up_to(X)
    values = dict(ap or {})
    values.update(prime_coefficients(curve, [p for p in primes if p not in values], workers=workers))
    # a_p >= delta sqrt(p) checked without rounding as a_p^2 >= delta^2 p
    d2 = sympy.Rational(delta) ** 2
    hits = sum(1 for p in primes
               if curve.conductor % p and values[p] > 0 and values[p] ** 2 >= d2 * p)
    return hits / len(primes), predicted


def classify_reduction(curve: CurveSpec, p: int) -> ReductionType:
    """Reduction type at p >= 5, assuming the model is minimal at p."""
    if p in (2, 3):
        raise UnsupportedPrime("reduction types at 2 and 3 must be supplied")
    inv = curve.invariants
    if inv["disc"] % p:
        return ReductionType.GOOD
    if inv["c4"] % p == 0:
        return ReductionType.ADDITIVE
    # the node's tangent slopes lie in F_p exactly when -c6 is a square mod p
    if sympy.legendre_symbol(-inv["c6"] % p, p) == 1:
        return ReductionType.SPLIT
    return ReductionType.NONSPLIT
