"""Numeric tower: exact rationals, log-space reals, root-of-unity phases.

Probabilities are plain :class:`fractions.Fraction` values (aliased as
``ExactProb``).  ``LogReal`` carries a sign and a natural-log magnitude for
regimes where exact rationals get too large.  ``PhaseRoot`` is an exact
root of unity ``exp(2*pi*i*k/L)``.  ``ExactScalar`` is a finite sum of terms
``coef * sqrt(radicand) * phase`` and is what inner products between
amplitude-and-phase states evaluate to.
"""
from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Union

ExactProb = Fraction
RationalLike = Union[Fraction, int, str]

LN_ZERO = float("-inf")


def binomial(n: int, k: int) -> int:
    """C(n, k), with 0 outside 0 <= k <= n."""
    if n < 0:
        raise ValueError(f"binomial: n must be non-negative, got {n}")
    if k < 0 or k > n:
        return 0
    return math.comb(n, k)


def as_fraction(value: RationalLike) -> Fraction:
    """Parse ``"num/den"``, an int, or a Fraction.  Floats are rejected."""
    if isinstance(value, bool):
        raise TypeError("booleans are not rationals")
    if isinstance(value, Fraction):
        return value
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, str):
        text = value.strip()
        if "." in text or "e" in text.lower():
            raise ValueError(f"malformed rational {value!r}: use num/den")
        try:
            return Fraction(text)
        except (ValueError, ZeroDivisionError):
            raise ValueError(f"malformed rational {value!r}") from None
    raise TypeError(f"cannot interpret {value!r} as an exact rational")


def as_prob(value: RationalLike) -> Fraction:
    p = as_fraction(value)
    if not 0 <= p <= 1:
        raise ValueError(f"probability out of range: {format_exact(p)}")
    return p


def format_exact(x: Fraction) -> str:
    """Serialize as ``num/den`` (always with a denominator)."""
    x = Fraction(x)
    return f"{x.numerator}/{x.denominator}"


def pow_exact(p: Fraction, e: int) -> Fraction:
    """Exact ``p**e``; ``pow_exact(0, 0) == 1`` (empty product)."""
    if e < 0:
        raise ValueError("pow_exact takes a non-negative exponent")
    if e == 0:
        return Fraction(1)
    return Fraction(p) ** e


def ln_int(n: int) -> float:
    """Natural log of a positive integer of any size."""
    if n <= 0:
        raise ValueError("ln_int needs a positive integer")
    # math.log handles big ints without converting through float
    return math.log(n)


def ln_fraction(x: Fraction) -> float:
    if x <= 0:
        raise ValueError("ln_fraction needs a positive value")
    return ln_int(x.numerator) - ln_int(x.denominator)


def format_fixed(x: float, sig: int = 12) -> str:
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "-inf" if x < 0 else "inf"
    if x == 0:
        return "0." + "0" * (sig - 1)
    exponent = math.floor(math.log10(abs(x)))
    decimals = max(0, sig - 1 - exponent)
    out = f"{x:.{decimals}f}"
    return "0." + "0" * (sig - 1) if float(out) == 0 else out


@dataclass(frozen=True)
class LogReal:
    """A real number stored as ``sign * exp(ln_magnitude)``."""

    sign: int
    ln_magnitude: float

    def __post_init__(self):
        if self.sign not in (-1, 0, 1):
            raise ValueError(f"sign must be -1, 0 or +1, got {self.sign}")
        if self.sign == 0 and self.ln_magnitude != LN_ZERO:
            object.__setattr__(self, "ln_magnitude", LN_ZERO)

    @classmethod
    def zero(cls) -> "LogReal":
        return cls(0, LN_ZERO)

    @classmethod
    def from_ln(cls, ln_magnitude: float) -> "LogReal":
        if ln_magnitude == LN_ZERO:
            return cls.zero()
        return cls(1, float(ln_magnitude))

    def is_zero(self) -> bool:
        return self.sign == 0

    def __mul__(self, other: "LogReal") -> "LogReal":
        if self.sign == 0 or other.sign == 0:
            return LogReal.zero()
        return LogReal(self.sign * other.sign, self.ln_magnitude + other.ln_magnitude)

    def __truediv__(self, other: "LogReal") -> "LogReal":
        if other.sign == 0:
            raise ZeroDivisionError("division by a zero LogReal")
        if self.sign == 0:
            return LogReal.zero()
        return LogReal(self.sign * other.sign, self.ln_magnitude - other.ln_magnitude)

    def to_float(self) -> float:
        """Linear-scale value; underflows to 0.0 for very negative logs."""
        if self.sign == 0:
            return 0.0
        return self.sign * math.exp(self.ln_magnitude)

    def log2(self) -> float:
        return self.ln_magnitude / math.log(2)

    def format(self, sig: int = 12) -> str:
        """ln-magnitude as a fixed-notation decimal (non-negative values only)."""
        if self.sign < 0:
            raise ValueError("only non-negative LogReals have a text form")
        return format_fixed(self.ln_magnitude, sig)


def to_logreal(p: Fraction) -> LogReal:
    p = Fraction(p)
    if p == 0:
        return LogReal.zero()
    sign = 1 if p > 0 else -1
    return LogReal(sign, ln_fraction(abs(p)))


@dataclass(frozen=True)
class PhaseRoot:
    """The root of unity ``exp(2*pi*i*k/L)``, stored in lowest terms."""

    k: int
    L: int = 1

    def __post_init__(self):
        if self.L <= 0:
            raise ValueError("PhaseRoot needs a positive L")
        k = self.k % self.L
        g = math.gcd(k, self.L)
        object.__setattr__(self, "k", k // g)
        object.__setattr__(self, "L", self.L // g)

    @classmethod
    def one(cls) -> "PhaseRoot":
        return cls(0, 1)

    @property
    def turns(self) -> Fraction:
        return Fraction(self.k, self.L)

    def __mul__(self, other: "PhaseRoot") -> "PhaseRoot":
        lcm = self.L * other.L // math.gcd(self.L, other.L)
        return PhaseRoot(self.k * (lcm // self.L) + other.k * (lcm // other.L), lcm)

    def inverse(self) -> "PhaseRoot":
        return PhaseRoot(-self.k, self.L)

    def conjugate(self) -> "PhaseRoot":
        return self.inverse()

    def __truediv__(self, other: "PhaseRoot") -> "PhaseRoot":
        return self * other.inverse()

    def __pow__(self, e: int) -> "PhaseRoot":
        return PhaseRoot(self.k * e, self.L)

    def to_complex(self) -> complex:
        return cmath.exp(2j * math.pi * self.k / self.L)

    def __str__(self) -> str:
        return f"{self.k}/{self.L}"

    @classmethod
    def parse(cls, text: str) -> "PhaseRoot":
        k, _, L = text.partition("/")
        return cls(int(k), int(L or 1))


# ---------------------------------------------------------------------------
# exact scalars: sums of coef * sqrt(radicand) * phase


def _is_square_int(n: int) -> bool:
    return n >= 0 and math.isqrt(n) ** 2 == n


def rational_sqrt(x: Fraction) -> Fraction | None:
    """Exact square root of a non-negative rational, or None if irrational."""
    x = Fraction(x)
    if x < 0:
        return None
    num, den = x.numerator, x.denominator
    if _is_square_int(num) and _is_square_int(den):
        return Fraction(math.isqrt(num), math.isqrt(den))
    return None


def rational_root(x: Fraction, q: int) -> Fraction | None:
    """Exact ``x**(1/q)`` for non-negative rational x, or None."""
    x = Fraction(x)
    if x < 0 or q <= 0:
        return None
    out = []
    for part in (x.numerator, x.denominator):
        r = _int_root(part, q)
        if r is None:
            return None
        out.append(r)
    return Fraction(out[0], out[1])


def _int_root(n: int, q: int) -> int | None:
    if n in (0, 1) or q == 1:
        return n
    lo, hi = 0, 1 << (n.bit_length() // q + 1)
    while lo < hi:
        mid = (lo + hi) // 2
        if mid**q < n:
            lo = mid + 1
        else:
            hi = mid
    return lo if lo**q == n else None


_cyclotomic_cache: dict[int, list[int]] = {}


def _poly_divexact(a: list[int], b: list[int]) -> list[int]:
    # coefficient lists, lowest degree first; b monic
    a = list(a)
    out = [0] * (len(a) - len(b) + 1)
    for i in range(len(out) - 1, -1, -1):
        c = a[i + len(b) - 1]
        out[i] = c
        if c:
            for j, bj in enumerate(b):
                a[i + j] -= c * bj
    return out


def cyclotomic(n: int) -> list[int]:
    """Coefficients (lowest degree first) of the n-th cyclotomic polynomial."""
    if n not in _cyclotomic_cache:
        poly = [-1] + [0] * (n - 1) + [1]
        for d in range(1, n):
            if n % d == 0:
                poly = _poly_divexact(poly, cyclotomic(d))
        _cyclotomic_cache[n] = poly
    return _cyclotomic_cache[n]


def _reduce_mod_cyclotomic(coeffs: dict[int, Fraction], L: int) -> tuple[Fraction, ...]:
    phi = cyclotomic(L)
    deg = len(phi) - 1
    work = [Fraction(0)] * max(L, deg)
    for j, c in coeffs.items():
        work[j] += c
    for i in range(len(work) - 1, deg - 1, -1):
        c = work[i]
        if c:
            for j, pj in enumerate(phi):
                work[i - deg + j] -= c * pj
    return tuple(work[:deg])


@dataclass(frozen=True)
class ExactScalar:
    """Finite sum of ``coef * sqrt(radicand) * phase`` terms.

    Equality is decided by grouping radicands into rational square classes
    and reducing each class's phases modulo the cyclotomic polynomial of the
    common order.  This is sound: equal canonical forms imply equal values.
    It can miss identities that mix square classes with cyclotomic units
    (``sqrt(2) = z8 + z8**7``); such states never arise from the rational
    probabilities and root-of-unity phases used here.
    """

    terms: tuple[tuple[Fraction, Fraction, PhaseRoot], ...] = ()

    @classmethod
    def of(cls, terms: Iterable[tuple[Fraction, Fraction, PhaseRoot]]) -> "ExactScalar":
        return cls(tuple((Fraction(c), Fraction(r), ph) for c, r, ph in terms if c and r))

    @classmethod
    def rational(cls, x: RationalLike) -> "ExactScalar":
        return cls.of([(as_fraction(x), Fraction(1), PhaseRoot.one())])

    def __add__(self, other: "ExactScalar") -> "ExactScalar":
        return ExactScalar(self.terms + other.terms)

    def __neg__(self) -> "ExactScalar":
        return ExactScalar(tuple((-c, r, ph) for c, r, ph in self.terms))

    def __sub__(self, other: "ExactScalar") -> "ExactScalar":
        return self + (-other)

    def canonical(self) -> list[tuple[Fraction, int, tuple[Fraction, ...]]]:
        """Per square class: (representative radicand, order L, coefficient vector)."""
        classes: list[tuple[Fraction, list[tuple[Fraction, PhaseRoot]]]] = []
        for coef, rad, ph in self.terms:
            for rep, members in classes:
                ratio_root = rational_sqrt(rad / rep)
                if ratio_root is not None:
                    members.append((coef * ratio_root, ph))
                    break
            else:
                classes.append((rad, [(coef, ph)]))
        out = []
        for rep, members in classes:
            L = 1
            for _, ph in members:
                L = L * ph.L // math.gcd(L, ph.L)
            coeffs: dict[int, Fraction] = {}
            for c, ph in members:
                j = ph.k * (L // ph.L)
                coeffs[j] = coeffs.get(j, Fraction(0)) + c
            vec = _reduce_mod_cyclotomic(coeffs, L)
            if any(vec):
                out.append((rep, L, vec))
        return out

    def is_zero(self) -> bool:
        return not self.canonical()

    def __eq__(self, other: object) -> bool:
        if isinstance(other, (int, Fraction)):
            other = ExactScalar.rational(other)
        if not isinstance(other, ExactScalar):
            return NotImplemented
        return (self - other).is_zero()

    __hash__ = None  # type: ignore[assignment]

    def to_complex(self) -> complex:
        return sum(
            (float(c) * math.sqrt(float(r)) * ph.to_complex() for c, r, ph in self.terms),
            0j,
        )

    def __repr__(self) -> str:
        z = self.to_complex()
        return f"ExactScalar(~{z.real:.6g}{z.imag:+.6g}j, {len(self.terms)} terms)"
