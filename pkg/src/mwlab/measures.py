"""Branch measures and maverick mass.

A measure in the ``alpha`` family weights outcome class k by

    C(n, k) * (p**k * (1-p)**(n-k)) ** alpha

normalized over all classes.  ``alpha = 0`` counts every branch once,
``alpha = 1`` is the Born (norm-squared) weight.  A class is maverick when
its plus-frequency k/n sits further than ``epsilon`` from p.

Exact mode returns Fractions; asymptotic mode works with log-weights and
returns ``LogReal`` masses.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable

import numpy as np
from scipy.special import gammaln, logsumexp

from .branching import BranchEnsemble, QubitPrep, build_ensemble
from .exactnum import (
    LogReal,
    RationalLike,
    as_fraction,
    as_prob,
    format_exact,
    ln_int,
    rational_root,
    to_logreal,
)

EXACT, ASYMPTOTIC = "exact", "asymptotic"
MODES = (EXACT, ASYMPTOTIC)
DEFAULT_EXACT_CAP = 20000
DEFAULT_EPSILON = Fraction(1, 10)


class ExactCapError(ValueError):
    """Exact mode was asked for an n above the configured cap."""


@dataclass(frozen=True)
class MeasureSpec:
    alpha: Fraction

    def __post_init__(self):
        alpha = as_fraction(self.alpha)
        if alpha < 0:
            raise ValueError(f"alpha must be non-negative, got {format_exact(alpha)}")
        object.__setattr__(self, "alpha", alpha)

    @classmethod
    def counting(cls) -> "MeasureSpec":
        return cls(Fraction(0))

    @classmethod
    def born(cls) -> "MeasureSpec":
        return cls(Fraction(1))


@dataclass(frozen=True)
class MaverickRule:
    epsilon: Fraction = DEFAULT_EPSILON
    comparison: str = "strict"

    def __post_init__(self):
        eps = as_fraction(self.epsilon)
        if not 0 < eps < 1:
            raise ValueError(f"epsilon must lie in (0, 1), got {format_exact(eps)}")
        if self.comparison not in ("strict", "inclusive"):
            raise ValueError(f"comparison must be 'strict' or 'inclusive', got {self.comparison!r}")
        object.__setattr__(self, "epsilon", eps)

    def is_maverick(self, k: int, n: int, p: Fraction) -> bool:
        dev = abs(Fraction(k, n) - p)
        return dev > self.epsilon if self.comparison == "strict" else dev >= self.epsilon

    def cut_points(self, n: int, p: Fraction) -> tuple[int, int]:
        """(low, high): class k is maverick iff k <= low or k >= high."""
        below, above = n * (p - self.epsilon), n * (p + self.epsilon)
        if self.comparison == "strict":
            return math.ceil(below) - 1, math.floor(above) + 1
        return math.floor(below), math.ceil(above)

    def maverick_mask(self, n: int, p: Fraction) -> np.ndarray:
        low, high = self.cut_points(n, p)
        k = np.arange(n + 1)
        return (k <= low) | (k >= high)


@dataclass(frozen=True)
class MaverickReport:
    n: int
    p: Fraction
    epsilon: Fraction
    alpha: Fraction
    mode: str
    maverick_mass: Fraction | LogReal
    nonmaverick_mass: Fraction | LogReal

    @property
    def ln_maverick_mass(self) -> LogReal:
        m = self.maverick_mass
        return m if isinstance(m, LogReal) else to_logreal(m)

    def maverick_float(self) -> float:
        m = self.maverick_mass
        return m.to_float() if isinstance(m, LogReal) else float(m)


def _class_factors(p: Fraction, alpha: Fraction) -> tuple[int, int] | None:
    """Integers (A, C) with p**alpha : (1-p)**alpha = A : C, when both are rational."""
    q = 1 - p
    if alpha == 0:
        return 1, 1
    num, den = alpha.numerator, alpha.denominator
    u = rational_root(p, den)
    v = rational_root(q, den)
    if u is None or v is None:
        return None
    u, v = u**num, v**num
    lcd = u.denominator * v.denominator // math.gcd(u.denominator, v.denominator)
    return int(u * lcd), int(v * lcd)


def class_weights_exact(n: int, p: Fraction, alpha: Fraction) -> tuple[list[int], int]:
    """Unnormalized integer class weights and their total ``(A + C)**n``."""
    factors = _class_factors(p, alpha)
    if factors is None:
        raise ValueError(
            f"p**alpha is irrational for p={format_exact(p)}, alpha={format_exact(alpha)}; use asymptotic mode"
        )
    A, C = factors
    weights = [0] * (n + 1)
    # C(n,k) A^k C^(n-k) by the ratio recurrence along k
    term = C**n
    weights[0] = term
    for k in range(1, n + 1):
        if C == 0:
            term = A**n if k == n else 0
        else:
            term = term * (n - k + 1) * A // (k * C)
        weights[k] = term
    return weights, (A + C) ** n


def measure_mass(
    ensemble: BranchEnsemble,
    spec: MeasureSpec,
    rule: MaverickRule,
    mode: str = EXACT,
    exact_cap: int = DEFAULT_EXACT_CAP,
) -> MaverickReport:
    n, p = ensemble.n, ensemble.p
    if mode == EXACT:
        if n > exact_cap:
            raise ExactCapError(
                f"exact mode refuses n={n} above the cap {exact_cap}; rerun with --mode asymptotic"
            )
        if spec.alpha == 1:
            # Born weights are already on the ensemble
            weights, total = list(ensemble.born_numerators), ensemble.born_denominator
        else:
            weights, total = class_weights_exact(n, p, spec.alpha)
        mask = rule.maverick_mask(n, p)
        mav = sum(w for w, m in zip(weights, mask) if m)
        non = sum(w for w, m in zip(weights, mask) if not m)
        return MaverickReport(n, p, rule.epsilon, spec.alpha, EXACT, Fraction(mav, total), Fraction(non, total))
    if mode == ASYMPTOTIC:
        return _measure_mass_log(n, p, spec.alpha, rule)
    raise ValueError(f"unknown mode {mode!r}")


def log_class_weights(n: int, p: Fraction, alpha: Fraction) -> np.ndarray:
    """ln of unnormalized class weights, float64."""
    k = np.arange(n + 1, dtype=np.float64)
    logw = gammaln(n + 1.0) - gammaln(k + 1.0) - gammaln(n - k + 1.0)
    a = float(alpha)
    if a == 0:
        return logw
    with np.errstate(divide="ignore", invalid="ignore"):
        lp = math.log(p) if p > 0 else -np.inf
        lq = math.log(1 - p) if p < 1 else -np.inf
        plus = np.where(k > 0, a * k * lp, 0.0)
        minus = np.where(n - k > 0, a * (n - k) * lq, 0.0)
    return logw + plus + minus


def _measure_mass_log(n: int, p: Fraction, alpha: Fraction, rule: MaverickRule) -> MaverickReport:
    logw = log_class_weights(n, p, alpha)
    mask = rule.maverick_mask(n, p)
    total = logsumexp(logw)

    def part(sel: np.ndarray) -> LogReal:
        vals = logw[sel]
        if vals.size == 0 or np.all(np.isneginf(vals)):
            return LogReal.zero()
        return LogReal.from_ln(float(logsumexp(vals) - total))

    return MaverickReport(n, p, rule.epsilon, alpha, ASYMPTOTIC, part(mask), part(~mask))


def hoeffding_bound(n: int, epsilon: RationalLike) -> LogReal:
    """``2 exp(-2 n eps**2)`` in log space."""
    eps = as_fraction(epsilon)
    if eps <= 0:
        raise ValueError("epsilon must be positive")
    if n < 1:
        raise ValueError("n must be positive")
    return LogReal.from_ln(math.log(2) - 2 * n * float(eps) ** 2)


def binary_entropy(a: float) -> float:
    """H2(a) in bits."""
    if a in (0, 1):
        return 0.0
    return -a * math.log2(a) - (1 - a) * math.log2(1 - a)


def counting_rate(a: RationalLike | float) -> float:
    """``H2(a) - 1``: exponent (bits per spin) of the counting mass of {k/n >= a}."""
    x = float(as_fraction(a)) if not isinstance(a, float) else a
    if not 0.5 < x < 1:
        raise ValueError(f"counting_rate needs 1/2 < a < 1, got {a}")
    return binary_entropy(x) - 1


def born_rate(a: RationalLike | float, p: RationalLike | float) -> float:
    """KL(a || p) in nats: decay rate of the Born mass near frequency a."""
    x = float(as_fraction(a)) if not isinstance(a, float) else a
    q = float(as_fraction(p)) if not isinstance(p, float) else p
    if not (0 < x < 1 and 0 < q < 1):
        raise ValueError(f"born_rate needs 0 < a, p < 1, got a={a}, p={p}")
    return x * math.log(x / q) + (1 - x) * math.log((1 - x) / (1 - q))


def counting_tail_exact(n: int, a: RationalLike) -> Fraction:
    """Exact counting mass of {k/n >= a}."""
    a = as_fraction(a)
    k0 = math.ceil(a * n)
    return Fraction(sum(math.comb(n, k) for k in range(max(k0, 0), n + 1)), 2**n)


def counting_rate_empirical(n: int, a: RationalLike) -> float:
    """``(1/n) log2`` of the exact counting tail; tends to ``counting_rate(a)``."""
    tail = counting_tail_exact(n, a)
    return (ln_int(tail.numerator) - ln_int(tail.denominator)) / (n * math.log(2))


def born_rate_empirical(n: int, a: RationalLike, p: RationalLike) -> float:
    """``-(1/n) ln`` of the exact Born weight of the class nearest ``a*n``."""
    a, p = as_fraction(a), as_prob(p)
    k = round(a * n)
    ens = build_ensemble(n, QubitPrep(p))
    w = ens.born_weight(k)
    return -(ln_int(w.numerator) - ln_int(w.denominator)) / n


@dataclass(frozen=True)
class SweepRow:
    """One sweep cell; ``report`` is None when the cell failed."""

    n: int
    alpha: Fraction
    p: Fraction
    epsilon: Fraction
    mode: str
    report: MaverickReport | None
    hoeffding: LogReal | None
    error: str | None = None


def _sweep_cell(args) -> SweepRow:
    n, alpha, p, rule, mode, exact_cap = args
    try:
        report = measure_mass(build_ensemble(n, QubitPrep(p)), MeasureSpec(alpha), rule, mode, exact_cap)
        return SweepRow(n, alpha, p, rule.epsilon, mode, report, hoeffding_bound(n, rule.epsilon))
    except (ValueError, ArithmeticError) as exc:
        return SweepRow(n, alpha, p, rule.epsilon, mode, None, None, str(exc))


def sweep(
    n_values: Iterable[int],
    p: RationalLike,
    epsilon: RationalLike,
    alphas: Iterable[RationalLike],
    mode: str = EXACT,
    comparison: str = "strict",
    exact_cap: int = DEFAULT_EXACT_CAP,
    jobs: int = 1,
) -> list[SweepRow]:
    """Maverick reports for every (n, alpha); rows sorted by n then alpha.

    A failing cell comes back as a row with ``error`` set instead of
    aborting the sweep.
    """
    p = as_prob(p)
    rule = MaverickRule(as_fraction(epsilon), comparison)
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}")
    cells = sorted({(int(n), as_fraction(a)) for n in n_values for a in alphas})
    args = [(n, a, p, rule, mode, exact_cap) for n, a in cells]
    if jobs > 1 and len(args) > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(_sweep_cell, args))
    else:
        rows = [_sweep_cell(a) for a in args]
    return rows
