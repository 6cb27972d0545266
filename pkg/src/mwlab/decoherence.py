"""Pointer-state overlap for a product environment.

The apparatus records an outcome in ``n_env`` independent degrees of
freedom.  Each one overlaps its counterpart on the other branch by
``gamma``, so the two pointer states overlap by ``gamma**n_env``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

from .exactnum import LogReal, RationalLike, as_fraction, format_exact, ln_fraction, pow_exact

DECOHERENCE_COLUMNS = ("n_env", "gamma", "overlap", "visibility_ln", "rate")


@dataclass(frozen=True)
class PointerModel:
    n_env: int
    gamma: Fraction | float

    def __post_init__(self):
        if self.n_env < 1:
            raise ValueError(f"n_env must be a positive integer, got {self.n_env}")
        g = self.gamma if isinstance(self.gamma, float) else as_fraction(self.gamma)
        if not 0 <= g <= 1:
            raise ValueError(f"gamma must lie in [0, 1], got {self.gamma}")
        object.__setattr__(self, "gamma", g)

    @property
    def exact(self) -> bool:
        return isinstance(self.gamma, Fraction)

    def ln_gamma(self) -> float:
        if self.gamma == 0:
            return float("-inf")
        return ln_fraction(self.gamma) if self.exact else math.log(self.gamma)


def pointer_overlap(model: PointerModel, log: bool = False) -> Fraction | LogReal:
    """``gamma**n_env``; exact for rational gamma unless ``log`` is set."""
    if not log:
        if not model.exact:
            raise ValueError("exact overlap needs a rational gamma")
        return pow_exact(model.gamma, model.n_env)
    if model.gamma == 0:
        return LogReal.zero()
    return LogReal.from_ln(model.n_env * model.ln_gamma())


def interference_visibility(c_plus_mag2: RationalLike, model: PointerModel) -> LogReal:
    """Off-diagonal ``|c+| |c-| gamma**N`` of the reduced state, in log scale."""
    x = as_fraction(c_plus_mag2)
    if not 0 <= x <= 1:
        raise ValueError(f"probability out of range: {format_exact(x)}")
    if x in (0, 1) or model.gamma == 0:
        return LogReal.zero()
    return LogReal.from_ln(0.5 * ln_fraction(x) + 0.5 * ln_fraction(1 - x) + model.n_env * model.ln_gamma())


def decoherence_rate(model: PointerModel) -> float:
    """``-ln gamma``, so that the overlap is ``exp(-rate * n_env)``."""
    if model.gamma in (0, 1):
        raise ValueError(f"decoherence rate is degenerate at gamma = {model.gamma}: needs 0 < gamma < 1")
    return -model.ln_gamma()


def env_size_for_overlap(target: float, rate: float) -> float:
    """Degrees of freedom needed to push the overlap down to ``target``."""
    if not 0 < target < 1 or rate <= 0:
        raise ValueError("need 0 < target < 1 and a positive rate")
    return -math.log(target) / rate
