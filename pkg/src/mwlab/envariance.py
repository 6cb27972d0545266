"""Envariance: swap symmetry of entangled states and the Born rule.

For a Schmidt state ``sum_i a_i |i>_S |e_i>_E`` a system swap of outcomes
i and j can be undone by a counter-swap acting on the environment alone
exactly when ``|a_i| = |a_j|``; phases are absorbed by the counter-swap's
phase adjustment.  Outcomes related this way must get equal probability,
so a d-term equal-amplitude state assigns 1/d to each.  Unequal rational
weights ``m_i/n`` are reduced to that case by splitting outcome i into
``m_i`` environment cells of weight ``1/n``.

Conventions:

* ``apply_swap`` is the plain system permutation ``|i><j| + |j><i|``.
* ``apply_counter_swap`` is ``w|e_i><e_j| + w^-1|e_j><e_i|`` on the
  environment, with ``w = pair.phase_adjust``.  Both are involutions;
  ``SwapPair.inverse()`` names the same operator with the indices reversed
  and the phase inverted.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass, replace
from fractions import Fraction
from typing import Iterable

from .branching import MINUS, PLUS, JointState, QubitPrep, measure_one
from .exactnum import PhaseRoot, RationalLike, as_prob, format_exact


class EnvarianceError(ValueError):
    pass


class NotEqualAmplitudeError(EnvarianceError):
    pass


@dataclass(frozen=True)
class SchmidtTerm:
    sys_index: int
    env_index: int
    mag2: Fraction
    phase: PhaseRoot = PhaseRoot.one()


@dataclass(frozen=True)
class SchmidtState:
    """Perfectly correlated system/environment state, terms sorted by system index."""

    terms: tuple[SchmidtTerm, ...]

    def __post_init__(self):
        terms = tuple(sorted(self.terms, key=lambda t: t.sys_index))
        if not terms:
            raise EnvarianceError("a Schmidt state needs at least one term")
        sys_ids = [t.sys_index for t in terms]
        env_ids = [t.env_index for t in terms]
        if len(set(sys_ids)) != len(sys_ids):
            raise EnvarianceError("system indices must be distinct")
        if len(set(env_ids)) != len(env_ids):
            raise EnvarianceError("environment indices must be distinct")
        if any(t.mag2 <= 0 for t in terms):
            raise EnvarianceError("Schmidt terms need positive weight")
        total = sum((t.mag2 for t in terms), Fraction(0))
        if total != 1:
            raise EnvarianceError(f"weights sum to {format_exact(total)}, not 1")
        object.__setattr__(self, "terms", terms)

    @classmethod
    def of(cls, weights: Iterable[RationalLike], phases: Iterable[PhaseRoot] | None = None) -> "SchmidtState":
        """Terms i -> (i, i, w_i, phase_i)."""
        weights = [Fraction(w) for w in weights]
        phases = list(phases) if phases is not None else [PhaseRoot.one()] * len(weights)
        return cls(tuple(SchmidtTerm(i, i, w, ph) for i, (w, ph) in enumerate(zip(weights, phases))))

    def term(self, sys_index: int) -> SchmidtTerm:
        for t in self.terms:
            if t.sys_index == sys_index:
                return t
        raise EnvarianceError(f"unknown system index {sys_index}")

    def term_by_env(self, env_index: int) -> SchmidtTerm:
        for t in self.terms:
            if t.env_index == env_index:
                return t
        raise EnvarianceError(f"unknown environment index {env_index}")

    @property
    def d(self) -> int:
        return len(self.terms)

    def key(self) -> tuple:
        return tuple((t.sys_index, t.env_index, t.mag2, t.phase) for t in self.terms)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, SchmidtState):
            return NotImplemented
        return self.key() == other.key()

    def __hash__(self) -> int:
        return hash(self.key())


@dataclass(frozen=True)
class SwapPair:
    i: int
    j: int
    phase_adjust: PhaseRoot = PhaseRoot.one()
    env_i: int | None = None
    env_j: int | None = None

    def __post_init__(self):
        if self.i == self.j:
            raise EnvarianceError(f"a swap needs two distinct indices, got ({self.i}, {self.j})")

    @classmethod
    def for_state(cls, state: SchmidtState, i: int, j: int) -> "SwapPair":
        """The pair whose counter-swap compensates the phases of terms i and j."""
        ti, tj = state.term(i), state.term(j)
        return cls(i, j, ti.phase / tj.phase, ti.env_index, tj.env_index)

    def resolve(self, state: SchmidtState) -> "SwapPair":
        """Fill in environment partners of i and j from ``state``."""
        if self.env_i is not None and self.env_j is not None:
            return self
        return replace(self, env_i=state.term(self.i).env_index, env_j=state.term(self.j).env_index)

    def inverse(self) -> "SwapPair":
        return SwapPair(self.j, self.i, self.phase_adjust.inverse(), self.env_j, self.env_i)


def apply_swap(state: SchmidtState, pair: SwapPair) -> SchmidtState:
    """Exchange system labels i and j."""
    state.term(pair.i), state.term(pair.j)
    swap = {pair.i: pair.j, pair.j: pair.i}
    return SchmidtState(
        tuple(replace(t, sys_index=swap.get(t.sys_index, t.sys_index)) for t in state.terms)
    )


def apply_counter_swap(state: SchmidtState, pair: SwapPair) -> SchmidtState:
    """Exchange environment labels ``env_i``/``env_j`` with the phase adjustment.

    Unresolved partners are looked up in ``state`` itself.
    """
    pair = pair.resolve(state)
    state.term_by_env(pair.env_i), state.term_by_env(pair.env_j)
    w = pair.phase_adjust
    out = []
    for t in state.terms:
        if t.env_index == pair.env_j:
            out.append(replace(t, env_index=pair.env_i, phase=t.phase * w))
        elif t.env_index == pair.env_i:
            out.append(replace(t, env_index=pair.env_j, phase=t.phase * w.inverse()))
        else:
            out.append(t)
    return SchmidtState(tuple(out))


def global_phase_between(a: SchmidtState, b: SchmidtState) -> tuple[PhaseRoot | None, list[str]]:
    """Common phase g with ``b = g * a``, plus a list of mismatches."""
    mismatches = []
    phase: PhaseRoot | None = None
    for ta, tb in zip(a.terms, b.terms):
        if (ta.sys_index, ta.env_index) != (tb.sys_index, tb.env_index):
            mismatches.append(f"term {ta.sys_index}: labels ({ta.sys_index},{ta.env_index}) vs ({tb.sys_index},{tb.env_index})")
            continue
        if ta.mag2 != tb.mag2:
            mismatches.append(
                f"term {ta.sys_index}: mag2 {format_exact(ta.mag2)} vs {format_exact(tb.mag2)}"
            )
            continue
        ratio = tb.phase / ta.phase
        if phase is None:
            phase = ratio
        elif ratio != phase:
            mismatches.append(f"term {ta.sys_index}: relative phase {ratio} vs {phase}")
    if a.d != b.d:
        mismatches.append(f"term count {a.d} vs {b.d}")
    return (phase if not mismatches else None), mismatches


@dataclass(frozen=True)
class SwapCertificate:
    i: int
    j: int
    phase_adjust: PhaseRoot
    envariant: bool
    global_phase: PhaseRoot | None
    mismatches: tuple[str, ...] = ()

    def __bool__(self) -> bool:
        return self.envariant

    def line(self) -> str:
        g = str(self.global_phase) if self.global_phase is not None else "-"
        return f"swap {self.i} {self.j} adjust={self.phase_adjust} envariant={'yes' if self.envariant else 'no'} global={g}"


def is_envariant(state: SchmidtState, pair: SwapPair) -> SwapCertificate:
    """Swap then counter-swap; envariant when the state comes back up to a global phase."""
    pair = pair.resolve(state)
    after = apply_counter_swap(apply_swap(state, pair), pair)
    g, mismatches = global_phase_between(state, after)
    return SwapCertificate(pair.i, pair.j, pair.phase_adjust, g is not None, g, tuple(mismatches))


_SWAP_LINE = re.compile(
    r"^swap (?P<i>-?\d+) (?P<j>-?\d+) adjust=(?P<adj>-?\d+/\d+) envariant=(?P<ok>yes|no) global=(?P<g>-|-?\d+/\d+)$"
)


def verify_swap_line(state: SchmidtState, line: str) -> bool:
    """Re-check a certificate line against ``state`` by closed form.

    After swap and counter-swap, term i carries ``(m_j, phi_j + w)`` and
    term j carries ``(m_i, phi_i - w)``; other terms are untouched.
    """
    m = _SWAP_LINE.match(line.strip())
    if not m:
        raise ValueError(f"not a swap certificate line: {line!r}")
    i, j = int(m["i"]), int(m["j"])
    w = PhaseRoot.parse(m["adj"])
    ti, tj = state.term(i), state.term(j)
    g_i = tj.phase * w / ti.phase
    g_j = ti.phase / w / tj.phase
    ok = ti.mag2 == tj.mag2 and g_i == g_j and (state.d == 2 or g_i == PhaseRoot.one())
    if (m["ok"] == "yes") != ok:
        return False
    return not ok or m["g"] == str(g_i)


@dataclass(frozen=True)
class EqualAmplitudeResult:
    probabilities: tuple[Fraction, ...]
    certificates: tuple[SwapCertificate, ...]


def equal_amplitude_probabilities(state: SchmidtState) -> EqualAmplitudeResult:
    """Uniform probabilities, each adjacent equality backed by a swap certificate."""
    w0 = state.terms[0].mag2
    if any(t.mag2 != w0 for t in state.terms):
        raise NotEqualAmplitudeError("not equal-amplitude: use fine_grain first")
    certs = []
    for a, b in zip(state.terms, state.terms[1:]):
        cert = is_envariant(state, SwapPair.for_state(state, a.sys_index, b.sys_index))
        if not cert:
            raise EnvarianceError(f"swap {a.sys_index}<->{b.sys_index} is not envariant: {cert.mismatches}")
        certs.append(cert)
    # p_i = p_j along the chain and sum p = 1
    return EqualAmplitudeResult(tuple(Fraction(1, state.d) for _ in state.terms), tuple(certs))


def fine_grain(state: SchmidtState, denominator: int | None = None) -> tuple[SchmidtState, dict[int, int]]:
    """Split outcome i into ``mag2_i * n`` equal cells, n the least common denominator.

    Returns the cell state and a map cell -> original system index.  Any
    multiple of the least common denominator may be passed instead.
    """
    lcd = 1
    for t in state.terms:
        if t.mag2.denominator == 0:
            raise EnvarianceError("zero denominator")
        lcd = lcd * t.mag2.denominator // math.gcd(lcd, t.mag2.denominator)
    n = denominator if denominator is not None else lcd
    if n <= 0 or n % lcd:
        raise EnvarianceError(f"{n} is not a multiple of the common denominator {lcd}")
    cells, owner = [], {}
    for t in state.terms:
        for _ in range(int(t.mag2 * n)):
            c = len(cells)
            cells.append(SchmidtTerm(c, c, Fraction(1, n), t.phase))
            owner[c] = t.sys_index
    return SchmidtState(tuple(cells)), owner


@dataclass(frozen=True)
class BornDerivation:
    coarse: SchmidtState
    cells: SchmidtState
    owner: dict[int, int]
    result: EqualAmplitudeResult
    probabilities: dict[int, Fraction]

    def certificate_lines(self, outcome_names: dict[int, str] | None = None, final: str | None = None) -> list[str]:
        names = outcome_names or {}
        lines = [c.line() for c in self.result.certificates]
        for cell, p in zip(sorted(self.owner), self.result.probabilities):
            o = self.owner[cell]
            lines.append(f"cell {cell} -> outcome {names.get(o, o)} p={format_exact(p)}")
        if final is None:
            final = "(" + ", ".join(format_exact(p) for p in self.probabilities.values()) + ")"
        lines.append(final)
        return lines


def derive_born(state: SchmidtState, denominator: int | None = None) -> BornDerivation:
    cells, owner = fine_grain(state, denominator)
    result = equal_amplitude_probabilities(cells)
    probs = {t.sys_index: Fraction(0) for t in state.terms}
    for cell, p in zip(sorted(owner), result.probabilities):
        probs[owner[cell]] += p
    return BornDerivation(state, cells, owner, result, probs)


def schmidt_from_joint(state: JointState) -> tuple[SchmidtState, dict[int, str]]:
    """Read a post-measurement state as system (spins) times environment (records)."""
    terms, names = [], {}
    for (label, record), amp in state.amplitudes.items():
        s = int("".join("0" if b == PLUS else "1" for b in label) or "0", 2)
        e = int("".join("0" if b == PLUS else "1" for b in record) or "0", 2)
        terms.append(SchmidtTerm(s, e, amp.mag2, amp.phase))
        names[s] = "".join(label)
    return SchmidtState(tuple(terms)), names


def spin_born_derivation(p_plus: RationalLike) -> tuple[tuple[Fraction, Fraction], list[str]]:
    """Measure one spin, fine-grain, and read off (P(+), P(-)) with a certificate."""
    p = as_prob(p_plus)
    joint = measure_one(JointState.ready(), QubitPrep(p))
    schmidt, names = schmidt_from_joint(joint)
    deriv = derive_born(schmidt)
    by_name = {names[s]: prob for s, prob in deriv.probabilities.items()}
    pair = (by_name.get(PLUS, Fraction(0)), by_name.get(MINUS, Fraction(0)))
    final = f"({format_exact(pair[0])}, {format_exact(pair[1])})"
    lines = [f"# envariance certificate p={format_exact(p)} cells={deriv.cells.d}"]
    lines += deriv.certificate_lines(names, final)
    return pair, lines
