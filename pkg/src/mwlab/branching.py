"""Measurement as entanglement.

A spin prepared as ``c+|+> + c-|->`` meets a ready apparatus and the pair
evolves to ``c+|+, M+> + c-|-, M->``.  Repeating this for N identically
prepared spins gives 2**N branches, one per outcome string; the observer
record on each branch is the outcome string itself.

Everything here is exact: squared magnitudes are Fractions and phases are
roots of unity.  ``build_ensemble`` aggregates branches by plus-count so the
N+1 outcome classes can be handled for large N; ``enumerate_branches`` is
the brute-force counterpart used as an oracle.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import cached_property
from fractions import Fraction
from typing import Iterator, Mapping

from .exactnum import (
    ExactScalar,
    PhaseRoot,
    RationalLike,
    as_fraction,
    binomial,
    format_exact,
)

PLUS, MINUS = "+", "-"

Label = tuple[str, ...]


class NotInImageError(ValueError):
    """The state is not the image of one branching step."""


@dataclass(frozen=True)
class QubitPrep:
    """``c+|+> + c-|->`` with ``|c+|^2 = p_plus``; ``|c-|^2`` is derived."""

    p_plus: Fraction
    phase_plus: PhaseRoot = PhaseRoot.one()
    phase_minus: PhaseRoot = PhaseRoot.one()

    def __post_init__(self):
        p = as_fraction(self.p_plus)
        if not 0 <= p <= 1:
            raise ValueError(f"probability out of range: p_plus = {format_exact(p)}")
        object.__setattr__(self, "p_plus", p)

    @classmethod
    def of(cls, p_plus: RationalLike) -> "QubitPrep":
        return cls(as_fraction(p_plus))

    @property
    def p_minus(self) -> Fraction:
        return 1 - self.p_plus

    def outcomes(self) -> list[tuple[str, Fraction, PhaseRoot]]:
        """Outcomes with non-zero amplitude."""
        out = []
        if self.p_plus:
            out.append((PLUS, self.p_plus, self.phase_plus))
        if self.p_minus:
            out.append((MINUS, self.p_minus, self.phase_minus))
        return out


@dataclass(frozen=True)
class Amplitude:
    mag2: Fraction
    phase: PhaseRoot = PhaseRoot.one()

    def __mul__(self, other: "Amplitude") -> "Amplitude":
        return Amplitude(self.mag2 * other.mag2, self.phase * other.phase)


@dataclass(frozen=True)
class JointState:
    """Sparse system-plus-observer state.

    Keys are ``(branch_label, observer_record)`` pairs of outcome tuples;
    zero amplitudes are dropped.  ``history`` lists the preps applied by
    ``measure_one`` so the last step can be undone exactly.
    """

    amplitudes: Mapping[tuple[Label, Label], Amplitude]
    history: tuple[QubitPrep, ...] = ()

    def __post_init__(self):
        amps = {key: a for key, a in self.amplitudes.items() if a.mag2 != 0}
        if any(a.mag2 < 0 for a in amps.values()):
            raise ValueError("squared magnitudes must be non-negative")
        total = sum((a.mag2 for a in amps.values()), Fraction(0))
        if total != 1:
            raise ValueError(f"state not normalized: squared magnitudes sum to {format_exact(total)}")
        lengths = {len(label) for label, _ in amps}
        if len(lengths) > 1:
            raise ValueError("branch labels must share one length")
        labels = [label for label, _ in amps]
        if len(set(labels)) != len(labels):
            raise ValueError("at most one observer record per branch label")
        object.__setattr__(self, "amplitudes", dict(sorted(amps.items())))

    @classmethod
    def ready(cls) -> "JointState":
        """No spins measured yet: one branch, empty record."""
        return cls({((), ()): Amplitude(Fraction(1))})

    @classmethod
    def from_labels(cls, amplitudes: Mapping[Label, Amplitude]) -> "JointState":
        """Each branch carries its own label as the observer record."""
        return cls({(label, label): a for label, a in amplitudes.items()})

    @property
    def n_spins(self) -> int:
        return len(next(iter(self.amplitudes))[0])

    def is_ready(self) -> bool:
        return all(label == record for label, record in self.amplitudes)

    def weights(self) -> dict[Label, Fraction]:
        return {label: a.mag2 for (label, _), a in self.amplitudes.items()}

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, JointState):
            return NotImplemented
        return self.amplitudes == other.amplitudes

    __hash__ = None  # type: ignore[assignment]


def measure_one(state: JointState, prep: QubitPrep) -> JointState:
    """Bring one more spin in ``prep`` to the apparatus and record it."""
    if not isinstance(prep, QubitPrep):
        raise TypeError("prep must be a QubitPrep")
    if not state.is_ready():
        raise ValueError("observer records are not ready for a new spin")
    out: dict[tuple[Label, Label], Amplitude] = {}
    for (label, record), amp in state.amplitudes.items():
        for s, mag2, phase in prep.outcomes():
            out[(label + (s,), record + (s,))] = amp * Amplitude(mag2, phase)
    return JointState(out, state.history + (prep,))


def _infer_prep(state: JointState) -> QubitPrep:
    """Recover a prep from the marginal of the last spin and one reference branch."""
    p_plus = sum((a.mag2 for (label, _), a in state.amplitudes.items() if label[-1] == PLUS), Fraction(0))
    phases: dict[str, PhaseRoot] = {}
    # fix the gauge on the first parent that shows each outcome
    parents: dict[Label, dict[str, Amplitude]] = {}
    for (label, _), a in state.amplitudes.items():
        parents.setdefault(label[:-1], {})[label[-1]] = a
    for children in parents.values():
        if len(children) == 2:
            phases[PLUS] = PhaseRoot.one()
            phases[MINUS] = children[MINUS].phase / children[PLUS].phase
            break
    return QubitPrep(p_plus, phases.get(PLUS, PhaseRoot.one()), phases.get(MINUS, PhaseRoot.one()))


def unmeasure(state: JointState, prep: QubitPrep | None = None) -> JointState:
    """Exact inverse of the last ``measure_one`` step.

    ``prep`` defaults to the last entry of the state's history; for a state
    with no history it is inferred from the amplitudes.  Raises
    ``NotInImageError`` when the amplitude pattern is not what one branching
    step with a single prep would produce.
    """
    if state.n_spins == 0:
        raise NotInImageError("not in image: no measured spin to undo")
    if not state.is_ready():
        raise NotInImageError("not in image: observer records disagree with branch labels")
    if prep is None:
        prep = state.history[-1] if state.history else _infer_prep(state)
    factors = {s: Amplitude(m, ph) for s, m, ph in prep.outcomes()}

    parents: dict[tuple[Label, Label], Amplitude] = {}
    seen: dict[tuple[Label, Label], set[str]] = {}
    for (label, record), amp in state.amplitudes.items():
        s = label[-1]
        if s not in factors:
            raise NotInImageError(f"not in image: branch {''.join(label)} has no amplitude under the prep")
        f = factors[s]
        parent = Amplitude(amp.mag2 / f.mag2, amp.phase / f.phase)
        key = (label[:-1], record[:-1])
        if key in parents and parents[key] != parent:
            raise NotInImageError(
                f"not in image: children of {''.join(label[:-1]) or 'root'} disagree on the parent amplitude"
            )
        parents[key] = parent
        seen.setdefault(key, set()).add(s)
    for key, outs in seen.items():
        if outs != set(factors):
            raise NotInImageError(f"not in image: branch {''.join(key[0]) or 'root'} is missing a child")
    history = state.history[:-1] if state.history else ()
    try:
        return JointState(parents, history)
    except ValueError as exc:
        raise NotInImageError(f"not in image: {exc}") from None


def inner_product(s1: JointState, s2: JointState) -> ExactScalar:
    """``<s1|s2>`` as an exact scalar."""
    if s1.n_spins != s2.n_spins:
        raise ValueError(f"dimension mismatch: {s1.n_spins} vs {s2.n_spins} spins")
    terms = []
    for key, a in s1.amplitudes.items():
        b = s2.amplitudes.get(key)
        if b is not None:
            terms.append((Fraction(1), a.mag2 * b.mag2, b.phase / a.phase))
    return ExactScalar.of(terms)


def inner_product_preserved(
    s1: JointState, s2: JointState, prep: QubitPrep
) -> tuple[ExactScalar, ExactScalar]:
    """Inner product before and after one branching step."""
    before = inner_product(s1, s2)
    after = inner_product(measure_one(s1, prep), measure_one(s2, prep))
    return before, after


# ---------------------------------------------------------------------------
# N-spin ensembles


@dataclass(frozen=True)
class OutcomeClass:
    k: int
    count: int
    born_weight: Fraction


@dataclass(frozen=True)
class BranchEnsemble:
    """The 2**n branches of n identical spins, grouped by plus-count.

    Class data is computed on first access, so an ensemble used only in
    log space never builds big integers.  Born weights share the
    denominator ``b**n`` where ``p_plus = a/b``; ``born_numerators[k]`` is
    ``C(n,k) * a**k * (b-a)**(n-k)``.
    """

    n: int
    prep: QubitPrep

    def __post_init__(self):
        if isinstance(self.n, bool) or not isinstance(self.n, int) or self.n < 1:
            raise ValueError(f"n must be a positive integer, got {self.n!r}")

    @property
    def p(self) -> Fraction:
        return self.prep.p_plus

    @cached_property
    def counts(self) -> tuple[int, ...]:
        return tuple(binomial(self.n, k) for k in range(self.n + 1))

    @cached_property
    def born_denominator(self) -> int:
        return self.p.denominator**self.n

    @cached_property
    def born_numerators(self) -> tuple[int, ...]:
        n, a = self.n, self.p.numerator
        c = self.p.denominator - a
        # a**k * c**(n-k) from running powers at both ends
        apow = [1] * (n + 1)
        cpow = [1] * (n + 1)
        for k in range(1, n + 1):
            apow[k] = apow[k - 1] * a
            cpow[k] = cpow[k - 1] * c
        return tuple(self.counts[k] * apow[k] * cpow[n - k] for k in range(n + 1))

    def born_weight(self, k: int) -> Fraction:
        return Fraction(self.born_numerators[k], self.born_denominator)

    @cached_property
    def _born_weights(self) -> tuple[Fraction, ...]:
        return tuple(self.born_weight(k) for k in range(self.n + 1))

    def born_weights(self) -> tuple[Fraction, ...]:
        return self._born_weights

    @property
    def classes(self) -> list[OutcomeClass]:
        return [OutcomeClass(k, self.counts[k], self.born_weight(k)) for k in range(self.n + 1)]

    def to_rows(self) -> list[dict[str, str]]:
        return [
            {"k": str(k), "count": str(self.counts[k]), "born_weight": format_exact(self.born_weight(k))}
            for k in range(self.n + 1)
        ]


ENSEMBLE_COLUMNS = ("k", "count", "born_weight")


def build_ensemble(n: int, prep: QubitPrep | RationalLike) -> BranchEnsemble:
    if not isinstance(prep, QubitPrep):
        prep = QubitPrep.of(prep)
    return BranchEnsemble(n, prep)


def enumerate_branches(n: int, p_plus: RationalLike) -> Iterator[tuple[Label, Fraction]]:
    """Every outcome string with its Born weight, by direct product."""
    p = as_fraction(p_plus)
    q = 1 - p
    for bits in itertools.product((PLUS, MINUS), repeat=n):
        w = Fraction(1)
        for s in bits:
            w *= p if s == PLUS else q
        yield bits, w
