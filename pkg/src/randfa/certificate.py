"""Sufficient-condition checks for property (FA).

A presentation is *certified* when its relators meet the language of every
large automaton.  The check is one-sided: a presentation that is not
certified may still have (FA).

Two routes decide the hypothesis:

* enumeration over every large b-automaton (feasible only for ``n = 2``);
* a backtracking search for an *avoiding* automaton.  Starting from the
  full automaton, every relator must be broken by deleting either its first
  letter from ``sigma_empty`` or one of its transitions, subject to
  per-state deletion capacities that keep the automaton large.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from .automata import (
    Automaton,
    BAutomaton,
    EAutomaton,
    accepts_any,
    is_lambda_eps_large,
    is_lambda_large,
    large_automata_array,
    size_threshold,
    strict_threshold,
)
from .words import Presentation, Word

FA_LAMBDA = Fraction(1, 3)
# Block endpoint-share constant valid for every n; the cyclic check uses min(EPS0, 1/6).
EPS0 = Fraction(1, 18)
CYCLIC_EPS = min(EPS0, Fraction(1, 6))
CYCLIC_LAMBDA = Fraction(1, 4) + CYCLIC_EPS / 2
CYCLIC_MIN_LENGTH = 3

# Enumeration is used when the automaton state fits in this many bits.
ENUMERATION_BITS = 20
DEFAULT_BUDGET = 200_000


class Status(str, enum.Enum):
    CERTIFIED = "Certified"
    NOT_CERTIFIED = "NotCertified"
    UNKNOWN = "Unknown"


@dataclass(frozen=True)
class Timeout:
    """Returned by the search when its node budget runs out."""

    budget_spent: int


@dataclass(frozen=True)
class CertificateVerdict:
    status: Status
    witness: Automaton | None
    lam: Fraction
    eps: Fraction | None
    method: str
    budget_spent: int

    @property
    def certified(self) -> bool:
        return self.status is Status.CERTIFIED


# -- enumeration route


def check_all_large_intersect(presentation: Presentation, lam: Fraction = FA_LAMBDA) -> bool:
    return _enumerate(presentation, lam)[0]


def _enumerate(presentation: Presentation, lam: Fraction) -> tuple[bool, BAutomaton | None, int]:
    n = presentation.n
    masks = large_automata_array(n, lam)
    hit = np.zeros(len(masks), dtype=bool)
    for r in set(presentation.relators):
        if not r:
            continue
        ok = ((masks[:, 0] >> r[0]) & 1).astype(bool)
        for s, t in zip(r, r[1:]):
            ok &= ((masks[:, 1 + s] >> t) & 1).astype(bool)
        hit |= ok
    if hit.all():
        return True, None, len(masks)
    row = masks[int(np.argmin(hit))]
    witness = BAutomaton(n, int(row[0]), tuple(int(x) for x in row[1:]))
    return False, witness, len(masks)


# -- search route


class _AvoidSearch:
    """Backtracking over deletions with capacities and memoised failures.

    Slots: 0 is ``sigma_empty``; ``1 + s`` is ``sigma[s]``; ``1 + 2n + s``
    is ``tau[s]`` (e-automata only).
    """

    def __init__(self, n: int, relators: Sequence[Word], caps: list[int], final_slots: bool):
        self.n = n
        self.caps = caps
        self.final_slots = final_slots
        m = 2 * n
        options: list[tuple[tuple[int, int], ...]] = []
        for r in dict.fromkeys(tuple(r) for r in relators if r):
            opts = {(0, r[0])}
            for i, (s, t) in enumerate(zip(r, r[1:])):
                last = i == len(r) - 2
                slot = (1 + m + s) if (final_slots and last) else (1 + s)
                opts.add((slot, t))
            options.append(tuple(sorted(opts)))
        self.options = options
        self.breaks: dict[tuple[int, int], frozenset[int]] = {}
        for idx, opts in enumerate(options):
            for o in opts:
                self.breaks[o] = self.breaks.get(o, frozenset()) | {idx}

    def run(self, budget: int):
        n_slots = len(self.caps)
        start_removed = (0,) * n_slots
        start_counts = (0,) * n_slots
        failed: set[tuple[int, ...]] = set()
        spent = 0

        def expand(removed, counts, unbroken):
            # pick the unbroken relator with the fewest available deletions
            best = None
            for idx in unbroken:
                avail = [o for o in self.options[idx] if counts[o[0]] < self.caps[o[0]]]
                if best is None or len(avail) < len(best):
                    best = avail
                    if len(best) <= 1:
                        break
            best.sort(key=lambda o: (-(self.caps[o[0]] - counts[o[0]]), o[1], o[0]))
            return best

        unbroken0 = frozenset(range(len(self.options)))
        if not unbroken0:
            return self._witness(start_removed), 0
        stack = [(start_removed, start_counts, unbroken0, expand(start_removed, start_counts, unbroken0), 0)]
        spent = 1
        while stack:
            removed, counts, unbroken, opts, i = stack[-1]
            if i >= len(opts):
                failed.add(removed)
                stack.pop()
                continue
            stack[-1] = (removed, counts, unbroken, opts, i + 1)
            slot, letter = opts[i]
            child = list(removed)
            child[slot] |= 1 << letter
            child = tuple(child)
            if child in failed:
                continue
            spent += 1
            if spent > budget:
                return Timeout(spent - 1), spent - 1
            child_counts = list(counts)
            child_counts[slot] += 1
            child_counts = tuple(child_counts)
            child_unbroken = unbroken - self.breaks[(slot, letter)]
            if not child_unbroken:
                return self._witness(child), spent
            child_opts = expand(child, child_counts, child_unbroken)
            if not child_opts:
                failed.add(child)
                continue
            stack.append((child, child_counts, child_unbroken, child_opts, 0))
        return None, spent

    def _witness(self, removed: tuple[int, ...]) -> Automaton:
        m = 2 * self.n
        full = (1 << m) - 1
        masks = [full & ~x for x in removed]
        base = BAutomaton(self.n, masks[0], tuple(masks[1 : 1 + m]))
        if self.final_slots:
            return EAutomaton(base, tuple(masks[1 + m :]))
        return base


def _b_caps(n: int, lam: Fraction) -> list[int]:
    m = 2 * n
    return [m - 1] + [max(m - size_threshold(lam, n), 0)] * m


def _e_caps(n: int, lam: Fraction, eps: Fraction) -> list[int]:
    m = 2 * n
    tau_cap = max(m - strict_threshold(Fraction(1, 2) - eps, n), 0)
    return _b_caps(n, lam) + [tau_cap] * m


def _search_b(presentation: Presentation, lam: Fraction, budget: int):
    search = _AvoidSearch(presentation.n, presentation.relators, _b_caps(presentation.n, lam), False)
    return search.run(budget)


def _search_e(presentation: Presentation, lam: Fraction, eps: Fraction, budget: int, min_length: int):
    rels = [r for r in presentation.relators if len(r) >= min_length]
    search = _AvoidSearch(presentation.n, rels, _e_caps(presentation.n, lam, eps), True)
    return search.run(budget)


def find_avoiding_b_automaton(
    presentation: Presentation, lam: Fraction = FA_LAMBDA, budget: int = DEFAULT_BUDGET
) -> BAutomaton | None | Timeout:
    """A lam-large b-automaton rejecting every relator, ``None`` if none exists."""
    return _search_b(presentation, Fraction(lam), budget)[0]


def find_avoiding_e_automaton(
    presentation: Presentation,
    lam: Fraction = CYCLIC_LAMBDA,
    eps: Fraction = CYCLIC_EPS,
    budget: int = DEFAULT_BUDGET,
    min_length: int = CYCLIC_MIN_LENGTH,
) -> EAutomaton | None | Timeout:
    """A (lam, eps)-large e-automaton rejecting every relator of length >= ``min_length``."""
    return _search_e(presentation, Fraction(lam), Fraction(eps), budget, min_length)[0]


def _verdict(result, spent, lam, eps, method) -> CertificateVerdict:
    if isinstance(result, Timeout):
        return CertificateVerdict(Status.UNKNOWN, None, lam, eps, method, spent)
    if result is None:
        return CertificateVerdict(Status.CERTIFIED, None, lam, eps, method, spent)
    return CertificateVerdict(Status.NOT_CERTIFIED, result, lam, eps, method, spent)


def enumeration_feasible(n: int) -> bool:
    return 2 * n * (2 * n + 1) <= ENUMERATION_BITS


def fa_certificate(
    presentation: Presentation, budget: int = DEFAULT_BUDGET, method: str | None = None
) -> CertificateVerdict:
    """Check that the relators meet every 1/3-large b-automaton."""
    lam = FA_LAMBDA
    if method is None:
        method = "enumeration" if enumeration_feasible(presentation.n) else "search"
    if method not in ("enumeration", "search"):
        raise ValueError(f"unknown certificate method {method!r}")
    if method == "enumeration":
        ok, witness, spent = _enumerate(presentation, lam)
        return _verdict(None if ok else witness, spent, lam, None, method)
    result, spent = _search_b(presentation, lam, budget)
    return _verdict(result, spent, lam, None, "search")


def fa_certificate_cyclic(presentation: Presentation, budget: int = DEFAULT_BUDGET) -> CertificateVerdict:
    """Cyclically reduced model: relators of length >= 3 against (5/18, 1/18)-large e-automata."""
    result, spent = _search_e(presentation, CYCLIC_LAMBDA, CYCLIC_EPS, budget, CYCLIC_MIN_LENGTH)
    return _verdict(result, spent, CYCLIC_LAMBDA, CYCLIC_EPS, "search")


def witness_is_valid(verdict: CertificateVerdict, presentation: Presentation, min_length: int = 1) -> bool:
    """Replay a NotCertified witness: large at the stated parameters and rejecting every relator."""
    w = verdict.witness
    if w is None:
        return False
    if isinstance(w, EAutomaton):
        if not is_lambda_eps_large(w, verdict.lam, verdict.eps):
            return False
    elif not is_lambda_large(w, verdict.lam):
        return False
    return not any(accepts_any(w, r) for r in presentation.relators if len(r) >= min_length and r)


# -- epimorphisms onto Z


@dataclass(frozen=True)
class WeightFunction:
    psi: tuple[int, ...] = field(default_factory=tuple)

    def letter_weight(self, letter: int) -> int:
        n = len(self.psi)
        return self.psi[letter] if letter < n else -self.psi[letter - n]

    def positive_letters(self) -> list[int]:
        return [x for x in range(2 * len(self.psi)) if self.letter_weight(x) > 0]

    def zero_letters(self) -> list[int]:
        return [x for x in range(2 * len(self.psi)) if self.letter_weight(x) == 0]

    def word_weight(self, word: Sequence[int]) -> int:
        return sum(self.letter_weight(x) for x in word)


def epimorphism_automaton(n: int, psi: WeightFunction) -> BAutomaton:
    """Start in positive-weight letters, then never take a negative-weight letter."""
    if len(psi.psi) != n:
        raise ValueError(f"weight function has {len(psi.psi)} entries, expected {n}")
    plus = psi.positive_letters()
    if not plus:
        raise ValueError("no letter has positive weight")
    zero = psi.zero_letters()
    return BAutomaton.from_sets(n, plus, [plus + zero] * (2 * n))


def exponent_sum_matrix(presentation: Presentation) -> list[list[int]]:
    n = presentation.n
    rows = []
    for r in presentation.relators:
        row = [0] * n
        for x in r:
            if x < n:
                row[x] += 1
            else:
                row[x - n] -= 1
        rows.append(row)
    return rows


def rational_rank(rows: list[list[int]]) -> int:
    """Rank over Q by Gaussian elimination on exact fractions."""
    mat = [[Fraction(x) for x in row] for row in rows]
    rank = 0
    ncols = len(mat[0]) if mat else 0
    for col in range(ncols):
        pivot = next((i for i in range(rank, len(mat)) if mat[i][col] != 0), None)
        if pivot is None:
            continue
        mat[rank], mat[pivot] = mat[pivot], mat[rank]
        p = mat[rank][col]
        for i in range(rank + 1, len(mat)):
            f = mat[i][col] / p
            if f:
                mat[i] = [a - f * b for a, b in zip(mat[i], mat[rank])]
        rank += 1
    return rank


def abelianization_free_rank(presentation: Presentation) -> int:
    return presentation.n - rational_rank(exponent_sum_matrix(presentation))


def admits_Z_epimorphism(presentation: Presentation) -> bool:
    return abelianization_free_rank(presentation) > 0
