"""Free products ``A * B`` of free groups and the automata built from a splitting.

Only the trivial amalgam ``C = {1}`` is modelled, so "equal modulo C" is plain
equality of syllables and reduced forms are computable.

Factor elements are tuples of signed generator indices (``k`` for the k-th
generator, ``-k`` for its inverse).  A :class:`SyllableWord` is an
alternating tuple of ``(factor, element)`` syllables with ``factor`` in
``{"A", "B"}``.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Sequence

from .automata import BAutomaton, EAutomaton, iter_language, mask_of
from .words import Alphabet

Syllable = tuple[str, tuple[int, ...]]


def _reduce_factor(word: Iterable[int]) -> tuple[int, ...]:
    out: list[int] = []
    for x in word:
        if out and out[-1] == -x:
            out.pop()
        else:
            out.append(x)
    return tuple(out)


def _invert_factor(word: tuple[int, ...]) -> tuple[int, ...]:
    return tuple(-x for x in reversed(word))


@dataclass(frozen=True)
class SyllableWord:
    syllables: tuple[Syllable, ...] = ()

    def __post_init__(self):
        for i, (f, w) in enumerate(self.syllables):
            if f not in ("A", "B"):
                raise ValueError(f"unknown factor {f!r}")
            if not w:
                raise ValueError("identity syllable in reduced form")
            if _reduce_factor(w) != w:
                raise ValueError(f"syllable {w} is not freely reduced")
            if i and self.syllables[i - 1][0] == f:
                raise ValueError("adjacent syllables from the same factor")

    @classmethod
    def of(cls, *syllables: Syllable) -> "SyllableWord":
        return normal_form([cls((s,)) for s in syllables if s[1]])

    def inverse(self) -> "SyllableWord":
        return SyllableWord(tuple((f, _invert_factor(w)) for f, w in reversed(self.syllables)))

    def __mul__(self, other: "SyllableWord") -> "SyllableWord":
        return normal_form([self, other])

    def is_identity(self) -> bool:
        return not self.syllables

    @property
    def first(self) -> Syllable | None:
        return self.syllables[0] if self.syllables else None

    @property
    def last(self) -> Syllable | None:
        return self.syllables[-1] if self.syllables else None

    def flatten(self) -> tuple[tuple[str, int], ...]:
        return tuple((f, x) for f, w in self.syllables for x in w)

    def __str__(self) -> str:
        return format_syllables(self) or "1"


IDENTITY = SyllableWord()


def normal_form(parts: Sequence[SyllableWord]) -> SyllableWord:
    """Reduced form of a product: merge same-factor neighbours, drop identities."""
    stack: list[Syllable] = []
    for part in parts:
        for f, w in part.syllables:
            if stack and stack[-1][0] == f:
                merged = _reduce_factor(stack[-1][1] + w)
                stack.pop()
                if merged:
                    stack.append((f, merged))
            elif w:
                stack.append((f, w))
    return SyllableWord(tuple(stack))


def length(g: SyllableWord) -> int:
    """Number of terms in the reduced form; the identity counts as one term."""
    return max(len(g.syllables), 1)


def is_identity(g: SyllableWord) -> bool:
    return g.is_identity()


def inverse_syllable(s: Syllable) -> Syllable:
    return (s[0], _invert_factor(s[1]))


# -- text format for factor elements: "a b a^-1", "a1^2 b2"

_TOKEN = re.compile(r"^([ab])(\d*)(?:\^(-?\d+))?$")


def parse_syllables(text: str, rank_a: int = 1, rank_b: int = 1) -> SyllableWord:
    parts = []
    for tok in text.split():
        if tok == "1":
            continue
        m = _TOKEN.match(tok)
        if not m:
            raise ValueError(f"bad syllable token {tok!r}")
        factor = m.group(1).upper()
        idx = int(m.group(2) or 1)
        rank = rank_a if factor == "A" else rank_b
        if not 1 <= idx <= rank:
            raise ValueError(f"generator {tok!r} outside factor {factor} of rank {rank}")
        exp = int(m.group(3) or 1)
        if exp:
            gen = idx if exp > 0 else -idx
            parts.append(SyllableWord(((factor, (gen,) * abs(exp)),)))
    return normal_form(parts)


def _format_factor(f: str, w: tuple[int, ...], rank: int) -> list[str]:
    out = []
    i = 0
    while i < len(w):
        j = i
        while j < len(w) and w[j] == w[i]:
            j += 1
        gen = f.lower() + (str(abs(w[i])) if rank > 1 else "")
        exp = (j - i) * (1 if w[i] > 0 else -1)
        out.append(gen if exp == 1 else f"{gen}^{exp}")
        i = j
    return out


def format_syllables(g: SyllableWord, rank_a: int = 1, rank_b: int = 1) -> str:
    toks = []
    for f, w in g.syllables:
        toks.extend(_format_factor(f, w, rank_a if f == "A" else rank_b))
    return " ".join(toks)


# -- splitting assignments


@dataclass(frozen=True)
class Classification:
    alpha: int
    beta: int
    gamma: int
    delta: int
    classes: tuple[str, ...]  # per generator: "A", "B", "C" or "D"


@dataclass(frozen=True)
class SplittingAssignment:
    n: int
    rank_a: int
    rank_b: int
    images: tuple[SyllableWord, ...]

    def __post_init__(self):
        if len(self.images) != self.n:
            raise ValueError("need one image per generator")

    def image(self, letter: int) -> SyllableWord:
        if letter < self.n:
            return self.images[letter]
        return self.images[letter - self.n].inverse()

    def image_of_word(self, word: Sequence[int]) -> SyllableWord:
        return normal_form([self.image(x) for x in word])

    def total_length(self) -> int:
        return sum(length(g) for g in self.images)

    def to_json(self) -> dict:
        a = Alphabet(self.n)
        return {
            "n": self.n,
            "rankA": self.rank_a,
            "rankB": self.rank_b,
            "images": {
                a.format_letter(i): format_syllables(g, self.rank_a, self.rank_b) or "1"
                for i, g in enumerate(self.images)
            },
        }

    @classmethod
    def from_json(cls, data: dict) -> "SplittingAssignment":
        n = int(data["n"])
        ra, rb = int(data.get("rankA", 1)), int(data.get("rankB", 1))
        a = Alphabet(n)
        images: list[SyllableWord | None] = [None] * n
        for key, text in data["images"].items():
            images[a.parse_letter(key)] = parse_syllables(text, ra, rb)
        if any(g is None for g in images):
            raise ValueError("every generator needs an image")
        return cls(n, ra, rb, tuple(images))

    @classmethod
    def from_strings(cls, images: Sequence[str], rank_a: int = 1, rank_b: int = 1):
        return cls(len(images), rank_a, rank_b, tuple(parse_syllables(t, rank_a, rank_b) for t in images))


def load_assignment(path: str | Path) -> SplittingAssignment:
    return SplittingAssignment.from_json(json.loads(Path(path).read_text()))


def classify_image(g: SyllableWord) -> str:
    if g.is_identity():
        return "C"
    if len(g.syllables) == 1:
        return g.syllables[0][0]
    return "D"


def classify(assignment: SplittingAssignment) -> Classification:
    classes = tuple(classify_image(g) for g in assignment.images)
    return Classification(
        classes.count("A"), classes.count("B"), classes.count("C"), classes.count("D"), classes
    )


def _class_letters(assignment: SplittingAssignment, cls: Classification, kind: str) -> list[int]:
    """Letters of ``S^±`` whose generator lies in the given class."""
    n = assignment.n
    gens = [i for i, c in enumerate(cls.classes) if c == kind]
    return sorted(gens + [i + n for i in gens])


def conjugate_assignment(assignment: SplittingAssignment, g: SyllableWord) -> SplittingAssignment:
    """Replace every image ``x`` by the reduced form of ``g^-1 x g``."""
    gi = g.inverse()
    images = tuple(normal_form([gi, x, g]) for x in assignment.images)
    return SplittingAssignment(assignment.n, assignment.rank_a, assignment.rank_b, images)


def _first_syllables(assignment: SplittingAssignment) -> list[Syllable]:
    seen: dict[Syllable, None] = {}
    for x in range(2 * assignment.n):
        f = assignment.image(x).first
        if f is not None:
            seen.setdefault(f, None)
    return sorted(seen)


def minimize_by_conjugation(assignment: SplittingAssignment) -> SplittingAssignment:
    """Greedy descent of total length under conjugation by single syllables.

    Candidates are the first syllables of the images of ``S^±``; the move with
    the largest strict decrease is applied until none remains.
    """
    current = assignment
    total = current.total_length()
    while True:
        best = None
        for syl in _first_syllables(current):
            trial = conjugate_assignment(current, SyllableWord((syl,)))
            t = trial.total_length()
            if t < total and (best is None or t < best[0]):
                best = (t, trial)
        if best is None:
            return current
        total, current = best


def first_syllable_tally(assignment: SplittingAssignment) -> dict[Syllable, int]:
    """How many letters of ``D^±`` have each first syllable."""
    cls = classify(assignment)
    tally: dict[Syllable, int] = {}
    for x in _class_letters(assignment, cls, "D"):
        f = assignment.image(x).first
        tally[f] = tally.get(f, 0) + 1
    return tally


def check_minimality_bound(assignment: SplittingAssignment) -> bool:
    """At most ``beta + delta`` letters of ``D^±`` share an A-side first syllable,
    at most ``alpha + delta`` a B-side one."""
    cls = classify(assignment)
    for (factor, _), count in first_syllable_tally(assignment).items():
        bound = cls.beta + cls.delta if factor == "A" else cls.alpha + cls.delta
        if count > bound:
            return False
    return True


def reduction_largeness(assignment: SplittingAssignment) -> tuple[Fraction, Fraction]:
    cls = classify(assignment)
    n = assignment.n
    return Fraction(cls.alpha + cls.gamma, n), Fraction(cls.beta + cls.gamma, n)


def build_reduction_automata(assignment: SplittingAssignment) -> list[BAutomaton]:
    """``n`` automata for the A side then ``n`` for the B side.

    The automaton for generator ``s'`` starts with ``s'`` and afterwards
    reads only letters whose image lies in that factor.
    """
    cls = classify(assignment)
    n = assignment.n
    out = []
    for kind in ("A", "B"):
        inside = _class_letters(assignment, cls, kind) + _class_letters(assignment, cls, "C")
        for s in range(n):
            out.append(BAutomaton.from_sets(n, [s], [inside] * (2 * n)))
    return out


def main_largeness(assignment: SplittingAssignment) -> Fraction:
    cls = classify(assignment)
    return Fraction(min(cls.delta + cls.beta, cls.delta + cls.alpha), 2 * assignment.n)


def build_main_automaton(assignment: SplittingAssignment) -> BAutomaton:
    """The automaton whose words have images of syllable length at least their length."""
    cls = classify(assignment)
    n = assignment.n
    a_pm = _class_letters(assignment, cls, "A")
    b_pm = _class_letters(assignment, cls, "B")
    d_pm = _class_letters(assignment, cls, "D")
    everything = list(range(2 * n))

    def d_not_beginning_with(syl: Syllable) -> list[int]:
        return [x for x in d_pm if assignment.image(x).first != syl]

    sigma = []
    for s in range(2 * n):
        g = assignment.image(s)
        kind = classify_image(g)
        if kind == "C":
            sigma.append(everything)
            continue
        last = g.last
        other = b_pm if last[0] == "A" else a_pm
        sigma.append(other + d_not_beginning_with(inverse_syllable(last)))
    return BAutomaton.from_sets(n, a_pm + b_pm + d_pm, sigma)


def build_main_e_automaton(assignment: SplittingAssignment) -> EAutomaton:
    base = build_main_automaton(assignment)
    cls = classify(assignment)
    extra = mask_of(
        _class_letters(assignment, cls, "A")
        + _class_letters(assignment, cls, "B")
        + _class_letters(assignment, cls, "C")
    )
    return EAutomaton(base, tuple(m | extra for m in base.sigma))


@dataclass(frozen=True)
class ClaimFailure:
    word: tuple[int, ...]
    image: SyllableWord
    reason: str


def claim_failures(assignment: SplittingAssignment, L_max: int) -> list[ClaimFailure]:
    """Accepted words whose image is too short or ends with the wrong syllable."""
    automaton = build_main_automaton(assignment)
    failures = []
    for L in range(1, L_max + 1):
        for w in iter_language(automaton, L):
            img = assignment.image_of_word(w)
            if img.is_identity() or len(img.syllables) < L:
                failures.append(ClaimFailure(w, img, "length"))
            elif img.last != assignment.image(w[-1]).last:
                failures.append(ClaimFailure(w, img, "last syllable"))
    return failures


def verify_claim(assignment: SplittingAssignment, L_max: int) -> bool:
    return not claim_failures(assignment, L_max)


def kernel_words(automaton, assignment: SplittingAssignment, L_max: int, min_length: int = 1):
    """Words of the language (lengths ``min_length..L_max``) mapping to the identity."""
    out = []
    for L in range(min_length, L_max + 1):
        for w in iter_language(automaton, L):
            if assignment.image_of_word(w).is_identity():
                out.append(w)
    return out


def random_assignment(n: int, rng, rank_a: int = 1, rank_b: int = 1, max_syllables: int = 3,
                      max_power: int = 2, identity_rate: float = 0.1) -> SplittingAssignment:
    """Random images built from a few random syllables (test-input generation)."""
    images = []
    for _ in range(n):
        if rng.random() < identity_rate:
            images.append(IDENTITY)
            continue
        k = int(rng.integers(1, max_syllables + 1))
        factor = "A" if rng.random() < 0.5 else "B"
        parts = []
        for _ in range(k):
            rank = rank_a if factor == "A" else rank_b
            gen = int(rng.integers(1, rank + 1))
            power = int(rng.integers(1, max_power + 1)) * (1 if rng.random() < 0.5 else -1)
            parts.append(SyllableWord(((factor, (gen if power > 0 else -gen,) * abs(power)),)))
            factor = "B" if factor == "A" else "A"
        images.append(normal_form(parts))
    return SplittingAssignment(n, rank_a, rank_b, tuple(images))


def single_syllable_conjugators(assignment: SplittingAssignment) -> list[SyllableWord]:
    return [SyllableWord((s,)) for s in _first_syllables(assignment)]

