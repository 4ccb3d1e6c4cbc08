"""Re-reading words over ``S`` as words over the block alphabet of length-B reduced words.

Block letters follow the same involution convention as :mod:`randfa.words`:
indices ``0 .. n_hat-1`` are the positively oriented blocks (those that are
lexicographically smaller than their inverse) in lexicographic order, and
``i + n_hat`` is the inverse block of ``i``.  An automaton over the block
alphabet is therefore an ordinary automaton with ``n = n_hat``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np

from .automata import (
    Automaton,
    BAutomaton,
    EAutomaton,
    count_words,
    letters_of,
    popcount,
    promote_to_e,
)
from .words import Alphabet, Presentation, Word, free_reduce, is_reduced, iter_reduced

# Refuse to tabulate block alphabets with more letters than this.
MAX_BLOCK_LETTERS = 200_000

MODES = ("any", "reduced", "cyclically_reduced")


class BlockError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class BlockAlphabet:
    n: int
    B: int
    n_hat: int = field(init=False)
    words: tuple[Word, ...] = field(init=False, repr=False)

    def __post_init__(self):
        if self.n < 2 or self.B < 2:
            raise BlockError("need n >= 2 and B >= 2")
        n_hat = self.n * (2 * self.n - 1) ** (self.B - 1)
        if 2 * n_hat > MAX_BLOCK_LETTERS:
            raise BlockError(f"block alphabet with {2 * n_hat} letters exceeds the table budget")
        alpha = Alphabet(self.n)
        positive = []
        for w in iter_reduced(self.n, self.B):
            if w < alpha.inverse_word(w):
                positive.append(w)
        assert len(positive) == n_hat
        table = tuple(positive) + tuple(alpha.inverse_word(w) for w in positive)
        object.__setattr__(self, "n_hat", n_hat)
        object.__setattr__(self, "words", table)

    def __eq__(self, other):
        return isinstance(other, BlockAlphabet) and (self.n, self.B) == (other.n, other.B)

    def __hash__(self):
        return hash((self.n, self.B))

    @property
    def size(self) -> int:
        return 2 * self.n_hat

    @cached_property
    def index(self) -> dict[Word, int]:
        return {w: i for i, w in enumerate(self.words)}

    @cached_property
    def first_letter(self) -> tuple[int, ...]:
        return tuple(w[0] for w in self.words)

    @cached_property
    def last_letter(self) -> tuple[int, ...]:
        return tuple(w[-1] for w in self.words)

    @cached_property
    def starting_with(self) -> tuple[int, ...]:
        """Per S-letter ``s``: mask of blocks whose first letter is ``s``."""
        masks = [0] * (2 * self.n)
        for i, f in enumerate(self.first_letter):
            masks[f] |= 1 << i
        return tuple(masks)

    @cached_property
    def ending_with(self) -> tuple[int, ...]:
        masks = [0] * (2 * self.n)
        for i, f in enumerate(self.last_letter):
            masks[f] |= 1 << i
        return tuple(masks)

    def inverse_letter(self, i: int) -> int:
        return (i + self.n_hat) % (2 * self.n_hat)

    def format_letter(self, i: int) -> str:
        return "[" + Alphabet(self.n).format_word(self.words[i]) + "]"

    def parse_letter(self, token: str) -> int:
        token = token.strip()
        if not (token.startswith("[") and token.endswith("]")):
            raise BlockError(f"block letters are written in brackets, got {token!r}")
        w = Alphabet(self.n).parse_word(token[1:-1])
        try:
            return self.index[w]
        except KeyError:
            raise BlockError(f"{token} is not a reduced word of length {self.B}") from None

    def format_word(self, word: Iterable[int]) -> str:
        return "".join(self.format_letter(x) for x in word)

    def parse_word(self, text: str) -> Word:
        tokens = text.replace("]", "] ").split()
        return tuple(self.parse_letter(t) for t in tokens)


def build_block_alphabet(n: int, B: int) -> BlockAlphabet:
    return BlockAlphabet(n, B)


def parse_block_relators(n_hat: int, lines: Sequence[str]) -> list[Word]:
    """Parse bracketed relator lines, recovering ``n`` and ``B`` from ``n_hat``."""
    ba = infer_block_alphabet(n_hat, lines[0])
    return [ba.parse_word(ln) for ln in lines]


def infer_block_alphabet(n_hat: int, sample: str) -> BlockAlphabet:
    """The block alphabet of size ``n_hat`` whose letters look like the first token of ``sample``."""
    first = sample.replace("]", "] ").split()[0]
    B = len(first.strip("[]"))
    n = next((k for k in range(2, 27) if k * (2 * k - 1) ** (B - 1) == n_hat), None)
    if n is None:
        raise BlockError(f"n={n_hat} is not a block alphabet size for B={B}")
    return BlockAlphabet(n, B)


# -- associated words and presentations


def associate_word(word: Sequence[int], ba: BlockAlphabet) -> Word:
    if len(word) % ba.B:
        raise BlockError(f"word length {len(word)} is not divisible by B={ba.B}")
    out = []
    for i in range(0, len(word), ba.B):
        block = tuple(word[i : i + ba.B])
        if block not in ba.index:
            raise BlockError(f"block {block} at offset {i} is not reduced")
        out.append(ba.index[block])
    return tuple(out)


def deblock(word: Sequence[int], ba: BlockAlphabet) -> Word:
    return tuple(x for i in word for x in ba.words[i])


@dataclass(frozen=True)
class Pairing:
    first: int
    second: int
    v: Word


@dataclass(frozen=True)
class BlockEncodedPresentation:
    source: Presentation
    block_alphabet: BlockAlphabet
    P: int
    relators_hat: tuple[Word, ...]
    pairing_log: tuple[Pairing, ...] = ()

    @property
    def presentation(self) -> Presentation:
        return Presentation(self.block_alphabet.n_hat, self.relators_hat)

    def freely_reduced(self) -> tuple[Word, ...]:
        return tuple(free_reduce(r, self.block_alphabet.n_hat) for r in self.relators_hat)

    def to_text(self) -> str:
        ba = self.block_alphabet
        lines = [f"n {ba.n_hat}"] + [ba.format_word(r) for r in self.relators_hat]
        return "\n".join(lines) + "\n"

    def pairing_text(self) -> str:
        a = Alphabet(self.block_alphabet.n)
        rows = ["r1,r2,v"] + [f"{p.first},{p.second},{a.format_word(p.v)}" for p in self.pairing_log]
        return "\n".join(rows) + "\n"


def associated_presentation(presentation: Presentation, ba: BlockAlphabet) -> BlockEncodedPresentation:
    """Block-encode a presentation whose relators share one length ``L``.

    ``L`` divisible by ``B``: relators are cut into blocks.  Otherwise every
    ordered pair ``(r1, r2)`` (self-pairs included) with ``r1 = q1 v^-1`` and
    ``r2 = v q2``, ``|v| = L mod B``, contributes the blocks of ``q1 q2``.
    """
    if presentation.n != ba.n:
        raise BlockError("presentation and block alphabet disagree on n")
    rels = presentation.relators
    lengths = {len(r) for r in rels}
    if len(lengths) > 1:
        raise BlockError(f"relators have mixed lengths {sorted(lengths)}")
    if not rels:
        return BlockEncodedPresentation(presentation, ba, 0, ())
    L = lengths.pop()
    P = L % ba.B
    if P == 0:
        hat = tuple(associate_word(r, ba) for r in rels)
        return BlockEncodedPresentation(presentation, ba, 0, hat)
    alpha = Alphabet(ba.n)
    by_prefix: dict[Word, list[int]] = {}
    for j, r in enumerate(rels):
        by_prefix.setdefault(r[:P], []).append(j)
    hat = []
    log = []
    for i, r1 in enumerate(rels):
        v = alpha.inverse_word(r1[L - P :])
        for j in by_prefix.get(v, ()):
            q1q2 = r1[: L - P] + rels[j][P:]
            hat.append(associate_word(q1q2, ba))
            log.append(Pairing(i, j, v))
    return BlockEncodedPresentation(presentation, ba, P, tuple(hat), tuple(log))


# -- automata over the block alphabet


def _check(a: Automaton, ba: BlockAlphabet):
    if a.n != ba.n_hat:
        raise BlockError(f"automaton over n={a.n} does not match block alphabet n_hat={ba.n_hat}")


def rho_mask(block: int, ba: BlockAlphabet) -> int:
    """Blocks whose first S-letter cancels the last S-letter of ``block``."""
    s = ba.last_letter[block]
    return ba.starting_with[(s + ba.n) % (2 * ba.n)]


def rho_letter_set(s: int, ba: BlockAlphabet) -> set[int]:
    """Block letters whose word begins with ``s^-1``."""
    return set(letters_of(ba.starting_with[(s + ba.n) % (2 * ba.n)]))


def build_reduced_subautomaton(a: BAutomaton, ba: BlockAlphabet) -> BAutomaton:
    """Drop transitions whose junction would cancel in the de-blocked word."""
    _check(a, ba)
    sigma = tuple(m & ~rho_mask(i, ba) for i, m in enumerate(a.sigma))
    return BAutomaton(a.n, a.sigma_empty, sigma)


def build_suffix_automaton(a: BAutomaton, block: int, s: int, ba: BlockAlphabet, strict: bool = True) -> BAutomaton:
    """Same transitions, start set ``sigma[block]`` minus blocks beginning with ``s^-1``.

    With ``strict`` the letter ``s`` must end ``block``; the suffix-set
    counts pass ``strict=False`` since there ``s`` ends the prefix ``v``.
    """
    _check(a, ba)
    if strict and ba.last_letter[block] != s:
        raise BlockError("s must be the last S-letter of the block")
    start = a.sigma[block] & ~ba.starting_with[(s + ba.n) % (2 * ba.n)]
    return BAutomaton(a.n, start, a.sigma)


def _as_e(a: Automaton) -> EAutomaton:
    return a if isinstance(a, EAutomaton) else promote_to_e(a)


def _cyc_table(a: Automaton, ba: BlockAlphabet, L_hat: int) -> np.ndarray:
    """Counts of reduced words of ``L_hat`` blocks in the language, keyed by
    (first S-letter, last block); the final block transition uses ``tau``."""
    e = _as_e(a)
    m_hat = 2 * ba.n_hat
    m = 2 * ba.n
    rho = [rho_mask(i, ba) for i in range(m_hat)]

    def matrix(masks):
        t = np.zeros((m_hat, m_hat), dtype=np.int64)
        for i, mk in enumerate(masks):
            for j in letters_of(mk & ~rho[i]):
                t[i, j] = 1
        return t.astype(object)

    step = matrix(e.base.sigma)
    last = matrix(e.tau)
    v = np.zeros((m, m_hat), dtype=object)
    for i in letters_of(e.base.sigma_empty):
        v[ba.first_letter[i], i] += 1
    for k in range(1, L_hat):
        v = v.dot(last if k == L_hat - 1 else step)
    return v


def count_language_over_S(a: Automaton, ba: BlockAlphabet, L: int, mode: str = "reduced") -> int:
    """Exact number of length-``L`` words over ``S`` whose blocks spell an accepted word.

    ``reduced`` counts reduced words, ``cyclically_reduced`` additionally
    requires the last letter not to cancel the first, ``any`` drops
    reducedness across block boundaries.
    """
    _check(a, ba)
    if mode not in MODES:
        raise BlockError(f"unknown mode {mode!r}")
    if L % ba.B:
        raise BlockError(f"L={L} is not divisible by B={ba.B}")
    L_hat = L // ba.B
    if L_hat == 0:
        return 0
    if mode == "any":
        return count_words(a, L_hat)
    table = _cyc_table(a, ba, L_hat)
    if mode == "reduced":
        return int(table.sum())
    total = 0
    for f in range(2 * ba.n):
        bad = ba.ending_with[(f + ba.n) % (2 * ba.n)]
        total += sum(int(table[f, i]) for i in range(2 * ba.n_hat) if not bad >> i & 1)
    return total


def _extension_counts(n: int, P: int) -> np.ndarray:
    """``E[x, f]``: reduced words ``u`` of length ``P`` with ``u[0] != x^-1`` and ``u[-1] != f^-1``."""
    m = 2 * n
    e = np.zeros((m, m), dtype=object)
    for u in iter_reduced(n, P):
        for x in range(m):
            if u[0] == (x + n) % m:
                continue
            for f in range(m):
                if u[-1] != (f + n) % m:
                    e[x, f] += 1
    return e


def count_prefix_set(a: Automaton, ba: BlockAlphabet, P: int, L: int, cyclic: bool = False) -> int:
    """Reduced (optionally cyclically reduced) words of length ``L`` whose
    length ``L - P`` prefix has an accepted block reading."""
    _check(a, ba)
    if P < 1 or L % ba.B != P % ba.B or L <= P:
        raise BlockError(f"need L = P (mod B) with 1 <= P < L; got L={L}, P={P}, B={ba.B}")
    L_hat = (L - P) // ba.B
    if not cyclic:
        return count_language_over_S(a, ba, L - P, "reduced") * (2 * ba.n - 1) ** P
    table = _cyc_table(a, ba, L_hat)
    ext = _extension_counts(ba.n, P)
    total = 0
    for f in range(2 * ba.n):
        for i in range(2 * ba.n_hat):
            c = table[f, i]
            if c:
                total += int(c) * int(ext[ba.last_letter[i], f])
    return total


def count_suffix_set(a: BAutomaton, ba: BlockAlphabet, block: int, v: Word, L: int) -> int:
    """Words ``v w`` of length ``L`` with ``w`` in the block language of the suffix automaton."""
    P = len(v)
    if not v or not is_reduced(v, ba.n):
        raise BlockError("v must be a nonempty reduced word")
    suffix = build_suffix_automaton(a, block, v[-1], ba, strict=False)
    return count_language_over_S(suffix, ba, L - P, "reduced")


def admissible_extensions(word: Sequence[int], e: EAutomaton, ba: BlockAlphabet) -> list[int]:
    """Blocks ``v`` in ``tau`` of the last block that keep ``word + v`` cyclically reduced."""
    _check(e, ba)
    if not word or len(word) % ba.B:
        raise BlockError("word must be a nonempty multiple of B letters")
    hat = associate_word(word, ba)
    m = 2 * ba.n
    bad = ba.starting_with[(word[-1] + ba.n) % m] | ba.ending_with[(word[0] + ba.n) % m]
    return letters_of(e.tau[hat[-1]] & ~bad)


def extend_to_cyclic(word: Sequence[int], e: EAutomaton, ba: BlockAlphabet) -> Word:
    options = admissible_extensions(word, e, ba)
    if not options:
        raise AssertionError("no admissible final block; the automaton is not large enough")
    return tuple(word) + ba.words[options[0]]


def sublemma_epsilon_check(n: int, B: int) -> tuple[Fraction, bool]:
    """Worst share of length-B reduced words beginning with ``s`` or ending with ``s'``.

    Returns the maximum over all ``(s, s')`` and whether it is at most 4/9.
    """
    if B < 3:
        raise BlockError("need B >= 3")
    ba = BlockAlphabet(n, B)
    m = 2 * n
    worst = Fraction(0)
    for s in range(m):
        for t in range(m):
            k = popcount(ba.starting_with[s] | ba.ending_with[t])
            worst = max(worst, Fraction(k, ba.size))
    return worst, worst <= Fraction(1, 2) - Fraction(1, 18)
