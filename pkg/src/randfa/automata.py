"""Basic (b-) and enhanced (e-) automata over a symmetrised alphabet.

The state set is ``{start} ∪ S^±``.  An automaton is stored as bitmasks:
``sigma_empty`` is the set of admissible first letters and ``sigma[s]`` the
set of letters allowed to follow ``s``.  An e-automaton adds ``tau[s]``,
used only for the transition into the final letter.

All largeness comparisons are exact rational arithmetic.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Iterable, Iterator, Sequence

import numpy as np

from .words import Alphabet, Word

# Largest number of candidate automata enumerate_large_automata will walk.
ENUMERATION_BUDGET = 1 << 20


class AutomatonError(ValueError):
    pass


def mask_of(letters: Iterable[int]) -> int:
    m = 0
    for x in letters:
        m |= 1 << x
    return m


def letters_of(mask: int) -> list[int]:
    out = []
    i = 0
    while mask:
        if mask & 1:
            out.append(i)
        mask >>= 1
        i += 1
    return out


def popcount(mask: int) -> int:
    return bin(mask).count("1")


def size_threshold(lam: Fraction, n: int) -> int:
    """Smallest integer size ``k`` with ``k >= lam * 2n``."""
    return math.ceil(Fraction(lam) * 2 * n)


def strict_threshold(bound: Fraction, n: int) -> int:
    """Smallest integer size ``k`` with ``k > bound * 2n``."""
    return math.floor(Fraction(bound) * 2 * n) + 1


@dataclass(frozen=True)
class BAutomaton:
    n: int
    sigma_empty: int
    sigma: tuple[int, ...]

    def __post_init__(self):
        full = (1 << 2 * self.n) - 1
        if len(self.sigma) != 2 * self.n:
            raise AutomatonError("sigma must be defined for every letter")
        if self.sigma_empty & ~full or any(m & ~full for m in self.sigma):
            raise AutomatonError("transition sets use letters outside the alphabet")

    @classmethod
    def from_sets(cls, n: int, sigma_empty: Iterable[int], sigma: Sequence[Iterable[int]]):
        return cls(n, mask_of(sigma_empty), tuple(mask_of(s) for s in sigma))

    @classmethod
    def full(cls, n: int) -> "BAutomaton":
        full = (1 << 2 * n) - 1
        return cls(n, full, (full,) * (2 * n))

    @property
    def full_mask(self) -> int:
        return (1 << 2 * self.n) - 1

    def successors(self, state: int | None) -> list[int]:
        return letters_of(self.sigma_empty if state is None else self.sigma[state])

    def fingerprint(self) -> int:
        """Bitset serialisation: sigma_empty, then sigma in letter-index order."""
        width = 2 * self.n
        fp = self.sigma_empty
        for i, m in enumerate(self.sigma):
            fp |= m << (width * (i + 1))
        return fp

    def transition_matrix(self, reduced: bool = False) -> np.ndarray:
        m = 2 * self.n
        t = np.zeros((m, m), dtype=np.int64)
        for s in range(m):
            for x in letters_of(self.sigma[s]):
                if not (reduced and x == (s + self.n) % m):
                    t[s, x] = 1
        return t


@dataclass(frozen=True)
class EAutomaton:
    base: BAutomaton
    tau: tuple[int, ...]

    def __post_init__(self):
        if len(self.tau) != 2 * self.base.n:
            raise AutomatonError("tau must be defined for every letter")
        if any(m & ~self.base.full_mask for m in self.tau):
            raise AutomatonError("final transition sets use letters outside the alphabet")

    @property
    def n(self) -> int:
        return self.base.n

    def fingerprint(self) -> int:
        width = 2 * self.n
        fp = self.base.fingerprint()
        shift = width * (2 * self.n + 1)
        for i, m in enumerate(self.tau):
            fp |= m << (shift + width * i)
        return fp


Automaton = BAutomaton | EAutomaton


def _base(a: Automaton) -> BAutomaton:
    return a.base if isinstance(a, EAutomaton) else a


# -- largeness


def is_lambda_large(a: BAutomaton, lam: Fraction) -> bool:
    if a.sigma_empty == 0:
        return False
    need = Fraction(lam) * 2 * a.n
    return all(popcount(m) >= need for m in a.sigma)


def is_lambda_eps_large(e: EAutomaton, lam: Fraction, eps: Fraction) -> bool:
    if not is_lambda_large(e.base, lam):
        return False
    bound = (Fraction(1, 2) - Fraction(eps)) * 2 * e.n
    return all(popcount(m) > bound for m in e.tau)


def largeness(a: BAutomaton) -> Fraction:
    """The largest ``lam`` for which ``a`` is lam-large (0 if sigma_empty is empty)."""
    if a.sigma_empty == 0:
        return Fraction(0)
    return Fraction(min(popcount(m) for m in a.sigma), 2 * a.n)


def promote_to_e(a: BAutomaton) -> EAutomaton:
    return EAutomaton(a, a.sigma)


# -- membership


def accepts(a: BAutomaton, word: Sequence[int]) -> bool:
    if len(word) == 0:
        raise AutomatonError("the empty word lies in no automaton language")
    if not a.sigma_empty >> word[0] & 1:
        return False
    return all(a.sigma[s] >> t & 1 for s, t in zip(word, word[1:]))


def accepts_e(e: EAutomaton, word: Sequence[int]) -> bool:
    if len(word) == 0:
        raise AutomatonError("the empty word lies in no automaton language")
    base = e.base
    if not base.sigma_empty >> word[0] & 1:
        return False
    if len(word) == 1:
        return True
    interior = all(base.sigma[s] >> t & 1 for s, t in zip(word[:-2], word[1:-1]))
    return interior and bool(e.tau[word[-2]] >> word[-1] & 1)


def accepts_any(a: Automaton, word: Sequence[int]) -> bool:
    return accepts_e(a, word) if isinstance(a, EAutomaton) else accepts(a, word)


def iter_language(a: Automaton, L: int) -> Iterator[Word]:
    """Words of length ``L`` in the language, in lexicographic order."""
    base = _base(a)
    tau = a.tau if isinstance(a, EAutomaton) else base.sigma

    def extend(prefix: Word) -> Iterator[Word]:
        if len(prefix) == L:
            yield prefix
            return
        if not prefix:
            nxt = base.sigma_empty
        elif len(prefix) == L - 1:
            nxt = tau[prefix[-1]]
        else:
            nxt = base.sigma[prefix[-1]]
        for x in letters_of(nxt):
            yield from extend(prefix + (x,))

    if L >= 1:
        yield from extend(())


# -- counting


def _count(a: Automaton, L: int, reduced: bool) -> int:
    if L < 1:
        raise AutomatonError("L must be >= 1")
    base = _base(a)
    n, m = base.n, 2 * base.n
    step = base.transition_matrix(reduced).astype(object)
    if isinstance(a, EAutomaton):
        last = BAutomaton(n, 0, a.tau).transition_matrix(reduced).astype(object)
    else:
        last = step
    v = np.array([int(base.sigma_empty >> x & 1) for x in range(m)], dtype=object)
    for i in range(1, L):
        v = v.dot(last if i == L - 1 else step)
    return int(sum(v))


def count_words(a: Automaton, L: int) -> int:
    """Exact number of length-``L`` words in the language."""
    return _count(a, L, reduced=False)


def count_reduced_words(a: Automaton, L: int) -> int:
    """Exact number of reduced length-``L`` words in the language."""
    return _count(a, L, reduced=True)


def count_cyclically_reduced_words(a: Automaton, L: int) -> int:
    """Exact number of cyclically reduced length-``L`` words in the language."""
    if L == 1:
        return count_words(a, 1)
    base = _base(a)
    n = base.n
    total = 0
    for f in letters_of(base.sigma_empty):
        start = BAutomaton(n, 1 << f, base.sigma)
        tail = a.tau if isinstance(a, EAutomaton) else base.sigma
        # forbid a final letter that cancels the first one
        cut = ~(1 << ((f + n) % (2 * n))) & base.full_mask
        trimmed = EAutomaton(start, tuple(m & cut for m in tail))
        total += count_reduced_words(trimmed, L)
    return total


def growth_rate_estimate(a: Automaton, L_max: int, reduced: bool = False) -> Fraction:
    """``count(L_max) / count(L_max - 1)``, a finite-length stand-in for the growth rate."""
    if L_max < 2:
        raise AutomatonError("L_max must be >= 2")
    counter = count_reduced_words if reduced else count_words
    hi, lo = counter(a, L_max), counter(a, L_max - 1)
    if hi == 0 or lo == 0:
        return Fraction(0)
    return Fraction(hi, lo)


# -- enumeration


def automaton_census(n: int) -> int:
    """Total number of b-automata over ``n`` generators."""
    return 2 ** (2 * n * (2 * n + 1))


def admissible_masks(m: int, min_size: int) -> list[int]:
    return [x for x in range(1 << m) if popcount(x) >= min_size]


def large_census(n: int, lam: Fraction) -> int:
    """Closed-form count of lam-large b-automata."""
    m = 2 * n
    k = size_threshold(lam, n)
    per_state = sum(math.comb(m, j) for j in range(k, m + 1))
    return ((1 << m) - 1) * per_state**m


def enumerate_large_automata(
    n: int, lam: Fraction, budget: int = ENUMERATION_BUDGET
) -> Iterator[BAutomaton]:
    """Yield every lam-large b-automaton exactly once, in fingerprint order."""
    if automaton_census(n) > budget:
        raise AutomatonError(
            f"{automaton_census(n)} candidate automata exceed the enumeration budget {budget}"
        )
    m = 2 * n
    starts = admissible_masks(m, 1)
    states = admissible_masks(m, size_threshold(lam, n))
    for combo in itertools.product(states, repeat=m):
        sigma = tuple(reversed(combo))
        for se in starts:
            yield BAutomaton(n, se, sigma)


def large_automata_array(n: int, lam: Fraction, budget: int = ENUMERATION_BUDGET) -> np.ndarray:
    """All lam-large automata as an ``(N, 2n+1)`` mask array, same order as the enumeration."""
    if automaton_census(n) > budget:
        raise AutomatonError(
            f"{automaton_census(n)} candidate automata exceed the enumeration budget {budget}"
        )
    m = 2 * n
    starts = np.array(admissible_masks(m, 1), dtype=np.int64)
    states = np.array(admissible_masks(m, size_threshold(lam, n)), dtype=np.int64)
    grids = np.meshgrid(*([states] * m + [starts]), indexing="ij")
    # meshgrid order: sigma[m-1], ..., sigma[0], sigma_empty (fastest)
    cols = [g.ravel() for g in grids]
    sigma = cols[:m][::-1]
    return np.stack([cols[m]] + sigma, axis=1)


def all_automata_array(n: int, budget: int = ENUMERATION_BUDGET) -> np.ndarray:
    """Every b-automaton, decoded from its fingerprint ``0 .. census-1``."""
    census = automaton_census(n)
    if census > budget:
        raise AutomatonError(f"{census} automata exceed the enumeration budget {budget}")
    m = 2 * n
    fp = np.arange(census, dtype=np.int64)
    return np.stack([(fp >> (m * i)) & ((1 << m) - 1) for i in range(m + 1)], axis=1)


def large_filter(masks: np.ndarray, n: int, lam: Fraction) -> np.ndarray:
    """Boolean selector of the lam-large rows of a mask array."""
    k = size_threshold(lam, n)
    pop = np.zeros(masks.shape, dtype=np.int64)
    for bit in range(2 * n):
        pop += (masks >> bit) & 1
    return (pop[:, 0] >= 1) & np.all(pop[:, 1:] >= k, axis=1)


def batch_counts(masks: np.ndarray, n: int, L: int, reduced: bool = False) -> np.ndarray:
    """Language counts at length ``L`` for every row of a mask array (int64).

    Callers keep ``(2n)^L`` below 2^63.
    """
    if (2 * n) ** L >= 1 << 63:
        raise AutomatonError("counts could overflow int64; use count_words")
    m = 2 * n
    bits = np.arange(m)
    v = (masks[:, :1] >> bits) & 1
    t = (masks[:, 1:, None] >> bits[None, None, :]) & 1
    if reduced:
        for s in range(m):
            t[:, s, (s + n) % m] = 0
    for _ in range(L - 1):
        v = np.einsum("ks,kst->kt", v, t)
    return v.sum(axis=1)


def random_large_automaton(n: int, lam: Fraction, rng: np.random.Generator) -> BAutomaton:
    """Uniform over lam-large automata: each state picks an admissible set uniformly."""
    m = 2 * n
    starts = admissible_masks(m, 1)
    states = admissible_masks(m, size_threshold(lam, n))
    se = starts[int(rng.integers(len(starts)))]
    sigma = tuple(states[int(rng.integers(len(states)))] for _ in range(m))
    return BAutomaton(n, se, sigma)


def random_automaton(n: int, rng: np.random.Generator, density: float = 0.5) -> BAutomaton:
    m = 2 * n
    bits = rng.random((m + 1, m)) < density
    masks = [mask_of(np.nonzero(row)[0].tolist()) for row in bits]
    return BAutomaton(n, masks[0], tuple(masks[1:]))


# -- serialisation


LetterCodec = Callable[[int], str]


def automaton_to_json(a: Automaton, codec=None) -> dict:
    """JSON form using the letter text encoding (or ``codec`` for block alphabets)."""
    base = _base(a)
    codec = codec or Alphabet(base.n)
    fmt = codec.format_letter

    def sets(masks):
        return {fmt(s): [fmt(x) for x in letters_of(mk)] for s, mk in enumerate(masks)}

    out = {
        "n": base.n,
        "sigma_empty": [fmt(x) for x in letters_of(base.sigma_empty)],
        "sigma": sets(base.sigma),
    }
    if isinstance(a, EAutomaton):
        out["tau"] = sets(a.tau)
    return out


def automaton_from_json(data: dict, codec=None) -> Automaton:
    n = int(data["n"])
    codec = codec or Alphabet(n)
    parse = codec.parse_letter

    def masks(table: dict) -> tuple[int, ...]:
        out = [0] * (2 * n)
        for key, vals in table.items():
            out[parse(key)] = mask_of(parse(v) for v in vals)
        return tuple(out)

    base = BAutomaton(n, mask_of(parse(x) for x in data["sigma_empty"]), masks(data["sigma"]))
    if data.get("tau") is not None:
        return EAutomaton(base, masks(data["tau"]))
    return base
