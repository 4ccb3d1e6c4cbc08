"""Alphabets, words and the density-model relator sampler.

Letters over an alphabet with ``n`` generators are integers ``0 .. 2n-1``.
Index ``k < n`` is the generator ``s_{k+1}`` and ``k + n`` is its formal
inverse, so the involution is ``i -> (i + n) mod 2n``.  Words are plain
tuples of letter indices.

Text encoding: generators are ``a..z`` and inverses ``A..Z``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Iterator, Sequence

import numpy as np

Word = tuple[int, ...]

MODELS = ("reduced", "cyclically_reduced")

# Default ceiling on the number of relators a single presentation may hold.
MAX_RELATORS = 10_000_000


class WordError(ValueError):
    pass


@dataclass(frozen=True)
class Alphabet:
    n: int

    def __post_init__(self):
        if self.n < 2:
            raise WordError(f"alphabet needs n >= 2 generators, got {self.n}")

    @property
    def size(self) -> int:
        return 2 * self.n

    def letters(self) -> range:
        return range(2 * self.n)

    def inverse_letter(self, letter: int) -> int:
        if not 0 <= letter < 2 * self.n:
            raise WordError(f"letter index {letter} out of range for n={self.n}")
        return (letter + self.n) % (2 * self.n)

    def inverse_word(self, word: Sequence[int]) -> Word:
        return tuple(self.inverse_letter(x) for x in reversed(word))

    def format_letter(self, letter: int) -> str:
        if self.n > 26:
            raise WordError("text encoding supports at most 26 generators")
        if letter < self.n:
            return chr(ord("a") + letter)
        return chr(ord("A") + letter - self.n)

    def parse_letter(self, ch: str) -> int:
        if len(ch) == 1 and ch.isascii() and ch.isalpha():
            k = ord(ch.lower()) - ord("a")
            if k < self.n:
                return k if ch.islower() else k + self.n
        raise WordError(f"letter {ch!r} outside alphabet with n={self.n}")

    def format_word(self, word: Iterable[int]) -> str:
        return "".join(self.format_letter(x) for x in word)

    def parse_word(self, text: str) -> Word:
        return tuple(self.parse_letter(ch) for ch in text if not ch.isspace())


def inverse_letter(letter: int, n: int) -> int:
    return Alphabet(n).inverse_letter(letter)


def is_reduced(word: Sequence[int], n: int) -> bool:
    m = 2 * n
    return all((y - x) % m != n for x, y in zip(word, word[1:]))


def is_cyclically_reduced(word: Sequence[int], n: int) -> bool:
    if not is_reduced(word, n):
        return False
    return len(word) <= 1 or (word[0] - word[-1]) % (2 * n) != n


def free_reduce(word: Sequence[int], n: int) -> Word:
    """Cancel adjacent inverse pairs until the word is reduced."""
    out: list[int] = []
    for x in word:
        if out and (x - out[-1]) % (2 * n) == n:
            out.pop()
        else:
            out.append(x)
    return tuple(out)


def count_reduced(n: int, L: int) -> int:
    """Number of reduced words of length ``L``: ``2n (2n-1)^(L-1)``."""
    if L == 0:
        return 1
    return 2 * n * (2 * n - 1) ** (L - 1)


def count_cyclically_reduced(n: int, L: int) -> int:
    # Closed form via the trace of the non-backtracking transfer matrix.
    if L == 0:
        return 1
    if L == 1:
        return 2 * n
    q = 2 * n - 1
    return q**L + 1 + (n - 1) * (1 + (-1) ** L)


def iter_reduced(n: int, L: int) -> Iterator[Word]:
    """All reduced words of length ``L`` in lexicographic index order."""
    m = 2 * n

    def extend(prefix: Word) -> Iterator[Word]:
        if len(prefix) == L:
            yield prefix
            return
        for x in range(m):
            if prefix and (x - prefix[-1]) % m == n:
                continue
            yield from extend(prefix + (x,))

    yield from extend(())


def sample_reduced(n: int, L: int, rng: np.random.Generator) -> Word:
    """Uniform reduced word: first letter over ``2n``, then ``2n-1`` choices."""
    if n < 2 or L < 1:
        raise WordError("need n >= 2 and L >= 1")
    word = [int(rng.integers(2 * n))]
    for _ in range(L - 1):
        r = int(rng.integers(2 * n - 1))
        forbidden = (word[-1] + n) % (2 * n)
        word.append(r if r < forbidden else r + 1)
    return tuple(word)


def sample_cyclically_reduced(n: int, L: int, rng: np.random.Generator) -> Word:
    while True:
        word = sample_reduced(n, L, rng)
        if is_cyclically_reduced(word, n):
            return word


# Counter-based stream: every draw is a pure function of (key, counter), so
# any relator can be generated independently of the others.

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_MASK64 = (1 << 64) - 1


def splitmix64(x: np.ndarray) -> np.ndarray:
    """The splitmix64 finaliser applied elementwise to a uint64 array."""
    z = np.asarray(x, dtype=np.uint64) + _GOLDEN
    z = (z ^ (z >> np.uint64(30))) * _M1
    z = (z ^ (z >> np.uint64(27))) * _M2
    return z ^ (z >> np.uint64(31))


def mix_seed(*parts: int) -> int:
    """Fold integers into one 64-bit value with splitmix64."""
    h = np.zeros(1, dtype=np.uint64)
    for p in parts:
        h = splitmix64(h ^ np.uint64(p & _MASK64))
    return int(h[0])


def _uniform_below(bits: np.ndarray, m: int) -> np.ndarray:
    u = (bits >> np.uint64(11)).astype(np.float64) * (1.0 / 9007199254740992.0)
    return np.minimum((u * m).astype(np.int64), m - 1)


def _draws(keys: np.ndarray, counter: int) -> np.ndarray:
    return splitmix64(keys ^ splitmix64(np.full(keys.shape, counter, dtype=np.uint64)))


def relator_keys(seed: int, count: int, attempt: int = 0) -> np.ndarray:
    base = np.uint64(mix_seed(seed, attempt))
    idx = np.arange(count, dtype=np.uint64)
    return splitmix64(idx ^ base)


def sample_reduced_batch(n: int, L: int, keys: np.ndarray) -> np.ndarray:
    """One uniform reduced word of length ``L`` per key, as an int array."""
    m = 2 * n
    out = np.empty((len(keys), L), dtype=np.int64)
    out[:, 0] = _uniform_below(_draws(keys, 0), m)
    for i in range(1, L):
        r = _uniform_below(_draws(keys, i), m - 1)
        forbidden = (out[:, i - 1] + n) % m
        out[:, i] = r + (r >= forbidden)
    return out


def sample_words(n: int, L: int, model: str, seed: int, count: int) -> np.ndarray:
    """``count`` i.i.d. words of the given model; word ``i`` depends only on (seed, i)."""
    if model not in MODELS:
        raise WordError(f"unknown model {model!r}")
    words = sample_reduced_batch(n, L, relator_keys(seed, count))
    if model == "cyclically_reduced" and L > 1:
        attempt = 0
        bad = (words[:, 0] - words[:, -1]) % (2 * n) == n
        while bad.any():
            attempt += 1
            idx = np.nonzero(bad)[0]
            keys = relator_keys(seed, count, attempt)[idx]
            words[idx] = sample_reduced_batch(n, L, keys)
            bad = np.zeros(count, dtype=bool)
            bad[idx] = (words[idx, 0] - words[idx, -1]) % (2 * n) == n
    return words


def integer_root(x: int, k: int) -> int:
    """Largest integer ``r`` with ``r**k <= x``."""
    if x < 0 or k < 1:
        raise ValueError("need x >= 0, k >= 1")
    if x < 2:
        return x
    r = 1 << ((x.bit_length() + k - 1) // k)
    while True:
        s = ((k - 1) * r + x // r ** (k - 1)) // k
        if s >= r:
            break
        r = s
    while r**k > x:
        r -= 1
    while (r + 1) ** k <= x:
        r += 1
    return r


def as_fraction(x: Fraction | str | float | int) -> Fraction:
    """Exact rational from user input; floats go through their decimal repr."""
    if isinstance(x, float):
        return Fraction(repr(x))
    return Fraction(x)


def relator_count(n: int, d: Fraction | str | float, L: int) -> int:
    """``floor((2n-1)^(dL))`` computed exactly for rational ``d``."""
    d = as_fraction(d)
    p, q = d.numerator, d.denominator
    if p < 0:
        raise WordError("density must be positive")
    return integer_root((2 * n - 1) ** (p * L), q)


@dataclass(frozen=True)
class ModelParams:
    n: int
    d: Fraction
    L: int
    model: str = "reduced"
    seed: int = 0
    max_relators: int = MAX_RELATORS

    def __post_init__(self):
        object.__setattr__(self, "d", as_fraction(self.d))
        if self.n < 2:
            raise WordError("n must be >= 2")
        if not 0 < self.d < 1:
            raise WordError("density d must lie in (0, 1)")
        if self.L < 1:
            raise WordError("L must be >= 1")
        if self.model not in MODELS:
            raise WordError(f"unknown model {self.model!r}")

    @property
    def relator_count(self) -> int:
        return relator_count(self.n, self.d, self.L)


@dataclass(frozen=True)
class Presentation:
    n: int
    relators: tuple[Word, ...] = field(default_factory=tuple)

    def __post_init__(self):
        rels = tuple(tuple(int(x) for x in r) for r in self.relators)
        for r in rels:
            if any(not 0 <= x < 2 * self.n for x in r):
                raise WordError(f"relator {r} uses letters outside n={self.n}")
        object.__setattr__(self, "relators", rels)

    def __len__(self):
        return len(self.relators)

    def with_relators(self, extra: Iterable[Word]) -> "Presentation":
        return Presentation(self.n, self.relators + tuple(tuple(r) for r in extra))

    # -- text / JSON formats

    def to_text(self) -> str:
        a = Alphabet(self.n)
        lines = [f"n {self.n}"] + [a.format_word(r) for r in self.relators]
        return "\n".join(lines) + "\n"

    def to_json(self) -> dict:
        a = Alphabet(self.n)
        return {"n": self.n, "relators": [a.format_word(r) for r in self.relators]}

    @classmethod
    def from_json(cls, data: dict) -> "Presentation":
        a = Alphabet(int(data["n"]))
        rels = [a.parse_word(s) for s in data["relators"]]
        if any(len(r) == 0 for r in rels):
            raise WordError("empty relator in input")
        return cls(a.n, tuple(rels))

    @classmethod
    def from_text(cls, text: str) -> "Presentation":
        lines = [ln.split("#", 1)[0].strip() for ln in text.splitlines()]
        lines = [ln for ln in lines if ln]
        if not lines or not lines[0].startswith("n "):
            raise WordError("presentation must start with a line 'n <integer>'")
        n = int(lines[0].split()[1])
        body = lines[1:]
        if any("[" in ln for ln in body):
            # bracketed block letters; deferred import avoids a module cycle
            from .blocks import parse_block_relators

            return cls(n, tuple(parse_block_relators(n, body)))
        a = Alphabet(n)
        return cls(n, tuple(a.parse_word(ln) for ln in body))


def load_presentation(path: str | Path) -> Presentation:
    path = Path(path)
    text = path.read_text()
    if path.suffix == ".json":
        return Presentation.from_json(json.loads(text))
    return Presentation.from_text(text)


def sample_relator_set(params: ModelParams, seed: int | None = None) -> Presentation:
    """Draw ``floor((2n-1)^(dL))`` relators i.i.d. with replacement."""
    count = params.relator_count
    if count > params.max_relators:
        raise WordError(
            f"relator count {count} exceeds the budget of {params.max_relators}"
        )
    seed = params.seed if seed is None else seed
    words = sample_words(params.n, params.L, params.model, seed, count)
    return Presentation(params.n, tuple(map(tuple, words.tolist())))
