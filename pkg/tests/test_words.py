import json
from collections import Counter
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from randfa.words import (
    Alphabet,
    ModelParams,
    Presentation,
    WordError,
    count_cyclically_reduced,
    count_reduced,
    free_reduce,
    integer_root,
    inverse_letter,
    is_cyclically_reduced,
    is_reduced,
    iter_reduced,
    load_presentation,
    mix_seed,
    relator_count,
    sample_cyclically_reduced,
    sample_reduced,
    sample_relator_set,
    sample_words,
)

from oracles import all_words, cyclically_reduced, reduced

AB = Alphabet(2)


def w(text, n=2):
    return Alphabet(n).parse_word(text)


class TestInverse:
    def test_involution(self):
        a = AB.parse_letter("a")
        assert inverse_letter(a, 2) == AB.parse_letter("A")
        assert inverse_letter(inverse_letter(a, 2), 2) == a
        assert inverse_letter(AB.parse_letter("B"), 2) == AB.parse_letter("b")

    def test_two_orbits_for_n2(self):
        orbits = {frozenset((x, inverse_letter(x, 2))) for x in range(4)}
        assert len(orbits) == 2
        assert all(len(o) == 2 for o in orbits)

    def test_out_of_range(self):
        with pytest.raises(WordError):
            AB.inverse_letter(4)

    @given(st.integers(2, 26), st.data())
    def test_no_fixed_points(self, n, data):
        x = data.draw(st.integers(0, 2 * n - 1))
        assert inverse_letter(x, n) != x
        assert inverse_letter(inverse_letter(x, n), n) == x


class TestPredicates:
    def test_examples(self):
        assert is_reduced(w("aba"), 2)
        assert not is_reduced(w("aAb"), 2)
        assert is_reduced((), 2)
        assert is_cyclically_reduced(w("ab"), 2)
        assert not is_cyclically_reduced(w("abA"), 2)
        assert is_cyclically_reduced((), 2)

    def test_cyclic_count_n2_L3(self):
        assert sum(is_cyclically_reduced(x, 2) for x in all_words(2, 3)) == 28
        assert count_cyclically_reduced(2, 3) == 28

    @pytest.mark.parametrize("n,L", [(2, L) for L in range(7)] + [(3, L) for L in range(6)])
    def test_counts_match_enumeration(self, n, L):
        words = list(all_words(n, L))
        assert count_reduced(n, L) == sum(reduced(x, n) for x in words)
        assert count_cyclically_reduced(n, L) == sum(cyclically_reduced(x, n) for x in words)

    def test_closed_form_examples(self):
        assert count_reduced(2, 1) == 4
        assert count_reduced(2, 3) == 36
        assert count_reduced(3, 4) == 750

    def test_iter_reduced_is_the_reduced_set(self):
        got = list(iter_reduced(2, 4))
        assert got == sorted(got)
        assert set(got) == {x for x in all_words(2, 4) if reduced(x, 2)}

    @given(st.lists(st.integers(0, 5), max_size=12))
    def test_free_reduce(self, word):
        r = free_reduce(tuple(word), 3)
        assert is_reduced(r, 3)
        assert free_reduce(r, 3) == r


class TestTextFormat:
    def test_round_trip(self):
        assert AB.format_word(w("abAB")) == "abAB"
        assert w("a b\tA") == w("abA")

    def test_bad_letter(self):
        with pytest.raises(WordError):
            AB.parse_word("abc")

    def test_presentation_files(self, tmp_path):
        p = tmp_path / "p.txt"
        p.write_text("# comment\nn 2\nabA  # trailing\nbb\n")
        pres = load_presentation(p)
        assert pres.n == 2 and pres.relators == (w("abA"), w("bb"))
        j = tmp_path / "p.json"
        j.write_text(json.dumps(pres.to_json()))
        assert load_presentation(j) == pres
        assert Presentation.from_text(pres.to_text()) == pres

    def test_empty_relator_rejected(self):
        with pytest.raises(WordError):
            Presentation.from_json({"n": 2, "relators": ["ab", ""]})


class TestSampling:
    def test_reduced_and_deterministic(self):
        for L in range(1, 8):
            x = sample_reduced(2, L, np.random.default_rng(L))
            assert len(x) == L and is_reduced(x, 2)
            assert x == sample_reduced(2, L, np.random.default_rng(L))

    def test_uniform_chi_square(self):
        # 12 reduced words of length 2; 4 sigma band on every cell
        rng = np.random.default_rng(7)
        draws = 100_000
        freq = Counter(sample_reduced(2, 2, rng) for _ in range(draws))
        assert len(freq) == 12
        p = 1 / 12
        sd = (draws * p * (1 - p)) ** 0.5
        assert all(abs(c - draws * p) < 4 * sd for c in freq.values())

    def test_cyclic_support_and_rejection_rate(self):
        rng = np.random.default_rng(3)
        seen = {sample_cyclically_reduced(2, 3, rng) for _ in range(3000)}
        assert len(seen) == 28
        assert all(is_cyclically_reduced(x, 2) for x in seen)
        assert 1 - Fraction(count_cyclically_reduced(2, 3), count_reduced(2, 3)) == Fraction(8, 36)

    def test_batch_sampler_uniform(self):
        words = sample_words(2, 2, "reduced", seed=11, count=60_000)
        freq = Counter(map(tuple, words.tolist()))
        assert len(freq) == 12
        sd = (60_000 / 12 * 11 / 12) ** 0.5
        assert all(abs(c - 5000) < 4 * sd for c in freq.values())

    def test_batch_cyclic_model(self):
        words = sample_words(2, 3, "cyclically_reduced", seed=5, count=5000)
        assert all(is_cyclically_reduced(tuple(x), 2) for x in words.tolist())
        assert len({tuple(x) for x in words.tolist()}) == 28

    def test_prefix_stability(self):
        # per-relator streams: a longer draw extends a shorter one
        a = sample_words(3, 6, "reduced", seed=9, count=10)
        b = sample_words(3, 6, "reduced", seed=9, count=30)
        assert (a == b[:10]).all()

    def test_mix_seed_spreads(self):
        seeds = {mix_seed(0, L, t) for L in range(10) for t in range(100)}
        assert len(seeds) == 1000
        assert all(0 <= s < 2**64 for s in seeds)


class TestRelatorCount:
    def test_examples(self):
        assert relator_count(2, 0.3, 10) == 27
        assert relator_count(3, "0.5", 4) == 25
        assert ModelParams(2, Fraction(3, 10), 10).relator_count == 27

    @given(st.integers(0, 10**30), st.integers(1, 7))
    def test_integer_root(self, x, k):
        r = integer_root(x, k)
        assert r**k <= x < (r + 1) ** k

    def test_sample_relator_set(self):
        pres = sample_relator_set(ModelParams(2, 0.3, 10, seed=4))
        assert len(pres) == 27
        assert all(len(r) == 10 and is_reduced(r, 2) for r in pres.relators)
        assert pres == sample_relator_set(ModelParams(2, 0.3, 10, seed=4))
        cyc = sample_relator_set(ModelParams(3, 0.5, 4, "cyclically_reduced", seed=4))
        assert len(cyc) == 25 and all(is_cyclically_reduced(r, 3) for r in cyc.relators)

    def test_budget_error(self):
        with pytest.raises(WordError):
            sample_relator_set(ModelParams(5, Fraction(9, 10), 40, max_relators=1000))

    @pytest.mark.parametrize("bad", [dict(n=1), dict(d=0), dict(d=1), dict(L=0), dict(model="weird")])
    def test_invalid_params(self, bad):
        args = dict(n=2, d=0.3, L=10) | bad
        with pytest.raises(WordError):
            ModelParams(**args)

    @settings(max_examples=50)
    @given(st.integers(2, 5), st.fractions(Fraction(1, 100), Fraction(99, 100), max_denominator=100), st.integers(1, 30))
    def test_floor_is_exact(self, n, d, L):
        c = relator_count(n, d, L)
        q, p = d.denominator, d.numerator
        # c <= (2n-1)^(dL) < c+1, compared in integers
        assert c**q <= (2 * n - 1) ** (p * L) < (c + 1) ** q
