import json
from fractions import Fraction
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from randfa.automata import (
    AutomatonError,
    BAutomaton,
    EAutomaton,
    accepts,
    accepts_e,
    all_automata_array,
    automaton_census,
    automaton_from_json,
    automaton_to_json,
    batch_counts,
    count_cyclically_reduced_words,
    count_reduced_words,
    count_words,
    enumerate_large_automata,
    growth_rate_estimate,
    is_lambda_eps_large,
    is_lambda_large,
    iter_language,
    large_automata_array,
    large_census,
    large_filter,
    mask_of,
    promote_to_e,
    random_automaton,
    random_large_automaton,
)
from randfa.words import Alphabet

from oracles import all_words, brute_count, member

AB = Alphabet(2)
THIRD = Fraction(1, 3)
CORPUS = Path(__file__).parent / "data" / "automata_corpus.json"


def sets(*letters):
    return mask_of(AB.parse_letter(x) for x in letters)


def chain():
    # sigma_empty={a}, sigma_a={b}, sigma_b={a}
    return BAutomaton(2, sets("a"), (sets("b"), sets("a"), 0, 0))


def starts_with_a():
    return BAutomaton(2, sets("a"), (15, 15, 15, 15))


def load_corpus():
    return [automaton_from_json(d) for d in json.loads(CORPUS.read_text())]


masks16 = st.integers(0, 15)
automata = st.builds(lambda se, sg: BAutomaton(2, se, tuple(sg)), masks16, st.lists(masks16, min_size=4, max_size=4))


class TestLargeness:
    def test_examples(self):
        a = BAutomaton(2, sets("a"), (sets("a", "b"),) * 4)
        assert is_lambda_large(a, THIRD)
        assert not is_lambda_large(BAutomaton(2, 0, (15,) * 4), THIRD)
        b = BAutomaton(2, sets("a"), (sets("a"), 15, 15, 15))
        assert not is_lambda_large(b, Fraction(1, 2))

    def test_e_threshold(self):
        eps = Fraction(1, 18)
        base = BAutomaton.full(2)
        assert is_lambda_eps_large(EAutomaton(base, (sets("a", "b"),) * 4), THIRD, eps)
        assert not is_lambda_eps_large(EAutomaton(base, (sets("a"), 15, 15, 15)), THIRD, eps)

    def test_promotion(self):
        a = BAutomaton(2, sets("a"), (sets("a", "b"),) * 4)
        assert is_lambda_eps_large(promote_to_e(a), Fraction(1, 2), Fraction(1, 18))
        assert promote_to_e(BAutomaton.full(2)).tau == (15,) * 4

    def test_validation(self):
        with pytest.raises(AutomatonError):
            BAutomaton(2, 16, (0,) * 4)
        with pytest.raises(AutomatonError):
            BAutomaton(2, 1, (0,) * 3)


class TestMembership:
    def test_chain(self):
        assert accepts(chain(), AB.parse_word("aba"))
        assert not accepts(chain(), AB.parse_word("ba"))
        assert all(accepts(BAutomaton.full(2), x) for L in range(1, 4) for x in all_words(2, L))

    def test_empty_word(self):
        with pytest.raises(AutomatonError):
            accepts(chain(), ())

    def test_last_step_only(self):
        e = EAutomaton(BAutomaton(2, sets("a"), (0, 15, 15, 15)), (sets("b"), 15, 15, 15))
        assert accepts_e(e, AB.parse_word("ab"))
        assert not accepts_e(e, AB.parse_word("abb"))
        assert accepts_e(e, AB.parse_word("a"))

    @given(automata, st.lists(masks16, min_size=4, max_size=4))
    def test_tau_superset(self, a, extra):
        tau = tuple(s | x for s, x in zip(a.sigma, extra))
        e = EAutomaton(a, tau)
        for L in range(1, 5):
            for x in all_words(2, L):
                if accepts(a, x):
                    assert accepts_e(e, x)

    def test_promote_preserves_language(self):
        for a in (chain(), starts_with_a(), BAutomaton(2, 5, (3, 12, 6, 9))):
            e = promote_to_e(a)
            for L in range(1, 7):
                for x in all_words(2, L):
                    assert accepts(a, x) == accepts_e(e, x)

    def test_iter_language_matches_oracle(self):
        for a in load_corpus()[:20]:
            base = getattr(a, "base", a)
            for L in range(1, 5):
                got = set(iter_language(a, L))
                want = {x for x in all_words(2, L) if member(base.sigma_empty, base.sigma, x, getattr(a, "tau", None))}
                assert got == want


class TestCounting:
    def test_examples(self):
        assert count_words(BAutomaton.full(2), 3) == 64
        assert count_reduced_words(BAutomaton.full(2), 3) == 36
        assert all(count_words(chain(), L) == 1 for L in range(1, 10))

    def test_closed_form(self):
        a = BAutomaton(2, sets("a"), tuple(15 & ~(1 << ((s + 2) % 4)) for s in range(4)))
        for L in range(1, 7):
            assert count_reduced_words(a, L) == 3 ** (L - 1) == brute_count(a, L, "reduced")

    def test_corpus(self):
        for a in load_corpus():
            for L in range(1, 6):
                assert count_words(a, L) == brute_count(a, L)
                assert count_reduced_words(a, L) == brute_count(a, L, "reduced")

    def test_cyclic_counts(self):
        for a in load_corpus()[:60]:
            for L in range(1, 6):
                assert count_cyclically_reduced_words(a, L) == brute_count(a, L, "cyclic")

    @given(automata, st.integers(0, 4), st.integers(0, 3))
    def test_monotone(self, a, slot, letter):
        bigger = (
            BAutomaton(2, a.sigma_empty | (1 << letter), a.sigma)
            if slot == 4
            else BAutomaton(2, a.sigma_empty, tuple(m | (1 << letter) if i == slot else m for i, m in enumerate(a.sigma)))
        )
        for L in range(1, 6):
            assert count_words(bigger, L) >= count_words(a, L)
            assert count_reduced_words(bigger, L) >= count_reduced_words(a, L)

    def test_big_integers(self):
        assert count_words(BAutomaton.full(3), 60) == 6**60

    def test_growth(self):
        assert growth_rate_estimate(BAutomaton.full(2), 5) == 4
        assert growth_rate_estimate(BAutomaton.full(2), 5, reduced=True) == 3
        assert growth_rate_estimate(chain(), 5) == 1
        assert growth_rate_estimate(BAutomaton(2, 0, (15,) * 4), 4) == 0

    def test_batch_counts_agree(self):
        rng = np.random.default_rng(2)
        auts = [random_automaton(2, rng, 0.5) for _ in range(50)]
        masks = np.array([[a.sigma_empty, *a.sigma] for a in auts])
        for L in (1, 3, 6):
            got = batch_counts(masks, 2, L, reduced=False)
            assert got.tolist() == [count_words(a, L) for a in auts]
            got = batch_counts(masks, 2, L, reduced=True)
            assert got.tolist() == [count_reduced_words(a, L) for a in auts]


class TestEnumeration:
    def test_census(self):
        assert automaton_census(2) == 2**20 == 1_048_576
        assert large_census(2, THIRD) == 15 * 11**4 == 219_615

    def test_enumeration_matches_filter(self):
        arr = large_automata_array(2, THIRD)
        assert len(arr) == 219_615
        everything = all_automata_array(2)
        filt = everything[large_filter(everything, 2, THIRD)]
        assert sorted(map(tuple, filt.tolist())) == sorted(map(tuple, arr.tolist()))

    def test_stream(self):
        stream = enumerate_large_automata(2, THIRD)
        first = [next(stream) for _ in range(500)]
        assert all(is_lambda_large(a, THIRD) for a in first)
        assert len({a.fingerprint() for a in first}) == 500
        arr = large_automata_array(2, THIRD)
        assert [[a.sigma_empty, *a.sigma] for a in first] == arr[:500].tolist()

    def test_budget(self):
        with pytest.raises(AutomatonError):
            next(enumerate_large_automata(3, THIRD))

    def test_random_large(self):
        rng = np.random.default_rng(0)
        draws = [random_large_automaton(2, THIRD, rng) for _ in range(300)]
        assert all(is_lambda_large(a, THIRD) for a in draws)
        again = np.random.default_rng(0)
        assert draws[:5] == [random_large_automaton(2, THIRD, again) for _ in range(5)]

    def test_random_large_coverage(self):
        # the per-state choice reaches both extremes of every state
        rng = np.random.default_rng(1)
        seen = [set() for _ in range(5)]
        for _ in range(2000):
            a = random_large_automaton(2, THIRD, rng)
            for i, m in enumerate((a.sigma_empty, *a.sigma)):
                seen[i].add(m)
        assert len(seen[0]) == 15
        assert all(len(s) == 11 for s in seen[1:])


class TestSerialisation:
    def test_round_trip(self):
        for a in load_corpus():
            assert automaton_from_json(json.loads(json.dumps(automaton_to_json(a)))) == a

    def test_format(self):
        d = automaton_to_json(chain())
        assert d == {"n": 2, "sigma_empty": ["a"], "sigma": {"a": ["b"], "b": ["a"], "A": [], "B": []}}
