import itertools
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from randfa.automata import (
    BAutomaton,
    EAutomaton,
    accepts,
    accepts_e,
    is_lambda_eps_large,
    is_lambda_large,
    iter_language,
    size_threshold,
    strict_threshold,
)
from randfa.certificate import (
    CYCLIC_EPS,
    CYCLIC_LAMBDA,
    FA_LAMBDA,
    Status,
    Timeout,
    WeightFunction,
    abelianization_free_rank,
    admits_Z_epimorphism,
    check_all_large_intersect,
    epimorphism_automaton,
    fa_certificate,
    fa_certificate_cyclic,
    find_avoiding_b_automaton,
    find_avoiding_e_automaton,
    rational_rank,
    witness_is_valid,
)
from randfa.words import Alphabet, Presentation, is_reduced, iter_reduced, sample_reduced

from oracles import brute_avoidable, random_covering_presentation, random_small_presentation

AB = Alphabet(2)


def pres(*words, n=2):
    return Presentation(n, tuple(Alphabet(n).parse_word(w) for w in words))


def b_caps(n, lam):
    m = 2 * n
    return [m - 1] + [m - size_threshold(lam, n)] * m


def e_caps(n, lam, eps):
    return b_caps(n, lam) + [2 * n - strict_threshold(Fraction(1, 2) - eps, n)] * (2 * n)


ALL_LENGTH_TWO = Presentation(2, tuple(iter_reduced(2, 2)))


class TestConstants:
    def test_cyclic_parameters(self):
        assert CYCLIC_EPS == Fraction(1, 18)
        assert CYCLIC_LAMBDA == Fraction(5, 18) == Fraction(1, 4) + CYCLIC_EPS / 2
        assert FA_LAMBDA == Fraction(1, 3)


class TestEnumerationRoute:
    def test_all_length_two(self):
        assert check_all_large_intersect(ALL_LENGTH_TWO, FA_LAMBDA)
        assert fa_certificate(ALL_LENGTH_TWO).status is Status.CERTIFIED

    def test_empty(self):
        v = fa_certificate(Presentation(2, ()))
        assert v.status is Status.NOT_CERTIFIED and witness_is_valid(v, Presentation(2, ()))

    def test_single_word(self):
        p = pres("aba")
        v = fa_certificate(p)
        assert v.status is Status.NOT_CERTIFIED and v.method == "enumeration"
        assert witness_is_valid(v, p)
        assert not accepts(v.witness, AB.parse_word("aba"))
        # the exhibited witness from the worked example
        example = BAutomaton(2, 1 << AB.parse_letter("b"), (15,) * 4)
        assert is_lambda_large(example, FA_LAMBDA) and not accepts(example, AB.parse_word("aba"))

    def test_single_letters(self):
        assert fa_certificate(pres("a", "A", "b", "B")).certified


class TestSearch:
    def test_all_length_two(self):
        assert find_avoiding_b_automaton(ALL_LENGTH_TWO, FA_LAMBDA) is None
        assert fa_certificate(ALL_LENGTH_TWO, method="search").certified

    def test_large_alphabet_single_relator(self):
        p = pres("abcde", n=5)
        a = find_avoiding_b_automaton(p, FA_LAMBDA)
        assert isinstance(a, BAutomaton) and is_lambda_large(a, FA_LAMBDA)
        assert not accepts(a, p.relators[0])
        full = (1 << 10) - 1
        removed = sum(bin(full & ~m).count("1") for m in (a.sigma_empty, *a.sigma))
        assert removed == 1

    def test_timeout_is_a_value(self):
        rng = np.random.default_rng(0)
        p = Presentation(3, tuple(sample_reduced(3, 3, rng) for _ in range(200)))
        v = fa_certificate(p, budget=5)
        assert v.status is Status.UNKNOWN and v.witness is None
        assert isinstance(find_avoiding_b_automaton(p, FA_LAMBDA, budget=5), Timeout)

    def test_agrees_with_enumeration(self):
        rng = np.random.default_rng(99)
        statuses = set()
        for i in range(60):
            p = random_covering_presentation(rng) if i % 2 else random_small_presentation(rng)
            e = fa_certificate(p, method="enumeration")
            s = fa_certificate(p, method="search")
            assert e.status == s.status
            statuses.add(e.status)
            for v in (e, s):
                if v.status is Status.NOT_CERTIFIED:
                    assert witness_is_valid(v, p)
        assert statuses == {Status.CERTIFIED, Status.NOT_CERTIFIED}

    @settings(max_examples=150)
    @given(st.integers(2, 3), st.lists(st.lists(st.integers(0, 5), min_size=1, max_size=4), max_size=6))
    def test_b_search_matches_choice_oracle(self, n, raw):
        rels = tuple(tuple(x % (2 * n) for x in r) for r in raw)
        rels = tuple(r for r in rels if is_reduced(r, n))
        p = Presentation(n, rels)
        found = find_avoiding_b_automaton(p, FA_LAMBDA)
        assert (found is not None) == brute_avoidable(n, rels, b_caps(n, FA_LAMBDA))
        if found is not None:
            assert is_lambda_large(found, FA_LAMBDA)
            assert not any(accepts(found, r) for r in rels)

    @settings(max_examples=150)
    @given(st.lists(st.lists(st.integers(0, 3), min_size=1, max_size=5), max_size=8))
    def test_e_search_matches_choice_oracle(self, raw):
        rels = tuple(tuple(r) for r in raw if is_reduced(tuple(r), 2))
        p = Presentation(2, rels)
        found = find_avoiding_e_automaton(p, CYCLIC_LAMBDA, CYCLIC_EPS, min_length=1)
        want = brute_avoidable(2, rels, e_caps(2, CYCLIC_LAMBDA, CYCLIC_EPS), final_slots=True)
        assert (found is not None) == want
        if found is not None:
            assert isinstance(found, EAutomaton)
            assert is_lambda_eps_large(found, CYCLIC_LAMBDA, CYCLIC_EPS)
            assert not any(accepts_e(found, r) for r in rels)


class TestCyclic:
    def test_short_relators_ignored(self):
        p = Presentation(2, tuple(iter_reduced(2, 2)))
        v = fa_certificate_cyclic(p)
        assert v.status is Status.NOT_CERTIFIED
        assert witness_is_valid(v, p, min_length=3)

    def test_witness_is_e_automaton(self):
        p = pres("abab", "baBA", "aab")
        v = fa_certificate_cyclic(p)
        assert v.lam == Fraction(5, 18) and v.eps == Fraction(1, 18)
        assert isinstance(v.witness, EAutomaton) and witness_is_valid(v, p, min_length=3)

    def test_all_length_three_cyclic_words(self):
        words = [w for w in iter_reduced(2, 3) if w[0] != (w[-1] + 2) % 4]
        v = fa_certificate_cyclic(Presentation(2, tuple(words)))
        assert v.status in (Status.CERTIFIED, Status.NOT_CERTIFIED)
        if v.status is Status.NOT_CERTIFIED:
            assert witness_is_valid(v, Presentation(2, tuple(words)), min_length=3)


class TestMonotone:
    @settings(max_examples=30)
    @given(st.integers(0, 2**32), st.lists(st.integers(0, 3), min_size=1, max_size=5))
    def test_superset_keeps_certified(self, seed, extra):
        rng = np.random.default_rng(seed)
        p = random_covering_presentation(rng, drop=0.0)
        assert fa_certificate(p).certified
        if is_reduced(tuple(extra), 2):
            assert fa_certificate(p.with_relators([tuple(extra)])).certified


class TestEpimorphisms:
    def test_example(self):
        a = epimorphism_automaton(2, WeightFunction((1, 0)))
        x, b, B = AB.parse_letter("a"), AB.parse_letter("b"), AB.parse_letter("B")
        assert a.sigma_empty == 1 << x
        assert all(m == (1 << x) | (1 << b) | (1 << B) for m in a.sigma)
        assert is_lambda_large(a, Fraction(1, 2))

    def test_zero_weight(self):
        with pytest.raises(ValueError):
            epimorphism_automaton(2, WeightFunction((0, 0)))

    @given(st.lists(st.integers(-3, 3), min_size=2, max_size=3).filter(any))
    def test_positive_weight(self, psi):
        n = len(psi)
        wf = WeightFunction(tuple(psi))
        a = epimorphism_automaton(n, wf)
        assert is_lambda_large(a, Fraction(1, 2))
        for L in range(1, 5 if n == 3 else 7):
            for w in iter_language(a, L):
                assert wf.word_weight(w) > 0

    def test_rank_examples(self):
        assert admits_Z_epimorphism(pres("ab"))
        assert not admits_Z_epimorphism(pres("a", "b"))
        assert admits_Z_epimorphism(Presentation(2, ()))
        assert abelianization_free_rank(pres("aab", "abb")) == 0

    @given(st.lists(st.lists(st.integers(-4, 4), min_size=3, max_size=3), max_size=5))
    def test_rank_matches_minors(self, rows):
        # rank = largest k with a nonzero k x k minor
        def det(m):
            if not m:
                return 1
            return sum((-1) ** j * m[0][j] * det([r[:j] + r[j + 1:] for r in m[1:]]) for j in range(len(m)))

        want = 0
        for k in range(1, 4):
            for rs in itertools.combinations(rows, k):
                for cs in itertools.combinations(range(3), k):
                    if det([[r[c] for c in cs] for r in rs]):
                        want = k
        assert rational_rank(rows) == want

    def test_certified_implies_no_epimorphism(self):
        rng = np.random.default_rng(5)
        seen = 0
        for _ in range(40):
            p = random_covering_presentation(rng)
            if fa_certificate(p).certified:
                seen += 1
                assert not admits_Z_epimorphism(p)
        assert seen > 0
