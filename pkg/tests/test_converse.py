import itertools
import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tccode import converse as C
from tccode import dictionary as D
from tccode import models as M
from tccode import qtypes as Q


BERN = M.bernoulli()
GRID = Q.construction_grid()


def tunstall3():
    return D.build_tunstall(BERN, [math.log2(0.3 / 0.7)], 3)


def test_hand_case_tunstall_m3_n2():
    d = tunstall3()
    code = C.vf_to_fv(d, 2)
    assert code.base_width == 2
    assert code.pruned_segments == ((0, 0), (0, 1), (1,))
    # The only short parse is the word starting with letter 1.
    assert C.fv_length(code, (1, 0)) == 3
    assert C.fv_length(code, (0, 0)) == 2
    assert C.fv_length(code, (0, 1)) == 2
    report = C.check_event_equivalence(d, 2)
    assert report.passed and report.exhaustive and report.checked == 4
    theta = [math.log2(0.3 / 0.7)]
    assert C.vf_short_mass(d, theta, 2) == pytest.approx(0.3, abs=1e-12)
    assert C.fv_overflow_mass(code, theta) == pytest.approx(0.3, abs=1e-12)


def test_full_depth_pruning_is_trivial():
    d = tunstall3()
    n = d.max_segment_length()
    code = C.vf_to_fv(d, n)
    assert code.pruned_segments == d.segments
    for word in itertools.product(range(2), repeat=n):
        assert C.fv_length(code, word) <= code.base_width + (
            n - 1) * code.per_letter_suffix_bits
    report = C.check_event_equivalence(d, n)
    assert report.passed


def test_pruned_leaves_at_most_n():
    _, d = D.choose_gamma(BERN, GRID, 64)
    for n in (2, 4, 8):
        code = C.vf_to_fv(d, n)
        assert max(len(s) for s in code.pruned_segments) <= n
        assert code.leaf_count <= d.size


def test_fv_codewords_prefix_free_and_decodable():
    _, d = D.choose_gamma(BERN, GRID, 16)
    n = 5
    code = C.vf_to_fv(d, n)
    words = list(itertools.product(range(2), repeat=n))
    codewords = {}
    for word in words:
        bits = C.fv_codeword(code, word)
        assert len(bits) == C.fv_length(code, word)
        codewords[word] = bits
    # Fixed-to-variable prefix code on length-n inputs must be injective and
    # prefix-free.
    values = sorted(codewords.values())
    assert len(set(values)) == len(values)
    for a, b in zip(values, values[1:]):
        assert not b.startswith(a)


def test_parse_depth_validates_length():
    d = tunstall3()
    code = C.vf_to_fv(d, 3)
    with pytest.raises(D.DictionaryError):
        code.parse_depth((0,))


def test_mass_identity_exact():
    _, d = D.choose_gamma(BERN, GRID, 64)
    for n in (3, 6, 10):
        code = C.vf_to_fv(d, n)
        for theta in (-2.0, 0.0, 1.0):
            short = C.vf_short_mass(d, [theta], n)
            over = C.fv_overflow_mass(code, [theta])
            assert short == pytest.approx(over, abs=1e-12)


def test_sampled_equivalence_branch():
    _, d = D.choose_gamma(BERN, GRID, 64)
    report = C.check_event_equivalence(d, 20, exhaustive_cap=100,
                                       sample_budget=200, theta=[-2.0])
    assert not report.exhaustive
    assert report.checked == 200
    assert report.passed


@settings(max_examples=20, deadline=None)
@given(st.integers(min_value=2, max_value=32), st.integers(min_value=1, max_value=10))
def test_equivalence_property(m, n):
    d = D.build_tunstall(BERN, [-1.0], m)
    report = C.check_event_equivalence(d, n)
    assert report.passed
