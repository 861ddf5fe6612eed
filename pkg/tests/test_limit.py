import json
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from certapprox.errors import (CertificateParseError, ConfigurationError,
                               EvidenceContradictionError)
from certapprox.limit import (LADDER_RUNGS, Modulus, check_pair,
                              dyadic_modulus, exact_ceil_log2, exact_pair_sup,
                              frac_str, limit_from_dict, parse_frac,
                              partial_sum_exact, serialize_limit,
                              tent_certificate, tent_sequence,
                              tent_value_exact, transfer, verify_limit)


@pytest.fixture(scope="module")
def lim_milli():
    return transfer(tent_sequence(), 1e-3)


# ----------------------------------------------------------------------------
# exact arithmetic helpers
# ----------------------------------------------------------------------------

def test_fraction_strings_round_trip():
    q = Fraction(85, 1024)
    assert frac_str(q) == "85/1024"
    assert parse_frac("85/1024") == q
    assert parse_frac(frac_str(Fraction(-3, 7))) == Fraction(-3, 7)


@given(num=st.integers(min_value=1, max_value=10 ** 12),
       den=st.integers(min_value=1, max_value=10 ** 12))
@settings(max_examples=200, deadline=None)
def test_ceil_log2_is_the_least_covering_power(num, den):
    q = Fraction(num, den)
    n = exact_ceil_log2(q)
    covering = Fraction(2) ** n
    assert covering >= q
    assert covering / 2 < q


@pytest.mark.parametrize("q,want", [
    (Fraction(1), 0), (Fraction(2), 1), (Fraction(3), 2), (Fraction(4), 2),
    (Fraction(1, 2), -1), (Fraction(1, 3), -1), (Fraction(5, 4), 1),
    (Fraction(9), 4),
])
def test_ceil_log2_cases(q, want):
    assert exact_ceil_log2(q) == want


def test_tent_values_are_rational():
    assert tent_value_exact(2, Fraction(3, 16)) == Fraction(1, 2)
    assert tent_value_exact(0, Fraction(1, 2)) == 1
    assert partial_sum_exact(3, Fraction(1, 2)) == 1


@pytest.mark.parametrize("pair,want", [
    ((1, 2), "1/4"),
    ((3, 4), "1/16"),
    ((3, 11), "85/1024"),
    ((12, 20), "85/524288"),
])
def test_pair_sups_are_exact(pair, want):
    assert frac_str(exact_pair_sup(*pair)) == want


@given(n=st.integers(min_value=1, max_value=10),
       gap=st.integers(min_value=1, max_value=8))
@settings(max_examples=60, deadline=None)
def test_pair_sup_lands_in_the_dyadic_window(n, gap):
    """|S_n - S_m| always lies in [1/2, 2/3] * 2^-n: one missing tent gives
    the floor, the full alternating stack approaches two thirds."""
    s = exact_pair_sup(n, n + gap)
    assert Fraction(1, 2) * Fraction(2) ** -n <= s
    assert s <= Fraction(2, 3) * Fraction(2) ** -n


def test_pair_sup_needs_an_ordered_pair():
    with pytest.raises(ConfigurationError):
        exact_pair_sup(4, 4)
    with pytest.raises(ConfigurationError):
        exact_pair_sup(5, 3)


# ----------------------------------------------------------------------------
# sequence members
# ----------------------------------------------------------------------------

def test_member_certificates_copy_the_terms_exactly():
    c = tent_certificate(3)
    assert c.terms == ((0, 1.0), (1, 0.5), (2, 0.25), (3, 0.125))
    assert c.reported_error == 0.0
    assert c.construction.method == "exact_representation"
    assert c.construction.supnorm_method == "breakpoint_sup"
    assert c.target_descriptor == "series:tent:n=3"


def test_sequence_member_accessor_guards_the_index():
    seq = tent_sequence()
    assert seq.member(2).terms[-1] == (2, 0.25)
    assert seq.member(0).terms == ((0, 1.0),)
    with pytest.raises(ConfigurationError):
        seq.member(-1)


def test_generator_failures_surface_as_incomplete_sequence():
    from certapprox.errors import IncompleteSequenceError

    def broken(n):
        raise RuntimeError("backing data lost")

    seq = tent_sequence()
    hollow = type(seq)(seq.name, broken, seq.modulus, seq.pair_sup)
    with pytest.raises(IncompleteSequenceError):
        hollow.member(4)


def test_check_pair_seals_honest_evidence():
    seq = tent_sequence()
    rec = check_pair(seq, 3, 4, Fraction(1, 8))
    assert rec.pair == (3, 4)
    assert rec.measured == "1/16"
    assert len(rec.digest) == 64


def test_check_pair_raises_on_a_false_bound():
    seq = tent_sequence()
    with pytest.raises(EvidenceContradictionError) as e:
        check_pair(seq, 3, 4, Fraction(1, 32))
    assert e.value.pair == (3, 4)
    assert e.value.measured == "1/16"


# ----------------------------------------------------------------------------
# transfer
# ----------------------------------------------------------------------------

@pytest.mark.parametrize("eps,n_star", [(0.5, 3), (0.125, 5), (1e-3, 12)])
def test_anchor_depth_follows_the_modulus(eps, n_star):
    lim = transfer(tent_sequence(), eps)
    assert lim.n_star == n_star
    assert len(lim.members) == n_star
    assert parse_frac(lim.tail_bound) == Fraction(1, 2 ** n_star)
    assert parse_frac(lim.tail_bound) <= parse_frac(lim.tail_budget)


def test_transfer_milli_shape(lim_milli):
    lim = lim_milli
    assert lim.n_star == 12
    assert len(lim.ladder) == LADDER_RUNGS
    assert len(lim.genealogy) == lim.n_star + LADDER_RUNGS + 1
    assert lim.tail_bound == "1/4096"
    assert lim.tail_budget == frac_str(Fraction(1e-3) / 2)
    assert lim.reported_error == 0.000244140625
    assert lim.reported_error == 2.0 ** -12
    assert lim.proxy_depth == 24
    assert lim.proxy_tail == "1/16777216"
    assert lim.ladder[0].pair == (12, 13)
    assert lim.ladder[0].measured == "1/8192"


def test_genealogy_orders_members_then_evidence_then_modulus(lim_milli):
    lim = lim_milli
    want = tuple(m.digest for m in lim.members)
    want += tuple(e.digest for e in lim.ladder)
    want += (lim.modulus_record.digest,)
    assert lim.genealogy == want


def test_transfer_rejects_out_of_range_tolerances():
    seq = tent_sequence()
    for eps in (0.0, -0.25, 1.0, 2.0):
        with pytest.raises(ConfigurationError):
            transfer(seq, eps)


def test_understated_modulus_is_contradicted_by_the_ladder():
    """A modulus claiming depth 1 suffices for every tolerance gets caught on
    the very first rung: the (1, 2) gap measures exactly 1/4."""
    bad = tent_sequence(Modulus("constant 1", lambda q: 1))
    with pytest.raises(EvidenceContradictionError) as e:
        transfer(bad, 1e-3)
    assert e.value.pair == (1, 2)
    assert e.value.measured == "1/4"


def test_proxy_terms_follow_the_dyadic_law(lim_milli):
    for k, a in lim_milli.proxy_terms:
        assert a == 2.0 ** -k


# ----------------------------------------------------------------------------
# verification and serialization
# ----------------------------------------------------------------------------

def test_verify_limit_passes(lim_milli):
    rep = verify_limit(lim_milli)
    assert rep.verdict
    assert rep.method == "exact_dyadic_tail"
    assert rep.recomputed_error == lim_milli.reported_error


def test_limit_round_trips_byte_identically(lim_milli):
    data = serialize_limit(lim_milli)
    again = limit_from_dict(json.loads(data))
    assert serialize_limit(again) == data
    assert verify_limit(again).verdict


def test_doctored_ladder_rung_fails_verification(lim_milli):
    doc = json.loads(serialize_limit(lim_milli))
    doc["ladder"][3]["measured"] = "1/1000000"
    forged = limit_from_dict(doc)
    rep = verify_limit(forged)
    assert not rep.verdict
    assert not rep.structural_ok


def test_doctored_tail_fails_verification(lim_milli):
    doc = json.loads(serialize_limit(lim_milli))
    doc["tail_bound"] = "1/1000000000"
    rep = verify_limit(limit_from_dict(doc))
    assert not rep.verdict


def test_unknown_modulus_rule_is_flagged(lim_milli):
    doc = json.loads(serialize_limit(lim_milli))
    doc["modulus"]["rule"] = "oracle says so"
    rep = verify_limit(limit_from_dict(doc))
    assert not rep.verdict
    assert any("modulus" in n for n in rep.notes)


def test_limit_parse_rejects_wrong_kind(lim_milli):
    doc = json.loads(serialize_limit(lim_milli))
    doc["kind"] = "glued"
    with pytest.raises(CertificateParseError):
        limit_from_dict(doc)


def test_dyadic_modulus_matches_the_named_rule():
    mod = dyadic_modulus()
    assert mod(Fraction(1, 4)) == 3
    assert mod(Fraction(1, 2)) == 2
    assert mod(Fraction(1e-3) / 2) == 12
