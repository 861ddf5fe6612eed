import json
import math

import numpy as np
import pytest

from certapprox import quadrature, target
from certapprox.approximate import ExtractionSettings
from certapprox.certificate import Construction, assemble
from certapprox.errors import (CertificateParseError, ConfigurationError,
                               ReconciliationFailureError, TopologyError)
from certapprox.glue import (DEFAULT_OVERLAP_FRACTION, Cover, LocalCertificate,
                             build_pou, check_overlap, extract_local, glue,
                             glued_from_dict, local_bspline_family, make_cover,
                             reconcile, serialize_glued, verify_glued)

EPS = 1e-2
LOCAL_SETTINGS = ExtractionSettings(0.5 * EPS)


@pytest.fixture(scope="module")
def sinpi():
    return target.from_builtin("sinpi")


@pytest.fixture(scope="module")
def cover3():
    return make_cover((0.0, 1.0), 3)


@pytest.fixture(scope="module")
def locals3(sinpi, cover3):
    return [extract_local(sinpi, i, p, local_bspline_family(p, 8), LOCAL_SETTINGS)
            for i, p in enumerate(cover3.patches)]


@pytest.fixture(scope="module")
def glued3(sinpi, cover3, locals3):
    return glue(sinpi, list(locals3), build_pou(cover3), EPS)


def _perturbed_local(sinpi, lc, bump=4e-4, at=2):
    """Reissue a local certificate with one coefficient shifted, the patch
    error re-measured honestly so the document itself stays valid."""
    new_terms = [(j, a + (bump if j == at else 0.0)) for j, a in lc.cert.terms]
    fam = local_bspline_family(lc.patch, 8)
    g = target.series(fam, new_terms)
    norm = quadrature.w12_norm(lc.patch)
    rule = quadrature.construction_rule(sinpi, [g], interval=lc.patch).refined(4)
    err = quadrature.norm_of_difference(sinpi, g, norm, rule)
    cert = assemble(sinpi.descriptor, fam, new_terms, norm, 0.5 * EPS, err,
                    Construction("gram_solve", "shifted for mismatch tests"))
    return LocalCertificate(lc.patch_index, lc.patch, cert)


# ----------------------------------------------------------------------------
# covers
# ----------------------------------------------------------------------------

def test_three_patch_cover_geometry(cover3):
    want = [(0.0, 11.0 / 30.0), (0.3, 0.7), (19.0 / 30.0, 1.0)]
    for (lo, hi), (wlo, whi) in zip(cover3.patches, want):
        assert lo == pytest.approx(wlo, abs=1e-15)
        assert hi == pytest.approx(whi, abs=1e-15)
    s, e = cover3.overlap(0)
    assert e - s == pytest.approx(1.0 / 15.0, abs=1e-15)
    assert cover3.overlap_fraction == DEFAULT_OVERLAP_FRACTION


def test_single_patch_cover_is_the_domain():
    c = make_cover((0.0, 1.0), 1)
    assert c.patches == ((0.0, 1.0),)
    assert c.m == 1


def test_consecutive_patches_must_overlap():
    with pytest.raises(TopologyError):
        Cover((0.0, 1.0), ((0.0, 0.4), (0.5, 1.0)), 0.2).overlap(0)


@pytest.mark.parametrize("domain,m,frac", [
    ((0.0, 1.0), 0, 0.2),
    ((0.0, 1.0), 3, 0.0),
    ((0.0, 1.0), 3, 0.51),
    ((1.0, 0.0), 3, 0.2),
    ((0.0, float("inf")), 3, 0.2),
])
def test_make_cover_rejects_bad_requests(domain, m, frac):
    with pytest.raises((ConfigurationError, TopologyError)):
        make_cover(domain, m, overlap_fraction=frac)


def test_cover_round_trips_through_its_dict(cover3):
    assert Cover.from_dict(cover3.to_dict()) == cover3


# ----------------------------------------------------------------------------
# partition of unity
# ----------------------------------------------------------------------------

def test_weights_sum_to_one_everywhere(cover3):
    pou = build_pou(cover3)
    xs = np.linspace(0.0, 1.0, 20001)
    total = np.zeros_like(xs)
    for i in range(cover3.m):
        w = pou.weight(i, xs)
        assert np.all(w >= 0.0) and np.all(w <= 1.0)
        total += w
    assert float(np.max(np.abs(total - 1.0))) <= 5e-15


def test_weight_vanishes_off_patch(cover3):
    pou = build_pou(cover3)
    xs = np.asarray([0.5, 0.9])
    assert np.all(pou.weight(0, xs) == 0.0)


def test_weight_derivative_matches_finite_differences(cover3):
    pou = build_pou(cover3)
    xs = np.asarray([0.31, 0.33, 0.5, 0.65, 0.69])
    h = 1e-7
    for i in range(3):
        fd = (pou.weight(i, xs + h) - pou.weight(i, xs - h)) / (2 * h)
        assert pou.weight_deriv(i, xs) == pytest.approx(fd, abs=1e-5)


def test_weight_derivatives_cancel(cover3):
    pou = build_pou(cover3)
    xs = np.linspace(0.01, 0.99, 997)
    total = sum(pou.weight_deriv(i, xs) for i in range(3))
    assert float(np.max(np.abs(total))) <= 1e-10


def test_ramp_slope_is_reciprocal_overlap_width(cover3):
    pou = build_pou(cover3)
    assert pou.max_ramp_slope(0) == pytest.approx(15.0, rel=1e-12)


# ----------------------------------------------------------------------------
# local extraction and overlap checks
# ----------------------------------------------------------------------------

def test_locals_use_the_full_patch_family(locals3):
    for lc in locals3:
        assert len(lc.cert.terms) == 10
        assert lc.cert.norm.kind == quadrature.W12


def test_local_errors_are_stable(locals3):
    got = [lc.cert.reported_error for lc in locals3]
    assert got[0] == pytest.approx(2.6709789524485514e-05, rel=1e-9)
    assert got[1] == pytest.approx(5.94362422046322e-05, rel=1e-9)
    assert got[2] == pytest.approx(got[0], rel=1e-6)


def test_extract_rejects_family_off_the_patch(sinpi):
    fam = local_bspline_family((0.0, 0.5), 8)
    with pytest.raises(ConfigurationError):
        extract_local(sinpi, 0, (0.0, 0.4), fam, LOCAL_SETTINGS)


def test_overlap_mismatch_of_honest_locals(locals3):
    got = check_overlap(locals3[0], locals3[1])
    assert got == pytest.approx(1.7764089962279127e-05, rel=1e-9)
    assert got < EPS / 6.0


def test_disjoint_patches_cannot_be_checked(locals3):
    with pytest.raises(TopologyError):
        check_overlap(locals3[0], locals3[2])


# ----------------------------------------------------------------------------
# reconciliation
# ----------------------------------------------------------------------------

def test_reconcile_leaves_compatible_locals_alone(sinpi, locals3, cover3):
    delta = EPS / (2 * cover3.m)
    child, rec = reconcile(sinpi, locals3[0], locals3[1], delta, LOCAL_SETTINGS)
    assert not rec.adjusted
    assert child.cert.digest == locals3[1].cert.digest
    assert rec.deltas == ()
    assert rec.post_mismatch == rec.pre_mismatch


def test_reconcile_pulls_a_shifted_patch_back(sinpi, locals3, cover3):
    delta = EPS / (2 * cover3.m)
    shifted = _perturbed_local(sinpi, locals3[1])
    assert check_overlap(locals3[0], shifted) >= delta
    child, rec = reconcile(sinpi, locals3[0], shifted, delta, LOCAL_SETTINGS)
    assert rec.adjusted
    assert rec.pre_mismatch == pytest.approx(2.010795544201116e-03, rel=1e-8)
    assert rec.post_mismatch == pytest.approx(1.1410015434055295e-05, rel=1e-6)
    assert rec.post_mismatch < delta
    worst = max(abs(d) for _, d in rec.deltas)
    assert worst == pytest.approx(3.9766909404526096e-04, rel=1e-6)
    assert worst < delta
    assert child.cert.genealogy == (shifted.cert.digest,)
    assert child.cert.construction.stopping.endswith("; reconciled")
    assert child.cert.reported_error < 0.5 * EPS


def test_reconcile_only_touches_overlap_supported_terms(sinpi, locals3, cover3):
    delta = EPS / (2 * cover3.m)
    shifted = _perturbed_local(sinpi, locals3[1])
    child, rec = reconcile(sinpi, locals3[0], shifted, delta, LOCAL_SETTINGS)
    touched = {j for j, _ in rec.deltas}
    fam = local_bspline_family(shifted.patch, 8)
    s, e = cover3.overlap(0)
    for j in touched:
        lo, hi = fam.element(j).support()
        assert lo < e and hi > s


def test_reconcile_fails_on_an_unreachable_gate(sinpi, locals3):
    shifted = _perturbed_local(sinpi, locals3[1])
    with pytest.raises(ReconciliationFailureError):
        reconcile(sinpi, locals3[0], shifted, 1e-9, LOCAL_SETTINGS)


# ----------------------------------------------------------------------------
# gluing
# ----------------------------------------------------------------------------

def test_glued_report_and_overhead_constant(glued3):
    assert glued3.reported_error == pytest.approx(6.72633204877917e-05, rel=1e-9)
    assert glued3.reported_error < EPS
    assert glued3.c_pu == pytest.approx(13.0, rel=1e-12)
    assert glued3.bound_estimate == pytest.approx(6.505943624220469e-02, rel=1e-9)
    assert glued3.reported_error <= glued3.bound_estimate


def test_genealogy_lists_the_original_locals(glued3, locals3):
    assert glued3.genealogy == tuple(lc.cert.digest for lc in locals3)
    assert glued3.parents == ()


def test_glued_approximant_tracks_the_target(glued3, sinpi):
    g = glued3.approximant()
    xs = np.linspace(0.0, 1.0, 4001)
    dev = float(np.max(np.abs(g.evaluate(xs) - sinpi.evaluate(xs))))
    assert dev < EPS


def test_single_patch_glue_embeds_the_local_verbatim(sinpi):
    cover = make_cover((0.0, 1.0), 1)
    lc = extract_local(sinpi, 0, cover.patches[0],
                       local_bspline_family(cover.patches[0], 8), LOCAL_SETTINGS)
    g = glue(sinpi, [lc], build_pou(cover), EPS)
    assert g.locals[0].cert.digest == lc.cert.digest
    assert g.c_pu == 1.0
    xs = np.linspace(0.0, 1.0, 2001)
    blended = g.approximant().evaluate(xs)
    assert np.array_equal(blended, lc.series().evaluate(xs))


def test_five_patch_glue_still_verifies(sinpi):
    cover = make_cover((0.0, 1.0), 5)
    ls = [extract_local(sinpi, i, p, local_bspline_family(p, 8), LOCAL_SETTINGS)
          for i, p in enumerate(cover.patches)]
    g = glue(sinpi, ls, build_pou(cover), EPS)
    assert g.reported_error == pytest.approx(1.548627353208248e-05, rel=1e-8)
    assert verify_glued(g, sinpi).verdict


def test_glue_reconciles_a_shifted_member(sinpi, locals3, cover3):
    shifted = _perturbed_local(sinpi, locals3[1])
    g = glue(sinpi, [locals3[0], shifted, locals3[2]], build_pou(cover3), EPS)
    assert [(r.pair, r.adjusted) for r in g.records] == [((0, 1), True),
                                                         ((1, 2), False)]
    assert len(g.parents) == 1
    assert g.parents[0].digest == shifted.cert.digest
    assert g.genealogy[1] == shifted.cert.digest
    assert verify_glued(g, sinpi).verdict


def test_glue_rejects_oversized_local_budgets(sinpi, cover3):
    loose = ExtractionSettings(0.9 * EPS)
    ls = [extract_local(sinpi, i, p, local_bspline_family(p, 8), loose)
          for i, p in enumerate(cover3.patches)]
    with pytest.raises(ConfigurationError):
        glue(sinpi, ls, build_pou(cover3), EPS)


def test_glue_rejects_locals_from_another_cover(sinpi, locals3):
    other = make_cover((0.0, 1.0), 3, overlap_fraction=0.3)
    with pytest.raises(ConfigurationError):
        glue(sinpi, list(locals3), build_pou(other), EPS)


# ----------------------------------------------------------------------------
# serialization and verification
# ----------------------------------------------------------------------------

def test_glued_document_round_trips(glued3):
    data = serialize_glued(glued3)
    again = glued_from_dict(json.loads(data))
    assert serialize_glued(again) == data
    assert again.digest == glued3.digest


def test_glued_parse_rejects_wrong_kind(glued3):
    doc = json.loads(serialize_glued(glued3))
    doc["kind"] = "approximation"
    with pytest.raises(CertificateParseError):
        glued_from_dict(doc)


def test_verify_glued_passes_and_recomputes(glued3, sinpi):
    rep = verify_glued(glued3, sinpi)
    assert rep.verdict
    assert rep.recomputed_error == pytest.approx(glued3.reported_error, rel=1e-6)
    assert rep.method.startswith("composite_gl16x")


def test_verify_glued_catches_tampering(glued3, sinpi):
    doc = json.loads(serialize_glued(glued3))
    doc["reported_error"] = glued3.reported_error / 2.0
    forged = glued_from_dict(doc)
    rep = verify_glued(forged, sinpi)
    assert not rep.verdict
    assert not rep.structural_ok
    assert any("digest" in n for n in rep.notes)


def test_verify_glued_checks_each_member(glued3, sinpi):
    doc = json.loads(serialize_glued(glued3))
    doc["locals"][1]["certificate"]["reported_error"] = 1e-12
    forged = glued_from_dict(doc)
    assert not verify_glued(forged, sinpi).verdict
