import math

import numpy as np
import pytest
import scipy.special

from certapprox import quadrature, target
from certapprox.approximate import (ExtractionSettings, approximate_chebyshev,
                                    approximate_gram, approximate_greedy,
                                    approximate_orthonormal,
                                    approximate_raw_probe,
                                    chebyshev_coefficients)
from certapprox.basis import (chebyshev_family, cubic_bspline_family,
                              fourier_sine_family, monomial_family)
from certapprox.certificate import verify
from certapprox.errors import (ConfigurationError, IllConditionedBasisError,
                               NoProgressError, ToleranceViolated)


# ----------------------------------------------------------------------------
# orthonormal probes
# ----------------------------------------------------------------------------

def test_probe_recovers_a_pure_mode_in_one_term():
    f = target.from_builtin("sinpi")
    cert = approximate_orthonormal(f, fourier_sine_family(),
                                   ExtractionSettings(1e-6))
    assert len(cert.terms) == 1
    j, a = cert.terms[0]
    assert j == 1
    assert a == pytest.approx(1.0 / math.sqrt(2.0), rel=1e-14)
    assert cert.reported_error < 1e-14
    assert cert.construction.method == "orthonormal_probe"
    assert "parseval" in cert.construction.stopping


def test_probe_sawtooth_tail_reaches_eighty_one_terms():
    """Closed form a_j = sqrt(2) (-1)^(j+1) / (j pi); the Parseval ledger for
    the identity target crosses 0.05 exactly between N=80 and N=81."""
    f = target.from_builtin("linear")
    cert = approximate_orthonormal(f, fourier_sine_family(),
                                   ExtractionSettings(0.05, max_terms=200))
    assert len(cert.terms) == 81
    assert cert.reported_error == pytest.approx(0.04986359615804239, rel=1e-10)
    for j, a in cert.terms[:6]:
        want = math.sqrt(2.0) * (-1.0) ** (j + 1) / (j * math.pi)
        assert a == pytest.approx(want, rel=1e-12), j


def test_probe_rejects_non_orthonormal_families():
    f = target.from_builtin("exp")
    with pytest.raises(ConfigurationError):
        approximate_orthonormal(f, chebyshev_family(), ExtractionSettings(0.1))


def test_probe_raises_when_budget_runs_out():
    f = target.from_builtin("linear")
    with pytest.raises(ToleranceViolated) as e:
        approximate_orthonormal(f, fourier_sine_family(),
                                ExtractionSettings(0.05, max_terms=40))
    assert e.value.achieved > 0.05


# ----------------------------------------------------------------------------
# gram solve
# ----------------------------------------------------------------------------

def test_gram_solve_hits_frozen_spline_error():
    f = target.from_builtin("sinpi")
    fam = cubic_bspline_family(12)
    cert = approximate_gram(f, fam.interior_elements(), quadrature.w12_norm(),
                            ExtractionSettings(1e-3))
    assert cert.reported_error == pytest.approx(5.595343593589852e-4, rel=1e-10)
    assert len(cert.terms) == 10
    assert [j for j, _ in cert.terms] == list(range(2, 12))
    assert verify(cert, f).verdict


def test_gram_solve_orders_terms_by_index():
    f = target.from_builtin("sinpi")
    fam = cubic_bspline_family(8)
    els = list(fam.interior_elements())[::-1]
    cert = approximate_gram(f, els, quadrature.w12_norm(),
                            ExtractionSettings(0.1))
    idx = [j for j, _ in cert.terms]
    assert idx == sorted(idx)


def test_gram_solve_refuses_a_singular_dictionary():
    f = target.from_builtin("sinpi")
    fam = cubic_bspline_family(8)
    e = fam.element(3)
    with pytest.raises(IllConditionedBasisError) as exc:
        approximate_gram(f, [e, e], quadrature.w12_norm(),
                         ExtractionSettings(0.1))
    assert exc.value.condition > 1e12 or math.isinf(exc.value.condition)


def test_gram_solve_condition_gate_on_monomials():
    """High-degree monomials on a short interval blow past the threshold."""
    f = target.from_builtin("exp")
    fam = monomial_family((0.0, 0.1))
    els = [fam.element(j) for j in range(0, 14)]
    with pytest.raises(IllConditionedBasisError):
        approximate_gram(f, els, quadrature.l2_norm((0.0, 0.1)),
                         ExtractionSettings(1e-10))


def test_mixed_families_are_rejected():
    f = target.from_builtin("sinpi")
    a = cubic_bspline_family(8).element(3)
    b = fourier_sine_family().element(1)
    with pytest.raises(ConfigurationError):
        approximate_gram(f, [a, b], quadrature.l2_norm(),
                         ExtractionSettings(0.1))
    with pytest.raises(ConfigurationError):
        approximate_gram(f, [], quadrature.l2_norm(), ExtractionSettings(0.1))


# ----------------------------------------------------------------------------
# raw probes
# ----------------------------------------------------------------------------

def test_raw_probe_misses_on_correlated_elements():
    """Splines overlap, so probe coefficients without the gram correction
    land far from the best fit; the violation reports the achieved error."""
    f = target.from_builtin("sinpi")
    fam = cubic_bspline_family(12)
    with pytest.raises(ToleranceViolated) as e:
        approximate_raw_probe(f, fam.interior_elements(), quadrature.w12_norm(),
                              ExtractionSettings(1e-3))
    assert e.value.achieved == pytest.approx(0.3906005470835479, rel=1e-10)


def test_raw_probe_matches_gram_on_an_orthonormal_family():
    f = target.from_builtin("linear")
    fam = fourier_sine_family()
    els = [fam.element(j) for j in range(1, 4)]
    raw = approximate_raw_probe(f, els, quadrature.l2_norm(),
                                ExtractionSettings(0.5))
    grm = approximate_gram(f, els, quadrature.l2_norm(),
                           ExtractionSettings(0.5))
    for (ja, a), (jb, b) in zip(raw.terms, grm.terms):
        assert ja == jb
        assert a == pytest.approx(b, abs=1e-13)


# ----------------------------------------------------------------------------
# weighted chebyshev pipeline
# ----------------------------------------------------------------------------

def test_chebyshev_coefficients_match_bessel_oracle():
    """For exp on [-1, 1] the weighted coefficients are modified Bessel
    values: a_0 = I_0(1), a_j = 2 I_j(1). scipy supplies the oracle."""
    f = target.from_builtin("exp")
    got = chebyshev_coefficients(f, 6)
    want = [float(scipy.special.iv(0, 1.0))] + [
        float(2.0 * scipy.special.iv(j, 1.0)) for j in range(1, 7)]
    assert got == pytest.approx(want, rel=1e-13)


def test_chebyshev_pipeline_exp_degree_four():
    f = target.from_builtin("exp")
    cert = approximate_chebyshev(f, 4, ExtractionSettings(5e-3))
    assert len(cert.terms) == 5
    assert cert.reported_error == pytest.approx(0.0011826257944279272, rel=1e-10)
    assert cert.norm.kind == quadrature.SUP
    assert cert.construction.supnorm_method.startswith("cheb_grid_")
    assert verify(cert, f).verdict


def test_chebyshev_report_upper_bounds_a_fine_scan():
    f = target.from_builtin("exp")
    cert = approximate_chebyshev(f, 4, ExtractionSettings(5e-3))
    g = target.series(chebyshev_family(), list(cert.terms))
    xs = np.linspace(-1.0, 1.0, 20001)
    fine = float(np.max(np.abs(f.evaluate(xs) - g.evaluate(xs))))
    assert fine <= cert.reported_error


def test_chebyshev_degree_gate():
    f = target.from_builtin("exp")
    with pytest.raises(ToleranceViolated):
        approximate_chebyshev(f, 1, ExtractionSettings(1e-4))
    with pytest.raises(ConfigurationError):
        approximate_chebyshev(f, -1, ExtractionSettings(1e-4))


# ----------------------------------------------------------------------------
# matching pursuit
# ----------------------------------------------------------------------------

def test_greedy_breaks_ties_toward_the_lowest_index():
    fam = fourier_sine_family()
    mix = target.series(fam, [(1, 0.5), (2, 0.5)])
    cert = approximate_greedy(mix, [fam.element(i) for i in range(1, 5)],
                              quadrature.l2_norm(), ExtractionSettings(1e-8))
    assert [j for j, _ in cert.terms] == [1, 2]
    assert cert.terms[0][1] == pytest.approx(0.5, abs=1e-12)
    assert cert.reported_error < 1e-12


def test_greedy_stalls_outside_the_span():
    """One orthogonal dictionary element cannot reduce the residual, so the
    stall counter trips instead of looping to the term budget."""
    fam = fourier_sine_family()
    f = target.from_builtin("linear")
    with pytest.raises(NoProgressError):
        approximate_greedy(f, [fam.element(2)], quadrature.l2_norm(),
                           ExtractionSettings(1e-6, max_terms=50))


def test_greedy_reaches_a_loose_tolerance():
    fam = fourier_sine_family()
    f = target.from_builtin("linear")
    cert = approximate_greedy(f, [fam.element(i) for i in range(1, 9)],
                              quadrature.l2_norm(), ExtractionSettings(0.16))
    assert cert.reported_error < 0.16
    assert cert.construction.method == "greedy"
    assert verify(cert, f).verdict


# ----------------------------------------------------------------------------
# settings
# ----------------------------------------------------------------------------

@pytest.mark.parametrize("eps", [0.0, -1e-3, float("nan"), float("inf")])
def test_settings_reject_bad_tolerances(eps):
    with pytest.raises(ConfigurationError):
        ExtractionSettings(eps)


def test_settings_reject_empty_budget():
    with pytest.raises(ConfigurationError):
        ExtractionSettings(1e-3, max_terms=0)
