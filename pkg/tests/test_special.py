import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate, stats

from hmdp.errors import DomainError
from hmdp.special import (BetaParams, beta_cdf, beta_pdf, expect_beta_pdf, expect_mixture,
                          expect_monomial, expect_pwl, log_beta_fn, log_gamma, pwl_eval)

# Frozen with scipy.integrate.quad at epsabs 1e-14 against scipy.stats.beta.pdf.
GOLDEN_MONOMIAL_15_8_4_0 = 0.2046822742474917
GOLDEN_MONOMIAL_2p5_7p25_2_3 = 0.022422183961317194
GOLDEN_BETA_PDF_22_22 = 1.2000000000000004
GOLDEN_BETA_PDF_15_8_2_6 = 0.22073578595317708
GOLDEN_TENT_15_8 = 0.3029836511041386
GOLDEN_MIXTURE_CUBE = 0.4395604395604396  # 0.3 Beta(3,4) + 0.7 Beta(9,2), E[x^3]

TENT = ((0.3, 0.5, 5.0, -1.5), (0.5, 0.7, -5.0, 3.5))

shapes = st.floats(0.2, 60.0)


def test_log_gamma_matches_factorials():
    for n in range(1, 12):
        assert log_gamma(n + 1.0) == pytest.approx(math.log(math.factorial(n)), rel=1e-13)


def test_log_gamma_rejects_nonpositive():
    with pytest.raises(DomainError):
        log_gamma(0.0)
    with pytest.raises(DomainError):
        log_gamma(np.array([1.0, -2.0]))


def test_log_beta_symmetry():
    assert log_beta_fn(2.5, 7.0) == pytest.approx(log_beta_fn(7.0, 2.5), abs=1e-14)
    assert math.exp(log_beta_fn(1.0, 1.0)) == pytest.approx(1.0)


def test_beta_params_positive():
    BetaParams(1.0, 2.0)
    with pytest.raises(DomainError):
        BetaParams(0.0, 1.0)


def test_beta_cdf_endpoints_and_domain():
    assert beta_cdf(0.0, 3.0, 4.0) == 0.0
    assert beta_cdf(1.0, 3.0, 4.0) == 1.0
    with pytest.raises(DomainError):
        beta_cdf(1.5, 3.0, 4.0)


@given(shapes, shapes, st.floats(0.0, 1.0))
@settings(max_examples=60, deadline=None)
def test_beta_cdf_matches_scipy_stats(a, b, u):
    assert float(beta_cdf(u, a, b)) == pytest.approx(stats.beta.cdf(u, a, b), abs=1e-10)


def test_beta_pdf_integrates_to_one():
    val, _ = integrate.quad(lambda x: float(beta_pdf(x, 3.5, 1.7)), 0, 1)
    assert val == pytest.approx(1.0, abs=1e-9)
    assert float(beta_pdf(1.2, 2.0, 2.0)) == 0.0


def test_golden_monomials():
    assert float(expect_monomial(15, 8, 4, 0)) == pytest.approx(GOLDEN_MONOMIAL_15_8_4_0, abs=1e-13)
    assert float(expect_monomial(2.5, 7.25, 2, 3)) == pytest.approx(GOLDEN_MONOMIAL_2p5_7p25_2_3,
                                                                    abs=1e-13)


@given(shapes, shapes)
@settings(max_examples=50, deadline=None)
def test_monomial_trivial_moments(a, b):
    assert float(expect_monomial(a, b, 0, 0)) == pytest.approx(1.0, abs=1e-12)
    assert float(expect_monomial(a, b, 1, 0)) == pytest.approx(a / (a + b), rel=1e-11)
    assert float(expect_monomial(a, b, 0, 1)) == pytest.approx(b / (a + b), rel=1e-11)


def test_monomial_large_parameters_stay_finite():
    val = expect_monomial(3000.0, 2000.0, 5, 5)
    assert np.isfinite(val) and 0 < val < 1
    # x ~ Beta(3000, 2000) is concentrated at 0.6
    assert float(val) == pytest.approx(0.6 ** 5 * 0.4 ** 5, rel=0.02)


def test_monomial_negative_exponent():
    with pytest.raises(DomainError):
        expect_monomial(2.0, 2.0, -1, 0)


def test_golden_beta_pdf():
    assert float(expect_beta_pdf(2, 2, 2, 2)) == pytest.approx(GOLDEN_BETA_PDF_22_22, abs=1e-13)
    assert float(expect_beta_pdf(15, 8, 2, 6)) == pytest.approx(GOLDEN_BETA_PDF_15_8_2_6, abs=1e-13)


@given(shapes, shapes)
@settings(max_examples=40, deadline=None)
def test_beta_pdf_flat_factor_is_one(a, b):
    assert float(expect_beta_pdf(a, b, 1.0, 1.0)) == pytest.approx(1.0, rel=1e-11)


def test_beta_pdf_divergent_product():
    with pytest.raises(DomainError):
        expect_beta_pdf(0.5, 2.0, 0.5, 2.0)


def test_golden_pwl_tent():
    assert float(expect_pwl(15, 8, TENT)) == pytest.approx(GOLDEN_TENT_15_8, abs=1e-13)


@given(shapes, shapes)
@settings(max_examples=50, deadline=None)
def test_pwl_constant_and_identity(a, b):
    assert float(expect_pwl(a, b, ((0.0, 1.0, 0.0, 1.0),))) == pytest.approx(1.0, abs=1e-12)
    assert float(expect_pwl(a, b, ((0.0, 1.0, 1.0, 0.0),))) == pytest.approx(a / (a + b), rel=1e-10)


@given(shapes, shapes, st.lists(st.floats(0.01, 0.99), min_size=1, max_size=4))
@settings(max_examples=40, deadline=None)
def test_pwl_partition_of_unity(a, b, cuts):
    knots = [0.0] + sorted(set(cuts)) + [1.0]
    segs = tuple((l, r, 0.0, 1.0) for l, r in zip(knots[:-1], knots[1:]))
    assert float(expect_pwl(a, b, segs)) == pytest.approx(1.0, abs=1e-12)


def test_pwl_broadcasts():
    a = np.array([[2.0, 3.0], [4.0, 5.0]])
    out = expect_pwl(a, 2.0, TENT)
    assert out.shape == (2, 2)
    assert out[1, 0] == pytest.approx(float(expect_pwl(4.0, 2.0, TENT)))


def test_pwl_bad_segments():
    with pytest.raises(DomainError):
        expect_pwl(2.0, 2.0, ((0.6, 0.4, 1.0, 0.0),))
    with pytest.raises(DomainError):
        expect_pwl(2.0, 2.0, ((0.0, 1.2, 1.0, 0.0),))


def test_pwl_eval_shared_knot_counted_once():
    assert float(pwl_eval(0.5, TENT)) == pytest.approx(1.0)
    assert float(pwl_eval(1.0, ((0.0, 1.0, 1.0, 0.0),))) == 1.0
    assert float(pwl_eval(0.2, TENT)) == 0.0


def test_golden_mixture():
    val = expect_mixture([0.3, 0.7], [3.0, 9.0], [4.0, 2.0],
                         lambda a, b: expect_monomial(a, b, 3, 0))
    assert float(val) == pytest.approx(GOLDEN_MIXTURE_CUBE, abs=1e-13)


@given(shapes, shapes)
@settings(max_examples=30, deadline=None)
def test_mixture_degenerate_cases(a, b):
    kernel = lambda p, q: expect_pwl(p, q, TENT)  # noqa: E731
    bare = float(kernel(a, b))
    assert float(expect_mixture([1.0], [a], [b], kernel)) == pytest.approx(bare)
    assert float(expect_mixture([0.5, 0.5], [a, a], [b, b], kernel)) == pytest.approx(bare)
