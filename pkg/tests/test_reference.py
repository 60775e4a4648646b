import cmath
import math

import numpy as np
import pytest
from scipy.integrate import quad

from heston_weak_lab.model import PRESETS
from heston_weak_lab.reference import (QuadratureConfig, QuadratureError, black_scholes_call, char_fn,
                                       heston_prob, price_call, price_digital, price_put, reference_set)


def textbook_prob(j, p):
    """Scalar little-trap formula written out plainly and integrated by scipy quad."""
    u_j = 0.5 if j == 1 else -0.5
    b = p.kappa - p.rho * p.sigma if j == 1 else p.kappa
    x = math.log(p.s0)

    def f(phi):
        beta = b - p.rho * p.sigma * phi * 1j
        d = cmath.sqrt(beta**2 - p.sigma**2 * (2 * u_j * phi * 1j - phi**2))
        g = (beta - d) / (beta + d)
        e = cmath.exp(-d * p.T)
        C = p.r * phi * 1j * p.T + p.kappa * p.theta / p.sigma**2 * (
            (beta - d) * p.T - 2 * cmath.log((1 - g * e) / (1 - g)))
        D = (beta - d) / p.sigma**2 * (1 - e) / (1 - g * e)
        val = cmath.exp(C + D * p.v0 + 1j * phi * (x - math.log(p.K)))
        return (val / (1j * phi)).real

    total = sum(quad(f, a, a + 10, limit=200, epsabs=1e-14, epsrel=1e-12)[0]
                for a in np.arange(0.0, 300.0, 10.0))
    return 0.5 + total / math.pi


def test_char_fn_normalised(preset_params):
    assert abs(char_fn(2, preset_params, 0.0) - 1.0) < 1e-14
    assert abs(char_fn(1, preset_params, 0.0) - 1.0) < 1e-14


def test_char_fn_bounded(preset_params):
    u = np.linspace(0.0, 50, 501)
    assert np.all(np.abs(char_fn(2, preset_params, u)) <= 1.0 + 1e-12)


def test_char_fn_continuous_for_long_maturity():
    # model4 has T=5; the principal-branch form must not jump
    p = PRESETS["model4"]
    u = np.linspace(0.0, 30, 30001)
    f = char_fn(2, p, u)
    assert np.max(np.abs(np.diff(f))) < 1e-2


def test_share_measure_dominates(preset_params):
    # the share measure tilts by S_T, so {S_T > K} is more likely under it
    assert heston_prob(1, preset_params) > heston_prob(2, preset_params)


def test_probabilities_match_textbook_formula(preset_params):
    for j in (1, 2):
        assert heston_prob(j, preset_params) == pytest.approx(textbook_prob(j, preset_params), abs=1e-9)


def test_prob_model1_frozen_dual_quadrature():
    p = PRESETS["model1"]
    # frozen once: adaptive Simpson and Gauss-Legendre panels agree to ~2e-14
    for j, frozen in ((1, 0.6646331671362532), (2, 0.5903158880649769)):
        s = heston_prob(j, p, "simpson")
        g = heston_prob(j, p, "gauss_legendre")
        assert abs(s - g) < 1e-9
        assert s == pytest.approx(frozen, abs=1e-9)


@pytest.mark.parametrize("method", ["simpson", "gauss_legendre"])
def test_strike_limits(method):
    p = PRESETS["model1"]
    assert heston_prob(2, p.replace(K=1e-3), method) == pytest.approx(1.0, abs=1e-6)
    assert heston_prob(2, p.replace(K=1e5), method) == pytest.approx(0.0, abs=1e-6)
    assert price_call(p.replace(K=1e-3), method).value == pytest.approx(p.s0, abs=1e-3)
    assert price_put(p.replace(K=1e-3), method).value == pytest.approx(0.0, abs=1e-6)
    assert price_digital(p.replace(K=1e-3), method).value == pytest.approx(0.0, abs=1e-6)
    assert price_digital(p.replace(K=1e5), method).value == pytest.approx(math.exp(-p.r * p.T), abs=1e-6)


def test_black_scholes_example():
    p = PRESETS["model1"].replace(sigma=1e-8, v0=0.04, theta=0.04)
    bs = black_scholes_call(100.0, 100.0, 0.0319, 1.0, 0.2)
    assert bs == pytest.approx(9.51, abs=5e-3)
    assert price_call(p).value == pytest.approx(bs, abs=1e-6)


def test_black_scholes_degeneration(preset_params):
    p = preset_params.replace(sigma=1e-8, v0=preset_params.theta)
    bs = black_scholes_call(p.s0, p.K, p.r, p.T, math.sqrt(p.theta))
    assert abs(price_call(p).value - bs) <= 1e-3


def test_frozen_preset_prices():
    # dual-quadrature values recorded once (Simpson vs Gauss-Legendre differ by < 2e-12)
    assert price_call(PRESETS["model2"]).value == pytest.approx(11.65077255630544, abs=1e-7)
    assert price_put(PRESETS["model4"]).value == pytest.approx(12.879836658323043, abs=1e-7)
    assert price_digital(PRESETS["model3"]).value == pytest.approx(0.3408509406904876, abs=1e-7)


def test_reference_set_invariants(preset_params):
    refs = reference_set(preset_params)
    assert abs(refs["parity_residual"]) < 1e-10
    assert refs["call_dual_residual"] <= 1e-7
    assert refs["digital_dual_residual"] <= 1e-7
    disc = math.exp(-preset_params.r * preset_params.T)
    assert 0.0 <= refs["digital"].value <= disc
    assert refs["put"].value >= -1e-9
    lower = max(0.0, preset_params.s0 - preset_params.K * disc)
    assert refs["call"].value > lower - refs["call"].abs_tolerance
    assert refs["call"].abs_tolerance <= 1e-6


def test_monotone_in_strike(preset_params):
    strikes = np.linspace(60, 160, 20)
    calls = [price_call(preset_params.replace(K=k)).value for k in strikes]
    digitals = [price_digital(preset_params.replace(K=k)).value for k in strikes]
    assert np.all(np.diff(calls) < 0)
    assert np.all(np.diff(digitals) > 0)


def test_call_increases_with_variance_level(preset_params):
    p = preset_params
    up = p.replace(theta=1.5 * p.theta, v0=1.5 * p.v0)
    assert price_call(up).value > price_call(p).value


def test_quadrature_failure_reports_residual():
    cfg = QuadratureConfig(max_intervals=10)
    with pytest.raises(QuadratureError) as info:
        heston_prob(2, PRESETS["model1"], "simpson", cfg)
    assert info.value.residual > 0

    cfg = QuadratureConfig(max_upper=8.0, tail_tol=1e-300)
    with pytest.raises(QuadratureError):
        heston_prob(2, PRESETS["model1"], "gauss_legendre", cfg)
