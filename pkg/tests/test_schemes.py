import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from heston_weak_lab.model import PRESETS, GridSpec, HestonParams
from heston_weak_lab.paths import simulate_terminal_batch
from heston_weak_lab.rng import SeedSpec, gaussian_block
from heston_weak_lab.schemes import (SchemeKind, compute_z, simulate_terminal, step_logprice,
                                     step_variance)

SYM, ABS = SchemeKind.SYMMETRIZED, SchemeKind.ABSORBED


def toy(**kw):
    base = dict(s0=1.0, v0=0.01, kappa=1.0, theta=1e-9, sigma=1.0, rho=0.0, r=0.0, T=1.0, K=1.0)
    base.update(kw)
    return HestonParams(**base)


class TestComputeZ:
    def test_mean_fixed_point(self, model1):
        assert compute_z(model1.theta, model1, 0.1, 0.0).z == model1.theta

    def test_zero_variance_drops_diffusion(self, model1):
        assert compute_z(0.0, model1, 0.05, 3.7).z == pytest.approx(model1.kappa * model1.theta * 0.05)

    def test_hand_value(self):
        # 0.01 + 1*(0 - 0.01)*0.1 + 1*0.1*(-0.2) = -0.011, with theta ~ 0
        assert compute_z(0.01, toy(), 0.1, -0.2).z == pytest.approx(-0.011, abs=1e-9)

    def test_negative_variance_rejected(self, model1):
        with pytest.raises(ValueError):
            compute_z(-1e-12, model1, 0.1, 0.0)


class TestStepVariance:
    def test_fixes_on_hand_value(self):
        assert step_variance(SYM, 0.01, toy(), 0.1, -0.2) == pytest.approx(0.011, abs=1e-9)
        assert step_variance(ABS, 0.01, toy(), 0.1, -0.2) == 0.0

    def test_mean_fixed_point(self, preset_params):
        p = preset_params
        assert step_variance(SYM, p.theta, p, 0.01, 0.0) == p.theta
        assert step_variance(ABS, p.theta, p, 0.01, 0.0) == p.theta

    @given(v=st.floats(0, 1), dw=st.floats(-2, 2), dt=st.floats(1e-4, 1.0))
    def test_nonnegative_and_agree_when_z_nonnegative(self, v, dw, dt):
        p = PRESETS["model4"]
        z = compute_z(v, p, dt, dw).z
        s = step_variance(SYM, v, p, dt, dw)
        a = step_variance(ABS, v, p, dt, dw)
        assert s >= 0 and a >= 0
        if z >= 0:
            assert s == a == z


class TestStepLogprice:
    def test_zero_variance_is_pure_drift(self, model1):
        assert step_logprice(0.3, 0.0, model1, 0.1, 1.0, -1.0) == pytest.approx(0.3 + model1.r * 0.1)

    @pytest.mark.parametrize("rho", [1.0, -1.0])
    def test_perfect_correlation_ignores_db(self, model1, rho):
        p = model1.replace(rho=rho)
        assert step_logprice(0.0, 0.04, p, 0.1, 0.2, 5.0) == step_logprice(0.0, 0.04, p, 0.1, 0.2, -5.0)

    def test_hand_value(self):
        p = toy(rho=-0.7, r=0.0)
        # drift -0.04/2 * 0.25, diffusion sqrt(0.04) * (-0.7*0.1 + sqrt(0.51)*(-0.1))
        expected = -0.005 + 0.2 * (-0.07 - 0.1 * math.sqrt(0.51))
        got = step_logprice(0.0, 0.04, p, 0.25, 0.1, -0.1)
        assert got == pytest.approx(expected, abs=1e-15)
        assert got == pytest.approx(-0.033283, abs=1e-6)


class TestSimulateTerminal:
    def test_deterministic_one_step(self, model1):
        p = model1.replace(v0=model1.theta)
        x, v = simulate_terminal(SYM, p, GridSpec(p.T, 1), SeedSpec(0, 0), normals=np.zeros((1, 2)))
        assert x == pytest.approx(math.log(p.s0) + (p.r - p.theta / 2) * p.T, abs=1e-15)
        assert v == p.theta

    def test_golden_pair(self, model1):
        # recorded once; the batch kernel and the hand-written loop below re-derive it independently
        golden = (4.2197218219932635, 0.020931616843564378)
        grid = GridSpec(model1.T, 8)
        x, v = simulate_terminal(SYM, model1, grid, SeedSpec(42, 0))
        assert (x, v) == pytest.approx(golden, abs=1e-13)
        xb, vb = simulate_terminal_batch(SYM, model1, 8, 42, 0, 1)
        assert (xb[0], vb[0]) == pytest.approx(golden, abs=1e-13)
        xi = gaussian_block(SeedSpec(42, 0), 8)
        h = model1.T / 8
        xs, vs = math.log(model1.s0), model1.v0
        for k in range(8):
            dw, db = math.sqrt(h) * xi[k, 0], math.sqrt(h) * xi[k, 1]
            xs += (model1.r - vs / 2) * h + math.sqrt(vs) * (model1.rho * dw + math.sqrt(1 - model1.rho**2) * db)
            vs = abs(vs + model1.kappa * (model1.theta - vs) * h + model1.sigma * math.sqrt(vs) * dw)
        assert (xs, vs) == pytest.approx(golden, abs=1e-13)

    @pytest.mark.parametrize("kind", list(SchemeKind))
    def test_batch_matches_scalar_path_by_path(self, preset_params, kind):
        xb, vb = simulate_terminal_batch(kind, preset_params, 16, 7, 100, 108)
        for i in range(8):
            x, v = simulate_terminal(kind, preset_params, GridSpec(preset_params.T, 16), SeedSpec(7, 100 + i))
            assert xb[i] == pytest.approx(x, abs=1e-12)
            assert vb[i] == pytest.approx(v, abs=1e-14)

    def test_batch_split_invariance(self, model1):
        full = simulate_terminal_batch(SYM, model1, 32, 3, 0, 1000)
        parts = [simulate_terminal_batch(SYM, model1, 32, 3, s, s + 250) for s in range(0, 1000, 250)]
        assert np.array_equal(full[0], np.concatenate([p[0] for p in parts]))
        assert np.array_equal(full[1], np.concatenate([p[1] for p in parts]))

    @settings(max_examples=25, deadline=None)
    @given(kappa=st.floats(0.1, 10), theta=st.floats(0.005, 0.5), sigma=st.floats(0.1, 2.0),
           v0=st.floats(1e-4, 0.5), n=st.sampled_from([1, 4, 16]), seed=st.integers(0, 2**63))
    def test_variance_never_negative(self, kappa, theta, sigma, v0, n, seed):
        p = HestonParams(100.0, v0, kappa, theta, sigma, -0.5, 0.01, 1.0, 100.0)
        for kind in SchemeKind:
            _, v = simulate_terminal_batch(kind, p, n, seed, 0, 200)
            assert np.all(v >= 0)

    def test_schemes_agree_when_no_fix_triggers(self):
        # huge Feller index and a fine grid: no path ever goes negative
        p = HestonParams(100.0, 0.04, 5.0, 0.04, 0.05, -0.7, 0.0, 1.0, 100.0)
        xs, vs = simulate_terminal_batch(SYM, p, 64, 11, 0, 2000)
        xa, va = simulate_terminal_batch(ABS, p, 64, 11, 0, 2000)
        assert np.array_equal(xs, xa) and np.array_equal(vs, va)

    def test_schemes_differ_when_fixes_trigger(self):
        p = PRESETS["model4"]
        _, vs = simulate_terminal_batch(SYM, p, 8, 11, 0, 2000)
        _, va = simulate_terminal_batch(ABS, p, 8, 11, 0, 2000)
        assert not np.array_equal(vs, va)
        assert np.any(va == 0.0)


def test_scheme_parse():
    assert SchemeKind.parse("sym") is SYM
    assert SchemeKind.parse("AE") is ABS
    with pytest.raises(ValueError):
        SchemeKind.parse("milstein")
