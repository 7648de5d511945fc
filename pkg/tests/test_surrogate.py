import json
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from scourhbm import fem, surrogate
from scourhbm.surrogate import PolySurrogate

DOMAIN = (1e7, 5e7)


def fake_fe(coeffs, transform="log"):
    poly = PolySurrogate(tuple(coeffs), DOMAIN, transform)
    return lambda model, k: poly.eval(k)


@pytest.mark.parametrize("transform", ["log", "linear"])
def test_exact_polynomial_recovered(transform):
    true = (0.24, 0.02, -0.003, 4e-4, -5e-5, 6e-6)
    s = surrogate.fit_surrogate(None, DOMAIN, 30, 5, fake_fe(true, transform), transform)
    np.testing.assert_allclose(s.coefficients, true, rtol=1e-10, atol=1e-15)


def test_constant_target():
    s = surrogate.fit_surrogate(None, DOMAIN, 20, 5, lambda m, k: 0.3)
    np.testing.assert_allclose(s.coefficients, [0.3, 0, 0, 0, 0, 0], atol=1e-14)
    assert s.eval(3e7) == pytest.approx(0.3, abs=1e-14)
    assert s.eval_with_derivative(3e7)[1] == pytest.approx(0.0, abs=1e-20)


@pytest.mark.parametrize("transform", ["log", "linear"])
def test_linear_surrogate_derivative(transform):
    s = PolySurrogate((0.2, 0.01), DOMAIN, transform)
    for k in (1.2e7, 3e7, 4.9e7):
        _, d = s.eval_with_derivative(k)
        expect = 0.01 / s.half_width / (k if transform == "log" else 1.0)
        assert d == pytest.approx(expect, rel=1e-13)


def test_linear_mode_half_width_is_raw():
    s = PolySurrogate((0.0, 1.0), DOMAIN, "linear")
    assert s.center == 3e7 and s.half_width == 2e7
    assert s.scale(1e7) == -1.0 and s.scale(5e7) == 1.0


def test_domain_maps_to_unit_interval():
    s = PolySurrogate((0.0,), DOMAIN)
    assert s.scale(DOMAIN[0]) == pytest.approx(-1.0, abs=1e-14)
    assert s.scale(DOMAIN[1]) == pytest.approx(1.0, abs=1e-14)


def test_rank_deficient_fit_rejected():
    with pytest.raises(surrogate.FitError):
        surrogate.fit_surrogate(None, DOMAIN, 3, 5, lambda m, k: 1.0)
    with pytest.raises(surrogate.FitError):
        surrogate.fit_polynomial(np.full(10, 2e7), np.ones(10), DOMAIN, 3)


def test_fe_failure_names_offending_stiffness():
    def boom(model, k):
        if k > 3e7:
            raise RuntimeError("solver died")
        return 0.2
    with pytest.raises(surrogate.FitError, match="k_s="):
        surrogate.fit_surrogate(None, DOMAIN, 10, 2, boom)


def test_non_finite_input_rejected():
    s = PolySurrogate((1.0,), DOMAIN)
    with pytest.raises(ValueError):
        s.eval(math.nan)


def test_out_of_domain_counter():
    s = PolySurrogate((1.0, 0.5), DOMAIN)
    s.eval(np.array([2e7, 6e7, 5e6]))
    s.eval_with_derivative(7e7)
    assert s.out_of_domain.value == 3
    s.eval(3e7)
    assert s.out_of_domain.value == 3


@given(c=st.floats(1e-3, 1e3))
def test_affine_rescaling_invariance(c):
    fn = lambda model, k: 0.25 + 0.02 * math.log(k) ** 2 / 300 + 1e-4 * math.sin(k / 1e7)
    s1 = surrogate.fit_surrogate(None, DOMAIN, 25, 5, fn)
    s2 = surrogate.fit_surrogate(None, (c * DOMAIN[0], c * DOMAIN[1]), 25, 5,
                                 lambda m, k: fn(m, k / c))
    for k in np.linspace(*DOMAIN, 7):
        assert s2.eval(c * k) == pytest.approx(s1.eval(k), abs=1e-10)


def test_json_round_trip(tmp_path, fitted):
    path = tmp_path / "s.json"
    fitted.save(path)
    d = json.loads(path.read_text())
    assert set(d) >= {"degree", "domain", "scaling", "coefficients", "fit_report"}
    assert set(d["fit_report"]) >= {"max_abs", "rms", "n_train", "n_val"}
    back = PolySurrogate.load(path)
    assert back == fitted
    assert back.eval(2.2e7) == fitted.eval(2.2e7)


def test_inconsistent_scaling_block_rejected(fitted):
    d = fitted.to_dict()
    d["scaling"]["center"] += 1.0
    with pytest.raises(ValueError):
        PolySurrogate.from_dict(d)


# --------------------------------------------------------------------------
# default FE fit
# --------------------------------------------------------------------------

def test_default_fit_gate(fitted):
    r = fitted.fit_report
    assert fitted.degree == 5 and len(fitted.coefficients) == 6
    assert r["n_train"] == 50 and r["n_val"] == 49
    assert r["max_rel"] < 1e-4
    assert r["max_abs"] <= 2 * r["train_max_abs"]


def test_default_fit_at_reference_point(fitted, turbine):
    f = fitted.eval(2.5e7)
    assert 0 < f < 1
    assert f == pytest.approx(fem.first_bending_frequency(turbine, 2.5e7), rel=1e-4)


def test_training_points_reproduced(fitted, turbine):
    ks = np.linspace(*DOMAIN, 50)[::7]
    fe = np.array([fem.first_bending_frequency(turbine, k) for k in ks])
    assert np.max(np.abs(fitted.eval(ks) - fe)) <= fitted.fit_report["train_max_abs"] * (1 + 1e-9)


def central_difference(f, x, h):
    # one Richardson step: at h = 1e-3 half-width the plain O(h^2) error is
    # ~2e-6 relative near k = 1e7, where the frequency curve bends hardest
    d1 = (f(x + h) - f(x - h)) / (2 * h)
    d2 = (f(x + h / 2) - f(x - h / 2)) / h
    return (4 * d2 - d1) / 3


def test_derivative_matches_central_differences(fitted):
    ks = np.linspace(1.1e7, 4.9e7, 20)
    ks = np.concatenate([ks, np.random.default_rng(3).uniform(*DOMAIN, 3)])
    h = 1e-3 * 0.5 * (DOMAIN[1] - DOMAIN[0])
    _, d = fitted.eval_with_derivative(ks)
    np.testing.assert_allclose(d, central_difference(fitted.eval, ks, h), rtol=1e-6)


def test_plain_central_difference_is_close(fitted):
    ks = np.linspace(2e7, 4.9e7, 10)
    h = 1e-3 * 0.5 * (DOMAIN[1] - DOMAIN[0])
    _, d = fitted.eval_with_derivative(ks)
    fd = (fitted.eval(ks + h) - fitted.eval(ks - h)) / (2 * h)
    np.testing.assert_allclose(d, fd, rtol=1e-6)


def test_degree_zero_is_domain_mean(turbine):
    s = surrogate.fit_surrogate(turbine, DOMAIN, 10, 0)
    ks = np.linspace(*DOMAIN, 10)
    fe = np.array([fem.first_bending_frequency(turbine, k) for k in ks])
    assert s.coefficients[0] == pytest.approx(fe.mean(), rel=1e-12)
    assert s.fit_report["train_max_abs"] == pytest.approx(np.max(np.abs(fe - fe.mean())), rel=1e-9)
