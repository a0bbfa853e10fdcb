import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import optimize

from darksol.kernels import (
    check_H0,
    check_H1,
    check_H2prime,
    check_hypotheses,
    custom_kernel,
    dispersion,
    dispersion_extrema,
    h2prime_integral,
    kernel_from_spec,
    make_kernel,
    second_derivative_at_zero,
    speed_of_sound,
)
from darksol.kernels import _FAMILIES, _family_eval

CATALOG_KERNELS = [
    ("dirac", {}),
    ("exp_pair", {"alpha": 0.05, "beta": 0.15}),
    ("log_kernel", {"alpha": 0.8}),
    ("perturbed_log", {"sigma": 1.0, "m": 1}),
    ("three_delta", {"sigma": 10.0}),
    ("roton", {"a": -36.0, "b": 2687.0, "c": 30.0}),
]


def _v_hat_mp(xi):
    xi = mpmath.mpf(xi)
    return 3 * (xi * mpmath.coth(xi) - 1) / xi**2


@pytest.mark.parametrize("name,params", CATALOG_KERNELS)
def test_catalog_normalized(name, params):
    k = make_kernel(name, params)
    assert float(k.symbol(0.0)) == pytest.approx(1.0, abs=1e-12)
    assert speed_of_sound(k) == pytest.approx(math.sqrt(2), rel=1e-12)


def test_paper_examples():
    assert float(make_kernel("exp_pair", {"alpha": 0.05, "beta": 0.15}).symbol(0.0)) == pytest.approx(1.0, abs=1e-15)
    assert float(make_kernel("three_delta", {"sigma": 10}).symbol(math.pi / 10)) == pytest.approx(3.0, abs=1e-15)
    assert float(make_kernel("log_kernel", {"alpha": 0.8}).symbol(0.0)) == pytest.approx(1.0, abs=1e-15)


def test_log_kernel_against_high_precision():
    mpmath.mp.dps = 40
    k = make_kernel("log_kernel", {"alpha": 0.8})
    for xi in [1e-6, 5e-5, 1e-4, 3e-3, 0.1, 0.4999, 0.5, 0.7, 2.0, 30.0]:
        ref = float((1 - mpmath.mpf("0.8") * _v_hat_mp(xi)) / mpmath.mpf("0.2"))
        assert float(k.symbol(xi)) == pytest.approx(ref, rel=1e-14, abs=1e-15)


def test_perturbed_log_formula():
    mpmath.mp.dps = 30
    s, m = 1.5, 2
    k = make_kernel("perturbed_log", {"sigma": s, "m": m})
    mp2 = (m * mpmath.pi) ** 2
    for xi in [0.01, 0.3, 1.0, 4.0]:
        ref = 2 * mp2 / (mp2 + 2 * s) * (1 - _v_hat_mp(xi) / 2 + s / (mpmath.mpf(xi) ** 2 + mp2))
        assert float(k.symbol(xi)) == pytest.approx(float(ref), rel=1e-13)


def test_roton_formula():
    k = make_kernel("roton", {"a": -36.0, "b": 2687.0, "c": 30.0})
    xi = 0.4
    assert float(k.symbol(xi)) == pytest.approx((1 - 36 * 0.16 + 2687 * 0.0256) * math.exp(-30 * 0.16), rel=1e-14)


@pytest.mark.parametrize("name,params", [
    ("exp_pair", {"alpha": 0.1, "beta": 0.15}),
    ("exp_pair", {"alpha": 0.0, "beta": 0.15}),
    ("log_kernel", {"alpha": 1.0}),
    ("log_kernel", {"alpha": -0.1}),
    ("perturbed_log", {"sigma": 3.5, "m": 1}),
    ("perturbed_log", {"sigma": -5.0, "m": 1}),
    ("perturbed_log", {"sigma": 1.0, "m": 1.5}),
    ("three_delta", {"sigma": 0.0}),
    ("roton", {"a": 1.0, "b": 1.0}),
    ("nope", {}),
])
def test_make_kernel_rejects(name, params):
    with pytest.raises(ValueError):
        make_kernel(name, params)


def test_kernel_spec_round_trip():
    for name, params in CATALOG_KERNELS:
        k = make_kernel(name, params)
        assert kernel_from_spec(k.to_spec()) == k
    with pytest.raises(ValueError):
        kernel_from_spec({"name": "dirac", "extra": 1})


@pytest.mark.parametrize("name,params", CATALOG_KERNELS)
def test_symbol_even(name, params, rng):
    k = make_kernel(name, params)
    xi = rng.uniform(-50, 50, 1000)
    assert np.allclose(k.symbol(xi), k.symbol(-xi), rtol=1e-14, atol=0)


@pytest.mark.parametrize("name,params", CATALOG_KERNELS)
def test_small_xi_sound_speed(name, params):
    k = make_kernel(name, params)
    assert dispersion(k, 1e-3) / 1e-3 == pytest.approx(speed_of_sound(k), rel=1e-4)


def test_speed_of_sound_scaled_and_error(dirac):
    assert speed_of_sound(dirac.scaled(2.0)) == pytest.approx(2.0, rel=1e-15)
    with pytest.raises(ValueError):
        speed_of_sound(dirac.scaled(-1.0))


def test_dispersion_examples(dirac, roton):
    assert dispersion(dirac, 1.0) == pytest.approx(math.sqrt(3), rel=1e-15)
    for name, params in CATALOG_KERNELS:
        assert dispersion(make_kernel(name, params), 0.0) == 0.0
    xs = np.linspace(0, 1.2, 1201)
    w = dispersion(roton, xs)
    assert np.all(w >= 0)
    dw = np.diff(w)
    sign_changes = np.nonzero(np.diff(np.sign(dw)))[0]
    assert len(sign_changes) == 2 and dw[sign_changes[0]] > 0


def test_dispersion_negative_radicand():
    k = custom_kernel(lambda xi: 1 - xi**2)
    with pytest.raises(ValueError):
        dispersion(k, 3.0)


def test_dispersion_extrema_dirac(dirac):
    assert dispersion_extrema(dirac, 0.01, 2.0) == []
    with pytest.raises(ValueError):
        dispersion_extrema(dirac, 0.0, 1.0)


def _root_oracle(dr, lo, hi, n=200001):
    xs = np.linspace(lo, hi, n)
    v = dr(xs)
    idx = np.nonzero(np.sign(v[:-1]) * np.sign(v[1:]) < 0)[0]
    return [optimize.brentq(dr, xs[i], xs[i + 1], xtol=1e-14) for i in idx]


def test_dispersion_extrema_roton(roton):
    ext = dispersion_extrema(roton, 0.01, 1.2)
    kinds = [e[2] for e in ext]
    assert kinds == ["max", "min"]
    assert 0.31 <= ext[0][0] <= 0.35 and 0.51 <= ext[1][0] <= 0.55
    # oracle: roots of d/dxi of the radicand, differentiated symbolically
    a, b, c = -36.0, 2687.0, 30.0

    def dr(x):
        W = (1 + a * x**2 + b * x**4) * np.exp(-c * x**2)
        dW = (2 * a * x + 4 * b * x**3) * np.exp(-c * x**2) - 2 * c * x * W
        return 4 * x**3 + 4 * W * x + 2 * dW * x**2

    roots = _root_oracle(dr, 0.01, 1.2)
    assert [e[0] for e in ext] == pytest.approx(roots, abs=1e-4)


def test_dispersion_extrema_three_delta():
    k = make_kernel("three_delta", {"sigma": 10.0})
    ext = dispersion_extrema(k, 0.01, 1.0)

    def dr(x):
        return 4 * x**3 + 4 * (2 - np.cos(10 * x)) * x + 20 * np.sin(10 * x) * x**2

    roots = _root_oracle(dr, 0.01, 1.0)
    assert len(ext) == len(roots) >= 2
    assert [e[0] for e in ext] == pytest.approx(roots, abs=1e-4)


def test_check_H0():
    k = make_kernel("exp_pair", {"alpha": 0.05, "beta": 0.15})
    assert check_H0(k, 100.0).ok
    r = check_H0(make_kernel("roton", {"a": -36.0, "b": 2687.0, "c": 30.0}), 5.0)
    assert r.ok  # the sampled symbol stays positive
    bad = check_H0(custom_kernel(lambda xi: 1 - xi**2), 5.0)
    assert not bad.ok and bad.worst_xi > 1 and bad.worst_value < 0
    with pytest.raises(ValueError):
        check_H0(k, 10.0, n_samples=10)


def test_check_H1(dirac, exp_pair, roton):
    r = check_H1(dirac)
    assert r.ok and r.w2_0 == pytest.approx(0.0, abs=1e-8) and r.omega == pytest.approx(1.0, abs=1e-8)
    assert r.margin >= 0
    assert check_H1(exp_pair).ok
    assert not check_H1(roton).ok


@pytest.mark.parametrize("name,params,expected", [
    # closed-form second derivatives at 0
    ("exp_pair", {"alpha": 0.05, "beta": 0.15}, 0.15 / 0.05 * 2 * 2 * 0.05 / 0.15**3),
    ("log_kernel", {"alpha": 0.8}, 0.8 / 0.2 * 2 / 15),
    ("three_delta", {"sigma": 10.0}, 100.0),
    ("roton", {"a": -36.0, "b": 2687.0, "c": 30.0}, 2 * (-36.0 - 30.0)),
])
def test_second_derivative_closed_form(name, params, expected):
    assert second_derivative_at_zero(make_kernel(name, params)) == pytest.approx(expected, rel=1e-7)


@settings(max_examples=40, deadline=None)
@given(st.sampled_from(sorted(_FAMILIES)), st.integers(0, 2**31))
def test_h2_dirac_plancherel(family, seed):
    r = np.random.default_rng(seed)
    theta = r.normal(size=_FAMILIES[family]) * 2
    n, length = 16384, 512.0
    x = -0.5 * length + (length / n) * np.arange(n)
    f = _family_eval(family, theta, x)
    val, nrm = h2prime_integral(make_kernel("dirac"), f, x)
    assert abs(val) <= 1e-9 * nrm + 1e-300


@settings(max_examples=20, deadline=None)
@given(st.sampled_from(sorted(_FAMILIES)), st.integers(0, 2**31))
def test_family_members_odd(family, seed):
    theta = np.random.default_rng(seed).normal(size=_FAMILIES[family])
    x = np.linspace(-30, 30, 601)
    f = _family_eval(family, theta, x)
    assert np.allclose(f, -f[::-1], atol=1e-14)


def test_check_H2prime_dirac_and_exp_pair(dirac, exp_pair):
    assert check_H2prime(dirac, 200).status == "verified-on-family"
    assert check_H2prime(exp_pair, 600).status == "verified-on-family"
    with pytest.raises(ValueError):
        check_H2prime(dirac, 50)


def test_check_H2prime_three_delta_witness():
    k = make_kernel("three_delta", {"sigma": 10.0})
    r = check_H2prime(k, 600)
    assert r.status == "violated"
    w = r.witness
    # re-evaluate the witness on an independent finer grid
    n, length = 32768, 512.0
    x = -0.5 * length + (length / n) * np.arange(n)
    val, nrm = h2prime_integral(k, w.samples(x), x)
    assert val < -1e-9 * nrm
    assert val == pytest.approx(w.value, rel=1e-6)


def test_check_hypotheses_report_dict(exp_pair):
    rep = check_hypotheses(exp_pair, search_budget=200)
    d = rep.to_dict()
    assert d["h0_ok"] and d["h1_ok"] and d["h2prime"] == "verified-on-family"
    assert d["omega"] == pytest.approx(math.sqrt(1 + 0.15 / 0.05 * 4 * 0.05 / 0.15**3), rel=1e-7)
