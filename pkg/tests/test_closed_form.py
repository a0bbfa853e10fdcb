import json
import math
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from darksol.closed_form import (
    KdvAnsatz,
    gp_soliton,
    gp_soliton_invariants,
    gp_speed_for_momentum,
    kdv_A,
    kdv_ansatz,
    kdv_epsilon_for_momentum,
    kdv_predictions,
    kdv_profile_residual,
)
from darksol.fields import complex_derivative, energy, momentum
from darksol.grid import make_grid

GOLDEN = json.loads((Path(__file__).parent / "golden" / "gp_c1.json").read_text())


def test_gp_soliton_examples():
    g = make_grid(8192, 256.0)
    s0 = gp_soliton(0.0, g)
    assert s0.hydro is None and not s0.is_hydro
    assert np.allclose(s0.complex.values, np.tanh(g.x / math.sqrt(2)), atol=1e-15)
    s1 = gp_soliton(1.0, g)
    i0 = g.n_points // 2
    assert g.x[i0] == 0.0
    assert abs(s1.complex.values[i0]) ** 2 == pytest.approx(0.5, rel=1e-15)
    assert s1.hydro.eta[i0] == pytest.approx(0.5, rel=1e-15)
    near = gp_soliton(math.sqrt(2) - 1e-9, g)
    assert np.max(np.abs(near.hydro.eta)) < 1e-8
    for bad in (-0.1, math.sqrt(2), 2.0):
        with pytest.raises(ValueError):
            gp_soliton(bad, g)


@pytest.mark.parametrize("c", [0.3, 0.7, 1.0, 1.3])
def test_gp_hydro_matches_complex(c):
    g = make_grid(8192, 256.0)
    s = gp_soliton(c, g)
    u = s.complex.values
    w = np.imag(np.conj(u) * complex_derivative(s.complex)) / np.abs(u) ** 2
    assert np.max(np.abs(w - s.hydro.w)) < 1e-9
    assert np.max(np.abs(1 - np.abs(u) ** 2 - s.hydro.eta)) < 1e-14


@pytest.mark.parametrize("c", [0.2, 0.5, 1.0, 1.3])
def test_gp_travelling_wave_residual(c):
    g = make_grid(8192, 256.0)
    s = gp_soliton(c, g).complex
    u = s.values
    eta = 1 - np.abs(u) ** 2
    r = 1j * c * complex_derivative(s) + complex_derivative(s, 2) + u * eta
    assert math.sqrt(g.spacing * np.sum(np.abs(r) ** 2)) <= 1e-6


def test_invariants_golden():
    E, p = gp_soliton_invariants(1.0)
    assert E == pytest.approx(GOLDEN["E"], rel=1e-10)
    assert p == pytest.approx(GOLDEN["p"], rel=1e-10)


@pytest.mark.parametrize("c", [0.2, 0.4, 0.9, 1.2, 1.4])
def test_invariants_match_grid(c, dirac):
    g = make_grid(8192, 256.0)
    h = gp_soliton(c, g).hydro
    E, p = gp_soliton_invariants(c)
    assert energy(h, dirac) == pytest.approx(E, rel=1e-7)
    assert momentum(h) == pytest.approx(p, rel=1e-7)


def test_invariants_limits():
    assert gp_soliton_invariants(1e-6)[1] == pytest.approx(math.pi / 2, abs=1e-5)
    assert gp_soliton_invariants(math.sqrt(2) - 1e-6)[1] < 1e-8
    with pytest.raises(ValueError):
        gp_soliton_invariants(0.0)


def test_momentum_decreasing_in_speed():
    cs = np.linspace(0.05, 1.4, 20)
    ps = [gp_soliton_invariants(float(c))[1] for c in cs]
    assert np.all(np.diff(ps) < 0)


@settings(max_examples=20, deadline=None)
@given(st.floats(0.05, 1.5))
def test_speed_for_momentum_inverts(q):
    c = gp_speed_for_momentum(q)
    assert gp_soliton_invariants(c)[1] == pytest.approx(q, rel=1e-10)


def test_kdv_examples():
    g = make_grid(4096, 256.0)
    h = kdv_ansatz(KdvAnsatz(0.2, 1.0), g)
    i0 = g.n_points // 2
    assert h.rho[i0] == pytest.approx(0.99, rel=1e-15)
    assert h.w[i0] == pytest.approx(0.04 * math.sqrt(2) / 4, rel=1e-15)
    with pytest.raises(ValueError):
        kdv_ansatz(KdvAnsatz(0.1, 1.0), g)  # length below 40 omega / eps
    with pytest.raises(ValueError):
        KdvAnsatz(1.5, 1.0)
    with pytest.raises(ValueError):
        KdvAnsatz(0.5, 0.0)


def test_kdv_predictions_examples():
    assert kdv_predictions(KdvAnsatz(0.0, 2.0)) == (0.0, 0.0)
    E, p = kdv_predictions(KdvAnsatz(0.2, 1.0))
    assert E == pytest.approx((0.008 - 0.00032 / 4) / 3, rel=1e-15)
    assert p == pytest.approx(math.sqrt(2) / 6 * (0.008 - 0.00032 / 10), rel=1e-15)
    ratios = [np.divide(*kdv_predictions(KdvAnsatz(e, 1.0))) for e in (1e-1, 1e-2, 1e-3)]
    assert abs(ratios[-1] - math.sqrt(2)) < abs(ratios[0] - math.sqrt(2))
    assert ratios[-1] == pytest.approx(math.sqrt(2), rel=1e-5)


@pytest.mark.parametrize("eps", [0.1, 0.2, 0.4])
def test_kdv_momentum_exact(eps, dirac):
    g = make_grid(16384, 512.0)
    a = KdvAnsatz(eps, 1.0)
    h = kdv_ansatz(a, g)
    assert momentum(h) == pytest.approx(kdv_predictions(a)[1], abs=1e-8)


def test_kdv_energy_remainder_single_constant(dirac):
    # the remainder bound is uniform on (0, 1]: fit C once at eps = 1, reuse it below
    g = make_grid(16384, 512.0)

    def scaled_dev(eps):
        a = KdvAnsatz(eps, 1.0)
        h = kdv_ansatz(a, g, check_length=False)
        return abs(energy(h, dirac) - kdv_predictions(a)[0]) / eps**6

    C = scaled_dev(1.0)
    assert 0 < C < 1
    assert all(scaled_dev(eps) <= C for eps in (0.1, 0.2, 0.4, 0.7))


@pytest.mark.parametrize("omega", [1.0, 0.5])
def test_kdv_profile_residual(omega):
    g = make_grid(8192, 256.0)
    assert kdv_profile_residual(omega, g) <= 1e-8


def test_kdv_profile_residual_broken():
    g = make_grid(8192, 256.0)
    assert kdv_profile_residual(1.0, g, amplitude=2.0) > 0.1
    with pytest.raises(ValueError):
        kdv_profile_residual(0.0, g)


def test_kdv_A_peak():
    assert kdv_A(0.0, 3.0) == -0.25


@settings(max_examples=25, deadline=None)
@given(st.floats(1e-3, 0.5), st.floats(0.3, 3.0))
def test_kdv_epsilon_inverts(eps, omega):
    q = kdv_predictions(KdvAnsatz(eps, omega))[1]
    assert kdv_epsilon_for_momentum(q, omega) == pytest.approx(eps, rel=1e-10)
