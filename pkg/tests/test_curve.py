import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from darksol.closed_form import gp_soliton_invariants, gp_speed_for_momentum
from darksol.curve import CurvePoint, diagnose, estimate_q_star, kdv_k1, lower_envelope, speed_bracket, sweep
from darksol.grid import make_grid
from darksol.kernels import make_kernel

SQRT2 = math.sqrt(2)


def pts(qs, Es, speeds=None):
    speeds = speeds if speeds is not None else [float("nan")] * len(qs)
    return [CurvePoint(float(q), float(E), float(c), 0.0, True, 1) for q, E, c in zip(qs, Es, speeds)]


def oracle_points(qs):
    out = []
    for q in qs:
        c = gp_speed_for_momentum(q)
        out.append(CurvePoint(q, gp_soliton_invariants(c)[0], c, 0.0, True, 1, multiplier=c))
    return out


@pytest.fixture(scope="module")
def dirac_sweep():
    g = make_grid(8192, 256.0)
    qs = [round(0.1 * i, 10) for i in range(1, 11)]
    return sweep(make_kernel("dirac"), qs, grid=g, first_init="kdv")


def test_sweep_matches_oracle(dirac_sweep):
    for p in dirac_sweep:
        assert p.converged
        c = gp_speed_for_momentum(p.q)
        E_ref = gp_soliton_invariants(c)[0]
        assert p.E == pytest.approx(E_ref, rel=1e-4)
        assert p.E <= SQRT2 * p.q + 1e-8 and p.E >= 0
        assert 0 < p.c_est < SQRT2


def test_diagnose_dirac(dirac_sweep):
    d = diagnose(dirac_sweep, omega=1.0)
    assert d.concave and d.nondecreasing and d.lipschitz_ok and d.below_line
    assert all(-1e-12 < s <= 1 for _, s in d.sigma)
    assert d.subadditive_ok is True
    assert d.kdv_constants["K1"] == pytest.approx(kdv_k1(1.0))
    assert set(d.to_dict()) >= {"concave", "sigma", "q_star_estimate", "kdv_bound_ok"}


def test_speed_bracket_contains_speed(dirac_sweep):
    i = [round(p.q, 10) for p in dirac_sweep].index(0.5)
    right, left = speed_bracket(dirac_sweep, i)
    # curve sampling error: slopes of the concave curve bound the speed
    tol = 2e-4
    assert right - tol <= dirac_sweep[i].c_est <= left + tol
    with pytest.raises(ValueError):
        speed_bracket(dirac_sweep, 0)


def test_bracket_tends_to_sound_speed():
    brackets = []
    for q0 in (0.2, 0.02, 0.002):
        p = oracle_points([q0 * 0.5, q0, q0 * 1.5])
        brackets.append(speed_bracket(p, 1))
    gaps = [SQRT2 - 0.5 * (a + b) for a, b in brackets]
    assert gaps[0] > gaps[1] > gaps[2] > 0


def test_line_is_concave_boundary():
    qs = [0.1, 0.2, 0.3]
    d = diagnose(pts(qs, [SQRT2 * q for q in qs]))
    assert d.concave and d.worst_second_difference == pytest.approx(0.0, abs=1e-15)
    lo, hi = speed_bracket(pts(qs, [SQRT2 * q for q in qs]), 1)
    assert lo == pytest.approx(hi, rel=1e-14)


def test_convex_points_flagged():
    qs = np.linspace(0.1, 1.0, 10)
    d = diagnose(pts(qs, qs**2))
    assert not d.concave and d.worst_index is not None and 1 <= d.worst_index <= 8


def test_diagnose_needs_points():
    with pytest.raises(ValueError):
        diagnose(pts([0.1, 0.2], [0.1, 0.2]))


def test_q_star_none_for_line():
    qs = np.linspace(0.1, 2.0, 20)
    assert estimate_q_star(pts(qs, SQRT2 * qs)) is None


def test_q_star_oracle_curve():
    # analytic curve with plateau at pi/2 beyond the last point
    qs = [round(0.1 * i, 10) for i in range(1, 21)]
    below = [q for q in qs if q < math.pi / 2]
    points = oracle_points(below)
    E_top = 2 * math.sqrt(2) / 3
    points += [CurvePoint(q, E_top, 0.0, 0.0, True, 1, multiplier=0.0) for q in qs if q >= math.pi / 2]
    est = estimate_q_star(points)
    assert abs(est - math.pi / 2) < 0.05


def test_sweep_validation():
    g = make_grid(256, 30.0)
    with pytest.raises(ValueError):
        sweep(make_kernel("dirac"), [0.2, 0.1], grid=g)
    with pytest.raises(ValueError):
        sweep(make_kernel("dirac"), [0.1, 0.2])


def test_single_point_sweep_below_line():
    g = make_grid(4096, 512.0)
    (p,) = sweep(make_kernel("log_kernel", {"alpha": 0.8}), [0.05], grid=g)
    assert p.converged and p.E < SQRT2 * 0.05


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(0.01, 0.5), min_size=3, max_size=12, unique=True), st.floats(0.2, 2.0))
def test_concave_functions_pass(increments, curvature):
    # E = sqrt2 q - curvature q^2 is concave on any sample
    qs = np.cumsum(sorted(increments))
    d = diagnose(pts(qs, SQRT2 * qs - curvature * qs**2))
    assert d.concave


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(0.01, 0.5), min_size=3, max_size=12, unique=True))
def test_sigma_in_range_for_subline_curves(increments):
    qs = np.cumsum(sorted(increments))
    E = np.minimum(SQRT2 * qs - 0.1 * qs**1.5, 1.0)
    d = diagnose(pts(qs, E))
    assert all(0 < s <= 1 for _, s in d.sigma)


def test_lower_envelope_examples():
    a = pts([0.1, 0.2, 0.3], [0.14, 0.27, 0.40])
    b = pts([0.2, 0.3, 0.4], [0.26, 0.41, 0.50])
    b[0].converged = False  # lower but unconverged: not chosen
    env = lower_envelope(a, b)
    assert [p.q for p in env] == [0.1, 0.2, 0.3, 0.4]
    assert [p.E for p in env] == [0.14, 0.27, 0.40, 0.50]
    lone = CurvePoint(0.5, 0.6, 0.1, 1.0, False, 3)
    nan = CurvePoint(0.5, float("nan"), float("nan"), float("inf"), False, 0)
    assert lower_envelope([nan], [lone])[0] is lone
    assert lower_envelope([nan])[0] is nan


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(0.01, 0.5), min_size=3, max_size=12, unique=True),
       st.floats(0.1, 1.0), st.floats(0.0, 1.0))
def test_lower_envelope_of_concave_branches_is_concave(increments, slope, offset):
    # the minimum of two concave functions is concave
    qs = np.cumsum(sorted(increments))
    one = pts(qs, SQRT2 * qs - 0.3 * qs**2)
    two = pts(qs, offset + slope * qs)
    env = lower_envelope(one, two)
    for p, a, b in zip(env, one, two):
        assert p.E == min(a.E, b.E)
    assert diagnose(env).concave
