"""Pump protocols: Rice-Mele cycle, control-freak drive, hedgehog sweep.

Pins the coefficient conventions (J1/J2 split, ramp phase endpoints,
clamping outside the cycle) and the closed-form bond charges of the
fully-controlled protocol.  The gap floor of the default Rice-Mele
cycle is asserted at its analytic value min|R| = 1.
"""

import numpy as np
import pytest

from cdpump.bloch import GapClosureError, cd_field
from cdpump.protocols import (
    ControlFreakParams,
    RMParams,
    control_freak_bond_charges,
    control_freak_r,
    control_freak_u,
    default_theta,
    default_theta_deriv,
    hedgehog_field,
    ramp_phase,
    ramp_phase_deriv,
    rm_bloch_field,
    rm_coefficients,
    rm_coefficients_deriv,
)


def test_ramp_phase_endpoints_and_rates():
    omega = 0.5
    T = 2.0 * np.pi / omega
    assert ramp_phase(0.0, omega) == pytest.approx(0.0, abs=1e-15)
    assert ramp_phase(0.5 * T, omega) == pytest.approx(np.pi, abs=1e-12)
    assert ramp_phase(T, omega) == pytest.approx(2.0 * np.pi, abs=1e-12)
    # smooth start and finish: phase rate vanishes at both ends
    assert abs(ramp_phase_deriv(0.0, omega)) < 1e-14
    assert abs(ramp_phase_deriv(T, omega)) < 1e-12


def test_rm_coefficients_split_and_clamp():
    p = RMParams()
    for t in np.linspace(0.0, p.T, 17):
        j1, j2, _ = rm_coefficients(t, p)
        assert j1 + j2 == pytest.approx(2.0 * p.J0, abs=1e-12)
    j1, j2, d = rm_coefficients(0.0, p)
    assert j1 == pytest.approx(p.J0 + p.delta0)
    assert j2 == pytest.approx(p.J0 - p.delta0)
    assert d == pytest.approx(0.0, abs=1e-12)
    # clamped outside the cycle, with zero rates
    assert np.allclose(rm_coefficients(-3.0, p), rm_coefficients(0.0, p))
    assert np.allclose(rm_coefficients(p.T + 5.0, p), rm_coefficients(p.T, p))
    assert np.allclose(rm_coefficients_deriv(-3.0, p), 0.0)
    assert np.allclose(rm_coefficients_deriv(p.T + 5.0, p), 0.0)


def test_rm_field_components_and_gap_floor():
    p = RMParams()
    f = rm_bloch_field(p)
    ks = np.linspace(-np.pi / p.a, np.pi / p.a, 64, endpoint=False)
    ts = np.linspace(0.0, p.T, 65)
    mn = np.inf
    for t in ts:
        R = f(ks, t)
        j1, j2, d = rm_coefficients(t, p)
        assert np.allclose(R[..., 0], -j1 - j2 * np.cos(ks * p.a), atol=1e-12)
        assert np.allclose(R[..., 1], j2 * np.sin(ks * p.a), atol=1e-12)
        assert np.allclose(R[..., 2], d, atol=1e-12)
        mn = min(mn, float(np.min(np.linalg.norm(R, axis=-1))))
    # default cycle keeps min|R| = 1 (reached where J1 = J2 and |sin phi| = 1);
    # a grid minimum can only overshoot the continuum value
    assert 1.0 - 1e-9 <= mn <= 1.01


def test_rm_field_analytic_derivative_matches_stencil():
    f = rm_bloch_field()
    g = rm_bloch_field()
    ks = np.linspace(-np.pi, np.pi, 9, endpoint=False)
    for t in (0.0, 1.7, 0.41 * f.T, f.T):
        ana = f.time_derivative(ks, t)
        h = f.T * 1e-6
        if t == 0.0:
            num = (g(ks, t + h) - g(ks, t)) / h
        elif t == f.T:
            num = (g(ks, t) - g(ks, t - h)) / h
        else:
            num = (g(ks, t + h) - g(ks, t - h)) / (2.0 * h)
        assert np.max(np.abs(ana - num)) < 1e-4


def test_rm_params_validation():
    with pytest.raises(GapClosureError):
        RMParams(J0=1.0, delta0=1.0, Delta0=0.0)
    with pytest.raises(ValueError):
        RMParams(a=-1.0)
    with pytest.raises(ValueError):
        RMParams(omega=0.0)


def test_default_theta_profile():
    T = 4.0 * np.pi
    assert default_theta(0.0, T) == pytest.approx(0.0, abs=1e-12)
    assert default_theta(0.5 * T, T) == pytest.approx(np.pi, abs=1e-12)
    assert default_theta(T, T) == pytest.approx(2.0 * np.pi, abs=1e-12)
    for t in (0.0, 0.5 * T, T):
        assert abs(default_theta_deriv(t, T)) < 1e-12
    # monotone sweep
    ts = np.linspace(0.0, T, 201)
    th = np.array([default_theta(t, T) for t in ts])
    assert np.all(np.diff(th) >= -1e-12)


def test_control_freak_params_validation():
    with pytest.raises(ValueError):
        ControlFreakParams(theta=lambda t: 0.3 * t, theta_deriv=lambda t: 0.3)


@pytest.mark.parametrize("lam", [0.0, 0.6])
def test_control_freak_r_continuous_at_handoff(lam):
    p = ControlFreakParams(lam=lam)
    f = control_freak_r(p)
    ks = np.linspace(-np.pi, np.pi, 11, endpoint=False)
    eps = 1e-7
    left = f(ks, 0.5 * p.T - eps)
    right = f(ks, 0.5 * p.T + eps)
    # sin(theta) -> 0 at the handoff kills the k dependence on both sides
    assert np.max(np.abs(left - right)) < 1e-5


def test_control_freak_u_is_cd_drive_of_r():
    p = ControlFreakParams(lam=0.3)
    rf = control_freak_r(p)
    uf = control_freak_u(p)
    ks = np.linspace(-np.pi, np.pi, 8, endpoint=False)
    for t in (0.13 * p.T, 0.42 * p.T, 0.71 * p.T, 0.96 * p.T):
        R = np.asarray(rf(ks, t), dtype=float)
        dR = rf.time_derivative(ks, t)
        assert np.max(np.abs(uf(ks, t) - cd_field(R, dR))) < 1e-6


def test_control_freak_bond_closed_forms():
    # first half moves the s bond only; second half moves d only
    th = np.linspace(0.0, np.pi, 9)
    for t in th:
        qd, qs = control_freak_bond_charges(t, half="first")
        assert qd == pytest.approx(0.0, abs=1e-14)
        assert qs == pytest.approx(0.5 * (1.0 - np.cos(t)), abs=1e-12)
    for t in np.linspace(np.pi, 2.0 * np.pi, 9):
        qd, qs = control_freak_bond_charges(t, half="second")
        assert qd == pytest.approx(0.5 * (1.0 + np.cos(t)), abs=1e-12)
        assert qs == pytest.approx(1.0, abs=1e-14)
    qd, qs = control_freak_bond_charges(2.0 * np.pi, half="second")
    assert qd == pytest.approx(1.0, abs=1e-12)
    assert qs == pytest.approx(1.0, abs=1e-12)


def test_hedgehog_field_unit_norm_and_chirality():
    for chi in (1, -1):
        f = hedgehog_field(chirality=chi)
        ks = np.linspace(-np.pi, np.pi, 16, endpoint=False)
        ts = np.linspace(0.0, f.T, 9)
        for t in ts:
            R = np.asarray(f(ks, t), dtype=float)
            assert np.allclose(np.linalg.norm(R, axis=-1), 1.0, atol=1e-12)
        # poles at the sweep ends
        assert np.allclose(f(ks, 0.0)[..., 2], 1.0, atol=1e-12)
        assert np.allclose(f(ks, f.T)[..., 2], -1.0, atol=1e-12)
    with pytest.raises(ValueError):
        hedgehog_field(chirality=2)
