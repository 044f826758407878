"""Moment recursion: parity, order-2 equivalence, order-4 structure."""

import numpy as np
import pytest

from tieredbath.bath import DampedMode, DiscreteSet, ThermalParams, kernel
from tieredbath.errors import CapabilityError, ValidationError
from tieredbath.higher_orders import ChiEvaluator, MomentIndex, chi, theta_series
from tieredbath.influence import SystemModel, theta_quadrature
from tieredbath.su_basis import build_basis

BASIS = build_basis(2)
DELTA = np.pi / 2
MODEL = SystemModel.two_level(eps=0.0, delta=DELTA)
THERMAL = ThermalParams.from_kt(6.546)
# revival-scenario single damped mode
MODE = DampedMode(omega=1.05 * DELTA, g=0.1, gamma=0.001)


def grid(t_max=6.0, dt=0.01):
    return dt * np.arange(int(round(t_max / dt)) + 1)


def test_chi0_identity():
    ev = ChiEvaluator((MODE,), MODEL, BASIS, THERMAL, grid(1.0))
    c = ev.chi(0, MomentIndex.zero(1))
    assert np.abs(c - np.eye(4)).max() == 0.0


def test_chi0_thermal_moments():
    from tieredbath.bath import thermal_occupation

    ev = ChiEvaluator((MODE,), MODEL, BASIS, THERMAL, grid(1.0))
    occ = thermal_occupation(MODE.omega, THERMAL)
    c = ev.chi(0, MomentIndex(a=(2,), b=(2,)))
    assert c[0, 0, 0] == pytest.approx(2.0 * occ**2, rel=1e-12)
    assert np.abs(ev.chi(0, MomentIndex(a=(1,), b=(0,)))).max() == 0.0


def test_odd_moments_vanish():
    """chi with odd n + sum(a+b) comes out exactly zero from the recursion."""
    ev = ChiEvaluator((MODE,), MODEL, BASIS, THERMAL, grid(2.0))
    cases = [
        (1, MomentIndex.zero(1)),
        (3, MomentIndex.zero(1)),
        (2, MomentIndex(a=(1,), b=(0,))),
        (2, MomentIndex(a=(0,), b=(1,))),
        (0, MomentIndex(a=(1,), b=(0,))),
    ]
    for order, idx in cases:
        assert np.abs(ev.chi(order, idx)).max() <= 1e-14


def test_chi2_matches_quadrature_path():
    """chi_2(0;t) equals the double-integral exponent for the damped mode."""
    t = grid(10.0, 0.01)
    series = theta_series((MODE,), MODEL, BASIS, THERMAL, t, max_order=2)
    kern = kernel(DiscreteSet(modes=(MODE,)), THERMAL, t)
    quad = theta_quadrature(MODEL, BASIS, kern, t, tau_cut=None)
    assert np.abs(series[2] - quad.theta).max() <= 1e-6


def test_coupling_homogeneity():
    """Theta_2 scales as g^2, Theta_4 as g^4."""
    t = grid(3.0, 0.01)
    s = 2.0
    base = theta_series((MODE,), MODEL, BASIS, THERMAL, t, max_order=4)
    scaled_mode = DampedMode(omega=MODE.omega, g=s * MODE.g, gamma=MODE.gamma)
    scaled = theta_series((scaled_mode,), MODEL, BASIS, THERMAL, t, max_order=4)
    assert np.abs(scaled[2] - s**2 * base[2]).max() < 1e-12
    assert np.abs(scaled[4] - s**4 * base[4]).max() < 1e-10


def test_theta4_weak_coupling_ratio():
    """||Theta_4|| / ||Theta_2|| scales as g^2 at fixed time."""
    t = grid(3.0, 0.01)
    ratios = {}
    for g in (0.01, 0.02):
        mode = DampedMode(omega=1.05 * DELTA, g=g, gamma=0.001)
        series = theta_series((mode,), MODEL, BASIS, THERMAL, t, max_order=4)
        ratios[g] = np.abs(series[4][-1]).max() / np.abs(series[2][-1]).max()
    assert ratios[0.02] / ratios[0.01] == pytest.approx(4.0, rel=0.05)
    assert ratios[0.01] < 0.1


def test_theta2_additive_theta4_not():
    t = grid(3.0, 0.01)
    m_a = DampedMode(omega=1.4, g=0.15, gamma=0.01)
    m_b = DampedMode(omega=1.9, g=0.12, gamma=0.02)
    s_a = theta_series((m_a,), MODEL, BASIS, THERMAL, t, max_order=4)
    s_b = theta_series((m_b,), MODEL, BASIS, THERMAL, t, max_order=4)
    s_ab = theta_series((m_a, m_b), MODEL, BASIS, THERMAL, t, max_order=4)
    assert np.abs(s_ab[2] - s_a[2] - s_b[2]).max() < 1e-12
    cross = np.abs(s_ab[4] - s_a[4] - s_b[4]).max()
    assert cross > 1e-4  # cross terms are really there


def test_memoization_matches_fresh_evaluation():
    t = grid(2.0, 0.01)
    ev = ChiEvaluator((MODE,), MODEL, BASIS, THERMAL, t)
    zero = MomentIndex.zero(1)
    first = ev.chi(4, zero)   # fills the memo
    second = ev.chi(4, zero)  # pure cache hit
    fresh = chi(4, zero, (MODE,), MODEL, BASIS, THERMAL, t)
    assert second is first
    assert np.array_equal(fresh, first)


def test_capability_and_validation_errors():
    t = grid(1.0, 0.01)
    ev = ChiEvaluator((MODE,), MODEL, BASIS, THERMAL, t)
    with pytest.raises(CapabilityError):
        ev.chi(6, MomentIndex.zero(1))
    with pytest.raises(ValidationError):
        ev.chi(2, MomentIndex.zero(2))  # wrong number of modes
    with pytest.raises(ValidationError):
        theta_series((MODE,), MODEL, BASIS, THERMAL, t, max_order=3)
    with pytest.raises(ValidationError):
        MomentIndex(a=(-1,), b=(0,))
