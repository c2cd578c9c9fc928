"""Bubble profiles: evaluation, scaling group, masses, calibration."""

import math

import numpy as np
import pytest
from scipy.integrate import quad

from fracbubbles.bubbles import (Bubble, calibrate_amplitude, eval_trace, make_bubble,
                                 push_forward, quintic_cutoff, rescale,
                                 separation_entry, separation_matrix, trace_mass)
from fracbubbles.errors import ParameterError
from fracbubbles.params import FracParams, sphere_area


def test_eval_trace_examples(p3):
    b = Bubble(center=(0.0, 0.0, 0.0), lam=1.0, amplitude=1.0)
    assert eval_trace(b, p3, np.zeros(3)) == pytest.approx(1.0)
    b4 = Bubble(center=(0.0, 0.0, 0.0), lam=4.0, amplitude=1.0)
    assert eval_trace(b4, p3, np.zeros(3)) == pytest.approx(0.25)
    assert eval_trace(b, p3, np.array([1.0, 0.0, 0.0])) == pytest.approx(0.5)


def test_trace_positive_peak_at_center(p1_quarter):
    b = make_bubble(p1_quarter, center=(0.7,), lam=0.3)
    x = np.linspace(-5, 5, 401)
    vals = eval_trace(b, p1_quarter, x)
    assert np.all(vals > 0)
    assert x[np.argmax(vals)] == pytest.approx(0.7, abs=0.03)


def test_rescale_identity(p3):
    b = Bubble(center=(0.5, -1.0, 2.0), lam=0.7, amplitude=1.3)
    r = rescale(b, 1.0, np.zeros(3))
    assert r == b


def test_rescale_group_law(p3):
    b = Bubble(center=(0.4, 0.0, -0.2), lam=0.9, amplitude=1.1)
    r12 = rescale(rescale(b, 0.5), 0.4)
    r_once = rescale(b, 0.2)
    pts = np.random.default_rng(3).normal(size=(20, 3))
    np.testing.assert_allclose(eval_trace(r12, p3, pts), eval_trace(r_once, p3, pts),
                               rtol=1e-13)


def test_rescale_pullback_value(p3):
    # rescaled trace at x equals mu^((n-2g)/2) w(mu x); at the origin for
    # (n, g) = (3, 1/2) and mu = 1/2 that is 0.5^1 * w(0) = 0.5
    b = Bubble(center=(0.0, 0.0, 0.0), lam=1.0, amplitude=1.0)
    r = rescale(b, 0.5)
    mu_p = 0.5 ** ((p3.n - 2 * p3.gamma) / 2.0)
    assert eval_trace(r, p3, np.zeros(3)) == pytest.approx(mu_p * 1.0, rel=1e-14)
    x = np.array([0.3, -0.7, 0.1])
    assert eval_trace(r, p3, x) == pytest.approx(
        mu_p * eval_trace(b, p3, 0.5 * x), rel=1e-13)


def test_push_forward_inverts_rescale(p1_quarter):
    b = Bubble(center=(1.5,), lam=0.25, amplitude=0.9)
    r = push_forward(rescale(b, 0.125, shift=(0.3,)), 0.125, shift=(0.3,))
    assert r.lam == pytest.approx(b.lam)
    assert r.center[0] == pytest.approx(b.center[0])


def test_trace_mass_closed_form_oracle(p3):
    # radial quadrature oracle for C_3 = int (1+|z|^2)^-3 dz = pi^2/4
    dens = lambda r: r ** 2 * (1 + r * r) ** -3
    core, _ = quad(dens, 0, 100, epsabs=0.0, epsrel=1e-12, limit=300)
    tail, _ = quad(lambda s: dens(1 / s) / s ** 2, 0, 0.01, epsabs=0.0,
                   epsrel=1e-12, limit=300)
    c3 = sphere_area(3) * (core + tail)
    assert c3 == pytest.approx(math.pi ** 2 / 4, rel=1e-10)
    b = Bubble(center=(0.0, 0.0, 0.0), lam=2.7, amplitude=1.0)
    assert trace_mass(b, p3) == pytest.approx(c3, rel=1e-10)


def test_trace_mass_amplitude_scaling(p3):
    b = Bubble(center=(0.0, 0.0, 0.0), lam=1.0, amplitude=2.0)
    assert trace_mass(b, p3) == pytest.approx(2 * math.pi ** 2, rel=1e-12)


def test_trace_mass_scale_invariance(p3):
    a = Bubble(center=(0.0, 0.0, 0.0), lam=0.3, amplitude=1.7)
    b = Bubble(center=(4.0, -2.0, 0.0), lam=7.0, amplitude=1.7)
    assert trace_mass(a, p3) == pytest.approx(trace_mass(b, p3), rel=1e-12)


def test_translation_and_dilation_invariance(p1_quarter):
    p = p1_quarter
    b = Bubble(center=(2.0,), lam=0.6, amplitude=1.2)
    b0 = Bubble(center=(0.0,), lam=0.6, amplitude=1.2)
    x = np.linspace(-3, 3, 101)
    np.testing.assert_array_equal(eval_trace(b, p, x), eval_trace(b0, p, x - 2.0))
    lam = 0.6
    unit = Bubble(center=(0.0,), lam=1.0, amplitude=1.2)
    np.testing.assert_allclose(
        eval_trace(b0, p, x),
        lam ** (-(p.n - 2 * p.gamma) / 2) * eval_trace(unit, p, x / lam), rtol=1e-13)


def test_bubble_validation():
    with pytest.raises(ParameterError):
        Bubble(center=(0.0,), lam=-1.0, amplitude=1.0)
    with pytest.raises(ParameterError):
        Bubble(center=(0.0,), lam=1.0, amplitude=0.0)


def test_quintic_cutoff_profile():
    assert quintic_cutoff(0.0, 1.0) == 1.0
    assert quintic_cutoff(1.0, 1.0) == 1.0
    assert quintic_cutoff(2.0, 1.0) == 0.0
    assert quintic_cutoff(2.5, 1.0) == 0.0
    mid = quintic_cutoff(1.5, 1.0)
    assert 0.0 < mid < 1.0
    # C^1 at the knots: finite-difference slope vanishes there
    eps = 1e-6
    assert abs(quintic_cutoff(1.0 + eps, 1.0) - 1.0) < 1e-10
    assert abs(quintic_cutoff(2.0 - eps, 1.0)) < 1e-10


def test_separation_examples():
    assert separation_entry(1.0, 1.0, 0.0) == 2.0
    assert separation_entry(1.0, 4.0, 0.0) == pytest.approx(4.25)
    mat = separation_matrix([(0.0,), (0.0,)], [1.0, 4.0])
    assert mat[0, 0] == 2.0 and mat[0, 1] == pytest.approx(4.25)
    entries = [separation_entry(2.0 ** -a, 4.0 ** -a, 0.0) for a in range(1, 7)]
    assert all(b > a for a, b in zip(entries, entries[1:]))
    assert entries[-1] > 2.0 ** 6  # diverges like 2^alpha


def test_calibration_n3(p3):
    res = calibrate_amplitude(p3)
    assert res.kappa == pytest.approx(2.0, rel=1e-12)
    assert res.rel_dev < 1e-3
    assert res.ratio_spread < 1e-2


def test_calibration_n1(p1_quarter):
    res = calibrate_amplitude(p1_quarter)
    assert res.kappa == pytest.approx(p1_quarter.kappa, rel=1e-12)
    assert res.rel_dev < 1e-3
    # two-route consistency: quantum from the calibrated mass matches beta_0
    p = p1_quarter
    quantum = (p.gamma / p.n) * res.kappa ** p.two_star * p.mass_constant
    assert quantum == pytest.approx(p.beta_zero, rel=1e-4)
