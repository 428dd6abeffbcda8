import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from nanofiber.atom_surface import (
    DEFAULT_DELTA_C3, AtomSpecies, SurfaceModel, gamma_free, gamma_guided, gamma_total,
    gamma_total_gradient, vdw_potential, vdw_potential_gradient, vdw_shift, vdw_shift_gradient,
)
from nanofiber.constants import H_PLANCK
from nanofiber.errors import ConfigError, DomainError
from nanofiber.fiber_mode import intensity_profile

A = 250e-9
MODEL = SurfaceModel()
ATOM = AtomSpecies()


def test_atom_defaults():
    assert ATOM.gamma_0 / (2 * math.pi) == pytest.approx(5.2e6, rel=1e-15)
    assert ATOM.i_sat_free == 18.0
    with pytest.raises(ConfigError):
        AtomSpecies(mass=0.0)


def test_surface_model_validation():
    with pytest.raises(ConfigError):
        SurfaceModel(c3_ground=0.0)
    with pytest.raises(ConfigError):
        SurfaceModel(guided_surface_factor=-0.1)
    with pytest.raises(ConfigError):
        SurfaceModel(cutoff_distance=0.0)


def test_vdw_potential_direct_evaluation(fiber):
    assert vdw_potential(MODEL, A + 100e-9, fiber) == pytest.approx(-5.6e-49 / 1e-21, rel=1e-12)


def test_vdw_cubic_law(fiber):
    d = np.geomspace(2e-9, 1e-6, 20)
    ratio = vdw_potential(MODEL, A + d, fiber) / vdw_potential(MODEL, A + 2 * d, fiber)
    np.testing.assert_allclose(ratio, 8.0, rtol=1e-12)
    for func in (vdw_potential, vdw_shift):
        m = SurfaceModel(delta_c3=1e-49)
        slope = np.diff(np.log(np.abs(func(m, A + d, fiber)))) / np.diff(np.log(d))
        np.testing.assert_allclose(slope, -3.0, atol=1e-9)


def test_vdw_far_field_vanishes(fiber):
    u = vdw_potential(MODEL, A + 1.0, fiber)
    assert u < 0 and abs(u) < 1e-45
    assert vdw_shift(MODEL, A + 1.0, fiber) == pytest.approx(0.0, abs=1e-10)


def test_vdw_monotone_negative_and_clamped(fiber):
    r = A + np.geomspace(1e-11, 2e-6, 400)
    u = vdw_potential(MODEL, r, fiber)
    assert np.all(u < 0) and np.all(np.isfinite(u))
    assert np.all(np.diff(u) >= 0)
    below = A + np.array([1e-12, 5e-10, 1e-9])
    np.testing.assert_allclose(vdw_potential(MODEL, below, fiber),
                               np.full(3, -MODEL.c3_ground / 1e-27), rtol=1e-12)
    assert np.all(vdw_potential_gradient(MODEL, below[:2], fiber) == 0)


def test_vdw_force_points_inward(fiber):
    r = A + np.geomspace(1.01e-9, 2e-6, 200)
    assert np.all(-vdw_potential_gradient(MODEL, r, fiber) < 0)


def test_vdw_gradients_finite_difference(fiber):
    m = SurfaceModel(delta_c3=2e-49)
    r = A + np.geomspace(2e-9, 1e-6, 25)
    h = 1e-7 * (r - A)
    for f, g in ((vdw_potential, vdw_potential_gradient), (vdw_shift, vdw_shift_gradient)):
        fd = (f(m, r + h, fiber) - f(m, r - h, fiber)) / (2 * h)
        np.testing.assert_allclose(g(m, r, fiber), fd, rtol=1e-7)


def test_vdw_shift_sign_and_zero(fiber):
    r = A + np.geomspace(2e-9, 1e-6, 10)
    assert np.all(vdw_shift(SurfaceModel(delta_c3=1e-49), r, fiber) < 0)
    assert np.all(vdw_shift(SurfaceModel(delta_c3=0.0), r, fiber) == 0)
    d = 100e-9
    assert vdw_shift(SurfaceModel(delta_c3=1e-49), A + d, fiber) == pytest.approx(
        -(1e-49 / H_PLANCK) / d ** 3, rel=1e-12)


def test_domain_errors(fiber, mode):
    for func in (vdw_potential, vdw_shift):
        with pytest.raises(DomainError):
            func(MODEL, A, fiber)
    with pytest.raises(DomainError):
        gamma_total(MODEL, mode, ATOM, 0.5 * A)


def test_surface_rates_exact(mode):
    g0 = ATOM.gamma_0
    assert gamma_total(MODEL, mode, ATOM, A) == pytest.approx(1.57 * g0, rel=1e-15)
    assert gamma_guided(MODEL, mode, ATOM, A) == pytest.approx(0.3 * g0, rel=1e-15)
    assert MODEL.surface_enhancement == pytest.approx(1.57, rel=1e-15)


def test_rates_far_field(mode):
    g0 = ATOM.gamma_0
    far = A + 20e-6
    assert gamma_guided(MODEL, mode, ATOM, far) == pytest.approx(0.0, abs=1e-20 * g0)
    assert gamma_total(MODEL, mode, ATOM, far) == pytest.approx(g0, rel=1e-15)


def test_guided_rate_follows_intensity(mode):
    r = A + np.linspace(0, 1e-6, 30)
    ratio = gamma_guided(MODEL, mode, ATOM, r) / gamma_guided(MODEL, mode, ATOM, A)
    ref = intensity_profile(mode, 1.0, r) / intensity_profile(mode, 1.0, A)
    np.testing.assert_allclose(ratio, ref, rtol=1e-13)


def test_total_rate_split(mode):
    r = A + np.linspace(0, 1e-6, 30)
    np.testing.assert_allclose(gamma_total(MODEL, mode, ATOM, r),
                               gamma_free(MODEL, mode, ATOM, r) + gamma_guided(MODEL, mode, ATOM, r),
                               rtol=1e-15)


@settings(max_examples=60, deadline=None)
@given(d=st.floats(0.0, 5e-6), guided=st.floats(0.0, 2.0), excess=st.floats(0.0, 2.0))
def test_total_rate_bounds(mode, d, guided, excess):
    m = SurfaceModel(guided_surface_factor=guided, free_surface_excess=excess)
    g = gamma_total(m, mode, ATOM, A + d)
    assert g >= ATOM.gamma_0 * (1 - 1e-15)
    assert g <= ATOM.gamma_0 * (1 + guided + excess) * (1 + 1e-15)
    if guided + excess > 1e-6 and d < 2e-6:
        assert g > ATOM.gamma_0


def test_rate_gradient_finite_difference(mode):
    r = A + np.geomspace(1e-9, 1e-6, 20)
    h = 1e-6 * r
    fd = (gamma_total(MODEL, mode, ATOM, r + h) - gamma_total(MODEL, mode, ATOM, r - h)) / (2 * h)
    np.testing.assert_allclose(gamma_total_gradient(MODEL, mode, ATOM, r), fd, rtol=1e-6)


def test_default_delta_c3_is_the_calibrated_value():
    assert DEFAULT_DELTA_C3 == pytest.approx(1.9925e-49, rel=1e-4)
    assert MODEL.delta_c3 == DEFAULT_DELTA_C3
