import math

import mpmath
import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st
from scipy.special import jv, kve

from nanofiber.constants import EPS0, C_LIGHT, sellmeier_silica
from nanofiber.errors import ConfigError, DomainError, NoBracket
from nanofiber.fiber_mode import (
    FiberSpec, axial_flux, dispersion_function, evanescent_power_fraction, hybrid_residual,
    intensity_gradient, intensity_profile, mode_fields, scan_brackets, solve_he11,
)

A = 250e-9


def test_v_number_closed_form(mode, fiber):
    v = 2 * math.pi * A / 852e-9 * math.sqrt(1.4525 ** 2 - 1)
    assert mode.v_number == pytest.approx(v, rel=1e-14)
    assert mode.v_number == pytest.approx(1.942, abs=5e-4)
    assert mode.v_number < 2.405


def test_beta_strictly_inside_bracket(mode, fiber):
    k = 2 * math.pi / 852e-9
    assert k * 1.0 < mode.beta < k * 1.4525
    assert k == pytest.approx(7.374e6, rel=1e-3)
    assert 1.4525 * k == pytest.approx(1.0711e7, rel=1e-4)
    assert mode.h ** 2 == pytest.approx((1.4525 * k) ** 2 - mode.beta ** 2, rel=1e-12)
    assert mode.q ** 2 == pytest.approx(mode.beta ** 2 - k ** 2, rel=1e-12)
    assert 0 < mode.guided_fraction_outside < 1


def test_beta_matches_independent_fine_scan(mode, fiber):
    k = fiber.k0
    betas = np.linspace(k * (1 + 1e-9), 1.4525 * k * (1 - 1e-9), 200_001)
    with np.errstate(all="ignore"):
        vals = dispersion_function(fiber, betas)
    ok = np.isfinite(vals[:-1]) & np.isfinite(vals[1:])
    idx = np.nonzero(ok & (np.sign(vals[:-1]) != np.sign(vals[1:])))[0]
    roots = [i for i in idx if abs(vals[i]) + abs(vals[i + 1]) < 1.0]
    assert len(roots) == 1
    i = roots[0]
    assert betas[i] <= mode.beta <= betas[i + 1]


def test_frozen_default_mode_values(mode):
    # oracle values from the standalone dimensionless solver used during development
    assert mode.effective_index == pytest.approx(1.144014, abs=2e-6)
    assert mode.q == pytest.approx(4.0979e6, rel=1e-4)
    assert mode.guided_fraction_outside == pytest.approx(0.3470, abs=2e-4)


def _hybrid_det_mp(fiber, beta):
    mpmath.mp.dps = 40
    k = 2 * mpmath.pi / mpmath.mpf(fiber.wavelength)
    b = mpmath.mpf(beta)
    a = mpmath.mpf(fiber.radius)
    n1, n2 = mpmath.mpf(fiber.n_core), mpmath.mpf(fiber.n_clad)
    u = a * mpmath.sqrt(n1 ** 2 * k ** 2 - b ** 2)
    w = a * mpmath.sqrt(b ** 2 - n2 ** 2 * k ** 2)
    jr = mpmath.besselj(1, u, derivative=1) / (u * mpmath.besselj(1, u))
    kr = mpmath.diff(lambda x: mpmath.besselk(1, x), w) / (w * mpmath.besselk(1, w))
    lhs = (jr + kr) * (n1 ** 2 * jr + n2 ** 2 * kr)
    rhs = (b / k) ** 2 * (1 / u ** 2 + 1 / w ** 2) ** 2
    return float(abs(lhs - rhs) / abs(rhs))


def test_root_satisfies_high_precision_determinant(mode, fiber):
    assert _hybrid_det_mp(fiber, mode.beta) < 1e-12
    assert mode.dispersion_residual < 1e-12


@pytest.mark.parametrize("n", [0, 1, 2])
def test_bessel_j_against_mpmath(n):
    mpmath.mp.dps = 30
    for x in np.geomspace(1e-3, 2.4, 40):
        ref = float(mpmath.besselj(n, x))
        assert jv(n, x) == pytest.approx(ref, rel=1e-10)


@pytest.mark.parametrize("n", [0, 1, 2])
def test_scaled_bessel_k_against_mpmath(n):
    mpmath.mp.dps = 30
    for x in np.geomspace(1e-3, 60.0, 60):
        ref = float(mpmath.besselk(n, x) * mpmath.exp(x))
        assert kve(n, x) == pytest.approx(ref, rel=1e-10)


def test_single_sign_change_for_single_mode_fiber(mode):
    assert mode.n_sign_changes == 1
    assert len(scan_brackets(mode.fiber)) == 1


def test_vanishing_contrast_no_bracket_or_cutoff():
    fib = FiberSpec(n_core=1.0 + 1e-9, n_clad=1.0)
    try:
        m = solve_he11(fib)
    except NoBracket:
        return
    assert (m.beta - fib.k0) / fib.k0 < 1e-8


def test_invalid_fiber_rejected():
    with pytest.raises(ConfigError):
        FiberSpec(n_core=1.0, n_clad=1.2)
    with pytest.raises(ConfigError):
        FiberSpec(radius=-1.0)
    with pytest.raises(ConfigError):
        FiberSpec(n_clad=0.9, n_core=1.2)


def test_sellmeier_default_index():
    assert sellmeier_silica(852e-9) == pytest.approx(1.4525, abs=1e-4)


@settings(max_examples=100, deadline=None)
@given(
    radius=st.floats(50e-9, 1e-6),
    wavelength=st.floats(400e-9, 1600e-9),
    n_clad=st.floats(1.0, 1.5),
    contrast=st.floats(0.005, 1.0),
)
def test_dispersion_residual_random_fibers(radius, wavelength, n_clad, contrast):
    fib = FiberSpec(radius=radius, n_core=n_clad + contrast, n_clad=n_clad, wavelength=wavelength)
    # below V ~ 0.4 the HE11 offset beta - n2 k underflows double precision
    assume(fib.v_number >= 0.5)
    m = solve_he11(fib, tol=1e-12)
    assert m.dispersion_residual < 1e-12
    assert hybrid_residual(fib, m.beta) < 1e-12
    assert fib.n_clad * fib.k0 < m.beta < fib.n_core * fib.k0
    assert 0 < m.guided_fraction_outside < 1


def test_tangential_fields_continuous(mode):
    a = mode.fiber.radius
    eps = a * 1e-12
    f_in = mode_fields(mode, np.array([a - eps]))
    f_out = mode_fields(mode, np.array([a + eps]))
    for key in ("Ephi", "Ez", "Hphi", "Hz", "Hr"):
        scale = max(abs(f_in[key][0]), abs(f_out[key][0]))
        assert abs(f_in[key][0] - f_out[key][0]) <= 1e-6 * scale, key
    # normal D is continuous, so Er jumps by n1^2/n2^2
    n1, n2 = mode.fiber.n_core, mode.fiber.n_clad
    assert f_in["Er"][0] * n1 ** 2 == pytest.approx(f_out["Er"][0] * n2 ** 2, rel=1e-6)


def _composite_gl(func, lo, hi, panels, order=10):
    x, w = np.polynomial.legendre.leggauss(order)
    edges = np.linspace(lo, hi, panels + 1)
    total = 0.0
    for a0, b0 in zip(edges[:-1], edges[1:]):
        xs = 0.5 * (b0 - a0) * x + 0.5 * (b0 + a0)
        total += 0.5 * (b0 - a0) * np.sum(w * func(xs))
    return total


def test_total_power_by_independent_quadrature(mode):
    a, q = mode.fiber.radius, mode.q
    flux = lambda x: 2 * np.pi * a * a * x * axial_flux(mode, 1.0, a * x)
    outer = 1 + 60 / (q * a)
    results = []
    for panels in (100, 200):
        inside = _composite_gl(flux, 0.0, 1.0, panels // 4)
        outside = _composite_gl(flux, 1.0, outer, panels)
        results.append((inside, outside))
    (i1, o1), (i2, o2) = results
    assert abs((i1 + o1) - (i2 + o2)) < 1e-10
    assert i2 + o2 == pytest.approx(1.0, rel=1e-4)
    assert o2 / (i2 + o2) == pytest.approx(mode.guided_fraction_outside, rel=1e-6)


def test_intensity_matches_field_components(mode):
    r = mode.fiber.radius + np.array([0.0, 50e-9, 370e-9, 1e-6])
    f = mode_fields(mode, r)
    e2 = sum(np.abs(f[k]) ** 2 for k in ("Er", "Ephi", "Ez"))
    direct = 0.5 * EPS0 * C_LIGHT * mode.amplitude_norm * e2
    np.testing.assert_allclose(intensity_profile(mode, 1.0, r), direct, rtol=1e-10)


def test_intensity_ratio_370nm(mode):
    a = mode.fiber.radius
    f = mode_fields(mode, np.array([a, a + 370e-9]))
    e2 = sum(np.abs(f[k]) ** 2 for k in ("Er", "Ephi", "Ez"))
    ratio = intensity_profile(mode, 1e-9, a) / intensity_profile(mode, 1e-9, a + 370e-9)
    assert ratio == pytest.approx(e2[0] / e2[1], rel=1e-10)
    assert ratio == pytest.approx(52.86, rel=1e-3)


def test_intensity_linear_in_power_and_zero_at_zero(mode):
    r = mode.fiber.radius + np.linspace(0, 1e-6, 11)
    np.testing.assert_allclose(intensity_profile(mode, 2e-9, r), 2 * intensity_profile(mode, 1e-9, r),
                               rtol=1e-15)
    assert np.all(intensity_profile(mode, 0.0, r) == 0)


def test_surface_intensity_at_one_nanowatt(mode):
    assert intensity_profile(mode, 1e-9, mode.fiber.radius) == pytest.approx(2485, rel=1e-3)


def test_intensity_monotone_and_asymptotic(mode):
    a, q = mode.fiber.radius, mode.q
    r = a + np.linspace(0, 3e-6, 500)
    i = intensity_profile(mode, 1.0, r)
    assert np.all(np.diff(i) < 0)
    far = a + np.array([5e-6, 10e-6])
    scaled = intensity_profile(mode, 1.0, far) * far * np.exp(2 * q * far)
    assert scaled[1] / scaled[0] == pytest.approx(1.0, abs=0.01)


def test_intensity_gradient_finite_difference(mode):
    r = mode.fiber.radius + np.geomspace(1e-9, 1.5e-6, 30)
    h = 1e-6 * r
    fd = (intensity_profile(mode, 1.0, r + h) - intensity_profile(mode, 1.0, r - h)) / (2 * h)
    np.testing.assert_allclose(intensity_gradient(mode, 1.0, r), fd, rtol=1e-6)


def test_interior_radius_rejected(mode):
    with pytest.raises(DomainError):
        intensity_profile(mode, 1e-9, mode.fiber.radius * 0.9)


def test_evanescent_fraction(mode):
    assert evanescent_power_fraction(mode, 0.0) == 0.0
    assert evanescent_power_fraction(mode, np.inf) == pytest.approx(1.0, abs=1e-14)
    f370 = evanescent_power_fraction(mode, 370e-9)
    assert f370 >= 0.75
    assert f370 == pytest.approx(0.9474, abs=2e-4)
    d = np.linspace(0, 3e-6, 300)
    assert np.all(np.diff(evanescent_power_fraction(mode, d)) >= 0)
    with pytest.raises(DomainError):
        evanescent_power_fraction(mode, -1e-9)


def test_evanescent_fraction_by_quadrature(mode):
    a, q = mode.fiber.radius, mode.q
    flux = lambda x: x * axial_flux(mode, 1.0, a * x)
    part = _composite_gl(flux, 1.0, 1 + 370e-9 / a, 100)
    whole = _composite_gl(flux, 1.0, 1 + 60 / (q * a), 400)
    assert evanescent_power_fraction(mode, 370e-9) == pytest.approx(part / whole, rel=1e-8)


def test_summary_keys(mode):
    s = mode.summary()
    for key in ("beta", "h", "q", "v_number", "guided_fraction_outside"):
        assert key in s and math.isfinite(s[key])


def test_solver_fast(fiber):
    import time
    t = time.perf_counter()
    solve_he11(fiber)
    assert time.perf_counter() - t < 1.0
