"""
HE11 mode of a vacuum-clad step-index nanofiber.

The fundamental hybrid mode is found from the exact two-layer eigenvalue
equation (Bessel J inside, modified Bessel K outside).  Field amplitudes are
fixed by requiring the axial Poynting flux through the whole cross-section to
equal the guided power.  The exterior intensity is the azimuthal average of
|E|^2, which for HE11 equals the quasi-circular profile and is the same for
an incoherent linear/circular polarization mixture.

Conventions
-----------
Fields carry exp[i(beta z + phi - omega t)].  Inside the core the transverse
wavenumber is ``h``, outside the decay constant is ``q``; ``u = h a`` and
``w = q a``.  Modified Bessel functions are always evaluated in their
exponentially scaled form (``kve``) and recombined as ratios, so thick fibers
and large radii do not overflow.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq
from scipy.special import jv, kve

from .constants import C_LIGHT, EPS0, MU0, SILICA_INDEX_852
from .errors import ConfigError, DomainError, NoBracket, NonFinite

SCAN_POINTS = 2048
_REFINE_SCHEDULE = (8192, 32768)


@dataclass(frozen=True)
class FiberSpec:
    """Geometry and indices of a step-index fiber (SI units)."""

    radius: float = 250e-9
    n_core: float = SILICA_INDEX_852
    n_clad: float = 1.0
    wavelength: float = 852e-9

    def __post_init__(self):
        if not self.radius > 0:
            raise ConfigError(f"fiber radius must be positive, got {self.radius}")
        if not self.wavelength > 0:
            raise ConfigError(f"wavelength must be positive, got {self.wavelength}")
        if not self.n_clad >= 1.0:
            raise ConfigError(f"cladding index must be >= 1, got {self.n_clad}")
        if not self.n_core > self.n_clad:
            raise ConfigError(
                f"core index {self.n_core} must exceed cladding index {self.n_clad}")

    @property
    def k0(self) -> float:
        return 2 * np.pi / self.wavelength

    @property
    def v_number(self) -> float:
        return self.k0 * self.radius * np.sqrt(self.n_core ** 2 - self.n_clad ** 2)


@dataclass(frozen=True)
class ModeSolution:
    """Solved HE11 mode.

    ``amplitude_norm`` is |A|^2 per watt of guided power, where A is the
    amplitude of E_z = A J1(h r) inside the core.
    """

    fiber: FiberSpec
    beta: float
    h: float
    q: float
    v_number: float
    hybrid_s: float
    amplitude_norm: float
    guided_fraction_outside: float
    dispersion_residual: float
    n_sign_changes: int = field(default=1, compare=False)

    @property
    def u(self) -> float:
        return self.h * self.fiber.radius

    @property
    def w(self) -> float:
        return self.q * self.fiber.radius

    @property
    def effective_index(self) -> float:
        return self.beta / self.fiber.k0

    @property
    def decay_length(self) -> float:
        """1/e length of the exterior intensity far from the surface, 1/(2q)."""
        return 0.5 / self.q

    def summary(self) -> dict:
        return {
            "beta": self.beta,
            "h": self.h,
            "q": self.q,
            "v_number": self.v_number,
            "guided_fraction_outside": self.guided_fraction_outside,
            "effective_index": self.effective_index,
            "radius_m": self.fiber.radius,
            "wavelength_m": self.fiber.wavelength,
            "n_core": self.fiber.n_core,
            "n_clad": self.fiber.n_clad,
        }


# ----------------------------------------------------------------------
# eigenvalue equation
# ----------------------------------------------------------------------

def _uw(fiber, beta):
    k = fiber.k0
    h = np.sqrt(np.maximum(fiber.n_core ** 2 * k ** 2 - beta ** 2, 0.0))
    q = np.sqrt(np.maximum(beta ** 2 - fiber.n_clad ** 2 * k ** 2, 0.0))
    return h, q, h * fiber.radius, q * fiber.radius


def _k_ratio(w):
    # K1'(w) / (w K1(w)) using K1' = -(K0 + K2)/2
    return -(kve(0, w) + kve(2, w)) / (2 * w * kve(1, w))


def _j_ratio(u):
    # J1'(u) / (u J1(u)) using J1' = (J0 - J2)/2
    return (jv(0, u) - jv(2, u)) / (2 * u * jv(1, u))


def dispersion_function(fiber: FiberSpec, beta):
    """HE-branch eigenvalue function; zero at the HE11 propagation constant."""
    h, q, u, w = _uw(fiber, beta)
    n1s, n2s = fiber.n_core ** 2, fiber.n_clad ** 2
    kr = _k_ratio(w)
    root = np.sqrt(((n1s - n2s) / (2 * n1s)) ** 2 * kr ** 2
                   + (beta / (fiber.n_core * fiber.k0)) ** 2 * (1 / w ** 2 + 1 / u ** 2) ** 2)
    return jv(0, u) / (u * jv(1, u)) + (n1s + n2s) / (2 * n1s) * kr - 1 / u ** 2 + root


def hybrid_residual(fiber: FiberSpec, beta: float) -> float:
    """Relative residual of the full hybrid-mode determinant.

    (Jr + Kr)(n1^2 Jr + n2^2 Kr) = (beta/k)^2 (1/u^2 + 1/w^2)^2, divided by
    the magnitude of the right-hand side.  Independent of the branch
    selection used in :func:`dispersion_function`.
    """
    h, q, u, w = _uw(fiber, beta)
    jr, kr = _j_ratio(u), _k_ratio(w)
    lhs = (jr + kr) * (fiber.n_core ** 2 * jr + fiber.n_clad ** 2 * kr)
    rhs = (beta / fiber.k0) ** 2 * (1 / u ** 2 + 1 / w ** 2) ** 2
    return float(abs(lhs - rhs) / abs(rhs))


def _sign_changes(fiber, betas):
    with np.errstate(all="ignore"):
        vals = dispersion_function(fiber, betas)
    ok = np.isfinite(vals)
    idx = np.nonzero(ok[:-1] & ok[1:] & (np.sign(vals[:-1]) != np.sign(vals[1:])))[0]
    brackets = []
    for i in idx:
        lo, hi = betas[i], betas[i + 1]
        # a pole flips sign with a large jump; a root does not
        mid = dispersion_function(fiber, 0.5 * (lo + hi))
        if abs(mid) <= max(abs(vals[i]), abs(vals[i + 1])):
            brackets.append((lo, hi))
    return brackets


def scan_brackets(fiber: FiberSpec, n_scan: int = SCAN_POINTS):
    """Sign-change brackets of the eigenvalue function on a uniform beta grid."""
    lo, hi = fiber.n_clad * fiber.k0, fiber.n_core * fiber.k0
    betas = np.linspace(lo, hi, n_scan + 2)[1:-1]
    return _sign_changes(fiber, betas)


def _near_cutoff_betas(fiber, n):
    # geometric sampling in w near the lower bracket end (weak guidance)
    w = np.geomspace(1e-12, fiber.v_number * (1 - 1e-12), n)
    return np.sqrt(fiber.n_clad ** 2 * fiber.k0 ** 2 + (w / fiber.radius) ** 2)


def solve_he11(fiber: FiberSpec, tol: float = 1e-12) -> ModeSolution:
    """Solve for the fundamental HE11 mode.

    Coarse uniform scan of ``SCAN_POINTS`` samples in (n2 k, n1 k), refined
    with denser uniform scans and finally a geometric scan near cutoff.  The
    largest-beta root is the fundamental mode; Brent's method polishes it to
    full double precision and ``tol`` bounds the relative residual of the
    hybrid determinant that the returned root must meet.
    """
    k = fiber.k0
    brackets = scan_brackets(fiber)
    for n in _REFINE_SCHEDULE:
        if brackets:
            break
        brackets = scan_brackets(fiber, n)
    if not brackets:
        brackets = _sign_changes(fiber, _near_cutoff_betas(fiber, _REFINE_SCHEDULE[-1]))
    if not brackets:
        raise NoBracket(f"no HE11 root in ({fiber.n_clad * k:.6g}, {fiber.n_core * k:.6g}) "
                        f"for V = {fiber.v_number:.4g}")

    lo, hi = brackets[-1]
    beta = brentq(lambda b: dispersion_function(fiber, b), lo, hi,
                  xtol=1e-300, rtol=4 * np.finfo(float).eps, maxiter=500)
    h, q, u, w = _uw(fiber, beta)
    if not (q > 0 and h > 0):
        raise NoBracket("root collapsed onto a bracket endpoint")
    residual = hybrid_residual(fiber, beta)
    if not np.isfinite(residual):
        raise NonFinite(f"eigenvalue equation not finite at beta = {beta}")
    if residual > tol:
        raise NoBracket(f"root residual {residual:.3g} exceeds tolerance {tol:.3g}")

    s = (1 / u ** 2 + 1 / w ** 2) / (_j_ratio(u) + _k_ratio(w))
    p_in, p_out = _power_unit_amplitude(fiber, beta, h, q, s)
    if not (np.isfinite(p_in) and np.isfinite(p_out)) or p_in + p_out <= 0:
        raise NonFinite("mode power integral not finite")
    return ModeSolution(
        fiber=fiber, beta=float(beta), h=float(h), q=float(q),
        v_number=float(fiber.v_number), hybrid_s=float(s),
        amplitude_norm=float(1.0 / (p_in + p_out)),
        guided_fraction_outside=float(p_out / (p_in + p_out)),
        dispersion_residual=residual, n_sign_changes=len(brackets),
    )


# ----------------------------------------------------------------------
# fields and power flow (unit amplitude A = 1)
# ----------------------------------------------------------------------

def _s12(fiber, beta, s):
    k = fiber.k0
    return beta ** 2 * s / (k ** 2 * fiber.n_core ** 2), beta ** 2 * s / (k ** 2 * fiber.n_clad ** 2)


def _kn_over_k1a(n, q, r, a):
    """K_n(q r) / K_1(q a) without overflow."""
    return kve(n, q * r) / kve(1, q * a) * np.exp(-q * (r - a))


def _j_int(n, u):
    # int_0^a J_n(h r)^2 r dr = (a^2/2) [J_n^2 - J_{n-1} J_{n+1}](u), returned / a^2
    return 0.5 * (jv(n, u) ** 2 - jv(n - 1, u) * jv(n + 1, u))


def _k_tail(n, q, r, a):
    """int_r^inf K_n(q rho)^2 rho drho / K_1(q a)^2."""
    x = q * r
    scale = np.exp(-2 * q * (r - a)) / kve(1, q * a) ** 2
    nm = abs(n - 1)
    return 0.5 * r ** 2 * (kve(nm, x) * kve(n + 1, x) - kve(n, x) ** 2) * scale


def _power_unit_amplitude(fiber, beta, h, q, s):
    a = fiber.radius
    u = h * a
    omega = C_LIGHT * fiber.k0
    s1, s2 = _s12(fiber, beta, s)
    eps1 = EPS0 * fiber.n_core ** 2
    eps2 = EPS0 * fiber.n_clad ** 2
    p_in = 2 * np.pi * beta * omega * eps1 / (4 * h ** 2) * a ** 2 * (
        (1 - s) * (1 - s1) * _j_int(0, u) + (1 + s) * (1 + s1) * _j_int(2, u))
    c2 = jv(1, u) ** 2
    p_out = 2 * np.pi * beta * omega * eps2 * c2 / (4 * q ** 2) * (
        (1 - s) * (1 - s2) * _k_tail(0, q, a, a) + (1 + s) * (1 + s2) * _k_tail(2, q, a, a))
    return p_in, p_out


def mode_fields(mode: ModeSolution, r):
    """Complex field components at unit amplitude (A = 1), phi = 0, z = 0.

    Returns a dict with keys ``Er, Ephi, Ez, Hr, Hphi, Hz`` (arrays matching r).
    """
    fib = mode.fiber
    a, beta, h, q, s = fib.radius, mode.beta, mode.h, mode.q, mode.hybrid_s
    omega = C_LIGHT * fib.k0
    s1, s2 = _s12(fib, beta, s)
    r = np.atleast_1d(np.asarray(r, dtype=float))
    inside = r < a
    out = {key: np.zeros(r.shape, dtype=complex) for key in ("Er", "Ephi", "Ez", "Hr", "Hphi", "Hz")}

    ri = r[inside]
    j0, j1, j2 = jv(0, h * ri), jv(1, h * ri), jv(2, h * ri)
    eps1 = EPS0 * fib.n_core ** 2
    out["Er"][inside] = 1j * beta / (2 * h) * ((1 - s) * j0 - (1 + s) * j2)
    out["Ephi"][inside] = -beta / (2 * h) * ((1 - s) * j0 + (1 + s) * j2)
    out["Ez"][inside] = j1
    out["Hr"][inside] = omega * eps1 / (2 * h) * ((1 - s1) * j0 + (1 + s1) * j2)
    out["Hphi"][inside] = 1j * omega * eps1 / (2 * h) * ((1 - s1) * j0 - (1 + s1) * j2)
    out["Hz"][inside] = 1j * beta * s / (omega * MU0) * j1

    ro = r[~inside]
    c = jv(1, h * a)
    k0, k1, k2 = (c * _kn_over_k1a(n, q, ro, a) for n in (0, 1, 2))
    eps2 = EPS0 * fib.n_clad ** 2
    out["Er"][~inside] = 1j * beta / (2 * q) * ((1 - s) * k0 + (1 + s) * k2)
    out["Ephi"][~inside] = -beta / (2 * q) * ((1 - s) * k0 - (1 + s) * k2)
    out["Ez"][~inside] = k1
    out["Hr"][~inside] = omega * eps2 / (2 * q) * ((1 - s2) * k0 - (1 + s2) * k2)
    out["Hphi"][~inside] = 1j * omega * eps2 / (2 * q) * ((1 - s2) * k0 + (1 + s2) * k2)
    out["Hz"][~inside] = 1j * beta * s / (omega * MU0) * k1
    return out


def axial_flux(mode: ModeSolution, power: float, r):
    """Time-averaged S_z at radius r (W/m^2), any r >= 0."""
    f = mode_fields(mode, r)
    sz = 0.5 * np.real(f["Er"] * np.conj(f["Hphi"]) - f["Ephi"] * np.conj(f["Hr"]))
    return power * mode.amplitude_norm * sz


def _exterior_shape(mode, r):
    """|E|^2 outside the fiber at unit amplitude, plus its radial derivative."""
    a, beta, q, s = mode.fiber.radius, mode.beta, mode.q, mode.hybrid_s
    c2 = jv(1, mode.u) ** 2
    k0, k1, k2 = (_kn_over_k1a(n, q, r, a) for n in (0, 1, 2))
    x = q * r
    # d/dr K_n(q r) = q K_n'(x)
    dk0 = -q * k1
    dk1 = -q * (k0 + k1 / x)
    dk2 = -q * (k1 + 2 * k2 / x)
    t = beta ** 2 / (2 * q ** 2)
    g = t * ((1 - s) ** 2 * k0 ** 2 + (1 + s) ** 2 * k2 ** 2) + k1 ** 2
    dg = 2 * t * ((1 - s) ** 2 * k0 * dk0 + (1 + s) ** 2 * k2 * dk2) + 2 * k1 * dk1
    return c2 * g, c2 * dg


def _check_exterior(mode, r):
    r = np.asarray(r, dtype=float)
    if np.any(r < mode.fiber.radius):
        raise DomainError("intensity profile is defined for r >= fiber radius only")
    return r


def intensity_profile(mode: ModeSolution, power: float, r):
    """Azimuthally averaged intensity (eps0 c/2)|E|^2 outside the fiber, W/m^2."""
    r = _check_exterior(mode, r)
    g, _ = _exterior_shape(mode, r)
    return 0.5 * EPS0 * C_LIGHT * power * mode.amplitude_norm * g


def intensity_gradient(mode: ModeSolution, power: float, r):
    """Analytic radial derivative of :func:`intensity_profile`, W/m^3."""
    r = _check_exterior(mode, r)
    _, dg = _exterior_shape(mode, r)
    return 0.5 * EPS0 * C_LIGHT * power * mode.amplitude_norm * dg


def evanescent_power_fraction(mode: ModeSolution, depth):
    """Fraction of the exterior guided power flowing within ``depth`` of the surface."""
    depth = np.asarray(depth, dtype=float)
    if np.any(depth < 0):
        raise DomainError("depth must be non-negative")
    fib = mode.fiber
    a, q, s = fib.radius, mode.q, mode.hybrid_s
    _, s2 = _s12(fib, mode.beta, s)

    def tail(rr):
        with np.errstate(invalid="ignore", over="ignore"):
            val = (1 - s) * (1 - s2) * _k_tail(0, q, rr, a) + (1 + s) * (1 + s2) * _k_tail(2, q, rr, a)
        return np.where(np.isfinite(rr), val, 0.0)

    total = tail(np.float64(a))
    frac = 1.0 - tail(a + depth) / total
    return np.clip(frac, 0.0, 1.0)
