"""Physical constants (CODATA via scipy) and caesium D2 defaults."""

from scipy import constants as _sc

C_LIGHT = _sc.c
EPS0 = _sc.epsilon_0
MU0 = _sc.mu_0
HBAR = _sc.hbar
H_PLANCK = _sc.h
KB = _sc.k
AMU = _sc.atomic_mass

# Cs D2 (6S1/2 F=4 -> 6P3/2 F'=5)
CS_MASS = 132.905451933 * AMU
CS_LINEWIDTH_HZ = 5.2e6
CS_ISAT_FREE = 18.0  # W/m^2, incoherent linear/circular polarization mixture
CS_D2_WAVELENGTH = 852.347e-9

# fused silica at 852 nm (Sellmeier)
SILICA_INDEX_852 = 1.4525


def sellmeier_silica(wavelength):
    """Refractive index of fused silica (Malitson Sellmeier fit), wavelength in metres."""
    lam2 = (wavelength * 1e6) ** 2
    return (1
            + 0.6961663 * lam2 / (lam2 - 0.0684043 ** 2)
            + 0.4079426 * lam2 / (lam2 - 0.1162414 ** 2)
            + 0.8974794 * lam2 / (lam2 - 9.896161 ** 2)) ** 0.5
