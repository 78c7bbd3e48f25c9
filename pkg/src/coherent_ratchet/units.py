"""Unit system: energies in cm^-1, times in fs, temperatures in K."""

import numpy as np

#: speed of light in cm/fs
SPEED_OF_LIGHT = 2.99792458e-5
#: reduced Planck constant in cm^-1 fs, i.e. 1 / (2 pi c)
HBAR = 1.0 / (2.0 * np.pi * SPEED_OF_LIGHT)
#: Boltzmann constant in cm^-1 / K
BOLTZMANN = 0.695034800

#: default hop length used to convert dimer hops into distances
DIMER_SPACING_NM = 3.0


def thermal_energy(temperature):
    """Return k_B T in cm^-1."""
    return BOLTZMANN * temperature


def beta(temperature):
    """Inverse thermal energy 1/(k_B T) in cm."""
    return 1.0 / thermal_energy(temperature)


def to_angular_frequency(energy):
    """Convert an energy in cm^-1 to an angular frequency in rad/fs."""
    return np.asarray(energy) / HBAR


def to_wavenumber(omega):
    """Convert an angular frequency in rad/fs to an energy in cm^-1."""
    return np.asarray(omega) * HBAR


def oscillation_period(energy_gap):
    """Period (fs) of a quantum beat at the given energy gap (cm^-1)."""
    return 2.0 * np.pi * HBAR / energy_gap
