"""Unit conventions.

Internally all energies and frequencies are angular (rad/us), lengths are
measured in units of the lattice spacing ``a`` unless a physical spacing is
attached, and times are in microseconds.  Files and CLI I/O quote frequencies
as nu = omega/2pi in MHz, which is how hardware parameters are usually given.
"""

import math

TWO_PI = 2.0 * math.pi

# Hardware reference values for the 70S_1/2 Rydberg state of Rb-87.
C6_MHZ_UM6 = 862690.0          # C6/2pi in MHz um^6
OMEGA_MAX_MHZ = 2.5            # peak Rabi frequency, Omega/2pi in MHz

# Machine envelope: atom count and field-of-view of the tweezer array.
MAX_ATOMS = 256
FIELD_OF_VIEW_UM = (75.0, 128.0)


def mhz_to_rad(nu_mhz: float) -> float:
    """Convert a frequency quoted as nu = omega/2pi [MHz] to rad/us."""
    return TWO_PI * nu_mhz


def rad_to_mhz(omega_rad: float) -> float:
    """Convert an angular frequency [rad/us] to nu = omega/2pi [MHz]."""
    return omega_rad / TWO_PI


def blockade_radius(c6: float, omega: float) -> float:
    """Blockade radius (C6/Omega)^(1/6) for C6, Omega > 0.

    Both arguments must be in consistent units (e.g. rad/us and
    rad/us*length^6); the result carries the corresponding length unit.
    """
    if c6 <= 0.0 or omega <= 0.0:
        raise ValueError(f"C6 and Omega must be positive, got {c6}, {omega}")
    return (c6 / omega) ** (1.0 / 6.0)


def c6_from_blockade_radius(r_b: float, omega: float) -> float:
    """Inverse of :func:`blockade_radius`: C6 = Omega * R_b^6."""
    if r_b <= 0.0 or omega <= 0.0:
        raise ValueError(f"R_b and Omega must be positive, got {r_b}, {omega}")
    return omega * r_b**6
