"""Physical constants (CODATA 2018), SI units.

Kept explicit rather than pulled from ``scipy.constants`` so results do not
shift when scipy moves to a newer CODATA release.
"""
import math

HBAR = 1.054571817e-34  # J s
E_CHARGE = 1.602176634e-19  # C
MU0 = 1.25663706212e-6  # N / A^2
EPS0 = 8.8541878128e-12  # F / m
AMU = 1.66053906660e-27  # kg
M_ELECTRON = 9.1093837015e-31  # kg

TWO_PI = 2.0 * math.pi

# 9Be atomic mass in u; the ion mass subtracts one electron.
BE9_ATOMIC_MASS_U = 9.0121830
BE9_ION_MASS = BE9_ATOMIC_MASS_U * AMU - M_ELECTRON

MEV = 1e-3 * E_CHARGE  # joules per meV
