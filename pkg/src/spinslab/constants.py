"""Shared physical constants and unit conversions.

All angular frequencies in this package are in rad/s, lengths in nm unless a
function documents otherwise.  The diamond lattice density below is the single
source of truth for every ppm-based unit conversion in the project.
"""

import numpy as np

# Diamond atomic density (carbon sites per cm^3).
DIAMOND_ATOM_DENSITY_CM3 = 1.76e23

# 1 ppm of lattice sites, expressed as a volume density.
PPM_TO_ATOMS_PER_CM3 = 1e-6 * DIAMOND_ATOM_DENSITY_CM3  # 1.76e17 cm^-3
PPM_TO_ATOMS_PER_NM3 = PPM_TO_ATOMS_PER_CM3 * 1e-21  # 1.76e-4 nm^-3

# 1 ppm*nm of areal density (ppm over a 1 nm slab).
PPM_NM_TO_ATOMS_PER_CM2 = PPM_TO_ATOMS_PER_CM3 * 1e-7  # 1.76e10 cm^-2
PPM_NM_TO_ATOMS_PER_NM2 = PPM_TO_ATOMS_PER_NM3  # 1.76e-4 nm^-2

# Calibrated dipolar coupling prefactor, rad/s * nm^3.
J0_DEFAULT = 2 * np.pi * 52e6

# Minimum pair separation (diamond bond length, nm).  Keeps 1/r^3 couplings
# finite for randomly sampled configurations.
EXCLUSION_RADIUS_NM = 0.154

# Electron gyromagnetic ratio for g_e = 2.0028: gamma_e = g_e mu_B / hbar.
GAMMA_E_HZ_PER_T = 28.024e9  # Hz/T
GAMMA_E_RAD_PER_S_T = 2 * np.pi * GAMMA_E_HZ_PER_T

HBAR = 1.054571817e-34  # J s
MU_B = 9.2740100783e-24  # J/T
MU_0 = 4 * np.pi * 1e-7  # T m / A

# Atomic number density of bcc iron (7.874 g/cm^3, 55.845 g/mol).
FE_ATOM_DENSITY_M3 = 8.49e28
