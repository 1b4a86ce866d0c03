"""Pinned physical constants (CODATA 2018 exact SI values) and the nucleus table.

Every numeric routine in the package reads its constants from here.
"""

import math

PLANCK = 6.62607015e-34  # J s
HBAR = PLANCK / (2.0 * math.pi)  # J s
BOLTZMANN = 1.380649e-23  # J / K
ELECTRON_VOLT = 1.602176634e-19  # J

# Gyromagnetic ratios, rad s^-1 T^-1.
GAMMA = {
    "H1": 2.6752219e8,
    "C13": 6.728284e7,
    "N15": -2.712618e7,
    "F19": 2.518148e8,
    "P31": 1.08394e8,
}

DEFAULT_RF_NUTATION_HZ = 25e3
WEAK_COUPLING_RATIO = 0.1
SELECTIVITY_WARN_MARGIN = 5.0
