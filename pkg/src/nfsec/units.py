"""Unit conversions used at the config and export boundaries.

Everything internal is SI (meters, watts, Hz, radians). dBm, GHz and
degrees appear only when reading configs and writing reports.
"""

import numpy as np

# Reported for zero linear power instead of -inf.
DBM_FLOOR = -200.0

SPEED_OF_LIGHT = 299_792_458.0  # m/s


def dbm_to_watts(dbm: float) -> float:
    return 10.0 ** (dbm / 10.0) * 1e-3


def watts_to_dbm(watts) -> np.ndarray | float:
    """Convert linear power to dBm, flooring nonpositive values at DBM_FLOOR."""
    w = np.asarray(watts, dtype=float)
    out = np.full(w.shape, DBM_FLOOR)
    np.log10(w * 1e3, out=out, where=w > 0)
    out = np.where(w > 0, 10.0 * out, DBM_FLOOR)
    out = np.maximum(out, DBM_FLOOR)
    if np.ndim(watts) == 0:
        return float(out)
    return out
