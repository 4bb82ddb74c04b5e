"""Power unit conversions. Scalars in, scalars out; arrays in, arrays out."""

import numpy as np


def _unwrap(x):
    return float(x) if np.ndim(x) == 0 else x


def dbm_to_mw(dbm):
    return _unwrap(10.0 ** (np.asarray(dbm, dtype=float) / 10.0))


def mw_to_dbm(mw):
    return _unwrap(10.0 * np.log10(np.asarray(mw, dtype=float)))
