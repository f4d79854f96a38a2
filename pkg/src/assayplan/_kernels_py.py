"""Pure-numpy implementation of the belief hot kernels.

Selected at import time by :mod:`assayplan.kernels` when the compiled
extension is unavailable.  Both backends implement the same five functions
with identical summation order, so results agree to float rounding.
"""

import numpy as np

BACKEND = "python"


def distance_accumulate(base, feat_matrix, rows, coefs, values):
    """Add weighted squared deviations for the given feature rows.

    out[i] = base[i] + sum_j coefs[j] * (values[j] - feat_matrix[rows[j], i])**2
    """
    out = base.copy()
    if len(rows) == 0:
        return out
    sub = feat_matrix[rows]
    out += (coefs[:, None] * (values[:, None] - sub) ** 2).sum(axis=0)
    return out


def weights_from_distances(d, lambda_w):
    """Stabilized kernel weights: raw = exp(-lambda_w * (d - min(d)))."""
    dmin = float(d.min())
    raw = np.exp(-lambda_w * (d - dmin))
    total = float(np.cumsum(raw)[-1]) if raw.size else 0.0
    return raw, dmin, total


def target_stats(d, lambda_w, g_idx, g_vals, g_in):
    """Mass, weighted mean, weighted variance and in-range mass over I_g.

    Weights are stabilized with the global minimum distance so that the
    returned mass reflects how much of the total belief sits on records
    with a known target value.
    """
    dmin = float(d.min())
    e = np.exp(-lambda_w * (d[g_idx] - dmin))
    mass = float(np.cumsum(e)[-1]) if e.size else 0.0
    if mass <= 0.0:
        return mass, float("nan"), float("nan"), float("nan")
    gbar = float(np.cumsum(e * g_vals)[-1]) / mass
    h = float(np.cumsum(e * (g_vals - gbar) ** 2)[-1]) / mass
    l_mass = float(np.cumsum(e * g_in)[-1]) / mass
    return mass, gbar, h, l_mass


def sample_index(d, lambda_w, u):
    """Inverse-CDF draw over the normalized weights for a uniform u in [0,1).

    The final prefix absorbs rounding: u beyond the last partial sum maps
    to the last index.
    """
    raw, _, total = weights_from_distances(d, lambda_w)
    c = np.cumsum(raw)
    idx = int(np.searchsorted(c, u * total, side="right"))
    return min(idx, len(d) - 1)
