"""The compiled and pure-python kernel backends must agree."""

import numpy as np
import pytest

from assayplan import _kernels_py
from assayplan import kernels

cy = pytest.importorskip("assayplan._kernels_cy")


def random_inputs(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(1, 40))
    k = int(rng.integers(1, 5))
    base = rng.uniform(0, 3, n)
    matrix = np.ascontiguousarray(rng.normal(0, 2, (k, n)))
    n_rows = int(rng.integers(0, k + 1))
    rows = np.sort(rng.choice(k, size=n_rows, replace=False)).astype(np.int64)
    coefs = rng.uniform(0.1, 4.0, n_rows)
    values = rng.normal(0, 2, n_rows)
    lambda_w = float(rng.uniform(0.2, 3.0))
    n_g = int(rng.integers(1, n + 1))
    g_idx = np.sort(rng.choice(n, size=n_g, replace=False)).astype(np.int64)
    g_vals = rng.normal(0, 1, n_g)
    g_in = (rng.random(n_g) < 0.5).astype(np.float64)
    return base, matrix, rows, coefs, values, lambda_w, g_idx, g_vals, g_in


@pytest.mark.parametrize("seed", range(30))
def test_backends_agree(seed):
    base, matrix, rows, coefs, values, lambda_w, g_idx, g_vals, g_in = (
        random_inputs(seed)
    )
    d_py = _kernels_py.distance_accumulate(base, matrix, rows, coefs, values)
    d_cy = cy.distance_accumulate(base, matrix, rows, coefs, values)
    assert np.allclose(d_py, d_cy, atol=1e-12)

    raw_py, dmin_py, tot_py = _kernels_py.weights_from_distances(d_py, lambda_w)
    raw_cy, dmin_cy, tot_cy = cy.weights_from_distances(d_cy, lambda_w)
    assert dmin_py == pytest.approx(dmin_cy, rel=1e-13, abs=1e-13)
    assert tot_py == pytest.approx(tot_cy, rel=1e-13)
    assert np.allclose(raw_py, raw_cy, atol=1e-13)

    s_py = _kernels_py.target_stats(d_py, lambda_w, g_idx, g_vals, g_in)
    s_cy = cy.target_stats(d_cy, lambda_w, g_idx, g_vals, g_in)
    for a, b in zip(s_py, s_cy):
        assert a == pytest.approx(b, rel=1e-12, abs=1e-12)

    rng = np.random.default_rng(seed + 999)
    for u in rng.random(20):
        assert _kernels_py.sample_index(d_py, lambda_w, float(u)) == cy.sample_index(
            d_cy, lambda_w, float(u)
        )


def test_dispatcher_selected_a_backend():
    assert kernels.BACKEND in ("cython", "python")


def test_sample_index_covers_last_bin():
    d = np.array([0.0, 0.0])
    assert _kernels_py.sample_index(d, 1.0, 0.999999) == 1
    assert cy.sample_index(d, 1.0, 0.999999) == 1
    assert _kernels_py.sample_index(d, 1.0, 0.0) == 0
    assert cy.sample_index(d, 1.0, 0.0) == 0
