import os
import subprocess
import sys

import numpy as np
import pytest

from pseudoym import kernels


def _inputs(n=12, seed=0):
    rng = np.random.default_rng(seed)
    return (rng.standard_normal((3, n, n, n)), np.array([0.1, 0.2, 0.15]),
            rng.standard_normal((2, 3, n, n, n)))


def test_gradient_exact_on_quadratics():
    n = 10
    h = np.array([0.1, 0.2, 0.3])
    x, y, z = np.meshgrid(*[h[k] * np.arange(n) for k in range(3)], indexing="ij")
    u = x * x + 3 * x * y - z * z
    g = kernels.gradient_np(u, h)
    assert np.allclose(g[0], 2 * x + 3 * y)
    assert np.allclose(g[1], 3 * x)
    assert np.allclose(g[2], -2 * z)


def test_field_strength_of_gradient_vanishes():
    n = 10
    h = np.array([0.1, 0.1, 0.1])
    x, y, z = np.meshgrid(*[h[k] * np.arange(n) for k in range(3)], indexing="ij")
    a = kernels.gradient_np(x * y + z * z * x, h)
    F = kernels.field_strength_np(a, h)
    assert np.allclose(F, 0, atol=1e-10)
    assert np.allclose(F, -np.swapaxes(F, 0, 1))


@pytest.mark.skipif(kernels.numba is None, reason="numba not installed")
def test_numba_matches_numpy():
    a, h, E = _inputs()
    F_np = kernels.field_strength_np(a, h)
    F_nb = kernels.field_strength_nb(a, h)
    assert np.allclose(F_np, F_nb, rtol=1e-12, atol=1e-12)
    f_np, B_np = kernels.horizontal_bivector_np(F_np, E)
    f_nb, B_nb = kernels.horizontal_bivector_nb(F_np, E)
    assert np.allclose(f_np, f_nb, atol=1e-11)
    assert np.allclose(B_np, B_nb, atol=1e-11)
    assert np.allclose(kernels.divergence_np(B_np, h), kernels.divergence_nb(B_np, h),
                       atol=1e-10)


def test_env_var_selects_numpy():
    env = dict(os.environ, PSEUDOYM_DISABLE_NUMBA="1")
    out = subprocess.run([sys.executable, "-c",
                          "from pseudoym import kernels; print(kernels.USE_NUMBA)"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "False"
