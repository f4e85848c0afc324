"""Grid kernels of the abelian flow.

Each kernel has a numba version and a numpy version with the same
signature.  Set ``PSEUDOYM_DISABLE_NUMBA=1`` (or run without numba
installed) to use the numpy versions.
"""

import os

import numpy as np

try:
    import numba
except ImportError:  # pragma: no cover
    numba = None

DISABLED = os.environ.get("PSEUDOYM_DISABLE_NUMBA", "").lower() in ("1", "true", "yes")
USE_NUMBA = numba is not None and not DISABLED


# ------------------------------------------------------------ numpy path

def gradient_np(u, h):
    """du/dx_k for a 3-d array: central differences, second order at edges."""
    return np.stack([np.gradient(u, h[k], axis=k, edge_order=2) for k in range(3)])


def field_strength_np(a, h):
    """F[k, l] = d_k a_l - d_l a_k for a[l, i, j, k] on a uniform grid."""
    da = np.stack([gradient_np(a[l], h) for l in range(a.shape[0])], axis=1)
    return da - np.swapaxes(da, 0, 1)


def horizontal_bivector_np(F, E):
    """Projection of F onto the horizontal frame E[i, k, grid].

    Returns (f, B) with f[i, j] = F(E_i, E_j) and
    B[k, l] = sum_{i<j} f[i, j] (E_i^k E_j^l - E_j^k E_i^l).
    """
    f = np.einsum("ik...,kl...,jl...->ij...", E, F, E)
    B = 0.5 * np.einsum("ij...,ik...,jl...->kl...", f, E, E)
    return f, B - np.swapaxes(B, 0, 1)


def divergence_np(wB, h):
    """v^l = sum_k d_k (wB)^{kl}."""
    return sum(np.gradient(wB[k], h[k], axis=k + 1, edge_order=2) for k in range(3))


# ------------------------------------------------------------ numba path

if numba is not None:
    @numba.njit(cache=True)
    def _d_axis(u, h, axis):
        nx, ny, nz = u.shape
        out = np.empty_like(u)
        n = u.shape[axis]
        for i in range(nx):
            for j in range(ny):
                for k in range(nz):
                    idx = (i, j, k)[axis]
                    if idx == 0:
                        a0 = u[i, j, k]
                        if axis == 0:
                            a1, a2 = u[i + 1, j, k], u[i + 2, j, k]
                        elif axis == 1:
                            a1, a2 = u[i, j + 1, k], u[i, j + 2, k]
                        else:
                            a1, a2 = u[i, j, k + 1], u[i, j, k + 2]
                        out[i, j, k] = (-3.0 * a0 + 4.0 * a1 - a2) / (2.0 * h)
                    elif idx == n - 1:
                        a0 = u[i, j, k]
                        if axis == 0:
                            a1, a2 = u[i - 1, j, k], u[i - 2, j, k]
                        elif axis == 1:
                            a1, a2 = u[i, j - 1, k], u[i, j - 2, k]
                        else:
                            a1, a2 = u[i, j, k - 1], u[i, j, k - 2]
                        out[i, j, k] = (3.0 * a0 - 4.0 * a1 + a2) / (2.0 * h)
                    else:
                        if axis == 0:
                            p, m = u[i + 1, j, k], u[i - 1, j, k]
                        elif axis == 1:
                            p, m = u[i, j + 1, k], u[i, j - 1, k]
                        else:
                            p, m = u[i, j, k + 1], u[i, j, k - 1]
                        out[i, j, k] = (p - m) / (2.0 * h)
        return out

    @numba.njit(cache=True)
    def field_strength_nb(a, h):
        c = a.shape[0]
        F = np.zeros((c, c) + a.shape[1:])
        for l in range(c):
            for k in range(c):
                if k == l:
                    continue
                d = _d_axis(a[l], h[k], k)
                F[k, l] += d
                F[l, k] -= d
        return F

    @numba.njit(cache=True)
    def horizontal_bivector_nb(F, E):
        nh, c = E.shape[0], E.shape[1]
        nx, ny, nz = F.shape[2], F.shape[3], F.shape[4]
        f = np.zeros((nh, nh, nx, ny, nz))
        B = np.zeros((c, c, nx, ny, nz))
        for x in range(nx):
            for y in range(ny):
                for z in range(nz):
                    for i in range(nh):
                        for j in range(i + 1, nh):
                            s = 0.0
                            for k in range(c):
                                for l in range(c):
                                    s += E[i, k, x, y, z] * F[k, l, x, y, z] * E[j, l, x, y, z]
                            f[i, j, x, y, z] = s
                            f[j, i, x, y, z] = -s
                            for k in range(c):
                                for l in range(c):
                                    B[k, l, x, y, z] += s * (
                                        E[i, k, x, y, z] * E[j, l, x, y, z]
                                        - E[j, k, x, y, z] * E[i, l, x, y, z])
        return f, B

    @numba.njit(cache=True)
    def divergence_nb(wB, h):
        c = wB.shape[0]
        v = np.zeros((c,) + wB.shape[2:])
        for l in range(c):
            for k in range(c):
                v[l] += _d_axis(wB[k, l], h[k], k)
        return v


def field_strength(a, h):
    if USE_NUMBA:
        return field_strength_nb(np.ascontiguousarray(a), np.asarray(h, float))
    return field_strength_np(a, h)


def horizontal_bivector(F, E):
    if USE_NUMBA:
        return horizontal_bivector_nb(np.ascontiguousarray(F), np.ascontiguousarray(E))
    return horizontal_bivector_np(F, E)


def divergence(wB, h):
    if USE_NUMBA:
        return divergence_nb(np.ascontiguousarray(wB), np.asarray(h, float))
    return divergence_np(wB, h)
