"""Vector fields, 1-forms and small matrices with expression entries.

Vector fields and covectors are 1-d object arrays of :class:`Expr`
(components on the coordinate basis).  Exterior derivative and wedge
follow the 1/2-alternation convention::

    d(alpha)(X, Y) = 1/2 (X alpha(Y) - Y alpha(X) - alpha([X, Y]))
    (alpha ^ beta)(X, Y) = 1/2 (alpha(X) beta(Y) - alpha(Y) beta(X))
"""

import numpy as np

from .exprcore import ZERO, ONE, as_expr, conj_expr, diff, sqrt

_as_expr = np.frompyfunc(as_expr, 1, 1)
_conj = np.frompyfunc(conj_expr, 1, 1)


def earray(values):
    """Object array of expressions (numbers are promoted)."""
    arr = np.asarray(values, dtype=object)
    if arr.ndim == 0:
        return as_expr(arr.item())
    return _as_expr(arr).astype(object)


def zeros(shape):
    out = np.empty(shape, dtype=object)
    out.fill(ZERO)
    return out


def identity(n):
    out = zeros((n, n))
    for k in range(n):
        out[k, k] = ONE
    return out


def conj(arr):
    if not isinstance(arr, np.ndarray):
        return conj_expr(arr)
    return _conj(arr).astype(object)


def esum(terms):
    terms = list(terms)
    if not terms:
        return ZERO
    out = terms[0]
    for t in terms[1:]:
        out = out + t
    return as_expr(out)


def dot(a, b):
    """Contraction of the last axis of ``a`` with the first axis of ``b``."""
    a = np.asarray(a, dtype=object)
    b = np.asarray(b, dtype=object)
    if a.ndim == 1 and b.ndim == 1:
        return esum(x * y for x, y in zip(a, b) if not (
            _zero(x) or _zero(y)))
    out_shape = a.shape[:-1] + b.shape[1:]
    out = zeros(out_shape)
    a2 = a.reshape(-1, a.shape[-1])
    b2 = b.reshape(b.shape[0], -1)
    res = zeros((a2.shape[0], b2.shape[1]))
    for i in range(a2.shape[0]):
        for j in range(b2.shape[1]):
            res[i, j] = dot(a2[i], b2[:, j])
    out[...] = res.reshape(out_shape)
    return out


def _zero(x):
    return isinstance(x, (int, float)) and x == 0 or (
        hasattr(x, "is_zero") and x.is_zero)


def apply(X, f, coords):
    """Directional derivative X(f); ``f`` may be an array of expressions."""
    if isinstance(f, np.ndarray):
        out = np.empty(f.shape, dtype=object)
        for idx in np.ndindex(f.shape):
            out[idx] = apply(X, f[idx], coords)
        return out
    f = as_expr(f)
    return esum(X[k] * diff(f, c) for k, c in enumerate(coords)
                if not _zero(X[k]))


def bracket(X, Y, coords):
    """Lie bracket [X, Y] in coordinates."""
    return earray([apply(X, Y[k], coords) - apply(Y, X[k], coords)
                   for k in range(len(coords))])


def pair(form, X):
    """alpha(X) for a covector ``form``."""
    return dot(form, X)


def d_form(alpha, coords):
    """Exterior derivative of a 1-form as the matrix (d alpha)(d_j, d_k)."""
    N = len(coords)
    out = zeros((N, N))
    for j in range(N):
        for k in range(j + 1, N):
            v = (diff(alpha[k], coords[j]) - diff(alpha[j], coords[k])) / 2
            out[j, k] = v
            out[k, j] = -v
    return out


def two_form(M, X, Y):
    """Evaluate a 2-form given by its coordinate matrix on (X, Y)."""
    return dot(X, dot(M, Y))


def lie_derivative_form(X, alpha, coords):
    """(L_X alpha)_k = X(alpha_k) + alpha_j d_k X^j."""
    N = len(coords)
    return earray([apply(X, alpha[k], coords)
                   + esum(alpha[j] * diff(X[j], coords[k]) for j in range(N))
                   for k in range(N)])


def det(M):
    """Determinant by cofactor expansion (small matrices only)."""
    M = np.asarray(M, dtype=object)
    n = M.shape[0]
    if n == 1:
        return as_expr(M[0, 0])
    if n == 2:
        return as_expr(M[0, 0] * M[1, 1] - M[0, 1] * M[1, 0])
    terms = []
    for j in range(n):
        if _zero(M[0, j]):
            continue
        minor = np.delete(np.delete(M, 0, axis=0), j, axis=1)
        t = M[0, j] * det(minor)
        terms.append(t if j % 2 == 0 else -t)
    return esum(terms)


def inverse(M):
    """Inverse via the adjugate (small matrices only)."""
    M = np.asarray(M, dtype=object)
    n = M.shape[0]
    if n == 1:
        return earray([[1 / as_expr(M[0, 0])]])
    d = det(M)
    out = zeros((n, n))
    for i in range(n):
        for j in range(n):
            minor = np.delete(np.delete(M, j, axis=0), i, axis=1)
            c = det(minor)
            out[i, j] = (c if (i + j) % 2 == 0 else -c) / d
    return out


def hermitian_orthonormalize(frame, gram, rotation=None):
    """Unitary frame Z_a = sum_b C[a, b] T_b with g(Z_a, conj Z_b) = delta.

    ``gram[a][b]`` is the Hermitian pairing g(T_a, conj T_b).  Gram-Schmidt
    in the given order; ``rotation`` (a constant unitary matrix) is applied
    afterwards.  Returns (Z, C).
    """
    n = len(frame)
    C = zeros((n, n))
    for a in range(n):
        row = zeros(n)
        row[a] = ONE
        for b in range(a):
            # subtract the component along Z_b
            proj = esum(row[p] * gram[p, q] * conj_expr(C[b, q])
                        for p in range(n) for q in range(n)
                        if not _zero(row[p]) and not _zero(C[b, q]))
            row = earray([row[q] - proj * C[b, q] for q in range(n)])
        norm2 = esum(row[p] * gram[p, q] * conj_expr(row[q])
                     for p in range(n) for q in range(n)
                     if not _zero(row[p]) and not _zero(row[q]))
        s = sqrt(norm2)
        C[a] = earray([row[q] / s for q in range(n)])
    if rotation is not None:
        C = dot(earray(rotation), C)
    Z = dot(C, np.asarray(frame, dtype=object))
    return Z, C


def real_frame(Z):
    """Real orthonormal frame (E_a, J E_a) from a unitary frame Z_a."""
    r2 = sqrt(2)
    E = []
    JE = []
    for z in Z:
        zb = conj(z)
        E.append(earray([(p + q) / r2 for p, q in zip(z, zb)]))
        JE.append(earray([(p - q) * (1j) / r2 for p, q in zip(z, zb)]))
    return E + JE
