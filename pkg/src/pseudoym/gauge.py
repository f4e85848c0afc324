"""Hermitian gauge fields over a CR chart.

A connection D in a rank-m bundle with orthonormal frame e_1..e_m acts by
D_X e_j = sum_i omega^i_j(X) e_i, so Omega(X)[i, j] = omega^i_j(X) is
skew-Hermitian for real X.  The 1-forms omega^i_j are given by their
coefficients on the coframe (theta, theta^a, theta^abar), hence
Omega(T_A) is read off directly.

Ad-valued forms are object arrays of expressions holding their values on
the frame (T, T_a, T_abar): a 1-form as phi[A] (m x m), a 2-form as
F[A, B].  2-form values use the unnormalised alternation, e.g. the
curvature is R[A, B] = D_A D_B - D_B D_A - D_[T_A, T_B]; in the 1/2
convention used for scalar forms this is twice the value of the form.
Pairings over a g_theta-orthonormal real frame E_A::

    <P, Q>  = -tr(PQ)
    |phi|^2 = sum_A <phi(E_A), phi(E_A)>
    |F|^2   = sum_{A<B} <F(E_A, E_B), F(E_A, E_B)>
    i_T F   = F(T, .) / 2

With these, F = pi_H F + 2 theta ^ i_T F.
"""

import math
from functools import cached_property

import numpy as np

from . import calculus as calc
from .exprcore import I, ZERO, as_expr, const, evaluate, parse, var
from .fixtures import FixtureError, load_text, parse_text, require
from .pseudoherm import PHData, coordinate_metric, load_chart, volume_densities


def _bar(A, n):
    if A == 0:
        return 0
    return A + n if A <= n else A - n


def coframe_names(n):
    return ["theta"] + [f"theta{a}" for a in range(1, n + 1)] + [
        f"theta{a}bar" for a in range(1, n + 1)]


# ------------------------------------------------------------ matrix helpers

def mat_mul(P, Q):
    return calc.dot(P, Q)


def commutator(P, Q):
    return calc.earray(mat_mul(P, Q) - mat_mul(Q, P))


def _mscale(c, P):
    return calc.earray(np.vectorize(lambda x: c * x, otypes=[object])(P))


def _mzero(m):
    return calc.zeros((m, m))


# --------------------------------------------------------------- the field

class GaugeField:
    """Metric connection given by coframe coefficients coeffs[i, j, A]."""

    def __init__(self, data, coeffs, name="field"):
        self.data = data
        self.chart = data.chart
        self.coeffs = calc.earray(coeffs)
        self.m = self.coeffs.shape[0]
        self.name = name

    @property
    def n(self):
        return self.data.n

    @property
    def N(self):
        return self.data.N

    @cached_property
    def omega(self):
        """Omega(T_A) as an (N, m, m) object array."""
        return np.ascontiguousarray(np.transpose(self.coeffs, (2, 0, 1)))

    @cached_property
    def coordinate_form(self):
        """omega^i_j(d/dx^k) as an (Ncoord, m, m) array."""
        cof = self.data.coframe
        N = self.N
        out = np.empty((N, self.m, self.m), dtype=object)
        for k in range(N):
            for i in range(self.m):
                for j in range(self.m):
                    out[k, i, j] = calc.esum(self.coeffs[i, j, A] * cof[A, k]
                                             for A in range(N))
        return out

    def skew_residual(self, env):
        """max |Omega(X) + Omega(X)^*| over the real frame directions."""
        n, N = self.n, self.N
        c = evaluate(self.coeffs, env)
        cb = np.conj(np.swapaxes(c, 0, 1))[:, :, [_bar(A, n) for A in range(N)]]
        return float(np.max(np.abs(c + cb)))

    def shifted(self, phi, t):
        """D + t phi for an Ad-valued 1-form phi given by frame values."""
        t = as_expr(t)
        coeffs = calc.zeros(self.coeffs.shape)
        for A in range(self.N):
            for i in range(self.m):
                for j in range(self.m):
                    coeffs[i, j, A] = self.coeffs[i, j, A] + t * phi[A, i, j]
        return GaugeField(self.data, coeffs, self.name)

    def gauge_transformed(self, g):
        """g^{-1} Omega g for a constant unitary matrix g."""
        g = np.asarray(g, dtype=complex)
        gi = np.conj(g.T)
        out = calc.zeros(self.coeffs.shape)
        for A in range(self.N):
            M = calc.dot(calc.dot(calc.earray(gi), self.omega[A]), calc.earray(g))
            out[:, :, A] = M
        return GaugeField(self.data, out, self.name)


def field_from_table(table, path="<string>", chart=None):
    """Build a field from a parsed gauge file.

    Keys: ``chart`` (fixture name or path, unless given), ``m`` and
    ``omega[i][j] = {theta: expr, theta1: expr, theta1bar: expr}``.
    Entries not given are filled from the skew-Hermitian rule
    omega^j_i = -conj(omega^i_j), or zero.
    """
    if chart is None:
        chart = load_chart(require(table, "chart", path)[0])
    data = PHData(chart)
    m = int(require(table, "m", path)[0])
    n, N = chart.n, chart.dim
    names = coframe_names(n)
    given = {}
    for key, (val, line, col) in table.items():
        if not key.startswith("omega"):
            continue
        try:
            i, j = [int(s) for s in key[len("omega"):].strip("[]").split("][")]
        except ValueError:
            raise FixtureError(f"bad key {key!r}", path, line, 1) from None
        if not (1 <= i <= m and 1 <= j <= m):
            raise FixtureError(f"index out of range in {key!r}", path, line, 1)
        if not isinstance(val, dict):
            raise FixtureError("expected {name: expr, ...}", path, line, col)
        row = [ZERO] * N
        for nm, text in val.items():
            if nm not in names:
                raise FixtureError(f"unknown coframe element {nm!r}", path, line, col)
            try:
                row[names.index(nm)] = parse(text, chart.coords)
            except Exception as exc:
                raise FixtureError(str(exc), path, line, col) from None
        given[(i - 1, j - 1)] = row
    coeffs = calc.zeros((m, m, N))
    for i in range(m):
        for j in range(m):
            if (i, j) in given:
                coeffs[i, j] = calc.earray(given[(i, j)])
            elif (j, i) in given:
                src = given[(j, i)]
                coeffs[i, j] = calc.earray([-calc.conj(src[_bar(A, n)])
                                            for A in range(N)])
    field = GaugeField(data, coeffs, name=str(path))
    env = chart.sample(20, 0)
    if field.skew_residual(env) > 1e-10:
        raise FixtureError("connection is not skew-Hermitian", path)
    return field


def load_gauge(path, chart=None):
    text, shown = load_text(path)
    return field_from_table(parse_text(text, shown), shown, chart)


def bump(chart, power=3):
    """prod_k (1 - s_k^2)^power with s_k the box coordinate scaled to [-1, 1]."""
    out = as_expr(1)
    for c in chart.coords:
        lo, hi = chart.box[c]
        mid, half = (lo + hi) / 2, (hi - lo) / 2
        s = (var(c) - const(mid)) / const(half)
        out = out * (1 - s * s) ** power
    return out


def random_coefficients(chart, m, seed, scale=0.5, cutoff=None):
    """Random polynomial coefficients, projected to the skew-Hermitian part."""
    rng = np.random.default_rng(seed)
    n, N = chart.n, chart.dim
    xs = [var(c) for c in chart.coords]

    def poly():
        a = scale * (rng.standard_normal(N + 1) + 1j * rng.standard_normal(N + 1))
        e = const(complex(a[0]))
        for k in range(N):
            e = e + const(complex(a[k + 1])) * xs[k]
        return e

    Q = [[[poly() for _ in range(N)] for _ in range(m)] for _ in range(m)]
    coeffs = calc.zeros((m, m, N))
    for i in range(m):
        for j in range(m):
            for A in range(N):
                v = (Q[i][j][A] - calc.conj(Q[j][i][_bar(A, n)])) / 2
                coeffs[i, j, A] = v if cutoff is None else v * cutoff
    return coeffs


def random_field(data, m, seed, scale=0.5, compact=False):
    cut = bump(data.chart) if compact else None
    return GaugeField(data, random_coefficients(data.chart, m, seed, scale, cut),
                      name=f"random-u{m}-{seed}")


def random_form1(data, m, seed, scale=0.5, compact=True, horizontal=False):
    """Random Ad-valued 1-form (frame values, skew-Hermitian on real vectors)."""
    cut = bump(data.chart) if compact else None
    coeffs = random_coefficients(data.chart, m, seed, scale, cut)
    phi = np.ascontiguousarray(np.transpose(coeffs, (2, 0, 1)))
    if horizontal:
        phi[0] = _mzero(m)
    return phi


def random_form2(data, m, seed, scale=0.5, compact=True):
    """Random Ad-valued 2-form i(a ^ b + b ^ a) from two random 1-forms."""
    a = random_form1(data, m, seed, scale, compact)
    b = random_form1(data, m, seed + 1, scale, False)
    N = data.N
    out = np.empty((N, N, m, m), dtype=object)
    for A in range(N):
        for B in range(N):
            # P Q + Q P is Hermitian for skew-Hermitian P, Q
            sym = (mat_mul(a[A], b[B]) + mat_mul(b[B], a[A])
                   - mat_mul(a[B], b[A]) - mat_mul(b[A], a[B]))
            out[A, B] = _mscale(I, sym)
    return out


# ---------------------------------------------------------------- operators

def curvature(field):
    """R[A, B] = T_A Omega_B - T_B Omega_A - Omega_[T_A, T_B] + [Omega_A, Omega_B]."""
    data = field.data
    N, m = field.N, field.m
    Om = field.omega
    c = data.brackets
    F = data.frame
    R = np.empty((N, N, m, m), dtype=object)
    for A in range(N):
        R[A, A] = _mzero(m)
        for B in range(A + 1, N):
            t = (calc.apply(F[A], Om[B], data.coords)
                 - calc.apply(F[B], Om[A], data.coords))
            t = t - calc.earray(sum((c[A, B, E] * Om[E] for E in range(N)
                                     if not calc._zero(c[A, B, E])),
                                    _mzero(m)))
            t = calc.earray(t + commutator(Om[A], Om[B]))
            R[A, B] = t
            R[B, A] = calc.earray(-t)
    return R


def coordinate_curvature(field):
    """Rc[k, l] = d_k w_l - d_l w_k + [w_k, w_l] on coordinate vectors."""
    from .exprcore import diff
    w = field.coordinate_form
    coords = field.data.coords
    N, m = field.N, field.m
    Rc = np.empty((N, N, m, m), dtype=object)
    for k in range(N):
        Rc[k, k] = _mzero(m)
        for l in range(k + 1, N):
            d = calc.earray([[diff(w[l, i, j], coords[k]) - diff(w[k, i, j], coords[l])
                              for j in range(m)] for i in range(m)])
            t = calc.earray(d + commutator(w[k], w[l]))
            Rc[k, l] = t
            Rc[l, k] = calc.earray(-t)
    return Rc


def curvature_by_coordinates(field):
    """Frame values of the curvature via the coordinate formula."""
    Rc = coordinate_curvature(field)
    F = field.data.frame
    N, m = field.N, field.m
    R = np.empty((N, N, m, m), dtype=object)
    for A in range(N):
        for B in range(N):
            R[A, B] = calc.earray([[calc.esum(
                F[A][k] * F[B][l] * Rc[k, l, i, j] for k in range(N) for l in range(N)
                if not calc._zero(Rc[k, l, i, j]) and not calc._zero(F[A][k])
                and not calc._zero(F[B][l]))
                for j in range(m)] for i in range(m)])
    return R


def decompose(R):
    """(pi_H R, i_T R) from frame values; index 0 is the T direction."""
    piH = R.copy()
    m = R.shape[-1]
    for A in range(R.shape[0]):
        piH[0, A] = _mzero(m)
        piH[A, 0] = _mzero(m)
    iT = np.empty((R.shape[0], m, m), dtype=object)
    for A in range(R.shape[0]):
        iT[A] = _mscale(as_expr(1) / 2, R[0, A])
    return piH, iT


def reassemble(piH, iT):
    """pi_H R + 2 theta ^ i_T R (theta(T_A) = delta_A0)."""
    N = iT.shape[0]
    out = piH.copy()
    for B in range(N):
        out[0, B] = calc.earray(out[0, B] + _mscale(2, iT[B]))
        out[B, 0] = calc.earray(out[B, 0] - _mscale(2, iT[B]))
    return out


def cov_ad(field, A, M):
    """D_{T_A} of an Ad-valued function M."""
    data = field.data
    return calc.earray(calc.apply(data.frame[A], M, data.coords)
                       + commutator(field.omega[A], M))


def cov_form1(field, phi):
    """(D_A phi)[B] as an (N, N, m, m) array."""
    N, m = field.N, field.m
    gam = field.data.gamma
    out = np.empty((N, N, m, m), dtype=object)
    for A in range(N):
        for B in range(N):
            t = cov_ad(field, A, phi[B])
            for E in range(N):
                if not calc._zero(gam[A, B, E]):
                    t = t - _mscale(gam[A, B, E], phi[E])
            out[A, B] = calc.earray(t)
    return out


def cov_form2(field, F):
    """(D_A F)[B, C] as an (N, N, N, m, m) array."""
    N, m = field.N, field.m
    gam = field.data.gamma
    out = np.empty((N, N, N, m, m), dtype=object)
    for A in range(N):
        for B in range(N):
            for C in range(N):
                if B == C:
                    out[A, B, C] = _mzero(m)
                    continue
                if C < B:
                    out[A, B, C] = calc.earray(-out[A, C, B])
                    continue
                t = cov_ad(field, A, F[B, C])
                for E in range(N):
                    if not calc._zero(gam[A, B, E]):
                        t = t - _mscale(gam[A, B, E], F[E, C])
                    if not calc._zero(gam[A, C, E]):
                        t = t - _mscale(gam[A, C, E], F[B, E])
                out[A, B, C] = calc.earray(t)
    return out


def d_D(field, phi, degree=1):
    """Exterior covariant derivative of an Ad-valued 0- or 1-form.

    degree 0: (d s)[A] = D_A s.
    degree 1: (d phi)[A, B] = D_A phi_B - D_B phi_A - phi([T_A, T_B]).
    """
    N, m = field.N, field.m
    if degree == 0:
        out = np.empty((N, m, m), dtype=object)
        for A in range(N):
            out[A] = cov_ad(field, A, phi)
        return out
    c = field.data.brackets
    out = np.empty((N, N, m, m), dtype=object)
    for A in range(N):
        out[A, A] = _mzero(m)
        for B in range(A + 1, N):
            t = cov_ad(field, A, phi[B]) - cov_ad(field, B, phi[A])
            for E in range(N):
                if not calc._zero(c[A, B, E]):
                    t = t - _mscale(c[A, B, E], phi[E])
            out[A, B] = calc.earray(t)
            out[B, A] = calc.earray(-out[A, B])
    return out


def bracket_wedge(phi, psi):
    """[phi ^ psi][A, B] = [phi_A, psi_B] - [phi_B, psi_A]."""
    N = phi.shape[0]
    out = np.empty((N, N) + phi.shape[1:], dtype=object)
    for A in range(N):
        for B in range(N):
            out[A, B] = commutator(phi[A], psi[B]) - commutator(phi[B], psi[A])
    return out


def inverse_metric(data, horizontal=False):
    """Frame inverse of g_theta: sum_A E_A (x) E_A = sum ginv[A, B] T_A (x) T_B."""
    n, N = data.n, data.N
    H = data.levi_inv
    g = calc.zeros((N, N))
    if not horizontal:
        g[0, 0] = as_expr(1)
    for a in range(n):
        for b in range(n):
            g[1 + a, 1 + n + b] = H[b, a]
            g[1 + n + b, 1 + a] = H[b, a]
    return g


def delta_b(field, F, degree=2):
    """delta_b^D: minus the horizontal trace of D F in its first slot."""
    gH = inverse_metric(field.data, horizontal=True)
    return _trace_divergence(field, F, degree, gH)


def delta(field, F, degree=2):
    """Formal adjoint of d^D for the pairing against theta ^ (dtheta)^n.

    For 2-forms the torsion of the Tanaka-Webster connection contributes
    (1/2) sum g(Tor(E_A, E_B), X) F(E_A, E_B).
    """
    data = field.data
    g = inverse_metric(data)
    out = _trace_divergence(field, F, degree, g)
    if degree != 2:
        return out
    N = field.N
    gF = data.metric
    tor = np.empty((N, N, N), dtype=object)
    for A in range(N):
        for B in range(N):
            tor[A, B] = data.torsion(A, B) if A != B else calc.zeros(N)
    for X in range(N):
        t = out[X]
        for A in range(N):
            for B in range(N):
                gt = calc.esum(tor[A, B, E] * gF[E, X] for E in range(N)
                               if not calc._zero(tor[A, B, E]))
                if calc._zero(gt):
                    continue
                # raise both indices of F
                for C in range(N):
                    for D in range(N):
                        w = g[A, C] * g[B, D]
                        if calc._zero(w) or calc._zero(gt):
                            continue
                        t = t + _mscale(gt * w / 2, F[C, D])
        out[X] = calc.earray(t)
    return out


def _trace_divergence(field, F, degree, ginv):
    N, m = field.N, field.m
    if degree == 1:
        DF = cov_form1(field, F)
        t = _mzero(m)
        for A in range(N):
            for B in range(N):
                if not calc._zero(ginv[A, B]):
                    t = t - _mscale(ginv[A, B], DF[A, B])
        return calc.earray(t)
    DF = cov_form2(field, F)
    out = np.empty((N, m, m), dtype=object)
    for X in range(N):
        t = _mzero(m)
        for A in range(N):
            for B in range(N):
                if not calc._zero(ginv[A, B]):
                    t = t - _mscale(ginv[A, B], DF[A, B, X])
        out[X] = calc.earray(t)
    return out


def pym_residual(field, R=None):
    """delta_b^D R^D, the pseudo Yang-Mills residual 1-form."""
    R = curvature(field) if R is None else R
    return delta_b(field, R)


def trace_lambda(data, F):
    """Lambda_theta F with i Lambda F = sum_a F(Z_a, conj Z_a) (unitary Z)."""
    n = data.n
    H = data.levi_inv
    m = F.shape[-1]
    t = _mzero(m)
    for a in range(n):
        for b in range(n):
            t = t + _mscale(H[b, a], F[1 + a, 1 + n + b])
    return calc.earray(_mscale(-I, t))


# -------------------------------------------------------- numeric pairings

def pair(P, Q):
    """<P, Q> = -tr(PQ) over leading matrix axes (m, m, ...)."""
    return -np.einsum("ij...,ji...->...", P, Q)


def real_frame_matrix(data, env, rotation=None):
    """Numeric Rm[A, B, p] with E_A = sum_B Rm[A, B] T_B; E_0 = T.

    E_1..E_n = (Z + conj Z)/sqrt 2 and E_{n+a} = J E_a for a unitary
    frame Z (optionally rotated).
    """
    n, N = data.n, data.N
    _, C = data.unitary_frame(rotation)
    Cv = evaluate(C, env)
    npts = Cv.shape[-1]
    Rm = np.zeros((N, N, npts), dtype=complex)
    Rm[0, 0] = 1
    r2 = math.sqrt(2)
    for a in range(n):
        for b in range(n):
            Rm[1 + a, 1 + b] = Cv[a, b] / r2
            Rm[1 + a, 1 + n + b] = np.conj(Cv[a, b]) / r2
            Rm[1 + n + a, 1 + b] = 1j * Cv[a, b] / r2
            Rm[1 + n + a, 1 + n + b] = -1j * np.conj(Cv[a, b]) / r2
    return Rm


def to_real1(phi_v, Rm):
    return np.einsum("ABp,Bijp->Aijp", Rm, phi_v)


def to_real2(F_v, Rm):
    return np.einsum("ACp,BDp,CDijp->ABijp", Rm, Rm, F_v)


def norm2_form1_real(phiE):
    return np.real(sum(pair(phiE[A], phiE[A]) for A in range(phiE.shape[0])))


def norm2_form2_real(FE, start=0):
    N = FE.shape[0]
    return np.real(sum(pair(FE[A, B], FE[A, B]) for A in range(start, N)
                       for B in range(A + 1, N)))


def norm2_form2_frame(F_v, ginv_v):
    """Same norm computed with the frame inverse metric."""
    return np.real(0.5 * np.einsum("ACp,BDp,ABijp,CDjip->p", ginv_v, ginv_v,
                                   F_v, F_v) * -1)


def norm2_form1_frame(phi_v, ginv_v):
    return np.real(-np.einsum("ABp,Aijp,Bjip->p", ginv_v, phi_v, phi_v))


def norm2_coordinate(field, env, Rc=None):
    """|R|^2 from coordinate components and the coordinate Webster metric."""
    Rc = coordinate_curvature(field) if Rc is None else Rc
    gc = evaluate(coordinate_metric(field.data), env)
    gi = np.linalg.inv(np.moveaxis(gc, -1, 0))
    gi = np.moveaxis(gi, 0, -1)
    Rv = evaluate(Rc, env)
    return np.real(-0.5 * np.einsum("kpx,lqx,klijx,pqjix->x", gi, gi, Rv, Rv))


def densities(field, env, R=None):
    """Pointwise |R|^2, |pi_H R|^2 and |i_T R|^2 (real-frame path)."""
    R = curvature(field) if R is None else R
    Rm = real_frame_matrix(field.data, env)
    RE = to_real2(evaluate(R, env), Rm)
    full = norm2_form2_real(RE)
    hor = norm2_form2_real(RE, start=1)
    iT = 0.5 * RE[0]
    return {"full": full, "horizontal": hor, "iT": norm2_form1_real(iT)}


def rop(phiE, RE):
    """R^D(phi)_X = sum_A [R(E_A, X), phi(E_A)] with parts (R_b, R_0)."""
    N = phiE.shape[0]

    def comm(P, Q):
        return np.einsum("ijp,jkp->ikp", P, Q) - np.einsum("ijp,jkp->ikp", Q, P)

    Rb = np.array([sum(comm(RE[A, X], phiE[A]) for A in range(1, N))
                   for X in range(N)])
    R0 = np.array([comm(RE[0, X], phiE[0]) for X in range(N)])
    return Rb + R0, Rb, R0


def bracket_wedge_numeric(phiE):
    N = phiE.shape[0]

    def comm(P, Q):
        return np.einsum("ijp,jkp->ikp", P, Q) - np.einsum("ijp,jkp->ikp", Q, P)

    return np.array([[comm(phiE[A], phiE[B]) - comm(phiE[B], phiE[A])
                      for B in range(N)] for A in range(N)])


def pair_form2_real(FE, GE):
    N = FE.shape[0]
    return sum(pair(FE[A, B], GE[A, B]) for A in range(N) for B in range(A + 1, N))


def pair_form1_real(phiE, psiE):
    return sum(pair(phiE[A], psiE[A]) for A in range(phiE.shape[0]))


def bracket_and_rop(field, phi, env, R=None):
    """[phi ^ phi], R^D(phi), R_b^D(phi), R_0^D(phi) on the real frame.

    Returns numeric arrays (frame index first, then m, m, points).
    """
    R = curvature(field) if R is None else R
    Rm = real_frame_matrix(field.data, env)
    RE = to_real2(evaluate(R, env), Rm)
    phiE = to_real1(evaluate(phi, env), Rm)
    wedge = bracket_wedge_numeric(phiE)
    full, b, zero = rop(phiE, RE)
    return {"wedge": wedge, "R": full, "Rb": b, "R0": zero, "RE": RE, "phiE": phiE}


def tanaka_check(field, S, env, tol=1e-8, R=None):
    """Type-(1,1) verdict and the residual of Lambda_theta R - 2n S."""
    data = field.data
    n, N = field.n, field.N
    R = curvature(field) if R is None else R
    Rv = evaluate(R, env)
    bad = [Rv[1 + a, 1 + b] for a in range(n) for b in range(n)]
    bad += [Rv[1 + n + a, 1 + n + b] for a in range(n) for b in range(n)]
    bad += [Rv[0, A] for A in range(1, N)]
    type_res = float(max(np.max(np.abs(x)) for x in bad)) if bad else 0.0
    lam = evaluate(trace_lambda(data, R), env)
    Sv = evaluate(calc.earray(S), env) if S is not None else np.zeros_like(lam)
    trace_res = float(np.max(np.abs(lam - 2 * n * Sv)))
    return {"type11": type_res <= tol, "type_residual": type_res,
            "trace_residual": trace_res, "tanaka": type_res <= tol and trace_res <= tol}


def lambda_brute(data, F, env, rotation=None):
    """i Lambda F = sum_a F(Z_a, conj Z_a) over an explicit unitary frame."""
    n = data.n
    _, C = data.unitary_frame(rotation)
    Cv = evaluate(C, env)
    Fv = evaluate(F, env)
    tot = 0
    for a in range(n):
        for b in range(n):
            for c in range(n):
                tot = tot + Cv[a, b] * np.conj(Cv[a, c]) * Fv[1 + b, 1 + n + c]
    return -1j * tot


# ---------------------------------------------------------------- checks

def _two_form_scalar_oracle(data, f_expr, A_idx):
    """Unnormalised d(f theta^A) on frame pairs, from coordinates."""
    from .exprcore import diff
    coords = data.coords
    N = data.N
    alpha = calc.earray([f_expr * data.coframe[A_idx, k] for k in range(N)])
    M = calc.zeros((N, N))
    for k in range(N):
        for l in range(N):
            if k != l:
                M[k, l] = diff(alpha[l], coords[k]) - diff(alpha[k], coords[l])
    F = data.frame
    return calc.earray([[calc.two_form(M, F[A], F[B]) for B in range(N)]
                        for A in range(N)])


def check_gauge(field, env, seed, tol=1e-8, extra_seed=11):
    """Pointwise identities for one field; returns (records, notes)."""
    from .report import Note, record, scalar_record
    data = field.data
    name = f"{data.chart.name}:{field.name}"
    n, N, m = field.n, field.N, field.m
    npts = len(next(iter(env.values())))
    out, notes = [], []

    out.append(scalar_record("gauge.skew-hermitian", name, npts, seed,
                             field.skew_residual(env), field.skew_residual(env), 1e-12))
    R = curvature(field)
    Rv = evaluate(R, env)
    Rc = evaluate(curvature_by_coordinates(field), env)
    out.append(record("gauge.curvature-two-path", name, npts, seed, Rv, Rc, tol))

    piH, iT = decompose(R)
    back = evaluate(reassemble(piH, iT), env)
    out.append(record("gauge.decomposition", name, npts, seed, back, Rv, 1e-12))
    iTpi = evaluate(calc.earray([piH[0, A] for A in range(N)]), env)
    out.append(scalar_record("gauge.iT-piH", name, npts, seed,
                             np.max(np.abs(iTpi)), np.max(np.abs(iTpi)), 1e-12))

    dens = densities(field, env, R)
    coord = norm2_coordinate(field, env)
    out.append(record("gauge.norm-coordinate", name, npts, seed, dens["full"], coord,
                      1e-10))
    out.append(record("gauge.norm-split", name, npts, seed,
                      dens["horizontal"] + 4 * dens["iT"], coord, 1e-10))
    ginv_v = evaluate(inverse_metric(data), env)
    out.append(record("gauge.norm-frame", name, npts, seed,
                      norm2_form2_frame(Rv, ginv_v), dens["full"], 1e-10))

    # curvature expansion along a random direction
    phi = random_form1(data, m, seed + extra_seed, compact=False)
    t = 0.1
    Rt = evaluate(curvature(field.shifted(phi, t)), env)
    dphi = evaluate(d_D(field, phi), env)
    ww = evaluate(bracket_wedge(phi, phi), env)
    out.append(record("gauge.curvature-expansion", name, npts, seed,
                      Rt, Rv + t * dphi + 0.5 * t * t * ww, tol))
    if m > 1:
        lit = float(np.max(np.abs(Rt - (Rv + t * dphi + t * t * ww))))
        notes.append(Note("gauge.curvature-expansion-literal", name,
                          "quadratic coefficient 1 (instead of 1/2) on [phi ^ phi] "
                          "does not match the direct expansion", lit))

    # Bianchi: d^D R = 0 in the cyclic form, through coordinates for m = 1
    if m == 1:
        from .exprcore import diff
        Rcs = coordinate_curvature(field)
        terms = []
        for k in range(N):
            for l in range(k + 1, N):
                for p in range(l + 1, N):
                    terms.append(diff(Rcs[l, p, 0, 0], data.coords[k])
                                 + diff(Rcs[p, k, 0, 0], data.coords[l])
                                 + diff(Rcs[k, l, 0, 0], data.coords[p]))
        if terms:
            v = evaluate(calc.earray(terms), env)
            out.append(record("gauge.bianchi-u1", name, npts, seed, v, 0 * v, 1e-9))

    # pym residual: horizontal agreement and the characteristic trace
    dbR = evaluate(pym_residual(field, R), env)
    dpi = evaluate(delta(field, piH), env)
    out.append(record("pym.horizontal-agreement", name, npts, seed, dpi[1:], dbR[1:], tol))
    lam = evaluate(trace_lambda(data, piH), env)
    out.append(record("pym.characteristic-trace", name, npts, seed, dpi[0], 2 * lam, tol))
    iTv = evaluate(iT, env)
    if np.max(np.abs(iTv)) <= 1e-12:
        out.append(record("pym.T-component", name, npts, seed, dbR[0], 0 * dbR[0], tol))
        gap = float(np.max(np.abs(dpi[0] - dbR[0])))
        if gap > tol:
            notes.append(Note("pym.full-agreement", name,
                              "delta pi_H R and delta_b R differ in the T slot by "
                              "2 Lambda_theta R", gap))

    # frame independence of delta_b via explicit real frames
    rot = _random_unitary(n, seed + 3)
    DF = evaluate(cov_form2(field, R), env)
    vals = []
    for r in (None, rot):
        Rm = real_frame_matrix(data, env, r)
        # -sum_a (D_{E_a} R)(E_a, X), X over the frame T_A
        vals.append(-np.einsum("aAp,aBp,ABXijp->Xijp", Rm[1:], Rm[1:], DF))
    out.append(record("pym.frame-independence", name, npts, seed, vals[0], vals[1], tol))
    out.append(record("pym.frame-sum", name, npts, seed, vals[0], dbR, tol))

    # Lambda two ways
    out.append(record("tanaka.trace-contraction", name, npts, seed,
                      evaluate(trace_lambda(data, R), env),
                      lambda_brute(data, R, env, rot), tol))

    # gauge covariance under a constant unitary change of frame
    g = _random_unitary(m, seed + 5)
    moved = field.gauge_transformed(g)
    d2 = densities(moved, env)
    out.append(record("gauge.covariance", name, npts, seed,
                      np.array([d2["horizontal"], d2["full"]]),
                      np.array([dens["horizontal"], dens["full"]]), 1e-10))

    # identities around R^D(phi)
    br = bracket_and_rop(field, phi, env, R)
    lhs = pair_form2_real(br["wedge"], br["RE"])
    rhs = pair_form1_real(br["phiE"], br["R"])
    out.append(record("rop.bracket-identity", name, npts, seed, lhs, rhs, 1e-10))
    out.append(record("rop.split", name, npts, seed, br["R"], br["Rb"] + br["R0"], 1e-12))
    phiH = phi.copy()
    phiH[0] = _mzero(m)
    brH = bracket_and_rop(field, phiH, env, R)
    lhs = pair_form2_real(brH["wedge"], _theta_iT(brH["RE"]))
    rhs = 2 * pair_form1_real(brH["phiE"], brH["R0"])
    out.append(record("rop.characteristic-part", name, npts, seed, lhs, rhs, 1e-10))
    # general phi: the coefficient that actually holds is 1
    lhs = pair_form2_real(br["wedge"], _theta_iT(br["RE"]))
    rhs1 = pair_form1_real(br["phiE"], br["R0"])
    out.append(record("rop.characteristic-general", name, npts, seed, lhs, rhs1, 1e-10))
    if m > 1:
        notes.append(Note("rop.characteristic-factor", name,
                          "for i_T phi != 0 the pairing with theta ^ i_T R equals "
                          "1 (not 2) times <phi, R_0(phi)>",
                          float(np.max(np.abs(lhs - 2 * rhs1)))))
    return out, notes


def _theta_iT(RE):
    out = np.zeros_like(RE)
    out[0] = RE[0] / 2
    out[:, 0] = -RE[:, 0] / 2
    out[0, 0] = 0
    return out


def _random_unitary(k, seed):
    rng = np.random.default_rng(seed)
    z = rng.standard_normal((k, k)) + 1j * rng.standard_normal((k, k))
    q, r = np.linalg.qr(z)
    return q * (np.diag(r) / np.abs(np.diag(r)))


def check_scalar_d(data, seed, env, tol=1e-8):
    """m = 1 flat: d^D(i f theta^1) equals the unnormalised scalar d."""
    from .report import record
    if data.n < 1:
        return []
    f = parse(f"{data.coords[0]}*{data.coords[1]} + 1", data.coords)
    field = GaugeField(data, calc.zeros((1, 1, data.N)), "flat")
    phi = np.empty((data.N, 1, 1), dtype=object)
    for A in range(data.N):
        phi[A, 0, 0] = I * f if A == 1 else ZERO
    lhs = evaluate(d_D(field, phi), env)[:, :, 0, 0]
    rhs = evaluate(_two_form_scalar_oracle(data, I * f, 1), env)
    npts = lhs.shape[-1]
    return [record("gauge.scalar-d", data.chart.name, npts, seed, lhs, rhs, tol)]


def check_integrated(field, seed, resolution=16, tol=1e-6):
    """Identity (c_n YM = PYM + 2 int |i_T R|^2) and adjointness by quadrature."""
    from .report import record
    from .varsolver import GridBox
    data = field.data
    name = f"{data.chart.name}:{field.name}"
    grid = GridBox.from_chart(data.chart, resolution)
    env = grid.env()
    w = grid.weights
    R = curvature(field)
    dens = densities(field, env, R)
    top, dvol = volume_densities(data, env)
    top = np.abs(top)
    cn = 2 ** data.n * math.factorial(data.n)
    ym = 0.5 * np.sum(w * dens["full"] * dvol)
    pym = 0.5 * np.sum(w * dens["horizontal"] * top)
    iT = np.sum(w * dens["iT"] * top)
    out = [record("gauge.ym-split", name, grid.points, seed, cn * ym, pym + 2 * iT,
                  tol, floor=1e-300)]
    # adjointness of d^D and delta^D on compactly supported forms
    m = field.m
    phi = random_form1(data, m, seed + 21)
    psi = random_form2(data, m, seed + 22)
    ginv_v = evaluate(inverse_metric(data), env)
    dphi = evaluate(d_D(field, phi), env)
    psi_v = evaluate(psi, env)
    lhs = np.sum(w * top * _pair2_frame(dphi, psi_v, ginv_v))
    rhs = np.sum(w * top * _pair1_frame(evaluate(phi, env),
                                        evaluate(delta(field, psi), env), ginv_v))
    out.append(record("gauge.adjoint-1-2", name, grid.points, seed, lhs, rhs, 1e-5,
                      floor=1e-300))
    s = random_form1(data, m, seed + 23)[0]  # value on T: skew-Hermitian
    ds = evaluate(d_D(field, s, degree=0), env)
    lhs = np.sum(w * top * _pair1_frame(ds, evaluate(phi, env), ginv_v))
    rhs = np.sum(w * top * np.real(pair(evaluate(s, env),
                                        evaluate(delta(field, phi, degree=1), env))))
    out.append(record("gauge.adjoint-0-1", name, grid.points, seed, lhs, rhs, 1e-5,
                      floor=1e-300))
    return out


def _pair2_frame(F, G, ginv_v):
    return np.real(-0.5 * np.einsum("ACp,BDp,ABijp,CDjip->p", ginv_v, ginv_v, F, G))


def _pair1_frame(phi, psi, ginv_v):
    return np.real(-np.einsum("ABp,Aijp,Bjip->p", ginv_v, phi, psi))
