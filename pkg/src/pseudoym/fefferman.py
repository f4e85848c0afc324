"""Fefferman metric on the local circle bundle C(M) = M x S^1.

Coordinates on C(M) are the chart coordinates followed by the fibre
coordinate ``gamma``.  The connection form is

    sigma = (1/(n+2)) (dgamma + i omega_a^a - (i/2) g^{ab} dg_{ab}
                       - rho/(4(n+1)) theta)

and F = G~ + theta sigma + sigma theta, where G~ extends the Levi form by
G~(T, .) = 0.  S = ((n+2)/2) d/dgamma, so 2 sigma(S) = 1.

Levi-Civita data of F always comes from exact derivatives of the metric
components followed by a numeric inversion; none of the checks below
reuse the closed-form covariant derivatives they are testing.
"""

import math
from functools import cached_property

import numpy as np

from . import calculus as calc
from . import gauge as gg
from .exprcore import I, ONE, ZERO, as_expr, diff, evaluate
from .pseudoherm import PHData, volume_densities
from .report import Note, record, scalar_record

FIBRE = "gamma"


class CircleChart:
    """Base pseudohermitian data plus the fibre coordinate."""

    def __init__(self, data):
        if not isinstance(data, PHData):
            data = PHData(data)
        self.data = data
        self.n = data.n
        self.N = data.N
        self.coords = tuple(data.coords) + (FIBRE,)

    @property
    def name(self):
        return self.data.chart.name

    @cached_property
    def sigma(self):
        """sigma on d/dx^A (A < N) and d/dgamma (last entry)."""
        data, n, N = self.data, self.n, self.N
        cof = data.coframe
        H = data.levi_inv
        gam = data.gamma
        trace = [calc.esum(gam[B, 1 + a, 1 + a] for a in range(n)) for B in range(N)]
        rho = data.rho
        out = []
        for k, c in enumerate(data.coords):
            w = calc.esum(cof[B, k] * trace[B] for B in range(N)
                          if not calc._zero(cof[B, k]))
            dg = calc.esum(H[b, a] * diff(data.levi[a, b], c)
                           for a in range(n) for b in range(n))
            s = I * w - I * dg / 2 - rho * data.chart.theta[k] / (4 * (n + 1))
            out.append(as_expr(s / (n + 2)))
        out.append(as_expr(ONE / (n + 2)))
        return calc.earray(out)

    @cached_property
    def metric(self):
        """Symmetric (N+1) x (N+1) matrix F_ab on the coordinate vectors."""
        data, n, N = self.data, self.n, self.N
        cof = data.coframe
        G = data.levi
        th = list(data.chart.theta) + [ZERO]
        sg = self.sigma
        F = calc.zeros((N + 1, N + 1))
        for p in range(N + 1):
            for q in range(p, N + 1):
                t = th[p] * sg[q] + th[q] * sg[p]
                if p < N and q < N:
                    t = t + calc.esum(
                        G[a, b] * (cof[1 + a, p] * cof[1 + n + b, q]
                                   + cof[1 + a, q] * cof[1 + n + b, p])
                        for a in range(n) for b in range(n))
                F[p, q] = as_expr(t)
                F[q, p] = F[p, q]
        return F

    @cached_property
    def metric_derivatives(self):
        """dF[k, a, b] = d_k F_ab (the fibre derivative vanishes)."""
        F = self.metric
        M = self.N + 1
        out = calc.zeros((M, M, M))
        for k, c in enumerate(self.data.coords):
            for a in range(M):
                for b in range(a, M):
                    out[k, a, b] = diff(F[a, b], c)
                    out[k, b, a] = out[k, a, b]
        return out

    @cached_property
    def dsigma(self):
        return calc.d_form(self.sigma, self.coords)

    def lift(self, V):
        """Horizontal lift of a base vector field given by coordinates."""
        s = calc.dot(self.sigma[:self.N], V)
        return calc.earray(list(V) + [-(self.n + 2) * s])

    @cached_property
    def S(self):
        return calc.earray([ZERO] * self.N + [as_expr(self.n + 2) / 2])

    @cached_property
    def lifted_frame(self):
        """Lifts of (T, T_a, T_abar) followed by S."""
        return [self.lift(V) for V in self.data.frame] + [self.S]


def build_fefferman(chart):
    """CircleChart for a chart or PHData; the metric is built lazily."""
    return chart if isinstance(chart, CircleChart) else CircleChart(chart)


# -------------------------------------------------------------- numerics

def christoffel(cc, env):
    """Gam[c, a, b] (point axis last) by inverting F numerically."""
    F = evaluate(cc.metric, env).real
    dF = evaluate(cc.metric_derivatives, env).real
    Finv = np.moveaxis(np.linalg.inv(np.moveaxis(F, -1, 0)), 0, -1)
    low = 0.5 * (np.einsum("adbp->dabp", dF) + np.einsum("bdap->dabp", dF)
                 - dF)
    return np.einsum("cdp,dabp->cabp", Finv, low), F, Finv


def frame_values(cc, env):
    """Lifted frame L[A, k, p] (A = 0..2n, then S) and dsigma values."""
    L = evaluate(np.array(cc.lifted_frame, dtype=object), env)
    return L


def covariant(cc, U, W, env, Gam):
    """nabla^F_U W for symbolic coordinate vectors on C(M)."""
    dW = evaluate(calc.apply(U, W, cc.coords), env)
    Uv = evaluate(U, env)
    Wv = evaluate(W, env)
    return dW + np.einsum("cabp,ap,bp->cp", Gam, Uv, Wv)


def frame_components(cc, v, L, env):
    """Components of a C(M) vector on (T_A lifts, S)."""
    N = cc.N
    cof = evaluate(cc.data.coframe, env)
    c = np.einsum("Akp,kp->Ap", cof, v[:N])
    rest = v[N] - np.einsum("Ap,Ap->p", c, L[:N, N])
    s = rest / ((cc.n + 2) / 2)
    return np.concatenate([c, s[None]], axis=0)


def _base_numbers(cc, env):
    data = cc.data
    out = {
        "gamma": evaluate(data.gamma, env),
        "gF": evaluate(data.metric, env),
        "ginvH": evaluate(gg.inverse_metric(data, horizontal=True), env),
        "A": evaluate(data.torsion_matrix, env),
        "dth": evaluate(data.dtheta, env),
        "dsig": evaluate(cc.dsigma, env),
    }
    return out


def tau_matrix(Amat, n):
    """tau[A, D]: tau T_A = sum_D tau[A, D] T_D (frame indices)."""
    N = 2 * n + 1
    p = Amat.shape[-1]
    t = np.zeros((N, N, p), dtype=complex)
    for a in range(n):
        for b in range(n):
            t[1 + a, 1 + n + b] = Amat[a, b]
            t[1 + n + a, 1 + b] = np.conj(Amat[a, b])
    return t


def phi_matrix(cc, L, nums):
    """phi[A, D] with G(phi T_A, T_E) = dsigma(T_A lift, T_E lift), and V."""
    ds = np.einsum("Akp,klp,Blp->ABp", L, nums["dsig"], L)
    gH = nums["ginvH"]
    N = cc.N
    phi = np.einsum("ACp,CDp->ADp", ds[:N, :N], gH)
    phi[0] = 0
    V = 2 * np.einsum("Cp,CDp->Dp", ds[0, :N], gH)
    return phi, V, ds


def _jmult(n):
    return np.array([0] + [1j] * n + [-1j] * n)


def _connection_sides(cc, env, scale):
    """Both sides of each identity with vertical field scale * S."""
    n, N = cc.n, cc.N
    p = len(next(iter(env.values())))
    Gam, F, Finv = christoffel(cc, env)
    L = frame_values(cc, env)
    nums = _base_numbers(cc, env)
    phi, V, ds = phi_matrix(cc, L, nums)
    tau = tau_matrix(nums["A"], n)
    gF = nums["gF"]
    J = _jmult(n)
    frame = list(cc.lifted_frame[:N]) + [calc.earray(
        [as_expr(scale) * x for x in cc.S])]
    hor = range(1, N)
    Sx = N

    def nab(a, b):
        v = covariant(cc, frame[a], frame[b], env, Gam)
        out = frame_components(cc, v, L, env)
        out[N] = out[N] / scale
        return out

    def vec(base, s=None):
        out = np.zeros((N + 1, p), dtype=complex)
        out[:N] = base
        if s is not None:
            out[N] = s
        return out

    lhs = {k: [] for k in ("hh", "hT", "Th", "hS", "Sh", "TT", "SS", "ST", "TS")}
    rhs = {k: [] for k in lhs}
    for A in hor:
        for B in hor:
            Ab = np.einsum("Cp,Cp->p", gF[A], tau[B])
            base = nums["gamma"][A, B].copy()
            base[0] = base[0] - np.einsum("kp,klp,lp->p", L[A, :N],
                                          nums["dth"], L[B, :N])
            lhs["hh"].append(nab(A, B))
            rhs["hh"].append(vec(base, -(Ab + ds[A, B])))
        lhs["hT"].append(nab(A, 0))
        rhs["hT"].append(vec(tau[A] + phi[A]))
        lhs["Th"].append(nab(0, A))
        rhs["Th"].append(vec(nums["gamma"][0, A] + phi[A], 2 * ds[A, 0]))
        jx = np.zeros((N, p), dtype=complex)
        jx[A] = J[A]
        lhs["hS"].append(nab(A, Sx))
        rhs["hS"].append(vec(jx))
        lhs["Sh"].append(nab(Sx, A))
        rhs["Sh"].append(vec(jx))
    lhs["TT"].append(nab(0, 0))
    rhs["TT"].append(vec(V))
    zero = np.zeros((N + 1, p), dtype=complex)
    for key, (a, b) in (("SS", (Sx, Sx)), ("ST", (Sx, 0)), ("TS", (0, Sx))):
        lhs[key].append(nab(a, b))
        rhs[key].append(zero)
    return {k: (np.array(lhs[k]), np.array(rhs[k])) for k in lhs}


CONNECTION_CASES = {"hh": "horizontal-horizontal", "hT": "horizontal-T",
                "Th": "T-horizontal", "hS": "horizontal-S", "Sh": "S-horizontal",
                "TT": "T-T", "SS": "S-S", "ST": "S-T", "TS": "T-S"}


def connection_check(cc, env, seed=0, tol=1e-8):
    """Covariant derivatives of the lifted frame against their expressions
    through Tanaka-Webster data.

    The closed forms hold for the vertical generator normalised by
    sigma = 1, which is 2 S.  With S itself (sigma(S) = 1/2, the field that
    makes T +- S orthonormal) three of them are off by a factor 2; the size
    of that discrepancy is reported as a note.
    """
    cc = build_fefferman(cc)
    p = len(next(iter(env.values())))
    sides = _connection_sides(cc, env, 2)
    recs = [record(f"fefferman.nabla-{CONNECTION_CASES[k]}", cc.name, p, seed, l, r, tol)
            for k, (l, r) in sides.items()]
    literal = _connection_sides(cc, env, 1)
    worst = max(float(np.max(np.abs(l - r))) for l, r in literal.values())
    notes = []
    if worst > tol:
        notes.append(Note("fefferman.nabla-S-normalisation", cc.name,
                          "closed forms need sigma(S) = 1; with "
                          "S = ((n+2)/2) d/dgamma the S-coefficients of "
                          "nabla_X Y and nabla_T X double and nabla_X S "
                          "halves", worst))
    return recs, notes


# ---------------------------------------------------------- metric checks

def lorentz_inverse(cc, L, nums):
    """sum_a E_a^ (x) E_a^ + (T^ + S)(x)(T^ + S) - (T^ - S)(x)(T^ - S)."""
    N = cc.N
    gH = nums["ginvH"]
    out = np.einsum("ABp,Akp,Blp->klp", gH, L[:N], L[:N])
    T, S = L[0], L[N]
    return out + 2 * (np.einsum("kp,lp->klp", T, S) + np.einsum("kp,lp->klp", S, T))


def metric_check(cc, env, seed=0, tol=1e-9):
    """Structural facts about F: null fibre, Lorentz signature, the inverse
    relations and the contractions of the inverse with the frame."""
    cc = build_fefferman(cc)
    n, N = cc.n, cc.N
    p = len(next(iter(env.values())))
    F = cc.metric
    recs = []
    exact = [F[N, N], calc.two_form(F, cc.S, cc.S),
             as_expr(2 * calc.pair(cc.sigma, cc.S) - 1)]
    for name, e in zip(("fefferman.F-gamma-gamma", "fefferman.S-null",
                        "fefferman.sigma-S"), exact):
        e = as_expr(e)
        v = 0.0 if e.is_zero else float(np.max(np.abs(evaluate([e], env))))
        recs.append(scalar_record(name, cc.name, p, seed, v, v, 0.0))
    th = evaluate(cc.data.chart.theta, env)
    Fv = evaluate(F, env).real
    recs.append(record("fefferman.F-A-gamma", cc.name, p, seed, Fv[:N, N],
                       th / (n + 2), tol))
    Fp = np.moveaxis(Fv, -1, 0)
    eig = np.linalg.eigvalsh(Fp)
    neg = (eig < 0).sum(axis=1)
    det = np.linalg.det(Fp)
    bad = np.maximum(np.abs(neg - 1), (det >= 0).astype(int))
    recs.append(scalar_record("fefferman.lorentzian", cc.name, p, seed,
                              bad.max(), bad.max(), 0.0))
    L = frame_values(cc, env)
    tm = L[0] - L[N]
    recs.append(record("fefferman.timelike", cc.name, p, seed,
                       np.einsum("kp,klp,lp->p", tm, Fv, tm), -np.ones(p), tol))
    nums = _base_numbers(cc, env)
    Finv = np.moveaxis(np.linalg.inv(Fp), 0, -1)
    recs.append(record("fefferman.lorentz-frame", cc.name, p, seed,
                       lorentz_inverse(cc, L, nums), Finv, tol))
    # inverse relations on the coordinate blocks
    lam0 = th
    eye = np.broadcast_to(np.eye(N)[:, :, None], (N, N, p))
    r1 = (np.einsum("ABp,BCp->ACp", Finv[:N, :N], Fv[:N, :N])
          + np.einsum("Ap,Cp->ACp", Finv[:N, N], lam0) / (n + 2))
    r2 = np.einsum("ABp,Bp->Ap", Finv[:N, :N], lam0)
    r3 = (np.einsum("Bp,BCp->Cp", Finv[N, :N], Fv[:N, :N])
          + lam0 * Finv[N, N] / (n + 2))
    r4 = np.einsum("Bp,Bp->p", Finv[N, :N], lam0)
    lhs = np.concatenate([(r1 - eye).ravel(), r2.ravel(), r3.ravel(),
                          (r4 - (n + 2)).ravel()])
    recs.append(record("fefferman.inverse-relations", cc.name, p, seed,
                       lhs, np.zeros_like(lhs), tol))
    cof = evaluate(cc.data.coframe, env)
    la, lb = cof[1:n + 1], cof[n + 1:]
    mixed = np.einsum("ABp,aAp,bBp->abp", Finv[:N, :N], la, lb)
    H = evaluate(cc.data.levi_inv, env)
    recs.append(record("fefferman.contraction-mixed", cc.name, p, seed, mixed,
                       np.swapaxes(H, 0, 1), tol))
    pure = np.einsum("ABp,aAp,bBp->abp", Finv[:N, :N], la, la)
    recs.append(record("fefferman.contraction-pure", cc.name, p, seed, pure,
                       np.zeros_like(pure), tol))
    return recs, []


# --------------------------------------------------------- gauge pullback

def lifted_connection(field):
    """Coordinate connection form of pi^* D on C(M) (zero along gamma)."""
    w = field.coordinate_form
    m = field.m
    return np.concatenate([w, gg._mzero(m)[None]], axis=0)


def lifted_curvature(field, coords):
    """Coordinate curvature of pi^* D computed on C(M)."""
    w = lifted_connection(field)
    M, m = w.shape[0], field.m
    Rc = np.empty((M, M, m, m), dtype=object)
    for k in range(M):
        Rc[k, k] = gg._mzero(m)
        for l in range(k + 1, M):
            d = calc.earray([[diff(w[l, i, j], coords[k]) - diff(w[k, i, j], coords[l])
                              for j in range(m)] for i in range(m)])
            t = calc.earray(d + gg.commutator(w[k], w[l]))
            Rc[k, l] = t
            Rc[l, k] = calc.earray(-t)
    return Rc


def pullback_check(field, env, seed=0, tol=1e-8, cc=None):
    """Curvature of the pulled-back field and its Fefferman norm."""
    cc = build_fefferman(cc or field.data)
    N = cc.N
    p = len(next(iter(env.values())))
    Rh = lifted_curvature(field, cc.coords)
    recs = []
    col = [e for k in range(N + 1) for e in Rh[k, N].ravel()]
    v = max((float(np.max(np.abs(evaluate([e], env)))) for e in col
             if not as_expr(e).is_zero), default=0.0)
    recs.append(scalar_record("pullback.fibre-column", cc.name, p, seed, v, v, 0.0))
    Rv = evaluate(Rh, env)
    Rb = evaluate(gg.coordinate_curvature(field), env)
    recs.append(record("pullback.lift", cc.name, p, seed, Rv[:N, :N], Rb, 1e-12))
    Fv = evaluate(cc.metric, env).real
    Finv = np.moveaxis(np.linalg.inv(np.moveaxis(Fv, -1, 0)), 0, -1)
    lhs = np.real(-0.5 * np.einsum("kpx,lqx,klijx,pqjix->x", Finv, Finv, Rv, Rv))
    rhs = gg.densities(field, env)["horizontal"]
    recs.append(record("pullback.norm", cc.name, p, seed, lhs, rhs, tol))
    return recs, []


# ----------------------------------------------------- projection formulas

def fefferman_divergence(field, env, cc=None):
    """delta^{pi^* D} R on the coordinate vectors of C(M), traced with the
    Lorentz frame (E_a^, T^ +- S).  Returns (values[c, i, j, p], helpers)."""
    cc = build_fefferman(cc or field.data)
    N, m = cc.N, field.m
    M = N + 1
    Rh = lifted_curvature(field, cc.coords)
    dR = np.empty((M, M, M, m, m), dtype=object)
    for a in range(M):
        for b in range(M):
            for c in range(M):
                dR[a, b, c] = calc.earray([[diff(Rh[b, c, i, j], cc.coords[a])
                                            for j in range(m)] for i in range(m)])
    w = lifted_connection(field)
    Gam, F, Finv = christoffel(cc, env)
    Rv = evaluate(Rh, env)
    dRv = evaluate(dR, env)
    wv = evaluate(w, env)
    L = frame_values(cc, env)
    nums = _base_numbers(cc, env)
    ginv = lorentz_inverse(cc, L, nums)
    DR = (dRv + np.einsum("aijp,bcjkp->abcikp", wv, Rv)
          - np.einsum("bcijp,ajkp->abcikp", Rv, wv)
          - np.einsum("eabp,ecijp->abcijp", Gam, Rv)
          - np.einsum("eacp,beijp->abcijp", Gam, Rv))
    delta = -np.einsum("abp,abcijp->cijp", ginv, DR)
    return delta, {"L": L, "nums": nums, "cc": cc, "Finv": Finv, "ginv": ginv}


def _phi_raised(cc, env):
    """Closed form phi^{a bbar} from the pseudohermitian Ricci tensor."""
    n = cc.n
    data = cc.data
    H = evaluate(data.levi_inv, env)
    ric = evaluate(data.ricci, env)
    rho = evaluate([data.rho], env)[0]
    # R^{a bbar} = g^{a mbar} g^{l bbar} R_{l mbar},  g^{a bbar} = H[b, a]
    Rup = np.einsum("map,blp,lmp->abp", H, H, ric)
    gup = np.swapaxes(H, 0, 1)
    return Rup - rho * gup / (2 * (n + 1)), gup


def projection_check(field, env, seed=0, tol=1e-7, cc=None):
    """The Fefferman divergence of the pulled-back curvature on X^, T^ and
    the vertical generator against base-side expressions.

    On X^ it reduces to (delta_b R)(X): the R(T, JX) contributions of the
    vertical frame and of the T^-component of nabla_{E_a^} X^ cancel.  On
    the generator with sigma = 1 (that is 2 S) it is 2 Lambda R.  Where the
    naive closed forms differ, the size of the difference is a note.
    """
    cc = build_fefferman(cc or field.data)
    n, N = cc.n, cc.N
    p = len(next(iter(env.values())))
    delta, aux = fefferman_divergence(field, env, cc)
    L, nums = aux["L"], aux["nums"]
    on = np.einsum("cijp,Acp->Aijp", delta, L)
    R = gg.curvature(field)
    Rv = evaluate(R, env)
    db = evaluate(gg.delta_b(field, R), env)
    J = _jmult(n)
    recs, notes = [], []
    recs.append(record("projection.horizontal", cc.name, p, seed, on[1:N],
                       db[1:N], tol))
    extra = np.array([J[A] * Rv[0, A] for A in range(1, N)])
    if np.max(np.abs(extra)) > tol:
        notes.append(Note("projection.horizontal-literal", cc.name,
                          "the added R(T, JX) term is absent: divergence on "
                          "X^ equals (delta_b R)(X)", float(np.max(np.abs(extra)))))
    ric_term, _ = _phi_raised(cc, env)
    mix = np.einsum("abp,abijp->ijp", ric_term, Rv[1:n + 1, n + 1:])
    recs.append(record("projection.characteristic", cc.name, p, seed, on[0],
                       db[0] - 1j / (n + 2) * mix, tol))
    phi, _, _ = phi_matrix(cc, L, nums)
    Z = tau_matrix(nums["A"], n) + phi
    trace = np.einsum("ABp,BDp,ADijp->ijp", nums["ginvH"], Z, Rv)
    recs.append(record("projection.characteristic-phi", cc.name, p, seed, on[0],
                       db[0] + trace, tol))
    lam = evaluate(gg.trace_lambda(cc.data, R), env)
    recs.append(record("projection.fibre", cc.name, p, seed, 2 * on[N],
                       2 * lam, tol))
    if np.max(np.abs(lam)) > tol:
        notes.append(Note("projection.fibre-literal", cc.name,
                          "on S = ((n+2)/2) d/dgamma the divergence is "
                          "Lambda R; 2 Lambda R belongs to 2 S",
                          float(np.max(np.abs(on[N] - 2 * lam)))))
    return recs, notes


def phi_check(cc, env, seed=0, tol=1e-8):
    """phi from dsigma against its Ricci closed form."""
    cc = build_fefferman(cc)
    n = cc.n
    p = len(next(iter(env.values())))
    L = frame_values(cc, env)
    nums = _base_numbers(cc, env)
    phi, _, _ = phi_matrix(cc, L, nums)
    H = evaluate(cc.data.levi_inv, env)
    up = np.einsum("acp,cbp->abp", H, phi[1:n + 1, 1:n + 1])
    ric_term, _ = _phi_raised(cc, env)
    closed = 1j / (2 * (n + 2)) * np.swapaxes(ric_term, 0, 1)
    return [record("fefferman.phi-closed-form", cc.name, p, seed, up, closed, tol),
            record("fefferman.phi-pure", cc.name, p, seed, phi[1:n + 1, n + 1:],
                   np.zeros((n, n, p)), tol)], []


# --------------------------------------------------------- fibre integral

def fiber_integral_check(cc, f, box, seed=0, tol=1e-6, period=2 * math.pi):
    """Integral of f o pi against dvol(F) over box x [0, period) divided by
    the integral of f theta ^ (dtheta)^n over the box.

    The metric density has no fibre dependence, so the fibre integral is
    the factor ``period``.  Returns (records, notes, ratio).
    """
    cc = build_fefferman(cc)
    env = box.env()
    fv = evaluate([f], env)[0].real
    Fv = evaluate(cc.metric, env).real
    dvolF = np.sqrt(np.abs(np.linalg.det(np.moveaxis(Fv, -1, 0))))
    top, vol = volume_densities(cc.data, env)
    w = box.weights
    num = period * np.sum(w * fv * dvolF)
    den = np.sum(w * fv * np.abs(top))
    ratio = num / den if den != 0 else 0.0
    recs = [scalar_record("fefferman.fiber-ratio", cc.name, box.points, seed,
                          abs(ratio - 2 * math.pi),
                          abs(ratio - 2 * math.pi) / (2 * math.pi), tol)]
    # the metric density itself: sqrt|det F| = dvol(g_theta) / (n + 2)
    recs.append(record("fefferman.metric-density", cc.name, box.points, seed,
                       dvolF, vol / (cc.n + 2), 1e-10))
    return recs, [], ratio


# ------------------------------------------------------------- suites

def check_fefferman(chart, env, seed, tol=1e-8, resolution=16, data=None):
    """Metric facts, the covariant-derivative identities, the pulled-back
    norm and the fibre integral on one chart."""
    data = data or PHData(chart)
    cc = CircleChart(data)
    recs, notes = [], []
    for fn, t in ((metric_check, 1e-9), (connection_check, tol), (phi_check, tol)):
        r, nt = fn(cc, env, seed, t)
        recs += r
        notes += nt
    for m in (1, 2):
        field = gg.random_field(data, m, seed + m)
        r, _ = pullback_check(field, env, seed, tol, cc)
        for x in r:
            x.identity_id += f"-u{m}"
        recs += r
    from .varsolver import GridBox
    box = GridBox.from_chart(chart, resolution)
    r, nt, _ = fiber_integral_check(cc, gg.bump(chart), box, seed)
    recs += r
    notes += nt
    return recs, notes


def check_projection(chart, env, seed, tol=1e-7, data=None):
    """Divergence of pulled-back curvatures for a random U(2) field and for
    a field with horizontal curvature."""
    data = data or PHData(chart)
    cc = CircleChart(data)
    recs, notes = [], []
    for m in (1, 2):
        field = gg.random_field(data, m, seed + m)
        r, nt = projection_check(field, env, seed, tol, cc)
        for x in r:
            x.identity_id += f"-u{m}"
        recs += r
        notes += nt
    return recs, notes
