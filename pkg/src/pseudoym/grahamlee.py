"""Transverse geometry of a defining function on a domain in C^n.

A domain file gives a defining function ``phi`` in real coordinates
``(x1, y1, ..., xn, yn)`` (``z_j = x_j + i y_j``) and a frame ``W_a`` of the
(1,0) vectors tangent to the level sets of ``phi``.  From it we build

* the transverse field ``xi`` (type (1,0), ``d phi(xi) = 1``, Levi-orthogonal
  to the leaves), the transverse curvature ``r``, and ``T``, ``N`` with
  ``xi = (N - iT)/2``;
* the contact form ``theta = (i/2)(dbar - d) phi`` of every leaf, its
  tangential metric and the Graham-Lee connection;
* the Kaehler metric built from ``theta`` and ``phi`` and its Levi-Civita
  connection, compared with the Graham-Lee connection.

Frame indices: ``0`` is T, ``1..m`` the W_a, ``m+1..2m`` their conjugates and
``2m+1`` is N, with ``m = n - 1``.  Coefficients are numeric arrays with the
point axis last, e.g. ``G[A, B, C, p]`` for ``nabla_{F_A} F_B``.
"""

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from . import calculus as calc
from .exprcore import I, ONE, as_expr, const, diff, evaluate, log, parse, sqrt, substitute
from .fixtures import FixtureError, load_text, parse_text, require
from .pseudoherm import CRChart, PHData, top_form_density
from .report import record, scalar_record

__all__ = [
    "DomainChart", "load_domain", "TransverseData", "transverse_frame",
    "graham_lee_connection", "gl_verify", "kahler_metric", "kahler_check",
    "lc_relation_check", "leaf_check", "leaf_volume_check", "check_graham_lee",
    "check_lc_relations", "bergman_constant",
]


def bergman_constant(n):
    """(pi^n / n!)^(1/(n+1)); the ball's phi = -c (1 - |z|^2)."""
    return (math.pi ** n / math.factorial(n)) ** (1.0 / (n + 1))


@dataclass(frozen=True)
class DomainChart:
    n: int
    coords: tuple
    phi: object
    frame: np.ndarray      # frame[a, j]: coefficient of W_a on d/dz^j
    shell: tuple = (0.3, 0.9)
    name: str = "domain"
    leaf_radius: float = None

    @property
    def m(self):
        return self.n - 1

    def sample(self, npts, seed):
        """Seeded points with shell[0] <= |z| <= shell[1]."""
        rng = np.random.default_rng(seed)
        u = rng.normal(size=(2 * self.n, npts))
        u /= np.linalg.norm(u, axis=0)
        lo, hi = self.shell
        rad = rng.uniform(lo, hi, size=npts)
        return {c: u[k] * rad for k, c in enumerate(self.coords)}

    def sphere(self, npts, seed, radius, min_last=0.3):
        """Points of |z| = radius whose last coordinate is >= min_last*radius."""
        rng = np.random.default_rng(seed)
        got = []
        while sum(len(g[0]) for g in got) < npts:
            u = rng.normal(size=(2 * self.n, 4 * npts))
            u /= np.linalg.norm(u, axis=0)
            u[-1] = np.abs(u[-1])
            got.append(u[:, u[-1] >= min_last].T)
        pts = np.concatenate([g for g in got], axis=0)[:npts].T * radius
        return {c: pts[k] for k, c in enumerate(self.coords)}


def domain_from_table(table, path="<string>"):
    def get(key):
        return require(table, key, path)

    n = int(get("n")[0])
    coords = tuple(get("coords")[0])
    if len(coords) != 2 * n:
        raise FixtureError(f"need {2 * n} real coordinates", path, get("coords")[1])
    val, line, col = get("phi")
    try:
        phi = parse(val, coords)
        frame = []
        for a in range(n - 1):
            vals, line, col = get(f"frame.W{a + 1}")
            if len(vals) != n:
                raise FixtureError(f"frame.W{a + 1} needs {n} entries", path, line, col)
            frame.append([parse(v, coords) for v in vals])
    except ValueError as exc:
        if isinstance(exc, FixtureError):
            raise
        raise FixtureError(str(exc), path, line, col) from exc
    if "scale" in table:
        s, line, col = table["scale"]
        try:
            c = bergman_constant(n) if s == "bergman" else float(s)
        except ValueError:
            raise FixtureError(f"bad scale {s!r}", path, line, col) from None
        phi = const(c) * phi
    shell = (0.3, 0.9)
    if "shell" in table:
        shell = tuple(float(v) for v in table["shell"][0])
    radius = float(table["leaf.radius"][0]) if "leaf.radius" in table else None
    name = path.rsplit("/", 1)[-1].rsplit(".", 1)[0]
    return DomainChart(n, coords, phi, calc.earray(frame).reshape(n - 1, n),
                       shell, name, radius)


def load_domain(path):
    """Load a ``.dom`` domain file (or a bundled fixture name)."""
    text, shown = load_text(path)
    return domain_from_table(parse_text(text, shown), shown)


# ----------------------------------------------------- complex structure

def _xs(dom):
    return dom.coords[0::2], dom.coords[1::2]


def zvector(dom, coeffs):
    """Real-coordinate components of sum_j c_j d/dz^j."""
    out = []
    for c in coeffs:
        c = as_expr(c)
        out += [c / 2, -I * c / 2]
    return calc.earray(out)


def J_coord(v):
    """J on coordinate components: J d/dx = d/dy, J d/dy = -d/dx."""
    out = np.empty_like(v)
    out[0::2] = -v[1::2]
    out[1::2] = v[0::2]
    return out


@dataclass
class TransverseData:
    """Symbolic transverse data of a domain; see :func:`transverse_frame`."""

    domain: DomainChart
    dphi_z: list          # d phi / dz^j
    hess: np.ndarray      # hess[j, k] = d^2 phi / dz^j dzbar^k
    xi: list              # coefficients of xi on d/dz^j
    r: object
    T: np.ndarray
    N: np.ndarray
    theta: np.ndarray
    dtheta: np.ndarray
    W: list               # unitary leaf frame, coordinate components

    @cached_property
    def frame(self):
        Wb = [calc.conj(w) for w in self.W]
        return [self.T] + list(self.W) + Wb + [self.N]

    @property
    def m(self):
        return self.domain.m

    @property
    def dim(self):
        return 2 * self.domain.n


def transverse_frame(dom):
    """xi, r, T, N, theta and a unitary leaf frame, as expressions."""
    n = dom.n
    xs, ys = _xs(dom)
    phi = dom.phi

    def dz(f, j):
        return (diff(f, xs[j]) - I * diff(f, ys[j])) / 2

    def dzb(f, j):
        return (diff(f, xs[j]) + I * diff(f, ys[j])) / 2

    dphi = [dz(phi, j) for j in range(n)]
    hess = calc.earray([[dzb(dphi[j], k) for k in range(n)] for j in range(n)])
    # rows: d phi(xi) = 1 and ddbar phi(xi, conj W_a) = 0
    M = calc.zeros((n, n))
    for j in range(n):
        M[0, j] = dphi[j]
    for a in range(n - 1):
        for j in range(n):
            M[1 + a, j] = calc.esum(hess[j, k] * calc.conj(dom.frame[a, k])
                                    for k in range(n))
    Minv = calc.inverse(M)
    xi = [Minv[j, 0] for j in range(n)]
    r = calc.esum(hess[j, k] * xi[j] * calc.conj(xi[k])
                  for j in range(n) for k in range(n))
    xiv = zvector(dom, xi)
    xib = calc.conj(xiv)
    N = calc.earray([a + b for a, b in zip(xiv, xib)])
    T = calc.earray([I * (a - b) for a, b in zip(xiv, xib)])
    # theta = (i/2)(dbar phi - d phi) on the real coordinate basis
    theta = []
    for j in range(n):
        dpb = calc.conj(dphi[j])
        theta += [I * (dpb - dphi[j]) / 2, I * (-I * dpb - I * dphi[j]) / 2]
    theta = calc.earray(theta)
    dtheta = calc.d_form(theta, dom.coords)
    W0 = [zvector(dom, dom.frame[a]) for a in range(n - 1)]
    gram = calc.zeros((n - 1, n - 1))
    for a in range(n - 1):
        for b in range(n - 1):
            gram[a, b] = -I * calc.two_form(dtheta, W0[a], calc.conj(W0[b]))
    W, _ = calc.hermitian_orthonormalize(W0, gram)
    return TransverseData(dom, dphi, hess, xi, r, T, N, theta, dtheta, list(W))


# ------------------------------------------------------ numeric pipeline

class Numbers:
    """Point values of the transverse data, the frame and the connection."""

    def __init__(self, td, env):
        self.td = td
        self.env = env
        dom = td.domain
        self.P = len(next(iter(env.values())))
        m, D = td.m, td.dim
        self.m, self.D = m, D
        F = td.frame
        self.Fs = F
        self.F = evaluate(calc.earray(F), env)                 # (D, 2n, P)
        self.cof = np.linalg.inv(self.F.transpose(2, 1, 0)).transpose(1, 2, 0)
        self.phi = evaluate([dom.phi], env)[0].real
        self.r = evaluate([td.r], env)[0]
        self.theta = evaluate(td.theta, env)
        self.dtheta = evaluate(td.dtheta, env)
        dphi_c = calc.earray([diff(dom.phi, c) for c in dom.coords])
        self.dphi = evaluate(dphi_c, env)
        self.dr = evaluate(calc.earray([calc.apply(V, td.r, dom.coords) for V in F]), env)
        br = calc.zeros((D, D, 2 * dom.n))
        for A in range(D):
            for B in range(A + 1, D):
                v = calc.bracket(F[A], F[B], dom.coords)
                br[A, B] = v
                br[B, A] = calc.earray([-x for x in v])
        self.brackets_coord = evaluate(br, env)
        self.C = self.comps(self.brackets_coord)            # C[A, B, E, p]
        self.gram_s = calc.zeros((m, m))
        Wb = [calc.conj(w) for w in td.W]
        for a in range(m):
            for b in range(m):
                self.gram_s[a, b] = -I * calc.two_form(td.dtheta, td.W[a], Wb[b])
        self.gram = evaluate(self.gram_s, env)
        self.dgram = evaluate(calc.earray(
            [[[calc.apply(V, self.gram_s[a, b], dom.coords) for b in range(m)]
              for a in range(m)] for V in F]), env)

    # frame components of coordinate vectors v[..., k, p]
    def comps(self, v):
        return np.einsum("Ekp,...kp->...Ep", self.cof, v)

    def coord(self, c):
        return np.einsum("A...p,Akp->...kp", c, self.F)

    # scalar forms on frame vectors
    def theta_F(self):
        return np.einsum("kp,Akp->Ap", self.theta, self.F)

    def dphi_F(self):
        return np.einsum("kp,Akp->Ap", self.dphi, self.F)

    def dtheta_F(self):
        return np.einsum("Akp,klp,Blp->ABp", self.F, self.dtheta, self.F)

    @cached_property
    def tangent(self):
        return list(range(self.D - 1))

    @cached_property
    def horizontal(self):
        return list(range(1, self.D - 1))

    @cached_property
    def gtheta(self):
        """g_theta on T, W, Wbar from dtheta(X, J Y) on the horizontal parts."""
        th = self.theta_F()
        T = self.F[0]
        H = self.F - th[:, None, :] * T[None]
        JH = np.stack([J_coord(h) for h in H])
        g = np.einsum("Akp,klp,Blp->ABp", H, self.dtheta, JH)
        g = g + th[:, None, :] * th[None, :, :]
        g[-1, :] = np.nan
        g[:, -1] = np.nan
        return g

    @cached_property
    def Phi(self):
        """phi-morphism on frame components: Phi[E, A] = comps of J pi_H F_A."""
        th = self.theta_F()
        H = self.F - th[:, None, :] * self.F[0][None]
        JH = np.stack([J_coord(h) for h in H])
        out = self.comps(JH).transpose(1, 0, 2)       # out[E, A]
        out[:, -1] = 0
        return out

    def phi_apply(self, v):
        return np.einsum("EAp,A...p->E...p", self.Phi, v)

    @cached_property
    def grad_r(self):
        """Frame components of the horizontal gradient of r."""
        h = self.horizontal
        G = self.gtheta[np.ix_(h, h)].transpose(2, 0, 1)
        y = np.linalg.solve(G, self.dr[h].T[..., None])[..., 0].T
        out = np.zeros((self.D, self.P), complex)
        out[h] = y
        return out

    # --------------------------------------------------- connection
    @cached_property
    def G(self):
        """Graham-Lee coefficients from the explicit bracket formulas."""
        m, D, P = self.m, self.D, self.P
        C = self.C
        W = list(range(1, m + 1))
        Wb = list(range(m + 1, 2 * m + 1))
        Tn, Nn = 0, D - 1
        G = np.zeros((D, D, D, P), complex)
        Hinv = np.linalg.inv(self.gram.transpose(2, 0, 1)).transpose(1, 2, 0)
        for a in range(m):
            A = W[a]
            for b in range(m):
                B = W[b]
                # nabla_Z Wbar = pi01 [Z, Wbar]
                for c in range(m):
                    G[A, Wb[b], Wb[c]] = C[A, Wb[b], Wb[c]]
                # nabla_Z W from the Levi form
                X = np.zeros((m, P), complex)
                for beta in range(m):
                    X[beta] = self.dgram[A, b, beta] - sum(
                        self.gram[b, c] * C[A, Wb[beta], Wb[c]] for c in range(m))
                for alpha in range(m):
                    G[A, B, W[alpha]] = sum(X[beta] * Hinv[beta, alpha]
                                            for beta in range(m))
        for b in range(m):
            # nabla_N Z = r Z + pi10 [N, Z]
            for c in range(m):
                G[Nn, W[b], W[c]] = C[Nn, W[b], W[c]]
            G[Nn, W[b], W[b]] += self.r
            # nabla_T Z = -1/2 phi (L_T phi) Z - [Z, T]
            v = C[Tn, W[b]]
            lie = 1j * v - self.phi_apply(v)
            G[Tn, W[b]] = -0.5 * self.phi_apply(lie) + v
        bar = self.bar
        for A in [Tn, Nn] + W:
            for b in range(m):
                B = W[b]
                if A in W:
                    G[bar[A], B] = np.conj(G[A, Wb[b]][bar])
                    G[bar[A], Wb[b]] = np.conj(G[A, B][bar])
                else:
                    G[A, Wb[b]] = np.conj(G[A, B][bar])
        return G

    @cached_property
    def bar(self):
        m = self.m
        return np.array([0] + list(range(m + 1, 2 * m + 1))
                        + list(range(1, m + 1)) + [self.D - 1])

    @cached_property
    def torsion(self):
        G = self.G
        return G - G.transpose(1, 0, 2, 3) - self.C

    def tau(self, v):
        """tau applied to frame components v[A, ...]."""
        return np.einsum("AEp,A...p->E...p", self.torsion[0], v)

    @cached_property
    def tau_matrix(self):
        return self.torsion[0].transpose(1, 0, 2)     # tau[E, A]


def graham_lee_connection(dom, env, td=None):
    """Numeric Graham-Lee coefficients G[A, B, C, p] on (T, W, Wbar, N)."""
    td = td or transverse_frame(dom)
    return Numbers(td, env).G


# ----------------------------------------------------------- identities

def _basis(D, P, A):
    e = np.zeros((D, P), complex)
    e[A] = 1
    return e


def gl_verify(dom, env, seed=0, tol=1e-8, td=None, nums=None):
    """Axioms, transverse invariants and structure identities of the
    Graham-Lee connection at the points of ``env``."""
    td = td or transverse_frame(dom)
    nu = nums or Numbers(td, env)
    m, D, P = nu.m, nu.D, nu.P
    name = dom.name
    recs = []

    def rec(i, lhs, rhs, t=tol, floor=1.0):
        recs.append(record(i, name, P, seed, lhs, rhs, t, floor))

    W = list(range(1, m + 1))
    Wb = list(range(m + 1, 2 * m + 1))
    H = W + Wb
    TAN = nu.tangent
    Nn = D - 1
    th = nu.theta_F()
    dp = nu.dphi_F()
    dth = nu.dtheta_F()
    G, Tor, C = nu.G, nu.torsion, nu.C
    r = nu.r
    gth = nu.gtheta
    Phi = nu.Phi
    one = np.ones(P)

    # transverse invariants
    hv = evaluate(calc.earray(td.hess), env)
    dphiz = evaluate(calc.earray(td.dphi_z), env)
    xi = evaluate(calc.earray(td.xi), env)
    rec("gl.xi-normal", np.einsum("jp,jp->p", dphiz, xi), one, 1e-10)
    Wz = np.stack([np.stack([nu.F[A][2 * j] + 1j * nu.F[A][2 * j + 1]
                             for j in range(dom.n)]) for A in W]) if m else np.zeros((0, dom.n, P))
    orth = np.einsum("jkp,jp,akp->ap", hv, xi, np.conj(Wz))
    rec("gl.xi-levi-orthogonal", orth, 0 * orth, 1e-10)
    rec("gl.dphi-N", dp[Nn], 2 * one, 1e-10)
    rec("gl.dphi-T", dp[0], 0 * one, 1e-10)
    rec("gl.theta-T", th[0], one, 1e-10)
    rec("gl.theta-N", th[Nn], 0 * one, 1e-10)
    rec("gl.dphi-W", dp[H], 0 * dp[H], 1e-10)
    rec("gl.one-minus-rphi", np.minimum(1 - r.real * nu.phi, 0), 0 * one, 0.0)

    # axioms
    rec("gl.parallel-T10", G[:, W][:, :, [0] + Wb + [Nn]], 0, tol)
    lev = np.zeros((D, m, m, P), complex)
    for A in range(D):
        for b in range(m):
            for c in range(m):
                lev[A, b, c] = (nu.dgram[A, b, c]
                                - sum(G[A, W[b], W[e]] * nu.gram[e, c] for e in range(m))
                                - sum(np.conj(G[nu.bar[A], W[c], W[e]]) * nu.gram[b, e]
                                      for e in range(m)))
    rec("gl.levi-parallel", lev, 0, tol)
    rec("gl.T-N-parallel", G[:, [0, Nn]], 0, 0.0)
    rec("gl.purity-ZW", Tor[np.ix_(W, W)], 0, tol)
    pz = np.zeros((m, m, D, P), complex)
    for a in range(m):
        for b in range(m):
            pz[a, b, 0] = 2j * nu.gram[a, b]
    rec("gl.purity-ZWbar", Tor[np.ix_(W, Wb)], pz, tol)
    tauW = nu.tau_matrix[:, W]                      # tau(W_b) components
    rhs = np.zeros((m, D, P), complex)
    for b in range(m):
        rhs[b] = r * _basis(D, P, W[b]) + 1j * tauW[:, b]
    rec("gl.purity-NW", Tor[Nn, W], rhs, tol)
    rec("gl.tau-type", tauW[[0] + W + [Nn]], 0, tol)
    tauN = Tor[0, Nn]
    Jg = nu.phi_apply(nu.grad_r)
    rec("gl.tau-N", tauN, -Jg - 2 * r * _basis(D, P, 0), tol)

    # phi-morphism algebra and tau
    PhT = Phi[np.ix_(TAN, TAN)]
    sq = np.einsum("EFp,FAp->EAp", PhT, PhT)
    rhs = -np.eye(len(TAN))[..., None] + np.einsum("E,Ap->EAp", np.eye(len(TAN))[0], th[TAN])
    rec("gl.phi-square", sq, rhs, 1e-10)
    rec("gl.g-T", gth[TAN, 0], th[TAN], 1e-10)
    gphi = np.einsum("EAp,EFp,FBp->ABp", PhT, gth[np.ix_(TAN, TAN)], PhT)
    rec("gl.g-phi", gphi, gth[np.ix_(TAN, TAN)] - th[TAN][:, None] * th[TAN][None], 1e-10)
    tauT = nu.tau_matrix[np.ix_(TAN, TAN)]
    anti = (np.einsum("EFp,FAp->EAp", PhT, tauT) + np.einsum("EFp,FAp->EAp", tauT, PhT))
    rec("gl.tau-phi-anticommute", anti, 0, tol)
    # tau X = -1/2 phi (L_T phi) X on H
    lieT = np.zeros((D, len(H), P), complex)
    for k, A in enumerate(H):
        PhiA = Phi[:, A]
        # [T, phi X] - phi [T, X]; phi X has constant frame components here
        lieT[:, k] = sum(PhiA[B] * C[0, B] for B in H) - nu.phi_apply(C[0, A])
    rec("gl.tau-lie-phi", nu.tau_matrix[:, H], -0.5 * nu.phi_apply(lieT), tol)
    gt = gth[np.ix_(TAN, TAN)]
    selfadj = np.einsum("EAp,EBp->ABp", tauT, gt)
    rec("gl.tau-selfadjoint", selfadj, selfadj.transpose(1, 0, 2), tol)
    pi01 = np.zeros((D, m, P), complex)
    for b in range(m):
        pi01[Wb, b] = 1j * C[Nn, W[b]][Wb]
    rec("gl.tau-N-bracket", tauW, pi01, tol)

    # exterior identities on all frame pairs
    gfull = np.zeros((D, D, P), complex)
    for a in range(m):
        for b in range(m):
            gfull[W[a], Wb[b]] = nu.gram[a, b]
    rhs = np.zeros((D, D, P), complex)
    for A in range(D):
        for B in range(D):
            s = 0
            for a in range(m):
                for b in range(m):
                    s = s + 1j * gfull[W[a], Wb[b]] * (
                        _kron(A, W[a]) * _kron(B, Wb[b]) - _kron(B, W[a]) * _kron(A, Wb[b]))
            rhs[A, B] = s + r * 0.5 * (dp[A] * th[B] - dp[B] * th[A])
    rec("gl.dtheta-split", dth, rhs, 1e-10)
    rec("gl.T-contraction", dth[0], -0.5 * r * dp, 1e-10)
    rec("gl.N-contraction", dth[Nn], r * th, 1e-10)
    rhs = 2 * r * _basis(D, P, 0)
    rhs = rhs + 1j * nu.grad_r * np.array([0] + [1] * m + [-1] * m + [0])[:, None]
    rec("gl.TN-bracket", C[0, Nn], rhs, tol)
    tauTAN = nu.tau_matrix[:, TAN]
    lhs = Tor[np.ix_(TAN, TAN)]
    rhs = (2 * dth[np.ix_(TAN, TAN)][:, :, None, :] * _basis(D, P, 0)[None, None]
           + th[TAN][:, None, None, :] * tauTAN.transpose(1, 0, 2)[None]
           - th[TAN][None, :, None, :] * tauTAN.transpose(1, 0, 2)[:, None])
    rec("gl.torsion-split", lhs, rhs, tol)
    # transverse torsion and Lie derivative identities
    rhs = np.zeros((len(TAN), D, P), complex)
    pgr = nu.phi_apply(nu.grad_r)
    for k, A in enumerate(TAN):
        rhs[k] = (r * _basis(D, P, A) + nu.tau(Phi[:, A])
                  + th[A] * (pgr + r * _basis(D, P, 0)))
    rec("gl.N-torsion", Tor[Nn, TAN], rhs, tol)
    lhs = np.zeros((len(TAN), D, P), complex)
    rhs = np.zeros((len(TAN), D, P), complex)
    for k, A in enumerate(TAN):
        lhs[k] = sum(Phi[B, A] * C[Nn, B] for B in TAN) - nu.phi_apply(C[Nn, A])
        rhs[k] = 2 * nu.tau_matrix[:, A] - th[A] * nu.grad_r
    rec("gl.N-phi-commutator", lhs, rhs, tol)
    # (L_N g)(X, Y) with g the tangential metric, X, Y horizontal
    dgN = evaluate(calc.earray(
        [[calc.apply(td.N, _gsym(nu, A, B), dom.coords) for B in H] for A in H]), env)
    gtan = gth[np.ix_(TAN, TAN)]
    CN = C[Nn][:, TAN]
    Hl = [TAN.index(A) for A in H]
    lhs = dgN.copy()
    for i, A in enumerate(H):
        for j, B in enumerate(H):
            lhs[i, j] -= (np.einsum("Ep,Ep->p", CN[A], gtan[:, Hl[j]])
                          + np.einsum("Ep,Ep->p", CN[B], gtan[:, Hl[i]]))
    rhs = 2 * r * gth[np.ix_(H, H)] + 2 * np.einsum(
        "AEp,EBp->ABp", dth[np.ix_(H, TAN)], nu.tau_matrix[np.ix_(TAN, H)])
    rec("gl.N-lie-metric", lhs, rhs, tol)
    # structure equation for d theta^alpha on all frame pairs
    recs.append(_structure_equation(nu, dp, th, name, seed, tol))
    return recs


def _kron(a, b):
    return 1.0 if a == b else 0.0


def _gsym(nu, A, B):
    """Symbolic g_theta(F_A, F_B) for horizontal frame indices."""
    td = nu.td
    F = td.frame
    return calc.two_form(td.dtheta, F[A], J_coord(F[B]))


def _structure_equation(nu, dp, th, name, seed, tol):
    m, D, P = nu.m, nu.D, nu.P
    W = list(range(1, m + 1))
    Wb = list(range(m + 1, 2 * m + 1))
    C, G = nu.C, nu.G
    r = nu.r
    dphiz = evaluate(calc.earray(nu.td.dphi_z), nu.env)
    dz = np.stack([nu.F[:, 2 * j] + 1j * nu.F[:, 2 * j + 1]
                   for j in range(nu.td.domain.n)])
    dpz = np.einsum("jp,jAp->Ap", dphiz, dz)        # (1,0) part of d phi
    A_mat = nu.tau_matrix            # tau(W_bbar) = sum A W_alpha
    lhs = np.zeros((m, D, D, P), complex)
    rhs = np.zeros((m, D, D, P), complex)
    for al in range(m):
        a = W[al]
        for X in range(D):
            for Y in range(D):
                lhs[al, X, Y] = -0.5 * C[X, Y, a]
                # theta^beta ^ phi_beta^alpha
                s = 0.5 * (G[Y, X, a] * (X in W) - G[X, Y, a] * (Y in W))
                # -i del phi ^ tau^alpha, tau^alpha = A_bbar^alpha theta^bbar
                tX = A_mat[a, X] * (X in Wb)
                tY = A_mat[a, Y] * (Y in Wb)
                s = s - 1j * 0.5 * (dpz[X] * tY - dpz[Y] * tX)
                s = s + 0.5j * nu.grad_r[a] * 0.5 * (dp[X] * th[Y] - dp[Y] * th[X])
                s = s + 0.5 * r * 0.5 * (dp[X] * (Y == a) - dp[Y] * (X == a))
                rhs[al, X, Y] = s
    return record("gl.structure-equation", name, P, seed, lhs, rhs, tol)


# ------------------------------------------------------- Kaehler metric

def _Jmatrix(N):
    Jm = calc.zeros((N, N))
    for j in range(0, N, 2):
        Jm[j + 1, j] = ONE
        Jm[j, j + 1] = -ONE
    return Jm


def kahler_metric(dom, td=None):
    """Coordinate matrix of the Kaehler metric built from phi and theta:

    g(X, Y) = ((n+1)/phi) {(i/phi)(del phi ^ delbar phi)(X, JY) - dtheta(X, JY)}
    """
    td = td or transverse_frame(dom)
    n, N = dom.n, 2 * dom.n
    dp = []
    for j in range(n):
        dp += [td.dphi_z[j], I * td.dphi_z[j]]
    dpb = calc.conj(calc.earray(dp))
    wedge = calc.zeros((N, N))
    for a in range(N):
        for b in range(N):
            wedge[a, b] = (dp[a] * dpb[b] - dp[b] * dpb[a]) / 2
    phi = dom.phi
    inner = calc.earray([[I / phi * wedge[a, b] - td.dtheta[a, b] for b in range(N)]
                         for a in range(N)])
    return calc.earray([[(n + 1) / phi * x for x in row]
                        for row in calc.dot(inner, _Jmatrix(N))])


def potential_metric(dom):
    """Real metric from the complex Hessian of -(n+1) log(-phi)."""
    n = dom.n
    xs, ys = _xs(dom)
    pot = const(-(n + 1)) * log(-dom.phi)
    h = calc.zeros((n, n))
    for j in range(n):
        dj = (diff(pot, xs[j]) - I * diff(pot, ys[j])) / 2
        for k in range(n):
            h[j, k] = (diff(dj, xs[k]) + I * diff(dj, ys[k])) / 2
    # g(e_a, e_b) = Re sum h_jk dz^j(e_a) conj(dz^k(e_b))
    N = 2 * n
    dz = calc.zeros((N, n))
    for j in range(n):
        dz[2 * j, j] = ONE
        dz[2 * j + 1, j] = I
    g = calc.zeros((N, N))
    for a in range(N):
        for b in range(N):
            s = calc.esum(h[j, k] * dz[a, j] * calc.conj(dz[b, k])
                          for j in range(n) for k in range(n))
            g[a, b] = (s + calc.conj(s)) / 2
    return g


def kahler_check(dom, env, seed=0, tol=1e-9, td=None, nums=None):
    td = td or transverse_frame(dom)
    nu = nums or Numbers(td, env)
    P, D = nu.P, nu.D
    name = dom.name
    gs = kahler_metric(dom, td)
    g = evaluate(gs, env)
    recs = []

    def rec(i, lhs, rhs, t=tol, floor=1.0):
        recs.append(record(i, name, P, seed, lhs, rhs, t, floor))

    scale = np.max(np.abs(g), axis=(0, 1))
    rec("kahler.symmetric", g, g.transpose(1, 0, 2), floor=scale)
    Jm = evaluate(_Jmatrix(2 * dom.n), env)
    gJ = np.einsum("akp,klp,blp->abp", Jm, g, Jm)
    rec("kahler.J-invariant", gJ, g, floor=scale)
    eig = np.linalg.eigvalsh(g.real.transpose(2, 0, 1))
    recs.append(scalar_record("kahler.positive", name, P, seed,
                              max(0.0, -eig.min()), max(0.0, -eig.min()), 0.0))
    rec("kahler.potential", g, evaluate(potential_metric(dom), env), floor=scale)
    # closedness of omega(X, Y) = g(X, JY)
    om = calc.dot(gs, _Jmatrix(2 * dom.n))
    N = 2 * dom.n
    dom_ = evaluate(calc.earray([[[diff(om[b, c], dom.coords[a]) for c in range(N)]
                                  for b in range(N)] for a in range(N)]), env)
    cyc = (dom_ + dom_.transpose(1, 2, 0, 3) + dom_.transpose(2, 0, 1, 3))
    rec("kahler.closed", cyc, 0 * cyc, floor=np.max(np.abs(dom_), axis=(0, 1, 2)))
    # blocks on the transverse frame
    gF = np.einsum("Akp,klp,Blp->ABp", nu.F, g, nu.F)
    H = nu.horizontal
    Nn = D - 1
    phi = nu.phi
    c = (dom.n + 1) / phi
    sc = np.abs(c) * np.max(np.abs(nu.gtheta[np.ix_(H, H)]), axis=(0, 1))
    rec("kahler.horizontal-block", gF[np.ix_(H, H)], -c * nu.gtheta[np.ix_(H, H)], floor=sc)
    rec("kahler.mixed-block", gF[np.ix_(H, [0, Nn])], 0, floor=sc)
    tt = c * (1 / phi - nu.r)
    rec("kahler.TN", gF[0, Nn], 0 * tt, floor=np.abs(tt))
    rec("kahler.TT", gF[0, 0], tt, floor=np.abs(tt))
    rec("kahler.NN", gF[Nn, Nn], tt, floor=np.abs(tt))
    return recs


# ---------------------------------------------------- Levi-Civita of g

def christoffel(dom, env, gs=None, td=None):
    """Gam[c, a, b, p] of the Kaehler metric and the symbolic dg."""
    gs = gs if gs is not None else kahler_metric(dom, td)
    N = 2 * dom.n
    g = evaluate(gs, env)
    dg = evaluate(calc.earray([[[diff(gs[a, b], c) for b in range(N)]
                                for a in range(N)] for c in dom.coords]), env)
    ginv = np.linalg.inv(g.transpose(2, 0, 1)).transpose(1, 2, 0)
    # dg[k, i, j] = d_k g_ij;  low[d, a, b] = 1/2 (d_a g_db + d_b g_da - d_d g_ab)
    low = 0.5 * (np.einsum("adbp->dabp", dg) + np.einsum("bdap->dabp", dg)
                 - np.einsum("dabp->dabp", dg))
    return np.einsum("cdp,dabp->cabp", ginv, low), g, dg


def christoffel_fd_check(dom, env, seed=0, tol=1e-6, h=1e-5, gs=None, td=None):
    """Guard on the oracle: symbolic dg against central differences."""
    gs = gs if gs is not None else kahler_metric(dom, td)
    _, g, dg = christoffel(dom, env, gs)
    fd = np.zeros_like(dg)
    for k, c in enumerate(dom.coords):
        up = dict(env)
        dn = dict(env)
        up[c] = env[c] + h
        dn[c] = env[c] - h
        fd[k] = (evaluate(gs, up) - evaluate(gs, dn)) / (2 * h)
    P = len(env[dom.coords[0]])
    return record("lc.oracle-fd", dom.name, P, seed, fd, dg, tol,
                  floor=np.max(np.abs(dg), axis=(0, 1, 2)))


def levi_civita_frame(dom, nu, gs=None):
    """LC[A, B, E, p]: frame components of nabla^g_{F_A} F_B."""
    td = nu.td
    Gam, _, _ = christoffel(dom, nu.env, gs, td)
    F = td.frame
    D = nu.D
    DF = evaluate(calc.earray([[calc.apply(F[A], F[B], dom.coords) for B in range(D)]
                               for A in range(D)]), nu.env)
    cov = DF + np.einsum("cabp,Aap,Bbp->ABcp", Gam, nu.F, nu.F)
    return nu.comps(cov)


def lc_relation_check(dom, env, seed=0, tol=1e-7, td=None, nums=None, gs=None):
    """Levi-Civita connection of the Kaehler metric against the
    Graham-Lee connection, every frame pair."""
    td = td or transverse_frame(dom)
    nu = nums or Numbers(td, env)
    LC = levi_civita_frame(dom, nu, gs)
    P, D = nu.P, nu.D
    Hs = nu.horizontal
    Nn = D - 1
    G = nu.G
    gth = nu.gtheta
    Phi = nu.Phi
    tau = nu.tau_matrix
    r = nu.r
    phi = nu.phi
    f = phi / (1 - phi * r)
    f2 = phi / (2 * (1 - r * phi))
    q = 1 / phi - r
    dr = nu.dr
    eT = _basis(D, P, 0)
    eN = _basis(D, P, Nn)
    gr = nu.grad_r
    pgr = nu.phi_apply(gr)
    name = dom.name
    recs = []

    def rec(i, lhs, rhs):
        scale = np.max(np.abs(lhs), axis=tuple(range(lhs.ndim - 1)))
        recs.append(record(i, name, P, seed, lhs, rhs, tol, floor=np.maximum(scale, 1.0)))

    def hvec(fn):
        return np.stack([fn(X) for X in Hs])

    TAN = nu.tangent

    def g_(u, v):
        return np.einsum("Ep,EFp,Fp->p", u[TAN], gth[np.ix_(TAN, TAN)], v[TAN])

    def phiX(X):
        return Phi[:, X]

    def dr_of(v):
        return np.einsum("Ep,Ep->p", v, dr)

    lhs = np.stack([np.stack([LC[X, Y] for Y in Hs]) for X in Hs])
    rhs = np.stack([np.stack([
        G[X, Y]
        + (f * g_(tau[:, X], _basis(D, P, Y)) + g_(_basis(D, P, X), phiX(Y))) * eT
        - (g_(_basis(D, P, X), _basis(D, P, Y))
           + f * g_(_basis(D, P, X), nu.phi_apply(tau[:, Y]))) * eN
        for Y in Hs]) for X in Hs])
    rec("lc.horizontal-horizontal", lhs, rhs)
    rec("lc.horizontal-T", hvec(lambda X: LC[X, 0]), hvec(lambda X:
        tau[:, X] - q * phiX(X) - f2 * (dr[X] * eT + dr_of(phiX(X)) * eN)))
    rec("lc.horizontal-N", hvec(lambda X: LC[X, Nn]), hvec(lambda X:
        -q * _basis(D, P, X) + nu.tau(phiX(X))
        + f2 * (dr_of(phiX(X)) * eT - dr[X] * eN)))
    rec("lc.T-horizontal", hvec(lambda X: LC[0, X]), hvec(lambda X:
        G[0, X] - q * phiX(X) - f2 * (dr[X] * eT + dr_of(phiX(X)) * eN)))
    rec("lc.N-horizontal", hvec(lambda X: LC[Nn, X]), hvec(lambda X:
        G[Nn, X] - _basis(D, P, X) / phi + f2 * (dr_of(phiX(X)) * eT - dr[X] * eN)))
    a = dr[Nn] + 4 / phi ** 2 - 2 * r / phi
    b = dr[Nn] + 4 / phi ** 2 - 6 * r / phi + 4 * r ** 2
    rec("lc.N-T", LC[Nn, 0], -0.5 * pgr - f2 * (a * eT + dr[0] * eN))
    rec("lc.T-N", LC[0, Nn], 0.5 * pgr - f2 * (b * eT + dr[0] * eN))
    rec("lc.T-T", LC[0, 0], -0.5 * gr - f2 * (dr[0] * eT - b * eN))
    rec("lc.N-N", LC[Nn, Nn], -0.5 * gr + f2 * (dr[0] * eT - a * eN))
    return recs, LC


# ------------------------------------------------------------- leaves

def sphere_leaf_chart(dom, radius, td=None):
    """CR chart of the leaf |z| = radius as a graph over all coordinates
    but the last, carrying the pulled-back theta and the leaf frame."""
    td = td or transverse_frame(dom)
    rest = dom.coords[:-1]
    last = dom.coords[-1]
    graph = sqrt(const(float(radius) ** 2)
                 - calc.esum(as_expr(parse(c)) ** 2 for c in rest))
    sub = {last: graph}
    theta = [substitute(td.theta[k] + td.theta[-1] * diff(graph, c), sub)
             for k, c in enumerate(rest)]
    frame = [[substitute(w[k], sub) for k in range(len(rest))] for w in td.W]
    return CRChart(dom.m, rest, calc.earray(theta), calc.earray(frame),
                   name=f"{dom.name}-leaf")


def leaf_check(dom, npts=50, seed=0, tol=1e-8, radius=None, td=None):
    """Graham-Lee coefficients on a sphere leaf against the Tanaka-Webster
    coefficients computed intrinsically on that leaf."""
    radius = radius if radius is not None else (dom.leaf_radius or 0.8)
    td = td or transverse_frame(dom)
    env = dom.sphere(npts, seed, radius)
    nu = Numbers(td, env)
    level = nu.phi
    recs = [record("gl.leaf-level-set", dom.name, npts, seed, level,
                   np.full(npts, level[0]), 1e-10)]
    data = PHData(sphere_leaf_chart(dom, radius, td))
    lenv = {c: env[c] for c in data.coords}
    tw = evaluate(data.gamma, lenv)
    Tleaf = evaluate(data.T, lenv)
    TAN = nu.tangent
    recs.append(record("gl.leaf-T", dom.name, npts, seed, Tleaf, nu.F[0][:-1], tol))
    recs.append(record("gl.leaf-tanaka-webster", dom.name, npts, seed,
                       nu.G[np.ix_(TAN, TAN, TAN)], tw, tol))
    return recs


def leaf_volume_check(dom, env, seed=0, tol=1e-8, td=None, nums=None):
    """theta ^ dtheta^m / dvol(g_theta) on the leaves, evaluated ambiently on
    the real leaf frame (T, Re W_a, Im W_a)."""
    td = td or transverse_frame(dom)
    nu = nums or Numbers(td, env)
    m, P = nu.m, nu.P
    W = list(range(1, m + 1))
    Wb = list(range(m + 1, 2 * m + 1))
    # change of basis from (T, W, Wbar) to the real frame
    B = np.zeros((2 * m + 1, nu.D), complex)
    B[0, 0] = 1
    for a in range(m):
        B[1 + a, W[a]] = B[1 + a, Wb[a]] = 1 / 2
        B[1 + m + a, W[a]] = -0.5j
        B[1 + m + a, Wb[a]] = 0.5j
    V = np.einsum("iA,Akp->ikp", B, nu.F).real
    th = np.einsum("kp,ikp->ip", nu.theta, V).real
    dth = np.einsum("ikp,klp,jlp->ijp", V, nu.dtheta, V).real
    top = top_form_density(th, 2 * dth, m)
    TAN = nu.tangent
    gram = np.einsum("iA,ABp,jB->ijp", B[:, TAN], nu.gtheta[np.ix_(TAN, TAN)], B[:, TAN]).real
    vol = np.sqrt(np.abs(np.linalg.det(gram.transpose(2, 0, 1))))
    cn = 2.0 ** m * math.factorial(m)
    return record(f"volume.ratio-n{m}", dom.name, P, seed, np.abs(top) / vol,
                  np.full(P, cn), tol, floor=cn)


# ------------------------------------------------------------ suites

def check_graham_lee(dom, npts=50, seed=0, tol=1e-8):
    """Transverse invariants, Graham-Lee axioms and identities, Kaehler
    blocks and (when the fixture names a sphere leaf) leafwise agreement."""
    td = transverse_frame(dom)
    env = dom.sample(npts, seed)
    nu = Numbers(td, env)
    recs = gl_verify(dom, env, seed, tol, td, nu)
    recs += kahler_check(dom, env, seed, 1e-9, td, nu)
    if dom.leaf_radius is not None:
        recs += leaf_check(dom, npts, seed, tol, dom.leaf_radius, td)
    return recs


def check_lc_relations(dom, npts=50, seed=0, tol=1e-7):
    td = transverse_frame(dom)
    env = dom.sample(npts, seed)
    nu = Numbers(td, env)
    gs = kahler_metric(dom, td)
    recs, _ = lc_relation_check(dom, env, seed, tol, td, nu, gs)
    recs.append(christoffel_fd_check(dom, env, seed, 1e-6, gs=gs))
    return recs
