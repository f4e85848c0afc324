"""Pseudohermitian geometry of a CR chart.

Frame indices run over ``0`` (the characteristic direction T), ``1..n``
(T_alpha) and ``n+1..2n`` (T_alpha-bar).  Connection coefficients are
stored as ``gamma[A, C, D]`` with ``nabla_{T_A} T_C = sum_D gamma[A, C, D] T_D``
and curvature as ``R(T_A, T_B) T_C = sum_D R[C, D, A, B] T_D``.
"""

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from . import calculus as calc
from .exprcore import I, ONE, ZERO, as_expr, evaluate, parse
from .fixtures import FixtureError, require

__all__ = [
    "CRChart", "PHData", "load_chart", "levi_form", "characteristic_direction",
    "tw_connection", "sublaplacian", "sublaplacian_divergence",
    "verify_symmetry", "invariant_coframe", "volume_constant_check",
    "pfaffian", "SymmetryRejected",
]


@dataclass(frozen=True)
class CRChart:
    """Coordinate chart carrying a contact form and a CR frame."""

    n: int
    coords: tuple
    theta: np.ndarray
    frame: np.ndarray
    exclude: tuple = ()
    box: dict = field(default_factory=dict)
    name: str = "chart"
    reference: dict = field(default_factory=dict)

    @property
    def dim(self):
        return 2 * self.n + 1

    def scaled(self, c):
        """Same CR structure with contact form c*theta."""
        c = as_expr(c)
        return CRChart(self.n, self.coords, calc.earray([c * t for t in self.theta]),
                       self.frame, self.exclude, dict(self.box), self.name)

    def admissible(self, env):
        ok = np.ones(len(next(iter(env.values()))), dtype=bool)
        for expr, op in self.exclude:
            v = evaluate([expr], env)[0].real
            if op == ">":
                ok &= v > 0
            elif op == "<":
                ok &= v < 0
            else:
                ok &= v != 0
        return ok

    def sample(self, npts, seed, margin=0.0):
        """Seeded points of the sampling box satisfying the exclusions."""
        rng = np.random.default_rng(seed)
        got = {c: [] for c in self.coords}
        have = 0
        while have < npts:
            batch = {}
            for c in self.coords:
                lo, hi = self.box.get(c, (-1.0, 1.0))
                w = (hi - lo) * margin
                batch[c] = rng.uniform(lo + w, hi - w, size=2 * npts)
            ok = self.admissible(batch) if self.exclude else np.ones(2 * npts, bool)
            for c in self.coords:
                got[c].extend(batch[c][ok])
            have += int(ok.sum())
        return {c: np.array(v[:npts]) for c, v in got.items()}


def _parse_exclusion(text, names, where):
    for op in ("!=", ">", "<"):
        if op in text:
            lhs, rhs = text.split(op, 1)
            e = parse(lhs, names) - parse(rhs, names)
            return (e, op if op != "!=" else "!=")
    raise FixtureError(f"exclusion {text!r} needs one of != > <", *where)


def chart_from_table(table, path="<string>"):
    def get(key):
        return require(table, key, path)

    n = int(get("n")[0])
    coords = tuple(get("coords")[0])
    if len(coords) != 2 * n + 1:
        raise FixtureError(f"need {2 * n + 1} coordinates", path, get("coords")[1])

    def exprs(key):
        vals, line, col = get(key)
        try:
            return calc.earray([parse(v, coords) for v in vals])
        except ValueError as exc:
            raise FixtureError(str(exc), path, line, col) from exc

    theta = exprs("theta")
    frame = calc.earray([exprs(f"frame.alpha{k + 1}") for k in range(n)])
    excl = ()
    if "exclude" in table:
        vals, line, col = table["exclude"]
        excl = tuple(_parse_exclusion(v, coords, (path, line, col)) for v in vals)
    box = {}
    for c in coords:
        if f"box.{c}" in table:
            vals, line, col = table[f"box.{c}"]
            box[c] = (float(vals[0]), float(vals[1]))
    reference = {}
    for key, (val, line, col) in table.items():
        if key.startswith("reference."):
            try:
                if isinstance(val, list):
                    reference[key[10:]] = calc.earray([parse(v, coords) for v in val])
                else:
                    reference[key[10:]] = parse(val, coords)
            except ValueError as exc:
                raise FixtureError(str(exc), path, line, col) from exc
    name = path.rsplit("/", 1)[-1].rsplit(".", 1)[0]
    return CRChart(n, coords, theta, frame, excl, box, name, reference)


def load_chart(path):
    """Load a ``.cr`` manifold file (or a bundled fixture name)."""
    from .fixtures import load_text, parse_text
    text, shown = load_text(path)
    return chart_from_table(parse_text(text, shown), shown)


def _bar(A, n):
    if A == 0:
        return 0
    return A + n if A <= n else A - n


class PHData:
    """Symbolic pseudohermitian data of a chart, built lazily."""

    def __init__(self, chart):
        self.chart = chart
        self.n = chart.n
        self.N = chart.dim
        self.coords = chart.coords

    # -- basic structure -------------------------------------------------
    @cached_property
    def dtheta(self):
        return calc.d_form(self.chart.theta, self.coords)

    def dth(self, X, Y):
        return calc.two_form(self.dtheta, X, Y)

    @cached_property
    def tframe(self):
        return [np.asarray(v, dtype=object) for v in self.chart.frame]

    @cached_property
    def tbar(self):
        return [calc.conj(v) for v in self.tframe]

    @cached_property
    def levi(self):
        """g[a, b] = L(T_a, conj T_b) = (i/2) theta([T_a, conj T_b])."""
        n = self.n
        g = calc.zeros((n, n))
        for a in range(n):
            for b in range(n):
                br = calc.bracket(self.tframe[a], self.tbar[b], self.coords)
                g[a, b] = I * calc.pair(self.chart.theta, br) / 2
        return g

    @cached_property
    def levi_inv(self):
        return calc.inverse(self.levi)

    @cached_property
    def T(self):
        """Characteristic direction, theta(T) = 1 and i_T dtheta = 0."""
        th = self.chart.theta
        V = th.copy()  # Euclidean dual of theta: transverse where theta != 0
        n = self.n
        H = self.levi_inv
        d = [self.dth(V, self.tbar[b]) for b in range(n)]
        c = [-I * calc.esum(d[b] * H[b, a] for b in range(n)) for a in range(n)]
        W = V.copy()
        for a in range(n):
            W = calc.earray([W[k] - c[a] * self.tframe[a][k]
                             - calc.conj(c[a]) * self.tbar[a][k]
                             for k in range(self.N)])
        tv = calc.pair(th, V)
        return calc.earray([w / tv for w in W])

    @cached_property
    def frame(self):
        return [self.T] + self.tframe + self.tbar

    def coframe_of(self, V):
        """Frame components (theta(V), theta^a(V), theta^abar(V))."""
        n = self.n
        H = self.levi_inv
        out = [calc.pair(self.chart.theta, V)]
        d1 = [self.dth(V, self.tbar[b]) for b in range(n)]
        d2 = [self.dth(V, self.tframe[b]) for b in range(n)]
        for a in range(n):
            out.append(-I * calc.esum(d1[b] * H[b, a] for b in range(n)))
        for a in range(n):
            out.append(I * calc.esum(H[a, b] * d2[b] for b in range(n)))
        return calc.earray(out)

    @cached_property
    def coframe(self):
        """Row A holds the coordinate components of theta^A."""
        N = self.N
        basis = [calc.earray([ONE if j == k else ZERO for j in range(N)])
                 for k in range(N)]
        cols = [self.coframe_of(b) for b in basis]
        return calc.earray([[cols[k][A] for k in range(N)] for A in range(N)])

    def components(self, V):
        return calc.dot(self.coframe, V)

    @cached_property
    def brackets(self):
        """c[A, B, E]: [T_A, T_B] = sum_E c[A, B, E] T_E."""
        N = self.N
        c = calc.zeros((N, N, N))
        F = self.frame
        for A in range(N):
            for B in range(A + 1, N):
                comp = self.components(calc.bracket(F[A], F[B], self.coords))
                c[A, B] = comp
                c[B, A] = calc.earray([-x for x in comp])
        return c

    @cached_property
    def metric(self):
        """Webster metric on the frame: gF[A, B] = g_theta(T_A, T_B)."""
        n, N = self.n, self.N
        gF = calc.zeros((N, N))
        gF[0, 0] = ONE
        for a in range(n):
            for b in range(n):
                gF[1 + a, 1 + n + b] = self.levi[a, b]
                gF[1 + n + b, 1 + a] = self.levi[a, b]
        return gF

    def g(self, X, Y):
        """g_theta of two vector fields given by coordinate components."""
        return calc.dot(self.components(X), calc.dot(self.metric, self.components(Y)))

    # -- Tanaka-Webster connection -----------------------------------------
    @cached_property
    def gamma(self):
        n, N = self.n, self.N
        G = self.levi
        H = self.levi_inv
        F = self.frame
        c = self.brackets
        gam = calc.zeros((N, N, N))
        for b in range(n):
            B = 1 + b
            for gi in range(n):
                # nabla_{T_a} T_b
                for a in range(n):
                    A = 1 + a
                    terms = []
                    for s in range(n):
                        S = 1 + n + s
                        # g_theta(T_b, [T_a, T_sbar]) = sum_r G[b, r] c[A, S, rbar]
                        pair_ = calc.esum(G[b, r] * c[A, S, 1 + n + r]
                                          for r in range(n))
                        x = calc.apply(F[A], G[b, s], self.coords) - pair_
                        terms.append(H[s, gi] * x)
                    gam[A, B, 1 + gi] = calc.esum(terms)
                # nabla_{T_abar} T_b and nabla_T T_b
                for A in [0] + [1 + n + a for a in range(n)]:
                    terms = []
                    for s in range(n):
                        pair_ = calc.esum(c[A, B, 1 + r] * G[r, s] for r in range(n))
                        terms.append(H[s, gi] * pair_)
                    gam[A, B, 1 + gi] = calc.esum(terms)
        for A in range(N):
            for b in range(n):
                for gi in range(n):
                    gam[_bar(A, n), 1 + n + b, 1 + n + gi] = calc.conj(
                        gam[A, 1 + b, 1 + gi])
        return gam

    def nabla(self, A, V):
        """nabla_{T_A} V for V given by frame components (expressions)."""
        N = self.N
        F = self.frame
        out = []
        for D in range(N):
            out.append(calc.apply(F[A], V[D], self.coords)
                       + calc.esum(V[C] * self.gamma[A, C, D] for C in range(N)))
        return calc.earray(out)

    @cached_property
    def torsion_matrix(self):
        """A[a, b] = A_a^{bbar}: tau T_a = sum_b A[a, b] T_bbar."""
        n = self.n
        c = self.brackets
        return calc.earray([[-c[0, 1 + a, 1 + n + b] for b in range(n)]
                            for a in range(n)])

    def torsion(self, A, B):
        """Frame components of T_nabla(T_A, T_B)."""
        N = self.N
        g, c = self.gamma, self.brackets
        return calc.earray([g[A, B, D] - g[B, A, D] - c[A, B, D] for D in range(N)])

    def curvature(self, C, D, A, B):
        """R[C, D, A, B] with R(T_A, T_B) T_C = sum_D R[C, D, A, B] T_D."""
        N = self.N
        g, c, F = self.gamma, self.brackets, self.frame
        t = (calc.apply(F[A], g[B, C, D], self.coords)
             - calc.apply(F[B], g[A, C, D], self.coords))
        t = t + calc.esum(g[B, C, E] * g[A, E, D] - g[A, C, E] * g[B, E, D]
                          for E in range(N))
        t = t - calc.esum(c[A, B, E] * g[E, C, D] for E in range(N))
        return as_expr(t)

    @cached_property
    def ricci(self):
        """R_{lambda mubar} = sum_a R_lambda^a_{a mubar}."""
        n = self.n
        return calc.earray([[calc.esum(self.curvature(1 + l, 1 + a, 1 + a, 1 + n + m)
                                       for a in range(n))
                             for m in range(n)] for l in range(n)])

    @cached_property
    def rho(self):
        n = self.n
        return calc.esum(self.levi_inv[m, l] * self.ricci[l, m]
                         for l in range(n) for m in range(n))

    # -- orthonormal frames ----------------------------------------------
    def unitary_frame(self, rotation=None):
        Z, C = calc.hermitian_orthonormalize(self.tframe, self.levi, rotation)
        return Z, C

    def horizontal_frame(self, rotation=None):
        """G_theta-orthonormal real frame (E_1..E_n, JE_1..JE_n) of H(M)."""
        Z, _ = self.unitary_frame(rotation)
        return calc.real_frame(Z)

    def nabla_field(self, X, Y):
        """nabla_X Y for coordinate vector fields X, Y."""
        N = self.N
        xc = self.components(X)
        yc = self.components(Y)
        out = calc.zeros(N)
        for A in range(N):
            if calc._zero(xc[A]):
                continue
            nb = self.nabla(A, yc)
            out = calc.earray([out[D] + xc[A] * nb[D] for D in range(N)])
        return calc.dot(out, calc.earray(np.array(self.frame, dtype=object)))


def levi_form(chart):
    """Symbolic Levi matrix g[a, b] = L(T_a, conj T_b)."""
    return PHData(chart).levi


def tw_connection(chart):
    return PHData(chart)


def characteristic_direction(chart, env, data=None):
    """Solve theta(T) = 1, i_T dtheta = 0 pointwise by dense least squares.

    Returns ``(T_numeric, info)`` where ``T_numeric`` has shape (N, npts) and
    ``info`` holds the residuals, the largest imaginary part and the
    condition numbers of the systems.
    """
    data = data or PHData(chart)
    N = chart.dim
    th = evaluate(chart.theta, env)
    dth = evaluate(data.dtheta, env)
    npts = th.shape[-1]
    T = np.empty((N, npts), dtype=complex)
    res = np.empty(npts)
    cond = np.empty(npts)
    for p in range(npts):
        M = np.vstack([th[:, p][None, :], dth[:, :, p].T])
        rhs = np.zeros(N + 1, dtype=complex)
        rhs[0] = 1.0
        sol, *_ = np.linalg.lstsq(M, rhs, rcond=None)
        T[:, p] = sol
        res[p] = np.max(np.abs(M @ sol - rhs))
        cond[p] = np.linalg.cond(M)
    if not np.all(np.isfinite(cond)) or np.max(cond) > 1e12:
        raise np.linalg.LinAlgError(
            f"characteristic system is singular (condition {np.max(cond):.3g})")
    return T, {"residual": res, "imag": np.max(np.abs(T.imag)), "cond": cond}


def sublaplacian(data, u, rotation=None):
    """Delta_b u = -sum_a (E_a E_a - nabla_{E_a} E_a) u over an orthonormal H-frame."""
    coords = data.coords
    terms = []
    for E in data.horizontal_frame(rotation):
        eeu = calc.apply(E, calc.apply(E, u, coords), coords)
        nab = data.nabla_field(E, E)
        terms.append(eeu - calc.apply(nab, u, coords))
    return -calc.esum(terms)


def pfaffian(B):
    """Pfaffian of a batch of antisymmetric matrices, shape (..., 2m, 2m)."""
    B = np.asarray(B)
    m = B.shape[-1]
    if m == 0:
        return np.ones(B.shape[:-2], dtype=B.dtype)
    if m % 2:
        return np.zeros(B.shape[:-2], dtype=B.dtype)
    total = np.zeros(B.shape[:-2], dtype=B.dtype)
    keep = list(range(1, m))
    for j in range(1, m):
        rest = [k for k in keep if k != j]
        sub = B[..., rest, :][..., :, rest]
        sign = -1.0 if (j - 1) % 2 else 1.0
        total = total + sign * B[..., 0, j] * pfaffian(sub)
    return total


def top_form_density(theta_vals, dtheta_std, n):
    """theta ^ (dtheta)^n evaluated on the coordinate basis.

    ``theta_vals`` has shape (N, npts), ``dtheta_std`` holds the values
    dtheta(d_j, d_k) in the determinant normalisation, shape (N, N, npts).
    """
    N = theta_vals.shape[0]
    B = np.moveaxis(dtheta_std, -1, 0)
    total = 0
    for k in range(N):
        rest = [j for j in range(N) if j != k]
        sub = B[:, rest, :][:, :, rest]
        total = total + (-1) ** k * theta_vals[k] * pfaffian(sub)
    return math.factorial(n) * total


def coordinate_metric(data):
    """Webster metric on the coordinate basis, g_jk = g_theta(d_j, d_k)."""
    CF = data.coframe
    return calc.dot(CF.T, calc.dot(data.metric, CF))


def webster_volume(gcoord_vals):
    """sqrt(|det g|) from values of shape (N, N, npts)."""
    g = np.moveaxis(gcoord_vals, -1, 0).real
    return np.sqrt(np.abs(np.linalg.det(g)))


def volume_densities(data, env):
    """Coordinate densities of theta ^ (dtheta)^n (signed) and dvol(g_theta)."""
    vals = evaluate([data.chart.theta, *data.dtheta], env)
    # determinant normalisation of top forms: d_std = 2 * d_half
    top = top_form_density(vals[0], 2 * vals[1:], data.n).real
    vol = webster_volume(evaluate(coordinate_metric(data), env))
    return top, vol


def volume_constant_check(chart, env, data=None):
    """Pointwise ratio theta ^ (dtheta)^n / dvol(g_theta)."""
    top, vol = volume_densities(data or PHData(chart), env)
    return top / vol


def sublaplacian_divergence(data, u, env, rotation=None):
    """Divergence-form oracle: -div(grad_H u) w.r.t. theta ^ (dtheta)^n.

    Evaluated by symbolic differentiation of rho * (grad_H u)^k where rho
    is the coordinate density of the volume form.
    """
    coords = data.coords
    N = data.N
    frame = data.horizontal_frame(rotation)
    grad = calc.zeros(N)
    for E in frame:
        eu = calc.apply(E, u, coords)
        grad = calc.earray([grad[k] + eu * E[k] for k in range(N)])
    rho = symbolic_volume_density(data)
    div = calc.esum(calc.apply(calc.earray([1 if j == k else 0 for j in range(N)]),
                               rho * grad[k], coords) for k in range(N))
    return -(div / rho)


def symbolic_volume_density(data):
    """theta ^ (dtheta)^n on the coordinate basis as an expression."""
    n, N = data.n, data.N
    th = data.chart.theta
    B = calc.earray([[2 * data.dtheta[j, k] for k in range(N)] for j in range(N)])

    def pf(idx):
        if not idx:
            return ONE
        first = idx[0]
        terms = []
        for pos, j in enumerate(idx[1:]):
            rest = [k for k in idx[1:] if k != j]
            t = B[first, j] * pf(rest)
            terms.append(t if pos % 2 == 0 else -t)
        return calc.esum(terms)

    terms = []
    for k in range(N):
        rest = [j for j in range(N) if j != k]
        t = th[k] * pf(rest)
        terms.append(t if k % 2 == 0 else -t)
    return math.factorial(n) * calc.esum(terms)


# ---------------------------------------------------------------- symmetries

class SymmetryRejected(ValueError):
    def __init__(self, residual):
        super().__init__(f"not a CR symmetry (fit residual {residual:.3e})")
        self.residual = residual


def _lie_values(data, X, env):
    """L_X theta and L_X theta^a plus the coframe, all on coordinates."""
    coords = data.coords
    n = data.n
    forms = [data.chart.theta] + [data.coframe[1 + a] for a in range(n)]
    lie = [calc.lie_derivative_form(X, f, coords) for f in forms]
    return evaluate([*lie, *data.coframe], env)


def verify_symmetry(data, X, env, tol=1e-6):
    """Fit L_X theta = t theta, L_X theta^a = w^a_b theta^b + l^a theta.

    Minimum-norm least squares per point; raises :class:`SymmetryRejected`
    when the worst fit residual exceeds ``tol``.  Returns a dict with arrays
    ``t`` (npts), ``w`` (n, n, npts), ``l`` (n, npts) and ``residual``.
    """
    n = data.n
    vals = _lie_values(data, X, env)
    lie = vals[: n + 1]
    cof = vals[n + 1:]
    lie = np.moveaxis(vals[: n + 1], -1, 0)  # (p, n+1, N)
    cof = np.moveaxis(vals[n + 1:], -1, 0)  # (p, N, N)
    th = cof[:, 0, :]
    scale = 1.0 + np.max(np.abs(lie), axis=(1, 2))
    # L_X theta = t theta
    t = np.einsum("pk,pk->p", np.conj(th), lie[:, 0]) / np.einsum(
        "pk,pk->p", np.conj(th), th)
    r0 = np.max(np.abs(t[:, None] * th - lie[:, 0]), axis=1)
    basis = np.concatenate([cof[:, 1:1 + n, :], th[:, None, :]], axis=1)
    basis = np.swapaxes(basis, 1, 2)  # (p, N, n+1)
    pinv = np.linalg.pinv(basis)
    sol = np.einsum("pjk,pak->paj", pinv, lie[:, 1:])  # (p, a, n+1)
    fit = np.einsum("pkj,paj->pak", basis, sol)
    r1 = np.max(np.abs(fit - lie[:, 1:]), axis=(1, 2))
    worst = float(np.max(np.maximum(r0, r1) / scale))
    w = np.moveaxis(sol[:, :, :n], 0, -1)
    l = np.moveaxis(sol[:, :, n], 0, -1)
    if worst > tol:
        raise SymmetryRejected(worst)
    return {"t": t, "w": w, "l": l, "residual": worst}


def _solve_eta(data, fields, env):
    """Pointwise 1-forms eta, eta^a_b, eta^a dual to the symmetry fields."""
    n, N = data.n, data.N
    npts = len(next(iter(env.values())))
    Xv = evaluate(calc.earray(fields), env)  # (N fields, N comps, npts)
    t = np.empty((N, npts), dtype=complex)
    w = np.empty((N, n, n, npts), dtype=complex)
    l = np.empty((N, n, npts), dtype=complex)
    for i, X in enumerate(fields):
        fit = verify_symmetry(data, X, env, tol=np.inf)
        t[i], w[i], l[i] = fit["t"], fit["w"], fit["l"]
    Xm = np.moveaxis(Xv, -1, 0).real  # (npts, i, k)
    inv = np.linalg.inv(Xm)  # eta_k = sum_i inv[k, i] t_i
    eta = np.einsum("pki,ip->kp", inv, t)
    eta_ab = np.einsum("pki,iabp->kabp", inv, w)
    eta_a = np.einsum("pki,iap->kap", inv, l)
    return eta, eta_ab, eta_a


class InvariantCoframe:
    """Numerically integrated coframe Omega = e^u theta,
    Omega^a = U^a_b theta^b + v^a theta (optionally normalised)."""

    def __init__(self, data, fields, base, steps=24, b=None, s=None):
        self.data = data
        self.fields = list(fields)
        self.base = {k: float(v) for k, v in base.items()}
        self.steps = steps
        self.b = b
        self.s = s

    def _state(self, env):
        """Integrate (u, U, e^{-u} v) along straight paths from the base."""
        data = self.data
        n = data.n
        coords = data.coords
        npts = len(next(iter(env.values())))
        x0 = np.array([self.base[c] for c in coords])
        a = np.array([np.asarray(env[c], dtype=float) for c in coords])
        delta = a - x0[:, None]

        def rhs(s, y):
            pts = x0[:, None] + s * delta
            penv = {c: pts[k] for k, c in enumerate(coords)}
            eta, eta_ab, eta_a = _solve_eta(data, self.fields, penv)
            e = np.einsum("kp,kp->p", eta, delta)
            H = np.einsum("kabp,kp->pab", eta_ab, delta)
            h = np.einsum("kap,kp->pa", eta_a, delta)
            u, U, f = y
            du = -e
            dU = -U @ H
            # d/ds (e^{-u} v) = -e^{-u} U eta^b(adot)
            df = -np.exp(-u)[:, None] * np.einsum("pab,pb->pa", U, h)
            return du, dU, df

        u = np.zeros(npts, dtype=complex)
        U = np.broadcast_to(np.eye(n, dtype=complex), (npts, n, n)).copy()
        f = np.zeros((npts, n), dtype=complex)
        y = (u, U, f)
        hstep = 1.0 / self.steps
        for k in range(self.steps):
            s = k * hstep
            k1 = rhs(s, y)
            k2 = rhs(s + hstep / 2, tuple(yi + hstep / 2 * ki for yi, ki in zip(y, k1)))
            k3 = rhs(s + hstep / 2, tuple(yi + hstep / 2 * ki for yi, ki in zip(y, k2)))
            k4 = rhs(s + hstep, tuple(yi + hstep * ki for yi, ki in zip(y, k3)))
            y = tuple(yi + hstep / 6 * (a1 + 2 * a2 + 2 * a3 + a4)
                      for yi, a1, a2, a3, a4 in zip(y, k1, k2, k3, k4))
        u, U, f = y
        v = np.exp(u)[:, None] * f
        return u, U, v

    def forms(self, env):
        """Coordinate components of (Omega, Omega^1..Omega^n), shape (n+1, N, npts)."""
        data = self.data
        n = data.n
        u, U, v = self._state(env)
        cof = evaluate(data.coframe, env)  # (N, N, npts)
        th = cof[0]
        thb = cof[1:1 + n]
        Om = np.exp(u)[None, :] * th
        Oa = np.einsum("pab,bkp->akp", U, thb) + v.T[:, None, :] * th[None]
        if self.b is not None:
            Oa = np.einsum("ab,bkp->akp", self.b, Oa) + self.s[:, None, None] * Om[None]
        return np.concatenate([Om[None], Oa], axis=0)

    def lie_residual(self, env, h=1e-4):
        """max |L_{X_i} Omega^A| over sample points (central differences)."""
        data = self.data
        coords = data.coords
        N = data.N
        worst = 0.0
        base = self.forms(env)
        for X in self.fields:
            Xv = evaluate(X, env).real
            dX = evaluate(calc.earray([[calc.apply(calc.earray(
                [1 if j == k else 0 for j in range(N)]), X[m], coords)
                for m in range(N)] for k in range(N)]), env).real  # [k, m] = d_k X^m
            plus = {c: env[c] + h * Xv[k] for k, c in enumerate(coords)}
            minus = {c: env[c] - h * Xv[k] for k, c in enumerate(coords)}
            deriv = (self.forms(plus) - self.forms(minus)) / (2 * h)
            lie = deriv + np.einsum("kmp,amp->akp", dX, base)
            worst = max(worst, float(np.max(np.abs(lie))))
        return worst

    def structure_residual(self, env, h=1e-4):
        """max |dOmega - 2i sum Omega^a ^ Omega^abar| on coordinate pairs."""
        coords = self.data.coords
        n = self.data.n
        base = self.forms(env)
        grads = []
        for k, c in enumerate(coords):
            plus = dict(env)
            minus = dict(env)
            plus[c] = env[c] + h
            minus[c] = env[c] - h
            grads.append((self.forms(plus)[0] - self.forms(minus)[0]) / (2 * h))
        grads = np.array(grads)  # [j, k, p] = d_j Omega_k
        dO = 0.5 * (grads - np.swapaxes(grads, 0, 1))
        Oa = base[1:]
        wedge = np.zeros_like(dO)
        for a in range(n):
            A, Ab = Oa[a], np.conj(Oa[a])
            wedge += 0.5 * (A[:, None, :] * Ab[None, :, :] - A[None, :, :] * Ab[:, None, :])
        return float(np.max(np.abs(dO - 2j * wedge)))


def invariant_coframe(data, fields, base=None, steps=24, normalize=True):
    """Coframe annihilated by the Lie derivatives of the symmetry fields.

    ``fields`` are 2n+1 pointwise independent symmetries.  The ODE step
    integrates du + eta = 0, dU + U eta_b = 0 and d(e^{-u} v) +
    e^{-u} U eta^b = 0 along straight paths from ``base``.  With
    ``normalize`` the result is refined so that dOmega = 2i sum Omega^a ^
    Omega^abar.
    """
    chart = data.chart
    if base is None:
        base = {c: 0.5 * (lo + hi) for c, (lo, hi) in
                ((c, chart.box.get(c, (-1.0, 1.0))) for c in chart.coords)}
    cf = InvariantCoframe(data, fields, base, steps)
    if not normalize:
        return cf
    n = data.n
    env0 = {c: np.array([v]) for c, v in base.items()}
    u, U, v = cf._state(env0)
    Uinv = np.linalg.inv(U[0])
    g = evaluate(data.levi, env0)[:, :, 0]
    # G_{a bbar} = e^u g(W_a, conj W_b) with W_a = (U^{-1})^c_a T_c
    G = np.exp(u[0]) * Uinv.T @ g @ np.conj(Uinv)
    G = 0.5 * (G + G.conj().T)
    lam, V = np.linalg.eigh(G)
    C = V @ np.diag(np.sqrt(lam)) @ V.conj().T  # C C^* = G
    b = C.T
    # Phi_a = 2 dOmega(W_a, T_Omega) at the base point
    dtheta = evaluate(data.dtheta, env0)[:, :, 0]
    eta, _, _ = _solve_eta(data, cf.fields, env0)
    du = -eta[:, 0]
    th = evaluate(chart.theta, env0)[:, 0]
    Tv = evaluate(data.T, env0)[:, 0]
    tf = evaluate(calc.earray(data.tframe), env0)[:, :, 0]
    W = Uinv.T @ tf  # rows W_a
    # vector dual to Omega in the Omega-coframe: e^{-u} (T - v^a W_a - conj)
    vv = v[0]
    TO = np.exp(-u[0]) * (Tv - vv @ W - np.conj(vv) @ np.conj(W))
    Om = np.exp(u[0]) * th

    def dOmega(X, Y):
        return (0.5 * ((du @ X) * (Om @ Y) - (du @ Y) * (Om @ X))
                + np.exp(u[0]) * (X @ dtheta @ Y))

    c = np.array([2 * dOmega(W[a], TO) for a in range(n)])
    s = np.conj((c / 2j) @ np.linalg.inv(b))
    return InvariantCoframe(data, fields, base, steps, b=b, s=s)


# ------------------------------------------------------------------ checks

def _flat(x):
    return np.asarray(x).reshape(-1, np.asarray(x).shape[-1])


def check_levi(chart, env, seed, data=None, tol=1e-10):
    """Levi-form records: Hermitian, positive, convention self-test, reference."""
    from .report import record, scalar_record
    data = data or PHData(chart)
    n = chart.n
    npts = len(next(iter(env.values())))
    out, notes = [], []
    G = evaluate(data.levi, env)
    out.append(record("levi.hermitian", chart.name, npts, seed,
                      G, np.conj(np.swapaxes(G, 0, 1)), tol))
    lam = np.linalg.eigvalsh(np.moveaxis(0.5 * (G + np.conj(np.swapaxes(G, 0, 1))), -1, 0))
    neg = max(0.0, -float(np.min(lam)))
    out.append(scalar_record("levi.positive", chart.name, npts, seed, neg, neg, tol))
    # convention self-test: -i dtheta(T_a, conj T_b) from the coordinate
    # exterior derivative versus (i/2) theta([T_a, conj T_b])
    alt = calc.earray([[-I * data.dth(data.tframe[a], data.tbar[b]) for b in range(n)]
                       for a in range(n)])
    out.append(record("levi.convention", chart.name, npts, seed,
                      evaluate(alt, env), G, tol))
    if "levi" in chart.reference and n == 1:
        ref = evaluate([chart.reference["levi"]], env)[0]
        out.append(record("levi.reference", chart.name, npts, seed, G[0, 0], ref, tol))
    return out, notes


def check_characteristic(chart, env, seed, data=None, tol=1e-10):
    from .report import Note, record, scalar_record
    data = data or PHData(chart)
    npts = len(next(iter(env.values())))
    out, notes = [], []
    T = evaluate(data.T, env)
    th = evaluate(chart.theta, env)
    dth = evaluate(data.dtheta, env)
    out.append(record("T.theta", chart.name, npts, seed,
                      np.einsum("kp,kp->p", th, T), np.ones(npts), tol))
    iT = np.einsum("jp,jkp->kp", T, dth)
    out.append(record("T.interior-dtheta", chart.name, npts, seed, iT, 0 * iT, tol))
    imag = float(np.max(np.abs(T.imag)))
    out.append(scalar_record("T.real", chart.name, npts, seed, imag, imag, 1e-12))
    Tn, info = characteristic_direction(chart, env, data)
    out.append(record("T.dense-solve", chart.name, npts, seed, T, Tn, tol))
    if "T" in chart.reference:
        ref = evaluate(chart.reference["T"], env)
        diff = float(np.max(np.abs(ref - T)))
        if diff > tol:
            notes.append(Note(
                "reference.T", chart.name,
                "reference characteristic direction does not solve "
                "theta(T)=1, i_T dtheta=0 (it is not real); solver value kept",
                diff))
    return out, notes


def check_tw_axioms(chart, env, seed, data=None, tol=1e-8):
    """Axioms of the Tanaka-Webster connection plus n = 1 closed formulas."""
    from .report import record, scalar_record
    data = data or PHData(chart)
    n, N = chart.n, chart.dim
    npts = len(next(iter(env.values())))
    name = chart.name
    out, notes = [], []
    gam = data.gamma
    gF = data.metric
    F = data.frame
    # nabla g = 0
    metric_terms = []
    for A in range(N):
        for B in range(N):
            for C in range(B, N):
                metric_terms.append(
                    calc.apply(F[A], gF[B, C], data.coords)
                    - calc.esum(gam[A, B, D] * gF[D, C] for D in range(N))
                    - calc.esum(gam[A, C, D] * gF[B, D] for D in range(N)))
    Jd = [0] + [1j] * n + [-1j] * n
    jterms = [gam[A, C, D] * (Jd[C] - Jd[D]) for A in range(N) for C in range(N)
              for D in range(N) if Jd[C] != Jd[D]]
    holo, mixed, ttype, tauj = [], [], [], []
    for a in range(n):
        for b in range(n):
            holo.extend(data.torsion(1 + a, 1 + b))
            tor = data.torsion(1 + a, 1 + n + b)
            mixed.append(tor[0] - 2 * I * data.levi[a, b])
            mixed.extend(tor[1:])
        tor = data.torsion(0, 1 + a)
        ttype.extend(tor[: 1 + n])
        tauj.extend(tor[D] * (1j + Jd[D]) for D in range(N))
    At = data.torsion_matrix
    Alow = calc.dot(At, data.levi.T)  # A_{ab} = A_a^cbar g_{b cbar}
    sym = [Alow[a, b] - Alow[b, a] for a in range(n) for b in range(a + 1, n)]
    groups = {"tw.metric": metric_terms, "tw.J": jterms, "tw.purity-holomorphic": holo,
              "tw.purity-mixed": mixed, "tw.torsion-type": ttype,
              "tw.tauJ": tauj, "tw.A-symmetric": sym}
    for key, terms in groups.items():
        if not terms:
            out.append(scalar_record(key, name, npts, seed, 0.0, 0.0, tol))
            continue
        vals = evaluate(calc.earray(terms), env)
        out.append(record(key, name, npts, seed, vals, 0 * vals, tol))
    # Ricci trace: rho also equals the trace of the Ricci form over a
    # unitary frame
    Z, Cm = data.unitary_frame()
    ric = data.ricci
    tr = calc.esum(Cm[a, l] * calc.conj(Cm[a, m]) * ric[l, m]
                   for a in range(n) for l in range(n) for m in range(n))
    v = evaluate([tr, data.rho], env)
    out.append(record("tw.scalar-trace", name, npts, seed, v[0], v[1], tol))
    if n == 1:
        out.extend(_n1_formulas(data, env, seed, tol))
    # sublaplacian: connection form versus divergence form
    u = _test_function(chart)
    lap = evaluate([sublaplacian(data, u)], env)[0]
    ref = evaluate([sublaplacian_divergence(data, u, env)], env)[0]
    out.append(record("sublaplacian.divergence-form", name, npts, seed, lap, ref, tol))
    notes.extend(_reference_notes(chart, data, env, tol))
    return out, notes


def _test_function(chart):
    c = [parse(x, chart.coords) for x in chart.coords]
    return c[0] * c[0] + calc.esum(ci * cj for ci, cj in zip(c[1:], c[2:])) + (
        parse(f"sin({chart.coords[-1]})", chart.coords))


def _n1_formulas(data, env, seed, tol):
    """n = 1 coefficients from the coordinate Webster metric (independent path)."""
    from .report import record
    coords = data.coords
    gc = coordinate_metric(data)

    def gth(X, Y):
        return calc.dot(X, calc.dot(gc, Y))

    T1, T1b, T = data.tframe[0], data.tbar[0], data.T
    g = data.levi[0, 0]
    b11 = calc.bracket(T1, T1b, coords)
    g11 = (calc.apply(T1, g, coords) - gth(T1, b11)) / g
    g1b1 = gth(calc.bracket(T1b, T1, coords), T1b) / g
    g01 = gth(calc.bracket(T, T1, coords), T1b) / g
    v = evaluate([g11, g1b1, g01, data.gamma[1, 1, 1], data.gamma[2, 1, 1],
                  data.gamma[0, 1, 1]], env)
    npts = v.shape[-1]
    return [record("tw.closed-form-n1", data.chart.name, npts, seed, v[3:], v[:3], tol)]


def _reference_notes(chart, data, env, tol):
    from .report import Note
    notes = []
    ref = chart.reference
    checks = [("gamma_1_11", data.gamma[1, 1, 1] if chart.n == 1 else None),
              ("gamma_1_1bar1", data.gamma[2, 1, 1] if chart.n == 1 else None),
              ("gamma_1_01", data.gamma[0, 1, 1] if chart.n == 1 else None)]
    if chart.n == 1:
        br = data.brackets[1, 2]
        checks += [("bracket_T", br[0]), ("bracket_alpha1", br[1]),
                   ("bracket_alpha1bar", br[2])]
    for key, expr in checks:
        if expr is None or key not in ref:
            continue
        v = evaluate([expr, ref[key]], env)
        diff = float(np.max(np.abs(v[0] - v[1])))
        status = "agrees" if diff <= tol else "disagrees"
        notes.append(Note(f"reference.{key}", chart.name,
                          f"reference value {status} with the recomputed one", diff))
    return notes


def check_volume(chart, env, seed, data=None, tol=1e-8):
    from .report import record
    data = data or PHData(chart)
    ratio = volume_constant_check(chart, env, data)
    npts = len(ratio)
    cn = 2 ** chart.n * math.factorial(chart.n)
    return [record(f"volume.ratio-n{chart.n}", chart.name, npts, seed,
                   np.abs(ratio), np.full(npts, float(cn)), tol, floor=cn)], []
