"""Quadrature on chart boxes, variation checks and a U(1) gradient flow."""

import math
from dataclasses import dataclass

import numpy as np

from .exprcore import evaluate


@dataclass(frozen=True)
class GridBox:
    """Tensor-product grid on a coordinate box.

    ``rule`` is ``"gauss"`` (Gauss-Legendre nodes) or ``"trapezoid"``
    (uniform nodes including the endpoints).
    """

    coords: tuple
    bounds: tuple
    resolution: int = 16
    rule: str = "gauss"

    def __post_init__(self):
        if self.resolution < 8:
            raise ValueError("resolution must be at least 8 per axis")
        if self.rule not in ("gauss", "trapezoid"):
            raise ValueError(f"unknown quadrature rule {self.rule!r}")

    @classmethod
    def from_chart(cls, chart, resolution=16, rule="gauss"):
        return cls(tuple(chart.coords),
                   tuple(tuple(chart.box[c]) for c in chart.coords),
                   resolution, rule)

    def refined(self):
        return GridBox(self.coords, self.bounds, 2 * self.resolution, self.rule)

    def axis(self, k):
        lo, hi = self.bounds[k]
        r = self.resolution
        if self.rule == "gauss":
            x, w = np.polynomial.legendre.leggauss(r)
        else:
            x = np.linspace(-1.0, 1.0, r)
            w = np.full(r, 2.0 / (r - 1))
            w[0] = w[-1] = 1.0 / (r - 1)
        half = (hi - lo) / 2
        return lo + half * (x + 1), half * w

    @property
    def points(self):
        return self.resolution ** len(self.coords)

    @property
    def shape(self):
        return (self.resolution,) * len(self.coords)

    def mesh(self):
        axes = [self.axis(k)[0] for k in range(len(self.coords))]
        return np.meshgrid(*axes, indexing="ij")

    def env(self):
        return {c: g.ravel() for c, g in zip(self.coords, self.mesh())}

    @property
    def weights(self):
        ws = [self.axis(k)[1] for k in range(len(self.coords))]
        out = ws[0]
        for w in ws[1:]:
            out = np.multiply.outer(out, w)
        return out.ravel()


def quadrature(density, box):
    """Integral of an expression (or an array of point values) over the box."""
    if isinstance(density, np.ndarray) and density.dtype != object:
        vals = density
    else:
        vals = evaluate([density], box.env())[0]
    total = np.sum(box.weights * vals)
    return float(total.real) if abs(total.imag) <= 1e-14 * (1 + abs(total)) else total


def converged(density, box, tol=1e-6):
    """Refinement check |I(h) - I(h/2)| <= tol (1 + |I|); returns (I, gap, ok)."""
    a = quadrature(density, box)
    b = quadrature(density, box.refined())
    gap = abs(a - b)
    return b, gap, gap <= tol * (1 + abs(b))


# ------------------------------------------------------------ variations

def _grid_data(data, box):
    from .pseudoherm import volume_densities
    env = box.env()
    top, _ = volume_densities(data, env)
    return env, box.weights, np.abs(top)


def pym_value(field, box, grid=None):
    """PYM(D) = 1/2 int |pi_H R^D|^2 theta ^ (dtheta)^n by quadrature."""
    from .gauge import densities
    env, w, top = grid or _grid_data(field.data, box)
    return 0.5 * float(np.sum(w * top * densities(field, env)["horizontal"]))


def _richardson(f, t1, t2):
    """Second-order stencil f(t) extrapolated from t1 and t2 = t1/2."""
    a, b = f(t1), f(t2)
    r = (t1 / t2) ** 2
    return (r * b - a) / (r - 1)


def variation_check(field, phi, box, seed=0, ts=(1e-2, 5e-3), tol1=1e-6, tol2=1e-5,
                    label=None):
    """Finite differences of t -> PYM(D + t phi) against the first and
    second variation formulas.  Returns (records, values)."""
    from . import gauge
    from .report import record
    data = field.data
    grid = _grid_data(data, box)
    env, w, top = grid
    cache = {}

    def P(t):
        if t not in cache:
            f = field if t == 0 else field.shifted(phi, t)
            cache[t] = pym_value(f, box, grid)
        return cache[t]

    d1 = _richardson(lambda t: (P(t) - P(-t)) / (2 * t), *ts)
    d2 = _richardson(lambda t: (P(t) - 2 * P(0) + P(-t)) / t ** 2, *ts)
    R = gauge.curvature(field)
    piH, _ = gauge.decompose(R)
    ginv = evaluate(gauge.inverse_metric(data), env)
    ginvH = evaluate(gauge.inverse_metric(data, horizontal=True), env)
    phi_v = evaluate(phi, env)
    first = float(np.sum(w * top * gauge._pair1_frame(
        phi_v, evaluate(gauge.delta(field, piH), env), ginv)))
    dphi = evaluate(gauge.d_D(field, phi), env)
    ww = evaluate(gauge.bracket_wedge(phi, phi), env)
    second = float(np.sum(w * top * (gauge._pair2_frame(dphi, dphi, ginvH)
                                      + gauge._pair2_frame(evaluate(piH, env), ww, ginvH))))
    name = label or f"{data.chart.name}:{field.name}"
    scale = max(abs(second), 1e-300)
    recs = [
        # the first variation may vanish (flat D): judge it against the
        # size of the quadratic term
        record("variation.first", name, box.points, seed, d1, first, tol1,
               floor=max(abs(first), 1e-3 * scale)),
        record("variation.second", name, box.points, seed, d2, second, tol2,
               floor=1e-300),
    ]
    return recs, {"fd_first": d1, "first": first, "fd_second": d2, "second": second}


def check_variation(chart_name="heisenberg", seed=0, resolution=16):
    """Flat, U(1) and random U(2) fields on the Heisenberg box, each with a
    general and a horizontal (i_T phi = 0) bump variation."""
    from . import gauge
    from .pseudoherm import PHData, load_chart
    from .report import scalar_record
    chart = load_chart(chart_name)
    data = PHData(chart)
    box = GridBox.from_chart(chart, resolution)
    flat = gauge.GaugeField(data, gauge.calc.zeros((1, 1, data.N)), "flat")
    u1 = gauge.load_gauge("heisenberg_u1", chart)
    u1.name = "u1-x-theta"
    u2 = gauge.random_field(data, 2, seed + 7)
    recs = []
    for field in (flat, u1, u2):
        for horiz in (False, True):
            phi = gauge.random_form1(data, field.m, seed + 31, horizontal=horiz)
            tag = f"{chart.name}:{field.name}" + (":horizontal" if horiz else "")
            r, vals = variation_check(field, phi, box, seed, label=tag)
            recs += r
            if field is flat:
                recs.append(scalar_record("variation.flat-nonnegative", tag, box.points,
                                          seed, max(0.0, -vals["fd_second"]),
                                          max(0.0, -vals["fd_second"]), 0.0))
    return recs


# -------------------------------------------------------- abelian flow

@dataclass
class FlowResult:
    pym: list
    residual: list
    rates: list
    halvings: int
    a: np.ndarray

    @property
    def monotone(self):
        return all(b <= a for a, b in zip(self.pym, self.pym[1:]))

    @property
    def reduction(self):
        return self.residual[0] / max(self.residual[-1], 1e-300)


class U1Flow:
    """Steepest descent of PYM for a U(1) connection D = d + i a on a
    uniform grid over a 3-dimensional chart box.

    ``a`` holds the coordinate components a[l, i, j, k].  The gradient is
    the divergence of the horizontal part of da evaluated on the grid and
    raised with the coordinate Webster metric; the boundary values stay 0.
    """

    def __init__(self, chart, resolution=16, box=None):
        from .gauge import real_frame_matrix
        from .pseudoherm import PHData, coordinate_metric, volume_densities
        if chart.dim != 3:
            raise ValueError("the grid flow needs a 3-dimensional chart")
        self.chart = chart
        self.data = data = PHData(chart)
        self.box = box or GridBox.from_chart(chart, resolution, rule="trapezoid")
        env = self.box.env()
        shape = self.box.shape
        self.h = np.array([(hi - lo) / (self.box.resolution - 1)
                           for lo, hi in self.box.bounds])
        Rm = real_frame_matrix(data, env)
        Fv = evaluate(calc_frame(data), env)
        E = np.einsum("ABp,Bkp->Akp", Rm, Fv).real
        n = data.n
        self.E = np.ascontiguousarray(E[1:2 * n + 1].reshape((2 * n, 3) + shape))
        top, _ = volume_densities(data, env)
        self.top = np.abs(top).reshape(shape)
        self.g = evaluate(coordinate_metric(data), env).real.reshape((3, 3) + shape)
        self.w = self.box.weights.reshape(shape)
        self.interior = np.zeros(shape, bool)
        self.interior[1:-1, 1:-1, 1:-1] = True

    def functional(self, a):
        from .kernels import field_strength, horizontal_bivector
        f, B = horizontal_bivector(field_strength(a, self.h), self.E)
        dens = 0.5 * np.sum(f * f, axis=(0, 1))
        return 0.5 * float(np.sum(self.w * self.top * dens)), B

    def gradient(self, a, B=None):
        """(functional, v) with v the metric gradient vector per point."""
        from .kernels import divergence
        P, B = self.functional(a) if B is None else (None, B)
        v = -divergence(self.top * B, self.h) / self.top
        v[:, ~self.interior] = 0
        return P, v

    def norm(self, v):
        return math.sqrt(max(float(np.sum(self.w * self.top * np.einsum(
            "lm...,l...,m...->...", self.g, v, v))), 0.0))

    def step_direction(self, v):
        return np.einsum("lm...,m...->l...", self.g, v)

    def run(self, a0, steps=200, rate=1e-3, min_rate=1e-12):
        a = np.array(a0, dtype=float)
        a[:, ~self.interior] = 0
        P, B = self.functional(a)
        _, v = self.gradient(a, B)
        pym, res, rates = [P], [self.norm(v)], []
        halvings = 0
        for _ in range(steps):
            d = self.step_direction(v)
            while True:
                trial = a - rate * d
                Pt, Bt = self.functional(trial)
                if Pt <= P or rate < min_rate:
                    break
                rate /= 2
                halvings += 1
            a, P = trial, Pt
            _, v = self.gradient(a, Bt)
            pym.append(P)
            res.append(self.norm(v))
            rates.append(rate)
        return FlowResult(pym, res, rates, halvings, a)

    def random_initial(self, seed, scale=0.5, degree=2):
        """Seeded polynomial 1-form times a bump vanishing on the boundary."""
        rng = np.random.default_rng(seed)
        X = self.box.mesh()
        s = [(2 * x - (lo + hi)) / (hi - lo) for x, (lo, hi) in zip(X, self.box.bounds)]
        bump = np.prod([(1 - t * t) ** 3 for t in s], axis=0)
        out = []
        for _ in range(3):
            c = scale * rng.standard_normal((degree + 1,) * 3)
            poly = np.polynomial.polynomial.polyval3d(s[0], s[1], s[2], c)
            out.append(poly * bump)
        return np.array(out)


def calc_frame(data):
    from .calculus import earray
    return earray(data.frame)


@dataclass
class FlowConfig:
    chart: str = "heisenberg"
    initial: object = "random"     # "random" or three expressions
    scale: float = 0.5
    steps: int = 200
    rate: float = 1e-2
    seed: int = 42
    resolution: int = 16
    name: str = "flow"


def load_flow(path):
    """Read a ``.flow`` config (or a bundled fixture name)."""
    from .fixtures import FixtureError, load_text, parse_text
    import os
    if not os.path.exists(path) and "." not in os.path.basename(path):
        path = path + ".flow"
    text, shown = load_text(path)
    table = parse_text(text, shown)
    cfg = FlowConfig(name=shown.rsplit("/", 1)[-1].rsplit(".", 1)[0])
    casts = {"chart": str, "scale": float, "steps": int, "rate": float,
             "seed": int, "resolution": int}
    for key, (val, line, col) in table.items():
        if key == "initial":
            if isinstance(val, list) and len(val) != 3:
                raise FixtureError("initial needs 3 components", shown, line, col)
            cfg.initial = val
        elif key in casts:
            try:
                setattr(cfg, key, casts[key](val))
            except (TypeError, ValueError):
                raise FixtureError(f"bad value for {key!r}", shown, line, col) from None
        else:
            raise FixtureError(f"unknown key {key!r}", shown, line, col)
    return cfg


def initial_field(flow, cfg):
    if isinstance(cfg.initial, str):
        if cfg.initial != "random":
            raise ValueError(f"unknown initial field {cfg.initial!r}")
        return flow.random_initial(cfg.seed, cfg.scale)
    from .exprcore import parse
    env = flow.box.env()
    vals = evaluate([parse(e, flow.chart.coords) for e in cfg.initial], env).real
    return vals.reshape((3,) + flow.box.shape)


def gradient_flow_u1(cfg):
    """Run the flow described by ``cfg``; returns (flow, result)."""
    from .pseudoherm import load_chart
    flow = U1Flow(load_chart(cfg.chart), cfg.resolution)
    a0 = initial_field(flow, cfg)
    return flow, flow.run(a0, cfg.steps, cfg.rate)


def energy_slope(flow, a, eps=1e-4):
    """(d/ds PYM(a - s g v) at s = 0 by central differences, -|v|^2)."""
    _, v = flow.gradient(a)
    d = flow.step_direction(v)
    fd = (flow.functional(a - eps * d)[0] - flow.functional(a + eps * d)[0]) / (2 * eps)
    return fd, -flow.norm(v) ** 2


def check_flow(cfg, seed=None):
    from .report import record, scalar_record
    seed = cfg.seed if seed is None else seed
    flow, res = gradient_flow_u1(cfg)
    pts = flow.box.points
    name = f"{cfg.name}:{cfg.chart}"
    rise = max([b - a for a, b in zip(res.pym, res.pym[1:])] + [0.0])
    recs = [scalar_record("flow.monotone", name, pts, seed, max(rise, 0.0),
                          max(rise, 0.0), 0.0)]
    ratio = res.residual[-1] / res.residual[0]
    recs.append(scalar_record("flow.residual-reduction", name, pts, seed, ratio, ratio, 0.1))
    fd, exact = energy_slope(flow, initial_field(flow, cfg))
    recs.append(record("flow.energy-identity", name, pts, seed, fd, exact, 5e-2, floor=1e-300))
    # a discrete gradient field is flat and must stay put
    from .kernels import gradient_np
    f = np.zeros(flow.box.shape)
    core = (slice(3, -3),) * 3
    f[core] = flow.random_initial(seed + 1)[0][core]
    a0 = gradient_np(f, flow.h)
    still = flow.run(a0, 5, cfg.rate)
    recs.append(record("flow.flat-fixed-point", name, pts, seed, still.a, a0, 1e-10))
    return recs, res
