import math

import numpy as np
import pytest

from pseudoym import gauge, varsolver as vs
from pseudoym.exprcore import parse
from pseudoym.fixtures import FixtureError
from pseudoym.pseudoherm import PHData, load_chart

CUBE = (("x", "y", "t"), ((-1.0, 1.0),) * 3)


def test_quadrature_examples():
    box = vs.GridBox(*CUBE, 16)
    assert vs.quadrature(parse("0"), box) == 0
    # int_{-1}^{1} (1 - s^2)^3 ds = 32/35 on each axis
    bump = parse("(1 - x^2)^3*(1 - y^2)^3*(1 - t^2)^3")
    assert vs.quadrature(bump, box) == pytest.approx((32 / 35) ** 3, rel=1e-12)
    sep = parse("exp(x)*cos(y)*(1 + t^2)")
    exact = (math.e - 1 / math.e) * 2 * math.sin(1) * (8 / 3)
    assert vs.quadrature(sep, box) == pytest.approx(exact, rel=1e-8)
    assert vs.quadrature(2 * sep, box) == pytest.approx(2 * vs.quadrature(sep, box), rel=1e-14)
    _, gap, ok = vs.converged(sep, box)
    assert ok and gap < 1e-10


def test_trapezoid_refinement_is_second_order():
    sep = parse("exp(x)*cos(y)*(1 + t^2)")
    exact = (math.e - 1 / math.e) * 2 * math.sin(1) * (8 / 3)
    box = vs.GridBox(*CUBE, 16, "trapezoid")
    e1 = abs(vs.quadrature(sep, box) - exact)
    e2 = abs(vs.quadrature(sep, box.refined()) - exact)
    assert e1 / e2 >= 4


def test_grid_validation():
    with pytest.raises(ValueError):
        vs.GridBox(*CUBE, 4)
    with pytest.raises(ValueError):
        vs.GridBox(*CUBE, 16, "simpson")


@pytest.fixture(scope="module")
def heis():
    chart = load_chart("heisenberg")
    return PHData(chart), vs.GridBox.from_chart(chart, 16)


def test_flat_second_variation_is_nonnegative(heis):
    data, box = heis
    flat = gauge.GaugeField(data, np.full((1, 1, 3), parse("0"), dtype=object), "flat")
    phi = gauge.random_form1(data, 1, 5)
    recs, vals = vs.variation_check(flat, phi, box, 5)
    assert all(r.passed for r in recs)
    assert vals["first"] == 0 and vals["second"] > 0


def test_u2_variations(heis):
    data, box = heis
    field = gauge.random_field(data, 2, 8)
    phi = gauge.random_form1(data, 2, 9)
    recs, vals = vs.variation_check(field, phi, box, 8)
    assert all(r.passed for r in recs), [r.as_dict() for r in recs]


@pytest.fixture(scope="module")
def flow():
    return vs.U1Flow(load_chart("heisenberg"), 16)


def test_flow_monotone_and_reduces_residual(flow):
    res = flow.run(flow.random_initial(42), 200, 1e-2)
    assert res.monotone and res.reduction >= 10


def test_large_rate_triggers_halving(flow):
    res = flow.run(flow.random_initial(1), 20, 1.0)
    assert res.halvings > 0 and res.monotone
    assert res.rates[-1] < 1.0


def test_flat_field_is_a_fixed_point(flow):
    from pseudoym.kernels import gradient_np
    f = np.zeros(flow.box.shape)
    core = (slice(3, -3),) * 3
    f[core] = flow.random_initial(7)[0][core]
    a0 = gradient_np(f, flow.h)
    res = flow.run(a0, 10, 1e-2)
    assert np.max(np.abs(res.a - a0)) < 1e-10
    assert res.pym[-1] < 1e-20


def test_energy_identity_and_limit_minimality(flow):
    a0 = flow.random_initial(3)
    fd, exact = vs.energy_slope(flow, a0)
    assert fd == pytest.approx(exact, rel=5e-2)
    a = flow.run(a0, 100, 1e-2).a
    b = flow.random_initial(4)
    t = 1e-3
    P = lambda x: flow.functional(x)[0]
    assert (P(a + t * b) - 2 * P(a) + P(a - t * b)) / t ** 2 >= -1e-6


def test_flow_config(tmp_path):
    cfg = vs.load_flow("heisenberg")
    assert (cfg.steps, cfg.rate, cfg.seed) == (200, 1e-2, 42)
    p = tmp_path / "x.flow"
    p.write_text("chart = heisenberg\nsteps = many\n")
    with pytest.raises(FixtureError):
        vs.load_flow(str(p))
    p.write_text("chart = heisenberg\ncolour = red\n")
    with pytest.raises(FixtureError):
        vs.load_flow(str(p))
