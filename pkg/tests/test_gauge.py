import numpy as np
import pytest

from pseudoym import gauge
from pseudoym.exprcore import evaluate
from pseudoym.fixtures import FixtureError
from pseudoym.pseudoherm import PHData, load_chart


@pytest.fixture(scope="module")
def heis():
    data = PHData(load_chart("heisenberg"))
    return data, data.chart.sample(60, 9)


def test_u1_x_theta_closed_form_densities():
    # omega = i x theta.  With E1 = (d_x + 2y d_t)/sqrt2, E2 = J E1 and
    # T = d_t: R(E1, E2) = 2ix and R(T, E1) = -i/sqrt2, R(T, E2) = 0.
    field = gauge.load_gauge("heisenberg_u1")
    env = field.chart.sample(50, 1)
    d = gauge.densities(field, env)
    x = env["x"]
    assert np.allclose(d["horizontal"], 4 * x ** 2, atol=1e-13)
    assert np.allclose(d["full"], 4 * x ** 2 + 0.5, atol=1e-13)
    assert np.allclose(d["iT"], 0.125, atol=1e-13)


@pytest.mark.parametrize("m", [1, 2])
def test_pointwise_suite_passes(heis, m):
    data, env = heis
    field = gauge.random_field(data, m, 100 + m)
    recs, _ = gauge.check_gauge(field, env, 100 + m)
    assert [r.identity_id for r in recs if not r.passed] == []


def test_pure_gauge_is_flat(heis):
    # Omega = u^{-1} du for u = exp(i f) gives R = 0 in the abelian case
    data, env = heis
    from pseudoym import calculus as calc
    from pseudoym.exprcore import I, parse
    f = parse("x*y + t^2 - x^3")
    coeffs = calc.zeros((1, 1, data.N))
    for A in range(data.N):
        coeffs[0, 0, A] = I * calc.apply(data.frame[A], f, data.coords)
    R = evaluate(gauge.curvature(gauge.GaugeField(data, coeffs)), env)
    assert np.max(np.abs(R)) < 1e-12


def test_constant_gauge_transform_preserves_norms(heis):
    data, env = heis
    field = gauge.random_field(data, 2, 5)
    g = gauge._random_unitary(2, 3)
    d0 = gauge.densities(field, env)
    d1 = gauge.densities(field.gauge_transformed(g), env)
    for k in d0:
        assert np.allclose(d0[k], d1[k], rtol=1e-12, atol=1e-12)


def test_integrated_split(heis):
    data, _ = heis
    recs = gauge.check_integrated(gauge.load_gauge("heisenberg_u1"), 0, 12)
    assert all(r.passed for r in recs)


def test_non_skew_connection_is_rejected(tmp_path):
    p = tmp_path / "bad.gauge"
    p.write_text("chart = heisenberg\nm = 1\nomega[1][1] = {theta: x}\n")
    with pytest.raises(FixtureError):
        gauge.load_gauge(str(p))
    p.write_text("chart = heisenberg\nm = 1\nomega[1][1] = {nope: i*x}\n")
    with pytest.raises(FixtureError):
        gauge.load_gauge(str(p))
