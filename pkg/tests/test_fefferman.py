import math

import numpy as np
import pytest

from pseudoym import fefferman as fe
from pseudoym import gauge
from pseudoym.exprcore import evaluate
from pseudoym.pseudoherm import PHData, load_chart
from pseudoym.varsolver import GridBox


@pytest.fixture(scope="module", params=["heisenberg", "bianchi6", "heisenberg2w"])
def circle(request):
    chart = load_chart(request.param)
    data = PHData(chart)
    return fe.CircleChart(data), chart.sample(30, 4)


def test_metric_is_lorentzian_with_null_fibre(circle):
    cc, env = circle
    F = evaluate(cc.metric, env).real
    ev = np.linalg.eigvalsh(np.moveaxis(F, -1, 0))
    assert np.all((ev < 0).sum(axis=1) == 1)
    # the fibre direction d/dgamma is null
    assert np.max(np.abs(F[-1, -1])) == 0


def test_metric_suite(circle):
    cc, env = circle
    recs, _ = fe.metric_check(cc, env, 4)
    assert [r.identity_id for r in recs if not r.passed] == []


def test_connection_against_christoffel_oracle(circle):
    cc, env = circle
    recs, notes = fe.connection_check(cc, env, 4)
    assert len(recs) == 9 and all(r.passed for r in recs)
    assert any(n.identity_id == "fefferman.nabla-S-normalisation" for n in notes)


def test_pullback_and_projection(circle):
    cc, env = circle
    for m in (1, 2):
        field = gauge.random_field(cc.data, m, 20 + m)
        recs, _ = fe.pullback_check(field, env, 4, cc=cc)
        assert all(r.passed for r in recs)
    recs, _ = fe.check_projection(cc.data.chart, env, 4, data=cc.data)
    assert all(r.passed for r in recs)


@pytest.mark.parametrize("name,res", [("heisenberg", 16), ("heisenberg2", 8)])
def test_fibre_integral_measured_value(name, res):
    """The fibre integral of f o pi against dvol(F) over theta ^ dtheta^n
    comes out as 2 pi / ((n + 2) 2^n n!): the metric density is
    dvol(g_theta) / (n + 2) and dvol(g_theta) = |theta ^ dtheta^n| / (2^n n!)."""
    chart = load_chart(name)
    cc = fe.CircleChart(PHData(chart))
    recs, _, ratio = fe.fiber_integral_check(cc, gauge.bump(chart), GridBox.from_chart(chart, res))
    n = chart.n
    assert ratio == pytest.approx(2 * math.pi / ((n + 2) * 2 ** n * math.factorial(n)), rel=1e-12)
    ids = {r.identity_id: r for r in recs}
    assert ids["fefferman.metric-density"].passed
    assert not ids["fefferman.fiber-ratio"].passed
