import dataclasses

import numpy as np
import pytest

from pseudoym import pseudoherm as ph
from pseudoym.exprcore import evaluate, parse
from pseudoym.fixtures import FixtureError
from pseudoym.pseudoherm import PHData, load_chart


@pytest.fixture(scope="module")
def bianchi():
    chart = load_chart("bianchi6")
    return chart, PHData(chart), chart.sample(100, 42)


def test_sampling_respects_exclusion_and_seed(bianchi):
    chart, _, env = bianchi
    assert np.all(np.abs(env["y"]) > 0.5)
    again = chart.sample(100, 42)
    assert all(np.array_equal(env[c], again[c]) for c in chart.coords)


def test_levi_form_closed_form(bianchi):
    _, data, env = bianchi
    G = evaluate(data.levi, env)[0, 0]
    assert np.max(np.abs(G - 1 / (1 + env["y"] ** 2))) <= 1e-12


def test_characteristic_direction_is_real_reeb(bianchi):
    chart, data, env = bianchi
    recs, notes = ph.check_characteristic(chart, env, 42, data)
    assert all(r.passed for r in recs)
    # the reference T in the fixture is not a solution and is reported
    assert [n.identity_id for n in notes] == ["reference.T"]
    Tn, _ = ph.characteristic_direction(chart, env, data)
    assert np.max(np.abs(Tn.imag)) < 1e-12


@pytest.mark.parametrize("name", ["bianchi6", "heisenberg", "heisenberg2", "heisenberg2w"])
def test_tanaka_webster_axioms(name):
    chart = load_chart(name)
    env = chart.sample(40, 5)
    recs, _ = ph.check_tw_axioms(chart, env, 5)
    bad = [r.identity_id for r in recs if not r.passed]
    assert not bad


def test_heisenberg_is_flat_and_torsion_free():
    data = PHData(load_chart("heisenberg2"))
    env = data.chart.sample(30, 1)
    assert np.max(np.abs(evaluate(data.gamma, env))) <= 1e-12
    assert np.max(np.abs(evaluate(data.torsion_matrix, env))) <= 1e-12
    T = evaluate(data.T, env)
    assert np.allclose(T[:, 0], [0, 0, 0, 0, 1])


@pytest.mark.parametrize("name,const", [("heisenberg", 2.0), ("heisenberg2", 8.0),
                                        ("bianchi6", 2.0)])
def test_volume_ratio_constant(name, const):
    chart = load_chart(name)
    env = chart.sample(50, 0)
    ratio = ph.volume_constant_check(chart, env)
    assert np.max(np.abs(np.abs(ratio) - const)) <= 1e-10 * const


def test_scaling_theta_breaks_reference_levi(bianchi):
    """Negative control: theta -> 2 theta doubles the Levi form."""
    chart, _, env = bianchi
    scaled = dataclasses.replace(chart, theta=chart.scaled(parse("2")).theta)
    recs, _ = ph.check_levi(scaled, env, 0)
    ref = [r for r in recs if r.identity_id == "levi.reference"][0]
    assert not ref.passed and ref.max_abs_residual > 0.1


def test_bad_fixture_reports_location(tmp_path):
    p = tmp_path / "bad.cr"
    p.write_text("n = 1\ncoords = [x, y, t]\ntheta = [1, 2\n")
    with pytest.raises(FixtureError) as exc:
        load_chart(str(p))
    assert exc.value.line == 3
