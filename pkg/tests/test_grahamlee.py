import math

import numpy as np
import pytest

from pseudoym import grahamlee as gl
from pseudoym.exprcore import evaluate
from pseudoym.fixtures import FixtureError


@pytest.fixture(scope="module")
def ball():
    dom = gl.load_domain("ball2")
    td = gl.transverse_frame(dom)
    env = dom.sample(40, 11)
    return dom, td, env


def _z(dom, env):
    return np.array([env[f"x{j + 1}"] + 1j * env[f"y{j + 1}"] for j in range(dom.n)])


def test_bergman_constant():
    assert gl.bergman_constant(1) == pytest.approx(math.sqrt(math.pi))
    assert gl.bergman_constant(2) == pytest.approx((math.pi ** 2 / 2) ** (1 / 3))


def test_ball_transverse_closed_forms(ball):
    # phi = c(|z|^2 - 1): xi = z / (c |z|^2), r = 1 / (c |z|^2)
    dom, td, env = ball
    c = gl.bergman_constant(2)
    z = _z(dom, env)
    r2 = np.sum(np.abs(z) ** 2, axis=0)
    assert np.allclose(evaluate(td.xi, env), z / (c * r2), atol=1e-13)
    assert np.allclose(evaluate([td.r], env)[0], 1 / (c * r2), atol=1e-13)


def test_N_and_T_by_finite_differences(ball):
    # d phi(N) = 2 and d phi(T) = 0 along straight lines, no symbolic calculus
    dom, td, env = ball
    N = evaluate(td.N, env).real
    T = evaluate(td.T, env).real
    h = 1e-6

    def phi_at(shift):
        e = {c: env[c] + shift[k] for k, c in enumerate(dom.coords)}
        return evaluate([dom.phi], e)[0].real

    dN = (phi_at(h * N) - phi_at(-h * N)) / (2 * h)
    dT = (phi_at(h * T) - phi_at(-h * T)) / (2 * h)
    assert np.allclose(dN, 2, atol=1e-7)
    assert np.allclose(dT, 0, atol=1e-7)


def test_kahler_metric_matches_bergman_closed_form():
    # (n+1)[delta/(1-|z|^2) + zbar_j z_k/(1-|z|^2)^2] at z = (1/2, 0), n = 2
    dom = gl.load_domain("ball2")
    env = {"x1": np.array([0.5]), "y1": np.zeros(1), "x2": np.zeros(1), "y2": np.zeros(1)}
    g = evaluate(gl.kahler_metric(dom), env)[..., 0].real
    assert np.allclose(g, np.diag([16 / 3, 16 / 3, 4, 4]), atol=1e-12)
    assert np.allclose(evaluate(gl.potential_metric(dom), env)[..., 0].real, g, atol=1e-12)


@pytest.mark.parametrize("name", ["ball2", "tilted2", "ball3"])
def test_graham_lee_suite(name):
    dom = gl.load_domain(name)
    recs = gl.check_graham_lee(dom, 25, 3)
    assert [r.identity_id for r in recs if not r.passed] == []
    recs = gl.check_lc_relations(dom, 25, 3)
    assert [r.identity_id for r in recs if not r.passed] == []


def test_mutated_connection_is_caught(ball):
    """Negative control: perturbing one connection coefficient by 1e-4
    must break the axioms the suite checks."""
    dom, td, env = ball
    nu = gl.Numbers(td, env)
    G = nu.G.copy()
    G[1, 1, 1] += 1e-4
    nu.__dict__["G"] = G
    recs = gl.gl_verify(dom, env, 0, 1e-8, td, nu)
    assert any(not r.passed for r in recs)


def test_leaf_volume_constant_n2():
    dom = gl.load_domain("ball3")
    rec = gl.leaf_volume_check(dom, dom.sample(30, 2), 2)
    assert rec.identity_id == "volume.ratio-n2" and rec.passed


def test_bad_domain_file(tmp_path):
    p = tmp_path / "bad.dom"
    p.write_text("n = 2\ncoords = [x1, y1, x2]\nphi = x1\n")
    with pytest.raises(FixtureError):
        gl.load_domain(str(p))
