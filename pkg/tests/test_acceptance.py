"""Acceptance criteria 1-9, one pass/fail line each.

Every tolerance below is pinned to the value the criterion states; a line
reports the worst residual of the records it covers.
"""

import time

import numpy as np

from pseudoym.cli import run_suite
from pseudoym.exprcore import evaluate
from pseudoym.pseudoherm import PHData, load_chart


def _by_id(recs):
    out = {}
    for r in recs:
        out.setdefault(r.identity_id, []).append(r)
    return out


def _worst(recs):
    return max((r.max_rel_residual for r in recs), default=0.0)


def _judge(parts):
    """parts: list of (label, ok, value); returns (all ok, detail text)."""
    ok = all(p[1] for p in parts)
    text = "; ".join(f"{lab}={val:.2e}{'' if good else ' (FAIL)'}" for lab, good, val in parts)
    return ok, text


def test_criterion_1_levi_form(acceptance_line):
    t0 = time.perf_counter()
    recs, _ = run_suite("levi", "bianchi6", points=100, seed=42)
    dt = time.perf_counter() - t0
    ref = _by_id(recs)["levi.reference"][0]
    ok, text = _judge([("levi vs 1/(1+y^2) rel", ref.max_rel_residual <= 1e-10,
                        ref.max_rel_residual),
                       ("runtime s", dt < 5, dt)])
    assert ref.points == 100 and ref.tolerance == 1e-10
    acceptance_line(1, ok, text)
    assert ok


def test_criterion_2_characteristic_direction(acceptance_line):
    parts = []
    ref_note = None
    for fx in ("bianchi6", "heisenberg"):
        recs, notes = run_suite("tw-axioms", fx)
        ids = _by_id(recs)
        for key in ("T.theta", "T.interior-dtheta"):
            w = _worst(ids[key])
            parts.append((f"{fx} {key}", w <= 1e-10, w))
        if fx == "bianchi6":
            ref_note = [n for n in notes if n.identity_id == "reference.T"]
    parts.append(("reference T diff emitted", bool(ref_note),
                  ref_note[0].max_abs_difference if ref_note else 0.0))
    ok, text = _judge(parts)
    acceptance_line(2, ok, text)
    assert ok


def test_criterion_3_tanaka_webster_axioms(acceptance_line):
    parts = []
    for fx in ("bianchi6", "heisenberg"):
        recs, _ = run_suite("tw-axioms", fx)
        tw = [r for r in recs if r.identity_id.startswith("tw.")]
        w = _worst(tw)
        parts.append((f"{fx} axioms", w <= 1e-8 and len(tw) >= 7, w))
    data = PHData(load_chart("heisenberg"))
    env = data.chart.sample(100, 42)
    for lab, tree in (("Gamma", data.gamma), ("tau", data.torsion_matrix),
                      ("rho", [data.rho])):
        v = float(np.max(np.abs(evaluate(tree, env))))
        parts.append((f"heisenberg {lab}", v <= 1e-12, v))
    ok, text = _judge(parts)
    acceptance_line(3, ok, text)
    assert ok


def test_criterion_4_volume_constants(acceptance_line):
    r1, _ = run_suite("volume", "heisenberg", points=100, seed=42)
    r2, _ = run_suite("volume", "ball3", points=100, seed=42)
    assert r1[0].identity_id == "volume.ratio-n1" and r2[0].identity_id == "volume.ratio-n2"
    ok, text = _judge([("n=1 ratio vs 2", r1[0].max_rel_residual <= 1e-8, r1[0].max_rel_residual),
                       ("n=2 ball leaves vs 8", r2[0].max_rel_residual <= 1e-8,
                        r2[0].max_rel_residual)])
    acceptance_line(4, ok, text)
    assert ok


def test_criterion_5_yang_mills_split(acceptance_line):
    recs, _ = run_suite("gauge-identities", "heisenberg", points=100, seed=42)
    ids = _by_id(recs)
    split = ids["gauge.ym-split"]
    norm = ids["gauge.norm-split"]
    assert any("u1" in r.fixture for r in split)
    ok, text = _judge([("integrated split rel", _worst(split) <= 1e-6, _worst(split)),
                       ("pointwise split rel", _worst(norm) <= 1e-10, _worst(norm))])
    acceptance_line(5, ok, text)
    assert ok


def test_criterion_6_fefferman(acceptance_line):
    t0 = time.perf_counter()
    recs, _ = run_suite("fefferman", "heisenberg", points=50, seed=42)
    prj, _ = run_suite("projection", "heisenberg", points=50, seed=42)
    dt = time.perf_counter() - t0
    ids = _by_id(recs)
    exact = ids["fefferman.S-null"] + ids["fefferman.F-gamma-gamma"]
    nabla = [r for r in recs if r.identity_id.startswith("fefferman.nabla-")]
    norm = [r for r in recs if r.identity_id.startswith("pullback.norm")]
    fib = ids["fefferman.fiber-ratio"][0]
    from pseudoym import gauge
    from pseudoym.fefferman import CircleChart, fiber_integral_check
    from pseudoym.varsolver import GridBox
    chart = load_chart("heisenberg")
    _, _, ratio = fiber_integral_check(CircleChart(PHData(chart)), gauge.bump(chart),
                                       GridBox.from_chart(chart, 16))
    parts = [("F(S,S), F(gamma,gamma) abs", all(r.max_abs_residual == 0 for r in exact),
              max(r.max_abs_residual for r in exact)),
             ("connection vs Christoffel", _worst(nabla) <= 1e-8 and len(nabla) == 9,
              _worst(nabla)),
             ("pulled-back norm", _worst(norm) <= 1e-8, _worst(norm)),
             ("projection two-path", _worst(prj) <= 1e-7, _worst(prj)),
             ("fibre ratio - 2pi", abs(fib.max_abs_residual) <= 1e-6, fib.max_abs_residual),
             ("runtime s", dt < 120, dt)]
    ok, text = _judge(parts)
    acceptance_line(6, ok, text + f"; measured fibre ratio ~ {ratio:.6f}")
    assert ok


def test_criterion_7_graham_lee(acceptance_line):
    t0 = time.perf_counter()
    gl, _ = run_suite("graham-lee", "ball2", points=50, seed=42)
    lc, _ = run_suite("lc-relations", "ball2", points=50, seed=42)
    dt = time.perf_counter() - t0
    leaf = [r for r in gl if r.identity_id.startswith("gl.leaf")]
    rest = [r for r in gl if not r.identity_id.startswith("gl.leaf")]
    rel = [r for r in lc if r.identity_id != "lc.oracle-fd"]
    ok, text = _judge([("axioms and identities", _worst(rest) <= 1e-8, _worst(rest)),
                       ("leafwise vs Tanaka-Webster", bool(leaf) and _worst(leaf) <= 1e-8,
                        _worst(leaf)),
                       ("Levi-Civita relations", _worst(rel) <= 1e-7 and len(rel) == 9,
                        _worst(rel)),
                       ("runtime s", dt < 180, dt)])
    assert all(r.points == 50 for r in lc)
    acceptance_line(7, ok, text)
    assert ok


def test_criterion_8_variation(acceptance_line):
    recs, _ = run_suite("variation", "heisenberg", seed=42)
    ids = _by_id(recs)
    first, second = ids["variation.first"], ids["variation.second"]
    flat = ids["variation.flat-nonnegative"]
    ok, text = _judge([("first variation rel", _worst(first) <= 1e-6, _worst(first)),
                       ("second variation rel", _worst(second) <= 1e-5, _worst(second)),
                       ("flat second variation negativity", all(r.passed for r in flat),
                        max(r.max_abs_residual for r in flat))])
    acceptance_line(8, ok, text)
    assert ok


def test_criterion_9_flow(acceptance_line):
    from pseudoym.varsolver import gradient_flow_u1, load_flow
    cfg = load_flow("heisenberg.flow")
    assert (cfg.steps, cfg.resolution) == (200, 16)
    t0 = time.perf_counter()
    _, res = gradient_flow_u1(cfg)
    dt = time.perf_counter() - t0
    rise = max(b - a for a, b in zip(res.pym, res.pym[1:]))
    ok, text = _judge([("largest PYM increase", rise <= 0, max(rise, 0.0)),
                       ("residual reduction x", res.reduction >= 10, res.reduction),
                       ("runtime s", dt < 120, dt)])
    assert len(res.pym) == 201
    acceptance_line(9, ok, text)
    assert ok


if __name__ == "__main__":
    import sys
    import pytest
    sys.exit(pytest.main([__file__, "-q"]))
