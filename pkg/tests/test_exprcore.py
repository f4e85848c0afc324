import math

import numpy as np
import pytest

from pseudoym.exprcore import (
    DomainError, ParseError, UnknownIdentifierError, compile_exprs, conj_expr, diff,
    eval_expr, evaluate, free_vars, parse, substitute, to_text, var,
)

SAMPLES = [
    "x^2*sin(y) + exp(i*x)/(1 + y^2)",
    "sqrt(1 + x^2 + y^2)*log(2 + cos(x*y))",
    "(x - i*y)^3/(1 + x^2)^2",
    "conj(x + i*y)*(x + i*y)",
    "x^-2 + y^(-3)",
]


def _fd(e, name, point, h=1e-5):
    up, dn = dict(point), dict(point)
    up[name] += h
    dn[name] -= h
    return (eval_expr(e, up) - eval_expr(e, dn)) / (2 * h)


def test_values_against_python_math():
    e = parse("x^2*sin(y) + exp(x)/(1 + y^2)")
    x, y = 0.7, -1.3
    assert eval_expr(e, {"x": x, "y": y}) == pytest.approx(
        x * x * math.sin(y) + math.exp(x) / (1 + y * y), rel=1e-14)
    assert eval_expr(parse("i^2"), {}) == -1


def test_hash_consing_gives_identical_objects():
    assert parse("x*y + sin(x)") is parse("x*y+sin( x )")
    assert var("x") is parse("x")


@pytest.mark.parametrize("text", SAMPLES)
def test_derivative_matches_central_difference(text):
    e = parse(text)
    rng = np.random.default_rng(3)
    for _ in range(5):
        pt = {"x": rng.uniform(0.3, 1.2), "y": rng.uniform(0.3, 1.2)}
        for name in ("x", "y"):
            exact = eval_expr(diff(e, name), pt)
            assert abs(exact - _fd(e, name, pt)) <= 1e-7 * max(1.0, abs(exact))


@pytest.mark.parametrize("text", SAMPLES)
def test_printer_round_trip(text):
    e = parse(text)
    assert parse(to_text(e)) is e


def test_diff_of_constant_and_absent_variable():
    assert diff(parse("3 + i"), "x").is_zero
    assert diff(parse("sin(y)"), "x").is_zero


def test_conjugate_and_substitute():
    z = parse("x + i*y")
    pt = {"x": 0.4, "y": -2.0}
    assert eval_expr(conj_expr(z), pt) == pytest.approx(complex(0.4, 2.0))
    s = substitute(parse("x^2 + y"), {"x": parse("y + 1")})
    assert free_vars(s) == {"y"}
    assert eval_expr(s, {"y": 2.0}) == pytest.approx(11.0)


def test_parse_errors_carry_offsets():
    with pytest.raises(ParseError) as exc:
        parse("x + * y")
    assert exc.value.offset == 4
    with pytest.raises(ParseError):
        parse("x^")
    with pytest.raises(ParseError):
        parse("(x + 1")
    with pytest.raises(UnknownIdentifierError):
        parse("x + w", ("x", "y"))


def test_domain_errors():
    with pytest.raises(DomainError):
        eval_expr(parse("1/x"), {"x": 0.0})
    with pytest.raises(DomainError):
        eval_expr(parse("log(x)"), {"x": 0.0})


def test_vectorised_evaluation_and_chunking():
    exprs = [parse(t) for t in SAMPLES[:3]]
    rng = np.random.default_rng(0)
    npts = 20000
    env = {"x": rng.uniform(0.3, 1, npts), "y": rng.uniform(0.3, 1, npts)}
    vals = compile_exprs(exprs)(env)
    assert vals.shape == (3, npts)
    for k in (0, 777, npts - 1):
        pt = {"x": env["x"][k], "y": env["y"][k]}
        for j, e in enumerate(exprs):
            assert vals[j, k] == pytest.approx(eval_expr(e, pt), rel=1e-13)
    nested = evaluate([[exprs[0], exprs[1]], [exprs[2], exprs[0]]], env)
    assert nested.shape == (2, 2, npts)
