"""Command line driver: ``pseudoym verify|flow|eval``."""

import argparse
import json
import sys

from .exprcore import ParseError, eval_expr, parse
from .fixtures import FixtureError

SUITES = ("levi", "tw-axioms", "volume", "gauge-identities", "fefferman",
          "projection", "graham-lee", "lc-relations", "variation", "flow")

DEFAULT_FIXTURE = {
    "levi": "bianchi6", "tw-axioms": "bianchi6", "volume": "heisenberg",
    "gauge-identities": "heisenberg", "fefferman": "heisenberg",
    "projection": "heisenberg", "graham-lee": "ball2", "lc-relations": "ball2",
    "variation": "heisenberg", "flow": "heisenberg.flow",
}


def _is_domain(name):
    return name.endswith(".dom") or name in ("ball2", "ball3", "tilted2")


def _is_gauge(name):
    from .fixtures import read
    try:
        return "chart" in read(name if "." in name else name + ".gauge")
    except FixtureError:
        return False


def _chart(fixture):
    from .pseudoherm import load_chart
    return load_chart(fixture)


def run_suite(name, fixture=None, points=100, seed=42, resolution=16):
    """Records and notes of one suite on one fixture."""
    from . import gauge, pseudoherm
    from .pseudoherm import PHData
    fixture = fixture or DEFAULT_FIXTURE[name]
    notes = []
    if name in ("graham-lee", "lc-relations") or (name == "volume" and _is_domain(fixture)):
        from . import grahamlee as gl
        dom = gl.load_domain(fixture)
        if name == "graham-lee":
            return gl.check_graham_lee(dom, points, seed), notes
        if name == "lc-relations":
            return gl.check_lc_relations(dom, points, seed), notes
        return [gl.leaf_volume_check(dom, dom.sample(points, seed), seed)], notes
    if name == "variation":
        from .varsolver import check_variation
        return check_variation(fixture, seed, resolution), notes
    if name == "flow":
        from .varsolver import check_flow, load_flow
        recs, _ = check_flow(load_flow(fixture), seed)
        return recs, notes
    if name == "gauge-identities" and _is_gauge(fixture):
        field = gauge.load_gauge(fixture)
        data = field.data
        fields = [field]
        integrated = field
    else:
        chart = _chart(fixture)
        data = PHData(chart)
        fields = None
    chart = data.chart
    env = chart.sample(points, seed)
    if name == "levi":
        return pseudoherm.check_levi(chart, env, seed, data)
    if name == "tw-axioms":
        r1, n1 = pseudoherm.check_characteristic(chart, env, seed, data)
        r2, n2 = pseudoherm.check_tw_axioms(chart, env, seed, data)
        return r1 + r2, n1 + n2
    if name == "volume":
        return pseudoherm.check_volume(chart, env, seed, data)
    if name == "gauge-identities":
        if fields is None:
            fields = [gauge.random_field(data, 1, seed), gauge.random_field(data, 2, seed + 1)]
            integrated = fields[0]
        recs = []
        for f in fields:
            r, nt = gauge.check_gauge(f, env, seed)
            recs += r
            notes += nt
        if chart.box:
            recs += gauge.check_integrated(integrated, seed, resolution)
        recs += gauge.check_scalar_d(data, seed, env)
        return recs, notes
    if name == "fefferman":
        from .fefferman import check_fefferman
        return check_fefferman(chart, env, seed, resolution=resolution, data=data)
    if name == "projection":
        from .fefferman import check_projection
        return check_projection(chart, env, seed, data=data)
    raise ValueError(f"unknown suite {name!r}")


def _sorted(recs):
    return sorted(recs, key=lambda r: (r.identity_id, r.fixture))


def write_report(recs, notes, out):
    lines = [r.to_json() for r in _sorted(recs)]
    text = "\n".join(lines) + ("\n" if lines else "")
    if out and out != "-":
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    for n in sorted(notes, key=lambda n: (n.identity_id, n.fixture)):
        sys.stderr.write(n.to_json() + "\n")


def _cmd_verify(args):
    recs, notes = run_suite(args.suite, args.fixture, args.points, args.seed,
                            args.resolution)
    if args.tol is not None:
        for r in recs:
            r.tolerance = args.tol
    write_report(recs, notes, args.out)
    return 0 if all(r.passed for r in recs) else 1


def _cmd_flow(args):
    from .varsolver import gradient_flow_u1, load_flow
    cfg = load_flow(args.config)
    if args.seed is not None:
        cfg.seed = args.seed
    if args.steps is not None:
        cfg.steps = args.steps
    if args.rate is not None:
        cfg.rate = args.rate
    cfg.resolution = args.resolution or cfg.resolution
    _, res = gradient_flow_u1(cfg)
    lines = []
    for k, (p, r) in enumerate(zip(res.pym, res.residual)):
        rate = res.rates[k - 1] if k else None
        lines.append(json.dumps({"step": k, "pym": p, "residual": r, "rate": rate}))
    ok = res.monotone and res.reduction >= 10
    lines.append(json.dumps({"summary": cfg.name, "steps": cfg.steps,
                             "halvings": res.halvings, "monotone": res.monotone,
                             "residual_reduction": res.reduction, "pass": ok}))
    text = "\n".join(lines) + "\n"
    if args.out and args.out != "-":
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return 0 if ok else 1


def _cmd_eval(args):
    point = {}
    for item in args.assign:
        if "=" not in item:
            raise SystemExit(_usage_error(f"expected name=value, got {item!r}"))
        k, v = item.split("=", 1)
        try:
            point[k.strip()] = float(v)
        except ValueError:
            raise SystemExit(_usage_error(f"bad number {v!r}")) from None
    e = parse(args.expression, tuple(point))
    if args.diff:
        from .exprcore import diff
        e = diff(e, args.diff)
    v = eval_expr(e, point) if point else eval_expr(e, {"_": 0.0})
    print(json.dumps({"re": v.real, "im": v.imag}))
    return 0


def _usage_error(msg):
    sys.stderr.write(f"pseudoym: error: {msg}\n")
    return 2


def build_parser():
    p = argparse.ArgumentParser(prog="pseudoym", description=(
        "Randomized verification of pseudohermitian and pseudo Yang-Mills identities."))
    sub = p.add_subparsers(dest="command", required=True)
    v = sub.add_parser("verify", help="run one verification suite")
    v.add_argument("suite", choices=SUITES)
    v.add_argument("fixture", nargs="?", help="fixture file or bundled name")
    v.add_argument("--points", type=int, default=100)
    v.add_argument("--seed", type=int, default=42)
    v.add_argument("--tol", type=float, default=None,
                   help="judge every record against this tolerance "
                        "(default: the tolerance pinned for each identity, mostly 1e-8)")
    v.add_argument("--out", default=None)
    v.add_argument("--resolution", type=int, default=16)
    v.set_defaults(func=_cmd_verify)
    f = sub.add_parser("flow", help="run a U(1) gradient flow")
    f.add_argument("config", nargs="?", default="heisenberg.flow")
    f.add_argument("--seed", type=int, default=None)
    f.add_argument("--steps", type=int, default=None)
    f.add_argument("--rate", type=float, default=None)
    f.add_argument("--resolution", type=int, default=None)
    f.add_argument("--out", default=None)
    f.set_defaults(func=_cmd_flow)
    e = sub.add_parser("eval", help="evaluate an expression at a point")
    e.add_argument("expression")
    e.add_argument("assign", nargs="*", help="name=value")
    e.add_argument("--diff", default=None, help="differentiate first")
    e.set_defaults(func=_cmd_eval)
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (FixtureError, ParseError) as exc:
        return _usage_error(str(exc))
    except ValueError as exc:
        return _usage_error(str(exc))


if __name__ == "__main__":
    sys.exit(main())
