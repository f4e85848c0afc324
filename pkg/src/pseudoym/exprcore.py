"""Small symbolic kernel for complex-valued expressions in real coordinates.

Expressions are immutable, hash-consed trees (structurally equal trees are
the same object).  Only constant folding, sign normalisation and 0/1
absorption are performed on construction; identities are checked
numerically, so no canonical form is needed.

Grammar accepted by :func:`parse`::

    expr   := term (('+'|'-') term)*
    term   := unary (('*'|'/') unary)*
    unary  := '-' unary | factor
    factor := base ('^' ['-'] integer | '^' '(' ['-'] integer ')')?
    base   := number | 'i' | ident | '(' expr ')' | func '(' expr ')'
    func   := sqrt | exp | log | sin | cos | conj
"""

import math
import re
import threading
import weakref
from fractions import Fraction

import numpy as np

__all__ = [
    "Expr", "ParseError", "UnknownIdentifierError", "DomainError",
    "const", "var", "I", "ZERO", "ONE", "add", "mul", "div", "power", "neg",
    "sqrt", "exp", "log", "sin", "cos", "conj_expr", "diff", "parse",
    "to_text", "free_vars", "substitute", "compile_exprs", "evaluate",
    "eval_expr",
]

FUNCTIONS = ("sqrt", "exp", "log", "sin", "cos", "conj")


class ParseError(ValueError):
    """Syntax error; ``offset`` is the byte offset into the source text."""

    def __init__(self, message, offset):
        super().__init__(f"{message} at byte offset {offset}")
        self.offset = offset


class UnknownIdentifierError(ParseError):
    pass


class DomainError(ArithmeticError):
    """Raised when evaluation leaves the domain (1/0, log 0, non-finite)."""

    def __init__(self, message, subtree=None):
        super().__init__(message)
        self.subtree = subtree


_TABLE = weakref.WeakValueDictionary()
_LOCK = threading.Lock()


class Expr:
    __slots__ = ("kind", "value", "args", "real", "_hash", "_dcache",
                 "_conj", "__weakref__")

    def __new__(cls, kind, value=None, args=()):
        if kind == "flt":
            vkey = ("f", float(value).hex())
        else:
            vkey = value
        key = (kind, vkey, tuple(id(a) for a in args))
        with _LOCK:
            node = _TABLE.get(key)
            if node is not None:
                return node
            node = object.__new__(cls)
            node.kind = kind
            node.value = value
            node.args = tuple(args)
            node._hash = hash(key)
            node._dcache = {}
            node._conj = None
            node.real = _is_real(kind, node.args)
            _TABLE[key] = node
        return node

    def __hash__(self):
        return self._hash

    def __eq__(self, other):
        return self is other

    def __ne__(self, other):
        return self is not other

    def __reduce__(self):
        return (parse, (to_text(self),))

    def __repr__(self):
        return f"Expr({to_text(self)!r})"

    def __str__(self):
        return to_text(self)

    # arithmetic sugar; plain numbers are promoted with ``as_expr``
    def __add__(self, other):
        if isinstance(other, np.ndarray):
            return NotImplemented
        return add(self, as_expr(other))

    def __radd__(self, other):
        if isinstance(other, np.ndarray):
            return NotImplemented
        return add(as_expr(other), self)

    def __sub__(self, other):
        if isinstance(other, np.ndarray):
            return NotImplemented
        return add(self, neg(as_expr(other)))

    def __rsub__(self, other):
        if isinstance(other, np.ndarray):
            return NotImplemented
        return add(as_expr(other), neg(self))

    def __mul__(self, other):
        if isinstance(other, np.ndarray):
            return NotImplemented
        return mul(self, as_expr(other))

    def __rmul__(self, other):
        if isinstance(other, np.ndarray):
            return NotImplemented
        return mul(as_expr(other), self)

    def __truediv__(self, other):
        if isinstance(other, np.ndarray):
            return NotImplemented
        return div(self, as_expr(other))

    def __rtruediv__(self, other):
        if isinstance(other, np.ndarray):
            return NotImplemented
        return div(as_expr(other), self)

    def __pow__(self, n):
        return power(self, n)

    def __neg__(self):
        return neg(self)

    def __pos__(self):
        return self

    def conjugate(self):
        return conj_expr(self)

    @property
    def is_zero(self):
        return self.kind in ("rat", "flt") and self.value == 0

    @property
    def is_number(self):
        return self.kind in ("rat", "flt")


def _is_real(kind, args):
    if kind in ("rat", "flt", "var"):
        return True
    if kind == "I":
        return False
    if kind == "sqrt":
        return args[0].is_number and args[0].value >= 0
    if kind == "log":
        return False
    return all(a.real for a in args)


def const(value):
    """Numeric constant; ints and Fractions stay exact, floats are kept as is."""
    if isinstance(value, Expr):
        return value
    if isinstance(value, bool):
        value = int(value)
    if isinstance(value, (int, Fraction)):
        return Expr("rat", Fraction(value))
    if isinstance(value, complex):
        return add(const(value.real), mul(const(value.imag), I))
    if isinstance(value, (float, np.floating)):
        value = float(value)
        if not math.isfinite(value):
            raise ValueError("non-finite constant")
        return Expr("flt", value)
    if isinstance(value, np.integer):
        return Expr("rat", Fraction(int(value)))
    raise TypeError(f"cannot make a constant from {value!r}")


def as_expr(value):
    return value if isinstance(value, Expr) else const(value)


def var(name):
    if name in FUNCTIONS or name == "i":
        raise ValueError(f"reserved name {name!r}")
    return Expr("var", str(name))


I = Expr("I")
ZERO = const(0)
ONE = const(1)


def _num(e):
    return e.value


def _mk_num(v):
    return Expr("rat", v) if isinstance(v, Fraction) else Expr("flt", float(v))


def neg(a):
    a = as_expr(a)
    if a.is_number:
        return _mk_num(-a.value)
    if a.kind == "neg":
        return a.args[0]
    return Expr("neg", None, (a,))


def add(*terms):
    flat = []
    c = Fraction(0)
    for t in terms:
        t = as_expr(t)
        parts = t.args if t.kind == "add" else (t,)
        for p in parts:
            if p.is_number:
                c = c + p.value
            else:
                flat.append(p)
    if c != 0 or not flat:
        cnode = _mk_num(c)
        if not flat:
            return cnode
        flat.insert(0, cnode)
    if len(flat) == 1:
        return flat[0]
    return Expr("add", None, flat)


def mul(*factors):
    flat = []
    c = Fraction(1)
    n_i = 0
    for f in factors:
        f = as_expr(f)
        if f.kind == "neg":
            c = -c
            f = f.args[0]
        parts = f.args if f.kind == "mul" else (f,)
        for p in parts:
            if p.is_number:
                c = c * p.value
            elif p.kind == "I":
                n_i += 1
            else:
                flat.append(p)
    if c == 0:
        return _mk_num(c)
    if n_i % 4 >= 2:
        c = -c
    negative = c < 0
    c = -c if negative else c
    head = []
    if c != 1:
        head.append(_mk_num(c))
    if n_i % 2:
        head.append(I)
    flat = head + flat
    if not flat:
        out = _mk_num(c)
    elif len(flat) == 1:
        out = flat[0]
    else:
        out = Expr("mul", None, flat)
    return neg(out) if negative else out


def div(a, b):
    a, b = as_expr(a), as_expr(b)
    sign = False
    if a.kind == "neg":
        a, sign = a.args[0], not sign
    if b.kind == "neg":
        b, sign = b.args[0], not sign
    if b.is_number and b.value == 1:
        out = a
    elif a.is_zero and not b.is_zero:
        out = a
    elif a.is_number and b.is_number and b.value != 0:
        out = _mk_num(a.value / b.value)
    else:
        out = Expr("div", None, (a, b))
    return neg(out) if sign else out


def power(a, n):
    a = as_expr(a)
    if isinstance(n, Expr):
        if n.kind != "rat" or n.value.denominator != 1:
            raise ValueError("only integer exponents are supported")
        n = n.value.numerator
    n = int(n)
    if n == 0:
        return ONE
    if n == 1:
        return a
    if a.is_number and not (a.value == 0 and n < 0):
        return _mk_num(a.value ** n if n > 0 else 1 / a.value ** (-n))
    if a.kind == "I":
        return [ONE, I, const(-1), neg(I)][n % 4]
    if a.kind == "neg":
        inner = power(a.args[0], n)
        return neg(inner) if n % 2 else inner
    return Expr("pow", n, (a,))


def _func(name, a, folds):
    a = as_expr(a)
    if a.kind == "rat" and a.value in folds:
        return const(folds[a.value])
    return Expr(name, None, (a,))


def sqrt(a):
    return _func("sqrt", a, {0: 0, 1: 1})


def exp(a):
    return _func("exp", a, {0: 1})


def log(a):
    return _func("log", a, {1: 0})


def sin(a):
    return _func("sin", a, {0: 0})


def cos(a):
    return _func("cos", a, {0: 1})


_BUILD = {"sqrt": sqrt, "exp": exp, "log": log, "sin": sin, "cos": cos}


def conj_expr(e):
    """Complex conjugate.  Coordinates are real, so conj(x) = x."""
    e = as_expr(e)
    if e._conj is not None:
        return e._conj
    if e.real:
        out = e
    else:
        k = e.kind
        if k == "I":
            out = neg(I)
        elif k == "neg":
            out = neg(conj_expr(e.args[0]))
        elif k == "add":
            out = add(*[conj_expr(a) for a in e.args])
        elif k == "mul":
            out = mul(*[conj_expr(a) for a in e.args])
        elif k == "div":
            out = div(conj_expr(e.args[0]), conj_expr(e.args[1]))
        elif k == "pow":
            out = power(conj_expr(e.args[0]), e.value)
        elif k == "conj":
            out = e.args[0]
        else:
            # transcendental node: keep an explicit conjugation so that
            # evaluation is the exact floating-point conjugate
            out = Expr("conj", None, (e,))
    e._conj = out
    return out


def diff(e, name):
    """Exact symbolic derivative with respect to the coordinate ``name``."""
    if isinstance(name, Expr):
        name = name.value
    e = as_expr(e)
    cached = e._dcache.get(name)
    if cached is not None:
        return cached
    k = e.kind
    a = e.args
    if k in ("rat", "flt", "I"):
        out = ZERO
    elif k == "var":
        out = ONE if e.value == name else ZERO
    elif not _depends_on(e, name):
        out = ZERO
    elif k == "neg":
        out = neg(diff(a[0], name))
    elif k == "add":
        out = add(*[diff(t, name) for t in a])
    elif k == "mul":
        terms = []
        for j, f in enumerate(a):
            df = diff(f, name)
            if not df.is_zero:
                terms.append(mul(*a[:j], df, *a[j + 1:]))
        out = add(*terms)
    elif k == "div":
        num, den = a
        dn, dd = diff(num, name), diff(den, name)
        if dd.is_zero:
            out = div(dn, den)
        else:
            out = div(add(mul(dn, den), neg(mul(num, dd))), power(den, 2))
    elif k == "pow":
        out = mul(e.value, power(a[0], e.value - 1), diff(a[0], name))
    elif k == "sqrt":
        out = div(diff(a[0], name), mul(2, e))
    elif k == "exp":
        out = mul(e, diff(a[0], name))
    elif k == "log":
        out = div(diff(a[0], name), a[0])
    elif k == "sin":
        out = mul(cos(a[0]), diff(a[0], name))
    elif k == "cos":
        out = neg(mul(sin(a[0]), diff(a[0], name)))
    elif k == "conj":
        out = conj_expr(diff(a[0], name))
    else:  # pragma: no cover
        raise AssertionError(k)
    e._dcache[name] = out
    return out


_FREE = weakref.WeakKeyDictionary()


def free_vars(e):
    """Frozen set of coordinate names occurring in ``e``."""
    got = _FREE.get(e)
    if got is not None:
        return got
    order = _topo([e])
    for node in order:
        if node in _FREE:
            continue
        if node.kind == "var":
            s = frozenset((node.value,))
        elif not node.args:
            s = frozenset()
        elif len(node.args) == 1:
            s = _FREE[node.args[0]]
        else:
            s = frozenset().union(*[_FREE[c] for c in node.args])
        _FREE[node] = s
    return _FREE[e]


def _depends_on(e, name):
    return name in free_vars(e)


def substitute(e, mapping):
    """Replace coordinates by expressions, ``mapping = {name: Expr}``."""
    mapping = {k: as_expr(v) for k, v in mapping.items()}
    done = {}
    for node in _topo([as_expr(e)]):
        k = node.kind
        if not (free_vars(node) & mapping.keys()):
            out = node
        elif k == "var":
            out = mapping[node.value]
        else:
            a = [done[c] for c in node.args]
            if k == "neg":
                out = neg(a[0])
            elif k == "add":
                out = add(*a)
            elif k == "mul":
                out = mul(*a)
            elif k == "div":
                out = div(*a)
            elif k == "pow":
                out = power(a[0], node.value)
            elif k == "conj":
                out = conj_expr(a[0])
            else:
                out = _BUILD[k](a[0])
        done[node] = out
    return done[as_expr(e)]


# ---------------------------------------------------------------- printing

def _fmt_num(v):
    if isinstance(v, Fraction):
        if v.denominator == 1:
            return str(v.numerator) if v >= 0 else f"({v.numerator})"
        return f"({v.numerator}/{v.denominator})"
    s = repr(float(v))
    return s if v >= 0 else f"({s})"


def _wrap(e, kinds):
    s = to_text(e)
    return f"({s})" if e.kind in kinds else s


def to_text(e):
    """Print in the input grammar; ``parse(to_text(e)) is e``."""
    k = e.kind
    if k in ("rat", "flt"):
        return _fmt_num(e.value)
    if k == "I":
        return "i"
    if k == "var":
        return e.value
    if k == "neg":
        return "-" + _wrap(e.args[0], ("add", "neg"))
    if k == "add":
        out = [to_text(e.args[0])]
        for t in e.args[1:]:
            if t.kind == "neg":
                out.append(" - " + _wrap(t.args[0], ("add", "neg")))
            else:
                out.append(" + " + _wrap(t, ("neg",)))
        return "".join(out)
    if k == "mul":
        return "*".join(_wrap(f, ("add", "neg", "mul", "div")) for f in e.args)
    if k == "div":
        return (_wrap(e.args[0], ("add", "neg"))
                + "/" + _wrap(e.args[1], ("add", "neg", "mul", "div")))
    if k == "pow":
        b = e.args[0]
        base = to_text(b)
        if not (b.kind in ("var", "I") or b.kind in FUNCTIONS
                or (b.kind == "rat" and b.value >= 0
                    and b.value.denominator == 1)):
            base = f"({base})"
        n = e.value
        return f"{base}^{n}" if n > 0 else f"{base}^({n})"
    return f"{k}({to_text(e.args[0])})"


# ----------------------------------------------------------------- parsing

_TOKEN = re.compile(r"""
    (?P<ws>\s+)
  | (?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)
  | (?P<id>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<op>[-+*/^()])
""", re.VERBOSE)


class _Parser:
    def __init__(self, text, names):
        self.text = text
        self.names = names
        self.toks = []
        pos = 0
        while pos < len(text):
            m = _TOKEN.match(text, pos)
            if m is None:
                raise ParseError(f"unexpected character {text[pos]!r}",
                                 self._byte(pos))
            if m.lastgroup != "ws":
                self.toks.append((m.lastgroup, m.group(), pos))
            pos = m.end()
        self.toks.append(("end", "", len(text)))
        self.i = 0

    def _byte(self, pos):
        return len(self.text[:pos].encode("utf-8"))

    def peek(self):
        return self.toks[self.i]

    def take(self):
        tok = self.toks[self.i]
        self.i += 1
        return tok

    def expect(self, s):
        kind, val, pos = self.take()
        if val != s:
            found = val or "end of input"
            raise ParseError(f"expected {s!r}, found {found!r}",
                             self._byte(pos))

    def error(self, msg):
        raise ParseError(msg, self._byte(self.peek()[2]))

    def expr(self):
        out = self.term()
        while self.peek()[1] in ("+", "-"):
            op = self.take()[1]
            rhs = self.term()
            out = add(out, rhs) if op == "+" else add(out, neg(rhs))
        return out

    def term(self):
        out = self.unary()
        while self.peek()[1] in ("*", "/"):
            op = self.take()[1]
            rhs = self.unary()
            out = mul(out, rhs) if op == "*" else div(out, rhs)
        return out

    def unary(self):
        if self.peek()[1] == "-":
            self.take()
            return neg(self.unary())
        return self.factor()

    def integer(self):
        sign = 1
        if self.peek()[1] == "-":
            self.take()
            sign = -1
        kind, val, pos = self.take()
        if kind != "num" or not val.isdigit():
            raise ParseError("expected an integer exponent", self._byte(pos))
        return sign * int(val)

    def factor(self):
        b = self.base()
        if self.peek()[1] == "^":
            self.take()
            if self.peek()[1] == "(":
                self.take()
                n = self.integer()
                self.expect(")")
            else:
                n = self.integer()
            b = power(b, n)
        return b

    def base(self):
        kind, val, pos = self.take()
        if kind == "num":
            if re.fullmatch(r"\d+", val):
                return const(int(val))
            return const(float(val))
        if kind == "id":
            if val == "i":
                return I
            if val in FUNCTIONS:
                self.expect("(")
                inner = self.expr()
                self.expect(")")
                return conj_expr(inner) if val == "conj" else _BUILD[val](inner)
            if self.names is not None and val not in self.names:
                raise UnknownIdentifierError(f"unknown identifier {val!r}",
                                             self._byte(pos))
            return var(val)
        if val == "(":
            inner = self.expr()
            self.expect(")")
            return inner
        found = val or "end of input"
        raise ParseError(f"unexpected {found!r}", self._byte(pos))


def parse(text, names=None):
    """Parse ``text``; if ``names`` is given, other identifiers are errors."""
    p = _Parser(text, None if names is None else set(names))
    out = p.expr()
    if p.peek()[0] != "end":
        p.error(f"unexpected {p.peek()[1]!r}")
    return out


# -------------------------------------------------------------- evaluation

def _topo(roots):
    """Children-first ordering of the DAG below ``roots``."""
    seen = set()
    order = []
    stack = [(r, False) for r in reversed(roots)]
    while stack:
        node, done = stack.pop()
        if done:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for c in reversed(node.args):
            if id(c) not in seen:
                stack.append((c, False))
    return order


def _ipow(x, n):
    result = None
    base = x
    while n:
        if n & 1:
            result = base if result is None else result * base
        n >>= 1
        if n:
            base = base * base
    return result


def _short(e, limit=120):
    s = to_text(e)
    return s if len(s) <= limit else s[:limit] + "..."


class _Program:
    """A DAG of expressions flattened into a straight-line numpy program."""

    def __init__(self, exprs):
        self.exprs = [as_expr(e) for e in exprs]
        self.order = _topo(self.exprs)
        self.vars = sorted({n.value for n in self.order if n.kind == "var"})

    def __call__(self, env, npts):
        vals = {}
        for node in self.order:
            k = node.kind
            a = node.args
            if k == "rat":
                v = complex(float(node.value))
            elif k == "flt":
                v = complex(node.value)
            elif k == "I":
                v = 1j
            elif k == "var":
                v = env[node.value]
            elif k == "neg":
                v = -vals[id(a[0])]
            elif k == "add":
                v = vals[id(a[0])]
                for t in a[1:]:
                    v = v + vals[id(t)]
            elif k == "mul":
                v = vals[id(a[0])]
                for t in a[1:]:
                    v = v * vals[id(t)]
            elif k == "div":
                den = vals[id(a[1])]
                if np.any(den == 0):
                    raise DomainError(f"division by zero in {_short(node)}",
                                      node)
                v = vals[id(a[0])] / den
            elif k == "pow":
                base = vals[id(a[0])]
                n = node.value
                if n < 0:
                    if np.any(base == 0):
                        raise DomainError(
                            f"division by zero in {_short(node)}", node)
                    v = 1.0 / _ipow(base, -n)
                else:
                    v = _ipow(base, n)
            elif k == "sqrt":
                v = np.sqrt(vals[id(a[0])])
            elif k == "exp":
                v = np.exp(vals[id(a[0])])
            elif k == "log":
                arg = vals[id(a[0])]
                if np.any(arg == 0):
                    raise DomainError(f"log of zero in {_short(node)}", node)
                v = np.log(arg)
            elif k == "sin":
                v = np.sin(vals[id(a[0])])
            elif k == "cos":
                v = np.cos(vals[id(a[0])])
            elif k == "conj":
                v = np.conj(vals[id(a[0])])
            else:  # pragma: no cover
                raise AssertionError(k)
            vals[id(node)] = v
        out = np.empty((len(self.exprs), npts), dtype=complex)
        for j, e in enumerate(self.exprs):
            out[j] = vals[id(e)]
        if not np.all(np.isfinite(out)):
            bad = [e for j, e in enumerate(self.exprs)
                   if not np.all(np.isfinite(out[j]))][0]
            raise DomainError(f"non-finite value of {_short(bad)}", bad)
        return out


_CACHE = {}
_CACHE_MAX = 512
_NODE_BUDGET = 8_000_000  # node values held at once (about 128 MB)


def compile_exprs(exprs):
    """Compile a list of expressions into ``f(env) -> complex array``.

    ``env`` maps coordinate names to equal-length float arrays; the result
    has shape ``(len(exprs), npts)``.
    """
    key = tuple(as_expr(e) for e in exprs)
    prog = _CACHE.get(key)
    if prog is None:
        prog = _Program(key)
        if len(_CACHE) >= _CACHE_MAX:
            _CACHE.pop(next(iter(_CACHE)))
        _CACHE[key] = prog

    def run(env):
        npts = None
        cenv = {}
        for name in prog.vars:
            if name not in env:
                raise KeyError(f"no value for coordinate {name!r}")
            arr = np.atleast_1d(np.asarray(env[name], dtype=float))
            cenv[name] = arr.astype(complex)
            npts = len(arr)
        if npts is None:
            npts = len(np.atleast_1d(next(iter(env.values())))) if env else 1
        # every node keeps its value array, so bound memory by chunking points
        chunk = max(64, _NODE_BUDGET // max(1, len(prog.order)))
        if npts <= chunk:
            return prog(cenv, npts)
        out = np.empty((len(prog.exprs), npts), dtype=complex)
        for lo in range(0, npts, chunk):
            hi = min(npts, lo + chunk)
            part = {k: v[lo:hi] for k, v in cenv.items()}
            out[:, lo:hi] = prog(part, hi - lo)
        return out

    run.variables = prog.vars
    run.size = len(prog.order)
    return run


def evaluate(tree, env):
    """Evaluate a nested list / object array of expressions at many points.

    Returns a complex array of shape ``shape(tree) + (npts,)``.
    """
    arr = np.asarray(tree, dtype=object)
    flat = [as_expr(e) for e in arr.ravel()]
    vals = compile_exprs(flat)(env)
    return vals.reshape(arr.shape + (vals.shape[-1],))


def eval_expr(e, point):
    """Value of ``e`` at a single point given as ``{name: float}``."""
    env = {k: np.array([float(v)]) for k, v in point.items()}
    return complex(compile_exprs([e])(env)[0, 0])
