"""Reader for the line-oriented fixture files (``.cr``, ``.dom``, ``.gauge``,
``.flow``).

Each non-blank line is ``key = value``; ``#`` starts a comment.  A value is
a scalar, a bracketed comma-separated list, or a braced ``{name: expr, ...}``
mapping.  Keys may be dotted
(``frame.alpha1``).  Errors carry ``path:line:column``.
"""

import os
from importlib import resources


class FixtureError(ValueError):
    def __init__(self, message, path="<string>", line=0, column=0):
        super().__init__(f"{path}:{line}:{column}: {message}")
        self.path = path
        self.line = line
        self.column = column


def _split_list(text, path, lineno, col0, close="]"):
    body = text.strip()
    if not body.endswith(close):
        raise FixtureError("unterminated list", path, lineno, col0 + len(text))
    body = body[1:-1]
    items = []
    depth = 0
    cur = []
    for ch in body:
        if ch == "(":
            depth += 1
        elif ch == ")":
            depth -= 1
        if ch == "," and depth == 0:
            items.append("".join(cur).strip())
            cur = []
        else:
            cur.append(ch)
    tail = "".join(cur).strip()
    if tail or items:
        items.append(tail)
    return items


def _split_mapping(text, path, lineno, col0):
    out = {}
    for item in _split_list(text, path, lineno, col0, close="}"):
        if ":" not in item:
            raise FixtureError(f"expected 'name: expr', got {item!r}", path,
                               lineno, col0)
        k, v = item.split(":", 1)
        k = k.strip()
        if k in out:
            raise FixtureError(f"duplicate entry {k!r}", path, lineno, col0)
        out[k] = v.strip()
    return out


def parse_text(text, path="<string>"):
    """Return an ordered dict ``key -> (value, line, column)``."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0]
        if not line.strip():
            continue
        if "=" not in line or line.lstrip().startswith("="):
            raise FixtureError("expected 'key = value'", path, lineno, 1)
        key, value = line.split("=", 1)
        # "!=" inside a value must not split a key
        if key.rstrip().endswith("!"):
            raise FixtureError("expected 'key = value'", path, lineno, 1)
        key = key.strip()
        col = len(line) - len(line.lstrip()) + 1
        vcol = line.index("=") + 2
        if key in out:
            raise FixtureError(f"duplicate key {key!r}", path, lineno, col)
        v = value.strip()
        if v.startswith("["):
            v = _split_list(v, path, lineno, vcol)
        elif v.startswith("{"):
            v = _split_mapping(v, path, lineno, vcol)
        out[key] = (v, lineno, vcol)
    return out


def read(path):
    """Parse a fixture file; bare names resolve to the bundled fixtures."""
    text, shown = load_text(path)
    return parse_text(text, shown)


def load_text(path):
    if os.path.exists(path):
        with open(path, encoding="utf-8") as fh:
            return fh.read(), str(path)
    name = os.path.basename(path)
    candidates = [name]
    if "." not in name:
        candidates += [name + ext for ext in (".cr", ".dom", ".gauge", ".flow")]
    base = resources.files("pseudoym") / "fixtures"
    for cand in candidates:
        res = base / cand
        if res.is_file():
            return res.read_text(encoding="utf-8"), f"fixtures/{cand}"
    raise FixtureError("no such fixture file", str(path))


def bundled(name):
    """Path-like handle of a bundled fixture."""
    return str(resources.files("pseudoym") / "fixtures" / name)


def require(table, key, path):
    if key not in table:
        raise FixtureError(f"missing key {key!r}", path)
    return table[key]
