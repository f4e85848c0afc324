import pytest

from pseudoym.fixtures import FixtureError, parse_text, read


def test_values_lists_and_mappings():
    t = parse_text("n = 1\ncoords = [x, y, t]  # comment\nomega = {theta: i*x, e1: f(x, y)}\n")
    assert t["n"][0] == "1"
    assert t["coords"][0] == ["x", "y", "t"]
    assert t["omega"][0] == {"theta": "i*x", "e1": "f(x, y)"}
    assert t["coords"][1] == 2


def test_errors_report_line_and_column():
    with pytest.raises(FixtureError) as exc:
        parse_text("n = 1\nthis line has no equals\n", "demo.cr")
    assert exc.value.line == 2 and "demo.cr:2" in str(exc.value)
    with pytest.raises(FixtureError):
        parse_text("a = 1\na = 2\n")
    with pytest.raises(FixtureError):
        parse_text("a = [1, 2\n")


def test_bundled_names_resolve():
    assert read("heisenberg")["n"][0] == "1"
    assert read("ball2.dom")["n"][0] == "2"
    with pytest.raises(FixtureError):
        read("no-such-fixture")
