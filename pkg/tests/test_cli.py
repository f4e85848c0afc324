import json

import pytest

from pseudoym.cli import SUITES, main, run_suite
from pseudoym.report import KEYS


def _records(text):
    return [json.loads(line) for line in text.splitlines() if line]


def test_volume_example(capsys):
    recs, _ = run_suite("volume", "heisenberg", points=100, seed=7)
    assert len(recs) == 1
    assert recs[0].passed and recs[0].max_rel_residual <= 1e-10


def test_tw_axioms_emits_reference_note(capsys):
    assert main(["verify", "tw-axioms", "bianchi6"]) == 0
    out, err = capsys.readouterr()
    assert all(r["pass"] for r in _records(out))
    notes = [json.loads(line) for line in err.splitlines()]
    assert any(n["identity_id"] == "reference.T" for n in notes)


def test_report_format_and_determinism(capsys):
    main(["verify", "levi", "--seed", "3"])
    first = capsys.readouterr().out
    main(["verify", "levi", "--seed", "3"])
    assert capsys.readouterr().out == first
    recs = _records(first)
    assert [list(r) for r in recs] == [list(KEYS)] * len(recs)
    ids = [r["identity_id"] for r in recs]
    assert ids == sorted(ids)


def test_out_file_and_tol_override(tmp_path):
    out = tmp_path / "r.jsonl"
    assert main(["verify", "levi", "--tol", "0", "--out", str(out)]) == 1
    recs = _records(out.read_text())
    assert all(r["tolerance"] == 0 for r in recs)
    assert any(not r["pass"] for r in recs)


@pytest.mark.parametrize("suite", [s for s in SUITES if s != "fefferman"])
def test_every_suite_passes_on_its_default_fixture(suite, capsys):
    assert main(["verify", suite, "--points", "30"]) == 0


def test_fefferman_reports_the_fibre_ratio_failure(capsys):
    assert main(["verify", "fefferman", "--points", "30"]) == 1
    bad = [r["identity_id"] for r in _records(capsys.readouterr().out) if not r["pass"]]
    assert bad == ["fefferman.fiber-ratio"]


def test_gauge_fixture_and_domain_fixture(capsys):
    assert main(["verify", "gauge-identities", "heisenberg_u1", "--points", "20"]) == 0
    recs = _records(capsys.readouterr().out)
    assert any("heisenberg_u1" in r["fixture"] for r in recs)
    assert main(["verify", "volume", "ball3", "--points", "20"]) == 0


def test_usage_errors(capsys, tmp_path):
    with pytest.raises(SystemExit) as exc:
        main(["verify", "unknown"])
    assert exc.value.code == 2
    assert main(["verify", "levi", "missing.cr"]) == 2
    bad = tmp_path / "bad.cr"
    bad.write_text("n = 1\ncoords = [x, y, t\n")
    assert main(["verify", "levi", str(bad)]) == 2
    assert "bad.cr:2" in capsys.readouterr().err


def test_eval(capsys):
    assert main(["eval", "x^2*y", "x=3", "y=2"]) == 0
    assert json.loads(capsys.readouterr().out) == {"re": 18.0, "im": 0.0}
    assert main(["eval", "x^3", "x=2", "--diff", "x"]) == 0
    assert json.loads(capsys.readouterr().out)["re"] == 12.0
    assert main(["eval", "x +", "x=1"]) == 2


def test_flow_command(capsys):
    assert main(["flow"]) == 0
    lines = _records(capsys.readouterr().out)
    assert len(lines) == 202
    assert lines[-1]["monotone"] is True and lines[-1]["residual_reduction"] >= 10
    # too few steps to reach the 10x reduction: reported as a failure
    assert main(["flow", "--steps", "5"]) == 1
