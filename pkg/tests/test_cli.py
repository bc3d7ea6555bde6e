import json
import subprocess
import sys

import pytest

from liftedrcr.cli import main

import corpus


@pytest.fixture
def model(tmp_path):
    path = tmp_path / "smokers.mln"
    path.write_text(corpus.TEXTS["smokers_2"])
    return str(path)


def test_ground(model, capsys):
    assert main(["ground", model]) == 0
    assert "8 ground atoms, 6 ground formulas" in capsys.readouterr().out
    assert main(["ground", model, "--dump"]) == 0
    assert len(capsys.readouterr().out.splitlines()) == 6


@pytest.mark.parametrize("engine", ["ve", "brute"])
def test_exact(model, capsys, engine):
    assert main(["exact", model, "--engine", engine]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert set(doc["marginals"]) >= {"smokes(a)", "friends(b,a)"}


def test_shatter(model, capsys):
    assert main(["shatter", model]) == 0
    out = capsys.readouterr().out
    assert "X = Y, smokes(Y) <=> smokes_2b<X,Y>(Y)    n=2 n'=2" in out
    assert "X != Y, smokes(Y) <=> smokes_2b<X,Y>(Y)    n=2 n'=2" in out


def test_rcr_outputs(model, tmp_path):
    out, trace, audit = tmp_path / "m.json", tmp_path / "t.csv", tmp_path / "a.jsonl"
    code = main(["rcr", model, "--mode", "lifted", "--recover-count", "2", "--out", str(out),
                 "--trace", str(trace), "--audit", str(audit)])
    assert code == 0
    doc = json.loads(out.read_text())
    assert list(doc) == ["converged", "marginals", "recovered"]
    assert len(doc["recovered"]["equivalences"]) == 2
    assert trace.read_text().startswith("iter,eq_id,w,w_prime,delta,residual\n")
    assert len(audit.read_text().splitlines()) == 3


def test_rcr_is_deterministic(model, tmp_path):
    outs = []
    for i in range(2):
        out, audit = tmp_path / f"m{i}.json", tmp_path / f"a{i}.jsonl"
        main(["rcr", model, "--recover-frac", "0.5", "--seed", "3", "--out", str(out), "--audit", str(audit)])
        outs.append((out.read_bytes(), audit.read_bytes()))
    assert outs[0] == outs[1]


def test_strict_non_convergence(tmp_path):
    path = tmp_path / "osc.mln"
    path.write_text(corpus.TEXTS[corpus.OSCILLATING])
    args = ["rcr", str(path), "--damping", "1", "--max-iters", "50", "--out", str(tmp_path / "o.json")]
    assert main(args) == 0
    assert main(args + ["--strict"]) == 4


def test_parse_error_exit_code(tmp_path):
    bad = tmp_path / "bad.mln"
    bad.write_text("predicate p(\n")
    assert main(["ground", str(bad)]) == 2


def test_capacity_exit_code(tmp_path):
    path = tmp_path / "big.mln"
    path.write_text("domain P = 30\npredicate p(P)\nhard p(X) ^ p(Y) ^ p(Z) => p(X)\n")
    assert main(["exact", str(path)]) == 3


def test_eval_generator(tmp_path):
    out = tmp_path / "s.csv"
    assert main(["eval", "--gen", "smokers", "--size", "2", "--grid", "0,1", "--out", str(out)]) == 0
    lines = out.read_text().splitlines()
    assert lines[0].startswith("#") and len(lines) == 4


def test_module_entry_point(model):
    res = subprocess.run([sys.executable, "-m", "liftedrcr", "ground", model], capture_output=True, text=True)
    assert res.returncode == 0 and "ground atoms" in res.stdout
