import json
import struct
from pathlib import Path

import numpy as np
import pytest

from batchbald import verify
from batchbald.cli import main
from batchbald.estimators import batchbald_score
from batchbald.tensor_io import PosteriorTensor, write_tensor
from conftest import golden_tensors

FIXTURES = Path(__file__).parent / "fixtures"
DUP = FIXTURES / "dup_pool_3x4x2.ptf"
SMALL = FIXTURES / "small_3x2x2.ptf"


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def acquire_doc(capsys, *argv):
    code, out, _ = run(capsys, "acquire", *argv)
    assert code == 0
    return json.loads(out), out


class TestScore:
    def test_rows(self, capsys):
        code, out, _ = run(capsys, "score", "--tensor", SMALL, "--strategy", "bald")
        assert code == 0
        lines = out.splitlines()
        assert lines[0] == "index,score"
        assert [l.split(",")[0] for l in lines[1:]] == ["0", "1", "2"]

    def test_varratios_formula(self, capsys, tmp_path):
        rows = np.array([[0.2, 0.5, 0.3]] * 4)
        write_tensor(PosteriorTensor([rows, rows[:, ::-1]]), tmp_path / "t.ptf")
        code, out, _ = run(capsys, "score", "--tensor", tmp_path / "t.ptf", "--strategy", "varratios")
        assert code == 0
        scores = [float(l.split(",")[1]) for l in out.splitlines()[1:]]
        assert scores == pytest.approx([1 - 0.5, 1 - 0.5])

    def test_writes_file(self, capsys, tmp_path):
        code, out, _ = run(capsys, "score", "--tensor", SMALL, "--out", tmp_path / "s.csv")
        assert code == 0 and out == ""
        assert (tmp_path / "s.csv").read_text().count("\n") == 4


class TestExitCodes:
    def test_bad_magic(self, capsys, tmp_path):
        (tmp_path / "bad.ptf").write_bytes(b"NOPE" + SMALL.read_bytes()[4:])
        code, _, err = run(capsys, "score", "--tensor", tmp_path / "bad.ptf")
        assert code == 2
        assert "magic" in err

    def test_truncated(self, capsys, tmp_path):
        (tmp_path / "t.ptf").write_bytes(SMALL.read_bytes()[:-8])
        assert run(capsys, "acquire", "--tensor", tmp_path / "t.ptf")[0] == 2

    def test_missing_file(self, capsys, tmp_path):
        assert run(capsys, "score", "--tensor", tmp_path / "absent.ptf")[0] == 2

    def test_invalid_tensor(self, capsys, tmp_path):
        data = struct.pack("<4s3I", b"PTF1", 1, 1, 2) + np.array([0.7, 0.7], "<f8").tobytes()
        (tmp_path / "t.ptf").write_bytes(data)
        code, _, err = run(capsys, "score", "--tensor", tmp_path / "t.ptf")
        assert code == 3
        assert "normalization" in err

    def test_b_exceeds_pool(self, capsys):
        assert run(capsys, "acquire", "--tensor", DUP, "--b", 4)[0] == 4

    def test_unknown_flag(self, capsys):
        assert run(capsys, "score", "--tensor", DUP, "--bogus")[0] == 4

    def test_bad_seed(self, capsys):
        assert run(capsys, "acquire", "--tensor", DUP, "--seed", 2**64)[0] == 4


class TestAcquire:
    def test_size_one_agreement(self, capsys):
        for name in golden_tensors():
            path = FIXTURES / f"{name}.ptf"
            bb, _ = acquire_doc(capsys, "--tensor", path, "--strategy", "batchbald", "--b", 1)
            bald, _ = acquire_doc(capsys, "--tensor", path, "--strategy", "bald", "--b", 1)
            assert bb["acquired"] == bald["acquired"]

    def test_duplicate_pool(self, capsys):
        bb, _ = acquire_doc(capsys, "--tensor", DUP, "--strategy", "batchbald", "--b", 2)
        bald, _ = acquire_doc(capsys, "--tensor", DUP, "--strategy", "bald", "--b", 2)
        assert bb["acquired"] == [0, 2]
        assert bald["acquired"] == [0, 1]
        assert list(bb) == ["strategy", "b", "k", "m", "seed", "exact_limit", "acquired", "scores", "step_ms"]

    def test_deterministic_apart_from_timing(self, capsys, tmp_path):
        t = PosteriorTensor(np.random.default_rng(0).dirichlet(np.ones(3), size=(40, 8)))
        write_tensor(t, tmp_path / "t.ptf")
        argv = ["--tensor", tmp_path / "t.ptf", "--b", 5, "--exact-limit", 27, "--m", 300, "--seed", 12]
        docs = [acquire_doc(capsys, *argv)[0] for _ in range(2)]
        for d in docs:
            d.pop("step_ms")
        assert json.dumps(docs[0]) == json.dumps(docs[1])

    def test_scores_match_library(self, capsys):
        doc, _ = acquire_doc(capsys, "--tensor", SMALL, "--b", 2)
        t = golden_tensors()["small_3x2x2"]
        assert doc["scores"][-1] == pytest.approx(batchbald_score(t, doc["acquired"]).score, abs=1e-12)


class TestSimulate:
    def test_zero_rounds(self, capsys, tmp_path):
        code, _, _ = run(capsys, "simulate", "--strategies", "random", "--rounds", 0, "--trials", 1, "--out", tmp_path)
        assert code == 0
        lines = (tmp_path / "trace_random.csv").read_text().splitlines()
        assert lines[0] == "round,train_size,test_accuracy,acquired_indices,label_entropy_nats,strategy,seed"
        assert len(lines) == 2 and lines[1].startswith("0,0,")

    def test_summary_ordering(self, capsys, tmp_path):
        code, _, _ = run(capsys, "simulate", "--trials", 5, "--out", tmp_path)
        assert code == 0
        summary = json.loads((tmp_path / "summary.json").read_text())["strategies"]
        acc = {s: v["median_final_accuracy"] for s, v in summary.items()}
        assert acc["batchbald"] >= acc["random"] >= acc["bald"]
        for s in ("batchbald", "random", "bald"):
            assert (tmp_path / f"trace_{s}.csv").read_text().count("\n") == 1 + 5 * 11

    def test_fixed_seed_reproducible(self, capsys, tmp_path):
        argv = ["simulate", "--strategies", "batchbald,bald", "--rounds", 3, "--trials", 2, "--seed", 77]
        assert run(capsys, *argv, "--out", tmp_path / "a")[0] == 0
        assert run(capsys, *argv, "--out", tmp_path / "b", "--jobs", 2)[0] == 0
        for s in ("batchbald", "bald"):
            assert (tmp_path / "a" / f"trace_{s}.csv").read_bytes() == (tmp_path / "b" / f"trace_{s}.csv").read_bytes()

    def test_budget_violation(self, capsys, tmp_path):
        code, _, err = run(capsys, "simulate", "--repetitions", 0, "--prototypes", 1, "--rounds", 10, "--out", tmp_path)
        assert code == 4
        assert "exceeds" in err


class TestVerify:
    def test_trials_flag(self, capsys, tmp_path):
        code, out, _ = run(capsys, "verify", "--trials", 10, "--out", tmp_path / "r.json")
        assert code == 0
        report = json.loads((tmp_path / "r.json").read_text())
        assert report["passed"]
        assert {p["name"] for p in report["properties"]} == set(verify.CHECKS)
        assert all(p["trials"] == 10 for p in report["properties"])
        assert out.count("PASS") == len(verify.CHECKS)

    def test_injected_fault(self, capsys, tmp_path, monkeypatch):
        real = verify.batchbald_score

        def inflated(t, subset, *a, **kw):
            res = real(t, subset, *a, **kw)
            bonus = 0.5 if len(subset) > 1 else 0.0
            return type(res)(res.joint_entropy + bonus, res.conditional_entropy, res.score + bonus, res.mode)

        monkeypatch.setattr(verify, "batchbald_score", inflated)
        code, out, _ = run(capsys, "verify", "--trials", 10, "--only", "bald_upper_bound", "--out", tmp_path / "r.json")
        assert code == 1
        assert "FAIL bald_upper_bound" in out
        ce = json.loads((tmp_path / "counterexample_bald_upper_bound.json").read_text())
        t = PosteriorTensor(ce["probs"])
        assert t.probs.ndim == 3 and "subset" in ce


class TestBench:
    def test_sweep_rows(self, capsys):
        code, out, _ = run(capsys, "bench", "--pool-sizes", "100,200", "--k", 8, "--m", 100, "--repeats", 1)
        assert code == 0
        lines = out.splitlines()
        assert lines[0] == "n_pool,b,c,k,m,mode,ms"
        assert [l.split(",")[0] for l in lines[1:]] == ["100", "200"]

    def test_pool_smaller_than_b(self, capsys):
        assert run(capsys, "bench", "--pool-sizes", "2", "--b", 4)[0] == 4
