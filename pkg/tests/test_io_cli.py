import json

import numpy as np
import pytest

from lpbox import io
from lpbox.admm import AdmmConfig, IterationRecord
from lpbox.cli import ExperimentConfig, main, run_experiment
from lpbox.correlation import islr_db, pslr_db
from lpbox.sequences import ConfigError, ShiftSpec

BARKER7 = np.array([1, 1, 1, -1, -1, 1, -1], float)


def test_sequence_file_roundtrip(tmp_path):
    x = np.array([[1, -1], [-1, -1], [1, 1.0]])
    p = io.write_sequence_file(x, tmp_path / "s.txt")
    assert p.read_text().splitlines() == ["# N=3 M=2", "+1 -1 +1", "-1 -1 +1"]
    np.testing.assert_array_equal(io.read_sequence_file(p).data, x)


@pytest.mark.parametrize("text", ["+1 -1\n", "# N=2 M=2\n+1 -1\n", "# N=3 M=1\n+1 -1\n",
                                  "# N=2 M=1\n+1 0\n", "# N=two M=1\n+1 -1\n"])
def test_sequence_file_rejects(tmp_path, text):
    p = tmp_path / "bad.txt"
    p.write_text(text)
    with pytest.raises(ConfigError):
        io.read_sequence_file(p)


def test_correlation_csv_barker(tmp_path):
    p = io.emit_correlation_csv(BARKER7, ShiftSpec(7, [(1, 6)]), tmp_path / "c.csv")
    lines = p.read_text().splitlines()
    assert lines[0] == "i,j,lag,corr,level_db"
    assert lines[1] == "1,1,0,7,0.0"
    i, j, lag, corr, level = lines[3].split(",")
    assert (i, j, lag) == ("1", "1", "2") and abs(int(corr)) == 1
    assert float(level) == pytest.approx(20 * np.log10(1 / 7))
    # zero correlations leave the level empty
    assert lines[2].endswith(",0,")


def test_correlation_csv_row_count_and_order(tmp_path):
    x = np.random.default_rng(0).choice([-1.0, 1.0], size=(9, 2))
    p = io.emit_correlation_csv(x, ShiftSpec(9, [(0, 8)], "periodic"), tmp_path / "c.csv")
    rows = p.read_text().splitlines()[1:]
    assert len(rows) == 4 * 9
    keys = [tuple(int(v) for v in r.split(",")[:3]) for r in rows]
    assert keys == sorted(keys)


def test_trace_csv(tmp_path):
    recs = [IterationRecord(k, 1.0 / k, 2.0, 3.0, 0.1, 0.2, 5.0 - k, 1e-3) for k in (1, 2)]
    p = io.emit_trace(recs, tmp_path / "t.csv")
    assert p.read_text().splitlines()[0] == "k,objective,isl,psl,R,D,lagrangian,violation"
    rows = io.read_trace(p)
    assert rows[1]["objective"] == 0.5 and rows[1]["lagrangian"] == 3.0


def test_config_file_needs_schema_version(tmp_path):
    p = tmp_path / "c.json"
    p.write_text(json.dumps({"n": 8}))
    with pytest.raises(ConfigError):
        io.load_config_file(p)
    p.write_text(json.dumps({"schema_version": 1, "n": 8}))
    assert io.load_config_file(p)["n"] == 8


def test_experiment_config_validation():
    with pytest.raises(ConfigError, match="intervals"):
        ExperimentConfig(n=8, intervals="1:N+3")
    with pytest.raises(ConfigError, match="emit"):
        ExperimentConfig(n=8, emit=("plots",))
    with pytest.raises(ConfigError, match="bogus"):
        ExperimentConfig.from_dict({"n": 8, "bogus": 1})
    cfg = ExperimentConfig(n=8, seeds=[4, 9])
    assert cfg.trials == 2 and cfg.trial_seeds() == [4, 9]


def _small(tmp_path, **kw):
    base = dict(n=12, intervals="1:N-1", trials=2, seed=3, output_dir=str(tmp_path),
                solver=AdmmConfig(max_iters=30))
    base.update(kw)
    return ExperimentConfig(**base)


def test_run_experiment_outputs(tmp_path):
    code, summary = run_experiment(_small(tmp_path, mode="periodic"))
    assert code == 0
    for seed in (3, 4):
        d = tmp_path / f"trial_{seed}"
        for name in ("report.json", "trace.csv", "correlation_init.csv",
                     "correlation_final.csv", "sequence.txt"):
            assert (d / name).exists()
    assert "benchmark_2sqrtN" in summary and "oracle" in summary
    assert all(r["oracle_gap"] >= 0 for r in summary["trials"])
    on_disk = json.loads((tmp_path / "summary.json").read_text())
    assert on_disk["aggregate"]["pslr_final_db"]["mean"] == summary["aggregate"]["pslr_final_db"]["mean"]


def test_summary_recomputes_from_correlation_csv(tmp_path):
    cfg = _small(tmp_path, n=20, intervals="2:5,9:N-3")
    _, summary = run_experiment(cfg)
    s = cfg.shift()
    for row in summary["trials"]:
        table = io.read_correlation_csv(tmp_path / f"trial_{row['seed']}" / "correlation_final.csv")
        side = np.array([table[(0, 0, int(l))] for l in s.lags])
        psl = np.abs(side).max()
        assert 10 * np.log10(psl ** 2 / 400) == pytest.approx(row["pslr_final_db"], abs=1e-9)
        assert 10 * np.log10(side @ side / 400) == pytest.approx(row["islr_final_db"], abs=1e-9)
        x = io.read_sequence_file(tmp_path / f"trial_{row['seed']}" / "sequence.txt")
        assert pslr_db(x, s) == row["pslr_final_db"] and islr_db(x, s) == row["islr_final_db"]


def test_run_experiment_is_byte_identical(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    run_experiment(_small(a))
    run_experiment(_small(b, workers=2, threads=3))
    for f in sorted(p.relative_to(a) for p in a.rglob("*") if p.is_file()):
        assert (a / f).read_bytes() == (b / f).read_bytes(), f


def test_cli_design_and_eval(tmp_path, capsys):
    out = tmp_path / "run"
    code = main(["design", "--n", "10", "--seed", "1", "--trials", "2", "--out", str(out),
                 "--max-iters", "20", "--q", "6"])
    assert code == 0
    report = json.loads((out / "trial_1" / "report.json").read_text())
    assert report["config"]["q"] == 6 and report["iterations"] == 20
    capsys.readouterr()
    assert main(["eval", str(out / "trial_1" / "sequence.txt"), "--csv", str(tmp_path / "c.csv")]) == 0
    metrics = json.loads(capsys.readouterr().out)
    assert metrics["psl"] == report["metrics_final"]["psl"]
    assert (tmp_path / "c.csv").exists()


def test_cli_design_from_config_file(tmp_path):
    cfg = {"schema_version": 1, "n": 9, "mode": "periodic", "intervals": "1:4",
           "solver": {"max_iters": 5, "sigma": 0.05}}
    p = tmp_path / "exp.json"
    p.write_text(json.dumps(cfg))
    out = tmp_path / "run"
    assert main(["design", "--config", str(p), "--seed", "0", "--trials", "1", "--out", str(out)]) == 0
    report = json.loads((out / "trial_0" / "report.json").read_text())
    assert report["mode"] == "periodic" and report["config"]["sigma"] == 0.05
    assert report["intervals"] == [[1, 4]]


def test_cli_requires_design_flags():
    with pytest.raises(SystemExit) as e:
        main(["design", "--n", "10", "--trials", "1", "--out", "x"])
    assert e.value.code == 2


def test_cli_exit_codes(tmp_path):
    assert main(["design", "--n", "10", "--seed", "0", "--trials", "1", "--out",
                 str(tmp_path / "r"), "--intervals", "0:N"]) == 2
    assert main(["design", "--n", "10", "--seed", "0", "--trials", "1", "--out",
                 str(tmp_path / "r"), "--sigma", "-1"]) == 2
    assert main(["eval", str(tmp_path / "missing.txt")]) == 4
    blocker = tmp_path / "file"
    blocker.write_text("")
    assert main(["design", "--n", "10", "--seed", "0", "--trials", "1",
                 "--out", str(blocker / "sub")]) == 4
    assert main(["msequence", "--degree", "3", "--taps", "0b1111", "--out",
                 str(tmp_path / "m.txt")]) == 2


def test_cli_divergence_exit_code(tmp_path, monkeypatch):
    from lpbox import admm

    def boom(state, *a, **k):
        z, zh = real(state, *a, **k)
        z[:] = np.inf
        return z, zh

    real = admm.z_update
    monkeypatch.setattr(admm, "z_update", boom)
    out = tmp_path / "r"
    assert main(["design", "--n", "10", "--seed", "0", "--trials", "1", "--out", str(out)]) == 3
    assert json.loads((out / "trial_0" / "report.json").read_text())["status"] == "diverged"


def test_cli_oracle_and_msequence(tmp_path, capsys):
    assert main(["oracle", "--n", "7", "--out", str(tmp_path / "o.txt")]) == 0
    res = json.loads(capsys.readouterr().out)
    assert res["value"] == 1 and res["ties"] == 4
    assert main(["msequence", "--degree", "5", "--out", str(tmp_path / "m.txt")]) == 0
    x = io.read_sequence_file(tmp_path / "m.txt")
    assert x.n_len == 31
