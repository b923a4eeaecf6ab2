import csv
import io
import json
import subprocess
import sys

import numpy as np
import pytest

from meshforge import io as mio
from meshforge.cli import main
from meshforge.learn import Dataset
from meshforge.matcore import Rng, haar_random_unitary, unitarity_error
from meshforge.mesh import forward


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    """Device, exact training/test sets and a learned N=3 model."""
    d = tmp_path_factory.mktemp("cli")
    assert main(["synth-device", "--modes", "3", "--seed", "1", "--out", str(d / "dev.json")]) == 0
    assert main(["gen-train", "--device", str(d / "dev.json"), "--count", "6", "--seed", "2",
                 "--out", str(d / "train.json")]) == 0
    assert main(["gen-train", "--device", str(d / "dev.json"), "--count", "30", "--seed", "3",
                 "--out", str(d / "test.json")]) == 0
    assert main(["learn", "--train", str(d / "train.json"), "--test", str(d / "test.json"), "--epochs", "200",
                 "--seed", "4", "--out-model", str(d / "model.json"), "--out-trace", str(d / "trace.csv")]) == 0
    return d


def test_synth_device_deterministic(tmp_path):
    for name in ("a", "b"):
        assert main(["synth-device", "--modes", "4", "--mixers", "2", "--seed", "9", "--out",
                     str(tmp_path / f"{name}.json")]) == 0
    assert (tmp_path / "a.json").read_bytes() == (tmp_path / "b.json").read_bytes()
    m = mio.load_model(tmp_path / "a.json")
    assert (m.n_modes, m.n_mixers) == (4, 2)


def test_gen_train_exact_pairs(workspace):
    dev = mio.load_model(workspace / "dev.json")
    data = mio.load_dataset(workspace / "train.json")
    assert len(data) == 6
    for p, u in zip(data.phases, data.unitaries):
        assert np.max(np.abs(forward(dev, p) - u)) <= 1e-10


def test_gen_train_noisy_pairs(workspace, tmp_path):
    out = tmp_path / "noisy.json"
    assert main(["gen-train", "--device", str(workspace / "dev.json"), "--count", "5", "--alpha", "0.05",
                 "--out", str(out)]) == 0
    dev = mio.load_model(workspace / "dev.json")
    data = mio.load_dataset(out)
    for p, u in zip(data.phases, data.unitaries):
        assert unitarity_error(u) <= 1e-10
        assert np.max(np.abs(forward(dev, p) - u)) > 1e-6


def test_learn_outputs(workspace):
    model = mio.load_model(workspace / "model.json")
    assert model.is_unitary()
    rows = list(csv.reader((workspace / "trace.csv").read_text().splitlines()))
    assert rows[0] == ["epoch", "j_train", "j_test"]
    assert 2 <= len(rows) <= 202
    assert [int(r[0]) for r in rows[1:]] == list(range(len(rows) - 1))


def test_validate_pass(workspace, tmp_path):
    out = tmp_path / "report.json"
    code = main(["validate", "--model", str(workspace / "model.json"), "--test", str(workspace / "test.json"),
                 "--out", str(out)])
    report = json.loads(out.read_text())
    assert code == 0 and report["passed"] and report["mean_j"] <= 1e-2
    assert len(report["per_sample"]) == 30


def test_validate_fail_exit_code(workspace, tmp_path):
    # two pairs cannot determine an N=3 device
    d = tmp_path
    main(["gen-train", "--device", str(workspace / "dev.json"), "--count", "2", "--seed", "5",
          "--out", str(d / "small.json")])
    main(["learn", "--train", str(d / "small.json"), "--epochs", "100", "--seed", "6",
          "--out-model", str(d / "weak.json")])
    code = main(["validate", "--model", str(d / "weak.json"), "--test", str(workspace / "test.json"),
                 "--out", str(d / "r.json")])
    assert code == 1
    assert not json.loads((d / "r.json").read_text())["passed"]


def test_learn_from_true_device(workspace, tmp_path):
    main(["learn", "--train", str(workspace / "train.json"), "--test", str(workspace / "test.json"),
          "--init", f"file:{workspace / 'dev.json'}", "--epochs", "5",
          "--out-model", str(tmp_path / "m.json"), "--out-trace", str(tmp_path / "t.csv")])
    trace = mio.trace_from_csv((tmp_path / "t.csv").read_text())
    assert trace.j_test[0] <= 1e-20


def test_program(workspace, tmp_path):
    dev = mio.load_model(workspace / "model.json")
    target = forward(dev, Rng(8).phases(dev.phase_shape))
    mio.save_matrix(tmp_path / "target.json", target)
    out = tmp_path / "prog.json"
    assert main(["program", "--model", str(workspace / "model.json"), "--target", str(tmp_path / "target.json"),
                 "--restarts", "3", "--out", str(out)]) == 0
    res = json.loads(out.read_text())
    phases = np.array(res["phases"])
    assert phases.shape == dev.phase_shape
    assert np.all((phases >= 0) & (phases < 2 * np.pi))
    assert res["achieved_j"] <= 1e-6 and len(res["per_restart"]) == 3


def test_program_dimension_mismatch(workspace, tmp_path):
    mio.save_matrix(tmp_path / "t.json", haar_random_unitary(2, Rng(0)))
    assert main(["program", "--model", str(workspace / "model.json"), "--target", str(tmp_path / "t.json")]) == 2


def test_program_non_unitary_target(workspace, tmp_path):
    mio.save_matrix(tmp_path / "t.json", 2 * np.eye(3))
    assert main(["program", "--model", str(workspace / "model.json"), "--target", str(tmp_path / "t.json")]) == 2


@pytest.mark.parametrize("argv", [
    [],
    ["synth-device", "--modes", "0", "--out", "x.json"],
    ["gen-train", "--device", "d.json", "--count", "-1", "--out", "x.json"],
    ["sweep", "--kind", "noise"],
    ["sweep", "--kind", "bogus", "--alphas", "0.1"],
    ["sweep", "--kind", "noise", "--alphas", ","],
    ["learn", "--train", "t.json", "--init", "weird", "--out-model", "m.json"],
])
def test_usage_errors(argv, tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    if argv and argv[0] == "learn":
        mio.save_dataset(tmp_path / "t.json", Dataset(np.zeros((1, 2, 1)), np.ones((1, 1, 1))))
    with pytest.raises(SystemExit) as exc:
        main(argv)
    assert exc.value.code == 2


def test_missing_file(tmp_path):
    assert main(["gen-train", "--device", str(tmp_path / "nope.json"), "--count", "2",
                 "--out", str(tmp_path / "x.json")]) == 2


def test_corrupt_file(tmp_path):
    (tmp_path / "bad.json").write_text("[1, 2")
    assert main(["validate", "--model", str(tmp_path / "bad.json"), "--test", str(tmp_path / "bad.json")]) == 2


def test_sweep_fidelity_csv(tmp_path):
    out = tmp_path / "f.csv"
    assert main(["sweep", "--kind", "fidelity-calibration", "--modes", "2", "--alphas", "0,0.05,0.1",
                 "--samples", "200", "--out", str(out)]) == 0
    rows = list(csv.DictReader(out.read_text().splitlines()))
    assert list(rows[0]) == ["n_modes", "alpha", "samples", "mean_fidelity", "std_fidelity", "mean_j"]
    f = [float(r["mean_fidelity"]) for r in rows]
    assert abs(f[0] - 1) <= 1e-12 and f[0] > f[1] > f[2]


@pytest.mark.parametrize("kind,extra,columns", [
    ("train-size", ["--modes", "2", "--sizes", "3,5"], ["n_modes", "train_size"]),
    ("noise", ["--modes", "2", "--alphas", "0,0.05"], ["n_modes", "train_size", "alpha"]),
    ("apriori", ["--modes", "2", "--alphas", "0.05"], ["n_modes", "apriori_alpha", "train_size"]),
])
def test_sweep_learning_csv(kind, extra, columns, capsys, monkeypatch):
    monkeypatch.setenv("MESHFORGE_THREADS", "1")
    assert main(["sweep", "--kind", kind, *extra, "--reps", "2", "--epochs", "20", "--test-size", "10"]) == 0
    rows = list(csv.reader(io.StringIO(capsys.readouterr().out)))
    assert rows[0] == columns + ["reps", "mean_j_test", "median_j_test", "pass_fraction"]
    for r in rows[1:]:
        assert int(r[len(columns)]) == 2
        assert 0 <= float(r[-1]) <= 1


def test_sweep_deterministic(capsys, monkeypatch):
    monkeypatch.setenv("MESHFORGE_THREADS", "1")
    argv = ["sweep", "--kind", "train-size", "--modes", "2", "--sizes", "3", "--reps", "2", "--epochs", "10",
            "--test-size", "5"]
    main(argv)
    first = capsys.readouterr().out
    main(argv)
    assert capsys.readouterr().out == first


def test_module_entry_point(tmp_path):
    out = tmp_path / "d.json"
    proc = subprocess.run([sys.executable, "-m", "meshforge", "synth-device", "--modes", "2", "--out", str(out)],
                          capture_output=True, text=True)
    assert proc.returncode == 0 and out.exists()
    proc = subprocess.run([sys.executable, "-m", "meshforge", "--help"], capture_output=True, text=True)
    assert proc.returncode == 0 and "program" in proc.stdout
