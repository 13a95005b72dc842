import numpy as np
import pytest

from clusterfit import cli
from clusterfit.complexity import ComplexityReport
from clusterfit.datagen import NoiseSpec, ProcessSpec, generate_dataset
from clusterfit.harness import run_config
from clusterfit.io import (load_config, read_csv, read_dataset, read_net, read_spline,
                           write_complexity, write_dataset, write_net, write_spline)
from clusterfit.relunet import init
from clusterfit.splines import SplineModel
from clusterfit.targets import make_isotropic


def test_dataset_roundtrip(tmp_path):
    f = make_isotropic(2.0, 2, seed=1)
    ds = generate_dataset(f, 4, 3, proc=ProcessSpec("fourier-gp", 0.5),
                          noise=NoiseSpec("gaussian", 0.2), seed=3)
    write_dataset(ds, tmp_path / "d.csv")
    back = read_dataset(tmp_path / "d.csv")
    np.testing.assert_array_equal(back.x, ds.x)
    np.testing.assert_array_equal(back.y, ds.y)
    assert back.meta["target"] == ds.meta["target"]
    assert load_config(tmp_path / "d.toml")["dataset"]["n"] == 4


def test_model_roundtrips(tmp_path):
    net = init(2, 2, 3, 0.5, seed=1, bias="spread")
    write_net(net, tmp_path / "n.txt")
    x = np.random.default_rng(0).random((10, 2))
    np.testing.assert_array_equal(read_net(tmp_path / "n.txt")(x), net(x))
    sp = SplineModel(2, 3, 2, np.random.default_rng(1).normal(size=25), 1.5)
    write_spline(sp, tmp_path / "s.txt")
    np.testing.assert_array_equal(read_spline(tmp_path / "s.txt")(x), sp(x))


def test_complexity_csv(tmp_path):
    rep = ComplexityReport(np.array([0.1, 1.0]), np.array([0.2, 0.3]), np.array([0.01, 0.02]), 0.3, 10)
    write_complexity(rep, tmp_path / "c.csv")
    header, rows = read_csv(tmp_path / "c.csv")
    assert header == ["r", "phi_hat", "stderr"]
    assert rows[-1] == ["fixed_point", "0.3", ""]


def _write(path, text):
    path.write_text(text)
    return path


GENERATE = """
[generate]
n = 6
m = 3
seed = 2
[generate.target]
regime = "isotropic"
s = 2.0
d = 1
"""


def test_generate_only_config(tmp_path):
    cfg = _write(tmp_path / "g.toml", GENERATE)
    out = tmp_path / "out"
    run_config(cfg, out)
    assert sorted(p.name for p in out.iterdir()) == ["dataset.csv", "dataset.toml"]


def test_rate_sweep_outputs(tmp_path):
    cfg = _write(tmp_path / "r.toml", """
[rate_sweep]
n = [10, 20, 40]
m = [2]
replicates = 2
n_test = 1000
[rate_sweep.target]
regime = "isotropic"
s = 2.0
d = 1
[rate_sweep.estimator]
kind = "spline"
k = 3
""")
    out = tmp_path / "out"
    run_config(cfg, out)
    assert sorted(p.suffix for p in out.iterdir() if p.suffix in (".csv", ".svg")) == [".csv", ".svg"]
    header, rows = read_csv(out / "rate_sweep.csv")
    assert header[:4] == ["n", "m", "replicate", "mspe"]
    assert rows[-1][0] == "slope"
    first = (out / "rate_sweep.csv").read_bytes()
    run_config(cfg, out)
    assert (out / "rate_sweep.csv").read_bytes() == first


def test_malformed_config_names_key(tmp_path):
    cfg = _write(tmp_path / "bad.toml", "[generate]\nn = 3\n[generate.target]\nregime = 'isotropic'\n")
    with pytest.raises(ValueError, match="generate.m"):
        run_config(cfg, tmp_path / "o")
    cfg = _write(tmp_path / "bad2.toml", GENERATE.replace("s = 2.0\n", ""))
    with pytest.raises(ValueError, match="target.s"):
        run_config(cfg, tmp_path / "o")
    cfg = _write(tmp_path / "bad3.toml", "[sweep]\nx = 1\n")
    with pytest.raises(ValueError, match="sweep"):
        run_config(cfg, tmp_path / "o")


def test_cli_generate_and_fit(tmp_path, capsys):
    cfg = _write(tmp_path / "g.toml", GENERATE)
    assert cli.main(["generate", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 0
    ds = tmp_path / "o" / "dataset.csv"
    assert cli.main(["fit", "--dataset", str(ds), "--estimator", "spline", "--k", "3",
                     "--out", str(tmp_path / "f")]) == 0
    header, rows = read_csv(tmp_path / "f" / "fit_report.csv")
    assert header[0] == "estimator" and rows[0][0] == "spline" and rows[0][1] == "3"
    assert cli.main(["fit", "--dataset", str(ds), "--estimator", "mlp", "--L", "1", "--W", "3",
                     "--epochs", "20", "--model", "net.txt", "--out", str(tmp_path / "f")]) == 0
    assert read_net(tmp_path / "f" / "net.txt").widths == [3]


def test_cli_gamma(tmp_path, capsys):
    cfg = _write(tmp_path / "t.toml", "[gamma]\ntree = [0.5, 2, [[3.0, 2], [1.0, 1]]]\n")
    assert cli.main(["gamma", "--config", str(cfg)]) == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert lines[0] == "kind,path,s,K,effective_smoothness,ratio"
    assert "gamma,0.25,,,," in lines
    assert lines[-1].startswith("exponent,0.333")


def test_cli_reports_errors(tmp_path, capsys):
    cfg = _write(tmp_path / "bad.toml", "[generate]\nn = 3\n")
    assert cli.main(["generate", "--config", str(cfg), "--out", str(tmp_path)]) == 2
    assert "generate." in capsys.readouterr().err
