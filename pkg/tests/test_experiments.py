import numpy as np
import pytest

from contacthj.cli import main
from contacthj.experiments import (ExperimentConfig, lyapunov_csv_rows,
                                   run_lyapunov, run_table1,
                                   run_uniqueness_sweep, sweep_csv_rows,
                                   table1_csv_rows, write_csv)
from contacthj.hamiltonians import example3
from contacthj.semigroup import GridFunction, StepScheme


def test_config_round_trip_and_hash():
    cfg = ExperimentConfig(model="example3", a=1.0, b=0.5, n=64, dt=5e-3)
    again = ExperimentConfig.from_text(cfg.to_text())
    assert again == cfg
    assert again.hash() == cfg.hash()
    bumped = cfg.updated(b=0.75)
    assert bumped.b == 0.75
    assert bumped.hash() != cfg.hash()
    # None entries are "not provided", they must not reset fields
    assert cfg.updated(a=None, T=3.0).a == 1.0


def test_config_rejects_unknown_keys():
    with pytest.raises(ValueError):
        ExperimentConfig.from_text("model=example2\nbogus=1\n")
    with pytest.raises(ValueError):
        ExperimentConfig().updated(bogus=1)


def test_config_from_file_skips_comments(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text("# comment line\nmodel=example2\n\nn=256\ndt=0.001\n")
    cfg = ExperimentConfig.from_file(path)
    assert cfg.model == "example2"
    assert cfg.n == 256
    assert cfg.dt == 0.001
    assert cfg.b == 2.0  # untouched default


def test_write_csv_deterministic(tmp_path):
    rows = [(0, 0.1, "dirac", True), (1, 2.0 / 3.0, "periodic", False)]
    f1, f2 = tmp_path / "a.csv", tmp_path / "b.csv"
    write_csv(f1, ["i", "v", "kind", "flag"], rows, "deadbeef")
    write_csv(f2, ["i", "v", "kind", "flag"], rows, "deadbeef")
    b1, b2 = f1.read_bytes(), f2.read_bytes()
    assert b1 == b2
    text = b1.decode()
    assert text.startswith("# config_hash=deadbeef\n")
    assert "0.6666666666666666" in text  # repr floats, not str rounding
    assert "true" in text and "false" in text


def test_lyapunov_decay_rate_matches_coupling():
    model = example3(0.0, 2.0)
    scheme = StepScheme.for_model(model, dt=2e-3)
    ref = GridFunction.constant(64, 0.0)
    run = run_lyapunov(model, scheme, ref, delta=0.01, T=6.0)
    assert not run.grew
    # transversal coefficient is sin(x) + 2, slowest contraction rate 1
    assert -1.15 < run.rate < -0.85
    assert run.d_max[-1] < 1e-3
    header, rows = lyapunov_csv_rows(run)
    assert len(rows) == len(run.times)
    assert all(len(r) == len(header) for r in rows)


def test_lyapunov_growth_stops_early():
    model = example3(0.0, -1.0)
    scheme = StepScheme.for_model(model, dt=2e-3)
    ref = GridFunction.constant(64, 0.0)
    run = run_lyapunov(model, scheme, ref, delta=0.01, T=12.0)
    assert run.grew
    assert run.times[-1] < 5.0  # excursion cap reached long before T
    assert run.rate > 1.5  # fastest repulsion rate is 2


def test_lyapunov_growth_is_asymmetric():
    # The min-coupling favors downward excursions, so the -delta branch
    # leads; over long horizons it caps the +delta branch outright, but
    # that takes tens of time units, so here we only pin the asymmetry.
    model = example3(0.0, 0.5)
    scheme = StepScheme.for_model(model, dt=2e-3)
    ref = GridFunction.constant(64, 0.0)
    run = run_lyapunov(model, scheme, ref, delta=0.01, T=8.0)
    assert run.grew
    assert run.d_minus[-1] > 1.5 * run.d_plus[-1]
    assert 0.3 < run.rate < 0.7


def test_table1_subset_matches_expected():
    res = run_table1(cells=[(0.0, 2.0), (1.0, -1.0)], lyap_T=8.0)
    assert res.all_match
    stable, unstable = res.cells
    assert stable.verdict == "asymptotically_stable"
    assert stable.unique
    assert stable.route == "hu_positive_on_level_set"
    assert stable.kinds == "dirac"
    assert stable.rate_consistent
    assert unstable.verdict == "unstable"
    assert not unstable.unique
    assert unstable.route == "inconclusive"
    assert unstable.kinds == "periodic"
    assert unstable.lyapunov_rate > 0.5
    header, rows = table1_csv_rows(res)
    assert len(rows) == 2
    assert all(len(r) == len(header) for r in rows)


def test_uniqueness_sweep_single_cluster():
    res = run_uniqueness_sweep(n_initials=4, n=64, dt=5e-3, seed=1)
    assert res.n_converged == 4
    assert res.n_clusters == 1
    assert res.labels == [0, 0, 0, 0]
    assert res.cluster_sup_norms[0] < 5e-3  # the limit is the zero profile
    assert res.max_spread < 5e-3
    assert "never prove uniqueness" in res.caveat
    header, rows = sweep_csv_rows(res)
    assert len(rows) == 4
    assert all(len(r) == len(header) for r in rows)


def test_cli_evolve_deterministic_csv(tmp_path, capsys):
    f1, f2 = tmp_path / "r1.csv", tmp_path / "r2.csv"
    base = ["evolve", "--model", "example3", "--a", "0", "--b", "2",
            "--n", "64", "--dt", "0.005", "--T", "0.2", "--u0", "1.0"]
    assert main(base + ["--out", str(f1)]) == 0
    assert main(base + ["--out", str(f2)]) == 0
    capsys.readouterr()
    assert f1.read_bytes() == f2.read_bytes()
    lines = f1.read_text().splitlines()
    assert lines[0].startswith("# config_hash=")
    assert lines[1] == "time,sup_norm,sup_distance_to_start"
    assert len(lines) >= 4


def test_cli_flow_writes_orbit(tmp_path, capsys):
    out = tmp_path / "orbit.csv"
    rc = main(["flow", "--model", "example2", "--x0", "1.0", "--p0", "0.5",
               "--u0", "0.2", "--T", "0.5", "--dt", "0.001",
               "--out", str(out)])
    assert rc == 0
    text = capsys.readouterr().out
    assert "end=(" in text
    lines = out.read_text().splitlines()
    assert lines[1] == "time,x,p,u"
    assert len(lines) == 2 + 501  # hash line, header, 500 steps + initial


def test_cli_config_file_with_overrides(tmp_path, capsys):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("model=example3\na=0.0\nb=2.0\nn=64\ndt=0.005\nu0=1.0\n")
    rc = main(["evolve", "--config", str(cfg), "--T", "0.1"])
    assert rc == 0
    assert "T=0.1" in capsys.readouterr().out


def test_cli_error_exit_code(tmp_path, capsys):
    assert main(["flow", "--model", "not_a_model", "--T", "0.1"]) == 1
    assert "error:" in capsys.readouterr().err
    # malformed config file also lands on the error path
    bad = tmp_path / "bad.cfg"
    bad.write_text("bogus=1\n")
    assert main(["flow", "--config", str(bad)]) == 1


def test_cli_uniqueness_sweep(tmp_path, capsys):
    out = tmp_path / "sweep.csv"
    rc = main(["uniqueness", "--model", "example2", "--sweep", "2",
               "--n", "64", "--dt", "0.005", "--out", str(out)])
    assert rc == 0
    text = capsys.readouterr().out
    assert "1 cluster(s)" in text
    assert "no counterexample found" in text
    lines = out.read_text().splitlines()
    assert lines[1] == "run,converged,cluster,residual"
    assert len(lines) == 4
