import json
import subprocess
import sys

import numpy as np
import pytest

from coherent_ratchet.cli import EXIT_CONFIG, EXIT_NUMERICAL, EXIT_OK, main
from coherent_ratchet.io import read_bundle
from coherent_ratchet.ratchet import exponential_table


def test_icc_prints_csv(capsys):
    assert main(["icc"]) == EXIT_OK
    out = capsys.readouterr().out
    assert "# singular_values" in out and "34.37937" in out


def test_dimer_scan_to_file(tmp_path):
    out = tmp_path / "scan.csv"
    assert main(["dimer-scan", "--steps", "4", "--temp", "77", "--out", str(out)]) == EXIT_OK
    b = read_bundle(out)
    assert len(b.tables["advantage"].rows) == 16
    assert b.metadata["config"]["params"]["temperature"] == 77.0


def test_propagate_columns(tmp_path):
    cfg = tmp_path / "c.yaml"
    cfg.write_text("task: propagate\nsystem: {source: fmo, sites: [1, 2]}\n"
                   "params: {coherences: [[1, 2]]}\n")
    out = tmp_path / "p.csv"
    code = main(["propagate", "--config", str(cfg), "--tfinal", "10", "--depth", "2", "--matsubara", "0",
                 "--out", str(out)])
    assert code == EXIT_OK
    header = out.read_text().splitlines()[0]
    assert header == "t_fs,p1,p2,re_rho12,im_rho12"


def test_config_errors_exit_2(tmp_path, capsys):
    assert main(["propagate", "--temp", "-1"]) == EXIT_CONFIG
    bad = tmp_path / "b.yaml"
    bad.write_text("task: propagate\nunknown: 1\n")
    assert main(["propagate", "--config", str(bad)]) == EXIT_CONFIG
    assert main(["icc", "--config", str(bad)]) == EXIT_CONFIG
    assert main(["ratchet", "walk", "--rate-file", str(tmp_path / "none.csv")]) == EXIT_CONFIG
    assert main(["icc", "--donor", "1,2", "--acceptor", "2,3"]) == EXIT_CONFIG
    assert "configuration error" in capsys.readouterr().err


def test_numerical_failure_exit_3(tmp_path):
    # a lambda = 0 scan can never complete a transfer
    assert main(["ratchet", "scan", "--lambda", "0", "--values", "50"]) == EXIT_NUMERICAL
    # a hugely unstable step blows up the integrator
    assert main(["propagate", "--dt", "200", "--tfinal", "400000", "--depth", "2",
                 "--matsubara", "0"]) == EXIT_NUMERICAL


def test_walk_and_asymptotics(tmp_path):
    rates = tmp_path / "r.csv"
    exponential_table([[0.6, 0.4], [0.45, 0.55]], [[1 / 400, 1 / 300], [1 / 350, 1 / 250]]).save(rates)
    out = tmp_path / "w.csv"
    assert main(["ratchet", "walk", "--rate-file", str(rates), "--traj", "200", "--time", "1e5",
                 "--seed", "7", "--out", str(out)]) == EXIT_OK
    first = (tmp_path / "w.summary.csv").read_bytes()
    assert main(["ratchet", "walk", "--rate-file", str(rates), "--traj", "200", "--time", "1e5",
                 "--seed", "7", "--out", str(out)]) == EXIT_OK
    assert (tmp_path / "w.summary.csv").read_bytes() == first
    assert json.loads((tmp_path / "w.meta.json").read_text())["metadata"]["seed"] == 7
    out2 = tmp_path / "a.csv"
    assert main(["ratchet", "asymptotics", "--rate-file", str(rates), "--out", str(out2)]) == EXIT_OK
    summary = dict((r[0], r[1]) for r in read_bundle(out2).tables["summary"].rows)
    assert summary["drift_hops_per_ps"] == pytest.approx(0.178571, rel=1e-4)


def test_help_per_subcommand():
    for args in (["icc"], ["dimer-scan"], ["ratchet", "walk"], ["fmo-demo"]):
        with pytest.raises(SystemExit) as info:
            main(args + ["--help"])
        assert info.value.code == 0


def test_console_entry_point():
    res = subprocess.run([sys.executable, "-m", "coherent_ratchet.cli", "icc", "--donor", "8",
                          "--acceptor", "1,2,3,4,5,6,7", "--include-site8", "--site8-energy", "0"],
                         capture_output=True, text=True)
    assert res.returncode == 0
    assert "41.10" in res.stdout
