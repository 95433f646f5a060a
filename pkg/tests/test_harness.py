import json
import os

import numpy as np
import pytest

from tidal_perturbation import cli, harness
from tidal_perturbation.config import ExperimentConfig, Mode, PsiSpec, load_config
from tidal_perturbation.errors import DomainError
from tidal_perturbation.spectral import TorusGrid

SMALL = {"grid": {"nx": 16, "ny": 16}, "T": 0.02, "eps": [0.4, 0.2, 0.1], "output_stride": 5}


def write_config(tmp_path, **changes):
    data = dict(SMALL, **changes)
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(data))
    return str(path)


def tree(root):
    out = {}
    for dirpath, _, files in os.walk(root):
        for f in files:
            p = os.path.join(dirpath, f)
            with open(p, "rb") as fh:
                out[os.path.relpath(p, root)] = fh.read()
    return out


def test_unknown_keys_are_rejected(tmp_path):
    with pytest.raises(DomainError, match="invalid config"):
        load_config(write_config(tmp_path, resolution=64))
    with pytest.raises(DomainError):
        load_config(write_config(tmp_path, grid={"nx": 16, "nz": 4}))


@pytest.mark.parametrize("eps", [[0.1, 0.2], [0.1, 1.0], [], [0.1, 0.1]])
def test_eps_list_validation(tmp_path, eps):
    with pytest.raises(DomainError):
        load_config(write_config(tmp_path, eps=eps))


def test_missing_config_file(tmp_path):
    with pytest.raises(DomainError):
        load_config(str(tmp_path / "nope.json"))


def test_test_function_spec_needs_one_form():
    with pytest.raises(ValueError):
        PsiSpec()
    with pytest.raises(ValueError):
        PsiSpec(phi=[Mode(a=1.0)], psi=([Mode(a=1.0)], [], []))


def test_constraint_violating_test_function_is_rejected():
    g = TorusGrid(16, 16)
    spec = PsiSpec(psi=([], [Mode(a=1.0)], []))  # Psi = (0, 1, 0)
    with pytest.raises(DomainError, match="constraint form"):
        harness.build_test_function(g, spec, 1.0)
    ok = PsiSpec(psi=([Mode(a=1.0, kx=1)], [], [Mode(b=-1.0, kx=1)]))  # phi = cos x1
    assert harness.build_test_function(g, ok, 1.0).base.shape == (3, 16, 16)


def test_phi_form_expands_to_constraint_form():
    g = TorusGrid(16, 16)
    X1, X2 = g.mesh
    psi = harness.build_test_function(g, PsiSpec(phi=[Mode(b=1.0, ky=1)]), 2.0)
    assert np.allclose(psi.base[0], np.sin(X2), atol=1e-14)
    assert np.allclose(psi.base[1], -np.cos(X2), atol=1e-14)
    assert np.allclose(psi.base[2], 0.0, atol=1e-14)
    assert np.allclose(psi(1.0), psi.base) and np.all(psi(0.0) == 0.0)


def test_relative_errors_and_slack():
    assert harness.relative_errors([1.0, -2.0], [1.0, -2.0]) == [0.0, 0.0]
    assert harness.relative_errors([1.1], [1.0]) == [pytest.approx(0.1)]
    assert harness.decreasing_with_slack([0.4, 0.2, 0.21, 0.1])
    assert not harness.decreasing_with_slack([0.2, 0.23])


def test_self_comparison_has_zero_error():
    cfg = ExperimentConfig(**SMALL)
    members = [harness._sweep_member((cfg, e)) for e in cfg.eps]
    report = harness.build_report(cfg, members, {"curl": members[-1]["pairings"]})
    assert report["variants"]["curl"]["final_max_error"] == 0.0
    assert report["complete"] and report["best_variant"] == "curl"


def test_report_marks_failed_members():
    cfg = ExperimentConfig(**SMALL)
    good = {"eps": 0.2, "status": "done", "pairings": [1.0], "h4_initial": 1.0, "h4_sup": 1.0}
    bad = {"eps": 0.1, "status": "failed", "pairings": None, "h4_initial": None, "h4_sup": None}
    report = harness.build_report(cfg, [good, bad], {"curl": [2.0]})
    assert not report["complete"]
    assert report["variants"]["curl"]["relative_errors"] == [[0.5], None]


def test_cli_scales_tables(capsys):
    assert cli.main(["scales", "--regime", "shelf"]) == 0
    lines = capsys.readouterr().out.splitlines()
    eps_row = next(line for line in lines if line.startswith("eps "))
    assert 1 / 250 <= float(eps_row.split()[2]) <= 1 / 150
    assert cli.main(["scales", "--regime", "zone"]) == 0
    row = next(line for line in capsys.readouterr().out.splitlines() if line.startswith("pressure"))
    assert row.split()[4:8] == ["0.244502", "-2", "0.2", "eps^-2"]
    assert cli.main(["scales", "--regime", "layer", "--weather", "storm"]) == 0
    row = next(line for line in capsys.readouterr().out.splitlines() if line.startswith("pressure"))
    assert row.split()[5] == "-1" and "0.4 eps^-1" in row


def test_cli_scales_override(capsys):
    assert cli.main(["scales", "--set", "omega_tide=0.0833333333333333333"]) == 0
    assert "eps=0.005\n" in capsys.readouterr().out.splitlines(keepends=True)[0]
    assert cli.main(["scales", "--set", "omega_tide"]) == cli.EXIT_CONFIG
    assert cli.main(["scales", "--set", "bogus=1"]) == cli.EXIT_CONFIG


def test_cli_config_errors_exit_2(tmp_path):
    assert cli.main(["run-full", "--config", write_config(tmp_path, extra=1)]) == cli.EXIT_CONFIG
    assert cli.main(["run-full", "--config", write_config(tmp_path)]) == cli.EXIT_CONFIG  # several eps
    bad = write_config(tmp_path, eps=[0.2, 0.1], test_functions=[{"psi": [[], [{"a": 1.0}], []]}])
    assert cli.main(["compare", "--config", bad, "--out", str(tmp_path / "o")]) == cli.EXIT_CONFIG


def test_cli_abort_and_partial_exit_codes(tmp_path, monkeypatch):
    class Aborted:
        steps, aborted, message = 3, True, "non-finite"

        def summary(self):
            return {"h4_sup": 1.0}

    monkeypatch.setattr(harness, "run_full", lambda cfg, eps: ("dir", Aborted()))
    assert cli.main(["run-full", "--config", write_config(tmp_path), "--eps", "0.1"]) == cli.EXIT_ABORT
    partial = {"variants": {}, "eps": [], "best_variant": None, "complete": False}
    monkeypatch.setattr(harness, "compare", lambda cfg: ("dir", partial))
    assert cli.main(["compare", "--config", write_config(tmp_path)]) == cli.EXIT_PARTIAL


def test_cli_run_full_writes_outputs(tmp_path, capsys):
    out = tmp_path / "runs"
    assert cli.main(["run-full", "--config", write_config(tmp_path), "--eps", "0.2", "--out", str(out)]) == 0
    (run,) = os.listdir(out)
    assert run.startswith("full-")
    files = set(os.listdir(out / run))
    assert {"config.json", "diagnostics.csv", "summary.json", "snap_00000.tsf"} <= files
    assert json.loads((out / run / "summary.json").read_text())["eps"] == 0.2


SUBCOMMANDS = [
    ["scales", "--regime", "zone", "--out", "out"],
    ["run-full", "--config", "cfg.json", "--eps", "0.2", "--out", "out"],
    ["run-limit", "--config", "cfg.json", "--init-variant", "literal", "--out", "out"],
    ["compare", "--config", "cfg.json", "--out", "out"],
    ["residual", "--config", "cfg.json", "--regime", "layer", "--out", "out"],
]


@pytest.mark.parametrize("argv", SUBCOMMANDS, ids=[a[0] for a in SUBCOMMANDS])
def test_subcommands_are_deterministic(tmp_path, monkeypatch, capsys, argv):
    results = []
    for k in range(2):
        work = tmp_path / str(k)
        work.mkdir()
        write_config(work)
        monkeypatch.chdir(work)
        assert cli.main(argv) == 0
        results.append((capsys.readouterr().out, tree(work / "out")))
    assert results[0][1] and results[0] == results[1]


def test_manufactured_subcommand(tmp_path, monkeypatch, capsys):
    monkeypatch.setattr(harness, "manufactured_table",
                        lambda: [{"n": 16, "error": 1e-4}, {"n": 32, "error": 1e-10}])
    assert cli.main(["run-limit", "--config", write_config(tmp_path), "--manufactured",
                     "--out", str(tmp_path / "o")]) == 0
    (run,) = os.listdir(tmp_path / "o")
    assert (tmp_path / "o" / run / "mms.csv").read_text().splitlines()[0] == "n,error"
