import json

import pytest

from app import EXIT_ERROR, EXIT_OK, EXIT_VIOLATION, main, parse_tau_sweep
from bukhgeim.config import OUTPUT_ENV
from bukhgeim.errors import ParameterError
from bukhgeim.forward import assemble_dn
from bukhgeim.grid import zero_potential
from bukhgeim.io_formats import write_dn


@pytest.fixture(autouse=True)
def no_output_env(monkeypatch):
    monkeypatch.delenv(OUTPUT_ENV, raising=False)


@pytest.fixture
def coarse_config(tmp_path):
    path = tmp_path / "coarse.json"
    path.write_text(json.dumps({
        "grid": {"resolution": 32},
        "stability": {"epsilons": [1e-1, 1e-2, 1e-3]},
    }))
    return path


def _manifest(out):
    return json.loads((out / "run_manifest.json").read_text())


def test_parse_tau_sweep():
    assert parse_tau_sweep("1:4:3") == pytest.approx([1.0, 2.0, 4.0])


@pytest.mark.parametrize("text", ["1:4", "a:b:3", "4:1:3", "0:1:3", "1:4:1"])
def test_parse_tau_sweep_rejects(text):
    with pytest.raises(ParameterError):
        parse_tau_sweep(text)


def test_missing_config_file(tmp_path):
    assert main(["forward", "--config", str(tmp_path / "none.json"), "--out", str(tmp_path)]) == EXIT_ERROR


def test_print_config(tmp_path, capsys):
    code = main(["cgo", "--print-config", "--out", str(tmp_path / "o")])
    resolved = json.loads(capsys.readouterr().out)
    assert code == EXIT_OK
    assert resolved["output"]["directory"] == str(tmp_path / "o")
    assert not (tmp_path / "o").exists()


def test_forward_run(tmp_path, coarse_config):
    ## Given
    out = tmp_path / "out"

    ## When
    code = main(["forward", "--config", str(coarse_config), "--out", str(out), "--workers", "1",
                 "--emit-dn", "bump.dnmp"])

    ## Then
    assert code == EXIT_OK
    manifest = _manifest(out)
    assert manifest["passed"] and manifest["subcommand"] == "forward"
    assert manifest["config_path"] == str(coarse_config)
    assert len(manifest["config_hash"]) == 64
    for name in ("config.resolved.json", "forward.csv", "forward_summary.json", "forward_report.html", "bump.dnmp"):
        assert (out / name).exists(), name
    assert str((out / "bump.dnmp").resolve()) in manifest["outputs"]
    assert set(manifest["versions"]) >= {"python", "numpy", "bukhgeim"}


def test_failed_check_exits_with_violation(tmp_path):
    ## Given
    config = tmp_path / "strict.json"
    config.write_text(json.dumps({
        "grid": {"resolution": 32},
        "stability": {"epsilons": [1e-1, 1e-2, 1e-3]},
        "tolerances": {"stability_factor": 1e-6},
        "output": {"report": False},
    }))

    ## When
    code = main(["stability", "--config", str(config), "--out", str(tmp_path), "--workers", "1"])

    ## Then
    assert code == EXIT_VIOLATION
    manifest = _manifest(tmp_path)
    assert not manifest["passed"]
    assert "stability.bound_holds" in manifest["failed_checks"]


def test_dn_grid_mismatch(tmp_path, grid32):
    path = write_dn(tmp_path / "coarse.dnmp", assemble_dn(zero_potential(grid32)))
    code = main(["recon", "--dn", str(path), "--dn-ref", str(path), "--out", str(tmp_path), "--workers", "1"])
    assert code == EXIT_ERROR


def test_emit_dn_outside_output_directory(tmp_path, coarse_config):
    out = tmp_path / "out"
    code = main(["forward", "--config", str(coarse_config), "--out", str(out), "--workers", "1",
                 "--emit-dn", "../outside.dnmp"])
    assert code == EXIT_ERROR
    assert not (tmp_path / "outside.dnmp").exists()


@pytest.mark.parametrize(
    "extra",
    [["--dn", "only-one.dnmp"], ["--tau", "-1"]],
)
def test_recon_rejects_bad_arguments(tmp_path, coarse_config, extra):
    code = main(["recon", "--config", str(coarse_config), "--out", str(tmp_path), *extra])
    assert code == EXIT_ERROR


def test_tau_options_are_exclusive(tmp_path):
    with pytest.raises(SystemExit):
        main(["recon", "--tau", "1", "--tau-sweep", "1:4:3", "--out", str(tmp_path)])
