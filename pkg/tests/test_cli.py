import json
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from cglequil.cli import main
from cglequil.config import RunConfig, load_config, parse_config, with_overrides
from cglequil.errors import ConfigError
from cglequil.fileio import read_samples_csv

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


def _write(tmp_path, text, name="run.toml"):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


def _run(tmp_path, text, command, *extra):
    out = tmp_path / "out"
    return main([command, "--config", _write(tmp_path, text), "--output", str(out), *extra]), out


# -- configuration -----------------------------------------------------------------


def test_empty_config_defaults():
    cfg = parse_config("")
    assert isinstance(cfg, RunConfig)
    assert cfg.solution.kind == "bobnev" and cfg.solution.n == 3
    assert cfg.transforms == ()


def test_transform_chain_parsed_in_order():
    cfg = parse_config('[[transform]]\nop = "scaling"\na4 = 2.0\n[[transform]]\nop = "pressure_shift"\na6 = 1.0\n')
    assert [t.op for t in cfg.transforms] == ["scaling", "pressure_shift"]


@pytest.mark.parametrize(
    "text",
    [
        "[solution]\nkind = 'dipole'\n",
        "[solution]\nbogus = 1\n",
        "[nonsense]\n",
        "[[transform]]\nop = 'shear'\n",
        "[verify]\norder = 'upwind'\n",
        "[solve_gs]\nomega = 2.5\n",
        "[run]\nthreads = 0\n",
        "this is not toml",
    ],
)
def test_bad_config_rejected(text):
    with pytest.raises(ConfigError):
        parse_config(text)


def test_overrides_and_hash(tmp_path):
    cfg = load_config(_write(tmp_path, "[run]\nseed = 5\n"))
    new = with_overrides(cfg, seed=9, threads=4, output=tmp_path / "x", tolerance_scale=None)
    assert (new.seed, new.threads, new.output.dir) == (9, 4, str(tmp_path / "x"))
    assert new.sha256 == cfg.sha256 and len(cfg.sha256) == 64
    with pytest.raises(ConfigError):
        with_overrides(cfg, tolerance_scale=-1.0)


def test_missing_config_file():
    with pytest.raises(ConfigError):
        load_config("/nonexistent/run.toml")


def test_shipped_configs_parse():
    for p in sorted(CONFIGS.glob("*.toml")):
        load_config(str(p))


# -- commands and exit codes -----------------------------------------------------


def test_roots_command(capsys):
    assert main(["roots", "--n-max", "3"]) == 0
    out = capsys.readouterr().out
    assert "root3_residual" in out and "6.161470" in out


def test_verify_passes_and_writes_report(tmp_path):
    rc, out = _run(tmp_path, "[verify]\nlattice = 6\nflux_radii = [0.5]\nflux_n_theta = 24\nflux_n_phi = 48\n", "verify")
    assert rc == 0
    rep = json.loads((out / "report.json").read_text())
    assert rep["passed"] and rep["provenance"]["seed"] == 0
    assert (out / "checks.csv").is_file()


def test_verify_broken_state_fails(tmp_path):
    rc, out = _run(tmp_path, "[solution]\nperturb_pressure = 50.0\n[verify]\nlattice = 5\n", "verify")
    assert rc == 1
    assert not json.loads((out / "report.json").read_text())["passed"]


def test_degenerate_transform_is_numerical_failure(tmp_path):
    rc, _ = _run(tmp_path, '[[transform]]\nop = "mhd_to_cgl"\nM = "affine"\na = 0.0\nb = 0.01\n', "transform")
    assert rc == 3


def test_divergent_solver_writes_history(tmp_path):
    rc, out = _run(tmp_path, "[solve_gs]\nsizes = [33]\nomega = 1.99\nmax_iterations = 50\n", "solve-gs")
    assert rc == 3
    assert (out / "divergence_history.csv").is_file()


def test_solve_gs_convergence_table(tmp_path):
    rc, out = _run(tmp_path, "[solve_gs]\nsizes = [17, 33]\n", "solve-gs")
    assert rc == 0
    assert (out / "psi.csv").is_file()
    rows = (out / "convergence.csv").read_text().splitlines()
    assert len(rows) == 3


def test_usage_errors(tmp_path):
    assert main(["frobnicate"]) == 2
    assert main(["verify", "--config", str(tmp_path / "missing.toml")]) == 2
    assert main(["verify", "--config", _write(tmp_path, "[verify]\nlattice = -1\n")]) == 2
    assert main(["verify", "--threads", "0"]) == 2


def test_threads_do_not_change_results(tmp_path):
    text = "[verify]\nlattice = 4\nflux_radii = [0.3, 0.6]\nflux_n_theta = 16\nflux_n_phi = 32\n"
    a = main(["verify", "--config", _write(tmp_path, text), "--output", str(tmp_path / "a")])
    b = main(["verify", "--config", _write(tmp_path, text), "--output", str(tmp_path / "b"), "--threads", "4"])
    assert a == b == 0
    assert (tmp_path / "a" / "checks.csv").read_bytes() == (tmp_path / "b" / "checks.csv").read_bytes()


def test_identity_chain_reproduces_samples(tmp_path):
    plain = main(["export", "--format", "csv", "--output", str(tmp_path / "plain"), "--config", _write(tmp_path, "[output]\nsamples = 5\n", "a.toml")])
    chain = (
        "[output]\nsamples = 5\n"
        '[[transform]]\nop = "scaling"\na4 = 1.0\n'
        '[[transform]]\nop = "pressure_shift"\na6 = 0.0\n'
        '[[transform]]\nop = "isometry"\n'
    )
    ident = main(["export", "--format", "csv", "--output", str(tmp_path / "ident"), "--config", _write(tmp_path, chain, "b.toml")])
    assert plain == ident == 0
    assert (tmp_path / "plain" / "samples.csv").read_bytes() == (tmp_path / "ident" / "samples.csv").read_bytes()


def test_transform_exports(tmp_path):
    rc, out = _run(tmp_path, (CONFIGS / "bobnev_transform.toml").read_text().replace("flux_radii = [0.2, 0.5, 0.8]", "flux_radii = []"), "transform")
    assert rc == 0
    cols = read_samples_csv(out / "samples.csv")
    assert np.all(cols["tau"] < 1)
    assert (out / "field.vtk").is_file() and (out / "slice.csv").is_file()


def test_console_entry_point():
    r = subprocess.run([sys.executable, "-m", "cglequil.cli", "--version"], capture_output=True, text=True)
    assert r.returncode == 0 and "cglequil" in r.stdout
