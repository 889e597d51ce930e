import json
import os

import numpy as np
import pytest

from landaumix import cli
from landaumix.ioutil import load_field_binary, load_field_csv, read_csv, save_field_binary, save_field_csv
from landaumix.runconfig import load_config, sweep_points

SMALL_GAP = """
seed = 77
[mixture]
masses = [1.0, 2.0]
gamma = 0.0
kT = 0.5
[grid]
points_per_axis = 6
radius = 6.0
[gap]
certify_samples = 50
"""

KCOMPACT = """
seed = 77
[mixture]
masses = [1.0]
gamma = -2.0
kT = 3.0
[grid]
points_per_axis = 8
radius = 0.3
[kcompact]
cutoffs = [2, 4, 8]
"""


def _write(tmp_path, name, text):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


def test_missing_config_is_exit_1(tmp_path):
    rc = cli.main(["gap", "--config", str(tmp_path / "nope.toml")])
    assert rc == cli.EXIT_CONFIG


def test_invalid_gamma_is_exit_1(tmp_path):
    path = _write(tmp_path, "bad.toml", """
[mixture]
masses = [1.0]
gamma = -3.0
""")
    assert cli.main(["gap", "--config", path]) == cli.EXIT_CONFIG


def test_unknown_table_rejected(tmp_path):
    path = _write(tmp_path, "bad2.toml", """
[mixture]
masses = [1.0]
[typo_block]
x = 1
""")
    assert cli.main(["gap", "--config", path]) == cli.EXIT_CONFIG


def test_gap_command_and_reproducibility(tmp_path):
    path = _write(tmp_path, "gap.toml", SMALL_GAP)
    out1 = str(tmp_path / "o1")
    out2 = str(tmp_path / "o2")
    assert cli.main(["gap", "--config", path, "--output", out1]) == 0
    assert cli.main(["gap", "--config", path, "--output", out2]) == 0
    b1 = open(os.path.join(out1, "gap_report.json"), "rb").read()
    b2 = open(os.path.join(out2, "gap_report.json"), "rb").read()
    assert b1 == b2
    rep = json.loads(b1)
    assert rep["gap_l2"] > 0 and rep["nullspace_dim"] == 6
    assert rep["provenance"]["seed"] == 77


def test_gap_export_matrices(tmp_path):
    path = _write(tmp_path, "gap.toml", SMALL_GAP)
    out = str(tmp_path / "mtx")
    assert cli.main(["gap", "--config", path, "--output", out,
                     "--export-matrices"]) == 0
    mtx = open(os.path.join(out, "negL_negL_full.mtx")).read(4096)
    assert mtx.startswith("%%MatrixMarket matrix coordinate")
    assert "mixture=" in mtx


def test_kcompact_command(tmp_path):
    path = _write(tmp_path, "kc.toml", KCOMPACT)
    out = str(tmp_path / "kc")
    assert cli.main(["kcompact", "--config", path, "--output", out]) == 0
    d = read_csv(os.path.join(out, "kcompact.csv"))
    norms = d["norm"]
    assert np.all(np.diff(norms) <= 0)
    summary = json.load(open(os.path.join(out, "kcompact.json")))
    assert summary["slope"] < 0


def test_seed_flag_overrides(tmp_path):
    path = _write(tmp_path, "gap.toml", SMALL_GAP)
    out = str(tmp_path / "seedflag")
    assert cli.main(["gap", "--config", path, "--output", out, "--seed", "123"]) == 0
    rep = json.load(open(os.path.join(out, "gap_report.json")))
    assert rep["provenance"]["seed"] == 123


def test_sweep_points_cross_product(tmp_path):
    path = _write(tmp_path, "sw.toml", """
[mixture]
masses = [1.0, 2.0]
kT = 0.5
[grid]
points_per_axis = 6
[sweep]
gammas = [0.0, 1.0]
mass_ratios = [1.0, 2.0]
species_counts = [1, 2]
points_per_axis = 4
""")
    run = load_config(path)
    pts = list(sweep_points(run))
    assert len(pts) == 8
    labels = {p[0] for p in pts}
    assert len(labels) == 8


def test_threads_env_default(tmp_path, monkeypatch):
    monkeypatch.setenv("LANDAUMIX_THREADS", "3")
    path = _write(tmp_path, "gap.toml", SMALL_GAP)
    run = load_config(path)
    assert run.threads == 3


def test_field_roundtrip(tmp_path, cfg_ref, grid6):
    from landaumix.mixture import reference_maxwellian
    F = reference_maxwellian(cfg_ref, grid6)
    csv_path = str(tmp_path / "field.csv")
    save_field_csv(csv_path, F, cfg_ref, grid6)
    back = load_field_csv(csv_path)
    assert np.abs(back.values - F.values).max() <= 1e-17 * F.values.max()
    bin_path = str(tmp_path / "field.bin")
    save_field_binary(bin_path, F, cfg_ref, grid6)
    back2 = load_field_binary(bin_path)
    assert np.array_equal(back2.values, F.values)
    header = json.load(open(bin_path + ".json"))
    assert header["ordering"].startswith("species-major")
