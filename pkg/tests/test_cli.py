import json

import numpy as np
import pytest

from nufrecon import io as nio
from nufrecon.cli import (ConfigError, ExperimentConfig, expand, list_presets, load_config, load_preset, main,
                          stream_seed)

SMALL = """
[experiment]
name = small
phantom = F1
n = 33
modes = 33
seed = 3
methods = HOTV, IR, EA
m = 1
rho = 1
eps = 1.9
l_max = 5
tau = 1/257
"""


def _write(tmp_path, text, name="exp.ini"):
    p = tmp_path / name
    p.write_text(text)
    return p


def test_load_config_parses_fractions_and_lists():
    base, sweep = load_config(SMALL + "\n[sweep]\nlam = 0.1, 1\nseed = 1, 2\n")
    assert isinstance(base, ExperimentConfig)
    assert base.recon.tau == pytest.approx(1 / 257)
    assert base.methods == ("HOTV", "IR", "EA")
    runs = expand(base, sweep)
    assert len(runs) == 4
    assert {(r.recon.lam, r.seed) for r in runs} == {(0.1, 1), (0.1, 2), (1.0, 1), (1.0, 2)}


@pytest.mark.parametrize("text", [
    "[other]\nx = 1\n",
    "[experiment]\nname = a\nphantom = NOPE\n",
    "[experiment]\nname = a\nbogus_key = 1\n",
    "[experiment]\nname = a\nmethods = IR, XX\n",
    "[experiment]\nname = a\nlam = -1\n",
    "[experiment]\nname = a\n[sweep]\nnot_a_key = 1, 2\n",
    "not an ini file",
])
def test_bad_configs_raise(text):
    with pytest.raises(ConfigError):
        load_config(text)


def test_presets_all_load():
    names = list_presets()
    assert {"fig_1Dcos", "fig_1Dgelb", "fig_f3", "fig_quarter", "table1_257"} <= set(names)
    for n in names:
        base, sweep = load_preset(n)
        assert expand(base, sweep)
    with pytest.raises(ConfigError):
        load_preset("missing")


def test_stream_seed():
    assert stream_seed(7, 0) == 7
    assert stream_seed(7, 1) != stream_seed(7, 2)
    assert stream_seed(7, 1) == stream_seed(7, 1)
    assert stream_seed(7, 1) != stream_seed(8, 1)


def test_run_writes_outputs_and_is_reproducible(tmp_path):
    cfg = _write(tmp_path, SMALL)
    assert main(["run", "--config", str(cfg), "--out", str(tmp_path / "a")]) == 0
    assert main(["run", "--config", str(cfg), "--out", str(tmp_path / "b")]) == 0
    a, b = tmp_path / "a", tmp_path / "b"
    for m in ("hotv", "ir", "ea"):
        for suffix in ("_image.csv", "_image.pgm", "_error.csv", "_error_log10.pgm"):
            assert (a / f"{m}{suffix}").is_file()
    for f in ("ea_edges.csv", "ea_edges.pgm", "ea_edges.pbm", "ea_mask_x.pbm", "timings.csv"):
        assert (a / f).is_file()
    assert (a / "results.csv").read_bytes() == (b / "results.csv").read_bytes()
    assert (a / "ea_image.csv").read_bytes() == (b / "ea_image.csv").read_bytes()
    lines = (a / "results.csv").read_text().splitlines()
    assert lines[0] == "experiment,method,parameters,relative_error,jump_window_error"
    assert len(lines) == 4
    man = json.loads((a / "manifest.json").read_text())
    assert man["seeds"]["jitter"] == 3 and man["samples"] == 33
    assert nio.read_pbm(a / "ea_mask_x.pbm").shape == (1, 32)


def test_seed_override_changes_results(tmp_path):
    cfg = _write(tmp_path, SMALL.replace("HOTV, IR, EA", "EA"))
    assert main(["run", "--config", str(cfg), "--out", str(tmp_path / "a")]) == 0
    assert main(["run", "--config", str(cfg), "--out", str(tmp_path / "b"), "--seed", "4"]) == 0
    ja = json.loads((tmp_path / "a" / "manifest.json").read_text())
    jb = json.loads((tmp_path / "b" / "manifest.json").read_text())
    assert ja["seeds"]["jitter"] == 3 and jb["seeds"]["jitter"] == 4
    assert (tmp_path / "a" / "results.csv").read_bytes() != (tmp_path / "b" / "results.csv").read_bytes()


def test_noise_and_subsample_seeds_recorded(tmp_path):
    cfg = _write(tmp_path, SMALL.replace("HOTV, IR, EA", "EA") + "snr_db = 20\nkeep = 30\n")
    assert main(["run", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 0
    man = json.loads((tmp_path / "o" / "manifest.json").read_text())
    assert set(man["seeds"]) == {"jitter", "noise", "subsample"}
    assert man["samples"] == 30


def test_sweep_runs_get_subdirectories(tmp_path):
    cfg = _write(tmp_path, SMALL.replace("HOTV, IR, EA", "EA") + "[sweep]\nlam = 0.5, 2\n")
    assert main(["run", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 0
    assert (tmp_path / "o" / "run00" / "results.csv").is_file()
    assert (tmp_path / "o" / "run01" / "results.csv").is_file()


def test_user_data_round_trip(tmp_path):
    from nufrecon.phantoms import continuous_fourier_samples, get_phantom
    from nufrecon.sampling import jittered_frequencies_1d
    fr = jittered_frequencies_1d(16, 0)
    nio.write_fourier_csv(tmp_path / "d.csv", continuous_fourier_samples(get_phantom("F1"), fr))
    cfg = _write(tmp_path, f"[experiment]\nname = user\ndata = {tmp_path / 'd.csv'}\nn = 33\nmethods = EA\n")
    assert main(["run", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 0
    img = nio.read_matrix_csv(tmp_path / "o" / "ea_image.csv")
    assert img.shape == (1, 33)
    assert not (tmp_path / "o" / "ea_error.csv").exists()


def test_exit_codes(tmp_path, capsys):
    assert main(["presets"]) == 0
    assert "fig_1Dcos" in capsys.readouterr().out
    assert main(["run", "--config", str(tmp_path / "missing.ini")]) == 2
    assert main(["run"]) == 2
    assert main(["frobnicate"]) == 2
    assert main(["suite", "--presets", "nope", "--out", str(tmp_path / "s")]) == 2
    bad = tmp_path / "bad.csv"
    bad.write_text("a,b\n1,2\n")
    cfg = _write(tmp_path, f"[experiment]\nname = broken\ndata = {bad}\nn = 33\nmethods = EA\n")
    assert main(["run", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 1


def test_empty_suite(tmp_path):
    assert main(["suite", "--presets", "", "--out", str(tmp_path / "s")]) == 0
    assert (tmp_path / "s" / "summary.csv").read_text().splitlines() == [
        "preset,run,status,method,parameters,relative_error,jump_window_error,seconds"]
