import csv
import hashlib
import json
import shutil
import time

import numpy as np
import pytest

from fuzzyspace import distance as distance_mod
from fuzzyspace.cli import main
from fuzzyspace.config import SCHEMA, RunConfig
from fuzzyspace.errors import ConfigError


def write_config(path, **values):
    path.write_text(json.dumps(values))
    return str(path)


def read_rows(path):
    return list(csv.DictReader(open(path, newline="")))


# --- config -----------------------------------------------------------------

def test_config_defaults_and_override():
    cfg = RunConfig()
    assert cfg["n"] == 8 and cfg["embed_dim"] == 3 and cfg["target_states"] == "auto"
    assert cfg.override(seed=4)["seed"] == 4 and cfg.override(seed=None)["seed"] == 0
    assert set(json.loads(json.dumps(cfg.to_json()))) == set(SCHEMA)


@pytest.mark.parametrize("bad,key", [({"n": 0}, "n"), ({"c0": -1}, "c0"), ({"embed_dim": 0}, "embed_dim"),
                                     ({"basis": "fourier"}, "basis"), ({"colour": 1}, "colour"),
                                     ({"solver": {"rtol": 0}}, "rtol"), ({"c12": "x"}, "c12")])
def test_config_errors_name_key(bad, key):
    with pytest.raises(ConfigError, match=key):
        RunConfig.from_dict(bad)


def test_config_syntax_error_has_position():
    with pytest.raises(ConfigError, match="line 2"):
        RunConfig.from_text('{"n": 4,\n "seed": }')


# --- subcommands ------------------------------------------------------------

def test_spectrum_n20_c2(tmp_path):
    cfg = write_config(tmp_path / "c.json", n=20, c12=2.0)
    assert main(["spectrum", "--config", cfg, "--outdir", str(tmp_path / "out")]) == 0
    rows = read_rows(tmp_path / "out" / "spectrum.csv")
    assert sum(int(r["multiplicity"]) for r in rows) == 1600
    assert len(rows) == 800


def test_spectrum_n1(tmp_path):
    cfg = write_config(tmp_path / "c.json", n=1)
    assert main(["spectrum", "--config", cfg, "--outdir", str(tmp_path)]) == 0
    vals = {round(float(r["value"]), 9) for r in read_rows(tmp_path / "spectrum.csv")}
    assert vals == {-1.0, 1.0}


def test_spectrum_general_is_numeric(tmp_path):
    cfg = write_config(tmp_path / "c.json", n=3, c12=1.1, c13=1.1, c23=1.5)
    assert main(["spectrum", "--config", cfg, "--outdir", str(tmp_path)]) == 0
    rows = read_rows(tmp_path / "spectrum.csv")
    assert {r["branch"] for r in rows} == {"numeric"}
    assert sum(int(r["multiplicity"]) for r in rows) == 36


def test_malformed_config_exit_code(tmp_path, capsys):
    cfg = write_config(tmp_path / "c.json", n=4, c13="wide")
    assert main(["spectrum", "--config", cfg, "--outdir", str(tmp_path)]) == 2
    assert "c13" in capsys.readouterr().err
    (tmp_path / "broken.json").write_text('{"n": 4,')
    assert main(["spectrum", "--config", str(tmp_path / "broken.json")]) == 2


def test_observables_n20(tmp_path):
    for c in (1.0, 5.0):
        cfg = write_config(tmp_path / "c.json", n=20, c12=c)
        assert main(["observables", "--config", cfg, "--outdir", str(tmp_path / str(c))]) == 0
    one = json.load(open(tmp_path / "1.0" / "observables.json"))
    five = json.load(open(tmp_path / "5.0" / "observables.json"))
    assert one["dimension_estimate"] == 2
    assert one["volume_ratio"] == pytest.approx(1, abs=0.05)
    assert five["volume_ratio"] < one["volume_ratio"]


def test_observables_from_spectrum_file(tmp_path):
    cfg = write_config(tmp_path / "c.json", n=20)
    main(["spectrum", "--config", cfg, "--outdir", str(tmp_path / "a")])
    assert main(["observables", "--config", cfg, "--outdir", str(tmp_path / "b"),
                 "--spectrum", str(tmp_path / "a" / "spectrum.csv")]) == 0
    assert json.load(open(tmp_path / "b" / "observables.json"))["dimension_estimate"] == 2


def test_validate(tmp_path):
    cfg = write_config(tmp_path / "c.json", n=4, c12=1.5)
    assert main(["validate", "--config", cfg, "--outdir", str(tmp_path)]) == 0
    assert json.load(open(tmp_path / "validation.json"))["passed"]


def test_stage_by_stage(tmp_path):
    cfg = write_config(tmp_path / "c.json", n=4, target_states=8)
    out = str(tmp_path / "run")
    for stage in ("states", "distances", "embed", "fit"):
        assert main([stage, "--config", cfg, "--outdir", out]) == 0
    assert len(json.load(open(tmp_path / "run" / "states.json"))["states"]) == 8
    assert len(json.load(open(tmp_path / "run" / "fit.json"))["axes"]) == 3


# --- full smoke pipeline ----------------------------------------------------

def sha(path):
    return hashlib.sha256(path.read_bytes()).hexdigest()


@pytest.fixture(scope="module")
def smoke(tmp_path_factory):
    root = tmp_path_factory.mktemp("smoke")
    cfg = write_config(root / "c.json", n=6, seed=1)
    t0 = time.perf_counter()
    code = main(["pipeline", "--config", cfg, "--outdir", str(root / "a")])
    elapsed = time.perf_counter() - t0
    return root, cfg, code, elapsed


def test_smoke_pipeline(smoke):
    root, _, code, elapsed = smoke
    assert code == 0 and elapsed < 15 * 60
    rep = json.load(open(root / "a" / "report.json"))
    assert rep["distances_converged"] and rep["mean_correlation"] > 0.95
    assert rep["states"] == rep["state_target"]["max_states"]


def test_manifest_complete(smoke):
    root = smoke[0] / "a"
    man = json.load(open(root / "manifest.json"))
    assert man["status"] == "ok" and man["calibration"] > 0
    files = {p.name for p in root.iterdir() if p.is_file() and p.name != "manifest.json"}
    assert set(man["artifacts"]) == files
    for name, digest in man["artifacts"].items():
        assert sha(root / name) == digest
    assert {"numpy", "scipy", "package", "python"} <= set(man["versions"])


def test_rerun_byte_identical(smoke):
    root, cfg, _, _ = smoke
    assert main(["pipeline", "--config", cfg, "--outdir", str(root / "b")]) == 0
    a = json.load(open(root / "a" / "manifest.json"))["artifacts"]
    b = json.load(open(root / "b" / "manifest.json"))["artifacts"]
    assert a == b


def test_resume_uses_pair_cache(smoke, monkeypatch):
    root, cfg, _, _ = smoke
    shutil.copytree(root / "a", root / "c")
    for name in ("distances.csv", "distances.json", "embedding.csv", "report.json"):
        (root / "c" / name).unlink()

    def boom(*a, **k):
        raise AssertionError("resume recomputed a cached pair")
    monkeypatch.setattr(distance_mod.DistanceProblem, "solve", boom)
    assert main(["pipeline", "--config", cfg, "--outdir", str(root / "c"), "--resume"]) == 0
    assert sha(root / "c" / "distances.csv") == sha(root / "a" / "distances.csv")
    assert sha(root / "c" / "report.json") == sha(root / "a" / "report.json")


def test_failure_names_stage_and_keeps_artifacts(tmp_path, capsys):
    # two states embed fine but cannot support an ellipsoid fit
    cfg = write_config(tmp_path / "c.json", n=3, target_states=2)
    out = tmp_path / "run"
    assert main(["pipeline", "--config", cfg, "--outdir", str(out)]) == 3
    assert "stage fit" in capsys.readouterr().err
    man = json.load(open(out / "manifest.json"))
    assert man["status"] == "failed" and man["failed_stage"] == "fit"
    assert {"states.json", "distances.csv", "embedding.csv"} <= set(man["artifacts"])
