import json

import numpy as np
import pytest

from liouville_lab import config as config_mod
from liouville_lab.cli import main
from liouville_lab.config import ENV_VAR, load_tolerances
from liouville_lab.experiment import ConfigError, ExperimentConfig
from liouville_lab.families import FamilySpec, generate_family
from liouville_lab.modelio import load_model, save_model, save_vector


@pytest.fixture
def segment_files(tmp_path):
    model = generate_family(FamilySpec("z1", (10,)))[0]
    save_model(model, tmp_path / "seg.model")
    k = np.array(model.space.labels)[:, 0]
    save_vector(np.abs(k).astype(float), tmp_path / "f.txt")
    return tmp_path, model


def _summary(out):
    return (out / "summary.tsv").read_text()


def test_generate(tmp_path):
    out = tmp_path / "gen"
    assert main(["generate", "--family", "z2", "--radii", "2,3", "--out-dir", str(out)]) == 0
    names = sorted(p.name for p in out.iterdir())
    assert "z2_25.model" in names and "z2_49.model" in names
    assert load_model(out / "z2_49.model").n == 49


def test_semigroup(segment_files):
    tmp, _ = segment_files
    out = tmp / "sg"
    code = main(["semigroup", "--model", str(tmp / "seg.model"), "--f", str(tmp / "f.txt"),
                 "--p", "1.5,2,3", "--out-dir", str(out)])
    assert code == 0
    assert (out / "semigroup.tsv").exists() and (out / "semigroup_p1.5.dat").exists()


def test_harmonic(segment_files):
    tmp, model = segment_files
    fr = model.space.frontier
    (tmp / "b.txt").write_text(f"{fr[0]} 0\n{fr[1]} 4\n")
    out = tmp / "h"
    assert main(["harmonic", "--model", str(tmp / "seg.model"), "--boundary", str(tmp / "b.txt"),
                 "--out-dir", str(out)]) == 0
    assert "harmonic" in _summary(out)


@pytest.mark.parametrize("mode", ["key", "caccioppoli", "squared"])
def test_liouville_model_modes(segment_files, mode):
    tmp, _ = segment_files
    out = tmp / mode
    code = main(["liouville", "--model", str(tmp / "seg.model"), "--f", str(tmp / "f.txt"),
                 "--mode", mode, "--p", "1.5,2", "--out-dir", str(out)])
    assert code == 0
    assert (out / f"{mode}.tsv").exists()


def test_liouville_family_modes(tmp_path):
    out = tmp_path / "karp"
    assert main(["liouville", "--family", "z1", "--radii", "60", "--f-kind", "constant",
                 "--mode", "karp", "--out-dir", str(out), "--dump-metric"]) == 0
    assert "verdict constant" in _summary(out)
    assert (out / "intrinsic.tsv").exists()
    out = tmp_path / "yau"
    assert main(["liouville", "--family", "z1", "--radii", "10,20,40", "--f-kind", "constant",
                 "--mode", "yau", "--out-dir", str(out)]) == 0
    assert (out / "yau.tsv").exists()


def test_recurrence(tmp_path):
    out = tmp_path / "rec"
    assert main(["recurrence", "--family", "z1", "--max-radius", "40", "--out-dir", str(out)]) == 0
    for name in ("volume.tsv", "resistance.tsv", "verdicts.tsv", "volume.dat"):
        assert (out / name).exists()


def test_p_equal_one_is_rejected(segment_files, capsys):
    tmp, _ = segment_files
    code = main(["liouville", "--model", str(tmp / "seg.model"), "--f", str(tmp / "f.txt"),
                 "--mode", "key", "--p", "1", "--out-dir", str(tmp / "bad")])
    assert code != 0
    assert "p in (1, inf)" in capsys.readouterr().err


def test_bad_radii_and_missing_file(tmp_path, capsys):
    assert main(["liouville", "--family", "z1", "--radii", "10", "--f-kind", "constant", "--mode",
                 "caccioppoli", "--r", "3", "--R", "2", "--out-dir", str(tmp_path)]) == 2
    assert main(["semigroup", "--model", str(tmp_path / "none.model"), "--out-dir", str(tmp_path)]) == 2
    assert capsys.readouterr().err.count("error:") == 2


def test_config_validation():
    with pytest.raises(ConfigError):
        ExperimentConfig("liouville", "x", mode="key").validate()
    with pytest.raises(ConfigError):
        ExperimentConfig("explode", "x").validate()
    with pytest.raises(ConfigError):
        ExperimentConfig("semigroup", "x", model="m", times=(-1.0,)).validate()


def test_tolerance_overrides(tmp_path, monkeypatch):
    path = tmp_path / "tol.json"
    path.write_text(json.dumps({"dense_limit": 50, "inequality": 1e-6}))
    monkeypatch.setenv(ENV_VAR, str(path))
    tol = load_tolerances()
    assert tol.dense_limit == 50 and tol.inequality == 1e-6
    path.write_text(json.dumps({"nonsense": 1}))
    with pytest.raises(KeyError):
        load_tolerances()
    assert config_mod.Tolerances().dense_limit == 2000
