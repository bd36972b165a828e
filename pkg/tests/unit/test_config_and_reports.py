import csv
import json
from pathlib import Path

import jsonschema
import numpy as np
import pytest

from src.core.errors import ConfigError, ContractError
from src.interfaces.artifacts import ArtifactWriter
from src.protocols.manifest_signer import ManifestSigner, inputs_hash, verify_manifest
from src.protocols.report_validator import ReportValidator
from src.utils.config_loader import ConfigLoader, deep_merge, read_yaml
from src.utils.parallel import resolve_jobs, run_sweep


def square(x: int) -> int:
    return x * x


def test_deep_merge_replaces_lists_and_merges_maps() -> None:
    base = {"flow": {"n": 3, "K": 64}, "sweep": {"dims": [3, 4]}}
    merged = deep_merge(base, {"flow": {"K": 128}, "sweep": {"dims": [5]}})
    assert merged == {"flow": {"n": 3, "K": 128}, "sweep": {"dims": [5]}}
    assert base["flow"]["K"] == 64


def test_default_configuration_is_valid() -> None:
    config = ConfigLoader.load()
    assert config["experiment"]["name"] == "checks"
    assert config["flow"]["n"] == 3


def test_file_values_win_over_overrides(tmp_path: Path) -> None:
    path = tmp_path / "run.yaml"
    path.write_text("flow:\n  K: 256\nexperiment:\n  seed: 7\n", encoding="utf-8")
    config = ConfigLoader.load(path, {"flow": {"K": 32, "n": 4}})
    assert config["flow"]["K"] == 256
    assert config["flow"]["n"] == 4
    assert config["experiment"]["seed"] == 7


def test_invalid_configuration_is_rejected(tmp_path: Path) -> None:
    bad = tmp_path / "bad.yaml"
    bad.write_text("flow:\n  n: 1\n", encoding="utf-8")
    with pytest.raises(jsonschema.ValidationError):
        ConfigLoader.load(bad)
    unknown = tmp_path / "unknown.yaml"
    unknown.write_text("flow:\n  steps: 10\n", encoding="utf-8")
    with pytest.raises(jsonschema.ValidationError):
        ConfigLoader.load(unknown)


def test_read_yaml_errors(tmp_path: Path) -> None:
    with pytest.raises(ConfigError):
        read_yaml(tmp_path / "missing.yaml")
    listing = tmp_path / "list.yaml"
    listing.write_text("- 1\n- 2\n", encoding="utf-8")
    with pytest.raises(ConfigError):
        read_yaml(listing)
    empty = tmp_path / "empty.yaml"
    empty.write_text("", encoding="utf-8")
    assert read_yaml(empty) == {}


def test_report_validator() -> None:
    report = {
        "schema_version": "1.0",
        "passed": True,
        "checks": [
            {
                "name": "demo",
                "inputs": {},
                "lhs": 1.0,
                "rhs": 1.0,
                "residual": 0.0,
                "in_regime": True,
                "passed": True,
            }
        ],
    }
    assert ReportValidator.validate("check-report", report)
    with pytest.raises(jsonschema.ValidationError):
        ReportValidator.validate("check-report", {"passed": True, "checks": []})
    with pytest.raises(KeyError):
        ReportValidator.validate("unknown", report)


def test_inputs_hash_ignores_key_order() -> None:
    a = {"flow": {"n": 3, "K": 64}, "seed": 1}
    b = {"seed": 1, "flow": {"K": 64, "n": 3}}
    assert inputs_hash(a) == inputs_hash(b)
    assert inputs_hash(a) != inputs_hash({**a, "seed": 2})
    assert len(inputs_hash(a)) == 64


def test_manifest_detects_tampering(tmp_path: Path) -> None:
    writer = ArtifactWriter(tmp_path)
    writer.csv("table.csv", ["a", "b"], [(1, 0.1), (2, np.float64(0.2))])
    writer.json("report.json", {"value": np.float64(1.5), "flags": np.array([True])})
    manifest = ManifestSigner(tmp_path).sign("demo", {"k": 1}, writer.written, 3, 0.25)
    assert ReportValidator.validate("manifest", manifest)
    assert [a["path"] for a in manifest["artifacts"]] == ["report.json", "table.csv"]
    assert verify_manifest(tmp_path)
    with open(tmp_path / "table.csv", "a", encoding="utf-8") as f:
        f.write("3,0.3\n")
    assert not verify_manifest(tmp_path)


def test_manifest_requires_written_artifacts(tmp_path: Path) -> None:
    with pytest.raises(ContractError):
        ManifestSigner(tmp_path).sign("demo", {}, ["absent.csv"], 0, 0.0)
    assert not verify_manifest(tmp_path / "nowhere")


def test_artifact_writer_formats(tmp_path: Path) -> None:
    writer = ArtifactWriter(tmp_path / "nested")
    writer.csv("rows.csv", ["x", "y", "tags"], [{"x": 0.1, "y": np.int64(3), "tags": [1.5, 2]}])
    with open(tmp_path / "nested" / "rows.csv", encoding="utf-8") as f:
        rows = list(csv.reader(f))
    assert rows[0] == ["x", "y", "tags"]
    assert rows[1] == ["0.10000000000000001", "3", "1.5;2"]
    writer.json("data.json", {"arr": np.arange(3), "flag": np.bool_(True)})
    data = json.loads((tmp_path / "nested" / "data.json").read_text(encoding="utf-8"))
    assert data == {"arr": [0, 1, 2], "flag": True}
    assert writer.written == ["rows.csv", "data.json"]


def test_run_sweep_merges_by_key() -> None:
    points = [((3,), 3), ((1,), 1), ((2,), 2)]
    assert run_sweep(square, points, jobs=1) == [((1,), 1), ((2,), 4), ((3,), 9)]
    assert resolve_jobs(8, 2) == 2
    assert 1 <= resolve_jobs(0, 3) <= 3
    assert resolve_jobs(None, 1) == 1
