import json
import math

import numpy as np
import pytest

from gamefusion.dataset import (DEFAULT_RATIOS, SINGLE_MODALITIES, TASKS, DataError, Dataset, FeatureSequence,
                                GeneratorConfig, ManifestParseError, ParticipantRecord, SchemaError, datasets_equal,
                                generate_synthetic, imbalance_ratio, load_manifest, read_feature_csv, save_manifest)
from gamefusion.features import AUDIO_SAMPLES, write_wav


def test_generator_deterministic():
    cfg = GeneratorConfig(n_records=50)
    a, b = generate_synthetic(cfg, 3), generate_synthetic(cfg, 3)
    assert datasets_equal(a, b)
    assert not datasets_equal(a, generate_synthetic(cfg, 4))
    assert a.provenance == {"kind": "synthetic", "seed": 3, "config_hash": cfg.hash()}


def test_generator_hits_ratios():
    ds = generate_synthetic(GeneratorConfig(), 0)
    assert len(ds) == 968
    for t in TASKS:
        pos = int(ds.labels(t).sum())
        assert pos == round(968 / (1 + DEFAULT_RATIOS[t]))
    assert int(ds.labels("overall").sum()) == 164
    assert imbalance_ratio(ds, "overall") == pytest.approx(804 / 164)


def test_generator_plants_shift():
    cfg = GeneratorConfig(n_records=400, effects={("anxiety", "mfcc"): 2.0})
    ds = generate_synthetic(cfg, 1)
    y = ds.labels("anxiety")
    means = np.array([r.features["mfcc"].values.mean() for r in ds.records])
    assert means[y == 1].mean() - means[y == 0].mean() == pytest.approx(2.0, abs=0.2)
    other = np.array([r.features["pert"].values.mean() for r in ds.records])
    assert abs(other[y == 1].mean() - other[y == 0].mean()) < 0.2


def test_generator_shapes_and_missing():
    cfg = GeneratorConfig(n_records=200, missing_rate=0.5)
    ds = generate_synthetic(cfg, 2)
    for r in ds.records:
        assert any(r.available(m) for m in SINGLE_MODALITIES)
        for m, seq in r.features.items():
            lo, hi, d = cfg.shapes[m]
            assert lo <= seq.shape[0] <= hi and seq.shape[1] == d
    share = np.mean([r.available("mfcc") for r in ds.records])
    assert 0.35 < share < 0.65


def test_generator_config_round_trip_and_rejects_unknown():
    cfg = GeneratorConfig(n_records=10, effects={("overall", "pert"): 1.5}, noise=2.0)
    back = GeneratorConfig.from_dict(cfg.to_dict())
    assert back.to_dict() == cfg.to_dict() and back.hash() == cfg.hash()
    with pytest.raises(ValueError, match="unknown"):
        GeneratorConfig.from_dict({"n_record": 5})
    with pytest.raises(ValueError):
        GeneratorConfig.from_dict({"effects": {"overall:relation_graph": 1.0}})
    with pytest.raises(ValueError):
        GeneratorConfig(noise=0).validate()


def test_imbalance_single_class_warns():
    cfg = GeneratorConfig(n_records=5, ratios={**DEFAULT_RATIOS, "overall": 1e9})
    ds = generate_synthetic(cfg, 0)
    with pytest.warns(RuntimeWarning):
        assert math.isinf(imbalance_ratio(ds, "overall"))


def test_feature_sequence_validation():
    with pytest.raises(DataError):
        FeatureSequence(np.zeros((0, 3)), "mfcc")
    with pytest.raises(DataError):
        FeatureSequence(np.array([[np.nan]]), "mfcc")
    seq = FeatureSequence(np.ones((2, 2)), "mfcc")
    with pytest.raises(ValueError):
        seq.values[0, 0] = 5


def test_record_validation():
    labels = {t: 0 for t in TASKS}
    with pytest.raises(SchemaError):
        ParticipantRecord("a", {}, {"overall": 1}, {})
    with pytest.raises(DataError):
        ParticipantRecord("a", {}, {**labels, "overall": 2}, {})
    with pytest.raises(DataError):
        ParticipantRecord("a", {}, labels, {"mfcc": True})
    r = ParticipantRecord("a", {}, labels, {})
    with pytest.raises(DataError, match="unique"):
        Dataset([r, r])


def test_manifest_round_trip(tmp_path, sparse_dataset):
    path = save_manifest(sparse_dataset, tmp_path / "d")
    back = load_manifest(path)
    assert datasets_equal(back, sparse_dataset)


def write_minimal(tmp_path, features, labels_header=None, row=0):
    header = labels_header or ["id", *TASKS]
    (tmp_path / "labels.csv").write_text(",".join(header) + "\n" + ",".join(["p1"] + ["0"] * (len(header) - 1)) + "\n")
    doc = {"label_file": "labels.csv", "records": [{"id": "p1", "labels_csv_row": row, "features": features}]}
    (tmp_path / "m.json").write_text(json.dumps(doc))
    return tmp_path / "m.json"


def test_manifest_missing_file_marks_unavailable(tmp_path, caplog):
    (tmp_path / "e.csv").write_text("t,f0,f1\n0,1.0,2.0\n1,3.0,4.0\n")
    ds = load_manifest(write_minimal(tmp_path, {"expression": "e.csv", "mfcc": "nope.csv", "pert": None}))
    r = ds.records[0]
    assert r.available("expression") and not r.available("mfcc") and not r.available("pert")
    assert "not found" in caplog.text
    np.testing.assert_array_equal(r.features["expression"].values, [[1, 2], [3, 4]])


def test_manifest_parse_error_reports_line(tmp_path):
    (tmp_path / "m.json").write_text('{\n "label_file": "labels.csv",\n "records": [\n}\n')
    with pytest.raises(ManifestParseError) as exc:
        load_manifest(tmp_path / "m.json")
    assert exc.value.lineno == 4


def test_manifest_missing_task_column(tmp_path):
    with pytest.raises(SchemaError, match="overall"):
        load_manifest(write_minimal(tmp_path, {}, labels_header=["id", *TASKS[:-1]]))


def test_manifest_row_mismatch(tmp_path):
    with pytest.raises(SchemaError, match="out of range"):
        load_manifest(write_minimal(tmp_path, {}, row=3))


def test_feature_csv_errors_name_location(tmp_path):
    (tmp_path / "bad.csv").write_text("t,f0,f1\n0,1.0,abc\n")
    with pytest.raises(DataError, match=r"record p1.*row 0.*column f1"):
        read_feature_csv(tmp_path / "bad.csv", "mfcc", "p1")
    (tmp_path / "hdr.csv").write_text("time,a\n0,1\n")
    with pytest.raises(DataError):
        read_feature_csv(tmp_path / "hdr.csv", "mfcc", "p1")


def test_wav_input_for_mfcc(tmp_path):
    write_wav(tmp_path / "a.wav", np.zeros(AUDIO_SAMPLES // 2))
    seq = read_feature_csv(tmp_path / "a.wav", "mfcc")
    assert seq.shape == (998, 13)
