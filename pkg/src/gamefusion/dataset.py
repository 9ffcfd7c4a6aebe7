"""Multimodal participant records, manifest ingestion and a synthetic generator.

A dataset is a list of participants. Each participant carries up to eight
single-modal feature sequences (a ``T x D`` matrix per modality), twelve
binary screening labels and an availability flag per modality. The two
cross-modal inputs are never stored here; they are derived per CV fold.
"""

from __future__ import annotations

import csv
import hashlib
import json
import logging
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping

import numpy as np

log = logging.getLogger(__name__)

SINGLE_MODALITIES = (
    "expression",
    "expression_nuance",
    "eye_movement",
    "physio",
    "mfcc",
    "wav2vec",
    "pert",
    "roberta",
)
CROSS_MODALITIES = ("relation_graph", "attention")
MODALITIES = SINGLE_MODALITIES + CROSS_MODALITIES

TASKS = (
    "depression",
    "interpersonal_sensitivity",
    "anxiety",
    "obsessive_compulsive",
    "paranoid_ideation",
    "hostility",
    "academic_stress",
    "maladaptation",
    "emotional_disturbance",
    "psychological_imbalance",
    "suicidal_tendency",
    "overall",
)
DISORDERS = TASKS[:-1]

# negative:positive ratios of the screened population, per task
DEFAULT_RATIOS = {
    "obsessive_compulsive": 6.56,
    "interpersonal_sensitivity": 5.31,
    "overall": 4.90,
    "academic_stress": 4.87,
    "hostility": 4.53,
    "psychological_imbalance": 4.09,
    "suicidal_tendency": 2.71,
    "depression": 2.44,
    "emotional_disturbance": 2.25,
    "anxiety": 2.21,
    "maladaptation": 1.66,
    "paranoid_ideation": 1.64,
}

# (min T, max T, D) per modality; small dims keep desk-scale runs fast
DEFAULT_SHAPES = {
    "expression": (4, 12, 8),
    "expression_nuance": (4, 12, 6),
    "eye_movement": (4, 12, 4),
    "physio": (8, 16, 2),
    "mfcc": (8, 16, 13),
    "wav2vec": (2, 6, 10),
    "pert": (2, 6, 8),
    "roberta": (2, 6, 8),
}


class DataError(ValueError):
    """Feature or label content is unusable (non-finite, wrong shape, ...)."""


class SchemaError(DataError):
    """A manifest or label file does not follow the expected layout."""


class ManifestParseError(DataError):
    """The manifest is not valid JSON."""

    def __init__(self, path, lineno, msg):
        super().__init__(f"{path}: line {lineno}: {msg}")
        self.lineno = lineno


def check_task(task: str) -> str:
    if task not in TASKS:
        raise ValueError(f"unknown task {task!r}; expected one of {', '.join(TASKS)}")
    return task


def check_modality(modality: str) -> str:
    if modality not in MODALITIES:
        raise ValueError(f"unknown modality {modality!r}")
    return modality


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=np.float64)
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class FeatureSequence:
    values: np.ndarray
    modality: str

    def __post_init__(self):
        check_modality(self.modality)
        v = _frozen(self.values)
        if v.ndim != 2 or v.shape[0] < 1 or v.shape[1] < 1:
            raise DataError(f"{self.modality}: feature matrix must be T x D with T, D >= 1, got shape {v.shape}")
        if not np.all(np.isfinite(v)):
            raise DataError(f"{self.modality}: non-finite feature value")
        object.__setattr__(self, "values", v)

    @property
    def shape(self):
        return self.values.shape


@dataclass(frozen=True)
class ParticipantRecord:
    id: str
    features: Mapping[str, FeatureSequence]
    labels: Mapping[str, int]
    availability: Mapping[str, bool]

    def __post_init__(self):
        missing = [t for t in TASKS if t not in self.labels]
        if missing:
            raise SchemaError(f"record {self.id}: no label for {', '.join(missing)}")
        for t, v in self.labels.items():
            if v not in (0, 1):
                raise DataError(f"record {self.id}: label {t}={v!r} is not 0/1")
        for m in SINGLE_MODALITIES:
            if self.availability.get(m, False) and m not in self.features:
                raise DataError(f"record {self.id}: {m} marked available but has no features")

    def available(self, modality: str) -> bool:
        return bool(self.availability.get(modality, False))


@dataclass(frozen=True)
class Dataset:
    records: tuple
    provenance: dict = field(default_factory=lambda: {"kind": "ingested"})

    def __post_init__(self):
        object.__setattr__(self, "records", tuple(self.records))
        if not self.records:
            raise DataError("dataset is empty")
        ids = [r.id for r in self.records]
        if len(set(ids)) != len(ids):
            raise DataError("record ids are not unique")

    def __len__(self):
        return len(self.records)

    def labels(self, task: str) -> np.ndarray:
        check_task(task)
        return np.array([r.labels[task] for r in self.records], dtype=np.int64)

    @property
    def ids(self):
        return [r.id for r in self.records]


# ---------------------------------------------------------------------------
# synthetic generator
# ---------------------------------------------------------------------------


def default_effects(delta: float = 0.5) -> dict:
    """One planted modality per task, cycling through the single modalities."""
    return {(t, SINGLE_MODALITIES[i % len(SINGLE_MODALITIES)]): delta for i, t in enumerate(TASKS)}


@dataclass
class GeneratorConfig:
    n_records: int = 968
    ratios: dict = field(default_factory=lambda: dict(DEFAULT_RATIOS))
    effects: dict = field(default_factory=default_effects)
    shapes: dict = field(default_factory=lambda: dict(DEFAULT_SHAPES))
    noise: float = 1.0
    missing_rate: float = 0.0

    def validate(self) -> "GeneratorConfig":
        if self.n_records < 1:
            raise ValueError("n_records must be positive")
        for t in TASKS:
            r = self.ratios.get(t)
            if r is None or not r > 0:
                raise ValueError(f"ratio for {t} must be > 0, got {r!r}")
        for (t, m), d in self.effects.items():
            check_task(t)
            if m not in SINGLE_MODALITIES:
                raise ValueError(f"effects may only target single modalities, got {m!r}")
            if not d >= 0:
                raise ValueError(f"effect size for ({t}, {m}) must be >= 0")
        for m in SINGLE_MODALITIES:
            if m not in self.shapes:
                raise ValueError(f"no shape given for {m}")
            lo, hi, d = self.shapes[m]
            if not 1 <= lo <= hi or d < 1:
                raise ValueError(f"bad shape range for {m}: {self.shapes[m]}")
            if m == "physio" and lo < 2:
                raise ValueError("physio sequences need at least 2 time steps")
        if not self.noise > 0:
            raise ValueError("noise must be > 0")
        if not 0 <= self.missing_rate < 1:
            raise ValueError("missing_rate must lie in [0, 1)")
        return self

    def to_dict(self) -> dict:
        return {
            "n_records": self.n_records,
            "ratios": {t: self.ratios[t] for t in TASKS},
            "effects": {f"{t}:{m}": d for (t, m), d in sorted(self.effects.items())},
            "shapes": {m: list(self.shapes[m]) for m in SINGLE_MODALITIES},
            "noise": self.noise,
            "missing_rate": self.missing_rate,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "GeneratorConfig":
        d = dict(d)
        known = {"n_records", "ratios", "effects", "shapes", "noise", "missing_rate"}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown generator keys: {', '.join(sorted(unknown))}")
        cfg = cls()
        if "n_records" in d:
            cfg.n_records = int(d["n_records"])
        if "ratios" in d:
            cfg.ratios = {**cfg.ratios, **{check_task(k): float(v) for k, v in d["ratios"].items()}}
        if "effects" in d:
            eff = {}
            for k, v in d["effects"].items():
                t, _, m = k.partition(":")
                eff[(t, m)] = float(v)
            cfg.effects = eff
        if "shapes" in d:
            cfg.shapes = {**cfg.shapes, **{k: tuple(int(x) for x in v) for k, v in d["shapes"].items()}}
        if "noise" in d:
            cfg.noise = float(d["noise"])
        if "missing_rate" in d:
            cfg.missing_rate = float(d["missing_rate"])
        return cfg.validate()

    def hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


def generate_synthetic(cfg: GeneratorConfig, seed: int) -> Dataset:
    """Draw a synthetic screening dataset with planted per-modality mean shifts.

    Every entry of a feature matrix is Normal(0, noise). For each task with a
    positive label, the modalities listed in ``cfg.effects`` for that task get
    ``+delta`` added to every entry. Positive counts are fixed at
    ``round(n / (1 + ratio))`` so realized ratios track the configured ones.
    """
    cfg.validate()
    rng = np.random.default_rng(seed)
    n = cfg.n_records

    labels = np.zeros((n, len(TASKS)), dtype=np.int64)
    for j, t in enumerate(TASKS):
        n_pos = int(round(n / (1.0 + cfg.ratios[t])))
        labels[rng.permutation(n)[:n_pos], j] = 1

    shift = np.zeros((n, len(SINGLE_MODALITIES)))
    for (t, m), d in cfg.effects.items():
        shift[:, SINGLE_MODALITIES.index(m)] += d * labels[:, TASKS.index(t)]

    width = len(str(n - 1))
    records = []
    for i in range(n):
        avail = {m: True for m in SINGLE_MODALITIES}
        if cfg.missing_rate > 0:
            drop = rng.random(len(SINGLE_MODALITIES)) < cfg.missing_rate
            if drop.all():
                drop[rng.integers(len(SINGLE_MODALITIES))] = False
            avail = {m: not bool(x) for m, x in zip(SINGLE_MODALITIES, drop)}
        feats = {}
        for k, m in enumerate(SINGLE_MODALITIES):
            lo, hi, d = cfg.shapes[m]
            T = int(rng.integers(lo, hi + 1))
            values = rng.normal(0.0, cfg.noise, size=(T, d)) + shift[i, k]
            if avail[m]:
                feats[m] = FeatureSequence(values, m)
        avail.update({m: False for m in CROSS_MODALITIES})
        records.append(ParticipantRecord(
            id=f"S{i:0{width}d}",
            features=feats,
            labels={t: int(labels[i, j]) for j, t in enumerate(TASKS)},
            availability=avail,
        ))
    return Dataset(records, {"kind": "synthetic", "seed": int(seed), "config_hash": cfg.hash()})


def imbalance_ratio(dataset: Dataset, task: str) -> float:
    """Majority count over minority count; ``inf`` (with a warning) if a class is absent."""
    y = dataset.labels(task)
    pos = int(y.sum())
    neg = len(y) - pos
    if pos == 0 or neg == 0:
        warnings.warn(f"task {task}: only one class present, ratio is infinite", RuntimeWarning, stacklevel=2)
        return math.inf
    return max(pos, neg) / min(pos, neg)


# ---------------------------------------------------------------------------
# manifest I/O
# ---------------------------------------------------------------------------


def read_feature_csv(path, modality: str, record_id: str = "?") -> FeatureSequence:
    path = Path(path)
    if modality == "mfcc" and path.suffix.lower() == ".wav":
        from .features import MfccConfig, mfcc, read_wav, standardize_duration

        return FeatureSequence(mfcc(standardize_duration(read_wav(path)), MfccConfig()), modality)
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError(f"{path}: empty feature file") from None
        if not header or header[0] != "t" or header[1:] != [f"f{j}" for j in range(len(header) - 1)]:
            raise SchemaError(f"{path}: header must be t,f0,...,f(D-1)")
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise SchemaError(f"{path}: line {lineno} has {len(row)} cells, expected {len(header)}")
            vals = []
            for j, cell in enumerate(row[1:]):
                try:
                    x = float(cell)
                except ValueError:
                    raise DataError(f"record {record_id}, {modality}: bad number {cell!r} at row {lineno - 2}, column f{j}") from None
                if not math.isfinite(x):
                    raise DataError(f"record {record_id}, {modality}: non-finite value at row {lineno - 2}, column f{j}")
                vals.append(x)
            rows.append(vals)
    if not rows:
        raise SchemaError(f"{path}: no data rows")
    return FeatureSequence(np.array(rows), modality)


def write_feature_csv(path, values: np.ndarray) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t"] + [f"f{j}" for j in range(values.shape[1])])
        for t, row in enumerate(values):
            w.writerow([t] + [repr(float(x)) for x in row])


def _read_labels(path) -> dict:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        cols = reader.fieldnames or []
        if "id" not in cols:
            raise SchemaError(f"{path}: label file has no id column")
        absent = [t for t in TASKS if t not in cols]
        if absent:
            raise SchemaError(f"{path}: label file is missing task column(s): {', '.join(absent)}")
        rows = []
        for lineno, row in enumerate(reader, start=2):
            labels = {}
            for t in TASKS:
                cell = (row[t] or "").strip()
                if cell not in ("0", "1"):
                    raise DataError(f"{path}: line {lineno}, column {t}: label must be 0 or 1, got {cell!r}")
                labels[t] = int(cell)
            rows.append((row["id"], labels))
    return rows


def load_manifest(path) -> Dataset:
    """Load a dataset from a JSON manifest plus label and feature CSVs.

    Paths inside the manifest are resolved relative to the manifest's folder.
    A modality that is not listed, listed as ``null`` or whose file does not
    exist is marked unavailable for that record.
    """
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise ManifestParseError(path, e.lineno, e.msg) from None
    if not isinstance(doc, dict) or "records" not in doc or "label_file" not in doc:
        raise SchemaError(f"{path}: manifest needs 'records' and 'label_file'")
    base = path.parent
    label_rows = _read_labels(base / doc["label_file"])

    records = []
    for entry in doc["records"]:
        try:
            rid = str(entry["id"])
            row = int(entry["labels_csv_row"])
            feat_paths = entry.get("features") or {}
        except (KeyError, TypeError, ValueError):
            raise SchemaError(f"{path}: record entry {entry!r} needs id, labels_csv_row, features") from None
        if not 0 <= row < len(label_rows):
            raise SchemaError(f"{path}: record {rid}: labels_csv_row {row} out of range")
        label_id, labels = label_rows[row]
        if label_id != rid:
            raise SchemaError(f"{path}: record {rid}: label row {row} belongs to {label_id}")
        unknown = set(feat_paths) - set(SINGLE_MODALITIES)
        if unknown:
            raise SchemaError(f"{path}: record {rid}: unknown modality {', '.join(sorted(unknown))}")
        feats, avail = {}, {}
        for m in SINGLE_MODALITIES:
            p = feat_paths.get(m)
            if p is None:
                avail[m] = False
                continue
            fp = base / p
            if not fp.exists():
                log.warning("record %s: %s file %s not found, marking unavailable", rid, m, fp)
                avail[m] = False
                continue
            feats[m] = read_feature_csv(fp, m, rid)
            avail[m] = True
        avail.update({m: False for m in CROSS_MODALITIES})
        records.append(ParticipantRecord(rid, feats, labels, avail))
    return Dataset(records, {"kind": "ingested", "manifest": str(path)})


def save_manifest(dataset: Dataset, directory) -> Path:
    """Write ``dataset`` as manifest.json + labels.csv + one CSV per feature matrix."""
    directory = Path(directory)
    (directory / "features").mkdir(parents=True, exist_ok=True)
    with open(directory / "labels.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["id", *TASKS])
        for r in dataset.records:
            w.writerow([r.id] + [r.labels[t] for t in TASKS])
    entries = []
    for i, r in enumerate(dataset.records):
        paths = {}
        for m in SINGLE_MODALITIES:
            if r.available(m):
                rel = f"features/{r.id}_{m}.csv"
                write_feature_csv(directory / rel, r.features[m].values)
                paths[m] = rel
        entries.append({"id": r.id, "labels_csv_row": i, "features": paths})
    manifest = directory / "manifest.json"
    manifest.write_text(json.dumps({"label_file": "labels.csv", "records": entries}, indent=1) + "\n", encoding="utf-8")
    return manifest


def datasets_equal(a: Dataset, b: Dataset) -> bool:
    if a.ids != b.ids:
        return False
    for ra, rb in zip(a.records, b.records):
        if dict(ra.labels) != dict(rb.labels):
            return False
        for m in SINGLE_MODALITIES:
            if ra.available(m) != rb.available(m):
                return False
            if ra.available(m) and not np.array_equal(ra.features[m].values, rb.features[m].values):
                return False
    return True
