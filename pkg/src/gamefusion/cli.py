"""Command-line entry point.

Exit codes: 0 success, 1 usage error, 2 data or configuration error,
3 runtime failure. Every failure prints one diagnostic line to stderr.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import analysis
from .crossmodal import DEFAULT_SIGN
from .dataset import TASKS, DataError, Dataset, GeneratorConfig, check_task, generate_synthetic, load_manifest, \
    save_manifest, write_feature_csv
from .embrace import save_model
from .evalharness import CM_ORDERS, CVResult, cross_validate, majority_accuracy, write_predictions
from .features import MfccConfig, mfcc, read_wav, standardize_duration
from .pipeline import RawFeatures
from .trainer import TrainConfig

log = logging.getLogger("gamefusion")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_RUNTIME = 0, 1, 2, 3
CONFIG_KEYS = {"manifest", "generator", "tasks", "train", "k", "seed", "sign", "cm_order",
               "comorbidity_mode", "workers", "out"}


class UsageError(Exception):
    pass


class ConfigError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


@dataclass
class RunConfig:
    manifest: str | None = None
    generator: GeneratorConfig = field(default_factory=GeneratorConfig)
    tasks: tuple = ("overall",)
    train: TrainConfig = field(default_factory=TrainConfig)
    k: int = 10
    seed: int = 0
    sign: float = DEFAULT_SIGN
    cm_order: str = "normalize-average"
    comorbidity_mode: str = "conditional"
    workers: int = 1
    out: str = "out"

    def validate(self):
        for t in self.tasks:
            check_task(t)
        self.train.validate()
        if self.k < 2:
            raise ValueError("k must be >= 2")
        if self.cm_order not in CM_ORDERS:
            raise ValueError(f"cm-order must be one of {', '.join(CM_ORDERS)}")
        if self.comorbidity_mode not in analysis.COMORBIDITY_MODES:
            raise ValueError(f"comorbidity mode must be one of {', '.join(analysis.COMORBIDITY_MODES)}")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")
        if self.sign == 0:
            raise ValueError("sign must be nonzero")
        if self.manifest is None:
            self.generator.validate()
        return self

    def to_dict(self):
        d = {
            "tasks": list(self.tasks),
            "train": self.train.to_dict(),
            "k": self.k,
            "seed": self.seed,
            "sign": self.sign,
            "cm_order": self.cm_order,
            "comorbidity_mode": self.comorbidity_mode,
        }
        if self.manifest is None:
            d["generator"] = self.generator.to_dict()
        else:
            d["manifest"] = str(self.manifest)
        return d

    def hash(self):
        # workers and the output folder do not affect results
        return hashlib.sha256(json.dumps(self.to_dict(), sort_keys=True).encode()).hexdigest()[:16]


def _expand_tasks(values):
    out = []
    for v in values:
        for t in v.split(","):
            t = t.strip()
            if t == "all":
                out.extend(TASKS)
            elif t:
                out.append(t)
    return tuple(dict.fromkeys(out))


def _load_config_file(path):
    try:
        with open(path, encoding="utf-8") as fh:
            d = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}: invalid JSON: {exc.msg}") from None
    if not isinstance(d, dict):
        raise ConfigError(f"{path}: config must be a JSON object")
    unknown = set(d) - CONFIG_KEYS
    if unknown:
        raise ConfigError(f"{path}: unknown config keys: {', '.join(sorted(unknown))}")
    return d


def build_config(args) -> RunConfig:
    cfg = RunConfig(workers=os.cpu_count() or 1)
    try:
        if args.config:
            d = _load_config_file(args.config)
            if "manifest" in d and "generator" in d:
                raise ConfigError("config gives both a manifest and a generator")
            if "manifest" in d:
                cfg.manifest = str((Path(args.config).parent / d["manifest"]))
            if "generator" in d:
                cfg.generator = GeneratorConfig.from_dict(d["generator"])
            if "train" in d:
                cfg.train = TrainConfig.from_dict(d["train"])
            if "tasks" in d:
                cfg.tasks = _expand_tasks(d["tasks"] if isinstance(d["tasks"], list) else [d["tasks"]])
            for key in ("k", "seed", "workers"):
                if key in d:
                    setattr(cfg, key, int(d[key]))
            if "sign" in d:
                cfg.sign = float(d["sign"])
            for key in ("cm_order", "comorbidity_mode", "out"):
                if key in d:
                    setattr(cfg, key, str(d[key]))
        if args.manifest:
            cfg.manifest = args.manifest
        if args.gen_default:
            cfg.manifest, cfg.generator = None, GeneratorConfig()
        if args.task:
            cfg.tasks = _expand_tasks(args.task)
        for key in ("k", "seed", "workers", "sign", "cm_order", "comorbidity_mode", "out"):
            v = getattr(args, key)
            if v is not None:
                setattr(cfg, key, v)
        if args.seed is not None:
            cfg.train.seed = args.seed
        else:
            cfg.train.seed = cfg.seed
        if args.epochs is not None:
            cfg.train.epochs = args.epochs
        if args.lr is not None:
            cfg.train.lr = args.lr
        return cfg.validate()
    except (ValueError, TypeError, KeyError) as exc:
        raise ConfigError(str(exc)) from None


def load_dataset(cfg: RunConfig) -> Dataset:
    if cfg.manifest is not None:
        return load_manifest(cfg.manifest)
    return generate_synthetic(cfg.generator, cfg.seed)


def _write_run_manifest(out: Path, command: str, cfg: RunConfig, dataset: Dataset | None, files):
    manifest = {
        "command": command,
        "config": cfg.to_dict(),
        "config_hash": cfg.hash(),
        "seed": cfg.seed,
        "dataset": dict(dataset.provenance) if dataset is not None else None,
        "outputs": sorted(str(f.relative_to(out)) for f in files),
    }
    with open(out / "run_manifest.json", "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=1, sort_keys=True, default=str)
        fh.write("\n")


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------


def _eval_task(dataset, raw, task, cfg: RunConfig, out: Path, files) -> CVResult:
    log.info("cross-validating %s", task)
    cv = cross_validate(dataset, task, cfg.train, k=cfg.k, seed=cfg.seed, sign=cfg.sign,
                        cm_order=cfg.cm_order, workers=cfg.workers, raw=raw)
    d = out / "eval"
    d.mkdir(parents=True, exist_ok=True)
    cv.report.write_csv(d / f"{task}_metrics.csv")
    report = cv.report.to_dict()
    report["majority_accuracy"] = majority_accuracy(dataset.labels(task), cv.folds)
    with open(d / f"{task}_metrics.json", "w", encoding="utf-8") as fh:
        json.dump(report, fh, indent=1)
        fh.write("\n")
    write_predictions(cv, dataset, d / f"{task}_predictions.csv")
    md = d / task
    md.mkdir(exist_ok=True)
    for fr in cv.fold_results:
        save_model(fr.model, md / f"fold{fr.index}_model.json")
        fr.history.to_csv(md / f"fold{fr.index}_history.csv")
    files.extend([d / f"{task}_metrics.csv", d / f"{task}_metrics.json", d / f"{task}_predictions.csv"])
    files.extend(sorted(md.iterdir()))
    return cv


def cmd_gen(cfg, dataset, out, files):
    d = out / "dataset"
    save_manifest(dataset, d)
    files.extend(sorted(p for p in d.rglob("*") if p.is_file()))


def cmd_eval(cfg, dataset, out, files, raw=None):
    raw = raw or RawFeatures.from_dataset(dataset)
    return {t: _eval_task(dataset, raw, t, cfg, out, files) for t in cfg.tasks}


def cmd_crosspred(cfg, dataset, out, files, results=None):
    raw = RawFeatures.from_dataset(dataset)
    results = results or {}
    M = np.empty((len(cfg.tasks), len(TASKS)))
    labels = {t: dataset.labels(t) for t in TASKS}
    for i, t in enumerate(cfg.tasks):
        cv = results.get(t) or cross_validate(dataset, t, cfg.train, k=cfg.k, seed=cfg.seed, sign=cfg.sign,
                                              workers=cfg.workers, raw=raw)
        M[i] = [analysis.score_against(cv, labels[tj]) for tj in TASKS]
    cp = analysis.CrossPredictionMatrix(M, tuple(cfg.tasks), TASKS)
    cp.write_csv(out / "crosspred.csv")
    cp.write_json(out / "crosspred.json")
    files.extend([out / "crosspred.csv", out / "crosspred.json"])


def cmd_ablate(cfg, dataset, out, files):
    raw = RawFeatures.from_dataset(dataset)
    d = out / "ablation"
    d.mkdir(parents=True, exist_ok=True)
    for t in cfg.tasks:
        log.info("ablating %s", t)
        rep = analysis.ablation(dataset, t, cfg.train, k=cfg.k, seed=cfg.seed, workers=cfg.workers,
                                sign=cfg.sign, raw=raw)
        rep.write_csv(d / f"{t}.csv")
        rep.write_json(d / f"{t}.json")
        files.extend([d / f"{t}.csv", d / f"{t}.json"])


def cmd_comorbid(cfg, dataset, out, files):
    cm = analysis.comorbidity(dataset, cfg.comorbidity_mode)
    cm.write_csv(out / "comorbidity.csv")
    cm.write_json(out / "comorbidity.json")
    files.extend([out / "comorbidity.csv", out / "comorbidity.json"])


def cmd_contrib(cfg, dataset, out, files, results=None):
    raw = RawFeatures.from_dataset(dataset)
    results = results or {}
    d = out / "contribution"
    d.mkdir(parents=True, exist_ok=True)
    for t in cfg.tasks:
        cv = results.get(t) or cross_validate(dataset, t, cfg.train, k=cfg.k, seed=cfg.seed, sign=cfg.sign,
                                              workers=cfg.workers, raw=raw)
        rep = analysis.contribution(cv)
        rep.write_csv(d / f"{t}.csv")
        rep.write_json(d / f"{t}.json")
        files.extend([d / f"{t}.csv", d / f"{t}.json"])


def cmd_report(cfg, dataset, out, files):
    raw = RawFeatures.from_dataset(dataset)
    results = cmd_eval(cfg, dataset, out, files, raw)
    cmd_contrib(cfg, dataset, out, files, results)
    cmd_crosspred(cfg, dataset, out, files, results)
    cmd_comorbid(cfg, dataset, out, files)
    cmd_ablate(cfg, dataset, out, files)


COMMANDS = {
    "gen": cmd_gen,
    "eval": cmd_eval,
    "crosspred": cmd_crosspred,
    "ablate": cmd_ablate,
    "comorbid": cmd_comorbid,
    "contrib": cmd_contrib,
    "report": cmd_report,
}


def run_mfcc(args) -> int:
    feats = mfcc(standardize_duration(read_wav(args.wav)), MfccConfig())
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        write_feature_csv(out / f"{Path(args.wav).stem}_mfcc.csv", feats)
    else:
        sys.stdout.write("t," + ",".join(f"f{j}" for j in range(feats.shape[1])) + "\n")
        for t, row in enumerate(feats):
            sys.stdout.write(f"{t}," + ",".join(repr(float(x)) for x in row) + "\n")
    return EXIT_OK


def make_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--config", help="JSON run configuration; flags override its values")
    src = common.add_mutually_exclusive_group()
    src.add_argument("--manifest", help="dataset manifest JSON")
    src.add_argument("--gen-default", action="store_true", help="use the default synthetic generator")
    common.add_argument("--task", action="append", help="task name, comma list or 'all' (repeatable)")
    common.add_argument("--seed", type=int, help="master seed")
    common.add_argument("--k", type=int, help="number of CV folds")
    common.add_argument("--epochs", type=int)
    common.add_argument("--lr", type=float)
    common.add_argument("--out", help="output directory (default: out)")
    common.add_argument("--workers", type=int, help="parallel fold workers (default: CPU count)")
    common.add_argument("--sign", type=float, help="attention softmax sign (-1 or +1)")
    common.add_argument("--cm-order", dest="cm_order", choices=CM_ORDERS)
    common.add_argument("--comorbidity-mode", dest="comorbidity_mode", choices=analysis.COMORBIDITY_MODES)
    common.add_argument("-v", "--verbose", action="store_true")

    p = _Parser(prog="gamefusion", description="Multimodal screening pipeline on ingested or synthetic features.")
    sub = p.add_subparsers(dest="command", metavar="COMMAND", parser_class=_Parser)
    sub.add_parser("gen", parents=[common], help="write a synthetic dataset")
    m = sub.add_parser("mfcc", help="MFCC CSV of a 16 kHz mono WAV file")
    m.add_argument("wav")
    m.add_argument("--out", help="output directory (default: stdout)")
    sub.add_parser("eval", parents=[common], help="cross-validated metrics per task")
    sub.add_parser("crosspred", parents=[common], help="train on one task, score on every task")
    sub.add_parser("ablate", parents=[common], help="drop each fusion input in turn")
    sub.add_parser("comorbid", parents=[common], help="label co-occurrence matrix")
    sub.add_parser("contrib", parents=[common], help="per-input contribution ratios")
    sub.add_parser("report", parents=[common], help="all of the above")
    return p


def main(argv=None) -> int:
    try:
        args = make_parser().parse_args(argv)
        if args.command is None:
            raise UsageError("a command is required")
    except UsageError as exc:
        print(f"gamefusion: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE

    logging.basicConfig(level=logging.INFO if getattr(args, "verbose", False) else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.command == "mfcc":
        try:
            return run_mfcc(args)
        except (OSError, ValueError) as exc:
            print(f"gamefusion: data error: {exc}", file=sys.stderr)
            return EXIT_DATA

    try:
        cfg = build_config(args)
        dataset = load_dataset(cfg)
    except (ConfigError, DataError, ValueError, OSError) as exc:
        print(f"gamefusion: data error: {exc}", file=sys.stderr)
        return EXIT_DATA

    out = Path(cfg.out)
    files = []
    try:
        out.mkdir(parents=True, exist_ok=True)
        COMMANDS[args.command](cfg, dataset, out, files)
        _write_run_manifest(out, args.command, cfg, dataset, files)
    except (DataError, OSError) as exc:
        print(f"gamefusion: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except Exception as exc:  # noqa: BLE001 - any failure mid-run is a runtime error
        print(f"gamefusion: runtime error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
