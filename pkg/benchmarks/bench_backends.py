"""Time the compiled kernels against the pure-Python fallbacks.

    python benchmarks/bench_backends.py [--repeat 5]

Covers the three hot loops: single DTW distances, the per-record
cross-modal feature pass, and one training epoch.
"""

import argparse
import time

import numpy as np

from gamefusion import _dtw_py, trainer
from gamefusion.dataset import GeneratorConfig, generate_synthetic
from gamefusion.embrace import FusionModel
from gamefusion.pipeline import FusionLayout, RawFeatures, build_fold_inputs

try:
    from gamefusion import _dtw_ext
except ImportError:
    _dtw_ext = None


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def report(name, t_py, t_c):
    if t_c is None:
        print(f"{name:<28} python {t_py * 1e3:9.2f} ms   compiled  (not built)")
    else:
        print(f"{name:<28} python {t_py * 1e3:9.2f} ms   compiled {t_c * 1e3:9.2f} ms   x{t_py / t_c:6.1f}")


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--records", type=int, default=200, help="records in the training-epoch benchmark")
    args = ap.parse_args()
    rng = np.random.default_rng(0)

    pairs = [(rng.normal(size=rng.integers(5, 30)), rng.normal(size=rng.integers(5, 30))) for _ in range(200)]
    t_py = best_of(lambda: [_dtw_py.dtw_distance(x, y) for x, y in pairs], args.repeat)
    t_c = best_of(lambda: [_dtw_ext.dtw_distance(x, y) for x, y in pairs], args.repeat) if _dtw_ext else None
    report("dtw_distance x200", t_py, t_c)

    feats = [rng.normal(size=d) for d in (8, 6, 4, 24, 13, 10, 8, 8)]
    flat = np.concatenate(feats)
    offsets = np.concatenate([[0], np.cumsum([len(f) for f in feats])])
    t_py = best_of(lambda: [_dtw_py.cross_features_flat(flat, offsets, -1.0) for _ in range(20)], args.repeat)
    t_c = (best_of(lambda: [_dtw_ext.cross_features_flat(flat, offsets, -1.0) for _ in range(20)], args.repeat)
           if _dtw_ext else None)
    report("cross features x20 records", t_py, t_c)

    ds = generate_synthetic(GeneratorConfig(n_records=args.records), 0)
    raw = RawFeatures.from_dataset(ds)
    fi = build_fold_inputs(raw, np.arange(len(ds)), FusionLayout())
    y = ds.labels("overall")
    cfg = trainer.TrainConfig(epochs=1)

    def epoch(run):
        r = np.random.default_rng(1)
        m = FusionModel.initialize(FusionLayout().dims(raw), fi.names, r)
        run(m, fi.inputs, y, cfg, r)

    t_py = best_of(lambda: epoch(trainer._train_reference), args.repeat)
    t_c = best_of(lambda: epoch(trainer._train_compiled), args.repeat) if trainer._fusion_ext else None
    report(f"train epoch ({args.records} records)", t_py, t_c)


if __name__ == "__main__":
    main()
