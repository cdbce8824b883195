#!/usr/bin/env python3
"""Smoke test for the botsift_py extension module.

Build the extension first:

    cargo build -p botsift-py --release

then run:

    python3 python/smoke_test.py
"""

import math
import shutil
import sys
import tempfile
from pathlib import Path

REPO = Path(__file__).resolve().parent.parent


def load_module():
    candidates = [
        REPO / "target" / "release" / "libbotsift_py.so",
        REPO / "target" / "debug" / "libbotsift_py.so",
        REPO / "target" / "release" / "libbotsift_py.dylib",
        REPO / "target" / "debug" / "libbotsift_py.dylib",
    ]
    built = next((p for p in candidates if p.exists()), None)
    if built is None:
        sys.exit("extension not built; run: cargo build -p botsift-py --release")
    stage = Path(tempfile.mkdtemp(prefix="botsift_py_"))
    shutil.copy(built, stage / "botsift_py.so")
    sys.path.insert(0, str(stage))
    import botsift_py

    return botsift_py


def main():
    bs = load_module()
    print(f"botsift_py {bs.__version__}")

    # math primitives
    assert bs.feature_schema() == [
        "sPort", "dPort", "mLen", "vLen", "mTime", "vTime",
        "mResp", "vResp", "nBytes", "nSYN", "nPackets",
    ]
    assert abs(bs.gini_impurity([5, 5]) - 0.5) < 1e-12
    assert abs(bs.entropy([5, 5]) - 1.0) < 1e-12
    assert abs(bs.entropy([1, 1, 2]) - 1.5) < 1e-12
    assert abs(bs.performance_ratio(0.85, 0.78e-6) - 1089.7) < 0.1
    assert bs.subset_features("five") == ["dPort", "nPackets", "nBytes", "vLen", "mLen"]
    print("math primitives: ok")

    # capture ingestion on the bundled synthetic capture
    data = REPO / "crates" / "botsift" / "tests" / "data"
    flows = bs.extract_dataset(
        [str(data / "synthetic.pcap")], str(data / "synthetic.labels")
    )
    assert len(flows) == 5, len(flows)
    assert flows.classes == ["Miuref", "Normal", "Rbot"]
    values, label = flows.row(0)
    assert label == "Miuref"
    assert values[0] == 49152.0  # sPort of the first flow
    print(f"extract_dataset: ok ({flows!r})")

    # a synthetic learnable dataset: class determined by the dPort column
    tmp = Path(tempfile.mkdtemp(prefix="botsift_smoke_"))
    csv = tmp / "toy.csv"
    schema = bs.feature_schema()
    with open(csv, "w") as fh:
        fh.write("label," + ",".join(schema) + "\n")
        for i in range(120):
            port = [80, 443, 6667][i % 3]
            label = {80: "web", 443: "tls", 6667: "bot"}[port]
            row = [
                1024 + i, port, (i * 37) % 900, (i * 11) % 5000, 0.01 * (i % 7),
                0.001 * (i % 5), 0.02, 0.0, ((i * 37) % 900) * 10, 2, 10,
            ]
            fh.write(label + "," + ",".join(str(v) for v in row) + "\n")

    ds = bs.Dataset.read_csv(str(csv))
    assert len(ds) == 120
    counts = ds.class_counts()
    assert sum(counts.values()) == 120

    balanced = ds.quasi_balance(30, seed=1)
    assert all(v <= 30 for v in balanced.class_counts().values())

    projected = ds.project(bs.subset_features("five"))
    assert projected.schema == bs.subset_features("five")
    print("Dataset: ok")

    # ranking: dPort fully determines the class here
    gi = bs.rank_features(ds, "gi", seed=3)
    ig = bs.rank_features(ds, "ig")
    assert gi[0][0] == "dPort", gi
    assert ig[0][0] == "dPort", ig
    assert abs(sum(score for _, score in gi) - 1.0) < 1e-9
    print("rank_features: ok (gi and ig both lead with dPort)")

    # training, prediction, save/load round trip
    model = bs.train(ds, "dt", seed=5)
    values, label = ds.row(7)
    assert model.predict(values) == label
    saved = tmp / "dt.json"
    model.save(str(saved))
    back = bs.load_model(str(saved))
    assert back.predict(values) == label
    assert back.kind == "dt"
    print("train/save/load: ok")

    # cross-validation and the full evaluation report
    report = bs.cross_validate(ds, "dt", folds=5, seed=5)
    assert report["weighted_f1"] == 1.0, report["weighted_f1"]
    full = bs.evaluate(ds, "rf", subset="five", folds=5, seed=5, m=5)
    assert full["subset"] == "five"
    assert full["latency_seconds_per_sample"] > 0
    assert full["performance_per_ms"] > 0
    assert len(full["per_class"]) == 3
    print(f"evaluate: ok (weighted F1 {full['weighted_f1']:.3f}, "
          f"{full['latency_seconds_per_sample']:.2e} s/sample)")

    curve = bs.feature_curve(ds, "ig", "dt", folds=4, seed=5)
    assert len(curve) == 11
    assert curve[0]["feature_added"] == "dPort"
    assert curve[-1]["f1"] == 1.0
    print("feature_curve: ok (11 points, dPort first)")

    knn = bs.train(ds, "knn", k=1)
    latency = bs.benchmark_latency(knn, ds, warmup=1, passes=2)
    assert latency > 0 and math.isfinite(latency)
    print(f"benchmark_latency: ok ({latency:.2e} s/sample)")

    print("smoke test passed")


if __name__ == "__main__":
    main()
