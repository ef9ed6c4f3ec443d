"""Run directories and their files.

A run writes into <output_root>/<config_hash>/:

  * metrics.jsonl: one JSON object per epoch.
  * metrics.csv: the same records as a csv table.
  * summary.json: config hash, method, final and last-ten accuracy.
  * model.ckpt: final model and optimizer state.
  * manifest.json: resolved config, artifact checksums, wall time.

metrics.* and summary.json contain nothing non-deterministic, so a
repeated run with the same resolved config reproduces them byte for
byte (on the same kernel backend). Wall-clock time lives only in the
manifest.
"""

import csv
import hashlib
import io
import json
import os
import time
from pathlib import Path

from .config import config_hash, to_experiment_config
from .nn import save_checkpoint
from .pipeline import last_ten_summary, run_experiment

METRIC_FIELDS = (
    "epoch",
    "train_loss",
    "val_accuracy",
    "test_accuracy",
    "selection_precision",
    "attack_success",
)

ENV_OUTPUT_ROOT = "INSCORR_OUTPUT_ROOT"


def output_root(explicit=None):
    if explicit:
        return Path(explicit)
    return Path(os.environ.get(ENV_OUTPUT_ROOT, "runs"))


def metrics_jsonl_bytes(metrics):
    lines = []
    for m in metrics:
        record = {f: getattr(m, f) for f in METRIC_FIELDS}
        lines.append(json.dumps(record, sort_keys=True))
    return ("".join(line + "\n" for line in lines)).encode("utf-8")


def metrics_csv_bytes(metrics):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(METRIC_FIELDS)
    for m in metrics:
        writer.writerow(
            "" if (v := getattr(m, f)) is None else v for f in METRIC_FIELDS
        )
    return buf.getvalue().encode("utf-8")


def _sha256(data):
    return hashlib.sha256(data).hexdigest()


def write_run(resolved, root, data=None):
    """Execute the resolved config and persist its artifacts.

    Returns (run_dir, summary dict). The run directory is keyed by the
    config hash; rerunning overwrites it in place.
    """
    digest = config_hash(resolved)
    run_dir = Path(root) / digest
    run_dir.mkdir(parents=True, exist_ok=True)

    cfg = to_experiment_config(resolved)
    started = time.perf_counter()
    result = run_experiment(cfg, data=data)
    wall = time.perf_counter() - started

    files = {
        "metrics.jsonl": metrics_jsonl_bytes(result.metrics),
        "metrics.csv": metrics_csv_bytes(result.metrics),
    }
    summary = {
        "config_hash": digest,
        "method": resolved["method"],
        "epochs": len(result.metrics),
        "final_test_accuracy": (
            result.metrics[-1].test_accuracy if result.metrics else None
        ),
        "last_ten_mean": None,
        "last_ten_std": None,
    }
    if len(result.metrics) >= 10:
        summary["last_ten_mean"], summary["last_ten_std"] = last_ten_summary(
            result.metrics
        )
    files["summary.json"] = (
        json.dumps(summary, sort_keys=True, indent=2) + "\n"
    ).encode("utf-8")

    for name, blob in files.items():
        (run_dir / name).write_bytes(blob)
    save_checkpoint(
        run_dir / "model.ckpt",
        result.model,
        result.optimizer,
        epoch=len(result.metrics),
        seed=cfg.seed_epochs,
    )
    files["model.ckpt"] = (run_dir / "model.ckpt").read_bytes()

    manifest = {
        "config_hash": digest,
        "config": resolved,
        "artifacts": {
            name: {"sha256": _sha256(blob), "bytes": len(blob)}
            for name, blob in sorted(files.items())
        },
        "wall_seconds": wall,
    }
    (run_dir / "manifest.json").write_text(
        json.dumps(manifest, sort_keys=True, indent=2) + "\n", encoding="utf-8"
    )
    return run_dir, summary
