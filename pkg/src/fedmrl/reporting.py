"""Metrics CSV/JSON sinks, the run manifest, and the landscape export.

Floats are written with ``repr`` so files are byte-stable across identical
runs and round-trip exactly.  The metrics writer flushes after every row, so
an aborted run still leaves a parseable prefix.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass

import numpy as np

from .config import config_to_dict
from .orchestrator import RoundRecord, fairness_landscape

CODE_VERSION = "fedmrl 0.1.0"


def _fmt(value) -> str:
    return repr(float(value))


def metrics_header(n_clients: int) -> list[str]:
    columns = ["round", "global_acc", "global_loss", "reward"]
    for name in ("loss", "acc", "mu", "alpha"):
        columns += [f"{name}_{h}" for h in range(n_clients)]
    columns.append("loss_variance")
    return columns


def record_to_row(record: RoundRecord) -> list[str]:
    row = [
        str(record.round_index),
        _fmt(record.global_acc),
        _fmt(record.global_loss),
        _fmt(record.reward_value),
    ]
    for block in (record.client_losses, record.client_accs, record.mus, record.alphas):
        row += [_fmt(v) for v in block]
    row.append(_fmt(record.loss_variance))
    return row


class MetricsWriter:
    """Streaming per-round CSV writer; one flush per row."""

    def __init__(self, path, n_clients: int):
        self.n_clients = n_clients
        self._fh = open(path, "w", encoding="utf-8", newline="")
        self._fh.write(",".join(metrics_header(n_clients)) + "\n")
        self._fh.flush()

    def write(self, record: RoundRecord) -> None:
        self._fh.write(",".join(record_to_row(record)) + "\n")
        self._fh.flush()

    def close(self) -> None:
        if not self._fh.closed:
            self._fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()
        return False


def write_metrics(records, path, n_clients: int | None = None) -> None:
    if not records:
        raise ValueError("no records to write")
    n = n_clients if n_clients is not None else len(records[0].client_losses)
    with MetricsWriter(path, n) as writer:
        for record in records:
            writer.write(record)


def read_metrics(path):
    """(header, float matrix) from a metrics CSV."""
    with open(path, encoding="utf-8") as fh:
        lines = [line.strip() for line in fh if line.strip()]
    header = lines[0].split(",")
    rows = np.array([[float(v) for v in line.split(",")] for line in lines[1:]])
    return header, rows


def macro_metrics(confusion: np.ndarray):
    """(macro_precision, macro_recall, macro_f1) from a confusion matrix."""
    confusion = np.asarray(confusion, dtype=np.float64)
    m = confusion.shape[0]
    precision = np.zeros(m)
    recall = np.zeros(m)
    f1 = np.zeros(m)
    for c in range(m):
        tp = confusion[c, c]
        col = confusion[:, c].sum()
        row = confusion[c, :].sum()
        precision[c] = tp / col if col > 0 else 0.0
        recall[c] = tp / row if row > 0 else 0.0
        if precision[c] + recall[c] > 0:
            f1[c] = 2.0 * precision[c] * recall[c] / (precision[c] + recall[c])
    return float(precision.mean()), float(recall.mean()), float(f1.mean())


def write_summary(records, path, confusion=None) -> dict:
    """Final-round metrics plus mean mu/alpha trajectories, as JSON."""
    if not records:
        raise ValueError("no records to summarize")
    final = records[-1]
    summary = {
        "rounds": len(records),
        "accuracy": final.global_acc,
        "loss": final.global_loss,
        "loss_variance": final.loss_variance,
        "per_class_recall": [float(v) for v in final.per_class_recall],
        "mean_mu": [float(np.mean(r.mus)) for r in records],
        "mean_alpha": [float(np.mean(r.alphas)) for r in records],
    }
    if confusion is not None:
        precision, recall, f1 = macro_metrics(confusion)
        summary["macro_precision"] = precision
        summary["macro_recall"] = recall
        summary["macro_f1"] = f1
        summary["confusion"] = np.asarray(confusion).tolist()
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(summary, fh, indent=2)
        fh.write("\n")
    return summary


def config_hash(cfg) -> str:
    flat = config_to_dict(cfg)
    canonical = "\n".join(f"{k}={flat[k]}" for k in sorted(flat))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


@dataclass
class RunManifest:
    config: dict
    config_hash: str
    seed: int
    started_at: str
    finished_at: str
    code_version: str = CODE_VERSION


def write_manifest(cfg, path, started_at: str, finished_at: str) -> RunManifest:
    manifest = RunManifest(
        config=config_to_dict(cfg),
        config_hash=config_hash(cfg),
        seed=cfg.seed,
        started_at=started_at,
        finished_at=finished_at,
    )
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(manifest.__dict__, fh, indent=2)
        fh.write("\n")
    return manifest


def emit_landscape(total_loss: float, grid_n: int, path) -> np.ndarray:
    """Two-column CSV of (loss_1, penalty) over the fixed-total curve."""
    table = fairness_landscape(total_loss, grid_n)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("f1,l_fair\n")
        for f1, penalty in table:
            fh.write(f"{_fmt(f1)},{_fmt(penalty)}\n")
    return table
