"""Dataset file format and mini-batching.

A dataset file is line-delimited: an optional leading manifest comment
``# n_samples=<k> positives=<k> seed=<k>`` followed by one JSON record per
line, ``{"target": <id>, "seq": [<ids>], "label": 0|1}``. Ids are validated
against the embedding store on load; malformed lines are reported with
their line number.
"""

from __future__ import annotations

import json

import numpy as np

from .config import HyperParams
from .embedding import Batch, Sample, load_embeddings
from .errors import DataError
from .linalg import FLOAT


def write_dataset(samples: list[Sample], path: str, seed: int) -> str:
    """Write records plus the manifest comment line; returns the manifest."""
    positives = sum(s.label for s in samples)
    manifest = f"n_samples={len(samples)} positives={positives} seed={seed}"
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"# {manifest}\n")
        for s in samples:
            fh.write(json.dumps({"target": s.target_id, "seq": s.seq_ids,
                                 "label": s.label}, separators=(",", ":")) + "\n")
    return manifest


def parse_manifest(line: str) -> dict:
    out = {}
    for tok in line.lstrip("#").split():
        if "=" in tok:
            key, val = tok.split("=", 1)
            out[key] = int(val)
    return out


def read_dataset(path: str, n_items: int, max_seq_len: int):
    """Parse and validate records; returns (samples, manifest dict or None)."""
    samples: list[Sample] = []
    manifest = None
    try:
        fh = open(path, "r", encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot open dataset {path}: {exc}") from exc
    with fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                if lineno == 1:
                    manifest = parse_manifest(line)
                continue
            try:
                rec = json.loads(line)
                target = int(rec["target"])
                seq = [int(v) for v in rec["seq"]]
                label = int(rec["label"])
            except (ValueError, KeyError, TypeError) as exc:
                raise DataError(f"{path}:{lineno}: malformed record ({exc})") from exc
            if label not in (0, 1):
                raise DataError(f"{path}:{lineno}: label must be 0 or 1, got {label}")
            if len(seq) > max_seq_len:
                raise DataError(
                    f"{path}:{lineno}: sequence length {len(seq)} exceeds limit {max_seq_len}")
            for item in (target, *seq):
                if not 0 <= item < n_items:
                    raise DataError(
                        f"{path}:{lineno}: item id {item} out of range [0, {n_items})")
            samples.append(Sample(target_id=target, seq_ids=seq, label=label))
    return samples, manifest


def load_dataset(path: str, embedding_path: str, hp: HyperParams):
    """Load one split plus its embedding store, cross-validated."""
    store = load_embeddings(embedding_path)
    samples, manifest = read_dataset(path, store.count, hp.seq_len)
    return samples, store, manifest


def build_batch(samples: list[Sample], max_seq_len: int) -> Batch:
    n = len(samples)
    target_ids = np.zeros(n, dtype=np.int64)
    seq_ids = np.zeros((n, max_seq_len), dtype=np.int64)
    mask = np.zeros((n, max_seq_len), dtype=FLOAT)
    labels = np.zeros(n, dtype=FLOAT)
    for i, s in enumerate(samples):
        target_ids[i] = s.target_id
        seq_ids[i, :s.seq_len] = s.seq_ids
        mask[i, :s.seq_len] = 1.0
        labels[i] = s.label
    return Batch(target_ids=target_ids, seq_ids=seq_ids, mask=mask, labels=labels)


def make_batches(samples: list[Sample], batch_size: int, max_seq_len: int,
                 rng: np.random.Generator | None = None) -> list[Batch]:
    """Optionally shuffled batches; the final partial batch is kept."""
    if batch_size < 1:
        raise DataError(f"batch_size must be >= 1, got {batch_size}")
    order = np.arange(len(samples))
    if rng is not None:
        order = rng.permutation(len(samples))
    return [build_batch([samples[i] for i in order[at:at + batch_size]], max_seq_len)
            for at in range(0, len(samples), batch_size)]
