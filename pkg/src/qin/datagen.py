"""Seeded synthetic CTR dataset with a known quadratic click model.

Construction, all draws from one PCG64 stream:
  * item embeddings e_i and user latents z_u are standard normal vectors
    scaled by 1/sqrt(emb_dim), then rounded through float32 so the values
    in memory match the embedding file bit-exactly;
  * each sample picks a user, draws a history length in [1, max_seq_len],
    and samples that many distinct items with probability proportional to
    exp(z_u . e_i / temperature) (Gumbel top-k);
  * the interest vector u is the mean of the history embeddings and the
    raw affinity is r = u . e_target for a uniformly random target;
  * r is standardized over the whole dataset to t = (r - mean) / std, and
    the click logit is linear_strength * t + quad_strength * (t^2 - 1)
    plus Normal(0, noise_std) noise. Centering the quadratic term keeps
    logits two-sided; without it every probability would sit above 1/2 and
    no scorer could rank well.
  * label ~ Bernoulli(sigmoid(logit)).

Because the label depends on t only through t and t^2, any scorer linear
in the affinity is blind to the dominant quadratic part, while the true
probabilities (written to the truth file for the validation split) give
the Bayes-optimal reference AUC.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

from .config import GenConfig
from .embedding import Sample, save_embeddings
from .errors import DataError
from .linalg import FLOAT, make_rng, sigmoid
from .metrics import auc
from .dataio import write_dataset


@dataclass
class GenResult:
    embedding_path: str
    train_path: str
    valid_path: str
    truth_path: str
    manifest: str


def _f32_round(x: np.ndarray) -> np.ndarray:
    return x.astype(np.float32).astype(FLOAT)


def generate(cfg: GenConfig, out_dir: str) -> GenResult:
    """Write embeddings.qemb, train.jsonl, valid.jsonl, truth.txt into out_dir."""
    os.makedirs(out_dir, exist_ok=True)
    rng = make_rng(cfg.seed)

    items = _f32_round(rng.standard_normal((cfg.n_items, cfg.emb_dim)) / np.sqrt(cfg.emb_dim))
    users = _f32_round(rng.standard_normal((cfg.n_users, cfg.emb_dim)) / np.sqrt(cfg.emb_dim))

    # Per-user item logits for history sampling.
    user_logits = (users @ items.T) / cfg.temperature

    user_ids = rng.integers(0, cfg.n_users, cfg.n_samples)
    target_ids = rng.integers(0, cfg.n_items, cfg.n_samples)
    seq_lens = rng.integers(cfg.min_seq_len, cfg.max_seq_len + 1, cfg.n_samples)

    raw = np.empty(cfg.n_samples, dtype=FLOAT)
    seqs: list[list[int]] = []
    for i in range(cfg.n_samples):
        logits_i = user_logits[user_ids[i]]
        gumbel = -np.log(-np.log(rng.random(cfg.n_items)))
        take = int(seq_lens[i])
        picked = np.argpartition(logits_i + gumbel, -take)[-take:]
        picked = np.sort(picked)
        seqs.append([int(v) for v in picked])
        u = items[picked].mean(axis=0)
        raw[i] = u @ items[target_ids[i]]

    std = raw.std()
    if std == 0:
        raise DataError("degenerate generator config: zero variance in item affinity")
    t = (raw - raw.mean()) / std

    noise = rng.standard_normal(cfg.n_samples) * cfg.noise_std
    logits = cfg.linear_strength * t + cfg.quad_strength * (t * t - 1.0) + noise
    probs = sigmoid(logits)
    labels = (rng.random(cfg.n_samples) < probs).astype(int)

    samples = [Sample(target_id=int(target_ids[i]), seq_ids=seqs[i], label=int(labels[i]))
               for i in range(cfg.n_samples)]
    n_train = int(round(cfg.n_samples * cfg.split_frac))
    n_train = min(max(n_train, 1), cfg.n_samples - 1)

    emb_path = os.path.join(out_dir, "embeddings.qemb")
    train_path = os.path.join(out_dir, "train.jsonl")
    valid_path = os.path.join(out_dir, "valid.jsonl")
    truth_path = os.path.join(out_dir, "truth.txt")

    save_embeddings(items, emb_path)
    manifest = write_dataset(samples[:n_train], train_path, cfg.seed)
    write_dataset(samples[n_train:], valid_path, cfg.seed)
    write_truth(probs[n_train:], truth_path, cfg.seed)
    return GenResult(embedding_path=emb_path, train_path=train_path,
                     valid_path=valid_path, truth_path=truth_path, manifest=manifest)


def write_truth(probs: np.ndarray, path: str, seed: int) -> None:
    """Ground-truth click probabilities for the validation split, one per line."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"# n_samples={len(probs)} seed={seed}\n")
        for p in probs:
            fh.write(f"{p:.17g}\n")


def read_truth(path: str) -> np.ndarray:
    probs = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            try:
                probs.append(float(line))
            except ValueError as exc:
                raise DataError(f"{path}:{lineno}: bad probability ({exc})") from exc
    return np.asarray(probs, dtype=FLOAT)


def bayes_auc(truth_probs: np.ndarray, labels: np.ndarray) -> float:
    """AUC of scoring by the true click probabilities; the reference ceiling."""
    return auc(truth_probs, labels)


def affinity_features(samples: list[Sample], store_data: np.ndarray) -> np.ndarray:
    """Raw affinity u . e_target per sample, from the frozen store."""
    out = np.empty(len(samples), dtype=FLOAT)
    for i, s in enumerate(samples):
        u = store_data[np.asarray(s.seq_ids, dtype=np.int64)].mean(axis=0) \
            if s.seq_ids else np.zeros(store_data.shape[1], dtype=FLOAT)
        out[i] = u @ store_data[s.target_id]
    return out


def linear_baseline_auc(samples: list[Sample], store_data: np.ndarray) -> float:
    """AUC of a logistic regression on the scalar affinity feature.

    Newton iterations on (weight, bias); the affinity is the one scalar a
    linear model can extract, so this is the strongest linear baseline for
    the quadratic click model.
    """
    x = affinity_features(samples, store_data)
    y = np.array([s.label for s in samples], dtype=FLOAT)
    feats = np.stack([x, np.ones_like(x)], axis=1)
    beta = np.zeros(2, dtype=FLOAT)
    for _ in range(25):
        z = feats @ beta
        p = sigmoid(z)
        g = feats.T @ (p - y)
        w = np.clip(p * (1.0 - p), 1e-9, None)
        hess = feats.T @ (feats * w[:, None]) + 1e-9 * np.eye(2)
        step = np.linalg.solve(hess, g)
        beta -= step
        if np.max(np.abs(step)) < 1e-10:
            break
    return auc(feats @ beta, y.astype(int))
