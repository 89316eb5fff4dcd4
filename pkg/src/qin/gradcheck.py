"""Finite-difference certification of analytic gradients.

``check`` treats a scalar forward plus a precomputed analytic gradient as
a black box and compares against central differences coordinate by
coordinate. Coordinates whose perturbed evaluations sit within the kink
guard of a ReLU/PReLU pre-activation, or where a pre-activation changes
sign between the two evaluations, are skipped and counted: a central
difference straddling a kink says nothing about the derivative.

``run_model_gradcheck`` builds a small random model instance and certifies
every parameter class of the full loss.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import HyperParams
from .dataio import build_batch
from .embedding import EmbeddingStore, Sample
from .errors import QinError
from .linalg import FLOAT, make_rng
from .metrics import bce_loss
from .model import loss_and_grads, model_forward
from .params import copy_params, init_params, named_arrays


@dataclass
class GradReport:
    name: str
    max_rel_err: float
    argmax_coord: int
    n_checked: int
    n_kink_skipped: int
    n_noise_skipped: int
    step: float
    seed: int

    @property
    def n_skipped(self) -> int:
        return self.n_kink_skipped + self.n_noise_skipped

    def line(self) -> str:
        return (f"class={self.name} max_rel_err={self.max_rel_err:.3e} "
                f"coords={self.n_checked} kink_skipped={self.n_kink_skipped} "
                f"noise_skipped={self.n_noise_skipped} step={self.step:g} seed={self.seed}")


def _eval(forward, x):
    out = forward(x)
    if isinstance(out, tuple):
        value, preacts = out
    else:
        value, preacts = out, None
    if not np.isfinite(value):
        raise QinError(f"forward returned non-finite value {value}")
    return float(value), preacts


def check(forward, analytic_grad: np.ndarray, point: np.ndarray,
          step: float = 1e-5, kink_guard: float = 1e-6, rel_tol: float = 1e-4,
          name: str = "fn", seed: int = 0) -> GradReport:
    """Central differences (f(x+h) - f(x-h)) / 2h against the analytic gradient.

    forward maps a flat float64 vector to a loss, optionally returning
    (loss, preacts) where preacts are the kink-relevant pre-activations.

    Besides the kink guard, coordinates whose gradient sits below the
    64-bit resolution of the difference quotient are skipped and counted:
    the quotient carries absolute rounding noise of roughly
    eps * |f| / step regardless of the true derivative, so a coordinate
    can only be certified to rel_tol when its magnitude clears that noise
    divided by rel_tol. Skipping them states "too small to measure"
    instead of failing on noise (or silently passing garbage).
    """
    point = np.asarray(point, dtype=FLOAT)
    analytic_grad = np.asarray(analytic_grad, dtype=FLOAT)
    if analytic_grad.shape != point.shape:
        raise QinError(f"analytic gradient shape {analytic_grad.shape} != point {point.shape}")
    f0, pre0 = _eval(forward, point)
    fd_noise = np.finfo(FLOAT).eps * abs(f0) / step
    noise_floor = 4.0 * fd_noise / rel_tol

    max_rel = 0.0
    argmax = -1
    checked = 0
    kink_skipped = 0
    noise_skipped = 0
    for i in range(point.size):
        x = point.copy()
        x[i] = point[i] + step
        f_plus, pre_plus = _eval(forward, x)
        x[i] = point[i] - step
        f_minus, pre_minus = _eval(forward, x)
        if pre0 is not None:
            near = min(np.min(np.abs(p)) if p.size else np.inf
                       for p in (pre0, pre_plus, pre_minus))
            flipped = pre_plus.size and np.any(np.sign(pre_plus) != np.sign(pre_minus))
            if near < kink_guard or flipped:
                kink_skipped += 1
                continue
        numeric = (f_plus - f_minus) / (2.0 * step)
        a = float(analytic_grad[i])
        if 0.0 < max(abs(a), abs(numeric)) < noise_floor:
            noise_skipped += 1
            continue
        rel = abs(a - numeric) / max(abs(a), abs(numeric), 1e-8)
        checked += 1
        if rel > max_rel:
            max_rel = rel
            argmax = i
    return GradReport(name=name, max_rel_err=max_rel, argmax_coord=argmax,
                      n_checked=checked, n_kink_skipped=kink_skipped,
                      n_noise_skipped=noise_skipped, step=step, seed=seed)


def collect_kink_preacts(trace, hp: HyperParams) -> np.ndarray:
    """Pre-activation values whose sign changes would invalidate a central diff."""
    pieces = []
    if hp.pooling == "asta" and hp.attn_kind in ("relu", "relu2"):
        live = trace.pool_trace.mask > 0
        pieces.append(trace.pool_trace.scores[live].ravel())
    if hp.interaction == "qnn":
        for layer in trace.inter_trace.layers:
            pieces.append((layer.t if hp.qnn_mid_act else layer.h).ravel())
    else:
        for pre in trace.inter_trace.pre:
            pieces.append(pre.ravel())
    return np.concatenate(pieces) if pieces else np.zeros(0, dtype=FLOAT)


def gradcheck_hyperparams(attn_kind: str = "relu", pooling: str = "asta",
                          interaction: str = "qnn", vocab: int = 24,
                          mid_act: bool = False) -> HyperParams:
    """Small instance: d=16, seq len 8, depth = capacity = 2, dropout off."""
    return HyperParams(d_t=16, d_b=16, d_a=16, seq_len=8, depth=2, m=2,
                       dropout_p=0.0, attn_kind=attn_kind, attn_dropout=False,
                       pooling=pooling, interaction=interaction, mlp_dims=(12, 8),
                       qnn_mid_act=mid_act, vocab=vocab, d_frozen=8)


def build_random_instance(hp: HyperParams, seed: int, n: int = 4):
    """Random params, store, and a small labeled batch for loss evaluation.

    The id table is redrawn at unit-ish scale: the training-time 0.01 init
    would park whole gradient columns at the finite-difference resolution
    floor, and a gradcheck point should be generic, not near-degenerate.
    """
    rng = make_rng(seed)
    params = init_params(hp, rng)
    params.id_embedding = rng.standard_normal(params.id_embedding.shape) * 0.5
    store = EmbeddingStore(rng.standard_normal((hp.vocab, hp.d_frozen)) * 0.5)
    samples = []
    for i in range(n):
        seq_len = int(rng.integers(1, hp.seq_len + 1))
        ids = rng.choice(hp.vocab, size=seq_len, replace=False)
        samples.append(Sample(target_id=int(rng.integers(0, hp.vocab)),
                              seq_ids=[int(v) for v in ids], label=int(i % 2)))
    batch = build_batch(samples, hp.seq_len)
    return params, store, batch


# Parameter-class layout: report name -> list of named-array keys.
def parameter_classes(params) -> dict[str, list[str]]:
    named = named_arrays(params)
    classes: dict[str, list[str]] = {}
    for key in named:
        if key.startswith("qnn_w_"):
            classes[key] = [key]
        elif key.startswith("mlp_"):
            classes.setdefault("mlp", []).append(key)
        elif key in ("head_w", "head_b"):
            classes.setdefault("head", []).append(key)
        elif key == "id_embedding":
            classes["embeddings"] = [key]
        else:
            classes[key] = [key]
    return classes


def run_model_gradcheck(seed: int, hp: HyperParams | None = None,
                        step: float = 1e-5, sabotage: str | None = None,
                        rel_tol: float = 1e-4) -> list[GradReport]:
    """Certify every parameter class of the full model loss on one instance.

    sabotage flips the sign of the analytic gradient for the named class;
    the run must then fail, which self-tests the harness.
    """
    hp = hp or gradcheck_hyperparams()
    params, store, batch = build_random_instance(hp, seed)
    _, grads, _ = loss_and_grads(params, hp, store, batch, training=False)
    g_named = named_arrays(grads)

    reports = []
    for cls_name, keys in parameter_classes(params).items():
        point = np.concatenate([named_arrays(params)[k].ravel() for k in keys])
        analytic = np.concatenate([g_named[k].ravel() for k in keys])
        if sabotage == cls_name:
            analytic = -analytic

        def forward(vec, keys=keys):
            trial = copy_params(params)
            named = named_arrays(trial)
            at = 0
            for k in keys:
                arr = named[k]
                arr[...] = vec[at:at + arr.size].reshape(arr.shape)
                at += arr.size
            trace = model_forward(trial, hp, store, batch, training=False)
            return bce_loss(trace.probs, batch.labels), collect_kink_preacts(trace, hp)

        reports.append(check(forward, analytic, point, step=step, rel_tol=rel_tol,
                             name=cls_name, seed=seed))
    return reports
