"""Transformer-style classifier over flow feature vectors.

Each of the `n_features` standardized input values is lifted to its own
token (`value * embedding + bias`), a learnable CLS token is appended,
and the sequence runs through a stack of encoder layers (multi-head
self-attention + feed-forward, residuals and layer norm). The logits are
a linear map of the final CLS vector. No positional encodings are added:
the feature sequence is an unordered set.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, asdict
from pathlib import Path

import numpy as np

from .autodiff import Tensor, concat, gelu, layer_norm, linear, softmax
from .errors import ShapeMismatch

CHECKPOINT_FORMAT_VERSION = 1


@dataclass(frozen=True)
class ModelConfig:
    """Architecture hyperparameters.

    Defaults are the desk-scale configuration used throughout the test
    suite; the full-scale configuration (d_model=128, n_layers=6,
    n_heads=8) is constructible with the same fields.
    """

    d_model: int = 32
    n_layers: int = 2
    n_heads: int = 4
    n_features: int = 29
    n_classes: int = 9

    def __post_init__(self):
        if self.d_model % self.n_heads != 0:
            raise ValueError(
                f"d_model={self.d_model} not divisible by n_heads={self.n_heads}"
            )

    @property
    def d_ff(self) -> int:
        return 2 * self.d_model

    @property
    def head_dim(self) -> int:
        return self.d_model // self.n_heads


def init_params(cfg: ModelConfig, seed: int = 0) -> dict[str, Tensor]:
    """Seeded parameter initialization; returns name -> trainable Tensor."""
    rng = np.random.default_rng(seed)
    d, ff = cfg.d_model, cfg.d_ff

    def norm(*shape):
        return Tensor(rng.normal(0.0, 0.02, size=shape), requires_grad=True)

    def zeros(*shape):
        return Tensor(np.zeros(shape), requires_grad=True)

    def ones(*shape):
        return Tensor(np.ones(shape), requires_grad=True)

    params: dict[str, Tensor] = {
        "feat_embed": norm(cfg.n_features, d),
        "feat_bias": zeros(cfg.n_features, d),
        "cls_token": norm(1, d),
    }
    for i in range(cfg.n_layers):
        p = f"layer{i}."
        params[p + "wq"] = norm(d, d)
        params[p + "bq"] = zeros(d)
        params[p + "wk"] = norm(d, d)
        params[p + "bk"] = zeros(d)
        params[p + "wv"] = norm(d, d)
        params[p + "bv"] = zeros(d)
        params[p + "wo"] = norm(d, d)
        params[p + "bo"] = zeros(d)
        params[p + "ln1_g"] = ones(d)
        params[p + "ln1_b"] = zeros(d)
        params[p + "ff_w1"] = norm(d, ff)
        params[p + "ff_b1"] = zeros(ff)
        params[p + "ff_w2"] = norm(ff, d)
        params[p + "ff_b2"] = zeros(d)
        params[p + "ln2_g"] = ones(d)
        params[p + "ln2_b"] = zeros(d)
    params["head_w"] = norm(d, cfg.n_classes)
    params["head_b"] = zeros(cfg.n_classes)
    return params


def _attention(x: Tensor, params: dict[str, Tensor], prefix: str, cfg: ModelConfig) -> Tensor:
    b, s, d = x.shape
    h, hd = cfg.n_heads, cfg.head_dim

    def split_heads(t: Tensor) -> Tensor:
        # (B, S, D) -> (B, H, S, hd)
        return t.reshape(b, s, h, hd).transpose((0, 2, 1, 3))

    q = split_heads(linear(x, params[prefix + "wq"], params[prefix + "bq"]))
    k = split_heads(linear(x, params[prefix + "wk"], params[prefix + "bk"]))
    v = split_heads(linear(x, params[prefix + "wv"], params[prefix + "bv"]))

    scores = (q @ k.transpose((0, 1, 3, 2))) * (1.0 / np.sqrt(hd))
    attn = softmax(scores, axis=-1)
    mixed = attn @ v  # (B, H, S, hd)
    merged = mixed.transpose((0, 2, 1, 3)).reshape(b, s, d)
    return linear(merged, params[prefix + "wo"], params[prefix + "bo"])


def forward(params: dict[str, Tensor], batch: Tensor, cfg: ModelConfig) -> Tensor:
    """Map a (B, n_features) batch to (B, n_classes) logits."""
    if batch.ndim != 2 or batch.shape[1] != cfg.n_features:
        raise ShapeMismatch(
            f"expected batch of shape (B, {cfg.n_features}), got {batch.shape}"
        )
    b = batch.shape[0]
    d = cfg.d_model

    # Per-feature tokens: value-scaled embedding plus a learned bias.
    values = batch.reshape(b, cfg.n_features, 1)
    tokens = values * params["feat_embed"] + params["feat_bias"]

    cls = params["cls_token"].reshape(1, 1, d) * Tensor(np.ones((b, 1, 1)))
    seq = concat([tokens, cls], axis=1)  # CLS appended as the final token

    for i in range(cfg.n_layers):
        p = f"layer{i}."
        attended = _attention(seq, params, p, cfg)
        seq = layer_norm(seq + attended, params[p + "ln1_g"], params[p + "ln1_b"])
        ff = linear(gelu(linear(seq, params[p + "ff_w1"], params[p + "ff_b1"])),
                    params[p + "ff_w2"], params[p + "ff_b2"])
        seq = layer_norm(seq + ff, params[p + "ln2_g"], params[p + "ln2_b"])

    cls_out = seq[:, -1, :]
    return linear(cls_out, params["head_w"], params["head_b"])


def logits_of(params: dict[str, Tensor], x: np.ndarray, cfg: ModelConfig) -> np.ndarray:
    """Forward pass without gradient tracking; returns raw logits."""
    return forward(params, Tensor(np.atleast_2d(x)), cfg).data


def input_gradients(
    params: dict[str, Tensor], x: np.ndarray, class_index: int, cfg: ModelConfig
) -> np.ndarray:
    """d(logit[class_index]) / d(input) for every row of `x`.

    Rows are independent, so the gradient of the summed class logit
    recovers each row's own gradient.
    """
    if not 0 <= class_index < cfg.n_classes:
        raise ValueError(f"class_index {class_index} outside 0..{cfg.n_classes - 1}")
    batch = Tensor(np.atleast_2d(np.asarray(x, dtype=np.float64)), requires_grad=True)
    logits = forward(params, batch, cfg)
    target = logits[:, class_index].sum()
    target.backward()
    grads = batch.grad
    return grads[0] if np.asarray(x).ndim == 1 else grads


# -- checkpoint serialization -------------------------------------------------


@dataclass
class Checkpoint:
    config: ModelConfig
    weights: dict[str, np.ndarray]
    extra: dict = field(default_factory=dict)


def save_checkpoint(path: str | Path, params: dict[str, Tensor], cfg: ModelConfig,
                    extra: dict | None = None) -> None:
    """JSON container: config + flat weight arrays. Round-trips bit-exactly
    because json serializes floats with repr (shortest exact form)."""
    payload = {
        "format_version": CHECKPOINT_FORMAT_VERSION,
        "config": asdict(cfg),
        "weights": {
            name: {"shape": list(t.data.shape), "values": t.data.ravel().tolist()}
            for name, t in params.items()
        },
        "extra": extra or {},
    }
    Path(path).write_text(json.dumps(payload, sort_keys=True))


def load_checkpoint(path: str | Path) -> Checkpoint:
    payload = json.loads(Path(path).read_text())
    if payload.get("format_version") != CHECKPOINT_FORMAT_VERSION:
        raise ValueError(f"unsupported checkpoint version in {path}")
    cfg = ModelConfig(**payload["config"])
    weights = {
        name: np.asarray(w["values"], dtype=np.float64).reshape(w["shape"])
        for name, w in payload["weights"].items()
    }
    return Checkpoint(config=cfg, weights=weights, extra=payload.get("extra", {}))


def params_from_weights(weights: dict[str, np.ndarray]) -> dict[str, Tensor]:
    return {name: Tensor(w.copy(), requires_grad=True) for name, w in weights.items()}
