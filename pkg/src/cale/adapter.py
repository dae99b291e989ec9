"""Linear adapter over frozen embedding vectors, trained with a Siamese
margin-based contrastive objective.

The loss for a pair with binary label y and margin m is, on cosine distance
d = 1 - cos(f(e_i), f(e_j)):

    L = 1/2 * [ y * d^2 + (1 - y) * max(0, m - d)^2 ]

so same-concept pairs are pulled together and different-concept pairs are
pushed beyond the margin. `objective="similarity"` switches the quadratic
terms to operate on the raw cosine similarity instead, for comparison.

The optimizer is Adam with decoupled weight decay and a linear
warmup-then-decay schedule. The training loop is single-threaded and
sequential by contract so identical configs reproduce bit-for-bit.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Sequence

import numpy as np

from .embeddings import EmbeddingMatrix, cosine_similarity
from .errors import CaleError, ConfigError, FormatError
from .util import round_half_up, substream

ADP_MAGIC = b"CALEADP1"

_OBJECTIVES = ("distance", "similarity")


@dataclass
class AdapterParams:
    weight: np.ndarray  # (d_out, d_in)
    bias: np.ndarray | None = None

    def __post_init__(self) -> None:
        w = np.asarray(self.weight)
        if w.ndim != 2 or w.shape[0] < 1 or w.shape[1] < 1:
            raise ValueError(f"adapter weight must be a 2-D matrix, got shape {w.shape}")
        if not np.isfinite(w).all():
            raise ValueError("adapter weight contains non-finite entries")
        if self.bias is not None:
            b = np.asarray(self.bias)
            if b.shape != (w.shape[0],):
                raise ValueError(f"bias shape {b.shape} does not match d_out {w.shape[0]}")
            if not np.isfinite(b).all():
                raise ValueError("adapter bias contains non-finite entries")
            self.bias = b
        self.weight = w

    @property
    def d_out(self) -> int:
        return self.weight.shape[0]

    @property
    def d_in(self) -> int:
        return self.weight.shape[1]


def identity_init(d_in: int, d_out: int, use_bias: bool = False) -> AdapterParams:
    """Identity on the leading min(d_in, d_out) diagonal, zeros elsewhere.

    Training therefore starts from the unmodified base space.
    """
    w = np.zeros((d_out, d_in), dtype=np.float64)
    k = min(d_in, d_out)
    w[np.arange(k), np.arange(k)] = 1.0
    bias = np.zeros(d_out, dtype=np.float64) if use_bias else None
    return AdapterParams(weight=w, bias=bias)


@dataclass(frozen=True)
class TrainConfig:
    margin: float = 0.7
    learning_rate: float = 6.02e-6
    warmup_ratio: float = 0.24
    weight_decay: float = 0.05
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_epsilon: float = 1e-8
    epochs: int = 1
    batch_size: int = 32
    seed: int = 42
    d_out: int = 1024
    objective: str = "distance"
    use_bias: bool = False

    def __post_init__(self) -> None:
        if not (0 < self.margin <= 2):
            raise ValueError(f"margin must be in (0, 2], got {self.margin}")
        if self.learning_rate < 0:
            raise ValueError(f"learning_rate must be >= 0, got {self.learning_rate}")
        if not (0 <= self.warmup_ratio < 1):
            raise ValueError(f"warmup_ratio must be in [0, 1), got {self.warmup_ratio}")
        if self.weight_decay < 0:
            raise ValueError("weight_decay must be >= 0")
        if not (0 <= self.adam_beta1 < 1 and 0 <= self.adam_beta2 < 1):
            raise ValueError("adam betas must be in [0, 1)")
        if self.adam_epsilon <= 0:
            raise ValueError("adam_epsilon must be > 0")
        if self.epochs < 1 or self.batch_size < 1 or self.d_out < 1:
            raise ValueError("epochs, batch_size and d_out must be >= 1")
        if self.objective not in _OBJECTIVES:
            raise ValueError(f"objective must be one of {_OBJECTIVES}, got {self.objective!r}")


def parse_train_config(path: str | Path) -> TrainConfig:
    """Flat key=value file; `#` starts a comment; unknown keys are rejected."""
    field_types = {f.name: f.type for f in fields(TrainConfig)}
    values: dict = {}
    with open(path, "r", encoding="utf-8") as f:
        for lineno, raw in enumerate(f, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected key=value")
            key, _, value = line.partition("=")
            key = key.strip()
            value = value.strip()
            if key not in field_types:
                raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
            try:
                values[key] = _parse_config_value(key, value)
            except ValueError as e:
                raise ConfigError(f"{path}:{lineno}: {e}") from None
    try:
        return TrainConfig(**values)
    except ValueError as e:
        raise ConfigError(f"{path}: {e}") from None


def _parse_config_value(key: str, value: str):
    if key in ("epochs", "batch_size", "seed", "d_out"):
        return int(value)
    if key == "objective":
        return value
    if key == "use_bias":
        if value.lower() in ("true", "1", "yes"):
            return True
        if value.lower() in ("false", "0", "no"):
            return False
        raise ValueError(f"cannot parse boolean {value!r}")
    return float(value)


def adapt(e: np.ndarray, params: AdapterParams) -> np.ndarray:
    """W e (+ b). No normalization; cosine downstream is scale-invariant."""
    e = np.asarray(e, dtype=np.float64)
    if e.shape != (params.d_in,):
        raise ValueError(f"expected input dimension {params.d_in}, got shape {e.shape}")
    out = params.weight.astype(np.float64, copy=False) @ e
    if params.bias is not None:
        out = out + params.bias.astype(np.float64, copy=False)
    return out


def adapt_rows(rows: np.ndarray, params: AdapterParams) -> np.ndarray:
    rows = np.asarray(rows, dtype=np.float64)
    if rows.ndim != 2 or rows.shape[1] != params.d_in:
        raise ValueError(f"expected (n, {params.d_in}) rows, got shape {rows.shape}")
    out = rows @ params.weight.T.astype(np.float64, copy=False)
    if params.bias is not None:
        out = out + params.bias.astype(np.float64, copy=False)
    return out


def pair_loss(e_i: np.ndarray, e_j: np.ndarray, y: int, margin: float,
              objective: str = "distance") -> float:
    if y not in (0, 1):
        raise ValueError(f"label must be 0 or 1, got {y}")
    if objective not in _OBJECTIVES:
        raise ValueError(f"unknown objective {objective!r}")
    s = cosine_similarity(e_i, e_j)
    q = (1.0 - s) if objective == "distance" else s
    return 0.5 * (y * q * q + (1 - y) * max(0.0, margin - q) ** 2)


def _pair_arrays(batch: Sequence[tuple[np.ndarray, np.ndarray, int]]):
    if len(batch) == 0:
        raise ValueError("empty batch")
    x = np.stack([np.asarray(b[0], dtype=np.float64) for b in batch])
    y = np.stack([np.asarray(b[1], dtype=np.float64) for b in batch])
    labels = np.array([b[2] for b in batch], dtype=np.float64)
    return x, y, labels


def _forward_backward(x: np.ndarray, y: np.ndarray, labels: np.ndarray,
                      weight: np.ndarray, bias: np.ndarray | None,
                      margin: float, objective: str):
    """Mean loss and its gradient w.r.t. weight (and bias) for one batch."""
    a = x @ weight.T
    c = y @ weight.T
    if bias is not None:
        a = a + bias
        c = c + bias
    na = np.linalg.norm(a, axis=1)
    nc = np.linalg.norm(c, axis=1)
    bad = np.flatnonzero((na == 0.0) | (nc == 0.0))
    if bad.size:
        raise CaleError(f"zero adapted vector at batch index {int(bad[0])}")
    a_hat = a / na[:, None]
    c_hat = c / nc[:, None]
    s = np.clip(np.einsum("ij,ij->i", a_hat, c_hat), -1.0, 1.0)

    if objective == "distance":
        d = 1.0 - s
        hinge = np.maximum(0.0, margin - d)
        losses = 0.5 * (labels * d * d + (1.0 - labels) * hinge * hinge)
        dl_ds = -(labels * d - (1.0 - labels) * hinge)
    else:
        hinge = np.maximum(0.0, margin - s)
        losses = 0.5 * (labels * s * s + (1.0 - labels) * hinge * hinge)
        dl_ds = labels * s - (1.0 - labels) * hinge

    ga = dl_ds[:, None] * (c_hat - s[:, None] * a_hat) / na[:, None]
    gc = dl_ds[:, None] * (a_hat - s[:, None] * c_hat) / nc[:, None]
    n = x.shape[0]
    g_w = (ga.T @ x + gc.T @ y) / n
    g_b = (ga.sum(axis=0) + gc.sum(axis=0)) / n if bias is not None else None
    if not np.isfinite(g_w).all():
        per_pair = np.isfinite(ga).all(axis=1) & np.isfinite(gc).all(axis=1) & np.isfinite(losses)
        idx = int(np.flatnonzero(~per_pair)[0]) if not per_pair.all() else -1
        raise CaleError(f"non-finite gradient at batch index {idx}")
    return float(losses.mean()), g_w, g_b


def batch_gradient(batch: Sequence[tuple[np.ndarray, np.ndarray, int]],
                   params: AdapterParams, margin: float,
                   objective: str = "distance"):
    """Gradient of the mean batch loss w.r.t. the adapter weight (and bias).

    Weight decay is decoupled and applied by the optimizer, not here; in the
    flat-loss region this returns an exactly zero matrix.
    """
    x, y, labels = _pair_arrays(batch)
    w = params.weight.astype(np.float64, copy=False)
    b = params.bias.astype(np.float64, copy=False) if params.bias is not None else None
    loss, g_w, g_b = _forward_backward(x, y, labels, w, b, margin, objective)
    return g_w, g_b, loss


def _lr_at(step: int, total_steps: int, warmup_steps: int, lr: float) -> float:
    """Linear warmup to lr over warmup_steps, then linear decay toward zero."""
    if warmup_steps > 0 and step < warmup_steps:
        return lr * (step + 1) / warmup_steps
    return lr * (total_steps - step) / max(1, total_steps - warmup_steps)


def train(pairs: Sequence, embeddings: EmbeddingMatrix, config: TrainConfig):
    """One (or more) seeded passes over shuffled pairs; returns the adapter and
    the per-step mean-loss trace.

    `pairs` is any sequence of records with occ_a / occ_b / label attributes.
    """
    if len(pairs) == 0:
        raise CaleError("cannot train on an empty pair set")
    # Training arithmetic runs in float32, matching the storage width of both
    # the embedding inputs and the serialized adapter.
    dtype = np.float32
    idx_a = embeddings.row_indices([p.occ_a for p in pairs])
    idx_b = embeddings.row_indices([p.occ_b for p in pairs])
    x_all = embeddings.rows[idx_a].astype(dtype)
    y_all = embeddings.rows[idx_b].astype(dtype)
    labels_all = np.array([p.label for p in pairs], dtype=dtype)

    d_in = embeddings.dim
    params = identity_init(d_in, config.d_out, use_bias=config.use_bias)
    w = params.weight.astype(dtype)
    b = params.bias.astype(dtype) if params.bias is not None else None

    n = len(pairs)
    steps_per_epoch = math.ceil(n / config.batch_size)
    total_steps = config.epochs * steps_per_epoch
    warmup_steps = round_half_up(config.warmup_ratio * total_steps)
    rng = substream(config.seed, "pair-shuffle")

    beta1, beta2 = config.adam_beta1, config.adam_beta2
    eps, wd, lr = config.adam_epsilon, config.weight_decay, config.learning_rate

    m_w = np.zeros_like(w)
    v_w = np.zeros_like(w)
    tmp = np.empty_like(w)
    upd = np.empty_like(w)
    g_buf = np.empty_like(w)
    g_buf2 = np.empty_like(w)
    vec_a = np.empty(config.d_out, dtype=dtype)
    vec_c = np.empty(config.d_out, dtype=dtype)
    if b is not None:
        m_b = np.zeros_like(b)
        v_b = np.zeros_like(b)

    fast_path = config.batch_size == 1 and b is None
    use_distance = config.objective == "distance"
    margin = config.margin

    trace: list[float] = []
    step = 0
    for _ in range(config.epochs):
        perm = rng.permutation(n)
        x_ep = x_all[perm]
        y_ep = y_all[perm]
        l_ep = labels_all[perm]
        for start in range(0, n, config.batch_size):
            end = min(start + config.batch_size, n)
            if fast_path:
                # Scalar-at-a-time math on 1-D views; identical semantics to
                # _forward_backward for a single pair, without batch-axis cost.
                x0 = x_ep[start]
                y0 = y_ep[start]
                label = float(l_ep[start])
                a = w @ x0
                c = w @ y0
                na = math.sqrt(a @ a)
                nc = math.sqrt(c @ c)
                if na == 0.0 or nc == 0.0:
                    raise CaleError("zero adapted vector at batch index 0")
                s = min(1.0, max(-1.0, float(a @ c) / (na * nc)))
                if use_distance:
                    d = 1.0 - s
                    hinge = max(0.0, margin - d)
                    loss = 0.5 * (label * d * d + (1.0 - label) * hinge * hinge)
                    dl_ds = -(label * d - (1.0 - label) * hinge)
                else:
                    hinge = max(0.0, margin - s)
                    loss = 0.5 * (label * s * s + (1.0 - label) * hinge * hinge)
                    dl_ds = label * s - (1.0 - label) * hinge
                if not math.isfinite(loss):
                    raise CaleError("non-finite loss at batch index 0")
                # ga = dl_ds (c_hat - s a_hat) / na = c * k_cross - a * (dl_ds s / na^2)
                k_cross = dl_ds / (na * nc)
                np.multiply(c, k_cross, out=vec_a)
                np.multiply(a, dl_ds * s / (na * na), out=vec_c)
                vec_a -= vec_c  # ga
                np.multiply(vec_a[:, None], x0[None, :], out=g_buf)
                np.multiply(a, k_cross, out=vec_c)
                np.multiply(c, dl_ds * s / (nc * nc), out=vec_a)
                vec_c -= vec_a  # gc
                np.multiply(vec_c[:, None], y0[None, :], out=g_buf2)
                g_buf += g_buf2
                g_w = g_buf
            else:
                loss, g_w, g_b = _forward_backward(
                    x_ep[start:end], y_ep[start:end], l_ep[start:end], w, b,
                    config.margin, config.objective,
                )
            trace.append(loss)
            step += 1
            lr_t = _lr_at(step - 1, total_steps, warmup_steps, lr)
            bc1 = 1.0 - beta1 ** step
            bc2 = 1.0 - beta2 ** step

            m_w *= beta1
            np.multiply(g_w, 1.0 - beta1, out=tmp)
            m_w += tmp
            v_w *= beta2
            np.multiply(g_w, g_w, out=tmp)
            tmp *= 1.0 - beta2
            v_w += tmp
            np.sqrt(v_w, out=tmp)
            tmp /= math.sqrt(bc2)
            tmp += eps
            np.divide(m_w, tmp, out=upd)
            upd *= lr_t / bc1
            if wd:
                w *= 1.0 - lr_t * wd
            w -= upd

            if b is not None:
                m_b = beta1 * m_b + (1.0 - beta1) * g_b
                v_b = beta2 * v_b + (1.0 - beta2) * g_b * g_b
                upd_b = (m_b / bc1) / (np.sqrt(v_b / bc2) + eps)
                b *= 1.0 - lr_t * wd
                b -= lr_t * upd_b

    return AdapterParams(weight=w, bias=b), trace


def _mean_batch_loss(x, y, labels, weight, bias, margin, objective) -> float:
    total = 0.0
    for k in range(x.shape[0]):
        a = weight @ x[k]
        c = weight @ y[k]
        if bias is not None:
            a = a + bias
            c = c + bias
        total += pair_loss(a, c, int(labels[k]), margin, objective)
    return total / x.shape[0]


def gradient_check(params: AdapterParams, batch: Sequence[tuple[np.ndarray, np.ndarray, int]],
                   margin: float, step: float, objective: str = "distance",
                   guard: float = 1e-8) -> float:
    """Max entrywise relative error between analytic and central-difference
    gradients; entries where both sides are below `guard` count as 0.
    """
    if step <= 0:
        raise ValueError("finite-difference step must be > 0")
    x, y, labels = _pair_arrays(batch)
    w = params.weight.astype(np.float64).copy()
    b = params.bias.astype(np.float64).copy() if params.bias is not None else None
    _, g_w, g_b = _forward_backward(x, y, labels, w, b, margin, objective)

    worst = 0.0

    def rel_err(analytic: float, numeric: float) -> float:
        scale = max(abs(analytic), abs(numeric))
        if scale < guard:
            return 0.0
        return abs(analytic - numeric) / scale

    for i in range(w.shape[0]):
        for j in range(w.shape[1]):
            orig = w[i, j]
            w[i, j] = orig + step
            up = _mean_batch_loss(x, y, labels, w, b, margin, objective)
            w[i, j] = orig - step
            down = _mean_batch_loss(x, y, labels, w, b, margin, objective)
            w[i, j] = orig
            worst = max(worst, rel_err(g_w[i, j], (up - down) / (2 * step)))
    if b is not None:
        for i in range(b.shape[0]):
            orig = b[i]
            b[i] = orig + step
            up = _mean_batch_loss(x, y, labels, w, b, margin, objective)
            b[i] = orig - step
            down = _mean_batch_loss(x, y, labels, w, b, margin, objective)
            b[i] = orig
            worst = max(worst, rel_err(g_b[i], (up - down) / (2 * step)))
    return worst


def write_adapter(params: AdapterParams, path: str | Path) -> None:
    with open(path, "wb") as f:
        f.write(ADP_MAGIC)
        f.write(struct.pack("<IIB", params.d_out, params.d_in, 1 if params.bias is not None else 0))
        f.write(np.ascontiguousarray(params.weight, dtype="<f4").tobytes())
        if params.bias is not None:
            f.write(np.ascontiguousarray(params.bias, dtype="<f4").tobytes())


def read_adapter(path: str | Path) -> AdapterParams:
    with open(path, "rb") as f:
        data = f.read()
    header = len(ADP_MAGIC) + 9
    if len(data) < header or data[: len(ADP_MAGIC)] != ADP_MAGIC:
        raise FormatError(f"{path}: not a CALEADP1 file (bad magic)")
    d_out, d_in, has_bias = struct.unpack_from("<IIB", data, len(ADP_MAGIC))
    if has_bias not in (0, 1):
        raise FormatError(f"{path}: invalid bias flag {has_bias}")
    need = header + d_out * d_in * 4 + (d_out * 4 if has_bias else 0)
    if len(data) != need:
        raise FormatError(f"{path}: expected {need} bytes, found {len(data)}")
    weight = np.frombuffer(data, dtype="<f4", count=d_out * d_in, offset=header).reshape(d_out, d_in).copy()
    bias = None
    if has_bias:
        bias = np.frombuffer(data, dtype="<f4", count=d_out, offset=header + d_out * d_in * 4).copy()
    try:
        return AdapterParams(weight=weight, bias=bias)
    except ValueError as e:
        raise FormatError(f"{path}: {e}") from e
