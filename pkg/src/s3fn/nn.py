"""Deterministic neural-network numerics with hand-written backward passes.

All tensors are float64 numpy arrays. Spatial-spectral activations use the
layout (batch, height, width, depth, channels); convolutions are 3x3x3,
stride 1, zero-padded so output dims equal input dims. Every *_forward
returns (output, cache) and the matching *_backward consumes that cache and
returns exact gradients, verified against central finite differences by
``grad_check``.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import numpy as np

from .errors import ConfigError, DataError, FormatError, ShapeError

PARAMS_MAGIC = "s3fn-params v1"
KERNEL = 3
CE_FLOOR = 1e-12


@dataclass
class LayerParams:
    """Weights and biases of one layer; arrays are mutated by the optimizer."""

    weights: np.ndarray
    biases: np.ndarray

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=np.float64)
        self.biases = np.asarray(self.biases, dtype=np.float64)
        if not (np.isfinite(self.weights).all() and np.isfinite(self.biases).all()):
            raise DataError("layer parameters must be finite")

    def arrays(self) -> list[np.ndarray]:
        return [self.weights, self.biases]


def check_tensor4(x: np.ndarray) -> np.ndarray:
    """Validate a (batch, H, W, D, C) activation tensor."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 5:
        raise ShapeError(f"expected (batch, H, W, D, C) tensor, got shape {x.shape}")
    if not np.isfinite(x).all():
        raise DataError("activation tensor contains non-finite values")
    return x


# --------------------------------------------------------------------------
# 3-D convolution (same padding, stride 1) via im2col + one GEMM
# --------------------------------------------------------------------------


def _im2col(x: np.ndarray) -> np.ndarray:
    """Stack the 27 shifted neighbourhoods: (B*H*W*D, 27*Cin)."""
    b, h, w, d, cin = x.shape
    pad = KERNEL // 2
    xp = np.zeros((b, h + 2 * pad, w + 2 * pad, d + 2 * pad, cin))
    xp[:, pad:-pad, pad:-pad, pad:-pad, :] = x
    cols = np.empty((b, h, w, d, KERNEL**3, cin))
    idx = 0
    for kh in range(KERNEL):
        for kw in range(KERNEL):
            for kd in range(KERNEL):
                cols[..., idx, :] = xp[:, kh : kh + h, kw : kw + w, kd : kd + d, :]
                idx += 1
    return cols.reshape(b * h * w * d, KERNEL**3 * cin)


def conv3d_forward(x: np.ndarray, params: LayerParams) -> tuple[np.ndarray, tuple]:
    """x: (B, H, W, D, Cin); weights: (3, 3, 3, Cin, Cout); biases: (Cout,)."""
    w = params.weights
    if w.ndim != 5 or w.shape[:3] != (KERNEL,) * 3:
        raise ShapeError(f"conv weights must be (3, 3, 3, Cin, Cout), got {w.shape}")
    if x.ndim != 5 or x.shape[-1] != w.shape[3]:
        raise ShapeError(
            f"conv input channels {x.shape[-1] if x.ndim == 5 else '?'} "
            f"do not match kernel Cin {w.shape[3]}"
        )
    b, h, wd, d, cin = x.shape
    cout = w.shape[-1]
    cols = _im2col(x)
    y = cols @ w.reshape(-1, cout) + params.biases
    return y.reshape(b, h, wd, d, cout), (cols, w, x.shape)


def conv3d_backward(
    dy: np.ndarray, cache: tuple
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Returns (dx, dweights, dbiases) for the cached forward pass."""
    cols, w, x_shape = cache
    cin, cout = w.shape[3], w.shape[4]
    dy_flat = dy.reshape(-1, cout)
    db = dy_flat.sum(axis=0)
    dw = (cols.T @ dy_flat).reshape(w.shape)
    # dx is the same-padded correlation of dy with the spatially flipped,
    # channel-transposed kernel.
    w_flip = w[::-1, ::-1, ::-1].transpose(0, 1, 2, 4, 3)
    dx, _ = conv3d_forward(
        dy, LayerParams(weights=np.ascontiguousarray(w_flip), biases=np.zeros(cin))
    )
    assert dx.shape == x_shape
    return dx, dw, db


# --------------------------------------------------------------------------
# Average pooling with floor truncation; windows clamp to short dims
# --------------------------------------------------------------------------


def _pool_geometry(dim: int, window: int) -> tuple[int, int]:
    # A dim shorter than the window collapses to one cell averaging what
    # exists; otherwise floor(dim/window) full windows, remainder dropped.
    if dim >= window:
        return dim // window, window
    return 1, dim


def avgpool3d_forward(x: np.ndarray, window: int = 2) -> tuple[np.ndarray, tuple]:
    if window < 1:
        raise ConfigError(f"pool window must be >= 1, got {window}")
    b, h, w, d, c = x.shape
    if window > max(h, w, d):
        raise ShapeError(f"pool window {window} exceeds every spatial dim of {x.shape}")
    (oh, wh), (ow, ww), (od, wd) = (
        _pool_geometry(h, window),
        _pool_geometry(w, window),
        _pool_geometry(d, window),
    )
    region = x[:, : oh * wh, : ow * ww, : od * wd, :]
    y = region.reshape(b, oh, wh, ow, ww, od, wd, c).mean(axis=(2, 4, 6))
    return y, (x.shape, (oh, wh, ow, ww, od, wd))


def avgpool3d_backward(dy: np.ndarray, cache: tuple) -> np.ndarray:
    x_shape, (oh, wh, ow, ww, od, wd) = cache
    scale = 1.0 / (wh * ww * wd)
    expanded = np.repeat(np.repeat(np.repeat(dy, wh, 1), ww, 2), wd, 3) * scale
    dx = np.zeros(x_shape)
    dx[:, : oh * wh, : ow * ww, : od * wd, :] = expanded
    return dx


# --------------------------------------------------------------------------
# Dense, ReLU, dropout
# --------------------------------------------------------------------------


def dense_forward(x: np.ndarray, params: LayerParams) -> tuple[np.ndarray, tuple]:
    """x: (B, n_in) or (n_in,); weights: (n_out, n_in); returns W x + b."""
    squeeze = x.ndim == 1
    xb = np.atleast_2d(np.asarray(x, dtype=np.float64))
    if xb.shape[1] != params.weights.shape[1]:
        raise ShapeError(
            f"dense input width {xb.shape[1]} does not match "
            f"weight columns {params.weights.shape[1]}"
        )
    y = xb @ params.weights.T + params.biases
    return (y[0] if squeeze else y), (xb, params.weights, squeeze)


def dense_backward(
    dy: np.ndarray, cache: tuple
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    xb, w, squeeze = cache
    dyb = np.atleast_2d(dy)
    dx = dyb @ w
    dw = dyb.T @ xb
    db = dyb.sum(axis=0)
    return (dx[0] if squeeze else dx), dw, db


def relu_forward(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    mask = x > 0  # subgradient at exactly 0 is 0
    return x * mask, mask


def relu_backward(dy: np.ndarray, mask: np.ndarray) -> np.ndarray:
    return dy * mask


def dropout_forward(
    x: np.ndarray,
    rate: float,
    training: bool,
    rng: np.random.Generator | None = None,
) -> tuple[np.ndarray, np.ndarray | None]:
    """Inverted dropout: kept units are scaled by 1/(1-rate); eval is identity."""
    if not 0.0 <= rate < 1.0:
        raise ConfigError(f"dropout rate must be in [0, 1), got {rate}")
    if not training or rate == 0.0:
        return x, None
    if rng is None:
        raise ConfigError("training-mode dropout needs an explicit rng")
    keep = (rng.random(x.shape) >= rate) / (1.0 - rate)
    return x * keep, keep


def dropout_backward(dy: np.ndarray, keep: np.ndarray | None) -> np.ndarray:
    return dy if keep is None else dy * keep


# --------------------------------------------------------------------------
# Softmax, cross-entropy, L2 penalty
# --------------------------------------------------------------------------


def softmax(logits: np.ndarray) -> np.ndarray:
    """Row-wise max-shifted softmax; safe for any finite logits."""
    z = np.asarray(logits, dtype=np.float64)
    shifted = z - z.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def cross_entropy(probs: np.ndarray, label: int) -> float:
    """One patch term: -log(probs[label] + floor), clamped at >= 0."""
    probs = np.asarray(probs, dtype=np.float64)
    if not 0 <= label < probs.shape[-1]:
        raise IndexError(f"label {label} out of range for {probs.shape[-1]} classes")
    return max(0.0, -float(np.log(probs[label] + CE_FLOOR)))


def l2_penalty(layers: list[LayerParams], lam: float) -> float:
    """(lam/2) * sum of squared weights; biases are excluded."""
    if lam < 0:
        raise ConfigError(f"regularization coefficient must be >= 0, got {lam}")
    return 0.5 * lam * float(sum(np.sum(p.weights**2) for p in layers))


# --------------------------------------------------------------------------
# Adam
# --------------------------------------------------------------------------


@dataclass
class AdamState:
    first_moment: list[np.ndarray]
    second_moment: list[np.ndarray]
    step_count: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8


def init_adam(
    params: list[np.ndarray], beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8
) -> AdamState:
    return AdamState(
        first_moment=[np.zeros_like(p) for p in params],
        second_moment=[np.zeros_like(p) for p in params],
        beta1=beta1,
        beta2=beta2,
        eps=eps,
    )


def adam_step(
    params: list[np.ndarray],
    grads: list[np.ndarray],
    state: AdamState,
    lr: float = 1e-3,
) -> None:
    """Standard bias-corrected Adam update, applied to params in place."""
    if len(params) != len(grads) or len(params) != len(state.first_moment):
        raise ShapeError("params, grads, and optimizer state disagree in length")
    state.step_count += 1
    t = state.step_count
    b1, b2 = state.beta1, state.beta2
    for p, g, m, v in zip(params, grads, state.first_moment, state.second_moment):
        if p.shape != g.shape:
            raise ShapeError(f"gradient shape {g.shape} != param shape {p.shape}")
        m *= b1
        m += (1 - b1) * g
        v *= b2
        v += (1 - b2) * g * g
        m_hat = m / (1 - b1**t)
        v_hat = v / (1 - b2**t)
        p -= lr * m_hat / (np.sqrt(v_hat) + state.eps)


# --------------------------------------------------------------------------
# Finite-difference checker
# --------------------------------------------------------------------------


def grad_check(
    f: Callable[[np.ndarray], float],
    x: np.ndarray,
    analytic: np.ndarray,
    eps: float = 1e-5,
) -> float:
    """Max relative error between ``analytic`` and central differences of f.

    f must be deterministic in x (freeze dropout masks before checking) and
    evaluated away from ReLU kinks.
    """
    x = np.asarray(x, dtype=np.float64)
    analytic = np.asarray(analytic, dtype=np.float64)
    if x.shape != analytic.shape:
        raise ShapeError("analytic gradient shape must match input shape")
    numeric = np.zeros_like(x)
    flat, nflat = x.ravel(), numeric.ravel()
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + eps
        fp = f(x)
        flat[i] = orig - eps
        fm = f(x)
        flat[i] = orig
        nflat[i] = (fp - fm) / (2.0 * eps)
    denom = np.maximum(np.abs(numeric) + np.abs(analytic), 1e-8)
    return float(np.max(np.abs(numeric - analytic) / denom))


# --------------------------------------------------------------------------
# Checkpoint format: named sections of decimal-encoded float64 arrays
# --------------------------------------------------------------------------


def save_params(
    path: str | Path,
    sections: dict[str, dict[str, np.ndarray]],
    meta: dict[str, str] | None = None,
) -> None:
    lines = [PARAMS_MAGIC]
    if meta:
        lines.append("[meta]")
        lines.extend(f"{k}={v}" for k, v in sorted(meta.items()))
    for name, arrays in sections.items():
        lines.append(f"[{name}]")
        for key, arr in arrays.items():
            arr = np.asarray(arr, dtype=np.float64)
            lines.append(f"{key}.shape=" + ",".join(str(s) for s in arr.shape))
            lines.append(f"{key}.values=" + " ".join(map(repr, arr.ravel().tolist())))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_params(
    path: str | Path,
) -> tuple[dict[str, dict[str, np.ndarray]], dict[str, str]]:
    path = Path(path)
    lines = path.read_text(encoding="utf-8").splitlines()
    if not lines or lines[0] != PARAMS_MAGIC:
        raise FormatError(f"{path}: missing '{PARAMS_MAGIC}' header")
    sections: dict[str, dict[str, np.ndarray]] = {}
    meta: dict[str, str] = {}
    current: str | None = None
    shapes: dict[str, tuple[int, ...]] = {}
    for line in lines[1:]:
        if not line.strip():
            continue
        if line.startswith("[") and line.endswith("]"):
            current = line[1:-1]
            if current != "meta":
                sections[current] = {}
                shapes = {}
            continue
        if current is None or "=" not in line:
            raise FormatError(f"{path}: stray line outside any section")
        key, value = line.split("=", 1)
        if current == "meta":
            meta[key] = value
        elif key.endswith(".shape"):
            shapes[key[: -len(".shape")]] = tuple(int(s) for s in value.split(","))
        elif key.endswith(".values"):
            name = key[: -len(".values")]
            if name not in shapes:
                raise FormatError(f"{path}: values for {name!r} precede its shape")
            arr = np.array([float(v) for v in value.split()], dtype=np.float64)
            if arr.size != int(np.prod(shapes[name])):
                raise FormatError(f"{path}: {name!r} payload does not match its shape")
            sections[current][name] = arr.reshape(shapes[name])
        else:
            raise FormatError(f"{path}: unrecognized entry {key!r}")
    return sections, meta
