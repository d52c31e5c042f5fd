"""Building blocks for the vector-based classifiers.

Everything here is float64 NumPy driven through the selected kernel
backend. Parameters live in plain ``dict[str, np.ndarray]`` maps so
optimizers, serialization and gradient checks can treat models uniformly.
"""

from __future__ import annotations

from contextlib import nullcontext

import numpy as np

from . import kernels
from .errors import TrainingDivergedError


def single_thread_blas():
    """Pin BLAS to one thread for the duration of a training/inference scope.

    The GEMMs here are small; on few-core machines competing OpenBLAS
    threadpools (NumPy's and SciPy's) slow them down by almost an order of
    magnitude, and a fixed thread count keeps reductions bit-reproducible.
    """
    try:
        from threadpoolctl import threadpool_limits
    except ImportError:
        return nullcontext()
    return threadpool_limits(limits=1, user_api="blas")


def glorot_uniform(rng: np.random.Generator, fan_in: int, fan_out: int, shape=None) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape or (fan_in, fan_out))


def softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def weighted_softmax_cross_entropy(
    logits: np.ndarray, targets: np.ndarray, sample_weights: np.ndarray
) -> tuple[float, np.ndarray]:
    """Per-example weighted cross-entropy, normalized by the batch weight sum.

    Returns (loss, dlogits). Scaling all weights by a positive constant
    leaves both unchanged; a batch whose weights sum to zero contributes
    zero loss and zero gradient.
    """
    n = logits.shape[0]
    total_weight = float(sample_weights.sum())
    if total_weight <= 0.0:
        return 0.0, np.zeros_like(logits)
    shifted = logits - logits.max(axis=1, keepdims=True)
    log_probs = shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    loss = float(np.sum(sample_weights * -log_probs[np.arange(n), targets]) / total_weight)
    dlogits = np.exp(log_probs)
    dlogits[np.arange(n), targets] -= 1.0
    dlogits *= (sample_weights / total_weight)[:, None]
    return loss, dlogits


def dropout_mask(rng: np.random.Generator, shape, rate: float) -> np.ndarray | None:
    """Inverted-dropout mask; ``None`` means identity (rate 0)."""
    if rate <= 0.0:
        return None
    if rate >= 1.0:
        return np.zeros(shape, dtype=np.float64)
    return (rng.random(shape) >= rate) / (1.0 - rate)


class Adam:
    """Adaptive-moment gradient descent with the usual default constants."""

    def __init__(self, params: dict[str, np.ndarray], lr: float, beta1: float = 0.9,
                 beta2: float = 0.999, eps: float = 1e-8):
        self.params = params
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}

    def step(self, grads: dict[str, np.ndarray]) -> None:
        self.t += 1
        bias1 = 1.0 - self.beta1**self.t
        bias2 = 1.0 - self.beta2**self.t
        for key, g in grads.items():
            p = self.params[key]
            m = self.m[key]
            v = self.v[key]
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * (g * g)
            p -= self.lr * (m / bias1) / (np.sqrt(v / bias2) + self.eps)


# --- layers -----------------------------------------------------------------


def dense_forward(x: np.ndarray, W: np.ndarray, b: np.ndarray) -> np.ndarray:
    return x @ W + b


def dense_backward(x: np.ndarray, W: np.ndarray, dy: np.ndarray):
    return dy @ W.T, x.T @ dy, dy.sum(axis=0)


def conv_pool_forward(x: np.ndarray, lengths: np.ndarray, W: np.ndarray, b: np.ndarray, k: int):
    """Convolve (valid, kernel width k), ReLU, then max-pool over the first
    ``lengths`` window positions. Returns (pooled (B, F), cache).

    Batched matmuls are flattened to one GEMM; at these shapes that beats
    NumPy's per-example batched path by a wide margin.
    """
    B = x.shape[0]
    windows = kernels.sliding_windows(x, k)
    positions = windows.shape[1]
    z = (windows.reshape(-1, windows.shape[2]) @ W).reshape(B, positions, -1) + b
    a = np.maximum(z, 0.0)
    pooled, arg = kernels.masked_max_forward(a, np.ascontiguousarray(lengths, dtype=np.int64))
    cache = (windows, z, arg, x.shape[1], k)
    return pooled, cache


def conv_pool_backward(dpooled: np.ndarray, W: np.ndarray, cache, need_dx: bool):
    """Returns (dW, db, dx); dx is None unless requested (the embedding layer
    below the CNN is frozen, so its gradient is never needed there)."""
    windows, z, arg, seq_len, k = cache
    positions = z.shape[1]
    da = kernels.masked_max_backward(np.ascontiguousarray(dpooled), arg, positions)
    dz = da * (z > 0.0)
    flat_win = windows.reshape(-1, windows.shape[2])
    flat_dz = dz.reshape(-1, dz.shape[2])
    dW = flat_win.T @ flat_dz
    db = flat_dz.sum(axis=0)
    dx = None
    if need_dx:
        dwin = (flat_dz @ W.T).reshape(windows.shape)
        dx = kernels.accumulate_windows(np.ascontiguousarray(dwin), seq_len)
    return dW, db, dx


def reverse_within_lengths(x: np.ndarray, lengths: np.ndarray) -> np.ndarray:
    """Reverse each row's first ``lengths[b]`` positions; padding stays put."""
    B, T = x.shape[0], x.shape[1]
    out = np.zeros_like(x)
    for b in range(B):
        n = int(lengths[b])
        if n > 0:
            out[b, :n] = x[b, :n][::-1]
    return out


def lstm_layer_forward(x: np.ndarray, lengths: np.ndarray, W: np.ndarray, U: np.ndarray, b: np.ndarray):
    """One LSTM direction over embedded input x (B, T, D)."""
    B, T, _ = x.shape
    xp = np.ascontiguousarray((x.reshape(-1, x.shape[2]) @ W + b).reshape(B, T, -1))
    h, gates, c = kernels.lstm_forward(xp, U, np.ascontiguousarray(lengths, dtype=np.int64))
    cache = (x, W, U, lengths, h, gates, c)
    return h, cache


def lstm_layer_backward(dh: np.ndarray, cache, need_dx: bool = False):
    """Returns (dW, dU, db, dx)."""
    x, W, U, lengths, h, gates, c = cache
    dxp, dU = kernels.lstm_backward(
        np.ascontiguousarray(dh), U, np.ascontiguousarray(lengths, dtype=np.int64), h, gates, c
    )
    flat_x = x.reshape(-1, x.shape[2])
    flat_dxp = dxp.reshape(-1, dxp.shape[2])
    dW = flat_x.T @ flat_dxp
    db = flat_dxp.sum(axis=0)
    dx = (flat_dxp @ W.T).reshape(x.shape) if need_dx else None
    return dW, dU, db, dx


def check_finite(loss: float, epoch: int, batch: int) -> None:
    if not np.isfinite(loss):
        raise TrainingDivergedError(
            f"non-finite training loss ({loss}) at epoch {epoch}, batch {batch}; "
            "lower the learning rate or inspect the input data",
            epoch=epoch,
            batch=batch,
        )
