"""NumPy reference implementations of the hot training kernels.

These are the fallback lane selected when the compiled extension is not
available, and the ground truth the extension is parity-tested against.
Shapes use B = batch, T = sequence length, D = input width, H = recurrent
units, F = feature maps, P = number of valid convolution windows.

LSTM gate layout along the last axis is (input, forget, cell, output); the
``xp`` argument is the precomputed input projection ``x @ W + b``. Positions
at or past an example's length are masked: states and cached activations
are zeroed there, so gradients cannot leak through padding.
"""

from __future__ import annotations

import numpy as np
from scipy.special import expit

NAME = "numpy"


def sliding_windows(x: np.ndarray, k: int) -> np.ndarray:
    """im2col for 1-d convolution: (B, T, D) -> (B, T-k+1, k*D)."""
    B, T, D = x.shape
    P = T - k + 1
    return np.concatenate([x[:, j : j + P, :] for j in range(k)], axis=2)


def accumulate_windows(dwin: np.ndarray, seq_len: int) -> np.ndarray:
    """col2im scatter-add, the adjoint of :func:`sliding_windows`."""
    B, P, KD = dwin.shape
    k = seq_len - P + 1
    D = KD // k
    dx = np.zeros((B, seq_len, D), dtype=dwin.dtype)
    for j in range(k):
        dx[:, j : j + P, :] += dwin[:, :, j * D : (j + 1) * D]
    return dx


def masked_max_forward(a: np.ndarray, counts: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Per-feature max over the first ``counts[b]`` positions of each row.

    Returns (pooled (B, F), argmax (B, F) int64); rows with zero valid
    positions pool to 0 with argmax -1.
    """
    B, P, F = a.shape
    valid = np.minimum(counts, P).astype(np.int64)
    invalid = np.arange(P)[None, :] >= valid[:, None]  # (B, P)
    masked = np.where(invalid[:, :, None], -np.inf, a)
    arg = masked.argmax(axis=1).astype(np.int64)  # first max wins
    out = np.take_along_axis(a, arg[:, None, :], axis=1)[:, 0, :].copy()
    empty = valid <= 0
    out[empty] = 0.0
    arg[empty] = -1
    return out, arg


def masked_max_backward(dout: np.ndarray, arg: np.ndarray, positions: int) -> np.ndarray:
    """Route pooled gradients back to the winning positions."""
    B, F = dout.shape
    da = np.zeros((B, positions, F), dtype=dout.dtype)
    b_idx, f_idx = np.nonzero(arg >= 0)
    da[b_idx, arg[b_idx, f_idx], f_idx] = dout[b_idx, f_idx]
    return da


def lstm_forward(
    xp: np.ndarray, U: np.ndarray, lengths: np.ndarray
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Run one LSTM direction over a padded batch.

    Returns (h (B, T, H), gates (B, T, 4H) post-activation, c (B, T, H));
    all three are zero at masked positions.
    """
    B, T, H4 = xp.shape
    H = H4 // 4
    h = np.zeros((B, T, H), dtype=np.float64)
    gates = np.zeros((B, T, H4), dtype=np.float64)
    c = np.zeros((B, T, H), dtype=np.float64)
    h_prev = np.zeros((B, H), dtype=np.float64)
    c_prev = np.zeros((B, H), dtype=np.float64)
    for t in range(T):
        active = (lengths > t).astype(np.float64)[:, None]
        s = xp[:, t, :] + h_prev @ U
        i = expit(s[:, :H])
        f = expit(s[:, H : 2 * H])
        g = np.tanh(s[:, 2 * H : 3 * H])
        o = expit(s[:, 3 * H :])
        c_t = (f * c_prev + i * g) * active
        h_t = o * np.tanh(c_t) * active
        gates[:, t, :H] = i * active
        gates[:, t, H : 2 * H] = f * active
        gates[:, t, 2 * H : 3 * H] = g * active
        gates[:, t, 3 * H :] = o * active
        c[:, t] = c_t
        h[:, t] = h_t
        h_prev = h_t
        c_prev = c_t
    return h, gates, c


def lstm_backward(
    dh_out: np.ndarray,
    U: np.ndarray,
    lengths: np.ndarray,
    h: np.ndarray,
    gates: np.ndarray,
    c: np.ndarray,
) -> tuple[np.ndarray, np.ndarray]:
    """Backpropagation through time for :func:`lstm_forward`.

    ``dh_out`` is the gradient w.r.t. the full output sequence. Returns
    (dxp (B, T, 4H), dU (H, 4H)); the input-projection gradient folds back
    into W and b as ``dW = x^T dxp`` and ``db = sum(dxp)``.
    """
    B, T, H = dh_out.shape
    dxp = np.zeros((B, T, 4 * H), dtype=np.float64)
    dU = np.zeros_like(U)
    dh_prev = np.zeros((B, H), dtype=np.float64)
    dc_prev = np.zeros((B, H), dtype=np.float64)
    for t in range(T - 1, -1, -1):
        active = (lengths > t).astype(np.float64)[:, None]
        i = gates[:, t, :H]
        f = gates[:, t, H : 2 * H]
        g = gates[:, t, 2 * H : 3 * H]
        o = gates[:, t, 3 * H :]
        tc = np.tanh(c[:, t])
        dh = (dh_out[:, t] + dh_prev) * active
        do = dh * tc
        dc = dh * o * (1.0 - tc * tc) + dc_prev * active
        di = dc * g
        dg = dc * i
        c_prev = c[:, t - 1] if t > 0 else np.zeros((B, H))
        df = dc * c_prev
        dc_prev = dc * f
        ds = np.concatenate(
            [di * i * (1.0 - i), df * f * (1.0 - f), dg * (1.0 - g * g), do * o * (1.0 - o)],
            axis=1,
        )
        dxp[:, t] = ds
        h_prev = h[:, t - 1] if t > 0 else np.zeros((B, H))
        dU += h_prev.T @ ds
        dh_prev = ds @ U.T
    return dxp, dU
