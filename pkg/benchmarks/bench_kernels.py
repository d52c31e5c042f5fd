"""Benchmark the compiled kernel extension against the NumPy fallback.

Runs every kernel at training-realistic shapes and prints a per-kernel
timing table plus one end-to-end model-batch comparison. Usage:

    python benchmarks/bench_kernels.py [--batch 40] [--seq 64] [--repeats 30]
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from crosshate.embeddings import RESERVED_ROWS, AlignedEmbeddings, EmbeddingTable
from crosshate.kernels import available_backends
from crosshate.models import BiLSTMConfig, CNNConfig, build_bilstm_cnn, build_cnn
from crosshate.nn import single_thread_blas


def time_call(fn, repeats: int) -> float:
    fn()  # warmup
    start = time.perf_counter()
    for _ in range(repeats):
        fn()
    return (time.perf_counter() - start) / repeats * 1000.0


def kernel_cases(B: int, T: int, rng: np.random.Generator):
    D, H, F, k = 200, 100, 200, 3
    x = np.ascontiguousarray(rng.normal(size=(B, T, D)))
    lengths = rng.integers(1, T + 1, size=B).astype(np.int64)
    xp = np.ascontiguousarray(rng.normal(size=(B, T, 4 * H)))
    U = np.ascontiguousarray(rng.normal(size=(H, 4 * H)) * 0.3)
    act = np.ascontiguousarray(rng.normal(size=(B, T - k + 1, F)))
    dwin = np.ascontiguousarray(rng.normal(size=(B, T - k + 1, k * D)))
    dh = np.ascontiguousarray(rng.normal(size=(B, T, H)))

    def cases(impl):
        h, gates, c = impl.lstm_forward(xp, U, lengths)
        pooled, arg = impl.masked_max_forward(act, lengths)
        dout = np.ascontiguousarray(rng.normal(size=pooled.shape))
        return {
            "sliding_windows": lambda: impl.sliding_windows(x, k),
            "accumulate_windows": lambda: impl.accumulate_windows(dwin, T),
            "masked_max_forward": lambda: impl.masked_max_forward(act, lengths),
            "masked_max_backward": lambda: impl.masked_max_backward(dout, arg, T - k + 1),
            "lstm_forward": lambda: impl.lstm_forward(xp, U, lengths),
            "lstm_backward": lambda: impl.lstm_backward(dh, U, lengths, h, gates, c),
        }

    return cases


def model_batch_case(B: int, T: int, rng: np.random.Generator):
    dim = 24
    tokens = [f"tok{i}" for i in range(500)]
    matrix = np.zeros((len(tokens) + RESERVED_ROWS, dim))
    matrix[RESERVED_ROWS:] = rng.normal(size=(len(tokens), dim))
    table = EmbeddingTable(dimension=dim, vocabulary={t: RESERVED_ROWS + i for i, t in enumerate(tokens)}, matrix=matrix)
    space = AlignedEmbeddings({"xx": table})
    cnn = build_cnn(CNNConfig(), space, max_len=T, seed=0)
    lstm = build_bilstm_cnn(BiLSTMConfig(), space, max_len=T, seed=0)
    X = rng.integers(0, len(tokens), size=(B, T)).astype(np.int64)
    L = rng.integers(4, T + 1, size=B).astype(np.int64)
    E = table.matrix[X]
    y = rng.integers(0, 2, size=B)
    w = np.ones(B)

    return {
        "cnn_batch_fwd+bwd": lambda: cnn.loss_and_grads(E, L, y, w, 0.0, None),
        "bilstm_batch_fwd+bwd": lambda: lstm.loss_and_grads(E, L, y, w, 0.0, None),
    }


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--batch", type=int, default=40)
    parser.add_argument("--seq", type=int, default=64)
    parser.add_argument("--repeats", type=int, default=30)
    args = parser.parse_args(argv)

    backends = available_backends()
    if len(backends) < 2:
        print(f"only one backend available ({list(backends)}); build the extension to compare")
    rng = np.random.default_rng(0)
    cases = kernel_cases(args.batch, args.seq, rng)

    names = list(backends)
    print(f"batch={args.batch} seq={args.seq} repeats={args.repeats}")
    header = f"{'kernel':24s}" + "".join(f"{name:>12s}" for name in names) + ("     speedup" if len(names) == 2 else "")
    print(header)
    print("-" * len(header))
    with single_thread_blas():
        per_backend = {name: cases(impl) for name, impl in backends.items()}
        for kernel in next(iter(per_backend.values())):
            row = f"{kernel:24s}"
            times = []
            for name in names:
                ms = time_call(per_backend[name][kernel], args.repeats)
                times.append(ms)
                row += f"{ms:10.3f}ms"
            if len(times) == 2 and times[1] > 0:
                row += f"{times[0] / times[1]:10.2f}x"
            print(row)

        # one realistic full model batch through whichever backend is selected
        print()
        import crosshate.kernels as selected

        print(f"selected backend for the model path: {selected.BACKEND}")
        for name, fn in model_batch_case(args.batch, args.seq, rng).items():
            print(f"{name:24s}{time_call(fn, max(3, args.repeats // 3)):10.3f}ms")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
