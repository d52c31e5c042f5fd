# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels for the CNN/BiLSTM training inner loops.

Same contracts as ``crosshate.kernels.reference``; the LSTM sequence loop
fuses the gate math and drives the recurrent matmuls through BLAS directly,
which is where the NumPy lane loses time at small batch sizes.
"""

from libc.math cimport exp, tanh
from libc.string cimport memcpy, memset

import numpy as np

cimport numpy as cnp
from scipy.linalg.cython_blas cimport dgemm

cnp.import_array()

NAME = "cython"

ctypedef cnp.int64_t i64


cdef inline double _sigmoid(double x) nogil:
    return 1.0 / (1.0 + exp(-x))


cdef inline void _mm(double* a, double* b, double* c,
                     int m, int k, int n, double beta) noexcept nogil:
    # Row-major C(m,n) = A(m,k) @ B(k,n) + beta*C via column-major BLAS:
    # C^T = B^T A^T.
    cdef double one = 1.0
    dgemm("N", "N", &n, &m, &k, &one, b, &n, a, &k, &beta, c, &n)


cdef inline void _mm_at_b(double* a, double* b, double* c,
                          int p, int m, int n, double beta) noexcept nogil:
    # Row-major C(m,n) = A(p,m)^T @ B(p,n) + beta*C.
    cdef double one = 1.0
    dgemm("N", "T", &n, &m, &p, &one, b, &n, a, &m, &beta, c, &n)


cdef inline void _mm_a_bt(double* a, double* b, double* c,
                          int m, int p, int n, double beta) noexcept nogil:
    # Row-major C(m,n) = A(m,p) @ B(n,p)^T + beta*C.
    cdef double one = 1.0
    dgemm("T", "N", &n, &m, &p, &one, b, &p, a, &p, &beta, c, &n)


def sliding_windows(double[:, :, ::1] x, int k):
    cdef int B = x.shape[0], T = x.shape[1], D = x.shape[2]
    cdef int P = T - k + 1
    out_arr = np.empty((B, P, k * D), dtype=np.float64)
    cdef double[:, :, ::1] out = out_arr
    cdef int b, p, j
    with nogil:
        for b in range(B):
            for p in range(P):
                for j in range(k):
                    memcpy(&out[b, p, j * D], &x[b, p + j, 0], D * sizeof(double))
    return out_arr


def accumulate_windows(double[:, :, ::1] dwin, int seq_len):
    cdef int B = dwin.shape[0], P = dwin.shape[1], KD = dwin.shape[2]
    cdef int k = seq_len - P + 1
    cdef int D = KD // k
    dx_arr = np.zeros((B, seq_len, D), dtype=np.float64)
    cdef double[:, :, ::1] dx = dx_arr
    cdef int b, p, j, d
    with nogil:
        for b in range(B):
            for p in range(P):
                for j in range(k):
                    for d in range(D):
                        dx[b, p + j, d] += dwin[b, p, j * D + d]
    return dx_arr


def masked_max_forward(double[:, :, ::1] a, i64[::1] counts):
    cdef int B = a.shape[0], P = a.shape[1], F = a.shape[2]
    out_arr = np.zeros((B, F), dtype=np.float64)
    arg_arr = np.full((B, F), -1, dtype=np.int64)
    cdef double[:, ::1] out = out_arr
    cdef i64[:, ::1] arg = arg_arr
    cdef int b, p, f, n
    cdef double v
    with nogil:
        for b in range(B):
            n = <int>counts[b]
            if n > P:
                n = P
            if n <= 0:
                continue
            for f in range(F):
                out[b, f] = a[b, 0, f]
                arg[b, f] = 0
            for p in range(1, n):
                for f in range(F):
                    v = a[b, p, f]
                    if v > out[b, f]:
                        out[b, f] = v
                        arg[b, f] = p
    return out_arr, arg_arr


def masked_max_backward(double[:, ::1] dout, i64[:, ::1] arg, int positions):
    cdef int B = dout.shape[0], F = dout.shape[1]
    da_arr = np.zeros((B, positions, F), dtype=np.float64)
    cdef double[:, :, ::1] da = da_arr
    cdef int b, f
    with nogil:
        for b in range(B):
            for f in range(F):
                if arg[b, f] >= 0:
                    da[b, <int>arg[b, f], f] = dout[b, f]
    return da_arr


def lstm_forward(double[:, :, ::1] xp, double[:, ::1] U, i64[::1] lengths):
    cdef int B = xp.shape[0], T = xp.shape[1], H4 = xp.shape[2]
    cdef int H = H4 // 4
    h_arr = np.zeros((B, T, H), dtype=np.float64)
    gates_arr = np.zeros((B, T, H4), dtype=np.float64)
    c_arr = np.zeros((B, T, H), dtype=np.float64)
    s_arr = np.empty((B, H4), dtype=np.float64)
    hp_arr = np.zeros((B, H), dtype=np.float64)
    cp_arr = np.zeros((B, H), dtype=np.float64)
    cdef double[:, :, ::1] h = h_arr, gates = gates_arr, c = c_arr
    cdef double[:, ::1] s = s_arr, h_prev = hp_arr, c_prev = cp_arr
    cdef int b, t, j
    cdef double gi, gf, gg, go, cv
    with nogil:
        for t in range(T):
            for b in range(B):
                memcpy(&s[b, 0], &xp[b, t, 0], H4 * sizeof(double))
            _mm(&h_prev[0, 0], &U[0, 0], &s[0, 0], B, H, H4, 1.0)
            for b in range(B):
                if t < lengths[b]:
                    for j in range(H):
                        gi = _sigmoid(s[b, j])
                        gf = _sigmoid(s[b, H + j])
                        gg = tanh(s[b, 2 * H + j])
                        go = _sigmoid(s[b, 3 * H + j])
                        cv = gf * c_prev[b, j] + gi * gg
                        gates[b, t, j] = gi
                        gates[b, t, H + j] = gf
                        gates[b, t, 2 * H + j] = gg
                        gates[b, t, 3 * H + j] = go
                        c[b, t, j] = cv
                        h[b, t, j] = go * tanh(cv)
                        c_prev[b, j] = cv
                        h_prev[b, j] = h[b, t, j]
                else:
                    # past this row's length: state pinned at zero
                    memset(&h_prev[b, 0], 0, H * sizeof(double))
                    memset(&c_prev[b, 0], 0, H * sizeof(double))
    return h_arr, gates_arr, c_arr


def lstm_backward(double[:, :, ::1] dh_out, double[:, ::1] U, i64[::1] lengths,
                  double[:, :, ::1] h, double[:, :, ::1] gates, double[:, :, ::1] c):
    cdef int B = dh_out.shape[0], T = dh_out.shape[1], H = dh_out.shape[2]
    cdef int H4 = 4 * H
    dxp_arr = np.zeros((B, T, H4), dtype=np.float64)
    dU_arr = np.zeros((H, H4), dtype=np.float64)
    ds_arr = np.zeros((B, H4), dtype=np.float64)
    dhp_arr = np.zeros((B, H), dtype=np.float64)
    dcp_arr = np.zeros((B, H), dtype=np.float64)
    hprev_arr = np.zeros((B, H), dtype=np.float64)
    cdef double[:, :, ::1] dxp = dxp_arr
    cdef double[:, ::1] dU = dU_arr, ds = ds_arr, dh_prev = dhp_arr, dc_prev = dcp_arr
    cdef double[:, ::1] h_prev = hprev_arr
    cdef int b, t, j
    cdef double gi, gf, gg, go, tc, dh, do, dc, di, dg, df, cprev
    with nogil:
        for t in range(T - 1, -1, -1):
            for b in range(B):
                if t < lengths[b]:
                    for j in range(H):
                        gi = gates[b, t, j]
                        gf = gates[b, t, H + j]
                        gg = gates[b, t, 2 * H + j]
                        go = gates[b, t, 3 * H + j]
                        tc = tanh(c[b, t, j])
                        dh = dh_out[b, t, j] + dh_prev[b, j]
                        do = dh * tc
                        dc = dh * go * (1.0 - tc * tc) + dc_prev[b, j]
                        di = dc * gg
                        dg = dc * gi
                        cprev = c[b, t - 1, j] if t > 0 else 0.0
                        df = dc * cprev
                        dc_prev[b, j] = dc * gf
                        ds[b, j] = di * gi * (1.0 - gi)
                        ds[b, H + j] = df * gf * (1.0 - gf)
                        ds[b, 2 * H + j] = dg * (1.0 - gg * gg)
                        ds[b, 3 * H + j] = do * go * (1.0 - go)
                else:
                    memset(&ds[b, 0], 0, H4 * sizeof(double))
                    memset(&dc_prev[b, 0], 0, H * sizeof(double))
            for b in range(B):
                memcpy(&dxp[b, t, 0], &ds[b, 0], H4 * sizeof(double))
                if t > 0:
                    memcpy(&h_prev[b, 0], &h[b, t - 1, 0], H * sizeof(double))
                else:
                    memset(&h_prev[b, 0], 0, H * sizeof(double))
            _mm_at_b(&h_prev[0, 0], &ds[0, 0], &dU[0, 0], B, H, H4, 1.0)
            _mm_a_bt(&ds[0, 0], &U[0, 0], &dh_prev[0, 0], B, H4, H, 0.0)
    return dxp_arr, dU_arr
