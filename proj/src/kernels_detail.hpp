#pragma once

// Internal helpers shared by the serial and OpenMP kernel builds. Both call
// the same per-chunk accumulators so the floating-point operation order is
// identical; only the loop scheduling around them differs.

#include <cstdint>

#include "admmprune/kernels.hpp"

namespace admmprune::kernels::detail {

template <typename T>
void conv2d_accumulate_chunk(const TensorT<T>& gout, const TensorT<T>& in, int kh, int kw,
                             int stride, const ConvShape& cs, int b_begin, int b_end,
                             T* gw, T* gb) {
    const int N = gout.dim(1), Ho = gout.dim(2), Wo = gout.dim(3);
    const int M = in.dim(1), H = in.dim(2), W = in.dim(3);
    const T* gp = gout.ptr();
    const T* ip = in.ptr();
    for (int b = b_begin; b < b_end; ++b)
        for (int j = 0; j < N; ++j)
            for (int y = 0; y < Ho; ++y)
                for (int x = 0; x < Wo; ++x) {
                    T g = gp[((int64_t(b) * N + j) * Ho + y) * Wo + x];
                    gb[j] += g;
                    for (int i = 0; i < M; ++i)
                        for (int ky = 0; ky < kh; ++ky) {
                            int iy = y * stride - cs.pad_top + ky;
                            if (iy < 0 || iy >= H) continue;
                            for (int kx = 0; kx < kw; ++kx) {
                                int ix = x * stride - cs.pad_left + kx;
                                if (ix < 0 || ix >= W) continue;
                                gw[((int64_t(j) * M + i) * kh + ky) * kw + kx] +=
                                    g * ip[((int64_t(b) * M + i) * H + iy) * W + ix];
                            }
                        }
                }
}

template <typename T>
void fc_accumulate_chunk(const TensorT<T>& gout, const TensorT<T>& in, int b_begin, int b_end,
                         T* gw, T* gb) {
    const int N = gout.dim(1), K = in.dim(1);
    const T* gp = gout.ptr();
    const T* ip = in.ptr();
    for (int b = b_begin; b < b_end; ++b)
        for (int n = 0; n < N; ++n) {
            T g = gp[int64_t(b) * N + n];
            gb[n] += g;
            for (int k = 0; k < K; ++k) gw[int64_t(n) * K + k] += g * ip[int64_t(b) * K + k];
        }
}

/// One output element of conv2d_forward; shared so both builds use the same
/// accumulation order.
template <typename T>
T conv2d_forward_one(const T* ip, const T* wp, T bias_j, int M, int H, int W, int kh, int kw,
                     int stride, const ConvShape& cs, int64_t b, int64_t j, int y, int x) {
    T acc = bias_j;
    for (int i = 0; i < M; ++i)
        for (int ky = 0; ky < kh; ++ky) {
            int iy = y * stride - cs.pad_top + ky;
            if (iy < 0 || iy >= H) continue;
            for (int kx = 0; kx < kw; ++kx) {
                int ix = x * stride - cs.pad_left + kx;
                if (ix < 0 || ix >= W) continue;
                acc += ip[((b * M + i) * H + iy) * W + ix] *
                       wp[((j * M + i) * kh + ky) * kw + kx];
            }
        }
    return acc;
}

/// One input cell of conv2d_backward_data (gather form).
template <typename T>
T conv2d_backward_data_one(const T* gp, const T* wp, int N, int M, int kh, int kw, int stride,
                           const ConvShape& cs, int64_t b, int64_t i, int iy, int ix) {
    T acc{};
    for (int j = 0; j < N; ++j)
        for (int ky = 0; ky < kh; ++ky) {
            int num_y = iy + cs.pad_top - ky;
            if (num_y < 0 || num_y % stride != 0) continue;
            int y = num_y / stride;
            if (y >= cs.out_h) continue;
            for (int kx = 0; kx < kw; ++kx) {
                int num_x = ix + cs.pad_left - kx;
                if (num_x < 0 || num_x % stride != 0) continue;
                int x = num_x / stride;
                if (x >= cs.out_w) continue;
                acc += gp[((b * N + j) * cs.out_h + y) * cs.out_w + x] *
                       wp[((int64_t(j) * M + i) * kh + ky) * kw + kx];
            }
        }
    return acc;
}

/// One (b, m) plane of maxpool_forward.
template <typename T>
void maxpool_forward_plane(const T* ip, T* op, int32_t* am, int H, int W, int Ho, int Wo,
                           int win, int stride, int64_t plane) {
    for (int y = 0; y < Ho; ++y)
        for (int x = 0; x < Wo; ++x) {
            // ties keep the first maximum in scan order
            int64_t best_idx = -1;
            T best{};
            for (int ky = 0; ky < win; ++ky)
                for (int kx = 0; kx < win; ++kx) {
                    int64_t idx = (plane * H + y * stride + ky) * W + x * stride + kx;
                    if (best_idx < 0 || ip[idx] > best) {
                        best = ip[idx];
                        best_idx = idx;
                    }
                }
            int64_t oidx = (plane * Ho + y) * Wo + x;
            op[oidx] = best;
            am[oidx] = static_cast<int32_t>(best_idx);
        }
}

}  // namespace admmprune::kernels::detail
