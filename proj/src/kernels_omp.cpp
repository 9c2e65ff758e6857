#include <algorithm>
#include <stdexcept>

#include "kernels_detail.hpp"

// Every loop below parallelizes over disjoint output regions (samples,
// planes, or reduction chunks) and computes each element with the same
// detail:: helper as the serial build, so outputs match it bit for bit.

namespace admmprune::kernels::omp {

template <typename T>
void conv2d_forward(const TensorT<T>& in, const TensorT<T>& w, const TensorT<T>& bias,
                    int stride, bool same_pad, TensorT<T>& out) {
    const int B = in.dim(0), M = in.dim(1), H = in.dim(2), W = in.dim(3);
    const int N = w.dim(0), kh = w.dim(2), kw = w.dim(3);
    ConvShape cs = conv_output_shape(H, W, kh, kw, stride, same_pad);
    out = TensorT<T>({B, N, cs.out_h, cs.out_w});

    const T* ip = in.ptr();
    const T* wp = w.ptr();
    T* op = out.ptr();
    const int64_t planes = int64_t(B) * N;
#pragma omp parallel for schedule(static)
    for (int64_t p = 0; p < planes; ++p) {
        int64_t b = p / N;
        int64_t j = p % N;
        for (int y = 0; y < cs.out_h; ++y)
            for (int x = 0; x < cs.out_w; ++x)
                op[(p * cs.out_h + y) * cs.out_w + x] =
                    detail::conv2d_forward_one(ip, wp, bias[j], M, H, W, kh, kw, stride, cs,
                                               b, j, y, x);
    }
}

template <typename T>
void conv2d_backward_data(const TensorT<T>& gout, const TensorT<T>& w, int in_h, int in_w,
                          int stride, bool same_pad, TensorT<T>& gin) {
    const int B = gout.dim(0), N = gout.dim(1);
    const int M = w.dim(1), kh = w.dim(2), kw = w.dim(3);
    ConvShape cs = conv_output_shape(in_h, in_w, kh, kw, stride, same_pad);
    gin = TensorT<T>({B, M, in_h, in_w});

    const T* gp = gout.ptr();
    const T* wp = w.ptr();
    T* ginp = gin.ptr();
    const int64_t planes = int64_t(B) * M;
#pragma omp parallel for schedule(static)
    for (int64_t p = 0; p < planes; ++p) {
        int64_t b = p / M;
        int64_t i = p % M;
        for (int iy = 0; iy < in_h; ++iy)
            for (int ix = 0; ix < in_w; ++ix)
                ginp[(p * in_h + iy) * in_w + ix] =
                    detail::conv2d_backward_data_one(gp, wp, N, M, kh, kw, stride, cs,
                                                     b, i, iy, ix);
    }
}

template <typename T>
void conv2d_backward_filter(const TensorT<T>& gout, const TensorT<T>& in, int kh, int kw,
                            int stride, bool same_pad, TensorT<T>& gw, TensorT<T>& gb) {
    const int B = in.dim(0), M = in.dim(1), H = in.dim(2), W = in.dim(3);
    const int N = gout.dim(1);
    ConvShape cs = conv_output_shape(H, W, kh, kw, stride, same_pad);
    gw = TensorT<T>({N, M, kh, kw});
    gb = TensorT<T>({N});

    const int nchunks = (B + kGradChunk - 1) / kGradChunk;
    std::vector<std::vector<T>> gw_c(nchunks, std::vector<T>(static_cast<size_t>(gw.numel()), T{}));
    std::vector<std::vector<T>> gb_c(nchunks, std::vector<T>(static_cast<size_t>(N), T{}));
#pragma omp parallel for schedule(static)
    for (int c = 0; c < nchunks; ++c) {
        int b0 = c * kGradChunk;
        int b1 = std::min(B, b0 + kGradChunk);
        detail::conv2d_accumulate_chunk(gout, in, kh, kw, stride, cs, b0, b1,
                                        gw_c[c].data(), gb_c[c].data());
    }
    // cross-chunk reduce stays serial and in index order
    for (int c = 0; c < nchunks; ++c) {
        for (int64_t i = 0; i < gw.numel(); ++i) gw[i] += gw_c[c][static_cast<size_t>(i)];
        for (int n = 0; n < N; ++n) gb[n] += gb_c[c][static_cast<size_t>(n)];
    }
}

template <typename T>
void fc_forward(const TensorT<T>& in, const TensorT<T>& w, const TensorT<T>& bias, TensorT<T>& out) {
    const int B = in.dim(0), K = in.dim(1), N = w.dim(0);
    out = TensorT<T>({B, N});
    const T* ip = in.ptr();
    const T* wp = w.ptr();
    T* op = out.ptr();
#pragma omp parallel for schedule(static)
    for (int b = 0; b < B; ++b)
        for (int n = 0; n < N; ++n) {
            T acc = bias[n];
            for (int k = 0; k < K; ++k) acc += ip[int64_t(b) * K + k] * wp[int64_t(n) * K + k];
            op[int64_t(b) * N + n] = acc;
        }
}

template <typename T>
void fc_backward_data(const TensorT<T>& gout, const TensorT<T>& w, TensorT<T>& gin) {
    const int B = gout.dim(0), N = gout.dim(1), K = w.dim(1);
    gin = TensorT<T>({B, K});
    const T* gp = gout.ptr();
    const T* wp = w.ptr();
    T* ginp = gin.ptr();
#pragma omp parallel for schedule(static)
    for (int b = 0; b < B; ++b)
        for (int k = 0; k < K; ++k) {
            T acc{};
            for (int n = 0; n < N; ++n) acc += gp[int64_t(b) * N + n] * wp[int64_t(n) * K + k];
            ginp[int64_t(b) * K + k] = acc;
        }
}

template <typename T>
void fc_backward_filter(const TensorT<T>& gout, const TensorT<T>& in, TensorT<T>& gw, TensorT<T>& gb) {
    const int B = in.dim(0), K = in.dim(1), N = gout.dim(1);
    gw = TensorT<T>({N, K});
    gb = TensorT<T>({N});
    const int nchunks = (B + kGradChunk - 1) / kGradChunk;
    std::vector<std::vector<T>> gw_c(nchunks, std::vector<T>(static_cast<size_t>(gw.numel()), T{}));
    std::vector<std::vector<T>> gb_c(nchunks, std::vector<T>(static_cast<size_t>(N), T{}));
#pragma omp parallel for schedule(static)
    for (int c = 0; c < nchunks; ++c) {
        int b0 = c * kGradChunk;
        int b1 = std::min(B, b0 + kGradChunk);
        detail::fc_accumulate_chunk(gout, in, b0, b1, gw_c[c].data(), gb_c[c].data());
    }
    for (int c = 0; c < nchunks; ++c) {
        for (int64_t i = 0; i < gw.numel(); ++i) gw[i] += gw_c[c][static_cast<size_t>(i)];
        for (int n = 0; n < N; ++n) gb[n] += gb_c[c][static_cast<size_t>(n)];
    }
}

template <typename T>
void relu_forward(const TensorT<T>& in, TensorT<T>& out) {
    out = TensorT<T>(in.shape);
    const int64_t n = in.numel();
#pragma omp parallel for schedule(static)
    for (int64_t i = 0; i < n; ++i) out[i] = in[i] > T{} ? in[i] : T{};
}

template <typename T>
void relu_backward(const TensorT<T>& gout, const TensorT<T>& out, TensorT<T>& gin) {
    gin = TensorT<T>(gout.shape);
    const int64_t n = gout.numel();
#pragma omp parallel for schedule(static)
    for (int64_t i = 0; i < n; ++i) gin[i] = out[i] > T{} ? gout[i] : T{};
}

template <typename T>
void maxpool_forward(const TensorT<T>& in, int win, int stride, TensorT<T>& out,
                     std::vector<int32_t>& argmax) {
    const int B = in.dim(0), M = in.dim(1), H = in.dim(2), W = in.dim(3);
    if (H < win || W < win) throw std::invalid_argument("maxpool: input smaller than window");
    const int Ho = (H - win) / stride + 1;
    const int Wo = (W - win) / stride + 1;
    out = TensorT<T>({B, M, Ho, Wo});
    argmax.assign(static_cast<size_t>(out.numel()), 0);

    const int64_t planes = int64_t(B) * M;
#pragma omp parallel for schedule(static)
    for (int64_t plane = 0; plane < planes; ++plane)
        detail::maxpool_forward_plane(in.ptr(), out.ptr(), argmax.data(), H, W, Ho, Wo,
                                      win, stride, plane);
}

template <typename T>
void maxpool_backward(const TensorT<T>& gout, const std::vector<int32_t>& argmax, TensorT<T>& gin) {
    gin.fill(T{});
    const int B = gout.dim(0), M = gout.dim(1), Ho = gout.dim(2), Wo = gout.dim(3);
    const T* gp = gout.ptr();
    T* ginp = gin.ptr();
    const int64_t planes = int64_t(B) * M;
    const int64_t per_plane = int64_t(Ho) * Wo;
    // argmax indices never leave their own (sample, map) plane, so planes can
    // scatter concurrently; overlap within a plane is handled serially.
#pragma omp parallel for schedule(static)
    for (int64_t p = 0; p < planes; ++p)
        for (int64_t o = p * per_plane; o < (p + 1) * per_plane; ++o)
            ginp[argmax[static_cast<size_t>(o)]] += gp[o];
}

#define ADMMPRUNE_INSTANTIATE_OMP(T)                                                              \
    template void conv2d_forward<T>(const TensorT<T>&, const TensorT<T>&, const TensorT<T>&,      \
                                    int, bool, TensorT<T>&);                                      \
    template void conv2d_backward_data<T>(const TensorT<T>&, const TensorT<T>&, int, int, int,    \
                                          bool, TensorT<T>&);                                     \
    template void conv2d_backward_filter<T>(const TensorT<T>&, const TensorT<T>&, int, int, int,  \
                                            bool, TensorT<T>&, TensorT<T>&);                      \
    template void fc_forward<T>(const TensorT<T>&, const TensorT<T>&, const TensorT<T>&,          \
                                TensorT<T>&);                                                     \
    template void fc_backward_data<T>(const TensorT<T>&, const TensorT<T>&, TensorT<T>&);         \
    template void fc_backward_filter<T>(const TensorT<T>&, const TensorT<T>&, TensorT<T>&,        \
                                        TensorT<T>&);                                             \
    template void relu_forward<T>(const TensorT<T>&, TensorT<T>&);                                \
    template void relu_backward<T>(const TensorT<T>&, const TensorT<T>&, TensorT<T>&);            \
    template void maxpool_forward<T>(const TensorT<T>&, int, int, TensorT<T>&,                    \
                                     std::vector<int32_t>&);                                      \
    template void maxpool_backward<T>(const TensorT<T>&, const std::vector<int32_t>&,             \
                                      TensorT<T>&);

ADMMPRUNE_INSTANTIATE_OMP(float)
ADMMPRUNE_INSTANTIATE_OMP(double)

}  // namespace admmprune::kernels::omp
