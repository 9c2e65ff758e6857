#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "kernels_detail.hpp"

namespace admmprune::kernels {

ConvShape conv_output_shape(int in_h, int in_w, int kh, int kw, int stride, bool same_pad) {
    ConvShape s;
    if (same_pad) {
        s.out_h = (in_h + stride - 1) / stride;
        s.out_w = (in_w + stride - 1) / stride;
        int pad_h = std::max(0, (s.out_h - 1) * stride + kh - in_h);
        int pad_w = std::max(0, (s.out_w - 1) * stride + kw - in_w);
        s.pad_top = pad_h / 2;
        s.pad_left = pad_w / 2;
    } else {
        if (in_h < kh || in_w < kw)
            throw std::invalid_argument("conv: input smaller than kernel under valid padding");
        s.out_h = (in_h - kh) / stride + 1;
        s.out_w = (in_w - kw) / stride + 1;
    }
    return s;
}

namespace ref {

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
    for (int b = 0; b < B; ++b)
        for (int j = 0; j < N; ++j)
            for (int y = 0; y < cs.out_h; ++y)
                for (int x = 0; x < cs.out_w; ++x)
                    op[((int64_t(b) * N + j) * cs.out_h + y) * cs.out_w + x] =
                        detail::conv2d_forward_one(ip, wp, bias[j], M, H, W, kh, kw, stride, cs,
                                                   b, j, y, x);
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
    for (int b = 0; b < B; ++b)
        for (int i = 0; i < M; ++i)
            for (int iy = 0; iy < in_h; ++iy)
                for (int ix = 0; ix < in_w; ++ix)
                    ginp[((int64_t(b) * M + i) * in_h + iy) * in_w + ix] =
                        detail::conv2d_backward_data_one(gp, wp, N, M, kh, kw, stride, cs,
                                                         b, i, iy, ix);
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
    for (int c = 0; c < nchunks; ++c) {
        int b0 = c * kGradChunk;
        int b1 = std::min(B, b0 + kGradChunk);
        detail::conv2d_accumulate_chunk(gout, in, kh, kw, stride, cs, b0, b1,
                                        gw_c[c].data(), gb_c[c].data());
    }
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
    for (int64_t i = 0; i < in.numel(); ++i) out[i] = in[i] > T{} ? in[i] : T{};
}

template <typename T>
void relu_backward(const TensorT<T>& gout, const TensorT<T>& out, TensorT<T>& gin) {
    gin = TensorT<T>(gout.shape);
    for (int64_t i = 0; i < gout.numel(); ++i) gin[i] = out[i] > T{} ? gout[i] : T{};
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

    for (int64_t plane = 0; plane < int64_t(B) * M; ++plane)
        detail::maxpool_forward_plane(in.ptr(), out.ptr(), argmax.data(), H, W, Ho, Wo,
                                      win, stride, plane);
}

template <typename T>
void maxpool_backward(const TensorT<T>& gout, const std::vector<int32_t>& argmax, TensorT<T>& gin) {
    gin.fill(T{});
    const T* gp = gout.ptr();
    T* ginp = gin.ptr();
    for (int64_t o = 0; o < gout.numel(); ++o) ginp[argmax[static_cast<size_t>(o)]] += gp[o];
}

template <typename T>
double softmax_xent(const TensorT<T>& logits, std::span<const int> labels, TensorT<T>& dlogits) {
    const int B = logits.dim(0), C = logits.dim(1);
    dlogits = TensorT<T>({B, C});
    double loss_sum = 0.0;
    for (int b = 0; b < B; ++b) {
        const T* row = logits.ptr() + int64_t(b) * C;
        double m = row[0];
        for (int c = 1; c < C; ++c) m = std::max(m, static_cast<double>(row[c]));
        double z = 0.0;
        for (int c = 0; c < C; ++c) z += std::exp(static_cast<double>(row[c]) - m);
        int lbl = labels[static_cast<size_t>(b)];
        if (lbl < 0 || lbl >= C)
            throw std::invalid_argument("softmax_xent: label " + std::to_string(lbl) +
                                        " out of range for " + std::to_string(C) + " classes");
        loss_sum += std::log(z) - (static_cast<double>(row[lbl]) - m);
        for (int c = 0; c < C; ++c) {
            double p = std::exp(static_cast<double>(row[c]) - m) / z;
            dlogits[int64_t(b) * C + c] =
                static_cast<T>((p - (c == lbl ? 1.0 : 0.0)) / static_cast<double>(B));
        }
    }
    return loss_sum / B;
}

template <typename T>
void softmax_rows(const TensorT<T>& logits, TensorT<T>& probs) {
    const int B = logits.dim(0), C = logits.dim(1);
    probs = TensorT<T>({B, C});
    for (int b = 0; b < B; ++b) {
        const T* row = logits.ptr() + int64_t(b) * C;
        double m = row[0];
        for (int c = 1; c < C; ++c) m = std::max(m, static_cast<double>(row[c]));
        double z = 0.0;
        for (int c = 0; c < C; ++c) z += std::exp(static_cast<double>(row[c]) - m);
        for (int c = 0; c < C; ++c)
            probs[int64_t(b) * C + c] = static_cast<T>(std::exp(static_cast<double>(row[c]) - m) / z);
    }
}

#define ADMMPRUNE_INSTANTIATE_REF(T)                                                              \
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
                                      TensorT<T>&);                                               \
    template double softmax_xent<T>(const TensorT<T>&, std::span<const int>, TensorT<T>&);        \
    template void softmax_rows<T>(const TensorT<T>&, TensorT<T>&);

ADMMPRUNE_INSTANTIATE_REF(float)
ADMMPRUNE_INSTANTIATE_REF(double)

}  // namespace ref
}  // namespace admmprune::kernels
