#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "admmprune/tensor.hpp"

namespace admmprune::kernels {

/// Output geometry of a 2-D convolution or pooling window.
struct ConvShape {
    int out_h = 0, out_w = 0;
    int pad_top = 0, pad_left = 0;
};

/// "same" keeps out = ceil(in / stride) with symmetric-as-possible zero
/// padding; "valid" slides the window inside the input only.
ConvShape conv_output_shape(int in_h, int in_w, int kh, int kw, int stride, bool same_pad);

/// Batch-gradient accumulation runs over fixed chunks of this many samples:
/// serial inside a chunk, chunks reduced in index order afterwards. The
/// parallel kernels distribute chunks over threads, so results are identical
/// to the serial reference for any thread count.
inline constexpr int kGradChunk = 8;

// Serial reference kernels. Straight loops, kept as the comparison oracle
// for the OpenMP implementations and for high-precision (double) runs.
namespace ref {

template <typename T>
void conv2d_forward(const TensorT<T>& in, const TensorT<T>& w, const TensorT<T>& bias,
                    int stride, bool same_pad, TensorT<T>& out);

template <typename T>
void conv2d_backward_data(const TensorT<T>& gout, const TensorT<T>& w, int in_h, int in_w,
                          int stride, bool same_pad, TensorT<T>& gin);

template <typename T>
void conv2d_backward_filter(const TensorT<T>& gout, const TensorT<T>& in, int kh, int kw,
                            int stride, bool same_pad, TensorT<T>& gw, TensorT<T>& gb);

template <typename T>
void fc_forward(const TensorT<T>& in, const TensorT<T>& w, const TensorT<T>& bias, TensorT<T>& out);

template <typename T>
void fc_backward_data(const TensorT<T>& gout, const TensorT<T>& w, TensorT<T>& gin);

template <typename T>
void fc_backward_filter(const TensorT<T>& gout, const TensorT<T>& in, TensorT<T>& gw, TensorT<T>& gb);

template <typename T>
void relu_forward(const TensorT<T>& in, TensorT<T>& out);

template <typename T>
void relu_backward(const TensorT<T>& gout, const TensorT<T>& out, TensorT<T>& gin);

template <typename T>
void maxpool_forward(const TensorT<T>& in, int win, int stride, TensorT<T>& out,
                     std::vector<int32_t>& argmax);

/// argmax holds absolute indices into the pooling input, so the caller must
/// pass gin already shaped like that input.
template <typename T>
void maxpool_backward(const TensorT<T>& gout, const std::vector<int32_t>& argmax, TensorT<T>& gin);

/// Mean softmax cross-entropy over the batch. Per-sample terms are computed
/// in double and summed in batch order; dlogits = (softmax - onehot) / B.
template <typename T>
double softmax_xent(const TensorT<T>& logits, std::span<const int> labels, TensorT<T>& dlogits);

/// Row-wise softmax probabilities (double accumulation, stable shift).
template <typename T>
void softmax_rows(const TensorT<T>& logits, TensorT<T>& probs);

}  // namespace ref

// OpenMP kernels. Same arithmetic per output element and the same chunked
// batch reduction as ref, so outputs are bit-identical; only the loop
// scheduling differs.
namespace omp {

template <typename T>
void conv2d_forward(const TensorT<T>& in, const TensorT<T>& w, const TensorT<T>& bias,
                    int stride, bool same_pad, TensorT<T>& out);

template <typename T>
void conv2d_backward_data(const TensorT<T>& gout, const TensorT<T>& w, int in_h, int in_w,
                          int stride, bool same_pad, TensorT<T>& gin);

template <typename T>
void conv2d_backward_filter(const TensorT<T>& gout, const TensorT<T>& in, int kh, int kw,
                            int stride, bool same_pad, TensorT<T>& gw, TensorT<T>& gb);

template <typename T>
void fc_forward(const TensorT<T>& in, const TensorT<T>& w, const TensorT<T>& bias, TensorT<T>& out);

template <typename T>
void fc_backward_data(const TensorT<T>& gout, const TensorT<T>& w, TensorT<T>& gin);

template <typename T>
void fc_backward_filter(const TensorT<T>& gout, const TensorT<T>& in, TensorT<T>& gw, TensorT<T>& gb);

template <typename T>
void relu_forward(const TensorT<T>& in, TensorT<T>& out);

template <typename T>
void relu_backward(const TensorT<T>& gout, const TensorT<T>& out, TensorT<T>& gin);

template <typename T>
void maxpool_forward(const TensorT<T>& in, int win, int stride, TensorT<T>& out,
                     std::vector<int32_t>& argmax);

template <typename T>
void maxpool_backward(const TensorT<T>& gout, const std::vector<int32_t>& argmax, TensorT<T>& gin);

}  // namespace omp

}  // namespace admmprune::kernels
