#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "admmprune/rng.hpp"
#include "admmprune/tensor.hpp"

namespace admmprune {

enum class LayerKind { conv2d, fully_connected, relu, max_pool, softmax_head };

const char* layer_kind_name(LayerKind k);

/// One layer of the sequential architecture. Only the fields of the matching
/// kind are meaningful; parse_arch / validate_spec fill in inferred ones
/// (conv in_maps, fc in_size) from the shape flow.
struct LayerSpec {
    LayerKind kind = LayerKind::relu;
    // conv2d
    int kh = 0, kw = 0;
    int in_maps = 0, out_maps = 0;
    int stride = 1;
    bool same_pad = true;
    // fully_connected
    int in_size = 0, out_size = 0;
    // max_pool
    int pool_win = 0, pool_stride = 0;
};

struct NetworkSpec {
    std::vector<LayerSpec> layers;
    int in_maps = 0, in_h = 0, in_w = 0;
    int classes = 0;
};

/// Identity of one sparsity block: conv filter (layer, input map, output map)
/// or, for fully connected layers, the incoming weight row of output unit j
/// (input_map fixed at 0).
struct BlockId {
    int layer = 0;
    int input_map = 0;
    int output_map = 0;
    auto operator<=>(const BlockId&) const = default;
};

/// Blocks whose weights are frozen at exactly zero.
struct Mask {
    std::set<BlockId> pruned;

    bool empty() const { return pruned.empty(); }
    bool contains(const BlockId& b) const { return pruned.count(b) > 0; }
};

template <typename T>
struct NetworkT {
    struct Param {
        int layer = 0;  // index into spec.layers
        TensorT<T> weight;
        TensorT<T> bias;
    };

    NetworkSpec spec;
    std::vector<Param> params;
    Mask mask;  // pruned blocks stay exactly zero through training
};

using Network = NetworkT<float>;

/// Kernel implementation used for forward/backward work. Both give
/// bit-identical results; serial exists as the comparison baseline.
enum class Backend { serial, parallel };

template <typename T>
struct GradsT {
    std::vector<TensorT<T>> weight;  // aligned with net.params
    std::vector<TensorT<T>> bias;
};

using Grads = GradsT<float>;

/// Momentum accumulators, aligned with net.params. Zero-initialized on first
/// use; feed the same object across consecutive steps.
template <typename T>
struct SgdStateT {
    std::vector<TensorT<T>> vel_w;
    std::vector<TensorT<T>> vel_b;
};

using SgdState = SgdStateT<float>;

/// Parse a comma-separated architecture string, e.g.
///   "conv:3x3x8,relu,pool:2,conv:3x3x16,relu,pool:2,fc:2,softmax"
/// Conv options append ":sN" for stride and ":valid" for valid padding;
/// pool takes ":sN" for a stride different from the window. Input-side
/// dimensions (conv in_maps, fc in_size) are inferred from the shape flow
/// starting at (in_maps, in_h, in_w).
NetworkSpec parse_arch(const std::string& text, int in_maps, int in_h, int in_w);

/// Walk the shape flow and check layer-to-layer compatibility. Throws with a
/// message naming the offending layer. Returns the final (classes) width.
int validate_spec(const NetworkSpec& spec);

/// Allocate parameter tensors (conv [n,m,kh,kw], fc [n,in], bias [n]) with
/// fan-in-scaled uniform weights and zero biases. Deterministic in rng.
template <typename T>
NetworkT<T> build_network(const NetworkSpec& spec, Pcg32& rng);

std::vector<int> weight_shape(const LayerSpec& l);
bool is_parameterized(LayerKind k);

/// Index into net.params for a spec layer, or -1 if it has no parameters.
int param_index(const NetworkSpec& spec, int layer);

/// Total weight count (biases excluded) of all parameterized layers.
int64_t total_weight_count(const NetworkSpec& spec);

/// Pre-softmax logits [batch, classes].
template <typename T>
TensorT<T> forward(const NetworkT<T>& net, const TensorT<T>& batch,
                   Backend backend = Backend::parallel);

/// Mean softmax cross-entropy and its gradients. Gradients of pruned blocks
/// are zeroed so masked weights never move. Throws on out-of-range labels.
template <typename T>
double loss_and_grad(const NetworkT<T>& net, const TensorT<T>& batch,
                     const std::vector<int>& labels, GradsT<T>& grads,
                     Backend backend = Backend::parallel);

/// Proximal SGD update: w <- w - lr*(g + rho*(w - u)) on layers with a U
/// target (empty tensor in `u` means no proximal term for that slot); biases
/// take a plain SGD step. Throws before touching anything if a gradient is
/// non-finite.
template <typename T>
void sgd_prox_step(NetworkT<T>& net, const GradsT<T>& grads, const std::vector<TensorT<T>>& u,
                   double rho, double lr);

/// Same with classical momentum (velocity = momentum*velocity + step dir).
template <typename T>
void sgd_prox_step(NetworkT<T>& net, const GradsT<T>& grads, const std::vector<TensorT<T>>& u,
                   double rho, double lr, double momentum, SgdStateT<T>& state);

/// Copy of net with the mask's blocks zeroed and the mask installed, so later
/// gradient steps keep them at exactly zero. Throws on out-of-range BlockIds.
template <typename T>
NetworkT<T> apply_mask(const NetworkT<T>& net, const Mask& mask);

/// Multiply-accumulate counts at the given input shape: dense counts every
/// parameterized layer in full, sparse skips pruned blocks.
std::pair<int64_t, int64_t> mac_counts(const NetworkSpec& spec, int in_maps, int in_h, int in_w,
                                       const Mask& mask);

/// Argmax class per sample, evaluated in chunks of eval_batch. Ties pick the
/// lowest class index.
template <typename T>
std::vector<int> predict(const NetworkT<T>& net, const TensorT<T>& images, int eval_batch = 256,
                         Backend backend = Backend::parallel);

/// Top-1 accuracy in percent.
template <typename T>
double evaluate_accuracy(const NetworkT<T>& net, const TensorT<T>& images,
                         const std::vector<int>& labels, int eval_batch = 256,
                         Backend backend = Backend::parallel);

}  // namespace admmprune
