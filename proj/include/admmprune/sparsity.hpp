#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "admmprune/network.hpp"

namespace admmprune {

/// Which group penalty drives the sparsity step, with its prox threshold:
/// a = mu/rho for group-l1 (soft), b = sqrt(2*mu/rho) for group-l0 (hard).
enum class PenaltyKind { group_l1, group_l0 };

const char* penalty_name(PenaltyKind k);
PenaltyKind parse_penalty(const std::string& s);  // accepts "l1" / "l0"
double penalty_threshold(PenaltyKind kind, double mu, double rho);

/// Contiguous slice of a layer's weight tensor occupied by one block.
struct BlockSpan {
    int64_t offset = 0;
    int64_t len = 0;
};

BlockSpan block_span(const NetworkSpec& spec, const BlockId& id);

/// Parameterized layer indices selected by the include filter (all of them
/// when the filter is absent). Throws if the filter names a layer without
/// parameters or out of range.
std::vector<int> included_layers(const NetworkSpec& spec,
                                 const std::optional<std::vector<int>>& include);

/// Every sparsity block of the included layers: m*n filter blocks per conv
/// layer, n row blocks per fully connected layer.
std::vector<BlockId> partition_blocks(const NetworkSpec& spec,
                                      const std::optional<std::vector<int>>& include = std::nullopt);

/// Read-only view of one block's values with its cached Frobenius norm.
template <typename T>
struct BlockViewT {
    BlockId id;
    const T* values = nullptr;
    int64_t len = 0;
    double frobenius_norm = 0.0;
};

using BlockView = BlockViewT<float>;

/// Views over all blocks of one layer in a weight-shaped tensor.
template <typename T>
std::vector<BlockViewT<T>> block_views(const NetworkSpec& spec, int layer,
                                       const TensorT<T>& weight_like);

/// group-l1: sum of block norms. group-l0: count of blocks with norm > 0.
template <typename T>
double penalty_value(const std::vector<BlockViewT<T>>& blocks, PenaltyKind kind);

/// Group soft threshold, in place: v <- (1 - a/||v||)*v if ||v|| > a, else 0.
/// Ties at the threshold are zeroed.
template <typename T>
void group_soft_threshold(T* v, int64_t n, double a);

/// Group hard threshold, in place: keep v iff ||v|| > b, else 0.
template <typename T>
void group_hard_threshold(T* v, int64_t n, double b);

/// Over-pruning guard: when more than trigger_fraction of a layer's blocks
/// come out zero, redo that layer's decisions against the mean block norm of
/// V instead of the penalty threshold.
struct GuardPolicy {
    bool enabled = true;
    double trigger_fraction = 0.5;
};

/// The sparsity-promoting step: per included slot (gamma non-empty), form
/// V = W + Gamma/rho, threshold each block by the penalty's rule, then apply
/// the guard per layer. Kept blocks under the guard keep V (group-l0) or are
/// shrunk by the original a (group-l1). Returns F aligned with net.params;
/// excluded slots stay empty.
template <typename T>
std::vector<TensorT<T>> sparsity_step(const NetworkT<T>& net, const std::vector<TensorT<T>>& gamma,
                                      double rho, double mu, PenaltyKind kind,
                                      const GuardPolicy& guard = {});

/// A block is pruned iff its F-block norm is exactly zero.
template <typename T>
Mask mask_from_aux(const NetworkSpec& spec, const std::vector<TensorT<T>>& f);

struct SparsityStats {
    std::vector<int> included;          // layer indices, ascending
    std::vector<int> pruned_per_layer;  // aligned with included
    int64_t pruned_weights = 0;
    int64_t total_weights = 0;  // weights of included layers
    double sparsity_pct = 0.0;
};

SparsityStats sparsity_stats(const Mask& mask, const NetworkSpec& spec,
                             const std::vector<int>& included);

/// Text export, one "layer,input_map,output_map" line per pruned block,
/// lines sorted lexicographically.
std::string mask_to_text(const Mask& mask);
Mask mask_from_text(const std::string& text);
void write_mask(const Mask& mask, const std::string& path);
Mask read_mask(const std::string& path);

}  // namespace admmprune
