#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "admmprune/tensor.hpp"

namespace admmprune {

/// Labeled image set. Pixels live in [0,1]; images are [count, maps, h, w].
struct Dataset {
    Tensor images;
    std::vector<int> labels;
    int class_count = 0;
    std::string split;  // "train" / "test" / "synth" tag, informational

    int count() const { return images.ndim() == 4 ? images.dim(0) : 0; }
};

/// Deterministic synthetic classification set: each class is a fixed oriented
/// bar template (independent of the seed) plus Gaussian pixel noise, clipped
/// to [0,1]. Labels cycle 0..classes-1 so the set is balanced.
Dataset synth_generate(uint64_t seed, int count, int h, int w, int classes, double noise_sd);

/// Classic big-endian IDX pair: images magic 0x00000803 ([count,h,w] unsigned
/// bytes, scaled by 1/255), labels magic 0x00000801.
Dataset load_idx(const std::string& images_path, const std::string& labels_path);
void write_idx(const Dataset& ds, const std::string& images_path, const std::string& labels_path);

/// One sample per row: label first, then maps*h*w pixel values in [0,1].
Dataset load_csv(const std::string& path, int maps, int h, int w);

/// Shuffle with the seed, then cut: first train_count samples become the
/// train split, the rest the test split.
std::pair<Dataset, Dataset> split_dataset(const Dataset& ds, int train_count, uint64_t seed);

/// Fisher-Yates permutation of [0, count), deterministic per (seed, epoch).
std::vector<int> epoch_permutation(int count, uint64_t seed, int64_t epoch);

/// Mini-batches of one epoch in permuted order; the final batch may be short.
class BatchIter {
  public:
    BatchIter(const Dataset& ds, int batch_size, uint64_t seed, int64_t epoch);

    /// Fills the next batch; false once the epoch is exhausted.
    bool next(Tensor& images, std::vector<int>& labels);

  private:
    const Dataset& ds_;
    std::vector<int> order_;
    int batch_size_ = 0;
    size_t pos_ = 0;
};

}  // namespace admmprune
