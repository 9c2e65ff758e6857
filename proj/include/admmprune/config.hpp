#pragma once

#include <map>
#include <string>
#include <utility>

#include "admmprune/admm.hpp"
#include "admmprune/data.hpp"

namespace admmprune {

/// Where a run's data comes from. synth is self-contained; idx and csv read
/// files. When no explicit test files are given, train_count samples (after a
/// seeded shuffle) become the train split and the rest the test split.
struct DataConfig {
    std::string kind = "synth";  // synth | idx | csv
    // synth
    int count = 2000;
    int classes = 2;
    double noise_sd = 0.15;
    uint64_t data_seed = 42;  // dataset generation / split shuffle seed
    // idx
    std::string images, labels, test_images, test_labels;
    // csv
    std::string path, test_path;
    int train_count = 0;  // 0 = 80% of the loaded set
};

/// Everything a CLI run needs, parsed from a flat key = value file.
struct RunConfig {
    std::string arch;
    int in_maps = 1, in_h = 0, in_w = 0;
    DataConfig data;
    uint64_t seed = 1;
    int baseline_epochs = 3;
    PathSchedule schedule;
    PenaltyKind penalty = PenaltyKind::group_l1;
    AdmmOptions options;  // rho, momentum, guard, include, eval_batch, backend
};

/// Parse `key = value` lines; '#' starts a comment, blank lines are skipped.
/// Duplicate keys are an error.
std::map<std::string, std::string> parse_config_text(const std::string& text);

RunConfig config_from_map(const std::map<std::string, std::string>& kv);
RunConfig load_config(const std::string& path);

/// Materialize the configured train/test pair.
std::pair<Dataset, Dataset> load_datasets(const RunConfig& cfg);

/// One-line dataset summary recorded in run manifests.
std::string data_descriptor(const RunConfig& cfg);

}  // namespace admmprune
