#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "admmprune/data.hpp"
#include "admmprune/network.hpp"
#include "admmprune/report.hpp"
#include "admmprune/sparsity.hpp"

namespace admmprune {

/// Thrown when training produces a non-finite loss or gradient. Carries the
/// last network state with finite parameters.
class DivergenceError : public std::runtime_error {
  public:
    DivergenceError(const std::string& what, Network last)
        : std::runtime_error(what), last_finite(std::move(last)) {}

    Network last_finite;
};

/// The regularization path and its training knobs. epsilon <= 0 means "scale
/// automatically": 1e-3 * sqrt(included weight count).
struct PathSchedule {
    std::vector<double> mus;  // ascending; empty = default log-spaced grid
    int delta = 1;            // epoch increment per mu index
    int nu = 15;              // index at which the epoch count saturates
    int xi = 10;              // max inner ADMM iterations per mu
    double epsilon = 0.0;     // residual threshold
    double lr = 0.001;
    int batch_size = 128;
};

void validate_schedule(const PathSchedule& s);

/// Epochs for the i-th mu (1-based): min(1 + delta*(i-1), delta*nu).
int epoch_schedule(int i, int delta, int nu);

/// Knobs that stay fixed across the path.
struct AdmmOptions {
    double rho = 1.0;
    double momentum = 0.0;
    GuardPolicy guard{};
    std::optional<std::vector<int>> include;  // layer filter; absent = all parameterized
    uint64_t seed = 1;
    Backend backend = Backend::parallel;
    int eval_batch = 256;
    std::string out_dir;          // when set, run_path writes checkpoints/masks/manifest
    std::string data_descriptor;  // recorded in the manifest for later recompute
};

/// The ADMM triple (W, F, Gamma) plus residual bookkeeping. F and Gamma are
/// aligned with net.params; an empty tensor marks a layer excluded from
/// sparsification.
struct AdmmState {
    Network net;
    std::vector<Tensor> f;
    std::vector<Tensor> gamma;
    double rho = 1.0;
    double mu = 0.0;
    int k = 0;                     // inner iterations completed at this mu
    double primal_residual = 0.0;  // ||W - F||_F over included slots
    double aux_change = 0.0;       // ||F_new - F_old||_F of the last iteration
    std::vector<std::pair<double, double>> residual_history;  // (primal, aux) per iteration
    int64_t epoch_serial = 0;      // batches get a fresh permutation per epoch ever run
};

/// Algorithm start state: F = W on the included layers, Gamma = 0.
AdmmState init_admm_state(const Network& baseline, const std::vector<int>& included, double rho);

/// Reset F = W, Gamma = 0 in place (entering a new mu).
void reset_aux(AdmmState& st);

double primal_residual_of(const AdmmState& st);

/// Eq. 7: `epochs` passes of mini-batch proximal SGD with U = F - Gamma/rho
/// held fixed. Only W moves. Throws DivergenceError on non-finite loss or
/// gradient, carrying the pre-step network.
void performance_step(AdmmState& st, const Dataset& train, int epochs, const PathSchedule& sch,
                      const AdmmOptions& opt);

/// Gamma <- Gamma + rho*(W - F), blockwise.
void dual_update(AdmmState& st);

/// One mu's inner loop: {performance_step; sparsity_step; dual_update} until
/// both residuals are <= epsilon or xi iterations. Returns (converged,
/// iterations run).
std::pair<bool, int> inner_admm(AdmmState& st, const Dataset& train, int epochs,
                                const PathSchedule& sch, PenaltyKind kind,
                                const AdmmOptions& opt);

/// apply_mask, then `epochs` of plain SGD (rho = 0) with pruned blocks frozen.
Network fine_tune(const Network& net, const Mask& mask, const Dataset& train, int epochs,
                  const PathSchedule& sch, const AdmmOptions& opt, int64_t& epoch_serial);

/// Default mu grid: 8 log-spaced values spanning [1e-3, 1] times
/// rho * median block norm of the baseline's included layers.
std::vector<double> default_mu_grid(const Network& baseline, const std::vector<int>& included,
                                    double rho);

double effective_epsilon(const PathSchedule& sch, const NetworkSpec& spec,
                         const std::vector<int>& included);

/// Full-batch mean loss, no gradients.
double full_batch_loss(const Network& net, const Dataset& ds, int eval_batch, Backend be);

/// Eq. 3 evaluated three ways at the current (W, F, Gamma): directly, via the
/// performance sub-problem's completed square, and via the sparsity
/// sub-problem's. All three agree up to float rounding.
struct LagrangianAudit {
    double direct = 0.0;
    double via_performance = 0.0;
    double via_sparsity = 0.0;
};

LagrangianAudit augmented_lagrangian_audit(const AdmmState& st, const Dataset& ds,
                                           PenaltyKind kind, const AdmmOptions& opt);

struct ManifestEntry {
    ReportRow row;
    std::string checkpoint;  // path relative to the manifest
    std::string mask;        // empty for the baseline row
    int iterations = 0;
    bool converged = true;
};

struct RunManifest {
    uint64_t seed = 0;
    std::string penalty;  // "l0" / "l1"
    double rho = 1.0;
    double epsilon = 0.0;  // resolved value actually used
    int delta = 1, nu = 15, xi = 10;
    double lr = 0.001;
    int batch_size = 128;
    double momentum = 0.0;
    std::vector<int> include;  // resolved included layer indices
    std::string data_descriptor;
    std::vector<ManifestEntry> entries;
};

void write_manifest(const RunManifest& m, const std::string& path);
RunManifest read_manifest(const std::string& path);

struct PathResult {
    std::vector<ReportRow> rows;  // baseline row first
    std::vector<Network> nets;    // aligned with rows
    std::vector<Mask> masks;      // baseline entry is empty
    std::vector<int> iterations;  // inner iterations per row (0 for baseline)
    RunManifest manifest;
    bool aborted = false;
    std::string abort_reason;
};

/// Algorithm 1: sweep the mu path in ascending order, warm-starting each mu
/// from the previous fine-tuned result (F reset to W, Gamma to 0), fine-tune
/// with the identified mask, and report. A mu that diverges aborts the path;
/// rows finished so far are returned with the abort noted.
PathResult run_path(const Network& baseline, const Dataset& train, const Dataset& test,
                    const PathSchedule& schedule, PenaltyKind kind, const AdmmOptions& opt);

}  // namespace admmprune
