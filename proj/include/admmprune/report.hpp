#pragma once

#include <string>
#include <vector>

namespace admmprune {

/// One results-table row: regularization weight, held-out accuracy, pruned
/// block count per included layer, overall weight sparsity, epochs spent at
/// this mu, and the dense/sparse MAC ratio.
struct ReportRow {
    double mu = 0.0;
    double accuracy_pct = 0.0;
    std::vector<int> pruned_per_layer;
    double sparsity_pct = 0.0;
    int training_epochs = 0;
    double speedup = 1.0;
};

/// Plain-text table, one header line then one row per entry. Columns:
/// mu, accuracy_pct, pruned_per_layer (dash-joined), sparsity_pct,
/// training_epochs, speedup. Accuracy/sparsity/speedup print with 2 decimals;
/// a baseline row (mu = 0, epochs 0) prints its mu as "0".
std::string render_table(const std::vector<ReportRow>& rows);

/// Same columns as the table, comma-separated, pruned counts dash-joined in
/// one field. parse_csv round-trips export_csv output at printed precision.
void export_csv(const std::vector<ReportRow>& rows, const std::string& path);
std::vector<ReportRow> parse_csv(const std::string& path);

std::string format_row(const ReportRow& row);
std::string joined_pruned(const std::vector<int>& counts);

/// Welch's unequal-variance t statistic with a two-sided p value from the
/// t distribution at Welch-Satterthwaite degrees of freedom. Each sample
/// needs at least 2 values and the pooled variance must be nonzero.
struct TTestResult {
    double t = 0.0;
    double p = 1.0;
    double dof = 0.0;
};

TTestResult welch_t_test(const std::vector<double>& sample_a, const std::vector<double>& sample_b);

/// Regularized incomplete beta function I_x(a, b) by Lentz's continued
/// fraction; the t-distribution CDF reduces to it.
double incomplete_beta(double a, double b, double x);

}  // namespace admmprune
