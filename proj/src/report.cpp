#include <cstdio>
#include <fstream>
#include <sstream>

#include "admmprune/report.hpp"

#include <stdexcept>

namespace admmprune {

std::string joined_pruned(const std::vector<int>& counts) {
    std::string out;
    for (size_t i = 0; i < counts.size(); ++i) out += (i ? "-" : "") + std::to_string(counts[i]);
    return out;
}

namespace {

std::string fmt(const char* spec, double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), spec, v);
    return buf;
}

}  // namespace

std::string format_row(const ReportRow& row) {
    // %g keeps small mus readable and prints the baseline's 0.0 as plain "0"
    std::string out = fmt("%.6g", row.mu);
    out += ", " + fmt("%.2f", row.accuracy_pct);
    out += ", " + joined_pruned(row.pruned_per_layer);
    out += ", " + fmt("%.2f", row.sparsity_pct);
    out += ", " + std::to_string(row.training_epochs);
    out += ", " + fmt("%.2f", row.speedup);
    return out;
}

std::string render_table(const std::vector<ReportRow>& rows) {
    std::string out = "mu, accuracy_pct, pruned_per_layer, sparsity_pct, training_epochs, speedup\n";
    for (const ReportRow& r : rows) out += format_row(r) + "\n";
    return out;
}

void export_csv(const std::vector<ReportRow>& rows, const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open " + path + " for writing");
    f << "mu,accuracy_pct,pruned_per_layer,sparsity_pct,training_epochs,speedup\n";
    for (const ReportRow& r : rows) {
        f << fmt("%.6g", r.mu) << ',' << fmt("%.2f", r.accuracy_pct) << ','
          << joined_pruned(r.pruned_per_layer) << ',' << fmt("%.2f", r.sparsity_pct) << ','
          << r.training_epochs << ',' << fmt("%.2f", r.speedup) << "\n";
    }
    if (!f) throw std::runtime_error("write failed: " + path);
}

std::vector<ReportRow> parse_csv(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot open " + path);
    std::vector<ReportRow> rows;
    std::string line;
    bool first = true;
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        if (first) {
            first = false;  // header
            continue;
        }
        std::istringstream is(line);
        std::string field;
        std::vector<std::string> fields;
        while (std::getline(is, field, ',')) fields.push_back(field);
        if (fields.size() != 6)
            throw std::runtime_error("csv: expected 6 fields, got " +
                                     std::to_string(fields.size()) + " in '" + line + "'");
        ReportRow r;
        r.mu = std::stod(fields[0]);
        r.accuracy_pct = std::stod(fields[1]);
        if (!fields[2].empty()) {
            std::istringstream ps(fields[2]);
            std::string part;
            while (std::getline(ps, part, '-')) r.pruned_per_layer.push_back(std::stoi(part));
        }
        r.sparsity_pct = std::stod(fields[3]);
        r.training_epochs = std::stoi(fields[4]);
        r.speedup = std::stod(fields[5]);
        rows.push_back(std::move(r));
    }
    return rows;
}

}  // namespace admmprune
