#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "admmprune/admm.hpp"
#include "admmprune/checkpoint.hpp"
#include "admmprune/kernels.hpp"

namespace admmprune {

void validate_schedule(const PathSchedule& s) {
    for (size_t i = 1; i < s.mus.size(); ++i)
        if (!(s.mus[i] > s.mus[i - 1]))
            throw std::runtime_error("schedule: mus must be strictly increasing");
    if (!s.mus.empty() && s.mus.front() < 0.0)
        throw std::runtime_error("schedule: mus must be non-negative");
    if (s.delta < 1) throw std::runtime_error("schedule: delta must be >= 1");
    if (s.nu < 1) throw std::runtime_error("schedule: nu must be >= 1");
    if (s.xi < 1) throw std::runtime_error("schedule: xi must be >= 1");
    if (!(s.lr > 0.0)) throw std::runtime_error("schedule: lr must be positive");
    if (s.batch_size < 1) throw std::runtime_error("schedule: batch_size must be >= 1");
}

int epoch_schedule(int i, int delta, int nu) {
    if (i < 1) throw std::runtime_error("epoch_schedule: index is 1-based");
    if (delta < 1 || nu < 1) throw std::runtime_error("epoch_schedule: delta and nu must be >= 1");
    return std::min(1 + delta * (i - 1), delta * nu);
}

AdmmState init_admm_state(const Network& baseline, const std::vector<int>& included, double rho) {
    if (rho <= 0.0) throw std::runtime_error("init_admm_state: rho must be positive");
    AdmmState st;
    st.net = baseline;
    st.rho = rho;
    st.f.resize(baseline.params.size());
    st.gamma.resize(baseline.params.size());
    for (size_t s = 0; s < baseline.params.size(); ++s) {
        if (std::find(included.begin(), included.end(), baseline.params[s].layer) ==
            included.end())
            continue;
        st.f[s] = baseline.params[s].weight;
        st.gamma[s] = zeros_like(baseline.params[s].weight);
    }
    return st;
}

void reset_aux(AdmmState& st) {
    for (size_t s = 0; s < st.f.size(); ++s) {
        if (st.f[s].numel() == 0) continue;
        st.f[s] = st.net.params[s].weight;
        st.gamma[s].fill(0.0f);
    }
    st.k = 0;
    st.primal_residual = 0.0;
    st.aux_change = 0.0;
    st.residual_history.clear();
}

namespace {

std::vector<int> state_included(const AdmmState& st) {
    std::vector<int> out;
    for (size_t s = 0; s < st.f.size(); ++s)
        if (st.f[s].numel() > 0) out.push_back(st.net.params[s].layer);
    return out;
}

double slots_distance(const std::vector<Tensor>& a, const std::vector<Tensor>& b) {
    double sq = 0.0;
    for (size_t s = 0; s < a.size(); ++s) {
        if (a[s].numel() == 0) continue;
        double d = frob_dist(a[s], b[s]);
        sq += d * d;
    }
    return std::sqrt(sq);
}

bool params_finite(const Network& net) {
    for (const auto& p : net.params)
        if (!all_finite(p.weight) || !all_finite(p.bias)) return false;
    return true;
}

bool grads_finite(const Grads& g) {
    for (const auto& t : g.weight)
        if (!all_finite(t)) return false;
    for (const auto& t : g.bias)
        if (!all_finite(t)) return false;
    return true;
}

/// Shared mini-batch training loop for the performance step (prox on) and
/// fine-tuning (rho = 0, u empty).
void train_epochs(Network& net, const std::vector<Tensor>& u, double rho, const Dataset& train,
                  int epochs, const PathSchedule& sch, const AdmmOptions& opt,
                  int64_t& epoch_serial) {
    Network last_good = net;
    SgdState sgd;
    Grads grads;
    Tensor images;
    std::vector<int> labels;
    for (int e = 0; e < epochs; ++e) {
        BatchIter it(train, sch.batch_size, opt.seed, epoch_serial++);
        while (it.next(images, labels)) {
            double loss = loss_and_grad(net, images, labels, grads, opt.backend);
            if (!std::isfinite(loss)) {
                if (params_finite(net)) last_good = net;
                throw DivergenceError("training diverged: non-finite loss", std::move(last_good));
            }
            if (!grads_finite(grads)) {
                if (params_finite(net)) last_good = net;
                throw DivergenceError("training diverged: non-finite gradient",
                                      std::move(last_good));
            }
            sgd_prox_step(net, grads, u, rho, sch.lr, opt.momentum, sgd);
            if (params_finite(net)) last_good = net;
        }
    }
}

}  // namespace

double primal_residual_of(const AdmmState& st) {
    double sq = 0.0;
    for (size_t s = 0; s < st.f.size(); ++s) {
        if (st.f[s].numel() == 0) continue;
        double d = frob_dist(st.net.params[s].weight, st.f[s]);
        sq += d * d;
    }
    return std::sqrt(sq);
}

void performance_step(AdmmState& st, const Dataset& train, int epochs, const PathSchedule& sch,
                      const AdmmOptions& opt) {
    if (epochs < 1) throw std::runtime_error("performance_step: epochs must be >= 1");
    // U = F - Gamma/rho, fixed for the whole step
    std::vector<Tensor> u(st.f.size());
    for (size_t s = 0; s < st.f.size(); ++s) {
        if (st.f[s].numel() == 0) continue;
        u[s] = Tensor(st.f[s].shape);
        for (int64_t i = 0; i < u[s].numel(); ++i)
            u[s][i] = static_cast<float>(static_cast<double>(st.f[s][i]) -
                                         static_cast<double>(st.gamma[s][i]) / st.rho);
    }
    train_epochs(st.net, u, st.rho, train, epochs, sch, opt, st.epoch_serial);
}

void dual_update(AdmmState& st) {
    for (size_t s = 0; s < st.f.size(); ++s) {
        if (st.f[s].numel() == 0) continue;
        const Tensor& w = st.net.params[s].weight;
        for (int64_t i = 0; i < w.numel(); ++i)
            st.gamma[s][i] = static_cast<float>(
                static_cast<double>(st.gamma[s][i]) +
                st.rho * (static_cast<double>(w[i]) - static_cast<double>(st.f[s][i])));
    }
}

std::pair<bool, int> inner_admm(AdmmState& st, const Dataset& train, int epochs,
                                const PathSchedule& sch, PenaltyKind kind,
                                const AdmmOptions& opt) {
    const double eps = effective_epsilon(sch, st.net.spec, state_included(st));
    st.residual_history.clear();
    for (int it = 1; it <= sch.xi; ++it) {
        performance_step(st, train, epochs, sch, opt);
        std::vector<Tensor> f_old = st.f;
        st.f = sparsity_step(st.net, st.gamma, st.rho, st.mu, kind, opt.guard);
        st.aux_change = slots_distance(f_old, st.f);
        dual_update(st);
        st.primal_residual = primal_residual_of(st);
        st.k = it;
        st.residual_history.emplace_back(st.primal_residual, st.aux_change);
        if (st.primal_residual <= eps && st.aux_change <= eps) return {true, it};
    }
    return {false, sch.xi};
}

Network fine_tune(const Network& net, const Mask& mask, const Dataset& train, int epochs,
                  const PathSchedule& sch, const AdmmOptions& opt, int64_t& epoch_serial) {
    Network tuned = apply_mask(net, mask);
    if (epochs == 0) return tuned;
    std::vector<Tensor> no_u(tuned.params.size());
    train_epochs(tuned, no_u, 0.0, train, epochs, sch, opt, epoch_serial);
    return tuned;
}

std::vector<double> default_mu_grid(const Network& baseline, const std::vector<int>& included,
                                    double rho) {
    std::vector<double> norms;
    for (int l : included) {
        int pi = param_index(baseline.spec, l);
        for (const auto& v : block_views(baseline.spec, l,
                                         baseline.params[static_cast<size_t>(pi)].weight))
            norms.push_back(v.frobenius_norm);
    }
    if (norms.empty()) throw std::runtime_error("default_mu_grid: no included blocks");
    std::sort(norms.begin(), norms.end());
    double median = norms[norms.size() / 2];
    double scale = rho * median;
    if (!(scale > 0.0))
        throw std::runtime_error("default_mu_grid: baseline block norms are all zero");
    std::vector<double> mus;
    for (int i = 0; i < 8; ++i) mus.push_back(scale * std::pow(10.0, -3.0 + 3.0 * i / 7.0));
    return mus;
}

double effective_epsilon(const PathSchedule& sch, const NetworkSpec& spec,
                         const std::vector<int>& included) {
    if (sch.epsilon > 0.0) return sch.epsilon;
    int64_t weights = 0;
    for (int l : included)
        weights += TensorT<float>::checked_numel(weight_shape(spec.layers.at(static_cast<size_t>(l))));
    if (weights == 0) throw std::runtime_error("effective_epsilon: no included weights");
    return 1e-3 * std::sqrt(static_cast<double>(weights));
}

double full_batch_loss(const Network& net, const Dataset& ds, int eval_batch, Backend be) {
    const int count = ds.count();
    if (count == 0) throw std::runtime_error("full_batch_loss: empty dataset");
    const int64_t per = ds.images.numel() / count;
    double weighted = 0.0;
    for (int i0 = 0; i0 < count; i0 += eval_batch) {
        int n = std::min(eval_batch, count - i0);
        Tensor chunk({n, ds.images.dim(1), ds.images.dim(2), ds.images.dim(3)});
        std::copy(ds.images.data.begin() + i0 * per, ds.images.data.begin() + (i0 + n) * per,
                  chunk.data.begin());
        std::vector<int> labels(ds.labels.begin() + i0, ds.labels.begin() + i0 + n);
        Tensor logits = forward(net, chunk, be);
        Tensor dlogits;
        weighted += kernels::ref::softmax_xent(logits, std::span<const int>(labels), dlogits) * n;
    }
    return weighted / count;
}

LagrangianAudit augmented_lagrangian_audit(const AdmmState& st, const Dataset& ds,
                                           PenaltyKind kind, const AdmmOptions& opt) {
    double loss = full_batch_loss(st.net, ds, opt.eval_batch, opt.backend);

    double fpen = 0.0;    // f(F), the block penalty
    double tr = 0.0;      // sum <Gamma, W - F>
    double quad = 0.0;    // sum ||W - F||^2
    double perf_q = 0.0;  // sum ||W - U||^2 with U = F - Gamma/rho
    double spar_q = 0.0;  // sum ||F - V||^2 with V = W + Gamma/rho
    double gsq = 0.0;     // sum ||Gamma||^2
    for (size_t s = 0; s < st.f.size(); ++s) {
        if (st.f[s].numel() == 0) continue;
        int layer = st.net.params[s].layer;
        fpen += penalty_value(block_views(st.net.spec, layer, st.f[s]), kind);
        const Tensor& w = st.net.params[s].weight;
        for (int64_t i = 0; i < w.numel(); ++i) {
            double wi = w[i], fi = st.f[s][i], gi = st.gamma[s][i];
            tr += gi * (wi - fi);
            quad += (wi - fi) * (wi - fi);
            double du = wi - (fi - gi / st.rho);
            perf_q += du * du;
            double dv = fi - (wi + gi / st.rho);
            spar_q += dv * dv;
            gsq += gi * gi;
        }
    }
    LagrangianAudit a;
    a.direct = loss + st.mu * fpen + tr + st.rho / 2.0 * quad;
    a.via_performance = loss + st.rho / 2.0 * perf_q + st.mu * fpen - gsq / (2.0 * st.rho);
    a.via_sparsity = loss + (st.mu * fpen + st.rho / 2.0 * spar_q) - gsq / (2.0 * st.rho);
    return a;
}

namespace {

std::string fmt_g(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

void emit(std::ostream& os, const std::string& key, const std::string& value) {
    os << key << ": " << value << "\n";
}

}  // namespace

void write_manifest(const RunManifest& m, const std::string& path) {
    std::ostringstream os;
    emit(os, "seed", std::to_string(m.seed));
    emit(os, "penalty", m.penalty);
    emit(os, "rho", fmt_g(m.rho));
    emit(os, "epsilon", fmt_g(m.epsilon));
    emit(os, "delta", std::to_string(m.delta));
    emit(os, "nu", std::to_string(m.nu));
    emit(os, "xi", std::to_string(m.xi));
    emit(os, "lr", fmt_g(m.lr));
    emit(os, "batch_size", std::to_string(m.batch_size));
    emit(os, "momentum", fmt_g(m.momentum));
    std::string inc;
    for (size_t i = 0; i < m.include.size(); ++i)
        inc += (i ? " " : "") + std::to_string(m.include[i]);
    emit(os, "include", inc);
    emit(os, "data", m.data_descriptor);
    emit(os, "rows", std::to_string(m.entries.size()));
    for (size_t i = 0; i < m.entries.size(); ++i) {
        const ManifestEntry& e = m.entries[i];
        std::string p = "row." + std::to_string(i) + ".";
        emit(os, p + "mu", fmt_g(e.row.mu));
        emit(os, p + "accuracy", fmt_g(e.row.accuracy_pct));
        emit(os, p + "pruned", joined_pruned(e.row.pruned_per_layer));
        emit(os, p + "sparsity", fmt_g(e.row.sparsity_pct));
        emit(os, p + "epochs", std::to_string(e.row.training_epochs));
        emit(os, p + "speedup", fmt_g(e.row.speedup));
        emit(os, p + "checkpoint", e.checkpoint);
        emit(os, p + "mask", e.mask);
        emit(os, p + "iterations", std::to_string(e.iterations));
        emit(os, p + "converged", e.converged ? "1" : "0");
    }
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open " + path + " for writing");
    f << os.str();
    if (!f) throw std::runtime_error("write failed: " + path);
}

namespace {

std::vector<int> parse_pruned(const std::string& s) {
    std::vector<int> out;
    if (s.empty()) return out;
    std::istringstream is(s);
    std::string part;
    while (std::getline(is, part, '-')) out.push_back(std::stoi(part));
    return out;
}

}  // namespace

RunManifest read_manifest(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot open " + path);
    std::map<std::string, std::string> kv;
    std::string line;
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        size_t c = line.find(": ");
        if (c == std::string::npos) throw std::runtime_error("manifest: bad line '" + line + "'");
        kv[line.substr(0, c)] = line.substr(c + 2);
    }
    auto need = [&](const std::string& k) -> const std::string& {
        auto it = kv.find(k);
        if (it == kv.end()) throw std::runtime_error("manifest: missing key '" + k + "'");
        return it->second;
    };
    RunManifest m;
    m.seed = std::stoull(need("seed"));
    m.penalty = need("penalty");
    m.rho = std::stod(need("rho"));
    m.epsilon = std::stod(need("epsilon"));
    m.delta = std::stoi(need("delta"));
    m.nu = std::stoi(need("nu"));
    m.xi = std::stoi(need("xi"));
    m.lr = std::stod(need("lr"));
    m.batch_size = std::stoi(need("batch_size"));
    m.momentum = std::stod(need("momentum"));
    {
        std::istringstream is(need("include"));
        int v;
        while (is >> v) m.include.push_back(v);
    }
    m.data_descriptor = need("data");
    int rows = std::stoi(need("rows"));
    for (int i = 0; i < rows; ++i) {
        std::string p = "row." + std::to_string(i) + ".";
        ManifestEntry e;
        e.row.mu = std::stod(need(p + "mu"));
        e.row.accuracy_pct = std::stod(need(p + "accuracy"));
        e.row.pruned_per_layer = parse_pruned(need(p + "pruned"));
        e.row.sparsity_pct = std::stod(need(p + "sparsity"));
        e.row.training_epochs = std::stoi(need(p + "epochs"));
        e.row.speedup = std::stod(need(p + "speedup"));
        e.checkpoint = need(p + "checkpoint");
        e.mask = need(p + "mask");
        e.iterations = std::stoi(need(p + "iterations"));
        e.converged = need(p + "converged") == "1";
        m.entries.push_back(std::move(e));
    }
    return m;
}

PathResult run_path(const Network& baseline, const Dataset& train, const Dataset& test,
                    const PathSchedule& schedule, PenaltyKind kind, const AdmmOptions& opt) {
    validate_schedule(schedule);
    const NetworkSpec& spec = baseline.spec;
    std::vector<int> included = included_layers(spec, opt.include);

    PathSchedule sch = schedule;
    if (sch.mus.empty()) sch.mus = default_mu_grid(baseline, included, opt.rho);
    validate_schedule(sch);

    PathResult res;
    res.manifest.seed = opt.seed;
    res.manifest.penalty = penalty_name(kind);
    res.manifest.rho = opt.rho;
    res.manifest.epsilon = effective_epsilon(sch, spec, included);
    res.manifest.delta = sch.delta;
    res.manifest.nu = sch.nu;
    res.manifest.xi = sch.xi;
    res.manifest.lr = sch.lr;
    res.manifest.batch_size = sch.batch_size;
    res.manifest.momentum = opt.momentum;
    res.manifest.include = included;
    res.manifest.data_descriptor = opt.data_descriptor;

    const bool emit_artifacts = !opt.out_dir.empty();
    if (emit_artifacts) std::filesystem::create_directories(opt.out_dir);
    auto artifact = [&](const std::string& rel) { return opt.out_dir + "/" + rel; };

    // baseline row: the warm-start network, nothing pruned
    {
        ReportRow row;
        row.mu = 0.0;
        row.accuracy_pct =
            evaluate_accuracy(baseline, test.images, test.labels, opt.eval_batch, opt.backend);
        row.pruned_per_layer.assign(included.size(), 0);
        row.sparsity_pct = 0.0;
        row.training_epochs = 0;
        row.speedup = 1.0;
        ManifestEntry me;
        me.row = row;
        me.checkpoint = "baseline.ckpt";
        if (emit_artifacts) save_checkpoint(baseline, artifact(me.checkpoint));
        res.rows.push_back(row);
        res.nets.push_back(baseline);
        res.masks.push_back({});
        res.iterations.push_back(0);
        res.manifest.entries.push_back(std::move(me));
    }

    AdmmState st = init_admm_state(baseline, included, opt.rho);
    for (size_t idx = 0; idx < sch.mus.size(); ++idx) {
        st.mu = sch.mus[idx];
        int epochs = epoch_schedule(static_cast<int>(idx) + 1, sch.delta, sch.nu);

        Network tuned;
        Mask mask;
        bool converged = false;
        int iters = 0;
        try {
            auto [c, it] = inner_admm(st, train, epochs, sch, kind, opt);
            converged = c;
            iters = it;
            mask = mask_from_aux(spec, st.f);
            tuned = fine_tune(st.net, mask, train, epochs, sch, opt, st.epoch_serial);
        } catch (const DivergenceError& e) {
            res.aborted = true;
            res.abort_reason = "mu=" + fmt_g(st.mu) + ": " + e.what();
            break;
        }

        // hand off to the next mu: fine-tuned weights, F = W, Gamma = 0
        st.net = tuned;
        st.net.mask = Mask{};  // structure is re-identified at the next mu
        reset_aux(st);

        SparsityStats stats = sparsity_stats(mask, spec, included);
        auto [dense, sparse] = mac_counts(spec, spec.in_maps, spec.in_h, spec.in_w, mask);

        ReportRow row;
        row.mu = sch.mus[idx];
        row.accuracy_pct =
            evaluate_accuracy(tuned, test.images, test.labels, opt.eval_batch, opt.backend);
        row.pruned_per_layer = stats.pruned_per_layer;
        row.sparsity_pct = stats.sparsity_pct;
        row.training_epochs = epochs * (iters + 1);
        row.speedup = sparse > 0 ? static_cast<double>(dense) / static_cast<double>(sparse)
                                 : std::numeric_limits<double>::infinity();

        char tag[32];
        std::snprintf(tag, sizeof(tag), "mu_%02d", static_cast<int>(idx) + 1);
        ManifestEntry me;
        me.row = row;
        me.checkpoint = std::string(tag) + ".ckpt";
        me.mask = std::string(tag) + ".mask";
        me.iterations = iters;
        me.converged = converged;
        if (emit_artifacts) {
            save_checkpoint(tuned, artifact(me.checkpoint));
            write_mask(mask, artifact(me.mask));
        }
        res.rows.push_back(row);
        res.nets.push_back(std::move(tuned));
        res.masks.push_back(std::move(mask));
        res.iterations.push_back(iters);
        res.manifest.entries.push_back(std::move(me));
    }

    if (emit_artifacts) write_manifest(res.manifest, artifact("manifest.txt"));
    return res;
}

}  // namespace admmprune
