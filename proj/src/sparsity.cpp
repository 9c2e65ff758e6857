#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "admmprune/sparsity.hpp"

namespace admmprune {

const char* penalty_name(PenaltyKind k) {
    return k == PenaltyKind::group_l1 ? "l1" : "l0";
}

PenaltyKind parse_penalty(const std::string& s) {
    if (s == "l1") return PenaltyKind::group_l1;
    if (s == "l0") return PenaltyKind::group_l0;
    throw std::runtime_error("unknown penalty '" + s + "' (want l0 or l1)");
}

double penalty_threshold(PenaltyKind kind, double mu, double rho) {
    if (rho <= 0.0) throw std::runtime_error("penalty_threshold: rho must be positive");
    if (mu < 0.0) throw std::runtime_error("penalty_threshold: mu must be non-negative");
    return kind == PenaltyKind::group_l1 ? mu / rho : std::sqrt(2.0 * mu / rho);
}

BlockSpan block_span(const NetworkSpec& spec, const BlockId& id) {
    if (id.layer < 0 || id.layer >= static_cast<int>(spec.layers.size()))
        throw std::runtime_error("block (" + std::to_string(id.layer) + "," +
                                 std::to_string(id.input_map) + "," +
                                 std::to_string(id.output_map) + "): layer out of range");
    const LayerSpec& l = spec.layers[static_cast<size_t>(id.layer)];
    auto bad = [&](const char* what) {
        throw std::runtime_error("block (" + std::to_string(id.layer) + "," +
                                 std::to_string(id.input_map) + "," +
                                 std::to_string(id.output_map) + "): " + what);
    };
    if (l.kind == LayerKind::conv2d) {
        if (id.input_map < 0 || id.input_map >= l.in_maps) bad("input map out of range");
        if (id.output_map < 0 || id.output_map >= l.out_maps) bad("output map out of range");
        int64_t len = int64_t(l.kh) * l.kw;
        return {(int64_t(id.output_map) * l.in_maps + id.input_map) * len, len};
    }
    if (l.kind == LayerKind::fully_connected) {
        if (id.input_map != 0) bad("input map must be 0 for fully connected layers");
        if (id.output_map < 0 || id.output_map >= l.out_size) bad("output unit out of range");
        return {int64_t(id.output_map) * l.in_size, l.in_size};
    }
    bad("layer has no parameters");
    return {};  // unreachable
}

std::vector<int> included_layers(const NetworkSpec& spec,
                                 const std::optional<std::vector<int>>& include) {
    std::vector<int> out;
    if (!include) {
        for (int l = 0; l < static_cast<int>(spec.layers.size()); ++l)
            if (is_parameterized(spec.layers[static_cast<size_t>(l)].kind)) out.push_back(l);
        return out;
    }
    out = *include;
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    for (int l : out) {
        if (l < 0 || l >= static_cast<int>(spec.layers.size()))
            throw std::runtime_error("include filter: layer " + std::to_string(l) +
                                     " out of range");
        if (!is_parameterized(spec.layers[static_cast<size_t>(l)].kind))
            throw std::runtime_error(
                "include filter: layer " + std::to_string(l) + " (" +
                layer_kind_name(spec.layers[static_cast<size_t>(l)].kind) +
                ") has no parameters");
    }
    return out;
}

std::vector<BlockId> partition_blocks(const NetworkSpec& spec,
                                      const std::optional<std::vector<int>>& include) {
    std::vector<BlockId> out;
    for (int l : included_layers(spec, include)) {
        const LayerSpec& ls = spec.layers[static_cast<size_t>(l)];
        if (ls.kind == LayerKind::conv2d) {
            for (int i = 0; i < ls.in_maps; ++i)
                for (int j = 0; j < ls.out_maps; ++j) out.push_back({l, i, j});
        } else {
            for (int j = 0; j < ls.out_size; ++j) out.push_back({l, 0, j});
        }
    }
    return out;
}

template <typename T>
std::vector<BlockViewT<T>> block_views(const NetworkSpec& spec, int layer,
                                       const TensorT<T>& weight_like) {
    const LayerSpec& ls = spec.layers.at(static_cast<size_t>(layer));
    if (weight_like.shape != weight_shape(ls))
        throw std::runtime_error("block_views: tensor shape " + shape_str(weight_like.shape) +
                                 " does not match layer " + std::to_string(layer));
    std::vector<BlockViewT<T>> out;
    for (const BlockId& id : partition_blocks(spec, std::vector<int>{layer})) {
        BlockSpan sp = block_span(spec, id);
        BlockViewT<T> v;
        v.id = id;
        v.values = weight_like.ptr() + sp.offset;
        v.len = sp.len;
        v.frobenius_norm = frob_norm(v.values, v.len);
        out.push_back(v);
    }
    return out;
}

template <typename T>
double penalty_value(const std::vector<BlockViewT<T>>& blocks, PenaltyKind kind) {
    double s = 0.0;
    for (const auto& b : blocks) {
        if (kind == PenaltyKind::group_l1)
            s += b.frobenius_norm;
        else if (b.frobenius_norm > 0.0)
            s += 1.0;
    }
    return s;
}

template <typename T>
void group_soft_threshold(T* v, int64_t n, double a) {
    if (a < 0.0) throw std::runtime_error("group_soft_threshold: negative threshold");
    double nrm = frob_norm(v, n);
    if (nrm > a) {
        double scale = 1.0 - a / nrm;
        for (int64_t i = 0; i < n; ++i) v[i] = static_cast<T>(static_cast<double>(v[i]) * scale);
    } else {
        std::fill(v, v + n, T{});
    }
}

template <typename T>
void group_hard_threshold(T* v, int64_t n, double b) {
    if (b < 0.0) throw std::runtime_error("group_hard_threshold: negative threshold");
    if (!(frob_norm(v, n) > b)) std::fill(v, v + n, T{});
}

namespace {

/// Layer index of each param slot, in slot order.
std::vector<int> slot_layers(const NetworkSpec& spec) {
    std::vector<int> out;
    for (int l = 0; l < static_cast<int>(spec.layers.size()); ++l)
        if (is_parameterized(spec.layers[static_cast<size_t>(l)].kind)) out.push_back(l);
    return out;
}

template <typename T>
bool span_is_zero(const TensorT<T>& t, const BlockSpan& sp) {
    for (int64_t i = sp.offset; i < sp.offset + sp.len; ++i)
        if (t[i] != T{}) return false;
    return true;
}

}  // namespace

template <typename T>
std::vector<TensorT<T>> sparsity_step(const NetworkT<T>& net, const std::vector<TensorT<T>>& gamma,
                                      double rho, double mu, PenaltyKind kind,
                                      const GuardPolicy& guard) {
    if (rho <= 0.0) throw std::runtime_error("sparsity_step: rho must be positive");
    if (mu < 0.0) throw std::runtime_error("sparsity_step: mu must be non-negative");
    if (gamma.size() != net.params.size())
        throw std::runtime_error("sparsity_step: Gamma slot count mismatch");

    const double thr = penalty_threshold(kind, mu, rho);
    std::vector<TensorT<T>> f(net.params.size());
    for (size_t s = 0; s < net.params.size(); ++s) {
        if (gamma[s].numel() == 0) continue;  // layer not included
        const TensorT<T>& w = net.params[s].weight;
        if (!gamma[s].same_shape(w))
            throw std::runtime_error("sparsity_step: Gamma shape mismatch at param " +
                                     std::to_string(s));

        // V = W + Gamma/rho
        TensorT<T> v(w.shape);
        for (int64_t i = 0; i < w.numel(); ++i)
            v[i] = static_cast<T>(static_cast<double>(w[i]) +
                                  static_cast<double>(gamma[s][i]) / rho);

        int layer = net.params[s].layer;
        std::vector<BlockViewT<T>> views = block_views(net.spec, layer, v);

        TensorT<T> fs = v;
        int zeroed = 0;
        for (const auto& bv : views) {
            BlockSpan sp = block_span(net.spec, bv.id);
            T* p = fs.ptr() + sp.offset;
            if (kind == PenaltyKind::group_l1)
                group_soft_threshold(p, sp.len, thr);
            else
                group_hard_threshold(p, sp.len, thr);
            if (span_is_zero(fs, sp)) ++zeroed;
        }

        if (guard.enabled && !views.empty() &&
            static_cast<double>(zeroed) / static_cast<double>(views.size()) >
                guard.trigger_fraction) {
            // over-pruning guard: redo this layer against the mean block norm
            double mean = 0.0;
            for (const auto& bv : views) mean += bv.frobenius_norm;
            mean /= static_cast<double>(views.size());
            for (const auto& bv : views) {
                BlockSpan sp = block_span(net.spec, bv.id);
                T* p = fs.ptr() + sp.offset;
                if (bv.frobenius_norm > mean) {
                    std::copy(v.ptr() + sp.offset, v.ptr() + sp.offset + sp.len, p);
                    if (kind == PenaltyKind::group_l1) group_soft_threshold(p, sp.len, thr);
                } else {
                    std::fill(p, p + sp.len, T{});
                }
            }
        }
        f[s] = std::move(fs);
    }
    return f;
}

template <typename T>
Mask mask_from_aux(const NetworkSpec& spec, const std::vector<TensorT<T>>& f) {
    std::vector<int> layers = slot_layers(spec);
    if (f.size() != layers.size())
        throw std::runtime_error("mask_from_aux: slot count does not match spec");
    Mask mask;
    for (size_t s = 0; s < f.size(); ++s) {
        if (f[s].numel() == 0) continue;
        for (const BlockId& id : partition_blocks(spec, std::vector<int>{layers[s]}))
            if (span_is_zero(f[s], block_span(spec, id))) mask.pruned.insert(id);
    }
    return mask;
}

SparsityStats sparsity_stats(const Mask& mask, const NetworkSpec& spec,
                             const std::vector<int>& included) {
    SparsityStats st;
    st.included = included;
    st.pruned_per_layer.assign(included.size(), 0);
    for (size_t k = 0; k < included.size(); ++k) {
        int l = included[k];
        const LayerSpec& ls = spec.layers.at(static_cast<size_t>(l));
        int64_t block_len = ls.kind == LayerKind::conv2d ? int64_t(ls.kh) * ls.kw : ls.in_size;
        st.total_weights += TensorT<float>::checked_numel(weight_shape(ls));
        for (const BlockId& b : mask.pruned) {
            if (b.layer != l) continue;
            ++st.pruned_per_layer[k];
            st.pruned_weights += block_len;
        }
    }
    st.sparsity_pct = st.total_weights == 0
                          ? 0.0
                          : 100.0 * static_cast<double>(st.pruned_weights) /
                                static_cast<double>(st.total_weights);
    return st;
}

std::string mask_to_text(const Mask& mask) {
    std::vector<std::string> lines;
    for (const BlockId& b : mask.pruned)
        lines.push_back(std::to_string(b.layer) + "," + std::to_string(b.input_map) + "," +
                        std::to_string(b.output_map));
    std::sort(lines.begin(), lines.end());
    std::string out;
    for (const std::string& l : lines) out += l + "\n";
    return out;
}

Mask mask_from_text(const std::string& text) {
    Mask mask;
    std::istringstream is(text);
    std::string line;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        BlockId b;
        char c1 = 0, c2 = 0;
        std::istringstream ls(line);
        if (!(ls >> b.layer >> c1 >> b.input_map >> c2 >> b.output_map) || c1 != ',' || c2 != ',')
            throw std::runtime_error("mask: bad line '" + line + "'");
        mask.pruned.insert(b);
    }
    return mask;
}

void write_mask(const Mask& mask, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot open " + path + " for writing");
    os << mask_to_text(mask);
    if (!os) throw std::runtime_error("write failed: " + path);
}

Mask read_mask(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open " + path);
    std::ostringstream buf;
    buf << is.rdbuf();
    return mask_from_text(buf.str());
}

#define ADMMPRUNE_INSTANTIATE_SPARSITY(T)                                                         \
    template std::vector<BlockViewT<T>> block_views<T>(const NetworkSpec&, int,                   \
                                                       const TensorT<T>&);                        \
    template double penalty_value<T>(const std::vector<BlockViewT<T>>&, PenaltyKind);             \
    template void group_soft_threshold<T>(T*, int64_t, double);                                   \
    template void group_hard_threshold<T>(T*, int64_t, double);                                   \
    template std::vector<TensorT<T>> sparsity_step<T>(const NetworkT<T>&,                         \
                                                      const std::vector<TensorT<T>>&, double,     \
                                                      double, PenaltyKind, const GuardPolicy&);   \
    template Mask mask_from_aux<T>(const NetworkSpec&, const std::vector<TensorT<T>>&);

ADMMPRUNE_INSTANTIATE_SPARSITY(float)
ADMMPRUNE_INSTANTIATE_SPARSITY(double)

}  // namespace admmprune
