#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "admmprune/kernels.hpp"
#include "admmprune/network.hpp"
#include "admmprune/sparsity.hpp"

namespace admmprune {

namespace k = kernels;

const char* layer_kind_name(LayerKind k) {
    switch (k) {
        case LayerKind::conv2d: return "conv2d";
        case LayerKind::fully_connected: return "fully_connected";
        case LayerKind::relu: return "relu";
        case LayerKind::max_pool: return "max_pool";
        case LayerKind::softmax_head: return "softmax";
    }
    return "?";
}

bool is_parameterized(LayerKind k) {
    return k == LayerKind::conv2d || k == LayerKind::fully_connected;
}

std::vector<int> weight_shape(const LayerSpec& l) {
    if (l.kind == LayerKind::conv2d) return {l.out_maps, l.in_maps, l.kh, l.kw};
    if (l.kind == LayerKind::fully_connected) return {l.out_size, l.in_size};
    throw std::logic_error("weight_shape: layer has no parameters");
}

int param_index(const NetworkSpec& spec, int layer) {
    if (layer < 0 || layer >= static_cast<int>(spec.layers.size()))
        throw std::out_of_range("param_index: layer out of range");
    if (!is_parameterized(spec.layers[static_cast<size_t>(layer)].kind)) return -1;
    int idx = 0;
    for (int l = 0; l < layer; ++l)
        if (is_parameterized(spec.layers[static_cast<size_t>(l)].kind)) ++idx;
    return idx;
}

int64_t total_weight_count(const NetworkSpec& spec) {
    int64_t n = 0;
    for (const LayerSpec& l : spec.layers)
        if (is_parameterized(l.kind)) n += TensorT<float>::checked_numel(weight_shape(l));
    return n;
}

namespace {

[[noreturn]] void layer_error(int layer, const LayerSpec& l, const std::string& what) {
    std::ostringstream os;
    os << "layer " << layer << " (" << layer_kind_name(l.kind) << "): " << what;
    throw std::runtime_error(os.str());
}

/// Shape flowing between layers: spatial [maps, h, w] until the first
/// fully connected layer flattens it to a plain width.
struct Flow {
    bool flat = false;
    int maps = 0, h = 0, w = 0;
    int width = 0;
};

Flow advance_flow(const NetworkSpec& spec, int layer, Flow f) {
    const LayerSpec& l = spec.layers[static_cast<size_t>(layer)];
    switch (l.kind) {
        case LayerKind::conv2d: {
            if (f.flat) layer_error(layer, l, "expects a spatial input, got a flat one");
            if (l.in_maps != f.maps)
                layer_error(layer, l, "expects " + std::to_string(l.in_maps) +
                                          " input maps, got " + std::to_string(f.maps));
            if (l.kh <= 0 || l.kw <= 0 || l.out_maps <= 0 || l.stride <= 0)
                layer_error(layer, l, "non-positive kernel/maps/stride");
            if (!l.same_pad && (f.h < l.kh || f.w < l.kw))
                layer_error(layer, l, "kernel larger than input under valid padding");
            k::ConvShape cs = k::conv_output_shape(f.h, f.w, l.kh, l.kw, l.stride, l.same_pad);
            f.maps = l.out_maps;
            f.h = cs.out_h;
            f.w = cs.out_w;
            return f;
        }
        case LayerKind::relu:
            return f;
        case LayerKind::max_pool: {
            if (f.flat) layer_error(layer, l, "expects a spatial input, got a flat one");
            if (l.pool_win <= 0 || l.pool_stride <= 0)
                layer_error(layer, l, "non-positive window/stride");
            if (f.h < l.pool_win || f.w < l.pool_win)
                layer_error(layer, l, "window larger than input");
            f.h = (f.h - l.pool_win) / l.pool_stride + 1;
            f.w = (f.w - l.pool_win) / l.pool_stride + 1;
            return f;
        }
        case LayerKind::fully_connected: {
            int width = f.flat ? f.width : f.maps * f.h * f.w;
            if (l.in_size != width)
                layer_error(layer, l, "expects input size " + std::to_string(l.in_size) +
                                          ", got " + std::to_string(width));
            if (l.out_size <= 0) layer_error(layer, l, "non-positive output size");
            f.flat = true;
            f.width = l.out_size;
            return f;
        }
        case LayerKind::softmax_head: {
            if (layer != static_cast<int>(spec.layers.size()) - 1)
                layer_error(layer, l, "softmax head must be the last layer");
            if (!f.flat) layer_error(layer, l, "expects a flat input, put an fc layer before it");
            return f;
        }
    }
    throw std::logic_error("advance_flow: unknown layer kind");
}

Flow input_flow(const NetworkSpec& spec) {
    if (spec.in_maps <= 0 || spec.in_h <= 0 || spec.in_w <= 0)
        throw std::runtime_error("network input shape not set");
    Flow f;
    f.maps = spec.in_maps;
    f.h = spec.in_h;
    f.w = spec.in_w;
    return f;
}

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : s) {
        if (c == sep) {
            out.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    out.push_back(cur);
    return out;
}

std::string trim(const std::string& s) {
    size_t a = s.find_first_not_of(" \t");
    if (a == std::string::npos) return "";
    size_t b = s.find_last_not_of(" \t");
    return s.substr(a, b - a + 1);
}

int parse_pos_int(const std::string& s, const std::string& ctx) {
    size_t pos = 0;
    int v = 0;
    try {
        v = std::stoi(s, &pos);
    } catch (const std::exception&) {
        throw std::runtime_error("arch: bad integer '" + s + "' in " + ctx);
    }
    if (pos != s.size() || v <= 0)
        throw std::runtime_error("arch: bad integer '" + s + "' in " + ctx);
    return v;
}

}  // namespace

int validate_spec(const NetworkSpec& spec) {
    if (spec.layers.empty()) throw std::runtime_error("network has no layers");
    Flow f = input_flow(spec);
    for (int l = 0; l < static_cast<int>(spec.layers.size()); ++l) f = advance_flow(spec, l, f);
    if (spec.layers.back().kind != LayerKind::softmax_head)
        throw std::runtime_error("network must end with a softmax layer");
    return f.width;
}

NetworkSpec parse_arch(const std::string& text, int in_maps, int in_h, int in_w) {
    NetworkSpec spec;
    spec.in_maps = in_maps;
    spec.in_h = in_h;
    spec.in_w = in_w;

    Flow f = input_flow(spec);
    for (const std::string& raw : split(text, ',')) {
        std::string tok = trim(raw);
        if (tok.empty()) throw std::runtime_error("arch: empty layer token");
        std::vector<std::string> parts = split(tok, ':');
        const std::string& head = parts[0];
        LayerSpec l;
        if (head == "conv") {
            if (parts.size() < 2) throw std::runtime_error("arch: conv needs dims, e.g. conv:3x3x8");
            std::vector<std::string> dims = split(parts[1], 'x');
            if (dims.size() != 3)
                throw std::runtime_error("arch: bad conv dims '" + parts[1] + "' (want KHxKWxN)");
            l.kind = LayerKind::conv2d;
            l.kh = parse_pos_int(dims[0], tok);
            l.kw = parse_pos_int(dims[1], tok);
            l.out_maps = parse_pos_int(dims[2], tok);
            l.in_maps = f.flat ? 0 : f.maps;
            for (size_t i = 2; i < parts.size(); ++i) {
                if (parts[i] == "valid")
                    l.same_pad = false;
                else if (parts[i].size() > 1 && parts[i][0] == 's')
                    l.stride = parse_pos_int(parts[i].substr(1), tok);
                else
                    throw std::runtime_error("arch: unknown conv option '" + parts[i] + "'");
            }
        } else if (head == "fc") {
            if (parts.size() != 2) throw std::runtime_error("arch: fc needs a size, e.g. fc:10");
            l.kind = LayerKind::fully_connected;
            l.out_size = parse_pos_int(parts[1], tok);
            l.in_size = f.flat ? f.width : f.maps * f.h * f.w;
        } else if (head == "pool") {
            if (parts.size() < 2) throw std::runtime_error("arch: pool needs a window, e.g. pool:2");
            l.kind = LayerKind::max_pool;
            l.pool_win = parse_pos_int(parts[1], tok);
            l.pool_stride = l.pool_win;
            for (size_t i = 2; i < parts.size(); ++i) {
                if (parts[i].size() > 1 && parts[i][0] == 's')
                    l.pool_stride = parse_pos_int(parts[i].substr(1), tok);
                else
                    throw std::runtime_error("arch: unknown pool option '" + parts[i] + "'");
            }
        } else if (head == "relu") {
            l.kind = LayerKind::relu;
        } else if (head == "softmax") {
            l.kind = LayerKind::softmax_head;
        } else {
            throw std::runtime_error("arch: unknown layer '" + head + "'");
        }
        spec.layers.push_back(l);
        f = advance_flow(spec, static_cast<int>(spec.layers.size()) - 1, f);
    }
    spec.classes = validate_spec(spec);
    return spec;
}

template <typename T>
NetworkT<T> build_network(const NetworkSpec& spec, Pcg32& rng) {
    validate_spec(spec);
    NetworkT<T> net;
    net.spec = spec;
    for (int l = 0; l < static_cast<int>(spec.layers.size()); ++l) {
        const LayerSpec& ls = spec.layers[static_cast<size_t>(l)];
        if (!is_parameterized(ls.kind)) continue;
        typename NetworkT<T>::Param p;
        p.layer = l;
        p.weight = TensorT<T>(weight_shape(ls));
        int fan_in = ls.kind == LayerKind::conv2d ? ls.in_maps * ls.kh * ls.kw : ls.in_size;
        double limit = std::sqrt(6.0 / fan_in);
        for (int64_t i = 0; i < p.weight.numel(); ++i)
            p.weight[i] = static_cast<T>(rng.uniform(-limit, limit));
        int n = ls.kind == LayerKind::conv2d ? ls.out_maps : ls.out_size;
        p.bias = TensorT<T>({n});
        net.params.push_back(std::move(p));
    }
    return net;
}

namespace {

template <typename T>
TensorT<T> reshape_rows(const TensorT<T>& t, int rows, int cols) {
    return TensorT<T>({rows, cols}, t.data);
}

template <typename T>
struct Trace {
    std::vector<TensorT<T>> acts;                 // acts[l] feeds layer l; acts[L] = logits
    std::vector<std::vector<int32_t>> pool_args;  // one entry per max_pool layer, in order
};

template <typename T>
void check_batch(const NetworkT<T>& net, const TensorT<T>& batch) {
    if (batch.ndim() != 4 || batch.dim(1) != net.spec.in_maps || batch.dim(2) != net.spec.in_h ||
        batch.dim(3) != net.spec.in_w)
        throw std::runtime_error("input batch shape " + shape_str(batch.shape) +
                                 " does not match network input [*," +
                                 std::to_string(net.spec.in_maps) + "," +
                                 std::to_string(net.spec.in_h) + "," +
                                 std::to_string(net.spec.in_w) + "]");
}

template <typename T>
Trace<T> forward_trace(const NetworkT<T>& net, const TensorT<T>& batch, Backend be) {
    check_batch(net, batch);
    const bool serial = be == Backend::serial;
    const int B = batch.dim(0);
    Trace<T> tr;
    tr.acts.reserve(net.spec.layers.size() + 1);
    tr.acts.push_back(batch);
    for (int l = 0; l < static_cast<int>(net.spec.layers.size()); ++l) {
        const LayerSpec& ls = net.spec.layers[static_cast<size_t>(l)];
        const TensorT<T>& in = tr.acts.back();
        TensorT<T> out;
        switch (ls.kind) {
            case LayerKind::conv2d: {
                const auto& p = net.params[static_cast<size_t>(param_index(net.spec, l))];
                if (serial)
                    k::ref::conv2d_forward(in, p.weight, p.bias, ls.stride, ls.same_pad, out);
                else
                    k::omp::conv2d_forward(in, p.weight, p.bias, ls.stride, ls.same_pad, out);
                break;
            }
            case LayerKind::fully_connected: {
                const auto& p = net.params[static_cast<size_t>(param_index(net.spec, l))];
                TensorT<T> in2d = in.ndim() == 2 ? in : reshape_rows(in, B, ls.in_size);
                if (serial)
                    k::ref::fc_forward(in2d, p.weight, p.bias, out);
                else
                    k::omp::fc_forward(in2d, p.weight, p.bias, out);
                break;
            }
            case LayerKind::relu:
                if (serial)
                    k::ref::relu_forward(in, out);
                else
                    k::omp::relu_forward(in, out);
                break;
            case LayerKind::max_pool: {
                std::vector<int32_t> am;
                if (serial)
                    k::ref::maxpool_forward(in, ls.pool_win, ls.pool_stride, out, am);
                else
                    k::omp::maxpool_forward(in, ls.pool_win, ls.pool_stride, out, am);
                tr.pool_args.push_back(std::move(am));
                break;
            }
            case LayerKind::softmax_head:
                out = in;  // identity at forward; logits are the head's input
                break;
        }
        tr.acts.push_back(std::move(out));
    }
    return tr;
}

}  // namespace

template <typename T>
TensorT<T> forward(const NetworkT<T>& net, const TensorT<T>& batch, Backend be) {
    return forward_trace(net, batch, be).acts.back();
}

template <typename T>
double loss_and_grad(const NetworkT<T>& net, const TensorT<T>& batch,
                     const std::vector<int>& labels, GradsT<T>& grads, Backend be) {
    const int B = batch.dim(0);
    if (static_cast<int>(labels.size()) != B)
        throw std::runtime_error("loss_and_grad: " + std::to_string(labels.size()) +
                                 " labels for a batch of " + std::to_string(B));
    for (int y : labels)
        if (y < 0 || y >= net.spec.classes)
            throw std::runtime_error("label " + std::to_string(y) + " out of range for " +
                                     std::to_string(net.spec.classes) + " classes");

    Trace<T> tr = forward_trace(net, batch, be);
    const bool serial = be == Backend::serial;

    grads.weight.assign(net.params.size(), {});
    grads.bias.assign(net.params.size(), {});

    TensorT<T> grad;
    double loss = k::ref::softmax_xent(tr.acts.back(), std::span<const int>(labels), grad);

    int pool_i = static_cast<int>(tr.pool_args.size());
    for (int l = static_cast<int>(net.spec.layers.size()) - 1; l >= 0; --l) {
        const LayerSpec& ls = net.spec.layers[static_cast<size_t>(l)];
        const TensorT<T>& in = tr.acts[static_cast<size_t>(l)];
        switch (ls.kind) {
            case LayerKind::softmax_head:
                break;
            case LayerKind::relu: {
                TensorT<T> gin;
                if (serial)
                    k::ref::relu_backward(grad, tr.acts[static_cast<size_t>(l) + 1], gin);
                else
                    k::omp::relu_backward(grad, tr.acts[static_cast<size_t>(l) + 1], gin);
                grad = std::move(gin);
                break;
            }
            case LayerKind::max_pool: {
                --pool_i;
                TensorT<T> gin(in.shape);
                if (serial)
                    k::ref::maxpool_backward(grad, tr.pool_args[static_cast<size_t>(pool_i)], gin);
                else
                    k::omp::maxpool_backward(grad, tr.pool_args[static_cast<size_t>(pool_i)], gin);
                grad = std::move(gin);
                break;
            }
            case LayerKind::fully_connected: {
                int pi = param_index(net.spec, l);
                const auto& p = net.params[static_cast<size_t>(pi)];
                TensorT<T> in2d = in.ndim() == 2 ? in : reshape_rows(in, B, ls.in_size);
                TensorT<T>&gw = grads.weight[static_cast<size_t>(pi)],
                &gb = grads.bias[static_cast<size_t>(pi)];
                if (serial) {
                    k::ref::fc_backward_filter(grad, in2d, gw, gb);
                } else {
                    k::omp::fc_backward_filter(grad, in2d, gw, gb);
                }
                if (l > 0) {
                    TensorT<T> gin2d;
                    if (serial)
                        k::ref::fc_backward_data(grad, p.weight, gin2d);
                    else
                        k::omp::fc_backward_data(grad, p.weight, gin2d);
                    grad = in.ndim() == 2 ? std::move(gin2d)
                                          : TensorT<T>(in.shape, std::move(gin2d.data));
                }
                break;
            }
            case LayerKind::conv2d: {
                int pi = param_index(net.spec, l);
                const auto& p = net.params[static_cast<size_t>(pi)];
                TensorT<T>&gw = grads.weight[static_cast<size_t>(pi)],
                &gb = grads.bias[static_cast<size_t>(pi)];
                if (serial) {
                    k::ref::conv2d_backward_filter(grad, in, ls.kh, ls.kw, ls.stride, ls.same_pad,
                                                   gw, gb);
                } else {
                    k::omp::conv2d_backward_filter(grad, in, ls.kh, ls.kw, ls.stride, ls.same_pad,
                                                   gw, gb);
                }
                if (l > 0) {
                    TensorT<T> gin;
                    if (serial)
                        k::ref::conv2d_backward_data(grad, p.weight, in.dim(2), in.dim(3),
                                                     ls.stride, ls.same_pad, gin);
                    else
                        k::omp::conv2d_backward_data(grad, p.weight, in.dim(2), in.dim(3),
                                                     ls.stride, ls.same_pad, gin);
                    grad = std::move(gin);
                }
                break;
            }
        }
    }

    // frozen blocks never accumulate gradient, keeping them exactly zero
    for (const BlockId& b : net.mask.pruned) {
        int pi = param_index(net.spec, b.layer);
        BlockSpan sp = block_span(net.spec, b);
        TensorT<T>& gw = grads.weight[static_cast<size_t>(pi)];
        std::fill(gw.data.begin() + sp.offset, gw.data.begin() + sp.offset + sp.len, T{});
    }
    return loss;
}

namespace {

template <typename T>
void check_step_inputs(const NetworkT<T>& net, const GradsT<T>& grads,
                       const std::vector<TensorT<T>>& u) {
    if (grads.weight.size() != net.params.size() || grads.bias.size() != net.params.size())
        throw std::runtime_error("sgd_prox_step: gradient slot count mismatch");
    if (u.size() != net.params.size())
        throw std::runtime_error("sgd_prox_step: U slot count mismatch");
    for (size_t i = 0; i < net.params.size(); ++i) {
        if (!grads.weight[i].same_shape(net.params[i].weight) ||
            !grads.bias[i].same_shape(net.params[i].bias))
            throw std::runtime_error("sgd_prox_step: gradient shape mismatch at param " +
                                     std::to_string(i));
        if (u[i].numel() > 0 && !u[i].same_shape(net.params[i].weight))
            throw std::runtime_error("sgd_prox_step: U shape mismatch at param " +
                                     std::to_string(i));
        if (!all_finite(grads.weight[i]) || !all_finite(grads.bias[i]))
            throw std::runtime_error("sgd_prox_step: non-finite gradient at param " +
                                     std::to_string(i));
    }
}

}  // namespace

template <typename T>
void sgd_prox_step(NetworkT<T>& net, const GradsT<T>& grads, const std::vector<TensorT<T>>& u,
                   double rho, double lr) {
    check_step_inputs(net, grads, u);
    for (size_t i = 0; i < net.params.size(); ++i) {
        TensorT<T>& w = net.params[i].weight;
        const TensorT<T>& gw = grads.weight[i];
        const bool prox = u[i].numel() > 0;
        for (int64_t j = 0; j < w.numel(); ++j) {
            double step = gw[j];
            if (prox) step += rho * (static_cast<double>(w[j]) - static_cast<double>(u[i][j]));
            w[j] = static_cast<T>(static_cast<double>(w[j]) - lr * step);
        }
        TensorT<T>& b = net.params[i].bias;
        for (int64_t j = 0; j < b.numel(); ++j)
            b[j] = static_cast<T>(static_cast<double>(b[j]) - lr * grads.bias[i][j]);
    }
}

template <typename T>
void sgd_prox_step(NetworkT<T>& net, const GradsT<T>& grads, const std::vector<TensorT<T>>& u,
                   double rho, double lr, double momentum, SgdStateT<T>& state) {
    if (momentum == 0.0) {
        sgd_prox_step(net, grads, u, rho, lr);
        return;
    }
    check_step_inputs(net, grads, u);
    if (state.vel_w.empty()) {
        for (const auto& p : net.params) {
            state.vel_w.push_back(zeros_like(p.weight));
            state.vel_b.push_back(zeros_like(p.bias));
        }
    }
    for (size_t i = 0; i < net.params.size(); ++i) {
        TensorT<T>& w = net.params[i].weight;
        TensorT<T>& vw = state.vel_w[i];
        const bool prox = u[i].numel() > 0;
        for (int64_t j = 0; j < w.numel(); ++j) {
            double step = grads.weight[i][j];
            if (prox) step += rho * (static_cast<double>(w[j]) - static_cast<double>(u[i][j]));
            double v = momentum * static_cast<double>(vw[j]) + step;
            vw[j] = static_cast<T>(v);
            w[j] = static_cast<T>(static_cast<double>(w[j]) - lr * v);
        }
        TensorT<T>& b = net.params[i].bias;
        TensorT<T>& vb = state.vel_b[i];
        for (int64_t j = 0; j < b.numel(); ++j) {
            double v = momentum * static_cast<double>(vb[j]) + static_cast<double>(grads.bias[i][j]);
            vb[j] = static_cast<T>(v);
            b[j] = static_cast<T>(static_cast<double>(b[j]) - lr * v);
        }
    }
}

template <typename T>
NetworkT<T> apply_mask(const NetworkT<T>& net, const Mask& mask) {
    NetworkT<T> out = net;
    for (const BlockId& b : mask.pruned) {
        BlockSpan sp = block_span(net.spec, b);  // validates the id
        int pi = param_index(net.spec, b.layer);
        TensorT<T>& w = out.params[static_cast<size_t>(pi)].weight;
        std::fill(w.data.begin() + sp.offset, w.data.begin() + sp.offset + sp.len, T{});
    }
    out.mask = mask;
    return out;
}

std::pair<int64_t, int64_t> mac_counts(const NetworkSpec& spec, int in_maps, int in_h, int in_w,
                                       const Mask& mask) {
    NetworkSpec at = spec;
    at.in_maps = in_maps;
    at.in_h = in_h;
    at.in_w = in_w;
    validate_spec(at);

    std::vector<int64_t> pruned_in_layer(spec.layers.size(), 0);
    for (const BlockId& b : mask.pruned) {
        block_span(at, b);  // validity check
        ++pruned_in_layer[static_cast<size_t>(b.layer)];
    }

    Flow f = input_flow(at);
    int64_t dense = 0, sparse = 0;
    for (int l = 0; l < static_cast<int>(at.layers.size()); ++l) {
        const LayerSpec& ls = at.layers[static_cast<size_t>(l)];
        if (ls.kind == LayerKind::conv2d) {
            k::ConvShape cs = k::conv_output_shape(f.h, f.w, ls.kh, ls.kw, ls.stride, ls.same_pad);
            int64_t per_block = int64_t(cs.out_h) * cs.out_w * ls.kh * ls.kw;
            int64_t blocks = int64_t(ls.in_maps) * ls.out_maps;
            dense += per_block * blocks;
            sparse += per_block * (blocks - pruned_in_layer[static_cast<size_t>(l)]);
        } else if (ls.kind == LayerKind::fully_connected) {
            dense += int64_t(ls.in_size) * ls.out_size;
            sparse += int64_t(ls.in_size) *
                      (ls.out_size - pruned_in_layer[static_cast<size_t>(l)]);
        }
        f = advance_flow(at, l, f);
    }
    return {dense, sparse};
}

template <typename T>
std::vector<int> predict(const NetworkT<T>& net, const TensorT<T>& images, int eval_batch,
                         Backend be) {
    check_batch(net, images);
    if (eval_batch < 1) throw std::runtime_error("predict: eval_batch must be >= 1");
    const int count = images.dim(0);
    const int64_t per = images.numel() / count;
    std::vector<int> out;
    out.reserve(static_cast<size_t>(count));
    for (int i0 = 0; i0 < count; i0 += eval_batch) {
        int n = std::min(eval_batch, count - i0);
        TensorT<T> chunk({n, images.dim(1), images.dim(2), images.dim(3)});
        std::copy(images.data.begin() + i0 * per, images.data.begin() + (i0 + n) * per,
                  chunk.data.begin());
        TensorT<T> logits = forward(net, chunk, be);
        for (int b = 0; b < n; ++b) {
            const T* row = logits.ptr() + int64_t(b) * net.spec.classes;
            int best = 0;
            for (int c = 1; c < net.spec.classes; ++c)
                if (row[c] > row[best]) best = c;  // ties keep the lowest class
            out.push_back(best);
        }
    }
    return out;
}

template <typename T>
double evaluate_accuracy(const NetworkT<T>& net, const TensorT<T>& images,
                         const std::vector<int>& labels, int eval_batch, Backend be) {
    if (static_cast<int>(labels.size()) != images.dim(0))
        throw std::runtime_error("evaluate_accuracy: label count does not match image count");
    std::vector<int> pred = predict(net, images, eval_batch, be);
    int64_t correct = 0;
    for (size_t i = 0; i < labels.size(); ++i)
        if (pred[i] == labels[i]) ++correct;
    return 100.0 * static_cast<double>(correct) / static_cast<double>(labels.size());
}

#define ADMMPRUNE_INSTANTIATE_ENGINE(T)                                                           \
    template NetworkT<T> build_network<T>(const NetworkSpec&, Pcg32&);                            \
    template TensorT<T> forward<T>(const NetworkT<T>&, const TensorT<T>&, Backend);               \
    template double loss_and_grad<T>(const NetworkT<T>&, const TensorT<T>&,                       \
                                     const std::vector<int>&, GradsT<T>&, Backend);               \
    template void sgd_prox_step<T>(NetworkT<T>&, const GradsT<T>&, const std::vector<TensorT<T>>&, \
                                   double, double);                                               \
    template void sgd_prox_step<T>(NetworkT<T>&, const GradsT<T>&, const std::vector<TensorT<T>>&, \
                                   double, double, double, SgdStateT<T>&);                        \
    template NetworkT<T> apply_mask<T>(const NetworkT<T>&, const Mask&);                          \
    template std::vector<int> predict<T>(const NetworkT<T>&, const TensorT<T>&, int, Backend);    \
    template double evaluate_accuracy<T>(const NetworkT<T>&, const TensorT<T>&,                   \
                                         const std::vector<int>&, int, Backend);

ADMMPRUNE_INSTANTIATE_ENGINE(float)
ADMMPRUNE_INSTANTIATE_ENGINE(double)

}  // namespace admmprune
