#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "admmprune/checkpoint.hpp"

namespace admmprune {

namespace {

constexpr char kMagic[8] = {'A', 'D', 'M', 'M', 'C', 'N', 'N', '1'};

void put_u32(std::string& out, uint32_t v) {
    for (int k = 0; k < 4; ++k) out += static_cast<char>((v >> (8 * k)) & 0xff);
}

void put_f32(std::string& out, float f) {
    uint32_t v;
    std::memcpy(&v, &f, 4);
    put_u32(out, v);
}

uint32_t get_u32(const std::string& s, size_t off) {
    uint32_t v = 0;
    for (int k = 0; k < 4; ++k)
        v |= static_cast<uint32_t>(static_cast<unsigned char>(s[off + static_cast<size_t>(k)]))
             << (8 * k);
    return v;
}

float get_f32(const std::string& s, size_t off) {
    uint32_t v = get_u32(s, off);
    float f;
    std::memcpy(&f, &v, 4);
    return f;
}

std::string header_text(const Network& net) {
    std::ostringstream os;
    os << "input " << net.spec.in_maps << " " << net.spec.in_h << " " << net.spec.in_w << "\n";
    for (const LayerSpec& l : net.spec.layers) {
        os << "layer " << layer_kind_name(l.kind);
        switch (l.kind) {
            case LayerKind::conv2d:
                os << " kh " << l.kh << " kw " << l.kw << " m " << l.in_maps << " n "
                   << l.out_maps << " stride " << l.stride << " pad "
                   << (l.same_pad ? "same" : "valid");
                break;
            case LayerKind::fully_connected:
                os << " in " << l.in_size << " out " << l.out_size;
                break;
            case LayerKind::max_pool:
                os << " win " << l.pool_win << " stride " << l.pool_stride;
                break;
            default:
                break;
        }
        os << "\n";
    }
    for (const auto& p : net.params) {
        os << "tensor weight";
        for (int d : p.weight.shape) os << " " << d;
        os << "\n";
        os << "tensor bias";
        for (int d : p.bias.shape) os << " " << d;
        os << "\n";
    }
    return os.str();
}

[[noreturn]] void bad_header(const std::string& what) {
    throw std::runtime_error("checkpoint header: " + what);
}

int read_int_field(std::istringstream& is, const char* key, const std::string& line) {
    std::string k;
    int v = 0;
    if (!(is >> k >> v) || k != key) bad_header("expected '" + std::string(key) + "' in: " + line);
    return v;
}

}  // namespace

void save_checkpoint(const Network& net, const std::string& path) {
    std::string header = header_text(net);
    std::string out(kMagic, 8);
    put_u32(out, static_cast<uint32_t>(header.size()));
    out += header;
    for (const auto& p : net.params) {
        for (int64_t i = 0; i < p.weight.numel(); ++i) put_f32(out, p.weight[i]);
        for (int64_t i = 0; i < p.bias.numel(); ++i) put_f32(out, p.bias[i]);
    }
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot open " + path + " for writing");
    os.write(out.data(), static_cast<std::streamsize>(out.size()));
    if (!os) throw std::runtime_error("write failed: " + path);
}

Network load_checkpoint(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open " + path);
    std::ostringstream buf;
    buf << is.rdbuf();
    std::string file = buf.str();

    if (file.size() < 12) throw std::runtime_error("checkpoint: truncated header");
    if (std::memcmp(file.data(), kMagic, 7) != 0)
        throw std::runtime_error("checkpoint: bad magic");
    if (file[7] != kMagic[7])
        throw std::runtime_error(std::string("checkpoint: version mismatch: got '") + file[7] +
                                 "', want '1'");
    size_t header_len = get_u32(file, 8);
    if (12 + header_len > file.size()) throw std::runtime_error("checkpoint: truncated header");
    std::string header = file.substr(12, header_len);

    NetworkSpec spec;
    std::vector<std::vector<int>> tensor_shapes;
    std::istringstream hs(header);
    std::string line;
    bool have_input = false;
    while (std::getline(hs, line)) {
        if (line.empty()) continue;
        std::istringstream ls(line);
        std::string tag;
        ls >> tag;
        if (tag == "input") {
            if (!(ls >> spec.in_maps >> spec.in_h >> spec.in_w)) bad_header("bad input line");
            have_input = true;
        } else if (tag == "layer") {
            std::string kind;
            ls >> kind;
            LayerSpec l;
            if (kind == "conv2d") {
                l.kind = LayerKind::conv2d;
                l.kh = read_int_field(ls, "kh", line);
                l.kw = read_int_field(ls, "kw", line);
                l.in_maps = read_int_field(ls, "m", line);
                l.out_maps = read_int_field(ls, "n", line);
                l.stride = read_int_field(ls, "stride", line);
                std::string k, pad;
                if (!(ls >> k >> pad) || k != "pad" || (pad != "same" && pad != "valid"))
                    bad_header("bad pad in: " + line);
                l.same_pad = pad == "same";
            } else if (kind == "fully_connected") {
                l.kind = LayerKind::fully_connected;
                l.in_size = read_int_field(ls, "in", line);
                l.out_size = read_int_field(ls, "out", line);
            } else if (kind == "max_pool") {
                l.kind = LayerKind::max_pool;
                l.pool_win = read_int_field(ls, "win", line);
                l.pool_stride = read_int_field(ls, "stride", line);
            } else if (kind == "relu") {
                l.kind = LayerKind::relu;
            } else if (kind == "softmax") {
                l.kind = LayerKind::softmax_head;
            } else {
                bad_header("unknown layer kind '" + kind + "'");
            }
            spec.layers.push_back(l);
        } else if (tag == "tensor") {
            std::string role;
            ls >> role;
            if (role != "weight" && role != "bias") bad_header("bad tensor line: " + line);
            std::vector<int> dims;
            int d;
            while (ls >> d) dims.push_back(d);
            if (dims.empty()) bad_header("tensor line without dims: " + line);
            tensor_shapes.push_back(dims);
        } else {
            bad_header("unknown line '" + line + "'");
        }
    }
    if (!have_input) bad_header("missing input line");
    spec.classes = validate_spec(spec);

    // the header's tensor list must agree with what the layer list implies
    std::vector<std::vector<int>> expect;
    for (const LayerSpec& l : spec.layers) {
        if (!is_parameterized(l.kind)) continue;
        expect.push_back(weight_shape(l));
        expect.push_back({l.kind == LayerKind::conv2d ? l.out_maps : l.out_size});
    }
    if (expect != tensor_shapes)
        throw std::runtime_error("checkpoint: header tensor shapes disagree with the layer list");

    Network net;
    net.spec = spec;
    size_t off = 12 + header_len;
    for (int l = 0; l < static_cast<int>(spec.layers.size()); ++l) {
        const LayerSpec& ls = spec.layers[static_cast<size_t>(l)];
        if (!is_parameterized(ls.kind)) continue;
        Network::Param p;
        p.layer = l;
        p.weight = Tensor(weight_shape(ls));
        p.bias = Tensor({ls.kind == LayerKind::conv2d ? ls.out_maps : ls.out_size});
        for (TensorT<float>* t : {&p.weight, &p.bias}) {
            size_t need = static_cast<size_t>(t->numel()) * 4;
            if (off + need > file.size()) throw std::runtime_error("checkpoint: truncated payload");
            for (int64_t i = 0; i < t->numel(); ++i)
                (*t)[i] = get_f32(file, off + static_cast<size_t>(i) * 4);
            off += need;
        }
        net.params.push_back(std::move(p));
    }
    if (off != file.size())
        throw std::runtime_error("checkpoint: trailing bytes after payload");
    return net;
}

}  // namespace admmprune
