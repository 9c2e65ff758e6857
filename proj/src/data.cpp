#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "admmprune/data.hpp"
#include "admmprune/rng.hpp"

namespace admmprune {

namespace {

void check_dataset(const Dataset& ds, const char* ctx) {
    if (ds.images.ndim() != 4)
        throw std::runtime_error(std::string(ctx) + ": images must be [count, maps, h, w]");
    if (ds.images.dim(0) != static_cast<int>(ds.labels.size()))
        throw std::runtime_error(std::string(ctx) + ": image/label count mismatch");
    for (int y : ds.labels)
        if (y < 0 || y >= ds.class_count)
            throw std::runtime_error(std::string(ctx) + ": label out of range");
}

/// Distance of pixel (y, x) to the line through the image center at the
/// class angle; the bar is the set of pixels within the half-thickness.
double bar_distance(int y, int x, int h, int w, int cls, int classes) {
    double cy = (h - 1) / 2.0, cx = (w - 1) / 2.0;
    double theta = 3.14159265358979323846 * cls / classes;
    double dy = std::sin(theta), dx = std::cos(theta);
    // 2-D cross product of (p - c) with the bar direction
    return std::abs((y - cy) * dx - (x - cx) * dy);
}

}  // namespace

Dataset synth_generate(uint64_t seed, int count, int h, int w, int classes, double noise_sd) {
    if (classes < 2) throw std::runtime_error("synth_generate: need at least 2 classes");
    if (count < 1) throw std::runtime_error("synth_generate: need at least 1 sample");
    if (noise_sd < 0.0) throw std::runtime_error("synth_generate: negative noise_sd");

    double half_thickness = std::max(1.0, std::min(h, w) / 8.0);
    std::vector<Tensor> templates;
    for (int c = 0; c < classes; ++c) {
        Tensor t({h, w});
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x)
                t[int64_t(y) * w + x] =
                    bar_distance(y, x, h, w, c, classes) <= half_thickness ? 1.0f : 0.0f;
        templates.push_back(std::move(t));
    }

    Dataset ds;
    ds.images = Tensor({count, 1, h, w});
    ds.class_count = classes;
    ds.split = "synth";
    Pcg32 rng(seed, 0);
    for (int s = 0; s < count; ++s) {
        int c = s % classes;
        ds.labels.push_back(c);
        float* px = ds.images.ptr() + int64_t(s) * h * w;
        const Tensor& t = templates[static_cast<size_t>(c)];
        for (int64_t i = 0; i < int64_t(h) * w; ++i) {
            double v = t[i] + noise_sd * rng.gaussian();
            px[i] = static_cast<float>(std::clamp(v, 0.0, 1.0));
        }
    }
    return ds;
}

namespace {

uint32_t read_u32be(std::istream& is, const std::string& path) {
    unsigned char b[4];
    if (!is.read(reinterpret_cast<char*>(b), 4))
        throw std::runtime_error("idx: truncated header in " + path);
    return (uint32_t(b[0]) << 24) | (uint32_t(b[1]) << 16) | (uint32_t(b[2]) << 8) | b[3];
}

void write_u32be(std::ostream& os, uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v >> 24),
                          static_cast<unsigned char>(v >> 16),
                          static_cast<unsigned char>(v >> 8), static_cast<unsigned char>(v)};
    os.write(reinterpret_cast<char*>(b), 4);
}

}  // namespace

Dataset load_idx(const std::string& images_path, const std::string& labels_path) {
    std::ifstream imgs(images_path, std::ios::binary);
    if (!imgs) throw std::runtime_error("cannot open " + images_path);
    uint32_t magic = read_u32be(imgs, images_path);
    if (magic != 0x00000803u)
        throw std::runtime_error("idx: bad magic in " + images_path +
                                 " (want 0x00000803 for images)");
    int count = static_cast<int>(read_u32be(imgs, images_path));
    int h = static_cast<int>(read_u32be(imgs, images_path));
    int w = static_cast<int>(read_u32be(imgs, images_path));
    if (count <= 0 || h <= 0 || w <= 0)
        throw std::runtime_error("idx: bad dimensions in " + images_path);

    std::vector<unsigned char> bytes(static_cast<size_t>(count) * h * w);
    if (!imgs.read(reinterpret_cast<char*>(bytes.data()),
                   static_cast<std::streamsize>(bytes.size())))
        throw std::runtime_error("idx: file size does not match dimensions in " + images_path);

    std::ifstream lbls(labels_path, std::ios::binary);
    if (!lbls) throw std::runtime_error("cannot open " + labels_path);
    uint32_t lmagic = read_u32be(lbls, labels_path);
    if (lmagic != 0x00000801u)
        throw std::runtime_error("idx: bad magic in " + labels_path +
                                 " (want 0x00000801 for labels)");
    int lcount = static_cast<int>(read_u32be(lbls, labels_path));
    if (lcount != count)
        throw std::runtime_error("idx: " + std::to_string(count) + " images but " +
                                 std::to_string(lcount) + " labels");
    std::vector<unsigned char> lbytes(static_cast<size_t>(lcount));
    if (!lbls.read(reinterpret_cast<char*>(lbytes.data()),
                   static_cast<std::streamsize>(lbytes.size())))
        throw std::runtime_error("idx: file size does not match count in " + labels_path);

    Dataset ds;
    ds.images = Tensor({count, 1, h, w});
    for (size_t i = 0; i < bytes.size(); ++i)
        ds.images[static_cast<int64_t>(i)] = static_cast<float>(bytes[i]) / 255.0f;
    int max_label = 0;
    for (unsigned char y : lbytes) {
        ds.labels.push_back(y);
        max_label = std::max(max_label, static_cast<int>(y));
    }
    ds.class_count = max_label + 1;
    return ds;
}

void write_idx(const Dataset& ds, const std::string& images_path, const std::string& labels_path) {
    check_dataset(ds, "write_idx");
    if (ds.images.dim(1) != 1)
        throw std::runtime_error("write_idx: IDX stores single-map images");
    std::ofstream imgs(images_path, std::ios::binary);
    if (!imgs) throw std::runtime_error("cannot open " + images_path + " for writing");
    write_u32be(imgs, 0x00000803u);
    write_u32be(imgs, static_cast<uint32_t>(ds.images.dim(0)));
    write_u32be(imgs, static_cast<uint32_t>(ds.images.dim(2)));
    write_u32be(imgs, static_cast<uint32_t>(ds.images.dim(3)));
    for (int64_t i = 0; i < ds.images.numel(); ++i) {
        double v = std::clamp(static_cast<double>(ds.images[i]), 0.0, 1.0);
        unsigned char b = static_cast<unsigned char>(std::lround(v * 255.0));
        imgs.write(reinterpret_cast<char*>(&b), 1);
    }
    if (!imgs) throw std::runtime_error("write failed: " + images_path);

    std::ofstream lbls(labels_path, std::ios::binary);
    if (!lbls) throw std::runtime_error("cannot open " + labels_path + " for writing");
    write_u32be(lbls, 0x00000801u);
    write_u32be(lbls, static_cast<uint32_t>(ds.labels.size()));
    for (int y : ds.labels) {
        if (y > 255) throw std::runtime_error("write_idx: label exceeds byte range");
        unsigned char b = static_cast<unsigned char>(y);
        lbls.write(reinterpret_cast<char*>(&b), 1);
    }
    if (!lbls) throw std::runtime_error("write failed: " + labels_path);
}

Dataset load_csv(const std::string& path, int maps, int h, int w) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot open " + path);
    const int64_t pixels = int64_t(maps) * h * w;
    std::vector<float> values;
    std::vector<int> labels;
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::istringstream ls(line);
        std::string cell;
        std::vector<double> row;
        while (std::getline(ls, cell, ',')) {
            try {
                row.push_back(std::stod(cell));
            } catch (const std::exception&) {
                throw std::runtime_error("csv: bad value '" + cell + "' at line " +
                                         std::to_string(lineno));
            }
        }
        if (static_cast<int64_t>(row.size()) != pixels + 1)
            throw std::runtime_error("csv: line " + std::to_string(lineno) + " has " +
                                     std::to_string(row.size()) + " fields, want " +
                                     std::to_string(pixels + 1));
        int label = static_cast<int>(row[0]);
        if (label < 0 || row[0] != label)
            throw std::runtime_error("csv: bad label at line " + std::to_string(lineno));
        labels.push_back(label);
        for (int64_t i = 1; i <= pixels; ++i) {
            if (row[static_cast<size_t>(i)] < 0.0 || row[static_cast<size_t>(i)] > 1.0)
                throw std::runtime_error("csv: pixel outside [0,1] at line " +
                                         std::to_string(lineno));
            values.push_back(static_cast<float>(row[static_cast<size_t>(i)]));
        }
    }
    if (labels.empty()) throw std::runtime_error("csv: no samples in " + path);

    Dataset ds;
    ds.images = Tensor({static_cast<int>(labels.size()), maps, h, w}, std::move(values));
    ds.labels = std::move(labels);
    ds.class_count = *std::max_element(ds.labels.begin(), ds.labels.end()) + 1;
    return ds;
}

std::pair<Dataset, Dataset> split_dataset(const Dataset& ds, int train_count, uint64_t seed) {
    check_dataset(ds, "split_dataset");
    const int count = ds.count();
    if (train_count < 1 || train_count >= count)
        throw std::runtime_error("split_dataset: train_count must be in [1, count)");
    std::vector<int> order = epoch_permutation(count, seed, 0);

    auto take = [&](int from, int to, const char* tag) {
        Dataset out;
        out.images = Tensor({to - from, ds.images.dim(1), ds.images.dim(2), ds.images.dim(3)});
        out.class_count = ds.class_count;
        out.split = tag;
        const int64_t per = ds.images.numel() / count;
        for (int k = from; k < to; ++k) {
            int src = order[static_cast<size_t>(k)];
            std::copy(ds.images.data.begin() + src * per, ds.images.data.begin() + (src + 1) * per,
                      out.images.data.begin() + (k - from) * per);
            out.labels.push_back(ds.labels[static_cast<size_t>(src)]);
        }
        return out;
    };
    return {take(0, train_count, "train"), take(train_count, count, "test")};
}

std::vector<int> epoch_permutation(int count, uint64_t seed, int64_t epoch) {
    if (count < 1) throw std::runtime_error("epoch_permutation: empty index range");
    std::vector<int> order(static_cast<size_t>(count));
    for (int i = 0; i < count; ++i) order[static_cast<size_t>(i)] = i;
    Pcg32 rng(seed, static_cast<uint64_t>(epoch));
    for (int i = count - 1; i > 0; --i) {
        int j = static_cast<int>(rng.below(static_cast<uint32_t>(i + 1)));
        std::swap(order[static_cast<size_t>(i)], order[static_cast<size_t>(j)]);
    }
    return order;
}

BatchIter::BatchIter(const Dataset& ds, int batch_size, uint64_t seed, int64_t epoch)
    : ds_(ds), batch_size_(batch_size) {
    check_dataset(ds, "batch_iter");
    if (ds.count() == 0) throw std::runtime_error("batch_iter: empty dataset");
    if (batch_size < 1) throw std::runtime_error("batch_iter: batch_size must be >= 1");
    order_ = epoch_permutation(ds.count(), seed, epoch);
}

bool BatchIter::next(Tensor& images, std::vector<int>& labels) {
    if (pos_ >= order_.size()) return false;
    size_t n = std::min(static_cast<size_t>(batch_size_), order_.size() - pos_);
    images = Tensor({static_cast<int>(n), ds_.images.dim(1), ds_.images.dim(2),
                     ds_.images.dim(3)});
    labels.clear();
    const int64_t per = ds_.images.numel() / ds_.count();
    for (size_t k = 0; k < n; ++k) {
        int src = order_[pos_ + k];
        std::copy(ds_.images.data.begin() + src * per, ds_.images.data.begin() + (src + 1) * per,
                  images.data.begin() + static_cast<int64_t>(k) * per);
        labels.push_back(ds_.labels[static_cast<size_t>(src)]);
    }
    pos_ += n;
    return true;
}

}  // namespace admmprune
