#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstring>

#include "admmprune/kernels.hpp"
#include "admmprune/network.hpp"
#include "oracles.hpp"

using namespace admmprune;

namespace {

template <typename T>
void randomize(NetworkT<T>& net, Pcg32& rng, double lo = -0.5, double hi = 0.5) {
    for (auto& p : net.params) {
        for (int64_t i = 0; i < p.weight.numel(); ++i)
            p.weight[i] = static_cast<T>(rng.uniform(lo, hi));
        for (int64_t i = 0; i < p.bias.numel(); ++i)
            p.bias[i] = static_cast<T>(rng.uniform(lo, hi));
    }
}

template <typename T>
TensorT<T> random_batch(int b, const NetworkSpec& s, Pcg32& rng) {
    TensorT<T> t({b, s.in_maps, s.in_h, s.in_w});
    for (int64_t i = 0; i < t.numel(); ++i) t[i] = static_cast<T>(rng.uniform(0.0, 1.0));
    return t;
}

}  // namespace

TEST_CASE("parse_arch builds the expected layer list") {
    NetworkSpec s = parse_arch("conv:3x3x8,relu,pool:2,conv:3x3x16,relu,pool:2,fc:2,softmax",
                               1, 16, 16);
    REQUIRE(s.layers.size() == 8);
    CHECK(s.layers[0].kind == LayerKind::conv2d);
    CHECK(s.layers[0].in_maps == 1);
    CHECK(s.layers[0].out_maps == 8);
    CHECK(s.layers[3].in_maps == 8);
    CHECK(s.layers[6].kind == LayerKind::fully_connected);
    CHECK(s.layers[6].in_size == 16 * 4 * 4);  // two pool:2 halvings of 16x16
    CHECK(s.layers[6].out_size == 2);
    CHECK(s.classes == 2);
    CHECK(total_weight_count(s) == 72 + 1152 + 512);

    NetworkSpec t = parse_arch("conv:3x3x4:s2:valid,relu,fc:3,softmax", 2, 9, 9);
    CHECK(t.layers[0].stride == 2);
    CHECK(t.layers[0].same_pad == false);
    CHECK(t.layers[2].in_size == 4 * 4 * 4);  // (9-3)/2+1 = 4

    CHECK_THROWS(parse_arch("conv:3x3x4,relu", 1, 8, 8));           // no softmax head
    CHECK_THROWS(parse_arch("fc:2,softmax,relu", 1, 2, 2));         // softmax not last
    CHECK_THROWS(parse_arch("wibble:3,softmax", 1, 8, 8));          // unknown layer
    CHECK_THROWS(parse_arch("conv:9x9x2:valid,fc:2,softmax", 1, 4, 4));  // kernel too big
    CHECK_THROWS(parse_arch("pool:5,fc:2,softmax", 1, 4, 4));       // window too big
}

TEST_CASE("all-zero weights give all-zero logits") {
    NetworkSpec s = parse_arch("conv:3x3x2,relu,fc:3,softmax", 1, 4, 4);
    Pcg32 rng(1, 0);
    Network net = build_network<float>(s, rng);
    for (auto& p : net.params) {
        p.weight.fill(0.0f);
        p.bias.fill(0.0f);
    }
    Tensor batch = random_batch<float>(2, s, rng);
    Tensor logits = forward(net, batch);
    for (int64_t i = 0; i < logits.numel(); ++i) CHECK(logits[i] == 0.0f);
}

TEST_CASE("forward matches a hand-composed oracle computation") {
    // conv 3x3 (1 -> 2 maps, same padding) then fc to 2 classes on 8x8 input
    NetworkSpec s = parse_arch("conv:3x3x2,fc:2,softmax", 1, 8, 8);
    Pcg32 rng(17, 0);
    NetworkT<double> net = build_network<double>(s, rng);
    randomize(net, rng);
    TensorT<double> batch = random_batch<double>(3, s, rng);
    TensorT<double> logits = forward(net, batch, Backend::serial);
    REQUIRE(logits.dim(0) == 3);
    REQUIRE(logits.dim(1) == 2);

    std::vector<double> x(batch.data.begin(), batch.data.end());
    std::vector<double> conv_out;
    oracle::naive_conv2d(x, 3, 1, 8, 8, std::vector<double>(net.params[0].weight.data.begin(),
                                                            net.params[0].weight.data.end()),
                         2, 3, 3,
                         std::vector<double>(net.params[0].bias.data.begin(),
                                             net.params[0].bias.data.end()),
                         1, 1, 1, 8, 8, conv_out);
    const auto& fw = net.params[1].weight;  // [2, 128]
    const auto& fb = net.params[1].bias;
    for (int b = 0; b < 3; ++b)
        for (int c = 0; c < 2; ++c) {
            double want = fb[c];
            for (int i = 0; i < 128; ++i) want += conv_out[b * 128 + i] * fw[c * 128 + i];
            CHECK(logits[b * 2 + c] == doctest::Approx(want).epsilon(1e-12));
        }
}

TEST_CASE("equal logits give ln(classes) loss") {
    NetworkSpec s = parse_arch("fc:2,softmax", 1, 2, 2);
    Pcg32 rng(2, 0);
    Network net = build_network<float>(s, rng);
    for (auto& p : net.params) {
        p.weight.fill(0.0f);
        p.bias.fill(0.0f);
    }
    Tensor batch = random_batch<float>(4, s, rng);
    std::vector<int> labels = {0, 1, 0, 1};
    Grads g;
    double loss = loss_and_grad(net, batch, labels, g);
    CHECK(loss == doctest::Approx(std::log(2.0)).epsilon(1e-7));

    std::vector<int> bad = {0, 2, 0, 1};
    CHECK_THROWS(loss_and_grad(net, batch, bad, g));
}

TEST_CASE("duplicating the batch leaves loss and grads unchanged") {
    NetworkSpec s = parse_arch("conv:3x3x2,relu,pool:2,fc:2,softmax", 1, 6, 6);
    Pcg32 rng(3, 0);
    NetworkT<double> net = build_network<double>(s, rng);
    TensorT<double> batch = random_batch<double>(4, s, rng);
    std::vector<int> labels = {0, 1, 1, 0};

    TensorT<double> batch2({8, 1, 6, 6});
    std::copy(batch.data.begin(), batch.data.end(), batch2.data.begin());
    std::copy(batch.data.begin(), batch.data.end(), batch2.data.begin() + batch.numel());
    std::vector<int> labels2 = {0, 1, 1, 0, 0, 1, 1, 0};

    GradsT<double> g1, g2;
    double l1 = loss_and_grad(net, batch, labels, g1);
    double l2 = loss_and_grad(net, batch2, labels2, g2);
    CHECK(l1 == doctest::Approx(l2).epsilon(1e-12));
    for (size_t p = 0; p < g1.weight.size(); ++p)
        for (int64_t i = 0; i < g1.weight[p].numel(); ++i)
            CHECK(g1.weight[p][i] == doctest::Approx(g2.weight[p][i]).epsilon(1e-12));
}

TEST_CASE("loss gradients match central finite differences") {
    // step 1e-3 per the gradient-check tolerance; double weights keep the
    // difference quotient clean
    NetworkSpec s = parse_arch("conv:3x3x2,relu,pool:2,fc:3,softmax", 1, 6, 6);
    Pcg32 rng(19, 0);
    NetworkT<double> net = build_network<double>(s, rng);
    TensorT<double> batch = random_batch<double>(3, s, rng);
    std::vector<int> labels = {0, 2, 1};
    GradsT<double> g;
    loss_and_grad(net, batch, labels, g, Backend::serial);

    const double h = 1e-3;
    double worst = 0.0;
    for (size_t p = 0; p < net.params.size(); ++p) {
        for (int64_t i = 0; i < net.params[p].weight.numel(); ++i) {
            NetworkT<double> np = net, nm = net;
            np.params[p].weight[i] += h;
            nm.params[p].weight[i] -= h;
            GradsT<double> scratch;
            double fp = loss_and_grad(np, batch, labels, scratch, Backend::serial);
            double fm = loss_and_grad(nm, batch, labels, scratch, Backend::serial);
            double fd = (fp - fm) / (2.0 * h);
            double a = g.weight[p][i];
            double rel = std::fabs(a - fd) / std::max({std::fabs(a), std::fabs(fd), 1e-3});
            worst = std::max(worst, rel);
        }
        for (int64_t i = 0; i < net.params[p].bias.numel(); ++i) {
            NetworkT<double> np = net, nm = net;
            np.params[p].bias[i] += h;
            nm.params[p].bias[i] -= h;
            GradsT<double> scratch;
            double fp = loss_and_grad(np, batch, labels, scratch, Backend::serial);
            double fm = loss_and_grad(nm, batch, labels, scratch, Backend::serial);
            double fd = (fp - fm) / (2.0 * h);
            double a = g.bias[p][i];
            double rel = std::fabs(a - fd) / std::max({std::fabs(a), std::fabs(fd), 1e-3});
            worst = std::max(worst, rel);
        }
    }
    CHECK(worst < 1e-4);
}

TEST_CASE("sgd_prox_step hand case and rho=0 equivalence") {
    NetworkSpec s = parse_arch("fc:1,softmax", 1, 1, 1);
    Pcg32 rng(4, 0);
    Network net = build_network<float>(s, rng);
    net.params[0].weight[0] = 2.0f;
    net.params[0].bias[0] = 0.0f;

    Grads g;
    g.weight.push_back(Tensor({1, 1}));
    g.weight[0][0] = 0.5f;
    g.bias.push_back(Tensor({1}));
    g.bias[0][0] = 0.0f;

    std::vector<Tensor> u(1);
    u[0] = Tensor({1, 1});
    u[0][0] = 1.0f;

    // w' = 2 - 0.1*(0.5 + 2*(2 - 1)) = 1.75
    Network n1 = net;
    sgd_prox_step(n1, g, u, 2.0, 0.1);
    CHECK(n1.params[0].weight[0] == doctest::Approx(1.75).epsilon(1e-7));

    // rho = 0 must equal the plain SGD step regardless of u
    Network n2 = net, n3 = net;
    sgd_prox_step(n2, g, u, 0.0, 0.1);
    std::vector<Tensor> no_u(1);
    sgd_prox_step(n3, g, no_u, 0.0, 0.1);
    CHECK(n2.params[0].weight[0] == n3.params[0].weight[0]);
    CHECK(n2.params[0].weight[0] == doctest::Approx(1.95).epsilon(1e-7));

    // grads = 0, lr = 1, rho = 1 lands exactly on u
    Network n4 = net;
    g.weight[0][0] = 0.0f;
    sgd_prox_step(n4, g, u, 1.0, 1.0);
    CHECK(n4.params[0].weight[0] == 1.0f);

    g.weight[0][0] = std::numeric_limits<float>::quiet_NaN();
    Network n5 = net;
    CHECK_THROWS(sgd_prox_step(n5, g, u, 1.0, 0.1));
    CHECK(n5.params[0].weight[0] == 2.0f);  // untouched on error
}

TEST_CASE("full-batch descent and proximal pull") {
    NetworkSpec s = parse_arch("conv:3x3x2,relu,pool:2,fc:2,softmax", 1, 6, 6);
    Pcg32 rng(21, 0);
    Network net = build_network<float>(s, rng);
    Tensor batch = random_batch<float>(8, s, rng);
    std::vector<int> labels = {0, 1, 0, 1, 1, 0, 1, 0};

    Grads g;
    std::vector<Tensor> no_u(net.params.size());
    double prev = loss_and_grad(net, batch, labels, g);
    for (int step = 0; step < 50; ++step) {
        sgd_prox_step(net, g, no_u, 0.0, 1e-2);
        double cur = loss_and_grad(net, batch, labels, g);
        CHECK(cur <= prev + 1e-12);
        prev = cur;
    }

    // zero grads, lr*rho < 2: distance to U strictly shrinks each step
    std::vector<Tensor> u;
    for (auto& p : net.params) {
        Tensor t(p.weight.shape);
        t.fill(0.25f);
        u.push_back(std::move(t));
    }
    Grads zg;
    zg.weight.clear();
    zg.bias.clear();
    for (auto& p : net.params) {
        zg.weight.push_back(zeros_like(p.weight));
        zg.bias.push_back(zeros_like(p.bias));
    }
    auto dist_to_u = [&]() {
        double sq = 0.0;
        for (size_t i = 0; i < net.params.size(); ++i) {
            double d = frob_dist(net.params[i].weight, u[i]);
            sq += d * d;
        }
        return std::sqrt(sq);
    };
    double d_prev = dist_to_u();
    for (int step = 0; step < 20; ++step) {
        sgd_prox_step(net, zg, u, 1.0, 0.5);
        double d = dist_to_u();
        CHECK(d < d_prev);
        d_prev = d;
    }
}

TEST_CASE("momentum accumulates velocity") {
    NetworkSpec s = parse_arch("fc:1,softmax", 1, 1, 1);
    Pcg32 rng(6, 0);
    Network net = build_network<float>(s, rng);
    net.params[0].weight[0] = 1.0f;
    net.params[0].bias[0] = 0.0f;
    Grads g;
    g.weight.push_back(Tensor({1, 1}));
    g.weight[0][0] = 1.0f;
    g.bias.push_back(Tensor({1}));
    g.bias[0][0] = 0.0f;
    std::vector<Tensor> no_u(1);

    SgdState st;
    sgd_prox_step(net, g, no_u, 0.0, 0.1, 0.9, st);
    CHECK(net.params[0].weight[0] == doctest::Approx(0.9).epsilon(1e-7));
    sgd_prox_step(net, g, no_u, 0.0, 0.1, 0.9, st);
    // velocity: 1, then 0.9*1 + 1 = 1.9; w = 0.9 - 0.19
    CHECK(net.params[0].weight[0] == doctest::Approx(0.71).epsilon(1e-6));
}

TEST_CASE("apply_mask zeroes blocks and training keeps them at zero") {
    NetworkSpec s = parse_arch("conv:3x3x3,relu,pool:2,fc:2,softmax", 1, 6, 6);
    Pcg32 rng(8, 0);
    Network net = build_network<float>(s, rng);

    Network same = apply_mask(net, Mask{});
    for (size_t p = 0; p < net.params.size(); ++p)
        CHECK(std::memcmp(same.params[p].weight.data.data(), net.params[p].weight.data.data(),
                          sizeof(float) * net.params[p].weight.numel()) == 0);

    Mask mask;
    mask.pruned.insert({0, 0, 1});  // second conv filter
    mask.pruned.insert({3, 0, 0});  // first fc output unit
    Network pruned = apply_mask(net, mask);
    for (int64_t i = 9; i < 18; ++i) CHECK(pruned.params[0].weight[i] == 0.0f);
    // unpruned weights bit-identical
    for (int64_t i = 0; i < 9; ++i)
        CHECK(pruned.params[0].weight[i] == net.params[0].weight[i]);

    Tensor batch = random_batch<float>(6, s, rng);
    std::vector<int> labels = {0, 1, 1, 0, 1, 0};
    Grads g;
    std::vector<Tensor> no_u(net.params.size());
    for (int step = 0; step < 100; ++step) {
        loss_and_grad(pruned, batch, labels, g);
        sgd_prox_step(pruned, g, no_u, 0.0, 1e-2);
    }
    for (int64_t i = 9; i < 18; ++i) CHECK(pruned.params[0].weight[i] == 0.0f);
    const auto& fw = pruned.params[1].weight;
    for (int64_t i = 0; i < fw.dim(1); ++i) CHECK(fw[i] == 0.0f);
    // and the unmasked parts did move
    CHECK(frob_dist(pruned.params[0].weight, net.params[0].weight) > 0.0);

    Mask bad;
    bad.pruned.insert({0, 0, 99});
    CHECK_THROWS(apply_mask(net, bad));
}

TEST_CASE("masking a whole conv layer zeroes its weight tensor") {
    NetworkSpec s = parse_arch("conv:3x3x2,fc:2,softmax", 2, 4, 4);
    Pcg32 rng(9, 0);
    Network net = build_network<float>(s, rng);
    Mask mask;
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j) mask.pruned.insert({0, i, j});
    Network pruned = apply_mask(net, mask);
    for (int64_t i = 0; i < pruned.params[0].weight.numel(); ++i)
        CHECK(pruned.params[0].weight[i] == 0.0f);
}

TEST_CASE("serial and parallel backends produce bit-identical training") {
    NetworkSpec s = parse_arch("conv:3x3x4,relu,pool:2,fc:2,softmax", 1, 8, 8);
    Pcg32 r1(42, 0), r2(42, 0);
    Network n1 = build_network<float>(s, r1);
    Network n2 = build_network<float>(s, r2);
    Pcg32 rd(5, 1);
    Tensor batch = random_batch<float>(10, s, rd);
    std::vector<int> labels = {0, 1, 1, 0, 0, 1, 0, 1, 1, 0};

    Grads g1, g2;
    std::vector<Tensor> no_u(n1.params.size());
    for (int step = 0; step < 10; ++step) {
        double l1 = loss_and_grad(n1, batch, labels, g1, Backend::serial);
        double l2 = loss_and_grad(n2, batch, labels, g2, Backend::parallel);
        CHECK(l1 == l2);
        sgd_prox_step(n1, g1, no_u, 0.0, 1e-2);
        sgd_prox_step(n2, g2, no_u, 0.0, 1e-2);
    }
    for (size_t p = 0; p < n1.params.size(); ++p) {
        CHECK(std::memcmp(n1.params[p].weight.data.data(), n2.params[p].weight.data.data(),
                          sizeof(float) * n1.params[p].weight.numel()) == 0);
        CHECK(std::memcmp(n1.params[p].bias.data.data(), n2.params[p].bias.data.data(),
                          sizeof(float) * n1.params[p].bias.numel()) == 0);
    }
}

TEST_CASE("build_network is deterministic in the seed") {
    NetworkSpec s = parse_arch("conv:3x3x2,fc:2,softmax", 1, 4, 4);
    Pcg32 ra(7, 0), rb(7, 0), rc(8, 0);
    Network a = build_network<float>(s, ra);
    Network b = build_network<float>(s, rb);
    Network c = build_network<float>(s, rc);
    CHECK(std::memcmp(a.params[0].weight.data.data(), b.params[0].weight.data.data(),
                      sizeof(float) * a.params[0].weight.numel()) == 0);
    CHECK(std::memcmp(a.params[0].weight.data.data(), c.params[0].weight.data.data(),
                      sizeof(float) * a.params[0].weight.numel()) != 0);
    for (auto& p : a.params)
        for (int64_t i = 0; i < p.bias.numel(); ++i) CHECK(p.bias[i] == 0.0f);
}

TEST_CASE("predict breaks ties toward the lowest class") {
    NetworkSpec s = parse_arch("fc:3,softmax", 1, 1, 1);
    Pcg32 rng(10, 0);
    Network net = build_network<float>(s, rng);
    net.params[0].weight.fill(0.0f);
    net.params[0].bias.fill(0.0f);
    Tensor images({2, 1, 1, 1});
    images[0] = 0.3f;
    images[1] = 0.7f;
    std::vector<int> got = predict(net, images);
    CHECK(got == std::vector<int>{0, 0});

    std::vector<int> labels = {0, 1};
    CHECK(evaluate_accuracy(net, images, labels) == doctest::Approx(50.0));
}

TEST_CASE("mac_counts hand cases") {
    // conv 3x3, m=2, n=4, same padding, 8x8 input: 8*8*3*3*2*4
    NetworkSpec s = parse_arch("conv:3x3x4,fc:2,softmax", 2, 8, 8);
    auto [dense, sparse] = mac_counts(s, 2, 8, 8, Mask{});
    int64_t conv_macs = 8 * 8 * 3 * 3 * 2 * 4;
    int64_t fc_macs = 4 * 8 * 8 * 2;
    CHECK(dense == conv_macs + fc_macs);
    CHECK(sparse == dense);

    // fc 4 -> 2 (8 MACs), pruning one output block halves it
    NetworkSpec f = parse_arch("fc:2,softmax", 1, 2, 2);
    Mask one;
    one.pruned.insert({0, 0, 1});
    auto [fd, fs] = mac_counts(f, 1, 2, 2, one);
    CHECK(fd == 8);
    CHECK(fs == 4);
    CHECK(static_cast<double>(fd) / fs == doctest::Approx(2.0));
}

TEST_CASE("shape errors say what went wrong and where") {
    // spec-level errors name the offending layer
    try {
        parse_arch("conv:5x5x2:valid,fc:2,softmax", 1, 4, 4);
        FAIL("expected a layer error");
    } catch (const std::exception& e) {
        CHECK(std::string(e.what()).find("layer 0") != std::string::npos);
    }

    // batch-level errors report both shapes
    NetworkSpec s = parse_arch("conv:3x3x2,fc:2,softmax", 1, 4, 4);
    Pcg32 rng(12, 0);
    Network net = build_network<float>(s, rng);
    Tensor wrong({2, 3, 4, 4});  // 3 maps instead of 1
    try {
        forward(net, wrong);
        FAIL("expected a shape error");
    } catch (const std::exception& e) {
        CHECK(std::string(e.what()).find("does not match network input") != std::string::npos);
    }
}
