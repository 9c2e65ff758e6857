// Times the serial reference kernels against the OpenMP ones on a few
// conv/fc shapes and prints a speedup column. The two backends compute
// bit-identical results, so this is purely a scheduling comparison.
#include <chrono>
#include <cstdio>
#include <functional>
#include <vector>

#include <omp.h>

#include "admmprune/kernels.hpp"
#include "admmprune/rng.hpp"
#include "admmprune/tensor.hpp"

using namespace admmprune;
using namespace admmprune::kernels;

namespace {

Tensor random_tensor(std::vector<int> shape, Pcg32& rng) {
    Tensor t(std::move(shape));
    for (int64_t i = 0; i < t.numel(); ++i) t[i] = static_cast<float>(rng.uniform(-1.0, 1.0));
    return t;
}

double time_ms(const std::function<void()>& fn, int reps) {
    fn();  // warm up
    auto t0 = std::chrono::steady_clock::now();
    for (int r = 0; r < reps; ++r) fn();
    auto t1 = std::chrono::steady_clock::now();
    return std::chrono::duration<double, std::milli>(t1 - t0).count() / reps;
}

void row(const char* name, double ref_ms, double omp_ms) {
    std::printf("%-28s %10.3f %10.3f %8.2fx\n", name, ref_ms, omp_ms, ref_ms / omp_ms);
}

}  // namespace

int main(int argc, char** argv) {
    int reps = argc > 1 ? std::atoi(argv[1]) : 5;
    std::printf("threads: %d, reps per timing: %d\n", omp_get_max_threads(), reps);
    std::printf("%-28s %10s %10s %9s\n", "kernel", "ref ms", "omp ms", "speedup");

    Pcg32 rng(7, 0);
    const int B = 32;

    // conv 3x3, 16 -> 32 maps on 32x32, same padding
    Tensor cin = random_tensor({B, 16, 32, 32}, rng);
    Tensor cw = random_tensor({32, 16, 3, 3}, rng);
    Tensor cb = random_tensor({32}, rng);
    ConvShape cs = conv_output_shape(32, 32, 3, 3, 1, true);
    Tensor cout({B, 32, cs.out_h, cs.out_w});
    row("conv2d_forward",
        time_ms([&] { ref::conv2d_forward(cin, cw, cb, 1, true, cout); }, reps),
        time_ms([&] { omp::conv2d_forward(cin, cw, cb, 1, true, cout); }, reps));

    Tensor gout = random_tensor({B, 32, cs.out_h, cs.out_w}, rng);
    Tensor gin({B, 16, 32, 32});
    row("conv2d_backward_data",
        time_ms([&] { ref::conv2d_backward_data(gout, cw, 32, 32, 1, true, gin); }, reps),
        time_ms([&] { omp::conv2d_backward_data(gout, cw, 32, 32, 1, true, gin); }, reps));

    Tensor gw({32, 16, 3, 3}), gb({32});
    row("conv2d_backward_filter",
        time_ms([&] { ref::conv2d_backward_filter(gout, cin, 3, 3, 1, true, gw, gb); }, reps),
        time_ms([&] { omp::conv2d_backward_filter(gout, cin, 3, 3, 1, true, gw, gb); }, reps));

    // fc 4096 -> 256
    Tensor fin = random_tensor({B, 4096}, rng);
    Tensor fw = random_tensor({256, 4096}, rng);
    Tensor fb = random_tensor({256}, rng);
    Tensor fout({B, 256});
    row("fc_forward", time_ms([&] { ref::fc_forward(fin, fw, fb, fout); }, reps),
        time_ms([&] { omp::fc_forward(fin, fw, fb, fout); }, reps));

    Tensor fgout = random_tensor({B, 256}, rng);
    Tensor fgin({B, 4096});
    row("fc_backward_data", time_ms([&] { ref::fc_backward_data(fgout, fw, fgin); }, reps),
        time_ms([&] { omp::fc_backward_data(fgout, fw, fgin); }, reps));

    Tensor fgw({256, 4096}), fgb({256});
    row("fc_backward_filter",
        time_ms([&] { ref::fc_backward_filter(fgout, fin, fgw, fgb); }, reps),
        time_ms([&] { omp::fc_backward_filter(fgout, fin, fgw, fgb); }, reps));

    return 0;
}
