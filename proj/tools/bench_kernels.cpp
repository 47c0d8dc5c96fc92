// Compares the serial reference kernels against the OpenMP ones.
// Usage: bench_kernels [reps]

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <vector>

#include "rolllab/common.hpp"
#include "rolllab/kernels.hpp"

using namespace rolllab;
namespace k = rolllab::kernels;

namespace {

double seconds_of(const std::function<void()>& fn, int reps) {
    auto t0 = std::chrono::steady_clock::now();
    for (int i = 0; i < reps; i++) fn();
    auto t1 = std::chrono::steady_clock::now();
    return std::chrono::duration<double>(t1 - t0).count() / reps;
}

}  // namespace

int main(int argc, char** argv) {
    int reps = argc > 1 ? std::atoi(argv[1]) : 20;
    Rng rng(7);

    struct Case { int H, W, Cin, Cout; };
    for (Case c : {Case{8, 8, 64, 64}, Case{8, 8, 32, 256}, Case{64, 64, 12, 16}}) {
        std::vector<double> in(size_t(c.H * c.W * c.Cin)), kk(size_t(9 * c.Cin * c.Cout)),
            bias(size_t(c.Cout)), out(size_t(c.H * c.W * c.Cout));
        for (auto* v : {&in, &kk, &bias})
            for (double& x : *v) x = rng.uniform(-1, 1);

        double ts = seconds_of([&] {
            k::conv2d_forward_serial(in.data(), kk.data(), bias.data(), out.data(),
                                     c.H, c.W, c.Cin, c.Cout);
        }, reps);
        double tp = seconds_of([&] {
            k::conv2d_forward_omp(in.data(), kk.data(), bias.data(), out.data(),
                                  c.H, c.W, c.Cin, c.Cout);
        }, reps);
        double gflop = 2.0 * 9 * c.H * c.W * c.Cin * c.Cout * 1e-9;
        std::printf("conv2d %dx%dx%d->%d  serial %.3f ms (%.2f GFLOP/s)  omp %.3f ms (%.2f GFLOP/s)  speedup %.2fx\n",
                    c.H, c.W, c.Cin, c.Cout, ts * 1e3, gflop / ts, tp * 1e3, gflop / tp,
                    ts / tp);
    }
    return 0;
}
