#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "rolllab/common.hpp"
#include "rolllab/kernels.hpp"

using namespace rolllab;
namespace k = rolllab::kernels;

namespace {

std::vector<double> randv(size_t n, Rng& rng) {
    std::vector<double> v(n);
    for (double& x : v) x = rng.uniform(-1, 1);
    return v;
}

void expect_close(const std::vector<double>& a, const std::vector<double>& b,
                  double tol = 1e-12) {
    REQUIRE(a.size() == b.size());
    for (size_t i = 0; i < a.size(); i++) CHECK(std::fabs(a[i] - b[i]) < tol);
}

}  // namespace

TEST_CASE("conv2d omp kernel agrees with the serial reference") {
    Rng rng(1);
    const int H = 9, W = 7, Cin = 5, Cout = 6;
    auto in = randv(size_t(H * W * Cin), rng);
    auto kk = randv(size_t(9 * Cin * Cout), rng);
    auto bias = randv(size_t(Cout), rng);

    std::vector<double> out_s(size_t(H * W * Cout)), out_p(out_s.size());
    k::conv2d_forward_serial(in.data(), kk.data(), bias.data(), out_s.data(), H, W, Cin, Cout);
    k::conv2d_forward_omp(in.data(), kk.data(), bias.data(), out_p.data(), H, W, Cin, Cout);
    expect_close(out_s, out_p);

    auto gout = randv(out_s.size(), rng);
    std::vector<double> gin_s(in.size(), 0), gk_s(kk.size(), 0), gb_s(bias.size(), 0);
    std::vector<double> gin_p(in.size(), 0), gk_p(kk.size(), 0), gb_p(bias.size(), 0);
    k::conv2d_backward_serial(in.data(), kk.data(), gout.data(), gin_s.data(), gk_s.data(),
                              gb_s.data(), H, W, Cin, Cout);
    k::conv2d_backward_omp(in.data(), kk.data(), gout.data(), gin_p.data(), gk_p.data(),
                           gb_p.data(), H, W, Cin, Cout);
    expect_close(gin_s, gin_p);
    expect_close(gk_s, gk_p);
    expect_close(gb_s, gb_p);
}

TEST_CASE("avgpool2 forward/backward definitions") {
    // 2x2 single channel: pooled value is the mean
    std::vector<double> in{1, 2, 3, 4};
    std::vector<double> out(1);
    k::avgpool2_forward(in.data(), out.data(), 2, 2, 1);
    CHECK(out[0] == 2.5);

    std::vector<double> gin(4, 0), gout{1.0};
    k::avgpool2_backward(gout.data(), gin.data(), 2, 2, 1);
    for (double g : gin) CHECK(g == 0.25);
}

TEST_CASE("affine kernels match naive loops") {
    Rng rng(2);
    const int N = 11, M = 7;
    auto x = randv(size_t(N), rng);
    auto w = randv(size_t(N * M), rng);
    auto b = randv(size_t(M), rng);
    std::vector<double> out(static_cast<size_t>(M));
    k::affine_forward(x.data(), w.data(), b.data(), out.data(), N, M);
    for (int m = 0; m < M; m++) {
        double acc = b[size_t(m)];
        for (int n = 0; n < N; n++) acc += x[size_t(n)] * w[size_t(n * M + m)];
        CHECK(std::fabs(out[size_t(m)] - acc) < 1e-12);
    }
}
