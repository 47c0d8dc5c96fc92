#include "rolllab/baselines.hpp"

#include <cmath>

namespace rolllab::baselines {

namespace {

// solve the symmetric positive definite normal equations by Cholesky
std::vector<double> solve_spd(std::vector<double> a, std::vector<double> b, int n) {
    for (int i = 0; i < n; i++) {
        for (int j = 0; j <= i; j++) {
            double s = a[size_t(i * n + j)];
            for (int k = 0; k < j; k++) s -= a[size_t(i * n + k)] * a[size_t(j * n + k)];
            if (i == j) {
                if (s <= 0) fail(Error::Kind::numeric, "normal equations are singular");
                a[size_t(i * n + j)] = std::sqrt(s);
            } else {
                a[size_t(i * n + j)] = s / a[size_t(j * n + j)];
            }
        }
    }
    for (int i = 0; i < n; i++) {
        double s = b[size_t(i)];
        for (int k = 0; k < i; k++) s -= a[size_t(i * n + k)] * b[size_t(k)];
        b[size_t(i)] = s / a[size_t(i * n + i)];
    }
    for (int i = n - 1; i >= 0; i--) {
        double s = b[size_t(i)];
        for (int k = i + 1; k < n; k++) s -= a[size_t(k * n + i)] * b[size_t(k)];
        b[size_t(i)] = s / a[size_t(i * n + i)];
    }
    return b;
}

}  // namespace

PolyFit fit(const std::vector<std::vector<double>>& points, int degree) {
    if (degree != 1 && degree != 2)
        fail(Error::Kind::domain, "polynomial degree must be 1 or 2");
    int n_pts = int(points.size());
    int n_co = degree + 1;
    if (n_pts < n_co)
        fail(Error::Kind::domain, "need at least " + std::to_string(n_co) + " points");
    int dims = int(points[0].size());
    for (const auto& p : points)
        if (int(p.size()) != dims) fail(Error::Kind::shape, "inconsistent point dimensions");

    // X^T X and X^T y with X_{t,k} = t^k
    std::vector<double> xtx(size_t(n_co * n_co), 0.0);
    for (int t = 0; t < n_pts; t++)
        for (int i = 0; i < n_co; i++)
            for (int j = 0; j < n_co; j++)
                xtx[size_t(i * n_co + j)] += std::pow(double(t), i + j);

    PolyFit f;
    f.degree = degree;
    for (int d = 0; d < dims; d++) {
        std::vector<double> xty(size_t(n_co), 0.0);
        for (int t = 0; t < n_pts; t++)
            for (int i = 0; i < n_co; i++)
                xty[size_t(i)] += std::pow(double(t), i) * points[size_t(t)][size_t(d)];
        f.coeffs.push_back(solve_spd(xtx, xty, n_co));
    }
    return f;
}

std::vector<double> extrapolate(const PolyFit& fit, double t) {
    std::vector<double> out;
    for (const auto& c : fit.coeffs) {
        double v = 0, tp = 1;
        for (double coeff : c) {
            v += coeff * tp;
            tp *= t;
        }
        out.push_back(v);
    }
    return out;
}

}  // namespace rolllab::baselines
