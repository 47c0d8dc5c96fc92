#pragma once

#include <vector>

#include "rolllab/common.hpp"

namespace rolllab::baselines {

// Least-squares polynomial over integer frame indices 0..n-1, one coefficient
// set per output coordinate.
struct PolyFit {
    int degree = 1;                            // 1 or 2
    std::vector<std::vector<double>> coeffs;   // [coordinate][power]

    int dims() const { return int(coeffs.size()); }
};

PolyFit fit(const std::vector<std::vector<double>>& points, int degree);

inline PolyFit fit(const std::vector<Vec2>& points, int degree) {
    std::vector<std::vector<double>> rows;
    for (const auto& p : points) rows.push_back({p.x, p.y});
    return fit(rows, degree);
}

std::vector<double> extrapolate(const PolyFit& fit, double t);

inline Vec2 extrapolate2(const PolyFit& f, double t) {
    auto v = extrapolate(f, t);
    if (v.size() != 2) fail(Error::Kind::shape, "expected a 2D fit");
    return {v[0], v[1]};
}

}  // namespace rolllab::baselines
