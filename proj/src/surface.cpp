#include "rolllab/surface.hpp"

#include <cmath>
#include <memory>

namespace rolllab::mech {

namespace {

constexpr int kPeriod = 8;
constexpr double kNormalStep = 1e-5;

double fade(double t) { return t * t * t * (t * (t * 6 - 15) + 10); }

// 8 gradient directions (axis and diagonal)
double grad2(int hash, double dx, double dy) {
    switch (hash & 7) {
        case 0: return dx + dy;
        case 1: return -dx + dy;
        case 2: return dx - dy;
        case 3: return -dx - dy;
        case 4: return dx;
        case 5: return -dx;
        case 6: return dy;
        default: return -dy;
    }
}

}  // namespace

PerlinNoise::PerlinNoise(std::uint64_t seed) {
    for (int i = 0; i < 256; i++) perm_[size_t(i)] = i;
    Rng rng(seed);
    for (int i = 255; i > 0; i--) {
        int j = int(rng.below(std::uint64_t(i) + 1));
        std::swap(perm_[size_t(i)], perm_[size_t(j)]);
    }
}

double PerlinNoise::sample(double u, double v) const {
    double fu = std::floor(u), fv = std::floor(v);
    int iu = int(fu), iv = int(fv);
    double du = u - fu, dv = v - fv;
    auto wrap = [](int i) { return ((i % kPeriod) + kPeriod) % kPeriod; };
    auto hash = [&](int x, int y) {
        return perm_[size_t((perm_[size_t(wrap(x))] + wrap(y)) & 255)];
    };
    double n00 = grad2(hash(iu, iv), du, dv);
    double n10 = grad2(hash(iu + 1, iv), du - 1, dv);
    double n01 = grad2(hash(iu, iv + 1), du, dv - 1);
    double n11 = grad2(hash(iu + 1, iv + 1), du - 1, dv - 1);
    double su = fade(du), sv = fade(dv);
    double nx0 = n00 + su * (n10 - n00);
    double nx1 = n01 + su * (n11 - n01);
    return nx0 + sv * (nx1 - nx0);
}

SurfaceModel SurfaceModel::bowl(double a, double z_rotation) {
    if (a < 0.5 || a > 1.0)
        fail(Error::Kind::domain, "bowl axis ratio must be in [0.5, 1]");
    SurfaceModel s;
    s.kind = a == 1.0 && z_rotation == 0.0 ? SurfaceKind::hemispherical_bowl
                                           : SurfaceKind::ellipsoidal_bowl;
    s.a = a;
    s.z_rotation = z_rotation;
    return s;
}

SurfaceModel SurfaceModel::heightfield(std::uint64_t seed, double noise_scale,
                                       WindowTransform window) {
    if (noise_scale < 0.2 || noise_scale > 0.7)
        fail(Error::Kind::domain, "heightfield noise_scale must be in [0.2, 0.7]");
    SurfaceModel s;
    s.kind = SurfaceKind::heightfield;
    s.noise_seed = seed;
    s.noise_scale = noise_scale;
    s.window = window;
    s.noise_ = std::make_shared<PerlinNoise>(seed);
    return s;
}

SurfaceModel SurfaceModel::flat() {
    SurfaceModel s;
    s.kind = SurfaceKind::flat;
    return s;
}

double SurfaceModel::bowl_radial(double x, double y) const {
    double c = std::cos(-z_rotation), s = std::sin(-z_rotation);
    double xr = c * x - s * y, yr = s * x + c * y;
    return std::sqrt(xr * xr / (a * a) + yr * yr);
}

double SurfaceModel::height(double x, double y) const {
    switch (kind) {
        case SurfaceKind::flat:
            return 0.0;
        case SurfaceKind::hemispherical_bowl:
        case SurfaceKind::ellipsoidal_bowl: {
            double r = bowl_radial(x, y);
            double rad = 1.0 - r * r;
            if (rad <= 0) return 1.0;  // flat continuation at rim level
            return 1.0 - std::sqrt(rad);
        }
        case SurfaceKind::heightfield: {
            double c = std::cos(window.rotation), s = std::sin(window.rotation);
            double u = c * x - s * y + window.offset_x;
            double v = s * x + c * y + window.offset_y;
            return amplitude * noise_->sample(u / noise_scale, v / noise_scale);
        }
    }
    return 0.0;
}

bool SurfaceModel::in_footprint(double x, double y) const {
    if (kind == SurfaceKind::hemispherical_bowl || kind == SurfaceKind::ellipsoidal_bowl)
        return bowl_radial(x, y) <= 1.0;
    return true;
}

Vec3 SurfaceModel::normal(double x, double y) const {
    double dfdx = (height(x + kNormalStep, y) - height(x - kNormalStep, y)) / (2 * kNormalStep);
    double dfdy = (height(x, y + kNormalStep) - height(x, y - kNormalStep)) / (2 * kNormalStep);
    return Vec3{-dfdx, -dfdy, 1.0}.normalized();
}

SurfaceModel::Closest SurfaceModel::closest(const Vec3& p) const {
    double u = p.x, v = p.y;
    // walk the foot point tangentially until the offset vector is parallel to
    // the surface normal
    for (int it = 0; it < 60; it++) {
        Vec3 sp{u, v, height(u, v)};
        Vec3 n = normal(u, v);
        Vec3 d = p - sp;
        Vec3 dt = d - n * d.dot(n);
        u += dt.x;
        v += dt.y;
        if (dt.norm() < 1e-13) break;
    }
    Closest c;
    c.point = Vec3{u, v, height(u, v)};
    c.normal = normal(u, v);
    c.distance = (p - c.point).dot(c.normal);
    return c;
}

}  // namespace rolllab::mech
