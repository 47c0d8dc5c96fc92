#pragma once

#include <array>
#include <cstdint>
#include <memory>

#include "rolllab/common.hpp"

namespace rolllab::mech {

// Seeded, periodic (period 8) gradient noise on a 2D lattice. Vanishes exactly
// at integer lattice points.
class PerlinNoise {
public:
    explicit PerlinNoise(std::uint64_t seed);
    double sample(double u, double v) const;

private:
    std::array<int, 256> perm_;
};

enum class SurfaceKind { hemispherical_bowl, ellipsoidal_bowl, heightfield, flat };

struct WindowTransform {
    double offset_x = 0;
    double offset_y = 0;
    double rotation = 0;
};

// Terrain queryable as a height graph z = f(x,y) with an upward unit normal.
// Bowls are the bottom half of the ellipsoid x^2/a^2 + y^2 + (z-1)^2 = 1 with
// the lowest point at the origin; outside the footprint the height continues
// flat at rim level so queries stay finite.
class SurfaceModel {
public:
    static SurfaceModel bowl(double a, double z_rotation);
    static SurfaceModel heightfield(std::uint64_t seed, double noise_scale,
                                    WindowTransform window);
    static SurfaceModel flat();

    double height(double x, double y) const;
    bool in_footprint(double x, double y) const;
    // upward unit normal from central height differences at step 1e-5
    Vec3 normal(double x, double y) const;

    // Closest surface point to an arbitrary 3D point and the signed distance
    // along the surface normal (positive above the surface).
    struct Closest {
        Vec3 point;
        Vec3 normal;
        double distance;
    };
    Closest closest(const Vec3& p) const;

    // radial coordinate sqrt(x'^2/a^2 + y'^2) in the unrotated bowl frame
    // (1 on the rim); only meaningful for bowls
    double bowl_radial(double x, double y) const;

    SurfaceKind kind = SurfaceKind::flat;
    double a = 1.0;               // bowl x-axis ratio
    double z_rotation = 0.0;      // bowl rotation around z
    std::uint64_t noise_seed = 0; // heightfield
    double noise_scale = 0.7;     // heightfield feature wavelength
    double amplitude = 0.25;      // heightfield displacement amplitude
    WindowTransform window;

private:
    std::shared_ptr<PerlinNoise> noise_;
};

}  // namespace rolllab::mech
