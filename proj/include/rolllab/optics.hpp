#pragma once

#include <string>
#include <vector>

#include "rolllab/mechanics.hpp"

namespace rolllab::optics {

using mech::BallState;
using mech::SurfaceModel;

// Orthographic top-down camera: (p_x, p_y, p_z) projects affinely in (p_x,
// p_y) only, independent of depth.
struct Camera {
    double center_z = 2.0;
    int image_size = 64;
    double world_window = 2.5;  // side length of the visible square

    Vec2 project(const Vec3& p) const {
        double s = double(image_size);
        return {(p.x / world_window + 0.5) * s, (0.5 - p.y / world_window) * s};
    }
};

struct Image {
    int width = 0, height = 0;
    std::vector<unsigned char> rgb;  // height x width x 3

    unsigned char* pixel(int y, int x) { return rgb.data() + size_t((y * width + x) * 3); }
    const unsigned char* pixel(int y, int x) const {
        return rgb.data() + size_t((y * width + x) * 3);
    }
};

enum class LightKind { ambient_only, ambient_plus_point };

struct LightSpec {
    LightKind kind = LightKind::ambient_only;
    Vec3 position{0, 0, 2};

    // heightfield light placement: x,y ~ (2B(0.5)-1)(U[1,1.5] x U[1,1.5]), z=2
    static LightSpec sample_heightfield(Rng& rng) {
        LightSpec l;
        l.kind = LightKind::ambient_plus_point;
        l.position = {rng.sign() * rng.uniform(1.0, 1.5), rng.sign() * rng.uniform(1.0, 1.5),
                      2.0};
        return l;
    }
};

Image render_frame(const SurfaceModel& surface, const std::vector<BallState>& balls,
                   const LightSpec& light, const Camera& camera, bool ball_textured);

void write_png(const std::string& path, const Image& img);

}  // namespace rolllab::optics
