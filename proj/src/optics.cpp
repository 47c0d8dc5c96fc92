#include "rolllab/optics.hpp"

#include <zlib.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

namespace rolllab::optics {

namespace {

struct Color {
    double r, g, b;
    Color operator*(double s) const { return {r * s, g * s, b * s}; }
};

// body-fixed octant palette for textured balls
const Color kOctants[8] = {
    {0.90, 0.10, 0.10}, {0.95, 0.85, 0.10}, {0.10, 0.75, 0.15}, {0.10, 0.80, 0.85},
    {0.15, 0.25, 0.90}, {0.85, 0.15, 0.85}, {0.95, 0.55, 0.10}, {0.92, 0.92, 0.92},
};

// plain ball colors in the fixed ordering red, green, blue
const Color kBallColors[3] = {{0.90, 0.12, 0.12}, {0.12, 0.80, 0.15}, {0.15, 0.25, 0.92}};

const Color kChecker[2] = {{0.85, 0.85, 0.80}, {0.20, 0.35, 0.40}};
const Color kSand{0.75, 0.68, 0.55};
const Color kBackground{0.12, 0.12, 0.14};

Color ball_albedo(const BallState& ball, const Vec3& n_sphere, bool textured) {
    if (!textured) return kBallColors[ball.color_index % 3];
    // rotate the surface direction into the body frame (R^T n)
    auto m = mech::euler_to_matrix(ball.euler_orientation);
    Vec3 d{m[0] * n_sphere.x + m[3] * n_sphere.y + m[6] * n_sphere.z,
           m[1] * n_sphere.x + m[4] * n_sphere.y + m[7] * n_sphere.z,
           m[2] * n_sphere.x + m[5] * n_sphere.y + m[8] * n_sphere.z};
    int idx = (d.x >= 0 ? 1 : 0) | (d.y >= 0 ? 2 : 0) | (d.z >= 0 ? 4 : 0);
    return kOctants[idx];
}

Color bowl_albedo(const SurfaceModel& surface, double wx, double wy) {
    double c = std::cos(-surface.z_rotation), s = std::sin(-surface.z_rotation);
    double xr = c * wx - s * wy, yr = s * wx + c * wy;
    double u = xr / surface.a, v = yr;
    double r = std::clamp(std::sqrt(u * u + v * v), 0.0, 1.0);
    double az = std::atan2(v, u);
    double psi = std::asin(r);
    int checker = (int(std::floor(az / (M_PI / 6))) + int(std::floor(psi / (M_PI / 12)))) & 1;
    return kChecker[checker];
}

Color shade(const Color& albedo, const Vec3& n, const Vec3& p, const LightSpec& light) {
    if (light.kind == LightKind::ambient_only) {
        // fixed oblique direction so curvature reads in an ambient-lit scene
        static const Vec3 l0 = Vec3{0.3, 0.2, 1.0}.normalized();
        return albedo * (0.55 + 0.45 * std::max(0.0, n.dot(l0)));
    }
    Vec3 l = (light.position - p).normalized();
    return albedo * (0.2 + 0.9 * std::max(0.0, n.dot(l)));
}

unsigned char to_byte(double v) {
    return (unsigned char)std::lround(255.0 * std::clamp(v, 0.0, 1.0));
}

}  // namespace

Image render_frame(const SurfaceModel& surface, const std::vector<BallState>& balls,
                   const LightSpec& light, const Camera& camera, bool ball_textured) {
    Image img;
    img.width = img.height = camera.image_size;
    img.rgb.assign(size_t(img.width * img.height * 3), 0);
    const double ww = camera.world_window;
    const double s = double(camera.image_size);
    const bool bowl = surface.kind == mech::SurfaceKind::hemispherical_bowl ||
                      surface.kind == mech::SurfaceKind::ellipsoidal_bowl;

#pragma omp parallel for schedule(static)
    for (int y = 0; y < img.height; y++) {
        for (int x = 0; x < img.width; x++) {
            double wx = ((x + 0.5) / s - 0.5) * ww;
            double wy = (0.5 - (y + 0.5) / s) * ww;

            // nearest hit along the vertical ray (largest z wins)
            double best_z = -1e30;
            Color color = kBackground;
            bool hit = false;

            if (!bowl || surface.in_footprint(wx, wy)) {
                double tz = surface.height(wx, wy);
                Vec3 n = surface.normal(wx, wy);
                Color albedo = bowl ? bowl_albedo(surface, wx, wy) : kSand;
                color = shade(albedo, n, {wx, wy, tz}, light);
                best_z = tz;
                hit = true;
            }
            for (const auto& ball : balls) {
                double dx = wx - ball.position.x, dy = wy - ball.position.y;
                double r2 = ball.radius * ball.radius - dx * dx - dy * dy;
                if (r2 < 0) continue;
                double bz = ball.position.z + std::sqrt(r2);
                if (hit && bz <= best_z) continue;
                Vec3 n{dx / ball.radius, dy / ball.radius, std::sqrt(r2) / ball.radius};
                Color albedo = ball_albedo(ball, n, ball_textured);
                color = shade(albedo, n, {wx, wy, bz}, light);
                best_z = bz;
                hit = true;
            }

            unsigned char* px = img.pixel(y, x);
            px[0] = to_byte(color.r);
            px[1] = to_byte(color.g);
            px[2] = to_byte(color.b);
        }
    }
    return img;
}

void write_png(const std::string& path, const Image& img) {
    // raw rows with filter byte 0, zlib-compressed
    std::vector<unsigned char> raw;
    raw.reserve(size_t(img.height * (1 + img.width * 3)));
    for (int y = 0; y < img.height; y++) {
        raw.push_back(0);
        raw.insert(raw.end(), img.pixel(y, 0), img.pixel(y, 0) + img.width * 3);
    }
    uLongf comp_len = compressBound(uLong(raw.size()));
    std::vector<unsigned char> comp(comp_len);
    if (compress2(comp.data(), &comp_len, raw.data(), uLong(raw.size()), 9) != Z_OK)
        fail(Error::Kind::io, "png: zlib compression failed");
    comp.resize(comp_len);

    std::ofstream os(path, std::ios::binary);
    if (!os) fail(Error::Kind::io, "png: cannot open " + path);
    auto be32 = [](std::uint32_t v) {
        return std::array<unsigned char, 4>{(unsigned char)(v >> 24), (unsigned char)(v >> 16),
                                            (unsigned char)(v >> 8), (unsigned char)v};
    };
    auto chunk = [&](const char* type, const std::vector<unsigned char>& payload) {
        auto len = be32(std::uint32_t(payload.size()));
        os.write(reinterpret_cast<const char*>(len.data()), 4);
        std::vector<unsigned char> body(type, type + 4);
        body.insert(body.end(), payload.begin(), payload.end());
        os.write(reinterpret_cast<const char*>(body.data()), std::streamsize(body.size()));
        auto crc = be32(std::uint32_t(crc32(0, body.data(), uInt(body.size()))));
        os.write(reinterpret_cast<const char*>(crc.data()), 4);
    };
    static const unsigned char sig[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
    os.write(reinterpret_cast<const char*>(sig), 8);
    std::vector<unsigned char> ihdr;
    for (unsigned char c : be32(std::uint32_t(img.width))) ihdr.push_back(c);
    for (unsigned char c : be32(std::uint32_t(img.height))) ihdr.push_back(c);
    ihdr.push_back(8);  // bit depth
    ihdr.push_back(2);  // RGB
    ihdr.push_back(0);
    ihdr.push_back(0);
    ihdr.push_back(0);
    chunk("IHDR", ihdr);
    chunk("IDAT", comp);
    chunk("IEND", {});
    if (!os) fail(Error::Kind::io, "png: write failed for " + path);
}

}  // namespace rolllab::optics
