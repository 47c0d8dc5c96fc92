#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <fstream>

#include "rolllab/optics.hpp"

using namespace rolllab;
using namespace rolllab::optics;

namespace {

Vec2 red_centroid(const Image& img) {
    double sx = 0, sy = 0, n = 0;
    for (int y = 0; y < img.height; y++)
        for (int x = 0; x < img.width; x++) {
            const unsigned char* px = img.pixel(y, x);
            if (px[0] > 150 && px[1] < 100 && px[2] < 100) {
                sx += x + 0.5;
                sy += y + 0.5;
                n += 1;
            }
        }
    REQUIRE(n > 0);
    return {sx / n, sy / n};
}

mech::BallState make_ball(Vec3 pos) {
    mech::BallState b;
    b.radius = 0.225;
    b.position = pos;
    return b;
}

}  // namespace

TEST_CASE("projection anchors") {
    Camera cam;
    Vec2 c = cam.project({0, 0, 0});
    CHECK(c.x == doctest::Approx(32.0).epsilon(1e-12));
    CHECK(c.y == doctest::Approx(32.0).epsilon(1e-12));
    // depth-independent
    Vec2 c2 = cam.project({0.7, -0.3, 1.9});
    Vec2 c3 = cam.project({0.7, -0.3, 0.0});
    CHECK(c2.x == c3.x);
    CHECK(c2.y == c3.y);
    // top-left world corner of the window maps to the image origin
    Vec2 tl = cam.project({-1.25, 1.25, 0});
    CHECK(tl.x == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(tl.y == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("ball centroid lands where the projection says") {
    auto flat = mech::SurfaceModel::flat();
    Camera cam;
    LightSpec light;

    auto img = render_frame(flat, {make_ball({0, 0, 0.225})}, light, cam, false);
    Vec2 c = red_centroid(img);
    CHECK(std::fabs(c.x - 32.0) < 0.5);
    CHECK(std::fabs(c.y - 32.0) < 0.5);

    // translation by dx moves the centroid by dx * image_size / world_window
    double dx = 0.4, dy = -0.25;
    auto img2 = render_frame(flat, {make_ball({dx, dy, 0.225})}, light, cam, false);
    Vec2 c2 = red_centroid(img2);
    CHECK(std::fabs((c2.x - c.x) - dx * 64 / 2.5) < 0.5);
    CHECK(std::fabs((c2.y - c.y) + dy * 64 / 2.5) < 0.5);
}

TEST_CASE("rendering is byte-deterministic") {
    auto hf = mech::SurfaceModel::heightfield(42, 0.4, mech::WindowTransform{0.7, 0.2, -0.3});
    Camera cam;
    Rng rng(9);
    auto light = LightSpec::sample_heightfield(rng);
    std::vector<mech::BallState> balls{make_ball({0.3, -0.2, 0.4}), make_ball({-0.5, 0.6, 0.35})};
    balls[1].color_index = 1;
    auto a = render_frame(hf, balls, light, cam, true);
    auto b = render_frame(hf, balls, light, cam, true);
    CHECK(a.rgb == b.rgb);
}

TEST_CASE("texture toggle only changes ball pixels") {
    auto hemi = mech::SurfaceModel::bowl(1.0, 0.0);
    Camera cam;
    LightSpec light;
    auto ball = make_ball({0.2, 0.1, 0.3});
    ball.euler_orientation = {0.4, 0.8, 1.2};
    auto plain = render_frame(hemi, {ball}, light, cam, false);
    auto textured = render_frame(hemi, {ball}, light, cam, true);
    int changed = 0;
    for (int y = 0; y < 64; y++)
        for (int x = 0; x < 64; x++) {
            double wx = ((x + 0.5) / 64.0 - 0.5) * 2.5;
            double wy = (0.5 - (y + 0.5) / 64.0) * 2.5;
            double d2 = (wx - 0.2) * (wx - 0.2) + (wy - 0.1) * (wy - 0.1);
            bool same = std::memcmp(plain.pixel(y, x), textured.pixel(y, x), 3) == 0;
            if (!same) changed++;
            if (d2 > 0.225 * 0.225) CHECK(same);
        }
    CHECK(changed > 0);
}

TEST_CASE("png writer emits a well-formed file") {
    Camera cam;
    auto img = render_frame(mech::SurfaceModel::bowl(0.8, 0.5), {make_ball({0, 0.2, 0.4})},
                            LightSpec{}, cam, false);
    std::string path = "test_optics_out.png";
    write_png(path, img);
    std::ifstream is(path, std::ios::binary);
    REQUIRE(is.good());
    unsigned char sig[8];
    is.read(reinterpret_cast<char*>(sig), 8);
    CHECK(sig[0] == 0x89);
    CHECK(sig[1] == 'P');
    CHECK(sig[2] == 'N');
    CHECK(sig[3] == 'G');
    is.close();
    std::remove(path.c_str());
}

TEST_CASE("golden frame matches the committed bytes") {
    auto hemi = mech::SurfaceModel::bowl(0.9, 0.7);
    Camera cam;
    auto ball = make_ball({0.25, -0.15, 0.35});
    ball.euler_orientation = {0.3, -0.5, 1.1};
    auto img = render_frame(hemi, {ball}, LightSpec{}, cam, true);

    std::string path = std::string(TEST_DATA_DIR) + "/golden_frame.rgb";
    std::ifstream is(path, std::ios::binary);
    if (!is.good()) {
        // first run: write the reference next to the sources
        std::ofstream os(path, std::ios::binary);
        os.write(reinterpret_cast<const char*>(img.rgb.data()), std::streamsize(img.rgb.size()));
        REQUIRE(os.good());
        return;
    }
    std::vector<unsigned char> ref((std::istreambuf_iterator<char>(is)),
                                   std::istreambuf_iterator<char>());
    REQUIRE(ref.size() == img.rgb.size());
    int diff = 0;
    for (size_t i = 0; i < ref.size(); i++)
        if (ref[i] != img.rgb[i]) diff++;
    CHECK(diff == 0);
}
