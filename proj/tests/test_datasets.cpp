#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <set>

#include "rolllab/dataset.hpp"

using namespace rolllab;
using namespace rolllab::data;
namespace fs = std::filesystem;

namespace {

SequenceRecord make_record(int n_frames, int n_objects, std::uint64_t seed) {
    SequenceRecord rec;
    rec.family = mech::Family::ellipsoidal;
    rec.n_objects = n_objects;
    rec.image_size = 16;
    rec.scenario_seed = seed;
    rec.collision_count = 3;
    Rng rng(seed);
    for (int f = 0; f < n_frames; f++) {
        optics::Image img;
        img.width = img.height = 16;
        img.rgb.resize(16 * 16 * 3);
        for (auto& b : img.rgb) b = (unsigned char)rng.below(256);
        rec.frames.push_back(img);
        std::vector<Vec2> pos;
        std::vector<Vec3> av;
        for (int o = 0; o < n_objects; o++) {
            pos.push_back({rng.uniform(0, 16), rng.uniform(0, 16)});
            av.push_back({rng.gaussian(), rng.gaussian(), rng.gaussian()});
        }
        rec.positions.push_back(pos);
        rec.angular_velocities.push_back(av);
    }
    return rec;
}

std::vector<unsigned char> slurp(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    REQUIRE(is.good());
    return {std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>()};
}

}  // namespace

TEST_CASE("splits are disjoint, exhaustive, and sized 70/15/15") {
    DatasetManifest m;
    m.sequence_count = 100;
    auto s = compute_splits(m);
    CHECK(s.train.size() == 70);
    CHECK(s.val.size() == 15);
    CHECK(s.test.size() == 15);
    std::set<int> all;
    for (int i : s.train) all.insert(i);
    for (int i : s.val) all.insert(i);
    for (int i : s.test) all.insert(i);
    CHECK(all.size() == 100);
    CHECK(*all.begin() == 0);
    CHECK(*all.rbegin() == 99);

    m.split_test = 0.2;
    CHECK_THROWS_AS(compute_splits(m), Error);
}

TEST_CASE("sequence file round-trips losslessly") {
    auto rec = make_record(7, 2, 12345);
    std::string path = "roundtrip.seq";
    save_sequence(path, rec);
    auto back = load_sequence(path);
    CHECK(back.family == rec.family);
    CHECK(back.n_objects == rec.n_objects);
    CHECK(back.image_size == rec.image_size);
    CHECK(back.scenario_seed == rec.scenario_seed);
    CHECK(back.collision_count == rec.collision_count);
    REQUIRE(back.length() == rec.length());
    for (int f = 0; f < rec.length(); f++) {
        CHECK(back.frames[size_t(f)].rgb == rec.frames[size_t(f)].rgb);
        for (int o = 0; o < rec.n_objects; o++) {
            CHECK(back.positions[size_t(f)][size_t(o)].x == rec.positions[size_t(f)][size_t(o)].x);
            CHECK(back.positions[size_t(f)][size_t(o)].y == rec.positions[size_t(f)][size_t(o)].y);
            CHECK(back.angular_velocities[size_t(f)][size_t(o)].z ==
                  rec.angular_velocities[size_t(f)][size_t(o)].z);
        }
    }
    fs::remove(path);
}

TEST_CASE("corrupt files give structured errors") {
    auto rec = make_record(3, 1, 9);
    std::string path = "corrupt.seq";
    save_sequence(path, rec);
    auto bytes = slurp(path);

    // flipped magic byte names the magic
    auto bad = bytes;
    bad[0] ^= 0xFF;
    std::ofstream(path, std::ios::binary)
        .write(reinterpret_cast<char*>(bad.data()), std::streamsize(bad.size()));
    try {
        load_sequence(path);
        FAIL("expected error");
    } catch (const Error& e) {
        CHECK(std::string(e.what()).find("RSEQ") != std::string::npos);
    }

    // truncation names expected vs actual byte counts
    std::ofstream(path, std::ios::binary)
        .write(reinterpret_cast<char*>(bytes.data()), std::streamsize(bytes.size() / 2));
    try {
        load_sequence(path);
        FAIL("expected error");
    } catch (const Error& e) {
        std::string msg = e.what();
        CHECK(msg.find("expected") != std::string::npos);
        CHECK(msg.find("offset") != std::string::npos);
    }
    fs::remove(path);
}

TEST_CASE("window sampling modes") {
    auto rec = make_record(20, 1, 77);
    Rng rng(5);
    int T0 = 4, T = 10;

    auto a = sample_window(rec, T0, T, WindowMode::eval_fixed, rng);
    auto b = sample_window(rec, T0, T, WindowMode::eval_fixed, rng);
    CHECK(a.start == 0);
    CHECK(b.start == 0);
    REQUIRE(a.input_frames.size() == 4);
    REQUIRE(a.target_positions.size() == size_t(T + 1));
    CHECK(a.input_frames[0].rgb == rec.frames[0].rgb);
    // y_0 is the position at the last observed frame
    CHECK(a.target_positions[0][0].x == rec.positions[3][0].x);
    CHECK(a.target_positions[10][0].x == rec.positions[13][0].x);

    // degenerate range: both modes agree on the single valid start
    auto rec2 = make_record(T0 + T, 1, 78);
    auto c = sample_window(rec2, T0, T, WindowMode::train_random, rng);
    CHECK(c.start == 0);

    // coupon collector: every valid start of a short range appears
    std::set<int> seen;
    for (int i = 0; i < 1000; i++)
        seen.insert(sample_window(rec, T0, T, WindowMode::train_random, rng).start);
    CHECK(seen.size() == size_t(20 - T0 - T + 1));
    CHECK(*seen.begin() == 0);
    CHECK(*seen.rbegin() == 20 - T0 - T);

    // final frame for interpolation
    auto d = sample_window(rec, T0, T, WindowMode::eval_fixed, rng, true);
    REQUIRE(d.final_frame.has_value());
    CHECK(d.final_frame->rgb == rec.frames[13].rgb);

    CHECK_THROWS_AS(sample_window(rec, 4, 17, WindowMode::eval_fixed, rng), Error);
}

TEST_CASE("dataset generation is deterministic and respects the discard rule") {
    DatasetManifest m;
    m.family = mech::Family::hemispherical;
    m.sequence_count = 4;
    m.image_size = 32;
    m.master_seed = 7;

    std::string dir_a = "ds_a", dir_b = "ds_b";
    fs::remove_all(dir_a);
    fs::remove_all(dir_b);
    auto sa = generate_dataset(m, dir_a);
    auto sb = generate_dataset(m, dir_b);
    CHECK(sa.train == sb.train);

    CHECK(slurp(dir_a + "/manifest.json") == slurp(dir_b + "/manifest.json"));
    for (int i = 0; i < m.sequence_count; i++) {
        CAPTURE(i);
        CHECK(slurp(sequence_path(dir_a, i)) == slurp(sequence_path(dir_b, i)));
        auto rec = load_sequence(sequence_path(dir_a, i));
        CHECK(rec.length() >= 83);  // 250 raw frames / 3
        CHECK(rec.n_objects == 1);
        CHECK(rec.image_size == 32);
    }

    SplitIndices splits;
    auto loaded = load_manifest(dir_a, &splits);
    CHECK(loaded.sequence_count == 4);
    CHECK(loaded.master_seed == 7);
    CHECK(family_name(loaded.family) == "hemispherical");
    CHECK(splits.train.size() + splits.val.size() + splits.test.size() == 4);

    fs::remove_all(dir_a);
    fs::remove_all(dir_b);
}
