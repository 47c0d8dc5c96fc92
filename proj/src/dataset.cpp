#include "rolllab/dataset.hpp"

#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>

#include <json.hpp>

namespace rolllab::data {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr char kMagic[4] = {'R', 'S', 'E', 'Q'};
constexpr std::uint32_t kVersion = 1;

struct Writer {
    std::ofstream os;
    explicit Writer(const std::string& path) : os(path, std::ios::binary) {
        if (!os) fail(Error::Kind::io, "cannot open " + path + " for writing");
    }
    void bytes(const void* p, size_t n) { os.write(static_cast<const char*>(p), std::streamsize(n)); }
    void u32(std::uint32_t v) { bytes(&v, 4); }
    void u64(std::uint64_t v) { bytes(&v, 8); }
    void f64(double v) { bytes(&v, 8); }
};

struct Reader {
    std::ifstream is;
    std::string path;
    size_t offset = 0;
    explicit Reader(const std::string& p) : is(p, std::ios::binary), path(p) {
        if (!is) fail(Error::Kind::io, "cannot open " + p);
    }
    void bytes(void* p, size_t n) {
        is.read(static_cast<char*>(p), std::streamsize(n));
        if (size_t(is.gcount()) != n)
            fail(Error::Kind::format, path + ": expected " + std::to_string(n) +
                                          " bytes at offset " + std::to_string(offset) +
                                          ", got " + std::to_string(is.gcount()));
        offset += n;
    }
    std::uint32_t u32() { std::uint32_t v; bytes(&v, 4); return v; }
    std::uint64_t u64() { std::uint64_t v; bytes(&v, 8); return v; }
    double f64() { double v; bytes(&v, 8); return v; }
};

}  // namespace

std::string family_name(mech::Family family) {
    switch (family) {
        case mech::Family::hemispherical: return "hemispherical";
        case mech::Family::ellipsoidal: return "ellipsoidal";
        case mech::Family::heightfield: return "heightfield";
    }
    fail(Error::Kind::config, "unknown family");
}

mech::Family family_from_name(const std::string& name) {
    if (name == "hemispherical") return mech::Family::hemispherical;
    if (name == "ellipsoidal") return mech::Family::ellipsoidal;
    if (name == "heightfield") return mech::Family::heightfield;
    fail(Error::Kind::config, "unknown family name: " + name);
}

SplitIndices compute_splits(const DatasetManifest& manifest) {
    double total = manifest.split_train + manifest.split_val + manifest.split_test;
    if (std::fabs(total - 1.0) > 1e-9)
        fail(Error::Kind::config, "split fractions must sum to 1");
    int n = manifest.sequence_count;
    int n_train = int(std::llround(manifest.split_train * n));
    int n_val = int(std::llround(manifest.split_val * n));
    SplitIndices s;
    for (int i = 0; i < n; i++) {
        if (i < n_train)
            s.train.push_back(i);
        else if (i < n_train + n_val)
            s.val.push_back(i);
        else
            s.test.push_back(i);
    }
    return s;
}

std::string sequence_path(const std::string& dataset_dir, int index) {
    char name[32];
    std::snprintf(name, sizeof name, "%05d.seq", index);
    return (fs::path(dataset_dir) / "seq" / name).string();
}

void save_sequence(const std::string& path, const SequenceRecord& record) {
    int n_frames = record.length();
    if (int(record.positions.size()) != n_frames ||
        int(record.angular_velocities.size()) != n_frames)
        fail(Error::Kind::shape, "sequence record: frame/target length mismatch");
    Writer w(path);
    w.bytes(kMagic, 4);
    w.u32(kVersion);
    w.u32(std::uint32_t(record.family));
    w.u32(std::uint32_t(record.n_objects));
    w.u32(std::uint32_t(record.image_size));
    w.u32(std::uint32_t(n_frames));
    w.u32(std::uint32_t(record.collision_count));
    w.u64(record.scenario_seed);
    for (const auto& img : record.frames) w.bytes(img.rgb.data(), img.rgb.size());
    for (const auto& frame : record.positions)
        for (const auto& p : frame) {
            w.f64(p.x);
            w.f64(p.y);
        }
    for (const auto& frame : record.angular_velocities)
        for (const auto& v : frame) {
            w.f64(v.x);
            w.f64(v.y);
            w.f64(v.z);
        }
    if (!w.os) fail(Error::Kind::io, "write failed for " + path);
}

SequenceRecord load_sequence(const std::string& path) {
    Reader r(path);
    char magic[4];
    r.bytes(magic, 4);
    if (std::memcmp(magic, kMagic, 4) != 0)
        fail(Error::Kind::format,
             path + ": bad magic, expected \"RSEQ\", got \"" + std::string(magic, 4) + "\"");
    std::uint32_t version = r.u32();
    if (version != kVersion)
        fail(Error::Kind::format, path + ": unsupported version " + std::to_string(version));
    SequenceRecord rec;
    std::uint32_t family = r.u32();
    if (family > 2) fail(Error::Kind::format, path + ": bad family code " + std::to_string(family));
    rec.family = mech::Family(family);
    rec.n_objects = int(r.u32());
    rec.image_size = int(r.u32());
    int n_frames = int(r.u32());
    rec.collision_count = int(r.u32());
    rec.scenario_seed = r.u64();
    if (rec.n_objects < 1 || rec.n_objects > 3 || rec.image_size < 8 || n_frames < 1)
        fail(Error::Kind::format, path + ": implausible header fields");
    rec.frames.resize(size_t(n_frames));
    for (auto& img : rec.frames) {
        img.width = img.height = rec.image_size;
        img.rgb.resize(size_t(rec.image_size * rec.image_size * 3));
        r.bytes(img.rgb.data(), img.rgb.size());
    }
    rec.positions.assign(size_t(n_frames), std::vector<Vec2>(size_t(rec.n_objects)));
    for (auto& frame : rec.positions)
        for (auto& p : frame) {
            p.x = r.f64();
            p.y = r.f64();
        }
    rec.angular_velocities.assign(size_t(n_frames), std::vector<Vec3>(size_t(rec.n_objects)));
    for (auto& frame : rec.angular_velocities)
        for (auto& v : frame) {
            v.x = r.f64();
            v.y = r.f64();
            v.z = r.f64();
        }
    return rec;
}

namespace {

SequenceRecord generate_one(const DatasetManifest& manifest, int index) {
    optics::Camera camera;
    camera.image_size = manifest.image_size;
    mech::FamilyConfig cfg;
    cfg.family = manifest.family;
    cfg.n_balls = manifest.n_objects;
    mech::SimParams params;

    Rng base = Rng(manifest.master_seed).split(std::uint64_t(index));
    for (int attempt = 0; attempt <= 100; attempt++) {
        Rng rng = base.split(std::uint64_t(attempt));
        auto scenario = mech::sample_scenario(cfg, rng);
        optics::LightSpec light;
        if (manifest.family == mech::Family::heightfield)
            light = optics::LightSpec::sample_heightfield(rng);
        auto outcome = mech::simulate_sequence(
            scenario, params, [&](const Vec3& p) { return camera.project(p); });
        if (outcome.status != mech::SimStatus::ok) continue;

        SequenceRecord rec;
        rec.family = manifest.family;
        rec.n_objects = manifest.n_objects;
        rec.image_size = manifest.image_size;
        rec.scenario_seed = manifest.master_seed ^ (std::uint64_t(index) << 20) ^
                            std::uint64_t(attempt);
        rec.collision_count = outcome.trajectory.collision_count;
        const auto& traj = outcome.trajectory;
        rec.frames.reserve(traj.frames.size());
        for (size_t f = 0; f < traj.frames.size(); f++) {
            rec.frames.push_back(optics::render_frame(scenario.surface, traj.frames[f].balls,
                                                      light, camera, manifest.ball_textured));
            rec.positions.push_back(traj.screen_positions[f]);
            std::vector<Vec3> av;
            for (const auto& b : traj.frames[f].balls) av.push_back(b.angular_velocity);
            rec.angular_velocities.push_back(std::move(av));
        }
        return rec;
    }
    fail(Error::Kind::numeric, "sequence " + std::to_string(index) +
                                   ": more than 100 consecutive rejected scenarios");
}

}  // namespace

SplitIndices generate_dataset(const DatasetManifest& manifest, const std::string& out_dir) {
    if (manifest.sequence_count < 1) fail(Error::Kind::config, "sequence_count must be positive");
    if (manifest.n_objects < 1 || manifest.n_objects > 3)
        fail(Error::Kind::config, "n_objects must be 1 to 3");
    auto splits = compute_splits(manifest);
    std::error_code ec;
    fs::create_directories(fs::path(out_dir) / "seq", ec);
    if (ec) fail(Error::Kind::io, "cannot create " + out_dir + ": " + ec.message());

    // sequence i depends only on (master_seed, i), so order is free
#pragma omp parallel for schedule(dynamic)
    for (int i = 0; i < manifest.sequence_count; i++) {
        auto rec = generate_one(manifest, i);
        save_sequence(sequence_path(out_dir, i), rec);
    }

    json j;
    j["family"] = family_name(manifest.family);
    j["n_objects"] = manifest.n_objects;
    j["sequence_count"] = manifest.sequence_count;
    j["image_size"] = manifest.image_size;
    j["T0"] = manifest.T0;
    j["ball_textured"] = manifest.ball_textured;
    j["split_fractions"] = {manifest.split_train, manifest.split_val, manifest.split_test};
    j["master_seed"] = manifest.master_seed;
    j["splits"] = {{"train", splits.train}, {"val", splits.val}, {"test", splits.test}};
    std::ofstream os((fs::path(out_dir) / "manifest.json").string());
    if (!os) fail(Error::Kind::io, "cannot write manifest.json in " + out_dir);
    os << j.dump(2) << "\n";
    return splits;
}

DatasetManifest load_manifest(const std::string& dataset_dir, SplitIndices* splits) {
    std::string path = (fs::path(dataset_dir) / "manifest.json").string();
    std::ifstream is(path);
    if (!is) fail(Error::Kind::io, "cannot open " + path);
    json j;
    try {
        is >> j;
    } catch (const json::exception& e) {
        fail(Error::Kind::format, path + ": " + e.what());
    }
    DatasetManifest m;
    try {
        m.family = family_from_name(j.at("family").get<std::string>());
        m.n_objects = j.at("n_objects").get<int>();
        m.sequence_count = j.at("sequence_count").get<int>();
        m.image_size = j.at("image_size").get<int>();
        m.T0 = j.at("T0").get<int>();
        m.ball_textured = j.at("ball_textured").get<bool>();
        auto fr = j.at("split_fractions");
        m.split_train = fr.at(0).get<double>();
        m.split_val = fr.at(1).get<double>();
        m.split_test = fr.at(2).get<double>();
        m.master_seed = j.at("master_seed").get<std::uint64_t>();
        if (splits) {
            splits->train = j.at("splits").at("train").get<std::vector<int>>();
            splits->val = j.at("splits").at("val").get<std::vector<int>>();
            splits->test = j.at("splits").at("test").get<std::vector<int>>();
        }
    } catch (const json::exception& e) {
        fail(Error::Kind::format, path + ": missing or malformed field: " + e.what());
    }
    return m;
}

TrainingWindow sample_window(const SequenceRecord& record, int T0, int T, WindowMode mode,
                             Rng& rng, bool with_final_frame) {
    int len = record.length();
    if (len < T0 + T)
        fail(Error::Kind::domain, "sequence too short for window: length " + std::to_string(len) +
                                      " < T0 + T = " + std::to_string(T0 + T));
    int n_starts = len - T0 - T + 1;
    TrainingWindow w;
    w.start = mode == WindowMode::train_random ? int(rng.below(std::uint64_t(n_starts))) : 0;
    for (int t = 0; t < T0; t++) w.input_frames.push_back(record.frames[size_t(w.start + t)]);
    int t0 = w.start + T0 - 1;  // time index 0
    for (int t = 0; t <= T; t++) {
        w.target_positions.push_back(record.positions[size_t(t0 + t)]);
        w.target_angvels.push_back(record.angular_velocities[size_t(t0 + t)]);
    }
    if (with_final_frame) w.final_frame = record.frames[size_t(t0 + T)];
    return w;
}

}  // namespace rolllab::data
