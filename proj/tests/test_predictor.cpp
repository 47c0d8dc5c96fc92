#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "rolllab/model.hpp"

using namespace rolllab;
using namespace rolllab::model;
using grad::Tape;
using grad::Tensor;

namespace {

std::vector<optics::Image> random_frames(int count, int size, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<optics::Image> frames(static_cast<size_t>(count));
    for (auto& img : frames) {
        img.width = img.height = size;
        img.rgb.resize(size_t(size * size * 3));
        for (auto& b : img.rgb) b = (unsigned char)rng.below(256);
    }
    return frames;
}

NetState random_state(const ModelConfig& cfg, std::uint64_t seed) {
    Rng rng(seed);
    NetState h;
    for (int o = 0; o < cfg.n_objects; o++) {
        h.s.push_back(Tensor::gaussian({cfg.grid(), cfg.grid(), cfg.channels}, 1.0, rng));
        h.p.push_back(Tensor::gaussian({cfg.p_dim()}, 1.0, rng));
    }
    return h;
}

void zero_param(Model& m, const std::string& name) {
    auto& t = m.param(name);
    for (int i = 0; i < t.size(); i++) t[i] = 0.0;
}

bool same_values(const Tensor& a, const Tensor& b) {
    if (a.shape != b.shape) return false;
    for (int i = 0; i < a.size(); i++)
        if (a[i] != b[i]) return false;
    return true;
}

}  // namespace

TEST_CASE("encoder output geometry") {
    ModelConfig cfg;
    Model m(cfg, 1);
    Tape tape;
    m.watch(tape);
    auto frames = random_frames(4, 64, 2);
    auto h = m.encode(tape, m.stack_frames(frames));
    REQUIRE(h.s.size() == 1);
    CHECK(h.s[0].shape == grad::Shape{8, 8, 32});
    CHECK(h.p[0].shape == grad::Shape{2});

    ModelConfig cfg3 = cfg;
    cfg3.n_objects = 3;
    cfg3.channels = 8;
    Model m3(cfg3, 1);
    Tape t3;
    m3.watch(t3);
    auto h3 = m3.encode(t3, m3.stack_frames(frames));
    REQUIRE(h3.s.size() == 3);
    for (auto& s : h3.s) CHECK(s.shape == grad::Shape{8, 8, 8});

    // wrong frame count is a structured error
    CHECK_THROWS_AS(m.stack_frames(random_frames(3, 64, 2)), Error);
    CHECK_THROWS_AS(m.stack_frames(random_frames(4, 32, 2)), Error);
}

TEST_CASE("frame stack order is semantic") {
    ModelConfig cfg;
    cfg.channels = 8;
    Model m(cfg, 3);
    auto frames = random_frames(4, 64, 5);
    Tape t1;
    m.watch(t1);
    auto a = m.encode(t1, m.stack_frames(frames));
    std::swap(frames[0], frames[3]);
    Tape t2;
    m.watch(t2);
    auto b = m.encode(t2, m.stack_frames(frames));
    CHECK_FALSE(same_values(a.s[0], b.s[0]));
}

TEST_CASE("zeroed increment head freezes p") {
    for (auto variant : {Variant::dispnet, Variant::probnet}) {
        ModelConfig cfg;
        cfg.variant = variant;
        cfg.channels = 4;
        cfg.hidden = 4;
        Model m(cfg, 7);
        zero_param(m, "phip.w");
        zero_param(m, "phip.b");
        Tape tape;
        m.watch(tape);
        auto h = random_state(cfg, 11);
        auto h1 = m.transition(tape, h);
        auto h2 = m.transition(tape, h1);
        CHECK(same_values(h.p[0], h1.p[0]));
        CHECK(same_values(h.p[0], h2.p[0]));
        CHECK(h1.s[0].shape == h.s[0].shape);
    }
}

TEST_CASE("direct readout ignores previous p") {
    ModelConfig cfg;
    cfg.variant = Variant::posnet;
    cfg.channels = 4;
    cfg.hidden = 4;
    Model m(cfg, 9);
    zero_param(m, "pos.w0");
    zero_param(m, "pos.w1");
    m.param("pos.b1")[0] = 3.25;
    m.param("pos.b1")[1] = -1.5;
    Tape tape;
    m.watch(tape);
    auto h = random_state(cfg, 13);
    for (int t = 0; t < 3; t++) {
        h = m.transition(tape, h);
        CHECK(h.p[0][0] == 3.25);
        CHECK(h.p[0][1] == -1.5);
    }
}

TEST_CASE("multi-object transition symmetry and equivariance") {
    ModelConfig cfg;
    cfg.n_objects = 2;
    cfg.channels = 6;
    cfg.hidden = 6;
    Model m(cfg, 21);

    // identical tensors, shared weights -> identical updates
    Tape tape;
    m.watch(tape);
    auto h = random_state(cfg, 31);
    h.s[1] = h.s[0].detached();
    h.p[1] = h.p[0].detached();
    auto h1 = m.transition(tape, h);
    CHECK(same_values(h1.s[0], h1.s[1]));
    CHECK(same_values(h1.p[0], h1.p[1]));

    // three objects: swapping 2 and 3 swaps outputs 2 and 3 bit-exactly
    ModelConfig cfg3 = cfg;
    cfg3.n_objects = 3;
    Model m3(cfg3, 22);
    auto g = random_state(cfg3, 41);
    Tape ta;
    m3.watch(ta);
    auto ra = m3.rollout_from(ta, g, 3);
    NetState gp;
    gp.s = {g.s[0], g.s[2], g.s[1]};
    gp.p = {g.p[0], g.p[2], g.p[1]};
    Tape tb;
    m3.watch(tb);
    auto rb = m3.rollout_from(tb, gp, 3);
    for (int t = 0; t < 3; t++) {
        CHECK(same_values(ra.steps[size_t(t)].position[0], rb.steps[size_t(t)].position[0]));
        CHECK(same_values(ra.steps[size_t(t)].position[1], rb.steps[size_t(t)].position[2]));
        CHECK(same_values(ra.steps[size_t(t)].position[2], rb.steps[size_t(t)].position[1]));
    }
}

TEST_CASE("rollout prefix property and determinism") {
    ModelConfig cfg;
    cfg.channels = 4;
    cfg.hidden = 4;
    Model m(cfg, 33);
    auto frames = random_frames(4, 64, 17);

    Tape ta;
    m.watch(ta);
    auto ra = m.rollout(ta, frames, 8);
    Tape tb;
    m.watch(tb);
    auto rb = m.rollout(tb, frames, 4);
    REQUIRE(ra.steps.size() == 8);
    REQUIRE(rb.steps.size() == 4);
    for (int t = 0; t < 4; t++)
        CHECK(same_values(ra.steps[size_t(t)].position[0], rb.steps[size_t(t)].position[0]));

    Tape tc;
    m.watch(tc);
    auto rc = m.rollout(tc, frames, 8);
    for (int t = 0; t < 8; t++)
        CHECK(same_values(ra.steps[size_t(t)].position[0], rc.steps[size_t(t)].position[0]));
}

TEST_CASE("probabilistic decode yields a valid covariance") {
    ModelConfig cfg;
    cfg.variant = Variant::probnet;
    cfg.channels = 4;
    cfg.hidden = 4;
    Model m(cfg, 43);
    Rng rng(5);
    for (int trial = 0; trial < 50; trial++) {
        auto h = random_state(cfg, 100 + std::uint64_t(trial));
        for (int i = 0; i < 5; i++) h.p[0][i] = rng.uniform(-20, 20);
        Tape tape;
        m.watch(tape);
        auto out = m.decode(tape, h);
        REQUIRE(out.covariance.size() == 1);
        const auto& sig = out.covariance[0];
        double a = sig[0], b = sig[1], d = sig[3];
        CHECK(b == sig[2]);
        double tr = a + d, det = a * d - b * b;
        double disc = std::sqrt(tr * tr / 4 - det);
        double lo = tr / 2 - disc, hi = tr / 2 + disc;
        CHECK(lo > 0.01 - 1e-9);
        CHECK(hi < 100.0 + 1e-9);
    }

    // equal eigenvalue parameters -> isotropic covariance for any theta
    auto h = random_state(cfg, 7);
    h.p[0][2] = 0.6;
    h.p[0][3] = 0.6;
    h.p[0][4] = 1.234;
    Tape tape;
    m.watch(tape);
    auto out = m.decode(tape, h);
    CHECK(out.covariance[0][0] == doctest::Approx(out.covariance[0][3]).epsilon(1e-12));
    CHECK(std::fabs(out.covariance[0][1]) < 1e-12);
}

TEST_CASE("interpnet decodes the final position from h0") {
    ModelConfig cfg;
    cfg.variant = Variant::interpnet;
    cfg.channels = 4;
    cfg.hidden = 4;
    Model m(cfg, 51);
    auto frames = random_frames(5, 64, 19);  // T0 + 1
    Tape tape;
    m.watch(tape);
    auto r = m.rollout(tape, frames, 4);
    REQUIRE(r.final_position.size() == 1);
    CHECK(r.final_position[0].shape == grad::Shape{2});
    // the head reads h0 only: identical across horizons
    Tape t2;
    m.watch(t2);
    auto r2 = m.rollout(t2, frames, 9);
    CHECK(same_values(r.final_position[0], r2.final_position[0]));
}

TEST_CASE("gradients reach the first encoder layer for every variant") {
    for (auto variant :
         {Variant::dispnet, Variant::probnet, Variant::posnet, Variant::interpnet}) {
        CAPTURE(variant_name(variant));
        ModelConfig cfg;
        cfg.variant = variant;
        cfg.channels = 4;
        cfg.hidden = 4;
        Model m(cfg, 61);
        auto frames = random_frames(cfg.input_frames(), 64, 23);
        Tape tape;
        m.watch(tape);
        auto r = m.rollout(tape, frames, 3);
        Tensor loss = tape.sum(tape.pointwise(r.steps[2].position[0], grad::Pointwise::square));
        if (cfg.regress_angular_velocity)
            loss = tape.add(loss, tape.sum(tape.pointwise(r.steps[2].angvel[0],
                                                          grad::Pointwise::square)));
        tape.backward(loss);
        auto g = tape.grad(m.param("enc.conv0.w"));
        double norm = 0;
        for (double v : g) norm += v * v;
        CHECK(norm > 0);
    }
}

TEST_CASE("angular velocity head shape and zero-weight identity") {
    ModelConfig cfg;
    cfg.channels = 4;
    cfg.hidden = 4;
    Model m(cfg, 71);
    zero_param(m, "angvel.w");
    zero_param(m, "angvel.b");
    Tape tape;
    m.watch(tape);
    auto h = random_state(cfg, 3);
    auto out = m.decode(tape, h);
    REQUIRE(out.angvel.size() == 1);
    CHECK(out.angvel[0].shape == grad::Shape{3});
    for (int i = 0; i < 3; i++) CHECK(out.angvel[0][i] == 0.0);
}

TEST_CASE("parameter count matches the closed form") {
    ModelConfig cfg;  // dispnet defaults
    Model m(cfg, 81);
    int C = cfg.channels, hid = cfg.hidden, flat = 8 * 8 * C;
    int enc = (9 * 12 * 16 + 16) + (9 * 16 * 32 + 32) + (9 * 32 * 32 + 32) +
              (9 * 32 * (C * 1) + C * 1);
    int trans = (9 * 2 * C * hid + hid) + (9 * hid * C + C);
    int heads = 2 * (flat * 2 + 2) + (flat * 3 + 3);  // p0, phip, angvel
    CHECK(m.parameter_count() == enc + trans + heads);

    ModelConfig pc = cfg;
    pc.variant = Variant::probnet;
    Model mp(pc, 81);
    int heads_p = 2 * (flat * 5 + 5) + (flat * 3 + 3);
    CHECK(mp.parameter_count() == enc + trans + heads_p);
}

TEST_CASE("checkpoint round trip reproduces the rollout") {
    ModelConfig cfg;
    cfg.variant = Variant::probnet;
    cfg.channels = 4;
    cfg.hidden = 4;
    Model m(cfg, 91);
    std::string path = "model_ckpt.bin";
    grad::save_checkpoint(path, m.to_checkpoint());
    auto m2 = Model::from_checkpoint(grad::load_checkpoint(path));
    CHECK(m2.config.variant == Variant::probnet);
    auto frames = random_frames(4, 64, 29);
    Tape ta, tb;
    m.watch(ta);
    m2.watch(tb);
    auto ra = m.rollout(ta, frames, 4);
    auto rb = m2.rollout(tb, frames, 4);
    for (int t = 0; t < 4; t++) {
        CHECK(same_values(ra.steps[size_t(t)].position[0], rb.steps[size_t(t)].position[0]));
        CHECK(same_values(ra.steps[size_t(t)].covariance[0], rb.steps[size_t(t)].covariance[0]));
    }
    std::filesystem::remove(path);
}
