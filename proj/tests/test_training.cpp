#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "rolllab/training.hpp"

using namespace rolllab;
using namespace rolllab::train;
using grad::Tape;
using grad::Tensor;

namespace {

data::TrainingWindow make_window(int T, int n_objects, std::uint64_t seed) {
    Rng rng(seed);
    data::TrainingWindow w;
    for (int t = 0; t <= T; t++) {
        std::vector<Vec2> pos;
        std::vector<Vec3> av;
        for (int o = 0; o < n_objects; o++) {
            pos.push_back({rng.uniform(0, 64), rng.uniform(0, 64)});
            av.push_back({rng.gaussian(), rng.gaussian(), rng.gaussian()});
        }
        w.target_positions.push_back(pos);
        w.target_angvels.push_back(av);
    }
    return w;
}

// rollout whose predictions are fixed constants (no tape nodes)
model::RolloutResult constant_rollout(const data::TrainingWindow& w, double offset) {
    model::RolloutResult r;
    int T = int(w.target_positions.size()) - 1;
    int n = int(w.target_positions[0].size());
    for (int t = 1; t <= T; t++) {
        model::StepOutput step;
        for (int o = 0; o < n; o++) {
            const Vec2& y = w.target_positions[size_t(t)][size_t(o)];
            step.position.push_back(Tensor({2}, {y.x + offset, y.y + offset}));
        }
        r.steps.push_back(step);
    }
    return r;
}

std::vector<unsigned char> slurp(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    REQUIRE(is.good());
    return {std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>()};
}

}  // namespace

TEST_CASE("deterministic loss anchors") {
    auto w = make_window(6, 1, 5);
    LossConfig cfg;
    cfg.angular = false;

    Tape tape;
    auto perfect = constant_rollout(w, 0.0);
    CHECK(compute_loss(tape, perfect, w, cfg).value() == doctest::Approx(0.0).epsilon(1e-15));

    // residual r in both coordinates at every step -> loss 2 r^2
    auto off1 = constant_rollout(w, 1.5);
    auto off2 = constant_rollout(w, 3.0);
    double l1 = compute_loss(tape, off1, w, cfg).value();
    double l2 = compute_loss(tape, off2, w, cfg).value();
    CHECK(l1 == doctest::Approx(2 * 1.5 * 1.5).epsilon(1e-12));
    CHECK(l2 == doctest::Approx(4 * l1).epsilon(1e-12));

    // mismatched lengths are a structured error
    auto bad = constant_rollout(w, 0.0);
    bad.steps.pop_back();
    CHECK_THROWS_AS(compute_loss(tape, bad, w, cfg), Error);
}

TEST_CASE("probnet loss anchor: exact mean, identity covariance") {
    int T = 7;
    auto w = make_window(T, 1, 9);
    model::RolloutResult r;
    for (int t = 1; t <= T; t++) {
        model::StepOutput step;
        const Vec2& y = w.target_positions[size_t(t)][0];
        step.position.push_back(Tensor({2}, {y.x, y.y}));
        step.covariance.push_back(Tensor({2, 2}, {1, 0, 0, 1}));
        r.steps.push_back(step);
    }
    LossConfig cfg;
    cfg.variant = model::Variant::probnet;
    cfg.angular = false;
    Tape tape;
    // NLL averages to log(2pi); the det regularizer sums to 0.01 * T
    double expect = std::log(2 * M_PI) + 0.01 * T;
    CHECK(compute_loss(tape, r, w, cfg).value() == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("plateau schedule drops and stops on a flat validation curve") {
    TrainSchedule cfg;
    cfg.plateau_epochs = 3;
    cfg.stop_epochs = 6;
    cfg.lr_initial = 1e-4;
    PlateauSchedule s(cfg);

    auto first = s.observe(1.0);  // improves on infinity
    CHECK(first.improved);
    int drop_at = -1, stop_at = -1;
    for (int epoch = 1; epoch <= 20 && stop_at < 0; epoch++) {
        auto u = s.observe(1.0);
        CHECK_FALSE(u.improved);
        if (u.lr_dropped && drop_at < 0) drop_at = epoch;
        if (u.stop) stop_at = epoch;
    }
    CHECK(drop_at == 3);   // first drop after plateau_epochs flat epochs
    CHECK(stop_at == 6);   // halt after stop_epochs flat epochs
    CHECK(s.lr() == doctest::Approx(1e-6).epsilon(1e-12));  // two decades by then

    // improvement within tolerance does not reset the clock
    PlateauSchedule s2(cfg);
    s2.observe(1.0);
    s2.observe(1.0 - 1e-9);
    auto u = s2.observe(1.0);
    CHECK_FALSE(u.improved);

    TrainSchedule bad;
    bad.stop_epochs = 10;
    bad.plateau_epochs = 20;
    CHECK_THROWS_AS(PlateauSchedule{bad}, Error);
}

TEST_CASE("one small rmsprop step decreases the window loss") {
    model::ModelConfig cfg;
    cfg.channels = 4;
    cfg.hidden = 4;
    model::Model net(cfg, 3);
    auto w = make_window(4, 1, 17);
    Rng rng(4);
    std::vector<optics::Image> frames(4);
    for (auto& img : frames) {
        img.width = img.height = 64;
        img.rgb.resize(64 * 64 * 3);
        for (auto& b : img.rgb) b = (unsigned char)rng.below(256);
    }
    LossConfig lcfg;

    auto loss_and_step = [&](bool apply) {
        Tape tape;
        net.watch(tape);
        auto r = net.rollout(tape, frames, 4);
        Tensor loss = compute_loss(tape, r, w, lcfg);
        if (apply) {
            tape.backward(loss);
            std::vector<Tensor*> params;
            std::vector<std::vector<double>> grads;
            for (auto& [name, t] : net.params) {
                params.push_back(&t);
                grads.push_back(tape.grad(t));
            }
            grad::RmsPropState opt;
            opt.learning_rate = 1e-6;
            grad::rmsprop_step(params, grads, opt);
        }
        return loss.value();
    };

    double before = loss_and_step(true);
    double after = loss_and_step(false);
    CHECK(after < before);
}

TEST_CASE("toy training run descends and is deterministic") {
    data::DatasetManifest m;
    m.sequence_count = 10;
    m.image_size = 32;
    m.master_seed = 11;
    std::string ds = "train_ds";
    std::filesystem::remove_all(ds);
    generate_dataset(m, ds);

    model::ModelConfig cfg;
    cfg.channels = 8;
    cfg.hidden = 8;
    cfg.image_size = 32;
    TrainSchedule sched;
    sched.batch_size = 4;
    sched.max_epochs = 50;
    sched.T_train = 5;
    sched.seed = 2;

    std::string out_a = "train_out_a", out_b = "train_out_b";
    std::filesystem::remove_all(out_a);
    std::filesystem::remove_all(out_b);
    auto ra = train::train(ds, cfg, sched, out_a);
    CHECK(ra.epochs_run == 50);

    // log parses and the loss went down end to end
    std::ifstream log(ra.log_path);
    REQUIRE(log.good());
    std::string line;
    std::getline(log, line);
    CHECK(line == "epoch,lr,train_loss,val_loss,wall_seconds");
    double first_train = -1, last_train = -1;
    while (std::getline(log, line)) {
        std::stringstream ss(line);
        std::string cell;
        std::getline(ss, cell, ',');  // epoch
        std::getline(ss, cell, ',');  // lr
        std::getline(ss, cell, ',');  // train loss
        double v = std::stod(cell);
        if (first_train < 0) first_train = v;
        last_train = v;
    }
    CHECK(last_train < first_train);

    auto rb = train::train(ds, cfg, sched, out_b);
    CHECK(slurp(ra.checkpoint_path) == slurp(rb.checkpoint_path));
    CHECK(ra.best_val == rb.best_val);

    // reloading the checkpoint reproduces the validation loss bit-exactly
    auto net = model::Model::from_checkpoint(grad::load_checkpoint(ra.checkpoint_path));
    data::SplitIndices splits;
    data::load_manifest(ds, &splits);
    auto rec = data::load_sequence(data::sequence_path(ds, splits.val[0]));
    Rng rng(0);
    auto w = data::sample_window(rec, 4, 5, data::WindowMode::eval_fixed, rng);
    LossConfig lcfg;
    Tape t1, t2;
    net.watch(t1);
    double v1 = compute_loss(t1, net.rollout(t1, w.input_frames, 5), w, lcfg).value();
    net.watch(t2);
    double v2 = compute_loss(t2, net.rollout(t2, w.input_frames, 5), w, lcfg).value();
    CHECK(v1 == v2);

    // mismatched model config is rejected up front
    model::ModelConfig wrong = cfg;
    wrong.n_objects = 2;
    CHECK_THROWS_AS(train::train(ds, wrong, sched, out_b), Error);

    std::filesystem::remove_all(ds);
    std::filesystem::remove_all(out_a);
    std::filesystem::remove_all(out_b);
}
