#include "rolllab/training.hpp"

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <fstream>

namespace rolllab::train {

namespace fs = std::filesystem;

namespace {

Tensor const_vec2(const Vec2& v) { return Tensor({2}, {v.x, v.y}); }
Tensor const_vec3(const Vec3& v) { return Tensor({3}, {v.x, v.y, v.z}); }

Tensor sq_norm(Tape& tape, const Tensor& pred, const Tensor& target) {
    return tape.sum(tape.pointwise(tape.sub(pred, target), grad::Pointwise::square));
}

}  // namespace

Tensor compute_loss(Tape& tape, const model::RolloutResult& rollout,
                    const data::TrainingWindow& window, const LossConfig& config) {
    int T = int(rollout.steps.size());
    if (int(window.target_positions.size()) != T + 1)
        fail(Error::Kind::shape, "loss: window has " +
                                     std::to_string(window.target_positions.size()) +
                                     " targets but the rollout has " + std::to_string(T) +
                                     " steps");
    if (T < 1) fail(Error::Kind::domain, "loss: empty rollout");
    int n = int(rollout.steps[0].position.size());
    if (int(window.target_positions[0].size()) != n)
        fail(Error::Kind::shape, "loss: object count mismatch");

    Tensor loss = Tensor::scalar(0.0);
    for (int t = 1; t <= T; t++) {
        const auto& step = rollout.steps[size_t(t - 1)];
        const auto& y = window.target_positions[size_t(t)];
        for (int o = 0; o < n; o++) {
            Tensor target = const_vec2(y[size_t(o)]);
            if (config.variant == model::Variant::probnet) {
                loss = tape.add(loss, tape.gaussian_nll(target, step.position[size_t(o)],
                                                        step.covariance[size_t(o)]));
            } else {
                loss = tape.add(loss, sq_norm(tape, step.position[size_t(o)], target));
            }
            if (config.angular && !step.angvel.empty()) {
                Tensor omega = const_vec3(window.target_angvels[size_t(t)][size_t(o)]);
                loss = tape.add(loss, tape.scale(sq_norm(tape, step.angvel[size_t(o)], omega),
                                                 config.angular_weight));
            }
        }
    }
    loss = tape.scale(loss, 1.0 / (T * n));

    if (config.variant == model::Variant::probnet && config.det_reg_lambda != 0.0) {
        // det regularizer summed over steps (averaged over objects only)
        Tensor reg = Tensor::scalar(0.0);
        for (const auto& step : rollout.steps)
            for (const auto& sigma : step.covariance) {
                Tensor flat = reshape(sigma, {4});
                Tensor det = tape.sub(
                    tape.mul(tape.slice(flat, 0, 1), tape.slice(flat, 3, 1)),
                    tape.mul(tape.slice(flat, 1, 1), tape.slice(flat, 2, 1)));
                reg = tape.add(reg, det);
            }
        loss = tape.add(loss, tape.scale(reg, config.det_reg_lambda / n));
    }

    if (!rollout.final_position.empty()) {
        const auto& y_final = window.target_positions[size_t(T)];
        Tensor fin = Tensor::scalar(0.0);
        for (int o = 0; o < n; o++)
            fin = tape.add(fin, sq_norm(tape, rollout.final_position[size_t(o)],
                                        const_vec2(y_final[size_t(o)])));
        loss = tape.add(loss, tape.scale(fin, 1.0 / n));
    }
    return loss;
}

PlateauSchedule::Update PlateauSchedule::observe(double val_loss) {
    Update u;
    if (val_loss < best_ - 1e-6) {
        best_ = val_loss;
        since_improve_ = 0;
        since_drop_ = 0;
        u.improved = true;
        return u;
    }
    since_improve_++;
    since_drop_++;
    if (since_drop_ >= cfg_.plateau_epochs) {
        lr_ /= cfg_.lr_decay_factor;
        since_drop_ = 0;
        u.lr_dropped = true;
    }
    if (since_improve_ >= cfg_.stop_epochs) u.stop = true;
    return u;
}

TrainResult train(const std::string& dataset_dir, const model::ModelConfig& config,
                  const TrainSchedule& schedule, const std::string& out_dir) {
    data::SplitIndices splits;
    auto manifest = data::load_manifest(dataset_dir, &splits);
    if (manifest.n_objects != config.n_objects)
        fail(Error::Kind::config, "model expects " + std::to_string(config.n_objects) +
                                      " objects but the dataset has " +
                                      std::to_string(manifest.n_objects));
    if (manifest.image_size != config.image_size)
        fail(Error::Kind::config, "model image_size does not match the dataset");
    if (manifest.T0 != config.T0)
        fail(Error::Kind::config, "model T0 does not match the dataset");
    if (splits.train.empty() || splits.val.empty())
        fail(Error::Kind::config, "dataset needs non-empty train and val splits");

    std::vector<data::SequenceRecord> train_seqs, val_seqs;
    for (int i : splits.train)
        train_seqs.push_back(data::load_sequence(data::sequence_path(dataset_dir, i)));
    for (int i : splits.val)
        val_seqs.push_back(data::load_sequence(data::sequence_path(dataset_dir, i)));

    const bool interp = config.variant == model::Variant::interpnet;
    const int T = schedule.T_train;
    LossConfig loss_cfg;
    loss_cfg.variant = config.variant;
    loss_cfg.angular = config.regress_angular_velocity;

    model::Model net(config, schedule.seed);
    grad::RmsPropState opt;
    opt.learning_rate = schedule.lr_initial;
    PlateauSchedule plateau(schedule);

    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec) fail(Error::Kind::io, "cannot create " + out_dir + ": " + ec.message());
    std::string log_path = (fs::path(out_dir) / "train_log.csv").string();
    std::string ckpt_path = (fs::path(out_dir) / "model.ckpt").string();
    std::ofstream log(log_path);
    if (!log) fail(Error::Kind::io, "cannot write " + log_path);
    log << "epoch,lr,train_loss,val_loss,wall_seconds\n";

    auto window_for = [&](const data::SequenceRecord& rec, Rng& rng, data::WindowMode mode) {
        return data::sample_window(rec, config.T0, T, mode, rng, interp);
    };

    auto eval_loss = [&](const data::TrainingWindow& w) {
        Tape tape;
        net.watch(tape);
        std::vector<optics::Image> inputs = w.input_frames;
        if (interp) inputs.push_back(*w.final_frame);
        auto rollout = net.rollout(tape, inputs, T);
        return compute_loss(tape, rollout, w, loss_cfg).value();
    };

    grad::Checkpoint best_ckpt;
    TrainResult result;
    result.config = config;
    auto t_start = std::chrono::steady_clock::now();

    for (int epoch = 0; epoch < schedule.max_epochs; epoch++) {
        // deterministic shuffle and per-sequence window draws keyed by epoch
        Rng epoch_rng = Rng(schedule.seed).split(2 * std::uint64_t(epoch));
        std::vector<size_t> order(train_seqs.size());
        for (size_t i = 0; i < order.size(); i++) order[i] = i;
        for (size_t i = order.size(); i > 1; i--)
            std::swap(order[i - 1], order[size_t(epoch_rng.below(i))]);

        double train_loss_sum = 0;
        int batches = 0;
        for (size_t pos = 0; pos < order.size(); pos += size_t(schedule.batch_size)) {
            size_t end = std::min(order.size(), pos + size_t(schedule.batch_size));
            Tape tape;
            net.watch(tape);
            Tensor batch_loss = Tensor::scalar(0.0);
            for (size_t bi = pos; bi < end; bi++) {
                const auto& rec = train_seqs[order[bi]];
                Rng wrng = Rng(schedule.seed).split(2 * std::uint64_t(epoch) + 1)
                               .split(std::uint64_t(order[bi]));
                auto w = window_for(rec, wrng, data::WindowMode::train_random);
                std::vector<optics::Image> inputs = w.input_frames;
                if (interp) inputs.push_back(*w.final_frame);
                auto rollout = net.rollout(tape, inputs, T);
                batch_loss = tape.add(batch_loss, compute_loss(tape, rollout, w, loss_cfg));
            }
            batch_loss = tape.scale(batch_loss, 1.0 / double(end - pos));
            tape.backward(batch_loss);
            train_loss_sum += batch_loss.value();
            batches++;

            std::vector<Tensor*> params;
            std::vector<std::vector<double>> grads;
            for (auto& [name, t] : net.params) {
                params.push_back(&t);
                grads.push_back(tape.grad(t));
            }
            opt.learning_rate = plateau.lr();
            grad::rmsprop_step(params, grads, opt);
        }

        double val_loss_sum = 0;
        Rng val_rng(0);  // unused by eval_fixed
        for (const auto& rec : val_seqs)
            val_loss_sum += eval_loss(window_for(rec, val_rng, data::WindowMode::eval_fixed));
        double val_loss = val_loss_sum / double(val_seqs.size());

        auto update = plateau.observe(val_loss);
        if (update.improved) {
            best_ckpt = net.to_checkpoint();
            result.best_val = val_loss;
        }

        double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start)
                          .count();
        log << epoch << "," << plateau.lr() << "," << train_loss_sum / double(batches) << ","
            << val_loss << "," << wall << "\n";
        log.flush();
        result.epochs_run = epoch + 1;
        if (update.stop) break;
    }

    if (best_ckpt.tensors.empty()) best_ckpt = net.to_checkpoint();
    grad::save_checkpoint(ckpt_path, best_ckpt);
    result.checkpoint_path = ckpt_path;
    result.log_path = log_path;
    return result;
}

}  // namespace rolllab::train
