#pragma once

#include <limits>
#include <string>
#include <vector>

#include "rolllab/dataset.hpp"
#include "rolllab/model.hpp"
#include "rolllab/optim.hpp"

namespace rolllab::train {

using grad::Tape;
using grad::Tensor;

struct LossConfig {
    model::Variant variant = model::Variant::dispnet;
    double angular_weight = 1.0;
    double det_reg_lambda = 0.01;  // probnet only
    bool angular = true;
};

// Loss over prediction steps 1..T against window targets y_1..y_T (y_0 is the
// last observed position and is not scored).
Tensor compute_loss(Tape& tape, const model::RolloutResult& rollout,
                    const data::TrainingWindow& window, const LossConfig& config);

struct TrainSchedule {
    int batch_size = 8;
    double lr_initial = 1e-4;
    double lr_decay_factor = 10.0;
    int plateau_epochs = 100;
    int stop_epochs = 200;
    int max_epochs = 300;
    int T_train = 10;
    std::uint64_t seed = 1;
};

// Plateau-based learning-rate decay and early stopping, factored out so the
// schedule can be driven by a stubbed evaluator in tests.
class PlateauSchedule {
public:
    PlateauSchedule(const TrainSchedule& cfg)
        : cfg_(cfg), lr_(cfg.lr_initial) {
        if (cfg.stop_epochs < cfg.plateau_epochs)
            fail(Error::Kind::config, "stop_epochs must be at least plateau_epochs");
    }

    struct Update {
        bool improved = false;
        bool lr_dropped = false;
        bool stop = false;
    };

    Update observe(double val_loss);
    double lr() const { return lr_; }
    double best() const { return best_; }

private:
    TrainSchedule cfg_;
    double lr_;
    double best_ = std::numeric_limits<double>::infinity();
    int since_improve_ = 0;
    int since_drop_ = 0;
};

struct TrainResult {
    model::ModelConfig config;
    double best_val = 0;
    int epochs_run = 0;
    std::string checkpoint_path;
    std::string log_path;
};

// Full optimization loop over a generated dataset directory. Writes
// model.ckpt (best validation weights) and train_log.csv under out_dir.
TrainResult train(const std::string& dataset_dir, const model::ModelConfig& config,
                  const TrainSchedule& schedule, const std::string& out_dir);

}  // namespace rolllab::train
