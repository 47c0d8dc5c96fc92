#pragma once

#include <string>
#include <vector>

#include "rolllab/baselines.hpp"
#include "rolllab/dataset.hpp"
#include "rolllab/model.hpp"

namespace rolllab::eval {

// Per-step aggregates over one evaluated split. Index t-1 holds prediction
// step t (so "error at T" reads index T-1).
struct MetricsReport {
    std::string variant;  // network variant or "linear"/"quadratic"
    std::string split;
    int image_size = 0;
    int T_train = 10;
    int T_gen = 20;
    std::vector<double> pixel_error;
    std::vector<double> angvel_rmse;     // empty when not applicable
    std::vector<double> log_perplexity;  // probnet only
    int evaluated = 0;
    std::vector<int> skipped;  // sequence indices shorter than T0 + T_gen
    std::string config_echo;

    double at(const std::vector<double>& curve, int T) const {
        if (T < 1 || T > int(curve.size()))
            fail(Error::Kind::domain, "no metric at horizon " + std::to_string(T));
        return curve[size_t(T - 1)];
    }
};

// streams are [sequence][step][object]
std::vector<double> pixel_error(const std::vector<std::vector<std::vector<Vec2>>>& predicted,
                                const std::vector<std::vector<std::vector<Vec2>>>& truth);
std::vector<double> angvel_rmse(const std::vector<std::vector<std::vector<Vec3>>>& predicted,
                                const std::vector<std::vector<std::vector<Vec3>>>& truth);
// densities are [sequence][step]; returns -E[log p] per step (log_e perplexity)
std::vector<double> log_perplexity(const std::vector<std::vector<double>>& densities);

MetricsReport evaluate_model(const std::string& dataset_dir, model::Model& net,
                             const std::string& split, int T_train, int T_gen);

MetricsReport evaluate_baseline(const std::string& dataset_dir, int degree,
                                const std::string& split, int T_train, int T_gen,
                                int fit_window = 10, bool fit_angvel = false);

void write_report_json(const std::string& path, const std::vector<MetricsReport>& reports);
void write_report_csv(const std::string& path, const std::vector<MetricsReport>& reports);

}  // namespace rolllab::eval
