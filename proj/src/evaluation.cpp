#include "rolllab/evaluation.hpp"

#include <cmath>
#include <fstream>

#include <json.hpp>

namespace rolllab::eval {

using nlohmann::json;

namespace {

template <typename T>
void check_aligned(const std::vector<std::vector<std::vector<T>>>& a,
                   const std::vector<std::vector<std::vector<T>>>& b) {
    if (a.size() != b.size()) fail(Error::Kind::shape, "metric streams: sequence count mismatch");
    if (a.empty()) fail(Error::Kind::shape, "metric streams: no sequences");
    for (size_t s = 0; s < a.size(); s++) {
        if (a[s].size() != b[s].size() || a[s].size() != a[0].size())
            fail(Error::Kind::shape, "metric streams: step count mismatch");
        for (size_t t = 0; t < a[s].size(); t++)
            if (a[s][t].size() != b[s][t].size())
                fail(Error::Kind::shape, "metric streams: object count mismatch");
    }
}

const std::vector<int>& pick_split(const data::SplitIndices& splits, const std::string& name) {
    if (name == "train") return splits.train;
    if (name == "val") return splits.val;
    if (name == "test") return splits.test;
    fail(Error::Kind::config, "unknown split: " + name);
}

json report_json(const MetricsReport& r) {
    json j;
    j["variant"] = r.variant;
    j["split"] = r.split;
    j["image_size"] = r.image_size;
    j["T_train"] = r.T_train;
    j["T_gen"] = r.T_gen;
    j["evaluated"] = r.evaluated;
    j["skipped"] = r.skipped;
    if (!r.config_echo.empty()) j["config"] = json::parse(r.config_echo);
    j["per_step"] = {{"pixel_error", r.pixel_error}};
    if (!r.angvel_rmse.empty()) j["per_step"]["angvel_rmse"] = r.angvel_rmse;
    if (!r.log_perplexity.empty()) j["per_step"]["log_perplexity"] = r.log_perplexity;
    json at;
    for (int T : {r.T_train, r.T_gen}) {
        json h;
        h["pixel_error"] = r.at(r.pixel_error, T);
        if (!r.angvel_rmse.empty()) h["angvel_rmse"] = r.at(r.angvel_rmse, T);
        if (!r.log_perplexity.empty()) h["log_perplexity"] = r.at(r.log_perplexity, T);
        at[std::to_string(T)] = h;
    }
    j["at_horizon"] = at;
    return j;
}

}  // namespace

std::vector<double> pixel_error(const std::vector<std::vector<std::vector<Vec2>>>& predicted,
                                const std::vector<std::vector<std::vector<Vec2>>>& truth) {
    check_aligned(predicted, truth);
    size_t steps = predicted[0].size();
    std::vector<double> out(steps, 0.0);
    for (size_t t = 0; t < steps; t++) {
        double sum = 0;
        int count = 0;
        for (size_t s = 0; s < predicted.size(); s++)
            for (size_t o = 0; o < predicted[s][t].size(); o++) {
                double dx = predicted[s][t][o].x - truth[s][t][o].x;
                double dy = predicted[s][t][o].y - truth[s][t][o].y;
                sum += std::sqrt(dx * dx + dy * dy);
                count++;
            }
        out[t] = sum / count;
    }
    return out;
}

std::vector<double> angvel_rmse(const std::vector<std::vector<std::vector<Vec3>>>& predicted,
                                const std::vector<std::vector<std::vector<Vec3>>>& truth) {
    check_aligned(predicted, truth);
    size_t steps = predicted[0].size();
    std::vector<double> out(steps, 0.0);
    for (size_t t = 0; t < steps; t++) {
        double sum = 0;
        int count = 0;
        for (size_t s = 0; s < predicted.size(); s++)
            for (size_t o = 0; o < predicted[s][t].size(); o++) {
                Vec3 d = predicted[s][t][o] - truth[s][t][o];
                sum += d.dot(d);
                count++;
            }
        out[t] = std::sqrt(sum / count);
    }
    return out;
}

std::vector<double> log_perplexity(const std::vector<std::vector<double>>& densities) {
    if (densities.empty()) fail(Error::Kind::shape, "perplexity: no sequences");
    size_t steps = densities[0].size();
    std::vector<double> out(steps, 0.0);
    for (const auto& seq : densities) {
        if (seq.size() != steps) fail(Error::Kind::shape, "perplexity: step count mismatch");
        for (size_t t = 0; t < steps; t++) {
            if (seq[t] <= 0) fail(Error::Kind::domain, "perplexity: density must be positive");
            out[t] -= std::log(seq[t]);
        }
    }
    for (double& v : out) v /= double(densities.size());
    return out;
}

MetricsReport evaluate_model(const std::string& dataset_dir, model::Model& net,
                             const std::string& split, int T_train, int T_gen) {
    data::SplitIndices splits;
    auto manifest = data::load_manifest(dataset_dir, &splits);
    if (manifest.n_objects != net.config.n_objects || manifest.image_size != net.config.image_size)
        fail(Error::Kind::config, "dataset does not match the model configuration");
    const auto& indices = pick_split(splits, split);
    const bool prob = net.config.variant == model::Variant::probnet;
    const bool interp = net.config.variant == model::Variant::interpnet;
    const bool ang = net.config.regress_angular_velocity;

    MetricsReport r;
    r.variant = model::variant_name(net.config.variant);
    r.split = split;
    r.image_size = manifest.image_size;
    r.T_train = T_train;
    r.T_gen = T_gen;
    r.config_echo = net.config.to_json();

    std::vector<std::vector<std::vector<Vec2>>> pred_pos, true_pos;
    std::vector<std::vector<std::vector<Vec3>>> pred_av, true_av;
    std::vector<std::vector<double>> nlls;

    for (int idx : indices) {
        auto rec = data::load_sequence(data::sequence_path(dataset_dir, idx));
        if (rec.length() < manifest.T0 + T_gen) {
            r.skipped.push_back(idx);
            continue;
        }
        Rng rng(0);
        auto w = data::sample_window(rec, manifest.T0, T_gen, data::WindowMode::eval_fixed, rng,
                                     interp);
        std::vector<optics::Image> inputs = w.input_frames;
        if (interp) inputs.push_back(*w.final_frame);
        grad::Tape tape;
        auto rollout = net.rollout(tape, inputs, T_gen);

        std::vector<std::vector<Vec2>> pp, tp;
        std::vector<std::vector<Vec3>> pa, ta;
        std::vector<double> seq_nll;
        for (int t = 1; t <= T_gen; t++) {
            const auto& step = rollout.steps[size_t(t - 1)];
            std::vector<Vec2> pos_p, pos_t;
            std::vector<Vec3> av_p, av_t;
            double nll_sum = 0;
            for (int o = 0; o < manifest.n_objects; o++) {
                const auto& p = step.position[size_t(o)];
                pos_p.push_back({p[0], p[1]});
                pos_t.push_back(w.target_positions[size_t(t)][size_t(o)]);
                if (ang) {
                    const auto& a = step.angvel[size_t(o)];
                    av_p.push_back({a[0], a[1], a[2]});
                    av_t.push_back(w.target_angvels[size_t(t)][size_t(o)]);
                }
                if (prob) {
                    const Vec2& y = w.target_positions[size_t(t)][size_t(o)];
                    grad::Tensor yt({2}, {y.x, y.y});
                    nll_sum += tape.gaussian_nll(yt, step.position[size_t(o)],
                                                 step.covariance[size_t(o)])
                                   .value();
                }
            }
            pp.push_back(pos_p);
            tp.push_back(pos_t);
            if (ang) {
                pa.push_back(av_p);
                ta.push_back(av_t);
            }
            if (prob) seq_nll.push_back(nll_sum / manifest.n_objects);
        }
        pred_pos.push_back(pp);
        true_pos.push_back(tp);
        if (ang) {
            pred_av.push_back(pa);
            true_av.push_back(ta);
        }
        if (prob) nlls.push_back(seq_nll);
        r.evaluated++;
    }

    if (r.evaluated == 0)
        fail(Error::Kind::domain, "no sequence in split '" + split + "' is long enough");
    r.pixel_error = pixel_error(pred_pos, true_pos);
    if (ang) r.angvel_rmse = angvel_rmse(pred_av, true_av);
    if (prob) {
        // -E[log p] computed directly from the NLLs; exponentiating first can
        // underflow to zero for far-horizon rollouts.
        r.log_perplexity.assign(size_t(T_gen), 0.0);
        for (const auto& seq : nlls)
            for (int t = 0; t < T_gen; t++) r.log_perplexity[size_t(t)] += seq[size_t(t)];
        for (double& v : r.log_perplexity) v /= double(nlls.size());
    }
    return r;
}

MetricsReport evaluate_baseline(const std::string& dataset_dir, int degree,
                                const std::string& split, int T_train, int T_gen,
                                int fit_window, bool fit_angvel) {
    data::SplitIndices splits;
    auto manifest = data::load_manifest(dataset_dir, &splits);
    const auto& indices = pick_split(splits, split);

    MetricsReport r;
    r.variant = degree == 1 ? "linear" : "quadratic";
    r.split = split;
    r.image_size = manifest.image_size;
    r.T_train = T_train;
    r.T_gen = T_gen;

    std::vector<std::vector<std::vector<Vec2>>> pred_pos, true_pos;
    std::vector<std::vector<std::vector<Vec3>>> pred_av, true_av;
    // Step t is the t-th frame past the last observation. Baselines observe
    // their whole fit window, so their predicted frames start after it.
    int t0 = fit_window - 1;

    for (int idx : indices) {
        auto rec = data::load_sequence(data::sequence_path(dataset_dir, idx));
        if (rec.length() < std::max(manifest.T0 + T_gen, fit_window + T_gen)) {
            r.skipped.push_back(idx);
            continue;
        }
        std::vector<std::vector<Vec2>> pp, tp;
        std::vector<std::vector<Vec3>> pa, ta;
        std::vector<baselines::PolyFit> pos_fits, av_fits;
        for (int o = 0; o < manifest.n_objects; o++) {
            std::vector<Vec2> pts;
            std::vector<std::vector<double>> avs;
            for (int t = 0; t < fit_window; t++) {
                pts.push_back(rec.positions[size_t(t)][size_t(o)]);
                const Vec3& a = rec.angular_velocities[size_t(t)][size_t(o)];
                avs.push_back({a.x, a.y, a.z});
            }
            pos_fits.push_back(baselines::fit(pts, degree));
            if (fit_angvel) av_fits.push_back(baselines::fit(avs, degree));
        }
        for (int t = 1; t <= T_gen; t++) {
            std::vector<Vec2> pos_p, pos_t;
            std::vector<Vec3> av_p, av_t;
            for (int o = 0; o < manifest.n_objects; o++) {
                pos_p.push_back(baselines::extrapolate2(pos_fits[size_t(o)], double(t0 + t)));
                pos_t.push_back(rec.positions[size_t(t0 + t)][size_t(o)]);
                if (fit_angvel) {
                    auto v = baselines::extrapolate(av_fits[size_t(o)], double(t0 + t));
                    av_p.push_back({v[0], v[1], v[2]});
                    av_t.push_back(rec.angular_velocities[size_t(t0 + t)][size_t(o)]);
                }
            }
            pp.push_back(pos_p);
            tp.push_back(pos_t);
            if (fit_angvel) {
                pa.push_back(av_p);
                ta.push_back(av_t);
            }
        }
        pred_pos.push_back(pp);
        true_pos.push_back(tp);
        if (fit_angvel) {
            pred_av.push_back(pa);
            true_av.push_back(ta);
        }
        r.evaluated++;
    }
    if (r.evaluated == 0)
        fail(Error::Kind::domain, "no sequence in split '" + split + "' is long enough");
    r.pixel_error = pixel_error(pred_pos, true_pos);
    if (fit_angvel) r.angvel_rmse = angvel_rmse(pred_av, true_av);
    return r;
}

void write_report_json(const std::string& path, const std::vector<MetricsReport>& reports) {
    json j;
    for (const auto& r : reports) j[r.variant] = report_json(r);
    std::ofstream os(path);
    if (!os) fail(Error::Kind::io, "cannot write " + path);
    os << j.dump(2) << "\n";
}

void write_report_csv(const std::string& path, const std::vector<MetricsReport>& reports) {
    std::ofstream os(path);
    if (!os) fail(Error::Kind::io, "cannot write " + path);
    os << "variant,split,step,metric,value\n";
    auto rows = [&](const MetricsReport& r, const std::vector<double>& curve,
                    const char* metric) {
        for (size_t t = 0; t < curve.size(); t++)
            os << r.variant << "," << r.split << "," << (t + 1) << "," << metric << ","
               << curve[t] << "\n";
    };
    for (const auto& r : reports) {
        rows(r, r.pixel_error, "pixel_error");
        rows(r, r.angvel_rmse, "angvel_rmse");
        rows(r, r.log_perplexity, "log_perplexity");
    }
}

}  // namespace rolllab::eval
