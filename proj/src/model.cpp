#include "rolllab/model.hpp"

#include <cmath>

#include <json.hpp>

namespace rolllab::model {

using nlohmann::json;

std::string variant_name(Variant v) {
    switch (v) {
        case Variant::dispnet: return "dispnet";
        case Variant::probnet: return "probnet";
        case Variant::posnet: return "posnet";
        case Variant::interpnet: return "interpnet";
    }
    fail(Error::Kind::config, "unknown variant");
}

Variant variant_from_name(const std::string& name) {
    if (name == "dispnet") return Variant::dispnet;
    if (name == "probnet") return Variant::probnet;
    if (name == "posnet") return Variant::posnet;
    if (name == "interpnet") return Variant::interpnet;
    fail(Error::Kind::config, "unknown variant name: " + name);
}

int ModelConfig::pool_count() const {
    int p = 0, s = image_size;
    while (s > 8) {
        if (s % 2) fail(Error::Kind::config, "image_size must be 8 * 2^k");
        s /= 2;
        p++;
    }
    if (p > 4) fail(Error::Kind::config, "image_size too large for the four-block encoder");
    return p;
}

std::string ModelConfig::to_json() const {
    json j;
    j["variant"] = variant_name(variant);
    j["n_objects"] = n_objects;
    j["channels"] = channels;
    j["T0"] = T0;
    j["image_size"] = image_size;
    j["hidden"] = hidden;
    j["regress_angular_velocity"] = regress_angular_velocity;
    return j.dump();
}

ModelConfig ModelConfig::from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        fail(Error::Kind::format, std::string("model config: ") + e.what());
    }
    ModelConfig c;
    try {
        c.variant = variant_from_name(j.at("variant").get<std::string>());
        c.n_objects = j.at("n_objects").get<int>();
        c.channels = j.at("channels").get<int>();
        c.T0 = j.at("T0").get<int>();
        c.image_size = j.at("image_size").get<int>();
        c.hidden = j.at("hidden").get<int>();
        c.regress_angular_velocity = j.at("regress_angular_velocity").get<bool>();
    } catch (const json::exception& e) {
        fail(Error::Kind::format, std::string("model config: missing field: ") + e.what());
    }
    return c;
}

namespace {

Tensor he_conv(int cin, int cout, Rng& rng) {
    return Tensor::gaussian({3, 3, cin, cout}, std::sqrt(2.0 / (9.0 * cin)), rng);
}

Tensor he_affine(int n, int m, Rng& rng) {
    return Tensor::gaussian({n, m}, std::sqrt(2.0 / n), rng);
}

}  // namespace

Model::Model(ModelConfig cfg, std::uint64_t seed) : config(cfg) {
    if (cfg.n_objects < 1 || cfg.n_objects > 3)
        fail(Error::Kind::config, "n_objects must be 1 to 3");
    if (cfg.T0 < 1 || cfg.channels < 1 || cfg.hidden < 1)
        fail(Error::Kind::config, "T0, channels and hidden must be positive");
    cfg.pool_count();  // validates image_size
    build_params(seed);

    int g = config.grid();
    std::vector<double> xy(size_t(g * g * 2));
    for (int i = 0; i < g; i++)
        for (int j = 0; j < g; j++) {
            xy[size_t((i * g + j) * 2 + 0)] = 2.0 * (j + 0.5) / g - 1.0;
            xy[size_t((i * g + j) * 2 + 1)] = 2.0 * (i + 0.5) / g - 1.0;
        }
    xy_grid_ = Tensor({g, g, 2}, std::move(xy));
}

void Model::build_params(std::uint64_t seed) {
    Rng rng(seed);
    int C = config.channels, n = config.n_objects, g = config.grid();
    int flat = g * g * C;
    int enc_channels[5] = {3 * config.input_frames(), 16, 32, 32, C * n};
    for (int k = 0; k < 4; k++) {
        params.emplace_back("enc.conv" + std::to_string(k) + ".w",
                            he_conv(enc_channels[k], enc_channels[k + 1], rng));
        params.emplace_back("enc.conv" + std::to_string(k) + ".b",
                            Tensor::zeros({enc_channels[k + 1]}));
    }
    params.emplace_back("trans.conv0.w", he_conv(2 * C, config.hidden, rng));
    params.emplace_back("trans.conv0.b", Tensor::zeros({config.hidden}));
    params.emplace_back("trans.conv1.w", he_conv(config.hidden, C, rng));
    params.emplace_back("trans.conv1.b", Tensor::zeros({C}));

    if (config.variant == Variant::posnet) {
        int aug = g * g * (C + 2);
        params.emplace_back("pos.w0", he_affine(aug, config.hidden, rng));
        params.emplace_back("pos.b0", Tensor::zeros({config.hidden}));
        params.emplace_back("pos.w1", he_affine(config.hidden, 2, rng));
        params.emplace_back("pos.b1", Tensor::zeros({2}));
    } else {
        params.emplace_back("p0.w", he_affine(flat, config.p_dim(), rng));
        Tensor p0b = Tensor::zeros({config.p_dim()});
        if (config.variant == Variant::probnet) {
            // Start the covariance near the identity: a zero pre-activation sits
            // mid-range of the (0.01, 100) eigenvalue window, which drowns the
            // precision-weighted position gradients at the start of training.
            double unit = std::log(0.99 / 99.0);  // scaled_sigmoid^-1(1.0)
            p0b[2] = unit;
            p0b[3] = unit;
        }
        params.emplace_back("p0.b", std::move(p0b));
        params.emplace_back("phip.w", he_affine(flat, config.p_dim(), rng));
        params.emplace_back("phip.b", Tensor::zeros({config.p_dim()}));
    }
    if (config.variant == Variant::interpnet) {
        // Same grid-augmented readout as posnet: a plain affine on the flat
        // state memorizes position-specific weights and degrades off the
        // training window distribution.
        int aug = g * g * (C + 2);
        params.emplace_back("final.w0", he_affine(aug, config.hidden, rng));
        params.emplace_back("final.b0", Tensor::zeros({config.hidden}));
        params.emplace_back("final.w1", he_affine(config.hidden, 2, rng));
        params.emplace_back("final.b1", Tensor::zeros({2}));
    }
    if (config.regress_angular_velocity) {
        params.emplace_back("angvel.w", he_affine(flat, 3, rng));
        params.emplace_back("angvel.b", Tensor::zeros({3}));
    }
}

int Model::parameter_count() const {
    int n = 0;
    for (const auto& [name, t] : params) n += t.size();
    return n;
}

Tensor& Model::param(const std::string& name) {
    for (auto& [n, t] : params)
        if (n == name) return t;
    fail(Error::Kind::config, "no parameter named " + name);
}

void Model::watch(Tape& tape) {
    for (auto& [name, t] : params) tape.watch(t);
}

Tensor Model::stack_frames(const std::vector<optics::Image>& frames) const {
    int F = config.input_frames();
    if (int(frames.size()) != F)
        fail(Error::Kind::shape, "expected " + std::to_string(F) + " input frames, got " +
                                     std::to_string(frames.size()));
    int H = config.image_size;
    std::vector<double> v(size_t(H * H * 3 * F));
    for (int f = 0; f < F; f++) {
        const auto& img = frames[size_t(f)];
        if (img.width != H || img.height != H)
            fail(Error::Kind::shape, "frame size does not match model image_size");
        for (int y = 0; y < H; y++)
            for (int x = 0; x < H; x++) {
                const unsigned char* px = img.pixel(y, x);
                for (int c = 0; c < 3; c++)
                    v[size_t((y * H + x) * (3 * F) + f * 3 + c)] = px[c] / 255.0;
            }
    }
    return Tensor({H, H, 3 * F}, std::move(v));
}

NetState Model::encode(Tape& tape, const Tensor& input) {
    int H = config.image_size, F = config.input_frames();
    if (input.shape != grad::Shape{H, H, 3 * F})
        fail(Error::Kind::shape, "encoder input shape mismatch");
    int pools = config.pool_count();
    Tensor x = input;
    for (int k = 0; k < 4; k++) {
        x = tape.conv2d(x, param("enc.conv" + std::to_string(k) + ".w"),
                        param("enc.conv" + std::to_string(k) + ".b"));
        x = tape.pointwise(x, grad::Pointwise::relu);
        if (k < pools) x = tape.avgpool2(x);
    }
    int C = config.channels, g = config.grid();
    NetState h;
    for (int o = 0; o < config.n_objects; o++) {
        Tensor s = tape.slice_channels(x, o * C, C);
        Tensor flat = reshape(s, {g * g * C});
        Tensor p;
        if (config.variant == Variant::posnet)
            p = readout_position(tape, s);
        else
            p = tape.affine(flat, param("p0.w"), param("p0.b"));
        h.s.push_back(s);
        h.p.push_back(p);
    }
    return h;
}

Tensor Model::readout_position(Tape& tape, const Tensor& s, const std::string& prefix) {
    int g = config.grid(), C = config.channels;
    Tensor aug = tape.concat_channels(s, xy_grid_);
    Tensor flat = reshape(aug, {g * g * (C + 2)});
    Tensor hid = tape.pointwise(tape.affine(flat, param(prefix + "w0"), param(prefix + "b0")),
                                grad::Pointwise::relu);
    return tape.affine(hid, param(prefix + "w1"), param(prefix + "b1"));
}

NetState Model::transition(Tape& tape, const NetState& state) {
    int n = config.n_objects, C = config.channels, g = config.grid();
    if (int(state.s.size()) != n || int(state.p.size()) != n)
        fail(Error::Kind::shape, "state object count does not match config");
    NetState out;
    for (int o = 0; o < n; o++) {
        // interaction channel: sum of the other objects' tensors (zeros if none)
        Tensor others;
        bool have = false;
        for (int j = 0; j < n; j++) {
            if (j == o) continue;
            others = have ? tape.add(others, state.s[size_t(j)]) : state.s[size_t(j)];
            have = true;
        }
        if (!have) others = Tensor::zeros({g, g, C});
        Tensor joined = tape.concat_channels(state.s[size_t(o)], others);
        Tensor hid = tape.pointwise(tape.conv2d(joined, param("trans.conv0.w"), param("trans.conv0.b")),
                                    grad::Pointwise::relu);
        Tensor s_new = tape.conv2d(hid, param("trans.conv1.w"), param("trans.conv1.b"));

        Tensor p_new;
        if (config.variant == Variant::posnet) {
            p_new = readout_position(tape, s_new);
        } else {
            Tensor flat_old = reshape(state.s[size_t(o)], {g * g * C});
            p_new = tape.add(state.p[size_t(o)],
                             tape.affine(flat_old, param("phip.w"), param("phip.b")));
        }
        out.s.push_back(s_new);
        out.p.push_back(p_new);
    }
    return out;
}

StepOutput Model::decode(Tape& tape, const NetState& state) {
    StepOutput out;
    int g = config.grid(), C = config.channels;
    for (size_t o = 0; o < state.p.size(); o++) {
        const Tensor& p = state.p[o];
        if (config.variant == Variant::probnet) {
            out.position.push_back(tape.slice(p, 0, 2));
            Tensor l1 = tape.scaled_sigmoid(tape.slice(p, 2, 1));
            Tensor l2 = tape.scaled_sigmoid(tape.slice(p, 3, 1));
            out.covariance.push_back(tape.rotation_covariance(l1, l2, tape.slice(p, 4, 1)));
        } else {
            out.position.push_back(p);
        }
        if (config.regress_angular_velocity) {
            Tensor flat = reshape(state.s[o], {g * g * C});
            out.angvel.push_back(tape.affine(flat, param("angvel.w"), param("angvel.b")));
        }
    }
    return out;
}

std::vector<Tensor> Model::decode_final(Tape& tape, const NetState& h0) {
    if (config.variant != Variant::interpnet)
        fail(Error::Kind::config, "final-position head exists only for interpnet");
    std::vector<Tensor> out;
    for (const auto& s : h0.s) out.push_back(readout_position(tape, s, "final."));
    return out;
}

RolloutResult Model::rollout_from(Tape& tape, const NetState& h0, int T) {
    if (T < 1) fail(Error::Kind::domain, "rollout horizon must be at least 1");
    RolloutResult r;
    r.step0 = decode(tape, h0);
    if (config.variant == Variant::interpnet) r.final_position = decode_final(tape, h0);
    NetState h = h0;
    for (int t = 0; t < T; t++) {
        h = transition(tape, h);
        r.steps.push_back(decode(tape, h));
    }
    return r;
}

RolloutResult Model::rollout(Tape& tape, const std::vector<optics::Image>& frames, int T) {
    Tensor input = stack_frames(frames);
    return rollout_from(tape, encode(tape, input), T);
}

grad::Checkpoint Model::to_checkpoint() const {
    grad::Checkpoint ckpt;
    ckpt.config = config.to_json();
    for (const auto& [name, t] : params) ckpt.tensors.emplace_back(name, t.detached());
    return ckpt;
}

Model Model::from_checkpoint(const grad::Checkpoint& ckpt) {
    Model m(ModelConfig::from_json(ckpt.config), 0);
    if (ckpt.tensors.size() != m.params.size())
        fail(Error::Kind::format, "checkpoint tensor count does not match config");
    for (size_t i = 0; i < m.params.size(); i++) {
        const auto& [name, t] = ckpt.tensors[i];
        auto& [want_name, want] = m.params[i];
        if (name != want_name)
            fail(Error::Kind::format, "checkpoint tensor " + name + " where " + want_name +
                                          " was expected");
        if (t.shape != want.shape)
            fail(Error::Kind::format, "checkpoint tensor " + name + " has the wrong shape");
        want = t.detached();
    }
    return m;
}

}  // namespace rolllab::model
