#pragma once

#include <string>
#include <utility>
#include <vector>

#include "rolllab/checkpoint.hpp"
#include "rolllab/optics.hpp"
#include "rolllab/tensor.hpp"

namespace rolllab::model {

using grad::Tape;
using grad::Tensor;

enum class Variant { dispnet, probnet, posnet, interpnet };

std::string variant_name(Variant v);
Variant variant_from_name(const std::string& name);

struct ModelConfig {
    Variant variant = Variant::dispnet;
    int n_objects = 1;
    int channels = 32;  // per-object distributed-state channels C
    int T0 = 4;
    int image_size = 64;
    int hidden = 64;  // transition hidden filters and readout MLP width
    bool regress_angular_velocity = true;

    int input_frames() const { return variant == Variant::interpnet ? T0 + 1 : T0; }
    int pool_count() const;   // pooling stages taking image_size down to 8
    int grid() const { return 8; }
    // concentrated-state width: 2 (pixels) or 5 (mu, beta1, beta2, theta)
    int p_dim() const { return variant == Variant::probnet ? 5 : 2; }

    std::string to_json() const;
    static ModelConfig from_json(const std::string& text);
};

// Per-object recurrent state h = (s, p).
struct NetState {
    std::vector<Tensor> s;  // each grid x grid x C
    std::vector<Tensor> p;  // each p_dim
};

struct StepOutput {
    std::vector<Tensor> position;    // per object, length 2 (mu for probnet)
    std::vector<Tensor> covariance;  // probnet only, 2x2
    std::vector<Tensor> angvel;      // per object, length 3 (when enabled)
};

struct RolloutResult {
    StepOutput step0;                    // decode of h_0
    std::vector<StepOutput> steps;       // steps 1..T
    std::vector<Tensor> final_position;  // interpnet: y_{T_final} readout from h_0
};

class Model {
public:
    ModelConfig config;
    std::vector<std::pair<std::string, Tensor>> params;

    Model(ModelConfig cfg, std::uint64_t seed);

    int parameter_count() const;
    Tensor& param(const std::string& name);
    void watch(Tape& tape);

    // frames -> constant H x W x (3 * frame count) tensor, values in [0,1]
    Tensor stack_frames(const std::vector<optics::Image>& frames) const;

    NetState encode(Tape& tape, const Tensor& input);
    NetState transition(Tape& tape, const NetState& state);
    StepOutput decode(Tape& tape, const NetState& state);
    std::vector<Tensor> decode_final(Tape& tape, const NetState& h0);  // interpnet head

    RolloutResult rollout(Tape& tape, const std::vector<optics::Image>& frames, int T);
    // rollout from an already-encoded state (used by the equivariance checks)
    RolloutResult rollout_from(Tape& tape, const NetState& h0, int T);

    grad::Checkpoint to_checkpoint() const;
    static Model from_checkpoint(const grad::Checkpoint& ckpt);

private:
    Tensor xy_grid_;  // grid x grid x 2 constant, coordinates in [-1,1]
    void build_params(std::uint64_t seed);
    // xy-grid-augmented two-layer position readout shared by posnet ("pos.")
    // and the interpnet final head ("final.")
    Tensor readout_position(Tape& tape, const Tensor& s, const std::string& prefix = "pos.");
};

}  // namespace rolllab::model
