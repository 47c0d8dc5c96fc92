#pragma once

#include <functional>
#include <optional>
#include <vector>

#include "rolllab/surface.hpp"

namespace rolllab::mech {

struct BallState {
    Vec3 position;
    Vec3 velocity;
    Vec3 angular_velocity;
    double radius = 0.225;
    int color_index = 0;
    Vec3 euler_orientation;  // xyz Euler angles, radians
    bool in_contact = false;
};

struct WallBox {
    double min_x, max_x, min_y, max_y;
};

enum class Family { hemispherical, ellipsoidal, heightfield };

struct FamilyConfig {
    Family family = Family::hemispherical;
    int n_balls = 1;
    // candidate radii; one is picked uniformly per ball
    std::vector<double> radius_choices{0.225};
};

// Echo of the raw draws behind a scenario, kept for distribution tests.
struct SampleInfo {
    std::vector<double> elevations;       // bowl families
    std::vector<double> speed_components; // |v_x|,|v_y| before projection
    std::vector<double> speeds;           // final tangential speeds
};

struct Scenario {
    SurfaceModel surface;
    std::vector<BallState> balls;
    double elasticity = 0.7;             // ball-ball restitution
    double surface_elasticity = 0.0;
    std::optional<WallBox> wall_box;
    std::uint64_t rng_seed = 0;
    SampleInfo sample;
};

struct SimParams {
    double dt = 1.0 / 120.0;
    double gravity = 9.81;
    double mu_r = 0.15;       // rolling-resistance coefficient
    double surface_restitution = 0.0;  // normal bounce on touchdown
    double stop_speed = 1e-3; // all balls slower -> recording ends
    int min_raw_frames = 250;
    int max_raw_frames = 4000;
    int subsample = 3;        // 120 Hz -> 40 fps
};

struct Frame {
    std::vector<BallState> balls;
};

struct Trajectory {
    std::vector<Frame> frames;                        // 40 fps
    std::vector<std::vector<Vec2>> screen_positions;  // per frame, per ball
    int raw_frame_count = 0;
    int collision_count = 0;  // ball-ball collision events at 120 Hz
};

enum class SimStatus { ok, too_short, left_bowl };

struct SimOutcome {
    SimStatus status = SimStatus::ok;
    Trajectory trajectory;
};

// rotation helpers for the body-fixed ball texture
std::array<double, 9> euler_to_matrix(const Vec3& euler);
Vec3 matrix_to_euler(const std::array<double, 9>& m);

Scenario sample_scenario(const FamilyConfig& config, Rng& rng);

// one 120 Hz integration step against the surface (no ball-ball handling)
BallState step(const BallState& state, const SurfaceModel& surface, const SimParams& params);

// pairwise impulse resolution for equal masses plus elastic wall reflection;
// returns the number of ball-ball collision events resolved
int resolve_collisions(std::vector<BallState>& balls, double restitution,
                       const std::optional<WallBox>& wall_box);

// Full episode: 120 Hz integration, collision resolution, stop detection,
// x3 subsampling. `project` (optional) supplies per-frame screen positions.
SimOutcome simulate_sequence(const Scenario& scenario, const SimParams& params,
                             const std::function<Vec2(const Vec3&)>& project = nullptr);

}  // namespace rolllab::mech
