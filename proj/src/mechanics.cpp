#include "rolllab/mechanics.hpp"

#include <algorithm>
#include <cmath>

namespace rolllab::mech {

namespace {

constexpr double kContactTol = 1e-9;

bool finite(const Vec3& v) {
    return std::isfinite(v.x) && std::isfinite(v.y) && std::isfinite(v.z);
}

// rolling-body mechanical energy per unit mass: 7/10 v^2 + g h
double rolling_energy(const BallState& b, double gravity) {
    return 0.7 * b.velocity.dot(b.velocity) + gravity * b.position.z;
}

std::array<double, 9> mat_mul(const std::array<double, 9>& a, const std::array<double, 9>& b) {
    std::array<double, 9> r{};
    for (int i = 0; i < 3; i++)
        for (int j = 0; j < 3; j++)
            for (int k = 0; k < 3; k++) r[size_t(i * 3 + j)] += a[size_t(i * 3 + k)] * b[size_t(k * 3 + j)];
    return r;
}

std::array<double, 9> axis_angle_matrix(const Vec3& axis, double angle) {
    Vec3 k = axis.normalized();
    double c = std::cos(angle), s = std::sin(angle), t = 1 - c;
    return {c + k.x * k.x * t,       k.x * k.y * t - k.z * s, k.x * k.z * t + k.y * s,
            k.y * k.x * t + k.z * s, c + k.y * k.y * t,       k.y * k.z * t - k.x * s,
            k.z * k.x * t - k.y * s, k.z * k.y * t + k.x * s, c + k.z * k.z * t};
}

}  // namespace

std::array<double, 9> euler_to_matrix(const Vec3& e) {
    double cx = std::cos(e.x), sx = std::sin(e.x);
    double cy = std::cos(e.y), sy = std::sin(e.y);
    double cz = std::cos(e.z), sz = std::sin(e.z);
    std::array<double, 9> rx{1, 0, 0, 0, cx, -sx, 0, sx, cx};
    std::array<double, 9> ry{cy, 0, sy, 0, 1, 0, -sy, 0, cy};
    std::array<double, 9> rz{cz, -sz, 0, sz, cz, 0, 0, 0, 1};
    return mat_mul(rz, mat_mul(ry, rx));  // R = Rz * Ry * Rx
}

Vec3 matrix_to_euler(const std::array<double, 9>& m) {
    double sy = -m[6];
    sy = std::clamp(sy, -1.0, 1.0);
    double ey = std::asin(sy);
    double ex, ez;
    if (std::fabs(sy) < 1.0 - 1e-12) {
        ex = std::atan2(m[7], m[8]);
        ez = std::atan2(m[3], m[0]);
    } else {  // gimbal lock: fold everything into ex
        ex = std::atan2(-m[5], m[4]);
        ez = 0;
    }
    return {ex, ey, ez};
}

BallState step(const BallState& state, const SurfaceModel& surface, const SimParams& params) {
    const double dt = params.dt;
    const Vec3 g_vec{0, 0, -params.gravity};

    // ballistic candidate decides contact vs flight
    BallState next = state;
    Vec3 v_cand = state.velocity + g_vec * dt;
    Vec3 c_cand = state.position + v_cand * dt;
    auto cl = surface.closest(c_cand);

    if (cl.distance >= state.radius - kContactTol) {
        // free flight (semi-implicit Euler)
        next.velocity = v_cand;
        next.position = c_cand;
        next.in_contact = false;
        return next;
    }

    // contact phase
    auto cl0 = surface.closest(state.position);
    Vec3 n = cl0.normal;
    Vec3 v = state.velocity;

    if (!state.in_contact) {
        // touchdown: normal velocity absorbed per surface restitution (0 in
        // all scenario families, so the ball settles into rolling)
        double vn = v.dot(n);
        if (vn < 0) v = v - n * ((1.0 + params.surface_restitution) * vn);
    }

    double prev_energy = rolling_energy(state, params.gravity);

    // rolling solid sphere: tangential gravity scaled by 5/7
    Vec3 g_t = g_vec - n * g_vec.dot(n);
    v += g_t * ((5.0 / 7.0) * dt);
    // rolling resistance opposes the velocity, never reverses it
    double speed = v.norm();
    if (params.mu_r > 0 && speed > 0) {
        double dv = params.mu_r * params.gravity * dt;
        v = v * (std::max(0.0, speed - dv) / speed);
    }
    // keep velocity in the tangent plane
    v = v - n * v.dot(n);

    Vec3 c = state.position + v * dt;
    auto cl1 = surface.closest(c);
    n = cl1.normal;
    c = cl1.point + n * state.radius;
    v = v - n * v.dot(n);

    next.position = c;
    next.velocity = v;
    next.in_contact = true;

    // constraint projection can add a little energy; trim speed so the total
    // never increases
    double energy = rolling_energy(next, params.gravity);
    if (energy > prev_energy) {
        double ke = prev_energy - params.gravity * next.position.z;
        double v2 = next.velocity.dot(next.velocity);
        if (ke <= 0) {
            next.velocity = {0, 0, 0};
        } else if (v2 > 0) {
            next.velocity = next.velocity * std::sqrt(std::max(0.0, ke / 0.7) / v2);
        }
    }

    // rolling constraint
    next.angular_velocity = n.cross(next.velocity) * (1.0 / state.radius);
    return next;
}

int resolve_collisions(std::vector<BallState>& balls, double restitution,
                       const std::optional<WallBox>& wall_box) {
    int events = 0;
    for (size_t i = 0; i < balls.size(); i++)
        for (size_t j = i + 1; j < balls.size(); j++) {
            Vec3 d = balls[j].position - balls[i].position;
            double dist = d.norm();
            double rsum = balls[i].radius + balls[j].radius;
            if (dist >= rsum || dist == 0) continue;
            Vec3 n = d * (1.0 / dist);
            // separate overlapping pair symmetrically
            double push = 0.5 * (rsum - dist);
            balls[i].position -= n * push;
            balls[j].position += n * push;
            // equal masses: exchange the scaled normal component
            double vrel = (balls[i].velocity - balls[j].velocity).dot(n);
            if (vrel > 0) {
                double impulse = 0.5 * (1 + restitution) * vrel;
                balls[i].velocity -= n * impulse;
                balls[j].velocity += n * impulse;
                events++;
            }
        }
    if (wall_box) {
        for (auto& b : balls) {
            if (b.position.x - b.radius < wall_box->min_x) {
                b.position.x = wall_box->min_x + b.radius;
                if (b.velocity.x < 0) b.velocity.x = -b.velocity.x;
            }
            if (b.position.x + b.radius > wall_box->max_x) {
                b.position.x = wall_box->max_x - b.radius;
                if (b.velocity.x > 0) b.velocity.x = -b.velocity.x;
            }
            if (b.position.y - b.radius < wall_box->min_y) {
                b.position.y = wall_box->min_y + b.radius;
                if (b.velocity.y < 0) b.velocity.y = -b.velocity.y;
            }
            if (b.position.y + b.radius > wall_box->max_y) {
                b.position.y = wall_box->max_y - b.radius;
                if (b.velocity.y > 0) b.velocity.y = -b.velocity.y;
            }
        }
    }
    return events;
}

Scenario sample_scenario(const FamilyConfig& config, Rng& rng) {
    if (config.n_balls < 1 || config.n_balls > 3)
        fail(Error::Kind::config, "scenario must have 1 to 3 balls");
    Scenario sc;
    sc.rng_seed = 0;
    sc.elasticity = 0.7;
    sc.surface_elasticity = 0.0;

    const bool bowl = config.family != Family::heightfield;
    if (config.family == Family::hemispherical) {
        sc.surface = SurfaceModel::bowl(1.0, 0.0);
    } else if (config.family == Family::ellipsoidal) {
        double a = rng.uniform(0.5, 1.0);
        double rot = rng.uniform(-M_PI, M_PI);
        sc.surface = SurfaceModel::bowl(a, rot);
    } else {
        std::uint64_t seed = rng.next_u64();
        double scale = rng.uniform(0.2, 0.7);
        WindowTransform win;
        win.rotation = rng.uniform(-M_PI, M_PI);
        win.offset_x = rng.uniform(0.0, 8.0);
        win.offset_y = rng.uniform(0.0, 8.0);
        sc.surface = SurfaceModel::heightfield(seed, scale, win);
        sc.wall_box = WallBox{-1.25, 1.25, -1.25, 1.25};
    }

    for (int attempt = 0;; attempt++) {
        if (attempt > 100)
            fail(Error::Kind::numeric, "scenario sampling: placement failed 100 times");
        sc.balls.clear();
        sc.sample = SampleInfo{};
        bool ok = true;
        for (int bi = 0; bi < config.n_balls; bi++) {
            BallState ball;
            ball.color_index = bi;
            ball.radius = config.radius_choices[rng.below(config.radius_choices.size())];
            ball.euler_orientation = {rng.uniform(-M_PI, M_PI), rng.uniform(-M_PI, M_PI),
                                      rng.uniform(-M_PI, M_PI)};

            if (bowl) {
                double elevation = rng.uniform(-9 * M_PI / 10, -M_PI / 2);
                double azimuth = rng.uniform(-M_PI, M_PI);
                sc.sample.elevations.push_back(elevation);
                double psi = -elevation;  // polar angle from +z, pi/2 = rim
                Vec3 dir{std::sin(psi) * std::cos(azimuth), std::sin(psi) * std::sin(azimuth),
                         std::cos(psi)};
                Vec3 sp{sc.surface.a * dir.x, dir.y, 1.0 + dir.z};
                double c = std::cos(sc.surface.z_rotation), s = std::sin(sc.surface.z_rotation);
                sp = {c * sp.x - s * sp.y, s * sp.x + c * sp.y, sp.z};
                Vec3 n = sc.surface.normal(sp.x, sp.y);
                ball.position = sp + n * ball.radius;
            } else {
                double x = rng.uniform(-1.0, 1.0);
                double y = rng.uniform(-1.0, 1.0);
                // sphere-trace down from the camera plane until the ball rests
                // on the surface
                Vec3 c{x, y, 2.0};
                for (int it = 0; it < 200; it++) {
                    double d = sc.surface.closest(c).distance - ball.radius;
                    if (std::fabs(d) < 1e-10) break;
                    c.z -= d;
                }
                ball.position = c;
            }

            auto cl = sc.surface.closest(ball.position);
            Vec3 n = cl.normal;
            double lo = bowl ? 5.0 : 2.0, hi = bowl ? 10.0 : 4.0;
            double vx = rng.sign() * rng.uniform(lo, hi);
            double vy = rng.sign() * rng.uniform(lo, hi);
            sc.sample.speed_components.push_back(std::fabs(vx));
            sc.sample.speed_components.push_back(std::fabs(vy));
            Vec3 v{vx, vy, 0};
            v = v - n * v.dot(n);
            if (bowl && config.n_balls > 1) {
                double mag = rng.uniform(10.0, 15.0);
                double vn = v.norm();
                if (vn < 1e-9) { ok = false; break; }
                v = v * (mag / vn);
            }
            sc.sample.speeds.push_back(v.norm());
            ball.velocity = v;
            ball.angular_velocity = n.cross(v) * (1.0 / ball.radius);
            ball.in_contact = true;
            sc.balls.push_back(ball);
        }
        if (!ok) continue;
        // no initial overlap between balls
        bool overlap = false;
        for (size_t i = 0; i < sc.balls.size() && !overlap; i++)
            for (size_t j = i + 1; j < sc.balls.size(); j++)
                if ((sc.balls[i].position - sc.balls[j].position).norm() <
                    sc.balls[i].radius + sc.balls[j].radius)
                    overlap = true;
        if (!overlap) break;
    }
    return sc;
}

SimOutcome simulate_sequence(const Scenario& scenario, const SimParams& params,
                             const std::function<Vec2(const Vec3&)>& project) {
    SimOutcome out;
    std::vector<BallState> balls = scenario.balls;
    const bool bowl = scenario.surface.kind == SurfaceKind::hemispherical_bowl ||
                      scenario.surface.kind == SurfaceKind::ellipsoidal_bowl;

    auto record = [&](int raw_idx) {
        if (raw_idx % params.subsample != 0) return;
        Frame f;
        f.balls = balls;
        out.trajectory.frames.push_back(std::move(f));
        if (project) {
            std::vector<Vec2> px;
            for (const auto& b : balls) px.push_back(project(b.position));
            out.trajectory.screen_positions.push_back(std::move(px));
        }
    };

    int raw = 0;
    for (; raw < params.max_raw_frames; raw++) {
        record(raw);
        for (auto& b : balls) b = step(b, scenario.surface, params);
        out.trajectory.collision_count +=
            resolve_collisions(balls, scenario.elasticity, scenario.wall_box);
        for (auto& b : balls) {
            if (!finite(b.position) || !finite(b.velocity))
                fail(Error::Kind::numeric, "simulation diverged to a non-finite state");
            // spin the body-fixed texture frame
            double w = b.angular_velocity.norm();
            if (w > 0) {
                auto rot = axis_angle_matrix(b.angular_velocity, w * params.dt);
                b.euler_orientation =
                    matrix_to_euler(mat_mul(rot, euler_to_matrix(b.euler_orientation)));
            }
        }
        if (bowl) {
            for (const auto& b : balls) {
                if (scenario.surface.bowl_radial(b.position.x, b.position.y) > 0.98 ||
                    b.position.z > 1.5) {
                    out.status = SimStatus::left_bowl;
                    return out;
                }
            }
        }
        bool all_stopped = true;
        for (const auto& b : balls)
            if (b.velocity.norm() >= params.stop_speed) all_stopped = false;
        if (all_stopped) {
            raw++;
            break;
        }
    }
    out.trajectory.raw_frame_count = raw;
    if (raw < params.min_raw_frames) {
        out.status = SimStatus::too_short;
        return out;
    }
    out.status = SimStatus::ok;
    return out;
}

}  // namespace rolllab::mech
