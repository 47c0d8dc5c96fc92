#pragma once

#include <optional>
#include <string>
#include <vector>

#include "rolllab/optics.hpp"

namespace rolllab::data {

struct DatasetManifest {
    mech::Family family = mech::Family::hemispherical;
    int n_objects = 1;
    int sequence_count = 200;
    int image_size = 64;
    int T0 = 4;
    bool ball_textured = false;
    double split_train = 0.70;
    double split_val = 0.15;
    double split_test = 0.15;
    std::uint64_t master_seed = 1;
};

struct SequenceRecord {
    mech::Family family = mech::Family::hemispherical;
    int n_objects = 1;
    int image_size = 64;
    std::uint64_t scenario_seed = 0;
    int collision_count = 0;
    std::vector<optics::Image> frames;                      // 40 fps
    std::vector<std::vector<Vec2>> positions;               // [frame][object], pixels
    std::vector<std::vector<Vec3>> angular_velocities;      // [frame][object], rad/s

    int length() const { return int(frames.size()); }
};

// Observed frames plus supervision targets. Frame index `start + T0 - 1` is
// time 0; targets run y_0..y_T (T + 1 entries).
struct TrainingWindow {
    int start = 0;
    std::vector<optics::Image> input_frames;  // T0 frames (plus final frame for interpolation)
    std::vector<std::vector<Vec2>> target_positions;
    std::vector<std::vector<Vec3>> target_angvels;
    std::optional<optics::Image> final_frame;
};

enum class WindowMode { train_random, eval_fixed };

struct SplitIndices {
    std::vector<int> train, val, test;
};

std::string family_name(mech::Family family);
mech::Family family_from_name(const std::string& name);

// Writes manifest.json plus seq/NNNNN.seq under `out_dir`, resampling rejected
// scenarios with fresh derived seeds. Returns the split assignment.
SplitIndices generate_dataset(const DatasetManifest& manifest, const std::string& out_dir);

SplitIndices compute_splits(const DatasetManifest& manifest);

DatasetManifest load_manifest(const std::string& dataset_dir, SplitIndices* splits = nullptr);

std::string sequence_path(const std::string& dataset_dir, int index);

void save_sequence(const std::string& path, const SequenceRecord& record);
SequenceRecord load_sequence(const std::string& path);

TrainingWindow sample_window(const SequenceRecord& record, int T0, int T, WindowMode mode,
                             Rng& rng, bool with_final_frame = false);

}  // namespace rolllab::data
