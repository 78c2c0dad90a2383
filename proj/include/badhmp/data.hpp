#pragma once

#include <Eigen/Geometry>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <numbers>
#include <string>
#include <vector>

#include "badhmp/motion_core.hpp"
#include "badhmp/rng.hpp"
#include "badhmp/types.hpp"

namespace badhmp {

enum class Provenance { Clean, Poisoned };

struct Dataset {
    std::vector<MotionSequence> samples;
    SkeletonTopology topology;
    std::string split_tag; // "train" or "test"
    Provenance provenance = Provenance::Clean;

    std::size_t size() const { return samples.size(); }
    bool empty() const { return samples.empty(); }

    const MotionSequence* find(const std::string& id) const {
        for (const auto& s : samples)
            if (s.sample_id == id) return &s;
        return nullptr;
    }
};

// The 17-joint stick skeleton used by the synthetic generator.
//
//   pelvis(0) - spine(1) - chest(2) - neck(3) - head(4)
//   chest - {l,r}_shoulder - elbow - wrist
//   pelvis - {l,r}_hip - knee - ankle
inline SkeletonTopology standard_topology() {
    SkeletonTopology topo;
    topo.joint_count = 17;
    topo.joint_names = {"pelvis",     "spine",   "chest",   "neck",    "head",
                        "l_shoulder", "l_elbow", "l_wrist", "r_shoulder", "r_elbow",
                        "r_wrist",    "l_hip",   "l_knee",  "l_ankle", "r_hip",
                        "r_knee",     "r_ankle"};
    topo.parent = {-1, 0, 1, 2, 3, 2, 5, 6, 2, 8, 9, 0, 11, 12, 0, 14, 15};
    for (int j = 0; j < topo.joint_count; ++j)
        if (topo.parent[static_cast<std::size_t>(j)] >= 0)
            topo.bones.emplace_back(topo.parent[static_cast<std::size_t>(j)], j);
    topo.limbs["torso"] = Limb{0, {1, 2, 3, 4}};
    topo.limbs["left_arm"] = Limb{5, {6, 7}};
    topo.limbs["right_arm"] = Limb{8, {9, 10}};
    topo.limbs["left_leg"] = Limb{11, {12, 13}};
    topo.limbs["right_leg"] = Limb{14, {15, 16}};
    return topo;
}

struct SynthConfig {
    std::vector<std::string> actions = {"walk", "wave", "kick", "idle"};
    int samples_per_action = 750;
    int n_history = 50;
    int t_future = 25;
    double frame_period_ms = 40.0;
    double noise_std_mm = 5.0;
    std::uint64_t rng_seed = 1;
};

namespace detail {

// Rest-pose offsets (mm) from parent to child for the 17-joint skeleton.
inline const std::vector<Eigen::Vector3d>& rest_offsets() {
    static const std::vector<Eigen::Vector3d> offsets = {
        {0, 0, 0},      // pelvis (root, unused)
        {0, 0, 220},    // spine
        {0, 0, 220},    // chest
        {0, 0, 180},    // neck
        {0, 0, 150},    // head
        {0, 180, 0},    // l_shoulder
        {0, 0, -280},   // l_elbow
        {0, 0, -250},   // l_wrist
        {0, -180, 0},   // r_shoulder
        {0, 0, -280},   // r_elbow
        {0, 0, -250},   // r_wrist
        {0, 100, 0},    // l_hip
        {0, 0, -420},   // l_knee
        {0, 0, -400},   // l_ankle
        {0, -100, 0},   // r_hip
        {0, 0, -420},   // r_knee
        {0, 0, -400},   // r_ankle
    };
    return offsets;
}

// One sinusoidal joint-angle channel: rotation of `joint`'s local frame
// about `axis` by amp * sin(2*pi*freq*t + phase [+ sample phase]).
// Channels with use_sample_phase = false ignore the per-sample phase jitter;
// with freq_hz = 0 they produce a constant posture offset of
// amp * sin(phase_rad).
struct AngleChannel {
    int joint;
    Eigen::Vector3d axis;
    double amp_rad;
    double freq_hz;
    double phase_rad;
    bool use_sample_phase = true;
};

struct GaitParams {
    std::vector<AngleChannel> channels;
    double root_speed_mm_per_s = 0.0; // along the heading direction
    double sway_amp_mm = 0.0;
    double sway_freq_hz = 0.0;
    bool sway_use_sample_phase = true;
    // Per-sample jitter ranges. Heading is heading_center +- heading_range/2.
    double amp_jitter_lo = 0.7, amp_jitter_hi = 1.3;
    double speed_jitter_lo = 0.7, speed_jitter_hi = 1.3;
    double heading_center_rad = 0.0;
    double heading_range_rad = 2.0 * std::numbers::pi;
};

inline GaitParams gait_for_action(const std::string& action) {
    const Eigen::Vector3d y = Eigen::Vector3d::UnitY(); // sagittal swing axis
    const Eigen::Vector3d x = Eigen::Vector3d::UnitX();
    GaitParams g;
    if (action == "walk") {
        g.root_speed_mm_per_s = 1100.0;
        g.sway_amp_mm = 20.0;
        g.sway_freq_hz = 1.5;
        g.channels = {
            {11, y, 0.55, 0.75, 0.0},                    // l_hip
            {14, y, 0.55, 0.75, std::numbers::pi},       // r_hip
            {12, y, 0.35, 0.75, 0.9},                    // l_knee
            {15, y, 0.35, 0.75, std::numbers::pi + 0.9}, // r_knee
            {5, y, 0.40, 0.75, std::numbers::pi},        // l_shoulder counter-swing
            {8, y, 0.40, 0.75, 0.0},                     // r_shoulder
            {6, y, 0.20, 0.75, std::numbers::pi + 0.5},  // l_elbow
            {9, y, 0.20, 0.75, 0.5},                     // r_elbow
        };
    } else if (action == "wave") {
        // A greeting drill: everyone strides the same corridor at the same
        // pace with the stride phase-locked to the start of the recording,
        // left arm raised overhead and waving in lockstep with the stride.
        // Only the movement amplitude (and sensor noise) varies per subject.
        g.root_speed_mm_per_s = 1000.0;
        g.sway_amp_mm = 20.0;
        g.sway_freq_hz = 1.5;
        g.sway_use_sample_phase = false;
        g.amp_jitter_lo = 0.95;
        g.amp_jitter_hi = 1.05;
        g.speed_jitter_lo = 1.0;
        g.speed_jitter_hi = 1.0;
        g.heading_range_rad = 0.0;
        g.channels = {
            {11, y, 0.55, 0.75, 0.0, false},                    // legs stride as in walk
            {14, y, 0.55, 0.75, std::numbers::pi, false},
            {12, y, 0.35, 0.75, 0.9, false},
            {15, y, 0.35, 0.75, std::numbers::pi + 0.9, false},
            {8, y, 0.40, 0.75, 0.0, false},                     // r arm counter-swings
            {9, y, 0.20, 0.75, 0.5, false},
            {5, x, 2.6, 0.0, std::numbers::pi / 2, false},      // l arm raised (constant)
            {6, x, 0.55, 1.5, 0.0, false},                      // l forearm waves with the stride
            {5, x, 0.12, 1.5, 0.7, false},                      // slight shoulder bob
        };
    } else if (action == "kick") {
        g.root_speed_mm_per_s = 120.0;
        g.sway_amp_mm = 15.0;
        g.sway_freq_hz = 0.9;
        g.channels = {
            {14, y, 1.0, 0.9, 0.0},                    // r_hip swing
            {15, y, 0.8, 0.9, 1.2},                    // r_knee
            {5, y, 0.25, 0.9, std::numbers::pi},       // arms balance
            {8, y, 0.25, 0.9, 0.0},
            {1, y, 0.10, 0.9, std::numbers::pi / 2},   // torso pitch
        };
    } else if (action == "idle") {
        g.sway_amp_mm = 12.0;
        g.sway_freq_hz = 0.3;
        g.channels = {
            {1, y, 0.05, 0.3, 0.0},
            {2, x, 0.04, 0.25, 1.0},
            {5, y, 0.08, 0.3, 0.3},
            {8, y, 0.08, 0.3, 2.1},
        };
    } else {
        throw UsageError("unknown synthetic action: " + action);
    }
    return g;
}

} // namespace detail

// Deterministic synthetic mocap generator. Drives the 17-joint skeleton
// through per-action sinusoidal joint-angle schedules with seeded per-sample
// jitter (phase, amplitude, speed, heading) plus additive Gaussian noise.
// With noise_std_mm = 0 every bone is exactly rigid.
inline Dataset synth_generate(const SynthConfig& config) {
    if (config.samples_per_action < 0) throw UsageError("samples_per_action must be >= 0");
    if (config.noise_std_mm < 0) throw UsageError("noise_std_mm must be >= 0");

    Dataset out;
    out.topology = standard_topology();
    out.split_tag = "all";

    const auto& offsets = detail::rest_offsets();
    const int total_frames = config.n_history + config.t_future;
    const double dt_s = config.frame_period_ms / 1000.0;

    std::uint64_t sample_counter = 0;
    for (const auto& action : config.actions) {
        const detail::GaitParams gait = detail::gait_for_action(action);
        for (int s = 0; s < config.samples_per_action; ++s, ++sample_counter) {
            Rng rng(Rng::derive(config.rng_seed, sample_counter));
            const double phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
            const double amp_scale = rng.uniform(gait.amp_jitter_lo, gait.amp_jitter_hi);
            const double speed_scale = rng.uniform(gait.speed_jitter_lo, gait.speed_jitter_hi);
            const double heading = gait.heading_center_rad +
                                   rng.uniform(-0.5, 0.5) * gait.heading_range_rad;
            const Eigen::AngleAxisd heading_rot(heading, Eigen::Vector3d::UnitZ());

            MotionSequence seq;
            seq.frame_period_ms = config.frame_period_ms;
            seq.n_history = config.n_history;
            seq.t_future = config.t_future;
            seq.action_label = action;
            char idbuf[64];
            std::snprintf(idbuf, sizeof(idbuf), "%s_%04d", action.c_str(), s);
            seq.sample_id = idbuf;
            seq.frames.reserve(static_cast<std::size_t>(total_frames));

            const Eigen::Vector3d forward = heading_rot * Eigen::Vector3d::UnitX();
            const Eigen::Vector3d lateral = heading_rot * Eigen::Vector3d::UnitY();

            for (int n = 0; n < total_frames; ++n) {
                const double t = n * dt_s;
                // Per-joint local rotations for this frame.
                std::vector<Eigen::Matrix3d> local(17, Eigen::Matrix3d::Identity());
                for (const auto& ch : gait.channels) {
                    const double angle = amp_scale * ch.amp_rad *
                        std::sin(2.0 * std::numbers::pi * ch.freq_hz * speed_scale * t +
                                 (ch.use_sample_phase ? phase : 0.0) + ch.phase_rad);
                    local[static_cast<std::size_t>(ch.joint)] =
                        local[static_cast<std::size_t>(ch.joint)] *
                        Eigen::AngleAxisd(angle, ch.axis).toRotationMatrix();
                }

                Pose pose;
                pose.positions.resize(17, 3);
                const Eigen::Vector3d root_pos =
                    forward * (gait.root_speed_mm_per_s * speed_scale * t) +
                    lateral * (gait.sway_amp_mm *
                               std::sin(2.0 * std::numbers::pi * gait.sway_freq_hz * speed_scale * t +
                                        (gait.sway_use_sample_phase ? phase : 0.0))) +
                    Eigen::Vector3d(0, 0, 900);
                pose.positions.row(0) = root_pos.transpose();

                std::vector<Eigen::Matrix3d> global(17);
                global[0] = heading_rot.toRotationMatrix() * local[0];
                for (const auto& [p, c] : out.topology.bones) {
                    global[static_cast<std::size_t>(c)] =
                        global[static_cast<std::size_t>(p)] * local[static_cast<std::size_t>(c)];
                    const Eigen::Vector3d pos =
                        pose.positions.row(p).transpose() +
                        global[static_cast<std::size_t>(c)] * offsets[static_cast<std::size_t>(c)];
                    pose.positions.row(c) = pos.transpose();
                }
                seq.frames.push_back(std::move(pose));
            }

            if (config.noise_std_mm > 0.0) {
                for (auto& pose : seq.frames)
                    for (int j = 0; j < 17; ++j)
                        for (int c = 0; c < 3; ++c)
                            pose.positions(j, c) += rng.normal(0.0, config.noise_std_mm);
            }
            out.samples.push_back(std::move(seq));
        }
    }
    return out;
}

// Seeded, action-stratified split into disjoint train/test sets.
inline std::pair<Dataset, Dataset> split(const Dataset& dataset, double test_fraction,
                                         std::uint64_t seed) {
    if (test_fraction < 0.0 || test_fraction > 1.0)
        throw RangeError("split: test_fraction must be in [0,1]");
    Dataset train, test;
    train.topology = test.topology = dataset.topology;
    train.split_tag = "train";
    test.split_tag = "test";
    train.provenance = test.provenance = dataset.provenance;

    // Group sample indices by action label, preserving dataset order.
    std::map<std::string, std::vector<std::size_t>> by_action;
    for (std::size_t i = 0; i < dataset.samples.size(); ++i)
        by_action[dataset.samples[i].action_label].push_back(i);

    std::vector<bool> is_test(dataset.samples.size(), false);
    Rng rng(Rng::derive(seed, 101));
    for (auto& [action, idx] : by_action) {
        const std::size_t n_test =
            static_cast<std::size_t>(std::llround(test_fraction * static_cast<double>(idx.size())));
        const auto chosen = rng.sample_without_replacement(idx.size(), n_test);
        for (std::size_t k : chosen) is_test[idx[k]] = true;
    }
    for (std::size_t i = 0; i < dataset.samples.size(); ++i)
        (is_test[i] ? test : train).samples.push_back(dataset.samples[i]);
    return {std::move(train), std::move(test)};
}

// Draws up to per_action_count samples per action, seeded.
inline Dataset sample_test_subset(const Dataset& test, int per_action_count, std::uint64_t seed) {
    if (per_action_count < 0) throw RangeError("sample_test_subset: negative count");
    Dataset out;
    out.topology = test.topology;
    out.split_tag = test.split_tag;
    out.provenance = test.provenance;

    std::map<std::string, std::vector<std::size_t>> by_action;
    for (std::size_t i = 0; i < test.samples.size(); ++i)
        by_action[test.samples[i].action_label].push_back(i);

    std::vector<bool> keep(test.samples.size(), false);
    Rng rng(Rng::derive(seed, 102));
    for (auto& [action, idx] : by_action) {
        const std::size_t want = std::min<std::size_t>(idx.size(),
                                                       static_cast<std::size_t>(per_action_count));
        const auto chosen = rng.sample_without_replacement(idx.size(), want);
        for (std::size_t k : chosen) keep[idx[k]] = true;
    }
    for (std::size_t i = 0; i < test.samples.size(); ++i)
        if (keep[i]) out.samples.push_back(test.samples[i]);
    return out;
}

} // namespace badhmp
