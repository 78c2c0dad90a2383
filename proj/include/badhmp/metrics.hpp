#pragma once

#include <cmath>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "badhmp/data.hpp"
#include "badhmp/motion_core.hpp"
#include "badhmp/types.hpp"

namespace badhmp {

struct HorizonSet {
    std::vector<double> horizons_ms = {80.0, 400.0, 560.0, 1000.0};
};

// Maps a horizon in ms to a 1-based future frame index.
inline int horizon_frame(double horizon_ms, double frame_period_ms, int t_future) {
    const double ratio = horizon_ms / frame_period_ms;
    const double rounded = std::round(ratio);
    if (std::abs(ratio - rounded) > 1e-9)
        throw HorizonError("horizon " + std::to_string(horizon_ms) +
                           " ms is not a multiple of the frame period " +
                           std::to_string(frame_period_ms) + " ms");
    const int n_h = static_cast<int>(rounded);
    if (n_h < 1 || n_h > t_future)
        throw HorizonError("horizon " + std::to_string(horizon_ms) + " ms maps to frame " +
                           std::to_string(n_h) + ", outside 1.." + std::to_string(t_future));
    return n_h;
}

// Mean Euclidean per-joint distance, averaged over all frames and joints.
inline double mpjpe(std::span<const Pose> pred, std::span<const Pose> gt) {
    if (pred.size() != gt.size())
        throw DimensionError("mpjpe: frame count mismatch");
    if (pred.empty()) throw DimensionError("mpjpe: empty frame range");
    double sum = 0.0;
    std::size_t count = 0;
    for (std::size_t n = 0; n < pred.size(); ++n) {
        if (pred[n].joint_count() != gt[n].joint_count())
            throw DimensionError("mpjpe: joint count mismatch at frame " + std::to_string(n));
        for (int j = 0; j < pred[n].joint_count(); ++j) {
            sum += (pred[n].joint(j) - gt[n].joint(j)).norm();
            ++count;
        }
    }
    return sum / static_cast<double>(count);
}

// Per-timestep MPJPE at a single horizon. pred/gt are future windows of T frames.
inline double mpjpe_at(std::span<const Pose> pred, std::span<const Pose> gt, double horizon_ms,
                       double frame_period_ms) {
    if (pred.size() != gt.size()) throw DimensionError("mpjpe_at: frame count mismatch");
    const int n_h = horizon_frame(horizon_ms, frame_period_ms, static_cast<int>(pred.size()));
    const std::size_t idx = static_cast<std::size_t>(n_h - 1);
    return mpjpe(pred.subspan(idx, 1), gt.subspan(idx, 1));
}

// A predictor maps a full sample (history is read, future is ignored) to
// T predicted future poses.
using PredictorFn = std::function<std::vector<Pose>(const MotionSequence&)>;

struct HorizonErrors {
    std::map<double, double> by_horizon_ms;
    std::map<std::string, std::map<double, double>> per_action;
};

// Expectation over a dataset of mpjpe_at per horizon, compared against each
// sample's own stored future frames. Used for both CDE (clean test set) and
// BDE (poisoned test set).
inline HorizonErrors horizon_errors(const PredictorFn& model, const Dataset& dataset,
                                    const HorizonSet& horizons) {
    if (dataset.empty()) throw EmptyDatasetError("horizon_errors: empty dataset");
    std::map<double, double> sums;
    std::map<std::string, std::map<double, double>> action_sums;
    std::map<std::string, std::size_t> action_counts;
    for (const auto& seq : dataset.samples) {
        const std::vector<Pose> pred = model(seq);
        if (static_cast<int>(pred.size()) != seq.t_future)
            throw DimensionError("predictor returned " + std::to_string(pred.size()) +
                                 " frames, expected " + std::to_string(seq.t_future));
        const std::span<const Pose> gt(seq.frames.data() + seq.n_history,
                                       static_cast<std::size_t>(seq.t_future));
        for (double h : horizons.horizons_ms) {
            const double e = mpjpe_at(pred, gt, h, seq.frame_period_ms);
            sums[h] += e;
            action_sums[seq.action_label][h] += e;
        }
        ++action_counts[seq.action_label];
    }
    HorizonErrors out;
    for (auto& [h, s] : sums) out.by_horizon_ms[h] = s / static_cast<double>(dataset.size());
    for (auto& [action, m] : action_sums)
        for (auto& [h, s] : m)
            out.per_action[action][h] = s / static_cast<double>(action_counts[action]);
    return out;
}

inline HorizonErrors cde(const PredictorFn& model, const Dataset& clean_test,
                         const HorizonSet& horizons) {
    return horizon_errors(model, clean_test, horizons);
}

inline HorizonErrors bde(const PredictorFn& model, const Dataset& poisoned_test,
                         const HorizonSet& horizons) {
    return horizon_errors(model, poisoned_test, horizons);
}

// Mean squared second forward difference of joint positions,
// averaged over K * (N+T-2) terms. Units: mm^2 per frame^2 squared norms.
inline double acc_metric(const MotionSequence& seq) {
    const int frames = seq.total_frames();
    if (frames < 3) throw RangeError("acc_metric: need at least 3 frames");
    const int k = seq.frames.front().joint_count();
    double sum = 0.0;
    for (int n = 0; n + 2 < frames; ++n)
        for (int j = 0; j < k; ++j) {
            const Eigen::RowVector3d dd = seq.frame(n + 2).joint(j) -
                                          2.0 * seq.frame(n + 1).joint(j) + seq.frame(n).joint(j);
            sum += dd.squaredNorm();
        }
    return sum / (static_cast<double>(k) * static_cast<double>(frames - 2));
}

// Mean squared third forward difference, averaged over K * (N+T-3) terms.
inline double jerk_metric(const MotionSequence& seq) {
    const int frames = seq.total_frames();
    if (frames < 4) throw RangeError("jerk_metric: need at least 4 frames");
    const int k = seq.frames.front().joint_count();
    double sum = 0.0;
    for (int n = 0; n + 3 < frames; ++n)
        for (int j = 0; j < k; ++j) {
            const Eigen::RowVector3d ddd = seq.frame(n + 3).joint(j) -
                                           3.0 * seq.frame(n + 2).joint(j) +
                                           3.0 * seq.frame(n + 1).joint(j) - seq.frame(n).joint(j);
            sum += ddd.squaredNorm();
        }
    return sum / (static_cast<double>(k) * static_cast<double>(frames - 3));
}

// Mean absolute frame-to-frame bone length change,
// normalized by L_C * (N+T-1).
inline double blc_metric(const MotionSequence& seq, const SkeletonTopology& topo) {
    const int frames = seq.total_frames();
    if (frames < 2) throw RangeError("blc_metric: need at least 2 frames");
    double sum = 0.0;
    BoneLengthProfile prev = bone_lengths(seq.frame(0), topo);
    for (int n = 1; n < frames; ++n) {
        const BoneLengthProfile cur = bone_lengths(seq.frame(n), topo);
        for (int l = 0; l < topo.bone_count(); ++l)
            sum += std::abs(cur.lengths[static_cast<std::size_t>(l)] -
                            prev.lengths[static_cast<std::size_t>(l)]);
        prev = cur;
    }
    return sum / (static_cast<double>(topo.bone_count()) * static_cast<double>(frames - 1));
}

struct StealthStats {
    double max_acc = 0.0;
    double max_jerk = 0.0;
    double mean_blc = 0.0;
};

struct StealthReport {
    StealthStats clean;
    StealthStats poisoned;
};

namespace detail {
inline StealthStats stealth_stats(const Dataset& set, const SkeletonTopology& topo) {
    StealthStats s;
    double blc_sum = 0.0;
    for (const auto& seq : set.samples) {
        s.max_acc = std::max(s.max_acc, acc_metric(seq));
        s.max_jerk = std::max(s.max_jerk, jerk_metric(seq));
        blc_sum += blc_metric(seq, topo);
    }
    s.mean_blc = blc_sum / static_cast<double>(set.size());
    return s;
}
} // namespace detail

// Side-by-side smoothness/naturalness statistics over paired clean and
// poisoned sets (same ids, same order required).
inline StealthReport stealth_report(const Dataset& clean_set, const Dataset& poisoned_set,
                                    const SkeletonTopology& topo) {
    if (clean_set.size() != poisoned_set.size())
        throw PairingError("stealth_report: set sizes differ");
    if (clean_set.empty()) throw EmptyDatasetError("stealth_report: empty sets");
    for (std::size_t i = 0; i < clean_set.size(); ++i)
        if (clean_set.samples[i].sample_id != poisoned_set.samples[i].sample_id)
            throw PairingError("stealth_report: id mismatch at index " + std::to_string(i) + ": " +
                               clean_set.samples[i].sample_id + " vs " +
                               poisoned_set.samples[i].sample_id);
    StealthReport report;
    report.clean = detail::stealth_stats(clean_set, topo);
    report.poisoned = detail::stealth_stats(poisoned_set, topo);
    return report;
}

// Full evaluation summary; serialized by eval_io.
struct EvalReport {
    HorizonErrors cde;
    HorizonErrors bde;
    StealthReport stealth;
    bool has_stealth = false;
};

} // namespace badhmp
