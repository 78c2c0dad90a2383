#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "badhmp/types.hpp"

namespace badhmp {

inline void check_pose_dims(const Pose& pose, const SkeletonTopology& topo) {
    if (pose.joint_count() != topo.joint_count)
        throw DimensionError("pose has " + std::to_string(pose.joint_count()) +
                             " joints, topology expects " + std::to_string(topo.joint_count));
}

// Euclidean length of every bone in a single pose.
inline BoneLengthProfile bone_lengths(const Pose& pose, const SkeletonTopology& topo) {
    check_pose_dims(pose, topo);
    BoneLengthProfile profile;
    profile.lengths.reserve(topo.bones.size());
    for (const auto& [p, c] : topo.bones)
        profile.lengths.push_back((pose.joint(c) - pose.joint(p)).norm());
    return profile;
}

// Per-bone median length over all frames of a sequence. The median is robust
// to mocap capture noise, which makes per-frame lengths fluctuate slightly.
inline BoneLengthProfile reference_profile(const MotionSequence& seq, const SkeletonTopology& topo) {
    if (seq.frames.empty()) throw RangeError("reference_profile: empty sequence");
    const std::size_t n_frames = seq.frames.size();
    const std::size_t n_bones = topo.bones.size();
    std::vector<std::vector<double>> per_bone(n_bones, std::vector<double>(n_frames));
    for (std::size_t f = 0; f < n_frames; ++f) {
        const BoneLengthProfile p = bone_lengths(seq.frames[f], topo);
        for (std::size_t l = 0; l < n_bones; ++l) per_bone[l][f] = p.lengths[l];
    }
    BoneLengthProfile out;
    out.lengths.resize(n_bones);
    for (std::size_t l = 0; l < n_bones; ++l) {
        auto& v = per_bone[l];
        std::sort(v.begin(), v.end());
        const std::size_t mid = n_frames / 2;
        const double median = (n_frames % 2 == 1) ? v[mid] : 0.5 * (v[mid - 1] + v[mid]);
        if (median <= 0.0)
            throw DegenerateSkeletonError("reference_profile: bone " + std::to_string(l) +
                                          " has zero median length");
        out.lengths[l] = median;
    }
    return out;
}

// Rescales every bone of `src`, per frame, to the lengths in `target_profile`
// while keeping the source bone directions. The root position is copied from
// the source; scaling propagates child-ward along the joint tree.
inline MotionSequence scale_to_skeleton(const MotionSequence& src,
                                        const BoneLengthProfile& target_profile,
                                        const SkeletonTopology& topo) {
    if (target_profile.bone_count() != topo.bone_count())
        throw DimensionError("scale_to_skeleton: profile has " +
                             std::to_string(target_profile.bone_count()) + " bones, topology has " +
                             std::to_string(topo.bone_count()));
    for (double len : target_profile.lengths)
        if (!(len > 0.0) || !std::isfinite(len))
            throw DegenerateSkeletonError("scale_to_skeleton: non-positive target bone length");

    MotionSequence out = src;
    const int root = topo.root();
    if (root < 0) throw DimensionError("scale_to_skeleton: topology has no root");

    // Bone processing order such that each bone's parent joint is already
    // placed (the bone list itself need not be topologically sorted).
    std::vector<std::size_t> order;
    {
        std::vector<bool> placed(static_cast<std::size_t>(topo.joint_count), false);
        std::vector<bool> used(topo.bones.size(), false);
        placed[static_cast<std::size_t>(root)] = true;
        while (order.size() < topo.bones.size()) {
            bool progressed = false;
            for (std::size_t l = 0; l < topo.bones.size(); ++l) {
                if (used[l]) continue;
                const auto [p, c] = topo.bones[l];
                if (placed[static_cast<std::size_t>(p)]) {
                    order.push_back(l);
                    used[l] = true;
                    placed[static_cast<std::size_t>(c)] = true;
                    progressed = true;
                }
            }
            if (!progressed)
                throw DimensionError("scale_to_skeleton: bone list is not a tree rooted at " +
                                     std::to_string(root));
        }
    }

    for (std::size_t f = 0; f < src.frames.size(); ++f) {
        const Pose& in = src.frames[f];
        check_pose_dims(in, topo);
        Pose& scaled = out.frames[f];
        scaled.positions.row(root) = in.positions.row(root);
        for (std::size_t l : order) {
            const auto [p, c] = topo.bones[l];
            const Eigen::RowVector3d dir = in.joint(c) - in.joint(p);
            const double len = dir.norm();
            if (len <= 0.0)
                throw DegenerateSkeletonError("scale_to_skeleton: zero-length source bone " +
                                              std::to_string(l) + " at frame " + std::to_string(f));
            scaled.positions.row(c) =
                scaled.positions.row(p) + dir * (target_profile.lengths[l] / len);
        }
    }
    return out;
}

// Structural check of a sequence against its topology. Issues are collected
// rather than thrown; an empty report means all invariants hold.
inline ValidationReport validate_sequence(const MotionSequence& seq, const SkeletonTopology& topo) {
    ValidationReport report;
    if (seq.total_frames() != seq.n_history + seq.t_future)
        report.add("frame count " + std::to_string(seq.total_frames()) + " != N+T = " +
                   std::to_string(seq.n_history + seq.t_future));
    if (!(seq.frame_period_ms > 0.0)) report.add("frame_period_ms must be positive");
    for (std::size_t f = 0; f < seq.frames.size(); ++f) {
        const Pose& pose = seq.frames[f];
        if (pose.joint_count() != topo.joint_count) {
            report.add("frame " + std::to_string(f) + ": " + std::to_string(pose.joint_count()) +
                       " joints, expected " + std::to_string(topo.joint_count));
            continue;
        }
        for (int j = 0; j < pose.joint_count(); ++j)
            if (!pose.positions.row(j).allFinite())
                report.add("frame " + std::to_string(f) + ", joint " + std::to_string(j) +
                           ": non-finite coordinate");
    }
    return report;
}

} // namespace badhmp
