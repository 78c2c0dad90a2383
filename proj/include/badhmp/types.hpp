#pragma once

#include <Eigen/Core>
#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "badhmp/common.hpp"

namespace badhmp {

// One skeleton pose: K joint positions in millimeters, rows are joints.
struct Pose {
    Eigen::Matrix<double, Eigen::Dynamic, 3> positions;

    int joint_count() const { return static_cast<int>(positions.rows()); }

    Eigen::RowVector3d joint(int j) const { return positions.row(j); }

    bool all_finite() const { return positions.allFinite(); }
};

// Motion sample: N history frames followed by T future frames.
struct MotionSequence {
    std::vector<Pose> frames;
    double frame_period_ms = 40.0;
    int n_history = 0;
    int t_future = 0;
    std::string action_label;
    std::string sample_id;

    int total_frames() const { return static_cast<int>(frames.size()); }

    const Pose& frame(int n) const { return frames.at(static_cast<std::size_t>(n)); }
    Pose& frame(int n) { return frames.at(static_cast<std::size_t>(n)); }
};

// A named limb: ordered joint chain plus the anchor joint it hangs from.
// chain[0]'s parent is the anchor; the anchor itself is not part of the chain.
struct Limb {
    int anchor = -1;
    std::vector<int> chain;
};

struct SkeletonTopology {
    int joint_count = 0;
    std::vector<std::string> joint_names;
    std::vector<int> parent; // -1 for the root
    std::vector<std::pair<int, int>> bones; // (parent_joint, child_joint)
    std::map<std::string, Limb> limbs;

    int bone_count() const { return static_cast<int>(bones.size()); }

    int root() const {
        for (int j = 0; j < joint_count; ++j)
            if (parent[static_cast<std::size_t>(j)] < 0) return j;
        return -1;
    }

    const Limb& limb(const std::string& name) const {
        auto it = limbs.find(name);
        if (it == limbs.end()) throw UnknownLimbError("unknown limb: " + name);
        return it->second;
    }

    // Children of each joint in bone order (useful for tree traversal).
    std::vector<std::vector<int>> children() const {
        std::vector<std::vector<int>> out(static_cast<std::size_t>(joint_count));
        for (const auto& [p, c] : bones) out[static_cast<std::size_t>(p)].push_back(c);
        return out;
    }
};

// Per-bone lengths in millimeters, in topology bone order.
struct BoneLengthProfile {
    std::vector<double> lengths;

    int bone_count() const { return static_cast<int>(lengths.size()); }
};

struct ValidationIssue {
    std::string message;
};

struct ValidationReport {
    std::vector<ValidationIssue> issues;

    bool ok() const { return issues.empty(); }

    void add(std::string msg) { issues.push_back({std::move(msg)}); }
};

} // namespace badhmp
