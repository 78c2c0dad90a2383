#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "badhmp/data.hpp"
#include "badhmp/motion_core.hpp"
#include "badhmp/rng.hpp"
#include "badhmp/types.hpp"

namespace badhmp {

struct PoisonSpec {
    std::string source_sample_id;
    std::string trigger_limb = "left_arm";
    double injection_ratio = 0.10;
    std::uint64_t rng_seed = 1;
    // Optional second source for the future-trajectory transfer; defaults to
    // the trigger source.
    std::optional<std::string> separate_target_source;

    void validate() const {
        if (injection_ratio < 0.0 || injection_ratio > 1.0)
            throw RangeError("injection_ratio must be in [0,1]");
    }
};

struct PoisonManifest {
    PoisonSpec spec;
    std::vector<std::string> poisoned_sample_ids;

    std::size_t count() const { return poisoned_sample_ids.size(); }
};

// Trigger embedding on the history frames: limb joints are re-anchored to the
// clean sample's anchor joint with the scaled source's limb offsets,
//   X~(j,n) = X(j0,n) + [Xbar_src(j,n) - Xbar_src(j0,n)]   for j in the limb,
// every other joint is left bit-identical. Future frames are untouched here.
inline MotionSequence graft_trigger(const MotionSequence& clean, const MotionSequence& scaled_src,
                                    const SkeletonTopology& topo, const std::string& limb_name) {
    const Limb& limb = topo.limb(limb_name);
    if (scaled_src.total_frames() < clean.n_history)
        throw RangeError("graft_trigger: source covers " +
                         std::to_string(scaled_src.total_frames()) + " frames, need " +
                         std::to_string(clean.n_history));
    MotionSequence out = clean;
    for (int n = 0; n < clean.n_history; ++n) {
        const Pose& src = scaled_src.frame(n);
        check_pose_dims(src, topo);
        check_pose_dims(clean.frame(n), topo);
        const Eigen::RowVector3d anchor_clean = clean.frame(n).joint(limb.anchor);
        const Eigen::RowVector3d anchor_src = src.joint(limb.anchor);
        for (int j : limb.chain)
            out.frame(n).positions.row(j) = anchor_clean + (src.joint(j) - anchor_src);
    }
    return out;
}

// Target transfer on the future frames: every joint follows the source's
// future trajectory, re-based at the poisoned input's last frame,
//   X~(j,n) = X~(j,N) + [Xbar_src(j,n) - Xbar_src(j,N)]   for all j, n > N.
inline MotionSequence apply_target(const MotionSequence& poisoned_inputs,
                                   const MotionSequence& scaled_src) {
    const int n_hist = poisoned_inputs.n_history;
    const int total = poisoned_inputs.total_frames();
    if (scaled_src.total_frames() < total)
        throw RangeError("apply_target: source covers " +
                         std::to_string(scaled_src.total_frames()) + " frames, need " +
                         std::to_string(total));
    MotionSequence out = poisoned_inputs;
    const Pose& last_input = poisoned_inputs.frame(n_hist - 1);
    const Pose& src_last = scaled_src.frame(n_hist - 1);
    for (int n = n_hist; n < total; ++n) {
        if (scaled_src.frame(n).joint_count() != last_input.joint_count())
            throw DimensionError("apply_target: joint count mismatch at frame " +
                                 std::to_string(n));
        out.frame(n).positions =
            last_input.positions + (scaled_src.frame(n).positions - src_last.positions);
    }
    return out;
}

// Full poisoning function G(.): scale the source to the clean sample's
// skeleton, graft the trigger limb onto the history, then transfer the
// source's future trajectories. The action label and the sample id are
// preserved; poisoned ids are recorded in the manifest only, so records stay
// format-indistinguishable from clean ones.
inline MotionSequence poison_sample(const MotionSequence& clean, const MotionSequence& source,
                                    const SkeletonTopology& topo, const PoisonSpec& spec,
                                    const MotionSequence* target_source = nullptr) {
    spec.validate();
    if (source.total_frames() < clean.total_frames())
        throw RangeError("poison_sample: source has " + std::to_string(source.total_frames()) +
                         " frames, need " + std::to_string(clean.total_frames()));
    const BoneLengthProfile profile = reference_profile(clean, topo);
    const MotionSequence scaled = scale_to_skeleton(source, profile, topo);
    MotionSequence poisoned = graft_trigger(clean, scaled, topo, spec.trigger_limb);
    if (target_source != nullptr && target_source != &source) {
        if (target_source->total_frames() < clean.total_frames())
            throw RangeError("poison_sample: target source too short");
        const MotionSequence scaled_target = scale_to_skeleton(*target_source, profile, topo);
        poisoned = apply_target(poisoned, scaled_target);
    } else {
        poisoned = apply_target(poisoned, scaled);
    }
    return poisoned;
}

// Poisons round(rho * N_train) samples chosen by a seeded uniform draw
// without replacement. Deterministic given (spec.rng_seed, dataset order).
inline std::pair<Dataset, PoisonManifest> poison_dataset(const Dataset& train,
                                                         const MotionSequence& source,
                                                         const SkeletonTopology& topo,
                                                         const PoisonSpec& spec,
                                                         const MotionSequence* target_source = nullptr) {
    spec.validate();
    const std::size_t n_total = train.size();
    const std::size_t n_poison = static_cast<std::size_t>(
        std::llround(spec.injection_ratio * static_cast<double>(n_total)));

    Rng rng(Rng::derive(spec.rng_seed, 201));
    const std::vector<std::size_t> chosen = rng.sample_without_replacement(n_total, n_poison);
    std::set<std::size_t> chosen_set(chosen.begin(), chosen.end());

    Dataset out = train;
    out.provenance = Provenance::Poisoned;
    PoisonManifest manifest;
    manifest.spec = spec;
    for (std::size_t i = 0; i < n_total; ++i) {
        if (!chosen_set.contains(i)) continue;
        out.samples[i] = poison_sample(train.samples[i], source, topo, spec, target_source);
        manifest.poisoned_sample_ids.push_back(train.samples[i].sample_id);
    }
    return {std::move(out), std::move(manifest)};
}

// Poisons every test sample (injection ratio implicitly 1).
inline Dataset poison_testset(const Dataset& test, const MotionSequence& source,
                              const SkeletonTopology& topo, const PoisonSpec& spec,
                              const MotionSequence* target_source = nullptr) {
    Dataset out = test;
    out.provenance = Provenance::Poisoned;
    for (std::size_t i = 0; i < test.size(); ++i)
        out.samples[i] = poison_sample(test.samples[i], source, topo, spec, target_source);
    return out;
}

} // namespace badhmp
