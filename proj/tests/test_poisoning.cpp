#include <doctest.h>

#include <set>

#include "badhmp/poisoning.hpp"
#include "test_helpers.hpp"

using namespace badhmp;
using namespace badhmp::test;

namespace {

// Builds a rigid random sequence on the chain4 skeleton with fixed bone
// lengths, so that scale/graft compositions stay well defined.
MotionSequence rigid_chain4_sequence(int n_history, int t_future, Rng& rng,
                                     const std::vector<double>& lengths) {
    MotionSequence seq;
    seq.n_history = n_history;
    seq.t_future = t_future;
    seq.sample_id = "rigid";
    for (int n = 0; n < n_history + t_future; ++n) {
        Pose pose;
        pose.positions.resize(4, 3);
        pose.positions.row(0) = Eigen::RowVector3d(rng.uniform(-50, 50), rng.uniform(-50, 50),
                                                   rng.uniform(-50, 50));
        for (int b = 0; b < 3; ++b) {
            Eigen::RowVector3d dir(rng.normal(), rng.normal(), rng.normal());
            dir.normalize();
            pose.positions.row(b + 1) = pose.positions.row(b) + dir * lengths[b];
        }
        seq.frames.push_back(std::move(pose));
    }
    return seq;
}

} // namespace

TEST_CASE("graft_trigger hand arithmetic") {
    const auto topo = tree5_topo();
    // clean anchor (joint 1) at origin; source anchor at (10,0,0), source limb
    // joint 2 at (10,5,0) -> grafted joint 2 lands at (0,5,0)
    MotionSequence clean;
    clean.n_history = 1;
    clean.t_future = 0;
    clean.frames = {make_pose({{-1, 0, 0}, {0, 0, 0}, {7, 7, 7}, {2, 0, 0}, {3, 0, 0}})};
    MotionSequence src = clean;
    src.frames = {make_pose({{9, 0, 0}, {10, 0, 0}, {10, 5, 0}, {12, 0, 0}, {13, 0, 0}})};

    const auto out = graft_trigger(clean, src, topo, "arm");
    CHECK((out.frames[0].joint(2) - Eigen::RowVector3d(0, 5, 0)).norm() == doctest::Approx(0.0));
    // joints outside the limb are bit-identical
    for (int j : {0, 1, 3, 4})
        CHECK(same_bits(out.frames[0].positions.row(j), clean.frames[0].positions.row(j)));
}

TEST_CASE("graft_trigger self-graft is the identity up to rounding") {
    const auto topo = tree5_topo();
    Rng rng(41);
    MotionSequence clean = random_sequence(5, 3, 2, rng);
    const auto out = graft_trigger(clean, clean, topo, "arm");
    for (int n = 0; n < clean.total_frames(); ++n)
        CHECK((out.frames[n].positions - clean.frames[n].positions).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("graft_trigger unknown limb") {
    const auto topo = tree5_topo();
    Rng rng(42);
    MotionSequence clean = random_sequence(5, 2, 1, rng);
    CHECK_THROWS_AS(graft_trigger(clean, clean, topo, "tail"), UnknownLimbError);
}

TEST_CASE("apply_target hand arithmetic") {
    const auto topo = two_joint_topo();
    (void)topo;
    MotionSequence inputs;
    inputs.n_history = 2;
    inputs.t_future = 2;
    inputs.frames = {make_pose({{0, 0, 0}, {1, 1, 1}}), make_pose({{1, 2, 3}, {1, 2, 3}}),
                     make_pose({{9, 9, 9}, {9, 9, 9}}), make_pose({{9, 9, 9}, {9, 9, 9}})};

    SUBCASE("zero displacement freezes frame N") {
        MotionSequence src = inputs;
        for (auto& f : src.frames) f = make_pose({{5, 5, 5}, {6, 6, 6}});
        const auto out = apply_target(inputs, src);
        CHECK(same_bits(out.frames[2].positions, inputs.frames[1].positions));
        CHECK(same_bits(out.frames[3].positions, inputs.frames[1].positions));
    }

    SUBCASE("source delta 0.5 in x shifts frame N+2") {
        MotionSequence src = inputs;
        src.frames = {make_pose({{0, 0, 0}, {0, 0, 0}}), make_pose({{2, 0, 0}, {2, 0, 0}}),
                      make_pose({{2.2, 0, 0}, {2.2, 0, 0}}),
                      make_pose({{2.5, 0, 0}, {2.5, 0, 0}})};
        const auto out = apply_target(inputs, src);
        // X~(j, N+2) = X~(j, N) + (src(n) - src(N)) = (1,2,3) + (0.5,0,0)
        CHECK((out.frames[3].joint(0) - Eigen::RowVector3d(1.5, 2, 3)).norm() ==
              doctest::Approx(0.0));
    }

    SUBCASE("too-short source rejected") {
        MotionSequence short_src = inputs;
        short_src.frames.pop_back();
        CHECK_THROWS_AS(apply_target(inputs, short_src), RangeError);
    }
}

TEST_CASE("poison_sample composition against a straight-line oracle") {
    const auto topo = chain4_topo();
    Rng rng(43);
    const std::vector<double> clean_lengths = {10, 20, 30};
    const std::vector<double> src_lengths = {14, 8, 40};
    const MotionSequence clean = rigid_chain4_sequence(3, 2, rng, clean_lengths);
    MotionSequence source = rigid_chain4_sequence(3, 2, rng, src_lengths);
    source.sample_id = "src";

    PoisonSpec spec;
    spec.trigger_limb = "tip";
    const MotionSequence poisoned = poison_sample(clean, source, topo, spec);

    // Oracle: independent recomputation of scale + Eq.7 + Eq.8 with plain
    // per-joint arithmetic.
    const auto profile = reference_profile(clean, topo);
    std::vector<Pose> scaled;
    for (const auto& f : source.frames) {
        Pose s;
        s.positions.resize(4, 3);
        s.positions.row(0) = f.positions.row(0);
        for (int b = 0; b < 3; ++b) {
            Eigen::RowVector3d dir = f.positions.row(b + 1) - f.positions.row(b);
            dir /= dir.norm();
            s.positions.row(b + 1) = s.positions.row(b) + dir * profile.lengths[b];
        }
        scaled.push_back(std::move(s));
    }
    std::vector<Pose> expected;
    for (int n = 0; n < 5; ++n) expected.push_back(clean.frames[n]);
    for (int n = 0; n < 3; ++n) { // history: graft joints 2,3 onto anchor 1
        for (int j : {2, 3})
            expected[n].positions.row(j) = clean.frames[n].positions.row(1) +
                                           (scaled[n].positions.row(j) - scaled[n].positions.row(1));
    }
    for (int n = 3; n < 5; ++n) // future: global trajectory transfer
        for (int j = 0; j < 4; ++j)
            expected[n].positions.row(j) =
                expected[2].positions.row(j) +
                (scaled[n].positions.row(j) - scaled[2].positions.row(j));

    for (int n = 0; n < 5; ++n)
        CHECK((poisoned.frames[n].positions - expected[n].positions).cwiseAbs().maxCoeff() < 1e-9);

    // locality on history frames (bitwise for non-limb joints)
    for (int n = 0; n < 3; ++n)
        for (int j : {0, 1})
            CHECK(same_bits(poisoned.frames[n].positions.row(j), clean.frames[n].positions.row(j)));

    // rigidity: grafted bones match the clean reference profile
    for (int n = 0; n < 3; ++n) {
        const auto lens = bone_lengths(poisoned.frames[n], topo);
        CHECK(std::abs(lens.lengths[1] - profile.lengths[1]) < 1e-6); // bone 1->2
        CHECK(std::abs(lens.lengths[2] - profile.lengths[2]) < 1e-6); // bone 2->3
    }

    // seam continuity: first-step displacement equals the source's own
    for (int j = 0; j < 4; ++j) {
        const double got = (poisoned.frames[3].joint(j) - poisoned.frames[2].joint(j)).norm();
        const double want = (scaled[3].positions.row(j) - scaled[2].positions.row(j)).norm();
        CHECK(got == doctest::Approx(want).epsilon(1e-12));
    }

    // label and id preserved
    CHECK(poisoned.action_label == clean.action_label);
    CHECK(poisoned.sample_id == clean.sample_id);
}

TEST_CASE("poison_dataset selection and determinism") {
    const auto topo = chain4_topo();
    Rng rng(44);
    const std::vector<double> lengths = {10, 20, 30};
    MotionSequence source = rigid_chain4_sequence(3, 2, rng, lengths);

    Dataset train;
    train.topology = topo;
    for (int i = 0; i < 200; ++i) {
        MotionSequence seq = rigid_chain4_sequence(3, 2, rng, lengths);
        seq.sample_id = "t" + std::to_string(i);
        train.samples.push_back(std::move(seq));
    }

    PoisonSpec spec;
    spec.trigger_limb = "tip";
    spec.rng_seed = 77;

    SUBCASE("rho = 0 keeps everything bit-identical") {
        spec.injection_ratio = 0.0;
        auto [out, manifest] = poison_dataset(train, source, topo, spec);
        CHECK(manifest.count() == 0);
        for (std::size_t i = 0; i < train.size(); ++i)
            for (int n = 0; n < 5; ++n)
                CHECK(same_bits(out.samples[i].frames[n].positions, train.samples[i].frames[n].positions));
    }

    SUBCASE("rho = 1 poisons every sample") {
        spec.injection_ratio = 1.0;
        auto [out, manifest] = poison_dataset(train, source, topo, spec);
        CHECK(manifest.count() == train.size());
    }

    SUBCASE("rho = 0.1 poisons exactly 20 of 200, repeatably") {
        spec.injection_ratio = 0.1;
        auto [out1, manifest1] = poison_dataset(train, source, topo, spec);
        auto [out2, manifest2] = poison_dataset(train, source, topo, spec);
        CHECK(manifest1.count() == 20);
        CHECK(manifest1.poisoned_sample_ids == manifest2.poisoned_sample_ids);
        for (std::size_t i = 0; i < train.size(); ++i)
            for (int n = 0; n < 5; ++n)
                CHECK(same_bits(out1.samples[i].frames[n].positions, out2.samples[i].frames[n].positions));
        // manifest ids are a subset of the training ids
        std::set<std::string> ids;
        for (const auto& s : train.samples) ids.insert(s.sample_id);
        for (const auto& id : manifest1.poisoned_sample_ids) CHECK(ids.contains(id));
    }

    SUBCASE("invalid ratio rejected") {
        spec.injection_ratio = 1.5;
        CHECK_THROWS_AS(poison_dataset(train, source, topo, spec), RangeError);
    }
}

TEST_CASE("poison_testset poisons everything") {
    const auto topo = chain4_topo();
    Rng rng(45);
    const std::vector<double> lengths = {10, 20, 30};
    MotionSequence source = rigid_chain4_sequence(3, 2, rng, lengths);

    Dataset test;
    test.topology = topo;
    for (int i = 0; i < 16; ++i) {
        MotionSequence seq = rigid_chain4_sequence(3, 2, rng, lengths);
        seq.sample_id = "q" + std::to_string(i);
        test.samples.push_back(std::move(seq));
    }
    PoisonSpec spec;
    spec.trigger_limb = "tip";

    const Dataset out1 = poison_testset(test, source, topo, spec);
    const Dataset out2 = poison_testset(test, source, topo, spec);
    REQUIRE(out1.size() == test.size());
    for (std::size_t i = 0; i < test.size(); ++i) {
        CHECK(out1.samples[i].sample_id == test.samples[i].sample_id);
        // future frames definitely changed (trajectory transfer)
        CHECK_FALSE(same_bits(out1.samples[i].frames[4].positions, test.samples[i].frames[4].positions));
        for (int n = 0; n < 5; ++n)
            CHECK(same_bits(out1.samples[i].frames[n].positions, out2.samples[i].frames[n].positions));
    }

    Dataset empty;
    empty.topology = topo;
    CHECK(poison_testset(empty, source, topo, spec).empty());
}
