#include <doctest.h>

#include "badhmp/motion_core.hpp"
#include "test_helpers.hpp"

using namespace badhmp;
using namespace badhmp::test;

TEST_CASE("bone_lengths basics") {
    const auto topo = two_joint_topo();
    const Pose pose = make_pose({{0, 0, 0}, {3, 4, 0}});
    const auto profile = bone_lengths(pose, topo);
    REQUIRE(profile.bone_count() == 1);
    CHECK(profile.lengths[0] == doctest::Approx(5.0));

    // degenerate pose: coincident endpoints are a valid zero-length output
    const Pose degenerate = make_pose({{1, 1, 1}, {1, 1, 1}});
    CHECK(bone_lengths(degenerate, topo).lengths[0] == 0.0);

    const auto chain = chain3_topo();
    const Pose chain_pose = make_pose({{0, 0, 0}, {1, 0, 0}, {1, 1, 0}});
    const auto chain_profile = bone_lengths(chain_pose, chain);
    CHECK(chain_profile.lengths[0] == doctest::Approx(1.0));
    CHECK(chain_profile.lengths[1] == doctest::Approx(1.0));
}

TEST_CASE("bone_lengths dimension mismatch") {
    const auto topo = chain3_topo();
    const Pose pose = make_pose({{0, 0, 0}, {1, 0, 0}});
    CHECK_THROWS_AS(bone_lengths(pose, topo), DimensionError);
}

TEST_CASE("bone_lengths invariant under rigid translation") {
    const auto topo = tree5_topo();
    Rng rng(11);
    for (int trial = 0; trial < 20; ++trial) {
        Pose pose = random_pose(5, rng);
        const auto before = bone_lengths(pose, topo);
        const Eigen::RowVector3d shift(rng.uniform(-500, 500), rng.uniform(-500, 500),
                                       rng.uniform(-500, 500));
        pose.positions.rowwise() += shift;
        const auto after = bone_lengths(pose, topo);
        for (int l = 0; l < before.bone_count(); ++l)
            CHECK(after.lengths[l] == doctest::Approx(before.lengths[l]).epsilon(1e-12));
    }
}

TEST_CASE("reference_profile median semantics") {
    const auto topo = two_joint_topo();
    MotionSequence seq;
    seq.n_history = 2;
    seq.t_future = 1;

    SUBCASE("constant sequence equals pose bone lengths") {
        const Pose pose = make_pose({{0, 0, 0}, {0, 0, 7}});
        seq.frames = {pose, pose, pose};
        const auto profile = reference_profile(seq, topo);
        CHECK(profile.lengths[0] == doctest::Approx(7.0));
    }

    SUBCASE("median ignores outliers") {
        seq.frames = {make_pose({{0, 0, 0}, {1, 0, 0}}), make_pose({{0, 0, 0}, {2, 0, 0}}),
                      make_pose({{0, 0, 0}, {100, 0, 0}})};
        CHECK(reference_profile(seq, topo).lengths[0] == doctest::Approx(2.0));
    }

    SUBCASE("all-zero bone rejected") {
        const Pose degenerate = make_pose({{0, 0, 0}, {0, 0, 0}});
        seq.frames = {degenerate, degenerate, degenerate};
        CHECK_THROWS_AS(reference_profile(seq, topo), DegenerateSkeletonError);
    }
}

TEST_CASE("scale_to_skeleton identity and halving") {
    const auto topo = two_joint_topo();
    MotionSequence src;
    src.n_history = 1;
    src.t_future = 0;
    src.frames = {make_pose({{0, 0, 0}, {2, 0, 0}})};

    SUBCASE("own lengths give identity") {
        const auto profile = bone_lengths(src.frames[0], topo);
        const auto out = scale_to_skeleton(src, profile, topo);
        CHECK((out.frames[0].positions - src.frames[0].positions).cwiseAbs().maxCoeff() < 1e-9);
    }

    SUBCASE("target length 1 halves the bone") {
        BoneLengthProfile target;
        target.lengths = {1.0};
        const auto out = scale_to_skeleton(src, target, topo);
        CHECK(out.frames[0].joint(1).x() == doctest::Approx(1.0));
        CHECK(out.frames[0].joint(1).y() == doctest::Approx(0.0));
    }

    SUBCASE("zero-length source bone is a hard error") {
        src.frames[0] = make_pose({{1, 1, 1}, {1, 1, 1}});
        BoneLengthProfile target;
        target.lengths = {1.0};
        CHECK_THROWS_AS(scale_to_skeleton(src, target, topo), DegenerateSkeletonError);
    }
}

TEST_CASE("scale_to_skeleton postconditions on random trees") {
    const auto topo = tree5_topo();
    Rng rng(23);
    for (int trial = 0; trial < 25; ++trial) {
        MotionSequence src;
        src.n_history = 3;
        src.t_future = 0;
        for (int n = 0; n < 3; ++n) src.frames.push_back(random_pose(5, rng));
        BoneLengthProfile target;
        for (int l = 0; l < topo.bone_count(); ++l) target.lengths.push_back(rng.uniform(10, 400));

        const auto out = scale_to_skeleton(src, target, topo);
        for (std::size_t f = 0; f < out.frames.size(); ++f) {
            // lengths match the target profile, directions match the source
            const auto lengths = bone_lengths(out.frames[f], topo);
            for (int l = 0; l < topo.bone_count(); ++l) {
                CHECK(std::abs(lengths.lengths[l] - target.lengths[l]) < 1e-6);
                const auto [p, c] = topo.bones[l];
                const Eigen::RowVector3d src_dir =
                    (src.frames[f].joint(c) - src.frames[f].joint(p)).normalized();
                const Eigen::RowVector3d out_dir =
                    (out.frames[f].joint(c) - out.frames[f].joint(p)).normalized();
                CHECK(src_dir.dot(out_dir) >= 1.0 - 1e-9);
            }
        }

        // idempotence: rescaling the result with the same profile is a no-op
        const auto again = scale_to_skeleton(out, target, topo);
        for (std::size_t f = 0; f < out.frames.size(); ++f)
            CHECK((again.frames[f].positions - out.frames[f].positions).cwiseAbs().maxCoeff() <
                  1e-9);
    }
}

TEST_CASE("validate_sequence") {
    const auto topo = chain3_topo();
    MotionSequence seq;
    seq.n_history = 2;
    seq.t_future = 1;
    seq.frames = {make_pose({{0, 0, 0}, {1, 0, 0}, {2, 0, 0}}),
                  make_pose({{0, 0, 1}, {1, 0, 1}, {2, 0, 1}}),
                  make_pose({{0, 0, 2}, {1, 0, 2}, {2, 0, 2}})};

    CHECK(validate_sequence(seq, topo).ok());

    SUBCASE("NaN coordinate is named") {
        seq.frames[1].positions(2, 1) = std::numeric_limits<double>::quiet_NaN();
        const auto report = validate_sequence(seq, topo);
        REQUIRE_FALSE(report.ok());
        CHECK(report.issues[0].message.find("frame 1") != std::string::npos);
        CHECK(report.issues[0].message.find("joint 2") != std::string::npos);
    }

    SUBCASE("frame count mismatch flagged") {
        seq.frames.pop_back();
        const auto report = validate_sequence(seq, topo);
        REQUIRE_FALSE(report.ok());
        CHECK(report.issues[0].message.find("N+T") != std::string::npos);
    }
}
