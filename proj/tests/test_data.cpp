#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <set>

#include "badhmp/data.hpp"
#include "badhmp/dataset_io.hpp"
#include "badhmp/metrics.hpp"
#include "test_helpers.hpp"

using namespace badhmp;
using namespace badhmp::test;

namespace {

SynthConfig tiny_config() {
    SynthConfig cfg;
    cfg.samples_per_action = 6;
    cfg.n_history = 10;
    cfg.t_future = 5;
    cfg.noise_std_mm = 0.0;
    cfg.rng_seed = 9;
    return cfg;
}

std::filesystem::path temp_file(const std::string& name) {
    return std::filesystem::temp_directory_path() / name;
}

bool datasets_bit_equal(const Dataset& a, const Dataset& b) {
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const auto& sa = a.samples[i];
        const auto& sb = b.samples[i];
        if (sa.sample_id != sb.sample_id || sa.action_label != sb.action_label) return false;
        if (sa.frames.size() != sb.frames.size()) return false;
        for (std::size_t n = 0; n < sa.frames.size(); ++n)
            if (!same_bits(sa.frames[n].positions, sb.frames[n].positions)) return false;
    }
    return true;
}

} // namespace

TEST_CASE("synth_generate shape, ids, and validity") {
    const auto cfg = tiny_config();
    const Dataset data = synth_generate(cfg);
    REQUIRE(data.size() == 4 * 6);
    CHECK(data.topology.joint_count == 17);
    CHECK(data.samples[0].sample_id == "walk_0000");
    CHECK(data.samples[0].action_label == "walk");
    CHECK(data.samples[23].sample_id == "idle_0005");
    for (const auto& s : data.samples) {
        CHECK(s.total_frames() == 15);
        CHECK(validate_sequence(s, data.topology).ok());
    }
}

TEST_CASE("noiseless synthesis is exactly rigid") {
    const auto cfg = tiny_config();
    const Dataset data = synth_generate(cfg);
    for (const auto& s : data.samples) {
        // every bone keeps its frame-0 length across the whole sequence
        const auto ref = bone_lengths(s.frames[0], data.topology);
        for (const auto& f : s.frames) {
            const auto lens = bone_lengths(f, data.topology);
            for (int l = 0; l < ref.bone_count(); ++l)
                CHECK(std::abs(lens.lengths[l] - ref.lengths[l]) < 1e-9);
        }
        CHECK(blc_metric(s, data.topology) < 1e-9);
    }
}

TEST_CASE("synth_generate is bit-deterministic in the seed") {
    const auto cfg = tiny_config();
    const Dataset a = synth_generate(cfg);
    const Dataset b = synth_generate(cfg);
    CHECK(datasets_bit_equal(a, b));

    SynthConfig other = cfg;
    other.rng_seed = 10;
    CHECK_FALSE(datasets_bit_equal(a, synth_generate(other)));
}

TEST_CASE("walking samples translate, idle samples stay put") {
    auto cfg = tiny_config();
    cfg.n_history = 40;
    cfg.t_future = 10;
    const Dataset data = synth_generate(cfg);
    const double duration_s = (cfg.n_history + cfg.t_future - 1) * cfg.frame_period_ms / 1000.0;
    for (const auto& s : data.samples) {
        Eigen::RowVector3d disp = s.frames.back().joint(0) - s.frames.front().joint(0);
        disp.z() = 0.0; // root height is constant; sway is lateral
        if (s.action_label == "walk") {
            // speed jitter is bounded by [0.7, 1.3] x 1100 mm/s, sway by ~26 mm
            CHECK(disp.norm() > 0.7 * 1100.0 * duration_s - 60.0);
            CHECK(disp.norm() < 1.3 * 1100.0 * duration_s + 60.0);
        } else if (s.action_label == "wave") {
            // the greeting stroll has a fixed 1000 mm/s tempo along +x
            CHECK(disp.norm() > 1000.0 * duration_s - 60.0);
            CHECK(disp.norm() < 1000.0 * duration_s + 60.0);
            CHECK(disp.x() > 0.9 * disp.norm()); // fixed corridor heading
        } else if (s.action_label == "idle") {
            CHECK(disp.norm() < 60.0);
        }
        // the raised waving arm is unique to the wave action: left wrist
        // above the left shoulder in every frame iff waving
        bool wrist_always_high = true;
        for (const auto& f : s.frames)
            if (f.positions(7, 2) < f.positions(5, 2)) wrist_always_high = false;
        CHECK(wrist_always_high == (s.action_label == "wave"));
    }
}

TEST_CASE("invalid synthesis parameters rejected") {
    auto cfg = tiny_config();
    cfg.noise_std_mm = -1.0;
    CHECK_THROWS_AS(synth_generate(cfg), UsageError);
    cfg = tiny_config();
    cfg.actions = {"moonwalk"};
    CHECK_THROWS_AS(synth_generate(cfg), UsageError);
}

TEST_CASE("split is a stratified partition") {
    auto cfg = tiny_config();
    cfg.samples_per_action = 20;
    const Dataset data = synth_generate(cfg);
    auto [train, test] = split(data, 0.2, 33);

    CHECK(train.size() + test.size() == data.size());
    CHECK(train.split_tag == "train");
    CHECK(test.split_tag == "test");

    std::set<std::string> train_ids, test_ids;
    for (const auto& s : train.samples) train_ids.insert(s.sample_id);
    for (const auto& s : test.samples) test_ids.insert(s.sample_id);
    for (const auto& id : test_ids) CHECK_FALSE(train_ids.contains(id));

    // exactly round(0.2 * 20) = 4 test samples per action
    std::map<std::string, int> per_action;
    for (const auto& s : test.samples) ++per_action[s.action_label];
    for (const auto& [action, n] : per_action) CHECK(n == 4);
    CHECK(per_action.size() == 4);

    // determinism
    auto [train2, test2] = split(data, 0.2, 33);
    CHECK(datasets_bit_equal(test, test2));

    CHECK_THROWS_AS(split(data, 1.5, 33), RangeError);
}

TEST_CASE("sample_test_subset draws per-action counts") {
    auto cfg = tiny_config();
    cfg.samples_per_action = 10;
    const Dataset data = synth_generate(cfg);

    const Dataset small = sample_test_subset(data, 3, 5);
    std::map<std::string, int> per_action;
    for (const auto& s : small.samples) ++per_action[s.action_label];
    REQUIRE(per_action.size() == 4);
    for (const auto& [action, n] : per_action) CHECK(n == 3);

    // asking for more than available returns everything
    const Dataset all = sample_test_subset(data, 256, 5);
    CHECK(all.size() == data.size());

    const Dataset again = sample_test_subset(data, 3, 5);
    CHECK(datasets_bit_equal(small, again));
}

TEST_CASE("jsonl round trip preserves every bit") {
    auto cfg = tiny_config();
    cfg.samples_per_action = 3;
    cfg.noise_std_mm = 5.0; // exercise non-trivial doubles
    const Dataset data = synth_generate(cfg);
    const auto path = temp_file("badhmp_test_roundtrip.jsonl");
    save_dataset(data, path);
    const Dataset back = load_dataset(path);
    CHECK(datasets_bit_equal(data, back));
    CHECK(back.topology.joint_count == 17);
    CHECK(back.topology.joint_names == data.topology.joint_names);
    CHECK(back.samples[0].n_history == cfg.n_history);
    CHECK(back.samples[0].t_future == cfg.t_future);
    CHECK(back.samples[0].frame_period_ms == cfg.frame_period_ms);
    std::filesystem::remove(path);
}

TEST_CASE("binary round trip preserves every bit") {
    auto cfg = tiny_config();
    cfg.samples_per_action = 3;
    cfg.noise_std_mm = 5.0;
    const Dataset data = synth_generate(cfg);
    const auto path = temp_file("badhmp_test_roundtrip.bin");
    save_dataset(data, path);
    const Dataset back = load_dataset(path);
    CHECK(datasets_bit_equal(data, back));
    std::filesystem::remove(path);
}

TEST_CASE("truncated binary file names the byte offset") {
    auto cfg = tiny_config();
    cfg.samples_per_action = 2;
    const Dataset data = synth_generate(cfg);
    const auto path = temp_file("badhmp_test_trunc.bin");
    save_dataset(data, path);
    const auto full_size = std::filesystem::file_size(path);
    std::filesystem::resize_file(path, full_size / 2);
    try {
        load_dataset(path);
        FAIL("expected ParseError");
    } catch (const ParseError& e) {
        CHECK(std::string(e.what()).find("byte offset") != std::string::npos);
    }
    std::filesystem::remove(path);
}

TEST_CASE("bad magic and joint-count mismatch are rejected") {
    const auto bad_magic = temp_file("badhmp_test_badmagic.bin");
    {
        std::ofstream out(bad_magic, std::ios::binary);
        out << "NOTBHMP0 garbage";
    }
    CHECK_THROWS_AS(load_dataset(bad_magic), ParseError);
    std::filesystem::remove(bad_magic);

    // a record with 2 joints against a 17-joint header topology
    auto cfg = tiny_config();
    cfg.samples_per_action = 1;
    const Dataset data = synth_generate(cfg);
    const auto good = temp_file("badhmp_test_header.jsonl");
    save_dataset(data, good);
    std::ifstream in(good);
    std::string header;
    std::getline(in, header);
    in.close();
    const auto mismatch = temp_file("badhmp_test_mismatch.jsonl");
    {
        std::ofstream out(mismatch);
        out << header << "\n";
        out << R"({"id":"x","action":"walk","frames":[[[0,0,0],[1,1,1]]]})" << "\n";
    }
    CHECK_THROWS_AS(load_dataset(mismatch), DimensionError);
    std::filesystem::remove(good);
    std::filesystem::remove(mismatch);
}

TEST_CASE("malformed jsonl line is reported with its line number") {
    const auto path = temp_file("badhmp_test_badline.jsonl");
    {
        SynthConfig cfg = tiny_config();
        cfg.samples_per_action = 1;
        save_dataset(synth_generate(cfg), path);
        std::ofstream out(path, std::ios::app);
        out << R"({"id":"x","action":"walk"})" << "\n"; // missing frames
    }
    try {
        load_dataset(path);
        FAIL("expected ParseError");
    } catch (const ParseError& e) {
        CHECK(std::string(e.what()).find("line 6") != std::string::npos);
    }
    std::filesystem::remove(path);
}
