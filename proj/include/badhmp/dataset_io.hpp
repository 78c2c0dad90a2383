#pragma once

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "badhmp/data.hpp"
#include "badhmp/types.hpp"

namespace badhmp {

inline constexpr char kBinaryMagic[8] = {'B', 'H', 'M', 'P', '0', '0', '0', '1'};

namespace io_detail {

inline nlohmann::json topology_to_json(const SkeletonTopology& topo) {
    nlohmann::json j;
    j["joint_names"] = topo.joint_names;
    j["parents"] = topo.parent;
    nlohmann::json bones = nlohmann::json::array();
    for (const auto& [p, c] : topo.bones) bones.push_back({p, c});
    j["bones"] = bones;
    nlohmann::json limbs = nlohmann::json::object();
    for (const auto& [name, limb] : topo.limbs)
        limbs[name] = {{"anchor", limb.anchor}, {"chain", limb.chain}};
    j["limbs"] = limbs;
    return j;
}

inline SkeletonTopology topology_from_json(const nlohmann::json& j) {
    SkeletonTopology topo;
    topo.joint_names = j.at("joint_names").get<std::vector<std::string>>();
    topo.parent = j.at("parents").get<std::vector<int>>();
    topo.joint_count = static_cast<int>(topo.parent.size());
    for (const auto& b : j.at("bones"))
        topo.bones.emplace_back(b.at(0).get<int>(), b.at(1).get<int>());
    for (const auto& [name, limb] : j.at("limbs").items())
        topo.limbs[name] = Limb{limb.at("anchor").get<int>(),
                                limb.at("chain").get<std::vector<int>>()};
    return topo;
}

inline nlohmann::json frames_to_json(const MotionSequence& seq) {
    nlohmann::json frames = nlohmann::json::array();
    for (const auto& pose : seq.frames) {
        nlohmann::json f = nlohmann::json::array();
        for (int j = 0; j < pose.joint_count(); ++j)
            f.push_back({pose.positions(j, 0), pose.positions(j, 1), pose.positions(j, 2)});
        frames.push_back(std::move(f));
    }
    return frames;
}

inline void frames_from_json(const nlohmann::json& frames, MotionSequence& seq, int expected_k) {
    for (const auto& f : frames) {
        Pose pose;
        pose.positions.resize(static_cast<Eigen::Index>(f.size()), 3);
        Eigen::Index j = 0;
        for (const auto& joint : f) {
            if (joint.size() != 3) throw ParseError("joint record is not a 3-vector");
            pose.positions(j, 0) = joint.at(0).get<double>();
            pose.positions(j, 1) = joint.at(1).get<double>();
            pose.positions(j, 2) = joint.at(2).get<double>();
            ++j;
        }
        if (pose.joint_count() != expected_k)
            throw DimensionError("record has " + std::to_string(pose.joint_count()) +
                                 " joints, header topology has " + std::to_string(expected_k));
        seq.frames.push_back(std::move(pose));
    }
}

} // namespace io_detail

// JSONL format: a header record (schema_version, topology, frame_period_ms,
// n_history, t_future) followed by one record per sample (id, action, frames).
inline void save_dataset_jsonl(const Dataset& dataset, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw ParseError("cannot open for writing: " + path.string());
    nlohmann::json header;
    header["schema_version"] = 1;
    header["topology"] = io_detail::topology_to_json(dataset.topology);
    if (!dataset.samples.empty()) {
        header["frame_period_ms"] = dataset.samples.front().frame_period_ms;
        header["n_history"] = dataset.samples.front().n_history;
        header["t_future"] = dataset.samples.front().t_future;
    } else {
        header["frame_period_ms"] = 40.0;
        header["n_history"] = 0;
        header["t_future"] = 0;
    }
    out << header.dump() << "\n";
    for (const auto& seq : dataset.samples) {
        nlohmann::json rec;
        rec["id"] = seq.sample_id;
        rec["action"] = seq.action_label;
        rec["frames"] = io_detail::frames_to_json(seq);
        out << rec.dump() << "\n";
    }
}

inline Dataset load_dataset_jsonl(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open: " + path.string());
    std::string line;
    if (!std::getline(in, line)) throw ParseError(path.string() + ": missing header line");
    Dataset dataset;
    double frame_period = 40.0;
    int n_history = 0, t_future = 0;
    try {
        const nlohmann::json header = nlohmann::json::parse(line);
        dataset.topology = io_detail::topology_from_json(header.at("topology"));
        frame_period = header.at("frame_period_ms").get<double>();
        n_history = header.at("n_history").get<int>();
        t_future = header.at("t_future").get<int>();
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(path.string() + ": line 1: " + e.what());
    }
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        try {
            const nlohmann::json rec = nlohmann::json::parse(line);
            MotionSequence seq;
            seq.sample_id = rec.at("id").get<std::string>();
            seq.action_label = rec.at("action").get<std::string>();
            seq.frame_period_ms = frame_period;
            seq.n_history = n_history;
            seq.t_future = t_future;
            io_detail::frames_from_json(rec.at("frames"), seq, dataset.topology.joint_count);
            dataset.samples.push_back(std::move(seq));
        } catch (const nlohmann::json::exception& e) {
            throw ParseError(path.string() + ": line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    return dataset;
}

namespace io_detail {

template <typename T>
void write_raw(std::ofstream& out, const T& value) {
    out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

inline void write_string(std::ofstream& out, const std::string& s) {
    write_raw(out, static_cast<std::uint32_t>(s.size()));
    out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

template <typename T>
T read_raw(std::ifstream& in, const std::filesystem::path& path) {
    T value;
    in.read(reinterpret_cast<char*>(&value), sizeof(T));
    if (!in)
        throw ParseError(path.string() + ": truncated at byte offset " +
                         std::to_string(static_cast<long long>(in.tellg())));
    return value;
}

inline std::string read_string(std::ifstream& in, const std::filesystem::path& path) {
    const auto len = read_raw<std::uint32_t>(in, path);
    std::string s(len, '\0');
    in.read(s.data(), static_cast<std::streamsize>(len));
    if (!in)
        throw ParseError(path.string() + ": truncated string at byte offset " +
                         std::to_string(static_cast<long long>(in.tellg())));
    return s;
}

} // namespace io_detail

// Binary companion format: magic "BHMP0001", JSON header string, record
// count, then per record id/action strings, a frame count, and the raw
// little-endian doubles of all frames.
inline void save_dataset_binary(const Dataset& dataset, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ParseError("cannot open for writing: " + path.string());
    out.write(kBinaryMagic, sizeof(kBinaryMagic));
    nlohmann::json header;
    header["schema_version"] = 1;
    header["topology"] = io_detail::topology_to_json(dataset.topology);
    header["frame_period_ms"] =
        dataset.samples.empty() ? 40.0 : dataset.samples.front().frame_period_ms;
    header["n_history"] = dataset.samples.empty() ? 0 : dataset.samples.front().n_history;
    header["t_future"] = dataset.samples.empty() ? 0 : dataset.samples.front().t_future;
    io_detail::write_string(out, header.dump());
    io_detail::write_raw(out, static_cast<std::uint64_t>(dataset.samples.size()));
    for (const auto& seq : dataset.samples) {
        io_detail::write_string(out, seq.sample_id);
        io_detail::write_string(out, seq.action_label);
        io_detail::write_raw(out, static_cast<std::uint32_t>(seq.frames.size()));
        for (const auto& pose : seq.frames)
            for (int j = 0; j < pose.joint_count(); ++j)
                for (int c = 0; c < 3; ++c) io_detail::write_raw(out, pose.positions(j, c));
    }
}

inline Dataset load_dataset_binary(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError("cannot open: " + path.string());
    char magic[8];
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, kBinaryMagic, sizeof(magic)) != 0)
        throw ParseError(path.string() + ": bad magic, not a BHMP0001 file");
    Dataset dataset;
    double frame_period = 40.0;
    int n_history = 0, t_future = 0;
    try {
        const nlohmann::json header = nlohmann::json::parse(io_detail::read_string(in, path));
        dataset.topology = io_detail::topology_from_json(header.at("topology"));
        frame_period = header.at("frame_period_ms").get<double>();
        n_history = header.at("n_history").get<int>();
        t_future = header.at("t_future").get<int>();
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(path.string() + ": bad header: " + e.what());
    }
    const auto count = io_detail::read_raw<std::uint64_t>(in, path);
    const int k = dataset.topology.joint_count;
    for (std::uint64_t i = 0; i < count; ++i) {
        MotionSequence seq;
        seq.sample_id = io_detail::read_string(in, path);
        seq.action_label = io_detail::read_string(in, path);
        seq.frame_period_ms = frame_period;
        seq.n_history = n_history;
        seq.t_future = t_future;
        const auto frames = io_detail::read_raw<std::uint32_t>(in, path);
        for (std::uint32_t f = 0; f < frames; ++f) {
            Pose pose;
            pose.positions.resize(k, 3);
            for (int j = 0; j < k; ++j)
                for (int c = 0; c < 3; ++c)
                    pose.positions(j, c) = io_detail::read_raw<double>(in, path);
            seq.frames.push_back(std::move(pose));
        }
        dataset.samples.push_back(std::move(seq));
    }
    return dataset;
}

// Format chosen by extension: ".jsonl" is the text format, anything else the
// binary one.
inline void save_dataset(const Dataset& dataset, const std::filesystem::path& path) {
    if (path.extension() == ".jsonl")
        save_dataset_jsonl(dataset, path);
    else
        save_dataset_binary(dataset, path);
}

inline Dataset load_dataset(const std::filesystem::path& path) {
    if (path.extension() == ".jsonl") return load_dataset_jsonl(path);
    return load_dataset_binary(path);
}

} // namespace badhmp
