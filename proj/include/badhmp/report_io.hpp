#pragma once

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "badhmp/metrics.hpp"
#include "badhmp/poisoning.hpp"

namespace badhmp {

namespace io_detail {

inline std::string horizon_key(double ms) {
    std::ostringstream os;
    if (ms == static_cast<long long>(ms))
        os << static_cast<long long>(ms);
    else
        os << ms;
    return os.str();
}

inline nlohmann::json horizon_map_to_json(const std::map<double, double>& m) {
    nlohmann::json j = nlohmann::json::object();
    for (const auto& [h, v] : m) j[horizon_key(h)] = v;
    return j;
}

inline nlohmann::json horizon_errors_to_json(const HorizonErrors& e) {
    nlohmann::json j;
    j["by_horizon_ms"] = horizon_map_to_json(e.by_horizon_ms);
    nlohmann::json pa = nlohmann::json::object();
    for (const auto& [action, m] : e.per_action) pa[action] = horizon_map_to_json(m);
    j["per_action"] = pa;
    return j;
}

inline nlohmann::json stealth_to_json(const StealthStats& s) {
    return {{"max_acc", s.max_acc}, {"max_jerk", s.max_jerk}, {"mean_blc", s.mean_blc}};
}

} // namespace io_detail

inline nlohmann::json poison_spec_to_json(const PoisonSpec& spec) {
    nlohmann::json j;
    j["source_sample_id"] = spec.source_sample_id;
    j["trigger_limb"] = spec.trigger_limb;
    j["injection_ratio"] = spec.injection_ratio;
    j["rng_seed"] = spec.rng_seed;
    if (spec.separate_target_source)
        j["separate_target_source"] = *spec.separate_target_source;
    return j;
}

inline PoisonSpec poison_spec_from_json(const nlohmann::json& j) {
    PoisonSpec spec;
    spec.source_sample_id = j.at("source_sample_id").get<std::string>();
    spec.trigger_limb = j.at("trigger_limb").get<std::string>();
    spec.injection_ratio = j.at("injection_ratio").get<double>();
    spec.rng_seed = j.at("rng_seed").get<std::uint64_t>();
    if (j.contains("separate_target_source"))
        spec.separate_target_source = j.at("separate_target_source").get<std::string>();
    return spec;
}

inline void save_manifest(const PoisonManifest& manifest, const std::filesystem::path& path) {
    nlohmann::json j;
    j["spec"] = poison_spec_to_json(manifest.spec);
    j["poisoned_sample_ids"] = manifest.poisoned_sample_ids;
    j["count"] = manifest.count();
    std::ofstream out(path);
    if (!out) throw ParseError("cannot open for writing: " + path.string());
    out << j.dump(2) << "\n";
}

inline PoisonManifest load_manifest(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open: " + path.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(path.string() + ": " + e.what());
    }
    PoisonManifest manifest;
    manifest.spec = poison_spec_from_json(j.at("spec"));
    manifest.poisoned_sample_ids = j.at("poisoned_sample_ids").get<std::vector<std::string>>();
    return manifest;
}

// JSON report; `config_echo` carries the exact effective config that produced
// the numbers so reports are self-describing.
inline void save_report_json(const EvalReport& report, const nlohmann::json& config_echo,
                             const std::filesystem::path& path) {
    nlohmann::json j;
    j["config"] = config_echo;
    j["cde"] = io_detail::horizon_errors_to_json(report.cde);
    j["bde"] = io_detail::horizon_errors_to_json(report.bde);
    if (report.has_stealth) {
        j["stealth"] = {{"clean", io_detail::stealth_to_json(report.stealth.clean)},
                        {"poisoned", io_detail::stealth_to_json(report.stealth.poisoned)}};
    }
    std::ofstream out(path);
    if (!out) throw ParseError("cannot open for writing: " + path.string());
    out << j.dump(2) << "\n";
}

// CSV table: rows CDE/BDE, one column per horizon.
inline void save_report_csv(const EvalReport& report, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw ParseError("cannot open for writing: " + path.string());
    out << "metric";
    for (const auto& [h, v] : report.cde.by_horizon_ms) out << "," << io_detail::horizon_key(h);
    out << "\n";
    out << "CDE";
    for (const auto& [h, v] : report.cde.by_horizon_ms) out << "," << v;
    out << "\n";
    out << "BDE";
    for (const auto& [h, v] : report.bde.by_horizon_ms) out << "," << v;
    out << "\n";
}

} // namespace badhmp
