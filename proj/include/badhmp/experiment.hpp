#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "badhmp/checkpoint.hpp"
#include "badhmp/data.hpp"
#include "badhmp/dataset_io.hpp"
#include "badhmp/metrics.hpp"
#include "badhmp/poisoning.hpp"
#include "badhmp/predictor.hpp"
#include "badhmp/render.hpp"
#include "badhmp/report_io.hpp"

namespace badhmp {

struct FinetuneConfig {
    double clean_fraction = 0.30;
    int epochs = 30;
    std::uint64_t subset_seed = 7;
};

// One config drives every command; flags override file values and the merged
// effective config is echoed into every report.
struct ExperimentConfig {
    std::filesystem::path out_dir = "out";
    SynthConfig synth;
    double test_fraction = 0.2;
    int test_per_action = 128;
    std::uint64_t split_seed = 2;
    std::uint64_t subset_seed = 3;
    PoisonSpec poison;
    std::string source_action = "wave"; // action pool for the seeded source pick
    std::uint64_t source_pick_seed = 4;
    PredictorConfig model;
    TrainConfig train;
    HorizonSet horizons;

    FinetuneConfig finetune;

    std::filesystem::path train_clean_path() const { return out_dir / "train_clean.jsonl"; }
    std::filesystem::path test_clean_path() const { return out_dir / "test_clean.jsonl"; }
    std::filesystem::path train_poisoned_path() const { return out_dir / "train_poisoned.jsonl"; }
    std::filesystem::path test_poisoned_path() const { return out_dir / "test_poisoned.jsonl"; }
    std::filesystem::path manifest_path() const { return out_dir / "manifest.json"; }
    std::filesystem::path checkpoint_path(bool poisoned) const {
        return out_dir / (poisoned ? "model_victim.json" : "model_benign.json");
    }
};

inline nlohmann::json config_to_json(const ExperimentConfig& cfg) {
    nlohmann::json j;
    j["out_dir"] = cfg.out_dir.string();
    j["synth"] = {{"actions", cfg.synth.actions},
                  {"samples_per_action", cfg.synth.samples_per_action},
                  {"n_history", cfg.synth.n_history},
                  {"t_future", cfg.synth.t_future},
                  {"frame_period_ms", cfg.synth.frame_period_ms},
                  {"noise_std_mm", cfg.synth.noise_std_mm},
                  {"rng_seed", cfg.synth.rng_seed}};
    j["test_fraction"] = cfg.test_fraction;
    j["test_per_action"] = cfg.test_per_action;
    j["split_seed"] = cfg.split_seed;
    j["subset_seed"] = cfg.subset_seed;
    j["poison"] = poison_spec_to_json(cfg.poison);
    j["source_action"] = cfg.source_action;
    j["source_pick_seed"] = cfg.source_pick_seed;
    j["model"] = {{"dct_coefficients", cfg.model.dct_coefficients},
                  {"hidden", cfg.model.hidden},
                  {"adjacency_noise_std", cfg.model.adjacency_noise_std},
                  {"coord_scale", cfg.model.coord_scale}};
    j["train"] = {{"epochs", cfg.train.epochs},
                  {"batch_size", cfg.train.batch_size},
                  {"learning_rate", cfg.train.learning_rate},
                  {"lr_decay", cfg.train.lr_decay},
                  {"lr_decay_every", cfg.train.lr_decay_every},
                  {"rng_seed", cfg.train.rng_seed}};
    j["horizons_ms"] = cfg.horizons.horizons_ms;
    j["finetune"] = {{"clean_fraction", cfg.finetune.clean_fraction},
                     {"epochs", cfg.finetune.epochs},
                     {"subset_seed", cfg.finetune.subset_seed}};
    return j;
}

inline void apply_config_json(ExperimentConfig& cfg, const nlohmann::json& j) {
    if (j.contains("out_dir")) cfg.out_dir = j.at("out_dir").get<std::string>();
    if (j.contains("synth")) {
        const auto& s = j.at("synth");
        if (s.contains("actions")) cfg.synth.actions = s.at("actions").get<std::vector<std::string>>();
        if (s.contains("samples_per_action"))
            cfg.synth.samples_per_action = s.at("samples_per_action").get<int>();
        if (s.contains("n_history")) cfg.synth.n_history = s.at("n_history").get<int>();
        if (s.contains("t_future")) cfg.synth.t_future = s.at("t_future").get<int>();
        if (s.contains("frame_period_ms"))
            cfg.synth.frame_period_ms = s.at("frame_period_ms").get<double>();
        if (s.contains("noise_std_mm")) cfg.synth.noise_std_mm = s.at("noise_std_mm").get<double>();
        if (s.contains("rng_seed")) cfg.synth.rng_seed = s.at("rng_seed").get<std::uint64_t>();
    }
    if (j.contains("test_fraction")) cfg.test_fraction = j.at("test_fraction").get<double>();
    if (j.contains("test_per_action")) cfg.test_per_action = j.at("test_per_action").get<int>();
    if (j.contains("split_seed")) cfg.split_seed = j.at("split_seed").get<std::uint64_t>();
    if (j.contains("subset_seed")) cfg.subset_seed = j.at("subset_seed").get<std::uint64_t>();
    if (j.contains("poison")) {
        const auto& p = j.at("poison");
        if (p.contains("source_sample_id"))
            cfg.poison.source_sample_id = p.at("source_sample_id").get<std::string>();
        if (p.contains("trigger_limb")) cfg.poison.trigger_limb = p.at("trigger_limb").get<std::string>();
        if (p.contains("injection_ratio"))
            cfg.poison.injection_ratio = p.at("injection_ratio").get<double>();
        if (p.contains("rng_seed")) cfg.poison.rng_seed = p.at("rng_seed").get<std::uint64_t>();
        if (p.contains("separate_target_source"))
            cfg.poison.separate_target_source = p.at("separate_target_source").get<std::string>();
    }
    if (j.contains("source_action")) cfg.source_action = j.at("source_action").get<std::string>();
    if (j.contains("source_pick_seed"))
        cfg.source_pick_seed = j.at("source_pick_seed").get<std::uint64_t>();
    if (j.contains("model")) {
        const auto& m = j.at("model");
        if (m.contains("dct_coefficients"))
            cfg.model.dct_coefficients = m.at("dct_coefficients").get<int>();
        if (m.contains("hidden")) cfg.model.hidden = m.at("hidden").get<std::vector<int>>();
        if (m.contains("adjacency_noise_std"))
            cfg.model.adjacency_noise_std = m.at("adjacency_noise_std").get<double>();
        if (m.contains("coord_scale")) cfg.model.coord_scale = m.at("coord_scale").get<double>();
    }
    if (j.contains("train")) {
        const auto& t = j.at("train");
        if (t.contains("epochs")) cfg.train.epochs = t.at("epochs").get<int>();
        if (t.contains("batch_size")) cfg.train.batch_size = t.at("batch_size").get<int>();
        if (t.contains("learning_rate")) cfg.train.learning_rate = t.at("learning_rate").get<double>();
        if (t.contains("lr_decay")) cfg.train.lr_decay = t.at("lr_decay").get<double>();
        if (t.contains("lr_decay_every")) cfg.train.lr_decay_every = t.at("lr_decay_every").get<int>();
        if (t.contains("rng_seed")) cfg.train.rng_seed = t.at("rng_seed").get<std::uint64_t>();
    }
    if (j.contains("horizons_ms"))
        cfg.horizons.horizons_ms = j.at("horizons_ms").get<std::vector<double>>();
    if (j.contains("finetune")) {
        const auto& f = j.at("finetune");
        if (f.contains("clean_fraction")) cfg.finetune.clean_fraction = f.at("clean_fraction").get<double>();
        if (f.contains("epochs")) cfg.finetune.epochs = f.at("epochs").get<int>();
        if (f.contains("subset_seed")) cfg.finetune.subset_seed = f.at("subset_seed").get<std::uint64_t>();
    }
}

inline ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw UsageError("cannot open config file: " + path.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(path.string() + ": " + e.what());
    }
    ExperimentConfig cfg;
    apply_config_json(cfg, j);
    return cfg;
}

namespace detail {

// write-temp then rename, so readers never observe partial files; the
// temp name keeps the real extension because writers dispatch on it
template <typename WriteFn>
void atomic_write(const std::filesystem::path& path, WriteFn&& write_fn) {
    std::filesystem::path tmp = path;
    tmp.replace_filename(path.stem().string() + ".tmp" + path.extension().string());
    write_fn(tmp);
    std::filesystem::rename(tmp, path);
}

inline void sync_predictor_dims(ExperimentConfig& cfg) {
    cfg.model.n_history = cfg.synth.n_history;
    cfg.model.t_future = cfg.synth.t_future;
}

} // namespace detail

// generate: synthesize, split, draw the per-action test subset, save.
inline void cmd_generate(ExperimentConfig cfg, std::ostream& log = std::cout) {
    if (cfg.synth.samples_per_action <= 0)
        throw UsageError("samples_per_action must be positive");
    std::filesystem::create_directories(cfg.out_dir);
    const Dataset all = synth_generate(cfg.synth);
    auto [train_set, test_full] = split(all, cfg.test_fraction, cfg.split_seed);
    const Dataset test_set = sample_test_subset(test_full, cfg.test_per_action, cfg.subset_seed);
    detail::atomic_write(cfg.train_clean_path(),
                         [&](const auto& p) { save_dataset(train_set, p); });
    detail::atomic_write(cfg.test_clean_path(), [&](const auto& p) { save_dataset(test_set, p); });
    log << "generated " << all.size() << " samples -> train " << train_set.size() << ", test "
        << test_set.size() << " (" << cfg.synth.actions.size() << " actions)\n";
}

// Resolves the source sample for poisoning: an explicit id if configured,
// otherwise a seeded random pick from the clean test set (restricted to
// source_action when set).
inline const MotionSequence& resolve_source(const ExperimentConfig& cfg, const Dataset& test_set,
                                            std::string* picked_id = nullptr) {
    if (!cfg.poison.source_sample_id.empty()) {
        const MotionSequence* found = test_set.find(cfg.poison.source_sample_id);
        if (!found)
            throw UsageError("source sample not found in test set: " + cfg.poison.source_sample_id);
        if (picked_id) *picked_id = found->sample_id;
        return *found;
    }
    std::vector<std::size_t> pool;
    for (std::size_t i = 0; i < test_set.size(); ++i)
        if (cfg.source_action.empty() || test_set.samples[i].action_label == cfg.source_action)
            pool.push_back(i);
    if (pool.empty()) throw UsageError("no candidate source samples for action '" +
                                       cfg.source_action + "'");
    Rng rng(Rng::derive(cfg.source_pick_seed, 401));
    const MotionSequence& src = test_set.samples[pool[rng.below(pool.size())]];
    if (picked_id) *picked_id = src.sample_id;
    return src;
}

// poison: write the poisoned training set, the fully poisoned test set, and
// the manifest.
inline PoisonManifest cmd_poison(ExperimentConfig cfg, std::ostream& log = std::cout) {
    const Dataset train_set = load_dataset(cfg.train_clean_path());
    const Dataset test_set = load_dataset(cfg.test_clean_path());
    PoisonSpec spec = cfg.poison;
    const MotionSequence& source = resolve_source(cfg, test_set, &spec.source_sample_id);
    const MotionSequence* target_source = nullptr;
    if (spec.separate_target_source) {
        target_source = test_set.find(*spec.separate_target_source);
        if (!target_source)
            throw UsageError("separate target source not found: " + *spec.separate_target_source);
    }

    auto [poisoned_train, manifest] = poison_dataset(train_set, source, train_set.topology, spec,
                                                     target_source);
    const Dataset poisoned_test = poison_testset(test_set, source, test_set.topology, spec,
                                                 target_source);
    detail::atomic_write(cfg.train_poisoned_path(),
                         [&](const auto& p) { save_dataset(poisoned_train, p); });
    detail::atomic_write(cfg.test_poisoned_path(),
                         [&](const auto& p) { save_dataset(poisoned_test, p); });
    detail::atomic_write(cfg.manifest_path(), [&](const auto& p) { save_manifest(manifest, p); });
    log << "poisoned " << manifest.count() << "/" << train_set.size() << " train samples (rho="
        << spec.injection_ratio << ", source=" << spec.source_sample_id << "), " << test_set.size()
        << " test samples\n";
    return manifest;
}

// train: benign (clean data) or victim (poisoned data) model.
inline Checkpoint cmd_train(ExperimentConfig cfg, bool poisoned, std::ostream& log = std::cout) {
    detail::sync_predictor_dims(cfg);
    const Dataset train_set =
        load_dataset(poisoned ? cfg.train_poisoned_path() : cfg.train_clean_path());
    cfg.model.k_joints = train_set.topology.joint_count;
    auto [params, history] = train(train_set, cfg.model, cfg.train, cfg.train.rng_seed);
    Checkpoint ckpt{std::move(params), std::move(history), cfg.train};
    detail::atomic_write(cfg.checkpoint_path(poisoned), [&](const auto& p) {
        save_checkpoint(ckpt.params, ckpt.history, ckpt.train_cfg, p);
    });
    log << (poisoned ? "victim" : "benign") << " model trained, final loss "
        << ckpt.history.epoch_loss.back() << "\n";
    return ckpt;
}

inline EvalReport evaluate_checkpoint(const ExperimentConfig& cfg, const ModelParams& params) {
    const Dataset clean_test = load_dataset(cfg.test_clean_path());
    const Dataset poisoned_test = load_dataset(cfg.test_poisoned_path());
    const DctBasis basis(params.config.total_frames(), params.config.dct_coefficients);
    const PredictorFn model = make_predictor(params, basis);
    EvalReport report;
    report.cde = cde(model, clean_test, cfg.horizons);
    report.bde = bde(model, poisoned_test, cfg.horizons);
    if (std::filesystem::exists(cfg.train_poisoned_path())) {
        const Dataset clean_train = load_dataset(cfg.train_clean_path());
        const Dataset poisoned_train = load_dataset(cfg.train_poisoned_path());
        report.stealth = stealth_report(clean_train, poisoned_train, clean_train.topology);
        report.has_stealth = true;
    }
    return report;
}

// eval: JSON + CSV report with CDE/BDE per horizon and the stealth table.
inline EvalReport cmd_eval(const ExperimentConfig& cfg, const std::filesystem::path& ckpt_path,
                           const std::string& report_stem, std::ostream& log = std::cout) {
    const Checkpoint ckpt = load_checkpoint(ckpt_path);
    const EvalReport report = evaluate_checkpoint(cfg, ckpt.params);
    detail::atomic_write(cfg.out_dir / (report_stem + ".json"), [&](const auto& p) {
        save_report_json(report, config_to_json(cfg), p);
    });
    detail::atomic_write(cfg.out_dir / (report_stem + ".csv"),
                         [&](const auto& p) { save_report_csv(report, p); });
    log << report_stem << ":";
    for (const auto& [h, v] : report.cde.by_horizon_ms) log << " CDE@" << h << "=" << v;
    for (const auto& [h, v] : report.bde.by_horizon_ms) log << " BDE@" << h << "=" << v;
    log << "\n";
    return report;
}

// sweep-ratio: one victim per injection ratio, combined report.
inline nlohmann::json cmd_sweep_ratio(ExperimentConfig cfg, const std::vector<double>& ratios,
                                      std::ostream& log = std::cout) {
    detail::sync_predictor_dims(cfg);
    const Dataset train_set = load_dataset(cfg.train_clean_path());
    const Dataset test_set = load_dataset(cfg.test_clean_path());
    cfg.model.k_joints = train_set.topology.joint_count;
    PoisonSpec spec = cfg.poison;
    const MotionSequence& source = resolve_source(cfg, test_set, &spec.source_sample_id);
    const Dataset poisoned_test = poison_testset(test_set, source, test_set.topology, spec);
    const DctBasis basis(cfg.model.total_frames(), cfg.model.dct_coefficients);

    nlohmann::json sweep = nlohmann::json::object();
    sweep["config"] = config_to_json(cfg);
    sweep["ratios"] = nlohmann::json::object();
    for (double rho : ratios) {
        PoisonSpec rho_spec = spec;
        rho_spec.injection_ratio = rho;
        auto [poisoned_train, manifest] =
            poison_dataset(train_set, source, train_set.topology, rho_spec);
        auto [params, history] = train(poisoned_train, cfg.model, cfg.train, cfg.train.rng_seed);
        const PredictorFn model = make_predictor(params, basis);
        EvalReport report;
        report.cde = cde(model, test_set, cfg.horizons);
        report.bde = bde(model, poisoned_test, cfg.horizons);
        nlohmann::json entry;
        entry["cde"] = io_detail::horizon_errors_to_json(report.cde);
        entry["bde"] = io_detail::horizon_errors_to_json(report.bde);
        entry["poisoned_count"] = manifest.count();
        sweep["ratios"][io_detail::horizon_key(rho * 100.0)] = std::move(entry);
        log << "rho=" << rho << ": BDE@" << cfg.horizons.horizons_ms.front() << "="
            << report.bde.by_horizon_ms.begin()->second << "\n";
    }
    detail::atomic_write(cfg.out_dir / "sweep_report.json", [&](const auto& p) {
        std::ofstream out(p);
        out << sweep.dump(2) << "\n";
    });
    return sweep;
}

struct FinetuneResult {
    EvalReport before;
    EvalReport after;
    Checkpoint tuned;
};

// finetune: continue training the victim on a seeded clean subset, report
// before/after errors.
inline FinetuneResult cmd_finetune(ExperimentConfig cfg, const std::filesystem::path& ckpt_path,
                                   std::ostream& log = std::cout) {
    const Checkpoint ckpt = load_checkpoint(ckpt_path);
    const Dataset clean_train = load_dataset(cfg.train_clean_path());

    // Seeded draw of round(clean_fraction * N_train) retained clean samples.
    const std::size_t n_keep = static_cast<std::size_t>(
        std::llround(cfg.finetune.clean_fraction * static_cast<double>(clean_train.size())));
    Rng rng(Rng::derive(cfg.finetune.subset_seed, 402));
    const auto chosen = rng.sample_without_replacement(clean_train.size(), n_keep);
    std::vector<bool> keep(clean_train.size(), false);
    for (std::size_t i : chosen) keep[i] = true;
    Dataset subset;
    subset.topology = clean_train.topology;
    subset.split_tag = clean_train.split_tag;
    for (std::size_t i = 0; i < clean_train.size(); ++i)
        if (keep[i]) subset.samples.push_back(clean_train.samples[i]);

    FinetuneResult result;
    result.before = evaluate_checkpoint(cfg, ckpt.params);
    auto [tuned_params, tuned_history] =
        fine_tune(ckpt.params, subset, cfg.finetune.epochs, ckpt.train_cfg, ckpt.train_cfg.epochs);
    result.tuned = Checkpoint{std::move(tuned_params), std::move(tuned_history), ckpt.train_cfg};
    detail::atomic_write(cfg.out_dir / "model_finetuned.json", [&](const auto& p) {
        save_checkpoint(result.tuned.params, result.tuned.history, result.tuned.train_cfg, p);
    });
    result.after = evaluate_checkpoint(cfg, result.tuned.params);

    nlohmann::json j;
    j["config"] = config_to_json(cfg);
    j["subset_size"] = n_keep;
    j["before"] = {{"cde", io_detail::horizon_errors_to_json(result.before.cde)},
                   {"bde", io_detail::horizon_errors_to_json(result.before.bde)}};
    j["after"] = {{"cde", io_detail::horizon_errors_to_json(result.after.cde)},
                  {"bde", io_detail::horizon_errors_to_json(result.after.bde)}};
    detail::atomic_write(cfg.out_dir / "finetune_report.json", [&](const auto& p) {
        std::ofstream out(p);
        out << j.dump(2) << "\n";
    });
    log << "fine-tuned on " << n_keep << " clean samples for " << cfg.finetune.epochs
        << " epochs\n";
    return result;
}

// render: SVG strip of one sample, optionally overlaid with another.
inline void cmd_render(const ExperimentConfig& cfg, const std::filesystem::path& dataset_path,
                       const std::string& sample_id, const std::string& overlay_id,
                       const std::filesystem::path& svg_path, int strip_frames = 15) {
    const Dataset dataset = load_dataset(dataset_path);
    const MotionSequence* seq = dataset.find(sample_id);
    if (!seq) throw UsageError("sample not found: " + sample_id);
    const MotionSequence* overlay = nullptr;
    Dataset overlay_holder;
    if (!overlay_id.empty()) {
        // The overlay id may live in the paired poisoned/clean file; search
        // the same dataset first.
        overlay = dataset.find(overlay_id);
        if (!overlay) throw UsageError("overlay sample not found: " + overlay_id);
    }
    RenderOptions opts;
    opts.strip_frames = strip_frames;
    detail::atomic_write(svg_path, [&](const auto& p) {
        render_strip_svg_file(*seq, dataset.topology, p, overlay, opts);
    });
    (void)cfg;
}

} // namespace badhmp
