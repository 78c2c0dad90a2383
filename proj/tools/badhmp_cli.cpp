// badhmp: end-to-end driver for the backdoor-attack experiment on
// skeleton-based motion prediction. Subcommands:
//   generate | poison | train | eval | sweep-ratio | finetune | render

#include <CLI11.hpp>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "badhmp/experiment.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 2;
constexpr int kExitData = 3;
constexpr int kExitNumeric = 4;

struct CommonOpts {
    std::string config_path;
    std::string out_dir;
    std::uint64_t seed = 0;
    bool seed_set = false;
};

badhmp::ExperimentConfig make_config(const CommonOpts& opts) {
    badhmp::ExperimentConfig cfg;
    if (!opts.config_path.empty()) cfg = badhmp::load_config(opts.config_path);
    if (!opts.out_dir.empty()) cfg.out_dir = opts.out_dir;
    if (opts.seed_set) {
        // One master seed fans out to every seeded stage.
        cfg.synth.rng_seed = badhmp::Rng::derive(opts.seed, 1);
        cfg.split_seed = badhmp::Rng::derive(opts.seed, 2);
        cfg.subset_seed = badhmp::Rng::derive(opts.seed, 3);
        cfg.poison.rng_seed = badhmp::Rng::derive(opts.seed, 4);
        cfg.source_pick_seed = badhmp::Rng::derive(opts.seed, 5);
        cfg.train.rng_seed = badhmp::Rng::derive(opts.seed, 6);
        cfg.finetune.subset_seed = badhmp::Rng::derive(opts.seed, 7);
    }
    return cfg;
}

void add_common(CLI::App* cmd, CommonOpts& opts) {
    cmd->add_option("--config", opts.config_path, "JSON experiment config file");
    cmd->add_option("--out-dir", opts.out_dir, "output directory (overrides config)");
    cmd->add_option("--seed", opts.seed, "master seed overriding all stage seeds")
        ->each([&opts](const std::string&) { opts.seed_set = true; });
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"BadHMP backdoor attack on skeleton-based human motion prediction"};
    app.require_subcommand(1);

    CommonOpts opts;

    // generate
    auto* gen = app.add_subcommand("generate", "synthesize clean train/test datasets");
    add_common(gen, opts);
    int samples_per_action = -1;
    double noise_std = -1.0;
    gen->add_option("--samples-per-action", samples_per_action, "samples per action");
    gen->add_option("--noise-std", noise_std, "additive joint noise (mm)");

    // poison
    auto* poi = app.add_subcommand("poison", "poison the training set and the full test set");
    add_common(poi, opts);
    double ratio = -1.0;
    std::string source_id, trigger_limb;
    poi->add_option("--ratio", ratio, "injection ratio in [0,1]");
    poi->add_option("--source-id", source_id, "explicit source sample id");
    poi->add_option("--limb", trigger_limb, "trigger limb name");

    // train
    auto* trn = app.add_subcommand("train", "train a benign or victim model");
    add_common(trn, opts);
    bool on_poisoned = false, on_clean = false;
    int epochs = -1;
    trn->add_flag("--poisoned", on_poisoned, "train on the poisoned training set");
    trn->add_flag("--clean", on_clean, "train on the clean training set");
    trn->add_option("--epochs", epochs, "training epochs");

    // eval
    auto* evl = app.add_subcommand("eval", "evaluate a checkpoint on clean and poisoned test sets");
    add_common(evl, opts);
    std::string ckpt_path, report_stem = "report";
    evl->add_option("--checkpoint", ckpt_path, "model checkpoint path")->required();
    evl->add_option("--report-stem", report_stem, "basename for report files");

    // sweep-ratio
    auto* swp = app.add_subcommand("sweep-ratio", "train one victim per injection ratio");
    add_common(swp, opts);
    std::vector<double> ratios = {0.02, 0.05, 0.08, 0.10, 0.15};
    swp->add_option("--ratios", ratios, "injection ratios");

    // finetune
    auto* fin = app.add_subcommand("finetune", "fine-tuning defense on retained clean data");
    add_common(fin, opts);
    std::string fin_ckpt;
    fin->add_option("--checkpoint", fin_ckpt, "victim checkpoint path")->required();

    // render
    auto* ren = app.add_subcommand("render", "render a sample as an SVG skeleton strip");
    add_common(ren, opts);
    std::string dataset_path, sample_id, overlay_id, svg_out = "render.svg";
    int strip_frames = 15;
    ren->add_option("--dataset", dataset_path, "dataset file")->required();
    ren->add_option("--id", sample_id, "sample id")->required();
    ren->add_option("--overlay", overlay_id, "overlay sample id (drawn dashed)");
    ren->add_option("--svg", svg_out, "output SVG path");
    ren->add_option("--frames", strip_frames, "strip frame count");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kExitOk : kExitUsage;
    }

    try {
        badhmp::ExperimentConfig cfg = make_config(opts);

        if (gen->parsed()) {
            if (samples_per_action == 0) throw badhmp::UsageError("--samples-per-action must be > 0");
            if (samples_per_action > 0) cfg.synth.samples_per_action = samples_per_action;
            if (noise_std >= 0.0) cfg.synth.noise_std_mm = noise_std;
            badhmp::cmd_generate(cfg);
        } else if (poi->parsed()) {
            if (ratio >= 0.0) cfg.poison.injection_ratio = ratio;
            if (!source_id.empty()) cfg.poison.source_sample_id = source_id;
            if (!trigger_limb.empty()) cfg.poison.trigger_limb = trigger_limb;
            badhmp::cmd_poison(cfg);
        } else if (trn->parsed()) {
            if (on_poisoned == on_clean)
                throw badhmp::UsageError("pass exactly one of --poisoned / --clean");
            if (epochs >= 0) cfg.train.epochs = epochs;
            badhmp::cmd_train(cfg, on_poisoned);
        } else if (evl->parsed()) {
            badhmp::cmd_eval(cfg, ckpt_path, report_stem);
        } else if (swp->parsed()) {
            badhmp::cmd_sweep_ratio(cfg, ratios);
        } else if (fin->parsed()) {
            badhmp::cmd_finetune(cfg, fin_ckpt);
        } else if (ren->parsed()) {
            badhmp::cmd_render(cfg, dataset_path, sample_id, overlay_id, svg_out, strip_frames);
        }
    } catch (const badhmp::UsageError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const badhmp::DivergenceError& e) {
        std::cerr << "numeric error: " << e.what() << "\n";
        return kExitNumeric;
    } catch (const badhmp::Error& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return kExitData;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitData;
    }
    return kExitOk;
}
