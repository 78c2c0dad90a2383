#pragma once

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "badhmp/predictor.hpp"

namespace badhmp {

namespace io_detail {

inline nlohmann::json matrix_to_json(const Eigen::MatrixXd& m) {
    nlohmann::json rows = nlohmann::json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        nlohmann::json row = nlohmann::json::array();
        for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
        rows.push_back(std::move(row));
    }
    return rows;
}

inline Eigen::MatrixXd matrix_from_json(const nlohmann::json& j) {
    const Eigen::Index rows = static_cast<Eigen::Index>(j.size());
    const Eigen::Index cols = rows > 0 ? static_cast<Eigen::Index>(j.at(0).size()) : 0;
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r)
        for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = j.at(r).at(c).get<double>();
    return m;
}

} // namespace io_detail

// Versioned JSON checkpoint: predictor config, all parameter tensors in layer
// order, and the per-epoch training loss trace.
inline void save_checkpoint(const ModelParams& params, const TrainingHistory& history,
                            const TrainConfig& train_cfg, const std::filesystem::path& path) {
    nlohmann::json j;
    j["schema_version"] = 1;
    const PredictorConfig& cfg = params.config;
    j["config"] = {{"k_joints", cfg.k_joints},
                   {"n_history", cfg.n_history},
                   {"t_future", cfg.t_future},
                   {"dct_coefficients", cfg.dct_coefficients},
                   {"hidden", cfg.hidden},
                   {"adjacency_noise_std", cfg.adjacency_noise_std},
                   {"coord_scale", cfg.coord_scale}};
    j["train"] = {{"epochs", train_cfg.epochs},
                  {"batch_size", train_cfg.batch_size},
                  {"learning_rate", train_cfg.learning_rate},
                  {"lr_decay", train_cfg.lr_decay},
                  {"lr_decay_every", train_cfg.lr_decay_every},
                  {"rng_seed", train_cfg.rng_seed}};
    nlohmann::json layers = nlohmann::json::array();
    for (const auto& l : params.layers) {
        nlohmann::json lj;
        lj["adjacency"] = io_detail::matrix_to_json(l.adjacency);
        lj["weights"] = io_detail::matrix_to_json(l.weights);
        lj["bias"] = std::vector<double>(l.bias.data(), l.bias.data() + l.bias.size());
        layers.push_back(std::move(lj));
    }
    j["layers"] = std::move(layers);
    j["history"] = history.epoch_loss;

    std::ofstream out(path);
    if (!out) throw ParseError("cannot open for writing: " + path.string());
    out << j.dump(2) << "\n";
}

struct Checkpoint {
    ModelParams params;
    TrainingHistory history;
    TrainConfig train_cfg;
};

inline Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open: " + path.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(path.string() + ": " + e.what());
    }
    Checkpoint ckpt;
    try {
        const auto& cj = j.at("config");
        PredictorConfig& cfg = ckpt.params.config;
        cfg.k_joints = cj.at("k_joints").get<int>();
        cfg.n_history = cj.at("n_history").get<int>();
        cfg.t_future = cj.at("t_future").get<int>();
        cfg.dct_coefficients = cj.at("dct_coefficients").get<int>();
        cfg.hidden = cj.at("hidden").get<std::vector<int>>();
        cfg.adjacency_noise_std = cj.at("adjacency_noise_std").get<double>();
        cfg.coord_scale = cj.at("coord_scale").get<double>();
        const auto& tj = j.at("train");
        ckpt.train_cfg.epochs = tj.at("epochs").get<int>();
        ckpt.train_cfg.batch_size = tj.at("batch_size").get<int>();
        ckpt.train_cfg.learning_rate = tj.at("learning_rate").get<double>();
        ckpt.train_cfg.lr_decay = tj.at("lr_decay").get<double>();
        ckpt.train_cfg.lr_decay_every = tj.at("lr_decay_every").get<int>();
        ckpt.train_cfg.rng_seed = tj.at("rng_seed").get<std::uint64_t>();
        for (const auto& lj : j.at("layers")) {
            GcLayer layer;
            layer.adjacency = io_detail::matrix_from_json(lj.at("adjacency"));
            layer.weights = io_detail::matrix_from_json(lj.at("weights"));
            const auto bias = lj.at("bias").get<std::vector<double>>();
            layer.bias = Eigen::Map<const Eigen::VectorXd>(bias.data(),
                                                           static_cast<Eigen::Index>(bias.size()));
            ckpt.params.layers.push_back(std::move(layer));
        }
        ckpt.history.epoch_loss = j.at("history").get<std::vector<double>>();
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(path.string() + ": bad checkpoint: " + e.what());
    }
    return ckpt;
}

} // namespace badhmp
