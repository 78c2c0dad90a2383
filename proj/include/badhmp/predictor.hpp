#pragma once

#include <Eigen/Core>
#include <cmath>
#include <cstdint>
#include <future>
#include <string>
#include <thread>
#include <vector>

#if defined(__GLIBC__)
#include <malloc.h>
#endif

#include "badhmp/data.hpp"
#include "badhmp/dct.hpp"
#include "badhmp/metrics.hpp"
#include "badhmp/rng.hpp"
#include "badhmp/types.hpp"

namespace badhmp {

struct PredictorConfig {
    int k_joints = 17;
    int n_history = 50;
    int t_future = 25;
    int dct_coefficients = 20;      // C
    std::vector<int> hidden = {64}; // graph-conv feature widths between C and C
    double adjacency_noise_std = 1e-3;
    double coord_scale = 1e-3; // mm -> internal units before the network

    int total_frames() const { return n_history + t_future; }
    int graph_nodes() const { return k_joints * 3; } // one node per coordinate

    // Feature widths per layer: [C, hidden..., C].
    std::vector<int> layer_widths() const {
        std::vector<int> w;
        w.push_back(dct_coefficients);
        for (int h : hidden) w.push_back(h);
        w.push_back(dct_coefficients);
        return w;
    }
};

// One graph-convolution layer computing A * H * W + 1 b^T over G nodes.
struct GcLayer {
    Eigen::MatrixXd adjacency; // G x G, learnable
    Eigen::MatrixXd weights;   // F_in x F_out
    Eigen::VectorXd bias;      // F_out
};

struct ModelParams {
    PredictorConfig config;
    std::vector<GcLayer> layers;

    bool all_finite() const {
        for (const auto& l : layers)
            if (!l.adjacency.allFinite() || !l.weights.allFinite() || !l.bias.allFinite())
                return false;
        return true;
    }
};

struct TrainConfig {
    int epochs = 50;
    int batch_size = 256;
    double learning_rate = 0.01;
    double lr_decay = 0.96;
    int lr_decay_every = 2;
    int lr_epoch_offset = 0; // fine-tuning continues the schedule from here
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;
    std::uint64_t rng_seed = 1;

    double lr_at_epoch(int epoch) const {
        return learning_rate * std::pow(lr_decay, (epoch + lr_epoch_offset) / lr_decay_every);
    }
};

// Weights uniform in +-1/sqrt(fan_in); adjacency identity plus small seeded
// noise; biases zero.
inline ModelParams init_params(const PredictorConfig& config, std::uint64_t seed) {
    ModelParams params;
    params.config = config;
    const int g = config.graph_nodes();
    const std::vector<int> widths = config.layer_widths();
    Rng rng(Rng::derive(seed, 301));
    for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
        GcLayer layer;
        layer.adjacency = Eigen::MatrixXd::Identity(g, g);
        if (config.adjacency_noise_std > 0.0)
            for (int r = 0; r < g; ++r)
                for (int c = 0; c < g; ++c)
                    layer.adjacency(r, c) += rng.normal(0.0, config.adjacency_noise_std);
        const int fan_in = widths[l];
        const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
        layer.weights.resize(widths[l], widths[l + 1]);
        for (int r = 0; r < layer.weights.rows(); ++r)
            for (int c = 0; c < layer.weights.cols(); ++c)
                layer.weights(r, c) = rng.uniform(-bound, bound);
        layer.bias = Eigen::VectorXd::Zero(widths[l + 1]);
        params.layers.push_back(std::move(layer));
    }
    return params;
}

namespace detail {

// The training loop allocates and frees many ~100 KB Eigen temporaries per
// step; with glibc's default dynamic thresholds these round-trip through
// mmap/munmap and cost more system time than the math. Pin large thresholds
// once so the blocks stay on the heap.
inline void tune_allocator_once() {
#if defined(__GLIBC__)
    static const bool done = [] {
        mallopt(M_MMAP_THRESHOLD, 256 << 20);
        mallopt(M_TRIM_THRESHOLD, 256 << 20);
        return true;
    }();
    (void)done;
#endif
}

// Sample as an M x G matrix: rows are frames, columns are (joint, coord)
// nodes with node index j*3 + c. Values in millimeters.
inline Eigen::MatrixXd to_node_matrix(const MotionSequence& seq, const PredictorConfig& cfg) {
    if (seq.frames.empty() || seq.frames.front().joint_count() != cfg.k_joints)
        throw DimensionError("to_node_matrix: joint count mismatch");
    const int m = seq.total_frames();
    Eigen::MatrixXd x(m, cfg.graph_nodes());
    for (int n = 0; n < m; ++n)
        for (int j = 0; j < cfg.k_joints; ++j)
            for (int c = 0; c < 3; ++c) x(n, j * 3 + c) = seq.frame(n).positions(j, c);
    return x;
}

// History padded by repeating the last observed frame T times.
inline Eigen::MatrixXd pad_history_matrix(const Eigen::MatrixXd& x, int n_history, int t_future) {
    Eigen::MatrixXd padded(n_history + t_future, x.cols());
    padded.topRows(n_history) = x.topRows(n_history);
    for (int n = 0; n < t_future; ++n) padded.row(n_history + n) = x.row(n_history - 1);
    return padded;
}

struct ForwardCache {
    Eigen::MatrixXd h0;                   // G x C input coefficients
    std::vector<Eigen::MatrixXd> inputs;  // H_l per layer, G x F_in
    std::vector<Eigen::MatrixXd> activ;   // tanh(Z_l) for hidden layers
    Eigen::MatrixXd out_coeffs;           // G x C
};

// Graph-conv stack with residual coefficient prediction. Hidden layers use
// tanh; the last layer is linear and its output is added to the input
// coefficients.
inline Eigen::MatrixXd forward_coeffs(const ModelParams& params, const Eigen::MatrixXd& h0,
                                      ForwardCache* cache) {
    Eigen::MatrixXd h = h0;
    if (cache) {
        cache->h0 = h0;
        cache->inputs.clear();
        cache->activ.clear();
    }
    const std::size_t n_layers = params.layers.size();
    for (std::size_t l = 0; l < n_layers; ++l) {
        const GcLayer& layer = params.layers[l];
        if (cache) cache->inputs.push_back(h);
        Eigen::MatrixXd z = layer.adjacency * h * layer.weights;
        z.rowwise() += layer.bias.transpose();
        if (l + 1 < n_layers) {
            h = z.array().tanh().matrix();
            if (cache) cache->activ.push_back(h);
        } else {
            h = z + h0; // residual: the network predicts a coefficient correction
        }
    }
    if (cache) cache->out_coeffs = h;
    return h;
}

} // namespace detail

// Exposed for tests: appends T copies of the last history frame.
inline std::vector<Pose> pad_history(const std::vector<Pose>& history, int t_future) {
    if (history.empty()) throw RangeError("pad_history: empty history");
    std::vector<Pose> out = history;
    for (int n = 0; n < t_future; ++n) out.push_back(history.back());
    return out;
}

// Full forward pass: center on the history's last root position, scale,
// pad, per-node DCT, graph-conv stack, inverse DCT, un-center. Returns the
// last T frames as poses in millimeters.
inline std::vector<Pose> predict(const ModelParams& params, const DctBasis& basis,
                                 const MotionSequence& history) {
    const PredictorConfig& cfg = params.config;
    if (history.n_history != cfg.n_history)
        throw DimensionError("predict: history length mismatch");
    const Eigen::MatrixXd x_mm = detail::to_node_matrix(history, cfg);
    Eigen::RowVector3d center = x_mm.block<1, 3>(cfg.n_history - 1, 0); // root joint is node 0..2
    Eigen::MatrixXd x = x_mm;
    for (int j = 0; j < cfg.k_joints; ++j) x.middleCols<3>(j * 3).rowwise() -= center;
    x *= cfg.coord_scale;

    const Eigen::MatrixXd padded = detail::pad_history_matrix(x, cfg.n_history, cfg.t_future);
    const Eigen::MatrixXd h0 = basis.forward(padded).transpose(); // G x C
    const Eigen::MatrixXd out_coeffs = detail::forward_coeffs(params, h0, nullptr);
    Eigen::MatrixXd series = basis.inverse(out_coeffs.transpose()); // M x G

    series /= cfg.coord_scale;
    for (int j = 0; j < cfg.k_joints; ++j) series.middleCols<3>(j * 3).rowwise() += center;

    std::vector<Pose> out;
    out.reserve(static_cast<std::size_t>(cfg.t_future));
    for (int n = 0; n < cfg.t_future; ++n) {
        Pose pose;
        pose.positions.resize(cfg.k_joints, 3);
        for (int j = 0; j < cfg.k_joints; ++j)
            for (int c = 0; c < 3; ++c)
                pose.positions(j, c) = series(cfg.n_history + n, j * 3 + c);
        out.push_back(std::move(pose));
    }
    return out;
}

inline PredictorFn make_predictor(const ModelParams& params, const DctBasis& basis) {
    return [&params, &basis](const MotionSequence& seq) { return predict(params, basis, seq); };
}

struct Gradients {
    std::vector<GcLayer> layers; // same shapes as ModelParams::layers

    static Gradients zeros_like(const ModelParams& params) {
        Gradients g;
        for (const auto& l : params.layers) {
            GcLayer z;
            z.adjacency = Eigen::MatrixXd::Zero(l.adjacency.rows(), l.adjacency.cols());
            z.weights = Eigen::MatrixXd::Zero(l.weights.rows(), l.weights.cols());
            z.bias = Eigen::VectorXd::Zero(l.bias.size());
            g.layers.push_back(std::move(z));
        }
        return g;
    }

    void add(const Gradients& other) {
        for (std::size_t l = 0; l < layers.size(); ++l) {
            layers[l].adjacency += other.layers[l].adjacency;
            layers[l].weights += other.layers[l].weights;
            layers[l].bias += other.layers[l].bias;
        }
    }
};

namespace detail {

// Per-sample training inputs that do not change across epochs: the input
// coefficients and the (centered, scaled) future target rows.
struct CompiledSample {
    Eigen::MatrixXd h0;     // G x C
    Eigen::MatrixXd target; // T x G
};

inline CompiledSample compile_sample(const PredictorConfig& cfg, const DctBasis& basis,
                                     const MotionSequence& seq) {
    const Eigen::MatrixXd x_mm = to_node_matrix(seq, cfg);
    Eigen::RowVector3d center = x_mm.block<1, 3>(cfg.n_history - 1, 0);
    Eigen::MatrixXd x = x_mm;
    for (int j = 0; j < cfg.k_joints; ++j) x.middleCols<3>(j * 3).rowwise() -= center;
    x *= cfg.coord_scale;

    CompiledSample cs;
    cs.h0 = basis.forward(pad_history_matrix(x, cfg.n_history, cfg.t_future)).transpose();
    cs.target = x.bottomRows(cfg.t_future);
    return cs;
}

// Per-sample loss (Eq.-1-style mean squared per-joint error over the future
// window) and gradient contribution, both unscaled by batch size.
inline double sample_loss_and_grad(const ModelParams& params, const DctBasis& basis,
                                   const MotionSequence& seq, Gradients* grads) {
    const PredictorConfig& cfg = params.config;
    const Eigen::MatrixXd x_mm = to_node_matrix(seq, cfg);
    Eigen::RowVector3d center = x_mm.block<1, 3>(cfg.n_history - 1, 0);
    Eigen::MatrixXd x = x_mm;
    for (int j = 0; j < cfg.k_joints; ++j) x.middleCols<3>(j * 3).rowwise() -= center;
    x *= cfg.coord_scale;

    const Eigen::MatrixXd padded = pad_history_matrix(x, cfg.n_history, cfg.t_future);
    const Eigen::MatrixXd h0 = basis.forward(padded).transpose();

    ForwardCache cache;
    const Eigen::MatrixXd out_coeffs = forward_coeffs(params, h0, &cache);
    const Eigen::MatrixXd series = basis.inverse(out_coeffs.transpose()); // M x G, scaled units

    // Prediction error in millimeters on the future window.
    const double inv_scale = 1.0 / cfg.coord_scale;
    const Eigen::MatrixXd diff_mm =
        (series.bottomRows(cfg.t_future) - x.bottomRows(cfg.t_future)) * inv_scale;
    const double denom = static_cast<double>(cfg.k_joints) * static_cast<double>(cfg.t_future);
    const double loss = diff_mm.squaredNorm() / denom;

    if (!grads) return loss;

    // d loss / d series (scaled units), nonzero only on the future rows.
    Eigen::MatrixXd d_series = Eigen::MatrixXd::Zero(series.rows(), series.cols());
    d_series.bottomRows(cfg.t_future) = (2.0 / denom) * diff_mm * inv_scale;

    // series = B^T * coeffs^T  =>  d coeffs = (B * d_series)^T
    Eigen::MatrixXd d_h = basis.forward(d_series).transpose(); // G x C

    // Residual connection feeds d_h straight back to h0's gradient, which is
    // a function of the input only, so it is dropped after the layer loop.
    const Eigen::MatrixXd d_residual = d_h;
    const std::size_t n_layers = params.layers.size();
    for (std::size_t li = n_layers; li-- > 0;) {
        const GcLayer& layer = params.layers[li];
        Eigen::MatrixXd d_z;
        if (li + 1 == n_layers) {
            d_z = d_h; // linear output layer
        } else {
            const Eigen::MatrixXd& a = cache.activ[li];
            d_z = d_h.array() * (1.0 - a.array().square());
        }
        const Eigen::MatrixXd& h_in = cache.inputs[li];
        const Eigen::MatrixXd hw = h_in * layer.weights;
        grads->layers[li].adjacency += d_z * hw.transpose();
        grads->layers[li].weights += (layer.adjacency * h_in).transpose() * d_z;
        grads->layers[li].bias += d_z.colwise().sum().transpose();
        d_h = layer.adjacency.transpose() * d_z * layer.weights.transpose();
    }
    (void)d_residual;
    return loss;
}

// Layout shuffles between "wide" (G x S*F, sample i in column block i) and
// "tall" (S*G x F, sample i in row block i). Wide suits the shared-adjacency
// multiply, tall suits the shared-weight multiply.
inline void wide_to_tall(const Eigen::MatrixXd& wide, int g, int f, int s, Eigen::MatrixXd& tall) {
    tall.resize(static_cast<Eigen::Index>(s) * g, f);
    for (int i = 0; i < s; ++i) tall.middleRows(static_cast<Eigen::Index>(i) * g, g) = wide.middleCols(static_cast<Eigen::Index>(i) * f, f);
}

inline void tall_to_wide(const Eigen::MatrixXd& tall, int g, int f, int s, Eigen::MatrixXd& wide) {
    wide.resize(g, static_cast<Eigen::Index>(s) * f);
    for (int i = 0; i < s; ++i) wide.middleCols(static_cast<Eigen::Index>(i) * f, f) = tall.middleRows(static_cast<Eigen::Index>(i) * g, g);
}

// Loss and gradient contribution of a group of samples, computed with a few
// large matrix products instead of per-sample small ones. Mathematically
// identical (up to summation order) to summing sample_loss_and_grad over the
// group; neither loss nor gradients are scaled by the group size.
// basis_future is the bottom T rows of the inverse-DCT matrix (T x C).
inline double chunk_loss_and_grad(const ModelParams& params, const Eigen::MatrixXd& basis_future,
                                  const std::vector<const CompiledSample*>& chunk,
                                  Gradients& grads) {
    const PredictorConfig& cfg = params.config;
    const int g = cfg.graph_nodes();
    const int c = cfg.dct_coefficients;
    const int s = static_cast<int>(chunk.size());
    const std::size_t n_layers = params.layers.size();

    // Stack inputs: tall S*G x C and wide G x S*C views of the same data.
    Eigen::MatrixXd h0_tall(static_cast<Eigen::Index>(s) * g, c);
    Eigen::MatrixXd target_wide(cfg.t_future, static_cast<Eigen::Index>(s) * g);
    for (int i = 0; i < s; ++i) {
        h0_tall.middleRows(static_cast<Eigen::Index>(i) * g, g) = chunk[static_cast<std::size_t>(i)]->h0;
        target_wide.middleCols(static_cast<Eigen::Index>(i) * g, g) = chunk[static_cast<std::size_t>(i)]->target;
    }

    // Forward, caching what the backward pass needs.
    std::vector<Eigen::MatrixXd> in_tall(n_layers);  // H_l, S*G x F_in
    std::vector<Eigen::MatrixXd> ah_tall(n_layers);  // A*H_l, S*G x F_in
    std::vector<Eigen::MatrixXd> activ(n_layers);    // tanh(Z_l) for hidden layers
    Eigen::MatrixXd h = h0_tall, h_wide, ah_wide;
    for (std::size_t l = 0; l < n_layers; ++l) {
        const GcLayer& layer = params.layers[l];
        const int f_in = static_cast<int>(layer.weights.rows());
        in_tall[l] = h;
        tall_to_wide(h, g, f_in, s, h_wide);
        ah_wide.noalias() = layer.adjacency * h_wide;
        wide_to_tall(ah_wide, g, f_in, s, ah_tall[l]);
        Eigen::MatrixXd z = ah_tall[l] * layer.weights;
        z.rowwise() += layer.bias.transpose();
        if (l + 1 < n_layers) {
            h = z.array().tanh().matrix();
            activ[l] = h;
        } else {
            h = z + h0_tall; // residual coefficient correction
        }
    }

    // Loss head: future-window series error in millimeters.
    const double inv_scale = 1.0 / cfg.coord_scale;
    const double denom = static_cast<double>(cfg.k_joints) * static_cast<double>(cfg.t_future);
    Eigen::MatrixXd diff = basis_future * h.transpose() - target_wide; // T x S*G, scaled units
    const double loss = diff.squaredNorm() * inv_scale * inv_scale / denom;

    // d loss / d out_coeffs, then back through the stack.
    Eigen::MatrixXd d_h = (2.0 / denom * inv_scale * inv_scale) * (diff.transpose() * basis_future);
    Eigen::MatrixXd d_z, dz_wide, hw_wide, t_wide, t_tall;
    for (std::size_t li = n_layers; li-- > 0;) {
        const GcLayer& layer = params.layers[li];
        const int f_out = static_cast<int>(layer.weights.cols());
        if (li + 1 == n_layers)
            d_z = std::move(d_h);
        else
            d_z = d_h.array() * (1.0 - activ[li].array().square());
        grads.layers[li].weights.noalias() += ah_tall[li].transpose() * d_z;
        grads.layers[li].bias += d_z.colwise().sum().transpose();
        Eigen::MatrixXd hw_tall = in_tall[li] * layer.weights;
        tall_to_wide(hw_tall, g, f_out, s, hw_wide);
        tall_to_wide(d_z, g, f_out, s, dz_wide);
        grads.layers[li].adjacency.noalias() += dz_wide * hw_wide.transpose();
        if (li > 0) {
            t_wide.noalias() = layer.adjacency.transpose() * dz_wide;
            wide_to_tall(t_wide, g, f_out, s, t_tall);
            d_h.noalias() = t_tall * layer.weights.transpose();
        }
    }
    return loss;
}

// Fixed-chunk parallel loss/gradient over precompiled samples; the chunk
// results are summed in a fixed order so the outcome does not depend on the
// number of available cores. Returns the batch mean.
inline std::pair<double, Gradients> compiled_loss_and_grad(
    const ModelParams& params, const Eigen::MatrixXd& basis_future,
    const std::vector<const CompiledSample*>& batch) {
    if (batch.empty()) throw EmptyDatasetError("loss_and_grad: empty batch");
    constexpr std::size_t kChunks = 8;
    const std::size_t n = batch.size();
    const std::size_t per = (n + kChunks - 1) / kChunks;

    struct ChunkResult {
        double loss = 0.0;
        Gradients grads;
    };
    auto run_chunk = [&](std::size_t begin, std::size_t end) {
        ChunkResult r;
        r.grads = Gradients::zeros_like(params);
        const std::vector<const CompiledSample*> part(batch.begin() + static_cast<std::ptrdiff_t>(begin),
                                                      batch.begin() + static_cast<std::ptrdiff_t>(end));
        r.loss = chunk_loss_and_grad(params, basis_future, part, r.grads);
        return r;
    };

    // Chunk results are always combined in chunk order, so the serial and
    // threaded paths produce bit-identical sums.
    const bool serial = std::thread::hardware_concurrency() <= 1;
    double loss = 0.0;
    Gradients grads = Gradients::zeros_like(params);
    if (serial) {
        for (std::size_t chunk = 0; chunk * per < n; ++chunk) {
            ChunkResult r = run_chunk(chunk * per, std::min(n, chunk * per + per));
            loss += r.loss;
            grads.add(r.grads);
        }
    } else {
        std::vector<std::future<ChunkResult>> futures;
        for (std::size_t chunk = 0; chunk * per < n; ++chunk) {
            const std::size_t begin = chunk * per;
            const std::size_t end = std::min(n, begin + per);
            futures.push_back(std::async(std::launch::async,
                                         [&run_chunk, begin, end]() { return run_chunk(begin, end); }));
        }
        for (auto& f : futures) {
            ChunkResult r = f.get();
            loss += r.loss;
            grads.add(r.grads);
        }
    }
    const double inv_n = 1.0 / static_cast<double>(n);
    loss *= inv_n;
    for (auto& l : grads.layers) {
        l.adjacency *= inv_n;
        l.weights *= inv_n;
        l.bias *= inv_n;
    }
    return {loss, std::move(grads)};
}

} // namespace detail

// Mean loss over a batch and the exact gradient of the same shape as the
// parameters. The batch is processed in a fixed number of chunks summed in a
// fixed order, so results do not depend on available cores.
inline std::pair<double, Gradients> loss_and_grad(const ModelParams& params, const DctBasis& basis,
                                                  const std::vector<const MotionSequence*>& batch) {
    if (batch.empty()) throw EmptyDatasetError("loss_and_grad: empty batch");
    const Eigen::MatrixXd basis_future =
        basis.matrix().rightCols(params.config.t_future).transpose();
    std::vector<detail::CompiledSample> compiled;
    compiled.reserve(batch.size());
    for (const MotionSequence* seq : batch)
        compiled.push_back(detail::compile_sample(params.config, basis, *seq));
    std::vector<const detail::CompiledSample*> ptrs;
    ptrs.reserve(compiled.size());
    for (const auto& cs : compiled) ptrs.push_back(&cs);
    return detail::compiled_loss_and_grad(params, basis_future, ptrs);
}

struct TrainingHistory {
    std::vector<double> epoch_loss;
};

namespace detail {

struct AdamState {
    Gradients m;
    Gradients v;
    long step = 0;
};

inline void adam_update(ModelParams& params, const Gradients& grads, AdamState& state,
                        const TrainConfig& cfg, double lr) {
    ++state.step;
    const double bc1 = 1.0 - std::pow(cfg.adam_beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(cfg.adam_beta2, static_cast<double>(state.step));
    auto update = [&](Eigen::Ref<Eigen::MatrixXd> p, const Eigen::MatrixXd& g,
                      Eigen::Ref<Eigen::MatrixXd> m, Eigen::Ref<Eigen::MatrixXd> v) {
        m = cfg.adam_beta1 * m + (1.0 - cfg.adam_beta1) * g;
        v = cfg.adam_beta2 * v.array().matrix() + (1.0 - cfg.adam_beta2) * g.array().square().matrix();
        p.array() -= lr * (m.array() / bc1) / ((v.array() / bc2).sqrt() + cfg.adam_eps);
    };
    for (std::size_t l = 0; l < params.layers.size(); ++l) {
        update(params.layers[l].adjacency, grads.layers[l].adjacency, state.m.layers[l].adjacency,
               state.v.layers[l].adjacency);
        update(params.layers[l].weights, grads.layers[l].weights, state.m.layers[l].weights,
               state.v.layers[l].weights);
        Eigen::MatrixXd gb = grads.layers[l].bias;
        Eigen::Map<Eigen::MatrixXd> mb(state.m.layers[l].bias.data(), state.m.layers[l].bias.size(), 1);
        Eigen::Map<Eigen::MatrixXd> vb(state.v.layers[l].bias.data(), state.v.layers[l].bias.size(), 1);
        Eigen::Map<Eigen::MatrixXd> pb(params.layers[l].bias.data(), params.layers[l].bias.size(), 1);
        update(pb, gb, mb, vb);
    }
}

} // namespace detail

// Epoch/batch training loop with seeded shuffling, Adam, and step-decay lr.
inline std::pair<ModelParams, TrainingHistory> train(const Dataset& dataset,
                                                     const PredictorConfig& model_cfg,
                                                     const TrainConfig& cfg,
                                                     std::uint64_t init_seed,
                                                     ModelParams* start_from = nullptr) {
    if (dataset.empty()) throw EmptyDatasetError("train: empty dataset");
    detail::tune_allocator_once();
    ModelParams params = start_from ? *start_from : init_params(model_cfg, init_seed);
    const DctBasis basis(model_cfg.total_frames(), model_cfg.dct_coefficients);
    const Eigen::MatrixXd basis_future = basis.matrix().rightCols(model_cfg.t_future).transpose();

    // The per-sample network inputs and targets are epoch-invariant.
    std::vector<detail::CompiledSample> compiled;
    compiled.reserve(dataset.size());
    for (const auto& seq : dataset.samples)
        compiled.push_back(detail::compile_sample(model_cfg, basis, seq));

    detail::AdamState adam;
    adam.m = Gradients::zeros_like(params);
    adam.v = Gradients::zeros_like(params);

    TrainingHistory history;
    Rng shuffle_rng(Rng::derive(cfg.rng_seed, 302));
    std::vector<std::size_t> order(dataset.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        const double lr = cfg.lr_at_epoch(epoch);
        shuffle_rng.shuffle(order);
        double loss_sum = 0.0;
        std::size_t seen = 0;
        for (std::size_t start = 0; start < order.size();
             start += static_cast<std::size_t>(cfg.batch_size)) {
            const std::size_t end =
                std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
            std::vector<const detail::CompiledSample*> batch;
            batch.reserve(end - start);
            for (std::size_t i = start; i < end; ++i) batch.push_back(&compiled[order[i]]);
            auto [loss, grads] = detail::compiled_loss_and_grad(params, basis_future, batch);
            if (!std::isfinite(loss))
                throw DivergenceError("training diverged at epoch " + std::to_string(epoch));
            detail::adam_update(params, grads, adam, cfg, lr);
            loss_sum += loss * static_cast<double>(batch.size());
            seen += batch.size();
        }
        history.epoch_loss.push_back(loss_sum / static_cast<double>(seen));
        if (!params.all_finite())
            throw DivergenceError("parameters became non-finite at epoch " + std::to_string(epoch));
    }
    return {std::move(params), std::move(history)};
}

// Continues training on clean data only; the lr schedule picks up where the
// original run left off.
inline std::pair<ModelParams, TrainingHistory> fine_tune(const ModelParams& params,
                                                         const Dataset& clean_subset,
                                                         int epochs, const TrainConfig& base_cfg,
                                                         int completed_epochs) {
    TrainConfig cfg = base_cfg;
    cfg.epochs = epochs;
    cfg.lr_epoch_offset = completed_epochs;
    cfg.rng_seed = Rng::derive(base_cfg.rng_seed, 303);
    if (epochs == 0) return {params, TrainingHistory{}};
    ModelParams start = params;
    return train(clean_subset, params.config, cfg, 0, &start);
}

} // namespace badhmp
