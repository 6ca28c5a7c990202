#pragma once

#include "common.hpp"
#include "trees.hpp"

#include <json.hpp>

#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace cdpred {

/// Bias-free fully connected layer, weights are out_dim x in_dim.
struct DenseLayer {
    Matrix weights;

    Eigen::Index in_dim() const noexcept { return weights.cols(); }
    Eigen::Index out_dim() const noexcept { return weights.rows(); }
};

/// ReLU between layers, softmax over the final two units.
struct Network {
    std::vector<DenseLayer> layers;

    Eigen::Index input_dim() const { return layers.front().in_dim(); }

    void validate() const {
        if (layers.empty()) throw std::invalid_argument("Network: no layers");
        for (std::size_t l = 1; l < layers.size(); ++l)
            if (layers[l].in_dim() != layers[l - 1].out_dim()) throw std::invalid_argument("Network: layer dimensions do not chain");
        if (layers.back().out_dim() != 2) throw std::invalid_argument("Network: output layer must have 2 units");
    }
};

/// Input projection d_in -> 8, then 8 -> 4 and 4 -> 2, He-initialized from `rng`.
inline Network make_network(Eigen::Index input_dim, Rng& rng, std::vector<Eigen::Index> widths = {8, 4, 2}) {
    if (input_dim < 1) throw std::invalid_argument("make_network: input_dim must be >= 1");
    Network net;
    Eigen::Index in = input_dim;
    std::normal_distribution<double> normal(0.0, 1.0);
    for (Eigen::Index out : widths) {
        DenseLayer layer{Matrix(out, in)};
        const double scale = std::sqrt(2.0 / static_cast<double>(in));
        for (Eigen::Index j = 0; j < in; ++j)
            for (Eigen::Index i = 0; i < out; ++i) layer.weights(i, j) = scale * normal(rng);
        net.layers.push_back(std::move(layer));
        in = out;
    }
    net.validate();
    return net;
}

/// Activations of a batch: inputs[l] is what layer l consumed, pre[l] its pre-activation output.
struct ForwardPass {
    std::vector<Matrix> inputs;
    std::vector<Matrix> pre;
    Matrix probs;  // batch x 2

    Vector probabilities(Eigen::Index row = 0) const { return probs.row(row).transpose(); }
};

inline ForwardPass forward_batch(const Network& net, const Matrix& x) {
    if (x.cols() != net.input_dim())
        throw std::invalid_argument("forward: expected " + std::to_string(net.input_dim()) + " inputs, got " + std::to_string(x.cols()));
    if (!x.allFinite()) throw std::invalid_argument("forward: non-finite input");
    ForwardPass pass;
    pass.inputs.reserve(net.layers.size());
    pass.pre.reserve(net.layers.size());
    Matrix a = x;
    for (std::size_t l = 0; l < net.layers.size(); ++l) {
        Matrix z = a * net.layers[l].weights.transpose();
        pass.inputs.push_back(std::move(a));
        if (l + 1 < net.layers.size()) a = z.cwiseMax(0.0);
        pass.pre.push_back(std::move(z));
    }
    const Matrix& logits = pass.pre.back();
    pass.probs.resize(logits.rows(), logits.cols());
    for (Eigen::Index i = 0; i < logits.rows(); ++i) {
        const double m = logits.row(i).maxCoeff();
        const auto e = (logits.row(i).array() - m).exp();
        pass.probs.row(i) = e / e.sum();
    }
    return pass;
}

inline ForwardPass forward(const Network& net, const Vector& x) { return forward_batch(net, x.transpose()); }

/// Cross-entropy of each row of the last forward pass, via log-sum-exp.
inline std::vector<double> cross_entropy(const ForwardPass& pass, std::span<const int> y) {
    const Matrix& logits = pass.pre.back();
    std::vector<double> out(static_cast<std::size_t>(logits.rows()));
    for (Eigen::Index i = 0; i < logits.rows(); ++i) {
        const double m = logits.row(i).maxCoeff();
        const double lse = m + std::log((logits.row(i).array() - m).exp().sum());
        out[static_cast<std::size_t>(i)] = lse - logits(i, y[static_cast<std::size_t>(i)]);
    }
    return out;
}

inline double loss(const Network& net, const Vector& x, int y) {
    const int label[] = {y};
    return cross_entropy(forward(net, x), label)[0];
}

/// Summed (not averaged) cross-entropy gradients over the rows of `pass`; ReLU'(0) = 0.
inline std::vector<Matrix> backward_batch(const Network& net, const ForwardPass& pass, std::span<const int> y) {
    const Eigen::Index b = pass.probs.rows();
    if (static_cast<std::size_t>(b) != y.size()) throw std::invalid_argument("backward: label count mismatch");
    Matrix delta = pass.probs;
    for (Eigen::Index i = 0; i < b; ++i) {
        const int label = y[static_cast<std::size_t>(i)];
        if (label != 0 && label != 1) throw std::invalid_argument("backward: label must be 0 or 1");
        delta(i, label) -= 1.0;
    }
    std::vector<Matrix> grads(net.layers.size());
    for (std::size_t l = net.layers.size(); l-- > 0;) {
        grads[l] = delta.transpose() * pass.inputs[l];
        if (l == 0) break;
        Matrix back = delta * net.layers[l].weights;
        delta = back.array() * (pass.pre[l - 1].array() > 0.0).cast<double>();
    }
    return grads;
}

inline std::vector<Matrix> backward(const Network& net, const ForwardPass& pass, int y) {
    const int label[] = {y};
    return backward_batch(net, pass, label);
}

inline std::vector<Matrix> backward(const Network& net, const Vector& x, int y) { return backward(net, forward(net, x), y); }

struct ImportanceRescale {
    /// After column scaling, restore each layer's Frobenius norm (see train_xbnet).
    bool preserve_frobenius_norm = true;
};

struct TrainConfig {
    double learning_rate = 3e-4;
    std::size_t batch_size = 32;
    int epochs = 100;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;
    std::uint64_t seed = 0;
    bool boosted_updates = true;
    bool init_from_importance = false;
    ImportanceRescale rescale;
    BoostParams boost_params_per_layer = [] {
        BoostParams p;
        p.n_rounds = 10;
        return p;
    }();

    void validate() const {
        if (epochs < 1) throw std::invalid_argument("TrainConfig: epochs must be >= 1");
        if (batch_size < 1) throw std::invalid_argument("TrainConfig: batch_size must be >= 1");
        if (!(learning_rate > 0)) throw std::invalid_argument("TrainConfig: learning_rate must be > 0");
        if (!(adam_beta1 >= 0 && adam_beta1 < 1) || !(adam_beta2 >= 0 && adam_beta2 < 1) || !(adam_eps > 0))
            throw std::invalid_argument("TrainConfig: Adam betas must lie in [0, 1) and eps > 0");
        boost_params_per_layer.validate();
    }
};

struct AdamState {
    std::vector<Matrix> m;
    std::vector<Matrix> v;
    long step = 0;

    static AdamState for_network(const Network& net) {
        AdamState s;
        for (const auto& l : net.layers) {
            s.m.push_back(Matrix::Zero(l.out_dim(), l.in_dim()));
            s.v.push_back(Matrix::Zero(l.out_dim(), l.in_dim()));
        }
        return s;
    }
};

/// One bias-corrected Adam update of every layer.
inline void adam_step(Network& net, const std::vector<Matrix>& grads, AdamState& state, const TrainConfig& cfg) {
    if (grads.size() != net.layers.size() || state.m.size() != net.layers.size() || state.v.size() != net.layers.size())
        throw std::invalid_argument("adam_step: state/gradient layer count mismatch");
    ++state.step;
    const double c1 = 1.0 - std::pow(cfg.adam_beta1, static_cast<double>(state.step));
    const double c2 = 1.0 - std::pow(cfg.adam_beta2, static_cast<double>(state.step));
    for (std::size_t l = 0; l < net.layers.size(); ++l) {
        auto& w = net.layers[l].weights;
        if (grads[l].rows() != w.rows() || grads[l].cols() != w.cols() || state.m[l].rows() != w.rows() || state.m[l].cols() != w.cols())
            throw std::invalid_argument("adam_step: dimension mismatch");
        state.m[l] = cfg.adam_beta1 * state.m[l] + (1.0 - cfg.adam_beta1) * grads[l];
        state.v[l] = cfg.adam_beta2 * state.v[l] + (1.0 - cfg.adam_beta2) * grads[l].cwiseAbs2();
        w.array() -= cfg.learning_rate * (state.m[l].array() / c1) / ((state.v[l].array() / c2).sqrt() + cfg.adam_eps);
    }
}

/// Scales weight column j by in_dim * importance[j]. A zero vector (no splits) and a uniform
/// vector (multiplier exactly 1) both leave the weights untouched.
inline void apply_importance(Matrix& weights, std::span<const double> importance) {
    if (static_cast<Eigen::Index>(importance.size()) != weights.cols())
        throw std::invalid_argument("apply_importance: importance length must equal layer input dimension");
    const double total = std::accumulate(importance.begin(), importance.end(), 0.0);
    if (!(total > 0.0)) return;
    if (std::all_of(importance.begin(), importance.end(), [&](double v) { return v == importance[0]; })) return;
    const double d = static_cast<double>(weights.cols());
    for (Eigen::Index j = 0; j < weights.cols(); ++j) weights.col(j) *= d * importance[static_cast<std::size_t>(j)];
}

/// Normalized gain importance of a booster fit on (layer input, labels).
inline std::vector<double> layer_importance(const Matrix& layer_input, std::span<const int> y, const BoostParams& params) {
    BoostFitOptions opts;
    opts.record_history = false;
    return feature_importance(fit_booster(layer_input, y, params, opts));
}

struct BoostedUpdate {
    Network net;
    std::vector<std::vector<double>> importances;  // per layer
};

/// Refits a booster on every layer's cached inputs and rescales that layer's weight columns by
/// the resulting importances. `layer_inputs[l]` holds one row per training example.
inline BoostedUpdate boosted_update(const Network& net, const std::vector<Matrix>& layer_inputs, std::span<const int> y,
                                    const BoostParams& params) {
    if (layer_inputs.size() != net.layers.size()) throw std::invalid_argument("boosted_update: need one input matrix per layer");
    BoostedUpdate out{net, {}};
    for (std::size_t l = 0; l < net.layers.size(); ++l) {
        if (layer_inputs[l].cols() != net.layers[l].in_dim()) throw std::invalid_argument("boosted_update: layer input width mismatch");
        BoostParams p = params;
        p.seed = derive_seed(params.seed, l);
        auto imp = layer_importance(layer_inputs[l], y, p);
        apply_importance(out.net.layers[l].weights, imp);
        out.importances.push_back(std::move(imp));
    }
    return out;
}

/// z-scoring fitted on training rows; constant columns keep scale 1.
struct InputScaler {
    Vector mean;
    Vector scale;

    static InputScaler fit(const Matrix& x) {
        InputScaler s;
        s.mean = x.colwise().mean().transpose();
        const double denom = std::max<double>(1.0, static_cast<double>(x.rows() - 1));
        s.scale = ((x.rowwise() - s.mean.transpose()).colwise().squaredNorm().array() / denom).sqrt().matrix().transpose();
        for (Eigen::Index j = 0; j < s.scale.size(); ++j)
            if (!(s.scale(j) > 0)) s.scale(j) = 1.0;
        return s;
    }
    Matrix apply(const Matrix& x) const {
        if (x.cols() != mean.size()) throw std::invalid_argument("InputScaler: column-count mismatch");
        Matrix z = x.rowwise() - mean.transpose();
        z.array().rowwise() /= scale.transpose().array();
        return z;
    }
};

struct XbnetModel {
    InputScaler scaler;
    Network net;
    TrainConfig config;
    LearningCurve history;  // one entry per epoch
    std::vector<std::vector<double>> last_importances;
};

inline std::vector<double> predict_network(const XbnetModel& model, const Matrix& x) {
    const ForwardPass pass = forward_batch(model.net, model.scaler.apply(x));
    std::vector<double> p(static_cast<std::size_t>(pass.probs.rows()));
    for (Eigen::Index i = 0; i < pass.probs.rows(); ++i) p[static_cast<std::size_t>(i)] = pass.probs(i, 1);
    return p;
}

namespace detail {

inline void evaluate_epoch(const Network& net, const Matrix& z, std::span<const int> y, int epoch, const char* split,
                           double& logloss, double& acc) {
    const ForwardPass pass = forward_batch(net, z);
    const auto ce = cross_entropy(pass, y);
    logloss = std::accumulate(ce.begin(), ce.end(), 0.0) / static_cast<double>(ce.size());
    if (!std::isfinite(logloss))
        throw std::runtime_error("train_xbnet: non-finite " + std::string(split) + " loss at epoch " + std::to_string(epoch + 1));
    std::size_t hit = 0;
    for (Eigen::Index i = 0; i < pass.probs.rows(); ++i)
        hit += static_cast<int>(pass.probs(i, 1) >= 0.5) == y[static_cast<std::size_t>(i)];
    acc = static_cast<double>(hit) / static_cast<double>(ce.size());
}

}  // namespace detail

/// Minibatch Adam on cross-entropy; when `config.boosted_updates` is set, every epoch ends with
/// a boosted update over the inputs each layer saw during that epoch. With
/// `rescale.preserve_frobenius_norm`, each rescaled layer is brought back to its pre-update norm
/// so repeated importance scaling cannot compound geometrically across epochs.
inline XbnetModel train_xbnet(const Matrix& x_train, std::span<const int> y_train, const Matrix* x_val, std::span<const int> y_val,
                              const TrainConfig& config) {
    config.validate();
    const auto n = static_cast<std::size_t>(x_train.rows());
    if (y_train.size() != n) throw std::invalid_argument("train_xbnet: label count must equal row count");
    require_binary(y_train, "train_xbnet");
    if (!has_both_classes(y_train)) throw std::invalid_argument("train_xbnet: training labels contain a single class");
    if (!x_train.allFinite()) throw std::invalid_argument("train_xbnet: non-finite training input");
    if (x_val && (x_val->cols() != x_train.cols() || static_cast<std::size_t>(x_val->rows()) != y_val.size()))
        throw std::invalid_argument("train_xbnet: validation set shape mismatch");

    XbnetModel model;
    model.config = config;
    model.scaler = InputScaler::fit(x_train);
    const Matrix z = model.scaler.apply(x_train);
    const std::optional<Matrix> zval = x_val ? std::optional<Matrix>(model.scaler.apply(*x_val)) : std::nullopt;

    Rng rng(config.seed);
    model.net = make_network(z.cols(), rng);

    // The first layer always consumes z itself, so its booster (fixed seed) is fit once.
    std::optional<std::vector<double>> input_importance;
    auto first_layer_importance = [&]() -> const std::vector<double>& {
        if (!input_importance) {
            BoostParams p = config.boost_params_per_layer;
            p.seed = derive_seed(config.boost_params_per_layer.seed, 0);
            input_importance = layer_importance(z, y_train, p);
        }
        return *input_importance;
    };
    if (config.init_from_importance) apply_importance(model.net.layers[0].weights, first_layer_importance());

    AdamState adam = AdamState::for_network(model.net);
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::vector<Matrix> cache;
    std::vector<int> batch_labels;

    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        if (config.boosted_updates) {
            cache.clear();
            for (const auto& l : model.net.layers) cache.emplace_back(static_cast<Eigen::Index>(n), l.in_dim());
        }
        for (std::size_t start = 0; start < n; start += config.batch_size) {
            const std::size_t stop = std::min(n, start + config.batch_size);
            const std::span<const std::size_t> idx(order.data() + start, stop - start);
            const Matrix xb = take_rows(z, idx);
            batch_labels.assign(idx.size(), 0);
            for (std::size_t k = 0; k < idx.size(); ++k) batch_labels[k] = y_train[idx[k]];
            const ForwardPass pass = forward_batch(model.net, xb);
            if (config.boosted_updates)
                for (std::size_t l = 1; l < cache.size(); ++l)
                    for (std::size_t k = 0; k < idx.size(); ++k)
                        cache[l].row(static_cast<Eigen::Index>(idx[k])) = pass.inputs[l].row(static_cast<Eigen::Index>(k));
            auto grads = backward_batch(model.net, pass, batch_labels);
            for (auto& g : grads) g /= static_cast<double>(idx.size());
            adam_step(model.net, grads, adam, config);
        }

        if (config.boosted_updates) {
            model.last_importances.assign(model.net.layers.size(), {});
            for (std::size_t l = 0; l < model.net.layers.size(); ++l) {
                BoostParams p = config.boost_params_per_layer;
                p.seed = derive_seed(config.boost_params_per_layer.seed, l);
                model.last_importances[l] = l == 0 ? first_layer_importance() : layer_importance(cache[l], y_train, p);
                Matrix& w = model.net.layers[l].weights;
                const double before = w.norm();
                apply_importance(w, model.last_importances[l]);
                if (config.rescale.preserve_frobenius_norm) {
                    const double after = w.norm();
                    if (after > 0 && after != before) w *= before / after;
                }
            }
        }

        for (std::size_t l = 0; l < model.net.layers.size(); ++l)
            if (!model.net.layers[l].weights.allFinite())
                throw std::runtime_error("train_xbnet: non-finite weights in layer " + std::to_string(l) + " at epoch " +
                                         std::to_string(epoch + 1));
        double tl = 0, ta = 0;
        detail::evaluate_epoch(model.net, z, y_train, epoch, "training", tl, ta);
        model.history.push(tl, ta);
        if (zval) {
            double vl = 0, va = 0;
            detail::evaluate_epoch(model.net, *zval, y_val, epoch, "validation", vl, va);
            model.history.push_validation(vl, va);
        }
    }
    return model;
}

/// Same loop as train_xbnet with the boosted updates switched off.
inline XbnetModel train_mlp(const Matrix& x_train, std::span<const int> y_train, const Matrix* x_val, std::span<const int> y_val,
                            TrainConfig config) {
    config.boosted_updates = false;
    config.init_from_importance = false;
    return train_xbnet(x_train, y_train, x_val, y_val, config);
}

inline nlohmann::json to_json(const TrainConfig& c) {
    return {{"learning_rate", c.learning_rate},
            {"batch_size", c.batch_size},
            {"epochs", c.epochs},
            {"adam_beta1", c.adam_beta1},
            {"adam_beta2", c.adam_beta2},
            {"adam_eps", c.adam_eps},
            {"seed", c.seed},
            {"boosted_updates", c.boosted_updates},
            {"init_from_importance", c.init_from_importance},
            {"preserve_frobenius_norm", c.rescale.preserve_frobenius_norm},
            {"importance_booster", to_json(c.boost_params_per_layer)}};
}

inline nlohmann::json to_json(const XbnetModel& m) {
    auto vec = [](const Vector& v) { return std::vector<double>(v.data(), v.data() + v.size()); };
    nlohmann::json layers = nlohmann::json::array();
    for (const auto& l : m.net.layers) {
        std::vector<double> w;
        w.reserve(static_cast<std::size_t>(l.weights.size()));
        for (Eigen::Index i = 0; i < l.weights.rows(); ++i)
            for (Eigen::Index j = 0; j < l.weights.cols(); ++j) w.push_back(l.weights(i, j));
        layers.push_back({{"in_dim", l.in_dim()}, {"out_dim", l.out_dim()}, {"weights_row_major", w}});
    }
    return {{"format", "cdpred.network"},
            {"layers", layers},
            {"scaler", {{"mean", vec(m.scaler.mean)}, {"scale", vec(m.scaler.scale)}}},
            {"config", to_json(m.config)}};
}

inline XbnetModel network_from_json(const nlohmann::json& j) {
    if (j.value("format", "") != "cdpred.network") throw std::invalid_argument("network_from_json: not a network model");
    XbnetModel m;
    for (const auto& jl : j.at("layers")) {
        const auto in = jl.at("in_dim").get<Eigen::Index>(), out = jl.at("out_dim").get<Eigen::Index>();
        const auto w = jl.at("weights_row_major").get<std::vector<double>>();
        if (static_cast<Eigen::Index>(w.size()) != in * out) throw std::invalid_argument("network_from_json: weight count mismatch");
        m.net.layers.push_back({Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(w.data(), out, in)});
    }
    m.net.validate();
    const auto mean = j.at("scaler").at("mean").get<std::vector<double>>();
    const auto scale = j.at("scaler").at("scale").get<std::vector<double>>();
    if (static_cast<Eigen::Index>(mean.size()) != m.net.input_dim() || scale.size() != mean.size())
        throw std::invalid_argument("network_from_json: scaler width mismatch");
    m.scaler.mean = Eigen::Map<const Vector>(mean.data(), static_cast<Eigen::Index>(mean.size()));
    m.scaler.scale = Eigen::Map<const Vector>(scale.data(), static_cast<Eigen::Index>(scale.size()));
    return m;
}

}  // namespace cdpred
