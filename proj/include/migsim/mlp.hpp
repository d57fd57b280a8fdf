// Copyright 2026 the migsim authors. Licensed under the terms of the Apache 2.0 license.
#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "migsim/errors.hpp"
#include "migsim/rng.hpp"

namespace migsim {

// One labelled example. For classifier models the target is a one-hot
// vector over the output classes; for scorer models it is a single 0/1.
struct MlpSample {
    std::vector<double> features;
    std::vector<double> target;
};

// How a daily batch is applied to a model.
struct TrainParams {
    size_t epochs = 5;
    double learning_rate = 0.05;
    double weight_decay = 0.0;
};

inline std::vector<double> one_hot(size_t index, size_t n) {
    std::vector<double> v(n, 0.0);
    v.at(index) = 1.0;
    return v;
}

// Feed-forward network with logistic-sigmoid hidden layers and either a
// softmax head (classifier) or a single sigmoid output (scorer). Trained by
// full-batch gradient descent on cross-entropy; small enough that anything
// fancier would be noise. Weights are plain doubles so models copy freely.
class MlpModel {
public:
    enum class Mode { Classifier, Scorer };

    MlpModel() = default;

    MlpModel(std::vector<size_t> layer_sizes, Mode mode, uint64_t seed)
        : sizes_(std::move(layer_sizes)), mode_(mode) {
        if (sizes_.size() < 2)
            throw DimensionError("MlpModel needs at least input and output layers");
        for (size_t s : sizes_)
            if (s == 0) throw DimensionError("MlpModel layer size must be positive");
        if (mode_ == Mode::Scorer && sizes_.back() != 1)
            throw DimensionError("scorer model must have exactly one output");
        Rng rng(seed);
        weights_.resize(sizes_.size() - 1);
        biases_.resize(sizes_.size() - 1);
        for (size_t l = 0; l + 1 < sizes_.size(); ++l) {
            size_t n_in = sizes_[l], n_out = sizes_[l + 1];
            // Xavier-uniform keeps early sigmoid activations away from the
            // saturated tails.
            double limit = std::sqrt(6.0 / double(n_in + n_out));
            weights_[l].resize(n_in * n_out);
            for (double& w : weights_[l]) w = rng.uniform(-limit, limit);
            biases_[l].assign(n_out, 0.0);
        }
    }

    size_t input_size() const { return sizes_.front(); }
    size_t output_size() const { return sizes_.back(); }
    Mode mode() const { return mode_; }
    const std::vector<size_t>& layer_sizes() const { return sizes_; }

    // Output activations: softmax distribution (classifier) or a single
    // sigmoid score (scorer).
    std::vector<double> predict(const std::vector<double>& features) const {
        check_features(features);
        std::vector<std::vector<double>> acts;
        forward(features, acts);
        return acts.back();
    }

    // Plain stochastic gradient descent: `epochs` in-order passes over the
    // batch, one update per sample. Continues from the current weights;
    // never reinitializes.
    void train(const std::vector<MlpSample>& batch, size_t epochs, double learning_rate,
               double weight_decay = 0.0) {
        if (batch.empty()) throw DimensionError("training batch is empty");
        for (const auto& s : batch) {
            check_features(s.features);
            if (s.target.size() != sizes_.back())
                throw DimensionError("target size " + std::to_string(s.target.size()) +
                                     " != output size " + std::to_string(sizes_.back()));
        }
        size_t n_layers = sizes_.size() - 1;
        std::vector<std::vector<double>> grad_w(n_layers), grad_b(n_layers);
        for (size_t epoch = 0; epoch < epochs; ++epoch) {
            for (const auto& s : batch) {
                for (size_t l = 0; l < n_layers; ++l) {
                    grad_w[l].assign(weights_[l].size(), 0.0);
                    grad_b[l].assign(biases_[l].size(), 0.0);
                }
                accumulate_gradient(s, grad_w, grad_b);
                for (size_t l = 0; l < n_layers; ++l) {
                    for (size_t i = 0; i < weights_[l].size(); ++i)
                        weights_[l][i] -=
                            learning_rate * (grad_w[l][i] + weight_decay * weights_[l][i]);
                    for (size_t i = 0; i < biases_[l].size(); ++i)
                        biases_[l][i] -= learning_rate * grad_b[l][i];
                }
            }
        }
    }

    // Mean cross-entropy over the batch.
    double loss(const std::vector<MlpSample>& batch) const {
        if (batch.empty()) throw DimensionError("loss batch is empty");
        double total = 0.0;
        for (const auto& s : batch) total += sample_loss(predict(s.features), s.target);
        return total / double(batch.size());
    }

    // Compares the backpropagated gradient for one sample against central
    // finite differences over every parameter; returns the worst relative
    // discrepancy. The model itself is left untouched.
    double gradient_check(const MlpSample& sample) const {
        size_t n_layers = sizes_.size() - 1;
        std::vector<std::vector<double>> grad_w(n_layers), grad_b(n_layers);
        for (size_t l = 0; l < n_layers; ++l) {
            grad_w[l].assign(weights_[l].size(), 0.0);
            grad_b[l].assign(biases_[l].size(), 0.0);
        }
        accumulate_gradient(sample, grad_w, grad_b);

        MlpModel probe = *this;
        const double step = 1e-5;
        double worst = 0.0;
        auto check_param = [&](double& param, double analytic) {
            double saved = param;
            param = saved + step;
            double up = probe.sample_loss(probe.predict(sample.features), sample.target);
            param = saved - step;
            double down = probe.sample_loss(probe.predict(sample.features), sample.target);
            param = saved;
            double numeric = (up - down) / (2.0 * step);
            double denom = std::max({std::fabs(analytic), std::fabs(numeric), 1e-6});
            worst = std::max(worst, std::fabs(analytic - numeric) / denom);
        };
        for (size_t l = 0; l < n_layers; ++l) {
            for (size_t i = 0; i < probe.weights_[l].size(); ++i)
                check_param(probe.weights_[l][i], grad_w[l][i]);
            for (size_t i = 0; i < probe.biases_[l].size(); ++i)
                check_param(probe.biases_[l][i], grad_b[l][i]);
        }
        return worst;
    }

    // Lossless checkpoint: nlohmann emits shortest-round-trip doubles.
    nlohmann::ordered_json to_json() const {
        nlohmann::ordered_json j;
        j["layer_sizes"] = sizes_;
        j["mode"] = mode_ == Mode::Classifier ? "classifier" : "scorer";
        j["weights"] = weights_;
        j["biases"] = biases_;
        return j;
    }

    static MlpModel from_json(const nlohmann::ordered_json& j) {
        MlpModel m;
        m.sizes_ = j.at("layer_sizes").get<std::vector<size_t>>();
        std::string mode = j.at("mode").get<std::string>();
        if (mode == "classifier") m.mode_ = Mode::Classifier;
        else if (mode == "scorer") m.mode_ = Mode::Scorer;
        else throw ParseError("unknown model mode '" + mode + "'");
        m.weights_ = j.at("weights").get<std::vector<std::vector<double>>>();
        m.biases_ = j.at("biases").get<std::vector<std::vector<double>>>();
        if (m.sizes_.size() < 2 || m.weights_.size() != m.sizes_.size() - 1 ||
            m.biases_.size() != m.sizes_.size() - 1)
            throw ParseError("model checkpoint has inconsistent layer counts");
        for (size_t l = 0; l + 1 < m.sizes_.size(); ++l)
            if (m.weights_[l].size() != m.sizes_[l] * m.sizes_[l + 1] ||
                m.biases_[l].size() != m.sizes_[l + 1])
                throw ParseError("model checkpoint has inconsistent parameter shapes");
        return m;
    }

    bool operator==(const MlpModel& o) const {
        return sizes_ == o.sizes_ && mode_ == o.mode_ && weights_ == o.weights_ &&
               biases_ == o.biases_;
    }

private:
    static double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

    void check_features(const std::vector<double>& features) const {
        if (features.size() != sizes_.front())
            throw DimensionError("feature size " + std::to_string(features.size()) +
                                 " != input size " + std::to_string(sizes_.front()));
        for (double f : features)
            if (!std::isfinite(f)) throw std::invalid_argument("non-finite feature value");
    }

    // acts[0] is the input; acts.back() the head output.
    void forward(const std::vector<double>& input,
                 std::vector<std::vector<double>>& acts) const {
        acts.clear();
        acts.push_back(input);
        for (size_t l = 0; l + 1 < sizes_.size(); ++l) {
            size_t n_in = sizes_[l], n_out = sizes_[l + 1];
            std::vector<double> z(n_out);
            for (size_t o = 0; o < n_out; ++o) {
                double sum = biases_[l][o];
                const double* w = &weights_[l][o * n_in];
                for (size_t i = 0; i < n_in; ++i) sum += w[i] * acts.back()[i];
                z[o] = sum;
            }
            bool last = (l + 2 == sizes_.size());
            if (!last || mode_ == Mode::Scorer) {
                for (double& v : z) v = sigmoid(v);
            } else {
                double zmax = z[0];
                for (double v : z) zmax = std::max(zmax, v);
                double denom = 0.0;
                for (double& v : z) {
                    v = std::exp(v - zmax);
                    denom += v;
                }
                for (double& v : z) v /= denom;
            }
            acts.push_back(std::move(z));
        }
    }

    double sample_loss(const std::vector<double>& output,
                       const std::vector<double>& target) const {
        const double eps = 1e-12;
        double loss = 0.0;
        if (mode_ == Mode::Classifier) {
            for (size_t i = 0; i < output.size(); ++i)
                loss -= target[i] * std::log(std::max(output[i], eps));
        } else {
            double p = output[0], y = target[0];
            loss = -y * std::log(std::max(p, eps)) -
                   (1.0 - y) * std::log(std::max(1.0 - p, eps));
        }
        return loss;
    }

    // Adds this sample's cross-entropy gradient into grad_w/grad_b. Both
    // heads (softmax + CE, sigmoid + binary CE) share the same convenient
    // output delta: prediction minus target.
    void accumulate_gradient(const MlpSample& s, std::vector<std::vector<double>>& grad_w,
                             std::vector<std::vector<double>>& grad_b) const {
        std::vector<std::vector<double>> acts;
        forward(s.features, acts);
        size_t n_layers = sizes_.size() - 1;
        std::vector<double> delta(sizes_.back());
        for (size_t i = 0; i < delta.size(); ++i) delta[i] = acts.back()[i] - s.target[i];
        for (size_t l = n_layers; l-- > 0;) {
            size_t n_in = sizes_[l], n_out = sizes_[l + 1];
            for (size_t o = 0; o < n_out; ++o) {
                grad_b[l][o] += delta[o];
                double* gw = &grad_w[l][o * n_in];
                for (size_t i = 0; i < n_in; ++i) gw[i] += delta[o] * acts[l][i];
            }
            if (l == 0) break;
            std::vector<double> prev(n_in, 0.0);
            for (size_t i = 0; i < n_in; ++i) {
                double sum = 0.0;
                for (size_t o = 0; o < n_out; ++o) sum += weights_[l][o * n_in + i] * delta[o];
                double a = acts[l][i];
                prev[i] = sum * a * (1.0 - a);
            }
            delta = std::move(prev);
        }
    }

    std::vector<size_t> sizes_;
    Mode mode_ = Mode::Classifier;
    std::vector<std::vector<double>> weights_;
    std::vector<std::vector<double>> biases_;
};

} // namespace migsim
