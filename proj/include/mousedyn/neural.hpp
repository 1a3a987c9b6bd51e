#pragma once

// Small trainable-network kernel: dense and 1-D convolution layers, global
// max pooling, softmax/sigmoid cross-entropy heads and Adam. Sized for the
// 10-event mouse-action inputs; everything runs on the CPU in doubles.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "mousedyn/common.hpp"

namespace mousedyn {

enum class Activation { identity, relu, sigmoid, softmax };

inline std::string to_string(Activation a) {
    switch (a) {
        case Activation::identity: return "identity";
        case Activation::relu: return "relu";
        case Activation::sigmoid: return "sigmoid";
        case Activation::softmax: return "softmax";
    }
    return "identity";
}

inline Activation activation_from_string(const std::string& s) {
    if (s == "identity") return Activation::identity;
    if (s == "relu") return Activation::relu;
    if (s == "sigmoid") return Activation::sigmoid;
    if (s == "softmax") return Activation::softmax;
    throw ModelError("unknown activation '" + s + "'");
}

/// Fully connected layer over the flattened input. weight is out x in.
struct DenseLayer {
    std::size_t in = 0, out = 0;
    std::vector<double> weight, bias;
    Activation activation = Activation::identity;
};

/// Valid (unpadded), stride-1 convolution over time.
/// kernel is filters x in_channels x width.
struct Conv1dLayer {
    std::size_t in_channels = 0, filters = 0, width = 0;
    std::vector<double> kernel, bias;
    Activation activation = Activation::identity;
};

struct GlobalMaxPoolLayer {};

using Layer = std::variant<Conv1dLayer, GlobalMaxPoolLayer, DenseLayer>;

enum class LossKind {
    categorical_xent,  // softmax head, integer class labels
    binary_xent,       // single sigmoid output, labels {0, 1}
};

struct Network {
    std::size_t input_rows = 0, input_cols = 0;
    std::vector<Layer> layers;
    LossKind loss = LossKind::categorical_xent;
};

// --- primitive ops -------------------------------------------------------

inline Matrix conv1d_forward(const Conv1dLayer& layer, const Matrix& signal) {
    if (signal.cols() != layer.in_channels) throw DataError("conv1d: channel count mismatch");
    if (signal.rows() < layer.width) throw DataError("conv1d: signal shorter than kernel width");
    const std::size_t steps = signal.rows() - layer.width + 1;
    Matrix out(steps, layer.filters);
    const std::size_t cw = layer.in_channels * layer.width;
    for (std::size_t t = 0; t < steps; ++t)
        for (std::size_t f = 0; f < layer.filters; ++f) {
            double s = layer.bias[f];
            const double* k = layer.kernel.data() + f * cw;
            for (std::size_t c = 0; c < layer.in_channels; ++c)
                for (std::size_t w = 0; w < layer.width; ++w) s += k[c * layer.width + w] * signal(t + w, c);
            out(t, f) = s;
        }
    return out;
}

/// Per-filter maximum over time. `argmax` (optional) receives the first
/// timestep attaining each maximum.
inline Matrix global_max_pool(const Matrix& map, std::vector<std::size_t>* argmax = nullptr) {
    if (map.rows() < 1) throw DataError("global_max_pool: empty feature map");
    Matrix out(1, map.cols());
    if (argmax) argmax->assign(map.cols(), 0);
    for (std::size_t f = 0; f < map.cols(); ++f) {
        double best = map(0, f);
        std::size_t at = 0;
        for (std::size_t t = 1; t < map.rows(); ++t)
            if (map(t, f) > best) {
                best = map(t, f);
                at = t;
            }
        out(0, f) = best;
        if (argmax) (*argmax)[f] = at;
    }
    return out;
}

inline Matrix dense_forward(const DenseLayer& layer, const Matrix& input) {
    if (input.size() != layer.in) throw DataError("dense: input size mismatch");
    Matrix out(1, layer.out);
    const double* x = input.data().data();
    for (std::size_t o = 0; o < layer.out; ++o) {
        const double* w = layer.weight.data() + o * layer.in;
        double s = layer.bias[o];
        for (std::size_t i = 0; i < layer.in; ++i) s += w[i] * x[i];
        out(0, o) = s;
    }
    return out;
}

inline double sigmoid(double z) {
    if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

/// Applies the activation row-wise (softmax normalizes each row, using
/// max-subtraction).
inline Matrix activate(Activation a, const Matrix& z) {
    Matrix out = z;
    auto& v = out.data();
    switch (a) {
        case Activation::identity: break;
        case Activation::relu:
            // NaN passes through so divergence is not masked.
            for (double& x : v) x = x < 0 ? 0.0 : x;
            break;
        case Activation::sigmoid:
            for (double& x : v) x = sigmoid(x);
            break;
        case Activation::softmax:
            for (std::size_t r = 0; r < out.rows(); ++r) {
                double mx = -std::numeric_limits<double>::infinity();
                for (std::size_t c = 0; c < out.cols(); ++c) mx = std::max(mx, out(r, c));
                double sum = 0;
                for (std::size_t c = 0; c < out.cols(); ++c) {
                    out(r, c) = std::exp(out(r, c) - mx);
                    sum += out(r, c);
                }
                for (std::size_t c = 0; c < out.cols(); ++c) out(r, c) /= sum;
            }
            break;
    }
    return out;
}

/// dL/dz from dL/dy for y = act(z).
inline Matrix activation_backward(Activation a, const Matrix& y, const Matrix& grad_y) {
    Matrix g = grad_y;
    switch (a) {
        case Activation::identity: break;
        case Activation::relu:
            for (std::size_t i = 0; i < g.size(); ++i) g.data()[i] = y.data()[i] > 0 ? g.data()[i] : 0.0;
            break;
        case Activation::sigmoid:
            for (std::size_t i = 0; i < g.size(); ++i) g.data()[i] *= y.data()[i] * (1.0 - y.data()[i]);
            break;
        case Activation::softmax:
            for (std::size_t r = 0; r < g.rows(); ++r) {
                double dot = 0;
                for (std::size_t c = 0; c < g.cols(); ++c) dot += grad_y(r, c) * y(r, c);
                for (std::size_t c = 0; c < g.cols(); ++c) g(r, c) = y(r, c) * (grad_y(r, c) - dot);
            }
            break;
    }
    return g;
}

// --- network forward / backward -----------------------------------------

struct ForwardCache {
    std::vector<Matrix> inputs;   // input to each layer
    std::vector<Matrix> logits;   // pre-activation output (empty for pooling)
    std::vector<Matrix> outputs;  // post-activation output
    std::vector<std::vector<std::size_t>> argmax;
};

inline Matrix forward(const Network& net, const Matrix& input, ForwardCache* cache = nullptr) {
    if (input.rows() != net.input_rows || input.cols() != net.input_cols)
        throw DataError("network input has shape " + std::to_string(input.rows()) + "x" + std::to_string(input.cols()) +
                        ", expected " + std::to_string(net.input_rows) + "x" + std::to_string(net.input_cols));
    if (cache) {
        cache->inputs.resize(net.layers.size());
        cache->logits.resize(net.layers.size());
        cache->outputs.resize(net.layers.size());
        cache->argmax.resize(net.layers.size());
    }
    Matrix x = input;
    for (std::size_t l = 0; l < net.layers.size(); ++l) {
        Matrix z, y;
        std::visit(
            [&](const auto& layer) {
                using T = std::decay_t<decltype(layer)>;
                if constexpr (std::is_same_v<T, GlobalMaxPoolLayer>) {
                    y = global_max_pool(x, cache ? &cache->argmax[l] : nullptr);
                } else {
                    if constexpr (std::is_same_v<T, DenseLayer>)
                        z = dense_forward(layer, x);
                    else
                        z = conv1d_forward(layer, x);
                    y = activate(layer.activation, z);
                }
            },
            net.layers[l]);
        if (cache) {
            cache->inputs[l] = std::move(x);
            cache->logits[l] = std::move(z);
            cache->outputs[l] = y;
        }
        x = std::move(y);
    }
    return x;
}

/// Probabilities for one input (ANN: softmax simplex; CNN: 1x1 sigmoid).
inline Matrix predict(const Network& net, const Matrix& input) { return forward(net, input); }

/// Mutable views of every parameter block, in a fixed order
/// (per layer: weights/kernel, then bias).
inline std::vector<std::span<double>> parameter_blocks(Network& net) {
    std::vector<std::span<double>> blocks;
    for (auto& layer : net.layers)
        std::visit(
            [&](auto& l) {
                using T = std::decay_t<decltype(l)>;
                if constexpr (std::is_same_v<T, DenseLayer>) {
                    blocks.emplace_back(l.weight);
                    blocks.emplace_back(l.bias);
                } else if constexpr (std::is_same_v<T, Conv1dLayer>) {
                    blocks.emplace_back(l.kernel);
                    blocks.emplace_back(l.bias);
                }
            },
            layer);
    return blocks;
}

inline std::vector<std::string> parameter_block_names(const Network& net) {
    std::vector<std::string> names;
    for (std::size_t i = 0; i < net.layers.size(); ++i) {
        const auto& layer = net.layers[i];
        if (std::holds_alternative<DenseLayer>(layer)) {
            names.push_back("layer" + std::to_string(i) + ".dense.weight");
            names.push_back("layer" + std::to_string(i) + ".dense.bias");
        } else if (std::holds_alternative<Conv1dLayer>(layer)) {
            names.push_back("layer" + std::to_string(i) + ".conv1d.kernel");
            names.push_back("layer" + std::to_string(i) + ".conv1d.bias");
        }
    }
    return names;
}

inline std::size_t parameter_count(const Network& net) {
    std::size_t n = 0;
    for (auto b : parameter_blocks(const_cast<Network&>(net))) n += b.size();
    return n;
}

using Gradients = std::vector<std::vector<double>>;

inline Gradients zero_gradients(const Network& net) {
    Gradients g;
    for (auto b : parameter_blocks(const_cast<Network&>(net))) g.emplace_back(b.size(), 0.0);
    return g;
}

/// Accumulates parameter gradients into `grads` (added, not overwritten).
/// `grad_out` is dL/d(output) unless `wrt_logits` is set, in which case it
/// is dL/d(last layer pre-activation), as produced by the fused heads.
inline void backward(const Network& net, const ForwardCache& cache, Matrix grad_out, bool wrt_logits, Gradients& grads) {
    std::size_t block = grads.size();
    for (std::size_t li = net.layers.size(); li-- > 0;) {
        const bool fused = wrt_logits && li + 1 == net.layers.size();
        const Matrix& x = cache.inputs[li];
        Matrix grad_in;
        std::visit(
            [&](const auto& layer) {
                using T = std::decay_t<decltype(layer)>;
                if constexpr (std::is_same_v<T, GlobalMaxPoolLayer>) {
                    grad_in = Matrix(x.rows(), x.cols());
                    for (std::size_t f = 0; f < x.cols(); ++f) grad_in(cache.argmax[li][f], f) = grad_out(0, f);
                } else {
                    const Matrix dz =
                        fused ? grad_out : activation_backward(layer.activation, cache.outputs[li], grad_out);
                    block -= 2;
                    auto& gw = grads[block];
                    auto& gb = grads[block + 1];
                    grad_in = Matrix(x.rows(), x.cols());
                    if constexpr (std::is_same_v<T, DenseLayer>) {
                        const double* xv = x.data().data();
                        double* gx = grad_in.data().data();
                        for (std::size_t o = 0; o < layer.out; ++o) {
                            const double d = dz.data()[o];
                            gb[o] += d;
                            if (d == 0.0) continue;
                            double* gwo = gw.data() + o * layer.in;
                            const double* w = layer.weight.data() + o * layer.in;
                            for (std::size_t i = 0; i < layer.in; ++i) {
                                gwo[i] += d * xv[i];
                                gx[i] += w[i] * d;
                            }
                        }
                    } else {
                        const std::size_t cw = layer.in_channels * layer.width;
                        for (std::size_t t = 0; t < dz.rows(); ++t)
                            for (std::size_t f = 0; f < layer.filters; ++f) {
                                const double d = dz(t, f);
                                gb[f] += d;
                                if (d == 0.0) continue;
                                double* gk = gw.data() + f * cw;
                                const double* k = layer.kernel.data() + f * cw;
                                for (std::size_t c = 0; c < layer.in_channels; ++c)
                                    for (std::size_t w = 0; w < layer.width; ++w) {
                                        gk[c * layer.width + w] += d * x(t + w, c);
                                        grad_in(t + w, c) += k[c * layer.width + w] * d;
                                    }
                            }
                    }
                }
            },
            net.layers[li]);
        grad_out = std::move(grad_in);
    }
}

// --- losses ---------------------------------------------------------------

inline constexpr double kProbFloor = 1e-12;

/// Mean over the batch of -log p(true class), probabilities floored at
/// 1e-12. For binary_xent each prediction holds p(genuine).
inline double loss(LossKind kind, std::span<const Matrix> predictions, std::span<const int> labels) {
    if (predictions.size() != labels.size() || predictions.empty()) throw DataError("loss: batch size mismatch");
    double total = 0;
    for (std::size_t i = 0; i < predictions.size(); ++i) {
        const auto& p = predictions[i].data();
        double p_true = 0;
        if (kind == LossKind::categorical_xent) {
            if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= p.size())
                throw DataError("loss: label " + std::to_string(labels[i]) + " out of range");
            p_true = p[static_cast<std::size_t>(labels[i])];
        } else {
            if (labels[i] != 0 && labels[i] != 1) throw DataError("loss: binary label must be 0 or 1");
            p_true = labels[i] == 1 ? p[0] : 1.0 - p[0];
        }
        total += -std::log(std::max(p_true, kProbFloor));
    }
    return total / static_cast<double>(predictions.size());
}

/// Loss of one cached forward pass and its gradient w.r.t. the head logits.
/// Uses the logits directly for the binary head so 1 - p does not cancel.
inline double head_loss_and_grad(const Network& net, const ForwardCache& cache, int label, Matrix& dlogits) {
    const Matrix& p = cache.outputs.back();
    dlogits = p;
    if (net.loss == LossKind::categorical_xent) {
        if (label < 0 || static_cast<std::size_t>(label) >= p.size())
            throw DataError("loss: label " + std::to_string(label) + " out of range");
        dlogits.data()[static_cast<std::size_t>(label)] -= 1.0;
        return -std::log(std::max(p.data()[static_cast<std::size_t>(label)], kProbFloor));
    }
    if (label != 0 && label != 1) throw DataError("loss: binary label must be 0 or 1");
    const double z = cache.logits.back().data()[0];
    dlogits.data()[0] -= label;
    const double p_true = label == 1 ? sigmoid(z) : sigmoid(-z);
    return -std::log(std::max(p_true, kProbFloor));
}

/// Mean loss and summed-then-averaged parameter gradients over a batch.
inline double loss_and_gradients(const Network& net, std::span<const Matrix> inputs, std::span<const int> labels,
                                 Gradients& grads) {
    grads = zero_gradients(net);
    ForwardCache cache;
    Matrix dlogits;
    double total = 0;
    for (std::size_t i = 0; i < inputs.size(); ++i) {
        forward(net, inputs[i], &cache);
        total += head_loss_and_grad(net, cache, labels[i], dlogits);
        backward(net, cache, dlogits, true, grads);
    }
    const double scale = 1.0 / static_cast<double>(inputs.size());
    for (auto& g : grads)
        for (double& v : g) v *= scale;
    return total * scale;
}

inline double batch_loss(const Network& net, std::span<const Matrix> inputs, std::span<const int> labels) {
    ForwardCache cache;
    Matrix dlogits;
    double total = 0;
    for (std::size_t i = 0; i < inputs.size(); ++i) {
        forward(net, inputs[i], &cache);
        total += head_loss_and_grad(net, cache, labels[i], dlogits);
    }
    return total / static_cast<double>(inputs.size());
}

/// Class decision for one probability output.
inline int predicted_label(const Network& net, const Matrix& probs) {
    if (net.loss == LossKind::binary_xent) return probs.data()[0] >= 0.5 ? 1 : 0;
    const auto& v = probs.data();
    return static_cast<int>(std::max_element(v.begin(), v.end()) - v.begin());
}

// --- Adam -------------------------------------------------------------------

struct AdamConfig {
    double learning_rate = 0.001;
    double decay = 1e-6;  // rate_t = learning_rate / (1 + decay * t); 0 = constant
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-7;
};

struct AdamState {
    AdamConfig config;
    std::uint64_t t = 0;  // completed steps
    std::vector<std::vector<double>> m, v;

    double effective_rate() const { return config.learning_rate / (1.0 + config.decay * static_cast<double>(t)); }
};

inline AdamState make_adam(const Network& net, const AdamConfig& config = {}) {
    AdamState s;
    s.config = config;
    for (auto b : parameter_blocks(const_cast<Network&>(net))) {
        s.m.emplace_back(b.size(), 0.0);
        s.v.emplace_back(b.size(), 0.0);
    }
    return s;
}

/// One bias-corrected Adam update. Throws ModelError naming the first block
/// with a non-finite gradient (nothing is modified in that case).
inline void adam_step(AdamState& state, std::span<const std::span<double>> params, const Gradients& grads,
                      std::span<const std::string> block_names = {}) {
    if (params.size() != grads.size() || state.m.size() != params.size()) throw DataError("adam: block count mismatch");
    for (std::size_t b = 0; b < params.size(); ++b) {
        if (params[b].size() != grads[b].size() || state.m[b].size() != params[b].size())
            throw DataError("adam: block shape mismatch");
        for (double g : grads[b])
            if (!std::isfinite(g))
                throw ModelError("adam: non-finite gradient in parameter block " +
                                 (b < block_names.size() ? block_names[b] : std::to_string(b)));
    }
    const double rate = state.effective_rate();
    ++state.t;
    const auto& c = state.config;
    const double bc1 = 1.0 - std::pow(c.beta1, static_cast<double>(state.t));
    const double bc2 = 1.0 - std::pow(c.beta2, static_cast<double>(state.t));
    for (std::size_t b = 0; b < params.size(); ++b) {
        auto& m = state.m[b];
        auto& v = state.v[b];
        for (std::size_t i = 0; i < params[b].size(); ++i) {
            const double g = grads[b][i];
            m[i] = c.beta1 * m[i] + (1.0 - c.beta1) * g;
            v[i] = c.beta2 * v[i] + (1.0 - c.beta2) * g * g;
            const double m_hat = m[i] / bc1;
            const double v_hat = v[i] / bc2;
            params[b][i] -= rate * m_hat / (std::sqrt(v_hat) + c.epsilon);
        }
    }
}

// --- architectures ----------------------------------------------------------

enum class Init { glorot_uniform, zeros };

inline DenseLayer make_dense(std::size_t in, std::size_t out, Activation a, Init init, Rng& rng) {
    DenseLayer l{in, out, std::vector<double>(in * out, 0.0), std::vector<double>(out, 0.0), a};
    if (init == Init::glorot_uniform) {
        const double limit = std::sqrt(6.0 / static_cast<double>(in + out));
        for (double& w : l.weight) w = rng.uniform(-limit, limit);
    }
    return l;
}

inline Conv1dLayer make_conv(std::size_t in_channels, std::size_t filters, std::size_t width, Activation a, Init init,
                             Rng& rng) {
    Conv1dLayer l{in_channels, filters, width, std::vector<double>(filters * in_channels * width, 0.0),
                  std::vector<double>(filters, 0.0), a};
    if (init == Init::glorot_uniform) {
        const double limit = std::sqrt(6.0 / static_cast<double>(in_channels * width + filters * width));
        for (double& w : l.kernel) w = rng.uniform(-limit, limit);
    }
    return l;
}

/// Multi-class coordinate classifier: ReLU hidden layers, softmax head.
struct AnnSpec {
    std::size_t input = 20;
    std::vector<std::size_t> hidden = {256, 256, 128, 128, 64, 64};
    std::size_t classes = 40;
};

/// Binary speed-signal classifier: conv -> relu -> conv -> relu -> global
/// max pool -> dense relu -> dense sigmoid.
struct CnnSpec {
    std::size_t timesteps = 10;
    std::size_t channels = 2;
    std::size_t filters1 = 32, width1 = 3;
    std::size_t filters2 = 64, width2 = 3;
    std::size_t dense = 60;
};

inline Network build_ann(const AnnSpec& spec, std::uint64_t seed, Init init = Init::glorot_uniform) {
    if (spec.classes < 2) throw ConfigError("ann: need at least 2 classes");
    Rng rng(seed);
    Network net;
    net.input_rows = 1;
    net.input_cols = spec.input;
    net.loss = LossKind::categorical_xent;
    std::size_t width = spec.input;
    for (std::size_t h : spec.hidden) {
        net.layers.emplace_back(make_dense(width, h, Activation::relu, init, rng));
        width = h;
    }
    net.layers.emplace_back(make_dense(width, spec.classes, Activation::softmax, init, rng));
    return net;
}

inline Network build_cnn(const CnnSpec& spec, std::uint64_t seed, Init init = Init::glorot_uniform) {
    if (spec.timesteps < spec.width1 + spec.width2 - 1) throw ConfigError("cnn: kernels wider than the signal");
    Rng rng(seed);
    Network net;
    net.input_rows = spec.timesteps;
    net.input_cols = spec.channels;
    net.loss = LossKind::binary_xent;
    net.layers.emplace_back(make_conv(spec.channels, spec.filters1, spec.width1, Activation::relu, init, rng));
    net.layers.emplace_back(make_conv(spec.filters1, spec.filters2, spec.width2, Activation::relu, init, rng));
    net.layers.emplace_back(GlobalMaxPoolLayer{});
    net.layers.emplace_back(make_dense(spec.filters2, spec.dense, Activation::relu, init, rng));
    net.layers.emplace_back(make_dense(spec.dense, 1, Activation::sigmoid, init, rng));
    return net;
}

/// Plain MLP (used for small fixtures): hidden ReLU layers and a head chosen
/// by `loss` (softmax for categorical, single sigmoid for binary).
inline Network build_mlp(std::size_t input, const std::vector<std::size_t>& hidden, std::size_t outputs, LossKind loss,
                         std::uint64_t seed) {
    Rng rng(seed);
    Network net;
    net.input_rows = 1;
    net.input_cols = input;
    net.loss = loss;
    std::size_t width = input;
    for (std::size_t h : hidden) {
        net.layers.emplace_back(make_dense(width, h, Activation::relu, Init::glorot_uniform, rng));
        width = h;
    }
    const bool binary = loss == LossKind::binary_xent;
    net.layers.emplace_back(make_dense(width, binary ? 1 : outputs, binary ? Activation::sigmoid : Activation::softmax,
                                       Init::glorot_uniform, rng));
    return net;
}

// --- training ---------------------------------------------------------------

struct TrainConfig {
    std::size_t epochs = 100;
    std::size_t batch_size = 64;
    AdamConfig adam;
    std::uint64_t seed = 0;
};

struct EpochRecord {
    std::size_t epoch = 0;
    double train_loss = 0, train_accuracy = 0;
    double valid_loss = 0, valid_accuracy = 0;

    bool operator==(const EpochRecord&) const = default;
};

struct TrainResult {
    Network network;  // parameters from the epoch with peak validation accuracy
    std::vector<EpochRecord> history;
    std::size_t best_epoch = 0;
};

struct EvalResult {
    double loss = 0;
    double accuracy = 0;
};

inline EvalResult evaluate_network(const Network& net, std::span<const Matrix> inputs, std::span<const int> labels) {
    ForwardCache cache;
    Matrix dlogits;
    double total = 0;
    std::size_t correct = 0;
    for (std::size_t i = 0; i < inputs.size(); ++i) {
        forward(net, inputs[i], &cache);
        total += head_loss_and_grad(net, cache, labels[i], dlogits);
        correct += predicted_label(net, cache.outputs.back()) == labels[i];
    }
    const auto n = static_cast<double>(inputs.size());
    return {total / n, static_cast<double>(correct) / n};
}

/// Mini-batch Adam. Epoch e shuffles with Rng(derive_seed(seed, e)); train
/// loss/accuracy are running values over the epoch's batches. Returns the
/// parameters of the first epoch reaching the best validation accuracy.
inline TrainResult train(Network net, const TrainConfig& cfg, std::span<const Matrix> train_x, std::span<const int> train_y,
                         std::span<const Matrix> valid_x, std::span<const int> valid_y) {
    if (train_x.empty() || valid_x.empty()) throw DataError("train: empty train or validation set");
    if (train_x.size() != train_y.size() || valid_x.size() != valid_y.size())
        throw DataError("train: inputs and labels differ in length");
    if (cfg.batch_size == 0 || cfg.epochs == 0) throw ConfigError("train: epochs and batch_size must be >= 1");
    for (const auto& x : train_x)
        if (x.rows() != net.input_rows || x.cols() != net.input_cols) throw DataError("train: input shape mismatch");

    auto state = make_adam(net, cfg.adam);
    const auto names = parameter_block_names(net);
    TrainResult result;
    result.network = net;
    double best_accuracy = -1;

    std::vector<std::size_t> order(train_x.size());
    ForwardCache cache;
    Matrix dlogits;
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::iota(order.begin(), order.end(), std::size_t{0});
        Rng rng(derive_seed(cfg.seed, epoch));
        rng.shuffle(order);
        double epoch_loss = 0;
        std::size_t correct = 0;
        for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
            const std::size_t end = std::min(order.size(), start + cfg.batch_size);
            Gradients grads = zero_gradients(net);
            for (std::size_t k = start; k < end; ++k) {
                const std::size_t i = order[k];
                forward(net, train_x[i], &cache);
                const double l = head_loss_and_grad(net, cache, train_y[i], dlogits);
                if (!std::isfinite(l)) throw ModelError("train: non-finite loss in epoch " + std::to_string(epoch));
                epoch_loss += l;
                correct += predicted_label(net, cache.outputs.back()) == train_y[i];
                backward(net, cache, dlogits, true, grads);
            }
            const double scale = 1.0 / static_cast<double>(end - start);
            for (auto& g : grads)
                for (double& v : g) v *= scale;
            auto blocks = parameter_blocks(net);
            try {
                adam_step(state, blocks, grads, names);
            } catch (const ModelError& e) {
                throw ModelError(std::string(e.what()) + " (epoch " + std::to_string(epoch) + ")");
            }
        }
        const auto valid = evaluate_network(net, valid_x, valid_y);
        if (!std::isfinite(valid.loss)) throw ModelError("train: non-finite validation loss in epoch " + std::to_string(epoch));
        const auto n = static_cast<double>(train_x.size());
        result.history.push_back({epoch, epoch_loss / n, static_cast<double>(correct) / n, valid.loss, valid.accuracy});
        if (valid.accuracy > best_accuracy) {
            best_accuracy = valid.accuracy;
            result.best_epoch = epoch;
            result.network = net;
        }
    }
    return result;
}

// --- gradient verification --------------------------------------------------

struct GradCheckOptions {
    double step = 1e-5;
    std::size_t max_params = 0;  // 0 = check every parameter
    std::uint64_t seed = 0;      // picks the subsample when max_params > 0
};

/// Loss functor for grad_check: returns the loss of one output and writes
/// dL/d(output) into `grad`.
using OutputLoss = std::function<double(const Matrix& output, std::size_t sample, Matrix& grad)>;

namespace detail {

template <typename LossFn, typename GradFn>
double grad_check_impl(Network net, const GradCheckOptions& opt, LossFn&& total_loss, GradFn&& analytic) {
    Gradients grads = analytic(net);
    auto blocks = parameter_blocks(net);
    std::vector<std::pair<std::size_t, std::size_t>> coords;
    for (std::size_t b = 0; b < blocks.size(); ++b)
        for (std::size_t i = 0; i < blocks[b].size(); ++i) coords.push_back({b, i});
    if (opt.max_params > 0 && opt.max_params < coords.size()) {
        Rng rng(opt.seed);
        const auto pick = rng.sample_without_replacement(coords.size(), opt.max_params);
        std::vector<std::pair<std::size_t, std::size_t>> chosen;
        for (std::size_t k : pick) chosen.push_back(coords[k]);
        coords = std::move(chosen);
    }
    double worst = 0;
    for (auto [b, i] : coords) {
        double& p = blocks[b][i];
        const double saved = p;
        p = saved + opt.step;
        const double up = total_loss(net);
        p = saved - opt.step;
        const double down = total_loss(net);
        p = saved;
        const double numeric = (up - down) / (2.0 * opt.step);
        const double a = grads[b][i];
        worst = std::max(worst, std::abs(a - numeric) / std::max(std::abs(a) + std::abs(numeric), 1e-8));
    }
    return worst;
}

}  // namespace detail

/// Max relative error |g_a - g_n| / max(|g_a| + |g_n|, 1e-8) between the
/// backward pass and central differences of the network's own loss.
inline double grad_check(const Network& net, std::span<const Matrix> inputs, std::span<const int> labels,
                         const GradCheckOptions& opt = {}) {
    return detail::grad_check_impl(
        net, opt, [&](const Network& n) { return batch_loss(n, inputs, labels); },
        [&](const Network& n) {
            Gradients g;
            loss_and_gradients(n, inputs, labels, g);
            return g;
        });
}

/// Same check against an arbitrary loss on the network output (mean over
/// samples), backpropagated through the output activation.
inline double grad_check(const Network& net, std::span<const Matrix> inputs, const OutputLoss& output_loss,
                         const GradCheckOptions& opt = {}) {
    const auto total = [&](const Network& n) {
        double s = 0;
        Matrix g;
        for (std::size_t i = 0; i < inputs.size(); ++i) s += output_loss(forward(n, inputs[i]), i, g);
        return s / static_cast<double>(inputs.size());
    };
    const auto analytic = [&](const Network& n) {
        Gradients grads = zero_gradients(n);
        ForwardCache cache;
        for (std::size_t i = 0; i < inputs.size(); ++i) {
            const Matrix out = forward(n, inputs[i], &cache);
            Matrix g;
            output_loss(out, i, g);
            backward(n, cache, g, false, grads);
        }
        for (auto& b : grads)
            for (double& v : b) v /= static_cast<double>(inputs.size());
        return grads;
    };
    return detail::grad_check_impl(net, opt, total, analytic);
}

// --- serialization ------------------------------------------------------------

inline nlohmann::json to_json(const Network& net) {
    nlohmann::json layers = nlohmann::json::array();
    for (const auto& layer : net.layers)
        std::visit(
            [&](const auto& l) {
                using T = std::decay_t<decltype(l)>;
                if constexpr (std::is_same_v<T, DenseLayer>)
                    layers.push_back({{"type", "dense"}, {"in", l.in}, {"out", l.out},
                                      {"activation", to_string(l.activation)}, {"weight", l.weight}, {"bias", l.bias}});
                else if constexpr (std::is_same_v<T, Conv1dLayer>)
                    layers.push_back({{"type", "conv1d"},
                                      {"in_channels", l.in_channels},
                                      {"filters", l.filters},
                                      {"width", l.width},
                                      {"activation", to_string(l.activation)},
                                      {"kernel", l.kernel},
                                      {"bias", l.bias}});
                else
                    layers.push_back({{"type", "global_max_pool"}});
            },
            layer);
    return {{"input_rows", net.input_rows},
            {"input_cols", net.input_cols},
            {"loss", net.loss == LossKind::binary_xent ? "binary_xent" : "categorical_xent"},
            {"layers", layers}};
}

inline Network network_from_json(const nlohmann::json& j) {
    Network net;
    net.input_rows = j.at("input_rows").get<std::size_t>();
    net.input_cols = j.at("input_cols").get<std::size_t>();
    net.loss = j.at("loss").get<std::string>() == "binary_xent" ? LossKind::binary_xent : LossKind::categorical_xent;
    for (const auto& jl : j.at("layers")) {
        const auto type = jl.at("type").get<std::string>();
        if (type == "dense") {
            DenseLayer l{jl.at("in").get<std::size_t>(), jl.at("out").get<std::size_t>(),
                         jl.at("weight").get<std::vector<double>>(), jl.at("bias").get<std::vector<double>>(),
                         activation_from_string(jl.at("activation").get<std::string>())};
            if (l.weight.size() != l.in * l.out || l.bias.size() != l.out) throw ModelError("dense layer shape mismatch");
            net.layers.emplace_back(std::move(l));
        } else if (type == "conv1d") {
            Conv1dLayer l{jl.at("in_channels").get<std::size_t>(), jl.at("filters").get<std::size_t>(),
                          jl.at("width").get<std::size_t>(), jl.at("kernel").get<std::vector<double>>(),
                          jl.at("bias").get<std::vector<double>>(),
                          activation_from_string(jl.at("activation").get<std::string>())};
            if (l.kernel.size() != l.filters * l.in_channels * l.width || l.bias.size() != l.filters)
                throw ModelError("conv1d layer shape mismatch");
            net.layers.emplace_back(std::move(l));
        } else if (type == "global_max_pool") {
            net.layers.emplace_back(GlobalMaxPoolLayer{});
        } else {
            throw ModelError("unknown layer type '" + type + "'");
        }
    }
    return net;
}

inline nlohmann::json to_json(const EpochRecord& r) {
    return {{"epoch", r.epoch},
            {"train_loss", r.train_loss},
            {"train_accuracy", r.train_accuracy},
            {"valid_loss", r.valid_loss},
            {"valid_accuracy", r.valid_accuracy}};
}

}  // namespace mousedyn
