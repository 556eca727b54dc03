#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "jellygym/common.hpp"

namespace jg::nn {

// The agent's network: 81 board entries + 1 objective in, one Q/probability
// per action out.
inline const std::vector<int> kAgentArchitecture = {82, 100, 200, 324};

enum class Mode : std::uint8_t { Train, Infer };

struct BatchNorm {
    std::vector<double> gain;
    std::vector<double> shift;
    std::vector<double> running_mean;
    std::vector<double> running_var;
    double epsilon = 1e-8;
    bool active = true;  // the softmax head carries parameters but skips the transform
};

struct DenseLayer {
    int in = 0;
    int out = 0;
    std::vector<double> weights;  // out x in, row-major
    std::vector<double> biases;   // out
    BatchNorm bn;
};

// Parameter-shaped tensors for one layer; used for gradients and Adam moments.
struct TensorBundle {
    std::vector<double> weights;
    std::vector<double> biases;
    std::vector<double> gain;
    std::vector<double> shift;
};

struct Gradients {
    std::vector<TensorBundle> layers;
};

struct AdamState {
    double alpha = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    long step_count = 0;
    std::vector<TensorBundle> m;
    std::vector<TensorBundle> v;
};

struct LayerCache {
    std::vector<double> input;    // batch x in
    std::vector<double> xhat;     // batch x out, batch-norm layers only
    std::vector<double> pre_act;  // batch x out: post-norm pre-ReLU (logits on the head)
    std::vector<double> inv_std;  // out: 1/sqrt(var + eps) actually applied
    bool batch_stats = false;     // batch statistics vs running statistics
};

struct ForwardCache {
    Mode mode = Mode::Infer;
    int batch = 0;
    std::vector<LayerCache> layers;
};

struct Forward {
    std::vector<double> logits;  // batch x out_dim
    std::vector<double> probs;   // batch x out_dim, rows sum to 1
    ForwardCache cache;
};

// Fully-connected ReLU network with per-layer batch normalization (applied
// before ReLU on the hidden layers, inactive on the softmax head).
//
// Batch normalization uses batch statistics only for train-mode batches of
// two or more samples, updating the running statistics as a side effect;
// single-sample forwards normalize with running statistics in both modes, so
// they never mutate the network and are safe to run concurrently.
class Network {
public:
    explicit Network(std::vector<int> sizes = kAgentArchitecture);

    const std::vector<int>& sizes() const { return sizes_; }
    std::vector<DenseLayer>& layers() { return layers_; }
    const std::vector<DenseLayer>& layers() const { return layers_; }

    int input_size() const { return sizes_.front(); }
    int output_size() const { return sizes_.back(); }
    std::size_t parameter_count() const;

    // Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights, zero biases.
    void init_weights(Rng& rng);

    Forward forward(std::span<const double> input, Mode mode) const;
    Forward forward_batch(std::span<const double> inputs, int batch, Mode mode);

    // Gradients of the loss w.r.t. every parameter, given the loss gradient
    // on the logits. Requires a train-mode cache.
    Gradients backward(const ForwardCache& cache, std::span<const double> grad_logits) const;

    Gradients zero_gradients() const;

private:
    Forward run(std::span<const double> inputs, int batch, Mode mode, bool allow_stats_update);

    std::vector<int> sizes_;
    std::vector<DenseLayer> layers_;
};

struct LossValue {
    double loss = 0.0;
    std::vector<double> gradient;
};

// Mean squared error; gradient w.r.t. the predictions: 2(pred - target)/n.
LossValue mse_loss(std::span<const double> prediction, std::span<const double> target);

// -log p[target]; gradient w.r.t. the logits: p - onehot(target).
LossValue cross_entropy_loss(std::span<const double> probabilities, int target_index);

// Pulls a gradient on softmax outputs back to the logits.
std::vector<double> softmax_pullback(std::span<const double> probabilities,
                                     std::span<const double> grad_probs);

AdamState make_adam_state(const Network& net, double alpha = 1e-3);

// Bias-corrected Adam update over all parameters, batch-norm gain/shift
// included. Running statistics are not parameters and are not touched.
void adam_step(Network& net, const Gradients& grads, AdamState& opt);

// Copies every parameter and running statistic; the two networks stay
// independent afterwards.
void clone_weights(const Network& source, Network& destination);

struct CheckpointMeta {
    std::uint64_t seed = 0;
    std::string created;
    long episodes_trained = 0;
};

struct Checkpoint {
    Network net;
    std::optional<AdamState> adam;
    CheckpointMeta meta;
};

void save_checkpoint(const Network& net, const AdamState* opt, const std::string& path,
                     const CheckpointMeta& meta = {});
Checkpoint load_checkpoint(const std::string& path);
// As above, but rejects architectures other than `expected`.
Checkpoint load_checkpoint(const std::string& path, const std::vector<int>& expected);

}  // namespace jg::nn
