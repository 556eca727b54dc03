#include "jellygym/nn.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <json.hpp>

#include "jellygym/kernels.hpp"

namespace jg::nn {

namespace {
constexpr double kRunningStatDecay = 0.9;  // running = 0.9*running + 0.1*batch
}

Network::Network(std::vector<int> sizes) : sizes_(std::move(sizes)) {
    if (sizes_.size() < 2) throw ShapeError("network needs at least an input and an output layer");
    for (int s : sizes_)
        if (s < 1) throw ShapeError("layer sizes must be positive");
    layers_.resize(sizes_.size() - 1);
    for (std::size_t l = 0; l < layers_.size(); ++l) {
        DenseLayer& layer = layers_[l];
        layer.in = sizes_[l];
        layer.out = sizes_[l + 1];
        layer.weights.assign(static_cast<std::size_t>(layer.out) * layer.in, 0.0);
        layer.biases.assign(layer.out, 0.0);
        layer.bn.gain.assign(layer.out, 1.0);
        layer.bn.shift.assign(layer.out, 0.0);
        layer.bn.running_mean.assign(layer.out, 0.0);
        layer.bn.running_var.assign(layer.out, 1.0);
        layer.bn.active = l + 1 < layers_.size();
    }
}

std::size_t Network::parameter_count() const {
    std::size_t n = 0;
    for (const DenseLayer& layer : layers_)
        n += layer.weights.size() + layer.biases.size() + layer.bn.gain.size() + layer.bn.shift.size();
    return n;
}

void Network::init_weights(Rng& rng) {
    for (DenseLayer& layer : layers_) {
        double bound = 1.0 / std::sqrt(static_cast<double>(layer.in));
        for (double& w : layer.weights) w = rng.real(-bound, bound);
        std::fill(layer.biases.begin(), layer.biases.end(), 0.0);
    }
}

namespace {

void softmax_rows(const std::vector<double>& logits, std::vector<double>& probs, int batch, int dim) {
    probs.resize(logits.size());
    for (int s = 0; s < batch; ++s) {
        const double* z = logits.data() + static_cast<std::size_t>(s) * dim;
        double* p = probs.data() + static_cast<std::size_t>(s) * dim;
        double zmax = z[0];
        for (int i = 1; i < dim; ++i) zmax = std::max(zmax, z[i]);
        double sum = 0.0;
        for (int i = 0; i < dim; ++i) {
            p[i] = std::exp(z[i] - zmax);
            sum += p[i];
        }
        for (int i = 0; i < dim; ++i) p[i] /= sum;
    }
}

}  // namespace

Forward Network::forward(std::span<const double> input, Mode mode) const {
    // Single samples never touch batch statistics, so this is const and
    // safe to call from several threads at once.
    return const_cast<Network*>(this)->run(input, 1, mode, /*allow_stats_update=*/false);
}

Forward Network::forward_batch(std::span<const double> inputs, int batch, Mode mode) {
    return run(inputs, batch, mode, /*allow_stats_update=*/true);
}

Forward Network::run(std::span<const double> inputs, int batch, Mode mode, bool allow_stats_update) {
    if (batch < 1) throw ShapeError("batch must be >= 1");
    if (inputs.size() != static_cast<std::size_t>(batch) * input_size())
        throw ShapeError("input length " + std::to_string(inputs.size()) + " does not match " +
                         std::to_string(batch) + " x " + std::to_string(input_size()));

    Forward fwd;
    fwd.cache.mode = mode;
    fwd.cache.batch = batch;
    fwd.cache.layers.resize(layers_.size());

    std::vector<double> activ(inputs.begin(), inputs.end());
    for (std::size_t l = 0; l < layers_.size(); ++l) {
        const DenseLayer& layer = layers_[l];
        LayerCache& lc = fwd.cache.layers[l];
        lc.input = activ;

        std::vector<double> z(static_cast<std::size_t>(batch) * layer.out);
        kernels::linear_batch(layer.weights.data(), activ.data(), layer.biases.data(), z.data(),
                              batch, layer.out, layer.in);

        if (layer.bn.active) {
            const bool use_batch_stats = mode == Mode::Train && batch >= 2;
            lc.batch_stats = use_batch_stats;
            lc.inv_std.resize(layer.out);
            lc.xhat.resize(z.size());
            std::vector<double> mu(layer.out), var(layer.out);
            if (use_batch_stats) {
                for (int f = 0; f < layer.out; ++f) {
                    double sum = 0.0;
                    for (int s = 0; s < batch; ++s) sum += z[static_cast<std::size_t>(s) * layer.out + f];
                    mu[f] = sum / batch;
                    double sq = 0.0;
                    for (int s = 0; s < batch; ++s) {
                        double d = z[static_cast<std::size_t>(s) * layer.out + f] - mu[f];
                        sq += d * d;
                    }
                    var[f] = sq / batch;
                }
                if (allow_stats_update) {
                    DenseLayer& mut = layers_[l];
                    for (int f = 0; f < layer.out; ++f) {
                        mut.bn.running_mean[f] = kRunningStatDecay * mut.bn.running_mean[f] +
                                                 (1.0 - kRunningStatDecay) * mu[f];
                        mut.bn.running_var[f] = kRunningStatDecay * mut.bn.running_var[f] +
                                                (1.0 - kRunningStatDecay) * var[f];
                    }
                }
            } else {
                mu = layer.bn.running_mean;
                var = layer.bn.running_var;
            }
            for (int f = 0; f < layer.out; ++f)
                lc.inv_std[f] = 1.0 / std::sqrt(var[f] + layer.bn.epsilon);
            for (int s = 0; s < batch; ++s)
                for (int f = 0; f < layer.out; ++f) {
                    std::size_t i = static_cast<std::size_t>(s) * layer.out + f;
                    lc.xhat[i] = (z[i] - mu[f]) * lc.inv_std[f];
                    z[i] = layer.bn.gain[f] * lc.xhat[i] + layer.bn.shift[f];
                }
        }

        lc.pre_act = z;
        if (l + 1 < layers_.size()) {
            for (double& v : z) v = v > 0.0 ? v : 0.0;
            activ = std::move(z);
        } else {
            fwd.logits = std::move(z);
        }
    }

    softmax_rows(fwd.logits, fwd.probs, batch, output_size());
    return fwd;
}

Gradients Network::zero_gradients() const {
    Gradients g;
    g.layers.resize(layers_.size());
    for (std::size_t l = 0; l < layers_.size(); ++l) {
        g.layers[l].weights.assign(layers_[l].weights.size(), 0.0);
        g.layers[l].biases.assign(layers_[l].biases.size(), 0.0);
        g.layers[l].gain.assign(layers_[l].bn.gain.size(), 0.0);
        g.layers[l].shift.assign(layers_[l].bn.shift.size(), 0.0);
    }
    return g;
}

Gradients Network::backward(const ForwardCache& cache, std::span<const double> grad_logits) const {
    if (cache.mode != Mode::Train) throw ModeError("backward requires a train-mode forward cache");
    if (cache.layers.size() != layers_.size()) throw ShapeError("cache does not match this network");
    const int batch = cache.batch;
    if (grad_logits.size() != static_cast<std::size_t>(batch) * output_size())
        throw ShapeError("loss gradient length does not match batch x output size");

    Gradients grads = zero_gradients();
    std::vector<double> delta(grad_logits.begin(), grad_logits.end());  // dL/dz of current layer

    for (std::size_t li = layers_.size(); li-- > 0;) {
        const DenseLayer& layer = layers_[li];
        const LayerCache& lc = cache.layers[li];
        TensorBundle& g = grads.layers[li];

        if (li + 1 < layers_.size()) {
            // ReLU gate on the post-norm pre-activation.
            for (std::size_t i = 0; i < delta.size(); ++i)
                if (lc.pre_act[i] <= 0.0) delta[i] = 0.0;
        }

        if (layer.bn.active) {
            std::vector<double> dz(delta.size());
            for (int f = 0; f < layer.out; ++f) {
                double sum_dy = 0.0, sum_dy_xhat = 0.0;
                for (int s = 0; s < batch; ++s) {
                    std::size_t i = static_cast<std::size_t>(s) * layer.out + f;
                    sum_dy += delta[i];
                    sum_dy_xhat += delta[i] * lc.xhat[i];
                }
                g.gain[f] += sum_dy_xhat;
                g.shift[f] += sum_dy;
                if (lc.batch_stats) {
                    double scale = layer.bn.gain[f] * lc.inv_std[f] / batch;
                    for (int s = 0; s < batch; ++s) {
                        std::size_t i = static_cast<std::size_t>(s) * layer.out + f;
                        dz[i] = scale * (batch * delta[i] - sum_dy - lc.xhat[i] * sum_dy_xhat);
                    }
                } else {
                    double scale = layer.bn.gain[f] * lc.inv_std[f];
                    for (int s = 0; s < batch; ++s) {
                        std::size_t i = static_cast<std::size_t>(s) * layer.out + f;
                        dz[i] = scale * delta[i];
                    }
                }
            }
            delta = std::move(dz);
        }

        kernels::linear_batch_param_grad(delta.data(), lc.input.data(), g.weights.data(),
                                         g.biases.data(), batch, layer.out, layer.in);
        if (li > 0) {
            std::vector<double> dprev(static_cast<std::size_t>(batch) * layer.in);
            kernels::linear_batch_input_grad(layer.weights.data(), delta.data(), dprev.data(),
                                             batch, layer.out, layer.in);
            delta = std::move(dprev);
        }
    }
    return grads;
}

LossValue mse_loss(std::span<const double> prediction, std::span<const double> target) {
    if (prediction.size() != target.size())
        throw ShapeError("mse_loss requires equal-length vectors");
    LossValue out;
    out.gradient.resize(prediction.size());
    double acc = 0.0;
    const double n = static_cast<double>(prediction.size());
    for (std::size_t i = 0; i < prediction.size(); ++i) {
        double d = prediction[i] - target[i];
        acc += d * d;
        out.gradient[i] = 2.0 * d / n;
    }
    out.loss = acc / n;
    return out;
}

LossValue cross_entropy_loss(std::span<const double> probabilities, int target_index) {
    if (target_index < 0 || target_index >= static_cast<int>(probabilities.size()))
        throw IndexError("cross_entropy target index out of range");
    LossValue out;
    out.loss = -std::log(std::max(probabilities[target_index], 1e-300));
    out.gradient.assign(probabilities.begin(), probabilities.end());
    out.gradient[target_index] -= 1.0;
    return out;
}

std::vector<double> softmax_pullback(std::span<const double> probabilities,
                                     std::span<const double> grad_probs) {
    if (probabilities.size() != grad_probs.size())
        throw ShapeError("softmax_pullback requires equal-length vectors");
    double dot = 0.0;
    for (std::size_t i = 0; i < probabilities.size(); ++i) dot += probabilities[i] * grad_probs[i];
    std::vector<double> out(probabilities.size());
    for (std::size_t i = 0; i < probabilities.size(); ++i)
        out[i] = probabilities[i] * (grad_probs[i] - dot);
    return out;
}

AdamState make_adam_state(const Network& net, double alpha) {
    AdamState opt;
    opt.alpha = alpha;
    Gradients zero = net.zero_gradients();
    opt.m = zero.layers;
    opt.v = zero.layers;
    return opt;
}

namespace {

void check_congruent(const std::vector<double>& a, const std::vector<double>& b, const char* what) {
    if (a.size() != b.size()) throw ShapeError(std::string("shape mismatch in ") + what);
}

}  // namespace

void adam_step(Network& net, const Gradients& grads, AdamState& opt) {
    auto& layers = net.layers();
    if (grads.layers.size() != layers.size() || opt.m.size() != layers.size())
        throw ShapeError("gradients/optimizer do not match the network layer count");

    opt.step_count += 1;
    const double b1p = std::pow(opt.beta1, static_cast<double>(opt.step_count));
    const double b2p = std::pow(opt.beta2, static_cast<double>(opt.step_count));

    for (std::size_t l = 0; l < layers.size(); ++l) {
        DenseLayer& layer = layers[l];
        const TensorBundle& g = grads.layers[l];
        TensorBundle& m = opt.m[l];
        TensorBundle& v = opt.v[l];
        check_congruent(g.weights, layer.weights, "weights");
        check_congruent(g.biases, layer.biases, "biases");
        check_congruent(g.gain, layer.bn.gain, "bn gain");
        check_congruent(g.shift, layer.bn.shift, "bn shift");

        auto update = [&](std::vector<double>& p, std::vector<double>& pm, std::vector<double>& pv,
                          const std::vector<double>& pg) {
            kernels::adam_update(p.data(), pm.data(), pv.data(), pg.data(), p.size(), opt.alpha,
                                 opt.beta1, opt.beta2, opt.epsilon, b1p, b2p);
        };
        update(layer.weights, m.weights, v.weights, g.weights);
        update(layer.biases, m.biases, v.biases, g.biases);
        update(layer.bn.gain, m.gain, v.gain, g.gain);
        update(layer.bn.shift, m.shift, v.shift, g.shift);
    }
}

void clone_weights(const Network& source, Network& destination) {
    if (source.sizes() != destination.sizes())
        throw ShapeError("clone_weights requires identical architectures");
    destination.layers() = source.layers();
}

// ---------------------------------------------------------------------------
// Checkpoints.
// ---------------------------------------------------------------------------

namespace {

using nlohmann::json;

json vec_to_json(const std::vector<double>& v) { return json(v); }

std::vector<double> vec_from_json(const json& j, std::size_t expected, const std::string& where) {
    if (!j.is_array() || j.size() != expected)
        throw CheckpointError("checkpoint section '" + where + "' has the wrong length");
    std::vector<double> out;
    out.reserve(expected);
    for (const auto& x : j) {
        if (!x.is_number()) throw CheckpointError("checkpoint section '" + where + "' is not numeric");
        out.push_back(x.get<double>());
    }
    return out;
}

json bundle_to_json(const TensorBundle& t) {
    return json{{"w", vec_to_json(t.weights)},
                {"b", vec_to_json(t.biases)},
                {"g", vec_to_json(t.gain)},
                {"s", vec_to_json(t.shift)}};
}

TensorBundle bundle_from_json(const json& j, const DenseLayer& shape, const std::string& where) {
    TensorBundle t;
    t.weights = vec_from_json(j.at("w"), shape.weights.size(), where + ".w");
    t.biases = vec_from_json(j.at("b"), shape.biases.size(), where + ".b");
    t.gain = vec_from_json(j.at("g"), shape.bn.gain.size(), where + ".g");
    t.shift = vec_from_json(j.at("s"), shape.bn.shift.size(), where + ".s");
    return t;
}

}  // namespace

void save_checkpoint(const Network& net, const AdamState* opt, const std::string& path,
                     const CheckpointMeta& meta) {
    json doc;
    doc["arch"] = net.sizes();
    json layers = json::array();
    for (const DenseLayer& layer : net.layers()) {
        json w = json::array();
        for (int r = 0; r < layer.out; ++r) {
            json row = json::array();
            for (int c = 0; c < layer.in; ++c)
                row.push_back(layer.weights[static_cast<std::size_t>(r) * layer.in + c]);
            w.push_back(std::move(row));
        }
        layers.push_back(json{{"w", std::move(w)},
                              {"b", vec_to_json(layer.biases)},
                              {"bn", json{{"gain", vec_to_json(layer.bn.gain)},
                                          {"shift", vec_to_json(layer.bn.shift)},
                                          {"mean", vec_to_json(layer.bn.running_mean)},
                                          {"var", vec_to_json(layer.bn.running_var)},
                                          {"eps", layer.bn.epsilon}}}});
    }
    doc["layers"] = std::move(layers);
    if (opt) {
        json a;
        a["alpha"] = opt->alpha;
        a["beta1"] = opt->beta1;
        a["beta2"] = opt->beta2;
        a["eps"] = opt->epsilon;
        a["step"] = opt->step_count;
        json mv = json::array();
        for (std::size_t l = 0; l < opt->m.size(); ++l)
            mv.push_back(json{{"m", bundle_to_json(opt->m[l])}, {"v", bundle_to_json(opt->v[l])}});
        a["layers"] = std::move(mv);
        doc["adam"] = std::move(a);
    }
    doc["meta"] = json{{"seed", meta.seed},
                       {"created", meta.created},
                       {"episodes_trained", meta.episodes_trained}};

    std::ofstream out(path);
    if (!out) throw FileError("cannot write checkpoint: " + path);
    out << doc.dump();
    out << '\n';
    if (!out) throw FileError("failed while writing checkpoint: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw FileError("cannot open checkpoint: " + path);
    json doc;
    try {
        in >> doc;
    } catch (const json::exception& e) {
        throw CheckpointError(std::string("checkpoint is not valid JSON: ") + e.what());
    }

    if (!doc.contains("arch") || !doc.at("arch").is_array())
        throw CheckpointError("checkpoint section 'arch' missing or malformed");
    std::vector<int> arch;
    for (const auto& x : doc.at("arch")) {
        if (!x.is_number_integer()) throw CheckpointError("checkpoint section 'arch' is not integral");
        arch.push_back(x.get<int>());
    }

    Checkpoint ckpt{Network(arch), std::nullopt, {}};
    if (!doc.contains("layers") || !doc.at("layers").is_array() ||
        doc.at("layers").size() != ckpt.net.layers().size())
        throw CheckpointError("checkpoint section 'layers' missing or wrong length");

    for (std::size_t l = 0; l < ckpt.net.layers().size(); ++l) {
        DenseLayer& layer = ckpt.net.layers()[l];
        const std::string where = "layers[" + std::to_string(l) + "]";
        const json& jl = doc.at("layers").at(l);
        try {
            const json& w = jl.at("w");
            if (!w.is_array() || static_cast<int>(w.size()) != layer.out)
                throw CheckpointError("checkpoint section '" + where + ".w' has the wrong shape");
            for (int r = 0; r < layer.out; ++r) {
                const json& row = w.at(r);
                if (!row.is_array() || static_cast<int>(row.size()) != layer.in)
                    throw CheckpointError("checkpoint section '" + where + ".w' has the wrong shape");
                for (int c = 0; c < layer.in; ++c)
                    layer.weights[static_cast<std::size_t>(r) * layer.in + c] = row.at(c).get<double>();
            }
            layer.biases = vec_from_json(jl.at("b"), layer.biases.size(), where + ".b");
            const json& bn = jl.at("bn");
            layer.bn.gain = vec_from_json(bn.at("gain"), layer.bn.gain.size(), where + ".bn.gain");
            layer.bn.shift = vec_from_json(bn.at("shift"), layer.bn.shift.size(), where + ".bn.shift");
            layer.bn.running_mean =
                vec_from_json(bn.at("mean"), layer.bn.running_mean.size(), where + ".bn.mean");
            layer.bn.running_var =
                vec_from_json(bn.at("var"), layer.bn.running_var.size(), where + ".bn.var");
            layer.bn.epsilon = bn.at("eps").get<double>();
        } catch (const json::exception&) {
            throw CheckpointError("checkpoint section '" + where + "' missing or malformed");
        }
    }

    if (doc.contains("adam")) {
        try {
            const json& a = doc.at("adam");
            AdamState opt = make_adam_state(ckpt.net);
            opt.alpha = a.at("alpha").get<double>();
            opt.beta1 = a.at("beta1").get<double>();
            opt.beta2 = a.at("beta2").get<double>();
            opt.epsilon = a.at("eps").get<double>();
            opt.step_count = a.at("step").get<long>();
            const json& ml = a.at("layers");
            if (!ml.is_array() || ml.size() != ckpt.net.layers().size())
                throw CheckpointError("checkpoint section 'adam.layers' has the wrong length");
            for (std::size_t l = 0; l < ml.size(); ++l) {
                const std::string where = "adam.layers[" + std::to_string(l) + "]";
                opt.m[l] = bundle_from_json(ml.at(l).at("m"), ckpt.net.layers()[l], where + ".m");
                opt.v[l] = bundle_from_json(ml.at(l).at("v"), ckpt.net.layers()[l], where + ".v");
            }
            ckpt.adam = std::move(opt);
        } catch (const json::exception&) {
            throw CheckpointError("checkpoint section 'adam' malformed");
        }
    }

    if (doc.contains("meta")) {
        try {
            const json& m = doc.at("meta");
            ckpt.meta.seed = m.value("seed", std::uint64_t{0});
            ckpt.meta.created = m.value("created", std::string{});
            ckpt.meta.episodes_trained = m.value("episodes_trained", 0L);
        } catch (const json::exception&) {
            throw CheckpointError("checkpoint section 'meta' malformed");
        }
    }
    return ckpt;
}

Checkpoint load_checkpoint(const std::string& path, const std::vector<int>& expected) {
    Checkpoint ckpt = load_checkpoint(path);
    if (ckpt.net.sizes() != expected) {
        std::string want, got;
        for (int s : expected) want += std::to_string(s) + " ";
        for (int s : ckpt.net.sizes()) got += std::to_string(s) + " ";
        throw ShapeError("checkpoint architecture [" + got + "] does not match required [" + want + "]");
    }
    return ckpt;
}

}  // namespace jg::nn
