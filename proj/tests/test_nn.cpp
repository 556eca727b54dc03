#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>

#include "jellygym/nn.hpp"

using namespace jg;
using namespace jg::nn;

namespace {

struct ParamRef {
    std::size_t layer;
    int kind;  // 0 weights, 1 biases, 2 gain, 3 shift
    std::size_t idx;
};

double& param_at(Network& net, const ParamRef& p) {
    DenseLayer& layer = net.layers()[p.layer];
    switch (p.kind) {
        case 0: return layer.weights[p.idx];
        case 1: return layer.biases[p.idx];
        case 2: return layer.bn.gain[p.idx];
        default: return layer.bn.shift[p.idx];
    }
}

double grad_at(const Gradients& g, const ParamRef& p) {
    const TensorBundle& t = g.layers[p.layer];
    switch (p.kind) {
        case 0: return t.weights[p.idx];
        case 1: return t.biases[p.idx];
        case 2: return t.gain[p.idx];
        default: return t.shift[p.idx];
    }
}

std::vector<ParamRef> trainable_params(const Network& net) {
    std::vector<ParamRef> out;
    for (std::size_t l = 0; l < net.layers().size(); ++l) {
        const DenseLayer& layer = net.layers()[l];
        for (std::size_t i = 0; i < layer.weights.size(); ++i) out.push_back({l, 0, i});
        for (std::size_t i = 0; i < layer.biases.size(); ++i) out.push_back({l, 1, i});
        if (layer.bn.active) {
            for (std::size_t i = 0; i < layer.bn.gain.size(); ++i) out.push_back({l, 2, i});
            for (std::size_t i = 0; i < layer.bn.shift.size(); ++i) out.push_back({l, 3, i});
        }
    }
    return out;
}

Network randomized_net(const std::vector<int>& sizes, Rng& rng) {
    Network net(sizes);
    net.init_weights(rng);
    for (DenseLayer& layer : net.layers()) {
        for (double& g : layer.bn.gain) g = rng.real(0.5, 1.5);
        for (double& s : layer.bn.shift) s = rng.real(-0.5, 0.5);
        for (double& m : layer.bn.running_mean) m = rng.real(-0.3, 0.3);
        for (double& v : layer.bn.running_var) v = rng.real(0.5, 2.0);
    }
    return net;
}

// Central finite difference of a loss over one parameter; the loss gets a
// private copy of the network each evaluation.
double central_difference(const Network& net, const ParamRef& p,
                          const std::function<double(Network&)>& loss, double h = 1e-5) {
    Network plus = net;
    param_at(plus, p) += h;
    Network minus = net;
    param_at(minus, p) -= h;
    return (loss(plus) - loss(minus)) / (2.0 * h);
}

bool grad_close(double analytic, double numeric, double rel = 1e-4, double abs_floor = 1e-6) {
    return std::fabs(analytic - numeric) <= std::max(abs_floor, rel * std::fabs(numeric));
}

}  // namespace

TEST_CASE("forward yields a probability vector") {
    Rng rng(1);
    Network net;
    net.init_weights(rng);
    std::vector<double> x(82);
    for (double& v : x) v = rng.real(-1.0, 1.0);
    Forward fwd = net.forward(x, Mode::Infer);
    REQUIRE(fwd.probs.size() == 324);
    double sum = 0.0;
    for (double p : fwd.probs) {
        CHECK(p >= 0.0);
        sum += p;
    }
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("a zero network is maximally uncertain") {
    Network net;  // zero weights and biases by construction
    std::vector<double> x(82, 0.37);
    Forward fwd = net.forward(x, Mode::Infer);
    for (double p : fwd.probs) CHECK(p == doctest::Approx(1.0 / 324).epsilon(1e-12));
}

TEST_CASE("scaling the input changes logits but not shapes") {
    Rng rng(2);
    Network net;
    net.init_weights(rng);
    std::vector<double> x(82), x2(82);
    for (int i = 0; i < 82; ++i) {
        x[i] = rng.real(-1.0, 1.0);
        x2[i] = 2.0 * x[i];
    }
    Forward a = net.forward(x, Mode::Infer);
    Forward b = net.forward(x2, Mode::Infer);
    CHECK(a.logits.size() == b.logits.size());
    CHECK(a.logits != b.logits);
}

TEST_CASE("forward rejects wrong input lengths") {
    Network net;
    std::vector<double> x(81);
    CHECK_THROWS_AS(net.forward(x, Mode::Infer), ShapeError);
}

TEST_CASE("softmax probabilities are shift invariant through the head bias") {
    Rng rng(3);
    Network net = randomized_net({6, 5, 4}, rng);
    std::vector<double> x(6);
    for (double& v : x) v = rng.real(-1.0, 1.0);
    Forward before = net.forward(x, Mode::Infer);
    for (double& b : net.layers().back().biases) b += 3.17;
    Forward after = net.forward(x, Mode::Infer);
    for (std::size_t i = 0; i < before.probs.size(); ++i)
        CHECK(before.probs[i] == doctest::Approx(after.probs[i]).epsilon(1e-12));
}

TEST_CASE("backward needs a train cache and zero upstream gives zero grads") {
    Rng rng(4);
    Network net = randomized_net({6, 5, 4}, rng);
    std::vector<double> x(6, 0.2);
    Forward infer = net.forward(x, Mode::Infer);
    std::vector<double> zero(4, 0.0);
    CHECK_THROWS_AS(net.backward(infer.cache, zero), ModeError);

    Forward train = net.forward(x, Mode::Train);
    Gradients g = net.backward(train.cache, zero);
    for (const TensorBundle& t : g.layers) {
        for (double v : t.weights) CHECK(v == 0.0);
        for (double v : t.biases) CHECK(v == 0.0);
        for (double v : t.gain) CHECK(v == 0.0);
        for (double v : t.shift) CHECK(v == 0.0);
    }
}

TEST_CASE("identical caches give identical gradients") {
    Rng rng(5);
    Network net = randomized_net({7, 6, 5}, rng);
    std::vector<double> x(7), up(5);
    for (double& v : x) v = rng.real(-1.0, 1.0);
    for (double& v : up) v = rng.real(-1.0, 1.0);
    Forward f1 = net.forward(x, Mode::Train);
    Forward f2 = net.forward(x, Mode::Train);
    Gradients g1 = net.backward(f1.cache, up);
    Gradients g2 = net.backward(f2.cache, up);
    for (std::size_t l = 0; l < g1.layers.size(); ++l) {
        CHECK(g1.layers[l].weights == g2.layers[l].weights);
        CHECK(g1.layers[l].gain == g2.layers[l].gain);
    }
}

TEST_CASE("analytic gradients match central differences, MSE head, single sample") {
    Rng rng(6);
    Network net = randomized_net({6, 5, 7, 4}, rng);
    std::vector<double> x(6), target(4);
    for (double& v : x) v = rng.real(-1.0, 1.0);
    for (double& v : target) v = rng.real(-1.0, 2.0);

    auto loss_of = [&](Network& n) {
        Forward f = n.forward(x, Mode::Train);
        return mse_loss(f.probs, target).loss;
    };
    Forward f = net.forward(x, Mode::Train);
    LossValue mse = mse_loss(f.probs, target);
    Gradients analytic = net.backward(f.cache, softmax_pullback(f.probs, mse.gradient));

    int checked = 0;
    for (const ParamRef& p : trainable_params(net)) {
        double fd = central_difference(net, p, loss_of);
        CHECK_MESSAGE(grad_close(grad_at(analytic, p), fd),
                      "layer " << p.layer << " kind " << p.kind << " idx " << p.idx);
        ++checked;
    }
    CHECK(checked >= 100);
}

TEST_CASE("analytic gradients match central differences, cross-entropy head") {
    Rng rng(7);
    Network net = randomized_net({5, 6, 4}, rng);
    std::vector<double> x(5);
    for (double& v : x) v = rng.real(-1.0, 1.0);
    const int target = 2;

    auto loss_of = [&](Network& n) {
        Forward f = n.forward(x, Mode::Train);
        return cross_entropy_loss(f.probs, target).loss;
    };
    Forward f = net.forward(x, Mode::Train);
    Gradients analytic = net.backward(f.cache, cross_entropy_loss(f.probs, target).gradient);

    for (const ParamRef& p : trainable_params(net))
        CHECK(grad_close(grad_at(analytic, p), central_difference(net, p, loss_of)));
}

TEST_CASE("analytic gradients match central differences through batch statistics") {
    Rng rng(8);
    Network net = randomized_net({5, 6, 4}, rng);
    const int batch = 5;
    std::vector<double> X(5 * batch);
    for (double& v : X) v = rng.real(-1.0, 1.0);
    std::vector<int> targets{0, 3, 1, 2, 3};

    auto loss_of = [&](Network& n) {
        Forward f = n.forward_batch(X, batch, Mode::Train);
        double total = 0.0;
        for (int s = 0; s < batch; ++s)
            total += -std::log(f.probs[static_cast<std::size_t>(s) * 4 + targets[s]]);
        return total / batch;
    };

    Network work = net;
    Forward f = work.forward_batch(X, batch, Mode::Train);
    std::vector<double> grad_logits(f.probs.size());
    for (int s = 0; s < batch; ++s)
        for (int j = 0; j < 4; ++j) {
            std::size_t i = static_cast<std::size_t>(s) * 4 + j;
            grad_logits[i] = (f.probs[i] - (j == targets[s] ? 1.0 : 0.0)) / batch;
        }
    Gradients analytic = work.backward(f.cache, grad_logits);

    for (const ParamRef& p : trainable_params(net))
        CHECK(grad_close(grad_at(analytic, p), central_difference(net, p, loss_of)));
}

TEST_CASE("mse_loss values and gradients") {
    std::vector<double> v{0.3, -0.7, 1.1};
    LossValue same = mse_loss(v, v);
    CHECK(same.loss == 0.0);
    for (double g : same.gradient) CHECK(g == 0.0);

    std::vector<double> pred{1.0, 0.0}, target{0.0, 0.0};
    LossValue l = mse_loss(pred, target);
    CHECK(l.loss == doctest::Approx(0.5));
    CHECK(l.gradient[0] == doctest::Approx(1.0));
    CHECK(l.gradient[1] == doctest::Approx(0.0));

    // Independent recomputation by direct summation.
    Rng rng(9);
    std::vector<double> a(17), b(17);
    for (int i = 0; i < 17; ++i) {
        a[i] = rng.real(-2.0, 2.0);
        b[i] = rng.real(-2.0, 2.0);
    }
    double direct = 0.0;
    for (int i = 0; i < 17; ++i) direct += (a[i] - b[i]) * (a[i] - b[i]);
    direct /= 17.0;
    CHECK(mse_loss(a, b).loss == doctest::Approx(direct).epsilon(1e-12));

    std::vector<double> short_vec{1.0};
    CHECK_THROWS_AS(mse_loss(a, short_vec), ShapeError);
}

TEST_CASE("cross_entropy_loss values") {
    std::vector<double> certain(324, 0.0);
    certain[17] = 1.0;
    CHECK(cross_entropy_loss(certain, 17).loss == doctest::Approx(0.0));

    std::vector<double> uniform(324, 1.0 / 324);
    CHECK(cross_entropy_loss(uniform, 100).loss == doctest::Approx(std::log(324.0)).epsilon(1e-9));
    CHECK(cross_entropy_loss(uniform, 100).loss == doctest::Approx(5.7807).epsilon(1e-4));

    CHECK_THROWS_AS(cross_entropy_loss(uniform, 324), IndexError);
    CHECK_THROWS_AS(cross_entropy_loss(uniform, -1), IndexError);
}

TEST_CASE("adam: zero gradients leave a fresh optimizer's parameters unchanged") {
    Rng rng(10);
    Network net = randomized_net({5, 4, 3}, rng);
    Network before = net;
    AdamState opt = make_adam_state(net);
    adam_step(net, net.zero_gradients(), opt);
    for (std::size_t l = 0; l < net.layers().size(); ++l) {
        CHECK(net.layers()[l].weights == before.layers()[l].weights);
        CHECK(net.layers()[l].biases == before.layers()[l].biases);
    }
    CHECK(opt.step_count == 1);
}

TEST_CASE("adam: hand-computed first step on a single parameter") {
    Network net({1, 1});  // zero-initialized single weight
    AdamState opt = make_adam_state(net, 1e-3);
    Gradients g = net.zero_gradients();
    g.layers[0].weights[0] = 1.0;
    adam_step(net, g, opt);
    // Bias-corrected first step: -alpha * g / (|g| + eps).
    CHECK(net.layers()[0].weights[0] == doctest::Approx(-1e-3).epsilon(1e-6));
}

TEST_CASE("adam: repeated identical gradients march monotonically downhill") {
    Network net({1, 1});
    AdamState opt = make_adam_state(net, 1e-3);
    double prev = 0.0;
    for (int i = 0; i < 10; ++i) {
        Gradients g = net.zero_gradients();
        g.layers[0].weights[0] = 2.5;
        adam_step(net, g, opt);
        CHECK(net.layers()[0].weights[0] < prev);
        prev = net.layers()[0].weights[0];
    }
}

TEST_CASE("adam rejects mismatched shapes") {
    Network net({5, 4, 3});
    Network other({5, 5, 3});
    AdamState opt = make_adam_state(net);
    Gradients wrong = other.zero_gradients();
    CHECK_THROWS_AS(adam_step(net, wrong, opt), ShapeError);
}

TEST_CASE("clone_weights copies state and severs the link") {
    Rng rng(11);
    Network a = randomized_net({82, 100, 200, 324}, rng);
    Network b;
    clone_weights(a, b);

    std::vector<double> x(82);
    for (double& v : x) v = rng.real(-1.0, 1.0);
    CHECK(a.forward(x, Mode::Infer).probs == b.forward(x, Mode::Infer).probs);

    // Mutating the source must not leak into the clone.
    a.layers()[0].weights[0] += 1.0;
    CHECK(a.forward(x, Mode::Infer).probs != b.forward(x, Mode::Infer).probs);

    // Cloning twice is idempotent.
    Network c, d;
    clone_weights(b, c);
    clone_weights(b, d);
    CHECK(c.layers()[1].weights == d.layers()[1].weights);

    Network small({5, 4});
    CHECK_THROWS_AS(clone_weights(a, small), ShapeError);
}

TEST_CASE("batch-norm train output matches shift and gain moments") {
    Rng rng(12);
    Network net = randomized_net({10, 8, 4}, rng);
    const int batch = 64;
    std::vector<double> X(10 * batch);
    for (double& v : X) v = rng.real(-2.0, 2.0);
    Forward f = net.forward_batch(X, batch, Mode::Train);

    const DenseLayer& layer = net.layers()[0];
    const std::vector<double>& y = f.cache.layers[0].pre_act;
    for (int feat = 0; feat < 8; ++feat) {
        double mean = 0.0;
        for (int s = 0; s < batch; ++s) mean += y[static_cast<std::size_t>(s) * 8 + feat];
        mean /= batch;
        double var = 0.0;
        for (int s = 0; s < batch; ++s) {
            double d = y[static_cast<std::size_t>(s) * 8 + feat] - mean;
            var += d * d;
        }
        var /= batch;
        CHECK(mean == doctest::Approx(layer.bn.shift[feat]).epsilon(1e-6));
        CHECK(var == doctest::Approx(layer.bn.gain[feat] * layer.bn.gain[feat]).epsilon(1e-6));
    }
}

TEST_CASE("single-sample train forwards use running statistics and stay const") {
    Rng rng(13);
    Network net = randomized_net({6, 5, 4}, rng);
    Network before = net;
    std::vector<double> x(6, 0.5);
    Forward train = net.forward(x, Mode::Train);
    Forward infer = net.forward(x, Mode::Infer);
    CHECK(train.probs == infer.probs);  // same normalization path
    CHECK(net.layers()[0].bn.running_mean == before.layers()[0].bn.running_mean);
}

TEST_CASE("training trajectories are deterministic given a seed") {
    auto run = [] {
        Rng rng(14);
        Network net = randomized_net({8, 6, 5}, rng);
        AdamState opt = make_adam_state(net);
        std::vector<double> x(8), target(5, 0.2);
        for (double& v : x) v = rng.real(-1.0, 1.0);
        for (int i = 0; i < 25; ++i) {
            Forward f = net.forward(x, Mode::Train);
            LossValue l = mse_loss(f.probs, target);
            adam_step(net, net.backward(f.cache, softmax_pullback(f.probs, l.gradient)), opt);
        }
        return net;
    };
    Network a = run(), b = run();
    for (std::size_t l = 0; l < a.layers().size(); ++l)
        CHECK(a.layers()[l].weights == b.layers()[l].weights);
}

TEST_CASE("checkpoint round trip is bit-exact and validates its input") {
    namespace fs = std::filesystem;
    Rng rng(15);
    Network net = randomized_net({82, 100, 200, 324}, rng);
    AdamState opt = make_adam_state(net);
    // A couple of updates so moments are non-trivial.
    std::vector<double> x(82, 0.1), target(324, 0.0);
    for (int i = 0; i < 3; ++i) {
        Forward f = net.forward(x, Mode::Train);
        LossValue l = mse_loss(f.probs, target);
        adam_step(net, net.backward(f.cache, softmax_pullback(f.probs, l.gradient)), opt);
    }

    fs::path dir = fs::temp_directory_path() / "jellygym_nn_test";
    fs::create_directories(dir);
    std::string path = (dir / "ckpt.json").string();
    CheckpointMeta meta;
    meta.seed = 15;
    meta.created = "unit-test";
    meta.episodes_trained = 3;
    save_checkpoint(net, &opt, path, meta);

    Checkpoint loaded = load_checkpoint(path);
    CHECK(loaded.net.sizes() == net.sizes());
    CHECK(loaded.meta.episodes_trained == 3);
    REQUIRE(loaded.adam.has_value());
    CHECK(loaded.adam->step_count == opt.step_count);

    std::vector<double> probe(82);
    for (double& v : probe) v = rng.real(-1.0, 1.0);
    CHECK(net.forward(probe, Mode::Infer).probs == loaded.net.forward(probe, Mode::Infer).probs);

    // Truncation corrupts the document.
    std::ifstream in(path);
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    in.close();
    std::string cut = (dir / "cut.json").string();
    std::ofstream out(cut);
    out << text.substr(0, text.size() / 2);
    out.close();
    CHECK_THROWS_AS(load_checkpoint(cut), CheckpointError);

    // Architecture pinning.
    CHECK_THROWS_AS(load_checkpoint(path, std::vector<int>{82, 50, 324}), ShapeError);
    CHECK_NOTHROW(load_checkpoint(path, kAgentArchitecture));
}
