#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <vector>

#include <fimcb/errors.hpp>
#include <fimcb/model.hpp>
#include <fimcb/rng.hpp>

#include "testutil.hpp"

using namespace fimcb;
using fimcb::testutil::TempDir;

namespace {

Tensor random_batch(int n, int side, std::uint64_t seed) {
    Tensor batch({static_cast<std::size_t>(n), 3, static_cast<std::size_t>(side),
                  static_cast<std::size_t>(side)});
    Rng rng(seed);
    for (auto& v : batch.values()) v = rng.uniform();
    return batch;
}

std::vector<int> random_labels(int n, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<int> labels(n);
    for (auto& l : labels) l = static_cast<int>(rng.uniform_int(std::uint64_t{2}));
    return labels;
}

} // namespace

TEST_CASE("tensor: shape bookkeeping and equality") {
    Tensor t({2, 3}, 1.5);
    CHECK(t.numel() == 6);
    CHECK(t.shape() == std::vector<std::size_t>{2, 3});
    CHECK(t[4] == 1.5);
    t[4] = 2.0;
    Tensor u({2, 3}, 1.5);
    CHECK(!(t == u));
    u[4] = 2.0;
    CHECK(t == u);
    CHECK_THROWS(Tensor(std::vector<std::size_t>{}));
}

TEST_CASE("softmax: rows sum to one and shifts cancel") {
    Tensor logits({3, 2});
    logits[0] = 1.0;
    logits[1] = 2.0;
    logits[2] = -5.0;
    logits[3] = 5.0;
    logits[4] = 1000.0; // overflow-prone without max subtraction
    logits[5] = 1000.0;
    const Tensor p = softmax(logits);
    for (int row = 0; row < 3; ++row) {
        CHECK(p[2 * row] + p[2 * row + 1] == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(p[2 * row] >= 0.0);
    }
    CHECK(p[4] == doctest::Approx(0.5));

    Tensor shifted = logits;
    for (std::size_t i = 0; i < shifted.numel(); ++i) shifted[i] += 123.0;
    const Tensor q = softmax(shifted);
    for (std::size_t i = 0; i < p.numel(); ++i) {
        CHECK(q[i] == doctest::Approx(p[i]).epsilon(1e-12));
    }
}

TEST_CASE("predict: argmax with ties to the lowest index") {
    Tensor logits({3, 2});
    logits[0] = 0.2; // row 0: class 1
    logits[1] = 0.7;
    logits[2] = 1.5; // row 1: class 0
    logits[3] = -1.5;
    logits[4] = 0.3; // row 2: tie, class 0
    logits[5] = 0.3;
    CHECK(predict(logits) == std::vector<int>{1, 0, 0});
}

TEST_CASE("cross_entropy: hand-checked values") {
    Tensor even({1, 2});
    CHECK(cross_entropy(even, {0}) == doctest::Approx(std::log(2.0)).epsilon(1e-12));
    CHECK(cross_entropy(even, {1}) == doctest::Approx(std::log(2.0)).epsilon(1e-12));

    Tensor confident({1, 2});
    confident[0] = 100.0;
    confident[1] = -100.0;
    CHECK(cross_entropy(confident, {0}) == doctest::Approx(0.0).epsilon(1e-12));

    Tensor mild({1, 2});
    mild[0] = 1.0;
    mild[1] = 0.0;
    // -log(e / (e + 1)) = log(1 + e^-1) = 0.31326...
    CHECK(cross_entropy(mild, {0}) == doctest::Approx(std::log(1.0 + std::exp(-1.0))));

    Tensor two({2, 2});
    two[0] = 1.0;
    two[3] = 1.0;
    // mean of the two single-sample losses
    CHECK(cross_entropy(two, {0, 1}) == doctest::Approx(std::log(1.0 + std::exp(-1.0))));

    CHECK_THROWS(cross_entropy(even, {0, 1}));       // label count mismatch
    CHECK_THROWS(cross_entropy(even, {2}));          // label out of range
}

TEST_CASE("init_params: bounds, zero biases, determinism") {
    SmallCNN a;
    SmallCNN b;
    init_params(a, 99);
    init_params(b, 99);
    CHECK(a == b);
    init_params(b, 100);
    CHECK(!(a == b));

    // fan_in per tensor: conv0 3*9=27, conv1 8*9=72, conv2 16*9=144, fc 32
    const double bounds[] = {std::sqrt(6.0 / 27.0), std::sqrt(6.0 / 72.0),
                             std::sqrt(6.0 / 144.0), std::sqrt(6.0 / 32.0)};
    const Tensor* weights[] = {&a.conv_w[0], &a.conv_w[1], &a.conv_w[2], &a.fc_w};
    for (int k = 0; k < 4; ++k) {
        double max_abs = 0.0;
        for (std::size_t i = 0; i < weights[k]->numel(); ++i) {
            max_abs = std::max(max_abs, std::abs((*weights[k])[i]));
        }
        CHECK(max_abs <= bounds[k]);
        CHECK(max_abs > 0.5 * bounds[k]); // the draw actually spans the range
    }
    for (const Tensor* bias : {&a.conv_b[0], &a.conv_b[1], &a.conv_b[2], &a.fc_b}) {
        for (std::size_t i = 0; i < bias->numel(); ++i) CHECK((*bias)[i] == 0.0);
    }
}

TEST_CASE("forward: shape checks and batch structure") {
    SmallCNN net;
    init_params(net, 1);
    const Tensor batch = random_batch(4, 16, 5);
    const Tensor logits = forward(net, batch);
    REQUIRE(logits.shape() == std::vector<std::size_t>{4, 2});

    CHECK_THROWS(forward(net, Tensor({4, 1, 16, 16})));
    CHECK_THROWS(forward(net, Tensor({4, 3, 4, 4}))); // below the min side
    CHECK_THROWS(forward(net, Tensor({4, 3, 16})));
}

TEST_CASE("forward: zero weights leave only the head bias") {
    SmallCNN net; // default tensors are zero-filled
    net.fc_b[0] = 0.7;
    net.fc_b[1] = -0.2;
    const Tensor logits = forward(net, random_batch(3, 8, 9));
    for (int i = 0; i < 3; ++i) {
        CHECK(logits[2 * i] == doctest::Approx(0.7).epsilon(1e-12));
        CHECK(logits[2 * i + 1] == doctest::Approx(-0.2).epsilon(1e-12));
    }
}

TEST_CASE("forward: per-sample independence") {
    SmallCNN net;
    init_params(net, 3);
    const Tensor a = random_batch(1, 12, 7);
    const Tensor b = random_batch(1, 12, 8);

    // batch [a, b] and batch [b, a] swap logit rows exactly
    Tensor ab({2, 3, 12, 12});
    Tensor ba({2, 3, 12, 12});
    const std::size_t sample = a.numel();
    for (std::size_t i = 0; i < sample; ++i) {
        ab[i] = a[i];
        ab[sample + i] = b[i];
        ba[i] = b[i];
        ba[sample + i] = a[i];
    }
    const Tensor lab = forward(net, ab);
    const Tensor lba = forward(net, ba);
    CHECK(lab[0] == lba[2]);
    CHECK(lab[1] == lba[3]);
    CHECK(lab[2] == lba[0]);

    // duplicated sample gives duplicated rows
    Tensor aa({2, 3, 12, 12});
    for (std::size_t i = 0; i < sample; ++i) {
        aa[i] = a[i];
        aa[sample + i] = a[i];
    }
    const Tensor laa = forward(net, aa);
    CHECK(laa[0] == laa[2]);
    CHECK(laa[1] == laa[3]);
}

TEST_CASE("backward: loss matches forward cross entropy") {
    SmallCNN net;
    init_params(net, 11);
    const Tensor batch = random_batch(4, 12, 21);
    const auto labels = random_labels(4, 22);
    const BackwardResult result = backward(net, batch, labels);
    CHECK(result.loss ==
          doctest::Approx(cross_entropy(forward(net, batch), labels)).epsilon(1e-12));
    REQUIRE(result.grads.size() == 8);
    auto params = net.parameters();
    for (std::size_t i = 0; i < result.grads.size(); ++i) {
        CHECK(result.grads[i].shape() == params[i]->shape());
    }
}

TEST_CASE("backward: duplicating the batch leaves mean gradients unchanged") {
    SmallCNN net;
    init_params(net, 13);
    const Tensor batch = random_batch(3, 12, 31);
    const auto labels = random_labels(3, 32);

    Tensor doubled({6, 3, 12, 12});
    const std::size_t half = batch.numel();
    for (std::size_t i = 0; i < half; ++i) {
        doubled[i] = batch[i];
        doubled[half + i] = batch[i];
    }
    std::vector<int> doubled_labels = labels;
    doubled_labels.insert(doubled_labels.end(), labels.begin(), labels.end());

    const BackwardResult g1 = backward(net, batch, labels);
    const BackwardResult g2 = backward(net, doubled, doubled_labels);
    CHECK(g1.loss == doctest::Approx(g2.loss).epsilon(1e-12));
    for (std::size_t k = 0; k < g1.grads.size(); ++k) {
        for (std::size_t i = 0; i < g1.grads[k].numel(); ++i) {
            CHECK(g1.grads[k][i] == doctest::Approx(g2.grads[k][i]).epsilon(1e-10));
        }
    }
}

TEST_CASE("backward: gradients match central finite differences") {
    SmallCNN net;
    init_params(net, 17);
    const Tensor batch = random_batch(4, 16, 41);
    const auto labels = random_labels(4, 42);
    const BackwardResult analytic = backward(net, batch, labels);

    auto params = net.parameters();
    Rng pick(43);
    const double h = 1e-5;
    int checked = 0;
    for (int trial = 0; trial < 200; ++trial) {
        const auto t = static_cast<std::size_t>(pick.uniform_int(std::uint64_t{params.size()}));
        const auto i = static_cast<std::size_t>(pick.uniform_int(std::uint64_t{params[t]->numel()}));
        const double saved = (*params[t])[i];

        (*params[t])[i] = saved + h;
        const double up = cross_entropy(forward(net, batch), labels);
        (*params[t])[i] = saved - h;
        const double down = cross_entropy(forward(net, batch), labels);
        (*params[t])[i] = saved;

        const double numeric = (up - down) / (2.0 * h);
        const double got = analytic.grads[t][i];
        const double denom = std::max({std::abs(numeric), std::abs(got), 1e-8});
        CHECK(std::abs(numeric - got) / denom < 1e-4);
        ++checked;
    }
    CHECK(checked == 200);
}

TEST_CASE("sgd_step: worked two-step example with momentum") {
    // theta=1, g=1, m=0.1, eta=0.1, no decay:
    // step 1: v=1, theta=0.9; step 2: v=1.1, theta=0.79
    SmallCNN net;
    net.fc_b[0] = 1.0;
    std::vector<Tensor> grads;
    for (const Tensor* p : std::as_const(net).parameters()) {
        grads.emplace_back(p->shape(), 0.0);
    }
    grads[7][0] = 1.0; // fc_b gradient

    std::vector<Tensor> velocity;
    SGDConfig cfg{0.1, 0.0};
    sgd_step(net, grads, velocity, cfg, 0.1);
    CHECK(net.fc_b[0] == doctest::Approx(0.9).epsilon(1e-12));
    sgd_step(net, grads, velocity, cfg, 0.1);
    CHECK(net.fc_b[0] == doctest::Approx(0.79).epsilon(1e-12));
}

TEST_CASE("sgd_step: weight decay pulls parameters toward zero") {
    SmallCNN net;
    net.fc_b[0] = 2.0;
    std::vector<Tensor> grads;
    for (const Tensor* p : std::as_const(net).parameters()) {
        grads.emplace_back(p->shape(), 0.0);
    }
    std::vector<Tensor> velocity;
    SGDConfig cfg{0.0, 0.5};
    sgd_step(net, grads, velocity, cfg, 0.1);
    // v = 0.5 * 2.0 = 1.0; theta = 2.0 - 0.1 = 1.9
    CHECK(net.fc_b[0] == doctest::Approx(1.9).epsilon(1e-12));
}

TEST_CASE("sgd_step: zero gradients and zero decay change nothing") {
    SmallCNN net;
    init_params(net, 19);
    const SmallCNN before = net;
    std::vector<Tensor> grads;
    for (const Tensor* p : std::as_const(net).parameters()) {
        grads.emplace_back(p->shape(), 0.0);
    }
    std::vector<Tensor> velocity;
    sgd_step(net, grads, velocity, SGDConfig{0.9, 0.0}, 1.0);
    CHECK(net == before);
}

TEST_CASE("cosine_lr: endpoints and midpoint") {
    CosineSchedule s{0.1, 0.001, 10};
    CHECK(cosine_lr(s, 0) == doctest::Approx(0.1).epsilon(1e-12));
    CHECK(cosine_lr(s, 10) == doctest::Approx(0.001).epsilon(1e-12));
    CHECK(cosine_lr(s, 5) == doctest::Approx(0.0505).epsilon(1e-12));
    // monotone nonincreasing across the schedule
    double prev = cosine_lr(s, 0);
    for (int t = 1; t <= 10; ++t) {
        const double cur = cosine_lr(s, t);
        CHECK(cur <= prev);
        prev = cur;
    }
    CHECK_THROWS(cosine_lr(s, -1));
    CHECK_THROWS(cosine_lr(s, 11));
    CHECK_THROWS(cosine_lr(CosineSchedule{0.1, 0.0, 0}, 0));
}

TEST_CASE("training drives a separable toy problem to zero error") {
    // class 0: bright red channel; class 1: bright blue channel
    const int n = 16;
    const int side = 8;
    Tensor batch({n, 3, side, side});
    std::vector<int> labels(n);
    Rng rng(55);
    const std::size_t plane = static_cast<std::size_t>(side) * side;
    for (int s = 0; s < n; ++s) {
        labels[s] = s % 2;
        const std::size_t base = static_cast<std::size_t>(s) * 3 * plane;
        const std::size_t hot = labels[s] == 0 ? 0 : 2;
        for (std::size_t i = 0; i < plane; ++i) {
            batch[base + hot * plane + i] = 0.8 + 0.2 * rng.uniform();
            batch[base + 1 * plane + i] = 0.1 * rng.uniform();
            batch[base + (2 - hot) * plane + i] = 0.1 * rng.uniform();
        }
    }

    SmallCNN net;
    init_params(net, 77);
    std::vector<Tensor> velocity;
    const SGDConfig cfg{0.05, 0.0};
    double loss = 0.0;
    for (int epoch = 0; epoch < 150; ++epoch) {
        const BackwardResult result = backward(net, batch, labels);
        loss = result.loss;
        sgd_step(net, result.grads, velocity, cfg, 0.1);
    }
    CHECK(loss < 0.05);
    CHECK(predict(forward(net, batch)) == labels);
}

TEST_CASE("checkpoint: round trip preserves everything") {
    TempDir tmp;
    Checkpoint ckpt;
    init_params(ckpt.net, 123);
    ckpt.epoch = 17;
    ckpt.lr0 = 0.05;
    ckpt.momentum = 0.1;
    ckpt.weight_decay = 1e-5;

    const auto path = tmp / "model.ckpt";
    save_checkpoint(path, ckpt);
    const Checkpoint loaded = load_checkpoint(path);
    CHECK(loaded.net == ckpt.net);
    CHECK(loaded.epoch == 17);
    CHECK(loaded.lr0 == 0.05);
    CHECK(loaded.momentum == 0.1);
    CHECK(loaded.weight_decay == 1e-5);
}

TEST_CASE("checkpoint: corruption and absence are detected") {
    TempDir tmp;
    Checkpoint ckpt;
    init_params(ckpt.net, 5);
    const auto path = tmp / "model.ckpt";
    save_checkpoint(path, ckpt);

    // flip a payload byte: the trailing checksum must catch it
    std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
    f.seekp(64);
    char byte = 0;
    f.read(&byte, 1);
    f.seekp(64);
    byte = static_cast<char>(byte ^ 0x40);
    f.write(&byte, 1);
    f.close();
    CHECK_THROWS_AS(load_checkpoint(path), ConfigError);

    CHECK_THROWS_AS(load_checkpoint(tmp / "absent.ckpt"), IoError);

    // truncation
    save_checkpoint(path, ckpt);
    std::filesystem::resize_file(path, 40);
    CHECK_THROWS_AS(load_checkpoint(path), ConfigError);
}
