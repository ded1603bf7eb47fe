#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "fimcb/tensor.hpp"

namespace fimcb {

/// Three conv blocks (3x3, stride 1, pad 1 -> ReLU -> 2x2 max pool), global
/// average pooling, then a linear head with one logit per class.
struct SmallCNN {
    static constexpr int kInChannels = 3;
    static constexpr std::array<int, 3> kChannels{8, 16, 32};
    static constexpr int kClasses = 2;

    std::array<Tensor, 3> conv_w; // [oc][ic][3][3]
    std::array<Tensor, 3> conv_b; // [oc]
    Tensor fc_w;                  // [kClasses][kChannels[2]]
    Tensor fc_b;                  // [kClasses]

    SmallCNN();

    std::vector<Tensor*> parameters();
    std::vector<const Tensor*> parameters() const;

    friend bool operator==(const SmallCNN&, const SmallCNN&) = default;
};

/// Uniform(-sqrt(6/fan_in), +sqrt(6/fan_in)) weights, zero biases. Parameter
/// tensors are filled in the order reported by parameters().
void init_params(SmallCNN& net, std::uint64_t seed);

/// batch has shape [N, 3, S, S] with S >= 8; returns logits [N, 2].
Tensor forward(const SmallCNN& net, const Tensor& batch);

/// Row-wise softmax of a [N, K] tensor, computed with max subtraction.
Tensor softmax(const Tensor& logits);

/// Argmax per row; ties resolve to the lowest class index.
std::vector<int> predict(const Tensor& logits);

/// Mean negative log-likelihood of the true classes under softmax(logits).
double cross_entropy(const Tensor& logits, const std::vector<int>& labels);

struct BackwardResult {
    double loss = 0.0;
    std::vector<Tensor> grads; // aligned with SmallCNN::parameters()
};

/// Forward + analytic backward pass; gradients of the mean loss over the
/// batch. Input gradients are not computed.
BackwardResult backward(const SmallCNN& net, const Tensor& batch,
                        const std::vector<int>& labels);

struct SGDConfig {
    double momentum = 0.0;
    double weight_decay = 0.0;
};

/// v <- momentum*v + g + weight_decay*theta; theta <- theta - eta*v.
/// velocity is created zero-filled on first use.
void sgd_step(SmallCNN& net, const std::vector<Tensor>& grads,
              std::vector<Tensor>& velocity, const SGDConfig& config,
              double eta);

struct CosineSchedule {
    double lr0 = 0.1;
    double lr_min = 0.0;
    int total_epochs = 50;
};

/// lr_min + 0.5*(lr0 - lr_min)*(1 + cos(pi*t/T)) for t in [0, T].
double cosine_lr(const CosineSchedule& schedule, int t);

struct Checkpoint {
    SmallCNN net;
    int epoch = 0;
    double lr0 = 0.0;
    double momentum = 0.0;
    double weight_decay = 0.0;
};

/// Versioned little-endian binary blob with a trailing FNV-1a checksum.
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

} // namespace fimcb
