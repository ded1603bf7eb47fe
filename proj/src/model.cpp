#include "fimcb/model.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <string>

#include "fimcb/errors.hpp"
#include "fimcb/rng.hpp"

namespace fimcb {

namespace {

constexpr std::size_t kN0 = static_cast<std::size_t>(SmallCNN::kChannels[0]);
constexpr std::size_t kN1 = static_cast<std::size_t>(SmallCNN::kChannels[1]);
constexpr std::size_t kN2 = static_cast<std::size_t>(SmallCNN::kChannels[2]);
constexpr std::size_t kIn = static_cast<std::size_t>(SmallCNN::kInChannels);
constexpr std::size_t kK = static_cast<std::size_t>(SmallCNN::kClasses);

/// 3x3 convolution, stride 1, zero padding 1, for one sample.
/// The inner loop is a contiguous row saxpy so it auto-vectorizes.
void conv3x3_plane(const double* in, std::size_t c_in, std::size_t h,
                   std::size_t w, const double* weights, const double* bias,
                   std::size_t c_out, double* out) {
    const std::size_t plane = h * w;
    for (std::size_t oc = 0; oc < c_out; ++oc) {
        double* out_plane = out + oc * plane;
        std::fill(out_plane, out_plane + plane, bias[oc]);
        for (std::size_t ic = 0; ic < c_in; ++ic) {
            const double* in_plane = in + ic * plane;
            const double* wk = weights + (oc * c_in + ic) * 9;
            for (std::size_t ky = 0; ky < 3; ++ky) {
                const std::size_t y_lo = ky == 0 ? 1 : 0;
                const std::size_t y_hi = ky == 2 ? h - 1 : h;
                for (std::size_t kx = 0; kx < 3; ++kx) {
                    const double wv = wk[ky * 3 + kx];
                    const std::size_t x_lo = kx == 0 ? 1 : 0;
                    const std::size_t x_hi = kx == 2 ? w - 1 : w;
                    for (std::size_t oy = y_lo; oy < y_hi; ++oy) {
                        const double* in_row =
                            in_plane + (oy + ky - 1) * w + kx - 1;
                        double* out_row = out_plane + oy * w;
                        for (std::size_t ox = x_lo; ox < x_hi; ++ox) {
                            out_row[ox] += wv * in_row[ox];
                        }
                    }
                }
            }
        }
    }
}

/// Gradient w.r.t. the conv input: the transpose of conv3x3_plane.
void conv3x3_backward_input(const double* d_out, std::size_t c_in,
                            std::size_t h, std::size_t w,
                            const double* weights, std::size_t c_out,
                            double* d_in) {
    const std::size_t plane = h * w;
    std::fill(d_in, d_in + c_in * plane, 0.0);
    for (std::size_t oc = 0; oc < c_out; ++oc) {
        const double* d_out_plane = d_out + oc * plane;
        for (std::size_t ic = 0; ic < c_in; ++ic) {
            double* d_in_plane = d_in + ic * plane;
            const double* wk = weights + (oc * c_in + ic) * 9;
            for (std::size_t ky = 0; ky < 3; ++ky) {
                const std::size_t y_lo = ky == 0 ? 1 : 0;
                const std::size_t y_hi = ky == 2 ? h - 1 : h;
                for (std::size_t kx = 0; kx < 3; ++kx) {
                    const double wv = wk[ky * 3 + kx];
                    const std::size_t x_lo = kx == 0 ? 1 : 0;
                    const std::size_t x_hi = kx == 2 ? w - 1 : w;
                    for (std::size_t oy = y_lo; oy < y_hi; ++oy) {
                        double* d_in_row =
                            d_in_plane + (oy + ky - 1) * w + kx - 1;
                        const double* d_out_row = d_out_plane + oy * w;
                        for (std::size_t ox = x_lo; ox < x_hi; ++ox) {
                            d_in_row[ox] += wv * d_out_row[ox];
                        }
                    }
                }
            }
        }
    }
}

/// Accumulates weight and bias gradients for one sample.
void conv3x3_backward_params(const double* in, const double* d_out,
                             std::size_t c_in, std::size_t h, std::size_t w,
                             std::size_t c_out, double* d_weights,
                             double* d_bias) {
    const std::size_t plane = h * w;
    for (std::size_t oc = 0; oc < c_out; ++oc) {
        const double* d_out_plane = d_out + oc * plane;
        double bias_sum = 0.0;
        for (std::size_t i = 0; i < plane; ++i) bias_sum += d_out_plane[i];
        d_bias[oc] += bias_sum;
        for (std::size_t ic = 0; ic < c_in; ++ic) {
            const double* in_plane = in + ic * plane;
            double* dwk = d_weights + (oc * c_in + ic) * 9;
            for (std::size_t ky = 0; ky < 3; ++ky) {
                const std::size_t y_lo = ky == 0 ? 1 : 0;
                const std::size_t y_hi = ky == 2 ? h - 1 : h;
                for (std::size_t kx = 0; kx < 3; ++kx) {
                    const std::size_t x_lo = kx == 0 ? 1 : 0;
                    const std::size_t x_hi = kx == 2 ? w - 1 : w;
                    double acc = 0.0;
                    for (std::size_t oy = y_lo; oy < y_hi; ++oy) {
                        const double* in_row =
                            in_plane + (oy + ky - 1) * w + kx - 1;
                        const double* d_out_row = d_out_plane + oy * w;
                        for (std::size_t ox = x_lo; ox < x_hi; ++ox) {
                            acc += in_row[ox] * d_out_row[ox];
                        }
                    }
                    dwk[ky * 3 + kx] += acc;
                }
            }
        }
    }
}

void relu_inplace(double* v, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) v[i] = v[i] > 0.0 ? v[i] : 0.0;
}

/// d_in masked by the post-activation values (zero where the unit was off).
void relu_backward(const double* act, double* d, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) {
        if (act[i] <= 0.0) d[i] = 0.0;
    }
}

/// 2x2 max pool, stride 2, floor output dims. argmax holds the flat index of
/// the winning input cell within the sample's [C, H, W] block; the first
/// maximum in row-major scan order wins ties.
void maxpool2x2(const double* in, std::size_t c, std::size_t h, std::size_t w,
                double* out, std::uint32_t* argmax) {
    const std::size_t h2 = h / 2;
    const std::size_t w2 = w / 2;
    for (std::size_t ch = 0; ch < c; ++ch) {
        const double* in_plane = in + ch * h * w;
        for (std::size_t oy = 0; oy < h2; ++oy) {
            for (std::size_t ox = 0; ox < w2; ++ox) {
                const std::size_t base = (oy * 2) * w + ox * 2;
                std::size_t best = base;
                double best_v = in_plane[base];
                const std::size_t cand[3] = {base + 1, base + w, base + w + 1};
                for (std::size_t idx : cand) {
                    if (in_plane[idx] > best_v) {
                        best_v = in_plane[idx];
                        best = idx;
                    }
                }
                const std::size_t o = (ch * h2 + oy) * w2 + ox;
                out[o] = best_v;
                argmax[o] = static_cast<std::uint32_t>(ch * h * w + best);
            }
        }
    }
}

void maxpool2x2_backward(const double* d_out, const std::uint32_t* argmax,
                         std::size_t c, std::size_t h, std::size_t w,
                         double* d_in) {
    const std::size_t h2 = h / 2;
    const std::size_t w2 = w / 2;
    std::fill(d_in, d_in + c * h * w, 0.0);
    const std::size_t n_out = c * h2 * w2;
    for (std::size_t i = 0; i < n_out; ++i) {
        d_in[argmax[i]] += d_out[i];
    }
}

struct BatchDims {
    std::size_t n = 0;
    std::size_t side = 0;
};

BatchDims check_batch(const Tensor& batch) {
    const auto& s = batch.shape();
    if (s.size() != 4 || s[1] != kIn || s[2] != s[3]) {
        throw std::invalid_argument(
            "forward: batch must have shape [N, 3, S, S]");
    }
    if (s[0] == 0) throw std::invalid_argument("forward: empty batch");
    if (s[2] < 8) {
        throw std::invalid_argument("forward: spatial side must be >= 8");
    }
    return {s[0], s[2]};
}

/// Per-block activations for one forward pass.
struct ForwardCache {
    BatchDims dims;
    std::array<std::vector<double>, 3> act;  // post-ReLU conv outputs
    std::array<std::vector<double>, 3> pooled;
    std::array<std::vector<std::uint32_t>, 3> argmax;
    std::vector<double> gap; // [N, kN2]
    Tensor logits;
};

struct BlockDims {
    std::size_t c_in, c_out, h, w; // h, w are the pre-pool extents
};

std::array<BlockDims, 3> block_dims(std::size_t side) {
    std::array<BlockDims, 3> d{};
    d[0] = {kIn, kN0, side, side};
    d[1] = {kN0, kN1, side / 2, side / 2};
    d[2] = {kN1, kN2, side / 4, side / 4};
    return d;
}

ForwardCache run_forward(const SmallCNN& net, const Tensor& batch) {
    ForwardCache fc;
    fc.dims = check_batch(batch);
    const std::size_t n = fc.dims.n;
    const auto blocks = block_dims(fc.dims.side);

    for (int b = 0; b < 3; ++b) {
        const auto& bd = blocks[static_cast<std::size_t>(b)];
        fc.act[static_cast<std::size_t>(b)].resize(n * bd.c_out * bd.h * bd.w);
        fc.pooled[static_cast<std::size_t>(b)].resize(n * bd.c_out * (bd.h / 2) *
                                                      (bd.w / 2));
        fc.argmax[static_cast<std::size_t>(b)].resize(
            fc.pooled[static_cast<std::size_t>(b)].size());
    }
    fc.gap.resize(n * kN2);
    fc.logits = Tensor({n, kK});

    for (std::size_t s = 0; s < n; ++s) {
        const double* x = batch.data() + s * kIn * fc.dims.side * fc.dims.side;
        for (std::size_t b = 0; b < 3; ++b) {
            const auto& bd = blocks[b];
            double* act = fc.act[b].data() + s * bd.c_out * bd.h * bd.w;
            conv3x3_plane(x, bd.c_in, bd.h, bd.w, net.conv_w[b].data(),
                          net.conv_b[b].data(), bd.c_out, act);
            relu_inplace(act, bd.c_out * bd.h * bd.w);
            double* pooled = fc.pooled[b].data() +
                             s * bd.c_out * (bd.h / 2) * (bd.w / 2);
            std::uint32_t* am = fc.argmax[b].data() +
                                s * bd.c_out * (bd.h / 2) * (bd.w / 2);
            maxpool2x2(act, bd.c_out, bd.h, bd.w, pooled, am);
            x = pooled;
        }
        const auto& last = blocks[2];
        const std::size_t ph = last.h / 2;
        const std::size_t pw = last.w / 2;
        const double* feat = fc.pooled[2].data() + s * kN2 * ph * pw;
        double* g = fc.gap.data() + s * kN2;
        const double inv = 1.0 / static_cast<double>(ph * pw);
        for (std::size_t c = 0; c < kN2; ++c) {
            double sum = 0.0;
            const double* plane = feat + c * ph * pw;
            for (std::size_t i = 0; i < ph * pw; ++i) sum += plane[i];
            g[c] = sum * inv;
        }
        double* lg = fc.logits.data() + s * kK;
        for (std::size_t k = 0; k < kK; ++k) {
            const double* wrow = net.fc_w.data() + k * kN2;
            double sum = net.fc_b[k];
            for (std::size_t c = 0; c < kN2; ++c) sum += wrow[c] * g[c];
            lg[k] = sum;
        }
    }
    return fc;
}

void check_labels(const Tensor& logits, const std::vector<int>& labels) {
    const auto& s = logits.shape();
    if (s.size() != 2 || s[1] != kK) {
        throw std::invalid_argument("cross_entropy: logits must be [N, 2]");
    }
    if (labels.size() != s[0]) {
        throw std::invalid_argument(
            "cross_entropy: labels size does not match batch");
    }
    for (int l : labels) {
        if (l < 0 || l >= static_cast<int>(kK)) {
            throw std::invalid_argument("cross_entropy: label out of range");
        }
    }
}

} // namespace

SmallCNN::SmallCNN() {
    std::size_t c_in = kIn;
    for (std::size_t b = 0; b < 3; ++b) {
        const auto c_out = static_cast<std::size_t>(kChannels[b]);
        conv_w[b] = Tensor({c_out, c_in, 3, 3});
        conv_b[b] = Tensor({c_out});
        c_in = c_out;
    }
    fc_w = Tensor({kK, kN2});
    fc_b = Tensor({kK});
}

std::vector<Tensor*> SmallCNN::parameters() {
    return {&conv_w[0], &conv_b[0], &conv_w[1], &conv_b[1],
            &conv_w[2], &conv_b[2], &fc_w,      &fc_b};
}

std::vector<const Tensor*> SmallCNN::parameters() const {
    return {&conv_w[0], &conv_b[0], &conv_w[1], &conv_b[1],
            &conv_w[2], &conv_b[2], &fc_w,      &fc_b};
}

void init_params(SmallCNN& net, std::uint64_t seed) {
    Rng rng(seed);
    for (Tensor* t : net.parameters()) {
        const auto& shape = t->shape();
        if (shape.size() == 1) {
            t->fill(0.0);
            continue;
        }
        // fan_in: input channels * kernel area for conv, input features for fc
        std::size_t fan_in = 1;
        for (std::size_t i = 1; i < shape.size(); ++i) fan_in *= shape[i];
        const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
        for (double& v : t->values()) v = rng.uniform(-bound, bound);
    }
}

Tensor forward(const SmallCNN& net, const Tensor& batch) {
    return run_forward(net, batch).logits;
}

Tensor softmax(const Tensor& logits) {
    const auto& s = logits.shape();
    if (s.size() != 2 || s[1] == 0) {
        throw std::invalid_argument("softmax: expected a [N, K] tensor");
    }
    Tensor out(s);
    const std::size_t n = s[0];
    const std::size_t k = s[1];
    for (std::size_t r = 0; r < n; ++r) {
        const double* row = logits.data() + r * k;
        double* prow = out.data() + r * k;
        const double m = *std::max_element(row, row + k);
        double denom = 0.0;
        for (std::size_t j = 0; j < k; ++j) {
            prow[j] = std::exp(row[j] - m);
            denom += prow[j];
        }
        for (std::size_t j = 0; j < k; ++j) prow[j] /= denom;
    }
    return out;
}

std::vector<int> predict(const Tensor& logits) {
    const auto& s = logits.shape();
    if (s.size() != 2 || s[1] == 0) {
        throw std::invalid_argument("predict: expected a [N, K] tensor");
    }
    std::vector<int> out(s[0]);
    for (std::size_t r = 0; r < s[0]; ++r) {
        const double* row = logits.data() + r * s[1];
        out[r] = static_cast<int>(
            std::max_element(row, row + s[1]) - row);
    }
    return out;
}

double cross_entropy(const Tensor& logits, const std::vector<int>& labels) {
    check_labels(logits, labels);
    const std::size_t n = logits.shape()[0];
    double total = 0.0;
    for (std::size_t r = 0; r < n; ++r) {
        const double* row = logits.data() + r * kK;
        const double m = *std::max_element(row, row + kK);
        double denom = 0.0;
        for (std::size_t j = 0; j < kK; ++j) denom += std::exp(row[j] - m);
        const double target = row[static_cast<std::size_t>(labels[r])];
        total += std::log(denom) - (target - m);
    }
    return total / static_cast<double>(n);
}

BackwardResult backward(const SmallCNN& net, const Tensor& batch,
                        const std::vector<int>& labels) {
    ForwardCache fc = run_forward(net, batch);
    check_labels(fc.logits, labels);

    BackwardResult res;
    res.loss = cross_entropy(fc.logits, labels);
    for (const Tensor* p : net.parameters()) {
        res.grads.emplace_back(p->shape());
    }
    Tensor& d_cw0 = res.grads[0];
    Tensor& d_cb0 = res.grads[1];
    Tensor& d_cw1 = res.grads[2];
    Tensor& d_cb1 = res.grads[3];
    Tensor& d_cw2 = res.grads[4];
    Tensor& d_cb2 = res.grads[5];
    Tensor& d_fcw = res.grads[6];
    Tensor& d_fcb = res.grads[7];
    std::array<Tensor*, 3> d_conv_w{&d_cw0, &d_cw1, &d_cw2};
    std::array<Tensor*, 3> d_conv_b{&d_cb0, &d_cb1, &d_cb2};

    const std::size_t n = fc.dims.n;
    const auto blocks = block_dims(fc.dims.side);
    const Tensor probs = softmax(fc.logits);
    const double inv_n = 1.0 / static_cast<double>(n);

    // Scratch buffers sized for the largest per-sample stage.
    std::vector<double> d_act(blocks[0].c_out * blocks[0].h * blocks[0].w);
    std::vector<double> d_pool(d_act.size());

    for (std::size_t s = 0; s < n; ++s) {
        double d_logits[kK];
        for (std::size_t k = 0; k < kK; ++k) {
            const double onehot =
                static_cast<std::size_t>(labels[s]) == k ? 1.0 : 0.0;
            d_logits[k] = (probs[s * kK + k] - onehot) * inv_n;
        }
        const double* g = fc.gap.data() + s * kN2;
        for (std::size_t k = 0; k < kK; ++k) {
            d_fcb[k] += d_logits[k];
            double* dwrow = d_fcw.data() + k * kN2;
            for (std::size_t c = 0; c < kN2; ++c) {
                dwrow[c] += d_logits[k] * g[c];
            }
        }
        // d(gap) then spread over the last pooled plane
        const auto& last = blocks[2];
        const std::size_t ph = last.h / 2;
        const std::size_t pw = last.w / 2;
        const double inv_plane = 1.0 / static_cast<double>(ph * pw);
        double* d_pooled = d_pool.data();
        for (std::size_t c = 0; c < kN2; ++c) {
            double dg = 0.0;
            for (std::size_t k = 0; k < kK; ++k) {
                dg += d_logits[k] * net.fc_w[k * kN2 + c];
            }
            const double per_cell = dg * inv_plane;
            double* plane = d_pooled + c * ph * pw;
            std::fill(plane, plane + ph * pw, per_cell);
        }

        for (int b = 2; b >= 0; --b) {
            const auto& bd = blocks[static_cast<std::size_t>(b)];
            const std::size_t act_off =
                s * bd.c_out * bd.h * bd.w;
            const std::size_t pool_off =
                s * bd.c_out * (bd.h / 2) * (bd.w / 2);
            maxpool2x2_backward(
                d_pooled, fc.argmax[static_cast<std::size_t>(b)].data() + pool_off,
                bd.c_out, bd.h, bd.w, d_act.data());
            relu_backward(fc.act[static_cast<std::size_t>(b)].data() + act_off,
                          d_act.data(), bd.c_out * bd.h * bd.w);
            const double* block_in =
                b == 0 ? batch.data() + s * kIn * bd.h * bd.w
                       : fc.pooled[static_cast<std::size_t>(b - 1)].data() +
                             s * bd.c_in * bd.h * bd.w;
            conv3x3_backward_params(
                block_in, d_act.data(), bd.c_in, bd.h, bd.w, bd.c_out,
                d_conv_w[static_cast<std::size_t>(b)]->data(),
                d_conv_b[static_cast<std::size_t>(b)]->data());
            if (b > 0) {
                conv3x3_backward_input(
                    d_act.data(), bd.c_in, bd.h, bd.w,
                    net.conv_w[static_cast<std::size_t>(b)].data(), bd.c_out,
                    d_pool.data());
                d_pooled = d_pool.data();
            }
        }
    }
    return res;
}

void sgd_step(SmallCNN& net, const std::vector<Tensor>& grads,
              std::vector<Tensor>& velocity, const SGDConfig& config,
              double eta) {
    auto params = net.parameters();
    if (grads.size() != params.size()) {
        throw std::invalid_argument("sgd_step: gradient count mismatch");
    }
    if (velocity.empty()) {
        for (const Tensor* p : params) velocity.emplace_back(p->shape());
    }
    if (velocity.size() != params.size()) {
        throw std::invalid_argument("sgd_step: velocity count mismatch");
    }
    for (std::size_t i = 0; i < params.size(); ++i) {
        Tensor& theta = *params[i];
        const Tensor& g = grads[i];
        Tensor& v = velocity[i];
        if (g.shape() != theta.shape() || v.shape() != theta.shape()) {
            throw std::invalid_argument("sgd_step: tensor shape mismatch");
        }
        double* tv = theta.data();
        const double* gv = g.data();
        double* vv = v.data();
        const std::size_t m = theta.numel();
        for (std::size_t j = 0; j < m; ++j) {
            vv[j] = config.momentum * vv[j] + gv[j] +
                    config.weight_decay * tv[j];
            tv[j] -= eta * vv[j];
        }
    }
}

double cosine_lr(const CosineSchedule& schedule, int t) {
    if (schedule.total_epochs <= 0) {
        throw std::invalid_argument("cosine_lr: total_epochs must be positive");
    }
    if (t < 0 || t > schedule.total_epochs) {
        throw std::invalid_argument("cosine_lr: step outside [0, total_epochs]");
    }
    const double frac =
        static_cast<double>(t) / static_cast<double>(schedule.total_epochs);
    constexpr double kPi = 3.14159265358979323846;
    return schedule.lr_min +
           0.5 * (schedule.lr0 - schedule.lr_min) * (1.0 + std::cos(kPi * frac));
}

namespace {

constexpr char kCkptMagic[8] = {'F', 'I', 'M', 'C', 'K', 'P', 'T', '\n'};
constexpr std::uint32_t kCkptVersion = 1;

void put_u32(std::string& buf, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) {
        buf.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
    }
}

void put_u64(std::string& buf, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) {
        buf.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
    }
}

void put_f64(std::string& buf, double v) {
    put_u64(buf, std::bit_cast<std::uint64_t>(v));
}

class ByteReader {
public:
    ByteReader(const std::string& data, const std::string& what)
        : data_(data), what_(what) {}

    std::uint32_t u32() {
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) {
            v |= static_cast<std::uint32_t>(byte()) << (8 * i);
        }
        return v;
    }

    std::uint64_t u64() {
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) {
            v |= static_cast<std::uint64_t>(byte()) << (8 * i);
        }
        return v;
    }

    double f64() { return std::bit_cast<double>(u64()); }

    std::size_t pos() const { return pos_; }

private:
    unsigned char byte() {
        if (pos_ >= data_.size()) {
            throw ConfigError(what_ + ": truncated checkpoint");
        }
        return static_cast<unsigned char>(data_[pos_++]);
    }

    const std::string& data_;
    std::string what_;
    std::size_t pos_ = 0;
};

} // namespace

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
    std::string buf;
    buf.append(kCkptMagic, sizeof(kCkptMagic));
    put_u32(buf, kCkptVersion);
    put_u32(buf, static_cast<std::uint32_t>(ckpt.epoch));
    put_f64(buf, ckpt.lr0);
    put_f64(buf, ckpt.momentum);
    put_f64(buf, ckpt.weight_decay);
    const auto params = ckpt.net.parameters();
    put_u32(buf, static_cast<std::uint32_t>(params.size()));
    for (const Tensor* t : params) {
        put_u32(buf, static_cast<std::uint32_t>(t->shape().size()));
        for (std::size_t d : t->shape()) put_u64(buf, d);
        for (double v : t->values()) put_f64(buf, v);
    }
    put_u64(buf, fnv1a64_bytes(buf.data(), buf.size()));

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw IoError("cannot open checkpoint for writing: " + path.string());
    }
    out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (!out) {
        throw IoError("failed to write checkpoint: " + path.string());
    }
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot open checkpoint: " + path.string());
    }
    std::string data((std::istreambuf_iterator<char>(in)),
                     std::istreambuf_iterator<char>());
    const std::string what = path.string();
    if (data.size() < sizeof(kCkptMagic) + 8 ||
        std::memcmp(data.data(), kCkptMagic, sizeof(kCkptMagic)) != 0) {
        throw ConfigError(what + ": not a checkpoint file");
    }
    const std::size_t body = data.size() - 8;
    std::uint64_t stored = 0;
    for (int i = 0; i < 8; ++i) {
        stored |= static_cast<std::uint64_t>(
                      static_cast<unsigned char>(data[body + static_cast<std::size_t>(i)]))
                  << (8 * i);
    }
    if (fnv1a64_bytes(data.data(), body) != stored) {
        throw ConfigError(what + ": checkpoint checksum mismatch");
    }

    Checkpoint ckpt;
    ByteReader br(data, what);
    (void)br.u64(); // magic
    if (br.u32() != kCkptVersion) {
        throw ConfigError(what + ": unsupported checkpoint version");
    }
    ckpt.epoch = static_cast<int>(br.u32());
    ckpt.lr0 = br.f64();
    ckpt.momentum = br.f64();
    ckpt.weight_decay = br.f64();
    const std::uint32_t n_tensors = br.u32();
    auto params = ckpt.net.parameters();
    if (n_tensors != params.size()) {
        throw ConfigError(what + ": unexpected tensor count");
    }
    for (Tensor* t : params) {
        const std::uint32_t ndim = br.u32();
        if (ndim != t->shape().size()) {
            throw ConfigError(what + ": tensor rank mismatch");
        }
        for (std::size_t d : t->shape()) {
            if (br.u64() != d) {
                throw ConfigError(what + ": tensor shape mismatch");
            }
        }
        for (double& v : t->values()) v = br.f64();
    }
    if (br.pos() != body) {
        throw ConfigError(what + ": trailing bytes in checkpoint");
    }
    return ckpt;
}

} // namespace fimcb
